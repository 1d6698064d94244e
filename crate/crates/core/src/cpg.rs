//! Open-loop central pattern generator.
//!
//! Leg phase convention: the right leg touches down at `μ = 0` and the left
//! leg at `μ = π`. Each leg stays on the ground from its touchdown until the
//! double support interval after the other leg's touchdown has elapsed, and
//! swings for the remaining `π - μ_ds` of the cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::pose_spaces::{AbstractArm, AbstractLeg, AbstractPose, PoseValues, Side};
use crate::scalar::{lit, wrap_angle, Real};

/// Advances the gait phase by `π f_g dt`, wrapping into `(-π, π]`.
pub fn update_phase<T: Real>(mu: T, f_g: T, dt: T) -> T {
    wrap_angle(mu + T::PI() * f_g * dt)
}

/// Phase of one leg measured from its own touchdown, in `[0, 2π)`.
pub fn leg_phase<T: Real>(mu: T, side: Side) -> T {
    let two_pi = T::PI() + T::PI();
    let shifted = match side {
        Side::Right => mu,
        Side::Left => mu + T::PI(),
    };
    let p = shifted - two_pi * (shifted / two_pi).floor();
    if p >= two_pi {
        T::zero()
    } else {
        p
    }
}

/// Swing progress in `[0, 1]` while the leg is in the air, `None` on the ground.
pub fn swing_fraction<T: Real>(leg_phase: T, mu_ds: T) -> Option<T> {
    let start = T::PI() + mu_ds;
    if leg_phase > start {
        Some((leg_phase - start) / (T::PI() - mu_ds))
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct VelocityLimits<T: Real> {
    pub max_norm: T,
    pub max_accel: T,
    pub max_jerk: T,
}

impl<T: Real> Default for VelocityLimits<T> {
    fn default() -> Self {
        Self { max_norm: T::one(), max_accel: lit(2.0), max_jerk: lit(20.0) }
    }
}

impl<T: Real> VelocityLimits<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("max_norm", self.max_norm), ("max_accel", self.max_accel), ("max_jerk", self.max_jerk)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(format!("velocity limit {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Limited gait velocity command `(v_gx, v_gy, v_gz)` together with its
/// current rate of change.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaitCommand<T: Real> {
    pub velocity: Vec3<T>,
    pub acceleration: Vec3<T>,
}

/// Distance covered while ramping an acceleration of magnitude `a` down to
/// zero in steps of `jerk·dt` on a grid of period `dt`.
fn braking_distance<T: Real>(a: T, jerk: T, dt: T) -> T {
    let m = a / (jerk * dt);
    let f = m.floor();
    jerk * dt * dt * (m * f - f * (f + T::one()) * lit(0.5))
}

/// Largest acceleration toward a target at distance `gap` from which the
/// velocity can still settle without overshoot.
fn admissible_accel<T: Real>(gap: T, limits: &VelocityLimits<T>, dt: T) -> T {
    let fits = |a: T| a * dt + braking_distance(a, limits.max_jerk, dt) <= gap;
    if fits(limits.max_accel) {
        return limits.max_accel;
    }
    let (mut lo, mut hi) = (T::zero(), limits.max_accel);
    for _ in 0..60 {
        let mid = (lo + hi) * lit(0.5);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn clamp_norm<T: Real>(v: Vec3<T>, max: T) -> Vec3<T> {
    let n = v.norm();
    if n > max {
        v.scale(max / n)
    } else {
        v
    }
}

/// One tick of norm-, acceleration- and jerk-limiting of the velocity
/// command toward `target`.
pub fn limit_command<T: Real>(
    target: Vec3<T>,
    current: &GaitCommand<T>,
    limits: &VelocityLimits<T>,
    dt: T,
) -> Result<GaitCommand<T>> {
    if !(dt > T::zero()) {
        return Err(Error::param(format!("time step must be positive, got {dt}")));
    }
    limits.validate()?;
    let target = clamp_norm(target, limits.max_norm);
    let error = target - current.velocity;
    let gap = error.norm();
    let jerk_step = limits.max_jerk * dt;

    let settle = error.scale(T::one() / dt);
    let settle_norm = settle.norm();
    if settle_norm <= limits.max_accel
        && settle_norm <= jerk_step
        && (settle - current.acceleration).norm() <= jerk_step
    {
        return Ok(GaitCommand { velocity: target, acceleration: settle });
    }

    let desired = if gap > T::zero() {
        error.scale(admissible_accel(gap, limits, dt) / gap)
    } else {
        Vec3::zeros()
    };
    let accel = clamp_norm(current.acceleration + clamp_norm(desired - current.acceleration, jerk_step), limits.max_accel);
    let velocity = clamp_norm(current.velocity + accel.scale(dt), limits.max_norm);
    let acceleration = (velocity - current.velocity).scale(T::one() / dt);
    Ok(GaitCommand { velocity, acceleration })
}

/// Halt pose given for the left limbs; the right limbs are mirror images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct HaltPose<T: Real> {
    pub leg: AbstractLeg<T>,
    pub arm: AbstractArm<T>,
}

impl<T: Real> Default for HaltPose<T> {
    fn default() -> Self {
        Self {
            leg: AbstractLeg { extension: lit(0.05), ..Default::default() },
            arm: AbstractArm { extension: lit(0.1), ..Default::default() },
        }
    }
}

impl<T: Real> HaltPose<T> {
    pub fn to_pose(&self) -> AbstractPose<T> {
        AbstractPose { left_leg: self.leg, right_leg: mirror_leg(&self.leg), left_arm: self.arm, right_arm: mirror_arm(&self.arm) }
    }
}

fn mirror_leg<T: Real>(l: &AbstractLeg<T>) -> AbstractLeg<T> {
    AbstractLeg { angle_x: -l.angle_x, angle_z: -l.angle_z, foot_angle_x: -l.foot_angle_x, ..*l }
}

fn mirror_arm<T: Real>(a: &AbstractArm<T>) -> AbstractArm<T> {
    AbstractArm { angle_x: -a.angle_x, ..*a }
}

/// Swaps left and right and negates all lateral (roll) and yaw components.
pub fn mirror_pose<T: Real>(p: &AbstractPose<T>) -> AbstractPose<T> {
    AbstractPose {
        left_leg: mirror_leg(&p.right_leg),
        right_leg: mirror_leg(&p.left_leg),
        left_arm: mirror_arm(&p.right_arm),
        right_arm: mirror_arm(&p.left_arm),
    }
}

/// Waveform amplitudes and gains of the open-loop gait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct GaitConfig<T: Real> {
    /// Nominal gait frequency in steps per second.
    pub f_n: T,
    pub f_max: T,
    /// Double support phase length in radians.
    pub mu_ds: T,
    pub halt: HaltPose<T>,
    /// Peak added leg extension during swing.
    pub lift_extension: T,
    /// Sagittal, lateral and rotational swing amplitude per unit command.
    pub swing_x: T,
    pub swing_y: T,
    pub swing_z: T,
    /// Arm swing as a fraction of the same-side sagittal leg swing, opposed.
    pub arm_swing: T,
    /// Peak foot pitch added while a foot is lifted.
    pub lift_trim: T,
    /// Lateral trunk sway amplitude applied to both feet in inverse space (m).
    pub sway: T,
    /// Hip angle lean per unit commanded acceleration, sagittal and lateral.
    pub lean_x: T,
    pub lean_y: T,
    /// Duration of walk/stand pose blending (s).
    pub blend_duration: T,
    pub limits: VelocityLimits<T>,
}

impl<T: Real> Default for GaitConfig<T> {
    fn default() -> Self {
        Self {
            f_n: lit(2.0),
            f_max: lit(3.0),
            mu_ds: lit(0.2),
            halt: HaltPose::default(),
            lift_extension: lit(0.08),
            swing_x: lit(0.2),
            swing_y: lit(0.1),
            swing_z: lit(0.15),
            arm_swing: lit(0.5),
            lift_trim: lit(0.03),
            sway: lit(0.01),
            lean_x: lit(0.02),
            lean_y: lit(0.02),
            blend_duration: lit(0.5),
            limits: VelocityLimits::default(),
        }
    }
}

impl<T: Real> GaitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_n > T::zero() && self.f_n <= self.f_max) {
            return Err(Error::param(format!("gait frequencies need 0 < f_n <= f_max, got f_n={} f_max={}", self.f_n, self.f_max)));
        }
        if !(self.mu_ds >= T::zero() && self.mu_ds < T::PI()) {
            return Err(Error::param(format!("double support length must be in [0, pi), got {}", self.mu_ds)));
        }
        if !(self.blend_duration >= T::zero()) {
            return Err(Error::param("blend duration must be nonnegative"));
        }
        let halt = self.halt.to_pose();
        crate::pose_spaces::abstract_to_joint(&halt)?;
        self.limits.validate()
    }
}

/// Fraction of body weight attributed to each root link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SupportCoefficients<T: Real> {
    pub trunk: T,
    pub left_foot: T,
    pub right_foot: T,
}

impl<T: Real> SupportCoefficients<T> {
    pub fn as_array(&self) -> [T; 3] {
        [self.trunk, self.left_foot, self.right_foot]
    }

    pub fn foot(&self, side: Side) -> T {
        match side {
            Side::Left => self.left_foot,
            Side::Right => self.right_foot,
        }
    }
}

/// Trapezoidal support weight of one leg as a function of its own phase.
fn leg_support_weight<T: Real>(phase: T, mu_ds: T) -> T {
    let pi = T::PI();
    if phase < mu_ds {
        phase / mu_ds
    } else if phase <= pi {
        T::one()
    } else if phase < pi + mu_ds {
        T::one() - (phase - pi) / mu_ds
    } else {
        T::zero()
    }
}

pub fn support_coefficients<T: Real>(mu: T, mu_ds: T) -> SupportCoefficients<T> {
    let right = leg_support_weight(leg_phase(mu, Side::Right), mu_ds);
    SupportCoefficients { trunk: T::zero(), left_foot: T::one() - right, right_foot: right }
}

/// Per-foot inverse-space position offsets added after conversion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InverseAdditions<T: Real> {
    pub left_foot: Vec3<T>,
    pub right_foot: Vec3<T>,
}

impl<T: Real> InverseAdditions<T> {
    pub fn foot_mut(&mut self, side: Side) -> &mut Vec3<T> {
        match side {
            Side::Left => &mut self.left_foot,
            Side::Right => &mut self.right_foot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaitOutput<T: Real> {
    pub pose: AbstractPose<T>,
    pub inverse: InverseAdditions<T>,
    pub support: SupportCoefficients<T>,
    /// Sagittal swing angle of each leg, positive toward the front.
    pub left_swing: T,
    pub right_swing: T,
}

impl<T: Real> GaitOutput<T> {
    pub fn swing_angle(&self, side: Side) -> T {
        match side {
            Side::Left => self.left_swing,
            Side::Right => self.right_swing,
        }
    }
}

/// Swing waveform: rises from -1 to 1 with a half cosine in swing and
/// returns linearly on the ground.
fn swing_wave<T: Real>(phase: T, mu_ds: T) -> T {
    match swing_fraction(phase, mu_ds) {
        Some(s) => -(T::PI() * s).cos(),
        None => T::one() - (phase + phase) / (T::PI() + mu_ds),
    }
}

/// Open-loop gait pose for command `cmd` at phase `mu`.
pub fn generate_pose<T: Real>(cmd: &GaitCommand<T>, mu: T, cfg: &GaitConfig<T>) -> GaitOutput<T> {
    let mut pose = cfg.halt.to_pose();
    let v = cmd.velocity;
    let lean_y = cfg.lean_x * cmd.acceleration.x;
    let lean_x = -cfg.lean_y * cmd.acceleration.y;
    let mut swing_angles = [T::zero(); 2];
    for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let phase = leg_phase(mu, side);
        let swing = swing_wave(phase, cfg.mu_ds);
        let lift = swing_fraction(phase, cfg.mu_ds).map_or(T::zero(), |s| (T::PI() * s).sin());
        let sagittal = -cfg.swing_x * v.x * swing;
        swing_angles[i] = -sagittal;

        let leg = pose.leg_mut(side);
        leg.extension += cfg.lift_extension * lift;
        leg.angle_y += sagittal + lean_y;
        leg.angle_x += cfg.swing_y * v.y * swing + lean_x;
        leg.angle_z += cfg.swing_z * v.z * swing;
        leg.foot_angle_y += cfg.lift_trim * lift + lean_y;
        leg.foot_angle_x += lean_x;

        pose.arm_mut(side).angle_y -= cfg.arm_swing * sagittal;
    }
    let sway = cfg.sway * mu.sin();
    let offset = Vec3::new(T::zero(), sway, T::zero());
    GaitOutput {
        pose,
        inverse: InverseAdditions { left_foot: offset, right_foot: offset },
        support: support_coefficients(mu, cfg.mu_ds),
        left_swing: swing_angles[0],
        right_swing: swing_angles[1],
    }
}

/// `3s² - 2s³`.
pub fn smoothstep<T: Real>(s: T) -> T {
    s * s * (lit::<T>(3.0) - s - s)
}

/// Componentwise smoothstep interpolation between two poses.
pub fn blend_pose<T: Real, P: PoseValues<T>>(a: &P, b: &P, s: T) -> Result<P> {
    if !(s >= T::zero() && s <= T::one()) {
        return Err(Error::param(format!("blend fraction must be in [0, 1], got {s}")));
    }
    let w = smoothstep(s);
    let values: Vec<T> = a.to_values().into_iter().zip(b.to_values()).map(|(x, y)| x + (y - x) * w).collect();
    P::from_values(&values)
}

/// Stateful gait engine: phase integration, command limiting and walk/stand
/// blending.
#[derive(Debug, Clone)]
pub struct Cpg<T: Real> {
    cfg: GaitConfig<T>,
    phase: T,
    command: GaitCommand<T>,
    walking: bool,
    blend: T,
}

impl<T: Real> Cpg<T> {
    pub fn new(cfg: GaitConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, phase: T::zero(), command: GaitCommand::default(), walking: false, blend: T::zero() })
    }

    pub fn config(&self) -> &GaitConfig<T> {
        &self.cfg
    }

    pub fn phase(&self) -> T {
        self.phase
    }

    pub fn command(&self) -> &GaitCommand<T> {
        &self.command
    }

    /// Current walk blend weight: 0 standing, 1 walking.
    pub fn blend(&self) -> T {
        self.blend
    }

    /// Starts or stops walking; the pose blends over the configured duration.
    pub fn set_walking(&mut self, walking: bool) {
        self.walking = walking;
    }

    /// Starts walking with no blend transition.
    pub fn start_walking_now(&mut self) {
        self.walking = true;
        self.blend = T::one();
    }

    /// Evaluates the pose for the current state, then advances the phase at
    /// frequency `f_g` and the command toward `target`.
    pub fn step(&mut self, target: Vec3<T>, f_g: T, dt: T) -> Result<GaitOutput<T>> {
        let walk = generate_pose(&self.command, self.phase, &self.cfg);
        let out = if self.blend >= T::one() {
            walk
        } else {
            let halt = self.cfg.halt.to_pose();
            GaitOutput { pose: blend_pose(&halt, &walk.pose, self.blend)?, ..walk }
        };

        let goal = if self.walking { target } else { Vec3::zeros() };
        self.command = limit_command(goal, &self.command, &self.cfg.limits, dt)?;
        let rate = if self.cfg.blend_duration > T::zero() { dt / self.cfg.blend_duration } else { T::one() };
        self.blend = if self.walking { (self.blend + rate).min(T::one()) } else { (self.blend - rate).max(T::zero()) };
        if self.blend > T::zero() {
            self.phase = update_phase(self.phase, f_g, dt);
        }
        Ok(out)
    }
}
