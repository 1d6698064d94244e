//! Fused angle feedback: feedback vector, corrective action activations,
//! corrective actions, timing feedback and virtual slope.
//!
//! Axis naming: `x` is the lateral plane (fused roll deviations `d_phi`) and
//! `y` the sagittal plane (fused pitch deviations `d_theta`). A positive
//! activation of any corrective action tilts the robot toward positive fused
//! angles, so stabilizing gains are negative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cpg::{leg_phase, GaitOutput, InverseAdditions};
use crate::error::{Error, Result};
use crate::estimation::{deviations, expected_attitude, DeviationPair, FusedAngles, LimitCycleModel};
use crate::filters::{
    clamp, sharp_deadband_unchecked, smooth_deadband_unchecked, EwIntegrator, MeanFilter, PhaseWeightTable,
    SoftBounds, WlbfFilter,
};
use crate::geometry::Vec3;
use crate::pose_spaces::{AbstractPose, Side};
use crate::scalar::{lit, sgn, Real};

pub const FEEDBACK_NAMES: [&str; 6] = ["Px", "Py", "Ix", "Iy", "Dx", "Dy"];
pub const ACTION_NAMES: [&str; 5] = ["arm", "hip", "cont_foot", "support_foot", "com"];

/// Lateral (`x`) and sagittal (`y`) pair of values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct PlanePair<T: Real> {
    pub x: T,
    pub y: T,
}

impl<T: Real> PlanePair<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn splat(v: T) -> Self {
        Self { x: v, y: v }
    }

    fn from_deviation(d: &DeviationPair<T>) -> Self {
        Self { x: d.d_phi, y: d.d_theta }
    }
}

/// `e = [e_Px, e_Py, e_Ix, e_Iy, e_Dx, e_Dy]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeedbackVector<T: Real>(pub [T; 6]);

impl<T: Real> FeedbackVector<T> {
    pub fn from_parts(p: PlanePair<T>, i: PlanePair<T>, d: PlanePair<T>) -> Self {
        Self([p.x, p.y, i.x, i.y, d.x, d.y])
    }

    pub fn proportional(&self) -> PlanePair<T> {
        PlanePair::new(self.0[0], self.0[1])
    }

    pub fn integral(&self) -> PlanePair<T> {
        PlanePair::new(self.0[2], self.0[3])
    }

    pub fn derivative(&self) -> PlanePair<T> {
        PlanePair::new(self.0[4], self.0[5])
    }
}

/// Corrective action gains matrix `K_a` (5×6). In configuration files the
/// matrix is written sparsely as `"row,col" = value`, where rows and columns
/// are indices or the names in [`ACTION_NAMES`] and [`FEEDBACK_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "", try_from = "BTreeMap<String, T>", into = "BTreeMap<String, T>")]
pub struct GainsMatrix<T: Real>(pub [[T; 6]; 5]);

fn parse_index(token: &str, names: &[&str]) -> Option<usize> {
    let token = token.trim();
    names.iter().position(|n| n.eq_ignore_ascii_case(token)).or_else(|| token.parse::<usize>().ok().filter(|&i| i < names.len()))
}

impl<T: Real> TryFrom<BTreeMap<String, T>> for GainsMatrix<T> {
    type Error = Error;
    fn try_from(entries: BTreeMap<String, T>) -> Result<Self> {
        let mut k = [[T::zero(); 6]; 5];
        for (key, value) in entries {
            let (r, c) = key
                .split_once(',')
                .ok_or_else(|| Error::param(format!("gains matrix key `{key}` is not of the form row,col")))?;
            let row = parse_index(r, &ACTION_NAMES).ok_or_else(|| Error::param(format!("unknown corrective action `{r}`")))?;
            let col = parse_index(c, &FEEDBACK_NAMES).ok_or_else(|| Error::param(format!("unknown feedback component `{c}`")))?;
            if !value.is_finite() {
                return Err(Error::param(format!("gains matrix entry `{key}` is not finite")));
            }
            k[row][col] = value;
        }
        Ok(Self(k))
    }
}

impl<T: Real> From<GainsMatrix<T>> for BTreeMap<String, T> {
    fn from(m: GainsMatrix<T>) -> Self {
        let mut out = BTreeMap::new();
        for (r, row) in m.0.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    out.insert(format!("{},{}", ACTION_NAMES[r], FEEDBACK_NAMES[c]), v);
                }
            }
        }
        out
    }
}

impl<T: Real> GainsMatrix<T> {
    pub fn nonzero_count(&self) -> usize {
        self.0.iter().flatten().filter(|v| **v != T::zero()).count()
    }
}

/// Activation of each corrective action. `combined` is `K_a e`; `lateral`
/// and `sagittal` are the contributions of the `x` and `y` feedback
/// components, which drive the lateral and sagittal components of each action.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActivationVector<T: Real> {
    pub combined: [T; 5],
    pub lateral: [T; 5],
    pub sagittal: [T; 5],
}

impl<T: Real> ActivationVector<T> {
    pub fn is_zero(&self) -> bool {
        self.lateral.iter().chain(&self.sagittal).all(|v| *v == T::zero())
    }
}

/// `u_a = K_a e`.
pub fn activations<T: Real>(k: &GainsMatrix<T>, e: &FeedbackVector<T>) -> ActivationVector<T> {
    let mut out = ActivationVector::default();
    for i in 0..5 {
        for j in 0..6 {
            let term = k.0[i][j] * e.0[j];
            out.combined[i] += term;
            if j % 2 == 0 {
                out.lateral[i] += term;
            } else {
                out.sagittal[i] += term;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct TimingGains<T: Real> {
    /// Shape gain of the phase weighting, at least 1.
    pub k_tw: T,
    pub k_su: T,
    pub k_sd: T,
    pub deadband: T,
}

impl<T: Real> Default for TimingGains<T> {
    fn default() -> Self {
        Self { k_tw: lit(2.0), k_su: lit(20.0), k_sd: lit(40.0), deadband: lit(0.01) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct VirtualSlopeGains<T: Real> {
    pub deadband: T,
    /// Scale when tilted in the walking direction.
    pub scale_with: T,
    /// Scale when tilted against the walking direction.
    pub scale_against: T,
    /// Foot height per unit of slope, command velocity and swing angle (m).
    pub gain: T,
}

impl<T: Real> Default for VirtualSlopeGains<T> {
    fn default() -> Self {
        Self { deadband: lit(0.02), scale_with: T::one(), scale_against: lit(0.25), gain: lit(1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct FeedbackGains<T: Real> {
    pub kp: PlanePair<T>,
    pub kd: PlanePair<T>,
    pub ki: PlanePair<T>,
    pub deadband_p: PlanePair<T>,
    pub deadband_d: PlanePair<T>,
    /// Deadband applied to the deviation before integration.
    pub deadband_i: PlanePair<T>,
    /// Mean filter lengths (samples) before the P deadband and after the
    /// integrator.
    pub mean_window_p: usize,
    pub mean_window_i: usize,
    pub wlbf_capacity: usize,
    pub half_life: T,
    pub timing: TimingGains<T>,
    pub virtual_slope: VirtualSlopeGains<T>,
}

impl<T: Real> Default for FeedbackGains<T> {
    fn default() -> Self {
        Self {
            kp: PlanePair::splat(T::one()),
            kd: PlanePair::splat(lit(0.1)),
            ki: PlanePair::splat(lit(0.02)),
            deadband_p: PlanePair::splat(lit(0.01)),
            deadband_d: PlanePair::splat(lit(0.05)),
            deadband_i: PlanePair::splat(T::zero()),
            mean_window_p: 5,
            mean_window_i: 5,
            wlbf_capacity: 10,
            half_life: lit(1.0),
            timing: TimingGains::default(),
            virtual_slope: VirtualSlopeGains::default(),
        }
    }
}

impl<T: Real> FeedbackGains<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("kp", self.kp),
            ("kd", self.kd),
            ("ki", self.ki),
            ("deadband_p", self.deadband_p),
            ("deadband_d", self.deadband_d),
            ("deadband_i", self.deadband_i),
        ];
        for (name, p) in nonneg {
            if !(p.x >= T::zero() && p.y >= T::zero()) || !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::param(format!("feedback {name} must be finite and >= 0")));
            }
        }
        if self.mean_window_p == 0 || self.mean_window_i == 0 || self.wlbf_capacity == 0 {
            return Err(Error::param("feedback filter lengths must be at least 1"));
        }
        if !(self.half_life > T::zero()) {
            return Err(Error::param("integral half-life must be positive"));
        }
        let t = &self.timing;
        if !(t.k_tw >= T::one()) {
            return Err(Error::param(format!("timing weight gain k_tw must be >= 1, got {}", t.k_tw)));
        }
        if !(t.k_su >= T::zero() && t.k_sd >= T::zero() && t.deadband >= T::zero()) {
            return Err(Error::param("timing gains and deadband must be >= 0"));
        }
        let v = &self.virtual_slope;
        if !(v.deadband >= T::zero() && v.scale_with >= T::zero() && v.scale_against >= T::zero()) {
            return Err(Error::param("virtual slope deadband and scales must be >= 0"));
        }
        Ok(())
    }
}

/// Which feedback mechanisms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureToggles {
    pub proportional: bool,
    pub derivative: bool,
    pub integral: bool,
    pub timing: bool,
    pub virtual_slope: bool,
}

impl Default for FeatureToggles {
    fn default() -> Self {
        Self { proportional: true, derivative: true, integral: true, timing: true, virtual_slope: true }
    }
}

impl FeatureToggles {
    pub fn none() -> Self {
        Self { proportional: false, derivative: false, integral: false, timing: false, virtual_slope: false }
    }
}

/// Saturation limits and shaping of the corrective actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ActionConfig<T: Real> {
    pub arm_angle_bounds: SoftBounds<T>,
    pub leg_angle_bounds: SoftBounds<T>,
    pub foot_angle_bounds: SoftBounds<T>,
    pub com_shift_bounds: SoftBounds<T>,
    /// Width of the support foot fade ramps (rad of leg phase).
    pub support_ramp: T,
}

impl<T: Real> Default for ActionConfig<T> {
    fn default() -> Self {
        Self {
            arm_angle_bounds: SoftBounds::symmetric(lit(1.5), lit(0.3)).expect("valid default"),
            leg_angle_bounds: SoftBounds::symmetric(lit(0.8), lit(0.2)).expect("valid default"),
            foot_angle_bounds: SoftBounds::symmetric(lit(0.6), lit(0.15)).expect("valid default"),
            com_shift_bounds: SoftBounds::symmetric(lit(0.05), lit(0.01)).expect("valid default"),
            support_ramp: T::PI() * lit(0.1),
        }
    }
}

impl<T: Real> ActionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.support_ramp > T::zero()) {
            return Err(Error::param("support foot ramp width must be positive"));
        }
        Ok(())
    }
}

/// Fade weight of the support foot angle action for one leg. Full weight
/// during single support of that leg, with linear ramps at both ends; the
/// ramp is clamped to half the single support length.
pub fn support_foot_weight<T: Real>(mu: T, side: Side, mu_ds: T, ramp: T) -> T {
    let phase = leg_phase(mu, side);
    let start = mu_ds;
    let end = T::PI();
    let ramp = ramp.min((end - start) * lit(0.5));
    if !(ramp > T::zero()) || phase <= start || phase >= end {
        return T::zero();
    }
    clamp(((phase - start) / ramp).min((end - phase) / ramp), T::zero(), T::one())
}

/// Open-loop pose with the corrective actions of `u` applied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdjustedPose<T: Real> {
    pub pose: AbstractPose<T>,
    pub inverse: InverseAdditions<T>,
    /// CoM shift after saturation, `(forward, lateral to the left)`.
    pub com_shift: PlanePair<T>,
}

/// Extension keeping the vertical hip-to-ankle distance when the leg angles
/// change from `(ax, ay)` to `(bx, by)`.
fn compensated_extension<T: Real>(eta: T, ax: T, ay: T, bx: T, by: T) -> T {
    let denom = bx.cos() * by.cos();
    if !(denom > lit(1e-6)) {
        return eta;
    }
    clamp(T::one() - (T::one() - eta) * ax.cos() * ay.cos() / denom, T::zero(), T::one())
}

/// Applies the five activated corrective actions to the open-loop gait
/// output and soft-saturates the final arm, leg and foot angles and the CoM
/// shift.
pub fn apply_corrective_actions<T: Real>(
    gait: &GaitOutput<T>,
    u: &ActivationVector<T>,
    mu: T,
    mu_ds: T,
    cfg: &ActionConfig<T>,
) -> AdjustedPose<T> {
    let mut pose = gait.pose;
    let mut inverse = gait.inverse;
    let [arm_x, hip_x, cont_x, sup_x, com_x] = u.lateral;
    let [arm_y, hip_y, cont_y, sup_y, com_y] = u.sagittal;

    for side in [Side::Left, Side::Right] {
        let arm = pose.arm_mut(side);
        arm.angle_x -= arm_x;
        arm.angle_y -= arm_y;
        arm.angle_x = cfg.arm_angle_bounds.apply(arm.angle_x);
        arm.angle_y = cfg.arm_angle_bounds.apply(arm.angle_y);

        let weight = support_foot_weight(mu, side, mu_ds, cfg.support_ramp);
        let leg = pose.leg_mut(side);
        let (ax, ay) = (leg.angle_x, leg.angle_y);
        if hip_x != T::zero() || hip_y != T::zero() {
            leg.angle_x += hip_x;
            leg.angle_y += hip_y;
            leg.foot_angle_x += hip_x;
            leg.foot_angle_y += hip_y;
        }
        leg.foot_angle_x -= cont_x + weight * sup_x;
        leg.foot_angle_y -= cont_y + weight * sup_y;

        leg.angle_x = cfg.leg_angle_bounds.apply(leg.angle_x);
        leg.angle_y = cfg.leg_angle_bounds.apply(leg.angle_y);
        leg.foot_angle_x = cfg.foot_angle_bounds.apply(leg.foot_angle_x);
        leg.foot_angle_y = cfg.foot_angle_bounds.apply(leg.foot_angle_y);
        if leg.angle_x != ax || leg.angle_y != ay {
            leg.extension = compensated_extension(leg.extension, ax, ay, leg.angle_x, leg.angle_y);
        }
    }

    let com_shift = PlanePair::new(cfg.com_shift_bounds.apply(-com_x), cfg.com_shift_bounds.apply(com_y));
    if com_shift.x != T::zero() || com_shift.y != T::zero() {
        // shifting the CoM moves both feet the opposite way relative to the trunk
        let delta = Vec3::new(-com_shift.y, -com_shift.x, T::zero());
        inverse.left_foot += delta;
        inverse.right_foot += delta;
    }
    AdjustedPose { pose, inverse, com_shift }
}

/// Gait frequency from the mean-filtered fused roll deviation.
pub fn timing_feedback<T: Real>(d_phi_filtered: T, mu: T, gains: &TimingGains<T>, f_n: T, f_max: T, mu_ds: T) -> Result<T> {
    if !(gains.k_tw >= T::one()) {
        return Err(Error::param(format!("timing weight gain k_tw must be >= 1, got {}", gains.k_tw)));
    }
    let weight = clamp(-gains.k_tw * (mu - mu_ds * lit(0.5)).sin(), -T::one(), T::one());
    let e_t = smooth_deadband_unchecked(d_phi_filtered * weight, gains.deadband);
    let f = if e_t >= T::zero() { f_n + gains.k_su * e_t } else { f_n + gains.k_sd * e_t };
    Ok(clamp(f, T::zero(), f_max))
}

/// Virtual slope from the pitch deviation, with asymmetric scaling relative
/// to the walking direction.
pub fn virtual_slope_angle<T: Real>(d_theta: T, v_gx: T, g: &VirtualSlopeGains<T>) -> T {
    let slope = sharp_deadband_unchecked(d_theta, g.deadband);
    let with_motion = sgn(slope) * sgn(v_gx) > T::zero();
    slope * if with_motion { g.scale_with } else { g.scale_against }
}

/// Inverse-space foot height adjustment (m) for a leg at `swing_angle`.
pub fn virtual_slope<T: Real>(d_theta: T, v_gx: T, swing_angle: T, g: &VirtualSlopeGains<T>) -> T {
    g.gain * virtual_slope_angle(d_theta, v_gx, g) * v_gx * swing_angle
}

/// Complete configuration of the feedback pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct FeedbackConfig<T: Real> {
    pub gains: FeedbackGains<T>,
    pub gains_matrix: GainsMatrix<T>,
    pub actions: ActionConfig<T>,
    pub limit_cycle: LimitCycleModel<T>,
    pub wlbf_weights: PhaseWeightTable<T>,
}

impl<T: Real> Default for FeedbackConfig<T> {
    fn default() -> Self {
        Self {
            gains: FeedbackGains::default(),
            gains_matrix: GainsMatrix::default(),
            actions: ActionConfig::default(),
            limit_cycle: LimitCycleModel::default(),
            wlbf_weights: PhaseWeightTable::default(),
        }
    }
}

impl<T: Real> FeedbackConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        self.actions.validate()?;
        self.limit_cycle.validate()?;
        self.wlbf_weights.validate()
    }
}

/// Per-tick result of the feedback pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeedbackOutput<T: Real> {
    pub deviation: DeviationPair<T>,
    /// Mean-filtered deviations (lateral, sagittal).
    pub filtered: PlanePair<T>,
    pub e: FeedbackVector<T>,
    pub u: ActivationVector<T>,
    pub f_g: T,
}

/// Stateful P, I and D feedback of both planes.
#[derive(Debug, Clone)]
pub struct FeedbackPipeline<T: Real> {
    cfg: FeedbackConfig<T>,
    toggles: FeatureToggles,
    mean_p: [MeanFilter<T>; 2],
    wlbf: [WlbfFilter<T>; 2],
    ew: [EwIntegrator<T>; 2],
    mean_i: [MeanFilter<T>; 2],
}

impl<T: Real> FeedbackPipeline<T> {
    pub fn new(cfg: FeedbackConfig<T>, toggles: FeatureToggles, dt: T) -> Result<Self> {
        cfg.validate()?;
        let g = &cfg.gains;
        let mean = |n| -> Result<[MeanFilter<T>; 2]> { Ok([MeanFilter::new(n)?, MeanFilter::new(n)?]) };
        let ew = EwIntegrator::with_half_life(g.half_life, dt)?;
        Ok(Self {
            mean_p: mean(g.mean_window_p)?,
            wlbf: [WlbfFilter::new(g.wlbf_capacity)?, WlbfFilter::new(g.wlbf_capacity)?],
            ew: [ew, ew],
            mean_i: mean(g.mean_window_i)?,
            cfg,
            toggles,
        })
    }

    pub fn config(&self) -> &FeedbackConfig<T> {
        &self.cfg
    }

    pub fn toggles(&self) -> FeatureToggles {
        self.toggles
    }

    /// Processes one fused angle sample at time `t` and gait phase `mu`.
    /// The derivative term stays zero until a positively weighted sample
    /// has been seen.
    pub fn tick(&mut self, fused: &FusedAngles<T>, mu: T, t: T, f_n: T, f_max: T, mu_ds: T) -> Result<FeedbackOutput<T>> {
        let g = self.cfg.gains;
        let deviation = deviations(fused, &expected_attitude(mu, &self.cfg.limit_cycle));
        let d = PlanePair::from_deviation(&deviation);
        let dv = [d.x, d.y];
        let kp = [g.kp.x, g.kp.y];
        let kd = [g.kd.x, g.kd.y];
        let ki = [g.ki.x, g.ki.y];
        let rp = [g.deadband_p.x, g.deadband_p.y];
        let rd = [g.deadband_d.x, g.deadband_d.y];
        let ri = [g.deadband_i.x, g.deadband_i.y];
        let weight = self.cfg.wlbf_weights.weight(leg_phase(mu, Side::Right));

        let mut filtered = [T::zero(); 2];
        let mut p = [T::zero(); 2];
        let mut i = [T::zero(); 2];
        let mut dd = [T::zero(); 2];
        for a in 0..2 {
            filtered[a] = self.mean_p[a].update(dv[a]);
            if self.toggles.proportional {
                p[a] = kp[a] * smooth_deadband_unchecked(filtered[a], rp[a]);
            }
            self.wlbf[a].update(t, dv[a], weight)?;
            if self.toggles.derivative {
                let slope = match self.wlbf[a].evaluate(t) {
                    Ok(fit) => fit.slope,
                    Err(Error::State(_)) => T::zero(),
                    Err(e) => return Err(e),
                };
                dd[a] = kd[a] * smooth_deadband_unchecked(slope, rd[a]);
            }
            let integrated = self.ew[a].update(smooth_deadband_unchecked(dv[a], ri[a]));
            let smoothed = self.mean_i[a].update(integrated);
            if self.toggles.integral {
                i[a] = ki[a] * smoothed;
            }
        }
        let e = FeedbackVector([p[0], p[1], i[0], i[1], dd[0], dd[1]]);
        let u = activations(&self.cfg.gains_matrix, &e);
        let f_g = if self.toggles.timing { timing_feedback(filtered[0], mu, &g.timing, f_n, f_max, mu_ds)? } else { f_n };
        Ok(FeedbackOutput { deviation, filtered: PlanePair::new(filtered[0], filtered[1]), e, u, f_g })
    }

    /// Foot height adjustments for both legs, or zero when disabled.
    pub fn virtual_slope_heights(&self, d_theta: T, v_gx: T, gait: &GaitOutput<T>) -> [T; 2] {
        if !self.toggles.virtual_slope {
            return [T::zero(); 2];
        }
        let g = &self.cfg.gains.virtual_slope;
        [virtual_slope(d_theta, v_gx, gait.left_swing, g), virtual_slope(d_theta, v_gx, gait.right_swing, g)]
    }
}

/// Sagittal proportional term of one axis, exposed for unit checks.
pub fn proportional_term<T: Real>(filtered: T, kp: T, radius: T) -> Result<T> {
    Ok(kp * crate::filters::smooth_deadband(filtered, radius)?)
}

/// Derivative term of one axis from a WLBF filter.
pub fn derivative_term<T: Real>(filter: &WlbfFilter<T>, now: T, kd: T, radius: T) -> Result<T> {
    let fit = filter.evaluate(now)?;
    Ok(kd * crate::filters::smooth_deadband(fit.slope, radius)?)
}
