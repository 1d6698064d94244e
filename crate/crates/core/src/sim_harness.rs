//! Deterministic fixed-step closed loop scenarios: the identified sagittal
//! model and a lateral inverted pendulum driven by the full gait and
//! feedback stack, with configuration parsing and CSV logging.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::actuator_ff::{feedforward_setpoint, planar_biped, superpose_feedforward, ServoModel, SupportModels};
use crate::cpg::{leg_phase, swing_fraction, update_phase, Cpg, GaitConfig};
use crate::error::{Error, Result};
use crate::estimation::{fused_to_orientation, orientation_to_fused, AxisCycle, FusedAngles};
use crate::feedback::{
    apply_corrective_actions, ActivationVector, FeatureToggles, FeedbackConfig, FeedbackPipeline, ACTION_NAMES,
    FEEDBACK_NAMES,
};
use crate::geometry::{Quat, Vec3};
use crate::pose_spaces::{abstract_to_inverse, abstract_to_joint, KinematicConfig, Side};
use crate::scalar::{count, lit, Real};
use crate::tuning::{StateSpaceModel, TuningConfig};

/// Largest accepted simulation step (s).
pub const MAX_DT: f64 = 0.01;

/// Plant parameters shared by all scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct PlantConfig<T: Real> {
    /// Sagittal plant from activation to fused pitch deviation.
    pub sagittal: StateSpaceModel<T>,
    /// Weights of the sagittal activations of each action in the plant input.
    pub sagittal_mix: [T; 5],
    /// Weights of the lateral activations of each action in the lateral CoP.
    pub lateral_mix: [T; 5],
    /// Pendulum constant `g / h` (1/s²).
    pub omega_sq: T,
    /// Fused roll of each support pivot (rad).
    pub half_width: T,
    /// Ankle CoP feedback on roll error and normalized roll rate error.
    pub ankle_gain: T,
    pub ankle_damping: T,
    /// Saturation of the ankle CoP (rad).
    pub cop_limit: T,
    pub fall_threshold: T,
    /// Steady pitch offset per metre of floor step (rad/m).
    pub pitch_per_step: T,
}

impl<T: Real> Default for PlantConfig<T> {
    fn default() -> Self {
        Self {
            sagittal: StateSpaceModel::identified(),
            sagittal_mix: [T::one(); 5],
            lateral_mix: [T::zero(); 5],
            omega_sq: lit(24.0),
            half_width: lit(0.1),
            ankle_gain: lit(2.0),
            ankle_damping: lit(1.0),
            cop_limit: lit(0.03),
            fall_threshold: lit(0.6),
            pitch_per_step: lit(2.0),
        }
    }
}

impl<T: Real> PlantConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.sagittal.validate()?;
        let positive = [
            ("omega_sq", self.omega_sq),
            ("half_width", self.half_width),
            ("fall_threshold", self.fall_threshold),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(format!("plant {name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("ankle_gain", self.ankle_gain),
            ("ankle_damping", self.ankle_damping),
            ("cop_limit", self.cop_limit),
        ];
        for (name, v) in nonneg {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::param(format!("plant {name} must be >= 0, got {v}")));
            }
        }
        if self.sagittal_mix.iter().chain(&self.lateral_mix).chain(std::iter::once(&self.pitch_per_step)).any(|v| !v.is_finite()) {
            return Err(Error::param("plant mixes must be finite"));
        }
        if self.fall_threshold >= T::FRAC_PI_2() {
            return Err(Error::param("fall threshold must be below pi/2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ImuConfig<T: Real> {
    /// Standard deviation of the orientation noise per axis (rad).
    pub noise_std: T,
}

impl<T: Real> Default for ImuConfig<T> {
    fn default() -> Self {
        Self { noise_std: lit(0.001) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ServoConfig<T: Real> {
    /// Computes feed-forward setpoints of the planar biped leg joints.
    pub enabled: bool,
    pub model: ServoModel<T>,
    pub battery_voltage: T,
}

impl<T: Real> Default for ServoConfig<T> {
    fn default() -> Self {
        Self { enabled: true, model: ServoModel::default(), battery_voltage: lit(12.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PushAxis {
    Lateral,
    Sagittal,
}

/// Velocity impulse. Lateral pushes are positive to the right (rad/s of fused
/// roll) and land at the first tick at or after `time` on which the leg on the
/// push side supports. Sagittal pushes are an instant jump of the pitch
/// deviation (rad) along the minimum norm state direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct Push<T: Real> {
    pub time: T,
    pub axis: PushAxis,
    pub magnitude: T,
}

/// Mechanism a scenario is meant to isolate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Timing,
    Integral,
    VirtualSlope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ScenarioConfig<T: Real> {
    pub name: String,
    pub duration: T,
    pub dt: T,
    pub pushes: Vec<Push<T>>,
    /// Floor step height (m) met at `floor_step_time`.
    pub floor_step: T,
    pub floor_step_time: T,
    /// Sustained pitch bias from the start (rad).
    pub tilt_bias: T,
    /// Normalized walking velocity target (forward, left, turn).
    pub velocity: [T; 3],
    pub toggles: FeatureToggles,
    pub exercise: Option<Mechanism>,
    pub seed: u64,
    /// Required swing foot clearance (m) for the virtual slope scenario.
    pub clearance_margin: T,
    /// Replaces the roll limit cycle with a sine fit of the lateral plant's
    /// nominal orbit.
    pub derive_limit_cycle: bool,
}

impl<T: Real> Default for ScenarioConfig<T> {
    fn default() -> Self {
        Self {
            name: "nominal".into(),
            duration: lit(5.0),
            dt: lit(0.01),
            pushes: Vec::new(),
            floor_step: T::zero(),
            floor_step_time: T::zero(),
            tilt_bias: T::zero(),
            velocity: [T::zero(); 3],
            toggles: FeatureToggles::none(),
            exercise: None,
            seed: 0,
            clearance_margin: lit(0.005),
            derive_limit_cycle: true,
        }
    }
}

impl<T: Real> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt <= lit(MAX_DT)) {
            return Err(Error::param(format!("scenario dt must be in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return Err(Error::param("scenario duration must be positive"));
        }
        let finite = [self.floor_step, self.floor_step_time, self.tilt_bias, self.clearance_margin];
        if finite.iter().chain(&self.velocity).any(|v| !v.is_finite()) {
            return Err(Error::param("scenario values must be finite"));
        }
        if self.pushes.iter().any(|p| !p.time.is_finite() || !p.magnitude.is_finite()) {
            return Err(Error::param("push times and magnitudes must be finite"));
        }
        self.validate_toggles()
    }

    /// Rejects toggle sets that would mix other mechanisms into a scenario
    /// meant to isolate one. The integral scenario keeps P and D as its
    /// baseline.
    pub fn validate_toggles(&self) -> Result<()> {
        let Some(m) = self.exercise else { return Ok(()) };
        let t = self.toggles;
        let (allowed, extra): (&str, Vec<&str>) = match m {
            Mechanism::Timing => ("timing", [("proportional", t.proportional), ("derivative", t.derivative), ("integral", t.integral), ("virtual_slope", t.virtual_slope)].into_iter().filter(|x| x.1).map(|x| x.0).collect()),
            Mechanism::Integral => ("integral with a PD baseline", [("timing", t.timing), ("virtual_slope", t.virtual_slope)].into_iter().filter(|x| x.1).map(|x| x.0).collect()),
            Mechanism::VirtualSlope => ("virtual_slope", [("proportional", t.proportional), ("derivative", t.derivative), ("integral", t.integral), ("timing", t.timing)].into_iter().filter(|x| x.1).map(|x| x.0).collect()),
        };
        if extra.is_empty() {
            Ok(())
        } else {
            Err(Error::param(format!("scenario exercising {allowed} must not enable {}", extra.join(", "))))
        }
    }
}

/// Complete simulator configuration, one TOML section per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct SimConfig<T: Real> {
    pub gait: GaitConfig<T>,
    pub feedback: FeedbackConfig<T>,
    pub imu: ImuConfig<T>,
    pub servo: ServoConfig<T>,
    pub scenario: ScenarioConfig<T>,
    pub kinematics: KinematicConfig<T>,
    pub plant: PlantConfig<T>,
    pub tuning: TuningConfig<T>,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            gait: GaitConfig::default(),
            feedback: FeedbackConfig::default(),
            imu: ImuConfig::default(),
            servo: ServoConfig::default(),
            scenario: ScenarioConfig::default(),
            kinematics: KinematicConfig::default(),
            plant: PlantConfig::default(),
            tuning: TuningConfig::default(),
        }
    }
}

/// 1-based line of the `[name]` table header in `text`.
fn section_line(text: &str, name: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim();
        l.strip_prefix('[').and_then(|r| r.split(']').next()).is_some_and(|h| h.trim() == name || h.trim().starts_with(&format!("{name}.")))
    })
    .map(|i| i + 1)
}

impl<T: Real> SimConfig<T> {
    /// Parses and validates a configuration. Both syntax and validation
    /// errors carry the line they refer to.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::from_toml(&e, text))?;
        let checks: [(&str, Result<()>); 7] = [
            ("gait", cfg.gait.validate()),
            ("feedback", cfg.feedback.validate()),
            ("imu", cfg.imu.validate()),
            ("servo", cfg.servo.model.validate()),
            ("scenario", cfg.scenario.validate()),
            ("kinematics", cfg.kinematics.validate()),
            ("plant", cfg.plant.validate()),
        ];
        for (section, check) in checks {
            if let Err(e) = check {
                return Err(Error::Config { line: section_line(text, section), message: format!("[{section}] {e}") });
            }
        }
        if let Err(e) = cfg.tuning.model.validate() {
            return Err(Error::Config { line: section_line(text, "tuning"), message: format!("[tuning] {e}") });
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.gait.validate()?;
        self.feedback.validate()?;
        self.imu.validate()?;
        self.servo.model.validate()?;
        self.scenario.validate()?;
        self.kinematics.validate()?;
        self.plant.validate()
    }
}

impl<T: Real> ImuConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= T::zero()) || !self.noise_std.is_finite() {
            return Err(Error::param("IMU noise must be finite and >= 0"));
        }
        Ok(())
    }
}

/// State of both plants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState<T: Real> {
    /// Sagittal model state.
    pub x: [T; 2],
    /// Fused roll and its rate.
    pub phi: T,
    pub phi_dot: T,
    pub support: Side,
    /// Gait phase the lateral reference is evaluated at.
    pub mu: T,
}

/// Both plants with their fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plants<T: Real> {
    cfg: PlantConfig<T>,
    f_n: T,
    omega: T,
}

/// Supporting leg at phase `mu`: right on `[0, π)` of its leg phase.
pub fn support_leg<T: Real>(mu: T) -> Side {
    if leg_phase(mu, Side::Right) < T::PI() {
        Side::Right
    } else {
        Side::Left
    }
}

impl<T: Real> Plants<T> {
    pub fn new(cfg: PlantConfig<T>, f_n: T) -> Result<Self> {
        cfg.validate()?;
        if !(f_n > T::zero()) {
            return Err(Error::param("nominal gait frequency must be positive"));
        }
        Ok(Self { cfg, f_n, omega: cfg.omega_sq.sqrt() })
    }

    pub fn config(&self) -> &PlantConfig<T> {
        &self.cfg
    }

    fn half_period(&self) -> T {
        (self.omega / self.f_n) * lit(0.5)
    }

    /// Peak fused roll of the nominal orbit, `c (1 - sech(ωT/2))`.
    pub fn nominal_roll_amplitude(&self) -> T {
        self.cfg.half_width * (T::one() - T::one() / self.half_period().cosh())
    }

    /// Nominal fused roll and rate at phase `mu` for gait frequency `f_g`.
    pub fn roll_reference(&self, mu: T, f_g: T) -> (T, T) {
        let side = support_leg(mu);
        // right support moves the body toward positive roll
        let s: T = -side.sign::<T>();
        let frac = leg_phase(mu, side) / T::PI();
        let c = self.cfg.half_width;
        let arg = self.half_period() * (frac + frac - T::one());
        let ch = self.half_period().cosh();
        (s * (c - c * arg.cosh() / ch), s * (-c * self.omega * arg.sinh() / ch) * f_g / self.f_n)
    }

    /// Sine of the gait phase fitted to the nominal roll orbit in the least
    /// squares sense.
    pub fn nominal_roll_cycle(&self) -> AxisCycle<T> {
        let n = 512;
        let mut acc = T::zero();
        for i in 0..n {
            let mu = T::PI() * (count::<T>(i) + lit(0.5)) / count(n);
            acc += self.roll_reference(mu, self.f_n).0 * mu.sin();
        }
        AxisCycle { offset: T::zero(), amplitude: acc * lit(2.0) / count(n), phase_shift: T::zero() }
    }

    /// State on the nominal orbit at phase zero.
    pub fn initial_state(&self) -> PlantState<T> {
        let (phi, phi_dot) = self.roll_reference(T::zero(), self.f_n);
        PlantState { x: [T::zero(); 2], phi, phi_dot, support: Side::Right, mu: T::zero() }
    }

    fn pivot(&self, side: Side) -> T {
        -side.sign::<T>() * self.cfg.half_width
    }

    fn ankle_cop(&self, phi: T, phi_dot: T, mu: T, f_g: T) -> T {
        let (r, rd) = self.roll_reference(mu, f_g);
        let raw = self.cfg.ankle_gain * (phi - r) + self.cfg.ankle_damping * (phi_dot - rd) / self.omega;
        raw.max(-self.cfg.cop_limit).min(self.cfg.cop_limit)
    }

    /// Exact pendulum flow about a fixed pivot.
    fn pendulum(&self, phi: T, phi_dot: T, pivot: T, dt: T) -> (T, T) {
        let e = phi - pivot;
        let (sh, ch) = ((self.omega * dt).sinh(), (self.omega * dt).cosh());
        (pivot + e * ch + phi_dot / self.omega * sh, e * self.omega * sh + phi_dot * ch)
    }

    /// Advances both plants by `dt`. The sagittal model uses the trapezoidal
    /// rule with the input held; the lateral pendulum flows exactly about a
    /// pivot held for the step at the mean of the start and predicted end CoP.
    /// The support switches at the end of the step if the new phase lies in
    /// the other leg's support.
    pub fn step(&self, s: &PlantState<T>, u_a: &ActivationVector<T>, f_g: T, dt: T) -> Result<PlantState<T>> {
        if !(dt > T::zero()) {
            return Err(Error::param(format!("plant step must be positive, got {dt}")));
        }
        let mix = |w: &[T; 5], v: &[T; 5]| w.iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
        let u = mix(&self.cfg.sagittal_mix, &u_a.sagittal);
        let lateral = mix(&self.cfg.lateral_mix, &u_a.lateral);

        let m = &self.cfg.sagittal;
        let h = dt * lit(0.5);
        let lhs = [[T::one() - h * m.a[0][0], -h * m.a[0][1]], [-h * m.a[1][0], T::one() - h * m.a[1][1]]];
        let rhs = [
            s.x[0] + h * (m.a[0][0] * s.x[0] + m.a[0][1] * s.x[1]) + dt * m.b[0] * u,
            s.x[1] + h * (m.a[1][0] * s.x[0] + m.a[1][1] * s.x[1]) + dt * m.b[1] * u,
        ];
        let det = lhs[0][0] * lhs[1][1] - lhs[0][1] * lhs[1][0];
        if det == T::zero() {
            return Err(Error::numeric("singular trapezoidal step"));
        }
        let x = [(lhs[1][1] * rhs[0] - lhs[0][1] * rhs[1]) / det, (lhs[0][0] * rhs[1] - lhs[1][0] * rhs[0]) / det];

        let mu = update_phase(s.mu, f_g, dt);
        let pivot = self.pivot(s.support);
        // positive lateral activation tilts toward positive roll
        let cop0 = self.ankle_cop(s.phi, s.phi_dot, s.mu, f_g) - lateral;
        let (p1, v1) = self.pendulum(s.phi, s.phi_dot, pivot + cop0, dt);
        let cop1 = self.ankle_cop(p1, v1, mu, f_g) - lateral;
        let (phi, phi_dot) = self.pendulum(s.phi, s.phi_dot, pivot + (cop0 + cop1) * lit(0.5), dt);
        if !(x[0].is_finite() && x[1].is_finite() && phi.is_finite() && phi_dot.is_finite()) {
            return Err(Error::numeric("plant state diverged to a non-finite value"));
        }
        Ok(PlantState { x, phi, phi_dot, support: support_leg(mu), mu })
    }

    /// Pitch deviation produced by the sagittal model.
    pub fn pitch_output(&self, s: &PlantState<T>) -> T {
        self.cfg.sagittal.c[0] * s.x[0] + self.cfg.sagittal.c[1] * s.x[1]
    }

    /// Applies a push to the state.
    pub fn apply_push(&self, s: &mut PlantState<T>, axis: PushAxis, magnitude: T) {
        match axis {
            PushAxis::Lateral => s.phi_dot += magnitude,
            PushAxis::Sagittal => {
                let c = self.cfg.sagittal.c;
                let n2 = c[0] * c[0] + c[1] * c[1];
                if n2 > T::zero() {
                    s.x[0] += magnitude * c[0] / n2;
                    s.x[1] += magnitude * c[1] / n2;
                }
            }
        }
    }
}

/// Column names of the scenario CSV in output order.
pub fn log_columns() -> Vec<String> {
    let mut c: Vec<String> = ["time", "mu", "f_g", "v_gx", "theta_b", "phi_b", "d_theta", "d_phi"].map(String::from).to_vec();
    c.extend(FEEDBACK_NAMES.iter().map(|n| format!("e_{n}")));
    c.extend(ACTION_NAMES.iter().map(|n| format!("u_{n}")));
    c.extend(
        [
            "left_extension",
            "right_extension",
            "left_angle_y",
            "right_angle_y",
            "left_knee",
            "right_knee",
            "left_knee_setpoint",
            "right_knee_setpoint",
            "com_shift_x",
            "com_shift_y",
            "slope_left",
            "slope_right",
            "plant_x1",
            "plant_x2",
            "plant_phi",
            "plant_phi_dot",
            "support_right",
            "swing_fraction",
            "clearance",
            "fall",
        ]
        .map(String::from),
    );
    c
}

/// Per-tick log of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Time at which the fall flag latched.
    pub fall_time: Option<f64>,
    /// Times at which the scheduled pushes were applied.
    pub push_times: Vec<f64>,
}

impl RunLog {
    pub fn fell(&self) -> bool {
        self.fall_time.is_some()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// `(time, value)` pairs of a column with `t0 <= time <= t1`.
    pub fn window(&self, name: &str, t0: f64, t1: f64) -> Option<Vec<(f64, f64)>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().filter(|r| r[0] >= t0 - 1e-9 && r[0] <= t1 + 1e-9).map(|r| (r[0], r[i])).collect())
    }

    pub fn mean_abs(&self, name: &str, t0: f64, t1: f64) -> Option<f64> {
        let w = self.window(name, t0, t1)?;
        if w.is_empty() {
            return None;
        }
        Some(w.iter().map(|(_, v)| v.abs()).sum::<f64>() / w.len() as f64)
    }

    pub fn max_abs(&self, name: &str, t0: f64, t1: f64) -> Option<f64> {
        let w = self.window(name, t0, t1)?;
        w.iter().map(|(_, v)| v.abs()).reduce(f64::max)
    }

    /// Minimum swing foot clearance after `t0` over swing fractions in
    /// `[s_lo, s_hi]`.
    pub fn min_clearance(&self, t0: f64, s_lo: f64, s_hi: f64) -> Option<f64> {
        let s = self.columns.iter().position(|c| c == "swing_fraction")?;
        let c = self.columns.iter().position(|c| c == "clearance")?;
        self.rows.iter().filter(|r| r[0] >= t0 && r[s] >= s_lo && r[s] <= s_hi).map(|r| r[c]).reduce(f64::min)
    }

    /// Writes the header and one row per tick with nine significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.8e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }
}

fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Feed-forward state of the planar biped leg joints.
struct ServoTrack<T: Real> {
    models: SupportModels<T>,
    q_prev: Option<Vec<T>>,
    qd_prev: Vec<T>,
}

/// Runs a scenario and returns its log. Identical configurations give
/// identical logs.
pub fn run_scenario<T: Real>(cfg: &SimConfig<T>) -> Result<RunLog> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let dt = sc.dt;
    let plants = Plants::new(cfg.plant, cfg.gait.f_n)?;
    let mut fb_cfg = cfg.feedback.clone();
    if sc.derive_limit_cycle {
        fb_cfg.limit_cycle.roll = plants.nominal_roll_cycle();
    }
    let limit_cycle = fb_cfg.limit_cycle;
    let mut pipeline = FeedbackPipeline::new(fb_cfg, sc.toggles, dt)?;
    let mut cpg = Cpg::new(cfg.gait)?;
    cpg.start_walking_now();
    let mut servo = if cfg.servo.enabled {
        Some(ServoTrack { models: planar_biped()?, q_prev: None, qd_prev: vec![T::zero(); 6] })
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let noise = Normal::new(0.0, to_f64(cfg.imu.noise_std)).map_err(|e| Error::param(format!("IMU noise: {e}")))?;
    let target = Vec3::new(sc.velocity[0], sc.velocity[1], sc.velocity[2]);
    let gravity = lit::<T>(9.81);

    let steps = (to_f64(sc.duration) / to_f64(dt)).round() as usize;
    let mut state = plants.initial_state();
    let mut pending: Vec<Push<T>> = sc.pushes.clone();
    pending.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap_or(std::cmp::Ordering::Equal));
    let mut log = RunLog { columns: log_columns(), rows: Vec::with_capacity(steps + 1), fall_time: None, push_times: Vec::new() };
    let fall = cfg.plant.fall_threshold;

    for n in 0..=steps {
        let t = count::<T>(n) * dt;
        let mu = state.mu;

        let mut i = 0;
        while i < pending.len() {
            let p = pending[i];
            let side_ok = match p.axis {
                PushAxis::Lateral => state.support == if p.magnitude >= T::zero() { Side::Right } else { Side::Left },
                PushAxis::Sagittal => true,
            };
            if t >= p.time - dt * lit(1e-6) && side_ok && log.fall_time.is_none() {
                plants.apply_push(&mut state, p.axis, p.magnitude);
                log.push_times.push(to_f64(t));
                pending.remove(i);
            } else {
                i += 1;
            }
        }

        let step_offset = if t >= sc.floor_step_time { sc.floor_step * cfg.plant.pitch_per_step } else { T::zero() };
        let theta = limit_cycle.pitch.evaluate(mu) + plants.pitch_output(&state) + sc.tilt_bias + step_offset;
        let phi = state.phi;
        let truth = FusedAngles { yaw: T::zero(), pitch: theta, roll: phi, hemisphere: 1 };
        let q_true = fused_to_orientation(&truth)?;
        let measured = if cfg.imu.noise_std > T::zero() {
            let v = Vec3::new(
                lit::<T>(noise.sample(&mut rng)),
                lit::<T>(noise.sample(&mut rng)),
                lit::<T>(noise.sample(&mut rng)),
            );
            let angle = v.norm();
            let q_noise = if angle > T::zero() { Quat::from_axis_angle(v.scale(T::one() / angle), angle) } else { Quat::identity() };
            orientation_to_fused(&(q_true * q_noise).normalized())?
        } else {
            truth
        };

        let fb = pipeline.tick(&measured, mu, t, cfg.gait.f_n, cfg.gait.f_max, cfg.gait.mu_ds)?;
        let v_gx = cpg.command().velocity.x;
        let gait = cpg.step(target, fb.f_g, dt)?;
        let adjusted = apply_corrective_actions(&gait, &fb.u, mu, cfg.gait.mu_ds, &cfg.feedback.actions);
        let slope = pipeline.virtual_slope_heights(fb.filtered.y, v_gx, &gait);

        let mut inverse = abstract_to_inverse(&adjusted.pose, &cfg.kinematics)?;
        for (k, side) in [Side::Left, Side::Right].into_iter().enumerate() {
            let add = match side {
                Side::Left => adjusted.inverse.left_foot,
                Side::Right => adjusted.inverse.right_foot,
            };
            let limb = inverse.leg_mut(side);
            limb.position = limb.position + add + Vec3::new(T::zero(), T::zero(), slope[k]);
        }
        let rot = q_true.to_rotation_matrix();
        let swinging = [Side::Left, Side::Right].into_iter().find_map(|side| {
            swing_fraction(leg_phase(mu, side), cfg.gait.mu_ds).map(|s| (side, s))
        });
        let (swing_s, clearance) = match swinging {
            Some((side, s)) => {
                let z = |sd: Side| rot.mul_vec(inverse.leg(sd).position).z;
                (to_f64(s), to_f64(z(side) - z(side.opposite())))
            }
            None => (f64::NAN, f64::NAN),
        };

        let joints = abstract_to_joint(&adjusted.pose)?;
        let q = vec![
            joints.left_leg.hip_pitch,
            joints.left_leg.knee_pitch,
            joints.left_leg.ankle_pitch,
            joints.right_leg.hip_pitch,
            joints.right_leg.knee_pitch,
            joints.right_leg.ankle_pitch,
        ];
        let setpoints = match servo.as_mut() {
            Some(track) => {
                let qd: Vec<T> = match &track.q_prev {
                    Some(prev) => q.iter().zip(prev).map(|(a, b)| (*a - *b) / dt).collect(),
                    None => vec![T::zero(); 6],
                };
                let qdd: Vec<T> = if track.q_prev.is_some() {
                    qd.iter().zip(&track.qd_prev).map(|(a, b)| (*a - *b) / dt).collect()
                } else {
                    vec![T::zero(); 6]
                };
                let g_trunk = rot.transpose().mul_vec(Vec3::new(T::zero(), T::zero(), -gravity));
                let tau = superpose_feedforward(&track.models, &q, &qd, &qdd, &gait.support, g_trunk)?;
                let bv = cfg.servo.battery_voltage;
                let left = feedforward_setpoint(q[1], qd[1], tau[1], bv, &cfg.servo.model)?;
                let right = feedforward_setpoint(q[4], qd[4], tau[4], bv, &cfg.servo.model)?;
                track.q_prev = Some(q.clone());
                track.qd_prev = qd;
                (left, right)
            }
            None => (q[1], q[4]),
        };

        if log.fall_time.is_none() && (phi.abs() > fall || theta.abs() > fall) {
            log.fall_time = Some(to_f64(t));
        }

        let mut row = vec![
            to_f64(t),
            to_f64(mu),
            to_f64(fb.f_g),
            to_f64(v_gx),
            to_f64(theta),
            to_f64(phi),
            to_f64(fb.deviation.d_theta),
            to_f64(fb.deviation.d_phi),
        ];
        row.extend(fb.e.0.iter().map(|v| to_f64(*v)));
        row.extend(fb.u.combined.iter().map(|v| to_f64(*v)));
        let (ll, rl) = (adjusted.pose.leg(Side::Left), adjusted.pose.leg(Side::Right));
        row.extend([
            to_f64(ll.extension),
            to_f64(rl.extension),
            to_f64(ll.angle_y),
            to_f64(rl.angle_y),
            to_f64(q[1]),
            to_f64(q[4]),
            to_f64(setpoints.0),
            to_f64(setpoints.1),
            to_f64(adjusted.com_shift.x),
            to_f64(adjusted.com_shift.y),
            to_f64(slope[0]),
            to_f64(slope[1]),
            to_f64(state.x[0]),
            to_f64(state.x[1]),
            to_f64(state.phi),
            to_f64(state.phi_dot),
            if state.support == Side::Right { 1.0 } else { 0.0 },
            swing_s,
            clearance,
            if log.fall_time.is_some() { 1.0 } else { 0.0 },
        ]);
        log.rows.push(row);

        if n < steps {
            if log.fall_time.is_some() {
                // the robot lies on the ground: plant frozen, phase still advances
                state.mu = update_phase(state.mu, fb.f_g, dt);
                state.support = support_leg(state.mu);
            } else {
                state = plants.step(&state, &fb.u, fb.f_g, dt)?;
            }
        }
    }
    Ok(log)
}

/// Lateral push magnitudes bracketing the fall boundary with and without
/// timing feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushCalibration<T: Real> {
    /// Smallest falling magnitude without timing feedback.
    pub without_timing: T,
    /// Smallest falling magnitude with timing feedback.
    pub with_timing: T,
    /// Midpoint, which falls only without timing feedback.
    pub magnitude: T,
}

fn fall_threshold_bisection<T: Real>(cfg: &SimConfig<T>, timing: bool, lo: T, hi: T, iterations: usize) -> Result<T> {
    let mut c = cfg.clone();
    c.scenario.toggles.timing = timing;
    let falls = |c: &mut SimConfig<T>, m: T| -> Result<bool> {
        for p in c.scenario.pushes.iter_mut().filter(|p| p.axis == PushAxis::Lateral) {
            p.magnitude = m;
        }
        Ok(run_scenario(c)?.fell())
    };
    let (mut lo, mut hi) = (lo, hi);
    if falls(&mut c, lo)? || !falls(&mut c, hi)? {
        return Err(Error::numeric(format!("push bracket [{lo}, {hi}] does not straddle the fall boundary (timing {timing})")));
    }
    for _ in 0..iterations {
        let mid = (lo + hi) * lit(0.5);
        if falls(&mut c, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Finds the fall boundaries of the lateral pushes of `cfg` by bisection
/// over `[lo, hi]` and returns their midpoint.
pub fn calibrate_lateral_push<T: Real>(cfg: &SimConfig<T>, lo: T, hi: T, iterations: usize) -> Result<PushCalibration<T>> {
    if !cfg.scenario.pushes.iter().any(|p| p.axis == PushAxis::Lateral) {
        return Err(Error::param("calibration needs a lateral push in the scenario"));
    }
    let without_timing = fall_threshold_bisection(cfg, false, lo, hi, iterations)?;
    let with_timing = fall_threshold_bisection(cfg, true, lo, hi, iterations)?;
    if !(with_timing > without_timing) {
        return Err(Error::numeric(format!(
            "timing feedback does not raise the fall boundary ({with_timing} vs {without_timing})"
        )));
    }
    Ok(PushCalibration { without_timing, with_timing, magnitude: (without_timing + with_timing) * lit(0.5) })
}
