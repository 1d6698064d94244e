//! Fused angle attitude representation, expected limit cycle, deviations and
//! gyroscope calibration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::clamp;
use crate::geometry::{Quat, Vec3};
use crate::scalar::{lit, wrap_angle, Real};

/// Tolerance on the norm of quaternions accepted as rotations.
pub const UNIT_QUAT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FusedAngles<T: Real> {
    pub yaw: T,
    pub pitch: T,
    pub roll: T,
    /// `+1` when the body z axis points into the upper hemisphere, else `-1`.
    pub hemisphere: i8,
}

impl<T: Real> Default for FusedAngles<T> {
    fn default() -> Self {
        Self { yaw: T::zero(), pitch: T::zero(), roll: T::zero(), hemisphere: 1 }
    }
}

fn check_unit<T: Real>(q: &Quat<T>) -> Result<()> {
    let n = q.norm();
    if !((n - T::one()).abs() <= lit(UNIT_QUAT_TOLERANCE)) {
        return Err(Error::param(format!("orientation quaternion must have unit norm, got {n}")));
    }
    Ok(())
}

/// Fused angles of the body-to-world rotation `q`.
pub fn orientation_to_fused<T: Real>(q: &Quat<T>) -> Result<FusedAngles<T>> {
    check_unit(q)?;
    let q = q.normalized();
    let two = lit::<T>(2.0);
    let one = T::one();
    let sin_pitch = clamp(two * (q.w * q.y - q.x * q.z), -one, one);
    let sin_roll = clamp(two * (q.y * q.z + q.w * q.x), -one, one);
    let zz = q.w * q.w - q.x * q.x - q.y * q.y + q.z * q.z;
    Ok(FusedAngles {
        yaw: wrap_angle(two * q.z.atan2(q.w)),
        pitch: sin_pitch.asin(),
        roll: sin_roll.asin(),
        hemisphere: if zz >= T::zero() { 1 } else { -1 },
    })
}

/// Rotation with the given fused angles. Pitch and roll must satisfy
/// `|pitch| + |roll| <= π/2`.
pub fn fused_to_orientation<T: Real>(f: &FusedAngles<T>) -> Result<Quat<T>> {
    let (sp, sr) = (f.pitch.sin(), f.roll.sin());
    let crit = sp * sp + sr * sr;
    if !(crit <= T::one() + lit(1e-12)) || !(f.hemisphere == 1 || f.hemisphere == -1) {
        return Err(Error::param("fused pitch and roll outside the valid domain"));
    }
    let h: T = if f.hemisphere > 0 { T::one() } else { -T::one() };
    let cos_tilt = h * (T::one() - crit).max(T::zero()).sqrt();
    let tilt = clamp(cos_tilt, -T::one(), T::one()).acos();
    let axis_angle = sp.atan2(sr);
    let (s, c) = (tilt * lit(0.5)).sin_cos();
    let q_tilt = Quat::new(c, s * axis_angle.cos(), s * axis_angle.sin(), T::zero());
    let q_yaw = Quat::from_axis_angle(Vec3::unit_z(), f.yaw);
    Ok((q_yaw * q_tilt).normalized())
}

/// Sine model of one fused angle over the gait phase.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct AxisCycle<T: Real> {
    pub offset: T,
    pub amplitude: T,
    pub phase_shift: T,
}

impl<T: Real> AxisCycle<T> {
    pub fn evaluate(&self, mu: T) -> T {
        self.offset + self.amplitude * (mu + self.phase_shift).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct LimitCycleModel<T: Real> {
    pub pitch: AxisCycle<T>,
    pub roll: AxisCycle<T>,
}

impl<T: Real> LimitCycleModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch.amplitude >= T::zero() && self.roll.amplitude >= T::zero()) {
            return Err(Error::param("limit cycle amplitudes must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExpectedAttitude<T: Real> {
    pub pitch: T,
    pub roll: T,
}

pub fn expected_attitude<T: Real>(mu: T, m: &LimitCycleModel<T>) -> ExpectedAttitude<T> {
    ExpectedAttitude { pitch: m.pitch.evaluate(mu), roll: m.roll.evaluate(mu) }
}

/// Fused angle deviations from the expected limit cycle. Positive `d_theta`
/// means tilted further forward than expected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DeviationPair<T: Real> {
    pub d_theta: T,
    pub d_phi: T,
}

pub fn deviations<T: Real>(f: &FusedAngles<T>, expected: &ExpectedAttitude<T>) -> DeviationPair<T> {
    DeviationPair { d_theta: f.pitch - expected.pitch, d_phi: f.roll - expected.roll }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct GyroCalibration<T: Real> {
    /// Temperatures (°C) at which the low and high scale factors were measured.
    pub temp_low: T,
    pub temp_high: T,
    pub scale_low: T,
    pub scale_high: T,
    /// Rotation from the sensor frame into the body frame.
    pub offset: Quat<T>,
    pub bias: Vec3<T>,
}

impl<T: Real> Default for GyroCalibration<T> {
    fn default() -> Self {
        Self {
            temp_low: lit(20.0),
            temp_high: lit(60.0),
            scale_low: T::one(),
            scale_high: T::one(),
            offset: Quat::identity(),
            bias: Vec3::zeros(),
        }
    }
}

impl<T: Real> GyroCalibration<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_low > T::zero() && self.scale_high > T::zero()) {
            return Err(Error::param("gyro scale factors must be positive"));
        }
        if !(self.temp_low <= self.temp_high) {
            return Err(Error::param("gyro calibration needs temp_low <= temp_high"));
        }
        check_unit(&self.offset)
    }

    /// Scale factor at `temperature`, saturated outside the calibration range.
    pub fn scale(&self, temperature: T) -> T {
        if !(self.temp_high > self.temp_low) {
            return if temperature > self.temp_low { self.scale_high } else { self.scale_low };
        }
        let s = clamp((temperature - self.temp_low) / (self.temp_high - self.temp_low), T::zero(), T::one());
        self.scale_low + (self.scale_high - self.scale_low) * s
    }
}

pub fn apply_gyro_calibration<T: Real>(raw: Vec3<T>, temperature: T, cal: &GyroCalibration<T>) -> Vec3<T> {
    cal.offset.rotate((raw - cal.bias).scale(cal.scale(temperature)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct RestDetectorConfig<T: Real> {
    /// Length of the rest detection window (s).
    pub window: T,
    pub gravity: T,
    /// Allowed deviation of the accelerometer norm from gravity (m/s²).
    pub accel_tolerance: T,
    /// Allowed bias-corrected angular rate norm (rad/s).
    pub rate_tolerance: T,
    /// Time constant of the bias convergence while at rest (s).
    pub time_constant: T,
}

impl<T: Real> Default for RestDetectorConfig<T> {
    fn default() -> Self {
        Self {
            window: lit(0.5),
            gravity: lit(9.81),
            accel_tolerance: lit(0.3),
            rate_tolerance: lit(0.05),
            time_constant: lit(0.2),
        }
    }
}

impl<T: Real> RestDetectorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let entries = [
            ("window", self.window),
            ("gravity", self.gravity),
            ("accel_tolerance", self.accel_tolerance),
            ("rate_tolerance", self.rate_tolerance),
            ("time_constant", self.time_constant),
        ];
        for (name, v) in entries {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(format!("rest detector {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct RestSample<T: Real> {
    dt: T,
    rate: Vec3<T>,
    accel_norm: T,
}

/// Gyro bias estimator that only adapts during automatically detected rest.
#[derive(Debug, Clone)]
pub struct BiasAutoCalibrator<T: Real> {
    cfg: RestDetectorConfig<T>,
    bias: Vec3<T>,
    samples: VecDeque<RestSample<T>>,
    span: T,
    at_rest: bool,
    updates: u64,
}

impl<T: Real> BiasAutoCalibrator<T> {
    pub fn new(cfg: RestDetectorConfig<T>, initial_bias: Vec3<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, bias: initial_bias, samples: VecDeque::new(), span: T::zero(), at_rest: false, updates: 0 })
    }

    pub fn bias(&self) -> Vec3<T> {
        self.bias
    }

    /// Whether the last update declared rest.
    pub fn at_rest(&self) -> bool {
        self.at_rest
    }

    /// Number of updates that changed the bias estimate.
    pub fn update_count(&self) -> u64 {
        self.updates
    }

    pub fn update(&mut self, rate: Vec3<T>, accel: Vec3<T>, dt: T) -> Result<Vec3<T>> {
        if !(dt > T::zero()) {
            return Err(Error::param(format!("time step must be positive, got {dt}")));
        }
        self.samples.push_back(RestSample { dt, rate, accel_norm: accel.norm() });
        self.span += dt;
        while let Some(front) = self.samples.front() {
            if self.span - front.dt >= self.cfg.window {
                self.span -= front.dt;
                self.samples.pop_front();
            } else {
                break;
            }
        }

        let full = self.span >= self.cfg.window * lit(1.0 - 1e-9);
        let bias = self.bias;
        let quiet = self.samples.iter().all(|s| {
            (s.accel_norm - self.cfg.gravity).abs() < self.cfg.accel_tolerance
                && (s.rate - bias).norm() < self.cfg.rate_tolerance
        });
        self.at_rest = full && quiet;
        if self.at_rest {
            let mut mean = Vec3::zeros();
            for s in &self.samples {
                mean += s.rate.scale(s.dt);
            }
            let mean = mean.scale(T::one() / self.span);
            let gain = T::one() - (-dt / self.cfg.time_constant).exp();
            self.bias += (mean - self.bias).scale(gain);
            self.updates += 1;
        }
        Ok(self.bias)
    }
}
