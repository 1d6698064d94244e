//! Independent oracles and samplers shared by the integration tests.
#![allow(dead_code)]

use fused_gait::actuator_ff::{Joint, Link, RigidBodyModel};
use fused_gait::geometry::{Mat3, Vec3};
use fused_gait::pose_spaces::{ArmJoints, JointPose, JointRange, KinematicConfig, LegJoints};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw(rng: &mut ChaCha8Rng, r: &JointRange<f64>, margin: f64) -> f64 {
    rng.random_range(r.min + margin..r.max - margin)
}

/// Random pose within the default joint limits. `knee_min` keeps the legs
/// and arms away from the straight, singular configuration.
pub fn random_joint_pose(rng: &mut ChaCha8Rng, knee_min: f64) -> JointPose<f64> {
    let k = KinematicConfig::<f64>::default();
    let l = k.limits.leg;
    let a = k.limits.arm;
    let leg = |s: f64, rng: &mut ChaCha8Rng| LegJoints {
        hip_yaw: s * draw(rng, &l.hip_yaw, 0.0),
        hip_roll: s * draw(rng, &l.hip_roll, 0.0),
        hip_pitch: draw(rng, &l.hip_pitch, 0.0),
        knee_pitch: rng.random_range(l.knee_pitch.min.max(knee_min)..l.knee_pitch.max),
        ankle_pitch: draw(rng, &l.ankle_pitch, 0.0),
        ankle_roll: s * draw(rng, &l.ankle_roll, 0.0),
    };
    let left_leg = leg(1.0, rng);
    let right_leg = leg(-1.0, rng);
    let arm = |s: f64, rng: &mut ChaCha8Rng| ArmJoints {
        shoulder_pitch: draw(rng, &a.shoulder_pitch, 0.0),
        shoulder_roll: s * draw(rng, &a.shoulder_roll, 0.0),
        elbow_pitch: rng.random_range(a.elbow_pitch.min.max(knee_min)..a.elbow_pitch.max),
    };
    let left_arm = arm(1.0, rng);
    let right_arm = arm(-1.0, rng);
    JointPose { left_leg, right_leg, left_arm, right_arm }
}

/// Weighted least squares line through `(t, y, w)` by Cramer's rule on the
/// normal equations, with time measured from the first sample. Returns the
/// value at `now` and the slope.
pub fn dense_wls(samples: &[(f64, f64, f64)], now: f64) -> (f64, f64) {
    let t0 = samples[0].0;
    let (mut s0, mut s1, mut s2, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y, w) in samples {
        let t = t - t0;
        s0 += w;
        s1 += w * t;
        s2 += w * t * t;
        b0 += w * y;
        b1 += w * t * y;
    }
    let det = s0 * s2 - s1 * s1;
    let intercept = (b0 * s2 - s1 * b1) / det;
    let slope = (s0 * b1 - s1 * b0) / det;
    (intercept + slope * (now - t0), slope)
}

/// `Σ αᵏ x[n−k]` for every prefix, with the sum of absolute terms.
pub fn explicit_ew(xs: &[f64], alpha: f64) -> Vec<(f64, f64)> {
    (0..xs.len())
        .map(|n| {
            let mut sum = 0.0;
            let mut abs = 0.0;
            for k in 0..=n {
                let term = alpha.powi(k as i32) * xs[n - k];
                sum += term;
                abs += term.abs();
            }
            (sum, abs)
        })
        .collect()
}

/// One-sided finite-difference slopes of `f` at `x` with step `h`.
pub fn one_sided_slopes(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    ((f(x) - f(x - h)) / h, (f(x + h) - f(x)) / h)
}

pub fn diag_inertia(yy: f64) -> Mat3<f64> {
    Mat3::from_rows([[yy, 0.0, 0.0], [0.0, yy, 0.0], [0.0, 0.0, yy]])
}

/// Planar two-link arm hanging from a fixed base, joints about `y`.
pub struct TwoLink {
    pub m: [f64; 2],
    pub l1: f64,
    pub a: [f64; 2],
    pub i: [f64; 2],
}

impl TwoLink {
    pub fn model(&self) -> RigidBodyModel<f64> {
        let y = Vec3::new(0.0, 1.0, 0.0);
        RigidBodyModel::new(vec![
            Link { name: "base".into(), parent: None, joint: None, mass: 1.0, com: Vec3::zeros(), inertia: Mat3::zeros() },
            Link {
                name: "upper".into(),
                parent: Some(0),
                joint: Some(Joint { index: 0, origin: Vec3::zeros(), axis: y, sign: 1.0 }),
                mass: self.m[0],
                com: Vec3::new(0.0, 0.0, -self.a[0]),
                inertia: diag_inertia(self.i[0]),
            },
            Link {
                name: "lower".into(),
                parent: Some(1),
                joint: Some(Joint { index: 1, origin: Vec3::new(0.0, 0.0, -self.l1), axis: y, sign: 1.0 }),
                mass: self.m[1],
                com: Vec3::new(0.0, 0.0, -self.a[1]),
                inertia: diag_inertia(self.i[1]),
            },
        ])
        .unwrap()
    }

    /// Torques from the closed form Euler-Lagrange equations of the double
    /// pendulum under gravity `g` along `-z`.
    pub fn lagrangian_torques(&self, q: [f64; 2], qd: [f64; 2], qdd: [f64; 2], g: f64) -> [f64; 2] {
        let [m1, m2] = self.m;
        let [a1, a2] = self.a;
        let [i1, i2] = self.i;
        let l1 = self.l1;
        let (s1, s2, s12, c2) = (q[0].sin(), q[1].sin(), (q[0] + q[1]).sin(), q[1].cos());
        let m11 = i1 + i2 + m1 * a1 * a1 + m2 * (l1 * l1 + a2 * a2 + 2.0 * l1 * a2 * c2);
        let m12 = i2 + m2 * (a2 * a2 + l1 * a2 * c2);
        let m22 = i2 + m2 * a2 * a2;
        let h = m2 * l1 * a2 * s2;
        let g1 = m1 * g * a1 * s1 + m2 * g * (l1 * s1 + a2 * s12);
        let g2 = m2 * g * a2 * s12;
        [
            m11 * qdd[0] + m12 * qdd[1] - h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]) + g1,
            m12 * qdd[0] + m22 * qdd[1] + h * qd[0] * qd[0] + g2,
        ]
    }
}
