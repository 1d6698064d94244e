//! Joint, abstract and inverse pose representations and the conversions
//! between them.
//!
//! Leg chain (trunk to foot): hip yaw (z), hip roll (x), hip pitch (y), knee
//! pitch, ankle pitch, ankle roll. Arm chain: shoulder pitch, shoulder roll,
//! elbow pitch. A positive knee or elbow angle bends the joint forward.
//!
//! The abstract leg is described by its extension `η = 1 - cos(knee/2)`, the
//! angles of the hip-to-ankle centre line and the absolute foot angles. The
//! inverse space holds end effector positions and orientations in the trunk
//! frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Quat, Vec3};
use crate::scalar::{lit, wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// `+1` for left, `-1` for right (the sign of the limb's y offset).
    pub fn sign<T: Real>(self) -> T {
        match self {
            Side::Left => T::one(),
            Side::Right => -T::one(),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LegJoints<T: Real> {
    pub hip_yaw: T,
    pub hip_roll: T,
    pub hip_pitch: T,
    pub knee_pitch: T,
    pub ankle_pitch: T,
    pub ankle_roll: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ArmJoints<T: Real> {
    pub shoulder_pitch: T,
    pub shoulder_roll: T,
    pub elbow_pitch: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JointPose<T: Real> {
    pub left_leg: LegJoints<T>,
    pub right_leg: LegJoints<T>,
    pub left_arm: ArmJoints<T>,
    pub right_arm: ArmJoints<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AbstractLeg<T: Real> {
    /// Leg extension in `[0, 1]`; zero is a straight leg.
    pub extension: T,
    pub angle_x: T,
    pub angle_y: T,
    pub angle_z: T,
    pub foot_angle_x: T,
    pub foot_angle_y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AbstractArm<T: Real> {
    pub extension: T,
    pub angle_x: T,
    pub angle_y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AbstractPose<T: Real> {
    pub left_leg: AbstractLeg<T>,
    pub right_leg: AbstractLeg<T>,
    pub left_arm: AbstractArm<T>,
    pub right_arm: AbstractArm<T>,
}

/// End effector pose in the trunk frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InverseLimb<T: Real> {
    pub position: Vec3<T>,
    pub orientation: Quat<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InversePose<T: Real> {
    pub left_leg: InverseLimb<T>,
    pub right_leg: InverseLimb<T>,
    pub left_arm: InverseLimb<T>,
    pub right_arm: InverseLimb<T>,
}

/// Inclusive joint range in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JointRange<T: Real> {
    pub min: T,
    pub max: T,
}

impl<T: Real> JointRange<T> {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min: lit(min), max: lit(max) }
    }

    fn clamp(&self, x: T) -> T {
        crate::filters::clamp(x, self.min, self.max)
    }
}

/// Joint limits for one leg; the right leg uses the mirrored ranges for the
/// roll and yaw joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LegLimits<T: Real> {
    pub hip_yaw: JointRange<T>,
    pub hip_roll: JointRange<T>,
    pub hip_pitch: JointRange<T>,
    pub knee_pitch: JointRange<T>,
    pub ankle_pitch: JointRange<T>,
    pub ankle_roll: JointRange<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ArmLimits<T: Real> {
    pub shoulder_pitch: JointRange<T>,
    pub shoulder_roll: JointRange<T>,
    pub elbow_pitch: JointRange<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JointLimits<T: Real> {
    pub leg: LegLimits<T>,
    pub arm: ArmLimits<T>,
}

impl<T: Real> Default for JointLimits<T> {
    fn default() -> Self {
        Self {
            leg: LegLimits {
                hip_yaw: JointRange::new(-0.8, 0.8),
                hip_roll: JointRange::new(-0.6, 0.6),
                hip_pitch: JointRange::new(-1.6, 1.0),
                knee_pitch: JointRange::new(0.0, 2.6),
                ankle_pitch: JointRange::new(-1.3, 1.0),
                ankle_roll: JointRange::new(-0.6, 0.6),
            },
            arm: ArmLimits {
                shoulder_pitch: JointRange::new(-2.5, 2.5),
                shoulder_roll: JointRange::new(-1.2, 1.2),
                elbow_pitch: JointRange::new(0.0, 2.4),
            },
        }
    }
}

/// Link lengths and limb mounting offsets, all in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct KinematicConfig<T: Real> {
    pub thigh_length: T,
    pub shank_length: T,
    /// Lateral distance of each hip joint from the trunk origin.
    pub hip_offset_y: T,
    /// Height of the hip joints in the trunk frame (negative is below).
    pub hip_offset_z: T,
    pub upper_arm_length: T,
    pub lower_arm_length: T,
    pub shoulder_offset_y: T,
    pub shoulder_offset_z: T,
    pub limits: JointLimits<T>,
}

impl<T: Real> Default for KinematicConfig<T> {
    fn default() -> Self {
        Self {
            thigh_length: lit(0.2),
            shank_length: lit(0.2),
            hip_offset_y: lit(0.05),
            hip_offset_z: T::zero(),
            upper_arm_length: lit(0.15),
            lower_arm_length: lit(0.15),
            shoulder_offset_y: lit(0.1),
            shoulder_offset_z: lit(0.25),
            limits: JointLimits::default(),
        }
    }
}

impl<T: Real> KinematicConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("upper_arm_length", self.upper_arm_length),
            ("lower_arm_length", self.lower_arm_length),
        ];
        for (name, l) in lengths {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {l}")));
            }
        }
        Ok(())
    }

    pub fn leg_length(&self) -> T {
        self.thigh_length + self.shank_length
    }

    pub fn hip_position(&self, side: Side) -> Vec3<T> {
        Vec3::new(T::zero(), side.sign::<T>() * self.hip_offset_y, self.hip_offset_z)
    }

    pub fn shoulder_position(&self, side: Side) -> Vec3<T> {
        Vec3::new(T::zero(), side.sign::<T>() * self.shoulder_offset_y, self.shoulder_offset_z)
    }

    /// Clamps every joint of `pose` to the configured limits. Roll and yaw
    /// ranges are mirrored for the right side.
    pub fn saturate(&self, pose: &JointPose<T>) -> JointPose<T> {
        let leg = |j: &LegJoints<T>, side: Side| {
            let l = &self.limits.leg;
            let s: T = side.sign();
            LegJoints {
                hip_yaw: s * l.hip_yaw.clamp(s * j.hip_yaw),
                hip_roll: s * l.hip_roll.clamp(s * j.hip_roll),
                hip_pitch: l.hip_pitch.clamp(j.hip_pitch),
                knee_pitch: l.knee_pitch.clamp(j.knee_pitch),
                ankle_pitch: l.ankle_pitch.clamp(j.ankle_pitch),
                ankle_roll: s * l.ankle_roll.clamp(s * j.ankle_roll),
            }
        };
        let arm = |j: &ArmJoints<T>, side: Side| {
            let l = &self.limits.arm;
            let s: T = side.sign();
            ArmJoints {
                shoulder_pitch: l.shoulder_pitch.clamp(j.shoulder_pitch),
                shoulder_roll: s * l.shoulder_roll.clamp(s * j.shoulder_roll),
                elbow_pitch: l.elbow_pitch.clamp(j.elbow_pitch),
            }
        };
        JointPose {
            left_leg: leg(&pose.left_leg, Side::Left),
            right_leg: leg(&pose.right_leg, Side::Right),
            left_arm: arm(&pose.left_arm, Side::Left),
            right_arm: arm(&pose.right_arm, Side::Right),
        }
    }
}

impl<T: Real> JointPose<T> {
    pub fn leg(&self, side: Side) -> &LegJoints<T> {
        match side {
            Side::Left => &self.left_leg,
            Side::Right => &self.right_leg,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_values().iter().all(|v| v.is_finite())
    }
}

impl<T: Real> AbstractPose<T> {
    pub fn leg(&self, side: Side) -> &AbstractLeg<T> {
        match side {
            Side::Left => &self.left_leg,
            Side::Right => &self.right_leg,
        }
    }

    pub fn leg_mut(&mut self, side: Side) -> &mut AbstractLeg<T> {
        match side {
            Side::Left => &mut self.left_leg,
            Side::Right => &mut self.right_leg,
        }
    }

    pub fn arm_mut(&mut self, side: Side) -> &mut AbstractArm<T> {
        match side {
            Side::Left => &mut self.left_arm,
            Side::Right => &mut self.right_arm,
        }
    }
}

impl<T: Real> InversePose<T> {
    pub fn leg(&self, side: Side) -> &InverseLimb<T> {
        match side {
            Side::Left => &self.left_leg,
            Side::Right => &self.right_leg,
        }
    }

    pub fn leg_mut(&mut self, side: Side) -> &mut InverseLimb<T> {
        match side {
            Side::Left => &mut self.left_leg,
            Side::Right => &mut self.right_leg,
        }
    }
}

pub fn leg_joint_to_abstract<T: Real>(q: &LegJoints<T>) -> AbstractLeg<T> {
    let half_knee = q.knee_pitch * lit(0.5);
    let angle_y = q.hip_pitch + half_knee;
    let angle_x = q.hip_roll;
    AbstractLeg {
        extension: T::one() - half_knee.cos(),
        angle_x,
        angle_y,
        angle_z: q.hip_yaw,
        foot_angle_x: angle_x + q.ankle_roll,
        foot_angle_y: angle_y + q.ankle_pitch + half_knee,
    }
}

pub fn arm_joint_to_abstract<T: Real>(q: &ArmJoints<T>) -> AbstractArm<T> {
    let half_elbow = q.elbow_pitch * lit(0.5);
    AbstractArm {
        extension: T::one() - half_elbow.cos(),
        angle_x: q.shoulder_roll,
        angle_y: q.shoulder_pitch + half_elbow,
    }
}

fn check_extension<T: Real>(extension: T, what: &str) -> Result<()> {
    if !(extension >= T::zero() && extension <= T::one()) {
        return Err(Error::param(format!("{what} extension must be in [0, 1], got {extension}")));
    }
    Ok(())
}

pub fn leg_abstract_to_joint<T: Real>(a: &AbstractLeg<T>) -> Result<LegJoints<T>> {
    check_extension(a.extension, "leg")?;
    let half_knee = (T::one() - a.extension).acos();
    Ok(LegJoints {
        hip_yaw: a.angle_z,
        hip_roll: a.angle_x,
        hip_pitch: a.angle_y - half_knee,
        knee_pitch: half_knee + half_knee,
        ankle_pitch: a.foot_angle_y - a.angle_y - half_knee,
        ankle_roll: a.foot_angle_x - a.angle_x,
    })
}

pub fn arm_abstract_to_joint<T: Real>(a: &AbstractArm<T>) -> Result<ArmJoints<T>> {
    check_extension(a.extension, "arm")?;
    let half_elbow = (T::one() - a.extension).acos();
    Ok(ArmJoints {
        shoulder_pitch: a.angle_y - half_elbow,
        shoulder_roll: a.angle_x,
        elbow_pitch: half_elbow + half_elbow,
    })
}

pub fn joint_to_abstract<T: Real>(q: &JointPose<T>) -> AbstractPose<T> {
    AbstractPose {
        left_leg: leg_joint_to_abstract(&q.left_leg),
        right_leg: leg_joint_to_abstract(&q.right_leg),
        left_arm: arm_joint_to_abstract(&q.left_arm),
        right_arm: arm_joint_to_abstract(&q.right_arm),
    }
}

pub fn abstract_to_joint<T: Real>(a: &AbstractPose<T>) -> Result<JointPose<T>> {
    Ok(JointPose {
        left_leg: leg_abstract_to_joint(&a.left_leg)?,
        right_leg: leg_abstract_to_joint(&a.right_leg)?,
        left_arm: arm_abstract_to_joint(&a.left_arm)?,
        right_arm: arm_abstract_to_joint(&a.right_arm)?,
    })
}

/// Hip-to-ankle vector in the thigh frame for a given knee angle.
fn leg_chain_vector<T: Real>(knee: T, k: &KinematicConfig<T>) -> Vec3<T> {
    let (s, c) = knee.sin_cos();
    Vec3::new(-k.shank_length * s, T::zero(), -k.thigh_length - k.shank_length * c)
}

pub fn leg_forward<T: Real>(q: &LegJoints<T>, side: Side, k: &KinematicConfig<T>) -> InverseLimb<T> {
    let hip = Mat3::rot_z(q.hip_yaw) * Mat3::rot_x(q.hip_roll) * Mat3::rot_y(q.hip_pitch);
    let position = k.hip_position(side) + hip.mul_vec(leg_chain_vector(q.knee_pitch, k));
    let foot = hip * Mat3::rot_y(q.knee_pitch + q.ankle_pitch) * Mat3::rot_x(q.ankle_roll);
    InverseLimb { position, orientation: Quat::from_rotation_matrix(&foot) }
}

pub fn arm_forward<T: Real>(q: &ArmJoints<T>, side: Side, k: &KinematicConfig<T>) -> InverseLimb<T> {
    let shoulder = Mat3::rot_y(q.shoulder_pitch) * Mat3::rot_x(q.shoulder_roll);
    let (s, c) = q.elbow_pitch.sin_cos();
    let chain = Vec3::new(-k.lower_arm_length * s, T::zero(), -k.upper_arm_length - k.lower_arm_length * c);
    let position = k.shoulder_position(side) + shoulder.mul_vec(chain);
    let hand = shoulder * Mat3::rot_y(q.elbow_pitch);
    InverseLimb { position, orientation: Quat::from_rotation_matrix(&hand) }
}

/// Interior angle of a two-link chain `(a, b)` spanning distance `d`, as a
/// bend from straight. Half-angle form keeps precision near full extension.
fn two_link_bend<T: Real>(a: T, b: T, d: T) -> T {
    let outer = (a + b) * (a + b) - d * d;
    let inner = d * d - (a - b) * (a - b);
    let two = lit::<T>(2.0);
    two * outer.max(T::zero()).sqrt().atan2(inner.max(T::zero()).sqrt())
}

fn reach_check<T: Real>(v: Vec3<T>, a: T, b: T) -> Result<T> {
    let d = v.norm();
    let reach = a + b;
    let tol = reach * lit(1e-12);
    if d > reach + tol || d < (a - b).abs() - tol {
        let target = if d > T::zero() { d.min(reach).max((a - b).abs()) } else { reach };
        let closest = if d > T::zero() { v.scale(target / d) } else { Vec3::new(T::zero(), T::zero(), -reach) };
        return Err(Error::Unreachable {
            distance: d.to_f64().unwrap_or(f64::NAN),
            reach: reach.to_f64().unwrap_or(f64::NAN),
            closest: closest.to_array().map(|c| c.to_f64().unwrap_or(f64::NAN)),
        });
    }
    Ok(d)
}

/// Analytic leg inverse kinematics; returns the knee-forward solution.
/// The `closest` field of a reachability error is relative to the hip.
pub fn leg_inverse<T: Real>(target: &InverseLimb<T>, side: Side, k: &KinematicConfig<T>) -> Result<LegJoints<T>> {
    let v = target.position - k.hip_position(side);
    let d = reach_check(v, k.thigh_length, k.shank_length)?;
    let knee = two_link_bend(k.thigh_length, k.shank_length, d);

    let foot = target.orientation.normalized().to_rotation_matrix();
    // ankle-to-hip vector in the foot frame
    let u = foot.transpose().mul_vec(-v);
    let ankle_roll = if u.z < T::zero() { (-u.y).atan2(-u.z) } else { u.y.atan2(u.z) };
    let (sr, cr) = ankle_roll.sin_cos();
    let in_plane_z = sr * u.y + cr * u.z;
    let measured = u.x.atan2(in_plane_z);
    let (sk, ck) = knee.sin_cos();
    let nominal = (k.shank_length * sk).atan2(k.thigh_length + k.shank_length * ck);
    let ankle_pitch = wrap_angle(nominal - measured - knee);

    let hip = foot * Mat3::rot_x(-ankle_roll) * Mat3::rot_y(-(knee + ankle_pitch));
    let m = &hip.m;
    let hip_roll = crate::filters::clamp(m[2][1], -T::one(), T::one()).asin();
    let hip_pitch = (-m[2][0]).atan2(m[2][2]);
    let hip_yaw = (-m[0][1]).atan2(m[1][1]);
    Ok(LegJoints { hip_yaw, hip_roll, hip_pitch, knee_pitch: knee, ankle_pitch, ankle_roll })
}

/// Analytic arm inverse kinematics from the hand position (the three joint
/// arm cannot track an independent orientation, so it is ignored).
pub fn arm_inverse<T: Real>(target: &InverseLimb<T>, side: Side, k: &KinematicConfig<T>) -> Result<ArmJoints<T>> {
    let v = target.position - k.shoulder_position(side);
    let d = reach_check(v, k.upper_arm_length, k.lower_arm_length)?;
    let elbow = two_link_bend(k.upper_arm_length, k.lower_arm_length, d);
    let (se, ce) = elbow.sin_cos();
    let wx = -k.lower_arm_length * se;
    let wz = -k.upper_arm_length - k.lower_arm_length * ce;
    if wz >= T::zero() {
        return Err(Error::numeric("arm configuration folds above the shoulder"));
    }
    let shoulder_roll = crate::filters::clamp(-v.y / wz, -T::one(), T::one()).asin();
    let shoulder_pitch = wrap_angle(v.x.atan2(v.z) - wx.atan2(shoulder_roll.cos() * wz));
    Ok(ArmJoints { shoulder_pitch, shoulder_roll, elbow_pitch: elbow })
}

pub fn joint_to_inverse<T: Real>(q: &JointPose<T>, k: &KinematicConfig<T>) -> InversePose<T> {
    InversePose {
        left_leg: leg_forward(&q.left_leg, Side::Left, k),
        right_leg: leg_forward(&q.right_leg, Side::Right, k),
        left_arm: arm_forward(&q.left_arm, Side::Left, k),
        right_arm: arm_forward(&q.right_arm, Side::Right, k),
    }
}

pub fn abstract_to_inverse<T: Real>(a: &AbstractPose<T>, k: &KinematicConfig<T>) -> Result<InversePose<T>> {
    Ok(joint_to_inverse(&abstract_to_joint(a)?, k))
}

pub fn inverse_to_joint<T: Real>(p: &InversePose<T>, k: &KinematicConfig<T>) -> Result<JointPose<T>> {
    Ok(JointPose {
        left_leg: leg_inverse(&p.left_leg, Side::Left, k)?,
        right_leg: leg_inverse(&p.right_leg, Side::Right, k)?,
        left_arm: arm_inverse(&p.left_arm, Side::Left, k)?,
        right_arm: arm_inverse(&p.right_arm, Side::Right, k)?,
    })
}

pub fn inverse_to_abstract<T: Real>(p: &InversePose<T>, k: &KinematicConfig<T>) -> Result<AbstractPose<T>> {
    Ok(joint_to_abstract(&inverse_to_joint(p, k)?))
}

/// Flat value layouts shared by the CSV pose schema.
pub trait PoseValues<T: Real>: Sized {
    /// Column names in value order.
    fn columns() -> Vec<String>;
    fn to_values(&self) -> Vec<T>;
    fn from_values(values: &[T]) -> Result<Self>;
}

fn prefixed(prefixes: &[&str], fields: &[&str]) -> Vec<String> {
    prefixes.iter().flat_map(|p| fields.iter().map(move |f| format!("{p}_{f}"))).collect()
}

fn expect_len<T>(values: &[T], n: usize, what: &str) -> Result<()> {
    if values.len() != n {
        return Err(Error::param(format!("{what} needs {n} values, got {}", values.len())));
    }
    Ok(())
}

const LEG_JOINT_FIELDS: [&str; 6] = ["hip_yaw", "hip_roll", "hip_pitch", "knee_pitch", "ankle_pitch", "ankle_roll"];
const ARM_JOINT_FIELDS: [&str; 3] = ["shoulder_pitch", "shoulder_roll", "elbow_pitch"];
const LEG_ABSTRACT_FIELDS: [&str; 6] = ["extension", "angle_x", "angle_y", "angle_z", "foot_angle_x", "foot_angle_y"];
const ARM_ABSTRACT_FIELDS: [&str; 3] = ["extension", "angle_x", "angle_y"];
const LIMB_INVERSE_FIELDS: [&str; 7] = ["x", "y", "z", "qw", "qx", "qy", "qz"];

impl<T: Real> PoseValues<T> for JointPose<T> {
    fn columns() -> Vec<String> {
        let mut c = prefixed(&["left_leg", "right_leg"], &LEG_JOINT_FIELDS);
        c.extend(prefixed(&["left_arm", "right_arm"], &ARM_JOINT_FIELDS));
        c
    }

    fn to_values(&self) -> Vec<T> {
        let leg = |l: &LegJoints<T>| [l.hip_yaw, l.hip_roll, l.hip_pitch, l.knee_pitch, l.ankle_pitch, l.ankle_roll];
        let arm = |a: &ArmJoints<T>| [a.shoulder_pitch, a.shoulder_roll, a.elbow_pitch];
        let mut v = Vec::with_capacity(18);
        v.extend(leg(&self.left_leg));
        v.extend(leg(&self.right_leg));
        v.extend(arm(&self.left_arm));
        v.extend(arm(&self.right_arm));
        v
    }

    fn from_values(v: &[T]) -> Result<Self> {
        expect_len(v, 18, "joint pose")?;
        let leg = |s: &[T]| LegJoints {
            hip_yaw: s[0],
            hip_roll: s[1],
            hip_pitch: s[2],
            knee_pitch: s[3],
            ankle_pitch: s[4],
            ankle_roll: s[5],
        };
        let arm = |s: &[T]| ArmJoints { shoulder_pitch: s[0], shoulder_roll: s[1], elbow_pitch: s[2] };
        Ok(Self { left_leg: leg(&v[0..6]), right_leg: leg(&v[6..12]), left_arm: arm(&v[12..15]), right_arm: arm(&v[15..18]) })
    }
}

impl<T: Real> PoseValues<T> for AbstractPose<T> {
    fn columns() -> Vec<String> {
        let mut c = prefixed(&["left_leg", "right_leg"], &LEG_ABSTRACT_FIELDS);
        c.extend(prefixed(&["left_arm", "right_arm"], &ARM_ABSTRACT_FIELDS));
        c
    }

    fn to_values(&self) -> Vec<T> {
        let leg = |l: &AbstractLeg<T>| [l.extension, l.angle_x, l.angle_y, l.angle_z, l.foot_angle_x, l.foot_angle_y];
        let arm = |a: &AbstractArm<T>| [a.extension, a.angle_x, a.angle_y];
        let mut v = Vec::with_capacity(18);
        v.extend(leg(&self.left_leg));
        v.extend(leg(&self.right_leg));
        v.extend(arm(&self.left_arm));
        v.extend(arm(&self.right_arm));
        v
    }

    fn from_values(v: &[T]) -> Result<Self> {
        expect_len(v, 18, "abstract pose")?;
        let leg = |s: &[T]| AbstractLeg {
            extension: s[0],
            angle_x: s[1],
            angle_y: s[2],
            angle_z: s[3],
            foot_angle_x: s[4],
            foot_angle_y: s[5],
        };
        let arm = |s: &[T]| AbstractArm { extension: s[0], angle_x: s[1], angle_y: s[2] };
        Ok(Self { left_leg: leg(&v[0..6]), right_leg: leg(&v[6..12]), left_arm: arm(&v[12..15]), right_arm: arm(&v[15..18]) })
    }
}

impl<T: Real> PoseValues<T> for InversePose<T> {
    fn columns() -> Vec<String> {
        prefixed(&["left_foot", "right_foot", "left_hand", "right_hand"], &LIMB_INVERSE_FIELDS)
    }

    fn to_values(&self) -> Vec<T> {
        let limb = |l: &InverseLimb<T>| {
            let (p, q) = (l.position, l.orientation);
            [p.x, p.y, p.z, q.w, q.x, q.y, q.z]
        };
        [&self.left_leg, &self.right_leg, &self.left_arm, &self.right_arm].into_iter().flat_map(limb).collect()
    }

    fn from_values(v: &[T]) -> Result<Self> {
        expect_len(v, 28, "inverse pose")?;
        let limb = |s: &[T]| -> Result<InverseLimb<T>> {
            let orientation = Quat::new(s[3], s[4], s[5], s[6]);
            if (orientation.norm() - T::one()).abs() > lit(1e-6) {
                return Err(Error::param("inverse pose orientation must be a unit quaternion"));
            }
            Ok(InverseLimb { position: Vec3::new(s[0], s[1], s[2]), orientation: orientation.normalized() })
        };
        Ok(Self { left_leg: limb(&v[0..7])?, right_leg: limb(&v[7..14])?, left_arm: limb(&v[14..21])?, right_arm: limb(&v[21..28])? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn kin() -> KinematicConfig<f64> {
        KinematicConfig::default()
    }

    #[test]
    fn zero_pose_is_straight() {
        let a = leg_joint_to_abstract(&LegJoints::<f64>::default());
        assert_eq!(a, AbstractLeg::default());
        let q = leg_abstract_to_joint(&AbstractLeg::<f64>::default()).unwrap();
        assert_eq!(q, LegJoints::default());
    }

    #[test]
    fn knee_bend_example() {
        let q = LegJoints { knee_pitch: PI / 3.0, ..Default::default() };
        let a = leg_joint_to_abstract(&q);
        assert!((a.extension - (1.0 - (PI / 6.0).cos())).abs() < 1e-15);
        assert!((a.extension - 0.133975).abs() < 1e-6);
        assert!((a.angle_y - PI / 6.0).abs() < 1e-15);
        assert!((a.foot_angle_y - PI / 3.0).abs() < 1e-15);

        let back = leg_abstract_to_joint(&AbstractLeg {
            extension: 1.0 - (PI / 6.0).cos(),
            angle_y: PI / 6.0,
            foot_angle_y: PI / 3.0,
            ..Default::default()
        })
        .unwrap();
        assert!((back.knee_pitch - PI / 3.0).abs() < 1e-12);
        assert!(back.hip_pitch.abs() < 1e-12);
    }

    #[test]
    fn extension_out_of_range_is_rejected() {
        let bad = AbstractLeg { extension: 1.2, ..Default::default() };
        assert!(matches!(leg_abstract_to_joint(&bad), Err(Error::Parameter(_))));
        let bad = AbstractArm { extension: -0.1, ..Default::default() };
        assert!(arm_abstract_to_joint(&bad).is_err());
    }

    #[test]
    fn straight_leg_hangs_below_hip() {
        let k = kin();
        for side in [Side::Left, Side::Right] {
            let foot = leg_forward(&LegJoints::default(), side, &k);
            let expected = Vec3::new(0.0, side.sign::<f64>() * k.hip_offset_y, -0.4);
            assert!((foot.position - expected).norm() < 1e-15);
            assert_eq!(foot.orientation, Quat::identity());
            let q = leg_inverse(&foot, side, &k).unwrap();
            for v in [q.hip_yaw, q.hip_roll, q.hip_pitch, q.knee_pitch, q.ankle_pitch, q.ankle_roll] {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_extension_shortens_along_leg_axis() {
        let k = kin();
        let eta = 0.1;
        let a = AbstractLeg { extension: eta, ..Default::default() };
        let q = leg_abstract_to_joint(&a).unwrap();
        let foot = leg_forward(&q, Side::Left, &k);
        assert!(foot.position.x.abs() < 1e-15);
        assert!((foot.position.y - k.hip_offset_y).abs() < 1e-15);
        assert!((foot.position.z + k.leg_length() * (1.0 - eta)).abs() < 1e-15);
    }

    #[test]
    fn raised_foot_ik_is_symmetric_knee_bend() {
        // planar two-link oracle: equal links of length l spanning d bend the
        // knee by 2·acos(d / 2l), with thigh and shank each tilted by half of it
        let k = kin();
        let l = k.thigh_length;
        let d = 0.33;
        let knee_oracle = 2.0 * (d / (2.0 * l)).acos();
        let target = InverseLimb { position: Vec3::new(0.0, -k.hip_offset_y, -d), orientation: Quat::identity() };
        let q = leg_inverse(&target, Side::Right, &k).unwrap();
        assert!((q.knee_pitch - knee_oracle).abs() < 1e-12);
        assert!((q.hip_pitch + knee_oracle / 2.0).abs() < 1e-12);
        assert!((q.ankle_pitch + knee_oracle / 2.0).abs() < 1e-12);
        assert!(q.hip_roll.abs() < 1e-12 && q.ankle_roll.abs() < 1e-12 && q.hip_yaw.abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_reports_closest_point() {
        let k = kin();
        let target = InverseLimb { position: Vec3::new(0.0, k.hip_offset_y, -0.6), orientation: Quat::identity() };
        match leg_inverse(&target, Side::Left, &k) {
            Err(Error::Unreachable { distance, reach, closest }) => {
                assert!((distance - 0.6).abs() < 1e-12);
                assert!((reach - 0.4).abs() < 1e-12);
                assert!((closest[2] + 0.4).abs() < 1e-12);
            }
            other => panic!("expected reachability error, got {other:?}"),
        }
    }

    /// Independent forward kinematics by composing homogeneous transforms.
    fn homogeneous_leg_fk(q: &LegJoints<f64>, side: Side, k: &KinematicConfig<f64>) -> [f64; 3] {
        type H = [[f64; 4]; 4];
        fn mul(a: &H, b: &H) -> H {
            let mut r = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    r[i][j] = (0..4).map(|n| a[i][n] * b[n][j]).sum();
                }
            }
            r
        }
        fn rot(axis: usize, a: f64) -> H {
            let (s, c) = a.sin_cos();
            let mut h = [[0.0; 4]; 4];
            h[3][3] = 1.0;
            match axis {
                0 => {
                    h[0][0] = 1.0;
                    h[1][1] = c;
                    h[1][2] = -s;
                    h[2][1] = s;
                    h[2][2] = c;
                }
                1 => {
                    h[1][1] = 1.0;
                    h[0][0] = c;
                    h[0][2] = s;
                    h[2][0] = -s;
                    h[2][2] = c;
                }
                _ => {
                    h[2][2] = 1.0;
                    h[0][0] = c;
                    h[0][1] = -s;
                    h[1][0] = s;
                    h[1][1] = c;
                }
            }
            h
        }
        fn trans(x: f64, y: f64, z: f64) -> H {
            [[1.0, 0.0, 0.0, x], [0.0, 1.0, 0.0, y], [0.0, 0.0, 1.0, z], [0.0, 0.0, 0.0, 1.0]]
        }
        let sign = if side == Side::Left { 1.0 } else { -1.0 };
        let chain = [
            trans(0.0, sign * k.hip_offset_y, k.hip_offset_z),
            rot(2, q.hip_yaw),
            rot(0, q.hip_roll),
            rot(1, q.hip_pitch),
            trans(0.0, 0.0, -k.thigh_length),
            rot(1, q.knee_pitch),
            trans(0.0, 0.0, -k.shank_length),
        ];
        let h = chain.iter().skip(1).fold(chain[0], |acc, t| mul(&acc, t));
        [h[0][3], h[1][3], h[2][3]]
    }

    #[test]
    fn forward_kinematics_matches_homogeneous_oracle() {
        let k = KinematicConfig { thigh_length: 0.21, shank_length: 0.19, hip_offset_z: -0.03, ..kin() };
        let poses = [
            LegJoints { hip_yaw: 0.2, hip_roll: -0.1, hip_pitch: -0.4, knee_pitch: 0.9, ankle_pitch: -0.3, ankle_roll: 0.05 },
            LegJoints { hip_yaw: -0.5, hip_roll: 0.3, hip_pitch: 0.2, knee_pitch: 0.1, ankle_pitch: 0.4, ankle_roll: -0.2 },
            LegJoints { knee_pitch: 1.2, hip_pitch: -0.6, ..Default::default() },
        ];
        for q in &poses {
            for side in [Side::Left, Side::Right] {
                let p = leg_forward(q, side, &k).position;
                let o = homogeneous_leg_fk(q, side, &k);
                assert!((p.x - o[0]).abs() < 1e-14 && (p.y - o[1]).abs() < 1e-14 && (p.z - o[2]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn arm_round_trip() {
        let k = kin();
        let q = ArmJoints { shoulder_pitch: 0.4, shoulder_roll: -0.3, elbow_pitch: 0.8 };
        for side in [Side::Left, Side::Right] {
            let hand = arm_forward(&q, side, &k);
            let back = arm_inverse(&hand, side, &k).unwrap();
            assert!((back.shoulder_pitch - q.shoulder_pitch).abs() < 1e-12);
            assert!((back.shoulder_roll - q.shoulder_roll).abs() < 1e-12);
            assert!((back.elbow_pitch - q.elbow_pitch).abs() < 1e-12);
        }
    }

    #[test]
    fn saturation_mirrors_roll_limits() {
        let k = kin();
        let mut pose = JointPose::<f64>::default();
        pose.left_leg.hip_roll = 2.0;
        pose.right_leg.hip_roll = -2.0;
        pose.left_leg.knee_pitch = -0.5;
        let s = k.saturate(&pose);
        assert_eq!(s.left_leg.hip_roll, 0.6);
        assert_eq!(s.right_leg.hip_roll, -0.6);
        assert_eq!(s.left_leg.knee_pitch, 0.0);
    }

    #[test]
    fn value_layouts_round_trip() {
        let q = JointPose {
            left_leg: LegJoints { hip_yaw: 0.1, knee_pitch: 0.5, ..Default::default() },
            right_arm: ArmJoints { elbow_pitch: 0.3, ..Default::default() },
            ..Default::default()
        };
        assert_eq!(JointPose::from_values(&q.to_values()).unwrap(), q);
        assert_eq!(<JointPose<f64> as PoseValues<f64>>::columns().len(), 18);
        assert_eq!(<AbstractPose<f64> as PoseValues<f64>>::columns().len(), 18);
        assert_eq!(<InversePose<f64> as PoseValues<f64>>::columns().len(), 28);
        assert!(JointPose::<f64>::from_values(&[0.0; 5]).is_err());
    }
}
