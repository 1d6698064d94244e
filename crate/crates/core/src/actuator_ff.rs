//! Feed-forward position setpoints for proportional-control servos.
//!
//! Joint torques come from recursive Newton-Euler inverse dynamics: the
//! inertial part from the trunk-rooted model and the gravity part as a
//! support-coefficient weighted sum over single support models, each rooted
//! at one support link and held fixed in free space.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cpg::SupportCoefficients;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::scalar::{lit, sgn, Real};

/// Tolerance on the sum of the support coefficients.
pub const COEFFICIENT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ServoModel<T: Real> {
    /// Servo proportional gain.
    pub kp: T,
    /// Feed-forward constants for torque, viscous, Coulomb and static friction.
    pub alpha: [T; 4],
    /// Stribeck velocity (rad/s).
    pub stribeck_velocity: T,
}

impl<T: Real> Default for ServoModel<T> {
    fn default() -> Self {
        Self { kp: lit(10.0), alpha: [lit(1.0), lit(0.05), lit(0.1), lit(0.15)], stribeck_velocity: lit(0.1) }
    }
}

impl<T: Real> ServoModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > T::zero()) {
            return Err(Error::param(format!("servo gain must be positive, got {}", self.kp)));
        }
        if self.alpha.iter().any(|a| !(*a >= T::zero()) || !a.is_finite()) {
            return Err(Error::param("servo feed-forward constants must be finite and >= 0"));
        }
        if !(self.stribeck_velocity > T::zero()) {
            return Err(Error::param("Stribeck velocity must be positive"));
        }
        Ok(())
    }
}

/// `exp(-(q̇/v_s)²)`.
pub fn stribeck_weight<T: Real>(qdot: T, v_s: T) -> T {
    let r = qdot / v_s;
    (-(r * r)).exp()
}

/// Position setpoint producing torque `tau` through a proportional servo
/// at battery voltage `v_b`, with friction compensation.
pub fn feedforward_setpoint<T: Real>(q: T, qdot: T, tau: T, v_b: T, m: &ServoModel<T>) -> Result<T> {
    if !(v_b > T::zero()) {
        return Err(Error::param(format!("battery voltage must be positive, got {v_b}")));
    }
    let beta = stribeck_weight(qdot, m.stribeck_velocity);
    let s = sgn(qdot);
    let [a0, a1, a2, a3] = m.alpha;
    let effort = a0 * tau + a1 * qdot + a2 * s * (T::one() - beta) + a3 * s * beta;
    Ok(q + effort / (v_b * m.kp))
}

/// Revolute joint connecting a link to its parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint<T: Real> {
    /// Index into the joint vector.
    pub index: usize,
    /// Joint point in the parent frame.
    pub origin: Vec3<T>,
    /// Unit rotation axis (the same in parent and child frames).
    pub axis: Vec3<T>,
    /// `±1`; the child rotates by `sign·q` about `axis`.
    pub sign: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link<T: Real> {
    pub name: String,
    pub parent: Option<usize>,
    pub joint: Option<Joint<T>>,
    pub mass: T,
    /// Centre of mass in the link frame.
    pub com: Vec3<T>,
    /// Inertia about the centre of mass, in the link frame.
    pub inertia: Mat3<T>,
}

/// Tree of rigid links; link 0 is the root and parents precede children.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyModel<T: Real> {
    links: Vec<Link<T>>,
    joint_count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    link: Vec<LinkEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    name: String,
    parent: Option<String>,
    joint_index: Option<usize>,
    #[serde(default)]
    origin: [f64; 3],
    axis: Option<[f64; 3]>,
    #[serde(default = "one")]
    sign: f64,
    mass: f64,
    #[serde(default)]
    com: [f64; 3],
    /// `[xx, yy, zz, xy, xz, yz]`
    #[serde(default)]
    inertia: [f64; 6],
}

fn one() -> f64 {
    1.0
}

fn vec3<T: Real>(a: [f64; 3]) -> Vec3<T> {
    Vec3::new(lit(a[0]), lit(a[1]), lit(a[2]))
}

fn model_err(msg: impl Into<String>) -> Error {
    Error::Model(msg.into())
}

impl<T: Real> RigidBodyModel<T> {
    pub fn new(links: Vec<Link<T>>) -> Result<Self> {
        if links.is_empty() {
            return Err(model_err("model has no links"));
        }
        let mut seen = Vec::new();
        for (i, l) in links.iter().enumerate() {
            match (i, l.parent, &l.joint) {
                (0, None, None) => {}
                (0, _, _) => return Err(model_err("link 0 must be a root without joint")),
                (_, Some(p), Some(j)) if p < i => {
                    let axis_norm = j.axis.norm();
                    if !((axis_norm - T::one()).abs() < lit(1e-9)) {
                        return Err(model_err(format!("joint axis of `{}` is not a unit vector", l.name)));
                    }
                    if !(j.sign == T::one() || j.sign == -T::one()) {
                        return Err(model_err(format!("joint sign of `{}` must be +1 or -1", l.name)));
                    }
                    seen.push(j.index);
                }
                (_, None, _) => return Err(model_err(format!("link `{}` has no parent; only link 0 may be a root", l.name))),
                (_, Some(p), _) if p >= i => {
                    return Err(model_err(format!("link `{}` must come after its parent", l.name)))
                }
                _ => return Err(model_err(format!("link `{}` has no joint", l.name))),
            }
            if !(l.mass > T::zero()) || !l.mass.is_finite() {
                return Err(model_err(format!("link `{}` must have positive mass", l.name)));
            }
            if !is_symmetric_psd(&l.inertia) {
                return Err(model_err(format!("inertia of `{}` is not symmetric positive semidefinite", l.name)));
            }
        }
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(k, &j)| k != j) {
            return Err(model_err("joint indices must be exactly 0..n without repeats"));
        }
        Ok(Self { joint_count: seen.len(), links })
    }

    /// Parses a model from TOML text with `[[link]]` tables.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::from_toml(&e, text))?;
        let mut index = HashMap::new();
        let mut links = Vec::with_capacity(file.link.len());
        for (i, e) in file.link.into_iter().enumerate() {
            let parent = match &e.parent {
                Some(p) => Some(*index.get(p).ok_or_else(|| model_err(format!("parent `{p}` of `{}` is not defined earlier", e.name)))?),
                None => None,
            };
            let joint = match (e.joint_index, e.axis) {
                (Some(index), Some(axis)) => Some(Joint { index, origin: vec3(e.origin), axis: vec3(axis), sign: lit(e.sign) }),
                (None, None) => None,
                _ => return Err(model_err(format!("link `{}` needs both joint_index and axis", e.name))),
            };
            let [xx, yy, zz, xy, xz, yz] = e.inertia;
            links.push(Link {
                parent,
                joint,
                mass: lit(e.mass),
                com: vec3(e.com),
                inertia: Mat3::symmetric([lit(xx), lit(yy), lit(zz), lit(xy), lit(xz), lit(yz)]),
                name: e.name.clone(),
            });
            if index.insert(e.name.clone(), i).is_some() {
                return Err(model_err(format!("duplicate link name `{}`", e.name)));
            }
        }
        Self::new(links)
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn total_mass(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.mass)
    }

    /// Equivalent model rooted at link `root`, whose frame is kept. Links on
    /// the path to the old root get frames translated to the joint that now
    /// connects them to their new parent; path joints keep their index and
    /// axis and flip their sign, so joint torques keep their meaning.
    pub fn rerooted(&self, root: usize) -> Result<Self> {
        if root >= self.links.len() {
            return Err(model_err(format!("link index {root} out of range")));
        }
        let n = self.links.len();
        let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, l) in self.links.iter().enumerate() {
            if let Some(p) = l.parent {
                neighbours[p].push(i);
                neighbours[i].push(p);
            }
        }
        // breadth-first order from the new root so parents precede children
        let mut order = vec![root];
        let mut new_parent: Vec<Option<usize>> = vec![None; n];
        let mut visited = vec![false; n];
        visited[root] = true;
        let mut head = 0;
        while head < order.len() {
            let cur = order[head];
            head += 1;
            for &nb in &neighbours[cur] {
                if !visited[nb] {
                    visited[nb] = true;
                    new_parent[nb] = Some(cur);
                    order.push(nb);
                }
            }
        }
        let reversed = |i: usize| new_parent[i].is_some_and(|p| self.links[p].parent == Some(i));
        // links whose new parent is their old child move their frame to that child's joint
        let shift: Vec<Vec3<T>> = (0..n)
            .map(|i| if reversed(i) { self.links[new_parent[i].expect("checked")].joint.expect("child has a joint").origin } else { Vec3::zeros() })
            .collect();
        let position: HashMap<usize, usize> = order.iter().enumerate().map(|(k, &l)| (l, k)).collect();

        let mut links = Vec::with_capacity(n);
        for &old in &order {
            let src = &self.links[old];
            let joint = new_parent[old].map(|p| {
                if reversed(old) {
                    let j = self.links[p].joint.expect("child has a joint");
                    Joint { index: j.index, origin: -shift[p], axis: j.axis, sign: -j.sign }
                } else {
                    let j = src.joint.expect("child has a joint");
                    Joint { origin: j.origin - shift[p], ..j }
                }
            });
            links.push(Link {
                name: src.name.clone(),
                parent: new_parent[old].map(|p| position[&p]),
                joint,
                mass: src.mass,
                com: src.com - shift[old],
                inertia: src.inertia,
            });
        }
        Self::new(links)
    }

    fn check_lengths(&self, vs: &[&[T]]) -> Result<()> {
        for v in vs {
            if v.len() != self.joint_count {
                return Err(Error::param(format!("expected {} joint values, got {}", self.joint_count, v.len())));
            }
        }
        Ok(())
    }

    /// Rotation of each link frame relative to its parent.
    fn joint_rotations(&self, q: &[T]) -> Vec<Mat3<T>> {
        self.links
            .iter()
            .map(|l| match &l.joint {
                Some(j) => Mat3::from_axis_angle(j.axis, j.sign * q[j.index]),
                None => Mat3::identity(),
            })
            .collect()
    }

    /// Orientation and origin of every link frame in the root frame.
    pub fn link_poses(&self, q: &[T]) -> Result<Vec<(Mat3<T>, Vec3<T>)>> {
        self.check_lengths(&[q])?;
        let rel = self.joint_rotations(q);
        let mut poses: Vec<(Mat3<T>, Vec3<T>)> = Vec::with_capacity(self.links.len());
        for (i, l) in self.links.iter().enumerate() {
            poses.push(match (l.parent, &l.joint) {
                (Some(p), Some(j)) => {
                    let (r, o) = poses[p];
                    (r * rel[i], o + r.mul_vec(j.origin))
                }
                _ => (Mat3::identity(), Vec3::zeros()),
            });
        }
        Ok(poses)
    }

    /// Centre of mass of every link in the root frame.
    pub fn com_positions(&self, q: &[T]) -> Result<Vec<Vec3<T>>> {
        Ok(self.link_poses(q)?.iter().zip(&self.links).map(|((r, o), l)| *o + r.mul_vec(l.com)).collect())
    }
}

fn is_symmetric_psd<T: Real>(m: &Mat3<T>) -> bool {
    let a = &m.m;
    let scale = a.iter().flatten().fold(T::zero(), |acc, v| acc.max(v.abs())).max(T::one());
    let tol = scale * lit(1e-12);
    let symmetric = (a[0][1] - a[1][0]).abs() <= tol && (a[0][2] - a[2][0]).abs() <= tol && (a[1][2] - a[2][1]).abs() <= tol;
    if !symmetric || a.iter().flatten().any(|v| !v.is_finite()) {
        return false;
    }
    // all principal minors nonnegative
    let minors2 = [
        a[0][0] * a[1][1] - a[0][1] * a[1][0],
        a[0][0] * a[2][2] - a[0][2] * a[2][0],
        a[1][1] * a[2][2] - a[1][2] * a[2][1],
    ];
    let tol2 = tol * scale;
    let tol3 = tol2 * scale;
    a[0][0] >= -tol && a[1][1] >= -tol && a[2][2] >= -tol && minors2.iter().all(|m| *m >= -tol2) && m.determinant() >= -tol3
}

/// Recursive Newton-Euler joint torques with the root fixed in free space;
/// `gravity` is expressed in the root frame.
pub fn inverse_dynamics<T: Real>(model: &RigidBodyModel<T>, q: &[T], qd: &[T], qdd: &[T], gravity: Vec3<T>) -> Result<Vec<T>> {
    model.check_lengths(&[q, qd, qdd])?;
    let n = model.links.len();
    let rot = model.joint_rotations(q);
    let mut omega = vec![Vec3::zeros(); n];
    let mut alpha = vec![Vec3::zeros(); n];
    let mut accel = vec![Vec3::zeros(); n];
    accel[0] = -gravity;
    let mut force = vec![Vec3::zeros(); n];
    let mut moment = vec![Vec3::zeros(); n];

    for i in 0..n {
        let l = &model.links[i];
        if let (Some(p), Some(j)) = (l.parent, &l.joint) {
            let rt = rot[i].transpose();
            let axis_rate = j.axis.scale(j.sign * qd[j.index]);
            let w_p = rt.mul_vec(omega[p]);
            omega[i] = w_p + axis_rate;
            alpha[i] = rt.mul_vec(alpha[p]) + j.axis.scale(j.sign * qdd[j.index]) + w_p.cross(axis_rate);
            let o = j.origin;
            accel[i] = rt.mul_vec(accel[p] + alpha[p].cross(o) + omega[p].cross(omega[p].cross(o)));
        }
        let (w, dw) = (omega[i], alpha[i]);
        let a_com = accel[i] + dw.cross(l.com) + w.cross(w.cross(l.com));
        force[i] = a_com.scale(l.mass);
        moment[i] = l.inertia.mul_vec(dw) + w.cross(l.inertia.mul_vec(w)) + l.com.cross(force[i]);
    }

    let mut tau = vec![T::zero(); model.joint_count];
    for i in (1..n).rev() {
        let l = &model.links[i];
        let (p, j) = (l.parent.expect("validated"), l.joint.expect("validated"));
        tau[j.index] = j.sign * j.axis.dot(moment[i]);
        let f = rot[i].mul_vec(force[i]);
        let m = rot[i].mul_vec(moment[i]) + j.origin.cross(f);
        force[p] += f;
        moment[p] += m;
    }
    Ok(tau)
}

/// Trunk-rooted model together with single support models rooted at the
/// left and right foot.
#[derive(Debug, Clone)]
pub struct SupportModels<T: Real> {
    pub trunk: RigidBodyModel<T>,
    pub left_foot: RigidBodyModel<T>,
    pub right_foot: RigidBodyModel<T>,
    trunk_in_left: usize,
    trunk_in_right: usize,
}

impl<T: Real> SupportModels<T> {
    pub fn new(trunk: RigidBodyModel<T>, left_foot_link: &str, right_foot_link: &str) -> Result<Self> {
        let find = |name: &str| trunk.link_index(name).ok_or_else(|| model_err(format!("no link named `{name}`")));
        let left_foot = trunk.rerooted(find(left_foot_link)?)?;
        let right_foot = trunk.rerooted(find(right_foot_link)?)?;
        let root_name = &trunk.links[0].name;
        let trunk_in_left = left_foot.link_index(root_name).expect("rerooting keeps all links");
        let trunk_in_right = right_foot.link_index(root_name).expect("rerooting keeps all links");
        Ok(Self { trunk, left_foot, right_foot, trunk_in_left, trunk_in_right })
    }

    /// Gravity-only torques of one support model for gravity fixed in the
    /// trunk frame.
    fn gravity_torques(&self, model: &RigidBodyModel<T>, trunk_link: usize, q: &[T], g_trunk: Vec3<T>) -> Result<Vec<T>> {
        let zeros = vec![T::zero(); model.joint_count()];
        let orientation = model.link_poses(q)?[trunk_link].0;
        inverse_dynamics(model, q, &zeros, &zeros, orientation.mul_vec(g_trunk))
    }

    /// Gravity-only torques of the trunk, left and right support models.
    pub fn gravity_sets(&self, q: &[T], g_trunk: Vec3<T>) -> Result<[Vec<T>; 3]> {
        Ok([
            self.gravity_torques(&self.trunk, 0, q, g_trunk)?,
            self.gravity_torques(&self.left_foot, self.trunk_in_left, q, g_trunk)?,
            self.gravity_torques(&self.right_foot, self.trunk_in_right, q, g_trunk)?,
        ])
    }
}

/// Feed-forward torques: inertial torques of the trunk model without gravity
/// plus the support-coefficient weighted gravity torques of each model.
pub fn superpose_feedforward<T: Real>(
    models: &SupportModels<T>,
    q: &[T],
    qd: &[T],
    qdd: &[T],
    coeffs: &SupportCoefficients<T>,
    g_trunk: Vec3<T>,
) -> Result<Vec<T>> {
    let c = coeffs.as_array();
    let sum = c[0] + c[1] + c[2];
    if !((sum - T::one()).abs() <= lit(COEFFICIENT_SUM_TOLERANCE)) || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::param(format!("support coefficients must sum to 1, got {sum}")));
    }
    let mut tau = inverse_dynamics(&models.trunk, q, qd, qdd, Vec3::zeros())?;
    let sets = models.gravity_sets(q, g_trunk)?;
    for (ci, set) in c.iter().zip(sets.iter()) {
        if *ci == T::zero() {
            continue;
        }
        for (t, g) in tau.iter_mut().zip(set) {
            *t += *ci * *g;
        }
    }
    Ok(tau)
}

/// Bundled six-joint planar biped (trunk, thighs, shanks, feet) used by the
/// tests and the simulator.
pub const PLANAR_BIPED_TOML: &str = include_str!("../models/planar_biped.toml");

pub fn planar_biped<T: Real>() -> Result<SupportModels<T>> {
    SupportModels::new(RigidBodyModel::from_toml_str(PLANAR_BIPED_TOML)?, "left_foot", "right_foot")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pendulum(mass: f64, lc: f64) -> RigidBodyModel<f64> {
        RigidBodyModel::new(vec![
            Link { name: "base".into(), parent: None, joint: None, mass: 1.0, com: Vec3::zeros(), inertia: Mat3::zeros() },
            Link {
                name: "bob".into(),
                parent: Some(0),
                joint: Some(Joint { index: 0, origin: Vec3::zeros(), axis: Vec3::unit_y(), sign: 1.0 }),
                mass,
                com: Vec3::new(0.0, 0.0, -lc),
                inertia: Mat3::symmetric([0.01, 0.02, 0.01, 0.0, 0.0, 0.0]),
            },
        ])
        .unwrap()
    }

    #[test]
    fn setpoint_examples() {
        let m = ServoModel::<f64> { kp: 10.0, alpha: [1.0, 0.3, 0.2, 0.4], stribeck_velocity: 0.5 };
        assert_eq!(feedforward_setpoint(0.3, 0.0, 0.0, 12.0, &m).unwrap(), 0.3);
        let got = feedforward_setpoint(0.0, 0.0, 2.0, 12.0, &m).unwrap();
        assert!((got - 2.0 / 120.0).abs() < 1e-15);
        assert!(feedforward_setpoint(0.0, 0.0, 1.0, 0.0, &m).is_err());
    }

    #[test]
    fn stribeck_examples() {
        assert_eq!(stribeck_weight(0.0, 0.3), 1.0);
        assert!((stribeck_weight(0.3_f64, 0.3) - (-1.0_f64).exp()).abs() < 1e-15);
        assert_eq!(stribeck_weight(0.7, 0.3), stribeck_weight(-0.7, 0.3));
    }

    #[test]
    fn pendulum_gravity_torque() {
        let (m, lc, g) = (0.8, 0.25, 9.81);
        let model = pendulum(m, lc);
        for phi in [-1.2, -0.3, 0.0, 0.4, 2.0] {
            let tau = inverse_dynamics(&model, &[phi], &[0.0], &[0.0], Vec3::new(0.0, 0.0, -g)).unwrap();
            assert!((tau[0] - m * g * lc * f64::sin(phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gravity_zero_motion_is_zero() {
        let models = planar_biped::<f64>().unwrap();
        let q = [0.1, 0.4, -0.2, -0.3, 0.5, 0.1];
        let z = [0.0; 6];
        for m in [&models.trunk, &models.left_foot, &models.right_foot] {
            let tau = inverse_dynamics(m, &q, &z, &z, Vec3::zeros()).unwrap();
            assert!(tau.iter().all(|t| *t == 0.0));
        }
    }

    #[test]
    fn rerooted_model_keeps_structure() {
        let models = planar_biped::<f64>().unwrap();
        let l = &models.left_foot;
        assert_eq!(l.links()[0].name, "left_foot");
        assert_eq!(l.joint_count(), 6);
        assert!((l.total_mass() - models.trunk.total_mass()).abs() < 1e-15);
        // rerooting twice returns the original tree
        let back = l.rerooted(l.link_index("trunk").unwrap()).unwrap();
        let q = [0.2, 0.5, -0.1, -0.4, 0.3, 0.2];
        let qd = [0.3, -0.2, 0.5, 0.1, 0.0, -0.4];
        let qdd = [1.0, 0.5, -2.0, 0.3, 0.8, -0.1];
        let g = Vec3::new(0.5, 0.0, -9.7);
        let a = inverse_dynamics(&models.trunk, &q, &qd, &qdd, g).unwrap();
        let b = inverse_dynamics(&back, &q, &qd, &qdd, g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn support_model_gravity_matches_virtual_work() {
        let models = planar_biped::<f64>().unwrap();
        let q = [0.2, 0.5, -0.3, -0.4, 0.6, 0.1];
        let g = Vec3::new(1.1, 0.0, -9.7);
        for model in [&models.left_foot, &models.right_foot, &models.trunk] {
            let z = [0.0; 6];
            let tau = inverse_dynamics(model, &q, &z, &z, g).unwrap();
            let potential = |q: &[f64]| -> f64 {
                let coms = model.com_positions(q).unwrap();
                coms.iter().zip(model.links()).map(|(c, l)| -l.mass * g.dot(*c)).sum()
            };
            for j in 0..6 {
                let h = 1e-6;
                let (mut qp, mut qm) = (q, q);
                qp[j] += h;
                qm[j] -= h;
                let dv = (potential(&qp) - potential(&qm)) / (2.0 * h);
                assert!((tau[j] - dv).abs() < 1e-7, "joint {j}: {} vs {dv}", tau[j]);
            }
        }
    }

    #[test]
    fn malformed_models_rejected() {
        let bad = "[[link]]\nname = \"a\"\nmass = 1.0\n[[link]]\nname = \"b\"\nparent = \"c\"\njoint_index = 0\naxis = [0.0, 1.0, 0.0]\nmass = 1.0\n";
        assert!(matches!(RigidBodyModel::<f64>::from_toml_str(bad), Err(Error::Model(_))));
        let bad = "[[link]]\nname = \"a\"\nmass = -1.0\n";
        assert!(matches!(RigidBodyModel::<f64>::from_toml_str(bad), Err(Error::Model(_))));
        let bad = "[[link]]\nname = \"a\"\nmass = 1.0\ninertia = [1.0, 1.0, 1.0, 5.0, 0.0, 0.0]\n";
        assert!(matches!(RigidBodyModel::<f64>::from_toml_str(bad), Err(Error::Model(_))));
        let bad = "[[link]]\nname = \"a\"\nmass = \n";
        assert!(matches!(RigidBodyModel::<f64>::from_toml_str(bad), Err(Error::Config { line: Some(3), .. })));
    }

    #[test]
    fn coefficient_sum_checked() {
        let models = planar_biped::<f64>().unwrap();
        let z = [0.0; 6];
        let c = SupportCoefficients { trunk: 0.0, left_foot: 0.6, right_foot: 0.6 };
        assert!(superpose_feedforward(&models, &z, &z, &z, &c, Vec3::new(0.0, 0.0, -9.81)).is_err());
    }
}
