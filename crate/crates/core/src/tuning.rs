//! LQR tuning of sagittal PD feedback gains from an identified second order
//! model `ẋ = Ax + Bu`, `y = Cx + Du`.

pub use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Target CARE residual (Frobenius norm) of the polished solution.
pub const CARE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct StateSpaceModel<T: Real> {
    pub a: [[T; 2]; 2],
    pub b: [T; 2],
    pub c: [T; 2],
    #[serde(default)]
    pub d: T,
}

impl<T: Real> StateSpaceModel<T> {
    /// Identified sagittal model from activation to fused pitch deviation.
    pub fn identified() -> Self {
        Self {
            a: [[lit(-31.82), lit(14.83)], [lit(207.5), lit(-221.3)]],
            b: [lit(-51.67), lit(720.2)],
            c: [lit(1.185), lit(0.1683)],
            d: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.a.iter().flatten().chain(&self.b).chain(&self.c).chain(std::iter::once(&self.d));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::param("state space model entries must be finite"));
        }
        Ok(())
    }

    pub fn cb(&self) -> T {
        self.c[0] * self.b[0] + self.c[1] * self.b[1]
    }

    /// `CA` as a row vector.
    pub fn ca(&self) -> [T; 2] {
        [
            self.c[0] * self.a[0][0] + self.c[1] * self.a[1][0],
            self.c[0] * self.a[0][1] + self.c[1] * self.a[1][1],
        ]
    }

    /// `A - BK`.
    pub fn closed_loop(&self, k: &[T; 2]) -> [[T; 2]; 2] {
        let mut m = self.a;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= self.b[i] * k[j];
            }
        }
        m
    }

    /// Steady state output per unit constant input.
    pub fn dc_gain(&self) -> Result<T> {
        let det = det2(&self.a);
        if det.abs() <= T::epsilon() * norm2(&self.a).powi(2) {
            return Err(Error::numeric("state matrix is singular; no finite DC gain"));
        }
        let inv = inv2(&self.a, det);
        let x = [-(inv[0][0] * self.b[0] + inv[0][1] * self.b[1]), -(inv[1][0] * self.b[0] + inv[1][1] * self.b[1])];
        Ok(self.c[0] * x[0] + self.c[1] * x[1] + self.d)
    }
}

fn det2<T: Real>(m: &[[T; 2]; 2]) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv2<T: Real>(m: &[[T; 2]; 2], det: T) -> [[T; 2]; 2] {
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn norm2<T: Real>(m: &[[T; 2]; 2]) -> T {
    m.iter().flatten().fold(T::zero(), |acc, v| acc + *v * *v).sqrt()
}

/// Eigenvalues of a 2×2 matrix, sorted by magnitude.
pub fn eigenvalues2<T: Real>(m: &[[T; 2]; 2]) -> [Complex<T>; 2] {
    let half_tr = (m[0][0] + m[1][1]) * lit(0.5);
    // discriminant computed from the difference of the diagonal for accuracy
    let half_diff = (m[0][0] - m[1][1]) * lit(0.5);
    let disc = half_diff * half_diff + m[0][1] * m[1][0];
    let mut ev = if disc >= T::zero() {
        let s = disc.sqrt();
        // avoid cancellation: larger-magnitude root first, other from the determinant
        let big = if half_tr >= T::zero() { half_tr + s } else { half_tr - s };
        let det = det2(m);
        let small = if big != T::zero() { det / big } else { half_tr - (big - half_tr) };
        [Complex::new(big, T::zero()), Complex::new(small, T::zero())]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(half_tr, s), Complex::new(half_tr, -s)]
    };
    ev.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Eigenvalues of `A`, sorted by magnitude.
pub fn model_poles<T: Real>(m: &StateSpaceModel<T>) -> [Complex<T>; 2] {
    eigenvalues2(&m.a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct LqrWeights<T: Real> {
    pub q: [[T; 2]; 2],
    pub r: T,
}

impl<T: Real> LqrWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let q = &self.q;
        let tol = lit::<T>(1e-12) * norm2(q).max(T::one());
        if (q[0][1] - q[1][0]).abs() > tol {
            return Err(Error::param("LQR state weight must be symmetric"));
        }
        if q[0][0] < -tol || q[1][1] < -tol || det2(q) < -tol * norm2(q).max(T::one()) {
            return Err(Error::param("LQR state weight must be positive semidefinite"));
        }
        if !(self.r > T::zero()) || !self.r.is_finite() {
            return Err(Error::param("LQR input weight must be positive"));
        }
        Ok(())
    }
}

/// `Q = diag(1/x_max²)`, `R = 1/u_max²`.
pub fn bryson_weights<T: Real>(x_max: [T; 2], u_max: T) -> Result<LqrWeights<T>> {
    if x_max.iter().chain(std::iter::once(&u_max)).any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::param("Bryson maxima must be positive and finite"));
    }
    let inv_sq = |v: T| T::one() / (v * v);
    Ok(LqrWeights { q: [[inv_sq(x_max[0]), T::zero()], [T::zero(), inv_sq(x_max[1])]], r: inv_sq(u_max) })
}

/// Small dense row-major matrix used by the Riccati solver.
#[derive(Debug, Clone, PartialEq)]
struct Dense<T: Real> {
    rows: usize,
    cols: usize,
    v: Vec<T>,
}

impl<T: Real> Dense<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, v: vec![T::zero(); rows * cols] }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    fn mul(&self, o: &Self) -> Self {
        Self::from_fn(self.rows, o.cols, |i, j| (0..self.cols).fold(T::zero(), |acc, k| acc + self[(i, k)] * o[(k, j)]))
    }

    fn add(&self, o: &Self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + o[(i, j)])
    }

    fn sub(&self, o: &Self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - o[(i, j)])
    }

    fn scale(&self, s: T) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    fn frobenius(&self) -> T {
        self.v.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
    }


    fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * lit(0.5))
    }

    /// Solves `self · X = rhs` by Gaussian elimination with partial pivoting,
    /// also returning the determinant.
    fn solve(&self, rhs: &Self) -> Result<(Self, T)> {
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let mut det = T::one();
        let scale = self.v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap_or(std::cmp::Ordering::Equal))
                .expect("nonempty range");
            if !(a[(pivot, col)].abs() > scale * T::epsilon() * count_t::<T>(n)) {
                return Err(Error::numeric("singular matrix in linear solve"));
            }
            if pivot != col {
                for j in 0..n {
                    let t = a[(col, j)];
                    a[(col, j)] = a[(pivot, j)];
                    a[(pivot, j)] = t;
                }
                for j in 0..b.cols {
                    let t = b[(col, j)];
                    b[(col, j)] = b[(pivot, j)];
                    b[(pivot, j)] = t;
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for i in col + 1..n {
                let f = a[(i, col)] / p;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] -= f * v;
                }
                for j in 0..b.cols {
                    let v = b[(col, j)];
                    b[(i, j)] -= f * v;
                }
            }
        }
        let mut x = Self::zeros(n, b.cols);
        for j in 0..b.cols {
            for i in (0..n).rev() {
                let mut s = b[(i, j)];
                for k in i + 1..n {
                    s -= a[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / a[(i, i)];
            }
        }
        Ok((x, det))
    }
}

fn count_t<T: Real>(n: usize) -> T {
    crate::scalar::count(n)
}

impl<T: Real> std::ops::Index<(usize, usize)> for Dense<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.v[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for Dense<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.v[i * self.cols + j]
    }
}

/// Solution of a continuous algebraic Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution<T: Real> {
    /// Row-major `n × n` stabilizing solution.
    pub p: Vec<T>,
    /// Optimal gain `R⁻¹BᵀP`.
    pub k: Vec<T>,
    /// Frobenius norm of `AᵀP + PA - PBR⁻¹BᵀP + Q`.
    pub residual: T,
}

fn care_residual<T: Real>(a: &Dense<T>, b: &Dense<T>, q: &Dense<T>, r: T, p: &Dense<T>) -> T {
    let pb = p.mul(b);
    a.transpose().mul(p).add(&p.mul(a)).sub(&pb.mul(&pb.transpose()).scale(T::one() / r)).add(q).frobenius()
}

/// Solves the Lyapunov equation `FᵀX + XF + W = 0` through its Kronecker form.
fn lyapunov<T: Real>(f: &Dense<T>, w: &Dense<T>) -> Result<Dense<T>> {
    let n = f.rows;
    let mut big = Dense::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                // (FᵀX)_ij = Σ_k F_ki X_kj ; (XF)_ij = Σ_k X_ik F_kj
                big[(row, k * n + j)] += f[(k, i)];
                big[(row, i * n + k)] += f[(k, j)];
            }
        }
    }
    let rhs = Dense::from_fn(n * n, 1, |idx, _| -w[(idx / n, idx % n)]);
    let (x, _) = big.solve(&rhs)?;
    Ok(Dense::from_fn(n, n, |i, j| x[(i * n + j, 0)]).symmetrized())
}

fn is_hurwitz<T: Real>(m: &Dense<T>) -> bool {
    match m.rows {
        1 => m[(0, 0)] < T::zero(),
        2 => {
            let a = [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]];
            eigenvalues2(&a).iter().all(|e| e.re < T::zero())
        }
        _ => false,
    }
}

/// Newton-Kleinman iteration from a stabilizing gain `k0`.
fn newton_kleinman<T: Real>(a: &Dense<T>, b: &Dense<T>, q: &Dense<T>, r: T, k0: Dense<T>, max_iter: usize) -> Result<Dense<T>> {
    let mut k = k0;
    let mut best: Option<(T, Dense<T>)> = None;
    for _ in 0..max_iter {
        let f = a.sub(&b.mul(&k));
        if !is_hurwitz(&f) {
            break;
        }
        let w = q.add(&k.transpose().mul(&k).scale(r));
        let p = lyapunov(&f, &w)?;
        let res = care_residual(a, b, q, r, &p);
        let improved = best.as_ref().is_none_or(|(r0, _)| res < *r0);
        if improved {
            best = Some((res, p.clone()));
        }
        k = b.transpose().mul(&p).scale(T::one() / r);
        if res <= lit::<T>(CARE_TOLERANCE) * p.frobenius().max(T::one()) * lit::<T>(1e-3) || !improved {
            break;
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| Error::numeric("Newton-Kleinman iteration lost closed loop stability"))
}

fn care_defect<T: Real>(a: &Dense<T>, b: &Dense<T>, q: &Dense<T>, r: T, p: &Dense<T>) -> Dense<T> {
    let pb = p.mul(b);
    a.transpose().mul(p).add(&p.mul(a)).sub(&pb.mul(&pb.transpose()).scale(T::one() / r)).add(q).symmetrized()
}

/// Newton steps on the defect: solves the closed loop Lyapunov equation for
/// a small correction instead of the full solution.
fn refine<T: Real>(a: &Dense<T>, b: &Dense<T>, q: &Dense<T>, r: T, p: Dense<T>) -> Dense<T> {
    let mut best_res = care_residual(a, b, q, r, &p);
    let mut best = p;
    for _ in 0..3 {
        let k = b.transpose().mul(&best).scale(T::one() / r);
        let f = a.sub(&b.mul(&k));
        let Ok(delta) = lyapunov(&f, &care_defect(a, b, q, r, &best)) else { break };
        let next = best.add(&delta).symmetrized();
        let res = care_residual(a, b, q, r, &next);
        if !(res < best_res) {
            break;
        }
        best_res = res;
        best = next;
    }
    best
}

/// Matrix sign function of `h` by scaled Newton iteration.
fn matrix_sign<T: Real>(h: &Dense<T>) -> Result<Dense<T>> {
    let n = h.rows;
    let id = Dense::identity(n);
    let mut z = h.clone();
    for _ in 0..100 {
        let (inv, det) = z.solve(&id)?;
        let c = det.abs().powf(T::one() / count_t::<T>(n));
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::numeric("matrix sign iteration broke down"));
        }
        let next = z.scale(T::one() / c).add(&inv.scale(c)).scale(lit(0.5));
        let change = next.sub(&z).frobenius();
        let size = next.frobenius();
        z = next;
        if change <= size * lit(1e-13) {
            return Ok(z);
        }
    }
    Err(Error::numeric("matrix sign iteration did not converge"))
}

fn pbh_stabilizable<T: Real>(a: &Dense<T>, b: &Dense<T>) -> bool {
    let n = a.rows;
    let scale = a.frobenius().max(b.frobenius()).max(T::one());
    let tol = scale * lit(1e-10);
    match n {
        1 => !(a[(0, 0)] >= T::zero()) || b[(0, 0)].abs() > tol,
        2 => {
            let m = [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]];
            eigenvalues2(&m).iter().filter(|e| e.re >= -tol).all(|lambda| {
                // rank of [A - λI, B] must be 2: some 2×2 minor is nonzero
                let c = |i: usize, j: usize| -> Complex<T> {
                    let mut v = Complex::new(a[(i, j)], T::zero());
                    if i == j {
                        v = v - *lambda;
                    }
                    v
                };
                let bcol = |i: usize| Complex::new(b[(i, 0)], T::zero());
                let minors = [
                    c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0),
                    c(0, 0) * bcol(1) - bcol(0) * c(1, 0),
                    c(0, 1) * bcol(1) - bcol(0) * c(1, 1),
                ];
                minors.iter().any(|m| m.norm() > tol * scale)
            })
        }
        _ => false,
    }
}

/// Stabilizing solution of `AᵀP + PA - PBR⁻¹BᵀP + Q = 0` for a single
/// input system with one or two states (`a`, `q` row-major `n × n`, `b`
/// length `n`).
pub fn solve_care<T: Real>(a: &[T], b: &[T], q: &[T], r: T) -> Result<CareSolution<T>> {
    let n = b.len();
    if !(n == 1 || n == 2) || a.len() != n * n || q.len() != n * n {
        return Err(Error::param("Riccati solver supports one or two states with a single input"));
    }
    if !(r > T::zero()) {
        return Err(Error::param("LQR input weight must be positive"));
    }
    let a = Dense { rows: n, cols: n, v: a.to_vec() };
    let b = Dense { rows: n, cols: 1, v: b.to_vec() };
    let q = Dense { rows: n, cols: n, v: q.to_vec() }.symmetrized();
    if a.v.iter().chain(&b.v).chain(&q.v).any(|v| !v.is_finite()) {
        return Err(Error::param("Riccati data must be finite"));
    }
    if !pbh_stabilizable(&a, &b) {
        return Err(Error::numeric(format!("pair (A, B) is not stabilizable: A = {:?}, B = {:?}", a.v, b.v)));
    }

    let g = b.mul(&b.transpose()).scale(T::one() / r);
    let mut h = Dense::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = a[(i, j)];
            h[(i, j + n)] = -g[(i, j)];
            h[(i + n, j)] = -q[(i, j)];
            h[(i + n, j + n)] = -a[(j, i)];
        }
    }

    let from_sign = matrix_sign(&h).and_then(|w| {
        let id = Dense::<T>::identity(n);
        let mut lhs = Dense::zeros(2 * n, n);
        let mut rhs = Dense::zeros(2 * n, n);
        for i in 0..n {
            for j in 0..n {
                lhs[(i, j)] = w[(i, j + n)];
                lhs[(i + n, j)] = w[(i + n, j + n)] + id[(i, j)];
                rhs[(i, j)] = -(w[(i, j)] + id[(i, j)]);
                rhs[(i + n, j)] = -w[(i + n, j)];
            }
        }
        let normal = lhs.transpose().mul(&lhs);
        let (p, _) = normal.solve(&lhs.transpose().mul(&rhs))?;
        Ok(p.symmetrized())
    });

    let initial_gain = match &from_sign {
        Ok(p) => b.transpose().mul(p).scale(T::one() / r),
        Err(_) => stabilizing_gain(&a, &b)?,
    };
    let p = match newton_kleinman(&a, &b, &q, r, initial_gain, 50) {
        Ok(p) => p,
        Err(e) => match from_sign {
            Ok(p) => p,
            Err(_) => return Err(e),
        },
    };
    let p = refine(&a, &b, &q, r, p);
    let residual = care_residual(&a, &b, &q, r, &p);
    if !residual.is_finite() || residual > lit::<T>(1e-6) * p.frobenius().max(T::one()) {
        return Err(Error::numeric(format!("Riccati solver did not converge (residual {residual})")));
    }
    let k = b.transpose().mul(&p).scale(T::one() / r);
    if !is_hurwitz(&a.sub(&b.mul(&k))) {
        return Err(Error::numeric("Riccati solution is not stabilizing"));
    }
    Ok(CareSolution { p: p.v, k: k.v, residual })
}

/// A stabilizing gain placing the closed loop poles at a multiple of the
/// open loop spectral radius (pole placement on the controllable part).
fn stabilizing_gain<T: Real>(a: &Dense<T>, b: &Dense<T>) -> Result<Dense<T>> {
    let n = a.rows;
    if is_hurwitz(a) {
        return Ok(Dense::zeros(1, n));
    }
    let rho = a.frobenius().max(T::one());
    match n {
        1 => Ok(Dense::from_fn(1, 1, |_, _| (a[(0, 0)] + rho) / b[(0, 0)])),
        _ => {
            // Ackermann: K = [0 1] C⁻¹ φ(A), poles at -rho (double)
            let ctrb = Dense::from_fn(2, 2, |i, j| if j == 0 { b[(i, 0)] } else { a.mul(b)[(i, 0)] });
            let phi = a.mul(a).add(&a.scale(rho + rho)).add(&Dense::identity(2).scale(rho * rho));
            let (inv, _) = ctrb.solve(&Dense::identity(2)).map_err(|_| Error::numeric("uncontrollable pair has no fallback gain"))?;
            let last = Dense::from_fn(1, 2, |_, j| inv[(1, j)]);
            Ok(last.mul(&phi))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution<T: Real> {
    pub k: [T; 2],
    pub p: [[T; 2]; 2],
    pub residual: T,
    pub closed_loop_poles: [Complex<T>; 2],
}

pub fn lqr_gain<T: Real>(m: &StateSpaceModel<T>, w: &LqrWeights<T>) -> Result<LqrSolution<T>> {
    m.validate()?;
    w.validate()?;
    let a = [m.a[0][0], m.a[0][1], m.a[1][0], m.a[1][1]];
    let q = [w.q[0][0], w.q[0][1], w.q[1][0], w.q[1][1]];
    let s = solve_care(&a, &m.b, &q, w.r)?;
    let k = [s.k[0], s.k[1]];
    Ok(LqrSolution {
        k,
        p: [[s.p[0], s.p[1]], [s.p[2], s.p[3]]],
        residual: s.residual,
        closed_loop_poles: eigenvalues2(&m.closed_loop(&k)),
    })
}

/// State feedback gain equivalent to `u = -K_p y - K_d ẏ`.
#[allow(non_snake_case)]
pub fn K_from_pd<T: Real>(kp: T, kd: T, m: &StateSpaceModel<T>) -> Result<[T; 2]> {
    let denom = T::one() + kd * m.cb();
    if denom.abs() <= lit::<T>(1e-12) * (T::one() + (kd * m.cb()).abs()) {
        return Err(Error::numeric("1 + K_d·CB is singular"));
    }
    let ca = m.ca();
    Ok([(kp * m.c[0] + kd * ca[0]) / denom, (kp * m.c[1] + kd * ca[1]) / denom])
}

/// PD gains reproducing state feedback `K`.
#[allow(non_snake_case)]
pub fn pd_from_K<T: Real>(k: &[T; 2], m: &StateSpaceModel<T>) -> Result<(T, T)> {
    let ca = m.ca();
    let cb = m.cb();
    let stack = [[m.c[0], m.c[1]], [ca[0] - cb * k[0], ca[1] - cb * k[1]]];
    let det = det2(&stack);
    let scale = (stack[0][0].abs().max(stack[0][1].abs())) * (stack[1][0].abs().max(stack[1][1].abs()));
    if !(det.abs() > lit::<T>(1e-12) * scale) || !(scale > T::zero()) {
        return Err(Error::numeric("stacked matrix [C; CA - CBK] is singular"));
    }
    let inv = inv2(&stack, det);
    Ok((k[0] * inv[0][0] + k[1] * inv[1][0], k[0] * inv[0][1] + k[1] * inv[1][1]))
}

/// Inputs of the `tune` pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct TuningConfig<T: Real> {
    pub model: StateSpaceModel<T>,
    pub x_max: [T; 2],
    pub u_max: T,
}

impl<T: Real> Default for TuningConfig<T> {
    fn default() -> Self {
        Self { model: StateSpaceModel::identified(), x_max: [lit(0.05), lit(0.1)], u_max: lit(0.2) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport<T: Real> {
    pub weights: LqrWeights<T>,
    pub lqr: LqrSolution<T>,
    pub kp: T,
    pub kd: T,
    pub open_loop_poles: [Complex<T>; 2],
}

/// Bryson weights, LQR gain and PD recovery.
pub fn tune<T: Real>(cfg: &TuningConfig<T>) -> Result<TuningReport<T>> {
    let weights = bryson_weights(cfg.x_max, cfg.u_max)?;
    let lqr = lqr_gain(&cfg.model, &weights)?;
    let (kp, kd) = pd_from_K(&lqr.k, &cfg.model)?;
    Ok(TuningReport { weights, open_loop_poles: model_poles(&cfg.model), lqr, kp, kd })
}

/// Simulates `ẋ = (A - BK)x` with the trapezoidal rule and returns the state
/// at every step, starting with `x0`.
pub fn simulate_closed_loop<T: Real>(m: &StateSpaceModel<T>, k: &[T; 2], x0: [T; 2], dt: T, steps: usize) -> Result<Vec<[T; 2]>> {
    let f = m.closed_loop(k);
    let h = dt * lit(0.5);
    let lhs = [[T::one() - h * f[0][0], -h * f[0][1]], [-h * f[1][0], T::one() - h * f[1][1]]];
    let det = det2(&lhs);
    if det == T::zero() {
        return Err(Error::numeric("singular trapezoidal step matrix"));
    }
    let inv = inv2(&lhs, det);
    let mut x = x0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x);
    for _ in 0..steps {
        let rhs = [
            x[0] + h * (f[0][0] * x[0] + f[0][1] * x[1]),
            x[1] + h * (f[1][0] * x[0] + f[1][1] * x[1]),
        ];
        x = [inv[0][0] * rhs[0] + inv[0][1] * rhs[1], inv[1][0] * rhs[0] + inv[1][1] * rhs[1]];
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identified_poles() {
        let p = model_poles(&StateSpaceModel::<f64>::identified());
        assert!((p[0].re + 16.77).abs() / 16.77 < 0.005 && p[0].im == 0.0);
        assert!((p[1].re + 236.3).abs() / 236.3 < 0.005);
    }

    #[test]
    fn diagonal_poles() {
        let p = eigenvalues2(&[[-3.0_f64, 0.0], [0.0, 2.0]]);
        assert_eq!((p[0].re, p[1].re), (2.0, -3.0));
    }

    #[test]
    fn scalar_riccati_closed_form() {
        let s = solve_care(&[-1.0_f64], &[1.0], &[1.0], 1.0).unwrap();
        let expected = 2.0_f64.sqrt() - 1.0;
        assert!((s.p[0] - expected).abs() < 1e-12);
        assert!((s.k[0] - expected).abs() < 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn unstable_uncontrollable_pair_rejected() {
        let err = solve_care(&[1.0_f64, 0.0, 0.0, -1.0], &[0.0, 1.0], &[1.0, 0.0, 0.0, 1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn identified_model_lqr_is_stable() {
        let m = StateSpaceModel::<f64>::identified();
        let w = bryson_weights([0.05, 0.1], 0.2).unwrap();
        let s = lqr_gain(&m, &w).unwrap();
        assert!(s.closed_loop_poles.iter().all(|p| p.re < 0.0));
        assert!(s.residual < 1e-8, "residual {}", s.residual);
    }

    #[test]
    fn pd_examples() {
        let m = StateSpaceModel::<f64>::identified();
        assert_eq!(K_from_pd(2.0, 0.0, &m).unwrap(), [2.0 * m.c[0], 2.0 * m.c[1]]);
        let k = K_from_pd(2.0, 0.05, &m).unwrap();
        let (kp, kd) = pd_from_K(&k, &m).unwrap();
        assert!((kp - 2.0).abs() < 1e-8 && (kd - 0.05).abs() < 1e-8);
        assert_eq!(pd_from_K(&[0.0, 0.0], &m).unwrap(), (0.0, 0.0));
        let zero_c = StateSpaceModel { c: [0.0, 0.0], ..m };
        assert!(pd_from_K(&[1.0, 1.0], &zero_c).is_err());
    }

    #[test]
    fn bryson_examples() {
        let w = bryson_weights([1.0_f64, 1.0], 1.0).unwrap();
        assert_eq!(w.q, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(w.r, 1.0);
        let w = bryson_weights([0.5_f64, 2.0], 4.0).unwrap();
        assert_eq!(w.q, [[4.0, 0.0], [0.0, 0.25]]);
        assert_eq!(w.r, 1.0 / 16.0);
        assert!(bryson_weights([0.0_f64, 1.0], 1.0).is_err());
    }

    #[test]
    fn identified_dc_gain_is_positive() {
        let g = StateSpaceModel::<f64>::identified().dc_gain().unwrap();
        assert!(g > 0.25 && g < 0.35, "{g}");
    }
}
