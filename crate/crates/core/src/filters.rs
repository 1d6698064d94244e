//! Transfer functions and stream filters used by the feedback pipeline.
//!
//! The stateless functions ([`soft_coerce`], [`hard_coerce`],
//! [`smooth_deadband`], [`sharp_deadband`]) are pure. The stateful filters
//! ([`WlbfFilter`], [`EwIntegrator`], [`MeanFilter`]) are plain owned values
//! advanced one sample at a time.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, sgn, Real};

/// Bounds `(min, max)` with an exponential buffer zone of width `buffer`
/// inside each end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "RawSoftBounds<T>")]
pub struct SoftBounds<T: Real> {
    min: T,
    max: T,
    buffer: T,
}

#[derive(Deserialize)]
#[serde(bound = "")]
struct RawSoftBounds<T: Real> {
    min: T,
    max: T,
    buffer: T,
}

impl<T: Real> TryFrom<RawSoftBounds<T>> for SoftBounds<T> {
    type Error = Error;
    fn try_from(r: RawSoftBounds<T>) -> Result<Self> {
        Self::new(r.min, r.max, r.buffer)
    }
}

impl<T: Real> SoftBounds<T> {
    pub fn new(min: T, max: T, buffer: T) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && buffer.is_finite()) {
            return Err(Error::param("soft bounds must be finite"));
        }
        if min >= max {
            return Err(Error::param(format!("soft bounds need min < max, got {min} >= {max}")));
        }
        if buffer <= T::zero() || buffer > (max - min) * lit(0.5) {
            return Err(Error::param(format!(
                "soft bounds buffer {buffer} outside (0, (max - min)/2]"
            )));
        }
        Ok(Self { min, max, buffer })
    }

    /// Symmetric bounds `(-limit, limit)`.
    pub fn symmetric(limit: T, buffer: T) -> Result<Self> {
        Self::new(-limit, limit, buffer)
    }

    pub fn min(&self) -> T {
        self.min
    }

    pub fn max(&self) -> T {
        self.max
    }

    pub fn buffer(&self) -> T {
        self.buffer
    }

    pub fn apply(&self, x: T) -> T {
        soft_coerce(x, self)
    }
}

/// C¹ saturation into the open interval `(min, max)`; identity on
/// `[min + buffer, max - buffer]`.
pub fn soft_coerce<T: Real>(x: T, bounds: &SoftBounds<T>) -> T {
    let b = bounds.buffer;
    let upper = bounds.max - b;
    let lower = bounds.min + b;
    if x > upper {
        let y = bounds.max - b * (-(x - upper) / b).exp();
        if y < bounds.max {
            y
        } else {
            // exp underflowed; stay strictly inside the open interval
            adjacent_inside(bounds.max, -T::one())
        }
    } else if x < lower {
        let y = bounds.min + b * ((x - lower) / b).exp();
        if y > bounds.min {
            y
        } else {
            adjacent_inside(bounds.min, T::one())
        }
    } else {
        x
    }
}

/// Representable neighbour of `x` in direction `dir` (`±1`).
fn adjacent_inside<T: Real>(x: T, dir: T) -> T {
    let mut step = (x.abs() + T::min_positive_value()) * T::epsilon();
    while step > T::zero() && x + dir * step * lit(0.5) != x {
        step *= lit(0.5);
    }
    x + dir * step
}

/// Standard clamp of `x` to `[min, max]`.
pub fn hard_coerce<T: Real>(x: T, min: T, max: T) -> Result<T> {
    if min > max || min.is_nan() || max.is_nan() {
        return Err(Error::param(format!("coerce needs min <= max, got [{min}, {max}]")));
    }
    Ok(clamp(x, min, max))
}

/// Clamp without range validation; callers guarantee `min <= max`.
#[inline]
pub(crate) fn clamp<T: Real>(x: T, min: T, max: T) -> T {
    if x < min {
        min
    } else if x > max {
        max
    } else {
        x
    }
}

/// C¹ deadband of radius `radius`: quadratic `x²/(4r)` inside `|x| < 2r`,
/// `x - r·sgn(x)` outside. A zero radius is the identity.
pub fn smooth_deadband<T: Real>(x: T, radius: T) -> Result<T> {
    if !(radius >= T::zero()) {
        return Err(Error::param(format!("deadband radius must be >= 0, got {radius}")));
    }
    Ok(smooth_deadband_unchecked(x, radius))
}

#[inline]
pub(crate) fn smooth_deadband_unchecked<T: Real>(x: T, radius: T) -> T {
    if radius <= T::zero() {
        return x;
    }
    let ax = x.abs();
    if ax < radius + radius {
        sgn(x) * x * x / (lit::<T>(4.0) * radius)
    } else {
        x - radius * sgn(x)
    }
}

/// Classic deadband: zero inside `|x| <= radius`, shifted identity outside.
pub fn sharp_deadband<T: Real>(x: T, radius: T) -> Result<T> {
    if !(radius >= T::zero()) {
        return Err(Error::param(format!("deadband radius must be >= 0, got {radius}")));
    }
    Ok(sharp_deadband_unchecked(x, radius))
}

#[inline]
pub(crate) fn sharp_deadband_unchecked<T: Real>(x: T, radius: T) -> T {
    if x.abs() <= radius {
        T::zero()
    } else {
        x - radius * sgn(x)
    }
}

/// Below this weighted timestamp variance (s²) the fitted line is degenerate
/// and the filter reports the weighted mean with zero slope.
pub const WLBF_MIN_TIME_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct WlbfSample<T> {
    time: T,
    value: T,
    weight: T,
}

/// Weighted line of best fit over the last `capacity` samples.
///
/// Evaluating the fit at the current time gives a smoothed value, and the
/// slope of the fitted line a smoothed derivative.
#[derive(Debug, Clone)]
pub struct WlbfFilter<T: Real> {
    capacity: usize,
    samples: VecDeque<WlbfSample<T>>,
}

/// Value and slope of a weighted line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub value: T,
    pub slope: T,
}

impl<T: Real> WlbfFilter<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("WLBF capacity must be at least 1"));
        }
        Ok(Self { capacity, samples: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Appends a sample, evicting the oldest when full.
    pub fn update(&mut self, time: T, value: T, weight: T) -> Result<()> {
        if !(weight >= T::zero()) || !weight.is_finite() {
            return Err(Error::param(format!("WLBF weight must be finite and >= 0, got {weight}")));
        }
        if !time.is_finite() || !value.is_finite() {
            return Err(Error::param("WLBF sample must be finite"));
        }
        if let Some(last) = self.samples.back() {
            if time < last.time {
                return Err(Error::param(format!(
                    "WLBF timestamps must be nondecreasing ({time} < {})",
                    last.time
                )));
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(WlbfSample { time, value, weight });
        Ok(())
    }

    /// Evaluates the weighted least-squares line at `now`.
    pub fn evaluate(&self, now: T) -> Result<LineFit<T>> {
        if self.samples.is_empty() {
            return Err(Error::State("WLBF filter is empty".into()));
        }
        let total: T = self.samples.iter().fold(T::zero(), |acc, s| acc + s.weight);
        if !(total > T::zero()) {
            return Err(Error::State("WLBF filter has no positively weighted samples".into()));
        }
        // centred on the weighted means
        let mut t_mean = T::zero();
        let mut y_mean = T::zero();
        for s in &self.samples {
            t_mean += s.weight * s.time;
            y_mean += s.weight * s.value;
        }
        t_mean /= total;
        y_mean /= total;
        let mut stt = T::zero();
        let mut sty = T::zero();
        for s in &self.samples {
            let dt = s.time - t_mean;
            stt += s.weight * dt * dt;
            sty += s.weight * dt * (s.value - y_mean);
        }
        if stt / total < lit(WLBF_MIN_TIME_VARIANCE) {
            return Ok(LineFit { value: y_mean, slope: T::zero() });
        }
        let slope = sty / stt;
        Ok(LineFit { value: y_mean + slope * (now - t_mean), slope })
    }
}

/// Piecewise-constant sample weights as a function of gait phase.
///
/// Windows are `[start, end)` intervals in radians on `(-pi, pi]`; a window
/// with `start > end` wraps through `pi`. Phases outside every window get
/// `default_weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PhaseWeightTable<T: Real> {
    pub default_weight: T,
    #[serde(default)]
    pub windows: Vec<PhaseWeightWindow<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PhaseWeightWindow<T: Real> {
    pub start: T,
    pub end: T,
    pub weight: T,
}

impl<T: Real> Default for PhaseWeightTable<T> {
    fn default() -> Self {
        Self { default_weight: T::one(), windows: Vec::new() }
    }
}

impl<T: Real> PhaseWeightTable<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: T| w >= T::zero() && w.is_finite();
        if !ok(self.default_weight) || self.windows.iter().any(|w| !ok(w.weight)) {
            return Err(Error::param("phase weights must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn weight(&self, phase: T) -> T {
        for w in &self.windows {
            let inside = if w.start <= w.end {
                phase >= w.start && phase < w.end
            } else {
                phase >= w.start || phase < w.end
            };
            if inside {
                return w.weight;
            }
        }
        self.default_weight
    }
}

/// Exponentially weighted ("leaky") integrator `I[n] = x[n] + α·I[n-1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwIntegrator<T: Real> {
    alpha: T,
    value: T,
}

impl<T: Real> EwIntegrator<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::param(format!("EW integrator alpha must be in [0, 1], got {alpha}")));
        }
        Ok(Self { alpha, value: T::zero() })
    }

    /// Integrator whose memory halves every `half_life` seconds at step `dt`.
    pub fn with_half_life(half_life: T, dt: T) -> Result<Self> {
        Self::new(alpha_from_half_life(half_life, dt)?)
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn reset(&mut self) {
        self.value = T::zero();
    }

    pub fn update(&mut self, x: T) -> T {
        self.value = x + self.alpha * self.value;
        self.value
    }
}

/// `α = 0.5^(dt / T_h)`.
pub fn alpha_from_half_life<T: Real>(half_life: T, dt: T) -> Result<T> {
    if !(half_life > T::zero()) || !(dt > T::zero()) {
        return Err(Error::param(format!(
            "half-life and time step must be positive, got T_h={half_life}, dt={dt}"
        )));
    }
    Ok(lit::<T>(0.5).powf(dt / half_life))
}

/// Moving average over the last `window` samples.
#[derive(Debug, Clone)]
pub struct MeanFilter<T: Real> {
    window: usize,
    values: VecDeque<T>,
}

impl<T: Real> MeanFilter<T> {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::param("mean filter window must be at least 1"));
        }
        Ok(Self { window, values: VecDeque::with_capacity(window) })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn reset(&mut self) {
        self.values.clear();
    }

    pub fn update(&mut self, x: T) -> T {
        if self.values.len() == self.window {
            self.values.pop_front();
        }
        self.values.push_back(x);
        self.mean()
    }

    /// Mean of the stored samples; zero when empty.
    pub fn mean(&self) -> T {
        if self.values.is_empty() {
            return T::zero();
        }
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / count(self.values.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn soft_coerce_examples() {
        let b = SoftBounds::new(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(soft_coerce(0.0, &b), 0.0);
        let expected = 1.0 - 0.5 * (-1.0_f64).exp();
        assert!(close(soft_coerce(1.0, &b), expected, 1e-15));
        assert!(close(soft_coerce(1.0, &b), 0.81606, 1e-5));
        let big = soft_coerce(1e6, &b);
        assert!(big < 1.0 && big > 0.5);
        let small = soft_coerce(-1e6, &b);
        assert!(small > -1.0 && small < -0.5);
        assert!(close(soft_coerce(-1.0, &b), -expected, 1e-15));
    }

    #[test]
    fn soft_bounds_validation() {
        assert!(SoftBounds::new(1.0, -1.0, 0.1).is_err());
        assert!(SoftBounds::new(-1.0, 1.0, 0.0).is_err());
        assert!(SoftBounds::new(-1.0, 1.0, 1.5).is_err());
        assert!(SoftBounds::new(-1.0, 1.0, 1.0).is_ok());
        assert!(SoftBounds::new(f64::NAN, 1.0, 0.1).is_err());
    }

    #[test]
    fn hard_coerce_examples() {
        assert_eq!(hard_coerce(0.5, 0.0, 1.0).unwrap(), 0.5);
        assert_eq!(hard_coerce(2.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(hard_coerce(-3.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(hard_coerce(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn smooth_deadband_examples() {
        assert_eq!(smooth_deadband(0.5, 1.0).unwrap(), 0.0625);
        assert_eq!(smooth_deadband(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(smooth_deadband(5.0, 1.0).unwrap(), 4.0);
        assert_eq!(smooth_deadband(-5.0, 1.0).unwrap(), -4.0);
        assert_eq!(smooth_deadband(0.3, 0.0).unwrap(), 0.3);
        assert!(smooth_deadband(1.0, -0.1).is_err());
    }

    #[test]
    fn sharp_deadband_examples() {
        assert_eq!(sharp_deadband(0.05, 0.1).unwrap(), 0.0);
        assert!(close(sharp_deadband(0.3, 0.1).unwrap(), 0.2, 1e-15));
        assert!(close(sharp_deadband(-0.3, 0.1).unwrap(), -0.2, 1e-15));
    }

    #[test]
    fn wlbf_ring_buffer_evicts_oldest() {
        let mut f = WlbfFilter::new(4).unwrap();
        for i in 0..5 {
            f.update(i as f64, (i * i) as f64, 1.0).unwrap();
        }
        assert_eq!(f.len(), 4);
        // points (1,1),(2,4),(3,9),(4,16): least-squares slope 5
        let fit = f.evaluate(4.0).unwrap();
        assert!(close(fit.slope, 5.0, 1e-12));
    }

    #[test]
    fn wlbf_zero_weight_has_no_influence() {
        let mut a = WlbfFilter::new(8).unwrap();
        let mut b = WlbfFilter::new(8).unwrap();
        for i in 0..5 {
            let t = 0.01 * i as f64;
            a.update(t, 2.0 * t + 1.0, 1.0).unwrap();
            b.update(t, 2.0 * t + 1.0, 1.0).unwrap();
        }
        b.update(0.05, 100.0, 0.0).unwrap();
        let fa = a.evaluate(0.05).unwrap();
        let fb = b.evaluate(0.05).unwrap();
        assert!(close(fa.slope, fb.slope, 1e-12));
        assert!(close(fa.value, fb.value, 1e-12));
    }

    #[test]
    fn wlbf_linear_and_constant_data() {
        let mut f = WlbfFilter::new(10).unwrap();
        let weights = [0.3, 1.0, 2.0, 0.7, 1.5, 0.1];
        for (i, w) in weights.iter().enumerate() {
            let t = 0.37 + 0.013 * i as f64;
            f.update(t, 3.0 * t + 1.0, *w).unwrap();
        }
        let fit = f.evaluate(1.25).unwrap();
        assert!(close(fit.slope, 3.0, 1e-9));
        assert!(close(fit.value, 3.0 * 1.25 + 1.0, 1e-9));

        let mut c = WlbfFilter::new(5).unwrap();
        for i in 0..5 {
            c.update(i as f64 * 0.01, -0.25, 1.0 + i as f64).unwrap();
        }
        let fit = c.evaluate(0.1).unwrap();
        assert!(close(fit.slope, 0.0, 1e-12));
        assert!(close(fit.value, -0.25, 1e-12));
    }

    #[test]
    fn wlbf_error_states() {
        let f: WlbfFilter<f64> = WlbfFilter::new(3).unwrap();
        assert!(matches!(f.evaluate(0.0), Err(Error::State(_))));
        let mut g = WlbfFilter::new(3).unwrap();
        g.update(0.0, 1.0, 0.0).unwrap();
        g.update(0.1, 2.0, 0.0).unwrap();
        assert!(matches!(g.evaluate(0.1), Err(Error::State(_))));
        assert!(g.update(0.05, 1.0, 1.0).is_err());
        assert!(g.update(0.2, 1.0, -1.0).is_err());
        assert!(WlbfFilter::<f64>::new(0).is_err());
    }

    /// Ridge-regularised normal equations, solved directly: for coincident
    /// timestamps the ridge pins the slope to zero.
    fn ridge_oracle(points: &[(f64, f64, f64)], now: f64, ridge: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y, w) in points {
            let t = t - now;
            s0 += w;
            s1 += w * t;
            s2 += w * t * t;
            sy += w * y;
            sty += w * t * y;
        }
        let s2 = s2 + ridge;
        let det = s0 * s2 - s1 * s1;
        let intercept = (sy * s2 - s1 * sty) / det;
        let slope = (s0 * sty - s1 * sy) / det;
        (intercept, slope)
    }

    #[test]
    fn wlbf_coincident_timestamps_match_ridge_oracle() {
        let pts = [(0.5, 1.0, 1.0), (0.5, 3.0, 3.0)];
        let mut f = WlbfFilter::new(4).unwrap();
        for &(t, y, w) in &pts {
            f.update(t, y, w).unwrap();
        }
        let fit = f.evaluate(0.6).unwrap();
        let (value, slope) = ridge_oracle(&pts, 0.6, 1e-9);
        assert!(close(fit.slope, slope, 1e-9));
        assert!(close(fit.value, value, 1e-9));
        assert!(close(fit.value, 2.5, 1e-12));
    }

    #[test]
    fn ew_integrator_examples() {
        let mut i = EwIntegrator::new(0.0).unwrap();
        i.update(3.0);
        i.update(-2.0);
        assert_eq!(i.update(7.0), 7.0);

        let mut i = EwIntegrator::new(1.0).unwrap();
        for x in [1.0, 2.0] {
            i.update(x);
        }
        assert_eq!(i.update(3.0), 6.0);

        let mut i = EwIntegrator::new(0.5).unwrap();
        i.update(1.0);
        i.update(1.0);
        assert_eq!(i.update(1.0), 1.75);

        assert!(EwIntegrator::new(1.5).is_err());
        assert!(EwIntegrator::new(-0.1).is_err());
    }

    #[test]
    fn alpha_from_half_life_examples() {
        assert!(close(alpha_from_half_life(0.01, 0.01).unwrap(), 0.5, 1e-15));
        assert!(close(alpha_from_half_life(0.02, 0.01).unwrap(), std::f64::consts::FRAC_1_SQRT_2, 1e-15));
        assert!(alpha_from_half_life(1e12, 0.01).unwrap() > 1.0 - 1e-12);
        assert!(alpha_from_half_life(0.0, 0.01).is_err());
        assert!(alpha_from_half_life(1.0, -0.01).is_err());
    }

    #[test]
    fn ew_half_life_decay() {
        let dt: f64 = 0.01;
        let half_life: f64 = 0.25;
        let mut ew = EwIntegrator::with_half_life(half_life, dt).unwrap();
        for _ in 0..5000 {
            ew.update(2.0);
        }
        let steps_per_half_life = (half_life / dt).round() as usize;
        let mut prev = ew.value();
        for _ in 0..4 {
            for _ in 0..steps_per_half_life {
                ew.update(0.0);
            }
            let ratio = ew.value() / prev;
            assert!((ratio - 0.5).abs() < 0.005, "ratio {ratio}");
            prev = ew.value();
        }
    }

    #[test]
    fn mean_filter_examples() {
        let mut m = MeanFilter::new(3).unwrap();
        assert_eq!(m.update(3.0), 3.0);
        let mut m = MeanFilter::new(3).unwrap();
        m.update(1.0);
        m.update(2.0);
        assert_eq!(m.update(3.0), 2.0);
        assert_eq!(m.update(10.0), 5.0);
        assert!(MeanFilter::<f64>::new(0).is_err());
    }

    #[test]
    fn phase_weight_table_lookup() {
        let table = PhaseWeightTable {
            default_weight: 1.0,
            windows: vec![
                PhaseWeightWindow { start: -0.1, end: 0.2, weight: 0.2 },
                PhaseWeightWindow { start: 3.0, end: -3.0, weight: 0.3 },
            ],
        };
        assert_eq!(table.weight(0.0), 0.2);
        assert_eq!(table.weight(1.0), 1.0);
        assert_eq!(table.weight(3.1), 0.3);
        assert_eq!(table.weight(-3.1), 0.3);
        assert!(table.validate().is_ok());
    }

    #[test]
    fn filters_work_in_single_precision() {
        let b = SoftBounds::<f32>::new(-1.0, 1.0, 0.5).unwrap();
        assert!((soft_coerce(1.0_f32, &b) - 0.81606).abs() < 1e-5);
        let mut f = WlbfFilter::<f32>::new(4).unwrap();
        for i in 0..4 {
            f.update(i as f32 * 0.1, 2.0 * i as f32 * 0.1, 1.0).unwrap();
        }
        assert!((f.evaluate(0.3).unwrap().slope - 2.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn soft_coerce_is_monotone_and_bounded(
            lo in -10.0..0.0f64, width in 0.01..20.0f64, frac in 0.01..1.0f64,
            x1 in -100.0..100.0f64, x2 in -100.0..100.0f64,
        ) {
            let b = SoftBounds::new(lo, lo + width, frac * width * 0.5).unwrap();
            let (a, c) = (soft_coerce(x1, &b), soft_coerce(x2, &b));
            prop_assert!(a > b.min() && a < b.max());
            if x1 >= b.min() + b.buffer() && x1 <= b.max() - b.buffer() {
                prop_assert_eq!(a, x1);
            }
            if x1 < x2 { prop_assert!(a <= c); }
        }

        #[test]
        fn smooth_deadband_odd_and_contracting(x in -10.0..10.0f64, r in 0.0..3.0f64) {
            let f = smooth_deadband(x, r).unwrap();
            prop_assert_eq!(smooth_deadband(-x, r).unwrap(), -f);
            prop_assert!(f.abs() <= x.abs());
        }
    }
}
