//! Chordal Loewner flow on the upper half-plane.
//!
//! Each step freezes the driver and applies the explicit solution
//! `g -> u + sqrt((g - u)^2 + 4 dt)`; traces are recovered by composing the
//! inverse steps backwards from the driver value.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::abm_mc::{hcap_mc, EstimateCI, HullShape, McParams, ObstacleSet, RngStream};
use crate::error::{Error, Result};
use crate::geometry::{check_point, ComplexPoint, SwallowTime};

/// How the frozen value of a step is read off the driver nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    /// Linear between nodes; a step uses the midpoint value.
    PiecewiseLinear,
    /// Constant on `(t_{k-1}, t_k]` with value `values[k]`.
    LeftOpen,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DrivingFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl DrivingFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::with_interpolation(times, values, Interpolation::PiecewiseLinear)
    }

    pub fn with_interpolation(times: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter("driver needs matching nonempty grids".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter("driver grid must start at 0".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter("driver grid must be strictly increasing".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("driver values"));
        }
        Ok(DrivingFunction { times, values, interpolation })
    }

    /// Constant driver on a uniform grid of step `dt` up to `horizon`.
    pub fn constant(c: f64, horizon: f64, dt: f64) -> Result<Self> {
        let times = uniform_grid(horizon, dt)?;
        let values = vec![c; times.len()];
        Self::new(times, values)
    }

    /// `xi0 + sqrt(kappa) B_t` sampled on a uniform grid.
    pub fn brownian<R: Rng + ?Sized>(xi0: f64, kappa: f64, horizon: f64, dt: f64, rng: &mut R) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!("kappa {kappa} must be nonnegative")));
        }
        let times = uniform_grid(horizon, dt)?;
        let mut values = Vec::with_capacity(times.len());
        values.push(xi0);
        let sk = kappa.sqrt();
        for k in 1..times.len() {
            let h = times[k] - times[k - 1];
            let n: f64 = rng.sample(StandardNormal);
            values.push(values[k - 1] + sk * h.sqrt() * n);
        }
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return self.values[0];
        }
        if k >= self.times.len() {
            return *self.values.last().unwrap();
        }
        match self.interpolation {
            Interpolation::PiecewiseLinear => {
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                let w = (t - t0) / (t1 - t0);
                self.values[k - 1] * (1.0 - w) + self.values[k] * w
            }
            Interpolation::LeftOpen => self.values[k],
        }
    }

    /// Frozen driver value for the step ending at node `k >= 1`.
    pub fn step_value(&self, k: usize) -> f64 {
        match self.interpolation {
            Interpolation::PiecewiseLinear => 0.5 * (self.values[k - 1] + self.values[k]),
            Interpolation::LeftOpen => self.values[k],
        }
    }

    /// Steps `(t_start, t_end, frozen value)` covering `[0, horizon]`.
    pub fn steps_until(&self, horizon: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for k in 1..self.times.len() {
            let (t0, t1) = (self.times[k - 1], self.times[k]);
            if t0 >= horizon {
                break;
            }
            if t1 <= horizon {
                out.push((t0, t1, self.step_value(k)));
            } else {
                let u = match self.interpolation {
                    Interpolation::PiecewiseLinear => 0.5 * (self.values[k - 1] + self.value_at(horizon)),
                    Interpolation::LeftOpen => self.values[k],
                };
                out.push((t0, horizon, u));
                break;
            }
        }
        out
    }

    /// `t -> c xi(t / c^2)`, whose hulls are the `c`-dilates.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("scale {c} must be positive")));
        }
        Self::with_interpolation(
            self.times.iter().map(|t| t * c * c).collect(),
            self.values.iter().map(|v| v * c).collect(),
            self.interpolation,
        )
    }

    pub fn negated(&self) -> Self {
        DrivingFunction {
            times: self.times.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            interpolation: self.interpolation,
        }
    }

    /// Resample on a uniform grid of step `dt` by interpolation.
    pub fn resample(&self, dt: f64) -> Result<Self> {
        let times = uniform_grid(self.horizon(), dt)?;
        let values = times.iter().map(|&t| self.value_at(t)).collect();
        Self::new(times, values)
    }
}

/// Uniform grid `0, dt, ..., horizon` (last step shortened if needed).
pub fn uniform_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad grid: horizon {horizon}, dt {dt}")));
    }
    let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).min(horizon)).collect();
    t.dedup();
    Ok(t)
}

/// Picks the square root with nonnegative imaginary part; on the real line
/// the sign follows `reference`.
fn upper_sqrt(w: ComplexPoint, reference: ComplexPoint) -> ComplexPoint {
    let r = w.sqrt();
    if r.im < 0.0 || (r.im == 0.0 && r.re * reference.re < 0.0) {
        -r
    } else {
        r
    }
}

/// One exact step of the chordal flow with constant driver `u`.
#[inline]
pub fn forward_step(z: ComplexPoint, u: f64, dt: f64) -> ComplexPoint {
    let d = z - u;
    u + upper_sqrt(d * d + 4.0 * dt, d)
}

/// Inverse of [`forward_step`]; maps `u` to the tip `u + 2i sqrt(dt)`.
#[inline]
pub fn inverse_step(w: ComplexPoint, u: f64, dt: f64) -> ComplexPoint {
    let d = w - u;
    u + upper_sqrt(d * d - 4.0 * dt, d)
}

/// `-1/(pi (z - xi))`, the complex Poisson kernel of the half-plane.
pub fn complex_poisson_h(z: ComplexPoint, xi: f64) -> Result<ComplexPoint> {
    check_point(z, "complex_poisson_h")?;
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    Ok(-1.0 / (std::f64::consts::PI * (z - xi)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ForwardOutcome {
    Mapped(ComplexPoint),
    Swallowed { time: f64, bracket: (f64, f64) },
}

impl ForwardOutcome {
    pub fn swallow_time(&self) -> SwallowTime {
        match self {
            ForwardOutcome::Mapped(_) => SwallowTime::Never,
            ForwardOutcome::Swallowed { time, .. } => SwallowTime::At(*time),
        }
    }
}

/// Threshold below which `|g - xi|` counts as swallowed after a step of size `dt`.
#[inline]
pub fn swallow_threshold(dt: f64) -> f64 {
    4.0 * dt.sqrt()
}

/// Integrates the chordal equation for `z` up to `horizon`.
pub fn loewner_forward(driver: &DrivingFunction, z: ComplexPoint, horizon: f64) -> Result<ForwardOutcome> {
    check_point(z, "loewner_forward")?;
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    if horizon > driver.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} exceeds driver horizon {}",
            driver.horizon()
        )));
    }
    let mut g = z;
    for (t0, t1, u) in driver.steps_until(horizon) {
        let dt = t1 - t0;
        g = forward_step(g, u, dt);
        let node = driver.value_at(t1);
        if (g - node).norm() < swallow_threshold(dt) || !g.im.is_finite() {
            return Ok(ForwardOutcome::Swallowed { time: t1, bracket: (t0, t1) });
        }
    }
    Ok(ForwardOutcome::Mapped(g))
}

/// Swallow time over the whole driver horizon.
pub fn swallow_time(driver: &DrivingFunction, z: ComplexPoint) -> Result<SwallowTime> {
    Ok(loewner_forward(driver, z, driver.horizon())?.swallow_time())
}

/// Swallow times of many points.
pub fn hull_probe(driver: &DrivingFunction, points: &[ComplexPoint]) -> Result<crate::geometry::HullProbe> {
    let times = points
        .iter()
        .map(|&p| swallow_time(driver, p))
        .collect::<Result<Vec<_>>>()?;
    crate::geometry::HullProbe::new(points.to_vec(), times)
}

/// Flow of a real boundary point `x != xi(0)`; returns the time at which it
/// is absorbed into the hull, if any.
pub fn real_point_swallow(driver: &DrivingFunction, x: f64, horizon: f64) -> SwallowTime {
    let mut g = x;
    for (t0, t1, u) in driver.steps_until(horizon) {
        let dt = t1 - t0;
        let d = g - u;
        g = u + d.signum() * (d * d + 4.0 * dt).sqrt();
        let node = driver.value_at(t1);
        if (g - node).abs() < swallow_threshold(dt) || (g - node) * d <= 0.0 {
            return SwallowTime::At(t1);
        }
    }
    SwallowTime::Never
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    /// Capacity-clock time (hcap of the hull is `2 t`).
    pub t: f64,
    pub driver: f64,
    pub tip: ComplexPoint,
}

/// Tip at node `k` by backward composition of inverse steps.
fn tip_at(steps: &[(f64, f64)], k: usize, start: f64) -> ComplexPoint {
    if k == 0 {
        return ComplexPoint::new(start, 0.0);
    }
    let mut w = ComplexPoint::new(steps[k - 1].0, 0.0);
    for &(u, dt) in steps[..k].iter().rev() {
        w = inverse_step(w, u, dt);
    }
    if w.im < 0.0 {
        w.im = 0.0;
    }
    w
}

/// Trace at every node of the driver grid. Cost is quadratic in the node count.
pub fn trace(driver: &DrivingFunction) -> Vec<TraceSample> {
    let nodes: Vec<usize> = (0..driver.len()).collect();
    trace_at(driver, &nodes)
}

/// Trace at selected node indices.
pub fn trace_at(driver: &DrivingFunction, nodes: &[usize]) -> Vec<TraceSample> {
    let steps: Vec<(f64, f64)> = (1..driver.len())
        .map(|k| (driver.step_value(k), driver.times[k] - driver.times[k - 1]))
        .collect();
    nodes
        .iter()
        .map(|&k| TraceSample {
            t: driver.times[k],
            driver: driver.values[k],
            tip: tip_at(&steps, k, driver.values[0]),
        })
        .collect()
}

/// Trace resampled on a uniform grid of step `dt`.
pub fn trace_with_step(driver: &DrivingFunction, dt: f64) -> Result<Vec<TraceSample>> {
    Ok(trace(&driver.resample(dt)?))
}

pub fn write_trace_csv(path: &Path, samples: &[TraceSample]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,driver,tip_re,tip_im")?;
    for s in samples {
        writeln!(f, "{},{},{},{}", s.t, s.driver, s.tip.re, s.tip.im)?;
    }
    f.flush()?;
    Ok(())
}

/// Composition of elementary chordal steps `(u_k, dtau_k)`, as produced by
/// zipping a curve.
#[derive(Clone, Debug, Default)]
pub struct ChordalFlow {
    steps: Vec<(f64, f64)>,
}

impl ChordalFlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, u: f64, dtau: f64) {
        self.steps.push((u, dtau));
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total capacity time `sum dtau` (hcap is twice this).
    pub fn time(&self) -> f64 {
        self.steps.iter().map(|s| s.1).sum()
    }

    pub fn apply(&self, z: ComplexPoint) -> ComplexPoint {
        self.steps.iter().fold(z, |g, &(u, dt)| forward_step(g, u, dt))
    }

    pub fn apply_inverse(&self, w: ComplexPoint) -> ComplexPoint {
        self.steps.iter().rev().fold(w, |g, &(u, dt)| inverse_step(g, u, dt))
    }

    /// Appends the step that sends the image of `p` to the real line; returns
    /// `(u, dtau)`.
    pub fn zip_point(&mut self, p: ComplexPoint) -> (f64, f64) {
        let w = self.apply(p);
        let h = w.im.max(0.0);
        let step = (w.re, 0.25 * h * h);
        if step.1 > 0.0 {
            self.steps.push(step);
        }
        step
    }

    /// Applies the flow to a real point, keeping it real.
    pub fn apply_real(&self, x: f64) -> f64 {
        self.steps.iter().fold(x, |g, &(u, dt)| {
            let d = g - u;
            u + d.signum() * (d * d + 4.0 * dt).sqrt()
        })
    }
}

/// Closed-form hulls used as oracles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticShape {
    /// `[x, x + i height]`
    VerticalSegment { x: f64, height: f64 },
    /// `{ |z - center| <= radius, Im z >= 0 }`
    HalfDisk { center: f64, radius: f64 },
}

impl AnalyticShape {
    pub fn hcap(&self) -> f64 {
        match *self {
            AnalyticShape::VerticalSegment { height, .. } => 0.5 * height * height,
            AnalyticShape::HalfDisk { radius, .. } => radius * radius,
        }
    }

    pub fn rad(&self) -> f64 {
        match *self {
            AnalyticShape::VerticalSegment { x, height } => x.hypot(height),
            AnalyticShape::HalfDisk { center, radius } => center.abs() + radius,
        }
    }

    pub fn shifted(&self, dx: f64) -> Self {
        match *self {
            AnalyticShape::VerticalSegment { x, height } => AnalyticShape::VerticalSegment { x: x + dx, height },
            AnalyticShape::HalfDisk { center, radius } => AnalyticShape::HalfDisk { center: center + dx, radius },
        }
    }

    pub fn contains(&self, z: ComplexPoint, tol: f64) -> bool {
        match *self {
            AnalyticShape::VerticalSegment { x, height } => {
                (z.re - x).abs() <= tol && z.im <= height + tol
            }
            AnalyticShape::HalfDisk { center, radius } => (z - center).norm() <= radius + tol,
        }
    }

    /// The hydrodynamically normalized map from the complement onto the half-plane.
    pub fn map(&self, z: ComplexPoint) -> Result<ComplexPoint> {
        check_point(z, "analytic map")?;
        if self.contains(z, 0.0) && z.im > 0.0 {
            return Err(Error::Domain(format!("{z} lies in the hull")));
        }
        Ok(match *self {
            AnalyticShape::VerticalSegment { x, height } => {
                let d = z - x;
                x + upper_sqrt(d * d + height * height, d)
            }
            AnalyticShape::HalfDisk { center, radius } => {
                let d = z - center;
                center + d + radius * radius / d
            }
        })
    }

    pub fn hull_shape(&self) -> HullShape {
        match *self {
            AnalyticShape::VerticalSegment { x, height } => {
                HullShape::Segment { a: ComplexPoint::new(x, 0.0), b: ComplexPoint::new(x, height) }
            }
            AnalyticShape::HalfDisk { center, radius } => HullShape::HalfDisk { center, radius },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TranslationCheck {
    pub original: EstimateCI,
    pub shifted: EstimateCI,
    pub z_score: f64,
    pub passed: bool,
}

/// Compares Monte Carlo capacities of `shape` and `shape + x` (3 combined errors).
pub fn hcap_translation_check(
    shape: &AnalyticShape,
    x: f64,
    n: usize,
    params: &McParams,
    stream: RngStream,
) -> Result<TranslationCheck> {
    let r0 = 1.5 * shape.rad();
    let sh = shape.shifted(x);
    let r1 = 1.5 * sh.rad();
    let original = hcap_mc(&ObstacleSet::hull_only(vec![shape.hull_shape()]), r0, n, params, stream)?;
    let shifted = if x == 0.0 {
        original
    } else {
        hcap_mc(&ObstacleSet::hull_only(vec![sh.hull_shape()]), r1, n, params, stream.substream(1))?
    };
    let se = original.std_error.hypot(shifted.std_error).max(f64::MIN_POSITIVE);
    let z = (original.value - shifted.value).abs() / se;
    Ok(TranslationCheck { original, shifted, z_score: z, passed: x == 0.0 || z <= 3.0 })
}

/// `|z - g_A(z) + hcap/z| |z|^2 / (rad hcap)`, the normalized expansion tail.
pub fn expansion_tail_check(shape: &AnalyticShape, z: ComplexPoint) -> Result<f64> {
    let rad = shape.rad();
    if z.norm() < 2.0 * rad {
        return Err(Error::Domain(format!("|z| = {} is below 2 rad(A) = {}", z.norm(), 2.0 * rad)));
    }
    let a = shape.hcap();
    let g = shape.map(z)?;
    Ok((z - g + a / z).norm() * z.norm_sqr() / (rad * a))
}

/// Brownian driver values via an explicit RNG, for callers sharing noise.
pub fn brownian_increments<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let s = dt.sqrt();
    (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> ComplexPoint {
        ComplexPoint::new(re, im)
    }

    #[test]
    fn poisson_kernel_examples() {
        let pi = std::f64::consts::PI;
        let v = complex_poisson_h(c(0.0, 1.0), 0.0).unwrap();
        assert!((v - c(0.0, 1.0 / pi)).norm() < 1e-15);
        let v = complex_poisson_h(c(1.0, 1.0), 1.0).unwrap();
        assert!((v - c(0.0, 1.0 / pi)).norm() < 1e-15);
        let v = complex_poisson_h(c(2.0, 1.0), 0.0).unwrap();
        assert!((v.im - 0.2 / pi).abs() < 1e-15);
        assert!(complex_poisson_h(c(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn constant_driver_closed_form() {
        let d = DrivingFunction::constant(0.0, 1.0, 1e-3).unwrap();
        match loewner_forward(&d, c(0.0, 3.0), 1.0).unwrap() {
            ForwardOutcome::Mapped(g) => assert!((g - c(0.0, 5f64.sqrt())).norm() < 1e-12),
            o => panic!("{o:?}"),
        }
        let d = DrivingFunction::constant(0.7, 1.0, 1e-3).unwrap();
        let z = c(0.2, 0.5);
        let r = ((z - 0.7) * (z - 0.7) + 4.0).sqrt();
        let exact = 0.7 + if r.im < 0.0 { -r } else { r };
        match loewner_forward(&d, z, 1.0).unwrap() {
            ForwardOutcome::Mapped(g) => assert!((g - exact).norm() < 1e-12),
            o => panic!("{o:?}"),
        }
        match loewner_forward(&d, z, 0.0).unwrap() {
            ForwardOutcome::Mapped(g) => assert_eq!(g, z),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn swallow_time_examples() {
        let d = DrivingFunction::constant(0.0, 2.0, 1e-5).unwrap();
        let t = swallow_time(&d, c(0.0, 1.0)).unwrap().finite().unwrap();
        assert!((t - 0.25).abs() < 1e-4, "{t}");
        let d = DrivingFunction::constant(0.0, 2.0, 1e-4).unwrap();
        let t = swallow_time(&d, c(0.0, 2.0)).unwrap().finite().unwrap();
        assert!((t - 1.0).abs() < 1e-3, "{t}");
        assert_eq!(swallow_time(&d, c(10.0, 1.0)).unwrap(), SwallowTime::Never);
    }

    #[test]
    fn vertical_trace() {
        let d = DrivingFunction::constant(0.0, 1.0, 1e-3).unwrap();
        let tr = trace(&d);
        let last = tr.last().unwrap();
        assert!((last.tip - c(0.0, 2.0)).norm() < 1e-9, "{}", last.tip);
        assert_eq!(tr[0].tip, c(0.0, 0.0));
        assert!(tr.iter().all(|s| s.tip.im >= 0.0));
    }

    #[test]
    fn zipper_inverts_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = DrivingFunction::brownian(0.0, 6.0, 0.2, 1e-3, &mut rng).unwrap();
        let tr = trace(&d);
        let mut flow = ChordalFlow::new();
        for (k, s) in tr.iter().enumerate().skip(1) {
            let (u, dt) = flow.zip_point(s.tip);
            assert!((u - d.step_value(k)).abs() < 1e-7, "k={k}");
            assert!((dt - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn mirror_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DrivingFunction::brownian(0.0, 3.0, 0.1, 1e-3, &mut rng).unwrap();
        let a = trace(&d);
        let b = trace(&d.negated());
        for (p, q) in a.iter().zip(&b) {
            assert!((p.tip + q.tip.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn real_point_absorbed_by_landing_curve() {
        // driver moving left makes the trace bend and eventually swallow points on the right
        let times: Vec<f64> = uniform_grid(1.0, 1e-3).unwrap();
        let values: Vec<f64> = times.iter().map(|t| -4.0 * t).collect();
        let d = DrivingFunction::new(times, values).unwrap();
        assert_eq!(real_point_swallow(&d, -5.0, 1.0), SwallowTime::Never);
        let _ = real_point_swallow(&d, 0.3, 1.0);
    }

    #[test]
    fn analytic_shapes() {
        let seg = AnalyticShape::VerticalSegment { x: 0.0, height: 1.0 };
        assert_eq!(seg.hcap(), 0.5);
        let g = seg.map(c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, 3f64.sqrt())).norm() < 1e-14);
        let disk = AnalyticShape::HalfDisk { center: 0.0, radius: 1.0 };
        let r = expansion_tail_check(&disk, c(5.0, 5.0)).unwrap();
        assert!(r < 1e-12);
        let r10 = expansion_tail_check(&seg, c(0.0, 10.0)).unwrap();
        let r100 = expansion_tail_check(&seg, c(0.0, 100.0)).unwrap();
        assert!(r10 < 10.0 && r100 < 10.0);
        assert!(r100 <= r10);
        assert!(expansion_tail_check(&seg, c(0.0, 1.5)).is_err());
    }
}
