//! Villat kernel, annulus Loewner flows and annulus SLE, radial SLE, and the
//! Cayley transform between the disk and the half-plane.
//!
//! Annulus flows integrate `d log g / ds` by the explicit midpoint rule. The
//! modulus at clock `s` is `q(s) = Q e^s` and the kernel is `S_{P-s}` with
//! `P = -log Q`, i.e. the Villat kernel of modulus `q(s)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chordal::{forward_step, inverse_step, swallow_threshold, AnalyticShape};
use crate::error::{Error, Result};
use crate::geometry::{check_point, ComplexPoint};

/// Absolute tail tolerance of the Villat series.
pub const VILLAT_TOL: f64 = 1e-12;

const POLE_TOL: f64 = 1e-12;

/// Number of symmetric term pairs giving a tail below `eps`.
pub fn villat_terms(q: f64, eps: f64) -> usize {
    if q <= 0.0 {
        return 0;
    }
    ((eps * (1.0 - q * q)).ln() / (2.0 * q.ln())).ceil().max(1.0) as usize
}

fn check_modulus(q: f64) -> Result<()> {
    if !(q >= 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("modulus {q} outside [0, 1)")));
    }
    Ok(())
}

/// Term `n` and term `-n` of the series summed together.
#[inline]
fn villat_pair(a: f64, z: Complex64) -> Result<Complex64> {
    let d1 = 1.0 - a * z;
    let d2 = a - z;
    if d1.norm() < POLE_TOL || d2.norm() < POLE_TOL {
        return Err(Error::Domain(format!("{z} is a pole of the Villat kernel")));
    }
    Ok(2.0 * a * (1.0 - z * z) / (d1 * d2))
}

/// Partial sum over `-n_neg <= n <= n_pos`.
pub fn villat_partial(q: f64, z: ComplexPoint, n_neg: usize, n_pos: usize) -> Result<ComplexPoint> {
    check_modulus(q)?;
    if (1.0 - z).norm() < POLE_TOL {
        return Err(Error::Domain(format!("{z} is a pole of the Villat kernel")));
    }
    let mut sum = (1.0 + z) / (1.0 - z);
    for n in 1..=n_neg.max(n_pos) {
        let a = q.powi(2 * n as i32);
        match (n <= n_neg, n <= n_pos) {
            (true, true) => sum += villat_pair(a, z)?,
            (false, true) => sum += (1.0 + a * z) / (1.0 - a * z),
            (true, false) => sum += (a + z) / (a - z),
            (false, false) => {}
        }
    }
    Ok(sum)
}

/// `K_q(z)` by symmetric summation with tail below [`VILLAT_TOL`].
pub fn villat_kernel(q: f64, z: ComplexPoint) -> Result<ComplexPoint> {
    check_point(z, "villat_kernel")?;
    let n = villat_terms(q, VILLAT_TOL);
    villat_partial(q, z, n, n)
}

/// `K_q(z, zeta) = K_q(z / zeta)`.
pub fn villat_kernel_at(q: f64, z: ComplexPoint, zeta: ComplexPoint) -> Result<ComplexPoint> {
    villat_kernel(q, z / zeta)
}

/// `S_p(z, zeta) = K_{e^{-p}}(z, zeta)`.
pub fn schwarz_s(p: f64, z: ComplexPoint, zeta: ComplexPoint) -> Result<ComplexPoint> {
    villat_kernel_at((-p).exp(), z, zeta)
}

/// Annulus modulus `Q` with the flow clock `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusState {
    /// Initial modulus `Q`.
    pub q0: f64,
    pub s: f64,
    /// Driver on the unit circle.
    pub driver: ComplexPoint,
}

impl AnnulusState {
    pub fn new(q0: f64, s: f64, driver: ComplexPoint) -> Result<Self> {
        if !(q0 > 0.0 && q0 < 1.0) {
            return Err(Error::InvalidParameter(format!("modulus {q0} outside (0, 1)")));
        }
        if !(s >= 0.0 && s < -q0.ln()) {
            return Err(Error::InvalidParameter(format!("clock {s} outside [0, -log Q)")));
        }
        if ((driver.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::InvalidParameter("driver must lie on the unit circle".into()));
        }
        Ok(AnnulusState { q0, s, driver })
    }

    /// Current modulus `Q e^s`.
    pub fn modulus(&self) -> f64 {
        self.q0 * self.s.exp()
    }
}

/// Right-hand side of the log-derivative equation at clock `s`; with
/// `normalized` the inner circle point `q(s)` stays real.
pub fn annulus_field(q0: f64, s: f64, z: ComplexPoint, lambda: ComplexPoint, normalized: bool) -> Result<ComplexPoint> {
    let q = q0 * s.exp();
    let k = villat_kernel(q, z / lambda)?;
    if normalized {
        let c = villat_kernel(q, q / lambda)?;
        Ok(k - Complex64::new(0.0, c.im))
    } else {
        Ok(k)
    }
}

/// Midpoint step of the log-derivative flow over `[s, s + ds]` with the
/// driver given as a function of the clock; `ds < 0` integrates backward.
pub fn annulus_flow_step(
    q0: f64,
    s: f64,
    ds: f64,
    z: ComplexPoint,
    driver: impl Fn(f64) -> ComplexPoint,
    normalized: bool,
) -> Result<ComplexPoint> {
    if ds == 0.0 {
        return Ok(z);
    }
    let k1 = annulus_field(q0, s, z, driver(s), normalized)?;
    let zm = z * (0.5 * ds * k1).exp();
    let k2 = annulus_field(q0, s + 0.5 * ds, zm, driver(s + 0.5 * ds), normalized)?;
    let w = z * (ds * k2).exp();
    if !(w.re.is_finite() && w.im.is_finite()) {
        return Err(Error::NonFinite("annulus flow"));
    }
    Ok(w)
}

/// One step of the normalized flow with the driver of `state` frozen.
/// Returns `None` once the point leaves the annulus or reaches the driver.
pub fn annulus_kl_step(state: &AnnulusState, z: ComplexPoint, ds: f64) -> Result<Option<ComplexPoint>> {
    check_point(z, "annulus_kl_step")?;
    let lam = state.driver;
    let w = match annulus_flow_step(state.q0, state.s, ds, z, |_| lam, true) {
        Ok(w) => w,
        Err(Error::Domain(_)) | Err(Error::NonFinite(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let q1 = state.q0 * (state.s + ds).exp();
    let r = w.norm();
    if r > 1.0 + 1e-9 || r < q1 * (1.0 - 1e-9) || (ds > 0.0 && (w - lam).norm() < swallow_threshold(ds)) {
        return Ok(None);
    }
    Ok(Some(w))
}

/// `int_s^{s+ds} Im S_{P-r}(e^{r-P}, lambda) dr` by Simpson's rule; the
/// rotation relating the normalized and unnormalized flows.
pub fn rotation_increment(q0: f64, s: f64, ds: f64, lambda: ComplexPoint) -> Result<f64> {
    let f = |r: f64| -> Result<f64> {
        let q = q0 * r.exp();
        Ok(villat_kernel(q, q / lambda)?.im)
    };
    Ok(ds / 6.0 * (f(s)? + 4.0 * f(s + 0.5 * ds)? + f(s + ds)?))
}

/// Largest `|e^{i theta(s)} g_s(z) - h_s(z)|` over the nodes and probe points,
/// where `g` follows the normalized flow driven by `lambdas` (step `k` frozen
/// at `lambdas[k]`) and `h` the unnormalized flow driven by the rotated driver.
pub fn rotation_discrepancy(q0: f64, ds: f64, lambdas: &[ComplexPoint], probes: &[ComplexPoint]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z0 in probes {
        let (mut g, mut h, mut theta) = (z0, z0, 0.0);
        for (k, &lam) in lambdas.iter().enumerate().take(lambdas.len() - 1) {
            let s = k as f64 * ds;
            let th0 = theta;
            let rot = |r: f64| -> ComplexPoint {
                let inc = rotation_increment(q0, s, r - s, lam).unwrap_or(f64::NAN);
                Complex64::from_polar(1.0, th0 + inc) * lam
            };
            h = annulus_flow_step(q0, s, ds, h, rot, false)?;
            g = annulus_flow_step(q0, s, ds, g, |_| lam, true)?;
            theta += rotation_increment(q0, s, ds, lam)?;
            let d = (Complex64::from_polar(1.0, theta) * g - h).norm();
            if !d.is_finite() {
                return Err(Error::NonFinite("rotation discrepancy"));
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Point of an annulus or radial trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSample {
    pub s: f64,
    pub lambda: ComplexPoint,
    pub tip: ComplexPoint,
}

const BACKWARD_SUBSTEPS: usize = 4;

/// Tip at node `n` of an unnormalized flow whose step `k` uses `lambdas[k + 1]`.
fn annulus_tip(q0: f64, times: &[f64], lambdas: &[ComplexPoint], n: usize) -> Result<ComplexPoint> {
    if n == 0 {
        return Ok(lambdas[0]);
    }
    let ds = times[n] - times[n - 1];
    let mut w = lambdas[n] * (1.0 - 2.0 * ds.sqrt());
    for k in (0..n - 1).rev() {
        let lam = lambdas[k + 1];
        let h = (times[k + 1] - times[k]) / BACKWARD_SUBSTEPS as f64;
        for m in 0..BACKWARD_SUBSTEPS {
            let s = times[k + 1] - m as f64 * h;
            w = annulus_flow_step(q0, s, -h, w, |_| lam, false)?;
        }
        let r = w.norm();
        if r > 1.0 {
            w /= r;
        }
    }
    Ok(w)
}

/// Brownian driver `e^{i B(kappa s)}` on a uniform clock grid.
pub fn circle_driver<R: Rng + ?Sized>(theta0: f64, kappa: f64, ds: f64, steps: usize, rng: &mut R) -> Vec<ComplexPoint> {
    let sd = (kappa * ds).sqrt();
    let mut th = theta0;
    let mut out = vec![Complex64::from_polar(1.0, th)];
    for _ in 0..steps {
        let g: f64 = rng.sample(StandardNormal);
        th += sd * g;
        out.push(Complex64::from_polar(1.0, th));
    }
    out
}

/// Annulus SLE trace in the annulus of modulus `q0` up to clock `t_max`,
/// driven by `e^{i B(kappa s)}` from `lambda(0) = 1`.
pub fn annulus_sle_trace<R: Rng + ?Sized>(q0: f64, kappa: f64, ds: f64, t_max: f64, rng: &mut R) -> Result<Vec<AnnulusSample>> {
    if !(q0 > 0.0 && q0 < 1.0) {
        return Err(Error::InvalidParameter(format!("modulus {q0} outside (0, 1)")));
    }
    if !(kappa >= 0.0 && ds > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidParameter("kappa must be nonnegative, ds and t_max positive".into()));
    }
    if t_max >= -q0.ln() {
        return Err(Error::InvalidParameter(format!("horizon {t_max} exhausts the modulus (limit {})", -q0.ln())));
    }
    let steps = (t_max / ds).round().max(1.0) as usize;
    let ds = t_max / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * ds).collect();
    let lambdas = circle_driver(0.0, kappa, ds, steps, rng);
    annulus_trace_from_driver(q0, &times, &lambdas)
}

/// Trace for a given driver sequence on `times`.
pub fn annulus_trace_from_driver(q0: f64, times: &[f64], lambdas: &[ComplexPoint]) -> Result<Vec<AnnulusSample>> {
    if times.len() != lambdas.len() || times.is_empty() {
        return Err(Error::InvalidParameter("times and driver lengths differ".into()));
    }
    (0..times.len())
        .map(|n| Ok(AnnulusSample { s: times[n], lambda: lambdas[n], tip: annulus_tip(q0, times, lambdas, n)? }))
        .collect()
}

pub fn write_annulus_csv(path: &std::path::Path, samples: &[AnnulusSample]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "s,lambda_re,lambda_im,tip_re,tip_im")?;
    for p in samples {
        writeln!(f, "{},{},{},{},{}", p.s, p.lambda.re, p.lambda.im, p.tip.re, p.tip.im)?;
    }
    f.flush()?;
    Ok(())
}

/// Direction of the Cayley transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiDirection {
    DiskToHalfPlane,
    HalfPlaneToDisk,
}

/// `psi(z) = i (1 + z) / (1 - z)` or its inverse `(w - i) / (w + i)`.
pub fn psi_transform(z: ComplexPoint, direction: PsiDirection) -> Result<ComplexPoint> {
    check_point(z, "psi_transform")?;
    let i = Complex64::i();
    match direction {
        PsiDirection::DiskToHalfPlane => {
            if (1.0 - z).norm() == 0.0 {
                return Err(Error::Domain("psi is singular at 1".into()));
            }
            Ok(i * (1.0 + z) / (1.0 - z))
        }
        PsiDirection::HalfPlaneToDisk => {
            if (z + i).norm() == 0.0 {
                return Err(Error::Domain("psi inverse is singular at -i".into()));
            }
            Ok((z - i) / (z + i))
        }
    }
}

/// `psi^{-1} o phi_{psi(A)} o psi` for a hull `A` in the disk whose image
/// under `psi` is a closed-form half-plane hull; `None` is the empty hull.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedCanonicalMap {
    pub image_hull: Option<AnalyticShape>,
}

impl ModifiedCanonicalMap {
    pub fn new(image_hull: Option<AnalyticShape>) -> Self {
        ModifiedCanonicalMap { image_hull }
    }

    pub fn apply(&self, z: ComplexPoint) -> Result<ComplexPoint> {
        modified_canonical_map(self.image_hull.as_ref(), z)
    }
}

pub fn modified_canonical_map(image_hull: Option<&AnalyticShape>, z: ComplexPoint) -> Result<ComplexPoint> {
    check_point(z, "modified_canonical_map")?;
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("{z} lies outside the closed disk")));
    }
    let Some(shape) = image_hull else {
        return Ok(z);
    };
    let w = psi_transform(z, PsiDirection::DiskToHalfPlane)?;
    let w = if w.im < 0.0 { Complex64::new(w.re, 0.0) } else { w };
    if shape.contains(w, 0.0) {
        return Err(Error::Domain(format!("{z} lies in the hull")));
    }
    let v = shape.map(w)?;
    psi_transform(Complex64::new(v.re, v.im.max(0.0)), PsiDirection::HalfPlaneToDisk)
}

/// Outcome of one path in the radial/chordal comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialHit {
    /// Argument of the first trace point in the disk of radius `r0`, when
    /// reached before the hull separates `0` from `1`.
    pub arg: Option<f64>,
    /// Clock value at which the path stopped.
    pub time: f64,
    /// Horizon reached without either event.
    pub censored: bool,
}

impl RadialHit {
    /// Functional value with the separation event encoded as `4`.
    pub fn value(&self) -> f64 {
        self.arg.unwrap_or(4.0)
    }
}

/// Radial SLE from `e^{i theta0}` in the unit disk, stopped when the trace
/// enters the disk of radius `r0` or boundary point `1` is swallowed.
pub fn radial_sle_hit<R: Rng + ?Sized>(theta0: f64, kappa: f64, dt: f64, t_max: f64, r0: f64, rng: &mut R) -> Result<RadialHit> {
    if !(dt > 0.0 && t_max > 0.0 && r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidParameter("dt, t_max positive and r0 in (0, 1) required".into()));
    }
    let sd = (kappa * dt).sqrt();
    let mut alpha = theta0;
    // angle of g_t(1) relative to the driver, in (0, 2 pi)
    let mut delta = (-theta0).rem_euclid(2.0 * PI);
    if delta == 0.0 {
        return Err(Error::Domain("start point coincides with the marked point 1".into()));
    }
    let mut times = vec![0.0];
    let mut lambdas = vec![Complex64::from_polar(1.0, alpha)];
    let steps = (t_max / dt).ceil() as usize;
    for n in 1..=steps {
        let g: f64 = rng.sample(StandardNormal);
        let da = sd * g;
        alpha += da;
        // frozen driver over the step, boundary angle by the midpoint rule
        let d0 = delta - da;
        let dm = d0 + 0.5 * dt / (0.5 * d0).tan();
        delta = d0 + dt / (0.5 * dm).tan();
        let t = n as f64 * dt;
        times.push(t);
        lambdas.push(Complex64::from_polar(1.0, alpha));
        let eps = swallow_threshold(dt);
        if !(delta > eps && delta < 2.0 * PI - eps) {
            return Ok(RadialHit { arg: None, time: t, censored: false });
        }
        let tip = annulus_tip(0.0, &times, &lambdas, n)?;
        if tip.norm() <= r0 {
            return Ok(RadialHit { arg: Some(tip.arg()), time: t, censored: false });
        }
    }
    Ok(RadialHit { arg: None, time: t_max, censored: true })
}

/// Chordal SLE from `0` in the half-plane carried to the disk by `psi^{-1}`,
/// stopped like [`radial_sle_hit`]; separation of `0` from `1` is the
/// swallowing of `i`.
pub fn chordal_disk_hit<R: Rng + ?Sized>(kappa: f64, dt: f64, t_max: f64, r0: f64, rng: &mut R) -> Result<RadialHit> {
    if !(dt > 0.0 && t_max > 0.0 && r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidParameter("dt, t_max positive and r0 in (0, 1) required".into()));
    }
    let sd = (kappa * dt).sqrt();
    let mut u = 0.0;
    let mut gi = Complex64::i();
    let mut us: Vec<f64> = Vec::new();
    let steps = (t_max / dt).ceil() as usize;
    for n in 1..=steps {
        let g: f64 = rng.sample(StandardNormal);
        u += sd * g;
        us.push(u);
        gi = forward_step(gi, u, dt);
        let t = n as f64 * dt;
        if (gi - u).norm() < swallow_threshold(dt) {
            return Ok(RadialHit { arg: None, time: t, censored: false });
        }
        let mut w = Complex64::new(u, 0.0);
        for &v in us.iter().rev() {
            w = inverse_step(w, v, dt);
        }
        let d = psi_transform(Complex64::new(w.re, w.im.max(0.0)), PsiDirection::HalfPlaneToDisk)?;
        if d.norm() <= r0 {
            return Ok(RadialHit { arg: Some(d.arg()), time: t, censored: false });
        }
    }
    Ok(RadialHit { arg: None, time: t_max, censored: true })
}

/// Circularly slit annulus Komatu-Loewner flow; not available.
pub fn circular_slit_annulus_flow() -> Result<()> {
    Err(Error::NotImplemented("circularly slit annulus Komatu-Loewner flow"))
}

/// Circularly slit disk Komatu-Loewner flow; not available.
pub fn circular_slit_disk_flow() -> Result<()> {
    Err(Error::NotImplemented("circularly slit disk Komatu-Loewner flow"))
}
