//! BMD complex Poisson kernel of a standard slit domain, the drift
//! coefficients built from it, and the darned-slit values of `Im g`.
//!
//! The kernel is split as `Psi_s(z, xi) = -1/(pi (z - xi)) + h(z)`. The
//! correction `h` is represented by a zero-mean charge density on each slit
//! together with its mirror image across the real axis:
//!
//! `h(z) = -(i/2) sum_k sum_{n>=1} (a_kn / n) [W(zeta'_k)^n - W(zeta_k)^n]`
//!
//! with `zeta_k = (z - c_k)/L_k`, `zeta'_k = (z - conj c_k)/L_k` and
//! `W(zeta) = zeta - sqrt(zeta^2 - 1)`. Each term is real on the real axis
//! and has zero flux around its slit, so only the slit Dirichlet conditions
//! `Im Psi = const_j` remain; they are collocated at Chebyshev points.
//! A finite-difference solver and the Monte Carlo
//! decomposition below serve as independent cross-checks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use num_complex::Complex64;
use serde::Serialize;

use crate::abm_mc::{
    harmonic_measure_eta, EstimateCI, ExcursionLaw, HitKind, HullShape, McParams, Moments,
    ObstacleSet, Rect, RngStream, Walker,
};
use crate::chordal::complex_poisson_h;
use crate::error::{Error, Result};
use crate::geometry::{check_point, CoefficientFunction, ComplexPoint, Homogeneity, SlitVector};

/// `W(zeta) = zeta - sqrt(zeta^2 - 1)`, the branch with `|W| <= 1`.
#[inline]
pub fn joukowski_inverse(zeta: Complex64) -> Complex64 {
    let s = (zeta - 1.0).sqrt() * (zeta + 1.0).sqrt();
    1.0 / (zeta + s)
}

/// Number of Chebyshev modes per slit chosen from the geometry.
pub fn auto_terms(s: &SlitVector) -> usize {
    let mut ratio: f64 = 1.0;
    for j in 0..s.len() {
        let l = s.half_length(j);
        ratio = ratio.max(l / s.y()[j]);
        for k in 0..s.len() {
            if k != j {
                ratio = ratio.max(l / s.slit_distance(j, k));
            }
        }
    }
    ((12.0 + 8.0 * ratio).ceil() as usize).min(512)
}

/// Solved correction for a fixed slit configuration and boundary point.
#[derive(Clone, Debug)]
pub struct SlitKernel {
    slits: SlitVector,
    xi: f64,
    centers: Vec<Complex64>,
    halves: Vec<f64>,
    /// `a[k][n-1]`
    coeffs: Vec<Vec<f64>>,
    consts: Vec<f64>,
}

impl SlitKernel {
    /// Solves with an automatic mode count.
    pub fn solve(slits: &SlitVector, xi: f64) -> Result<Self> {
        Self::solve_with_terms(slits, xi, auto_terms(slits))
    }

    pub fn solve_with_terms(slits: &SlitVector, xi: f64, m: usize) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::NonFinite("boundary point"));
        }
        let n = slits.len();
        let centers: Vec<Complex64> = (0..n).map(|k| slits.center(k)).collect();
        let halves: Vec<f64> = (0..n).map(|k| slits.half_length(k)).collect();
        if n == 0 {
            return Ok(SlitKernel { slits: slits.clone(), xi, centers, halves, coeffs: vec![], consts: vec![] });
        }
        let m = m.max(1);
        let dim = n * (m + 1);
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        let nodes: Vec<f64> = (0..=m).map(|i| (PI * (i as f64 + 0.5) / (m + 1) as f64).cos()).collect();
        let mut wp = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            for (i, &x) in nodes.iter().enumerate() {
                let row = j * (m + 1) + i;
                let z = centers[j] + halves[j] * x;
                rhs[row] = -(z.im / PI) / ((z.re - xi).powi(2) + z.im * z.im);
                // slit constant enters with -1
                a[(row, n * m + j)] = -1.0;
                for k in 0..n {
                    let zp = (z - centers[k].conj()) / halves[k];
                    powers(joukowski_inverse(zp), &mut wp);
                    for p in 0..m {
                        let nn = (p + 1) as f64;
                        a[(row, k * m + p)] -= 0.5 * wp[p].re / nn;
                    }
                    if k == j {
                        let (mut t0, mut t1) = (1.0, x);
                        for p in 0..m {
                            let nn = (p + 1) as f64;
                            a[(row, k * m + p)] += 0.5 * t1 / nn;
                            let t2 = 2.0 * x * t1 - t0;
                            t0 = t1;
                            t1 = t2;
                        }
                    } else {
                        let zk = (z - centers[k]) / halves[k];
                        powers(joukowski_inverse(zk), &mut wp);
                        for p in 0..m {
                            let nn = (p + 1) as f64;
                            a[(row, k * m + p)] += 0.5 * wp[p].re / nn;
                        }
                    }
                }
            }
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NoConvergence("singular collocation system".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel coefficients"));
        }
        let coeffs = (0..n).map(|k| sol.rows(k * m, m).iter().copied().collect()).collect();
        let consts = (0..n).map(|j| sol[n * m + j]).collect();
        Ok(SlitKernel { slits: slits.clone(), xi, centers, halves, coeffs, consts })
    }

    pub fn slits(&self) -> &SlitVector {
        &self.slits
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn terms(&self) -> usize {
        self.coeffs.first().map_or(0, |c| c.len())
    }

    /// The correction `h(z) = Psi_s(z, xi) - Psi^H(z, xi)`.
    pub fn correction(&self, z: Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..self.centers.len() {
            let l = self.halves[k];
            let w1 = joukowski_inverse((z - self.centers[k].conj()) / l);
            let w0 = joukowski_inverse((z - self.centers[k]) / l);
            let (mut p1, mut p0) = (w1, w0);
            for (p, &a) in self.coeffs[k].iter().enumerate() {
                s += (a / (p + 1) as f64) * (p1 - p0);
                p1 *= w1;
                p0 *= w0;
            }
        }
        Complex64::new(0.0, -0.5) * s
    }

    /// `Psi_s(z, xi)` for `z` in the slit domain.
    pub fn psi(&self, z: ComplexPoint) -> Result<ComplexPoint> {
        check_point(z, "psi")?;
        Ok(complex_poisson_h(z, self.xi)? + self.correction(z))
    }

    /// Constant value of `Im Psi_s` on slit `j`.
    pub fn slit_value(&self, j: usize) -> f64 {
        self.consts[j]
    }

    /// Correction at an endpoint of slit `j`, using the exact values
    /// `W(-1) = -1`, `W(1) = 1` for the slit's own term.
    fn correction_at_endpoint(&self, j: usize, right: bool) -> Complex64 {
        let z = if right { self.slits.right(j) } else { self.slits.left(j) };
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..self.centers.len() {
            let l = self.halves[k];
            let w1 = joukowski_inverse((z - self.centers[k].conj()) / l);
            let w0 = if k == j {
                Complex64::new(if right { 1.0 } else { -1.0 }, 0.0)
            } else {
                joukowski_inverse((z - self.centers[k]) / l)
            };
            let (mut p1, mut p0) = (w1, w0);
            for (p, &a) in self.coeffs[k].iter().enumerate() {
                s += (a / (p + 1) as f64) * (p1 - p0);
                p1 *= w1;
                p0 *= w0;
            }
        }
        let h = Complex64::new(0.0, -0.5) * s;
        // the real part is continuous at the tip; the imaginary part is the slit constant
        Complex64::new(h.re, self.consts[j] - poisson_im(z, self.xi))
    }

    /// `(Psi_s(z_j, xi), Psi_s(z'_j, xi))` at the left and right endpoints.
    pub fn endpoint_values(&self, j: usize) -> (Complex64, Complex64) {
        let l = self.slits.left(j);
        let r = self.slits.right(j);
        let ph = |z: Complex64| -1.0 / (PI * (z - self.xi));
        (ph(l) + self.correction_at_endpoint(j, false), ph(r) + self.correction_at_endpoint(j, true))
    }

    /// `2 pi h(xi)`: the regularized kernel at its own pole.
    pub fn regular_part_at_pole(&self) -> f64 {
        2.0 * PI * self.correction(Complex64::new(self.xi, 0.0)).re
    }
}

fn poisson_im(z: Complex64, xi: f64) -> f64 {
    (z.im / PI) / ((z.re - xi).powi(2) + z.im * z.im)
}

fn powers(w: Complex64, out: &mut [Complex64]) {
    let mut p = w;
    for o in out.iter_mut() {
        *o = p;
        p *= w;
    }
}

/// `Psi_s(z, xi)` for a single query.
pub fn bmd_complex_poisson(s: &SlitVector, z: ComplexPoint, xi: f64) -> Result<ComplexPoint> {
    if s.is_empty() {
        return complex_poisson_h(z, xi);
    }
    let (d, _) = s.distance(z);
    if d == 0.0 {
        return Err(Error::Domain(format!("{z} lies on a slit")));
    }
    SlitKernel::solve(s, xi)?.psi(z)
}

/// Drift coefficients `b_j(s)` and the domain constant at `xi = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct Drift {
    /// `3N` values in the order heights, left endpoints, right endpoints.
    pub b: Vec<f64>,
    pub b_bmd: f64,
    pub error: f64,
}

pub(crate) fn drift_from_kernel(k: &SlitKernel) -> (Vec<f64>, f64) {
    let n = k.slits.len();
    let mut b = vec![0.0; 3 * n];
    for j in 0..n {
        let (l, r) = k.endpoint_values(j);
        b[j] = -2.0 * PI * k.slit_value(j);
        b[n + j] = -2.0 * PI * l.re;
        b[2 * n + j] = -2.0 * PI * r.re;
    }
    (b, k.regular_part_at_pole())
}

/// Drift of the slit SDE and `b_BMD`, both evaluated at `xi = 0`, with an
/// error estimate from a second solve at doubled resolution.
pub fn drift(s: &SlitVector) -> Result<Drift> {
    if s.is_empty() {
        return Ok(Drift { b: vec![], b_bmd: 0.0, error: 0.0 });
    }
    let m = auto_terms(s);
    let (b1, c1) = drift_from_kernel(&SlitKernel::solve_with_terms(s, 0.0, m)?);
    let (b2, c2) = drift_from_kernel(&SlitKernel::solve_with_terms(s, 0.0, 2 * m)?);
    let mut err = (c1 - c2).abs();
    for (x, y) in b1.iter().zip(&b2) {
        err = err.max((x - y).abs());
    }
    Ok(Drift { b: b2, b_bmd: c2, error: err })
}

/// `(b_j(s))_{j < 3N}` evaluated at `xi = 0`.
pub fn drift_b_j(s: &SlitVector) -> Result<Vec<f64>> {
    let k = SlitKernel::solve(s, 0.0)?;
    Ok(drift_from_kernel(&k).0)
}

/// Domain constant `2 pi lim_{z -> 0} (Psi_s(z, 0) + 1/(pi z))`.
pub fn b_bmd(s: &SlitVector) -> Result<EstimateCI> {
    if s.is_empty() {
        return Ok(EstimateCI::exact(0.0));
    }
    let d = drift(s)?;
    Ok(EstimateCI { value: d.b_bmd, std_error: d.error, n_samples: 1, bias_bound: 0.0 })
}

/// Component `j` of the drift as a degree -1 coefficient function.
pub fn drift_component(j: usize) -> CoefficientFunction {
    CoefficientFunction::new(Homogeneity::MinusOne, move |s: &SlitVector| {
        drift_b_j(s)?
            .get(j)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("drift index {j} out of range")))
    })
}

/// Tag carried by [`neg_b_bmd`].
pub const NEG_BMD_TAG: &str = "neg-bmd";

/// `-b_BMD` as a coefficient function.
pub fn neg_b_bmd() -> CoefficientFunction {
    CoefficientFunction::new(Homogeneity::MinusOne, |s: &SlitVector| {
        if s.is_empty() {
            return Ok(0.0);
        }
        Ok(-SlitKernel::solve(s, 0.0)?.regular_part_at_pole())
    })
    .with_tag(NEG_BMD_TAG)
}

/// Monte Carlo system behind the darned-slit values of `Im g`.
#[derive(Clone, Debug, Serialize)]
pub struct NeumannSystem {
    pub r_star: Vec<EstimateCI>,
    pub q_star: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    /// `int (f(z) - f(Z_sigma)) dnu_j` with the slits absorbing.
    pub boundary_integrals: Vec<EstimateCI>,
    /// Smallest escaping mass over the slits.
    pub delta0: f64,
    /// `v*(c_j*)`
    pub v_star: Vec<EstimateCI>,
    pub tail_bound: f64,
}

impl NeumannSystem {
    /// Largest row sum of `M` against `1/delta0`.
    pub fn bound_holds(&self) -> bool {
        self.m.iter().all(|row| row.iter().sum::<f64>() <= 1.0 / self.delta0 + 1e-9)
    }
}

/// Per-sample outcome of a walker launched from the contour measure.
struct ContourSample {
    v: f64,
    back: bool,
    to_slit: Vec<bool>,
    floor: bool,
}

/// Monte Carlo estimate of `R*`, `Q*`, `M` and the darned slit values of the
/// BMD-harmonic function that equals `f` on the real axis and on the hull,
/// where `f` is harmonic off the real axis and vanishes on it away from a
/// null set. With `f = Im` this is `v*(c_j*)` for `v = Im g`; with the half-plane
/// Poisson kernel it gives the slit values of `Im Psi_s`.
#[allow(clippy::too_many_arguments)]
pub fn neumann_series(
    s: &SlitVector,
    hull: &[HullShape],
    contours: &[Rect],
    f: &(dyn Fn(ComplexPoint) -> f64 + Sync),
    n: usize,
    law: ExcursionLaw,
    params: &McParams,
    stream: RngStream,
) -> Result<NeumannSystem> {
    let nsl = s.len();
    if contours.len() != nsl {
        return Err(Error::InvalidParameter("one contour per slit required".into()));
    }
    if nsl == 0 {
        return Ok(NeumannSystem {
            r_star: vec![],
            q_star: vec![],
            m: vec![],
            boundary_integrals: vec![],
            delta0: 1.0,
            v_star: vec![],
            tail_bound: 0.0,
        });
    }
    let obstacles = ObstacleSet::new(Some(s.clone()), hull.to_vec());
    let walker = Walker::new(&obstacles, params, obstacles.rad());
    let mut r_star = Vec::new();
    let mut q_raw = vec![vec![0.0; nsl]; nsl];
    let mut integrals = Vec::new();
    let mut escape = Vec::new();
    let mut ratio = Vec::new();
    for i in 0..nsl {
        let eta = harmonic_measure_eta(i, s, hull, contours[i], n, law, params, stream.substream(2 * i as u64))?;
        let sub = stream.substream(2 * i as u64 + 1);
        let batch = params.batch.max(1);
        let outcomes: Vec<ContourSample> = eta
            .samples
            .par_chunks(batch)
            .enumerate()
            .map(|(b, chunk)| {
                let mut rng = sub.substream(b as u64).rng();
                chunk
                    .iter()
                    .map(|z| {
                        let h = walker.walk(*z, &mut rng);
                        let mut to_slit = vec![false; nsl];
                        let (exit, floor) = match h.kind {
                            HitKind::Slit(j) => {
                                to_slit[j] = true;
                                (f(h.location), false)
                            }
                            HitKind::Hull => (f(h.location), false),
                            HitKind::Floor | HitKind::Escaped => (0.0, true),
                        };
                        ContourSample { v: f(*z) - exit, back: to_slit[i], to_slit, floor }
                    })
                    .collect::<Vec<_>>()
            })
            .flatten()
            .collect();
        let m_total = outcomes.len() as f64;
        let mut mv = Moments::default();
        let mut mr = Moments::default();
        let mut esc = 0.0;
        // joint moments for the ratio v / (1 - R)
        let (mut sxy, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for o in &outcomes {
            mv.push(o.v);
            let y = if o.back { 0.0 } else { 1.0 };
            mr.push(1.0 - y);
            for j in 0..nsl {
                if j != i && o.to_slit[j] {
                    q_raw[i][j] += 1.0 / m_total;
                }
            }
            if o.floor {
                esc += 1.0 / m_total;
            }
            sx += o.v;
            sy += y;
            sxx += o.v * o.v;
            syy += y * y;
            sxy += o.v * y;
        }
        let (mx, my) = (sx / m_total, sy / m_total);
        let vx = sxx / m_total - mx * mx;
        let vy = syy / m_total - my * my;
        let cxy = sxy / m_total - mx * my;
        let rt = mx / my;
        let var_ratio = (vx - 2.0 * rt * cxy + rt * rt * vy) / (my * my * m_total);
        ratio.push((rt, var_ratio.max(0.0).sqrt()));
        r_star.push(EstimateCI {
            value: mr.mean(),
            std_error: mr.std_error(),
            n_samples: outcomes.len(),
            bias_bound: 0.0,
        });
        integrals.push(EstimateCI {
            value: mv.mean(),
            std_error: mv.std_error(),
            n_samples: outcomes.len(),
            bias_bound: walker.shell(),
        });
        escape.push(esc);
    }
    let mut q = vec![vec![0.0; nsl]; nsl];
    for i in 0..nsl {
        let denom = 1.0 - r_star[i].value;
        let mut row = 0.0;
        for j in 0..nsl {
            if i != j {
                q[i][j] = q_raw[i][j] / denom;
                row += q[i][j];
            }
        }
        if row >= 1.0 {
            return Err(Error::Degenerate(format!("row sum {row} of Q* is not below 1 for slit {i}")));
        }
    }
    let delta0 = escape.iter().copied().fold(f64::INFINITY, f64::min);
    if !(delta0 > 0.0) {
        return Err(Error::Degenerate("no walker reached the real axis".into()));
    }
    let (m, terms, last) = neumann_sum(&q, 1e-12)?;
    let xmax = ratio.iter().fold(0.0f64, |a, r| a.max(r.0.abs()));
    let tail_bound = xmax * (1.0 - delta0).powi(terms as i32 + 1).min(last) / delta0;
    let mut v_star = Vec::with_capacity(nsl);
    for i in 0..nsl {
        let mut v = 0.0;
        let mut var = 0.0;
        for j in 0..nsl {
            v += m[i][j] * ratio[j].0;
            var += (m[i][j] * ratio[j].1).powi(2);
        }
        v_star.push(EstimateCI { value: v, std_error: var.sqrt(), n_samples: n, bias_bound: tail_bound });
    }
    Ok(NeumannSystem { r_star, q_star: q, m, boundary_integrals: integrals, delta0, v_star, tail_bound })
}

/// `sum_{n>=0} Q^n` to additive tolerance `tol`; returns the sum, the number
/// of terms and the largest entry of the first omitted power.
pub fn neumann_sum(q: &[Vec<f64>], tol: f64) -> Result<(Vec<Vec<f64>>, usize, f64)> {
    let n = q.len();
    let mut m = vec![vec![0.0; n]; n];
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        p[i][i] = 1.0;
    }
    for it in 1..100_000 {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                if p[i][k] != 0.0 {
                    for j in 0..n {
                        next[i][j] += p[i][k] * q[k][j];
                    }
                }
            }
        }
        let mx = next.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..n {
            for j in 0..n {
                m[i][j] += next[i][j];
            }
        }
        p = next;
        if mx < tol {
            let omitted = next_power(&p, q);
            return Ok((m, it, omitted));
        }
    }
    Err(Error::NoConvergence("Neumann series".into()))
}

/// Default contour margin around slit `j`: half the clearance to the real
/// axis, the other slits and the hull.
pub fn default_contour(s: &SlitVector, hull: &[HullShape], j: usize) -> Rect {
    let mut m = 0.5 * s.y()[j];
    for k in 0..s.len() {
        if k != j {
            m = m.min(0.5 * s.slit_distance(j, k));
        }
    }
    for h in hull {
        let (x0, x1, y0, y1) = h.bbox();
        let dx = (x0 - s.xr()[j]).max(s.x()[j] - x1).max(0.0);
        let dy = (y0 - s.y()[j]).max(s.y()[j] - y1).max(0.0);
        m = m.min(0.5 * dx.max(dy));
    }
    Rect::around(s, j, m.min(s.half_length(j)))
}

/// Darned slit values `v*(c_j*)` of `Im g` by the Monte Carlo Neumann system.
pub fn v_star_mc(
    s: &SlitVector,
    hull: &[HullShape],
    n: usize,
    law: ExcursionLaw,
    params: &McParams,
    stream: RngStream,
) -> Result<NeumannSystem> {
    let contours: Vec<Rect> = (0..s.len()).map(|j| default_contour(s, hull, j)).collect();
    neumann_series(s, hull, &contours, &|z: ComplexPoint| z.im, n, law, params, stream)
}

fn next_power(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    let n = q.len();
    let mut mx: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|k| p[i][k] * q[k][j]).sum();
            mx = mx.max(v.abs() * n as f64);
        }
    }
    mx
}

/// Backend for darned-slit values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Grid,
    Mc,
    Both,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn joukowski_branch() {
        for z in [c(0.3, 0.2), c(-2.0, 0.1), c(5.0, -3.0), c(0.0, 1e-9)] {
            let w = joukowski_inverse(z);
            assert!(w.norm() <= 1.0 + 1e-12);
            assert!(((w + 1.0 / w) * 0.5 - z).norm() < 1e-9 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn empty_domain_is_half_plane() {
        let s = SlitVector::empty();
        let z = c(0.4, 0.7);
        assert_eq!(bmd_complex_poisson(&s, z, 0.1).unwrap(), complex_poisson_h(z, 0.1).unwrap());
        assert_eq!(b_bmd(&s).unwrap().value, 0.0);
    }

    #[test]
    fn slit_condition_holds_off_collocation() {
        let s = SlitVector::new(vec![1.0, 0.6], vec![-1.0, 1.5], vec![0.5, 2.5]).unwrap();
        let k = SlitKernel::solve(&s, 0.3).unwrap();
        for j in 0..2 {
            for t in [-0.97, -0.4, 0.11, 0.83] {
                let x = s.center(j).re + t * s.half_length(j);
                let z = c(x, s.y()[j] + 1e-9);
                let v = k.psi(z).unwrap().im;
                assert!((v - k.slit_value(j)).abs() < 1e-6, "slit {j} t {t}: {v} vs {}", k.slit_value(j));
            }
        }
    }

    #[test]
    fn real_on_axis_and_positive_inside() {
        let s = SlitVector::single(1.0, -0.5, 0.5).unwrap();
        let k = SlitKernel::solve(&s, 0.0).unwrap();
        for x in [-3.0, -0.2, 0.7, 4.0] {
            assert!(k.correction(c(x, 0.0)).im.abs() < 1e-12);
        }
        for z in [c(0.0, 0.5), c(0.0, 2.0), c(2.0, 1.0), c(-1.0, 0.1)] {
            assert!(k.psi(z).unwrap().im > 0.0);
        }
    }

    #[test]
    fn symmetric_slit_endpoints_antisymmetric() {
        let s = SlitVector::single(1.0, -0.5, 0.5).unwrap();
        let b = drift_b_j(&s).unwrap();
        assert!(b[0] < 0.0);
        assert!((b[1] + b[2]).abs() < 1e-10, "{b:?}");
    }

    #[test]
    fn homogeneity_of_drift() {
        let s = SlitVector::new(vec![1.0, 0.5], vec![-1.0, 0.7], vec![-0.2, 1.9]).unwrap();
        let a = drift(&s).unwrap();
        let b = drift(&s.scale(2.0).unwrap()).unwrap();
        for (x, y) in a.b.iter().zip(&b.b) {
            assert!((x / 2.0 - y).abs() < 1e-9);
        }
        assert!((a.b_bmd / 2.0 - b.b_bmd).abs() < 1e-9);
    }

    #[test]
    fn far_slit_limit() {
        let mut prev = f64::INFINITY;
        for r in [10.0, 20.0, 40.0] {
            let s = SlitVector::single(1.0, r - 0.5, r + 0.5).unwrap();
            let v = b_bmd(&s).unwrap().value.abs();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn neumann_sum_geometric() {
        let q = vec![vec![0.0, 0.5], vec![0.25, 0.0]];
        let (m, _, _) = neumann_sum(&q, 1e-14).unwrap();
        // (I - Q)^{-1}
        let det = 1.0 - 0.125;
        assert!((m[0][0] - 1.0 / det).abs() < 1e-12);
        assert!((m[0][1] - 0.5 / det).abs() < 1e-12);
    }
}
