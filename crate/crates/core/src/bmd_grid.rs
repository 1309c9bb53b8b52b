//! Finite-volume solver for BMD-harmonic functions on a graded tensor grid.
//!
//! Each slit is a floating conductor: its nodes carry `c_j + d(p)` with one
//! unknown constant `c_j` per slit, and the conductor's row of the system is
//! the discrete zero-flux condition. The resulting symmetric positive
//! definite system is solved by Jacobi-preconditioned conjugate gradients.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use serde::Serialize;

use crate::abm_mc::{EstimateCI, HullShape};
use crate::error::{Error, Result};
use crate::geometry::{segment_distance, ComplexPoint, SlitVector};

/// Where a boundary value is requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Floor,
    Outer,
    Hull,
    /// Data added to the unknown constant of slit `j`.
    Slit(usize),
}

/// Grid resolution and truncation.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct GridConfig {
    /// Spacing of the uniform inner region.
    pub h: f64,
    /// Truncation box half-width as a multiple of the feature extent.
    pub box_scale: f64,
    /// Geometric growth of the spacing outside the inner region.
    pub growth: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { h: 0.02, box_scale: 200.0, growth: 1.08, tol: 1e-12, max_iter: 200_000 }
    }
}

/// Solution of a BMD-harmonic problem on the lattice.
#[derive(Clone, Debug, Serialize)]
pub struct KernelField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major values, `values[k * xs.len() + i]` at `(xs[i], ys[k])`.
    pub values: Vec<f64>,
    pub slit_values: Vec<f64>,
    /// Net flux around each slit relative to the total absolute flux.
    pub flux: Vec<f64>,
    pub iterations: usize,
}

impl KernelField {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.xs.len() + i]
    }

    /// Bilinear interpolation; points outside the box read as zero.
    pub fn value(&self, z: ComplexPoint) -> f64 {
        let (nx, ny) = (self.xs.len(), self.ys.len());
        if z.re < self.xs[0] || z.re > self.xs[nx - 1] || z.im < 0.0 || z.im > self.ys[ny - 1] {
            return 0.0;
        }
        let i = self.xs.partition_point(|&x| x <= z.re).clamp(1, nx - 1) - 1;
        let k = self.ys.partition_point(|&y| y <= z.im).clamp(1, ny - 1) - 1;
        let tx = (z.re - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let ty = (z.im - self.ys[k]) / (self.ys[k + 1] - self.ys[k]);
        (1.0 - tx) * (1.0 - ty) * self.at(i, k)
            + tx * (1.0 - ty) * self.at(i + 1, k)
            + (1.0 - tx) * ty * self.at(i, k + 1)
            + tx * ty * self.at(i + 1, k + 1)
    }

    pub fn max_flux(&self) -> f64 {
        self.flux.iter().fold(0.0, |a: f64, b| a.max(b.abs()))
    }
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Fixed(f64),
    Slit(usize, f64),
    Free(usize),
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn axis(lo_box: f64, lo: f64, hi: f64, hi_box: f64, h: f64, growth: f64, keys: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::new();
    let n = ((hi - lo) / h).round().max(1.0) as usize;
    for k in 0..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        if keys.iter().all(|&c| (x - c).abs() > 0.3 * h || near(x, c)) {
            v.push(x);
        }
    }
    v.extend(keys.iter().copied().filter(|&c| c > lo && c < hi));
    let mut step = h;
    let mut x = hi;
    while x < hi_box {
        step *= growth;
        x = (x + step).min(hi_box);
        if hi_box - x < 0.5 * step {
            x = hi_box;
        }
        v.push(x);
    }
    let mut step = h;
    let mut x = lo;
    while x > lo_box {
        step *= growth;
        x = (x - step).max(lo_box);
        if x - lo_box < 0.5 * step {
            x = lo_box;
        }
        v.push(x);
    }
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| near(*a, *b));
    v
}

fn is_vertical(a: ComplexPoint, b: ComplexPoint) -> bool {
    near(a.re, b.re)
}

/// Lattice adapted to slits, hull pieces and extra points of interest.
fn lattice(s: &SlitVector, hull: &[HullShape], extra: &[ComplexPoint], cfg: &GridConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(cfg.h > 0.0 && cfg.box_scale > 1.0 && cfg.growth >= 1.0) {
        return Err(Error::InvalidParameter("grid spacing, box scale or growth".into()));
    }
    let mut kx: Vec<f64> = Vec::new();
    let mut ky: Vec<f64> = Vec::new();
    for j in 0..s.len() {
        kx.extend([s.x()[j], s.xr()[j]]);
        ky.push(s.y()[j]);
    }
    for shape in hull {
        match shape {
            HullShape::Segment { a, b } => {
                kx.extend([a.re, b.re]);
                ky.extend([a.im, b.im]);
            }
            HullShape::HalfDisk { center, radius } => {
                kx.extend([center - radius, center + radius]);
                ky.push(*radius);
            }
            HullShape::Polyline(p) => {
                kx.extend(p.iter().map(|z| z.re));
                ky.extend(p.iter().map(|z| z.im));
            }
        }
    }
    for z in extra {
        kx.push(z.re);
        ky.push(z.im);
    }
    ky.retain(|&y| y > 0.0);
    let (mut x0, mut x1) = kx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        x0 = -1.0;
        x1 = 1.0;
    }
    let y1 = ky.iter().copied().fold(1.0f64, f64::max);
    let size = (x1 - x0).max(y1).max(1.0);
    let pad = 0.5 * size;
    let center = 0.5 * (x0 + x1);
    let half_box = cfg.box_scale * (size + center.abs());
    let xs = axis(center - half_box, x0 - pad, x1 + pad, center + half_box, cfg.h, cfg.growth, &kx);
    let ys = axis(0.0, 0.0, y1 + pad, half_box, cfg.h, cfg.growth, &ky);
    Ok((xs, ys))
}

/// Solves `Delta u = 0` off the slits and hull with `u = data` on the floor,
/// hull and outer box, `u = c_j + data` on slit `j`, and zero flux around
/// every slit.
pub fn solve_bmd_harmonic(
    s: &SlitVector,
    hull: &[HullShape],
    extra: &[ComplexPoint],
    data: &(dyn Fn(ComplexPoint, BoundaryKind) -> f64 + Sync),
    cfg: &GridConfig,
) -> Result<KernelField> {
    let (xs, ys) = lattice(s, hull, extra, cfg)?;
    let (nx, ny) = (xs.len(), ys.len());
    let n = s.len();
    let mut nodes = Vec::with_capacity(nx * ny);
    let mut nfree = 0usize;
    for k in 0..ny {
        for i in 0..nx {
            let z = Complex64::new(xs[i], ys[k]);
            let loc = 0.5 * (xs[(i + 1).min(nx - 1)] - xs[i.saturating_sub(1)]).max(ys[(k + 1).min(ny - 1)] - ys[k.saturating_sub(1)]);
            let node = if k == 0 {
                Node::Fixed(data(z, BoundaryKind::Floor))
            } else if i == 0 || i == nx - 1 || k == ny - 1 {
                Node::Fixed(data(z, BoundaryKind::Outer))
            } else if let Some(j) = (0..n).find(|&j| near(ys[k], s.y()[j]) && xs[i] >= s.x()[j] - 1e-12 && xs[i] <= s.xr()[j] + 1e-12) {
                Node::Slit(j, data(z, BoundaryKind::Slit(j)))
            } else if hull.iter().any(|h| in_hull(h, z, loc)) {
                Node::Fixed(data(z, BoundaryKind::Hull))
            } else {
                nfree += 1;
                Node::Free(nfree - 1)
            };
            nodes.push(node);
        }
    }
    for j in 0..n {
        if !nodes.iter().any(|nd| matches!(nd, Node::Slit(m, _) if *m == j)) {
            return Err(Error::InvalidGeometry(format!("slit {j} has no lattice nodes")));
        }
    }
    let dim = nfree + n;
    let var = |nd: Node| match nd {
        Node::Free(p) => Some(p),
        Node::Slit(j, _) => Some(nfree + j),
        Node::Fixed(_) => None,
    };
    let known = |nd: Node| match nd {
        Node::Free(_) => 0.0,
        Node::Slit(_, d) => d,
        Node::Fixed(v) => v,
    };
    let dual = |v: &[f64], i: usize| 0.5 * (v[(i + 1).min(v.len() - 1)] - v[i.saturating_sub(1)]);
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * nx * ny);
    for k in 0..ny {
        for i in 0..nx {
            let p = k * nx + i;
            if i + 1 < nx {
                edges.push((p, p + 1, dual(&ys, k) / (xs[i + 1] - xs[i])));
            }
            if k + 1 < ny {
                edges.push((p, p + nx, dual(&xs, i) / (ys[k + 1] - ys[k])));
            }
        }
    }
    let mut coo = CooMatrix::new(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for &(p, q, c) in &edges {
        let (np, nq) = (nodes[p], nodes[q]);
        if let (Node::Slit(a, _), Node::Slit(b, _)) = (np, nq) {
            if a == b {
                continue;
            }
        }
        let (vp, vq) = (var(np), var(nq));
        let (kp, kq) = (known(np), known(nq));
        if let Some(a) = vp {
            coo.push(a, a, c);
            rhs[a] += c * (kq - kp);
        }
        if let Some(b) = vq {
            coo.push(b, b, c);
            rhs[b] += c * (kp - kq);
        }
        if let (Some(a), Some(b)) = (vp, vq) {
            coo.push(a, b, -c);
            coo.push(b, a, -c);
        }
    }
    let a = CsrMatrix::from(&coo);
    let (x, iterations) = pcg(&a, &rhs, cfg.tol, cfg.max_iter)?;
    let values: Vec<f64> = nodes
        .iter()
        .map(|&nd| match nd {
            Node::Free(p) => x[p],
            Node::Slit(j, d) => x[nfree + j] + d,
            Node::Fixed(v) => v,
        })
        .collect();
    let mut net = vec![0.0; n];
    let mut abs = vec![0.0; n];
    for &(p, q, c) in &edges {
        let f = c * (values[p] - values[q]);
        match (nodes[p], nodes[q]) {
            (Node::Slit(a, _), Node::Slit(b, _)) if a == b => {}
            (Node::Slit(a, _), Node::Slit(b, _)) => {
                net[a] += f;
                abs[a] += f.abs();
                net[b] -= f;
                abs[b] += f.abs();
            }
            (Node::Slit(a, _), _) => {
                net[a] += f;
                abs[a] += f.abs();
            }
            (_, Node::Slit(b, _)) => {
                net[b] -= f;
                abs[b] += f.abs();
            }
            _ => {}
        }
    }
    let flux = net.iter().zip(&abs).map(|(f, a)| if *a > 0.0 { f / a } else { 0.0 }).collect();
    let slit_values = (0..n).map(|j| x[nfree + j]).collect();
    Ok(KernelField { xs, ys, values, slit_values, flux, iterations })
}

fn in_hull(h: &HullShape, z: ComplexPoint, loc: f64) -> bool {
    match h {
        HullShape::Segment { a, b } if is_vertical(*a, *b) => {
            near(z.re, a.re) && z.im <= a.im.max(b.im) + 1e-12 && z.im >= a.im.min(b.im) - 1e-12
        }
        HullShape::Segment { a, b } => segment_distance(z, *a, *b).0 < 0.5 * loc,
        HullShape::HalfDisk { center, radius } => (z - center).norm() <= radius + 1e-12,
        HullShape::Polyline(p) => p.windows(2).any(|w| segment_distance(z, w[0], w[1]).0 < 0.5 * loc),
    }
}

fn pcg(a: &CsrMatrix<f64>, b: &DVector<f64>, tol: f64, max_iter: usize) -> Result<(DVector<f64>, usize)> {
    let n = b.len();
    let mut diag = DVector::<f64>::from_element(n, 1.0);
    for (i, row) in a.row_iter().enumerate() {
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            if i == j {
                diag[i] = v;
            }
        }
    }
    let bn = b.norm();
    let mut x = DVector::<f64>::zeros(n);
    if bn == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.clone();
    let mut z = r.component_div(&diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 0..max_iter {
        let ap = a * &p;
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= tol * bn {
            return Ok((x, it + 1));
        }
        z = r.component_div(&diag);
        let rz2 = r.dot(&z);
        p = &z + (rz2 / rz) * &p;
        rz = rz2;
    }
    Err(Error::NoConvergence(format!("conjugate gradients after {max_iter} iterations")))
}

/// Second-order extrapolation of values computed at spacings `h, h/2, h/4`,
/// with the observed order clamped to `[0.5, 4]`.
pub fn richardson(f: [f64; 3]) -> EstimateCI {
    let d1 = f[0] - f[1];
    let d2 = f[1] - f[2];
    if d2 == 0.0 {
        return EstimateCI { value: f[2], std_error: 0.0, n_samples: 3, bias_bound: 0.0 };
    }
    let r = d1 / d2;
    if r <= 1.0 {
        return EstimateCI { value: f[2], std_error: d2.abs(), n_samples: 3, bias_bound: d2.abs() };
    }
    let p = r.log2().clamp(0.5, 4.0);
    let corr = d2 / (2f64.powf(p) - 1.0);
    let err = corr.abs().max(d2.abs());
    EstimateCI { value: f[2] - corr, std_error: err, n_samples: 3, bias_bound: err }
}

/// Slit values `v*(c_j*)` of the BMD extension of `Im g` for the hull pieces.
pub fn v_star_grid(s: &SlitVector, hull: &[HullShape], cfg: &GridConfig) -> Result<KernelField> {
    let data = |z: ComplexPoint, kind: BoundaryKind| match kind {
        BoundaryKind::Outer => z.im,
        _ => 0.0,
    };
    solve_bmd_harmonic(s, hull, &[], &data, cfg)
}

/// [`v_star_grid`] at three resolutions, extrapolated.
pub fn v_star_grid_extrapolated(s: &SlitVector, hull: &[HullShape], cfg: &GridConfig) -> Result<(Vec<EstimateCI>, f64)> {
    let mut runs = Vec::new();
    for level in 0..3 {
        let c = GridConfig { h: cfg.h / f64::powi(2.0, level), ..cfg.clone() };
        runs.push(v_star_grid(s, hull, &c)?);
    }
    let flux = runs.iter().map(KernelField::max_flux).fold(0.0, f64::max);
    let est = (0..s.len()).map(|j| richardson([runs[0].slit_values[j], runs[1].slit_values[j], runs[2].slit_values[j]])).collect();
    Ok((est, flux))
}

/// Kernel quantities recovered from one grid solve.
#[derive(Clone, Debug, Serialize)]
pub struct GridKernel {
    pub xi: f64,
    /// `Im Psi_s` on each slit.
    pub slit_values: Vec<f64>,
    /// `Re Psi_s` at the left and right endpoints.
    pub endpoint_re: Vec<(f64, f64)>,
    /// `2 pi h(xi)`.
    pub regular_part: f64,
    pub max_flux: f64,
}

/// Solves for `Im h = Im Psi_s - Im Psi^H` and recovers the real part by
/// path integration of the conjugate gradient from the real axis.
pub fn kernel_grid(s: &SlitVector, xi: f64, cfg: &GridConfig) -> Result<GridKernel> {
    let p = |z: ComplexPoint| (z.im / PI) / ((z.re - xi).powi(2) + z.im * z.im);
    let data = |z: ComplexPoint, kind: BoundaryKind| match kind {
        BoundaryKind::Slit(_) => -p(z),
        _ => 0.0,
    };
    let f = solve_bmd_harmonic(s, &[], &[Complex64::new(xi, 0.0)], &data, cfg)?;
    let nx = f.xs.len();
    // d psi / dy on the floor from a one-sided quadratic fit
    let dy: Vec<f64> = (0..nx)
        .map(|i| {
            let (h1, h2) = (f.ys[1], f.ys[2] - f.ys[1]);
            let (u1, u2) = (f.at(i, 1), f.at(i, 2));
            (u1 * (h1 + h2) * (h1 + h2) - u2 * h1 * h1) / (h1 * h2 * (h1 + h2))
        })
        .collect();
    let mut cum = vec![0.0; nx];
    for i in 1..nx {
        cum[i] = cum[i - 1] + 0.5 * (dy[i] + dy[i - 1]) * (f.xs[i] - f.xs[i - 1]);
    }
    let total = cum[nx - 1];
    let floor_re: Vec<f64> = cum.iter().map(|c| 0.5 * (c - (total - c))).collect();
    let ixi = f.xs.iter().position(|&x| near(x, xi)).ok_or(Error::Degenerate("xi is not a lattice node".into()))?;
    let regular_part = 2.0 * PI * floor_re[ixi];
    let mut endpoint_re = Vec::with_capacity(s.len());
    for j in 0..s.len() {
        let mut e = [0.0; 2];
        for (side, x) in [s.x()[j], s.xr()[j]].into_iter().enumerate() {
            let i = f.xs.iter().position(|&v| near(v, x)).ok_or(Error::Degenerate("endpoint off lattice".into()))?;
            let ktop = f.ys.iter().position(|&v| near(v, s.y()[j])).ok_or(Error::Degenerate("slit height off lattice".into()))?;
            let blocked = (0..s.len()).any(|m| m != j && s.y()[m] < s.y()[j] && x >= s.x()[m] && x <= s.xr()[m]);
            if blocked {
                return Err(Error::NotImplemented("endpoint path crossing another slit"));
            }
            let dx = |k: usize| (f.at(i + 1, k) - f.at(i - 1, k)) / (f.xs[i + 1] - f.xs[i - 1]);
            let mut phi = vec![floor_re[i]];
            for k in 1..ktop {
                let prev = phi[k - 1];
                phi.push(prev - 0.5 * (dx(k) + dx(k - 1)) * (f.ys[k] - f.ys[k - 1]));
            }
            let rows: Vec<(f64, f64)> = (1..ktop)
                .rev()
                .map(|k| (f.ys[ktop] - f.ys[k], phi[k]))
                .filter(|(r, _)| *r >= 1.5 * cfg.h)
                .take(8)
                .collect();
            if rows.len() < 3 {
                return Err(Error::Degenerate("too few nodes below an endpoint".into()));
            }
            let m = DMatrix::from_fn(rows.len(), 3, |r, c| match c {
                0 => 1.0,
                1 => rows[r].0.sqrt(),
                _ => rows[r].0,
            });
            let v = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            let sol = m.svd(true, true).solve(&v, 1e-14).map_err(|e| Error::NoConvergence(e.to_string()))?;
            let z = Complex64::new(x, s.y()[j]);
            e[side] = sol[0] + (-1.0 / (PI * (z - xi))).re;
        }
        endpoint_re.push((e[0], e[1]));
    }
    Ok(GridKernel { xi, slit_values: f.slit_values.clone(), endpoint_re, regular_part, max_flux: f.max_flux() })
}

/// Grid drift coefficients and `b_BMD` at `xi = 0`, extrapolated over three
/// resolutions; `(b, b_bmd, max_flux)`.
pub fn drift_grid(s: &SlitVector, cfg: &GridConfig) -> Result<(Vec<EstimateCI>, EstimateCI, f64)> {
    let n = s.len();
    let mut runs = Vec::new();
    for level in 0..3 {
        let c = GridConfig { h: cfg.h / f64::powi(2.0, level), ..cfg.clone() };
        runs.push(kernel_grid(s, 0.0, &c)?);
    }
    let pick = |f: &dyn Fn(&GridKernel) -> f64| richardson([f(&runs[0]), f(&runs[1]), f(&runs[2])]);
    let mut b = Vec::with_capacity(3 * n);
    for j in 0..n {
        b.push(scale(pick(&|g| g.slit_values[j]), -2.0 * PI));
    }
    for j in 0..n {
        b.push(scale(pick(&|g| g.endpoint_re[j].0), -2.0 * PI));
    }
    for j in 0..n {
        b.push(scale(pick(&|g| g.endpoint_re[j].1), -2.0 * PI));
    }
    let bb = pick(&|g| g.regular_part);
    let flux = runs.iter().map(|g| g.max_flux).fold(0.0, f64::max);
    Ok((b, bb, flux))
}

fn scale(e: EstimateCI, c: f64) -> EstimateCI {
    EstimateCI { value: c * e.value, std_error: c.abs() * e.std_error, n_samples: e.n_samples, bias_bound: c.abs() * e.bias_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_hull_gives_height() {
        let s = SlitVector::single(1.0, -0.5, 0.5).unwrap();
        let cfg = GridConfig { h: 0.05, box_scale: 50.0, ..GridConfig::default() };
        let f = v_star_grid(&s, &[], &cfg).unwrap();
        assert!((f.slit_values[0] - 1.0).abs() < 1e-9, "{}", f.slit_values[0]);
        assert!(f.max_flux() < 1e-8);
    }

    #[test]
    fn interpolation_reproduces_linear_data() {
        let s = SlitVector::empty();
        let cfg = GridConfig { h: 0.1, box_scale: 5.0, ..GridConfig::default() };
        let f = v_star_grid(&s, &[], &cfg).unwrap();
        for z in [Complex64::new(0.3, 0.7), Complex64::new(-1.2, 2.1)] {
            assert!((f.value(z) - z.im).abs() < 1e-8);
        }
    }

    #[test]
    fn richardson_second_order() {
        let f = |h: f64| 1.0 + 3.0 * h * h;
        let e = richardson([f(0.1), f(0.05), f(0.025)]);
        assert!((e.value - 1.0).abs() < 1e-12);
    }
}
