//! Monte Carlo for absorbing Brownian motion on the upper half-plane.
//!
//! Walkers use walk-on-spheres against the union of slits, hull pieces and
//! the real axis. Estimators fan out over fixed-size batches, each with its
//! own ChaCha stream, and reduce in batch order so results are reproducible.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_point, segment_distance, ComplexPoint, SlitVector};

/// Identifies an independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// A child stream; distinct `k` give distinct streams.
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: splitmix(self.stream_id ^ splitmix(k.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }
}

/// Monte Carlo estimate with standard error and a deterministic bias bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub value: f64,
    pub std_error: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
    pub bias_bound: f64,
}

impl EstimateCI {
    pub fn exact(value: f64) -> Self {
        EstimateCI { value, std_error: 0.0, n_samples: 1, bias_bound: 0.0 }
    }

    /// Whether `target` lies within `k` standard errors (plus the bias bound).
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error + self.bias_bound
    }
}

/// Walker parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McParams {
    /// Capture shell relative to the obstacle scale.
    pub shell: f64,
    /// Escape radius relative to the obstacle scale, unless `escape_radius` is set.
    pub escape_factor: f64,
    pub escape_radius: Option<f64>,
    pub max_steps: usize,
    pub batch: usize,
}

impl Default for McParams {
    fn default() -> Self {
        McParams { shell: 1e-6, escape_factor: 1e4, escape_radius: None, max_steps: 1_000_000, batch: 4096 }
    }
}

/// A piece of a hull used as an absorbing obstacle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HullShape {
    Segment { a: ComplexPoint, b: ComplexPoint },
    HalfDisk { center: f64, radius: f64 },
    /// Curve thickened by the capture shell.
    Polyline(Vec<ComplexPoint>),
}

impl HullShape {
    fn nearest(&self, z: ComplexPoint) -> (f64, ComplexPoint) {
        match self {
            HullShape::Segment { a, b } => segment_distance(z, *a, *b),
            HullShape::HalfDisk { center, radius } => {
                let d = z - *center;
                let r = d.norm();
                if r <= *radius {
                    (0.0, z)
                } else {
                    (r - radius, *center + d * (*radius / r))
                }
            }
            HullShape::Polyline(p) => {
                if p.len() == 1 {
                    return ((z - p[0]).norm(), p[0]);
                }
                let mut best = (f64::INFINITY, p[0]);
                for w in p.windows(2) {
                    let c = segment_distance(z, w[0], w[1]);
                    if c.0 < best.0 {
                        best = c;
                    }
                }
                best
            }
        }
    }

    pub fn rad(&self) -> f64 {
        match self {
            HullShape::Segment { a, b } => a.norm().max(b.norm()),
            HullShape::HalfDisk { center, radius } => center.abs() + radius,
            HullShape::Polyline(p) => p.iter().map(|q| q.norm()).fold(0.0, f64::max),
        }
    }

    /// Bounding box `(xmin, xmax, ymin, ymax)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            HullShape::Segment { a, b } => (a.re.min(b.re), a.re.max(b.re), a.im.min(b.im), a.im.max(b.im)),
            HullShape::HalfDisk { center, radius } => (center - radius, center + radius, 0.0, *radius),
            HullShape::Polyline(p) => p.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                |b, q| (b.0.min(q.re), b.1.max(q.re), b.2.min(q.im), b.3.max(q.im)),
            ),
        }
    }
}

/// What a walker hit first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitKind {
    Slit(usize),
    Hull,
    Floor,
    Escaped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    pub kind: HitKind,
    pub location: ComplexPoint,
    pub steps: usize,
}

/// Slits and hull pieces; the real axis is always absorbing.
#[derive(Clone, Debug, Default)]
pub struct ObstacleSet {
    pub slits: Option<SlitVector>,
    pub hull: Vec<HullShape>,
}

impl ObstacleSet {
    pub fn new(slits: Option<SlitVector>, hull: Vec<HullShape>) -> Self {
        ObstacleSet { slits: slits.filter(|s| !s.is_empty()), hull }
    }

    pub fn hull_only(hull: Vec<HullShape>) -> Self {
        ObstacleSet { slits: None, hull }
    }

    pub fn empty() -> Self {
        ObstacleSet::default()
    }

    pub fn rad(&self) -> f64 {
        let s = self.slits.as_ref().map_or(0.0, |s| s.extent());
        self.hull.iter().map(|h| h.rad()).fold(s, f64::max)
    }

    /// Nearest obstacle other than the floor: `(distance, kind, point, near_tip)`.
    fn nearest(&self, z: ComplexPoint) -> (f64, HitKind, ComplexPoint, bool) {
        let mut best = (f64::INFINITY, HitKind::Escaped, z, false);
        if let Some(s) = &self.slits {
            for j in 0..s.len() {
                let (a, b) = (s.left(j), s.right(j));
                let (d, p) = segment_distance(z, a, b);
                if d < best.0 {
                    best = (d, HitKind::Slit(j), p, p == a || p == b);
                }
            }
        }
        for h in &self.hull {
            let (d, p) = h.nearest(z);
            if d < best.0 {
                best = (d, HitKind::Hull, p, false);
            }
        }
        best
    }

    /// Membership at tolerance `tol` (the floor excluded).
    pub fn contains(&self, z: ComplexPoint, tol: f64) -> bool {
        self.nearest(z).0 <= tol
    }
}

/// Walk-on-spheres walker bound to an obstacle set.
#[derive(Clone, Debug)]
pub struct Walker<'a> {
    obstacles: &'a ObstacleSet,
    eps: f64,
    r_esc: f64,
    max_steps: usize,
}

impl<'a> Walker<'a> {
    /// `scale` sets the capture shell and the default escape radius.
    pub fn new(obstacles: &'a ObstacleSet, params: &McParams, scale: f64) -> Self {
        let scale = if scale > 0.0 { scale } else { 1.0 };
        Walker {
            obstacles,
            eps: params.shell * scale,
            r_esc: params.escape_radius.unwrap_or(params.escape_factor * scale),
            max_steps: params.max_steps,
        }
    }

    pub fn shell(&self) -> f64 {
        self.eps
    }

    pub fn escape_radius(&self) -> f64 {
        self.r_esc
    }

    pub fn walk<R: Rng + ?Sized>(&self, z0: ComplexPoint, rng: &mut R) -> HitRecord {
        let mut z = z0;
        let tip_zone = 10.0 * self.eps;
        for steps in 0..self.max_steps {
            let (d_obs, kind, p, near_tip) = self.obstacles.nearest(z);
            let d_floor = z.im;
            if d_floor <= d_obs {
                if d_floor < self.eps {
                    return HitRecord { kind: HitKind::Floor, location: ComplexPoint::new(z.re, 0.0), steps };
                }
            } else if d_obs < self.eps {
                return HitRecord { kind, location: p, steps };
            }
            if z.norm() > self.r_esc {
                return HitRecord { kind: HitKind::Escaped, location: z, steps };
            }
            if near_tip && d_obs < tip_zone && d_obs < d_floor {
                let h = 0.25 * self.eps;
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                z += ComplexPoint::new(dx, dy) * h;
                continue;
            }
            let r = d_obs.min(d_floor);
            let th: f64 = rng.gen::<f64>() * 2.0 * PI;
            let (s, c) = th.sin_cos();
            z += ComplexPoint::new(c, s) * r;
        }
        HitRecord { kind: HitKind::Escaped, location: z, steps: self.max_steps }
    }
}

/// One walker from `z`; errors if `z` lies inside an obstacle.
pub fn sample_hit<R: Rng + ?Sized>(
    z: ComplexPoint,
    obstacles: &ObstacleSet,
    params: &McParams,
    rng: &mut R,
) -> Result<HitRecord> {
    check_point(z, "sample_hit")?;
    let w = Walker::new(obstacles, params, obstacles.rad());
    if !(z.im > 0.0) || obstacles.contains(z, w.shell()) {
        return Err(Error::Domain(format!("start point {z} is not in the free region")));
    }
    Ok(w.walk(z, rng))
}

/// Runs `n` samples in batches; `f(rng, count)` returns the batch aggregate.
/// Aggregates come back in batch order.
pub fn batched<T, F>(n: usize, batch: usize, stream: RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let batch = batch.max(1);
    let nb = n.div_ceil(batch);
    (0..nb)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let count = batch.min(n - b * batch);
            f(&mut rng, count)
        })
        .collect()
}

/// Running first and second moments.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sum_sq - self.n as f64 * m * m) / (self.n as f64 - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

fn mean_hull_height(
    z: ComplexPoint,
    walker: &Walker<'_>,
    n: usize,
    batch: usize,
    stream: RngStream,
) -> Moments {
    let parts = batched(n, batch, stream, |rng, count| {
        let mut m = Moments::default();
        for _ in 0..count {
            let h = walker.walk(z, rng);
            let v = match h.kind {
                HitKind::Hull | HitKind::Slit(_) => h.location.im,
                _ => 0.0,
            };
            m.push(v);
        }
        m
    });
    parts.iter().fold(Moments::default(), |mut a, b| {
        a.merge(b);
        a
    })
}

/// `Im z - E_z[Im Z_sigma_F; sigma_F < inf]`, the imaginary part of the
/// canonical map of the hull `F` at `z`.
pub fn im_g0(z: ComplexPoint, hull: &ObstacleSet, n: usize, params: &McParams, stream: RngStream) -> Result<EstimateCI> {
    check_point(z, "im_g0")?;
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    if hull.hull.is_empty() && hull.slits.is_none() {
        return Ok(EstimateCI::exact(z.im));
    }
    let scale = hull.rad();
    let walker = Walker::new(hull, params, scale);
    if hull.contains(z, walker.shell()) {
        return Err(Error::Domain(format!("{z} lies in the hull")));
    }
    let m = mean_hull_height(z, &walker, n, params.batch, stream);
    let value = (z.im - m.mean()).clamp(0.0, z.im);
    Ok(EstimateCI {
        value,
        std_error: m.std_error(),
        n_samples: n,
        bias_bound: scale * z.im.max(scale) / walker.escape_radius() + walker.shell(),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; m];
    let mut ws = vec![0.0; m];
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Number of angular quadrature nodes used by [`hcap_mc`].
pub const HCAP_NODES: usize = 32;

/// Half-plane capacity `(2R/pi) int_0^pi E_{R e^{i th}}[Im Z_sigma_F] sin th d th`.
///
/// The `sin th` weight projects the exterior expansion of the harmonic
/// function `E[Im Z_sigma]` onto its first mode, whose coefficient is the
/// capacity.
pub fn hcap_mc(hull: &ObstacleSet, radius: f64, n: usize, params: &McParams, stream: RngStream) -> Result<EstimateCI> {
    let rad = hull.rad();
    if !(radius > rad) {
        return Err(Error::Domain(format!("radius {radius} does not enclose the hull (rad {rad})")));
    }
    if hull.hull.is_empty() && hull.slits.is_none() {
        return Ok(EstimateCI::exact(0.0));
    }
    let walker = Walker::new(hull, params, rad);
    let (xs, ws) = gauss_legendre(HCAP_NODES);
    let per = (n / HCAP_NODES).max(1);
    let mut value = 0.0;
    let mut var = 0.0;
    for (i, (&x, &w)) in xs.iter().zip(&ws).enumerate() {
        let th = 0.5 * PI * (x + 1.0);
        let wt = 0.5 * PI * w * th.sin();
        let z = ComplexPoint::from_polar(radius, th);
        let m = mean_hull_height(z, &walker, per, params.batch, stream.substream(i as u64));
        value += wt * m.mean();
        var += wt * wt * m.variance() / per as f64;
    }
    let c = 2.0 * radius / PI;
    Ok(EstimateCI {
        value: c * value,
        std_error: c * var.sqrt(),
        n_samples: per * HCAP_NODES,
        bias_bound: rad * rad / walker.escape_radius() + walker.shell(),
    })
}

/// `P_z(sigma_K < sigma_F, Z_sigma_K in C_j)` for each slit.
pub fn slit_hit_probs(
    z: ComplexPoint,
    slits: &SlitVector,
    hull: &[HullShape],
    n: usize,
    params: &McParams,
    stream: RngStream,
) -> Result<Vec<EstimateCI>> {
    let nsl = slits.len();
    if nsl == 0 {
        return Ok(vec![]);
    }
    let obstacles = ObstacleSet::new(Some(slits.clone()), hull.to_vec());
    let scale = obstacles.rad().max(z.norm());
    let walker = Walker::new(&obstacles, params, scale);
    if !(z.im > 0.0) || obstacles.contains(z, walker.shell()) {
        return Err(Error::Domain(format!("{z} is not in the free region")));
    }
    let parts = batched(n, params.batch, stream, |rng, count| {
        let mut c = vec![0usize; nsl];
        for _ in 0..count {
            if let HitKind::Slit(j) = walker.walk(z, rng).kind {
                c[j] += 1;
            }
        }
        c
    });
    let mut counts = vec![0usize; nsl];
    for p in &parts {
        for j in 0..nsl {
            counts[j] += p[j];
        }
    }
    Ok(counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n as f64;
            EstimateCI {
                value: p,
                std_error: (p * (1.0 - p) / n as f64).sqrt(),
                n_samples: n,
                bias_bound: walker.shell(),
            }
        })
        .collect())
}

/// Axis-aligned rectangle used as the contour around a slit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    /// Rectangle around slit `j` with margin `m` on every side.
    pub fn around(s: &SlitVector, j: usize, m: f64) -> Rect {
        Rect { x0: s.x()[j] - m, x1: s.xr()[j] + m, y0: s.y()[j] - m, y1: s.y()[j] + m }
    }

    fn inner_distance(&self, z: ComplexPoint) -> f64 {
        (z.re - self.x0).min(self.x1 - z.re).min(z.im - self.y0).min(self.y1 - z.im)
    }

    fn project(&self, z: ComplexPoint) -> ComplexPoint {
        let d = [z.re - self.x0, self.x1 - z.re, z.im - self.y0, self.y1 - z.im];
        let k = (0..4).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        match k {
            0 => ComplexPoint::new(self.x0, z.im),
            1 => ComplexPoint::new(self.x1, z.im),
            2 => ComplexPoint::new(z.re, self.y0),
            _ => ComplexPoint::new(z.re, self.y1),
        }
    }

    fn overlaps(&self, b: (f64, f64, f64, f64)) -> bool {
        b.0 <= self.x1 && b.1 >= self.x0 && b.2 <= self.y1 && b.3 >= self.y0
    }

    /// Arc-length coordinate along the boundary, counterclockwise from `(x0, y0)`.
    pub fn arclength(&self, z: ComplexPoint) -> f64 {
        let (w, h) = (self.x1 - self.x0, self.y1 - self.y0);
        let tol = 1e-9 * (w + h);
        if (z.im - self.y0).abs() <= tol {
            z.re - self.x0
        } else if (z.re - self.x1).abs() <= tol {
            w + (z.im - self.y0)
        } else if (z.im - self.y1).abs() <= tol {
            w + h + (self.x1 - z.re)
        } else {
            2.0 * w + h + (self.y1 - z.im)
        }
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.x1 - self.x0) + (self.y1 - self.y0))
    }
}

/// How the excursion law from a darned slit is approximated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExcursionLaw {
    /// Uniform launch just off the slit, kept only if the contour is reached
    /// before returning to the slit.
    #[default]
    ConditionedEscape,
    /// Uniform launch on the slit with the slit itself transparent.
    UniformOnSlit,
}

/// Empirical measure on the contour.
#[derive(Clone, Debug)]
pub struct EtaMeasure {
    pub contour: Rect,
    pub samples: Vec<ComplexPoint>,
    pub weights: Vec<f64>,
    pub launched: usize,
}

impl EtaMeasure {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Relative launch offset for [`ExcursionLaw::ConditionedEscape`].
pub const LAUNCH_OFFSET: f64 = 1e-3;

/// Samples `nu_i`, the contour-exit law of the darned process started at slit `i`.
#[allow(clippy::too_many_arguments)]
pub fn harmonic_measure_eta(
    i: usize,
    slits: &SlitVector,
    hull: &[HullShape],
    contour: Rect,
    n: usize,
    law: ExcursionLaw,
    params: &McParams,
    stream: RngStream,
) -> Result<EtaMeasure> {
    if i >= slits.len() {
        return Err(Error::InvalidParameter(format!("slit index {i} out of range")));
    }
    let (a, b) = (slits.left(i), slits.right(i));
    let inside = |p: ComplexPoint| p.re > contour.x0 && p.re < contour.x1 && p.im > contour.y0 && p.im < contour.y1;
    if !(contour.y0 > 0.0) || !inside(a) || !inside(b) {
        return Err(Error::Domain("contour must enclose the slit and stay above the real axis".into()));
    }
    for j in 0..slits.len() {
        if j != i && contour.overlaps((slits.x()[j], slits.xr()[j], slits.y()[j], slits.y()[j])) {
            return Err(Error::Domain(format!("contour meets slit {j}")));
        }
    }
    if hull.iter().any(|h| contour.overlaps(h.bbox())) {
        return Err(Error::Domain("contour meets the hull".into()));
    }
    let half = slits.half_length(i);
    let eps = params.shell * half;
    let delta = LAUNCH_OFFSET * half;
    let one = ObstacleSet::new(Some(SlitVector::single(slits.y()[i], a.re, b.re)?), vec![]);
    let walk = |z0: ComplexPoint, absorbing: bool, rng: &mut ChaCha8Rng| -> Option<ComplexPoint> {
        let mut z = z0;
        for _ in 0..params.max_steps {
            let dr = contour.inner_distance(z);
            let ds = if absorbing { one.nearest(z).0 } else { f64::INFINITY };
            if dr < eps {
                return Some(contour.project(z));
            }
            if ds < eps {
                return None;
            }
            let r = dr.min(ds);
            let th: f64 = rng.gen::<f64>() * 2.0 * PI;
            z += ComplexPoint::from_polar(r, th);
        }
        None
    };
    let parts = batched(n, params.batch, stream, |rng, count| {
        let mut out = Vec::with_capacity(count);
        let mut launched = 0usize;
        while out.len() < count {
            launched += 1;
            let t: f64 = rng.gen();
            let p = a + (b - a) * t;
            let hit = match law {
                ExcursionLaw::ConditionedEscape => {
                    let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    walk(p + ComplexPoint::new(0.0, side * delta), true, rng)
                }
                ExcursionLaw::UniformOnSlit => walk(p, false, rng),
            };
            if let Some(q) = hit {
                out.push(q);
            }
            if launched > 1000 * count.max(1) + 1_000_000 {
                break;
            }
        }
        (out, launched)
    });
    let mut samples = Vec::with_capacity(n);
    let mut launched = 0;
    for (s, l) in parts {
        samples.extend(s);
        launched += l;
    }
    if samples.is_empty() {
        return Err(Error::NoConvergence("no walker reached the contour".into()));
    }
    let w = 1.0 / samples.len() as f64;
    let weights = vec![w; samples.len()];
    Ok(EtaMeasure { contour, samples, weights, launched })
}

/// Exit law on the contour of plain walkers from a point, for comparison
/// with [`harmonic_measure_eta`].
pub fn contour_exit_from_point(
    z: ComplexPoint,
    contour: Rect,
    n: usize,
    params: &McParams,
    stream: RngStream,
) -> Vec<ComplexPoint> {
    let scale = (contour.x1 - contour.x0).min(contour.y1 - contour.y0);
    let eps = params.shell * scale;
    let parts = batched(n, params.batch, stream, |rng, count| {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut w = z;
            loop {
                let d = contour.inner_distance(w);
                if d < eps {
                    out.push(contour.project(w));
                    break;
                }
                let th: f64 = rng.gen::<f64>() * 2.0 * PI;
                w += ComplexPoint::from_polar(d, th);
            }
        }
        out
    });
    parts.into_iter().flatten().collect()
}
