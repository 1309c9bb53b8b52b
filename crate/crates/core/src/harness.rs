//! Experiment presets, two-sample statistics and reports.
//!
//! Every ensemble is reduced to hull tips in the half-plane; tips are zipped
//! into a chordal flow, which supplies the capacity clock and the swallow
//! times of marked points for all ensembles by the same code path.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abm_mc::{EstimateCI, Moments, RngStream};
use crate::annulus::{chordal_disk_hit, radial_sle_hit, RadialHit};
use crate::bmd_kernel::{neg_b_bmd, NEG_BMD_TAG};
use crate::chordal::{forward_step, inverse_step, swallow_threshold, AnalyticShape, ChordalFlow, TraceSample};
use crate::error::{Error, Result};
use crate::geometry::{segment_distance, CoefficientFunction, ComplexPoint, SlitVector};
use crate::skle::{tip_at_capacity, touches_slit, SkleOptions, SkleRunner, StopReason};

/// Two-sample Kolmogorov-Smirnov result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    /// Kish effective size of the first sample when it is weighted.
    pub effective_n1: Option<f64>,
    pub functional: String,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn sorted_weighted(xs: &[f64], w: Option<&[f64]>) -> Result<(Vec<(f64, f64)>, f64)> {
    if xs.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("sample"));
    }
    let mut v: Vec<(f64, f64)> = match w {
        Some(w) => {
            if w.len() != xs.len() || w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter("weights must be finite, nonnegative and match the sample".into()));
            }
            xs.iter().copied().zip(w.iter().copied()).collect()
        }
        None => xs.iter().map(|&x| (x, 1.0)).collect(),
    };
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("weights sum to zero".into()));
    }
    Ok((v, total))
}

fn ks_statistic(a: &[(f64, f64)], ta: f64, b: &[(f64, f64)], tb: f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        d = d.max((fa / ta - fb / tb).abs());
    }
    d.min(1.0)
}

fn ks_p(d: f64, n1: f64, n2: f64) -> f64 {
    let ne = n1 * n2 / (n1 + n2);
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// Standard two-sample KS statistic with the asymptotic p-value.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KSReport> {
    let (a, ta) = sorted_weighted(xs, None)?;
    let (b, tb) = sorted_weighted(ys, None)?;
    let d = ks_statistic(&a, ta, &b, tb);
    Ok(KSReport {
        statistic: d,
        p_value: ks_p(d, xs.len() as f64, ys.len() as f64),
        n1: xs.len(),
        n2: ys.len(),
        effective_n1: None,
        functional: String::new(),
    })
}

/// KS distance between the weighted empirical law of `xs` and the plain
/// empirical law of `ys`; the p-value uses the Kish effective size.
pub fn weighted_ks(xs: &[f64], weights: &[f64], ys: &[f64]) -> Result<KSReport> {
    let (a, ta) = sorted_weighted(xs, Some(weights))?;
    let (b, tb) = sorted_weighted(ys, None)?;
    let d = ks_statistic(&a, ta, &b, tb);
    let ess = effective_sample_size(weights);
    Ok(KSReport {
        statistic: d,
        p_value: ks_p(d, ess, ys.len() as f64),
        n1: xs.len(),
        n2: ys.len(),
        effective_n1: Some(ess),
        functional: String::new(),
    })
}

/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Thm42,
    LocalitySle6,
    RadialCompare,
    GirsanovThm43,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Thm42 => "thm42",
            Preset::LocalitySle6 => "locality-sle6",
            Preset::RadialCompare => "radial-compare",
            Preset::GirsanovThm43 => "girsanov-thm43",
        }
    }

    pub const ALL: [Preset; 4] = [Preset::Thm42, Preset::LocalitySle6, Preset::RadialCompare, Preset::GirsanovThm43];
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {s}")))
    }
}

/// Scalar path functionals compared across ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// Real part of the tip when the hull reaches the capacity target.
    TipReAtCap,
    /// Half-plane capacity at raw time `hcap_time` (clock identity probe).
    HcapAtTime,
    /// Capacity time at which the hull first swallows a point of the marked
    /// segment, censored at the capacity target.
    HitTimeOfSegment,
    /// Argument of the first trace point in the disk of radius `disk_radius`,
    /// `4` when `0` is separated from `1` first.
    DiskHitArg,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::TipReAtCap => "tip_re_at_cap",
            Functional::HcapAtTime => "hcap_at_time",
            Functional::HitTimeOfSegment => "hit_time_of_segment",
            Functional::DiskHitArg => "disk_hit_arg",
        }
    }
}

/// Experiment configuration. Fields absent from a config file take the
/// preset defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub n_paths: usize,
    pub dt: f64,
    /// Half-plane capacity at which paths stop.
    pub capacity_target: f64,
    /// Largest raw time before a path is discarded.
    pub horizon: f64,
    pub seed: u64,
    pub slits: Option<SlitVector>,
    pub xi0: f64,
    /// Constant diffusion coefficient of the SKLE ensemble.
    pub alpha: f64,
    /// Drift of the weighted SKLE ensemble: `zero`, `neg-bmd` or `const:<v>`.
    pub drift: String,
    /// `kappa` of the chordal or radial ensembles.
    pub kappa: f64,
    /// `kappa` of the negative control, when one is run.
    pub control_kappa: Option<f64>,
    /// Run the drift-free SKLE negative control.
    pub negative_control: bool,
    /// Obstacle for the locality preset.
    pub hull: Option<AnalyticShape>,
    /// Marked segment `[a, b]`, in the upper half-plane or on the real line,
    /// and the number of points on it.
    pub segment: [ComplexPoint; 2],
    pub segment_points: usize,
    /// Raw time of the `hcap_at_time` functional.
    pub hcap_time: f64,
    pub disk_radius: f64,
    pub functionals: Vec<Functional>,
    /// Largest admissible discard fraction of the primary ensemble.
    pub max_discard: f64,
    pub significance: f64,
    /// Traces written per ensemble.
    pub n_traces: usize,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = ExperimentConfig {
            preset,
            n_paths: 2000,
            dt: 1e-3,
            capacity_target: 0.5,
            horizon: 2.0,
            seed: 1,
            slits: None,
            xi0: 0.0,
            alpha: 6f64.sqrt(),
            drift: NEG_BMD_TAG.into(),
            kappa: 6.0,
            control_kappa: None,
            negative_control: false,
            hull: None,
            segment: [Complex64::new(0.0, 0.3), Complex64::new(0.0, 0.3)],
            segment_points: 1,
            hcap_time: 0.1,
            disk_radius: 0.5,
            functionals: vec![Functional::TipReAtCap, Functional::HitTimeOfSegment],
            max_discard: 0.2,
            significance: 0.01,
            n_traces: 5,
        };
        match preset {
            Preset::Thm42 => ExperimentConfig {
                slits: Some(SlitVector::single(1.0, -0.5, 0.5).unwrap()),
                xi0: 2.0,
                segment: [Complex64::new(2.0, 0.3), Complex64::new(2.0, 0.3)],
                negative_control: true,
                ..base
            },
            Preset::LocalitySle6 => ExperimentConfig {
                hull: Some(AnalyticShape::HalfDisk { center: 1.0, radius: 0.5 }),
                capacity_target: 0.08,
                control_kappa: Some(2.0),
                segment: [Complex64::new(-0.6, 0.0), Complex64::new(-0.6, 0.0)],
                max_discard: 0.5,
                ..base
            },
            Preset::RadialCompare => ExperimentConfig {
                n_paths: 500,
                horizon: 3.0,
                functionals: vec![Functional::DiskHitArg],
                ..base
            },
            Preset::GirsanovThm43 => ExperimentConfig {
                slits: Some(SlitVector::single(1.0, -0.5, 0.5).unwrap()),
                xi0: 2.0,
                alpha: 2.0,
                kappa: 4.0,
                segment: [Complex64::new(2.0, 0.3), Complex64::new(2.0, 0.3)],
                ..base
            },
        }
    }

    /// Preset defaults overlaid with the fields of a JSON object.
    pub fn from_json(preset: Preset, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(ExperimentConfig::preset(preset))?;
        match overrides {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    if k == "preset" && v.as_str() != Some(preset.name()) {
                        return Err(Error::InvalidParameter(format!("config preset {v} differs from {}", preset.name())));
                    }
                    base[k] = v.clone();
                }
            }
            serde_json::Value::Null => {}
            _ => return Err(Error::InvalidParameter("config must be a JSON object".into())),
        }
        let cfg: ExperimentConfig = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ks = !self.functionals.is_empty();
        if ks && self.n_paths < 100 {
            return Err(Error::InvalidParameter("KS-based presets need at least 100 paths".into()));
        }
        if !(self.dt > 0.0 && self.capacity_target > 0.0 && self.horizon > 0.0) {
            return Err(Error::InvalidParameter("dt, capacity_target and horizon must be positive".into()));
        }
        if self.segment_points == 0 || self.segment.iter().any(|p| !(p.im >= 0.0)) || (self.segment[0].im == 0.0) != (self.segment[1].im == 0.0) {
            return Err(Error::InvalidParameter("segment must lie in the upper half-plane or on the real line".into()));
        }
        parse_drift(&self.drift)?;
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidParameter("significance must lie in (0, 1)".into()));
        }
        match self.preset {
            Preset::Thm42 | Preset::GirsanovThm43 => {
                let s = self.slits.as_ref().ok_or_else(|| Error::InvalidParameter("preset needs slits".into()))?;
                if s.len() > 1 {
                    return Err(Error::InvalidParameter("preset needs at most one slit".into()));
                }
                if !(self.alpha > 0.0) {
                    return Err(Error::InvalidParameter("alpha must be positive".into()));
                }
            }
            Preset::LocalitySle6 => {
                let h = self.hull.ok_or_else(|| Error::InvalidParameter("locality preset needs a hull".into()))?;
                if !matches!(h, AnalyticShape::HalfDisk { .. }) || h.contains(Complex64::new(self.xi0, 0.0), 0.0) {
                    return Err(Error::InvalidParameter("hull must be a half-disk away from the start point".into()));
                }
            }
            Preset::RadialCompare => {
                if !(self.disk_radius > 0.0 && self.disk_radius < 1.0) || self.xi0 != 0.0 {
                    return Err(Error::InvalidParameter("radial preset needs xi0 = 0 and a disk radius in (0, 1)".into()));
                }
                if self.functionals.iter().any(|f| *f != Functional::DiskHitArg) {
                    return Err(Error::InvalidParameter("radial preset supports only disk_hit_arg".into()));
                }
            }
        }
        if self.preset != Preset::RadialCompare && self.functionals.contains(&Functional::DiskHitArg) {
            return Err(Error::InvalidParameter("disk_hit_arg belongs to the radial preset".into()));
        }
        Ok(())
    }

    fn segment_points(&self) -> Vec<ComplexPoint> {
        let n = self.segment_points;
        (0..n)
            .map(|k| {
                let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
                self.segment[0] * (1.0 - t) + self.segment[1] * t
            })
            .collect()
    }
}

/// Zips tips into a chordal flow and tracks marked points on its clock.
struct Monitor {
    flow: ChordalFlow,
    tips: Vec<ComplexPoint>,
    drivers: Vec<f64>,
    raw: Vec<f64>,
    a: Vec<f64>,
    marks: Vec<ComplexPoint>,
    hit: Option<f64>,
    threshold: f64,
    target: f64,
}

impl Monitor {
    fn new(start: ComplexPoint, marks: Vec<ComplexPoint>, target: f64, dt: f64) -> Self {
        Monitor {
            flow: ChordalFlow::new(),
            tips: vec![start],
            drivers: vec![start.re],
            raw: vec![0.0],
            a: vec![0.0],
            marks,
            hit: None,
            threshold: swallow_threshold(dt),
            target,
        }
    }

    fn capacity(&self) -> f64 {
        *self.a.last().unwrap()
    }

    /// Appends a tip whose zipper step is already known.
    fn push_zipped(&mut self, t: f64, tip: ComplexPoint, u: f64, dtau: f64, own_flow: bool) -> bool {
        if own_flow && dtau > 0.0 {
            self.flow.push(u, dtau);
        }
        let a = self.capacity() + 2.0 * dtau;
        if self.hit.is_none() && dtau > 0.0 {
            let last = *self.drivers.last().unwrap();
            for m in self.marks.iter_mut() {
                if m.im == 0.0 {
                    // real marks are swallowed once the driver crosses their image
                    let d = m.re - u;
                    if (m.re - last) * d <= 0.0 {
                        self.hit = Some(0.5 * a);
                    }
                    m.re = u + d.signum() * (d * d + 4.0 * dtau).sqrt();
                } else {
                    *m = forward_step(*m, u, dtau);
                    if (*m - u).norm() < self.threshold || !m.im.is_finite() {
                        self.hit = Some(0.5 * a);
                    }
                }
            }
        }
        self.tips.push(tip);
        self.drivers.push(u);
        self.raw.push(t);
        self.a.push(a);
        a >= self.target
    }

    fn push_tip(&mut self, t: f64, tip: ComplexPoint) -> bool {
        let (u, dtau) = self.flow.zip_point(tip);
        self.push_zipped(t, tip, u, dtau, false)
    }

    fn value(&self, f: Functional, cfg: &ExperimentConfig) -> f64 {
        match f {
            Functional::TipReAtCap => tip_at_capacity(&self.tips, &self.a, self.target).map_or(f64::NAN, |z| z.re),
            Functional::HcapAtTime => {
                let k = self.raw.partition_point(|&t| t < cfg.hcap_time - 1e-12);
                self.a[k.min(self.a.len() - 1)]
            }
            Functional::HitTimeOfSegment => self.hit.unwrap_or(0.5 * self.target).min(0.5 * self.target),
            Functional::DiskHitArg => f64::NAN,
        }
    }

    fn trace(&self) -> Vec<TraceSample> {
        (0..self.tips.len())
            .map(|k| TraceSample { t: 0.5 * self.a[k], driver: self.drivers[k], tip: self.tips[k] })
            .collect()
    }
}

/// One path of an ensemble.
#[derive(Clone, Debug)]
struct PathResult {
    stop: String,
    retained: bool,
    values: Vec<f64>,
    log_weight: f64,
    trace: Vec<TraceSample>,
}

impl PathResult {
    fn from_monitor(m: &Monitor, stop: &str, reached: bool, cfg: &ExperimentConfig, keep_trace: bool) -> Self {
        let values = if reached { cfg.functionals.iter().map(|&f| m.value(f, cfg)).collect() } else { vec![f64::NAN; cfg.functionals.len()] };
        PathResult {
            stop: stop.to_string(),
            retained: reached && values.iter().all(|v| v.is_finite()),
            values,
            log_weight: 0.0,
            trace: if keep_trace { m.trace() } else { Vec::new() },
        }
    }
}

fn stop_name(r: StopReason) -> &'static str {
    match r {
        StopReason::Horizon => "horizon",
        StopReason::SlitDegeneracy => "slit_degeneracy",
        StopReason::CapacityTarget => "capacity_target",
        StopReason::SlitContact => "slit_contact",
        StopReason::CoefficientFailure => "coefficient_failure",
    }
}

/// SKLE path routed through the engine's own zipper.
fn skle_path(cfg: &ExperimentConfig, alpha: f64, b: &CoefficientFunction, weights: bool, stream: RngStream, keep: bool) -> Result<PathResult> {
    let s0 = cfg.slits.clone().unwrap_or_else(SlitVector::empty);
    let al = CoefficientFunction::constant(alpha);
    let opts = SkleOptions { capacity_target: Some(cfg.capacity_target), track_phi: weights, ..SkleOptions::new(cfg.dt, cfg.horizon) };
    let mut runner = SkleRunner::new(&s0, cfg.xi0, &al, b, opts)?;
    let mut mon = Monitor::new(Complex64::new(cfg.xi0, 0.0), cfg.segment_points(), cfg.capacity_target, cfg.dt);
    let mut rng = stream.rng();
    let sd = cfg.dt.sqrt();
    while !runner.is_done() {
        let g: f64 = rng.sample(StandardNormal);
        runner.step(sd * g);
        if runner.nodes() > mon.tips.len() {
            let (u, dtau) = runner.last_zip();
            mon.push_zipped(runner.time(), runner.last_tip(), u, dtau, false);
        }
    }
    let reason = runner.stop_reason().unwrap();
    let reached = reason == StopReason::CapacityTarget;
    let mut res = PathResult::from_monitor(&mon, stop_name(reason), reached, cfg, keep);
    if weights {
        let run = runner.finish();
        let lw = run.girsanov_log_weights(alpha)?;
        res.log_weight = *lw.last().unwrap();
    }
    Ok(res)
}

/// Chordal SLE path with constant-kappa driver; `stop` sees consecutive tips
/// and returns a reason to abandon the path.
fn chordal_path(
    cfg: &ExperimentConfig,
    kappa: f64,
    xi0: f64,
    map: Option<&dyn Fn(ComplexPoint) -> Result<ComplexPoint>>,
    stop: &dyn Fn(ComplexPoint, ComplexPoint, &[(f64, f64)], f64) -> Option<&'static str>,
    marked: Option<f64>,
    stream: RngStream,
    keep: bool,
) -> Result<PathResult> {
    let dt = cfg.dt;
    let sd = (kappa * dt).sqrt();
    let mut rng = stream.rng();
    let mut u = xi0;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    let start = match map {
        Some(f) => f(Complex64::new(xi0, 0.0))?,
        None => Complex64::new(xi0, 0.0),
    };
    let mut mon = Monitor::new(start, cfg.segment_points(), cfg.capacity_target, cfg.dt);
    let mut prev = Complex64::new(xi0, 0.0);
    // a real point of the comparison frame, swallowed once the zipped driver crosses it
    let mut mark = marked.map(|x| (x, start.re));
    let n_max = (cfg.horizon / dt).ceil() as usize;
    for n in 1..=n_max {
        let g: f64 = rng.sample(StandardNormal);
        u += sd * g;
        steps.push((u, dt));
        let mut w = Complex64::new(u, 0.0);
        for &(v, h) in steps.iter().rev() {
            w = inverse_step(w, v, h);
        }
        w.im = w.im.max(0.0);
        if let Some(reason) = stop(prev, w, &steps, u) {
            return Ok(PathResult::from_monitor(&mon, reason, false, cfg, keep));
        }
        prev = w;
        let t = n as f64 * dt;
        let reached = match map {
            Some(f) => mon.push_tip(t, f(w)?),
            None => mon.push_zipped(t, w, u, dt, true),
        };
        if let Some((x, last)) = mark.as_mut() {
            let k = mon.a.len() - 1;
            let (v, h) = (mon.drivers[k], 0.5 * (mon.a[k] - mon.a[k - 1]));
            if h > 0.0 {
                if (*x - *last) * (*x - v) <= 0.0 {
                    return Ok(PathResult::from_monitor(&mon, "interval_contact", false, cfg, keep));
                }
                let d = *x - v;
                *x = v + d.signum() * (d * d + 4.0 * h).sqrt();
                *last = v;
            }
        }
        if reached {
            return Ok(PathResult::from_monitor(&mon, "capacity_target", true, cfg, keep));
        }
    }
    Ok(PathResult::from_monitor(&mon, "horizon", false, cfg, keep))
}

/// Functional samples and bookkeeping of one ensemble.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleData {
    pub name: String,
    pub description: String,
    pub n_paths: usize,
    pub retained: usize,
    pub discard_fraction: f64,
    pub stop_counts: BTreeMap<String, usize>,
    /// Retained samples per functional.
    pub samples: BTreeMap<String, Vec<f64>>,
    /// Weights of the retained paths, for reweighted ensembles.
    pub weights: Option<Vec<f64>>,
}

fn ensemble_data(name: &str, description: &str, paths: &[PathResult], cfg: &ExperimentConfig, weighted: bool) -> EnsembleData {
    let mut stop_counts = BTreeMap::new();
    for p in paths {
        *stop_counts.entry(p.stop.clone()).or_insert(0) += 1;
    }
    let kept: Vec<&PathResult> = paths.iter().filter(|p| p.retained).collect();
    let samples = cfg
        .functionals
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name().to_string(), kept.iter().map(|p| p.values[i]).collect()))
        .collect();
    EnsembleData {
        name: name.into(),
        description: description.into(),
        n_paths: paths.len(),
        retained: kept.len(),
        discard_fraction: 1.0 - kept.len() as f64 / paths.len().max(1) as f64,
        stop_counts,
        samples,
        weights: weighted.then(|| kept.iter().map(|p| p.log_weight.exp()).collect()),
    }
}

/// Expected outcome of a comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Equal laws: the test must not reject.
    Equal,
    /// Negative control: the test must reject.
    Differ,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonSpec {
    pub functional: String,
    pub first: String,
    pub second: String,
    pub expect: Expectation,
}

/// Everything an experiment leaves on disk besides traces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifacts {
    pub preset: Preset,
    pub config: ExperimentConfig,
    pub ensembles: Vec<EnsembleData>,
    pub comparisons: Vec<ComparisonSpec>,
    pub estimates: BTreeMap<String, EstimateCI>,
}

pub const ARTIFACTS_FILE: &str = "samples.json";
pub const TRACE_DIR: &str = "traces";

fn run_ensemble<F>(n: usize, stream: RngStream, n_traces: usize, f: F) -> Result<Vec<PathResult>>
where
    F: Fn(RngStream, bool) -> Result<PathResult> + Sync,
{
    (0..n).into_par_iter().map(|i| f(stream.substream(i as u64), i < n_traces)).collect()
}

fn check_discard(e: &EnsembleData, cfg: &ExperimentConfig) -> Result<()> {
    if e.discard_fraction > cfg.max_discard {
        return Err(Error::InvalidParameter(format!(
            "config error: ensemble {} discarded {:.1}% of paths before the capacity target (limit {:.0}%); reduce the target",
            e.name,
            100.0 * e.discard_fraction,
            100.0 * cfg.max_discard
        )));
    }
    Ok(())
}

fn comparisons(cfg: &ExperimentConfig, first: &str, second: &str, expect: Expectation) -> Vec<ComparisonSpec> {
    cfg.functionals
        .iter()
        .map(|f| ComparisonSpec { functional: f.name().into(), first: first.into(), second: second.into(), expect })
        .collect()
}

fn slit_stop(s: SlitVector, dt: f64) -> impl Fn(ComplexPoint, ComplexPoint, &[(f64, f64)], f64) -> Option<&'static str> {
    move |p, q, _, _| touches_slit(&s, p, q, 2.0 * dt.sqrt()).then_some("slit_contact")
}

fn run_thm42(cfg: &ExperimentConfig) -> Result<(Vec<(EnsembleData, Vec<PathResult>)>, Vec<ComparisonSpec>, BTreeMap<String, EstimateCI>)> {
    let root = RngStream::new(cfg.seed, 0);
    let s0 = cfg.slits.clone().unwrap();
    let nb = neg_b_bmd();
    let a = run_ensemble(cfg.n_paths, root.substream(1), cfg.n_traces, |st, k| skle_path(cfg, cfg.alpha, &nb, false, st, k))?;
    let ea = ensemble_data("skle", "SKLE with alpha = sqrt(6), b = -b_BMD, on the capacity clock", &a, cfg, false);
    check_discard(&ea, cfg)?;
    let stop = slit_stop(s0, cfg.dt);
    let b = run_ensemble(cfg.n_paths, root.substream(2), cfg.n_traces, |st, k| chordal_path(cfg, 6.0, cfg.xi0, None, &stop, None, st, k))?;
    let eb = ensemble_data("sle6", "chordal SLE_6 with the same slit-contact discard", &b, cfg, false);
    let mut out = vec![(ea, a), (eb, b)];
    let mut cmp = comparisons(cfg, "skle", "sle6", Expectation::Equal);
    if cfg.negative_control {
        let zero = CoefficientFunction::constant(0.0);
        let c = run_ensemble(cfg.n_paths, root.substream(3), cfg.n_traces, |st, k| skle_path(cfg, cfg.alpha, &zero, false, st, k))?;
        out.push((ensemble_data("skle_b0", "SKLE with alpha = sqrt(6), b = 0 (negative control)", &c, cfg, false), c));
        cmp.extend(comparisons(cfg, "skle_b0", "sle6", Expectation::Differ));
    }
    Ok((out, cmp, BTreeMap::new()))
}

fn run_girsanov(cfg: &ExperimentConfig) -> Result<(Vec<(EnsembleData, Vec<PathResult>)>, Vec<ComparisonSpec>, BTreeMap<String, EstimateCI>)> {
    let root = RngStream::new(cfg.seed, 0);
    let s0 = cfg.slits.clone().unwrap();
    let drift = parse_drift(&cfg.drift)?;
    let a = run_ensemble(cfg.n_paths, root.substream(1), cfg.n_traces, |st, k| skle_path(cfg, cfg.alpha, &drift, true, st, k))?;
    let ea = ensemble_data("skle_weighted", &format!("SKLE with constant alpha, b = {}, Girsanov weighted", cfg.drift), &a, cfg, true);
    check_discard(&ea, cfg)?;
    let ess = effective_sample_size(ea.weights.as_ref().unwrap());
    if ess < 50.0 {
        return Err(Error::InvalidParameter(format!("config error: effective sample size {ess:.1} below 50")));
    }
    let mut m = Moments::default();
    for p in &a {
        m.push(p.log_weight.exp());
    }
    let mut est = BTreeMap::new();
    est.insert("mean_weight".into(), EstimateCI { value: m.mean(), std_error: m.std_error(), n_samples: a.len(), bias_bound: 0.0 });
    est.insert("effective_sample_size".into(), EstimateCI::exact(ess));
    let stop = slit_stop(s0, cfg.dt);
    let kappa = cfg.alpha * cfg.alpha;
    let b = run_ensemble(cfg.n_paths, root.substream(2), cfg.n_traces, |st, k| chordal_path(cfg, kappa, cfg.xi0, None, &stop, None, st, k))?;
    let eb = ensemble_data("sle", "chordal SLE_{alpha^2} with the same slit-contact discard", &b, cfg, false);
    Ok((vec![(ea, a), (eb, b)], comparisons(cfg, "skle_weighted", "sle", Expectation::Equal), est))
}

fn run_locality(cfg: &ExperimentConfig) -> Result<(Vec<(EnsembleData, Vec<PathResult>)>, Vec<ComparisonSpec>, BTreeMap<String, EstimateCI>)> {
    let root = RngStream::new(cfg.seed, 0);
    let hull = cfg.hull.unwrap();
    let AnalyticShape::HalfDisk { center, radius } = hull else { unreachable!() };
    let mapped_start = hull.map(Complex64::new(cfg.xi0, 1e-300))?.re;
    let map = |z: ComplexPoint| hull.map(z);
    let touches = move |p: ComplexPoint, q: ComplexPoint| segment_distance(Complex64::new(center, 0.0), p, q).0 <= radius;
    let obstacle = move |p: ComplexPoint, q: ComplexPoint, _: &[(f64, f64)], _: f64| touches(p, q).then_some("obstacle_contact");
    let free = |_: ComplexPoint, _: ComplexPoint, _: &[(f64, f64)], _: f64| None;
    // the arc of the half-disk maps onto [center - 2r, center + 2r]
    let marked = if mapped_start < center { center - 2.0 * radius } else { center + 2.0 * radius };
    let mut out = Vec::new();
    let mut cmp = Vec::new();
    let mut kappas = vec![(cfg.kappa, "", Expectation::Equal)];
    if let Some(k) = cfg.control_kappa {
        kappas.push((k, "_control", Expectation::Differ));
    }
    for (j, &(kappa, suffix, expect)) in kappas.iter().enumerate() {
        let a = run_ensemble(cfg.n_paths, root.substream(10 + j as u64), cfg.n_traces, |st, k| {
            chordal_path(cfg, kappa, cfg.xi0, Some(&map), &obstacle, Some(marked), st, k)
        })?;
        let ea = ensemble_data(&format!("mapped{suffix}"), &format!("chordal SLE_{kappa} mapped by the canonical map of the obstacle"), &a, cfg, false);
        if expect == Expectation::Equal {
            check_discard(&ea, cfg)?;
        }
        let b = run_ensemble(cfg.n_paths, root.substream(20 + j as u64), cfg.n_traces, |st, k| {
            chordal_path(cfg, kappa, mapped_start, None, &free, Some(marked), st, k)
        })?;
        let eb = ensemble_data(&format!("fresh{suffix}"), &format!("chordal SLE_{kappa} from the mapped start point"), &b, cfg, false);
        cmp.extend(comparisons(cfg, &ea.name, &eb.name, expect));
        out.push((ea, a));
        out.push((eb, b));
    }
    Ok((out, cmp, BTreeMap::new()))
}

fn radial_result(h: RadialHit) -> PathResult {
    PathResult {
        stop: if h.censored { "horizon".into() } else if h.arg.is_some() { "disk_hit".into() } else { "separation".into() },
        retained: !h.censored,
        values: vec![h.value()],
        log_weight: 0.0,
        trace: Vec::new(),
    }
}

fn run_radial(cfg: &ExperimentConfig) -> Result<(Vec<(EnsembleData, Vec<PathResult>)>, Vec<ComparisonSpec>, BTreeMap<String, EstimateCI>)> {
    let root = RngStream::new(cfg.seed, 0);
    let a = run_ensemble(cfg.n_paths, root.substream(1), 0, |st, _| {
        Ok(radial_result(radial_sle_hit(PI, cfg.kappa, cfg.dt, cfg.horizon, cfg.disk_radius, &mut st.rng())?))
    })?;
    let ea = ensemble_data("radial", "radial SLE from -1 in the unit disk", &a, cfg, false);
    check_discard(&ea, cfg)?;
    let b = run_ensemble(cfg.n_paths, root.substream(2), 0, |st, _| {
        Ok(radial_result(chordal_disk_hit(cfg.kappa, cfg.dt, cfg.horizon, cfg.disk_radius, &mut st.rng())?))
    })?;
    let eb = ensemble_data("chordal_disk", "chordal SLE from 0 carried to the disk", &b, cfg, false);
    Ok((vec![(ea, a), (eb, b)], comparisons(cfg, "radial", "chordal_disk", Expectation::Equal), BTreeMap::new()))
}

fn write_paths_csv(path: &Path, cfg: &ExperimentConfig, paths: &[PathResult]) -> Result<()> {
    let mut s = String::from("path,stop,retained,log_weight");
    for f in &cfg.functionals {
        s.push(',');
        s.push_str(f.name());
    }
    s.push('\n');
    for (i, p) in paths.iter().enumerate() {
        let _ = write!(s, "{i},{},{},{}", p.stop, p.retained as u8, p.log_weight);
        for v in &p.values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Runs a preset and writes its artifacts and report into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    cfg.validate()?;
    let (ens, comparisons, estimates) = match cfg.preset {
        Preset::Thm42 => run_thm42(cfg)?,
        Preset::LocalitySle6 => run_locality(cfg)?,
        Preset::RadialCompare => run_radial(cfg)?,
        Preset::GirsanovThm43 => run_girsanov(cfg)?,
    };
    std::fs::create_dir_all(out.join(TRACE_DIR))?;
    for (e, paths) in &ens {
        write_paths_csv(&out.join(format!("paths_{}.csv", e.name)), cfg, paths)?;
        for (i, p) in paths.iter().enumerate().filter(|(_, p)| !p.trace.is_empty()) {
            crate::chordal::write_trace_csv(&out.join(TRACE_DIR).join(format!("{}_{i:04}.csv", e.name)), &p.trace)?;
        }
    }
    let art = Artifacts {
        preset: cfg.preset,
        config: cfg.clone(),
        ensembles: ens.into_iter().map(|(e, _)| e).collect(),
        comparisons,
        estimates,
    };
    std::fs::write(out.join(ARTIFACTS_FILE), serde_json::to_string_pretty(&art)?)?;
    emit_report(out)
}

/// One evaluated comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub first: String,
    pub second: String,
    pub expect: Expectation,
    pub ks: KSReport,
    /// Equality holds at the significance level, or, for an expected
    /// difference, rejection at the Bonferroni level over the pair's functionals.
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub name: String,
    pub description: String,
    pub n_paths: usize,
    pub retained: usize,
    pub discard_fraction: f64,
    pub stop_counts: BTreeMap<String, usize>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub preset: Option<Preset>,
    pub config: Option<ExperimentConfig>,
    pub ensembles: Vec<EnsembleSummary>,
    pub comparisons: Vec<ComparisonResult>,
    pub estimates: BTreeMap<String, EstimateCI>,
    pub traces: Vec<String>,
    pub all_passed: bool,
}

fn compare(art: &Artifacts, c: &ComparisonSpec) -> Result<ComparisonResult> {
    let find = |n: &str| {
        art.ensembles.iter().find(|e| e.name == n).ok_or_else(|| Error::InvalidParameter(format!("no ensemble {n} in artifacts")))
    };
    let (a, b) = (find(&c.first)?, find(&c.second)?);
    fn sample<'e>(e: &'e EnsembleData, f: &str) -> Result<&'e Vec<f64>> {
        e.samples.get(f).ok_or_else(|| Error::InvalidParameter(format!("no samples of {f} in {}", e.name)))
    }
    let (xs, ys) = (sample(a, &c.functional)?, sample(b, &c.functional)?);
    let mut ks = match &a.weights {
        Some(w) => weighted_ks(xs, w, ys)?,
        None => ks_two_sample(xs, ys)?,
    };
    ks.functional = c.functional.clone();
    let alpha = art.config.significance;
    let passed = match c.expect {
        Expectation::Equal => ks.p_value > alpha,
        Expectation::Differ => {
            let m = art.comparisons.iter().filter(|d| d.first == c.first && d.second == c.second).count();
            ks.p_value < alpha / m as f64
        }
    };
    Ok(ComparisonResult { first: c.first.clone(), second: c.second.clone(), expect: c.expect, ks, passed })
}

fn read_trace(path: &Path) -> Result<Vec<ComplexPoint>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let cols: Vec<&str> = head.split(',').collect();
    let (ir, ii) = match (cols.iter().position(|c| *c == "tip_re"), cols.iter().position(|c| *c == "tip_im")) {
        (Some(r), Some(i)) => (r, i),
        _ => return Err(Error::InvalidParameter(format!("{} lacks tip_re/tip_im columns", path.display()))),
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            let p = |k: usize| v.get(k).and_then(|s| s.parse::<f64>().ok());
            match (p(ir), p(ii)) {
                (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                _ => Err(Error::InvalidParameter(format!("malformed row in {}", path.display()))),
            }
        })
        .collect()
}

/// Reads the artifacts in `dir` and writes `report.json` and `report.svg`.
/// Needs `samples.json`, trace CSVs under `traces/`, or both.
pub fn emit_report(dir: &Path) -> Result<Report> {
    let art_path = dir.join(ARTIFACTS_FILE);
    let trace_dir = dir.join(TRACE_DIR);
    let art: Option<Artifacts> = if art_path.is_file() {
        Some(serde_json::from_str(&std::fs::read_to_string(&art_path)?)?)
    } else {
        None
    };
    let mut trace_files: Vec<PathBuf> = if trace_dir.is_dir() {
        std::fs::read_dir(&trace_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect()
    } else {
        Vec::new()
    };
    trace_files.sort();
    if art.is_none() && trace_files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no run artifacts in {}: missing {} and {}/*.csv",
            dir.display(),
            ARTIFACTS_FILE,
            TRACE_DIR
        )));
    }
    let traces = trace_files.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
    let comparisons = match &art {
        Some(a) => a.comparisons.iter().map(|c| compare(a, c)).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let report = Report {
        preset: art.as_ref().map(|a| a.preset),
        config: art.as_ref().map(|a| a.config.clone()),
        ensembles: art
            .as_ref()
            .map(|a| {
                a.ensembles
                    .iter()
                    .map(|e| EnsembleSummary {
                        name: e.name.clone(),
                        description: e.description.clone(),
                        n_paths: e.n_paths,
                        retained: e.retained,
                        discard_fraction: e.discard_fraction,
                        stop_counts: e.stop_counts.clone(),
                    })
                    .collect()
            })
            .unwrap_or_default(),
        all_passed: comparisons.iter().all(|c| {
            c.passed
                || (c.expect == Expectation::Differ
                    && comparisons.iter().any(|d| d.first == c.first && d.second == c.second && d.passed))
        }),
        comparisons,
        estimates: art.as_ref().map(|a| a.estimates.clone()).unwrap_or_default(),
        traces: trace_files
            .iter()
            .map(|p| format!("{TRACE_DIR}/{}", p.file_name().unwrap().to_string_lossy()))
            .collect(),
    };
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    std::fs::write(dir.join("report.svg"), render_svg(&traces, art.as_ref(), &report))?;
    Ok(report)
}

const PANEL: f64 = 360.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo - 0.5, lo + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn axes(s: &mut String, x0: f64, y0: f64, xr: (f64, f64), yr: (f64, f64), title: &str) {
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{title}</text>"#, x0 + PANEL / 2.0, y0 - 8.0);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" font-size="10">{:.3}</text>"#, y0 + PANEL + 14.0, xr.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, x0 + PANEL, y0 + PANEL + 14.0, xr.1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y0 + PANEL, yr.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y0 + 10.0, yr.1);
}

fn render_svg(traces: &[Vec<ComplexPoint>], art: Option<&Artifacts>, report: &Report) -> String {
    let n_panels = (!traces.is_empty()) as usize + report.comparisons.len();
    let width = MARGIN + n_panels.max(1) as f64 * (PANEL + MARGIN * 1.5);
    let height = PANEL + 3.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif">"#);
    let mut x0 = MARGIN * 1.5;
    let y0 = MARGIN * 1.5;
    if !traces.is_empty() {
        let pts = traces.iter().flatten();
        let (mut xl, mut xh, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut yl = f64::INFINITY;
        for p in pts {
            xl = xl.min(p.re);
            xh = xh.max(p.re);
            yl = yl.min(p.im);
            yh = yh.max(p.im);
        }
        let (xr, yr) = (nice_range(xl, xh), nice_range(yl.min(0.0), yh));
        axes(&mut s, x0, y0, xr, yr, "traces (Re z, Im z)");
        for (k, t) in traces.iter().enumerate() {
            let mut d = String::new();
            for p in t {
                let px = x0 + (p.re - xr.0) / (xr.1 - xr.0) * PANEL;
                let py = y0 + PANEL - (p.im - yr.0) / (yr.1 - yr.0) * PANEL;
                let _ = write!(d, "{px:.2},{py:.2} ");
            }
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1"/>"#, d.trim_end(), COLORS[k % COLORS.len()]);
        }
        x0 += PANEL + MARGIN * 1.5;
    }
    if let Some(art) = art {
        for c in &report.comparisons {
            let get = |n: &str| art.ensembles.iter().find(|e| e.name == n);
            let (Some(a), Some(b)) = (get(&c.first), get(&c.second)) else { continue };
            let xa = &a.samples[&c.ks.functional];
            let xb = &b.samples[&c.ks.functional];
            let all = xa.iter().chain(xb.iter());
            let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let xr = nice_range(lo, hi);
            axes(&mut s, x0, y0, xr, (0.0, 1.0), &format!("CDF of {}", c.ks.functional));
            for (k, (e, xs)) in [(a, xa), (b, xb)].into_iter().enumerate() {
                let w = e.weights.as_deref();
                let Ok((v, tot)) = sorted_weighted(xs, w) else { continue };
                let mut d = format!("{x0:.2},{:.2} ", y0 + PANEL);
                let mut acc = 0.0;
                for (x, wt) in v {
                    let px = x0 + (x - xr.0) / (xr.1 - xr.0) * PANEL;
                    let _ = write!(d, "{px:.2},{:.2} ", y0 + PANEL - acc / tot * PANEL);
                    acc += wt;
                    let _ = write!(d, "{px:.2},{:.2} ", y0 + PANEL - acc / tot * PANEL);
                }
                let _ = write!(d, "{:.2},{y0:.2}", x0 + PANEL);
                let _ = writeln!(s, r#"<polyline points="{d}" fill="none" stroke="{}" stroke-width="1.2"/>"#, COLORS[k]);
                let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" fill="{}">{}</text>"#, x0 + 6.0, y0 + 14.0 + 12.0 * k as f64, COLORS[k], e.name);
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="10">KS D = {:.4}, p = {:.4} ({})</text>"#,
                x0 + 6.0,
                y0 + 42.0,
                c.ks.statistic,
                c.ks.p_value,
                if c.passed { "pass" } else { "fail" }
            );
            x0 += PANEL + MARGIN * 1.5;
        }
    }
    s.push_str("</svg>\n");
    s
}

/// `NEG_BMD_TAG` coefficient or a constant parsed from `zero`, `neg-bmd`,
/// `const:<v>`.
pub fn parse_drift(spec: &str) -> Result<CoefficientFunction> {
    match spec {
        "zero" => Ok(CoefficientFunction::constant(0.0)),
        NEG_BMD_TAG => Ok(neg_b_bmd()),
        _ => parse_constant(spec).map(CoefficientFunction::constant),
    }
}

/// A number or `const:<v>`.
pub fn parse_constant(spec: &str) -> Result<f64> {
    let v = spec.strip_prefix("const:").unwrap_or(spec);
    v.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("cannot parse coefficient {spec}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = RngStream::new(seed, 0).rng();
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn identical_samples() {
        let x = normals(50, 1);
        let r = ks_two_sample(&x, &x).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn separated_samples() {
        let x = normals(2000, 2);
        let y: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
        assert!(ks_two_sample(&x, &y).unwrap().p_value < 1e-10);
    }

    #[test]
    fn empty_sample_is_error() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn unit_weights_match_plain_test() {
        let x = normals(300, 3);
        let y = normals(200, 4);
        let a = ks_two_sample(&x, &y).unwrap();
        let b = weighted_ks(&x, &vec![1.0; 300], &y).unwrap();
        assert_eq!(a.statistic, b.statistic);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for l in [1.1, 1.18, 1.25] {
            let c = PI * PI / (8.0 * l * l);
            let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
            let small = 1.0 - (2.0 * PI).sqrt() / l * s;
            let big: f64 = 2.0 * (1..=100).map(|k| if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * (k * k) as f64 * l * l).exp()).sum::<f64>();
            assert!((small - big).abs() < 1e-12);
        }
    }

    #[test]
    fn config_overrides_and_validation() {
        let v = serde_json::json!({"n_paths": 150, "seed": 9});
        let c = ExperimentConfig::from_json(Preset::Thm42, &v).unwrap();
        assert_eq!((c.n_paths, c.seed, c.xi0), (150, 9, 2.0));
        assert!(ExperimentConfig::from_json(Preset::Thm42, &serde_json::json!({"n_paths": 10})).is_err());
        assert!(ExperimentConfig::from_json(Preset::Thm42, &serde_json::json!({"bogus": 1})).is_err());
    }

    #[test]
    fn empty_directory_is_error() {
        let d = tempfile::tempdir().unwrap();
        let e = emit_report(d.path()).unwrap_err().to_string();
        assert!(e.contains(ARTIFACTS_FILE) && e.contains(TRACE_DIR));
    }

    #[test]
    fn single_trace_gives_one_polyline() {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir(d.path().join(TRACE_DIR)).unwrap();
        std::fs::write(d.path().join(TRACE_DIR).join("a.csv"), "t,driver,tip_re,tip_im\n0,0,0,0\n0.1,0.1,0.2,0.6\n").unwrap();
        emit_report(d.path()).unwrap();
        let svg = std::fs::read_to_string(d.path().join("report.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("Re z, Im z"));
    }
}
