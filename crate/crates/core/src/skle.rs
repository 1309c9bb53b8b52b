//! Stochastic Komatu-Loewner evolution.
//!
//! One step solves the slit kernel at `(s - xi, 0)`, advances the driver and
//! slits by Euler-Maruyama, and advances the Komatu-Loewner flow by a split
//! step: the regular part `-2 pi h` by a midpoint rule, then the exact chordal
//! step frozen at the new driver value. Tips follow from composing inverse
//! steps; zipping them gives the chordal driver `U` and the capacity `a`, and
//! `Phi_t = g_t^0 o g_t^{-1}` is differentiated at `xi(t)` by Cauchy integrals
//! on a circle closed by reflection.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::abm_mc::RngStream;
use crate::bmd_kernel::{drift_from_kernel, SlitKernel, NEG_BMD_TAG};
use crate::chordal::{forward_step, inverse_step, swallow_threshold, ChordalFlow, DrivingFunction, Interpolation};
use crate::error::{Error, Result};
use crate::geometry::{check_point, segment_distance, CoefficientFunction, ComplexPoint, HullProbe, SlitVector, SwallowTime, DEFAULT_SLIT_GAP};

/// Why a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    SlitDegeneracy,
    CapacityTarget,
    /// The trace reached one of the original slits.
    SlitContact,
    CoefficientFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkleOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Degeneracy threshold relative to the initial minimal slit height.
    pub y_min_factor: f64,
    pub slit_gap: f64,
    /// Half-plane capacity of the hull at which the run stops.
    pub capacity_target: Option<f64>,
    pub track_tips: bool,
    pub track_phi: bool,
    /// Nodes on the Cauchy circle (even).
    pub phi_nodes: usize,
}

impl SkleOptions {
    pub fn new(dt: f64, t_max: f64) -> Self {
        SkleOptions {
            dt,
            t_max,
            y_min_factor: 1e-3,
            slit_gap: DEFAULT_SLIT_GAP,
            capacity_target: None,
            track_tips: true,
            track_phi: false,
            phi_nodes: 32,
        }
    }
}

/// Kernel and driver data frozen over one step.
#[derive(Clone, Debug)]
struct Step {
    u: f64,
    dt: f64,
    xi: f64,
    kernel: Option<SlitKernel>,
}

impl Step {
    #[inline]
    fn field(&self, z: Complex64) -> Complex64 {
        match &self.kernel {
            Some(k) => -2.0 * PI * k.correction(z - self.xi),
            None => Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn regular_forward(&self, z: Complex64) -> Complex64 {
        if self.kernel.is_none() {
            return z;
        }
        let mid = z + 0.5 * self.dt * self.field(z);
        z + self.dt * self.field(mid)
    }

    #[inline]
    fn regular_inverse(&self, w: Complex64) -> Complex64 {
        if self.kernel.is_none() {
            return w;
        }
        let mid = w - 0.5 * self.dt * self.field(w);
        w - self.dt * self.field(mid)
    }

    #[inline]
    fn forward(&self, z: Complex64) -> Complex64 {
        forward_step(self.regular_forward(z), self.u, self.dt)
    }

    #[inline]
    fn inverse(&self, w: Complex64) -> Complex64 {
        let mut z = self.regular_inverse(inverse_step(w, self.u, self.dt));
        if z.im < 0.0 {
            z.im = 0.0;
        }
        z
    }
}

/// Discretized joint path of the driver and the slits.
#[derive(Clone, Debug, Serialize)]
pub struct DrivingRecord {
    pub times: Vec<f64>,
    pub xi: Vec<f64>,
    pub slits: Vec<SlitVector>,
    /// Brownian increment of each step.
    pub increments: Vec<f64>,
    /// Coefficients used by each step.
    pub alpha: Vec<f64>,
    pub b: Vec<f64>,
    pub b_bmd: Vec<f64>,
    pub stopped: StopReason,
    pub diagnostic: Option<String>,
}

impl DrivingRecord {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// The driver as a chordal driving function with the step convention of
    /// the engine (each step frozen at its right node).
    pub fn driving_function(&self) -> Result<DrivingFunction> {
        DrivingFunction::with_interpolation(self.times.clone(), self.xi.clone(), Interpolation::LeftOpen)
    }
}

/// A finished run with its derived paths. Per-node vectors have one entry per
/// time node; entries not tracked are `NaN`.
#[derive(Clone, Debug, Serialize)]
pub struct SkleRun {
    pub record: DrivingRecord,
    pub tips: Vec<ComplexPoint>,
    /// Zipper steps `(u, dtau)` attaching each tip; node 0 holds `(xi0, 0)`.
    pub zipper: Vec<(f64, f64)>,
    /// `U(t)` per node.
    pub u_path: Vec<f64>,
    /// Half-plane capacity of the hull per node, from the zipper.
    pub a_path: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub phi_doubleprime: Vec<f64>,
    /// `Phi_t(xi(t))` from the Cauchy circle mean, a consistency check on `U`.
    pub phi_center: Vec<f64>,
    /// Largest jump of `g_t^0` at fixed probe points between adjacent nodes.
    pub continuity_jump: f64,
    #[serde(skip)]
    steps: Vec<Step>,
}

/// Step-by-step integrator.
pub struct SkleRunner<'a> {
    alpha: &'a CoefficientFunction,
    b: &'a CoefficientFunction,
    opts: SkleOptions,
    s0: SlitVector,
    y_min: f64,
    steps: Vec<Step>,
    rec: DrivingRecord,
    tips: Vec<ComplexPoint>,
    flow: ChordalFlow,
    zipper: Vec<(f64, f64)>,
    u_path: Vec<f64>,
    a_path: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    phic: Vec<f64>,
    probes: Vec<ComplexPoint>,
    jump: f64,
    done: bool,
}

impl<'a> SkleRunner<'a> {
    pub fn new(s0: &SlitVector, xi0: f64, alpha: &'a CoefficientFunction, b: &'a CoefficientFunction, opts: SkleOptions) -> Result<Self> {
        if !(opts.dt > 0.0 && opts.t_max > 0.0) {
            return Err(Error::InvalidParameter("dt and t_max must be positive".into()));
        }
        if !xi0.is_finite() {
            return Err(Error::NonFinite("initial driver"));
        }
        if opts.track_phi && (!opts.track_tips || opts.phi_nodes < 4 || opts.phi_nodes % 2 != 0) {
            return Err(Error::InvalidParameter("Phi tracking needs tips and an even node count >= 4".into()));
        }
        let scale = if s0.is_empty() { 1.0 } else { s0.extent().max(1.0) };
        let probes = [Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0), Complex64::new(-1.0, 1.0)]
            .iter()
            .map(|p| xi0 + scale * p)
            .collect();
        Ok(SkleRunner {
            alpha,
            b,
            y_min: if s0.is_empty() { 0.0 } else { opts.y_min_factor * s0.min_height() },
            opts,
            s0: s0.clone(),
            steps: Vec::new(),
            rec: DrivingRecord {
                times: vec![0.0],
                xi: vec![xi0],
                slits: vec![s0.clone()],
                increments: Vec::new(),
                alpha: Vec::new(),
                b: Vec::new(),
                b_bmd: Vec::new(),
                stopped: StopReason::Horizon,
                diagnostic: None,
            },
            tips: vec![Complex64::new(xi0, 0.0)],
            flow: ChordalFlow::new(),
            zipper: vec![(xi0, 0.0)],
            u_path: vec![xi0],
            a_path: vec![0.0],
            phi1: vec![1.0],
            phi2: vec![0.0],
            phic: vec![xi0],
            probes,
            jump: 0.0,
            done: false,
        })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.done.then_some(self.rec.stopped)
    }

    pub fn last_tip(&self) -> ComplexPoint {
        *self.tips.last().unwrap()
    }

    /// Zipper step `(u, dtau)` of the latest node.
    pub fn last_zip(&self) -> (f64, f64) {
        *self.zipper.last().unwrap()
    }

    pub fn time(&self) -> f64 {
        *self.rec.times.last().unwrap()
    }

    pub fn nodes(&self) -> usize {
        self.rec.times.len()
    }

    pub fn capacity(&self) -> f64 {
        *self.a_path.last().unwrap()
    }

    fn stop(&mut self, reason: StopReason, diag: Option<String>) -> StopReason {
        self.done = true;
        self.rec.stopped = reason;
        self.rec.diagnostic = diag;
        reason
    }

    /// Advances one step with Brownian increment `db`; returns the stop
    /// reason once the run has ended.
    pub fn step(&mut self, db: f64) -> Option<StopReason> {
        if self.done {
            return Some(self.rec.stopped);
        }
        let k = self.rec.times.len() - 1;
        let dt = self.opts.dt.min(self.opts.t_max - self.rec.times[k]);
        let xi = self.rec.xi[k];
        let s = self.rec.slits[k].clone();
        let rel = s.shift(xi);
        let (kernel, drift, bbmd) = if s.is_empty() {
            (None, Vec::new(), 0.0)
        } else {
            match SlitKernel::solve(&rel, 0.0) {
                Ok(kn) => {
                    let (d, c) = drift_from_kernel(&kn);
                    (Some(kn), d, c)
                }
                Err(e) => return Some(self.stop(StopReason::CoefficientFailure, Some(e.to_string()))),
            }
        };
        let a = match self.alpha.eval(&rel) {
            Ok(v) => v,
            Err(e) => return Some(self.stop(StopReason::CoefficientFailure, Some(format!("alpha: {e}")))),
        };
        let bv = if self.b.tag() == Some(NEG_BMD_TAG) {
            -bbmd
        } else {
            match self.b.eval(&rel) {
                Ok(v) => v,
                Err(e) => return Some(self.stop(StopReason::CoefficientFailure, Some(format!("b: {e}")))),
            }
        };
        let xi1 = xi + a * db + bv * dt;
        let s1 = if s.is_empty() {
            s.clone()
        } else {
            let flat: Vec<f64> = s.to_flat().iter().zip(&drift).map(|(v, d)| v + d * dt).collect();
            match SlitVector::from_flat_with_gap(&flat, self.opts.slit_gap) {
                Ok(v) if v.min_height() >= self.y_min => v,
                Ok(v) => {
                    return Some(self.stop(StopReason::SlitDegeneracy, Some(format!("slit height {:e} below threshold", v.min_height()))))
                }
                Err(e) => return Some(self.stop(StopReason::SlitDegeneracy, Some(e.to_string()))),
            }
        };
        if !xi1.is_finite() {
            return Some(self.stop(StopReason::CoefficientFailure, Some("non-finite driver".into())));
        }
        self.steps.push(Step { u: xi1, dt, xi, kernel });
        let t1 = self.rec.times[k] + dt;
        self.rec.times.push(t1);
        self.rec.xi.push(xi1);
        self.rec.slits.push(s1);
        self.rec.increments.push(db);
        self.rec.alpha.push(a);
        self.rec.b.push(bv);
        self.rec.b_bmd.push(bbmd);
        if self.opts.track_tips {
            let n = self.steps.len();
            let tip = tip_from_steps(&self.steps, n);
            let prev = *self.tips.last().unwrap();
            self.tips.push(tip);
            let zip = self.flow.zip_point(tip);
            self.zipper.push(zip);
            self.u_path.push(zip.0);
            self.a_path.push(2.0 * self.flow.time());
            let mut jump: f64 = 0.0;
            if zip.1 > 0.0 {
                for p in self.probes.iter_mut() {
                    let q = forward_step(*p, zip.0, zip.1);
                    jump = jump.max((q - *p).norm());
                    *p = q;
                }
            }
            self.jump = self.jump.max(jump);
            if self.opts.track_phi {
                match phi_derivatives(&self.steps, &self.flow, xi1, &self.rec.slits[n], self.opts.phi_nodes) {
                    Ok((p1, p2, c)) => {
                        self.phi1.push(p1);
                        self.phi2.push(p2);
                        self.phic.push(c);
                    }
                    Err(e) => return Some(self.stop(StopReason::CoefficientFailure, Some(format!("Phi: {e}")))),
                }
            } else {
                self.phi1.push(f64::NAN);
                self.phi2.push(f64::NAN);
                self.phic.push(f64::NAN);
            }
            if touches_slit(&self.s0, prev, tip, 2.0 * dt.sqrt()) {
                return Some(self.stop(StopReason::SlitContact, None));
            }
            if let Some(target) = self.opts.capacity_target {
                if self.capacity() >= target {
                    return Some(self.stop(StopReason::CapacityTarget, None));
                }
            }
        } else {
            self.u_path.push(f64::NAN);
            self.a_path.push(f64::NAN);
            self.phi1.push(f64::NAN);
            self.phi2.push(f64::NAN);
            self.phic.push(f64::NAN);
        }
        if t1 >= self.opts.t_max * (1.0 - 1e-12) {
            return Some(self.stop(StopReason::Horizon, None));
        }
        None
    }

    /// Runs to completion with increments from `stream`.
    pub fn run_with_stream(mut self, stream: RngStream) -> SkleRun {
        let mut rng = stream.rng();
        let sd = self.opts.dt.sqrt();
        while !self.done {
            let n: f64 = rng.sample(StandardNormal);
            self.step(sd * n);
        }
        self.finish()
    }

    /// Runs with given increments; stops at the horizon or when they run out.
    pub fn run_with_increments(mut self, increments: &[f64]) -> SkleRun {
        for &db in increments {
            if self.done {
                break;
            }
            self.step(db);
        }
        if !self.done {
            self.stop(StopReason::Horizon, Some("increments exhausted".into()));
        }
        self.finish()
    }

    pub fn finish(self) -> SkleRun {
        SkleRun {
            record: self.rec,
            tips: self.tips,
            zipper: self.zipper,
            u_path: self.u_path,
            a_path: self.a_path,
            phi_prime: self.phi1,
            phi_doubleprime: self.phi2,
            phi_center: self.phic,
            continuity_jump: self.jump,
            steps: self.steps,
        }
    }
}

/// Tip at node `n`: the preimage of the slit `[xi_n, xi_n + 2i sqrt(dt)]`
/// attached by the last step.
fn tip_from_steps(steps: &[Step], n: usize) -> ComplexPoint {
    let mut w = Complex64::new(steps[n - 1].u, 0.0);
    for st in steps[..n].iter().rev() {
        w = st.inverse(w);
    }
    w
}

/// Whether the step from `p` to `q` crosses a slit or ends within `eps` of one.
pub fn touches_slit(s: &SlitVector, p: ComplexPoint, q: ComplexPoint, eps: f64) -> bool {
    for j in 0..s.len() {
        let (a, b) = (s.left(j), s.right(j));
        if segment_distance(q, a, b).0 < eps {
            return true;
        }
        let y = s.y()[j];
        if (p.im - y) * (q.im - y) <= 0.0 && p.im != q.im {
            let t = (y - p.im) / (q.im - p.im);
            let x = p.re + t * (q.re - p.re);
            if x >= a.re && x <= b.re {
                return true;
            }
        }
    }
    false
}

/// `(Phi'_t(xi), Phi''_t(xi), Re Phi_t(xi))` from the circle of radius `r`
/// around `xi`, with the lower half supplied by reflection.
fn phi_derivatives(steps: &[Step], flow: &ChordalFlow, xi: f64, s: &SlitVector, m: usize) -> Result<(f64, f64, f64)> {
    if s.is_empty() {
        return Ok((1.0, 0.0, xi));
    }
    let d = s.distance(Complex64::new(xi, 0.0)).0;
    let mut r = (0.5 * d).min(0.5);
    for _ in 0..4 {
        if let Some(v) = cauchy_circle(steps, flow, xi, r, m) {
            return Ok(v);
        }
        r *= 0.5;
    }
    Err(Error::NoConvergence("Cauchy circle left the domain after 3 reductions".into()))
}

fn cauchy_circle(steps: &[Step], flow: &ChordalFlow, xi: f64, r: f64, m: usize) -> Option<(f64, f64, f64)> {
    let mut d1 = Complex64::new(0.0, 0.0);
    let mut d2 = Complex64::new(0.0, 0.0);
    let mut c = Complex64::new(0.0, 0.0);
    for j in 0..m / 2 {
        let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
        let e = Complex64::from_polar(1.0, th);
        let mut w = xi + r * e;
        for st in steps.iter().rev() {
            w = st.inverse(w);
        }
        let v = flow.apply(w);
        if !(v.re.is_finite() && v.im.is_finite()) || v.im <= 0.0 {
            return None;
        }
        // the reflected node contributes the conjugate
        for (val, ee) in [(v, e), (v.conj(), e.conj())] {
            c += val;
            d1 += val / ee;
            d2 += val / (ee * ee);
        }
    }
    let mf = m as f64;
    Some(((d1 / (mf * r)).re, (2.0 * d2 / (mf * r * r)).re, (c / mf).re))
}

impl SkleRun {
    pub fn len(&self) -> usize {
        self.record.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record.times.is_empty()
    }

    /// Capacity clock `a(t) = 2 int Phi'^2` by the trapezoid rule.
    pub fn capacity_clock(&self) -> Vec<f64> {
        capacity_clock(&self.record.times, &self.phi_prime)
    }

    /// Integrates the Komatu-Loewner flow for `z`; returns the image at the
    /// end of the run or the swallow time.
    pub fn flow_point(&self, z: ComplexPoint) -> Result<(SwallowTime, Option<ComplexPoint>)> {
        check_point(z, "flow_point")?;
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
        }
        if self.record.slits[0].distance(z).0 == 0.0 {
            return Err(Error::Domain(format!("{z} lies on a slit")));
        }
        let mut g = z;
        for (k, st) in self.steps.iter().enumerate() {
            g = st.forward(g);
            if !(g.re.is_finite() && g.im.is_finite()) || (g - st.u).norm() < swallow_threshold(st.dt) {
                return Ok((SwallowTime::At(self.record.times[k + 1]), None));
            }
        }
        Ok((SwallowTime::Never, Some(g)))
    }

    /// Swallow times of `query` under the Komatu-Loewner flow, with final images.
    pub fn kle_integrate(&self, query: &[ComplexPoint]) -> Result<(HullProbe, Vec<Option<ComplexPoint>>)> {
        let mut times = Vec::with_capacity(query.len());
        let mut images = Vec::with_capacity(query.len());
        for &z in query {
            let (t, g) = self.flow_point(z)?;
            times.push(t);
            images.push(g);
        }
        Ok((HullProbe::new(query.to_vec(), times)?, images))
    }

    /// Reparametrized driver `U(a^{-1}(2t))` on the zipper clock, with the
    /// node index of each retained step.
    pub fn reparametrize(&self) -> Result<Reparametrized> {
        let mut times = vec![0.0];
        let mut values = vec![self.u_path[0]];
        let mut nodes = vec![0];
        let mut t = 0.0;
        for (k, &(u, dtau)) in self.zipper.iter().enumerate().skip(1) {
            if dtau > 0.0 {
                t += dtau;
                times.push(t);
                values.push(u);
                nodes.push(k);
            }
        }
        if !self.u_path[0].is_finite() || times.len() < 2 {
            return Err(Error::Degenerate("run has no tracked capacity".into()));
        }
        let driver = DrivingFunction::with_interpolation(times, values, Interpolation::LeftOpen)?;
        Ok(Reparametrized { driver, nodes })
    }

    /// Swallow times on the capacity clock `a(t)/2`.
    pub fn checked_probe(&self, query: &[ComplexPoint]) -> Result<HullProbe> {
        let (probe, _) = self.kle_integrate(query)?;
        let times = &self.record.times;
        let a = &self.a_path;
        Ok(probe.map_times(|t| {
            let k = times.partition_point(|&s| s < t - 1e-15).min(times.len() - 1);
            0.5 * a[k]
        }))
    }

    /// Residuals of the driver reconstruction on the raw clock and on the
    /// capacity clock against the direct `U`.
    pub fn u_decomposition_check(&self) -> Result<DecompositionResidual> {
        let n = self.len();
        if self.phi_prime.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("decomposition needs Phi tracking".into()));
        }
        let rec = &self.record;
        let mut e12 = rec.xi[0];
        let mut s36 = rec.xi[0];
        let (mut r12, mut r36): (f64, f64) = (0.0, 0.0);
        for k in 0..n - 1 {
            let dt = rec.times[k + 1] - rec.times[k];
            let (p1, p2) = (self.phi_prime[k], self.phi_doubleprime[k]);
            let (al, bv, bb) = (rec.alpha[k], rec.b[k], rec.b_bmd[k]);
            e12 += p1 * al * rec.increments[k] + p1 * (bb + bv) * dt + p2 * (0.5 * al * al - 3.0) * dt;
            let dtau = self.zipper[k + 1].1;
            s36 += (bv + bb) / p1 * dtau + 0.5 * p2 / (p1 * p1) * (al * al - 6.0) * dtau + al * p1 * rec.increments[k];
            r12 = r12.max((e12 - self.u_path[k + 1]).abs());
            r36 = r36.max((s36 - self.u_path[k + 1]).abs());
        }
        Ok(DecompositionResidual { raw_clock: r12, capacity_clock: r36 })
    }

    /// Log of the Girsanov weight per node, removing the drift of `U / alpha`
    /// on the capacity clock; `alpha` must be a positive constant.
    pub fn girsanov_log_weights(&self, alpha: f64) -> Result<Vec<f64>> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter("alpha must be a positive constant".into()));
        }
        if self.phi_prime.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("Girsanov weights need Phi tracking".into()));
        }
        let rec = &self.record;
        let mut lw = vec![0.0];
        let mut acc = 0.0;
        for k in 0..self.len() - 1 {
            let dt = rec.times[k + 1] - rec.times[k];
            let (p1, p2) = (self.phi_prime[k], self.phi_doubleprime[k]);
            let drift = (rec.b[k] + rec.b_bmd[k]) / p1 + 0.5 * p2 / (p1 * p1) * (alpha * alpha - 6.0);
            let theta = drift / alpha;
            let dbc = p1 * rec.increments[k];
            let dtc = p1 * p1 * dt;
            acc += -theta * dbc - 0.5 * theta * theta * dtc;
            if !acc.is_finite() {
                return Err(Error::NonFinite("Girsanov exponent"));
            }
            lw.push(acc);
        }
        Ok(lw)
    }

    pub fn girsanov_weight(&self, alpha: f64) -> Result<Vec<f64>> {
        Ok(self.girsanov_log_weights(alpha)?.into_iter().map(f64::exp).collect())
    }

    /// Run CSV `t,xi,u,a,phi1,phi2,y1..yN,x1..xN,xr1..xrN`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n = self.record.slits[0].len();
        let mut head = String::from("t,xi,u,a,phi1,phi2");
        for p in ["y", "x", "xr"] {
            for j in 1..=n {
                head.push_str(&format!(",{p}{j}"));
            }
        }
        writeln!(f, "{head}")?;
        for k in 0..self.len() {
            write!(
                f,
                "{},{},{},{},{},{}",
                self.record.times[k], self.record.xi[k], self.u_path[k], self.a_path[k], self.phi_prime[k], self.phi_doubleprime[k]
            )?;
            for v in self.record.slits[k].to_flat() {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    /// Trace point at half-plane capacity `a`, interpolated linearly between
    /// nodes; `None` when the run ended earlier.
    pub fn tip_at_capacity(&self, a: f64) -> Option<ComplexPoint> {
        tip_at_capacity(&self.tips, &self.a_path, a)
    }
}

/// Linear interpolation of tips at a capacity level.
pub fn tip_at_capacity(tips: &[ComplexPoint], a_path: &[f64], a: f64) -> Option<ComplexPoint> {
    let k = a_path.partition_point(|&v| v < a);
    if k >= a_path.len() {
        return None;
    }
    if k == 0 {
        return Some(tips[0]);
    }
    let (a0, a1) = (a_path[k - 1], a_path[k]);
    let w = if a1 > a0 { (a - a0) / (a1 - a0) } else { 1.0 };
    Some(tips[k - 1] * (1.0 - w) + tips[k] * w)
}

/// Trapezoid integral of `2 Phi'^2`.
pub fn capacity_clock(times: &[f64], phi_prime: &[f64]) -> Vec<f64> {
    let mut a = vec![0.0; times.len()];
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        a[k] = a[k - 1] + h * (phi_prime[k - 1].powi(2) + phi_prime[k].powi(2));
    }
    a
}

#[derive(Clone, Debug, Serialize)]
pub struct Reparametrized {
    /// `U` on the capacity clock, piecewise constant on `(t_{k-1}, t_k]`.
    pub driver: DrivingFunction,
    /// Run node of each driver node.
    pub nodes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecompositionResidual {
    pub raw_clock: f64,
    pub capacity_clock: f64,
}

/// Euler-Maruyama path of the driver and slits without hull tracking.
#[allow(clippy::too_many_arguments)]
pub fn solve_sde(
    s0: &SlitVector,
    xi0: f64,
    alpha: &CoefficientFunction,
    b: &CoefficientFunction,
    dt: f64,
    t_max: f64,
    stream: RngStream,
) -> Result<DrivingRecord> {
    let opts = SkleOptions { track_tips: false, ..SkleOptions::new(dt, t_max) };
    Ok(SkleRunner::new(s0, xi0, alpha, b, opts)?.run_with_stream(stream).record)
}

/// Full run with tips, zipper and `Phi` derivatives.
pub fn run_skle(
    s0: &SlitVector,
    xi0: f64,
    alpha: &CoefficientFunction,
    b: &CoefficientFunction,
    opts: SkleOptions,
    stream: RngStream,
) -> Result<SkleRun> {
    Ok(SkleRunner::new(s0, xi0, alpha, b, opts)?.run_with_stream(stream))
}

/// JSON manifest written next to a run CSV.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub slits: SlitVector,
    pub xi0: f64,
    pub alpha: String,
    pub b: String,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub nodes: usize,
    pub stopped: StopReason,
    pub diagnostic: Option<String>,
    pub final_capacity: f64,
    pub continuity_jump: f64,
    pub max_u_phi_mismatch: f64,
}

impl RunManifest {
    pub fn new(run: &SkleRun, alpha: &str, b: &str, opts: &SkleOptions, seed: u64) -> Self {
        let mism = run
            .u_path
            .iter()
            .zip(&run.phi_center)
            .filter(|(u, c)| u.is_finite() && c.is_finite())
            .map(|(u, c)| (u - c).abs())
            .fold(0.0, f64::max);
        RunManifest {
            slits: run.record.slits[0].clone(),
            xi0: run.record.xi[0],
            alpha: alpha.to_string(),
            b: b.to_string(),
            dt: opts.dt,
            t_max: opts.t_max,
            seed,
            nodes: run.len(),
            stopped: run.record.stopped,
            diagnostic: run.record.diagnostic.clone(),
            final_capacity: *run.a_path.last().unwrap(),
            continuity_jump: run.continuity_jump,
            max_u_phi_mismatch: mism,
        }
    }
}
