//! Plane geometry, the slit space, hull probes and coefficient functions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane. Public operations reject non-finite coordinates.
pub type ComplexPoint = Complex64;

/// Default minimal separation between slits.
pub const DEFAULT_SLIT_GAP: f64 = 1e-9;

pub fn check_point(z: ComplexPoint, what: &'static str) -> Result<ComplexPoint> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Largest modulus over a nonempty point set.
pub fn radius(points: &[ComplexPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Domain("radius of an empty set".into()));
    }
    let mut r: f64 = 0.0;
    for &p in points {
        check_point(p, "radius")?;
        r = r.max(p.norm());
    }
    Ok(r)
}

/// Distance from `z` to the closed segment `[a, b]`, with the nearest point.
pub fn segment_distance(z: ComplexPoint, a: ComplexPoint, b: ComplexPoint) -> (f64, ComplexPoint) {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 > 0.0 {
        (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let p = a + d * t;
    ((z - p).norm(), p)
}

/// A point of the slit space: N disjoint horizontal segments
/// `[x_j + i y_j, xr_j + i y_j]` in the upper half-plane.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlitVector {
    y: Vec<f64>,
    x: Vec<f64>,
    xr: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSlits {
    y: Vec<f64>,
    x: Vec<f64>,
    xr: Vec<f64>,
}

impl<'de> Deserialize<'de> for SlitVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSlits::deserialize(d)?;
        SlitVector::new(raw.y, raw.x, raw.xr).map_err(serde::de::Error::custom)
    }
}

impl SlitVector {
    pub fn new(y: Vec<f64>, x: Vec<f64>, xr: Vec<f64>) -> Result<Self> {
        Self::with_gap(y, x, xr, DEFAULT_SLIT_GAP)
    }

    /// The empty configuration (the half-plane itself).
    pub fn empty() -> Self {
        SlitVector { y: vec![], x: vec![], xr: vec![] }
    }

    pub fn single(y: f64, x: f64, xr: f64) -> Result<Self> {
        Self::new(vec![y], vec![x], vec![xr])
    }

    /// Validates membership with a custom minimal gap between slits.
    pub fn with_gap(y: Vec<f64>, x: Vec<f64>, xr: Vec<f64>, gap: f64) -> Result<Self> {
        let n = y.len();
        if x.len() != n || xr.len() != n {
            return Err(Error::InvalidGeometry(format!(
                "component lengths differ: y={}, x={}, xr={}",
                n,
                x.len(),
                xr.len()
            )));
        }
        if !(gap > 0.0) {
            return Err(Error::InvalidParameter("slit gap must be positive".into()));
        }
        for j in 0..n {
            if !(y[j].is_finite() && x[j].is_finite() && xr[j].is_finite()) {
                return Err(Error::NonFinite("slit vector"));
            }
            if y[j] <= 0.0 {
                return Err(Error::InvalidGeometry(format!("slit {j} has height {} <= 0", y[j])));
            }
            if x[j] >= xr[j] {
                return Err(Error::InvalidGeometry(format!(
                    "slit {j} has x = {} >= xr = {}",
                    x[j], xr[j]
                )));
            }
        }
        let s = SlitVector { y, x, xr };
        for j in 0..n {
            for k in j + 1..n {
                let d = s.slit_distance(j, k);
                if d < gap {
                    return Err(Error::InvalidGeometry(format!(
                        "slits {j} and {k} are {d:e} apart (minimum gap {gap:e})"
                    )));
                }
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xr(&self) -> &[f64] {
        &self.xr
    }

    pub fn left(&self, j: usize) -> ComplexPoint {
        ComplexPoint::new(self.x[j], self.y[j])
    }

    pub fn right(&self, j: usize) -> ComplexPoint {
        ComplexPoint::new(self.xr[j], self.y[j])
    }

    pub fn center(&self, j: usize) -> ComplexPoint {
        ComplexPoint::new(0.5 * (self.x[j] + self.xr[j]), self.y[j])
    }

    pub fn half_length(&self, j: usize) -> f64 {
        0.5 * (self.xr[j] - self.x[j])
    }

    /// Euclidean distance between slits `j` and `k`.
    pub fn slit_distance(&self, j: usize, k: usize) -> f64 {
        let dy = (self.y[j] - self.y[k]).abs();
        let dx = (self.x[k] - self.xr[j]).max(self.x[j] - self.xr[k]).max(0.0);
        dx.hypot(dy)
    }

    /// Smallest distance between two distinct slits, infinite for N < 2.
    pub fn min_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for j in 0..self.len() {
            for k in j + 1..self.len() {
                g = g.min(self.slit_distance(j, k));
            }
        }
        g
    }

    pub fn min_height(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Distance from `z` to the union of the slits, with the slit index.
    pub fn distance(&self, z: ComplexPoint) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..self.len() {
            let (d, _) = segment_distance(z, self.left(j), self.right(j));
            if d < best.0 {
                best = (d, j);
            }
        }
        best
    }

    /// Translate horizontally by `-xi`.
    pub fn shift(&self, xi: f64) -> SlitVector {
        SlitVector {
            y: self.y.clone(),
            x: self.x.iter().map(|v| v - xi).collect(),
            xr: self.xr.iter().map(|v| v - xi).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Result<SlitVector> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale factor {c} must be positive")));
        }
        Ok(SlitVector {
            y: self.y.iter().map(|v| v * c).collect(),
            x: self.x.iter().map(|v| v * c).collect(),
            xr: self.xr.iter().map(|v| v * c).collect(),
        })
    }

    /// Flattened `(y, x, xr)` as a 3N vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.len());
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.xr);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<SlitVector> {
        Self::from_flat_with_gap(v, DEFAULT_SLIT_GAP)
    }

    pub fn from_flat_with_gap(v: &[f64], gap: f64) -> Result<SlitVector> {
        if v.len() % 3 != 0 {
            return Err(Error::InvalidGeometry(format!("flat length {} not divisible by 3", v.len())));
        }
        let n = v.len() / 3;
        Self::with_gap(v[..n].to_vec(), v[n..2 * n].to_vec(), v[2 * n..].to_vec(), gap)
    }

    /// Sum of absolute componentwise differences.
    pub fn l1_distance(&self, other: &SlitVector) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Largest modulus of a slit endpoint, zero for N = 0.
    pub fn extent(&self) -> f64 {
        (0..self.len())
            .map(|j| self.left(j).norm().max(self.right(j).norm()))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for SlitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len() {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[{}, {}]@{}", self.x[j], self.xr[j], self.y[j])?;
        }
        Ok(())
    }
}

/// Homogeneity degree of a coefficient function on the slit space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Homogeneity {
    Zero,
    MinusOne,
}

impl Homogeneity {
    pub fn exponent(self) -> i32 {
        match self {
            Homogeneity::Zero => 0,
            Homogeneity::MinusOne => -1,
        }
    }
}

type Evaluator = dyn Fn(&SlitVector) -> Result<f64> + Send + Sync;

/// A real function on the slit space with a declared homogeneity degree.
#[derive(Clone)]
pub struct CoefficientFunction {
    evaluator: Arc<Evaluator>,
    degree: Homogeneity,
    lipschitz_probe_radius: f64,
    constant: Option<f64>,
    tag: Option<&'static str>,
}

impl fmt::Debug for CoefficientFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientFunction")
            .field("degree", &self.degree)
            .field("constant", &self.constant)
            .field("tag", &self.tag)
            .finish()
    }
}

/// Outcome of a homogeneity self-test.
#[derive(Clone, Copy, Debug)]
pub struct HomogeneityCheck {
    pub at_s: f64,
    pub at_cs: f64,
    pub expected: f64,
    pub relative_error: f64,
}

impl CoefficientFunction {
    pub fn new<F>(degree: Homogeneity, f: F) -> Self
    where
        F: Fn(&SlitVector) -> Result<f64> + Send + Sync + 'static,
    {
        CoefficientFunction {
            evaluator: Arc::new(f),
            degree,
            lipschitz_probe_radius: 1e-3,
            constant: None,
            tag: None,
        }
    }

    /// The constant function (degree 0 in the strict sense; a constant drift
    /// is also accepted where the engine is run without slits).
    pub fn constant(v: f64) -> Self {
        CoefficientFunction {
            evaluator: Arc::new(move |_| Ok(v)),
            degree: Homogeneity::Zero,
            lipschitz_probe_radius: 1e-3,
            constant: Some(v),
            tag: None,
        }
    }

    pub fn with_probe_radius(mut self, r: f64) -> Self {
        self.lipschitz_probe_radius = r;
        self
    }

    /// Marks the function so that callers holding a cheaper evaluation of the
    /// same quantity can substitute it.
    pub fn with_tag(mut self, tag: &'static str) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn tag(&self) -> Option<&'static str> {
        self.tag
    }

    pub fn degree(&self) -> Homogeneity {
        self.degree
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn eval(&self, s: &SlitVector) -> Result<f64> {
        let v = (self.evaluator)(s)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("coefficient function"))
        }
    }

    /// Compares `f(c s)` with `c^degree f(s)`.
    pub fn homogeneity_check(&self, s: &SlitVector, c: f64) -> Result<HomogeneityCheck> {
        let at_s = self.eval(s)?;
        let at_cs = self.eval(&s.scale(c)?)?;
        let expected = at_s * c.powi(self.degree.exponent());
        let denom = expected.abs().max(f64::MIN_POSITIVE);
        Ok(HomogeneityCheck {
            at_s,
            at_cs,
            expected,
            relative_error: (at_cs - expected).abs() / denom,
        })
    }

    /// Finite-difference estimate of the local Lipschitz constant at `s`,
    /// probing each coordinate at the configured radius.
    pub fn lipschitz_probe(&self, s: &SlitVector) -> Result<f64> {
        let base = self.eval(s)?;
        let flat = s.to_flat();
        let h = self.lipschitz_probe_radius;
        let mut l: f64 = 0.0;
        for k in 0..flat.len() {
            for sign in [-1.0, 1.0] {
                let mut p = flat.clone();
                p[k] += sign * h;
                if let Ok(sp) = SlitVector::from_flat(&p) {
                    l = l.max((self.eval(&sp)? - base).abs() / h);
                }
            }
        }
        Ok(l)
    }
}

/// A swallow time that may be infinite (never swallowed within the run).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum SwallowTime {
    At(f64),
    Never,
}

impl SwallowTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            SwallowTime::At(t) => Some(t),
            SwallowTime::Never => None,
        }
    }

    pub fn is_swallowed_by(self, t: f64) -> bool {
        matches!(self, SwallowTime::At(tz) if tz <= t)
    }

    /// Numeric form with `+inf` as the sentinel.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for SwallowTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwallowTime::At(t) => write!(f, "{t}"),
            SwallowTime::Never => write!(f, "inf"),
        }
    }
}

impl Serialize for SwallowTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SwallowTime::At(t) => s.serialize_f64(*t),
            SwallowTime::Never => s.serialize_str("inf"),
        }
    }
}

/// Query points with their swallow times; `F_t` is the set swallowed by `t`.
#[derive(Clone, Debug, Serialize)]
pub struct HullProbe {
    pub query_points: Vec<ComplexPoint>,
    pub swallow_times: Vec<SwallowTime>,
}

impl HullProbe {
    pub fn new(query_points: Vec<ComplexPoint>, swallow_times: Vec<SwallowTime>) -> Result<Self> {
        if query_points.len() != swallow_times.len() {
            return Err(Error::InvalidParameter("probe points and times differ in length".into()));
        }
        for t in &swallow_times {
            if let SwallowTime::At(v) = t {
                if !(*v >= 0.0) {
                    return Err(Error::InvalidParameter(format!("negative swallow time {v}")));
                }
            }
        }
        Ok(HullProbe { query_points, swallow_times })
    }

    /// Query points swallowed by time `t`.
    pub fn hull_at(&self, t: f64) -> Vec<ComplexPoint> {
        self.query_points
            .iter()
            .zip(&self.swallow_times)
            .filter(|(_, s)| s.is_swallowed_by(t))
            .map(|(p, _)| *p)
            .collect()
    }

    /// Largest absolute difference of swallow times; a finite/infinite
    /// mismatch counts as infinite.
    pub fn max_discrepancy(&self, other: &HullProbe) -> f64 {
        self.swallow_times
            .iter()
            .zip(&other.swallow_times)
            .map(|(a, b)| match (a, b) {
                (SwallowTime::At(x), SwallowTime::At(y)) => (x - y).abs(),
                (SwallowTime::Never, SwallowTime::Never) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Times mapped through a monotone clock change.
    pub fn map_times(&self, f: impl Fn(f64) -> f64) -> HullProbe {
        HullProbe {
            query_points: self.query_points.clone(),
            swallow_times: self
                .swallow_times
                .iter()
                .map(|t| match t {
                    SwallowTime::At(v) => SwallowTime::At(f(*v)),
                    SwallowTime::Never => SwallowTime::Never,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SlitVector {
        SlitVector::single(1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn shift_examples() {
        let s = unit();
        assert_eq!(s.shift(0.0), s);
        let t = s.shift(2.0);
        assert_eq!(t.x(), &[-3.0]);
        assert_eq!(t.xr(), &[-1.0]);
        assert_eq!(t.y(), &[1.0]);
        assert_eq!(t.shift(-2.0), s);
    }

    #[test]
    fn scale_examples() {
        let s = unit();
        assert_eq!(s.scale(1.0).unwrap(), s);
        let t = s.scale(2.0).unwrap();
        assert_eq!(t.to_flat(), vec![2.0, -2.0, 2.0]);
        assert!(s.scale(0.0).is_err());
        assert!(s.scale(-1.0).is_err());
        let back = s.scale(3.0).unwrap().scale(1.0 / 3.0).unwrap();
        for (a, b) in back.to_flat().iter().zip(s.to_flat()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn radius_examples() {
        assert_eq!(radius(&[ComplexPoint::i()]).unwrap(), 1.0);
        let r = radius(&[ComplexPoint::new(1.0, 1.0), ComplexPoint::new(0.0, -2.0)]).unwrap();
        assert_eq!(r, 2.0);
        assert!(radius(&[]).is_err());
    }

    #[test]
    fn rejects_invalid_slits() {
        assert!(SlitVector::single(0.0, 0.0, 1.0).is_err());
        assert!(SlitVector::single(1.0, 1.0, 1.0).is_err());
        assert!(SlitVector::new(vec![1.0, 1.0], vec![0.0, 0.5], vec![1.0, 2.0]).is_err());
        assert!(SlitVector::new(vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SlitVector::new(vec![1.0, 1.0], vec![0.0, 1.1], vec![1.0, 2.0]).is_ok());
        assert!(SlitVector::new(vec![1.0, 2.0], vec![0.0, 0.0], vec![1.0, 1.0]).is_ok());
        assert!(SlitVector::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let s: SlitVector = serde_json::from_str(r#"{"y":[1],"x":[-0.5],"xr":[0.5]}"#).unwrap();
        assert_eq!(s.len(), 1);
        let back: SlitVector = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SlitVector>(r#"{"y":[-1],"x":[0],"xr":[1]}"#).is_err());
    }

    #[test]
    fn constant_is_degree_zero() {
        let f = CoefficientFunction::constant(6f64.sqrt());
        let c = f.homogeneity_check(&unit(), 2.0).unwrap();
        assert!(c.relative_error < 1e-12);
        assert_eq!(f.lipschitz_probe(&unit()).unwrap(), 0.0);
    }

    #[test]
    fn degree_minus_one_self_test() {
        let f = CoefficientFunction::new(Homogeneity::MinusOne, |s: &SlitVector| Ok(1.0 / s.y()[0]));
        let c = f.homogeneity_check(&unit(), 2.5).unwrap();
        assert!(c.relative_error < 1e-12);
    }

    #[test]
    fn probe_monotone_and_sentinel() {
        let p = HullProbe::new(
            vec![ComplexPoint::i(), ComplexPoint::new(10.0, 1.0)],
            vec![SwallowTime::At(0.25), SwallowTime::Never],
        )
        .unwrap();
        assert_eq!(p.hull_at(0.1).len(), 0);
        assert_eq!(p.hull_at(0.3).len(), 1);
        assert_eq!(p.hull_at(1e300).len(), 1);
        assert_eq!(SwallowTime::Never.to_string(), "inf");
    }
}
