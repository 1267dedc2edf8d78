//! Functions on `[0, 1]` and on the grid `[n]/n`.
//!
//! Cells are half-open, `(u - 1/n, u]` for `u` in `{1/n, ..., 1}`, with `x = 0`
//! assigned to the first cell. Continuum integrals use the midpoint rule on a
//! ground grid of [`DEFAULT_QUADRATURE`] points, which integrates
//! piecewise-constant signals exactly whenever their resolution divides the
//! number of ground points.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Number of midpoint-rule ground points used for continuum integrals.
pub const DEFAULT_QUADRATURE: usize = 4096;

/// Step used by finite-difference Lipschitz scans.
pub const LIPSCHITZ_STEP: f64 = 1e-4;

/// Slack factor applied to declared constants in finite-difference checks.
pub const LIPSCHITZ_SLACK: f64 = 1.01;

/// Absolute slack on the incremental bound of [`extend_pl`].
const INCREMENT_TOLERANCE: f64 = 1e-12;

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Zero-based index of the half-open cell `(j/n, (j+1)/n]` containing `x`.
#[inline]
pub fn cell_index(x: f64, n: usize) -> usize {
    let c = (x * n as f64).ceil();
    if c <= 1.0 {
        0
    } else {
        (c as usize - 1).min(n - 1)
    }
}

/// Midpoints `(q + 1/2)/count` of the uniform ground grid.
pub fn midpoints(count: usize) -> impl Iterator<Item = f64> + Clone {
    let h = 1.0 / count as f64;
    (0..count).map(move |q| (q as f64 + 0.5) * h)
}

#[derive(Clone)]
pub enum Representation {
    /// One value per cell at resolution `values.len()`.
    PiecewiseConstant(Arc<[f64]>),
    /// Node values at `0, 1/n, ..., 1`, linear in between (`n + 1` nodes).
    PiecewiseLinear(Arc<[f64]>),
    Analytic(Evaluator),
}

impl fmt::Debug for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PiecewiseConstant(v) => f.debug_tuple("PiecewiseConstant").field(&v.len()).finish(),
            Self::PiecewiseLinear(v) => f.debug_tuple("PiecewiseLinear").field(&(v.len() - 1)).finish(),
            Self::Analytic(_) => f.write_str("Analytic"),
        }
    }
}

/// A real function on `[0, 1]` with range and Lipschitz metadata.
#[derive(Clone, Debug)]
pub struct Signal {
    repr: Representation,
    range_bound: f64,
    lipschitz_const: Option<f64>,
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn max_increment(values: &[f64]) -> f64 {
    values.windows(2).fold(0.0_f64, |m, w| m.max((w[1] - w[0]).abs()))
}

impl Signal {
    pub fn piecewise_constant(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("piecewise-constant signal needs at least one cell".into()));
        }
        let range_bound = max_abs(&values);
        let lipschitz_const = (values.len() == 1).then_some(0.0);
        Ok(Self { repr: Representation::PiecewiseConstant(values.into()), range_bound, lipschitz_const })
    }

    pub fn piecewise_linear(node_values: Vec<f64>) -> Result<Self> {
        if node_values.len() < 2 {
            return Err(Error::InvalidParameter("piecewise-linear signal needs at least two nodes".into()));
        }
        let n = node_values.len() - 1;
        let range_bound = max_abs(&node_values);
        let lipschitz_const = Some(n as f64 * max_increment(&node_values));
        Ok(Self { repr: Representation::PiecewiseLinear(node_values.into()), range_bound, lipschitz_const })
    }

    /// Wraps an evaluator. `range_bound` and `lipschitz_const` are trusted.
    pub fn analytic<F>(f: F, range_bound: f64, lipschitz_const: Option<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { repr: Representation::Analytic(Arc::new(f)), range_bound, lipschitz_const }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            repr: Representation::PiecewiseConstant(Arc::from(vec![c])),
            range_bound: c.abs(),
            lipschitz_const: Some(0.0),
        }
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn range_bound(&self) -> f64 {
        self.range_bound
    }

    pub fn lipschitz_const(&self) -> Option<f64> {
        self.lipschitz_const
    }

    /// Replaces the declared range bound (used by operators that know a
    /// tighter or looser bound for their outputs than the default).
    pub fn with_range_bound(mut self, range_bound: f64) -> Self {
        self.range_bound = range_bound;
        self
    }

    pub fn with_lipschitz_const(mut self, lipschitz_const: Option<f64>) -> Self {
        self.lipschitz_const = lipschitz_const;
        self
    }

    /// Cell values when this is piecewise-constant.
    pub fn cell_values(&self) -> Option<&[f64]> {
        match &self.repr {
            Representation::PiecewiseConstant(v) => Some(v),
            _ => None,
        }
    }

    /// Evaluates at `x`, rejecting points outside `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.at(x))
    }

    /// Evaluates without the domain check. Points outside `[0, 1]` are
    /// clamped for tabulated representations.
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        match &self.repr {
            Representation::PiecewiseConstant(v) => v[cell_index(x, v.len())],
            Representation::PiecewiseLinear(nodes) => {
                let n = nodes.len() - 1;
                let t = (x.clamp(0.0, 1.0)) * n as f64;
                // grid points u = k/n must hit node k exactly despite rounding in x·n
                let r = t.round();
                if (t - r).abs() <= 4.0 * f64::EPSILON * t.max(1.0) {
                    return nodes[r as usize];
                }
                let i = (t.floor() as usize).min(n - 1);
                let frac = t - i as f64;
                nodes[i] + frac * (nodes[i + 1] - nodes[i])
            }
            Representation::Analytic(f) => f(x),
        }
    }

    /// Values at the `count` midpoints of the ground grid.
    pub fn samples(&self, count: usize) -> Vec<f64> {
        midpoints(count).map(|x| self.at(x)).collect()
    }

    /// Returns `self` scaled by `alpha`, keeping the representation when it
    /// is tabulated.
    pub fn scaled(&self, alpha: f64) -> Signal {
        let lipschitz_const = self.lipschitz_const.map(|l| l * alpha.abs());
        let range_bound = self.range_bound * alpha.abs();
        let repr = match &self.repr {
            Representation::PiecewiseConstant(v) => {
                Representation::PiecewiseConstant(v.iter().map(|x| alpha * x).collect())
            }
            Representation::PiecewiseLinear(v) => {
                Representation::PiecewiseLinear(v.iter().map(|x| alpha * x).collect())
            }
            Representation::Analytic(f) => {
                let f = f.clone();
                Representation::Analytic(Arc::new(move |x| alpha * f(x)))
            }
        };
        Signal { repr, range_bound, lipschitz_const }
    }

    /// L² norm under the Lebesgue measure, midpoint rule on `quadrature` points.
    pub fn l2_norm_with(&self, quadrature: usize) -> f64 {
        if let Some(v) = self.cell_values() {
            if quadrature.is_multiple_of(v.len()) {
                return (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
            }
        }
        let sum: f64 = midpoints(quadrature).map(|x| self.at(x).powi(2)).sum();
        (sum / quadrature as f64).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_with(DEFAULT_QUADRATURE)
    }

    pub fn inner_product_with(&self, other: &Signal, quadrature: usize) -> f64 {
        let sum: f64 = midpoints(quadrature).map(|x| self.at(x) * other.at(x)).sum();
        sum / quadrature as f64
    }

    pub fn inner_product(&self, other: &Signal) -> f64 {
        self.inner_product_with(other, DEFAULT_QUADRATURE)
    }

    /// `‖self − other‖₂` by midpoint quadrature.
    pub fn l2_distance_with(&self, other: &Signal, quadrature: usize) -> f64 {
        let sum: f64 = midpoints(quadrature).map(|x| (self.at(x) - other.at(x)).powi(2)).sum();
        (sum / quadrature as f64).sqrt()
    }

    pub fn l2_distance(&self, other: &Signal) -> f64 {
        self.l2_distance_with(other, DEFAULT_QUADRATURE)
    }

    pub fn to_record(&self) -> Result<SignalRecord> {
        let (repr, n, values, node_values) = match &self.repr {
            Representation::PiecewiseConstant(v) => (RecordKind::PiecewiseConstant, v.len(), Some(v.to_vec()), None),
            Representation::PiecewiseLinear(v) => (RecordKind::PiecewiseLinear, v.len() - 1, None, Some(v.to_vec())),
            Representation::Analytic(_) => return Err(Error::NotSerializable),
        };
        Ok(SignalRecord {
            repr,
            n,
            values,
            node_values,
            range_bound: self.range_bound,
            lipschitz_const: self.lipschitz_const,
        })
    }
}

/// A graph signal: one value per grid point `u ∈ {1/n, ..., 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSignal {
    values: Vec<f64>,
}

impl FiniteSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("finite signal needs n >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("finite signal values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Self { values: vec![c; n.max(1)] }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn range_bound(&self) -> f64 {
        max_abs(&self.values)
    }

    /// `sqrt((1/n) Σ values²)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|x| x * x).sum::<f64>() / self.n() as f64).sqrt()
    }

    /// `(1/n) Σ f(u) g(u)`.
    pub fn inner_product(&self, other: &FiniteSignal) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s / self.n() as f64)
    }

    pub fn l2_distance(&self, other: &FiniteSignal) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)).sum();
        Ok((s / self.n() as f64).sqrt())
    }

    fn check_same(&self, other: &FiniteSignal) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::ResolutionMismatch { left: self.n(), right: other.n() });
        }
        Ok(())
    }

    pub fn to_record(&self) -> SignalRecord {
        SignalRecord {
            repr: RecordKind::Finite,
            n: self.n(),
            values: Some(self.values.clone()),
            node_values: None,
            range_bound: self.range_bound(),
            lipschitz_const: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    PiecewiseConstant,
    PiecewiseLinear,
    Finite,
}

/// JSON record for tabulated signals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub repr: RecordKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_values: Option<Vec<f64>>,
    pub range_bound: f64,
    #[serde(default)]
    pub lipschitz_const: Option<f64>,
}

/// A signal on either kind of domain: `[0, 1]` or the grid `[n]/n`.
#[derive(Clone, Debug)]
pub enum DomainSignal {
    Continuum(Signal),
    Finite(FiniteSignal),
}

impl DomainSignal {
    pub fn range_bound(&self) -> f64 {
        match self {
            Self::Continuum(f) => f.range_bound(),
            Self::Finite(x) => x.range_bound(),
        }
    }

    pub fn to_record(&self) -> Result<SignalRecord> {
        match self {
            Self::Continuum(f) => f.to_record(),
            Self::Finite(x) => Ok(x.to_record()),
        }
    }
}

impl SignalRecord {
    pub fn decode(&self) -> Result<DomainSignal> {
        let missing = |what: &str| Error::InvalidParameter(format!("signal record is missing `{what}`"));
        let check_len = |len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("signal record has {len} entries, expected {want}")))
            }
        };
        match self.repr {
            RecordKind::PiecewiseConstant => {
                let v = self.values.clone().ok_or_else(|| missing("values"))?;
                check_len(v.len(), self.n)?;
                Ok(DomainSignal::Continuum(Signal::piecewise_constant(v)?))
            }
            RecordKind::PiecewiseLinear => {
                let v = self.node_values.clone().ok_or_else(|| missing("node_values"))?;
                check_len(v.len(), self.n + 1)?;
                Ok(DomainSignal::Continuum(Signal::piecewise_linear(v)?))
            }
            RecordKind::Finite => {
                let v = self.values.clone().ok_or_else(|| missing("values"))?;
                check_len(v.len(), self.n)?;
                Ok(DomainSignal::Finite(FiniteSignal::new(v)?))
            }
        }
    }
}

/// `Σ αᵢ fᵢ`, staying piecewise-constant when every term is piecewise-constant
/// at a resolution dividing the finest one, and piecewise-linear when every
/// term is piecewise-linear at the same resolution.
pub fn linear_combination(terms: &[(f64, Signal)]) -> Signal {
    if terms.is_empty() {
        return Signal::constant(0.0);
    }
    let range_bound: f64 = terms.iter().map(|(a, f)| a.abs() * f.range_bound).sum();
    let lipschitz_const = terms.iter().map(|(a, f)| f.lipschitz_const.map(|l| a.abs() * l)).sum::<Option<f64>>();

    let pcs: Option<Vec<(f64, &[f64])>> = terms.iter().map(|(a, f)| f.cell_values().map(|v| (*a, v))).collect();
    if let Some(pcs) = pcs {
        let r = pcs.iter().map(|(_, v)| v.len()).max().unwrap_or(1);
        if pcs.iter().all(|(_, v)| r % v.len() == 0) {
            let values: Vec<f64> =
                (0..r).map(|c| pcs.iter().map(|(a, v)| a * v[c / (r / v.len())]).sum::<f64>()).collect();
            return Signal {
                repr: Representation::PiecewiseConstant(Arc::from(values)),
                range_bound,
                lipschitz_const: lipschitz_const.or((r == 1).then_some(0.0)),
            };
        }
    }
    let pls: Option<Vec<(f64, &[f64])>> = terms
        .iter()
        .map(|(a, f)| match &f.repr {
            Representation::PiecewiseLinear(v) => Some((*a, &v[..])),
            _ => None,
        })
        .collect();
    if let Some(pls) = pls {
        let len = pls[0].1.len();
        if pls.iter().all(|(_, v)| v.len() == len) {
            let nodes: Vec<f64> = (0..len).map(|i| pls.iter().map(|(a, v)| a * v[i]).sum()).collect();
            return Signal::piecewise_linear(nodes).expect("at least two nodes").with_range_bound(range_bound);
        }
    }
    let owned: Vec<(f64, Signal)> = terms.to_vec();
    Signal::analytic(move |x| owned.iter().map(|(a, f)| a * f.at(x)).sum(), range_bound, lipschitz_const)
}

/// Applies `g` pointwise. Piecewise-constant inputs stay piecewise-constant.
pub fn map_pointwise<G>(f: &Signal, g: G, range_bound: f64, lipschitz_const: Option<f64>) -> Signal
where
    G: Fn(f64) -> f64 + Send + Sync + 'static,
{
    match &f.repr {
        Representation::PiecewiseConstant(v) => Signal {
            repr: Representation::PiecewiseConstant(v.iter().map(|x| g(*x)).collect()),
            range_bound,
            lipschitz_const,
        },
        _ => {
            let inner = f.clone();
            Signal::analytic(move |x| g(inner.at(x)), range_bound, lipschitz_const)
        }
    }
}

/// Piecewise-constant extension `X̃(u) = X(⌈un⌉/n)`.
pub fn extend_pc(x: &FiniteSignal) -> Signal {
    Signal::piecewise_constant(x.values.clone()).expect("finite signals are nonempty")
}

/// Piecewise-linear extension through the grid values, held constant at
/// `X(1/n)` on `[0, 1/n]`.
///
/// Requires `|X(u + 1/n) − X(u)| ≤ C_v / n`; the result is then
/// `C_v`-Lipschitz and agrees with `X` on every grid point.
pub fn extend_pl(x: &FiniteSignal, c_v: f64) -> Result<Signal> {
    let n = x.n();
    let limit = c_v / n as f64 + INCREMENT_TOLERANCE;
    if let Some(i) = x.values.windows(2).position(|w| (w[1] - w[0]).abs() > limit) {
        return Err(Error::Precondition(format!(
            "increment {} at grid index {} exceeds C_v/n = {}",
            (x.values[i + 1] - x.values[i]).abs(),
            i + 1,
            c_v / n as f64
        )));
    }
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(x.values[0]);
    nodes.extend_from_slice(&x.values);
    Signal::piecewise_linear(nodes)
}

/// Integral of a piecewise-linear function (nodes at `i/m`) over `[a, b]`.
fn integrate_pl(nodes: &[f64], a: f64, b: f64) -> f64 {
    let m = nodes.len() - 1;
    let first = ((a * m as f64).floor() as usize).min(m - 1);
    let last = ((b * m as f64).ceil() as usize).clamp(first + 1, m);
    let mut total = 0.0;
    for i in first..last {
        let lo = a.max(i as f64 / m as f64);
        let hi = b.min((i + 1) as f64 / m as f64);
        if hi > lo {
            // trapezoid is exact on a linear piece
            let fl = nodes[i] + (lo * m as f64 - i as f64) * (nodes[i + 1] - nodes[i]);
            let fh = nodes[i] + (hi * m as f64 - i as f64) * (nodes[i + 1] - nodes[i]);
            total += 0.5 * (fl + fh) * (hi - lo);
        }
    }
    total
}

/// Cell averages `n ∫_{u−1/n}^{u} f`, using the default quadrature for
/// analytic signals.
pub fn restrict(f: &Signal, n: usize) -> FiniteSignal {
    restrict_with(f, n, DEFAULT_QUADRATURE)
}

/// Cell averages. Tabulated representations are integrated exactly;
/// analytic ones use `max(1, ⌈quadrature/n⌉)` midpoints per cell, which
/// coincides with the global ground grid when `n` divides `quadrature`.
pub fn restrict_with(f: &Signal, n: usize, quadrature: usize) -> FiniteSignal {
    assert!(n >= 1, "restriction resolution must be positive");
    let values = match &f.repr {
        Representation::PiecewiseConstant(v) => restrict_pc(v, n),
        Representation::PiecewiseLinear(nodes) => {
            (0..n).map(|u| n as f64 * integrate_pl(nodes, u as f64 / n as f64, (u + 1) as f64 / n as f64)).collect()
        }
        Representation::Analytic(g) => {
            let per_cell = quadrature.div_ceil(n).max(1);
            let h = 1.0 / (n * per_cell) as f64;
            (0..n)
                .map(|u| {
                    let base = u * per_cell;
                    let s: f64 = (0..per_cell).map(|j| g((base + j) as f64 * h + 0.5 * h)).sum();
                    s / per_cell as f64
                })
                .collect()
        }
    };
    FiniteSignal { values }
}

/// Exact cell averages of a piecewise-constant signal at resolution `r`
/// onto resolution `n`, in integer units of `1/(r n)`.
fn restrict_pc(v: &[f64], n: usize) -> Vec<f64> {
    let r = v.len();
    if r == n {
        return v.to_vec();
    }
    if r.is_multiple_of(n) {
        let k = r / n;
        return v.chunks(k).map(|c| c.iter().sum::<f64>() / k as f64).collect();
    }
    if n.is_multiple_of(r) {
        let k = n / r;
        return (0..n).map(|u| v[u / k]).collect();
    }
    (0..n)
        .map(|u| {
            let (lo, hi) = (u * r, (u + 1) * r);
            let first = lo / n;
            let last = (hi - 1) / n;
            let mut acc = 0.0;
            for (i, value) in v.iter().enumerate().take(last + 1).skip(first) {
                let overlap = hi.min((i + 1) * n) - lo.max(i * n);
                acc += value * overlap as f64;
            }
            acc / r as f64
        })
        .collect()
}

/// Largest finite-difference slope of `f` over `[0, 1]` at the given step.
pub fn measured_lipschitz(f: &Signal, step: f64) -> f64 {
    let count = (1.0 / step).floor() as usize;
    let mut prev = f.at(0.0);
    let mut best = 0.0_f64;
    for i in 1..=count {
        let x = (i as f64 * step).min(1.0);
        let cur = f.at(x);
        best = best.max((cur - prev).abs() / step);
        prev = cur;
    }
    best
}

// ---------------------------------------------------------------------------
// Mollification

/// Unnormalized bump `exp(−1/(1−t²))` on `(−1, 1)`.
#[inline]
fn bump(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// `∫_{−1}^{1} exp(−1/(1−t²)) dt`.
fn bump_mass() -> f64 {
    let m = 20_000;
    let h = 2.0 / m as f64;
    (0..m).map(|i| bump(-1.0 + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// `∫|φ'| = 2 φ(0)` for the normalized bump, so `f ∗ φ_ε` is
/// `sup|f| · 2φ(0)/ε`-Lipschitz.
pub fn mollifier_slope_mass() -> f64 {
    2.0 * bump(0.0) / bump_mass()
}

/// Nodes per unit of `ε` in the mollifier quadrature.
const MOLLIFY_NODES_PER_EPS: f64 = 256.0;

/// Convolution `f ∗ φ_ε` with the normalized smooth bump, `f` continued by
/// constants outside `[0, 1]`.
///
/// The quadrature uses a fixed lattice `1/2 + (j + 1/2)Δ` independent of `x`,
/// so the result is smooth in `x`, and weights are renormalized to sum to one.
pub fn mollify(f: &Signal, eps: f64) -> Result<Signal> {
    if eps.is_nan() || eps <= 0.0 || eps.is_infinite() {
        return Err(Error::InvalidParameter(format!("mollifier width must be positive, got {eps}")));
    }
    let delta = eps / MOLLIFY_NODES_PER_EPS;
    let inner = f.clone();
    let g = move |x: f64| {
        // offsets (j + 1/2)Δ + (1/2 − x) lie in (−ε, ε)
        let shift = 0.5 - x;
        let j_lo = ((-eps - shift) / delta - 0.5).floor() as i64;
        let j_hi = ((eps - shift) / delta - 0.5).ceil() as i64;
        let (mut num, mut den) = (0.0, 0.0);
        for j in j_lo..=j_hi {
            let off = (j as f64 + 0.5) * delta;
            let w = bump((off + shift) / eps);
            if w > 0.0 {
                let y = (0.5 + off).clamp(0.0, 1.0);
                num += w * inner.at(y);
                den += w;
            }
        }
        num / den
    };
    let kernel_bound = f.range_bound * mollifier_slope_mass() / eps;
    let lipschitz = match f.lipschitz_const {
        Some(l) => l.min(kernel_bound),
        None => kernel_bound,
    };
    Ok(Signal::analytic(g, f.range_bound, Some(lipschitz)))
}

// ---------------------------------------------------------------------------
// Random test functions

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SignalFamily {
    #[default]
    PiecewiseLinear,
    MollifiedNoise,
}

/// Draws `k` signals with range in `[−1, 1]` and Lipschitz constant at most
/// `c_v`, deterministically from `seed`.
pub fn sample_lipschitz_tuple(k: usize, c_v: f64, seed: u64, family: SignalFamily) -> Vec<Signal> {
    (0..k)
        .map(|j| {
            let mut rng = rng::stream(seed, &[j as u64]);
            match family {
                SignalFamily::PiecewiseLinear => random_piecewise_linear(&mut rng, c_v),
                SignalFamily::MollifiedNoise => random_mollified_noise(&mut rng, c_v),
            }
        })
        .collect()
}

fn random_piecewise_linear<R: Rng>(rng: &mut R, c_v: f64) -> Signal {
    let nodes = ((16.0 * c_v).ceil() as usize).max(2);
    let spacing = 1.0 / (nodes - 1) as f64;
    // shave a few ulps so n·max|Δ| never rounds above c_v
    let step = c_v * spacing * (1.0 - 1e-12);
    let mut values = Vec::with_capacity(nodes);
    let mut v: f64 = rng.gen_range(-1.0..=1.0);
    values.push(v);
    for _ in 1..nodes {
        v = (v + step * rng.gen_range(-1.0..=1.0)).clamp(-1.0, 1.0);
        values.push(v);
    }
    Signal::piecewise_linear(values).expect("at least two nodes")
}

const NOISE_CELLS: usize = 64;

fn random_mollified_noise<R: Rng>(rng: &mut R, c_v: f64) -> Signal {
    let noise: Vec<f64> = (0..NOISE_CELLS)
        .map(|_| {
            // Box–Muller, σ = 1/2, clipped to [−1, 1]
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            (0.5 * z).clamp(-1.0, 1.0)
        })
        .collect();
    let noise = Signal::piecewise_constant(noise).expect("nonempty");
    let eps = 1.0 / c_v.sqrt();
    let g = mollify(&noise, eps).expect("eps > 0");
    let declared = g.lipschitz_const.unwrap_or(f64::INFINITY);
    let scale = if declared > c_v { c_v / declared } else { 1.0 };
    g.scaled(scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(v: &[f64]) -> Signal {
        Signal::piecewise_constant(v.to_vec()).unwrap()
    }

    fn fs(v: &[f64]) -> FiniteSignal {
        FiniteSignal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(pc(&[0.5; 4]).eval(0.3).unwrap(), 0.5);
        assert_eq!(pc(&[1.0, -1.0]).eval(0.3).unwrap(), 1.0);
        let pl = Signal::piecewise_linear(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(pl.eval(0.25).unwrap(), 0.5);
        assert_eq!(pl.lipschitz_const(), Some(2.0));
    }

    #[test]
    fn eval_rejects_outside_unit_interval() {
        let f = Signal::constant(1.0);
        assert!(matches!(f.eval(-0.1), Err(Error::OutOfDomain(_))));
        assert!(matches!(f.eval(1.5), Err(Error::OutOfDomain(_))));
        assert!(f.eval(0.0).is_ok());
        assert!(f.eval(1.0).is_ok());
    }

    #[test]
    fn cells_are_half_open_on_the_left() {
        let f = extend_pc(&fs(&[0.25, 0.75]));
        assert_eq!(f.at(0.0), 0.25);
        assert_eq!(f.at(0.5), 0.25);
        assert_eq!(f.at(0.500001), 0.75);
        assert_eq!(f.at(1.0), 0.75);
        let g = extend_pc(&fs(&[1.0, -1.0]));
        assert_eq!((g.at(0.3), g.at(0.7)), (1.0, -1.0));
        assert_eq!(g.lipschitz_const(), None);
        assert_eq!(g.range_bound(), 1.0);
    }

    #[test]
    fn extend_pl_examples() {
        let c = extend_pl(&fs(&[0.3; 5]), 1.0).unwrap();
        assert_eq!(c.lipschitz_const(), Some(0.0));
        for x in [0.0, 0.1, 0.55, 1.0] {
            assert_eq!(c.at(x), 0.3);
        }
        let f = extend_pl(&fs(&[0.25, 0.75]), 1.0).unwrap();
        assert_eq!(f.at(0.75), 0.5);
        assert_eq!(f.at(0.2), 0.25);
        assert!(f.lipschitz_const().unwrap() <= 1.0);
    }

    #[test]
    fn extend_pl_rejects_large_increments() {
        let err = extend_pl(&fs(&[0.0, 0.9]), 1.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn extend_pl_of_unit_increments_is_one_lipschitz() {
        let n = 50;
        let mut r = rng::stream(11, &[]);
        let mut v = vec![0.0];
        for _ in 1..n {
            let last = *v.last().unwrap();
            let step = if r.gen::<bool>() { 1.0 } else { -1.0 } / n as f64;
            v.push(last + step);
        }
        let f = extend_pl(&fs(&v), 1.0).unwrap();
        assert!(measured_lipschitz(&f, LIPSCHITZ_STEP) <= 1.0 * LIPSCHITZ_SLACK);
        for (u, value) in v.iter().enumerate() {
            assert_eq!(f.at((u + 1) as f64 / n as f64), *value);
        }
    }

    #[test]
    fn restrict_closed_forms() {
        let id = Signal::analytic(|x| x, 1.0, Some(1.0));
        let r2 = restrict(&id, 2);
        assert!((r2.values()[0] - 0.25).abs() < 1e-12);
        assert!((r2.values()[1] - 0.75).abs() < 1e-12);
        let r4 = restrict(&id, 4);
        for (got, want) in r4.values().iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((got - want).abs() < 1e-12);
        }
        // piecewise-linear identity is integrated exactly
        let pl = Signal::piecewise_linear(vec![0.0, 1.0]).unwrap();
        assert_eq!(restrict(&pl, 2).values(), &[0.25, 0.75]);
        assert_eq!(restrict(&Signal::constant(0.4), 7).values(), &[0.4; 7]);
    }

    #[test]
    fn restrict_pc_handles_incommensurate_resolutions() {
        let f = pc(&[1.0, 0.0, -1.0]);
        let r = restrict(&f, 2);
        // cell (0, 1/2]: 2/3 of value 1 and 1/3 of value 0
        assert!((r.values()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.values()[1] + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(restrict(&pc(&[1.0, 3.0]), 1).values(), &[2.0]);
        assert_eq!(restrict(&pc(&[1.0, 3.0]), 4).values(), &[1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn norms() {
        assert_eq!(Signal::constant(1.0).l2_norm(), 1.0);
        for n in [1, 3, 10] {
            assert_eq!(FiniteSignal::constant(1.0, n).l2_norm(), 1.0);
        }
        let id = Signal::analytic(|x| x, 1.0, Some(1.0));
        assert!((id.l2_norm() - 1.0 / 3f64.sqrt()).abs() < 1e-6);
        let a = fs(&[1.0, 2.0]);
        let b = fs(&[3.0, -1.0]);
        assert_eq!(a.inner_product(&b).unwrap(), 0.5);
        assert!(matches!(a.inner_product(&fs(&[1.0])), Err(Error::ResolutionMismatch { .. })));
    }

    #[test]
    fn mollify_constant_and_step() {
        let c = mollify(&Signal::constant(0.3), 0.2).unwrap();
        for x in [0.0, 0.31, 0.77, 1.0] {
            assert!((c.at(x) - 0.3).abs() < 1e-14);
        }
        let step = pc(&[0.0, 1.0]);
        let g = mollify(&step, 0.1).unwrap();
        assert!((g.at(0.5) - 0.5).abs() < 1e-6);
        assert!(g.at(0.3) < 1e-12 && g.at(0.7) > 1.0 - 1e-12);
        let lip = measured_lipschitz(&g, LIPSCHITZ_STEP);
        assert!(lip <= 100.0, "{lip}");
        assert!(lip <= g.lipschitz_const().unwrap() * LIPSCHITZ_SLACK);
        assert!(g.range_bound() <= step.range_bound());
    }

    #[test]
    fn mollify_rejects_nonpositive_width() {
        assert!(mollify(&Signal::constant(0.0), 0.0).is_err());
        assert!(mollify(&Signal::constant(0.0), -1.0).is_err());
    }

    #[test]
    fn mollify_converges_in_l2() {
        let f = sample_lipschitz_tuple(1, 4.0, 99, SignalFamily::PiecewiseLinear).remove(0);
        let errs: Vec<f64> =
            [0.2, 0.1, 0.05].iter().map(|&e| mollify(&f, e).unwrap().l2_distance_with(&f, 1024)).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn sampled_tuples_honor_metadata() {
        let tuple = sample_lipschitz_tuple(3, 1.0, 7, SignalFamily::PiecewiseLinear);
        assert_eq!(tuple.len(), 3);
        for f in &tuple {
            assert!(f.range_bound() <= 1.0);
            assert!(f.lipschitz_const().unwrap() <= 1.0);
            assert!(measured_lipschitz(f, LIPSCHITZ_STEP) <= 1.0 * LIPSCHITZ_SLACK);
        }
        let flat = sample_lipschitz_tuple(1, 1e-9, 3, SignalFamily::PiecewiseLinear).remove(0);
        let s = flat.samples(1000);
        let spread = s.iter().cloned().fold(f64::MIN, f64::max) - s.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-9);
    }

    #[test]
    fn mollified_noise_family_honors_metadata() {
        for c_v in [0.5, 2.0, 9.0] {
            let f = sample_lipschitz_tuple(1, c_v, 5, SignalFamily::MollifiedNoise).remove(0);
            assert!(f.range_bound() <= 1.0);
            assert!(f.lipschitz_const().unwrap() <= c_v * (1.0 + 1e-12));
            assert!(measured_lipschitz(&f, 1e-3) <= c_v * LIPSCHITZ_SLACK);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_lipschitz_tuple(2, 3.0, 42, SignalFamily::PiecewiseLinear);
        let b = sample_lipschitz_tuple(2, 3.0, 42, SignalFamily::PiecewiseLinear);
        for (f, g) in a.iter().zip(&b) {
            let (fa, ga) = (f.samples(257), g.samples(257));
            assert!(fa.iter().zip(&ga).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn records_round_trip_and_reject_analytic() {
        let f = pc(&[0.1, -0.2]);
        let json = serde_json::to_string(&f.to_record().unwrap()).unwrap();
        assert!(json.contains("\"repr\":\"piecewise-constant\""));
        let back: SignalRecord = serde_json::from_str(&json).unwrap();
        match back.decode().unwrap() {
            DomainSignal::Continuum(g) => assert_eq!(g.cell_values(), f.cell_values()),
            DomainSignal::Finite(_) => panic!("wrong kind"),
        }
        let a = Signal::analytic(|x| x, 1.0, None);
        assert!(matches!(a.to_record(), Err(Error::NotSerializable)));
    }
}
