//! Entry distributions, the Lévy–Prokhorov distance between uniform
//! empirical measures, and the profile-based operator distance.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Domain, POperator};
use crate::rng;
use crate::signal::{midpoints, restrict, sample_lipschitz_tuple, DomainSignal, Signal, SignalFamily};

/// Closed-ball tie tolerance: atoms at distance `≤ ε + TIE_TOLERANCE` are
/// neighbours.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest support handled by [`lp_distance_bruteforce`].
pub const BRUTEFORCE_MAX_ATOMS: usize = 15;

/// Uniformly weighted atoms in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    data: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let dim = atoms.first().map(Vec::len).ok_or_else(|| Error::Shape("measure needs at least one atom".into()))?;
        if dim == 0 {
            return Err(Error::Shape("atoms must have positive dimension".into()));
        }
        if let Some(bad) = atoms.iter().position(|a| a.len() != dim) {
            return Err(Error::DimensionMismatch { left: dim, right: atoms[bad].len() });
        }
        Self::from_flat(dim, atoms.into_iter().flatten().collect())
    }

    /// Atoms stored back to back, `dim` coordinates each.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} coordinates do not split into atoms of dimension {dim}", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("atom coordinates must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    /// Writes one atom per CSV row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for atom in self.atoms() {
            w.write_record(atom.iter().map(|x| format!("{x:e}"))).map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Distinct atoms with their multiplicities, in a canonical order.
    fn grouped(&self) -> Vec<(&[f64], u64)> {
        let mut counts: BTreeMap<Vec<u64>, (usize, u64)> = BTreeMap::new();
        for (i, atom) in self.atoms().enumerate() {
            let key: Vec<u64> = atom.iter().map(|x| (x + 0.0).to_bits()).collect();
            counts.entry(key).or_insert((i, 0)).1 += 1;
        }
        counts.into_values().map(|(i, c)| (self.atom(i), c)).collect()
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Joint law of `(f₁, ..., f_k, Af₁, ..., Af_k)`.
///
/// Continuum signals are read at `quadrature` midpoints; grid signals give
/// one atom per grid point.
pub fn entry_distribution(a: &POperator, tuple: &[DomainSignal], quadrature: usize) -> Result<EmpiricalMeasure> {
    if tuple.is_empty() {
        return Err(Error::Shape("entry distribution needs at least one signal".into()));
    }
    let images = tuple.iter().map(|f| a.apply(f)).collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<f64>> = tuple
        .iter()
        .chain(&images)
        .map(|s| match s {
            DomainSignal::Continuum(f) => {
                let xs: Vec<f64> = midpoints(quadrature).collect();
                xs.par_iter().map(|&x| f.at(x)).collect()
            }
            DomainSignal::Finite(v) => v.values().to_vec(),
        })
        .collect();
    let rows = columns[0].len();
    let dim = columns.len();
    let mut data = Vec::with_capacity(rows * dim);
    for r in 0..rows {
        data.extend(columns.iter().map(|c| c[r]));
    }
    EmpiricalMeasure::from_flat(dim, data)
}

/// Maximum flow on a small directed graph (Dinic).
struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new() }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: i64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0);
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<i32>> {
        let mut level = vec![-1; self.adj.len()];
        let mut queue = std::collections::VecDeque::from([s]);
        level[s] = 0;
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] >= 0).then_some(level)
    }

    fn push(&mut self, u: usize, t: usize, limit: i64, level: &[i32], next: &mut [usize]) -> i64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let pushed = self.push(v, t, limit.min(self.cap[e]), level, next);
                if pushed > 0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.push(s, t, i64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}

/// Precomputed transport problem between two grouped measures.
struct Deficiency {
    left: Vec<u64>,
    right: Vec<u64>,
    dist: Vec<f64>,
    m: u64,
    n: u64,
}

impl Deficiency {
    fn new(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Self {
        let a = mu.grouped();
        let b = nu.grouped();
        let dist = a.iter().flat_map(|(x, _)| b.iter().map(move |(y, _)| euclidean(x, y))).collect();
        Self {
            left: a.iter().map(|(_, c)| *c).collect(),
            right: b.iter().map(|(_, c)| *c).collect(),
            dist,
            m: mu.len() as u64,
            n: nu.len() as u64,
        }
    }

    /// `max_U μ(U) − ν(U^ε)` in units of `1/(m n)`. By the max-flow min-cut
    /// theorem this is the total mass minus the flow of the neighbourhood
    /// graph; the relation is symmetric, so it also equals the deficiency
    /// with the roles of `μ` and `ν` swapped.
    fn deficit(&self, eps: f64) -> u64 {
        let (p, q) = (self.left.len(), self.right.len());
        let (s, t) = (p + q, p + q + 1);
        let total = self.m * self.n;
        let mut net = FlowNetwork::new(p + q + 2);
        for (i, &c) in self.left.iter().enumerate() {
            net.add_edge(s, i, (c * self.n) as i64);
        }
        for (j, &c) in self.right.iter().enumerate() {
            net.add_edge(p + j, t, (c * self.m) as i64);
        }
        for i in 0..p {
            for j in 0..q {
                if self.dist[i * q + j] <= eps + TIE_TOLERANCE {
                    net.add_edge(i, p + j, total as i64);
                }
            }
        }
        total - net.max_flow(s, t) as u64
    }

    fn fraction(&self, deficit: u64) -> f64 {
        deficit as f64 / (self.m * self.n) as f64
    }
}

fn check_dims(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim != nu.dim {
        return Err(Error::DimensionMismatch { left: mu.dim, right: nu.dim });
    }
    Ok(())
}

/// Exact Lévy–Prokhorov distance between two uniform empirical measures.
///
/// The deficiency `D(ε)` is a nonincreasing step function that only jumps
/// at pairwise atom distances `t₀ = 0 < t₁ < ...`. On `[tᵢ, tᵢ₊₁)` the
/// condition `D(ε) ≤ ε` first holds at `max(tᵢ, D(tᵢ))`, and whether that
/// point falls inside the interval is monotone in `i`, so a binary search
/// over the breakpoints finds the infimum.
pub fn lp_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_dims(mu, nu)?;
    let problem = Deficiency::new(mu, nu);
    let mut thresholds: Vec<f64> = problem.dist.iter().copied().filter(|d| *d <= 1.0 + TIE_TOLERANCE).collect();
    thresholds.push(0.0);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    // pairs farther apart than 1 never matter: D ≤ 1 holds everywhere
    let upper = |i: usize| thresholds.get(i + 1).copied().unwrap_or(f64::INFINITY);
    let deficiency = |i: usize| problem.fraction(problem.deficit(thresholds[i]));
    let (mut lo, mut hi) = (0, thresholds.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if deficiency(mid) < upper(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(thresholds[lo].max(deficiency(lo)))
}

/// Lévy–Prokhorov distance by enumerating every subset of both supports.
/// Independent of [`lp_distance`]; meant as a test oracle.
pub fn lp_distance_bruteforce(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_dims(mu, nu)?;
    for m in [mu, nu] {
        if m.len() > BRUTEFORCE_MAX_ATOMS {
            return Err(Error::SupportTooLarge { len: m.len(), max: BRUTEFORCE_MAX_ATOMS });
        }
    }
    let (m, n) = (mu.len(), nu.len());
    let mut dist = vec![vec![0.0; n]; m];
    for (i, row) in dist.iter_mut().enumerate() {
        for (j, d) in row.iter_mut().enumerate() {
            *d = mu.atom(i).iter().zip(nu.atom(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        }
    }
    // neighbourhood bitmasks of every subset, built from the lowest set bit
    let one_side = |count: usize, other: usize, near: &dyn Fn(usize, usize) -> bool| -> i64 {
        let single: Vec<u32> =
            (0..count).map(|i| (0..other).filter(|&j| near(i, j)).fold(0u32, |acc, j| acc | (1 << j))).collect();
        let mut hood = vec![0u32; 1 << count];
        let mut worst = i64::MIN;
        for u in 1..(1usize << count) {
            let low = u.trailing_zeros() as usize;
            hood[u] = hood[u & (u - 1)] | single[low];
            let gap = u.count_ones() as i64 * other as i64 - hood[u].count_ones() as i64 * count as i64;
            worst = worst.max(gap);
        }
        worst.max(0)
    };
    let deficiency = |eps: f64| -> f64 {
        let forward = one_side(m, n, &|i, j| dist[i][j] <= eps + TIE_TOLERANCE);
        let backward = one_side(n, m, &|j, i| dist[i][j] <= eps + TIE_TOLERANCE);
        forward.max(backward) as f64 / (m * n) as f64
    };
    let mut candidates: Vec<f64> = dist.iter().flatten().copied().collect();
    candidates.push(0.0);
    candidates.push(1.0);
    let steps: Vec<f64> = candidates.iter().map(|&t| deficiency(t)).collect();
    candidates.extend(steps);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    Ok(candidates.into_iter().find(|&c| deficiency(c) <= c).expect("ε = 1 is always feasible"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// The same continuum test functions, mapped to each operator's domain.
    #[default]
    Paired,
    /// Independent draws per side, compared by a full Hausdorff search.
    Cross,
}

fn default_c_v() -> f64 {
    1.0
}
fn default_num_tuples() -> usize {
    64
}
fn default_quadrature_atoms() -> usize {
    512
}
fn default_k() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSampleConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_c_v")]
    pub c_v: f64,
    #[serde(default = "default_num_tuples")]
    pub num_tuples: usize,
    #[serde(default = "default_quadrature_atoms")]
    pub quadrature_atoms: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub family: SignalFamily,
}

impl Default for ProfileSampleConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            c_v: default_c_v(),
            num_tuples: default_num_tuples(),
            quadrature_atoms: default_quadrature_atoms(),
            seed: 0,
            estimator: Estimator::Paired,
            family: SignalFamily::default(),
        }
    }
}

impl ProfileSampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.num_tuples == 0 || self.quadrature_atoms == 0 {
            return Err(Error::InvalidParameter("k, num_tuples and quadrature_atoms must be positive".into()));
        }
        if !(self.c_v > 0.0 && self.c_v.is_finite()) {
            return Err(Error::InvalidParameter(format!("C_v must be positive, got {}", self.c_v)));
        }
        Ok(())
    }

    fn at_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }
}

/// Continuum test tuple number `t`; `side` separates independent draws.
fn test_tuple(cfg: &ProfileSampleConfig, t: usize, side: u64) -> Vec<Signal> {
    let seed = rng::derive_seed(cfg.seed, &[cfg.k as u64, t as u64, side]);
    sample_lipschitz_tuple(cfg.k, cfg.c_v, seed, cfg.family)
}

/// Moves continuum test functions onto `domain`, restricting for grids.
pub fn map_to_domain(tuple: &[Signal], domain: Domain) -> Vec<DomainSignal> {
    tuple
        .iter()
        .map(|f| match domain {
            Domain::Continuum => DomainSignal::Continuum(f.clone()),
            Domain::Grid(n) => DomainSignal::Finite(restrict(f, n)),
        })
        .collect()
}

/// `num_tuples` test tuples on `a`'s domain with their entry distributions.
pub fn sample_profile(a: &POperator, cfg: &ProfileSampleConfig) -> Result<Vec<(Vec<DomainSignal>, EmpiricalMeasure)>> {
    cfg.validate()?;
    (0..cfg.num_tuples)
        .into_par_iter()
        .map(|t| {
            let tuple = map_to_domain(&test_tuple(cfg, t, 0), a.domain());
            let measure = entry_distribution(a, &tuple, cfg.quadrature_atoms)?;
            Ok((tuple, measure))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HausdorffEstimate {
    pub value: f64,
    pub num_tuples: usize,
    pub estimator: Estimator,
}

/// Estimate of the Hausdorff distance between the sampled profiles of `a`
/// and `b` at `cfg.k`.
///
/// Paired mode needs both operators to share a lineage and returns the
/// largest distance between the entry distributions of one test tuple seen
/// through each operator. Cross mode draws independent tuples per side.
pub fn hausdorff_profile_distance(
    a: &POperator,
    b: &POperator,
    cfg: &ProfileSampleConfig,
) -> Result<HausdorffEstimate> {
    cfg.validate()?;
    let value = match cfg.estimator {
        Estimator::Paired => {
            if a.lineage() != b.lineage() {
                return Err(Error::Precondition(format!(
                    "paired estimate needs a shared construction, got {} and {}",
                    a.lineage(),
                    b.lineage()
                )));
            }
            let distances = (0..cfg.num_tuples)
                .into_par_iter()
                .map(|t| {
                    let tuple = test_tuple(cfg, t, 0);
                    let mu = entry_distribution(a, &map_to_domain(&tuple, a.domain()), cfg.quadrature_atoms)?;
                    let nu = entry_distribution(b, &map_to_domain(&tuple, b.domain()), cfg.quadrature_atoms)?;
                    lp_distance(&mu, &nu)
                })
                .collect::<Result<Vec<f64>>>()?;
            distances.into_iter().fold(0.0, f64::max)
        }
        Estimator::Cross => {
            let side = |op: &POperator, tag: u64| {
                (0..cfg.num_tuples)
                    .into_par_iter()
                    .map(|t| {
                        entry_distribution(
                            op,
                            &map_to_domain(&test_tuple(cfg, t, tag), op.domain()),
                            cfg.quadrature_atoms,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let (pa, pb) = (side(a, 1)?, side(b, 2)?);
            let table = (0..pa.len() * pb.len())
                .into_par_iter()
                .map(|ij| lp_distance(&pa[ij / pb.len()], &pb[ij % pb.len()]))
                .collect::<Result<Vec<f64>>>()?;
            let q = pb.len();
            let row_min =
                (0..pa.len()).map(|i| table[i * q..(i + 1) * q].iter().copied().fold(f64::INFINITY, f64::min));
            let col_min = (0..q).map(|j| (0..pa.len()).map(|i| table[i * q + j]).fold(f64::INFINITY, f64::min));
            row_min.chain(col_min).fold(0.0, f64::max)
        }
    };
    Ok(HausdorffEstimate { value, num_tuples: cfg.num_tuples, estimator: cfg.estimator })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerK {
    pub k: usize,
    #[serde(rename = "dH_estimate")]
    pub dh_estimate: f64,
    pub num_tuples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmReport {
    pub per_k: Vec<PerK>,
    pub total: f64,
    /// Bound on the omitted tail `Σ_{k > k_max} 2^{-k} d_H`.
    pub remainder_bound: f64,
    pub estimator: Estimator,
    pub seed: u64,
    pub note: String,
}

/// `Σ_{k ≤ k_max} 2^{-k} d_H(k)` with the tail bounded by `2^{-k_max}`
/// (every Lévy–Prokhorov distance is at most 1).
pub fn dm_estimate(a: &POperator, b: &POperator, k_max: usize, cfg: &ProfileSampleConfig) -> Result<DmReport> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let mut per_k = Vec::with_capacity(k_max);
    let mut total = 0.0;
    for k in 1..=k_max {
        let est = hausdorff_profile_distance(a, b, &cfg.at_k(k))?;
        total += est.value / f64::powi(2.0, k as i32);
        per_k.push(PerK { k, dh_estimate: est.value, num_tuples: est.num_tuples });
    }
    let note = match cfg.estimator {
        Estimator::Paired => "estimate of witness-pair distance over sampled tuples",
        Estimator::Cross => "Hausdorff distance between finite profile samples",
    };
    Ok(DmReport {
        per_k,
        total,
        remainder_bound: 0.5_f64.powi(k_max as i32),
        estimator: cfg.estimator,
        seed: cfg.seed,
        note: note.into(),
    })
}
