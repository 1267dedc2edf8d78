//! Closed-form approximation and transferability bounds, falsifiers for the
//! operator assumptions, and resolution sweeps pairing measurements with
//! bounds.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{gnn_as_operator, gnn_signal_gap, GnnParams};
use crate::metric::{dm_estimate, ProfileSampleConfig};
use crate::operator::{discretize, AssumptionFlag, Domain, POperator};
use crate::rng;
use crate::signal::{
    measured_lipschitz, midpoints, restrict, sample_lipschitz_tuple, FiniteSignal, Signal, SignalFamily,
    LIPSCHITZ_SLACK, LIPSCHITZ_STEP,
};

/// Which piece-structure hypothesis a bound is instantiated with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum Variant {
    ConstantToLipschitz { c_c: f64 },
    ConstantToLipschitzWhp { c_c: f64 },
    LipschitzToLipschitz,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ConstantToLipschitz { .. } => "constant-to-lipschitz",
            Self::ConstantToLipschitzWhp { .. } => "constant-to-lipschitz-whp",
            Self::LipschitzToLipschitz => "lipschitz-to-lipschitz",
        }
    }

    pub fn c_c(&self) -> Option<f64> {
        match self {
            Self::ConstantToLipschitz { c_c } | Self::ConstantToLipschitzWhp { c_c } => Some(*c_c),
            Self::LipschitzToLipschitz => None,
        }
    }

    /// Variant matching an operator's declared flags at resolution `n`.
    pub fn for_operator(a: &POperator, n: usize) -> Option<Self> {
        let c = a.constants();
        if (c.holds_at(AssumptionFlag::ConstantToConstant, n) || c.holds_at(AssumptionFlag::ConstantToLipschitz, n))
            && c.c_c.is_some()
        {
            Some(Self::ConstantToLipschitz { c_c: c.c_c.unwrap_or(0.0) })
        } else if c.holds_at(AssumptionFlag::LipschitzToLipschitz, n) {
            Some(Self::LipschitzToLipschitz)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "thm41")]
    Thm41,
    #[serde(rename = "cor42")]
    Cor42,
    #[serde(rename = "thm43-approx")]
    Thm43Approx,
    #[serde(rename = "thm43-transfer")]
    Thm43Transfer,
    #[serde(rename = "general-D1-variant")]
    GeneralD1Variant,
    #[serde(rename = "lemma-E3")]
    LemmaE3,
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Thm41 => "thm41",
            Self::Cor42 => "cor42",
            Self::Thm43Approx => "thm43-approx",
            Self::Thm43Transfer => "thm43-transfer",
            Self::GeneralD1Variant => "general-D1-variant",
            Self::LemmaE3 => "lemma-E3",
        }
    }

    pub fn needs_gnn(&self) -> bool {
        matches!(self, Self::Thm43Approx | Self::Thm43Transfer | Self::LemmaE3)
    }
}

/// Filter order `K`, depth `L` and widest layer `n_max` of a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnShape {
    pub k: usize,
    pub l: usize,
    pub n_max: usize,
}

/// `2√(C_A C_v / n) + (C_v + 1)/n`.
pub fn thm41_bound(c_a: f64, c_v: f64, n: usize) -> f64 {
    let n = n as f64;
    2.0 * (c_a * c_v / n).sqrt() + (c_v + 1.0) / n
}

/// `(m^{-1/2} + n^{-1/2}) 2√(C_A C_v) + (1/m + 1/n)(C_v + 1)`.
pub fn cor42_bound(c_a: f64, c_v: f64, m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    (m.powf(-0.5) + n.powf(-0.5)) * 2.0 * (c_a * c_v).sqrt() + (1.0 / m + 1.0 / n) * (c_v + 1.0)
}

/// General form with the constant 8 and explicit `C_c` terms.
pub fn general_d1_bound(c_a: f64, c_v: f64, n: usize, variant: Variant) -> f64 {
    let n = n as f64;
    match variant {
        Variant::ConstantToLipschitz { c_c } => 8.0 * ((c_a * c_v / n).sqrt() + (c_v + c_c) / n),
        Variant::ConstantToLipschitzWhp { c_c } => 8.0 * (((c_a * c_v + 1.0) / n).sqrt() + (c_v + c_c + 1.0) / n),
        Variant::LipschitzToLipschitz => 8.0 * (((c_a * c_v + 1.0) / n).sqrt() + (c_v + 1.0) / n),
    }
}

/// `(n_max Σ_{i=1}^K C_A^i)^L`.
pub fn composite_c_a(c_a: f64, shape: GnnShape) -> f64 {
    let sum: f64 = (1..=shape.k).map(|i| c_a.powi(i as i32)).sum();
    (shape.n_max as f64 * sum).powi(shape.l as i32)
}

/// `(P₁ √(radicand), additive coefficient)` of the network bound, with
/// `P₁ = 3^{KL}` and `P₂ = 3^K K²`.
fn thm43_terms(c_a: f64, c_v: f64, shape: GnnShape, variant: Variant) -> (f64, f64) {
    let k = shape.k as i32;
    let p1 = 3f64.powi(k * shape.l as i32);
    let p2 = 3f64.powi(k) * (k * k) as f64;
    let bar = composite_c_a(c_a, shape);
    let tail = shape.n_max as f64 * c_a.powi(k) * p2;
    match variant {
        Variant::ConstantToLipschitz { c_c } => (p1 * (bar * c_v + c_c * tail).sqrt(), c_v),
        Variant::ConstantToLipschitzWhp { c_c } => (p1 * (bar * c_v + (c_c + 1.0) * tail).sqrt(), c_v + 1.0),
        Variant::LipschitzToLipschitz => (p1 * (bar * c_v).sqrt(), c_v + 1.0),
    }
}

/// Network approximation bound between `Φ(h, A, ·)` and `Φ(h, A_n, ·)`.
pub fn thm43_bound(c_a: f64, c_v: f64, shape: GnnShape, n: usize, variant: Variant) -> f64 {
    let (root, add) = thm43_terms(c_a, c_v, shape, variant);
    let n = n as f64;
    root / n.sqrt() + add / n
}

/// Transfer form between two discretizations `A_m` and `A_n`.
pub fn thm43_transfer_bound(c_a: f64, c_v: f64, shape: GnnShape, m: usize, n: usize, variant: Variant) -> f64 {
    let (root, add) = thm43_terms(c_a, c_v, shape, variant);
    let (m, n) = (m as f64, n as f64);
    (m.powf(-0.5) + n.powf(-0.5)) * root + (1.0 / m + 1.0 / n) * add
}

/// `n^{-1}(3^K K n_max C_A^K)^L max(C_v, 3^K K² X n_max C_A^K)` with `X`
/// equal to `C_c`, `C_c + 1` or `C_v + 1` depending on the variant.
pub fn lemma_e3_bound(c_a: f64, c_v: f64, shape: GnnShape, n: usize, variant: Variant) -> f64 {
    let k = shape.k as i32;
    let three_k = 3f64.powi(k);
    let spread = shape.n_max as f64 * c_a.powi(k);
    let x = match variant {
        Variant::ConstantToLipschitz { c_c } => c_c,
        Variant::ConstantToLipschitzWhp { c_c } => c_c + 1.0,
        Variant::LipschitzToLipschitz => c_v + 1.0,
    };
    let growth = (three_k * shape.k as f64 * spread).powi(shape.l as i32);
    growth * c_v.max(three_k * (k * k) as f64 * x * spread) / n as f64
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConstantsUsed {
    #[serde(rename = "C_A")]
    pub c_a: f64,
    #[serde(rename = "C_v")]
    pub c_v: f64,
    #[serde(rename = "C_c")]
    pub c_c: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub n_max: Option<usize>,
    pub n: usize,
    pub m: Option<usize>,
}

/// One measured distance next to its predicted bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub variant: Option<&'static str>,
    pub constants_used: ConstantsUsed,
    pub bound_value: f64,
    pub measured: Option<f64>,
    pub pass: Option<bool>,
    pub num_tuples: Option<usize>,
    pub seed: Option<u64>,
    /// False when the resolution lies outside the operator's declared set.
    pub hypothesis_ok: bool,
}

impl BoundReport {
    pub fn new(theorem: Theorem, constants_used: ConstantsUsed, bound_value: f64) -> Self {
        Self {
            theorem,
            variant: None,
            constants_used,
            bound_value,
            measured: None,
            pass: None,
            num_tuples: None,
            seed: None,
            hypothesis_ok: true,
        }
    }

    pub fn with_measured(mut self, measured: f64) -> Self {
        self.measured = Some(measured);
        self.pass = Some(measured <= self.bound_value);
        self
    }
}

pub const CSV_HEADER: [&str; 16] = [
    "theorem",
    "variant",
    "n",
    "m",
    "C_A",
    "C_v",
    "C_c",
    "K",
    "L",
    "n_max",
    "bound",
    "measured",
    "pass",
    "num_tuples",
    "seed",
    "hypothesis_ok",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_reports_csv<W: Write>(rows: &[BoundReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(std::io::Error::from)?;
    for r in rows {
        let c = &r.constants_used;
        w.write_record([
            r.theorem.name().to_string(),
            r.variant.unwrap_or("").to_string(),
            c.n.to_string(),
            cell(c.m),
            c.c_a.to_string(),
            c.c_v.to_string(),
            cell(c.c_c),
            cell(c.k),
            cell(c.l),
            cell(c.n_max),
            r.bound_value.to_string(),
            cell(r.measured),
            cell(r.pass),
            cell(r.num_tuples),
            cell(r.seed),
            r.hypothesis_ok.to_string(),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reports_json<W: Write>(rows: &[BoundReport], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    pub declared: f64,
    pub trials: usize,
    pub pass: bool,
    /// Trial index attaining the maximum ratio.
    pub witness: Option<usize>,
}

/// Random pairs for the Lipschitz falsifier: piecewise-linear signals on
/// `[0, 1]` or uniform vectors on a grid.
fn random_pair(domain: Domain, seed: u64, t: usize) -> (crate::signal::DomainSignal, crate::signal::DomainSignal) {
    use crate::signal::DomainSignal;
    match domain {
        Domain::Continuum => {
            let mut pair =
                sample_lipschitz_tuple(2, 8.0, rng::derive_seed(seed, &[t as u64]), SignalFamily::PiecewiseLinear);
            let g = pair.pop().expect("two signals");
            let f = pair.pop().expect("two signals");
            (DomainSignal::Continuum(f), DomainSignal::Continuum(g))
        }
        Domain::Grid(n) => {
            let mut r = rng::stream(seed, &[t as u64]);
            let mut draw = || FiniteSignal::new((0..n).map(|_| r.gen_range(-1.0..=1.0)).collect()).expect("finite");
            (DomainSignal::Finite(draw()), DomainSignal::Finite(draw()))
        }
    }
}

fn l2_gap(a: &crate::signal::DomainSignal, b: &crate::signal::DomainSignal) -> f64 {
    use crate::signal::DomainSignal;
    match (a, b) {
        (DomainSignal::Continuum(f), DomainSignal::Continuum(g)) => f.l2_distance(g),
        (DomainSignal::Finite(x), DomainSignal::Finite(y)) => x.l2_distance(y).expect("same resolution"),
        _ => unreachable!("operators preserve their domain"),
    }
}

/// Largest `‖Af − Ag‖₂ / ‖f − g‖₂` over random pairs; passes when it stays
/// within `c_a · 1.01`. A falsifier, not a proof.
pub fn check_lipschitz_map(a: &POperator, c_a: f64, trials: usize, seed: u64) -> Result<LipschitzReport> {
    let ratios = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (f, g) = random_pair(a.domain(), seed, t);
            let num = l2_gap(&a.apply(&f)?, &a.apply(&g)?);
            let den = l2_gap(&f, &g);
            Ok(if den > 0.0 { num / den } else { 0.0 })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (witness, max_ratio) =
        ratios
            .iter()
            .copied()
            .enumerate()
            .fold((None, 0.0), |(w, m), (i, r)| if r > m { (Some(i), r) } else { (w, m) });
    Ok(LipschitzReport { max_ratio, declared: c_a, trials, pass: max_ratio <= c_a * LIPSCHITZ_SLACK, witness })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PieceMode {
    ConstantToConstant,
    /// Inputs are `c_v`-Lipschitz; images must be too.
    LipschitzToLipschitz {
        c_v: f64,
    },
    /// Images of piecewise-constant inputs are `c`-Lipschitz on each cell.
    ConstantToLipschitz {
        c: f64,
    },
}

/// Within-cell spread allowed by the constant-to-constant check.
pub const PIECE_SPREAD_TOLERANCE: f64 = 1e-9;

/// Probes per cell in the constant-to-constant check.
pub const PROBES_PER_CELL: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PieceReport {
    pub mode: PieceMode,
    pub n: usize,
    /// Largest within-cell spread, or largest measured slope.
    pub measured: f64,
    pub threshold: f64,
    pub trials: usize,
    pub pass: bool,
    /// Location of the worst probe.
    pub witness: Option<f64>,
}

fn random_pc(n: usize, seed: u64, t: usize) -> Signal {
    let mut r = rng::stream(seed, &[t as u64]);
    Signal::piecewise_constant((0..n).map(|_| r.gen_range(-1.0..=1.0)).collect()).expect("n >= 1")
}

/// Falsifier for the piece-structure assumptions at resolution `n`.
pub fn check_piece_structure(
    a: &POperator,
    n: usize,
    mode: PieceMode,
    trials: usize,
    seed: u64,
) -> Result<PieceReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    if a.domain() != Domain::Continuum {
        return Err(Error::DomainMismatch(format!("{} is not a continuum operator", a.label())));
    }
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            Ok(match mode {
                PieceMode::ConstantToConstant => {
                    let g = a.apply_signal(&random_pc(n, seed, t))?;
                    let mut worst = (0.0, 0.0);
                    for cell in 0..n {
                        let probes: Vec<(f64, f64)> = midpoints(PROBES_PER_CELL)
                            .map(|p| {
                                let x = (cell as f64 + p) / n as f64;
                                (x, g.at(x))
                            })
                            .collect();
                        let hi = probes.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                        let lo = probes.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                        if hi - lo > worst.0 {
                            worst = (hi - lo, probes[0].0);
                        }
                    }
                    worst
                }
                PieceMode::LipschitzToLipschitz { c_v } => {
                    let f = &sample_lipschitz_tuple(
                        1,
                        c_v,
                        rng::derive_seed(seed, &[t as u64]),
                        SignalFamily::PiecewiseLinear,
                    )[0];
                    (measured_lipschitz(&a.apply_signal(f)?, LIPSCHITZ_STEP), 0.0)
                }
                PieceMode::ConstantToLipschitz { .. } => {
                    let g = a.apply_signal(&random_pc(n, seed, t))?;
                    let mut worst = (0.0, 0.0);
                    let steps = ((1.0 / (n as f64 * LIPSCHITZ_STEP)).ceil() as usize).max(2);
                    let h = 1.0 / (n * steps) as f64;
                    for cell in 0..n {
                        // stay inside the open cell
                        let xs: Vec<f64> = (0..steps).map(|s| (cell * steps + s) as f64 * h + 0.5 * h).collect();
                        for w in xs.windows(2) {
                            let slope = (g.at(w[1]) - g.at(w[0])).abs() / h;
                            if slope > worst.0 {
                                worst = (slope, w[0]);
                            }
                        }
                    }
                    worst
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (measured, witness) =
        per_trial.into_iter().fold((0.0, None), |(m, w), (v, x)| if v > m { (v, Some(x)) } else { (m, w) });
    let threshold = match mode {
        PieceMode::ConstantToConstant => PIECE_SPREAD_TOLERANCE,
        PieceMode::LipschitzToLipschitz { c_v } => c_v * LIPSCHITZ_SLACK,
        PieceMode::ConstantToLipschitz { c } => c * LIPSCHITZ_SLACK,
    };
    Ok(PieceReport { mode, n, measured, threshold, trials, pass: measured <= threshold, witness })
}

/// Settings shared by every row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub profile: ProfileSampleConfig,
    pub k_max: usize,
    pub gnn: Option<GnnParams>,
    /// Overrides the variant derived from the operator's flags.
    pub variant: Option<Variant>,
}

impl SweepConfig {
    pub fn new(profile: ProfileSampleConfig, k_max: usize) -> Self {
        Self { profile, k_max, gnn: None, variant: None }
    }
}

fn hypothesis_holds(a: &POperator, n: usize) -> bool {
    let c = a.constants();
    [AssumptionFlag::ConstantToConstant, AssumptionFlag::LipschitzToLipschitz, AssumptionFlag::ConstantToLipschitz]
        .into_iter()
        .any(|f| c.holds_at(f, n))
}

/// For each resolution (or consecutive pair for the transfer forms), builds
/// the discretization, measures, and evaluates the matching bound. Rows
/// outside the operator's resolution set are measured anyway and flagged.
pub fn run_resolution_sweep(
    a: &POperator,
    resolutions: &[usize],
    cfg: &SweepConfig,
    theorem: Theorem,
) -> Result<Vec<BoundReport>> {
    if a.domain() != Domain::Continuum {
        return Err(Error::DomainMismatch(format!("sweeps need a continuum operator, got {}", a.label())));
    }
    if let Some(&bad) = resolutions.iter().find(|&&n| n == 0) {
        return Err(Error::InvalidParameter(format!("resolution {bad} must be positive")));
    }
    let gnn = match (theorem.needs_gnn(), &cfg.gnn) {
        (true, None) => return Err(Error::Config(format!("{} needs GNN parameters", theorem.name()))),
        (true, Some(p)) => {
            p.validate()?;
            Some(p)
        }
        (false, _) => None,
    };
    let c_a = a.constants().c_a;
    let c_v = cfg.profile.c_v;
    let variant_at =
        |n: usize| cfg.variant.or_else(|| Variant::for_operator(a, n)).unwrap_or(Variant::LipschitzToLipschitz);
    let base = |n: usize, m: Option<usize>| ConstantsUsed { c_a, c_v, n, m, ..Default::default() };
    let with_gnn = |mut c: ConstantsUsed, variant: Variant| {
        if let Some(p) = gnn {
            let s = p.shape();
            c.k = Some(s.k);
            c.l = Some(s.l);
            c.n_max = Some(s.n_max);
        }
        c.c_c = variant.c_c();
        c
    };
    let finish = |mut row: BoundReport, measured: f64, ok: bool, variant: Option<Variant>| {
        row = row.with_measured(measured);
        row.variant = variant.map(|v| v.name());
        row.num_tuples = Some(cfg.profile.num_tuples);
        row.seed = Some(cfg.profile.seed);
        row.hypothesis_ok = ok;
        row
    };

    let mut rows = Vec::new();
    match theorem {
        Theorem::Thm41 | Theorem::GeneralD1Variant => {
            for &n in resolutions {
                let an = discretize(a, n)?;
                let measured = dm_estimate(a, &an, cfg.k_max, &cfg.profile)?.total;
                let ok = hypothesis_holds(a, n);
                let deterministic = a.constants().holds_at(AssumptionFlag::ConstantToConstant, n)
                    || a.constants().holds_at(AssumptionFlag::LipschitzToLipschitz, n);
                let row = if theorem == Theorem::Thm41 && (deterministic || !ok) {
                    BoundReport::new(Theorem::Thm41, base(n, None), thm41_bound(c_a, c_v, n))
                } else {
                    let variant = variant_at(n);
                    let mut c = base(n, None);
                    c.c_c = variant.c_c();
                    let mut r = BoundReport::new(Theorem::GeneralD1Variant, c, general_d1_bound(c_a, c_v, n, variant));
                    r.variant = Some(variant.name());
                    r
                };
                let variant = row.variant;
                let mut row = finish(row, measured, ok, None);
                row.variant = variant;
                rows.push(row);
            }
        }
        Theorem::Cor42 => {
            for w in resolutions.windows(2) {
                let (m, n) = (w[0], w[1]);
                let measured = dm_estimate(&discretize(a, m)?, &discretize(a, n)?, cfg.k_max, &cfg.profile)?.total;
                let ok = hypothesis_holds(a, m) && hypothesis_holds(a, n);
                let row = BoundReport::new(Theorem::Cor42, base(n, Some(m)), cor42_bound(c_a, c_v, m, n));
                rows.push(finish(row, measured, ok, None));
            }
        }
        Theorem::Thm43Approx => {
            let p = gnn.expect("checked");
            let phi = gnn_as_operator(p, a)?;
            for &n in resolutions {
                let phi_n = gnn_as_operator(p, &discretize(a, n)?)?;
                let measured = dm_estimate(&phi, &phi_n, cfg.k_max, &cfg.profile)?.total;
                let variant = variant_at(n);
                let bound = thm43_bound(c_a, c_v, p.shape(), n, variant);
                let row = BoundReport::new(Theorem::Thm43Approx, with_gnn(base(n, None), variant), bound);
                rows.push(finish(row, measured, hypothesis_holds(a, n), Some(variant)));
            }
        }
        Theorem::Thm43Transfer => {
            let p = gnn.expect("checked");
            for w in resolutions.windows(2) {
                let (m, n) = (w[0], w[1]);
                let phi_m = gnn_as_operator(p, &discretize(a, m)?)?;
                let phi_n = gnn_as_operator(p, &discretize(a, n)?)?;
                let measured = dm_estimate(&phi_m, &phi_n, cfg.k_max, &cfg.profile)?.total;
                let variant = variant_at(n);
                let bound = thm43_transfer_bound(c_a, c_v, p.shape(), m, n, variant);
                let row = BoundReport::new(Theorem::Thm43Transfer, with_gnn(base(n, Some(m)), variant), bound);
                rows.push(finish(row, measured, hypothesis_holds(a, m) && hypothesis_holds(a, n), Some(variant)));
            }
        }
        Theorem::LemmaE3 => {
            let p = gnn.expect("checked");
            for &n in resolutions {
                let variant = variant_at(n);
                let gaps = (0..cfg.profile.num_tuples)
                    .into_par_iter()
                    .map(|t| {
                        let seed = rng::derive_seed(cfg.profile.seed, &[1, t as u64, 0]);
                        let f = &sample_lipschitz_tuple(1, c_v, seed, cfg.profile.family)[0];
                        gnn_signal_gap(p, a, n, &restrict(f, n), c_v, variant).map(|g| g.gap)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let measured = gaps.into_iter().fold(0.0, f64::max);
                let bound = lemma_e3_bound(c_a, c_v, p.shape(), n, variant);
                let row = BoundReport::new(Theorem::LemmaE3, with_gnn(base(n, None), variant), bound);
                rows.push(finish(row, measured, hypothesis_holds(a, n), Some(variant)));
            }
        }
    }
    Ok(rows)
}
