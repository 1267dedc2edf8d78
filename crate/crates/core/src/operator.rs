//! P-operators on `[0, 1]` and on grids.
//!
//! A [`POperator`] pairs an action with declared constants. Continuum
//! operators act lazily: applying one returns a signal whose evaluator
//! closes over the input, so composites only pay for the points that are
//! actually probed. Grid operators act on [`FiniteSignal`]s; linear ones can
//! be realized as a matrix on demand.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Activation;
use crate::rng;
use crate::signal::{
    cell_index, extend_pc, linear_combination, map_pointwise, midpoints, restrict, sample_lipschitz_tuple,
    DomainSignal, FiniteSignal, Signal, SignalFamily, DEFAULT_QUADRATURE,
};

/// Largest hypercube dimension whose binary digits stay exact in an `f64`.
pub const MAX_HYPERCUBE_DIM: usize = 40;

/// Default shift for graphings, `1/√2` rounded to `f64`.
pub const DEFAULT_SHIFT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Tolerance for matrix and kernel symmetry checks.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Graphon,
    ShiftGraphing,
    CopiesGraphing,
    Hypercube,
    FiniteMatrix,
    AlgebraicComposite,
    Gnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Continuum,
    Grid(usize),
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Continuum => f.write_str("[0,1]"),
            Self::Grid(n) => write!(f, "[{n}]/{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionFlag {
    ConstantToConstant,
    LipschitzToLipschitz,
    ConstantToLipschitz,
}

/// Resolutions at which piece-structure assumptions hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResolutionSet {
    Empty,
    All,
    /// Divisors of `N`.
    Divisors(usize),
    /// `{2, 4, ..., 2^e}`.
    PowersOfTwo(u32),
    Finite(BTreeSet<usize>),
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn divisors(n: usize) -> BTreeSet<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

impl ResolutionSet {
    pub fn contains(&self, n: usize) -> bool {
        match self {
            Self::Empty => false,
            Self::All => n >= 1,
            Self::Divisors(big) => n >= 1 && big % n == 0,
            Self::PowersOfTwo(e) => n >= 2 && n.is_power_of_two() && n.trailing_zeros() <= *e,
            Self::Finite(s) => s.contains(&n),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Self::Empty => true,
            Self::Finite(s) => s.is_empty(),
            Self::PowersOfTwo(e) => *e == 0,
            _ => false,
        }
    }

    pub fn intersect(&self, other: &ResolutionSet) -> ResolutionSet {
        use ResolutionSet::*;
        match (self, other) {
            (Empty, _) | (_, Empty) => Empty,
            (All, x) | (x, All) => x.clone(),
            (PowersOfTwo(a), PowersOfTwo(b)) => PowersOfTwo(*a.min(b)),
            (Divisors(a), Divisors(b)) => Divisors(gcd(*a, *b)),
            (Finite(s), x) | (x, Finite(s)) => Finite(s.iter().copied().filter(|n| x.contains(*n)).collect()),
            (Divisors(n), x) | (x, Divisors(n)) => {
                Finite(divisors(*n).into_iter().filter(|d| x.contains(*d)).collect())
            }
        }
    }
}

impl fmt::Display for ResolutionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => f.write_str("{}"),
            Self::All => f.write_str("all"),
            Self::Divisors(n) => write!(f, "divisors({n})"),
            Self::PowersOfTwo(e) => write!(f, "{{2,...,2^{e}}}"),
            Self::Finite(s) => {
                let items: Vec<String> = s.iter().map(|n| n.to_string()).collect();
                write!(f, "{{{}}}", items.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorConstants {
    /// Lipschitz constant in `L²`.
    pub c_a: f64,
    /// Lipschitz constant of images of constant pieces, when known.
    pub c_c: Option<f64>,
    pub resolution_set: ResolutionSet,
    pub flags: BTreeSet<AssumptionFlag>,
}

impl OperatorConstants {
    pub fn new(c_a: f64) -> Self {
        Self { c_a, c_c: None, resolution_set: ResolutionSet::Empty, flags: BTreeSet::new() }
    }

    fn with_pieces(mut self, c_c: Option<f64>, set: ResolutionSet, flags: &[AssumptionFlag]) -> Self {
        self.c_c = c_c;
        self.resolution_set = set;
        self.flags = flags.iter().copied().collect();
        self
    }

    pub fn has(&self, flag: AssumptionFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// True when `flag` is declared and `n` lies in the resolution set.
    pub fn holds_at(&self, flag: AssumptionFlag, n: usize) -> bool {
        self.has(flag) && self.resolution_set.contains(n)
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("matrix must have at least one row".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Shape(format!("row {bad} has {} entries, expected {n}", rows[bad].len())));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from its columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.len();
        let mut m = Self::zeros(n);
        for (v, col) in columns.iter().enumerate() {
            for (u, x) in col.iter().enumerate() {
                m.data[u * n + v] = *x;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|x| alpha * x).collect() }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `max(‖M‖₁, ‖M‖∞)`, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let rows = (0..self.n).map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>());
        let cols = (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

/// Reads a matrix from CSV: a first record holding `n`, then `n` rows.
pub fn load_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty matrix file", path.display())))?
        .map_err(|e| Error::Config(e.to_string()))?;
    let n: usize = header
        .get(0)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("{}: first line must hold n", path.display())))?;
    let mut rows = Vec::with_capacity(n);
    for record in records {
        let record = record.map_err(|e| Error::Config(e.to_string()))?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: {s:?}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Config(format!("{}: expected {n} rows, found {}", path.display(), rows.len())));
    }
    Matrix::from_rows(rows)
}

type ContinuumFn = Arc<dyn Fn(&Signal) -> Signal + Send + Sync>;
type GridFn = Arc<dyn Fn(&FiniteSignal) -> FiniteSignal + Send + Sync>;

#[derive(Clone)]
enum Action {
    Continuum(ContinuumFn),
    Grid(GridFn),
}

/// Lazily built matrix of a linear grid operator.
#[derive(Clone)]
struct Realization {
    cell: Arc<OnceLock<Matrix>>,
    build: Arc<dyn Fn() -> Matrix + Send + Sync>,
}

impl Realization {
    fn ready(m: Matrix) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(m);
        Self { cell: Arc::new(cell), build: Arc::new(|| unreachable!("matrix already set")) }
    }

    fn get(&self) -> &Matrix {
        self.cell.get_or_init(|| (self.build)())
    }
}

/// A possibly nonlinear operator with declared constants.
///
/// `lineage` names the continuum object an operator was built from.
/// Discretizations and GNNs inherit it, which is what licenses pairing
/// test functions across two operators.
#[derive(Clone)]
pub struct POperator {
    kind: OperatorKind,
    domain: Domain,
    constants: OperatorConstants,
    is_linear: bool,
    is_self_adjoint: bool,
    lineage: Arc<str>,
    label: String,
    action: Action,
    realization: Option<Realization>,
}

impl fmt::Debug for POperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("POperator")
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("label", &self.label)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl POperator {
    #[allow(clippy::too_many_arguments)]
    fn continuum<F>(
        kind: OperatorKind,
        constants: OperatorConstants,
        is_linear: bool,
        is_self_adjoint: bool,
        lineage: &str,
        label: String,
        f: F,
    ) -> Self
    where
        F: Fn(&Signal) -> Signal + Send + Sync + 'static,
    {
        Self {
            kind,
            domain: Domain::Continuum,
            constants,
            is_linear,
            is_self_adjoint,
            lineage: Arc::from(lineage),
            label,
            action: Action::Continuum(Arc::new(f)),
            realization: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn grid<F>(
        kind: OperatorKind,
        n: usize,
        constants: OperatorConstants,
        is_linear: bool,
        is_self_adjoint: bool,
        lineage: &str,
        label: String,
        f: F,
    ) -> Self
    where
        F: Fn(&FiniteSignal) -> FiniteSignal + Send + Sync + 'static,
    {
        Self {
            kind,
            domain: Domain::Grid(n),
            constants,
            is_linear,
            is_self_adjoint,
            lineage: Arc::from(lineage),
            label,
            action: Action::Grid(Arc::new(f)),
            realization: None,
        }
    }

    /// Builds an operator from a raw action. Constants are trusted.
    pub fn from_continuum_fn<F>(kind: OperatorKind, constants: OperatorConstants, lineage: &str, f: F) -> Self
    where
        F: Fn(&Signal) -> Signal + Send + Sync + 'static,
    {
        Self::continuum(kind, constants, false, false, lineage, lineage.to_string(), f)
    }

    pub fn from_grid_fn<F>(kind: OperatorKind, n: usize, constants: OperatorConstants, lineage: &str, f: F) -> Self
    where
        F: Fn(&FiniteSignal) -> FiniteSignal + Send + Sync + 'static,
    {
        Self::grid(kind, n, constants, false, false, lineage, lineage.to_string(), f)
    }

    pub fn identity(domain: Domain) -> Self {
        let constants = OperatorConstants::new(1.0).with_pieces(
            Some(0.0),
            ResolutionSet::All,
            &[AssumptionFlag::ConstantToConstant, AssumptionFlag::LipschitzToLipschitz],
        );
        let label = "identity".to_string();
        match domain {
            Domain::Continuum => {
                Self::continuum(OperatorKind::AlgebraicComposite, constants, true, true, "identity", label, |f| {
                    f.clone()
                })
            }
            Domain::Grid(n) => {
                let mut op =
                    Self::grid(OperatorKind::AlgebraicComposite, n, constants, true, true, "identity", label, |x| {
                        x.clone()
                    });
                op.realization = Some(Realization::ready(Matrix::identity(n)));
                op
            }
        }
    }

    /// `f ↦ c`, the constant map.
    pub fn constant_output(c: f64, domain: Domain) -> Self {
        let constants = OperatorConstants::new(0.0).with_pieces(
            Some(0.0),
            ResolutionSet::All,
            &[AssumptionFlag::ConstantToConstant, AssumptionFlag::LipschitzToLipschitz],
        );
        let lineage = format!("constant({c})");
        let linear = c == 0.0;
        match domain {
            Domain::Continuum => Self::continuum(
                OperatorKind::AlgebraicComposite,
                constants,
                linear,
                linear,
                &lineage,
                lineage.clone(),
                move |_| Signal::constant(c),
            ),
            Domain::Grid(n) => Self::grid(
                OperatorKind::AlgebraicComposite,
                n,
                constants,
                linear,
                linear,
                &lineage,
                lineage.clone(),
                move |x| FiniteSignal::constant(c, x.n()),
            ),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn constants(&self) -> &OperatorConstants {
        &self.constants
    }

    pub fn is_linear(&self) -> bool {
        self.is_linear
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.is_self_adjoint
    }

    pub fn lineage(&self) -> &str {
        &self.lineage
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_constants(mut self, constants: OperatorConstants) -> Self {
        self.constants = constants;
        self
    }

    pub(crate) fn with_kind(mut self, kind: OperatorKind) -> Self {
        self.kind = kind;
        self
    }

    pub(crate) fn with_structure(mut self, is_linear: bool, is_self_adjoint: bool) -> Self {
        self.is_linear = is_linear;
        self.is_self_adjoint = is_self_adjoint;
        self
    }

    pub fn apply_signal(&self, f: &Signal) -> Result<Signal> {
        match &self.action {
            Action::Continuum(g) => Ok(g(f)),
            Action::Grid(_) => {
                Err(Error::DomainMismatch(format!("{} acts on {}, got a continuum signal", self.label, self.domain)))
            }
        }
    }

    pub fn apply_finite(&self, x: &FiniteSignal) -> Result<FiniteSignal> {
        match &self.action {
            Action::Grid(g) => {
                let n = self.grid_size();
                if x.n() != n {
                    return Err(Error::ResolutionMismatch { left: n, right: x.n() });
                }
                Ok(g(x))
            }
            Action::Continuum(_) => {
                Err(Error::DomainMismatch(format!("{} acts on [0,1], got a grid signal", self.label)))
            }
        }
    }

    pub fn apply(&self, x: &DomainSignal) -> Result<DomainSignal> {
        match x {
            DomainSignal::Continuum(f) => self.apply_signal(f).map(DomainSignal::Continuum),
            DomainSignal::Finite(v) => self.apply_finite(v).map(DomainSignal::Finite),
        }
    }

    /// Matrix of a linear grid operator in the action `X ↦ T X`, built on
    /// first use.
    pub fn matrix(&self) -> Option<&Matrix> {
        self.realization.as_ref().map(Realization::get)
    }

    fn grid_size(&self) -> usize {
        match self.domain {
            Domain::Grid(n) => n,
            Domain::Continuum => 0,
        }
    }
}

/// A symmetric kernel on `[0, 1]²` with known bounds.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    sup_abs: f64,
    lipschitz: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("sup_abs", &self.sup_abs)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Default width of the gaussian-bump kernel; keeps it 1-Lipschitz.
pub const DEFAULT_BUMP_WIDTH: f64 = 0.7;

impl Kernel {
    /// `sup_abs` bounds `|W|`, `lipschitz` bounds the slope in each variable.
    pub fn custom<F>(name: impl Into<String>, f: F, sup_abs: f64, lipschitz: f64) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), eval: Arc::new(f), sup_abs, lipschitz }
    }

    pub fn constant(w: f64) -> Self {
        Self::custom(format!("constant({w})"), move |_, _| w, w.abs(), 0.0)
    }

    pub fn product() -> Self {
        Self::custom("product", |x, y| x * y, 1.0, 1.0)
    }

    /// `exp(-(x-y)²/(2σ²))`, with slope at most `e^{-1/2}/σ`.
    pub fn gaussian_bump(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gaussian-bump width must be positive, got {sigma}")));
        }
        let lip = (-0.5_f64).exp() / sigma;
        let s2 = 2.0 * sigma * sigma;
        Ok(Self::custom(format!("gaussian-bump({sigma})"), move |x, y| (-(x - y) * (x - y) / s2).exp(), 1.0, lip))
    }

    pub fn min_kernel() -> Self {
        Self::custom("min", f64::min, 1.0, 1.0)
    }

    /// Looks up a kernel by registry id: `constant`, `product`,
    /// `gaussian-bump`, `min`. `param` is `w` or `σ` where relevant.
    pub fn from_id(id: &str, param: Option<f64>) -> Result<Self> {
        match id {
            "constant" => Ok(Self::constant(param.unwrap_or(1.0))),
            "product" => Ok(Self::product()),
            "gaussian-bump" => Self::gaussian_bump(param.unwrap_or(DEFAULT_BUMP_WIDTH)),
            "min" | "min-kernel" => Ok(Self::min_kernel()),
            other => Err(Error::InvalidParameter(format!("unknown kernel id {other:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }
}

pub fn make_graphon_op(kernel: Kernel, c_v: f64) -> Result<POperator> {
    make_graphon_op_with(kernel, c_v, DEFAULT_QUADRATURE)
}

/// Integral operator `f ↦ ∫ W(·, y) f(y) dy`, integrating on `quadrature`
/// midpoints.
pub fn make_graphon_op_with(kernel: Kernel, c_v: f64, quadrature: usize) -> Result<POperator> {
    if quadrature == 0 {
        return Err(Error::InvalidParameter("quadrature must be positive".into()));
    }
    if !kernel.sup_abs.is_finite() {
        return Err(Error::Precondition(format!("kernel {} is unbounded", kernel.name)));
    }
    if kernel.lipschitz > c_v * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "kernel {} has slope bound {} above C_v = {c_v}",
            kernel.name, kernel.lipschitz
        )));
    }
    let mut spot = rng::stream(0x0067_7261_7068_6f6e, &[]);
    for _ in 0..64 {
        let (x, y): (f64, f64) = (spot.gen(), spot.gen());
        let gap = (kernel.eval(x, y) - kernel.eval(y, x)).abs();
        if gap > SYMMETRY_TOLERANCE {
            return Err(Error::Asymmetric(format!("kernel {} differs by {gap} at ({x}, {y})", kernel.name)));
        }
    }
    let constants = OperatorConstants::new(kernel.sup_abs).with_pieces(
        None,
        ResolutionSet::All,
        &[AssumptionFlag::LipschitzToLipschitz],
    );
    let lineage = format!("graphon({})", kernel.name);
    let label = lineage.clone();
    let ground: Arc<[f64]> = midpoints(quadrature).collect();
    Ok(POperator::continuum(OperatorKind::Graphon, constants, true, true, &lineage, label, move |f| {
        let weight = 1.0 / quadrature as f64;
        let support: Vec<(f64, f64)> = ground.iter().map(|&y| (y, f.at(y))).filter(|(_, v)| *v != 0.0).collect();
        let mean_abs = support.iter().map(|(_, v)| v.abs()).sum::<f64>() * weight;
        let kernel = kernel.clone();
        let range = kernel.sup_abs * mean_abs;
        let lip = kernel.lipschitz * mean_abs;
        Signal::analytic(
            move |x| support.iter().map(|&(y, v)| kernel.eval(x, y) * v).sum::<f64>() * weight,
            range,
            Some(lip),
        )
    }))
}

#[inline]
fn wrap_unit(t: f64) -> f64 {
    t - t.floor()
}

/// `f ↦ f(x + a mod 1) + f(x − a mod 1)`, halved when `normalize`.
pub fn make_shift_graphing(a: f64, normalize: bool) -> Result<POperator> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("shift must lie in (0, 1), got {a}")));
    }
    let scale = if normalize { 0.5 } else { 1.0 };
    let constants = OperatorConstants::new(2.0 * scale);
    let lineage = format!("shift(a={a},normalize={normalize})");
    Ok(POperator::continuum(OperatorKind::ShiftGraphing, constants, true, true, &lineage, lineage.clone(), move |f| {
        let g = f.clone();
        let range = 2.0 * scale * f.range_bound();
        let lip = f.lipschitz_const().map(|l| 2.0 * scale * l);
        Signal::analytic(move |x| scale * (g.at(wrap_unit(x + a)) + g.at(wrap_unit(x - a))), range, lip)
    }))
}

/// `N` disjoint shrunk copies of the shift graphing, one per cell of
/// width `1/N`.
pub fn make_copies_graphing(copies: usize, a: f64) -> Result<POperator> {
    if copies == 0 {
        return Err(Error::InvalidParameter("number of copies must be at least 1".into()));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("shift must lie in (0, 1), got {a}")));
    }
    let constants = OperatorConstants::new(2.0).with_pieces(
        Some(0.0),
        ResolutionSet::Divisors(copies),
        &[AssumptionFlag::ConstantToConstant],
    );
    let lineage = format!("copies(N={copies},a={a})");
    let width = 1.0 / copies as f64;
    Ok(POperator::continuum(OperatorKind::CopiesGraphing, constants, true, true, &lineage, lineage.clone(), move |f| {
        let g = f.clone();
        let range = 2.0 * f.range_bound();
        Signal::analytic(
            move |x| {
                let j = cell_index(x, copies);
                let lo = j as f64 * width;
                let hi = (j + 1) as f64 / copies as f64;
                let offset = x - lo;
                // stays inside the cell (lo, hi]; 0 mod width maps to width
                let image = |t: f64| {
                    let r = t - (t / width).floor() * width;
                    let r = if r <= 0.0 { width } else { r.min(width) };
                    (lo + r).clamp(lo.next_up(), hi)
                };
                g.at(image(offset + a * width)) + g.at(image(offset - a * width))
            },
            range,
            None,
        )
    }))
}

/// Normalized adjacency of the `N`-dimensional hypercube graphing: the
/// average of `f` over the points whose binary expansion differs from `x`
/// in exactly one of the first `N` digits.
pub fn make_hypercube_op(dim: usize) -> Result<POperator> {
    if !(1..=MAX_HYPERCUBE_DIM).contains(&dim) {
        return Err(Error::InvalidParameter(format!(
            "hypercube dimension must lie in 1..={MAX_HYPERCUBE_DIM}, got {dim}"
        )));
    }
    let constants = OperatorConstants::new(1.0).with_pieces(
        Some(0.0),
        ResolutionSet::PowersOfTwo(dim as u32),
        &[AssumptionFlag::ConstantToConstant],
    );
    let lineage = format!("hypercube(N={dim})");
    Ok(POperator::continuum(OperatorKind::Hypercube, constants, true, true, &lineage, lineage.clone(), move |f| {
        if let Some(v) = f.cell_values().filter(|v| v.len().is_power_of_two()) {
            return Signal::piecewise_constant(hypercube_cells(v, dim))
                .expect("nonempty")
                .with_range_bound(f.range_bound());
        }
        let g = f.clone();
        Signal::analytic(
            move |x| (1..=dim).map(|i| g.at(flip_digit(x, i))).sum::<f64>() / dim as f64,
            f.range_bound(),
            None,
        )
    }))
}

/// Toggles the `i`-th binary digit after the radix point.
#[inline]
pub fn flip_digit(x: f64, i: usize) -> f64 {
    let scale = (1_u64 << i) as f64;
    let step = 1.0 / scale;
    if cell_index(x, 1 << i).is_multiple_of(2) {
        x + step
    } else {
        x - step
    }
}

/// Exact action on a piecewise-constant signal at resolution `2^m`: digits
/// beyond `m` leave the cell unchanged.
fn hypercube_cells(v: &[f64], dim: usize) -> Vec<f64> {
    let m = v.len().trailing_zeros() as usize;
    let flips = m.min(dim);
    let stay = (dim - flips) as f64;
    (0..v.len())
        .map(|c| {
            let moved: f64 = (1..=flips).map(|i| v[c ^ (1 << (m - i))]).sum();
            (moved + stay * v[c]) / dim as f64
        })
        .collect()
}

/// Finite operator `X ↦ (M/n) X` for a symmetric `M`.
pub fn make_finite_matrix_op(m: Matrix) -> Result<POperator> {
    let gap = m.max_asymmetry();
    if gap > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric(format!("matrix entries differ by {gap}")));
    }
    Ok(make_general_matrix_op(m))
}

/// Like [`make_finite_matrix_op`] without the symmetry requirement.
pub fn make_general_matrix_op(m: Matrix) -> POperator {
    let n = m.n();
    let t = m.scaled(1.0 / n as f64);
    let symmetric = t.max_asymmetry() <= SYMMETRY_TOLERANCE;
    let constants = OperatorConstants::new(t.norm_bound());
    let lineage = format!("matrix(n={n})");
    let realization = Realization::ready(t);
    let shared = realization.clone();
    let mut op = POperator::grid(
        OperatorKind::FiniteMatrix,
        n,
        constants,
        true,
        symmetric,
        &lineage,
        lineage.clone(),
        move |x| FiniteSignal::new(shared.get().matvec(x.values())).expect("finite"),
    );
    op.realization = Some(realization);
    op
}

/// Grid operator `X ↦ restrict(A(extend_pc X), m)`.
///
/// Linear operators are realized as an `m × m` matrix by probing indicator
/// signals the first time a non-constant input arrives; constant inputs
/// always take the direct route.
pub fn discretize(a: &POperator, m: usize) -> Result<POperator> {
    if m == 0 {
        return Err(Error::InvalidParameter("discretization resolution must be positive".into()));
    }
    let Action::Continuum(act) = &a.action else {
        return Err(Error::DomainMismatch(format!("{} is already a grid operator", a.label)));
    };
    let act = act.clone();
    let direct = move |x: &FiniteSignal| {
        let v = x.values();
        // a constant vector extends to a constant function, which every
        // operator handles without quadrature
        let f = if v.iter().all(|y| *y == v[0]) { Signal::constant(v[0]) } else { extend_pc(x) };
        restrict(&act(&f), m)
    };
    let label = format!("{}_{m}", a.label);
    let mut op = POperator {
        kind: a.kind,
        domain: Domain::Grid(m),
        constants: a.constants.clone(),
        is_linear: a.is_linear,
        is_self_adjoint: a.is_self_adjoint,
        lineage: a.lineage.clone(),
        label,
        action: Action::Grid(Arc::new(direct.clone())),
        realization: None,
    };
    if a.is_linear {
        let probe = direct.clone();
        let realization = Realization {
            cell: Arc::new(OnceLock::new()),
            build: Arc::new(move || {
                let columns: Vec<Vec<f64>> = (0..m)
                    .into_par_iter()
                    .map(|v| {
                        let mut e = vec![0.0; m];
                        e[v] = 1.0;
                        probe(&FiniteSignal::new(e).expect("finite")).into_values()
                    })
                    .collect();
                Matrix::from_columns(&columns)
            }),
        };
        let shared = realization.clone();
        op.action = Action::Grid(Arc::new(move |x: &FiniteSignal| {
            let v = x.values();
            if v.iter().all(|y| *y == v[0]) {
                direct(x)
            } else {
                FiniteSignal::new(shared.get().matvec(v)).expect("finite")
            }
        }));
        op.realization = Some(realization);
    }
    Ok(op)
}

fn same_space(a: &POperator, b: &POperator) -> Result<()> {
    if a.domain != b.domain {
        return Err(Error::DomainMismatch(format!("{} acts on {}, {} on {}", a.label, a.domain, b.label, b.domain)));
    }
    Ok(())
}

fn joined_lineage(a: &POperator, b: &POperator, sep: &str) -> String {
    if a.lineage == b.lineage {
        a.lineage.to_string()
    } else {
        format!("({}{sep}{})", a.lineage, b.lineage)
    }
}

pub fn op_add(a: &POperator, b: &POperator) -> Result<POperator> {
    same_space(a, b)?;
    let ca = &a.constants;
    let cb = &b.constants;
    let mut flags: BTreeSet<AssumptionFlag> = ca.flags.intersection(&cb.flags).copied().collect();
    // a sum of two C_v-Lipschitz images is only 2C_v-Lipschitz
    flags.remove(&AssumptionFlag::LipschitzToLipschitz);
    let constants = OperatorConstants {
        c_a: ca.c_a + cb.c_a,
        c_c: ca.c_c.zip(cb.c_c).map(|(x, y)| x + y),
        resolution_set: ca.resolution_set.intersect(&cb.resolution_set),
        flags,
    };
    let lineage = joined_lineage(a, b, "+");
    let label = format!("({} + {})", a.label, b.label);
    let linear = a.is_linear && b.is_linear;
    let sa = a.is_self_adjoint && b.is_self_adjoint;
    Ok(match (&a.action, &b.action) {
        (Action::Continuum(fa), Action::Continuum(fb)) => {
            let (fa, fb) = (fa.clone(), fb.clone());
            POperator::continuum(OperatorKind::AlgebraicComposite, constants, linear, sa, &lineage, label, move |f| {
                linear_combination(&[(1.0, fa(f)), (1.0, fb(f))])
            })
        }
        (Action::Grid(fa), Action::Grid(fb)) => {
            let (fa, fb) = (fa.clone(), fb.clone());
            POperator::grid(
                OperatorKind::AlgebraicComposite,
                a.grid_size(),
                constants,
                linear,
                sa,
                &lineage,
                label,
                move |x| {
                    let (u, v) = (fa(x), fb(x));
                    FiniteSignal::new(u.values().iter().zip(v.values()).map(|(p, q)| p + q).collect()).expect("finite")
                },
            )
        }
        _ => unreachable!("domains checked"),
    })
}

pub fn op_scale(alpha: f64, a: &POperator) -> POperator {
    let mut constants = a.constants.clone();
    constants.c_a *= alpha.abs();
    constants.c_c = constants.c_c.map(|c| c * alpha.abs());
    if alpha.abs() > 1.0 {
        constants.flags.remove(&AssumptionFlag::LipschitzToLipschitz);
    }
    let label = format!("{alpha}·{}", a.label);
    let mut op = match &a.action {
        Action::Continuum(fa) => {
            let fa = fa.clone();
            POperator::continuum(
                OperatorKind::AlgebraicComposite,
                constants,
                a.is_linear,
                a.is_self_adjoint,
                &a.lineage,
                label,
                move |f| fa(f).scaled(alpha),
            )
        }
        Action::Grid(fa) => {
            let fa = fa.clone();
            POperator::grid(
                OperatorKind::AlgebraicComposite,
                a.grid_size(),
                constants,
                a.is_linear,
                a.is_self_adjoint,
                &a.lineage,
                label,
                move |x| FiniteSignal::new(fa(x).values().iter().map(|v| alpha * v).collect()).expect("finite"),
            )
        }
    };
    if let Some(r) = &a.realization {
        let r = r.clone();
        op.realization =
            Some(Realization { cell: Arc::new(OnceLock::new()), build: Arc::new(move || r.get().scaled(alpha)) });
    }
    op
}

/// `B ∘ A`: apply `a` first, then `b`.
pub fn op_compose(b: &POperator, a: &POperator) -> Result<POperator> {
    same_space(a, b)?;
    let ca = &a.constants;
    let cb = &b.constants;
    let mut flags = BTreeSet::new();
    let mut c_c = None;
    // images of constant pieces stay constant under `a`, so `b` decides
    if ca.has(AssumptionFlag::ConstantToConstant) && ca.c_c == Some(0.0) {
        for flag in [AssumptionFlag::ConstantToConstant, AssumptionFlag::ConstantToLipschitz] {
            if cb.has(flag) {
                flags.insert(flag);
            }
        }
        c_c = cb.c_c;
    }
    if ca.has(AssumptionFlag::LipschitzToLipschitz) && cb.has(AssumptionFlag::LipschitzToLipschitz) {
        flags.insert(AssumptionFlag::LipschitzToLipschitz);
    }
    let constants = OperatorConstants {
        c_a: ca.c_a * cb.c_a,
        c_c,
        resolution_set: ca.resolution_set.intersect(&cb.resolution_set),
        flags,
    };
    let lineage = joined_lineage(a, b, "∘");
    let label = format!("{} ∘ {}", b.label, a.label);
    let linear = a.is_linear && b.is_linear;
    Ok(match (&a.action, &b.action) {
        (Action::Continuum(fa), Action::Continuum(fb)) => {
            let (fa, fb) = (fa.clone(), fb.clone());
            POperator::continuum(
                OperatorKind::AlgebraicComposite,
                constants,
                linear,
                false,
                &lineage,
                label,
                move |f| fb(&fa(f)),
            )
        }
        (Action::Grid(fa), Action::Grid(fb)) => {
            let (fa, fb) = (fa.clone(), fb.clone());
            POperator::grid(
                OperatorKind::AlgebraicComposite,
                a.grid_size(),
                constants,
                linear,
                false,
                &lineage,
                label,
                move |x| fb(&fa(x)),
            )
        }
        _ => unreachable!("domains checked"),
    })
}

/// `A^k`, with `A^0` the identity on the same domain.
pub fn op_power(a: &POperator, k: usize) -> POperator {
    if k == 0 {
        let mut id = POperator::identity(a.domain);
        id.lineage = a.lineage.clone();
        return id;
    }
    let mut acc = a.clone();
    for _ in 1..k {
        acc = op_compose(a, &acc).expect("same domain");
    }
    acc.is_self_adjoint = a.is_linear && a.is_self_adjoint;
    acc.label = if k == 1 { a.label.clone() } else { format!("{}^{k}", a.label) };
    acc
}

/// `ρ ∘ A` with `ρ` applied pointwise.
pub fn op_after_rho(rho: Activation, a: &POperator) -> POperator {
    let label = format!("{rho:?}({})", a.label);
    match &a.action {
        Action::Continuum(fa) => {
            let fa = fa.clone();
            POperator::continuum(
                OperatorKind::AlgebraicComposite,
                a.constants.clone(),
                false,
                false,
                &a.lineage,
                label,
                move |f| {
                    let g = fa(f);
                    map_pointwise(&g, move |x| rho.apply(x), rho.range_bound(g.range_bound()), g.lipschitz_const())
                },
            )
        }
        Action::Grid(fa) => {
            let fa = fa.clone();
            POperator::grid(
                OperatorKind::AlgebraicComposite,
                a.grid_size(),
                a.constants.clone(),
                false,
                false,
                &a.lineage,
                label,
                move |x| FiniteSignal::new(fa(x).values().iter().map(|v| rho.apply(*v)).collect()).expect("finite"),
            )
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfAdjointReport {
    pub max_asymmetry: f64,
    pub trials: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest grid on which every indicator pair is probed in addition to the
/// random pairs.
const INDICATOR_SWEEP_LIMIT: usize = 64;

/// Largest `|⟨Af, g⟩ − ⟨f, Ag⟩|` over `trials` random pairs.
///
/// Continuum pairs are piecewise-linear test functions; grid pairs are
/// uniform on `[-1, 1]`, and small grids are also swept with every pair of
/// indicators.
pub fn check_self_adjoint(a: &POperator, trials: usize, tol: f64, seed: u64) -> SelfAdjointReport {
    let gaps: Vec<f64> = match a.domain {
        Domain::Continuum => (0..trials)
            .into_par_iter()
            .map(|t| {
                let pair =
                    sample_lipschitz_tuple(2, 8.0, rng::derive_seed(seed, &[t as u64]), SignalFamily::PiecewiseLinear);
                let (f, g) = (&pair[0], &pair[1]);
                let af = a.apply_signal(f).expect("continuum");
                let ag = a.apply_signal(g).expect("continuum");
                (af.inner_product(g) - f.inner_product(&ag)).abs()
            })
            .collect(),
        Domain::Grid(n) => {
            let mut gaps: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::stream(seed, &[t as u64]);
                    let mut draw =
                        || FiniteSignal::new((0..n).map(|_| r.gen_range(-1.0..=1.0)).collect()).expect("finite");
                    let (f, g) = (draw(), draw());
                    let af = a.apply_finite(&f).expect("grid");
                    let ag = a.apply_finite(&g).expect("grid");
                    (af.inner_product(&g).expect("same n") - f.inner_product(&ag).expect("same n")).abs()
                })
                .collect();
            if n <= INDICATOR_SWEEP_LIMIT {
                let columns: Vec<Vec<f64>> = (0..n)
                    .map(|v| {
                        let mut e = vec![0.0; n];
                        e[v] = 1.0;
                        a.apply_finite(&FiniteSignal::new(e).expect("finite")).expect("grid").into_values()
                    })
                    .collect();
                for (i, col) in columns.iter().enumerate() {
                    for (j, other) in columns.iter().enumerate().skip(i + 1) {
                        gaps.push((col[j] - other[i]).abs() / n as f64);
                    }
                }
            }
            gaps
        }
    };
    let max_asymmetry = gaps.into_iter().fold(0.0, f64::max);
    SelfAdjointReport { max_asymmetry, trials, tolerance: tol, pass: max_asymmetry <= tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{extend_pc, measured_lipschitz, LIPSCHITZ_STEP};

    fn pc(v: &[f64]) -> Signal {
        Signal::piecewise_constant(v.to_vec()).unwrap()
    }

    fn fin(v: &[f64]) -> FiniteSignal {
        FiniteSignal::new(v.to_vec()).unwrap()
    }

    fn random_finite(n: usize, seed: u64) -> FiniteSignal {
        let mut r = rng::stream(seed, &[]);
        fin(&(0..n).map(|_| r.gen_range(-1.0..=1.0)).collect::<Vec<_>>())
    }

    #[test]
    fn resolution_sets() {
        assert!(ResolutionSet::PowersOfTwo(3).contains(8));
        assert!(!ResolutionSet::PowersOfTwo(3).contains(16));
        assert!(!ResolutionSet::PowersOfTwo(3).contains(1));
        assert!(ResolutionSet::Divisors(6).contains(3));
        assert!(!ResolutionSet::Divisors(6).contains(4));
        let both = ResolutionSet::Divisors(12).intersect(&ResolutionSet::PowersOfTwo(5));
        assert_eq!(both, ResolutionSet::Finite([2, 4].into_iter().collect()));
        assert_eq!(ResolutionSet::All.intersect(&ResolutionSet::Divisors(4)), ResolutionSet::Divisors(4));
        assert!(ResolutionSet::Empty.intersect(&ResolutionSet::All).is_empty());
    }

    #[test]
    fn constant_graphon_scales_constants() {
        let a = make_graphon_op(Kernel::constant(0.3), 1.0).unwrap();
        let g = a.apply_signal(&Signal::constant(0.5)).unwrap();
        for x in [0.0, 0.2, 0.77, 1.0] {
            assert!((g.eval(x).unwrap() - 0.15).abs() < 1e-12);
        }
    }

    #[test]
    fn product_graphon_on_one() {
        let a = make_graphon_op(Kernel::product(), 1.0).unwrap();
        let g = a.apply_signal(&Signal::constant(1.0)).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!((g.eval(x).unwrap() - x / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn graphon_image_is_lipschitz() {
        let a = make_graphon_op(Kernel::gaussian_bump(0.7).unwrap(), 1.0).unwrap();
        // ‖f‖₁ = 1
        let f = Signal::piecewise_linear(vec![0.0, 2.0, 0.0]).unwrap();
        let g = a.apply_signal(&f).unwrap();
        assert!(measured_lipschitz(&g, LIPSCHITZ_STEP) <= 1.01);
    }

    #[test]
    fn graphon_rejects_asymmetric_kernel() {
        let k = Kernel::custom("skew", |x, y| x - 2.0 * y, 2.0, 2.0);
        assert!(matches!(make_graphon_op(k, 2.0), Err(Error::Asymmetric(_))));
        let steep = Kernel::gaussian_bump(0.1).unwrap();
        assert!(matches!(make_graphon_op(steep, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn shift_graphing() {
        let a = make_shift_graphing(0.25, false).unwrap();
        let g = a.apply_signal(&Signal::constant(0.4)).unwrap();
        assert!((g.eval(0.3).unwrap() - 0.8).abs() < 1e-15);
        let step = pc(&[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(a.apply_signal(&step).unwrap().eval(0.6).unwrap(), 0.0);
        let n = make_shift_graphing(0.25, true).unwrap();
        assert!(n.apply_signal(&step).unwrap().range_bound() <= 1.0);
        assert!((n.apply_signal(&Signal::constant(0.4)).unwrap().eval(0.1).unwrap() - 0.4).abs() < 1e-15);
        assert!(make_shift_graphing(1.0, false).is_err());
    }

    #[test]
    fn copies_graphing_doubles_coarse_pieces() {
        let a = make_copies_graphing(4, DEFAULT_SHIFT).unwrap();
        let f = pc(&[0.3, -0.7]);
        let g = a.apply_signal(&f).unwrap();
        for cell in 0..2 {
            for p in 0..16 {
                let x = (cell as f64 + (p as f64 + 0.5) / 16.0) / 2.0;
                assert_eq!(g.eval(x).unwrap(), 2.0 * f.at(x));
            }
        }
        let c = a.apply_signal(&Signal::constant(0.25)).unwrap();
        assert_eq!(c.eval(0.0).unwrap(), 0.5);
        assert_eq!(c.eval(1.0).unwrap(), 0.5);
        assert!(a.constants().resolution_set.contains(2));
        assert!(!a.constants().resolution_set.contains(3));
    }

    #[test]
    fn hypercube_two_digit_example() {
        let a = make_hypercube_op(2).unwrap();
        let g = a.apply_signal(&pc(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(g.cell_values().unwrap(), &[2.5, 2.5, 2.5, 2.5]);
        let e = a.apply_signal(&pc(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(e.cell_values().unwrap(), &[0.0, 0.5, 0.5, 0.0]);
        assert!(make_hypercube_op(0).is_err());
        assert!(make_hypercube_op(41).is_err());
    }

    #[test]
    fn hypercube_fast_path_matches_digit_flips() {
        let a = make_hypercube_op(5).unwrap();
        let x = random_finite(8, 3);
        let fast = a.apply_signal(&extend_pc(&x)).unwrap();
        for p in midpoints(64) {
            let direct: f64 = (1..=5).map(|i| x.values()[cell_index(flip_digit(p, i), 8)]).sum::<f64>() / 5.0;
            assert!((fast.at(p) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn hypercube_constants_are_fixed() {
        let a = make_hypercube_op(3).unwrap();
        let g = a.apply_signal(&Signal::analytic(|_| 0.7, 0.7, Some(0.0))).unwrap();
        assert!((g.eval(0.123).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn finite_matrix_examples() {
        let n = 4;
        let id = make_finite_matrix_op(Matrix::identity(n).scaled(n as f64)).unwrap();
        let x = fin(&[0.1, -0.2, 0.3, 0.4]);
        assert_eq!(id.apply_finite(&x).unwrap(), x);
        let zero = make_finite_matrix_op(Matrix::zeros(n)).unwrap();
        assert_eq!(zero.apply_finite(&x).unwrap().values(), &[0.0; 4]);
        let cycle = Matrix::from_rows(vec![
            vec![0.0, 4.0, 0.0, 4.0],
            vec![4.0, 0.0, 4.0, 0.0],
            vec![0.0, 4.0, 0.0, 4.0],
            vec![4.0, 0.0, 4.0, 0.0],
        ])
        .unwrap();
        let c = make_finite_matrix_op(cycle).unwrap();
        assert_eq!(c.apply_finite(&fin(&[1.0, 0.0, 0.0, 0.0])).unwrap().values(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(c.constants().c_a, 2.0);
        assert!(matches!(c.apply_finite(&fin(&[1.0])), Err(Error::ResolutionMismatch { .. })));
        let skew = Matrix::from_rows(vec![vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(make_finite_matrix_op(skew), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "2\n1.0, 0.5\n0.5, 2\n").unwrap();
        let m = load_matrix_csv(&path).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 1), 2.0);
        std::fs::write(&path, "3\n1,2,3\n").unwrap();
        assert!(matches!(load_matrix_csv(&path), Err(Error::Config(_))));
    }

    #[test]
    fn discretized_constant_graphon() {
        let a = make_graphon_op(Kernel::constant(0.5), 1.0).unwrap();
        for m in [1, 3, 16] {
            let am = discretize(&a, m).unwrap();
            let out = am.apply_finite(&FiniteSignal::constant(0.4, m)).unwrap();
            let direct = restrict(&a.apply_signal(&Signal::constant(0.4)).unwrap(), m);
            assert_eq!(out, direct);
            assert!(out.values().iter().all(|v| (v - 0.2).abs() < 1e-12));
        }
    }

    #[test]
    fn discretized_hypercube_is_exact() {
        let a = make_hypercube_op(3).unwrap();
        let am = discretize(&a, 8).unwrap();
        let x = random_finite(8, 11);
        let out = am.apply_finite(&x).unwrap();
        for c in 0..8 {
            let expect = (x.values()[c ^ 4] + x.values()[c ^ 2] + x.values()[c ^ 1]) / 3.0;
            assert!((out.values()[c] - expect).abs() < 1e-15);
        }
        assert!(am.is_self_adjoint());
        assert_eq!(am.lineage(), a.lineage());
    }

    #[test]
    fn discretized_graphon_is_self_adjoint() {
        let a = make_graphon_op(Kernel::gaussian_bump(0.7).unwrap(), 1.0).unwrap();
        let am = discretize(&a, 16).unwrap();
        let report = check_self_adjoint(&am, 100, 1e-9, 5);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn asymmetric_matrix_detected() {
        let mut rows = vec![vec![0.0; 4]; 4];
        rows[0][1] = 1.0;
        rows[1][0] = 0.5;
        let a = make_general_matrix_op(Matrix::from_rows(rows).unwrap());
        assert!(!a.is_self_adjoint());
        let report = check_self_adjoint(&a, 10, 1e-12, 1);
        assert!(!report.pass);
        // T = M/n and the grid inner product adds another 1/n
        assert!(report.max_asymmetry >= 0.5 / 16.0 - 1e-15);
        let sym = make_finite_matrix_op(Matrix::identity(4)).unwrap();
        assert!(check_self_adjoint(&sym, 10, 1e-12, 1).pass);
    }

    #[test]
    fn discretization_is_linear() {
        let a = make_graphon_op(Kernel::min_kernel(), 1.0).unwrap();
        let am = discretize(&a, 12).unwrap();
        let (x, y) = (random_finite(12, 1), random_finite(12, 2));
        let combo = fin(&x.values().iter().zip(y.values()).map(|(p, q)| 0.3 * p - 1.7 * q).collect::<Vec<_>>());
        let lhs = am.apply_finite(&combo).unwrap();
        let (ax, ay) = (am.apply_finite(&x).unwrap(), am.apply_finite(&y).unwrap());
        for i in 0..12 {
            assert!((lhs.values()[i] - (0.3 * ax.values()[i] - 1.7 * ay.values()[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn algebra_constants() {
        let h = make_hypercube_op(3).unwrap();
        let c = make_copies_graphing(4, DEFAULT_SHIFT).unwrap();
        let two = op_scale(2.0, &h);
        let three = op_scale(1.5, &c);
        let sum = op_add(&two, &three).unwrap();
        assert_eq!(sum.constants().c_a, 5.0);
        assert_eq!(sum.constants().c_c, Some(0.0));
        assert!(sum.constants().has(AssumptionFlag::ConstantToConstant));
        assert_eq!(sum.constants().resolution_set, ResolutionSet::Finite([2, 4].into_iter().collect()));

        let zero = op_scale(0.0, &h);
        assert_eq!(zero.constants().c_a, 0.0);
        let out = zero.apply_signal(&pc(&[1.0, -1.0])).unwrap();
        assert!(out.cell_values().unwrap().iter().all(|v| *v == 0.0));

        let comp = op_compose(&c, &h).unwrap();
        assert_eq!(comp.constants().c_a, 2.0);
        assert!(comp.constants().has(AssumptionFlag::ConstantToConstant));

        let g = make_graphon_op(Kernel::product(), 1.0).unwrap();
        let gh = op_compose(&g, &h).unwrap();
        assert!(!gh.constants().has(AssumptionFlag::ConstantToConstant));
        assert!(op_add(&h, &discretize(&h, 4).unwrap()).is_err());
    }

    #[test]
    fn power_one_is_identity_power() {
        let h = make_hypercube_op(4).unwrap();
        let p1 = op_power(&h, 1);
        let p0 = op_power(&h, 0);
        for s in 0..10 {
            let f = &sample_lipschitz_tuple(1, 2.0, s, SignalFamily::PiecewiseLinear)[0];
            let (a, b) = (p1.apply_signal(f).unwrap(), h.apply_signal(f).unwrap());
            let id = p0.apply_signal(f).unwrap();
            for x in midpoints(37) {
                assert_eq!(a.at(x), b.at(x));
                assert_eq!(id.at(x), f.at(x));
            }
        }
        let p3 = op_power(&h, 3);
        assert!(p3.is_self_adjoint());
        let x = random_finite(16, 4);
        let direct = {
            let mut y = extend_pc(&x);
            for _ in 0..3 {
                y = h.apply_signal(&y).unwrap();
            }
            y
        };
        let viaop = p3.apply_signal(&extend_pc(&x)).unwrap();
        assert_eq!(viaop.cell_values(), direct.cell_values());
    }

    #[test]
    fn rho_after_operator() {
        let h = make_hypercube_op(2).unwrap();
        let big = op_scale(4.0, &h);
        let clipped = op_after_rho(Activation::Clip, &big);
        assert!(!clipped.is_linear());
        let out = clipped.apply_signal(&pc(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(out.cell_values().unwrap(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(clipped.constants().c_a, 4.0);
    }

    #[test]
    fn grid_and_continuum_are_kept_apart() {
        let h = make_hypercube_op(2).unwrap();
        assert!(matches!(h.apply_finite(&fin(&[1.0])), Err(Error::DomainMismatch(_))));
        let hm = discretize(&h, 4).unwrap();
        assert!(matches!(hm.apply_signal(&Signal::constant(1.0)), Err(Error::DomainMismatch(_))));
        assert!(discretize(&hm, 2).is_err());
    }
}
