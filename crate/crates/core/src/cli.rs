//! Command-line front end: parses an experiment config, builds operators,
//! runs the requested measurement and writes a report.
//!
//! Exit codes: 0 success, 2 config error, 3 hypothesis or domain error,
//! 4 filter normalization error, 1 anything else (I/O).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    check_lipschitz_map, check_piece_structure, cor42_bound, general_d1_bound, lemma_e3_bound, run_resolution_sweep,
    thm41_bound, thm43_bound, thm43_transfer_bound, write_reports_csv, write_reports_json, BoundReport, ConstantsUsed,
    PieceMode, SweepConfig, Theorem, Variant,
};
use crate::error::{Error, Result};
use crate::gnn::{gnn_as_operator, GnnParams};
use crate::metric::{dm_estimate, ProfileSampleConfig};
use crate::operator::{
    check_self_adjoint, discretize, load_matrix_csv, make_copies_graphing, make_finite_matrix_op,
    make_general_matrix_op, make_graphon_op, make_graphon_op_with, make_hypercube_op, make_shift_graphing,
    AssumptionFlag, Domain, Kernel, POperator, DEFAULT_SHIFT,
};

/// Tolerance of the self-adjointness check run by `check`.
pub const SELF_ADJOINT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn default_true() -> bool {
    true
}

/// An operator from the catalogue, possibly discretized or wrapped in a
/// network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Graphon {
        kernel: String,
        /// Kernel parameter: `w` for `constant`, `σ` for `gaussian-bump`.
        #[serde(default)]
        param: Option<f64>,
        #[serde(default)]
        quadrature: Option<usize>,
    },
    ShiftGraphing {
        #[serde(default)]
        a: Option<f64>,
        #[serde(default = "default_true")]
        normalize: bool,
    },
    CopiesGraphing {
        copies: usize,
        #[serde(default)]
        a: Option<f64>,
    },
    Hypercube {
        dim: usize,
    },
    /// Dense matrix from a CSV file whose first line holds `n`.
    Matrix {
        path: PathBuf,
        #[serde(default)]
        allow_asymmetric: bool,
    },
    Discretized {
        n: usize,
        of: Box<OperatorSpec>,
    },
    Gnn {
        params: PathBuf,
        of: Box<OperatorSpec>,
    },
}

impl OperatorSpec {
    /// Builds the operator. `c_v` is the Lipschitz budget of test signals.
    pub fn build(&self, c_v: f64) -> Result<POperator> {
        match self {
            Self::Graphon { kernel, param, quadrature } => {
                let k = Kernel::from_id(kernel, *param)?;
                match quadrature {
                    Some(q) => make_graphon_op_with(k, c_v, *q),
                    None => make_graphon_op(k, c_v),
                }
            }
            Self::ShiftGraphing { a, normalize } => make_shift_graphing(a.unwrap_or(DEFAULT_SHIFT), *normalize),
            Self::CopiesGraphing { copies, a } => make_copies_graphing(*copies, a.unwrap_or(DEFAULT_SHIFT)),
            Self::Hypercube { dim } => make_hypercube_op(*dim),
            Self::Matrix { path, allow_asymmetric } => {
                let m = load_matrix_csv(path)?;
                if *allow_asymmetric {
                    Ok(make_general_matrix_op(m))
                } else {
                    make_finite_matrix_op(m)
                }
            }
            Self::Discretized { n, of } => discretize(&of.build(c_v)?, *n),
            Self::Gnn { params, of } => gnn_as_operator(&GnnParams::from_json_path(params)?, &of.build(c_v)?),
        }
    }

    fn resolve_paths(&mut self, base: &Path, key: &str) -> Result<()> {
        match self {
            Self::Matrix { path, .. } => resolve_file(path, base, &format!("{key}.path")),
            Self::Gnn { params, of } => {
                resolve_file(params, base, &format!("{key}.params"))?;
                of.resolve_paths(base, &format!("{key}.of"))
            }
            Self::Discretized { of, .. } => of.resolve_paths(base, &format!("{key}.of")),
            _ => Ok(()),
        }
    }
}

fn resolve_file(path: &mut PathBuf, base: &Path, key: &str) -> Result<()> {
    if path.is_relative() {
        *path = base.join(&*path);
    }
    if !path.is_file() {
        return Err(Error::Config(format!("{key}: file {} does not exist", path.display())));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

fn default_k_max() -> usize {
    4
}

fn default_trials() -> usize {
    100
}

/// Contents of the TOML file passed with `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    /// Second operator for `distance`.
    #[serde(default)]
    pub compare_to: Option<OperatorSpec>,
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub profile: ProfileSampleConfig,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Network parameters as JSON.
    #[serde(default)]
    pub gnn: Option<PathBuf>,
    #[serde(default)]
    pub theorem: Option<Theorem>,
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Overrides `profile.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Random trials per falsifier in `check`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Overrides the operator's `C_A` in `bound`.
    #[serde(default)]
    pub c_a: Option<f64>,
}

impl ExperimentConfig {
    /// Parses TOML; relative file paths are taken from `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(&bad) = cfg.resolutions.iter().find(|&&n| n == 0) {
            return Err(Error::Config(format!("resolutions: entries must be positive, got {bad}")));
        }
        if cfg.k_max == 0 {
            return Err(Error::Config("k_max: must be at least 1".into()));
        }
        cfg.profile.validate().map_err(|e| Error::Config(format!("profile: {e}")))?;
        if let Some(op) = cfg.operator.as_mut() {
            op.resolve_paths(base, "operator")?;
        }
        if let Some(op) = cfg.compare_to.as_mut() {
            op.resolve_paths(base, "compare_to")?;
        }
        if let Some(p) = cfg.gnn.as_mut() {
            resolve_file(p, base, "gnn")?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn operator(&self) -> Result<POperator> {
        self.operator.as_ref().ok_or_else(|| Error::Config("operator: missing".into()))?.build(self.profile.c_v)
    }

    fn gnn_params(&self) -> Result<Option<GnnParams>> {
        self.gnn.as_deref().map(GnnParams::from_json_path).transpose()
    }
}

#[derive(Debug, Parser)]
#[command(name = "graphop", version, about = "Graphop discretization, GNN transfer and action-convergence experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the action-convergence distance between two operators.
    Distance(CommonArgs),
    /// Measure one theorem's bound across resolutions.
    Sweep(CommonArgs),
    /// Signal gap and approximation bound for a network.
    GnnCompare(CommonArgs),
    /// Run the assumption falsifiers.
    Check(CommonArgs),
    /// Evaluate bound formulas without measuring.
    Bound(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Fail with exit code 3 on any resolution outside the hypothesis set
    /// or any failed check.
    #[arg(long)]
    pub strict: bool,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Normalization { .. } => 4,
        Error::DomainMismatch(_)
        | Error::Precondition(_)
        | Error::ResolutionMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::Asymmetric(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

/// One falsifier outcome from `check`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub assumption: String,
    pub n: Option<usize>,
    pub measured: f64,
    pub threshold: f64,
    pub trials: usize,
    pub pass: bool,
    /// Whether the operator declares the assumption at this resolution.
    pub declared: bool,
    pub witness: Option<String>,
}

struct Run {
    cfg: ExperimentConfig,
    out: Option<PathBuf>,
    format: Option<Format>,
    strict: bool,
}

impl Run {
    fn new(args: &CommonArgs) -> Result<Self> {
        let mut cfg = ExperimentConfig::load(&args.config)?;
        if let Some(seed) = args.seed.or(cfg.seed) {
            cfg.profile.seed = seed;
        }
        Ok(Self {
            out: args.out.clone().or_else(|| cfg.output.path.clone()),
            format: args.format.or(cfg.output.format),
            strict: args.strict,
            cfg,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.profile.seed
    }

    /// Writes the report to the output path, or to stdout when none is set.
    /// Returns whether stdout is free for the summary line.
    fn emit(&self, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<bool> {
        match &self.out {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                write(&mut w)?;
                w.flush()?;
                Ok(true)
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                write(&mut lock)?;
                Ok(false)
            }
        }
    }

    fn emit_rows(&self, rows: &[BoundReport]) -> Result<bool> {
        match self.format.unwrap_or(Format::Csv) {
            Format::Csv => self.emit(|w| write_reports_csv(rows, w)),
            Format::Json => self.emit(|w| write_reports_json(rows, w)),
        }
    }

    fn require_hypotheses(&self, a: &POperator) -> Result<()> {
        if !self.strict {
            return Ok(());
        }
        let c = a.constants();
        let flags = [
            AssumptionFlag::ConstantToConstant,
            AssumptionFlag::LipschitzToLipschitz,
            AssumptionFlag::ConstantToLipschitz,
        ];
        match self.cfg.resolutions.iter().find(|&&n| !flags.iter().any(|&f| c.holds_at(f, n))) {
            Some(n) => Err(Error::Precondition(format!(
                "resolution {n} lies outside the hypothesis set {} of {}",
                c.resolution_set,
                a.label()
            ))),
            None => Ok(()),
        }
    }

    fn sweep_config(&self, gnn: Option<GnnParams>) -> SweepConfig {
        SweepConfig { gnn, variant: self.cfg.variant, ..SweepConfig::new(self.cfg.profile.clone(), self.cfg.k_max) }
    }
}

fn row_summary(rows: &[BoundReport]) -> String {
    let passed = rows.iter().filter(|r| r.pass == Some(true)).count();
    let flagged = rows.iter().filter(|r| !r.hypothesis_ok).count();
    format!("{} rows, {passed} pass, {flagged} outside hypotheses", rows.len())
}

fn cmd_distance(run: &Run) -> Result<Outcome> {
    let a = run.cfg.operator()?;
    let b = run
        .cfg
        .compare_to
        .as_ref()
        .ok_or_else(|| Error::Config("compare_to: missing".into()))?
        .build(run.cfg.profile.c_v)?;
    let report = dm_estimate(&a, &b, run.cfg.k_max, &run.cfg.profile)?;
    let total = report.total;
    let free = run.emit(|w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    Ok(summary(
        free,
        format!(
            "distance {} vs {}: total {total} (k_max {}, seed {})",
            a.label(),
            b.label(),
            run.cfg.k_max,
            run.seed()
        ),
    ))
}

fn cmd_sweep(run: &Run) -> Result<Outcome> {
    let a = run.cfg.operator()?;
    run.require_hypotheses(&a)?;
    let theorem = run.cfg.theorem.unwrap_or(Theorem::Thm41);
    let gnn = if theorem.needs_gnn() { run.cfg.gnn_params()? } else { None };
    let rows = run_resolution_sweep(&a, &run.cfg.resolutions, &run.sweep_config(gnn), theorem)?;
    let free = run.emit_rows(&rows)?;
    Ok(summary(free, format!("sweep {}: {}", theorem.name(), row_summary(&rows))))
}

fn cmd_gnn_compare(run: &Run) -> Result<Outcome> {
    let params = run.cfg.gnn_params()?.ok_or_else(|| Error::Config("gnn: missing".into()))?;
    let a = run.cfg.operator()?;
    run.require_hypotheses(&a)?;
    let cfg = run.sweep_config(Some(params));
    let mut rows = run_resolution_sweep(&a, &run.cfg.resolutions, &cfg, Theorem::LemmaE3)?;
    rows.extend(run_resolution_sweep(&a, &run.cfg.resolutions, &cfg, Theorem::Thm43Approx)?);
    let free = run.emit_rows(&rows)?;
    Ok(summary(free, format!("gnn-compare: {}", row_summary(&rows))))
}

fn run_checks(run: &Run) -> Result<Vec<CheckRecord>> {
    if let Some(p) = run.cfg.gnn.as_deref() {
        GnnParams::from_json_path(p)?;
    }
    let a = run.cfg.operator()?;
    let (trials, seed) = (run.cfg.trials, run.seed());
    let c = a.constants().clone();
    let mut out = Vec::new();
    let lipschitz = |op: &POperator, n: Option<usize>| -> Result<CheckRecord> {
        let r = check_lipschitz_map(op, op.constants().c_a, trials, seed)?;
        Ok(CheckRecord {
            assumption: "lipschitz-map".into(),
            n,
            measured: r.max_ratio,
            threshold: r.declared,
            trials,
            pass: r.pass,
            declared: true,
            witness: r.witness.map(|t| format!("trial {t}")),
        })
    };
    out.push(lipschitz(&a, None)?);
    if let Domain::Grid(n) = a.domain() {
        if a.is_self_adjoint() {
            out.push(self_adjoint_record(&a, n, trials, seed));
        }
        return Ok(out);
    }
    for &n in &run.cfg.resolutions {
        let an = discretize(&a, n)?;
        out.push(lipschitz(&an, Some(n))?);
        if a.is_self_adjoint() {
            out.push(self_adjoint_record(&an, n, trials, seed));
        }
        let modes = c.flags.iter().filter_map(|&flag| {
            let mode = match flag {
                AssumptionFlag::ConstantToConstant => PieceMode::ConstantToConstant,
                AssumptionFlag::LipschitzToLipschitz => PieceMode::LipschitzToLipschitz { c_v: run.cfg.profile.c_v },
                AssumptionFlag::ConstantToLipschitz => PieceMode::ConstantToLipschitz { c: c.c_c? },
            };
            Some((flag, mode))
        });
        for (flag, mode) in modes {
            let r = check_piece_structure(&a, n, mode, trials, seed)?;
            out.push(CheckRecord {
                assumption: flag_name(flag).into(),
                n: Some(n),
                measured: r.measured,
                threshold: r.threshold,
                trials,
                pass: r.pass,
                declared: c.holds_at(flag, n),
                witness: (!r.pass).then(|| format!("x = {}", r.witness.unwrap_or(0.0))),
            });
        }
    }
    Ok(out)
}

fn self_adjoint_record(a: &POperator, n: usize, trials: usize, seed: u64) -> CheckRecord {
    let r = check_self_adjoint(a, trials, SELF_ADJOINT_TOLERANCE, seed);
    CheckRecord {
        assumption: "self-adjoint".into(),
        n: Some(n),
        measured: r.max_asymmetry,
        threshold: r.tolerance,
        trials: r.trials,
        pass: r.pass,
        declared: true,
        witness: None,
    }
}

fn flag_name(flag: AssumptionFlag) -> &'static str {
    match flag {
        AssumptionFlag::ConstantToConstant => "constant-to-constant",
        AssumptionFlag::LipschitzToLipschitz => "lipschitz-to-lipschitz",
        AssumptionFlag::ConstantToLipschitz => "constant-to-lipschitz",
    }
}

fn write_checks_csv(rows: &[CheckRecord], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["assumption", "n", "measured", "threshold", "trials", "pass", "declared", "witness"])
        .map_err(io::Error::from)?;
    for r in rows {
        w.write_record([
            r.assumption.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.measured.to_string(),
            r.threshold.to_string(),
            r.trials.to_string(),
            r.pass.to_string(),
            r.declared.to_string(),
            r.witness.clone().unwrap_or_default(),
        ])
        .map_err(io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_check(run: &Run) -> Result<Outcome> {
    let rows = run_checks(run)?;
    let free = match run.format.unwrap_or(Format::Json) {
        Format::Csv => run.emit(|w| write_checks_csv(&rows, w))?,
        Format::Json => run.emit(|w| {
            serde_json::to_writer_pretty(&mut *w, &rows)?;
            w.write_all(b"\n")?;
            Ok(())
        })?,
    };
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.declared && !r.pass)
        .map(|r| format!("{}@{}", r.assumption, r.n.map_or("continuum".into(), |n| n.to_string())))
        .collect();
    if run.strict && !failed.is_empty() {
        return Err(Error::Precondition(format!("failed checks: {}", failed.join(", "))));
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    Ok(summary(free, format!("check: {passed} of {} passed", rows.len())))
}

/// Bound rows without measurements.
pub fn bound_rows(
    theorem: Theorem,
    c_a: f64,
    c_v: f64,
    resolutions: &[usize],
    gnn: Option<&GnnParams>,
    variant_at: impl Fn(usize) -> Variant,
) -> Result<Vec<BoundReport>> {
    let shape = match (theorem.needs_gnn(), gnn) {
        (true, None) => return Err(Error::Config(format!("gnn: {} needs network parameters", theorem.name()))),
        (true, Some(p)) => Some(p.shape()),
        (false, _) => None,
    };
    let constants = |n: usize, m: Option<usize>, variant: Option<Variant>| ConstantsUsed {
        c_a,
        c_v,
        c_c: variant.and_then(|v| v.c_c()),
        k: shape.map(|s| s.k),
        l: shape.map(|s| s.l),
        n_max: shape.map(|s| s.n_max),
        n,
        m,
    };
    let row = |n: usize, m: Option<usize>, variant: Option<Variant>, value: f64| {
        let mut r = BoundReport::new(theorem, constants(n, m, variant), value);
        r.variant = variant.map(|v| v.name());
        r
    };
    let pairs = || resolutions.windows(2).map(|w| (w[0], w[1]));
    Ok(match theorem {
        Theorem::Thm41 => resolutions.iter().map(|&n| row(n, None, None, thm41_bound(c_a, c_v, n))).collect(),
        Theorem::GeneralD1Variant => resolutions
            .iter()
            .map(|&n| {
                let v = variant_at(n);
                row(n, None, Some(v), general_d1_bound(c_a, c_v, n, v))
            })
            .collect(),
        Theorem::Cor42 => pairs().map(|(m, n)| row(n, Some(m), None, cor42_bound(c_a, c_v, m, n))).collect(),
        Theorem::Thm43Approx | Theorem::LemmaE3 => {
            let s = shape.expect("checked");
            resolutions
                .iter()
                .map(|&n| {
                    let v = variant_at(n);
                    let value = if theorem == Theorem::LemmaE3 {
                        lemma_e3_bound(c_a, c_v, s, n, v)
                    } else {
                        thm43_bound(c_a, c_v, s, n, v)
                    };
                    row(n, None, Some(v), value)
                })
                .collect()
        }
        Theorem::Thm43Transfer => {
            let s = shape.expect("checked");
            pairs()
                .map(|(m, n)| {
                    let v = variant_at(n);
                    row(n, Some(m), Some(v), thm43_transfer_bound(c_a, c_v, s, m, n, v))
                })
                .collect()
        }
    })
}

fn cmd_bound(run: &Run) -> Result<Outcome> {
    let cfg = &run.cfg;
    let theorem = cfg.theorem.unwrap_or(Theorem::Thm41);
    let op = match (&cfg.operator, cfg.c_a) {
        (None, None) => return Err(Error::Config("bound needs operator or c_a".into())),
        (Some(_), _) => Some(cfg.operator()?),
        (None, Some(_)) => None,
    };
    let c_a = cfg.c_a.or_else(|| op.as_ref().map(|a| a.constants().c_a)).expect("checked");
    let gnn = cfg.gnn_params()?;
    let variant_at = |n: usize| {
        cfg.variant
            .or_else(|| op.as_ref().and_then(|a| Variant::for_operator(a, n)))
            .unwrap_or(Variant::LipschitzToLipschitz)
    };
    let rows = bound_rows(theorem, c_a, cfg.profile.c_v, &cfg.resolutions, gnn.as_ref(), variant_at)?;
    let free = run.emit_rows(&rows)?;
    let values: Vec<String> = rows.iter().map(|r| r.bound_value.to_string()).collect();
    Ok(summary(free, format!("bound {}: [{}]", theorem.name(), values.join(", "))))
}

/// The one-line summary of a command. It goes to stderr when the report
/// itself went to stdout.
struct Outcome {
    line: String,
    stdout_free: bool,
}

fn summary(stdout_free: bool, line: String) -> Outcome {
    Outcome { line, stdout_free }
}

fn execute(command: &Command) -> Result<Outcome> {
    let args = match command {
        Command::Distance(a) | Command::Sweep(a) | Command::GnnCompare(a) | Command::Check(a) | Command::Bound(a) => a,
    };
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let run = Run::new(args)?;
    match command {
        Command::Distance(_) => cmd_distance(&run),
        Command::Sweep(_) => cmd_sweep(&run),
        Command::GnnCompare(_) => cmd_gnn_compare(&run),
        Command::Check(_) => cmd_check(&run),
        Command::Bound(_) => cmd_bound(&run),
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(o) => {
            if o.stdout_free {
                println!("{}", o.line);
            } else {
                eprintln!("{}", o.line);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
