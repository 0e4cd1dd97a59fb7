//! Batch front end for the bound library.
//!
//! Every subcommand returns an exit code: 0 on success, 2 when the input
//! does not validate, 3 when a solver fails or an ordering check is
//! violated.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use qbayes_core::closedform::{rld_bound, sld_bound, van_tree_bound};
use qbayes_core::conic::{holevo_lemma_sdp, holevo_lemma_value, ConicStatus, SolveSummary, SolverOptions};
use qbayes_core::matcore::{random, ExtendedOperator, RMat};
use qbayes_core::model::{build_extended_moments, build_moments, model_zoo, ModelFile, StatisticalModel, TensorTerm};
use qbayes_core::sdpbounds::{
    appendix_f_with, holevo_type_bound_with, nagaoka_bound_search, nagaoka_hayashi_bound_with, FKind, HolevoForm,
};
use qbayes_core::verify::{audit_links, ordering_audit_with, AuditConfig, AuditLink, OrderingAudit};
use qbayes_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Overrides the SDP duality-gap tolerance.
pub const GAP_TOL_ENV: &str = "QBAYES_GAP_TOL";

const NAGAOKA_RESTARTS: usize = 4;

#[derive(Debug, Parser)]
#[command(
    name = "qbayes",
    version,
    about = "Lower bounds on the Bayes risk of quantum multiparameter estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute lower bounds for a model file.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated selection.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        bounds: Vec<BoundName>,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the bound values as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Certify the bound chain with explicit decisions.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Seesaw outcome count; n + 2 when absent.
        #[arg(long)]
        outcomes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated model to the JSON model format.
    Zoo {
        name: String,
        #[arg(allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the trace-minimization and Holevo-lemma property suites.
    Lemmas {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum BoundName {
    Nh,
    Holevo,
    Nagaoka2,
    Sld,
    Rld,
    Vantree,
    All,
}

impl BoundName {
    const CONCRETE: [BoundName; 6] = [
        BoundName::Nh,
        BoundName::Holevo,
        BoundName::Nagaoka2,
        BoundName::Sld,
        BoundName::Rld,
        BoundName::Vantree,
    ];

    pub fn key(self) -> &'static str {
        match self {
            BoundName::Nh => "nh",
            BoundName::Holevo => "holevo",
            BoundName::Nagaoka2 => "nagaoka2",
            BoundName::Sld => "sld",
            BoundName::Rld => "rld",
            BoundName::Vantree => "vantree",
            BoundName::All => "all",
        }
    }
}

/// A failed command: exit code plus diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INVALID,
            error: error.into(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Runs a parsed command and maps failures to exit codes, printing the
/// diagnostic to stderr.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Bounds {
            model,
            bounds,
            out,
            csv,
        } => cmd_bounds(&model, &bounds, out.as_deref(), csv.as_deref()),
        Command::Verify {
            model,
            iters,
            seeds,
            outcomes,
            out,
        } => cmd_verify(&model, iters, &seeds, outcomes, out.as_deref()),
        Command::Zoo { name, params, out } => cmd_zoo(&name, &params, out.as_deref()),
        Command::Lemmas { seed, trials } => cmd_lemmas(seed, trials, &mut std::io::stdout()),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

/// Solver options with the gap tolerance taken from the environment.
pub fn solver_options() -> Result<SolverOptions, Failure> {
    let mut opts = SolverOptions::default();
    if let Ok(raw) = std::env::var(GAP_TOL_ENV) {
        let tol: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(anyhow!("{GAP_TOL_ENV}='{raw}' is not a number")))?;
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Failure::invalid(anyhow!("{GAP_TOL_ENV} must be positive, got {tol}")));
        }
        opts.gap_tol = tol;
    }
    Ok(opts)
}

/// A model file together with the SHA-256 of its bytes.
pub struct LoadedModel {
    pub model: StatisticalModel,
    pub digest: String,
}

pub fn load_model(path: &Path) -> Result<LoadedModel, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::invalid)?;
    let text = String::from_utf8(bytes.clone())
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .map_err(Failure::invalid)?;
    let file = ModelFile::parse(&text).map_err(|e| Failure::invalid(anyhow!("{}: {e}", path.display())))?;
    let model = file
        .to_model()
        .with_context(|| format!("validating {}", path.display()))
        .map_err(Failure::invalid)?;
    Ok(LoadedModel {
        model,
        digest: format!("sha256:{}", hex::encode(Sha256::digest(&bytes))),
    })
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::invalid),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::invalid(e)),
                _ => Ok(()),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    ClosedForm,
    Sdp,
    /// Best value found by a nonconvex search; not certified.
    Heuristic,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<BoundKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_status: Option<ConicStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub model_digest: String,
    pub bounds: BTreeMap<String, BoundEntry>,
    pub audit: Vec<AuditLink>,
    pub warnings: Vec<String>,
}

struct Computed {
    value: f64,
    kind: BoundKind,
    summary: Option<SolveSummary>,
    warnings: Vec<String>,
}

impl Computed {
    fn closed(value: f64) -> Self {
        Self {
            value,
            kind: BoundKind::ClosedForm,
            summary: None,
            warnings: Vec::new(),
        }
    }
}

fn constant_weight(model: &StatisticalModel, what: &str) -> qbayes_core::Result<RMat> {
    model
        .constant_weight()
        .cloned()
        .ok_or_else(|| Error::Capability(format!("{what} requires a constant weight matrix")))
}

fn compute_bound(name: BoundName, model: &StatisticalModel, opts: &SolverOptions) -> qbayes_core::Result<Computed> {
    match name {
        BoundName::Nh => {
            let sol = nagaoka_hayashi_bound_with(&build_extended_moments(model)?, opts)?;
            Ok(Computed {
                value: sol.value,
                kind: BoundKind::Sdp,
                summary: Some(sol.diagnostics),
                warnings: vec![],
            })
        }
        BoundName::Holevo => {
            let sol = holevo_type_bound_with(&build_extended_moments(model)?, HolevoForm::General, opts)?;
            Ok(Computed {
                value: sol.value,
                kind: BoundKind::Sdp,
                summary: Some(sol.diagnostics),
                warnings: vec![],
            })
        }
        BoundName::Nagaoka2 => {
            let search = nagaoka_bound_search(&build_extended_moments(model)?, NAGAOKA_RESTARTS, 0)?;
            Ok(Computed {
                value: search.value,
                kind: BoundKind::Heuristic,
                summary: None,
                warnings: vec!["nagaoka2: best value found by a nonconvex search, not a certified bound".into()],
            })
        }
        BoundName::Sld => {
            let w = constant_weight(model, "sld")?;
            let (value, pkg) = sld_bound(&build_moments(model)?, &w)?;
            let mut c = Computed::closed(value);
            if pkg.regularized {
                c.warnings
                    .push("sld: averaged state was regularized before the Lyapunov solve".into());
            }
            Ok(c)
        }
        BoundName::Rld => {
            let w = constant_weight(model, "rld")?;
            let (value, pkg) = rld_bound(&build_moments(model)?, &w)?;
            let mut c = Computed::closed(value);
            if pkg.regularized {
                c.warnings
                    .push("rld: averaged state was regularized before inversion".into());
            }
            if pkg.singular_weight {
                c.warnings.push("rld: weight matrix is singular".into());
            }
            Ok(c)
        }
        BoundName::Vantree => {
            let w = constant_weight(model, "vantree")?;
            let mut c = Computed::closed(van_tree_bound(model, &w)?);
            c.warnings
                .push("vantree: grid surrogate of the continuous-prior inequality".into());
            Ok(c)
        }
        BoundName::All => unreachable!("selector is expanded before dispatch"),
    }
}

/// Expands `all` and removes duplicates, keeping a fixed order.
pub fn expand_selection(selection: &[BoundName]) -> Vec<BoundName> {
    let mut out: Vec<BoundName> = if selection.contains(&BoundName::All) {
        BoundName::CONCRETE.to_vec()
    } else {
        selection.to_vec()
    };
    out.sort();
    out.dedup();
    out
}

/// Computes the selected bounds. Per-bound errors are recorded without
/// stopping the others; the exit code is 3 if any SDP failed and 2 if no
/// requested bound could be computed.
pub fn bound_report(loaded: &LoadedModel, selection: &[BoundName], opts: &SolverOptions) -> (BoundReport, i32) {
    let mut bounds = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut solver_failed = false;
    let mut any_ok = false;
    for name in expand_selection(selection) {
        let start = Instant::now();
        let result = compute_bound(name, &loaded.model, opts);
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let entry = match result {
            Ok(c) => {
                any_ok = true;
                warnings.extend(c.warnings);
                BoundEntry {
                    value: Some(c.value),
                    kind: Some(c.kind),
                    solver_status: c.summary.map(|s| s.status),
                    gap: c.summary.map(|s| s.gap),
                    primal_residual: c.summary.map(|s| s.primal_residual),
                    iterations: c.summary.map(|s| s.iterations),
                    wall_time_ms,
                    error: None,
                }
            }
            Err(e) => {
                solver_failed |= matches!(e, Error::Solver(_));
                BoundEntry {
                    value: None,
                    kind: None,
                    solver_status: None,
                    gap: None,
                    primal_residual: None,
                    iterations: None,
                    wall_time_ms,
                    error: Some(e.to_string()),
                }
            }
        };
        bounds.insert(name.key().to_string(), entry);
    }
    let value = |k: &str| bounds.get(k).and_then(|e: &BoundEntry| e.value);
    let audit = audit_links(&[
        ("nh", value("nh"), "holevo", value("holevo")),
        ("holevo", value("holevo"), "sld", value("sld")),
        ("holevo", value("holevo"), "rld", value("rld")),
    ]);
    let code = if solver_failed {
        EXIT_SOLVER
    } else if !any_ok {
        EXIT_INVALID
    } else {
        EXIT_OK
    };
    (
        BoundReport {
            model_digest: loaded.digest.clone(),
            bounds,
            audit,
            warnings,
        },
        code,
    )
}

pub fn report_csv(report: &BoundReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bound", "value", "solver_status", "gap", "wall_time_ms", "error"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for (name, e) in &report.bounds {
        w.write_record([
            name.as_str(),
            &opt(e.value),
            &e.solver_status
                .map(|s| serde_json::to_value(s).map(|v| v.as_str().unwrap_or("").to_string()))
                .transpose()?
                .unwrap_or_default(),
            &opt(e.gap),
            &format!("{:.3}", e.wall_time_ms),
            e.error.as_deref().unwrap_or(""),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn cmd_bounds(model: &Path, selection: &[BoundName], out: Option<&Path>, csv: Option<&Path>) -> CmdResult {
    let opts = solver_options()?;
    let loaded = load_model(model)?;
    let (report, code) = bound_report(&loaded, selection, &opts);
    let json = serde_json::to_string_pretty(&report).map_err(Failure::invalid)?;
    write_output(out, &json)?;
    if let Some(path) = csv {
        let text = report_csv(&report).map_err(Failure::invalid)?;
        fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::invalid)?;
    }
    Ok(code)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub model_digest: String,
    pub seeds: Vec<u64>,
    pub iters: usize,
    pub audit: OrderingAudit,
    pub violated: bool,
}

pub fn cmd_verify(model: &Path, iters: usize, seeds: &[u64], outcomes: Option<usize>, out: Option<&Path>) -> CmdResult {
    let solver = solver_options()?;
    let loaded = load_model(model)?;
    if seeds.is_empty() {
        return Err(Failure::invalid(anyhow!("at least one seed is required")));
    }
    let cfg = AuditConfig {
        iters,
        seeds: seeds.to_vec(),
        outcomes,
        solver,
    };
    let audit = ordering_audit_with(&loaded.model, &cfg).map_err(|e| match e {
        Error::Solver(_) => Failure {
            code: EXIT_SOLVER,
            error: e.into(),
        },
        other => Failure::invalid(other),
    })?;
    let violated = audit.violated();
    let solver_failed = !audit.errors.is_empty();
    let report = VerifyReport {
        model_digest: loaded.digest,
        seeds: seeds.to_vec(),
        iters,
        audit,
        violated,
    };
    let json = serde_json::to_string_pretty(&report).map_err(Failure::invalid)?;
    write_output(out, &json)?;
    Ok(if violated || solver_failed {
        EXIT_SOLVER
    } else {
        EXIT_OK
    })
}

/// Maps command-line parameters to generator parameters and grid size.
/// Grid-based generators take the grid count positionally:
/// `qubit_xy b grid [rings]`, `qubit_z_line grid [h]` and
/// `random_model n d seed [points]`.
pub fn zoo_arguments(name: &str, params: &[f64]) -> Result<(Vec<f64>, usize), Failure> {
    let count = |i: usize, what: &str| -> Result<usize, Failure> {
        let x = *params
            .get(i)
            .ok_or_else(|| Failure::invalid(anyhow!("{name}: missing {what}")))?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(Failure::invalid(anyhow!("{name}: {what} must be a count, got {x}")));
        }
        Ok(x as usize)
    };
    Ok(match name {
        "qubit_xy" => {
            let grid = count(1, "grid size")?;
            let mut p = params.get(..1).unwrap_or_default().to_vec();
            p.extend(params.iter().skip(2));
            (p, grid)
        }
        "qubit_z_line" => (params.iter().skip(1).copied().collect(), count(0, "grid size")?),
        "random_model" if params.len() > 3 => (params[..3].to_vec(), count(3, "point count")?),
        _ => (params.to_vec(), 0),
    })
}

pub fn cmd_zoo(name: &str, params: &[f64], out: Option<&Path>) -> CmdResult {
    let (p, grid) = zoo_arguments(name, params)?;
    let model = model_zoo(name, &p, grid).map_err(Failure::invalid)?;
    write_output(out, &model.to_json())?;
    Ok(EXIT_OK)
}

/// Pass and fail counts of one property.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
}

impl Tally {
    fn record(&mut self, ok: bool) {
        if ok {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
    }
}

/// Random instances of the trace-minimization family (`n = 2`, tensor
/// and two-term mixtures) and of the Holevo lemma.
pub fn lemma_suite(seed: u64, trials: usize, opts: &SolverOptions) -> BTreeMap<&'static str, Tally> {
    let mut rng = random::seeded(seed);
    let mut tallies: BTreeMap<&'static str, Tally> = BTreeMap::new();
    let mut check = |name: &'static str, ok: bool| tallies.entry(name).or_default().record(ok);
    for trial in 0..trials {
        let d = 2 + trial % 3;
        let term = |rng: &mut random::SeededRng, pi: f64| TensorTerm {
            pi,
            w: random::spd_real(rng, 2, 0.2),
            s: random::density(rng, d, 0.2),
        };
        let single = [term(&mut rng, 1.0)];
        let x = ExtendedOperator::from_matrix(2, d, random::hermitian(&mut rng, 2 * d).into_inner())
            .expect("random Hermitian operator has the extended shape");
        let f = |kind, terms: &[TensorTerm]| appendix_f_with(kind, terms, &x, opts).ok();
        match (f(FKind::Sdp, &single), f(FKind::F1, &single), f(FKind::F2, &single)) {
            (Some(sdp), Some(f1), Some(f2)) => {
                check("f_sdp = f1", (sdp - f1).abs() <= 1e-6 * f1.abs().max(1.0));
                check("f_sdp >= f2", sdp >= f2 - 1e-7);
            }
            _ => check("solver", false),
        }
        let mix = [term(&mut rng, 0.4), term(&mut rng, 0.6)];
        match (
            f(FKind::Sdp, &mix),
            f(FKind::F3, &mix),
            f(FKind::F4, &mix),
            f(FKind::F5, &mix),
        ) {
            (Some(sdp), Some(f3), Some(f4), Some(f5)) => {
                check("f_sdp >= f3", sdp >= f3 - 1e-7);
                check("f3 >= f4", f3 >= f4 - 1e-7);
                check("f_sdp >= f5", sdp >= f5 - 1e-7);
            }
            _ => check("solver", false),
        }
        let n = 2 + trial % 2;
        let w = random::spd_real(&mut rng, n, 0.2);
        let a = random::spd_real(&mut rng, n, 0.5);
        let b = {
            let g = RMat::from_fn(n, n, |_, _| random::uniform(&mut rng, -1.0, 1.0));
            &g - g.transpose()
        };
        let lemma = holevo_lemma_value(&w, &a, &b).ok();
        let sdp = holevo_lemma_sdp(&w, &a, &b, opts).ok().filter(|s| s.is_optimal());
        match (lemma, sdp) {
            (Some(v), Some(s)) => check("holevo lemma", (v - s.primal_value).abs() <= 1e-7 * v.abs().max(1.0)),
            _ => check("solver", false),
        }
    }
    tallies
}

pub fn cmd_lemmas(seed: u64, trials: usize, out: &mut impl std::io::Write) -> CmdResult {
    let opts = solver_options()?;
    let tallies = lemma_suite(seed, trials, &opts);
    let mut failed = false;
    for (name, t) in &tallies {
        failed |= t.fail > 0;
        writeln!(out, "{name}: {} pass, {} fail", t.pass, t.fail).map_err(Failure::invalid)?;
    }
    Ok(if failed { EXIT_SOLVER } else { EXIT_OK })
}
