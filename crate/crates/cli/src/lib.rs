//! Command-line driver for `normsol-core`.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration or input error,
//! 3 the solver did not converge.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use normsol_core::audit::{audit_hypotheses, AuditReport, AuditSettings, Verdict};
use normsol_core::functional::{evaluate, residual};
use normsol_core::solver::{run_start, select_winner, sweep_mu, SweepTable};
use normsol_core::verify::{check_bounds_with, geometry_probe, BoundCheck, CheckKind, CheckStatus};
use normsol_core::{BoundsReport, Error, SolveReport};
use rayon::prelude::*;

pub use config::{parse_config, render_config, ConfigError, RunConfig};
pub use report::ReportFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("not converged: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Check(_) => EXIT_CHECK,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }

    /// Errors raised while solving.
    fn from_solve(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            other => CliError::NotConverged(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult = Result<i32, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "normsol",
    version,
    about = "Normalized ground states of planar coupled Schrödinger systems"
)]
pub struct Cli {
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the number of starts.
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multi-start ground-state solve; writes a JSON report.
    Solve {
        config: PathBuf,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Samples the structural hypotheses of the configured model.
    Audit { config: PathBuf },
    /// Solves over a list of coupling strengths and fits the log-log slope.
    SweepMu {
        config: PathBuf,
        /// Comma-separated values, e.g. `1,2,4,8`.
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluates a stored report and re-runs the bound checks.
    Verify { report: PathBuf },
    /// Compares energies of random states at kinetic levels K/2, K and 2K.
    ProbeGeometry {
        config: PathBuf,
        #[arg(long = "K")]
        k: f64,
    },
    /// Writes the stored profile as `r,u,v` rows.
    Export {
        report: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Solve { config, out: path } => solve(cli, config, path, out),
        Command::Audit { config } => audit(cli, config, out),
        Command::SweepMu { config, mu, out: path } => sweep(cli, config, mu, path.as_deref(), out),
        Command::Verify { report } => verify(report, out),
        Command::ProbeGeometry { config, k } => probe(cli, config, *k, out),
        Command::Export { report, csv } => export(report, csv, out),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) {
    let _ = out.write_all(text.as_bytes());
}

/// Loads a configuration and applies the command-line overrides.
pub fn load_config(cli: &Cli, path: &Path) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(&read(path)?)?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    if let Some(n) = cli.starts {
        if n == 0 {
            return Err(CliError::Config("--starts must be at least 1".into()));
        }
        cfg.solver.n_starts = n;
    }
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

/// The multi-start solve with starts run in parallel. The winner does not
/// depend on scheduling since the runs are collected in start order.
pub fn solve_parallel(cfg: &RunConfig) -> normsol_core::Result<SolveReport> {
    let s = &cfg.solver;
    s.validate()?;
    let grid = s.grid.build()?;
    let runs: Vec<_> = (0..s.n_starts).into_par_iter().map(|i| run_start(s, &grid, i)).collect();
    let mut winner = select_winner(runs)?;
    if winner.converged() {
        winner.bounds = Some(check_bounds_with(&winner, s, &cfg.verify)?);
    }
    Ok(winner)
}

fn solve(cli: &Cli, path: &Path, out_path: &Path, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(cli, path)?;
    let t = Instant::now();
    let (report, converged) = match solve_parallel(&cfg) {
        Ok(r) => (r, true),
        Err(Error::NotConverged(best)) => (*best, false),
        Err(e) => return Err(CliError::from_solve(e)),
    };
    let file = ReportFile::new(&report, render_config(&cfg), cfg.solver.seed, t.elapsed().as_secs_f64());
    write_file(out_path, &(file.to_json() + "\n"))?;
    emit(
        out,
        &format!(
            "{} energy={:.12e} lambda1={:.10e} lambda2={:.10e} grad_residual={:.3e} pohozaev_residual={:.3e} \
             start={} iterations={}\n",
            if converged { "converged" } else { "not_converged" },
            report.energy,
            report.lambda1,
            report.lambda2,
            report.grad_residual,
            report.pohozaev_residual,
            report.start_index,
            report.iterations
        ),
    );
    if !converged {
        return Err(CliError::NotConverged(format!(
            "no start reached tol_grad = {:e}; best run written to {}",
            cfg.solver.tol_grad,
            out_path.display()
        )));
    }
    match &report.bounds {
        Some(b) if !b.passed() => Err(CliError::Check(failed_names(b))),
        _ => Ok(EXIT_OK),
    }
}

fn failed_names(b: &BoundsReport) -> String {
    let names: Vec<&str> =
        b.checks.iter().filter(|c| c.status == CheckStatus::Fail).map(|c| c.name.as_str()).collect();
    names.join(", ")
}

pub fn format_audit(report: &AuditReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model {} on {}", report.model.kind.name(), report.domain);
    let _ = writeln!(s, "{:<4} {:<7} {:>7}  statement", "hyp", "verdict", "tested");
    for r in &report.results {
        let verdict = match r.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "n/a",
        };
        let _ = writeln!(
            s,
            "{:<4} {:<7} {:>7}  {}",
            r.hypothesis.label(),
            verdict,
            r.tested,
            r.hypothesis.statement()
        );
        if let Some(w) = r.witnesses.first() {
            let _ = writeln!(
                s,
                "     witness (u, v) = ({}, {}): lhs = {:.6e}, rhs = {:.6e}",
                w.u, w.v, w.lhs, w.rhs
            );
        }
        if !r.note.is_empty() {
            let _ = writeln!(s, "     {}", r.note);
        }
    }
    if let Some(e) = &report.envelope {
        let _ = writeln!(
            s,
            "envelope eps = {}, q = {}, gamma = {:.6}, kappa = {:.6e}",
            e.eps, e.q, e.gamma, e.kappa
        );
    }
    if report.skipped > 0 {
        let _ = writeln!(s, "{} samples skipped by the overflow guard", report.skipped);
    }
    for n in &report.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

fn audit(cli: &Cli, path: &Path, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(cli, path)?;
    let settings = AuditSettings { seed: cfg.solver.seed, ..AuditSettings::default() };
    let report =
        audit_hypotheses(&cfg.solver.model, &settings).map_err(|e| CliError::Config(e.to_string()))?;
    emit(out, &format_audit(&report));
    if report.any_failed() {
        let failed: Vec<&str> = report
            .results
            .iter()
            .filter(|r| r.verdict == Verdict::Fail)
            .map(|r| r.hypothesis.label())
            .collect();
        Err(CliError::Check(format!("hypotheses {} fail", failed.join(", "))))
    } else {
        Ok(EXIT_OK)
    }
}

pub fn format_sweep(table: &SweepTable) -> String {
    let mut s = String::from("mu,energy,lambda1,lambda2\n");
    for r in &table.rows {
        if r.converged {
            let _ = writeln!(s, "{:?},{:?},{:?},{:?}", r.mu, r.energy, r.lambda1, r.lambda2);
        } else {
            let _ = writeln!(s, "{:?},,,", r.mu);
        }
    }
    let _ = writeln!(s, "# slope = {:?}", table.slope);
    if let Some(m) = table.mu_positive {
        let _ = writeln!(s, "# both multipliers positive from mu = {m:?}");
    }
    s
}

fn sweep(cli: &Cli, path: &Path, mu: &[f64], out_path: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(cli, path)?;
    let table = sweep_mu(&cfg.solver, mu).map_err(CliError::from_solve)?;
    let csv = format_sweep(&table);
    match out_path {
        Some(p) => write_file(p, &csv)?,
        None => emit(out, &csv),
    }
    if table.complete {
        Ok(EXIT_OK)
    } else {
        Err(CliError::NotConverged("some mu values did not converge; slope uses the rest".into()))
    }
}

fn load_report(path: &Path) -> Result<(ReportFile, RunConfig), CliError> {
    let file = ReportFile::from_json(&read(path)?)
        .map_err(|e| CliError::Config(format!("{} is not a report: {e}", path.display())))?;
    let cfg = parse_config(&file.config_echo)
        .map_err(|e| CliError::Config(format!("config_echo of {}: {e}", path.display())))?;
    Ok((file, cfg))
}

pub fn format_checks(checks: &[BoundCheck]) -> String {
    let mut s = String::new();
    let _ =
        writeln!(s, "{:<22} {:<6} {:>16} {:>16} {:>12}  anchor", "check", "status", "lhs", "rhs", "margin");
    for c in checks {
        let status = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "n/a",
        };
        let _ = writeln!(
            s,
            "{:<22} {:<6} {:>16.9e} {:>16.9e} {:>12.3e}  {}",
            c.name, status, c.lhs, c.rhs, c.margin, c.anchor
        );
    }
    s
}

/// Relative agreement demanded between stored and recomputed values.
const RECOMPUTE_TOL: f64 = 1e-9;

fn verify(path: &Path, out: &mut dyn Write) -> CliResult {
    let (file, cfg) = load_report(path)?;
    let grid = cfg.solver.grid.build().map_err(|e| CliError::Config(e.to_string()))?;
    let mut report = file.to_solve_report(&grid).map_err(CliError::Config)?;
    if !report.converged() {
        return Err(CliError::NotConverged(format!(
            "{} holds a run with status {:?}",
            path.display(),
            report.status
        )));
    }

    let s = &cfg.solver;
    let c = &s.constraint;
    let model = &s.model;
    let check_err = |e: Error| CliError::Check(e.to_string());
    let f = evaluate(&report.state, model).map_err(check_err)?;
    let res = residual(&report.state, model).map_err(check_err)?;
    let (mu, mv) = report.state.masses();
    let eq = CheckKind::Equal { rel: RECOMPUTE_TOL };
    let mass_eq = CheckKind::Equal { rel: 1e-10 };
    let mut checks = vec![
        BoundCheck::new("stored_energy", "stored J = recomputed J", eq, report.energy, f.energy),
        BoundCheck::new("stored_kinetic", "stored |∇w|₂² = recomputed", eq, report.kinetic, f.kinetic),
        BoundCheck::new("stored_lambda1", "stored λ₁ = recomputed", eq, report.lambda1, res.lambda1),
        BoundCheck::new("stored_lambda2", "stored λ₂ = recomputed", eq, report.lambda2, res.lambda2),
        BoundCheck::new("mass_u", "|u|₂² = a²", mass_eq, mu, c.a * c.a),
        BoundCheck::new("mass_v", "|v|₂² = b²", mass_eq, mv, c.b * c.b),
        BoundCheck::new("grad_residual", "‖g‖ ≤ tol_grad", CheckKind::AtMost, res.norm, s.tol_grad),
        BoundCheck::new(
            "pohozaev_residual",
            "|P| ≤ tol_pohozaev·|∇w|₂²",
            CheckKind::AtMost,
            f.pohozaev.abs(),
            s.tol_pohozaev * f.kinetic,
        ),
    ];
    report.energy = f.energy;
    report.kinetic = f.kinetic;
    report.potential = f.potential;
    report.nl_pairing = f.nl_pairing;
    report.pohozaev_residual = f.pohozaev.abs();
    report.grad_residual = res.norm;
    report.lambda1 = res.lambda1;
    report.lambda2 = res.lambda2;
    let bounds = check_bounds_with(&report, s, &cfg.verify).map_err(check_err)?;
    if let Some(stored) = &file.bounds {
        if stored.checks.len() != bounds.checks.len() {
            let _ = writeln!(
                out,
                "note: stored bounds list {} checks, recomputed {}",
                stored.checks.len(),
                bounds.checks.len()
            );
        }
    }
    checks.extend(bounds.checks);
    emit(out, &format_checks(&checks));
    let all = BoundsReport { checks };
    if all.passed() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Check(failed_names(&all)))
    }
}

fn probe(cli: &Cli, path: &Path, k: f64, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(cli, path)?;
    let v = &cfg.verify;
    let p = geometry_probe(&cfg.solver, k, v.probe_samples, v.probe_seed).map_err(CliError::from_solve)?;
    emit(
        out,
        &format!(
            "K = {:?}\nsup J at K    = {:.12e}\ninf J at 2K   = {:.12e}\ninf J at K/2  = {:.12e}\nsamples = {}\n{}\n",
            p.k,
            p.sup_k,
            p.inf_2k,
            p.j_star,
            p.samples,
            if p.pass { "PASS" } else { "FAIL" }
        ),
    );
    if p.pass {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Check("geometry_separation".into()))
    }
}

/// `r,u,v` rows with shortest round-trip formatting.
pub fn format_profile(file: &ReportFile) -> String {
    let st = &file.result.state;
    let mut s = String::from("r,u,v\n");
    for ((r, u), v) in st.r.iter().zip(&st.u).zip(&st.v) {
        let _ = writeln!(s, "{r:?},{u:?},{v:?}");
    }
    s
}

fn export(path: &Path, csv: &Path, out: &mut dyn Write) -> CliResult {
    let (file, cfg) = load_report(path)?;
    let g = cfg.solver.grid.build().map_err(|e| CliError::Config(e.to_string()))?;
    if file.result.state.r.as_slice() != g.nodes() {
        return Err(CliError::Config("stored nodes differ from the configured grid".into()));
    }
    write_file(csv, &format_profile(&file))?;
    let _ = writeln!(out, "wrote {} rows to {}", g.len(), csv.display());
    Ok(EXIT_OK)
}
