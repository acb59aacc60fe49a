//! Command-line front end.
//!
//! Every subcommand reads a problem file, writes a JSON result document
//! (to `--out` or standard output) and, where it makes sense, a plotting CSV.
//! Exit codes: 0 success/agree, 1 error, 2 infeasible, 3 equivalence disagree.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    min_energy_baseline, simulate_continuous, simulate_discrete, simulate_rk4, sparsity,
    verify_equivalence, EquivalenceReport, SparsityReport,
};
use crate::discretize::build_reachability;
use crate::error::{Error, Result};
use crate::model::{read_problem, read_signal, write_signal, ControlProblem, ControlSignal};
use crate::solver::{solve, solve_discretized, SolveOptions, SolveReport, SolveStatus, WeightMatrix};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_DISAGREE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "handsoff", version, about = "Maximum hands-off control of LTI plants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Solve the L1 program and report the sparse control
    Solve(Flags),
    /// Contrast the L1 solution with the minimum-energy control
    Compare(Flags),
    /// Re-solve over a grid of horizons or weight scalings
    Sweep(Flags),
    /// Compare the L1 support with an exhaustive L0 search (m*N <= 24)
    VerifyEquivalence(Flags),
    /// Re-simulate a control on a fine grid
    Simulate(Flags),
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Problem file (JSON)
    #[arg(long)]
    pub input: PathBuf,
    /// Result document path; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trajectory CSV path
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Control CSV to simulate instead of solving (simulate only)
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub opt_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub feas_tol: f64,
    /// Sparsity threshold
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[arg(long)]
    pub no_polish: bool,
    /// Fine steps per grid interval for continuous re-simulation
    #[arg(long, default_value_t = 10)]
    pub substeps: usize,
    /// Horizons for `sweep`, e.g. "5,7.5,10" (grid step held fixed)
    #[arg(long = "sweep-T", value_delimiter = ',')]
    pub sweep_t: Vec<f64>,
    /// Uniform weight scalings for `sweep`
    #[arg(long = "sweep-scale", value_delimiter = ',')]
    pub sweep_scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Compare,
    Sweep,
    VerifyEquivalence,
    Simulate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    Horizons(Vec<f64>),
    Scales(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: PathBuf,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub signal: Option<PathBuf>,
    pub solve: SolveOptions,
    pub substeps: usize,
    pub sweep: Option<SweepGrid>,
}

impl RunConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            input: input.into(),
            out: None,
            csv: None,
            signal: None,
            solve: SolveOptions::default(),
            substeps: 10,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solve.validate()?;
        if self.substeps == 0 {
            return Err(Error::Config("--substeps must be at least 1".into()));
        }
        if self.command == Command::Sweep {
            match &self.sweep {
                Some(SweepGrid::Horizons(v)) | Some(SweepGrid::Scales(v)) if !v.is_empty() => {}
                _ => return Err(Error::Config("sweep needs a nonempty --sweep-T or --sweep-scale".into())),
            }
        }
        Ok(())
    }
}

impl TryFrom<Cli> for RunConfig {
    type Error = Error;

    fn try_from(cli: Cli) -> Result<Self> {
        let (command, f) = match cli.command {
            CliCommand::Solve(f) => (Command::Solve, f),
            CliCommand::Compare(f) => (Command::Compare, f),
            CliCommand::Sweep(f) => (Command::Sweep, f),
            CliCommand::VerifyEquivalence(f) => (Command::VerifyEquivalence, f),
            CliCommand::Simulate(f) => (Command::Simulate, f),
        };
        let sweep = match (f.sweep_t.is_empty(), f.sweep_scale.is_empty()) {
            (false, false) => {
                return Err(Error::Config("use either --sweep-T or --sweep-scale, not both".into()))
            }
            (false, true) => Some(SweepGrid::Horizons(f.sweep_t)),
            (true, false) => Some(SweepGrid::Scales(f.sweep_scale)),
            (true, true) => None,
        };
        let cfg = RunConfig {
            command,
            input: f.input,
            out: f.out,
            csv: f.csv,
            signal: f.signal,
            solve: SolveOptions {
                opt_tol: f.opt_tol,
                feas_tol: f.feas_tol,
                sparsity_threshold: f.threshold,
                polish: !f.no_polish,
                ..SolveOptions::default()
            },
            substeps: f.substeps,
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A finished command: exit code, result document and extra files to write.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub exit_code: i32,
    pub document: String,
    pub files: Vec<(PathBuf, String)>,
}

/// Runs a command, writes its outputs and returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let result = cfg.validate().and_then(|_| match cfg.command {
        Command::Solve => cmd_solve(cfg),
        Command::Compare => cmd_compare(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::VerifyEquivalence => cmd_verify_equivalence(cfg),
        Command::Simulate => cmd_simulate(cfg),
    });
    match result.and_then(|out| emit(cfg, &out).map(|_| out.exit_code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn emit(cfg: &RunConfig, out: &CommandOutput) -> Result<()> {
    for (path, text) in &out.files {
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    match &cfg.out {
        Some(path) => std::fs::write(path, &out.document)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
        None => print!("{}", out.document),
    }
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<ControlProblem> {
    let text = std::fs::read_to_string(&cfg.input)
        .map_err(|e| Error::Io(format!("{}: {e}", cfg.input.display())))?;
    read_problem(&text)
}

fn to_document<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("result documents serialize");
    s.push('\n');
    s
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn status_exit(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        _ => EXIT_ERROR,
    }
}

#[derive(Debug, Serialize)]
pub struct SolveSection {
    pub status: &'static str,
    pub objective: Option<f64>,
    pub dual_objective: Option<f64>,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub duality_gap: Option<f64>,
    pub iterations: usize,
    pub polish_applied: bool,
    pub polish_rounds: usize,
    pub terminal_error: Option<f64>,
    pub feasibility_slack: Option<f64>,
    pub sparsity: Option<SparsityReport>,
    pub unpolished_sparsity: Option<SparsityReport>,
}

impl SolveSection {
    fn from_report(r: &SolveReport, threshold: f64) -> Self {
        let optimal = r.status == SolveStatus::Optimal;
        SolveSection {
            status: r.status.as_str(),
            objective: finite(r.objective),
            dual_objective: finite(r.dual_objective),
            primal_residual: finite(r.primal_residual),
            dual_residual: finite(r.dual_residual),
            duality_gap: finite(r.gap),
            iterations: r.iterations,
            polish_applied: r.polish_applied,
            polish_rounds: r.polish_rounds,
            terminal_error: finite(r.terminal_error),
            feasibility_slack: finite(r.feasibility_slack),
            sparsity: optimal.then(|| sparsity(&r.signal, threshold)),
            unpolished_sparsity: optimal.then(|| sparsity(&r.unpolished, threshold)),
        }
    }
}

#[derive(Debug, Serialize)]
struct Grid {
    horizon: f64,
    steps: usize,
    step: f64,
}

impl Grid {
    fn of(p: &ControlProblem) -> Self {
        Grid {
            horizon: p.horizon,
            steps: p.steps,
            step: p.step(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SolveDocument {
    schema_version: u32,
    command: &'static str,
    grid: Grid,
    #[serde(flatten)]
    result: SolveSection,
    wall_time_s: f64,
}

fn trajectory_csv(p: &ControlProblem, signal: &ControlSignal) -> Result<String> {
    let dp = build_reachability(p)?;
    let traj = simulate_discrete(&dp, signal, &p.x0)?;
    write_signal(signal, &traj)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<CommandOutput> {
    let started = Instant::now();
    let p = load(cfg)?;
    let report = solve(&p, &cfg.solve)?;
    let mut files = Vec::new();
    if let (Some(path), SolveStatus::Optimal) = (&cfg.csv, report.status) {
        files.push((path.clone(), trajectory_csv(&p, &report.signal)?));
    }
    let doc = SolveDocument {
        schema_version: SCHEMA_VERSION,
        command: "solve",
        grid: Grid::of(&p),
        result: SolveSection::from_report(&report, cfg.solve.sparsity_threshold),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CommandOutput {
        exit_code: status_exit(report.status),
        document: to_document(&doc),
        files,
    })
}

#[derive(Debug, Serialize)]
struct BaselineSection {
    status: &'static str,
    message: Option<String>,
    l1_cost: Option<f64>,
    energy: Option<f64>,
    bound_violation: Option<bool>,
    terminal_error: Option<f64>,
    sparsity: Option<SparsityReport>,
}

#[derive(Debug, Serialize)]
struct CompareDocument {
    schema_version: u32,
    command: &'static str,
    grid: Grid,
    l1: SolveSection,
    l2: BaselineSection,
    wall_time_s: f64,
}

fn sibling_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{tag}.{ext}"),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<CommandOutput> {
    let started = Instant::now();
    let p = load(cfg)?;
    let threshold = cfg.solve.sparsity_threshold;
    let report = solve(&p, &cfg.solve)?;
    let dp = build_reachability(&p)?;
    let mut files = Vec::new();
    if let (Some(path), SolveStatus::Optimal) = (&cfg.csv, report.status) {
        files.push((path.clone(), trajectory_csv(&p, &report.signal)?));
    }

    let l2 = match min_energy_baseline(&dp) {
        Ok(b) => {
            if let Some(path) = &cfg.csv {
                files.push((sibling_path(path, "l2"), trajectory_csv(&p, &b.signal)?));
            }
            let energy = b.signal.step() * b.signal.values().iter().map(|v| v * v).sum::<f64>();
            BaselineSection {
                status: "ok",
                message: None,
                l1_cost: Some(b.signal.l1_cost(&p.weights)),
                energy: Some(energy),
                bound_violation: Some(b.bound_violation),
                terminal_error: Some(dp.terminal_state(b.signal.values()).norm()),
                sparsity: Some(sparsity(&b.signal, threshold)),
            }
        }
        Err(e) => BaselineSection {
            status: if e == Error::RankDeficient { "rank_deficient" } else { "error" },
            message: Some(e.to_string()),
            l1_cost: None,
            energy: None,
            bound_violation: None,
            terminal_error: None,
            sparsity: None,
        },
    };

    let doc = CompareDocument {
        schema_version: SCHEMA_VERSION,
        command: "compare",
        grid: Grid::of(&p),
        l1: SolveSection::from_report(&report, threshold),
        l2,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CommandOutput {
        exit_code: status_exit(report.status),
        document: to_document(&doc),
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub parameter: &'static str,
    pub value: f64,
    pub horizon: f64,
    pub steps: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub support_measure: Option<f64>,
    pub hands_off_ratio: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
    /// Set when J1 exceeds that of the preceding optimal row of a horizon sweep.
    pub monotonicity_violation: bool,
}

#[derive(Debug, Serialize)]
struct SweepDocument {
    schema_version: u32,
    command: &'static str,
    base_step: f64,
    rows: Vec<SweepRow>,
    j1_nonincreasing: Option<bool>,
    wall_time_s: f64,
}

fn sweep_row(
    base: &ControlProblem,
    opts: &SolveOptions,
    index: usize,
    parameter: &'static str,
    value: f64,
) -> SweepRow {
    let mut row = SweepRow {
        index,
        parameter,
        value,
        horizon: base.horizon,
        steps: base.steps,
        status: "error".into(),
        objective: None,
        support_measure: None,
        hands_off_ratio: None,
        iterations: None,
        error: None,
        monotonicity_violation: false,
    };
    let instance = || -> Result<ControlProblem> {
        let mut p = base.clone();
        if parameter == "T" {
            let steps = (value / base.step()).round();
            if !(value.is_finite() && value > 0.0 && steps >= 1.0) {
                return Err(Error::Config(format!("horizon {value} gives no grid interval")));
            }
            p.horizon = value;
            p.steps = steps as usize;
        } else {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("weight scale {value} must be positive")));
            }
            p.weights = base.weights.iter().map(|w| w * value).collect();
        }
        crate::model::validate_problem(&p)?;
        Ok(p)
    };
    let p = match instance() {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.horizon = p.horizon;
    row.steps = p.steps;
    let dp = build_reachability(&p);
    let weights = WeightMatrix::new(p.weights.clone());
    match dp.and_then(|dp| solve_discretized(&dp, &weights?, p.x0.norm(), opts)) {
        Ok(r) => {
            row.status = r.status.as_str().into();
            row.iterations = Some(r.iterations);
            if r.status == SolveStatus::Optimal {
                let s = sparsity(&r.signal, opts.sparsity_threshold);
                row.objective = Some(r.objective);
                row.support_measure = Some(s.support_measure);
                row.hands_off_ratio = Some(s.hands_off_ratio);
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Flags rows whose J1 rises above the previous optimal row; returns whether
/// the optimal J1 column is nonincreasing.
pub fn flag_monotonicity(rows: &mut [SweepRow], opt_tol: f64) -> bool {
    let mut ok = true;
    let mut prev: Option<f64> = None;
    for row in rows.iter_mut() {
        if let Some(j) = row.objective {
            if let Some(p) = prev {
                if j > p + opt_tol * (1.0 + p.abs()) {
                    row.monotonicity_violation = true;
                    ok = false;
                }
            }
            prev = Some(j);
        }
    }
    ok
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<CommandOutput> {
    let started = Instant::now();
    let p = load(cfg)?;
    let (parameter, values) = match &cfg.sweep {
        Some(SweepGrid::Horizons(v)) if !v.is_empty() => ("T", v.clone()),
        Some(SweepGrid::Scales(v)) if !v.is_empty() => ("scale", v.clone()),
        _ => return Err(Error::Config("sweep grid must be nonempty".into())),
    };
    let mut rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| sweep_row(&p, &cfg.solve, i, parameter, v))
        .collect();
    let j1_nonincreasing = (parameter == "T").then(|| flag_monotonicity(&mut rows, cfg.solve.opt_tol));
    let doc = SweepDocument {
        schema_version: SCHEMA_VERSION,
        command: "sweep",
        base_step: p.step(),
        rows,
        j1_nonincreasing,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CommandOutput {
        exit_code: EXIT_OK,
        document: to_document(&doc),
        files: Vec::new(),
    })
}

#[derive(Debug, Serialize)]
struct EquivalenceDocument {
    schema_version: u32,
    command: &'static str,
    grid: Grid,
    #[serde(flatten)]
    report: EquivalenceReport,
    wall_time_s: f64,
}

pub fn cmd_verify_equivalence(cfg: &RunConfig) -> Result<CommandOutput> {
    let started = Instant::now();
    let p = load(cfg)?;
    let report = verify_equivalence(&p, &cfg.solve)?;
    let exit_code = if report.agree { EXIT_OK } else { EXIT_DISAGREE };
    let doc = EquivalenceDocument {
        schema_version: SCHEMA_VERSION,
        command: "verify-equivalence",
        grid: Grid::of(&p),
        report,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CommandOutput {
        exit_code,
        document: to_document(&doc),
        files: Vec::new(),
    })
}

#[derive(Debug, Serialize)]
struct SimulateDocument {
    schema_version: u32,
    command: &'static str,
    grid: Grid,
    source: &'static str,
    substeps: usize,
    terminal_discrete: Vec<f64>,
    terminal_continuous: Vec<f64>,
    terminal_rk4: Vec<f64>,
    /// `|x_exact(T) - x_d[N]|`
    discrete_vs_continuous: f64,
    /// `|x_rk4(T) - x_exact(T)|`
    rk4_vs_exact: f64,
    wall_time_s: f64,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput> {
    let started = Instant::now();
    let p = load(cfg)?;
    let (signal, source) = match &cfg.signal {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            (read_signal(&text)?.0, "signal_file")
        }
        None => {
            let r = solve(&p, &cfg.solve)?;
            if r.status != SolveStatus::Optimal {
                return Ok(CommandOutput {
                    exit_code: status_exit(r.status),
                    document: to_document(&SolveDocument {
                        schema_version: SCHEMA_VERSION,
                        command: "simulate",
                        grid: Grid::of(&p),
                        result: SolveSection::from_report(&r, cfg.solve.sparsity_threshold),
                        wall_time_s: started.elapsed().as_secs_f64(),
                    }),
                    files: Vec::new(),
                });
            }
            (r.signal, "solve")
        }
    };
    let dp = build_reachability(&p)?;
    let discrete = simulate_discrete(&dp, &signal, &p.x0)?;
    let exact = simulate_continuous(&p.plant, &signal, &p.x0, cfg.substeps)?;
    let rk4 = simulate_rk4(&p.plant, &signal, &p.x0, cfg.substeps)?;
    let last = |t: &crate::model::Trajectory| -> DVector<f64> { t.states.last().cloned().unwrap_or_default() };
    let (xd, xc, xr) = (last(&discrete), last(&exact), last(&rk4));

    let mut files = Vec::new();
    if let Some(path) = &cfg.csv {
        files.push((path.clone(), write_signal(&signal.refine(cfg.substeps)?, &exact)?));
    }
    let doc = SimulateDocument {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        grid: Grid::of(&p),
        source,
        substeps: cfg.substeps,
        discrete_vs_continuous: (&xc - &xd).norm(),
        rk4_vs_exact: (&xr - &xc).norm(),
        terminal_discrete: xd.iter().copied().collect(),
        terminal_continuous: xc.iter().copied().collect(),
        terminal_rk4: xr.iter().copied().collect(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CommandOutput {
        exit_code: EXIT_OK,
        document: to_document(&doc),
        files,
    })
}
