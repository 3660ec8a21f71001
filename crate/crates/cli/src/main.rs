//! `vpp-sched`: scenario generation, stochastic bidding, evaluation and
//! tariff sweeps for a virtual power plant on a distribution feeder.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use vpp_core::benders::BendersOptions;
use vpp_core::config::{write_instance, LoadedConfig, MethodName, ScenarioSettings};
use vpp_core::experiments::{
    parse_levels, profit_report, reevaluate, solve, sweep_tariff, SolveMethod,
};
use vpp_core::io;
use vpp_core::scenario::{build_scenarios, ScenarioSet};
use vpp_core::stochastic::{build_extensive, RiskMeasure};
use vpp_core::synthetic::{desk_instance, district_instance, sweep_instance, Instance};
use vpp_core::VppError;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

/// Relative agreement required between a stored objective and its
/// recomputation in `evaluate`.
const EVALUATE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "vpp-sched",
    version,
    about = "Multi-market VPP scheduling under uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance (CSV tables plus config.json).
    InitInstance(InitArgs),
    /// Draw Latin-hypercube scenarios around the point forecast.
    GenerateScenarios(GenerateArgs),
    /// Compute first-stage bids with Benders or the extensive form.
    Solve(SolveArgs),
    /// Recompute revenue streams of a stored solution and report statistics.
    Evaluate(EvaluateArgs),
    /// Re-solve under a family of time-of-use tariffs.
    TariffSweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    /// 5-bus, 8-step feeder with a handful of devices.
    Desk,
    /// 6-bus day-long feeder with an evening peak.
    Sweep,
    /// Residential district with a configurable bus count.
    District,
}

#[derive(clap::Args)]
struct InitArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "district")]
    kind: InstanceKind,
    /// Feeder size for the district instance, root included.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(2..=97))]
    buses: u64,
    /// Steps per day for the district instance.
    #[arg(long, default_value_t = 96)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    scenarios: u64,
    #[arg(long, default_value_t = 42)]
    scenario_seed: u64,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured scenario count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: Option<u64>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured scenario directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Benders,
    Extensive,
}

impl From<MethodArg> for MethodName {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Benders => MethodName::Benders,
            MethodArg::Extensive => MethodName::Extensive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RiskArg {
    Neutral,
    Cvar,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    risk: Option<RiskArg>,
    /// CVaR confidence level.
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: Option<u64>,
    /// Scenario directory; the configured one when absent.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Solution directory; `<output>/solution` when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the extensive form in CPLEX LP format to this file.
    #[arg(long)]
    export_lp: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    bins: u64,
    /// CVaR level for the profit statistics; the solved level or 0.9.
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,
    /// Report directory; `<solution>/evaluation` when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// `start:stop:step`, e.g. `0:1:0.1`; the configured levels when absent.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Solve levels concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Report directory; `<output>/sweep` when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying an exit code chosen by the command itself.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Exit(EXIT_USAGE, msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(Exit(code, _)) = cause.downcast_ref::<Exit>() {
            return *code;
        }
        if let Some(e) = cause.downcast_ref::<VppError>() {
            return match e {
                VppError::Infeasible(_) => EXIT_INFEASIBLE,
                VppError::NotConverged { .. } => EXIT_NOT_CONVERGED,
                VppError::Config(_) => EXIT_USAGE,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::InitInstance(a) => init_instance(a),
        Command::GenerateScenarios(a) => generate_scenarios(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::TariffSweep(a) => tariff_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn init_instance(a: InitArgs) -> anyhow::Result<()> {
    let instance: Instance = match a.kind {
        InstanceKind::Desk => desk_instance(a.seed)?,
        InstanceKind::Sweep => sweep_instance(a.seed)?,
        InstanceKind::District => district_instance(a.buses as usize, a.steps, a.seed)
            .map_err(|e| usage(e.to_string()))?,
    };
    let settings = ScenarioSettings {
        count: a.scenarios as usize,
        seed: a.scenario_seed,
        directory: "scenarios".into(),
        errors: None,
    };
    let path = write_instance(&a.dir, &instance, settings, RiskMeasure::Expectation)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load(config: &Path) -> anyhow::Result<(LoadedConfig, Instance, String)> {
    let cfg =
        LoadedConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let instance = cfg.instance()?;
    let hash = io::model_hash(&instance.model, &instance.forecast)?;
    Ok((cfg, instance, hash))
}

/// Reads the scenario directory and checks it was drawn for this model.
fn load_scenarios(
    cfg: &LoadedConfig,
    instance: &Instance,
    hash: &str,
    dir: Option<PathBuf>,
) -> anyhow::Result<(ScenarioSet, PathBuf, String)> {
    let dir = dir.unwrap_or_else(|| cfg.scenario_dir());
    if !dir.join("manifest.json").is_file() {
        bail!(
            "scenario directory {} is missing or incomplete; run generate-scenarios first",
            dir.display()
        );
    }
    let (set, _) = io::read_scenarios(&dir, &instance.model, Some(hash))?;
    let digest = io::manifest_digest(&dir)?;
    Ok((set, dir, digest))
}

fn generate_scenarios(a: GenerateArgs) -> anyhow::Result<()> {
    let (cfg, instance, hash) = load(&a.config)?;
    let s = &cfg.config.scenarios;
    let count = a.count.map_or(s.count, |c| c as usize);
    let seed = a.seed.unwrap_or(s.seed);
    let dir = a.out.unwrap_or_else(|| cfg.scenario_dir());
    let table = s.error_table();
    let set = build_scenarios(&instance.forecast, &table, count, seed)?;
    let digest = io::write_scenarios(&dir, &instance.model, &set, &table, &hash)?;
    println!(
        "wrote {count} scenarios to {} (manifest {digest})",
        dir.display()
    );
    Ok(())
}

fn pick_risk(
    configured: RiskMeasure,
    risk: Option<RiskArg>,
    alpha: Option<f64>,
) -> anyhow::Result<RiskMeasure> {
    let configured_alpha = match configured {
        RiskMeasure::Cvar { alpha } => Some(alpha),
        RiskMeasure::Expectation => None,
    };
    match (risk, alpha) {
        (Some(RiskArg::Neutral), Some(_)) => Err(usage("--alpha only applies with --risk cvar")),
        (Some(RiskArg::Neutral), None) => Ok(RiskMeasure::Expectation),
        (Some(RiskArg::Cvar), a) => Ok(RiskMeasure::cvar(a.or(configured_alpha).unwrap_or(0.9))?),
        (None, Some(a)) => Ok(RiskMeasure::cvar(a)?),
        (None, None) => Ok(configured),
    }
}

fn pick_method(cfg: &LoadedConfig, method: Option<MethodArg>) -> SolveMethod {
    let settings = &cfg.config.solver;
    settings.solve_method(method.map_or(settings.method, MethodName::from))
}

fn method_label(m: &SolveMethod) -> &'static str {
    match m {
        SolveMethod::Extensive { .. } => "extensive",
        SolveMethod::Benders(_) => "benders",
    }
}

fn solve_cmd(a: SolveArgs) -> anyhow::Result<()> {
    let (cfg, instance, hash) = load(&a.config)?;
    let (scenarios, _, digest) = load_scenarios(&cfg, &instance, &hash, a.scenarios)?;
    let risk = pick_risk(cfg.config.risk, a.risk, a.alpha)?;
    let mut method = pick_method(&cfg, a.method);
    if let SolveMethod::Benders(opts) = &mut method {
        let BendersOptions {
            tolerance,
            max_iterations,
            workers,
        } = opts;
        if let Some(w) = a.workers {
            *workers = w as usize;
        }
        if let Some(t) = a.tolerance {
            if t.is_nan() || t <= 0.0 {
                return Err(usage("--tolerance must be positive"));
            }
            *tolerance = t;
        }
        if let Some(m) = a.max_iterations {
            *max_iterations = m as usize;
        }
    }
    if let Some(path) = &a.export_lp {
        let ef = build_extensive(&instance.model, &scenarios, risk)?;
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        vpp_lp::write_lp_format(&ef.program, &mut w)?;
        w.flush()?;
    }

    let (solution, report) = solve(&instance.model, &scenarios, risk, &method)?;
    let out = a.out.unwrap_or_else(|| cfg.output_dir().join("solution"));
    let summary = io::write_solution(
        &out,
        &io::SolutionDump {
            model: &instance.model,
            solution: &solution,
            report: report.as_ref(),
            method: method_label(&method),
            model_hash: &hash,
            scenario_manifest_hash: &digest,
        },
    )?;
    println!(
        "objective {:.6}  expected cost {:.6}",
        summary.objective, summary.expected_cost
    );
    if let Some(r) = &report {
        println!(
            "benders: {} iterations, final gap {:.3e}",
            r.iterations, r.final_gap
        );
        if !r.converged {
            return Err(VppError::NotConverged {
                iterations: r.iterations,
                gap: r.final_gap,
            }
            .into());
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let (cfg, instance, hash) = load(&a.config)?;
    let stored = io::read_solution(&a.solution, &instance.model)?;
    if stored.summary.model_hash != hash {
        return Err(VppError::HashMismatch {
            what: "solution model".into(),
            expected: hash,
            found: stored.summary.model_hash.clone(),
        }
        .into());
    }
    let (scenarios, _, digest) = load_scenarios(&cfg, &instance, &hash, a.scenarios)?;
    if stored.summary.scenario_manifest_hash != digest {
        return Err(VppError::HashMismatch {
            what: "solution scenario set".into(),
            expected: digest,
            found: stored.summary.scenario_manifest_hash.clone(),
        }
        .into());
    }
    let risk = stored.summary.risk;
    let solution = reevaluate(
        &instance.model,
        &scenarios,
        stored.first_stage,
        stored.dispatch,
        risk,
    )?;
    let drift = (solution.objective - stored.summary.objective).abs();
    if drift > EVALUATE_TOL * stored.summary.objective.abs().max(1.0) {
        bail!(
            "recomputed objective {} disagrees with the stored {} (difference {drift:.3e})",
            solution.objective,
            stored.summary.objective
        );
    }
    let alpha = a.alpha.unwrap_or(match risk {
        RiskMeasure::Cvar { alpha } => alpha,
        RiskMeasure::Expectation => 0.9,
    });
    let report = profit_report(
        &instance.model,
        &scenarios,
        &solution,
        alpha,
        a.bins as usize,
    )?;
    let out = a.out.unwrap_or_else(|| a.solution.join("evaluation"));
    let rows: Vec<_> = solution.outcomes.iter().map(|o| o.breakdown).collect();
    io::write_profit_report(&out, &report, &solution.probabilities, &rows)?;
    println!(
        "expected profit {:.4}  std {:.4}  cost CVaR({alpha}) {:.4}",
        report.expected_profit, report.profit_std, report.cost_cvar
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn tariff_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let (cfg, instance, hash) = load(&a.config)?;
    let (scenarios, _, _) = load_scenarios(&cfg, &instance, &hash, a.scenarios)?;
    let mut sweep = cfg.config.sweep.to_config(pick_method(&cfg, a.method));
    if let Some(spec) = &a.levels {
        sweep.levels = parse_levels(spec).map_err(|e| usage(e.to_string()))?;
    }
    sweep.parallel |= a.parallel;
    // Levels are compared on expected profit, so the sweep ignores the
    // configured risk measure.
    let model = instance.model;
    let rows = sweep_tariff(&model, &scenarios, &sweep)?;
    let out = a.out.unwrap_or_else(|| cfg.output_dir().join("sweep"));
    io::write_sweep(&out, &model.horizon, &rows)?;
    let mut failed = 0;
    for r in &rows {
        match &r.error {
            Some(e) => {
                failed += 1;
                println!("level {:.2}: failed: {e}", r.level);
            }
            None => println!(
                "level {:.2}: profit {:+.2}%  low window {:+.2}%  high window {:+.2}%",
                r.level, r.profit_change_pct, r.low_window_change_pct, r.high_window_change_pct
            ),
        }
    }
    println!("wrote {}", out.display());
    if failed > 0 {
        bail!("{failed} of {} levels failed", rows.len());
    }
    Ok(())
}
