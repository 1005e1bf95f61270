//! Experiment runner: scenario subcommands, layered configuration
//! (defaults < config file < command line), and CSV/JSON emission.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use swarmfield::consensus::{consensus_static_sweep, StaticStudyRow};
use swarmfield::engine::run_scenario;
use swarmfield::{ExperimentConfig, MetricsRecord, Result, Scenario, SimError, TrajectoryRow};

const METRICS_HEADER: &str =
    "tick,A_cover_cm2,mean_degree,giant_component,E_T,E_P,E_A,robots_in_region";
const ESTIMATES_HEADER: &str = "tick,est_E_T,est_E_P,est_E_A";
const TRAJECTORY_HEADER: &str = "tick,agent,x,y,heading,phase,estimate";
const STATIC_HEADER: &str =
    "range_ratio,mean_degree,steady_E_P,passage_time,lambda2,fraction_connected,spectral_consistency";

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "SWARMFIELD_OUT";

#[derive(Parser)]
#[command(name = "swarmfield", version, about = "Swarm field-estimation experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exploration only: connectivity-preserving dispersion (or, with
    /// --diffusion, the unconditional random-walk baseline).
    Disperse(RunArgs),
    /// Full collective scenario: dispersion, local averaging, then
    /// consensus-based movement onto the mean-value contour.
    Full(RunArgs),
    /// Communication-free control: solo survey walk, then contour seeking
    /// on the private running-mean estimate.
    Control(RunArgs),
    /// Static-network averaging study over communication-range ratios.
    ConsensusStatic(RunArgs),
    /// One-parameter grid of scenario runs with aggregated final metrics.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; defaults fill anything left unset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $SWARMFIELD_OUT, then ./swarmfield-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Swarm size.
    #[arg(long)]
    n: Option<usize>,
    /// Number of seeds to run.
    #[arg(long)]
    seeds: Option<u32>,
    /// First seed; runs use seed_base..seed_base+seeds.
    #[arg(long)]
    seed_base: Option<u64>,
    /// Survey samples before the control scenario switches to exploitation.
    #[arg(long)]
    t_sw: Option<u64>,
    /// Monte Carlo repetitions of the static study.
    #[arg(long)]
    mc: Option<usize>,
    /// Communication-range ratio grid `start:stop:count` for the static study.
    #[arg(long)]
    sweep_range: Option<String>,
    /// Tick budget override.
    #[arg(long)]
    total_ticks: Option<u32>,
    /// Memory weight of the averaging rule.
    #[arg(long)]
    alpha: Option<f64>,
    /// Dispersion stop threshold, cm.
    #[arg(long)]
    d_thr: Option<f64>,
    /// Use the diffusion baseline in `disperse`.
    #[arg(long)]
    diffusion: bool,
    /// Also write per-(tick, agent) trajectory CSVs.
    #[arg(long)]
    trajectory: bool,
    /// Generic override in config-file syntax, e.g. `--set alpha=0.3`
    /// or `--set field.slope=2.0`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Copy, Clone, ValueEnum)]
enum SweepScenario {
    Disperse,
    Full,
    Control,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Scenario to sweep.
    #[arg(long, value_enum, default_value = "full")]
    scenario: SweepScenario,
    /// Config key to vary, e.g. `n` or `t_sw`.
    #[arg(long)]
    param: String,
    /// Comma-separated values for the swept key, in output order.
    #[arg(long)]
    values: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SimError::Config { .. } | SimError::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Disperse(args) => run_dynamic(Scenario::Disperse, args),
        Command::Full(args) => run_dynamic(Scenario::Full, args),
        Command::Control(args) => run_dynamic(Scenario::Control, args),
        Command::ConsensusStatic(args) => run_static(args),
        Command::Sweep(args) => run_sweep(args),
    }
}

/// Layers defaults, the config file, dedicated flags, and `--set` overrides
/// (in that order) into one resolved config.
fn resolve_config(scenario: Scenario, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut table = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_table(&text)?
        }
        None => toml::Table::new(),
    };
    let mut flags = String::new();
    let mut push = |line: String| {
        flags.push_str(&line);
        flags.push('\n');
    };
    if let Some(n) = args.n {
        push(format!("n = {n}"));
    }
    if let Some(s) = args.seeds {
        push(format!("seeds = {s}"));
    }
    if let Some(s) = args.seed_base {
        push(format!("seed_base = {s}"));
    }
    if let Some(t) = args.t_sw {
        push(format!("t_sw = {t}"));
    }
    if let Some(m) = args.mc {
        push(format!("mc = {m}"));
    }
    if let Some(range) = &args.sweep_range {
        let (start, stop, count) = parse_sweep_range(range)?;
        push(format!("sweep_start = {start}"));
        push(format!("sweep_stop = {stop}"));
        push(format!("sweep_count = {count}"));
    }
    if let Some(t) = args.total_ticks {
        push(format!("total_ticks = {t}"));
    }
    if let Some(a) = args.alpha {
        push(format!("alpha = {a}"));
    }
    if let Some(d) = args.d_thr {
        push(format!("distance_threshold = {d}"));
    }
    if args.diffusion {
        push("use_diffusion = true".into());
    }
    if args.trajectory {
        push("write_trajectory = true".into());
    }
    merge(&mut table, parse_table(&flags)?);
    for kv in &args.set {
        merge(&mut table, parse_table(kv)?);
    }
    let mut cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| SimError::config("config", e.to_string()))?;
    cfg.scenario = scenario;
    Ok(cfg)
}

fn parse_table(text: &str) -> Result<toml::Table> {
    toml::from_str(text).map_err(|e| SimError::config("config", e.to_string()))
}

/// Recursive table merge; scalars and arrays in `from` replace.
fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => merge(dst, src),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn parse_sweep_range(text: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || SimError::config("sweep_range", "expected `start:stop:count`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    Ok((start, stop, count))
}

fn output_dir(args: &RunArgs) -> Result<PathBuf> {
    let dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("swarmfield-out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_dynamic(scenario: Scenario, args: RunArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = resolve_config(scenario, &args)?;
    let dir = output_dir(&args)?;
    let params = cfg.to_scenario_params()?;
    let seeds = cfg.seed_list();
    let runs: Vec<(u64, Vec<MetricsRecord>, Vec<TrajectoryRow>)> = seeds
        .par_iter()
        .map(|&seed| {
            run_scenario(&params, seed, cfg.write_trajectory)
                .map(|(metrics, traj)| (seed, metrics, traj))
        })
        .collect::<Result<_>>()?;
    let mut finals = Vec::new();
    for (seed, metrics, traj) in &runs {
        std::fs::write(
            dir.join(format!("metrics_seed{seed}.csv")),
            metrics_csv(metrics),
        )?;
        std::fs::write(
            dir.join(format!("estimates_seed{seed}.csv")),
            estimates_csv(metrics),
        )?;
        if cfg.write_trajectory {
            std::fs::write(
                dir.join(format!("trajectory_seed{seed}.csv")),
                trajectory_csv(traj),
            )?;
        }
        finals.push(serde_json::json!({
            "seed": seed,
            "metrics": metrics.last().expect("run produced at least tick 0"),
        }));
    }
    write_summary(&dir, &cfg, &seeds, finals, start)?;
    println!(
        "{} seed(s) written to {}",
        seeds.len(),
        dir.display()
    );
    Ok(())
}

fn run_static(args: RunArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = resolve_config(Scenario::ConsensusStatic, &args)?;
    if args.n.is_none() && cfg.n == ExperimentConfig::default().n {
        // the static study follows a different default population than the
        // embodied scenarios
        cfg.n = 50;
    }
    let dir = output_dir(&args)?;
    let rows = consensus_static_sweep(&cfg.to_static_study()?)?;
    std::fs::write(dir.join("consensus_static.csv"), static_csv(&rows))?;
    let finals = rows
        .iter()
        .map(|r| serde_json::to_value(r).expect("row serializes"))
        .collect();
    write_summary(&dir, &cfg, &cfg.seed_list(), finals, start)?;
    println!("{} sweep point(s) written to {}", rows.len(), dir.display());
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let start = Instant::now();
    let scenario = match args.scenario {
        SweepScenario::Disperse => Scenario::Disperse,
        SweepScenario::Full => Scenario::Full,
        SweepScenario::Control => Scenario::Control,
    };
    let key = args.param.trim();
    if key.is_empty() {
        return Err(SimError::config("param", "must name a config key"));
    }
    let fixed_elsewhere = args
        .run
        .set
        .iter()
        .any(|kv| kv.split('=').next().map(str::trim) == Some(key))
        || (key == "n" && args.run.n.is_some())
        || (key == "t_sw" && args.run.t_sw.is_some())
        || (key == "alpha" && args.run.alpha.is_some())
        || (key == "total_ticks" && args.run.total_ticks.is_some())
        || (key == "distance_threshold" && args.run.d_thr.is_some());
    if fixed_elsewhere {
        return Err(SimError::config(
            "param",
            format!("`{key}` is both swept and fixed by an override"),
        ));
    }
    let values: Vec<&str> = args
        .values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(SimError::config("values", "grid must be non-empty"));
    }
    // resolve one config per grid point up front so bad values fail fast
    let mut configs = Vec::with_capacity(values.len());
    for v in &values {
        let mut point = args.run.clone_for_point();
        point.set.push(format!("{key} = {v}"));
        configs.push(resolve_config(scenario, &point)?);
    }
    let dir = output_dir(&args.run)?;
    let rows: Vec<String> = configs
        .par_iter()
        .zip(&values)
        .map(|(cfg, v)| -> Result<String> {
            let params = cfg.to_scenario_params()?;
            let finals: Vec<MetricsRecord> = cfg
                .seed_list()
                .par_iter()
                .map(|&seed| {
                    run_scenario(&params, seed, false)
                        .map(|(m, _)| *m.last().expect("non-empty run"))
                })
                .collect::<Result<_>>()?;
            Ok(sweep_row(key, v, &finals))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "param,value,coverage_mean,coverage_sd,mean_degree_mean,mean_degree_sd,\
         giant_mean,giant_sd,E_T_mean,E_T_sd,E_P_mean,E_P_sd,E_A_mean,E_A_sd,\
         in_region_mean,in_region_sd\n",
    );
    for row in rows {
        csv.push_str(&row);
    }
    std::fs::write(dir.join("sweep.csv"), csv)?;
    write_summary(&dir, &configs[0], &configs[0].seed_list(), Vec::new(), start)?;
    println!("{} grid point(s) written to {}", values.len(), dir.display());
    Ok(())
}

impl RunArgs {
    /// Clone for one sweep grid point (RunArgs holds no Copy-only fields but
    /// derives nothing; spelled out to keep clap derive lean).
    fn clone_for_point(&self) -> RunArgs {
        RunArgs {
            config: self.config.clone(),
            out: self.out.clone(),
            n: self.n,
            seeds: self.seeds,
            seed_base: self.seed_base,
            t_sw: self.t_sw,
            mc: self.mc,
            sweep_range: self.sweep_range.clone(),
            total_ticks: self.total_ticks,
            alpha: self.alpha,
            d_thr: self.d_thr,
            diffusion: self.diffusion,
            trajectory: self.trajectory,
            set: self.set.clone(),
        }
    }
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sweep_row(key: &str, value: &str, finals: &[MetricsRecord]) -> String {
    let mut row = format!("{key},{value}");
    let columns: [fn(&MetricsRecord) -> f64; 7] = [
        |m| m.coverage_cm2,
        |m| m.mean_degree,
        |m| m.giant_component as f64,
        |m| m.trueness_error,
        |m| m.precision_error,
        |m| m.accuracy_error,
        |m| m.robots_in_region as f64,
    ];
    for pick in columns {
        let (mean, sd) = mean_sd(finals.iter().map(pick));
        let _ = write!(row, ",{mean},{sd}");
    }
    row.push('\n');
    row
}

fn metrics_csv(metrics: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            m.t,
            m.coverage_cm2,
            m.mean_degree,
            m.giant_component,
            m.trueness_error,
            m.precision_error,
            m.accuracy_error,
            m.robots_in_region
        );
    }
    out
}

fn estimates_csv(metrics: &[MetricsRecord]) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            m.t, m.est_trueness_error, m.est_precision_error, m.est_accuracy_error
        );
    }
    out
}

fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:?},{}",
            r.tick, r.agent, r.x, r.y, r.heading, r.phase, r.estimate
        );
    }
    out
}

fn static_csv(rows: &[StaticStudyRow]) -> String {
    let mut out = String::from(STATIC_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.range_ratio,
            r.mean_degree,
            r.steady_precision_error,
            r.passage_time,
            r.lambda2,
            r.fraction_connected,
            r.spectral_consistency
        );
    }
    out
}

/// Summary JSON: resolved config echo (reproducibility contract), seeds,
/// final metrics, wall time.
fn write_summary(
    dir: &std::path::Path,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    finals: Vec<serde_json::Value>,
    start: Instant,
) -> Result<()> {
    let summary = serde_json::json!({
        "config": cfg,
        "seeds": seeds,
        "final": finals,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let text =
        serde_json::to_string_pretty(&summary).map_err(|e| SimError::Internal(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), text)?;
    Ok(())
}
