//! Command-line front end: `capacity`, `policy`, `simulate` and `sizing`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::channel::{FadingDistribution, GainPair, RandomStream};
use crate::config::{ConfigError, Csi, NamedTarget, PolicyTarget, RunConfig};
use crate::error::Error;
use crate::full_csi::{self, FullCsiPolicy};
use crate::main_csi::{self, MainCsiPolicy};
use crate::policy::{constant_power_rate, PowerPolicy};
use crate::queue::{simulate_buffers, QueueConfig, QueueStats};
use crate::sizing::{buffer_bound, required_buffer_from_sim, BufferSearch, SizingResult};
use crate::solution::CapacitySolution;

#[derive(Debug, Parser)]
#[command(name = "wiretap-outage", version, about = "Secrecy outage capacity and key-buffer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve full- and main-CSI capacities over a power grid.
    Capacity(CommonArgs),
    /// Dump the optimal power policy.
    Policy(CommonArgs),
    /// Simulate the key buffer over a rate and buffer-size grid.
    Simulate(CommonArgs),
    /// Compare the analytic buffer bound with simulated requirements.
    Sizing(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(Error),
    #[error("simulation infeasible: {0}")]
    Simulation(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidDistribution(_) | Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            Error::InvalidConfig(_) | Error::Unreachable { .. } => CliError::Simulation(e),
            other => CliError::Solver(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `std::env::args`, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let (Command::Capacity(args) | Command::Policy(args) | Command::Simulate(args) | Command::Sizing(args)) = &cli.command;
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let dist = config.distribution()?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out.display())))?;
    write(&args.out.join("effective_config.json"), &config.to_json())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Capacity(_) => cmd_capacity(&config, &dist, &args.out),
        Command::Policy(_) => cmd_policy(&config, &dist, &args.out),
        Command::Simulate(_) => cmd_simulate(&config, &dist, &args.out),
        Command::Sizing(_) => cmd_sizing(&config, &dist, &args.out),
    })
}

/// Fixed 17-significant-digit float formatting for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    write(path, &s)
}

// ---------------------------------------------------------------------------
// capacity

struct CapacityRow {
    p_avg: f64,
    full: Option<CapacitySolution>,
    main: Option<CapacitySolution>,
    limit: f64,
}

pub fn cmd_capacity(config: &RunConfig, dist: &FadingDistribution, out: &Path) -> CliResult<()> {
    let eps = config.eps;
    let block = &config.capacity;
    let limit = full_csi::high_power_limit(dist, eps)?;
    let rows: Vec<CapacityRow> = config
        .p_avg_values()
        .into_par_iter()
        .map(|p_avg| -> CliResult<CapacityRow> {
            let full = block.full.then(|| full_csi::solve_capacity(dist, p_avg, eps)).transpose()?;
            let main = block.main.then(|| main_csi::solve_capacity_main(dist, p_avg, eps)).transpose()?;
            Ok(CapacityRow { p_avg, full, main, limit })
        })
        .collect::<CliResult<_>>()?;
    let mut table = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if let Some(s) = &r.full {
            write(&out.join(format!("solution_full_{i}.json")), &(s.to_json() + "\n"))?;
        }
        if let Some(s) = &r.main {
            write(&out.join(format!("solution_main_{i}.json")), &(s.to_json() + "\n"))?;
        }
        table.push(vec![
            fmt_f64(r.p_avg),
            fmt_opt(r.full.as_ref().map(|s| s.capacity)),
            fmt_opt(r.main.as_ref().map(|s| s.capacity)),
            fmt_f64(r.limit),
        ]);
        println!(
            "p_avg={} C_full={} C_main={}",
            r.p_avg,
            r.full.as_ref().map_or("-".into(), |s| format!("{:.6}", s.capacity)),
            r.main.as_ref().map_or("-".into(), |s| format!("{:.6}", s.capacity)),
        );
    }
    write_csv(&out.join("capacity.csv"), &["p_avg", "C_full", "C_main", "high_power_limit"], &table)?;
    if block.no_power_control {
        let reports = config
            .p_avg_values()
            .into_iter()
            .map(|p| constant_power_rate(dist, p, eps))
            .collect::<crate::error::Result<Vec<_>>>()?;
        for r in &reports {
            println!(
                "constant power {}: E[R_s]={} C={}{}",
                r.power,
                r.expected_rs,
                r.capacity,
                if r.feasible { "" } else { " (channel outage exceeds eps)" }
            );
        }
        write_json(&out.join("constant_power.json"), &reports)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// policy

enum Solved {
    Full(FullCsiPolicy),
    Main(MainCsiPolicy),
}

fn solve_policy(config: &RunConfig, dist: &FadingDistribution, csi: Csi, p_avg: f64) -> CliResult<(Solved, Option<CapacitySolution>)> {
    let eps = config.eps;
    Ok(match (csi, config.policy.target) {
        (Csi::Full, PolicyTarget::Named(NamedTarget::AtCapacity)) => {
            let s = full_csi::solve_capacity(dist, p_avg, eps)?;
            (Solved::Full(full_csi::policy_at(dist, &s)?), Some(s))
        }
        (Csi::Main, PolicyTarget::Named(NamedTarget::AtCapacity)) => {
            let s = main_csi::solve_capacity_main(dist, p_avg, eps)?;
            (Solved::Main(main_csi::main_policy_at(dist, &s)?), Some(s))
        }
        (Csi::Full, PolicyTarget::Rate(r)) => (Solved::Full(full_csi::solve_subproblem(dist, p_avg, eps, r)?), None),
        (Csi::Main, PolicyTarget::Rate(r)) => (Solved::Main(main_csi::solve_subproblem_main(dist, p_avg, eps, r)?), None),
    })
}

fn policy_dump(config: &RunConfig, dist: &FadingDistribution, csi: Csi) -> CliResult<Value> {
    let (solved, capacity) = solve_policy(config, dist, csi, config.p_avg)?;
    let n = config.policy.grid_points;
    let policy: &dyn PowerPolicy = match &solved {
        Solved::Full(p) => p,
        Solved::Main(p) => p,
    };
    let moments = policy.moments(dist)?;
    let mut v = json!({
        "csi": csi,
        "target_rate": policy.target_rate(),
        "p_avg": config.p_avg,
        "eps": config.eps,
        "r_max": full_csi::r_max(dist, config.p_avg, config.eps)?,
        "moments": moments,
    });
    if let Some(s) = capacity {
        v["capacity"] = json!(s.capacity);
    }
    match (&solved, dist) {
        (Solved::Full(p), _) => {
            v["lambda"] = json!(p.lambda);
            v["k"] = json!(p.k);
        }
        (Solved::Main(p), _) => {
            v["lambda"] = json!(p.lambda);
            v["threshold_c"] = json!(p.threshold_c);
            v["boundary_fraction"] = json!(p.boundary_fraction);
        }
    }
    match (&solved, dist) {
        (Solved::Full(p), FadingDistribution::Discrete(t)) => v["region_table"] = json!(p.region_table(t)),
        (Solved::Main(p), FadingDistribution::Discrete(t)) => v["region_table"] = json!(p.region_table(t)),
        (Solved::Full(p), FadingDistribution::Continuous(c)) => {
            v["region_boundary"] = json!(p.boundary_samples(c, n));
            let mut grid = Vec::with_capacity(n * n);
            for i in 0..n {
                let h_e = c.upper_e() * (i as f64 + 0.5) / n as f64;
                for j in 0..n {
                    let h_m = c.upper_m() * (j as f64 + 0.5) / n as f64;
                    let b = p.branches(GainPair::new_unchecked(h_m, h_e));
                    let power = b.membership * b.inside + (1.0 - b.membership) * b.outside;
                    grid.push(json!({"h_m": h_m, "h_e": h_e, "membership": b.membership, "power": power}));
                }
            }
            v["power_grid"] = Value::Array(grid);
        }
        (Solved::Main(p), FadingDistribution::Continuous(c)) => {
            let curve: Vec<Value> = (0..n)
                .map(|j| {
                    let h_m = c.upper_m() * (j as f64 + 0.5) / n as f64;
                    json!({"h_m": h_m, "membership": p.membership(h_m), "p_w": p.p_w(h_m), "power": p.power_curve(h_m)})
                })
                .collect();
            v["power_curve"] = Value::Array(curve);
        }
    }
    Ok(v)
}

pub fn cmd_policy(config: &RunConfig, dist: &FadingDistribution, out: &Path) -> CliResult<()> {
    let dumps = config
        .policy
        .csi
        .par_iter()
        .map(|&csi| policy_dump(config, dist, csi))
        .collect::<CliResult<Vec<_>>>()?;
    for d in &dumps {
        println!("{} CSI: target rate {}, lambda {}", d["csi"].as_str().unwrap_or("?"), d["target_rate"], d["lambda"]);
        if let Some(rows) = d["region_table"].as_array() {
            for r in rows {
                println!("  h=[{}, {}] {} power {}", r["h_m"], r["h_e"], r["label"].as_str().unwrap_or(""), r["power"]);
            }
        }
    }
    write_json(&out.join("policy.json"), &json!({ "policies": dumps }))
}

// ---------------------------------------------------------------------------
// simulate

const TRACE_HEADER: [&str; 14] = [
    "M",
    "rate_R",
    "eps",
    "horizon",
    "seed",
    "stream_id",
    "rate_multiplier",
    "loss_ratio",
    "eps_prime",
    "eps_prime_stderr",
    "key_outage_freq",
    "channel_outage_freq",
    "artificial_outage_freq",
    "identity_residual",
];

pub fn cmd_simulate(config: &RunConfig, dist: &FadingDistribution, out: &Path) -> CliResult<()> {
    let sim = &config.simulate;
    let eps = config.eps;
    let cap = full_csi::solve_capacity(dist, config.p_avg, eps)?;
    let c = cap.capacity;
    if !(c > 0.0) {
        return Err(CliError::Simulation(Error::InvalidConfig("capacity is zero; nothing to simulate".into())));
    }
    let policies = sim
        .rate_multipliers
        .par_iter()
        .map(|&m| full_csi::solve_subproblem(dist, config.p_avg, eps, m * c))
        .collect::<crate::error::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..policies.len()).flat_map(|i| (0..sim.traces).map(move |t| (i, t))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, trace)| {
            let mut q = QueueConfig::new(sim.rate_multipliers[i] * c, 0.0, eps, sim.horizon, RandomStream::new(config.seed, trace));
            q.warmup_fraction = sim.warmup_fraction;
            simulate_buffers(&q, &sim.buffer_grid, dist, &policies[i])
        })
        .collect::<crate::error::Result<Vec<Vec<QueueStats>>>>()?;

    let mut trace_rows = Vec::new();
    for (&(i, _), stats) in jobs.iter().zip(&runs) {
        for s in stats {
            trace_rows.push(vec![
                fmt_f64(s.buffer_m),
                fmt_f64(s.rate_r),
                fmt_f64(s.eps),
                s.horizon.to_string(),
                s.seed.to_string(),
                s.stream_id.to_string(),
                fmt_f64(sim.rate_multipliers[i]),
                fmt_f64(s.loss_ratio),
                fmt_f64(s.eps_prime),
                fmt_f64(s.eps_prime_stderr),
                fmt_f64(s.key_outage_freq),
                fmt_f64(s.channel_outage_freq),
                fmt_f64(s.artificial_outage_freq),
                fmt_f64(s.identity_residual),
            ]);
        }
    }
    write_csv(&out.join("traces.csv"), &TRACE_HEADER, &trace_rows)?;

    let traces = sim.traces as usize;
    let mut loss_rows = Vec::new();
    let mut outage_rows = Vec::new();
    for (i, &mult) in sim.rate_multipliers.iter().enumerate() {
        let group = &runs[i * traces..(i + 1) * traces];
        for (j, &m) in sim.buffer_grid.iter().enumerate() {
            let n = traces as f64;
            let loss = group.iter().map(|r| r[j].loss_ratio).sum::<f64>() / n;
            let eps_prime = group.iter().map(|r| r[j].eps_prime).sum::<f64>() / n;
            let stderr = (group.iter().map(|r| r[j].eps_prime_stderr.powi(2)).sum::<f64>() / n / n).sqrt();
            let bound = buffer_bound(c, eps, eps_prime, cap.var_rs).ok().map(|b| b.bound_m);
            loss_rows.push(vec![fmt_f64(mult), fmt_f64(mult * c), fmt_f64(m), fmt_f64(loss)]);
            outage_rows.push(vec![
                fmt_f64(mult),
                fmt_f64(mult * c),
                fmt_f64(m),
                fmt_f64(eps_prime),
                fmt_f64(stderr),
                fmt_opt(bound),
            ]);
        }
    }
    write_csv(&out.join("loss_ratio.csv"), &["rate_multiplier", "rate_R", "M", "loss_ratio"], &loss_rows)?;
    write_csv(
        &out.join("outage.csv"),
        &["rate_multiplier", "rate_R", "M", "eps_prime", "eps_prime_stderr", "bound_M"],
        &outage_rows,
    )?;
    println!("capacity {c}; {} traces written", jobs.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// sizing

pub fn cmd_sizing(config: &RunConfig, dist: &FadingDistribution, out: &Path) -> CliResult<()> {
    let sz = &config.sizing;
    let eps = config.eps;
    let cap = full_csi::solve_capacity(dist, config.p_avg, eps)?;
    let c = cap.capacity;
    let rate = sz.rate_multiplier * c;
    let policy = full_csi::solve_subproblem(dist, config.p_avg, eps, rate)?;
    let var_rs = cap.var_rs;
    let search = BufferSearch {
        horizon: sz.horizon,
        max_buffer: sz.max_buffer,
        grid_points: sz.grid_points,
        rounds: sz.rounds,
    };
    let results = config
        .eps_prime_values()
        .into_par_iter()
        .map(|eps_prime| -> CliResult<SizingResult> {
            let v = var_rs + c * c * eps * (1.0 - eps);
            let bound = match buffer_bound(c, eps, eps_prime, var_rs) {
                Ok(b) => Some(b.bound_m),
                Err(Error::DomainError { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let sim = if sz.bound_only {
                None
            } else {
                match required_buffer_from_sim(dist, &policy, rate, eps, eps_prime, RandomStream::new(config.seed, 0), search) {
                    Ok(r) => Some(r),
                    Err(Error::Unreachable { .. }) => None,
                    Err(e) => return Err(e.into()),
                }
            };
            Ok(SizingResult {
                capacity_c: c,
                eps,
                eps_prime,
                var_rs,
                variance_term_v: v,
                bound_m: bound,
                simulated_m: sim.map(|r| r.buffer_m),
                sim_ci_halfwidth: sim.map(|r| r.ci_halfwidth()),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            println!("eps'={}: bound {:?}, simulated {:?}", r.eps_prime, r.bound_m, r.simulated_m);
            vec![
                fmt_f64(r.eps),
                fmt_f64(r.eps_prime),
                fmt_f64(r.capacity_c),
                fmt_f64(r.var_rs),
                fmt_f64(r.variance_term_v),
                fmt_opt(r.bound_m),
                fmt_opt(r.simulated_m),
                fmt_opt(r.sim_ci_halfwidth),
            ]
        })
        .collect();
    write_csv(
        &out.join("sizing.csv"),
        &["eps", "eps_prime", "C", "var_rs", "V", "bound_M", "simulated_M", "sim_ci_halfwidth"],
        &rows,
    )
}
