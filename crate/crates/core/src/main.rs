use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use drcc_core::config::{MomentMode, RunConfig};
use drcc_core::formulations::{build, build_fleet_size, ModelKind};
use drcc_core::harness::{self, PeriodResultFile};
use drcc_core::lp_format::to_lp_string;
use drcc_core::scenario::{write_scenarios_csv, SigmaMode};
use drcc_core::verify::{verify_result, OracleOptions};
use drcc_core::Error;

#[derive(Parser)]
#[command(name = "drcc", version, about = "Chance-constrained HVAC load control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the PV profile and the in-sample and out-of-sample scenarios.
    Simulate(Common),
    /// Solve the day period by period.
    Solve(Common),
    /// Solve the day and evaluate it on the out-of-sample sets.
    Evaluate(Common),
    /// Sweep the risk cost of an adjustable model.
    Sweep(Common),
    /// Solve several in-sample draws and tabulate CPU time and gaps.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Number of in-sample draws.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Re-check a period result against the oracles.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        result: PathBuf,
    },
    /// Write the text export of one period's model.
    ExportModel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        period: usize,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ModelKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-period time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, env = "DRCC_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// Risk cost of the adjustable models.
    #[arg(long)]
    ct: Option<f64>,
    #[arg(long, overrides_with = "no_strengthen")]
    strengthen: bool,
    #[arg(long)]
    no_strengthen: bool,
    /// Use sigma = 1' Sigma 1 and keep the larger adjustable-moment branch.
    #[arg(long)]
    literal_sigma: bool,
    /// Adjustable moment orchestration: exact or bnc.
    #[arg(long)]
    moment_mode: Option<String>,
}

impl Common {
    fn config(&self) -> drcc_core::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(k) = self.kind {
            c.model.kind = k;
        }
        if let Some(s) = self.seed {
            c.scenarios.seed = s;
        }
        if let Some(t) = self.time_limit {
            c.solver.time_limit = Some(t);
        }
        if let Some(o) = &self.out {
            c.out_dir = Some(o.clone());
        }
        let a = &mut c.ambiguity;
        a.alpha = self.alpha.unwrap_or(a.alpha);
        a.delta = self.delta.unwrap_or(a.delta);
        a.gamma1 = self.gamma1.unwrap_or(a.gamma1);
        a.gamma2 = self.gamma2.unwrap_or(a.gamma2);
        a.risk_cost = self.ct.unwrap_or(a.risk_cost);
        if self.strengthen {
            c.model.build.strengthen = true;
        }
        if self.no_strengthen {
            c.model.build.strengthen = false;
        }
        if self.literal_sigma {
            c.scenarios.sigma_mode = SigmaMode::Literal;
            c.model.max_rule = true;
        }
        if let Some(m) = &self.moment_mode {
            c.model.moment_mode = match m.as_str() {
                "exact" => MomentMode::Exact,
                "bnc" => MomentMode::Bnc,
                other => return Err(Error::config("--moment-mode", format!("expected exact or bnc, got {other}"))),
            };
        }
        c.validate()?;
        Ok(c)
    }
}

fn out_dir(c: &RunConfig) -> PathBuf {
    c.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

enum Outcome {
    Ok,
    Failed(String),
}

fn simulate(c: &RunConfig) -> drcc_core::Result<Outcome> {
    let data = harness::prepare_day(c)?;
    let dir = out_dir(c);
    fs::create_dir_all(&dir)?;
    data.profile.write_csv(fs::File::create(dir.join("profile.csv"))?)?;
    write_scenarios_csv(&data.in_sample, fs::File::create(dir.join("scenarios.csv"))?)?;
    for (s, set) in harness::out_of_sample_sets(c, &data.profile)?.iter().enumerate() {
        write_scenarios_csv(set, fs::File::create(dir.join(format!("oos_{s}.csv")))?)?;
    }
    fs::write(dir.join("config.toml"), c.to_toml_string())?;
    println!("wrote {}", dir.display());
    Ok(Outcome::Ok)
}

fn summarize(run: &harness::DayRun) -> Outcome {
    let fallbacks = run.periods.iter().filter(|p| p.fallback).count();
    let hits = run.periods.iter().filter(|p| p.hit_limit()).count();
    println!(
        "{}: {} periods, {fallbacks} infeasible, {hits} at the time limit, {:.2} s total, {} comfort violations",
        run.kind,
        run.periods.len(),
        run.total_cpu(),
        run.comfort_violations()
    );
    if fallbacks > 0 {
        Outcome::Failed(format!("{fallbacks} infeasible periods"))
    } else {
        Outcome::Ok
    }
}

fn solve(c: &RunConfig) -> drcc_core::Result<Outcome> {
    let run = harness::run_sequential(c, c.model.kind)?;
    harness::write_day_outputs(&run, &out_dir(c))?;
    Ok(summarize(&run))
}

fn evaluate(c: &RunConfig) -> drcc_core::Result<Outcome> {
    let data = harness::prepare_day(c)?;
    let run = harness::run_sequential_with(c, &data, c.model.kind)?;
    let dir = out_dir(c);
    harness::write_day_outputs(&run, &dir)?;
    let sets = harness::out_of_sample_sets(c, &data.profile)?;
    let rep = harness::evaluate_out_of_sample(&run, &sets);
    harness::write_oos_csv(&rep, &dir)?;
    let above = rep.p95.iter().filter(|&&p| p >= 1.0 - c.ambiguity.alpha).count();
    println!("p95 >= {} in {above} of {} periods", 1.0 - c.ambiguity.alpha, rep.p95.len());
    Ok(summarize(&run))
}

fn sweep(c: &RunConfig) -> drcc_core::Result<Outcome> {
    let kinds: Vec<ModelKind> = if c.model.kind.is_adjustable() {
        vec![c.model.kind]
    } else {
        vec![ModelKind::AdjMoment, ModelKind::AdjWBigM]
    };
    let periods = c.sweep_periods();
    let mut rows = Vec::new();
    for kind in kinds {
        let (cfg, data, x_prev) = harness::sweep_setup(c, kind)?;
        rows.extend(harness::sweep_risk_cost(&cfg, &data, kind, &c.sweep.costs, &periods, &x_prev)?);
    }
    harness::write_sweep_csv(&rows, &out_dir(c))?;
    let bad = harness::sweep_violations(&rows, harness::SWEEP_TOL);
    for b in &bad {
        println!("violation: {b}");
    }
    println!("{} sweep rows, {} monotonicity violations", rows.len(), bad.len());
    Ok(if bad.is_empty() { Outcome::Ok } else { Outcome::Failed("sweep is not monotone".into()) })
}

fn bench(c: &RunConfig, instances: Option<usize>) -> drcc_core::Result<Outcome> {
    let runs = harness::run_bench(c, &c.bench.kinds, instances.unwrap_or(c.bench.instances))?;
    let rows = harness::bench_report(&runs);
    harness::write_bench_csv(&rows, &out_dir(c))?;
    for r in &rows {
        println!("{} {}: {:.2} s, {} limit hits", r.instance, r.kind, r.total_cpu, r.limit_hits);
    }
    Ok(Outcome::Ok)
}

fn verify(c: &RunConfig, path: &Path) -> drcc_core::Result<Outcome> {
    let text = fs::read_to_string(path)?;
    let file: PeriodResultFile = serde_json::from_str(&text)?;
    if file.fallback {
        return Ok(Outcome::Failed(format!("period {} was infeasible and holds the previous schedule", file.period)));
    }
    let data = harness::prepare_day(c)?;
    if file.period >= data.profile.n_periods() {
        return Err(Error::config("--result", format!("period {} is outside the profile", file.period)));
    }
    let inst = harness::period_instance(c, &data, file.kind, c.ambiguity_for(file.kind), file.period, file.x_prev)?;
    let mut opts = OracleOptions { pv_known: Some(data.profile.total(file.period)), ..OracleOptions::default() };
    opts.alpha_lo_moment = c.model.build.alpha_lo_moment;
    if file.kind == ModelKind::AdjMoment && c.model.moment_mode == MomentMode::Bnc {
        opts.alpha_max_moment = c.model.build.alpha_hi_socp3;
    }
    let v = verify_result(&inst, file.kind, &file.result, &opts)?;
    println!("{}: {}", if v.feasible { "OK" } else { "MISMATCH" }, v.detail);
    Ok(if v.feasible { Outcome::Ok } else { Outcome::Failed(v.detail) })
}

fn export(c: &RunConfig, period: usize) -> drcc_core::Result<Outcome> {
    let data = harness::prepare_day(c)?;
    if period >= data.profile.n_periods() {
        return Err(Error::config("--period", format!("profile has {} periods", data.profile.n_periods())));
    }
    let kind = c.model.kind;
    let model = if kind == ModelKind::FleetSize {
        let amb = c.ambiguity_for(ModelKind::DrccW2);
        let insts = (0..data.profile.n_periods())
            .map(|t| harness::period_instance(c, &data, ModelKind::DrccW2, amb, t, data.x0.clone()))
            .collect::<drcc_core::Result<Vec<_>>>()?;
        build_fleet_size(&insts, &c.model.fleet_size)?
    } else {
        let inst = harness::period_instance(c, &data, kind, c.ambiguity_for(kind), period, data.x0.clone())?;
        build(&inst, kind, &harness::period_options(c, &data, period))?.model
    };
    let text = to_lp_string(&model);
    match &c.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{kind}_period_{period:02}.lp"));
            fs::write(&path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c) | Command::Solve(c) | Command::Evaluate(c) | Command::Sweep(c) => c,
        Command::Bench { common, .. } | Command::Verify { common, .. } | Command::ExportModel { common, .. } => common,
    };
    let cfg = match common.config() {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    info!("kind {} seed {}", cfg.model.kind, cfg.scenarios.seed);
    let res = match &cli.command {
        Command::Simulate(_) => simulate(&cfg),
        Command::Solve(_) => solve(&cfg),
        Command::Evaluate(_) => evaluate(&cfg),
        Command::Sweep(_) => sweep(&cfg),
        Command::Bench { instances, .. } => bench(&cfg, *instances),
        Command::Verify { result, .. } => verify(&cfg, result),
        Command::ExportModel { period, .. } => export(&cfg, *period),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
