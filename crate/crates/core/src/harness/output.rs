use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchRow, DayRun, EvalReport, SweepRow};
use crate::error::Result;
use crate::formulations::ModelKind;
use crate::solver::SolveResult;

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<File>> {
    fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_writer(File::create(dir.join(name))?))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| x.to_string())
}

pub fn write_schedule_csv(run: &DayRun, dir: &Path) -> Result<()> {
    let mut w = writer(dir, "schedule.csv")?;
    w.write_record(["period", "unit", "on"])?;
    for p in &run.periods {
        for (l, u) in p.schedule.iter().enumerate() {
            w.write_record([p.period.to_string(), l.to_string(), u.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_temps_csv(run: &DayRun, dir: &Path) -> Result<()> {
    let mut w = writer(dir, "temps.csv")?;
    w.write_record(["period", "unit", "temp_c"])?;
    for p in &run.periods {
        for (l, x) in p.temps.iter().enumerate() {
            w.write_record([p.period.to_string(), l.to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_loads_csv(run: &DayRun, dir: &Path) -> Result<()> {
    let mut w = writer(dir, "loads.csv")?;
    w.write_record(["period", "fleet_kw", "mean_pv_kw"])?;
    for p in &run.periods {
        w.write_record([p.period.to_string(), p.load_kw.to_string(), p.mean_pv_kw.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oos_csv(report: &EvalReport, dir: &Path) -> Result<()> {
    let mut w = writer(dir, "oos.csv")?;
    w.write_record(["period", "set", "probability", "p95"])?;
    for (t, ps) in report.probabilities.iter().enumerate() {
        for (s, p) in ps.iter().enumerate() {
            w.write_record([t.to_string(), s.to_string(), p.to_string(), report.p95[t].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(rows: &[SweepRow], dir: &Path) -> Result<()> {
    let mut w = writer(dir, "sweep.csv")?;
    w.write_record(["kind", "period", "time", "cost", "status", "alpha", "one_minus_alpha", "objective"])?;
    for r in rows {
        w.write_record([
            r.kind.to_string(),
            r.period.to_string(),
            r.label.clone(),
            r.cost.to_string(),
            format!("{:?}", r.status),
            opt(r.alpha),
            opt(r.alpha.map(|a| 1.0 - a)),
            opt(r.objective),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_csv(rows: &[BenchRow], dir: &Path) -> Result<()> {
    let mut w = writer(dir, "bench.csv")?;
    w.write_record(["instance", "kind", "total_cpu_s", "limit_hits", "mean_gap_pct", "infeasible_periods"])?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.kind.to_string(),
            format!("{:.3}", r.total_cpu),
            r.limit_hits.to_string(),
            opt(r.mean_gap.map(|g| 100.0 * g)),
            r.infeasible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything `verify` needs to rebuild and re-check one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodResultFile {
    pub kind: ModelKind,
    pub period: usize,
    pub time: String,
    pub x_prev: Vec<f64>,
    pub fallback: bool,
    pub result: SolveResult,
}

/// `results/period_XX.json` for each period, and `result.json` holding the
/// last one.
pub fn write_period_results(run: &DayRun, dir: &Path) -> Result<()> {
    let sub = dir.join("results");
    fs::create_dir_all(&sub)?;
    for p in &run.periods {
        let file = PeriodResultFile {
            kind: run.kind,
            period: p.period,
            time: p.label.clone(),
            x_prev: p.x_prev.clone(),
            fallback: p.fallback,
            result: p.result.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(sub.join(format!("period_{:02}.json", p.period)), &text)?;
        if p.period + 1 == run.periods.len() {
            fs::write(dir.join("result.json"), &text)?;
        }
    }
    Ok(())
}

/// Schedule, temperature, load and per-period result files plus the
/// config snapshot.
pub fn write_day_outputs(run: &DayRun, dir: &Path) -> Result<()> {
    write_schedule_csv(run, dir)?;
    write_temps_csv(run, dir)?;
    write_loads_csv(run, dir)?;
    write_period_results(run, dir)?;
    fs::write(dir.join("config.toml"), run.config.to_toml_string())?;
    Ok(())
}
