//! PV profiles, scenario generation, empirical moments and sorted totals.

use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean PV output per period and panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvProfile {
    pub times: Vec<String>,
    /// `mean_kw[t][i]`: period `t`, panel `i`.
    pub mean_kw: Vec<Vec<f64>>,
}

/// Clock label `HH:MM` for `start_minutes + t * step_minutes`.
pub fn clock_label(start_minutes: u32, step_minutes: u32, t: usize) -> String {
    let m = start_minutes + step_minutes * t as u32;
    format!("{:02}:{:02}", m / 60, m % 60)
}

impl PvProfile {
    /// Half-sine day shape, split evenly over `n_pv` panels.
    pub fn bell(n_periods: usize, n_pv: usize, peak_kw: f64, start_minutes: u32, step_minutes: u32) -> Self {
        let times = (0..n_periods).map(|t| clock_label(start_minutes, step_minutes, t)).collect();
        let mean_kw = (0..n_periods)
            .map(|t| {
                let s = (std::f64::consts::PI * (t as f64 + 1.0) / (n_periods as f64 + 1.0)).sin();
                vec![peak_kw * s / n_pv as f64; n_pv]
            })
            .collect();
        PvProfile { times, mean_kw }
    }

    pub fn n_periods(&self) -> usize {
        self.mean_kw.len()
    }

    pub fn n_panels(&self) -> usize {
        self.mean_kw.first().map_or(0, Vec::len)
    }

    pub fn total(&self, t: usize) -> f64 {
        self.mean_kw[t].iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_kw.is_empty() {
            return Err(Error::InvalidInput("PV profile has no periods".into()));
        }
        let n_pv = self.n_panels();
        for (t, row) in self.mean_kw.iter().enumerate() {
            if row.len() != n_pv || n_pv == 0 {
                return Err(Error::InvalidInput(format!("period {t} has {} panels, expected {n_pv}", row.len())));
            }
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidInput(format!("period {t} has a negative or NaN PV mean")));
            }
        }
        if self.times.len() != self.mean_kw.len() {
            return Err(Error::InvalidInput("profile labels and values differ in length".into()));
        }
        Ok(())
    }

    /// Reads `period,panel,mean_kw` rows. Periods and panels are 0-based
    /// indices and must form a full grid.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            period: usize,
            panel: usize,
            mean_kw: f64,
        }
        let mut rows = Vec::new();
        for r in csv::Reader::from_reader(reader).deserialize() {
            let r: Row = r?;
            rows.push(r);
        }
        let n_p = rows.iter().map(|r| r.period + 1).max().unwrap_or(0);
        let n_pv = rows.iter().map(|r| r.panel + 1).max().unwrap_or(0);
        let mut grid = vec![vec![f64::NAN; n_pv]; n_p];
        for r in rows {
            grid[r.period][r.panel] = r.mean_kw;
        }
        let times = (0..n_p).map(|t| t.to_string()).collect();
        let p = PvProfile { times, mean_kw: grid };
        p.validate()?;
        Ok(p)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["period", "panel", "mean_kw"])?;
        for (t, row) in self.mean_kw.iter().enumerate() {
            for (i, x) in row.iter().enumerate() {
                wr.write_record([t.to_string(), i.to_string(), x.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// `N` PV samples for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub period: usize,
    /// `samples[n][i]`: scenario `n`, panel `i`.
    pub samples: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub totals: Vec<f64>,
}

impl ScenarioSet {
    /// Equally weighted scenarios from per-panel samples.
    pub fn from_samples(period: usize, samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("scenario set needs at least one sample".into()));
        }
        let n = samples.len();
        let totals = samples.iter().map(|s| s.iter().sum()).collect();
        Ok(ScenarioSet { period, samples, probabilities: vec![1.0 / n as f64; n], totals })
    }

    /// One-panel scenarios whose totals are given directly.
    pub fn from_totals(period: usize, totals: &[f64]) -> Result<Self> {
        Self::from_samples(period, totals.iter().map(|&x| vec![x]).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let s: f64 = self.probabilities.iter().sum();
        if (s - 1.0).abs() > 1e-12 || self.probabilities.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidInput(format!("scenario probabilities sum to {s}")));
        }
        if self.probabilities.len() != self.samples.len() || self.totals.len() != self.samples.len() {
            return Err(Error::InvalidInput("scenario arrays differ in length".into()));
        }
        for (s, t) in self.samples.iter().zip(&self.totals) {
            let sum: f64 = s.iter().sum();
            if (sum - t).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::InvalidInput("scenario totals do not match samples".into()));
            }
        }
        Ok(())
    }

    /// `k` distinct samples drawn without replacement, equally weighted.
    pub fn random_subset(&self, k: usize, seed: u64) -> Result<ScenarioSet> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidInput(format!("cannot pick {k} of {} samples", self.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.period as u64);
        let mut idx = index::sample(&mut rng, self.len(), k).into_vec();
        idx.sort_unstable();
        Self::from_samples(self.period, idx.into_iter().map(|i| self.samples[i].clone()).collect())
    }
}

/// Per-period i.i.d. uniform draws on `[mean (1-frac), mean (1+frac)]`.
///
/// Period `t` uses stream `t` of a ChaCha generator keyed by `seed`, so the
/// result does not depend on how periods are scheduled across threads.
pub fn generate_uniform_scenarios(profile: &PvProfile, frac: f64, n: usize, seed: u64) -> Result<Vec<ScenarioSet>> {
    if n == 0 {
        return Err(Error::InvalidInput("number of scenarios must be positive".into()));
    }
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::InvalidInput(format!("half-range fraction {frac} must lie in [0, 1)")));
    }
    profile.validate()?;
    (0..profile.n_periods())
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let means = &profile.mean_kw[t];
            let samples = (0..n)
                .map(|_| {
                    means
                        .iter()
                        .map(|&m| if frac == 0.0 || m == 0.0 { m } else { rng.random_range(m * (1.0 - frac)..=m * (1.0 + frac)) })
                        .collect()
                })
                .collect();
            ScenarioSet::from_samples(t, samples)
        })
        .collect()
}

pub fn write_scenarios_csv<W: Write>(sets: &[ScenarioSet], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["period", "sample", "panel", "kw"])?;
    for s in sets {
        for (n, sample) in s.samples.iter().enumerate() {
            for (i, kw) in sample.iter().enumerate() {
                wr.write_record([s.period.to_string(), n.to_string(), i.to_string(), kw.to_string()])?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads `period,sample,panel,kw` rows into equally weighted sets.
pub fn read_scenarios_csv<R: Read>(reader: R) -> Result<Vec<ScenarioSet>> {
    #[derive(Deserialize)]
    struct Row {
        period: usize,
        sample: usize,
        panel: usize,
        kw: f64,
    }
    let mut grid: Vec<Vec<Vec<f64>>> = Vec::new();
    for r in csv::Reader::from_reader(reader).deserialize() {
        let r: Row = r?;
        if grid.len() <= r.period {
            grid.resize(r.period + 1, Vec::new());
        }
        let per = &mut grid[r.period];
        if per.len() <= r.sample {
            per.resize(r.sample + 1, Vec::new());
        }
        let s = &mut per[r.sample];
        if s.len() <= r.panel {
            s.resize(r.panel + 1, f64::NAN);
        }
        s[r.panel] = r.kw;
    }
    grid.into_iter()
        .enumerate()
        .map(|(t, samples)| {
            if samples.iter().flatten().any(|x| x.is_nan()) {
                return Err(Error::InvalidInput(format!("period {t} has missing sample entries")));
            }
            ScenarioSet::from_samples(t, samples)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// `sigma = sqrt(1' Sigma 1)`.
    #[default]
    StdDev,
    /// `sigma = 1' Sigma 1`, as printed.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mu: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub theta: f64,
    pub sigma: f64,
}

/// Population mean and covariance of the samples.
pub fn empirical_moments(s: &ScenarioSet, mode: SigmaMode) -> MomentSummary {
    let n = s.len() as f64;
    let d = s.n_panels();
    let mut mu = vec![0.0; d];
    for x in &s.samples {
        for (m, v) in mu.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for x in &s.samples {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (x[i] - mu[i]) * (x[j] - mu[j]) / n;
            }
        }
    }
    let var_total: f64 = cov.iter().flatten().sum::<f64>().max(0.0);
    let sigma = match mode {
        SigmaMode::StdDev => var_total.sqrt(),
        SigmaMode::Literal => var_total,
    };
    MomentSummary { theta: mu.iter().sum(), mu, cov, sigma }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedScenarios {
    /// 0-based scenario indices, totals non-increasing.
    pub order: Vec<usize>,
    /// `P^(1) >= ... >= P^(N)`.
    pub sorted_totals: Vec<f64>,
    /// `P^(0)`: fleet load with every unit ON.
    pub p0: f64,
}

impl SortedScenarios {
    pub fn n(&self) -> usize {
        self.sorted_totals.len()
    }

    /// `P^(i)` for `i = 0..=N`.
    pub fn p(&self, i: usize) -> f64 {
        if i == 0 {
            self.p0
        } else {
            self.sorted_totals[i - 1]
        }
    }
}

/// Stable descending sort of the scenario totals.
pub fn sort_totals(s: &ScenarioSet, fleet_max_load: f64) -> SortedScenarios {
    let mut order: Vec<usize> = (0..s.totals.len()).collect();
    order.sort_by(|&a, &b| s.totals[b].total_cmp(&s.totals[a]));
    SortedScenarios { sorted_totals: order.iter().map(|&i| s.totals[i]).collect(), order, p0: fleet_max_load }
}

/// True when the fleet can exceed the smallest sampled PV total.
pub fn capacity_exceeds_min_total(sorted: &SortedScenarios) -> bool {
    sorted.sorted_totals.last().is_some_and(|&last| sorted.p0 > last)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum AmbiguityKind {
    Moment { gamma1: f64, gamma2: f64 },
    Wasserstein { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Risk {
    Fixed { alpha: f64 },
    Adjustable { cost: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub kind: AmbiguityKind,
    pub risk: Risk,
}

impl AmbiguitySpec {
    pub fn moment(gamma1: f64, gamma2: f64, risk: Risk) -> Self {
        AmbiguitySpec { kind: AmbiguityKind::Moment { gamma1, gamma2 }, risk }
    }

    pub fn wasserstein(delta: f64, risk: Risk) -> Self {
        AmbiguitySpec { kind: AmbiguityKind::Wasserstein { delta }, risk }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.risk {
            Risk::Fixed { alpha } => Some(alpha),
            Risk::Adjustable { .. } => None,
        }
    }

    pub fn risk_cost(&self) -> Option<f64> {
        match self.risk {
            Risk::Adjustable { cost } => Some(cost),
            Risk::Fixed { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AmbiguityKind::Moment { gamma1, gamma2 } => {
                if !(gamma1 >= 0.0) || !(gamma2 >= gamma1.max(1.0)) {
                    return Err(Error::InvalidInput(format!(
                        "moment parameters need gamma1 >= 0 and gamma2 >= max(gamma1, 1) (got {gamma1}, {gamma2})"
                    )));
                }
            }
            AmbiguityKind::Wasserstein { delta } => {
                if !(delta > 0.0) {
                    return Err(Error::InvalidInput(format!("Wasserstein radius must be positive (got {delta})")));
                }
            }
        }
        match self.risk {
            Risk::Fixed { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::InvalidInput(format!("risk level must lie in (0, 1) (got {alpha})")))
            }
            Risk::Adjustable { cost } if !(cost > 0.0) => {
                Err(Error::InvalidInput(format!("risk cost must be positive (got {cost})")))
            }
            _ => Ok(()),
        }
    }
}
