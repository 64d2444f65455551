//! TOML run configuration. Every default is the desk-scale experiment, so an
//! empty file (or no file) reproduces it.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::{BuildOptions, FleetSizeOptions, ModelKind};
use crate::scenario::{AmbiguitySpec, PvProfile, Risk, SigmaMode};
use crate::solver::SolverParams;
use crate::thermal::{discretize_rc, BuildingParams, ContinuousRc, FleetModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    pub n_buildings: usize,
    pub power_kw: f64,
    pub a: f64,
    pub b: f64,
    pub g: Vec<f64>,
    /// `(Q_out, T_out)` paired with `g`.
    pub v: Vec<f64>,
    /// When set, replaces `a`, `b`, `g`, `v` by the discretized RC model.
    pub rc: Option<ContinuousRc>,
    pub dt_seconds: f64,
    pub x_ref: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub c_sys: f64,
    pub c_switch: f64,
    pub c_pv: f64,
    /// Initial temperatures are drawn uniformly from this range.
    pub x0_range: [f64; 2],
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            n_buildings: 100,
            power_kw: 3.5,
            a: 0.9914,
            b: -0.6767,
            g: vec![4.3e-5, 0.0086],
            v: vec![5200.0, 32.0],
            rc: None,
            dt_seconds: 600.0,
            x_ref: 23.0,
            x_min: 21.5,
            x_max: 24.5,
            c_sys: 1.0,
            c_switch: 1.0,
            c_pv: 1.0,
            x0_range: [23.10, 23.15],
        }
    }
}

impl FleetConfig {
    pub fn building(&self) -> Result<BuildingParams> {
        match &self.rc {
            Some(rc) => discretize_rc(rc, self.dt_seconds, self.power_kw),
            None => BuildingParams::given(self.a, self.b, self.g.clone(), self.v.clone(), self.power_kw),
        }
        .map_err(|e| Error::config("fleet", e.to_string()))
    }

    pub fn fleet(&self) -> Result<FleetModel> {
        let mut f = FleetModel::homogeneous(self.n_buildings, self.building()?);
        f.x_ref = self.x_ref;
        f.x_min = self.x_min;
        f.x_max = self.x_max;
        f.c_sys = self.c_sys;
        f.c_switch = self.c_switch;
        f.c_pv = self.c_pv;
        f.dt = self.dt_seconds;
        f.validate().map_err(|e| Error::config("fleet", e.to_string()))?;
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// CSV with `period,panel,mean_kw`; the synthetic profile is used when unset.
    pub path: Option<PathBuf>,
    pub n_periods: usize,
    pub n_panels: usize,
    pub peak_kw: f64,
    /// Minutes after midnight of the first period (8:20).
    pub start_minutes: u32,
    pub step_minutes: u32,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { path: None, n_periods: 53, n_panels: 1, peak_kw: 160.0, start_minutes: 500, step_minutes: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// In-sample size `N`.
    pub n_samples: usize,
    /// Half-range of the uniform draws as a fraction of the mean.
    pub frac: f64,
    /// Master seed; every other stream derives from it.
    pub seed: u64,
    /// Externally supplied in-sample CSV (`period,sample,panel,kw`).
    pub samples_path: Option<PathBuf>,
    /// Samples used for the moment estimate.
    pub moment_samples: usize,
    pub sigma_mode: SigmaMode,
    pub oos_sets: usize,
    pub oos_size: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_samples: 100,
            frac: 0.15,
            seed: 2024,
            samples_path: None,
            moment_samples: 10,
            sigma_mode: SigmaMode::StdDev,
            oos_sets: 10,
            oos_size: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmbiguityConfig {
    pub alpha: f64,
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Risk cost `c_t` of the adjustable models.
    pub risk_cost: f64,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig { alpha: 0.2, delta: 0.02, gamma1: 0.0, gamma2: 1.0, risk_cost: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMode {
    /// SOCP1 and SOCP2 solved outright.
    Exact,
    /// SOCP2 plus the SOCP3 tangent-cut branch-and-cut.
    #[default]
    Bnc,
}

/// Solution route of the adjustable Wasserstein kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjWMethod {
    /// The MILP of the requested kind.
    #[default]
    Milp,
    /// One thermal MILP per fleet load level with the closed-form smallest
    /// `alpha`; needs equal unit powers, falls back to the MILP otherwise.
    LoadScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub build: BuildOptions,
    pub moment_mode: MomentMode,
    /// Keep the branch with the larger optimum, as printed.
    pub max_rule: bool,
    pub adj_w_method: AdjWMethod,
    pub fleet_size: FleetSizeOptions,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::DrccW2,
            build: BuildOptions::default(),
            moment_mode: MomentMode::Bnc,
            max_rule: false,
            adj_w_method: AdjWMethod::Milp,
            fleet_size: FleetSizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub costs: Vec<f64>,
    /// Period indices; hourly 9:30 to 14:30 when empty.
    pub periods: Vec<usize>,
    /// In-sample size for the adjustable Wasserstein sweep.
    pub wasserstein_samples: usize,
    pub adj_w_method: AdjWMethod,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { costs: vec![10.0, 12.0, 14.0, 16.0, 18.0, 20.0], periods: Vec::new(),
            wasserstein_samples: 10,
            adj_w_method: AdjWMethod::LoadScan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub instances: usize,
    pub kinds: Vec<ModelKind>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { instances: 10, kinds: vec![ModelKind::DrccW1, ModelKind::DrccW2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub fleet: FleetConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub scenarios: ScenarioConfig,
    #[serde(default)]
    pub ambiguity: AmbiguityConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_solver")]
    pub solver: SolverParams,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_solver() -> SolverParams {
    SolverParams { time_limit: Some(100.0), ..SolverParams::default() }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fleet: FleetConfig::default(),
            profile: ProfileConfig::default(),
            scenarios: ScenarioConfig::default(),
            ambiguity: AmbiguityConfig::default(),
            model: ModelConfig::default(),
            solver: default_solver(),
            sweep: SweepConfig::default(),
            bench: BenchConfig::default(),
            out_dir: None,
        }
    }
}

/// Seed streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    InSample,
    MomentSubset,
    InitialTemps,
    OutOfSample(usize),
    Bench(usize),
}

impl SeedStream {
    fn tag(self) -> u64 {
        match self {
            SeedStream::InSample => 1,
            SeedStream::MomentSubset => 2,
            SeedStream::InitialTemps => 3,
            SeedStream::OutOfSample(s) => 1000 + s as u64,
            SeedStream::Bench(i) => 100_000 + i as u64,
        }
    }
}

pub fn derive_seed(master: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream.tag());
    rng.random()
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| text[s].lines().next().unwrap_or("").trim().to_string()).unwrap_or_default();
            Error::config(if key.is_empty() { "<root>".to_string() } else { key }, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.fleet.fleet()?;
        let [lo, hi] = self.fleet.x0_range;
        if !(lo <= hi && lo >= self.fleet.x_min && hi <= self.fleet.x_max) {
            return Err(Error::config("fleet.x0_range", "must be an ordered range inside the comfort band"));
        }
        let p = &self.profile;
        if p.path.is_none() {
            if p.n_periods == 0 {
                return Err(Error::config("profile.n_periods", "must be positive"));
            }
            if p.n_panels == 0 {
                return Err(Error::config("profile.n_panels", "must be positive"));
            }
            if !(p.peak_kw >= 0.0) {
                return Err(Error::config("profile.peak_kw", "must be nonnegative"));
            }
        }
        let s = &self.scenarios;
        if s.n_samples == 0 {
            return Err(Error::config("scenarios.n_samples", "must be positive"));
        }
        if !(0.0..1.0).contains(&s.frac) {
            return Err(Error::config("scenarios.frac", "must lie in [0, 1)"));
        }
        if s.moment_samples == 0 || (s.samples_path.is_none() && s.moment_samples > s.n_samples) {
            return Err(Error::config("scenarios.moment_samples", "must lie in 1..=n_samples"));
        }
        if s.oos_sets == 0 || s.oos_size == 0 {
            return Err(Error::config("scenarios.oos_sets", "out-of-sample sets and sizes must be positive"));
        }
        let a = &self.ambiguity;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(Error::config("ambiguity.alpha", "must lie in (0, 1)"));
        }
        if !(a.delta > 0.0) {
            return Err(Error::config("ambiguity.delta", "must be positive"));
        }
        if !(a.gamma1 >= 0.0 && a.gamma2 >= a.gamma1.max(1.0)) {
            return Err(Error::config("ambiguity.gamma2", "need gamma1 >= 0 and gamma2 >= max(gamma1, 1)"));
        }
        if !(a.risk_cost >= 0.0) {
            return Err(Error::config("ambiguity.risk_cost", "must be nonnegative"));
        }
        let b = &self.model.build;
        if !(b.alpha_lo_moment > 0.0 && b.alpha_lo_moment < b.alpha_hi_socp3 && b.alpha_hi_socp3 <= 0.75) {
            return Err(Error::config("model.build.alpha_lo_moment", "need 0 < alpha_lo < alpha_hi <= 0.75"));
        }
        self.solver.validate()?;
        if self.sweep.costs.is_empty() || self.sweep.costs.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::config("sweep.costs", "need at least one nonnegative cost"));
        }
        if self.sweep.wasserstein_samples == 0 {
            return Err(Error::config("sweep.wasserstein_samples", "must be positive"));
        }
        Ok(())
    }

    /// Ambiguity set and risk treatment of `kind`.
    pub fn ambiguity_for(&self, kind: ModelKind) -> AmbiguitySpec {
        self.ambiguity_with_cost(kind, self.ambiguity.risk_cost)
    }

    pub fn ambiguity_with_cost(&self, kind: ModelKind, cost: f64) -> AmbiguitySpec {
        let a = &self.ambiguity;
        let risk = if kind.is_adjustable() { Risk::Adjustable { cost } } else { Risk::Fixed { alpha: a.alpha } };
        if kind.uses_moments() {
            AmbiguitySpec::moment(a.gamma1, a.gamma2, risk)
        } else {
            AmbiguitySpec::wasserstein(a.delta, risk)
        }
    }

    pub fn profile(&self) -> Result<PvProfile> {
        let p = &self.profile;
        match &p.path {
            Some(path) => {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::config("profile.path", format!("{}: {e}", path.display())))?;
                PvProfile::from_csv(f).map_err(|e| Error::config("profile.path", e.to_string()))
            }
            None => Ok(PvProfile::bell(p.n_periods, p.n_panels, p.peak_kw, p.start_minutes, p.step_minutes)),
        }
    }

    pub fn seed(&self, stream: SeedStream) -> u64 {
        derive_seed(self.scenarios.seed, stream)
    }

    /// Period indices of the sweep: the configured list, or every full hour
    /// plus 30 minutes from 9:30 to 14:30 that the profile covers.
    pub fn sweep_periods(&self) -> Vec<usize> {
        if !self.sweep.periods.is_empty() {
            return self.sweep.periods.clone();
        }
        let p = &self.profile;
        (0..p.n_periods)
            .filter(|&t| {
                let m = p.start_minutes + p.step_minutes * t as u32;
                (570..=870).contains(&m) && m % 60 == 30
            })
            .collect()
    }
}
