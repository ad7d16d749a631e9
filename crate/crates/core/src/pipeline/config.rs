use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bands::ReweightParams;
use crate::ensembles::SvsConfig;
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::market_data::{MarketClock, SyntheticMarketConfig};
use crate::path_forecast::{ExpandingWindowPlan, ForecastConfig};
use crate::strategies::{
    Agent, BandAttitude, Dynamics, Grid, Objective, StrategySpec, ThresholdMethod,
};

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub transactions: Option<PathBuf>,
    pub fundamentals: Option<PathBuf>,
    pub auction_prices: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub historical: bool,
    pub fundamental: bool,
    /// Naive bootstrap draws per origin; 0 disables the naive ensemble.
    pub naive_draws: usize,
    pub svs: SvsConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            historical: true,
            fundamental: true,
            naive_draws: 1000,
            svs: SvsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Ensemble labels to trade on, e.g. "historical_svs".
    pub ensembles: Vec<String>,
    pub strategies: Vec<StrategySpec>,
    /// Replace strategy parameters by the grid-search winners.
    pub use_gridsearch: bool,
    pub write_audit: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            ensembles: vec![
                "historical_svs".into(),
                "fundamental_svs".into(),
                "naive".into(),
            ],
            strategies: default_roster(),
            use_gridsearch: false,
            write_audit: false,
        }
    }
}

/// Both agents, median and both band attitudes, static and both dynamic
/// variants.
pub fn default_roster() -> Vec<StrategySpec> {
    let mut out = Vec::new();
    for agent in [Agent::Seller, Agent::SpreadTrader] {
        for dynamics in [
            Dynamics::Static,
            Dynamics::DynamicKernel,
            Dynamics::DynamicMae,
        ] {
            let with_params = |mut s: StrategySpec| {
                if dynamics == Dynamics::DynamicKernel {
                    s.reweight = Some(ReweightParams::new(0.5, 0.35));
                }
                s.threshold_method = ThresholdMethod::Iqr;
                s
            };
            out.push(with_params(StrategySpec::median(agent, dynamics)));
            for attitude in [BandAttitude::RiskAverse, BandAttitude::RiskSeeking] {
                out.push(with_params(StrategySpec::band(
                    agent, attitude, 0.5, dynamics,
                )));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    MedianTable,
    BandTable,
    Custom(Grid),
}

impl GridChoice {
    pub fn grid(&self) -> Grid {
        match self {
            GridChoice::MedianTable => Grid::median_table(),
            GridChoice::BandTable => Grid::band_table(),
            GridChoice::Custom(g) => g.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTemplate {
    pub spec: StrategySpec,
    pub grid: GridChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchConfig {
    pub ensemble: String,
    /// Calibration days; default the first five test days.
    pub first_day: Option<NaiveDate>,
    pub last_day: Option<NaiveDate>,
    /// Use every n-th delivery of each calibration day.
    pub delivery_stride: usize,
    pub objective: Objective,
    pub templates: Vec<GridTemplate>,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        let kernel = |agent| {
            let mut s = StrategySpec::median(agent, Dynamics::DynamicKernel);
            s.reweight = Some(ReweightParams::new(0.5, 0.35));
            s
        };
        Self {
            ensemble: "historical_svs".into(),
            first_day: None,
            last_day: None,
            delivery_stride: 1,
            objective: Objective::MaximizeSortino,
            templates: vec![
                GridTemplate {
                    spec: kernel(Agent::Seller),
                    grid: GridChoice::MedianTable,
                },
                GridTemplate {
                    spec: kernel(Agent::SpreadTrader),
                    grid: GridChoice::MedianTable,
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Deliveries of the last test day dumped as band plot data.
    pub band_examples: usize,
    pub band_scp: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            band_examples: 4,
            band_scp: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub clock: MarketClock,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub synthetic: SyntheticMarketConfig,
    pub plan: ExpandingWindowPlan,
    #[serde(default)]
    pub features: FeatureSpec,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub ensembles: EnsembleConfig,
    #[serde(default)]
    pub backtest: BacktestConfig,
    #[serde(default)]
    pub gridsearch: GridSearchConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

pub const ENSEMBLE_LABELS: [&str; 5] = [
    "historical",
    "historical_svs",
    "fundamental",
    "fundamental_svs",
    "naive",
];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err("<toml>", e.to_string().trim_end()))
    }

    /// Read a config file; relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data.transactions,
            &mut cfg.data.fundamentals,
            &mut cfg.data.auction_prices,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of everything that influences outputs (the output directory
    /// excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<()> {
        self.plan
            .validate()
            .map_err(|e| config_err("plan", e.to_string()))?;
        self.synthetic
            .validate()
            .map_err(|e| config_err("synthetic", e.to_string()))?;
        if self.data.source == DataSource::Csv {
            for (key, p) in [
                ("data.transactions", &self.data.transactions),
                ("data.fundamentals", &self.data.fundamentals),
                ("data.auction_prices", &self.data.auction_prices),
            ] {
                match p {
                    None if key != "data.auction_prices" => {
                        return Err(config_err(key, "required when data.source = \"csv\""))
                    }
                    Some(p) if !p.exists() => {
                        return Err(config_err(key, format!("{} does not exist", p.display())))
                    }
                    _ => {}
                }
            }
        }
        self.features
            .validate(None)
            .map_err(|e| config_err("features", e.to_string()))?;
        self.forecast
            .validate()
            .map_err(|e| config_err("forecast", e.to_string()))?;
        if self.features.horizon != self.forecast.horizon {
            return Err(config_err(
                "features.horizon",
                format!(
                    "must equal forecast.horizon ({} vs {})",
                    self.features.horizon, self.forecast.horizon
                ),
            ));
        }
        self.ensembles
            .svs
            .validate()
            .map_err(|e| config_err("ensembles.svs", e.to_string()))?;
        let has_scenarios = self.features.scenario_channels().next().is_some();
        if self.ensembles.fundamental && !has_scenarios {
            return Err(config_err(
                "ensembles.fundamental",
                "needs a fundamental_scenario channel in features.channels",
            ));
        }
        let available = self.available_ensembles();
        for (i, label) in self.backtest.ensembles.iter().enumerate() {
            if !available.contains(label.as_str()) {
                return Err(config_err(
                    &format!("backtest.ensembles[{i}]"),
                    format!("`{label}` is not produced; available: {available:?}"),
                ));
            }
        }
        for (i, s) in self.backtest.strategies.iter().enumerate() {
            s.validate()
                .map_err(|e| config_err(&format!("backtest.strategies[{i}]"), e.to_string()))?;
        }
        if !available.contains(self.gridsearch.ensemble.as_str()) {
            return Err(config_err(
                "gridsearch.ensemble",
                format!("`{}` is not produced", self.gridsearch.ensemble),
            ));
        }
        if self.gridsearch.delivery_stride == 0 {
            return Err(config_err("gridsearch.delivery_stride", "must be positive"));
        }
        for (i, t) in self.gridsearch.templates.iter().enumerate() {
            let key = format!("gridsearch.templates[{i}]");
            t.spec
                .validate()
                .map_err(|e| config_err(&key, e.to_string()))?;
            if t.grid.grid().cells(&t.spec).is_empty() {
                return Err(config_err(&key, "empty grid"));
            }
        }
        let (first, last) = self.calibration_days();
        if first > last {
            return Err(config_err(
                "gridsearch.first_day",
                "after gridsearch.last_day",
            ));
        }
        if !(self.report.band_scp > 0.0 && self.report.band_scp < 1.0) {
            return Err(config_err("report.band_scp", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn available_ensembles(&self) -> BTreeSet<&'static str> {
        let mut out = BTreeSet::new();
        if self.ensembles.historical {
            out.insert("historical");
            out.insert("historical_svs");
        }
        if self.ensembles.fundamental {
            out.insert("fundamental");
            out.insert("fundamental_svs");
        }
        if self.ensembles.naive_draws > 0 {
            out.insert("naive");
        }
        out
    }

    pub fn calibration_days(&self) -> (NaiveDate, NaiveDate) {
        let first = self
            .gridsearch
            .first_day
            .unwrap_or(self.plan.first_test_day);
        let last = self
            .gridsearch
            .last_day
            .unwrap_or_else(|| (first + chrono::Duration::days(4)).min(self.plan.last_test_day));
        (first, last)
    }

    /// Synthetic market settings with the run's seed and clock; the seed and
    /// clock fields of the `synthetic` table are ignored.
    pub fn synthetic_market(&self) -> SyntheticMarketConfig {
        SyntheticMarketConfig {
            rng_seed: self.seed,
            clock: self.clock,
            ..self.synthetic.clone()
        }
    }
}
