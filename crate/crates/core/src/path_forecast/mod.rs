//! Multi-step path forecasts from one cSVR per horizon step.
//!
//! Targets are price differences to the origin price, standardized per step.
//! The auxiliary kernel input is the standardized last known price. In chain
//! mode step h also sees the standardized in-sample predictions of steps
//! 1..h-1.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{assemble_raw, FeatureSpec, Origin, ScenarioFill, Standardizer};
use crate::market_data::{MarketData, INTERVAL_MIN, ORIGIN_LEAD_MIN};
use crate::svr::{
    fit_kernel_widths, fit_svr, pairwise_distances, KernelLevels, KernelParams, SvrHyperParams,
    SvrModel,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    MultiOutput,
    Chain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub mode: ForecastMode,
    pub hyper: SvrHyperParams,
    pub levels: KernelLevels,
    /// Pair budget for kernel-width quantiles.
    pub max_width_pairs: usize,
    /// One model per delivery quarter instead of one pooled model.
    pub per_quarter_models: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            horizon: 31,
            mode: ForecastMode::MultiOutput,
            hyper: SvrHyperParams::default(),
            levels: KernelLevels::default(),
            max_width_pairs: 2_000_000,
            per_quarter_models: false,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        self.hyper.validate()?;
        self.levels.validate()
    }
}

/// One training sample: raw features, the origin price and the differenced
/// target path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub origin: Origin,
    pub features: Vec<f64>,
    pub last_price: f64,
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathForecast {
    pub origin: Origin,
    pub values: Vec<f64>,
    pub model_fingerprint: String,
}

/// Fitted per-step models with every transform needed at inference.
///
/// Serialized without the support rows of the step models; they are rebuilt
/// from the training rows on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PathModelWire", try_from = "PathModelWire")]
pub struct PathModel {
    pub mode: ForecastMode,
    pub horizon: usize,
    pub feature_standardizer: Standardizer,
    pub aux_mean: f64,
    pub aux_std: f64,
    pub target_means: Vec<f64>,
    pub target_stds: Vec<f64>,
    /// Standardization of chain augmentation columns (steps 1..H-1).
    pub chain_standardizer: Option<Standardizer>,
    pub models: Vec<SvrModel>,
    pub training_origins: Vec<Origin>,
    /// Raw feature rows of the training samples (scenario substitution source).
    pub training_features: Vec<Vec<f64>>,
    pub training_last_prices: Vec<f64>,
    /// In-sample residual paths y_i - yhat_i, EUR/MWh.
    pub residuals: Vec<Vec<f64>>,
}

#[derive(Clone, Serialize, Deserialize)]
struct StepModelWire {
    dual_coefs: Vec<(f64, f64)>,
    bias: f64,
    kernel: KernelParams,
    converged: bool,
    iterations: u64,
    objective: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct PathModelWire {
    mode: ForecastMode,
    horizon: usize,
    feature_standardizer: Standardizer,
    aux_mean: f64,
    aux_std: f64,
    target_means: Vec<f64>,
    target_stds: Vec<f64>,
    chain_standardizer: Option<Standardizer>,
    models: Vec<StepModelWire>,
    training_origins: Vec<Origin>,
    training_features: Vec<Vec<f64>>,
    training_last_prices: Vec<f64>,
    residuals: Vec<Vec<f64>>,
}

impl From<PathModel> for PathModelWire {
    fn from(m: PathModel) -> Self {
        Self {
            mode: m.mode,
            horizon: m.horizon,
            feature_standardizer: m.feature_standardizer,
            aux_mean: m.aux_mean,
            aux_std: m.aux_std,
            target_means: m.target_means,
            target_stds: m.target_stds,
            chain_standardizer: m.chain_standardizer,
            models: m
                .models
                .into_iter()
                .map(|s| StepModelWire {
                    dual_coefs: s.dual_coefs,
                    bias: s.bias,
                    kernel: s.kernel,
                    converged: s.converged,
                    iterations: s.iterations,
                    objective: s.objective,
                })
                .collect(),
            training_origins: m.training_origins,
            training_features: m.training_features,
            training_last_prices: m.training_last_prices,
            residuals: m.residuals,
        }
    }
}

impl TryFrom<PathModelWire> for PathModel {
    type Error = Error;

    fn try_from(w: PathModelWire) -> Result<Self> {
        let n = w.training_features.len();
        if w.training_last_prices.len() != n || w.models.iter().any(|m| m.dual_coefs.len() != n) {
            return Err(Error::Artifact(
                "model rows and dual coefficients disagree".into(),
            ));
        }
        let mut rows: Vec<Vec<f64>> = w
            .training_features
            .iter()
            .map(|r| w.feature_standardizer.apply(r))
            .collect::<Result<_>>()?;
        let aux: Vec<f64> = w
            .training_last_prices
            .iter()
            .map(|p| (p - w.aux_mean) / w.aux_std)
            .collect();
        let chain = match (w.mode, &w.chain_standardizer) {
            (ForecastMode::Chain, Some(cs)) => Some(cs),
            (ForecastMode::Chain, None) => {
                return Err(Error::MissingTransform("chain standardization"))
            }
            _ => None,
        };
        let mut models: Vec<SvrModel> = Vec::with_capacity(w.models.len());
        for (h, s) in w.models.into_iter().enumerate() {
            if let (Some(cs), Some(prev)) = (chain, models.last()) {
                for (row, a) in rows.iter_mut().zip(&aux) {
                    let f = prev.predict(row, *a)?;
                    row.push((f - cs.means[h - 1]) / cs.stds[h - 1]);
                }
            }
            let solution = crate::svr::DualSolution {
                alpha: s.dual_coefs.iter().map(|c| c.0).collect(),
                alpha_star: s.dual_coefs.iter().map(|c| c.1).collect(),
                bias: s.bias,
                objective: s.objective,
                converged: s.converged,
                iterations: s.iterations,
            };
            models.push(SvrModel::from_solution(solution, &rows, &aux, s.kernel));
        }
        Ok(PathModel {
            mode: w.mode,
            horizon: w.horizon,
            feature_standardizer: w.feature_standardizer,
            aux_mean: w.aux_mean,
            aux_std: w.aux_std,
            target_means: w.target_means,
            target_stds: w.target_stds,
            chain_standardizer: w.chain_standardizer,
            models,
            training_origins: w.training_origins,
            training_features: w.training_features,
            training_last_prices: w.training_last_prices,
            residuals: w.residuals,
        })
    }
}

const MODEL_FORMAT: &str = "intraday-paths/path-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    payload: T,
}

impl PathModel {
    pub fn n_train(&self) -> usize {
        self.training_origins.len()
    }

    pub fn to_cbor(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        ciborium::into_writer(
            &Envelope {
                format: MODEL_FORMAT.to_string(),
                version: MODEL_VERSION,
                payload: self,
            },
            &mut out,
        )
        .map_err(|e| Error::Artifact(e.to_string()))?;
        Ok(out)
    }

    pub fn from_cbor(bytes: &[u8]) -> Result<Self> {
        let env: Envelope<PathModel> =
            ciborium::from_reader(bytes).map_err(|e| Error::Artifact(e.to_string()))?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported model artifact {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.payload)
    }

    pub fn fingerprint(&self) -> String {
        let bytes = self.to_cbor().unwrap_or_default();
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    fn aux_of(&self, last_price: f64) -> f64 {
        (last_price - self.aux_mean) / self.aux_std
    }

    /// Per-step predictions in standardized target space.
    pub fn predict_standardized(&self, raw_features: &[f64], last_price: f64) -> Result<Vec<f64>> {
        let x = self.feature_standardizer.apply(raw_features)?;
        let aux = self.aux_of(last_price);
        let mut z = Vec::with_capacity(self.horizon);
        for (h, model) in self.models.iter().enumerate() {
            let pred = match (&self.mode, &self.chain_standardizer) {
                (ForecastMode::Chain, Some(cs)) if h > 0 => {
                    let mut row = x.clone();
                    for (k, zk) in z.iter().enumerate().take(h) {
                        row.push((zk - cs.means[k]) / cs.stds[k]);
                    }
                    model.predict(&row, aux)?
                }
                _ => model.predict(&x, aux)?,
            };
            z.push(pred);
        }
        Ok(z)
    }

    /// Prices P(m) + mu_h + sigma_h z_h.
    pub fn invert(&self, z: &[f64], last_price: f64) -> Result<Vec<f64>> {
        if z.len() != self.target_means.len() || z.len() != self.target_stds.len() {
            return Err(Error::MissingTransform("target standardization"));
        }
        Ok(z.iter()
            .zip(self.target_means.iter().zip(&self.target_stds))
            .map(|(z, (m, s))| last_price + m + s * z)
            .collect())
    }

    /// Path forecast from raw features.
    pub fn forecast_raw(&self, raw_features: &[f64], last_price: f64) -> Result<Vec<f64>> {
        let z = self.predict_standardized(raw_features, last_price)?;
        self.invert(&z, last_price)
    }
}

fn column_moments(rows: &[Vec<f64>], h: usize) -> (f64, f64) {
    let col: Vec<f64> = rows.iter().map(|r| r[h]).collect();
    let mean = crate::stats::mean(&col);
    let std = crate::stats::std_pop(&col);
    (mean, if std > 0.0 { std } else { 1.0 })
}

fn widths(rows: &[Vec<f64>], aux: &[f64], config: &ForecastConfig) -> Result<KernelParams> {
    let (xd, yd) = pairwise_distances(rows, aux, config.max_width_pairs);
    fit_kernel_widths(&xd, &yd, config.levels).map_err(|e| match e {
        Error::DegenerateDistances(m) => Error::DegenerateTraining(m.to_string()),
        other => other,
    })
}

struct Transforms {
    features: Standardizer,
    aux_mean: f64,
    aux_std: f64,
    target_means: Vec<f64>,
    target_stds: Vec<f64>,
}

/// Standardized design: rows, auxiliary inputs and per-step targets.
struct Design {
    x: Vec<Vec<f64>>,
    aux: Vec<f64>,
    z: Vec<Vec<f64>>,
}

fn prepare(rows: &[TrainingRow], config: &ForecastConfig) -> Result<(Transforms, Design)> {
    config.validate()?;
    if rows.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "{} training rows, need at least 2",
            rows.len()
        )));
    }
    let h = config.horizon;
    if let Some(r) = rows.iter().find(|r| r.targets.len() != h) {
        return Err(Error::DimensionMismatch {
            expected: h,
            found: r.targets.len(),
        });
    }
    let raw: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let fs = Standardizer::fit(&raw)?;
    let x: Vec<Vec<f64>> = raw.iter().map(|r| fs.apply(r)).collect::<Result<_>>()?;
    if x.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateTraining(
            "all training rows identical".into(),
        ));
    }
    let prices: Vec<f64> = rows.iter().map(|r| r.last_price).collect();
    let aux_mean = crate::stats::mean(&prices);
    let aux_std = match crate::stats::std_pop(&prices) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let aux: Vec<f64> = prices.iter().map(|p| (p - aux_mean) / aux_std).collect();
    let targets: Vec<Vec<f64>> = rows.iter().map(|r| r.targets.clone()).collect();
    let (means, stds): (Vec<f64>, Vec<f64>) = (0..h).map(|k| column_moments(&targets, k)).unzip();
    let z: Vec<Vec<f64>> = targets
        .iter()
        .map(|t| (0..h).map(|k| (t[k] - means[k]) / stds[k]).collect())
        .collect();
    Ok((
        Transforms {
            features: fs,
            aux_mean,
            aux_std,
            target_means: means,
            target_stds: stds,
        },
        Design { x, aux, z },
    ))
}

fn finish(
    rows: &[TrainingRow],
    mode: ForecastMode,
    t: Transforms,
    chain_standardizer: Option<Standardizer>,
    models: Vec<SvrModel>,
) -> Result<PathModel> {
    let horizon = models.len();
    let mut model = PathModel {
        mode,
        horizon,
        feature_standardizer: t.features,
        aux_mean: t.aux_mean,
        aux_std: t.aux_std,
        target_means: t.target_means,
        target_stds: t.target_stds,
        chain_standardizer,
        models,
        training_origins: rows.iter().map(|r| r.origin).collect(),
        training_features: rows.iter().map(|r| r.features.clone()).collect(),
        training_last_prices: rows.iter().map(|r| r.last_price).collect(),
        residuals: Vec::new(),
    };
    model.residuals = rows
        .iter()
        .map(|r| {
            let fit = model.forecast_raw(&r.features, r.last_price)?;
            Ok(r.targets
                .iter()
                .zip(&fit)
                .map(|(t, f)| r.last_price + t - f)
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(model)
}

/// Independent SVR per horizon step on a shared feature vector.
pub fn fit_multi_output(rows: &[TrainingRow], config: &ForecastConfig) -> Result<PathModel> {
    let (t, Design { x, aux, z }) = prepare(rows, config)?;
    let kernel = widths(&x, &aux, config)?;
    let models = (0..config.horizon)
        .into_par_iter()
        .map(|h| {
            let y: Vec<f64> = z.iter().map(|r| r[h]).collect();
            fit_svr(&x, &aux, &y, kernel, &config.hyper)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(rows, ForecastMode::MultiOutput, t, None, models)
}

/// Regressor chain: step h appends standardized in-sample predictions of
/// steps 1..h-1.
pub fn fit_chain(rows: &[TrainingRow], config: &ForecastConfig) -> Result<PathModel> {
    let (t, Design { x, aux, z }) = prepare(rows, config)?;
    let n = rows.len();
    let h_max = config.horizon;
    let mut models = Vec::with_capacity(h_max);
    let mut fitted: Vec<Vec<f64>> = vec![Vec::with_capacity(h_max); n];
    let mut cs_means = Vec::new();
    let mut cs_stds = Vec::new();
    let mut aug = x.clone();
    for h in 0..h_max {
        if h > 0 {
            let (m, s) = column_moments(&fitted, h - 1);
            cs_means.push(m);
            cs_stds.push(s);
            for (row, f) in aug.iter_mut().zip(&fitted) {
                row.push((f[h - 1] - m) / s);
            }
        }
        let kernel = widths(&aug, &aux, config)?;
        let y: Vec<f64> = z.iter().map(|r| r[h]).collect();
        let model = fit_svr(&aug, &aux, &y, kernel, &config.hyper)?;
        for (i, f) in fitted.iter_mut().enumerate() {
            f.push(model.predict(&aug[i], aux[i])?);
        }
        models.push(model);
    }
    let cs = Standardizer {
        means: cs_means,
        stds: cs_stds,
    };
    finish(rows, ForecastMode::Chain, t, Some(cs), models)
}

pub fn fit_path_model(rows: &[TrainingRow], config: &ForecastConfig) -> Result<PathModel> {
    match config.mode {
        ForecastMode::MultiOutput => fit_multi_output(rows, config),
        ForecastMode::Chain => fit_chain(rows, config),
    }
}

/// Inverse-transformed path forecast at `origin`.
pub fn forecast_path(
    model: &PathModel,
    spec: &FeatureSpec,
    data: &MarketData,
    origin: Origin,
) -> Result<PathForecast> {
    let raw = assemble_raw(spec, data, origin, ScenarioFill::Zero)?;
    let grid = data
        .grid(origin.delivery)
        .expect("assemble_raw checked the grid");
    let last = grid.prices[origin.index];
    Ok(PathForecast {
        origin,
        values: model.forecast_raw(&raw, last)?,
        model_fingerprint: model.fingerprint(),
    })
}

/// Standard origin of a delivery: the interval ending 185 minutes before
/// delivery start.
pub fn standard_origin(
    data: &MarketData,
    delivery: crate::market_data::DeliveryId,
) -> Option<Origin> {
    data.grid(delivery).map(|g| Origin {
        delivery,
        index: g.origin_index(),
    })
}

/// Minute after which a training row's targets and scenario inputs are all
/// published.
pub fn row_available_minute(spec: &FeatureSpec, origin_minute: i64, horizon: usize) -> i64 {
    let mut t = origin_minute + INTERVAL_MIN * horizon as i64;
    for c in spec.scenario_channels() {
        let g = c.granularity_min;
        let last = g * origin_minute.div_euclid(g) + g * spec.scenario_points(g) as i64;
        t = t.max(last + c.shift_min);
    }
    t
}

/// Training row at the standard origin of `delivery`.
pub fn training_row(
    spec: &FeatureSpec,
    data: &MarketData,
    delivery: crate::market_data::DeliveryId,
    horizon: usize,
) -> Result<TrainingRow> {
    let origin = standard_origin(data, delivery).ok_or_else(|| Error::ChannelUnavailable {
        channel: "grid".into(),
        origin: delivery.to_string(),
        reason: "no VWAP grid".into(),
    })?;
    let grid = data.grid(delivery).expect("origin exists");
    let m = origin.index;
    let path = grid.path_after(m, horizon).ok_or_else(|| {
        Error::ShapeMismatch(format!(
            "grid of {delivery} too short for horizon {horizon}"
        ))
    })?;
    Ok(TrainingRow {
        origin,
        features: assemble_raw(spec, data, origin, ScenarioFill::Realized)?,
        last_price: grid.prices[m],
        targets: path.iter().map(|p| p - grid.prices[m]).collect(),
    })
}

/// Training rows from `train_start` up to the day before `test_day`, keeping
/// only rows fully published before the first origin of `test_day`.
pub fn training_rows_for_day(
    spec: &FeatureSpec,
    data: &MarketData,
    train_start: NaiveDate,
    test_day: NaiveDate,
    horizon: usize,
    quarter: Option<u8>,
) -> Result<Vec<TrainingRow>> {
    let cutoff = data.clock.day_start(test_day) - ORIGIN_LEAD_MIN;
    let mut rows = Vec::new();
    for (&d, g) in data.grids.range(..) {
        if d.day < train_start || d.day >= test_day {
            continue;
        }
        if quarter.is_some_and(|q| q != d.quarter) {
            continue;
        }
        let origin_min = g.origin_minute + (g.origin_index() as i64 + 1) * INTERVAL_MIN;
        if row_available_minute(spec, origin_min, horizon) > cutoff {
            continue;
        }
        rows.push(training_row(spec, data, d, horizon)?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandingWindowPlan {
    pub train_start: NaiveDate,
    pub first_test_day: NaiveDate,
    pub last_test_day: NaiveDate,
}

impl ExpandingWindowPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_start < self.first_test_day && self.first_test_day <= self.last_test_day) {
            return Err(Error::InvalidParameter(
                "plan requires train_start < first_test_day <= last_test_day".into(),
            ));
        }
        Ok(())
    }

    pub fn test_days(&self) -> Vec<NaiveDate> {
        let n = (self.last_test_day - self.first_test_day).num_days();
        (0..=n)
            .map(|i| self.first_test_day + Duration::days(i))
            .collect()
    }
}

/// Models for one test day: pooled or one per delivery quarter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelSet {
    Pooled(PathModel),
    PerQuarter(BTreeMap<u8, PathModel>),
}

impl ModelSet {
    pub fn for_quarter(&self, quarter: u8) -> Option<&PathModel> {
        match self {
            ModelSet::Pooled(m) => Some(m),
            ModelSet::PerQuarter(map) => map.get(&quarter),
        }
    }
}

/// Fit the model set used to forecast `test_day`.
pub fn fit_for_day(
    spec: &FeatureSpec,
    data: &MarketData,
    train_start: NaiveDate,
    test_day: NaiveDate,
    config: &ForecastConfig,
) -> Result<ModelSet> {
    let train_days = data
        .days()
        .into_iter()
        .filter(|d| *d >= train_start && *d < test_day)
        .count();
    if train_days == 0 {
        return Err(Error::InsufficientTraining {
            needed: 1,
            available: 0,
        });
    }
    if config.per_quarter_models {
        let quarters: Vec<u8> = data
            .grids
            .keys()
            .filter(|d| d.day == test_day)
            .map(|d| d.quarter)
            .collect();
        let fitted = quarters
            .par_iter()
            .map(|&q| {
                let rows = training_rows_for_day(
                    spec,
                    data,
                    train_start,
                    test_day,
                    config.horizon,
                    Some(q),
                )?;
                Ok((q, fit_path_model(&rows, config)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSet::PerQuarter(fitted.into_iter().collect()))
    } else {
        let rows = training_rows_for_day(spec, data, train_start, test_day, config.horizon, None)?;
        Ok(ModelSet::Pooled(fit_path_model(&rows, config)?))
    }
}

/// Output of one expanding-window step.
pub struct DayForecasts {
    pub day: NaiveDate,
    pub models: ModelSet,
    pub forecasts: Vec<PathForecast>,
}

/// Walk forward one day at a time: fit on all earlier days, forecast every
/// delivery of the test day at its standard origin and hand the result to
/// `sink`.
pub fn run_expanding_window(
    plan: &ExpandingWindowPlan,
    spec: &FeatureSpec,
    data: &MarketData,
    config: &ForecastConfig,
    mut sink: impl FnMut(DayForecasts) -> Result<()>,
) -> Result<()> {
    plan.validate()?;
    spec.validate(Some(data))?;
    for day in plan.test_days() {
        let models = fit_for_day(spec, data, plan.train_start, day, config)?;
        let deliveries: Vec<_> = data
            .grids
            .keys()
            .filter(|d| d.day == day)
            .copied()
            .collect();
        let forecasts = deliveries
            .par_iter()
            .map(|&d| {
                let model = models
                    .for_quarter(d.quarter)
                    .ok_or(Error::MissingTransform("model for delivery quarter"))?;
                let origin = standard_origin(data, d).expect("delivery has a grid");
                forecast_path(model, spec, data, origin)
            })
            .collect::<Result<Vec<_>>>()?;
        sink(DayForecasts {
            day,
            models,
            forecasts,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Standardizer;

    fn rows(n: usize, h: usize) -> Vec<TrainingRow> {
        let day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                TrainingRow {
                    origin: Origin {
                        delivery: crate::market_data::DeliveryId::new(day, 1 + (i % 96) as u8)
                            .unwrap(),
                        index: i,
                    },
                    features: vec![x, (3.0 * x).sin()],
                    last_price: 40.0 + x,
                    targets: (0..h).map(|k| (k as f64 + 1.0) * x).collect(),
                }
            })
            .collect()
    }

    #[test]
    fn zero_raw_predictions_give_inverse_transform() {
        let model = PathModel {
            mode: ForecastMode::MultiOutput,
            horizon: 2,
            feature_standardizer: Standardizer::identity(1),
            aux_mean: 0.0,
            aux_std: 1.0,
            target_means: vec![0.5, -1.0],
            target_stds: vec![2.0, 3.0],
            chain_standardizer: None,
            models: vec![],
            training_origins: vec![],
            training_features: vec![],
            training_last_prices: vec![],
            residuals: vec![],
        };
        assert_eq!(model.invert(&[0.0, 0.0], 40.0).unwrap(), vec![40.5, 39.0]);
        assert_eq!(model.invert(&[1.0, 2.0], 40.0).unwrap(), vec![42.5, 45.0]);
        assert!(model.invert(&[1.0], 40.0).is_err());
    }

    #[test]
    fn chain_h1_equals_multi_output_h1() {
        let r = rows(20, 1);
        let cfg = ForecastConfig {
            horizon: 1,
            ..Default::default()
        };
        let a = fit_multi_output(&r, &cfg).unwrap();
        let b = fit_chain(&r, &cfg).unwrap();
        let x = [0.3, 0.1];
        assert_eq!(
            a.forecast_raw(&x, 40.2).unwrap(),
            b.forecast_raw(&x, 40.2).unwrap()
        );
    }

    #[test]
    fn constant_targets_predicted() {
        let mut r = rows(15, 2);
        for row in &mut r {
            row.targets = vec![1.5, -2.0];
        }
        let m = fit_multi_output(
            &r,
            &ForecastConfig {
                horizon: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let p = m.forecast_raw(&[0.7, 0.2], 41.0).unwrap();
        assert!((p[0] - 42.5).abs() < 1e-9);
        assert!((p[1] - 39.0).abs() < 1e-9);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let mut r = rows(5, 1);
        for row in &mut r {
            row.features = vec![1.0, 1.0];
            row.last_price = 40.0;
        }
        assert!(matches!(
            fit_multi_output(
                &r,
                &ForecastConfig {
                    horizon: 1,
                    ..Default::default()
                }
            ),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn cbor_round_trip() {
        let m = fit_multi_output(
            &rows(10, 3),
            &ForecastConfig {
                horizon: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let bytes = m.to_cbor().unwrap();
        assert_eq!(PathModel::from_cbor(&bytes).unwrap(), m);
        assert!(PathModel::from_cbor(&bytes[..bytes.len() / 2]).is_err());
        let c = fit_chain(
            &rows(12, 4),
            &ForecastConfig {
                horizon: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(PathModel::from_cbor(&c.to_cbor().unwrap()).unwrap(), c);
    }
}
