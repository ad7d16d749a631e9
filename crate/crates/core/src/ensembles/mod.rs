//! Scenario ensembles around a point path forecast and their reduction by
//! Support Vector Sorting (SVS).

mod svs;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sign_split, ChannelKind, ChannelSpec, FeatureSpec, Origin};
use crate::market_data::{availability_floor, FundamentalSeries};
use crate::path_forecast::{PathForecast, PathModel};
use crate::stats;

pub use svs::{
    select_scenarios_svs, svs_weights, wasserstein1, SvsConfig, SvsPooling, SvsRanking,
    SvsSelection,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Historical,
    Fundamental,
    Naive,
}

impl EnsembleKind {
    pub fn label(self) -> &'static str {
        match self {
            EnsembleKind::Historical => "historical",
            EnsembleKind::Fundamental => "fundamental",
            EnsembleKind::Naive => "naive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEnsemble {
    pub origin: Origin,
    pub kind: EnsembleKind,
    /// n x H prices.
    pub paths: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub provenance: Vec<String>,
}

impl ScenarioEnsemble {
    pub fn uniform(
        origin: Origin,
        kind: EnsembleKind,
        paths: Vec<Vec<f64>>,
        provenance: Vec<String>,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Empty("ensemble"));
        }
        let n = paths.len();
        let e = Self {
            origin,
            kind,
            paths,
            weights: vec![1.0 / n as f64; n],
            provenance,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon();
        if let Some(p) = self.paths.iter().find(|p| p.len() != h) {
            return Err(Error::DimensionMismatch {
                expected: h,
                found: p.len(),
            });
        }
        if self.weights.len() != self.paths.len() || self.provenance.len() != self.paths.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} paths, {} weights, {} provenance labels",
                self.paths.len(),
                self.weights.len(),
                self.provenance.len()
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "ensemble weights must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(())
    }

    /// Values of step `h` across scenarios.
    pub fn step(&self, h: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[h]).collect()
    }
}

/// Point forecast plus each in-sample residual path.
pub fn historical_ensemble(
    point: &PathForecast,
    residuals: &[Vec<f64>],
) -> Result<ScenarioEnsemble> {
    if residuals.is_empty() {
        return Err(Error::Empty("residual set"));
    }
    let h = point.values.len();
    let paths = residuals
        .iter()
        .map(|r| {
            if r.len() != h {
                return Err(Error::DimensionMismatch {
                    expected: h,
                    found: r.len(),
                });
            }
            Ok(point.values.iter().zip(r).map(|(f, e)| f + e).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let provenance = (0..paths.len()).map(|i| format!("train {i}")).collect();
    ScenarioEnsemble::uniform(point.origin, EnsembleKind::Historical, paths, provenance)
}

/// Forecast-error difference scenario of one fundamental variable, derived
/// from one training sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalScenario {
    pub variable: String,
    pub delta_known: f64,
    pub delta_future: Vec<f64>,
    pub delta_fs: Vec<f64>,
    pub sign_split: (Vec<f64>, Vec<f64>),
}

impl FundamentalScenario {
    pub fn new(variable: &str, delta_known: f64, delta_future: Vec<f64>) -> Self {
        let delta_fs: Vec<f64> = delta_future.iter().map(|f| delta_known - f).collect();
        let split = sign_split(&delta_fs);
        Self {
            variable: variable.to_string(),
            delta_known,
            delta_future,
            delta_fs,
            sign_split: split,
        }
    }

    /// Channel entries: positive parts followed by negative parts.
    pub fn channel_values(&self) -> Vec<f64> {
        let mut v = self.sign_split.0.clone();
        v.extend_from_slice(&self.sign_split.1);
        v
    }
}

/// One scenario per training origin: the known error at that origin's
/// availability floor minus the errors over its next `points` native-grid
/// points. Every scenario must be fully published before `forecast_origin`.
pub fn build_fundamental_scenarios(
    series: &FundamentalSeries,
    channel: &ChannelSpec,
    points: usize,
    training_origins: &[i64],
    forecast_origin: i64,
) -> Result<Vec<FundamentalScenario>> {
    let g = channel.granularity_min;
    let gap = |minute| Error::CoverageGap {
        series: series.name.clone(),
        minute,
    };
    training_origins
        .iter()
        .map(|&t| {
            let known_at = availability_floor(t, channel.shift_min, g)?;
            let known = series.error_at(known_at).ok_or_else(|| gap(known_at))?;
            let base = g * t.div_euclid(g);
            let future = (1..=points as i64)
                .map(|k| {
                    let m = base + k * g;
                    if m + channel.shift_min > forecast_origin {
                        return Err(Error::NotYetAvailable {
                            minute: m,
                            shift: channel.shift_min,
                        });
                    }
                    series.error_at(m).ok_or_else(|| gap(m))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FundamentalScenario::new(&series.name, known, future))
        })
        .collect()
}

/// Scenario inputs already stored in a model's training rows.
pub fn training_scenarios(model: &PathModel, spec: &FeatureSpec) -> Vec<Vec<f64>> {
    let slots: Vec<_> = spec
        .layout()
        .into_iter()
        .filter(|s| s.kind == ChannelKind::FundamentalScenario)
        .collect();
    model
        .training_features
        .iter()
        .map(|row| {
            slots
                .iter()
                .flat_map(|s| row[s.start..s.start + s.len].iter().copied())
                .collect()
        })
        .collect()
}

/// One forecast path per scenario, substituting the scenario into the
/// scenario channels of `base_raw`. Each scenario lists its channel values in
/// layout order.
pub fn fundamental_ensemble(
    model: &PathModel,
    spec: &FeatureSpec,
    base_raw: &[f64],
    last_price: f64,
    origin: Origin,
    scenarios: &[Vec<f64>],
) -> Result<ScenarioEnsemble> {
    let slots: Vec<_> = spec
        .layout()
        .into_iter()
        .filter(|s| s.kind == ChannelKind::FundamentalScenario)
        .collect();
    if slots.is_empty() {
        return Err(Error::InvalidParameter(
            "feature spec has no fundamental scenario channel".into(),
        ));
    }
    let width: usize = slots.iter().map(|s| s.len).sum();
    let paths = scenarios
        .iter()
        .map(|sc| {
            if sc.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: sc.len(),
                });
            }
            let mut x = base_raw.to_vec();
            let mut k = 0;
            for s in &slots {
                x[s.start..s.start + s.len].copy_from_slice(&sc[k..k + s.len]);
                k += s.len;
            }
            model.forecast_raw(&x, last_price)
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = (0..paths.len()).map(|i| format!("train {i}")).collect();
    ScenarioEnsemble::uniform(origin, EnsembleKind::Fundamental, paths, provenance)
}

/// Step increments P(m+h) - P(m+h-1) of a differenced target path.
pub fn increments(differenced: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    differenced
        .iter()
        .map(|&d| {
            let inc = d - prev;
            prev = d;
            inc
        })
        .collect()
}

/// Indices of `n_draws` history trajectories drawn with replacement.
pub fn naive_draw_indices(n_history: usize, n_draws: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n_draws)
        .map(|_| rng.random_range(0..n_history))
        .collect()
}

/// Accumulate the drawn increment trajectories onto the last price.
pub fn naive_from_indices(
    history: &[Vec<f64>],
    last_price: f64,
    indices: &[usize],
    origin: Origin,
) -> Result<ScenarioEnsemble> {
    if history.is_empty() {
        return Err(Error::Empty("increment history"));
    }
    if indices.is_empty() {
        return Err(Error::InvalidParameter("n_draws must be positive".into()));
    }
    let mut paths = Vec::with_capacity(indices.len());
    let mut provenance = Vec::with_capacity(indices.len());
    for (k, &i) in indices.iter().enumerate() {
        let inc = history.get(i).ok_or_else(|| {
            Error::IndexMisalignment(format!(
                "draw {k} points at history {i} of {}",
                history.len()
            ))
        })?;
        let mut level = last_price;
        paths.push(
            inc.iter()
                .map(|d| {
                    level += d;
                    level
                })
                .collect(),
        );
        provenance.push(format!("naive draw {k} (train {i})"));
    }
    ScenarioEnsemble::uniform(origin, EnsembleKind::Naive, paths, provenance)
}

/// Resample whole increment trajectories with replacement and accumulate
/// them onto the last price.
pub fn naive_ensemble(
    history: &[Vec<f64>],
    last_price: f64,
    n_draws: usize,
    origin: Origin,
    rng: &mut impl Rng,
) -> Result<ScenarioEnsemble> {
    if history.is_empty() {
        return Err(Error::Empty("increment history"));
    }
    let indices = naive_draw_indices(history.len(), n_draws, rng);
    naive_from_indices(history, last_price, &indices, origin)
}

/// Per-step weighted lower median.
pub fn empirical_median_path(ensemble: &ScenarioEnsemble) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    Ok((0..ensemble.horizon())
        .map(|h| stats::weighted_lower_median(&ensemble.step(h), &ensemble.weights))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::DeliveryId;
    use chrono::NaiveDate;

    fn origin() -> Origin {
        Origin {
            delivery: DeliveryId::new(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 1).unwrap(),
            index: 57,
        }
    }

    fn point(values: Vec<f64>) -> PathForecast {
        PathForecast {
            origin: origin(),
            values,
            model_fingerprint: String::new(),
        }
    }

    #[test]
    fn historical_examples() {
        let e =
            historical_ensemble(&point(vec![1.0, 2.0]), &[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(e.paths.iter().all(|p| p == &vec![1.0, 2.0]));
        let e = historical_ensemble(&point(vec![1.0, 2.0]), &[vec![0.5, -1.0]]).unwrap();
        assert_eq!(e.paths, vec![vec![1.5, 1.0]]);
        assert!(historical_ensemble(&point(vec![1.0]), &[]).is_err());
    }

    #[test]
    fn fundamental_scenario_arithmetic() {
        let s = FundamentalScenario::new("load", 2.0, vec![-1.0, 6.0]);
        assert_eq!(s.delta_fs, vec![3.0, -4.0]);
        assert_eq!(s.sign_split, (vec![3.0, 0.0], vec![0.0, -4.0]));
        assert_eq!(s.channel_values(), vec![3.0, 0.0, 0.0, -4.0]);
    }

    #[test]
    fn naive_examples() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let e = naive_ensemble(&[vec![1.0; 4]], 10.0, 5, origin(), &mut rng).unwrap();
        assert!(e.paths.iter().all(|p| p == &vec![11.0, 12.0, 13.0, 14.0]));
        let e =
            naive_ensemble(&[vec![0.0; 3], vec![0.0; 3]], 7.0, 1000, origin(), &mut rng).unwrap();
        assert_eq!(e.len(), 1000);
        assert!(e.paths.iter().all(|p| p.iter().all(|v| *v == 7.0)));
    }

    #[test]
    fn increments_of_differenced_path() {
        assert_eq!(increments(&[1.0, 3.0, 2.0]), vec![1.0, 2.0, -1.0]);
    }

    #[test]
    fn median_conventions() {
        let mut e = ScenarioEnsemble::uniform(
            origin(),
            EnsembleKind::Naive,
            vec![vec![0.0], vec![10.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(empirical_median_path(&e).unwrap(), vec![0.0]);
        e.weights = vec![0.9, 0.1];
        assert_eq!(empirical_median_path(&e).unwrap(), vec![0.0]);
    }
}
