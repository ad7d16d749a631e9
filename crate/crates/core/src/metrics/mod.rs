//! Forecast accuracy and trading performance measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensembles::ScenarioEnsemble;
use crate::error::{Error, Result};
use crate::stats;

/// Quantile levels 0.01, 0.02, ..., 0.99.
pub fn quantile_levels() -> Vec<f64> {
    (1..=99).map(|k| k as f64 / 100.0).collect()
}

pub fn pinball(realized: f64, quantile: f64, level: f64) -> f64 {
    if realized < quantile {
        (1.0 - level) * (quantile - realized)
    } else {
        level * (realized - quantile)
    }
}

fn check_shape(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} paths",
            a.len(),
            b.len()
        )));
    }
    let mut cells = 0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "path {i}: {} vs {} steps",
                x.len(),
                y.len()
            )));
        }
        cells += x.len();
    }
    if cells == 0 {
        return Err(Error::Empty("evaluation grid"));
    }
    Ok(cells)
}

/// Mean absolute error over every (path, step) cell.
pub fn mae_paths(realized: &[Vec<f64>], forecasts: &[Vec<f64>]) -> Result<f64> {
    let cells = check_shape(realized, forecasts)?;
    let errs: Vec<f64> = realized
        .iter()
        .zip(forecasts)
        .flat_map(|(r, f)| r.iter().zip(f).map(|(a, b)| (a - b).abs()))
        .collect();
    Ok(stats::pairwise_sum(&errs) / cells as f64)
}

/// Pinball loss of the ensemble's empirical quantiles at each level for one
/// cell.
pub fn cell_pinball(
    values: &[f64],
    weights: Option<&[f64]>,
    realized: f64,
    levels: &[f64],
) -> Vec<f64> {
    levels
        .iter()
        .map(|&a| pinball(realized, stats::weighted_quantile(values, weights, a), a))
        .collect()
}

/// Pinball-approximated CRPS of one cell.
pub fn crps_cell(values: &[f64], weights: Option<&[f64]>, realized: f64) -> f64 {
    let levels = quantile_levels();
    stats::pairwise_sum(&cell_pinball(values, weights, realized, &levels)) / levels.len() as f64
}

/// Average pinball per quantile level over all cells of the ensembles.
pub fn per_quantile_pinball(
    ensembles: &[ScenarioEnsemble],
    realized: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let horizons: Vec<Vec<f64>> = ensembles.iter().map(|e| vec![0.0; e.horizon()]).collect();
    let cells = check_shape(&horizons, realized)?;
    let levels = quantile_levels();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(cells); levels.len()];
    for (e, r) in ensembles.iter().zip(realized) {
        e.validate()?;
        for (k, &p) in r.iter().enumerate() {
            let row = cell_pinball(&e.step(k), Some(&e.weights), p, &levels);
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
    }
    Ok(columns
        .iter()
        .map(|c| stats::pairwise_sum(c) / cells as f64)
        .collect())
}

/// CRPS averaged over quantile levels and then over all cells.
pub fn crps(ensembles: &[ScenarioEnsemble], realized: &[Vec<f64>]) -> Result<f64> {
    let per_level = per_quantile_pinball(ensembles, realized)?;
    Ok(stats::pairwise_sum(&per_level) / per_level.len() as f64)
}

pub fn total_profit(pnl: &[f64]) -> f64 {
    stats::pairwise_sum(pnl)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsideReference {
    /// Spread trader: losses measured against zero.
    Zero,
    /// Seller: shortfalls measured against the mean profit.
    Mean,
}

/// Downside semi-deviation sqrt(mean(min(pi - mu, 0)^2)).
pub fn downside(pnl: &[f64], reference: DownsideReference) -> Result<f64> {
    if pnl.is_empty() {
        return Err(Error::Empty("pnl"));
    }
    let mu = match reference {
        DownsideReference::Zero => 0.0,
        DownsideReference::Mean => stats::mean(pnl),
    };
    let sq: Vec<f64> = pnl.iter().map(|p| (p - mu).min(0.0).powi(2)).collect();
    Ok((stats::pairwise_sum(&sq) / pnl.len() as f64).sqrt())
}

/// Total profit over downside risk. With zero downside the ratio is
/// +inf, 0 or -inf by the sign of the profit.
pub fn sortino(total: f64, downside: f64) -> f64 {
    if downside > 0.0 {
        total / downside
    } else if total > 0.0 {
        f64::INFINITY
    } else if total < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Serializes non-finite values as the strings "inf", "-inf" and "nan".
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("not a number: {t}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastScores {
    pub mae: f64,
    pub crps: f64,
    pub per_quantile_pinball: Vec<f64>,
    pub paths: usize,
    pub cells: usize,
}

impl ForecastScores {
    pub fn evaluate(
        ensembles: &[ScenarioEnsemble],
        medians: &[Vec<f64>],
        realized: &[Vec<f64>],
    ) -> Result<Self> {
        let cells = check_shape(realized, medians)?;
        let per_quantile_pinball = per_quantile_pinball(ensembles, realized)?;
        Ok(Self {
            mae: mae_paths(realized, medians)?,
            crps: stats::pairwise_sum(&per_quantile_pinball) / per_quantile_pinball.len() as f64,
            per_quantile_pinball,
            paths: realized.len(),
            cells,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyScores {
    pub total_profit: f64,
    pub downside: f64,
    #[serde(with = "extended_f64")]
    pub sortino: f64,
    pub trades: usize,
}

impl StrategyScores {
    pub fn from_pnl(pnl: &[f64], reference: DownsideReference) -> Result<Self> {
        let total = total_profit(pnl);
        let down = downside(pnl, reference)?;
        Ok(Self {
            total_profit: total,
            downside: down,
            sortino: sortino(total, down),
            trades: pnl.len(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub forecasts: BTreeMap<String, ForecastScores>,
    pub strategies: BTreeMap<String, StrategyScores>,
    pub deliveries: usize,
    pub days: usize,
    pub steps: usize,
}
