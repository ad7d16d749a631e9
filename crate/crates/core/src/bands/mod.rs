//! Prediction bands from scenario ensembles and intra-trajectory
//! reweighting of scenarios against the realized path.

use serde::{Deserialize, Serialize};

use crate::ensembles::ScenarioEnsemble;
use crate::error::{Error, Result};
use crate::stats::{self, MASS_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSide {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionBand {
    pub side: BandSide,
    pub scp: f64,
    /// Band covers steps `from_step + 1 ..= H` (1-based).
    pub from_step: usize,
    pub values: Vec<f64>,
    pub retained: Vec<usize>,
    /// Nothing could be retained and the least extreme path was used.
    pub flagged: bool,
}

fn check_scp(scp: f64) -> Result<()> {
    if !(scp > 0.0 && scp < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scp must lie in (0, 1), got {scp}"
        )));
    }
    Ok(())
}

/// Simultaneous band: drop the most extreme paths (by pathwise maximum for
/// the upper side, minimum for the lower side) until the retained mass is
/// the smallest that reaches `scp`, then take the pointwise envelope.
pub fn build_band(ensemble: &ScenarioEnsemble, scp: f64, side: BandSide) -> Result<PredictionBand> {
    weighted_band(ensemble, &ensemble.weights, scp, side, 0)
}

/// Band over steps after `from_step` under the given scenario weights.
pub fn weighted_band(
    ensemble: &ScenarioEnsemble,
    weights: &[f64],
    scp: f64,
    side: BandSide,
    from_step: usize,
) -> Result<PredictionBand> {
    EnsembleTails::new(ensemble)?.band(weights, scp, side, from_step)
}

/// Weighted lower median of each step after `from_step`.
pub fn weighted_median_path(
    ensemble: &ScenarioEnsemble,
    weights: &[f64],
    from_step: usize,
) -> Result<Vec<f64>> {
    EnsembleTails::new(ensemble)?.median(weights, from_step)
}

/// Per-step sort orders and suffix extremes of an ensemble, so medians and
/// bands of many tails can be computed without re-sorting.
#[derive(Clone, Debug)]
pub struct EnsembleTails<'a> {
    ensemble: &'a ScenarioEnsemble,
    columns: Vec<Vec<f64>>,
    step_orders: Vec<Vec<usize>>,
    suffix_max: Vec<Vec<f64>>,
    suffix_min: Vec<Vec<f64>>,
}

impl<'a> EnsembleTails<'a> {
    pub fn new(ensemble: &'a ScenarioEnsemble) -> Result<Self> {
        ensemble.validate()?;
        let h = ensemble.horizon();
        let columns: Vec<Vec<f64>> = (0..h).map(|k| ensemble.step(k)).collect();
        let step_orders = columns.iter().map(|c| stats::sorted_order(c)).collect();
        let suffix = |pick: fn(f64, f64) -> f64| -> Vec<Vec<f64>> {
            ensemble
                .paths
                .iter()
                .map(|p| {
                    let mut out = p.clone();
                    for k in (0..h.saturating_sub(1)).rev() {
                        out[k] = pick(out[k], out[k + 1]);
                    }
                    out
                })
                .collect()
        };
        Ok(Self {
            ensemble,
            columns,
            step_orders,
            suffix_max: suffix(f64::max),
            suffix_min: suffix(f64::min),
        })
    }

    pub fn horizon(&self) -> usize {
        self.columns.len()
    }

    fn check(&self, weights: &[f64], from_step: usize) -> Result<()> {
        check_weights(self.ensemble, weights)?;
        if from_step >= self.horizon() {
            return Err(Error::EmptyHorizon {
                from_step,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    pub fn median(&self, weights: &[f64], from_step: usize) -> Result<Vec<f64>> {
        self.check(weights, from_step)?;
        Ok((from_step..self.horizon())
            .map(|k| stats::inverse_cdf(&self.columns[k], weights, &self.step_orders[k], 0.5))
            .collect())
    }

    pub fn band(
        &self,
        weights: &[f64],
        scp: f64,
        side: BandSide,
        from_step: usize,
    ) -> Result<PredictionBand> {
        check_scp(scp)?;
        self.check(weights, from_step)?;
        let extremity: Vec<f64> = match side {
            BandSide::Upper => self.suffix_max.iter().map(|s| s[from_step]).collect(),
            BandSide::Lower => self.suffix_min.iter().map(|s| -s[from_step]).collect(),
        };
        let order = stats::sorted_order(&extremity);
        let total: f64 = weights.iter().sum();
        let target = scp * total - MASS_TOL * total.max(1.0);
        let mut retained = Vec::new();
        let mut mass = 0.0;
        for &i in &order {
            if weights[i] <= 0.0 {
                continue;
            }
            retained.push(i);
            mass += weights[i];
            if mass >= target {
                break;
            }
        }
        let flagged = retained.is_empty();
        if flagged {
            retained.push(order[0]);
        }
        let values = (from_step..self.horizon())
            .map(|k| {
                let it = retained.iter().map(|&i| self.columns[k][i]);
                match side {
                    BandSide::Upper => it.fold(f64::NEG_INFINITY, f64::max),
                    BandSide::Lower => it.fold(f64::INFINITY, f64::min),
                }
            })
            .collect();
        retained.sort_unstable();
        Ok(PredictionBand {
            side,
            scp,
            from_step,
            values,
            retained,
            flagged,
        })
    }
}

fn check_weights(ensemble: &ScenarioEnsemble, weights: &[f64]) -> Result<()> {
    if weights.len() != ensemble.len() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParameter(
            "weights must be finite, nonnegative and not all zero".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReweightParams {
    pub p: f64,
    pub lambda: f64,
    pub mae_floor: f64,
}

impl Default for ReweightParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            lambda: 0.0,
            mae_floor: 0.01,
        }
    }
}

impl ReweightParams {
    pub fn new(p: f64, lambda: f64) -> Self {
        Self {
            p,
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p must be positive, got {}",
                self.p
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.mae_floor > 0.0) {
            return Err(Error::InvalidParameter("mae_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reweighting {
    pub weights: Vec<f64>,
    /// Weights degenerated and were replaced by uniform ones.
    pub fallback: bool,
}

fn check_realized(ensemble: &ScenarioEnsemble, realized: &[f64]) -> Result<usize> {
    ensemble.validate()?;
    let tau = realized.len();
    if tau == 0 || tau > ensemble.horizon() {
        return Err(Error::InvalidParameter(format!(
            "realized prefix of length {tau} for horizon {}",
            ensemble.horizon()
        )));
    }
    Ok(tau)
}

/// Exponentially decaying time weights over steps 1..=tau, summing to one.
pub fn time_weights(tau: usize, lambda: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=tau)
        .map(|u| (-lambda * (tau - u) as f64).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Generalized Gaussian kernel weights of scenarios given the realized
/// prefix, scaled by the error of the initial median so far.
pub fn kernel_weights(
    realized: &[f64],
    ensemble: &ScenarioEnsemble,
    initial_median: &[f64],
    params: &ReweightParams,
) -> Result<Reweighting> {
    params.validate()?;
    let tau = check_realized(ensemble, realized)?;
    if initial_median.len() < tau {
        return Err(Error::DimensionMismatch {
            expected: tau,
            found: initial_median.len(),
        });
    }
    let mae = (realized
        .iter()
        .zip(initial_median)
        .map(|(p, m)| (p - m).abs())
        .sum::<f64>()
        / tau as f64)
        .max(params.mae_floor);
    let tw = time_weights(tau, params.lambda);
    let log_k: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|path| {
            let d: f64 = (0..tau)
                .map(|u| tw[u] * (realized[u] - path[u]).powi(2))
                .sum();
            -mae * d.powf(params.p / 2.0)
        })
        .collect();
    Ok(normalize_log(log_k))
}

fn normalize_log(log_k: Vec<f64>) -> Reweighting {
    let n = log_k.len();
    let top = log_k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Reweighting {
            weights: vec![1.0 / n as f64; n],
            fallback: true,
        };
    }
    let raw: Vec<f64> = log_k.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Reweighting {
        weights: raw.into_iter().map(|w| w / total).collect(),
        fallback: false,
    }
}

/// Weights inversely proportional to each scenario's mean absolute deviation
/// from the realized prefix. Exact matches share all the mass.
pub fn inverse_mae_weights(realized: &[f64], ensemble: &ScenarioEnsemble) -> Result<Reweighting> {
    let tau = check_realized(ensemble, realized)?;
    let maes: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|path| {
            realized
                .iter()
                .zip(path)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>()
                / tau as f64
        })
        .collect();
    Ok(inverse_of(&maes))
}

/// Kernel weights for every prefix length tau = 1..=realized.len(),
/// updated incrementally.
pub fn kernel_weights_path(
    realized: &[f64],
    ensemble: &ScenarioEnsemble,
    initial_median: &[f64],
    params: &ReweightParams,
) -> Result<Vec<Reweighting>> {
    params.validate()?;
    let h = check_realized(ensemble, realized)?;
    if initial_median.len() < h {
        return Err(Error::DimensionMismatch {
            expected: h,
            found: initial_median.len(),
        });
    }
    let decay = (-params.lambda).exp();
    let mut acc = vec![0.0; ensemble.len()];
    let mut norm = 0.0;
    let mut abs_err = 0.0;
    let mut out = Vec::with_capacity(h);
    for tau in 1..=h {
        let r = realized[tau - 1];
        abs_err += (r - initial_median[tau - 1]).abs();
        let mae = (abs_err / tau as f64).max(params.mae_floor);
        norm = norm * decay + 1.0;
        let log_k: Vec<f64> = acc
            .iter_mut()
            .zip(&ensemble.paths)
            .map(|(a, path)| {
                *a = *a * decay + (r - path[tau - 1]).powi(2);
                -mae * (*a / norm).powf(params.p / 2.0)
            })
            .collect();
        out.push(normalize_log(log_k));
    }
    Ok(out)
}

/// Inverse-MAE weights for every prefix length tau = 1..=realized.len().
pub fn inverse_mae_weights_path(
    realized: &[f64],
    ensemble: &ScenarioEnsemble,
) -> Result<Vec<Reweighting>> {
    let h = check_realized(ensemble, realized)?;
    let mut acc = vec![0.0; ensemble.len()];
    let mut out = Vec::with_capacity(h);
    for tau in 1..=h {
        for (a, path) in acc.iter_mut().zip(&ensemble.paths) {
            *a += (realized[tau - 1] - path[tau - 1]).abs();
        }
        out.push(inverse_of(&acc));
    }
    Ok(out)
}

fn inverse_of(errors: &[f64]) -> Reweighting {
    let exact = errors.iter().filter(|&&m| m == 0.0).count();
    let weights = if exact > 0 {
        errors
            .iter()
            .map(|&m| if m == 0.0 { 1.0 / exact as f64 } else { 0.0 })
            .collect()
    } else {
        let inv: Vec<f64> = errors.iter().map(|m| 1.0 / m).collect();
        let total: f64 = inv.iter().sum();
        inv.into_iter().map(|w| w / total).collect()
    };
    Reweighting {
        weights,
        fallback: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;
    use crate::features::Origin;
    use crate::market_data::DeliveryId;
    use chrono::NaiveDate;

    fn ens(paths: Vec<Vec<f64>>) -> ScenarioEnsemble {
        let n = paths.len();
        ScenarioEnsemble::uniform(
            Origin {
                delivery: DeliveryId::new(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 1).unwrap(),
                index: 57,
            },
            EnsembleKind::Historical,
            paths,
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_band_keeps_lowest_maxima() {
        let e = ens(vec![
            vec![3.0, 0.0],
            vec![0.0, 1.0],
            vec![4.0, 4.0],
            vec![2.0, 0.5],
        ]);
        let b = build_band(&e, 0.5, BandSide::Upper).unwrap();
        assert_eq!(b.retained, vec![1, 3]);
        assert_eq!(b.values, vec![2.0, 1.0]);
        let all = build_band(&e, 0.999, BandSide::Upper).unwrap();
        assert_eq!(all.values, vec![4.0, 4.0]);
        let lower = build_band(&e, 0.5, BandSide::Lower).unwrap();
        assert_eq!(lower.retained, vec![2, 3]);
        assert_eq!(lower.values, vec![2.0, 0.5]);
    }

    #[test]
    fn weighted_band_mass_rule() {
        let e = ens(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let w = [0.7, 0.1, 0.1, 0.1];
        let b = weighted_band(&e, &w, 0.7, BandSide::Upper, 0).unwrap();
        assert_eq!(b.retained, vec![0]);
        let one = weighted_band(&e, &[0.0, 0.0, 1.0, 0.0], 0.3, BandSide::Upper, 0).unwrap();
        assert_eq!(one.values, vec![3.0]);
        assert!(matches!(
            weighted_band(&e, &w, 0.5, BandSide::Upper, 1),
            Err(Error::EmptyHorizon { .. })
        ));
    }

    #[test]
    fn weighted_median_example() {
        let e = ens(vec![vec![5.0, 0.0], vec![6.0, 10.0]]);
        assert_eq!(weighted_median_path(&e, &[0.6, 0.4], 1).unwrap(), vec![0.0]);
        assert_eq!(
            weighted_median_path(&e, &[0.0, 1.0], 0).unwrap(),
            vec![6.0, 10.0]
        );
    }

    #[test]
    fn inverse_mae_examples() {
        let e = ens(vec![vec![1.0, 0.0], vec![3.0, 0.0]]);
        let w = inverse_mae_weights(&[0.0], &e).unwrap().weights;
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        let e = ens(vec![vec![0.0], vec![3.0], vec![0.0]]);
        let w = inverse_mae_weights(&[0.0], &e).unwrap().weights;
        assert_eq!(w, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn kernel_weight_reductions() {
        let e = ens(vec![
            vec![1.0, 2.0, 9.0],
            vec![1.5, 2.5, 0.0],
            vec![0.5, 1.5, 3.0],
        ]);
        let realized = [1.0, 2.0];
        let median = [3.0, 2.0, 0.0];
        let params = ReweightParams::new(2.0, 0.0);
        let r = kernel_weights(&realized, &e, &median, &params).unwrap();
        // exact match has raw weight 1; others exp(-mae * mean sq dev)
        let mae = (2.0 + 0.0) / 2.0;
        let other = (-mae * 0.25f64).exp();
        let total = 1.0 + 2.0 * other;
        assert!((r.weights[0] - 1.0 / total).abs() < 1e-14);
        assert!((r.weights[1] - other / total).abs() < 1e-14);
        assert!((r.weights[1] - r.weights[2]).abs() < 1e-15);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_favours_recent_steps() {
        let a = time_weights(5, 0.1);
        let b = time_weights(5, 0.3);
        assert!(b[4] / b[0] > a[4] / a[0]);
        assert_eq!(time_weights(3, 0.0), vec![1.0 / 3.0; 3]);
    }
}
