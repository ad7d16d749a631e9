use serde::{Deserialize, Serialize};

use super::ScenarioEnsemble;
use crate::error::{Error, Result};
use crate::svr::SvrModel;

/// Exact first-order Wasserstein distance between two weighted samples on
/// the real line, the integral of |F_a - F_b|. Weights need not be normalized;
/// `None` means uniform.
pub fn wasserstein1(a: &[f64], wa: Option<&[f64]>, b: &[f64], wb: Option<&[f64]>) -> f64 {
    let atoms = |v: &[f64], w: Option<&[f64]>| -> Vec<(f64, f64)> {
        let total: f64 = w.map_or(v.len() as f64, |w| w.iter().sum());
        let mut out: Vec<(f64, f64)> = v
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, w.map_or(1.0, |w| w[i]) / total))
            .collect();
        out.sort_by(|p, q| p.0.total_cmp(&q.0));
        out
    };
    let a = atoms(a, wa);
    let b = atoms(b, wb);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev = f64::NAN;
    let mut dist = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        if !prev.is_nan() {
            dist += (fa - fb).abs() * (x - prev);
        }
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        prev = x;
    }
    dist
}

/// Per-scenario weight: summed absolute expansion coefficients of the
/// training sample behind the scenario, across all step models.
pub fn svs_weights(models: &[SvrModel], scenario_to_training: &[usize]) -> Result<Vec<f64>> {
    let n = models.first().map_or(0, |m| m.dual_coefs.len());
    if models.iter().any(|m| m.dual_coefs.len() != n) {
        return Err(Error::IndexMisalignment(
            "step models were trained on different sample sets".into(),
        ));
    }
    scenario_to_training
        .iter()
        .map(|&i| {
            if i >= n {
                return Err(Error::IndexMisalignment(format!(
                    "scenario maps to training sample {i}, models have {n}"
                )));
            }
            Ok(models.iter().map(|m| m.coef(i).abs()).sum())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvsPooling {
    /// All steps of all selected paths form one distribution.
    Pooled,
    /// Mean over steps of per-step distances.
    PerStepMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvsConfig {
    pub omega: f64,
    pub ma_window: usize,
    pub minimum: usize,
    pub pooling: SvsPooling,
}

impl Default for SvsConfig {
    fn default() -> Self {
        Self {
            omega: 0.01,
            ma_window: 10,
            minimum: 10,
            pooling: SvsPooling::Pooled,
        }
    }
}

impl SvsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) {
            return Err(Error::InvalidParameter("omega must be nonnegative".into()));
        }
        if self.ma_window == 0 || self.minimum == 0 {
            return Err(Error::InvalidParameter(
                "ma_window and minimum must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvsRanking {
    pub scenario_weights: Vec<f64>,
    /// Scenario indices by descending weight, ties by ascending index.
    pub order: Vec<usize>,
    pub selected_count: usize,
}

impl SvsRanking {
    pub fn new(scenario_weights: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scenario_weights.len()).collect();
        order.sort_by(|&a, &b| {
            scenario_weights[b]
                .total_cmp(&scenario_weights[a])
                .then(a.cmp(&b))
        });
        Self {
            scenario_weights,
            order,
            selected_count: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvsSelection {
    pub ensemble: ScenarioEnsemble,
    pub ranking: SvsRanking,
    /// Distances W1^(n) between successive selections, n = 2..=selected.
    pub distances: Vec<f64>,
    /// The input was smaller than `minimum` and was returned whole.
    pub undersized: bool,
}

fn distance(
    pooling: SvsPooling,
    paths: &[Vec<f64>],
    prev: &[usize],
    next: &[usize],
    h: usize,
) -> f64 {
    match pooling {
        SvsPooling::Pooled => {
            let a: Vec<f64> = prev
                .iter()
                .flat_map(|&i| paths[i].iter().copied())
                .collect();
            let b: Vec<f64> = next
                .iter()
                .flat_map(|&i| paths[i].iter().copied())
                .collect();
            wasserstein1(&a, None, &b, None)
        }
        SvsPooling::PerStepMean => {
            (0..h)
                .map(|k| {
                    let a: Vec<f64> = prev.iter().map(|&i| paths[i][k]).collect();
                    let b: Vec<f64> = next.iter().map(|&i| paths[i][k]).collect();
                    wasserstein1(&a, None, &b, None)
                })
                .sum::<f64>()
                / h as f64
        }
    }
}

/// Add scenarios in ranking order until the moving average of absolute
/// changes in successive W1 distances drops below `omega` (and at least
/// `minimum` are selected). The result carries uniform weights.
pub fn select_scenarios_svs(
    weights: &[f64],
    ensemble: &ScenarioEnsemble,
    config: &SvsConfig,
) -> Result<SvsSelection> {
    config.validate()?;
    ensemble.validate()?;
    if weights.len() != ensemble.len() {
        return Err(Error::IndexMisalignment(format!(
            "{} weights for {} scenarios",
            weights.len(),
            ensemble.len()
        )));
    }
    let mut ranking = SvsRanking::new(weights.to_vec());
    let n_all = ensemble.len();
    let h = ensemble.horizon();
    let mut distances = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    let mut selected = n_all;
    let undersized = n_all < config.minimum;
    if !undersized {
        for n in 1..=n_all {
            if n >= 2 {
                let d = distance(
                    config.pooling,
                    &ensemble.paths,
                    &ranking.order[..n - 1],
                    &ranking.order[..n],
                    h,
                );
                if let Some(&last) = distances.last() {
                    let change: f64 = last - d;
                    deltas.push(change.abs());
                }
                distances.push(d);
            }
            let recent = &deltas[deltas.len().saturating_sub(config.ma_window)..];
            let ma = if recent.is_empty() {
                0.0
            } else {
                recent.iter().sum::<f64>() / recent.len() as f64
            };
            if n >= config.minimum && ma < config.omega {
                selected = n;
                break;
            }
        }
    }
    ranking.selected_count = selected;
    let idx = &ranking.order[..selected];
    let reduced = super::ScenarioEnsemble::uniform(
        ensemble.origin,
        ensemble.kind,
        idx.iter().map(|&i| ensemble.paths[i].clone()).collect(),
        idx.iter()
            .map(|&i| ensemble.provenance[i].clone())
            .collect(),
    )?;
    Ok(SvsSelection {
        ensemble: reduced,
        ranking,
        distances,
        undersized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;
    use crate::features::Origin;
    use crate::market_data::DeliveryId;
    use chrono::NaiveDate;

    fn ensemble(paths: Vec<Vec<f64>>) -> ScenarioEnsemble {
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
    fn w1_examples() {
        assert_eq!(wasserstein1(&[1.0, 2.0], None, &[1.0, 2.0], None), 0.0);
        assert_eq!(wasserstein1(&[0.0], None, &[1.0], None), 1.0);
        assert_eq!(wasserstein1(&[0.0, 1.0], None, &[1.0, 2.0], None), 1.0);
        let w = wasserstein1(&[0.0, 10.0], Some(&[0.9, 0.1]), &[0.0], None);
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svs_weight_arithmetic() {
        use crate::svr::{KernelParams, SvrModel};
        let model = |coefs: Vec<(f64, f64)>| SvrModel {
            dual_coefs: coefs,
            bias: 0.0,
            support_indices: vec![],
            stored_features: vec![],
            stored_aux: vec![],
            kernel: KernelParams::new(1.0, 1.0).unwrap(),
            converged: true,
            iterations: 0,
            objective: 0.0,
        };
        let m = [
            model(vec![(0.0, 0.3), (0.0, 0.0)]),
            model(vec![(0.2, 0.0), (0.0, 0.0)]),
        ];
        let w = svs_weights(&m, &[0, 1]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
        assert!(svs_weights(&m, &[2]).is_err());
    }

    #[test]
    fn stopping_extremes() {
        let paths: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let e = ensemble(paths);
        let w: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let inf = SvsConfig {
            omega: f64::INFINITY,
            ..Default::default()
        };
        assert_eq!(
            select_scenarios_svs(&w, &e, &inf).unwrap().ensemble.len(),
            10
        );
        let zero = SvsConfig {
            omega: 0.0,
            ..Default::default()
        };
        assert_eq!(
            select_scenarios_svs(&w, &e, &zero).unwrap().ensemble.len(),
            30
        );
        let same = ensemble(vec![vec![1.0, 2.0]; 30]);
        let s = select_scenarios_svs(&w, &same, &SvsConfig::default()).unwrap();
        assert_eq!(s.ensemble.len(), 10);
        let small = ensemble(vec![vec![1.0]; 4]);
        let s = select_scenarios_svs(&[1.0; 4], &small, &SvsConfig::default()).unwrap();
        assert!(s.undersized);
        assert_eq!(s.ensemble.len(), 4);
    }

    #[test]
    fn ranking_ties_by_index() {
        let r = SvsRanking::new(vec![1.0, 3.0, 1.0, 3.0]);
        assert_eq!(r.order, vec![1, 3, 0, 2]);
    }
}
