use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dynamics, PreparedRun, StrategySpec, ThresholdMethod};
use crate::bands::ReweightParams;
use crate::ensembles::ScenarioEnsemble;
use crate::error::{Error, Result};
use crate::metrics::StrategyScores;

/// Candidate values per hyperparameter. An empty `scp` keeps the template's
/// value; `p` and `lambda` only apply to kernel dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(default)]
    pub scp: Vec<f64>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    pub eta: Vec<ThresholdMethod>,
}

impl Grid {
    /// Grid for median strategies: 13 x 11 x 4 cells.
    pub fn median_table() -> Self {
        let mut p = vec![0.1];
        p.extend((1..=12).map(|k| k as f64 / 4.0));
        Self {
            scp: vec![],
            p,
            lambda: (0..=10).map(|k| k as f64 / 20.0).collect(),
            eta: vec![
                ThresholdMethod::ThreeSigma,
                ThresholdMethod::Iqr,
                ThresholdMethod::Ipr595,
                ThresholdMethod::Mae,
            ],
        }
    }

    /// Grid for band strategies: 19 x 6 x 6 x 2 cells.
    pub fn band_table() -> Self {
        Self {
            scp: (1..=19).map(|k| k as f64 / 20.0).collect(),
            p: vec![0.5, 0.75, 1.0, 1.25, 1.75, 2.0],
            lambda: vec![0.05, 0.1, 0.2, 0.35, 0.4, 0.5],
            eta: vec![ThresholdMethod::Iqr, ThresholdMethod::Ipr595],
        }
    }

    /// Cells in lexicographic order (scp, p, lambda, eta), grouped so that all
    /// thresholds of one (scp, p, lambda) triple are adjacent.
    pub fn cells(&self, template: &StrategySpec) -> Vec<StrategySpec> {
        let scps: Vec<Option<f64>> = if self.scp.is_empty() {
            vec![template.scp]
        } else {
            self.scp.iter().map(|&s| Some(s)).collect()
        };
        let reweights: Vec<Option<ReweightParams>> = if template.dynamics == Dynamics::DynamicKernel
        {
            let base = template.reweight.unwrap_or_default();
            let ps = if self.p.is_empty() {
                vec![base.p]
            } else {
                self.p.clone()
            };
            let ls = if self.lambda.is_empty() {
                vec![base.lambda]
            } else {
                self.lambda.clone()
            };
            ps.iter()
                .flat_map(|&p| {
                    ls.iter()
                        .map(move |&lambda| Some(ReweightParams { p, lambda, ..base }))
                })
                .collect()
        } else {
            vec![template.reweight]
        };
        let mut out = Vec::new();
        for &scp in &scps {
            for &reweight in &reweights {
                for &eta in &self.eta {
                    out.push(StrategySpec {
                        scp,
                        reweight,
                        threshold_method: eta,
                        ..template.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CalibrationCase {
    pub ensemble: ScenarioEnsemble,
    pub realized: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    MaximizeSortino,
    MinimizeSortino,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: StrategySpec,
    pub scores: StrategyScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub cells: Vec<GridCell>,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Score every cell of the grid by the Sortino ratio over the calibration
/// cases and select the best one; ties go to the earliest cell.
pub fn grid_search(
    grid: &Grid,
    cases: &[CalibrationCase],
    template: &StrategySpec,
    objective: Objective,
) -> Result<GridResult> {
    let specs = grid.cells(template);
    if specs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if cases.is_empty() {
        return Err(Error::Empty("calibration cases"));
    }
    for s in &specs {
        s.validate()?;
    }
    let per_group = grid.eta.len();
    let groups: Vec<&[StrategySpec]> = specs.chunks(per_group).collect();
    let scored: Vec<Vec<GridCell>> = groups
        .par_iter()
        .map(|group| {
            let mut pnl: Vec<Vec<f64>> = vec![Vec::with_capacity(cases.len()); group.len()];
            for case in cases {
                let prepared = PreparedRun::new(&group[0], &case.ensemble, &case.realized)?;
                for (k, spec) in group.iter().enumerate() {
                    pnl[k].push(prepared.run(&case.realized, spec.threshold_method)?.profit);
                }
            }
            group
                .iter()
                .zip(&pnl)
                .map(|(spec, p)| {
                    Ok(GridCell {
                        spec: spec.clone(),
                        scores: StrategyScores::from_pnl(p, spec.agent.downside_reference())?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let cells: Vec<GridCell> = scored.into_iter().flatten().collect();
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let (a, b) = (c.scores.sortino, cells[best].scores.sortino);
        let better = match objective {
            Objective::MaximizeSortino => a > b,
            Objective::MinimizeSortino => a < b,
        };
        if better {
            best = i;
        }
    }
    Ok(GridResult { best, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{Agent, BandAttitude};

    #[test]
    fn table_sizes() {
        let t = StrategySpec::median(Agent::Seller, Dynamics::DynamicKernel);
        assert_eq!(Grid::median_table().cells(&t).len(), 572);
        let b = StrategySpec::band(
            Agent::Seller,
            BandAttitude::RiskSeeking,
            0.5,
            Dynamics::DynamicKernel,
        );
        assert_eq!(Grid::band_table().cells(&b).len(), 1368);
        let m = StrategySpec::median(Agent::Seller, Dynamics::DynamicMae);
        assert_eq!(Grid::median_table().cells(&m).len(), 4);
        let p = &Grid::median_table().p;
        assert_eq!(p.len(), 13);
        assert_eq!((p[0], p[1], p[12]), (0.1, 0.25, 3.0));
    }
}
