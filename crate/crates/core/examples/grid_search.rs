// Calibrate a dynamic strategy's reweighting and threshold parameters on a
// batch of deliveries by maximizing the Sortino ratio.

use chrono::NaiveDate;
use intraday_paths::ensembles::{EnsembleKind, ScenarioEnsemble};
use intraday_paths::features::Origin;
use intraday_paths::market_data::DeliveryId;
use intraday_paths::strategies::{
    grid_search, Agent, CalibrationCase, Dynamics, Grid, Objective, StrategySpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 1.0)?;
    let day = NaiveDate::from_ymd_opt(2020, 6, 1).unwrap();
    let mut cases = Vec::new();
    for q in 1..=24u8 {
        let level = 40.0 + 5.0 * noise.sample(&mut rng);
        let mut walk = || -> Vec<f64> {
            let mut p = level;
            (0..31)
                .map(|_| {
                    p += noise.sample(&mut rng);
                    p
                })
                .collect()
        };
        let paths: Vec<Vec<f64>> = (0..60).map(|_| walk()).collect();
        let realized = walk();
        let origin = Origin {
            delivery: DeliveryId::new(day, q)?,
            index: 0,
        };
        let prov = (0..60).map(|i| i.to_string()).collect();
        cases.push(CalibrationCase {
            ensemble: ScenarioEnsemble::uniform(origin, EnsembleKind::Historical, paths, prov)?,
            realized,
        });
    }

    let template = StrategySpec::median(Agent::SpreadTrader, Dynamics::DynamicKernel);
    let grid = Grid::median_table();
    let result = grid_search(&grid, &cases, &template, Objective::MaximizeSortino)?;
    let best = result.best_cell();
    let rw = best.spec.reweight.unwrap();
    println!(
        "{} cells over {} deliveries",
        result.cells.len(),
        cases.len()
    );
    println!(
        "best: p={} lambda={} eta={}  total {:.2}  Sortino {:.3}",
        rw.p,
        rw.lambda,
        best.spec.threshold_method.label(),
        best.scores.total_profit,
        best.scores.sortino
    );
    let mut sortinos: Vec<f64> = result.cells.iter().map(|c| c.scores.sortino).collect();
    sortinos.sort_by(f64::total_cmp);
    println!(
        "Sortino across cells: min {:.3}, median {:.3}, max {:.3}",
        sortinos[0],
        sortinos[sortinos.len() / 2],
        sortinos[sortinos.len() - 1]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
