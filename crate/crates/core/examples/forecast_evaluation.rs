// Score point forecasts and ensembles with MAE, pinball loss and CRPS, and
// strategies with total profit, downside deviation and the Sortino ratio.

use chrono::NaiveDate;
use intraday_paths::ensembles::{empirical_median_path, EnsembleKind, ScenarioEnsemble};
use intraday_paths::features::Origin;
use intraday_paths::market_data::DeliveryId;
use intraday_paths::metrics::{quantile_levels, DownsideReference, ForecastScores, StrategyScores};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let day = NaiveDate::from_ymd_opt(2020, 6, 1).unwrap();
    let truth = Normal::new(0.0, 1.0)?;
    let mut realized = Vec::new();
    let mut sharp = Vec::new();
    let mut wide = Vec::new();
    for q in 1..=20u8 {
        let path: Vec<f64> = (0..31).map(|_| 40.0 + truth.sample(&mut rng)).collect();
        let origin = Origin {
            delivery: DeliveryId::new(day, q)?,
            index: 0,
        };
        for (scale, out) in [(1.0, &mut sharp), (3.0, &mut wide)] {
            let d = Normal::new(40.0, scale)?;
            let paths: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..31).map(|_| d.sample(&mut rng)).collect())
                .collect();
            let prov = (0..200).map(|i| i.to_string()).collect();
            out.push(ScenarioEnsemble::uniform(
                origin,
                EnsembleKind::Naive,
                paths,
                prov,
            )?);
        }
        realized.push(path);
    }
    let levels = quantile_levels();
    for (name, ens) in [("calibrated", &sharp), ("too wide", &wide)] {
        let medians = ens
            .iter()
            .map(empirical_median_path)
            .collect::<Result<Vec<_>, _>>()?;
        let s = ForecastScores::evaluate(ens, &medians, &realized)?;
        println!(
            "{name:10}  MAE {:.3}  CRPS {:.3}  pinball@{:.2} {:.3}  pinball@{:.2} {:.3}",
            s.mae,
            s.crps,
            levels[4],
            s.per_quantile_pinball[4],
            levels[94],
            s.per_quantile_pinball[94]
        );
    }

    let pnl = [3.0, -1.0, 2.5, 0.5, -2.0, 4.0];
    for (name, r) in [
        ("spread", DownsideReference::Zero),
        ("seller", DownsideReference::Mean),
    ] {
        let s = StrategyScores::from_pnl(&pnl, r)?;
        println!(
            "{name}: total {:.2}, downside {:.3}, Sortino {:.3}",
            s.total_profit, s.downside, s.sortino
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
