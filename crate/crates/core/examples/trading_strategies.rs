// Trade one delivery with every strategy family and compare with the
// crystal-ball and naive benchmarks.

use chrono::NaiveDate;
use intraday_paths::bands::ReweightParams;
use intraday_paths::ensembles::{EnsembleKind, ScenarioEnsemble};
use intraday_paths::features::Origin;
use intraday_paths::market_data::DeliveryId;
use intraday_paths::strategies::{
    crystal_ball, naive_endpoints, simulate_strategy, Agent, BandAttitude, Dynamics, NaiveVariant,
    StrategySpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 0.8)?;
    let trend: Vec<f64> = (0..31)
        .map(|h| 40.0 + 3.0 * (h as f64 / 5.0).sin())
        .collect();
    let mut walk = |scale: f64| -> Vec<f64> {
        let mut drift = 0.0;
        trend
            .iter()
            .map(|t| {
                drift += scale * noise.sample(&mut rng);
                t + drift
            })
            .collect()
    };
    let paths: Vec<Vec<f64>> = (0..100).map(|_| walk(1.0)).collect();
    let realized = walk(1.0);
    let origin = Origin {
        delivery: DeliveryId::new(NaiveDate::from_ymd_opt(2020, 6, 1).unwrap(), 49)?,
        index: 0,
    };
    let provenance = (0..paths.len()).map(|i| format!("s{i}")).collect();
    let ens = ScenarioEnsemble::uniform(origin, EnsembleKind::Historical, paths, provenance)?;

    for agent in [Agent::Seller, Agent::SpreadTrader] {
        println!("{}:", agent.label());
        for dynamics in [
            Dynamics::Static,
            Dynamics::DynamicKernel,
            Dynamics::DynamicMae,
        ] {
            let mut specs = vec![StrategySpec::median(agent, dynamics)];
            for att in [BandAttitude::RiskAverse, BandAttitude::RiskSeeking] {
                specs.push(StrategySpec::band(agent, att, 0.5, dynamics));
            }
            for mut spec in specs {
                if dynamics == Dynamics::DynamicKernel {
                    spec.reweight = Some(ReweightParams::new(0.5, 0.35));
                }
                let out = simulate_strategy(&spec, &ens, &realized)?;
                let trades: Vec<String> = out
                    .trades
                    .iter()
                    .map(|t| format!("{:?}@{}", t.side, t.step))
                    .collect();
                println!(
                    "  {:28} {:8.3}  {}",
                    spec.label(),
                    out.profit,
                    trades.join(" ")
                );
            }
        }
        println!(
            "  {:28} {:8.3}",
            "crystal ball",
            crystal_ball(agent, &realized)?.profit
        );
        for v in [NaiveVariant::First, NaiveVariant::Last] {
            let out = naive_endpoints(agent, v, &realized)?;
            println!("  {:28} {:8.3}", format!("naive {v:?}"), out.profit);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
