mod common;

use common::{ensemble, random_walks};
use intraday_paths::bands::ReweightParams;
use intraday_paths::strategies::{
    crystal_ball, naive_endpoints, replay, simulate_strategy, Agent, BandAttitude, Dynamics,
    NaiveVariant, StrategySpec, ThresholdMethod,
};
use proptest::prelude::*;

fn roster(agent: Agent, dynamics: Dynamics, eta: ThresholdMethod) -> Vec<StrategySpec> {
    let mut out = vec![StrategySpec::median(agent, dynamics)];
    for att in [BandAttitude::RiskAverse, BandAttitude::RiskSeeking] {
        out.push(StrategySpec::band(agent, att, 0.5, dynamics));
    }
    for s in &mut out {
        s.threshold_method = eta;
        if dynamics == Dynamics::DynamicKernel {
            s.reweight = Some(ReweightParams::new(0.5, 0.35));
        }
    }
    out
}

#[test]
fn crystal_ball_on_a_known_path() {
    let p = [5.0, 1.0, 7.0, 3.0, 9.0, 2.0];
    assert_eq!(crystal_ball(Agent::Seller, &p).unwrap().profit, 9.0);
    assert_eq!(crystal_ball(Agent::SpreadTrader, &p).unwrap().profit, 8.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn crystal_ball_dominates(seed in 0u64..10_000) {
        let ens = ensemble(random_walks(30, 20, seed));
        let realized = random_walks(1, 20, seed + 99)[0].clone();
        for agent in [Agent::Seller, Agent::SpreadTrader] {
            let best = crystal_ball(agent, &realized).unwrap().profit;
            for dynamics in [Dynamics::Static, Dynamics::DynamicKernel, Dynamics::DynamicMae] {
                for spec in roster(agent, dynamics, ThresholdMethod::Iqr) {
                    let got = simulate_strategy(&spec, &ens, &realized).unwrap();
                    prop_assert!(got.profit <= best + 1e-9, "{}: {} > {}", spec.label(), got.profit, best);
                    let again = replay(agent, &got.audit, &realized).unwrap();
                    prop_assert_eq!(&again.trades, &got.trades);
                    prop_assert_eq!(again.profit, got.profit);
                }
            }
            for v in [NaiveVariant::First, NaiveVariant::Last] {
                prop_assert!(naive_endpoints(agent, v, &realized).unwrap().profit <= best + 1e-9);
            }
        }
        prop_assert!(crystal_ball(Agent::SpreadTrader, &realized).unwrap().profit >= 0.0);
    }

    #[test]
    fn naive_spread_trades_are_mirror_images(seed in 0u64..10_000) {
        let realized = random_walks(1, 31, seed)[0].clone();
        let first = naive_endpoints(Agent::SpreadTrader, NaiveVariant::First, &realized).unwrap();
        let last = naive_endpoints(Agent::SpreadTrader, NaiveVariant::Last, &realized).unwrap();
        prop_assert_eq!(first.profit, -last.profit);
    }

    #[test]
    fn infinite_threshold_never_deviates(seed in 0u64..10_000) {
        let ens = ensemble(random_walks(25, 16, seed));
        let realized = random_walks(1, 16, seed + 5)[0].clone();
        for agent in [Agent::Seller, Agent::SpreadTrader] {
            let fixed = roster(agent, Dynamics::Static, ThresholdMethod::Iqr);
            for dynamics in [Dynamics::DynamicKernel, Dynamics::DynamicMae] {
                let dynamic = roster(agent, dynamics, ThresholdMethod::Constant(f64::INFINITY));
                for (s, d) in fixed.iter().zip(&dynamic) {
                    let a = simulate_strategy(s, &ens, &realized).unwrap();
                    let b = simulate_strategy(d, &ens, &realized).unwrap();
                    prop_assert_eq!(a.trades, b.trades);
                    prop_assert_eq!(a.profit, b.profit);
                }
            }
        }
    }
}
