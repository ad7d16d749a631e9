// Simultaneous prediction bands of a random-walk ensemble, and how kernel
// reweighting on a realized prefix moves the median and the bands.

use chrono::NaiveDate;
use intraday_paths::bands::{
    build_band, inverse_mae_weights, kernel_weights, weighted_band, weighted_median_path, BandSide,
    ReweightParams,
};
use intraday_paths::ensembles::{empirical_median_path, EnsembleKind, ScenarioEnsemble};
use intraday_paths::features::Origin;
use intraday_paths::market_data::DeliveryId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_walks(n: usize, h: usize, seed: u64) -> anyhow::Result<ScenarioEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 1.0)?;
    let paths: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut p = 40.0;
            (0..h)
                .map(|_| {
                    p += step.sample(&mut rng);
                    p
                })
                .collect()
        })
        .collect();
    let origin = Origin {
        delivery: DeliveryId::new(NaiveDate::from_ymd_opt(2020, 6, 1).unwrap(), 49)?,
        index: 0,
    };
    let provenance = (0..n).map(|i| format!("walk {i}")).collect();
    Ok(ScenarioEnsemble::uniform(
        origin,
        EnsembleKind::Historical,
        paths,
        provenance,
    )?)
}

pub fn run_example() -> anyhow::Result<()> {
    let ens = random_walks(200, 31, 8)?;
    for scp in [0.1, 0.5, 0.9] {
        let up = build_band(&ens, scp, BandSide::Upper)?;
        let lo = build_band(&ens, scp, BandSide::Lower)?;
        println!(
            "scp {scp:.1}: {:3} paths under the upper band, h=31 upper {:6.2} lower {:6.2}",
            up.retained.len(),
            up.values[30],
            lo.values[30]
        );
    }

    // pretend scenario 17 is what happens and reweight after ten steps
    let realized = ens.paths[17][..10].to_vec();
    let median = empirical_median_path(&ens)?;
    let kernel = kernel_weights(&realized, &ens, &median, &ReweightParams::new(1.0, 0.2))?;
    let inverse = inverse_mae_weights(&realized, &ens)?;
    for (name, w) in [
        ("kernel", &kernel.weights),
        ("inverse MAE", &inverse.weights),
    ] {
        let tail = weighted_median_path(&ens, w, 10)?;
        let band = weighted_band(&ens, w, 0.5, BandSide::Upper, 10)?;
        println!(
            "{name:11}: weight on the realized scenario {:.3}, median h=31 {:6.2}, upper band {:6.2} (truth {:6.2})",
            w[17],
            tail[tail.len() - 1],
            band.values[band.values.len() - 1],
            ens.paths[17][30]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
