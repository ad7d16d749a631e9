// Build historical, fundamental and naive scenario ensembles around one
// forecast and reduce the first two by support vector sorting.

use intraday_paths::ensembles::{
    fundamental_ensemble, historical_ensemble, increments, naive_ensemble, select_scenarios_svs,
    svs_weights, training_scenarios, SvsConfig,
};
use intraday_paths::features::{assemble_raw, ChannelKind, ChannelSpec, FeatureSpec, ScenarioFill};
use intraday_paths::market_data::{generate_synthetic_market, MarketData, SyntheticMarketConfig};
use intraday_paths::path_forecast::{fit_for_day, forecast_path, standard_origin, ForecastConfig};
use intraday_paths::rng;

pub fn run_example() -> anyhow::Result<()> {
    let synth = SyntheticMarketConfig {
        n_days: 14,
        deliveries_per_day: 8,
        rng_seed: 11,
        ..Default::default()
    };
    let market = generate_synthetic_market(&synth)?;
    let data = MarketData::new(synth.clock, market.grids, market.fundamentals);
    let scenario = |name: &str| {
        ChannelSpec::exogenous(
            &format!("{name}_scenario"),
            ChannelKind::FundamentalScenario,
            name,
            76,
            15,
        )
    };
    let spec = FeatureSpec {
        channels: vec![
            ChannelSpec::new("last_price", ChannelKind::LastPrice),
            ChannelSpec::new("price_lags", ChannelKind::PriceDiffLags),
            scenario("load"),
            scenario("wind"),
            scenario("solar"),
        ],
        lags: vec![1, 2, 3, 6],
        horizon: 31,
    };
    let config = ForecastConfig::default();
    let days = data.days();
    let test_day = days[12];
    let models = fit_for_day(&spec, &data, days[0], test_day, &config)?;
    let delivery = *data.grids.keys().find(|d| d.day == test_day).unwrap();
    let model = models.for_quarter(delivery.quarter).unwrap();
    let origin = standard_origin(&data, delivery).unwrap();
    let grid = data.grid(delivery).unwrap();
    let last = grid.prices[origin.index];
    let point = forecast_path(model, &spec, &data, origin)?;

    let historical = historical_ensemble(&point, &model.residuals)?;
    let base = assemble_raw(&spec, &data, origin, ScenarioFill::Zero)?;
    let fundamental = fundamental_ensemble(
        model,
        &spec,
        &base,
        last,
        origin,
        &training_scenarios(model, &spec),
    )?;
    let history: Vec<Vec<f64>> = model
        .training_origins
        .iter()
        .map(|o| {
            let g = data.grid(o.delivery).unwrap();
            let path = g.path_after(o.index, 31).unwrap();
            increments(
                &path
                    .iter()
                    .map(|p| p - g.prices[o.index])
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mut draws = rng::stream(synth.rng_seed, "naive", &delivery.to_string());
    let naive = naive_ensemble(&history, last, 500, origin, &mut draws)?;

    let identity: Vec<usize> = (0..model.n_train()).collect();
    let weights = svs_weights(&model.models, &identity)?;
    let svs = SvsConfig::default();
    for ens in [&historical, &fundamental] {
        let sel = select_scenarios_svs(&weights, ens, &svs)?;
        println!(
            "{:11} {:4} scenarios, SVS keeps {:3} (undersized: {})",
            ens.kind.label(),
            ens.len(),
            sel.ensemble.len(),
            sel.undersized
        );
    }
    println!("{:11} {:4} scenarios", naive.kind.label(), naive.len());
    let spread = |e: &intraday_paths::ensembles::ScenarioEnsemble| {
        let end = e.step(30);
        end.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - end.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    println!(
        "range at h=31: historical {:.2}, fundamental {:.2}, naive {:.2}",
        spread(&historical),
        spread(&fundamental),
        spread(&naive)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
