// Walk-forward path forecasts on a small synthetic market: fit on all days
// before the test day, forecast every delivery of the test day at its
// standard origin and compare with the realized path.

use intraday_paths::features::{ChannelKind, ChannelSpec, FeatureSpec};
use intraday_paths::market_data::{generate_synthetic_market, MarketData, SyntheticMarketConfig};
use intraday_paths::path_forecast::{fit_for_day, forecast_path, standard_origin, ForecastConfig};

pub fn run_example() -> anyhow::Result<()> {
    let synth = SyntheticMarketConfig {
        n_days: 10,
        deliveries_per_day: 4,
        rng_seed: 5,
        ..Default::default()
    };
    let market = generate_synthetic_market(&synth)?;
    let data = MarketData::new(synth.clock, market.grids, market.fundamentals);

    let spec = FeatureSpec {
        channels: vec![
            ChannelSpec::new("last_price", ChannelKind::LastPrice),
            ChannelSpec::new("price_lags", ChannelKind::PriceDiffLags),
            ChannelSpec::new("volume_lags", ChannelKind::VolumeDiffLags),
            ChannelSpec::new("weekday", ChannelKind::Weekday),
        ],
        lags: vec![1, 2, 3, 6, 12],
        horizon: 31,
    };
    let config = ForecastConfig::default();
    let days = data.days();
    let test_day = days[8];
    let models = fit_for_day(&spec, &data, days[0], test_day, &config)?;

    for (&delivery, grid) in data.grids.range(..).filter(|(d, _)| d.day == test_day) {
        let model = models.for_quarter(delivery.quarter).expect("pooled model");
        let origin = standard_origin(&data, delivery).unwrap();
        let forecast = forecast_path(model, &spec, &data, origin)?;
        let realized = grid.path_after(origin.index, config.horizon).unwrap();
        let mae = forecast
            .values
            .iter()
            .zip(realized)
            .map(|(f, r)| (f - r).abs())
            .sum::<f64>()
            / realized.len() as f64;
        println!(
            "{delivery}: last {:6.2}  forecast h1 {:6.2} h31 {:6.2}  realized h31 {:6.2}  MAE {:.3}",
            grid.prices[origin.index],
            forecast.values[0],
            forecast.values[30],
            realized[30],
            mae
        );
    }
    println!(
        "trained on {} rows",
        models.for_quarter(1).unwrap().n_train()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
