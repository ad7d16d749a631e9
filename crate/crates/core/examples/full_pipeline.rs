// Run every pipeline command on a tiny synthetic market inside a temporary
// directory and print the headline metrics.

use intraday_paths::metrics::EvalReport;
use intraday_paths::pipeline::{run_all, RunConfig, Workspace};

const CONFIG: &str = r#"
seed = 3

[synthetic]
start_day = "2020-01-06"
n_days = 8
deliveries_per_day = 4

[plan]
train_start = "2020-01-06"
first_test_day = "2020-01-12"
last_test_day = "2020-01-13"

[features]
lags = [1, 2, 3, 6]
channels = [
  { name = "last_price", kind = "last_price" },
  { name = "price_lags", kind = "price_diff_lags" },
  { name = "load_scenario", kind = "fundamental_scenario", source = "load", shift_min = 76 },
]

[ensembles]
naive_draws = 100
"#;

pub fn run_example() -> anyhow::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    let dir = tempfile::tempdir()?;
    let ws = Workspace::new(dir.path());
    for m in run_all(&cfg, &ws)? {
        println!("{:9} {:3} outputs", m.command, m.outputs.len());
    }
    let report: EvalReport =
        serde_json::from_slice(&std::fs::read(ws.path("report/metrics.json"))?)?;
    for (name, s) in &report.forecasts {
        println!("{name:16} MAE {:.3}  CRPS {:.3}", s.mae, s.crps);
    }
    for key in [
        "historical_svs/seller_median_static",
        "historical_svs/spread_median_kernel",
    ] {
        let s = &report.strategies[key];
        println!(
            "{key:38} profit {:8.2}  Sortino {:.3}",
            s.total_profit, s.sortino
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
