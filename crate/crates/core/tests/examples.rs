//! Every runnable example must run to completion.

macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect($file);
        }
    };
}

example!(
    vwap_aggregation,
    vwap_aggregation_runs,
    "vwap_aggregation.rs"
);
example!(corrected_svr, corrected_svr_runs, "corrected_svr.rs");
example!(path_forecast, path_forecast_runs, "path_forecast.rs");
example!(
    scenario_ensembles,
    scenario_ensembles_runs,
    "scenario_ensembles.rs"
);
example!(
    prediction_bands,
    prediction_bands_runs,
    "prediction_bands.rs"
);
example!(
    trading_strategies,
    trading_strategies_runs,
    "trading_strategies.rs"
);
example!(
    forecast_evaluation,
    forecast_evaluation_runs,
    "forecast_evaluation.rs"
);
example!(
    merit_order_slope,
    merit_order_slope_runs,
    "merit_order_slope.rs"
);
example!(grid_search, grid_search_runs, "grid_search.rs");
example!(full_pipeline, full_pipeline_runs, "full_pipeline.rs");
