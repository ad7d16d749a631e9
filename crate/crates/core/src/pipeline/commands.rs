use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::artifacts::{from_cbor, to_cbor, Manifest, Recorder, Workspace};
use super::config::{DataSource, RunConfig, ENSEMBLE_LABELS};
use super::store::*;
use crate::bands::{build_band, weighted_median_path, BandSide};
use crate::ensembles::{
    fundamental_ensemble, historical_ensemble, increments, naive_draw_indices,
    select_scenarios_svs, svs_weights, training_scenarios, EnsembleKind, ScenarioEnsemble,
};
use crate::error::{Error, Result};
use crate::features::{assemble_raw, ScenarioFill};
use crate::market_data::{aggregate_vwap, generate_synthetic_market, DeliveryId, MarketData};
use crate::market_data::{
    load_auction_prices, load_fundamentals, load_transactions, write_auction_prices,
    write_fundamentals, write_transactions,
};
use crate::metrics::{
    per_quantile_pinball, quantile_levels, EvalReport, ForecastScores, StrategyScores,
};
use crate::path_forecast::{fit_for_day, forecast_path, standard_origin, ModelSet, PathModel};
use crate::rng;
use crate::stats;
use crate::strategies::{
    crystal_ball, grid_search, naive_endpoints, simulate_strategy, Agent, CalibrationCase,
    NaiveVariant, StrategySpec, TradeOutcome, TradeSide,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Ingest,
    Fit,
    Forecast,
    Backtest,
    Gridsearch,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Ingest => "ingest",
            Command::Fit => "fit",
            Command::Forecast => "forecast",
            Command::Backtest => "backtest",
            Command::Gridsearch => "gridsearch",
            Command::Report => "report",
        }
    }
}

/// Validate the config and run one command against the workspace.
pub fn run_command(command: Command, cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    cfg.validate()?;
    match command {
        Command::Synth => synth(cfg, ws),
        Command::Ingest => ingest(cfg, ws),
        Command::Fit => fit(cfg, ws),
        Command::Forecast => forecast(cfg, ws),
        Command::Backtest => backtest(cfg, ws),
        Command::Gridsearch => gridsearch(cfg, ws),
        Command::Report => report(cfg, ws),
    }
}

/// Run every command in order.
pub fn run_all(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<Manifest>> {
    let mut out = Vec::new();
    let mut steps = Vec::new();
    if cfg.data.source == DataSource::Synthetic {
        steps.push(Command::Synth);
    }
    steps.extend([Command::Ingest, Command::Fit, Command::Forecast]);
    if cfg.backtest.use_gridsearch {
        steps.push(Command::Gridsearch);
    }
    steps.extend([Command::Backtest, Command::Report]);
    for c in steps {
        out.push(run_command(c, cfg, ws)?);
    }
    Ok(out)
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn synth(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let market = generate_synthetic_market(&cfg.synthetic_market())?;
    let mut rec = Recorder::new(ws, "synth");
    rec.write(
        "data/transactions.csv",
        &csv_bytes(|b| write_transactions(b, &market.transactions))?,
    )?;
    rec.write(
        "data/fundamentals.csv",
        &csv_bytes(|b| write_fundamentals(b, &market.fundamentals))?,
    )?;
    rec.write(
        "data/auction_prices.csv",
        &csv_bytes(|b| write_auction_prices(b, &market.auction_prices))?,
    )?;
    rec.finish(&cfg.hash(), cfg.seed)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn ingest(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let mut rec = Recorder::new(ws, "ingest");
    let (tx, fu, au) = match cfg.data.source {
        DataSource::Synthetic => {
            rec.inputs_from(&ws.require("synth")?);
            (
                Some(ws.path("data/transactions.csv")),
                Some(ws.path("data/fundamentals.csv")),
                Some(ws.path("data/auction_prices.csv")),
            )
        }
        DataSource::Csv => (
            cfg.data.transactions.clone(),
            cfg.data.fundamentals.clone(),
            cfg.data.auction_prices.clone(),
        ),
    };
    let (tx, fu) = (tx.expect("validated"), fu.expect("validated"));
    for p in [Some(&tx), Some(&fu), au.as_ref()].into_iter().flatten() {
        rec.external_input(p)?;
    }
    let trades = load_transactions(open(&tx)?)?;
    let fundamentals = load_fundamentals(open(&fu)?)?;
    let auctions: BTreeMap<DeliveryId, f64> = match &au {
        Some(p) => load_auction_prices(open(p)?)?.into_iter().collect(),
        None => BTreeMap::new(),
    };
    let mut by_delivery: BTreeMap<DeliveryId, Vec<_>> = BTreeMap::new();
    for t in trades {
        by_delivery.entry(t.delivery).or_default().push(t);
    }
    let deliveries: BTreeSet<DeliveryId> =
        by_delivery.keys().chain(auctions.keys()).copied().collect();
    let deliveries: Vec<DeliveryId> = deliveries.into_iter().collect();
    let grids = deliveries
        .par_iter()
        .map(|d| {
            let trades = by_delivery.get(d).map_or(&[][..], Vec::as_slice);
            let auction = auctions.get(d).copied().unwrap_or(f64::NAN);
            aggregate_vwap(trades, *d, auction, &cfg.clock)
        })
        .collect::<Result<Vec<_>>>()?;
    for f in &fundamentals {
        f.validate()?;
    }
    let store = MarketStore {
        clock: cfg.clock,
        grids,
        fundamentals,
    };
    let data = store.clone().into_market_data();
    let days: BTreeSet<NaiveDate> = data.days().into_iter().collect();
    for day in cfg.plan.test_days() {
        if !days.contains(&day) {
            return Err(config_err(
                "plan.last_test_day",
                format!("test day {day} has no deliveries in the data"),
            ));
        }
    }
    rec.write("store/market.cbor", &to_cbor(MARKET_FORMAT, &store)?)?;
    rec.finish(&cfg.hash(), cfg.seed)
}

fn load_market(ws: &Workspace) -> Result<MarketData> {
    let store: MarketStore = from_cbor(MARKET_FORMAT, &ws.read("store/market.cbor", "ingest")?)?;
    Ok(store.into_market_data())
}

fn fit(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let mut rec = Recorder::new(ws, "fit");
    rec.inputs_from(&ws.require("ingest")?);
    let data = load_market(ws)?;
    cfg.features
        .validate(Some(&data))
        .map_err(|e| config_err("features", e.to_string()))?;
    for day in cfg.plan.test_days() {
        let models = fit_for_day(
            &cfg.features,
            &data,
            cfg.plan.train_start,
            day,
            &cfg.forecast,
        )?;
        rec.write(&day_file("models", day), &to_cbor(MODELS_FORMAT, &models)?)?;
    }
    rec.finish(&cfg.hash(), cfg.seed)
}

fn model_key(models: &ModelSet, quarter: u8) -> u8 {
    match models {
        ModelSet::Pooled(_) => 0,
        ModelSet::PerQuarter(_) => quarter,
    }
}

/// Increment trajectories of a model's training deliveries.
fn increment_history(model: &PathModel, data: &MarketData) -> Result<Vec<Vec<f64>>> {
    model
        .training_origins
        .iter()
        .map(|o| {
            let grid = data
                .grid(o.delivery)
                .ok_or_else(|| Error::Artifact(format!("no grid for {}", o.delivery)))?;
            let path = grid.path_after(o.index, model.horizon).ok_or_else(|| {
                Error::Artifact(format!("grid of {} shorter than the horizon", o.delivery))
            })?;
            let base = grid.prices[o.index];
            Ok(increments(
                &path.iter().map(|p| p - base).collect::<Vec<_>>(),
            ))
        })
        .collect()
}

fn svs_subset(
    label: &str,
    of: &str,
    full: &ScenarioEnsemble,
    weights: &[f64],
    cfg: &RunConfig,
) -> Result<StoredEnsemble> {
    let sel = select_scenarios_svs(weights, full, &cfg.ensembles.svs)?;
    let n = sel.ranking.selected_count;
    Ok(StoredEnsemble {
        label: label.into(),
        kind: full.kind,
        body: EnsembleBody::Subset {
            of: of.into(),
            indices: sel.ranking.order[..n].to_vec(),
        },
        svs: Some(SvsSummary {
            full: full.len(),
            selected: n,
            undersized: sel.undersized,
        }),
    })
}

fn forecast_delivery(
    cfg: &RunConfig,
    data: &MarketData,
    models: &ModelSet,
    delivery: DeliveryId,
    history_len: usize,
) -> Result<DeliveryRecord> {
    let model = models
        .for_quarter(delivery.quarter)
        .ok_or_else(|| Error::Artifact(format!("no model for quarter {}", delivery.quarter)))?;
    let origin = standard_origin(data, delivery).expect("delivery has a grid");
    let grid = data.grid(delivery).expect("delivery has a grid");
    let h = cfg.forecast.horizon;
    let realized = grid
        .path_after(origin.index, h)
        .ok_or_else(|| Error::Artifact(format!("grid of {delivery} shorter than the horizon")))?
        .to_vec();
    let last_price = grid.prices[origin.index];
    let point = forecast_path(model, &cfg.features, data, origin)?;
    let n_train = model.n_train();
    let identity: Vec<usize> = (0..n_train).collect();
    let weights = if cfg.ensembles.historical || cfg.ensembles.fundamental {
        svs_weights(&model.models, &identity)?
    } else {
        Vec::new()
    };
    let mut ensembles = Vec::new();
    if cfg.ensembles.historical {
        let full = historical_ensemble(&point, &model.residuals)?;
        ensembles.push(svs_subset(
            "historical_svs",
            "historical",
            &full,
            &weights,
            cfg,
        )?);
        ensembles.push(StoredEnsemble {
            label: "historical".into(),
            kind: EnsembleKind::Historical,
            body: EnsembleBody::Paths(full.paths),
            svs: None,
        });
    }
    if cfg.ensembles.fundamental {
        let base = assemble_raw(&cfg.features, data, origin, ScenarioFill::Zero)?;
        let scenarios = training_scenarios(model, &cfg.features);
        let full =
            fundamental_ensemble(model, &cfg.features, &base, last_price, origin, &scenarios)?;
        ensembles.push(svs_subset(
            "fundamental_svs",
            "fundamental",
            &full,
            &weights,
            cfg,
        )?);
        ensembles.push(StoredEnsemble {
            label: "fundamental".into(),
            kind: EnsembleKind::Fundamental,
            body: EnsembleBody::Paths(full.paths),
            svs: None,
        });
    }
    if cfg.ensembles.naive_draws > 0 {
        let mut r = rng::stream(cfg.seed, "naive", &origin_key(delivery, origin.index));
        let indices = naive_draw_indices(history_len, cfg.ensembles.naive_draws, &mut r);
        ensembles.push(StoredEnsemble {
            label: "naive".into(),
            kind: EnsembleKind::Naive,
            body: EnsembleBody::NaiveDraws {
                history: model_key(models, delivery.quarter),
                indices: indices.into_iter().map(|i| i as u32).collect(),
            },
            svs: None,
        });
    }
    Ok(DeliveryRecord {
        delivery,
        origin_index: origin.index,
        last_price,
        realized,
        point: point.values,
        ensembles,
    })
}

fn origin_key(delivery: DeliveryId, index: usize) -> String {
    format!("{delivery}@{index}")
}

fn forecast(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let mut rec = Recorder::new(ws, "forecast");
    rec.inputs_from(&ws.require("ingest")?);
    rec.inputs_from(&ws.require("fit")?);
    let data = load_market(ws)?;
    let mut points = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "delivery_day".to_string(),
        "quarter".into(),
        "last_price".into(),
    ];
    header.extend((1..=cfg.forecast.horizon).map(|h| format!("h{h}")));
    points.write_record(&header).map_err(csv_err)?;
    let mut counts = csv::Writer::from_writer(Vec::new());
    counts
        .write_record([
            "delivery_day",
            "quarter",
            "ensemble",
            "full",
            "selected",
            "undersized",
        ])
        .map_err(csv_err)?;
    for day in cfg.plan.test_days() {
        let models: ModelSet =
            from_cbor(MODELS_FORMAT, &ws.read(&day_file("models", day), "fit")?)?;
        let histories: BTreeMap<u8, Vec<Vec<f64>>> = match &models {
            ModelSet::Pooled(m) => [(0, increment_history(m, &data)?)].into(),
            ModelSet::PerQuarter(map) => map
                .iter()
                .map(|(&q, m)| Ok((q, increment_history(m, &data)?)))
                .collect::<Result<_>>()?,
        };
        let deliveries: Vec<DeliveryId> = data
            .grids
            .keys()
            .filter(|d| d.day == day)
            .copied()
            .collect();
        let records = deliveries
            .par_iter()
            .map(|&d| {
                let n = histories[&model_key(&models, d.quarter)].len();
                forecast_delivery(cfg, &data, &models, d, n)
            })
            .collect::<Result<Vec<_>>>()?;
        for r in &records {
            let mut row = vec![
                r.delivery.day.to_string(),
                r.delivery.quarter.to_string(),
                fmt(r.last_price),
            ];
            row.extend(r.point.iter().map(|v| fmt(*v)));
            points.write_record(&row).map_err(csv_err)?;
            for e in &r.ensembles {
                if let Some(s) = &e.svs {
                    counts
                        .write_record([
                            r.delivery.day.to_string(),
                            r.delivery.quarter.to_string(),
                            e.label.clone(),
                            s.full.to_string(),
                            s.selected.to_string(),
                            s.undersized.to_string(),
                        ])
                        .map_err(csv_err)?;
                }
            }
        }
        let file = DayForecastFile {
            day,
            histories,
            deliveries: records,
        };
        rec.write(
            &day_file("forecasts", day),
            &to_cbor(FORECASTS_FORMAT, &file)?,
        )?;
    }
    rec.write("forecasts/points.csv", &finish_csv(points)?)?;
    rec.write("forecasts/svs_counts.csv", &finish_csv(counts)?)?;
    rec.finish(&cfg.hash(), cfg.seed)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Artifact(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Artifact(e.to_string()))
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn load_forecasts(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<DayForecastFile>> {
    cfg.plan
        .test_days()
        .into_iter()
        .map(|day| {
            from_cbor(
                FORECASTS_FORMAT,
                &ws.read(&day_file("forecasts", day), "forecast")?,
            )
        })
        .collect()
}

/// Strategy labels made unique by numbering repeats.
fn unique_labels(specs: &[StrategySpec]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    specs
        .iter()
        .map(|s| {
            let base = s.label();
            let n = seen.entry(base.clone()).or_default();
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}_{n}")
            }
        })
        .collect()
}

fn ledger_csv(rows: &[(DeliveryId, &TradeOutcome)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["delivery_day", "quarter", "actions", "prices", "profit"])
        .map_err(csv_err)?;
    for (d, o) in rows {
        let actions: Vec<String> = o
            .trades
            .iter()
            .map(|t| {
                let side = match t.side {
                    TradeSide::Buy => "buy",
                    TradeSide::Sell => "sell",
                };
                format!("{side}@{}", t.step)
            })
            .collect();
        let prices: Vec<String> = o.trades.iter().map(|t| fmt(t.price)).collect();
        w.write_record([
            d.day.to_string(),
            d.quarter.to_string(),
            actions.join(";"),
            prices.join(";"),
            fmt(o.profit),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn audit_csv(rows: &[(DeliveryId, &TradeOutcome)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "delivery_day",
        "quarter",
        "tau",
        "action",
        "plan",
        "lhs",
        "rhs",
    ])
    .map_err(csv_err)?;
    for (d, o) in rows {
        for e in &o.audit {
            let action = serde_json::to_value(e.action)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            w.write_record([
                d.day.to_string(),
                d.quarter.to_string(),
                e.tau.to_string(),
                action,
                e.plan.to_string(),
                fmt(e.lhs),
                fmt(e.rhs),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

fn scores(agent: Agent, outcomes: &[TradeOutcome]) -> Result<StrategyScores> {
    let pnl: Vec<f64> = outcomes.iter().map(|o| o.profit).collect();
    StrategyScores::from_pnl(&pnl, agent.downside_reference())
}

fn backtest(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let mut rec = Recorder::new(ws, "backtest");
    rec.inputs_from(&ws.require("forecast")?);
    let mut specs = cfg.backtest.strategies.clone();
    if cfg.backtest.use_gridsearch {
        rec.inputs_from(&ws.require("gridsearch")?);
        let best: BTreeMap<String, StrategySpec> =
            serde_json::from_slice(&ws.read("gridsearch/best.json", "gridsearch")?)
                .map_err(|e| Error::Artifact(format!("gridsearch/best.json: {e}")))?;
        for s in &mut specs {
            if let Some(b) = best.get(&s.label()) {
                *s = b.clone();
            }
        }
    }
    let labels = unique_labels(&specs);
    let files = load_forecasts(cfg, ws)?;
    let deliveries: Vec<(&DeliveryRecord, &BTreeMap<u8, Vec<Vec<f64>>>)> = files
        .iter()
        .flat_map(|f| f.deliveries.iter().map(move |d| (d, &f.histories)))
        .collect();
    let mut summary: BTreeMap<String, StrategyScores> = BTreeMap::new();
    for ens_label in &cfg.backtest.ensembles {
        // outcomes[delivery][spec]
        let outcomes = deliveries
            .par_iter()
            .map(|(d, hist)| {
                let ens = d.ensemble(ens_label, hist)?;
                specs
                    .iter()
                    .map(|s| simulate_strategy(s, &ens, &d.realized))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, (spec, label)) in specs.iter().zip(&labels).enumerate() {
            let rows: Vec<(DeliveryId, &TradeOutcome)> = deliveries
                .iter()
                .zip(&outcomes)
                .map(|((d, _), o)| (d.delivery, &o[k]))
                .collect();
            let dir = format!("backtest/{ens_label}/{label}");
            rec.write(&format!("{dir}/trades.csv"), &ledger_csv(&rows)?)?;
            if cfg.backtest.write_audit {
                rec.write(&format!("{dir}/audit.csv"), &audit_csv(&rows)?)?;
            }
            let mine: Vec<TradeOutcome> = outcomes.iter().map(|o| o[k].clone()).collect();
            summary.insert(format!("{ens_label}/{label}"), scores(spec.agent, &mine)?);
        }
    }
    for agent in [Agent::Seller, Agent::SpreadTrader] {
        type Bench = fn(Agent, &[f64]) -> Result<TradeOutcome>;
        let benches: [(&str, Bench); 3] = [
            ("crystal_ball", crystal_ball),
            ("naive_first", |a, r| {
                naive_endpoints(a, NaiveVariant::First, r)
            }),
            ("naive_last", |a, r| {
                naive_endpoints(a, NaiveVariant::Last, r)
            }),
        ];
        for (name, f) in benches {
            let outcomes = deliveries
                .iter()
                .map(|(d, _)| f(agent, &d.realized))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<(DeliveryId, &TradeOutcome)> = deliveries
                .iter()
                .zip(&outcomes)
                .map(|((d, _), o)| (d.delivery, o))
                .collect();
            let label = format!("{name}_{}", agent.label());
            rec.write(
                &format!("backtest/benchmarks/{label}/trades.csv"),
                &ledger_csv(&rows)?,
            )?;
            summary.insert(format!("benchmarks/{label}"), scores(agent, &outcomes)?);
        }
    }
    let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    json.push(b'\n');
    rec.write("backtest/summary.json", &json)?;
    rec.finish(&cfg.hash(), cfg.seed)
}

fn gridsearch(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let mut rec = Recorder::new(ws, "gridsearch");
    rec.inputs_from(&ws.require("forecast")?);
    let (first, last) = cfg.calibration_days();
    let test_days: BTreeSet<NaiveDate> = cfg.plan.test_days().into_iter().collect();
    if !test_days.contains(&first) || !test_days.contains(&last) {
        return Err(config_err(
            "gridsearch.first_day",
            format!("calibration days {first}..{last} must be test days"),
        ));
    }
    let label = &cfg.gridsearch.ensemble;
    let mut cases = Vec::new();
    for day in first.iter_days().take_while(|d| *d <= last) {
        let file: DayForecastFile = from_cbor(
            FORECASTS_FORMAT,
            &ws.read(&day_file("forecasts", day), "forecast")?,
        )?;
        for d in file
            .deliveries
            .iter()
            .step_by(cfg.gridsearch.delivery_stride)
        {
            cases.push(CalibrationCase {
                ensemble: d.ensemble(label, &file.histories)?,
                realized: d.realized.clone(),
            });
        }
    }
    let mut best: BTreeMap<String, StrategySpec> = BTreeMap::new();
    for t in &cfg.gridsearch.templates {
        let result = grid_search(&t.grid.grid(), &cases, &t.spec, cfg.gridsearch.objective)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cell",
            "scp",
            "p",
            "lambda",
            "eta",
            "total_profit",
            "downside",
            "sortino",
        ])
        .map_err(csv_err)?;
        for (i, c) in result.cells.iter().enumerate() {
            let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
            w.write_record([
                i.to_string(),
                opt(c.spec.scp),
                opt(c.spec.reweight.map(|r| r.p)),
                opt(c.spec.reweight.map(|r| r.lambda)),
                c.spec.threshold_method.label(),
                fmt(c.scores.total_profit),
                fmt(c.scores.downside),
                fmt(c.scores.sortino),
            ])
            .map_err(csv_err)?;
        }
        let name = t.spec.label();
        rec.write(&format!("gridsearch/{label}/{name}.csv"), &finish_csv(w)?)?;
        best.insert(name, result.best_cell().spec.clone());
    }
    let mut json = serde_json::to_vec_pretty(&best).expect("specs serialize");
    json.push(b'\n');
    rec.write("gridsearch/best.json", &json)?;
    rec.finish(&cfg.hash(), cfg.seed)
}

/// Running sums for the forecast scores of one ensemble.
#[derive(Default)]
struct ScoreSums {
    abs_err: f64,
    pinball: Vec<f64>,
    paths: usize,
    cells: usize,
}

impl ScoreSums {
    fn add(&mut self, median: &[f64], pinball: &[f64], realized: &[f64]) {
        let h = realized.len();
        self.abs_err += median
            .iter()
            .zip(realized)
            .map(|(m, r)| (m - r).abs())
            .sum::<f64>();
        if self.pinball.is_empty() {
            self.pinball = vec![0.0; pinball.len()];
        }
        for (s, p) in self.pinball.iter_mut().zip(pinball) {
            *s += p * h as f64;
        }
        self.paths += 1;
        self.cells += h;
    }

    fn finish(self) -> ForecastScores {
        let n = self.cells as f64;
        let per_quantile_pinball: Vec<f64> = self.pinball.iter().map(|s| s / n).collect();
        ForecastScores {
            mae: self.abs_err / n,
            crps: stats::pairwise_sum(&per_quantile_pinball) / per_quantile_pinball.len() as f64,
            per_quantile_pinball,
            paths: self.paths,
            cells: self.cells,
        }
    }
}

fn report(cfg: &RunConfig, ws: &Workspace) -> Result<Manifest> {
    let mut rec = Recorder::new(ws, "report");
    rec.inputs_from(&ws.require("forecast")?);
    rec.inputs_from(&ws.require("backtest")?);
    let files = load_forecasts(cfg, ws)?;
    let available = cfg.available_ensembles();
    let labels: Vec<&str> = ENSEMBLE_LABELS
        .iter()
        .copied()
        .filter(|l| available.contains(l))
        .collect();
    let deliveries: Vec<(&DeliveryRecord, &BTreeMap<u8, Vec<Vec<f64>>>)> = files
        .iter()
        .flat_map(|f| f.deliveries.iter().map(move |d| (d, &f.histories)))
        .collect();
    let levels = quantile_levels();
    let mut forecasts = BTreeMap::new();
    let mut selected_counts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &label in &labels {
        let per_delivery = deliveries
            .par_iter()
            .map(|(d, hist)| {
                let ens = d.ensemble(label, hist)?;
                let median = weighted_median_path(&ens, &ens.weights, 0)?;
                let pin = per_quantile_pinball(std::slice::from_ref(&ens), std::slice::from_ref(&d.realized))?;
                Ok((median, pin, ens.len()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sums = ScoreSums::default();
        for ((d, _), (median, pin, n)) in deliveries.iter().zip(&per_delivery) {
            sums.add(median, pin, &d.realized);
            selected_counts.entry(label).or_default().push(*n as f64);
        }
        forecasts.insert(label.to_string(), sums.finish());
    }
    let mut point = ScoreSums::default();
    for (d, _) in &deliveries {
        let pin: Vec<f64> = levels
            .iter()
            .map(|&a| {
                d.point
                    .iter()
                    .zip(&d.realized)
                    .map(|(q, r)| crate::metrics::pinball(*r, *q, a))
                    .sum::<f64>()
                    / d.realized.len() as f64
            })
            .collect();
        point.add(&d.point, &pin, &d.realized);
    }
    forecasts.insert("point".into(), point.finish());

    let strategies: BTreeMap<String, StrategyScores> =
        serde_json::from_slice(&ws.read("backtest/summary.json", "backtest")?)
            .map_err(|e| Error::Artifact(format!("backtest/summary.json: {e}")))?;
    let report = EvalReport {
        forecasts,
        strategies,
        deliveries: deliveries.len(),
        days: files.len(),
        steps: cfg.forecast.horizon,
    };
    let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
    json.push(b'\n');
    rec.write("report/metrics.json", &json)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["level".to_string()];
    let columns: Vec<&str> = labels.iter().copied().chain(["point"]).collect();
    header.extend(columns.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (i, a) in levels.iter().enumerate() {
        let mut row = vec![format!("{a:.2}")];
        row.extend(
            columns
                .iter()
                .map(|l| fmt(report.forecasts[*l].per_quantile_pinball[i])),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    rec.write("report/pinball.csv", &finish_csv(w)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ensemble", "min", "q25", "median", "mean", "q75", "max"])
        .map_err(csv_err)?;
    for (label, counts) in &selected_counts {
        let mut sorted = counts.clone();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| stats::quantile_sorted(&sorted, p);
        w.write_record([
            label.to_string(),
            fmt(sorted[0]),
            fmt(q(0.25)),
            fmt(q(0.5)),
            fmt(stats::pairwise_sum(&sorted) / sorted.len() as f64),
            fmt(q(0.75)),
            fmt(*sorted.last().expect("nonempty")),
        ])
        .map_err(csv_err)?;
    }
    rec.write("report/scenario_counts.csv", &finish_csv(w)?)?;

    if let (Some(last), Some(label)) = (files.last(), cfg.backtest.ensembles.first()) {
        for d in last.deliveries.iter().take(cfg.report.band_examples) {
            let ens = d.ensemble(label, &last.histories)?;
            let upper = build_band(&ens, cfg.report.band_scp, BandSide::Upper)?;
            let lower = build_band(&ens, cfg.report.band_scp, BandSide::Lower)?;
            let median = weighted_median_path(&ens, &ens.weights, 0)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["step", "realized", "point", "median", "lower", "upper"])
                .map_err(csv_err)?;
            for h in 0..d.realized.len() {
                w.write_record([
                    (h + 1).to_string(),
                    fmt(d.realized[h]),
                    fmt(d.point[h]),
                    fmt(median[h]),
                    fmt(lower.values[h]),
                    fmt(upper.values[h]),
                ])
                .map_err(csv_err)?;
            }
            let name = format!(
                "report/bands/{label}_{}_q{:02}.csv",
                d.delivery.day, d.delivery.quarter
            );
            rec.write(&name, &finish_csv(w)?)?;
        }
    }
    rec.finish(&cfg.hash(), cfg.seed)
}
