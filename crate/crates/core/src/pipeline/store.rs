use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ensembles::{naive_from_indices, EnsembleKind, ScenarioEnsemble};
use crate::error::{Error, Result};
use crate::features::Origin;
use crate::market_data::{DeliveryId, FundamentalSeries, MarketClock, MarketData, VwapGrid};

pub const MARKET_FORMAT: &str = "intraday-paths/market-store";
pub const MODELS_FORMAT: &str = "intraday-paths/day-models";
pub const FORECASTS_FORMAT: &str = "intraday-paths/day-forecasts";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketStore {
    pub clock: MarketClock,
    pub grids: Vec<VwapGrid>,
    pub fundamentals: Vec<FundamentalSeries>,
}

impl MarketStore {
    pub fn into_market_data(self) -> MarketData {
        MarketData::new(self.clock, self.grids, self.fundamentals)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvsSummary {
    pub full: usize,
    pub selected: usize,
    pub undersized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnsembleBody {
    Paths(Vec<Vec<f64>>),
    /// Paths of another stored ensemble, in this order.
    Subset {
        of: String,
        indices: Vec<usize>,
    },
    /// Draws from the increment history of the delivery's model.
    NaiveDraws {
        history: u8,
        indices: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredEnsemble {
    pub label: String,
    pub kind: EnsembleKind,
    pub body: EnsembleBody,
    pub svs: Option<SvsSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub delivery: DeliveryId,
    pub origin_index: usize,
    pub last_price: f64,
    pub realized: Vec<f64>,
    pub point: Vec<f64>,
    pub ensembles: Vec<StoredEnsemble>,
}

impl DeliveryRecord {
    pub fn origin(&self) -> Origin {
        Origin {
            delivery: self.delivery,
            index: self.origin_index,
        }
    }

    fn stored(&self, label: &str) -> Result<&StoredEnsemble> {
        self.ensembles
            .iter()
            .find(|e| e.label == label)
            .ok_or_else(|| Error::Artifact(format!("{}: no ensemble `{label}`", self.delivery)))
    }

    pub fn ensemble(
        &self,
        label: &str,
        histories: &BTreeMap<u8, Vec<Vec<f64>>>,
    ) -> Result<ScenarioEnsemble> {
        let stored = self.stored(label)?;
        let provenance = |n: usize| (0..n).map(|i| format!("train {i}")).collect();
        match &stored.body {
            EnsembleBody::Paths(paths) => ScenarioEnsemble::uniform(
                self.origin(),
                stored.kind,
                paths.clone(),
                provenance(paths.len()),
            ),
            EnsembleBody::Subset { of, indices } => {
                let EnsembleBody::Paths(paths) = &self.stored(of)?.body else {
                    return Err(Error::Artifact(format!("`{of}` is not a path ensemble")));
                };
                let picked = indices
                    .iter()
                    .map(|&i| {
                        paths.get(i).cloned().ok_or_else(|| {
                            Error::Artifact(format!("subset index {i} outside `{of}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ScenarioEnsemble::uniform(
                    self.origin(),
                    stored.kind,
                    picked,
                    indices.iter().map(|i| format!("train {i}")).collect(),
                )
            }
            EnsembleBody::NaiveDraws { history, indices } => {
                let h = histories
                    .get(history)
                    .ok_or_else(|| Error::Artifact(format!("no increment history {history}")))?;
                let idx: Vec<usize> = indices.iter().map(|&i| i as usize).collect();
                naive_from_indices(h, self.last_price, &idx, self.origin())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayForecastFile {
    pub day: NaiveDate,
    /// Increment trajectories per model key (quarter, or 0 for a pooled model).
    pub histories: BTreeMap<u8, Vec<Vec<f64>>>,
    pub deliveries: Vec<DeliveryRecord>,
}

pub fn day_file(prefix: &str, day: NaiveDate) -> String {
    format!("{prefix}/{day}.cbor")
}
