//! Market data: raw transactions, the 5-minute VWAP grid, fundamental series
//! and a synthetic market generator.
//!
//! All timestamps are UTC. Delivery products are addressed by market-local day
//! and quarter; [`MarketClock`] carries the fixed market offset that maps them
//! onto UTC minutes.

mod csv_io;
mod synthetic;
mod vwap;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{
    load_auction_prices, load_csv, load_fundamentals, load_supply_curves, load_transactions,
    write_auction_prices, write_fundamentals, write_transactions, CsvRecords, SchemaKind,
};
pub use synthetic::{
    composite_error, generate_synthetic_market, price_response, SyntheticMarket,
    SyntheticMarketConfig, FUNDAMENTAL_SIGNS,
};
pub use vwap::aggregate_vwap;

/// Width of one grid interval in minutes.
pub const INTERVAL_MIN: i64 = 5;
/// Trading closes this many minutes before delivery start.
pub const GATE_CLOSURE_MIN: i64 = 5;
/// Continuous trading opens this many minutes before the delivery day starts (16:00 on T-1).
pub const OPENING_LEAD_MIN: i64 = 8 * 60;
/// Forecast origin lead time before delivery start.
pub const ORIGIN_LEAD_MIN: i64 = 185;
/// Number of delivery quarters in a day.
pub const QUARTERS_PER_DAY: u8 = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeliveryId {
    pub day: NaiveDate,
    /// 1..=96
    pub quarter: u8,
}

impl DeliveryId {
    pub fn new(day: NaiveDate, quarter: u8) -> Result<Self> {
        if !(1..=QUARTERS_PER_DAY).contains(&quarter) {
            return Err(Error::InvalidParameter(format!(
                "delivery quarter {quarter} outside 1..=96"
            )));
        }
        Ok(Self { day, quarter })
    }

    /// Number of 5-minute intervals between market opening and gate closure.
    pub fn grid_len(&self) -> usize {
        ((OPENING_LEAD_MIN + 15 * (self.quarter as i64 - 1) - GATE_CLOSURE_MIN) / INTERVAL_MIN)
            as usize
    }
}

impl fmt::Display for DeliveryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/q{:02}", self.day, self.quarter)
    }
}

/// Maps market-local delivery days onto UTC minutes with a fixed offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketClock {
    /// Market local time minus UTC, in minutes (60 for CET).
    pub utc_offset_min: i64,
}

impl Default for MarketClock {
    fn default() -> Self {
        Self { utc_offset_min: 60 }
    }
}

impl MarketClock {
    /// UTC minute (since the Unix epoch) of local midnight starting `day`.
    pub fn day_start(&self, day: NaiveDate) -> i64 {
        let days = day.signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
        days.num_days() * 1440 - self.utc_offset_min
    }

    pub fn delivery_start(&self, delivery: DeliveryId) -> i64 {
        self.day_start(delivery.day) + 15 * (delivery.quarter as i64 - 1)
    }

    /// Grid origin: market opening at 16:00 local on the previous day.
    pub fn grid_origin(&self, delivery: DeliveryId) -> i64 {
        self.day_start(delivery.day) - OPENING_LEAD_MIN
    }

    /// Forecast origin minute, 185 minutes before delivery.
    pub fn origin_minute(&self, delivery: DeliveryId) -> i64 {
        self.delivery_start(delivery) - ORIGIN_LEAD_MIN
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub trade_id: String,
    pub timestamp: DateTime<Utc>,
    pub delivery: DeliveryId,
    /// EUR/MWh
    pub price: f64,
    /// MWh, strictly positive
    pub volume: f64,
    pub market_id: String,
}

/// Regular 5-minute VWAP grid for one delivery product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VwapGrid {
    pub delivery: DeliveryId,
    /// UTC minute of the grid start (16:00 local on T-1).
    pub origin_minute: i64,
    pub prices: Vec<f64>,
    pub volumes: Vec<f64>,
    pub auction_seed_price: f64,
}

impl VwapGrid {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Index of the interval whose end coincides with the forecast origin.
    pub fn origin_index(&self) -> usize {
        let lead_intervals = ((ORIGIN_LEAD_MIN - GATE_CLOSURE_MIN) / INTERVAL_MIN) as usize + 1;
        self.len() - lead_intervals
    }

    /// Realized prices at steps m+1..=m+horizon.
    pub fn path_after(&self, m: usize, horizon: usize) -> Option<&[f64]> {
        self.prices.get(m + 1..m + 1 + horizon)
    }
}

/// Fundamental variable with actuals and day-ahead forecasts on a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSeries {
    pub name: String,
    pub granularity_min: i64,
    /// UTC minute of the first sample, aligned to `granularity_min`.
    pub start_minute: i64,
    pub actuals: Vec<f64>,
    pub forecasts: Vec<f64>,
    /// Publication delay of actuals (nu), minutes.
    pub availability_delay_min: i64,
}

impl FundamentalSeries {
    pub fn validate(&self) -> Result<()> {
        if self.granularity_min <= 0 {
            return Err(Error::InvalidParameter(format!(
                "series `{}`: granularity must be positive",
                self.name
            )));
        }
        if self.availability_delay_min < 0 {
            return Err(Error::InvalidParameter(format!(
                "series `{}`: availability delay must be nonnegative",
                self.name
            )));
        }
        if self.actuals.len() != self.forecasts.len() {
            return Err(Error::ShapeMismatch(format!(
                "series `{}`: {} actuals vs {} forecasts",
                self.name,
                self.actuals.len(),
                self.forecasts.len()
            )));
        }
        Ok(())
    }

    fn index_of(&self, minute: i64) -> Option<usize> {
        let off = minute - self.start_minute;
        if off < 0 || off % self.granularity_min != 0 {
            return None;
        }
        let i = (off / self.granularity_min) as usize;
        (i < self.actuals.len()).then_some(i)
    }

    pub fn actual_at(&self, minute: i64) -> Option<f64> {
        self.index_of(minute)
            .map(|i| self.actuals[i])
            .filter(|v| v.is_finite())
    }

    pub fn forecast_at(&self, minute: i64) -> Option<f64> {
        self.index_of(minute)
            .map(|i| self.forecasts[i])
            .filter(|v| v.is_finite())
    }

    /// Forecast error `actual - forecast`.
    pub fn error_at(&self, minute: i64) -> Option<f64> {
        Some(self.actual_at(minute)? - self.forecast_at(minute)?)
    }

    /// Minute of sample `i`.
    pub fn minute_of(&self, i: usize) -> i64 {
        self.start_minute + i as i64 * self.granularity_min
    }
}

/// Latest minute at which a variable with the given publication shift and
/// granularity is known: `granularity * floor((m - shift) / granularity)`.
pub fn availability_floor(m: i64, shift: i64, granularity: i64) -> Result<i64> {
    if granularity <= 0 {
        return Err(Error::InvalidParameter(
            "granularity must be positive".into(),
        ));
    }
    if m < shift {
        return Err(Error::NotYetAvailable { minute: m, shift });
    }
    Ok(granularity * (m - shift).div_euclid(granularity))
}

/// Everything the feature assembler and the forecasting pipeline read.
#[derive(Clone, Debug, Default)]
pub struct MarketData {
    pub clock: MarketClock,
    pub grids: BTreeMap<DeliveryId, VwapGrid>,
    pub fundamentals: BTreeMap<String, FundamentalSeries>,
    day_volumes: BTreeMap<NaiveDate, Vec<f64>>,
}

impl MarketData {
    pub fn new(
        clock: MarketClock,
        grids: impl IntoIterator<Item = VwapGrid>,
        fundamentals: impl IntoIterator<Item = FundamentalSeries>,
    ) -> Self {
        let grids: BTreeMap<_, _> = grids.into_iter().map(|g| (g.delivery, g)).collect();
        let fundamentals = fundamentals
            .into_iter()
            .map(|s| (s.name.clone(), s))
            .collect();
        let mut day_volumes: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
        for g in grids.values() {
            let acc = day_volumes.entry(g.delivery.day).or_default();
            if acc.len() < g.volumes.len() {
                acc.resize(g.volumes.len(), 0.0);
            }
            for (a, v) in acc.iter_mut().zip(&g.volumes) {
                *a += v;
            }
        }
        Self {
            clock,
            grids,
            fundamentals,
            day_volumes,
        }
    }

    pub fn grid(&self, delivery: DeliveryId) -> Option<&VwapGrid> {
        self.grids.get(&delivery)
    }

    /// Total traded volume of all products of `day` in grid interval `u`
    /// (all products of one day share the grid origin).
    pub fn day_volume(&self, day: NaiveDate, u: usize) -> f64 {
        self.day_volumes
            .get(&day)
            .and_then(|v| v.get(u).copied())
            .unwrap_or(0.0)
    }

    pub fn days(&self) -> Vec<NaiveDate> {
        let mut days: Vec<NaiveDate> = self.grids.keys().map(|d| d.day).collect();
        days.dedup();
        days
    }
}
