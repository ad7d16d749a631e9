//! Deterministic synthetic intraday market.
//!
//! Each delivery follows a mean-reverting walk around a daily level and a
//! quarter-of-day shape, plus a linear response to the composite forecast error
//! of the fundamentals. Errors are AR(1) at 15-minute resolution, so the spread
//! between the last known error and future errors widens with the horizon.

use chrono::{DateTime, Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    aggregate_vwap, DeliveryId, FundamentalSeries, MarketClock, TransactionRecord, VwapGrid,
    INTERVAL_MIN, QUARTERS_PER_DAY,
};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Fundamental series generated by the synthetic market and the sign with
/// which their forecast error moves prices.
pub const FUNDAMENTAL_SIGNS: [(&str, f64); 3] = [("load", 1.0), ("wind", -1.0), ("solar", -1.0)];

const QUARTER_HOUR_DELAY: i64 = 76;
const HOURLY_DELAY: i64 = 181;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMarketConfig {
    pub start_day: NaiveDate,
    pub n_days: usize,
    /// Evenly spaced quarters per day; must divide 96.
    pub deliveries_per_day: usize,
    pub base_price: f64,
    /// Standard deviation of walk innovations per 5-minute step, EUR/MWh.
    pub volatility: f64,
    pub mean_reversion: f64,
    /// EUR/MWh per unit of composite fundamental forecast error.
    pub fundamental_effect: f64,
    /// Stationary standard deviation of each fundamental forecast error.
    pub forecast_error_scale: f64,
    /// AR(1) coefficient of forecast errors per 15 minutes.
    pub error_persistence: f64,
    /// Expected trades per interval right before gate closure.
    pub trade_rate: f64,
    pub rng_seed: u64,
    pub clock: MarketClock,
}

impl Default for SyntheticMarketConfig {
    fn default() -> Self {
        Self {
            start_day: NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(),
            n_days: 30,
            deliveries_per_day: 96,
            base_price: 40.0,
            volatility: 0.8,
            mean_reversion: 0.02,
            fundamental_effect: 1.5,
            forecast_error_scale: 1.0,
            error_persistence: 0.97,
            trade_rate: 2.0,
            rng_seed: 1,
            clock: MarketClock::default(),
        }
    }
}

impl SyntheticMarketConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_days == 0 {
            return bad("n_days must be positive");
        }
        if self.deliveries_per_day == 0 || 96 % self.deliveries_per_day != 0 {
            return bad("deliveries_per_day must divide 96");
        }
        if !(self.volatility >= 0.0) {
            return bad("volatility must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.mean_reversion) {
            return bad("mean_reversion must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.error_persistence) {
            return bad("error_persistence must lie in [0, 1)");
        }
        if !(self.forecast_error_scale >= 0.0) || !(self.trade_rate >= 0.0) {
            return bad("forecast_error_scale and trade_rate must be nonnegative");
        }
        Ok(())
    }

    pub fn quarters(&self) -> Vec<u8> {
        let step = 96 / self.deliveries_per_day;
        (0..self.deliveries_per_day)
            .map(|j| (1 + j * step) as u8)
            .collect()
    }

    pub fn days(&self) -> Vec<NaiveDate> {
        (0..self.n_days)
            .map(|i| self.start_day + Duration::days(i as i64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticMarket {
    pub transactions: Vec<TransactionRecord>,
    pub auction_prices: Vec<(DeliveryId, f64)>,
    pub grids: Vec<VwapGrid>,
    pub fundamentals: Vec<FundamentalSeries>,
}

/// Price path as walk plus a linear response to forecast errors.
pub fn price_response(walk: &[f64], errors: &[f64], effect: f64) -> Vec<f64> {
    walk.iter()
        .zip(errors)
        .map(|(w, e)| w + effect * e)
        .collect()
}

/// Signed sum of forecast errors of the price-relevant fundamentals at `minute`
/// (read at the 15-minute sample containing it).
pub fn composite_error(fundamentals: &[FundamentalSeries], minute: i64) -> f64 {
    FUNDAMENTAL_SIGNS
        .iter()
        .filter_map(|(name, sign)| {
            let s = fundamentals.iter().find(|s| s.name == *name)?;
            let t = s.granularity_min * minute.div_euclid(s.granularity_min);
            s.error_at(t).map(|e| sign * e)
        })
        .sum()
}

fn fundamental_series(cfg: &SyntheticMarketConfig) -> Vec<FundamentalSeries> {
    let first = cfg.clock.day_start(cfg.start_day - Duration::days(2));
    let last = cfg
        .clock
        .day_start(cfg.start_day + Duration::days(cfg.n_days as i64 + 1));
    let mut out = Vec::new();
    let profiles: [(&str, i64, i64, f64); 4] = [
        ("load", 15, QUARTER_HOUR_DELAY, 50.0),
        ("wind", 15, QUARTER_HOUR_DELAY, 20.0),
        ("solar", 15, QUARTER_HOUR_DELAY, 12.0),
        ("flow_fr", 60, HOURLY_DELAY, 2.0),
    ];
    for (name, gran, delay, level) in profiles {
        let start = gran * first.div_euclid(gran);
        let n = ((last - start) / gran) as usize;
        let mut rng = stream(cfg.rng_seed, "synth-fundamental", name);
        let phi = cfg.error_persistence.powf(gran as f64 / 15.0);
        let innov = cfg.forecast_error_scale * (1.0 - phi * phi).sqrt();
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut err = cfg.forecast_error_scale * noise.sample(&mut rng);
        let mut actuals = Vec::with_capacity(n);
        let mut forecasts = Vec::with_capacity(n);
        for i in 0..n {
            let minute = start + i as i64 * gran;
            let local = (minute + cfg.clock.utc_offset_min).rem_euclid(1440) as f64;
            let phase = 2.0 * std::f64::consts::PI * local / 1440.0;
            let actual = match name {
                "load" => level + 10.0 * (phase - std::f64::consts::FRAC_PI_2).sin(),
                "solar" => (level * (phase - std::f64::consts::FRAC_PI_2).sin()).max(0.0),
                _ => level + 0.5 * level * (phase / 2.0).cos(),
            };
            if i > 0 {
                err = phi * err + innov * noise.sample(&mut rng);
            }
            actuals.push(actual);
            forecasts.push(actual - err);
        }
        out.push(FundamentalSeries {
            name: name.to_string(),
            granularity_min: gran,
            start_minute: start,
            actuals,
            forecasts,
            availability_delay_min: delay,
        });
    }
    out
}

fn simulate_delivery(
    cfg: &SyntheticMarketConfig,
    delivery: DeliveryId,
    day_level: f64,
    fundamentals: &[FundamentalSeries],
) -> (Vec<TransactionRecord>, f64) {
    let key = delivery.to_string();
    let mut rng = stream(cfg.rng_seed, "synth-delivery", &key);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let size = Exp::new(0.5_f64).unwrap();
    let origin = cfg.clock.grid_origin(delivery);
    let start = cfg.clock.delivery_start(delivery);
    let len = delivery.grid_len();
    let phase = 2.0 * std::f64::consts::PI * (delivery.quarter as f64 - 1.0) / 96.0;
    let level = cfg.base_price + day_level + 4.0 * cfg.volatility * (phase - 1.2).sin();

    let mut walk = Vec::with_capacity(len);
    let mut errors = Vec::with_capacity(len);
    let mut x = 0.0;
    for u in 0..len {
        if u > 0 {
            x = (1.0 - cfg.mean_reversion) * x + cfg.volatility * noise.sample(&mut rng);
        }
        walk.push(level + x);
        errors.push(composite_error(
            fundamentals,
            origin + u as i64 * INTERVAL_MIN,
        ));
    }
    let latent = price_response(&walk, &errors, cfg.fundamental_effect);
    let auction = latent[0];

    let mut trades = Vec::new();
    for (u, &p) in latent.iter().enumerate() {
        let interval_start = origin + u as i64 * INTERVAL_MIN;
        let ttd = (start - interval_start) as f64;
        let rate = cfg.trade_rate * (-ttd / 240.0).exp();
        let k = if rate > 0.0 {
            Poisson::new(rate).unwrap().sample(&mut rng) as usize
        } else {
            0
        };
        for j in 0..k {
            let sec = rng.random_range(0..INTERVAL_MIN * 60);
            let price = p + 0.3 * cfg.volatility * noise.sample(&mut rng);
            let draw: f64 = size.sample(&mut rng);
            let volume = ((0.1 + draw) * 10.0).round() / 10.0;
            trades.push(TransactionRecord {
                trade_id: format!("{}-{:02}-{:03}-{}", delivery.day, delivery.quarter, u, j),
                timestamp: DateTime::from_timestamp(interval_start * 60 + sec, 0).unwrap(),
                delivery,
                price,
                volume: volume.max(0.1),
                market_id: "SYN".into(),
            });
        }
    }
    (trades, auction)
}

/// Generate a synthetic market. Pure function of `cfg`, including the seed.
pub fn generate_synthetic_market(cfg: &SyntheticMarketConfig) -> Result<SyntheticMarket> {
    cfg.validate()?;
    let fundamentals = fundamental_series(cfg);
    let mut transactions = Vec::new();
    let mut auction_prices = Vec::new();
    let mut grids = Vec::new();
    for day in cfg.days() {
        let mut rng = stream(cfg.rng_seed, "synth-day", &day.to_string());
        let day_level = 3.0 * cfg.volatility * Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
        for q in cfg.quarters() {
            let delivery = DeliveryId::new(day, q)?;
            debug_assert!(q <= QUARTERS_PER_DAY);
            let (trades, auction) = simulate_delivery(cfg, delivery, day_level, &fundamentals);
            grids.push(aggregate_vwap(&trades, delivery, auction, &cfg.clock)?);
            auction_prices.push((delivery, auction));
            transactions.extend(trades);
        }
    }
    Ok(SyntheticMarket {
        transactions,
        auction_prices,
        grids,
        fundamentals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticMarketConfig {
        SyntheticMarketConfig {
            n_days: 2,
            deliveries_per_day: 4,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_dynamics_give_constant_paths() {
        let cfg = SyntheticMarketConfig {
            volatility: 0.0,
            fundamental_effect: 0.0,
            ..small()
        };
        let m = generate_synthetic_market(&cfg).unwrap();
        for g in &m.grids {
            assert!(
                g.prices.iter().all(|&p| p == cfg.base_price),
                "{}",
                g.delivery
            );
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_synthetic_market(&small()).unwrap();
        let b = generate_synthetic_market(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_market(&SyntheticMarketConfig {
            rng_seed: 2,
            ..small()
        })
        .unwrap();
        assert_ne!(a.grids, c.grids);
    }

    #[test]
    fn injected_error_shifts_price_one_for_one() {
        let walk = vec![40.0; 10];
        let zero = vec![0.0; 10];
        let mut injected = zero.clone();
        injected[6] = 5.0;
        let base = price_response(&walk, &zero, 1.0);
        let shifted = price_response(&walk, &injected, 1.0);
        for h in 0..10 {
            let expected = if h == 6 { 5.0 } else { 0.0 };
            assert_eq!(shifted[h] - base[h], expected);
        }
    }

    #[test]
    fn zero_error_scale_removes_fundamental_component() {
        let with = generate_synthetic_market(&small()).unwrap();
        let without = generate_synthetic_market(&SyntheticMarketConfig {
            forecast_error_scale: 0.0,
            ..small()
        })
        .unwrap();
        // the walk is identical, only the response term differs
        for s in &without.fundamentals {
            assert!(s.actuals.iter().zip(&s.forecasts).all(|(a, f)| a == f));
        }
        assert_eq!(with.grids.len(), without.grids.len());
    }

    #[test]
    fn config_validation() {
        assert!(SyntheticMarketConfig {
            deliveries_per_day: 7,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticMarketConfig {
            mean_reversion: 1.5,
            ..small()
        }
        .validate()
        .is_err());
        assert_eq!(small().quarters(), vec![1, 25, 49, 73]);
    }
}
