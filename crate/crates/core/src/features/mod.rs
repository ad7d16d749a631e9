//! Feature assembly at a forecast origin.
//!
//! Price and volume channels come from the delivery's own VWAP grid up to the
//! origin interval. Exogenous channels are read at the latest native-grid
//! point published before the origin. Standardization is fitted on training
//! rows and applied column-wise.

mod merit_order;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{availability_floor, DeliveryId, MarketData, VwapGrid, INTERVAL_MIN};

pub use merit_order::{merit_order_slope, Bid, Side, SupplyCurve, PRICE_BOUNDS};

/// P'(u) = P(u) - P(m).
pub fn difference_path(prices: &[f64], m: usize) -> Result<Vec<f64>> {
    let base = *prices
        .get(m)
        .ok_or_else(|| Error::InvalidParameter(format!("origin {m} outside path")))?;
    Ok(prices.iter().map(|p| p - base).collect())
}

/// Standardize with the population standard deviation. A zero-variance input
/// maps to zeros with std recorded as 1.
pub fn standardize(values: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("path"));
    }
    let (mean, std) = moments(values.iter().copied());
    Ok((values.iter().map(|v| (v - mean) / std).collect(), mean, std))
}

pub fn destandardize(values: &[f64], mean: f64, std: f64) -> Vec<f64> {
    values.iter().map(|z| mean + std * z).collect()
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let mean = crate::stats::mean(&v);
    let std = crate::stats::std_pop(&v);
    let std = if std > 0.0 && std.is_finite() {
        std
    } else {
        1.0
    };
    (mean, std)
}

/// Column-wise standardization fitted on a set of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("training rows"))?;
        let dim = first.len();
        let mut means = Vec::with_capacity(dim);
        let mut stds = Vec::with_capacity(dim);
        for j in 0..dim {
            if let Some(r) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            let (m, s) = moments(rows.iter().map(|r| r[j]));
            means.push(m);
            stds.push(s);
        }
        Ok(Self { means, stds })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(z, (m, s))| m + s * z)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// P(m).
    LastPrice,
    /// P(m-k) - P(m) for each lag k.
    PriceDiffLags,
    /// V(m-k) - V(m) for each lag k, product volume.
    VolumeDiffLags,
    /// Product volume over the last `window` intervals (whole history if 0).
    RollingVolumeSum,
    /// Number of intervals with trades over the last `window` intervals.
    ActiveIntervalCount,
    /// Seven one-hot entries, Monday first.
    Weekday,
    /// Published actual of `source`.
    ExogenousLevel,
    /// Published actual minus forecast of `source`.
    ExogenousForecastError,
    /// Known-minus-future forecast error differences of `source` over the
    /// horizon, split into positive and negative parts. Training rows carry
    /// their realized values; at forecast time these entries are substituted.
    FundamentalScenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub kind: ChannelKind,
    #[serde(default)]
    pub source: Option<String>,
    /// Publication shift nu, minutes (exogenous channels).
    #[serde(default)]
    pub shift_min: i64,
    /// Native granularity, minutes (exogenous channels).
    #[serde(default = "default_granularity")]
    pub granularity_min: i64,
    /// Window in grid intervals (volume aggregates).
    #[serde(default)]
    pub window: usize,
}

fn default_granularity() -> i64 {
    15
}

impl ChannelSpec {
    pub fn new(name: &str, kind: ChannelKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            source: None,
            shift_min: 0,
            granularity_min: default_granularity(),
            window: 0,
        }
    }

    pub fn exogenous(name: &str, kind: ChannelKind, source: &str, shift: i64, gran: i64) -> Self {
        Self {
            source: Some(source.to_string()),
            shift_min: shift,
            granularity_min: gran,
            ..Self::new(name, kind)
        }
    }

    fn is_exogenous(&self) -> bool {
        matches!(
            self.kind,
            ChannelKind::ExogenousLevel
                | ChannelKind::ExogenousForecastError
                | ChannelKind::FundamentalScenario
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub channels: Vec<ChannelSpec>,
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    /// Horizon covered by scenario channels, in grid steps.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

fn default_lags() -> Vec<usize> {
    (1..=31).collect()
}

fn default_horizon() -> usize {
    31
}

impl Default for FeatureSpec {
    fn default() -> Self {
        let ch = ChannelSpec::new;
        Self {
            channels: vec![
                ch("last_price", ChannelKind::LastPrice),
                ch("price_lags", ChannelKind::PriceDiffLags),
                ch("volume_lags", ChannelKind::VolumeDiffLags),
                ChannelSpec {
                    window: 12,
                    ..ch("volume_1h", ChannelKind::RollingVolumeSum)
                },
                ch("active_intervals", ChannelKind::ActiveIntervalCount),
                ch("weekday", ChannelKind::Weekday),
            ],
            lags: default_lags(),
            horizon: default_horizon(),
        }
    }
}

/// Position of one channel inside the assembled vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSlot {
    pub name: String,
    pub kind: ChannelKind,
    pub start: usize,
    pub len: usize,
}

impl FeatureSpec {
    pub fn validate(&self, data: Option<&MarketData>) -> Result<()> {
        let mut names = std::collections::BTreeSet::new();
        for c in &self.channels {
            if !names.insert(&c.name) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate channel name `{}`",
                    c.name
                )));
            }
            if c.is_exogenous() {
                let src = c.source.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(format!("channel `{}` needs a source", c.name))
                })?;
                if c.granularity_min <= 0 || c.shift_min < 0 {
                    return Err(Error::InvalidParameter(format!(
                        "channel `{}`: granularity must be positive and shift nonnegative",
                        c.name
                    )));
                }
                if let Some(d) = data {
                    if !d.fundamentals.contains_key(src) {
                        return Err(Error::InvalidParameter(format!(
                            "channel `{}` references unknown series `{src}`",
                            c.name
                        )));
                    }
                }
            }
        }
        if self.lags.contains(&0) {
            return Err(Error::InvalidParameter("lags must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Number of future native-grid points covered by a scenario channel.
    pub fn scenario_points(&self, granularity_min: i64) -> usize {
        let span = INTERVAL_MIN * self.horizon as i64;
        ((span + granularity_min - 1) / granularity_min) as usize
    }

    fn channel_len(&self, c: &ChannelSpec) -> usize {
        match c.kind {
            ChannelKind::PriceDiffLags | ChannelKind::VolumeDiffLags => self.lags.len(),
            ChannelKind::Weekday => 7,
            ChannelKind::FundamentalScenario => 2 * self.scenario_points(c.granularity_min),
            _ => 1,
        }
    }

    pub fn layout(&self) -> Vec<ChannelSlot> {
        let mut start = 0;
        self.channels
            .iter()
            .map(|c| {
                let len = self.channel_len(c);
                let slot = ChannelSlot {
                    name: c.name.clone(),
                    kind: c.kind,
                    start,
                    len,
                };
                start += len;
                slot
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.channels.iter().map(|c| self.channel_len(c)).sum()
    }

    pub fn scenario_channels(&self) -> impl Iterator<Item = &ChannelSpec> {
        self.channels
            .iter()
            .filter(|c| c.kind == ChannelKind::FundamentalScenario)
    }
}

/// A forecast origin: the end of grid interval `index` of `delivery`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub delivery: DeliveryId,
    pub index: usize,
}

impl Origin {
    /// UTC minute at which the origin interval ends.
    pub fn minute(&self, grid: &VwapGrid) -> i64 {
        grid.origin_minute + (self.index as i64 + 1) * INTERVAL_MIN
    }
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.delivery, self.index)
    }
}

/// How scenario channels are filled during assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioFill {
    /// Realized differences; only valid for rows whose horizon lies in the past.
    Realized,
    /// Zeros; the scenario-free point forecast input.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub origin: Origin,
    pub values: Vec<f64>,
    pub standardization: Standardizer,
}

/// Known-minus-future forecast error differences of `series` at `origin_min`:
/// delta_known is read at the availability floor, future errors at the next
/// `points` native-grid points.
pub fn scenario_differences(
    data: &MarketData,
    channel: &ChannelSpec,
    origin_min: i64,
    points: usize,
) -> Result<Vec<f64>> {
    let name = channel.source.as_deref().unwrap_or_default();
    let series = data
        .fundamentals
        .get(name)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown series `{name}`")))?;
    let g = channel.granularity_min;
    let known_at = availability_floor(origin_min, channel.shift_min, g)?;
    let known = series.error_at(known_at).ok_or(Error::CoverageGap {
        series: name.to_string(),
        minute: known_at,
    })?;
    let base = g * origin_min.div_euclid(g);
    (1..=points as i64)
        .map(|k| {
            let t = base + k * g;
            series
                .error_at(t)
                .map(|future| known - future)
                .ok_or(Error::CoverageGap {
                    series: name.to_string(),
                    minute: t,
                })
        })
        .collect()
}

/// Sign split keeping signed values: `pos + neg` recovers the input.
pub fn sign_split(delta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        delta.iter().map(|d| d.max(0.0)).collect(),
        delta.iter().map(|d| d.min(0.0)).collect(),
    )
}

/// Raw (unstandardized) feature values at `origin`.
pub fn assemble_raw(
    spec: &FeatureSpec,
    data: &MarketData,
    origin: Origin,
    fill: ScenarioFill,
) -> Result<Vec<f64>> {
    let grid = data
        .grid(origin.delivery)
        .ok_or_else(|| Error::ChannelUnavailable {
            channel: "grid".into(),
            origin: origin.to_string(),
            reason: "no VWAP grid for delivery".into(),
        })?;
    let m = origin.index;
    if m >= grid.len() {
        return Err(Error::ChannelUnavailable {
            channel: "grid".into(),
            origin: origin.to_string(),
            reason: "origin beyond grid".into(),
        });
    }
    let t_origin = origin.minute(grid);
    let unavailable = |c: &ChannelSpec, reason: String| Error::ChannelUnavailable {
        channel: c.name.clone(),
        origin: origin.to_string(),
        reason,
    };
    let mut out = Vec::with_capacity(spec.dim());
    for c in &spec.channels {
        match c.kind {
            ChannelKind::LastPrice => out.push(grid.prices[m]),
            ChannelKind::PriceDiffLags | ChannelKind::VolumeDiffLags => {
                let series = if c.kind == ChannelKind::PriceDiffLags {
                    &grid.prices
                } else {
                    &grid.volumes
                };
                for &k in &spec.lags {
                    let u = m
                        .checked_sub(k)
                        .ok_or_else(|| unavailable(c, format!("lag {k} precedes grid start")))?;
                    out.push(series[u] - series[m]);
                }
            }
            ChannelKind::RollingVolumeSum | ChannelKind::ActiveIntervalCount => {
                let from = if c.window == 0 {
                    0
                } else {
                    (m + 1).saturating_sub(c.window)
                };
                let vols = &grid.volumes[from..=m];
                out.push(if c.kind == ChannelKind::RollingVolumeSum {
                    vols.iter().sum()
                } else {
                    vols.iter().filter(|&&v| v > 0.0).count() as f64
                });
            }
            ChannelKind::Weekday => {
                let wd = origin.delivery.day.weekday().num_days_from_monday() as usize;
                out.extend((0..7).map(|i| if i == wd { 1.0 } else { 0.0 }));
            }
            ChannelKind::ExogenousLevel | ChannelKind::ExogenousForecastError => {
                let name = c.source.as_deref().unwrap_or_default();
                let series = data
                    .fundamentals
                    .get(name)
                    .ok_or_else(|| unavailable(c, format!("unknown series `{name}`")))?;
                let t = availability_floor(t_origin, c.shift_min, c.granularity_min)
                    .map_err(|e| unavailable(c, e.to_string()))?;
                let v = if c.kind == ChannelKind::ExogenousLevel {
                    series.actual_at(t)
                } else {
                    series.error_at(t)
                };
                out.push(v.ok_or_else(|| unavailable(c, format!("no value at minute {t}")))?);
            }
            ChannelKind::FundamentalScenario => {
                let points = spec.scenario_points(c.granularity_min);
                match fill {
                    ScenarioFill::Zero => out.extend(std::iter::repeat_n(0.0, 2 * points)),
                    ScenarioFill::Realized => {
                        let d = scenario_differences(data, c, t_origin, points)
                            .map_err(|e| unavailable(c, e.to_string()))?;
                        let (pos, neg) = sign_split(&d);
                        out.extend(pos);
                        out.extend(neg);
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.len(), spec.dim());
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::ChannelUnavailable {
            channel: format!("entry {i}"),
            origin: origin.to_string(),
            reason: "non-finite value".into(),
        });
    }
    Ok(out)
}

/// Assemble and standardize with training-window statistics.
pub fn assemble_features(
    spec: &FeatureSpec,
    data: &MarketData,
    origin: Origin,
    standardizer: &Standardizer,
) -> Result<FeatureVector> {
    let raw = assemble_raw(spec, data, origin, ScenarioFill::Zero)?;
    Ok(FeatureVector {
        origin,
        values: standardizer.apply(&raw)?,
        standardization: standardizer.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{FundamentalSeries, MarketClock};
    use chrono::NaiveDate;

    fn grid(day: NaiveDate, prices: Vec<f64>, volumes: Vec<f64>) -> VwapGrid {
        let d = DeliveryId::new(day, 1).unwrap();
        VwapGrid {
            delivery: d,
            origin_minute: MarketClock::default().grid_origin(d),
            prices,
            volumes,
            auction_seed_price: 0.0,
        }
    }

    #[test]
    fn differencing() {
        assert_eq!(
            difference_path(&[10.0, 12.0, 15.0], 0).unwrap(),
            vec![0.0, 2.0, 5.0]
        );
        assert_eq!(difference_path(&[3.0; 4], 2).unwrap(), vec![0.0; 4]);
        assert!(difference_path(&[1.0], 3).is_err());
    }

    #[test]
    fn standardization_conventions() {
        let (z, m, s) = standardize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((z, m, s), (vec![0.0; 3], 1.0, 1.0));
        let (z, m, s) = standardize(&[0.0, 2.0]).unwrap();
        assert_eq!((z, m, s), (vec![-1.0, 1.0], 1.0, 1.0));
        assert!(standardize(&[]).is_err());
    }

    #[test]
    fn weekday_and_last_price() {
        let monday = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let mut prices = vec![40.0; 95];
        prices[58] = 50.0;
        let g = grid(monday, prices, vec![0.0; 95]);
        let d = g.delivery;
        let data = MarketData::new(MarketClock::default(), [g], []);
        let spec = FeatureSpec {
            channels: vec![
                ChannelSpec::new("p", ChannelKind::LastPrice),
                ChannelSpec::new("wd", ChannelKind::Weekday),
            ],
            ..Default::default()
        };
        let raw = assemble_raw(
            &spec,
            &data,
            Origin {
                delivery: d,
                index: 58,
            },
            ScenarioFill::Zero,
        )
        .unwrap();
        assert_eq!(raw, vec![50.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn exogenous_forecast_error_read_at_floor() {
        let day = NaiveDate::from_ymd_opt(2020, 1, 7).unwrap();
        let g = grid(day, vec![40.0; 95], vec![0.0; 95]);
        let d = g.delivery;
        let origin = Origin {
            delivery: d,
            index: g.origin_index(),
        };
        let t = origin.minute(&g);
        let floor = availability_floor(t, 76, 15).unwrap();
        let start = floor - 15 * 40;
        let n = 80;
        let mut actuals = vec![f64::NAN; n];
        let forecasts = vec![90.0; n];
        // only the floor sample and earlier are valid; everything later is poisoned
        for (i, a) in actuals.iter_mut().enumerate() {
            let minute = start + 15 * i as i64;
            *a = if minute <= floor { 100.0 } else { 1e9 };
        }
        let series = FundamentalSeries {
            name: "load".into(),
            granularity_min: 15,
            start_minute: start,
            actuals,
            forecasts,
            availability_delay_min: 76,
        };
        let data = MarketData::new(MarketClock::default(), [g], [series]);
        let spec = FeatureSpec {
            channels: vec![ChannelSpec::exogenous(
                "err",
                ChannelKind::ExogenousForecastError,
                "load",
                76,
                15,
            )],
            ..Default::default()
        };
        let raw = assemble_raw(&spec, &data, origin, ScenarioFill::Zero).unwrap();
        assert_eq!(raw, vec![10.0]);
    }

    #[test]
    fn sign_split_is_additive() {
        let (p, n) = sign_split(&[3.0, -4.0, 0.0]);
        assert_eq!(p, vec![3.0, 0.0, 0.0]);
        assert_eq!(n, vec![0.0, -4.0, 0.0]);
    }

    #[test]
    fn scenario_points_cover_horizon() {
        let spec = FeatureSpec::default();
        assert_eq!(spec.scenario_points(15), 11);
        assert_eq!(spec.scenario_points(60), 3);
    }

    #[test]
    fn duplicate_channels_rejected() {
        let spec = FeatureSpec {
            channels: vec![
                ChannelSpec::new("a", ChannelKind::LastPrice),
                ChannelSpec::new("a", ChannelKind::Weekday),
            ],
            ..Default::default()
        };
        assert!(spec.validate(None).is_err());
    }

    #[test]
    fn standardizer_zero_variance_column() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.apply(&[2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(s.stds, vec![1.0, 1.0]);
    }
}
