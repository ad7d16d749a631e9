//! Canonical CSV files: transactions, fundamentals, auction prices and
//! auction curves. Every malformed row is reported with its line number.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use csv::StringRecord;

use super::{DeliveryId, FundamentalSeries, TransactionRecord};
use crate::error::{Error, Result};
use crate::features::{Bid, Side, SupplyCurve};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemaKind {
    Transactions,
    Fundamentals,
    AuctionPrices,
    Curves,
}

impl SchemaKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            SchemaKind::Transactions => &[
                "trade_id",
                "timestamp_utc",
                "delivery_day",
                "delivery_quarter",
                "price_eur_mwh",
                "volume_mwh",
                "market_id",
            ],
            SchemaKind::Fundamentals => &[
                "name",
                "timestamp_utc",
                "actual",
                "forecast",
                "granularity_min",
                "delay_min",
            ],
            SchemaKind::AuctionPrices => &["delivery_day", "delivery_quarter", "price_eur_mwh"],
            SchemaKind::Curves => &[
                "delivery_day",
                "delivery_quarter",
                "side",
                "price",
                "volume",
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CsvRecords {
    Transactions(Vec<TransactionRecord>),
    Fundamentals(Vec<FundamentalSeries>),
    AuctionPrices(Vec<(DeliveryId, f64)>),
    Curves(Vec<(DeliveryId, SupplyCurve)>),
}

fn csv_err(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

/// Row reader resolving columns by header name.
struct Rows<R: Read> {
    reader: csv::Reader<R>,
    index: Vec<usize>,
}

impl<R: Read> Rows<R> {
    fn new(source: R, kind: SchemaKind) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .clone();
        let index = kind
            .columns()
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == *c)
                    .ok_or_else(|| csv_err(1, format!("missing column `{c}`")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { reader, index })
    }

    fn for_each(mut self, mut f: impl FnMut(u64, Vec<&str>) -> Result<()>) -> Result<()> {
        let mut record = StringRecord::new();
        loop {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| csv_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line());
            let fields = self
                .index
                .iter()
                .map(|&i| record.get(i).unwrap_or(""))
                .collect();
            f(line, fields)?;
        }
    }
}

fn parse_f64(line: u64, col: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| {
        csv_err(
            line,
            format!("column `{col}`: cannot parse `{s}` as a number"),
        )
    })
}

fn parse_opt_f64(line: u64, col: &str, s: &str) -> Result<f64> {
    if s.is_empty() {
        Ok(f64::NAN)
    } else {
        parse_f64(line, col, s)
    }
}

fn parse_i64(line: u64, col: &str, s: &str) -> Result<i64> {
    s.parse::<i64>().map_err(|_| {
        csv_err(
            line,
            format!("column `{col}`: cannot parse `{s}` as an integer"),
        )
    })
}

fn parse_time(line: u64, s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| csv_err(line, format!("unparseable timestamp `{s}`: {e}")))
}

fn parse_delivery(line: u64, day: &str, quarter: &str) -> Result<DeliveryId> {
    let day = NaiveDate::parse_from_str(day, "%Y-%m-%d")
        .map_err(|e| csv_err(line, format!("unparseable delivery day `{day}`: {e}")))?;
    let q = quarter
        .parse::<u8>()
        .map_err(|_| csv_err(line, format!("unparseable delivery quarter `{quarter}`")))?;
    DeliveryId::new(day, q).map_err(|e| csv_err(line, e.to_string()))
}

fn format_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn format_f64(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn load_transactions(source: impl Read) -> Result<Vec<TransactionRecord>> {
    let cols = SchemaKind::Transactions.columns();
    let mut out = Vec::new();
    Rows::new(source, SchemaKind::Transactions)?.for_each(|line, f| {
        let volume = parse_f64(line, cols[5], f[5])?;
        if !(volume > 0.0) {
            return Err(csv_err(
                line,
                format!("volume must be positive, got {volume}"),
            ));
        }
        let price = parse_f64(line, cols[4], f[4])?;
        if !price.is_finite() {
            return Err(csv_err(line, "price must be finite"));
        }
        out.push(TransactionRecord {
            trade_id: f[0].to_string(),
            timestamp: parse_time(line, f[1])?,
            delivery: parse_delivery(line, f[2], f[3])?,
            price,
            volume,
            market_id: f[6].to_string(),
        });
        Ok(())
    })?;
    Ok(out)
}

/// Fundamentals are grouped by name; each series must be on a regular grid.
/// Gaps become missing values, empty cells too.
pub fn load_fundamentals(source: impl Read) -> Result<Vec<FundamentalSeries>> {
    let cols = SchemaKind::Fundamentals.columns();
    struct Acc {
        granularity: i64,
        delay: i64,
        rows: BTreeMap<i64, (f64, f64)>,
    }
    let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
    Rows::new(source, SchemaKind::Fundamentals)?.for_each(|line, f| {
        let t = parse_time(line, f[1])?;
        if t.timestamp() % 60 != 0 {
            return Err(csv_err(line, "timestamps must fall on whole minutes"));
        }
        let minute = t.timestamp() / 60;
        let actual = parse_opt_f64(line, cols[2], f[2])?;
        let forecast = parse_opt_f64(line, cols[3], f[3])?;
        let granularity = parse_i64(line, cols[4], f[4])?;
        let delay = parse_i64(line, cols[5], f[5])?;
        if granularity <= 0 || delay < 0 {
            return Err(csv_err(
                line,
                "granularity must be positive and delay nonnegative",
            ));
        }
        if minute.rem_euclid(granularity) != 0 {
            return Err(csv_err(line, "timestamp not aligned to granularity"));
        }
        let acc = groups.entry(f[0].to_string()).or_insert(Acc {
            granularity,
            delay,
            rows: BTreeMap::new(),
        });
        if acc.granularity != granularity || acc.delay != delay {
            return Err(csv_err(
                line,
                format!("series `{}` changes granularity or delay", f[0]),
            ));
        }
        if acc.rows.insert(minute, (actual, forecast)).is_some() {
            return Err(csv_err(
                line,
                format!("duplicate timestamp in series `{}`", f[0]),
            ));
        }
        Ok(())
    })?;
    groups
        .into_iter()
        .map(|(name, acc)| {
            let start = *acc.rows.keys().next().expect("group has a row");
            let end = *acc.rows.keys().next_back().expect("group has a row");
            let n = ((end - start) / acc.granularity + 1) as usize;
            let mut actuals = vec![f64::NAN; n];
            let mut forecasts = vec![f64::NAN; n];
            for (minute, (a, f)) in acc.rows {
                let i = ((minute - start) / acc.granularity) as usize;
                actuals[i] = a;
                forecasts[i] = f;
            }
            let s = FundamentalSeries {
                name,
                granularity_min: acc.granularity,
                start_minute: start,
                actuals,
                forecasts,
                availability_delay_min: acc.delay,
            };
            s.validate()?;
            Ok(s)
        })
        .collect()
}

pub fn load_auction_prices(source: impl Read) -> Result<Vec<(DeliveryId, f64)>> {
    let cols = SchemaKind::AuctionPrices.columns();
    let mut out = Vec::new();
    Rows::new(source, SchemaKind::AuctionPrices)?.for_each(|line, f| {
        out.push((
            parse_delivery(line, f[0], f[1])?,
            parse_f64(line, cols[2], f[2])?,
        ));
        Ok(())
    })?;
    Ok(out)
}

pub fn load_supply_curves(source: impl Read) -> Result<Vec<(DeliveryId, SupplyCurve)>> {
    let cols = SchemaKind::Curves.columns();
    let mut curves: BTreeMap<DeliveryId, SupplyCurve> = BTreeMap::new();
    Rows::new(source, SchemaKind::Curves)?.for_each(|line, f| {
        let delivery = parse_delivery(line, f[0], f[1])?;
        let side = match f[2].to_ascii_lowercase().as_str() {
            "buy" => Side::Buy,
            "sell" => Side::Sell,
            other => return Err(csv_err(line, format!("unknown side `{other}`"))),
        };
        let bid = Bid {
            price: parse_f64(line, cols[3], f[3])?,
            volume: parse_f64(line, cols[4], f[4])?,
            side,
        };
        SupplyCurve { bids: vec![bid] }
            .validate()
            .map_err(|e| csv_err(line, e.to_string()))?;
        curves.entry(delivery).or_default().bids.push(bid);
        Ok(())
    })?;
    Ok(curves.into_iter().collect())
}

/// Load any canonical file by schema.
pub fn load_csv(path: &Path, kind: SchemaKind) -> Result<CsvRecords> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    Ok(match kind {
        SchemaKind::Transactions => CsvRecords::Transactions(load_transactions(reader)?),
        SchemaKind::Fundamentals => CsvRecords::Fundamentals(load_fundamentals(reader)?),
        SchemaKind::AuctionPrices => CsvRecords::AuctionPrices(load_auction_prices(reader)?),
        SchemaKind::Curves => CsvRecords::Curves(load_supply_curves(reader)?),
    })
}

fn writer<W: Write>(sink: W, kind: SchemaKind) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(kind.columns()).map_err(io_err)?;
    Ok(w)
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_transactions(sink: impl Write, records: &[TransactionRecord]) -> Result<()> {
    let mut w = writer(sink, SchemaKind::Transactions)?;
    for r in records {
        w.write_record([
            r.trade_id.clone(),
            format_time(&r.timestamp),
            r.delivery.day.to_string(),
            r.delivery.quarter.to_string(),
            r.price.to_string(),
            r.volume.to_string(),
            r.market_id.clone(),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fundamentals(sink: impl Write, series: &[FundamentalSeries]) -> Result<()> {
    let mut w = writer(sink, SchemaKind::Fundamentals)?;
    for s in series {
        for i in 0..s.actuals.len() {
            let t = DateTime::from_timestamp(s.minute_of(i) * 60, 0)
                .ok_or_else(|| Error::InvalidParameter("timestamp out of range".into()))?;
            w.write_record([
                s.name.clone(),
                format_time(&t),
                format_f64(s.actuals[i]),
                format_f64(s.forecasts[i]),
                s.granularity_min.to_string(),
                s.availability_delay_min.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_auction_prices(sink: impl Write, prices: &[(DeliveryId, f64)]) -> Result<()> {
    let mut w = writer(sink, SchemaKind::AuctionPrices)?;
    for (d, p) in prices {
        w.write_record([d.day.to_string(), d.quarter.to_string(), p.to_string()])
            .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}
