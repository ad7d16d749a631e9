// Aggregate raw trades of one delivery product into its 5-minute VWAP grid.

use chrono::{Duration, NaiveDate};
use intraday_paths::market_data::{aggregate_vwap, DeliveryId, MarketClock, TransactionRecord};

pub fn run_example() -> anyhow::Result<()> {
    let clock = MarketClock::default();
    let delivery = DeliveryId::new(NaiveDate::from_ymd_opt(2020, 3, 2).unwrap(), 57)?;
    let open = chrono::DateTime::from_timestamp(clock.grid_origin(delivery) * 60, 0).unwrap();
    // (minutes after gate opening, price, volume)
    let raw = [
        (2, 31.0, 1.0),
        (4, 33.0, 3.0),
        (17, 35.5, 2.0),
        (300, 38.0, 0.5),
    ];
    let trades: Vec<TransactionRecord> = raw
        .iter()
        .enumerate()
        .map(|(i, &(m, price, volume))| TransactionRecord {
            trade_id: format!("t{i}"),
            timestamp: open + Duration::minutes(m),
            delivery,
            price,
            volume,
            market_id: "XBID".into(),
        })
        .collect();

    let grid = aggregate_vwap(&trades, delivery, 30.0, &clock)?;
    println!("{delivery}: {} intervals", grid.len());
    for u in [0, 1, 2, 3, 59, 60, 61] {
        println!(
            "  u={u:3}  vwap {:7.3}  volume {:4.1}",
            grid.prices[u], grid.volumes[u]
        );
    }
    println!("standard origin index {}", grid.origin_index());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
