// Local slope of an auction supply curve around a reference price, the
// fundamental feature for how strongly prices react to volume shocks.

use intraday_paths::features::{merit_order_slope, Bid, Side, SupplyCurve};

pub fn run_example() -> anyhow::Result<()> {
    // flat cheap base, a steep gas segment and an expensive tail
    let mut bids = Vec::new();
    for k in 0..200 {
        bids.push(Bid {
            price: 5.0 + 0.05 * k as f64,
            volume: 100.0,
            side: Side::Sell,
        });
    }
    for k in 0..100 {
        bids.push(Bid {
            price: 15.0 + 0.5 * k as f64,
            volume: 50.0,
            side: Side::Sell,
        });
    }
    for k in 0..20 {
        bids.push(Bid {
            price: 70.0 + 10.0 * k as f64,
            volume: 100.0,
            side: Side::Sell,
        });
    }
    let curve = SupplyCurve { bids };
    let deltas = [50.0, 250.0, 1000.0];
    for reference in [10.0, 30.0, 60.0] {
        let slopes = merit_order_slope(&curve, 0.0, reference, &deltas)?;
        let shown: Vec<String> = deltas
            .iter()
            .zip(&slopes)
            .map(|(d, s)| format!("d={d}: {:.4}", s))
            .collect();
        println!(
            "reference {reference:5.1} EUR/MWh  slope EUR/MWh per MW  {}",
            shown.join("  ")
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
