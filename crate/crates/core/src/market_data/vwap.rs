use super::{DeliveryId, MarketClock, TransactionRecord, VwapGrid, INTERVAL_MIN};
use crate::error::{Error, Result};

/// Aggregate the trades of one delivery product into the 5-minute VWAP grid.
///
/// Buckets are left-closed and right-open. Empty intervals carry the previous
/// interval's price forward; intervals before the first trade carry the
/// auction price. A non-finite `auction_price` means "no auction seed".
pub fn aggregate_vwap(
    transactions: &[TransactionRecord],
    delivery: DeliveryId,
    auction_price: f64,
    clock: &MarketClock,
) -> Result<VwapGrid> {
    let len = delivery.grid_len();
    let origin_minute = clock.grid_origin(delivery);
    let origin_secs = origin_minute * 60;
    // prices are accumulated relative to the first trade of each interval so
    // that an interval of equal prices reproduces that price exactly
    let mut anchor = vec![f64::NAN; len];
    let mut notional = vec![0.0; len];
    let mut volumes = vec![0.0; len];

    for (index, t) in transactions.iter().enumerate() {
        if t.delivery != delivery {
            return Err(Error::WrongDelivery {
                index,
                trade_id: t.trade_id.clone(),
                found: t.delivery.to_string(),
                expected: delivery.to_string(),
            });
        }
        if !(t.volume > 0.0) || !t.price.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "transaction {index} ({}): volume must be positive and price finite",
                t.trade_id
            )));
        }
        let u = (t.timestamp.timestamp() - origin_secs).div_euclid(INTERVAL_MIN * 60);
        if u < 0 || u >= len as i64 {
            return Err(Error::OutsideGrid {
                index,
                trade_id: t.trade_id.clone(),
                delivery: delivery.to_string(),
            });
        }
        let u = u as usize;
        if anchor[u].is_nan() {
            anchor[u] = t.price;
        }
        notional[u] += (t.price - anchor[u]) * t.volume;
        volumes[u] += t.volume;
    }

    let mut prices = Vec::with_capacity(len);
    let mut last = auction_price.is_finite().then_some(auction_price);
    for u in 0..len {
        if volumes[u] > 0.0 {
            last = Some(anchor[u] + notional[u] / volumes[u]);
        }
        match last {
            Some(p) => prices.push(p),
            None => return Err(Error::NoPriceBasis(delivery.to_string())),
        }
    }

    Ok(VwapGrid {
        delivery,
        origin_minute,
        prices,
        volumes,
        auction_seed_price: auction_price,
    })
}
