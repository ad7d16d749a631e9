use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRICE_BOUNDS: (f64, f64) = (-3000.0, 3000.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub price: f64,
    pub volume: f64,
    pub side: Side,
}

/// Day-ahead auction curve for one delivery.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupplyCurve {
    pub bids: Vec<Bid>,
}

impl SupplyCurve {
    pub fn validate(&self) -> Result<()> {
        for (i, b) in self.bids.iter().enumerate() {
            if !(b.volume > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "bid {i}: volume must be positive"
                )));
            }
            if !(b.price >= PRICE_BOUNDS.0 && b.price <= PRICE_BOUNDS.1) {
                return Err(Error::InvalidParameter(format!(
                    "bid {i}: price {} outside [{}, {}]",
                    b.price, PRICE_BOUNDS.0, PRICE_BOUNDS.1
                )));
            }
        }
        Ok(())
    }

    /// Steps of the transformed supply curve: buy bids join the sell side,
    /// sorted by price. Returns (price, right end of step on the volume axis),
    /// with the axis shifted by `inelastic_demand`.
    pub fn transformed_steps(&self, inelastic_demand: f64) -> Vec<(f64, f64)> {
        let mut bids: Vec<(f64, f64)> = self.bids.iter().map(|b| (b.price, b.volume)).collect();
        bids.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = -inelastic_demand;
        let steps: Vec<(f64, f64)> = bids
            .into_iter()
            .map(|(p, v)| {
                cum += v;
                (p, cum)
            })
            .collect();
        debug_assert!(steps
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        steps
    }
}

/// Right-continuous step price at volume `v`; clamped to the end steps.
fn price_at(steps: &[(f64, f64)], start: f64, v: f64) -> f64 {
    if v < start {
        return steps[0].0;
    }
    for &(p, end) in steps {
        if v < end {
            return p;
        }
    }
    steps[steps.len() - 1].0
}

/// Central-difference slopes of the transformed supply curve around the
/// volume at which it reaches `ref_price`.
pub fn merit_order_slope(
    curve: &SupplyCurve,
    inelastic_demand: f64,
    ref_price: f64,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    if curve.bids.is_empty() {
        return Err(Error::Empty("supply curve"));
    }
    curve.validate()?;
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter(
            "volume deltas must be positive".into(),
        ));
    }
    let steps = curve.transformed_steps(inelastic_demand);
    let (low, high) = (steps[0].0, steps[steps.len() - 1].0);
    if !(ref_price >= low && ref_price <= high) {
        return Err(Error::ReferenceOutsideCurve {
            price: ref_price,
            low,
            high,
        });
    }
    let start = -inelastic_demand;
    // first volume at which the curve price reaches the reference
    let mut v = start;
    for &(p, end) in &steps {
        if p >= ref_price {
            break;
        }
        v = end;
    }
    Ok(deltas
        .iter()
        .map(|&d| (price_at(&steps, start, v + d) - price_at(&steps, start, v - d)) / (2.0 * d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_curve() -> SupplyCurve {
        // 1 MW steps with price k/100 on [k, k+1)
        SupplyCurve {
            bids: (0..6000)
                .map(|k| Bid {
                    price: k as f64 / 100.0,
                    volume: 1.0,
                    side: Side::Sell,
                })
                .collect(),
        }
    }

    #[test]
    fn linear_curve_slope() {
        let s = merit_order_slope(&linear_curve(), 0.0, 20.0, &[500.0, 1000.0, 2000.0]).unwrap();
        for v in s {
            assert!((v - 0.01).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn flat_curve_has_zero_slope() {
        let curve = SupplyCurve {
            bids: vec![
                Bid {
                    price: 30.0,
                    volume: 5000.0,
                    side: Side::Sell,
                },
                Bid {
                    price: 30.0,
                    volume: 3000.0,
                    side: Side::Buy,
                },
            ],
        };
        assert_eq!(
            merit_order_slope(&curve, 0.0, 30.0, &[500.0]).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn reference_outside_curve() {
        let err = merit_order_slope(&linear_curve(), 0.0, 100.0, &[500.0]).unwrap_err();
        assert!(err.to_string().contains("outside transformed curve"));
    }

    #[test]
    fn inelastic_demand_shift_leaves_slopes() {
        let a = merit_order_slope(&linear_curve(), 0.0, 20.0, &[700.0]).unwrap();
        let b = merit_order_slope(&linear_curve(), 1234.0, 20.0, &[700.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_inside_narrow_window_only() {
        // flat at 10, jump to 50 at 300 MW past the reference volume
        let curve = SupplyCurve {
            bids: vec![
                Bid {
                    price: 10.0,
                    volume: 5300.0,
                    side: Side::Sell,
                },
                Bid {
                    price: 50.0,
                    volume: 10000.0,
                    side: Side::Sell,
                },
            ],
        };
        let s = merit_order_slope(&curve, 0.0, 10.0, &[500.0, 2000.0]).unwrap();
        // reference volume is 0, jump at 5300 lies outside both windows
        assert_eq!(s, vec![0.0, 0.0]);
        let s = merit_order_slope(&curve, 5000.0, 10.0, &[500.0, 2000.0]).unwrap();
        // reference volume -5000; jump at 300 lies outside both windows too
        assert_eq!(s, vec![0.0, 0.0]);
        let curve = SupplyCurve {
            bids: vec![
                Bid {
                    price: 10.0,
                    volume: 300.0,
                    side: Side::Sell,
                },
                Bid {
                    price: 50.0,
                    volume: 10000.0,
                    side: Side::Sell,
                },
            ],
        };
        let s = merit_order_slope(&curve, 0.0, 10.0, &[500.0, 2000.0]).unwrap();
        assert!((s[0] - 40.0 / 1000.0).abs() < 1e-15);
        assert!((s[1] - 40.0 / 4000.0).abs() < 1e-15);
        assert!(s[1] < s[0]);
    }
}
