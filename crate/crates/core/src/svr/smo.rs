//! Two-coordinate working-set solver for the epsilon-SVR dual
//!
//! ```text
//! min  1/2 (a - a*)' K (a - a*) + eps sum(a + a*) + sum y (a - a*)
//! s.t. sum(a - a*) = 0,  0 <= a, a* <= C
//! ```
//!
//! written over 2N variables `z = [a; a*]` with signs `s = [+1; -1]`.
//! Working pairs use maximal violation for the first index and second-order
//! gain for the second.

use serde::{Deserialize, Serialize};

use super::SvrHyperParams;
use crate::error::{Error, Result};

/// Curvature floor for non-positive-definite working pairs.
const TAU: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: u64,
}

/// Solve the dual for a dense row-major Gram matrix.
pub fn solve_dual(gram: &[f64], targets: &[f64], hyper: &SvrHyperParams) -> Result<DualSolution> {
    hyper.validate()?;
    let n = targets.len();
    if n == 0 {
        return Err(Error::Empty("training targets"));
    }
    if gram.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: gram.len(),
        });
    }
    if targets.iter().any(|y| !y.is_finite()) || gram.iter().any(|k| !k.is_finite()) {
        return Err(Error::InvalidParameter("non-finite training data".into()));
    }
    let c = hyper.c;
    let eps = hyper.epsilon;
    let m = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let sample = |t: usize| if t < n { t } else { t - n };
    let k = |a: usize, b: usize| gram[sample(a) * n + sample(b)];
    let q = |a: usize, b: usize| sign(a) * sign(b) * k(a, b);

    let p: Vec<f64> = (0..m)
        .map(|t| {
            if t < n {
                eps + targets[t]
            } else {
                eps - targets[t - n]
            }
        })
        .collect();
    let mut z = vec![0.0; m];
    let mut grad = p.clone();
    let max_iter = hyper
        .max_passes
        .unwrap_or(20 * (n as u64) * (n as u64))
        .max(1);

    let in_up = |t: usize, z: &[f64]| if t < n { z[t] < c } else { z[t] > 0.0 };
    let in_low = |t: usize, z: &[f64]| if t < n { z[t] > 0.0 } else { z[t] < c };

    let mut iterations = 0u64;
    let mut converged = false;
    loop {
        // first index: maximal violation
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..m {
            if in_up(t, &z) {
                let v = -sign(t) * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // second index: best second-order gain
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if !in_low(t, &z) {
                continue;
            }
            let v = sign(t) * grad[t];
            if v > gmax2 {
                gmax2 = v;
            }
            if i == usize::MAX {
                continue;
            }
            let b = gmax + v;
            if b > 0.0 {
                let mut a = k(i, i) + k(t, t) - 2.0 * sign(i) * sign(t) * q(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < hyper.solver_tolerance || j == usize::MAX {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (z[i], z[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let mut quad = k(i, i) + k(j, j) + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = z[i] - z[j];
            z[i] += delta;
            z[j] += delta;
            if diff > 0.0 {
                if z[j] < 0.0 {
                    z[j] = 0.0;
                    z[i] = diff;
                }
            } else if z[i] < 0.0 {
                z[i] = 0.0;
                z[j] = -diff;
            }
            if diff > 0.0 {
                if z[i] > c {
                    z[i] = c;
                    z[j] = c - diff;
                }
            } else if z[j] > c {
                z[j] = c;
                z[i] = c + diff;
            }
        } else {
            let mut quad = k(i, i) + k(j, j) - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = z[i] + z[j];
            z[i] -= delta;
            z[j] += delta;
            if sum > c {
                if z[i] > c {
                    z[i] = c;
                    z[j] = sum - c;
                }
            } else if z[j] < 0.0 {
                z[j] = 0.0;
                z[i] = sum;
            }
            if sum > c {
                if z[j] > c {
                    z[j] = c;
                    z[i] = sum - c;
                }
            } else if z[i] < 0.0 {
                z[i] = 0.0;
                z[j] = sum;
            }
        }
        let (di, dj) = (z[i] - old_i, z[j] - old_j);
        if di != 0.0 || dj != 0.0 {
            for (t, g) in grad.iter_mut().enumerate() {
                *g += q(t, i) * di + q(t, j) * dj;
            }
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..m {
        let yg = sign(t) * grad[t];
        let at_upper = z[t] >= c;
        let at_lower = z[t] <= 0.0;
        if at_upper {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let bias = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let objective = 0.5
        * z.iter()
            .zip(grad.iter().zip(&p))
            .map(|(zt, (g, pt))| zt * (g + pt))
            .sum::<f64>();
    let mut alpha = z[..n].to_vec();
    let mut alpha_star = z[n..].to_vec();
    for (a, s) in alpha.iter_mut().zip(alpha_star.iter_mut()) {
        let both = a.min(*s);
        if both > 0.0 {
            *a -= both;
            *s -= both;
        }
    }
    Ok(DualSolution {
        alpha,
        alpha_star,
        bias,
        objective,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample() {
        let s = solve_dual(&[1.0], &[5.0], &SvrHyperParams::default()).unwrap();
        assert_eq!(s.alpha, vec![0.0]);
        assert_eq!(s.alpha_star, vec![0.0]);
        assert!((s.bias - 5.0).abs() < 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn zero_targets() {
        let gram = [1.0, 0.3, 0.3, 1.0];
        let s = solve_dual(&gram, &[0.0, 0.0], &SvrHyperParams::default()).unwrap();
        assert_eq!(s.alpha, vec![0.0, 0.0]);
        assert_eq!(s.alpha_star, vec![0.0, 0.0]);
        assert_eq!(s.bias, 0.0);
    }

    #[test]
    fn two_separated_targets_interpolate_within_tube() {
        let gram = [1.0, 0.1, 0.1, 1.0];
        let y = [-1.0, 1.0];
        let hyper = SvrHyperParams {
            c: 100.0,
            epsilon: 0.1,
            ..Default::default()
        };
        let s = solve_dual(&gram, &y, &hyper).unwrap();
        for i in 0..2 {
            let f: f64 = (0..2)
                .map(|j| (s.alpha_star[j] - s.alpha[j]) * gram[i * 2 + j])
                .sum::<f64>()
                + s.bias;
            assert!((f - y[i]).abs() <= 0.1 + 1e-6, "{f}");
        }
        let balance: f64 = s.alpha.iter().zip(&s.alpha_star).map(|(a, b)| a - b).sum();
        assert!(balance.abs() < 1e-12);
    }
}
