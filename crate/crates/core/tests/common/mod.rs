//! Independent reference implementations used by integration tests.
#![allow(dead_code)]

/// Gaussian elimination with partial pivoting. `None` if singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    /// beta_i = alpha_i - alpha_i^*; predictions are -K beta + b.
    pub beta: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

pub fn svr_objective(k: &[Vec<f64>], y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * k[i][j] * beta[j];
        }
    }
    0.5 * quad
        + eps * beta.iter().map(|b| b.abs()).sum::<f64>()
        + y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Brute-force dual: enumerate the state of every beta_i (zero, +C, -C, or
/// free with either sign), solve the stationarity system of the free block
/// together with the equality multiplier, keep feasible candidates and return
/// the best one.
pub fn brute_force_svr(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> QpSolution {
    let n = y.len();
    let states: &[i8] = if eps > 0.0 {
        &[0, 1, 2, 3, 4]
    } else {
        &[0, 1, 2, 3]
    };
    let ns = states.len();
    let total = ns.pow(n as u32);
    let mut best: Option<(f64, Vec<f64>, Vec<i8>, Option<f64>)> = None;
    for code in 0..total {
        let mut st = vec![0i8; n];
        let mut r = code;
        for s in st.iter_mut() {
            *s = states[r % ns];
            r /= ns;
        }
        // 0: zero, 1: +C, 2: -C, 3: free with alpha active, 4: free with alpha* active
        let mut beta = vec![0.0; n];
        for i in 0..n {
            beta[i] = match st[i] {
                1 => c,
                2 => -c,
                _ => 0.0,
            };
        }
        let free: Vec<usize> = (0..n).filter(|&i| st[i] >= 3).collect();
        let mut nu = None;
        if free.is_empty() {
            if beta.iter().sum::<f64>().abs() > 1e-12 {
                continue;
            }
        } else {
            let f = free.len();
            let mut a = vec![vec![0.0; f + 1]; f + 1];
            let mut rhs = vec![0.0; f + 1];
            for (r, &i) in free.iter().enumerate() {
                for (cc, &j) in free.iter().enumerate() {
                    a[r][cc] = k[i][j];
                }
                a[r][f] = 1.0;
                let sigma = if eps > 0.0 && st[i] == 4 { -1.0 } else { 1.0 };
                let fixed: f64 = (0..n)
                    .filter(|j| st[*j] < 3)
                    .map(|j| k[i][j] * beta[j])
                    .sum();
                rhs[r] = -y[i] - eps * sigma - fixed;
                a[f][r] = 1.0;
            }
            rhs[f] = -beta.iter().sum::<f64>();
            let Some(sol) = solve_linear(a, rhs) else {
                continue;
            };
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                let inside = if eps == 0.0 {
                    v.abs() <= c
                } else if st[i] == 3 {
                    v >= 0.0 && v <= c
                } else {
                    v <= 0.0 && v >= -c
                };
                ok &= inside;
                beta[i] = v.clamp(-c, c);
            }
            if !ok {
                continue;
            }
            nu = Some(sol[f]);
        }
        let obj = svr_objective(k, y, eps, &beta);
        if best.as_ref().is_none_or(|b| obj < b.0 - 1e-13) {
            best = Some((obj, beta, st, nu));
        }
    }
    let (objective, beta, _, nu) = best.expect("zero vector is always feasible");
    let bias = match nu {
        Some(nu) => -nu,
        None => {
            // midpoint of the bias interval allowed by the KKT conditions
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for i in 0..n {
                let g: f64 = (0..n).map(|j| k[i][j] * beta[j]).sum::<f64>() + y[i];
                let (a, s) = (beta[i].max(0.0), (-beta[i]).max(0.0));
                // alpha_i: gradient g + eps - b
                if a <= 0.0 {
                    hi = hi.min(g + eps);
                } else if a >= c {
                    lo = lo.max(g + eps);
                }
                // alpha_i^*: gradient -g + eps + b
                if s <= 0.0 {
                    lo = lo.max(g - eps);
                } else if s >= c {
                    hi = hi.min(g - eps);
                }
            }
            (lo + hi) / 2.0
        }
    };
    QpSolution {
        beta,
        bias,
        objective,
    }
}

/// Transport LP between two discrete distributions solved by successive
/// shortest paths on the residual network.
pub fn lp_transport(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    // nodes: source 0, a 1..=na, b na+1..=na+nb, sink na+nb+1
    let nodes = na + nb + 2;
    let sink = nodes - 1;
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |edges: &mut Vec<Edge>, u: usize, v: usize, cap: f64, cost: f64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost });
        adj[v].push(edges.len());
        edges.push(Edge {
            to: u,
            cap: 0.0,
            cost: -cost,
        });
    };
    let ta: f64 = a.iter().map(|x| x.1).sum();
    let tb: f64 = b.iter().map(|x| x.1).sum();
    for (i, &(_, w)) in a.iter().enumerate() {
        add(&mut edges, 0, 1 + i, w / ta, 0.0);
    }
    for (j, &(_, w)) in b.iter().enumerate() {
        add(&mut edges, 1 + na + j, sink, w / tb, 0.0);
    }
    for (i, &(x, _)) in a.iter().enumerate() {
        for (j, &(y, _)) in b.iter().enumerate() {
            add(&mut edges, 1 + i, 1 + na + j, f64::INFINITY, (x - y).abs());
        }
    }
    let mut cost = 0.0;
    let mut remaining = 1.0f64;
    while remaining > 1e-13 {
        // Bellman-Ford on the residual graph
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        dist[0] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let ed = &edges[e];
                    if ed.to != 0 && ed.cap > 1e-13 && dist[u] + ed.cost < dist[ed.to] - 1e-13 {
                        dist[ed.to] = dist[u] + ed.cost;
                        prev[ed.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = remaining;
        let mut v = sink;
        let mut hops = 0;
        while let Some(e) = prev[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
            hops += 1;
            assert!(hops <= nodes, "cycle in shortest-path tree");
        }
        remaining -= push;
        let mut v = sink;
        while let Some(e) = prev[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        cost += push * dist[sink];
    }
    cost
}

/// Standard normal CDF by composite Simpson integration of the density.
pub fn normal_cdf_simpson(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(0.0) + phi(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * phi(i as f64 * h);
    }
    0.5 + s * h / 3.0
}

/// Standard normal quantile by bisection on the Simpson CDF.
pub fn normal_quantile_oracle(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf_simpson(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pinball loss written directly from its definition.
pub fn pinball_reference(q: f64, y: f64, alpha: f64) -> f64 {
    if y >= q {
        alpha * (y - q)
    } else {
        (1.0 - alpha) * (q - y)
    }
}

/// Uniform ensemble at a fixed dummy origin.
pub fn ensemble(paths: Vec<Vec<f64>>) -> intraday_paths::ensembles::ScenarioEnsemble {
    use intraday_paths::ensembles::{EnsembleKind, ScenarioEnsemble};
    use intraday_paths::features::Origin;
    use intraday_paths::market_data::DeliveryId;
    let origin = Origin {
        delivery: DeliveryId::new(chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 1).unwrap(),
        index: 0,
    };
    let prov = (0..paths.len()).map(|i| format!("s{i}")).collect();
    ScenarioEnsemble::uniform(origin, EnsembleKind::Historical, paths, prov).unwrap()
}

/// Gaussian random walks from 40 with unit steps.
pub fn random_walks(n: usize, h: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let mut p = 40.0;
            (0..h)
                .map(|_| {
                    p += step.sample(&mut rng);
                    p
                })
                .collect()
        })
        .collect()
}
