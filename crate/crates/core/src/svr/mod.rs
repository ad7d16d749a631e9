//! Support vector regression with the corrected kernel
//! `exp(-l |x_i - x_j|) * exp(-g (yhat_i - yhat_j)^2)`, where `yhat` is an
//! auxiliary naive forecast attached to every sample.

mod smo;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub use smo::{solve_dual, DualSolution};

/// Quantile levels used to fit the kernel widths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelLevels {
    pub alpha1_laplace: f64,
    pub alpha2_laplace: f64,
    pub alpha1_gauss: f64,
    pub alpha2_gauss: f64,
}

impl Default for KernelLevels {
    fn default() -> Self {
        Self {
            alpha1_laplace: 0.75,
            alpha2_laplace: 0.5,
            alpha1_gauss: 0.75,
            alpha2_gauss: 0.75,
        }
    }
}

impl KernelLevels {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha1_laplace,
            self.alpha2_laplace,
            self.alpha1_gauss,
            self.alpha2_gauss,
        ];
        if all.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidParameter(
                "kernel levels must lie in (0, 1)".into(),
            ));
        }
        if self.alpha1_laplace <= 0.5 || self.alpha1_gauss <= 0.5 {
            return Err(Error::InvalidParameter(
                "alpha1 levels must exceed 0.5 for positive widths".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Laplace width on feature distances.
    pub l: f64,
    /// Gaussian width on auxiliary-forecast distances.
    pub g: f64,
    pub levels: KernelLevels,
}

impl KernelParams {
    pub fn new(l: f64, g: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite() && g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel widths must be positive and finite, got l={l}, g={g}"
            )));
        }
        Ok(Self {
            l,
            g,
            levels: KernelLevels::default(),
        })
    }

    /// Kernel value from a feature distance and an auxiliary difference.
    #[inline]
    pub fn eval_dist(&self, x_dist: f64, yhat_diff: f64) -> f64 {
        (-self.l * x_dist - self.g * yhat_diff * yhat_diff).exp()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn corrected_kernel(
    x_i: &[f64],
    x_j: &[f64],
    yhat_i: f64,
    yhat_j: f64,
    params: &KernelParams,
) -> Result<f64> {
    if x_i.len() != x_j.len() {
        return Err(Error::DimensionMismatch {
            expected: x_i.len(),
            found: x_j.len(),
        });
    }
    Ok(params.eval_dist(euclidean(x_i, x_j), yhat_i - yhat_j))
}

/// Widths matching the empirical distance quantiles to Laplace and Gaussian
/// quantiles. `yhat_dists` holds absolute auxiliary differences.
pub fn fit_kernel_widths(
    x_dists: &[f64],
    yhat_dists: &[f64],
    levels: KernelLevels,
) -> Result<KernelParams> {
    levels.validate()?;
    if x_dists.is_empty() || yhat_dists.is_empty() {
        return Err(Error::Empty("pairwise distances"));
    }
    let qx = stats::quantile(x_dists, levels.alpha2_laplace);
    if !(qx > 0.0) {
        return Err(Error::DegenerateDistances(
            "feature distance quantile is zero",
        ));
    }
    let qy = stats::quantile(yhat_dists, levels.alpha2_gauss);
    if !(qy > 0.0) {
        return Err(Error::DegenerateDistances(
            "auxiliary forecast distance quantile is zero",
        ));
    }
    let l = -(2.0 - 2.0 * levels.alpha1_laplace).ln() / qx;
    let z = stats::normal_quantile(levels.alpha1_gauss);
    let g = z * z / (2.0 * qy * qy);
    Ok(KernelParams { l, g, levels })
}

/// All i<j pairwise distances. When there are more than `max_pairs` pairs, an
/// evenly strided subset of rows is used.
pub fn pairwise_distances(
    rows: &[Vec<f64>],
    aux: &[f64],
    max_pairs: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let mut keep = n;
    while keep > 2 && keep * (keep - 1) / 2 > max_pairs {
        keep -= 1;
    }
    let idx: Vec<usize> = if keep == n {
        (0..n).collect()
    } else {
        (0..keep).map(|k| k * n / keep).collect()
    };
    let mut xd = Vec::with_capacity(keep * keep.saturating_sub(1) / 2);
    let mut yd = Vec::with_capacity(xd.capacity());
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            xd.push(euclidean(&rows[i], &rows[j]));
            yd.push((aux[i] - aux[j]).abs());
        }
    }
    (xd, yd)
}

/// Dense row-major Gram matrix.
pub fn gram_matrix(rows: &[Vec<f64>], aux: &[f64], params: &KernelParams) -> Vec<f64> {
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                1.0
            } else {
                params.eval_dist(euclidean(&rows[i], &rows[j]), aux[i] - aux[j])
            };
        }
    });
    k
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrHyperParams {
    pub c: f64,
    pub epsilon: f64,
    /// Maximal KKT violation at convergence.
    pub solver_tolerance: f64,
    /// Iteration cap; `None` means 20 N^2.
    pub max_passes: Option<u64>,
}

impl Default for SvrHyperParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            solver_tolerance: 1e-6,
            max_passes: None,
        }
    }
}

impl SvrHyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(
                "epsilon must be nonnegative".into(),
            ));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "solver tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted model. Only support vectors are stored for prediction; dual
/// coefficients are kept for every training sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// (alpha_i, alpha_i^*) per training sample.
    pub dual_coefs: Vec<(f64, f64)>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub stored_features: Vec<Vec<f64>>,
    pub stored_aux: Vec<f64>,
    pub kernel: KernelParams,
    pub converged: bool,
    pub iterations: u64,
    pub objective: f64,
}

impl SvrModel {
    pub fn from_solution(
        solution: DualSolution,
        rows: &[Vec<f64>],
        aux: &[f64],
        kernel: KernelParams,
    ) -> Self {
        let dual_coefs: Vec<(f64, f64)> = solution
            .alpha
            .iter()
            .copied()
            .zip(solution.alpha_star.iter().copied())
            .collect();
        let support_indices: Vec<usize> = dual_coefs
            .iter()
            .enumerate()
            .filter(|(_, (a, s))| *a != 0.0 || *s != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self {
            stored_features: support_indices.iter().map(|&i| rows[i].clone()).collect(),
            stored_aux: support_indices.iter().map(|&i| aux[i]).collect(),
            support_indices,
            dual_coefs,
            bias: solution.bias,
            kernel,
            converged: solution.converged,
            iterations: solution.iterations,
            objective: solution.objective,
        }
    }

    /// Expansion coefficient `alpha_i^* - alpha_i` of training sample `i`.
    pub fn coef(&self, i: usize) -> f64 {
        let (a, s) = self.dual_coefs[i];
        s - a
    }

    pub fn dim(&self) -> Option<usize> {
        self.stored_features.first().map(Vec::len)
    }

    pub fn predict(&self, x: &[f64], yhat: f64) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
        }
        let mut f = self.bias;
        for (k, &i) in self.support_indices.iter().enumerate() {
            let kv = self.kernel.eval_dist(
                euclidean(&self.stored_features[k], x),
                self.stored_aux[k] - yhat,
            );
            f += self.coef(i) * kv;
        }
        Ok(f)
    }
}

/// Fit one SVR on standardized rows.
pub fn fit_svr(
    rows: &[Vec<f64>],
    aux: &[f64],
    targets: &[f64],
    kernel: KernelParams,
    hyper: &SvrHyperParams,
) -> Result<SvrModel> {
    if rows.len() != targets.len() || rows.len() != aux.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows, {} auxiliary values, {} targets",
            rows.len(),
            aux.len(),
            targets.len()
        )));
    }
    let gram = gram_matrix(rows, aux, &kernel);
    let solution = solve_dual(&gram, targets, hyper)?;
    Ok(SvrModel::from_solution(solution, rows, aux, kernel))
}
