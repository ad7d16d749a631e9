// Fit a single SVR with the corrected kernel on a toy problem where the
// auxiliary forecast carries most of the signal.

use intraday_paths::svr::{
    fit_kernel_widths, fit_svr, pairwise_distances, KernelLevels, SvrHyperParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 120;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let aux: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let target = |x: &[f64], a: f64| 0.8 * a + 0.3 * (3.0 * x[0]).sin();
    let y: Vec<f64> = rows
        .iter()
        .zip(&aux)
        .map(|(x, &a)| target(x, a) + rng.random_range(-0.05..0.05))
        .collect();

    let (dx, dy) = pairwise_distances(&rows, &aux, 100_000);
    let widths = fit_kernel_widths(&dx, &dy, KernelLevels::default())?;
    println!("kernel widths l={:.4} g={:.4}", widths.l, widths.g);

    let hyper = SvrHyperParams {
        c: 10.0,
        epsilon: 0.02,
        ..Default::default()
    };
    let model = fit_svr(&rows, &aux, &y, widths, &hyper)?;
    println!(
        "{} support vectors of {n}, converged={} after {} iterations",
        model.support_indices.len(),
        model.converged,
        model.iterations
    );

    let mut sq = 0.0;
    for _ in 0..200 {
        let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let a = rng.random_range(-2.0..2.0);
        sq += (model.predict(&x, a)? - target(&x, a)).powi(2);
    }
    println!("out-of-sample RMSE {:.4}", (sq / 200.0).sqrt());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
