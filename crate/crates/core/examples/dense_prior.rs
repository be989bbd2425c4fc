//! Fit the dense empirical prior to draws from a known GP and forecast a
//! fresh path from its first half.
//!
//!     cargo run --example dense_prior

use empirical_gp::dataset::{Corpus, SamplePath};
use empirical_gp::empirical_prior::fit_dense;
use empirical_gp::inference::{condition, predictive_marginals, GaussianPredictive, Prior, PriorHandle};
use empirical_gp::kernels::{kernel_matrix, KernelFamily, KernelSpec};
use empirical_gp::numerics::relative_frobenius;
use empirical_gp::{inference, linspace};
use nalgebra::DVector;

fn main() -> empirical_gp::Result<()> {
    let grid = linspace(0.0, 1.0, 50);
    let truth = KernelSpec::new(KernelFamily::Matern52, 0.25, 1.0);
    let cov = kernel_matrix(&truth, &grid)?;
    let draws = GaussianPredictive {
        locations: grid.clone(),
        mean: DVector::zeros(grid.len()),
        cov: cov.clone(),
    };

    let history = inference::sample_paths(&draws, 400, 1)?;
    let corpus = Corpus::new(
        history
            .into_iter()
            .map(|ys| SamplePath::new(grid.clone(), ys))
            .collect::<Result<_, _>>()?,
    );
    let dense = fit_dense(&corpus, &grid)?;
    println!(
        "{} paths, rank {}, covariance error vs kernel {:.3}",
        dense.num_paths,
        dense.rank(),
        relative_frobenius(&dense.grid_covariance(), &cov)
    );

    // off-grid queries go through the interpolated basis
    let off = [0.013, 0.5, 0.987];
    println!("k(x, x') at {off:?}:\n{}", dense.prior_cov(&off, &off));

    let fresh = inference::sample_paths(&draws, 1, 2)?.remove(0);
    let (ctx_x, ctx_y) = (&grid[..25], &fresh[..25]);
    let query = &grid[25..];
    let prior = Prior::Dense(dense);
    let pred = condition(&PriorHandle::for_data(&prior, ctx_y), ctx_x, ctx_y, query)?;
    for ((x, (m, s)), y) in query.iter().zip(predictive_marginals(&pred)).zip(&fresh[25..]).step_by(5) {
        println!("x={x:.3}  truth={y:+.3}  mean={m:+.3}  std={s:.3}");
    }
    Ok(())
}
