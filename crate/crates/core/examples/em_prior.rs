//! Learn a prior with EM from tasks that each see a different random
//! subset of the inputs, then query it on and far away from the grid.
//!
//!     cargo run --example em_prior

use empirical_gp::dataset::{Corpus, SamplePath};
use empirical_gp::em_prior::{em_prior_moments, fit_em, EmConfig};
use empirical_gp::inference::{sample_paths, GaussianPredictive};
use empirical_gp::kernels::{kernel_matrix, KernelFamily, KernelSpec, MeanSpec};
use empirical_gp::numerics::relative_frobenius;
use empirical_gp::{linspace, rng};
use nalgebra::DVector;
use rand::seq::index;

fn main() -> empirical_gp::Result<()> {
    let grid = linspace(0.0, 1.0, 40);
    let mean = DVector::from_iterator(grid.len(), grid.iter().map(|x| 2.0 * x));
    let cov = kernel_matrix(&KernelSpec::new(KernelFamily::Rbf, 0.15, 1.0), &grid)?;
    let truth = GaussianPredictive {
        locations: grid.clone(),
        mean: mean.clone(),
        cov: cov.clone(),
    };

    // each task keeps 15 of the 40 inputs
    let mut r = rng::seeded(3);
    let paths = sample_paths(&truth, 300, 3)?
        .into_iter()
        .map(|f| {
            let mut idx = index::sample(&mut r, grid.len(), 15).into_vec();
            idx.sort_unstable();
            SamplePath::new(idx.iter().map(|&i| grid[i]).collect(), idx.iter().map(|&i| f[i]).collect())
        })
        .collect::<Result<_, _>>()?;
    let corpus = Corpus::new(paths);

    let base = KernelSpec::new(KernelFamily::Matern52, 0.05, 1.0);
    let cfg = EmConfig {
        max_iters: 200,
        ..EmConfig::default()
    };
    let prior = fit_em(&corpus, &grid, &base, &MeanSpec::Zero, &cfg)?;
    for it in prior.history.iter().step_by(20) {
        println!(
            "iter {:3}  loglik {:12.3}  |dmu| {:.2e}  |dSigma| {:.2e}",
            it.iteration, it.loglik, it.mean_step, it.cov_step
        );
    }
    println!(
        "{} iterations; error mu {:.3}, Sigma {:.3}",
        prior.iterations_run,
        (&prior.mu - &mean).norm() / mean.norm(),
        relative_frobenius(&prior.sigma, &cov)
    );

    // between grid points the learned structure is interpolated, far away
    // the base kernel takes over
    let (m, c) = em_prior_moments(&prior, &[0.5125, 5.0])?;
    println!("mean {:.3?}  var {:.3?}", m.as_slice(), c.diagonal().as_slice());
    Ok(())
}
