//! As the number of historical paths grows, the Empirical GP posterior
//! approaches the posterior of the GP that generated them.
//!
//!     cargo run --example target_gp_convergence

use empirical_gp::dataset::{Corpus, SamplePath};
use empirical_gp::empirical_prior::fit_dense;
use empirical_gp::inference::{condition, sample_paths, Prior, PriorHandle};
use empirical_gp::kernels::{KernelFamily, KernelSpec, MeanSpec};
use empirical_gp::linspace;
use nalgebra::DVector;

fn main() -> empirical_gp::Result<()> {
    let grid = linspace(0.0, 1.0, 64);
    let obs_x = [0.1, 0.3, 0.5, 0.7, 0.9];
    let obs_y = [0.4, -0.2, 0.1, 0.8, -0.5];
    let noise = 1e-2;

    for kernel in [
        KernelSpec::new(KernelFamily::Linear, 1.0, 1.0),
        KernelSpec::new(KernelFamily::Quadratic, 1.0, 1.0),
        KernelSpec::new(KernelFamily::Rbf, 0.2, 1.0),
        KernelSpec::periodic(1.0, 1.0, 0.5),
    ] {
        let target = Prior::Parametric {
            kernel,
            mean: MeanSpec::Zero,
        };
        let reference = condition(&PriorHandle::new(&target, noise)?, &obs_x, &obs_y, &grid)?;
        let draws = empirical_gp::inference::GaussianPredictive {
            locations: grid.clone(),
            mean: DVector::zeros(grid.len()),
            cov: target.cov(&grid, &grid)?,
        };
        print!("{:10}", kernel.family.name());
        for s in [16, 64, 256, 1024] {
            // average over a few independent corpora of each size
            let mut rms = 0.0;
            for seed in 0..5 {
                let corpus = Corpus::new(
                    sample_paths(&draws, s, 100 * s as u64 + seed)?
                        .into_iter()
                        .map(|ys| SamplePath::new(grid.clone(), ys))
                        .collect::<Result<_, _>>()?,
                );
                let prior = Prior::Dense(fit_dense(&corpus, &grid)?);
                let post = condition(&PriorHandle::new(&prior, noise)?, &obs_x, &obs_y, &grid)?;
                rms += (post.mean - &reference.mean).norm() / (grid.len() as f64).sqrt() / 5.0;
            }
            print!("  S={s:<5} {rms:.2e}");
        }
        println!();
    }
    Ok(())
}
