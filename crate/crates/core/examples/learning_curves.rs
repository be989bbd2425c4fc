//! Extrapolate a partially observed learning curve from a corpus of
//! (mostly truncated) historical curves.
//!
//!     cargo run --example learning_curves

use empirical_gp::dataset::{split_context_target, truncate_paths, Corpus, SamplePath};
use empirical_gp::em_prior::{fit_em, EmConfig};
use empirical_gp::inference::{condition, predictive_marginals, Prior, PriorHandle};
use empirical_gp::kernels::{KernelFamily, KernelSpec, MeanSpec};
use empirical_gp::{linspace, rng};
use rand::Rng;

/// Saturating curve `a - b * t^-c` with a little noise, on `t in [0, 1]`.
fn curve(r: &mut impl Rng, xs: &[f64]) -> Vec<f64> {
    let a = r.random_range(0.7..0.95);
    let b = r.random_range(0.3..0.6);
    let c = r.random_range(0.3..0.8);
    xs.iter()
        .map(|x| a - b * (1.0 + 20.0 * x).powf(-c) + r.random_range(-0.005..0.005))
        .collect()
}

fn main() -> empirical_gp::Result<()> {
    let xs = linspace(0.0, 1.0, 50);
    let mut r = rng::seeded(4);
    let full = Corpus::new(
        (0..200)
            .map(|_| SamplePath::new(xs.clone(), curve(&mut r, &xs)))
            .collect::<Result<_, _>>()?,
    );
    // a fifth of the curves run to completion, the rest stop early
    let history = truncate_paths(&full, 0.2, 0.1, 0.9, 4);
    let lengths: Vec<usize> = history.paths.iter().map(SamplePath::len).collect();
    println!(
        "{} curves, observed lengths {}..{}",
        history.len(),
        lengths.iter().min().unwrap(),
        lengths.iter().max().unwrap()
    );

    let grid = linspace(0.0, 1.0, 25);
    let base = KernelSpec::new(KernelFamily::Matern52, 0.1, 0.05);
    let cfg = EmConfig {
        max_iters: 100,
        noise_var: 1e-5,
        estimate_noise: true,
        ..EmConfig::default()
    };
    let em = fit_em(&history, &grid, &base, &MeanSpec::Constant { value: 0.6 }, &cfg)?;
    let noise = em.noise_var;
    println!("learned noise std {:.1e}", noise.sqrt());
    let prior = Prior::Em(em);

    let new_curve = SamplePath::new(xs.clone(), curve(&mut r, &xs))?;
    let (ctx, target) = split_context_target(&new_curve, 0.3)?;
    let pred = condition(&PriorHandle::new(&prior, noise)?, &ctx.xs, &ctx.ys, &target.xs)?;
    for ((x, (m, s)), y) in target.xs.iter().zip(predictive_marginals(&pred)).zip(&target.ys).step_by(7) {
        // spread of a new noisy observation, not just of the latent curve
        let spread = 2.0 * (s * s + noise).sqrt();
        println!("t={x:.2}  observed={y:.3}  predicted={m:.3} +/- {spread:.3}");
    }
    Ok(())
}
