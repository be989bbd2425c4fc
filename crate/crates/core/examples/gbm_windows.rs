//! Slice a long geometric Brownian motion into log-aligned windows and
//! compare the dense prior against the analytic log-process moments.
//!
//!     cargo run --example gbm_windows

use empirical_gp::cli::gbm_paths;
use empirical_gp::dataset::{extract_windows, transform_log_align, WindowConfig};
use empirical_gp::empirical_prior::fit_dense;

fn main() -> empirical_gp::Result<()> {
    let (drift, vol) = (0.002, 0.015);
    let times: Vec<f64> = (0..4000).map(|t| t as f64).collect();
    let series = gbm_paths(&times, drift, vol, 100.0, 1, 7);

    let windows = extract_windows(&series, &WindowConfig::new(48, 16, 400, 7))?;
    let aligned = transform_log_align(&windows)?;
    let grid: Vec<f64> = (0..64).map(|t| t as f64).collect();
    let prior = fit_dense(&aligned, &grid)?;

    let mean = prior.prior_mean(&grid);
    let var = prior.grid_covariance().diagonal();
    println!("{} windows", aligned.len());
    println!("  t   mean     (mu - s^2/2) t   var       s^2 t");
    for t in (0..64).step_by(8) {
        let tf = t as f64;
        println!(
            "{t:3}  {:+.4}  {:+.4}          {:.2e}  {:.2e}",
            mean[t],
            (drift - 0.5 * vol * vol) * tf,
            var[t],
            vol * vol * tf
        );
    }
    Ok(())
}
