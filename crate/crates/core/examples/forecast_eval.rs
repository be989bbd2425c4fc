//! Forecast held-out tails of seasonal series with an Empirical GP and a
//! seasonal naive baseline, and score both with CRPS.
//!
//!     cargo run --example forecast_eval

use std::collections::BTreeMap;

use empirical_gp::dataset::{extract_windows, SamplePath, WindowConfig};
use empirical_gp::empirical_prior::fit_dense;
use empirical_gp::inference::{condition, predictive_marginals, Prior, PriorHandle};
use empirical_gp::metrics::{average_rank, crps_relative, mean_crps, rmse, seasonal_naive_forecast, EvalRecord, Metric};
use empirical_gp::rng;
use rand_distr::{Distribution, Normal};

const SEASON: usize = 12;
const CONTEXT: usize = 48;
const HORIZON: usize = 12;

fn main() -> empirical_gp::Result<()> {
    let mut records = Vec::new();
    for d in 0..6 {
        let mut r = rng::seeded(d);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let amp = 1.0 + 0.3 * d as f64;
        let ys: Vec<f64> = (0..600)
            .map(|t| amp * (2.0 * std::f64::consts::PI * t as f64 / SEASON as f64).sin() + 0.002 * t as f64 + noise.sample(&mut r))
            .collect();
        let (history, tail) = ys.split_at(ys.len() - HORIZON);
        let context = SamplePath::from_values(history[history.len() - CONTEXT..].to_vec())?;
        let dataset = format!("series{d}");

        let (m, s) = seasonal_naive_forecast(&context, SEASON, HORIZON)?;
        records.push(EvalRecord {
            model: "seasonal_naive".into(),
            dataset: dataset.clone(),
            rmse: rmse(&m, tail)?,
            crps: mean_crps(&m, &s, tail)?,
        });

        // the prior learns from windows of the same series' history
        let windows = extract_windows(
            &[SamplePath::from_values(history.to_vec())?],
            &WindowConfig::new(CONTEXT, HORIZON, 300, d),
        )?;
        let grid: Vec<f64> = (0..CONTEXT + HORIZON).map(|t| t as f64).collect();
        let prior = Prior::Dense(fit_dense(&windows, &grid)?);
        let query = &grid[CONTEXT..];
        let pred = condition(&PriorHandle::for_data(&prior, &context.ys), &grid[..CONTEXT], &context.ys, query)?;
        let (m, s): (Vec<f64>, Vec<f64>) = predictive_marginals(&pred).into_iter().unzip();
        records.push(EvalRecord {
            model: "empirical_gp".into(),
            dataset,
            rmse: rmse(&m, tail)?,
            crps: mean_crps(&m, &s, tail)?,
        });
    }

    for rec in &records {
        println!("{:16} {:9} rmse {:.3}  crps {:.3}", rec.model, rec.dataset, rec.rmse, rec.crps);
    }
    let relative: BTreeMap<_, _> = crps_relative(&records, "seasonal_naive")?;
    let ranks = average_rank(&records, Metric::Crps)?;
    for (model, rel) in &relative {
        let (rank, se) = ranks[model];
        println!("{model:16} relative CRPS {rel:.3}  rank {rank:.2} +/- {se:.2}");
    }
    Ok(())
}
