//! Point and probabilistic forecast scores, baseline-relative aggregation
//! and rank statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::SamplePath;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub dataset: String,
    pub rmse: f64,
    pub crps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Rmse,
    Crps,
}

impl EvalRecord {
    fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Rmse => self.rmse,
            Metric::Crps => self.crps,
        }
    }
}

pub fn rmse(pred_mean: &[f64], target: &[f64]) -> Result<f64> {
    if pred_mean.len() != target.len() || target.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} targets",
            pred_mean.len(),
            target.len()
        )));
    }
    let sse: f64 = pred_mean.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / target.len() as f64).sqrt())
}

/// Closed-form CRPS of `N(mean, std^2)` at `target`; the absolute error when
/// `std == 0`.
pub fn crps_gaussian(mean: f64, std: f64, target: f64) -> f64 {
    if std <= 0.0 {
        return (target - mean).abs();
    }
    let n = Normal::standard();
    let z = (target - mean) / std;
    let v = std * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / std::f64::consts::PI.sqrt());
    v.max(0.0)
}

/// Mean CRPS over a forecast horizon.
pub fn mean_crps(means: &[f64], stds: &[f64], targets: &[f64]) -> Result<f64> {
    if means.len() != targets.len() || stds.len() != targets.len() || targets.is_empty() {
        return Err(Error::DimensionMismatch("crps inputs differ in length".into()));
    }
    let total: f64 = means
        .iter()
        .zip(stds)
        .zip(targets)
        .map(|((&m, &s), &t)| crps_gaussian(m, s, t))
        .sum();
    Ok(total / targets.len() as f64)
}

fn by_dataset(records: &[EvalRecord]) -> BTreeMap<&str, BTreeMap<&str, &EvalRecord>> {
    let mut out: BTreeMap<&str, BTreeMap<&str, &EvalRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.dataset.as_str()).or_default().insert(r.model.as_str(), r);
    }
    out
}

/// Per model, geometric mean over datasets of `crps / baseline crps`.
pub fn crps_relative(records: &[EvalRecord], baseline_model: &str) -> Result<BTreeMap<String, f64>> {
    let grid = by_dataset(records);
    let mut logs: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (dataset, models) in &grid {
        let base = models.get(baseline_model).ok_or_else(|| Error::MissingBaseline {
            model: baseline_model.to_owned(),
            dataset: dataset.to_string(),
        })?;
        for (model, r) in models {
            let ratio = if r.crps == base.crps { 1.0 } else { r.crps / base.crps };
            let e = logs.entry(model.to_string()).or_insert((0.0, 0));
            e.0 += ratio.ln();
            e.1 += 1;
        }
    }
    Ok(logs
        .into_iter()
        .map(|(m, (sum, n))| (m, (sum / n as f64).exp()))
        .collect())
}

/// Mean rank and its standard error across datasets. Ties share the mean of
/// the tied ranks.
pub fn average_rank(records: &[EvalRecord], metric: Metric) -> Result<BTreeMap<String, (f64, f64)>> {
    let grid = by_dataset(records);
    let models: BTreeSet<&str> = records.iter().map(|r| r.model.as_str()).collect();
    let mut ranks: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (dataset, row) in &grid {
        if let Some(missing) = models.iter().find(|m| !row.contains_key(*m)) {
            return Err(Error::IncompleteGrid {
                model: missing.to_string(),
                dataset: dataset.to_string(),
            });
        }
        let mut scored: Vec<(&str, f64)> = row.iter().map(|(m, r)| (*m, r.metric(metric))).collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut i = 0;
        while i < scored.len() {
            let mut j = i;
            while j + 1 < scored.len() && scored[j + 1].1 == scored[i].1 {
                j += 1;
            }
            // ranks i+1 ..= j+1 share their mean
            let mid = (i + j) as f64 / 2.0 + 1.0;
            for s in &scored[i..=j] {
                ranks.entry(s.0).or_default().push(mid);
            }
            i = j + 1;
        }
    }
    Ok(ranks
        .into_iter()
        .map(|(m, r)| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let se = if r.len() > 1 {
                let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            (m.to_owned(), (mean, se))
        })
        .collect())
}

const SEASONAL_STD_FLOOR: f64 = 1e-8;

/// Repeats the last season of `context`. The spread is the standard
/// deviation of the in-context seasonal differences `y[t] - y[t - season]`.
pub fn seasonal_naive_forecast(context: &SamplePath, season: usize, horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let y = &context.ys;
    let n = y.len();
    if season == 0 || n < season {
        return Err(Error::ContextTooShort { len: n, season });
    }
    let means = (0..horizon).map(|h| y[n - season + h % season]).collect();
    let diffs: Vec<f64> = (season..n).map(|t| y[t] - y[t - season]).collect();
    let std = if diffs.is_empty() {
        SEASONAL_STD_FLOOR
    } else {
        let mu = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / diffs.len() as f64;
        var.sqrt().max(SEASONAL_STD_FLOOR)
    };
    Ok((means, vec![std; horizon]))
}

pub fn write_records_csv<W: Write>(records: &[EvalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<EvalRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Io(std::io::Error::other(e))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rec(model: &str, dataset: &str, rmse: f64, crps: f64) -> EvalRecord {
        EvalRecord {
            model: model.into(),
            dataset: dataset.into(),
            rmse,
            crps,
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(rmse(&[1.5], &[-1.0]).unwrap(), 2.5);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn crps_examples() {
        let at_mean = 2.0 / (2.0 * std::f64::consts::PI).sqrt() - 1.0 / std::f64::consts::PI.sqrt();
        assert_relative_eq!(crps_gaussian(0.0, 1.0, 0.0), at_mean, epsilon = 1e-15);
        assert_relative_eq!(crps_gaussian(0.0, 1.0, 0.0), 0.23369497725510913, epsilon = 1e-12);
        assert_eq!(crps_gaussian(1.0, 0.0, 3.0), 2.0);
    }

    #[test]
    fn crps_scale_equivariance() {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(8);
        for _ in 0..200 {
            let (m, s, y, c) = (
                rng.random_range(-3.0..3.0),
                rng.random_range(0.01..2.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.1..10.0),
            );
            assert_relative_eq!(crps_gaussian(m * c, s * c, y * c), c * crps_gaussian(m, s, y), max_relative = 1e-10);
        }
    }

    #[test]
    fn relative_crps() {
        let recs = vec![
            rec("base", "a", 1.0, 2.0),
            rec("same", "a", 1.0, 2.0),
            rec("half", "a", 1.0, 1.0),
            rec("mixed", "a", 1.0, 1.0),
            rec("base", "b", 1.0, 4.0),
            rec("same", "b", 1.0, 4.0),
            rec("half", "b", 1.0, 2.0),
            rec("mixed", "b", 1.0, 8.0),
        ];
        let rel = crps_relative(&recs, "base").unwrap();
        assert_eq!(rel["base"], 1.0);
        assert_eq!(rel["same"], 1.0);
        assert_relative_eq!(rel["half"], 0.5, epsilon = 1e-15);
        assert_relative_eq!(rel["mixed"], 1.0, epsilon = 1e-15);
        assert!(matches!(crps_relative(&recs, "nope"), Err(Error::MissingBaseline { .. })));
    }

    #[test]
    fn ranks() {
        let one = average_rank(&[rec("a", "x", 1.0, 1.0)], Metric::Crps).unwrap();
        assert_eq!(one["a"], (1.0, 0.0));

        let two = vec![
            rec("a", "x", 1.0, 1.0),
            rec("b", "x", 2.0, 2.0),
            rec("a", "y", 1.0, 1.0),
            rec("b", "y", 2.0, 2.0),
        ];
        let r = average_rank(&two, Metric::Crps).unwrap();
        assert_eq!(r["a"], (1.0, 0.0));
        assert_eq!(r["b"], (2.0, 0.0));

        let tied = vec![rec("a", "x", 1.0, 1.0), rec("b", "x", 1.0, 1.0)];
        let r = average_rank(&tied, Metric::Rmse).unwrap();
        assert_eq!(r["a"].0, 1.5);
        assert_eq!(r["b"].0, 1.5);

        let incomplete = vec![rec("a", "x", 1.0, 1.0), rec("b", "x", 1.0, 1.0), rec("a", "y", 1.0, 1.0)];
        assert!(matches!(average_rank(&incomplete, Metric::Crps), Err(Error::IncompleteGrid { .. })));
    }

    #[test]
    fn rank_standard_error() {
        let recs = vec![
            rec("a", "x", 1.0, 1.0),
            rec("b", "x", 2.0, 2.0),
            rec("a", "y", 3.0, 3.0),
            rec("b", "y", 2.0, 2.0),
        ];
        let r = average_rank(&recs, Metric::Rmse).unwrap();
        // ranks of a are 1 and 2: sd 1/sqrt(2), se 0.5
        assert_eq!(r["a"].0, 1.5);
        assert_relative_eq!(r["a"].1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn seasonal_naive_examples() {
        let ctx = SamplePath::from_values(vec![3.0, 1.0, 4.0, 1.0, 5.0]).unwrap();
        let (m, _) = seasonal_naive_forecast(&ctx, 1, 3).unwrap();
        assert_eq!(m, vec![5.0; 3]);

        let ctx = SamplePath::from_values(vec![1.0, 2.0, 1.0, 2.0]).unwrap();
        let (m, s) = seasonal_naive_forecast(&ctx, 2, 2).unwrap();
        assert_eq!(m, vec![1.0, 2.0]);
        assert_eq!(s, vec![SEASONAL_STD_FLOOR; 2]);

        let (m, _) = seasonal_naive_forecast(&ctx, 2, 5).unwrap();
        assert_eq!(m, vec![1.0, 2.0, 1.0, 2.0, 1.0]);

        assert!(matches!(
            seasonal_naive_forecast(&ctx, 5, 1),
            Err(Error::ContextTooShort { len: 4, season: 5 })
        ));
    }

    #[test]
    fn records_csv_round_trip() {
        let recs = vec![rec("m", "d", 0.5, 0.25)];
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("model,dataset,rmse,crps\n"));
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), recs);
    }
}
