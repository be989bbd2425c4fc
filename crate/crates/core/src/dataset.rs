//! Sample paths, corpora, file loading and corpus preparation (sliding
//! windows, log alignment, truncation, context/target splits).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One observed realization: strictly increasing inputs with finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl SamplePath {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidPath(format!(
                "{} inputs but {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.is_empty() {
            return Err(Error::InvalidPath("path is empty".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample path"));
        }
        if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath(format!(
                "inputs not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { xs, ys })
    }

    /// Path observed at `0, 1, ..., n-1`.
    pub fn from_values(ys: Vec<f64>) -> Result<Self> {
        Self::new((0..ys.len()).map(|i| i as f64).collect(), ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn slice(&self, start: usize, end: usize) -> SamplePath {
        SamplePath {
            xs: self.xs[start..end].to_vec(),
            ys: self.ys[start..end].to_vec(),
        }
    }
}

/// A collection of independent sample paths plus free-form metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub paths: Vec<SamplePath>,
    pub meta: BTreeMap<String, String>,
}

impl Corpus {
    pub fn new(paths: Vec<SamplePath>) -> Self {
        Self {
            paths,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `(min, max)` over every input location in the corpus.
    pub fn input_range(&self) -> Option<(f64, f64)> {
        let mut it = self.paths.iter().flat_map(|p| [p.xs[0], p.xs[p.len() - 1]]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
    }

    /// `m` equally spaced points spanning [`Corpus::input_range`].
    pub fn default_grid(&self, m: usize) -> Result<Vec<f64>> {
        let (lo, hi) = self.input_range().ok_or(Error::EmptyCorpus)?;
        if m == 0 {
            return Err(Error::EmptyGrid);
        }
        if lo == hi {
            return Ok(vec![lo; 1]);
        }
        Ok(crate::linspace(lo, hi, m))
    }

    /// Writes one JSON object per path: `{"id", "t", "y"}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, p) in self.paths.iter().enumerate() {
            let rec = SeriesRecord {
                id: Some(i.to_string()),
                t: Some(p.xs.clone()),
                y: p.ys.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<Vec<f64>>,
    y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesFormat {
    Csv,
    Jsonl,
}

impl SeriesFormat {
    /// Guess from the file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => SeriesFormat::Jsonl,
            _ => SeriesFormat::Csv,
        }
    }
}

/// Loads series from a CSV file (one series, header `t,y` or `y`) or a JSONL
/// file (one `{"id", "t"?, "y"}` object per line).
pub fn load_series(path: &Path, format: SeriesFormat) -> Result<Vec<SamplePath>> {
    let series = match format {
        SeriesFormat::Csv => vec![load_csv(path)?],
        SeriesFormat::Jsonl => load_jsonl(path)?,
    };
    if series.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(series)
}

fn parse_err(path: &Path, line: u64, column: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn load_csv(path: &Path) -> Result<SamplePath> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let y_col = find("y").ok_or_else(|| parse_err(path, 1, 1, "missing required column \"y\""))?;
    let t_col = find("t");

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| -> Result<f64> {
            let raw = record
                .get(col)
                .ok_or_else(|| parse_err(path, line, col as u64 + 1, "missing field"))?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, col as u64 + 1, format!("not a finite number: {raw:?}")))
        };
        let y = field(y_col)?;
        let x = match t_col {
            Some(c) => field(c)?,
            None => xs.len() as f64,
        };
        if let Some(&prev) = xs.last() {
            if x <= prev {
                return Err(Error::NonMonotoneTime {
                    path: path.to_path_buf(),
                    line,
                });
            }
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    SamplePath::new(xs, ys)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(path, line, 1, format!("{other:?}")),
    }
}

fn load_jsonl(path: &Path) -> Result<Vec<SamplePath>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SeriesRecord = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, line_no, e.column() as u64, e.to_string()))?;
        if rec.y.is_empty() {
            return Err(parse_err(path, line_no, 1, "series has no values"));
        }
        let xs = match rec.t {
            Some(t) if t.len() != rec.y.len() => {
                return Err(parse_err(
                    path,
                    line_no,
                    1,
                    format!("\"t\" has {} entries but \"y\" has {}", t.len(), rec.y.len()),
                ))
            }
            Some(t) => t,
            None => (0..rec.y.len()).map(|j| j as f64).collect(),
        };
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneTime {
                path: path.to_path_buf(),
                line: line_no,
            });
        }
        let p = SamplePath::new(xs, rec.y).map_err(|e| parse_err(path, line_no, 1, e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

/// Sliding-window extraction settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    pub context_len: usize,
    pub pred_len: usize,
    pub max_windows: usize,
    pub seed: u64,
    /// Trailing points of every series reserved for evaluation; no window
    /// may overlap them.
    pub holdout_tail: usize,
}

impl WindowConfig {
    pub fn new(context_len: usize, pred_len: usize, max_windows: usize, seed: u64) -> Self {
        Self {
            context_len,
            pred_len,
            max_windows,
            seed,
            holdout_tail: 0,
        }
    }

    pub fn window_len(&self) -> usize {
        self.context_len + self.pred_len
    }
}

/// Splits `total` into integer quotas proportional to `weights`, capped at
/// `caps`, using largest remainders (ties go to the lower index).
fn proportional_quotas(weights: &[f64], caps: &[usize], total: usize) -> Vec<usize> {
    let n = weights.len();
    let mut quota = vec![0usize; n];
    let mut fixed = vec![false; n];
    let mut remaining = total;
    loop {
        let active: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        if active.is_empty() || remaining == 0 {
            break;
        }
        let weight_sum: f64 = active.iter().map(|&i| weights[i]).sum();
        let exact: Vec<f64> = active
            .iter()
            .map(|&i| remaining as f64 * weights[i] / weight_sum)
            .collect();
        let mut trial: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut leftover = remaining - trial.iter().sum::<usize>();
        let mut by_remainder: Vec<usize> = (0..active.len()).collect();
        by_remainder.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in &by_remainder {
            if leftover == 0 {
                break;
            }
            trial[k] += 1;
            leftover -= 1;
        }
        let over: Vec<usize> = (0..active.len())
            .filter(|&k| trial[k] > caps[active[k]])
            .collect();
        if over.is_empty() {
            for (k, &i) in active.iter().enumerate() {
                quota[i] = trial[k];
            }
            break;
        }
        for k in over {
            let i = active[k];
            quota[i] = caps[i];
            fixed[i] = true;
            remaining -= caps[i];
        }
    }
    quota
}

/// Extracts fixed-length windows from `series`.
///
/// Window counts per series are proportional to series length (largest
/// remainder rounding, capped by the number of available placements). Start
/// offsets within a series are sampled without replacement from the
/// generator stream numbered by the series index. Window inputs are shifted
/// so every window starts at `x = 0`.
pub fn extract_windows(series: &[SamplePath], cfg: &WindowConfig) -> Result<Corpus> {
    let w = cfg.window_len();
    if w == 0 {
        return Err(Error::NoUsableSeries(0));
    }
    let usable: Vec<usize> = (0..series.len())
        .filter(|&i| series[i].len() >= w + cfg.holdout_tail)
        .collect();
    if usable.is_empty() {
        return Err(Error::NoUsableSeries(w));
    }
    let placements: Vec<usize> = usable
        .iter()
        .map(|&i| series[i].len() - cfg.holdout_tail - w + 1)
        .collect();
    let total: usize = placements.iter().sum();
    let quotas = if cfg.max_windows >= total {
        placements.clone()
    } else {
        let weights: Vec<f64> = usable.iter().map(|&i| series[i].len() as f64).collect();
        proportional_quotas(&weights, &placements, cfg.max_windows)
    };

    let mut paths = Vec::with_capacity(quotas.iter().sum());
    for (k, &i) in usable.iter().enumerate() {
        if quotas[k] == 0 {
            continue;
        }
        let mut r = rng::stream(cfg.seed, i as u64);
        let mut starts = index::sample(&mut r, placements[k], quotas[k]).into_vec();
        starts.sort_unstable();
        for s in starts {
            let mut p = series[i].slice(s, s + w);
            let x0 = p.xs[0];
            p.xs.iter_mut().for_each(|x| *x -= x0);
            paths.push(p);
        }
    }
    let mut corpus = Corpus::new(paths);
    corpus.meta.insert("windows".into(), corpus.paths.len().to_string());
    corpus.meta.insert("series_used".into(), quotas.iter().filter(|&&q| q > 0).count().to_string());
    corpus.meta.insert("placements".into(), total.to_string());
    Ok(corpus)
}

/// `log(y) - log(y[0])` for one path, returning the removed offset `log(y[0])`.
pub fn log_align_path(path: &SamplePath) -> Option<(SamplePath, f64)> {
    if path.ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let offset = path.ys[0].ln();
    let ys = path.ys.iter().map(|y| y.ln() - offset).collect();
    Some((
        SamplePath {
            xs: path.xs.clone(),
            ys,
        },
        offset,
    ))
}

/// Inverse of [`log_align_path`].
pub fn undo_log_align(values: &[f64], offset: f64) -> Vec<f64> {
    values.iter().map(|v| (v + offset).exp()).collect()
}

pub fn transform_log_align(corpus: &Corpus) -> Result<Corpus> {
    let paths = corpus
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            log_align_path(p)
                .map(|(aligned, _)| aligned)
                .ok_or(Error::NonPositiveValue(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        paths,
        meta: corpus.meta.clone(),
    })
}

/// Keeps `floor(full_fraction * K)` randomly chosen paths intact and cuts
/// every other path to its first `ceil(u * len)` points, `u ~ U(lo, hi)`.
/// Out-of-range fractions are clamped to `[0, 1]`.
pub fn truncate_paths(corpus: &Corpus, full_fraction: f64, lo: f64, hi: f64, seed: u64) -> Corpus {
    let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let full_fraction = clamp(full_fraction);
    let (lo, hi) = {
        let (a, b) = (clamp(lo), clamp(hi));
        if a <= b { (a, b) } else { (b, a) }
    };
    let k = corpus.paths.len();
    let n_full = ((full_fraction * k as f64).floor() as usize).min(k);
    let mut keep = vec![false; k];
    for i in index::sample(&mut rng::stream(seed, 0), k, n_full) {
        keep[i] = true;
    }
    let mut draws = rng::stream(seed, 1);
    let paths = corpus
        .paths
        .iter()
        .zip(&keep)
        .map(|(p, &full)| {
            if full {
                return p.clone();
            }
            let u = lo + (hi - lo) * draws.random::<f64>();
            let n = ((u * p.len() as f64).ceil() as usize).clamp(1, p.len());
            p.slice(0, n)
        })
        .collect();
    Corpus {
        paths,
        meta: corpus.meta.clone(),
    }
}

/// First `ceil(fraction * len)` points as context, the rest as target. Both
/// parts are non-empty.
pub fn split_context_target(path: &SamplePath, observed_fraction: f64) -> Result<(SamplePath, SamplePath)> {
    let n = path.len();
    if n < 2 {
        return Err(Error::PathTooShort(n));
    }
    let f = observed_fraction.clamp(0.0, 1.0);
    // the 1e-9 keeps 0.4 * 10 from rounding up to 5
    let cut = ((f * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    Ok((path.slice(0, cut), path.slice(cut, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn ramp(n: usize) -> SamplePath {
        SamplePath::from_values((0..n).map(|i| i as f64).collect()).unwrap()
    }

    fn write_tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sample_path_invariants() {
        assert!(SamplePath::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(SamplePath::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(SamplePath::new(vec![], vec![]).is_err());
        assert!(SamplePath::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_with_time_column() {
        let f = write_tmp("t,y\n0,1.0\n1,2.0\n", ".csv");
        let s = load_series(f.path(), SeriesFormat::Csv).unwrap();
        assert_eq!(s, vec![SamplePath::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap()]);
    }

    #[test]
    fn csv_without_time_column_uses_index() {
        let f = write_tmp("y\n5\n6\n7\n", ".csv");
        let s = load_series(f.path(), SeriesFormat::Csv).unwrap();
        assert_eq!(s[0].xs, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn csv_errors() {
        let f = write_tmp("t,y\n1,1.0\n0,2.0\n", ".csv");
        match load_series(f.path(), SeriesFormat::Csv) {
            Err(Error::NonMonotoneTime { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("t,y\n0,1.0\n1,abc\n", ".csv");
        match load_series(f.path(), SeriesFormat::Csv) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("t,y\n", ".csv");
        assert!(matches!(load_series(f.path(), SeriesFormat::Csv), Err(Error::EmptyFile(_))));
        let f = write_tmp("", ".csv");
        assert!(load_series(f.path(), SeriesFormat::Csv).is_err());
    }

    #[test]
    fn jsonl_two_records() {
        let f = write_tmp(
            "{\"id\":\"a\",\"t\":[0,1,2],\"y\":[1,2,3]}\n{\"id\":\"b\",\"y\":[4,5,6]}\n",
            ".jsonl",
        );
        let s = load_series(f.path(), SeriesFormat::Jsonl).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|p| p.len() == 3));
        assert_eq!(s[1].xs, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn jsonl_errors_report_line() {
        let f = write_tmp("{\"y\":[1]}\n{\"y\":[1,\n", ".jsonl");
        match load_series(f.path(), SeriesFormat::Jsonl) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("{\"t\":[2,1],\"y\":[1,1]}\n", ".jsonl");
        assert!(matches!(
            load_series(f.path(), SeriesFormat::Jsonl),
            Err(Error::NonMonotoneTime { line: 1, .. })
        ));
        let f = write_tmp("\n\n", ".jsonl");
        assert!(matches!(load_series(f.path(), SeriesFormat::Jsonl), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn single_placement_window() {
        let s = vec![ramp(5)];
        let c = extract_windows(&s, &WindowConfig::new(3, 2, 10, 0)).unwrap();
        assert_eq!(c.paths, s);
    }

    #[test]
    fn all_placements_when_max_covers_them() {
        let c = extract_windows(&[ramp(100)], &WindowConfig::new(6, 4, 91, 7)).unwrap();
        let starts: BTreeSet<i64> = c.paths.iter().map(|p| p.ys[0] as i64).collect();
        let expected: BTreeSet<i64> = (0..91).collect();
        assert_eq!(starts, expected);
        assert!(c.paths.iter().all(|p| p.xs[0] == 0.0 && p.len() == 10));
    }

    #[test]
    fn quotas_follow_series_length() {
        let series = vec![ramp(100), ramp(200)];
        let c = extract_windows(&series, &WindowConfig::new(5, 5, 30, 1)).unwrap();
        assert_eq!(c.paths.len(), 30);
        // the ramp value at window start tells which series it came from only
        // through ordering: windows are emitted series by series
        let quotas = proportional_quotas(&[100.0, 200.0], &[91, 191], 30);
        assert_eq!(quotas, vec![10, 20]);
    }

    #[test]
    fn quotas_respect_caps() {
        let q = proportional_quotas(&[10.0, 1000.0], &[1, 1000], 50);
        assert_eq!(q.iter().sum::<usize>(), 50);
        assert!(q[0] <= 1);
        let q = proportional_quotas(&[1.0, 1.0, 1.0], &[5, 5, 5], 10);
        assert_eq!(q, vec![4, 3, 3]);
    }

    #[test]
    fn windows_are_deterministic_and_verbatim() {
        let series = vec![ramp(60), SamplePath::from_values((0..80).map(|i| (i * i) as f64).collect()).unwrap()];
        let cfg = WindowConfig::new(8, 4, 25, 99);
        let a = extract_windows(&series, &cfg).unwrap();
        let b = extract_windows(&series, &cfg).unwrap();
        assert_eq!(a, b);
        for p in &a.paths {
            let found = series.iter().any(|s| s.ys.windows(12).any(|w| w == p.ys.as_slice()));
            assert!(found);
        }
    }

    #[test]
    fn no_usable_series() {
        assert!(matches!(
            extract_windows(&[ramp(3)], &WindowConfig::new(3, 2, 10, 0)),
            Err(Error::NoUsableSeries(5))
        ));
    }

    #[test]
    fn holdout_tail_is_never_windowed() {
        let mut cfg = WindowConfig::new(3, 2, 100, 0);
        cfg.holdout_tail = 10;
        let c = extract_windows(&[ramp(30)], &cfg).unwrap();
        assert_eq!(c.paths.len(), 16);
        assert!(c.paths.iter().all(|p| *p.ys.last().unwrap() < 20.0));
    }

    #[test]
    fn log_align_examples() {
        let e = std::f64::consts::E;
        let c = Corpus::new(vec![
            SamplePath::from_values(vec![1.0, e, e * e]).unwrap(),
            SamplePath::from_values(vec![5.0, 5.0, 5.0]).unwrap(),
        ]);
        let out = transform_log_align(&c).unwrap();
        for (got, want) in out.paths[0].ys.iter().zip([0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(out.paths[1].ys, vec![0.0; 3]);

        let bad = Corpus::new(vec![ramp(2), SamplePath::from_values(vec![2.0, -1.0]).unwrap()]);
        // ramp starts at 0, which is already non-positive
        assert!(matches!(transform_log_align(&bad), Err(Error::NonPositiveValue(0))));
        let bad = Corpus::new(vec![SamplePath::from_values(vec![2.0, -1.0]).unwrap()]);
        assert!(matches!(transform_log_align(&bad), Err(Error::NonPositiveValue(0))));
    }

    #[test]
    fn log_align_round_trip() {
        let p = SamplePath::from_values(vec![3.5, 0.2, 17.0, 1e-3]).unwrap();
        let (aligned, offset) = log_align_path(&p).unwrap();
        let back = undo_log_align(&aligned.ys, offset);
        for (a, b) in back.iter().zip(&p.ys) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn truncation_examples() {
        let c = Corpus::new((0..20).map(|_| ramp(50)).collect());
        assert_eq!(truncate_paths(&c, 1.0, 0.2, 0.8, 3), c);
        let half = truncate_paths(&c, 0.0, 0.5, 0.5, 3);
        assert!(half.paths.iter().all(|p| p.len() == 25));
        let tiny = truncate_paths(&c, 0.0, 0.0, 0.0, 3);
        assert!(tiny.paths.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn truncation_mean_length() {
        let c = Corpus::new((0..1000).map(|_| ramp(50)).collect());
        let t = truncate_paths(&c, 0.6, 0.2, 0.8, 11);
        let full = t.paths.iter().filter(|p| p.len() == 50).count();
        assert!(full >= 600);
        let cut: Vec<usize> = t.paths.iter().map(|p| p.len()).filter(|&l| l < 50).collect();
        assert!(cut.len() >= 395, "{}", cut.len());
        let mean = cut.iter().sum::<usize>() as f64 / cut.len() as f64;
        assert!((0.45 * 50.0..=0.55 * 50.0).contains(&mean), "{mean}");
        assert_eq!(t, truncate_paths(&c, 0.6, 0.2, 0.8, 11));
    }

    #[test]
    fn split_examples() {
        let p = ramp(10);
        let (ctx, tgt) = split_context_target(&p, 0.4).unwrap();
        assert_eq!((ctx.len(), tgt.len()), (4, 6));
        let mut joined = ctx.ys.clone();
        joined.extend(&tgt.ys);
        assert_eq!(joined, p.ys);
        let (ctx, _) = split_context_target(&ramp(50), 0.1).unwrap();
        assert_eq!(ctx.len(), 5);
        assert!(matches!(split_context_target(&ramp(1), 0.5), Err(Error::PathTooShort(1))));
    }

    #[test]
    fn jsonl_write_then_load() {
        let c = Corpus::new(vec![ramp(3), SamplePath::new(vec![0.5, 2.0], vec![1.0, -1.0]).unwrap()]);
        let mut f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
        c.write_jsonl(&mut f).unwrap();
        assert_eq!(load_series(f.path(), SeriesFormat::Jsonl).unwrap(), c.paths);
    }
}
