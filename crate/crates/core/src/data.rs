//! Synthetic mixtures with uniform noise features, range normalisation and
//! CSV/JSON file I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Parameters of a Gaussian-mixture dataset padded with noise features.
///
/// Informative features come first, noise features last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_points: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub k_true: usize,
    pub seed: u64,
    /// Per-coordinate standard deviation of each component.
    pub cluster_std: f64,
    /// Component centres are drawn uniformly from this interval on every informative axis.
    pub center_box: (f64, f64),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_points: 1000,
            n_informative: 4,
            n_noise: 4,
            k_true: 3,
            seed: 1,
            cluster_std: 1.0,
            center_box: (-2.0, 2.0),
        }
    }
}

impl SyntheticSpec {
    pub fn m(&self) -> usize {
        self.n_informative + self.n_noise
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.k_true == 0 || self.n_points < self.k_true {
            return fail(format!(
                "need n_points >= k_true >= 1, got n_points = {}, k_true = {}",
                self.n_points, self.k_true
            ));
        }
        if self.n_informative == 0 {
            return fail("n_informative must be at least 1".into());
        }
        if !(self.cluster_std >= 0.0 && self.cluster_std.is_finite()) {
            return fail(format!(
                "cluster_std must be >= 0, got {}",
                self.cluster_std
            ));
        }
        let (lo, hi) = self.center_box;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return fail(format!(
                "center_box must be a finite interval, got [{lo}, {hi}]"
            ));
        }
        Ok(())
    }
}

/// ChaCha stream ids: one per block of generated values.
const STREAM_CENTERS: u64 = 0;
const STREAM_INFORMATIVE: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws a labelled dataset and returns it with the true component centres.
///
/// Point `i` belongs to component `i mod k_true`. Each block (centres,
/// informative coordinates, noise) uses its own ChaCha8 stream of the seed,
/// so changing `n_noise` leaves the informative block untouched.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, Array2<f64>)> {
    spec.validate()?;
    let (n, k, inf) = (spec.n_points, spec.k_true, spec.n_informative);
    let (lo, hi) = spec.center_box;

    let mut rng = stream(spec.seed, STREAM_CENTERS);
    let centers = Array2::from_shape_fn((k, inf), |_| lo + (hi - lo) * rng.random::<f64>());

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut values = Array2::zeros((n, spec.m()));
    let mut rng = stream(spec.seed, STREAM_INFORMATIVE);
    for (i, &l) in labels.iter().enumerate() {
        for v in 0..inf {
            let e: f64 = rng.sample(StandardNormal);
            values[[i, v]] = centers[[l, v]] + spec.cluster_std * e;
        }
    }
    let mut rng = stream(spec.seed, STREAM_NOISE);
    for i in 0..n {
        for v in inf..spec.m() {
            values[[i, v]] = rng.random::<f64>();
        }
    }

    let names = (1..=inf)
        .map(|j| format!("informative_{j}"))
        .chain((1..=spec.n_noise).map(|j| format!("noise_{j}")))
        .collect();
    let dataset = Dataset::new(values)?
        .with_feature_names(names)?
        .with_labels(labels)?;
    Ok((dataset, centers))
}

/// Per-feature statistics recorded by [`range_normalise`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub feature: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// `x ← (x − mean) / (max − min)` per feature.
pub fn range_normalise(dataset: &Dataset) -> Result<(Dataset, Vec<FeatureStats>)> {
    let mut values = dataset.values().clone();
    let mut stats = Vec::with_capacity(dataset.m());
    for (v, mut col) in values.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / col.len() as f64;
        let (min, max) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        if max <= min {
            return Err(Error::ConstantFeature(v));
        }
        let range = max - min;
        col.mapv_inplace(|x| (x - mean) / range);
        let feature = dataset
            .feature_names
            .as_ref()
            .map_or_else(|| format!("f{}", v + 1), |names| names[v].clone());
        stats.push(FeatureStats {
            feature,
            mean,
            min,
            max,
        });
    }
    let mut out = Dataset::new(values)?;
    out.feature_names = dataset.feature_names.clone();
    out.labels = dataset.labels.clone();
    Ok((out, stats))
}

pub fn save_stats_json(stats: &[FeatureStats], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, stats).map_err(|e| Error::io(path, e.into()))?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// How to read a dataset CSV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Treat the last column as integer cluster labels.
    pub labels_column: bool,
}

fn parse_error(line: u64, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

/// Reads a comma-separated dataset.
///
/// The first line is a header when none of its cells parse as a number.
/// Error positions are 1-based lines and columns.
pub fn load_csv(path: &Path, options: CsvOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_csv(reader: impl std::io::Read, options: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io("<csv>", io),
                kind => parse_error(line, 0, format!("{kind:?}")),
            }
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && record.iter().all(|c| c.trim().parse::<f64>().is_err()) {
            header = Some(record.iter().map(|c| c.trim().to_string()).collect());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    line,
                    record.len().min(w) + 1,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            None => width = Some(record.len()),
            _ => {}
        }
        let n_values = if options.labels_column {
            if record.len() < 2 {
                return Err(parse_error(
                    line,
                    1,
                    "need at least one feature and a label",
                ));
            }
            let col = record.len();
            let cell = record[col - 1].trim();
            labels.push(
                cell.parse::<usize>()
                    .map_err(|_| parse_error(line, col, format!("invalid label {cell:?}")))?,
            );
            col - 1
        } else {
            record.len()
        };
        let mut row = Vec::with_capacity(n_values);
        for (c, cell) in record.iter().take(n_values).enumerate() {
            let x = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_error(line, c + 1, format!("invalid number {cell:?}")))?;
            if !x.is_finite() {
                return Err(parse_error(
                    line,
                    c + 1,
                    format!("non-finite value {cell:?}"),
                ));
            }
            row.push(x);
        }
        rows.push(row);
    }

    let dataset = crate::model::validate_dataset(&rows)?;
    let dataset = match header {
        Some(mut names) => {
            if options.labels_column {
                names.pop();
            }
            dataset.with_feature_names(names)?
        }
        None => dataset,
    };
    if options.labels_column {
        dataset.with_labels(labels)
    } else {
        Ok(dataset)
    }
}

/// Writes a dataset as CSV: a header when feature names are present, and a
/// trailing `label` column when labels are. Numbers use the shortest
/// decimal form that parses back to the same `f64`.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        kind => Error::io("<csv>", std::io::Error::other(format!("{kind:?}"))),
    };
    if let Some(names) = &dataset.feature_names {
        let mut header = names.clone();
        if dataset.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(io)?;
    }
    let mut record = Vec::with_capacity(dataset.m() + 1);
    for (i, row) in dataset.values().rows().into_iter().enumerate() {
        record.clear();
        record.extend(row.iter().map(|x| x.to_string()));
        if let Some(labels) = &dataset.labels {
            record.push(labels[i].to_string());
        }
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
