//! Shared domain types: datasets, run configuration, clustering state and
//! the per-run report.
//!
//! Indices are 0-based throughout. Cluster `l` and feature `v` address
//! row `l` and column `v` of every k×m matrix.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::engine::EngineEvent;
use crate::error::{Error, Result};
use crate::theory::BoundsResult;

/// Smallest admissible distance between `p` and 1.
pub const MIN_P_GAP: f64 = 1e-9;

/// An n×m matrix of finite reals with optional names and ground truth.
///
/// Labels are carried for evaluation only; nothing in the clustering path
/// reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
    pub feature_names: Option<Vec<String>>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Wraps an existing matrix after checking shape and finiteness.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self {
            values,
            feature_names: None,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} points",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature names for {} features",
                names.len(),
                self.m()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of features.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Builds a [`Dataset`] from row vectors, reporting the first offending cell.
pub fn validate_dataset(rows: &[Vec<f64>]) -> Result<Dataset> {
    let m = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || m == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut flat = Vec::with_capacity(rows.len() * m);
    for (row, values) in rows.iter().enumerate() {
        if values.len() != m {
            return Err(Error::RaggedRows {
                row,
                expected: m,
                found: values.len(),
            });
        }
        if let Some(col) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        flat.extend_from_slice(values);
    }
    let values = Array2::from_shape_vec((rows.len(), m), flat).expect("shape checked above");
    Dataset::new(values)
}

/// Parameters of one mwk-means run (or a family of restarts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwkConfig {
    pub k: usize,
    /// Minkowski exponent, strictly greater than 1.
    pub p: f64,
    /// Relative objective change that counts as converged.
    pub tol_objective: f64,
    pub max_iter: usize,
    /// Absolute bracket width at which the centre solver stops.
    pub center_tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl MwkConfig {
    pub const DEFAULT_SEED: u64 = 20_240_601;

    pub fn new(k: usize, p: f64) -> Self {
        Self {
            k,
            p,
            tol_objective: 1e-6,
            max_iter: 100,
            center_tol: 1e-10,
            seed: Self::DEFAULT_SEED,
            restarts: 20,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_objective = tol;
        self
    }

    /// Checks the configuration against a dataset of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        validate_p(self.p)?;
        if self.k == 0 || self.k > n {
            return Err(Error::InvalidConfig(format!(
                "k must satisfy 1 <= k <= n = {n}, got {}",
                self.k
            )));
        }
        if !(self.tol_objective >= 0.0 && self.tol_objective.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tol_objective must be a nonnegative finite number, got {}",
                self.tol_objective
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !(self.center_tol > 0.0 && self.center_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "center_tol must be positive and finite, got {}",
                self.center_tol
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be positive".into()));
        }
        Ok(())
    }
}

/// Rejects exponents at or numerically indistinguishable from 1, and non-finite ones.
pub fn validate_p(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 + MIN_P_GAP {
        return Err(Error::InvalidConfig(format!(
            "Minkowski exponent must satisfy p > 1 (and be finite), got {p}"
        )));
    }
    Ok(())
}

/// Assignments, centroids, weights and objective of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringState {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub weights: Array2<f64>,
    pub objective: f64,
}

impl ClusteringState {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Within-cluster dispersions `d[l][v] = Σ_{i∈S_l} |x_iv − z_lv|^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionMatrix(pub Array2<f64>);

impl DispersionMatrix {
    /// Recomputes dispersions from data, assignments and centroids.
    pub fn compute(
        dataset: &Dataset,
        assignments: &[usize],
        centroids: &Array2<f64>,
        p: f64,
    ) -> Result<Self> {
        if assignments.len() != dataset.n() || centroids.ncols() != dataset.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} assignments / {} centroid columns for a {}x{} dataset",
                assignments.len(),
                centroids.ncols(),
                dataset.n(),
                dataset.m()
            )));
        }
        let k = centroids.nrows();
        let mut d = Array2::<f64>::zeros((k, dataset.m()));
        for (i, &l) in assignments.iter().enumerate() {
            if l >= k {
                return Err(Error::DimensionMismatch(format!(
                    "point {i} assigned to cluster {l} but k = {k}"
                )));
            }
            let x = dataset.point(i);
            let z = centroids.row(l);
            for v in 0..dataset.m() {
                d[[l, v]] += (x[v] - z[v]).abs().powf(p);
            }
        }
        Ok(Self(d))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || m == 0 {
            return Err(Error::EmptyMatrix);
        }
        if let Some(row) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::RaggedRows {
                row,
                expected: m,
                found: rows[row].len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if let Some(&bad) = flat.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::NonpositiveDispersion(bad));
        }
        Ok(Self(
            Array2::from_shape_vec((rows.len(), m), flat).expect("shape checked above"),
        ))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, l: usize) -> ArrayView1<'_, f64> {
        self.0.row(l)
    }

    /// Largest entry-wise relative difference against `other`.
    pub fn max_relative_diff(&self, other: &DispersionMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| {
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Everything one engine run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Objective after each full iteration.
    pub objective_trace: Vec<f64>,
    pub events: Vec<EngineEvent>,
    pub final_state: ClusteringState,
    pub dispersions: DispersionMatrix,
    /// Objective bounds from the final dispersions; absent for the classical baseline.
    pub bounds: Option<BoundsResult>,
    pub normalised_objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    /// Exponent the run used (2 for the classical baseline).
    pub p: f64,
}

impl RunReport {
    pub fn total_repairs(&self) -> usize {
        self.events.iter().map(|e| e.n_empty_repaired).sum()
    }

    /// Checks the trace is non-increasing over repair-free transitions,
    /// with relative slack `rel_slack`. Returns the first offending index.
    pub fn first_monotonicity_violation(&self, rel_slack: f64) -> Option<usize> {
        (1..self.objective_trace.len()).find(|&t| {
            let repaired = self.events.get(t).is_some_and(|e| e.n_empty_repaired > 0);
            let prev = self.objective_trace[t - 1];
            !repaired && self.objective_trace[t] > prev + rel_slack * prev.abs()
        })
    }

    pub fn to_json(&self) -> RunReportJson {
        let rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect();
        RunReportJson {
            p: self.p,
            seed: self.seed,
            k: self.final_state.k(),
            m: self.final_state.centroids.ncols(),
            iterations: self.iterations,
            converged: self.converged,
            objective: self.final_state.objective,
            objective_trace: self.objective_trace.clone(),
            assignments: self.final_state.assignments.clone(),
            centroids: rows(&self.final_state.centroids),
            weights: rows(&self.final_state.weights),
            dispersions: rows(&self.dispersions.0),
            bounds: self.bounds.as_ref().map(|b| BoundsJson {
                lower: b.lower,
                upper: b.upper,
            }),
            normalised_objective: self.normalised_objective,
            total_repairs: self.total_repairs(),
        }
    }
}

/// Serialised form of a [`RunReport`], with matrices as nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReportJson {
    pub p: f64,
    pub seed: u64,
    pub k: usize,
    pub m: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub dispersions: Vec<Vec<f64>>,
    pub bounds: Option<BoundsJson>,
    pub normalised_objective: Option<f64>,
    pub total_repairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsJson {
    pub lower: f64,
    pub upper: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn well_formed_matrix() {
        let d = validate_dataset(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!((d.n(), d.m()), (2, 2));
    }

    #[test]
    fn nan_cell_is_located() {
        let err = validate_dataset(&[vec![0.0, f64::NAN], vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        let err = validate_dataset(&[vec![0.0, 1.0], vec![f64::INFINITY, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn empty_and_ragged() {
        assert!(matches!(validate_dataset(&[]), Err(Error::EmptyMatrix)));
        assert!(matches!(
            validate_dataset(&[vec![], vec![]]),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            validate_dataset(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::RaggedRows {
                row: 1,
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn labels_must_match_rows() {
        let d = validate_dataset(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(d.clone().with_labels(vec![0]).is_err());
        assert!(d.with_labels(vec![0, 1]).is_ok());
    }

    #[test]
    fn config_rejects_bad_p_and_k() {
        assert!(MwkConfig::new(2, 2.0).validate(5).is_ok());
        assert!(MwkConfig::new(2, 1.0).validate(5).is_err());
        assert!(MwkConfig::new(2, 1.0 + 1e-10).validate(5).is_err());
        assert!(MwkConfig::new(2, f64::INFINITY).validate(5).is_err());
        assert!(MwkConfig::new(0, 2.0).validate(5).is_err());
        assert!(MwkConfig::new(6, 2.0).validate(5).is_err());
        assert!(MwkConfig::new(2, 2.0).with_restarts(0).validate(5).is_err());
        let msg = MwkConfig::new(2, 0.5).validate(5).unwrap_err().to_string();
        assert!(msg.contains("p > 1"), "{msg}");
    }

    #[test]
    fn dispersions_by_hand() {
        let d = validate_dataset(&[vec![0.0, 1.0], vec![2.0, 1.0], vec![5.0, 5.0]]).unwrap();
        let z = array![[1.0, 1.0], [5.0, 4.0]];
        let disp = DispersionMatrix::compute(&d, &[0, 0, 1], &z, 3.0).unwrap();
        assert_eq!(disp.0, array![[2.0, 0.0], [0.0, 1.0]]);
        assert!(DispersionMatrix::compute(&d, &[0, 0, 2], &z, 3.0).is_err());
    }
}
