//! The multi-dataset experiment: for every generated dataset and exponent,
//! run a batch of restarts and collect sorted weights and normalised
//! objectives in long-format tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate, range_normalise, SyntheticSpec};
use crate::engine;
use crate::error::{Error, Result};
use crate::model::{validate_p, Dataset, MwkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub p_values: Vec<f64>,
    pub n_datasets: usize,
    pub restarts_per_dataset: usize,
    pub dataset_spec: SyntheticSpec,
    /// Clusters requested from the engine.
    pub k: usize,
    /// Base seed for centroid initialisation.
    pub seed: u64,
    pub tol_objective: f64,
    pub max_iter: usize,
    pub center_tol: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let defaults = MwkConfig::new(3, 2.0);
        Self {
            p_values: vec![1.1, 1.5, 2.0, 5.0],
            n_datasets: 10,
            restarts_per_dataset: 20,
            dataset_spec: SyntheticSpec::default(),
            k: 3,
            seed: MwkConfig::DEFAULT_SEED,
            tol_objective: defaults.tol_objective,
            max_iter: defaults.max_iter,
            center_tol: defaults.center_tol,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() {
            return Err(Error::InvalidConfig("p_values must not be empty".into()));
        }
        for &p in &self.p_values {
            validate_p(p)?;
        }
        if self.n_datasets == 0 {
            return Err(Error::InvalidConfig("n_datasets must be at least 1".into()));
        }
        self.dataset_spec.validate()?;
        if self.restarts_per_dataset == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        self.config(self.p_values[0], self.seed)
            .validate(self.dataset_spec.n_points)
    }

    /// Dataset `d` is generated from `dataset_spec.seed + d`.
    pub fn dataset_seed(&self, dataset: usize) -> u64 {
        self.dataset_spec.seed.wrapping_add(dataset as u64)
    }

    /// Restart `r` on dataset `d` starts from seed `seed + (d << 32) + r`,
    /// shared across exponents.
    pub fn run_seed(&self, dataset: usize, restart: usize) -> u64 {
        self.seed
            .wrapping_add((dataset as u64) << 32)
            .wrapping_add(restart as u64)
    }

    fn config(&self, p: f64, seed: u64) -> MwkConfig {
        MwkConfig {
            k: self.k,
            p,
            tol_objective: self.tol_objective,
            max_iter: self.max_iter,
            center_tol: self.center_tol,
            seed,
            restarts: 1,
        }
    }

    /// Generates and range-normalises dataset `d`.
    pub fn dataset(&self, dataset: usize) -> Result<Dataset> {
        let spec = SyntheticSpec {
            seed: self.dataset_seed(dataset),
            ..self.dataset_spec.clone()
        };
        let (raw, _) = generate(&spec)?;
        Ok(range_normalise(&raw)?.0)
    }
}

/// One (dataset, exponent, restart) run, reduced to what the tables need.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub dataset: usize,
    pub p: f64,
    pub restart: usize,
    pub objective: f64,
    pub normalised_objective: f64,
    pub weights: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-exponent aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub p: f64,
    pub runs: usize,
    pub mean_normalised_objective: f64,
    pub min_normalised_objective: f64,
    pub max_normalised_objective: f64,
    /// Means over the best run of each dataset, every cluster.
    pub mean_informative_weight: f64,
    pub mean_noise_weight: f64,
    pub max_weight_deviation_from_uniform: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub total_runs: usize,
    pub per_p: Vec<ExponentSummary>,
    pub spec: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// Ordered by dataset, then exponent, then restart.
    pub runs: Vec<ExperimentRun>,
}

/// Runs every (dataset, exponent, restart) combination. Results are
/// ordered by dataset, exponent and restart regardless of execution order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let datasets = (0..spec.n_datasets)
        .into_par_iter()
        .map(|d| spec.dataset(d))
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize, usize)> = (0..spec.n_datasets)
        .flat_map(|d| {
            (0..spec.p_values.len())
                .flat_map(move |pi| (0..spec.restarts_per_dataset).map(move |r| (d, pi, r)))
        })
        .collect();

    let runs = tasks
        .into_par_iter()
        .map(|(d, pi, r)| {
            let p = spec.p_values[pi];
            let config = spec.config(p, spec.run_seed(d, r));
            let report = engine::run(&datasets[d], &config)
                .map_err(|e| e.context(format!("dataset {d}, p {p}, restart {r}")))?;
            Ok(ExperimentRun {
                dataset: d,
                p,
                restart: r,
                objective: report.final_state.objective,
                normalised_objective: report.normalised_objective.expect("weighted run"),
                weights: report.final_state.weights,
                iterations: report.iterations,
                converged: report.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        runs,
    })
}

impl ExperimentResult {
    /// Best (lowest objective, earliest restart on ties) run per dataset and exponent.
    pub fn best_runs(&self) -> Vec<&ExperimentRun> {
        let mut best: Vec<&ExperimentRun> = Vec::new();
        for run in &self.runs {
            match best.last_mut() {
                Some(b) if b.dataset == run.dataset && b.p == run.p => {
                    if run.objective < b.objective {
                        *b = run;
                    }
                }
                _ => best.push(run),
            }
        }
        best
    }

    pub fn summary(&self) -> ExperimentSummary {
        let n_inf = self.spec.dataset_spec.n_informative;
        let per_p = self
            .spec
            .p_values
            .iter()
            .map(|&p| {
                let values: Vec<f64> = self
                    .runs
                    .iter()
                    .filter(|r| r.p == p)
                    .map(|r| r.normalised_objective)
                    .collect();
                let best: Vec<&ExperimentRun> =
                    self.best_runs().into_iter().filter(|r| r.p == p).collect();
                let (mut inf, mut noise) = (Vec::new(), Vec::new());
                let mut max_dev: f64 = 0.0;
                for run in &best {
                    let m = run.weights.ncols();
                    for row in run.weights.rows() {
                        for (v, &w) in row.iter().enumerate() {
                            if v < n_inf {
                                inf.push(w);
                            } else {
                                noise.push(w);
                            }
                            max_dev = max_dev.max((w - 1.0 / m as f64).abs());
                        }
                    }
                }
                ExponentSummary {
                    p,
                    runs: values.len(),
                    mean_normalised_objective: mean(&values),
                    min_normalised_objective: values.iter().copied().fold(f64::INFINITY, f64::min),
                    max_normalised_objective: values
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max),
                    mean_informative_weight: mean(&inf),
                    mean_noise_weight: mean(&noise),
                    max_weight_deviation_from_uniform: max_dev,
                }
            })
            .collect();
        ExperimentSummary {
            total_runs: self.runs.len(),
            per_p,
            spec: self.spec.clone(),
        }
    }

    /// Writes the plot tables and summary into `dir`:
    ///
    /// * `weights_sorted.csv` — `dataset,p,cluster,rank,weight`, best run, each
    ///   cluster's weights in descending order (rank 1 = largest)
    /// * `weights_sorted_aggregated.csv` — `dataset,p,rank,weight`, the
    ///   rank-wise mean of the above over clusters
    /// * `normalised_objective.csv` — `dataset,p,run,value`, every run
    /// * `summary.json` — [`ExperimentSummary`]
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let best = self.best_runs();

        let mut per_cluster = String::from("dataset,p,cluster,rank,weight\n");
        let mut aggregated = String::from("dataset,p,rank,weight\n");
        for run in &best {
            let (k, m) = run.weights.dim();
            let mut rank_sums = vec![0.0; m];
            for (l, row) in run.weights.rows().into_iter().enumerate() {
                let mut sorted = row.to_vec();
                sorted.sort_by(|a, b| b.total_cmp(a));
                for (rank, w) in sorted.iter().enumerate() {
                    per_cluster.push_str(&format!(
                        "{},{},{},{},{}\n",
                        run.dataset,
                        run.p,
                        l,
                        rank + 1,
                        w
                    ));
                    rank_sums[rank] += w;
                }
            }
            for (rank, s) in rank_sums.iter().enumerate() {
                aggregated.push_str(&format!(
                    "{},{},{},{}\n",
                    run.dataset,
                    run.p,
                    rank + 1,
                    s / k as f64
                ));
            }
        }

        let mut objectives = String::from("dataset,p,run,value\n");
        for run in &self.runs {
            objectives.push_str(&format!(
                "{},{},{},{}\n",
                run.dataset, run.p, run.restart, run.normalised_objective
            ));
        }

        write_text(&dir.join("weights_sorted.csv"), &per_cluster)?;
        write_text(&dir.join("weights_sorted_aggregated.csv"), &aggregated)?;
        write_text(&dir.join("normalised_objective.csv"), &objectives)?;
        let summary = serde_json::to_string_pretty(&self.summary()).expect("summary serialises");
        write_text(&dir.join("summary.json"), &(summary + "\n"))
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
