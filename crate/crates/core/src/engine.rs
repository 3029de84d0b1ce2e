//! The mwk-means loop: assign → centres → weights, repeated until the
//! objective settles, plus restarts and a classical k-means baseline.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{minkowski_center, weighted_distance_unchecked};
use crate::model::{ClusteringState, Dataset, DispersionMatrix, MwkConfig, RunReport};
use crate::theory::{normalised_objective, objective_bounds, objective_with_weights};
use crate::weighting::update_weights;

/// One completed iteration of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    /// 1-based iteration number.
    pub iteration: usize,
    pub objective: f64,
    /// Points whose cluster changed this iteration (all `n` on the first).
    pub n_reassigned: usize,
    pub n_empty_repaired: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Minkowski centres and learned weights.
    Weighted,
    /// Squared Euclidean distance, mean centres, no weights.
    Classic,
}

/// Nearest-centroid assignment under the weighted Minkowski distance.
/// Ties go to the lowest cluster index.
pub fn assign_points(
    dataset: &Dataset,
    centroids: &Array2<f64>,
    weights: &Array2<f64>,
    p: f64,
) -> Vec<usize> {
    let k = centroids.nrows();
    let rows = dataset.values().rows();
    rows.into_iter()
        .map(|x| {
            let x = x.as_slice().expect("dataset rows are contiguous");
            let mut best = (f64::INFINITY, 0);
            for l in 0..k {
                let d = weighted_distance_unchecked(
                    x,
                    centroids.row(l).as_slice().expect("contiguous"),
                    weights.row(l).as_slice().expect("contiguous"),
                    p,
                );
                if d < best.0 {
                    best = (d, l);
                }
            }
            best.1
        })
        .collect()
}

/// Component-wise Minkowski centre of every cluster.
pub fn update_centroids(
    dataset: &Dataset,
    assignments: &[usize],
    k: usize,
    p: f64,
    center_tol: f64,
) -> Result<Array2<f64>> {
    let m = dataset.m();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in assignments.iter().enumerate() {
        members[l].push(i);
    }
    if let Some(l) = members.iter().position(Vec::is_empty) {
        return Err(Error::EmptyCluster(l));
    }
    let values = dataset.values();
    let mut centroids = Array2::zeros((k, m));
    let mut column = Vec::new();
    for (l, idx) in members.iter().enumerate() {
        for v in 0..m {
            column.clear();
            column.extend(idx.iter().map(|&i| values[[i, v]]));
            centroids[[l, v]] = minkowski_center(&column, p, center_tol).z;
        }
    }
    Ok(centroids)
}

/// Moves points into empty clusters. Each empty cluster, in index order,
/// takes the point farthest from its own centroid among clusters that can
/// spare one. Returns the number of clusters repaired.
fn repair_empty_clusters(
    dataset: &Dataset,
    assignments: &mut [usize],
    centroids: &Array2<f64>,
    weights: &Array2<f64>,
    p: f64,
) -> usize {
    let k = centroids.nrows();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut repaired = 0;
    for l in 0..k {
        if sizes[l] > 0 {
            continue;
        }
        let mut far = (f64::NEG_INFINITY, usize::MAX);
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = weighted_distance_unchecked(
                dataset.point(i).as_slice().expect("contiguous"),
                centroids.row(a).as_slice().expect("contiguous"),
                weights.row(a).as_slice().expect("contiguous"),
                p,
            );
            if d > far.0 {
                far = (d, i);
            }
        }
        // k <= n guarantees some cluster holds two points
        let i = far.1;
        sizes[assignments[i]] -= 1;
        assignments[i] = l;
        sizes[l] = 1;
        repaired += 1;
    }
    repaired
}

fn initial_centroids(dataset: &Dataset, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, dataset.n(), k).into_vec();
    dataset.values().select(Axis(0), &picks)
}

fn run_loop(
    dataset: &Dataset,
    config: &MwkConfig,
    mode: Mode,
    observer: &mut dyn FnMut(&EngineEvent),
) -> Result<RunReport> {
    config.validate(dataset.n())?;
    let (k, m) = (config.k, dataset.m());
    let p = match mode {
        Mode::Weighted => config.p,
        Mode::Classic => 2.0,
    };

    let mut centroids = initial_centroids(dataset, k, config.seed);
    let mut weights = Array2::from_elem((k, m), 1.0 / m as f64);
    let mut assignments: Vec<usize> = Vec::new();
    let mut dispersions = DispersionMatrix(Array2::zeros((k, m)));
    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iter {
        let mut next = assign_points(dataset, &centroids, &weights, p);
        let n_empty_repaired = repair_empty_clusters(dataset, &mut next, &centroids, &weights, p);
        let n_reassigned = if assignments.is_empty() {
            next.len()
        } else {
            next.iter()
                .zip(&assignments)
                .filter(|(a, b)| a != b)
                .count()
        };
        assignments = next;

        centroids = update_centroids(dataset, &assignments, k, p, config.center_tol)?;
        dispersions = DispersionMatrix::compute(dataset, &assignments, &centroids, p)?;
        let objective = match mode {
            Mode::Weighted => {
                weights = update_weights(&dispersions, p)?;
                objective_with_weights(&dispersions, &weights, p)?
            }
            Mode::Classic => dispersions.0.sum(),
        };

        let event = EngineEvent {
            iteration,
            objective,
            n_reassigned,
            n_empty_repaired,
        };
        observer(&event);
        events.push(event);
        let previous = trace.last().copied();
        trace.push(objective);

        if n_empty_repaired == 0 && iteration > 1 {
            let settled = previous
                .is_some_and(|prev| (prev - objective).abs() <= config.tol_objective * prev.abs());
            if n_reassigned == 0 || settled {
                converged = true;
                break;
            }
        }
    }

    let objective = *trace.last().expect("max_iter >= 1");
    let (bounds, normalised) = match mode {
        Mode::Weighted => {
            let bounds = objective_bounds(&dispersions, p)?;
            let normalised = normalised_objective(objective, &bounds)?;
            (Some(bounds), Some(normalised))
        }
        Mode::Classic => (None, None),
    };
    Ok(RunReport {
        iterations: trace.len(),
        objective_trace: trace,
        events,
        final_state: ClusteringState {
            assignments,
            centroids,
            weights,
            objective,
        },
        dispersions,
        bounds,
        normalised_objective: normalised,
        converged,
        seed: config.seed,
        p,
    })
}

/// One mwk-means run from the initialisation drawn with `config.seed`.
pub fn run(dataset: &Dataset, config: &MwkConfig) -> Result<RunReport> {
    run_loop(dataset, config, Mode::Weighted, &mut |_| {})
}

/// Like [`run`], reporting every iteration to `observer`.
pub fn run_observed(
    dataset: &Dataset,
    config: &MwkConfig,
    observer: &mut dyn FnMut(&EngineEvent),
) -> Result<RunReport> {
    run_loop(dataset, config, Mode::Weighted, observer)
}

/// Results of `config.restarts` independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    /// Index into `all` of the run with the lowest final objective.
    pub best_index: usize,
    pub all: Vec<RunReport>,
}

impl RestartReport {
    pub fn best(&self) -> &RunReport {
        &self.all[self.best_index]
    }

    fn from_runs(all: Vec<RunReport>) -> Self {
        let best_index = all.iter().enumerate().fold(0, |best, (i, r)| {
            if r.final_state.objective < all[best].final_state.objective {
                i
            } else {
                best
            }
        });
        Self { best_index, all }
    }
}

/// Runs with seeds `seed, seed + 1, …` and keeps them all in seed order.
pub fn run_restarts(dataset: &Dataset, config: &MwkConfig) -> Result<RestartReport> {
    config.validate(dataset.n())?;
    let all = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let cfg = MwkConfig {
                seed: config.seed.wrapping_add(r as u64),
                ..config.clone()
            };
            run(dataset, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RestartReport::from_runs(all))
}

/// Lloyd's algorithm with squared Euclidean distance and mean centres,
/// sharing initialisation and empty-cluster repair with [`run`].
pub fn run_classic_kmeans(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<RunReport> {
    let config = MwkConfig::new(k, 2.0)
        .with_seed(seed)
        .with_tol(tol)
        .with_max_iter(max_iter)
        .with_restarts(1);
    run_loop(dataset, &config, Mode::Classic, &mut |_| {})
}
