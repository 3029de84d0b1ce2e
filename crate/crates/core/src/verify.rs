//! Randomised self-checks of the objective identities, bounds and weight
//! laws. Each check draws its own instances and reports the worst case.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{generate, range_normalise, SyntheticSpec};
use crate::engine;
use crate::geometry::{center_gradient, gradient_tolerance_bound, minkowski_center};
use crate::model::{DispersionMatrix, MwkConfig};
use crate::theory::{
    geometric_mean, objective_bounds, objective_via_dispersions, objective_via_power_means,
    objective_with_weights, power_mean,
};
use crate::weighting::{global_suppression_bound, pairwise_suppression_bound, update_weights};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub trials: usize,
    pub detail: String,
}

/// Names accepted by `fault` in [`run_checks`].
pub const CHECK_NAMES: &[&str] = &[
    "triple_equality",
    "bound_containment",
    "ratio_law",
    "order_reversal",
    "scale_invariance",
    "pairwise_suppression",
    "global_suppression",
    "power_mean_ordering",
    "power_mean_monotone_r",
    "power_mean_limits",
    "centre_solver",
    "engine_monotone",
];

struct Checker {
    rng: ChaCha8Rng,
    trials: usize,
    fault: Option<String>,
}

impl Checker {
    /// Perturbs a measured quantity when the named check is under fault injection.
    fn skew(&self, name: &str, x: f64) -> f64 {
        if self.fault.as_deref() == Some(name) {
            x * 1.01 + 1e-3
        } else {
            x
        }
    }

    fn random_p(&mut self) -> f64 {
        const GRID: [f64; 5] = [1.1, 1.5, 2.0, 3.0, 5.0];
        if self.rng.random_bool(0.5) {
            GRID[self.rng.random_range(0..GRID.len())]
        } else {
            1.05 + self.rng.random::<f64>() * 18.95
        }
    }

    /// Log-uniform dispersions in `[1e−3, 1e3]`.
    fn random_dispersions(&mut self) -> DispersionMatrix {
        let k = self.rng.random_range(1..=5);
        let m = self.rng.random_range(1..=10);
        DispersionMatrix(Array2::from_shape_fn((k, m), |_| {
            10f64.powf(self.rng.random_range(-3.0..3.0))
        }))
    }

    fn random_values(&mut self) -> Vec<f64> {
        let m = self.rng.random_range(1..=12);
        (0..m)
            .map(|_| 10f64.powf(self.rng.random_range(-3.0..3.0)))
            .collect()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn outcome(name: &'static str, trials: usize, failure: Option<String>, worst: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failure.is_none(),
        trials,
        detail: failure.unwrap_or_else(|| format!("worst {worst:.3e}")),
    }
}

/// Runs every check with `trials` random instances each (engine and solver
/// checks use fewer). `fault` names a check whose measurements are
/// deliberately corrupted, to exercise the failure path.
pub fn run_checks(trials: usize, seed: u64, fault: Option<&str>) -> Vec<CheckOutcome> {
    let mut c = Checker {
        rng: ChaCha8Rng::seed_from_u64(seed),
        trials: trials.max(1),
        fault: fault.map(str::to_string),
    };
    vec![
        triple_equality(&mut c),
        bound_containment(&mut c),
        ratio_law(&mut c),
        order_reversal(&mut c),
        scale_invariance(&mut c),
        pairwise_suppression(&mut c),
        global_suppression(&mut c),
        power_mean_ordering(&mut c),
        power_mean_monotone_r(&mut c),
        power_mean_limits(&mut c),
        centre_solver(&mut c),
        engine_monotone(&mut c),
    ]
}

fn triple_equality(c: &mut Checker) -> CheckOutcome {
    let name = "triple_equality";
    let mut worst: f64 = 0.0;
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let w = update_weights(&d, p).expect("valid p");
        let direct = objective_with_weights(&d, &w, p).expect("shapes match");
        let lemma1 = objective_via_dispersions(&d, p).expect("valid p");
        let lemma2 = c.skew(name, objective_via_power_means(&d, p).expect("valid p"));
        let err = rel(direct, lemma1).max(rel(lemma1, lemma2));
        worst = worst.max(err);
        if err > 1e-9 {
            return outcome(
                name,
                t + 1,
                Some(format!(
                    "p={p}: weighted {direct}, dispersion form {lemma1}, power-mean form {lemma2}"
                )),
                worst,
            );
        }
    }
    outcome(name, c.trials, None, worst)
}

fn bound_containment(c: &mut Checker) -> CheckOutcome {
    let name = "bound_containment";
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let w = c.skew(name, objective_via_dispersions(&d, p).expect("valid p"));
        let b = objective_bounds(&d, p).expect("valid p");
        let eps = 1e-9 * b.upper;
        if w < b.lower - eps || w > b.upper + eps {
            return outcome(
                name,
                t + 1,
                Some(format!("p={p}: {w} outside [{}, {}]", b.lower, b.upper)),
                0.0,
            );
        }
    }
    outcome(name, c.trials, None, 0.0)
}

fn ratio_law(c: &mut Checker) -> CheckOutcome {
    let name = "ratio_law";
    let mut worst: f64 = 0.0;
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let w = update_weights(&d, p).expect("valid p");
        let (k, m) = d.0.dim();
        for l in 0..k {
            for u in 0..m {
                for v in 0..m {
                    let expected = (d.0[[l, u]] / d.0[[l, v]]).powf(1.0 / (p - 1.0));
                    if !(expected.is_normal() && expected < 1e250 && w[[l, u]] > 0.0) {
                        continue;
                    }
                    let got = c.skew(name, w[[l, v]] / w[[l, u]]);
                    let err = rel(got, expected);
                    worst = worst.max(err);
                    if err > 1e-9 {
                        return outcome(
                            name,
                            t + 1,
                            Some(format!(
                                "p={p}: w ratio {got} vs dispersion ratio law {expected}"
                            )),
                            worst,
                        );
                    }
                }
            }
        }
    }
    outcome(name, c.trials, None, worst)
}

fn order_reversal(c: &mut Checker) -> CheckOutcome {
    let name = "order_reversal";
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let mut w = update_weights(&d, p).expect("valid p");
        if c.fault.as_deref() == Some(name) {
            w.mapv_inplace(|_| 1.0);
        }
        let (k, m) = d.0.dim();
        for l in 0..k {
            for u in 0..m {
                for v in 0..m {
                    let lhs = d.0[[l, v]] < d.0[[l, u]];
                    let rhs = w[[l, v]] > w[[l, u]];
                    if lhs != rhs {
                        return outcome(
                            name,
                            t + 1,
                            Some(format!(
                                "p={p}: cluster {l}, features {v},{u} break order reversal"
                            )),
                            0.0,
                        );
                    }
                }
            }
        }
    }
    outcome(name, c.trials, None, 0.0)
}

fn scale_invariance(c: &mut Checker) -> CheckOutcome {
    let name = "scale_invariance";
    let mut worst: f64 = 0.0;
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let scale = 10f64.powf(c.rng.random_range(-3.0..3.0));
        let a = update_weights(&d, p).expect("valid p");
        let b = update_weights(&DispersionMatrix(&d.0 * scale), p).expect("valid p");
        let diff = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (c.skew(name, *x) - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
        if diff > 1e-12 {
            return outcome(
                name,
                t + 1,
                Some(format!("p={p}, scale {scale}: weights moved by {diff:e}")),
                worst,
            );
        }
    }
    outcome(name, c.trials, None, worst)
}

fn pairwise_suppression(c: &mut Checker) -> CheckOutcome {
    let name = "pairwise_suppression";
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let w = update_weights(&d, p).expect("valid p");
        let (k, m) = d.0.dim();
        for l in 0..k {
            for u in 0..m {
                for v in 0..m {
                    let ratio = d.0[[l, u]] / d.0[[l, v]];
                    if ratio <= 1.0 {
                        continue;
                    }
                    let bound = pairwise_suppression_bound(ratio, p).expect("C > 1");
                    let lhs = c.skew(name, w[[l, u]]);
                    if lhs > bound * w[[l, v]] * (1.0 + 1e-12) {
                        return outcome(
                            name,
                            t + 1,
                            Some(format!(
                                "p={p}, C={ratio}: w_u {lhs} > {bound} * w_v {}",
                                w[[l, v]]
                            )),
                            0.0,
                        );
                    }
                }
            }
        }
    }
    outcome(name, c.trials, None, 0.0)
}

fn global_suppression(c: &mut Checker) -> CheckOutcome {
    let name = "global_suppression";
    let mut applicable = 0;
    for t in 0..c.trials {
        let d = c.random_dispersions();
        let p = c.random_p();
        let w = update_weights(&d, p).expect("valid p");
        let (k, m) = d.0.dim();
        if m < 2 {
            continue;
        }
        for l in 0..k {
            for u in 0..m {
                let others_max = (0..m)
                    .filter(|&v| v != u)
                    .map(|v| d.0[[l, v]])
                    .fold(0.0, f64::max);
                let ratio = d.0[[l, u]] / others_max;
                if ratio <= 1.0 {
                    continue;
                }
                applicable += 1;
                let bound = global_suppression_bound(ratio, m, p).expect("C > 1, m >= 2");
                let got = c.skew(name, w[[l, u]]);
                if got > bound * (1.0 + 1e-12) {
                    return outcome(
                        name,
                        t + 1,
                        Some(format!(
                            "p={p}, C={ratio}, m={m}: w_u {got} > bound {bound}"
                        )),
                        0.0,
                    );
                }
            }
        }
    }
    let mut o = outcome(name, c.trials, None, 0.0);
    o.detail = format!("{applicable} dominant features checked");
    o
}

fn power_mean_ordering(c: &mut Checker) -> CheckOutcome {
    let name = "power_mean_ordering";
    for t in 0..c.trials {
        let v = c.random_values();
        let r = -10f64.powf(c.rng.random_range(-3.0..2.0));
        let mr = c.skew(name, power_mean(&v, r).expect("positive"));
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let g = geometric_mean(&v).expect("positive");
        if mr < min * (1.0 - 1e-12) || mr > g * (1.0 + 1e-12) {
            return outcome(
                name,
                t + 1,
                Some(format!("r={r}: M_r {mr} outside [min {min}, geomean {g}]")),
                0.0,
            );
        }
    }
    outcome(name, c.trials, None, 0.0)
}

fn power_mean_monotone_r(c: &mut Checker) -> CheckOutcome {
    let name = "power_mean_monotone_r";
    for t in 0..c.trials {
        let v = c.random_values();
        let mut rs: Vec<f64> = (0..2).map(|_| c.rng.random_range(-30.0..30.0)).collect();
        rs.sort_by(f64::total_cmp);
        let mut a = power_mean(&v, rs[0]).expect("positive");
        let mut b = power_mean(&v, rs[1]).expect("positive");
        if c.fault.as_deref() == Some(name) {
            std::mem::swap(&mut a, &mut b);
        }
        if a > b * (1.0 + 1e-12) {
            return outcome(
                name,
                t + 1,
                Some(format!("M_{} = {a} > M_{} = {b}", rs[0], rs[1])),
                0.0,
            );
        }
    }
    outcome(name, c.trials, None, 0.0)
}

/// `M_r → min` as `r → −∞` (checked through `M_r ≈ min · m^(1/|r|)` when the
/// minimum is unique by a factor ≥ 1.1) and `M_r → M_0` as `r → 0⁻`.
fn power_mean_limits(c: &mut Checker) -> CheckOutcome {
    let name = "power_mean_limits";
    let mut checked = 0;
    for t in 0..c.trials {
        let mut v = c.random_values();
        v.iter_mut().for_each(|x| *x = x.clamp(0.1, 10.0));
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let m = v.len() as f64;
        let min = sorted[0];
        if sorted.len() > 1 && sorted[1] < 1.1 * min {
            continue;
        }
        checked += 1;
        let low = c.skew(name, power_mean(&v, -200.0).expect("positive"));
        let asymptote = min * m.powf(1.0 / 200.0);
        let near_zero = power_mean(&v, -1e-6).expect("positive");
        let g = geometric_mean(&v).expect("positive");
        if rel(low, asymptote) > 1e-6 || rel(near_zero, g) > 1e-5 {
            return outcome(
                name,
                t + 1,
                Some(format!(
                    "M_-200 {low} vs min·m^(1/200) {asymptote}; M_-1e-6 {near_zero} vs geomean {g}"
                )),
                0.0,
            );
        }
    }
    let mut o = outcome(name, c.trials, None, 0.0);
    o.detail = format!("{checked} instances with a unique minimum");
    o
}

fn centre_solver(c: &mut Checker) -> CheckOutcome {
    let name = "centre_solver";
    let trials = (c.trials / 10).max(1);
    let tol = 1e-10;
    for t in 0..trials {
        let n = c.rng.random_range(1..=20);
        let samples: Vec<f64> = (0..n).map(|_| c.rng.random_range(-10.0..10.0)).collect();
        let p = c.random_p();
        let r = minkowski_center(&samples, p, tol);
        let z = c.skew(name, r.z);
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g = center_gradient(&samples, p, z).abs();
        let bound = gradient_tolerance_bound(&samples, p, z, tol);
        if z < lo || z > hi || g > bound + 1e-9 {
            return outcome(
                name,
                t + 1,
                Some(format!("p={p}: z={z}, |f'(z)|={g:e} vs bound {bound:e}")),
                0.0,
            );
        }
    }
    outcome(name, trials, None, 0.0)
}

fn engine_monotone(c: &mut Checker) -> CheckOutcome {
    let name = "engine_monotone";
    let trials = (c.trials / 100).max(1);
    for t in 0..trials {
        let spec = SyntheticSpec {
            n_points: c.rng.random_range(20..=60),
            n_informative: c.rng.random_range(1..=3),
            n_noise: c.rng.random_range(0..=2),
            k_true: c.rng.random_range(1..=3),
            seed: c.rng.random(),
            ..SyntheticSpec::default()
        };
        let data = generate(&spec)
            .and_then(|(d, _)| range_normalise(&d))
            .map(|(d, _)| d);
        let data = match data {
            Ok(d) => d,
            Err(e) => return outcome(name, t + 1, Some(format!("dataset: {e}")), 0.0),
        };
        let p = c.random_p();
        let k = c.rng.random_range(1..=4);
        let config = MwkConfig::new(k, p).with_seed(c.rng.random());
        let report = match engine::run(&data, &config) {
            Ok(r) => r,
            Err(e) => return outcome(name, t + 1, Some(format!("p={p}, k={k}: {e}")), 0.0),
        };
        let mut trace = report.clone();
        if c.fault.as_deref() == Some(name) {
            trace
                .objective_trace
                .push(trace.objective_trace[0] * 2.0 + 1.0);
            trace.events.push(crate::engine::EngineEvent {
                iteration: trace.events.len() + 1,
                objective: 0.0,
                n_reassigned: 0,
                n_empty_repaired: 0,
            });
        }
        if let Some(i) = trace.first_monotonicity_violation(1e-9) {
            return outcome(
                name,
                t + 1,
                Some(format!(
                    "p={p}, k={k}: objective rose at iteration {}",
                    i + 1
                )),
                0.0,
            );
        }
    }
    outcome(name, trials, None, 0.0)
}
