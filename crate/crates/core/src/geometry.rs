//! Weighted Minkowski distance and the one-dimensional Minkowski centre.

use crate::error::{Error, Result};

/// Outcome of a Minkowski-centre solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterSolveResult {
    /// The minimiser of `f_p`.
    pub z: f64,
    /// `f_p(z)`.
    pub f_value: f64,
    pub iterations: usize,
    pub bracket_width: f64,
}

/// `Σ_v w_v^p |x_v − z_v|^p`.
///
/// No outer `1/p` root is taken: this is the quantity the objective sums.
pub fn weighted_minkowski_distance(x: &[f64], z: &[f64], w: &[f64], p: f64) -> Result<f64> {
    if x.len() != z.len() || x.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} entries, z has {}, w has {}",
            x.len(),
            z.len(),
            w.len()
        )));
    }
    Ok(weighted_distance_unchecked(x, z, w, p))
}

#[inline]
pub(crate) fn weighted_distance_unchecked(x: &[f64], z: &[f64], w: &[f64], p: f64) -> f64 {
    x.iter()
        .zip(z)
        .zip(w)
        .map(|((xv, zv), wv)| (wv * (xv - zv).abs()).powf(p))
        .sum()
}

/// `f_p(z) = Σ_i |s_i − z|^p`.
pub fn center_objective(samples: &[f64], p: f64, z: f64) -> f64 {
    samples.iter().map(|s| (s - z).abs().powf(p)).sum()
}

/// `f_p(z + h) − f_p(z)`, evaluated term by term without cancellation.
///
/// Near the minimiser the first-order parts of the terms cancel and the
/// increment is far below the rounding error of `f_p` itself, so the naive
/// difference is useless there.
pub fn center_objective_increment(samples: &[f64], p: f64, z: f64, h: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            let a = z - s;
            let b = a + h;
            if a != 0.0 && a.signum() == b.signum() {
                // |a + h|^p − |a|^p = |a|^p · expm1(p · ln(1 + h/a))
                a.abs().powf(p) * (p * (h / a).ln_1p()).exp_m1()
            } else {
                b.abs().powf(p) - a.abs().powf(p)
            }
        })
        .sum()
}

/// `f_p′(z) = Σ_i p · sign(z − s_i) · |z − s_i|^(p−1)`.
pub fn center_gradient(samples: &[f64], p: f64, z: f64) -> f64 {
    let q = p - 1.0;
    samples
        .iter()
        .map(|s| {
            let d = z - s;
            if d == 0.0 {
                0.0
            } else {
                d.signum() * d.abs().powf(q)
            }
        })
        .sum::<f64>()
        * p
}

/// Upper bound on `|f_p′(z)|` for a point within `tol` of the true minimiser.
///
/// `f_p′` is increasing and vanishes at the minimiser, so its magnitude at
/// `z` cannot exceed its increase across `[z − tol, z + tol]`.
pub fn gradient_tolerance_bound(samples: &[f64], p: f64, z: f64, tol: f64) -> f64 {
    center_gradient(samples, p, z + tol) - center_gradient(samples, p, z - tol)
}

/// Minimises `f_p` over the reals.
///
/// `f_p` is strictly convex for `p > 1`, so its derivative is continuous and
/// strictly increasing and changes sign exactly once inside
/// `[min(samples), max(samples)]`. The solver bisects on that sign change
/// until the bracket is at most `center_tol` wide and returns its midpoint.
/// `p == 2` returns the arithmetic mean directly.
///
/// # Panics
///
/// Panics if `samples` is empty.
pub fn minkowski_center(samples: &[f64], p: f64, center_tol: f64) -> CenterSolveResult {
    assert!(
        !samples.is_empty(),
        "minkowski_center needs at least one sample"
    );
    debug_assert!(p > 1.0);

    if p == 2.0 {
        let z = samples.iter().sum::<f64>() / samples.len() as f64;
        return CenterSolveResult {
            z,
            f_value: center_objective(samples, p, z),
            iterations: 0,
            bracket_width: 0.0,
        };
    }

    let (mut lo, mut hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let mut iterations = 0;
    while hi - lo > center_tol {
        let mid = lo + 0.5 * (hi - lo);
        // bracket already at float resolution
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let g = center_gradient(samples, p, mid);
        if g > 0.0 {
            hi = mid;
        } else if g < 0.0 {
            lo = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let z = lo + 0.5 * (hi - lo);
    CenterSolveResult {
        z,
        f_value: center_objective(samples, p, z),
        iterations,
        bracket_width: hi - lo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Dense grid search at step 1e-6 over the full sample range.
    fn full_grid_oracle(samples: &[f64], p: f64) -> f64 {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let steps = ((hi - lo) / 1e-6).ceil() as usize;
        let mut best = (f64::INFINITY, lo);
        for j in 0..=steps {
            let z = (lo + j as f64 * 1e-6).min(hi);
            let f = center_objective(samples, p, z);
            if f < best.0 {
                best = (f, z);
            }
        }
        best.1
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            weighted_minkowski_distance(&[1.0, 1.0], &[1.0, 1.0], &[0.3, 0.7], 2.0).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            weighted_minkowski_distance(&[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.5], 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            weighted_minkowski_distance(&[0.0], &[2.0], &[1.0], 3.0).unwrap(),
            8.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            weighted_minkowski_distance(&[0.0], &[2.0, 1.0], &[1.0], 3.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn symmetric_pair_gives_midpoint() {
        for p in [1.1, 1.5, 2.0, 3.0, 7.0] {
            let r = minkowski_center(&[0.0, 2.0], p, 1e-10);
            assert_abs_diff_eq!(r.z, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn p2_is_the_mean() {
        let r = minkowski_center(&[0.0, 0.0, 3.0], 2.0, 1e-10);
        assert_eq!(r.z, 1.0);
        assert_eq!(r.f_value, 6.0);
    }

    #[test]
    fn p3_matches_full_grid_and_closed_form() {
        let samples = [0.0, 0.0, 3.0];
        let r = minkowski_center(&samples, 3.0, 1e-10);
        // 2 z^2 = (3 - z)^2  =>  z = 3 / (1 + sqrt 2)
        assert_abs_diff_eq!(r.z, 3.0 / (1.0 + 2f64.sqrt()), epsilon = 1e-9);
        let oracle = full_grid_oracle(&samples, 3.0);
        assert_abs_diff_eq!(r.z, oracle, epsilon = 1e-5);
        assert!(r.bracket_width <= 1e-10);
    }

    #[test]
    fn degenerate_samples() {
        let r = minkowski_center(&[5.0], 1.5, 1e-10);
        assert_eq!(r.z, 5.0);
        assert_eq!(r.iterations, 0);
        let r = minkowski_center(&[-2.5, -2.5, -2.5], 4.0, 1e-10);
        assert_eq!(r.z, -2.5);
    }

    #[test]
    fn increment_agrees_with_naive_difference_far_from_minimum() {
        let samples = [-1.0, 0.5, 3.0];
        for p in [1.1, 2.0, 5.0] {
            let naive = center_objective(&samples, p, 2.0) - center_objective(&samples, p, 1.5);
            let stable = center_objective_increment(&samples, p, 1.5, 0.5);
            assert!((naive - stable).abs() <= 1e-12 * naive.abs(), "p={p}");
        }
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(center_gradient(&[0.0, 2.0], 2.0, 1.0), 0.0);
        assert_abs_diff_eq!(
            center_gradient(&[0.0, 2.0], 2.0, 0.0),
            -4.0,
            epsilon = 1e-12
        );
        assert_eq!(center_gradient(&[5.0], 1.5, 5.0), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let samples = [-1.3, 0.2, 0.9, 2.4, 2.5];
        let h = 1e-7;
        for p in [1.1, 1.5, 2.0, 2.5, 5.0] {
            for z in [-0.7, 0.5, 1.7] {
                let fd = (center_objective(&samples, p, z + h)
                    - center_objective(&samples, p, z - h))
                    / (2.0 * h);
                let g = center_gradient(&samples, p, z);
                assert!(
                    (fd - g).abs() <= 1e-4 * g.abs().max(1.0),
                    "p={p} z={z}: fd {fd} vs {g}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn strict_convexity_witness(
            samples in prop::collection::vec(-10.0f64..10.0, 1..20),
            p in prop::sample::select(vec![1.1, 1.5, 2.0, 2.5, 5.0]),
        ) {
            let tol = 1e-10;
            let r = minkowski_center(&samples, p, tol);
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.z >= lo && r.z <= hi);
            if hi > lo {
                let delta = 10.0 * tol;
                prop_assert!(center_objective_increment(&samples, p, r.z, delta) > 0.0);
                prop_assert!(center_objective_increment(&samples, p, r.z, -delta) > 0.0);
            }
            let bound = gradient_tolerance_bound(&samples, p, r.z, tol);
            let g = center_gradient(&samples, p, r.z);
            prop_assert!(g.abs() <= bound + 1e-9, "|g|={} bound={}", g.abs(), bound);
        }
    }
}
