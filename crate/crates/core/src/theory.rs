//! Closed forms of the mwk-means objective in terms of dispersions, power
//! means, and the bounds that follow from the power-mean inequality.
//!
//! These are written independently of the engine so they can serve as
//! oracles for it. With `r = −1/(p−1)`:
//!
//! * dispersion form: `W = Σ_l (Σ_v D_lv^(−1/(p−1)))^−(p−1)`
//! * power-mean form: `W = m^−(p−1) · Σ_l M_r(D_l·)`
//! * bounds: `m^−(p−1) Σ_l min_v D_lv ≤ W ≤ m^−(p−1) Σ_l M_0(D_l·)`
//!
//! A cluster row containing a zero dispersion contributes 0 to the
//! objective and to both bounds, which is the limit of every formula as
//! that dispersion goes to zero.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::model::{validate_p, DispersionMatrix};

/// Power exponents beyond this magnitude are evaluated in log domain.
const LOG_DOMAIN_EXPONENT: f64 = 50.0;
/// Rows whose max/min exceeds this ratio are evaluated in log domain.
const LOG_DOMAIN_RANGE: f64 = 1e6;

/// Objective bounds for a fixed partition and set of centres.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult {
    pub lower: f64,
    pub upper: f64,
    pub per_cluster_min: Vec<f64>,
    pub per_cluster_geomean: Vec<f64>,
    /// `1 / m^(p−1)`.
    pub prefactor: f64,
}

fn check_positive(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(&bad) => Err(Error::NonpositiveValue(bad)),
        None => Ok(()),
    }
}

fn dynamic_range(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    hi / lo
}

/// `ln Σ_i exp(a_i)` without overflow.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    max + terms.map(|a| (a - max).exp()).sum::<f64>().ln()
}

/// `M_r(values) = ((1/m) Σ v^r)^(1/r)` for `r ≠ 0`.
///
/// `r == 0` is forwarded to [`geometric_mean`].
pub fn power_mean(values: &[f64], r: f64) -> Result<f64> {
    check_positive(values)?;
    if r == 0.0 {
        return geometric_mean(values);
    }
    let m = values.len() as f64;
    if r.abs() > LOG_DOMAIN_EXPONENT || dynamic_range(values) > LOG_DOMAIN_RANGE {
        let lse = log_sum_exp(values.iter().map(|v| r * v.ln()));
        Ok(((lse - m.ln()) / r).exp())
    } else {
        let mean = values.iter().map(|v| v.powf(r)).sum::<f64>() / m;
        Ok(mean.powf(1.0 / r))
    }
}

/// `(Π v)^(1/m)`, via the mean of logarithms.
pub fn geometric_mean(values: &[f64]) -> Result<f64> {
    check_positive(values)?;
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    Ok(mean_log.exp())
}

fn row_has_zero(row: ArrayView1<'_, f64>) -> bool {
    row.iter().any(|&d| d == 0.0)
}

/// Objective with optimal weights, written purely in dispersions.
pub fn objective_via_dispersions(dispersions: &DispersionMatrix, p: f64) -> Result<f64> {
    validate_p(p)?;
    let q = p - 1.0;
    let e = 1.0 / q;
    let mut total = 0.0;
    for row in dispersions.0.rows() {
        if row_has_zero(row) {
            continue;
        }
        let row = row.to_vec();
        check_positive(&row)?;
        let term = if e > LOG_DOMAIN_EXPONENT || dynamic_range(&row) > LOG_DOMAIN_RANGE {
            (-q * log_sum_exp(row.iter().map(|d| -e * d.ln()))).exp()
        } else {
            let s: f64 = row.iter().map(|d| d.powf(-e)).sum();
            1.0 / s.powf(q)
        };
        total += term;
    }
    Ok(total)
}

/// Objective with optimal weights as a scaled sum of power means of order
/// `−1/(p−1)`.
pub fn objective_via_power_means(dispersions: &DispersionMatrix, p: f64) -> Result<f64> {
    validate_p(p)?;
    let r = -1.0 / (p - 1.0);
    let mut sum = 0.0;
    for row in dispersions.0.rows() {
        if row_has_zero(row) {
            continue;
        }
        sum += power_mean(&row.to_vec(), r)?;
    }
    Ok(prefactor(dispersions.m(), p) * sum)
}

/// `Σ_l Σ_v w_lv^p D_lv` for arbitrary weights.
pub fn objective_with_weights(
    dispersions: &DispersionMatrix,
    weights: &Array2<f64>,
    p: f64,
) -> Result<f64> {
    if dispersions.0.dim() != weights.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dispersions {:?} vs weights {:?}",
            dispersions.0.dim(),
            weights.dim()
        )));
    }
    Ok(dispersions
        .0
        .iter()
        .zip(weights.iter())
        .map(|(d, w)| w.powf(p) * d)
        .sum())
}

fn prefactor(m: usize, p: f64) -> f64 {
    (m as f64).powf(-(p - 1.0))
}

/// Lower and upper objective bounds from the per-cluster minimum and
/// geometric mean of dispersions.
pub fn objective_bounds(dispersions: &DispersionMatrix, p: f64) -> Result<BoundsResult> {
    validate_p(p)?;
    let k = dispersions.k();
    let mut per_cluster_min = Vec::with_capacity(k);
    let mut per_cluster_geomean = Vec::with_capacity(k);
    for row in dispersions.0.rows() {
        if row_has_zero(row) {
            per_cluster_min.push(0.0);
            per_cluster_geomean.push(0.0);
            continue;
        }
        let row = row.to_vec();
        per_cluster_min.push(row.iter().copied().fold(f64::INFINITY, f64::min));
        per_cluster_geomean.push(geometric_mean(&row)?);
    }
    let prefactor = prefactor(dispersions.m(), p);
    Ok(BoundsResult {
        lower: prefactor * per_cluster_min.iter().sum::<f64>(),
        upper: prefactor * per_cluster_geomean.iter().sum::<f64>(),
        per_cluster_min,
        per_cluster_geomean,
        prefactor,
    })
}

/// Rescales `objective` linearly so the lower bound maps to 0 and the upper to 1.
///
/// Values outside the bounds by at most `1e−9·upper` are clamped; anything
/// further out is a [`Error::BoundViolation`]. When the bounds coincide (to
/// within that same slack) the result is 0.
pub fn normalised_objective(objective: f64, bounds: &BoundsResult) -> Result<f64> {
    let BoundsResult { lower, upper, .. } = *bounds;
    let eps = 1e-9 * upper.abs();
    if !objective.is_finite() || objective < lower - eps || objective > upper + eps {
        return Err(Error::BoundViolation {
            objective,
            lower,
            upper,
        });
    }
    if upper - lower <= eps {
        return Ok(0.0);
    }
    Ok(((objective - lower) / (upper - lower)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn power_mean_examples() {
        assert_relative_eq!(
            power_mean(&[3.5, 3.5, 3.5], -2.3).unwrap(),
            3.5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            power_mean(&[1.0, 4.0], -1.0).unwrap(),
            1.6,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            power_mean(&[1.0, 4.0], 1.0).unwrap(),
            2.5,
            max_relative = 1e-15
        );
        assert!(matches!(
            power_mean(&[1.0, 0.0], -1.0),
            Err(Error::NonpositiveValue(_))
        ));
        assert!(matches!(
            power_mean(&[1.0, -2.0], 2.0),
            Err(Error::NonpositiveValue(_))
        ));
    }

    #[test]
    fn geometric_mean_examples() {
        assert_relative_eq!(
            geometric_mean(&[1.0, 4.0]).unwrap(),
            2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(geometric_mean(&[7.25]).unwrap(), 7.25, max_relative = 1e-15);
        assert_relative_eq!(
            geometric_mean(&[2.0, 2.0, 2.0]).unwrap(),
            2.0,
            max_relative = 1e-15
        );
        assert!(geometric_mean(&[0.0]).is_err());
    }

    #[test]
    fn log_domain_agrees_with_direct() {
        let v = [0.3, 1.1, 2.0, 9.0];
        for r in [-40.0, -10.0, -1.0, -0.01] {
            let direct = power_mean(&v, r).unwrap();
            let lse = (log_sum_exp(v.iter().map(|x| r * x.ln())) - 4f64.ln()) / r;
            assert_relative_eq!(direct, lse.exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn objective_forms_examples() {
        let single = DispersionMatrix(array![[2.75]]);
        for p in [1.1, 2.0, 7.0] {
            assert_relative_eq!(
                objective_via_dispersions(&single, p).unwrap(),
                2.75,
                max_relative = 1e-14
            );
            assert_relative_eq!(
                objective_via_power_means(&single, p).unwrap(),
                2.75,
                max_relative = 1e-14
            );
        }
        let pair = DispersionMatrix(array![[1.0, 1.0]]);
        assert_relative_eq!(
            objective_via_dispersions(&pair, 2.0).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            objective_via_power_means(&pair, 2.0).unwrap(),
            0.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn bounds_examples() {
        let d = DispersionMatrix(array![[1.0, 4.0]]);
        let b = objective_bounds(&d, 2.0).unwrap();
        assert_relative_eq!(b.lower, 0.5, max_relative = 1e-15);
        assert_relative_eq!(b.upper, 1.0, max_relative = 1e-15);
        assert_relative_eq!(b.prefactor, 0.5, max_relative = 1e-15);
        // weighted objective for this row is 1/(1 + 1/4) = 0.8
        let w = objective_via_dispersions(&d, 2.0).unwrap();
        assert_relative_eq!(w, 0.8, max_relative = 1e-15);
        assert_relative_eq!(
            normalised_objective(w, &b).unwrap(),
            0.6,
            max_relative = 1e-12
        );
        assert_eq!(normalised_objective(b.lower, &b).unwrap(), 0.0);
        assert_eq!(normalised_objective(b.upper, &b).unwrap(), 1.0);

        let col = DispersionMatrix(array![[3.0], [5.0]]);
        let b = objective_bounds(&col, 3.0).unwrap();
        assert_relative_eq!(b.lower, 8.0, max_relative = 1e-15);
        assert_relative_eq!(b.upper, 8.0, max_relative = 1e-15);
        assert_eq!(normalised_objective(8.0, &b).unwrap(), 0.0);
    }

    #[test]
    fn bound_violations() {
        let d = DispersionMatrix(array![[1.0, 4.0]]);
        let b = objective_bounds(&d, 2.0).unwrap();
        assert!(matches!(
            normalised_objective(0.4, &b),
            Err(Error::BoundViolation { .. })
        ));
        assert!(matches!(
            normalised_objective(1.1, &b),
            Err(Error::BoundViolation { .. })
        ));
        assert_eq!(normalised_objective(1.0 + 1e-10, &b).unwrap(), 1.0);
        assert_eq!(normalised_objective(0.5 - 1e-10, &b).unwrap(), 0.0);
    }

    #[test]
    fn zero_rows_contribute_nothing() {
        let d = DispersionMatrix(array![[0.0, 4.0], [1.0, 4.0]]);
        assert_relative_eq!(
            objective_via_dispersions(&d, 2.0).unwrap(),
            0.8,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            objective_via_power_means(&d, 2.0).unwrap(),
            0.8,
            max_relative = 1e-15
        );
        let b = objective_bounds(&d, 2.0).unwrap();
        assert_eq!(b.per_cluster_min, vec![0.0, 1.0]);
        assert_eq!(b.per_cluster_geomean[0], 0.0);
    }

    #[test]
    fn power_mean_limits() {
        let v = [0.5, 0.9, 2.0, 3.3];
        // with a unique minimum, M_r = min · m^(1/|r|) up to (min/next)^|r|
        assert_relative_eq!(
            power_mean(&v, -200.0).unwrap(),
            0.5 * 4f64.powf(1.0 / 200.0),
            max_relative = 1e-6
        );
        assert_relative_eq!(power_mean(&v, -1e6).unwrap(), 0.5, max_relative = 1e-5);
        assert_abs_diff_eq!(
            power_mean(&v, -1e-6).unwrap(),
            geometric_mean(&v).unwrap(),
            epsilon = 1e-5
        );
    }

    proptest! {
        #[test]
        fn power_mean_ordering(
            v in prop::collection::vec(1e-3f64..1e3, 1..12),
            r in -60.0f64..-1e-3,
        ) {
            let mr = power_mean(&v, r).unwrap();
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let g = geometric_mean(&v).unwrap();
            prop_assert!(mr >= min * (1.0 - 1e-12));
            prop_assert!(mr <= g * (1.0 + 1e-12));
        }

        #[test]
        fn power_mean_monotone_in_r(
            v in prop::collection::vec(1e-3f64..1e3, 1..12),
            r1 in -30.0f64..30.0,
            r2 in -30.0f64..30.0,
        ) {
            prop_assume!(r1 != 0.0 && r2 != 0.0);
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let a = power_mean(&v, lo).unwrap();
            let b = power_mean(&v, hi).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
