//! Optimal per-cluster feature weights and the laws they obey.
//!
//! For a cluster with dispersions `D_1..D_m` the weight minimising the
//! objective under the simplex constraint is
//! `w_v = D_v^(−1/(p−1)) / Σ_t D_t^(−1/(p−1))`. Rows are computed as powers
//! of `D_min / D_v`, which lie in `(0, 1]`, so nothing overflows however small
//! the dispersions get.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::model::{validate_p, DispersionMatrix};

/// Below this value of `p − 1` powers are evaluated through `exp`/`ln`.
const LOG_DOMAIN_P_GAP: f64 = 0.1;

/// Applies the weight update to every cluster.
///
/// Rows with zero dispersions take the limit of the update as those
/// dispersions shrink to zero: the `j` zero-dispersion features share the
/// weight equally and the rest get nothing. An all-zero row is uniform.
pub fn update_weights(dispersions: &DispersionMatrix, p: f64) -> Result<Array2<f64>> {
    validate_p(p)?;
    if let Some(&bad) = dispersions
        .0
        .iter()
        .find(|d| !(**d >= 0.0 && d.is_finite()))
    {
        return Err(Error::NonpositiveDispersion(bad));
    }
    let mut w = Array2::zeros(dispersions.0.raw_dim());
    for (l, row) in dispersions.0.rows().into_iter().enumerate() {
        w.row_mut(l).assign(&weight_row(row, p));
    }
    Ok(w)
}

/// Weight update for a single cluster. Dispersions must be finite and nonnegative.
pub fn weight_row(dispersions: ArrayView1<'_, f64>, p: f64) -> Array1<f64> {
    let m = dispersions.len();
    let zeros = dispersions.iter().filter(|&&d| d == 0.0).count();
    if zeros == m {
        return Array1::from_elem(m, 1.0 / m as f64);
    }
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        return dispersions.mapv(|d| if d == 0.0 { share } else { 0.0 });
    }

    let exponent = 1.0 / (p - 1.0);
    let d_min = dispersions.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w = if p - 1.0 < LOG_DOMAIN_P_GAP {
        let ln_min = d_min.ln();
        dispersions.mapv(|d| (-exponent * (d.ln() - ln_min)).exp())
    } else {
        dispersions.mapv(|d| (d_min / d).powf(exponent))
    };
    let total = w.sum();
    w /= total;
    w
}

/// `w_u / w_v` implied by dispersions `d_u` and `d_v`: `(d_v / d_u)^(1/(p−1))`.
pub fn weight_ratio(d_u: f64, d_v: f64, p: f64) -> Result<f64> {
    validate_p(p)?;
    for d in [d_u, d_v] {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::NonpositiveDispersion(d));
        }
    }
    Ok((d_v / d_u).powf(1.0 / (p - 1.0)))
}

/// If `D_u ≥ C·D_v` then `w_u ≤ bound · w_v` with bound `C^(−1/(p−1))`.
pub fn pairwise_suppression_bound(c: f64, p: f64) -> Result<f64> {
    validate_p(p)?;
    check_c(c)?;
    Ok(c.powf(-1.0 / (p - 1.0)))
}

/// If `D_u ≥ C·D_v` for every other feature `v`, then
/// `w_u ≤ 1 / (1 + (m − 1)·C^(1/(p−1)))`.
pub fn global_suppression_bound(c: f64, m: usize, p: f64) -> Result<f64> {
    validate_p(p)?;
    check_c(c)?;
    if m < 2 {
        return Err(Error::InvalidM(m));
    }
    Ok(1.0 / (1.0 + (m - 1) as f64 * c.powf(1.0 / (p - 1.0))))
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::InvalidC(c));
    }
    Ok(())
}

/// `max_v |w_v − 1/m|` over one weight row.
pub fn max_deviation_from_uniform(weights: ArrayView1<'_, f64>) -> f64 {
    let uniform = 1.0 / weights.len() as f64;
    weights
        .iter()
        .map(|w| (w - uniform).abs())
        .fold(0.0, f64::max)
}
