//! Jacobian of the power map and measured convergence rates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{influence_matrix, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::solve_mat;
use crate::network::{InfluenceNetwork, PowerVector, StubbornnessProfile};

/// Errors at or below this size are dropped from the rate fit.
pub const RATE_ERROR_FLOOR: f64 = 1e-13;
/// Number of tail points used by the rate fit.
pub const RATE_TAIL_LEN: usize = 20;
/// Minimum number of tail points needed for a fit.
pub const RATE_MIN_POINTS: usize = 3;

/// Jacobian of `F` at `x`:
/// `(I - Θ)(I - W(x)ᵀΘ)^{-1}(I - Cᵀ) Θ (I - Θ)^{-1} diag(F(x))`.
pub fn jacobian_f(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x: &PowerVector,
) -> Result<DMatrix<f64>> {
    prof.check_len(net.n())?;
    x.check_len(net.n())?;
    jacobian_raw(net.matrix(), prof.theta(), x.as_slice())
}

/// [`jacobian_f`] on raw data, valid for any `x` where the solve succeeds.
pub fn jacobian_raw(c: &DMatrix<f64>, theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    if theta.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if theta.len() != n { theta.len() } else { x.len() },
        });
    }
    if theta.iter().any(|&t| t >= 1.0) {
        return Err(Error::SingularSystem("I - Θ"));
    }
    let w = influence_matrix(c, x);
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - w[(j, i)] * theta[j]
    });
    // u = M^{-1} 1/n, so F = (I - Θ) u and F_j / (1 - θ_j) = u_j
    let b = DMatrix::from_element(n, 1, 1.0 / n as f64);
    let lu_rhs = DMatrix::from_fn(n, n + 1, |i, j| {
        if j == n {
            b[(i, 0)]
        } else {
            let d = if i == j { 1.0 } else { 0.0 };
            d - c[(j, i)]
        }
    });
    let sol = solve_mat(m, &lu_rhs, "I - W(x)^T Θ")?;
    let u = DVector::from_fn(n, |i, _| sol[(i, n)]);
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (1.0 - theta[i]) * sol[(i, j)] * theta[j] * u[j]
    }))
}

/// Least-squares fit of `ln ‖x(s) - x*‖₁` against `s` over the tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Observed per-step factor `exp(slope)`.
    pub rate: f64,
    pub slope: f64,
    pub points_used: usize,
}

/// Fits the geometric rate over the last [`RATE_TAIL_LEN`] iterates whose
/// distance to `x_star` exceeds [`RATE_ERROR_FLOOR`].
pub fn convergence_rate_measurement(trajectory: &Trajectory, x_star: &PowerVector) -> Result<RateFit> {
    let errors: Vec<(f64, f64)> = trajectory
        .points
        .iter()
        .enumerate()
        .map(|(s, x)| (s as f64, x.l1_distance(x_star)))
        .filter(|&(_, e)| e > RATE_ERROR_FLOOR)
        .collect();
    let tail = &errors[errors.len().saturating_sub(RATE_TAIL_LEN)..];
    if tail.len() < RATE_MIN_POINTS {
        return Err(Error::InsufficientTail(tail.len(), RATE_MIN_POINTS));
    }
    let k = tail.len() as f64;
    let mean_s = tail.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_l = tail.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let (num, den) = tail.iter().fold((0.0, 0.0), |(num, den), &(s, e)| {
        let ds = s - mean_s;
        (num + ds * (e.ln() - mean_l), den + ds * ds)
    });
    let slope = num / den;
    Ok(RateFit {
        rate: slope.exp(),
        slope,
        points_used: tail.len(),
    })
}
