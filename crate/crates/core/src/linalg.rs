use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots smaller than this (relative to the largest pivot) count as singular.
const PIVOT_RTOL: f64 = 1e-14;

fn checked_lu(a: DMatrix<f64>, what: &'static str) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = a.lu();
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(max.is_finite() && max > 0.0 && min > PIVOT_RTOL * max) {
        return Err(Error::SingularSystem(what));
    }
    Ok(lu)
}

/// Solves `a * x = b` by LU with partial pivoting.
pub(crate) fn solve_vec(a: DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    let x = checked_lu(a, what)?
        .solve(b)
        .ok_or(Error::SingularSystem(what))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem(what))
    }
}

/// Solves `a * X = b` for a matrix right-hand side.
pub(crate) fn solve_mat(a: DMatrix<f64>, b: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let x = checked_lu(a, what)?
        .solve(b)
        .ok_or(Error::SingularSystem(what))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem(what))
    }
}

/// Induced 1-norm: largest absolute column sum.
pub fn norm_l1_operator(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
