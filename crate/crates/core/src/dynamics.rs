//! Opinion and power dynamics.
//!
//! Three processes live here:
//!
//! * the within-issue opinion process `y(k+1) = Θ W(x) y(k) + (I - Θ) y(0)`
//!   ([`fj_step`]) and its limit map `V(x) = (I - Θ W(x))^{-1} (I - Θ)`
//!   ([`compute_v`]);
//! * the issue-sequence power map `F(x) = (I - Θ)(I - W(x)^T Θ)^{-1} 1/n`
//!   ([`f_map`], [`iterate_issue_sequence`]) together with the local
//!   perceived-power iteration that computes the same value without a global
//!   solve ([`perceived_power_process`]);
//! * the single-issue coupled map on `(V, x)` ([`single_issue_step`],
//!   [`iterate_single_issue`]).
//!
//! Here `W(x) = diag(x) + (I - diag(x)) C` and `Θ = diag(theta)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_mat, solve_vec};
use crate::network::{l1, InfluenceNetwork, PowerVector, StubbornnessProfile};

/// Default ℓ1 stopping tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration cap for inner loops (opinion and perceived-power processes).
pub const INNER_MAX_ITER: usize = 1_000_000;
/// Iteration cap for outer power loops.
pub const OUTER_MAX_ITER: usize = 100_000;
/// Row-sum tolerance for control matrices.
pub const CONTROL_ROW_TOL: f64 = 1e-10;

/// Opinion vector; entries are unbounded reals.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector(DVector<f64>);

impl OpinionVector {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i, 0));
        }
        Ok(Self(DVector::from_vec(y)))
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }
}

/// `W(x) = diag(x) + (I - diag(x)) C`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrixW(DMatrix<f64>);

impl InfluenceMatrixW {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// Row-stochastic control matrix: `V[i][j]` is the weight of `j`'s initial
/// opinion in `i`'s final (or current) opinion.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMatrixV(DMatrix<f64>);

impl ControlMatrixV {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Wraps `v` after checking rows sum to 1 within [`CONTROL_ROW_TOL`] and
    /// entries lie in `[0, 1]` up to the same tolerance.
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        check_row_stochastic(&v)?;
        Ok(Self(v))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Column means `V^T 1 / n`: the social power exerted by each individual.
    pub fn column_means(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.n(), self.0.column_iter().map(|c| c.sum() / n))
    }
}

fn check_row_stochastic(v: &DMatrix<f64>) -> Result<()> {
    for (i, row) in v.row_iter().enumerate() {
        let sum = row.sum();
        let bad_entry = row
            .iter()
            .any(|&e| !(-CONTROL_ROW_TOL..=1.0 + CONTROL_ROW_TOL).contains(&e));
        if (sum - 1.0).abs() > CONTROL_ROW_TOL || bad_entry {
            return Err(Error::RowStochasticityViolation { row: i, sum });
        }
    }
    Ok(())
}

/// Sequence of power vectors produced by one of the iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<PowerVector>,
    pub converged: bool,
    /// ℓ1 distance between the last two points (0 for a single point).
    pub final_residual: f64,
}

impl Trajectory {
    pub fn last(&self) -> &PowerVector {
        self.points.last().expect("trajectory has at least one point")
    }

    /// Number of updates performed.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

fn check_dims(net: &InfluenceNetwork, prof: &StubbornnessProfile, x: &PowerVector) -> Result<()> {
    prof.check_len(net.n())?;
    x.check_len(net.n())
}

pub(crate) fn influence_matrix(c: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let n = c.nrows();
    DMatrix::from_fn(n, n, |i, j| if i == j { x[i] } else { (1.0 - x[i]) * c[(i, j)] })
}

/// Builds `W(x)`. Diagonal entries are exactly `x_i`.
pub fn build_w(net: &InfluenceNetwork, x: &PowerVector) -> Result<InfluenceMatrixW> {
    x.check_len(net.n())?;
    Ok(InfluenceMatrixW(influence_matrix(net.matrix(), x.as_slice())))
}

/// One opinion update `Θ W y + (I - Θ) y0`.
pub fn fj_step(
    y: &OpinionVector,
    y0: &OpinionVector,
    prof: &StubbornnessProfile,
    w: &InfluenceMatrixW,
) -> Result<OpinionVector> {
    let n = w.n();
    for len in [y.n(), y0.n(), prof.n()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let wy = w.matrix() * y.as_dvector();
    let theta = prof.theta();
    Ok(OpinionVector(DVector::from_fn(n, |i, _| {
        theta[i] * wy[i] + (1.0 - theta[i]) * y0.0[i]
    })))
}

/// `V(x) = (I - Θ W(x))^{-1} (I - Θ)` by one LU solve with a matrix
/// right-hand side.
pub fn compute_v(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x: &PowerVector,
) -> Result<ControlMatrixV> {
    check_dims(net, prof, x)?;
    let v = control_matrix_raw(net.matrix(), prof.theta(), x.as_slice())?;
    ControlMatrixV::new(v)
}

pub(crate) fn control_matrix_raw(c: &DMatrix<f64>, theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let w = influence_matrix(c, x);
    let a = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - theta[i] * w[(i, j)]
    });
    let rhs = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - theta[i] } else { 0.0 });
    solve_mat(a, &rhs, "I - Θ W(x)")
}

/// Unchecked power map on raw data.
///
/// Evaluates `(I - Θ)(I - W(x)^T Θ)^{-1} 1/n` for any `x` in `R^n` (not only
/// the simplex), with no validation of `c` or `theta` and no renormalization.
/// Intended for finite-difference checks and for the degenerate profiles the
/// validated API refuses.
pub fn power_map(c: &DMatrix<f64>, theta: &[f64], x: &[f64]) -> Result<DVector<f64>> {
    let n = c.nrows();
    if theta.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if theta.len() != n { theta.len() } else { x.len() },
        });
    }
    // (I - W^T Θ)_{ij} = δ_ij - W_ji θ_j
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        let w_ji = if i == j { x[j] } else { (1.0 - x[j]) * c[(j, i)] };
        d - w_ji * theta[j]
    });
    let rhs = DVector::from_element(n, 1.0 / n as f64);
    let u = solve_vec(m, &rhs, "I - W(x)^T Θ")?;
    Ok(DVector::from_fn(n, |i, _| (1.0 - theta[i]) * u[i]))
}

/// The issue-sequence map `F(x)`, returned on the simplex.
pub fn f_map(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x: &PowerVector,
) -> Result<PowerVector> {
    check_dims(net, prof, x)?;
    PowerVector::from_computed(power_map(net.matrix(), prof.theta(), x.as_slice())?)
}

/// Iterates `x(s+1) = F(x(s))` until the ℓ1 change drops below `tol` or
/// `max_issues` updates have been made. Every iterate is recorded.
pub fn iterate_issue_sequence(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    max_issues: usize,
    tol: f64,
) -> Result<Trajectory> {
    check_iteration_args(net, prof, x0, max_issues, tol)?;
    iterate_map(x0, max_issues, tol, |x| f_map(net, prof, x))
}

/// Issue-sequence iteration where each update is produced by the local
/// perceived-power process (started from the current `x`) instead of a
/// linear solve.
pub fn iterate_perceived(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    max_issues: usize,
    tol: f64,
) -> Result<Trajectory> {
    check_iteration_args(net, prof, x0, max_issues, tol)?;
    let inner_tol = (tol * 1e-2).max(1e-15);
    iterate_map(x0, max_issues, tol, |x| {
        perceived_power_process(net, prof, x, x.as_slice(), inner_tol)
    })
}

fn check_iteration_args(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    max_steps: usize,
    tol: f64,
) -> Result<()> {
    check_dims(net, prof, x0)?;
    prof.require_standing_assumption()?;
    if max_steps == 0 {
        return Err(Error::OutOfRange {
            name: "max_steps",
            value: 0.0,
            range: ">= 1",
        });
    }
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "tol",
            value: tol,
            range: "> 0",
        });
    }
    Ok(())
}

fn iterate_map<F>(x0: &PowerVector, max_steps: usize, tol: f64, mut map: F) -> Result<Trajectory>
where
    F: FnMut(&PowerVector) -> Result<PowerVector>,
{
    let mut points = vec![x0.clone()];
    let mut change = f64::INFINITY;
    for _ in 0..max_steps {
        let next = map(points.last().unwrap())?;
        change = next.l1_distance(points.last().unwrap());
        points.push(next);
        if change < tol {
            break;
        }
    }
    Ok(Trajectory {
        points,
        converged: change < tol,
        final_residual: change,
    })
}

/// Local perceived-power iteration
/// `p(k+1) = (I - Θ) W(x)^T Θ (I - Θ)^{-1} p(k) + (I - Θ) 1/n`.
///
/// Each individual only needs `n`, the weights others accord to it and those
/// individuals' susceptibilities. The fixed point is `F(x)` for any start
/// `p0`; iteration stops once the ℓ1 change is below `tol`.
pub fn perceived_power_process(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x: &PowerVector,
    p0: &[f64],
    tol: f64,
) -> Result<PowerVector> {
    check_dims(net, prof, x)?;
    let n = net.n();
    if p0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: p0.len(),
        });
    }
    let theta = prof.theta();
    if theta.iter().any(|&t| t >= 1.0) {
        return Err(Error::SingularSystem("I - Θ"));
    }
    let w = influence_matrix(net.matrix(), x.as_slice());
    // W̃_ij = (1 - θ_i) W_ji θ_j / (1 - θ_j)
    let wt = DMatrix::from_fn(n, n, |i, j| {
        (1.0 - theta[i]) * w[(j, i)] * theta[j] / (1.0 - theta[j])
    });
    let bias = DVector::from_fn(n, |i, _| (1.0 - theta[i]) / n as f64);

    let mut p = DVector::from_column_slice(p0);
    let mut change = f64::INFINITY;
    for _ in 0..INNER_MAX_ITER {
        let next = &wt * &p + &bias;
        change = l1(next.as_slice(), p.as_slice());
        p = next;
        if change < tol {
            return PowerVector::from_computed(p);
        }
    }
    Err(Error::NotConverged {
        iterations: INNER_MAX_ITER,
        change,
    })
}

/// State `(V(k), x(k))` of the single-issue model.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleIssueState {
    pub v: ControlMatrixV,
    pub x: PowerVector,
    pub k: usize,
    /// Rows of `V` rescaled because their sum drifted past [`CONTROL_ROW_TOL`].
    pub renormalizations: usize,
}

impl SingleIssueState {
    /// `V(0) = I` with a free initial power vector.
    pub fn initial(x0: PowerVector) -> Self {
        Self {
            v: ControlMatrixV::identity(x0.n()),
            x: x0,
            k: 0,
            renormalizations: 0,
        }
    }

    /// Starts from an arbitrary control matrix, e.g. a known equilibrium.
    pub fn with_control(v: ControlMatrixV, x: PowerVector) -> Result<Self> {
        x.check_len(v.n())?;
        Ok(Self {
            v,
            x,
            k: 0,
            renormalizations: 0,
        })
    }
}

/// `V+ = Θ W(x) V + I - Θ`, `x+ = (V+)^T 1/n`.
pub fn single_issue_step(
    state: &SingleIssueState,
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
) -> Result<SingleIssueState> {
    check_dims(net, prof, &state.x)?;
    state.x.check_len(state.v.n())?;
    let n = net.n();
    let theta = prof.theta();
    let w = influence_matrix(net.matrix(), state.x.as_slice());
    let mut v = w * state.v.matrix();
    for i in 0..n {
        let mut row = v.row_mut(i);
        row *= theta[i];
        row[i] += 1.0 - theta[i];
    }
    let mut renormalizations = state.renormalizations;
    for i in 0..n {
        let sum = v.row(i).sum();
        if (sum - 1.0).abs() > CONTROL_ROW_TOL {
            let mut row = v.row_mut(i);
            row /= sum;
            renormalizations += 1;
        }
    }
    let v = ControlMatrixV::new(v)?;
    let x = PowerVector::from_computed(v.column_means())?;
    Ok(SingleIssueState {
        v,
        x,
        k: state.k + 1,
        renormalizations,
    })
}

/// Output of [`iterate_single_issue`]: the power trajectory and the last state.
#[derive(Debug, Clone)]
pub struct SingleIssueRun {
    pub trajectory: Trajectory,
    pub state: SingleIssueState,
}

/// Runs the single-issue model from `V(0) = I` and `x(0) = x0`.
///
/// `x0` enters only through `W(x(0))` in the first step. Iteration stops when
/// both the ℓ1 change in `x` and the largest entry change in `V` are below
/// `tol`, or after `max_steps` steps.
pub fn iterate_single_issue(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    max_steps: usize,
    tol: f64,
) -> Result<SingleIssueRun> {
    iterate_single_issue_from(net, prof, SingleIssueState::initial(x0.clone()), max_steps, tol)
}

/// Same as [`iterate_single_issue`] from an arbitrary starting state.
pub fn iterate_single_issue_from(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    start: SingleIssueState,
    max_steps: usize,
    tol: f64,
) -> Result<SingleIssueRun> {
    check_iteration_args(net, prof, &start.x, max_steps, tol)?;
    let mut points = vec![start.x.clone()];
    let mut state = start;
    let mut change = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_steps {
        let next = single_issue_step(&state, net, prof)?;
        change = next.x.l1_distance(&state.x);
        let v_change = (next.v.matrix() - state.v.matrix()).amax();
        points.push(next.x.clone());
        state = next;
        if change < tol && v_change < tol {
            converged = true;
            break;
        }
    }
    Ok(SingleIssueRun {
        trajectory: Trajectory {
            points,
            converged,
            final_residual: change,
        },
        state,
    })
}
