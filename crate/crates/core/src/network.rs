//! Influence networks, stubbornness profiles and points on the simplex.
//!
//! An [`InfluenceNetwork`] wraps the relative interaction matrix `C`: a dense,
//! row-stochastic matrix with zero diagonal whose entry `C[i][j]` is the weight
//! individual `i` accords to individual `j`. A [`StubbornnessProfile`] holds the
//! susceptibilities `theta`, and a [`PowerVector`] is a point of the simplex
//! (self-appraisal or social power).
//!
//! [`analyze_structure`] extracts the graph facts the equilibrium results branch
//! on: strongly connected components, sink components, star centers and double
//! stochasticity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on row sums, column sums and simplex sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Sums closer to 1 than this are treated as exact and left untouched.
pub const RENORMALIZE_FLOOR: f64 = 1e-14;

/// Row-stochastic, zero-diagonal relative interaction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceNetwork {
    c: DMatrix<f64>,
    renormalized_rows: Vec<usize>,
}

impl InfluenceNetwork {
    /// Validates a row-major matrix. See [`validate_network`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        validate_network(rows)
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.c[(i, j)]
    }

    /// Rows whose sum drifted from 1 within tolerance and were rescaled.
    pub fn renormalized_rows(&self) -> &[usize] {
        &self.renormalized_rows
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.c.row(i).iter().copied().collect())
            .collect()
    }

    /// Whether `C[i][j] > 0`, i.e. the digraph has the edge `i -> j`.
    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.c[(i, j)] > 0.0
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (i + 1..n).all(|j| self.c[(i, j)] == self.c[(j, i)]))
    }
}

impl Serialize for InfluenceNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for InfluenceNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        validate_network(&rows).map_err(serde::de::Error::custom)
    }
}

/// Validates a raw row-major matrix as a relative interaction matrix.
///
/// Checks run row by row: entries must be finite and nonnegative, the diagonal
/// exactly zero, and the row sum within [`STOCHASTIC_TOL`] of 1. Rows whose sum
/// drifts by more than [`RENORMALIZE_FLOOR`] (but within tolerance) are divided
/// by their sum and listed in [`InfluenceNetwork::renormalized_rows`].
pub fn validate_network(rows: &[Vec<f64>]) -> Result<InfluenceNetwork> {
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NonSquare {
                rows: n,
                row: i,
                len: row.len(),
            });
        }
    }
    if n < 2 {
        return Err(Error::TooSmall(n));
    }

    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut renormalized_rows = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i, j));
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry(i, j));
            }
        }
        if row[i] != 0.0 {
            return Err(Error::NonzeroDiagonal(i));
        }
        let sum: f64 = row.iter().sum();
        let drift = (sum - 1.0).abs();
        if drift > STOCHASTIC_TOL {
            return Err(Error::RowSumViolation { row: i, sum });
        }
        let scale = if drift > RENORMALIZE_FLOOR {
            renormalized_rows.push(i);
            sum
        } else {
            1.0
        };
        for (j, &v) in row.iter().enumerate() {
            // keep the diagonal a true +0.0
            c[(i, j)] = if i == j { 0.0 } else { v / scale };
        }
    }
    Ok(InfluenceNetwork {
        c,
        renormalized_rows,
    })
}

/// Susceptibilities `theta`; `1 - theta_i` is the stubbornness of individual `i`.
///
/// Construction accepts any `theta_i` in `[0, 1]` so that degenerate profiles
/// can be fed to the raw kernels; the validated entry points call
/// [`StubbornnessProfile::require_standing_assumption`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StubbornnessProfile {
    theta: Vec<f64>,
}

impl StubbornnessProfile {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        for (index, &value) in theta.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::SusceptibilityOutOfRange { index, value });
            }
        }
        Ok(Self { theta })
    }

    pub fn uniform(n: usize, theta: f64) -> Result<Self> {
        Self::new(vec![theta; n])
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.theta[i]
    }

    pub fn theta_min(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn theta_ave(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.n() as f64
    }

    /// `n * theta_ave - theta_min`, i.e. the largest sum of `n - 1` susceptibilities.
    pub fn zeta(&self) -> f64 {
        self.theta.iter().sum::<f64>() - self.theta_min()
    }

    /// Indices with `theta_i = 0`.
    pub fn fully_stubborn(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.theta[i] == 0.0).collect()
    }

    /// Indices with `theta_i > 0`.
    pub fn partially_stubborn(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.theta[i] > 0.0).collect()
    }

    /// Number of fully stubborn individuals.
    pub fn r(&self) -> usize {
        self.theta.iter().filter(|&&t| t == 0.0).count()
    }

    pub fn require_standing_assumption(&self) -> Result<()> {
        if let Some(i) = self.theta.iter().position(|&t| t >= 1.0) {
            return Err(Error::AssumptionViolated(format!(
                "theta[{i}] = {} is not below 1",
                self.theta[i]
            )));
        }
        if !self.theta.iter().any(|&t| t > 0.0) {
            return Err(Error::AssumptionViolated(
                "no individual has positive susceptibility".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.n(),
            });
        }
        Ok(())
    }
}

/// Point of the simplex: nonnegative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    x: DVector<f64>,
}

impl PowerVector {
    /// Validates `x` against the simplex, rescaling sums that drift by more
    /// than [`RENORMALIZE_FLOOR`] but no more than [`STOCHASTIC_TOL`].
    pub fn new(x: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(x))
    }

    pub fn from_dvector(x: DVector<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::NotOnSimplex("empty vector".into()));
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NotOnSimplex(format!("entry {i} is {v}")));
            }
            if v < 0.0 {
                return Err(Error::NotOnSimplex(format!("entry {i} is negative ({v:e})")));
            }
        }
        Self::normalize_sum(x)
    }

    /// Accepts the output of a map that lands on the simplex up to rounding:
    /// negative entries no larger than [`RENORMALIZE_FLOOR`] are clamped to 0.
    pub(crate) fn from_computed(mut x: DVector<f64>) -> Result<Self> {
        for v in x.iter_mut() {
            if *v < 0.0 && *v >= -RENORMALIZE_FLOOR {
                *v = 0.0;
            }
        }
        Self::from_dvector(x)
    }

    fn normalize_sum(mut x: DVector<f64>) -> Result<Self> {
        let sum = x.sum();
        let drift = (sum - 1.0).abs();
        if drift > STOCHASTIC_TOL {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        if drift > RENORMALIZE_FLOOR {
            x /= sum;
        }
        Ok(Self { x })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            x: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    /// The vertex `e_i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        Self { x }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.x.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.x.iter().copied().collect()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.x[i]
    }

    pub fn l1_distance(&self, other: &PowerVector) -> f64 {
        l1(self.as_slice(), other.as_slice())
    }

    /// Index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.n() {
            if self.x[i] > self.x[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.x.max()
    }

    pub fn min(&self) -> f64 {
        self.x.min()
    }

    /// Entry `i` is `1` for some `i`.
    pub fn is_vertex(&self) -> bool {
        self.x.iter().any(|&v| v == 1.0)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.n(),
            });
        }
        Ok(())
    }
}

impl Serialize for PowerVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.x.iter())
    }
}

impl<'de> Deserialize<'de> for PowerVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        PowerVector::new(v).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Structural facts about the digraph of `C` (edge `i -> j` iff `C[i][j] > 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStructure {
    /// Strongly connected components, each sorted, ordered by smallest member.
    pub sccs: Vec<Vec<usize>>,
    /// Components with no edge leaving them.
    pub sink_sccs: Vec<Vec<usize>>,
    /// Lowest-index node every edge is incident to, if any.
    pub star_center: Option<usize>,
    /// Every node that qualifies as a star center (two nodes when `n = 2`).
    pub star_centers: Vec<usize>,
    pub doubly_stochastic: bool,
}

/// Computes SCCs (Tarjan), sink components, star centers and the
/// doubly-stochastic flag.
pub fn analyze_structure(net: &InfluenceNetwork) -> GraphStructure {
    let n = net.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| net.has_edge(i, j)).collect())
        .collect();

    let mut sccs = tarjan_scc(&adj);
    for comp in &mut sccs {
        comp.sort_unstable();
    }
    sccs.sort_unstable_by_key(|comp| comp[0]);

    let mut comp_of = vec![0usize; n];
    for (cid, comp) in sccs.iter().enumerate() {
        for &v in comp {
            comp_of[v] = cid;
        }
    }
    let sink_sccs = sccs
        .iter()
        .enumerate()
        .filter(|(cid, comp)| {
            comp.iter()
                .all(|&u| adj[u].iter().all(|&v| comp_of[v] == *cid))
        })
        .map(|(_, comp)| comp.clone())
        .collect();

    let star_centers: Vec<usize> = (0..n)
        .filter(|&l| {
            (0..n).all(|i| (0..n).all(|j| !net.has_edge(i, j) || i == l || j == l))
        })
        .collect();

    let doubly_stochastic =
        (0..n).all(|j| (net.matrix().column(j).sum() - 1.0).abs() <= STOCHASTIC_TOL);

    GraphStructure {
        sccs,
        sink_sccs,
        star_center: star_centers.first().copied(),
        star_centers,
        doubly_stochastic,
    }
}

fn tarjan_scc(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State {
        index: usize,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        comps: Vec<Vec<usize>>,
    }

    fn connect(v: usize, graph: &[Vec<usize>], st: &mut State) {
        st.idx[v] = Some(st.index);
        st.low[v] = st.index;
        st.index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;

        for &w in &graph[v] {
            match st.idx[w] {
                None => {
                    connect(w, graph, st);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }

        if Some(st.low[v]) == st.idx[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("tarjan stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.comps.push(comp);
        }
    }

    let n = graph.len();
    let mut st = State {
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        idx: vec![None; n],
        low: vec![0; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            connect(v, graph, &mut st);
        }
    }
    st.comps
}

/// Every sink component holds someone with `theta_i < 1`, and an autocratic
/// start `x0 = e_i` only occurs with `theta_i < 1`.
pub fn check_assumption_a1(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
) -> bool {
    if prof.n() != net.n() || x0.n() != net.n() {
        return false;
    }
    let structure = analyze_structure(net);
    let sinks_ok = structure
        .sink_sccs
        .iter()
        .all(|comp| comp.iter().any(|&i| prof.get(i) < 1.0));
    let vertex_ok = (0..net.n()).all(|i| x0.get(i) != 1.0 || prof.get(i) < 1.0);
    sinks_ok && vertex_ok
}

/// All `theta_i < 1` and at least one `theta_j > 0`.
pub fn check_assumption_a2(prof: &StubbornnessProfile) -> bool {
    prof.require_standing_assumption().is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> InfluenceNetwork {
        validate_network(&[
            vec![0.0, 0.2, 0.8],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn validates_two_node_swap() {
        let net = validate_network(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(net.n(), 2);
        assert!(net.renormalized_rows().is_empty());
    }

    #[test]
    fn validates_star_example() {
        assert_eq!(star().n(), 3);
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let err = validate_network(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap_err();
        assert_eq!(err, Error::NonzeroDiagonal(0));
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(matches!(
            validate_network(&[vec![0.0, 1.0], vec![1.0]]),
            Err(Error::NonSquare { row: 1, .. })
        ));
        assert_eq!(validate_network(&[vec![0.0]]), Err(Error::TooSmall(1)));
        assert_eq!(
            validate_network(&[vec![0.0, 1.0, 0.0], vec![-0.1, 0.0, 1.1], vec![0.5, 0.5, 0.0]]),
            Err(Error::NegativeEntry(1, 0))
        );
        assert!(matches!(
            validate_network(&[vec![0.0, 0.9], vec![1.0, 0.0]]),
            Err(Error::RowSumViolation { row: 0, .. })
        ));
        assert_eq!(
            validate_network(&[vec![0.0, f64::NAN], vec![1.0, 0.0]]),
            Err(Error::NonFinite(0, 1))
        );
    }

    #[test]
    fn renormalizes_rows_within_tolerance() {
        let net = validate_network(&[vec![0.0, 1.0 + 5e-13], vec![1.0, 0.0]]).unwrap();
        assert_eq!(net.renormalized_rows(), &[0]);
        assert_eq!(net.weight(0, 1), 1.0);
        // within the floor: left alone
        let net = validate_network(&[vec![0.0, 0.1, 0.2, 0.7], vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(net.renormalized_rows().is_empty());
        assert_eq!(net.weight(0, 1), 0.1);
    }

    #[test]
    fn structure_of_star_example() {
        let s = analyze_structure(&star());
        assert_eq!(s.star_center, Some(0));
        assert_eq!(s.star_centers, vec![0]);
        assert!(!s.doubly_stochastic);
        assert_eq!(s.sccs, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn structure_of_two_node_swap() {
        let net = validate_network(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = analyze_structure(&net);
        assert_eq!(s.sccs, vec![vec![0, 1]]);
        assert_eq!(s.sink_sccs, vec![vec![0, 1]]);
        assert!(s.doubly_stochastic);
        assert_eq!(s.star_centers, vec![0, 1]);
    }

    #[test]
    fn structure_with_source_node() {
        // 3 points into the {1, 2} cycle; reachability by hand:
        // 1 <-> 2, 3 -> 1, nothing reaches 3.
        let net = validate_network(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let s = analyze_structure(&net);
        assert_eq!(s.sccs, vec![vec![0, 1], vec![2]]);
        assert_eq!(s.sink_sccs, vec![vec![0, 1]]);
        assert_eq!(s.star_center, Some(0));
    }

    #[test]
    fn assumption_checks() {
        let prof = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        assert!(check_assumption_a2(&prof));
        assert!(check_assumption_a1(&star(), &prof, &PowerVector::uniform(3)));
        assert!(check_assumption_a1(&star(), &prof, &PowerVector::vertex(3, 2)));

        let none = StubbornnessProfile::new(vec![0.0, 0.0, 0.0]).unwrap();
        assert!(!check_assumption_a2(&none));

        let swap = validate_network(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = StubbornnessProfile::new(vec![1.0, 0.5]).unwrap();
        assert!(!check_assumption_a2(&p));
        assert!(!check_assumption_a1(&swap, &p, &PowerVector::vertex(2, 0)));
        assert!(check_assumption_a1(&swap, &p, &PowerVector::uniform(2)));

        let all_one = StubbornnessProfile::new(vec![1.0, 1.0]).unwrap();
        assert!(!check_assumption_a1(&swap, &all_one, &PowerVector::uniform(2)));
    }

    #[test]
    fn profile_scalars() {
        let p = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        assert_eq!(p.theta_min(), 0.0);
        assert_eq!(p.theta_max(), 0.6);
        assert!((p.theta_ave() - 0.7 / 3.0).abs() < 1e-15);
        assert!((p.zeta() - 0.7).abs() < 1e-15);
        assert_eq!(p.fully_stubborn(), vec![1]);
        assert_eq!(p.partially_stubborn(), vec![0, 2]);
        assert_eq!(p.r(), 1);
        assert!(StubbornnessProfile::new(vec![1.5]).is_err());
    }

    #[test]
    fn power_vector_validation() {
        assert!(PowerVector::new(vec![0.5, 0.5]).is_ok());
        assert!(PowerVector::new(vec![0.6, 0.5]).is_err());
        assert!(PowerVector::new(vec![-0.1, 1.1]).is_err());
        let p = PowerVector::new(vec![0.5, 0.5 + 4e-13]).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        assert_eq!(PowerVector::vertex(3, 1).argmax(), 1);
    }
}
