//! Sufficient conditions for uniqueness and convergence, evaluated on a
//! concrete `(C, theta)` pair. Every certificate carries the numbers it was
//! decided on.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::power_map;
use crate::error::{Error, Result};
use crate::network::{analyze_structure, l1, GraphStructure, InfluenceNetwork, StubbornnessProfile};

/// Threshold used by both democracy tests.
pub const DEMOCRACY_TOL: f64 = 1e-10;

/// Contraction of `F` in ℓ1: `κ = 2 θ_max (1 + ζ) / (n (1 - θ_max))` bounds
/// the Jacobian norm everywhere on the simplex, and `κ < 1` exactly when
/// `θ_max < n / (n + 2(1 + ζ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub holds: bool,
    pub theta_max: f64,
    pub threshold: f64,
    pub kappa: f64,
}

pub fn contraction_certificate(prof: &StubbornnessProfile) -> ContractionCertificate {
    let n = prof.n() as f64;
    let theta_max = prof.theta_max();
    let zeta = prof.zeta();
    let threshold = n / (n + 2.0 * (1.0 + zeta));
    let kappa = if theta_max < 1.0 {
        2.0 * theta_max * (1.0 + zeta) / (n * (1.0 - theta_max))
    } else {
        f64::INFINITY
    };
    ContractionCertificate {
        holds: theta_max < threshold,
        theta_max,
        threshold,
        kappa,
    }
}

/// Global convergence for a star with partially stubborn center `l` that
/// gives no weight to partially stubborn leaves, provided the leaves'
/// susceptibilities satisfy `Σ θ_j <= 4n/5 - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarConvergenceCertificate {
    pub holds: bool,
    pub center: Option<usize>,
    /// Center gives zero weight to every partially stubborn leaf.
    pub center_ignores_partial_leaves: bool,
    pub partial_leaf_theta_sum: f64,
    pub bound: f64,
}

pub fn star_convergence_certificate(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    structure: &GraphStructure,
) -> StarConvergenceCertificate {
    let n = net.n();
    let bound = 4.0 * n as f64 / 5.0 - 1.0;
    let mut best = StarConvergenceCertificate {
        holds: false,
        center: None,
        center_ignores_partial_leaves: false,
        partial_leaf_theta_sum: f64::NAN,
        bound,
    };
    for &l in structure.star_centers.iter().filter(|&&l| prof.get(l) > 0.0) {
        let leaves = (0..n).filter(|&j| j != l && prof.get(j) > 0.0);
        let ignores = leaves.clone().all(|j| net.weight(l, j) == 0.0);
        let sum: f64 = leaves.map(|j| prof.get(j)).sum();
        let cert = StarConvergenceCertificate {
            holds: ignores && sum <= bound,
            center: Some(l),
            center_ignores_partial_leaves: ignores,
            partial_leaf_theta_sum: sum,
            bound,
        };
        if best.center.is_none() || (cert.holds && !best.holds) {
            best = cert;
        }
    }
    best
}

/// The single-issue model contracts when `θ_max < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleIssueCertificate {
    pub holds: bool,
    pub theta_max: f64,
    pub bound: f64,
}

pub fn single_issue_certificate(prof: &StubbornnessProfile) -> SingleIssueCertificate {
    let theta_max = prof.theta_max();
    SingleIssueCertificate {
        holds: theta_max < 0.5,
        theta_max,
        bound: 0.5,
    }
}

/// Whether the uniform vector is an equilibrium, decided two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemocracyCheck {
    /// `w = Θ(I - Θ)^{-1} 1` is a left eigenvector of `C` for eigenvalue 1.
    pub democratic: bool,
    /// `‖wᵀC - wᵀ‖₁ / ‖w‖₁`.
    pub eigen_residual: f64,
    /// `‖F(1/n) - 1/n‖₁`.
    pub fixed_point_residual: f64,
    /// Both routes reach the same verdict at [`DEMOCRACY_TOL`].
    pub routes_agree: bool,
}

pub fn democracy_check(net: &InfluenceNetwork, prof: &StubbornnessProfile) -> Result<DemocracyCheck> {
    let n = net.n();
    prof.check_len(n)?;
    let theta = prof.theta();
    if theta.iter().any(|&t| t >= 1.0) {
        return Err(Error::SingularSystem("I - Θ"));
    }
    let w = DVector::from_fn(n, |i, _| theta[i] / (1.0 - theta[i]));
    let w_norm = w.sum();
    let eigen_residual = if w_norm > 0.0 {
        let wc = net.matrix().tr_mul(&w);
        l1(wc.as_slice(), w.as_slice()) / w_norm
    } else {
        0.0
    };
    let uniform = vec![1.0 / n as f64; n];
    let f = power_map(net.matrix(), theta, &uniform)?;
    let fixed_point_residual = l1(f.as_slice(), &uniform);
    let democratic = eigen_residual < DEMOCRACY_TOL;
    Ok(DemocracyCheck {
        democratic,
        eigen_residual,
        fixed_point_residual,
        routes_agree: democratic == (fixed_point_residual < DEMOCRACY_TOL),
    })
}

/// All certificates for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSet {
    /// Equilibrium is unique (`F` is a contraction).
    pub unique_by_contraction: ContractionCertificate,
    /// Issue-sequence iteration converges exponentially (same condition).
    pub issue_sequence_convergent: bool,
    pub star_partial_center_convergent: StarConvergenceCertificate,
    pub single_issue_convergent: SingleIssueCertificate,
    pub democracy: DemocracyCheck,
}

pub fn certify(net: &InfluenceNetwork, prof: &StubbornnessProfile) -> Result<CertificateSet> {
    let structure = analyze_structure(net);
    certify_with(net, prof, &structure)
}

pub(crate) fn certify_with(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    structure: &GraphStructure,
) -> Result<CertificateSet> {
    prof.check_len(net.n())?;
    let contraction = contraction_certificate(prof);
    Ok(CertificateSet {
        unique_by_contraction: contraction,
        issue_sequence_convergent: contraction.holds,
        star_partial_center_convergent: star_convergence_certificate(net, prof, structure),
        single_issue_convergent: single_issue_certificate(prof),
        democracy: democracy_check(net, prof)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_network;

    #[test]
    fn kappa_for_uniform_03_n4() {
        let prof = StubbornnessProfile::uniform(4, 0.3).unwrap();
        let c = contraction_certificate(&prof);
        // ζ = 1.2 - 0.3 = 0.9; κ = 2·0.3·1.9/(4·0.7)
        assert!((c.kappa - 0.407_142_857_142_857).abs() < 1e-12);
        assert!(c.holds && c.kappa < 1.0);
        assert!((c.threshold - 4.0 / 7.8).abs() < 1e-15);
    }

    #[test]
    fn democracy_examples() {
        let net = validate_network(&[
            vec![0.0, 0.5, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let prof = StubbornnessProfile::new(vec![0.5, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let d = democracy_check(&net, &prof).unwrap();
        assert!(d.democratic && d.routes_agree);

        let fig = validate_network(&[
            vec![0.0, 0.2, 0.8],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        // w = (1/9, 0, 1.5): wᵀC = (1.5, 1/45, 4/45) ≠ wᵀ
        let prof = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        let d = democracy_check(&fig, &prof).unwrap();
        assert!(!d.democratic && d.routes_agree);
        let expected = ((1.5 - 1.0 / 9.0) + 1.0 / 45.0 + (1.5 - 4.0 / 45.0)) / (1.0 / 9.0 + 1.5);
        assert!((d.eigen_residual - expected).abs() < 1e-14);
    }

    #[test]
    fn star_convergence_bound() {
        let net = validate_network(&[
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let s = analyze_structure(&net);
        let prof = StubbornnessProfile::new(vec![0.5, 0.0, 0.9, 0.9, 0.9]).unwrap();
        let c = star_convergence_certificate(&net, &prof, &s);
        assert!(c.center_ignores_partial_leaves);
        assert!((c.partial_leaf_theta_sum - 2.7).abs() < 1e-15);
        assert_eq!(c.bound, 3.0);
        assert!(c.holds);
        let prof = StubbornnessProfile::new(vec![0.5, 0.0, 0.99, 0.99, 0.99]).unwrap();
        assert!(star_convergence_certificate(&net, &prof, &s).holds);
        let net3 = validate_network(&[
            vec![0.0, 0.2, 0.8],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let prof = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        let c = star_convergence_certificate(&net3, &prof, &analyze_structure(&net3));
        assert!(!c.holds && !c.center_ignores_partial_leaves);
    }
}
