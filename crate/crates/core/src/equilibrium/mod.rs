//! Equilibrium social power: solvers, closed forms, certificates and checks.
//!
//! An equilibrium is a fixed point `x* = F(x*)` of the issue-sequence map.
//! [`solve`] picks a star closed form when the network qualifies and falls
//! back to fixed-point iteration otherwise. Every report carries the
//! [`CertificateSet`] and a statement of whether uniqueness is proven for
//! the instance.

mod analysis;
mod certificates;
mod properties;
mod star;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use analysis::{
    convergence_rate_measurement, jacobian_f, jacobian_raw, RateFit, RATE_ERROR_FLOOR,
    RATE_MIN_POINTS, RATE_TAIL_LEN,
};
pub use certificates::{
    certify, contraction_certificate, democracy_check, single_issue_certificate,
    star_convergence_certificate, CertificateSet, ContractionCertificate, DemocracyCheck,
    SingleIssueCertificate, StarConvergenceCertificate, DEMOCRACY_TOL,
};
pub use properties::{
    block_equation_residual, equilibrium_properties_check, PropertyCheck, PropertyReport,
    EQUALITY_TOL, EQUILIBRIUM_RESIDUAL_TOL, STRICT_SLACK,
};
pub use star::{center_power, leaf_power, StarQuantities};

use crate::dynamics::{f_map, DEFAULT_TOL, OUTER_MAX_ITER};
use crate::error::{Error, Result};
use crate::montecarlo::sample_simplex;
use crate::network::{analyze_structure, GraphStructure, InfluenceNetwork, PowerVector, StubbornnessProfile};

/// Note attached to reports whose uniqueness no sufficient condition proves.
pub const CONJECTURED_NOTE: &str = "uniqueness conjectured, not certified";
/// Two limits are the same equilibrium when their ℓ1 distance is at most this.
pub const PROBE_AGREEMENT_TOL: f64 = 1e-8;
/// Default number of starts for [`multi_start_probe`].
pub const PROBE_STARTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedPoint,
    StarFullyStubborn,
    StarPartiallyStubborn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FixedPoint => "fixed-point",
            Method::StarFullyStubborn => "star-fully-stubborn",
            Method::StarPartiallyStubborn => "star-partially-stubborn",
        }
    }
}

/// Requested solution method. `Auto` prefers a closed form when the
/// instance qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    #[default]
    Auto,
    Iterate,
    StarFullyStubborn,
    StarPartiallyStubborn,
}

/// Which sufficient condition, if any, proves the equilibrium unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uniqueness {
    /// `F` is an ℓ1 contraction on the simplex.
    Contraction,
    /// Star whose center is fully stubborn.
    StarFullyStubbornCenter,
    /// Star whose partially stubborn center ignores partially stubborn leaves.
    StarPartiallyStubbornCenter,
    Conjectured,
}

impl Uniqueness {
    pub fn is_certified(self) -> bool {
        self != Uniqueness::Conjectured
    }

    pub fn note(self) -> &'static str {
        match self {
            Uniqueness::Contraction => "unique: power map is a contraction",
            Uniqueness::StarFullyStubbornCenter => "unique: star with fully stubborn center",
            Uniqueness::StarPartiallyStubbornCenter => {
                "unique: star with partially stubborn center giving no weight to partially stubborn leaves"
            }
            Uniqueness::Conjectured => CONJECTURED_NOTE,
        }
    }
}

/// Outcome of running fixed-point iteration from several random starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub starts: usize,
    pub seed: u64,
    /// Largest ℓ1 distance from any limit to the first one.
    pub max_spread: f64,
    pub non_converged: usize,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub x_star: PowerVector,
    /// `‖F(x*) - x*‖₁`.
    pub residual: f64,
    pub iterations: usize,
    pub method: Method,
    /// Converged with `residual < EQUILIBRIUM_RESIDUAL_TOL`.
    pub solved: bool,
    /// Damped iteration was switched on after stagnation.
    pub damped: bool,
    pub certificates: CertificateSet,
    pub uniqueness: Uniqueness,
    pub uniqueness_note: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
}

/// Options for [`solve_fixed_point_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when `‖F(x) - x‖₁ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Steps without a new best residual before damping is switched on.
    pub stall_patience: usize,
    /// Damped update `x <- (1 - d) x + d F(x)`.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: OUTER_MAX_ITER,
            stall_patience: 50,
            damping: 0.5,
        }
    }
}

/// Decides which sufficient condition covers the instance.
pub fn uniqueness_status(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    structure: &GraphStructure,
    certificates: &CertificateSet,
) -> Uniqueness {
    if certificates.unique_by_contraction.holds {
        return Uniqueness::Contraction;
    }
    let centers = &structure.star_centers;
    if centers.iter().any(|&l| prof.get(l) == 0.0) {
        return Uniqueness::StarFullyStubbornCenter;
    }
    let n = net.n();
    let ignores = |l: usize| (0..n).all(|i| i == l || prof.get(i) == 0.0 || net.weight(l, i) == 0.0);
    if centers.iter().any(|&l| prof.get(l) > 0.0 && ignores(l)) {
        return Uniqueness::StarPartiallyStubbornCenter;
    }
    Uniqueness::Conjectured
}

fn report(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x_star: PowerVector,
    residual: f64,
    iterations: usize,
    method: Method,
    converged: bool,
    damped: bool,
) -> Result<EquilibriumReport> {
    let structure = analyze_structure(net);
    let certificates = certificates::certify_with(net, prof, &structure)?;
    let uniqueness = uniqueness_status(net, prof, &structure, &certificates);
    Ok(EquilibriumReport {
        x_star,
        residual,
        iterations,
        method,
        solved: converged && residual < EQUILIBRIUM_RESIDUAL_TOL,
        damped,
        certificates,
        uniqueness,
        uniqueness_note: uniqueness.note().to_string(),
        probe: None,
    })
}

/// Picard iteration `x <- F(x)` from `x0` until `‖F(x) - x‖₁ < tol`.
pub fn solve_fixed_point(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumReport> {
    solve_fixed_point_with(
        net,
        prof,
        x0,
        FixedPointOptions {
            tol,
            max_iter,
            ..FixedPointOptions::default()
        },
    )
}

/// [`solve_fixed_point`] with explicit options.
///
/// The iteration is undamped until the residual fails to reach a new
/// minimum for `stall_patience` consecutive steps; from then on it uses the
/// damped update. The reported `x*` is the last image `F(x)` and its
/// residual is recomputed.
pub fn solve_fixed_point_with(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    opts: FixedPointOptions,
) -> Result<EquilibriumReport> {
    prof.check_len(net.n())?;
    x0.check_len(net.n())?;
    prof.require_standing_assumption()?;
    if !(opts.tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "tol",
            value: opts.tol,
            range: "> 0",
        });
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::OutOfRange {
            name: "damping",
            value: opts.damping,
            range: "(0, 1]",
        });
    }

    let mut x = x0.clone();
    let mut fx = f_map(net, prof, &x)?;
    let mut res = fx.l1_distance(&x);
    let mut best = res;
    let mut stall = 0;
    let mut damped = false;
    let mut iterations = 0;
    while res >= opts.tol && iterations < opts.max_iter {
        x = if damped {
            let d = opts.damping;
            PowerVector::from_dvector(x.as_dvector() * (1.0 - d) + fx.as_dvector() * d)?
        } else {
            fx
        };
        fx = f_map(net, prof, &x)?;
        res = fx.l1_distance(&x);
        iterations += 1;
        if res < best {
            best = res;
            stall = 0;
        } else {
            stall += 1;
            if stall >= opts.stall_patience && !damped {
                log::warn!("fixed-point residual stalled at {best:e}; switching to damped iteration");
                damped = true;
            }
        }
    }
    let converged = res < opts.tol;
    let final_res = f_map(net, prof, &fx)?.l1_distance(&fx);
    report(net, prof, fx, final_res, iterations, Method::FixedPoint, converged, damped)
}

/// Closed-form equilibrium for a star whose center is fully stubborn.
pub fn star_fully_stubborn_equilibrium(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
) -> Result<EquilibriumReport> {
    prof.require_standing_assumption()?;
    let (_, x) = star::fully_stubborn_center(net, prof)?;
    let res = star::residual(net, prof, &x)?;
    report(net, prof, x, res, 0, Method::StarFullyStubborn, true, false)
}

/// Closed-form equilibrium for a star with partially stubborn center that
/// accords no weight to partially stubborn leaves.
pub fn star_partially_stubborn_equilibrium(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
) -> Result<EquilibriumReport> {
    prof.require_standing_assumption()?;
    let (_, x) = star::partially_stubborn_center(net, prof)?;
    let res = star::residual(net, prof, &x)?;
    report(net, prof, x, res, 0, Method::StarPartiallyStubborn, true, false)
}

/// Dispatches to a solver.
///
/// `Auto` tries the fully stubborn center closed form, then the partially
/// stubborn one, then iterates from `x0`. An explicit partially stubborn
/// request on a star whose center weights a partially stubborn leaf logs a
/// warning and iterates instead.
pub fn solve(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
    choice: MethodChoice,
    opts: FixedPointOptions,
) -> Result<EquilibriumReport> {
    match choice {
        MethodChoice::Iterate => solve_fixed_point_with(net, prof, x0, opts),
        MethodChoice::StarFullyStubborn => star_fully_stubborn_equilibrium(net, prof),
        MethodChoice::StarPartiallyStubborn => match star_partially_stubborn_equilibrium(net, prof) {
            Err(Error::PreconditionCliNonzero { center, leaf, weight }) => {
                log::warn!(
                    "center {center} places weight {weight} on partially stubborn leaf {leaf}; \
                     no closed form, iterating instead"
                );
                solve_fixed_point_with(net, prof, x0, opts)
            }
            other => other,
        },
        MethodChoice::Auto => {
            prof.require_standing_assumption()?;
            let centers = analyze_structure(net).star_centers;
            if centers.iter().any(|&l| prof.get(l) == 0.0) {
                return star_fully_stubborn_equilibrium(net, prof);
            }
            match star_partially_stubborn_equilibrium(net, prof) {
                Ok(r) => Ok(r),
                Err(Error::NotStar | Error::PreconditionCliNonzero { .. }) => {
                    solve_fixed_point_with(net, prof, x0, opts)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Iterates from `starts` random points of the simplex and reports whether
/// every limit lies within [`PROBE_AGREEMENT_TOL`] of the first.
///
/// Start `k` is drawn from stream `k` of a generator seeded with `seed`, so
/// the result does not depend on scheduling.
pub fn multi_start_probe(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    starts: usize,
    seed: u64,
    opts: FixedPointOptions,
) -> Result<ProbeReport> {
    if starts == 0 {
        return Err(Error::OutOfRange {
            name: "starts",
            value: 0.0,
            range: ">= 1",
        });
    }
    let n = net.n();
    let limits: Vec<(PowerVector, bool)> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let x0 = sample_simplex(&mut rng, n);
            solve_fixed_point_with(net, prof, &x0, opts).map(|r| (r.x_star, r.solved))
        })
        .collect::<Result<_>>()?;
    let reference = &limits[0].0;
    let max_spread = limits
        .iter()
        .map(|(x, _)| x.l1_distance(reference))
        .fold(0.0, f64::max);
    let non_converged = limits.iter().filter(|(_, ok)| !ok).count();
    Ok(ProbeReport {
        starts,
        seed,
        max_spread,
        non_converged,
        agree: non_converged == 0 && max_spread <= PROBE_AGREEMENT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_network;

    fn star3() -> InfluenceNetwork {
        validate_network(&[
            vec![0.0, 0.2, 0.8],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn doubly_stochastic_uniform_theta_is_democratic() {
        let net = validate_network(&[
            vec![0.0, 0.5, 0.0, 0.5],
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.5, 0.0, 0.5],
            vec![0.5, 0.0, 0.5, 0.0],
        ])
        .unwrap();
        let prof = StubbornnessProfile::uniform(4, 0.7).unwrap();
        let x0 = PowerVector::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        let r = solve_fixed_point(&net, &prof, &x0, 1e-13, 10_000).unwrap();
        assert!(r.solved);
        assert!(r.x_star.l1_distance(&PowerVector::uniform(4)) < 1e-12);
        assert!(r.certificates.democracy.democratic);
    }

    #[test]
    fn star3_center_is_largest() {
        let prof = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        let r = solve_fixed_point(&star3(), &prof, &PowerVector::uniform(3), 1e-13, 10_000).unwrap();
        assert!(r.solved);
        assert_eq!(r.x_star.argmax(), 0);
    }

    #[test]
    fn auto_picks_fully_stubborn_closed_form() {
        let prof = StubbornnessProfile::new(vec![0.0, 0.3, 0.6]).unwrap();
        let r = solve(&star3(), &prof, &PowerVector::uniform(3), MethodChoice::Auto, Default::default()).unwrap();
        assert_eq!(r.method, Method::StarFullyStubborn);
        assert_eq!(r.uniqueness, Uniqueness::StarFullyStubbornCenter);
        assert!(r.solved);
    }

    #[test]
    fn partial_center_with_weighted_leaf_falls_back() {
        let prof = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        let r = solve(
            &star3(),
            &prof,
            &PowerVector::uniform(3),
            MethodChoice::StarPartiallyStubborn,
            Default::default(),
        )
        .unwrap();
        assert_eq!(r.method, Method::FixedPoint);
        assert!(r.solved);
    }

    #[test]
    fn conjectured_note_above_threshold() {
        let net = validate_network(&[
            vec![0.0, 0.5, 0.5],
            vec![0.3, 0.0, 0.7],
            vec![0.6, 0.4, 0.0],
        ])
        .unwrap();
        let prof = StubbornnessProfile::new(vec![0.9, 0.8, 0.7]).unwrap();
        let r = solve(&net, &prof, &PowerVector::uniform(3), MethodChoice::Auto, Default::default()).unwrap();
        assert!(!r.certificates.unique_by_contraction.holds);
        assert_eq!(r.uniqueness_note, CONJECTURED_NOTE);
        let p = multi_start_probe(&net, &prof, PROBE_STARTS, 7, Default::default()).unwrap();
        assert!(p.agree, "{p:?}");
    }

    #[test]
    fn unconverged_report_is_unsolved() {
        let prof = StubbornnessProfile::new(vec![0.1, 0.0, 0.6]).unwrap();
        let r = solve_fixed_point(&star3(), &prof, &PowerVector::vertex(3, 2), 1e-12, 1).unwrap();
        assert!(!r.solved);
        assert_eq!(r.iterations, 1);
        assert!(r.residual > 1e-10);
    }
}
