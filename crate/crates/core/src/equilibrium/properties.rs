//! Structural properties every equilibrium must satisfy, checked on a
//! computed `x*`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{analyze_structure, InfluenceNetwork, PowerVector, StubbornnessProfile};

use super::star::residual;

/// Largest `‖F(x*) - x*‖₁` accepted as an equilibrium.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;
/// Tolerance for claimed equalities.
pub const EQUALITY_TOL: f64 = 1e-9;
/// Strict inequalities pass when the margin exceeds `-STRICT_SLACK`.
pub const STRICT_SLACK: f64 = 1e-12;

/// Outcome of one claim, aggregated over every index (or pair of indices)
/// its hypothesis applies to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    /// Number of indices or pairs the hypothesis held for.
    pub applicable: usize,
    pub holds: bool,
    /// Smallest margin observed (positive means satisfied with room).
    pub worst_margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub residual: f64,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    /// margin > -STRICT_SLACK
    Strict,
    /// margin is `-|deviation|`, passes when >= -EQUALITY_TOL
    Equality,
}

struct Claim {
    name: &'static str,
    kind: Kind,
    applicable: usize,
    worst: f64,
    worst_at: String,
}

impl Claim {
    fn new(name: &'static str, kind: Kind) -> Self {
        Self {
            name,
            kind,
            applicable: 0,
            worst: f64::INFINITY,
            worst_at: String::new(),
        }
    }

    fn record(&mut self, margin: f64, at: impl FnOnce() -> String) {
        self.applicable += 1;
        if margin < self.worst {
            self.worst = margin;
            self.worst_at = at();
        }
    }

    fn finish(self) -> PropertyCheck {
        let holds = match self.kind {
            _ if self.applicable == 0 => true,
            Kind::Strict => self.worst > -STRICT_SLACK,
            Kind::Equality => self.worst >= -EQUALITY_TOL,
        };
        let detail = if self.applicable == 0 {
            "hypothesis not met".to_string()
        } else {
            format!("worst margin {:.3e} at {}", self.worst, self.worst_at)
        };
        PropertyCheck {
            name: self.name,
            applicable: self.applicable,
            holds,
            worst_margin: if self.applicable == 0 { 0.0 } else { self.worst },
            detail,
        }
    }
}

/// Evaluates every claim whose hypothesis holds for this instance:
///
/// * `interior`, `no-autocracy`, `max-below-uniform-plus-mean-theta`;
/// * fully stubborn individuals sit at `1/n` exactly when no partially
///   stubborn individual accords them weight, and above `1/n` otherwise;
/// * partially stubborn individuals sit above `(1-θ_i)/n`, and below `1/n`
///   when nobody partially stubborn accords them weight;
/// * orderings for equal incoming weights and for symmetric `C`;
/// * orderings for stars whose center is partially stubborn.
pub fn equilibrium_properties_check(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x_star: &PowerVector,
) -> Result<PropertyReport> {
    let n = net.n();
    prof.check_len(n)?;
    x_star.check_len(n)?;
    let res = residual(net, prof, x_star)?;
    if !(res < EQUILIBRIUM_RESIDUAL_TOL) {
        return Err(Error::StaleEquilibrium(res));
    }

    let nf = n as f64;
    let x = |i: usize| x_star.get(i);
    let th = |i: usize| prof.get(i);
    let c = |i: usize, j: usize| net.weight(i, j);
    let vf = prof.fully_stubborn();
    let vp = prof.partially_stubborn();
    let mut checks = Vec::new();

    let mut interior = Claim::new("interior", Kind::Strict);
    let (imin, min) = (0..n).map(|i| (i, x(i))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    interior.record(min, || format!("x[{imin}]"));
    checks.push(interior.finish());

    let mut autocracy = Claim::new("no-autocracy", Kind::Strict);
    autocracy.record(1.0 - x_star.max(), || format!("x[{}]", x_star.argmax()));
    checks.push(autocracy.finish());

    let mut cap = Claim::new("max-below-uniform-plus-mean-theta", Kind::Strict);
    cap.record(1.0 / nf + prof.theta_ave() - x_star.max(), || format!("x[{}]", x_star.argmax()));
    checks.push(cap.finish());

    let uninfluenced = |i: usize| vp.iter().all(|&j| c(j, i) == 0.0);

    let mut f_eq = Claim::new("fully-stubborn-uninfluenced-at-uniform", Kind::Equality);
    let mut f_gt = Claim::new("fully-stubborn-influenced-above-uniform", Kind::Strict);
    for &i in &vf {
        if uninfluenced(i) {
            f_eq.record(-(x(i) - 1.0 / nf).abs(), || format!("x[{i}]"));
        } else {
            f_gt.record(x(i) - 1.0 / nf, || format!("x[{i}]"));
        }
    }
    checks.push(f_eq.finish());
    checks.push(f_gt.finish());

    let mut p_floor = Claim::new("partially-stubborn-above-floor", Kind::Strict);
    let mut p_below = Claim::new("partially-stubborn-uninfluenced-below-uniform", Kind::Strict);
    for &i in &vp {
        p_floor.record(x(i) - (1.0 - th(i)) / nf, || format!("x[{i}]"));
        if uninfluenced(i) {
            p_below.record(1.0 / nf - x(i), || format!("x[{i}]"));
        }
    }
    checks.push(p_floor.finish());
    checks.push(p_below.finish());

    // equal weights from partially stubborn individuals: fully beats partially
    let mut ord_fp = Claim::new("ordering-fully-over-partially-equal-weights", Kind::Strict);
    for &i in &vf {
        for &j in &vp {
            if vp.iter().filter(|&&k| k != j).all(|&k| c(k, i) == c(k, j)) {
                ord_fp.record(x(i) - x(j), || format!("({i}, {j})"));
            }
        }
    }
    checks.push(ord_fp.finish());

    // partially stubborn pair with matching weights: more susceptible has less power
    let mut ord_pp = Claim::new("ordering-partially-equal-weights-by-theta", Kind::Strict);
    for &i in &vp {
        for &j in &vp {
            if i == j || th(i) <= th(j) || c(i, j) != c(j, i) {
                continue;
            }
            if vp.iter().filter(|&&k| k != i && k != j).all(|&k| c(k, i) == c(k, j)) {
                ord_pp.record(x(j) - x(i), || format!("({i}, {j})"));
            }
        }
    }
    checks.push(ord_pp.finish());

    let mut ord_sym = Claim::new("ordering-symmetric-by-theta", Kind::Strict);
    if net.is_symmetric() {
        for i in 0..n {
            for j in 0..n {
                if th(i) > th(j) {
                    ord_sym.record(x(j) - x(i), || format!("({i}, {j})"));
                }
            }
        }
    }
    checks.push(ord_sym.finish());

    let structure = analyze_structure(net);
    let mut s1 = Claim::new("star-ordering-fully-by-center-weight", Kind::Strict);
    let mut s2 = Claim::new("star-ordering-fully-over-partially-equal-center-weight", Kind::Strict);
    let mut s3 = Claim::new("star-ordering-partially-equal-center-weight-by-theta", Kind::Strict);
    let mut s4 = Claim::new("star-ordering-partially-equal-theta-by-center-weight", Kind::Strict);
    for &l in structure.star_centers.iter().filter(|&&l| th(l) > 0.0) {
        let leaves_p: Vec<usize> = vp.iter().copied().filter(|&j| j != l).collect();
        for &i in &vf {
            for &j in &vf {
                if c(l, i) > c(l, j) {
                    s1.record(x(i) - x(j), || format!("center {l}, ({i}, {j})"));
                }
            }
            for &j in &leaves_p {
                if c(l, i) == c(l, j) {
                    s2.record(x(i) - x(j), || format!("center {l}, ({i}, {j})"));
                }
            }
        }
        for &i in &leaves_p {
            for &j in &leaves_p {
                if i == j {
                    continue;
                }
                if c(l, i) == c(l, j) && th(i) < th(j) {
                    s3.record(x(i) - x(j), || format!("center {l}, ({i}, {j})"));
                }
                if th(i) == th(j) && c(l, i) > c(l, j) {
                    s4.record(x(i) - x(j), || format!("center {l}, ({i}, {j})"));
                }
            }
        }
    }
    checks.extend([s1.finish(), s2.finish(), s3.finish(), s4.finish()]);

    Ok(PropertyReport { residual: res, checks })
}

/// Residual of the equilibrium equations split by stubbornness class.
///
/// With `u_j = θ_j x_j / (1 - θ_j)` the fully stubborn block reads
/// `x_f = 1/n + C_pfᵀ (I - diag x_p) u_p`, and the partially stubborn block
/// `(I - C_pᵀ Θ_p)(I - Θ_p)^{-1} x_p = 1/n + (I - C_pᵀ) diag(x_p) u_p`.
/// Returns the larger of the two ℓ1 residuals.
pub fn block_equation_residual(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x_star: &PowerVector,
) -> Result<f64> {
    let n = net.n();
    prof.check_len(n)?;
    x_star.check_len(n)?;
    if prof.theta().iter().any(|&t| t >= 1.0) {
        return Err(Error::SingularSystem("I - Θ"));
    }
    let nf = n as f64;
    let vf = prof.fully_stubborn();
    let vp = prof.partially_stubborn();
    let x = |i: usize| x_star.get(i);
    let th = |i: usize| prof.get(i);
    let u = |j: usize| th(j) * x(j) / (1.0 - th(j));

    let fully: f64 = vf
        .iter()
        .map(|&i| {
            let rhs = 1.0 / nf
                + vp.iter()
                    .map(|&j| net.weight(j, i) * (1.0 - x(j)) * u(j))
                    .sum::<f64>();
            (x(i) - rhs).abs()
        })
        .sum();

    let partial: f64 = vp
        .iter()
        .map(|&i| {
            let lhs = x(i) / (1.0 - th(i))
                - vp.iter()
                    .map(|&k| net.weight(k, i) * th(k) * x(k) / (1.0 - th(k)))
                    .sum::<f64>();
            let rhs = 1.0 / nf + x(i) * u(i)
                - vp.iter()
                    .map(|&k| net.weight(k, i) * x(k) * u(k))
                    .sum::<f64>();
            (lhs - rhs).abs()
        })
        .sum();

    Ok(fully.max(partial))
}
