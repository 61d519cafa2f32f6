//! Closed-form equilibria for star networks.
//!
//! In a star every edge touches the center `l`, so each leaf accords all of its
//! weight to `l` and the center spreads its weight over some of the leaves.
//! A partially stubborn leaf that receives no weight from the center then
//! solves the scalar fixed point `x = (1 - θ) / (n (1 - θ x))`, whose root in
//! `(0, 1)` is `(n - sqrt(n² - 4nθ(1-θ))) / (2nθ)`.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::f_map;
use crate::error::{Error, Result};
use crate::network::{analyze_structure, InfluenceNetwork, PowerVector, StubbornnessProfile};

/// Root in `(0, 1/n]` of `n θ x² - n x + (1 - θ) = 0`.
///
/// Evaluated as `2(1-θ) / (n + sqrt(n² - 4nθ(1-θ)))`, which is algebraically
/// equal to `(n - sqrt(..)) / (2nθ)` but has no cancellation as `θ -> 0` and
/// gives exactly `1/n` at `θ = 0`.
pub fn leaf_power(n: usize, theta: f64) -> f64 {
    center_power(n, theta, 1.0)
}

/// `(n - sqrt(n² - 4nθ(1-θ)ξ)) / (2nθ)` in cancellation-free form.
pub fn center_power(n: usize, theta: f64, xi: f64) -> f64 {
    let n = n as f64;
    let disc = (n * n - 4.0 * n * theta * (1.0 - theta) * xi).max(0.0);
    2.0 * (1.0 - theta) * xi / (n + disc.sqrt())
}

/// Auxiliary star quantities at a point `x`, for center `l`:
/// `β_i = θ_i (1 - x_i)`, `γ_i = 1 - θ_i x_i`,
/// `α = γ_l - β_l Σ_{j ∈ Vp \ {l}} C_lj β_j / γ_j` and
/// `ξ = 1 + Σ_{j ∈ Vp \ {l}} β_j / γ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarQuantities {
    pub center: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub xi: f64,
}

impl StarQuantities {
    pub fn at(
        net: &InfluenceNetwork,
        prof: &StubbornnessProfile,
        x: &PowerVector,
        center: usize,
    ) -> Result<Self> {
        let n = net.n();
        prof.check_len(n)?;
        x.check_len(n)?;
        if !analyze_structure(net).star_centers.contains(&center) {
            return Err(Error::NotStar);
        }
        let theta = prof.theta();
        let beta: Vec<f64> = (0..n).map(|i| theta[i] * (1.0 - x.get(i))).collect();
        let gamma: Vec<f64> = (0..n).map(|i| 1.0 - theta[i] * x.get(i)).collect();
        let others = || (0..n).filter(move |&j| j != center && theta[j] > 0.0);
        let alpha = gamma[center]
            - beta[center]
                * others()
                    .map(|j| net.weight(center, j) * beta[j] / gamma[j])
                    .sum::<f64>();
        let xi = 1.0 + others().map(|j| beta[j] / gamma[j]).sum::<f64>();
        Ok(Self {
            center,
            beta,
            gamma,
            alpha,
            xi,
        })
    }

    /// `F(x)` assembled from the star quantities:
    /// `F_l = ξ(1-θ_l)/(nα)`, `F_i = 1/n + ξ β_l C_li/(nα)` for fully stubborn
    /// `i`, and `F_i = (1-θ_i)/(nγ_i) · (1 + ξ β_l C_li/α)` for the other
    /// partially stubborn individuals.
    pub fn power_map(&self, net: &InfluenceNetwork, prof: &StubbornnessProfile) -> DVector<f64> {
        let n = net.n();
        let nf = n as f64;
        let l = self.center;
        let theta = prof.theta();
        DVector::from_fn(n, |i, _| {
            if i == l {
                self.xi * (1.0 - theta[l]) / (nf * self.alpha)
            } else {
                let boost = self.xi * self.beta[l] * net.weight(l, i) / self.alpha;
                if theta[i] == 0.0 {
                    (1.0 + boost) / nf
                } else {
                    (1.0 - theta[i]) / (nf * self.gamma[i]) * (1.0 + boost)
                }
            }
        })
    }
}

/// Closed-form equilibrium for a star whose center is fully stubborn.
pub(crate) fn fully_stubborn_center(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
) -> Result<(usize, PowerVector)> {
    let n = net.n();
    prof.check_len(n)?;
    let centers = analyze_structure(net).star_centers;
    let l = match centers.iter().find(|&&l| prof.get(l) == 0.0) {
        Some(&l) => l,
        None => match centers.first() {
            Some(&l) => return Err(Error::CenterNotFullyStubborn(l)),
            None => return Err(Error::NotStar),
        },
    };
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut center = 1.0 / nf;
    for i in (0..n).filter(|&i| i != l) {
        let t = prof.get(i);
        if t == 0.0 {
            x[i] = 1.0 / nf;
        } else {
            x[i] = leaf_power(n, t);
            center += t * (1.0 - x[i]) / (nf * (1.0 - t * x[i]));
        }
    }
    x[l] = center;
    Ok((l, PowerVector::from_computed(DVector::from_vec(x))?))
}

/// Closed-form equilibrium for a star with partially stubborn center that
/// accords no weight to partially stubborn leaves.
pub(crate) fn partially_stubborn_center(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
) -> Result<(usize, PowerVector)> {
    let n = net.n();
    prof.check_len(n)?;
    let centers = analyze_structure(net).star_centers;
    if centers.is_empty() {
        return Err(Error::NotStar);
    }
    let partial: Vec<usize> = centers.iter().copied().filter(|&l| prof.get(l) > 0.0).collect();
    if partial.is_empty() {
        return Err(Error::CenterFullyStubborn(centers[0]));
    }
    let blocking_leaf = |l: usize| {
        (0..n).find(|&i| i != l && prof.get(i) > 0.0 && net.weight(l, i) != 0.0)
    };
    let l = match partial.iter().copied().find(|&l| blocking_leaf(l).is_none()) {
        Some(l) => l,
        None => {
            let l = partial[0];
            let leaf = blocking_leaf(l).expect("blocking leaf exists");
            return Err(Error::PreconditionCliNonzero {
                center: l,
                leaf,
                weight: net.weight(l, leaf),
            });
        }
    };

    let nf = n as f64;
    let r = prof.r() as f64;
    let mut x = vec![0.0; n];
    let mut partial_leaf_sum = 0.0;
    for i in (0..n).filter(|&i| i != l && prof.get(i) > 0.0) {
        x[i] = leaf_power(n, prof.get(i));
        partial_leaf_sum += x[i];
    }
    let xi = nf - r - nf * partial_leaf_sum;
    x[l] = center_power(n, prof.get(l), xi);
    for i in (0..n).filter(|&i| prof.get(i) == 0.0) {
        x[i] = 1.0 / nf + (xi / nf - x[l]) * net.weight(l, i);
    }
    Ok((l, PowerVector::from_computed(DVector::from_vec(x))?))
}

/// ℓ1 residual `‖F(x) - x‖`.
pub(crate) fn residual(
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x: &PowerVector,
) -> Result<f64> {
    Ok(f_map(net, prof, x)?.l1_distance(x))
}
