#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialpower::montecarlo::{sample_instance, sample_simplex};
use socialpower::network::validate_network;
use socialpower::{InfluenceNetwork, PowerVector, StubbornnessProfile};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn net(rows: &[&[f64]]) -> InfluenceNetwork {
    validate_network(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn prof(theta: &[f64]) -> StubbornnessProfile {
    StubbornnessProfile::new(theta.to_vec()).unwrap()
}

pub fn star3() -> InfluenceNetwork {
    net(&[&[0.0, 0.2, 0.8], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]])
}

/// Doubly stochastic, non-symmetric 4-node circulant.
pub fn circulant4() -> InfluenceNetwork {
    net(&[
        &[0.0, 0.5, 0.3, 0.2],
        &[0.2, 0.0, 0.5, 0.3],
        &[0.3, 0.2, 0.0, 0.5],
        &[0.5, 0.3, 0.2, 0.0],
    ])
}

/// Dense random instance with `θ_i` uniform on `[0, cap)`.
pub fn dense_instance(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> (InfluenceNetwork, StubbornnessProfile) {
    sample_instance(rng, n, cap).unwrap()
}

/// Random instance whose rows keep a random nonempty subset of targets and
/// whose profile has a few exact zeros, so structural hypotheses occur.
pub fn sparse_instance(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> (InfluenceNetwork, StubbornnessProfile) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let keep: Vec<usize> = loop {
                let k: Vec<usize> = others.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                if !k.is_empty() {
                    break k;
                }
            };
            let w = sample_simplex(rng, keep.len());
            for (&j, &v) in keep.iter().zip(w.as_slice()) {
                row[j] = v;
            }
            row
        })
        .collect();
    let net = validate_network(&rows).unwrap();
    loop {
        let theta: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..cap) })
            .collect();
        let p = StubbornnessProfile::new(theta).unwrap();
        if p.require_standing_assumption().is_ok() {
            return (net, p);
        }
    }
}

fn star_rows(n: usize, center: usize, center_row: Vec<f64>) -> InfluenceNetwork {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if i == center {
                center_row.clone()
            } else {
                let mut r = vec![0.0; n];
                r[center] = 1.0;
                r
            }
        })
        .collect();
    validate_network(&rows).unwrap()
}

/// Star with a fully stubborn center and random leaves.
pub fn star_fully_stubborn(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> (InfluenceNetwork, StubbornnessProfile) {
    let center = rng.random_range(0..n);
    let leaves: Vec<usize> = (0..n).filter(|&j| j != center).collect();
    let w = sample_simplex(rng, leaves.len());
    let mut row = vec![0.0; n];
    for (&j, &v) in leaves.iter().zip(w.as_slice()) {
        row[j] = if rng.random_bool(0.2) && leaves.len() > 1 { 0.0 } else { v };
    }
    let s: f64 = row.iter().sum();
    if s == 0.0 {
        row[leaves[0]] = 1.0;
    } else {
        row.iter_mut().for_each(|v| *v /= s);
    }
    let net = star_rows(n, center, row);
    loop {
        let theta: Vec<f64> = (0..n)
            .map(|i| {
                if i == center || rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random_range(0.0..cap)
                }
            })
            .collect();
        let p = StubbornnessProfile::new(theta).unwrap();
        if p.require_standing_assumption().is_ok() {
            return (net, p);
        }
    }
}

/// Star with a partially stubborn center that gives weight only to fully
/// stubborn leaves.
pub fn star_partially_stubborn(rng: &mut ChaCha8Rng, n: usize, cap: f64) -> (InfluenceNetwork, StubbornnessProfile) {
    let center = rng.random_range(0..n);
    let leaves: Vec<usize> = (0..n).filter(|&j| j != center).collect();
    let fully_count = rng.random_range(1..=leaves.len());
    let mut theta = vec![0.0; n];
    theta[center] = rng.random_range(0.01..cap);
    for &j in &leaves[fully_count..] {
        theta[j] = rng.random_range(0.01..cap);
    }
    let w = sample_simplex(rng, fully_count);
    let mut row = vec![0.0; n];
    for (&j, &v) in leaves[..fully_count].iter().zip(w.as_slice()) {
        row[j] = v;
    }
    (star_rows(n, center, row), StubbornnessProfile::new(theta).unwrap())
}

/// Uniform point of the simplex pushed into the interior.
pub fn interior_point(rng: &mut ChaCha8Rng, n: usize) -> PowerVector {
    let x = sample_simplex(rng, n);
    let mixed: Vec<f64> = x.as_slice().iter().map(|v| 0.98 * v + 0.02 / n as f64).collect();
    let s: f64 = mixed.iter().sum();
    PowerVector::new(mixed.into_iter().map(|v| v / s).collect()).unwrap()
}

/// Central differences of the raw power map with step `h`.
pub fn finite_difference_jacobian(c: &DMatrix<f64>, theta: &[f64], x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[col] += h;
        xm[col] -= h;
        let fp = socialpower::dynamics::power_map(c, theta, &xp).unwrap();
        let fm = socialpower::dynamics::power_map(c, theta, &xm).unwrap();
        for row in 0..n {
            j[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    j
}

/// `2 θ_max (1 + ζ) / (n (1 - θ_max))`, written out independently.
pub fn kappa(theta: &[f64]) -> f64 {
    let n = theta.len() as f64;
    let max = theta.iter().cloned().fold(f64::MIN, f64::max);
    let min = theta.iter().cloned().fold(f64::MAX, f64::min);
    let zeta = theta.iter().sum::<f64>() - min;
    2.0 * max * (1.0 + zeta) / (n * (1.0 - max))
}

/// Bisection for a root of `f` on `[lo, hi]` with a sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
