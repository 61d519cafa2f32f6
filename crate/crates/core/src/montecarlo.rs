//! Randomized uniqueness experiments.
//!
//! For each sampled pair `(C, θ)` one random start yields a reference limit;
//! further random starts are run to convergence and compared to it in ℓ1.
//! Chernoff's bound sizes the number of samples: with
//! `N >= ln(2/η) / (2ε²)` draws, the empirical frequency is within `ε` of the
//! true probability with confidence `1 - η`.
//!
//! Randomness comes from ChaCha8 with one stream per experiment cell, so
//! results are bit-identical for a given seed whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{iterate_issue_sequence, iterate_single_issue, DEFAULT_TOL, OUTER_MAX_ITER};
use crate::error::{Error, Result};
use crate::network::{validate_network, InfluenceNetwork, PowerVector, StubbornnessProfile};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SOCIALPOWER_THREADS";
/// Default ℓ1 radius for "same equilibrium".
pub const DEFAULT_MATCH_TOL: f64 = 1e-8;
/// Slack for the bound checks on recorded limits.
pub const LIMIT_BOUND_SLACK: f64 = 1e-9;

/// `ceil(ln(2/η) / (2ε²))`.
pub fn chernoff_sample_size(epsilon: f64, eta: f64) -> Result<u64> {
    for (name, v) in [("epsilon", epsilon), ("eta", eta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::OutOfRange {
                name,
                value: v,
                range: "(0, 1)",
            });
        }
    }
    Ok(((2.0 / eta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64)
}

/// Accuracy `epsilon`, miss probability `eta` and the sample count they need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffPlan {
    pub epsilon: f64,
    pub eta: f64,
    pub samples: u64,
}

impl ChernoffPlan {
    pub fn new(epsilon: f64, eta: f64) -> Result<Self> {
        Ok(Self {
            epsilon,
            eta,
            samples: chernoff_sample_size(epsilon, eta)?,
        })
    }
}

/// Uniform point of the simplex: normalized standard exponentials.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PowerVector {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    PowerVector::new(e.into_iter().map(|v| v / s).collect())
        .expect("normalized exponentials lie on the simplex")
}

/// Random network and profile.
///
/// Each row of `C` spreads its weight uniformly at random over the other
/// `n - 1` individuals, and each `θ_i` is uniform on `[0, theta_max_cap)`.
/// Profiles with every `θ_i = 0` are redrawn.
pub fn sample_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    theta_max_cap: f64,
) -> Result<(InfluenceNetwork, StubbornnessProfile)> {
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    if !(theta_max_cap > 0.0 && theta_max_cap <= 1.0) {
        return Err(Error::OutOfRange {
            name: "theta_max_cap",
            value: theta_max_cap,
            range: "(0, 1]",
        });
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let off = sample_simplex(rng, n - 1);
            let mut row = off.to_vec();
            row.insert(i, 0.0);
            row
        })
        .collect();
    let net = validate_network(&rows)?;
    loop {
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..theta_max_cap)).collect();
        let prof = StubbornnessProfile::new(theta)?;
        if prof.require_standing_assumption().is_ok() {
            return Ok((net, prof));
        }
    }
}

/// Which dynamics the experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    #[default]
    Issues,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub pairs: usize,
    pub inits: usize,
    pub n: usize,
    pub seed: u64,
    /// ℓ1 match radius.
    pub tolerance: f64,
    pub theta_max_cap: f64,
    pub model: Model,
    /// Stopping tolerance of each run.
    pub solver_tol: f64,
    pub max_steps: usize,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(pairs: usize, inits: usize, n: usize, seed: u64) -> Self {
        Self {
            pairs,
            inits,
            n,
            seed,
            tolerance: DEFAULT_MATCH_TOL,
            theta_max_cap: 1.0,
            model: Model::Issues,
            solver_tol: DEFAULT_TOL,
            max_steps: OUTER_MAX_ITER,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub pair: usize,
    pub c: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub reference_x_star: PowerVector,
    pub mismatch_count: usize,
    /// Largest ℓ1 distance from any limit to the reference.
    pub max_spread: f64,
    /// `(inits - mismatches) / inits`.
    pub empirical_probability: f64,
    /// Every limit satisfies the equilibrium power bounds.
    pub bounds_hold: bool,
}

/// A run that hit `max_steps`. `init` is `None` for the reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonConvergentCell {
    pub pair: usize,
    pub init: Option<usize>,
    pub last_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessExperiment {
    pub seed: u64,
    pub n: usize,
    pub pair_count: usize,
    pub init_count: usize,
    pub tolerance: f64,
    pub theta_max_cap: f64,
    pub model: Model,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<ChernoffPlan>,
    pub results: Vec<PairRecord>,
    pub total_mismatches: usize,
    /// Fraction of pairs whose starts all matched the reference.
    pub empirical_probability: f64,
    pub non_convergent: Vec<NonConvergentCell>,
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

// Stream layout: pair p owns streams p * (inits + 2) + k with k = 0 for the
// instance, 1 for the reference start and 2 + i for start i.
fn cell_rng(seed: u64, inits: usize, pair: usize, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((pair as u64) * (inits as u64 + 2) + k as u64);
    rng
}

struct Limit {
    x: PowerVector,
    converged: bool,
    change: f64,
}

fn run_model(
    cfg: &ExperimentConfig,
    net: &InfluenceNetwork,
    prof: &StubbornnessProfile,
    x0: &PowerVector,
) -> Result<Limit> {
    let t = match cfg.model {
        Model::Issues => iterate_issue_sequence(net, prof, x0, cfg.max_steps, cfg.solver_tol)?,
        Model::Single => iterate_single_issue(net, prof, x0, cfg.max_steps, cfg.solver_tol)?.trajectory,
    };
    Ok(Limit {
        x: t.last().clone(),
        converged: t.converged,
        change: t.final_residual,
    })
}

fn within_bounds(prof: &StubbornnessProfile, x: &PowerVector) -> bool {
    let n = prof.n() as f64;
    let hi = (1.0 + prof.zeta()) / n + LIMIT_BOUND_SLACK;
    let cap = 1.0 / n + prof.theta_ave();
    x.min() > 0.0
        && x.max() < cap
        && (0..prof.n()).all(|i| {
            let v = x.get(i);
            v >= (1.0 - prof.get(i)) / n - LIMIT_BOUND_SLACK && v <= hi
        })
}

/// Runs the experiment described by `cfg`, in parallel over cells.
pub fn run_uniqueness_experiment(cfg: &ExperimentConfig) -> Result<UniquenessExperiment> {
    if cfg.pairs == 0 || cfg.inits == 0 {
        return Err(Error::OutOfRange {
            name: if cfg.pairs == 0 { "pairs" } else { "inits" },
            value: 0.0,
            range: ">= 1",
        });
    }
    if !(cfg.tolerance >= 0.0) {
        return Err(Error::OutOfRange {
            name: "tolerance",
            value: cfg.tolerance,
            range: ">= 0",
        });
    }
    let threads = cfg.threads.or_else(threads_from_env).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| run_cells(cfg))
}

fn run_cells(cfg: &ExperimentConfig) -> Result<UniquenessExperiment> {
    let inits = cfg.inits;
    let references: Vec<(InfluenceNetwork, StubbornnessProfile, Limit)> = (0..cfg.pairs)
        .into_par_iter()
        .map(|p| {
            let (net, prof) = sample_instance(&mut cell_rng(cfg.seed, inits, p, 0), cfg.n, cfg.theta_max_cap)?;
            let x0 = sample_simplex(&mut cell_rng(cfg.seed, inits, p, 1), cfg.n);
            let limit = run_model(cfg, &net, &prof, &x0)?;
            Ok((net, prof, limit))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<Limit> = (0..cfg.pairs * inits)
        .into_par_iter()
        .map(|cell| {
            let (p, i) = (cell / inits, cell % inits);
            let (net, prof, _) = &references[p];
            let x0 = sample_simplex(&mut cell_rng(cfg.seed, inits, p, 2 + i), cfg.n);
            run_model(cfg, net, prof, &x0)
        })
        .collect::<Result<_>>()?;

    let mut non_convergent = Vec::new();
    let mut results = Vec::with_capacity(cfg.pairs);
    for (p, (net, prof, reference)) in references.iter().enumerate() {
        if !reference.converged {
            non_convergent.push(NonConvergentCell {
                pair: p,
                init: None,
                last_change: reference.change,
            });
        }
        let mut mismatch_count = 0;
        let mut max_spread = 0.0f64;
        let mut bounds_hold = within_bounds(prof, &reference.x);
        for (i, limit) in cells[p * inits..(p + 1) * inits].iter().enumerate() {
            if !limit.converged {
                non_convergent.push(NonConvergentCell {
                    pair: p,
                    init: Some(i),
                    last_change: limit.change,
                });
            }
            let d = limit.x.l1_distance(&reference.x);
            max_spread = max_spread.max(d);
            if d > cfg.tolerance {
                mismatch_count += 1;
            }
            bounds_hold &= within_bounds(prof, &limit.x);
        }
        results.push(PairRecord {
            pair: p,
            c: net.to_rows(),
            theta: prof.theta().to_vec(),
            reference_x_star: reference.x.clone(),
            mismatch_count,
            max_spread,
            empirical_probability: (inits - mismatch_count) as f64 / inits as f64,
            bounds_hold,
        });
    }
    let total_mismatches = results.iter().map(|r| r.mismatch_count).sum();
    let clean = results.iter().filter(|r| r.mismatch_count == 0).count();
    Ok(UniquenessExperiment {
        seed: cfg.seed,
        n: cfg.n,
        pair_count: cfg.pairs,
        init_count: inits,
        tolerance: cfg.tolerance,
        theta_max_cap: cfg.theta_max_cap,
        model: cfg.model,
        plan: None,
        results,
        total_mismatches,
        empirical_probability: clean as f64 / cfg.pairs as f64,
        non_convergent,
    })
}
