//! Random-restart hill climbing over Markov measures, maximizing a
//! partition entropy rate or `h⁻` of a cover.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::base::SymbolicBundle;
use crate::coverlat::PositionedCover;
use crate::entropy::{h_minus_estimate, h_partition_rate, htop_estimate, EntropyReport, Mode};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::Limits;

use super::MarkovMeasure;

const MAX_RESTARTS: usize = 8;
const INITIAL_STEP: f64 = 0.2;
const MIN_STEP: f64 = 1e-6;

/// What the search maximizes.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// `h_μ(T, R)` of a partition.
    Partition(&'a PositionedCover),
    /// `h⁻_μ(T, U)` of a cover.
    Cover(&'a PositionedCover, Mode),
}

impl Objective<'_> {
    fn cover(&self) -> &PositionedCover {
        match self {
            Objective::Partition(r) => r,
            Objective::Cover(u, _) => u,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximizeReport {
    pub value: f64,
    pub measure: MarkovMeasure,
    /// `h_top(T, U)` of the target.
    pub htop: EntropyReport,
    /// `h_top` estimate minus the best value found.
    pub gap: f64,
    pub evaluations: usize,
    pub best_restart: usize,
}

/// Rate of `mu` under the objective: the closed form when one exists,
/// otherwise the Fekete upper bound at `nmax`.
pub fn objective_value(
    bundle: &SymbolicBundle,
    objective: Objective<'_>,
    mu: &MarkovMeasure,
    nmax: usize,
    limits: &Limits,
) -> Result<f64> {
    let rep = match objective {
        Objective::Partition(r) => h_partition_rate(bundle, mu, r, nmax, limits)?,
        Objective::Cover(u, mode) => h_minus_estimate(bundle, mu, u, nmax, mode, limits)?,
    };
    Ok(rep.best_estimate())
}

/// Euclidean projection of `v` onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Per fiber and row, the allowed successor symbols.
fn supports(bundle: &SymbolicBundle) -> Vec<Vec<Vec<usize>>> {
    let d = bundle.alphabet_size();
    (0..bundle.omega_count())
        .map(|w| {
            let a = bundle.adjacency(w);
            (0..d)
                .map(|i| (0..d).filter(|&j| a.allows(i as u16, j as u16)).collect())
                .collect()
        })
        .collect()
}

fn assemble(d: usize, support: &[Vec<Vec<usize>>], rows: &[Vec<Vec<f64>>]) -> Vec<Matrix> {
    support
        .iter()
        .zip(rows)
        .map(|(sw, rw)| {
            sw.iter()
                .zip(rw)
                .map(|(s, r)| {
                    let mut full = vec![0.0; d];
                    for (&j, &x) in s.iter().zip(r) {
                        full[j] = x;
                    }
                    full
                })
                .collect()
        })
        .collect()
}

struct Outcome {
    value: f64,
    rows: Vec<Vec<Vec<f64>>>,
}

fn climb(
    bundle: &SymbolicBundle,
    objective: Objective<'_>,
    support: &[Vec<Vec<usize>>],
    seed: u64,
    restart: usize,
    budget: usize,
    nmax: usize,
    limits: &Limits,
) -> Outcome {
    let d = bundle.alphabet_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let eval = |rows: &[Vec<Vec<f64>>]| -> f64 {
        MarkovMeasure::new(bundle, assemble(d, support, rows))
            .and_then(|mu| objective_value(bundle, objective, &mu, nmax, limits))
            .unwrap_or(f64::NEG_INFINITY)
    };
    // restart 0 starts from uniform rows, the rest from random ones
    let mut rows: Vec<Vec<Vec<f64>>> = support
        .iter()
        .map(|sw| {
            sw.iter()
                .map(|s| {
                    let raw: Vec<f64> = if restart == 0 {
                        vec![1.0; s.len()]
                    } else {
                        s.iter().map(|_| Exp1.sample(&mut rng)).collect()
                    };
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    let mut value = eval(&rows);
    let mut step = INITIAL_STEP;
    for _ in 1..budget {
        let candidate: Vec<Vec<Vec<f64>>> = rows
            .iter()
            .map(|rw| {
                rw.iter()
                    .map(|r| {
                        if r.len() <= 1 {
                            return r.clone();
                        }
                        let moved: Vec<f64> = r
                            .iter()
                            .map(|&x| {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                x + step * z
                            })
                            .collect();
                        project_simplex(&moved)
                    })
                    .collect()
            })
            .collect();
        let v = eval(&candidate);
        if v > value {
            value = v;
            rows = candidate;
            step *= 1.5;
        } else {
            step = (step * 0.85).max(MIN_STEP);
        }
        if rng.random_bool(0.01) {
            step = INITIAL_STEP;
        }
    }
    Outcome { value, rows }
}

/// Best Markov measure found within `budget` objective evaluations.
/// Restarts use independent streams of the seeded generator, so the
/// result does not depend on thread scheduling.
pub fn maximize_partition_entropy(
    bundle: &SymbolicBundle,
    objective: Objective<'_>,
    budget: usize,
    seed: u64,
    nmax: usize,
    limits: &Limits,
) -> Result<MaximizeReport> {
    assert!(budget >= 1, "budget must be positive");
    let support = supports(bundle);
    let restarts = budget.min(MAX_RESTARTS);
    let outcomes: Vec<Outcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let share = budget / restarts + usize::from(r < budget % restarts);
            climb(bundle, objective, &support, seed, r, share, nmax, limits)
        })
        .collect();
    let (best_restart, best) = outcomes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value).then(b.0.cmp(&a.0)))
        .expect("at least one restart");
    let measure = MarkovMeasure::new(bundle, assemble(bundle.alphabet_size(), &support, &best.rows))?;
    let htop = htop_estimate(bundle, objective.cover(), nmax, limits)?;
    Ok(MaximizeReport {
        value: best.value,
        gap: htop.best_estimate() - best.value,
        measure,
        htop,
        evaluations: budget,
        best_restart,
    })
}
