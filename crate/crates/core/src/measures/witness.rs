//! Separated-set measures whose Cesàro averages carry at least the
//! topological cover entropy.
//!
//! For a product-form cover `U` with `d` elements and a step `n`:
//! `C_n(ω)` is a maximal multi-separated set for the first `min(n, ·)`
//! refining partitions pulled back by `n`, over `n²` steps; `ν_n` is
//! uniform on `C_n(ω)` and `μ_n` averages `Θ^i ν_n` for `i < n² + n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::base::{Block, Symbol, SymbolicBundle, Window};
use crate::covercomb::{cover_count, maximal_multi_separated, SeparatedSet};
use crate::coverlat::{product_partitions_finer, pullback, range_join, PositionedCover};
use crate::entropy::{cond_entropy_partition, fiber_partition_entropies};
use crate::error::{Error, Result};
use crate::Limits;

use super::{mix, WordMeasure};

const CHAIN_TOL: f64 = 1e-9;

/// A chain `values[0] ≥ values[1] ≥ …` that should hold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub what: &'static str,
    pub omega: Option<usize>,
    pub i: Option<usize>,
    pub l: usize,
    pub m: Option<usize>,
    pub values: Vec<f64>,
    pub holds: bool,
}

impl BoundCheck {
    fn new(what: &'static str, omega: Option<usize>, i: Option<usize>, l: usize, m: Option<usize>, values: Vec<f64>) -> Self {
        let holds = values
            .windows(2)
            .all(|w| w[1] == f64::NEG_INFINITY || w[0] >= w[1] - CHAIN_TOL);
        BoundCheck {
            what,
            omega,
            i,
            l,
            m,
            values,
            holds,
        }
    }

    /// Smallest slack along the chain (infinite slack for `−∞` targets).
    pub fn margin(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| if w[1] == f64::NEG_INFINITY { f64::INFINITY } else { w[0] - w[1] })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub n: usize,
    /// Number of refining partitions used.
    pub k: usize,
    /// Number of cover elements.
    pub d: usize,
    pub horizon: usize,
    pub separated: Vec<SeparatedSet>,
    /// `C_n(ω)` extended to `[0, horizon)`.
    pub support: Vec<Vec<Block>>,
    /// `N(T, ω, U, n² + n)`.
    pub full_counts: Vec<usize>,
    pub nu: WordMeasure,
    pub mu: WordMeasure,
    /// Per fiber, shift `i` and partition `l`:
    /// `H_{ν_ω}(Θ^{-i} (R_l)_0^{n²+n-1}) ≥ ln⌊N'/n⌋ ≥ ln⌊N/(n dⁿ)⌋`.
    pub fiber_checks: Vec<BoundCheck>,
    /// The same after integrating over `P`.
    pub integrated_checks: Vec<BoundCheck>,
    /// `H_{μ_n}((R_l)_0^{m-1}) ≥ average ≥ m/(n²+n) (∫ ln⌊N/(n dⁿ)⌋ − m ln d)`.
    pub concavity_checks: Vec<BoundCheck>,
    /// Largest gap between the pulled-back partition entropy of `ν_n` and
    /// the partition entropy of the pushed-forward measure.
    pub shift_identity_gap: f64,
}

impl WitnessReport {
    pub fn all_hold(&self) -> bool {
        self.fiber_checks
            .iter()
            .chain(&self.integrated_checks)
            .chain(&self.concavity_checks)
            .all(|c| c.holds)
    }
}

fn ln_floor(num: usize, den: f64) -> f64 {
    ((num as f64 / den).floor()).ln()
}

/// Lexicographically first admissible extension of `word` (placed on
/// `window`) to `[0, horizon)`.
fn extend(bundle: &SymbolicBundle, omega: usize, word: &[Symbol], window: Window, horizon: usize) -> Block {
    let mut out = if window.start == 0 {
        Vec::new()
    } else {
        let step = bundle.step(omega, window.start - 1);
        bundle
            .admissible_blocks(omega, Window::new(0, window.start))
            .into_iter()
            .find(|b| step.allows(*b.last().expect("nonempty"), word[0]))
            .expect("every symbol has a predecessor")
    };
    out.extend_from_slice(word);
    while out.len() < horizon {
        let step = bundle.step(omega, out.len() - 1);
        let last = *out.last().expect("nonempty");
        let next = (0..bundle.alphabet_size() as Symbol)
            .find(|&b| step.allows(last, b))
            .expect("every symbol has a successor");
        out.push(next);
    }
    out
}

pub fn misiurewicz_witness(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    n: usize,
    limits: &Limits,
) -> Result<WitnessReport> {
    assert!(n >= 1, "misiurewicz_witness needs n >= 1");
    if !u.is_product_form() {
        return Err(Error::NotProductForm);
    }
    let w = u.window().start + u.window().len;
    let steps = n * n + n;
    let horizon = steps + n + w - 1;
    if horizon > limits.horizon_max {
        return Err(Error::SizeGuard {
            what: "horizon",
            size: horizon as u128,
            limit: limits.horizon_max as u128,
        });
    }
    let partitions: Vec<PositionedCover> = product_partitions_finer(bundle, u)?.take(n).collect();
    if partitions.is_empty() {
        return Err(Error::EmptyPartitionList);
    }
    let k = partitions.len();
    let d = u.len();
    let omegas = bundle.omega_count();

    let shifted_u = pullback(bundle, u, n);
    let shifted_r: Vec<PositionedCover> = partitions.iter().map(|r| pullback(bundle, r, n)).collect();
    let separated: Vec<SeparatedSet> = (0..omegas)
        .into_par_iter()
        .map(|om| maximal_multi_separated(bundle, om, &shifted_r, &shifted_u, n * n, limits))
        .collect::<Result<_>>()?;
    let support: Vec<Vec<Block>> = separated
        .iter()
        .map(|s| {
            s.words
                .iter()
                .map(|word| extend(bundle, s.omega, word, s.window, horizon))
                .collect()
        })
        .collect();
    let nu = WordMeasure::uniform(bundle, horizon, &support)?;
    let full_counts: Vec<usize> = (0..omegas)
        .into_par_iter()
        .map(|om| cover_count(bundle, om, u, steps, limits))
        .collect::<Result<_>>()?;

    let scale = n as f64 * (d as f64).powi(n as i32);
    let full_bound: Vec<f64> = full_counts.iter().map(|&c| ln_floor(c, scale)).collect();
    let integrated_bound: f64 = full_bound
        .iter()
        .enumerate()
        .map(|(om, &x)| bundle.base().weight(om) * x)
        .sum();

    let joined: Vec<PositionedCover> = partitions
        .iter()
        .map(|r| range_join(bundle, r, 0, steps - 1, limits))
        .collect::<Result<_>>()?;
    // Θ^i ν_n for i = 0..steps
    let mut pushed = Vec::with_capacity(steps);
    pushed.push(nu.clone());
    for i in 1..steps {
        let next = pushed[i - 1].pushforward(bundle)?;
        pushed.push(next);
    }

    let mut fiber_checks = Vec::new();
    let mut integrated_checks = Vec::new();
    let mut shift_identity_gap: f64 = 0.0;
    for i in 1..=n {
        for (l, jr) in joined.iter().enumerate() {
            let shifted = pullback(bundle, jr, i);
            let per = fiber_partition_entropies(bundle, &nu, &shifted)?;
            for (om, &h) in per.iter().enumerate() {
                let mid = ln_floor(separated[om].cover_count, n as f64);
                fiber_checks.push(BoundCheck::new("fiber", Some(om), Some(i), l, None, vec![h, mid, full_bound[om]]));
            }
            let via_pullback = crate::entropy::weighted(bundle, &per);
            let via_push = cond_entropy_partition(bundle, &pushed[i], jr)?;
            shift_identity_gap = shift_identity_gap.max((via_pullback - via_push).abs());
            integrated_checks.push(BoundCheck::new("integrated", None, Some(i), l, None, vec![via_push, integrated_bound]));
        }
    }

    let common = horizon - (steps - 1);
    let truncated: Vec<WordMeasure> = pushed.iter().map(|p| p.truncate(common)).collect::<Result<_>>()?;
    let mu = mix(&truncated, &vec![1.0 / steps as f64; steps])?;
    let mut concavity_checks = Vec::new();
    for m in 1..=n {
        for (l, r) in partitions.iter().enumerate() {
            let rm = range_join(bundle, r, 0, m - 1, limits)?;
            let at_mu = cond_entropy_partition(bundle, &mu, &rm)?;
            let average = truncated
                .iter()
                .map(|t| cond_entropy_partition(bundle, t, &rm))
                .sum::<Result<f64>>()?
                / steps as f64;
            let bound = m as f64 / steps as f64 * (integrated_bound - m as f64 * (d as f64).ln());
            concavity_checks.push(BoundCheck::new("concavity", None, None, l, Some(m), vec![at_mu, average, bound]));
        }
    }

    Ok(WitnessReport {
        n,
        k,
        d,
        horizon,
        separated,
        support,
        full_counts,
        nu,
        mu,
        fiber_checks,
        integrated_checks,
        concavity_checks,
        shift_identity_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::fixtures::*;

    #[test]
    fn gm2_first_step() {
        let b = gm2();
        let z = PositionedCover::zero_cylinders(&b);
        let r = misiurewicz_witness(&b, &z, 1, &Limits::default()).unwrap();
        assert_eq!(r.k, 1);
        for s in &r.separated {
            assert_eq!(s.words.len(), 2);
            assert!(s.words.len() >= s.cover_count);
        }
        assert!(r.all_hold());
    }

    #[test]
    fn gm2_second_step() {
        let b = gm2();
        let z = PositionedCover::zero_cylinders(&b);
        let r = misiurewicz_witness(&b, &z, 2, &Limits::default()).unwrap();
        assert_eq!(r.horizon, 8);
        assert_eq!(r.full_counts, vec![36, 27]);
        assert!(r.all_hold());
        assert!(r.shift_identity_gap < 1e-12);
        assert_eq!(r.concavity_checks.len(), 2);
        for c in &r.fiber_checks {
            let om = c.omega.unwrap();
            let want = [4.0f64.ln(), 3.0f64.ln()][om];
            assert!((c.values[2] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_fibers_stay_on_fixed_points() {
        let b = id2();
        let z = PositionedCover::zero_cylinders(&b);
        let r = misiurewicz_witness(&b, &z, 2, &Limits::default()).unwrap();
        assert_eq!(r.mu.fiber(0).len(), 2);
        assert!(r.mu.fiber(0).keys().all(|w| w.iter().all(|&s| s == w[0])));
        assert!(r.all_hold());
    }
}
