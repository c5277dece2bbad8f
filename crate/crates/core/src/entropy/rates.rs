//! Measure-theoretic cover entropies `h⁻`, `h⁺` and partition entropy rates.

use rayon::prelude::*;
use serde::Serialize;

use crate::base::SymbolicBundle;
use crate::coverlat::{product_partitions_finer, range_join_prefixes, PositionedCover};
use crate::error::{Error, Result};
use crate::measures::MarkovMeasure;
use crate::Limits;

use super::topological::refines_leading_symbol;
use super::{cond_entropy_partition, cover_cond_entropy, EntropyReport, Mode};

const INVARIANCE_TOL: f64 = 1e-12;

fn require_invariant(bundle: &SymbolicBundle, mu: &MarkovMeasure) -> Result<()> {
    let r = mu.invariance_residual(bundle);
    if r > INVARIANCE_TOL {
        return Err(Error::NotInvariant(r));
    }
    Ok(())
}

fn closed_form(bundle: &SymbolicBundle, mu: &MarkovMeasure, u: &PositionedCover, methods: &mut Vec<String>) -> Option<f64> {
    if u.has_full_element(bundle) {
        methods.push("full-element".into());
        Some(0.0)
    } else if refines_leading_symbol(u) {
        methods.push("chain-rule".into());
        Some(mu.chain_rule_rate(bundle))
    } else {
        None
    }
}

/// `(1/n) H_μ(R_0^{n-1} | F_E)` for `n ≤ nmax`, plus the chain-rule rate
/// when `R` refines the leading symbol of its window.
pub fn h_partition_rate(
    bundle: &SymbolicBundle,
    mu: &MarkovMeasure,
    r: &PositionedCover,
    nmax: usize,
    limits: &Limits,
) -> Result<EntropyReport> {
    assert!(nmax >= 1, "h_partition_rate needs nmax >= 1");
    require_invariant(bundle, mu)?;
    if !r.is_partition() {
        return Err(Error::NotPartition("entropy-rate argument".into()));
    }
    let values: Vec<f64> = range_join_prefixes(bundle, r, nmax, limits)?
        .iter()
        .map(|joined| cond_entropy_partition(bundle, mu, joined))
        .collect::<Result<_>>()?;
    let mut methods = vec!["fekete".to_string()];
    let exact = closed_form(bundle, mu, r, &mut methods);
    Ok(EntropyReport::from_values(&values, exact, methods))
}

/// `(1/n) H_μ(U_0^{n-1} | F_E)` for `n ≤ nmax`; the running minimum bounds
/// `h⁻` from above.
pub fn h_minus_estimate(
    bundle: &SymbolicBundle,
    mu: &MarkovMeasure,
    u: &PositionedCover,
    nmax: usize,
    mode: Mode,
    limits: &Limits,
) -> Result<EntropyReport> {
    assert!(nmax >= 1, "h_minus_estimate needs nmax >= 1");
    require_invariant(bundle, mu)?;
    let values: Vec<f64> = range_join_prefixes(bundle, u, nmax, limits)?
        .iter()
        .map(|joined| cover_cond_entropy(bundle, mu, joined, mode, limits))
        .collect::<Result<_>>()?;
    let mut methods = vec!["fekete".to_string()];
    let exact = closed_form(bundle, mu, u, &mut methods);
    Ok(EntropyReport::from_values(&values, exact, methods))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HPlusReport {
    /// Smallest certified upper bound over the refining partitions.
    pub value: f64,
    pub argmin_index: usize,
    pub argmin: PositionedCover,
    /// Certified upper bound of every candidate, in enumeration order.
    pub candidates: Vec<f64>,
}

/// Minimum of `h_partition_rate` upper bounds over the product-form
/// partitions finer than `U`.
pub fn h_plus_estimate(
    bundle: &SymbolicBundle,
    mu: &MarkovMeasure,
    u: &PositionedCover,
    nmax: usize,
    limits: &Limits,
) -> Result<HPlusReport> {
    require_invariant(bundle, mu)?;
    let parts = product_partitions_finer(bundle, u)?;
    let total = parts.total();
    let take = limits.enum_max.min(total) as usize;
    let candidates: Vec<PositionedCover> = parts.take(take).collect();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|r| h_partition_rate(bundle, mu, r, nmax, limits).map(|rep| rep.certified_upper))
        .collect::<Result<_>>()?;
    let (argmin_index, &value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("at least one refinement");
    if total > limits.enum_max {
        return Err(Error::EnumerationGuard {
            count: total,
            limit: limits.enum_max,
            partial_min: Some(value),
        });
    }
    Ok(HPlusReport {
        value,
        argmin_index,
        argmin: candidates[argmin_index].clone(),
        candidates: values,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::base::fixtures::*;
    use crate::base::Window;
    use crate::measures::fixtures::*;

    const CHAIN_RATE: f64 = 0.5198603854199589;

    #[test]
    fn gm2_partition_rate() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let z = PositionedCover::zero_cylinders(&b);
        let r = h_partition_rate(&b, &mu, &z, 8, &Limits::default()).unwrap();
        assert!((r.exact_rate.unwrap() - CHAIN_RATE).abs() < 1e-12);
        assert!(r.sequence.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert!(r.certified_upper >= CHAIN_RATE - 1e-12);
        let m = h_minus_estimate(&b, &mu, &z, 8, Mode::General, &Limits::default()).unwrap();
        for (a, b) in m.sequence.iter().zip(&r.sequence) {
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn full_shift_and_deterministic_chain() {
        let f = full2();
        let mu = MarkovMeasure::new(&f, vec![vec![vec![0.5, 0.5]; 2]]).unwrap();
        let z = PositionedCover::zero_cylinders(&f);
        let r = h_partition_rate(&f, &mu, &z, 4, &Limits::default()).unwrap();
        assert!((r.exact_rate.unwrap() - 2f64.ln()).abs() < 1e-12);
        let i = id2();
        let mu = MarkovMeasure::new(&i, vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
        let z = PositionedCover::zero_cylinders(&i);
        let r = h_minus_estimate(&i, &mu, &z, 4, Mode::General, &Limits::default()).unwrap();
        assert_eq!(r.exact_rate, Some(0.0));
    }

    #[test]
    fn non_invariant_measure_is_rejected() {
        let b = gm2();
        let mu = MarkovMeasure::with_starts(&b, gm2_q(), vec![vec![0.5, 0.5]; 2]).unwrap();
        let z = PositionedCover::zero_cylinders(&b);
        assert!(matches!(
            h_minus_estimate(&b, &mu, &z, 2, Mode::General, &Limits::default()),
            Err(Error::NotInvariant(_))
        ));
    }

    #[test]
    fn h_plus_over_two_refinements() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let s = |ws: &[&[u16]]| ws.iter().map(|w| w.to_vec()).collect::<BTreeSet<_>>();
        let u = PositionedCover::product(&b, Window::new(0, 1), vec![s(&[&[0], &[1]]), s(&[&[1]])]).unwrap();
        let hp = h_plus_estimate(&b, &mu, &u, 4, &Limits::default()).unwrap();
        assert_eq!(hp.candidates.len(), 2);
        assert_eq!(hp.value, 0.0);
        assert_eq!(hp.argmin_index, 0);
        let hm = h_minus_estimate(&b, &mu, &u, 4, Mode::General, &Limits::default()).unwrap();
        assert!(hm.certified_upper <= hp.value + 1e-12);
        let z = PositionedCover::zero_cylinders(&b);
        let hz = h_plus_estimate(&b, &mu, &z, 4, &Limits::default()).unwrap();
        let rz = h_partition_rate(&b, &mu, &z, 4, &Limits::default()).unwrap();
        assert_eq!(hz.value, rz.certified_upper);
    }
}
