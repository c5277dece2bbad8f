//! Topological cover entropy `H(T, U, n)` and its rate.

use rayon::prelude::*;

use crate::base::{cycle_growth_rate, SymbolicBundle};
use crate::covercomb::min_subcover_count;
use crate::coverlat::{range_join, range_join_prefixes, PositionedCover};
use crate::error::Result;
use crate::Limits;

use super::EntropyReport;

/// `H(T, U, n) = Σ_ω P(ω) ln N(T, ω, U, n)`.
pub fn cover_complexity(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    n: usize,
    limits: &Limits,
) -> Result<f64> {
    assert!(n >= 1, "cover_complexity needs n >= 1");
    let joined = range_join(bundle, u, 0, n - 1, limits)?;
    complexity_of_join(bundle, &joined, limits)
}

fn complexity_of_join(bundle: &SymbolicBundle, joined: &PositionedCover, limits: &Limits) -> Result<f64> {
    let logs: Vec<f64> = (0..bundle.omega_count())
        .into_par_iter()
        .map(|w| min_subcover_count(bundle, w, joined, limits).map(|c| (c as f64).ln()))
        .collect::<Result<_>>()?;
    Ok(super::weighted(bundle, &logs))
}

/// `H(T, U, n)` for `n = 1..=nmax`.
pub fn cover_complexity_sequence(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    nmax: usize,
    limits: &Limits,
) -> Result<Vec<f64>> {
    range_join_prefixes(bundle, u, nmax, limits)?
        .iter()
        .map(|joined| complexity_of_join(bundle, joined, limits))
        .collect()
}

/// Every cell's words share the symbol at the window's first coordinate.
pub(crate) fn refines_leading_symbol(u: &PositionedCover) -> bool {
    u.is_partition()
        && u.elements().iter().all(|e| {
            e.iter().all(|s| {
                let mut firsts = s.iter().map(|b| b[0]);
                match firsts.next() {
                    None => true,
                    Some(a) => firsts.all(|x| x == a),
                }
            })
        })
}

/// Fekete upper bounds on `h_top(T, U)`, with the exact rate when the cover
/// is a partition refining the leading symbol (spectral radius of the
/// transfer products) or contains the whole space (zero).
pub fn htop_estimate(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    nmax: usize,
    limits: &Limits,
) -> Result<EntropyReport> {
    assert!(nmax >= 1, "htop_estimate needs nmax >= 1");
    let mut methods = vec!["fekete".to_string()];
    let exact = if u.has_full_element(bundle) {
        methods.push("full-element".into());
        Some(0.0)
    } else if refines_leading_symbol(u) {
        methods.push("spectral".into());
        Some(cycle_growth_rate(bundle)?.integrated)
    } else {
        None
    };
    let values = cover_complexity_sequence(bundle, u, nmax, limits)?;
    Ok(EntropyReport::from_values(&values, exact, methods))
}
