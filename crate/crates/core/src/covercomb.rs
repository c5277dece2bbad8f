//! Exact minimal subcovers and maximal multi-separated word sets.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::{Block, SymbolicBundle, Window};
use crate::coverlat::{is_finer, range_join, PositionedCover};
use crate::error::{Error, Result};
use crate::Limits;

/// Exact minimum set cover over a universe `0..size`.
///
/// Returns `None` when the sets do not cover the universe, else the
/// indices of a minimum subcover. Sets are reduced (duplicates, empty and
/// dominated sets removed) before the element-count guard is applied,
/// and the guard is skipped when the answer is certain without search.
pub fn exact_set_cover(
    size: usize,
    sets: &[FixedBitSet],
    max_sets: usize,
) -> Result<Option<Vec<usize>>> {
    if size == 0 {
        return Ok(Some(Vec::new()));
    }
    let mut union = FixedBitSet::with_capacity(size);
    for s in sets {
        union.union_with(s);
    }
    if union.count_ones(..) != size {
        return Ok(None);
    }
    let kept = reduce(sets);
    if let Some(&k) = kept.iter().find(|&&k| sets[k].count_ones(..) == size) {
        return Ok(Some(vec![k]));
    }
    let total: usize = kept.iter().map(|&k| sets[k].count_ones(..)).sum();
    if total == size {
        // pairwise disjoint
        let mut all = kept;
        all.sort_unstable();
        return Ok(Some(all));
    }
    let reduced: Vec<FixedBitSet> = kept.iter().map(|&k| sets[k].clone()).collect();
    let greedy = greedy_cover(size, &reduced).expect("reduced sets cover the universe");
    let widest = reduced.iter().map(|s| s.count_ones(..)).max().unwrap_or(1);
    if greedy.len() == size.div_ceil(widest) {
        // greedy meets the counting lower bound
        let mut chosen: Vec<usize> = greedy.into_iter().map(|i| kept[i]).collect();
        chosen.sort_unstable();
        return Ok(Some(chosen));
    }
    if kept.len() > max_sets {
        return Err(Error::SizeGuard {
            what: "set-cover elements",
            size: kept.len() as u128,
            limit: max_sets as u128,
        });
    }
    let mut solver = Solver {
        sets: &reduced,
        covering: (0..size)
            .map(|e| (0..reduced.len()).filter(|&k| reduced[k].contains(e)).collect())
            .collect(),
        best: greedy,
        stack: Vec::new(),
        memo: HashMap::new(),
    };
    let mut uncovered = FixedBitSet::with_capacity(size);
    uncovered.insert_range(..);
    solver.search(uncovered);
    let mut chosen: Vec<usize> = solver.best.into_iter().map(|i| kept[i]).collect();
    chosen.sort_unstable();
    Ok(Some(chosen))
}

/// Indices of the sets surviving reduction: nonempty, first of each
/// duplicate group, and not strictly inside another set. Largest first.
fn reduce(sets: &[FixedBitSet]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sets.len()).filter(|&k| !sets[k].is_clear()).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(sets[k].count_ones(..)), k));
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for k in order {
        if !kept.iter().any(|&j| sets[k].is_subset(&sets[j])) {
            kept.push(k);
        }
    }
    kept
}

/// Cover picked by the max-coverage greedy rule, or `None` if the sets
/// leave something uncovered.
pub fn greedy_cover(size: usize, sets: &[FixedBitSet]) -> Option<Vec<usize>> {
    let mut uncovered = FixedBitSet::with_capacity(size);
    uncovered.insert_range(..);
    let mut chosen = Vec::new();
    while !uncovered.is_clear() {
        let (k, gain) = sets
            .iter()
            .enumerate()
            .map(|(k, s)| (k, s.intersection(&uncovered).count()))
            .max_by_key(|&(k, g)| (g, std::cmp::Reverse(k)))?;
        if gain == 0 {
            return None;
        }
        uncovered.difference_with(&sets[k]);
        chosen.push(k);
    }
    Some(chosen)
}

struct Solver<'a> {
    sets: &'a [FixedBitSet],
    covering: Vec<Vec<usize>>,
    best: Vec<usize>,
    stack: Vec<usize>,
    /// Smallest depth at which each uncovered state was reached.
    memo: HashMap<FixedBitSet, usize>,
}

impl Solver<'_> {
    fn search(&mut self, uncovered: FixedBitSet) {
        let depth = self.stack.len();
        let left = uncovered.count_ones(..);
        if left == 0 {
            if depth < self.best.len() {
                self.best = self.stack.clone();
            }
            return;
        }
        let max_gain = self
            .sets
            .iter()
            .map(|s| s.intersection(&uncovered).count())
            .max()
            .unwrap_or(0);
        if max_gain == 0 || depth + left.div_ceil(max_gain) >= self.best.len() {
            return;
        }
        match self.memo.get(&uncovered) {
            Some(&d) if d <= depth => return,
            _ => {
                self.memo.insert(uncovered.clone(), depth);
            }
        }
        // branch on the hardest element to cover
        let pivot = uncovered
            .ones()
            .min_by_key(|&e| self.covering[e].len())
            .expect("nonempty");
        let mut options: Vec<(usize, usize)> = self.covering[pivot]
            .iter()
            .map(|&k| (self.sets[k].intersection(&uncovered).count(), k))
            .collect();
        options.sort_by(|a, b| b.cmp(a));
        for (_, k) in options {
            let mut next = uncovered.clone();
            next.difference_with(&self.sets[k]);
            self.stack.push(k);
            self.search(next);
            self.stack.pop();
        }
    }
}

fn section_bitsets(cover: &PositionedCover, omega: usize, universe: &[Block]) -> Vec<FixedBitSet> {
    let index: HashMap<&[u16], usize> = universe
        .iter()
        .enumerate()
        .map(|(i, b)| (b.as_slice(), i))
        .collect();
    (0..cover.len())
        .map(|k| {
            let mut bits = FixedBitSet::with_capacity(universe.len());
            for b in cover.section(k, omega) {
                if let Some(&i) = index.get(b.as_slice()) {
                    bits.insert(i);
                }
            }
            bits
        })
        .collect()
}

/// Minimum number of elements of `cover` whose sections at `omega` cover
/// the admissible words of that fiber on the cover's window.
pub fn min_subcover_count(
    bundle: &SymbolicBundle,
    omega: usize,
    cover: &PositionedCover,
    limits: &Limits,
) -> Result<usize> {
    min_subcover(bundle, omega, cover, limits).map(|c| c.len())
}

/// Ascending indices of a minimum subcover of `cover` at `omega`.
pub fn min_subcover(
    bundle: &SymbolicBundle,
    omega: usize,
    cover: &PositionedCover,
    limits: &Limits,
) -> Result<Vec<usize>> {
    let universe = bundle.admissible_blocks(omega, cover.window());
    if universe.len() > limits.cover_universe_max {
        return Err(Error::SizeGuard {
            what: "set-cover universe",
            size: universe.len() as u128,
            limit: limits.cover_universe_max as u128,
        });
    }
    let sets = section_bitsets(cover, omega, &universe);
    match exact_set_cover(universe.len(), &sets, limits.cover_elems_max)? {
        Some(chosen) => Ok(chosen),
        None => Err(uncovered_error(bundle, omega, &universe, &sets)),
    }
}

fn uncovered_error(
    bundle: &SymbolicBundle,
    omega: usize,
    universe: &[Block],
    sets: &[FixedBitSet],
) -> Error {
    let missing = (0..universe.len())
        .find(|&i| !sets.iter().any(|s| s.contains(i)))
        .expect("some word is uncovered");
    Error::UniverseUncovered {
        omega,
        word: bundle.render(&universe[missing]),
    }
}

/// `N(T, ω, U, n)`.
pub fn cover_count(
    bundle: &SymbolicBundle,
    omega: usize,
    u: &PositionedCover,
    n: usize,
    limits: &Limits,
) -> Result<usize> {
    assert!(n >= 1, "cover_count needs n >= 1");
    let joined = range_join(bundle, u, 0, n - 1, limits)?;
    min_subcover_count(bundle, omega, &joined, limits)
}

/// `N(T, ω, U, n)` for every fiber, sharing one join.
pub fn cover_counts(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    n: usize,
    limits: &Limits,
) -> Result<Vec<usize>> {
    assert!(n >= 1, "cover_counts needs n >= 1");
    let joined = range_join(bundle, u, 0, n - 1, limits)?;
    (0..bundle.omega_count())
        .into_par_iter()
        .map(|w| min_subcover_count(bundle, w, &joined, limits))
        .collect()
}

/// `N(U)`: the fewest elements of `u` that cover every fiber at once.
pub fn global_min_subcover_count(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    limits: &Limits,
) -> Result<usize> {
    global_min_subcover(bundle, u, limits).map(|c| c.len())
}

/// Indices of a minimum subcover of `u` valid in every fiber.
pub fn global_min_subcover(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    limits: &Limits,
) -> Result<Vec<usize>> {
    let universes: Vec<Vec<Block>> = (0..bundle.omega_count())
        .map(|w| bundle.admissible_blocks(w, u.window()))
        .collect();
    let size: usize = universes.iter().map(Vec::len).sum();
    if size > limits.cover_universe_max {
        return Err(Error::SizeGuard {
            what: "set-cover universe",
            size: size as u128,
            limit: limits.cover_universe_max as u128,
        });
    }
    let mut sets = vec![FixedBitSet::with_capacity(size); u.len()];
    let mut offset = 0;
    for (w, universe) in universes.iter().enumerate() {
        for (k, bits) in section_bitsets(u, w, universe).into_iter().enumerate() {
            for i in bits.ones() {
                sets[k].insert(offset + i);
            }
        }
        offset += universe.len();
    }
    match exact_set_cover(size, &sets, limits.cover_elems_max)? {
        Some(chosen) => Ok(chosen),
        None => {
            let (w, universe, local) = universes
                .iter()
                .enumerate()
                .map(|(w, universe)| (w, universe, section_bitsets(u, w, universe)))
                .find(|(_, universe, local)| {
                    (0..universe.len()).any(|i| !local.iter().any(|s| s.contains(i)))
                })
                .expect("some fiber is uncovered");
            Err(uncovered_error(bundle, w, universe, &local))
        }
    }
}

/// A maximal set of words no two of which share an atom of any of the
/// iterated partitions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparatedSet {
    pub omega: usize,
    pub window: Window,
    pub words: Vec<Block>,
    /// `N(T, ω, U, n)`.
    pub cover_count: usize,
    /// `floor(N / K)`.
    pub bound: usize,
}

/// Greedy lexicographic scan for a maximal multi-separated set of words
/// on the hull of the `n`-step joins.
pub fn maximal_multi_separated(
    bundle: &SymbolicBundle,
    omega: usize,
    partitions: &[PositionedCover],
    u: &PositionedCover,
    n: usize,
    limits: &Limits,
) -> Result<SeparatedSet> {
    if partitions.is_empty() {
        return Err(Error::EmptyPartitionList);
    }
    for (index, r) in partitions.iter().enumerate() {
        if !r.is_partition() {
            return Err(Error::NotPartition(format!("partition {index}")));
        }
        if !is_finer(bundle, r, u) {
            return Err(Error::FinerThanViolation { index });
        }
    }
    let joined: Vec<PositionedCover> = partitions
        .iter()
        .map(|r| range_join(bundle, r, 0, n - 1, limits))
        .collect::<Result<_>>()?;
    let window = joined
        .iter()
        .fold(joined[0].window(), |acc, j| acc.hull(&j.window()));
    let universe = bundle.admissible_blocks(omega, window);
    let atoms: Vec<HashMap<&[u16], usize>> = joined
        .iter()
        .map(|j| {
            j.membership(omega)
                .into_iter()
                .map(|(b, ks)| (b, ks[0]))
                .collect()
        })
        .collect();
    let mut used: Vec<HashSet<usize>> = vec![HashSet::new(); joined.len()];
    let mut words = Vec::new();
    for word in universe {
        let ids: Vec<usize> = joined
            .iter()
            .zip(&atoms)
            .map(|(j, a)| a[window.restrict(&word, &j.window())])
            .collect();
        if ids.iter().zip(&used).all(|(id, u)| !u.contains(id)) {
            for (id, u) in ids.into_iter().zip(used.iter_mut()) {
                u.insert(id);
            }
            words.push(word);
        }
    }
    let count = cover_count(bundle, omega, u, n, limits)?;
    let bound = count / partitions.len();
    if words.len() < bound {
        return Err(Error::BoundViolated {
            omega,
            size: words.len(),
            bound,
        });
    }
    Ok(SeparatedSet {
        omega,
        window,
        words,
        cover_count: count,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::base::fixtures::*;
    use crate::coverlat::product_partitions_finer;

    fn bits(size: usize, ones: &[usize]) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(size);
        for &i in ones {
            b.insert(i);
        }
        b
    }

    #[test]
    fn small_set_cover() {
        // universe {aa, ab, ba, bb}
        let sets = [bits(4, &[0, 1, 2]), bits(4, &[1, 3]), bits(4, &[3, 2])];
        assert_eq!(exact_set_cover(4, &sets, 64).unwrap().map(|c| c.len()), Some(2));
        assert_eq!(exact_set_cover(4, &sets[..1], 64).unwrap(), None);
    }

    #[test]
    fn greedy_is_not_exact() {
        // classic: greedy takes the big middle set first
        let sets = [
            bits(6, &[0, 1, 2]),
            bits(6, &[3, 4, 5]),
            bits(6, &[1, 2, 3, 4]),
        ];
        assert_eq!(greedy_cover(6, &sets).map(|c| c.len()), Some(3));
        assert_eq!(exact_set_cover(6, &sets, 64).unwrap(), Some(vec![0, 1]));
    }

    #[test]
    fn subcover_in_fiber() {
        let b = gm2();
        let s = |ws: &[&[u16]]| ws.iter().map(|w| w.to_vec()).collect::<BTreeSet<_>>();
        let c = PositionedCover::product(
            &b,
            Window::new(0, 2),
            vec![
                s(&[&[0, 0], &[0, 1], &[1, 0]]),
                s(&[&[0, 1], &[1, 1]]),
                s(&[&[1, 1], &[1, 0]]),
            ],
        )
        .unwrap();
        assert_eq!(min_subcover_count(&b, 0, &c, &Limits::default()).unwrap(), 2);
        // bb is absent from w1, so S1 alone covers it
        assert_eq!(min_subcover_count(&b, 1, &c, &Limits::default()).unwrap(), 1);
    }

    #[test]
    fn cover_counts_match_words() {
        let limits = Limits::default();
        let b = gm2();
        let z = PositionedCover::zero_cylinders(&b);
        assert_eq!(cover_counts(&b, &z, 2, &limits).unwrap(), vec![4, 3]);
        let i = id2();
        let zi = PositionedCover::zero_cylinders(&i);
        for n in 1..6 {
            assert_eq!(cover_count(&i, 0, &zi, n, &limits).unwrap(), 2);
        }
        let t = PositionedCover::trivial(&b, Window::new(0, 1)).unwrap();
        assert_eq!(cover_count(&b, 1, &t, 4, &limits).unwrap(), 1);
    }

    #[test]
    fn separated_set_for_cylinders() {
        let limits = Limits::default();
        let b = gm2();
        let z = PositionedCover::zero_cylinders(&b);
        let s = maximal_multi_separated(&b, 0, std::slice::from_ref(&z), &z, 2, &limits).unwrap();
        assert_eq!(s.words.len(), 4);
        assert_eq!(s.bound, 4);
        let t = PositionedCover::trivial(&b, Window::new(0, 1)).unwrap();
        let s = maximal_multi_separated(&b, 0, std::slice::from_ref(&t), &t, 1, &limits).unwrap();
        assert_eq!(s.words.len(), 1);
        assert_eq!(s.bound, 1);
    }

    #[test]
    fn separated_set_with_two_partitions() {
        let limits = Limits::default();
        let b = gm2();
        let s = |ws: &[&[u16]]| ws.iter().map(|w| w.to_vec()).collect::<BTreeSet<_>>();
        let u = PositionedCover::product(&b, Window::new(0, 1), vec![s(&[&[0], &[1]]), s(&[&[1]])])
            .unwrap();
        let parts: Vec<_> = product_partitions_finer(&b, &u).unwrap().collect();
        let r = maximal_multi_separated(&b, 0, &parts, &u, 1, &limits).unwrap();
        assert_eq!(r.cover_count, 1);
        assert!(r.words.len() >= r.bound);
        let z = PositionedCover::zero_cylinders(&b);
        assert_eq!(
            maximal_multi_separated(&b, 0, std::slice::from_ref(&z), &u, 1, &limits).unwrap().bound,
            1
        );
        assert_eq!(
            maximal_multi_separated(&b, 0, std::slice::from_ref(&u), &z, 1, &limits),
            Err(Error::NotPartition("partition 0".into()))
        );
        assert_eq!(
            maximal_multi_separated(&b, 0, &[], &z, 1, &limits),
            Err(Error::EmptyPartitionList)
        );
    }
}
