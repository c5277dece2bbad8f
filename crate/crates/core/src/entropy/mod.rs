//! Entropy functionals: Shannon entropy, conditional entropy given the
//! base σ-algebra, cover entropies and their rates. All values are in nats.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::{Block, SymbolicBundle};
use crate::coverlat::{advance_pick, product_partitions_finer, PositionedCover, Section};
use crate::error::{Error, Result};
use crate::measures::{Distribution, FiberMeasure};
use crate::Limits;

mod power;
mod rates;
mod topological;

pub use power::{power_system, transport_measure, PowerSystem};
pub use rates::{h_minus_estimate, h_partition_rate, h_plus_estimate, HPlusReport};
pub use topological::{cover_complexity, cover_complexity_sequence, htop_estimate};

/// `-x ln x`, with `0 ln 0 = 0`.
pub(crate) fn phi(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// `−Σ p_i ln p_i`.
pub fn shannon(p: &[f64]) -> Result<f64> {
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &x)| x < 0.0 || x.is_nan()) {
        return Err(Error::NegativeProbability { index, value });
    }
    Ok(shannon_unchecked(p))
}

pub(crate) fn shannon_unchecked(p: &[f64]) -> f64 {
    p.iter().map(|&x| phi(x)).sum()
}

/// Outcome of [`lemma7_holds`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma7Verdict {
    pub holds: bool,
    /// `H(p) − H(p_1 − δ_1, p_2 + δ_2, …)`.
    pub margin: f64,
}

/// Moving mass away from the smallest coordinate strictly lowers entropy.
///
/// Checks the hypotheses first (`p` ascending in `(0,1)`, `Σp ≤ 1`,
/// `0 < δ_1 < p_1`, `0 ≤ δ_k < 1 − p_k`, `Σ_{k≥2} δ_k = δ_1`) and reports
/// every violated one.
pub fn lemma7_holds(p: &[f64], delta: &[f64]) -> Result<Lemma7Verdict> {
    const TOL: f64 = 1e-12;
    let mut bad = Vec::new();
    if p.len() < 2 {
        bad.push(format!("need K >= 2 coordinates, got {}", p.len()));
    }
    if p.len() != delta.len() {
        bad.push(format!("p has {} entries but delta has {}", p.len(), delta.len()));
    }
    if !bad.is_empty() {
        return Err(Error::Hypothesis(bad));
    }
    for (k, &x) in p.iter().enumerate() {
        if !(x > 0.0 && x < 1.0) {
            bad.push(format!("p[{k}] = {x} not in (0, 1)"));
        }
    }
    if p.windows(2).any(|w| w[0] > w[1]) {
        bad.push("p is not sorted ascending".to_string());
    }
    let sum: f64 = p.iter().sum();
    if sum > 1.0 + TOL {
        bad.push(format!("sum of p = {sum} exceeds 1"));
    }
    if !(delta[0] > 0.0 && delta[0] < p[0]) {
        bad.push(format!("delta[0] = {} not in (0, p[0] = {})", delta[0], p[0]));
    }
    for k in 1..p.len() {
        if !(delta[k] >= 0.0 && delta[k] < 1.0 - p[k]) {
            bad.push(format!("delta[{k}] = {} not in [0, {})", delta[k], 1.0 - p[k]));
        }
    }
    let rest: f64 = delta[1..].iter().sum();
    if (rest - delta[0]).abs() > TOL {
        bad.push(format!("sum of delta[1..] = {rest} differs from delta[0] = {}", delta[0]));
    }
    if !bad.is_empty() {
        return Err(Error::Hypothesis(bad));
    }
    let moved: Vec<f64> = p
        .iter()
        .zip(delta)
        .enumerate()
        .map(|(k, (&x, &d))| if k == 0 { x - d } else { x + d })
        .collect();
    let margin = shannon_unchecked(p) - shannon_unchecked(&moved);
    Ok(Lemma7Verdict {
        holds: margin > 0.0,
        margin,
    })
}

/// Finite-n values of a subadditive rate and what is known about its limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    /// `(n, value_n / n)` for `n = 1..=nmax`.
    pub sequence: Vec<(usize, f64)>,
    /// Running minimum of the sequence; an upper bound on the limit.
    pub running_upper: Vec<f64>,
    pub certified_upper: f64,
    pub exact_rate: Option<f64>,
    pub methods: Vec<String>,
}

impl EntropyReport {
    pub(crate) fn from_values(values: &[f64], exact_rate: Option<f64>, methods: Vec<String>) -> Self {
        let sequence: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i + 1, v / (i + 1) as f64))
            .collect();
        let mut running_upper = Vec::with_capacity(sequence.len());
        let mut best = f64::INFINITY;
        for &(_, r) in &sequence {
            best = best.min(r);
            running_upper.push(best);
        }
        EntropyReport {
            sequence,
            running_upper,
            certified_upper: best,
            exact_rate,
            methods,
        }
    }

    /// The unnormalized value at `n`.
    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.sequence.get(n.checked_sub(1)?).map(|&(n, r)| r * n as f64)
    }

    /// Exact rate when known, else the Fekete upper bound.
    pub fn best_estimate(&self) -> f64 {
        self.exact_rate.unwrap_or(self.certified_upper)
    }
}

/// How the infimum over refining partitions is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Any partition whose ω-sections refine the cover's sections.
    General,
    /// Only partitions of the form `(Ω × R_k) ∩ E`.
    Product,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Mode::General),
            "product" => Ok(Mode::Product),
            other => Err(Error::Malformed(format!("unknown mode {other}"))),
        }
    }
}

/// Cell masses of `r` at fiber `omega` under `dist` (a law on `r`'s window).
pub(crate) fn cell_masses(r: &PositionedCover, omega: usize, dist: &Distribution) -> Vec<f64> {
    let mut masses = vec![0.0; r.len()];
    let owner: HashMap<&[u16], usize> = r
        .membership(omega)
        .into_iter()
        .map(|(b, ks)| (b, ks[0]))
        .collect();
    for (word, &x) in dist {
        if let Some(&k) = owner.get(word.as_slice()) {
            masses[k] += x;
        }
    }
    masses
}

/// `H_{μ_ω}(R(ω))` for every fiber.
pub fn fiber_partition_entropies(
    bundle: &SymbolicBundle,
    mu: &(dyn FiberMeasure + Sync),
    r: &PositionedCover,
) -> Result<Vec<f64>> {
    if !r.is_partition() {
        return Err(Error::NotPartition("conditioning family".into()));
    }
    (0..bundle.omega_count())
        .into_par_iter()
        .map(|w| {
            let dist = mu.marginal(bundle, w, r.window())?;
            Ok(shannon_unchecked(&cell_masses(r, w, &dist)))
        })
        .collect()
}

/// `H_μ(R | F_E) = Σ_ω P(ω) H_{μ_ω}(R(ω))`.
pub fn cond_entropy_partition(
    bundle: &SymbolicBundle,
    mu: &(dyn FiberMeasure + Sync),
    r: &PositionedCover,
) -> Result<f64> {
    let per = fiber_partition_entropies(bundle, mu, r)?;
    Ok(weighted(bundle, &per))
}

pub(crate) fn weighted(bundle: &SymbolicBundle, per_omega: &[f64]) -> f64 {
    per_omega
        .iter()
        .enumerate()
        .map(|(w, &h)| bundle.base().weight(w) * h)
        .sum()
}

/// `H_μ(U | F_E) = inf_{R ⪰ U} H_μ(R | F_E)`.
pub fn cover_cond_entropy(
    bundle: &SymbolicBundle,
    mu: &(dyn FiberMeasure + Sync),
    u: &PositionedCover,
    mode: Mode,
    limits: &Limits,
) -> Result<f64> {
    match mode {
        Mode::General => Ok(general_min(bundle, mu, u)?.value),
        Mode::Product => product_min(bundle, mu, u, limits).map(|(v, _)| v),
    }
}

/// Exact general-mode minimum together with a minimizing partition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneralMin {
    pub value: f64,
    pub per_omega: Vec<f64>,
    /// A partition finer than the cover attaining the minimum.
    pub argmin: PositionedCover,
}

/// Per fiber, the minimum is attained by a partition of the form
/// `U_{σ1}, U_{σ2} \ U_{σ1}, …`: the largest cell can always absorb every
/// remaining word of its element without raising entropy. The search runs
/// over such orderings with memoization, splits independent groups of
/// overlapping elements, and drops dominated elements.
pub fn general_min(
    bundle: &SymbolicBundle,
    mu: &(dyn FiberMeasure + Sync),
    u: &PositionedCover,
) -> Result<GeneralMin> {
    let fibers: Vec<(f64, Vec<Section>)> = (0..bundle.omega_count())
        .into_par_iter()
        .map(|w| {
            let dist = mu.marginal(bundle, w, u.window())?;
            Ok(fiber_general_min(bundle, u, w, &dist))
        })
        .collect::<Result<_>>()?;
    let per_omega: Vec<f64> = fibers.iter().map(|(h, _)| *h).collect();
    let mut elements = vec![vec![Section::new(); bundle.omega_count()]; u.len()];
    for (w, (_, cells)) in fibers.into_iter().enumerate() {
        for (k, cell) in cells.into_iter().enumerate() {
            elements[k][w] = cell;
        }
    }
    Ok(GeneralMin {
        value: weighted(bundle, &per_omega),
        per_omega,
        argmin: PositionedCover::from_parts(u.window(), elements, false),
    })
}

fn fiber_general_min(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    omega: usize,
    dist: &Distribution,
) -> (f64, Vec<Section>) {
    let words: Vec<(&Block, f64)> = dist.iter().map(|(b, &x)| (b, x)).filter(|&(_, x)| x > 0.0).collect();
    let index: HashMap<&[u16], usize> = words.iter().enumerate().map(|(i, (b, _))| (b.as_slice(), i)).collect();
    let sets: Vec<Vec<usize>> = (0..u.len())
        .map(|k| {
            u.section(k, omega)
                .iter()
                .filter_map(|b| index.get(b.as_slice()).copied())
                .collect()
        })
        .collect();
    let masses: Vec<f64> = words.iter().map(|&(_, x)| x).collect();
    let (value, assignment) = min_over_orderings(&masses, &sets);
    let mut cells = vec![Section::new(); u.len()];
    for (i, &k) in assignment.iter().enumerate() {
        cells[k].insert(words[i].0.clone());
    }
    // zero-mass words go to their first containing element
    for b in bundle.admissible_blocks(omega, u.window()) {
        if !index.contains_key(b.as_slice()) {
            if let Some(k) = (0..u.len()).find(|&k| u.section(k, omega).contains(&b)) {
                cells[k].insert(b);
            }
        }
    }
    (value, cells)
}

/// Least entropy of a partition of the weighted items refining `sets`,
/// with the element chosen for each item. Every item must lie in a set.
fn min_over_orderings(masses: &[f64], sets: &[Vec<usize>]) -> (f64, Vec<usize>) {
    let mut membership = vec![Vec::new(); masses.len()];
    for (k, set) in sets.iter().enumerate() {
        for &i in set {
            membership[i].push(k);
        }
    }
    // items in exactly the same elements always share a cell
    let mut atom_of: HashMap<&[usize], usize> = HashMap::new();
    let mut atoms: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, ks) in membership.iter().enumerate() {
        let a = *atom_of.entry(ks.as_slice()).or_insert_with(|| {
            atoms.push((0.0, Vec::new()));
            atoms.len() - 1
        });
        atoms[a].0 += masses[i];
        atoms[a].1.push(i);
    }
    let mut bits = vec![FixedBitSet::with_capacity(atoms.len()); sets.len()];
    for (a, (_, members)) in atoms.iter().enumerate() {
        for &k in &membership[members[0]] {
            bits[k].insert(a);
        }
    }
    // dominated elements stay dominated in every sub-problem
    let keep: Vec<usize> = (0..sets.len())
        .filter(|&k| {
            !bits[k].is_clear()
                && !(0..sets.len()).any(|j| j != k && bits[k].is_subset(&bits[j]) && (bits[k] != bits[j] || j < k))
        })
        .collect();
    let mut dp = OrderingDp {
        masses: atoms.iter().map(|(x, _)| *x).collect(),
        sets: keep.iter().map(|&k| bits[k].clone()).collect(),
        memo: HashMap::new(),
    };
    let mut all = FixedBitSet::with_capacity(atoms.len());
    all.insert_range(..);
    let value = dp.solve(&all);
    let mut by_atom = vec![usize::MAX; atoms.len()];
    dp.assign(&all, f64::INFINITY, &mut by_atom);
    let mut out = vec![usize::MAX; masses.len()];
    for (a, &k) in by_atom.iter().enumerate() {
        for &i in &atoms[a].1 {
            out[i] = keep[k];
        }
    }
    (value, out)
}

struct OrderingDp {
    masses: Vec<f64>,
    sets: Vec<FixedBitSet>,
    /// Keyed by connected state and mass ceiling: the optimum and first
    /// element taken, or a lower bound (`usize::MAX` in place of the
    /// element).
    memo: HashMap<(FixedBitSet, u64), (f64, usize)>,
}

/// Moving mass from a smaller cell to a larger one never raises entropy, so
/// some optimal ordering takes each element whole (within what is left) and
/// has non-increasing cell masses. The search only visits such orderings:
/// below a cell of mass `c`, every later cell has mass at most `c`.
impl OrderingDp {
    fn mass(&self, s: &FixedBitSet) -> f64 {
        s.ones().map(|i| self.masses[i]).sum()
    }

    fn union(group: &[(usize, FixedBitSet)], len: usize) -> FixedBitSet {
        let mut sub = FixedBitSet::with_capacity(len);
        for (_, t) in group {
            sub.union_with(t);
        }
        sub
    }

    /// Each word's cell lies in an element containing it and weighs at most
    /// `ceiling`, so word `i` contributes at least `x_i ln(1/c_i)`.
    fn bound(&self, group: &[(usize, FixedBitSet)], state: &FixedBitSet, ceiling: f64) -> f64 {
        let mut widest = vec![0.0f64; self.masses.len()];
        for (_, t) in group {
            let m = self.mass(t).min(ceiling);
            for i in t.ones() {
                widest[i] = widest[i].max(m);
            }
        }
        state
            .ones()
            .filter(|&i| widest[i] > 0.0)
            .map(|i| -self.masses[i] * widest[i].ln())
            .sum()
    }

    /// Undominated elements restricted to `state`, grouped into connected
    /// components of the overlap relation.
    fn components(&self, state: &FixedBitSet) -> Vec<Vec<(usize, FixedBitSet)>> {
        let mut live: Vec<(usize, FixedBitSet)> = Vec::new();
        for (k, s) in self.sets.iter().enumerate() {
            let t = s.intersection(state).collect::<FixedBitSet>();
            if !t.is_clear() {
                live.push((k, t));
            }
        }
        let mut kept: Vec<(usize, FixedBitSet)> = Vec::new();
        for (i, (k, t)) in live.iter().enumerate() {
            let dominated = live.iter().enumerate().any(|(j, (_, o))| {
                j != i && t.is_subset(o) && (t != o || j < i)
            });
            if !dominated {
                kept.push((*k, t.clone()));
            }
        }
        let n = kept.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for i in 0..n {
            for j in i + 1..n {
                if !kept[i].1.is_disjoint(&kept[j].1) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut groups: Vec<Vec<(usize, FixedBitSet)>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (i, item) in kept.into_iter().enumerate() {
            let root = find(&mut parent, i);
            let g = *slot.entry(root).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(item);
        }
        groups
    }

    fn solve(&mut self, state: &FixedBitSet) -> f64 {
        self.search(state, f64::INFINITY, f64::INFINITY).0
    }

    /// Branch and bound under `cap` with cells no heavier than `ceiling`.
    /// Returns `(value, true)` with the exact minimum whenever it is below
    /// `cap`, otherwise `(bound, false)` with a lower bound of at least
    /// `cap`. An infeasible ceiling gives `(∞, true)`.
    fn search(&mut self, state: &FixedBitSet, cap: f64, ceiling: f64) -> (f64, bool) {
        if state.is_clear() {
            return (0.0, true);
        }
        let groups = self.components(state);
        if groups.len() > 1 {
            let subs: Vec<FixedBitSet> = groups.iter().map(|g| Self::union(g, state.len())).collect();
            let bounds: Vec<f64> = groups
                .iter()
                .zip(&subs)
                .map(|(g, s)| self.bound(g, s, ceiling))
                .collect();
            let mut done = 0.0;
            for (i, sub) in subs.iter().enumerate() {
                let later: f64 = bounds[i + 1..].iter().sum();
                let (v, exact) = self.search(sub, cap - done - later, ceiling);
                done += v;
                if !exact {
                    return (done + later, false);
                }
            }
            return (done, true);
        }
        let group = &groups[0];
        if group.len() == 1 {
            let m = self.mass(&group[0].1);
            return (if m <= ceiling { phi(m) } else { f64::INFINITY }, true);
        }
        let key = (state.clone(), ceiling.to_bits());
        let mut floor = self.bound(group, state, ceiling);
        if let Some(&(v, k)) = self.memo.get(&key) {
            if k != usize::MAX {
                return (v, true);
            }
            if v >= cap {
                return (v, false);
            }
            floor = floor.max(v);
        }
        if floor >= cap {
            return (floor, false);
        }
        // heaviest first finds good orderings early
        let mut order: Vec<(f64, usize, &FixedBitSet)> = group
            .iter()
            .map(|(k, t)| (self.mass(t), *k, t))
            .filter(|&(m, _, _)| m <= ceiling)
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut best = (f64::INFINITY, usize::MAX);
        let mut pruned = f64::INFINITY;
        for (m, k, t) in order {
            let head = phi(m);
            let mut rest = state.clone();
            rest.difference_with(t);
            let (v, exact) = self.search(&rest, cap.min(best.0) - head, m);
            if exact && head + v < best.0 {
                best = (head + v, k);
            } else if !exact {
                pruned = pruned.min(head + v);
            }
        }
        if best.0 < cap || (best.0.is_infinite() && pruned.is_infinite()) {
            self.memo.insert(key, best);
            return (best.0, true);
        }
        let lower = floor.max(best.0.min(pruned));
        self.memo.insert(key, (lower, usize::MAX));
        (lower, false)
    }

    fn assign(&mut self, state: &FixedBitSet, ceiling: f64, out: &mut [usize]) {
        if state.is_clear() {
            return;
        }
        let groups = self.components(state);
        if groups.len() > 1 {
            for g in &groups {
                let sub = Self::union(g, state.len());
                self.assign(&sub, ceiling, out);
            }
            return;
        }
        let group = &groups[0];
        let k = if group.len() == 1 {
            group[0].0
        } else {
            self.search(state, f64::INFINITY, ceiling);
            self.memo[&(state.clone(), ceiling.to_bits())].1
        };
        debug_assert!(k != usize::MAX, "solved states are exact");
        let t = self.sets[k].intersection(state).collect::<FixedBitSet>();
        for i in t.ones() {
            out[i] = k;
        }
        let mut rest = state.clone();
        rest.difference_with(&t);
        let m = self.mass(&t);
        self.assign(&rest, m, out);
    }
}

/// Minimum over product-form refinements, with the minimizing partition.
pub fn product_min(
    bundle: &SymbolicBundle,
    mu: &(dyn FiberMeasure + Sync),
    u: &PositionedCover,
    limits: &Limits,
) -> Result<(f64, PositionedCover)> {
    if !u.is_product_form() {
        return Err(Error::NotProductForm);
    }
    let parts = product_partitions_finer(bundle, u)?;
    if u.has_full_element(bundle) {
        let k = (0..u.len())
            .find(|&k| {
                (0..bundle.omega_count()).all(|w| {
                    u.section(k, w).len() == bundle.admissible_blocks(w, u.window()).len()
                })
            })
            .expect("full element exists");
        let mut elements = vec![vec![Section::new(); bundle.omega_count()]; u.len()];
        for (w, slot) in elements[k].iter_mut().enumerate() {
            *slot = bundle.admissible_blocks(w, u.window()).into_iter().collect();
        }
        return Ok((0.0, PositionedCover::from_parts(u.window(), elements, true)));
    }
    let total = parts.total();
    let dists: Vec<Distribution> = (0..bundle.omega_count())
        .map(|w| mu.marginal(bundle, w, u.window()))
        .collect::<Result<_>>()?;
    // score assignments from per-word masses; only the winner is built
    let mass: Vec<Vec<(usize, f64)>> = dists
        .iter()
        .zip(parts.fiber_words())
        .map(|(dist, words)| {
            words
                .iter()
                .filter_map(|&i| dist.get(&parts.universe()[i]).map(|&x| (i, x)))
                .collect()
        })
        .collect();
    let choices = parts.choices();
    let budget = total.min(limits.enum_max);
    let mut pick = vec![0; choices.len()];
    let mut cells = vec![0.0; parts.element_count()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut seen: u128 = 0;
    while seen < budget {
        let per: Vec<f64> = mass
            .iter()
            .map(|words| {
                cells.iter_mut().for_each(|c| *c = 0.0);
                for &(i, x) in words {
                    cells[choices[i][pick[i]]] += x;
                }
                shannon_unchecked(&cells)
            })
            .collect();
        let v = weighted(bundle, &per);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, pick.clone()));
        }
        seen += 1;
        if !advance_pick(&mut pick, choices) {
            break;
        }
    }
    let best = best.map(|(v, p)| (v, parts.assemble(&p)));
    if total > limits.enum_max {
        return Err(Error::EnumerationGuard {
            count: total,
            limit: limits.enum_max,
            partial_min: best.map(|(v, _)| v),
        });
    }
    Ok(best.expect("at least one refinement"))
}

/// The partition built fiber by fiber from a minimal subcover
/// `F_1, …, F_N` of `U(ω)` as `W_1 = F_1, W_2 = F_2 \ F_1, …`. It refines
/// `U` and has at most `N(T, ω, U, 1)` nonempty cells at `ω`.
pub fn subcover_partition(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    limits: &Limits,
) -> Result<PositionedCover> {
    let omegas = bundle.omega_count();
    let mut elements = vec![vec![Section::new(); omegas]; u.len()];
    for w in 0..omegas {
        let chosen = crate::covercomb::min_subcover(bundle, w, u, limits)?;
        let mut taken = Section::new();
        for k in chosen {
            let cell: Section = u.section(k, w).difference(&taken).cloned().collect();
            taken.extend(cell.iter().cloned());
            elements[k][w] = cell;
        }
    }
    Ok(PositionedCover::from_parts(u.window(), elements, false))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::base::fixtures::*;
    use crate::base::Window;
    use crate::measures::fixtures::*;
    use crate::measures::{markov_to_word, WordMeasure};

    #[test]
    fn shannon_values() {
        assert_eq!(shannon(&[1.0, 0.0]).unwrap(), 0.0);
        assert!((shannon(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((shannon(&[0.75, 0.25]).unwrap() - 0.5623351446188083).abs() < 1e-15);
        assert!(matches!(shannon(&[-0.1, 1.1]), Err(Error::NegativeProbability { index: 0, .. })));
    }

    #[test]
    fn lemma7_example() {
        let v = lemma7_holds(&[0.3, 0.5], &[0.1, 0.1]).unwrap();
        assert!(v.holds);
        assert!((v.margin - 0.07938247483133898).abs() < 1e-12);
        match lemma7_holds(&[0.3, 0.5], &[0.0, 0.0]) {
            Err(Error::Hypothesis(v)) => assert!(v[0].contains("delta[0]")),
            other => panic!("expected hypothesis error, got {other:?}"),
        }
        assert!(matches!(lemma7_holds(&[0.5, 0.3], &[0.1, 0.1]), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn gm2_zero_cylinder_conditional_entropy() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let z = PositionedCover::zero_cylinders(&b);
        let h = cond_entropy_partition(&b, &mu, &z).unwrap();
        assert!((h - 0.6277411625893767).abs() < 1e-12);
        let t = PositionedCover::trivial(&b, Window::new(0, 1)).unwrap();
        assert_eq!(cond_entropy_partition(&b, &mu, &t).unwrap(), 0.0);
        for mode in [Mode::General, Mode::Product] {
            let c = cover_cond_entropy(&b, &mu, &z, mode, &Limits::default()).unwrap();
            assert!((c - h).abs() < 1e-12);
            assert_eq!(cover_cond_entropy(&b, &mu, &t, mode, &Limits::default()).unwrap(), 0.0);
        }
    }

    #[test]
    fn point_mass_has_zero_entropy() {
        let b = gm2();
        let point = |w: &[u16]| -> Distribution { [(w.to_vec(), 1.0)].into_iter().collect() };
        let nu = WordMeasure::new(&b, 2, vec![point(&[0, 1]), point(&[1, 0])]).unwrap();
        let two = PositionedCover::cylinders(&b, Window::new(0, 2)).unwrap();
        assert_eq!(cond_entropy_partition(&b, &nu, &two).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_cover_with_full_element() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let s = |ws: &[&[u16]]| ws.iter().map(|w| w.to_vec()).collect::<BTreeSet<_>>();
        let u = PositionedCover::product(&b, Window::new(0, 1), vec![s(&[&[0], &[1]]), s(&[&[1]])]).unwrap();
        for mode in [Mode::General, Mode::Product] {
            assert_eq!(cover_cond_entropy(&b, &mu, &u, mode, &Limits::default()).unwrap(), 0.0);
        }
    }

    /// Minimum over every per-fiber assignment, by brute force.
    fn brute_general(masses: &[f64], sets: &[Vec<usize>]) -> f64 {
        let k = sets.len();
        let choices: Vec<Vec<usize>> = (0..masses.len())
            .map(|i| (0..k).filter(|&j| sets[j].contains(&i)).collect())
            .collect();
        let mut best = f64::INFINITY;
        let mut counters = vec![0usize; masses.len()];
        loop {
            let mut cells = vec![0.0; k];
            for (i, c) in counters.iter().enumerate() {
                cells[choices[i][*c]] += masses[i];
            }
            best = best.min(shannon_unchecked(&cells));
            let mut i = 0;
            loop {
                if i == masses.len() {
                    return best;
                }
                counters[i] += 1;
                if counters[i] < choices[i].len() {
                    break;
                }
                counters[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn ordering_dp_matches_brute_force() {
        // A={0,1}, B={2,3}, C={1,2}; three positive cells beat two
        let masses = [0.01, 0.49, 0.49, 0.01];
        let sets = vec![vec![0, 1], vec![2, 3], vec![1, 2]];
        let mut dp = OrderingDp {
            masses: masses.to_vec(),
            sets: sets
                .iter()
                .map(|s| {
                    let mut b = FixedBitSet::with_capacity(4);
                    s.iter().for_each(|&i| b.insert(i));
                    b
                })
                .collect(),
            memo: HashMap::new(),
        };
        let mut all = FixedBitSet::with_capacity(4);
        all.insert_range(..);
        let v = dp.solve(&all);
        assert!((v - brute_general(&masses, &sets)).abs() < 1e-12);
        let mut out = vec![0; 4];
        dp.assign(&all, f64::INFINITY, &mut out);
        assert_eq!(out, vec![0, 2, 2, 1]);
    }

    fn cover_instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<usize>>)> {
        (2usize..=7, 2usize..=5).prop_flat_map(|(n, k)| {
            (
                proptest::collection::vec(0.01f64..1.0, n),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), k),
                proptest::collection::vec(0..k, n),
            )
                .prop_map(move |(raw, member, home)| {
                    let total: f64 = raw.iter().sum();
                    let masses = raw.iter().map(|x| x / total).collect();
                    let sets = (0..k)
                        .map(|j| (0..n).filter(|&i| member[j][i] || home[i] == j).collect())
                        .collect();
                    (masses, sets)
                })
        })
    }

    proptest! {
        #[test]
        fn ordering_search_matches_brute_force((masses, sets) in cover_instance()) {
            let (v, out) = min_over_orderings(&masses, &sets);
            prop_assert!((v - brute_general(&masses, &sets)).abs() < 1e-12);
            let mut cells = vec![0.0; sets.len()];
            for (i, &k) in out.iter().enumerate() {
                prop_assert!(sets[k].contains(&i));
                cells[k] += masses[i];
            }
            prop_assert!((shannon_unchecked(&cells) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn general_argmin_attains_value() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let s = |ws: &[&[u16]]| ws.iter().map(|w| w.to_vec()).collect::<BTreeSet<_>>();
        let u = PositionedCover::product(
            &b,
            Window::new(0, 2),
            vec![s(&[&[0, 0], &[0, 1]]), s(&[&[0, 1], &[1, 0]]), s(&[&[1, 0], &[1, 1]])],
        )
        .unwrap();
        let g = general_min(&b, &mu, &u).unwrap();
        assert!(g.argmin.is_partition());
        assert!(crate::coverlat::is_finer(&b, &g.argmin, &u));
        let direct = cond_entropy_partition(&b, &mu, &g.argmin).unwrap();
        assert!((direct - g.value).abs() < 1e-12);
        let (p, _) = product_min(&b, &mu, &u, &Limits::default()).unwrap();
        assert!(g.value <= p + 1e-12);
        let nu = markov_to_word(&b, &mu, 3).unwrap();
        let g3 = general_min(&b, &nu, &u).unwrap();
        assert!((g3.value - g.value).abs() < 1e-12);
    }

    #[test]
    fn enumeration_guard_reports_partial_minimum() {
        let b = full2();
        let mu = crate::measures::MarkovMeasure::new(&b, vec![vec![vec![0.5, 0.5]; 2]]).unwrap();
        let s = |ws: &[&[u16]]| ws.iter().map(|w| w.to_vec()).collect::<BTreeSet<_>>();
        let u = PositionedCover::product(
            &b,
            Window::new(0, 2),
            vec![s(&[&[0, 0], &[0, 1], &[1, 0]]), s(&[&[0, 1], &[1, 0], &[1, 1]])],
        )
        .unwrap();
        let limits = Limits { enum_max: 2, ..Limits::default() };
        match product_min(&b, &mu, &u, &limits) {
            Err(Error::EnumerationGuard { count: 4, limit: 2, partial_min: Some(_) }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
