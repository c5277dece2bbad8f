//! Covers and partitions of the bundle as ω-indexed unions of cylinders.
//!
//! Every element is stored as one section per fiber: the set of words on
//! the cover's window that lie in the element. Sections are always
//! intersected with admissibility, so set operations never leave `E`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::base::{Block, SymbolicBundle, Window};
use crate::error::{Error, Result};
use crate::Limits;

pub type Section = BTreeSet<Block>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PositionedCover {
    window: Window,
    /// `elements[k][ω]` is the section of element `k` at fiber `ω`.
    elements: Vec<Vec<Section>>,
    /// Every element has the form `(Ω × U_k) ∩ E`.
    product_form: bool,
}

impl PositionedCover {
    /// Build a cover from per-fiber sections. Sections are intersected with
    /// admissibility and the covering property is checked.
    pub fn new(
        bundle: &SymbolicBundle,
        window: Window,
        sections: Vec<Vec<Section>>,
    ) -> Result<Self> {
        if window.len == 0 {
            return Err(Error::EmptySpan);
        }
        if sections.is_empty() {
            return Err(Error::Malformed("cover has no elements".into()));
        }
        let omegas = bundle.omega_count();
        let universes: Vec<Section> = (0..omegas)
            .map(|w| bundle.admissible_blocks(w, window).into_iter().collect())
            .collect();
        let mut elements = Vec::with_capacity(sections.len());
        for per_omega in sections {
            if per_omega.len() != omegas {
                return Err(Error::LengthMismatch(per_omega.len(), omegas));
            }
            let element: Vec<Section> = per_omega
                .into_iter()
                .zip(&universes)
                .map(|(s, u)| s.intersection(u).cloned().collect())
                .collect();
            elements.push(element);
        }
        for (w, universe) in universes.iter().enumerate() {
            for word in universe {
                if !elements.iter().any(|e| e[w].contains(word)) {
                    return Err(Error::UniverseUncovered {
                        omega: w,
                        word: bundle.render(word),
                    });
                }
            }
        }
        let product_form = detect_product_form(&elements, &universes);
        Ok(PositionedCover {
            window,
            elements,
            product_form,
        })
    }

    /// Cover whose element `k` is `(Ω × [raw_k]) ∩ E`.
    pub fn product(bundle: &SymbolicBundle, window: Window, raw: Vec<Section>) -> Result<Self> {
        let omegas = bundle.omega_count();
        let sections = raw.into_iter().map(|s| vec![s; omegas]).collect();
        let mut cover = Self::new(bundle, window, sections)?;
        cover.product_form = true;
        Ok(cover)
    }

    /// One element per word admissible on `window` in some fiber.
    pub fn cylinders(bundle: &SymbolicBundle, window: Window) -> Result<Self> {
        let raw = all_admissible(bundle, window)
            .into_iter()
            .map(|b| BTreeSet::from([b]))
            .collect();
        Self::product(bundle, window, raw)
    }

    /// The partition by the symbol at coordinate 0.
    pub fn zero_cylinders(bundle: &SymbolicBundle) -> Self {
        Self::cylinders(bundle, Window::new(0, 1)).expect("cylinders always cover")
    }

    /// The one-element cover `{E}`.
    pub fn trivial(bundle: &SymbolicBundle, window: Window) -> Result<Self> {
        Self::product(bundle, window, vec![all_admissible(bundle, window)])
    }

    pub(crate) fn from_parts(window: Window, elements: Vec<Vec<Section>>, product_form: bool) -> Self {
        PositionedCover {
            window,
            elements,
            product_form,
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Vec<Section>] {
        &self.elements
    }

    pub fn section(&self, k: usize, omega: usize) -> &Section {
        &self.elements[k][omega]
    }

    pub fn is_product_form(&self) -> bool {
        self.product_form
    }

    pub fn omega_count(&self) -> usize {
        self.elements.first().map_or(0, Vec::len)
    }

    /// Sections are pairwise disjoint in every fiber.
    pub fn is_partition(&self) -> bool {
        (0..self.omega_count()).all(|w| {
            let mut seen = BTreeSet::new();
            self.elements
                .iter()
                .all(|e| e[w].iter().all(|b| seen.insert(b)))
        })
    }

    /// Some element equals the whole fiber in every fiber.
    pub fn has_full_element(&self, bundle: &SymbolicBundle) -> bool {
        let sizes: Vec<usize> = (0..self.omega_count())
            .map(|w| bundle.admissible_blocks(w, self.window).len())
            .collect();
        self.elements
            .iter()
            .any(|e| e.iter().zip(&sizes).all(|(s, &n)| s.len() == n))
    }

    /// Indices of elements whose section at `omega` is nonempty.
    pub fn nonempty_at(&self, omega: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| !self.elements[k][omega].is_empty())
            .collect()
    }

    /// Map from each admissible window word of `omega` to the elements
    /// containing it.
    pub(crate) fn membership(&self, omega: usize) -> HashMap<&[u16], Vec<usize>> {
        let mut map: HashMap<&[u16], Vec<usize>> = HashMap::new();
        for (k, e) in self.elements.iter().enumerate() {
            for b in &e[omega] {
                map.entry(b.as_slice()).or_default().push(k);
            }
        }
        map
    }

    /// Sections lifted to a larger window.
    pub fn lift(&self, bundle: &SymbolicBundle, hull: Window) -> PositionedCover {
        assert!(hull.contains(&self.window), "lift target must contain the window");
        let mut elements = vec![vec![Section::new(); self.omega_count()]; self.len()];
        for w in 0..self.omega_count() {
            let mem = self.membership(w);
            for word in bundle.admissible_blocks(w, hull) {
                let inner = hull.restrict(&word, &self.window);
                if let Some(ks) = mem.get(inner) {
                    for &k in ks {
                        elements[k][w].insert(word.clone());
                    }
                }
            }
        }
        PositionedCover::from_parts(hull, elements, self.product_form)
    }

    /// Human-readable listing of the sections.
    pub fn describe(&self, bundle: &SymbolicBundle) -> String {
        let mut out = format!("window {}\n", self.window);
        for (k, e) in self.elements.iter().enumerate() {
            if self.product_form {
                let union: Section = e.iter().flatten().cloned().collect();
                out.push_str(&format!("  {k}: {}\n", render_set(bundle, &union)));
            } else {
                for (w, s) in e.iter().enumerate() {
                    out.push_str(&format!(
                        "  {k} @ {}: {}\n",
                        bundle.base().label(w),
                        render_set(bundle, s)
                    ));
                }
            }
        }
        out
    }
}

fn render_set(bundle: &SymbolicBundle, s: &Section) -> String {
    let words: Vec<String> = s.iter().map(|b| bundle.render(b)).collect();
    format!("{{{}}}", words.join(", "))
}

fn detect_product_form(elements: &[Vec<Section>], universes: &[Section]) -> bool {
    elements.iter().all(|e| {
        let union: Section = e.iter().flatten().cloned().collect();
        e.iter()
            .zip(universes)
            .all(|(s, u)| union.intersection(u).eq(s.iter()))
    })
}

/// Words admissible on `window` in at least one fiber, sorted.
pub fn all_admissible(bundle: &SymbolicBundle, window: Window) -> Section {
    (0..bundle.omega_count())
        .flat_map(|w| bundle.admissible_blocks(w, window))
        .collect()
}

/// Every element of `u` lies inside a single element of `v`, compared on
/// the common window hull.
pub fn is_finer(bundle: &SymbolicBundle, u: &PositionedCover, v: &PositionedCover) -> bool {
    let hull = u.window.hull(&v.window);
    // candidates[i]: elements of v that may still contain element i of u
    let mut candidates: Vec<Option<BTreeSet<usize>>> = vec![None; u.len()];
    for w in 0..bundle.omega_count() {
        let mu = u.membership(w);
        let mv = v.membership(w);
        for word in bundle.admissible_blocks(w, hull) {
            let Some(us) = mu.get(hull.restrict(&word, &u.window)) else {
                continue;
            };
            let vs: BTreeSet<usize> = mv
                .get(hull.restrict(&word, &v.window))
                .map(|x| x.iter().copied().collect())
                .unwrap_or_default();
            for &i in us {
                let c = candidates[i].get_or_insert_with(|| vs.clone());
                c.retain(|j| vs.contains(j));
                if c.is_empty() {
                    return false;
                }
            }
        }
    }
    true
}

/// `U ∨ V`: pairwise intersections on the window hull, ordered by
/// `(i, j)`. Pairs empty in every fiber are dropped.
pub fn join(bundle: &SymbolicBundle, u: &PositionedCover, v: &PositionedCover) -> PositionedCover {
    let hull = u.window.hull(&v.window);
    let omegas = bundle.omega_count();
    let mut cells: BTreeMap<(usize, usize), Vec<Section>> = BTreeMap::new();
    for w in 0..omegas {
        let mu = u.membership(w);
        let mv = v.membership(w);
        for word in bundle.admissible_blocks(w, hull) {
            let (Some(us), Some(vs)) = (
                mu.get(hull.restrict(&word, &u.window)),
                mv.get(hull.restrict(&word, &v.window)),
            ) else {
                continue;
            };
            for &i in us {
                for &j in vs {
                    cells
                        .entry((i, j))
                        .or_insert_with(|| vec![Section::new(); omegas])[w]
                        .insert(word.clone());
                }
            }
        }
    }
    PositionedCover::from_parts(
        hull,
        cells.into_values().collect(),
        u.product_form && v.product_form,
    )
}

/// `Θ^{-i} U`: the section at ω is the section of `U` at `θ^i ω`, placed
/// `i` coordinates to the right.
pub fn pullback(bundle: &SymbolicBundle, u: &PositionedCover, i: usize) -> PositionedCover {
    let base = bundle.base();
    let elements = u
        .elements
        .iter()
        .map(|e| {
            (0..e.len())
                .map(|w| e[base.theta_pow(w, i)].clone())
                .collect()
        })
        .collect();
    PositionedCover::from_parts(u.window.shifted(i), elements, u.product_form)
}

/// `U_M^N = ⋁_{i=M}^{N} Θ^{-i} U`.
pub fn range_join(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    m: usize,
    n: usize,
    limits: &Limits,
) -> Result<PositionedCover> {
    assert!(m <= n, "range_join needs M <= N");
    let span = u.window.start + n + u.window.len;
    if span > limits.horizon_max {
        return Err(Error::SizeGuard {
            what: "horizon",
            size: span as u128,
            limit: limits.horizon_max as u128,
        });
    }
    let mut acc = pullback(bundle, u, m);
    for i in m + 1..=n {
        let tuples = acc.len() as u128 * u.len() as u128;
        if tuples > limits.join_max {
            return Err(Error::SizeGuard {
                what: "join index tuples",
                size: tuples,
                limit: limits.join_max,
            });
        }
        acc = join(bundle, &acc, &pullback(bundle, u, i));
    }
    Ok(acc)
}

/// `U_0^{n-1}` for `n = 1..=nmax`, each built from the previous one.
pub fn range_join_prefixes(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    nmax: usize,
    limits: &Limits,
) -> Result<Vec<PositionedCover>> {
    let span = u.window.start + nmax.saturating_sub(1) + u.window.len;
    if span > limits.horizon_max {
        return Err(Error::SizeGuard {
            what: "horizon",
            size: span as u128,
            limit: limits.horizon_max as u128,
        });
    }
    let mut out: Vec<PositionedCover> = Vec::with_capacity(nmax);
    for i in 0..nmax {
        let next = match out.last() {
            None => u.clone(),
            Some(acc) => {
                let tuples = acc.len() as u128 * u.len() as u128;
                if tuples > limits.join_max {
                    return Err(Error::SizeGuard {
                        what: "join index tuples",
                        size: tuples,
                        limit: limits.join_max,
                    });
                }
                join(bundle, acc, &pullback(bundle, u, i))
            }
        };
        out.push(next);
    }
    Ok(out)
}

/// Lazy, lexicographic enumeration of the product-form partitions finer
/// than a product-form cover. Each word admissible somewhere on the window
/// is assigned to one element containing it.
pub struct ProductPartitions {
    window: Window,
    element_count: usize,
    universe: Vec<Block>,
    choices: Vec<Vec<usize>>,
    /// Per fiber, the admissible subset of `universe` as indices.
    fiber_words: Vec<Vec<usize>>,
    counters: Vec<usize>,
    total: u128,
    done: bool,
}

pub fn product_partitions_finer(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
) -> Result<ProductPartitions> {
    if !u.product_form {
        return Err(Error::NotProductForm);
    }
    let universe: Vec<Block> = all_admissible(bundle, u.window).into_iter().collect();
    let choices: Vec<Vec<usize>> = universe
        .iter()
        .map(|b| {
            (0..u.len())
                .filter(|&k| u.elements[k].iter().any(|s| s.contains(b)))
                .collect()
        })
        .collect();
    let total = choices
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    let index: HashMap<&Block, usize> = universe.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let fiber_words = (0..bundle.omega_count())
        .map(|w| {
            bundle
                .admissible_blocks(w, u.window)
                .iter()
                .map(|b| index[b])
                .collect()
        })
        .collect();
    Ok(ProductPartitions {
        window: u.window,
        element_count: u.len(),
        counters: vec![0; universe.len()],
        universe,
        choices,
        fiber_words,
        total,
        done: false,
    })
}

impl ProductPartitions {
    /// Number of partitions the enumeration yields.
    pub fn total(&self) -> u128 {
        self.total
    }

    /// Words admissible somewhere on the window, in enumeration order.
    pub fn universe(&self) -> &[Block] {
        &self.universe
    }

    /// For each universe word, the elements that contain it.
    pub fn choices(&self) -> &[Vec<usize>] {
        &self.choices
    }

    /// Per fiber, the universe indices admissible there.
    pub fn fiber_words(&self) -> &[Vec<usize>] {
        &self.fiber_words
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    /// The partition that puts word `i` in element `choices[i][pick[i]]`.
    pub fn assemble(&self, pick: &[usize]) -> PositionedCover {
        let omegas = self.fiber_words.len();
        let mut elements = vec![vec![Section::new(); omegas]; self.element_count];
        for (w, words) in self.fiber_words.iter().enumerate() {
            for &i in words {
                let k = self.choices[i][pick[i]];
                elements[k][w].insert(self.universe[i].clone());
            }
        }
        PositionedCover::from_parts(self.window, elements, true)
    }
}

/// Step an odometer over `choices`, first word most significant. Returns
/// false once every assignment has been visited.
pub fn advance_pick(pick: &mut [usize], choices: &[Vec<usize>]) -> bool {
    for i in (0..pick.len()).rev() {
        pick[i] += 1;
        if pick[i] < choices[i].len() {
            return true;
        }
        pick[i] = 0;
    }
    false
}

impl Iterator for ProductPartitions {
    type Item = PositionedCover;

    fn next(&mut self) -> Option<PositionedCover> {
        if self.done {
            return None;
        }
        let out = self.assemble(&self.counters);
        self.done = !advance_pick(&mut self.counters, &self.choices);
        Some(out)
    }
}
