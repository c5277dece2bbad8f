//! The power system `T^M` as a random SFT over `θ^M` on the alphabet of
//! admissible `M`-blocks.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::base::{Adjacency, Block, Symbol, SymbolicBundle, Window};
use crate::coverlat::{all_admissible, range_join, PositionedCover, Section};
use crate::error::{Error, Result};
use crate::measures::{FiberMeasure, MarkovMeasure};
use crate::Limits;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerSystem {
    pub m: usize,
    /// Block presentation; symbol `k` stands for `blocks[k]`.
    pub bundle: SymbolicBundle,
    pub blocks: Vec<Block>,
    /// `U_0^{M-1}` on block coordinates.
    pub cover: PositionedCover,
}

impl PowerSystem {
    /// Expand a block word into the original symbols.
    pub fn expand(&self, word: &[Symbol]) -> Block {
        word.iter()
            .flat_map(|&s| self.blocks[s as usize].iter().copied())
            .collect()
    }
}

/// Re-block the bundle into `M`-blocks and transport `U_0^{M-1}`.
pub fn power_system(
    bundle: &SymbolicBundle,
    u: &PositionedCover,
    m: usize,
    limits: &Limits,
) -> Result<PowerSystem> {
    assert!(m >= 1, "power_system needs M >= 1");
    let blocks: Vec<Block> = all_admissible(bundle, Window::new(0, m)).into_iter().collect();
    let limit = limits.block_alphabet_max.min(Symbol::MAX as usize);
    if blocks.len() > limit {
        return Err(Error::SizeGuard {
            what: "block alphabet",
            size: blocks.len() as u128,
            limit: limit as u128,
        });
    }
    let base = bundle.base().power(m);
    let per_fiber: Vec<BTreeSet<&Block>> = (0..bundle.omega_count())
        .map(|w| {
            let adm: BTreeSet<Block> = bundle.admissible_blocks(w, Window::new(0, m)).into_iter().collect();
            blocks.iter().filter(|b| adm.contains(*b)).collect()
        })
        .collect();
    let adjacency = (0..bundle.omega_count())
        .map(|w| {
            let next = bundle.base().theta_pow(w, m);
            let junction = bundle.adjacency(bundle.base().theta_pow(w, m - 1));
            Adjacency::from_fn(blocks.len(), |i, j| {
                let (b, c) = (&blocks[i], &blocks[j]);
                per_fiber[w].contains(b)
                    && per_fiber[next].contains(c)
                    && junction.allows(b[m - 1], c[0])
            })
        })
        .collect();
    let names = blocks.iter().map(|b| bundle.render(b)).collect();
    let power = SymbolicBundle::new_partial(base, names, adjacency)?;
    let joined = range_join(bundle, u, 0, m - 1, limits)?;
    let cover = transport_cover(bundle, &power, &blocks, &joined, m);
    Ok(PowerSystem {
        m,
        bundle: power,
        blocks,
        cover,
    })
}

fn transport_cover(
    bundle: &SymbolicBundle,
    power: &SymbolicBundle,
    blocks: &[Block],
    joined: &PositionedCover,
    m: usize,
) -> PositionedCover {
    let w = joined.window();
    let first = w.start / m;
    let last = w.end().div_ceil(m);
    let block_window = Window::new(first, last - first);
    let original = Window::new(first * m, (last - first) * m);
    let mut elements = vec![vec![Section::new(); bundle.omega_count()]; joined.len()];
    for omega in 0..bundle.omega_count() {
        let mem = joined.membership(omega);
        for word in power.admissible_blocks(omega, block_window) {
            let expanded: Block = word.iter().flat_map(|&s| blocks[s as usize].iter().copied()).collect();
            if let Some(ks) = mem.get(original.restrict(&expanded, &w)) {
                for &k in ks {
                    elements[k][omega].insert(word.clone());
                }
            }
        }
    }
    PositionedCover::from_parts(block_window, elements, joined.is_product_form())
}

/// The Markov measure seen through `M`-blocks.
pub fn transport_measure(
    bundle: &SymbolicBundle,
    system: &PowerSystem,
    mu: &MarkovMeasure,
) -> Result<MarkovMeasure> {
    let m = system.m;
    let d = system.blocks.len();
    let index: HashMap<&Block, usize> = system.blocks.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let base = bundle.base();
    let mut q = Vec::with_capacity(bundle.omega_count());
    let mut p = Vec::with_capacity(bundle.omega_count());
    for w in 0..bundle.omega_count() {
        let mut start = vec![0.0; d];
        for (b, x) in mu.marginal(bundle, w, Window::new(0, m))? {
            start[index[&b]] = x;
        }
        p.push(start);
        let junction = &mu.q()[base.theta_pow(w, m - 1)];
        let next = base.theta_pow(w, m);
        let live = system.bundle.adjacency(w);
        let mut rows = vec![vec![0.0; d]; d];
        for (i, b) in system.blocks.iter().enumerate() {
            if !live.row_live(i) {
                continue;
            }
            for (j, c) in system.blocks.iter().enumerate() {
                let mut x = junction[b[m - 1] as usize][c[0] as usize];
                let mut v = next;
                for pair in c.windows(2) {
                    x *= mu.q()[v][pair[0] as usize][pair[1] as usize];
                    v = base.theta_of(v);
                }
                rows[i][j] = x;
            }
        }
        q.push(rows);
    }
    MarkovMeasure::with_starts(&system.bundle, q, p)
}
