//! The individual checks. Each one appends verdicts for a case (or for
//! its own random draws); errors from size guards become skips.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use serde_json::{json, Value};

use crate::base::{validate, Block, SymbolicBundle, Window};
use crate::covercomb::{
    cover_count, exact_set_cover, global_min_subcover_count, maximal_multi_separated, min_subcover_count,
};
use crate::coverlat::{is_finer, join, product_partitions_finer, pullback, range_join, PositionedCover, Section};
use crate::entropy::{
    cell_masses, cond_entropy_partition, cover_complexity, cover_cond_entropy, general_min, h_minus_estimate,
    h_partition_rate, h_plus_estimate, htop_estimate, lemma7_holds, power_system, shannon_unchecked,
    subcover_partition, transport_measure, Mode,
};
use crate::error::{Error, Result};
use crate::measures::{
    maximize_partition_entropy, misiurewicz_witness, mix, Distribution, FiberMeasure, MarkovMeasure, Objective,
    WordMeasure,
};

use super::{Case, CheckKind, Fault, SuiteConfig};

/// One evaluated property instance.
#[derive(Clone, Debug)]
pub(crate) struct Sample {
    pub holds: bool,
    /// Signed slack; negative means violated.
    pub margin: Option<f64>,
    pub inputs: Value,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub(crate) enum Verdict {
    Checked(Sample),
    Skipped,
}

pub(crate) struct Ctx<'a> {
    pub config: &'a SuiteConfig,
    pub case_index: usize,
    /// Case receiving the planted fault, if any.
    pub fault_case: Option<usize>,
}

impl Ctx<'_> {
    fn tol(&self) -> f64 {
        self.config.tolerances.exact
    }

    fn nmax(&self) -> usize {
        self.config.caps.nmax
    }
}

type CaseCheck = fn(&Ctx<'_>, &Case, &mut ChaCha8Rng, &mut Vec<Verdict>) -> Result<()>;
type DrawCheck = fn(&Ctx<'_>, &mut ChaCha8Rng, &mut Vec<Verdict>) -> Result<()>;

#[derive(Clone, Copy)]
pub(crate) enum Scope {
    PerCase(CaseCheck),
    Draws(DrawCheck),
}

pub(crate) struct CheckDef {
    pub id: &'static str,
    pub kind: CheckKind,
    pub description: &'static str,
    pub scope: Scope,
}

pub(crate) const CHECKS: &[CheckDef] = &[
    CheckDef {
        id: "instance-valid",
        kind: CheckKind::Exact,
        description: "bundle passes structural validation",
        scope: Scope::PerCase(instance_valid),
    },
    CheckDef {
        id: "measure-invariance",
        kind: CheckKind::Exact,
        description: "stationary start vectors make every measure invariant",
        scope: Scope::PerCase(measure_invariance),
    },
    CheckDef {
        id: "lattice",
        kind: CheckKind::Exact,
        description: "joins refine their factors; pullback commutes with join; range joins split",
        scope: Scope::PerCase(lattice),
    },
    CheckDef {
        id: "set-cover-exact",
        kind: CheckKind::Exact,
        description: "minimal subcover count equals brute force",
        scope: Scope::PerCase(set_cover_exact),
    },
    CheckDef {
        id: "entropy-bounds",
        kind: CheckKind::Exact,
        description: "0 <= H(U|F) <= ln N(U)",
        scope: Scope::PerCase(entropy_bounds),
    },
    CheckDef {
        id: "refinement-monotone",
        kind: CheckKind::Exact,
        description: "finer covers have larger conditional entropy",
        scope: Scope::PerCase(refinement_monotone),
    },
    CheckDef {
        id: "join-subadditive",
        kind: CheckKind::Exact,
        description: "H(U v V|F) <= H(U|F) + H(V|F)",
        scope: Scope::PerCase(join_subadditive),
    },
    CheckDef {
        id: "shift-identity",
        kind: CheckKind::Exact,
        description: "H_nu(pullback U|F) = H_{pushforward nu}(U|F) in general mode",
        scope: Scope::PerCase(shift_identity),
    },
    CheckDef {
        id: "shannon-perturbation",
        kind: CheckKind::Exact,
        description: "moving mass off the smallest coordinate lowers entropy",
        scope: Scope::Draws(shannon_perturbation),
    },
    CheckDef {
        id: "complexity-bound",
        kind: CheckKind::Exact,
        description: "H(U_0^{n-1}|F) <= H(T,U,n)",
        scope: Scope::PerCase(complexity_bound),
    },
    CheckDef {
        id: "subcover-partition",
        kind: CheckKind::Exact,
        description: "partition built from per-fiber minimal subcovers refines U with at most N(T,w,U,1) charged cells",
        scope: Scope::PerCase(subcover_partition_cells),
    },
    CheckDef {
        id: "mixture-concavity",
        kind: CheckKind::Exact,
        description: "0 <= H_mix - a H_nu - (1-a) H_eta <= h(a)",
        scope: Scope::PerCase(mixture_concavity),
    },
    CheckDef {
        id: "separated-set",
        kind: CheckKind::Exact,
        description: "maximal multi-separated sets are separated, non-extendable and at least floor(N/K) large",
        scope: Scope::PerCase(separated_set),
    },
    CheckDef {
        id: "witness-chains",
        kind: CheckKind::Exact,
        description: "per-fiber, integrated and concavity chains of the separated-set measures",
        scope: Scope::PerCase(witness_chains),
    },
    CheckDef {
        id: "minus-below-plus",
        kind: CheckKind::Exact,
        description: "h- upper bound <= h+ upper bound at every horizon",
        scope: Scope::PerCase(minus_below_plus),
    },
    CheckDef {
        id: "power-identity",
        kind: CheckKind::Exact,
        description: "H of the M-block system at k equals H of the base system at kM",
        scope: Scope::PerCase(power_identity),
    },
    CheckDef {
        id: "power-plus-trend",
        kind: CheckKind::Soft,
        description: "(1/M) h+ of the M-block system does not grow with M",
        scope: Scope::PerCase(power_plus_trend),
    },
    CheckDef {
        id: "variational-gap",
        kind: CheckKind::Soft,
        description: "measure search gets close to the topological entropy of a partition",
        scope: Scope::PerCase(variational_gap),
    },
];

fn le(lhs: f64, rhs: f64, tol: f64, inputs: Value) -> Verdict {
    Verdict::Checked(Sample {
        holds: lhs <= rhs + tol,
        margin: Some(rhs - lhs),
        detail: format!("{lhs} <= {rhs}"),
        inputs,
    })
}

fn eq(lhs: f64, rhs: f64, tol: f64, inputs: Value) -> Verdict {
    let diff = (lhs - rhs).abs();
    Verdict::Checked(Sample {
        holds: diff <= tol,
        margin: Some(-diff),
        detail: format!("{lhs} == {rhs}"),
        inputs,
    })
}

fn truth(holds: bool, detail: impl Into<String>, inputs: Value) -> Verdict {
    Verdict::Checked(Sample {
        holds,
        margin: None,
        detail: detail.into(),
        inputs,
    })
}

/// Guard errors mean the case is too large to decide, not that it fails.
pub(crate) fn verdict_for_error(e: Error) -> Verdict {
    match e {
        Error::SizeGuard { .. } | Error::EnumerationGuard { .. } => Verdict::Skipped,
        other => Verdict::Checked(Sample {
            holds: false,
            margin: None,
            inputs: Value::Null,
            detail: format!("error: {other}"),
        }),
    }
}

fn modes(u: &PositionedCover) -> Vec<Mode> {
    if u.is_product_form() {
        vec![Mode::General, Mode::Product]
    } else {
        vec![Mode::General]
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::General => "general",
        Mode::Product => "product",
    }
}

/// Run `f`, turning a guard error into a skip and any other error into a
/// failed verdict, then carry on.
fn attempt(out: &mut Vec<Verdict>, f: impl FnOnce(&mut Vec<Verdict>) -> Result<()>) {
    if let Err(e) = f(out) {
        out.push(verdict_for_error(e));
    }
}

fn instance_valid(_: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let d = validate(&case.bundle);
    out.push(truth(d.passed(), format!("{:?}", d.violations), Value::Null));
    Ok(())
}

/// Move all mass of one positive transition onto another allowed one, in
/// the row where this moves the most probability.
pub(crate) fn flip_transition(bundle: &SymbolicBundle, mu: &MarkovMeasure) -> Result<Option<MarkovMeasure>> {
    let d = bundle.alphabet_size();
    let mut best: Option<(f64, usize, usize, usize, usize)> = None;
    for w in 0..bundle.omega_count() {
        let a = bundle.adjacency(w);
        for i in 0..d {
            let allowed: Vec<usize> = (0..d).filter(|&j| a.allows(i as u16, j as u16)).collect();
            let Some(&from) = allowed.iter().find(|&&j| mu.q()[w][i][j] > 0.0) else {
                continue;
            };
            let Some(&to) = allowed.iter().find(|&&j| j != from) else {
                continue;
            };
            let weight = mu.starts()[w][i] * mu.q()[w][i][from];
            if weight > 1e-6 && best.is_none_or(|b| weight > b.0) {
                best = Some((weight, w, i, from, to));
            }
        }
    }
    let Some((_, w, i, from, to)) = best else {
        return Ok(None);
    };
    let mut q = mu.q().to_vec();
    q[w][i][to] += q[w][i][from];
    q[w][i][from] = 0.0;
    MarkovMeasure::with_starts(bundle, q, mu.starts().to_vec()).map(Some)
}

fn measure_invariance(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let planted = ctx.config.inject_fault == Some(Fault::FlipTransition) && ctx.fault_case == Some(ctx.case_index);
    for (k, (name, mu)) in case.measures.iter().enumerate() {
        let flipped = if planted && k == 0 { flip_transition(&case.bundle, mu)? } else { None };
        let mu = flipped.as_ref().unwrap_or(mu);
        let r = mu.invariance_residual(&case.bundle);
        let inputs = json!({ "measure": name, "planted_fault": planted && k == 0, "Q": mu.q() });
        out.push(le(r, 0.0, ctx.config.tolerances.invariance, inputs));
    }
    Ok(())
}

fn element_set(u: &PositionedCover) -> (Window, BTreeSet<Vec<Section>>) {
    (u.window(), u.elements().iter().cloned().collect())
}

fn lattice(_: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    for (nu, u) in &case.covers {
        for (nv, v) in &case.covers {
            let inputs = json!({ "u": nu, "v": nv });
            let j = join(b, u, v);
            out.push(truth(
                is_finer(b, &j, u) && is_finer(b, &j, v),
                "join refines both factors",
                inputs.clone(),
            ));
            let lhs = pullback(b, &j, 1);
            let rhs = join(b, &pullback(b, u, 1), &pullback(b, v, 1));
            out.push(truth(element_set(&lhs) == element_set(&rhs), "pullback commutes with join", inputs));
        }
        attempt(out, |out| {
            let limits = &case_limits();
            let whole = range_join(b, u, 0, 2, limits)?;
            let split = join(b, &range_join(b, u, 0, 1, limits)?, &range_join(b, u, 2, 2, limits)?);
            out.push(truth(
                element_set(&whole) == element_set(&split),
                "range join splits",
                json!({ "u": nu }),
            ));
            Ok(())
        });
    }
    Ok(())
}

fn case_limits() -> crate::Limits {
    crate::Limits::default()
}

fn brute_force_cover(size: usize, sets: &[BTreeSet<usize>]) -> Option<usize> {
    (0u32..1 << sets.len())
        .filter(|mask| {
            let mut hit = BTreeSet::new();
            for (k, s) in sets.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    hit.extend(s.iter().copied());
                }
            }
            hit.len() == size
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
}

fn set_cover_exact(_: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    const BRUTE_MAX: usize = 14;
    let b = &case.bundle;
    let limits = case_limits();
    for (name, u) in &case.covers {
        for n in 1..=2 {
            attempt(out, |out| {
                let j = range_join(b, u, 0, n - 1, &limits)?;
                if j.len() > BRUTE_MAX {
                    out.push(Verdict::Skipped);
                    return Ok(());
                }
                for w in 0..b.omega_count() {
                    let universe = b.admissible_blocks(w, j.window());
                    let sets: Vec<BTreeSet<usize>> = (0..j.len())
                        .map(|k| {
                            let s = j.section(k, w);
                            (0..universe.len()).filter(|&i| s.contains(&universe[i])).collect()
                        })
                        .collect();
                    let want = brute_force_cover(universe.len(), &sets).expect("covers cover");
                    let got = min_subcover_count(b, w, &j, &limits)?;
                    let mut bits = Vec::new();
                    for s in &sets {
                        let mut f = fixedbitset::FixedBitSet::with_capacity(universe.len());
                        f.extend(s.iter().copied());
                        bits.push(f);
                    }
                    let chosen = exact_set_cover(universe.len(), &bits, limits.cover_elems_max)?;
                    let chosen_ok = chosen.is_some_and(|c| {
                        let mut hit = BTreeSet::new();
                        for k in &c {
                            hit.extend(sets[*k].iter().copied());
                        }
                        c.len() == want && hit.len() == universe.len()
                    });
                    out.push(truth(
                        got == want && chosen_ok,
                        format!("solver {got}, brute force {want}"),
                        json!({ "cover": name, "n": n, "omega": w }),
                    ));
                }
                Ok(())
            });
        }
    }
    Ok(())
}

fn joined_covers(case: &Case, nmax: usize) -> Vec<(String, usize, PositionedCover)> {
    let limits = case_limits();
    let mut out = Vec::new();
    for (name, u) in &case.covers {
        for n in 1..=nmax {
            match range_join(&case.bundle, u, 0, n - 1, &limits) {
                Ok(j) => out.push((name.clone(), n, j)),
                Err(_) => break,
            }
        }
    }
    out
}

fn entropy_bounds(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    for (cname, n, j) in joined_covers(case, ctx.nmax()) {
        for (mname, mu) in &case.measures {
            for mode in modes(&j) {
                attempt(out, |out| {
                    let h = cover_cond_entropy(b, mu, &j, mode, &limits)?;
                    let count = global_min_subcover_count(b, &j, &limits)?;
                    let inputs = json!({ "cover": cname, "n": n, "measure": mname, "mode": mode_name(mode) });
                    out.push(le(0.0, h, ctx.tol(), inputs.clone()));
                    out.push(le(h, (count as f64).ln(), ctx.tol(), inputs));
                    Ok(())
                });
            }
        }
    }
    Ok(())
}

fn refinement_monotone(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    let mut pairs: Vec<(String, PositionedCover, String, PositionedCover)> = Vec::new();
    for (nu, u) in &case.covers {
        for (nv, v) in &case.covers {
            pairs.push((format!("{nu} v {nv}"), join(b, u, v), nu.clone(), u.clone()));
            if nu != nv && is_finer(b, u, v) {
                pairs.push((nu.clone(), u.clone(), nv.clone(), v.clone()));
            }
        }
        if let Ok(j) = range_join(b, u, 0, 1, &limits) {
            pairs.push((format!("{nu}_0^1"), j, nu.clone(), u.clone()));
        }
    }
    for (fine_name, fine, coarse_name, coarse) in &pairs {
        let mut ms = vec![Mode::General];
        // product-mode minima depend on the window, so compare like with like
        if fine.is_product_form() && coarse.is_product_form() && fine.window() == coarse.window() {
            ms.push(Mode::Product);
        }
        for (mname, mu) in &case.measures {
            for &mode in &ms {
                attempt(out, |out| {
                    let hf = cover_cond_entropy(b, mu, fine, mode, &limits)?;
                    let hc = cover_cond_entropy(b, mu, coarse, mode, &limits)?;
                    let inputs =
                        json!({ "finer": fine_name, "coarser": coarse_name, "measure": mname, "mode": mode_name(mode) });
                    out.push(le(hc, hf, ctx.tol(), inputs));
                    Ok(())
                });
            }
        }
    }
    Ok(())
}

fn join_subadditive(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    for (i, (nu, u)) in case.covers.iter().enumerate() {
        for (nv, v) in &case.covers[i..] {
            let j = join(b, u, v);
            let mut ms = vec![Mode::General];
            if j.is_product_form() && u.is_product_form() && v.is_product_form() && u.window() == v.window() {
                ms.push(Mode::Product);
            }
            for (mname, mu) in &case.measures {
                for &mode in &ms {
                    attempt(out, |out| {
                        let hj = cover_cond_entropy(b, mu, &j, mode, &limits)?;
                        let hu = cover_cond_entropy(b, mu, u, mode, &limits)?;
                        let hv = cover_cond_entropy(b, mu, v, mode, &limits)?;
                        let inputs = json!({ "u": nu, "v": nv, "measure": mname, "mode": mode_name(mode) });
                        out.push(le(hj, hu + hv, ctx.tol(), inputs));
                        Ok(())
                    });
                }
            }
        }
    }
    Ok(())
}

/// A random word measure on `[0, horizon)` with some zero weights.
pub(crate) fn random_word_measure(rng: &mut ChaCha8Rng, bundle: &SymbolicBundle, horizon: usize) -> Result<WordMeasure> {
    let weights: Vec<Distribution> = (0..bundle.omega_count())
        .map(|w| {
            let words = bundle.admissible_blocks(w, Window::new(0, horizon));
            let mut raw: Vec<f64> = words
                .iter()
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { Exp1.sample(rng) })
                .collect();
            if raw.iter().all(|&x| x == 0.0) {
                let i = rng.random_range(0..raw.len());
                raw[i] = 1.0;
            }
            let total: f64 = raw.iter().sum();
            words.into_iter().zip(raw).map(|(b, x)| (b, x / total)).collect()
        })
        .collect();
    WordMeasure::new(bundle, horizon, weights)
}

fn shift_identity(ctx: &Ctx<'_>, case: &Case, rng: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    for (name, u) in &case.covers {
        for i in 1..=2 {
            let horizon = u.window().end() + i;
            if horizon > ctx.config.caps.horizon {
                continue;
            }
            attempt(out, |out| {
                let nu = random_word_measure(rng, b, horizon)?;
                let mut pushed = nu.clone();
                for _ in 0..i {
                    pushed = pushed.pushforward(b)?;
                }
                let lhs = general_min(b, &nu, &pullback(b, u, i))?.value;
                let rhs = general_min(b, &pushed, u)?.value;
                out.push(eq(lhs, rhs, ctx.tol(), json!({ "cover": name, "i": i, "horizon": horizon })));
                Ok(())
            });
        }
    }
    Ok(())
}

/// A tuple satisfying every hypothesis of the perturbation inequality.
pub fn random_perturbation(rng: &mut impl Rng, kmax: usize) -> (Vec<f64>, Vec<f64>) {
    let k = rng.random_range(2..=kmax.max(2));
    let raw: Vec<f64> = (0..=k).map(|_| Exp1.sample(rng)).map(|x: f64| x + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw[..k].iter().map(|x| x / total).collect();
    p.sort_by(f64::total_cmp);
    let d1 = p[0] * rng.random_range(0.01..0.99);
    let w: Vec<f64> = (1..k).map(|_| Exp1.sample(rng)).collect();
    let wsum: f64 = w.iter().sum();
    let mut delta = vec![d1];
    delta.extend(w.iter().map(|x| d1 * x / wsum));
    let rest: f64 = delta[1..k - 1].iter().sum();
    delta[k - 1] = (d1 - rest).max(0.0);
    (p, delta)
}

fn shannon_perturbation(ctx: &Ctx<'_>, rng: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    for _ in 0..ctx.config.counts.tuples {
        let (p, delta) = random_perturbation(rng, 6);
        let inputs = json!({ "p": p, "delta": delta });
        match lemma7_holds(&p, &delta) {
            Ok(v) => out.push(Verdict::Checked(Sample {
                holds: v.holds && v.margin > 0.0,
                margin: Some(v.margin),
                detail: format!("margin {}", v.margin),
                inputs,
            })),
            Err(e) => out.push(truth(false, e.to_string(), inputs)),
        }
    }
    Ok(())
}

fn complexity_bound(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    for (name, u) in &case.covers {
        for n in 1..=ctx.nmax() {
            attempt(out, |out| {
                let j = range_join(b, u, 0, n - 1, &limits)?;
                let top = cover_complexity(b, u, n, &limits)?;
                for (mname, mu) in &case.measures {
                    let h = general_min(b, mu, &j)?.value;
                    out.push(le(h, top, ctx.tol(), json!({ "cover": name, "n": n, "measure": mname })));
                }
                Ok(())
            });
        }
    }
    Ok(())
}

fn subcover_partition_cells(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    for (name, u) in &case.covers {
        attempt(out, |out| {
            let part = subcover_partition(b, u, &limits)?;
            let counts = (0..b.omega_count())
                .map(|w| cover_count(b, w, u, 1, &limits))
                .collect::<Result<Vec<_>>>()?;
            let sup = counts.iter().copied().max().unwrap_or(0);
            let top = cover_complexity(b, u, 1, &limits)?;
            out.push(truth(
                part.is_partition() && is_finer(b, &part, u),
                "partition refining the cover",
                json!({ "cover": name }),
            ));
            for (mname, mu) in &case.measures {
                let gm = general_min(b, mu, u)?.value;
                let hp = cond_entropy_partition(b, mu, &part)?;
                let inputs = json!({ "cover": name, "measure": mname, "counts": counts });
                out.push(le(gm, hp, ctx.tol(), inputs.clone()));
                out.push(le(hp, top, ctx.tol(), inputs.clone()));
                for (w, &count) in counts.iter().enumerate() {
                    let dist = mu.marginal(b, w, u.window())?;
                    let charged = cell_masses(&part, w, &dist).iter().filter(|&&x| x > 0.0).count();
                    out.push(truth(
                        charged <= count && count <= sup,
                        format!("fiber {w}: {charged} charged cells, N = {count}, sup N = {sup}"),
                        inputs.clone(),
                    ));
                }
            }
            Ok(())
        });
    }
    Ok(())
}

fn phi_pair(a: f64) -> f64 {
    shannon_unchecked(&[a, 1.0 - a])
}

fn mixture_concavity(ctx: &Ctx<'_>, case: &Case, rng: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    let parts: Vec<&(String, PositionedCover)> = case.partitions().collect();
    if parts.is_empty() {
        return Ok(());
    }
    for _ in 0..ctx.config.counts.mixtures {
        let (name, r) = parts.choose(rng).expect("nonempty");
        let steps = rng.random_range(1..=3);
        attempt(out, |out| {
            let rn = range_join(b, r, 0, steps - 1, &limits)?;
            let horizon = rn.window().end() + rng.random_range(0..=1);
            if horizon > ctx.config.caps.horizon.min(6) {
                out.push(Verdict::Skipped);
                return Ok(());
            }
            let a: f64 = rng.random_range(0.01..0.99);
            let nu = random_word_measure(rng, b, horizon)?;
            let eta = random_word_measure(rng, b, horizon)?;
            let m = mix(&[nu.clone(), eta.clone()], &[a, 1.0 - a])?;
            let hm = cond_entropy_partition(b, &m, &rn)?;
            let hn = cond_entropy_partition(b, &nu, &rn)?;
            let he = cond_entropy_partition(b, &eta, &rn)?;
            let defect = hm - a * hn - (1.0 - a) * he;
            let cap = phi_pair(a);
            let tol = ctx.tol();
            out.push(Verdict::Checked(Sample {
                holds: defect >= -tol && defect <= cap + tol,
                margin: Some(defect.min(cap - defect)),
                detail: format!("0 <= {defect} <= {cap}"),
                inputs: json!({ "partition": name, "steps": steps, "horizon": horizon, "a": a }),
            }));
            Ok(())
        });
    }
    Ok(())
}

fn product_covers(case: &Case) -> impl Iterator<Item = &(String, PositionedCover)> {
    case.covers.iter().filter(|(_, u)| u.is_product_form())
}

fn separated_set(_: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    for (name, u) in product_covers(case) {
        for kk in 1..=2 {
            let parts: Vec<PositionedCover> = product_partitions_finer(b, u)?.take(kk).collect();
            if parts.len() < kk {
                continue;
            }
            for n in 1..=2 {
                attempt(out, |out| {
                    let joined: Vec<PositionedCover> = parts
                        .iter()
                        .map(|r| range_join(b, r, 0, n - 1, &limits))
                        .collect::<Result<_>>()?;
                    for w in 0..b.omega_count() {
                        let s = maximal_multi_separated(b, w, &parts, u, n, &limits)?;
                        let atoms = |word: &Block| -> Vec<usize> {
                            joined
                                .iter()
                                .map(|j| {
                                    let piece = s.window.restrict(word, &j.window());
                                    (0..j.len())
                                        .find(|&k| j.section(k, w).iter().any(|x| x.as_slice() == piece))
                                        .expect("partitions cover")
                                })
                                .collect()
                        };
                        let ids: Vec<Vec<usize>> = s.words.iter().map(atoms).collect();
                        let clash = |x: &[usize], y: &[usize]| x.iter().zip(y).any(|(a, b)| a == b);
                        let separated = (0..ids.len()).all(|i| (i + 1..ids.len()).all(|j| !clash(&ids[i], &ids[j])));
                        let chosen: BTreeSet<&Block> = s.words.iter().collect();
                        let maximal = b
                            .admissible_blocks(w, s.window)
                            .iter()
                            .filter(|x| !chosen.contains(x))
                            .all(|x| {
                                let a = atoms(x);
                                ids.iter().any(|y| clash(&a, y))
                            });
                        let inputs = json!({ "cover": name, "k": kk, "n": n, "omega": w });
                        out.push(truth(separated && maximal, format!("separated {separated}, maximal {maximal}"), inputs.clone()));
                        out.push(le(s.bound as f64, s.words.len() as f64, 0.0, inputs));
                    }
                    Ok(())
                });
            }
        }
    }
    Ok(())
}

fn witness_chains(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = crate::Limits {
        horizon_max: ctx.config.caps.horizon,
        ..case_limits()
    };
    for (name, u) in product_covers(case) {
        for n in 1..=2 {
            let horizon = n * n + 2 * n + u.window().end() - 1;
            if horizon > ctx.config.caps.horizon {
                continue;
            }
            attempt(out, |out| {
                let rep = misiurewicz_witness(b, u, n, &limits)?;
                for c in rep.fiber_checks.iter().chain(&rep.integrated_checks).chain(&rep.concavity_checks) {
                    let inputs = json!({ "cover": name, "n": n, "chain": c });
                    out.push(Verdict::Checked(Sample {
                        holds: c.holds,
                        margin: Some(c.margin()).filter(|m| m.is_finite()),
                        detail: format!("{} chain {:?}", c.what, c.values),
                        inputs,
                    }));
                }
                out.push(le(rep.shift_identity_gap, 0.0, ctx.tol(), json!({ "cover": name, "n": n, "what": "shift identity" })));
                Ok(())
            });
        }
    }
    Ok(())
}

fn minus_below_plus(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    let nmax = ctx.nmax().min(3);
    for (name, u) in product_covers(case) {
        for (mname, mu) in &case.measures {
            attempt(out, |out| {
                let minus = h_minus_estimate(b, mu, u, nmax, Mode::General, &limits)?;
                let parts = product_partitions_finer(b, u)?;
                if parts.total() > limits.enum_max {
                    out.push(Verdict::Skipped);
                    return Ok(());
                }
                let mut plus = f64::INFINITY;
                for r in parts {
                    plus = plus.min(h_partition_rate(b, mu, &r, nmax, &limits)?.certified_upper);
                }
                out.push(le(minus.certified_upper, plus, ctx.tol(), json!({ "cover": name, "measure": mname, "nmax": nmax })));
                Ok(())
            });
        }
    }
    Ok(())
}

fn power_identity(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    for (name, u) in &case.covers {
        for m in 2..=3 {
            attempt(out, |out| {
                let sys = power_system(b, u, m, &limits)?;
                for (mname, mu) in &case.measures {
                    let moved = transport_measure(b, &sys, mu)?;
                    for k in 1..=2 {
                        if k * m > ctx.nmax().max(2) {
                            break;
                        }
                        let blocks = range_join(&sys.bundle, &sys.cover, 0, k - 1, &limits)?;
                        let base = range_join(b, u, 0, k * m - 1, &limits)?;
                        let lhs = general_min(&sys.bundle, &moved, &blocks)?.value;
                        let rhs = general_min(b, mu, &base)?.value;
                        out.push(eq(lhs, rhs, ctx.tol(), json!({ "cover": name, "measure": mname, "M": m, "k": k })));
                    }
                }
                Ok(())
            });
        }
    }
    Ok(())
}

fn power_plus_trend(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    const ENUM_MAX: u128 = 2_000;
    let b = &case.bundle;
    let limits = crate::Limits {
        enum_max: ENUM_MAX,
        ..case_limits()
    };
    let nmax = ctx.nmax().min(3);
    for (name, u) in product_covers(case) {
        for (mname, mu) in &case.measures {
            attempt(out, |out| {
                let one = h_plus_estimate(b, mu, u, nmax, &limits)?.value;
                let sys = power_system(b, u, 2, &limits)?;
                let moved = transport_measure(b, &sys, mu)?;
                let two = h_plus_estimate(&sys.bundle, &moved, &sys.cover, nmax, &limits)?.value / 2.0;
                let inputs = json!({ "cover": name, "measure": mname, "M1": one, "M2": two });
                out.push(le(two, one, ctx.config.tolerances.trend_slack, inputs));
                Ok(())
            });
        }
    }
    Ok(())
}

fn variational_gap(ctx: &Ctx<'_>, case: &Case, _: &mut ChaCha8Rng, out: &mut Vec<Verdict>) -> Result<()> {
    let b = &case.bundle;
    let limits = case_limits();
    let budget = ctx.config.counts.optimizer_budget;
    if budget == 0 {
        return Ok(());
    }
    let seed = case.seed.unwrap_or(ctx.config.seed);
    for (name, r) in case.partitions() {
        attempt(out, |out| {
            let rep = maximize_partition_entropy(b, Objective::Partition(r), budget, seed, ctx.nmax(), &limits)?;
            let top = htop_estimate(b, r, ctx.nmax(), &limits)?.best_estimate();
            let inputs = json!({ "partition": name, "value": rep.value, "htop": top, "budget": budget });
            out.push(le(top - rep.value, 0.0, ctx.config.tolerances.gap_slack, inputs));
            Ok(())
        });
    }
    Ok(())
}
