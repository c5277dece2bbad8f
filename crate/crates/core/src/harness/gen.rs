//! Seeded random bundles, covers and Markov measures.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::base::{validate, Adjacency, Block, ProbBase, SymbolicBundle, Window};
use crate::coverlat::{all_admissible, PositionedCover, Section};
use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceFile};
use crate::linalg::Matrix;
use crate::measures::MarkovMeasure;

/// Shape of generated instances. Ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub omega: (usize, usize),
    pub alphabet: (usize, usize),
    pub window_max: usize,
    pub elements: (usize, usize),
    /// Random covers per instance, alternating product and general form.
    pub covers: usize,
    pub measures: usize,
    /// Probability that a transition is allowed.
    pub edge_prob: f64,
    /// Probability that an allowed transition gets zero weight.
    pub zero_prob: f64,
    pub rejection_budget: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            omega: (1, 4),
            alphabet: (1, 3),
            window_max: 2,
            elements: (1, 3),
            covers: 2,
            measures: 2,
            edge_prob: 0.6,
            zero_prob: 0.25,
            rejection_budget: 1000,
        }
    }
}

impl GenParams {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.omega.0 == 0 || self.omega.0 > self.omega.1 {
            return bad("omega range must be nonempty and start at 1 or more");
        }
        if self.alphabet.0 == 0 || self.alphabet.0 > self.alphabet.1 || self.alphabet.1 > 26 {
            return bad("alphabet range must be nonempty within 1..=26");
        }
        if self.elements.0 == 0 || self.elements.0 > self.elements.1 {
            return bad("element range must be nonempty and start at 1 or more");
        }
        if self.window_max == 0 {
            return bad("window_max must be positive");
        }
        if !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return bad("edge_prob must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.zero_prob) {
            return bad("zero_prob must lie in [0, 1)");
        }
        Ok(())
    }
}

/// A bundle with named covers and measures.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    /// Generator seed, if the case was generated.
    pub seed: Option<u64>,
    pub bundle: SymbolicBundle,
    pub covers: Vec<(String, PositionedCover)>,
    pub measures: Vec<(String, MarkovMeasure)>,
}

impl Case {
    pub fn from_instance(instance: &Instance) -> Result<Self> {
        let covers = instance
            .cover_names()
            .map(|n| Ok((n.clone(), instance.cover(n)?)))
            .collect::<Result<_>>()?;
        let measures = instance
            .measure_names()
            .map(|n| Ok((n.clone(), instance.measure(n)?)))
            .collect::<Result<_>>()?;
        Ok(Case {
            seed: None,
            bundle: instance.bundle.clone(),
            covers,
            measures,
        })
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile::from_parts(&self.bundle, &self.covers, &self.measures)
    }

    pub fn partitions(&self) -> impl Iterator<Item = &(String, PositionedCover)> {
        self.covers.iter().filter(|(_, c)| c.is_partition())
    }
}

fn symbol_name(i: usize) -> String {
    char::from(b'a' + i as u8).to_string()
}

fn adjacency(rng: &mut ChaCha8Rng, d: usize, p: f64, attempts: &mut usize, budget: usize) -> Result<Adjacency> {
    loop {
        if *attempts >= budget {
            return Err(Error::RejectionBudget {
                what: "adjacency",
                attempts: *attempts,
            });
        }
        *attempts += 1;
        let rows: Vec<Vec<u8>> = (0..d)
            .map(|_| (0..d).map(|_| u8::from(rng.random_bool(p))).collect())
            .collect();
        let a = Adjacency::from_rows(&rows)?;
        if (0..d).all(|s| a.row_live(s) && a.col_live(s)) {
            return Ok(a);
        }
    }
}

/// Random subsets of `universe` whose union is `universe`.
fn covering_sets(rng: &mut ChaCha8Rng, universe: &[Block], k: usize) -> Vec<Section> {
    let mut sets = vec![Section::new(); k];
    for word in universe {
        let mut placed = false;
        for s in sets.iter_mut() {
            if rng.random_bool(0.5) {
                s.insert(word.clone());
                placed = true;
            }
        }
        if !placed {
            sets[rng.random_range(0..k)].insert(word.clone());
        }
    }
    sets
}

fn random_cover(
    rng: &mut ChaCha8Rng,
    bundle: &SymbolicBundle,
    params: &GenParams,
    product: bool,
) -> Result<PositionedCover> {
    let window = Window::new(0, rng.random_range(1..=params.window_max));
    let k = rng.random_range(params.elements.0..=params.elements.1);
    if product {
        let universe: Vec<Block> = all_admissible(bundle, window).into_iter().collect();
        PositionedCover::product(bundle, window, covering_sets(rng, &universe, k))
    } else {
        let mut sections = vec![Vec::with_capacity(bundle.omega_count()); k];
        for w in 0..bundle.omega_count() {
            let universe = bundle.admissible_blocks(w, window);
            for (e, s) in sections.iter_mut().zip(covering_sets(rng, &universe, k)) {
                e.push(s);
            }
        }
        PositionedCover::new(bundle, window, sections)
    }
}

fn random_partition(rng: &mut ChaCha8Rng, bundle: &SymbolicBundle, params: &GenParams) -> Result<PositionedCover> {
    let window = Window::new(0, rng.random_range(1..=params.window_max));
    let k = rng.random_range(params.elements.0..=params.elements.1);
    let mut cells = vec![Section::new(); k];
    for word in all_admissible(bundle, window) {
        cells[rng.random_range(0..k)].insert(word);
    }
    cells.retain(|c| !c.is_empty());
    PositionedCover::product(bundle, window, cells)
}

fn random_transitions(rng: &mut ChaCha8Rng, bundle: &SymbolicBundle, zero_prob: f64) -> Vec<Matrix> {
    let d = bundle.alphabet_size();
    (0..bundle.omega_count())
        .map(|w| {
            let a = bundle.adjacency(w);
            (0..d)
                .map(|i| {
                    let allowed: Vec<usize> = (0..d).filter(|&j| a.allows(i as u16, j as u16)).collect();
                    let mut row = vec![0.0; d];
                    for &j in &allowed {
                        if !rng.random_bool(zero_prob) {
                            row[j] = Exp1.sample(rng);
                        }
                    }
                    // keep every row stochastic
                    if row.iter().all(|&x| x == 0.0) {
                        row[*allowed.choose(rng).expect("rows are live")] = 1.0;
                    }
                    let total: f64 = row.iter().sum();
                    row.iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect()
}

/// A valid random instance, determined by `seed`.
///
/// The base permutation is uniform, `P` is uniform inside each cycle with
/// random cycle masses, adjacency matrices are redrawn until no symbol is
/// dead, and measures start from their stationary vectors.
pub fn gen_instance(seed: u64, params: &GenParams) -> Result<Case> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(params.omega.0..=params.omega.1);
    let d = rng.random_range(params.alphabet.0..=params.alphabet.1);
    let mut theta: Vec<usize> = (0..n).collect();
    theta.shuffle(&mut rng);
    let labels: Vec<String> = (0..n).map(|w| format!("w{w}")).collect();
    let cycles = ProbBase::new(labels.clone(), vec![1.0 / n as f64; n], theta.clone())?.cycles();
    let masses: Vec<f64> = cycles.iter().map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = masses.iter().sum();
    let mut weights = vec![0.0; n];
    for (cycle, m) in cycles.iter().zip(&masses) {
        for &w in cycle {
            weights[w] = m / total / cycle.len() as f64;
        }
    }
    let base = ProbBase::new(labels, weights, theta)?;

    let mut attempts = 0;
    let adj = (0..n)
        .map(|_| adjacency(&mut rng, d, params.edge_prob, &mut attempts, params.rejection_budget))
        .collect::<Result<Vec<_>>>()?;
    let bundle = SymbolicBundle::new(base, (0..d).map(symbol_name).collect(), adj)?;
    let diagnostics = validate(&bundle);
    if !diagnostics.passed() {
        return Err(Error::InvalidBundle(format!("{:?}", diagnostics.violations)));
    }

    let mut covers = Vec::new();
    for c in 0..params.covers {
        covers.push((format!("u{c}"), random_cover(&mut rng, &bundle, params, c % 2 == 0)?));
    }
    covers.push(("r0".to_string(), random_partition(&mut rng, &bundle, params)?));
    let measures = (0..params.measures)
        .map(|m| {
            let q = random_transitions(&mut rng, &bundle, params.zero_prob);
            Ok((format!("m{m}"), MarkovMeasure::new(&bundle, q)?))
        })
        .collect::<Result<_>>()?;
    Ok(Case {
        seed: Some(seed),
        bundle,
        covers,
        measures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::htop_estimate;
    use crate::Limits;

    #[test]
    fn seed_one_is_valid() {
        let case = gen_instance(1, &GenParams::default()).unwrap();
        assert!(validate(&case.bundle).passed());
        assert_eq!(case.covers.len(), 3);
        assert!(case.covers[2].1.is_partition());
        for (_, m) in &case.measures {
            assert!(m.is_invariant(&case.bundle));
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let p = GenParams::default();
        for seed in 0..20 {
            assert_eq!(gen_instance(seed, &p).unwrap(), gen_instance(seed, &p).unwrap());
        }
    }

    #[test]
    fn single_symbol_has_zero_entropy() {
        let p = GenParams {
            alphabet: (1, 1),
            ..GenParams::default()
        };
        let case = gen_instance(5, &p).unwrap();
        for (_, u) in &case.covers {
            let r = htop_estimate(&case.bundle, u, 4, &Limits::default()).unwrap();
            assert_eq!(r.certified_upper, 0.0);
        }
    }

    #[test]
    fn theta_invariant_weights() {
        for seed in 0..20 {
            let case = gen_instance(seed, &GenParams::default()).unwrap();
            let base = case.bundle.base();
            for w in 0..base.omega_count() {
                assert!((base.weight(w) - base.weight(base.theta_of(w))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn impossible_density_exhausts_budget() {
        let p = GenParams {
            omega: (3, 3),
            alphabet: (3, 3),
            edge_prob: 1e-9,
            rejection_budget: 50,
            ..GenParams::default()
        };
        assert!(matches!(gen_instance(0, &p), Err(Error::RejectionBudget { attempts: 50, .. })));
    }

    #[test]
    fn round_trips_through_instance_files() {
        let case = gen_instance(3, &GenParams::default()).unwrap();
        let json = serde_json::to_string(&case.to_file()).unwrap();
        let back = Case::from_instance(&Instance::from_json(&json).unwrap()).unwrap();
        assert_eq!(back.bundle, case.bundle);
        assert_eq!(back.covers.len(), case.covers.len());
        for (name, u) in &case.covers {
            let (_, v) = back.covers.iter().find(|(n, _)| n == name).unwrap();
            assert_eq!(u.elements(), v.elements());
        }
    }
}
