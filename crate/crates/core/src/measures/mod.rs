//! Fibered measures with marginal `P`.
//!
//! [`MarkovMeasure`] is the invariant family: fiber ω starts from `p_ω`
//! and step `i` uses `Q_{θ^i ω}`. [`WordMeasure`] is a horizon-limited
//! measure given by explicit weights on words of `[0, H)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::base::{Block, Symbol, SymbolicBundle, Window};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

mod optimize;
mod witness;

pub use optimize::{maximize_partition_entropy, MaximizeReport, Objective};
pub use witness::{misiurewicz_witness, BoundCheck, WitnessReport};

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;
// 2^64 lazy steps; slow-mixing products converge long before
const STATIONARY_SQUARINGS: usize = 64;

/// Word weights of one fiber; only positive weights are stored.
pub type Distribution = BTreeMap<Block, f64>;

/// Anything that can report its marginal on a coordinate window.
pub trait FiberMeasure {
    /// Law of the word on `window` in fiber ω.
    fn marginal(&self, bundle: &SymbolicBundle, omega: usize, window: Window) -> Result<Distribution>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovMeasure {
    q: Vec<Matrix>,
    p: Vec<Vec<f64>>,
    /// Per θ-cycle (in [`crate::ProbBase::cycles`] order): the cycle
    /// product has more than one closed class.
    non_unique: Vec<bool>,
}

impl MarkovMeasure {
    /// Check support and stochasticity, then derive the start vectors.
    pub fn new(bundle: &SymbolicBundle, q: Vec<Matrix>) -> Result<Self> {
        check_transitions(bundle, &q)?;
        let (p, non_unique) = stationary_starts(bundle, &q)?;
        Ok(MarkovMeasure { q, p, non_unique })
    }

    /// Use explicit start vectors; invariance is not required.
    pub fn with_starts(bundle: &SymbolicBundle, q: Vec<Matrix>, p: Vec<Vec<f64>>) -> Result<Self> {
        check_transitions(bundle, &q)?;
        if p.len() != bundle.omega_count() {
            return Err(Error::LengthMismatch(p.len(), bundle.omega_count()));
        }
        for row in &p {
            check_probability_vector(row, bundle.alphabet_size())?;
        }
        let cycles = bundle.base().cycles().len();
        Ok(MarkovMeasure {
            q,
            p,
            non_unique: vec![false; cycles],
        })
    }

    pub fn q(&self) -> &[Matrix] {
        &self.q
    }

    pub fn starts(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn non_unique(&self) -> &[bool] {
        &self.non_unique
    }

    /// `max_ω ‖p_{θω} − p_ω Q_ω‖₁`.
    pub fn invariance_residual(&self, bundle: &SymbolicBundle) -> f64 {
        (0..bundle.omega_count())
            .map(|w| {
                let pushed = linalg::vecmul(&self.p[w], &self.q[w]);
                linalg::l1_distance(&self.p[bundle.base().theta_of(w)], &pushed)
            })
            .fold(0.0, f64::max)
    }

    pub fn is_invariant(&self, bundle: &SymbolicBundle) -> bool {
        self.invariance_residual(bundle) <= STATIONARY_TOL
    }

    /// Law of `x_s` in fiber ω.
    fn law_at(&self, bundle: &SymbolicBundle, omega: usize, s: usize) -> Vec<f64> {
        let mut v = self.p[omega].clone();
        let mut w = omega;
        for _ in 0..s {
            v = linalg::vecmul(&v, &self.q[w]);
            w = bundle.base().theta_of(w);
        }
        v
    }

    /// Chain-rule entropy rate `Σ_ω P(ω) Σ_a p_ω(a) H(Q_ω(a, ·))`.
    pub fn chain_rule_rate(&self, bundle: &SymbolicBundle) -> f64 {
        (0..bundle.omega_count())
            .map(|w| {
                let fiber: f64 = self.q[w]
                    .iter()
                    .zip(&self.p[w])
                    .map(|(row, &pa)| if pa > 0.0 { pa * crate::entropy::shannon_unchecked(row) } else { 0.0 })
                    .sum();
                bundle.base().weight(w) * fiber
            })
            .sum()
    }
}

impl FiberMeasure for MarkovMeasure {
    fn marginal(&self, bundle: &SymbolicBundle, omega: usize, window: Window) -> Result<Distribution> {
        if window.len == 0 {
            return Err(Error::EmptySpan);
        }
        let start = self.law_at(bundle, omega, window.start);
        let first = bundle.base().theta_pow(omega, window.start);
        let steps: Vec<&Matrix> = (0..window.len.saturating_sub(1))
            .map(|i| &self.q[bundle.base().theta_pow(first, i)])
            .collect();
        let mut out = Distribution::new();
        let mut cur = Vec::with_capacity(window.len);
        for (a, &pa) in start.iter().enumerate() {
            if pa > 0.0 {
                cur.push(a as Symbol);
                chain_words(&steps, &mut cur, pa, window.len, &mut out);
                cur.pop();
            }
        }
        Ok(out)
    }
}

fn chain_words(steps: &[&Matrix], cur: &mut Block, weight: f64, len: usize, out: &mut Distribution) {
    if cur.len() == len {
        out.insert(cur.clone(), weight);
        return;
    }
    let q = steps[cur.len() - 1];
    let last = *cur.last().expect("nonempty") as usize;
    for (b, &t) in q[last].iter().enumerate() {
        if t > 0.0 {
            cur.push(b as Symbol);
            chain_words(steps, cur, weight * t, len, out);
            cur.pop();
        }
    }
}

fn check_probability_vector(v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::LengthMismatch(v.len(), d));
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| x < 0.0 || !x.is_finite()) {
        return Err(Error::NegativeProbability { index, value });
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidMeasure(format!("probability vector sums to {sum}")));
    }
    Ok(())
}

fn check_transitions(bundle: &SymbolicBundle, q: &[Matrix]) -> Result<()> {
    if q.len() != bundle.omega_count() {
        return Err(Error::LengthMismatch(q.len(), bundle.omega_count()));
    }
    let d = bundle.alphabet_size();
    for (w, m) in q.iter().enumerate() {
        let a = bundle.adjacency(w);
        if m.len() != d {
            return Err(Error::LengthMismatch(m.len(), d));
        }
        for (i, row) in m.iter().enumerate() {
            if row.len() != d {
                return Err(Error::LengthMismatch(row.len(), d));
            }
            for (j, &x) in row.iter().enumerate() {
                if x < 0.0 || !x.is_finite() {
                    return Err(Error::NegativeProbability { index: i * d + j, value: x });
                }
                if x > 0.0 && !a.allows(i as Symbol, j as Symbol) {
                    return Err(Error::InvalidMeasure(format!(
                        "Q_{}({}, {}) > 0 outside the adjacency support",
                        bundle.base().label(w),
                        bundle.alphabet()[i],
                        bundle.alphabet()[j]
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            // rows of absent symbols in block presentations stay zero
            let dead_row = bundle.is_partial() && !a.row_live(i) && sum == 0.0;
            if !dead_row && (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "row {} of Q_{} sums to {sum}",
                    bundle.alphabet()[i],
                    bundle.base().label(w)
                )));
            }
        }
    }
    Ok(())
}

/// Orbit-consistent start vectors: along each θ-cycle, `p_ω` is a
/// stationary vector of the cycle product and `p_{θω} = p_ω Q_ω`.
///
/// The second component flags cycles whose product has several closed
/// classes; their start is the limit reached from the uniform vector.
pub fn stationary_starts(bundle: &SymbolicBundle, q: &[Matrix]) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let d = bundle.alphabet_size();
    let mut p = vec![vec![0.0; d]; bundle.omega_count()];
    let mut flags = Vec::new();
    for cycle in bundle.base().cycles() {
        let head = cycle[0];
        let product = cycle
            .iter()
            .fold(linalg::identity(d), |acc, &w| linalg::matmul(&acc, &q[w]));
        flags.push(linalg::closed_class_count(&product) > 1);
        let live: Vec<usize> = (0..d).filter(|&a| bundle.adjacency(head).row_live(a)).collect();
        let mut v = vec![0.0; d];
        for &a in &live {
            v[a] = 1.0 / live.len() as f64;
        }
        // lazy steps keep periodic products convergent; squaring doubles the step count
        let mut lazy: Matrix = linalg::identity(d)
            .iter()
            .zip(&product)
            .map(|(i, p)| i.iter().zip(p).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        let mut residual = f64::INFINITY;
        for _ in 0..STATIONARY_SQUARINGS {
            v = linalg::vecmul(&v, &lazy);
            residual = linalg::l1_distance(&linalg::vecmul(&v, &product), &v);
            if residual <= 0.01 * STATIONARY_TOL {
                break;
            }
            lazy = linalg::matmul(&lazy, &lazy);
        }
        if residual > STATIONARY_TOL {
            return Err(Error::NonConvergence {
                what: "stationary start",
                residual,
            });
        }
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
        for &w in &cycle {
            p[w] = v.clone();
            v = linalg::vecmul(&v, &q[w]);
        }
    }
    Ok((p, flags))
}

/// Explicit weights on the words of `[0, H)` in every fiber.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WordMeasure {
    horizon: usize,
    #[serde(serialize_with = "serialize_weights")]
    weights: Vec<Distribution>,
}

/// Block keys are not strings, so each fiber becomes a list of `[word, weight]` pairs.
fn serialize_weights<S: serde::Serializer>(weights: &[Distribution], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(weights.len()))?;
    for dist in weights {
        seq.serialize_element(&dist.iter().collect::<Vec<_>>())?;
    }
    seq.end()
}

impl WordMeasure {
    /// Weights must be nonnegative, normalized per fiber and supported on
    /// admissible words. Zero weights are dropped.
    pub fn new(bundle: &SymbolicBundle, horizon: usize, weights: Vec<Distribution>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::EmptySpan);
        }
        if weights.len() != bundle.omega_count() {
            return Err(Error::LengthMismatch(weights.len(), bundle.omega_count()));
        }
        let window = Window::new(0, horizon);
        let mut clean = Vec::with_capacity(weights.len());
        for (w, dist) in weights.into_iter().enumerate() {
            let mut sum = 0.0;
            let mut kept = Distribution::new();
            for (i, (word, x)) in dist.into_iter().enumerate() {
                if x < 0.0 || !x.is_finite() {
                    return Err(Error::NegativeProbability { index: i, value: x });
                }
                if !bundle.is_admissible(w, window, &word) {
                    return Err(Error::InvalidMeasure(format!(
                        "word {} is not admissible in fiber {}",
                        bundle.render(&word),
                        bundle.base().label(w)
                    )));
                }
                sum += x;
                if x > 0.0 {
                    kept.insert(word, x);
                }
            }
            if kept.is_empty() {
                return Err(Error::EmptySupport(w));
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "weights of fiber {} sum to {sum}",
                    bundle.base().label(w)
                )));
            }
            clean.push(kept);
        }
        Ok(WordMeasure {
            horizon,
            weights: clean,
        })
    }

    /// Uniform law on a nonempty word set per fiber.
    pub fn uniform(bundle: &SymbolicBundle, horizon: usize, support: &[Vec<Block>]) -> Result<Self> {
        let weights = support
            .iter()
            .enumerate()
            .map(|(w, words)| {
                if words.is_empty() {
                    return Err(Error::EmptySupport(w));
                }
                let x = 1.0 / words.len() as f64;
                Ok(words.iter().map(|b| (b.clone(), x)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bundle, horizon, weights)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn fiber(&self, omega: usize) -> &Distribution {
        &self.weights[omega]
    }

    /// `Θν`: drop the first coordinate and move fiber ω to θω.
    pub fn pushforward(&self, bundle: &SymbolicBundle) -> Result<WordMeasure> {
        if self.horizon < 2 {
            return Err(Error::HorizonExhausted(self.horizon));
        }
        let mut weights = vec![Distribution::new(); self.weights.len()];
        for (w, dist) in self.weights.iter().enumerate() {
            let target = &mut weights[bundle.base().theta_of(w)];
            for (word, &x) in dist {
                *target.entry(word[1..].to_vec()).or_insert(0.0) += x;
            }
        }
        Ok(WordMeasure {
            horizon: self.horizon - 1,
            weights,
        })
    }

    /// Marginal on `[0, h)`.
    pub fn truncate(&self, h: usize) -> Result<WordMeasure> {
        if h == 0 {
            return Err(Error::EmptySpan);
        }
        if h > self.horizon {
            return Err(Error::HorizonMismatch {
                needed: h,
                available: self.horizon,
            });
        }
        let weights = self
            .weights
            .iter()
            .map(|dist| {
                let mut out = Distribution::new();
                for (word, &x) in dist {
                    *out.entry(word[..h].to_vec()).or_insert(0.0) += x;
                }
                out
            })
            .collect();
        Ok(WordMeasure {
            horizon: h,
            weights,
        })
    }

    /// Largest per-weight difference against another measure.
    pub fn max_difference(&self, other: &WordMeasure) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| {
                let keys: std::collections::BTreeSet<&Block> = a.keys().chain(b.keys()).collect();
                keys.into_iter()
                    .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

impl FiberMeasure for WordMeasure {
    fn marginal(&self, _bundle: &SymbolicBundle, omega: usize, window: Window) -> Result<Distribution> {
        if window.len == 0 {
            return Err(Error::EmptySpan);
        }
        if window.end() > self.horizon {
            return Err(Error::HorizonMismatch {
                needed: window.end(),
                available: self.horizon,
            });
        }
        let mut out = Distribution::new();
        for (word, &x) in &self.weights[omega] {
            *out.entry(word[window.start..window.end()].to_vec()).or_insert(0.0) += x;
        }
        Ok(out)
    }
}

/// Per-fiber, per-word convex combination.
pub fn mix(measures: &[WordMeasure], weights: &[f64]) -> Result<WordMeasure> {
    if measures.is_empty() {
        return Err(Error::InvalidMeasure("nothing to mix".into()));
    }
    if measures.len() != weights.len() {
        return Err(Error::LengthMismatch(measures.len(), weights.len()));
    }
    check_probability_vector(weights, weights.len())?;
    let horizon = measures[0].horizon;
    if let Some(m) = measures.iter().find(|m| m.horizon != horizon) {
        return Err(Error::HorizonMismatch {
            needed: horizon,
            available: m.horizon,
        });
    }
    let omegas = measures[0].weights.len();
    let mut out = vec![Distribution::new(); omegas];
    for (m, &a) in measures.iter().zip(weights) {
        if a == 0.0 {
            continue;
        }
        for (w, dist) in m.weights.iter().enumerate() {
            for (word, &x) in dist {
                *out[w].entry(word.clone()).or_insert(0.0) += a * x;
            }
        }
    }
    Ok(WordMeasure {
        horizon,
        weights: out,
    })
}

/// Materialize a Markov measure on `[0, H)`.
pub fn markov_to_word(bundle: &SymbolicBundle, mu: &MarkovMeasure, horizon: usize) -> Result<WordMeasure> {
    let weights = (0..bundle.omega_count())
        .map(|w| mu.marginal(bundle, w, Window::new(0, horizon)))
        .collect::<Result<_>>()?;
    Ok(WordMeasure { horizon, weights })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn gm2_q() -> Vec<Matrix> {
        vec![
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
        ]
    }

    pub fn gm2_measure(bundle: &SymbolicBundle) -> MarkovMeasure {
        MarkovMeasure::new(bundle, gm2_q()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::base::fixtures::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn gm2_stationary_starts() {
        let b = gm2();
        let mu = gm2_measure(&b);
        assert!(close(&mu.starts()[0], &[0.75, 0.25]));
        assert!(close(&mu.starts()[1], &[0.5, 0.5]));
        assert!(mu.invariance_residual(&b) <= 1e-12);
        assert_eq!(mu.non_unique(), &[false]);
    }

    #[test]
    fn doubly_stochastic_gives_uniform() {
        let b = full2();
        let mu = MarkovMeasure::new(&b, vec![vec![vec![0.3, 0.7], vec![0.7, 0.3]]]).unwrap();
        assert!(close(&mu.starts()[0], &[0.5, 0.5]));
    }

    #[test]
    fn identity_chain_is_flagged() {
        let b = id2();
        let mu = MarkovMeasure::new(&b, vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
        assert_eq!(mu.non_unique(), &[true]);
        assert!(close(&mu.starts()[0], &[0.5, 0.5]));
    }

    #[test]
    fn residual_of_wrong_starts() {
        let b = gm2();
        let mu = MarkovMeasure::with_starts(&b, gm2_q(), vec![vec![0.5, 0.5]; 2]).unwrap();
        assert!((mu.invariance_residual(&b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn support_is_checked() {
        let b = gm2();
        let mut q = gm2_q();
        q[1][1] = vec![0.5, 0.5];
        assert!(matches!(MarkovMeasure::new(&b, q), Err(Error::InvalidMeasure(_))));
        let mut q = gm2_q();
        q[0][0] = vec![0.5, 0.6];
        assert!(matches!(MarkovMeasure::new(&b, q), Err(Error::InvalidMeasure(_))));
    }

    #[test]
    fn word_weights() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let one = markov_to_word(&b, &mu, 1).unwrap();
        assert!((one.fiber(0)[&vec![0]] - 0.75).abs() < 1e-12);
        let two = markov_to_word(&b, &mu, 2).unwrap();
        assert!((two.fiber(1)[&vec![1, 0]] - 0.5).abs() < 1e-12);
        assert!(!two.fiber(1).contains_key(&vec![1, 1]));
    }

    #[test]
    fn pushforward_of_invariant_measure() {
        let b = gm2();
        let mu = gm2_measure(&b);
        for h in 2..7 {
            let pushed = markov_to_word(&b, &mu, h).unwrap().pushforward(&b).unwrap();
            let direct = markov_to_word(&b, &mu, h - 1).unwrap();
            assert!(pushed.max_difference(&direct) <= 1e-12);
        }
    }

    #[test]
    fn pushforward_examples() {
        let b = gm2();
        let full = |ws: &[(&[u16], f64)]| -> Distribution { ws.iter().map(|(w, x)| (w.to_vec(), *x)).collect() };
        let nu = WordMeasure::new(
            &b,
            3,
            vec![full(&[(&[0, 0, 1], 1.0)]), full(&[(&[0, 1, 0], 1.0)])],
        )
        .unwrap();
        let p = nu.pushforward(&b).unwrap();
        assert_eq!(p.fiber(1), &full(&[(&[0, 1], 1.0)]));
        let third = 1.0 / 3.0;
        let nu = WordMeasure::new(
            &b,
            2,
            vec![
                full(&[(&[0, 0], 1.0)]),
                full(&[(&[0, 0], third), (&[0, 1], third), (&[1, 0], third)]),
            ],
        )
        .unwrap();
        let p = nu.pushforward(&b).unwrap();
        assert!((p.fiber(0)[&vec![0]] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.fiber(0)[&vec![1]] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            p.pushforward(&b),
            Err(Error::HorizonExhausted(1))
        );
    }

    #[test]
    fn mixing() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let nu = markov_to_word(&b, &mu, 3).unwrap();
        assert_eq!(mix(std::slice::from_ref(&nu), &[1.0]).unwrap(), nu);
        let short = markov_to_word(&b, &mu, 2).unwrap();
        assert!(matches!(
            mix(&[nu.clone(), short], &[0.5, 0.5]),
            Err(Error::HorizonMismatch { .. })
        ));
        let lifted = markov_to_word(&b, &mu, 4).unwrap().pushforward(&b).unwrap();
        let m = mix(&[nu.clone(), lifted], &[0.5, 0.5]).unwrap();
        assert!(m.max_difference(&nu) <= 1e-12);
    }

    #[test]
    fn truncation_matches_marginal() {
        let b = gm2();
        let mu = gm2_measure(&b);
        let nu = markov_to_word(&b, &mu, 5).unwrap();
        let t = nu.truncate(3).unwrap();
        assert!(t.max_difference(&markov_to_word(&b, &mu, 3).unwrap()) <= 1e-12);
        let m = nu.marginal(&b, 0, Window::new(2, 2)).unwrap();
        let direct = mu.marginal(&b, 0, Window::new(2, 2)).unwrap();
        for (k, v) in &direct {
            assert!((m[k] - v).abs() < 1e-12);
        }
    }
}
