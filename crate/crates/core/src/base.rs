//! The driving system `(Ω, P, θ)` and the symbolic bundle of random
//! subshift-of-finite-type fibers over it.
//!
//! A fiber `E_ω` is the set of two-sided sequences `x` with
//! `A_{θ^i ω}(x_i, x_{i+1}) = 1` for every `i`. The bundle map is the
//! shift, which carries `E_ω` onto `E_{θω}`. Only coordinates `0..H` for
//! some finite horizon `H` are ever materialized.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

pub type Symbol = u16;

/// A finite string of symbols; its coordinates come from context.
pub type Block = Vec<Symbol>;

const WEIGHT_TOL: f64 = 1e-12;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;

/// Half-open coordinate interval `[start, start + len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Self {
        Window { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn shifted(&self, by: usize) -> Self {
        Window::new(self.start + by, self.len)
    }

    pub fn hull(&self, other: &Window) -> Self {
        let start = self.start.min(other.start);
        Window::new(start, self.end().max(other.end()) - start)
    }

    pub fn contains(&self, other: &Window) -> bool {
        self.start <= other.start && other.end() <= self.end()
    }

    /// Restrict a block living on `self` to the sub-window `inner`.
    pub fn restrict<'a>(&self, block: &'a [Symbol], inner: &Window) -> &'a [Symbol] {
        debug_assert!(self.contains(inner));
        let off = inner.start - self.start;
        &block[off..off + inner.len]
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

/// A block placed on a coordinate span.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Word {
    pub start: usize,
    pub symbols: Block,
}

impl Word {
    pub fn span(&self) -> Window {
        Window::new(self.start, self.symbols.len())
    }
}

/// Finite probability space with an invertible measure-preserving map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbBase {
    labels: Vec<String>,
    weights: Vec<f64>,
    theta: Vec<usize>,
}

impl ProbBase {
    /// Checks shape only; use [`validate`] for the measure-theoretic
    /// invariants.
    pub fn new(labels: Vec<String>, weights: Vec<f64>, theta: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Malformed("empty base space".into()));
        }
        if weights.len() != labels.len() {
            return Err(Error::LengthMismatch(weights.len(), labels.len()));
        }
        if theta.len() != labels.len() {
            return Err(Error::LengthMismatch(theta.len(), labels.len()));
        }
        if let Some(bad) = theta.iter().find(|&&t| t >= labels.len()) {
            return Err(Error::Malformed(format!("theta image {bad} out of range")));
        }
        Ok(ProbBase {
            labels,
            weights,
            theta,
        })
    }

    pub fn omega_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, omega: usize) -> &str {
        &self.labels[omega]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, omega: usize) -> f64 {
        self.weights[omega]
    }

    pub fn theta(&self) -> &[usize] {
        &self.theta
    }

    pub fn theta_of(&self, omega: usize) -> usize {
        self.theta[omega]
    }

    pub fn theta_pow(&self, omega: usize, k: usize) -> usize {
        (0..k).fold(omega, |w, _| self.theta[w])
    }

    pub fn theta_inv(&self, omega: usize) -> usize {
        self.theta
            .iter()
            .position(|&t| t == omega)
            .expect("theta is a bijection")
    }

    /// θ-cycles, each listed as `ω, θω, θ²ω, …` from its smallest member.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.omega_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut w = start;
            while !seen[w] {
                seen[w] = true;
                cycle.push(w);
                w = self.theta[w];
            }
            out.push(cycle);
        }
        out
    }

    /// The same space driven by `θ^m`.
    pub fn power(&self, m: usize) -> ProbBase {
        let theta = (0..self.omega_count())
            .map(|w| self.theta_pow(w, m))
            .collect();
        ProbBase {
            labels: self.labels.clone(),
            weights: self.weights.clone(),
            theta,
        }
    }
}

/// Per-fiber 0/1 transition matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Adjacency {
    size: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let size = rows.len();
        let mut cells = Vec::with_capacity(size * size);
        for row in rows {
            if row.len() != size {
                return Err(Error::Malformed("adjacency matrix is not square".into()));
            }
            for &x in row {
                match x {
                    0 => cells.push(false),
                    1 => cells.push(true),
                    _ => return Err(Error::Malformed(format!("adjacency entry {x} is not 0/1"))),
                }
            }
        }
        Ok(Adjacency { size, cells })
    }

    pub fn full(size: usize) -> Self {
        Adjacency {
            size,
            cells: vec![true; size * size],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut a = Adjacency {
            size,
            cells: vec![false; size * size],
        };
        for i in 0..size {
            a.cells[i * size + i] = true;
        }
        a
    }

    pub(crate) fn from_fn(size: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let cells = (0..size * size).map(|k| f(k / size, k % size)).collect();
        Adjacency { size, cells }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn allows(&self, a: Symbol, b: Symbol) -> bool {
        self.cells[a as usize * self.size + b as usize]
    }

    pub fn row_live(&self, a: usize) -> bool {
        self.cells[a * self.size..(a + 1) * self.size].iter().any(|&x| x)
    }

    pub fn col_live(&self, b: usize) -> bool {
        (0..self.size).any(|a| self.cells[a * self.size + b])
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.cells
            .chunks(self.size)
            .map(|r| r.iter().map(|&x| u8::from(x)).collect())
            .collect()
    }

    pub(crate) fn as_matrix(&self) -> Matrix {
        self.cells
            .chunks(self.size)
            .map(|r| r.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect())
            .collect()
    }
}

/// A two-sided random subshift of finite type over a [`ProbBase`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolicBundle {
    base: ProbBase,
    alphabet: Vec<String>,
    adjacency: Vec<Adjacency>,
    /// Symbols may be absent from whole fibers (block presentations of
    /// power systems). Absent symbols are exactly the zero rows.
    partial_alphabet: bool,
}

impl SymbolicBundle {
    /// Checks shape only; see [`validate`].
    pub fn new(base: ProbBase, alphabet: Vec<String>, adjacency: Vec<Adjacency>) -> Result<Self> {
        Self::build(base, alphabet, adjacency, false)
    }

    pub(crate) fn new_partial(
        base: ProbBase,
        alphabet: Vec<String>,
        adjacency: Vec<Adjacency>,
    ) -> Result<Self> {
        Self::build(base, alphabet, adjacency, true)
    }

    fn build(
        base: ProbBase,
        alphabet: Vec<String>,
        adjacency: Vec<Adjacency>,
        partial_alphabet: bool,
    ) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::Malformed("empty alphabet".into()));
        }
        if alphabet.len() > Symbol::MAX as usize {
            return Err(Error::SizeGuard {
                what: "alphabet size",
                size: alphabet.len() as u128,
                limit: Symbol::MAX as u128,
            });
        }
        if adjacency.len() != base.omega_count() {
            return Err(Error::LengthMismatch(adjacency.len(), base.omega_count()));
        }
        if let Some(a) = adjacency.iter().find(|a| a.size() != alphabet.len()) {
            return Err(Error::Malformed(format!(
                "adjacency of size {} for alphabet of size {}",
                a.size(),
                alphabet.len()
            )));
        }
        Ok(SymbolicBundle {
            base,
            alphabet,
            adjacency,
            partial_alphabet,
        })
    }

    /// Validate and return the bundle, or the first violation as an error.
    pub fn checked(self) -> Result<Self> {
        let diag = validate(&self);
        match diag.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::InvalidBundle(v.to_string())),
        }
    }

    pub fn base(&self) -> &ProbBase {
        &self.base
    }

    pub fn omega_count(&self) -> usize {
        self.base.omega_count()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    pub fn adjacency(&self, omega: usize) -> &Adjacency {
        &self.adjacency[omega]
    }

    pub fn is_partial(&self) -> bool {
        self.partial_alphabet
    }

    /// Adjacency governing the step from coordinate `i` to `i + 1` in fiber ω.
    pub fn step(&self, omega: usize, i: usize) -> &Adjacency {
        &self.adjacency[self.base.theta_pow(omega, i)]
    }

    pub fn render(&self, block: &[Symbol]) -> String {
        block.iter().map(|&s| self.alphabet[s as usize].as_str()).collect()
    }

    /// Every block of fiber ω on `window`, in lexicographic order.
    pub fn admissible_blocks(&self, omega: usize, window: Window) -> Vec<Block> {
        if window.len == 0 {
            return Vec::new();
        }
        let first = self.base.theta_pow(omega, window.start);
        let steps: Vec<&Adjacency> = (0..window.len)
            .map(|i| &self.adjacency[self.base.theta_pow(first, i)])
            .collect();
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(window.len);
        for a in 0..self.alphabet_size() {
            if steps[0].row_live(a) {
                cur.push(a as Symbol);
                extend_blocks(&steps, &mut cur, window.len, &mut out);
                cur.pop();
            }
        }
        out
    }

    pub fn is_admissible(&self, omega: usize, window: Window, block: &[Symbol]) -> bool {
        if block.len() != window.len || block.is_empty() {
            return false;
        }
        if block.iter().any(|&s| s as usize >= self.alphabet_size()) {
            return false;
        }
        let first = self.base.theta_pow(omega, window.start);
        if !self.adjacency[first].row_live(block[0] as usize) {
            return false;
        }
        let mut w = first;
        for pair in block.windows(2) {
            if !self.adjacency[w].allows(pair[0], pair[1]) {
                return false;
            }
            w = self.base.theta_of(w);
        }
        true
    }
}

fn extend_blocks(steps: &[&Adjacency], cur: &mut Block, len: usize, out: &mut Vec<Block>) {
    if cur.len() == len {
        out.push(cur.clone());
        return;
    }
    let step = steps[cur.len() - 1];
    let last = *cur.last().expect("nonempty");
    for b in 0..step.size() as Symbol {
        if step.allows(last, b) {
            cur.push(b);
            extend_blocks(steps, cur, len, out);
            cur.pop();
        }
    }
}

/// One violated invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ThetaNotBijective { image: usize },
    NonPositiveWeight { omega: String, weight: f64 },
    WeightsDoNotSumToOne { sum: f64 },
    NotThetaInvariant { omega: String, weight: f64, image_weight: f64 },
    DeadRow { omega: String, row: String },
    DeadColumn { omega: String, column: String },
    DanglingSymbol { omega: String, symbol: String },
    EmptyFiber { omega: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ThetaNotBijective { image } => {
                write!(f, "theta is not a bijection (index {image} hit twice)")
            }
            Violation::NonPositiveWeight { omega, weight } => {
                write!(f, "P({omega}) = {weight} is not positive")
            }
            Violation::WeightsDoNotSumToOne { sum } => write!(f, "P sums to {sum}, not 1"),
            Violation::NotThetaInvariant {
                omega,
                weight,
                image_weight,
            } => write!(
                f,
                "P not θ-invariant: P({omega}) = {weight} but P(θ {omega}) = {image_weight}"
            ),
            Violation::DeadRow { omega, row } => {
                write!(f, "dead symbol: row {row} of A_{omega} is all zero")
            }
            Violation::DeadColumn { omega, column } => {
                write!(f, "dead symbol: column {column} of A_{omega} is all zero")
            }
            Violation::DanglingSymbol { omega, symbol } => write!(
                f,
                "symbol {symbol} reachable in fiber {omega} but has no continuation"
            ),
            Violation::EmptyFiber { omega } => write!(f, "fiber {omega} is empty"),
        }
    }
}

/// Outcome of [`validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        for v in &self.violations {
            writeln!(f, "FAIL: {v}")?;
        }
        Ok(())
    }
}

pub fn validate_base(base: &ProbBase) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = base.omega_count();
    let mut hit = vec![false; n];
    for &t in base.theta() {
        if std::mem::replace(&mut hit[t], true) {
            out.push(Violation::ThetaNotBijective { image: t });
        }
    }
    for (w, &p) in base.weights().iter().enumerate() {
        if !(p > 0.0) {
            out.push(Violation::NonPositiveWeight {
                omega: base.label(w).to_string(),
                weight: p,
            });
        }
    }
    let sum: f64 = base.weights().iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        out.push(Violation::WeightsDoNotSumToOne { sum });
    }
    for w in 0..n {
        let t = base.theta_of(w);
        if (base.weight(t) - base.weight(w)).abs() > WEIGHT_TOL {
            out.push(Violation::NotThetaInvariant {
                omega: base.label(w).to_string(),
                weight: base.weight(w),
                image_weight: base.weight(t),
            });
        }
    }
    out
}

/// Check every structural invariant; never aborts.
pub fn validate(bundle: &SymbolicBundle) -> Diagnostics {
    let mut violations = validate_base(&bundle.base);
    let bijective = !violations
        .iter()
        .any(|v| matches!(v, Violation::ThetaNotBijective { .. }));
    let d = bundle.alphabet_size();
    for w in 0..bundle.omega_count() {
        let a = bundle.adjacency(w);
        let omega = bundle.base.label(w).to_string();
        if bundle.partial_alphabet {
            if !bijective {
                continue;
            }
            // Live symbols are the nonzero rows; edges must land on live
            // symbols of the next fiber and every live symbol needs a
            // predecessor.
            let next = bundle.adjacency(bundle.base.theta_of(w));
            let prev = bundle.adjacency(bundle.base.theta_inv(w));
            if !(0..d).any(|s| a.row_live(s)) {
                violations.push(Violation::EmptyFiber { omega: omega.clone() });
            }
            for s in 0..d {
                let live = a.row_live(s);
                if live && !prev.col_live(s) {
                    violations.push(Violation::DanglingSymbol {
                        omega: omega.clone(),
                        symbol: bundle.alphabet[s].clone(),
                    });
                }
                if a.col_live(s) && !next.row_live(s) {
                    violations.push(Violation::DanglingSymbol {
                        omega: omega.clone(),
                        symbol: bundle.alphabet[s].clone(),
                    });
                }
            }
        } else {
            for s in 0..d {
                if !a.row_live(s) {
                    violations.push(Violation::DeadRow {
                        omega: omega.clone(),
                        row: bundle.alphabet[s].clone(),
                    });
                }
            }
            for s in 0..d {
                if !a.col_live(s) {
                    violations.push(Violation::DeadColumn {
                        omega: omega.clone(),
                        column: bundle.alphabet[s].clone(),
                    });
                }
            }
        }
    }
    Diagnostics { violations }
}

/// All admissible words of fiber ω on `span`.
pub fn admissible_words(bundle: &SymbolicBundle, omega: usize, span: Window) -> Result<Vec<Word>> {
    if span.len == 0 {
        return Err(Error::EmptySpan);
    }
    Ok(bundle
        .admissible_blocks(omega, span)
        .into_iter()
        .map(|symbols| Word {
            start: span.start,
            symbols,
        })
        .collect())
}

/// Number of admissible length-`n` words, exact while it fits in `u128`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum WordCount {
    Exact(u128),
    /// Natural log of the count after overflow, accumulated in log domain
    /// (relative error around 1e-12).
    Log(f64),
}

impl WordCount {
    pub fn ln(&self) -> f64 {
        match *self {
            WordCount::Exact(c) => (c as f64).ln(),
            WordCount::Log(l) => l,
        }
    }

    pub fn exact(&self) -> Option<u128> {
        match *self {
            WordCount::Exact(c) => Some(c),
            WordCount::Log(_) => None,
        }
    }
}

/// Entry sum of `A_ω A_{θω} ⋯ A_{θ^{n-2}ω}` (restricted to live start
/// symbols), i.e. the number of admissible words on `[0, n)`.
pub fn word_count(bundle: &SymbolicBundle, omega: usize, n: usize) -> WordCount {
    assert!(n >= 1, "word_count needs n >= 1");
    let d = bundle.alphabet_size();
    let first = bundle.adjacency(omega);
    let mut v: Vec<u128> = (0..d).map(|a| u128::from(first.row_live(a))).collect();
    let mut w = omega;
    for step in 0..n - 1 {
        let a = bundle.adjacency(w);
        let mut next = vec![0u128; d];
        let mut overflow = false;
        'outer: for i in 0..d {
            if v[i] == 0 {
                continue;
            }
            for (j, slot) in next.iter_mut().enumerate() {
                if a.allows(i as Symbol, j as Symbol) {
                    match slot.checked_add(v[i]) {
                        Some(s) => *slot = s,
                        None => {
                            overflow = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if overflow {
            let logv: Vec<f64> = v.iter().map(|&x| (x as f64).ln()).collect();
            return WordCount::Log(log_domain_count(bundle, w, logv, n - 1 - step));
        }
        v = next;
        w = bundle.base().theta_of(w);
    }
    let mut total: u128 = 0;
    for x in v {
        match total.checked_add(x) {
            Some(t) => total = t,
            None => {
                return WordCount::Log(log_sum_exp(
                    &[(total as f64).ln(), (x as f64).ln()],
                ))
            }
        }
    }
    WordCount::Exact(total)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn log_domain_count(bundle: &SymbolicBundle, mut w: usize, mut logv: Vec<f64>, steps: usize) -> f64 {
    let d = bundle.alphabet_size();
    for _ in 0..steps {
        let a = bundle.adjacency(w);
        logv = (0..d)
            .map(|j| {
                let terms: Vec<f64> = (0..d)
                    .filter(|&i| a.allows(i as Symbol, j as Symbol))
                    .map(|i| logv[i])
                    .collect();
                log_sum_exp(&terms)
            })
            .collect();
        w = bundle.base().theta_of(w);
    }
    log_sum_exp(&logv)
}

/// Growth rate of one θ-cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRate {
    pub members: Vec<usize>,
    pub mass: f64,
    pub spectral_radius: f64,
    /// `(1/L) ln ρ(A_ω A_{θω} ⋯ A_{θ^{L-1}ω})` in nats per step.
    pub rate: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRates {
    pub cycles: Vec<CycleRate>,
    /// P-weighted average of the cycle rates.
    pub integrated: f64,
}

pub fn cycle_growth_rate(bundle: &SymbolicBundle) -> Result<GrowthRates> {
    let mut cycles = Vec::new();
    let mut integrated = 0.0;
    for members in bundle.base().cycles() {
        let d = bundle.alphabet_size();
        let mut prod = linalg::identity(d);
        for &w in &members {
            prod = linalg::matmul(&prod, &bundle.adjacency(w).as_matrix());
            // keep entries bounded; only the direction matters
            let scale = prod.iter().flatten().cloned().fold(0.0, f64::max);
            if scale > 1e100 {
                return Err(Error::SizeGuard {
                    what: "cycle product magnitude",
                    size: scale as u128,
                    limit: 1e100 as u128,
                });
            }
        }
        let (rho, residual) = linalg::spectral_radius(&prod, POWER_TOL, POWER_MAX_ITER)?;
        let rate = if rho > 0.0 {
            rho.ln() / members.len() as f64
        } else {
            0.0
        };
        let mass: f64 = members.iter().map(|&w| bundle.base().weight(w)).sum();
        integrated += mass * rate;
        cycles.push(CycleRate {
            members,
            mass,
            spectral_radius: rho,
            rate,
            residual,
        });
    }
    Ok(GrowthRates { cycles, integrated })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two fibers swapped by θ: full 2-shift and golden mean.
    pub fn gm2() -> SymbolicBundle {
        let base = ProbBase::new(vec!["w0".into(), "w1".into()], vec![0.5, 0.5], vec![1, 0]).unwrap();
        SymbolicBundle::new(
            base,
            vec!["a".into(), "b".into()],
            vec![
                Adjacency::full(2),
                Adjacency::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap(),
            ],
        )
        .unwrap()
    }

    pub fn full2() -> SymbolicBundle {
        let base = ProbBase::new(vec!["w".into()], vec![1.0], vec![0]).unwrap();
        SymbolicBundle::new(base, vec!["a".into(), "b".into()], vec![Adjacency::full(2)]).unwrap()
    }

    pub fn id2() -> SymbolicBundle {
        let base = ProbBase::new(vec!["w".into()], vec![1.0], vec![0]).unwrap();
        SymbolicBundle::new(base, vec!["a".into(), "b".into()], vec![Adjacency::identity(2)]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn brute_count(bundle: &SymbolicBundle, omega: usize, n: usize) -> usize {
        let d = bundle.alphabet_size();
        let mut count = 0;
        for code in 0..d.pow(n as u32) {
            let block: Block = (0..n).map(|i| ((code / d.pow(i as u32)) % d) as Symbol).collect();
            let ok = (0..n - 1).all(|i| bundle.step(omega, i).allows(block[i], block[i + 1]));
            count += usize::from(ok);
        }
        count
    }

    #[test]
    fn gm2_passes_validation() {
        assert!(validate(&gm2()).passed());
    }

    #[test]
    fn dead_row_is_named() {
        let base = ProbBase::new(vec!["w0".into()], vec![1.0], vec![0]).unwrap();
        let b = SymbolicBundle::new(
            base,
            vec!["a".into(), "b".into()],
            vec![Adjacency::from_rows(&[vec![1, 1], vec![0, 0]]).unwrap()],
        )
        .unwrap();
        let diag = validate(&b);
        assert!(diag.violations.contains(&Violation::DeadRow {
            omega: "w0".into(),
            row: "b".into()
        }));
        assert!(b.checked().is_err());
    }

    #[test]
    fn non_invariant_weights_are_reported() {
        let base = ProbBase::new(vec!["u".into(), "v".into()], vec![0.6, 0.4], vec![1, 0]).unwrap();
        let v = validate_base(&base);
        assert!(v.iter().any(|v| matches!(v, Violation::NotThetaInvariant { .. })));
        assert!(v[0].to_string().contains("P not θ-invariant"));
    }

    #[test]
    fn gm2_admissible_words() {
        let b = gm2();
        let w0 = b.admissible_blocks(0, Window::new(0, 2));
        assert_eq!(w0, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let w1 = b.admissible_blocks(1, Window::new(0, 2));
        assert_eq!(w1, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(admissible_words(&b, 0, Window::new(3, 1)).unwrap().len(), 2);
        assert_eq!(admissible_words(&b, 0, Window::new(0, 0)), Err(Error::EmptySpan));
    }

    #[test]
    fn gm2_word_counts_match_transfer_products() {
        let b = gm2();
        let expect = [(2, 4, 3), (3, 6, 6), (4, 12, 9), (12, 972, 729)];
        for (n, c0, c1) in expect {
            assert_eq!(word_count(&b, 0, n), WordCount::Exact(c0));
            assert_eq!(word_count(&b, 1, n), WordCount::Exact(c1));
        }
        for n in 1..=10 {
            for w in 0..2 {
                assert_eq!(word_count(&b, w, n).exact(), Some(brute_count(&b, w, n) as u128));
                assert_eq!(b.admissible_blocks(w, Window::new(0, n)).len(), brute_count(&b, w, n));
            }
        }
    }

    #[test]
    fn full_shift_counts() {
        let b = full2();
        for n in 1..20 {
            assert_eq!(word_count(&b, 0, n), WordCount::Exact(1 << n));
        }
    }

    #[test]
    fn overflow_switches_to_log_domain() {
        let b = full2();
        let c = word_count(&b, 0, 200);
        match c {
            WordCount::Log(l) => assert!((l - 200.0 * 2f64.ln()).abs() < 1e-9 * l),
            WordCount::Exact(_) => panic!("2^200 does not fit"),
        }
    }

    #[test]
    fn growth_rates() {
        let g = cycle_growth_rate(&full2()).unwrap();
        assert!((g.integrated - 2f64.ln()).abs() < 1e-12);
        let g = cycle_growth_rate(&id2()).unwrap();
        assert!(g.integrated.abs() < 1e-12);
        let g = cycle_growth_rate(&gm2()).unwrap();
        assert_eq!(g.cycles.len(), 1);
        assert!((g.cycles[0].spectral_radius - 3.0).abs() < 1e-10);
        assert!((g.integrated - 0.5 * 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn cycles_and_powers() {
        let base = ProbBase::new(
            (0..4).map(|i| format!("w{i}")).collect(),
            vec![0.25; 4],
            vec![1, 2, 0, 3],
        )
        .unwrap();
        assert_eq!(base.cycles(), vec![vec![0, 1, 2], vec![3]]);
        assert_eq!(base.theta_pow(0, 4), 1);
        assert_eq!(base.theta_inv(0), 2);
        assert_eq!(base.power(3).theta(), &[0, 1, 2, 3]);
    }
}
