//! JSON instance files.
//!
//! ```json
//! {
//!   "alphabet": ["a", "b"],
//!   "omega": ["w0", "w1"],
//!   "theta": [1, 0],
//!   "P": [0.5, 0.5],
//!   "adjacency": { "w0": [[1, 1], [1, 1]], "w1": [[1, 1], [1, 0]] },
//!   "covers": {
//!     "zero_cyl": { "window": 1, "product": [["a"], ["b"]] },
//!     "split":    { "window": 1, "per_omega": { "w0": [["a"], ["b"]], "w1": [["a", "b"], []] } }
//!   },
//!   "measures": {
//!     "m": { "Q": { "w0": [[0.5, 0.5], [0.5, 0.5]], "w1": [[0.5, 0.5], [1, 0]] } }
//!   }
//! }
//! ```
//!
//! Words are strings over the symbol names, which must be prefix-free so
//! that every word splits into symbols in exactly one way. Covers always
//! start at coordinate 0. Start vectors of measures are derived, never
//! read. Unknown fields are rejected.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::base::{Adjacency, Block, ProbBase, Symbol, SymbolicBundle, Window};
use crate::coverlat::{PositionedCover, Section};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measures::MarkovMeasure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    pub window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_omega: Option<BTreeMap<String, Vec<Vec<String>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(rename = "Q")]
    pub q: BTreeMap<String, Matrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub alphabet: Vec<String>,
    pub omega: Vec<String>,
    pub theta: Vec<usize>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub adjacency: BTreeMap<String, Vec<Vec<u8>>>,
    #[serde(default)]
    pub covers: BTreeMap<String, CoverSpec>,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
}

/// A parsed instance with its bundle built (but not validated).
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub file: InstanceFile,
    pub bundle: SymbolicBundle,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        check_prefix_free(&file.alphabet)?;
        let base = ProbBase::new(file.omega.clone(), file.p.clone(), file.theta.clone())?;
        let known: BTreeSet<&String> = file.omega.iter().collect();
        if let Some(extra) = file.adjacency.keys().find(|k| !known.contains(k)) {
            return Err(Error::UnknownName {
                kind: "fiber",
                name: extra.clone(),
            });
        }
        let adjacency = file
            .omega
            .iter()
            .map(|w| {
                let rows = file.adjacency.get(w).ok_or_else(|| {
                    Error::Malformed(format!("missing adjacency for fiber {w}"))
                })?;
                Adjacency::from_rows(rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let bundle = SymbolicBundle::new(base, file.alphabet.clone(), adjacency)?;
        Ok(Instance { file, bundle })
    }

    pub fn cover_names(&self) -> impl Iterator<Item = &String> {
        self.file.covers.keys()
    }

    pub fn measure_names(&self) -> impl Iterator<Item = &String> {
        self.file.measures.keys()
    }

    pub fn cover(&self, name: &str) -> Result<PositionedCover> {
        let spec = self.file.covers.get(name).ok_or_else(|| Error::UnknownName {
            kind: "cover",
            name: name.to_string(),
        })?;
        let window = Window::new(0, spec.window);
        match (&spec.product, &spec.per_omega) {
            (Some(elements), None) => {
                let raw = elements
                    .iter()
                    .map(|e| self.parse_section(e, spec.window))
                    .collect::<Result<_>>()?;
                PositionedCover::product(&self.bundle, window, raw)
            }
            (None, Some(per_omega)) => {
                let mut count = None;
                let mut fibers = Vec::with_capacity(self.file.omega.len());
                for w in &self.file.omega {
                    let elements = per_omega.get(w).ok_or_else(|| {
                        Error::Malformed(format!("cover {name} has no sections for fiber {w}"))
                    })?;
                    if *count.get_or_insert(elements.len()) != elements.len() {
                        return Err(Error::Malformed(format!(
                            "cover {name} has a different element count in fiber {w}"
                        )));
                    }
                    fibers.push(
                        elements
                            .iter()
                            .map(|e| self.parse_section(e, spec.window))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                if let Some(extra) = per_omega.keys().find(|k| !self.file.omega.contains(k)) {
                    return Err(Error::UnknownName {
                        kind: "fiber",
                        name: extra.clone(),
                    });
                }
                let k = count.unwrap_or(0);
                let sections = (0..k)
                    .map(|i| fibers.iter().map(|f| f[i].clone()).collect())
                    .collect();
                PositionedCover::new(&self.bundle, window, sections)
            }
            _ => Err(Error::Malformed(format!(
                "cover {name} needs exactly one of \"product\" and \"per_omega\""
            ))),
        }
    }

    pub fn measure(&self, name: &str) -> Result<MarkovMeasure> {
        let spec = self.file.measures.get(name).ok_or_else(|| Error::UnknownName {
            kind: "measure",
            name: name.to_string(),
        })?;
        let q = self
            .file
            .omega
            .iter()
            .map(|w| {
                spec.q.get(w).cloned().ok_or_else(|| {
                    Error::Malformed(format!("measure {name} has no Q for fiber {w}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MarkovMeasure::new(&self.bundle, q)
    }

    fn parse_section(&self, words: &[String], len: usize) -> Result<Section> {
        words
            .iter()
            .map(|s| {
                let b = tokenize(&self.file.alphabet, s)?;
                if b.len() != len {
                    return Err(Error::Malformed(format!(
                        "word {s:?} has length {} but the window has length {len}",
                        b.len()
                    )));
                }
                Ok(b)
            })
            .collect()
    }
}

fn check_prefix_free(alphabet: &[String]) -> Result<()> {
    for (i, a) in alphabet.iter().enumerate() {
        if a.is_empty() {
            return Err(Error::Malformed("empty symbol name".into()));
        }
        for (j, b) in alphabet.iter().enumerate() {
            if i != j && b.starts_with(a.as_str()) {
                return Err(Error::Malformed(format!(
                    "symbol names must be prefix-free: {a:?} is a prefix of {b:?}"
                )));
            }
        }
    }
    Ok(())
}

/// Split a word into symbols of a prefix-free alphabet.
pub fn tokenize(alphabet: &[String], word: &str) -> Result<Block> {
    let mut out = Vec::new();
    let mut rest = word;
    while !rest.is_empty() {
        let (k, name) = alphabet
            .iter()
            .enumerate()
            .find(|(_, a)| rest.starts_with(a.as_str()))
            .ok_or_else(|| Error::Malformed(format!("cannot read word {word:?} over the alphabet")))?;
        out.push(k as Symbol);
        rest = &rest[name.len()..];
    }
    Ok(out)
}

impl InstanceFile {
    /// Describe a bundle together with covers (window at 0) and measures.
    pub fn from_parts(
        bundle: &SymbolicBundle,
        covers: &[(String, PositionedCover)],
        measures: &[(String, MarkovMeasure)],
    ) -> Self {
        let base = bundle.base();
        let label = |w: usize| base.label(w).to_string();
        let omegas = bundle.omega_count();
        let word_list = |s: &Section| -> Vec<String> { s.iter().map(|b| bundle.render(b)).collect() };
        let cover_specs = covers
            .iter()
            .map(|(name, c)| {
                let spec = if c.is_product_form() {
                    CoverSpec {
                        window: c.window().len,
                        product: Some(
                            c.elements()
                                .iter()
                                .map(|e| word_list(&e.iter().flatten().cloned().collect()))
                                .collect(),
                        ),
                        per_omega: None,
                    }
                } else {
                    CoverSpec {
                        window: c.window().len,
                        product: None,
                        per_omega: Some(
                            (0..omegas)
                                .map(|w| (label(w), c.elements().iter().map(|e| word_list(&e[w])).collect()))
                                .collect(),
                        ),
                    }
                };
                (name.clone(), spec)
            })
            .collect();
        let measure_specs = measures
            .iter()
            .map(|(name, m)| {
                let q = (0..omegas).map(|w| (label(w), m.q()[w].clone())).collect();
                (name.clone(), MeasureSpec { q })
            })
            .collect();
        InstanceFile {
            alphabet: bundle.alphabet().to_vec(),
            omega: base.labels().to_vec(),
            theta: base.theta().to_vec(),
            p: base.weights().to_vec(),
            adjacency: (0..omegas).map(|w| (label(w), bundle.adjacency(w).rows())).collect(),
            covers: cover_specs,
            measures: measure_specs,
        }
    }
}
