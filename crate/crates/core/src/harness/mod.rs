//! Random instances and a suite of exact and soft property checks.
//!
//! Exact checks are identities and inequalities that hold at every finite
//! horizon; any violation fails the suite. Soft checks track limit
//! statements at reachable horizons and are reported separately.

mod checks;
mod gen;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::instance::InstanceFile;

pub use checks::random_perturbation;
pub use gen::{gen_instance, Case, GenParams};

use checks::{Ctx, Sample, Scope, Verdict, CHECKS};

pub const SCHEMA_VERSION: u32 = 1;

/// Instance shape limits, kept inside the ranges where the exact solvers
/// are guaranteed to finish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    pub omega: usize,
    pub alphabet: usize,
    pub window: usize,
    pub nmax: usize,
    pub horizon: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            omega: 4,
            alphabet: 3,
            window: 2,
            nmax: 3,
            horizon: 14,
        }
    }
}

impl Caps {
    pub const OMEGA_MAX: usize = 6;
    pub const ALPHABET_MAX: usize = 4;
    pub const NMAX_MAX: usize = 12;
    pub const HORIZON_MAX: usize = 14;

    fn check(&self) -> Result<()> {
        let over = |what: &str, v: usize, max: usize| {
            Err(Error::InvalidConfig(format!("{what} cap {v} outside 1..={max}")))
        };
        for (what, v, max) in [
            ("omega", self.omega, Self::OMEGA_MAX),
            ("alphabet", self.alphabet, Self::ALPHABET_MAX),
            ("nmax", self.nmax, Self::NMAX_MAX),
            ("horizon", self.horizon, Self::HORIZON_MAX),
            ("window", self.window, Self::HORIZON_MAX),
        ] {
            if v == 0 || v > max {
                return over(what, v, max);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    /// Generated instances.
    pub instances: usize,
    /// Random tuples for the entropy perturbation check.
    pub tuples: usize,
    /// Random mixtures per instance for the concavity check.
    pub mixtures: usize,
    /// Objective evaluations per search in the variational gap check.
    pub optimizer_budget: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            instances: 24,
            tuples: 1000,
            mixtures: 4,
            optimizer_budget: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub exact: f64,
    pub invariance: f64,
    pub trend_slack: f64,
    pub gap_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-9,
            invariance: 1e-9,
            trend_slack: 0.05,
            gap_slack: 0.25,
        }
    }
}

/// A deliberate defect used to confirm that the suite can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Move one transition probability of the first measure of the first
    /// instance that allows it onto another allowed successor, keeping the
    /// old starts.
    FlipTransition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub counts: Counts,
    pub caps: Caps,
    pub tolerances: Tolerances,
    /// Check ids to run; empty runs all.
    pub only: Vec<String>,
    pub inject_fault: Option<Fault>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 7,
            counts: Counts::default(),
            caps: Caps::default(),
            tolerances: Tolerances::default(),
            only: Vec::new(),
            inject_fault: None,
        }
    }
}

impl SuiteConfig {
    pub fn gen_params(&self) -> GenParams {
        GenParams {
            omega: (1, self.caps.omega),
            alphabet: (1, self.caps.alphabet),
            window_max: self.caps.window,
            ..GenParams::default()
        }
    }

    fn selected(&self, id: &str) -> bool {
        self.only.is_empty() || self.only.iter().any(|o| o == id)
    }
}

/// Ids of every check, in execution order.
pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.id).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Exact,
    Soft,
}

/// Everything needed to replay one failing sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub case: Option<usize>,
    pub seed: Option<u64>,
    pub detail: String,
    pub margin: Option<f64>,
    pub inputs: Value,
    pub instance: Option<InstanceFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub id: &'static str,
    pub kind: CheckKind,
    pub description: &'static str,
    pub samples: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Smallest signed slack seen; negative means a violation.
    pub worst_margin: Option<f64>,
    pub failures: Vec<Failure>,
}

impl CheckSummary {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub config: SuiteConfig,
    pub cases: usize,
    pub checks: Vec<CheckSummary>,
    pub exact_failures: usize,
    pub soft_failures: usize,
    /// True iff no exact check failed.
    pub passed: bool,
}

impl SuiteReport {
    pub fn check(&self, id: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }
}

/// Serialize through `serde_json::Value`, whose maps keep keys sorted.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    serde_json::to_string_pretty(&v).expect("values serialize")
}

/// Generate `config.counts.instances` cases and run the suite on them.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    config.caps.check()?;
    let params = config.gen_params();
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = (0..config.counts.instances).map(|_| master.random()).collect();
    let cases = seeds
        .par_iter()
        .map(|&s| gen_instance(s, &params))
        .collect::<Result<Vec<_>>>()?;
    run_suite_on(config, &cases)
}

/// Run the suite on the given cases.
pub fn run_suite_on(config: &SuiteConfig, cases: &[Case]) -> Result<SuiteReport> {
    config.caps.check()?;
    let known = check_ids();
    if let Some(bad) = config.only.iter().find(|o| !known.contains(&o.as_str())) {
        return Err(Error::UnknownName {
            kind: "check",
            name: bad.clone(),
        });
    }
    let selected: Vec<(usize, &checks::CheckDef)> = CHECKS
        .iter()
        .enumerate()
        .filter(|(_, c)| config.selected(c.id))
        .collect();

    let fault_case = config.inject_fault.and_then(|_| {
        cases.iter().position(|c| {
            c.measures
                .first()
                .is_some_and(|(_, mu)| matches!(checks::flip_transition(&c.bundle, mu), Ok(Some(_))))
        })
    });

    // (check index, case index, verdict), merged in a fixed order
    let per_case: Vec<Vec<(usize, Option<usize>, Verdict)>> = cases
        .par_iter()
        .enumerate()
        .map(|(ci, case)| {
            let ctx = Ctx {
                config,
                case_index: ci,
                fault_case,
            };
            let mut found = Vec::new();
            for &(k, def) in &selected {
                let Scope::PerCase(run) = def.scope else { continue };
                let mut rng = stream_rng(config.seed, Some(ci), k);
                let mut out = Vec::new();
                if let Err(e) = run(&ctx, case, &mut rng, &mut out) {
                    out.push(checks::verdict_for_error(e));
                }
                found.extend(out.into_iter().map(|v| (k, Some(ci), v)));
            }
            found
        })
        .collect();
    let draws: Vec<(usize, Option<usize>, Verdict)> = selected
        .par_iter()
        .filter_map(|&(k, def)| match def.scope {
            Scope::Draws(run) => Some((k, run)),
            Scope::PerCase(_) => None,
        })
        .flat_map_iter(|(k, run)| {
            let ctx = Ctx {
                config,
                case_index: 0,
                fault_case,
            };
            let mut rng = stream_rng(config.seed, None, k);
            let mut out = Vec::new();
            if let Err(e) = run(&ctx, &mut rng, &mut out) {
                out.push(checks::verdict_for_error(e));
            }
            out.into_iter().map(move |v| (k, None, v))
        })
        .collect();

    let mut summaries: Vec<CheckSummary> = selected
        .iter()
        .map(|(_, def)| CheckSummary {
            id: def.id,
            kind: def.kind,
            description: def.description,
            samples: 0,
            passed: 0,
            failed: 0,
            skipped: 0,
            worst_margin: None,
            failures: Vec::new(),
        })
        .collect();
    let slot = |k: usize| selected.iter().position(|&(j, _)| j == k).expect("selected");
    for (k, ci, verdict) in per_case.into_iter().flatten().chain(draws) {
        let s = &mut summaries[slot(k)];
        s.samples += 1;
        match verdict {
            Verdict::Skipped => s.skipped += 1,
            Verdict::Checked(Sample {
                holds,
                margin,
                inputs,
                detail,
            }) => {
                if let Some(m) = margin.filter(|m| m.is_finite()) {
                    s.worst_margin = Some(s.worst_margin.map_or(m, |w: f64| w.min(m)));
                }
                if holds {
                    s.passed += 1;
                } else {
                    s.failed += 1;
                    s.failures.push(Failure {
                        case: ci,
                        seed: ci.and_then(|i| cases[i].seed),
                        detail,
                        margin,
                        inputs,
                        instance: ci.map(|i| cases[i].to_file()),
                    });
                }
            }
        }
    }
    let count = |kind: CheckKind| {
        summaries
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| s.failed)
            .sum::<usize>()
    };
    let exact_failures = count(CheckKind::Exact);
    let soft_failures = count(CheckKind::Soft);
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        cases: cases.len(),
        checks: summaries,
        exact_failures,
        soft_failures,
        passed: exact_failures == 0,
    })
}

fn stream_rng(seed: u64, case: Option<usize>, check: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let case_part = case.map_or(0, |c| c as u64 + 1);
    rng.set_stream((case_part << 8) | check as u64);
    rng
}
