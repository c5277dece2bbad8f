//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always print.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use rde_core::base::word_count;
use rde_core::entropy::{general_min, h_partition_rate, htop_estimate, lemma7_holds, power_system, transport_measure};
use rde_core::harness::{random_perturbation, run_suite, Caps, SuiteConfig, SuiteReport};
use rde_core::measures::{maximize_partition_entropy, misiurewicz_witness, Objective, WitnessReport};
use rde_core::{range_join, Instance, Limits, MarkovMeasure, PositionedCover, SymbolicBundle};

const TOL: f64 = 1e-9;

fn fixture(name: &str) -> Instance {
    let path = format!("{}/../../instances/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    Instance::from_json(&text).expect("fixture parses")
}

/// Every admissible word of length `len` in fiber `omega`, by trying all strings.
fn brute_words(b: &SymbolicBundle, omega: usize, len: usize) -> Vec<Vec<u16>> {
    let d = b.alphabet_size() as u16;
    let mut out = Vec::new();
    let mut x = vec![0u16; len];
    loop {
        let ok = (0..len.saturating_sub(1)).all(|i| b.adjacency(b.base().theta_pow(omega, i)).allows(x[i], x[i + 1]));
        if ok {
            out.push(x.clone());
        }
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            x[i] += 1;
            if x[i] < d {
                break;
            }
            x[i] = 0;
        }
    }
}

fn entropy_of<K: Ord>(weights: &BTreeMap<K, f64>) -> f64 {
    weights.values().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Law of `x[from..from + len]` under the uniform measure on `words`.
fn slice_law(words: &[Vec<u16>], from: usize, len: usize) -> BTreeMap<Vec<u16>, f64> {
    let mut law = BTreeMap::new();
    for w in words {
        *law.entry(w[from..from + len].to_vec()).or_insert(0.0) += 1.0 / words.len() as f64;
    }
    law
}

fn theta_inv_pow(b: &SymbolicBundle, omega: usize, k: usize) -> usize {
    (0..b.omega_count()).find(|&w| b.base().theta_pow(w, k) == omega).expect("theta is a permutation")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn ln_floor(num: usize, den: usize) -> f64 {
    ((num / den) as f64).ln()
}

fn summary(report: &SuiteReport, ids: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ids {
        let c = report.check(id).expect("check ran");
        let checked = c.passed + c.failed;
        ok &= c.failed == 0 && checked > 0;
        parts.push(format!("{id} {}/{checked} ({} skipped)", c.passed, c.skipped));
    }
    (ok, parts.join(", "))
}

fn criterion_1() -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, expect) in [("full2", 2f64.ln()), ("id2", 0.0), ("gm2", 0.5 * 3f64.ln())] {
        let inst = fixture(name);
        let u = inst.cover("zero_cyl").unwrap();
        let r = htop_estimate(&inst.bundle, &u, 6, &Limits::default()).unwrap();
        let exact = r.exact_rate.unwrap_or(f64::NAN);
        let good = close(exact, expect) && (name != "gm2" || r.methods.iter().any(|m| m == "spectral"));
        ok &= good;
        notes.push(format!("{name} {exact:.9}"));
    }
    let gm2 = fixture("gm2");
    let expected = [(2, [4u128, 3]), (3, [6, 6]), (4, [12, 9])];
    for (n, counts) in expected {
        for (w, &c) in counts.iter().enumerate() {
            let transfer = word_count(&gm2.bundle, w, n).exact();
            let brute = brute_words(&gm2.bundle, w, n).len() as u128;
            ok &= transfer == Some(c) && brute == c;
        }
    }
    notes.push("GM2 W_2..W_4 match".into());
    (ok, notes.join(", "))
}

fn criterion_2() -> (bool, String) {
    let gm2 = fixture("gm2");
    let u = gm2.cover("zero_cyl").unwrap();
    let r = htop_estimate(&gm2.bundle, &u, 12, &Limits::default()).unwrap();
    let monotone = r.running_upper.windows(2).all(|w| w[1] <= w[0]);
    let ok = monotone && (0.549306..=0.70).contains(&r.certified_upper) && r.running_upper.len() == 12;
    (ok, format!("certified upper {:.6}, non-increasing {monotone}", r.certified_upper))
}

fn corpus_config() -> SuiteConfig {
    let mut config = SuiteConfig {
        caps: Caps {
            omega: 4,
            alphabet: 3,
            window: 2,
            nmax: 4,
            ..Caps::default()
        },
        ..SuiteConfig::default()
    };
    config.counts.instances = 200;
    config.tolerances.exact = TOL;
    config.tolerances.invariance = TOL;
    config
}

const LEMMA_CHECKS: [&str; 4] = ["entropy-bounds", "refinement-monotone", "join-subadditive", "shift-identity"];

fn criterion_3_and_8() -> (SuiteReport, Duration) {
    let mut config = corpus_config();
    config.only = LEMMA_CHECKS.iter().chain(&["complexity-bound"]).map(|s| s.to_string()).collect();
    let start = Instant::now();
    let report = run_suite(&config).expect("suite runs");
    (report, start.elapsed())
}

fn criterion_4() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for _ in 0..1000 {
        let (p, delta) = random_perturbation(&mut rng, 6);
        ok &= p.len() <= 6;
        match lemma7_holds(&p, &delta) {
            Ok(v) => {
                ok &= v.holds && v.margin > 0.0;
                worst = worst.min(v.margin);
            }
            Err(_) => ok = false,
        }
    }
    (ok, format!("1000 tuples, smallest margin {worst:.3e}"))
}

fn criterion_5() -> (bool, String) {
    let mut config = SuiteConfig::default();
    config.counts.instances = 100;
    config.only = vec!["separated-set".into()];
    let report = run_suite(&config).expect("suite runs");
    summary(&report, &["separated-set"])
}

/// Recompute every quantity in the witness report from raw words.
fn check_witness(b: &SymbolicBundle, r: &WitnessReport) -> Vec<String> {
    let mut bad = Vec::new();
    let n = r.n;
    let steps = n * n + n;
    let d = r.d;
    let scale = n * d.pow(n as u32);
    let weight = |w: usize| b.base().weight(w);
    let omegas = b.omega_count();
    let full: Vec<usize> = (0..omegas).map(|w| brute_words(b, w, steps).len()).collect();
    let shifted: Vec<usize> = (0..omegas)
        .map(|w| slice_law(&brute_words(b, w, n + n * n), n, n * n).len())
        .collect();
    if r.full_counts != full {
        bad.push(format!("N counts {:?} vs brute {full:?}", r.full_counts));
    }
    for (w, s) in r.separated.iter().enumerate() {
        if s.cover_count != shifted[w] {
            bad.push(format!("fiber {w}: N' {} vs brute {}", s.cover_count, shifted[w]));
        }
        let support = &r.support[w];
        let admissible = brute_words(b, w, r.horizon);
        if !support.iter().all(|x| admissible.contains(x)) {
            bad.push(format!("fiber {w}: support word not admissible"));
        }
        // one word per atom of the shifted partition, and every atom hit
        let atoms = slice_law(support, n, n * n).len();
        if atoms != support.len() || atoms != shifted[w] || support.len() < shifted[w] / r.k {
            bad.push(format!("fiber {w}: {} words over {atoms} atoms", support.len()));
        }
    }
    let bound_at = |w: usize| ln_floor(full[w], scale);
    let integrated_bound: f64 = (0..omegas).map(|w| weight(w) * bound_at(w)).sum();
    let h_fiber = |w: usize, i: usize| entropy_of(&slice_law(&r.support[w], i, steps));
    for c in &r.fiber_checks {
        let (w, i) = (c.omega.unwrap(), c.i.unwrap());
        let expect = [h_fiber(w, i), ln_floor(shifted[w], n), bound_at(w)];
        if !c.values.iter().zip(&expect).all(|(a, e)| close(*a, *e)) {
            bad.push(format!("fiber check {w} i={i}: {:?} vs brute {expect:?}", c.values));
        }
    }
    for c in &r.integrated_checks {
        let i = c.i.unwrap();
        let pushed: f64 = (0..omegas)
            .map(|w| weight(w) * entropy_of(&slice_law(&r.support[theta_inv_pow(b, w, i)], i, steps)))
            .sum();
        let expect = [pushed, integrated_bound];
        if !c.values.iter().zip(&expect).all(|(a, e)| close(*a, *e)) {
            bad.push(format!("integrated check i={i}: {:?} vs brute {expect:?}", c.values));
        }
    }
    for c in &r.concavity_checks {
        let m = c.m.unwrap();
        let mut at_mu = 0.0;
        let mut average = 0.0;
        for w in 0..omegas {
            let mut mixed: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
            for i in 0..steps {
                let law = slice_law(&r.support[theta_inv_pow(b, w, i)], i, m);
                average += weight(w) * entropy_of(&law) / steps as f64;
                for (k, x) in law {
                    *mixed.entry(k).or_insert(0.0) += x / steps as f64;
                }
            }
            at_mu += weight(w) * entropy_of(&mixed);
        }
        let bound = m as f64 / steps as f64 * (integrated_bound - m as f64 * (d as f64).ln());
        let expect = [at_mu, average, bound];
        if !c.values.iter().zip(&expect).all(|(a, e)| close(*a, *e)) {
            bad.push(format!("concavity check m={m}: {:?} vs brute {expect:?}", c.values));
        }
    }
    for c in r.fiber_checks.iter().chain(&r.integrated_checks).chain(&r.concavity_checks) {
        if !c.values.windows(2).all(|v| v[0] >= v[1] - TOL) {
            bad.push(format!("{} chain violated: {:?}", c.what, c.values));
        }
    }
    bad
}

fn criterion_6() -> (bool, String) {
    let gm2 = fixture("gm2");
    let u = gm2.cover("zero_cyl").unwrap();
    let r = misiurewicz_witness(&gm2.bundle, &u, 2, &Limits::default()).unwrap();
    let bad = check_witness(&gm2.bundle, &r);
    let ok = bad.is_empty() && r.all_hold() && r.concavity_checks.iter().filter_map(|c| c.m).max() == Some(2);
    let checks = r.fiber_checks.len() + r.integrated_checks.len() + r.concavity_checks.len();
    let detail = if bad.is_empty() {
        format!("{checks} chains hold, N = {:?}, horizon {}", r.full_counts, r.horizon)
    } else {
        bad.join("; ")
    };
    (ok, detail)
}

fn criterion_7() -> (bool, String) {
    let gm2 = fixture("gm2");
    let b = &gm2.bundle;
    let limits = Limits::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for cover in ["zero_cyl", "overlap", "split"] {
        let u = gm2.cover(cover).unwrap();
        for m in 2..=3 {
            let sys = power_system(b, &u, m, &limits).unwrap();
            for mname in ["uniform", "skewed"] {
                let mu = gm2.measure(mname).unwrap();
                let moved = transport_measure(b, &sys, &mu).unwrap();
                for k in 1..=3 {
                    let blocks = range_join(&sys.bundle, &sys.cover, 0, k - 1, &limits).unwrap();
                    let base = range_join(b, &u, 0, k * m - 1, &limits).unwrap();
                    let power_rate = general_min(&sys.bundle, &moved, &blocks).unwrap().value / (k * m) as f64;
                    let base_rate = general_min(b, &mu, &base).unwrap().value / (k * m) as f64;
                    worst = worst.max((power_rate - base_rate).abs());
                    count += 1;
                }
            }
        }
    }
    (worst <= TOL, format!("{count} comparisons, largest gap {worst:.3e}"))
}

/// A random invariant Markov measure with some transitions switched off.
fn random_measure(rng: &mut ChaCha8Rng, b: &SymbolicBundle) -> MarkovMeasure {
    let d = b.alphabet_size();
    let q = (0..b.omega_count())
        .map(|w| {
            let a = b.adjacency(w);
            (0..d)
                .map(|i| {
                    let allowed: Vec<usize> = (0..d).filter(|&j| a.allows(i as u16, j as u16)).collect();
                    let mut row = vec![0.0; d];
                    for &j in &allowed {
                        if rng.random_bool(0.7) {
                            row[j] = Exp1.sample(rng);
                        }
                    }
                    if row.iter().all(|&x| x == 0.0) {
                        row[allowed[rng.random_range(0..allowed.len())]] = 1.0;
                    }
                    let total: f64 = row.iter().sum();
                    row.iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    MarkovMeasure::new(b, q).expect("supported stochastic rows")
}

fn criterion_9() -> (bool, String) {
    let limits = Limits::default();
    let mut ok = true;
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sampled = 0;
    for (name, htop, slack) in [("gm2", 0.5 * 3f64.ln(), 0.05), ("full2", 2f64.ln(), 0.02)] {
        let inst = fixture(name);
        let b = &inst.bundle;
        let r: PositionedCover = inst.cover("zero_cyl").unwrap();
        let best = maximize_partition_entropy(b, Objective::Partition(&r), 2000, 0, 6, &limits).unwrap();
        ok &= best.value >= htop - slack;
        notes.push(format!("{name} best {:.6} (target {:.6})", best.value, htop - slack));
        let mut measures = vec![best.measure.clone()];
        measures.extend(inst.measure_names().map(|m| inst.measure(m).unwrap()));
        measures.extend((0..200).map(|_| random_measure(&mut rng, b)));
        for mu in &measures {
            let rate = h_partition_rate(b, mu, &r, 6, &limits).unwrap();
            ok &= rate.exact_rate.is_some_and(|h| h <= htop + TOL);
            sampled += 1;
        }
    }
    notes.push(format!("{sampled} invariant measures stay below h_top"));
    (ok, notes.join(", "))
}

fn criterion_10() -> (bool, String) {
    let mut config = SuiteConfig::default();
    config.counts.instances = 50;
    config.counts.mixtures = 5;
    config.caps.horizon = 6;
    config.only = vec!["mixture-concavity".into()];
    let report = run_suite(&config).expect("suite runs");
    let c = report.check("mixture-concavity").unwrap();
    let (ok, detail) = summary(&report, &["mixture-concavity"]);
    (ok && c.passed + c.failed >= 200, detail)
}

struct Outcome {
    number: usize,
    pass: bool,
    elapsed: Duration,
    limit: Option<Duration>,
    detail: String,
}

fn timed(number: usize, limit_s: Option<u64>, run: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = run();
    finish(number, limit_s, start.elapsed(), pass, detail)
}

fn finish(number: usize, limit_s: Option<u64>, elapsed: Duration, pass: bool, detail: String) -> Outcome {
    let limit = limit_s.map(Duration::from_secs);
    Outcome {
        number,
        pass: pass && limit.is_none_or(|l| elapsed < l),
        elapsed,
        limit,
        detail,
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![
        timed(1, Some(1), criterion_1),
        timed(2, Some(5), criterion_2),
    ];
    let (corpus, corpus_time) = criterion_3_and_8();
    let (pass, detail) = summary(&corpus, &LEMMA_CHECKS);
    outcomes.push(finish(3, Some(60), corpus_time, pass, detail));
    outcomes.push(timed(4, Some(1), criterion_4));
    outcomes.push(timed(5, Some(30), criterion_5));
    outcomes.push(timed(6, Some(60), criterion_6));
    outcomes.push(timed(7, Some(10), criterion_7));
    let (pass, detail) = summary(&corpus, &["complexity-bound"]);
    outcomes.push(finish(8, None, corpus_time, pass, detail));
    outcomes.push(timed(9, Some(120), criterion_9));
    outcomes.push(timed(10, Some(30), criterion_10));

    let mut all = true;
    for o in &outcomes {
        all &= o.pass;
        let limit = o.limit.map_or("shared corpus".to_string(), |l| format!("limit {} s", l.as_secs()));
        println!(
            "criterion {:>2}: {}  [{:.2} s, {limit}] {}",
            o.number,
            if o.pass { "PASS" } else { "FAIL" },
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
