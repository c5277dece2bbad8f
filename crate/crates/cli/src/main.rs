use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use rde_core::entropy::{h_minus_estimate, h_partition_rate, h_plus_estimate, htop_estimate, EntropyReport, Mode};
use rde_core::harness::{canonical_json, run_suite, run_suite_on, Caps, Case, Fault, SuiteConfig, SuiteReport};
use rde_core::measures::{maximize_partition_entropy, misiurewicz_witness, Objective};
use rde_core::{validate, Error, Instance, Limits};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  validation failed, an exact suite check failed, or a witness chain was violated
  2  command-line usage error or out-of-range suite configuration
  3  a file could not be read or written
  4  the instance file does not match the schema
  5  unknown cover, measure or check name
  6  a solver size or enumeration guard was exceeded
  7  any other computation error (non-invariant measure, cover not product-form, ...)";

#[derive(Parser)]
#[command(name = "rde-lab", version, about = "Entropy of covers for random subshifts of finite type", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "RDE_LAB_THREADS", default_value_t = 0)]
    threads: usize,

    /// Write the canonical JSON report to this path.
    #[arg(long, global = true)]
    json: Option<PathBuf>,

    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Args)]
struct LimitArgs {
    /// Largest set-cover universe solved exactly.
    #[arg(long, global = true, default_value_t = Limits::default().cover_universe_max)]
    cover_universe_max: usize,

    /// Largest number of reduced candidate sets solved exactly.
    #[arg(long, global = true, default_value_t = Limits::default().cover_elems_max)]
    cover_elems_max: usize,

    /// Largest number of index tuples a join may create.
    #[arg(long, global = true, default_value_t = Limits::default().join_max)]
    join_max: u128,

    /// Largest number of product-form partitions enumerated.
    #[arg(long, global = true, default_value_t = Limits::default().enum_max)]
    enum_max: u128,

    /// Longest coordinate span materialized.
    #[arg(long, global = true, default_value_t = Limits::default().horizon_max)]
    horizon_max: usize,
}

impl LimitArgs {
    fn limits(&self) -> Limits {
        Limits {
            cover_universe_max: self.cover_universe_max,
            cover_elems_max: self.cover_elems_max,
            join_max: self.join_max,
            enum_max: self.enum_max,
            horizon_max: self.horizon_max,
            ..Limits::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the structural invariants of an instance.
    Validate { file: PathBuf },
    /// Topological entropy of a cover.
    Topent {
        file: PathBuf,
        #[arg(long)]
        cover: String,
        #[arg(long, default_value_t = 8)]
        nmax: usize,
    },
    /// Measure-theoretic entropy of a partition or a cover.
    Measent(MeasentArgs),
    /// Separated-set measures and their finite-n inequality chains.
    Witness {
        file: PathBuf,
        #[arg(long)]
        cover: String,
        #[arg(long = "n", default_value_t = 1)]
        n: usize,
    },
    /// Search Markov measures for the largest entropy of a partition or cover.
    Maximize(MaximizeArgs),
    /// Run the property suite on generated instances or on one file.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    General,
    Product,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::General => Mode::General,
            ModeArg::Product => Mode::Product,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Minus,
    Plus,
}

#[derive(Args)]
struct MeasentArgs {
    file: PathBuf,
    #[arg(long)]
    measure: String,
    #[arg(long, conflicts_with = "cover", required_unless_present = "cover")]
    partition: Option<String>,
    #[arg(long)]
    cover: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::General)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = Kind::Minus)]
    kind: Kind,
    #[arg(long, default_value_t = 6)]
    nmax: usize,
}

#[derive(Args)]
struct MaximizeArgs {
    file: PathBuf,
    #[arg(long, conflicts_with = "cover", required_unless_present = "cover")]
    partition: Option<String>,
    #[arg(long)]
    cover: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::General)]
    mode: ModeArg,
    #[arg(long, default_value_t = 500)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    nmax: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run on this instance instead of generated ones.
    #[arg(long, conflicts_with = "seed")]
    file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generated instances.
    #[arg(long)]
    instances: Option<usize>,
    /// Size caps as key=value pairs, e.g. omega=4,alphabet=3,window=2,nmax=3,horizon=14.
    #[arg(long)]
    caps: Option<String>,
    /// Comma-separated check ids to run.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Plant a fault that the invariance check must catch.
    #[arg(long)]
    inject_fault: bool,
    /// List check ids and exit.
    #[arg(long)]
    list: bool,
}

fn parse_caps(spec: &str) -> anyhow::Result<Caps> {
    let mut caps = Caps::default();
    for pair in spec.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("cap {pair:?} is not key=value"))?;
        let v: usize = value.parse().with_context(|| format!("cap {key} needs an integer"))?;
        match key {
            "omega" => caps.omega = v,
            "alphabet" => caps.alphabet = v,
            "window" => caps.window = v,
            "nmax" => caps.nmax = v,
            "horizon" => caps.horizon = v,
            other => bail!(Error::UnknownName {
                kind: "cap",
                name: other.to_string(),
            }),
        }
    }
    Ok(caps)
}

fn load(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json(&text)?)
}

/// Load and refuse instances that fail validation.
fn load_valid(path: &Path) -> anyhow::Result<Option<Instance>> {
    let inst = load(path)?;
    let d = validate(&inst.bundle);
    if d.passed() {
        return Ok(Some(inst));
    }
    for v in &d.violations {
        eprintln!("invalid: {v}");
    }
    Ok(None)
}

fn write_json(path: Option<&PathBuf>, report: &impl serde::Serialize) -> anyhow::Result<()> {
    if let Some(p) = path {
        let mut text = canonical_json(report);
        text.push('\n');
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn print_sequence(report: &EntropyReport, label: &str) {
    println!("{:>4}  {:>12}  {:>12}", "n", label, "running min");
    for (&(n, v), up) in report.sequence.iter().zip(&report.running_upper) {
        println!("{n:>4}  {v:>12.6}  {up:>12.6}");
    }
    println!("certified upper: {:.6}", report.certified_upper);
    match report.exact_rate {
        Some(r) => println!("exact rate: {r:.6} ({})", report.methods.join(", ")),
        None => println!("exact rate: unavailable ({})", report.methods.join(", ")),
    }
}

fn print_matrix(rows: &[Vec<f64>]) {
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        println!("    [{}]", cells.join(", "));
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let limits = cli.limits.limits();
    let json = cli.json.as_ref();
    match cli.cmd {
        Cmd::Validate { file } => {
            let inst = load(&file)?;
            let d = validate(&inst.bundle);
            write_json(json, &d)?;
            if d.passed() {
                println!("valid: {} fibers, {} symbols", inst.bundle.omega_count(), inst.bundle.alphabet_size());
                return Ok(0);
            }
            for v in &d.violations {
                println!("invalid: {v}");
            }
            Ok(1)
        }
        Cmd::Topent { file, cover, nmax } => {
            let Some(inst) = load_valid(&file)? else { return Ok(1) };
            let u = inst.cover(&cover)?;
            let report = htop_estimate(&inst.bundle, &u, nmax, &limits)?;
            println!("cover {cover}: {} elements on window of length {}", u.len(), u.window().len);
            print_sequence(&report, "H(T,U,n)/n");
            write_json(json, &report)?;
            Ok(0)
        }
        Cmd::Measent(a) => {
            let Some(inst) = load_valid(&a.file)? else { return Ok(1) };
            let mu = inst.measure(&a.measure)?;
            let b = &inst.bundle;
            match (&a.partition, &a.cover) {
                (Some(name), _) => {
                    let r = inst.cover(name)?;
                    let report = h_partition_rate(b, &mu, &r, a.nmax, &limits)?;
                    println!("partition {name}, measure {}", a.measure);
                    print_sequence(&report, "H(R_0^n-1)/n");
                    write_json(json, &report)?;
                }
                (None, Some(name)) => {
                    let u = inst.cover(name)?;
                    match a.kind {
                        Kind::Minus => {
                            let report = h_minus_estimate(b, &mu, &u, a.nmax, a.mode.into(), &limits)?;
                            println!("cover {name}, measure {}, lower entropy", a.measure);
                            print_sequence(&report, "H(U_0^n-1)/n");
                            write_json(json, &report)?;
                        }
                        Kind::Plus => {
                            let report = h_plus_estimate(b, &mu, &u, a.nmax, &limits)?;
                            println!("cover {name}, measure {}, upper entropy", a.measure);
                            println!("refining partitions: {}", report.candidates.len());
                            println!("minimizing partition: #{}", report.argmin_index);
                            println!("value: {:.6}", report.value);
                            write_json(json, &report)?;
                        }
                    }
                }
                (None, None) => unreachable!("clap requires --partition or --cover"),
            }
            Ok(0)
        }
        Cmd::Witness { file, cover, n } => {
            let Some(inst) = load_valid(&file)? else { return Ok(1) };
            let b = &inst.bundle;
            let u = inst.cover(&cover)?;
            let report = misiurewicz_witness(b, &u, n, &limits)?;
            println!("n = {}, K = {}, d = {}, horizon = {}", report.n, report.k, report.d, report.horizon);
            for (s, full) in report.separated.iter().zip(&report.full_counts) {
                println!(
                    "fiber {}: |C_n| = {}, N' = {}, floor(N'/K) = {}, N(U, n^2+n) = {}",
                    b.base().label(s.omega),
                    s.words.len(),
                    s.cover_count,
                    s.bound,
                    full
                );
            }
            for c in report.fiber_checks.iter().chain(&report.integrated_checks).chain(&report.concavity_checks) {
                let values: Vec<String> = c.values.iter().map(|v| format!("{v:.6}")).collect();
                let at = match (c.omega, c.i, c.m) {
                    (Some(w), Some(i), _) => format!("{} i={i}", b.base().label(w)),
                    (None, Some(i), _) => format!("i={i}"),
                    (_, _, Some(m)) => format!("m={m}"),
                    _ => String::new(),
                };
                let verdict = if c.holds { "ok" } else { "VIOLATED" };
                println!("{} {at} l={}: {} {verdict}", c.what, c.l, values.join(" >= "));
            }
            println!("shift identity gap: {:.3e}", report.shift_identity_gap);
            for w in 0..b.omega_count() {
                println!("mu_n fiber {}: {} words at horizon {}", b.base().label(w), report.mu.fiber(w).len(), report.mu.horizon());
            }
            write_json(json, &report)?;
            Ok(if report.all_hold() { 0 } else { 1 })
        }
        Cmd::Maximize(a) => {
            let Some(inst) = load_valid(&a.file)? else { return Ok(1) };
            let b = &inst.bundle;
            let (name, target) = match (&a.partition, &a.cover) {
                (Some(n), _) | (None, Some(n)) => (n.clone(), inst.cover(n)?),
                (None, None) => unreachable!("clap requires --partition or --cover"),
            };
            let objective = if a.partition.is_some() {
                Objective::Partition(&target)
            } else {
                Objective::Cover(&target, a.mode.into())
            };
            let report = maximize_partition_entropy(b, objective, a.budget, a.seed, a.nmax, &limits)?;
            println!("target {name}, budget {}, seed {}", a.budget, a.seed);
            println!("best value: {:.6}", report.value);
            println!("htop estimate: {:.6}", report.htop.best_estimate());
            println!("gap: {:.6}", report.gap);
            for (w, q) in report.measure.q().iter().enumerate() {
                println!("  Q[{}]", b.base().label(w));
                print_matrix(q);
            }
            write_json(json, &report)?;
            Ok(0)
        }
        Cmd::Verify(a) => {
            if a.list {
                for id in rde_core::harness::check_ids() {
                    println!("{id}");
                }
                return Ok(0);
            }
            let mut config = SuiteConfig::default();
            if let Some(s) = a.seed {
                config.seed = s;
            }
            if let Some(n) = a.instances {
                config.counts.instances = n;
            }
            if let Some(c) = &a.caps {
                config.caps = parse_caps(c)?;
            }
            config.only = a.only.clone();
            if a.inject_fault {
                config.inject_fault = Some(Fault::FlipTransition);
            }
            let report = match &a.file {
                Some(path) => {
                    let Some(inst) = load_valid(path)? else { return Ok(1) };
                    run_suite_on(&config, &[Case::from_instance(&inst)?])?
                }
                None => run_suite(&config)?,
            };
            print_suite(&report);
            write_json(json, &report)?;
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

fn print_suite(report: &SuiteReport) {
    println!(
        "{:<22} {:<5} {:>7} {:>7} {:>7} {:>7} {:>14}",
        "check", "kind", "samples", "passed", "failed", "skipped", "worst margin"
    );
    for c in &report.checks {
        let kind = match serde_json::to_value(c.kind) {
            Ok(Value::String(s)) => s,
            _ => String::new(),
        };
        let worst = c.worst_margin.map_or("-".to_string(), |m| format!("{m:.6}"));
        println!(
            "{:<22} {:<5} {:>7} {:>7} {:>7} {:>7} {:>14}",
            c.id, kind, c.samples, c.passed, c.failed, c.skipped, worst
        );
        for f in &c.failures {
            println!("  failure: case {:?}, seed {:?}: {} {}", f.case, f.seed, f.detail, f.inputs);
        }
    }
    println!(
        "{} cases; exact failures {}, soft failures {}: {}",
        report.cases,
        report.exact_failures,
        report.soft_failures,
        if report.passed { "PASS" } else { "FAIL" }
    );
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Malformed(_)) => 4,
        Some(Error::InvalidConfig(_)) => 2,
        Some(Error::UnknownName { .. }) => 5,
        Some(Error::SizeGuard { .. } | Error::EnumerationGuard { .. }) => 6,
        Some(_) | None => 7,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        log::warn!("thread pool already configured: {e}");
    }
    log::debug!("running with {} worker threads", rayon::current_num_threads());
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
