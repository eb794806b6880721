use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_elicit::analysis::fixture::BUNDLED_EXPORT;
use robust_elicit::analysis::{
    analyze_sessions, parse_jsonl, run_comparison_experiment, write_agents_csv, AnalysisReport, CleanConfig,
    CleanRule, ComparisonSummary, ExperimentConfig, DEFAULT_INDIFFERENCE,
};
use robust_elicit::elicit::{build_lookup_table, NoiseParams};
use robust_elicit::policy::{
    bundled_scenario, generate_policies, load_scenario, AlternativesFile, ScenarioConfig, ThresholdRanges,
};
use robust_elicit::selftest::{self, SuiteResult, SUITES};
use robust_elicit::{AlternativeSet, Execution};
use robust_elicit_survey::{system_clock, Service, ServiceConfig, ServiceError};
use serde::Serialize;
use serde_json::json;

use crate::Output;

pub const OUTPUT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<robust_elicit::Error> for CliError {
    fn from(e: robust_elicit::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Engine(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

/// The given seed, or a fresh one announced on stderr.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::rng().random();
        eprintln!("seed: {s}");
        s
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn noise(sigma: f64, p: f64) -> Result<NoiseParams> {
    Ok(NoiseParams::new(sigma, p)?)
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 25)]
    count: usize,
    /// Daily arrivals CSV (`date,count`); the bundled scenario when omitted.
    #[arg(long, requires = "ages")]
    arrivals: Option<PathBuf>,
    /// Age table CSV (`bin,proportion,survival-rate`).
    #[arg(long, requires = "arrivals")]
    ages: Option<PathBuf>,
    /// JSON scenario settings: stay length, beds, waiting deaths.
    #[arg(long)]
    scenario_config: Option<PathBuf>,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

pub fn policies_generate(args: GenerateArgs, out: Output) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let config: ScenarioConfig = match &args.scenario_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            serde_json::from_str(&text).map_err(|e| io_error(path, e))?
        }
        None => ScenarioConfig::default(),
    };
    let scenario = match (&args.arrivals, &args.ages) {
        (Some(arrivals), Some(ages)) => load_scenario(arrivals, ages, &config)?,
        _ => bundled_scenario(&config)?,
    };
    let file = generate_policies(
        args.count,
        seed,
        &scenario,
        &ThresholdRanges::default(),
        execution(args.sequential),
    )?;
    let Some(path) = &args.out else {
        return print_json(&file);
    };
    file.save(path)?;
    let (i, j) = (file.features.len(), file.feature_names.len());
    if out.json {
        print_json(&json!({
            "v": OUTPUT_VERSION, "command": "policies generate", "out": path,
            "seed": seed, "alternatives": i, "features": j,
        }))
    } else {
        println!("wrote {i} alternatives x {j} features to {} (seed {seed})", path.display());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct LookupBuildArgs {
    #[arg(long)]
    alternatives: PathBuf,
    /// Queries per session.
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    /// Levels to solve; all `K` when omitted.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
}

pub fn lookup_build(args: LookupBuildArgs, out: Output) -> Result<()> {
    let set = AlternativesFile::load(&args.alternatives)?.to_alternative_set()?;
    let noise = noise(args.sigma, args.p)?;
    let depth = args.depth.unwrap_or(args.k);
    let start = Instant::now();
    let table = build_lookup_table(&set, args.k, noise, depth, execution(args.sequential), |done, total| {
        eprintln!("lookup: {done}/{total} entries");
    })?;
    table.save(&args.out)?;
    let elapsed_ms = start.elapsed().as_millis() as u64;
    if out.json {
        print_json(&json!({
            "v": OUTPUT_VERSION, "command": "lookup build", "out": args.out, "entries": table.len(),
            "K": args.k, "depth": depth, "sigma": args.sigma, "p": args.p, "elapsed_ms": elapsed_ms,
        }))
    } else {
        println!(
            "wrote {} entries (K={}, depth {depth}) to {} in {:.1}s",
            table.len(),
            args.k,
            args.out.display(),
            elapsed_ms as f64 / 1000.0
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured listen address.
    #[arg(long)]
    bind: Option<String>,
    /// Overrides the configured session seed.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn serve(args: ServeArgs, out: Output) -> Result<()> {
    let mut config = ServiceConfig::load(&args.config)?;
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let explicit_seed = config.seed.is_some();
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let (service, seed) = Service::from_config(&config, system_clock())?;
    if !explicit_seed {
        eprintln!("seed: {seed}");
    }
    if out.json {
        print_json(&json!({
            "v": OUTPUT_VERSION, "command": "serve", "bind": config.bind, "seed": seed,
            "K": service.k(), "alternatives": service.lookup().alternatives().len(),
        }))?;
    } else {
        println!("serving on {} (K={}, seed {seed})", config.bind, service.k());
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(format!("runtime: {e}")))?;
    runtime
        .block_on(robust_elicit_survey::serve(Arc::new(service), &config.bind))
        .map_err(|e| CliError::Data(format!("{}: {e}", config.bind)))
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Alternatives file; uniform random features when omitted.
    #[arg(long)]
    alternatives: Option<PathBuf>,
    /// Random alternatives to draw.
    #[arg(long = "I", default_value_t = 10)]
    count: usize,
    /// Features per random alternative.
    #[arg(long = "J", default_value_t = 8)]
    features: usize,
    /// Queries per strategy.
    #[arg(long = "K", default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    agents: usize,
    /// Noise level behind the inconsistency budget.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    /// Noise on each synthetic comparison.
    #[arg(long, default_value_t = 0.05)]
    response_sigma: f64,
    #[arg(long, default_value_t = DEFAULT_INDIFFERENCE)]
    indifference: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-agent table destination (CSV).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Serialize)]
struct ExperimentReport {
    v: u32,
    seed: u64,
    alternatives: Option<PathBuf>,
    #[serde(rename = "I")]
    num_alternatives: usize,
    #[serde(rename = "J")]
    dim: usize,
    #[serde(rename = "K")]
    k: usize,
    noise: NoiseParams,
    config: ExperimentConfig,
    summary: ComparisonSummary,
}

/// Uniform features on stream 1 of `seed`; agents use stream 0.
fn random_alternatives(seed: u64, count: usize, dim: usize) -> Result<AlternativeSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let rows = (0..count).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
    Ok(AlternativeSet::from_features(rows)?)
}

pub fn experiment_run(args: ExperimentArgs, out: Output) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let set = match &args.alternatives {
        Some(path) => AlternativesFile::load(path)?.to_alternative_set()?,
        None => random_alternatives(seed, args.count, args.features)?,
    };
    let noise = noise(args.sigma, args.p)?;
    let config = ExperimentConfig {
        agents: args.agents,
        response_sigma: args.response_sigma,
        indifference: args.indifference,
        seed,
    };
    let summary = run_comparison_experiment(&set, args.k, noise, &config, execution(args.sequential))?;
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
        write_agents_csv(&summary, file)?;
    }
    let report = ExperimentReport {
        v: OUTPUT_VERSION,
        seed,
        alternatives: args.alternatives.clone(),
        num_alternatives: set.len(),
        dim: set.dim(),
        k: args.k,
        noise,
        config,
        summary,
    };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if out.json {
        return print_json(&report);
    }
    let s = &report.summary;
    let c = s.counts;
    println!(
        "agents: {} (I={}, J={}, K={}, seed {seed})",
        s.n, report.num_alternatives, report.dim, report.k
    );
    println!(
        "mean worst-case utility: robust {:.4}, random {:.4}",
        s.mean_z_robust, s.mean_z_random
    );
    println!(
        "mean true utility: robust {:.4}, random {:.4}",
        s.mean_true_utility_robust, s.mean_true_utility_random
    );
    println!("robust worst case at least random: {}/{}", s.robust_at_least_random, s.n);
    println!(
        "final preference: robust {}, random {}, indifferent {}, same policy {}",
        c.prefers_robust, c.prefers_random, c.indifferent_different, c.indifferent_same
    );
    println!("fallback recommendations: {}", s.fallbacks);
    Ok(())
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSONL session export; the bundled synthetic export when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// 30 s first-query and 5 s average thresholds.
    #[arg(long)]
    strict: bool,
    /// Alternatives the sessions were run on; enables normalized differences.
    #[arg(long)]
    alternatives: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    /// Report destination (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn analyze(args: AnalyzeArgs, out: Output) -> Result<()> {
    let text = match &args.input {
        Some(path) => std::fs::read_to_string(path).map_err(|e| io_error(path, e))?,
        None => BUNDLED_EXPORT.to_string(),
    };
    let (records, parse_errors) = parse_jsonl(&text);
    if records.is_empty() {
        return Err(CliError::Data(match parse_errors.first() {
            Some(e) => format!("no readable session records (line {:?}: {})", e.line, e.message),
            None => "no session records in input".into(),
        }));
    }
    let alternatives = match &args.alternatives {
        Some(path) => Some((AlternativesFile::load(path)?.to_alternative_set()?, noise(args.sigma, args.p)?)),
        None => None,
    };
    let config = if args.strict {
        CleanConfig::strict()
    } else {
        CleanConfig::default()
    };
    let mut report = analyze_sessions(&records, &config, alternatives.as_ref().map(|(x, n)| (x, *n)))?;
    let mut errors = parse_errors;
    errors.append(&mut report.clean.errors);
    report.clean.errors = errors;
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if out.json {
        print_json(&report)
    } else {
        print_analysis(&report, records.len());
        Ok(())
    }
}

fn rule_name(rule: CleanRule) -> String {
    serde_json::to_value(rule)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{rule:?}"))
}

fn print_analysis(r: &AnalysisReport, read: usize) {
    let c = &r.clean;
    println!(
        "sessions: {read} read, {} kept, {} removed, {} rejected",
        c.kept.len(),
        c.removed.len(),
        c.errors.len()
    );
    for rule in CleanRule::ALL {
        let n = c.removed_by(rule).count();
        if n > 0 {
            println!("  removed {:<28} {n}", rule_name(rule));
        }
    }
    let s = &r.summary;
    println!("final comparison ({} sessions):", s.n);
    for (name, p) in [
        ("prefers robust", &s.prefers_robust),
        ("prefers random", &s.prefers_random),
        ("indifferent, different", &s.indifferent_different),
        ("indifferent, same policy", &s.indifferent_same),
    ] {
        println!(
            "  {name:<26} {:>4}  {:>5.1}%  (95% CI {:.1}-{:.1}%)",
            p.count,
            100.0 * p.estimate,
            100.0 * p.lower,
            100.0 * p.upper
        );
    }
    let st = &r.strict;
    if let Some(m) = st.margin {
        println!(
            "strict preferences: {} ({} robust, {} random), robust margin {:.1}%",
            st.n,
            st.prefers_robust,
            st.prefers_random,
            100.0 * m
        );
    }
    if let Some(chi) = &st.chi_square {
        println!(
            "chi-square vs even split (continuity corrected): {:.4}, df {}, p = {:.5}",
            chi.statistic, chi.df, chi.p
        );
    }
    let w = &r.worst_case;
    if let (Some(a), Some(b)) = (w.mean_z_robust, w.mean_z_random) {
        print!("worst-case utility: robust {a:.4}, random {b:.4}");
        match &w.t_test {
            Some(t) => println!(", t({}) = {:.3}, p = {:.4}", t.df, t.t, t.p),
            None => println!(),
        }
    }
    let o = &r.order_effects;
    println!(
        "order: robust first {}, random first {}; robust shown left {}, right {}",
        o.robust_first, o.random_first, o.robust_left, o.robust_right
    );
    println!(
        "robust answer sequences: {} unique, {} shared across {} sequences",
        r.robust_paths.unique, r.robust_paths.shared, r.robust_paths.shared_sequences
    );
    if let Some(d) = &r.normalized_differences {
        let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
        println!("normalized worst-case difference: mean {mean:.4} over {}", d.len());
    }
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Run only this suite.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    suite: Option<String>,
}

pub fn selftest(args: SelftestArgs, out: Output) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let results: Vec<SuiteResult> = match &args.suite {
        Some(name) => selftest::run_suite(name, seed).into_iter().collect(),
        None => selftest::run_all(seed),
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    if out.json {
        print_json(&json!({"v": OUTPUT_VERSION, "seed": seed, "suites": results}))?;
    } else {
        for r in &results {
            println!(
                "{} {:<24} {:>4} checks, max error {:.2e} (tol {:.0e}), {} ms",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.checks,
                r.max_error,
                r.tolerance,
                r.elapsed_ms
            );
        }
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} selftest suite(s) failed (seed {seed})")));
    }
    Ok(())
}
