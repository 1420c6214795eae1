//! `kwise`: graph generation, simulation, limit-law tables, independence
//! checks, goodness of fit and declarative experiment runs.
//!
//! Exit codes: 0 ok, 1 validation, 2 numeric failure, 3 statistical rejection
//! in assert mode. Errors are printed to stderr as one JSON object.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kwise::experiment::{
    config_hash, gof_battery, read_csv_column, sample_rows, table_rows, write_csv, LawKind, SAMPLE_HEADER,
    TABLE_HEADER,
};
use kwise::margins::margin_by_name;
use kwise::sampler::with_pool;
use kwise::stats_tests::exact::exact_kwise_check;
use kwise::stats_tests::gof::{two_sample_ks, GofTest};
use kwise::stats_tests::sampled::{test_kwise_sampled, SampledConfig};
use kwise::{
    preset, run_experiment, simulate, Error, ExperimentConfig, Family, Grid, LawSpec, Result, SimulationConfig,
    SimulationTarget,
};

const EXIT_REJECTED: u8 = kwise::experiment::EXIT_REJECTED as u8;

#[derive(Parser, Debug)]
#[command(name = "kwise", version, about = "K-tuplewise independent sequences from graph labelings")]
struct Cli {
    /// Worker threads (default: KWISE_THREADS, then all cores). Never changes results.
    #[arg(long, global = true, env = "KWISE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a family graph and print or write it as JSON.
    Graphgen(GraphgenArgs),
    /// Simulate replications of Xi_n, xi_n and optionally S_n into a CSV.
    Simulate(SimulateArgs),
    /// Tabulate the pdf and cdf of a limit law into a CSV.
    Limit(LimitArgs),
    /// Check K-wise independence of the edge indicators.
    Independence(IndependenceArgs),
    /// Goodness-of-fit tests on a CSV column.
    Gof(GofArgs),
    /// Run a preset or a JSON experiment config.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct GraphgenArgs {
    /// bipartite | two_hub | hypercube | fan | cage
    #[arg(long)]
    family: Family,
    /// Family parameter: m, or the prime q for cage.
    #[arg(long)]
    param: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    param: u64,
    /// Number of labels.
    #[arg(long, default_value_t = 2)]
    ell: u32,
    /// bernoulli | uniform01 | normal; S_n is left empty without a margin.
    #[arg(long)]
    margin: Option<String>,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    /// Use the closed-form representation of Xi (bipartite; two_hub and fan at ell = 2).
    #[arg(long)]
    fast: bool,
    /// CSV with columns rep_index, xi_count, xi_std, s_n.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LimitArgs {
    /// gaussian | vg | s-limit | two-hub-mixture, optionally with `:key=value,...`.
    #[arg(long)]
    law: String,
    /// Labels (vg without --n, s-limit).
    #[arg(long)]
    ell: Option<u32>,
    /// Mixing coefficient (s-limit, two-hub-mixture).
    #[arg(long)]
    r: Option<f64>,
    /// Number of products for vg; selects the law of sum_i W_i Z_i.
    #[arg(long)]
    n: Option<u32>,
    /// Scale of the vg product sum.
    #[arg(long)]
    s: Option<f64>,
    /// lo:hi:step
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// CSV with columns x, pdf, cdf.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IndependenceArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    param: u64,
    #[arg(long, default_value_t = 2)]
    ell: u32,
    /// Tuple size K.
    #[arg(long = "k")]
    k: usize,
    /// Chi-square tests on sampled tuples instead of exact enumeration.
    #[arg(long)]
    sampled: bool,
    #[arg(long, default_value_t = 200, requires = "sampled")]
    tuples: usize,
    #[arg(long, default_value_t = 100_000, requires = "sampled")]
    reps: u64,
    #[arg(long, requires = "sampled")]
    seed: Option<u64>,
    /// Family-wise level of the sampled tests (Bonferroni over tuples).
    #[arg(long, default_value_t = 0.01, requires = "sampled")]
    alpha: f64,
    /// Exit with 3 when dependence is found.
    #[arg(long = "assert")]
    assert_mode: bool,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GofArgs {
    /// CSV produced by `simulate` or `run`.
    #[arg(long)]
    input: PathBuf,
    /// Column to test.
    #[arg(long, default_value = "s_n")]
    column: String,
    /// Reference law spec, e.g. `gaussian` or `s-limit:ell=2,r=0.99`.
    #[arg(long, default_value = "gaussian")]
    law: String,
    /// Comma-separated: ks, ad, chi2, ks2.
    #[arg(long, default_value = "ks,ad,chi2", value_delimiter = ',')]
    tests: Vec<String>,
    /// Chi-square cells (default ceil(2 n^{2/5})).
    #[arg(long)]
    bins: Option<usize>,
    /// Second CSV for the two-sample KS test (ks2).
    #[arg(long)]
    input2: Option<PathBuf>,
    /// Reject inputs whose config hash differs.
    #[arg(long)]
    expect_hash: Option<String>,
    /// Exit with 3 when any test rejects at --alpha.
    #[arg(long = "assert")]
    assert_mode: bool,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["preset", "config"])))]
struct RunArgs {
    /// figure2 | figure3 | section5 | theorem2-convergence | theorem3-convergence | hypercube-clt | fan-clt
    #[arg(long)]
    preset: Option<String>,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed of a preset (required with --preset).
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the artifacts.
    #[arg(long)]
    out_dir: PathBuf,
    /// Exit with 3 when a check fails.
    #[arg(long = "assert")]
    assert_mode: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            // a closed pipe (`| head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn graphgen(a: &GraphgenArgs) -> Result<u8> {
    let g = a.family.build(a.param)?;
    emit(a.out.as_deref(), &g.to_json()?)?;
    Ok(0)
}

fn simulate_cmd(a: &SimulateArgs, threads: Option<usize>) -> Result<u8> {
    let margin = a.margin.as_deref().map(|m| margin_by_name(m, a.ell)).transpose()?;
    let target = if a.fast {
        SimulationTarget::Family { family: a.family, param: a.param }
    } else {
        SimulationTarget::Graph(a.family.build(a.param)?)
    };
    let cfg = SimulationConfig { ell: a.ell, replications: a.reps, seed: a.seed, fast_path: a.fast, threads };
    let records = simulate(&target, margin.as_ref(), &cfg)?;
    let hash = config_hash(&json!({
        "command": "simulate",
        "family": a.family,
        "param": a.param,
        "ell": a.ell,
        "margin": a.margin,
        "replications": a.reps,
        "seed": a.seed,
        "fast_path": a.fast,
    }))?;
    write_csv(&a.out, &hash, &SAMPLE_HEADER, &sample_rows(&records))?;
    Ok(0)
}

fn limit_cmd(a: &LimitArgs) -> Result<u8> {
    let mut spec: LawSpec = a.law.parse()?;
    spec.ell = a.ell.or(spec.ell);
    spec.r = a.r.or(spec.r);
    spec.n = a.n.or(spec.n);
    spec.s = a.s.or(spec.s);
    if spec.kind == LawKind::Gaussian && (spec.ell.is_some() || spec.r.is_some()) {
        log::warn!("gaussian law ignores ell and r");
    }
    let grid = Grid::parse(&a.grid)?;
    let table = spec.build()?.table(&grid)?;
    let hash = config_hash(&json!({
        "command": "limit",
        "law": spec,
        "grid": [grid.lo, grid.hi, grid.step],
    }))?;
    write_csv(&a.out, &hash, &TABLE_HEADER, &table_rows(&table))?;
    Ok(0)
}

fn independence_cmd(a: &IndependenceArgs, threads: Option<usize>) -> Result<u8> {
    let g = a.family.build(a.param)?;
    if a.sampled {
        let seed = a.seed.ok_or_else(|| Error::Invalid("--sampled needs --seed".into()))?;
        let cfg = SampledConfig { ell: a.ell, tuple_size: a.k, reps: a.reps, seed, alpha: a.alpha, threads };
        let r = test_kwise_sampled(&g, a.tuples, &cfg)?;
        emit(a.out.as_deref(), &to_json(&r))?;
        Ok(if a.assert_mode && r.rejected > 0 { EXIT_REJECTED } else { 0 })
    } else {
        let r = with_pool(threads, || exact_kwise_check(&g, a.ell, a.k))??;
        emit(a.out.as_deref(), &to_json(&r))?;
        Ok(if a.assert_mode && !r.independent { EXIT_REJECTED } else { 0 })
    }
}

fn parse_test(name: &str) -> Result<GofTest> {
    match name.trim() {
        "ks" => Ok(GofTest::Ks),
        "ad" | "anderson_darling" => Ok(GofTest::AndersonDarling),
        "chi2" | "pearson_chi2" => Ok(GofTest::PearsonChi2),
        "ks2" | "two_sample_ks" => Ok(GofTest::TwoSampleKs),
        other => Err(Error::Invalid(format!("unknown test `{other}` (expected ks, ad, chi2 or ks2)"))),
    }
}

fn gof_cmd(a: &GofArgs) -> Result<u8> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Invalid("--alpha must lie in (0, 1)".into()));
    }
    let tests = a.tests.iter().map(|t| parse_test(t)).collect::<Result<Vec<_>>>()?;
    let (hash, samples) = read_csv_column(&a.input, &a.column, a.expect_hash.as_deref())?;
    let spec: LawSpec = a.law.parse()?;
    let law = spec.build()?;
    let one_sample: Vec<GofTest> = tests.iter().copied().filter(|t| *t != GofTest::TwoSampleKs).collect();
    let (ks_distance, mut reports) = gof_battery(&samples, &law, &one_sample, a.bins)?;
    if tests.contains(&GofTest::TwoSampleKs) {
        let other = a
            .input2
            .as_deref()
            .ok_or_else(|| Error::Invalid("ks2 needs --input2".into()))?;
        let (_, b) = read_csv_column(other, &a.column, a.expect_hash.as_deref())?;
        reports.push(two_sample_ks(&samples, &b)?);
    }
    let rejected = reports.iter().any(|r| r.rejects_at(a.alpha));
    let report = json!({
        "config_hash": hash,
        "column": a.column,
        "reference_law": spec.to_string(),
        "ks_distance": ks_distance,
        "reports": reports,
    });
    emit(a.out.as_deref(), &to_json(&report))?;
    Ok(if a.assert_mode && rejected { EXIT_REJECTED } else { 0 })
}

fn run_cmd(a: &RunArgs, threads: Option<usize>) -> Result<u8> {
    let cfg = match (&a.preset, &a.config) {
        (Some(name), _) => {
            let seed = a.seed.ok_or_else(|| Error::Invalid("--preset needs --seed".into()))?;
            preset(name, seed)?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, None) => return Err(Error::Invalid("give --preset or --config".into())),
    };
    if a.print_config {
        emit(None, &cfg.to_json())?;
        return Ok(0);
    }
    let out = run_experiment(&cfg, &a.out_dir, threads)?;
    for c in &out.checks {
        log::info!(
            "{}: {} ({} vs {})",
            c.name,
            if c.passed { "pass" } else { "fail" },
            c.value,
            c.threshold
        );
    }
    emit(
        None,
        &to_json(&json!({
            "config_hash": out.config_hash,
            "files": out.files,
            "checks": out.checks,
        })),
    )?;
    Ok(out.exit_code(a.assert_mode) as u8)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    if cli.threads == Some(0) {
        return Err(Error::Invalid("--threads must be >= 1".into()));
    }
    let t = cli.threads;
    match &cli.command {
        Command::Graphgen(a) => graphgen(a),
        Command::Simulate(a) => simulate_cmd(a, t),
        Command::Limit(a) => limit_cmd(a),
        Command::Independence(a) => independence_cmd(a, t),
        Command::Gof(a) => gof_cmd(a),
        Command::Run(a) => run_cmd(a, t),
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("validation", e.to_string().trim(), 1),
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(e.kind(), &e.to_string(), e.exit_code() as u8),
    }
}
