//! Experiment harness: configuration-driven campaigns over the qvalued
//! library. Each subcommand runs one verification suite, writes CSV reports
//! plus a pass/fail summary, and the process exits nonzero iff any asserted
//! inequality failed. Reruns with the same seed are byte-identical.

mod config;
mod report;
mod suites;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::CampaignConfig;

#[derive(Parser)]
#[command(
    name = "qv",
    about = "Verification campaigns for assignment metrics, the sorting embedding, \
             almost-projections, Q-valued Dirichlet minimization, and graph-current analysis",
    version
)]
struct Cli {
    /// Campaign configuration (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Treat diagnostics as failures.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assignment-solver oracle suite and metric axioms.
    MetricBench,
    /// Embedding properties and the face-lattice dump.
    EmbedVerify,
    /// Almost-projection sweeps: stage ledger, defect exponent, energy bound.
    RhoStarVerify,
    /// Dirichlet minimization with the branch-data oracle and reverse-Holder
    /// refinements.
    DirichletMin,
    /// Excess, BV, Taylor, and varifold suites on the fixture library or a
    /// current file.
    CurrentAnalyze,
    /// Maximal-function Lipschitz approximation pipeline.
    LipschitzApprox,
    /// Three-zone competitor construction ledger.
    Competitor,
    /// Selected suites in sequence (default: all).
    Run {
        /// Comma-separated suite names.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
    },
    /// Aggregate existing summaries in the output directory.
    Report,
}

const ALL_SUITES: [&str; 7] = [
    "metric-bench",
    "embed-verify",
    "rho-star-verify",
    "dirichlet-min",
    "current-analyze",
    "lipschitz-approx",
    "competitor",
];

fn run_suite(
    name: &str,
    cfg: &CampaignConfig,
    out: &Path,
    strict: bool,
) -> anyhow::Result<bool> {
    match name {
        "metric-bench" => suites::metric::run(cfg, out, strict),
        "embed-verify" => suites::embed::run(cfg, out, strict),
        "rho-star-verify" => suites::rhostar::run(cfg, out, strict),
        "dirichlet-min" => suites::dirichlet::run(cfg, out, strict),
        "current-analyze" => suites::current::run(cfg, out, strict),
        "lipschitz-approx" => suites::lipapprox::run(cfg, out, strict),
        "competitor" => suites::competitor::run(cfg, out, strict),
        other => anyhow::bail!("unknown suite '{other}' (expected one of {ALL_SUITES:?})"),
    }
}

fn aggregate(out: &Path) -> anyhow::Result<bool> {
    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("summary_") && n.ends_with(".txt"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    for path in entries {
        let text = std::fs::read_to_string(&path)?;
        let suite = text.lines().next().unwrap_or("").replace("suite: ", "");
        let passes = text.lines().filter(|l| l.starts_with("PASS")).count();
        let fails = text.lines().filter(|l| l.starts_with("FAIL")).count();
        all_ok &= fails == 0;
        lines.push(format!("{suite}: {passes} passed, {fails} failed"));
    }
    let body = format!(
        "{}\noverall: {}\n",
        lines.join("\n"),
        if all_ok { "PASS" } else { "FAIL" }
    );
    std::fs::write(out.join("aggregate.txt"), &body)?;
    print!("{body}");
    Ok(all_ok)
}

fn main() {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match CampaignConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                std::process::exit(2);
            }
        },
        None => CampaignConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out));

    let result = (|| -> anyhow::Result<bool> {
        match &cli.command {
            Command::MetricBench => run_suite("metric-bench", &cfg, &out, cli.strict),
            Command::EmbedVerify => run_suite("embed-verify", &cfg, &out, cli.strict),
            Command::RhoStarVerify => run_suite("rho-star-verify", &cfg, &out, cli.strict),
            Command::DirichletMin => run_suite("dirichlet-min", &cfg, &out, cli.strict),
            Command::CurrentAnalyze => run_suite("current-analyze", &cfg, &out, cli.strict),
            Command::LipschitzApprox => run_suite("lipschitz-approx", &cfg, &out, cli.strict),
            Command::Competitor => run_suite("competitor", &cfg, &out, cli.strict),
            Command::Run { suite } => {
                let names: Vec<String> = if suite.is_empty() {
                    ALL_SUITES.iter().map(|s| s.to_string()).collect()
                } else {
                    suite.clone()
                };
                let mut ok = true;
                for name in &names {
                    let passed = run_suite(name, &cfg, &out, cli.strict)?;
                    println!("{name}: {}", if passed { "PASS" } else { "FAIL" });
                    ok &= passed;
                }
                Ok(ok)
            }
            Command::Report => aggregate(&out),
        }
    })();

    match result {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("one or more assertions failed; see {}", out.display());
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
