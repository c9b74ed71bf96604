//! Command-line front end: verification matrices from JSON configs,
//! one-shot score evaluation, forecast backtests, h-matrix recovery, and
//! level-set probes. Exit codes: 0 all asserted checks pass, 1 a check
//! failed, 2 usage or configuration error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use scorelab_core::backtest::{
    evaluate, load_forecasts, render_sweep_table, render_table, score_sweep,
};
use scorelab_core::dist::Distribution;
use scorelab_core::functionals::FunctionalSpec;
use scorelab_core::lab::{
    default_panel, levelset_probe, osband_recover_h, run_matrix, VerifyOptions,
};
use scorelab_core::parse::{parse_distribution, parse_functional, parse_score};
use scorelab_core::scores::ScoreSpec;

#[derive(Parser)]
#[command(
    name = "scorelab",
    version,
    about = "Strictly consistent scoring functions, identification functions, and their verification lab"
)]
struct Cli {
    /// Seed override for sampling checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where to write JSON reports (file; overrides any config output path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies every pass/fail tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification matrix described by a JSON config file.
    Verify {
        /// Path to a RunConfig JSON file (see docs/grammar.md).
        config: PathBuf,
    },
    /// Evaluate a score literal at one forecast x and outcome y.
    Score {
        /// Score literal, e.g. "pinball(0.5, G=identity)".
        score: String,
        /// Forecast vector, comma separated, e.g. "0" or "-1.6,-2.1".
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Realized outcome.
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
    },
    /// Score a forecast table against a realized series and rank methods.
    Backtest {
        /// CSV with header period,y,<method>:x1[,<method>:x2,...].
        table: PathBuf,
        /// Score literal applied to every method.
        #[arg(long)]
        score: String,
        /// Additional score literals for a ranking-stability sweep
        /// (repeat the flag once per literal).
        #[arg(long = "sweep")]
        sweep: Vec<String>,
    },
    /// Recover the h-matrix linking a score's gradient to its ident.
    Osband {
        /// Score literal whose catalog ident is used.
        score: String,
        /// Evaluation point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        /// Distribution literal seeding the mixture panel.
        #[arg(long, default_value = "normal(0, 1)")]
        dist: String,
        /// Base step for the finite-difference gradients.
        #[arg(long, default_value_t = 1e-5)]
        fd_step: f64,
    },
    /// Probe level-set convexity of one functional component along the
    /// mixture path between two distributions that agree on it.
    Levelset {
        /// Functional literal, e.g. "mean_variance" or "var_es(0.5)".
        functional: String,
        /// Component of the functional to probe (0-based).
        #[arg(long)]
        component: usize,
        /// First endpoint distribution literal.
        #[arg(long)]
        f0: String,
        /// Second endpoint distribution literal.
        #[arg(long)]
        f1: String,
        /// Number of mixture weights on [0, 1].
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
}

enum Failure {
    /// Usage or configuration problem: exit 2.
    Usage(String),
    /// A verification check failed: exit 1.
    Check(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Verify { config } => cmd_verify(config, cli.seed, cli.out, cli.tol_scale),
        Command::Score { score, x, y } => cmd_score(score, x, *y),
        Command::Backtest { table, score, sweep } => cmd_backtest(table, score, sweep, cli.out),
        Command::Osband {
            score,
            at,
            dist,
            fd_step,
        } => cmd_osband(score, at, dist, *fd_step, cli.tol_scale),
        Command::Levelset {
            functional,
            component,
            f0,
            f1,
            grid,
        } => cmd_levelset(functional, *component, f0, f1, *grid),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that round-trips, so 0.5 prints as "0.5" rather than "5.00e-1".
fn fmt_sig(v: f64, digits: i32) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - mag);
    format!("{}", (v * factor).round() / factor)
}

fn parse_vector(raw: &str) -> std::result::Result<Vec<f64>, Failure> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("invalid coordinate {part:?} in --x/--at")))
        })
        .collect()
}

fn cmd_score(literal: &str, x: &str, y: f64) -> CmdResult {
    let score = parse_score(literal).map_err(usage)?;
    score.validate().map_err(usage)?;
    let xs = parse_vector(x)?;
    let value = score.score(&xs, y).map_err(usage)?;
    println!("{}", fmt_sig(value, 12));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    distributions: Vec<String>,
    functionals: Vec<String>,
    scores: Vec<String>,
    #[serde(default = "default_checks")]
    checks: Vec<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    levelset_probes: Vec<LevelsetProbeConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelsetProbeConfig {
    functional: String,
    component: usize,
    f0: String,
    f1: String,
    #[serde(default = "default_lambda_count")]
    lambdas: usize,
}

fn default_checks() -> Vec<String> {
    ["consistency", "orientation", "osband", "symmetry"]
        .map(String::from)
        .to_vec()
}

fn default_lambda_count() -> usize {
    21
}

const KNOWN_CHECKS: [&str; 5] = ["consistency", "orientation", "osband", "symmetry", "levelset"];

fn lambda_grid(count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![0.0, 0.5, 1.0];
    }
    (0..count)
        .map(|i| i as f64 / (count - 1) as f64)
        .collect()
}

fn cmd_verify(
    path: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    tol_scale: f64,
) -> CmdResult {
    let raw = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig =
        serde_json::from_str(&raw).map_err(|e| Failure::Usage(format!("invalid config: {e}")))?;
    if config.distributions.is_empty() {
        return Err(Failure::Usage("config lists no distributions".into()));
    }
    if config.functionals.is_empty() {
        return Err(Failure::Usage("config lists no functionals".into()));
    }
    if config.scores.is_empty() {
        return Err(Failure::Usage("config lists no scores".into()));
    }
    for check in &config.checks {
        if !KNOWN_CHECKS.contains(&check.as_str()) {
            return Err(Failure::Usage(format!(
                "unknown check {check:?}; expected a subset of {KNOWN_CHECKS:?}"
            )));
        }
    }
    let has = |name: &str| config.checks.iter().any(|c| c == name);
    if has("levelset") && config.levelset_probes.is_empty() {
        return Err(Failure::Usage(
            "levelset check requested but no levelset_probes configured".into(),
        ));
    }

    let dists: Vec<Distribution> = config
        .distributions
        .iter()
        .map(|s| parse_distribution(s))
        .collect::<std::result::Result<_, _>>()
        .map_err(usage)?;
    let functionals: Vec<FunctionalSpec> = config
        .functionals
        .iter()
        .map(|s| parse_functional(s))
        .collect::<std::result::Result<_, _>>()
        .map_err(usage)?;
    let scores: Vec<ScoreSpec> = config
        .scores
        .iter()
        .map(|s| parse_score(s))
        .collect::<std::result::Result<_, _>>()
        .map_err(usage)?;

    let mut cells = Vec::new();
    for score in &scores {
        let natural = score.natural_functional().map_err(usage)?;
        let matched: Vec<&FunctionalSpec> =
            functionals.iter().filter(|f| **f == natural).collect();
        if matched.is_empty() {
            return Err(Failure::Usage(format!(
                "score {score} has no matching functional in the config (its target is {natural})"
            )));
        }
        for f in matched {
            for d in &dists {
                cells.push((score.clone(), (*f).clone(), d.clone()));
            }
        }
    }

    let opts = VerifyOptions {
        n_samples: 400,
        seed: seed.or(config.seed).unwrap_or(7),
        tol_scale,
        run_consistency: has("consistency"),
        run_orientation: has("orientation"),
        run_osband: has("osband"),
        run_symmetry: has("symmetry"),
    };
    let outcomes = run_matrix(&cells, &opts);

    let mut failures = 0usize;
    let mut rendered = Vec::with_capacity(cells.len());
    for ((score, functional, d), outcome) in cells.iter().zip(&outcomes) {
        match outcome {
            Ok(report) => {
                let failing: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                if failing.is_empty() {
                    println!("PASS  {score} | {functional} | {d}");
                } else {
                    println!("FAIL  {score} | {functional} | {d} [{}]", failing.join(", "));
                    failures += 1;
                }
                rendered.push(serde_json::to_value(report).expect("reports serialize"));
            }
            Err(e) => {
                println!("ERROR {score} | {functional} | {d}: {e}");
                failures += 1;
                rendered.push(json!({
                    "score": score.to_string(),
                    "functional": functional.to_string(),
                    "distribution": d.to_string(),
                    "error": e.to_string(),
                }));
            }
        }
    }

    let mut probes = Vec::new();
    if has("levelset") {
        for probe in &config.levelset_probes {
            let functional = parse_functional(&probe.functional).map_err(usage)?;
            let f0 = parse_distribution(&probe.f0).map_err(usage)?;
            let f1 = parse_distribution(&probe.f1).map_err(usage)?;
            let report = levelset_probe(
                &functional,
                probe.component,
                &f0,
                &f1,
                &lambda_grid(probe.lambdas),
            )
            .map_err(usage)?;
            println!(
                "LEVELSET {}[{}]: max deviation {}, violation {}",
                report.functional,
                report.component,
                fmt_sig(report.max_deviation, 6),
                report.violation
            );
            probes.push(serde_json::to_value(&report).expect("reports serialize"));
        }
    }

    let payload = json!({ "cells": rendered, "levelset": probes });
    if let Some(dest) = out.or(config.output) {
        fs::write(&dest, serde_json::to_string_pretty(&payload).expect("payload serializes"))
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", dest.display())))?;
        println!("wrote {}", dest.display());
    }

    if failures > 0 {
        Err(Failure::Check(format!(
            "{failures} of {} cells failed",
            cells.len()
        )))
    } else {
        Ok(())
    }
}

fn cmd_backtest(
    table_path: &PathBuf,
    score_literal: &str,
    sweep: &[String],
    out: Option<PathBuf>,
) -> CmdResult {
    let table = load_forecasts(table_path).map_err(usage)?;
    let score = parse_score(score_literal).map_err(usage)?;
    let report = evaluate(&table, &score).map_err(usage)?;
    print!("{}", render_table(&report));
    let mut payload = json!({ "comparison": report });
    if !sweep.is_empty() {
        let sweep_report = score_sweep(&table, sweep).map_err(usage)?;
        print!("{}", render_sweep_table(&sweep_report));
        payload["sweep"] = serde_json::to_value(&sweep_report).expect("reports serialize");
    }
    if let Some(dest) = out {
        fs::write(&dest, serde_json::to_string_pretty(&payload).expect("payload serializes"))
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", dest.display())))?;
        println!("wrote {}", dest.display());
    }
    Ok(())
}

fn cmd_osband(
    score_literal: &str,
    at: &str,
    dist_literal: &str,
    fd_step: f64,
    tol_scale: f64,
) -> CmdResult {
    let score = parse_score(score_literal).map_err(usage)?;
    score.validate().map_err(usage)?;
    let x = parse_vector(at)?;
    let d = parse_distribution(dist_literal).map_err(usage)?;
    let ident = score.natural_ident().map_err(usage)?;
    let panel = default_panel(&d, score.dim()).map_err(usage)?;
    let report = osband_recover_h(&score, &ident, &x, &panel, fd_step).map_err(usage)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("reports serialize")
    );
    let tol = 1e-4 * tol_scale;
    if report.residual > tol {
        Err(Failure::Check(format!(
            "h-matrix residual {} exceeds {}",
            fmt_sig(report.residual, 6),
            fmt_sig(tol, 6)
        )))
    } else {
        Ok(())
    }
}

fn cmd_levelset(
    functional_literal: &str,
    component: usize,
    f0_literal: &str,
    f1_literal: &str,
    grid: usize,
) -> CmdResult {
    let functional = parse_functional(functional_literal).map_err(usage)?;
    let f0 = parse_distribution(f0_literal).map_err(usage)?;
    let f1 = parse_distribution(f1_literal).map_err(usage)?;
    let report = levelset_probe(&functional, component, &f0, &f1, &lambda_grid(grid))
        .map_err(usage)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("reports serialize")
    );
    Ok(())
}
