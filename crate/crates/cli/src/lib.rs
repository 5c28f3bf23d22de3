//! `gutsim` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 divergent run,
//! 3 failed equivalence check or hyperparameter validation.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gut_core::algorithms::{validate_hyperparameters, AlgorithmKind};
use gut_core::config::{Manifest, RunConfig, Subcommand, KEYS};
use gut_core::harness::{
    check_problem_equivalence, run_consensus, run_training, ConsensusMethod, MetricTrace,
};
use gut_core::models::make_problem;
use gut_core::partition::{dirichlet_partition, partition_histogram};
use gut_core::plot::emit_plot;
use gut_core::rng::{self, Purpose};
use gut_core::topology::{build_topology, validate_mixing, MixingMatrix};
use gut_core::{Error, Result};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_FAILED_CHECK: i32 = 3;

/// Parsed command line: subcommand, optional config file, flag overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub subcommand: Subcommand,
    pub config_file: Option<PathBuf>,
    pub flags: Vec<(String, String)>,
}

pub fn usage() -> String {
    let names: Vec<&str> = Subcommand::ALL.iter().map(|c| c.name()).collect();
    format!(
        "usage: gutsim <{}> [--config=FILE] [--key=value ...]\n\nkeys:\n  {}\n",
        names.join("|"),
        KEYS.join("\n  ")
    )
}

/// Splits `argv` (without the program name) into an [`Invocation`].
pub fn parse_args(args: &[String]) -> Result<Invocation> {
    let (first, rest) = args
        .split_first()
        .ok_or_else(|| Error::Config("missing subcommand".into()))?;
    let subcommand: Subcommand = first.parse()?;
    let mut config_file = None;
    let mut flags = Vec::new();
    let mut iter = rest.iter();
    while let Some(arg) = iter.next() {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("unexpected argument '{arg}'")))?;
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = iter
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag --{body} needs a value")))?;
                (body.to_string(), v.clone())
            }
        };
        if key == "config" {
            config_file = Some(PathBuf::from(value));
        } else {
            flags.push((key, value));
        }
    }
    Ok(Invocation {
        subcommand,
        config_file,
        flags,
    })
}

/// Resolves the configuration for an invocation.
pub fn load_config(inv: &Invocation) -> Result<RunConfig> {
    let text = match &inv.config_file {
        Some(path) => fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    RunConfig::resolve(inv.subcommand, &text, &inv.flags)
}

/// Runs the command line and returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    if args.is_empty() || matches!(args[0].as_str(), "-h" | "--help" | "help") {
        print!("{}", usage());
        return if args.is_empty() {
            EXIT_CONFIG
        } else {
            EXIT_OK
        };
    }
    let cfg = match parse_args(args).and_then(|inv| load_config(&inv)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match dispatch(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Runs a resolved configuration, writing artifacts under `run.output_dir`.
pub fn dispatch(cfg: &RunConfig) -> Result<i32> {
    let out = PathBuf::from(&cfg.run.output_dir);
    fs::create_dir_all(&out)?;
    let (code, outputs) = match cfg.subcommand {
        Subcommand::Topology => topology(cfg, &out)?,
        Subcommand::Partition => partition(cfg, &out)?,
        Subcommand::Consensus => consensus(cfg, &out)?,
        Subcommand::Train => train(cfg, &out)?,
        Subcommand::Equivalence => equivalence(cfg, &out)?,
        Subcommand::Validate => validate(cfg, &out)?,
    };
    let manifest = Manifest::new(cfg, outputs);
    write(&out, "manifest.json", &manifest.to_json()?)?;
    Ok(code)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<String> {
    fs::write(dir.join(name), contents)?;
    Ok(name.to_string())
}

fn mixing(cfg: &RunConfig) -> Result<MixingMatrix> {
    build_topology(cfg.topology.kind, cfg.topology.n, cfg.topology.grid)
        .map_err(|e| Error::Config(e.to_string()))
}

fn topology(cfg: &RunConfig, out: &Path) -> Result<(i32, Vec<String>)> {
    let w = mixing(cfg)?;
    let stats = w.spectral_stats()?;
    let report = validate_mixing(&w);
    let doc = json!({
        "kind": w.kind().to_string(),
        "n": w.n(),
        "lambda2": stats.lambda2,
        "lambdaN": stats.lambda_n,
        "rho": stats.rho,
        "compliant": report.is_compliant(),
    });
    let text = serde_json::to_string_pretty(&doc)?;
    println!("{text}");
    Ok((
        EXIT_OK,
        vec![
            write(out, "topology.csv", &w.to_csv())?,
            write(out, "spectral.json", &text)?,
        ],
    ))
}

fn partition(cfg: &RunConfig, out: &Path) -> Result<(i32, Vec<String>)> {
    let classes = cfg.problem.classes.max(1);
    let labels: Vec<usize> = (0..cfg.problem.samples).map(|i| i % classes).collect();
    let p = dirichlet_partition(
        &labels,
        cfg.topology.n,
        cfg.partition.alpha,
        cfg.partition.seed,
        cfg.partition.min_per_agent,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    let hist = partition_histogram(&p, &labels)?;
    let csv = hist.to_csv();
    print!("{csv}");
    println!("skew={}", hist.skew);
    Ok((EXIT_OK, vec![write(out, "partition.csv", &csv)?]))
}

fn initial_state(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::global(seed, Purpose::Init);
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r))
}

fn consensus(cfg: &RunConfig, out: &Path) -> Result<(i32, Vec<String>)> {
    let w = mixing(cfg)?;
    if cfg.consensus.d == 0 || cfg.run.rounds == 0 {
        return Err(Error::Config(
            "consensus.d and run.rounds must be positive".into(),
        ));
    }
    let seed = cfg.run.seeds[0];
    let x0 = initial_state(w.n(), cfg.consensus.d, seed);
    let method = cfg.consensus.method;
    let (mu, beta) = (cfg.algorithm.mu, cfg.algorithm.beta);
    let mut trace = run_consensus(&w, &x0, method, mu, beta, cfg.run.rounds)?;
    trace.meta.seed = Some(seed);
    let mut outputs = vec![write(out, "consensus.csv", &trace.to_csv())?];

    let baseline = match method {
        ConsensusMethod::Gut => Some(ConsensusMethod::Gossip),
        ConsensusMethod::QgGutm => Some(ConsensusMethod::QgGossip),
        _ => None,
    };
    let reference = baseline
        .map(|b| run_consensus(&w, &x0, b, 0.0, beta, cfg.run.rounds))
        .transpose()?;
    let label = format!("{method} (mu={mu})");
    let mut series: Vec<(&str, &MetricTrace)> = vec![(label.as_str(), &trace)];
    if let (Some(b), Some(r)) = (baseline, reference.as_ref()) {
        series.push((b.name(), r));
    }
    emit_plot(&series, &out.join("consensus.svg"))?;
    outputs.push("consensus.svg".into());

    if let Some(last) = trace.last() {
        println!(
            "{method}: round {} consensus_error={:e}",
            last.round, last.consensus_error
        );
    }
    if let Some(reason) = &trace.divergence {
        eprintln!("diverged: {reason}");
        return Ok((EXIT_DIVERGED, outputs));
    }
    Ok((EXIT_OK, outputs))
}

fn train(cfg: &RunConfig, out: &Path) -> Result<(i32, Vec<String>)> {
    let w = mixing(cfg)?;
    let spec = cfg.algorithm_spec();
    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
    let report = run_training(&w, &cfg.problem_spec(), &spec, &cfg.train_options()).map_err(
        |e| match e {
            Error::Io(_) => e,
            other => Error::Config(other.to_string()),
        },
    )?;
    let mut outputs = Vec::new();
    for trace in &report.traces {
        let seed = trace.meta.seed.unwrap_or_default();
        outputs.push(write(
            out,
            &format!("trace_seed{seed}.csv"),
            &trace.to_csv(),
        )?);
    }
    outputs.push(write(
        out,
        "summary.json",
        &serde_json::to_string_pretty(&report.summary)?,
    )?);
    let labels: Vec<String> = report
        .traces
        .iter()
        .map(|t| format!("{} seed {}", t.meta.method, t.meta.seed.unwrap_or_default()))
        .collect();
    let series: Vec<(&str, &MetricTrace)> = labels
        .iter()
        .map(String::as_str)
        .zip(&report.traces)
        .collect();
    emit_plot(&series, &out.join("train.svg"))?;
    outputs.push("train.svg".into());

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&report.summary)?);
    if report.any_divergent() {
        for t in report.traces.iter().filter(|t| t.is_divergent()) {
            eprintln!(
                "seed {} diverged: {}",
                t.meta.seed.unwrap_or_default(),
                t.divergence.as_deref().unwrap_or("")
            );
        }
        return Ok((EXIT_DIVERGED, outputs));
    }
    Ok((EXIT_OK, outputs))
}

fn equivalence(cfg: &RunConfig, out: &Path) -> Result<(i32, Vec<String>)> {
    use AlgorithmKind::*;
    if !matches!(cfg.algorithm.kind, Gut | GutMatrix | GutBias | GutMemeff) {
        return Err(Error::Config(format!(
            "equivalence compares the GUT forms; algorithm.kind={} is not one of them",
            cfg.algorithm.kind
        )));
    }
    let w = mixing(cfg)?;
    let problem = make_problem(&cfg.problem_spec()).map_err(|e| Error::Config(e.to_string()))?;
    let mut spec = cfg.algorithm_spec();
    spec.kind = Gut;
    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
    let report = check_problem_equivalence(
        &w,
        &problem,
        &spec,
        cfg.run.batch,
        cfg.run.seeds[0],
        cfg.run.rounds,
        cfg.run.tol,
    )?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    let relation = if report.pass { "≤" } else { ">" };
    println!(
        "max deviation {:e} {relation} {:e} over {} rounds: {verdict}",
        report.max_deviation, report.tol, report.rounds
    );
    for f in &report.forms {
        println!("  {}: {:e}", f.form, f.max_deviation);
    }
    let outputs = vec![write(
        out,
        "equivalence.json",
        &serde_json::to_string_pretty(&report)?,
    )?];
    let code = if report.pass {
        EXIT_OK
    } else {
        EXIT_FAILED_CHECK
    };
    Ok((code, outputs))
}

fn validate(cfg: &RunConfig, out: &Path) -> Result<(i32, Vec<String>)> {
    let w = mixing(cfg)?;
    let rho = w.rho()?;
    let check = validate_hyperparameters(
        cfg.algorithm.eta,
        cfg.algorithm.mu,
        rho,
        cfg.problem.smoothness,
    );
    let doc = json!({
        "rho": rho,
        "smoothness": cfg.problem.smoothness,
        "eta": cfg.algorithm.eta,
        "mu": cfg.algorithm.mu,
        "eta_max": check.eta_max,
        "mu_max": check.mu_max,
        "eta_ok": check.eta_ok,
        "mu_ok": check.mu_ok,
        "compliant": check.compliant(),
    });
    let text = serde_json::to_string_pretty(&doc)?;
    println!("{text}");
    if !check.compliant() {
        eprintln!("outside the convergence regime (advisory; train still runs these settings)");
    }
    let outputs = vec![write(out, "validate.json", &text)?];
    let code = if check.compliant() {
        EXIT_OK
    } else {
        EXIT_FAILED_CHECK
    };
    Ok((code, outputs))
}
