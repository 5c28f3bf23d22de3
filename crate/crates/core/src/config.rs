//! Flat `key=value` run configuration with dotted keys.
//!
//! Values resolve in three layers: built-in defaults (some subcommands carry
//! their own), then an optional config file, then `--key=value` flags.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmKind, AlgorithmSpec};
use crate::error::{Error, Result};
use crate::harness::{ConsensusMethod, TrainOptions};
use crate::models::{ProblemKind, SyntheticProblemSpec};
use crate::topology::TopologyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Topology,
    Partition,
    Consensus,
    Train,
    Equivalence,
    Validate,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Topology,
        Subcommand::Partition,
        Subcommand::Consensus,
        Subcommand::Train,
        Subcommand::Equivalence,
        Subcommand::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Topology => "topology",
            Subcommand::Partition => "partition",
            Subcommand::Consensus => "consensus",
            Subcommand::Train => "train",
            Subcommand::Equivalence => "equivalence",
            Subcommand::Validate => "validate",
        }
    }

    /// Keys that must be given explicitly, in the file or as flags.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            Subcommand::Topology => &["topology.kind", "topology.n"],
            Subcommand::Partition => &["partition.alpha"],
            Subcommand::Consensus => &["consensus.method"],
            Subcommand::Train => &["algorithm.kind"],
            Subcommand::Validate => &["algorithm.mu"],
            Subcommand::Equivalence => &[],
        }
    }

    /// Defaults that differ from the global ones for this subcommand.
    fn default_overrides(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Subcommand::Equivalence => &[
                ("topology.kind", "ring"),
                ("topology.n", "8"),
                ("problem.kind", "quadratic"),
                ("problem.zeta", "1"),
                ("problem.sigma", "0.1"),
                ("algorithm.kind", "gut"),
                ("algorithm.eta", "0.05"),
                ("algorithm.mu", "0.9"),
                ("run.rounds", "100"),
            ],
            _ => &[],
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Subcommand::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!(
                    "unknown subcommand '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Every key accepted in config files and flags.
pub const KEYS: &[&str] = &[
    "topology.kind",
    "topology.n",
    "topology.grid",
    "partition.alpha",
    "partition.seed",
    "partition.min_per_agent",
    "problem.kind",
    "problem.d",
    "problem.zeta",
    "problem.sigma",
    "problem.smoothness",
    "problem.classes",
    "problem.samples",
    "problem.test_samples",
    "problem.hidden",
    "problem.separation",
    "problem.seed",
    "algorithm.kind",
    "algorithm.eta",
    "algorithm.mu",
    "algorithm.beta",
    "algorithm.nesterov",
    "consensus.method",
    "consensus.d",
    "run.rounds",
    "run.batch",
    "run.seeds",
    "run.eval_every",
    "run.output_dir",
    "run.threads",
    "run.decay",
    "run.tol",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub n: usize,
    pub grid: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub alpha: f64,
    pub seed: u64,
    pub min_per_agent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub d: usize,
    pub zeta: f64,
    pub sigma: f64,
    pub smoothness: f64,
    pub classes: usize,
    pub samples: usize,
    pub test_samples: usize,
    pub hidden: usize,
    pub separation: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub eta: f64,
    pub mu: f64,
    pub beta: f64,
    pub nesterov: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub method: ConsensusMethod,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub rounds: usize,
    pub batch: usize,
    pub seeds: Vec<u64>,
    pub eval_every: usize,
    pub output_dir: String,
    pub threads: Option<usize>,
    pub decay: bool,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub topology: TopologyConfig,
    pub partition: PartitionConfig,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    pub consensus: ConsensusConfig,
    pub run: RunSection,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for {key}"))),
    }
}

fn parse_grid(value: &str) -> Result<Option<(usize, usize)>> {
    let v = value.trim();
    if v.is_empty() {
        return Ok(None);
    }
    let (r, c) = v
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("topology.grid must look like 4x8, got '{v}'")))?;
    Ok(Some((
        parse("topology.grid", r)?,
        parse("topology.grid", c)?,
    )))
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let seeds = value
        .split(',')
        .map(|s| parse::<u64>("run.seeds", s))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::Config(
            "run.seeds must list at least one seed".into(),
        ));
    }
    Ok(seeds)
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown key '{key}'; valid keys: {}",
            KEYS.join(", ")
        )))
    }
}

impl RunConfig {
    /// Built-in defaults for `subcommand`.
    pub fn defaults(subcommand: Subcommand) -> Self {
        let mut cfg = RunConfig {
            subcommand,
            topology: TopologyConfig {
                kind: TopologyKind::Ring,
                n: 16,
                grid: None,
            },
            partition: PartitionConfig {
                alpha: 0.01,
                seed: 0,
                min_per_agent: 1,
            },
            problem: ProblemConfig {
                kind: ProblemKind::Quadratic,
                d: 10,
                zeta: 1.0,
                sigma: 0.1,
                smoothness: 1.0,
                classes: 10,
                samples: 4000,
                test_samples: 2000,
                hidden: 32,
                separation: 1.0,
                seed: 0,
            },
            algorithm: AlgorithmConfig {
                kind: AlgorithmKind::Gut,
                eta: 0.05,
                mu: 0.9,
                beta: 0.9,
                nesterov: false,
            },
            consensus: ConsensusConfig {
                method: ConsensusMethod::Gut,
                d: 32,
            },
            run: RunSection {
                rounds: 200,
                batch: 32,
                seeds: vec![1],
                eval_every: 10,
                output_dir: "./out".into(),
                threads: None,
                decay: true,
                tol: 1e-8,
            },
        };
        for (k, v) in subcommand.default_overrides() {
            cfg.set(k, v).expect("built-in defaults are valid");
        }
        cfg
    }

    /// Sets one dotted key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        check_key(key)?;
        match key {
            "topology.kind" => self.topology.kind = value.trim().parse().map_err(cfg_err)?,
            "topology.n" => self.topology.n = parse(key, value)?,
            "topology.grid" => self.topology.grid = parse_grid(value)?,
            "partition.alpha" => self.partition.alpha = parse(key, value)?,
            "partition.seed" => self.partition.seed = parse(key, value)?,
            "partition.min_per_agent" => self.partition.min_per_agent = parse(key, value)?,
            "problem.kind" => self.problem.kind = value.trim().parse().map_err(cfg_err)?,
            "problem.d" => self.problem.d = parse(key, value)?,
            "problem.zeta" => self.problem.zeta = parse(key, value)?,
            "problem.sigma" => self.problem.sigma = parse(key, value)?,
            "problem.smoothness" => self.problem.smoothness = parse(key, value)?,
            "problem.classes" => self.problem.classes = parse(key, value)?,
            "problem.samples" => self.problem.samples = parse(key, value)?,
            "problem.test_samples" => self.problem.test_samples = parse(key, value)?,
            "problem.hidden" => self.problem.hidden = parse(key, value)?,
            "problem.separation" => self.problem.separation = parse(key, value)?,
            "problem.seed" => self.problem.seed = parse(key, value)?,
            "algorithm.kind" => self.algorithm.kind = value.trim().parse().map_err(cfg_err)?,
            "algorithm.eta" => self.algorithm.eta = parse(key, value)?,
            "algorithm.mu" => self.algorithm.mu = parse(key, value)?,
            "algorithm.beta" => self.algorithm.beta = parse(key, value)?,
            "algorithm.nesterov" => self.algorithm.nesterov = parse_bool(key, value)?,
            "consensus.method" => self.consensus.method = value.trim().parse()?,
            "consensus.d" => self.consensus.d = parse(key, value)?,
            "run.rounds" => self.run.rounds = parse(key, value)?,
            "run.batch" => self.run.batch = parse(key, value)?,
            "run.seeds" => self.run.seeds = parse_seeds(value)?,
            "run.eval_every" => self.run.eval_every = parse(key, value)?,
            "run.output_dir" => self.run.output_dir = value.trim().to_string(),
            "run.threads" => {
                self.run.threads = match value.trim() {
                    "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "run.decay" => self.run.decay = parse_bool(key, value)?,
            "run.tol" => self.run.tol = parse(key, value)?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Text form of one dotted key, the inverse of [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Result<String> {
        check_key(key)?;
        Ok(match key {
            "topology.kind" => self.topology.kind.to_string(),
            "topology.n" => self.topology.n.to_string(),
            "topology.grid" => self
                .topology
                .grid
                .map(|(r, c)| format!("{r}x{c}"))
                .unwrap_or_default(),
            "partition.alpha" => self.partition.alpha.to_string(),
            "partition.seed" => self.partition.seed.to_string(),
            "partition.min_per_agent" => self.partition.min_per_agent.to_string(),
            "problem.kind" => self.problem.kind.to_string(),
            "problem.d" => self.problem.d.to_string(),
            "problem.zeta" => self.problem.zeta.to_string(),
            "problem.sigma" => self.problem.sigma.to_string(),
            "problem.smoothness" => self.problem.smoothness.to_string(),
            "problem.classes" => self.problem.classes.to_string(),
            "problem.samples" => self.problem.samples.to_string(),
            "problem.test_samples" => self.problem.test_samples.to_string(),
            "problem.hidden" => self.problem.hidden.to_string(),
            "problem.separation" => self.problem.separation.to_string(),
            "problem.seed" => self.problem.seed.to_string(),
            "algorithm.kind" => self.algorithm.kind.to_string(),
            "algorithm.eta" => self.algorithm.eta.to_string(),
            "algorithm.mu" => self.algorithm.mu.to_string(),
            "algorithm.beta" => self.algorithm.beta.to_string(),
            "algorithm.nesterov" => self.algorithm.nesterov.to_string(),
            "consensus.method" => self.consensus.method.to_string(),
            "consensus.d" => self.consensus.d.to_string(),
            "run.rounds" => self.run.rounds.to_string(),
            "run.batch" => self.run.batch.to_string(),
            "run.seeds" => self
                .run
                .seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "run.eval_every" => self.run.eval_every.to_string(),
            "run.output_dir" => self.run.output_dir.clone(),
            "run.threads" => self.run.threads.map(|t| t.to_string()).unwrap_or_default(),
            "run.decay" => self.run.decay.to_string(),
            "run.tol" => self.run.tol.to_string(),
            _ => unreachable!("key list and getter disagree on {key}"),
        })
    }

    /// Every key with its resolved value.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|&k| (k.to_string(), self.get(k).expect("listed key")))
            .collect()
    }

    /// Defaults for `subcommand` overlaid with `pairs`.
    pub fn from_pairs<'a, I>(subcommand: Subcommand, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut cfg = RunConfig::defaults(subcommand);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Resolves a subcommand from file text (may be empty) and flag pairs.
    /// Flags win over the file; required keys must appear in either.
    pub fn resolve(
        subcommand: Subcommand,
        file_text: &str,
        flags: &[(String, String)],
    ) -> Result<Self> {
        let file = parse_config_text(file_text)?;
        let mut cfg = RunConfig::defaults(subcommand);
        for (k, v) in file.iter().chain(flags) {
            cfg.set(k, v)?;
        }
        for &required in subcommand.required_keys() {
            let given = file.iter().chain(flags).any(|(k, _)| k == required);
            if !given {
                return Err(Error::Config(format!(
                    "missing required key '{required}' for {subcommand}"
                )));
            }
        }
        Ok(cfg)
    }

    pub fn problem_spec(&self) -> SyntheticProblemSpec {
        SyntheticProblemSpec {
            kind: self.problem.kind,
            d: self.problem.d,
            n_agents: self.topology.n,
            zeta: self.problem.zeta,
            sigma: self.problem.sigma,
            smoothness: self.problem.smoothness,
            seed: self.problem.seed,
            classes: self.problem.classes,
            samples: self.problem.samples,
            test_samples: self.problem.test_samples,
            hidden: self.problem.hidden,
            separation: self.problem.separation,
            alpha: self.partition.alpha,
            partition_seed: self.partition.seed,
            min_per_agent: self.partition.min_per_agent,
        }
    }

    pub fn algorithm_spec(&self) -> AlgorithmSpec {
        let mut spec = AlgorithmSpec::new(
            self.algorithm.kind,
            self.algorithm.eta,
            self.algorithm.mu,
            self.algorithm.beta,
        );
        spec.nesterov = self.algorithm.nesterov;
        spec
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            rounds: self.run.rounds,
            batch_size: self.run.batch,
            seeds: self.run.seeds.clone(),
            eval_every: self.run.eval_every,
            decay: self.run.decay,
            threads: self.run.threads,
        }
    }
}

fn cfg_err(e: Error) -> Error {
    Error::Config(e.to_string())
}

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; keys are checked against [`KEYS`].
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key=value, got '{line}'",
                lineno + 1
            ))
        })?;
        let k = k.trim();
        check_key(k)?;
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Single JSON document written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: Subcommand,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub version: String,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, outputs: Vec<String>) -> Self {
        Self {
            subcommand: cfg.subcommand,
            config: cfg.to_pairs(),
            seeds: cfg.run.seeds.clone(),
            outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Rebuilds the configuration this manifest was written from.
    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_pairs(
            self.subcommand,
            self.config.iter().map(|(k, v)| (k.as_str(), v.as_str())),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
