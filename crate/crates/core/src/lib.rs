//! Deterministic simulator for decentralized learning on heterogeneous data:
//! gossip topologies, non-IID partitioning, synthetic problems, GUT and its
//! momentum variant alongside baseline update rules, and experiment drivers.

pub mod algorithms;
pub mod config;
pub mod error;
pub mod harness;
pub mod models;
pub mod partition;
pub mod plot;
pub mod rng;
pub mod topology;

pub use algorithms::{AgentState, AlgorithmKind, AlgorithmSpec, StepSchedule};
pub use error::{Error, Result};
pub use harness::{ConsensusMethod, MetricRecord, MetricTrace};
pub use models::{Problem, ProblemKind, SyntheticProblemSpec};
pub use partition::Partition;
pub use topology::{build_topology, MixingMatrix, TopologyKind};
