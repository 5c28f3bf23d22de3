//! Experiment drivers: consensus runs, training runs, and the cross-form
//! equivalence check, all producing per-round metric traces.

mod consensus;
mod equivalence;
mod trace;
mod training;

pub use consensus::{run_consensus, run_consensus_states, ConsensusMethod};
pub use equivalence::{
    check_equivalence, check_problem_equivalence, relative_deviation, EquivalenceReport,
    FormDeviation, EQUIVALENT_FORMS,
};
pub use trace::{
    consensus_error, consensus_error_rows, MetricRecord, MetricTrace, TraceMeta, TRACE_HEADER,
};
pub use training::{
    average_model, run_training, MeanStd, TrainOptions, TrainingReport, TrainingSummary,
};
