//! Evaluation: cost metrics, fault seeding and corpus experiments.

pub mod experiment;
pub mod metrics;
pub mod mutate;

pub use experiment::{run_experiment, ExperimentConfig, Report};
pub use metrics::{covariate_imbalance, exam_score, fault_rank, hit_at_n, spearman, FaultRank, Imbalance};
pub use mutate::{seed_faults, Mutant, Operator};
