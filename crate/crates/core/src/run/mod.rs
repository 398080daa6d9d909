//! Training and evaluation loops shared by the CLI and the acceptance suite.

mod config;
mod eval;
pub mod plot;
mod train;

pub use config::{hex_digest, RunConfig, TrainSettings};
pub use eval::{eval_seeds, evaluate, rollout, summarize, EpisodeOutcome, EvalController, EvalReport, EVAL_SEED_BASE};
pub use train::{read_evals, read_metrics, train, EvalRow, MetricsRow, RunPaths, TrainOutcome, METRICS_SCHEMA_VERSION};
