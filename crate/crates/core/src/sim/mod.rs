//! Synthetic streaming environment and the cascaded pipeline executor.

pub mod divergence;
pub mod env;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod queries;
pub mod stream;

pub use divergence::{
    deletion_experiment, deletion_impact, jsd, kl_divergence, softmax, DeletionSummary,
    DeletionTrial, ToyScorer,
};
pub use env::SyntheticRoutingEnv;
pub use oracle::{fast_oracle_correct, memory_fidelity, slow_oracle_correct, OracleConfig};
pub use pipeline::{
    readiness_features, readiness_training_set, run_pipeline, Action, ActionTrace, PipelineMetrics,
    PipelineSpec, RouteMode, READINESS_FEATURE_DIM,
};
pub use queries::{
    generate_queries, routing_features, DifficultyMix, MixComponent, Query, QueryConfig,
    ROUTING_FEATURE_DIM,
};
pub use stream::{generate_stream, SyntheticStreamConfig};
