//! Cascaded streaming control: dual-zone token memory, a readiness gate,
//! and a band-regularized escalation router, plus a synthetic simulator to
//! exercise them together.

pub mod error;
pub mod math;
pub mod memory;
pub mod reason;
pub mod respond;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use memory::{
    compress_zone, partition_history, replay_stream, update_memory, CompressionOperator,
    CompressionPolicy, Frame, MemoryState, MemoryToken, Partition,
};
pub use reason::{
    band_penalties, group_advantages, modulated_reward, naive_reward, reward_surface_sweep,
    sft_route_label, tb_grpo_surrogate, train_router, BandConfig, RolloutGroup, RoutingPolicy,
    RunLog, TrainMode, TrainerConfig,
};
pub use respond::{
    generate_boundary_dataset, readiness_action, readiness_probability, train_readiness_head,
    ReadinessAction, ReadinessExample, ReadinessHead, ReadinessLabel,
};
