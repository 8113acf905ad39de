//! Routing between the fast path and escalation: supervised label
//! construction and grouped-rollout policy optimization with a target band
//! on the escalation ratio.

pub mod advantage;
pub mod policy;
pub mod reward;
pub mod sft;
pub mod trainer;

pub use advantage::group_advantages;
pub use policy::{
    clipped_term, log_prob, tb_grpo_surrogate, two_point_kl, RolloutGroup, RolloutOutcome,
    RoutingPolicy, SurrogateOutput, SurrogateParams,
};
pub use reward::{
    band_penalties, modulated_reward, naive_reward, reward_surface_sweep, unit_grid, BandConfig,
    Penalties, RewardBreakdown, SurfaceRow, BRANCHES,
};
pub use sft::{sft_route_label, warm_start_theta, RouteLabel, ScoreScale, SftLabelerConfig};
pub use trainer::{
    train_router, GroupDiagnostics, RoutingEnv, RunLog, StepRecord, TrainMode, TrainerConfig,
    TrainingQuery,
};
