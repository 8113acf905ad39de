use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, mean};
use crate::reason::advantage::group_advantages;
use crate::reason::policy::{
    log_prob, tb_grpo_surrogate, RolloutGroup, RolloutOutcome, RoutingPolicy, SurrogateParams,
};
use crate::reason::reward::{band_penalties, modulated_reward, BandConfig, Penalties};
use crate::seed::{rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Vanilla,
    #[default]
    TargetBalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub group_size: usize,
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub kl_coeff: f64,
    pub adv_epsilon: f64,
    pub steps: usize,
    /// Queries drawn per step.
    pub batch_size: usize,
    /// Decay of the reported escalation-ratio moving average.
    pub ema_decay: f64,
    pub mode: TrainMode,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            group_size: 8,
            learning_rate: 0.05,
            clip_epsilon: 0.2,
            kl_coeff: 0.01,
            adv_epsilon: 1e-6,
            steps: 500,
            batch_size: 16,
            ema_decay: 0.95,
            mode: TrainMode::TargetBalanced,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error as E;
        if self.group_size < 2 {
            return Err(E::config("group_size", "must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(E::config(
                "learning_rate",
                "must be a positive finite number",
            ));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(E::config("clip_epsilon", "must lie in (0, 1)"));
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return Err(E::config("kl_coeff", "must be non-negative"));
        }
        if !(self.adv_epsilon > 0.0 && self.adv_epsilon.is_finite()) {
            return Err(E::config("adv_epsilon", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(E::config("batch_size", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(E::config("ema_decay", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn surrogate(&self) -> SurrogateParams {
        SurrogateParams {
            clip_epsilon: self.clip_epsilon,
            kl_coeff: self.kl_coeff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingQuery {
    pub id: u64,
    pub features: Vec<f64>,
    pub difficulty: f64,
}

/// Source of training queries plus the correctness model of both paths.
pub trait RoutingEnv: Sync {
    /// Queries for one step, or `None` once the environment is exhausted.
    fn sample_batch(&self, step: usize, batch_size: usize) -> Option<Vec<TrainingQuery>>;

    /// Probability that the chosen path answers `query` correctly.
    fn correct_probability(&self, query: &TrainingQuery, escalated: bool) -> f64;

    fn action_cost(&self, escalated: bool) -> f64 {
        if escalated {
            10.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDiagnostics {
    pub query_id: u64,
    pub difficulty: f64,
    pub p_escalate: f64,
    pub rho: f64,
    pub delta_esc: f64,
    pub delta_ans: f64,
    pub escalations: usize,
    pub correct: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub rho_ema: f64,
    pub rho_raw: f64,
    pub mean_reward: f64,
    pub mean_naive_reward: f64,
    pub accuracy: f64,
    pub mean_cost: f64,
    pub escalate_count: usize,
    pub answer_count: usize,
    pub loss: f64,
    pub kl: f64,
    pub groups: Vec<GroupDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    /// Set when the environment ran dry before `steps` were completed.
    pub truncated: bool,
}

impl RunLog {
    fn tail(&self, n: usize) -> &[StepRecord] {
        &self.records[self.records.len().saturating_sub(n)..]
    }

    /// Mean per-step escalation ratio over the last `n` steps.
    pub fn tail_escalation_ratio(&self, n: usize) -> f64 {
        mean(&self.tail(n).iter().map(|r| r.rho_raw).collect::<Vec<_>>())
    }

    pub fn tail_rho_ema(&self, n: usize) -> f64 {
        mean(&self.tail(n).iter().map(|r| r.rho_ema).collect::<Vec<_>>())
    }

    pub fn tail_mean_reward(&self, n: usize) -> f64 {
        mean(
            &self
                .tail(n)
                .iter()
                .map(|r| r.mean_reward)
                .collect::<Vec<_>>(),
        )
    }

    pub fn tail_naive_reward(&self, n: usize) -> f64 {
        mean(
            &self
                .tail(n)
                .iter()
                .map(|r| r.mean_naive_reward)
                .collect::<Vec<_>>(),
        )
    }

    pub fn tail_accuracy(&self, n: usize) -> f64 {
        mean(&self.tail(n).iter().map(|r| r.accuracy).collect::<Vec<_>>())
    }
}

struct SampledGroup {
    group: RolloutGroup,
    difficulty: f64,
    p_escalate: f64,
    cost: f64,
}

fn sample_group(
    env: &dyn RoutingEnv,
    policy: &RoutingPolicy,
    query: &TrainingQuery,
    group_size: usize,
    seed: u64,
    step: usize,
    slot: usize,
) -> Result<SampledGroup> {
    let z = dot(&policy.theta_behavior, &query.features);
    let p_escalate = policy.behavior_escalation_probability(&query.features)?;
    let mut outcomes = Vec::with_capacity(group_size);
    let mut cost = 0.0;
    for i in 0..group_size {
        let mut rng = rng_for(seed, &[tag::ROLLOUT, step as u64, slot as u64, i as u64]);
        let escalated = rng.random::<f64>() < p_escalate;
        let correct = rng.random::<f64>() < env.correct_probability(query, escalated);
        cost += env.action_cost(escalated);
        outcomes.push(RolloutOutcome {
            escalated,
            correct,
            log_prob_behavior: log_prob(z, escalated),
        });
    }
    Ok(SampledGroup {
        group: RolloutGroup::new(query.id, query.features.clone(), outcomes)?,
        difficulty: query.difficulty,
        p_escalate,
        cost,
    })
}

/// Grouped-rollout policy optimization of the router. Each step snapshots
/// the behavior policy, samples `group_size` routes per query in parallel
/// (per-pair seeds keep this independent of the worker count), scores them,
/// and applies one averaged gradient step.
pub fn train_router(
    env: &dyn RoutingEnv,
    policy: &mut RoutingPolicy,
    band: &BandConfig,
    config: &TrainerConfig,
) -> Result<RunLog> {
    config.validate()?;
    band.validate()?;
    policy.validate()?;
    let params = config.surrogate();
    let mut log = RunLog::default();
    let mut ema: Option<f64> = None;

    for step in 0..config.steps {
        policy.snapshot_behavior();
        let Some(batch) = env.sample_batch(step, config.batch_size) else {
            log.truncated = true;
            break;
        };
        if batch.is_empty() {
            log.truncated = true;
            break;
        }
        let frozen: &RoutingPolicy = policy;
        let sampled: Vec<SampledGroup> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, q)| {
                sample_group(env, frozen, q, config.group_size, config.seed, step, slot)
            })
            .collect::<Result<_>>()?;

        let mut grad = vec![0.0; policy.dim()];
        let mut loss = 0.0;
        let mut kl = 0.0;
        let mut rewards_all = 0.0;
        let mut naive_all = 0.0;
        let mut correct_all = 0usize;
        let mut escalate_count = 0usize;
        let mut cost_all = 0.0;
        let mut groups = Vec::with_capacity(sampled.len());

        for s in &sampled {
            let penalties = match config.mode {
                TrainMode::Vanilla => Penalties::NONE,
                TrainMode::TargetBalanced => band_penalties(s.group.rho(), band),
            };
            let breakdowns: Vec<_> = s
                .group
                .outcomes()
                .iter()
                .map(|o| modulated_reward(o.escalated, o.correct, penalties))
                .collect();
            let rewards: Vec<f64> = breakdowns.iter().map(|b| b.r).collect();
            let adv = group_advantages(&rewards, config.adv_epsilon);
            let out = tb_grpo_surrogate(&s.group, &adv, policy, &params)?;
            for (g, x) in grad.iter_mut().zip(&out.gradient) {
                *g += x;
            }
            loss += out.loss;
            kl += out.kl;
            let correct = s.group.outcomes().iter().filter(|o| o.correct).count();
            rewards_all += rewards.iter().sum::<f64>();
            naive_all += breakdowns.iter().map(|b| b.r_naive).sum::<f64>();
            correct_all += correct;
            escalate_count += s.group.escalations();
            cost_all += s.cost;
            groups.push(GroupDiagnostics {
                query_id: s.group.query_id,
                difficulty: s.difficulty,
                p_escalate: s.p_escalate,
                rho: s.group.rho(),
                delta_esc: penalties.delta_esc,
                delta_ans: penalties.delta_ans,
                escalations: s.group.escalations(),
                correct,
                mean_reward: mean(&rewards),
            });
        }

        let nq = sampled.len() as f64;
        for (t, g) in policy.theta.iter_mut().zip(&grad) {
            *t -= config.learning_rate * g / nq;
        }
        if policy.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical(format!(
                "router parameters became non-finite at step {step}"
            )));
        }

        let total = nq * config.group_size as f64;
        let rho_raw = escalate_count as f64 / total;
        let rho_ema = match ema {
            None => rho_raw,
            Some(prev) => config.ema_decay * prev + (1.0 - config.ema_decay) * rho_raw,
        };
        ema = Some(rho_ema);
        log.records.push(StepRecord {
            step,
            rho_ema,
            rho_raw,
            mean_reward: rewards_all / total,
            mean_naive_reward: naive_all / total,
            accuracy: correct_all as f64 / total,
            mean_cost: cost_all / total,
            escalate_count,
            answer_count: total as usize - escalate_count,
            loss: loss / nq,
            kl: kl / nq,
            groups,
        });
    }
    policy.snapshot_behavior();
    Ok(log)
}
