use crate::error::Result;
use crate::reason::{RoutingEnv, TrainingQuery};
use crate::seed::{rng_for, tag};
use crate::sim::oracle::OracleConfig;
use crate::sim::queries::{routing_features, DifficultyMix};

/// Endless (or step-capped) stream of synthetic routing queries scored by
/// the fast/slow oracles at a fixed memory fidelity.
#[derive(Debug, Clone)]
pub struct SyntheticRoutingEnv {
    pub difficulty: DifficultyMix,
    pub feature_noise: f64,
    pub oracle: OracleConfig,
    pub fidelity: f64,
    pub seed: u64,
    pub max_steps: Option<usize>,
}

impl SyntheticRoutingEnv {
    pub fn new(
        difficulty: DifficultyMix,
        feature_noise: f64,
        oracle: OracleConfig,
        fidelity: f64,
        seed: u64,
    ) -> Result<Self> {
        difficulty.validate()?;
        oracle.validate()?;
        Ok(SyntheticRoutingEnv {
            difficulty,
            feature_noise,
            oracle,
            fidelity: fidelity.clamp(0.0, 1.0),
            seed,
            max_steps: None,
        })
    }
}

impl RoutingEnv for SyntheticRoutingEnv {
    fn sample_batch(&self, step: usize, batch_size: usize) -> Option<Vec<TrainingQuery>> {
        if self.max_steps.is_some_and(|m| step >= m) {
            return None;
        }
        let mut rng = rng_for(self.seed, &[tag::ENV_BATCH, step as u64]);
        Some(
            (0..batch_size)
                .map(|i| {
                    let difficulty = self.difficulty.sample(&mut rng);
                    TrainingQuery {
                        id: (step * batch_size + i) as u64,
                        features: routing_features(difficulty, self.feature_noise, &mut rng),
                        difficulty,
                    }
                })
                .collect(),
        )
    }

    fn correct_probability(&self, query: &TrainingQuery, escalated: bool) -> f64 {
        if escalated {
            self.oracle.slow_probability(query.difficulty)
        } else {
            self.oracle
                .fast_probability(query.difficulty, self.fidelity)
        }
    }

    fn action_cost(&self, escalated: bool) -> f64 {
        self.oracle.cost(escalated)
    }
}
