use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_for, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub arrival_step: usize,
    pub clue_step: usize,
    pub difficulty: f64,
    pub features: Vec<f64>,
}

impl Query {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.difficulty) {
            return Err(Error::Data(format!(
                "query {} has difficulty {} outside [0, 1]",
                self.id, self.difficulty
            )));
        }
        if self.arrival_step == 0 || self.clue_step == 0 {
            return Err(Error::Data(format!(
                "query {} has a zero step index",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixComponent {
    pub weight: f64,
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DifficultyMix {
    Uniform,
    /// Gaussian bumps around each center, clamped to `[0, 1]`.
    Mixture {
        components: Vec<MixComponent>,
        spread: f64,
    },
}

impl Default for DifficultyMix {
    fn default() -> Self {
        DifficultyMix::Mixture {
            components: vec![
                MixComponent {
                    weight: 0.6,
                    center: 0.25,
                },
                MixComponent {
                    weight: 0.4,
                    center: 0.85,
                },
            ],
            spread: 0.1,
        }
    }
}

impl DifficultyMix {
    /// Mostly very hard queries; plain reward maximization escalates nearly
    /// everything here.
    pub fn hard_skewed() -> Self {
        DifficultyMix::Mixture {
            components: vec![
                MixComponent {
                    weight: 0.1,
                    center: 0.25,
                },
                MixComponent {
                    weight: 0.9,
                    center: 0.95,
                },
            ],
            spread: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DifficultyMix::Mixture { components, spread } = self {
            if components.is_empty() {
                return Err(Error::config("difficulty.components", "must not be empty"));
            }
            if components
                .iter()
                .any(|c| !(c.weight >= 0.0 && c.weight.is_finite()))
            {
                return Err(Error::config(
                    "difficulty.components.weight",
                    "must be non-negative",
                ));
            }
            if components.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
                return Err(Error::config(
                    "difficulty.components.weight",
                    "must not all be zero",
                ));
            }
            if components.iter().any(|c| !(0.0..=1.0).contains(&c.center)) {
                return Err(Error::config(
                    "difficulty.components.center",
                    "must lie in [0, 1]",
                ));
            }
            if !(*spread >= 0.0 && spread.is_finite()) {
                return Err(Error::config("difficulty.spread", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DifficultyMix::Uniform => rng.random::<f64>(),
            DifficultyMix::Mixture { components, spread } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u = rng.random::<f64>() * total;
                let mut center = components[components.len() - 1].center;
                for c in components {
                    if u < c.weight {
                        center = c.center;
                        break;
                    }
                    u -= c.weight;
                }
                let z: f64 = StandardNormal.sample(rng);
                (center + spread * z).clamp(0.0, 1.0)
            }
        }
    }
}

/// Routing features: a constant and a noisy difficulty signal.
pub fn routing_features<R: Rng + ?Sized>(difficulty: f64, noise: f64, rng: &mut R) -> Vec<f64> {
    let z: f64 = StandardNormal.sample(rng);
    vec![1.0, 2.0 * (difficulty - 0.5) + noise * z]
}

pub const ROUTING_FEATURE_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    pub count: usize,
    pub difficulty: DifficultyMix,
    /// Standard deviation of the noise on the routing difficulty signal.
    pub feature_noise: f64,
    /// Clue step relative to arrival, drawn uniformly from this range.
    pub clue_lag_min: i64,
    pub clue_lag_max: i64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            count: 200,
            difficulty: DifficultyMix::default(),
            feature_noise: 0.3,
            clue_lag_min: -2,
            clue_lag_max: 4,
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        self.difficulty.validate()?;
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::config("feature_noise", "must be non-negative"));
        }
        if self.clue_lag_min > self.clue_lag_max {
            return Err(Error::config(
                "clue_lag_min",
                format!(
                    "must not exceed clue_lag_max ({} > {})",
                    self.clue_lag_min, self.clue_lag_max
                ),
            ));
        }
        Ok(())
    }
}

/// Queries sorted by arrival, spread uniformly over the stream. Clue steps
/// are clamped into the stream.
pub fn generate_queries(
    config: &QueryConfig,
    stream_length: usize,
    seed: u64,
) -> Result<Vec<Query>> {
    config.validate()?;
    if stream_length == 0 {
        return Err(Error::config(
            "length",
            "stream must have at least one frame",
        ));
    }
    let mut rng = rng_for(seed, &[tag::QUERIES]);
    let mut queries: Vec<Query> = (0..config.count)
        .map(|i| {
            let arrival_step = rng.random_range(1..=stream_length);
            let lag = rng.random_range(config.clue_lag_min..=config.clue_lag_max);
            let clue_step = (arrival_step as i64 + lag).clamp(1, stream_length as i64) as usize;
            let difficulty = config.difficulty.sample(&mut rng);
            let features = routing_features(difficulty, config.feature_noise, &mut rng);
            Query {
                id: i as u64,
                arrival_step,
                clue_step,
                difficulty,
                features,
            }
        })
        .collect();
    queries.sort_by_key(|q| (q.arrival_step, q.id));
    Ok(queries)
}
