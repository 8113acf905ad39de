use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::Frame;
use crate::seed::{rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticStreamConfig {
    pub length: usize,
    pub tokens_per_frame: usize,
    pub dim: usize,
    pub temporal_correlation: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SyntheticStreamConfig {
    fn default() -> Self {
        SyntheticStreamConfig {
            length: 100,
            tokens_per_frame: 64,
            dim: 16,
            temporal_correlation: 0.99,
            seed: 0,
        }
    }
}

impl SyntheticStreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::config("length", "must be at least 1"));
        }
        if self.tokens_per_frame == 0 {
            return Err(Error::config("tokens_per_frame", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.temporal_correlation) {
            return Err(Error::config(
                "temporal_correlation",
                format!("must lie in [0, 1), got {}", self.temporal_correlation),
            ));
        }
        Ok(())
    }
}

/// AR(1) token stream: each co-located token follows
/// `x_t = r x_{t-1} + sqrt(1 - r^2) eps` with standard normal noise.
pub fn generate_stream(config: &SyntheticStreamConfig) -> Result<Vec<Frame>> {
    config.validate()?;
    let mut rng = rng_for(config.seed, &[tag::STREAM]);
    let r = config.temporal_correlation;
    let fresh = (1.0 - r * r).sqrt();
    let mut frames: Vec<Frame> = Vec::with_capacity(config.length);
    for index in 1..=config.length {
        let tokens = (0..config.tokens_per_frame)
            .map(|j| {
                (0..config.dim)
                    .map(|k| {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        match frames.last() {
                            None => noise,
                            Some(prev) => r * prev.tokens[j][k] + fresh * noise,
                        }
                    })
                    .collect()
            })
            .collect();
        frames.push(Frame { index, tokens });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticStreamConfig {
            length: 5,
            tokens_per_frame: 3,
            dim: 4,
            seed: 9,
            ..Default::default()
        };
        let a = generate_stream(&cfg).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a[4].index, 5);
        assert!(a.iter().all(|f| f.tokens.len() == 3 && f.dim() == 4));
        assert_eq!(a, generate_stream(&cfg).unwrap());
        let b = generate_stream(&SyntheticStreamConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_unit_correlation() {
        let cfg = SyntheticStreamConfig {
            temporal_correlation: 1.0,
            ..Default::default()
        };
        assert!(generate_stream(&cfg).is_err());
    }
}
