use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::memory::MemoryState;

/// Correctness curves and per-call costs of the fast and slow paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub fast_a: f64,
    pub fast_b: f64,
    pub fast_c: f64,
    pub slow_a: f64,
    pub slow_b: f64,
    pub fast_cost: f64,
    pub slow_cost: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            fast_a: 2.0,
            fast_b: 4.0,
            fast_c: 2.0,
            slow_a: 3.0,
            slow_b: 2.0,
            fast_cost: 1.0,
            slow_cost: 10.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("fast_cost", self.fast_cost), ("slow_cost", self.slow_cost)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        for (key, v) in [
            ("fast_a", self.fast_a),
            ("fast_b", self.fast_b),
            ("fast_c", self.fast_c),
            ("slow_a", self.slow_a),
            ("slow_b", self.slow_b),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn fast_probability(&self, difficulty: f64, fidelity: f64) -> f64 {
        sigmoid(self.fast_a - self.fast_b * difficulty + self.fast_c * (fidelity - 0.5))
    }

    pub fn slow_probability(&self, difficulty: f64) -> f64 {
        sigmoid(self.slow_a - self.slow_b * difficulty)
    }

    pub fn cost(&self, escalated: bool) -> f64 {
        if escalated {
            self.slow_cost
        } else {
            self.fast_cost
        }
    }
}

/// Draws fast-path correctness from a uniform variate `u` in `[0, 1)`.
pub fn fast_oracle_correct(difficulty: f64, fidelity: f64, config: &OracleConfig, u: f64) -> bool {
    u < config.fast_probability(difficulty, fidelity)
}

pub fn slow_oracle_correct(difficulty: f64, config: &OracleConfig, u: f64) -> bool {
    u < config.slow_probability(difficulty)
}

/// How well the memory supports the fast path: nearby retention helps,
/// stale historical tokens hurt. An empty memory counts as perfect.
pub fn memory_fidelity(state: &MemoryState) -> f64 {
    let keep_near = match state.nearby_input_count() {
        0 => 1.0,
        n => state.nearby_tokens().len() as f64 / n as f64,
    };
    let keep_hist = match state.historical_input_count() {
        0 => 0.0,
        n => state.historical_tokens().len() as f64 / n as f64,
    };
    (keep_near - 0.2 * keep_hist).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{CompressionPolicy, Frame};

    #[test]
    fn oracle_examples() {
        let c = OracleConfig::default();
        assert!((c.fast_probability(0.0, 1.0) - sigmoid(3.0)).abs() < 1e-15);
        assert!((c.fast_probability(0.0, 1.0) - 0.953).abs() < 1e-3);
        assert!((c.fast_probability(1.0, 1.0) - 0.269).abs() < 1e-3);
        assert_eq!(c.fast_probability(0.5, 0.5), 0.5);
        assert!((c.slow_probability(1.0) - 0.731).abs() < 1e-3);
        assert_eq!(c.slow_probability(0.0), c.fast_probability(0.0, 1.0));
        for i in 1..=100 {
            let d = i as f64 / 100.0;
            assert!(c.slow_probability(d) > c.fast_probability(d, 1.0));
        }
        assert!(fast_oracle_correct(0.0, 1.0, &c, 0.9));
        assert!(!fast_oracle_correct(0.0, 1.0, &c, 0.96));
        assert!(slow_oracle_correct(1.0, &c, 0.7));
    }

    fn frames(n: usize) -> Vec<Frame> {
        (1..=n)
            .map(|i| Frame {
                index: i,
                tokens: vec![vec![1.0, i as f64], vec![-(i as f64), 2.0]],
            })
            .collect()
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(memory_fidelity(&MemoryState::new()), 1.0);
        let none = CompressionPolicy::new(1.0, 1.0, 3, Default::default()).unwrap();
        let state = crate::memory::replay_stream(&frames(6), &none).unwrap();
        assert!((memory_fidelity(&state) - 0.8).abs() < 1e-12);
        let aggressive = CompressionPolicy::new(1.0, 0.01, 3, Default::default()).unwrap();
        let state = crate::memory::replay_stream(&frames(30), &aggressive).unwrap();
        let f = memory_fidelity(&state);
        assert!(f > 0.95 && f <= 1.0, "fidelity {f}");
    }
}
