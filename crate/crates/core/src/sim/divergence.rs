use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::cosine;
use crate::memory::{replay_stream, CompressionPolicy, MemoryToken};
use crate::seed::{derive_seed, tag};
use crate::sim::stream::{generate_stream, SyntheticStreamConfig};

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Data(format!("distribution {name} is empty")));
    }
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Data(format!(
            "distribution {name} has invalid mass {x}"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Data(format!("distribution {name} sums to {total}")));
    }
    Ok(())
}

fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// `KL(p || q)` in nats; infinite when `q` misses mass that `p` has.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    if p.len() != q.len() {
        return Err(Error::Data(format!(
            "lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_unchecked(p, q))
}

/// Jensen-Shannon divergence in nats, within `[0, ln 2]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    if p.len() != q.len() {
        return Err(Error::Data(format!(
            "lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let v = 0.5 * kl_unchecked(p, &m) + 0.5 * kl_unchecked(q, &m);
    Ok(v.clamp(0.0, std::f64::consts::LN_2))
}

pub fn deletion_impact(reference: &[f64], modified: &[f64]) -> Result<f64> {
    jsd(reference, modified)
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / xs.len() as f64; xs.len()];
    }
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Stand-in next-token scorer over a token memory. Each output position `j`
/// scores the memory by a soft maximum, at `temperature`, of the cosine
/// between probe token `j` and the retained tokens at position `j`; the
/// output distribution is the softmax of those scores over positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyScorer {
    pub temperature: f64,
}

impl Default for ToyScorer {
    fn default() -> Self {
        ToyScorer { temperature: 0.1 }
    }
}

impl ToyScorer {
    pub fn distribution<'a, I>(&self, probe: &[Vec<f64>], memory: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a MemoryToken>,
    {
        let t = self.temperature;
        let mut sums: Vec<Vec<f64>> = vec![Vec::new(); probe.len()];
        for token in memory {
            if let Some(p) = probe.get(token.position) {
                sums[token.position].push(cosine(p, &token.vector) / t);
            }
        }
        let scores: Vec<f64> = sums
            .iter()
            .map(|logits| {
                if logits.is_empty() {
                    return 0.0;
                }
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t * (max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln())
            })
            .collect();
        softmax(&scores.iter().map(|s| s / t).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeletionTrial {
    pub trial: usize,
    pub historical_impact: f64,
    pub nearby_impact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionSummary {
    pub trials: Vec<DeletionTrial>,
    pub mean_historical_impact: f64,
    pub mean_nearby_impact: f64,
}

/// For each trial: generate a stream, build its memory under `policy`, and
/// compare the scorer's output with the full memory against the output with
/// the historical or the nearby zone removed. The newest frame is the probe.
pub fn deletion_experiment(
    stream: &SyntheticStreamConfig,
    policy: &CompressionPolicy,
    scorer: &ToyScorer,
    trials: usize,
    seed: u64,
) -> Result<DeletionSummary> {
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    if !(scorer.temperature > 0.0 && scorer.temperature.is_finite()) {
        return Err(Error::config("temperature", "must be positive"));
    }
    let results: Vec<DeletionTrial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let cfg = SyntheticStreamConfig {
                seed: derive_seed(seed, &[tag::TRIAL, trial as u64]),
                ..*stream
            };
            let frames = generate_stream(&cfg)?;
            let memory = replay_stream(&frames, policy)?;
            let probe = &frames[frames.len() - 1].tokens;
            let full = scorer.distribution(probe, memory.tokens());
            let without_hist = scorer.distribution(probe, memory.nearby_tokens());
            let without_near = scorer.distribution(probe, memory.historical_tokens());
            Ok(DeletionTrial {
                trial,
                historical_impact: deletion_impact(&full, &without_hist)?,
                nearby_impact: deletion_impact(&full, &without_near)?,
            })
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    Ok(DeletionSummary {
        mean_historical_impact: results.iter().map(|t| t.historical_impact).sum::<f64>() / n,
        mean_nearby_impact: results.iter().map(|t| t.nearby_impact).sum::<f64>() / n,
        trials: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn jsd_examples() {
        assert_eq!(jsd(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!((jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - LN_2).abs() < 1e-15);
        let v = jsd(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((v - 0.2158).abs() < 1e-4);
    }

    #[test]
    fn invalid_distributions() {
        assert!(jsd(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(jsd(&[-0.1, 1.1], &[0.5, 0.5]).is_err());
        assert!(jsd(&[1.0], &[0.5, 0.5]).is_err());
        assert!(jsd(&[], &[]).is_err());
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0])
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn scorer_is_a_distribution_and_unchanged_memory_has_no_impact() {
        let probe = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let memory: Vec<MemoryToken> = (0..3)
            .map(|j| MemoryToken {
                frame: 1,
                position: j,
                vector: vec![1.0, j as f64],
            })
            .collect();
        let p = ToyScorer::default().distribution(&probe, &memory);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(deletion_impact(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn experiment_is_deterministic() {
        let stream = SyntheticStreamConfig {
            length: 12,
            tokens_per_frame: 6,
            dim: 4,
            ..Default::default()
        };
        let policy = CompressionPolicy::new(1.0, 1.0, 3, Default::default()).unwrap();
        let a = deletion_experiment(&stream, &policy, &ToyScorer::default(), 4, 1).unwrap();
        let b = deletion_experiment(&stream, &policy, &ToyScorer::default(), 4, 1).unwrap();
        assert_eq!(a, b);
        assert!(a
            .trials
            .iter()
            .all(|t| t.historical_impact <= LN_2 && t.nearby_impact <= LN_2));
    }
}
