use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::respond::fit_logistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    Binary,
    FivePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftLabelerConfig {
    pub k: usize,
    pub quality_threshold: f64,
    pub score_scale: ScoreScale,
}

impl Default for SftLabelerConfig {
    fn default() -> Self {
        SftLabelerConfig {
            k: 4,
            quality_threshold: 2.5,
            score_scale: ScoreScale::FivePoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteLabel {
    Answer,
    Escalate,
}

/// Labels a query from K sampled-response scores: answer directly when the
/// mean score reaches the threshold.
pub fn sft_route_label(scores: &[f64], config: &SftLabelerConfig) -> Result<RouteLabel> {
    if config.k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if scores.len() != config.k {
        return Err(Error::Data(format!(
            "expected {} scores, got {}",
            config.k,
            scores.len()
        )));
    }
    for &s in scores {
        let ok = match config.score_scale {
            ScoreScale::Binary => s == 0.0 || s == 1.0,
            ScoreScale::FivePoint => (0.0..=5.0).contains(&s),
        };
        if !ok {
            return Err(Error::Data(format!(
                "score {s} is outside the {:?} scale",
                config.score_scale
            )));
        }
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(if mean >= config.quality_threshold {
        RouteLabel::Answer
    } else {
        RouteLabel::Escalate
    })
}

/// Optional warm start: logistic fit of escalation labels on routing features.
pub fn warm_start_theta(
    features: &[Vec<f64>],
    labels: &[RouteLabel],
    epochs: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Data(format!(
            "warm start needs matching non-empty inputs, got {} features and {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::Structural(
            "warm-start features differ in dimension".into(),
        ));
    }
    let ys: Vec<f64> = labels
        .iter()
        .map(|l| f64::from(*l == RouteLabel::Escalate))
        .collect();
    // The policy has no separate bias; a constant feature plays that role.
    let (w, _, _) = fit_logistic(features, &ys, (vec![0.0; dim], 0.0), epochs, learning_rate);
    Ok(w)
}
