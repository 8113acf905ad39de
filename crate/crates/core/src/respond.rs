//! Readiness gating: decide whether the current memory grounds an answer or
//! whether to defer with a routine (no-answer) action.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, log_sigmoid, sigmoid};
use crate::seed::{rng_for, tag};

/// Logistic readiness head over a fixed feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadinessHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ReadinessHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        ReadinessHead { weights, bias }
    }

    pub fn zeros(dim: usize) -> Self {
        ReadinessHead::new(vec![0.0; dim], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Structural(format!(
                "readiness features have dimension {}, head expects {}",
                features.len(),
                self.weights.len()
            )));
        }
        Ok(dot(&self.weights, features) + self.bias)
    }
}

pub fn readiness_probability(head: &ReadinessHead, features: &[f64]) -> Result<f64> {
    head.logit(features).map(sigmoid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadinessAction {
    EmitRoutine,
    ContinueToReason,
}

/// Defers strictly below 0.5; equality proceeds.
pub fn readiness_action(p_ready: f64) -> ReadinessAction {
    if p_ready < 0.5 {
        ReadinessAction::EmitRoutine
    } else {
        ReadinessAction::ContinueToReason
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadinessLabel {
    Unready,
    Ready,
}

impl ReadinessLabel {
    fn target(self) -> f64 {
        match self {
            ReadinessLabel::Unready => 0.0,
            ReadinessLabel::Ready => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadinessExample {
    pub step: usize,
    #[serde(rename = "offset")]
    pub step_offset: i64,
    pub label: ReadinessLabel,
    pub features: Vec<f64>,
}

/// Offsets around the clue frame that receive supervision.
pub const BOUNDARY_OFFSETS: std::ops::RangeInclusive<i64> = -3..=2;

/// Builds readiness supervision from the frames around a clue: the three
/// frames before it are unready, the clue frame and the two after it are
/// ready. Offsets that fall outside the stream are omitted.
pub fn generate_boundary_dataset<F>(
    clue_step: usize,
    stream_length: usize,
    mut featurizer: F,
) -> Result<Vec<ReadinessExample>>
where
    F: FnMut(usize) -> Vec<f64>,
{
    if clue_step == 0 || clue_step > stream_length {
        return Err(Error::config(
            "clue_step",
            format!("must lie in [1, {stream_length}], got {clue_step}"),
        ));
    }
    Ok(BOUNDARY_OFFSETS
        .filter_map(|offset| {
            let step = clue_step as i64 + offset;
            (step >= 1 && step <= stream_length as i64).then(|| {
                let step = step as usize;
                ReadinessExample {
                    step,
                    step_offset: offset,
                    label: if offset >= 0 {
                        ReadinessLabel::Ready
                    } else {
                        ReadinessLabel::Unready
                    },
                    features: featurizer(step),
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead {
    pub head: ReadinessHead,
    /// Mean cross-entropy before each epoch's update, plus the final loss.
    pub loss_history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrainedHead {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Mean binary cross-entropy of a logistic model.
pub fn cross_entropy(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = dot(weights, x) + bias;
            -(y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z))
        })
        .sum();
    total / xs.len() as f64
}

/// Full-batch gradient descent on logistic cross-entropy. Returns the fitted
/// `(weights, bias)` and the loss trace.
pub fn fit_logistic(
    xs: &[Vec<f64>],
    ys: &[f64],
    init: (Vec<f64>, f64),
    epochs: usize,
    learning_rate: f64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let (mut w, mut b) = init;
    let n = xs.len() as f64;
    let mut history = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        history.push(cross_entropy(&w, b, xs, ys));
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let err = sigmoid(dot(&w, x) + b) - y;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
            gb += err;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= learning_rate * g / n;
        }
        b -= learning_rate * gb / n;
    }
    history.push(cross_entropy(&w, b, xs, ys));
    (w, b, history)
}

pub fn train_readiness_head(
    examples: &[ReadinessExample],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TrainedHead> {
    let Some(first) = examples.first() else {
        return Err(Error::Data("readiness training set is empty".into()));
    };
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::config("learning_rate", "must be positive"));
    }
    let dim = first.features.len();
    if let Some(e) = examples.iter().find(|e| e.features.len() != dim) {
        return Err(Error::Structural(format!(
            "example at step {} has {} features, expected {}",
            e.step,
            e.features.len(),
            dim
        )));
    }
    let mut warnings = Vec::new();
    let ready = examples
        .iter()
        .filter(|e| e.label == ReadinessLabel::Ready)
        .count();
    if ready == 0 || ready == examples.len() {
        warnings.push(format!(
            "degenerate training set: all {} examples carry one label",
            examples.len()
        ));
    }

    let mut rng = rng_for(seed, &[tag::INIT]);
    let init: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.01..0.01)).collect();
    let xs: Vec<Vec<f64>> = examples.iter().map(|e| e.features.clone()).collect();
    let ys: Vec<f64> = examples.iter().map(|e| e.label.target()).collect();
    let (weights, bias, loss_history) = fit_logistic(&xs, &ys, (init, 0.0), epochs, learning_rate);
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical(
            "readiness head diverged; lower the learning rate".into(),
        ));
    }
    Ok(TrainedHead {
        head: ReadinessHead::new(weights, bias),
        loss_history,
        warnings,
    })
}

/// Fraction of examples whose thresholded prediction matches the label.
pub fn head_accuracy(head: &ReadinessHead, examples: &[ReadinessExample]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for e in examples {
        let predicted = match readiness_action(readiness_probability(head, &e.features)?) {
            ReadinessAction::EmitRoutine => ReadinessLabel::Unready,
            ReadinessAction::ContinueToReason => ReadinessLabel::Ready,
        };
        hits += usize::from(predicted == e.label);
    }
    Ok(hits as f64 / examples.len() as f64)
}

pub fn write_examples_jsonl<W: Write>(mut out: W, examples: &[ReadinessExample]) -> Result<()> {
    for e in examples {
        let line = serde_json::to_string(e).map_err(|err| Error::Data(err.to_string()))?;
        writeln!(out, "{line}").map_err(|err| Error::Data(err.to_string()))?;
    }
    Ok(())
}

pub fn read_examples_jsonl<R: BufRead>(input: R) -> Result<Vec<ReadinessExample>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|err| Error::Data(err.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let e: ReadinessExample = serde_json::from_str(&line)
            .map_err(|err| Error::Data(format!("line {}: {err}", n + 1)))?;
        let expected = if e.step_offset >= 0 {
            ReadinessLabel::Ready
        } else {
            ReadinessLabel::Unready
        };
        if !BOUNDARY_OFFSETS.contains(&e.step_offset) || e.label != expected {
            return Err(Error::Data(format!(
                "line {}: offset {} with label {:?} violates the boundary window",
                n + 1,
                e.step_offset,
                e.label
            )));
        }
        out.push(e);
    }
    Ok(out)
}
