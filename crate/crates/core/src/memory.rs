//! Age-aware dual-zone token memory.
//!
//! The stream history `x_1..x_t` is split at the nearby window `W`: the last
//! `W` frames live in the nearby zone and are compressed with `tau_near`,
//! everything older lives in the historical zone and is compressed with
//! `tau_hist`. A frame that ages out of the window is compressed a second
//! time, against the historical zone, so memory stays bounded as the stream
//! grows.

use std::collections::{BTreeMap, VecDeque};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::cosine;

/// Absolute tolerance for similarity-vs-threshold comparisons.
pub const SIMILARITY_TOLERANCE: f64 = 1e-12;

/// One stream observation: a set of equal-dimension token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: usize,
    pub tokens: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(index: usize, tokens: Vec<Vec<f64>>) -> Result<Self> {
        let frame = Frame { index, tokens };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        if self.index == 0 {
            return Err(Error::Structural("frame index must be >= 1".into()));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::Structural(format!(
                "frame {} has no tokens or zero-dimension tokens",
                self.index
            )));
        }
        if let Some((j, t)) = self.tokens.iter().enumerate().find(|(_, t)| t.len() != dim) {
            return Err(Error::Structural(format!(
                "frame {} token {} has dimension {}, expected {}",
                self.index,
                j,
                t.len(),
                dim
            )));
        }
        Ok(())
    }

    /// Token dimension, or 0 for an empty frame.
    pub fn dim(&self) -> usize {
        self.tokens.first().map_or(0, Vec::len)
    }
}

/// Token-reduction operator applied inside a zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompressionOperator {
    /// Drop a token when its cosine similarity to the last retained token at
    /// the same position reaches the threshold.
    #[default]
    SimilarityDrop,
    /// Mean of non-overlapping runs of `kernel` tokens. Ignores the threshold.
    AveragePool { kernel: usize },
    /// Greedy farthest-point selection of `keep_fraction` of each frame's
    /// tokens. Ignores the threshold.
    DiversityPrune { keep_fraction: f64 },
}

impl CompressionOperator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CompressionOperator::SimilarityDrop => Ok(()),
            CompressionOperator::AveragePool { kernel: 0 } => Err(Error::config(
                "operator.kernel",
                "must be a positive integer",
            )),
            CompressionOperator::AveragePool { .. } => Ok(()),
            CompressionOperator::DiversityPrune { keep_fraction }
                if !(keep_fraction > 0.0 && keep_fraction <= 1.0) =>
            {
                Err(Error::config(
                    "operator.keep_fraction",
                    format!("must lie in (0, 1], got {keep_fraction}"),
                ))
            }
            CompressionOperator::DiversityPrune { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionPolicy {
    pub tau_near: f64,
    pub tau_hist: f64,
    pub window: usize,
    pub operator: CompressionOperator,
}

impl Default for CompressionPolicy {
    fn default() -> Self {
        CompressionPolicy {
            tau_near: 1.0,
            tau_hist: 0.01,
            window: 3,
            operator: CompressionOperator::SimilarityDrop,
        }
    }
}

impl CompressionPolicy {
    pub fn new(
        tau_near: f64,
        tau_hist: f64,
        window: usize,
        operator: CompressionOperator,
    ) -> Result<Self> {
        let policy = CompressionPolicy {
            tau_near,
            tau_hist,
            window,
            operator,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Enforces `0 < tau_hist <= tau_near <= 1` and `window >= 1`.
    pub fn validate(&self) -> Result<()> {
        check_tau("tau_near", self.tau_near)?;
        check_tau("tau_hist", self.tau_hist)?;
        if self.tau_hist > self.tau_near {
            return Err(Error::config(
                "tau_hist",
                format!(
                    "must not exceed tau_near ({} > {})",
                    self.tau_hist, self.tau_near
                ),
            ));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be at least 1"));
        }
        self.operator.validate()
    }
}

fn check_tau(key: &str, tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must lie in (0, 1], got {tau}")))
    }
}

/// A retained token, tagged with its source frame and in-frame position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryToken {
    pub frame: usize,
    pub position: usize,
    pub vector: Vec<f64>,
}

/// Step ranges of the two zones at stream step `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub historical: Option<RangeInclusive<usize>>,
    pub nearby: RangeInclusive<usize>,
}

pub fn partition_history(current_step: usize, window: usize) -> Result<Partition> {
    if current_step == 0 {
        return Err(Error::config("current_step", "must be at least 1"));
    }
    if window == 0 {
        return Err(Error::config("window", "must be at least 1"));
    }
    let nearby_start = current_step.saturating_sub(window) + 1;
    let historical = (nearby_start > 1).then(|| 1..=nearby_start - 1);
    Ok(Partition {
        historical,
        nearby: nearby_start..=current_step,
    })
}

/// Compresses one frame's tokens against per-position references.
///
/// `refs` maps a position to the last token retained there; it is updated
/// with every retained token.
fn compress_frame(
    frame: usize,
    tokens: Vec<(usize, Vec<f64>)>,
    tau: f64,
    operator: CompressionOperator,
    refs: &mut BTreeMap<usize, Vec<f64>>,
) -> Vec<MemoryToken> {
    let kept: Vec<(usize, Vec<f64>)> = match operator {
        CompressionOperator::SimilarityDrop => tokens
            .into_iter()
            .filter(|(pos, v)| match refs.get(pos) {
                Some(r) => cosine(v, r) < tau - SIMILARITY_TOLERANCE,
                None => true,
            })
            .collect(),
        CompressionOperator::AveragePool { kernel } => tokens
            .chunks(kernel)
            .enumerate()
            .map(|(slot, chunk)| {
                let mut acc = vec![0.0; chunk[0].1.len()];
                for (_, v) in chunk {
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a += x;
                    }
                }
                let n = chunk.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                (slot, acc)
            })
            .collect(),
        CompressionOperator::DiversityPrune { keep_fraction } => {
            farthest_point_keep(tokens, keep_fraction)
        }
    };
    kept.into_iter()
        .map(|(position, vector)| {
            refs.insert(position, vector.clone());
            MemoryToken {
                frame,
                position,
                vector,
            }
        })
        .collect()
}

/// Keeps `ceil(fraction * n)` tokens, greedily maximising the minimum cosine
/// distance to the already kept set. Starts from the first token; ties go to
/// the lower position. Output is in position order.
fn farthest_point_keep(tokens: Vec<(usize, Vec<f64>)>, fraction: f64) -> Vec<(usize, Vec<f64>)> {
    let n = tokens.len();
    if n == 0 {
        return tokens;
    }
    let target = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut chosen = vec![false; n];
    chosen[0] = true;
    let mut min_dist: Vec<f64> = tokens
        .iter()
        .map(|(_, v)| 1.0 - cosine(v, &tokens[0].1))
        .collect();
    for _ in 1..target {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if chosen[i] {
                continue;
            }
            if best.is_none_or(|b| min_dist[i] > min_dist[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        chosen[b] = true;
        for i in 0..n {
            let d = 1.0 - cosine(&tokens[i].1, &tokens[b].1);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    tokens
        .into_iter()
        .zip(chosen)
        .filter_map(|(t, keep)| keep.then_some(t))
        .collect()
}

/// Compresses a run of frames as a single zone.
pub fn compress_zone(
    frames: &[Frame],
    tau: f64,
    operator: CompressionOperator,
) -> Result<Vec<MemoryToken>> {
    check_tau("tau", tau)?;
    operator.validate()?;
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let dim = first.dim();
    for f in frames {
        f.validate()?;
        if f.dim() != dim {
            return Err(Error::Structural(format!(
                "frame {} has dimension {}, expected {}",
                f.index,
                f.dim(),
                dim
            )));
        }
    }
    let mut refs = BTreeMap::new();
    Ok(frames
        .iter()
        .flat_map(|f| {
            let tokens = f.tokens.iter().cloned().enumerate().collect();
            compress_frame(f.index, tokens, tau, operator, &mut refs)
        })
        .collect())
}

/// The compressed memory `M_t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MemoryState {
    nearby: Vec<MemoryToken>,
    historical: Vec<MemoryToken>,
    /// (frame index, input token count) for each frame in the nearby window.
    nearby_frames: VecDeque<(usize, usize)>,
    historical_refs: BTreeMap<usize, Vec<f64>>,
    input_tokens: usize,
    historical_input: usize,
    nearby_dropped: usize,
    historical_dropped: usize,
    last_index: usize,
    dim: Option<usize>,
}

impl MemoryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nearby_tokens(&self) -> &[MemoryToken] {
        &self.nearby
    }

    pub fn historical_tokens(&self) -> &[MemoryToken] {
        &self.historical
    }

    pub fn input_token_count(&self) -> usize {
        self.input_tokens
    }

    pub fn retained_token_count(&self) -> usize {
        self.nearby.len() + self.historical.len()
    }

    /// `1 - retained / input`, zero for an empty stream.
    pub fn drop_ratio(&self) -> f64 {
        if self.input_tokens == 0 {
            0.0
        } else {
            1.0 - self.retained_token_count() as f64 / self.input_tokens as f64
        }
    }

    /// Tokens dropped on entry to the nearby zone.
    pub fn nearby_drop_count(&self) -> usize {
        self.nearby_dropped
    }

    /// Tokens dropped when frames aged into the historical zone.
    pub fn historical_drop_count(&self) -> usize {
        self.historical_dropped
    }

    /// Raw token count of the frames currently in the nearby window.
    pub fn nearby_input_count(&self) -> usize {
        self.nearby_frames.iter().map(|&(_, n)| n).sum()
    }

    /// Raw token count of every frame that has aged into history.
    pub fn historical_input_count(&self) -> usize {
        self.historical_input
    }

    /// Highest frame index consumed so far (0 before the first frame).
    pub fn last_frame_index(&self) -> usize {
        self.last_index
    }

    pub fn nearby_frame_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nearby_frames.iter().map(|&(i, _)| i)
    }

    /// All retained tokens, historical first.
    pub fn tokens(&self) -> impl Iterator<Item = &MemoryToken> {
        self.historical.iter().chain(self.nearby.iter())
    }

    /// Consumes the next frame in place.
    pub fn push(&mut self, frame: &Frame, policy: &CompressionPolicy) -> Result<()> {
        policy.validate()?;
        frame.validate()?;
        let expected = self.last_index + 1;
        if frame.index != expected {
            return Err(Error::Sequencing {
                expected,
                got: frame.index,
            });
        }
        match self.dim {
            Some(d) if d != frame.dim() => {
                return Err(Error::Structural(format!(
                    "frame {} has dimension {}, memory holds dimension {}",
                    frame.index,
                    frame.dim(),
                    d
                )))
            }
            _ => self.dim = Some(frame.dim()),
        }

        while self.nearby_frames.len() >= policy.window {
            self.age_out_oldest(policy);
        }

        let mut refs = BTreeMap::new();
        for t in &self.nearby {
            refs.insert(t.position, t.vector.clone());
        }
        let tokens = frame.tokens.iter().cloned().enumerate().collect();
        let kept = compress_frame(
            frame.index,
            tokens,
            policy.tau_near,
            policy.operator,
            &mut refs,
        );
        self.nearby_dropped += frame.tokens.len().saturating_sub(kept.len());
        self.nearby.extend(kept);
        self.nearby_frames
            .push_back((frame.index, frame.tokens.len()));
        self.input_tokens += frame.tokens.len();
        self.last_index = frame.index;
        Ok(())
    }

    fn age_out_oldest(&mut self, policy: &CompressionPolicy) {
        let Some((index, input)) = self.nearby_frames.pop_front() else {
            return;
        };
        let split = self.nearby.partition_point(|t| t.frame == index);
        let leaving: Vec<MemoryToken> = self.nearby.drain(..split).collect();
        let carried = leaving.len();
        let tokens = leaving
            .into_iter()
            .map(|t| (t.position, t.vector))
            .collect();
        let kept = compress_frame(
            index,
            tokens,
            policy.tau_hist,
            policy.operator,
            &mut self.historical_refs,
        );
        self.historical_dropped += carried.saturating_sub(kept.len());
        self.historical.extend(kept);
        self.historical_input += input;
    }
}

/// Value-semantics wrapper around [`MemoryState::push`].
pub fn update_memory(
    state: &MemoryState,
    new_frame: &Frame,
    policy: &CompressionPolicy,
) -> Result<MemoryState> {
    let mut next = state.clone();
    next.push(new_frame, policy)?;
    Ok(next)
}

/// Replays a whole stream from an empty memory.
pub fn replay_stream(frames: &[Frame], policy: &CompressionPolicy) -> Result<MemoryState> {
    let mut state = MemoryState::new();
    for f in frames {
        state.push(f, policy)?;
    }
    Ok(state)
}
