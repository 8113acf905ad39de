use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{CompressionPolicy, Frame, MemoryState};
use crate::reason::RoutingPolicy;
use crate::respond::{
    generate_boundary_dataset, readiness_action, readiness_probability, ReadinessAction,
    ReadinessExample, ReadinessHead,
};
use crate::seed::{rng_for, tag};
use crate::sim::oracle::{fast_oracle_correct, memory_fidelity, slow_oracle_correct, OracleConfig};
use crate::sim::queries::Query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteMode {
    AllFast,
    AllSlow,
    Policy,
}

impl RouteMode {
    pub const ALL: [RouteMode; 3] = [RouteMode::AllFast, RouteMode::AllSlow, RouteMode::Policy];

    pub fn name(self) -> &'static str {
        match self {
            RouteMode::AllFast => "all_fast",
            RouteMode::AllSlow => "all_slow",
            RouteMode::Policy => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Answer,
    Escalate,
    Routine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTrace {
    pub step: usize,
    pub query_id: u64,
    pub action: Action,
    pub p_ready: f64,
    pub p_escalate: Option<f64>,
    pub correct: Option<bool>,
    pub cost: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    pub queries: usize,
    pub resolved: usize,
    pub unresolved: usize,
    pub answers: usize,
    pub escalations: usize,
    pub routines: usize,
    pub accuracy: f64,
    pub escalation_ratio: f64,
    pub routine_ratio: f64,
    pub mean_cost: f64,
    pub total_cost: f64,
    pub drop_ratio: f64,
}

/// Largest |steps since clue| the readiness features distinguish.
pub const CLUE_CLAMP: f64 = 5.0;
pub const READINESS_FEATURE_DIM: usize = 3;

/// `[clamped steps since clue, memory fidelity, difficulty]`.
pub fn readiness_features(step: usize, query: &Query, fidelity: f64) -> Vec<f64> {
    let since = (step as f64 - query.clue_step as f64).clamp(-CLUE_CLAMP, CLUE_CLAMP);
    vec![since, fidelity, query.difficulty]
}

/// Boundary supervision for every query of an episode, featurized with the
/// memory fidelity the pipeline would observe at each step.
pub fn readiness_training_set(
    stream: &[Frame],
    queries: &[Query],
    policy: &CompressionPolicy,
) -> Result<Vec<ReadinessExample>> {
    let mut fidelity = Vec::with_capacity(stream.len() + 1);
    let mut memory = MemoryState::new();
    fidelity.push(memory_fidelity(&memory));
    for frame in stream {
        memory.push(frame, policy)?;
        fidelity.push(memory_fidelity(&memory));
    }
    let mut out = Vec::new();
    for q in queries {
        if q.clue_step > stream.len() {
            continue;
        }
        out.extend(generate_boundary_dataset(q.clue_step, stream.len(), |s| {
            readiness_features(s, q, fidelity[s])
        })?);
    }
    Ok(out)
}

pub struct PipelineSpec<'a> {
    pub stream: &'a [Frame],
    pub queries: &'a [Query],
    pub memory_policy: &'a CompressionPolicy,
    pub readiness_head: &'a ReadinessHead,
    pub routing_policy: &'a RoutingPolicy,
    pub oracle: &'a OracleConfig,
    pub seed: u64,
}

/// Runs the cascade step by step: update memory, then for each pending query
/// gate on readiness and either defer or route. Deferred queries are asked
/// again next step; those still pending when the stream ends are unresolved.
///
/// Random draws are keyed by (query, step) so that every route mode sees the
/// same variates.
pub fn run_pipeline(
    spec: &PipelineSpec<'_>,
    mode: RouteMode,
) -> Result<(Vec<ActionTrace>, PipelineMetrics)> {
    spec.memory_policy.validate()?;
    spec.oracle.validate()?;
    if let Some(w) = spec
        .queries
        .windows(2)
        .find(|w| w[0].arrival_step > w[1].arrival_step)
    {
        return Err(Error::config(
            "queries",
            format!(
                "must be sorted by arrival_step (query {} at {} precedes query {} at {})",
                w[0].id, w[0].arrival_step, w[1].id, w[1].arrival_step
            ),
        ));
    }
    for q in spec.queries {
        q.validate()?;
    }

    let mut memory = MemoryState::new();
    let mut trace = Vec::new();
    let mut pending: Vec<&Query> = Vec::new();
    let mut next_query = 0;
    let (mut answers, mut escalations, mut routines, mut correct) =
        (0usize, 0usize, 0usize, 0usize);
    let mut total_cost = 0.0;

    for frame in spec.stream {
        memory.push(frame, spec.memory_policy)?;
        let step = frame.index;
        let fidelity = memory_fidelity(&memory);
        while next_query < spec.queries.len() && spec.queries[next_query].arrival_step <= step {
            pending.push(&spec.queries[next_query]);
            next_query += 1;
        }

        let mut still_pending = Vec::with_capacity(pending.len());
        for q in pending.drain(..) {
            let p_ready =
                readiness_probability(spec.readiness_head, &readiness_features(step, q, fidelity))?;
            if readiness_action(p_ready) == ReadinessAction::EmitRoutine {
                routines += 1;
                trace.push(ActionTrace {
                    step,
                    query_id: q.id,
                    action: Action::Routine,
                    p_ready,
                    p_escalate: None,
                    correct: None,
                    cost: 0.0,
                    fidelity,
                });
                still_pending.push(q);
                continue;
            }
            let mut rng = rng_for(spec.seed, &[tag::PIPELINE, q.id, step as u64]);
            let u_route: f64 = rng.random();
            let u_correct: f64 = rng.random();
            let (escalated, p_escalate) = match mode {
                RouteMode::AllFast => (false, None),
                RouteMode::AllSlow => (true, None),
                RouteMode::Policy => {
                    let p = spec.routing_policy.escalation_probability(&q.features)?;
                    (u_route < p, Some(p))
                }
            };
            let ok = if escalated {
                slow_oracle_correct(q.difficulty, spec.oracle, u_correct)
            } else {
                fast_oracle_correct(q.difficulty, fidelity, spec.oracle, u_correct)
            };
            let cost = spec.oracle.cost(escalated);
            total_cost += cost;
            correct += usize::from(ok);
            if escalated {
                escalations += 1;
            } else {
                answers += 1;
            }
            trace.push(ActionTrace {
                step,
                query_id: q.id,
                action: if escalated {
                    Action::Escalate
                } else {
                    Action::Answer
                },
                p_ready,
                p_escalate,
                correct: Some(ok),
                cost,
                fidelity,
            });
        }
        pending = still_pending;
    }

    let resolved = answers + escalations;
    let frac = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let metrics = PipelineMetrics {
        queries: spec.queries.len(),
        resolved,
        unresolved: spec.queries.len() - resolved,
        answers,
        escalations,
        routines,
        accuracy: frac(correct, resolved),
        escalation_ratio: frac(escalations, resolved),
        routine_ratio: frac(routines, routines + resolved),
        mean_cost: if resolved == 0 {
            0.0
        } else {
            total_cost / resolved as f64
        },
        total_cost,
        drop_ratio: memory.drop_ratio(),
    };
    Ok((trace, metrics))
}
