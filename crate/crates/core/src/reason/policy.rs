use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, log_sigmoid, sigmoid};

/// Two-action logistic router: `p_esc = sigmoid(theta . phi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPolicy {
    pub theta: Vec<f64>,
    theta_reference: Vec<f64>,
    pub theta_behavior: Vec<f64>,
}

impl RoutingPolicy {
    /// The reference copy is frozen at construction.
    pub fn new(theta: Vec<f64>) -> Self {
        RoutingPolicy {
            theta_reference: theta.clone(),
            theta_behavior: theta.clone(),
            theta,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        RoutingPolicy::new(vec![0.0; dim])
    }

    /// Rebuilds a policy from stored parts, e.g. after deserialization.
    pub fn from_parts(
        theta: Vec<f64>,
        theta_reference: Vec<f64>,
        theta_behavior: Vec<f64>,
    ) -> Result<Self> {
        let p = RoutingPolicy {
            theta,
            theta_reference,
            theta_behavior,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.theta.len();
        if self.theta_reference.len() != d || self.theta_behavior.len() != d {
            return Err(Error::Structural(format!(
                "policy vectors disagree in dimension: theta {}, reference {}, behavior {}",
                d,
                self.theta_reference.len(),
                self.theta_behavior.len()
            )));
        }
        Ok(())
    }

    pub fn theta_reference(&self) -> &[f64] {
        &self.theta_reference
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn snapshot_behavior(&mut self) {
        self.theta_behavior.clone_from(&self.theta);
    }

    fn check(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.theta.len() {
            return Err(Error::Structural(format!(
                "routing features have dimension {}, policy expects {}",
                features.len(),
                self.theta.len()
            )));
        }
        Ok(())
    }

    pub fn escalation_probability(&self, features: &[f64]) -> Result<f64> {
        self.check(features)?;
        Ok(sigmoid(dot(&self.theta, features)))
    }

    pub fn behavior_escalation_probability(&self, features: &[f64]) -> Result<f64> {
        self.check(features)?;
        Ok(sigmoid(dot(&self.theta_behavior, features)))
    }
}

/// `ln pi(y)` for a two-action policy with escalation logit `z`.
pub fn log_prob(z: f64, escalated: bool) -> f64 {
    if escalated {
        log_sigmoid(z)
    } else {
        log_sigmoid(-z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub escalated: bool,
    pub correct: bool,
    pub log_prob_behavior: f64,
}

/// One query's G sampled routing outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub query_id: u64,
    pub features: Vec<f64>,
    outcomes: Vec<RolloutOutcome>,
    rho: f64,
}

impl RolloutGroup {
    pub fn new(query_id: u64, features: Vec<f64>, outcomes: Vec<RolloutOutcome>) -> Result<Self> {
        if outcomes.len() < 2 {
            return Err(Error::Data(format!(
                "group {query_id} has {} outcomes, need at least 2",
                outcomes.len()
            )));
        }
        if let Some((i, o)) = outcomes
            .iter()
            .enumerate()
            .find(|(_, o)| !o.log_prob_behavior.is_finite())
        {
            return Err(Error::Numerical(format!(
                "group {query_id} outcome {i} has behavior log-prob {}",
                o.log_prob_behavior
            )));
        }
        let escalations = outcomes.iter().filter(|o| o.escalated).count();
        let rho = escalations as f64 / outcomes.len() as f64;
        Ok(RolloutGroup {
            query_id,
            features,
            outcomes,
            rho,
        })
    }

    pub fn outcomes(&self) -> &[RolloutOutcome] {
        &self.outcomes
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn escalations(&self) -> usize {
        self.outcomes.iter().filter(|o| o.escalated).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub clip_epsilon: f64,
    pub kl_coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateOutput {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub kl: f64,
    /// Outcomes whose clipped operand was strictly the smaller one.
    pub clipped: usize,
}

/// Closed-form `KL(pi_theta || pi_ref)` between two-point distributions with
/// escalation logits `z` and `z_ref`.
pub fn two_point_kl(z: f64, z_ref: f64) -> f64 {
    let p = sigmoid(z);
    p * (log_sigmoid(z) - log_sigmoid(z_ref)) + (1.0 - p) * (log_sigmoid(-z) - log_sigmoid(-z_ref))
}

/// Per-outcome clipped term `min(w A, clip(w, 1-eps, 1+eps) A)`.
pub fn clipped_term(w: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = w.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (w * advantage).min(clipped * advantage)
}

/// Negated clipped objective with KL penalty for one group, and its exact
/// gradient with respect to `policy.theta`.
pub fn tb_grpo_surrogate(
    group: &RolloutGroup,
    advantages: &[f64],
    policy: &RoutingPolicy,
    params: &SurrogateParams,
) -> Result<SurrogateOutput> {
    policy.validate()?;
    if advantages.len() != group.len() {
        return Err(Error::Structural(format!(
            "{} advantages for a group of {}",
            advantages.len(),
            group.len()
        )));
    }
    policy.check(&group.features)?;
    let phi = &group.features;
    let z = dot(&policy.theta, phi);
    let z_ref = dot(policy.theta_reference(), phi);
    if !z.is_finite() || !z_ref.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite routing logit for group {}: z = {z}, z_ref = {z_ref}",
            group.query_id
        )));
    }
    let p = sigmoid(z);
    let n = group.len() as f64;
    let eps = params.clip_epsilon;

    let mut objective = 0.0;
    // Derivative of the objective with respect to z; the gradient is this
    // scalar times phi because the features are shared across the group.
    let mut d_obj_dz = 0.0;
    let mut clipped = 0;
    for (o, &a) in group.outcomes().iter().zip(advantages) {
        let lp = log_prob(z, o.escalated);
        let w = (lp - o.log_prob_behavior).exp();
        if !w.is_finite() || !a.is_finite() {
            return Err(Error::Numerical(format!(
                "group {}: importance ratio {w} or advantage {a} is not finite \
                 (log pi = {lp}, behavior log pi = {})",
                group.query_id, o.log_prob_behavior
            )));
        }
        let wc = w.clamp(1.0 - eps, 1.0 + eps);
        let raw = w * a;
        let cl = wc * a;
        objective += raw.min(cl);
        if cl < raw {
            clipped += 1;
        } else {
            // d ln pi / dz is (1 - p) for escalate and -p for answer.
            let dlp = if o.escalated { 1.0 - p } else { -p };
            d_obj_dz += a * w * dlp;
        }
    }
    objective /= n;
    d_obj_dz /= n;

    let kl = two_point_kl(z, z_ref);
    objective -= params.kl_coeff * kl;
    d_obj_dz -= params.kl_coeff * p * (1.0 - p) * (z - z_ref);

    let loss = -objective;
    let gradient: Vec<f64> = phi.iter().map(|f| -d_obj_dz * f).collect();
    if !loss.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "surrogate for group {} produced a non-finite loss or gradient",
            group.query_id
        )));
    }
    Ok(SurrogateOutput {
        loss,
        gradient,
        kl,
        clipped,
    })
}
