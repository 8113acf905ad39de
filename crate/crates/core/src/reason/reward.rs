use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target escalation band `[eta - gamma, eta + gamma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub eta: f64,
    pub gamma: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            eta: 0.3,
            gamma: 0.2,
        }
    }
}

impl BandConfig {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        let band = BandConfig { eta, gamma };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::config(
                "eta",
                format!("must lie in [0, 1], got {}", self.eta),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(
                "gamma",
                format!("must lie in [0, 1], got {}", self.gamma),
            ));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        self.eta - self.gamma
    }

    pub fn upper(&self) -> f64 {
        self.eta + self.gamma
    }

    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.lower() && rho <= self.upper()
    }
}

/// Base reward table: a correct direct answer beats a correct escalation,
/// and a wrong direct answer is the worst case.
pub fn naive_reward(escalated: bool, correct: bool) -> f64 {
    match (escalated, correct) {
        (false, true) => 2.0,
        (false, false) => -1.0,
        (true, true) => 1.0,
        (true, false) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub delta_esc: f64,
    pub delta_ans: f64,
}

impl Penalties {
    pub const NONE: Penalties = Penalties {
        delta_esc: 0.0,
        delta_ans: 0.0,
    };
}

pub fn band_penalties(rho: f64, band: &BandConfig) -> Penalties {
    Penalties {
        delta_esc: (rho - band.upper()).clamp(0.0, 1.0),
        delta_ans: (band.lower() - rho).clamp(0.0, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_naive: f64,
    pub delta_esc: f64,
    pub delta_ans: f64,
    pub r: f64,
}

pub fn modulated_reward(escalated: bool, correct: bool, penalties: Penalties) -> RewardBreakdown {
    let r_naive = naive_reward(escalated, correct);
    let Penalties {
        delta_esc: de,
        delta_ans: da,
    } = penalties;
    let r = match (escalated, correct) {
        (true, true) => (1.0 - de) * r_naive,
        (true, false) => (1.0 - de) * r_naive - de,
        (false, true) => (1.0 - da) * r_naive,
        (false, false) => (1.0 - da) * r_naive - 2.0 * da,
    };
    RewardBreakdown {
        r_naive,
        delta_esc: de,
        delta_ans: da,
        r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub rho: f64,
    pub e: u8,
    pub c: u8,
    pub delta_esc: f64,
    pub delta_ans: f64,
    pub r: f64,
}

pub const BRANCHES: [(bool, bool); 4] =
    [(false, true), (false, false), (true, true), (true, false)];

/// Modulated reward of every branch at every grid point, rho-major.
pub fn reward_surface_sweep(band: &BandConfig, rho_grid: &[f64]) -> Result<Vec<SurfaceRow>> {
    let mut rows = Vec::with_capacity(rho_grid.len() * BRANCHES.len());
    for &rho in rho_grid {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Data(format!("rho grid value {rho} outside [0, 1]")));
        }
        let p = band_penalties(rho, band);
        for (e, c) in BRANCHES {
            let b = modulated_reward(e, c, p);
            rows.push(SurfaceRow {
                rho,
                e: e as u8,
                c: c as u8,
                delta_esc: b.delta_esc,
                delta_ans: b.delta_ans,
                r: b.r,
            });
        }
    }
    Ok(rows)
}

/// `n + 1` evenly spaced points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| i as f64 / n as f64).collect()
}
