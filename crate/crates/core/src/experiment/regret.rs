//! Regret measurement against a reference scheduler.
//!
//! Regret at slot t is the reference's cumulative reward minus the
//! policy's, on identical streams. Alongside the measured curve this
//! module evaluates the learner's theoretical envelope: a sum over
//! suboptimal arms of (c_max/c_min)^2 e' ln|P'| / gap + 2 gap, plus the
//! reference's per-cost reward times the banking arm's pull bound,
//! where |P'| counts the slots the node was actually operational and
//! the gaps are per-cost reward differences. Gaps are estimated from
//! the logs themselves, since true means are unknown on trace-driven
//! runs.

use crate::bandit::{pull_count_bound, Arm, REWARD_ARMS};
use crate::error::{Error, Result};
use crate::policy::SlotLog;

/// Everything the envelope arithmetic needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    /// Estimated per-cost reward gaps of the suboptimal reward arms.
    pub deltas: Vec<f64>,
    /// Largest observed per-pull action cost.
    pub c_max: f64,
    /// Smallest observed per-pull action cost.
    pub c_min: f64,
    /// Exploration constant.
    pub e_prime: f64,
    /// Reference scheduler's reward per unit cost.
    pub u_star: f64,
}

/// Evaluates the regret envelope at operational-slot count `p_prime`.
///
/// With no positive gaps (the policy matched the reference arm for arm)
/// the envelope is zero.
pub fn regret_envelope(inputs: &BoundInputs, p_prime: f64) -> Result<f64> {
    if inputs.deltas.is_empty() {
        return Ok(0.0);
    }
    if let Some(&bad) = inputs.deltas.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::NonPositiveGap(bad));
    }
    if !(inputs.c_max >= inputs.c_min && inputs.c_min > 0.0) {
        return Err(Error::InvalidParameter { name: "c_min", value: inputs.c_min });
    }
    if !(inputs.e_prime >= 1.0) {
        return Err(Error::InvalidParameter { name: "e_prime", value: inputs.e_prime });
    }
    let p_prime = p_prime.max(1.0);
    let ratio = inputs.c_max / inputs.c_min;
    let scale = ratio * ratio * inputs.e_prime * p_prime.ln();
    let arm_terms: f64 = inputs.deltas.iter().map(|delta| scale / delta + 2.0 * delta).sum();
    let smallest = inputs.deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let banking_term = inputs.u_star * (scale / (smallest * smallest) + 1.0);
    Ok(arm_terms + banking_term)
}

/// One arm's measured pulls against its theoretical ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPullCheck {
    /// Which arm.
    pub arm: Arm,
    /// Estimated per-cost reward gap used for the bound.
    pub gap: f64,
    /// Pulls observed in the logs.
    pub pulls: u64,
    /// Theoretical expected-pull ceiling at the final operational count.
    pub bound: f64,
}

/// Measured regret curve with its theoretical envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    /// Policy cumulative reward per slot.
    pub policy_cumulative: Vec<f64>,
    /// Reference cumulative reward per slot.
    pub oracle_cumulative: Vec<f64>,
    /// Reference minus policy, per slot.
    pub regret: Vec<f64>,
    /// Envelope evaluated at each slot's operational count.
    pub bound: Vec<f64>,
    /// Operational slots seen so far, per slot.
    pub active_prefix: Vec<usize>,
    /// Inputs the envelope was evaluated with.
    pub inputs: BoundInputs,
    /// Per-arm pull counts against their ceilings (banking arm included
    /// when the policy ever banked).
    pub pull_checks: Vec<ArmPullCheck>,
}

fn cumulative(logs: &[SlotLog]) -> Vec<f64> {
    let mut total = 0.0;
    logs.iter()
        .map(|log| {
            total += log.reward;
            total
        })
        .collect()
}

fn consumed_energy(logs: &[SlotLog]) -> f64 {
    logs.iter().map(|log| log.flows.consumed()).sum()
}

/// Compares a policy run against a reference run on the same streams
/// and fills in the theoretical envelope from measured quantities.
pub fn compute_regret(policy: &[SlotLog], oracle: &[SlotLog], e_prime: f64) -> Result<RegretReport> {
    if policy.len() != oracle.len() {
        return Err(Error::LengthMismatch(policy.len(), oracle.len()));
    }
    let policy_cumulative = cumulative(policy);
    let oracle_cumulative = cumulative(oracle);
    let regret: Vec<f64> = oracle_cumulative
        .iter()
        .zip(&policy_cumulative)
        .map(|(oracle, policy)| oracle - policy)
        .collect();

    let oracle_energy = consumed_energy(oracle);
    if !(oracle_energy > 0.0) {
        return Err(Error::InvalidParameter { name: "oracle_energy", value: oracle_energy });
    }
    let u_star = oracle.iter().map(|l| l.reward).sum::<f64>() / oracle_energy;

    // Per-arm pulls, rewards, and energy from the policy's own records.
    let mut pulls = [0u64; 3];
    let mut rewards = [0.0f64; 3];
    let mut energy = [0.0f64; 3];
    let mut store_pulls = 0u64;
    let mut ever_banked = false;
    for log in policy {
        match log.arm.reward_index() {
            Some(index) => {
                pulls[index] += 1;
                rewards[index] += log.reward;
                energy[index] += log.flows.consumed();
            }
            None => {
                store_pulls += 1;
                if log.flows.banked > 0.0 {
                    ever_banked = true;
                }
            }
        }
    }

    let mut deltas = Vec::new();
    let mut gap_by_arm = Vec::new();
    let mut c_max = f64::NEG_INFINITY;
    let mut c_min = f64::INFINITY;
    for (index, arm) in REWARD_ARMS.iter().enumerate() {
        if pulls[index] == 0 || !(energy[index] > 0.0) {
            continue;
        }
        let per_pull_cost = energy[index] / pulls[index] as f64;
        c_max = c_max.max(per_pull_cost);
        c_min = c_min.min(per_pull_cost);
        let mean = rewards[index] / energy[index];
        let gap = u_star - mean;
        if gap > 1e-12 {
            deltas.push(gap);
            gap_by_arm.push((*arm, gap, pulls[index]));
        }
    }
    if !c_min.is_finite() {
        // Nothing was ever pulled; the envelope degenerates but the
        // arithmetic still needs valid costs.
        c_min = 1.0;
        c_max = 1.0;
    }
    let inputs = BoundInputs { deltas, c_max, c_min, e_prime, u_star };

    let mut active_prefix = Vec::with_capacity(policy.len());
    let mut active = 0usize;
    for log in policy {
        if log.flows.consumed() > 0.0 || log.flows.banked > 0.0 {
            active += 1;
        }
        active_prefix.push(active);
    }
    let bound = active_prefix
        .iter()
        .map(|&count| regret_envelope(&inputs, count.max(1) as f64))
        .collect::<Result<Vec<f64>>>()?;

    let final_active = active_prefix.last().copied().unwrap_or(0).max(1) as f64;
    let mut pull_checks = Vec::new();
    for (arm, gap, arm_pulls) in gap_by_arm {
        pull_checks.push(ArmPullCheck {
            arm,
            gap,
            pulls: arm_pulls,
            bound: pull_count_bound(gap, c_max, c_min, e_prime, final_active, false)?,
        });
    }
    if ever_banked && !inputs.deltas.is_empty() {
        let smallest = inputs.deltas.iter().copied().fold(f64::INFINITY, f64::min);
        pull_checks.push(ArmPullCheck {
            arm: Arm::Store,
            gap: smallest,
            pulls: store_pulls,
            bound: pull_count_bound(smallest, c_max, c_min, e_prime, final_active, true)?,
        });
    }

    Ok(RegretReport {
        policy_cumulative,
        oracle_cumulative,
        regret,
        bound,
        active_prefix,
        inputs,
        pull_checks,
    })
}
