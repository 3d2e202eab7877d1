//! Stationary synthetic bandit instances.
//!
//! For studying the learner's long-run behavior in isolation, the three
//! reward arms are given fixed means with small bounded noise, equal
//! costs, and an energy budget that always covers exactly one action.
//! The learner then reduces to pure index-based arm choice, and an
//! always-best-arm oracle on the same draws gives a clean regret
//! reference.

use rand::Rng;

use crate::bandit::{greedy_knapsack, selection_probabilities, BanditState, REWARD_ARMS};
use crate::error::Result;
use crate::policy::{EnergyFlows, SlotLog};
use crate::rng::{stream, stream_rng};

/// A fixed three-arm problem: per-arm mean rewards, uniform noise
/// half-width, and one shared action cost.
#[derive(Debug, Clone, Copy)]
pub struct StationaryInstance {
    /// Mean reward of each reward arm.
    pub means: [f64; 3],
    /// Rewards are drawn uniformly from mean plus or minus this.
    pub half_width: f64,
    /// Energy price of every arm.
    pub cost: f64,
}

/// Per-slot reward table for all three arms, drawn once so the learner
/// and the oracle consume identical randomness.
pub fn stationary_rewards(
    instance: &StationaryInstance,
    horizon: usize,
    seed: u64,
) -> Vec<[f64; 3]> {
    let mut rng = stream_rng(seed, &[stream::VOI]);
    (0..horizon)
        .map(|_| {
            let mut row = [0.0; 3];
            for (slot, mean) in row.iter_mut().zip(instance.means) {
                let noise = rng.gen_range(-instance.half_width..=instance.half_width);
                *slot = (mean + noise).max(0.0);
            }
            row
        })
        .collect()
}

fn synthetic_log(slot: usize, arm: crate::bandit::Arm, reward: f64, cost: f64) -> SlotLog {
    SlotLog {
        slot,
        arm,
        solar: true,
        harvest: 0.0,
        available: cost,
        threshold: 0.0,
        reward,
        delivered: if arm == crate::bandit::Arm::Transmit { reward } else { 0.0 },
        flows: EnergyFlows { from_battery: cost, from_harvest: 0.0, banked: 0.0, wasted: 0.0 },
        battery_after: 0.0,
        backlog_len: 0,
        backlog_voi: 0.0,
    }
}

/// Runs the learner on the instance with a budget of exactly one action
/// per slot, so the selection step always admits the single top-index
/// arm. Returns the slot records of the arms it pulled.
pub fn run_stationary_bandit(
    instance: &StationaryInstance,
    rewards: &[[f64; 3]],
    e_prime: f64,
    seed: u64,
) -> Result<Vec<SlotLog>> {
    let costs = [instance.cost; 3];
    let mut state = BanditState::new(costs, e_prime)?;
    let mut rng = stream_rng(seed, &[stream::POLICY]);
    let mut logs = Vec::with_capacity(rewards.len());
    for (slot, row) in rewards.iter().enumerate() {
        let arm = if let Some(unpulled) = state.first_unpulled() {
            unpulled
        } else {
            let selection = greedy_knapsack(state.indices(), costs, instance.cost);
            let probabilities =
                selection_probabilities(selection).expect("one arm is always affordable");
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = REWARD_ARMS[2];
            for (arm, p) in REWARD_ARMS.iter().zip(probabilities) {
                acc += p;
                if draw < acc {
                    chosen = *arm;
                    break;
                }
            }
            chosen
        };
        let reward = row[arm.reward_index().expect("reward arm")];
        state.record_pull(arm, reward);
        logs.push(synthetic_log(slot, arm, reward, instance.cost));
    }
    Ok(logs)
}

/// The fixed-best-arm reference on the same reward table: every slot
/// pulls the arm with the highest true mean.
pub fn best_arm_logs(instance: &StationaryInstance, rewards: &[[f64; 3]]) -> Vec<SlotLog> {
    let best = (0..3)
        .max_by(|&a, &b| instance.means[a].partial_cmp(&instance.means[b]).expect("finite means"))
        .expect("three arms");
    let arm = REWARD_ARMS[best];
    rewards
        .iter()
        .enumerate()
        .map(|(slot, row)| synthetic_log(slot, arm, row[best], instance.cost))
        .collect()
}
