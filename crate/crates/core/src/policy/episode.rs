//! Drives a policy through its streams and audits the resulting ledger.
//!
//! An episode is one policy, one harvest stream, one data-value stream,
//! one slot at a time. The audit helpers recompute the battery trajectory,
//! the energy-neutrality prefix inequality, and the backlog balance from
//! the logs alone, so tests can catch any drift between what a policy did
//! and what it recorded.

use crate::bandit::Arm;
use crate::error::{Error, Result};
use crate::sources::{HarvestProcess, VoiSource};

use super::{NodePolicy, SlotInput, SlotLog};

/// Runs `policy` for `horizon` slots over the given streams.
pub fn run_node_episode(
    policy: &mut dyn NodePolicy,
    harvest: &HarvestProcess,
    voi: &VoiSource,
    horizon: usize,
) -> Result<Vec<SlotLog>> {
    let mut logs = Vec::with_capacity(horizon);
    for slot in 0..horizon {
        let sample = harvest.sample(slot)?;
        let input = SlotInput {
            slot,
            harvest: sample.power,
            solar: sample.solar,
            available_voi: voi.value_at(slot)?,
        };
        logs.push(policy.slot(&input)?);
    }
    Ok(logs)
}

/// Running sums of the per-slot rewards.
pub fn cumulative_rewards(logs: &[SlotLog]) -> Vec<f64> {
    let mut total = 0.0;
    logs.iter()
        .map(|log| {
            total += log.reward;
            total
        })
        .collect()
}

/// Total reward of an episode.
pub fn total_reward(logs: &[SlotLog]) -> f64 {
    logs.iter().map(|log| log.reward).sum()
}

/// Audits an episode's ledger against the energy and data invariants:
/// the battery trajectory implied by the flows matches the logged levels
/// and stays within [0, capacity]; every prefix satisfies battery spend
/// <= initial energy + banked energy; and the backlog value moves exactly
/// with the sampled, received, and forwarded rewards.
pub fn verify_episode(logs: &[SlotLog], initial: f64, capacity: f64) -> Result<()> {
    let mut level = initial;
    let mut spent_from_battery = 0.0;
    let mut banked = 0.0;
    let mut backlog_voi = 0.0;
    let mut backlog_len = 0usize;

    for log in logs {
        let f = &log.flows;
        for (name, value) in [
            ("from_battery", f.from_battery),
            ("from_harvest", f.from_harvest),
            ("banked", f.banked),
            ("wasted", f.wasted),
            ("reward", log.reward),
            ("delivered", log.delivered),
        ] {
            if value < -1e-9 {
                return Err(Error::Invariant(format!("slot {}: negative {name} {value}", log.slot)));
            }
        }
        // banked is post-conversion, so each harvest share is bounded by the offer.
        if f.from_harvest + f.wasted > log.harvest + 1e-6 || f.banked > log.harvest + 1e-6 {
            return Err(Error::Invariant(format!(
                "slot {}: flows exceed the harvest offer",
                log.slot
            )));
        }

        level = level - f.from_battery + f.banked;
        if (level - log.battery_after).abs() > 1e-6 {
            return Err(Error::Invariant(format!(
                "slot {}: battery {} does not match the flows ({} expected)",
                log.slot, log.battery_after, level
            )));
        }
        if !(-1e-9..=capacity + 1e-9).contains(&level) {
            return Err(Error::Invariant(format!(
                "slot {}: battery {level} outside [0, {capacity}]",
                log.slot
            )));
        }

        spent_from_battery += f.from_battery;
        banked += f.banked;
        if spent_from_battery > initial + banked + 1e-6 {
            return Err(Error::Invariant(format!(
                "slot {}: battery spend {spent_from_battery} exceeds initial {initial} + banked {banked}",
                log.slot
            )));
        }

        let voi_delta = match log.arm {
            // A fused sense-and-deliver slot (delivered > 0) credits both
            // legs without touching the queue; an ordinary sensing slot
            // queues the full reward.
            Arm::Sample if log.delivered > 0.0 => {
                if (log.reward - 2.0 * log.delivered).abs() > 1e-9 {
                    return Err(Error::Invariant(format!(
                        "slot {}: fused delivery reward {} is not twice {}",
                        log.slot, log.reward, log.delivered
                    )));
                }
                0.0
            }
            Arm::Sample | Arm::Receive => log.reward,
            Arm::Transmit => {
                if (log.reward - log.delivered).abs() > 1e-9 {
                    return Err(Error::Invariant(format!(
                        "slot {}: forwarding reward {} differs from delivered {}",
                        log.slot, log.reward, log.delivered
                    )));
                }
                -log.delivered
            }
            Arm::Store => 0.0,
        };
        if log.delivered > 0.0 && !matches!(log.arm, Arm::Sample | Arm::Transmit) {
            return Err(Error::Invariant(format!(
                "slot {}: {} cannot deliver value",
                log.slot,
                log.arm.label()
            )));
        }
        let len_ok = match log.arm {
            Arm::Sample if log.delivered > 0.0 => log.backlog_len == backlog_len,
            Arm::Sample => log.backlog_len == backlog_len + 1,
            // Listening queues a packet only when one arrives.
            Arm::Receive => {
                log.backlog_len == backlog_len + 1
                    || (log.reward == 0.0 && log.backlog_len == backlog_len)
            }
            // Forwarding sheds one packet (delivered) or none (blocked, blind);
            // a positive delivery must have shed one.
            Arm::Transmit => {
                if log.delivered > 0.0 {
                    log.backlog_len + 1 == backlog_len
                } else {
                    log.backlog_len == backlog_len || log.backlog_len + 1 == backlog_len
                }
            }
            Arm::Store => log.backlog_len == backlog_len,
        };
        if !len_ok {
            return Err(Error::Invariant(format!(
                "slot {}: backlog length {} inconsistent with {} after {}",
                log.slot,
                log.backlog_len,
                backlog_len,
                log.arm.label()
            )));
        }
        if ((backlog_voi + voi_delta) - log.backlog_voi).abs() > 1e-6 {
            return Err(Error::Invariant(format!(
                "slot {}: backlog value {} does not match {} {:+}",
                log.slot, log.backlog_voi, backlog_voi, voi_delta
            )));
        }
        backlog_voi = log.backlog_voi;
        backlog_len = log.backlog_len;
    }
    Ok(())
}
