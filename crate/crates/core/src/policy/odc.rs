//! Online bandit scheduler with an adaptive banking threshold.
//!
//! Each slot the node sizes its budget (battery plus directly usable
//! harvest), banks if every learned reward rate sits below the threshold
//! while the sun is up, works through one cold-start pull per reward arm,
//! and otherwise solves the greedy knapsack over upper-confidence indices
//! and draws the slot's arm from the selection. Energy is paid on decision;
//! rewards land when the network reports what actually happened, and the
//! threshold controller closes the slot with the realized consumption.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ava::ControllerState;
use crate::bandit::{greedy_knapsack, selection_probabilities, Arm, BanditState};
use crate::battery::Battery;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

use super::{best_packet, ActionCosts, Delivery, EnergyFlows, MediatedPolicy, PendingAction, SlotInput, SlotLog};

/// How the banking threshold evolves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Track it with the adaptive controller.
    Adaptive,
    /// Hold it at a constant value (reference runs).
    Fixed(f64),
}

/// Tunables of the online scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdcConfig {
    /// Per-action energy prices.
    pub costs: ActionCosts,
    /// Exploration constant e' (at least 1).
    pub e_prime: f64,
    /// Controller gradient step size.
    pub step_size: f64,
    /// Threshold policy.
    pub threshold_mode: ThresholdMode,
}

impl Default for OdcConfig {
    fn default() -> Self {
        Self {
            costs: ActionCosts::default(),
            e_prime: 2.0,
            step_size: 0.1,
            threshold_mode: ThresholdMode::Adaptive,
        }
    }
}

/// Decision committed by [`OdcNode::decide`], waiting for its outcome.
#[derive(Debug, Clone)]
struct Pending {
    input: SlotInput,
    arm: Arm,
    flows: EnergyFlows,
    available: f64,
    threshold: f64,
    transmit_index: Option<usize>,
}

/// One node running the online scheduler.
#[derive(Debug, Clone)]
pub struct OdcNode {
    battery: Battery,
    backlog: Vec<f64>,
    bandit: BanditState,
    controller: ControllerState,
    costs: ActionCosts,
    threshold_mode: ThresholdMode,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
}

impl OdcNode {
    /// Builds a node from its battery, tunables, and seed material. The
    /// node id separates the decision streams of nodes sharing a seed.
    pub fn new(battery: Battery, config: &OdcConfig, seed: u64, node_id: u64) -> Result<Self> {
        config.costs.validate()?;
        if let ThresholdMode::Fixed(v) = config.threshold_mode {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter { name: "fixed_threshold", value: v });
            }
        }
        Ok(Self {
            battery,
            backlog: Vec::new(),
            bandit: BanditState::new(config.costs.reward_arms(), config.e_prime)?,
            controller: ControllerState::new(config.step_size)?,
            costs: config.costs,
            threshold_mode: config.threshold_mode,
            rng: rng::stream_rng(seed, &[stream::POLICY, node_id]),
            pending: None,
        })
    }

    /// Battery state.
    pub fn battery(&self) -> &Battery {
        &self.battery
    }

    /// Learned arm statistics.
    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    /// Threshold controller state.
    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    /// Queued packet values.
    pub fn backlog(&self) -> &[f64] {
        &self.backlog
    }

    /// Threshold the next decision will compare against.
    pub fn threshold_in_force(&self) -> f64 {
        match self.threshold_mode {
            ThresholdMode::Adaptive => self.controller.threshold(),
            ThresholdMode::Fixed(v) => v,
        }
    }

    /// First reward arm still owed its cold-start pull and affordable now.
    /// Forwarding needs a queued packet, so it waits for one.
    fn init_arm(&self, available: f64) -> Option<Arm> {
        crate::bandit::REWARD_ARMS
            .iter()
            .copied()
            .filter(|&arm| arm != Arm::Transmit || !self.backlog.is_empty())
            .find(|&arm| self.bandit.arm(arm).pulls == 0 && self.costs.of(arm) <= available)
    }

    /// Whether any reward arm still lacks its cold-start pull.
    fn in_init_phase(&self) -> bool {
        crate::bandit::REWARD_ARMS
            .iter()
            .any(|&arm| self.bandit.arm(arm).pulls == 0)
    }

    /// Pays for a reward arm from harvest and battery.
    fn pay(&mut self, arm: Arm, input: &SlotInput) -> Result<EnergyFlows> {
        super::pay_action(&mut self.battery, self.costs.of(arm), input)
    }

    /// Banks the slot's harvest (sun up), or sleeps through it (sun down).
    fn bank_or_sleep(&mut self, input: &SlotInput) -> Result<EnergyFlows> {
        super::bank_or_sleep(&mut self.battery, input)
    }
}

impl MediatedPolicy for OdcNode {
    fn decide(&mut self, input: &SlotInput) -> Result<PendingAction> {
        if self.pending.is_some() {
            return Err(Error::Protocol("decide called twice without finish"));
        }
        let available = self.battery.level() + if input.solar { input.harvest } else { 0.0 };
        let threshold = self.threshold_in_force();

        let arm;
        let flows;
        if self.bandit.best_mean() < threshold && input.solar {
            // Every learned rate is below the bar: bank while the sun is up.
            arm = Arm::Store;
            flows = self.bank_or_sleep(input)?;
        } else if let Some(cold) = self.init_arm(available) {
            arm = cold;
            flows = self.pay(cold, input)?;
        } else if self.in_init_phase() {
            // Cold-start pulls still owed but none affordable right now.
            arm = Arm::Store;
            flows = self.bank_or_sleep(input)?;
        } else {
            let mut selected =
                greedy_knapsack(self.bandit.indices(), self.bandit.costs(), available);
            if self.backlog.is_empty() {
                // Nothing to forward: the radio stage would be a no-op,
                // so it is not a candidate this slot.
                selected[2] = false;
            }
            match selection_probabilities(selected) {
                Some(probabilities) => {
                    let draw: f64 = self.rng.gen();
                    let mut acc = 0.0;
                    let mut picked = Arm::Transmit;
                    for (j, p) in probabilities.iter().enumerate() {
                        acc += p;
                        if draw < acc {
                            picked = crate::bandit::REWARD_ARMS[j];
                            break;
                        }
                    }
                    arm = picked;
                    flows = self.pay(picked, input)?;
                }
                None => {
                    // Nothing affordable: bank or sleep.
                    arm = Arm::Store;
                    flows = self.bank_or_sleep(input)?;
                }
            }
        }

        let transmit_index = if arm == Arm::Transmit { best_packet(&self.backlog) } else { None };
        let transmit_voi = transmit_index.map(|j| self.backlog[j]);
        self.pending = Some(Pending {
            input: *input,
            arm,
            flows,
            available,
            threshold,
            transmit_index,
        });
        Ok(PendingAction { arm, transmit_voi })
    }

    fn finish(&mut self, delivery: &Delivery) -> Result<SlotLog> {
        let pending = self.pending.take().ok_or(Error::Protocol("finish called without decide"))?;
        let mut delivered = 0.0;
        let reward = match pending.arm {
            Arm::Sample => {
                let value = pending.input.available_voi;
                self.backlog.push(value);
                value
            }
            Arm::Receive => {
                if let Some(value) = delivery.arrived {
                    self.backlog.push(value);
                    value
                } else {
                    0.0
                }
            }
            Arm::Transmit => match pending.transmit_index {
                Some(index) if delivery.transmit_delivered => {
                    delivered = self.backlog.remove(index);
                    delivered
                }
                // Failed handoff keeps the packet; an empty queue sends nothing.
                _ => 0.0,
            },
            Arm::Store => 0.0,
        };

        match pending.arm {
            Arm::Store => self.bandit.record_store(),
            arm => self.bandit.record_pull(arm, reward),
        }
        if let ThresholdMode::Adaptive = self.threshold_mode {
            self.controller
                .step(pending.input.harvest, pending.flows.consumed(), pending.available)?;
        }

        Ok(SlotLog {
            slot: pending.input.slot,
            arm: pending.arm,
            solar: pending.input.solar,
            harvest: pending.input.harvest,
            available: pending.available,
            threshold: pending.threshold,
            reward,
            delivered,
            flows: pending.flows,
            battery_after: self.battery.level(),
            backlog_len: self.backlog.len(),
            backlog_voi: self.backlog.iter().sum(),
        })
    }

    fn label(&self) -> &'static str {
        "odc"
    }
}
