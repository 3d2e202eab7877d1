//! Static duty-cycle baseline.
//!
//! Before the episode starts, the node predicts its total harvest, turns
//! it into a duty cycle d = min(1, efficiency * predicted / (horizon *
//! average action cost)), and spreads the active slots evenly across the
//! horizon. Active slots alternate between sampling and forwarding; slots
//! off duty bank whatever the sun offers. The amount is forecast
//! perfectly here — what the schedule cannot know is the timing, which is
//! exactly the handicap this baseline exists to expose.

use crate::bandit::Arm;
use crate::battery::Battery;
use crate::error::{Error, Result};

use super::{best_packet, ActionCosts, Delivery, EnergyFlows, MediatedPolicy, PendingAction, SlotInput, SlotLog};

/// Duty cycle from the harvest forecast:
/// d = min(1, efficiency * predicted_total / (horizon * average_cost)).
pub fn duty_cycle(
    predicted_total: f64,
    average_cost: f64,
    horizon: usize,
    efficiency: f64,
) -> Result<f64> {
    if !(average_cost > 0.0) {
        return Err(Error::InvalidParameter { name: "average_cost", value: average_cost });
    }
    if !(predicted_total >= 0.0) {
        return Err(Error::InvalidParameter { name: "predicted_total", value: predicted_total });
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidParameter { name: "efficiency", value: efficiency });
    }
    if horizon == 0 {
        return Ok(0.0);
    }
    Ok((efficiency * predicted_total / (horizon as f64 * average_cost)).min(1.0))
}

/// Spreads a duty cycle evenly over the horizon: slot t is active when the
/// running total floor(d * (t+1)) advances past floor(d * t), which yields
/// every slot at d = 1, every other slot at d = 0.5, every k-th slot at
/// d = 1/k, and exactly floor(d * horizon) active slots overall.
pub fn spread_active_slots(d: f64, horizon: usize) -> Vec<bool> {
    let d = d.clamp(0.0, 1.0);
    (0..horizon)
        .map(|t| ((t as f64 + 1.0) * d).floor() > (t as f64 * d).floor())
        .collect()
}

/// Active-slot schedule straight from the forecast.
pub fn sdc_schedule(
    predicted_total: f64,
    average_cost: f64,
    horizon: usize,
    efficiency: f64,
) -> Result<Vec<bool>> {
    let d = duty_cycle(predicted_total, average_cost, horizon, efficiency)?;
    Ok(spread_active_slots(d, horizon))
}

/// Decision awaiting its outcome.
#[derive(Debug, Clone)]
struct Pending {
    input: SlotInput,
    arm: Arm,
    flows: EnergyFlows,
    available: f64,
    transmit_index: Option<usize>,
}

/// One node following a fixed duty-cycle schedule.
#[derive(Debug, Clone)]
pub struct SdcNode {
    active: Vec<bool>,
    battery: Battery,
    costs: ActionCosts,
    backlog: Vec<f64>,
    /// Next performed action forwards instead of sampling.
    transmit_turn: bool,
    pending: Option<Pending>,
}

impl SdcNode {
    /// Builds a node from its schedule; the alternation starts on sampling.
    pub fn new(battery: Battery, costs: ActionCosts, active: Vec<bool>) -> Result<Self> {
        costs.validate()?;
        Ok(Self { active, battery, costs, backlog: Vec::new(), transmit_turn: false, pending: None })
    }

    /// Battery state.
    pub fn battery(&self) -> &Battery {
        &self.battery
    }

    /// Queued packet values.
    pub fn backlog(&self) -> &[f64] {
        &self.backlog
    }
}

impl MediatedPolicy for SdcNode {
    fn decide(&mut self, input: &SlotInput) -> Result<PendingAction> {
        if self.pending.is_some() {
            return Err(Error::Protocol("decide called twice without finish"));
        }
        let scheduled = *self
            .active
            .get(input.slot)
            .ok_or(Error::SlotOutOfRange { slot: input.slot, len: self.active.len() })?;
        let available = self.battery.level() + if input.solar { input.harvest } else { 0.0 };

        let intended = if self.transmit_turn { Arm::Transmit } else { Arm::Sample };
        let (arm, flows, performed) = if scheduled && self.costs.of(intended) <= available {
            (intended, super::pay_action(&mut self.battery, self.costs.of(intended), input)?, true)
        } else {
            // Off duty, or on duty without the energy: bank or sleep. The
            // alternation only advances on performed actions.
            (Arm::Store, super::bank_or_sleep(&mut self.battery, input)?, false)
        };
        if performed {
            self.transmit_turn = !self.transmit_turn;
        }

        let transmit_index = if arm == Arm::Transmit { best_packet(&self.backlog) } else { None };
        let transmit_voi = transmit_index.map(|j| self.backlog[j]);
        self.pending = Some(Pending { input: *input, arm, flows, available, transmit_index });
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
            Arm::Receive => unreachable!("the schedule never listens"),
            Arm::Transmit => match pending.transmit_index {
                Some(index) if delivery.transmit_delivered => {
                    delivered = self.backlog.remove(index);
                    delivered
                }
                _ => 0.0,
            },
            Arm::Store => 0.0,
        };
        Ok(SlotLog {
            slot: pending.input.slot,
            arm: pending.arm,
            solar: pending.input.solar,
            harvest: pending.input.harvest,
            available: pending.available,
            threshold: 0.0,
            reward,
            delivered,
            flows: pending.flows,
            battery_after: self.battery.level(),
            backlog_len: self.backlog.len(),
            backlog_voi: self.backlog.iter().sum(),
        })
    }

    fn label(&self) -> &'static str {
        "sdc"
    }
}
