//! Per-node scheduling policies and the slot records they produce.
//!
//! Three policies share one slot vocabulary: the online bandit scheduler
//! ([`odc`]), the offline optimal planner ([`coa`]), and the static duty
//! cycle ([`sdc`]). Each slot a policy observes the harvest, the solar
//! state, and the value of the datum it could sample, takes exactly one
//! action, and emits a [`SlotLog`] with the full energy ledger. Network
//! runs split the slot into a decide phase (pick the arm, pay the energy)
//! and a finish phase (learn what actually arrived or got through).

pub mod coa;
pub mod episode;
pub mod odc;
pub mod sdc;

use crate::bandit::Arm;
use crate::error::{Error, Result};

/// Per-action energy prices in mA*slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCosts {
    /// Sensing a fresh datum.
    pub sample: f64,
    /// Listening for one slot.
    pub receive: f64,
    /// Forwarding one packet.
    pub transmit: f64,
    /// Banking energy (usually free).
    pub store: f64,
}

impl Default for ActionCosts {
    fn default() -> Self {
        // Mote-scale radio figures: receiving near 20 mA, sending slightly
        // above, sensing slightly below, banking free.
        Self { sample: 19.0, receive: 20.0, transmit: 21.0, store: 0.0 }
    }
}

impl ActionCosts {
    /// Validates signs: action costs strictly positive, banking non-negative.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("cost_sample", self.sample),
            ("cost_receive", self.receive),
            ("cost_transmit", self.transmit),
        ] {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !(self.store >= 0.0) {
            return Err(Error::InvalidParameter { name: "cost_store", value: self.store });
        }
        Ok(())
    }

    /// Costs of the three reward arms in fixed arm order.
    pub fn reward_arms(&self) -> [f64; 3] {
        [self.sample, self.receive, self.transmit]
    }

    /// Cost of one arm.
    pub fn of(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Sample => self.sample,
            Arm::Receive => self.receive,
            Arm::Transmit => self.transmit,
            Arm::Store => self.store,
        }
    }

    /// Smallest reward-arm cost.
    pub fn min_reward_cost(&self) -> f64 {
        self.sample.min(self.receive).min(self.transmit)
    }
}

/// What one slot offers a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotInput {
    /// Slot index.
    pub slot: usize,
    /// Harvested power this slot, mA*slot.
    pub harvest: f64,
    /// Whether the harvest clears the solar threshold (charging possible).
    pub solar: bool,
    /// Value of the datum available for sampling this slot.
    pub available_voi: f64,
}

/// Energy movements of one slot, mA*slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyFlows {
    /// Drawn from the battery.
    pub from_battery: f64,
    /// Harvest consumed directly by the action.
    pub from_harvest: f64,
    /// Energy credited to the battery after conversion loss.
    pub banked: f64,
    /// Harvest neither used nor banked (conversion loss, overflow, or
    /// discarded while the node was busy or asleep).
    pub wasted: f64,
}

impl EnergyFlows {
    /// Total energy the action consumed.
    pub fn consumed(&self) -> f64 {
        self.from_battery + self.from_harvest
    }
}

/// Full record of one node-slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLog {
    /// Slot index.
    pub slot: usize,
    /// Arm taken (idle sleeps are logged as a zero-gain store).
    pub arm: Arm,
    /// Solar state during the slot.
    pub solar: bool,
    /// Harvested power offered, mA*slot.
    pub harvest: f64,
    /// Energy budget at decision time: battery plus usable harvest.
    pub available: f64,
    /// Banking threshold in force during the slot.
    pub threshold: f64,
    /// Reward earned (value of data sampled, received, or delivered).
    pub reward: f64,
    /// Value that left this node toward the collection point this slot:
    /// a forwarded packet that got through, or the delivery leg of a fused
    /// sense-and-deliver action.
    pub delivered: f64,
    /// The slot's energy ledger.
    pub flows: EnergyFlows,
    /// Battery level after the slot.
    pub battery_after: f64,
    /// Packets queued after the slot.
    pub backlog_len: usize,
    /// Summed value of the queued packets.
    pub backlog_voi: f64,
}

/// A committed decision awaiting network resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingAction {
    /// Arm chosen for the slot (energy already paid).
    pub arm: Arm,
    /// Value of the packet offered for forwarding, when transmitting.
    pub transmit_voi: Option<f64>,
}

/// What the network delivered back to a node at slot end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    /// Value of a packet that arrived while listening, if any.
    pub arrived: Option<f64>,
    /// Whether the offered packet got through to the parent.
    pub transmit_delivered: bool,
}

impl Delivery {
    /// Resolution for a node talking straight to an always-on collector:
    /// sends always land, nothing ever arrives.
    pub fn local() -> Self {
        Self { arrived: None, transmit_delivered: true }
    }
}

/// A policy whose slots need network mediation between choosing an action
/// and learning its outcome.
pub trait MediatedPolicy {
    /// Picks the slot's arm and pays its energy.
    fn decide(&mut self, input: &SlotInput) -> Result<PendingAction>;
    /// Closes the slot with the delivery outcome.
    fn finish(&mut self, delivery: &Delivery) -> Result<SlotLog>;
    /// Short policy name for logs and summaries.
    fn label(&self) -> &'static str;
}

/// A policy that can run a slot end to end.
pub trait NodePolicy {
    /// Runs one slot and returns its record.
    fn slot(&mut self, input: &SlotInput) -> Result<SlotLog>;
    /// Short policy name for logs and summaries.
    fn name(&self) -> &'static str;
}

impl<T: MediatedPolicy> NodePolicy for T {
    fn slot(&mut self, input: &SlotInput) -> Result<SlotLog> {
        self.decide(input)?;
        self.finish(&Delivery::local())
    }

    fn name(&self) -> &'static str {
        self.label()
    }
}

/// Pays an action's energy price: harvest first while the sun is up, the
/// shortfall (or everything at night) from the battery. Surplus harvest in
/// an action slot is discarded, the charger being unavailable while the
/// node works. The caller must have checked the budget.
pub(crate) fn pay_action(
    battery: &mut crate::battery::Battery,
    cost: f64,
    input: &SlotInput,
) -> Result<EnergyFlows> {
    let mut flows = EnergyFlows::default();
    if input.solar {
        flows.from_harvest = cost.min(input.harvest);
        flows.wasted = input.harvest - flows.from_harvest;
    } else {
        flows.wasted = input.harvest;
    }
    let shortfall = cost - flows.from_harvest;
    if shortfall > 0.0 {
        // The budget check already admitted the action; tiny float residue
        // from the budget sum must not turn into a draw rejection.
        if shortfall > battery.level() + 1e-9 {
            return Err(Error::Protocol("action admitted beyond the energy budget"));
        }
        let draw = shortfall.min(battery.level());
        battery.draw(draw)?;
        flows.from_battery = draw;
    }
    Ok(flows)
}

/// Banks the slot's harvest while the sun is up, or sleeps through it.
pub(crate) fn bank_or_sleep(
    battery: &mut crate::battery::Battery,
    input: &SlotInput,
) -> Result<EnergyFlows> {
    let mut flows = EnergyFlows::default();
    if input.solar {
        let receipt = battery.store(input.harvest)?;
        flows.banked = receipt.stored;
        flows.wasted = input.harvest - receipt.stored;
    } else {
        flows.wasted = input.harvest;
    }
    Ok(flows)
}

/// Index of the most valuable packet in a backlog.
pub(crate) fn best_packet(backlog: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in backlog.iter().enumerate() {
        match best {
            None => best = Some(j),
            Some(k) if v > backlog[k] => best = Some(j),
            _ => {}
        }
    }
    best
}
