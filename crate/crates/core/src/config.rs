//! Run configuration.
//!
//! Experiments are described by flat plain-text files: one `key = value`
//! per line, `#` starts a comment, no nesting. Unknown keys are errors
//! so typos surface instead of silently falling back to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::policy::ActionCosts;

/// What kind of deployment a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One node talking straight to an always-on collector.
    SingleNode,
    /// Many nodes forwarding hop by hop toward the sink.
    Network,
}

/// One of the three schedulers under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Full-knowledge offline plan.
    Coa,
    /// Online learner with the adaptive banking threshold.
    Odc,
    /// Static duty cycle sized from the energy forecast.
    Sdc,
}

impl PolicyKind {
    /// Short name used in file columns and summaries.
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Coa => "coa",
            PolicyKind::Odc => "odc",
            PolicyKind::Sdc => "sdc",
        }
    }
}

/// How energy arrives over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub enum HarvestSpec {
    /// A fixed energy total spread uniformly over inclusive slot ranges.
    Phases {
        /// Total energy across all phases, mA-slot.
        total: f64,
        /// Inclusive slot ranges receiving the energy.
        phases: Vec<(usize, usize)>,
    },
    /// A number of fixed-size energy units dropped on uniformly random
    /// slots (per-trial randomness; collisions stack).
    Units {
        /// How many units to place.
        count: usize,
        /// Energy per unit, mA-slot.
        unit_energy: f64,
    },
    /// Replay the harvest column of the bundled trace file.
    Trace,
}

/// Where observation values come from.
#[derive(Debug, Clone, PartialEq)]
pub enum VoiSpec {
    /// Independent draws from a clamped normal distribution.
    Gaussian {
        /// Distribution mean.
        mean: f64,
        /// Distribution variance.
        variance: f64,
    },
    /// Divergence scoring of the trace's light column.
    Trace {
        /// Sliding window length in slots.
        window: usize,
        /// Histogram resolution.
        bins: usize,
    },
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Single node or multi-hop deployment.
    pub scenario: Scenario,
    /// Schedulers to run, in column order.
    pub policies: Vec<PolicyKind>,
    /// Slots per trial.
    pub horizon: usize,
    /// Seconds per slot.
    pub slot_duration: f64,
    /// Energy arrival description.
    pub harvest: HarvestSpec,
    /// Observation value description.
    pub voi: VoiSpec,
    /// Trace file backing `Trace` specs.
    pub trace_file: Option<PathBuf>,
    /// Per-action energy prices.
    pub costs: ActionCosts,
    /// Offline planner's combined action price.
    pub coa_process_cost: f64,
    /// Charge conversion efficiency in (0, 1].
    pub eta: f64,
    /// Harvest power at or above which the sun counts as up, mA.
    pub energy_threshold: f64,
    /// Battery capacity, mA-slot.
    pub capacity: f64,
    /// Battery level at slot 0, mA-slot.
    pub initial_energy: f64,
    /// Learner exploration constant.
    pub e_prime: f64,
    /// Threshold controller step size.
    pub step_size: f64,
    /// Independent repetitions.
    pub trials: usize,
    /// Base seed; trial i runs on seed base + i.
    pub seed: u64,
    /// Where result files land.
    pub output_dir: PathBuf,
    /// Node count for network runs (sink included).
    pub node_count: usize,
    /// Radio radius in meters for network runs.
    pub radius: f64,
    /// Deployment area in meters for network runs.
    pub area: (f64, f64),
    /// Node counts for the density sweep, when one is requested.
    pub density_counts: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::SingleNode,
            policies: vec![PolicyKind::Coa, PolicyKind::Odc, PolicyKind::Sdc],
            horizon: 0,
            slot_duration: 60.0,
            harvest: HarvestSpec::Trace,
            voi: VoiSpec::Gaussian { mean: 1.0, variance: 0.5 },
            trace_file: None,
            costs: ActionCosts::default(),
            coa_process_cost: ActionCosts::default().sample + ActionCosts::default().transmit,
            eta: 0.8,
            energy_threshold: 20.0,
            capacity: 2400.0,
            initial_energy: 1200.0,
            e_prime: 2.0,
            step_size: 0.1,
            trials: 1,
            seed: 0,
            output_dir: PathBuf::from("out"),
            node_count: 50,
            radius: 50.0,
            area: (100.0, 100.0),
            density_counts: None,
        }
    }
}

fn parse_counts(key: &str, raw: &str) -> Result<Vec<usize>> {
    if let Some((start, rest)) = raw.split_once(':') {
        let (stop, step) = rest
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("{key}: '{raw}' is not start:stop:step")))?;
        let start: usize = parse_number(key, start.trim())?;
        let stop: usize = parse_number(key, stop.trim())?;
        let step: usize = parse_number(key, step.trim())?;
        if step == 0 || stop < start {
            return Err(Error::Config(format!("{key}: empty range '{raw}'")));
        }
        Ok((start..=stop).step_by(step).collect())
    } else {
        raw.split(',').map(|piece| parse_number(key, piece.trim())).collect()
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Config(format!("{key}: cannot read '{raw}'")))
}

fn parse_ranges(key: &str, raw: &str) -> Result<Vec<(usize, usize)>> {
    raw.split(';')
        .map(|piece| {
            let piece = piece.trim();
            let (start, end) = piece
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("{key}: range '{piece}' is not start-end")))?;
            Ok((parse_number(key, start.trim())?, parse_number(key, end.trim())?))
        })
        .collect()
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut config = Self::from_text(&text)?;
        // Relative trace paths resolve against the config file's directory.
        if let Some(trace) = &config.trace_file {
            if trace.is_relative() {
                if let Some(parent) = path.parent() {
                    config.trace_file = Some(parent.join(trace));
                }
            }
        }
        Ok(config)
    }

    /// Parses `key = value` text into a validated config.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut saw_horizon = false;
        let mut saw_harvest = false;
        let mut harvest_energy = None;
        let mut harvest_phases = None;
        let mut harvest_units = None;
        let mut harvest_unit_energy = None;
        let mut voi_kind: Option<String> = None;
        let mut voi_mean = 1.0;
        let mut voi_variance = 0.5;
        let mut voi_window = 12usize;
        let mut voi_bins = 8usize;
        let mut initial_energy = None;
        let mut coa_process_cost = None;

        for (index, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: '{line}' is not key = value", index + 1)))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "scenario" => {
                    config.scenario = match value {
                        "single-node" => Scenario::SingleNode,
                        "network" => Scenario::Network,
                        other => {
                            return Err(Error::Config(format!("scenario: unknown kind '{other}'")))
                        }
                    }
                }
                "policies" => {
                    config.policies = value
                        .split(',')
                        .map(|name| match name.trim() {
                            "coa" => Ok(PolicyKind::Coa),
                            "odc" => Ok(PolicyKind::Odc),
                            "sdc" => Ok(PolicyKind::Sdc),
                            other => Err(Error::Config(format!("policies: unknown policy '{other}'"))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
                "horizon" => {
                    config.horizon = parse_number(key, value)?;
                    saw_horizon = true;
                }
                "slot_duration" => config.slot_duration = parse_number(key, value)?,
                "harvest" => {
                    saw_harvest = true;
                    config.harvest = match value {
                        "phases" => HarvestSpec::Phases { total: 0.0, phases: Vec::new() },
                        "units" => HarvestSpec::Units { count: 0, unit_energy: 0.0 },
                        "trace" => HarvestSpec::Trace,
                        other => {
                            return Err(Error::Config(format!("harvest: unknown kind '{other}'")))
                        }
                    };
                }
                "harvest_energy" => harvest_energy = Some(parse_number(key, value)?),
                "harvest_phases" => harvest_phases = Some(parse_ranges(key, value)?),
                "harvest_units" => harvest_units = Some(parse_number(key, value)?),
                "harvest_unit_energy" => harvest_unit_energy = Some(parse_number(key, value)?),
                "trace_file" => config.trace_file = Some(PathBuf::from(value)),
                "voi" => voi_kind = Some(value.to_string()),
                "voi_mean" => voi_mean = parse_number(key, value)?,
                "voi_variance" => voi_variance = parse_number(key, value)?,
                "voi_window" => voi_window = parse_number(key, value)?,
                "voi_bins" => voi_bins = parse_number(key, value)?,
                "cost_sample" => config.costs.sample = parse_number(key, value)?,
                "cost_receive" => config.costs.receive = parse_number(key, value)?,
                "cost_transmit" => config.costs.transmit = parse_number(key, value)?,
                "coa_process_cost" => coa_process_cost = Some(parse_number(key, value)?),
                "eta" => config.eta = parse_number(key, value)?,
                "energy_threshold" => config.energy_threshold = parse_number(key, value)?,
                "capacity" => config.capacity = parse_number(key, value)?,
                "initial_energy" => initial_energy = Some(parse_number(key, value)?),
                "e_prime" => config.e_prime = parse_number(key, value)?,
                "step_size" => config.step_size = parse_number(key, value)?,
                "trials" => config.trials = parse_number(key, value)?,
                "seed" => config.seed = parse_number(key, value)?,
                "output_dir" => config.output_dir = PathBuf::from(value),
                "node_count" => config.node_count = parse_number(key, value)?,
                "density_counts" => config.density_counts = Some(parse_counts(key, value)?),
                "radius" => config.radius = parse_number(key, value)?,
                "area_width" => config.area.0 = parse_number(key, value)?,
                "area_height" => config.area.1 = parse_number(key, value)?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }

        if !saw_horizon {
            return Err(Error::Config("horizon is required".into()));
        }
        if !saw_harvest {
            return Err(Error::Config("harvest kind is required".into()));
        }
        match &mut config.harvest {
            HarvestSpec::Phases { total, phases } => {
                *total = harvest_energy
                    .ok_or_else(|| Error::Config("harvest_energy is required for phases".into()))?;
                *phases = harvest_phases
                    .ok_or_else(|| Error::Config("harvest_phases is required for phases".into()))?;
            }
            HarvestSpec::Units { count, unit_energy } => {
                *count = harvest_units
                    .ok_or_else(|| Error::Config("harvest_units is required for units".into()))?;
                *unit_energy = harvest_unit_energy
                    .ok_or_else(|| Error::Config("harvest_unit_energy is required for units".into()))?;
            }
            HarvestSpec::Trace => {
                if config.trace_file.is_none() {
                    return Err(Error::Config("trace_file is required for trace harvest".into()));
                }
            }
        }
        match voi_kind.as_deref() {
            None | Some("gaussian") => {
                config.voi = VoiSpec::Gaussian { mean: voi_mean, variance: voi_variance }
            }
            Some("trace") => {
                if config.trace_file.is_none() {
                    return Err(Error::Config("trace_file is required for trace voi".into()));
                }
                config.voi = VoiSpec::Trace { window: voi_window, bins: voi_bins };
            }
            Some(other) => return Err(Error::Config(format!("voi: unknown kind '{other}'"))),
        }
        config.initial_energy = initial_energy.unwrap_or(config.capacity / 2.0);
        config.coa_process_cost =
            coa_process_cost.unwrap_or(config.costs.sample + config.costs.transmit);
        config.validate()?;
        Ok(config)
    }

    /// Checks every cross-field rule.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta {} outside (0, 1]", self.eta)));
        }
        self.costs.validate()?;
        if !(self.coa_process_cost > 0.0) {
            return Err(Error::Config(format!(
                "coa_process_cost {} must be positive",
                self.coa_process_cost
            )));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::Config(format!(
                "slot_duration {} must be positive",
                self.slot_duration
            )));
        }
        if !(self.capacity > 0.0) {
            return Err(Error::Config(format!("capacity {} must be positive", self.capacity)));
        }
        if !(0.0..=self.capacity).contains(&self.initial_energy) {
            return Err(Error::Config(format!(
                "initial_energy {} outside [0, {}]",
                self.initial_energy, self.capacity
            )));
        }
        if self.energy_threshold < 0.0 {
            return Err(Error::Config(format!(
                "energy_threshold {} must not be negative",
                self.energy_threshold
            )));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if self.e_prime < 1.0 {
            return Err(Error::Config(format!("e_prime {} must be at least 1", self.e_prime)));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step_size {} must be positive", self.step_size)));
        }
        if let HarvestSpec::Phases { total, phases } = &self.harvest {
            if !(*total > 0.0) {
                return Err(Error::Config(format!("harvest_energy {total} must be positive")));
            }
            if phases.is_empty() {
                return Err(Error::Config("harvest_phases must not be empty".into()));
            }
        }
        if let HarvestSpec::Units { count, unit_energy } = &self.harvest {
            if *count == 0 {
                return Err(Error::Config("harvest_units must be at least 1".into()));
            }
            if !(*unit_energy > 0.0) {
                return Err(Error::Config(format!(
                    "harvest_unit_energy {unit_energy} must be positive"
                )));
            }
        }
        if let VoiSpec::Gaussian { variance, .. } = &self.voi {
            if *variance < 0.0 {
                return Err(Error::Config(format!("voi_variance {variance} must not be negative")));
            }
        }
        if let VoiSpec::Trace { window, bins } = &self.voi {
            if *window == 0 || *bins == 0 {
                return Err(Error::Config("voi_window and voi_bins must be positive".into()));
            }
        }
        if self.scenario == Scenario::Network {
            if self.node_count < 2 {
                return Err(Error::Config("network runs need at least a sink and one node".into()));
            }
            if !(self.radius > 0.0) {
                return Err(Error::Config(format!("radius {} must be positive", self.radius)));
            }
            if !(self.area.0 > 0.0 && self.area.1 > 0.0) {
                return Err(Error::Config("deployment area must be positive".into()));
            }
        }
        if let Some(counts) = &self.density_counts {
            if self.scenario != Scenario::Network {
                return Err(Error::Config("density_counts only applies to network runs".into()));
            }
            if counts.is_empty() || counts.iter().any(|&c| c < 2) {
                return Err(Error::Config("density_counts entries must be at least 2".into()));
            }
        }
        Ok(())
    }
}
