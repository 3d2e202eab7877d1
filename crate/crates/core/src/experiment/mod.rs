//! Experiment orchestration.
//!
//! A run takes a validated config, repeats the scenario for the
//! configured number of trials, and compares every configured policy on
//! identical per-trial energy and value streams (common random
//! numbers; trial i draws from base seed + i). Results are computed
//! fully in memory and only then written out, so a failed run leaves no
//! partial files. Summaries are pure functions of the config and base
//! seed: rerunning produces byte-identical files.

pub mod regret;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::battery::Battery;
use crate::config::{ExperimentConfig, HarvestSpec, PolicyKind, Scenario, VoiSpec};
use crate::error::{Error, Result};
use crate::network::{
    build_layers, random_positions, run_network_episode, verify_network_episode, NetworkNode,
    Topology,
};
use crate::policy::coa::{coa_schedule, CoaNode, CoaSetup};
use crate::policy::episode::{cumulative_rewards, run_node_episode, verify_episode};
use crate::policy::odc::{OdcConfig, OdcNode, ThresholdMode};
use crate::policy::sdc::{sdc_schedule, SdcNode};
use crate::policy::SlotLog;
use crate::rng::{derive_seed, stream, stream_rng};
use crate::sources::{HarvestProcess, VoiSource};
use crate::trace::{load_trace, voi_from_lux, TraceRecord};
use rand::Rng;

use regret::{compute_regret, RegretReport};

/// One policy's outcome in one trial.
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    /// Which scheduler.
    pub kind: PolicyKind,
    /// Total collected value (single node: summed slot rewards;
    /// network: value arriving at the sink, except the offline planner,
    /// which reports the value its per-node plans deliver).
    pub total_voi: f64,
    /// Energy consumed by actions across all nodes, mA-slot.
    pub energy: f64,
    /// Per-slot cumulative value curve for the same metric.
    pub cumulative: Vec<f64>,
    /// Slot records, one vector per node (single node: exactly one).
    pub logs: Vec<Vec<SlotLog>>,
}

impl PolicyOutcome {
    /// Value per unit of consumed energy.
    pub fn efficiency(&self) -> f64 {
        if self.energy > 0.0 {
            self.total_voi / self.energy
        } else {
            0.0
        }
    }
}

/// One trial: every policy on the same streams.
#[derive(Debug, Clone)]
pub struct TrialResult {
    /// Trial index.
    pub trial: usize,
    /// Seed the trial's streams were drawn from.
    pub seed: u64,
    /// Outcomes aligned with the config's policy list.
    pub policies: Vec<PolicyOutcome>,
    /// Measured same-slot activity between neighbors (network runs,
    /// taken from the learner's episode).
    pub common_activity: Option<f64>,
}

/// One point of the node-count sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    /// Deployment size, sink included.
    pub nodes: usize,
    /// Sink value collected per sensing node.
    pub voi_per_node: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// The config the run executed.
    pub config: ExperimentConfig,
    /// All trials in order.
    pub trials: Vec<TrialResult>,
    /// Mean regret-vs-reference reports for learners, when the offline
    /// planner ran too (single-node runs).
    pub regret: Vec<(PolicyKind, RegretReport)>,
    /// Node-count sweep results, when the config asked for one.
    pub density: Option<Vec<DensityPoint>>,
}

impl ExperimentResult {
    /// Mean of each policy's total value across trials, in config order.
    pub fn mean_totals(&self) -> Vec<(PolicyKind, f64)> {
        self.config
            .policies
            .iter()
            .enumerate()
            .map(|(index, kind)| {
                let sum: f64 = self.trials.iter().map(|t| t.policies[index].total_voi).sum();
                (*kind, sum / self.trials.len().max(1) as f64)
            })
            .collect()
    }

    /// Mean per-slot cumulative curve for one policy across trials.
    pub fn mean_cumulative(&self, index: usize) -> Vec<f64> {
        let mut curve = vec![0.0; self.config.horizon];
        for trial in &self.trials {
            for (slot, value) in trial.policies[index].cumulative.iter().enumerate() {
                curve[slot] += value;
            }
        }
        let n = self.trials.len().max(1) as f64;
        curve.iter_mut().for_each(|v| *v /= n);
        curve
    }
}

fn trace_records(config: &ExperimentConfig) -> Result<Option<Vec<TraceRecord>>> {
    let needs_trace = matches!(config.harvest, HarvestSpec::Trace)
        || matches!(config.voi, VoiSpec::Trace { .. });
    if !needs_trace {
        return Ok(None);
    }
    let path = config
        .trace_file
        .as_ref()
        .ok_or_else(|| Error::Config("trace_file is required".into()))?;
    let records = load_trace(path)?;
    if records.len() < config.horizon {
        return Err(Error::Config(format!(
            "trace has {} slots, horizon needs {}",
            records.len(),
            config.horizon
        )));
    }
    Ok(Some(records))
}

/// Builds one node's harvest and value streams for one trial. All
/// policies replay these exact streams.
fn build_streams(
    config: &ExperimentConfig,
    trial_seed: u64,
    node: u64,
    records: Option<&[TraceRecord]>,
) -> Result<(HarvestProcess, VoiSource)> {
    let harvest = match &config.harvest {
        HarvestSpec::Phases { total, phases } => HarvestProcess::phase_schedule(
            *total,
            phases,
            config.horizon,
            config.energy_threshold,
        )?,
        HarvestSpec::Units { count, unit_energy } => {
            let mut rng = stream_rng(trial_seed, &[stream::HARVEST, node]);
            let mut powers = vec![0.0; config.horizon];
            for _ in 0..*count {
                // Collisions stack: two units on one slot double its power.
                powers[rng.gen_range(0..config.horizon)] += unit_energy;
            }
            HarvestProcess::from_powers(powers, config.energy_threshold)?
        }
        HarvestSpec::Trace => {
            let records = records.ok_or_else(|| Error::Config("trace records missing".into()))?;
            HarvestProcess::from_powers(
                records[..config.horizon].iter().map(|r| r.harvest_ma).collect(),
                config.energy_threshold,
            )?
        }
    };
    let voi = match &config.voi {
        VoiSpec::Gaussian { mean, variance } => VoiSource::gaussian(
            *mean,
            *variance,
            config.horizon,
            derive_seed(trial_seed, &[node]),
        )?,
        VoiSpec::Trace { window, bins } => {
            let records = records.ok_or_else(|| Error::Config("trace records missing".into()))?;
            let lux: Vec<f64> = records[..config.horizon].iter().map(|r| r.lux).collect();
            VoiSource::from_values(voi_from_lux(&lux, *window, *bins)?)?
        }
    };
    Ok((harvest, voi))
}

fn consumed(logs: &[SlotLog]) -> f64 {
    logs.iter().map(|l| l.flows.consumed()).sum()
}

fn stream_table(harvest: &HarvestProcess, voi: &VoiSource, horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut powers = Vec::with_capacity(horizon);
    let mut values = Vec::with_capacity(horizon);
    for slot in 0..horizon {
        powers.push(harvest.sample(slot)?.power);
        values.push(voi.value_at(slot)?);
    }
    Ok((powers, values))
}

fn single_node_policy(
    config: &ExperimentConfig,
    kind: PolicyKind,
    trial_seed: u64,
    harvest: &HarvestProcess,
    voi: &VoiSource,
) -> Result<PolicyOutcome> {
    let battery = Battery::new(config.capacity, config.eta, config.initial_energy)?;
    let logs = match kind {
        PolicyKind::Odc => {
            let odc_config = OdcConfig {
                costs: config.costs,
                e_prime: config.e_prime,
                step_size: config.step_size,
                threshold_mode: ThresholdMode::Adaptive,
            };
            let mut node = OdcNode::new(battery, &odc_config, trial_seed, 0)?;
            run_node_episode(&mut node, harvest, voi, config.horizon)?
        }
        PolicyKind::Sdc => {
            let active = sdc_schedule(
                harvest.total_energy(),
                (config.costs.sample + config.costs.transmit) / 2.0,
                config.horizon,
                config.eta,
            )?;
            let mut node = SdcNode::new(battery, config.costs, active)?;
            run_node_episode(&mut node, harvest, voi, config.horizon)?
        }
        PolicyKind::Coa => {
            // The offline reference plans with full knowledge and banks
            // losslessly: an idealized upper baseline.
            let setup = CoaSetup {
                process_cost: config.coa_process_cost,
                capacity: config.capacity,
                initial: config.initial_energy,
                efficiency: 1.0,
            };
            let (powers, values) = stream_table(harvest, voi, config.horizon)?;
            let plan = coa_schedule(&powers, &values, &setup)?;
            let mut node = CoaNode::new(plan, &setup)?;
            run_node_episode(&mut node, harvest, voi, config.horizon)?
        }
    };
    verify_episode(&logs, config.initial_energy, config.capacity)?;
    let cumulative = cumulative_rewards(&logs);
    Ok(PolicyOutcome {
        kind,
        total_voi: cumulative.last().copied().unwrap_or(0.0),
        energy: consumed(&logs),
        cumulative,
        logs: vec![logs],
    })
}

/// Places nodes until the deployment is connected, salting the
/// placement stream deterministically on each retry.
fn place_connected(config: &ExperimentConfig, trial_seed: u64, node_count: usize) -> Result<Topology> {
    let mut last = Error::Config("no placement attempted".into());
    for attempt in 0..64u64 {
        let positions = random_positions(
            node_count,
            config.area.0,
            config.area.1,
            derive_seed(trial_seed, &[attempt]),
        );
        match build_layers(&positions, config.radius, 0) {
            Ok(topology) => return Ok(topology),
            Err(error @ Error::UnreachableNode(_)) => last = error,
            Err(error) => return Err(error),
        }
    }
    Err(Error::Config(format!(
        "no connected placement of {node_count} nodes in 64 attempts (last: {last})"
    )))
}

fn network_policy(
    config: &ExperimentConfig,
    kind: PolicyKind,
    trial_seed: u64,
    topology: &Topology,
    records: Option<&[TraceRecord]>,
) -> Result<PolicyOutcome> {
    let node_count = topology.node_count();
    if kind == PolicyKind::Coa {
        // The planner is a per-node idealized bound: every node plans
        // its own stream with full knowledge and counts each processed
        // datum once, as if delivery were free of contention.
        let mut cumulative = vec![0.0; config.horizon];
        let mut energy = 0.0;
        let mut all_logs = Vec::new();
        for id in 1..node_count {
            let (harvest, voi) = build_streams(config, trial_seed, id as u64, records)?;
            let setup = CoaSetup {
                process_cost: config.coa_process_cost,
                capacity: config.capacity,
                initial: config.initial_energy,
                efficiency: 1.0,
            };
            let (powers, values) = stream_table(&harvest, &voi, config.horizon)?;
            let plan = coa_schedule(&powers, &values, &setup)?;
            let mut node = CoaNode::new(plan, &setup)?;
            let logs = run_node_episode(&mut node, &harvest, &voi, config.horizon)?;
            verify_episode(&logs, config.initial_energy, config.capacity)?;
            energy += consumed(&logs);
            let mut running = 0.0;
            for (slot, log) in logs.iter().enumerate() {
                // Single credit per processed datum.
                running += log.reward / 2.0;
                cumulative[slot] += running;
            }
            all_logs.push(logs);
        }
        return Ok(PolicyOutcome {
            kind,
            total_voi: cumulative.last().copied().unwrap_or(0.0),
            energy,
            cumulative,
            logs: all_logs,
        });
    }

    let mut nodes: BTreeMap<usize, NetworkNode> = BTreeMap::new();
    for id in 1..node_count {
        let (harvest, voi) = build_streams(config, trial_seed, id as u64, records)?;
        let battery = Battery::new(config.capacity, config.eta, config.initial_energy)?;
        let policy: Box<dyn crate::policy::MediatedPolicy> = match kind {
            PolicyKind::Odc => {
                let odc_config = OdcConfig {
                    costs: config.costs,
                    e_prime: config.e_prime,
                    step_size: config.step_size,
                    threshold_mode: ThresholdMode::Adaptive,
                };
                Box::new(OdcNode::new(battery, &odc_config, trial_seed, id as u64)?)
            }
            PolicyKind::Sdc => {
                let active = sdc_schedule(
                    harvest.total_energy(),
                    (config.costs.sample + config.costs.transmit) / 2.0,
                    config.horizon,
                    config.eta,
                )?;
                Box::new(SdcNode::new(battery, config.costs, active)?)
            }
            PolicyKind::Coa => unreachable!("handled above"),
        };
        nodes.insert(id, NetworkNode { policy, harvest, voi });
    }
    let episode = run_network_episode(topology, &mut nodes, config.horizon, trial_seed)?;
    verify_network_episode(&episode, topology)?;
    for logs in episode.logs.values() {
        verify_episode(logs, config.initial_energy, config.capacity)?;
    }
    let mut cumulative = Vec::with_capacity(config.horizon);
    let mut running = 0.0;
    for value in &episode.sink_per_slot {
        running += value;
        cumulative.push(running);
    }
    let logs: Vec<Vec<SlotLog>> = episode.logs.into_values().collect();
    Ok(PolicyOutcome {
        kind,
        total_voi: running,
        energy: logs.iter().map(|l| consumed(l)).sum(),
        cumulative,
        logs,
    })
}

/// Fraction of slots in which a node and at least one of its non-sink
/// radio neighbors acted in the same slot, averaged over nodes.
fn measure_common_activity(topology: &Topology, logs: &[Vec<SlotLog>]) -> Option<f64> {
    let sink = topology.sink();
    let ids: Vec<usize> = (0..topology.node_count()).filter(|&i| i != sink).collect();
    if ids.len() != logs.len() || logs.is_empty() {
        return None;
    }
    let horizon = logs[0].len();
    if horizon == 0 {
        return None;
    }
    let active: Vec<Vec<bool>> = logs
        .iter()
        .map(|node| node.iter().map(|l| l.flows.consumed() > 0.0).collect())
        .collect();
    let mut rates = Vec::new();
    for (slot_a, &a) in ids.iter().enumerate() {
        let neighbors: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|&(slot_b, &b)| {
                b != a && {
                    let (ax, ay) = topology.position(a);
                    let (bx, by) = topology.position(b);
                    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt() <= topology.radius()
                        && slot_b < active.len()
                }
            })
            .map(|(slot_b, _)| slot_b)
            .collect();
        if neighbors.is_empty() {
            continue;
        }
        let hits = (0..horizon)
            .filter(|&t| active[slot_a][t] && neighbors.iter().any(|&n| active[n][t]))
            .count();
        rates.push(hits as f64 / horizon as f64);
    }
    if rates.is_empty() {
        None
    } else {
        Some(rates.iter().sum::<f64>() / rates.len() as f64)
    }
}

fn run_trial(
    config: &ExperimentConfig,
    trial: usize,
    records: Option<&[TraceRecord]>,
) -> Result<TrialResult> {
    let trial_seed = config.seed + trial as u64;
    let mut policies = Vec::with_capacity(config.policies.len());
    let mut common_activity = None;
    match config.scenario {
        Scenario::SingleNode => {
            let (harvest, voi) = build_streams(config, trial_seed, 0, records)?;
            for &kind in &config.policies {
                policies.push(single_node_policy(config, kind, trial_seed, &harvest, &voi)?);
            }
        }
        Scenario::Network => {
            let topology = place_connected(config, trial_seed, config.node_count)?;
            for &kind in &config.policies {
                let outcome = network_policy(config, kind, trial_seed, &topology, records)?;
                if kind == PolicyKind::Odc {
                    common_activity = measure_common_activity(&topology, &outcome.logs);
                }
                policies.push(outcome);
            }
        }
    }
    Ok(TrialResult { trial, seed: trial_seed, policies, common_activity })
}

fn mean_regret_reports(
    config: &ExperimentConfig,
    trials: &[TrialResult],
) -> Result<Vec<(PolicyKind, RegretReport)>> {
    if config.scenario != Scenario::SingleNode {
        return Ok(Vec::new());
    }
    let Some(reference) = config.policies.iter().position(|&k| k == PolicyKind::Coa) else {
        return Ok(Vec::new());
    };
    // A reference that never acts offers no per-cost rate to compare
    // against; omit the reports rather than fail the run.
    if trials.iter().any(|t| t.policies[reference].energy == 0.0) {
        return Ok(Vec::new());
    }
    let mut reports = Vec::new();
    for (index, &kind) in config.policies.iter().enumerate() {
        if kind == PolicyKind::Coa {
            continue;
        }
        let mut merged: Option<RegretReport> = None;
        for trial in trials {
            let report = compute_regret(
                &trial.policies[index].logs[0],
                &trial.policies[reference].logs[0],
                config.e_prime,
            )?;
            merged = Some(match merged {
                None => report,
                Some(mut accumulated) => {
                    for (a, b) in accumulated.regret.iter_mut().zip(&report.regret) {
                        *a += b;
                    }
                    for (a, b) in accumulated.bound.iter_mut().zip(&report.bound) {
                        *a += b;
                    }
                    for (a, b) in
                        accumulated.policy_cumulative.iter_mut().zip(&report.policy_cumulative)
                    {
                        *a += b;
                    }
                    for (a, b) in
                        accumulated.oracle_cumulative.iter_mut().zip(&report.oracle_cumulative)
                    {
                        *a += b;
                    }
                    accumulated
                }
            });
        }
        if let Some(mut report) = merged {
            let n = trials.len() as f64;
            report.regret.iter_mut().for_each(|v| *v /= n);
            report.bound.iter_mut().for_each(|v| *v /= n);
            report.policy_cumulative.iter_mut().for_each(|v| *v /= n);
            report.oracle_cumulative.iter_mut().for_each(|v| *v /= n);
            reports.push((kind, report));
        }
    }
    Ok(reports)
}

fn density_sweep(
    config: &ExperimentConfig,
    counts: &[usize],
    records: Option<&[TraceRecord]>,
) -> Result<Vec<DensityPoint>> {
    let mut points = Vec::with_capacity(counts.len());
    for &count in counts {
        let topology = place_connected(config, config.seed, count)?;
        let outcome = network_policy(config, PolicyKind::Odc, config.seed, &topology, records)?;
        points.push(DensityPoint {
            nodes: count,
            voi_per_node: outcome.total_voi / (count - 1) as f64,
        });
    }
    Ok(points)
}

/// Runs the whole experiment described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let records = trace_records(config)?;
    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        trials.push(run_trial(config, trial, records.as_deref())?);
    }
    let regret = mean_regret_reports(config, &trials)?;
    let density = match (&config.density_counts, config.scenario) {
        (Some(counts), Scenario::Network) => {
            Some(density_sweep(config, counts, records.as_deref())?)
        }
        _ => None,
    };
    Ok(ExperimentResult { config: config.clone(), trials, regret, density })
}

fn log_csv(logs: &[SlotLog]) -> String {
    let mut out = String::from(
        "slot,arm,solar,harvest,available,threshold,reward,delivered,from_battery,from_harvest,banked,wasted,battery_after,backlog_len,backlog_voi\n",
    );
    for log in logs {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6}\n",
            log.slot,
            log.arm.label(),
            log.solar as u8,
            log.harvest,
            log.available,
            log.threshold,
            log.reward,
            log.delivered,
            log.flows.from_battery,
            log.flows.from_harvest,
            log.flows.banked,
            log.flows.wasted,
            log.battery_after,
            log.backlog_len,
            log.backlog_voi,
        ));
    }
    out
}

fn sink_csv(outcome: &PolicyOutcome) -> String {
    let mut out = String::from("slot,voi,cumulative\n");
    let mut previous = 0.0;
    for (slot, &cumulative) in outcome.cumulative.iter().enumerate() {
        out.push_str(&format!("{},{:.6},{:.6}\n", slot, cumulative - previous, cumulative));
        previous = cumulative;
    }
    out
}

fn summary_csv(result: &ExperimentResult) -> String {
    let config = &result.config;
    let mut header = String::from("trial,seed");
    for kind in &config.policies {
        let label = kind.label();
        header.push_str(&format!(",{label}_voi,{label}_energy,{label}_efficiency"));
    }
    let reference = config.policies.iter().position(|&k| k == PolicyKind::Coa);
    if reference.is_some() {
        for kind in &config.policies {
            if *kind != PolicyKind::Coa {
                header.push_str(&format!(",{}_regret", kind.label()));
            }
        }
    }
    if config.scenario == Scenario::Network {
        header.push_str(",common_activity");
    }
    header.push('\n');

    let mut out = header;
    for trial in &result.trials {
        out.push_str(&format!("{},{}", trial.trial, trial.seed));
        for outcome in &trial.policies {
            out.push_str(&format!(
                ",{:.6},{:.6},{:.6}",
                outcome.total_voi,
                outcome.energy,
                outcome.efficiency()
            ));
        }
        if let Some(reference) = reference {
            let reference_total = trial.policies[reference].total_voi;
            for outcome in &trial.policies {
                if outcome.kind != PolicyKind::Coa {
                    out.push_str(&format!(",{:.6}", reference_total - outcome.total_voi));
                }
            }
        }
        if config.scenario == Scenario::Network {
            out.push_str(&format!(",{:.6}", trial.common_activity.unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

fn cumulative_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("slot");
    for kind in &result.config.policies {
        out.push_str(&format!(",{}", kind.label()));
    }
    out.push('\n');
    let curves: Vec<Vec<f64>> =
        (0..result.config.policies.len()).map(|index| result.mean_cumulative(index)).collect();
    for slot in 0..result.config.horizon {
        out.push_str(&slot.to_string());
        for curve in &curves {
            out.push_str(&format!(",{:.6}", curve[slot]));
        }
        out.push('\n');
    }
    out
}

fn regret_csv(report: &RegretReport) -> String {
    let mut out = String::from("slot,regret,bound\n");
    for (slot, (regret, bound)) in report.regret.iter().zip(&report.bound).enumerate() {
        out.push_str(&format!("{},{:.6},{:.6}\n", slot, regret, bound));
    }
    out
}

fn density_csv(points: &[DensityPoint]) -> String {
    let mut out = String::from("nodes,voi_per_node\n");
    for point in points {
        out.push_str(&format!("{},{:.6}\n", point.nodes, point.voi_per_node));
    }
    out
}

fn common_activity_csv(result: &ExperimentResult) -> String {
    // Closed-form co-activity curve at the measured mean wake rate.
    let measured: Vec<f64> =
        result.trials.iter().filter_map(|t| t.common_activity).collect();
    let mut out = String::from("neighbors,common_probability\n");
    let rates: Vec<f64> = result
        .trials
        .iter()
        .flat_map(|t| t.policies.iter())
        .filter(|p| p.kind == PolicyKind::Odc)
        .flat_map(|p| p.logs.iter())
        .map(|logs| {
            let active = logs.iter().filter(|l| l.flows.consumed() > 0.0).count();
            active as f64 / logs.len().max(1) as f64
        })
        .collect();
    let p = if rates.is_empty() { 0.0 } else { rates.iter().sum::<f64>() / rates.len() as f64 };
    for k in 1..=10u32 {
        let closed = crate::network::common_active_probability(p.min(1.0), p.min(1.0), k)
            .unwrap_or(0.0);
        out.push_str(&format!("{},{:.6}\n", k, closed));
    }
    if !measured.is_empty() {
        let mean = measured.iter().sum::<f64>() / measured.len() as f64;
        out.push_str(&format!("measured,{:.6}\n", mean));
    }
    out
}

/// Renders every output file for a finished run, in deterministic
/// order, without touching the filesystem.
pub fn render_outputs(result: &ExperimentResult) -> Vec<(PathBuf, String)> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    files.push((PathBuf::from("summary.csv"), summary_csv(result)));
    files.push((PathBuf::from("cumulative_voi.csv"), cumulative_csv(result)));
    for (kind, report) in &result.regret {
        files.push((PathBuf::from(format!("regret_{}.csv", kind.label())), regret_csv(report)));
    }
    for trial in &result.trials {
        for outcome in &trial.policies {
            let name = format!("trial_{:03}_{}.csv", trial.trial, outcome.kind.label());
            let content = match result.config.scenario {
                Scenario::SingleNode => log_csv(&outcome.logs[0]),
                Scenario::Network => sink_csv(outcome),
            };
            files.push((PathBuf::from(name), content));
        }
    }
    if result.config.scenario == Scenario::Network {
        files.push((PathBuf::from("common_activity.csv"), common_activity_csv(result)));
        if let Ok(topology) =
            place_connected(&result.config, result.config.seed, result.config.node_count)
        {
            files.push((PathBuf::from("topology.csv"), topology.to_csv()));
        }
    }
    if let Some(points) = &result.density {
        files.push((PathBuf::from("voi_vs_density.csv"), density_csv(points)));
    }
    files
}

/// Writes every output file under `directory` (creating it) and
/// returns the paths written. Contents are rendered before the first
/// write.
pub fn write_outputs(result: &ExperimentResult, directory: &Path) -> Result<Vec<PathBuf>> {
    let files = render_outputs(result);
    fs::create_dir_all(directory)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = directory.join(name);
        fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units_config(trials: usize, horizon: usize) -> ExperimentConfig {
        let text = format!(
            "horizon = {horizon}\nharvest = units\nharvest_units = 60\nharvest_unit_energy = 25\n\
             capacity = 600\ninitial_energy = 60\ntrials = {trials}\nseed = 11\n"
        );
        ExperimentConfig::from_text(&text).unwrap()
    }

    #[test]
    fn single_trial_single_slot_runs() {
        let config = ExperimentConfig::from_text(
            "horizon = 1\nharvest = units\nharvest_units = 1\nharvest_unit_energy = 25\ncapacity = 600\n",
        )
        .unwrap();
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.trials.len(), 1);
        for outcome in &result.trials[0].policies {
            assert_eq!(outcome.cumulative.len(), 1);
            assert_eq!(outcome.logs[0].len(), 1);
        }
    }

    #[test]
    fn policies_share_each_trials_streams() {
        let config = units_config(2, 60);
        let result = run_experiment(&config).unwrap();
        for trial in &result.trials {
            let harvests: Vec<Vec<f64>> = trial
                .policies
                .iter()
                .map(|p| p.logs[0].iter().map(|l| l.harvest).collect())
                .collect();
            assert_eq!(harvests[0], harvests[1]);
            assert_eq!(harvests[1], harvests[2]);
        }
    }

    #[test]
    fn identical_seeds_render_identical_outputs() {
        let config = units_config(3, 50);
        let first = render_outputs(&run_experiment(&config).unwrap());
        let second = render_outputs(&run_experiment(&config).unwrap());
        assert_eq!(first, second);
        // A different base seed changes the data.
        let mut shifted = config.clone();
        shifted.seed += 1;
        let third = render_outputs(&run_experiment(&shifted).unwrap());
        assert_ne!(first, third);
    }

    #[test]
    fn per_slot_files_have_horizon_rows_and_summary_has_trial_rows() {
        let config = units_config(4, 40);
        let result = run_experiment(&config).unwrap();
        let files = render_outputs(&result);
        let summary = &files.iter().find(|(p, _)| p.ends_with("summary.csv")).unwrap().1;
        assert_eq!(summary.lines().count(), 1 + 4);
        let cumulative =
            &files.iter().find(|(p, _)| p.ends_with("cumulative_voi.csv")).unwrap().1;
        assert_eq!(cumulative.lines().count(), 1 + 40);
        let a_trial = &files.iter().find(|(p, _)| p.ends_with("trial_002_odc.csv")).unwrap().1;
        assert_eq!(a_trial.lines().count(), 1 + 40);
        let regret = &files.iter().find(|(p, _)| p.ends_with("regret_odc.csv")).unwrap().1;
        assert_eq!(regret.lines().count(), 1 + 40);
    }

    #[test]
    fn regret_against_the_planner_is_reported_with_its_envelope() {
        let config = units_config(3, 80);
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.regret.len(), 2);
        let (kind, report) = &result.regret[0];
        assert_eq!(*kind, PolicyKind::Odc);
        assert_eq!(report.regret.len(), 80);
        for pair in report.bound.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "envelope decreased");
        }
    }

    #[test]
    fn written_files_land_in_the_directory() {
        let config = units_config(1, 20);
        let result = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_outputs(&result, dir.path()).unwrap();
        assert!(paths.iter().all(|p| p.exists()));
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("trial_000_coa.csv").exists());
    }

    #[test]
    fn network_run_produces_sink_series_and_common_activity() {
        let config = ExperimentConfig::from_text(
            "scenario = network\nnode_count = 8\nhorizon = 120\nharvest = units\n\
             harvest_units = 60\nharvest_unit_energy = 25\ncapacity = 600\ninitial_energy = 60\n\
             policies = odc, sdc\ntrials = 2\nseed = 21\n",
        )
        .unwrap();
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.trials.len(), 2);
        for trial in &result.trials {
            assert!(trial.common_activity.is_some());
            for outcome in &trial.policies {
                assert_eq!(outcome.cumulative.len(), 120);
                assert_eq!(outcome.logs.len(), 7);
            }
        }
        let files = render_outputs(&result);
        assert!(files.iter().any(|(p, _)| p.ends_with("topology.csv")));
        assert!(files.iter().any(|(p, _)| p.ends_with("common_activity.csv")));
    }

    #[test]
    fn density_sweep_emits_one_row_per_count() {
        let config = ExperimentConfig::from_text(
            "scenario = network\nnode_count = 6\nhorizon = 60\nharvest = units\n\
             harvest_units = 40\nharvest_unit_energy = 25\ncapacity = 600\ninitial_energy = 60\n\
             policies = odc\ntrials = 1\nseed = 5\ndensity_counts = 4,8\n",
        )
        .unwrap();
        let result = run_experiment(&config).unwrap();
        let points = result.density.as_ref().unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].nodes, 4);
        assert_eq!(points[1].nodes, 8);
        let files = render_outputs(&result);
        let density = &files.iter().find(|(p, _)| p.ends_with("voi_vs_density.csv")).unwrap().1;
        assert_eq!(density.lines().count(), 1 + 2);
    }
}
