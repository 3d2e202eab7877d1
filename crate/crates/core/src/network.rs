//! Layered multi-hop simulation.
//!
//! Nodes are placed in the plane and organized into hop-count layers
//! around a collection point (the sink). Each node forwards data to a
//! single parent one layer closer. Slots run as a synchronous barrier:
//! every node commits an action, then all transfers are resolved at
//! once. A packet gets through only when its parent is listening that
//! slot (the sink always listens) and, when several children offer a
//! packet to the same parent, a single winner per parent is drawn
//! uniformly at random from a seeded stream; the rest keep their
//! packets and have spent the forwarding energy for nothing. A
//! forwarding node with an empty queue spends the energy but puts
//! nothing on the air, so it never contends.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bandit::Arm;
use crate::error::{Error, Result};
use crate::policy::{Delivery, MediatedPolicy, PendingAction, SlotInput, SlotLog};
use crate::rng::{stream, stream_rng};
use crate::sources::{HarvestProcess, VoiSource};

/// A routed deployment: positions, hop-count layers, and one parent per
/// node pointing a layer closer to the sink.
#[derive(Debug, Clone)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    radius: f64,
    sink: usize,
    layer: Vec<usize>,
    parent: Vec<Option<usize>>,
}

impl Topology {
    /// Number of nodes, sink included.
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// The collection point's node id.
    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Radio radius in meters.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// A node's position in meters.
    pub fn position(&self, node: usize) -> (f64, f64) {
        self.positions[node]
    }

    /// Hop count from the sink (the sink itself is 0).
    pub fn layer_of(&self, node: usize) -> usize {
        self.layer[node]
    }

    /// Next hop toward the sink; the sink has none.
    pub fn parent_of(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Largest hop count present.
    pub fn max_layer(&self) -> usize {
        self.layer.iter().copied().max().unwrap_or(0)
    }

    /// Node ids sitting exactly `k` hops from the sink, ascending.
    pub fn layer_members(&self, k: usize) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.layer[i] == k).collect()
    }

    /// CSV dump (`node,x,y,layer,parent`); the sink's parent field is empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,x,y,layer,parent\n");
        for i in 0..self.node_count() {
            let parent = self.parent[i].map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.6},{:.6},{},{}\n",
                i, self.positions[i].0, self.positions[i].1, self.layer[i], parent
            ));
        }
        out
    }
}

fn within_radius(a: (f64, f64), b: (f64, f64), radius: f64) -> bool {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt() <= radius
}

/// Routes a deployment: breadth-first hop counts from the sink over the
/// disk graph (edges where distance <= radius), and for every node the
/// lowest-id neighbor one layer closer as its parent.
///
/// A node with no path to the sink is a configuration error naming the
/// node.
pub fn build_layers(positions: &[(f64, f64)], radius: f64, sink: usize) -> Result<Topology> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter { name: "radius", value: radius });
    }
    if sink >= positions.len() {
        return Err(Error::Config(format!(
            "sink id {} outside the {} node list",
            sink,
            positions.len()
        )));
    }
    let n = positions.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && within_radius(positions[i], positions[j], radius))
                .collect()
        })
        .collect();

    let mut layer = vec![usize::MAX; n];
    layer[sink] = 0;
    let mut queue = VecDeque::from([sink]);
    while let Some(node) = queue.pop_front() {
        for &next in &neighbors[node] {
            if layer[next] == usize::MAX {
                layer[next] = layer[node] + 1;
                queue.push_back(next);
            }
        }
    }
    if let Some(stranded) = (0..n).find(|&i| layer[i] == usize::MAX) {
        return Err(Error::UnreachableNode(stranded));
    }

    let parent = (0..n)
        .map(|i| {
            if i == sink {
                None
            } else {
                neighbors[i].iter().copied().find(|&j| layer[j] + 1 == layer[i])
            }
        })
        .collect();

    Ok(Topology { positions: positions.to_vec(), radius, sink, layer, parent })
}

/// Uniform random node placement over a `width` x `height` meter area,
/// drawn from the placement stream of `seed`.
pub fn random_positions(count: usize, width: f64, height: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, &[stream::PLACEMENT]);
    (0..count).map(|_| (rng.gen_range(0.0..width), rng.gen_range(0.0..height))).collect()
}

/// One packet that got through this slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    /// Forwarding node.
    pub sender: usize,
    /// Receiving parent (possibly the sink).
    pub parent: usize,
    /// Value of the packet that moved.
    pub voi: f64,
}

/// Outcome of one synchronous slot across the whole deployment.
#[derive(Debug, Clone, Default)]
pub struct SlotResolution {
    /// Packets that reached their parent.
    pub transfers: Vec<Transfer>,
    /// Senders that offered a packet to a listening parent but lost the
    /// single-winner draw.
    pub collision_losses: Vec<usize>,
    /// Value arriving at the collection point this slot.
    pub sink_voi: f64,
}

/// Resolves every node's committed action for one slot.
///
/// `decisions` is indexed by node id; the sink's entry (and any inert
/// node's) is `None`. A transfer succeeds only when the parent pulled
/// the listening arm this slot (the sink always listens) and the sender
/// wins the per-parent uniform draw; each parent accepts at most one
/// packet per slot.
pub fn resolve_slot(
    topology: &Topology,
    decisions: &[Option<PendingAction>],
    rng: &mut ChaCha8Rng,
) -> Result<SlotResolution> {
    if decisions.len() != topology.node_count() {
        return Err(Error::Config(format!(
            "{} decisions for {} nodes",
            decisions.len(),
            topology.node_count()
        )));
    }

    let mut offers: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (node, decision) in decisions.iter().enumerate() {
        if let Some(action) = decision {
            if action.arm == Arm::Transmit {
                if let (Some(voi), Some(parent)) = (action.transmit_voi, topology.parent_of(node)) {
                    offers.entry(parent).or_default().push((node, voi));
                }
            }
        }
    }

    let mut resolution = SlotResolution::default();
    for (parent, contenders) in offers {
        let listening = parent == topology.sink()
            || matches!(decisions[parent], Some(PendingAction { arm: Arm::Receive, .. }));
        if !listening {
            continue;
        }
        let winner = if contenders.len() == 1 { 0 } else { rng.gen_range(0..contenders.len()) };
        for (slot_index, &(sender, voi)) in contenders.iter().enumerate() {
            if slot_index == winner {
                resolution.transfers.push(Transfer { sender, parent, voi });
                if parent == topology.sink() {
                    resolution.sink_voi += voi;
                }
            } else {
                resolution.collision_losses.push(sender);
            }
        }
    }
    Ok(resolution)
}

/// Probability that a node and at least one of its `k` neighbors are
/// awake in the same slot, when the node wakes with probability
/// `p_self` and each neighbor independently with `p_neighbor`.
pub fn common_active_probability(p_self: f64, p_neighbor: f64, k: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_self) {
        return Err(Error::InvalidParameter { name: "p_self", value: p_self });
    }
    if !(0.0..=1.0).contains(&p_neighbor) {
        return Err(Error::InvalidParameter { name: "p_neighbor", value: p_neighbor });
    }
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", value: 0.0 });
    }
    Ok(p_self * (1.0 - (1.0 - p_neighbor).powi(k as i32)))
}

/// One deployed node: its policy plus its private energy and data streams.
pub struct NetworkNode {
    /// Decision maker for this node.
    pub policy: Box<dyn MediatedPolicy>,
    /// Energy arrival process at this node's panel.
    pub harvest: HarvestProcess,
    /// Value stream of this node's own observations.
    pub voi: VoiSource,
}

/// Complete record of a multi-node run.
pub struct NetworkEpisode {
    /// Per-node slot logs, keyed by node id (sink absent).
    pub logs: BTreeMap<usize, Vec<SlotLog>>,
    /// Value arriving at the collection point, slot by slot.
    pub sink_per_slot: Vec<f64>,
    /// Successful transfers, slot by slot.
    pub transfers_per_slot: Vec<Vec<Transfer>>,
}

impl NetworkEpisode {
    /// Total value collected at the sink over the whole run.
    pub fn sink_total(&self) -> f64 {
        self.sink_per_slot.iter().sum()
    }
}

/// Runs every node for `horizon` slots under the synchronous barrier:
/// all decisions for a slot are committed, the slot is resolved, and
/// each node then closes the slot with its delivery outcome. `nodes`
/// must cover exactly the non-sink ids of the topology. Contention
/// draws come from the contention stream of `seed`.
pub fn run_network_episode(
    topology: &Topology,
    nodes: &mut BTreeMap<usize, NetworkNode>,
    horizon: usize,
    seed: u64,
) -> Result<NetworkEpisode> {
    for id in nodes.keys() {
        if *id >= topology.node_count() || *id == topology.sink() {
            return Err(Error::Config(format!("node {id} is not a sensing node")));
        }
    }
    for id in 0..topology.node_count() {
        if id != topology.sink() && !nodes.contains_key(&id) {
            return Err(Error::Config(format!("node {id} has no policy")));
        }
    }

    let mut contention = stream_rng(seed, &[stream::CONTENTION]);
    let mut logs: BTreeMap<usize, Vec<SlotLog>> =
        nodes.keys().map(|&id| (id, Vec::with_capacity(horizon))).collect();
    let mut sink_per_slot = Vec::with_capacity(horizon);
    let mut transfers_per_slot = Vec::with_capacity(horizon);

    for slot in 0..horizon {
        let mut decisions: Vec<Option<PendingAction>> = vec![None; topology.node_count()];
        for (&id, node) in nodes.iter_mut() {
            let sample = node.harvest.sample(slot)?;
            let input = SlotInput {
                slot,
                harvest: sample.power,
                solar: sample.solar,
                available_voi: node.voi.value_at(slot)?,
            };
            decisions[id] = Some(node.policy.decide(&input)?);
        }

        let resolution = resolve_slot(topology, &decisions, &mut contention)?;
        let mut arrivals: BTreeMap<usize, f64> = BTreeMap::new();
        let mut delivered_senders: BTreeSet<usize> = BTreeSet::new();
        for transfer in &resolution.transfers {
            if transfer.parent != topology.sink() {
                arrivals.insert(transfer.parent, transfer.voi);
            }
            delivered_senders.insert(transfer.sender);
        }

        for (&id, node) in nodes.iter_mut() {
            let delivery = Delivery {
                arrived: arrivals.get(&id).copied(),
                transmit_delivered: delivered_senders.contains(&id),
            };
            logs.get_mut(&id).expect("log per node").push(node.policy.finish(&delivery)?);
        }
        sink_per_slot.push(resolution.sink_voi);
        transfers_per_slot.push(resolution.transfers);
    }

    Ok(NetworkEpisode { logs, sink_per_slot, transfers_per_slot })
}

/// Per-layer totals of forwarded value over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerFlow {
    /// Hop count from the sink.
    pub layer: usize,
    /// Value successfully forwarded by this layer's nodes.
    pub transmitted: f64,
    /// Value received by this layer's nodes (the sink's layer receives
    /// the collected total).
    pub received: f64,
}

/// Totals the run: overall value collected at the sink, plus a
/// per-layer table showing that what layer k received is exactly what
/// layer k+1 successfully forwarded.
pub fn sink_accounting(episode: &NetworkEpisode, topology: &Topology) -> (f64, Vec<LayerFlow>) {
    let mut flows: Vec<LayerFlow> = (0..=topology.max_layer())
        .map(|layer| LayerFlow { layer, transmitted: 0.0, received: 0.0 })
        .collect();
    for transfers in &episode.transfers_per_slot {
        for transfer in transfers {
            flows[topology.layer_of(transfer.sender)].transmitted += transfer.voi;
            flows[topology.layer_of(transfer.parent)].received += transfer.voi;
        }
    }
    (episode.sink_total(), flows)
}

/// Audits a finished run: every successful transfer moved exactly one
/// layer inward, and no value was created or destroyed in transit (the
/// sink total plus what is still queued equals everything ever sensed).
pub fn verify_network_episode(episode: &NetworkEpisode, topology: &Topology) -> Result<()> {
    for (slot, transfers) in episode.transfers_per_slot.iter().enumerate() {
        for transfer in transfers {
            if topology.layer_of(transfer.sender) != topology.layer_of(transfer.parent) + 1 {
                return Err(Error::Invariant(format!(
                    "slot {slot}: transfer {} -> {} skips layers",
                    transfer.sender, transfer.parent
                )));
            }
            if topology.parent_of(transfer.sender) != Some(transfer.parent) {
                return Err(Error::Invariant(format!(
                    "slot {slot}: transfer {} -> {} ignores routing",
                    transfer.sender, transfer.parent
                )));
            }
        }
    }

    let mut sensed = 0.0;
    let mut queued = 0.0;
    for logs in episode.logs.values() {
        sensed += logs
            .iter()
            .filter(|log| log.arm == Arm::Sample)
            .map(|log| log.reward)
            .sum::<f64>();
        if let Some(last) = logs.last() {
            queued += last.backlog_voi;
        }
    }
    let accounted = episode.sink_total() + queued;
    if (sensed - accounted).abs() > 1e-6 {
        return Err(Error::Invariant(format!(
            "sensed value {sensed} but {accounted} accounted for at the sink and in queues"
        )));
    }
    Ok(())
}
