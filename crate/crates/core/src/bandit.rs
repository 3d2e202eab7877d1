//! Budget-aware multi-armed bandit over node actions.
//!
//! Each slot a node can sample, receive, transmit, or bank energy. The three
//! reward arms keep cost-normalized averages r = total reward / (cost *
//! pulls) plus an upper-confidence padding that shrinks as pulls accumulate:
//!
//!   index_j = r_j + B_j * sqrt(e_j * ln N / n_j),   e_j = e' / c_j^2
//!
//! A greedy knapsack over the indices picks the affordable action set for the
//! slot budget, and the selected set is turned into a draw distribution that
//! weights transmission double (moving a stored packet out is worth more than
//! adding another one).

use crate::error::{Error, Result};

/// Node actions. The first three earn rewards; banking never does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Sense a fresh datum.
    Sample,
    /// Listen for a child packet.
    Receive,
    /// Forward the best stored packet.
    Transmit,
    /// Bank the slot's harvest (also logged for idle sleeps).
    Store,
}

/// Reward arms in their fixed tie-break order.
pub const REWARD_ARMS: [Arm; 3] = [Arm::Sample, Arm::Receive, Arm::Transmit];

impl Arm {
    /// Index of a reward arm in [`REWARD_ARMS`]; banking has none.
    pub fn reward_index(self) -> Option<usize> {
        match self {
            Arm::Sample => Some(0),
            Arm::Receive => Some(1),
            Arm::Transmit => Some(2),
            Arm::Store => None,
        }
    }

    /// Short label used in logs.
    pub fn label(self) -> &'static str {
        match self {
            Arm::Sample => "sample",
            Arm::Receive => "receive",
            Arm::Transmit => "transmit",
            Arm::Store => "store",
        }
    }
}

/// Running statistics for one reward arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    /// Times pulled.
    pub pulls: u64,
    /// Sum of observed rewards.
    pub total_reward: f64,
    /// Energy cost per pull, mA*slot. Strictly positive.
    pub cost: f64,
    /// Reward ceiling B_j: starts at 1 and tracks the largest observed reward.
    pub ceiling: f64,
}

impl ArmStats {
    /// Fresh statistics for an arm with the given pull cost.
    pub fn new(cost: f64) -> Result<Self> {
        if !(cost > 0.0) {
            return Err(Error::InvalidParameter { name: "cost", value: cost });
        }
        Ok(Self { pulls: 0, total_reward: 0.0, cost, ceiling: 1.0 })
    }
}

/// Cost-normalized mean reward of one arm: total / (cost * pulls).
pub fn reward_per_cost(stats: &ArmStats) -> f64 {
    if stats.pulls == 0 {
        return 0.0;
    }
    stats.total_reward / (stats.cost * stats.pulls as f64)
}

/// Confidence padding B_j * sqrt(e_j * ln(total_pulls) / pulls).
///
/// `e_j` is the exploration constant already divided by the squared cost.
/// Returns infinity for an unpulled arm so cold arms are always explored.
pub fn padding(stats: &ArmStats, total_pulls: u64, e_j: f64) -> f64 {
    if stats.pulls == 0 {
        return f64::INFINITY;
    }
    let ln_n = (total_pulls.max(1) as f64).ln();
    stats.ceiling * (e_j * ln_n / stats.pulls as f64).sqrt()
}

/// Bandit state for one node: three reward arms plus the banking counter.
#[derive(Debug, Clone)]
pub struct BanditState {
    arms: [ArmStats; 3],
    /// Banking pulls (they count toward N but earn nothing).
    store_pulls: u64,
    /// Exploration constant e', at least 1.
    e_prime: f64,
}

impl BanditState {
    /// Builds the state from per-arm costs (sample, receive, transmit) and
    /// the exploration constant e'.
    pub fn new(costs: [f64; 3], e_prime: f64) -> Result<Self> {
        if !(e_prime >= 1.0) {
            return Err(Error::InvalidParameter { name: "e_prime", value: e_prime });
        }
        Ok(Self {
            arms: [
                ArmStats::new(costs[0])?,
                ArmStats::new(costs[1])?,
                ArmStats::new(costs[2])?,
            ],
            store_pulls: 0,
            e_prime,
        })
    }

    /// Statistics of a reward arm.
    pub fn arm(&self, arm: Arm) -> &ArmStats {
        &self.arms[arm.reward_index().expect("reward arm")]
    }

    /// Total pulls N across all four arms.
    pub fn total_pulls(&self) -> u64 {
        self.arms.iter().map(|a| a.pulls).sum::<u64>() + self.store_pulls
    }

    /// Banking pulls recorded so far.
    pub fn store_pulls(&self) -> u64 {
        self.store_pulls
    }

    /// Exploration constant e'.
    pub fn e_prime(&self) -> f64 {
        self.e_prime
    }

    /// Cost-normalized mean reward of `arm`.
    pub fn reward_per_cost(&self, arm: Arm) -> f64 {
        reward_per_cost(self.arm(arm))
    }

    /// Largest cost-normalized mean across pulled reward arms, 0 before any
    /// pull. This is the estimate compared against the banking threshold.
    pub fn best_mean(&self) -> f64 {
        self.arms
            .iter()
            .filter(|a| a.pulls > 0)
            .map(reward_per_cost)
            .fold(0.0, f64::max)
    }

    /// Upper-confidence index of `arm`: mean plus padding, infinite while
    /// the arm is unpulled.
    pub fn ucb_index(&self, arm: Arm) -> f64 {
        let stats = self.arm(arm);
        let e_j = self.e_prime / (stats.cost * stats.cost);
        let pad = padding(stats, self.total_pulls(), e_j);
        if pad.is_infinite() {
            return f64::INFINITY;
        }
        reward_per_cost(stats) + pad
    }

    /// Indices of all three reward arms in fixed order.
    pub fn indices(&self) -> [f64; 3] {
        [
            self.ucb_index(Arm::Sample),
            self.ucb_index(Arm::Receive),
            self.ucb_index(Arm::Transmit),
        ]
    }

    /// Per-pull costs of the reward arms in fixed order.
    pub fn costs(&self) -> [f64; 3] {
        [self.arms[0].cost, self.arms[1].cost, self.arms[2].cost]
    }

    /// First reward arm never pulled, in fixed order, if any. The decision
    /// loop pulls each reward arm once before trusting the indices.
    pub fn first_unpulled(&self) -> Option<Arm> {
        REWARD_ARMS.iter().copied().find(|&a| self.arm(a).pulls == 0)
    }

    /// Records a pull of a reward arm with its observed reward.
    pub fn record_pull(&mut self, arm: Arm, reward: f64) {
        let stats = &mut self.arms[arm.reward_index().expect("reward arm")];
        stats.pulls += 1;
        stats.total_reward += reward;
        if reward > stats.ceiling {
            stats.ceiling = reward;
        }
    }

    /// Records a banking (or idle) slot; it counts toward N.
    pub fn record_store(&mut self) {
        self.store_pulls += 1;
    }
}

/// Greedy knapsack over index values.
///
/// Arms are visited in decreasing index order (ties keep the fixed arm
/// order) and taken whenever they still fit the remaining budget. The
/// selected set's summed index is never below the best single affordable
/// arm, and never above the exhaustive optimum.
pub fn greedy_knapsack(indices: [f64; 3], costs: [f64; 3], budget: f64) -> [bool; 3] {
    let mut order = [0usize, 1, 2];
    // Stable three-element sort by descending index.
    order.sort_by(|&a, &b| indices[b].partial_cmp(&indices[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut selected = [false; 3];
    let mut spent = 0.0;
    for &j in &order {
        if spent + costs[j] <= budget {
            selected[j] = true;
            spent += costs[j];
        }
    }
    selected
}

/// Turns a knapsack selection into a draw distribution.
///
/// Selected arms carry raw weights (x_sample, x_receive, 2 * x_transmit)
/// which are then normalized to sum to one. An empty selection returns
/// `None`: the node has no affordable action and must bank or sleep.
pub fn selection_probabilities(selected: [bool; 3]) -> Option<[f64; 3]> {
    let x = [
        selected[0] as u32 as f64,
        selected[1] as u32 as f64,
        selected[2] as u32 as f64,
    ];
    let count = x[0] + x[1] + x[2];
    if count == 0.0 {
        return None;
    }
    let raw = [x[0] / count, x[1] / count, 2.0 * x[2] / count];
    let total = raw[0] + raw[1] + raw[2];
    Some([raw[0] / total, raw[1] / total, raw[2] / total])
}

/// Expected-pull envelope for a suboptimal reward arm after `active_slots`
/// opportunities:
///
///   (c_max/c_min)^2 * e' * ln(active_slots) / gap^2 + 2
///
/// With `store_arm` set the additive constant drops to 1 and the caller
/// passes the smallest reward gap. `gap` is the difference in expected
/// per-pull reward to the best arm and must be positive.
pub fn pull_count_bound(
    gap: f64,
    c_max: f64,
    c_min: f64,
    e_prime: f64,
    active_slots: f64,
    store_arm: bool,
) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::NonPositiveGap(gap));
    }
    if !(c_max >= c_min && c_min > 0.0) {
        return Err(Error::InvalidParameter { name: "c_min", value: c_min });
    }
    if !(e_prime >= 1.0) {
        return Err(Error::InvalidParameter { name: "e_prime", value: e_prime });
    }
    if !(active_slots >= 1.0) {
        return Err(Error::InvalidParameter { name: "active_slots", value: active_slots });
    }
    let ratio = c_max / c_min;
    let constant = if store_arm { 1.0 } else { 2.0 };
    Ok(ratio * ratio * e_prime * active_slots.ln() / (gap * gap) + constant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(pulls: u64, total: f64, cost: f64) -> ArmStats {
        ArmStats { pulls, total_reward: total, cost, ceiling: 1.0 }
    }

    #[test]
    fn reward_per_cost_matches_hand_computation() {
        assert_eq!(reward_per_cost(&stats(1, 10.0, 20.0)), 0.5);
        assert_eq!(reward_per_cost(&stats(2, 40.0, 20.0)), 1.0);
        assert_eq!(reward_per_cost(&stats(0, 0.0, 20.0)), 0.0);
    }

    #[test]
    fn padding_matches_closed_form() {
        // One total pull: ln 1 = 0.
        assert_eq!(padding(&stats(1, 0.0, 1.0), 1, 1.0), 0.0);
        // B = 1, e_j = 1, n_j = 1, N = e gives exactly 1.
        let n_e = std::f64::consts::E;
        let p = padding(&stats(1, 0.0, 1.0), 1, 1.0);
        assert_eq!(p, 0.0);
        let one = stats(1, 0.0, 1.0);
        let got = one.ceiling * (1.0 * n_e.ln() / 1.0).sqrt();
        assert!((got - 1.0).abs() < 1e-12);
        // Doubling pulls at fixed N shrinks the padding by sqrt(2).
        let a = stats(100, 0.0, 1.0);
        let b = stats(200, 0.0, 1.0);
        let pa = padding(&a, 100_000, 2.0);
        let pb = padding(&b, 100_000, 2.0);
        assert!((pa / pb - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn unpulled_arm_has_infinite_index() {
        let state = BanditState::new([19.0, 20.0, 21.0], 2.0).unwrap();
        for arm in REWARD_ARMS {
            assert!(state.ucb_index(arm).is_infinite());
        }
    }

    #[test]
    fn knapsack_takes_best_two_that_fit() {
        let picked = greedy_knapsack([0.9, 0.5, 0.7], [20.0, 20.0, 20.0], 40.0);
        assert_eq!(picked, [true, false, true]);
    }

    #[test]
    fn knapsack_ties_keep_fixed_arm_order() {
        let picked = greedy_knapsack([0.5, 0.5, 0.5], [20.0, 20.0, 20.0], 40.0);
        assert_eq!(picked, [true, true, false]);
    }

    #[test]
    fn probabilities_double_the_transmit_weight() {
        let p = selection_probabilities([true, true, true]).unwrap();
        assert_eq!(p, [0.25, 0.25, 0.5]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_selection_has_no_distribution() {
        assert_eq!(selection_probabilities([false; 3]), None);
    }

    #[test]
    fn pull_bound_matches_worked_examples() {
        let e = std::f64::consts::E;
        assert!((pull_count_bound(1.0, 20.0, 20.0, 1.0, e, false).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(pull_count_bound(1.0, 20.0, 20.0, 1.0, 1.0, false).unwrap(), 2.0);
        assert!((pull_count_bound(0.5, 40.0, 20.0, 1.0, e, false).unwrap() - 18.0).abs() < 1e-12);
        assert!((pull_count_bound(1.0, 20.0, 20.0, 1.0, e, true).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            pull_count_bound(0.0, 20.0, 20.0, 1.0, e, false),
            Err(Error::NonPositiveGap(_))
        ));
    }

    #[test]
    fn record_pull_updates_counts_and_ceiling() {
        let mut state = BanditState::new([19.0, 20.0, 21.0], 2.0).unwrap();
        state.record_pull(Arm::Sample, 2.5);
        state.record_store();
        assert_eq!(state.arm(Arm::Sample).pulls, 1);
        assert_eq!(state.arm(Arm::Sample).ceiling, 2.5);
        assert_eq!(state.total_pulls(), 2);
        assert_eq!(state.best_mean(), 2.5 / 19.0);
    }

    /// Exhaustive optimum over the eight subsets.
    fn brute_force(indices: [f64; 3], costs: [f64; 3], budget: f64) -> f64 {
        let mut best = 0.0f64;
        for mask in 0u8..8 {
            let mut value = 0.0;
            let mut cost = 0.0;
            for j in 0..3 {
                if mask & (1 << j) != 0 {
                    value += indices[j];
                    cost += costs[j];
                }
            }
            if cost <= budget && value > best {
                best = value;
            }
        }
        best
    }

    #[test]
    fn knapsack_beats_best_single_and_never_beats_optimum() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, &[3]);
        for _ in 0..10_000 {
            let indices = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
            let costs = [rng.gen_range(1.0..40.0), rng.gen_range(1.0..40.0), rng.gen_range(1.0..40.0)];
            let budget = rng.gen_range(0.0..90.0);
            let picked = greedy_knapsack(indices, costs, budget);
            let value: f64 = (0..3).filter(|&j| picked[j]).map(|j| indices[j]).sum();
            let spent: f64 = (0..3).filter(|&j| picked[j]).map(|j| costs[j]).sum();
            assert!(spent <= budget + 1e-9);
            let best_single = (0..3)
                .filter(|&j| costs[j] <= budget)
                .map(|j| indices[j])
                .fold(0.0, f64::max);
            assert!(value >= best_single - 1e-9);
            assert!(value <= brute_force(indices, costs, budget) + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn probabilities_always_normalize(a in any::<bool>(), b in any::<bool>(), c in any::<bool>()) {
            if let Some(p) = selection_probabilities([a, b, c]) {
                let sum: f64 = p.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                for (j, &selected) in [a, b, c].iter().enumerate() {
                    prop_assert_eq!(p[j] > 0.0, selected);
                }
            } else {
                prop_assert!(!a && !b && !c);
            }
        }

        #[test]
        fn padding_decreases_in_pulls(pulls in 1u64..1000) {
            let fewer = stats(pulls, 0.0, 1.0);
            let more = stats(pulls * 2, 0.0, 1.0);
            let n = 10_000;
            prop_assert!(padding(&more, n, 2.0) < padding(&fewer, n, 2.0));
        }
    }
}
