//! Per-slot harvest and data-value streams.
//!
//! Both stream kinds precompute their full horizon at construction from a
//! seed, so lookups are pure, random access, and bit-identical on replay.
//! Harvest samples carry the solar-availability flag: power at or above the
//! usability threshold counts as available (the boundary is inclusive).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, stream};

/// One slot of harvest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestSample {
    /// Harvested power this slot, mA.
    pub power: f64,
    /// True when power meets the usability threshold.
    pub solar: bool,
}

/// Finite per-slot harvest stream with a usability threshold.
#[derive(Debug, Clone)]
pub struct HarvestProcess {
    powers: Vec<f64>,
    threshold: f64,
}

/// Markov chain description for synthetic harvest.
#[derive(Debug, Clone)]
pub struct MarkovHarvest {
    /// Power emitted in each chain state, mA.
    pub state_powers: Vec<f64>,
    /// Row-stochastic transition matrix.
    pub transitions: Vec<Vec<f64>>,
    /// Index of the initial state.
    pub start: usize,
}

impl HarvestProcess {
    /// Wraps an explicit per-slot power sequence.
    pub fn from_powers(powers: Vec<f64>, threshold: f64) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::EmptyWindow);
        }
        for (i, &p) in powers.iter().enumerate() {
            if p < 0.0 {
                return Err(Error::NegativeWeight { index: i, value: p });
            }
        }
        if threshold < 0.0 {
            return Err(Error::InvalidParameter { name: "threshold", value: threshold });
        }
        Ok(Self { powers, threshold })
    }

    /// Spreads a fixed energy budget uniformly over the listed slot phases.
    ///
    /// Phases are inclusive slot ranges; they must be disjoint and inside the
    /// horizon. Every phase slot emits total/(phase slot count) mA, all other
    /// slots emit zero, so the emitted energy sums to `total_energy` exactly
    /// up to round-off.
    pub fn phase_schedule(
        total_energy: f64,
        phases: &[(usize, usize)],
        horizon: usize,
        threshold: f64,
    ) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidPhases("no phases given".into()));
        }
        if !(total_energy > 0.0) {
            return Err(Error::InvalidParameter { name: "total_energy", value: total_energy });
        }
        let mut covered = vec![false; horizon];
        let mut slot_count = 0usize;
        for &(start, end) in phases {
            if start > end || end >= horizon {
                return Err(Error::InvalidPhases(format!(
                    "phase {start}..={end} outside horizon {horizon}"
                )));
            }
            for (offset, flag) in covered[start..=end].iter_mut().enumerate() {
                if *flag {
                    return Err(Error::InvalidPhases(format!(
                        "slot {} covered twice",
                        start + offset
                    )));
                }
                *flag = true;
                slot_count += 1;
            }
        }
        let per_slot = total_energy / slot_count as f64;
        let powers = covered
            .iter()
            .map(|&c| if c { per_slot } else { 0.0 })
            .collect();
        Self::from_powers(powers, threshold)
    }

    /// Walks a Markov chain once per slot and records the emitted powers.
    pub fn markov(chain: &MarkovHarvest, horizon: usize, threshold: f64, seed: u64) -> Result<Self> {
        let n = chain.state_powers.len();
        if n == 0 || horizon == 0 {
            return Err(Error::EmptyWindow);
        }
        if chain.transitions.len() != n {
            return Err(Error::LengthMismatch(chain.transitions.len(), n));
        }
        if chain.start >= n {
            return Err(Error::InvalidParameter { name: "start", value: chain.start as f64 });
        }
        for (row, probs) in chain.transitions.iter().enumerate() {
            if probs.len() != n {
                return Err(Error::LengthMismatch(probs.len(), n));
            }
            if let Some((index, &value)) = probs.iter().enumerate().find(|(_, &p)| p < 0.0) {
                return Err(Error::NegativeWeight { index: row * n + index, value });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedTransitions { row, sum });
            }
        }
        let mut rng = stream_rng(seed, &[stream::HARVEST]);
        let mut state = chain.start;
        let mut powers = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            powers.push(chain.state_powers[state]);
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = n - 1;
            for (j, &p) in chain.transitions[state].iter().enumerate() {
                acc += p;
                if draw < acc {
                    next = j;
                    break;
                }
            }
            state = next;
        }
        Self::from_powers(powers, threshold)
    }

    /// Harvest at `slot`, with the availability flag.
    pub fn sample(&self, slot: usize) -> Result<HarvestSample> {
        let &power = self
            .powers
            .get(slot)
            .ok_or(Error::SlotOutOfRange { slot, len: self.powers.len() })?;
        Ok(HarvestSample { power, solar: power >= self.threshold })
    }

    /// Number of slots in the stream.
    pub fn horizon(&self) -> usize {
        self.powers.len()
    }

    /// Usability threshold, mA.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Total energy over the horizon, mA*slot.
    pub fn total_energy(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Finite per-slot data-value stream.
#[derive(Debug, Clone)]
pub struct VoiSource {
    values: Vec<f64>,
}

impl VoiSource {
    /// Gaussian values clamped at zero: negative information makes no sense,
    /// so draws below zero are floored.
    pub fn gaussian(mean: f64, variance: f64, horizon: usize, seed: u64) -> Result<Self> {
        if variance < 0.0 {
            return Err(Error::InvalidParameter { name: "variance", value: variance });
        }
        if horizon == 0 {
            return Err(Error::EmptyWindow);
        }
        let mut rng = stream_rng(seed, &[stream::VOI]);
        let values = if variance == 0.0 {
            vec![mean.max(0.0); horizon]
        } else {
            let normal = Normal::new(mean, variance.sqrt())
                .map_err(|_| Error::InvalidParameter { name: "variance", value: variance })?;
            (0..horizon).map(|_| normal.sample(&mut rng).max(0.0)).collect()
        };
        Ok(Self { values })
    }

    /// Wraps precomputed per-slot values (for trace-driven runs).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NegativeWeight { index, value });
        }
        Ok(Self { values })
    }

    /// Data value at `slot`.
    pub fn value_at(&self, slot: usize) -> Result<f64> {
        self.values
            .get(slot)
            .copied()
            .ok_or(Error::SlotOutOfRange { slot, len: self.values.len() })
    }

    /// Number of slots in the stream.
    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_schedule_conserves_energy() {
        // 1 mAh at 60 s slots is 60 mA*slot, spread over slots 0..=10.
        let h = HarvestProcess::phase_schedule(60.0, &[(0, 10)], 200, 20.0).unwrap();
        let per_slot = h.sample(0).unwrap().power;
        for slot in 0..=10 {
            assert_eq!(h.sample(slot).unwrap().power, per_slot);
        }
        assert_eq!(h.sample(11).unwrap().power, 0.0);
        assert!((h.total_energy() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn two_phases_split_energy_in_half() {
        let h = HarvestProcess::phase_schedule(60.0, &[(0, 9), (100, 109)], 200, 20.0).unwrap();
        let first: f64 = (0..10).map(|s| h.sample(s).unwrap().power).sum();
        let second: f64 = (100..110).map(|s| h.sample(s).unwrap().power).sum();
        assert!((first - 30.0).abs() < 1e-9);
        assert!((second - 30.0).abs() < 1e-9);
        assert!((h.total_energy() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn overlapping_phases_are_rejected() {
        assert!(matches!(
            HarvestProcess::phase_schedule(60.0, &[(0, 5), (5, 9)], 20, 20.0),
            Err(Error::InvalidPhases(_))
        ));
        assert!(matches!(
            HarvestProcess::phase_schedule(60.0, &[(0, 25)], 20, 20.0),
            Err(Error::InvalidPhases(_))
        ));
    }

    #[test]
    fn solar_flag_is_inclusive_at_threshold() {
        let h = HarvestProcess::from_powers(vec![19.9, 20.0, 20.1], 20.0).unwrap();
        assert!(!h.sample(0).unwrap().solar);
        assert!(h.sample(1).unwrap().solar);
        assert!(h.sample(2).unwrap().solar);
    }

    #[test]
    fn slot_past_horizon_is_an_error() {
        let h = HarvestProcess::from_powers(vec![1.0, 2.0], 1.0).unwrap();
        assert!(matches!(
            h.sample(2),
            Err(Error::SlotOutOfRange { slot: 2, len: 2 })
        ));
    }

    #[test]
    fn degenerate_markov_chain_emits_constant_stream() {
        let chain = MarkovHarvest {
            state_powers: vec![25.0, 5.0],
            transitions: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            start: 0,
        };
        let h = HarvestProcess::markov(&chain, 100, 20.0, 9).unwrap();
        for slot in 0..100 {
            let s = h.sample(slot).unwrap();
            assert_eq!(s.power, 25.0);
            assert!(s.solar);
        }
    }

    #[test]
    fn malformed_transition_rows_are_rejected() {
        let chain = MarkovHarvest {
            state_powers: vec![25.0, 5.0],
            transitions: vec![vec![0.9, 0.2], vec![0.5, 0.5]],
            start: 0,
        };
        assert!(matches!(
            HarvestProcess::markov(&chain, 10, 20.0, 9),
            Err(Error::MalformedTransitions { row: 0, .. })
        ));
    }

    #[test]
    fn markov_state_frequencies_match_stationary_distribution() {
        // Ergodic 3-state chain; oracle stationary distribution by power
        // iteration on the transition matrix.
        let t = vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.2, 0.7],
        ];
        let mut pi = vec![1.0 / 3.0; 3];
        for _ in 0..500 {
            let mut next = vec![0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[j] += pi[i] * t[i][j];
                }
            }
            pi = next;
        }
        let chain = MarkovHarvest {
            state_powers: vec![0.0, 10.0, 30.0],
            transitions: t,
            start: 0,
        };
        let horizon = 100_000;
        let h = HarvestProcess::markov(&chain, horizon, 20.0, 1234).unwrap();
        let mut freq = [0.0f64; 3];
        for slot in 0..horizon {
            let p = h.sample(slot).unwrap().power;
            let state = chain.state_powers.iter().position(|&sp| sp == p).unwrap();
            freq[state] += 1.0;
        }
        let mut tv = 0.0;
        for s in 0..3 {
            tv += (freq[s] / horizon as f64 - pi[s]).abs();
        }
        assert!(tv / 2.0 <= 0.02, "total variation {tv} too large");
    }

    #[test]
    fn markov_stream_replays_identically() {
        let chain = MarkovHarvest {
            state_powers: vec![0.0, 25.0],
            transitions: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            start: 0,
        };
        let a = HarvestProcess::markov(&chain, 500, 20.0, 77).unwrap();
        let b = HarvestProcess::markov(&chain, 500, 20.0, 77).unwrap();
        for slot in 0..500 {
            assert_eq!(a.sample(slot).unwrap(), b.sample(slot).unwrap());
        }
    }

    #[test]
    fn gaussian_values_are_clamped_and_replayable() {
        let v = VoiSource::gaussian(1.0, 0.5, 100_000, 5).unwrap();
        let w = VoiSource::gaussian(1.0, 0.5, 100_000, 5).unwrap();
        let mut sum = 0.0;
        for slot in 0..v.horizon() {
            let x = v.value_at(slot).unwrap();
            assert!(x >= 0.0);
            assert_eq!(x, w.value_at(slot).unwrap());
            sum += x;
        }
        // Clamping a N(1, 0.5) at zero lifts the mean slightly above 1.
        let mean = sum / v.horizon() as f64;
        assert!(
            (0.99..=1.03).contains(&mean),
            "clamped mean {mean} outside expected band"
        );
    }
}
