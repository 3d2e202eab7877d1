//! Discrete distributions and the divergence used as the value measure.
//!
//! The worth of a window of sensor readings is scored as the KL divergence
//! (in nats) between the empirical histogram of the window and a reference
//! histogram: data that looks like what the sink already believes carries
//! little value, surprising data carries a lot.

use crate::error::{Error, Result};

/// Tolerance on probability normalization.
const NORM_TOL: f64 = 1e-9;

/// A finite probability distribution over indexed outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution, rejecting negative weights and vectors that do
    /// not sum to 1 within 1e-9.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyWindow);
        }
        for (index, &value) in weights.iter().enumerate() {
            if value < 0.0 {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self { weights })
    }

    /// Probability weights in outcome order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of outcomes in the support.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when the support is empty (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// KL divergence D(p || q) in nats.
///
/// Zero-probability outcomes of `p` contribute nothing. Outcomes where `q`
/// is zero while `p` is not make the divergence undefined and are reported
/// as an error rather than infinity.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let mut sum = 0.0;
    for (index, (&pi, &qi)) in p.weights.iter().zip(q.weights.iter()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::DivergenceUndefined {
                index,
                p_value: pi,
            });
        }
        sum += pi * (pi / qi).ln();
    }
    // Gibbs' inequality guarantees a nonnegative value; round-off can leave
    // a tiny negative residue for near-identical inputs.
    Ok(sum.max(0.0))
}

/// Scores an observation window against a reference window.
///
/// Both windows are histogrammed with `bins` equal-width bins spanning the
/// joint min..max range, smoothed by adding 1/(window length) to each bin
/// before normalizing, and compared with [`kl_divergence`]. A joint range of
/// zero width (all samples identical) scores 0 by convention.
pub fn voi_from_window(observed: &[f64], reference: &[f64], bins: usize) -> Result<f64> {
    if observed.is_empty() || reference.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if bins < 2 {
        return Err(Error::BinCount(bins));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in observed.iter().chain(reference.iter()) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if hi == lo {
        return Ok(0.0);
    }
    let p = smoothed_histogram(observed, lo, hi, bins)?;
    let q = smoothed_histogram(reference, lo, hi, bins)?;
    kl_divergence(&p, &q)
}

/// Equal-width histogram with additive smoothing of 1/len per bin.
fn smoothed_histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<DiscreteDistribution> {
    let eps = 1.0 / samples.len() as f64;
    let mut counts = vec![eps; bins];
    let width = hi - lo;
    for &x in samples {
        let mut bin = ((x - lo) / width * bins as f64) as usize;
        if bin >= bins {
            bin = bins - 1;
        }
        counts[bin] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    DiscreteDistribution::from_weights(counts.iter().map(|c| c / total).collect())
}
