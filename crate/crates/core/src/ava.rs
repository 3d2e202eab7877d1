//! Adaptive threshold controller.
//!
//! The node banks energy whenever the best cost-normalized reward estimate
//! falls below a threshold R_th. This module keeps that threshold on track:
//! it models next-slot consumption as a linear function of the current
//! consumption, threshold, and harvest,
//!
//!   c(t+1) = (a+g) * c(t) + b * R_th(t) - g * e_h(t) + noise,
//!
//! identifies the coefficient vector theta = (a+g, b, g) online with a
//! normalized gradient step, and closes the loop with the control law that
//! steers consumption toward the harvested supply. Raising the threshold
//! makes the node bank more and spend less, which is why the b coefficient
//! is negative; the estimate is projected to keep that sign.

use crate::error::{Error, Result};

/// Default initial estimate (a+g, b, g). The b slot starts at -1 so the
/// control law is defined before any data arrives.
pub const THETA_DEFAULT: [f64; 3] = [0.5, -1.0, 0.0];

/// Default gradient step size.
pub const DEFAULT_STEP_SIZE: f64 = 0.1;

/// Ceiling for the b estimate: values above it are clamped back so the
/// control law's divisor keeps its sign.
pub const B_CEILING: f64 = -1e-6;

/// Threshold that steers predicted consumption toward the harvest rate:
///
///   R_th = [e_h - (a+b) * c + g * e_h] / b
///
/// clamped below at zero, since the threshold is compared against
/// non-negative value-of-information estimates. `b` must be nonzero.
pub fn control_law(a: f64, b: f64, g: f64, e_h: f64, c: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::DegenerateController);
    }
    let raw = (e_h - (a + b) * c + g * e_h) / b;
    Ok(raw.max(0.0))
}

/// One normalized gradient step toward explaining `observed` as `phi . theta`:
///
///   theta' = theta + mu * phi * (observed - phi . theta) / (phi . phi)
///
/// A zero feature vector leaves the estimate unchanged. No sign projection
/// happens here; [`ControllerState::step`] applies it after updating.
pub fn gradient_update(theta: [f64; 3], phi: [f64; 3], observed: f64, mu: f64) -> [f64; 3] {
    let norm_sq: f64 = phi.iter().map(|x| x * x).sum();
    if norm_sq == 0.0 {
        return theta;
    }
    let predicted: f64 = phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum();
    let scale = mu * (observed - predicted) / norm_sq;
    [
        theta[0] + scale * phi[0],
        theta[1] + scale * phi[1],
        theta[2] + scale * phi[2],
    ]
}

/// Online state of the threshold controller.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Current estimate of (a+g, b, g).
    theta_hat: [f64; 3],
    /// Feature vector of the previous slot: (c, R_th, -e_h).
    phi: [f64; 3],
    /// Gradient step size mu.
    step_size: f64,
    /// Threshold currently in force.
    threshold: f64,
    /// Whether the first slot has been observed.
    primed: bool,
    /// Running sum of squared (available - consumed) deviations.
    deviation_available: f64,
    /// Running sum of squared (harvest - consumed) deviations.
    deviation_harvest: f64,
    /// Slots observed.
    slots: u64,
}

impl ControllerState {
    /// Fresh controller with the default initial estimate.
    pub fn new(step_size: f64) -> Result<Self> {
        if !(step_size > 0.0) {
            return Err(Error::InvalidParameter { name: "step_size", value: step_size });
        }
        Ok(Self {
            theta_hat: THETA_DEFAULT,
            phi: [0.0; 3],
            step_size,
            threshold: 0.0,
            primed: false,
            deviation_available: 0.0,
            deviation_harvest: 0.0,
            slots: 0,
        })
    }

    /// Resumes a controller mid-stream; used by tests pinning fixed points.
    pub fn from_parts(theta_hat: [f64; 3], phi: [f64; 3], step_size: f64, threshold: f64) -> Result<Self> {
        let mut state = Self::new(step_size)?;
        state.theta_hat = theta_hat;
        state.phi = phi;
        state.threshold = threshold;
        state.primed = true;
        Ok(state)
    }

    /// Current coefficient estimate.
    pub fn theta_hat(&self) -> [f64; 3] {
        self.theta_hat
    }

    /// Feature vector from the most recent slot.
    pub fn phi(&self) -> [f64; 3] {
        self.phi
    }

    /// Threshold currently in force.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Mean squared tracking deviations so far, as
    /// (mean of (available - consumed)^2, mean of (harvest - consumed)^2).
    pub fn tracking_metric(&self) -> (f64, f64) {
        if self.slots == 0 {
            return (0.0, 0.0);
        }
        let n = self.slots as f64;
        (self.deviation_available / n, self.deviation_harvest / n)
    }

    /// Closes one slot: folds the realized consumption into the estimate,
    /// refreshes the feature vector, and returns the next slot's threshold.
    ///
    /// `e_h` is the slot's harvest, `consumed` its realized energy cost, and
    /// `available` the energy that was on budget (used only for the tracking
    /// report). The first call primes the features as (0, 0, -e_h) and skips
    /// the gradient step because no prediction existed yet.
    pub fn step(&mut self, e_h: f64, consumed: f64, available: f64) -> Result<f64> {
        self.deviation_available += (available - consumed) * (available - consumed);
        self.deviation_harvest += (e_h - consumed) * (e_h - consumed);
        self.slots += 1;

        let (phi_c, phi_threshold);
        if self.primed {
            self.theta_hat = gradient_update(self.theta_hat, self.phi, consumed, self.step_size);
            if self.theta_hat[1] > B_CEILING {
                self.theta_hat[1] = B_CEILING;
            }
            phi_c = consumed;
            phi_threshold = self.threshold;
        } else {
            // First slot: by convention the features carry zero consumption
            // and a zero threshold alongside the observed harvest.
            self.primed = true;
            phi_c = 0.0;
            phi_threshold = 0.0;
        }
        self.phi = [phi_c, phi_threshold, -e_h];

        let a = self.theta_hat[0] - self.theta_hat[2];
        let b = self.theta_hat[1];
        let g = self.theta_hat[2];
        self.threshold = control_law(a, b, g, e_h, phi_c)?;
        Ok(self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn control_law_matches_hand_arithmetic() {
        assert_eq!(control_law(3.0, -1.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        // [10 - 0*10]/-1 = -10, clamped.
        assert_eq!(control_law(1.0, -1.0, 0.0, 10.0, 10.0).unwrap(), 0.0);
        // [10 - 0*25 + 10]/-1 = -20, clamped.
        assert_eq!(control_law(1.0, -1.0, 1.0, 10.0, 25.0).unwrap(), 0.0);
        // [10 - 1*5 + 10]/-1 = -15, clamped.
        assert_eq!(control_law(2.0, -1.0, 1.0, 10.0, 5.0).unwrap(), 0.0);
        // [10 - 1*15]/-1 = 5.
        assert_eq!(control_law(2.0, -1.0, 0.0, 10.0, 15.0).unwrap(), 5.0);
        assert!(matches!(control_law(1.0, 0.0, 0.0, 1.0, 1.0), Err(Error::DegenerateController)));
    }

    #[test]
    fn gradient_update_matches_hand_arithmetic() {
        let theta = [0.2, -0.7, 0.1];
        // Zero step size is the identity.
        assert_eq!(gradient_update(theta, [1.0, 2.0, 3.0], 5.0, 0.0), theta);
        // Zero features are the identity.
        assert_eq!(gradient_update(theta, [0.0; 3], 5.0, 0.5), theta);
        // Zero innovation is the identity: observed equals the prediction.
        let phi = [1.0, 1.0, -1.0];
        let predicted = 0.2 - 0.7 - 0.1;
        assert_eq!(gradient_update(theta, phi, predicted, 0.5), theta);
        // From zero: 0.3 * (1,1,-1) * (3 - 0) / 3 = (0.3, 0.3, -0.3).
        let updated = gradient_update([0.0; 3], phi, 3.0, 0.3);
        assert!((updated[0] - 0.3).abs() < 1e-12);
        assert!((updated[1] - 0.3).abs() < 1e-12);
        assert!((updated[2] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn update_magnitude_respects_normalized_bound() {
        let mut rng = crate::rng::stream_rng(21, &[1]);
        for _ in 0..2000 {
            let theta = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let phi = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let observed: f64 = rng.gen_range(-5.0..5.0);
            let mu = rng.gen_range(0.01..1.0);
            let norm: f64 = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-9 {
                continue;
            }
            let predicted: f64 = phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum();
            let updated = gradient_update(theta, phi, observed, mu);
            let moved: f64 = updated
                .iter()
                .zip(theta.iter())
                .map(|(u, t)| (u - t) * (u - t))
                .sum::<f64>()
                .sqrt();
            let bound = mu * (observed - predicted).abs() / norm;
            assert!(moved <= bound + 1e-9, "moved {moved} > bound {bound}");
        }
    }

    #[test]
    fn first_step_primes_features_and_clamps_threshold() {
        let mut state = ControllerState::new(0.1).unwrap();
        let threshold = state.step(20.0, 7.0, 30.0).unwrap();
        // Default estimate: a = 0.5, b = -1, g = 0; raw law gives -e_h.
        assert_eq!(threshold, 0.0);
        assert_eq!(state.theta_hat(), THETA_DEFAULT);
        assert_eq!(state.phi(), [0.0, 0.0, -20.0]);
        let (avail, harv) = state.tracking_metric();
        assert!((avail - 529.0).abs() < 1e-12);
        assert!((harv - 169.0).abs() < 1e-12);
    }

    #[test]
    fn exact_estimate_at_fixed_point_keeps_threshold_constant() {
        // System a = 0.8, b = -0.5, g = 0.3 with unit harvest settles at
        // consumption 5 and threshold 0.4; with the true coefficients in
        // hand every innovation is zero and nothing moves.
        let theta = [1.1, -0.5, 0.3];
        let mut state = ControllerState::from_parts(theta, [5.0, 0.4, -1.0], 0.1, 0.4).unwrap();
        for _ in 0..50 {
            let threshold = state.step(1.0, 5.0, 5.0).unwrap();
            assert!((threshold - 0.4).abs() < 1e-12);
            let got = state.theta_hat();
            for j in 0..3 {
                assert!((got[j] - theta[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn b_estimate_stays_below_ceiling() {
        let mut state = ControllerState::new(0.9).unwrap();
        let mut rng = crate::rng::stream_rng(22, &[2]);
        state.step(5.0, 0.0, 5.0).unwrap();
        for _ in 0..500 {
            // Adversarial positive consumption spikes push the b estimate up.
            let e_h = rng.gen_range(0.0..10.0);
            let consumed = rng.gen_range(0.0..50.0);
            state.step(e_h, consumed, e_h).unwrap();
            assert!(state.theta_hat()[1] <= B_CEILING);
        }
    }

    /// Draws exciting regressors and the model's response for one step.
    fn excite(rng: &mut impl Rng, theta: [f64; 3], sigma: f64) -> ([f64; 3], f64) {
        let phi = [
            rng.gen_range(0.0..10.0),
            rng.gen_range(0.0..5.0),
            -rng.gen_range(0.0..5.0),
        ];
        let mean: f64 = phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum();
        let observed = if sigma > 0.0 {
            mean + Normal::new(0.0, sigma).unwrap().sample(rng)
        } else {
            mean
        };
        (phi, observed)
    }

    #[test]
    fn noiseless_identification_drives_prediction_error_down() {
        let theta_true = [1.1, -0.5, 0.3];
        let mut theta = THETA_DEFAULT;
        let mut rng = crate::rng::stream_rng(23, &[3]);
        let mut last_error = f64::INFINITY;
        for _ in 0..10_000 {
            let (phi, observed) = excite(&mut rng, theta_true, 0.0);
            let predicted: f64 = phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum();
            last_error = (observed - predicted).abs();
            theta = gradient_update(theta, phi, observed, 0.1);
            if theta[1] > B_CEILING {
                theta[1] = B_CEILING;
            }
        }
        assert!(last_error < 1e-3, "prediction error {last_error}");
    }

    #[test]
    fn noisy_identification_shrinks_parameter_error() {
        let theta_true = [1.1, -0.5, 0.3];
        let mut theta = THETA_DEFAULT;
        let initial: f64 = theta
            .iter()
            .zip(theta_true.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let mut rng = crate::rng::stream_rng(24, &[4]);
        for _ in 0..10_000 {
            let (phi, observed) = excite(&mut rng, theta_true, 0.1);
            theta = gradient_update(theta, phi, observed, 0.1);
            if theta[1] > B_CEILING {
                theta[1] = B_CEILING;
            }
        }
        let final_error: f64 = theta
            .iter()
            .zip(theta_true.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(
            final_error < 0.2 * initial,
            "error {final_error} vs initial {initial}"
        );
    }
}
