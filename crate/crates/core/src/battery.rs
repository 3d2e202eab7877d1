//! Battery with lossy charging.
//!
//! Levels and capacity are in mA*slot: one unit sustains a 1 mA draw for one
//! slot. Charging pays the conversion loss up front, a harvested amount `h`
//! credits `efficiency * h`; anything past capacity is clamped and reported
//! as waste so callers can audit the energy ledger.

use crate::error::{Error, Result};

/// Rechargeable store for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    /// Current charge, mA*slot.
    level: f64,
    /// Maximum charge, mA*slot.
    capacity: f64,
    /// Charge conversion efficiency, in (0, 1].
    efficiency: f64,
}

/// Outcome of one store operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreReceipt {
    /// Energy credited to the battery after conversion loss, mA*slot.
    pub stored: f64,
    /// Energy lost to the capacity clamp, mA*slot.
    pub wasted: f64,
}

impl Battery {
    /// Builds a battery. Capacity must be positive, efficiency in (0, 1],
    /// and the initial level within [0, capacity].
    pub fn new(capacity: f64, efficiency: f64, initial: f64) -> Result<Self> {
        if !(capacity > 0.0) {
            return Err(Error::InvalidParameter { name: "capacity", value: capacity });
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::InvalidParameter { name: "efficiency", value: efficiency });
        }
        if !(0.0..=capacity).contains(&initial) {
            return Err(Error::InvalidParameter { name: "initial", value: initial });
        }
        Ok(Self { level: initial, capacity, efficiency })
    }

    /// Current charge, mA*slot.
    pub fn level(&self) -> f64 {
        self.level
    }

    /// Maximum charge, mA*slot.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Charge conversion efficiency.
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Banks a harvested amount, returning what was credited and what the
    /// capacity clamp discarded. Negative amounts are rejected.
    pub fn store(&mut self, harvested: f64) -> Result<StoreReceipt> {
        if harvested < 0.0 {
            return Err(Error::InvalidParameter { name: "harvested", value: harvested });
        }
        let credit = self.efficiency * harvested;
        let headroom = self.capacity - self.level;
        let stored = credit.min(headroom);
        let wasted = credit - stored;
        self.level += stored;
        Ok(StoreReceipt { stored, wasted })
    }

    /// Draws `amount` from the charge. Callers check affordability first;
    /// a draw below the level only by round-off is clamped to empty.
    pub fn draw(&mut self, amount: f64) -> Result<()> {
        if amount < 0.0 {
            return Err(Error::InvalidParameter { name: "draw", value: amount });
        }
        if amount > self.level + 1e-9 {
            return Err(Error::InvalidParameter { name: "draw", value: amount });
        }
        self.level = (self.level - amount).max(0.0);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_applies_conversion_loss() {
        let mut b = Battery::new(100.0, 0.75, 0.0).unwrap();
        let receipt = b.store(20.0).unwrap();
        // 0.75 * 20 is exact in binary floating point.
        assert_eq!(receipt.stored, 15.0);
        assert_eq!(receipt.wasted, 0.0);
        assert_eq!(b.level(), 15.0);
    }

    #[test]
    fn store_clamps_at_capacity_and_reports_waste() {
        let mut b = Battery::new(100.0, 0.8, 99.0).unwrap();
        let receipt = b.store(20.0).unwrap();
        assert_eq!(b.level(), 100.0);
        assert!((receipt.stored - 1.0).abs() < 1e-12);
        assert!((receipt.wasted - 15.0).abs() < 1e-12);
    }

    #[test]
    fn draw_respects_level() {
        let mut b = Battery::new(50.0, 1.0, 30.0).unwrap();
        b.draw(20.0).unwrap();
        assert_eq!(b.level(), 10.0);
        assert!(b.draw(10.5).is_err());
    }

    #[test]
    fn construction_validates_ranges() {
        assert!(Battery::new(0.0, 0.8, 0.0).is_err());
        assert!(Battery::new(10.0, 0.0, 0.0).is_err());
        assert!(Battery::new(10.0, 1.1, 0.0).is_err());
        assert!(Battery::new(10.0, 0.8, 11.0).is_err());
        assert!(Battery::new(10.0, 0.8, -1.0).is_err());
    }

    #[test]
    fn level_never_leaves_bounds_under_random_traffic() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(7, &[99]);
        let mut b = Battery::new(40.0, 0.8, 20.0).unwrap();
        for _ in 0..10_000 {
            if rng.gen_bool(0.5) {
                b.store(rng.gen_range(0.0..30.0)).unwrap();
            } else {
                let amount = rng.gen_range(0.0..b.level().max(f64::MIN_POSITIVE));
                b.draw(amount).unwrap();
            }
            assert!(b.level() >= 0.0 && b.level() <= 40.0 + 1e-9);
        }
    }
}
