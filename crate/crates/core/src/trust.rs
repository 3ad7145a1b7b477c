use serde::{Deserialize, Serialize};

/// Numerical-trust diagnostics attached to every simulated result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trust {
    pub tail_mass: f64,
    pub norm_drift: f64,
    pub symplectic_drift: f64,
    pub charge_drift: f64,
    pub tail_tolerance: f64,
}

impl Trust {
    pub const NORM_TOLERANCE: f64 = 1e-8;
    pub const SYMPLECTIC_TOLERANCE: f64 = 1e-8;
    pub const CHARGE_TOLERANCE: f64 = 1e-6;

    pub fn with_tolerance(tail_tolerance: f64) -> Self {
        Trust { tail_tolerance, ..Default::default() }
    }

    pub fn is_trusted(&self) -> bool {
        self.tail_mass <= self.tail_tolerance
            && self.norm_drift <= Self::NORM_TOLERANCE
            && self.symplectic_drift <= Self::SYMPLECTIC_TOLERANCE
            && self.charge_drift <= Self::CHARGE_TOLERANCE
    }

    /// Worst-case combination of two diagnostics.
    pub fn merge(self, other: Trust) -> Trust {
        Trust {
            tail_mass: self.tail_mass.max(other.tail_mass),
            norm_drift: self.norm_drift.max(other.norm_drift),
            symplectic_drift: self.symplectic_drift.max(other.symplectic_drift),
            charge_drift: self.charge_drift.max(other.charge_drift),
            tail_tolerance: self.tail_tolerance.min(other.tail_tolerance),
        }
    }
}
