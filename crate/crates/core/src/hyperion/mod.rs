//! The chaotic spin-orbit rotor.
//!
//! A rigid body with moments of inertia `I1 < I2 < I3` spins about its
//! largest axis while on a Kepler orbit. The spin angle `phi` and angular
//! momentum `ell` obey
//! `H = ell^2 / (2 I3) - (3/4) n^2 I3 asym (a / r)^3 cos 2(phi - theta)`
//! with mean motion `n = 2 pi / T` and `asym = (I2 - I1) / I3`.
//!
//! Everything here is dimensionless (`I3 = 1`, `T = 2 pi`, `a = 1` and the
//! phase-space length `R = 1` by default) except [`units`].

pub mod classical;
pub mod ehrenfest;
pub mod phase_space;
pub mod quantum;
pub mod units;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};

pub use classical::{
    angle_distance, energy, integrate_classical, kepler_residual, liouville_area_drift, lyapunov, lyapunov_two_trajectory, orbit,
    stable_direction, ClassicalRotorState, ClassicalTrajectory, LyapunovEstimate,
};
pub use ehrenfest::{
    compare_scalings, ehrenfest_breakdown, fit_line, launch_points, packet_breakdown, BreakdownPoint, EhrenfestConfig, EhrenfestReport,
    LaunchPacket, LaunchPoint, LaunchSet, LinearFit, PacketBreakdown, ScalingComparison,
};
pub use phase_space::{husimi, phase_space_povm, CellResiduals, HusimiDensity, PhaseSpaceGrid, PhaseSpacePovm};
pub use quantum::{
    coherent_state, default_delta_x, evolve_rotor, free_packet_width, gaussian_packet, smooth_truncation, RotorEvolver, RotorWavefunction,
};
pub use units::{tq_headline, TqHeadline};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorParams {
    /// `(I2 - I1) / I3`.
    pub asymmetry: f64,
    pub eccentricity: f64,
    pub period: f64,
    pub semi_major: f64,
    /// `I3`.
    #[serde(default = "unit")]
    pub inertia: f64,
    pub hbar_eff: f64,
}

fn unit() -> f64 {
    1.0
}

impl RotorParams {
    /// Demonstration parameters with a wide chaotic sea (`lambda ~ 0.18`).
    /// They are not Hyperion's actual values.
    pub fn chaotic_demo() -> Self {
        Self { asymmetry: 0.5, eccentricity: 0.2, period: TAU, semi_major: 1.0, inertia: 1.0, hbar_eff: 1e-3 }
    }

    /// Circular orbit: the co-rotating problem is a pendulum and the motion is regular.
    pub fn regular_demo() -> Self {
        Self { eccentricity: 0.0, ..Self::chaotic_demo() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(QtrajError::invalid("eccentricity", format!("must lie in [0, 1), got {}", self.eccentricity)));
        }
        if !(self.asymmetry >= 0.0 && self.asymmetry.is_finite()) {
            return Err(QtrajError::invalid("asymmetry", "must be finite and non-negative"));
        }
        for (name, v) in [("period", self.period), ("semi_major", self.semi_major), ("inertia", self.inertia), ("hbar_eff", self.hbar_eff)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QtrajError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `T / 500`.
    pub fn default_dt(&self) -> f64 {
        self.period * classical::MAX_STEP_FRACTION
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_invariants() {
        assert!(RotorParams::chaotic_demo().validate().is_ok());
        assert!(RotorParams { eccentricity: 1.0, ..RotorParams::chaotic_demo() }.validate().is_err());
        assert!(RotorParams { asymmetry: -0.1, ..RotorParams::chaotic_demo() }.validate().is_err());
    }

    #[test]
    fn regular_demo_is_regular() {
        let p = RotorParams::regular_demo();
        let l = lyapunov(&p, ClassicalRotorState::new(0.1, 1.0), 20_000.0).unwrap();
        assert!(l.regular, "{l:?}");
        let c = lyapunov(&RotorParams::chaotic_demo(), ClassicalRotorState::new(0.1, 1.0), 4000.0).unwrap();
        assert!(!c.regular);
    }
}
