//! SI adapter for the breakdown-time estimate `t_q = t_c ln(R sqrt(m k_B T) / hbar)`.

use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// Julian year.
pub const SECONDS_PER_YEAR: f64 = 365.25 * SECONDS_PER_DAY;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TqHeadline {
    pub t_q_seconds: f64,
    pub t_q_years: f64,
    /// Thermal de Broglie length `hbar / sqrt(m k_B T)` in metres.
    pub de_broglie_m: f64,
    /// `ln(R / de_broglie)`.
    pub log_factor: f64,
}

pub fn tq_headline(t_c_seconds: f64, radius_m: f64, mass_kg: f64, temperature_k: f64) -> Result<TqHeadline> {
    for (name, v) in [("t_c", t_c_seconds), ("radius", radius_m), ("mass", mass_kg), ("temperature", temperature_k)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(QtrajError::invalid(name, format!("must be positive, got {v}")));
        }
    }
    let de_broglie_m = HBAR / (mass_kg * BOLTZMANN * temperature_k).sqrt();
    let log_factor = (radius_m / de_broglie_m).ln();
    let t_q_seconds = t_c_seconds * log_factor;
    Ok(TqHeadline { t_q_seconds, t_q_years: t_q_seconds / SECONDS_PER_YEAR, de_broglie_m, log_factor })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescaling_radius_by_e_adds_one_chaos_time() {
        let t_c = 100.0 * SECONDS_PER_DAY;
        let a = tq_headline(t_c, 1.4e5, 1e19, 100.0).unwrap();
        let b = tq_headline(t_c, 1.4e5 * std::f64::consts::E, 1e19, 100.0).unwrap();
        assert!(((b.t_q_seconds - a.t_q_seconds) / t_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn de_broglie_length_value() {
        let h = tq_headline(1.0, 1.0, 1e19, 100.0).unwrap();
        assert!((h.de_broglie_m / 8.975e-34 - 1.0).abs() < 1e-3, "{}", h.de_broglie_m);
        assert!(tq_headline(1.0, 1.0, -1.0, 100.0).is_err());
    }
}
