//! Ehrenfest breakdown times of the quantum rotor and their scaling with `hbar`.
//!
//! Packets are launched from points of a long classical orbit. For each
//! `hbar` the packet is evolved until its Husimi angle spread exceeds the
//! threshold (spread criterion) and until its mean angle leaves the
//! classical orbit by more than the threshold (discrepancy criterion).
//! Breakdown times are averaged over launch points and fitted against
//! `ln(1 / hbar)` and, for comparison, against a power law.

use serde::{Deserialize, Serialize};

use super::classical::{angle_distance, integrate_classical, lyapunov, stable_direction, ClassicalRotorState, LyapunovEstimate};
use super::quantum::{coherent_state, default_delta_x, gaussian_packet, smooth_truncation, RotorEvolver, RotorWavefunction};
use super::RotorParams;
use crate::error::{QtrajError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LaunchPacket {
    /// Minimum-uncertainty coherent state of width `sqrt(hbar / 2)`.
    Coherent,
    /// Squeezed gaussian whose long axis (standard deviation `sigma_long`)
    /// lies along the local stable direction, found by integrating a tangent
    /// vector backward from `t0 + backward_horizon`.
    StableSqueezed { sigma_long: f64, backward_horizon: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhrenfestConfig {
    /// Start of the orbit that supplies launch points.
    pub seed_state: ClassicalRotorState,
    pub burn_in_orbits: usize,
    pub launch_spacing_orbits: usize,
    pub launch_count: usize,
    pub packet: LaunchPacket,
    /// Longest evolution per packet; later breakdowns are censored.
    pub horizon: f64,
    /// Extra angular momentum beyond the classical orbit kept in the basis.
    pub ell_margin: f64,
    pub lyapunov_duration: f64,
}

impl Default for EhrenfestConfig {
    fn default() -> Self {
        Self {
            seed_state: ClassicalRotorState { phi: 0.1, ell: 1.0 },
            burn_in_orbits: 20,
            launch_spacing_orbits: 10,
            launch_count: 18,
            packet: LaunchPacket::StableSqueezed { sigma_long: 0.02, backward_horizon: 60.0 },
            horizon: 200.0,
            ell_margin: 0.5,
            lyapunov_duration: 4000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchPoint {
    pub t0: f64,
    pub state: ClassicalRotorState,
}

/// Launch points plus the largest `|ell|` met along the orbit that supplied them,
/// a proxy for the extent of the chaotic sea.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchSet {
    pub points: Vec<LaunchPoint>,
    pub ell_reach: f64,
}

/// Points of the orbit from `seed_state` at whole orbital periods, after a burn-in.
pub fn launch_points(params: &RotorParams, cfg: &EhrenfestConfig) -> Result<LaunchSet> {
    if cfg.launch_count == 0 || cfg.launch_spacing_orbits == 0 {
        return Err(QtrajError::invalid("launch_count", "need at least one launch point and a positive spacing"));
    }
    let last = cfg.burn_in_orbits + cfg.launch_spacing_orbits * (cfg.launch_count - 1);
    let tr = integrate_classical(params, cfg.seed_state, (0.0, last as f64 * params.period), params.default_dt())?;
    let per_orbit = (tr.times.len() - 1) / last.max(1);
    let points = (0..cfg.launch_count)
        .map(|i| {
            let orbit = cfg.burn_in_orbits + i * cfg.launch_spacing_orbits;
            let idx = if last == 0 { 0 } else { orbit * per_orbit };
            LaunchPoint { t0: orbit as f64 * params.period, state: tr.states[idx] }
        })
        .collect();
    Ok(LaunchSet { points, ell_reach: tr.max_abs_ell() })
}

/// Breakdown times of one packet; `None` means no breakdown within the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketBreakdown {
    pub t_spread: Option<f64>,
    pub t_discrepancy: Option<f64>,
    pub truncation: usize,
}

/// Packet covariance `(sxx, sxp, spp)` in the `(phi, ell)` plane.
fn launch_covariance(params: &RotorParams, lp: &LaunchPoint, hbar: f64, packet: LaunchPacket) -> Result<(f64, f64, f64)> {
    match packet {
        LaunchPacket::Coherent => {
            let dx = default_delta_x(hbar);
            Ok((dx * dx, 0.0, (hbar / (2.0 * dx)).powi(2)))
        }
        LaunchPacket::StableSqueezed { sigma_long, backward_horizon } => {
            let (sx, sp) = stable_direction(params, lp.state, lp.t0, backward_horizon)?;
            let (ux, up) = (-sp, sx);
            let long2 = sigma_long * sigma_long;
            let short2 = (hbar / (2.0 * sigma_long)).powi(2);
            Ok((long2 * sx * sx + short2 * ux * ux, long2 * sx * sp + short2 * ux * up, long2 * sp * sp + short2 * up * up))
        }
    }
}

fn launch_state(lp: &LaunchPoint, hbar: f64, truncation: usize, packet: LaunchPacket, cov: (f64, f64, f64)) -> Result<RotorWavefunction> {
    let dx = default_delta_x(hbar);
    match packet {
        LaunchPacket::Coherent => coherent_state(lp.state.phi, lp.state.ell, hbar, dx, truncation),
        LaunchPacket::StableSqueezed { .. } => gaussian_packet(lp.state.phi, lp.state.ell, cov.0, cov.1, hbar, dx, truncation),
    }
}

/// Evolves one packet until both criteria have fired or the horizon is reached.
/// The basis covers `|ell|` up to the larger of `ell_reach` and the packet
/// centre's own orbit, plus the configured margin and eight momentum widths.
pub fn packet_breakdown(
    params: &RotorParams,
    lp: &LaunchPoint,
    hbar: f64,
    threshold: f64,
    cfg: &EhrenfestConfig,
    ell_reach: f64,
) -> Result<PacketBreakdown> {
    let dt = params.default_dt();
    let n_steps = (cfg.horizon / dt).round() as usize;
    let classical = integrate_classical(params, lp.state, (lp.t0, lp.t0 + n_steps as f64 * dt), dt)?;
    let cov = launch_covariance(params, lp, hbar, cfg.packet)?;
    let ell_reach = classical.max_abs_ell().max(ell_reach) + cfg.ell_margin + 8.0 * cov.2.sqrt();
    let truncation = smooth_truncation((ell_reach / (0.9 * hbar)).ceil() as usize);
    let mut psi = launch_state(lp, hbar, truncation, cfg.packet, cov)?;
    let delta_h = default_delta_x(hbar);
    let mut evolver = RotorEvolver::new(params, truncation, hbar, dt)?;
    let (mut t_spread, mut t_discrepancy) = (None, None);
    evolver.run(&mut psi, lp.t0, n_steps, |step, t, psi| {
        let elapsed = t - lp.t0;
        if t_spread.is_none() && psi.husimi_angle_spread(delta_h) > threshold {
            t_spread = Some(elapsed);
        }
        if t_discrepancy.is_none() && angle_distance(psi.mean_angle(), classical.states[step].phi) > threshold {
            t_discrepancy = Some(elapsed);
        }
        t_spread.is_none() || t_discrepancy.is_none()
    })?;
    Ok(PacketBreakdown { t_spread, t_discrepancy, truncation })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownPoint {
    pub hbar: f64,
    /// Mean spread breakdown time; `None` when any launch was censored.
    pub t_spread: Option<f64>,
    pub t_discrepancy: Option<f64>,
    pub spread_censored: usize,
    pub discrepancy_censored: usize,
    pub packets: Vec<PacketBreakdown>,
}

fn censored_mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let v: Vec<Option<f64>> = values.collect();
    let censored = v.iter().filter(|x| x.is_none()).count();
    if censored > 0 || v.is_empty() {
        return (None, censored);
    }
    (Some(v.iter().flatten().sum::<f64>() / v.len() as f64), 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares; needs two distinct abscissae.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(LinearFit { intercept, slope, r_squared, n })
}

/// `t = A + B ln(1/hbar)` against `ln t = a + b ln(1/hbar)`, both judged by
/// their squared error in `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingComparison {
    pub log_fit: LinearFit,
    pub power_fit: LinearFit,
    pub log_sse: f64,
    pub power_sse: f64,
    pub log_preferred: bool,
}

pub fn compare_scalings(hbars: &[f64], times: &[f64]) -> Option<ScalingComparison> {
    let x: Vec<f64> = hbars.iter().map(|h| (1.0 / h).ln()).collect();
    let log_fit = fit_line(&x, times)?;
    let ln_t: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let power_fit = fit_line(&x, &ln_t)?;
    let log_sse = x.iter().zip(times).map(|(a, t)| (t - log_fit.predict(*a)).powi(2)).sum();
    let power_sse = x.iter().zip(times).map(|(a, t)| (t - power_fit.predict(*a).exp()).powi(2)).sum();
    Some(ScalingComparison { log_fit, power_fit, log_sse, power_sse, log_preferred: log_sse < power_sse })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestReport {
    pub params: RotorParams,
    pub threshold: f64,
    pub config: EhrenfestConfig,
    pub lyapunov: LyapunovEstimate,
    pub points: Vec<BreakdownPoint>,
    pub spread: Option<ScalingComparison>,
    pub discrepancy: Option<ScalingComparison>,
    /// Spread-criterion slope times the Lyapunov exponent (one when `B = t_c`).
    pub slope_ratio: Option<f64>,
}

fn uncensored(points: &[BreakdownPoint], pick: impl Fn(&BreakdownPoint) -> Option<f64>) -> (Vec<f64>, Vec<f64>) {
    points.iter().filter_map(|p| pick(p).map(|t| (p.hbar, t))).unzip()
}

pub fn ehrenfest_breakdown(params: &RotorParams, hbars: &[f64], threshold: f64, cfg: &EhrenfestConfig) -> Result<EhrenfestReport> {
    params.validate()?;
    if hbars.len() < 4 || hbars.iter().any(|&h| !(h > 0.0)) {
        return Err(QtrajError::invalid("hbar_eff_list", "need at least four positive values"));
    }
    let (lo, hi) = hbars.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &h| (a.min(h), b.max(h)));
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(QtrajError::invalid("hbar_eff_list", "values must span at least two decades"));
    }
    if !(threshold > 0.0) {
        return Err(QtrajError::invalid("threshold", "must be positive"));
    }
    let launches = launch_points(params, cfg)?;
    let lyap = lyapunov(params, cfg.seed_state, cfg.lyapunov_duration)?;
    let mut points = Vec::with_capacity(hbars.len());
    for &hbar in hbars {
        let packets =
            launches.points.iter().map(|lp| packet_breakdown(params, lp, hbar, threshold, cfg, launches.ell_reach)).collect::<Result<Vec<_>>>()?;
        let (t_spread, spread_censored) = censored_mean(packets.iter().map(|p| p.t_spread));
        let (t_discrepancy, discrepancy_censored) = censored_mean(packets.iter().map(|p| p.t_discrepancy));
        points.push(BreakdownPoint { hbar, t_spread, t_discrepancy, spread_censored, discrepancy_censored, packets });
    }
    let (hs, ts) = uncensored(&points, |p| p.t_spread);
    let spread = compare_scalings(&hs, &ts);
    let (hd, td) = uncensored(&points, |p| p.t_discrepancy);
    let discrepancy = compare_scalings(&hd, &td);
    let slope_ratio = match (&spread, lyap.regular) {
        (Some(s), false) => Some(s.log_fit.slope * lyap.lambda_max),
        _ => None,
    };
    Ok(EhrenfestReport { params: *params, threshold, config: *cfg, lyapunov: lyap, points, spread, discrepancy, slope_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn scaling_comparison_picks_the_right_law() {
        let hbars = [1e-2, 1e-3, 1e-4, 1e-5];
        let log_t: Vec<f64> = hbars.iter().map(|h: &f64| 1.0 + 5.0 * (1.0 / h).ln()).collect();
        assert!(compare_scalings(&hbars, &log_t).unwrap().log_preferred);
        let pow_t: Vec<f64> = hbars.iter().map(|h: &f64| 0.1 * h.powf(-0.5)).collect();
        assert!(!compare_scalings(&hbars, &pow_t).unwrap().log_preferred);
    }

    #[test]
    fn launch_points_are_on_whole_orbits() {
        let p = RotorParams::chaotic_demo();
        let cfg = EhrenfestConfig { launch_count: 3, burn_in_orbits: 2, launch_spacing_orbits: 1, ..Default::default() };
        let set = launch_points(&p, &cfg).unwrap();
        let pts = &set.points;
        assert_eq!(pts.len(), 3);
        assert!(set.ell_reach >= pts.iter().map(|l| l.state.ell.abs()).fold(0.0, f64::max));
        assert!((pts[2].t0 - 4.0 * p.period).abs() < 1e-12);
        let direct = integrate_classical(&p, cfg.seed_state, (0.0, 4.0 * p.period), p.default_dt()).unwrap().last();
        assert_eq!(pts[2].state, direct);
    }

    #[test]
    fn huge_threshold_censors_everything() {
        let p = RotorParams::chaotic_demo();
        let cfg = EhrenfestConfig { launch_count: 1, burn_in_orbits: 0, horizon: 2.0, lyapunov_duration: 100.0, ..Default::default() };
        let r = ehrenfest_breakdown(&p, &[1e-1, 3e-2, 1e-2, 1e-3], 1e9, &cfg).unwrap();
        assert!(r.points.iter().all(|pt| pt.t_spread.is_none() && pt.t_discrepancy.is_none()));
        assert!(r.spread.is_none() && r.discrepancy.is_none() && r.slope_ratio.is_none());
    }

    #[test]
    fn narrow_sweeps_are_rejected() {
        let p = RotorParams::chaotic_demo();
        let cfg = EhrenfestConfig::default();
        assert!(ehrenfest_breakdown(&p, &[1e-2, 3e-3, 1e-3], 0.3, &cfg).is_err());
        assert!(ehrenfest_breakdown(&p, &[1e-2, 8e-3, 5e-3, 2e-3], 0.3, &cfg).is_err());
    }

    #[test]
    fn free_rotor_spread_follows_ballistic_law() {
        let p = RotorParams { asymmetry: 0.0, ..RotorParams::chaotic_demo() };
        let cfg = EhrenfestConfig { launch_count: 1, burn_in_orbits: 0, packet: LaunchPacket::Coherent, horizon: 100.0, ..Default::default() };
        let lp = launch_points(&p, &cfg).unwrap().points[0];
        let hbar = 1e-3;
        let b = packet_breakdown(&p, &lp, hbar, 0.3, &cfg, 0.0).unwrap();
        // With hbar = 2 dx^2 the angle variance is dx^2 (1 + t^2); the Husimi
        // smoothing adds dx^2, and a wrapped gaussian has circular spread equal to its width.
        let dx = default_delta_x(hbar);
        let t_expected = (0.09 / (dx * dx) - 2.0).sqrt();
        let t = b.t_spread.unwrap();
        assert!((t / t_expected - 1.0).abs() < 0.02, "{t} vs {t_expected}");
    }
}
