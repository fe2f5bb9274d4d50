//! Classical spin-orbit dynamics: Kepler orbit, equations of motion,
//! Lyapunov exponents and phase-space area preservation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::RotorParams;
use crate::error::{QtrajError, Result};

/// Newton iteration cap for Kepler's equation.
pub const KEPLER_MAX_ITER: usize = 50;
/// Largest allowed step as a fraction of the orbital period.
pub const MAX_STEP_FRACTION: f64 = 1.0 / 500.0;
/// Lyapunov estimates below this (in units of `2 pi / T`) count as regular motion.
pub const REGULAR_LAMBDA: f64 = 1e-3;
const RENORMALIZE_EVERY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRotorState {
    pub phi: f64,
    pub ell: f64,
}

impl ClassicalRotorState {
    pub fn new(phi: f64, ell: f64) -> Self {
        Self { phi: phi.rem_euclid(TAU), ell }
    }
}

/// Distance between two angles on the circle, in `[0, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Eccentric anomaly `E` solving `E - e sin E = M` for a mean anomaly `M` in `[0, 2 pi)`.
pub fn eccentric_anomaly(mean_anomaly: f64, e: f64) -> Result<f64> {
    let mut ecc_anom = if e < 0.8 { mean_anomaly } else { std::f64::consts::PI };
    for _ in 0..KEPLER_MAX_ITER {
        let f = ecc_anom - e * ecc_anom.sin() - mean_anomaly;
        if f.abs() < 1e-13 {
            return Ok(ecc_anom);
        }
        ecc_anom -= f / (1.0 - e * ecc_anom.cos());
    }
    Err(QtrajError::NonConvergence { what: "kepler equation", iterations: KEPLER_MAX_ITER })
}

fn reduced_mean_anomaly(params: &RotorParams, t: f64) -> (f64, f64) {
    let mean = TAU * t / params.period;
    let turns = (mean / TAU).floor();
    (mean - turns * TAU, turns)
}

/// Orbital radius and true anomaly at time `t`.
///
/// The anomaly is continued across periods, so for a circular orbit it
/// equals the mean anomaly `2 pi t / T`.
pub fn orbit(params: &RotorParams, t: f64) -> Result<(f64, f64)> {
    let e = params.eccentricity;
    if e == 0.0 {
        return Ok((params.semi_major, TAU * t / params.period));
    }
    let (m, turns) = reduced_mean_anomaly(params, t);
    let ecc_anom = eccentric_anomaly(m, e)?;
    let r = params.semi_major * (1.0 - e * ecc_anom.cos());
    let half = ((1.0 + e).sqrt() * (ecc_anom / 2.0).sin()).atan2((1.0 - e).sqrt() * (ecc_anom / 2.0).cos());
    Ok((r, 2.0 * half + turns * TAU))
}

/// `|E - e sin E - M|` at the solver's eccentric anomaly for time `t`.
pub fn kepler_residual(params: &RotorParams, t: f64) -> Result<f64> {
    let (m, _) = reduced_mean_anomaly(params, t);
    let e = params.eccentricity;
    let ecc = eccentric_anomaly(m, e)?;
    Ok((ecc - e * ecc.sin() - m).abs())
}

/// Torque coefficient `k(t)` and orbital angle: the potential is
/// `V = -(k / 2) cos 2(phi - theta)`.
pub(crate) fn tidal(params: &RotorParams, t: f64) -> Result<(f64, f64)> {
    let (r, theta) = orbit(params, t)?;
    let n = TAU / params.period;
    let k = 1.5 * params.asymmetry * params.inertia * n * n * (params.semi_major / r).powi(3);
    Ok((k, theta))
}

/// Hamiltonian `l^2 / 2 I3 - (k / 2) cos 2(phi - theta)`.
pub fn energy(params: &RotorParams, t: f64, s: &ClassicalRotorState) -> Result<f64> {
    let (k, theta) = tidal(params, t)?;
    Ok(s.ell * s.ell / (2.0 * params.inertia) - 0.5 * k * (2.0 * (s.phi - theta)).cos())
}

/// State `(phi, ell)` followed by `P` tangent vectors `(dphi, dell)`.
fn rhs<const N: usize>(params: &RotorParams, t: f64, y: &[f64; N]) -> Result<[f64; N]> {
    let (k, theta) = tidal(params, t)?;
    let psi2 = 2.0 * (y[0] - theta);
    let (s, c) = psi2.sin_cos();
    let mut d = [0.0; N];
    d[0] = y[1] / params.inertia;
    d[1] = -k * s;
    let mut i = 2;
    while i + 1 < N {
        d[i] = y[i + 1] / params.inertia;
        d[i + 1] = -2.0 * k * c * y[i];
        i += 2;
    }
    Ok(d)
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + a * k[i])
}

pub(crate) fn rk4<const N: usize>(params: &RotorParams, t: f64, y: &[f64; N], dt: f64) -> Result<[f64; N]> {
    let k1 = rhs(params, t, y)?;
    let k2 = rhs(params, t + dt / 2.0, &axpy(y, dt / 2.0, &k1))?;
    let k3 = rhs(params, t + dt / 2.0, &axpy(y, dt / 2.0, &k2))?;
    let k4 = rhs(params, t + dt, &axpy(y, dt, &k3))?;
    let out: [f64; N] = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(QtrajError::NonFinite { what: "classical rotor state" });
    }
    Ok(out)
}

fn check_step(params: &RotorParams, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(QtrajError::invalid("dt", "must be finite and non-zero"));
    }
    if dt.abs() > params.period * MAX_STEP_FRACTION * (1.0 + 1e-12) {
        return Err(QtrajError::invalid("dt", format!("|dt| = {} exceeds T/500 = {}", dt.abs(), params.period * MAX_STEP_FRACTION)));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ClassicalRotorState>,
}

impl ClassicalTrajectory {
    pub fn last(&self) -> ClassicalRotorState {
        *self.states.last().expect("trajectory holds the initial state")
    }

    pub fn max_abs_ell(&self) -> f64 {
        self.states.iter().map(|s| s.ell.abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,phi,ell\n");
        for (t, st) in self.times.iter().zip(&self.states) {
            s.push_str(&format!("{t:.17e},{:.17e},{:.17e}\n", st.phi, st.ell));
        }
        s
    }
}

/// Fixed-step RK4 from `t_span.0` to `t_span.1`; the step is shrunk so an
/// integer number of steps lands exactly on the end time. Negative spans
/// integrate backward.
pub fn integrate_classical(params: &RotorParams, state0: ClassicalRotorState, t_span: (f64, f64), dt: f64) -> Result<ClassicalTrajectory> {
    params.validate()?;
    check_step(params, dt)?;
    let span = t_span.1 - t_span.0;
    let n = (span.abs() / dt.abs()).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut y = [state0.phi, state0.ell];
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t_span.0);
    states.push(ClassicalRotorState::new(y[0], y[1]));
    for i in 0..n {
        let t = t_span.0 + i as f64 * h;
        y = rk4(params, t, &y, h)?;
        times.push(t + h);
        states.push(ClassicalRotorState::new(y[0], y[1]));
    }
    Ok(ClassicalTrajectory { times, states })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    /// `1 / lambda_max`, absent for regular motion.
    pub t_c: Option<f64>,
    pub regular: bool,
    pub duration: f64,
}

impl LyapunovEstimate {
    fn from_lambda(params: &RotorParams, lambda_max: f64, duration: f64) -> Self {
        let regular = lambda_max <= REGULAR_LAMBDA * TAU / params.period;
        Self { lambda_max, t_c: (!regular).then(|| 1.0 / lambda_max), regular, duration }
    }
}

/// Largest Lyapunov exponent from tangent-space propagation with periodic
/// renormalization, starting at `t = 0` with tangent vector `(1, 0)`.
pub fn lyapunov(params: &RotorParams, state0: ClassicalRotorState, duration: f64) -> Result<LyapunovEstimate> {
    params.validate()?;
    let dt = params.default_dt();
    let n = (duration / dt).ceil() as usize;
    let mut y = [state0.phi, state0.ell, 1.0, 0.0];
    let mut acc = 0.0;
    for i in 0..n {
        y = rk4(params, i as f64 * dt, &y, dt)?;
        if (i + 1) % RENORMALIZE_EVERY == 0 || i + 1 == n {
            let norm = y[2].hypot(y[3]);
            acc += norm.ln();
            y[2] /= norm;
            y[3] /= norm;
        }
    }
    let total = n as f64 * dt;
    Ok(LyapunovEstimate::from_lambda(params, acc / total, total))
}

/// Two-trajectory (Benettin) estimate: a companion orbit displaced by `d0`
/// is pulled back to distance `d0` after every renormalization interval.
pub fn lyapunov_two_trajectory(params: &RotorParams, state0: ClassicalRotorState, duration: f64, d0: f64) -> Result<LyapunovEstimate> {
    params.validate()?;
    let dt = params.default_dt();
    let n = (duration / dt).ceil() as usize;
    let mut a = [state0.phi, state0.ell];
    let mut b = [state0.phi + d0, state0.ell];
    let mut acc = 0.0;
    for i in 0..n {
        let t = i as f64 * dt;
        a = rk4(params, t, &a, dt)?;
        b = rk4(params, t, &b, dt)?;
        if (i + 1) % RENORMALIZE_EVERY == 0 || i + 1 == n {
            let (dp, dl) = (b[0] - a[0], b[1] - a[1]);
            let d = dp.hypot(dl);
            acc += (d / d0).ln();
            b = [a[0] + dp * d0 / d, a[1] + dl * d0 / d];
        }
    }
    let total = n as f64 * dt;
    Ok(LyapunovEstimate::from_lambda(params, acc / total, total))
}

/// Unit tangent vector along the local stable direction at `(t0, state0)`:
/// integrate forward for `horizon`, then carry a tangent vector backward
/// to `t0`, where it has aligned with the direction contracted by the flow.
pub fn stable_direction(params: &RotorParams, state0: ClassicalRotorState, t0: f64, horizon: f64) -> Result<(f64, f64)> {
    let dt = params.default_dt();
    let n = (horizon / dt).ceil() as usize;
    let mut y = [state0.phi, state0.ell];
    for i in 0..n {
        y = rk4(params, t0 + i as f64 * dt, &y, dt)?;
    }
    let mut z = [y[0], y[1], 1.0, 0.3];
    for i in (0..n).rev() {
        z = rk4(params, t0 + (i + 1) as f64 * dt, &z, -dt)?;
        let norm = z[2].hypot(z[3]);
        z[2] /= norm;
        z[3] /= norm;
    }
    Ok((z[2], z[3]))
}

/// Relative change of the area spanned by two tangent vectors after
/// `orbits` orbital periods, starting from the unit square.
pub fn liouville_area_drift(params: &RotorParams, state0: ClassicalRotorState, orbits: usize) -> Result<f64> {
    let dt = params.default_dt();
    let n = (orbits as f64 * params.period / dt).round() as usize;
    let mut y = [state0.phi, state0.ell, 1.0, 0.0, 0.0, 1.0];
    for i in 0..n {
        y = rk4(params, i as f64 * dt, &y, dt)?;
    }
    Ok((y[2] * y[5] - y[3] * y[4] - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn circular_orbit_is_uniform() {
        let p = RotorParams { eccentricity: 0.0, ..RotorParams::chaotic_demo() };
        for t in [0.0, 0.7, 3.0, 100.0] {
            let (r, th) = orbit(&p, t).unwrap();
            assert_eq!(r, p.semi_major);
            assert_eq!(th, TAU * t / p.period);
        }
    }

    #[test]
    fn perihelion_at_time_zero() {
        let p = RotorParams::chaotic_demo();
        let (r, th) = orbit(&p, 0.0).unwrap();
        assert!((r - p.semi_major * (1.0 - p.eccentricity)).abs() < 1e-15);
        assert_eq!(th, 0.0);
    }

    #[test]
    fn kepler_residual_is_tiny() {
        let mut rng = crate::qcore::RngStream::new(3, 0);
        for e in [0.2, 0.6, 0.95] {
            let p = RotorParams { eccentricity: e, ..RotorParams::chaotic_demo() };
            for _ in 0..1000 {
                let t = rng.random_range(-50.0..50.0);
                assert!(kepler_residual(&p, t).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn free_rotor_moves_uniformly() {
        let p = RotorParams { asymmetry: 0.0, ..RotorParams::chaotic_demo() };
        let tr = integrate_classical(&p, ClassicalRotorState::new(0.3, 0.7), (0.0, 10.0), p.default_dt()).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert_eq!(s.ell, 0.7);
            assert!(angle_distance(s.phi, 0.3 + 0.7 * t) < 1e-12);
        }
    }

    #[test]
    fn corotating_energy_is_conserved_on_circular_orbit() {
        let p = RotorParams { eccentricity: 0.0, ..RotorParams::chaotic_demo() };
        let n = TAU / p.period;
        let jacobi = |t: f64, s: &ClassicalRotorState| energy(&p, t, s).unwrap() - n * s.ell;
        let s0 = ClassicalRotorState::new(0.4, 1.3);
        let tr = integrate_classical(&p, s0, (0.0, 10.0 * p.period), p.default_dt()).unwrap();
        let mut prev = jacobi(0.0, &s0);
        for orbit in 1..=10 {
            let idx = orbit * 500;
            let now = jacobi(tr.times[idx], &tr.states[idx]);
            assert!((now - prev).abs() < 1e-8, "orbit {orbit}: {:e}", now - prev);
            prev = now;
        }
    }

    #[test]
    fn forward_then_backward_returns() {
        let p = RotorParams::chaotic_demo();
        let s0 = ClassicalRotorState::new(0.1, 1.0);
        let fwd = integrate_classical(&p, s0, (0.0, p.period), p.default_dt()).unwrap();
        let back = integrate_classical(&p, fwd.last(), (p.period, 0.0), p.default_dt()).unwrap();
        let end = back.last();
        assert!(angle_distance(end.phi, s0.phi) < 1e-8 && (end.ell - s0.ell).abs() < 1e-8);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = RotorParams::chaotic_demo();
        assert!(integrate_classical(&p, ClassicalRotorState::new(0.0, 1.0), (0.0, 1.0), p.period / 100.0).is_err());
    }

    #[test]
    fn free_rotor_has_zero_exponent() {
        let p = RotorParams { asymmetry: 0.0, ..RotorParams::chaotic_demo() };
        let l = lyapunov(&p, ClassicalRotorState::new(0.1, 1.0), 500.0).unwrap();
        assert!(l.lambda_max.abs() < 1e-3 && l.regular && l.t_c.is_none());
    }

    #[test]
    fn chaotic_exponent_is_robust() {
        let p = RotorParams::chaotic_demo();
        let a = lyapunov(&p, ClassicalRotorState::new(0.1, 1.0), 4000.0).unwrap();
        let b = lyapunov(&p, ClassicalRotorState::new(2.0, 1.2), 4000.0).unwrap();
        let c = lyapunov_two_trajectory(&p, ClassicalRotorState::new(0.1, 1.0), 4000.0, 1e-8).unwrap();
        let d = lyapunov(&p, ClassicalRotorState::new(0.1, 1.0), 8000.0).unwrap();
        assert!(!a.regular && a.lambda_max > 0.05);
        assert!((a.lambda_max / b.lambda_max - 1.0).abs() < 0.1, "{a:?} {b:?}");
        assert!((a.lambda_max / c.lambda_max - 1.0).abs() < 0.1, "{a:?} {c:?}");
        assert!((a.lambda_max / d.lambda_max - 1.0).abs() < 0.05, "{a:?} {d:?}");
    }

    #[test]
    fn phase_space_area_is_preserved() {
        let p = RotorParams::chaotic_demo();
        let drift = liouville_area_drift(&p, ClassicalRotorState::new(0.1, 1.0), 1).unwrap();
        assert!(drift < 1e-6, "{drift:e}");
    }

    #[test]
    fn stable_direction_contracts() {
        let p = RotorParams::chaotic_demo();
        let s0 = ClassicalRotorState::new(0.1, 1.0);
        let (a, b) = stable_direction(&p, s0, 0.0, 60.0).unwrap();
        let dt = p.default_dt();
        let mut ys = [s0.phi, s0.ell, a, b];
        let mut yu = [s0.phi, s0.ell, -b, a];
        for i in 0..(10.0 / dt) as usize {
            ys = rk4(&p, i as f64 * dt, &ys, dt).unwrap();
            yu = rk4(&p, i as f64 * dt, &yu, dt).unwrap();
        }
        assert!(ys[2].hypot(ys[3]) < 0.5 * yu[2].hypot(yu[3]));
    }
}
