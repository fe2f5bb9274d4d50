//! Quantum rotor in the angular-momentum basis `m = -M..=M`, with
//! split-step spectral evolution on an angle grid of `2M + 1` points.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::classical::tidal;
use super::RotorParams;
use crate::error::{QtrajError, Result};
use crate::qcore::{c64, Complex64, StateVector};

/// Evolution stops with an error once this much probability sits at `|m| > 0.9 M`.
pub const TAIL_LIMIT: f64 = 1e-6;
/// Fraction of the truncation inside which coherent-state momenta must lie.
pub const MOMENTUM_HEADROOM: f64 = 0.8;
const TAIL_CHECK_EVERY: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorWavefunction {
    state: StateVector,
    truncation: usize,
    hbar: f64,
    delta_x: f64,
}

impl RotorWavefunction {
    /// Wraps amplitudes indexed by `m + M`.
    pub fn new(state: StateVector, hbar: f64, delta_x: f64) -> Result<Self> {
        let dim = state.dim();
        if dim % 2 == 0 {
            return Err(QtrajError::invalid("state", "rotor basis needs an odd dimension 2M + 1"));
        }
        if !(hbar > 0.0 && delta_x > 0.0) {
            return Err(QtrajError::invalid("hbar", "hbar and delta_x must be positive"));
        }
        Ok(Self { state, truncation: dim / 2, hbar, delta_x })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.state.amplitudes()
    }

    pub fn m_of(&self, index: usize) -> i64 {
        index as i64 - self.truncation as i64
    }

    /// Amplitude of `|m>`, zero outside the truncation.
    pub fn amplitude(&self, m: i64) -> Complex64 {
        let j = m + self.truncation as i64;
        if j < 0 || j as usize >= self.state.dim() {
            c64(0.0, 0.0)
        } else {
            self.state.amplitude(j as usize)
        }
    }

    /// Probability at `|m| > 0.9 M`.
    pub fn tail_mass(&self) -> f64 {
        tail_mass(self.state.amplitudes(), self.truncation)
    }

    /// `<psi| e^{i phi} |psi>`.
    pub fn angle_moment(&self) -> Complex64 {
        let a = self.state.amplitudes();
        a.windows(2).map(|w| w[1].conj() * w[0]).sum()
    }

    /// Circular mean of the angle.
    pub fn mean_angle(&self) -> f64 {
        self.angle_moment().arg().rem_euclid(TAU)
    }

    pub fn mean_ell(&self) -> f64 {
        let a = self.state.amplitudes();
        self.hbar * a.iter().enumerate().map(|(j, c)| self.m_of(j) as f64 * c.norm_sqr()).sum::<f64>()
    }

    /// Circular standard deviation `sqrt(-2 ln R)` of the angle marginal of the
    /// Husimi density built from coherent states of width `delta_h`.
    pub fn husimi_angle_spread(&self, delta_h: f64) -> f64 {
        let r = self.angle_moment().norm() * (-0.5 * delta_h * delta_h).exp();
        if r <= 0.0 {
            f64::INFINITY
        } else {
            (-2.0 * r.min(1.0).ln()).sqrt()
        }
    }

    /// `psi(phi_k)` on `n` equally spaced angles `phi_k = 2 pi k / n`.
    pub fn on_angle_grid(&self, n: usize) -> Vec<Complex64> {
        let mut buf = vec![c64(0.0, 0.0); n];
        for (j, c) in self.state.amplitudes().iter().enumerate() {
            buf[self.m_of(j).rem_euclid(n as i64) as usize] += c;
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf
    }

    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        self.state.inner(&other.state)
    }
}

fn take_amps(psi: &mut RotorWavefunction) -> Vec<Complex64> {
    std::mem::replace(&mut psi.state, StateVector::from_raw(Vec::new())).into_amplitudes()
}

fn tail_mass(a: &[Complex64], truncation: usize) -> f64 {
    let cut = (0.9 * truncation as f64).floor() as i64;
    a.iter()
        .enumerate()
        .filter(|(j, _)| (*j as i64 - truncation as i64).abs() > cut)
        .map(|(_, c)| c.norm_sqr())
        .sum()
}

/// Symmetric coherent-state width `sqrt(hbar / 2)` (equal spreads in angle and momentum at `R = I3 = 1`).
pub fn default_delta_x(hbar: f64) -> f64 {
    (0.5 * hbar).sqrt()
}

/// Smallest `M >= m_min` whose grid size `2M + 1` factors into 3, 5 and 7.
pub fn smooth_truncation(m_min: usize) -> usize {
    let mut m = m_min.max(1);
    loop {
        let mut n = 2 * m + 1;
        for f in [3, 5, 7] {
            while n % f == 0 {
                n /= f;
            }
        }
        if n == 1 {
            return m;
        }
        m += 1;
    }
}

/// Coherent state `|x, p>` with amplitudes `exp(-delta_x^2 (m - p / hbar)^2 - i m x)`,
/// whose angle density peaks at `x`.
pub fn coherent_state(x: f64, p: f64, hbar: f64, delta_x: f64, truncation: usize) -> Result<RotorWavefunction> {
    if (p / hbar).abs() >= MOMENTUM_HEADROOM * truncation as f64 {
        return Err(QtrajError::invalid("p", format!("|p| / hbar = {} must stay below {MOMENTUM_HEADROOM} M = {}", (p / hbar).abs(), MOMENTUM_HEADROOM * truncation as f64)));
    }
    if !(delta_x > 0.0 && hbar > 0.0) {
        return Err(QtrajError::invalid("delta_x", "must be positive"));
    }
    let u = p / hbar;
    let amps = (-(truncation as i64)..=truncation as i64)
        .map(|m| {
            let mf = m as f64;
            Complex64::from_polar((-(delta_x * (mf - u)).powi(2)).exp(), -mf * x)
        })
        .collect();
    let state = StateVector::new(amps)?.normalized()?;
    RotorWavefunction::new(state, hbar, delta_x)
}

/// Pure gaussian packet with phase-space centre `(x, p)` and covariance
/// `[[sxx, sxp], [sxp, spp]]`, which must satisfy `sxx spp - sxp^2 = hbar^2 / 4`.
pub fn gaussian_packet(x: f64, p: f64, sxx: f64, sxp: f64, hbar: f64, delta_x: f64, truncation: usize) -> Result<RotorWavefunction> {
    if !(sxx > 0.0) {
        return Err(QtrajError::invalid("sxx", "angle variance must be positive"));
    }
    let n = 2 * truncation + 1;
    let alpha = 1.0 / (4.0 * sxx);
    let beta = sxp / (2.0 * hbar * sxx);
    let u = p / hbar;
    let mut grid: Vec<Complex64> = (0..n)
        .map(|k| {
            let d = (TAU * k as f64 / n as f64 - x + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            Complex64::from_polar((-alpha * d * d).exp(), beta * d * d + u * d)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut grid);
    let amps = (-(truncation as i64)..=truncation as i64).map(|m| grid[m.rem_euclid(n as i64) as usize]).collect();
    let state = StateVector::new(amps)?.normalized()?;
    RotorWavefunction::new(state, hbar, delta_x)
}

/// Width of a free gaussian packet of initial width `delta_x` after time `t`.
pub fn free_packet_width(delta_x: f64, hbar: f64, inertia: f64, t: f64) -> f64 {
    (delta_x * delta_x + (hbar * t / (2.0 * inertia * delta_x)).powi(2)).sqrt()
}

/// Precomputed transforms and phases for one truncation and step size.
pub struct RotorEvolver {
    params: RotorParams,
    truncation: usize,
    hbar: f64,
    dt: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kinetic_half: Vec<Complex64>,
    /// `e^{2 i phi_k}` on the angle grid.
    double_angle: Vec<Complex64>,
    grid: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RotorEvolver {
    pub fn new(params: &RotorParams, truncation: usize, hbar: f64, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(QtrajError::invalid("dt", "must be positive"));
        }
        let n = 2 * truncation + 1;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let kinetic_half = (-(truncation as i64)..=truncation as i64)
            .map(|m| {
                let mf = m as f64;
                Complex64::from_polar(1.0, -hbar * mf * mf * dt / (4.0 * params.inertia))
            })
            .collect();
        let double_angle = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * TAU * k as f64 / n as f64)).collect();
        Ok(Self {
            params: *params,
            truncation,
            hbar,
            dt,
            fwd,
            inv,
            kinetic_half,
            double_angle,
            grid: vec![c64(0.0, 0.0); n],
            scratch: vec![c64(0.0, 0.0); scratch_len],
        })
    }

    fn n(&self) -> usize {
        2 * self.truncation + 1
    }

    /// One Strang step from `t` to `t + dt` on raw amplitudes.
    fn step(&mut self, amps: &mut [Complex64], t: f64) -> Result<()> {
        for (c, k) in amps.iter_mut().zip(&self.kinetic_half) {
            *c *= k;
        }
        let (strength, theta) = tidal(&self.params, t + 0.5 * self.dt)?;
        if strength != 0.0 {
            let n = self.n();
            let mt = self.truncation as i64;
            for (j, c) in amps.iter().enumerate() {
                self.grid[(j as i64 - mt).rem_euclid(n as i64) as usize] = *c;
            }
            self.inv.process_with_scratch(&mut self.grid, &mut self.scratch);
            // exp(-i V dt / hbar) with V = -(k/2) cos 2(phi - theta)
            let rot = Complex64::from_polar(1.0, -2.0 * theta);
            let a = 0.5 * strength * self.dt / self.hbar;
            for (g, z) in self.grid.iter_mut().zip(&self.double_angle) {
                *g *= Complex64::from_polar(1.0 / n as f64, a * (z * rot).re);
            }
            self.fwd.process_with_scratch(&mut self.grid, &mut self.scratch);
            for (j, c) in amps.iter_mut().enumerate() {
                *c = self.grid[(j as i64 - mt).rem_euclid(n as i64) as usize];
            }
        }
        for (c, k) in amps.iter_mut().zip(&self.kinetic_half) {
            *c *= k;
        }
        Ok(())
    }

    /// Runs up to `n_steps` steps, calling `observe(step, t, psi)` after each;
    /// stops early when it returns `false`. Returns the number of steps taken.
    pub fn run<F>(&mut self, psi: &mut RotorWavefunction, t0: f64, n_steps: usize, mut observe: F) -> Result<usize>
    where
        F: FnMut(usize, f64, &RotorWavefunction) -> bool,
    {
        if psi.truncation != self.truncation {
            return Err(QtrajError::DimensionMismatch { expected: self.n(), found: psi.state.dim() });
        }
        let mut amps = take_amps(psi);
        let mut taken = 0;
        let result = (|| {
            for s in 0..n_steps {
                self.step(&mut amps, t0 + s as f64 * self.dt)?;
                taken = s + 1;
                if taken % TAIL_CHECK_EVERY == 0 || taken == n_steps {
                    let tail = tail_mass(&amps, self.truncation);
                    if tail > TAIL_LIMIT {
                        return Err(QtrajError::Truncation { tail, limit: TAIL_LIMIT });
                    }
                }
                psi.state = StateVector::from_raw(std::mem::take(&mut amps));
                let go_on = observe(taken, t0 + taken as f64 * self.dt, psi);
                amps = take_amps(psi);
                if !go_on {
                    break;
                }
            }
            Ok(())
        })();
        psi.state = StateVector::from_raw(amps);
        result.map(|_| taken)
    }
}

/// Evolves `psi` from `t0` by `n_steps` split steps of size `dt`.
pub fn evolve_rotor(psi: &RotorWavefunction, params: &RotorParams, t0: f64, dt: f64, n_steps: usize) -> Result<RotorWavefunction> {
    let mut evolver = RotorEvolver::new(params, psi.truncation, psi.hbar, dt)?;
    let mut out = psi.clone();
    evolver.run(&mut out, t0, n_steps, |_, _, _| true)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::classical::{angle_distance, integrate_classical, ClassicalRotorState};
    use super::*;

    #[test]
    fn coherent_state_is_normalized_and_peaked() {
        let psi = coherent_state(1.0, 0.5, 1e-2, default_delta_x(1e-2), 100).unwrap();
        assert!((psi.state().norm() - 1.0).abs() < 1e-12);
        assert!(angle_distance(psi.mean_angle(), 1.0) < 1e-10);
        assert!((psi.mean_ell() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn coherent_overlap_matches_gaussian_envelope() {
        let (hbar, p) = (1e-3, 0.2);
        let dx = default_delta_x(hbar);
        let a = coherent_state(1.0, p, hbar, dx, 600).unwrap();
        for mult in [0.5, 2.0, 6.0, 10.6, 12.0] {
            let b = coherent_state(1.0 + mult * dx, p, hbar, dx, 600).unwrap();
            let ov = a.overlap(&b).unwrap().norm();
            let expected = (-(mult * mult) / 8.0).exp();
            assert!((ov - expected).abs() < 1e-12, "{mult}: {ov} vs {expected}");
            if mult > 10.5 {
                assert!(ov < 1e-6);
            }
        }
    }

    #[test]
    fn truncation_violation_is_rejected() {
        assert!(coherent_state(0.0, 0.9, 1e-2, 0.07, 100).is_err());
    }

    #[test]
    fn gaussian_packet_reduces_to_coherent_state() {
        let hbar = 1e-2;
        let dx = default_delta_x(hbar);
        let c = coherent_state(2.0, -0.3, hbar, dx, 150).unwrap();
        let g = gaussian_packet(2.0, -0.3, dx * dx, 0.0, hbar, dx, 150).unwrap();
        assert!((c.overlap(&g).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn squeezed_packet_has_requested_moments() {
        let hbar = 1e-3;
        let (sxx, sxp) = (4e-4, 3e-4);
        let psi = gaussian_packet(1.0, 0.4, sxx, sxp, hbar, default_delta_x(hbar), 1000).unwrap();
        let grid = psi.on_angle_grid(2001);
        let w: Vec<f64> = grid.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = w.iter().sum();
        let var: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| {
                let d = (TAU * k as f64 / 2001.0 - 1.0 + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
                wk * d * d
            })
            .sum::<f64>()
            / total;
        assert!((var / sxx - 1.0).abs() < 1e-6);
        let spp = (hbar * hbar / 4.0 + sxp * sxp) / sxx;
        let mean = psi.mean_ell();
        let a = psi.amplitudes();
        let var_l = a.iter().enumerate().map(|(j, c)| (psi.m_of(j) as f64 * hbar - mean).powi(2) * c.norm_sqr()).sum::<f64>();
        assert!((mean - 0.4).abs() < 1e-10);
        assert!((var_l / spp - 1.0).abs() < 1e-6);
    }

    #[test]
    fn evolution_is_unitary() {
        let p = RotorParams::chaotic_demo();
        let psi = coherent_state(0.3, 1.0, 1e-2, default_delta_x(1e-2), smooth_truncation(400)).unwrap();
        let out = evolve_rotor(&psi, &p, 0.0, p.default_dt(), 10_000).unwrap();
        assert!((out.state().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn free_rotor_keeps_momentum_distribution() {
        let p = RotorParams { asymmetry: 0.0, ..RotorParams::chaotic_demo() };
        let psi = coherent_state(0.3, 1.0, 1e-2, default_delta_x(1e-2), 200).unwrap();
        let out = evolve_rotor(&psi, &p, 0.0, p.default_dt(), 2000).unwrap();
        for (a, b) in psi.amplitudes().iter().zip(out.amplitudes()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-12 * a.norm_sqr().max(1e-300));
        }
        let t = 2000.0 * p.default_dt();
        let spread_expected = free_packet_width(psi.delta_x(), 1e-2, 1.0, t);
        let spread = out.husimi_angle_spread(0.0);
        assert!((spread / spread_expected - 1.0).abs() < 0.02, "{spread} vs {spread_expected}");
    }

    #[test]
    fn short_time_motion_tracks_classical_orbit() {
        let p = RotorParams::chaotic_demo();
        let hbar = 1e-4;
        let s0 = ClassicalRotorState::new(0.3, 1.0);
        let m = smooth_truncation((2.0 / hbar) as usize);
        let mut psi = coherent_state(s0.phi, s0.ell, hbar, default_delta_x(hbar), m).unwrap();
        let steps = 250;
        psi = evolve_rotor(&psi, &p, 0.0, p.default_dt(), steps).unwrap();
        let cl = integrate_classical(&p, s0, (0.0, steps as f64 * p.default_dt()), p.default_dt()).unwrap().last();
        assert!(angle_distance(psi.mean_angle(), cl.phi) < 0.01);
        assert!((psi.mean_ell() - cl.ell).abs() < 0.01 * cl.ell.abs());
    }

    #[test]
    fn halving_the_step_changes_little() {
        let p = RotorParams::chaotic_demo();
        let hbar = 1e-2;
        let psi = coherent_state(0.3, 1.0, hbar, default_delta_x(hbar), smooth_truncation(400)).unwrap();
        let dt = p.default_dt();
        let a = evolve_rotor(&psi, &p, 0.0, dt, 500).unwrap();
        let b = evolve_rotor(&psi, &p, 0.0, dt / 2.0, 1000).unwrap();
        let fid = a.overlap(&b).unwrap().norm_sqr();
        assert!(1.0 - fid < 1e-6, "{:e}", 1.0 - fid);
    }

    #[test]
    fn tail_growth_is_reported() {
        let p = RotorParams::chaotic_demo();
        let psi = coherent_state(0.3, 1.0, 1e-2, default_delta_x(1e-2), 130).unwrap();
        let err = evolve_rotor(&psi, &p, 0.0, p.default_dt(), 5000).unwrap_err();
        assert!(matches!(err, QtrajError::Truncation { .. }));
    }
}
