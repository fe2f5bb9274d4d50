//! Named experiments. Each one has a strict parameter block with complete
//! defaults, a validation pass that runs before any work, and a runner that
//! returns CSV tables and a JSON summary held in memory.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qtraj_core::decay::{self, MAX_GAMMA_ETA};
use qtraj_core::hyperion::{
    self, coherent_state, default_delta_x, ehrenfest_breakdown, husimi, integrate_classical, lyapunov, smooth_truncation, ClassicalRotorState,
    EhrenfestConfig, PhaseSpaceGrid, RotorEvolver, RotorParams,
};
use qtraj_core::measure::{born_probabilities, log_environment_overlap, noisy_splitter_ops, polarization, sample_outcome};
use qtraj_core::modal::{PointerModel, RateSchedule};
use qtraj_core::statmech::{self, IsingLattice, MAX_MC_DIM};
use qtraj_core::{c64, Complex64, OperatorMatrix, QtrajError, Result, RngStream, StateVector};

use crate::config::ScenarioKind;

/// Tables keyed by file name plus the summary document.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<(String, String)>,
    pub summary: Value,
}

fn e(v: f64) -> String {
    format!("{v:.17e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(e).unwrap_or_default()
}

fn cplx(pair: [f64; 2]) -> Complex64 {
    c64(pair[0], pair[1])
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(QtrajError::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn nonzero(name: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        Err(QtrajError::invalid(name, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round().max(1.0) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Polarization(PolarizationParams),
    ModalPointer(ModalPointerParams),
    DecayCounting(DecayCountingParams),
    DecayHomodyne(DecayHomodyneParams),
    HyperionClassical(HyperionClassicalParams),
    HyperionQuantum(HyperionQuantumParams),
    EhrenfestSweep(EhrenfestSweepParams),
    Ising(IsingParams),
    Thermalization(ThermalizationParams),
    TqHeadline(TqHeadlineParams),
}

pub fn parse_params(kind: ScenarioKind, text: &str) -> std::result::Result<Params, serde_json::Error> {
    Ok(match kind {
        ScenarioKind::Polarization => Params::Polarization(serde_json::from_str(text)?),
        ScenarioKind::ModalPointer => Params::ModalPointer(serde_json::from_str(text)?),
        ScenarioKind::DecayCounting => Params::DecayCounting(serde_json::from_str(text)?),
        ScenarioKind::DecayHomodyne => Params::DecayHomodyne(serde_json::from_str(text)?),
        ScenarioKind::HyperionClassical => Params::HyperionClassical(serde_json::from_str(text)?),
        ScenarioKind::HyperionQuantum => Params::HyperionQuantum(serde_json::from_str(text)?),
        ScenarioKind::EhrenfestSweep => Params::EhrenfestSweep(serde_json::from_str(text)?),
        ScenarioKind::Ising => Params::Ising(serde_json::from_str(text)?),
        ScenarioKind::Thermalization => Params::Thermalization(serde_json::from_str(text)?),
        ScenarioKind::TqHeadline => Params::TqHeadline(serde_json::from_str(text)?),
    })
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        match self {
            Params::Polarization(p) => p.validate(),
            Params::ModalPointer(p) => p.validate(),
            Params::DecayCounting(p) => p.validate(),
            Params::DecayHomodyne(p) => p.validate(),
            Params::HyperionClassical(p) => p.validate(),
            Params::HyperionQuantum(p) => p.validate(),
            Params::EhrenfestSweep(p) => p.validate(),
            Params::Ising(p) => p.validate(),
            Params::Thermalization(p) => p.validate(),
            Params::TqHeadline(p) => p.validate(),
        }
    }

    pub fn run(&self, seed: u64) -> Result<RunOutput> {
        self.validate()?;
        match self {
            Params::Polarization(p) => p.run(seed),
            Params::ModalPointer(p) => p.run(seed),
            Params::DecayCounting(p) => p.run(seed),
            Params::DecayHomodyne(p) => p.run(seed),
            Params::HyperionClassical(p) => p.run(),
            Params::HyperionQuantum(p) => p.run(),
            Params::EhrenfestSweep(p) => p.run(),
            Params::Ising(p) => p.run(seed),
            Params::Thermalization(p) => p.run(seed),
            Params::TqHeadline(p) => p.run(),
        }
    }
}

/// A photon through a polarizing splitter whose arms leak with probability `leakage`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarizationParams {
    /// Amplitude on `|h>` as `[re, im]`; the pair is normalized before use.
    pub c_h: [f64; 2],
    pub c_v: [f64; 2],
    pub leakage: f64,
    /// Environment degrees of freedom for the overlap `(1 - leakage)^n`.
    pub n_dof: u64,
    pub trials: usize,
}

impl Default for PolarizationParams {
    fn default() -> Self {
        Self { c_h: [0.6, 0.0], c_v: [0.8, 0.0], leakage: 0.0, n_dof: 1_000_000, trials: 10_000 }
    }
}

impl PolarizationParams {
    fn state(&self) -> Result<StateVector> {
        polarization::state(cplx(self.c_h), cplx(self.c_v))?.normalized()
    }

    fn validate(&self) -> Result<()> {
        nonzero("trials", self.trials)?;
        noisy_splitter_ops(self.leakage)?;
        self.state().map(|_| ())
    }

    fn run(&self, seed: u64) -> Result<RunOutput> {
        let psi = self.state()?;
        let ops = noisy_splitter_ops(self.leakage)?;
        let born = born_probabilities(&ops, &psi)?;
        let mut rng = RngStream::new(seed, 0);
        let mut counts = [0usize; 2];
        let mut csv = String::from("trial,outcome,label\n");
        for trial in 0..self.trials {
            let k = sample_outcome(&born, &mut rng)?;
            counts[k] += 1;
            csv.push_str(&format!("{trial},{k},{}\n", ["h", "v"][k]));
        }
        let n = self.trials as f64;
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let se: Vec<f64> = born.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
        let log_overlap = log_environment_overlap(self.leakage, self.n_dof)?;
        Ok(RunOutput {
            tables: vec![("outcomes.csv".into(), csv)],
            summary: json!({
                "born_probabilities": born,
                "frequencies": freqs,
                "standard_errors": se,
                "counts": counts,
                "log_environment_overlap": log_overlap,
                "environment_overlap": log_overlap.exp(),
            }),
        })
    }
}

/// Bell jump paths of the pointer model with overlap `exp(-(t/tau)^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModalPointerParams {
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub tau: f64,
    pub dt: f64,
    pub duration: f64,
    pub paths: usize,
    /// Grid steps between rows of the occupation table.
    pub record_every: usize,
}

impl Default for ModalPointerParams {
    fn default() -> Self {
        Self { c1: [0.7f64.sqrt(), 0.0], c2: [0.3f64.sqrt(), 0.0], tau: 1.0, dt: 0.002, duration: 8.0, paths: 2000, record_every: 50 }
    }
}

impl ModalPointerParams {
    fn validate(&self) -> Result<()> {
        PointerModel::new(cplx(self.c1), cplx(self.c2), self.tau)?;
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        nonzero("paths", self.paths)?;
        nonzero("record_every", self.record_every)
    }

    fn run(&self, seed: u64) -> Result<RunOutput> {
        let model = PointerModel::new(cplx(self.c1), cplx(self.c2), self.tau)?;
        let steps = steps_for(self.duration, self.dt);
        let schedule = RateSchedule::compute(&model.hamiltonian(), &model.cut(), &model.initial_state(), 0.0, self.dt, steps)?;
        let paths = schedule.sample_ensemble(self.paths, Some(0), seed)?;

        let mut transitions = String::from("path,t,from,to,rate\n");
        let mut last_transition: Option<f64> = None;
        for (k, p) in paths.iter().enumerate() {
            for tr in &p.rates_used {
                transitions.push_str(&format!("{k},{},{},{},{}\n", e(tr.t), tr.from, tr.to, e(tr.rate)));
                last_transition = Some(last_transition.map_or(tr.t, |l: f64| l.max(tr.t)));
            }
        }
        let mut occupation = String::from("t,weight_dominant,weight_other,occupation_dominant,occupation_other\n");
        for k in (0..=steps).step_by(self.record_every) {
            let t = schedule.time(k);
            let occ = RateSchedule::occupation(&paths, t, 2);
            let w = &schedule.probs[k];
            occupation.push_str(&format!("{},{},{},{},{}\n", e(t), e(w[0]), e(w[1]), e(occ[0]), e(occ[1])));
        }
        let t_end = schedule.time(steps);
        let finals = RateSchedule::occupation(&paths, t_end, 2);
        let (p_dom, p_other) = model.limits();
        let n = self.paths as f64;
        let sigma = (p_dom * p_other / n).sqrt();
        let late = paths.iter().flat_map(|p| &p.rates_used).filter(|tr| tr.t >= 5.0 * self.tau).count();
        Ok(RunOutput {
            tables: vec![("transitions.csv".into(), transitions), ("occupation.csv".into(), occupation)],
            summary: json!({
                "limits": [p_dom, p_other],
                "final_fractions": finals,
                "sigma": sigma,
                "z_score": if sigma > 0.0 { (finals[0] - p_dom) / sigma } else { 0.0 },
                "last_transition_time": last_transition,
                "transitions_after_5_tau": late,
                "total_transitions": paths.iter().map(|p| p.transition_count()).sum::<usize>(),
                "max_jump_prob": schedule.max_jump_prob,
                "antisymmetry_violations": schedule.antisymmetry_violations,
            }),
        })
    }
}

fn atom_hamiltonian(omega: f64) -> OperatorMatrix {
    OperatorMatrix::diagonal(&[0.0, omega])
}

fn check_window(gamma: f64, eta: f64) -> Result<()> {
    positive("gamma", gamma)?;
    positive("eta", eta)?;
    if gamma * eta > MAX_GAMMA_ETA {
        return Err(QtrajError::invalid("eta", format!("gamma * eta = {} exceeds {MAX_GAMMA_ETA}", gamma * eta)));
    }
    Ok(())
}

fn population_table(stats: &decay::EnsembleStats, gamma: f64) -> (String, f64) {
    let mut csv = String::from("t,mean_excited,standard_error,exact,survival\n");
    let mut max_z: f64 = 0.0;
    for (s, &t) in stats.sample_times.iter().enumerate() {
        let (m, se) = stats.mean_population(s);
        let exact = (-2.0 * gamma * t).exp();
        if se > 0.0 {
            max_z = max_z.max((m - exact).abs() / se);
        }
        csv.push_str(&format!("{},{},{},{},{}\n", e(t), e(m), e(se), e(exact), e(stats.survival(t))));
    }
    (csv, max_z)
}

/// Photon counting on an atom prepared in its excited state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayCountingParams {
    pub gamma: f64,
    pub eta: f64,
    /// Atomic splitting in the rotating frame.
    pub omega: f64,
    pub paths: usize,
    /// Defaults to `5 / gamma`.
    pub duration: Option<f64>,
    /// End of the survival fit window; defaults to `3 / gamma`.
    pub fit_until: Option<f64>,
    pub sample_every: usize,
}

impl Default for DecayCountingParams {
    fn default() -> Self {
        Self { gamma: 0.5, eta: 0.01, omega: 0.0, paths: 10_000, duration: None, fit_until: None, sample_every: 10 }
    }
}

impl DecayCountingParams {
    fn validate(&self) -> Result<()> {
        check_window(self.gamma, self.eta)?;
        nonzero("paths", self.paths)?;
        nonzero("sample_every", self.sample_every)?;
        if let Some(d) = self.duration {
            positive("duration", d)?;
        }
        if let Some(f) = self.fit_until {
            positive("fit_until", f)?;
        }
        decay::photon_counting_ops(self.gamma, self.eta, &atom_hamiltonian(self.omega)).map(|_| ())
    }

    fn run(&self, seed: u64) -> Result<RunOutput> {
        let ops = decay::photon_counting_ops(self.gamma, self.eta, &atom_hamiltonian(self.omega))?;
        let duration = self.duration.unwrap_or(5.0 / self.gamma);
        let fit_until = self.fit_until.unwrap_or(3.0 / self.gamma);
        let steps = steps_for(duration, self.eta);
        let stats = decay::unravel_ensemble(&ops, &decay::excited(), steps, self.eta, self.paths, seed, self.sample_every)?;
        let horizon = steps as f64 * self.eta;
        let expected = 2.0 * self.gamma;
        let rate = decay::fit_exponential_rate(&stats.first_click, horizon);
        let survival_rate = decay::fit_survival_rate(&stats, fit_until);
        let ks = decay::ks_exponential(&stats.first_click, expected, self.eta, steps);

        let mut jumps = String::from("path,first_click_time,click_count\n");
        for (k, (tc, n)) in stats.first_click.iter().zip(&stats.click_counts).enumerate() {
            jumps.push_str(&format!("{k},{},{n}\n", opt(*tc)));
        }
        let (population, max_z) = population_table(&stats, self.gamma);
        Ok(RunOutput {
            tables: vec![("jump_times.csv".into(), jumps), ("population.csv".into(), population)],
            summary: json!({
                "expected_rate": expected,
                "fitted_rate": rate,
                "fitted_rate_relative_error": (rate - expected).abs() / expected,
                "survival_fit_rate": survival_rate,
                "survival_fit_relative_error": (survival_rate - expected).abs() / expected,
                "survival_fit_until": fit_until,
                "ks": ks,
                "clicked_paths": stats.first_click.iter().flatten().count(),
                "horizon": horizon,
                "max_population_z": max_z,
                "max_norm_error": stats.max_norm_error,
                "completeness_residual": decay::completeness_residual(&ops),
            }),
        })
    }
}

/// Homodyne unraveling with local-oscillator amplitude `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayHomodyneParams {
    pub gamma: f64,
    pub eta: f64,
    pub omega: f64,
    /// `[re, im]`.
    pub beta: [f64; 2],
    pub paths: usize,
    /// Defaults to `3 / gamma`.
    pub duration: Option<f64>,
    pub sample_every: usize,
}

impl Default for DecayHomodyneParams {
    fn default() -> Self {
        Self { gamma: 0.5, eta: 0.01, omega: 0.0, beta: [1.0, 0.0], paths: 1000, duration: None, sample_every: 10 }
    }
}

impl DecayHomodyneParams {
    fn ops(&self) -> Result<qtraj_core::PovmSet> {
        decay::homodyne_ops(self.gamma, self.eta, cplx(self.beta), &atom_hamiltonian(self.omega))
    }

    fn validate(&self) -> Result<()> {
        check_window(self.gamma, self.eta)?;
        nonzero("paths", self.paths)?;
        nonzero("sample_every", self.sample_every)?;
        if let Some(d) = self.duration {
            positive("duration", d)?;
        }
        self.ops().map(|_| ())
    }

    fn run(&self, seed: u64) -> Result<RunOutput> {
        let ops = self.ops()?;
        let steps = steps_for(self.duration.unwrap_or(3.0 / self.gamma), self.eta);
        let stats = decay::unravel_ensemble(&ops, &decay::excited(), steps, self.eta, self.paths, seed, self.sample_every)?;
        let (population, max_z) = population_table(&stats, self.gamma);
        let (qv, qv_se) = stats.mean_quadratic_variation();
        let mut per_path = String::from("path,quadratic_variation,click_count\n");
        for (k, (q, n)) in stats.quadratic_variation.iter().zip(&stats.click_counts).enumerate() {
            per_path.push_str(&format!("{k},{},{n}\n", e(*q)));
        }
        Ok(RunOutput {
            tables: vec![("population.csv".into(), population), ("paths.csv".into(), per_path)],
            summary: json!({
                "beta": self.beta,
                "max_population_z": max_z,
                "mean_quadratic_variation": qv,
                "quadratic_variation_standard_error": qv_se,
                "max_norm_error": stats.max_norm_error,
                "completeness_residual": decay::completeness_residual(&ops),
            }),
        })
    }
}

/// Classical spin-orbit trajectory plus its largest Lyapunov exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperionClassicalParams {
    pub rotor: RotorParams,
    pub phi0: f64,
    pub ell0: f64,
    pub t0: f64,
    pub duration: f64,
    /// Defaults to `period / 500`.
    pub dt: Option<f64>,
    pub lyapunov_duration: f64,
}

impl Default for HyperionClassicalParams {
    fn default() -> Self {
        Self { rotor: RotorParams::chaotic_demo(), phi0: 0.1, ell0: 1.0, t0: 0.0, duration: 100.0, dt: None, lyapunov_duration: 4000.0 }
    }
}

impl HyperionClassicalParams {
    fn validate(&self) -> Result<()> {
        self.rotor.validate()?;
        positive("duration", self.duration)?;
        positive("lyapunov_duration", self.lyapunov_duration)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
            if dt > self.rotor.default_dt() {
                return Err(QtrajError::invalid("dt", format!("must not exceed period / 500 = {}", self.rotor.default_dt())));
            }
        }
        if !(self.phi0.is_finite() && self.ell0.is_finite() && self.t0.is_finite()) {
            return Err(QtrajError::invalid("phi0", "initial state and time must be finite"));
        }
        Ok(())
    }

    fn run(&self) -> Result<RunOutput> {
        let s0 = ClassicalRotorState::new(self.phi0, self.ell0);
        let dt = self.dt.unwrap_or(self.rotor.default_dt());
        let traj = integrate_classical(&self.rotor, s0, (self.t0, self.t0 + self.duration), dt)?;
        let lyap = lyapunov(&self.rotor, s0, self.lyapunov_duration)?;
        Ok(RunOutput {
            tables: vec![("trajectory.csv".into(), traj.to_csv())],
            summary: json!({
                "lyapunov": lyap,
                "final_state": traj.last(),
                "max_abs_ell": traj.max_abs_ell(),
                "steps": traj.times.len() - 1,
            }),
        })
    }
}

/// Coherent rotor packet under split-step evolution next to its classical orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperionQuantumParams {
    pub rotor: RotorParams,
    pub x: f64,
    pub p: f64,
    /// Defaults to `rotor.hbar_eff`.
    pub hbar: Option<f64>,
    /// Defaults to `sqrt(hbar / 2)`.
    pub delta_x: Option<f64>,
    /// Largest `|m|` kept; chosen from the classical orbit when absent.
    pub truncation: Option<usize>,
    pub duration: f64,
    /// Defaults to `period / 500`.
    pub dt: Option<f64>,
    pub record_every: usize,
    pub husimi: bool,
    /// Momentum window `[p_min, p_max]` of the final Husimi map.
    pub husimi_p_range: [f64; 2],
}

impl Default for HyperionQuantumParams {
    fn default() -> Self {
        Self {
            rotor: RotorParams::chaotic_demo(),
            x: 0.1,
            p: 1.0,
            hbar: None,
            delta_x: None,
            truncation: None,
            duration: 30.0,
            dt: None,
            record_every: 25,
            husimi: true,
            husimi_p_range: [-1.0, 3.0],
        }
    }
}

impl HyperionQuantumParams {
    fn hbar(&self) -> f64 {
        self.hbar.unwrap_or(self.rotor.hbar_eff)
    }

    fn delta_x(&self) -> f64 {
        self.delta_x.unwrap_or_else(|| default_delta_x(self.hbar()))
    }

    fn validate(&self) -> Result<()> {
        self.rotor.validate()?;
        positive("hbar", self.hbar())?;
        positive("delta_x", self.delta_x())?;
        positive("duration", self.duration)?;
        nonzero("record_every", self.record_every)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if let Some(m) = self.truncation {
            nonzero("truncation", m)?;
        }
        if !(self.husimi_p_range[0] < self.husimi_p_range[1]) {
            return Err(QtrajError::invalid("husimi_p_range", "needs p_min < p_max"));
        }
        if !(self.x.is_finite() && self.p.is_finite()) {
            return Err(QtrajError::invalid("x", "packet centre must be finite"));
        }
        Ok(())
    }

    fn run(&self) -> Result<RunOutput> {
        let (hbar, delta_x) = (self.hbar(), self.delta_x());
        let dt = self.dt.unwrap_or(self.rotor.default_dt());
        let steps = steps_for(self.duration, dt);
        let classical = integrate_classical(&self.rotor, ClassicalRotorState::new(self.x, self.p), (0.0, steps as f64 * dt), dt)?;
        let sigma_ell = hbar / (2.0 * delta_x);
        let truncation = self.truncation.unwrap_or_else(|| {
            let reach = classical.max_abs_ell().max(self.p.abs()) + 1.0 + 8.0 * sigma_ell;
            smooth_truncation((reach / hbar).ceil() as usize)
        });
        let mut psi = coherent_state(self.x, self.p, hbar, delta_x, truncation)?;
        let mut evolver = RotorEvolver::new(&self.rotor, truncation, hbar, dt)?;
        let mut csv = String::from("t,quantum_phi,quantum_ell,classical_phi,classical_ell,angle_spread,tail_mass\n");
        let mut max_angle_gap: f64 = 0.0;
        let mut row = |k: usize, t: f64, w: &hyperion::RotorWavefunction| {
            let c = classical.states[k.min(classical.states.len() - 1)];
            let q_phi = w.mean_angle();
            max_angle_gap = max_angle_gap.max(hyperion::angle_distance(q_phi, c.phi));
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e(t),
                e(q_phi),
                e(w.mean_ell()),
                e(c.phi),
                e(c.ell),
                e(w.husimi_angle_spread(delta_x)),
                e(w.tail_mass())
            ));
        };
        row(0, 0.0, &psi);
        evolver.run(&mut psi, 0.0, steps, |k, t, w| {
            if k % self.record_every == 0 || k == steps {
                row(k, t, w);
            }
            true
        })?;
        let mut tables = vec![("trajectory.csv".into(), csv)];
        let mut husimi_total = None;
        if self.husimi {
            let grid = PhaseSpaceGrid::husimi_resolution(hbar, delta_x, self.husimi_p_range[0], self.husimi_p_range[1])?;
            let q = husimi(&psi, &grid)?;
            husimi_total = Some(q.total_probability());
            tables.push(("husimi.csv".into(), q.to_csv()));
        }
        Ok(RunOutput {
            tables,
            summary: json!({
                "hbar": hbar,
                "delta_x": delta_x,
                "truncation": truncation,
                "steps": steps,
                "max_angle_gap": max_angle_gap,
                "final_mean_angle": psi.mean_angle(),
                "final_mean_ell": psi.mean_ell(),
                "final_tail_mass": psi.tail_mass(),
                "norm_error": (psi.state().norm() - 1.0).abs(),
                "husimi_window_probability": husimi_total,
            }),
        })
    }
}

/// Breakdown-time sweep over `hbars` and the log versus power-law comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EhrenfestSweepParams {
    pub rotor: RotorParams,
    pub hbars: Vec<f64>,
    pub threshold: f64,
    pub sweep: EhrenfestConfig,
}

impl Default for EhrenfestSweepParams {
    fn default() -> Self {
        Self {
            rotor: RotorParams::chaotic_demo(),
            hbars: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            threshold: 0.3,
            sweep: EhrenfestConfig::default(),
        }
    }
}

impl EhrenfestSweepParams {
    fn validate(&self) -> Result<()> {
        self.rotor.validate()?;
        positive("threshold", self.threshold)?;
        if self.hbars.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(QtrajError::invalid("hbars", "every value must be positive"));
        }
        let (lo, hi) = self.hbars.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        if self.hbars.len() < 4 || hi / lo < 100.0 * (1.0 - 1e-9) {
            return Err(QtrajError::invalid("hbars", "need at least 4 values spanning two decades"));
        }
        nonzero("sweep.launch_count", self.sweep.launch_count)
    }

    fn run(&self) -> Result<RunOutput> {
        let report = ehrenfest_breakdown(&self.rotor, &self.hbars, self.threshold, &self.sweep)?;
        let mut csv = String::from("hbar,t_spread,t_discrepancy,spread_censored,discrepancy_censored,truncation\n");
        for pt in &report.points {
            let m = pt.packets.iter().map(|p| p.truncation).max().unwrap_or(0);
            csv.push_str(&format!(
                "{},{},{},{},{},{m}\n",
                e(pt.hbar),
                opt(pt.t_spread),
                opt(pt.t_discrepancy),
                pt.spread_censored,
                pt.discrepancy_censored
            ));
        }
        let headline = json!({
            "lambda": report.lyapunov.lambda_max,
            "t_c": report.lyapunov.t_c,
            "log_fit_slope": report.spread.as_ref().map(|s| s.log_fit.slope),
            "log_fit_r_squared": report.spread.as_ref().map(|s| s.log_fit.r_squared),
            "log_preferred": report.spread.as_ref().map(|s| s.log_preferred),
            "slope_ratio": report.slope_ratio,
        });
        Ok(RunOutput { tables: vec![("breakdown.csv".into(), csv)], summary: json!({ "headline": headline, "report": report }) })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsingStart {
    Up,
    #[default]
    Random,
}

/// Glauber dynamics on an `l x l` periodic lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsingParams {
    pub l: usize,
    pub temperature: f64,
    pub sweeps: usize,
    pub start: IsingStart,
    /// Blocks for the standard error of the mean magnetization.
    pub blocks: usize,
}

impl Default for IsingParams {
    fn default() -> Self {
        Self { l: 16, temperature: 5.0, sweeps: 10_000, start: IsingStart::Random, blocks: 20 }
    }
}

impl IsingParams {
    fn validate(&self) -> Result<()> {
        IsingLattice::all_up(self.l, self.temperature)?;
        nonzero("sweeps", self.sweeps)?;
        nonzero("blocks", self.blocks)?;
        if self.blocks > self.sweeps {
            return Err(QtrajError::invalid("blocks", "cannot exceed the number of sweeps"));
        }
        Ok(())
    }

    fn run(&self, seed: u64) -> Result<RunOutput> {
        let mut rng = RngStream::new(seed, 0);
        let mut lattice = match self.start {
            IsingStart::Up => IsingLattice::all_up(self.l, self.temperature)?,
            IsingStart::Random => IsingLattice::random(self.l, self.temperature, &mut rng)?,
        };
        let series = statmech::simulate_ising(&mut lattice, self.sweeps, &mut rng);
        let (mean, se) = series.blocked_mean(self.blocks);
        Ok(RunOutput {
            tables: vec![("magnetization.csv".into(), series.to_csv())],
            summary: json!({
                "mean_magnetization": mean,
                "standard_error": se,
                "min_magnetization": series.min(),
                "sign_changes": series.sign_changes(),
                "final_energy": lattice.energy(),
            }),
        })
    }
}

/// Random micro-canonical Hamiltonian split into coordinate sectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalizationParams {
    pub sectors: Vec<usize>,
    pub duration: f64,
    /// Sample times on `[0, duration]`; the second half forms the long-time average.
    pub samples: usize,
    pub dt: f64,
    pub bell_paths: usize,
    pub block_diagonal_control: bool,
}

impl Default for ThermalizationParams {
    fn default() -> Self {
        Self { sectors: vec![100, 150, 250], duration: 20.0, samples: 401, dt: 0.005, bell_paths: 20, block_diagonal_control: true }
    }
}

impl ThermalizationParams {
    fn validate(&self) -> Result<()> {
        if self.sectors.is_empty() || self.sectors.contains(&0) {
            return Err(QtrajError::invalid("sectors", "need at least one non-empty sector"));
        }
        let d: usize = self.sectors.iter().sum();
        if d > MAX_MC_DIM {
            return Err(QtrajError::invalid("sectors", format!("total dimension {d} exceeds {MAX_MC_DIM}")));
        }
        positive("duration", self.duration)?;
        positive("dt", self.dt)?;
        nonzero("bell_paths", self.bell_paths)?;
        if self.samples < 2 {
            return Err(QtrajError::invalid("samples", "need at least 2"));
        }
        Ok(())
    }

    fn run(&self, seed: u64) -> Result<RunOutput> {
        let d: usize = self.sectors.iter().sum();
        let model = statmech::build_microcanonical(d, &self.sectors, &mut RngStream::new(seed, u64::MAX))?;
        let psi = StateVector::random(d, &mut RngStream::new(seed, u64::MAX - 1))?;
        let times: Vec<f64> = (0..self.samples).map(|k| self.duration * k as f64 / (self.samples - 1) as f64).collect();
        let series = statmech::thermal_expectations(&model, &psi, &times)?;
        let targets = model.microcanonical_fractions();
        let tolerance = 5.0 / (d as f64).sqrt();
        let max_deviation = series.long_time_average.iter().zip(&targets).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let pr = model.participation_ratios();
        let bell = statmech::bell_ergodicity_check(&model, &psi, self.duration, self.dt, self.bell_paths, seed)?;
        let control = if self.block_diagonal_control {
            let blocked = model.block_diagonal()?;
            let r = statmech::bell_ergodicity_check(&blocked, &psi, self.duration, self.dt, self.bell_paths, seed)?;
            Some(json!({
                "cross_sector_transitions": r.report.cross_sector_transitions,
                "total_transitions": r.report.total_transitions,
                "sector_fractions": r.report.sector_fractions,
            }))
        } else {
            None
        };
        Ok(RunOutput {
            tables: vec![("sector_weights.csv".into(), series.to_csv())],
            summary: json!({
                "d_mc": d,
                "targets": targets,
                "long_time_average": series.long_time_average,
                "tolerance": tolerance,
                "max_deviation": max_deviation,
                "max_sum_error": series.max_sum_error,
                "mean_participation_ratio": pr.iter().sum::<f64>() / pr.len() as f64,
                "bell": {
                    "sector_fractions": bell.report.sector_fractions,
                    "standard_errors": bell.report.sector_standard_errors,
                    "z_scores": bell.z_scores,
                    "within_3_sigma": bell.within_sigma(3.0),
                    "total_transitions": bell.report.total_transitions,
                    "max_jump_prob": bell.max_jump_prob,
                },
                "block_diagonal_control": control,
            }),
        })
    }
}

/// Classicality time of a tumbling moon in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TqHeadlineParams {
    pub t_c_days: f64,
    pub radius_m: f64,
    pub mass_kg: f64,
    pub temperature_k: f64,
}

impl Default for TqHeadlineParams {
    fn default() -> Self {
        Self { t_c_days: 100.0, radius_m: 1.4e5, mass_kg: 1e19, temperature_k: 100.0 }
    }
}

impl TqHeadlineParams {
    fn compute(&self) -> Result<hyperion::TqHeadline> {
        hyperion::tq_headline(self.t_c_days * hyperion::units::SECONDS_PER_DAY, self.radius_m, self.mass_kg, self.temperature_k)
    }

    fn validate(&self) -> Result<()> {
        self.compute().map(|_| ())
    }

    fn run(&self) -> Result<RunOutput> {
        let h = self.compute()?;
        let csv = format!(
            "quantity,value,unit\nt_c,{},s\nradius,{},m\nmass,{},kg\ntemperature,{},K\nde_broglie,{},m\nlog_factor,{},1\nt_q,{},s\nt_q,{},yr\n",
            e(self.t_c_days * hyperion::units::SECONDS_PER_DAY),
            e(self.radius_m),
            e(self.mass_kg),
            e(self.temperature_k),
            e(h.de_broglie_m),
            e(h.log_factor),
            e(h.t_q_seconds),
            e(h.t_q_years)
        );
        Ok(RunOutput { tables: vec![("tq_headline.csv".into(), csv)], summary: serde_json::to_value(h).expect("plain numbers") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_has_valid_defaults() {
        for kind in ScenarioKind::ALL {
            let p = parse_params(kind, "{}").unwrap();
            p.validate().unwrap_or_else(|e| panic!("{kind}: {e}"));
        }
    }

    #[test]
    fn resolved_params_reparse_identically() {
        for kind in ScenarioKind::ALL {
            let p = parse_params(kind, "{}").unwrap();
            let text = serde_json::to_string(&p).unwrap();
            assert_eq!(parse_params(kind, &text).unwrap(), p, "{kind}");
        }
    }

    #[test]
    fn window_guard_rejects_coarse_steps() {
        let p = DecayCountingParams { eta: 0.2, ..Default::default() };
        assert!(matches!(p.validate(), Err(QtrajError::InvalidParameter { name: "eta", .. })));
    }

    #[test]
    fn tq_headline_is_in_years() {
        let out = TqHeadlineParams::default().run().unwrap();
        let years = out.summary["t_q_years"].as_f64().unwrap();
        assert!((21.0..=27.0).contains(&years), "{years}");
        assert!(out.tables[0].1.starts_with("quantity,value,unit\n"));
    }

    #[test]
    fn polarization_frequencies_follow_born_rule() {
        let out = PolarizationParams { trials: 4000, ..Default::default() }.run(3).unwrap();
        let f = out.summary["frequencies"][1].as_f64().unwrap();
        assert!((f - 0.64).abs() < 4.0 * (0.64f64 * 0.36 / 4000.0).sqrt(), "{f}");
    }
}
