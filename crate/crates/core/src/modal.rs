//! Local states of a Copenhagen cut, the pointer-overlap two-outcome model,
//! Bell transition rates and the Markov jump process they define.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};
use crate::qcore::{c64, tol, Complex64, OperatorMatrix, PovmKind, PovmSet, Propagator, RngStream, StateVector};

/// A quasi-classical POVM that fixes which local states are realized.
#[derive(Clone, Debug)]
pub struct CutSpec {
    povm: PovmSet,
    degenerate_tol: f64,
}

impl CutSpec {
    pub const COMPLETENESS_TOL: f64 = 1e-8;

    pub fn new(povm: PovmSet, degenerate_tol: f64) -> Result<Self> {
        if povm.kind() != PovmKind::Effects {
            return Err(QtrajError::invalid("povm", "a cut is specified by effects"));
        }
        let d = povm.dim();
        let mut total = OperatorMatrix::zeros(d);
        for e in povm.effects() {
            total = &total + e;
        }
        let residual = total.max_abs_diff(&OperatorMatrix::identity(d))?;
        if residual >= Self::COMPLETENESS_TOL {
            return Err(QtrajError::invalid("povm", format!("completeness residual {residual:e}")));
        }
        if !(degenerate_tol >= 0.0) {
            return Err(QtrajError::invalid("degenerate_tol", "must be non-negative"));
        }
        Ok(Self { povm, degenerate_tol })
    }

    /// Projectors onto consecutive coordinate blocks of the given sizes.
    pub fn coordinate_blocks(sizes: &[usize], degenerate_tol: f64) -> Result<Self> {
        let d: usize = sizes.iter().sum();
        let mut start = 0;
        let mut elements = Vec::with_capacity(sizes.len());
        for &n in sizes {
            if n == 0 {
                return Err(QtrajError::invalid("sizes", "empty block"));
            }
            elements.push(OperatorMatrix::basis_projector(d, start..start + n));
            start += n;
        }
        Self::new(PovmSet::effects_from(elements)?, degenerate_tol)
    }

    pub fn povm(&self) -> &PovmSet {
        &self.povm
    }

    pub fn len(&self) -> usize {
        self.povm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.povm.dim()
    }

    pub fn degenerate_tol(&self) -> f64 {
        self.degenerate_tol
    }
}

/// Unnormalized local states `Psi_i = Pi_i Psi` with their weights.
#[derive(Clone, Debug)]
pub struct LocalDecomposition {
    pub local_states: Vec<StateVector>,
    pub probs: Vec<f64>,
    pub degenerate_flag: bool,
}

impl LocalDecomposition {
    pub fn reconstruct(&self) -> StateVector {
        let mut acc = self.local_states[0].clone();
        for s in &self.local_states[1..] {
            acc = acc.add(s).expect("local states share a dimension");
        }
        acc
    }

    /// Normalized local state, for presentation only.
    pub fn normalized(&self, i: usize) -> Result<StateVector> {
        self.local_states[i].clone().normalized()
    }
}

pub fn local_states(cut: &CutSpec, psi: &StateVector) -> Result<LocalDecomposition> {
    psi.ensure_normalized()?;
    let local_states: Vec<StateVector> = cut.povm.effects().iter().map(|p| p.apply(psi)).collect::<Result<_>>()?;
    let probs: Vec<f64> = cut.povm.effects().iter().map(|p| Ok(p.expectation(psi)?.re.max(0.0))).collect::<Result<_>>()?;
    let degenerate_flag = (0..probs.len()).any(|i| ((i + 1)..probs.len()).any(|j| (probs[i] - probs[j]).abs() < cut.degenerate_tol));
    Ok(LocalDecomposition { local_states, probs, degenerate_flag })
}

/// Result of the two-outcome pointer-overlap formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerProbs {
    pub p1: f64,
    pub p2: f64,
    /// `|c1|^2 == |c2|^2`: the larger root was assigned to outcome 1 by convention.
    pub degenerate: bool,
}

/// `p = (1 +- sqrt(1 - 4|c1|^2|c2|^2 (F-1)^2)) / 2`, the `+` root going to
/// the outcome with the larger weight.
pub fn pointer_overlap_probs(c1: Complex64, c2: Complex64, f: f64) -> Result<PointerProbs> {
    if !(0.0..=1.0).contains(&f) {
        return Err(QtrajError::invalid("F", format!("{f} is outside [0, 1]")));
    }
    let (a, b) = (c1.norm_sqr(), c2.norm_sqr());
    if (a + b - 1.0).abs() > tol::ALGEBRAIC {
        return Err(QtrajError::Unnormalized { norm: (a + b).sqrt() });
    }
    let disc = (1.0 - 4.0 * a * b * (f - 1.0).powi(2)).max(0.0);
    let big = 0.5 * (1.0 + disc.sqrt());
    let small = 1.0 - big;
    let degenerate = a == b;
    Ok(if a >= b {
        PointerProbs { p1: big, p2: small, degenerate }
    } else {
        PointerProbs { p1: small, p2: big, degenerate }
    })
}

/// Bell transition rates between local states.
#[derive(Clone, Debug)]
pub struct RateMatrix {
    /// `rates[(j, i)]` is the rate for the jump `i -> j`.
    pub rates: DMatrix<f64>,
    /// States with weight below the occupation floor; their outgoing rates are zero.
    pub unoccupied: Vec<usize>,
}

impl RateMatrix {
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(to, from)]
    }

    pub fn exit_rate(&self, from: usize) -> f64 {
        (0..self.rates.nrows()).filter(|&j| j != from).map(|j| self.rates[(j, from)]).sum()
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.rates.ncols()).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    /// Number of pairs with both directions positive; zero by construction.
    pub fn antisymmetry_violations(&self) -> usize {
        let n = self.rates.nrows();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| self.rates[(i, j)].min(self.rates[(j, i)]) != 0.0).count()
    }

    /// Master-equation right-hand side `sum_j (T_ij p_j - T_ji p_i)`.
    pub fn flow(&self, probs: &[f64]) -> Vec<f64> {
        let n = probs.len();
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| self.rates[(i, j)] * probs[j] - self.rates[(j, i)] * probs[i]).sum())
            .collect()
    }

    /// Stationary distribution of the jump chain, by a dense linear solve.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.rates.nrows();
        let mut gen = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    gen[(i, j)] = self.rates[(i, j)];
                    gen[(j, j)] -= self.rates[(i, j)];
                }
            }
        }
        for j in 0..n {
            gen[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        gen.lu().solve(&rhs).map(|v| v.iter().copied().collect()).ok_or(QtrajError::NonConvergence { what: "stationary solve", iterations: 1 })
    }
}

/// `Im <Psi_j|H|Psi_i>`, made exactly antisymmetric.
pub fn current_matrix(h: &OperatorMatrix, decomp: &LocalDecomposition) -> Result<DMatrix<f64>> {
    let n = decomp.local_states.len();
    let h_psi: Vec<StateVector> = decomp.local_states.iter().map(|s| h.apply(s)).collect::<Result<_>>()?;
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = decomp.local_states[a].inner(&h_psi[b])?.im;
            j[(a, b)] = v;
            j[(b, a)] = -v;
        }
    }
    Ok(j)
}

/// `T_ji = 2 max(Im<Psi_j|H|Psi_i> / p_i, 0)` with hbar = 1.
pub fn bell_rates(h: &OperatorMatrix, decomp: &LocalDecomposition) -> Result<RateMatrix> {
    h.ensure_hermitian()?;
    if let Some(i) = decomp.probs.iter().position(|&p| p < 0.0) {
        return Err(QtrajError::NegativeProbability { outcome: i, value: decomp.probs[i] });
    }
    let current = current_matrix(h, decomp)?;
    Ok(rates_from_current(&current, &decomp.probs))
}

fn rates_from_current(current: &DMatrix<f64>, probs: &[f64]) -> RateMatrix {
    let n = probs.len();
    let mut rates = DMatrix::zeros(n, n);
    let mut unoccupied = Vec::new();
    for i in 0..n {
        if probs[i] < tol::OCCUPIED {
            unoccupied.push(i);
            continue;
        }
        for j in 0..n {
            if j != i && current[(j, i)] > 0.0 {
                rates[(j, i)] = 2.0 * current[(j, i)] / probs[i];
            }
        }
    }
    RateMatrix { rates, unoccupied }
}

/// A possibly time-dependent hamiltonian.
#[derive(Clone)]
pub enum Hamiltonian {
    Static(OperatorMatrix),
    Dynamic { dim: usize, at: Arc<dyn Fn(f64) -> OperatorMatrix + Send + Sync> },
}

impl Hamiltonian {
    pub fn dynamic(dim: usize, f: impl Fn(f64) -> OperatorMatrix + Send + Sync + 'static) -> Self {
        Hamiltonian::Dynamic { dim, at: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Static(h) => h.dim(),
            Hamiltonian::Dynamic { dim, .. } => *dim,
        }
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        match self {
            Hamiltonian::Static(h) => h.clone(),
            Hamiltonian::Dynamic { at, .. } => at(t),
        }
    }
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hamiltonian::Static(h) => f.debug_tuple("Static").field(&h.dim()).finish(),
            Hamiltonian::Dynamic { dim, .. } => f.debug_struct("Dynamic").field("dim", dim).finish(),
        }
    }
}

/// The deterministic part of a Bell process: the global state's local
/// weights on the time grid and the rates at every step midpoint.
///
/// Computing it once lets any number of jump paths share the Schrödinger
/// evolution.
#[derive(Clone, Debug)]
pub struct RateSchedule {
    pub t0: f64,
    pub dt: f64,
    /// `probs[k][i]` at `t0 + k dt`, for `k = 0..=steps`.
    pub probs: Vec<Vec<f64>>,
    /// Rates at `t0 + (k + 1/2) dt`.
    pub rates: Vec<RateMatrix>,
    pub antisymmetry_violations: usize,
    /// Largest `exit rate * dt` of any state at any step.
    pub max_jump_prob: f64,
}

impl RateSchedule {
    pub fn compute(h: &Hamiltonian, cut: &CutSpec, psi0: &StateVector, t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QtrajError::invalid("dt", "must be positive and finite"));
        }
        psi0.ensure_normalized()?;
        psi0.check_dim(cut.dim())?;
        if h.dim() != cut.dim() {
            return Err(QtrajError::DimensionMismatch { expected: cut.dim(), found: h.dim() });
        }
        let mut probs = Vec::with_capacity(steps + 1);
        let mut rates = Vec::with_capacity(steps);
        let mut psi = psi0.clone();
        probs.push(local_states(cut, &psi)?.probs);
        let record = |psi_mid: &StateVector, h_mid: &OperatorMatrix, rates: &mut Vec<RateMatrix>| -> Result<()> {
            let decomp = local_states(cut, psi_mid)?;
            rates.push(bell_rates(h_mid, &decomp)?);
            Ok(())
        };
        match h {
            Hamiltonian::Static(h0) => {
                let prop = Propagator::new(h0)?;
                for _ in 0..steps {
                    let mid = prop.apply(&psi, 0.5 * dt)?.normalized()?;
                    record(&mid, h0, &mut rates)?;
                    psi = prop.apply(&mid, 0.5 * dt)?.normalized()?;
                    probs.push(local_states(cut, &psi)?.probs);
                }
            }
            Hamiltonian::Dynamic { .. } => {
                for k in 0..steps {
                    let t = t0 + k as f64 * dt;
                    let h_a = h.at(t + 0.25 * dt);
                    let h_m = h.at(t + 0.5 * dt);
                    let h_b = h.at(t + 0.75 * dt);
                    let mid = Propagator::new(&h_a)?.apply(&psi, 0.5 * dt)?.normalized()?;
                    record(&mid, &h_m, &mut rates)?;
                    psi = Propagator::new(&h_b)?.apply(&mid, 0.5 * dt)?.normalized()?;
                    probs.push(local_states(cut, &psi)?.probs);
                }
            }
        }
        let antisymmetry_violations = rates.iter().map(|r| r.antisymmetry_violations()).sum();
        let max_jump_prob = rates.iter().map(|r| r.max_exit_rate() * dt).fold(0.0, f64::max);
        Ok(Self { t0, dt, probs, rates, antisymmetry_violations, max_jump_prob })
    }

    pub fn steps(&self) -> usize {
        self.rates.len()
    }

    pub fn n_states(&self) -> usize {
        self.probs[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Samples one jump path starting in local state `j0`.
    pub fn sample_path(&self, j0: usize, rng: &mut RngStream) -> Result<ModalPath> {
        let n = self.n_states();
        if j0 >= n {
            return Err(QtrajError::DimensionMismatch { expected: n, found: j0 + 1 });
        }
        let mut path = ModalPath::start(self.t0, j0);
        let mut j = j0;
        for (k, r) in self.rates.iter().enumerate() {
            let exit = r.exit_rate(j) * self.dt;
            let t_mid = self.time(k) + 0.5 * self.dt;
            if exit >= 1.0 {
                return Err(QtrajError::StepTooLarge { prob: exit, time: t_mid });
            }
            path.max_jump_prob = path.max_jump_prob.max(exit);
            let u = rng.uniform();
            if u < exit {
                let mut acc = 0.0;
                let mut target = j;
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    acc += r.rate(j, i) * self.dt;
                    if u < acc {
                        target = i;
                        break;
                    }
                }
                if target == j {
                    target = (0..n).rev().find(|&i| i != j && r.rate(j, i) > 0.0).unwrap_or(j);
                }
                path.jump(self.time(k + 1), j, target, r.rate(j, target));
                j = target;
            }
        }
        path.t_end = self.time(self.steps());
        Ok(path)
    }

    /// Samples `n_paths` paths in parallel with streams `0..n_paths`.
    ///
    /// When `j0` is `None` each path draws its start from the initial weights.
    pub fn sample_ensemble(&self, n_paths: usize, j0: Option<usize>, seed: u64) -> Result<Vec<ModalPath>> {
        (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = RngStream::new(seed, p as u64);
                let start = match j0 {
                    Some(j) => j,
                    None => crate::measure::sample_outcome(&self.probs[0], &mut rng)?,
                };
                self.sample_path(start, &mut rng)
            })
            .collect()
    }

    /// Fraction of paths in each state at grid index `k`.
    pub fn occupation(paths: &[ModalPath], t: f64, n_states: usize) -> Vec<f64> {
        let mut counts = vec![0usize; n_states];
        for p in paths {
            counts[p.index_at(t)] += 1;
        }
        counts.iter().map(|&c| c as f64 / paths.len() as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// A realized jump path `j(t)` stored as a step function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalPath {
    /// `indices[k]` holds on `[times[k], times[k+1])`.
    pub times: Vec<f64>,
    pub indices: Vec<usize>,
    pub t_end: f64,
    pub rates_used: Vec<Transition>,
    pub max_jump_prob: f64,
}

impl ModalPath {
    fn start(t0: f64, j0: usize) -> Self {
        Self { times: vec![t0], indices: vec![j0], t_end: t0, rates_used: Vec::new(), max_jump_prob: 0.0 }
    }

    fn jump(&mut self, t: f64, from: usize, to: usize, rate: f64) {
        self.times.push(t);
        self.indices.push(to);
        self.rates_used.push(Transition { t, from, to, rate });
    }

    pub fn start_index(&self) -> usize {
        self.indices[0]
    }

    pub fn final_index(&self) -> usize {
        *self.indices.last().expect("a path has a start")
    }

    pub fn transition_count(&self) -> usize {
        self.rates_used.len()
    }

    pub fn index_at(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        self.indices[k.saturating_sub(1)]
    }

    /// Time spent in each state within `[from, to]`, as fractions of the window.
    pub fn time_fractions(&self, n_states: usize, from: f64, to: f64) -> Vec<f64> {
        let mut acc = vec![0.0; n_states];
        let span = to - from;
        for (k, &j) in self.indices.iter().enumerate() {
            let a = self.times[k].max(from);
            let b = self.times.get(k + 1).copied().unwrap_or(self.t_end).min(to);
            if b > a {
                acc[j] += b - a;
            }
        }
        acc.iter().map(|x| x / span).collect()
    }

    /// CSV rows `t,j` at every change point plus the end time.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,j\n");
        for (t, j) in self.times.iter().zip(&self.indices) {
            s.push_str(&format!("{t:.17e},{j}\n"));
        }
        s.push_str(&format!("{:.17e},{}\n", self.t_end, self.final_index()));
        s
    }
}

/// One Bell path driven by `h` through the cut.
#[allow(clippy::too_many_arguments)]
pub fn simulate_modal(
    h: &Hamiltonian,
    cut: &CutSpec,
    psi0: &StateVector,
    j0: usize,
    dt: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<ModalPath> {
    RateSchedule::compute(h, cut, psi0, 0.0, dt, steps)?.sample_path(j0, rng)
}

/// Aggregate statistics of an ensemble of jump paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub n_paths: usize,
    pub n_states: usize,
    /// Sector label of every local state.
    pub sector_of: Vec<usize>,
    /// Observed transitions `(from, to) -> count` between local states.
    pub transition_counts: BTreeMap<String, usize>,
    /// Sector-level reachability: sectors entered from each start sector.
    pub reachable_sectors: BTreeMap<usize, BTreeSet<usize>>,
    pub cross_sector_transitions: usize,
    pub total_transitions: usize,
    /// Mean fraction of time spent in each state across paths.
    pub occupation_fractions: Vec<f64>,
    /// Standard error of each mean; absent with a single path.
    pub standard_errors: Option<Vec<f64>>,
    pub sector_fractions: Vec<f64>,
    pub sector_standard_errors: Option<Vec<f64>>,
}

impl ErgodicityReport {
    pub fn reachable_states(&self) -> usize {
        self.reachable_sectors.values().flat_map(|s| s.iter()).collect::<BTreeSet<_>>().len()
    }
}

/// Reachability, cross-sector traffic and occupation statistics.
///
/// `sector_of` groups local states into sectors; `None` makes every state
/// its own sector.
pub fn ergodicity_report(paths: &[ModalPath], n_states: usize, sector_of: Option<&[usize]>) -> Result<ErgodicityReport> {
    if paths.is_empty() {
        return Err(QtrajError::invalid("paths", "need at least one path"));
    }
    let sector_of: Vec<usize> = match sector_of {
        Some(s) if s.len() == n_states => s.to_vec(),
        Some(s) => return Err(QtrajError::DimensionMismatch { expected: n_states, found: s.len() }),
        None => (0..n_states).collect(),
    };
    let n_sectors = sector_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut transition_counts = BTreeMap::new();
    let mut reachable_sectors: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut cross = 0;
    let mut total = 0;
    let mut fractions = Vec::with_capacity(paths.len());
    for p in paths {
        let start = sector_of[p.start_index()];
        let reach = reachable_sectors.entry(start).or_default();
        for &j in &p.indices {
            reach.insert(sector_of[j]);
        }
        for tr in &p.rates_used {
            *transition_counts.entry(format!("{}->{}", tr.from, tr.to)).or_insert(0) += 1;
            total += 1;
            if sector_of[tr.from] != sector_of[tr.to] {
                cross += 1;
            }
        }
        fractions.push(p.time_fractions(n_states, p.times[0], p.t_end));
    }
    let (occupation_fractions, standard_errors) = mean_and_se(&fractions);
    let sector_rows: Vec<Vec<f64>> = fractions
        .iter()
        .map(|f| {
            let mut s = vec![0.0; n_sectors];
            for (i, &x) in f.iter().enumerate() {
                s[sector_of[i]] += x;
            }
            s
        })
        .collect();
    let (sector_fractions, sector_standard_errors) = mean_and_se(&sector_rows);
    Ok(ErgodicityReport {
        n_paths: paths.len(),
        n_states,
        sector_of,
        transition_counts,
        reachable_sectors,
        cross_sector_transitions: cross,
        total_transitions: total,
        occupation_fractions,
        standard_errors,
        sector_fractions,
        sector_standard_errors,
    })
}

pub(crate) fn mean_and_se(rows: &[Vec<f64>]) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = rows.len();
    let m = rows[0].len();
    let mean: Vec<f64> = (0..m).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n as f64).collect();
    if n < 2 {
        return (mean, None);
    }
    let se = (0..m)
        .map(|i| {
            let var = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        })
        .collect();
    (mean, Some(se))
}

/// The pointer-overlap model as a driven two-level system.
///
/// The global state `cos(theta/2)|1> - i sin(theta/2)|2>` is steered by
/// `H(t) = (theta'(t)/2) sigma_x` so that its weight on `|1>` follows the
/// larger root of the pointer formula with `F(t) = exp(-(t/tau)^2)`.
/// The local state that starts with weight one is listed first.
#[derive(Clone, Debug)]
pub struct PointerModel {
    pub c1: Complex64,
    pub c2: Complex64,
    pub tau: f64,
}

impl PointerModel {
    pub fn new(c1: Complex64, c2: Complex64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(QtrajError::invalid("tau", "must be positive"));
        }
        pointer_overlap_probs(c1, c2, 0.0)?;
        if c1.norm_sqr() == c2.norm_sqr() {
            return Err(QtrajError::invalid("c1", "equal weights leave the dominant outcome undefined"));
        }
        Ok(Self { c1, c2, tau })
    }

    pub fn overlap(&self, t: f64) -> f64 {
        (-(t / self.tau).powi(2)).exp()
    }

    /// Weights `(p_dominant, p_other)` at time `t`.
    pub fn weights(&self, t: f64) -> (f64, f64) {
        let p = pointer_overlap_probs(self.c1, self.c2, self.overlap(t)).expect("validated at construction");
        if self.c1.norm_sqr() > self.c2.norm_sqr() { (p.p1, p.p2) } else { (p.p2, p.p1) }
    }

    fn theta_dot(&self, t: f64) -> f64 {
        let (a, b) = (self.c1.norm_sqr(), self.c2.norm_sqr());
        let f = self.overlap(t);
        let f_dot = -2.0 * t / (self.tau * self.tau) * f;
        let s = (1.0 - 4.0 * a * b * (1.0 - f).powi(2)).max(0.0).sqrt();
        if s == 0.0 { 0.0 } else { -2.0 * (a * b).sqrt() * f_dot / s }
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        let model = self.clone();
        Hamiltonian::dynamic(2, move |t| {
            let w = 0.5 * model.theta_dot(t);
            OperatorMatrix::hermitian(DMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(w, 0.0), c64(w, 0.0), c64(0.0, 0.0)]))
                .expect("real symmetric")
        })
    }

    pub fn cut(&self) -> CutSpec {
        CutSpec::coordinate_blocks(&[1, 1], 0.0).expect("two orthogonal projectors")
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::basis(2, 0).expect("dimension two")
    }

    /// Limiting weights of the dominant and the other outcome.
    pub fn limits(&self) -> (f64, f64) {
        let (a, b) = (self.c1.norm_sqr(), self.c2.norm_sqr());
        (a.max(b), a.min(b))
    }
}

/// A three-state model whose local weights stay well away from zero.
pub fn three_level_toy() -> (Hamiltonian, CutSpec, StateVector) {
    let h = OperatorMatrix::hermitian(DMatrix::from_row_slice(
        3,
        3,
        &[
            c64(0.0, 0.0),
            c64(0.6, 0.3),
            c64(0.0, 0.4),
            c64(0.6, -0.3),
            c64(0.4, 0.0),
            c64(0.5, 0.0),
            c64(0.0, -0.4),
            c64(0.5, 0.0),
            c64(-0.3, 0.0),
        ],
    ))
    .expect("hermitian by construction");
    let psi = StateVector::new(vec![c64(0.5f64.sqrt(), 0.0), c64(0.0, 0.3f64.sqrt()), c64(0.2f64.sqrt(), 0.0)]).expect("finite");
    let cut = CutSpec::coordinate_blocks(&[1, 1, 1], 1e-6).expect("coordinate projectors");
    (Hamiltonian::Static(h), cut, psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Complex64 {
        c64(x.sqrt(), 0.0)
    }

    #[test]
    fn pointer_formula_limits() {
        let p = pointer_overlap_probs(s(0.7), s(0.3), 1.0).unwrap();
        assert_eq!((p.p1, p.p2), (1.0, 0.0));
        let p = pointer_overlap_probs(s(0.7), s(0.3), 0.0).unwrap();
        assert!((p.p1 - 0.7).abs() < 1e-12 && (p.p2 - 0.3).abs() < 1e-12);
        let p = pointer_overlap_probs(s(0.3), s(0.7), 0.0).unwrap();
        assert!((p.p1 - 0.3).abs() < 1e-12 && (p.p2 - 0.7).abs() < 1e-12);
        let p = pointer_overlap_probs(s(0.5), s(0.5), 0.0).unwrap();
        assert_eq!((p.p1, p.p2), (0.5, 0.5));
        assert!(p.degenerate);
        assert!(pointer_overlap_probs(s(0.5), s(0.5), 1.2).is_err());
        assert!(pointer_overlap_probs(s(0.5), s(0.6), 0.2).is_err());
    }

    #[test]
    fn pointer_probs_sum_exactly() {
        for k in 0..=100 {
            let a = k as f64 / 100.0;
            for f in [0.0, 0.1, 0.5, 0.9, 1.0] {
                let p = pointer_overlap_probs(s(a), s(1.0 - a), f).unwrap();
                assert_eq!(p.p1 + p.p2, 1.0);
            }
        }
    }

    #[test]
    fn local_states_reconstruct_and_flag_degeneracy() {
        let cut = CutSpec::coordinate_blocks(&[1, 1], 1e-9).unwrap();
        let psi = StateVector::new(vec![s(0.5), c64(0.0, 0.5f64.sqrt())]).unwrap();
        let d = local_states(&cut, &psi).unwrap();
        assert!(d.degenerate_flag);
        assert!(d.reconstruct().max_abs_diff(&psi).unwrap() < 1e-15);
        let psi = StateVector::new(vec![s(0.36), s(0.64)]).unwrap();
        let d = local_states(&cut, &psi).unwrap();
        assert!(!d.degenerate_flag);
        assert!((d.probs[0] - 0.36).abs() < 1e-15);
    }

    #[test]
    fn pointer_branches_of_entangled_state() {
        // pointer (x) photon, pointer index slowest: c1|M1>|h> + c2|M2>|v>.
        let (c1, c2) = (s(0.36), c64(0.0, 0.8));
        let mut amps = vec![c64(0.0, 0.0); 4];
        amps[0] = c1;
        amps[3] = c2;
        let psi = StateVector::new(amps).unwrap();
        let cut = CutSpec::coordinate_blocks(&[2, 2], 1e-9).unwrap();
        let d = local_states(&cut, &psi).unwrap();
        assert!((d.probs[0] - 0.36).abs() < 1e-15 && (d.probs[1] - 0.64).abs() < 1e-15);
        assert_eq!(d.local_states[0].amplitude(0), c1);
        assert_eq!(d.local_states[1].amplitude(3), c2);
    }

    #[test]
    fn diagonal_hamiltonian_has_no_rates() {
        let (_, cut, psi) = three_level_toy();
        let h = OperatorMatrix::diagonal(&[0.3, -1.0, 2.0]);
        let r = bell_rates(&h, &local_states(&cut, &psi).unwrap()).unwrap();
        assert!(r.rates.iter().all(|&x| x == 0.0));
        let path = simulate_modal(&Hamiltonian::Static(h), &cut, &psi, 1, 0.01, 500, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(path.transition_count(), 0);
        assert_eq!(path.final_index(), 1);
    }

    #[test]
    fn rates_are_one_directional_and_reproduce_flow() {
        let (h, cut, psi) = three_level_toy();
        let h = h.at(0.0);
        let d = local_states(&cut, &psi).unwrap();
        let r = bell_rates(&h, &d).unwrap();
        assert_eq!(r.antisymmetry_violations(), 0);
        let current = current_matrix(&h, &d).unwrap();
        let flow = r.flow(&d.probs);
        for i in 0..3 {
            let direct: f64 = (0..3).map(|j| 2.0 * current[(i, j)]).sum();
            assert!((flow[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn unoccupied_states_are_flagged() {
        let cut = CutSpec::coordinate_blocks(&[1, 1], 0.0).unwrap();
        let psi = StateVector::basis(2, 0).unwrap();
        let h = crate::qcore::operator::pauli::y();
        let r = bell_rates(&h, &local_states(&cut, &psi).unwrap()).unwrap();
        assert_eq!(r.unoccupied, vec![1]);
        assert_eq!(r.rate(1, 0), 0.0);
    }

    #[test]
    fn oversized_step_is_a_guard_error() {
        let (h, cut, psi) = three_level_toy();
        let err = simulate_modal(&h, &cut, &psi, 0, 5.0, 4, &mut RngStream::new(1, 0));
        assert!(matches!(err, Err(QtrajError::StepTooLarge { .. })));
    }

    #[test]
    fn ring_chain_occupation_matches_stationary_solve() {
        // A current-carrying eigenstate of a three-site ring with flux.
        let w = Complex64::from_polar(1.0, 0.7);
        let h = OperatorMatrix::hermitian(DMatrix::from_row_slice(
            3,
            3,
            &[c64(0.0, 0.0), w, w.conj(), w.conj(), c64(0.0, 0.0), w, w, w.conj(), c64(0.0, 0.0)],
        ))
        .unwrap();
        let (_, vecs) = h.eigh().unwrap();
        let psi = StateVector::new(vecs.column(0).iter().copied().collect()).unwrap();
        let cut = CutSpec::coordinate_blocks(&[1, 1, 1], 1e-9).unwrap();
        let sched = RateSchedule::compute(&Hamiltonian::Static(h.clone()), &cut, &psi, 0.0, 0.01, 4000).unwrap();
        let stationary = sched.rates[0].stationary().unwrap();
        let paths = sched.sample_ensemble(64, Some(0), 3).unwrap();
        let rep = ergodicity_report(&paths, 3, None).unwrap();
        let se = rep.standard_errors.clone().unwrap();
        for i in 0..3 {
            assert!((rep.occupation_fractions[i] - stationary[i]).abs() < 3.0 * se[i] + 1e-3, "state {i}");
        }
        assert_eq!(rep.reachable_states(), 3);
    }

    #[test]
    fn block_sectors_never_mix() {
        let mut h = DMatrix::from_element(4, 4, c64(0.0, 0.0));
        h[(0, 1)] = c64(0.3, 0.8);
        h[(1, 0)] = c64(0.3, -0.8);
        h[(2, 3)] = c64(-0.2, 0.5);
        h[(3, 2)] = c64(-0.2, -0.5);
        let h = OperatorMatrix::hermitian(h).unwrap();
        let psi = StateVector::new(vec![s(0.3), s(0.2), s(0.1), c64(0.0, 0.4f64.sqrt())]).unwrap();
        let cut = CutSpec::coordinate_blocks(&[1, 1, 1, 1], 0.0).unwrap();
        let sched = RateSchedule::compute(&Hamiltonian::Static(h), &cut, &psi, 0.0, 0.005, 2000).unwrap();
        let paths = sched.sample_ensemble(50, None, 1).unwrap();
        let rep = ergodicity_report(&paths, 4, Some(&[0, 0, 1, 1])).unwrap();
        assert_eq!(rep.cross_sector_transitions, 0);
        assert!(rep.total_transitions > 0);
    }

    #[test]
    fn single_quiet_path_report() {
        let path = ModalPath::start(0.0, 2);
        let mut path = path;
        path.t_end = 1.0;
        let rep = ergodicity_report(&[path], 3, None).unwrap();
        assert_eq!(rep.reachable_states(), 1);
        assert!(rep.standard_errors.is_none());
        assert_eq!(rep.occupation_fractions, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn pointer_model_tracks_formula() {
        let m = PointerModel::new(s(0.7), s(0.3), 1.0).unwrap();
        let sched = RateSchedule::compute(&m.hamiltonian(), &m.cut(), &m.initial_state(), 0.0, 0.005, 1200).unwrap();
        for k in [0, 100, 200, 400, 1200] {
            let (p_dom, _) = m.weights(sched.time(k));
            assert!((sched.probs[k][0] - p_dom).abs() < 1e-6, "k = {k}");
        }
        assert!(sched.rates.iter().all(|r| r.rate(1, 0) == 0.0));
    }

    #[test]
    fn path_csv_and_fractions() {
        let mut p = ModalPath::start(0.0, 0);
        p.jump(0.25, 0, 1, 2.0);
        p.t_end = 1.0;
        assert_eq!(p.index_at(0.1), 0);
        assert_eq!(p.index_at(0.25), 1);
        assert_eq!(p.time_fractions(2, 0.0, 1.0), vec![0.25, 0.75]);
        assert!(p.to_csv().starts_with("t,j\n"));
    }
}
