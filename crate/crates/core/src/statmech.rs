//! Statistical-mechanics analogues of classical emergence: Glauber dynamics
//! of the 2D Ising model, and micro-canonical thermalization of a random
//! Hamiltonian probed both by projector expectations and by the Bell jump
//! process on the sector cut.
//!
//! Ising energies use `E = -(1/4) sum_mu s_mu h_mu`, with `h_mu` the sum of
//! the four neighbours of site `mu`. Flipping `s_mu` then costs `s_mu h_mu`,
//! so `glauber_flip_prob` is the heat-bath rule for this energy.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};
use crate::modal::{ergodicity_report, CutSpec, ErgodicityReport, Hamiltonian, RateSchedule};
use crate::qcore::{c64, Complex64, OperatorMatrix, Propagator, RngStream, StateVector};

/// Largest micro-canonical dimension accepted by [`build_microcanonical`].
pub const MAX_MC_DIM: usize = 2000;

/// Heat-bath probability `1 / (1 + exp(s h / T))` of flipping spin `s`.
pub fn glauber_flip_prob(spin: i8, neighbor_sum: i32, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(QtrajError::invalid("temperature", format!("must be positive, got {temperature}")));
    }
    if spin != 1 && spin != -1 {
        return Err(QtrajError::invalid("spin", "must be +1 or -1"));
    }
    Ok(1.0 / (1.0 + (f64::from(spin) * f64::from(neighbor_sum) / temperature).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingLattice {
    l: usize,
    spins: Vec<i8>,
    temperature: f64,
}

impl IsingLattice {
    pub fn new(l: usize, spins: Vec<i8>, temperature: f64) -> Result<Self> {
        if l < 2 {
            return Err(QtrajError::invalid("l", "lattice side must be at least 2"));
        }
        if spins.len() != l * l {
            return Err(QtrajError::DimensionMismatch { expected: l * l, found: spins.len() });
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(QtrajError::invalid("spins", "entries must be +1 or -1"));
        }
        glauber_flip_prob(1, 0, temperature)?;
        Ok(Self { l, spins, temperature })
    }

    pub fn all_up(l: usize, temperature: f64) -> Result<Self> {
        Self::new(l, vec![1; l * l], temperature)
    }

    pub fn random(l: usize, temperature: f64, rng: &mut RngStream) -> Result<Self> {
        let spins = (0..l * l).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::new(l, spins, temperature)
    }

    /// Lattice whose site `k` carries bit `k` of `config` (set bit = spin up).
    pub fn from_config(l: usize, config: usize, temperature: f64) -> Result<Self> {
        Self::new(l, (0..l * l).map(|k| if config >> k & 1 == 1 { 1 } else { -1 }).collect(), temperature)
    }

    pub fn config(&self) -> usize {
        self.spins.iter().enumerate().filter(|(_, &s)| s == 1).map(|(k, _)| 1 << k).sum()
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Sum of the four periodic neighbours; on a 2x2 lattice left and right coincide.
    pub fn neighbor_sum(&self, site: usize) -> i32 {
        let l = self.l;
        let (r, c) = (site / l, site % l);
        let at = |rr: usize, cc: usize| i32::from(self.spins[rr * l + cc]);
        at(r, (c + 1) % l) + at(r, (c + l - 1) % l) + at((r + 1) % l, c) + at((r + l - 1) % l, c)
    }

    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / self.spins.len() as f64
    }

    pub fn energy(&self) -> f64 {
        -0.25 * (0..self.spins.len()).map(|k| f64::from(self.spins[k]) * f64::from(self.neighbor_sum(k))).sum::<f64>()
    }

    /// One heat-bath update of a uniformly chosen site.
    pub fn update(&mut self, rng: &mut RngStream) {
        let site = rng.random_range(0..self.spins.len());
        let s = self.spins[site];
        let p = 1.0 / (1.0 + (f64::from(s) * f64::from(self.neighbor_sum(site)) / self.temperature).exp());
        if rng.uniform() < p {
            self.spins[site] = -s;
        }
    }

    /// `L^2` random-site updates.
    pub fn sweep(&mut self, rng: &mut RngStream) {
        for _ in 0..self.spins.len() {
            self.update(rng);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationSeries {
    pub temperature: f64,
    pub l: usize,
    /// Magnetization after each sweep.
    pub values: Vec<f64>,
}

impl MagnetizationSeries {
    /// Mean with a standard error from `blocks` contiguous block averages.
    pub fn blocked_mean(&self, blocks: usize) -> (f64, f64) {
        let n = self.values.len() / blocks.max(1);
        let means: Vec<f64> = self.values.chunks_exact(n.max(1)).take(blocks).map(|b| b.iter().sum::<f64>() / b.len() as f64).collect();
        crate::decay::mean_se(&means)
    }

    pub fn sign_changes(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] * w[1] < 0.0 || (w[0] != 0.0 && w[1] == 0.0)).count()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,magnetization\n");
        for (k, m) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{m:.17e}\n", k + 1));
        }
        s
    }
}

pub fn simulate_ising(lattice: &mut IsingLattice, sweeps: usize, rng: &mut RngStream) -> MagnetizationSeries {
    let mut values = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        lattice.sweep(rng);
        values.push(lattice.magnetization());
    }
    MagnetizationSeries { temperature: lattice.temperature, l: lattice.l, values }
}

/// Single-update transition matrix `P[(i, j)]` (from `i` to `j`) of the
/// Glauber chain on the 16 configurations of the 2x2 lattice.
pub fn glauber_chain_2x2(temperature: f64) -> Result<DMatrix<f64>> {
    let mut p = DMatrix::zeros(16, 16);
    for i in 0..16 {
        let lat = IsingLattice::from_config(2, i, temperature)?;
        let mut stay = 1.0;
        for site in 0..4 {
            let f = 0.25 * glauber_flip_prob(lat.spins[site], lat.neighbor_sum(site), temperature)?;
            p[(i, i ^ (1 << site))] += f;
            stay -= f;
        }
        p[(i, i)] += stay;
    }
    Ok(p)
}

pub fn boltzmann_2x2(temperature: f64) -> Result<Vec<f64>> {
    let w: Vec<f64> =
        (0..16).map(|i| IsingLattice::from_config(2, i, temperature).map(|l| (-l.energy() / temperature).exp())).collect::<Result<_>>()?;
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Stationary distribution of a row-stochastic matrix by a linear solve.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(QtrajError::NonConvergence { what: "stationary distribution solve", iterations: 1 })?;
    Ok(x.iter().copied().collect())
}

/// `max |pi_i P_ij - pi_j P_ji| / max(pi_i P_ij, pi_j P_ji)` over connected pairs.
pub fn detailed_balance_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = p.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (pi[i] * p[(i, j)], pi[j] * p[(j, i)]);
            let scale = a.max(b);
            if i != j && scale > 0.0 {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct MicrocanonicalModel {
    d_mc: usize,
    sector_dims: Vec<usize>,
    h: OperatorMatrix,
    cut: CutSpec,
    propagator: Propagator,
}

impl MicrocanonicalModel {
    /// Model with a given hamiltonian on coordinate-block sectors.
    pub fn from_hamiltonian(h: OperatorMatrix, sector_dims: &[usize]) -> Result<Self> {
        let d_mc: usize = sector_dims.iter().sum();
        if sector_dims.is_empty() || sector_dims.contains(&0) {
            return Err(QtrajError::invalid("sector_dims", "need non-empty sectors"));
        }
        if d_mc > MAX_MC_DIM {
            return Err(QtrajError::invalid("d_mc", format!("{d_mc} exceeds {MAX_MC_DIM}")));
        }
        if h.dim() != d_mc {
            return Err(QtrajError::DimensionMismatch { expected: d_mc, found: h.dim() });
        }
        h.ensure_hermitian()?;
        let cut = CutSpec::coordinate_blocks(sector_dims, 0.0)?;
        let propagator = Propagator::new(&h)?;
        Ok(Self { d_mc, sector_dims: sector_dims.to_vec(), h, cut, propagator })
    }

    pub fn d_mc(&self) -> usize {
        self.d_mc
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.h
    }

    pub fn cut(&self) -> &CutSpec {
        &self.cut
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    /// `d_i / d_mc`.
    pub fn microcanonical_fractions(&self) -> Vec<f64> {
        self.sector_dims.iter().map(|&d| d as f64 / self.d_mc as f64).collect()
    }

    pub fn sector_of_index(&self) -> Vec<usize> {
        self.sector_dims.iter().enumerate().flat_map(|(s, &d)| std::iter::repeat_n(s, d)).collect()
    }

    /// `1 / sum_k |v_k|^4` for every eigenvector, in the sector basis.
    pub fn participation_ratios(&self) -> Vec<f64> {
        let v = self.propagator.eigenvectors();
        (0..v.ncols()).map(|n| 1.0 / v.column(n).iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>()).collect()
    }

    /// Zeroes every matrix element between different sectors.
    pub fn block_diagonal(&self) -> Result<Self> {
        let sec = self.sector_of_index();
        let h = OperatorMatrix::from_fn(self.d_mc, |i, j| if sec[i] == sec[j] { self.h.get(i, j) } else { c64(0.0, 0.0) })?;
        Self::from_hamiltonian(h, &self.sector_dims)
    }

    fn sector_probs(&self, psi: &StateVector) -> Vec<f64> {
        let mut p = vec![0.0; self.sector_dims.len()];
        let sec = self.sector_of_index();
        for (k, a) in psi.amplitudes().iter().enumerate() {
            p[sec[k]] += a.norm_sqr();
        }
        p
    }
}

/// Real symmetric gaussian matrix: off-diagonal `N(0, 1)`, diagonal `N(0, 2)`.
pub fn goe_matrix(d: usize, rng: &mut RngStream) -> OperatorMatrix {
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        let diag: f64 = StandardNormal.sample(rng);
        m[(i, i)] = c64(diag * std::f64::consts::SQRT_2, 0.0);
        for j in (i + 1)..d {
            let x: f64 = StandardNormal.sample(rng);
            m[(i, j)] = c64(x, 0.0);
            m[(j, i)] = c64(x, 0.0);
        }
    }
    OperatorMatrix::hermitian(m).expect("symmetric by construction")
}

pub fn build_microcanonical(d_mc: usize, sector_dims: &[usize], rng: &mut RngStream) -> Result<MicrocanonicalModel> {
    if sector_dims.iter().sum::<usize>() != d_mc {
        return Err(QtrajError::invalid("sector_dims", format!("sizes must add up to d_mc = {d_mc}")));
    }
    if d_mc > MAX_MC_DIM {
        return Err(QtrajError::invalid("d_mc", format!("{d_mc} exceeds {MAX_MC_DIM}")));
    }
    MicrocanonicalModel::from_hamiltonian(goe_matrix(d_mc, rng), sector_dims)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSeries {
    pub times: Vec<f64>,
    /// `probs[k][i] = <psi(t_k)|Pi_i|psi(t_k)>`.
    pub probs: Vec<Vec<f64>>,
    /// Average over the second half of the sampled times.
    pub long_time_average: Vec<f64>,
    pub max_sum_error: f64,
}

impl ThermalSeries {
    pub fn to_csv(&self) -> String {
        let n = self.long_time_average.len();
        let mut s = String::from("t");
        for i in 0..n {
            s.push_str(&format!(",p{i}"));
        }
        s.push('\n');
        for (t, p) in self.times.iter().zip(&self.probs) {
            s.push_str(&format!("{t:.17e}"));
            for v in p {
                s.push_str(&format!(",{v:.17e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Exact evolution through the eigendecomposition of `H`.
pub fn thermal_expectations(model: &MicrocanonicalModel, psi0: &StateVector, times: &[f64]) -> Result<ThermalSeries> {
    psi0.check_dim(model.d_mc)?;
    psi0.ensure_normalized()?;
    if times.is_empty() {
        return Err(QtrajError::invalid("times", "need at least one sample time"));
    }
    let coeffs = model.propagator.to_eigenbasis(psi0)?;
    let energies = model.propagator.energies();
    let probs: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| {
            let phased = DVector::from_iterator(coeffs.len(), coeffs.iter().zip(energies).map(|(c, e)| c * Complex64::from_polar(1.0, -e * t)));
            model.sector_probs(&model.propagator.from_eigenbasis(&phased))
        })
        .collect();
    let half = times.len() / 2;
    let tail = &probs[half..];
    let long_time_average = (0..model.sector_dims.len()).map(|i| tail.iter().map(|p| p[i]).sum::<f64>() / tail.len() as f64).collect();
    let max_sum_error = probs.iter().map(|p| (p.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    Ok(ThermalSeries { times: times.to_vec(), probs, long_time_average, max_sum_error })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellErgodicity {
    pub report: ErgodicityReport,
    pub targets: Vec<f64>,
    /// `(fraction - target) / standard error` per sector; absent with one path.
    pub z_scores: Option<Vec<f64>>,
    pub max_jump_prob: f64,
}

impl BellErgodicity {
    pub fn within_sigma(&self, k: f64) -> bool {
        match &self.z_scores {
            Some(z) => z.iter().all(|v| v.abs() <= k),
            None => self.report.sector_fractions.iter().zip(&self.targets).all(|(f, t)| (f - t).abs() < 1e-12),
        }
    }
}

/// Bell jump paths on the sector cut; each path starts from a sector drawn
/// from the initial probabilities, and its time fractions are compared with `d_i / d_mc`.
pub fn bell_ergodicity_check(
    model: &MicrocanonicalModel,
    psi0: &StateVector,
    duration: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<BellErgodicity> {
    let steps = (duration / dt).round() as usize;
    if steps == 0 || n_paths == 0 {
        return Err(QtrajError::invalid("duration", "need at least one step and one path"));
    }
    let schedule = RateSchedule::compute(&Hamiltonian::Static(model.h.clone()), &model.cut, psi0, 0.0, dt, steps)?;
    let paths = schedule.sample_ensemble(n_paths, None, seed)?;
    let report = ergodicity_report(&paths, model.sector_dims.len(), None)?;
    let targets = model.microcanonical_fractions();
    let z_scores = report.sector_standard_errors.as_ref().map(|se| {
        report
            .sector_fractions
            .iter()
            .zip(&targets)
            .zip(se)
            .map(|((f, t), s)| if *s > 0.0 { (f - t) / s } else if (f - t).abs() < 1e-12 { 0.0 } else { f64::INFINITY })
            .collect()
    });
    Ok(BellErgodicity { report, targets, z_scores, max_jump_prob: schedule.max_jump_prob })
}
