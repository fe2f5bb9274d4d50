//! Phase-space coarse graining of the rotor: a rectangular cell grid,
//! Husimi densities on it, and the cell POVM built from coherent states.
//!
//! Coordinates are `x = phi` in `[0, 2 pi)` and `p = ell`; `u = p / hbar`
//! is the momentum in units of the basis index `m`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::quantum::RotorWavefunction;
use crate::error::{QtrajError, Result};
use crate::qcore::{c64, Complex64, CommutatorNorm, OperatorMatrix, PovmKind, PovmSet};

/// Minimum cell-to-coherence ratio on both axes for a phase-space POVM.
pub const MIN_CELL_RATIO: f64 = 10.0;
/// Retained basis states sit this many momentum coherence lengths inside the grid edges.
pub const RETAIN_MARGIN: f64 = 6.0;
/// Coherent-state windows extend `HUSIMI_WINDOW / delta_x` basis states from the centre.
const HUSIMI_WINDOW: f64 = 6.5;
/// Band half-width `RESIDUAL_BAND / delta_x` for residual products; the
/// dropped entries are below `exp(-RESIDUAL_BAND^2 / 2) ~ 1e-8` of the diagonal.
const RESIDUAL_BAND: f64 = 6.1;
/// Largest retained block that is materialized as dense matrices.
pub const MAX_DENSE_DIM: usize = 1500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x_cells: usize,
    pub p_cells: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Left edge of the first angle cell.
    #[serde(default)]
    pub x_offset: f64,
    pub hbar: f64,
    /// Coherent-state width in angle, the coherence scale `l_coh`.
    pub delta_x: f64,
}

impl PhaseSpaceGrid {
    pub fn new(x_cells: usize, p_cells: usize, p_min: f64, p_max: f64, hbar: f64, delta_x: f64) -> Result<Self> {
        let g = Self { x_cells, p_cells, p_min, p_max, x_offset: 0.0, hbar, delta_x };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_cells == 0 || self.p_cells == 0 {
            return Err(QtrajError::invalid("cells", "need at least one cell per axis"));
        }
        if !(self.p_max > self.p_min) || !self.p_min.is_finite() || !self.p_max.is_finite() {
            return Err(QtrajError::invalid("p_range", "need finite p_min < p_max"));
        }
        if !(self.hbar > 0.0 && self.delta_x > 0.0 && self.x_offset.is_finite()) {
            return Err(QtrajError::invalid("hbar", "hbar and delta_x must be positive"));
        }
        Ok(())
    }

    pub fn with_x_offset(mut self, offset: f64) -> Self {
        self.x_offset = offset;
        self
    }

    /// Husimi sampling grid with cells at most half a coherence length on each axis.
    pub fn husimi_resolution(hbar: f64, delta_x: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let x_cells = (TAU / (0.5 * delta_x)).ceil() as usize;
        let p_coh = hbar / (2.0 * delta_x);
        let p_cells = ((p_max - p_min) / (0.5 * p_coh)).ceil() as usize;
        Self::new(x_cells, p_cells, p_min, p_max, hbar, delta_x)
    }

    /// Two angle cells of width `pi` and three momentum cells of unit
    /// height, with both coherence scales `ratio` times smaller than the cells.
    pub fn ratio_sweep(ratio: f64) -> Result<Self> {
        let delta_x = PI / ratio;
        let p_coh = 1.0 / ratio;
        Self::new(2, 3, -1.5, 1.5, 2.0 * delta_x * p_coh, delta_x)
    }

    /// Geometric mean of the symmetric coherent width `sqrt(hbar / 2)` and the
    /// angle cell width.
    pub fn geometric_mean_delta_x(hbar: f64, cell_x: f64) -> f64 {
        ((0.5 * hbar).sqrt() * cell_x).sqrt()
    }

    pub fn cell_x(&self) -> f64 {
        TAU / self.x_cells as f64
    }

    pub fn cell_p(&self) -> f64 {
        (self.p_max - self.p_min) / self.p_cells as f64
    }

    pub fn coherence_x(&self) -> f64 {
        self.delta_x
    }

    pub fn coherence_p(&self) -> f64 {
        self.hbar / (2.0 * self.delta_x)
    }

    /// `min(l_cut / l_coh, p_cut / p_coh)`.
    pub fn cell_ratio(&self) -> f64 {
        (self.cell_x() / self.coherence_x()).min(self.cell_p() / self.coherence_p())
    }

    pub fn len(&self) -> usize {
        self.x_cells * self.p_cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells are numbered row by row in momentum: `ip * x_cells + ix`.
    pub fn cell_index(&self, ix: usize, ip: usize) -> usize {
        ip * self.x_cells + ix
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.x_cells, cell / self.x_cells)
    }

    pub fn x_bounds(&self, ix: usize) -> (f64, f64) {
        let x0 = self.x_offset + ix as f64 * self.cell_x();
        (x0, x0 + self.cell_x())
    }

    pub fn p_bounds(&self, ip: usize) -> (f64, f64) {
        let p0 = self.p_min + ip as f64 * self.cell_p();
        (p0, p0 + self.cell_p())
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (ix, ip) = self.cell_coords(cell);
        let (x0, x1) = self.x_bounds(ix);
        let (p0, p1) = self.p_bounds(ip);
        (0.5 * (x0 + x1), 0.5 * (p0 + p1))
    }

    /// `dx dp / (2 pi hbar)` for one cell.
    pub fn cell_measure(&self) -> f64 {
        self.cell_x() * self.cell_p() / (TAU * self.hbar)
    }

    /// Basis states `m` far enough from both momentum edges that the
    /// cells resolve the identity on them.
    pub fn retained_block(&self) -> Result<(i64, i64)> {
        let margin = RETAIN_MARGIN / (2.0 * self.delta_x);
        let lo = (self.p_min / self.hbar + margin).ceil() as i64;
        let hi = (self.p_max / self.hbar - margin).floor() as i64;
        if hi < lo {
            return Err(QtrajError::invalid("p_range", "momentum range leaves no retained basis states"));
        }
        Ok((lo, hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiDensity {
    pub grid: PhaseSpaceGrid,
    /// `rho` at cell centres, indexed like the grid cells.
    pub values: Vec<f64>,
}

impl HusimiDensity {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[self.grid.cell_index(ix, ip)]
    }

    /// Riemann sum of `rho dx dp / (2 pi hbar)`.
    pub fn total_probability(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn argmax_cell(&self) -> usize {
        self.values.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0
    }

    /// Angle density `int rho dp / (2 pi hbar)` at the angle cell centres.
    pub fn x_marginal(&self) -> Vec<f64> {
        let g = &self.grid;
        let w = g.cell_p() / (TAU * g.hbar);
        (0..g.x_cells).map(|ix| (0..g.p_cells).map(|ip| self.at(ix, ip)).sum::<f64>() * w).collect()
    }

    /// Probability of the cells whose centres satisfy `inside`.
    pub fn region_probability<F: Fn(f64, f64) -> bool>(&self, inside: F) -> f64 {
        let total: f64 = (0..self.values.len())
            .filter(|&c| {
                let (x, p) = self.grid.cell_center(c);
                inside(x.rem_euclid(TAU), p)
            })
            .map(|c| self.values[c])
            .sum();
        total * self.grid.cell_measure()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,p,rho\n");
        for c in 0..self.values.len() {
            let (x, p) = self.grid.cell_center(c);
            s.push_str(&format!("{x:.17e},{p:.17e},{:.17e}\n", self.values[c]));
        }
        s
    }
}

/// Squared normalization of the coherent-state amplitudes.
fn coherent_norm_sqr(delta_x: f64) -> f64 {
    delta_x * (2.0 / PI).sqrt()
}

/// `rho(x, p) = |<x, p|psi>|^2` at every cell centre of `grid`.
///
/// Each momentum row is one FFT over the angle cells: basis states are
/// folded modulo the number of angle cells, which is exact for a uniform grid.
pub fn husimi(psi: &RotorWavefunction, grid: &PhaseSpaceGrid) -> Result<HusimiDensity> {
    grid.validate()?;
    if (psi.hbar() - grid.hbar).abs() > 1e-12 * grid.hbar {
        return Err(QtrajError::invalid("hbar", "wavefunction and grid disagree on hbar"));
    }
    let nx = grid.x_cells;
    let dx = grid.delta_x;
    let norm = coherent_norm_sqr(dx).sqrt();
    let shift = grid.x_offset + 0.5 * grid.cell_x();
    let plan = FftPlanner::new().plan_fft_inverse(nx);
    let window = (HUSIMI_WINDOW / dx).ceil() as i64;
    let mt = psi.truncation() as i64;
    let rows: Vec<Vec<f64>> = (0..grid.p_cells)
        .into_par_iter()
        .map(|ip| {
            let (p0, p1) = grid.p_bounds(ip);
            let u = 0.5 * (p0 + p1) / grid.hbar;
            let mut buf = vec![c64(0.0, 0.0); nx];
            let lo = ((u.round() as i64) - window).max(-mt);
            let hi = ((u.round() as i64) + window).min(mt);
            for m in lo..=hi {
                let mf = m as f64;
                let w = norm * (-(dx * (mf - u)).powi(2)).exp();
                buf[m.rem_euclid(nx as i64) as usize] += psi.amplitude(m) * Complex64::from_polar(w, mf * shift);
            }
            plan.process(&mut buf);
            buf.iter().map(|z| z.norm_sqr()).collect()
        })
        .collect();
    Ok(HusimiDensity { grid: *grid, values: rows.concat() })
}

/// Cell effects `Pi_i = int_cell |x,p><x,p| dx dp / (2 pi hbar)` in closed form.
///
/// For cell `[x0, x1) x [u0, u1)` and basis states `m, m'` with `k = m - m'`
/// and `c = (m + m') / 2`:
/// `Pi_{m m'} = chi(k) exp(-delta_x^2 k^2 / 2) [erf(s (u1 - c)) - erf(s (u0 - c))] / (4 pi)`
/// with `s = sqrt(2) delta_x` and `chi(k) = int_x0^x1 e^{-i k x} dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePovm {
    grid: PhaseSpaceGrid,
    block: (i64, i64),
}

pub fn phase_space_povm(grid: &PhaseSpaceGrid) -> Result<PhaseSpacePovm> {
    grid.validate()?;
    for (name, ratio) in [("x", grid.cell_x() / grid.coherence_x()), ("p", grid.cell_p() / grid.coherence_p())] {
        if ratio < MIN_CELL_RATIO * (1.0 - 1e-12) {
            return Err(QtrajError::invalid("grid", format!("{name} cell/coherence ratio {ratio:.3} is below {MIN_CELL_RATIO}")));
        }
    }
    Ok(PhaseSpacePovm { grid: *grid, block: grid.retained_block()? })
}

/// Residuals of one cell effect against itself and some other cells,
/// computed on the infinite basis through banded products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResiduals {
    pub cell: usize,
    pub trace: f64,
    /// `max |(Pi^2 - Pi)_{m m'}|`.
    pub projectivity_max: f64,
    /// `tr(Pi - Pi^2) / tr Pi`.
    pub projectivity_fraction: f64,
    pub commutators: Vec<CommutatorNorm>,
}

impl PhaseSpacePovm {
    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    /// Inclusive range of retained basis states.
    pub fn block(&self) -> (i64, i64) {
        self.block
    }

    pub fn dim(&self) -> usize {
        (self.block.1 - self.block.0 + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn chi(&self, ix: usize, k: i64) -> Complex64 {
        let (x0, x1) = self.grid.x_bounds(ix);
        if k == 0 {
            return c64(x1 - x0, 0.0);
        }
        let kf = k as f64;
        (Complex64::from_polar(1.0, -kf * x1) - Complex64::from_polar(1.0, -kf * x0)) * c64(0.0, 1.0 / kf)
    }

    fn momentum_weight(&self, ip: usize, c: f64) -> f64 {
        let (p0, p1) = self.grid.p_bounds(ip);
        let s = std::f64::consts::SQRT_2 * self.grid.delta_x;
        let (u0, u1) = (p0 / self.grid.hbar, p1 / self.grid.hbar);
        0.5 * (erf(s * (u1 - c)) - erf(s * (u0 - c)))
    }

    /// `<m|Pi_cell|m'>` for any basis states, retained or not.
    pub fn entry(&self, cell: usize, m: i64, mp: i64) -> Complex64 {
        let (ix, ip) = self.grid.cell_coords(cell);
        let k = m - mp;
        let damp = (-0.5 * (self.grid.delta_x * k as f64).powi(2)).exp();
        let c = 0.5 * (m + mp) as f64;
        self.chi(ix, k) * (damp * self.momentum_weight(ip, c) / TAU)
    }

    /// Dense effect on the retained block.
    pub fn element(&self, cell: usize) -> Result<OperatorMatrix> {
        let d = self.dim();
        if d > MAX_DENSE_DIM {
            return Err(QtrajError::invalid("grid", format!("retained block of {d} states is too large for dense effects")));
        }
        let lo = self.block.0;
        let mut m = nalgebra::DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = self.entry(cell, lo + i as i64, lo + j as i64);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        OperatorMatrix::hermitian(m)
    }

    pub fn to_povm_set(&self) -> Result<PovmSet> {
        let elements = (0..self.len()).map(|c| self.element(c)).collect::<Result<Vec<_>>>()?;
        PovmSet::new(elements, PovmKind::Effects)
    }

    /// `max |(sum_i Pi_i - 1)_{m m'}|` over the retained block, summing cell
    /// entries on the fly inside the band where they are representable.
    pub fn completeness_residual(&self) -> f64 {
        let band = ((RESIDUAL_BAND + 3.0) / self.grid.delta_x).ceil() as i64;
        let (lo, hi) = self.block;
        (lo..=hi)
            .into_par_iter()
            .map(|m| {
                let mut worst: f64 = 0.0;
                for mp in (m - band).max(lo)..=(m + band).min(hi) {
                    let total: Complex64 = (0..self.len()).map(|c| self.entry(c, m, mp)).sum();
                    let target = if m == mp { 1.0 } else { 0.0 };
                    worst = worst.max((total - target).norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Projectivity of `cell` and its commutators with `others`.
    pub fn cell_residuals(&self, cell: usize, others: &[usize]) -> Result<CellResiduals> {
        if cell >= self.len() || others.iter().any(|&o| o >= self.len()) {
            return Err(QtrajError::invalid("cell", "index out of range"));
        }
        let dx = self.grid.delta_x;
        let k = (RESIDUAL_BAND / dx).ceil() as usize;
        let (_, ip) = self.grid.cell_coords(cell);
        let (p0, p1) = self.grid.p_bounds(ip);
        let pad = k as f64 + 4.5 / dx;
        let lo = (p0 / self.grid.hbar - pad).floor() as i64;
        let hi = (p1 / self.grid.hbar + pad).ceil() as i64;
        let a = Band::build(self, cell, lo, hi, k);
        let trace: f64 = (0..a.n).map(|i| a.get(i, i).re).sum();
        let sq_trace: f64 = a.data.iter().map(|z| z.norm_sqr()).sum();
        let a2 = a.product(&a);
        let mut projectivity_max: f64 = 0.0;
        for i in 0..a.n {
            for j in a2.cols(i) {
                projectivity_max = projectivity_max.max((a2.get(i, j) - a.get(i, j)).norm());
            }
        }
        let a_frob = sq_trace.sqrt();
        let mut commutators = Vec::with_capacity(others.len());
        for &o in others {
            let b = Band::build(self, o, lo, hi, k);
            let b_frob = b.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let ab = a.product(&b);
            let (mut max_abs, mut frob2): (f64, f64) = (0.0, 0.0);
            for i in 0..ab.n {
                for j in ab.cols(i) {
                    // [A, B] = AB - (AB)^dag for hermitian A and B.
                    let v = ab.get(i, j) - ab.get(j, i).conj();
                    max_abs = max_abs.max(v.norm());
                    frob2 += v.norm_sqr();
                }
            }
            let denom = a_frob * b_frob;
            commutators.push(CommutatorNorm { i: cell, j: o, max_abs, relative: if denom > 0.0 { frob2.sqrt() / denom } else { 0.0 } });
        }
        Ok(CellResiduals {
            cell,
            trace,
            projectivity_max,
            projectivity_fraction: if trace > 0.0 { (trace - sq_trace) / trace } else { 0.0 },
            commutators,
        })
    }
}

/// Banded matrix over basis states `lo..lo + n` with half-width `k`.
struct Band {
    n: usize,
    k: usize,
    data: Vec<Complex64>,
}

impl Band {
    fn build(povm: &PhaseSpacePovm, cell: usize, lo: i64, hi: i64, k: usize) -> Self {
        let n = (hi - lo + 1) as usize;
        let w = 2 * k + 1;
        let mut data = vec![c64(0.0, 0.0); n * w];
        data.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
            for (off, slot) in row.iter_mut().enumerate() {
                let j = i as i64 + off as i64 - k as i64;
                if j >= 0 && (j as usize) < n {
                    *slot = povm.entry(cell, lo + i as i64, lo + j);
                }
            }
        });
        Self { n, k, data }
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.k)..(i + self.k + 1).min(self.n)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> Complex64 {
        if i.abs_diff(j) > self.k {
            return c64(0.0, 0.0);
        }
        self.data[i * (2 * self.k + 1) + j + self.k - i]
    }

    fn product(&self, other: &Band) -> Band {
        debug_assert_eq!(self.n, other.n);
        let k = self.k + other.k;
        let w = 2 * k + 1;
        let mut data = vec![c64(0.0, 0.0); self.n * w];
        data.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
            let ls = self.cols(i);
            for j in i.saturating_sub(k)..(i + k + 1).min(self.n) {
                let start = ls.start.max(j.saturating_sub(other.k));
                let end = ls.end.min(j + other.k + 1);
                let mut acc = c64(0.0, 0.0);
                for l in start..end {
                    acc += self.data[i * (2 * self.k + 1) + l + self.k - i] * other.data[l * (2 * other.k + 1) + j + other.k - l];
                }
                row[j + k - i] = acc;
            }
        });
        Band { n: self.n, k, data }
    }
}

#[cfg(test)]
mod tests {
    use super::super::quantum::{coherent_state, default_delta_x, evolve_rotor, smooth_truncation};
    use super::super::RotorParams;
    use super::*;
    use crate::qcore::check_povm;

    fn husimi_grid(hbar: f64) -> PhaseSpaceGrid {
        PhaseSpaceGrid::husimi_resolution(hbar, default_delta_x(hbar), -2.0, 4.5).unwrap()
    }

    #[test]
    fn husimi_of_coherent_state_is_normalized_and_peaked() {
        let hbar = 1e-2;
        let psi = coherent_state(2.0, 1.0, hbar, default_delta_x(hbar), 300).unwrap();
        let h = husimi(&psi, &husimi_grid(hbar)).unwrap();
        assert!(h.values.iter().all(|&v| v >= 0.0));
        assert!((h.total_probability() - 1.0).abs() < 1e-4);
        let (ix, ip) = h.grid.cell_coords(h.argmax_cell());
        let (x0, x1) = h.grid.x_bounds(ix);
        let (p0, p1) = h.grid.p_bounds(ip);
        assert!((x0..x1).contains(&2.0) && (p0..p1).contains(&1.0), "{x0} {x1} {p0} {p1}");
    }

    #[test]
    fn husimi_marginal_matches_smoothed_density() {
        let hbar = 1e-2;
        let p = RotorParams::chaotic_demo();
        let psi0 = coherent_state(2.0, 1.0, hbar, default_delta_x(hbar), smooth_truncation(500)).unwrap();
        let psi = evolve_rotor(&psi0, &p, 0.0, p.default_dt(), 600).unwrap();
        let grid = husimi_grid(hbar);
        let h = husimi(&psi, &grid).unwrap();
        assert!((h.total_probability() - 1.0).abs() < 1e-4);
        let marginal = h.x_marginal();
        // Oracle: |psi(x)|^2 convolved with a gaussian of variance delta_x^2.
        let n = 4096;
        let dens: Vec<f64> = psi.on_angle_grid(n).iter().map(|z| z.norm_sqr() / TAU).collect();
        let dx = grid.delta_x;
        let h = TAU / n as f64;
        let mut l1 = 0.0;
        for (ix, &m) in marginal.iter().enumerate() {
            let (x, _) = grid.cell_center(grid.cell_index(ix, 0));
            let smooth: f64 = dens
                .iter()
                .enumerate()
                .map(|(k, d)| {
                    let s = (k as f64 * h - x + PI).rem_euclid(TAU) - PI;
                    d * (-(s * s) / (2.0 * dx * dx)).exp()
                })
                .sum::<f64>()
                * h
                / (dx * (TAU).sqrt());
            l1 += (m - smooth).abs() * grid.cell_x();
        }
        assert!(l1 < 0.02, "L1 {l1}");
    }

    #[test]
    fn coarse_probabilities_ignore_cell_boundaries() {
        let hbar = 1e-2;
        let p = RotorParams::chaotic_demo();
        let psi0 = coherent_state(2.0, 1.0, hbar, default_delta_x(hbar), smooth_truncation(500)).unwrap();
        let psi = evolve_rotor(&psi0, &p, 0.0, p.default_dt(), 1500).unwrap();
        let grid = husimi_grid(hbar);
        let a = husimi(&psi, &grid).unwrap();
        let b = husimi(&psi, &grid.with_x_offset(0.37 * grid.cell_x())).unwrap();
        let region = |x: f64, p: f64| x < PI && p > 0.8;
        let (pa, pb) = (a.region_probability(region), b.region_probability(region));
        assert!(pa > 0.05 && (pa - pb).abs() < 0.01, "{pa} {pb}");
    }

    #[test]
    fn single_cell_is_identity() {
        let grid = PhaseSpaceGrid::new(1, 1, -1.0, 1.0, 0.002, 0.01).unwrap();
        let povm = phase_space_povm(&grid).unwrap();
        let e = povm.element(0).unwrap();
        assert!(e.max_abs_diff(&OperatorMatrix::identity(povm.dim())).unwrap() < 1e-9);
    }

    #[test]
    fn coherence_ratio_is_enforced() {
        let grid = PhaseSpaceGrid::new(16, 4, -1.0, 1.0, 0.02, 0.1).unwrap();
        assert!(phase_space_povm(&grid).is_err());
        assert!(husimi(&coherent_state(0.0, 0.0, 0.02, 0.1, 50).unwrap(), &grid).is_ok());
    }

    #[test]
    fn cells_resolve_the_identity() {
        for ratio in [10.0, 30.0] {
            let povm = phase_space_povm(&PhaseSpaceGrid::ratio_sweep(ratio).unwrap()).unwrap();
            let set = povm.to_povm_set().unwrap();
            let report = check_povm(&set, 1e-6).unwrap();
            assert!(report.pass, "ratio {ratio}: {}", report.completeness_residual);
            assert!((povm.completeness_residual() - report.completeness_residual).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_residuals_agree_with_dense_check() {
        let grid = PhaseSpaceGrid::ratio_sweep(10.0).unwrap().with_x_offset(0.0);
        let grid = PhaseSpaceGrid { p_min: -6.0, p_max: 6.0, p_cells: 12, ..grid };
        let povm = phase_space_povm(&grid).unwrap();
        let cell = grid.cell_index(0, 6);
        let others = [grid.cell_index(1, 6), grid.cell_index(0, 7)];
        let banded = povm.cell_residuals(cell, &others).unwrap();
        let a = povm.element(cell).unwrap();
        let dense_fraction = {
            let sq = &a * &a;
            (a.trace().re - sq.trace().re) / a.trace().re
        };
        assert!((banded.projectivity_fraction / dense_fraction - 1.0).abs() < 1e-6);
        let b = povm.element(others[0]).unwrap();
        let c = a.commutator(&b).unwrap();
        assert!((banded.commutators[0].max_abs - c.max_abs()).abs() < 1e-7);
    }

    #[test]
    fn relative_residuals_shrink_with_cell_ratio() {
        let mut prev: Option<CellResiduals> = None;
        for ratio in [10.0, 30.0] {
            let grid = PhaseSpaceGrid::ratio_sweep(ratio).unwrap();
            let povm = phase_space_povm(&grid).unwrap();
            let r = povm.cell_residuals(grid.cell_index(0, 1), &[grid.cell_index(1, 1), grid.cell_index(0, 2)]).unwrap();
            if let Some(p) = prev {
                assert!(r.projectivity_fraction < p.projectivity_fraction);
                for (a, b) in r.commutators.iter().zip(&p.commutators) {
                    assert!(a.relative < b.relative);
                }
            }
            prev = Some(r);
        }
    }
}
