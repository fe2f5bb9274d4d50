//! The decaying two-level atom: rapid-dispersal decay rate, arrival-time
//! probabilities, and photon-counting versus homodyne unravelings.
//!
//! Basis index 0 is the ground state `|psi_0>`, index 1 the excited state
//! `|psi_1>`, and the lowering operator is `a = |psi_0><psi_1|`.
//! Kraus sets returned here list the no-click operator first and the click
//! operator second.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QtrajError, Result};
use crate::qcore::{c64, Complex64, OperatorMatrix, PovmKind, PovmSet, RngStream, StateVector};

/// Upper bound on `gamma * eta` for the window approximation to hold.
pub const MAX_GAMMA_ETA: f64 = 0.05;
/// Width of the gaussian standing in for `tau delta(t)`, as a fraction of `tau`.
pub const KERNEL_WIDTH_FRACTION: f64 = 1.0 / 20.0;

pub const NO_CLICK: usize = 0;
pub const CLICK: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFieldParams {
    pub lambda_coupling: f64,
    pub tau_dispersal: f64,
    pub omega: f64,
    pub eta: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

fn one() -> f64 {
    1.0
}

impl AtomFieldParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_coupling", self.lambda_coupling), ("tau_dispersal", self.tau_dispersal), ("eta", self.eta), ("hbar", self.hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(QtrajError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        check_window(decay_rate(self)?, self.eta)
    }
}

fn check_window(gamma: f64, eta: f64) -> Result<()> {
    if !(gamma >= 0.0 && eta > 0.0) {
        return Err(QtrajError::invalid("eta", "gamma must be non-negative and eta positive"));
    }
    if gamma * eta >= MAX_GAMMA_ETA {
        return Err(QtrajError::invalid("eta", format!("gamma * eta = {} must stay below {MAX_GAMMA_ETA}", gamma * eta)));
    }
    Ok(())
}

/// `gamma = lambda^2 tau / (2 hbar^2)`.
pub fn decay_rate(p: &AtomFieldParams) -> Result<f64> {
    if p.lambda_coupling < 0.0 || p.tau_dispersal < 0.0 || !(p.hbar > 0.0) {
        return Err(QtrajError::invalid("params", "coupling, dispersal time and hbar must be positive"));
    }
    Ok(p.lambda_coupling.powi(2) * p.tau_dispersal / (2.0 * p.hbar * p.hbar))
}

/// Excited-state amplitude `f(t)` from the memory-kernel equation
/// `f' = -(lambda/hbar)^2 int_0^t q(t - t') f(t') dt'` with a gaussian `q`
/// of area `tau` and width `width`, integrated with step `h`.
///
/// The convolution uses trapezoid weights over the last `6 width` of
/// history, and time stepping is the implicit trapezoid rule.
/// Returns samples `(t, f)` every `stride` steps.
pub fn memory_kernel_amplitude(p: &AtomFieldParams, width: f64, h: f64, t_max: f64, stride: usize) -> Result<Vec<(f64, f64)>> {
    if !(width > 0.0 && h > 0.0 && h < width && t_max > 0.0 && stride > 0) {
        return Err(QtrajError::invalid("width", "need 0 < h < width, t_max > 0 and stride > 0"));
    }
    let k2 = (p.lambda_coupling / p.hbar).powi(2);
    let taps = ((6.0 * width / h).ceil() as usize).max(2);
    let norm = h * p.tau_dispersal / (width * (2.0 * std::f64::consts::PI).sqrt());
    let q: Vec<f64> = (0..taps).map(|k| norm * (-0.5 * (k as f64 * h / width).powi(2)).exp()).collect();
    // history[k] = f at step m - k
    let mut history = std::collections::VecDeque::with_capacity(taps);
    history.push_front(1.0);
    let n = (t_max / h).ceil() as usize;
    let mut out = vec![(0.0, 1.0)];
    let mut deriv = 0.0;
    let self_weight = 0.5 * q[0];
    for m in 1..=n {
        let reach = m.min(taps - 1);
        let mut hist = 0.0;
        for k in 1..=reach {
            let w = if k == m { 0.5 } else { 1.0 };
            hist += w * q[k] * history[k - 1];
        }
        let f_prev = history[0];
        let next = (f_prev + 0.5 * h * (deriv - k2 * hist)) / (1.0 + 0.5 * h * k2 * self_weight);
        deriv = -k2 * (hist + self_weight * next);
        if history.len() == taps {
            history.pop_back();
        }
        history.push_front(next);
        if m % stride == 0 {
            out.push((m as f64 * h, next));
        }
    }
    Ok(out)
}

/// `p_0 = e^{-2 gamma n eta}` and `p_j = 2 gamma eta e^{-2 gamma j eta}` for `j = 1..=n`.
pub fn arrival_probs(gamma: f64, eta: f64, n_windows: usize) -> Result<Vec<f64>> {
    check_window(gamma, eta)?;
    let mut p = Vec::with_capacity(n_windows + 1);
    p.push((-2.0 * gamma * n_windows as f64 * eta).exp());
    for j in 1..=n_windows {
        p.push(2.0 * gamma * eta * (-2.0 * gamma * j as f64 * eta).exp());
    }
    Ok(p)
}

pub fn lowering() -> OperatorMatrix {
    OperatorMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0]).expect("2x2")
}

fn check_two_level(h: &OperatorMatrix) -> Result<()> {
    if h.dim() != 2 {
        return Err(QtrajError::DimensionMismatch { expected: 2, found: h.dim() });
    }
    h.ensure_hermitian()
}

/// `Omega_noclick = 1 - (iH + gamma a^dag a) eta`, `Omega_click = sqrt(2 gamma eta) a`.
pub fn photon_counting_ops(gamma: f64, eta: f64, h: &OperatorMatrix) -> Result<PovmSet> {
    homodyne_ops(gamma, eta, c64(0.0, 0.0), h)
}

/// `Omega_1 = 1 - (iH + 2 sqrt(gamma) beta^* a + gamma a^dag a + |beta|^2) eta`,
/// `Omega_0 = sqrt(2 eta) (sqrt(gamma) a + beta)`.
pub fn homodyne_ops(gamma: f64, eta: f64, beta: Complex64, h: &OperatorMatrix) -> Result<PovmSet> {
    check_window(gamma, eta)?;
    if beta.norm_sqr() * eta >= MAX_GAMMA_ETA {
        return Err(QtrajError::invalid("eta", format!("|beta|^2 eta = {} must stay below {MAX_GAMMA_ETA}", beta.norm_sqr() * eta)));
    }
    check_two_level(h)?;
    let a = lowering();
    let id = OperatorMatrix::identity(2);
    let n_op = &a.adjoint() * &a;
    let sg = gamma.sqrt();
    let gen = &(&(&h.scale(c64(0.0, 1.0)) + &a.scale(beta.conj() * (2.0 * sg))) + &n_op.scale_real(gamma)) + &id.scale_real(beta.norm_sqr());
    let omega_1 = &id - &gen.scale_real(eta);
    let omega_0 = (&a.scale_real(sg) + &id.scale(beta)).scale_real((2.0 * eta).sqrt());
    PovmSet::new(vec![omega_1, omega_0], PovmKind::Kraus)
}

/// `max |sum Omega_i^dag Omega_i - 1|` of a Kraus set.
pub fn completeness_residual(ops: &PovmSet) -> f64 {
    let mut total = OperatorMatrix::zeros(ops.dim());
    for e in ops.effects() {
        total = &total + e;
    }
    total.max_abs_diff(&OperatorMatrix::identity(ops.dim())).expect("same dimension")
}

#[derive(Clone, Copy, Debug)]
struct Kraus2 {
    m: [[[Complex64; 2]; 2]; 2],
}

impl Kraus2 {
    fn from_set(ops: &PovmSet) -> Result<Self> {
        if ops.dim() != 2 || ops.len() != 2 || ops.kind() != PovmKind::Kraus {
            return Err(QtrajError::invalid("ops", "unraveling needs a two-element Kraus set on a two-level atom"));
        }
        let mut m = [[[c64(0.0, 0.0); 2]; 2]; 2];
        for (k, om) in ops.elements().iter().enumerate() {
            for (i, row) in m[k].iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = om.get(i, j);
                }
            }
        }
        Ok(Self { m })
    }

    #[inline]
    fn apply(&self, k: usize, c: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.m[k];
        [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]]
    }
}

#[inline]
fn norm2(c: &[Complex64; 2]) -> f64 {
    c[0].norm_sqr() + c[1].norm_sqr()
}

/// One unraveled path: the excited-state overlap after every window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSeries {
    pub eta: f64,
    /// `|<psi_1|psi(t)>|` at `t = 0, eta, 2 eta, ...`.
    pub overlap: Vec<f64>,
    /// Whether window `k` (ending at `(k+1) eta`) registered a click.
    pub clicked: Vec<bool>,
    pub max_norm_error: f64,
}

impl OverlapSeries {
    pub fn click_count(&self) -> usize {
        self.clicked.iter().filter(|&&c| c).count()
    }

    pub fn first_click_time(&self) -> Option<f64> {
        self.clicked.iter().position(|&c| c).map(|k| (k + 1) as f64 * self.eta)
    }

    /// Sum of squared overlap increments along the path.
    pub fn quadratic_variation(&self) -> f64 {
        self.overlap.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,overlap,clicked\n");
        for (k, o) in self.overlap.iter().enumerate() {
            let c = k > 0 && self.clicked[k - 1];
            s.push_str(&format!("{:.17e},{:.17e},{}\n", k as f64 * self.eta, o, c as u8));
        }
        s
    }
}

/// Window-by-window sampling and conditioning with the exact Kraus weights.
pub fn unravel(ops: &PovmSet, psi0: &StateVector, steps: usize, eta: f64, rng: &mut RngStream) -> Result<OverlapSeries> {
    let k = Kraus2::from_set(ops)?;
    psi0.check_dim(2)?;
    psi0.ensure_normalized()?;
    let mut c = [psi0.amplitude(0), psi0.amplitude(1)];
    let mut overlap = Vec::with_capacity(steps + 1);
    let mut clicked = Vec::with_capacity(steps);
    overlap.push(c[1].norm());
    let mut max_norm_error: f64 = 0.0;
    for _ in 0..steps {
        let (next, click) = window_step(&k, c, rng)?;
        c = next;
        max_norm_error = max_norm_error.max((norm2(&c).sqrt() - 1.0).abs());
        overlap.push(c[1].norm());
        clicked.push(click);
    }
    Ok(OverlapSeries { eta, overlap, clicked, max_norm_error })
}

#[inline]
fn window_step(k: &Kraus2, c: [Complex64; 2], rng: &mut RngStream) -> Result<([Complex64; 2], bool)> {
    let quiet = k.apply(NO_CLICK, c);
    let click = k.apply(CLICK, c);
    let (wq, wc) = (norm2(&quiet), norm2(&click));
    let total = wq + wc;
    if !(total > 0.0 && total.is_finite()) {
        return Err(QtrajError::NonFinite { what: "window weights" });
    }
    let is_click = rng.uniform() * total < wc;
    let (v, w) = if is_click { (click, wc) } else { (quiet, wq) };
    let inv = 1.0 / w.sqrt();
    Ok(([v[0] * inv, v[1] * inv], is_click))
}

/// Per-path summaries gathered without storing whole series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub eta: f64,
    pub steps: usize,
    pub n_paths: usize,
    /// End time of the window of each path's first click.
    pub first_click: Vec<Option<f64>>,
    pub click_counts: Vec<u32>,
    pub quadratic_variation: Vec<f64>,
    /// Times at which populations were recorded.
    pub sample_times: Vec<f64>,
    /// `populations[s][p]`: excited population of path `p` at `sample_times[s]`.
    pub populations: Vec<Vec<f64>>,
    pub max_norm_error: f64,
}

impl EnsembleStats {
    pub fn mean_population(&self, s: usize) -> (f64, f64) {
        mean_se(&self.populations[s])
    }

    pub fn mean_quadratic_variation(&self) -> (f64, f64) {
        mean_se(&self.quadratic_variation)
    }

    /// Fraction of paths with no click by time `t`.
    pub fn survival(&self, t: f64) -> f64 {
        let alive = self.first_click.iter().filter(|c| c.is_none_or(|tc| tc > t + 1e-12)).count();
        alive as f64 / self.n_paths as f64
    }
}

pub(crate) fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, (var / n).sqrt())
}

/// Runs `n_paths` paths in parallel; path `p` uses stream `p` so that
/// different operator sets see common random numbers.
pub fn unravel_ensemble(
    ops: &PovmSet,
    psi0: &StateVector,
    steps: usize,
    eta: f64,
    n_paths: usize,
    seed: u64,
    sample_every: usize,
) -> Result<EnsembleStats> {
    let k = Kraus2::from_set(ops)?;
    psi0.check_dim(2)?;
    psi0.ensure_normalized()?;
    if sample_every == 0 {
        return Err(QtrajError::invalid("sample_every", "must be positive"));
    }
    let c0 = [psi0.amplitude(0), psi0.amplitude(1)];
    let sample_steps: Vec<usize> = (0..=steps).step_by(sample_every).collect();
    struct PathOut {
        first: Option<f64>,
        clicks: u32,
        qv: f64,
        pops: Vec<f64>,
        norm_err: f64,
    }
    let outs: Vec<PathOut> = (0..n_paths)
        .into_par_iter()
        .map(|p| -> Result<PathOut> {
            let mut rng = RngStream::new(seed, p as u64);
            let mut c = c0;
            let mut prev = c[1].norm();
            let mut out = PathOut { first: None, clicks: 0, qv: 0.0, pops: Vec::with_capacity(sample_steps.len()), norm_err: 0.0 };
            out.pops.push(c[1].norm_sqr());
            for s in 1..=steps {
                let (next, click) = window_step(&k, c, &mut rng)?;
                c = next;
                let ov = c[1].norm();
                out.qv += (ov - prev).powi(2);
                prev = ov;
                if click {
                    out.clicks += 1;
                    if out.first.is_none() {
                        out.first = Some(s as f64 * eta);
                    }
                }
                if s % sample_every == 0 {
                    out.pops.push(c[1].norm_sqr());
                    out.norm_err = out.norm_err.max((norm2(&c).sqrt() - 1.0).abs());
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let populations = (0..sample_steps.len()).map(|s| outs.iter().map(|o| o.pops[s]).collect()).collect();
    Ok(EnsembleStats {
        eta,
        steps,
        n_paths,
        first_click: outs.iter().map(|o| o.first).collect(),
        click_counts: outs.iter().map(|o| o.clicks).collect(),
        quadratic_variation: outs.iter().map(|o| o.qv).collect(),
        sample_times: sample_steps.iter().map(|&s| s as f64 * eta).collect(),
        populations,
        max_norm_error: outs.iter().map(|o| o.norm_err).fold(0.0, f64::max),
    })
}

/// Kolmogorov-Smirnov comparison of binned jump times with an exponential law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Asymptotic Kolmogorov survival function `Q(x) = 2 sum (-1)^{k-1} e^{-2 k^2 x^2}`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic of first-click times against `1 - exp(-rate t)`, evaluated
/// at the window boundaries where binned data carry information.
/// Paths without a click count as surviving the whole horizon.
pub fn ks_exponential(first_click: &[Option<f64>], rate: f64, eta: f64, steps: usize) -> KsResult {
    let n = first_click.len();
    let mut per_window = vec![0usize; steps + 1];
    for tc in first_click.iter().flatten() {
        let k = ((tc / eta).round() as usize).min(steps);
        per_window[k] += 1;
    }
    let mut cum = 0usize;
    let mut d: f64 = 0.0;
    for (k, &count) in per_window.iter().enumerate().skip(1) {
        cum += count;
        let t = k as f64 * eta;
        let model = 1.0 - (-rate * t).exp();
        d = d.max((cum as f64 / n as f64 - model).abs());
    }
    let sn = (n as f64).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * d), n }
}

/// Weighted least-squares rate through the origin of `-ln S(t)` on the
/// window grid up to `t_max`. Each point is weighted by the inverse of its
/// binomial variance `(1 - S) / (n S)`, so the sparse tail does not dominate.
pub fn fit_survival_rate(stats: &EnsembleStats, t_max: f64) -> f64 {
    let n = stats.n_paths as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut surviving = stats.n_paths;
    let mut per_window = vec![0usize; stats.steps + 1];
    for tc in stats.first_click.iter().flatten() {
        per_window[((tc / stats.eta).round() as usize).min(stats.steps)] += 1;
    }
    for (k, &count) in per_window.iter().enumerate().skip(1) {
        let t = k as f64 * stats.eta;
        if t > t_max + 1e-12 {
            break;
        }
        surviving -= count;
        if surviving == 0 {
            break;
        }
        if surviving == stats.n_paths {
            continue;
        }
        let s = surviving as f64 / n;
        let w = n * s / (1.0 - s);
        let y = -s.ln();
        num += w * t * y;
        den += w * t * t;
    }
    num / den
}

/// Censored maximum-likelihood exponential rate: clicks over total exposure.
pub fn fit_exponential_rate(first_click: &[Option<f64>], horizon: f64) -> f64 {
    let clicks = first_click.iter().filter(|c| c.is_some()).count();
    let exposure: f64 = first_click.iter().map(|c| c.unwrap_or(horizon)).sum();
    clicks as f64 / exposure
}

/// The excited state `|psi_1>` and the ground state `|psi_0>`.
pub fn excited() -> StateVector {
    StateVector::basis(2, 1).expect("dimension two")
}

pub fn ground() -> StateVector {
    StateVector::basis(2, 0).expect("dimension two")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_h() -> OperatorMatrix {
        OperatorMatrix::zeros(2)
    }

    #[test]
    fn decay_rate_formula() {
        let p = AtomFieldParams { lambda_coupling: 1.0, tau_dispersal: 2.0, omega: 3.0, eta: 0.01, hbar: 1.0 };
        assert_eq!(decay_rate(&p).unwrap(), 1.0);
        let p0 = AtomFieldParams { lambda_coupling: 0.0, ..p };
        assert_eq!(decay_rate(&p0).unwrap(), 0.0);
        assert!(p.validate().is_ok());
        assert!(AtomFieldParams { eta: 0.1, ..p }.validate().is_err());
    }

    #[test]
    fn narrow_kernel_reproduces_exponential_amplitude() {
        // Rapid dispersal regime: gamma * tau ~ 1e-5.
        let p = AtomFieldParams { lambda_coupling: 0.005, tau_dispersal: 1.0, omega: 0.0, eta: 1.0, hbar: 1.0 };
        let gamma = decay_rate(&p).unwrap();
        let width = KERNEL_WIDTH_FRACTION * p.tau_dispersal;
        let samples = memory_kernel_amplitude(&p, width, width / 16.0, 1.0 / gamma, 20_000).unwrap();
        let worst = samples.iter().map(|&(t, f)| (f - (-gamma * t).exp()).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "max deviation {worst:e}");
        assert!(samples.last().unwrap().1 < 0.4);
    }

    #[test]
    fn arrival_probability_examples() {
        let p = arrival_probs(0.0, 0.01, 10).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1..].iter().all(|&x| x == 0.0));
        let p = arrival_probs(0.5, 0.01, 100).unwrap();
        assert!((p[100] - 0.01 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((p[100] - 3.679e-3).abs() < 1e-6);
        let (gamma, eta): (f64, f64) = (0.5, 0.01);
        let n = (10.0_f64 / gamma / eta).round() as usize;
        let total: f64 = arrival_probs(gamma, eta, n).unwrap().iter().sum();
        assert!((total - 1.0).abs() < gamma * eta);
        assert!(arrival_probs(1.0, 0.1, 5).is_err());
    }

    #[test]
    fn click_operator_is_nilpotent() {
        let ops = photon_counting_ops(0.5, 0.01, &zero_h()).unwrap();
        let c = ops.element(CLICK);
        assert_eq!((c * c).max_abs(), 0.0);
    }

    #[test]
    fn completeness_defect_is_second_order() {
        for beta in [0.0, 1.0, 10.0] {
            let consts: Vec<f64> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&base| base / f64::max(1.0, beta * beta))
                .map(|eta| completeness_residual(&homodyne_ops(0.5, eta, c64(beta, 0.0), &zero_h()).unwrap()) / (eta * eta))
                .collect();
            assert!(consts[0] > 0.0);
            for w in consts.windows(2) {
                assert!((w[1] / w[0] - 1.0).abs() < 0.05, "beta {beta}: {consts:?}");
            }
        }
        let r = completeness_residual(&photon_counting_ops(0.5, 0.01, &zero_h()).unwrap());
        assert!((r - 0.25e-4).abs() < 1e-15);
    }

    #[test]
    fn strong_local_oscillator_needs_short_windows() {
        let h = OperatorMatrix::zeros(2);
        assert!(homodyne_ops(0.5, 1e-2, c64(10.0, 0.0), &h).is_err());
        assert!(homodyne_ops(0.5, 1e-4, c64(10.0, 0.0), &h).is_ok());
    }

    #[test]
    fn zero_beta_homodyne_is_counting() {
        let h = OperatorMatrix::diagonal(&[0.0, 0.3]);
        let a = photon_counting_ops(0.5, 0.01, &h).unwrap();
        let b = homodyne_ops(0.5, 0.01, c64(0.0, 0.0), &h).unwrap();
        for i in 0..2 {
            assert_eq!(a.element(i), b.element(i));
        }
    }

    #[test]
    fn ground_state_is_dark() {
        let ops = photon_counting_ops(0.5, 0.01, &zero_h()).unwrap();
        let s = unravel(&ops, &ground(), 2000, 0.01, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(s.click_count(), 0);
        assert!(s.overlap.iter().all(|&o| o == 0.0));
    }

    #[test]
    fn counting_paths_click_at_most_once() {
        let ops = photon_counting_ops(0.5, 0.01, &zero_h()).unwrap();
        for p in 0..200 {
            let s = unravel(&ops, &excited(), 1000, 0.01, &mut RngStream::new(2, p)).unwrap();
            assert!(s.click_count() <= 1);
            if let Some(t) = s.first_click_time() {
                let k = (t / 0.01).round() as usize;
                assert!(s.overlap[..k].iter().all(|&o| (o - 1.0).abs() < 1e-12));
                assert!(s.overlap[k..].iter().all(|&o| o == 0.0));
            }
            assert!(s.max_norm_error < 1e-10);
        }
    }

    #[test]
    fn ks_q_function_values() {
        assert!((kolmogorov_q(1.36) - 0.049).abs() < 0.002);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 0.001);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn counting_ensemble_follows_exponential_law() {
        let (gamma, eta): (f64, f64) = (0.5, 0.01);
        let steps = (10.0 / gamma / eta) as usize;
        let ops = photon_counting_ops(gamma, eta, &zero_h()).unwrap();
        let stats = unravel_ensemble(&ops, &excited(), steps, eta, 4000, 17, 100).unwrap();
        let ks = ks_exponential(&stats.first_click, 2.0 * gamma, eta, steps);
        assert!(ks.p_value > 0.01, "{ks:?}");
        let rate = fit_exponential_rate(&stats.first_click, steps as f64 * eta);
        assert!((rate / (2.0 * gamma) - 1.0).abs() < 0.05);
        let survival = fit_survival_rate(&stats, 3.0 / gamma);
        assert!((survival / (2.0 * gamma) - 1.0).abs() < 0.05, "{survival}");
        assert!(stats.click_counts.iter().all(|&c| c <= 1));
        let (m, se) = stats.mean_population(5);
        let t = stats.sample_times[5];
        assert!((m - (-2.0 * gamma * t).exp()).abs() < 3.0 * se + 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let ops = photon_counting_ops(0.5, 0.01, &zero_h()).unwrap();
        let s = unravel(&ops, &excited(), 5, 0.01, &mut RngStream::new(1, 0)).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("t,overlap,clicked\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
