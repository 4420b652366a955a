//! Spectral and statistical analysis of the PID operator.
//!
//! Builds the linear part `A` and offset `b` of the PID VI map on `[V; z; V']`,
//! reports its spectrum and the two stability predicates (spectral radius for
//! VI, largest real part for TD), and evaluates the noise and error-bound
//! formulas used to compare TD and PID TD.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, DenseMatrix};
use crate::mdp::{MarkovRewardProcess, Policy, TabularMdp};
use crate::planning::{pid_vi_step_pe, Gains, PeState};

/// Affine form `L_PID x = a x + b` of one PID VI step.
#[derive(Debug, Clone, PartialEq)]
pub struct PidMatrix {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

impl PidMatrix {
    pub fn apply(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.a.mul_vec(stacked)?;
        out.iter_mut().zip(&self.b).for_each(|(o, b)| *o += b);
        Ok(out)
    }
}

/// Assembles the 3x3 block matrix
///
/// ```text
/// [ (1 - kp + kd - ki a) I + g (kp + ki a) P   b ki I   -kd I ]
/// [ -a I + g a P                               b I       0    ]
/// [ I                                          0         0    ]
/// ```
///
/// with `a = alpha`, `b = beta`, `g = gamma`. The offset is `L_PID(0)`.
pub fn build_pid_matrix(mrp: &MarkovRewardProcess, gains: &Gains) -> Result<PidMatrix> {
    gains.validate()?;
    let n = mrp.n_states();
    let p = mrp.kernel();
    let gamma = mrp.gamma();
    let Gains {
        kp,
        ki,
        kd,
        alpha,
        beta,
    } = *gains;
    let mut a = DenseMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = gamma * (kp + ki * alpha) * p[(i, j)];
            a[(n + i, j)] = gamma * alpha * p[(i, j)];
        }
        a[(i, i)] += 1.0 - kp + kd - ki * alpha;
        a[(i, n + i)] = beta * ki;
        a[(i, 2 * n + i)] = -kd;
        a[(n + i, i)] -= alpha;
        a[(n + i, n + i)] = beta;
        a[(2 * n + i, i)] = 1.0;
    }
    let b = pid_vi_step_pe(mrp, gains, &PeState::zeros(n))?.stacked();
    Ok(PidMatrix { a, b })
}

/// Spectrum of the PID matrix and the stability predicates derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub spectral_radius: f64,
    pub max_real_part: f64,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    /// `spectral_radius < 1`: PID VI converges.
    pub vi_convergent: bool,
    /// `max_real_part < 1`: the PID TD mean dynamics are stable.
    pub td_convergent: bool,
}

impl SpectralReport {
    pub fn from_eigenvalues(ev: &[Complex64]) -> Self {
        let spectral_radius = ev.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let max_real_part = ev.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        Self {
            spectral_radius,
            max_real_part,
            eigenvalues: ev.iter().map(|e| (e.re, e.im)).collect(),
            vi_convergent: spectral_radius < 1.0,
            td_convergent: max_real_part < 1.0,
        }
    }
}

pub fn spectral_report(mrp: &MarkovRewardProcess, gains: &Gains) -> Result<SpectralReport> {
    let m = build_pid_matrix(mrp, gains)?;
    Ok(SpectralReport::from_eigenvalues(&eigenvalues(&m.a)?))
}

/// Spectral reports for every gain setting in `grid`, in grid order.
pub fn scan_gains(mrp: &MarkovRewardProcess, grid: &[Gains]) -> Result<Vec<(Gains, SpectralReport)>> {
    grid.par_iter()
        .map(|g| Ok((*g, spectral_report(mrp, g)?)))
        .collect()
}

/// Cartesian product of controller gains, `kp` outermost, with fixed
/// `(alpha, beta)`.
pub fn gain_grid(kp: &[f64], ki: &[f64], kd: &[f64], alpha: f64, beta: f64) -> Vec<Gains> {
    let mut out = Vec::with_capacity(kp.len() * ki.len() * kd.len());
    for &p in kp {
        for &i in ki {
            for &d in kd {
                out.push(Gains {
                    kp: p,
                    ki: i,
                    kd: d,
                    alpha,
                    beta,
                });
            }
        }
    }
    out
}

/// Grid behind `analyze --scan-gains`: 9 x 7 x 9 controller gains around
/// the VI point with `alpha = 0.05, beta = 0.95`.
pub fn default_scan_grid() -> Vec<Gains> {
    gain_grid(
        &[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0],
        &[-0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0],
        &[-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
        0.05,
        0.95,
    )
}

/// `||A^(2^k)||_inf^(1/2^k)` by repeated squaring, renormalizing after each
/// squaring so the powers never overflow.
pub fn gelfand_radius_estimate(matrix: &DenseMatrix, k: u32) -> Result<f64> {
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch {
            context: "gelfand radius (square matrix)",
            expected: matrix.rows(),
            found: matrix.cols(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("gelfand radius needs k >= 1".into()));
    }
    let norm = matrix.norm_inf();
    if norm == 0.0 {
        return Ok(0.0);
    }
    // A^(2^i) = exp(log_scale) * m
    let mut m = matrix.clone();
    m.scale(1.0 / norm);
    let mut log_scale = norm.ln();
    for _ in 0..k {
        m = m.matmul(&m)?;
        let s = m.norm_inf();
        if s == 0.0 {
            return Ok(0.0);
        }
        m.scale(1.0 / s);
        log_scale = 2.0 * log_scale + s.ln();
    }
    Ok((log_scale / 2f64.powi(k as i32)).exp())
}

/// Degree of determinism of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminismReport {
    pub d: f64,
    /// `max_x Var[R | x]`, reward noise left after conditioning on the next state.
    pub max_reward_variance: f64,
    /// `min_x max_x' P^pi(x'|x)`.
    pub min_max_transition: f64,
}

/// Largest `d` with `Var[R^pi(x)] <= (1 - d)/4` and `max_x' P^pi(x'|x) >= d`
/// for every `x`.
///
/// Rewards here may be a deterministic function of the next state, in which
/// case that part of their spread is transition noise, not reward noise. The
/// variance used is therefore `E_x'[Var(R | x, x')]`, the reward variance
/// that remains once the next state is known.
pub fn d_determinism(mdp: &TabularMdp, policy: &Policy) -> Result<DeterminismReport> {
    let kernel = mdp.policy_kernel(policy)?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let mut max_var: f64 = 0.0;
    let mut min_max_p = f64::INFINITY;
    for x in 0..n {
        let mut var = 0.0;
        for y in 0..n {
            let py = kernel[(x, y)];
            if py <= 0.0 {
                continue;
            }
            // action posterior given (x, x') weights the reward values
            let weight = |a: usize| policy.prob(x, a) * mdp.transition_prob(x, a, y) / py;
            let mean: f64 = (0..m).map(|a| weight(a) * mdp.transition_reward(x, a, y)).sum();
            let spread: f64 = (0..m).map(|a| weight(a) * (mdp.transition_reward(x, a, y) - mean).powi(2)).sum();
            var += py * spread;
        }
        max_var = max_var.max(var);
        min_max_p = min_max_p.min(kernel.row(x).iter().copied().fold(0.0, f64::max));
    }
    let d = (1.0 - 4.0 * max_var).min(min_max_p).clamp(0.0, 1.0);
    Ok(DeterminismReport {
        d,
        max_reward_variance: max_var,
        min_max_transition: min_max_p,
    })
}

fn check_d(d: f64) -> Result<()> {
    if (0.0..=1.0).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("determinism d = {d} outside [0, 1]")))
    }
}

/// `c = max((kp + ki alpha)^2, alpha^2)`.
pub fn pid_noise_factor(gains: &Gains) -> f64 {
    (gains.kp + gains.ki * gains.alpha).powi(2).max(gains.alpha.powi(2))
}

/// Per-state bound `(1-d)/4 + 5 g^2 (1-d) v^2` on the second moment of the
/// sampled Bellman backup noise, for rewards supported in `[0, 1]`.
pub fn noise_bound_scalar(d: f64, gamma: f64, v_inf: f64) -> Result<f64> {
    noise_bound_scalar_with_range(d, gamma, v_inf, 1.0)
}

/// [`noise_bound_scalar`] for rewards supported on an interval of width
/// `reward_range`; the reward-variance term scales by `reward_range^2`.
pub fn noise_bound_scalar_with_range(d: f64, gamma: f64, v_inf: f64, reward_range: f64) -> Result<f64> {
    check_d(d)?;
    Ok((1.0 - d) * reward_range * reward_range / 4.0 + 5.0 * gamma * gamma * (1.0 - d) * v_inf * v_inf)
}

/// `n` times the scalar bound: bounds `E[||W||_inf^2]` for synchronous TD.
pub fn noise_bound_td(d: f64, n: usize, gamma: f64, v_inf: f64) -> Result<f64> {
    Ok(n as f64 * noise_bound_scalar(d, gamma, v_inf)?)
}

/// `3n c` times the scalar bound: bounds `E[||W~||_inf^2]` for synchronous PID TD.
pub fn noise_bound_pid(d: f64, n: usize, gamma: f64, gains: &Gains, vtilde_inf: f64) -> Result<f64> {
    Ok(3.0 * n as f64 * pid_noise_factor(gains) * noise_bound_scalar(d, gamma, vtilde_inf)?)
}

/// Lower bound on the initial optimization-to-statistical error ratio of
/// synchronous TD. `+inf` when `d = 1`.
pub fn prop1_ratio_td(v0_err_inf: f64, v_inf: f64, n: usize, gamma: f64, d: f64) -> Result<f64> {
    check_d(d)?;
    if d == 1.0 {
        return Ok(f64::INFINITY);
    }
    let (n, g2) = (n as f64, gamma * gamma);
    Ok(v0_err_inf.powi(2) * (5.0 * g2 * n * (1.0 - d) + 2.0)
        / (std::f64::consts::E * n * (1.0 - d) * (1.0 + 40.0 * g2 * v_inf * v_inf)))
}

/// PID counterpart of [`prop1_ratio_td`].
pub fn prop1_ratio_pid(v0_err_inf: f64, v_inf: f64, n: usize, gamma: f64, d: f64, gains: &Gains) -> Result<f64> {
    check_d(d)?;
    if d == 1.0 {
        return Ok(f64::INFINITY);
    }
    let (n, g2, c) = (n as f64, gamma * gamma, pid_noise_factor(gains));
    Ok(v0_err_inf.powi(2) * (15.0 * c * g2 * n * (1.0 - d) + 2.0)
        / (3.0 * std::f64::consts::E * c * n * (1.0 - d) * (1.0 + 40.0 * g2 * v_inf * v_inf)))
}

/// Inputs to the synchronous error bound. `rate` is `gamma` for TD and the
/// spectral radius for PID TD; pass `gamma + delta` for the shifted variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Params {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub epsilon: f64,
    /// Schedule offset `T` in `mu(t) = epsilon / (t + T)`.
    pub offset: f64,
    pub rate: f64,
    pub v0_err_inf: f64,
    pub v_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub opt: f64,
    pub stat: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.opt + self.stat
    }
}

/// Optimization and statistical terms of the bound at iteration `t`:
///
/// ```text
/// opt  = c2 ||V0 - V||^2 (T / (t + T))^(eps (1 - rate))
/// stat = eps (c3 + c4 ||V||^2) / (eps (1 - rate) - 1) * eps / (t + T)
/// ```
pub fn theorem2_bound(p: &Theorem2Params, t: f64) -> Result<BoundTerms> {
    let exponent = p.epsilon * (1.0 - p.rate);
    if !(exponent > 1.0) {
        return Err(Error::ConditionViolated(format!(
            "epsilon * (1 - rate) = {exponent} must exceed 1"
        )));
    }
    if !(p.offset > 0.0) || !(t >= 0.0) {
        return Err(Error::ConditionViolated(format!(
            "need T > 0 and t >= 0, got T = {}, t = {t}",
            p.offset
        )));
    }
    let opt = p.c2 * p.v0_err_inf.powi(2) * (p.offset / (t + p.offset)).powf(exponent);
    let stat = p.epsilon * (p.c3 + p.c4 * p.v_inf.powi(2)) / (exponent - 1.0) * (p.epsilon / (t + p.offset));
    Ok(BoundTerms { opt, stat })
}
