//! PID value iteration for policy evaluation and control, with optional
//! model-based gain adaptation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, l2_norm_sq, sup_dist, sup_norm};
use crate::mdp::{greedy_action, MarkovRewardProcess, TabularMdp};

/// Controller gains `(kappa_p, kappa_I, kappa_d)` and integrator `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Gains {
    pub fn new(kp: f64, ki: f64, kd: f64, alpha: f64, beta: f64) -> Result<Self> {
        let g = Self {
            kp,
            ki,
            kd,
            alpha,
            beta,
        };
        g.validate()?;
        Ok(g)
    }

    /// Plain value iteration / TD: `(1, 0, 0)` with a silent integrator.
    pub fn vi() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.kp, self.ki, self.kd, self.alpha, self.beta]
            .iter()
            .all(|g| g.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("gains {self} are not finite")))
        }
    }

    pub fn controller(&self) -> [f64; 3] {
        [self.kp, self.ki, self.kd]
    }

    pub fn with_controller(mut self, k: [f64; 3]) -> Self {
        [self.kp, self.ki, self.kd] = k;
        self
    }

    /// Value-update increment for one entry given residual `br`, trace `z`
    /// and momentum term `v - v_prev`.
    #[inline]
    pub(crate) fn increment(&self, br: f64, z: f64, momentum: f64) -> f64 {
        self.kp * br + self.ki * (self.beta * z + self.alpha * br) + self.kd * momentum
    }
}

impl fmt::Display for Gains {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.kp, self.ki, self.kd, self.alpha, self.beta)
    }
}

/// Parses `kp,ki,kd,alpha,beta`.
impl FromStr for Gains {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("gains '{s}': {e}")))?;
        match parts[..] {
            [kp, ki, kd, alpha, beta] => Gains::new(kp, ki, kd, alpha, beta),
            _ => Err(Error::InvalidConfig(format!(
                "gains '{s}' must have five entries kp,ki,kd,alpha,beta"
            ))),
        }
    }
}

/// Augmented iterate `[V; z; V']`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeState {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub v_prev: Vec<f64>,
}

impl PeState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            z: vec![0.0; n],
            v_prev: vec![0.0; n],
        }
    }

    /// `[V; 0; V]`, the fixed-point shape.
    pub fn from_value(v: Vec<f64>) -> Self {
        Self {
            z: vec![0.0; v.len()],
            v_prev: v.clone(),
            v,
        }
    }

    pub fn n_states(&self) -> usize {
        self.v.len()
    }

    pub fn stacked(&self) -> Vec<f64> {
        [&self.v[..], &self.z, &self.v_prev].concat()
    }

    pub fn from_stacked(s: &[f64]) -> Result<Self> {
        if s.len() % 3 != 0 {
            return Err(Error::DimensionMismatch {
                context: "stacked PID state",
                expected: 3 * (s.len() / 3),
                found: s.len(),
            });
        }
        let n = s.len() / 3;
        Ok(Self {
            v: s[..n].to_vec(),
            z: s[n..2 * n].to_vec(),
            v_prev: s[2 * n..].to_vec(),
        })
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        Error::check_len("state V", n, self.v.len())?;
        Error::check_len("state z", n, self.z.len())?;
        Error::check_len("state V'", n, self.v_prev.len())
    }

    pub(crate) fn sup_norm(&self) -> f64 {
        sup_norm(&self.v).max(sup_norm(&self.z)).max(sup_norm(&self.v_prev))
    }
}

/// Augmented action-value iterate `[Q; z; Q']`, each `n x m` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    pub n_actions: usize,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub q_prev: Vec<f64>,
}

impl QState {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        let len = n_states * n_actions;
        Self {
            n_actions,
            q: vec![0.0; len],
            z: vec![0.0; len],
            q_prev: vec![0.0; len],
        }
    }

    pub fn from_value(n_actions: usize, q: Vec<f64>) -> Self {
        Self {
            n_actions,
            z: vec![0.0; q.len()],
            q_prev: q.clone(),
            q,
        }
    }

    pub fn n_states(&self) -> usize {
        self.q.len() / self.n_actions.max(1)
    }

    pub(crate) fn check(&self, n: usize, m: usize) -> Result<()> {
        Error::check_len("action count", m, self.n_actions)?;
        Error::check_len("state Q", n * m, self.q.len())?;
        Error::check_len("state z", n * m, self.z.len())?;
        Error::check_len("state Q'", n * m, self.q_prev.len())
    }

    pub(crate) fn sup_norm(&self) -> f64 {
        sup_norm(&self.q).max(sup_norm(&self.z)).max(sup_norm(&self.q_prev))
    }
}

/// Applies one PID update given the Bellman residual of `v`.
fn pid_update(gains: &Gains, v: &[f64], z: &[f64], v_prev: &[f64], br: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v_next = Vec::with_capacity(v.len());
    let mut z_next = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        v_next.push(v[i] + gains.increment(br[i], z[i], v[i] - v_prev[i]));
        z_next.push(gains.beta * z[i] + gains.alpha * br[i]);
    }
    (v_next, z_next)
}

/// One PID VI step for policy evaluation: `[V; z; V'] -> L_PID [V; z; V']`.
pub fn pid_vi_step_pe(mrp: &MarkovRewardProcess, gains: &Gains, state: &PeState) -> Result<PeState> {
    state.check(mrp.n_states())?;
    let br = mrp.residual(&state.v)?;
    let (v, z) = pid_update(gains, &state.v, &state.z, &state.v_prev, &br);
    Ok(PeState {
        v,
        z,
        v_prev: state.v.clone(),
    })
}

/// One PID VI step for control, driven by the optimality residual.
pub fn pid_vi_step_control(mdp: &TabularMdp, gains: &Gains, state: &QState) -> Result<QState> {
    state.check(mdp.n_states(), mdp.n_actions())?;
    let br = mdp.bellman_residual_control(&state.q)?;
    let (q, z) = pid_update(gains, &state.q, &state.z, &state.q_prev, &br);
    Ok(QState {
        n_actions: state.n_actions,
        q,
        z,
        q_prev: state.q.clone(),
    })
}

/// Residuals below this 2-norm skip the gain update.
pub const GA_MIN_RESIDUAL_NORM: f64 = 1e-12;

/// `dV_{k+1}/dkappa` for `(kappa_p, kappa_I, kappa_d)`, prior iterates held fixed.
fn value_derivatives(gains: &Gains, v: &[f64], z: &[f64], v_prev: &[f64], br: &[f64]) -> [Vec<f64>; 3] {
    let d_kp = br.to_vec();
    let d_ki = z.iter().zip(br).map(|(z, b)| gains.beta * z + gains.alpha * b).collect();
    let d_kd = v.iter().zip(v_prev).map(|(a, b)| a - b).collect();
    [d_kp, d_ki, d_kd]
}

fn normalized_gradient(br_k: &[f64], br_next: &[f64], d_br: &[Vec<f64>; 3]) -> Option<[f64; 3]> {
    let norm_sq = l2_norm_sq(br_k);
    if norm_sq.sqrt() < GA_MIN_RESIDUAL_NORM {
        return None;
    }
    Some([0, 1, 2].map(|i| dot(br_next, &d_br[i]) / norm_sq))
}

/// Normalized gradient `<BR V_{k+1}, dBR V_{k+1}/dkappa> / ||BR V_k||^2` for
/// each controller gain, or `None` when `||BR V_k||_2` is below
/// [`GA_MIN_RESIDUAL_NORM`].
pub fn ga_vi_gradient(mrp: &MarkovRewardProcess, gains: &Gains, state: &PeState) -> Result<Option<[f64; 3]>> {
    state.check(mrp.n_states())?;
    let br_k = mrp.residual(&state.v)?;
    let (v_next, _) = pid_update(gains, &state.v, &state.z, &state.v_prev, &br_k);
    let br_next = mrp.residual(&v_next)?;
    let gamma = mrp.gamma();
    let d_br = value_derivatives(gains, &state.v, &state.z, &state.v_prev, &br_k).map(|dv| {
        // (gamma P - I) dV
        let mut out = mrp.kernel().mul_vec(&dv).expect("kernel and state sizes were checked");
        out.iter_mut().zip(&dv).for_each(|(o, d)| *o = gamma * *o - d);
        out
    });
    Ok(normalized_gradient(&br_k, &br_next, &d_br))
}

/// Model-based gain adaptation: `kappa <- kappa - eta * gradient`.
pub fn ga_vi_step(mrp: &MarkovRewardProcess, gains: &Gains, state: &PeState, eta: f64) -> Result<Gains> {
    Ok(match ga_vi_gradient(mrp, gains, state)? {
        Some(g) if eta != 0.0 => apply_gradient(gains, g, eta),
        _ => *gains,
    })
}

/// Control counterpart of [`ga_vi_gradient`]; the max in `T*` is
/// differentiated through the greedy action of `Q_{k+1}`.
pub fn ga_vi_gradient_control(mdp: &TabularMdp, gains: &Gains, state: &QState) -> Result<Option<[f64; 3]>> {
    state.check(mdp.n_states(), mdp.n_actions())?;
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let br_k = mdp.bellman_residual_control(&state.q)?;
    let (q_next, _) = pid_update(gains, &state.q, &state.z, &state.q_prev, &br_k);
    let br_next = mdp.bellman_residual_control(&q_next)?;
    let greedy: Vec<usize> = q_next.chunks_exact(m).map(greedy_action).collect();
    let gamma = mdp.gamma();
    let d_br = value_derivatives(gains, &state.q, &state.z, &state.q_prev, &br_k).map(|dq| {
        (0..n * m)
            .map(|sa| {
                let (x, a) = (sa / m, sa % m);
                let expect: f64 = mdp
                    .transition_row(x, a)
                    .iter()
                    .enumerate()
                    .map(|(y, p)| p * dq[y * m + greedy[y]])
                    .sum();
                gamma * expect - dq[sa]
            })
            .collect()
    });
    Ok(normalized_gradient(&br_k, &br_next, &d_br))
}

fn apply_gradient(gains: &Gains, g: [f64; 3], eta: f64) -> Gains {
    let k = gains.controller();
    gains.with_controller([0, 1, 2].map(|i| k[i] - eta * g[i]))
}

/// Settings shared by [`run_pid_vi_pe`] and [`run_pid_vi_control`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub max_iters: usize,
    /// Stop once the sup-norm Bellman residual is at most this.
    pub tol: f64,
    /// Declare divergence once the iterate sup-norm exceeds this.
    pub blow_up: f64,
    /// Meta learning rate for gain adaptation; `None` keeps gains fixed.
    pub adapt_eta: Option<f64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-8,
            blow_up: 1e12,
            adapt_eta: None,
        }
    }
}

impl PlanConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) || !(self.blow_up > 0.0) {
            return Err(Error::InvalidConfig("tol must be >= 0 and blow_up > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Converged,
    IterationCap,
    Diverged,
}

/// One row of a planning trace, recorded before iteration `iter` runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRecord {
    pub iter: usize,
    /// `||BR V_k||_inf`.
    pub residual: f64,
    /// `||V_k - V_exact||_inf` when a reference solution was supplied.
    pub error: Option<f64>,
    pub gains: Gains,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRun<S> {
    pub state: S,
    pub gains: Gains,
    pub status: PlanStatus,
    pub trace: Vec<PlanRecord>,
}

/// Drives a planning iteration: residual, record, stop checks, step.
fn plan_loop<S>(
    config: &PlanConfig,
    mut gains: Gains,
    mut state: S,
    exact: Option<&[f64]>,
    values: impl Fn(&S) -> &[f64],
    norm: impl Fn(&S) -> f64,
    residual: impl Fn(&S) -> Result<Vec<f64>>,
    step: impl Fn(&Gains, &S) -> Result<S>,
    adapt: impl Fn(&Gains, &S) -> Result<Option<[f64; 3]>>,
) -> Result<PlanRun<S>> {
    config.validate()?;
    gains.validate()?;
    if let Some(e) = exact {
        Error::check_len("reference solution", values(&state).len(), e.len())?;
    }
    let mut trace = Vec::new();
    for iter in 0..=config.max_iters {
        let br = sup_norm(&residual(&state)?);
        let error = exact.map(|e| sup_dist(values(&state), e));
        trace.push(PlanRecord {
            iter,
            residual: br,
            error,
            gains,
        });
        let status = if !br.is_finite() || !(norm(&state) <= config.blow_up) {
            Some(PlanStatus::Diverged)
        } else if br <= config.tol {
            Some(PlanStatus::Converged)
        } else if iter == config.max_iters {
            Some(PlanStatus::IterationCap)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(PlanRun {
                state,
                gains,
                status,
                trace,
            });
        }
        let next = step(&gains, &state)?;
        if let Some(eta) = config.adapt_eta {
            if let Some(g) = adapt(&gains, &state)? {
                gains = apply_gradient(&gains, g, eta);
            }
        }
        state = next;
    }
    unreachable!("loop returns at iter == max_iters")
}

/// Iterates PID VI for policy evaluation from `init`.
///
/// Stops when `||BR V_k||_inf <= tol`, after `max_iters` steps, or when the
/// iterate leaves the `blow_up` ball. With gain adaptation, `V_{k+1}` is
/// computed with the current gains before the gains move.
pub fn run_pid_vi_pe(
    mrp: &MarkovRewardProcess,
    gains: Gains,
    init: PeState,
    config: &PlanConfig,
    exact: Option<&[f64]>,
) -> Result<PlanRun<PeState>> {
    init.check(mrp.n_states())?;
    plan_loop(
        config,
        gains,
        init,
        exact,
        |s| &s.v,
        PeState::sup_norm,
        |s| mrp.residual(&s.v),
        |g, s| pid_vi_step_pe(mrp, g, s),
        |g, s| ga_vi_gradient(mrp, g, s),
    )
}

/// Iterates PID VI for control; see [`run_pid_vi_pe`].
pub fn run_pid_vi_control(
    mdp: &TabularMdp,
    gains: Gains,
    init: QState,
    config: &PlanConfig,
    exact: Option<&[f64]>,
) -> Result<PlanRun<QState>> {
    init.check(mdp.n_states(), mdp.n_actions())?;
    plan_loop(
        config,
        gains,
        init,
        exact,
        |s| &s.q,
        QState::sup_norm,
        |s| mdp.bellman_residual_control(&s.q),
        |g, s| pid_vi_step_control(mdp, g, s),
        |g, s| ga_vi_gradient_control(mdp, g, s),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::chain_walk;
    use crate::mdp::Policy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mrp(seed: u64, n: usize, gamma: f64) -> MarkovRewardProcess {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Vec::new();
        for _ in 0..n * 2 {
            let row: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = row.iter().sum();
            let mut row: Vec<f64> = row.iter().map(|x| x / s).collect();
            let fix: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= fix);
            p.extend(row);
        }
        let r = (0..n * 2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mdp = TabularMdp::new(n, 2, gamma, p, r).unwrap();
        MarkovRewardProcess::new(&mdp, &Policy::uniform(n, 2)).unwrap()
    }

    fn random_state(seed: u64, n: usize) -> PeState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
        PeState {
            v: draw(),
            z: draw(),
            v_prev: draw(),
        }
    }

    #[test]
    fn gains_parse_and_display() {
        let g: Gains = "1.2,0.3,-0.1,0.05,0.95".parse().unwrap();
        assert_eq!(g, Gains::new(1.2, 0.3, -0.1, 0.05, 0.95).unwrap());
        assert_eq!(g.to_string().parse::<Gains>().unwrap(), g);
        assert!("1,2,3".parse::<Gains>().is_err());
        assert!("1,2,3,x,5".parse::<Gains>().is_err());
        assert!(Gains::new(f64::NAN, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn vi_gains_give_one_bellman_step() {
        let mrp = random_mrp(1, 4, 0.9);
        let s = random_state(2, 4);
        let next = pid_vi_step_pe(&mrp, &Gains::vi(), &s).unwrap();
        assert_eq!(next.v_prev, s.v);
        let tv = mrp.bellman(&s.v).unwrap();
        for (a, b) in next.v.iter().zip(&tv) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn fixed_point_is_preserved() {
        let mrp = random_mrp(3, 5, 0.95);
        let exact = mrp.exact_value().unwrap();
        let s = PeState::from_value(exact.clone());
        let g = Gains::new(1.3, 0.4, 0.2, 0.05, 0.9).unwrap();
        let next = pid_vi_step_pe(&mrp, &g, &s).unwrap();
        assert!(sup_dist(&next.v, &exact) <= 1e-12);
        assert!(sup_norm(&next.z) <= 1e-12);
    }

    #[test]
    fn control_step_formula() {
        let (mdp, _) = chain_walk(0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut draw = || (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let s = QState {
            n_actions: 2,
            q: draw(),
            z: draw(),
            q_prev: draw(),
        };
        let g = Gains::new(0.8, 0.2, 0.1, 0.3, 0.7).unwrap();
        let next = pid_vi_step_control(&mdp, &g, &s).unwrap();
        let tq = mdp.bellman_control(&s.q).unwrap();
        for i in 0..100 {
            let br = tq[i] - s.q[i];
            let z = 0.7 * s.z[i] + 0.3 * br;
            let q = s.q[i] + 0.8 * br + 0.2 * (0.7 * s.z[i] + 0.3 * br) + 0.1 * (s.q[i] - s.q_prev[i]);
            assert!((next.q[i] - q).abs() <= 1e-12);
            assert!((next.z[i] - z).abs() <= 1e-12);
        }
        let fixed = QState::from_value(2, mdp.exact_value_control(1e-11).unwrap());
        let after = pid_vi_step_control(&mdp, &g, &fixed).unwrap();
        assert!(sup_dist(&after.q, &fixed.q) <= 1e-9);
    }

    #[test]
    fn ga_gradient_matches_finite_differences() {
        let mrp = random_mrp(5, 3, 0.9);
        let s = random_state(6, 3);
        let g = Gains::new(1.1, 0.3, 0.2, 0.1, 0.8).unwrap();
        let grad = ga_vi_gradient(&mrp, &g, &s).unwrap().unwrap();
        let norm_sq = l2_norm_sq(&mrp.residual(&s.v).unwrap());
        let objective = |k: [f64; 3]| {
            let next = pid_vi_step_pe(&mrp, &g.with_controller(k), &s).unwrap();
            l2_norm_sq(&mrp.residual(&next.v).unwrap())
        };
        let h = 1e-5;
        for i in 0..3 {
            let mut up = g.controller();
            let mut down = g.controller();
            up[i] += h;
            down[i] -= h;
            // d/dk ||BR||^2 = 2 <BR, dBR/dk>
            let fd = (objective(up) - objective(down)) / (2.0 * h) / (2.0 * norm_sq);
            assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1e-3), "gain {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn ga_guards() {
        let mrp = random_mrp(7, 4, 0.9);
        let s = random_state(8, 4);
        let g = Gains::new(1.0, 0.1, 0.1, 0.05, 0.95).unwrap();
        assert_eq!(ga_vi_step(&mrp, &g, &s, 0.0).unwrap(), g);
        let fixed = PeState::from_value(mrp.exact_value().unwrap());
        // residual is O(1e-16) here, under the guard
        assert_eq!(ga_vi_step(&mrp, &g, &fixed, 1.0).unwrap(), g);
    }

    #[test]
    fn vi_rate_on_chain_walk() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let mrp = MarkovRewardProcess::new(&mdp, &pi).unwrap();
        let exact = mrp.exact_value().unwrap();
        let config = PlanConfig {
            max_iters: 200,
            tol: 0.0,
            ..PlanConfig::default()
        };
        let run = run_pid_vi_pe(&mrp, Gains::vi(), PeState::zeros(50), &config, Some(&exact)).unwrap();
        assert_eq!(run.status, PlanStatus::IterationCap);
        let e: Vec<f64> = run.trace.iter().map(|r| r.error.unwrap()).collect();
        let rate = (e[150] / e[100]).powf(1.0 / 50.0);
        assert!((rate - 0.9).abs() <= 0.05 * 0.9, "rate {rate}");
    }

    #[test]
    fn tolerance_contract() {
        let mrp = random_mrp(9, 6, 0.9);
        let config = PlanConfig {
            tol: 1e-9,
            ..PlanConfig::default()
        };
        let run = run_pid_vi_pe(&mrp, Gains::vi(), PeState::zeros(6), &config, None).unwrap();
        assert_eq!(run.status, PlanStatus::Converged);
        assert!(sup_norm(&mrp.residual(&run.state.v).unwrap()) <= 1e-9);
    }

    #[test]
    fn large_gain_diverges() {
        let mrp = random_mrp(10, 5, 0.9);
        let g = Gains::new(3.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let config = PlanConfig {
            max_iters: 500,
            ..PlanConfig::default()
        };
        let run = run_pid_vi_pe(&mrp, g, PeState::zeros(5), &config, None).unwrap();
        assert_eq!(run.status, PlanStatus::Diverged);
    }

    #[test]
    fn adaptation_moves_gains_and_converges() {
        let (mdp, pi) = chain_walk(0.99).unwrap();
        let mrp = MarkovRewardProcess::new(&mdp, &pi).unwrap();
        let config = PlanConfig {
            max_iters: 3000,
            tol: 1e-6,
            adapt_eta: Some(0.05),
            ..PlanConfig::default()
        };
        let g = Gains::new(1.0, 0.0, 0.0, 0.05, 0.95).unwrap();
        let run = run_pid_vi_pe(&mrp, g, PeState::zeros(50), &config, None).unwrap();
        assert_ne!(run.gains, g);
        let fixed = run_pid_vi_pe(
            &mrp,
            g,
            PeState::zeros(50),
            &PlanConfig {
                adapt_eta: None,
                ..config.clone()
            },
            None,
        )
        .unwrap();
        assert_eq!(run.status, PlanStatus::Converged);
        assert!(run.trace.len() < fixed.trace.len());
    }

    #[test]
    fn control_run_converges() {
        let (mdp, _) = chain_walk(0.9).unwrap();
        let config = PlanConfig {
            tol: 1e-8,
            ..PlanConfig::default()
        };
        let run = run_pid_vi_control(&mdp, Gains::vi(), QState::zeros(50, 2), &config, None).unwrap();
        assert_eq!(run.status, PlanStatus::Converged);
        let adapt = PlanConfig {
            adapt_eta: Some(0.01),
            ..config
        };
        let g = Gains::new(1.0, 0.0, 0.0, 0.05, 0.95).unwrap();
        let run = run_pid_vi_control(&mdp, g, QState::zeros(50, 2), &adapt, None).unwrap();
        assert_eq!(run.status, PlanStatus::Converged);
    }
}
