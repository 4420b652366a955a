//! Sample-based gain adaptation for PID TD and PID Q-learning.
//!
//! Each step computes the sampled residual `delta` under the current values
//! and `delta'` under the values stored the last time the entry was visited,
//! moves the gains by the normalized semi-gradient, then applies the PID
//! update with the new gains and finally refreshes the per-entry running
//! residual and stored value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{drive, pid_entry_update, Learner, RunResult, RunSettings, ScheduleTriple, Task, VisitCounts};
use crate::mdp::{greedy_action, TransitionSample};
use crate::planning::Gains;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainAdaptationConfig {
    /// Meta learning rate.
    pub eta: f64,
    /// Smoothing factor of the running squared residual.
    pub lambda: f64,
    /// Offset added to the running residual before dividing.
    pub eps_norm: f64,
    /// Starting controller gains; `alpha` and `beta` stay fixed.
    pub initial: Gains,
}

impl Default for GainAdaptationConfig {
    fn default() -> Self {
        Self {
            eta: 0.0,
            lambda: 0.5,
            eps_norm: 1e-20,
            initial: Gains {
                kp: 1.0,
                ki: 0.0,
                kd: 0.0,
                alpha: 0.05,
                beta: 0.95,
            },
        }
    }
}

impl GainAdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!("eta {} must be finite and >= 0", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.eps_norm > 0.0) {
            return Err(Error::InvalidConfig(format!("eps_norm {} must be positive", self.eps_norm)));
        }
        self.initial.validate()
    }
}

/// Per-entry running squared residual and last-seen value.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState {
    pub running_br: Vec<f64>,
    pub previous: Vec<f64>,
}

impl AdapterState {
    pub fn new(len: usize) -> Self {
        Self {
            running_br: vec![0.0; len],
            previous: vec![0.0; len],
        }
    }
}

/// Residual pair `(delta, delta')` for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub delta: f64,
    pub delta_prev: f64,
}

#[allow(clippy::too_many_arguments)]
fn move_gains(
    gains: &Gains,
    res: Residuals,
    z: f64,
    v: f64,
    vp: f64,
    running_br: f64,
    config: &GainAdaptationConfig,
) -> Gains {
    if config.eta == 0.0 {
        return *gains;
    }
    let Residuals { delta, delta_prev } = res;
    let denom = running_br + config.eps_norm;
    let eta = config.eta;
    Gains {
        kp: gains.kp + eta * (delta * delta_prev) / denom,
        ki: gains.ki + eta * (delta * (gains.beta * z + gains.alpha * delta_prev)) / denom,
        kd: gains.kd + eta * (delta * (v - vp)) / denom,
        ..*gains
    }
}

fn check_entry(len: usize, i: usize, adapter: &AdapterState, kind: &'static str) -> Result<()> {
    Error::check_len("adapter running residual", len, adapter.running_br.len())?;
    Error::check_len("adapter previous values", len, adapter.previous.len())?;
    if i >= len {
        return Err(Error::InvalidIndex { kind, index: i, size: len });
    }
    Ok(())
}

/// Gain step for PID TD. Returns the new gains and the residuals used.
#[allow(clippy::too_many_arguments)]
pub fn ga_td_gain_update(
    gains: &Gains,
    adapter: &AdapterState,
    sample: &TransitionSample,
    gamma: f64,
    v: &[f64],
    z: &[f64],
    v_prev: &[f64],
    config: &GainAdaptationConfig,
) -> Result<(Gains, Residuals)> {
    let n = v.len();
    check_entry(n, sample.state, adapter, "state")?;
    check_entry(n, sample.next_state, adapter, "next state")?;
    Error::check_len("z", n, z.len())?;
    Error::check_len("V'", n, v_prev.len())?;
    let res = td_residuals(gamma, sample, v, &adapter.previous);
    let x = sample.state;
    Ok((move_gains(gains, res, z[x], v[x], v_prev[x], adapter.running_br[x], config), res))
}

#[inline]
fn td_residuals(gamma: f64, s: &TransitionSample, v: &[f64], previous: &[f64]) -> Residuals {
    let (x, y) = (s.state, s.next_state);
    Residuals {
        delta_prev: s.reward + gamma * previous[y] - previous[x],
        delta: s.reward + gamma * v[y] - v[x],
    }
}

/// Gain step for PID Q-learning; `A' = argmax_a Q(X', a)` with ties to the
/// lowest index, and both residuals bootstrap from `A'`.
#[allow(clippy::too_many_arguments)]
pub fn ga_q_gain_update(
    gains: &Gains,
    adapter: &AdapterState,
    sample: &TransitionSample,
    gamma: f64,
    n_actions: usize,
    q: &[f64],
    z: &[f64],
    q_prev: &[f64],
    config: &GainAdaptationConfig,
) -> Result<(Gains, Residuals)> {
    let len = q.len();
    if sample.action >= n_actions {
        return Err(Error::InvalidIndex {
            kind: "action",
            index: sample.action,
            size: n_actions,
        });
    }
    check_entry(len, sample.state * n_actions + sample.action, adapter, "state-action")?;
    check_entry(len, sample.next_state * n_actions, adapter, "next state")?;
    Error::check_len("z", len, z.len())?;
    Error::check_len("Q'", len, q_prev.len())?;
    let res = q_residuals(gamma, sample, n_actions, q, &adapter.previous);
    let i = sample.state * n_actions + sample.action;
    Ok((move_gains(gains, res, z[i], q[i], q_prev[i], adapter.running_br[i], config), res))
}

#[inline]
fn q_residuals(gamma: f64, s: &TransitionSample, m: usize, q: &[f64], previous: &[f64]) -> Residuals {
    let base = s.next_state * m;
    let next = base + greedy_action(&q[base..base + m]);
    let i = s.state * m + s.action;
    Residuals {
        delta_prev: s.reward + gamma * previous[next] - previous[i],
        delta: s.reward + gamma * q[next] - q[i],
    }
}

/// `running_br[i] <- (1 - lambda) running_br[i] + lambda delta^2` and
/// `previous[i] <- value`, where `value` is the entry before this step's update.
pub fn adapter_commit(adapter: &mut AdapterState, i: usize, delta: f64, value: f64, lambda: f64) -> Result<()> {
    check_entry(adapter.running_br.len(), i, adapter, "entry")?;
    adapter.running_br[i] = (1.0 - lambda) * adapter.running_br[i] + lambda * delta * delta;
    adapter.previous[i] = value;
    Ok(())
}

struct GaLearner {
    v: Vec<f64>,
    z: Vec<f64>,
    vp: Vec<f64>,
    m: usize,
    control: bool,
    counts: VisitCounts,
    gamma: f64,
    gains: Gains,
    schedules: ScheduleTriple,
    adapter: AdapterState,
    config: GainAdaptationConfig,
}

impl Learner for GaLearner {
    fn values(&self) -> &[f64] {
        &self.v
    }

    fn update(&mut self, s: &TransitionSample) -> f64 {
        let (i, res) = if self.control {
            (
                s.state * self.m + s.action,
                q_residuals(self.gamma, s, self.m, &self.v, &self.adapter.previous),
            )
        } else {
            (s.state, td_residuals(self.gamma, s, &self.v, &self.adapter.previous))
        };
        let old = self.v[i];
        self.gains = move_gains(
            &self.gains,
            res,
            self.z[i],
            old,
            self.vp[i],
            self.adapter.running_br[i],
            &self.config,
        );
        let rates = self.schedules.at(self.counts.get(i));
        let out = pid_entry_update(&mut self.v[i], &mut self.z[i], &mut self.vp[i], res.delta, &self.gains, rates);
        self.counts.increment(i);
        let lambda = self.config.lambda;
        self.adapter.running_br[i] = (1.0 - lambda) * self.adapter.running_br[i] + lambda * res.delta * res.delta;
        self.adapter.previous[i] = old;
        out
    }

    fn gains(&self) -> Option<[f64; 3]> {
        Some(self.gains.controller())
    }
}

fn run_ga(
    task: &Task<'_>,
    config: &GainAdaptationConfig,
    schedules: &ScheduleTriple,
    settings: &RunSettings,
    run_id: usize,
    seed: u64,
) -> Result<RunResult> {
    config.validate()?;
    schedules.validate()?;
    let mdp = task.mdp();
    let m = mdp.n_actions();
    let len = if task.is_control() { mdp.n_states() * m } else { mdp.n_states() };
    drive(
        task,
        settings,
        run_id,
        seed,
        &mut GaLearner {
            v: vec![0.0; len],
            z: vec![0.0; len],
            vp: vec![0.0; len],
            m,
            control: task.is_control(),
            counts: VisitCounts::new(len),
            gamma: mdp.gamma(),
            gains: config.initial,
            schedules: *schedules,
            adapter: AdapterState::new(len),
            config: *config,
        },
    )
}

/// PID TD with gain adaptation on an evaluation task.
pub fn run_pid_td_with_ga(
    task: &Task<'_>,
    config: &GainAdaptationConfig,
    schedules: &ScheduleTriple,
    settings: &RunSettings,
    run_id: usize,
    seed: u64,
) -> Result<RunResult> {
    if task.is_control() {
        return Err(Error::InvalidConfig("PID TD needs an evaluation task".into()));
    }
    run_ga(task, config, schedules, settings, run_id, seed)
}

/// PID Q-learning with gain adaptation on a control task. Visit counts are
/// kept per state-action pair, as in the fixed-gain learner.
pub fn run_pid_q_with_ga(
    task: &Task<'_>,
    config: &GainAdaptationConfig,
    schedules: &ScheduleTriple,
    settings: &RunSettings,
    run_id: usize,
    seed: u64,
) -> Result<RunResult> {
    if !task.is_control() {
        return Err(Error::InvalidConfig("PID Q-learning needs a control task".into()));
    }
    run_ga(task, config, schedules, settings, run_id, seed)
}
