//! Sample-based learners: TD, PID TD, Q-learning and PID Q-learning, their
//! synchronous variants, learning-rate schedules and the run loop.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sup_dist;
use crate::mdp::{greedy_action, max_value, pick_from_row, MarkovRewardProcess, Policy, TabularMdp, TransitionSample};
use crate::metrics::{normalized_error_control, normalized_error_pe};
use crate::planning::{Gains, PeState, QState};

/// Step size as a function of a visit or iteration count `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LearningRateSchedule {
    /// `epsilon / (k + offset)`.
    Polynomial { epsilon: f64, offset: f64 },
    /// `min(epsilon, cap / max(k, 1))`; `cap = inf` is a constant rate.
    CountCap { epsilon: f64, cap: f64 },
    Constant { epsilon: f64 },
}

impl LearningRateSchedule {
    pub fn value(&self, k: u64) -> f64 {
        match *self {
            Self::Polynomial { epsilon, offset } => epsilon / (k as f64 + offset),
            Self::CountCap { epsilon, cap } => epsilon.min(cap / k.max(1) as f64),
            Self::Constant { epsilon } => epsilon,
        }
    }

    /// Every reachable rate must lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("learning rate {self}: {msg}")));
        match *self {
            Self::Polynomial { epsilon, offset } => {
                if !(offset > 0.0) || !(epsilon >= 0.0) || epsilon / offset > 1.0 {
                    return bad("need T > 0 and 0 <= eps <= T".into());
                }
            }
            Self::CountCap { epsilon, cap } => {
                if !(0.0..=1.0).contains(&epsilon) || !(cap > 0.0) {
                    return bad("need 0 <= eps <= 1 and M > 0".into());
                }
            }
            Self::Constant { epsilon } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return bad("need 0 <= eps <= 1".into());
                }
            }
        }
        Ok(())
    }
}

/// `eps`, `eps,M` (with `M` possibly `inf`) or `poly:eps,T`.
impl fmt::Display for LearningRateSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial { epsilon, offset } => write!(f, "poly:{epsilon},{offset}"),
            Self::CountCap { epsilon, cap } => write!(f, "{epsilon},{cap}"),
            Self::Constant { epsilon } => write!(f, "{epsilon}"),
        }
    }
}

impl FromStr for LearningRateSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("learning rate '{s}': {e}")))
        };
        let (poly, body) = match s.trim().strip_prefix("poly:") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let parts: Vec<&str> = body.split(',').collect();
        let schedule = match (poly, parts.as_slice()) {
            (true, [eps, t]) => Self::Polynomial {
                epsilon: num(eps)?,
                offset: num(t)?,
            },
            (false, [eps]) => Self::Constant { epsilon: num(eps)? },
            (false, [eps, m]) => Self::CountCap {
                epsilon: num(eps)?,
                cap: num(m)?,
            },
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "learning rate '{s}' must be 'eps', 'eps,M' or 'poly:eps,T'"
                )))
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

impl TryFrom<String> for LearningRateSchedule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LearningRateSchedule> for String {
    fn from(s: LearningRateSchedule) -> String {
        s.to_string()
    }
}

/// Separate schedules for the value, integrator and previous-value updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTriple {
    pub v: LearningRateSchedule,
    pub z: LearningRateSchedule,
    pub vp: LearningRateSchedule,
}

impl ScheduleTriple {
    pub fn shared(s: LearningRateSchedule) -> Self {
        Self { v: s, z: s, vp: s }
    }

    pub fn validate(&self) -> Result<()> {
        self.v.validate()?;
        self.z.validate()?;
        self.vp.validate()
    }

    pub(crate) fn at(&self, k: u64) -> (f64, f64, f64) {
        (self.v.value(k), self.z.value(k), self.vp.value(k))
    }
}

/// Per-state or per-pair visit counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts(Vec<u64>);

impl VisitCounts {
    pub fn new(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn get(&self, i: usize) -> u64 {
        self.0[i]
    }

    pub fn increment(&mut self, i: usize) {
        self.0[i] += 1;
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

fn check_sample(sample: &TransitionSample, n: usize, m: usize) -> Result<()> {
    for (kind, index, size) in [
        ("state", sample.state, n),
        ("next state", sample.next_state, n),
        ("action", sample.action, m),
    ] {
        if index >= size {
            return Err(Error::InvalidIndex { kind, index, size });
        }
    }
    Ok(())
}

/// `R + gamma V(X') - V(X)`.
pub fn br_estimate_pe(gamma: f64, sample: &TransitionSample, v: &[f64]) -> Result<f64> {
    check_sample(sample, v.len(), usize::MAX)?;
    Ok(sample.reward + gamma * v[sample.next_state] - v[sample.state])
}

/// `R + gamma max_a' Q(X', a') - Q(X, A)` for a row-major `n x m` table.
pub fn br_estimate_control(gamma: f64, sample: &TransitionSample, q: &[f64], n_actions: usize) -> Result<f64> {
    check_sample(sample, q.len() / n_actions, n_actions)?;
    Ok(q_delta(gamma, sample, q, n_actions))
}

#[inline]
fn q_delta(gamma: f64, s: &TransitionSample, q: &[f64], m: usize) -> f64 {
    let next = &q[s.next_state * m..(s.next_state + 1) * m];
    s.reward + gamma * max_value(next) - q[s.state * m + s.action]
}

/// Shared PID update of one entry, all right-hand sides read before writing.
/// Returns the new value.
#[inline]
pub(crate) fn pid_entry_update(
    v: &mut f64,
    z: &mut f64,
    vp: &mut f64,
    delta: f64,
    gains: &Gains,
    (mu_v, mu_z, mu_vp): (f64, f64, f64),
) -> f64 {
    let (v0, z0, vp0) = (*v, *z, *vp);
    *v = v0 + mu_v * gains.increment(delta, z0, v0 - vp0);
    *z = z0 + mu_z * (gains.beta * z0 + gains.alpha * delta - z0);
    *vp = vp0 + mu_vp * (v0 - vp0);
    *v
}

/// One asynchronous PID TD update at the sampled state; rates use the visit
/// count before this sample.
pub fn pid_td_step(
    state: &mut PeState,
    counts: &mut VisitCounts,
    sample: &TransitionSample,
    gamma: f64,
    gains: &Gains,
    schedules: &ScheduleTriple,
) -> Result<()> {
    let delta = br_estimate_pe(gamma, sample, &state.v)?;
    let x = sample.state;
    let rates = schedules.at(counts.get(x));
    pid_entry_update(&mut state.v[x], &mut state.z[x], &mut state.v_prev[x], delta, gains, rates);
    counts.increment(x);
    Ok(())
}

/// One asynchronous PID Q-learning update at the sampled pair.
pub fn pid_q_step(
    state: &mut QState,
    counts: &mut VisitCounts,
    sample: &TransitionSample,
    gamma: f64,
    gains: &Gains,
    schedules: &ScheduleTriple,
) -> Result<()> {
    let m = state.n_actions;
    let delta = br_estimate_control(gamma, sample, &state.q, m)?;
    let i = sample.state * m + sample.action;
    let rates = schedules.at(counts.get(i));
    pid_entry_update(&mut state.q[i], &mut state.z[i], &mut state.q_prev[i], delta, gains, rates);
    counts.increment(i);
    Ok(())
}

/// Conventional TD(0): `V(X) += mu (R + gamma V(X') - V(X))`.
pub fn td_step(
    v: &mut [f64],
    counts: &mut VisitCounts,
    sample: &TransitionSample,
    gamma: f64,
    schedule: &LearningRateSchedule,
) -> Result<()> {
    let delta = br_estimate_pe(gamma, sample, v)?;
    let x = sample.state;
    v[x] += schedule.value(counts.get(x)) * delta;
    counts.increment(x);
    Ok(())
}

/// Watkins Q-learning update.
pub fn q_step(
    q: &mut [f64],
    n_actions: usize,
    counts: &mut VisitCounts,
    sample: &TransitionSample,
    gamma: f64,
    schedule: &LearningRateSchedule,
) -> Result<()> {
    let delta = br_estimate_control(gamma, sample, q, n_actions)?;
    let i = sample.state * n_actions + sample.action;
    q[i] += schedule.value(counts.get(i)) * delta;
    counts.increment(i);
    Ok(())
}

/// One sample per state: `A_x ~ pi(.|x)` then `(R_x, X'_x)`.
pub fn sync_dataset<R: Rng + ?Sized>(mdp: &TabularMdp, policy: &Policy, rng: &mut R) -> Result<Vec<TransitionSample>> {
    Error::check_len("policy states", mdp.n_states(), policy.n_states())?;
    Error::check_len("policy actions", mdp.n_actions(), policy.n_actions())?;
    Ok((0..mdp.n_states())
        .map(|x| {
            let a = policy.sample_action(rng, x);
            mdp.sample_unchecked(rng, x, a)
        })
        .collect())
}

fn sync_deltas(gamma: f64, dataset: &[TransitionSample], v: &[f64]) -> Result<Vec<f64>> {
    Error::check_len("synchronous dataset", v.len(), dataset.len())
        .map_err(|_| Error::IncompleteDataset(format!("{} samples for {} states", dataset.len(), v.len())))?;
    dataset
        .iter()
        .enumerate()
        .map(|(x, s)| {
            if s.state != x {
                return Err(Error::IncompleteDataset(format!(
                    "entry {x} holds a sample for state {}",
                    s.state
                )));
            }
            br_estimate_pe(gamma, s, v)
        })
        .collect()
}

fn sync_pid_update(state: &PeState, deltas: &[f64], gains: &Gains, mu: f64) -> PeState {
    let mut next = state.clone();
    for (x, &delta) in deltas.iter().enumerate() {
        pid_entry_update(&mut next.v[x], &mut next.z[x], &mut next.v_prev[x], delta, gains, (mu, mu, mu));
    }
    next
}

/// Synchronous PID TD: every state moves with the same `mu`, using the
/// time-`t` iterate throughout.
pub fn sync_pid_td_step(state: &PeState, dataset: &[TransitionSample], gamma: f64, gains: &Gains, mu: f64) -> Result<PeState> {
    state.check(dataset.len())?;
    let deltas = sync_deltas(gamma, dataset, &state.v)?;
    Ok(sync_pid_update(state, &deltas, gains, mu))
}

/// Noise-free surrogate of [`sync_pid_td_step`]: sampled residuals replaced
/// by their expectations `BR V`.
pub fn sync_pid_td_expected_step(mrp: &MarkovRewardProcess, state: &PeState, gains: &Gains, mu: f64) -> Result<PeState> {
    state.check(mrp.n_states())?;
    let deltas = mrp.residual(&state.v)?;
    Ok(sync_pid_update(state, &deltas, gains, mu))
}

/// Synchronous TD(0).
pub fn sync_td_step(v: &[f64], dataset: &[TransitionSample], gamma: f64, mu: f64) -> Result<Vec<f64>> {
    let deltas = sync_deltas(gamma, dataset, v)?;
    Ok(v.iter().zip(&deltas).map(|(v, d)| v + mu * d).collect())
}

/// Runs synchronous TD (`gains = None`) or synchronous PID TD from zero with
/// `mu(t) = epsilon / (t + T)` and returns `||V_t - V_exact||_inf` for
/// `t = 0..=iterations`.
pub fn run_sync_pe(
    mdp: &TabularMdp,
    policy: &Policy,
    exact: &[f64],
    gains: Option<&Gains>,
    schedule: &LearningRateSchedule,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = mdp.gamma();
    let mut state = PeState::zeros(mdp.n_states());
    let mut errors = Vec::with_capacity(iterations + 1);
    errors.push(sup_dist(&state.v, exact));
    for t in 0..iterations {
        let data = sync_dataset(mdp, policy, &mut rng)?;
        let mu = schedule.value(t as u64);
        state = match gains {
            Some(g) => sync_pid_td_step(&state, &data, gamma, g, mu)?,
            None => PeState {
                v: sync_td_step(&state.v, &data, gamma, mu)?,
                ..state
            },
        };
        errors.push(sup_dist(&state.v, exact));
    }
    Ok(errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Td,
    PidTd,
    Q,
    PidQ,
}

impl Algorithm {
    pub fn is_control(self) -> bool {
        matches!(self, Self::Q | Self::PidQ)
    }

    pub fn is_pid(self) -> bool {
        matches!(self, Self::PidTd | Self::PidQ)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Td => "td",
            Self::PidTd => "pid-td",
            Self::Q => "q",
            Self::PidQ => "pid-q",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td" => Ok(Self::Td),
            "pid-td" => Ok(Self::PidTd),
            "q" => Ok(Self::Q),
            "pid-q" => Ok(Self::PidQ),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm '{s}'"))),
        }
    }
}

/// How `(X_t, A_t)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// `X_t` uniform; `A_t` from the evaluated policy (PE) or epsilon-greedy (control).
    IidState,
    /// `(X_t, A_t)` uniform over pairs. Control only.
    IidStateAction,
    /// `X_{t+1} = X'_t` starting from state 0; actions as in `IidState`.
    Trajectory,
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid-state" => Ok(Self::IidState),
            "iid-state-action" => Ok(Self::IidStateAction),
            "trajectory" => Ok(Self::Trajectory),
            _ => Err(Error::InvalidConfig(format!("unknown sampling mode '{s}'"))),
        }
    }
}

/// The problem a learner is scored on.
#[derive(Debug, Clone, Copy)]
pub enum Task<'a> {
    Evaluation {
        mdp: &'a TabularMdp,
        policy: &'a Policy,
        exact: &'a [f64],
    },
    Control {
        mdp: &'a TabularMdp,
        exact: &'a [f64],
    },
}

impl<'a> Task<'a> {
    pub fn mdp(&self) -> &'a TabularMdp {
        match self {
            Self::Evaluation { mdp, .. } | Self::Control { mdp, .. } => mdp,
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, Self::Control { .. })
    }

    fn error(&self, values: &[f64]) -> Result<f64> {
        match self {
            Self::Evaluation { exact, .. } => normalized_error_pe(values, exact),
            Self::Control { exact, .. } => normalized_error_control(values, exact),
        }
    }

    fn value_len(&self) -> usize {
        let mdp = self.mdp();
        if self.is_control() {
            mdp.n_states() * mdp.n_actions()
        } else {
            mdp.n_states()
        }
    }
}

/// Loop settings shared by all sample-based runners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub sampling: SamplingMode,
    pub total_steps: u64,
    pub eval_every: u64,
    /// Exploration probability of the epsilon-greedy behavior in control.
    pub exploration: f64,
    /// A run is flagged diverged once any value exceeds this in magnitude.
    pub blow_up: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            sampling: SamplingMode::IidState,
            total_steps: 100_000,
            eval_every: 1_000,
            exploration: 0.1,
            blow_up: 1e12,
        }
    }
}

impl RunSettings {
    pub fn validate(&self, control: bool) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.exploration) {
            return Err(Error::InvalidConfig("exploration must lie in [0, 1]".into()));
        }
        if !(self.blow_up > 0.0) {
            return Err(Error::InvalidConfig("blow_up must be positive".into()));
        }
        if !control && self.sampling == SamplingMode::IidStateAction {
            return Err(Error::InvalidConfig(
                "iid-state-action sampling needs a control problem; evaluation draws actions from the policy".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one sample-based run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: usize,
    pub seed: u64,
    /// Evaluation steps `0, eval_every, ...` (plus `total_steps`).
    pub steps: Vec<u64>,
    /// Normalized error at each evaluation step.
    pub errors: Vec<f64>,
    /// Controller gains at each evaluation step when they are adapted.
    pub gains: Option<Vec<[f64; 3]>>,
    /// The run stopped early because a value left the blow-up ball.
    pub diverged: bool,
    pub final_values: Vec<f64>,
}

/// A sample-based learner driven by [`drive`].
pub(crate) trait Learner {
    fn values(&self) -> &[f64];
    /// Consumes one sample and returns the new value at the updated entry.
    fn update(&mut self, sample: &TransitionSample) -> f64;
    fn gains(&self) -> Option<[f64; 3]> {
        None
    }
}

/// Runs `learner` on `task`. Each step draws the state, one uniform `f64`
/// for the action, then the transition.
pub(crate) fn drive<L: Learner>(
    task: &Task<'_>,
    settings: &RunSettings,
    run_id: usize,
    seed: u64,
    learner: &mut L,
) -> Result<RunResult> {
    settings.validate(task.is_control())?;
    let mdp = task.mdp();
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    Error::check_len("learner values", task.value_len(), learner.values().len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let track_gains = learner.gains().is_some();

    let mut result = RunResult {
        run_id,
        seed,
        steps: Vec::new(),
        errors: Vec::new(),
        gains: track_gains.then(Vec::new),
        diverged: false,
        final_values: Vec::new(),
    };
    let record = |step: u64, learner: &L, result: &mut RunResult| -> Result<()> {
        result.steps.push(step);
        result.errors.push(task.error(learner.values())?);
        if let (Some(trace), Some(g)) = (result.gains.as_mut(), learner.gains()) {
            trace.push(g);
        }
        Ok(())
    };
    record(0, learner, &mut result)?;

    let mut x = 0usize;
    for step in 1..=settings.total_steps {
        if settings.sampling != SamplingMode::Trajectory {
            x = rng.gen_range(0..n);
        }
        let u: f64 = rng.gen();
        let a = match task {
            Task::Evaluation { policy, .. } => pick_from_row(policy.row(x), u),
            Task::Control { .. } if settings.sampling == SamplingMode::IidStateAction => {
                ((u * m as f64) as usize).min(m - 1)
            }
            Task::Control { .. } => {
                let eps = settings.exploration;
                if u < eps {
                    ((u / eps * m as f64) as usize).min(m - 1)
                } else {
                    greedy_action(&learner.values()[x * m..(x + 1) * m])
                }
            }
        };
        let sample = mdp.sample_unchecked(&mut rng, x, a);
        let new_value = learner.update(&sample);
        x = sample.next_state;

        if !(new_value.abs() <= settings.blow_up) {
            result.diverged = true;
            break;
        }
        if step % settings.eval_every == 0 || step == settings.total_steps {
            record(step, learner, &mut result)?;
        }
    }
    result.final_values = learner.values().to_vec();
    Ok(result)
}

struct TdLearner {
    v: Vec<f64>,
    counts: VisitCounts,
    gamma: f64,
    schedule: LearningRateSchedule,
}

impl Learner for TdLearner {
    fn values(&self) -> &[f64] {
        &self.v
    }

    fn update(&mut self, s: &TransitionSample) -> f64 {
        let x = s.state;
        let delta = s.reward + self.gamma * self.v[s.next_state] - self.v[x];
        self.v[x] += self.schedule.value(self.counts.get(x)) * delta;
        self.counts.increment(x);
        self.v[x]
    }
}

struct QLearner {
    q: Vec<f64>,
    m: usize,
    counts: VisitCounts,
    gamma: f64,
    schedule: LearningRateSchedule,
}

impl Learner for QLearner {
    fn values(&self) -> &[f64] {
        &self.q
    }

    fn update(&mut self, s: &TransitionSample) -> f64 {
        let i = s.state * self.m + s.action;
        let delta = q_delta(self.gamma, s, &self.q, self.m);
        self.q[i] += self.schedule.value(self.counts.get(i)) * delta;
        self.counts.increment(i);
        self.q[i]
    }
}

/// PID TD (`m = 1` view) or PID Q-learning over a flat table.
struct PidLearner {
    v: Vec<f64>,
    z: Vec<f64>,
    vp: Vec<f64>,
    m: usize,
    control: bool,
    counts: VisitCounts,
    gamma: f64,
    gains: Gains,
    schedules: ScheduleTriple,
}

impl Learner for PidLearner {
    fn values(&self) -> &[f64] {
        &self.v
    }

    fn update(&mut self, s: &TransitionSample) -> f64 {
        let (i, delta) = if self.control {
            (s.state * self.m + s.action, q_delta(self.gamma, s, &self.v, self.m))
        } else {
            (s.state, s.reward + self.gamma * self.v[s.next_state] - self.v[s.state])
        };
        let rates = self.schedules.at(self.counts.get(i));
        let out = pid_entry_update(&mut self.v[i], &mut self.z[i], &mut self.vp[i], delta, &self.gains, rates);
        self.counts.increment(i);
        out
    }
}

/// Fixed-gain learner configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Ignored by the conventional baselines.
    pub gains: Gains,
    /// Baselines use the `v` schedule only.
    pub schedules: ScheduleTriple,
}

/// Runs one seeded learner from zero initial values.
pub fn run_learning(
    task: &Task<'_>,
    learner: &LearnerConfig,
    settings: &RunSettings,
    run_id: usize,
    seed: u64,
) -> Result<RunResult> {
    if learner.algorithm.is_control() != task.is_control() {
        return Err(Error::InvalidConfig(format!(
            "algorithm {} does not match the {} task",
            learner.algorithm,
            if task.is_control() { "control" } else { "evaluation" }
        )));
    }
    learner.schedules.validate()?;
    learner.gains.validate()?;
    let mdp = task.mdp();
    let gamma = mdp.gamma();
    let len = task.value_len();
    let m = mdp.n_actions();
    match learner.algorithm {
        Algorithm::Td => drive(
            task,
            settings,
            run_id,
            seed,
            &mut TdLearner {
                v: vec![0.0; len],
                counts: VisitCounts::new(len),
                gamma,
                schedule: learner.schedules.v,
            },
        ),
        Algorithm::Q => drive(
            task,
            settings,
            run_id,
            seed,
            &mut QLearner {
                q: vec![0.0; len],
                m,
                counts: VisitCounts::new(len),
                gamma,
                schedule: learner.schedules.v,
            },
        ),
        Algorithm::PidTd | Algorithm::PidQ => drive(
            task,
            settings,
            run_id,
            seed,
            &mut PidLearner {
                v: vec![0.0; len],
                z: vec![0.0; len],
                vp: vec![0.0; len],
                m,
                control: task.is_control(),
                counts: VisitCounts::new(len),
                gamma,
                gains: learner.gains,
                schedules: learner.schedules,
            },
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::chain_walk;
    use crate::linalg::sup_norm;
    use crate::planning::pid_vi_step_pe;

    fn sample(x: usize, a: usize, r: f64, y: usize) -> TransitionSample {
        TransitionSample {
            state: x,
            action: a,
            reward: r,
            next_state: y,
        }
    }

    #[test]
    fn schedule_values() {
        let poly = LearningRateSchedule::Polynomial {
            epsilon: 2.0,
            offset: 10.0,
        };
        assert_eq!(poly.value(0), 0.2);
        let inf = LearningRateSchedule::CountCap {
            epsilon: 0.1,
            cap: f64::INFINITY,
        };
        assert_eq!(inf.value(0), 0.1);
        assert_eq!(inf.value(123_456), 0.1);
        let cap = LearningRateSchedule::CountCap { epsilon: 0.5, cap: 50.0 };
        assert_eq!(cap.value(1000), 0.05);
        assert_eq!(cap.value(0), 0.5);
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!(
            "0.5,50".parse::<LearningRateSchedule>().unwrap(),
            LearningRateSchedule::CountCap { epsilon: 0.5, cap: 50.0 }
        );
        assert_eq!(
            "0.1,inf".parse::<LearningRateSchedule>().unwrap().value(10_000),
            0.1
        );
        assert_eq!(
            "poly:20,100".parse::<LearningRateSchedule>().unwrap(),
            LearningRateSchedule::Polynomial {
                epsilon: 20.0,
                offset: 100.0
            }
        );
        assert_eq!(
            "0.25".parse::<LearningRateSchedule>().unwrap(),
            LearningRateSchedule::Constant { epsilon: 0.25 }
        );
        for bad in ["", "x", "1.5", "poly:200,10", "0.5,-1", "1,2,3"] {
            assert!(bad.parse::<LearningRateSchedule>().is_err(), "{bad}");
        }
        let s = LearningRateSchedule::CountCap {
            epsilon: 0.1,
            cap: f64::INFINITY,
        };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<LearningRateSchedule>(&json).unwrap(), s);
    }

    #[test]
    fn br_estimates() {
        let s = sample(0, 0, 1.0, 1);
        assert_eq!(br_estimate_pe(0.9, &s, &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(br_estimate_pe(0.5, &s, &[1.0, 2.0]).unwrap(), 1.0);
        let q = [0.0, 1.0, 3.0, 2.0];
        assert_eq!(br_estimate_control(0.5, &sample(0, 1, 1.0, 1), &q, 2).unwrap(), 1.5);
        assert!(br_estimate_pe(0.9, &sample(0, 0, 1.0, 5), &[0.0; 2]).is_err());
        assert!(br_estimate_control(0.9, &sample(0, 2, 1.0, 1), &q, 2).is_err());
    }

    #[test]
    fn pid_td_reads_old_values() {
        let mut s = PeState {
            v: vec![1.0, 2.0, 3.0],
            z: vec![0.5, -0.5, 0.0],
            v_prev: vec![0.0, 1.0, 4.0],
        };
        let mut counts = VisitCounts::new(3);
        let g = Gains::new(0.9, 0.2, 0.3, 0.1, 0.7).unwrap();
        let sched = ScheduleTriple {
            v: LearningRateSchedule::Constant { epsilon: 0.5 },
            z: LearningRateSchedule::Constant { epsilon: 0.25 },
            vp: LearningRateSchedule::Constant { epsilon: 0.75 },
        };
        pid_td_step(&mut s, &mut counts, &sample(1, 0, 1.0, 2), 0.9, &g, &sched).unwrap();
        let delta: f64 = 1.0 + 0.9 * 3.0 - 2.0;
        let v = 2.0 + 0.5 * (0.9 * delta + 0.2 * (0.7 * -0.5 + 0.1 * delta) + 0.3 * (2.0 - 1.0));
        let z = -0.5 + 0.25 * (0.7 * -0.5 + 0.1 * delta + 0.5);
        let vp = 1.0 + 0.75 * (2.0 - 1.0);
        assert!((s.v[1] - v).abs() < 1e-12);
        assert!((s.z[1] - z).abs() < 1e-12);
        assert!((s.v_prev[1] - vp).abs() < 1e-12);
        assert_eq!((s.v[0], s.v[2], s.z[0], s.v_prev[2]), (1.0, 3.0, 0.5, 4.0));
        assert_eq!(counts.as_slice(), &[0, 1, 0]);
    }

    #[test]
    fn pid_q_with_vi_gains_is_q_learning() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mdp, _) = chain_walk(0.9).unwrap();
        let mut pid = QState::zeros(50, 2);
        let mut plain = vec![0.0; 100];
        let (mut c1, mut c2) = (VisitCounts::new(100), VisitCounts::new(100));
        let sched = LearningRateSchedule::CountCap { epsilon: 0.5, cap: 10.0 };
        let g = Gains::new(1.0, 0.0, 0.0, 0.3, 0.0).unwrap();
        for _ in 0..10_000 {
            let x = rng.gen_range(0..50);
            let a = rng.gen_range(0..2);
            let s = mdp.sample_transition(&mut rng, x, a).unwrap();
            pid_q_step(&mut pid, &mut c1, &s, 0.9, &g, &ScheduleTriple::shared(sched)).unwrap();
            q_step(&mut plain, 2, &mut c2, &s, 0.9, &sched).unwrap();
        }
        assert_eq!(pid.q, plain);
    }

    #[test]
    fn sync_expected_step_is_damped_pid_vi() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let mrp = MarkovRewardProcess::new(&mdp, &pi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stacked: Vec<f64> = (0..150).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let s = PeState::from_stacked(&stacked).unwrap();
        let g = Gains::new(1.2, 0.3, 0.2, 0.05, 0.9).unwrap();
        let mu = 0.3;
        let sync = sync_pid_td_expected_step(&mrp, &s, &g, mu).unwrap().stacked();
        let full = pid_vi_step_pe(&mrp, &g, &s).unwrap().stacked();
        for i in 0..150 {
            let damped = stacked[i] + mu * (full[i] - stacked[i]);
            assert!((sync[i] - damped).abs() <= 1e-12);
        }
    }

    #[test]
    fn sync_steps_and_dataset() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = sync_dataset(&mdp, &pi, &mut rng).unwrap();
        assert_eq!(data.len(), 50);
        assert!(data.iter().enumerate().all(|(x, s)| s.state == x));
        let s = PeState::from_stacked(&(0..150).map(|i| i as f64 * 0.01).collect::<Vec<_>>()).unwrap();
        let g = Gains::new(0.7, 0.4, 0.1, 0.2, 0.5).unwrap();
        assert_eq!(sync_pid_td_step(&s, &data, 0.9, &g, 0.0).unwrap(), s);
        let pid = sync_pid_td_step(&s, &data, 0.9, &Gains::vi(), 0.4).unwrap();
        assert_eq!(pid.v, sync_td_step(&s.v, &data, 0.9, 0.4).unwrap());
        assert!(matches!(
            sync_td_step(&s.v, &data[..49], 0.9, 0.1),
            Err(Error::IncompleteDataset(_))
        ));
        let mut shuffled = data.clone();
        shuffled.swap(0, 1);
        assert!(sync_td_step(&s.v, &shuffled, 0.9, 0.1).is_err());
    }

    #[test]
    fn run_determinism_and_zero_steps() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let exact = mdp.exact_value_pe(&pi).unwrap();
        let task = Task::Evaluation {
            mdp: &mdp,
            policy: &pi,
            exact: &exact,
        };
        let learner = LearnerConfig {
            algorithm: Algorithm::Td,
            gains: Gains::vi(),
            schedules: ScheduleTriple::shared("0.5,50".parse().unwrap()),
        };
        let zero = RunSettings {
            total_steps: 0,
            ..RunSettings::default()
        };
        let r = run_learning(&task, &learner, &zero, 0, 1).unwrap();
        assert_eq!(r.errors, vec![1.0]);
        let settings = RunSettings {
            total_steps: 20_000,
            eval_every: 1000,
            ..RunSettings::default()
        };
        let a = run_learning(&task, &learner, &settings, 0, 9).unwrap();
        let b = run_learning(&task, &learner, &settings, 0, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps.len(), 21);
    }

    #[test]
    fn td_converges_on_chain_walk() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let exact = mdp.exact_value_pe(&pi).unwrap();
        let task = Task::Evaluation {
            mdp: &mdp,
            policy: &pi,
            exact: &exact,
        };
        let learner = LearnerConfig {
            algorithm: Algorithm::Td,
            gains: Gains::vi(),
            schedules: ScheduleTriple::shared("0.5,50".parse().unwrap()),
        };
        let settings = RunSettings {
            total_steps: 200_000,
            eval_every: 10_000,
            ..RunSettings::default()
        };
        let r = run_learning(&task, &learner, &settings, 0, 4).unwrap();
        assert!(*r.errors.last().unwrap() < 0.2, "{:?}", r.errors);
        assert!(!r.diverged);
    }

    #[test]
    fn divergence_is_flagged() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let exact = mdp.exact_value_pe(&pi).unwrap();
        let task = Task::Evaluation {
            mdp: &mdp,
            policy: &pi,
            exact: &exact,
        };
        let learner = LearnerConfig {
            algorithm: Algorithm::PidTd,
            gains: Gains::new(1.0, 0.0, 3.0, 0.0, 0.0).unwrap(),
            schedules: ScheduleTriple::shared(LearningRateSchedule::Constant { epsilon: 1.0 }),
        };
        let settings = RunSettings {
            total_steps: 100_000,
            ..RunSettings::default()
        };
        let r = run_learning(&task, &learner, &settings, 0, 4).unwrap();
        assert!(r.diverged);
        assert!(sup_norm(&r.final_values) > 1e12 || r.final_values.iter().any(|v| !v.is_finite()));
    }

    #[test]
    fn mismatched_configs_rejected() {
        let (mdp, pi) = chain_walk(0.9).unwrap();
        let exact = mdp.exact_value_pe(&pi).unwrap();
        let task = Task::Evaluation {
            mdp: &mdp,
            policy: &pi,
            exact: &exact,
        };
        let learner = LearnerConfig {
            algorithm: Algorithm::Q,
            gains: Gains::vi(),
            schedules: ScheduleTriple::shared(LearningRateSchedule::Constant { epsilon: 0.1 }),
        };
        assert!(run_learning(&task, &learner, &RunSettings::default(), 0, 0).is_err());
        let td = LearnerConfig {
            algorithm: Algorithm::Td,
            ..learner
        };
        let bad = RunSettings {
            sampling: SamplingMode::IidStateAction,
            ..RunSettings::default()
        };
        assert!(run_learning(&task, &td, &bad, 0, 0).is_err());
    }
}
