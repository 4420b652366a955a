//! Finite MDPs, policies, Bellman operators and exact solutions.
//!
//! Rewards are stored per transition as `r(x, a, x')`. This covers rewards
//! paid on entering a state as well as rewards that depend only on the current
//! state, and lets the sampler draw `(x', r)` jointly so that sampled Bellman
//! residuals stay unbiased.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sup_dist, DenseMatrix};

/// Row-sum tolerance for every stochastic row in the crate.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default iteration cap for [`TabularMdp::exact_value_control`].
pub const DEFAULT_VI_ITERATION_CAP: usize = 1_000_000;

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what}: entry {p} is negative or not finite")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidDistribution(format!("{what}: row sums to {sum}")));
    }
    Ok(())
}

/// A finite discounted MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// `P(x' | x, a)` at `(x * m + a) * n + x'`.
    transitions: Vec<f64>,
    /// `r(x, a, x')`, same layout as `transitions`.
    rewards: Vec<f64>,
    /// `r(x, a) = sum_x' P(x'|x,a) r(x,a,x')` at `x * m + a`.
    mean_rewards: Vec<f64>,
    /// Successor lists with cumulative probabilities for sampling.
    successors: Vec<Vec<(usize, f64)>>,
}

impl TabularMdp {
    /// Builds an MDP from flat `n * m * n` transition and reward tensors.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1)")));
        }
        let len = n_states * n_actions * n_states;
        Error::check_len("transition tensor", len, transitions.len())?;
        Error::check_len("reward tensor", len, rewards.len())?;
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!("reward {r} is not finite")));
        }

        let mut mean_rewards = Vec::with_capacity(n_states * n_actions);
        let mut successors = Vec::with_capacity(n_states * n_actions);
        for (sa, (row, rew)) in transitions
            .chunks_exact(n_states)
            .zip(rewards.chunks_exact(n_states))
            .enumerate()
        {
            let (x, a) = (sa / n_actions, sa % n_actions);
            check_distribution(row, &format!("transition row ({x}, {a})"))?;
            mean_rewards.push(row.iter().zip(rew).map(|(p, r)| p * r).sum());
            let mut cum = 0.0;
            let mut succ: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(y, p)| {
                    cum += p;
                    (y, cum)
                })
                .collect();
            // the last successor absorbs rounding so every draw in [0,1) lands
            if let Some(last) = succ.last_mut() {
                last.1 = f64::INFINITY;
            }
            successors.push(succ);
        }

        Ok(Self {
            n_states,
            n_actions,
            gamma,
            transitions,
            rewards,
            mean_rewards,
            successors,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Same dynamics with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            gamma,
            self.transitions.clone(),
            self.rewards.clone(),
        )
    }

    #[inline]
    fn sa(&self, x: usize, a: usize) -> usize {
        x * self.n_actions + a
    }

    pub fn transition_row(&self, x: usize, a: usize) -> &[f64] {
        let base = self.sa(x, a) * self.n_states;
        &self.transitions[base..base + self.n_states]
    }

    pub fn reward_row(&self, x: usize, a: usize) -> &[f64] {
        let base = self.sa(x, a) * self.n_states;
        &self.rewards[base..base + self.n_states]
    }

    pub fn transition_prob(&self, x: usize, a: usize, next: usize) -> f64 {
        self.transition_row(x, a)[next]
    }

    pub fn transition_reward(&self, x: usize, a: usize, next: usize) -> f64 {
        self.reward_row(x, a)[next]
    }

    /// Mean reward `r(x, a)`.
    pub fn mean_reward(&self, x: usize, a: usize) -> f64 {
        self.mean_rewards[self.sa(x, a)]
    }

    /// Mean reward table `r(x, a)` laid out row-major `n x m`.
    pub fn mean_reward_table(&self) -> &[f64] {
        &self.mean_rewards
    }

    /// Smallest and largest reward appearing on a reachable transition.
    pub fn reward_range(&self) -> (f64, f64) {
        self.transitions
            .iter()
            .zip(&self.rewards)
            .filter(|(p, _)| **p > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, r)| (lo.min(*r), hi.max(*r)))
    }

    /// Checks the `[0, 1]` reward-support assumption used by the theory module.
    pub fn check_theory_mode(&self) -> Result<()> {
        let (lo, hi) = self.reward_range();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::InvalidMdp(format!(
                "rewards span [{lo}, {hi}], outside the [0, 1] support assumed by the bounds"
            )));
        }
        Ok(())
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x < self.n_states {
            Ok(())
        } else {
            Err(Error::InvalidIndex {
                kind: "state",
                index: x,
                size: self.n_states,
            })
        }
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a < self.n_actions {
            Ok(())
        } else {
            Err(Error::InvalidIndex {
                kind: "action",
                index: a,
                size: self.n_actions,
            })
        }
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        Error::check_len("policy states", self.n_states, policy.n_states())?;
        Error::check_len("policy actions", self.n_actions, policy.n_actions())
    }

    /// `P^pi(x' | x) = sum_a pi(a|x) P(x'|x,a)`.
    pub fn policy_kernel(&self, policy: &Policy) -> Result<DenseMatrix> {
        self.check_policy(policy)?;
        let n = self.n_states;
        let mut kernel = DenseMatrix::zeros(n, n);
        for x in 0..n {
            for (a, &pa) in policy.row(x).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (y, p) in self.transition_row(x, a).iter().enumerate() {
                    kernel[(x, y)] += pa * p;
                }
            }
        }
        Ok(kernel)
    }

    /// `r^pi(x) = sum_a pi(a|x) r(x,a)`.
    pub fn expected_reward(&self, policy: &Policy) -> Result<Vec<f64>> {
        self.check_policy(policy)?;
        Ok((0..self.n_states)
            .map(|x| {
                policy
                    .row(x)
                    .iter()
                    .enumerate()
                    .map(|(a, pa)| pa * self.mean_reward(x, a))
                    .sum()
            })
            .collect())
    }

    pub fn bellman_pe(&self, policy: &Policy, v: &[f64]) -> Result<Vec<f64>> {
        MarkovRewardProcess::new(self, policy)?.bellman(v)
    }

    pub fn bellman_residual_pe(&self, policy: &Policy, v: &[f64]) -> Result<Vec<f64>> {
        MarkovRewardProcess::new(self, policy)?.residual(v)
    }

    pub fn exact_value_pe(&self, policy: &Policy) -> Result<Vec<f64>> {
        MarkovRewardProcess::new(self, policy)?.exact_value()
    }

    /// `(T* Q)(x,a) = r(x,a) + gamma sum_x' P(x'|x,a) max_a' Q(x',a')`.
    pub fn bellman_control(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_states * self.n_actions];
        self.bellman_control_into(q, &mut out)?;
        Ok(out)
    }

    pub(crate) fn bellman_control_into(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        let (n, m) = (self.n_states, self.n_actions);
        Error::check_len("action-value table", n * m, q.len())?;
        Error::check_len("action-value output", n * m, out.len())?;
        let greedy: Vec<f64> = q.chunks_exact(m).map(max_value).collect();
        for (sa, o) in out.iter_mut().enumerate() {
            let (x, a) = (sa / m, sa % m);
            let expect: f64 = self
                .transition_row(x, a)
                .iter()
                .zip(&greedy)
                .map(|(p, g)| p * g)
                .sum();
            *o = self.mean_rewards[sa] + self.gamma * expect;
        }
        Ok(())
    }

    pub fn bellman_residual_control(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut tq = self.bellman_control(q)?;
        tq.iter_mut().zip(q).for_each(|(t, q)| *t -= q);
        Ok(tq)
    }

    /// Runs value iteration on `Q` until `||Q - Q*||_inf <= tol`, with the
    /// default iteration cap.
    pub fn exact_value_control(&self, tol: f64) -> Result<Vec<f64>> {
        self.exact_value_control_capped(tol, DEFAULT_VI_ITERATION_CAP)
    }

    /// Value iteration stops once successive iterates differ by at most
    /// `tol (1 - gamma) / (2 gamma)` in sup-norm, which puts the returned
    /// table within `tol/2` of `Q*`.
    pub fn exact_value_control_capped(&self, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
        }
        let threshold = if self.gamma > 0.0 {
            tol * (1.0 - self.gamma) / (2.0 * self.gamma)
        } else {
            f64::INFINITY
        };
        let mut q = vec![0.0; self.n_states * self.n_actions];
        let mut next = q.clone();
        for _ in 0..max_iters {
            self.bellman_control_into(&q, &mut next)?;
            let diff = sup_dist(&q, &next);
            std::mem::swap(&mut q, &mut next);
            if diff <= threshold {
                return Ok(q);
            }
        }
        Err(Error::IterationCap(max_iters))
    }

    /// Draws `(x', r)` for the pair `(x, a)`; the reward is `r(x, a, x')`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        x: usize,
        a: usize,
    ) -> Result<TransitionSample> {
        self.check_state(x)?;
        self.check_action(a)?;
        Ok(self.sample_unchecked(rng, x, a))
    }

    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, rng: &mut R, x: usize, a: usize) -> TransitionSample {
        let succ = &self.successors[self.sa(x, a)];
        let u: f64 = rng.gen();
        let next = succ
            .iter()
            .find(|(_, cum)| u < *cum)
            .map(|(y, _)| *y)
            .expect("last successor has infinite cumulative mass");
        TransitionSample {
            state: x,
            action: a,
            reward: self.transition_reward(x, a, next),
            next_state: next,
        }
    }

    pub fn to_document(&self) -> MdpDocument {
        let (n, m) = (self.n_states, self.n_actions);
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            (0..n)
                .map(|x| (0..m).map(|a| flat[(x * m + a) * n..(x * m + a + 1) * n].to_vec()).collect())
                .collect()
        };
        MdpDocument {
            n_states: n,
            n_actions: m,
            gamma: self.gamma,
            transitions: nest(&self.transitions),
            rewards: nest(&self.rewards),
        }
    }

    pub fn from_document(doc: &MdpDocument) -> Result<Self> {
        let (n, m) = (doc.n_states, doc.n_actions);
        let flatten = |what: &'static str, t: &[Vec<Vec<f64>>]| -> Result<Vec<f64>> {
            Error::check_len(what, n, t.len())?;
            let mut flat = Vec::with_capacity(n * m * n);
            for per_state in t {
                Error::check_len(what, m, per_state.len())?;
                for row in per_state {
                    Error::check_len(what, n, row.len())?;
                    flat.extend_from_slice(row);
                }
            }
            Ok(flat)
        };
        Self::new(
            n,
            m,
            doc.gamma,
            flatten("transitions", &doc.transitions)?,
            flatten("rewards", &doc.rewards)?,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// On-disk MDP format: `transitions[x][a][x']` and `rewards[x][a][x']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
}

/// Maximum of a non-empty slice.
#[inline]
pub fn max_value(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the maximum; ties go to the lowest index.
#[inline]
pub fn greedy_action(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = a;
        }
    }
    best
}

/// A stochastic policy `pi(a | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_actions == 0 {
            return Err(Error::InvalidDistribution("empty policy".into()));
        }
        let mut probs = Vec::with_capacity(rows.len() * n_actions);
        for (x, row) in rows.iter().enumerate() {
            Error::check_len("policy row", n_actions, row.len())?;
            check_distribution(row, &format!("policy row {x}"))?;
            probs.extend_from_slice(row);
        }
        Ok(Self {
            n_states: rows.len(),
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Always take `actions[x]` in state `x`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidIndex {
                    kind: "action",
                    index: a,
                    size: n_actions,
                });
            }
            probs[x * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.n_actions + a]
    }

    /// Draws an action for state `x` with a single uniform draw.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R, x: usize) -> usize {
        sample_from_row(rng, self.row(x))
    }
}

/// Inverse-CDF sampling from a probability row; always consumes one `f64`.
pub(crate) fn sample_from_row<R: Rng + ?Sized>(rng: &mut R, row: &[f64]) -> usize {
    pick_from_row(row, rng.gen())
}

/// Inverse-CDF pick for a pre-drawn uniform `u` in `[0, 1)`.
pub(crate) fn pick_from_row(row: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (i, p) in row.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        cum += p;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}

/// One observed transition `(x, a, r, x')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSample {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// The Markov reward process `(P^pi, r^pi, gamma)` induced by a policy.
///
/// Precomputing the kernel once keeps repeated Bellman evaluations cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRewardProcess {
    kernel: DenseMatrix,
    reward: Vec<f64>,
    gamma: f64,
}

impl MarkovRewardProcess {
    pub fn new(mdp: &TabularMdp, policy: &Policy) -> Result<Self> {
        Ok(Self {
            kernel: mdp.policy_kernel(policy)?,
            reward: mdp.expected_reward(policy)?,
            gamma: mdp.gamma(),
        })
    }

    pub fn from_parts(kernel: DenseMatrix, reward: Vec<f64>, gamma: f64) -> Result<Self> {
        Error::check_len("kernel columns", kernel.rows(), kernel.cols())?;
        Error::check_len("reward vector", kernel.rows(), reward.len())?;
        for x in 0..kernel.rows() {
            check_distribution(kernel.row(x), &format!("kernel row {x}"))?;
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1)")));
        }
        Ok(Self { kernel, reward, gamma })
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn kernel(&self) -> &DenseMatrix {
        &self.kernel
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `T^pi V = r^pi + gamma P^pi V`.
    pub fn bellman(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut pv = self.kernel.mul_vec(v)?;
        pv.iter_mut()
            .zip(&self.reward)
            .for_each(|(p, r)| *p = r + self.gamma * *p);
        Ok(pv)
    }

    /// `BR^pi V = T^pi V - V`.
    pub fn residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut tv = self.bellman(v)?;
        tv.iter_mut().zip(v).for_each(|(t, v)| *t -= v);
        Ok(tv)
    }

    /// Solves `(I - gamma P^pi) V = r^pi`.
    pub fn exact_value(&self) -> Result<Vec<f64>> {
        let n = self.n_states();
        let mut system = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                system[(i, j)] -= self.gamma * self.kernel[(i, j)];
            }
        }
        system.solve(&self.reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sup_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two states; action 0 swaps, action 1 stays.
    fn swap_mdp(gamma: f64, rewards: [f64; 2]) -> TabularMdp {
        let p = vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let r: Vec<f64> = (0..2)
            .flat_map(|x| std::iter::repeat(rewards[x]).take(4))
            .collect();
        TabularMdp::new(2, 2, gamma, p, r).unwrap()
    }

    pub(crate) fn random_mdp(seed: u64, n: usize, m: usize, gamma: f64) -> TabularMdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Vec::new();
        for _ in 0..n * m {
            let row: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = row.iter().sum();
            p.extend(row.iter().map(|x| x / s));
        }
        // renormalize in place so rows sum to 1 within rounding
        for row in p.chunks_exact_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        let r = (0..n * m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TabularMdp::new(n, m, gamma, p, r).unwrap()
    }

    #[test]
    fn deterministic_kernel() {
        let mdp = swap_mdp(0.5, [1.0, 0.0]);
        let pi = Policy::deterministic(2, &[0, 0]).unwrap();
        let k = mdp.policy_kernel(&pi).unwrap();
        assert_eq!(k.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn uniform_kernel_matches_brute_force() {
        let mdp = random_mdp(3, 5, 2, 0.9);
        let pi = Policy::uniform(5, 2);
        let k = mdp.policy_kernel(&pi).unwrap();
        for x in 0..5 {
            let s: f64 = k.row(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for y in 0..5 {
                let brute = 0.5 * mdp.transition_prob(x, 0, y) + 0.5 * mdp.transition_prob(x, 1, y);
                assert!((k[(x, y)] - brute).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_state_cycle_value() {
        let mdp = swap_mdp(0.5, [1.0, 0.0]);
        let pi = Policy::deterministic(2, &[0, 0]).unwrap();
        let v = mdp.exact_value_pe(&pi).unwrap();
        // V0 = 1 + V1/2, V1 = V0/2
        assert!((v[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = TabularMdp::new(1, 1, 0.75, vec![1.0], vec![1.0]).unwrap();
        let v = mdp.exact_value_pe(&Policy::uniform(1, 1)).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn bellman_pe_brute_force() {
        let mdp = random_mdp(11, 4, 3, 0.8);
        let pi = Policy::uniform(4, 3);
        let v = [0.3, -1.2, 2.0, 0.7];
        let tv = mdp.bellman_pe(&pi, &v).unwrap();
        for x in 0..4 {
            let mut brute = 0.0;
            for a in 0..3 {
                for y in 0..4 {
                    let p = pi.prob(x, a) * mdp.transition_prob(x, a, y);
                    brute += p * (mdp.transition_reward(x, a, y) + 0.8 * v[y]);
                }
            }
            assert!((tv[x] - brute).abs() < 1e-12);
        }
        let zero = mdp.bellman_pe(&pi, &[0.0; 4]).unwrap();
        assert_eq!(zero, mdp.expected_reward(&pi).unwrap());
    }

    #[test]
    fn bellman_control_brute_force() {
        let mdp = random_mdp(5, 3, 2, 0.9);
        let q = [0.5, -0.5, 1.5, 0.25, -2.0, 3.0];
        let tq = mdp.bellman_control(&q).unwrap();
        for x in 0..3 {
            for a in 0..2 {
                let mut brute = 0.0;
                for y in 0..3 {
                    let best = q[y * 2].max(q[y * 2 + 1]);
                    brute += mdp.transition_prob(x, a, y) * (mdp.transition_reward(x, a, y) + 0.9 * best);
                }
                assert!((tq[x * 2 + a] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn control_closed_form_single_state() {
        // rewards 1 and 0, one state, gamma 0.9
        let mdp = TabularMdp::new(1, 2, 0.9, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let q = mdp.exact_value_control(1e-10).unwrap();
        assert!((q[0] - 10.0).abs() <= 1e-10);
        assert!((q[1] - 9.0).abs() <= 1e-10);
    }

    #[test]
    fn control_symmetric_actions() {
        let base = random_mdp(8, 4, 1, 0.9);
        let p: Vec<f64> = (0..4)
            .flat_map(|x| base.transition_row(x, 0).repeat(3))
            .collect();
        let r: Vec<f64> = (0..4).flat_map(|x| base.reward_row(x, 0).repeat(3)).collect();
        let mdp = TabularMdp::new(4, 3, 0.9, p, r).unwrap();
        let q = mdp.exact_value_control(1e-9).unwrap();
        for x in 0..4 {
            assert!((q[x * 3] - q[x * 3 + 1]).abs() <= 1e-9);
            assert!((q[x * 3] - q[x * 3 + 2]).abs() <= 1e-9);
        }
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let mdp = random_mdp(1, 3, 2, 0.99);
        assert!(matches!(mdp.exact_value_control_capped(1e-12, 3), Err(Error::IterationCap(3))));
    }

    #[test]
    fn residual_zero_at_fixed_point() {
        let mdp = random_mdp(2, 6, 2, 0.95);
        let pi = Policy::uniform(6, 2);
        let v = mdp.exact_value_pe(&pi).unwrap();
        assert!(sup_norm(&mdp.bellman_residual_pe(&pi, &v).unwrap()) <= 1e-10);
    }

    #[test]
    fn invalid_inputs() {
        assert!(TabularMdp::new(1, 1, 1.0, vec![1.0], vec![0.0]).is_err());
        assert!(TabularMdp::new(2, 1, 0.5, vec![0.5, 0.6, 1.0, 0.0], vec![0.0; 4]).is_err());
        assert!(TabularMdp::new(1, 1, 0.5, vec![1.0], vec![f64::NAN]).is_err());
        let mdp = swap_mdp(0.5, [0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(mdp.sample_transition(&mut rng, 2, 0).is_err());
        assert!(mdp.sample_transition(&mut rng, 0, 5).is_err());
        assert!(mdp.policy_kernel(&Policy::uniform(3, 2)).is_err());
        assert!(mdp.bellman_control(&[0.0; 3]).is_err());
    }

    #[test]
    fn deterministic_sampling() {
        let mdp = swap_mdp(0.5, [1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = mdp.sample_transition(&mut rng, 0, 0).unwrap();
            assert_eq!(s.next_state, 1);
            assert_eq!(s.reward, 1.0);
        }
    }

    #[test]
    fn json_round_trip() {
        let mdp = random_mdp(4, 3, 2, 0.9);
        let back = TabularMdp::from_json(&mdp.to_json().unwrap()).unwrap();
        assert_eq!(mdp, back);
        let bad = r#"{"n_states":1,"n_actions":1,"gamma":0.5,"transitions":[[[0.5]]],"rewards":[[[0.0]]]}"#;
        assert!(TabularMdp::from_json(bad).is_err());
    }

    #[test]
    fn theory_mode_flags_out_of_range_rewards() {
        assert!(swap_mdp(0.5, [1.0, 0.0]).check_theory_mode().is_ok());
        assert!(swap_mdp(0.5, [2.0, 0.0]).check_theory_mode().is_err());
    }
}
