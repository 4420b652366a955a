//! Benchmark environments: Chain Walk, Cliff Walk and Garnet.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp};

pub const CHAIN_STATES: usize = 50;
pub const CHAIN_LEFT: usize = 0;
pub const CHAIN_RIGHT: usize = 1;

/// Circular chain of 50 states with two actions.
///
/// Action 0 moves left (index - 1 mod 50) and action 1 right. The intended
/// move happens with probability 0.7, the agent stays with 0.1 and moves the
/// other way with 0.2. Entering state 10 pays +1, entering 40 pays -1.
/// The returned policy always moves left.
pub fn chain_walk(gamma: f64) -> Result<(TabularMdp, Policy)> {
    let n = CHAIN_STATES;
    let mut p = vec![0.0; n * 2 * n];
    let mut r = vec![0.0; n * 2 * n];
    for x in 0..n {
        let left = (x + n - 1) % n;
        let right = (x + 1) % n;
        for (a, (intended, opposite)) in [(left, right), (right, left)].into_iter().enumerate() {
            let base = (x * 2 + a) * n;
            p[base + intended] += 0.7;
            p[base + x] += 0.1;
            p[base + opposite] += 0.2;
            for y in 0..n {
                r[base + y] = chain_reward(y);
            }
        }
    }
    let mdp = TabularMdp::new(n, 2, gamma, p, r)?;
    let policy = Policy::deterministic(2, &vec![CHAIN_LEFT; n])?;
    Ok((mdp, policy))
}

fn chain_reward(entered: usize) -> f64 {
    match entered {
        10 => 1.0,
        40 => -1.0,
        _ => 0.0,
    }
}

pub const CLIFF_SIDE: usize = 6;
pub const CLIFF_START: usize = 0;
pub const CLIFF_GOAL: usize = 5;
pub const CLIFF_UP: usize = 0;
pub const CLIFF_DOWN: usize = 1;
pub const CLIFF_LEFT: usize = 2;
pub const CLIFF_RIGHT: usize = 3;

/// Reward for acting in a cliff cell, by row (top, middle, bottom).
const CLIFF_ROW_REWARD: [f64; 3] = [-32.0, -16.0, -8.0];

/// State index of grid cell `(row, col)`, row 0 on top.
pub fn cliff_state(row: usize, col: usize) -> usize {
    row * CLIFF_SIDE + col
}

/// Whether `state` is one of the 12 cliff tiles (columns 1..=4 of rows 1..=3).
pub fn is_cliff(state: usize) -> bool {
    let (row, col) = (state / CLIFF_SIDE, state % CLIFF_SIDE);
    (1..=3).contains(&row) && (1..=4).contains(&col)
}

fn cliff_move(state: usize, dir: usize) -> Option<usize> {
    let (row, col) = (state / CLIFF_SIDE, state % CLIFF_SIDE);
    let last = CLIFF_SIDE - 1;
    match dir {
        CLIFF_UP if row > 0 => Some(state - CLIFF_SIDE),
        CLIFF_DOWN if row < last => Some(state + CLIFF_SIDE),
        CLIFF_LEFT if col > 0 => Some(state - 1),
        CLIFF_RIGHT if col < last => Some(state + 1),
        _ => None,
    }
}

/// 6x6 grid world with 12 absorbing cliff tiles and an absorbing goal.
///
/// The reward is paid for acting in a cell: 20 in the goal, -32/-16/-8 in a
/// top/middle/bottom cliff tile and -1 elsewhere. A move aimed off the grid
/// leaves the agent in place. Otherwise the intended move succeeds with
/// probability 0.9 and each of the other three directions has 0.1/3; a slip
/// off the grid also leaves the agent in place. The returned policy is the
/// uniform random walk.
pub fn cliff_walk(gamma: f64) -> Result<(TabularMdp, Policy)> {
    let n = CLIFF_SIDE * CLIFF_SIDE;
    let m = 4;
    let mut p = vec![0.0; n * m * n];
    let mut r = vec![0.0; n * m * n];
    for x in 0..n {
        let reward = if x == CLIFF_GOAL {
            20.0
        } else if is_cliff(x) {
            CLIFF_ROW_REWARD[x / CLIFF_SIDE - 1]
        } else {
            -1.0
        };
        for a in 0..m {
            let base = (x * m + a) * n;
            r[base..base + n].iter_mut().for_each(|v| *v = reward);
            let row = &mut p[base..base + n];
            if x == CLIFF_GOAL || is_cliff(x) {
                row[x] = 1.0;
                continue;
            }
            match cliff_move(x, a) {
                None => row[x] = 1.0,
                Some(target) => {
                    row[target] += 0.9;
                    for dir in (0..m).filter(|d| *d != a) {
                        row[cliff_move(x, dir).unwrap_or(x)] += 0.1 / 3.0;
                    }
                }
            }
        }
    }
    let mdp = TabularMdp::new(n, m, gamma, p, r)?;
    Ok((mdp, Policy::uniform(n, m)))
}

/// Parameters of a random Garnet MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GarnetSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub branching: usize,
    pub n_reward_states: usize,
    pub seed: u64,
    pub gamma: f64,
}

impl Default for GarnetSpec {
    fn default() -> Self {
        Self {
            n_states: 50,
            n_actions: 3,
            branching: 5,
            n_reward_states: 10,
            seed: 0,
            gamma: 0.99,
        }
    }
}

impl GarnetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 || self.n_actions == 0 {
            return Err(Error::InvalidConfig(
                "garnet needs at least 2 states and 1 action".into(),
            ));
        }
        // successors exclude the source state
        if self.branching == 0 || self.branching > self.n_states - 1 {
            return Err(Error::InvalidConfig(format!(
                "garnet branching {} must lie in 1..={}",
                self.branching,
                self.n_states - 1
            )));
        }
        if self.n_reward_states > self.n_states {
            return Err(Error::InvalidConfig(format!(
                "{} reward states exceed {} states",
                self.n_reward_states, self.n_states
            )));
        }
        Ok(())
    }
}

/// Random Garnet MDP, deterministic in `spec.seed`.
///
/// Each `(x, a)` moves uniformly to `branching` distinct states other than
/// `x`. `n_reward_states` states pay `r(x) ~ U(0, 1)` for every action taken
/// there, all other states pay nothing. The returned policy is uniform.
pub fn garnet(spec: &GarnetSpec) -> Result<(TabularMdp, Policy)> {
    spec.validate()?;
    let (n, m, b) = (spec.n_states, spec.n_actions, spec.branching);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut state_reward = vec![0.0; n];
    for x in sample(&mut rng, n, spec.n_reward_states) {
        // reject an exact zero so reward states are distinguishable
        state_reward[x] = loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        };
    }

    let mut p = vec![0.0; n * m * n];
    let mut r = vec![0.0; n * m * n];
    for x in 0..n {
        for a in 0..m {
            let base = (x * m + a) * n;
            for k in sample(&mut rng, n - 1, b) {
                let y = if k >= x { k + 1 } else { k };
                p[base + y] = 1.0 / b as f64;
            }
            r[base..base + n].iter_mut().for_each(|v| *v = state_reward[x]);
        }
    }
    let mdp = TabularMdp::new(n, m, spec.gamma, p, r)?;
    Ok((mdp, Policy::uniform(n, m)))
}
