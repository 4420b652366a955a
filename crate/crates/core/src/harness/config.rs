//! Flat JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environments::{chain_walk, cliff_walk, garnet, GarnetSpec};
use crate::error::{Error, Result};
use crate::gain_adaptation::GainAdaptationConfig;
use crate::learning::{Algorithm, LearnerConfig, LearningRateSchedule, RunSettings, SamplingMode, ScheduleTriple};
use crate::mdp::{Policy, TabularMdp};
use crate::planning::Gains;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentName {
    ChainWalk,
    CliffWalk,
    Garnet,
    /// An MDP read from `mdp_file`, evaluated under the uniform policy.
    File,
}

impl std::str::FromStr for EnvironmentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain-walk" => Ok(Self::ChainWalk),
            "cliff-walk" => Ok(Self::CliffWalk),
            "garnet" => Ok(Self::Garnet),
            "file" => Ok(Self::File),
            _ => Err(Error::InvalidConfig(format!("unknown environment '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Pe,
    Control,
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pe" => Ok(Self::Pe),
            "control" => Ok(Self::Control),
            _ => Err(Error::InvalidConfig(format!("unknown problem '{s}'"))),
        }
    }
}

/// One experiment. Every key has a matching CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentName,
    /// Overrides the environment's discount; file MDPs keep their own otherwise.
    pub gamma: Option<f64>,
    pub mdp_file: Option<PathBuf>,
    pub n_states: usize,
    pub n_actions: usize,
    pub branching: usize,
    pub reward_states: usize,
    pub garnet_seed: u64,
    /// Garnet instances `garnet_seed, garnet_seed + 1, ...`, each with `n_runs` runs.
    pub n_instances: usize,

    pub problem: Problem,
    pub algorithm: Algorithm,
    #[serde(with = "string_form")]
    pub gains: Gains,
    pub lr_v: LearningRateSchedule,
    /// Defaults to `lr_v`.
    pub lr_z: Option<LearningRateSchedule>,
    /// Defaults to `lr_v`.
    pub lr_vp: Option<LearningRateSchedule>,

    pub adapt_gains: bool,
    pub eta: f64,
    pub lambda: f64,
    pub eps_norm: f64,

    pub total_steps: u64,
    pub eval_every: u64,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Defaults to `iid-state` for evaluation and `iid-state-action` for control.
    pub sampling: Option<SamplingMode>,
    pub exploration: f64,
    pub blow_up: f64,
    /// Worker threads; `None` lets rayon decide. Never affects results.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let garnet = GarnetSpec::default();
        let ga = GainAdaptationConfig::default();
        let run = RunSettings::default();
        Self {
            environment: EnvironmentName::ChainWalk,
            gamma: None,
            mdp_file: None,
            n_states: garnet.n_states,
            n_actions: garnet.n_actions,
            branching: garnet.branching,
            reward_states: garnet.n_reward_states,
            garnet_seed: garnet.seed,
            n_instances: 1,
            problem: Problem::Pe,
            algorithm: Algorithm::Td,
            gains: ga.initial,
            lr_v: LearningRateSchedule::Constant { epsilon: 0.1 },
            lr_z: None,
            lr_vp: None,
            adapt_gains: false,
            eta: ga.eta,
            lambda: ga.lambda,
            eps_norm: ga.eps_norm,
            total_steps: run.total_steps,
            eval_every: run.eval_every,
            n_runs: 80,
            base_seed: 0,
            sampling: None,
            exploration: run.exploration,
            blow_up: run.blow_up,
            jobs: None,
        }
    }
}

/// An MDP ready to be learned on, with its reference solution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mdp: TabularMdp,
    pub policy: Policy,
    /// `V^pi` for evaluation, `Q*` for control.
    pub exact: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_control(&self) -> bool {
        self.problem == Problem::Control
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm.is_control() != self.is_control() {
            return Err(Error::InvalidConfig(format!(
                "algorithm {} does not solve problem {:?}",
                self.algorithm, self.problem
            )));
        }
        if self.adapt_gains && !self.algorithm.is_pid() {
            return Err(Error::InvalidConfig("gain adaptation needs pid-td or pid-q".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be positive".into()));
        }
        if self.n_instances == 0 {
            return Err(Error::InvalidConfig("n_instances must be positive".into()));
        }
        if self.n_instances > 1 && self.environment != EnvironmentName::Garnet {
            return Err(Error::InvalidConfig("several instances need the garnet environment".into()));
        }
        if self.environment == EnvironmentName::File && self.mdp_file.is_none() {
            return Err(Error::InvalidConfig("environment 'file' needs mdp_file".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be positive".into()));
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::InvalidConfig(format!("gamma {g} must lie in [0, 1)")));
            }
        }
        self.gains.validate()?;
        self.schedules().validate()?;
        self.run_settings().validate(self.is_control())?;
        if self.adapt_gains {
            self.ga_config().validate()?;
        }
        if self.environment == EnvironmentName::Garnet {
            self.garnet_spec(0).validate()?;
        }
        Ok(())
    }

    pub fn schedules(&self) -> ScheduleTriple {
        ScheduleTriple {
            v: self.lr_v,
            z: self.lr_z.unwrap_or(self.lr_v),
            vp: self.lr_vp.unwrap_or(self.lr_v),
        }
    }

    pub fn run_settings(&self) -> RunSettings {
        let sampling = self.sampling.unwrap_or(if self.is_control() {
            SamplingMode::IidStateAction
        } else {
            SamplingMode::IidState
        });
        RunSettings {
            sampling,
            total_steps: self.total_steps,
            eval_every: self.eval_every,
            exploration: self.exploration,
            blow_up: self.blow_up,
        }
    }

    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            algorithm: self.algorithm,
            gains: self.gains,
            schedules: self.schedules(),
        }
    }

    pub fn ga_config(&self) -> GainAdaptationConfig {
        GainAdaptationConfig {
            eta: self.eta,
            lambda: self.lambda,
            eps_norm: self.eps_norm,
            initial: self.gains,
        }
    }

    pub fn garnet_spec(&self, instance: usize) -> GarnetSpec {
        GarnetSpec {
            n_states: self.n_states,
            n_actions: self.n_actions,
            branching: self.branching,
            n_reward_states: self.reward_states,
            seed: self.garnet_seed.wrapping_add(instance as u64),
            gamma: self.gamma.unwrap_or(GarnetSpec::default().gamma),
        }
    }

    /// Builds instance `instance` and solves it exactly.
    pub fn build_instance(&self, instance: usize) -> Result<Instance> {
        let (mdp, policy) = self.build_mdp(instance)?;
        let exact = if self.is_control() {
            mdp.exact_value_control(control_tolerance(&mdp))?
        } else {
            mdp.exact_value_pe(&policy)?
        };
        Ok(Instance { mdp, policy, exact })
    }

    /// The MDP and evaluation policy of instance `instance`.
    pub fn build_mdp(&self, instance: usize) -> Result<(TabularMdp, Policy)> {
        let gamma = self.gamma.unwrap_or(DEFAULT_GAMMA);
        match self.environment {
            EnvironmentName::ChainWalk => chain_walk(gamma),
            EnvironmentName::CliffWalk => cliff_walk(gamma),
            EnvironmentName::Garnet => garnet(&self.garnet_spec(instance)),
            EnvironmentName::File => {
                let path = self.mdp_file.as_deref().ok_or_else(|| {
                    Error::InvalidConfig("environment 'file' needs mdp_file".into())
                })?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let mut mdp = TabularMdp::from_json(&text)?;
                if let Some(g) = self.gamma {
                    mdp = mdp.with_gamma(g)?;
                }
                let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());
                Ok((mdp, policy))
            }
        }
    }
}

/// Discount of the built-in environments when none is configured.
pub const DEFAULT_GAMMA: f64 = 0.99;

/// Tolerance for `Q*`, scaled to the value magnitude so the relative
/// accuracy does not depend on the reward scale.
pub fn control_tolerance(mdp: &TabularMdp) -> f64 {
    let (lo, hi) = mdp.reward_range();
    let rmax = lo.abs().max(hi.abs());
    1e-10 * (rmax / (1.0 - mdp.gamma())).max(1.0)
}

/// Serde through `Display`/`FromStr`, so gains read as `"kp,ki,kd,alpha,beta"`.
pub(crate) mod string_form {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let text = String::deserialize(d)?;
        text.parse().map_err(de::Error::custom)
    }
}
