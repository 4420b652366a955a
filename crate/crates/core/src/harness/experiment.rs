//! Seeded multi-run orchestration and aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Instance};
use crate::error::{Error, Result};
use crate::gain_adaptation::{run_pid_q_with_ga, run_pid_td_with_ga};
use crate::learning::{run_learning, RunResult, Task};

/// A run tagged with the MDP instance it ran on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: usize,
    pub result: RunResult,
}

/// Mean and standard error per evaluation step over the non-diverged traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation over `sqrt(n_included)`; zero for one trace.
    pub stderr: Vec<f64>,
    pub n_included: usize,
    pub n_diverged: usize,
}

impl Aggregate {
    /// Aggregates `(steps, errors, diverged)` traces. Diverged traces are
    /// counted and skipped. The included traces must share one step grid.
    pub fn from_traces<'a, I>(traces: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [u64], &'a [f64], bool)>,
    {
        let mut steps: Option<&[u64]> = None;
        let mut kept: Vec<&[f64]> = Vec::new();
        let mut n_diverged = 0;
        for (s, e, diverged) in traces {
            if diverged {
                n_diverged += 1;
                continue;
            }
            Error::check_len("trace errors", s.len(), e.len())?;
            match steps {
                None => steps = Some(s),
                Some(first) if first != s => {
                    return Err(Error::InvalidConfig("traces use different step grids".into()))
                }
                Some(_) => {}
            }
            kept.push(e);
        }
        let steps = steps.unwrap_or(&[]).to_vec();
        let n = kept.len();
        let mut mean = Vec::with_capacity(steps.len());
        let mut stderr = Vec::with_capacity(steps.len());
        for k in 0..steps.len() {
            let m = kept.iter().map(|e| e[k]).sum::<f64>() / n as f64;
            let se = if n > 1 {
                let var = kept.iter().map(|e| (e[k] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            mean.push(m);
            stderr.push(se);
        }
        Ok(Self {
            steps,
            mean,
            stderr,
            n_included: n,
            n_diverged,
        })
    }

    /// First evaluation step whose mean error is at most `target`.
    pub fn first_step_below(&self, target: f64) -> Option<u64> {
        self.steps
            .iter()
            .zip(&self.mean)
            .find(|(_, &m)| m <= target)
            .map(|(&s, _)| s)
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    /// Sorted by `run_id`; includes diverged runs.
    pub runs: Vec<RunRecord>,
    /// One aggregate over the runs of each instance.
    pub instances: Vec<Aggregate>,
    /// Over runs for a single instance, over instance means otherwise.
    pub aggregate: Aggregate,
}

impl ExperimentOutput {
    pub fn n_diverged(&self) -> usize {
        self.runs.iter().filter(|r| r.result.diverged).count()
    }

    pub fn all_diverged(&self) -> bool {
        self.n_diverged() == self.runs.len()
    }
}

/// Runs `n_runs` seeded runs on each instance. Run `r` of instance `i` has
/// `run_id = i * n_runs + r` and seed `base_seed + run_id`, so the output is
/// a pure function of the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    with_pool(config.jobs, || run_unpooled(config))
}

pub(crate) fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(f),
    }
}

pub(crate) fn build_instances(config: &ExperimentConfig) -> Result<Vec<Instance>> {
    (0..config.n_instances)
        .into_par_iter()
        .map(|i| config.build_instance(i))
        .collect()
}

fn run_unpooled(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_on_instances(config, &build_instances(config)?)
}

/// `instances[i]` must be `config.build_instance(i)`.
pub(crate) fn run_on_instances(config: &ExperimentConfig, instances: &[Instance]) -> Result<ExperimentOutput> {
    Error::check_len("instances", config.n_instances, instances.len())?;
    let jobs: Vec<(usize, usize)> = (0..config.n_instances)
        .flat_map(|i| (0..config.n_runs).map(move |r| (i, i * config.n_runs + r)))
        .collect();
    let mut runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(i, run_id)| {
            let seed = config.base_seed.wrapping_add(run_id as u64);
            single_run(config, &instances[i], run_id, seed).map(|result| RunRecord { instance: i, result })
        })
        .collect::<Result<_>>()?;
    runs.sort_by_key(|r| r.result.run_id);

    let per_instance: Vec<Aggregate> = (0..config.n_instances)
        .map(|i| {
            Aggregate::from_traces(
                runs.iter()
                    .filter(|r| r.instance == i)
                    .map(|r| (r.result.steps.as_slice(), r.result.errors.as_slice(), r.result.diverged)),
            )
        })
        .collect::<Result<_>>()?;
    let aggregate = if config.n_instances == 1 {
        per_instance[0].clone()
    } else {
        let mut across = Aggregate::from_traces(
            per_instance
                .iter()
                .map(|a| (a.steps.as_slice(), a.mean.as_slice(), a.n_included == 0)),
        )?;
        across.n_diverged = per_instance.iter().map(|a| a.n_diverged).sum();
        across
    };
    Ok(ExperimentOutput {
        runs,
        instances: per_instance,
        aggregate,
    })
}

/// One run of the configured learner on a prepared instance.
pub fn single_run(config: &ExperimentConfig, instance: &Instance, run_id: usize, seed: u64) -> Result<RunResult> {
    let task = if config.is_control() {
        Task::Control {
            mdp: &instance.mdp,
            exact: &instance.exact,
        }
    } else {
        Task::Evaluation {
            mdp: &instance.mdp,
            policy: &instance.policy,
            exact: &instance.exact,
        }
    };
    let settings = config.run_settings();
    if config.adapt_gains {
        let ga = config.ga_config();
        let schedules = config.schedules();
        if config.is_control() {
            run_pid_q_with_ga(&task, &ga, &schedules, &settings, run_id, seed)
        } else {
            run_pid_td_with_ga(&task, &ga, &schedules, &settings, run_id, seed)
        }
    } else {
        run_learning(&task, &config.learner(), &settings, run_id, seed)
    }
}
