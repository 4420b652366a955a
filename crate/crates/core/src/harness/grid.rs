//! Hyperparameter grid search ranked by time to a target error.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{build_instances, run_on_instances, with_pool};
use crate::error::{Error, Result};
use crate::learning::LearningRateSchedule;
use crate::planning::Gains;

/// Values to sweep. An empty axis keeps the template's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lr_v: Vec<LearningRateSchedule>,
    pub lr_z: Vec<LearningRateSchedule>,
    pub lr_vp: Vec<LearningRateSchedule>,
    pub eta: Vec<f64>,
    pub eps_norm: Vec<f64>,
    #[serde(with = "gains_list")]
    pub gains: Vec<Gains>,
}

fn sched(epsilon: f64, caps: &[f64]) -> impl Iterator<Item = LearningRateSchedule> + '_ {
    caps.iter().map(move |&cap| {
        if cap.is_infinite() {
            LearningRateSchedule::Constant { epsilon }
        } else {
            LearningRateSchedule::CountCap { epsilon, cap }
        }
    })
}

impl GridSpec {
    /// Learning rates searched in the Garnet experiments: `(epsilon, M)` sets
    /// for the P (value), I (`z`) and D (`V'`) components.
    pub fn table3() -> Self {
        let inf = f64::INFINITY;
        let p: &[(f64, &[f64])] = &[
            (1.0, &[10.0, 50.0, 100.0, 500.0, 1000.0, 10000.0]),
            (0.75, &[10.0, 50.0, 100.0, 500.0, 1000.0]),
            (0.5, &[10.0, 50.0, 100.0, 500.0, 1000.0]),
            (0.25, &[10.0, 50.0, 100.0]),
            (0.1, &[10.0, 50.0, 100.0]),
            (0.01, &[10000.0]),
            (0.001, &[10000.0]),
            (0.0001, &[10000.0]),
        ];
        let i: &[(f64, &[f64])] = &[(1.0, &[inf, 100.0]), (0.5, &[inf]), (0.1, &[inf]), (0.0, &[inf])];
        let d: &[(f64, &[f64])] = &[
            (1.0, &[inf, 100.0]),
            (0.5, &[inf]),
            (0.25, &[inf]),
            (0.1, &[inf]),
            (0.01, &[inf]),
            (0.0, &[inf]),
        ];
        let expand = |t: &[(f64, &[f64])]| t.iter().flat_map(|&(e, caps)| sched(e, caps)).collect();
        Self {
            lr_v: expand(p),
            lr_z: expand(i),
            lr_vp: expand(d),
            ..Default::default()
        }
    }

    /// The standard Garnet learning rates plus the gain adaptation sweep used
    /// for Garnet policy evaluation.
    pub fn garnet_pe_adaptation() -> Self {
        Self {
            eta: vec![0.1, 0.01, 0.001, 0.0001],
            eps_norm: vec![0.1, 0.01],
            ..Self::table3()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lr_v.is_empty()
            && self.lr_z.is_empty()
            && self.lr_vp.is_empty()
            && self.eta.is_empty()
            && self.eps_norm.is_empty()
            && self.gains.is_empty()
    }

    /// All grid points in a fixed order. Axes that the template's algorithm
    /// does not use are dropped, so baselines do not repeat work.
    pub fn expand(&self, template: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("grid has no values to search".into()));
        }
        let pid = template.algorithm.is_pid();
        let ga = template.adapt_gains;
        fn axis<T: Clone>(values: &[T], used: bool, keep: T) -> Vec<T> {
            if used && !values.is_empty() {
                values.to_vec()
            } else {
                vec![keep]
            }
        }
        let lr_v = axis(&self.lr_v, true, template.lr_v);
        let lr_z = axis(&self.lr_z.iter().map(|&s| Some(s)).collect::<Vec<_>>(), pid, template.lr_z);
        let lr_vp = axis(&self.lr_vp.iter().map(|&s| Some(s)).collect::<Vec<_>>(), pid, template.lr_vp);
        let eta = axis(&self.eta, ga, template.eta);
        let eps = axis(&self.eps_norm, ga, template.eps_norm);
        let gains = axis(&self.gains, pid, template.gains);
        let mut out = Vec::new();
        for &v in &lr_v {
            for &z in &lr_z {
                for &vp in &lr_vp {
                    for &e in &eta {
                        for &n in &eps {
                            for &g in &gains {
                                out.push(ExperimentConfig {
                                    lr_v: v,
                                    lr_z: z,
                                    lr_vp: vp,
                                    eta: e,
                                    eps_norm: n,
                                    gains: g,
                                    ..template.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A grid search file: `{"experiment": {...}, "grid": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchConfig {
    pub experiment: ExperimentConfig,
    pub grid: GridSpec,
    /// Fill empty learning-rate axes with the standard Garnet sets.
    pub table3: bool,
    pub target_error: f64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            grid: GridSpec::default(),
            table3: false,
            target_error: 0.2,
        }
    }
}

impl GridSearchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn effective_grid(&self) -> GridSpec {
        let mut g = self.grid.clone();
        if self.table3 {
            let t = GridSpec::table3();
            for (axis, default) in [(&mut g.lr_v, t.lr_v), (&mut g.lr_z, t.lr_z), (&mut g.lr_vp, t.lr_vp)] {
                if axis.is_empty() {
                    *axis = default;
                }
            }
        }
        g
    }
}

/// Score of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// Position in expansion order.
    pub index: usize,
    pub config: ExperimentConfig,
    /// First evaluation step where the mean error reaches the target.
    pub steps_to_target: Option<u64>,
    /// `None` when every run diverged.
    pub final_mean: Option<f64>,
    pub final_stderr: Option<f64>,
    pub n_diverged: usize,
}

impl GridRow {
    /// Reaching the target sooner wins, then a lower final error, then the
    /// earlier grid point.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        let reach = |r: &Self| r.steps_to_target.unwrap_or(u64::MAX);
        let fin = |r: &Self| r.final_mean.filter(|m| m.is_finite()).unwrap_or(f64::INFINITY);
        reach(self)
            .cmp(&reach(other))
            .then(fin(self).total_cmp(&fin(other)))
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Best first.
    pub table: Vec<GridRow>,
}

impl GridResult {
    pub fn best(&self) -> &GridRow {
        &self.table[0]
    }
}

/// Evaluates every point of `grid` on the template's environment with the
/// template's `n_runs` and ranks them.
pub fn grid_search(template: &ExperimentConfig, grid: &GridSpec, target_error: f64) -> Result<GridResult> {
    template.validate()?;
    let points = grid.expand(template)?;
    for p in &points {
        p.validate()?;
    }
    with_pool(template.jobs, || {
        let instances = build_instances(template)?;
        let mut table: Vec<GridRow> = points
            .into_par_iter()
            .enumerate()
            .map(|(index, config)| {
                let out = run_on_instances(&config, &instances)?;
                let a = &out.aggregate;
                Ok(GridRow {
                    index,
                    steps_to_target: a.first_step_below(target_error),
                    final_mean: a.final_mean(),
                    final_stderr: a.stderr.last().copied(),
                    n_diverged: out.n_diverged(),
                    config,
                })
            })
            .collect::<Result<_>>()?;
        table.sort_by(GridRow::rank_cmp);
        Ok(GridResult { table })
    })
}

/// Ranked table, one row per grid point.
pub fn emit_grid_csv(result: &GridResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record([
        "rank",
        "index",
        "lr_v",
        "lr_z",
        "lr_vp",
        "eta",
        "eps_norm",
        "gains",
        "steps_to_target",
        "final_mean",
        "final_stderr",
        "n_diverged",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for (rank, row) in result.table.iter().enumerate() {
        let s = row.config.schedules();
        let ga = row.config.adapt_gains;
        let pid = row.config.algorithm.is_pid();
        w.write_record([
            rank.to_string(),
            row.index.to_string(),
            s.v.to_string(),
            opt(pid.then(|| s.z.to_string())),
            opt(pid.then(|| s.vp.to_string())),
            opt(ga.then(|| row.config.eta.to_string())),
            opt(ga.then(|| row.config.eps_norm.to_string())),
            opt(pid.then(|| row.config.gains.to_string())),
            opt(row.steps_to_target.map(|s| s.to_string())),
            opt(row.final_mean.map(|m| m.to_string())),
            opt(row.final_stderr.map(|m| m.to_string())),
            row.n_diverged.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

mod gains_list {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::planning::Gains;

    pub fn serialize<S: Serializer>(v: &[Gains], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|g| g.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Gains>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| t.parse().map_err(de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::Algorithm;

    fn template() -> ExperimentConfig {
        ExperimentConfig {
            gamma: Some(0.9),
            total_steps: 3_000,
            eval_every: 500,
            n_runs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn table3_sizes() {
        let t = GridSpec::table3();
        assert_eq!((t.lr_v.len(), t.lr_z.len(), t.lr_vp.len()), (25, 5, 7));
        assert!(t.lr_z.contains(&LearningRateSchedule::Constant { epsilon: 0.0 }));
        assert!(t.lr_vp.contains(&LearningRateSchedule::CountCap { epsilon: 1.0, cap: 100.0 }));
    }

    #[test]
    fn baseline_ignores_pid_axes() {
        let g = GridSpec::table3();
        assert_eq!(g.expand(&template()).unwrap().len(), 25);
        let pid = ExperimentConfig {
            algorithm: Algorithm::PidTd,
            ..template()
        };
        assert_eq!(g.expand(&pid).unwrap().len(), 25 * 5 * 7);
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(grid_search(&template(), &GridSpec::default(), 0.2).is_err());
    }

    #[test]
    fn single_point_is_returned() {
        let lr = LearningRateSchedule::Constant { epsilon: 0.3 };
        let g = GridSpec {
            lr_v: vec![lr],
            ..Default::default()
        };
        let r = grid_search(&template(), &g, 0.2).unwrap();
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.best().config.lr_v, lr);
    }

    #[test]
    fn dominant_point_wins() {
        // a zero step size never moves from the initial error of 1
        let good = LearningRateSchedule::Constant { epsilon: 0.5 };
        let g = GridSpec {
            lr_v: vec![LearningRateSchedule::Constant { epsilon: 0.0 }, good],
            ..Default::default()
        };
        let r = grid_search(&template(), &g, 0.2).unwrap();
        assert_eq!(r.best().config.lr_v, good);
        assert_eq!(r.table[1].final_mean, Some(1.0));
    }

    #[test]
    fn ranking_prefers_reaching_the_target() {
        let row = |index, steps, fin| GridRow {
            index,
            config: template(),
            steps_to_target: steps,
            final_mean: fin,
            final_stderr: None,
            n_diverged: 0,
        };
        let mut rows = vec![row(0, None, Some(0.01)), row(1, Some(900), Some(0.1)), row(2, Some(400), Some(0.15)), row(3, None, None)];
        rows.sort_by(GridRow::rank_cmp);
        let order: Vec<usize> = rows.iter().map(|r| r.index).collect();
        assert_eq!(order, vec![2, 1, 0, 3]);
    }
}
