//! Command-line front end. Exit codes: 0 success, 1 configuration error,
//! 2 every run diverged, 3 I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pidrl::analysis::{
    d_determinism, default_scan_grid, noise_bound_pid, noise_bound_scalar_with_range, noise_bound_td,
    scan_gains, spectral_report,
};
use pidrl::environments::{garnet, GarnetSpec};
use pidrl::harness::{
    emit_grid_csv, emit_plan_csv, write_plan_csv, grid_search, run_experiment, write_experiment, EnvironmentName,
    ExperimentConfig, GridSearchConfig, Problem,
};
use pidrl::learning::{Algorithm, LearningRateSchedule, SamplingMode};
use pidrl::linalg::sup_norm;
use pidrl::planning::{run_pid_vi_control, run_pid_vi_pe, PlanConfig, PlanStatus};
use pidrl::{Error, Gains, MarkovRewardProcess, PeState, QState};

#[derive(Parser)]
#[command(name = "pidrl", version, about = "PID accelerated TD learning and Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PID value iteration with the model.
    Plan(PlanArgs),
    /// Policy evaluation runs (td, pid-td).
    Evaluate(RunArgs),
    /// Control runs (q, pid-q).
    Control(RunArgs),
    /// Spectral report, d-determinism and noise bounds as JSON.
    Analyze(AnalyzeArgs),
    /// Write a random Garnet MDP as JSON.
    GarnetGen(GarnetArgs),
    /// Run the experiment described by a config file.
    Experiment {
        #[arg(value_name = "CONFIG")]
        config_file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Search the grid in a config file.
    GridSearch {
        config: PathBuf,
        #[arg(long, default_value = "grid-out")]
        out_dir: PathBuf,
        #[arg(long, env = "PIDRL_JOBS")]
        jobs: Option<usize>,
    },
}

#[derive(Args, Default)]
struct EnvArgs {
    /// chain-walk, cliff-walk, garnet or file.
    #[arg(long = "env")]
    environment: Option<EnvironmentName>,
    #[arg(long)]
    gamma: Option<f64>,
    /// JSON MDP; implies `--env file`.
    #[arg(long)]
    mdp_file: Option<PathBuf>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    n_actions: Option<usize>,
    #[arg(long)]
    branching: Option<usize>,
    #[arg(long)]
    reward_states: Option<usize>,
    #[arg(long)]
    garnet_seed: Option<u64>,
    #[arg(long)]
    n_instances: Option<usize>,
}

impl EnvArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(v) = self.environment {
            c.environment = v;
        }
        if self.gamma.is_some() {
            c.gamma = self.gamma;
        }
        if let Some(p) = &self.mdp_file {
            c.mdp_file = Some(p.clone());
            if self.environment.is_none() {
                c.environment = EnvironmentName::File;
            }
        }
        set(&mut c.n_states, self.n_states);
        set(&mut c.n_actions, self.n_actions);
        set(&mut c.branching, self.branching);
        set(&mut c.reward_states, self.reward_states);
        set(&mut c.garnet_seed, self.garnet_seed);
        set(&mut c.n_instances, self.n_instances);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args, Default)]
struct RunArgs {
    /// Base config; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    problem: Option<Problem>,
    #[arg(long)]
    algo: Option<Algorithm>,
    /// kp,ki,kd,alpha,beta
    #[arg(long)]
    gains: Option<Gains>,
    /// eps, "eps,M" or "poly:eps,T"
    #[arg(long)]
    lr_v: Option<LearningRateSchedule>,
    #[arg(long)]
    lr_z: Option<LearningRateSchedule>,
    #[arg(long)]
    lr_vp: Option<LearningRateSchedule>,
    #[arg(long)]
    adapt_gains: bool,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eps_norm: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run `r` uses `seed + r`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sampling: Option<SamplingMode>,
    #[arg(long)]
    exploration: Option<f64>,
    #[arg(long)]
    blow_up: Option<f64>,
    #[arg(long, env = "PIDRL_JOBS")]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Also write summary.svg.
    #[arg(long)]
    svg: bool,
}

impl RunArgs {
    fn config(&self, problem: Option<Problem>) -> pidrl::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        self.env.apply(&mut c);
        if let Some(p) = problem.or(self.problem) {
            c.problem = p;
            // evaluate/control without --algo pick the matching baseline
            if self.algo.is_none() && c.algorithm.is_control() != (p == Problem::Control) {
                c.algorithm = if p == Problem::Control { Algorithm::Q } else { Algorithm::Td };
            }
        }
        set(&mut c.algorithm, self.algo);
        set(&mut c.gains, self.gains);
        set(&mut c.lr_v, self.lr_v);
        if self.lr_z.is_some() {
            c.lr_z = self.lr_z;
        }
        if self.lr_vp.is_some() {
            c.lr_vp = self.lr_vp;
        }
        c.adapt_gains |= self.adapt_gains;
        set(&mut c.eta, self.eta);
        set(&mut c.lambda, self.lambda);
        set(&mut c.eps_norm, self.eps_norm);
        set(&mut c.total_steps, self.steps);
        set(&mut c.eval_every, self.eval_every);
        set(&mut c.n_runs, self.runs);
        set(&mut c.base_seed, self.seed);
        if self.sampling.is_some() {
            c.sampling = self.sampling;
        }
        set(&mut c.exploration, self.exploration);
        set(&mut c.blow_up, self.blow_up);
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value = "pe")]
    problem: Problem,
    #[arg(long, default_value = "1,0,0,0.05,0.95")]
    gains: Gains,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    adapt_gains: bool,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long, default_value = "1,0,0,0.05,0.95")]
    gains: Gains,
    /// Also rank a built-in grid of gains by spectral radius.
    #[arg(long)]
    scan_gains: bool,
    /// Rows of the scan to print.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct GarnetArgs {
    #[arg(long, default_value_t = 50)]
    n_states: usize,
    #[arg(long, default_value_t = 3)]
    n_actions: usize,
    #[arg(long, default_value_t = 5)]
    branching: usize,
    #[arg(long, default_value_t = 10)]
    reward_states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a command that ran without error.
enum Outcome {
    Done,
    Diverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged) => {
            eprintln!("every run diverged");
            ExitCode::from(2)
        }
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// A reader such as `head` closed stdout early.
fn is_broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io { source, .. } => Some(source),
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        },
        _ => None,
    };
    io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn print_line(text: &str) -> pidrl::Result<()> {
    writeln!(std::io::stdout().lock(), "{text}").map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        _ => 1,
    }
}

fn dispatch(command: Command) -> pidrl::Result<Outcome> {
    match command {
        Command::Plan(a) => plan(&a),
        Command::Evaluate(a) => experiment(&a.config(Some(Problem::Pe))?, &a.out_dir, a.svg),
        Command::Control(a) => experiment(&a.config(Some(Problem::Control))?, &a.out_dir, a.svg),
        Command::Experiment { config_file, mut run } => {
            run.config = Some(config_file);
            experiment(&run.config(None)?, &run.out_dir, run.svg)
        }
        Command::Analyze(a) => analyze(&a),
        Command::GarnetGen(a) => garnet_gen(&a),
        Command::GridSearch { config, out_dir, jobs } => {
            let mut g = GridSearchConfig::load(&config)?;
            if jobs.is_some() {
                g.experiment.jobs = jobs;
            }
            let result = grid_search(&g.experiment, &g.effective_grid(), g.target_error)?;
            emit_grid_csv(&result, &out_dir.join("grid.csv"))?;
            let best = result.best();
            write_text(&out_dir.join("best.json"), &best.config.to_json()?)?;
            print_line(&format!(
                "best of {} points: index {} steps_to_target {:?} final_mean {:?}",
                result.table.len(),
                best.index,
                best.steps_to_target,
                best.final_mean
            ))?;
            Ok(if result.table.iter().all(|r| r.final_mean.is_none()) {
                Outcome::Diverged
            } else {
                Outcome::Done
            })
        }
    }
}

fn write_text(path: &Path, text: &str) -> pidrl::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn experiment(config: &ExperimentConfig, out_dir: &Path, svg: bool) -> pidrl::Result<Outcome> {
    let out = run_experiment(config)?;
    write_experiment(&out, out_dir, svg)?;
    write_text(&out_dir.join("config.json"), &config.to_json()?)?;
    let a = &out.aggregate;
    print_line(&format!(
        "{} runs, {} diverged; final mean error {}",
        out.runs.len(),
        out.n_diverged(),
        a.final_mean().map_or("n/a".into(), |m| format!("{m:.6}"))
    ))?;
    Ok(if out.all_diverged() { Outcome::Diverged } else { Outcome::Done })
}

fn env_config(env: &EnvArgs, problem: Problem) -> pidrl::Result<ExperimentConfig> {
    let mut c = ExperimentConfig {
        problem,
        algorithm: if problem == Problem::Control { Algorithm::Q } else { Algorithm::Td },
        ..Default::default()
    };
    env.apply(&mut c);
    if c.n_instances != 1 {
        return Err(Error::InvalidConfig("this command works on a single instance".into()));
    }
    c.validate()?;
    Ok(c)
}

fn plan(a: &PlanArgs) -> pidrl::Result<Outcome> {
    let c = env_config(&a.env, a.problem)?;
    let inst = c.build_instance(0)?;
    let config = PlanConfig {
        max_iters: a.iters,
        tol: a.tol,
        adapt_eta: a.adapt_gains.then_some(a.eta),
        ..Default::default()
    };
    let (status, trace) = match a.problem {
        Problem::Pe => {
            let mrp = MarkovRewardProcess::new(&inst.mdp, &inst.policy)?;
            let run = run_pid_vi_pe(&mrp, a.gains, PeState::zeros(mrp.n_states()), &config, Some(&inst.exact))?;
            (run.status, run.trace)
        }
        Problem::Control => {
            let init = QState::zeros(inst.mdp.n_states(), inst.mdp.n_actions());
            let run = run_pid_vi_control(&inst.mdp, a.gains, init, &config, Some(&inst.exact))?;
            (run.status, run.trace)
        }
    };
    match &a.out {
        Some(p) => emit_plan_csv(&trace, p)?,
        None => write_plan_csv(&trace, std::io::stdout().lock())?,
    }
    eprintln!("{status:?} after {} iterations", trace.len() - 1);
    Ok(if status == PlanStatus::Diverged { Outcome::Diverged } else { Outcome::Done })
}

fn analyze(a: &AnalyzeArgs) -> pidrl::Result<Outcome> {
    let c = env_config(&a.env, Problem::Pe)?;
    let inst = c.build_instance(0)?;
    let mrp = MarkovRewardProcess::new(&inst.mdp, &inst.policy)?;
    let report = spectral_report(&mrp, &a.gains)?;
    let det = d_determinism(&inst.mdp, &inst.policy)?;
    let gamma = inst.mdp.gamma();
    let v_inf = sup_norm(&inst.exact);
    let (lo, hi) = inst.mdp.reward_range();
    let range = hi - lo;
    let n = inst.mdp.n_states();
    let mut doc = json!({
        "gains": a.gains.to_string(),
        "gamma": gamma,
        "spectral": report,
        "determinism": det,
        "value_sup_norm": v_inf,
        "noise_bound_scalar": noise_bound_scalar_with_range(det.d, gamma, v_inf, range).ok(),
    });
    // the vector bounds assume rewards in [0, 1]
    if lo >= 0.0 && hi <= 1.0 {
        doc["noise_bound_td"] = json!(noise_bound_td(det.d, n, gamma, v_inf).ok());
        doc["noise_bound_pid"] = json!(noise_bound_pid(det.d, n, gamma, &a.gains, v_inf).ok());
    }
    if a.scan_gains {
        let mut scan = scan_gains(&mrp, &default_scan_grid())?;
        scan.sort_by(|x, y| x.1.spectral_radius.total_cmp(&y.1.spectral_radius));
        doc["scan"] = scan
            .iter()
            .take(a.top)
            .map(|(g, r)| {
                json!({
                    "gains": g.to_string(),
                    "spectral_radius": r.spectral_radius,
                    "max_real_part": r.max_real_part,
                    "vi_convergent": r.vi_convergent,
                    "td_convergent": r.td_convergent,
                })
            })
            .collect();
    }
    print_line(&serde_json::to_string_pretty(&doc)?)?;
    Ok(Outcome::Done)
}

fn garnet_gen(a: &GarnetArgs) -> pidrl::Result<Outcome> {
    let spec = GarnetSpec {
        n_states: a.n_states,
        n_actions: a.n_actions,
        branching: a.branching,
        n_reward_states: a.reward_states,
        seed: a.seed,
        gamma: a.gamma,
    };
    let (mdp, _) = garnet(&spec)?;
    let text = mdp.to_json()?;
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => print_line(&text)?,
    }
    Ok(Outcome::Done)
}
