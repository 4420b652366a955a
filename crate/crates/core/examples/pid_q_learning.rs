//! PID Q-learning with gain adaptation on Chain Walk control, driven
//! directly through the learning API instead of the harness.
//!
//! ```bash
//! cargo run --release --example pid_q_learning
//! ```

use pidrl::environments::chain_walk;
use pidrl::gain_adaptation::{run_pid_q_with_ga, GainAdaptationConfig};
use pidrl::learning::{run_learning, Algorithm, LearnerConfig, LearningRateSchedule, RunSettings, SamplingMode, ScheduleTriple, Task};
use pidrl::{mdp, Gains};

fn main() -> pidrl::Result<()> {
    let (chain, _) = chain_walk(0.99)?;
    let exact = chain.exact_value_control(1e-10)?;
    let task = Task::Control { mdp: &chain, exact: &exact };
    let schedules = ScheduleTriple::shared(LearningRateSchedule::Constant { epsilon: 0.1 });
    let settings = RunSettings {
        sampling: SamplingMode::IidStateAction,
        total_steps: 300_000,
        eval_every: 50_000,
        ..Default::default()
    };

    let q = run_learning(
        &task,
        &LearnerConfig { algorithm: Algorithm::Q, gains: Gains::vi(), schedules },
        &settings,
        0,
        7,
    )?;
    let ga = GainAdaptationConfig { eta: 1e-6, eps_norm: 1e-4, ..Default::default() };
    let pid = run_pid_q_with_ga(&task, &ga, &schedules, &settings, 0, 7)?;

    for (i, step) in q.steps.iter().enumerate() {
        println!("{step:>7}  Q-learning {:.4}  PID Q + GA {:.4}", q.errors[i], pid.errors[i]);
    }
    let greedy: Vec<usize> = pid.final_values.chunks(chain.n_actions()).map(mdp::greedy_action).collect();
    println!("greedy actions: {greedy:?}");
    Ok(())
}
