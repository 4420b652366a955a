//! Stochastic PID TD on Chain Walk against TD(0), with fixed and with
//! adapted gains, averaged over seeded runs.
//!
//! ```bash
//! cargo run --release --example pid_td_chain_walk
//! ```

use pidrl::harness::{run_experiment, EnvironmentName, ExperimentConfig};
use pidrl::learning::{Algorithm, LearningRateSchedule};
use pidrl::Gains;

fn main() -> pidrl::Result<()> {
    let base = ExperimentConfig {
        environment: EnvironmentName::ChainWalk,
        gamma: Some(0.99),
        algorithm: Algorithm::Td,
        lr_v: LearningRateSchedule::CountCap { epsilon: 0.5, cap: 100.0 },
        total_steps: 200_000,
        eval_every: 20_000,
        n_runs: 20,
        ..Default::default()
    };
    let pid = ExperimentConfig {
        algorithm: Algorithm::PidTd,
        gains: Gains::new(1.2, 0.0, 0.1, 0.05, 0.95)?,
        ..base.clone()
    };
    let adapted = ExperimentConfig {
        gains: Gains::new(1.0, 0.0, 0.0, 0.05, 0.95)?,
        adapt_gains: true,
        eta: 1e-5,
        eps_norm: 0.1,
        ..pid.clone()
    };

    let td = run_experiment(&base)?.aggregate;
    let pid = run_experiment(&pid)?.aggregate;
    let ga = run_experiment(&adapted)?.aggregate;
    println!("{:>8} {:>16} {:>16} {:>16}", "step", "TD", "PID TD", "PID TD + GA");
    for i in 0..td.steps.len() {
        println!(
            "{:>8} {:>9.4} ±{:.4} {:>9.4} ±{:.4} {:>9.4} ±{:.4}",
            td.steps[i], td.mean[i], td.stderr[i], pid.mean[i], pid.stderr[i], ga.mean[i], ga.stderr[i]
        );
    }
    Ok(())
}
