//! Online gain adaptation for policy evaluation on Cliff Walk, starting from
//! the TD gains.
//!
//! ```bash
//! cargo run --release --example gain_adaptation_cliff_walk
//! ```

use pidrl::harness::{run_experiment, EnvironmentName, ExperimentConfig};
use pidrl::learning::{Algorithm, LearningRateSchedule};

fn main() -> pidrl::Result<()> {
    let td = ExperimentConfig {
        environment: EnvironmentName::CliffWalk,
        gamma: Some(0.999),
        algorithm: Algorithm::Td,
        lr_v: LearningRateSchedule::Constant { epsilon: 0.02 },
        total_steps: 200_000,
        eval_every: 20_000,
        n_runs: 20,
        ..Default::default()
    };
    let ga = ExperimentConfig {
        algorithm: Algorithm::PidTd,
        adapt_gains: true,
        eta: 1e-5,
        eps_norm: 0.1,
        ..td.clone()
    };

    let base = run_experiment(&td)?;
    let adapted = run_experiment(&ga)?;
    let gains = adapted.runs[0].result.gains.as_ref().expect("adaptation records gains");
    println!("{:>8} {:>10} {:>10}   gains of run 0", "step", "TD", "TD + GA");
    for (i, g) in gains.iter().enumerate() {
        println!(
            "{:>8} {:>10.4} {:>10.4}   ({:.3}, {:.3}, {:.3})",
            base.aggregate.steps[i], base.aggregate.mean[i], adapted.aggregate.mean[i], g[0], g[1], g[2]
        );
    }
    Ok(())
}
