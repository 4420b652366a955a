//! Learning-rate search for PID TD on Garnet instances, ranked by how soon
//! the mean error drops below a target.
//!
//! ```bash
//! cargo run --release --example garnet_grid_search
//! ```

use pidrl::harness::{grid_search, EnvironmentName, ExperimentConfig, GridSpec};
use pidrl::learning::{Algorithm, LearningRateSchedule};
use pidrl::Gains;

fn main() -> pidrl::Result<()> {
    let template = ExperimentConfig {
        environment: EnvironmentName::Garnet,
        n_instances: 3,
        algorithm: Algorithm::PidTd,
        gains: Gains::new(1.0, 0.2, 0.0, 0.05, 0.95)?,
        total_steps: 20_000,
        eval_every: 1_000,
        n_runs: 4,
        ..Default::default()
    };
    // a slice of the full table keeps this quick
    let grid = GridSpec {
        lr_v: [0.1, 0.5, 1.0]
            .iter()
            .flat_map(|&epsilon| [50.0, 500.0].map(|cap| LearningRateSchedule::CountCap { epsilon, cap }))
            .collect(),
        lr_z: vec![LearningRateSchedule::Constant { epsilon: 0.1 }, LearningRateSchedule::Constant { epsilon: 0.5 }],
        ..Default::default()
    };
    let result = grid_search(&template, &grid, 0.2)?;
    for (rank, row) in result.table.iter().take(5).enumerate() {
        println!(
            "{}. lr_v {} lr_z {}: below 0.2 at {:?}, final {:.4}",
            rank + 1,
            row.config.lr_v,
            row.config.lr_z.map(|s| s.to_string()).unwrap_or_default(),
            row.steps_to_target,
            row.final_mean.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
