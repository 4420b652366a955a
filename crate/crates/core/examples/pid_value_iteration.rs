//! PID value iteration against plain VI on Chain Walk.
//!
//! ```bash
//! cargo run --example pid_value_iteration
//! ```

use pidrl::environments::chain_walk;
use pidrl::planning::{run_pid_vi_pe, PlanConfig};
use pidrl::{Gains, MarkovRewardProcess, PeState};

fn main() -> pidrl::Result<()> {
    let (mdp, policy) = chain_walk(0.99)?;
    let mrp = MarkovRewardProcess::new(&mdp, &policy)?;
    let exact = mrp.exact_value()?;
    let config = PlanConfig {
        max_iters: 2_000,
        tol: 1e-8,
        ..Default::default()
    };

    for (name, gains) in [
        ("VI", Gains::vi()),
        ("PID", Gains::new(1.2, 0.0, 0.2, 0.05, 0.95)?),
        ("PID + adaptation", Gains::new(1.0, 0.0, 0.0, 0.05, 0.95)?),
    ] {
        let config = PlanConfig {
            adapt_eta: (name == "PID + adaptation").then_some(0.05),
            ..config.clone()
        };
        let run = run_pid_vi_pe(&mrp, gains, PeState::zeros(mrp.n_states()), &config, Some(&exact))?;
        let last = run.trace.last().expect("trace is never empty");
        println!(
            "{name:>17}: {:?} after {} iterations, error {:.2e}, final gains {}",
            run.status,
            last.iter,
            last.error.unwrap_or(f64::NAN),
            run.gains
        );
    }
    Ok(())
}
