//! Determinism coefficient and the resulting noise and error-ratio bounds
//! for Chain Walk and a Garnet instance.
//!
//! ```bash
//! cargo run --example noise_bounds
//! ```

use pidrl::analysis::{d_determinism, noise_bound_pid, noise_bound_td, prop1_ratio_pid, prop1_ratio_td};
use pidrl::environments::{chain_walk, garnet, GarnetSpec};
use pidrl::linalg::sup_norm;
use pidrl::Gains;

fn main() -> pidrl::Result<()> {
    let gains = Gains::new(1.2, 0.2, 0.1, 0.05, 0.95)?;
    let envs = [("chain walk", chain_walk(0.9)?), ("garnet", garnet(&GarnetSpec::default())?)];
    for (name, (mdp, policy)) in envs {
        let report = d_determinism(&mdp, &policy)?;
        let v = mdp.exact_value_pe(&policy)?;
        let (n, gamma, vinf) = (mdp.n_states(), mdp.gamma(), sup_norm(&v));
        println!("{name}: d = {:.4}, ||V|| = {vinf:.3}", report.d);
        println!("  TD noise bound  {:.4}", noise_bound_td(report.d, n, gamma, vinf)?);
        println!("  PID noise bound {:.4}", noise_bound_pid(report.d, n, gamma, &gains, vinf)?);
        println!("  ratio at V0 = 0: TD {:.4}, PID {:.4}", prop1_ratio_td(vinf, vinf, n, gamma, report.d)?, prop1_ratio_pid(vinf, vinf, n, gamma, report.d, &gains)?);
    }
    Ok(())
}
