//! Eigenvalues of the PID operator and a gain scan that predicts which
//! controllers make PID VI converge.
//!
//! ```bash
//! cargo run --example spectral_analysis
//! ```

use pidrl::analysis::{default_scan_grid, scan_gains, spectral_report};
use pidrl::environments::chain_walk;
use pidrl::{Gains, MarkovRewardProcess};

fn main() -> pidrl::Result<()> {
    let (mdp, policy) = chain_walk(0.9)?;
    let mrp = MarkovRewardProcess::new(&mdp, &policy)?;

    // with (1, 0, 0) the radius is gamma
    let vi = spectral_report(&mrp, &Gains::vi())?;
    println!("VI gains: rho = {:.6}", vi.spectral_radius);

    let scan = scan_gains(&mrp, &default_scan_grid())?;
    let fastest = scan
        .iter()
        .min_by(|a, b| a.1.spectral_radius.total_cmp(&b.1.spectral_radius))
        .expect("grid is not empty");
    println!("fastest of {} scanned gains: {} with rho = {:.4}", scan.len(), fastest.0, fastest.1.spectral_radius);

    let vi_ok = scan.iter().filter(|(_, r)| r.vi_convergent).count();
    let td_ok = scan.iter().filter(|(_, r)| r.td_convergent).count();
    println!("{vi_ok} gains stable for PID VI, {td_ok} with stable PID TD mean dynamics");
    Ok(())
}
