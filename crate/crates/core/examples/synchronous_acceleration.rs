//! Synchronous TD and PID TD with a decaying step size on a lazy cycle walk,
//! with gains picked from a spectral scan.
//!
//! ```bash
//! cargo run --release --example synchronous_acceleration
//! ```

use pidrl::analysis::{gain_grid, scan_gains};
use pidrl::learning::{run_sync_pe, LearningRateSchedule};
use pidrl::{MarkovRewardProcess, Policy, TabularMdp};

fn main() -> pidrl::Result<()> {
    let n = 10;
    let mut p = vec![0.0; n * n];
    let mut r = vec![0.0; n * n];
    for x in 0..n {
        p[x * n + x] += 0.5;
        p[x * n + (x + 1) % n] += 0.25;
        p[x * n + (x + n - 1) % n] += 0.25;
        r[x * n] = 1.0;
    }
    let mdp = TabularMdp::new(n, 1, 0.9, p, r)?;
    let policy = Policy::uniform(n, 1);
    let mrp = MarkovRewardProcess::new(&mdp, &policy)?;
    let exact = mrp.exact_value()?;

    let kp: Vec<f64> = (0..=10).map(|k| 1.0 + 0.1 * k as f64).collect();
    let scan = scan_gains(&mrp, &gain_grid(&kp, &[-0.2, 0.0, 0.4, 0.8], &[-0.1, 0.0, 0.2, 0.4], 0.05, 0.0))?;
    let (gains, report) = scan
        .iter()
        .filter(|(_, r)| r.spectral_radius <= 0.85)
        .min_by(|a, b| a.1.max_real_part.total_cmp(&b.1.max_real_part))
        .expect("some gains beat gamma");
    println!("gains {gains}: rho {:.3}, max Re {:.3}", report.spectral_radius, report.max_real_part);

    let schedule = LearningRateSchedule::Polynomial { epsilon: 25.0, offset: 200.0 };
    let runs = 50;
    let (mut td, mut pid) = (vec![0.0; 301], vec![0.0; 301]);
    for seed in 0..runs {
        let a = run_sync_pe(&mdp, &policy, &exact, None, &schedule, 300, seed)?;
        let b = run_sync_pe(&mdp, &policy, &exact, Some(gains), &schedule, 300, seed)?;
        for t in 0..=300 {
            td[t] += a[t] / runs as f64;
            pid[t] += b[t] / runs as f64;
        }
    }
    for t in (0..=300).step_by(50) {
        println!("t = {t:>3}: TD {:.4}  PID TD {:.4}", td[t], pid[t]);
    }
    Ok(())
}
