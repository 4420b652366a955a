//! Loads an experiment from JSON, runs it, and writes the CSV and SVG
//! outputs that `pidrl experiment` produces.
//!
//! ```bash
//! cargo run --release --example experiment_config -- [out-dir]
//! ```

use std::path::PathBuf;

use pidrl::harness::{run_experiment, write_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "environment": "garnet",
  "n_instances": 2,
  "algorithm": "pid-td",
  "gains": "1.0,0.0,0.0,0.05,0.95",
  "lr_v": "0.5,100",
  "adapt_gains": true,
  "eta": 0.001,
  "eps_norm": 0.1,
  "total_steps": 20000,
  "eval_every": 2000,
  "n_runs": 8,
  "base_seed": 1
}"#;

fn main() -> pidrl::Result<()> {
    let config = ExperimentConfig::from_json(CONFIG)?;
    let out = run_experiment(&config)?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pidrl-example"));
    std::fs::create_dir_all(&dir).map_err(|e| pidrl::Error::Io { path: dir.clone(), source: e })?;
    write_experiment(&out, &dir, true)?;
    println!("{} runs, {} diverged, final mean {:.4}", out.runs.len(), out.n_diverged(), out.aggregate.final_mean().unwrap_or(f64::NAN));
    println!("wrote {}", dir.display());
    Ok(())
}
