//! Normalized error metrics used to compare learners.

use crate::error::{Error, Result};
use crate::linalg::{l1_norm, l2_norm_sq};

/// `||V - V_exact||_1 / ||V_exact||_1`.
pub fn normalized_error_pe(v: &[f64], v_exact: &[f64]) -> Result<f64> {
    Error::check_len("value estimate", v_exact.len(), v.len())?;
    let denom = l1_norm(v_exact);
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().zip(v_exact).map(|(a, b)| (a - b).abs()).sum::<f64>() / denom)
}

/// `||Q - Q*||_F / ||Q*||_F`.
pub fn normalized_error_control(q: &[f64], q_exact: &[f64]) -> Result<f64> {
    Error::check_len("action-value estimate", q_exact.len(), q.len())?;
    let denom = l2_norm_sq(q_exact).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff: f64 = q.iter().zip(q_exact).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(diff.sqrt() / denom)
}
