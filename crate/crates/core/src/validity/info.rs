//! Base-2 information measures over discrete distributions.

use crate::error::{Error, Result};

/// Absolute slack accepted on `Σ p = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Argument("empty probability vector".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Argument(format!("invalid probability {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Argument(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

fn check_pair(p_est: &[f64], p_true: &[f64]) -> Result<()> {
    if p_est.len() != p_true.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            p_est.len(),
            p_true.len()
        )));
    }
    Ok(())
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

/// `-Σ p_est log2 p_true`; infinite when `p_true` is zero where `p_est` is not.
pub fn cross_entropy(p_est: &[f64], p_true: &[f64]) -> Result<f64> {
    check_pair(p_est, p_true)?;
    let mut total = 0.0;
    for (&e, &t) in p_est.iter().zip(p_true) {
        if e > 0.0 {
            if t <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total -= e * t.log2();
        }
    }
    Ok(total)
}

/// `KL(p_est ‖ p_true)` in bits; zero-mass terms of `p_est` contribute nothing.
pub fn kl_divergence(p_est: &[f64], p_true: &[f64]) -> Result<f64> {
    check_pair(p_est, p_true)?;
    let mut total = 0.0;
    for (&e, &t) in p_est.iter().zip(p_true) {
        if e > 0.0 {
            if t <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += e * (e / t).log2();
        }
    }
    // Rounding can leave a tiny negative on identical inputs.
    Ok(total.max(0.0))
}

/// `entropy / log2(len)`; undefined for a single outcome.
pub fn normalized_entropy(p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::Unsupported(
            "normalized entropy needs at least two outcomes".into(),
        ));
    }
    Ok((entropy(p) / (p.len() as f64).log2()).clamp(0.0, 1.0))
}
