use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SampleBatch;
use crate::special::{log_mean_exp, log_sum_exp};
use crate::terms::dot;

/// Importance-sampling estimate of log κ(θ')/κ(θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstRatio {
    pub log_ratio: f64,
    /// Kish effective sample size of the importance weights.
    pub ess: f64,
    /// False when ESS < 5: too few draws carry the estimate.
    pub reliable: bool,
}

/// log mean_s exp((θ' − θ)·g(Y⁽ˢ⁾)) for a sample drawn at θ.
pub fn log_normconst_ratio(
    sample: &SampleBatch,
    theta: &[f64],
    theta_prime: &[f64],
) -> Result<NormConstRatio> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = sample.labels.len();
    if theta.len() != p || theta_prime.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: if theta.len() != p { theta.len() } else { theta_prime.len() },
        });
    }
    let delta: Vec<f64> = theta_prime.iter().zip(theta).map(|(a, b)| a - b).collect();
    if delta.iter().all(|d| *d == 0.0) {
        return Ok(NormConstRatio {
            log_ratio: 0.0,
            ess: sample.len() as f64,
            reliable: true,
        });
    }
    let lw: Vec<f64> = sample.stats.iter().map(|g| dot(&delta, g)).collect();
    let doubled: Vec<f64> = lw.iter().map(|w| 2.0 * w).collect();
    let ess = (2.0 * log_sum_exp(&lw) - log_sum_exp(&doubled)).exp();
    Ok(NormConstRatio {
        log_ratio: log_mean_exp(&lw),
        ess,
        reliable: ess >= 5.0,
    })
}
