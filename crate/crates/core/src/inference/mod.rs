//! Estimation and testing: Monte Carlo MLE, stochastic-approximation method
//! of moments, Monte Carlo tests and MCMC diagnostics.

mod diagnostics;
mod mcmle;
mod mctest;
mod mom;
mod normconst;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    diagnostics, effective_sample_size, is_bimodal, DiagnosticsReport, StatDiagnostics,
};
pub use mcmle::mcmc_mle;
pub use mctest::{monte_carlo_test, McTestResult};
pub use mom::mom_fit;
pub use normconst::{log_normconst_ratio, NormConstRatio};

use crate::error::{Error, Result};
use crate::network::CountNetwork;
use crate::sampler::{SampleBatch, SamplerControl};
use crate::terms::{Constraint, Model, Reference, TermKind};

/// Robbins–Monro gain a_t = a / (t + t₀)^γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomControl {
    pub a: f64,
    pub t0: f64,
    pub gamma: f64,
    /// Number of stochastic-approximation updates.
    pub steps: usize,
    /// MH steps between updates, per dyad.
    pub interval_per_dyad: f64,
}

impl Default for MomControl {
    fn default() -> Self {
        MomControl {
            a: 0.5,
            t0: 10.0,
            gamma: 0.75,
            steps: 4_000,
            interval_per_dyad: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitControl {
    /// Per-chain sampler settings for each iteration; the seed is the base
    /// from which every chain and iteration seed is derived.
    pub sampler: SamplerControl,
    pub chains: usize,
    /// Draws per chain for the final sample at the estimate.
    pub final_draws: usize,
    pub max_iterations: usize,
    /// Trust-region radius in Mahalanobis units of Cov(g).
    pub trust_radius: f64,
    /// Convergence: max_k |mean(g_k) − g_k(obs)| / sd(g_k) below this.
    pub tolerance: f64,
    /// Interior margin used when projecting onto constraints.
    pub boundary_eps: f64,
    /// Consecutive iterations pinned to a constraint before stopping.
    pub boundary_patience: usize,
    /// Abort when a statistic's sampled distribution is bimodal.
    pub degeneracy_check: bool,
    pub mom: MomControl,
}

impl Default for FitControl {
    fn default() -> Self {
        FitControl {
            sampler: SamplerControl {
                burnin: 20_000,
                interval: 500,
                draws: 500,
                pi0: 0.2,
                seed: 1,
            },
            chains: 4,
            final_draws: 2_000,
            max_iterations: 60,
            trust_radius: 2.0,
            tolerance: 0.1,
            boundary_eps: 1e-6,
            boundary_patience: 3,
            degeneracy_check: true,
            mom: MomControl::default(),
        }
    }
}

impl FitControl {
    /// Defaults with burn-in and thinning scaled to the number of dyads.
    pub fn for_network(y: &CountNetwork) -> Self {
        let d = y.num_dyads() as u64;
        let mut c = FitControl::default();
        c.sampler.burnin = 20 * d;
        c.sampler.interval = d;
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampler.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        let bad = |m: &str| Err(Error::InvalidControl(m.into()));
        if self.chains < 1 {
            return bad("chains must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.trust_radius > 0.0) {
            return bad("trust radius must be positive");
        }
        if !(self.mom.gamma > 0.5 && self.mom.gamma <= 1.0) {
            return bad("gain exponent must lie in (0.5, 1]");
        }
        if self.mom.a < 0.0 || self.mom.t0 < 0.0 {
            return bad("gain parameters must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    NotConverged,
    /// The estimate sits on the projected boundary of the parameter space;
    /// likelihood theory does not apply there.
    Boundary { constraint: String },
    /// A statistic's simulated distribution was bimodal.
    Degenerate { statistic: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub theta: Vec<f64>,
    /// max_k |mean − observed| / sd at this θ.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: String,
    pub labels: Vec<String>,
    pub theta_hat: Vec<f64>,
    /// Inverse information plus the Monte Carlo component.
    pub vcov: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    /// Monte Carlo part of the standard errors alone.
    pub mc_std_errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: FitStatus,
    pub observed: Vec<f64>,
    /// Statistics of the final sample at θ̂, chains concatenated.
    pub sample: Vec<Vec<f64>>,
    pub sample_mean: Vec<f64>,
    /// Standardized discrepancy of the final sample.
    pub discrepancy: f64,
    pub trace: Vec<IterationRecord>,
    pub diagnostics: Option<DiagnosticsReport>,
    pub seed: u64,
    /// Final network of each chain, for warm starts.
    #[serde(skip)]
    pub final_networks: Vec<CountNetwork>,
}

impl FitResult {
    /// Correlation of two estimates from `vcov`.
    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        self.vcov[a][b] / (self.vcov[a][a] * self.vcov[b][b]).sqrt()
    }

    /// Wald z statistic of term `k`.
    pub fn z(&self, k: usize) -> f64 {
        self.theta_hat[k] / self.std_errors[k]
    }

    /// Two-sided Wald test at α = 0.05.
    pub fn significant(&self, k: usize) -> bool {
        self.z(k).abs() > 1.959_963_984_540_054
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

// ---- shared numerics ----

pub(crate) fn column_means(rows: &[Vec<f64>]) -> DVector<f64> {
    let p = rows[0].len();
    let mut m = DVector::zeros(p);
    for r in rows {
        for k in 0..p {
            m[k] += r[k];
        }
    }
    m / rows.len() as f64
}

/// Sample covariance, divisor S−1.
pub(crate) fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows[0].len();
    let m = column_means(rows);
    let mut c = DMatrix::zeros(p, p);
    for r in rows {
        let d = DVector::from_iterator(p, r.iter().zip(m.iter()).map(|(a, b)| a - b));
        c += &d * d.transpose();
    }
    c / (rows.len().max(2) - 1) as f64
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix.
pub(crate) fn psd_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tol = max * 1e-10;
    let inv = eig
        .eigenvalues
        .map(|l| if l > tol { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// max_k |mean_k − obs_k| / sd_k.
pub(crate) fn standardized_discrepancy(mean: &DVector<f64>, cov: &DMatrix<f64>, obs: &[f64]) -> f64 {
    (0..obs.len())
        .map(|k| {
            let d = (mean[k] - obs[k]).abs();
            let sd = cov[(k, k)].max(0.0).sqrt();
            if sd > 0.0 {
                d / sd
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Covariance of the sample mean by batch means, pooling batches over chains.
pub(crate) fn batch_means_cov(chains: &[SampleBatch]) -> DMatrix<f64> {
    let mut batch_rows = Vec::new();
    for c in chains {
        let nb = 10.min(c.len());
        let size = c.len() / nb;
        for b in 0..nb {
            let rows = &c.stats[b * size..(b + 1) * size];
            batch_rows.push(column_means(rows).iter().copied().collect::<Vec<f64>>());
        }
    }
    let b = batch_rows.len();
    covariance(&batch_rows) / b as f64
}

/// Projects θ into the constraint set with an interior margin `eps`.
/// Returns the descriptions of constraints that had to be enforced.
pub(crate) fn project(theta: &mut [f64], constraints: &[Constraint], eps: f64) -> Vec<String> {
    let mut active = Vec::new();
    for _ in 0..50 {
        let mut moved = false;
        for c in constraints {
            let excess = c.value(theta) - (c.upper - eps);
            if excess > 0.0 {
                let norm2: f64 = c.coefficients.iter().map(|a| a * a).sum();
                for (t, a) in theta.iter_mut().zip(&c.coefficients) {
                    *t -= excess * a / norm2;
                }
                if !active.contains(&c.description) {
                    active.push(c.description.clone());
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    active
}

/// Default starting values: dyad-independent closed forms for the Sum and
/// NonzeroCount terms, 0 for everything else.
pub fn initial_theta(model: &Model, y: &CountNetwork) -> Vec<f64> {
    let kinds: Vec<&TermKind> = model.spec().terms.iter().map(|t| &t.kind).collect();
    let sum_k = kinds.iter().position(|k| matches!(k, TermKind::Sum));
    let nz_k = kinds.iter().position(|k| matches!(k, TermKind::NonzeroCount));
    let d = y.num_dyads() as f64;
    let total: f64 = y.iter().map(|(_, _, v)| v as f64).sum();
    let nonzero = y.iter_nonzero().count() as f64;
    let mean = total / d;
    let eps = 1e-3;
    let mut theta = vec![0.0; model.len()];
    match (model.reference(), sum_k, nz_k) {
        (Reference::Poisson, Some(s), Some(z)) if nonzero > 0.0 && nonzero < d => {
            // Zero-truncated Poisson mean μ/(1 − e^{−μ}) = mean of nonzero values.
            let target = total / nonzero;
            let mu = if target <= 1.0 + 1e-9 {
                1e-3
            } else {
                let (mut lo, mut hi) = (1e-9, target);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid / (1.0 - (-mid).exp()) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let p0 = 1.0 - nonzero / d;
            theta[s] = mu.ln();
            theta[z] = ((1.0 / p0 - 1.0) / mu.exp_m1()).ln();
        }
        (Reference::Poisson, Some(s), _) => theta[s] = (mean + eps).ln(),
        (Reference::Geometric, Some(s), _) => theta[s] = ((mean + eps) / (1.0 + mean + eps)).ln(),
        _ => {}
    }
    theta
}

/// Runs one round of chains at θ and returns them with their pooled rows.
pub(crate) fn run_chains(
    model: &Model,
    theta: &[f64],
    starts: &[CountNetwork],
    control: &SamplerControl,
) -> Result<Vec<SampleBatch>> {
    crate::sampler::sample_chains(model, theta, starts, control)
}

#[cfg(test)]
mod tests;
