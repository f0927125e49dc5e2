use nalgebra::{DMatrix, DVector};

use super::{
    batch_means_cov, column_means, covariance, diagnostics, initial_theta, is_bimodal, project,
    psd_pinv, run_chains, standardized_discrepancy, FitControl, FitResult, FitStatus,
    IterationRecord,
};
use crate::error::{Error, Result};
use crate::network::CountNetwork;
use crate::sampler::{chain_seed, SampleBatch, SamplerControl};
use crate::terms::Model;

/// Maximizer of the sample approximation
/// ℓ(θ_t + δ) − ℓ(θ_t) = −log mean_s exp(δ·(g_s − g_obs))
/// within the Mahalanobis ball ‖δ‖_C ≤ radius.
pub(crate) fn newton_step(rows: &[Vec<f64>], obs: &[f64], cov: &DMatrix<f64>, radius: f64) -> DVector<f64> {
    let p = obs.len();
    let d: Vec<DVector<f64>> = rows
        .iter()
        .map(|r| DVector::from_iterator(p, r.iter().zip(obs).map(|(a, b)| a - b)))
        .collect();
    let norm = |v: &DVector<f64>| (v.transpose() * cov * v)[(0, 0)].max(0.0).sqrt();
    let mut delta = DVector::zeros(p);
    for _ in 0..30 {
        let lw: Vec<f64> = d.iter().map(|ds| delta.dot(ds)).collect();
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
        let wsum: f64 = w.iter().sum();
        let mut mu = DVector::zeros(p);
        for (ws, ds) in w.iter().zip(&d) {
            mu += ds * (*ws / wsum);
        }
        let mut cw = DMatrix::zeros(p, p);
        for (ws, ds) in w.iter().zip(&d) {
            let c = ds - &mu;
            cw += &c * c.transpose() * (*ws / wsum);
        }
        let step = -(psd_pinv(&cw) * &mu);
        let cand = &delta + &step;
        if norm(&cand) > radius {
            // Largest t with ‖δ + t·step‖_C = radius.
            let a = (step.transpose() * cov * &step)[(0, 0)];
            let b = 2.0 * (delta.transpose() * cov * &step)[(0, 0)];
            let c = (delta.transpose() * cov * &delta)[(0, 0)] - radius * radius;
            let t = if a > 0.0 {
                ((-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            delta += step * t;
            break;
        }
        delta = cand;
        if norm(&step) < 1e-8 {
            break;
        }
    }
    delta
}

/// Pooled rows, mean and covariance of a sample.
type Moments = (Vec<Vec<f64>>, DVector<f64>, DMatrix<f64>);

fn moments(chains: &[SampleBatch]) -> Result<Moments> {
    let rows: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.stats.iter().cloned()).collect();
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let m = column_means(&rows);
    let c = covariance(&rows);
    Ok((rows, m, c))
}

/// Assembles a result. Covariances come from `variance_chains`, the sample
/// that determined θ̂; the reported sample, moment check and diagnostics come
/// from `chains`, drawn at θ̂.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    method: &str,
    model: &Model,
    theta: Vec<f64>,
    obs: Vec<f64>,
    variance_chains: &[SampleBatch],
    chains: Vec<SampleBatch>,
    status: FitStatus,
    iterations: usize,
    trace: Vec<IterationRecord>,
    seed: u64,
) -> Result<FitResult> {
    let (_, _, info) = moments(variance_chains)?;
    let inv = psd_pinv(&info);
    let mc = &inv * batch_means_cov(variance_chains) * &inv;
    let (rows, mean, cov) = moments(&chains)?;
    let vcov = &inv + &mc;
    let p = theta.len();
    let to_rows = |m: &DMatrix<f64>| (0..p).map(|i| (0..p).map(|j| m[(i, j)]).collect()).collect();
    let diag = diagnostics(&chains, &obs);
    Ok(FitResult {
        method: method.into(),
        labels: model.labels().to_vec(),
        std_errors: (0..p).map(|k| vcov[(k, k)].max(0.0).sqrt()).collect(),
        mc_std_errors: (0..p).map(|k| mc[(k, k)].max(0.0).sqrt()).collect(),
        vcov: to_rows(&vcov),
        theta_hat: theta,
        iterations,
        converged: status == FitStatus::Converged,
        discrepancy: standardized_discrepancy(&mean, &cov, &obs),
        status,
        sample_mean: mean.iter().copied().collect(),
        sample: rows,
        observed: obs,
        trace,
        diagnostics: Some(diag),
        seed,
        final_networks: chains.into_iter().map(|c| c.final_network).collect(),
    })
}

pub(crate) fn degenerate_statistic(model: &Model, chains: &[SampleBatch]) -> Option<String> {
    (0..model.len()).find_map(|k| {
        let col: Vec<f64> = chains.iter().flat_map(|c| c.column(k)).collect();
        is_bimodal(&col).then(|| model.labels()[k].clone())
    })
}

/// Monte Carlo maximum likelihood.
///
/// Each iteration samples at θ_t (chains continue from the previous
/// iteration's final networks), stops if the simulated mean is within
/// `tolerance` standard deviations of the observed statistics, and otherwise
/// maximizes the sample-approximated log-likelihood ratio inside the trust
/// region. After convergence one further Newton step is taken and a fresh
/// sample at θ̂ supplies the covariance estimates.
pub fn mcmc_mle(
    model: &Model,
    y_obs: &CountNetwork,
    theta0: Option<&[f64]>,
    control: &FitControl,
) -> Result<FitResult> {
    control.validate()?;
    let obs = model.eval(y_obs)?.values;
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidControl("observed statistics are not finite".into()));
    }
    let mut theta = match theta0 {
        Some(t) => {
            model.check_dimension(t)?;
            t.to_vec()
        }
        None => initial_theta(model, y_obs),
    };
    let constraints = model.theta_constraints();
    project(&mut theta, &constraints, control.boundary_eps);

    let base = control.sampler.seed;
    let mut starts = vec![y_obs.clone(); control.chains];
    let mut trace = Vec::new();
    let mut status = FitStatus::NotConverged;
    let mut pinned = 0;
    let mut iterations = 0;
    let mut last_chains = Vec::new();

    for it in 0..control.max_iterations {
        iterations = it + 1;
        let ctl = SamplerControl {
            burnin: if it == 0 {
                control.sampler.burnin
            } else {
                control.sampler.burnin / 4
            },
            seed: chain_seed(base, it),
            ..control.sampler
        };
        let chains = run_chains(model, &theta, &starts, &ctl)?;
        starts = chains.iter().map(|c| c.final_network.clone()).collect();
        let (rows, mean, cov) = moments(&chains)?;
        let disc = standardized_discrepancy(&mean, &cov, &obs);
        trace.push(IterationRecord {
            theta: theta.clone(),
            discrepancy: disc,
        });
        if control.degeneracy_check {
            if let Some(statistic) = degenerate_statistic(model, &chains) {
                status = FitStatus::Degenerate { statistic };
                last_chains = chains;
                break;
            }
        }
        if disc < control.tolerance {
            status = FitStatus::Converged;
            break;
        }
        let delta = newton_step(&rows, &obs, &cov, control.trust_radius);
        let mut next: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
        let active = project(&mut next, &constraints, control.boundary_eps);
        if active.is_empty() {
            pinned = 0;
        } else {
            pinned += 1;
            if pinned >= control.boundary_patience {
                status = FitStatus::Boundary {
                    constraint: active[0].clone(),
                };
                theta = next;
                break;
            }
        }
        theta = next;
    }

    if matches!(status, FitStatus::Degenerate { .. }) {
        return finish(
            "mcmle", model, theta, obs, &last_chains.clone(), last_chains, status, iterations,
            trace, base,
        );
    }
    // A large sample at the last iterate determines θ̂ (one more Newton step
    // when converged) and its Monte Carlo error.
    let final_ctl = |k: usize| SamplerControl {
        burnin: control.sampler.burnin / 4,
        draws: control.final_draws,
        seed: chain_seed(base, (usize::MAX >> 1) - k),
        ..control.sampler
    };
    let big = run_chains(model, &theta, &starts, &final_ctl(0))?;
    if status == FitStatus::Converged {
        let (rows, _, cov) = moments(&big)?;
        let delta = newton_step(&rows, &obs, &cov, control.trust_radius);
        theta.iter_mut().zip(delta.iter()).for_each(|(t, d)| *t += d);
        let active = project(&mut theta, &constraints, control.boundary_eps);
        if !active.is_empty() {
            status = FitStatus::Boundary {
                constraint: active[0].clone(),
            };
        }
        let starts: Vec<CountNetwork> = big.iter().map(|c| c.final_network.clone()).collect();
        let post = run_chains(model, &theta, &starts, &final_ctl(1))?;
        finish("mcmle", model, theta, obs, &big, post, status, iterations, trace, base)
    } else {
        finish("mcmle", model, theta, obs, &big.clone(), big, status, iterations, trace, base)
    }
}
