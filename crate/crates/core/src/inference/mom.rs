use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mcmle::finish;
use super::{
    column_means, covariance, initial_theta, project, run_chains, standardized_discrepancy,
    FitControl, FitResult, FitStatus, IterationRecord,
};
use crate::error::{Error, Result};
use crate::network::CountNetwork;
use crate::sampler::{chain_seed, Chain, SamplerControl};
use crate::terms::Model;

/// Method of moments by Robbins–Monro stochastic approximation:
/// θ ← θ − a_t D⁻¹ (g(Y_t) − g(y_obs)), a_t = a/(t + t₀)^γ, with D the
/// diagonal of Cov(g) from a pilot sample at θ₀. The estimate is the average
/// of the second half of the iterates, checked against the same moment
/// tolerance as [`super::mcmc_mle`] on a fresh sample.
pub fn mom_fit(
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
    let p = theta.len();
    let mc = control.mom;

    let pilot_ctl = SamplerControl {
        seed: chain_seed(base, 0),
        ..control.sampler
    };
    let pilot = run_chains(model, &theta, &vec![y_obs.clone(); control.chains], &pilot_ctl)?;
    let starts: Vec<CountNetwork> = pilot.iter().map(|c| c.final_network.clone()).collect();

    let mut trace = Vec::new();
    let estimate = if mc.a == 0.0 || mc.steps == 0 {
        theta.clone()
    } else {
        let rows: Vec<Vec<f64>> = pilot.iter().flat_map(|c| c.stats.iter().cloned()).collect();
        let var = covariance(&rows);
        let scale: Vec<f64> = (0..p)
            .map(|k| {
                let v = var[(k, k)];
                if v > 0.0 {
                    v
                } else {
                    1.0
                }
            })
            .collect();
        let interval = ((mc.interval_per_dyad * y_obs.num_dyads() as f64).ceil() as u64).max(1);
        let mut chain = Chain::new(model, &theta, starts[0].clone(), control.sampler.pi0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(base, 1));
        let mut sum = vec![0.0; p];
        let mut averaged = 0usize;
        for t in 0..mc.steps {
            for _ in 0..interval {
                chain.step(&mut rng);
            }
            let g = chain.stats();
            let gain = mc.a / (t as f64 + mc.t0).powf(mc.gamma);
            for k in 0..p {
                theta[k] -= gain * (g[k] - obs[k]) / scale[k];
            }
            project(&mut theta, &constraints, control.boundary_eps);
            chain.set_theta(&theta)?;
            if t >= mc.steps / 2 {
                for k in 0..p {
                    sum[k] += theta[k];
                }
                averaged += 1;
            }
            if (t + 1) % (mc.steps / 20).max(1) == 0 {
                trace.push(IterationRecord {
                    theta: theta.clone(),
                    discrepancy: f64::NAN,
                });
            }
        }
        let mut avg: Vec<f64> = sum.iter().map(|s| s / averaged as f64).collect();
        project(&mut avg, &constraints, control.boundary_eps);
        avg
    };

    let ctl = SamplerControl {
        burnin: control.sampler.burnin / 4,
        draws: control.final_draws,
        seed: chain_seed(base, 2),
        ..control.sampler
    };
    let chains = run_chains(model, &estimate, &starts, &ctl)?;
    let rows: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.stats.iter().cloned()).collect();
    let disc = standardized_discrepancy(&column_means(&rows), &covariance(&rows), &obs);
    let mut probe = estimate.clone();
    let active = project(&mut probe, &constraints, 2.0 * control.boundary_eps);
    let status = if mc.a == 0.0 || mc.steps == 0 || disc >= control.tolerance {
        FitStatus::NotConverged
    } else if !active.is_empty() {
        FitStatus::Boundary {
            constraint: active[0].clone(),
        }
    } else {
        FitStatus::Converged
    };
    finish("mom", model, estimate, obs, &chains.clone(), chains, status, mc.steps, trace, base)
}
