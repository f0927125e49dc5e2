//! Exact univariate count distributions: Poisson, geometric, zero-modified
//! Poisson, Conway–Maxwell–Poisson and the square-root dispersion family.
//!
//! Families without a closed-form normalizer are summed as series. A series
//! stops once 50 consecutive terms are each below 1e−16 of the partial sum
//! while decreasing; more than 10⁶ terms is reported as an error rather than
//! silently truncated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{log_add_exp, log_factorial, log_sum_exp};

const SERIES_REL_TOL_LN: f64 = -36.841_361_487_904_734; // ln(1e-16)
const SERIES_RUN: usize = 50;
const SERIES_CAP: usize = 1_000_000;

/// A fully summed discrete distribution on 0..len.
#[derive(Debug, Clone)]
pub struct SeriesPmf {
    log_terms: Vec<f64>,
    log_norm: f64,
}

impl SeriesPmf {
    /// Sums `exp(log_term(x))` over x = 0, 1, … under the stopping rule in the
    /// module docs.
    pub fn new(log_term: impl Fn(u64) -> f64) -> Result<Self> {
        let mut log_terms = Vec::new();
        let mut partial = f64::NEG_INFINITY;
        let mut run = 0usize;
        for x in 0..SERIES_CAP as u64 {
            let t = log_term(x);
            if t.is_nan() || t == f64::INFINITY {
                return Err(Error::SeriesDivergence { terms: x as usize });
            }
            let decreasing = log_terms.last().is_some_and(|&prev| t < prev);
            log_terms.push(t);
            partial = log_add_exp(partial, t);
            if decreasing && t - partial < SERIES_REL_TOL_LN {
                run += 1;
                if run >= SERIES_RUN {
                    return Ok(SeriesPmf {
                        log_norm: log_sum_exp(&log_terms),
                        log_terms,
                    });
                }
            } else {
                run = 0;
            }
        }
        Err(Error::SeriesDivergence { terms: SERIES_CAP })
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    /// Number of summed terms; the pmf beyond this index is treated as 0.
    pub fn support_len(&self) -> usize {
        self.log_terms.len()
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        self.log_terms
            .get(x as usize)
            .map_or(f64::NEG_INFINITY, |t| t - self.log_norm)
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// E[f(X)].
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        self.log_terms
            .iter()
            .enumerate()
            .map(|(x, t)| (t - self.log_norm).exp() * f(x as u64))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x as f64)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x as f64 - m).powi(2))
    }
}

pub fn poisson_ln_pmf(mu: f64, x: u64) -> f64 {
    if mu == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    x as f64 * mu.ln() - mu - log_factorial(x)
}

pub fn poisson_pmf(mu: f64, x: u64) -> f64 {
    poisson_ln_pmf(mu, x).exp()
}

/// Geometric on ℕ₀ with success probability `p`: p(1−p)^x, mean (1−p)/p.
pub fn geometric_pmf(p: f64, x: u64) -> f64 {
    p * (1.0 - p).powf(x as f64)
}

/// Canonical Conway–Maxwell–Poisson parameters: pmf ∝ exp(θ₁x + θ₂ log x!).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmpParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl CmpParams {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        CmpParams { theta1, theta2 }
    }

    /// The series over x for these parameters.
    pub fn series(&self) -> Result<SeriesPmf> {
        if !cmp_in_natural_space(*self) {
            return Err(Error::OutsideParameterSpace(format!(
                "CMP (θ₁={}, θ₂={}) needs θ₂<0, or θ₂=0 and θ₁<0",
                self.theta1, self.theta2
            )));
        }
        let (t1, t2) = (self.theta1, self.theta2);
        SeriesPmf::new(|x| t1 * x as f64 + t2 * log_factorial(x))
    }
}

/// Θ_N = {θ₂ < 0} ∪ {θ₂ = 0 ∧ θ₁ < 0}.
pub fn cmp_in_natural_space(p: CmpParams) -> bool {
    p.theta2 < 0.0 || (p.theta2 == 0.0 && p.theta1 < 0.0)
}

pub fn cmp_pmf(p: CmpParams, x: u64) -> Result<f64> {
    Ok(p.series()?.pmf(x))
}

/// Zero-modified Poisson from the dyad-sum and nonzero-indicator statistics:
/// P(0) = (1 + e^{θ₂}(e^{e^{θ₁}} − 1))⁻¹ and, given X > 0, X ~ Poisson(e^{θ₁}).
pub fn zmp_ln_pmf(theta1: f64, theta2: f64, x: u64) -> f64 {
    let mu = theta1.exp();
    // log(e^μ − 1), stable for both small and large μ.
    let log_expm1 = if mu < 30.0 {
        mu.exp_m1().ln()
    } else {
        mu + (-(-mu).exp()).ln_1p()
    };
    let log_z = log_add_exp(0.0, theta2 + log_expm1);
    if x == 0 {
        -log_z
    } else {
        theta2 + x as f64 * theta1 - log_factorial(x) - log_z
    }
}

pub fn zmp_pmf(theta1: f64, theta2: f64, x: u64) -> f64 {
    zmp_ln_pmf(theta1, theta2, x).exp()
}

/// Single-dyad distribution of the square-root dispersion model,
/// pmf ∝ exp(θ₁√y + θ₂y)/y!.
pub fn sqrt_model(theta1: f64, theta2: f64) -> Result<SeriesPmf> {
    SeriesPmf::new(|y| theta1 * (y as f64).sqrt() + theta2 * y as f64 - log_factorial(y))
}

/// Finds the dyad-sum coefficient θ₂ for which the square-root model with
/// square-root coefficient `theta1` has mean `target_mean`, by bisection.
pub fn sqrt_model_tune(theta1: f64, target_mean: f64) -> Result<f64> {
    if !(target_mean > 0.0) || !target_mean.is_finite() {
        return Err(Error::Bracketing(format!(
            "target mean must be positive, got {target_mean}"
        )));
    }
    let mean_at = |t2: f64| sqrt_model(theta1, t2).map(|s| s.mean());

    // The mean is increasing in θ₂; widen until the target is bracketed.
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut widen = 0;
    while mean_at(lo)? > target_mean {
        lo *= 2.0;
        widen += 1;
        if widen > 12 {
            return Err(Error::Bracketing(format!("no lower bracket for θ₁={theta1}")));
        }
    }
    widen = 0;
    while mean_at(hi)? < target_mean {
        hi *= 2.0;
        widen += 1;
        if widen > 12 {
            return Err(Error::Bracketing(format!("no upper bracket for θ₁={theta1}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mean_at(mid)?;
        if (m - target_mean).abs() < 1e-12 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if m < target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: naive direct summation over a long fixed range.
    fn brute_normalized(log_term: impl Fn(u64) -> f64, upto: u64) -> Vec<f64> {
        let w: Vec<f64> = (0..=upto).map(|x| log_term(x).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    #[test]
    fn natural_space_predicate() {
        assert!(cmp_in_natural_space(CmpParams::new(-1.0, 0.0)));
        assert!(!cmp_in_natural_space(CmpParams::new(0.5, 0.0)));
        assert!(!cmp_in_natural_space(CmpParams::new(0.0, 0.0)));
        assert!(cmp_in_natural_space(CmpParams::new(10.0, -0.1)));
        assert!(!cmp_in_natural_space(CmpParams::new(-3.0, 0.2)));
    }

    #[test]
    fn cmp_special_cases() {
        let pois = CmpParams::new(2f64.ln(), -1.0).series().unwrap();
        let geo = CmpParams::new(0.5f64.ln(), 0.0).series().unwrap();
        for x in 0..40 {
            assert!((pois.pmf(x) - poisson_pmf(2.0, x)).abs() < 1e-12);
            assert!((geo.pmf(x) - geometric_pmf(0.5, x)).abs() < 1e-12);
        }
        assert!(cmp_pmf(CmpParams::new(0.5, 0.0), 1).is_err());
    }

    #[test]
    fn cmp_normalizes_against_brute_force() {
        let p = CmpParams::new(1.5, -0.3);
        let s = p.series().unwrap();
        let brute = brute_normalized(|x| 1.5 * x as f64 - 0.3 * log_factorial(x), 2000);
        let total: f64 = (0..s.support_len() as u64).map(|x| s.pmf(x)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for x in 0..60 {
            assert!((s.pmf(x) - brute[x as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn cmp_mean_increases_in_theta1() {
        for &t2 in &[-2.0, -1.0, -0.5, -0.25] {
            let means: Vec<f64> = (-10..=10)
                .map(|k| CmpParams::new(k as f64 * 0.2, t2).series().unwrap().mean())
                .collect();
            assert!(means.windows(2).all(|w| w[1] > w[0]), "t2={t2}: {means:?}");
        }
    }

    #[test]
    fn heavy_tail_near_geometric_boundary_still_sums() {
        let s = CmpParams::new(-0.01, 0.0).series().unwrap();
        // Geometric with p = 1 − e^{−0.01}.
        let p = 1.0 - (-0.01f64).exp();
        assert!((s.mean() - (1.0 - p) / p).abs() < 1e-6);
    }

    #[test]
    fn zmp_reduces_to_poisson_and_normalizes() {
        assert!((zmp_pmf(0.0, 0.0, 0) - (-1f64).exp()).abs() < 1e-15);
        for x in 0..30 {
            assert!((zmp_pmf(0.7, 0.0, x) - poisson_pmf(0.7f64.exp(), x)).abs() < 1e-14);
        }
        let total: f64 = (0..=1000).map(|x| zmp_pmf(1.0, -0.7, x)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Conditional on being nonzero, Poisson(e^θ₁).
        let mu = 1f64.exp();
        let ratio = zmp_pmf(1.0, -0.7, 3) / zmp_pmf(1.0, -0.7, 2);
        assert!((ratio - mu / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zmp_zero_probability_decreases_in_both_parameters() {
        let grid: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.5).collect();
        for &a in &grid {
            let by_t2: Vec<f64> = grid.iter().map(|&b| zmp_pmf(a, b, 0)).collect();
            let by_t1: Vec<f64> = grid.iter().map(|&b| zmp_pmf(b, a, 0)).collect();
            assert!(by_t2.windows(2).all(|w| w[1] < w[0]));
            assert!(by_t1.windows(2).all(|w| w[1] < w[0]));
        }
        // Closed form from the indicator parametrization.
        let (t1, t2) = (0.3f64, 1.2f64);
        let p0 = 1.0 / (1.0 + t2.exp() * (t1.exp().exp() - 1.0));
        assert!((zmp_pmf(t1, t2, 0) - p0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_tune_reaches_target_mean() {
        let t2 = sqrt_model_tune(0.0, 1.0).unwrap();
        assert!(t2.abs() < 1e-10);
        for &t1 in &[-1.0, 1.0, -2.5] {
            let t2 = sqrt_model_tune(t1, 1.0).unwrap();
            let s = sqrt_model(t1, t2).unwrap();
            assert!((s.mean() - 1.0).abs() < 1e-10);
        }
        assert!(sqrt_model_tune(0.0, -1.0).is_err());
    }

    #[test]
    fn sqrt_model_dispersion_direction() {
        let disp = |t1: f64| {
            let s = sqrt_model(t1, sqrt_model_tune(t1, 1.0).unwrap()).unwrap();
            s.variance() / s.mean()
        };
        assert!(disp(-1.0) > 1.0);
        assert!(disp(1.0) < 1.0);
        assert!((disp(0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sqrt_model_zero_mass_grows_as_theta1_falls() {
        let p0: Vec<f64> = [-2.0, -1.0, 0.0, 1.0]
            .iter()
            .map(|&t1| sqrt_model(t1, sqrt_model_tune(t1, 1.0).unwrap()).unwrap().pmf(0))
            .collect();
        assert!(p0.windows(2).all(|w| w[0] > w[1]), "{p0:?}");
    }

    #[test]
    fn truncation_is_stable_when_extended() {
        // Summing twice as many terms as the stopping rule picked changes nothing.
        let (t1, t2) = (1.5, -0.3);
        let s = CmpParams::new(t1, t2).series().unwrap();
        let n = s.support_len() as u64;
        let longer = brute_normalized(|x| t1 * x as f64 + t2 * log_factorial(x), 2 * n);
        let mean_long: f64 = longer.iter().enumerate().map(|(x, p)| x as f64 * p).sum();
        assert!((s.mean() - mean_long).abs() < 1e-12);
    }
}
