//! Small numerical helpers shared across modules.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

const EXACT_LIMIT: u64 = 20;
const TABLE_LEN: usize = 4096;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..TABLE_LEN as u64).map(log_factorial_uncached).collect())
}

fn log_factorial_uncached(k: u64) -> f64 {
    if k <= EXACT_LIMIT {
        (2..=k).map(|v| (v as f64).ln()).sum()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// log(k!): exact summation up to 20, log-gamma above.
#[inline]
pub fn log_factorial(k: u64) -> f64 {
    if (k as usize) < TABLE_LEN {
        table()[k as usize]
    } else {
        log_factorial_uncached(k)
    }
}

/// Numerically stable log(exp(a) + exp(b)).
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ exp(xs).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// log((1/S) Σ exp(xs)).
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with divisor S−1.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_factorial_small_values_are_exact() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
        assert!((log_factorial(4) - 24f64.ln()).abs() < 1e-15);
        assert!((log_factorial(4) - log_factorial(2) - 12f64.ln()).abs() < 1e-14);
        // Continuity across the switch to log-gamma.
        let step = log_factorial(21) - log_factorial(20);
        assert!((step - 21f64.ln()).abs() < 1e-12);
        assert!((log_factorial(5000) - ln_gamma(5001.0)).abs() < 1e-9);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((log_mean_exp(&[0.0, 0.0, 0.0]) - 0.0).abs() < 1e-15);
    }
}
