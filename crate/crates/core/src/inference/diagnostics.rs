//! MCMC output diagnostics: effective sample size, mean-vs-observed
//! z-scores and a kernel-density bimodality flag.

use serde::{Deserialize, Serialize};

use crate::sampler::SampleBatch;
use crate::special::{mean, variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDiagnostics {
    pub label: String,
    pub observed: f64,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    /// 5%, 50% and 95% sample quantiles.
    pub quantiles: [f64; 3],
    pub lag1_autocorrelation: f64,
    /// Summed over chains.
    pub ess: f64,
    /// (mean − observed) / (sd / √ESS).
    pub z: f64,
    pub bimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub draws: usize,
    pub chains: usize,
    pub acceptance_rate: f64,
    pub stats: Vec<StatDiagnostics>,
}

impl DiagnosticsReport {
    pub fn any_bimodal(&self) -> bool {
        self.stats.iter().any(|s| s.bimodal)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }
}

/// Autocovariances with divisor n, up to lag `max_lag`.
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>() / n as f64
}

/// Effective sample size by Geyer's initial monotone positive sequence.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let g0 = autocov(x, m, 0);
    if g0 <= 0.0 {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = autocov(x, m, 2 * k) + autocov(x, m, 2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - g0) / g0;
    (n as f64 / tau.max(1e-12)).max(1.0)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

const GRID: usize = 512;

/// True when a Gaussian KDE of `x` has two modes each holding at least 5% of
/// the mass, separated by a valley no higher than half the smaller peak.
///
/// The bandwidth is Silverman's rule, floored at 0.6× the median gap between
/// distinct values so integer-valued statistics are not split at every
/// integer.
pub fn is_bimodal(x: &[f64]) -> bool {
    let n = x.len();
    if n < 20 {
        return false;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = variance(x).sqrt();
    if !(sd > 0.0) {
        return false;
    }
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let mut h = 0.9 * spread * (n as f64).powf(-0.2);
    let mut gaps: Vec<f64> = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0.0)
        .collect();
    if !gaps.is_empty() {
        gaps.sort_by(f64::total_cmp);
        h = h.max(0.6 * gaps[gaps.len() / 2]);
    }
    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[n - 1] + 3.0 * h;
    let step = (hi - lo) / (GRID - 1) as f64;

    // Linear binning, then a discrete Gaussian convolution.
    let mut bins = vec![0.0; GRID];
    for &v in x {
        let pos = (v - lo) / step;
        let b = (pos.floor() as usize).min(GRID - 2);
        let frac = pos - b as f64;
        bins[b] += 1.0 - frac;
        bins[b + 1] += frac;
    }
    let reach = ((4.0 * h / step).ceil() as usize).min(GRID);
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| (-0.5 * (d as f64 * step / h).powi(2)).exp())
        .collect();
    let mut dens = vec![0.0; GRID];
    for (b, &w) in bins.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let from = b.saturating_sub(reach);
        let to = (b + reach).min(GRID - 1);
        for (g, d) in dens.iter_mut().enumerate().take(to + 1).skip(from) {
            *d += w * kernel[g.abs_diff(b)];
        }
    }
    let total: f64 = dens.iter().sum();

    // Local maxima (plateaus count once) and the minima between them.
    let mut peaks = Vec::new();
    let mut g = 1;
    while g < GRID - 1 {
        if dens[g] > dens[g - 1] {
            let mut e = g;
            while e + 1 < GRID && dens[e + 1] == dens[g] {
                e += 1;
            }
            if e + 1 < GRID && dens[e + 1] < dens[g] {
                peaks.push((g + e) / 2);
            }
            g = e + 1;
        } else {
            g += 1;
        }
    }
    if peaks.len() < 2 {
        return false;
    }
    // Each peak owns the mass between the valleys on either side of it.
    let valleys: Vec<usize> = peaks
        .windows(2)
        .map(|w| (w[0]..=w[1]).min_by(|&a, &b| dens[a].total_cmp(&dens[b])).unwrap())
        .collect();
    let mass: Vec<f64> = (0..peaks.len())
        .map(|p| {
            let from = if p == 0 { 0 } else { valleys[p - 1] };
            let to = if p == peaks.len() - 1 { GRID - 1 } else { valleys[p] };
            dens[from..=to].iter().sum::<f64>() / total
        })
        .collect();
    let major: Vec<usize> = (0..peaks.len()).filter(|&p| mass[p] >= 0.05).collect();
    major.windows(2).any(|w| {
        let (a, b) = (peaks[w[0]], peaks[w[1]]);
        let valley = dens[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        valley <= 0.5 * dens[a].min(dens[b])
    })
}

/// Diagnostics for the pooled chains against the observed statistics.
pub fn diagnostics(chains: &[SampleBatch], observed: &[f64]) -> DiagnosticsReport {
    let labels = chains.first().map(|b| b.labels.clone()).unwrap_or_default();
    let draws: usize = chains.iter().map(SampleBatch::len).sum();
    let stats = labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.column(k)).collect();
            let pooled: Vec<f64> = per_chain.iter().flatten().copied().collect();
            let mut sorted = pooled.clone();
            sorted.sort_by(f64::total_cmp);
            let m = mean(&pooled);
            let sd = variance(&pooled).sqrt();
            let ess: f64 = per_chain.iter().map(|c| effective_sample_size(c)).sum();
            let lag1 = {
                let num: f64 = per_chain
                    .iter()
                    .map(|c| c.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>())
                    .sum();
                let den: f64 = pooled.iter().map(|v| (v - m) * (v - m)).sum();
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            };
            let obs = observed[k];
            let z = if sd > 0.0 {
                (m - obs) / (sd / ess.sqrt())
            } else if m == obs {
                0.0
            } else {
                f64::INFINITY.copysign(m - obs)
            };
            StatDiagnostics {
                label: label.clone(),
                observed: obs,
                mean: m,
                sd,
                min: sorted.first().copied().unwrap_or(f64::NAN),
                max: sorted.last().copied().unwrap_or(f64::NAN),
                quantiles: [
                    quantile(&sorted, 0.05),
                    quantile(&sorted, 0.5),
                    quantile(&sorted, 0.95),
                ],
                lag1_autocorrelation: lag1,
                ess,
                z,
                bimodal: is_bimodal(&pooled),
            }
        })
        .collect();
    DiagnosticsReport {
        draws,
        chains: chains.len(),
        acceptance_rate: if chains.is_empty() {
            0.0
        } else {
            chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64
        },
        stats,
    }
}
