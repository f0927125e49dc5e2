//! Metropolis–Hastings simulation for count-valued ERGMs.
//!
//! Each step picks a dyad uniformly, proposes a new value from a Poisson
//! kernel centred at y + ½ that excludes the current value, and, when the
//! current value is nonzero, jumps straight to 0 with probability π₀. The
//! zero jump speeds up mixing for zero-heavy networks without changing the
//! stationary distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::CountNetwork;
use crate::special::log_factorial;
use crate::terms::{dot, Model, SqrtCache};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerControl {
    /// MH steps discarded before the first retained draw.
    pub burnin: u64,
    /// MH steps between retained draws.
    pub interval: u64,
    /// Number of retained draws.
    pub draws: usize,
    /// Probability of proposing 0 from a nonzero value.
    pub pi0: f64,
    pub seed: u64,
}

impl Default for SamplerControl {
    fn default() -> Self {
        SamplerControl {
            burnin: 20_000,
            interval: 1_000,
            draws: 1_000,
            pi0: 0.2,
            seed: 1,
        }
    }
}

impl SamplerControl {
    pub fn validate(&self) -> Result<()> {
        if self.interval < 1 {
            return Err(Error::InvalidControl("interval must be at least 1".into()));
        }
        if self.draws < 1 {
            return Err(Error::InvalidControl("draws must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.pi0) {
            return Err(Error::InvalidControl(format!(
                "pi0 must lie in [0, 1), got {}",
                self.pi0
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Statistics of the retained states of one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub labels: Vec<String>,
    /// One row of g(y) per retained draw.
    pub stats: Vec<Vec<f64>>,
    pub final_network: CountNetwork,
    pub acceptance_rate: f64,
    pub control: SamplerControl,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Column `k` of the statistic matrix.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.stats.iter().map(|r| r[k]).collect()
    }

    /// Concatenates the rows of several chains; the final network is the
    /// first chain's and the acceptance rate is averaged.
    pub fn pool(batches: &[SampleBatch]) -> Result<SampleBatch> {
        let first = batches.first().ok_or(Error::EmptySample)?;
        Ok(SampleBatch {
            labels: first.labels.clone(),
            stats: batches.iter().flat_map(|b| b.stats.iter().cloned()).collect(),
            final_network: first.final_network.clone(),
            acceptance_rate: batches.iter().map(|b| b.acceptance_rate).sum::<f64>()
                / batches.len() as f64,
            control: first.control,
        })
    }
}

/// ln p(y*; y) for the Poisson(y + ½) kernel conditioned on y* ≠ y.
fn ln_kernel(y_star: u64, y: u64) -> f64 {
    let lambda = y as f64 + 0.5;
    let ln_lambda = lambda.ln();
    let ln_pois = |k: u64| -lambda + k as f64 * ln_lambda - log_factorial(k);
    ln_pois(y_star) - (-ln_pois(y).exp()).ln_1p()
}

/// Kernel probability of proposing `y_star` from `y` (excluding the zero jump).
pub fn proposal_pmf(y_star: u64, y: u64) -> Result<f64> {
    if y_star == y {
        return Err(Error::DegenerateProposal(y));
    }
    Ok(ln_kernel(y_star, y).exp())
}

/// ln of the total probability of proposing `to` from `from`, zero jump included.
fn ln_propose(to: u64, from: u64, pi0: f64) -> f64 {
    if from != 0 && to == 0 {
        (pi0 + (1.0 - pi0) * ln_kernel(0, from).exp()).ln()
    } else if from != 0 {
        (1.0 - pi0).ln() + ln_kernel(to, from)
    } else {
        ln_kernel(to, from)
    }
}

/// ln q, the Hastings correction ln P(y*→y) − ln P(y→y*).
fn ln_hastings(y_star: u64, y: u64, pi0: f64) -> f64 {
    if y != 0 && y_star != 0 {
        // The (1 − π₀) factors cancel.
        ln_kernel(y, y_star) - ln_kernel(y_star, y)
    } else {
        ln_propose(y, y_star, pi0) - ln_propose(y_star, y, pi0)
    }
}

fn draw_kernel<R: Rng>(y: u64, rng: &mut R) -> u64 {
    let pois = Poisson::new(y as f64 + 0.5).expect("positive rate");
    loop {
        let k = pois.sample(rng) as u64;
        if k != y {
            return k;
        }
    }
}

/// Mutable chain state: the network plus caches kept in sync with it.
pub struct Chain<'m> {
    model: &'m Model,
    theta: Vec<f64>,
    y: CountNetwork,
    cache: SqrtCache,
    dyads: Vec<(usize, usize)>,
    delta: Vec<f64>,
    pi0: f64,
    accepted: u64,
    steps: u64,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m Model, theta: &[f64], y0: CountNetwork, pi0: f64) -> Result<Self> {
        model.check_dimension(theta)?;
        model.check_theta(theta)?;
        model.check_shape(&y0)?;
        Ok(Chain {
            model,
            theta: theta.to_vec(),
            cache: SqrtCache::build(&y0),
            dyads: y0.dyads().collect(),
            y: y0,
            delta: vec![0.0; model.len()],
            pi0,
            accepted: 0,
            steps: 0,
        })
    }

    /// Changes the parameter for subsequent steps.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        self.model.check_dimension(theta)?;
        self.model.check_theta(theta)?;
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    pub fn network(&self) -> &CountNetwork {
        &self.y
    }

    pub fn into_network(self) -> CountNetwork {
        self.y
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    /// One MH step; returns whether the proposal was accepted.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> bool {
        self.steps += 1;
        let (i, j) = self.dyads[rng.random_range(0..self.dyads.len())];
        let y = self.y.get(i, j);
        let y_star = if y != 0 && self.pi0 > 0.0 && rng.random::<f64>() < self.pi0 {
            0
        } else {
            draw_kernel(y, rng)
        };
        self.model
            .change_into(&self.y, &self.cache, i, j, y, y_star, &mut self.delta);
        let r = self.model.reference();
        let ln_r = ln_hastings(y_star, y, self.pi0) + r.log_h(y_star) - r.log_h(y)
            + dot(&self.theta, &self.delta);
        let accept = ln_r >= 0.0 || rng.random::<f64>().ln() < ln_r;
        if accept {
            self.y.set_unchecked(i, j, y_star);
            self.cache.update(self.y.is_directed(), i, j, y, y_star);
            self.accepted += 1;
        }
        accept
    }

    /// Full evaluation of g at the current state; also resets cache drift.
    pub fn stats(&mut self) -> Vec<f64> {
        self.cache = SqrtCache::build(&self.y);
        self.model.eval_raw(&self.y, &self.cache)
    }
}

/// Public single-step entry: returns the next state and whether it moved.
pub fn mh_step<R: Rng>(
    model: &Model,
    theta: &[f64],
    y: &CountNetwork,
    pi0: f64,
    rng: &mut R,
) -> Result<(CountNetwork, bool)> {
    let mut chain = Chain::new(model, theta, y.clone(), pi0)?;
    let accepted = chain.step(rng);
    Ok((chain.into_network(), accepted))
}

/// Runs one chain from `y0`, calling `observe` on every retained state.
pub fn sample_observed(
    model: &Model,
    theta: &[f64],
    y0: &CountNetwork,
    control: &SamplerControl,
    mut observe: impl FnMut(usize, &CountNetwork),
) -> Result<SampleBatch> {
    control.validate()?;
    let mut chain = Chain::new(model, theta, y0.clone(), control.pi0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(control.seed);
    for _ in 0..control.burnin {
        chain.step(&mut rng);
    }
    let mut stats = Vec::with_capacity(control.draws);
    for s in 0..control.draws {
        for _ in 0..control.interval {
            chain.step(&mut rng);
        }
        stats.push(chain.stats());
        observe(s, chain.network());
    }
    Ok(SampleBatch {
        labels: model.labels().to_vec(),
        stats,
        acceptance_rate: chain.acceptance_rate(),
        final_network: chain.into_network(),
        control: *control,
    })
}

pub fn sample(
    model: &Model,
    theta: &[f64],
    y0: &CountNetwork,
    control: &SamplerControl,
) -> Result<SampleBatch> {
    sample_observed(model, theta, y0, control, |_, _| {})
}

/// Seed of chain `c` derived from a base seed (SplitMix64 finalizer).
pub fn chain_seed(base: u64, c: usize) -> u64 {
    let mut z = base.wrapping_add((c as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One chain per start, run in parallel with seeds derived from
/// `control.seed`. Results are in start order and independent of the
/// number of worker threads.
pub fn sample_chains(
    model: &Model,
    theta: &[f64],
    starts: &[CountNetwork],
    control: &SamplerControl,
) -> Result<Vec<SampleBatch>> {
    starts
        .par_iter()
        .enumerate()
        .map(|(c, y0)| sample(model, theta, y0, &control.with_seed(chain_seed(control.seed, c))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{geometric_pmf, poisson_pmf, zmp_pmf};
    use crate::network::NodeAttributes;
    use crate::terms::{ModelSpec, TermKind};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn kernel_examples() {
        let p10 = proposal_pmf(1, 0).unwrap();
        assert!((p10 - (-0.5f64).exp() * 0.5 / (1.0 - (-0.5f64).exp())).abs() < 1e-14);
        assert!((p10 - 0.7707).abs() < 1e-4);
        let p02 = proposal_pmf(0, 2).unwrap();
        assert!((p02 - 0.1104).abs() < 1e-4);
        // Cross-check by normalizing the truncated kernel numerically.
        let raw = |k: u64| (-2.5f64).exp() * 2.5f64.powi(k as i32) / (1..=k).map(|v| v as f64).product::<f64>();
        let z: f64 = (0..80).filter(|&k| k != 2).map(raw).sum();
        assert!((p02 - raw(0) / z).abs() < 1e-12);
        assert!(proposal_pmf(3, 3).is_err());
    }

    #[test]
    fn kernel_normalizes() {
        for y in [0u64, 1, 3, 10, 50] {
            let total: f64 = (0..=400).filter(|&k| k != y).map(|k| proposal_pmf(k, y).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "y={y}: {total}");
        }
    }

    #[test]
    fn hastings_factor_from_zero() {
        let pi0 = 0.3;
        for y_star in 1..6 {
            let q = ln_hastings(y_star, 0, pi0).exp();
            let expect = (pi0 + (1.0 - pi0) * proposal_pmf(0, y_star).unwrap())
                / proposal_pmf(y_star, 0).unwrap();
            assert!((q - expect).abs() < 1e-12);
            // Reverse move is the reciprocal.
            assert!((ln_hastings(0, y_star, pi0) + ln_hastings(y_star, 0, pi0)).abs() < 1e-12);
        }
    }

    /// The proposal together with the acceptance rule satisfies detailed
    /// balance with respect to a target π: π(a)P(a→b) = π(b)P(b→a).
    #[test]
    fn exact_detailed_balance_on_one_dyad() {
        let target = |k: u64| poisson_pmf(2.0, k);
        for pi0 in [0.0, 0.2, 0.5] {
            let trans = |a: u64, b: u64| {
                let ln_r = ln_hastings(b, a, pi0) + (target(b) / target(a)).ln();
                ln_propose(b, a, pi0).exp() * ln_r.exp().min(1.0)
            };
            for a in 0..12 {
                for b in 0..12 {
                    if a != b {
                        let l = target(a) * trans(a, b);
                        let r = target(b) * trans(b, a);
                        assert!((l - r).abs() < 1e-14 * l.max(r).max(1e-300), "{a}->{b}");
                    }
                }
            }
        }
    }

    fn one_dyad_model(kinds: Vec<TermKind>, geometric: bool) -> (Model, CountNetwork) {
        let y = CountNetwork::empty(2, false);
        let spec = if geometric {
            ModelSpec::geometric(kinds)
        } else {
            ModelSpec::poisson(kinds)
        };
        (spec.compile_for(&y, &NodeAttributes::new(2)).unwrap(), y)
    }

    #[test]
    fn single_dyad_chain_matches_poisson() {
        let (m, y) = one_dyad_model(vec![TermKind::Sum], false);
        let mut chain = Chain::new(&m, &[2f64.ln()], y, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0u64; 40];
        let steps = 1_000_000;
        for _ in 0..steps {
            chain.step(&mut rng);
            counts[chain.network().get(0, 1).min(39) as usize] += 1;
        }
        let tv: f64 = 0.5
            * (0..40)
                .map(|k| (counts[k] as f64 / steps as f64 - poisson_pmf(2.0, k as u64)).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "tv={tv}");
    }

    /// Pearson goodness-of-fit p-value, pooling cells with expected count < 5.
    fn chi_square_p(counts: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
        let total: u64 = counts.iter().sum();
        let mut stat = 0.0;
        let mut cells = 0;
        let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
        for (k, &c) in counts.iter().enumerate() {
            obs_acc += c as f64;
            exp_acc += pmf(k as u64) * total as f64;
            if exp_acc >= 5.0 {
                stat += (obs_acc - exp_acc).powi(2) / exp_acc;
                cells += 1;
                obs_acc = 0.0;
                exp_acc = 0.0;
            }
        }
        let tail = total as f64 - counts.iter().enumerate().map(|(k, _)| pmf(k as u64)).sum::<f64>() * total as f64;
        exp_acc += tail.max(0.0);
        if exp_acc > 0.0 {
            stat += (obs_acc - exp_acc).powi(2) / exp_acc;
            cells += 1;
        }
        1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
    }

    /// One dyad value per draw, cycling over dyads so successive recorded
    /// values come from independent dyads.
    fn dyad_counts(m: &Model, theta: &[f64], pi0: f64, draws: usize, seed: u64) -> Vec<u64> {
        let y = CountNetwork::empty(6, true);
        let dyads: Vec<_> = y.dyads().collect();
        let control = SamplerControl {
            burnin: 3_000,
            interval: dyads.len() as u64,
            draws,
            pi0,
            seed,
        };
        let mut counts = vec![0u64; 200];
        sample_observed(m, theta, &y, &control, |s, net| {
            let (i, j) = dyads[s % dyads.len()];
            counts[net.get(i, j) as usize] += 1;
        })
        .unwrap();
        counts
    }

    #[test]
    fn stationary_distributions_match_closed_forms() {
        let a = NodeAttributes::new(6);
        let y = CountNetwork::empty(6, true);
        let cases: Vec<(ModelSpec, Vec<f64>, Box<dyn Fn(u64) -> f64>)> = vec![
            (
                ModelSpec::poisson([TermKind::Sum]),
                vec![2f64.ln()],
                Box::new(|k| poisson_pmf(2.0, k)),
            ),
            (
                ModelSpec::geometric([TermKind::Sum]),
                vec![0.5f64.ln()],
                Box::new(|k| geometric_pmf(0.5, k)),
            ),
            (
                ModelSpec::poisson([TermKind::Sum, TermKind::NonzeroCount]),
                vec![0.4, -1.0],
                Box::new(|k| zmp_pmf(0.4, -1.0, k)),
            ),
        ];
        for (spec, theta, pmf) in cases {
            let m = spec.compile_for(&y, &a).unwrap();
            for pi0 in [0.0, 0.2, 0.5] {
                let counts = dyad_counts(&m, &theta, pi0, 20_000, 5);
                let p = chi_square_p(&counts, &pmf);
                assert!(p > 0.001, "{:?} pi0={pi0}: p={p}", spec.labels());
            }
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let y = CountNetwork::empty(5, true);
        let m = ModelSpec::poisson([
            TermKind::Sum,
            TermKind::MutualMin,
            TermKind::TransitiveMinMax { cyclic: false },
        ])
        .compile_for(&y, &NodeAttributes::new(5))
        .unwrap();
        let c = SamplerControl {
            burnin: 500,
            interval: 20,
            draws: 50,
            pi0: 0.2,
            seed: 42,
        };
        let theta = [0.1, 0.3, 0.1];
        let a = sample(&m, &theta, &y, &c).unwrap();
        let b = sample(&m, &theta, &y, &c).unwrap();
        assert_eq!(a, b);
        let other = sample(&m, &theta, &y, &c.with_seed(43)).unwrap();
        assert_ne!(a.stats, other.stats);
    }

    #[test]
    fn rows_equal_full_evaluation() {
        let y = CountNetwork::empty(6, false);
        let m = ModelSpec::poisson([
            TermKind::Sum,
            TermKind::SqrtSum,
            TermKind::ActorCovariance {
                direction: crate::terms::Direction::Undirected,
                centered: true,
            },
            TermKind::TransitiveMinMax { cyclic: false },
        ])
        .compile_for(&y, &NodeAttributes::new(6))
        .unwrap();
        let c = SamplerControl {
            burnin: 100,
            interval: 10,
            draws: 30,
            pi0: 0.2,
            seed: 3,
        };
        let mut nets = Vec::new();
        let b = sample_observed(&m, &[0.2, 0.0, 0.1, 0.0], &y, &c, |_, n| nets.push(n.clone())).unwrap();
        for (row, net) in b.stats.iter().zip(&nets) {
            assert_eq!(row, &m.eval(net).unwrap().values);
        }
        assert_eq!(&b.final_network, nets.last().unwrap());
    }

    #[test]
    fn chains_do_not_depend_on_thread_count() {
        let y = CountNetwork::empty(5, true);
        let m = ModelSpec::poisson([TermKind::Sum])
            .compile_for(&y, &NodeAttributes::new(5))
            .unwrap();
        let c = SamplerControl {
            burnin: 100,
            interval: 10,
            draws: 20,
            pi0: 0.2,
            seed: 9,
        };
        let starts = vec![y.clone(); 4];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_chains(&m, &[0.0], &starts, &c).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn single_free_dyad_reaches_every_small_value() {
        // A near-flat geometric target spreads mass over 0..=20.
        let (g, y) = one_dyad_model(vec![TermKind::Sum], true);
        let mut chain = Chain::new(&g, &[-0.05], y.clone(), 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [false; 21];
        for _ in 0..200_000 {
            chain.step(&mut rng);
            let v = chain.network().get(0, 1);
            if v <= 20 {
                seen[v as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));

        let (m, _) = one_dyad_model(vec![TermKind::Sum], false);
        let mut chain = Chain::new(&m, &[0.0], y, 0.2).unwrap();
        let mut seen = [false; 6];
        for _ in 0..100_000 {
            chain.step(&mut rng);
            let v = chain.network().get(0, 1);
            if v < 6 {
                seen[v as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn constraint_violation_is_rejected_before_running() {
        let y = CountNetwork::empty(4, true);
        let m = ModelSpec::poisson([TermKind::Sum, TermKind::Cmp])
            .compile_for(&y, &NodeAttributes::new(4))
            .unwrap();
        assert!(sample(&m, &[0.0, 1.5], &y, &SamplerControl::default()).is_err());
        let bad = SamplerControl {
            pi0: 1.0,
            ..Default::default()
        };
        assert!(sample(&m, &[0.0, 0.0], &y, &bad).is_err());
    }

    #[test]
    fn sampled_mean_increases_with_theta() {
        let y = CountNetwork::empty(5, true);
        let m = ModelSpec::poisson([TermKind::Sum])
            .compile_for(&y, &NodeAttributes::new(5))
            .unwrap();
        let c = SamplerControl {
            burnin: 1_000,
            interval: 20,
            draws: 2_000,
            pi0: 0.2,
            seed: 4,
        };
        let means: Vec<f64> = [0.5f64, 1.0, 2.0]
            .iter()
            .map(|mu| {
                let b = sample(&m, &[mu.ln()], &y, &c).unwrap();
                crate::special::mean(&b.column(0)) / 20.0
            })
            .collect();
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
        assert!((means[2] - 2.0).abs() < 0.1);
    }
}
