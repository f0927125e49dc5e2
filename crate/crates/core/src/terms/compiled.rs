//! Term evaluation and discrete change statistics on a concrete network.
//!
//! Change statistics are computed for a focus dyad whose stored value is
//! ignored: the caller supplies the two values being compared.

use crate::network::CountNetwork;
use crate::special::log_factorial;

use super::spec::{Affect, Combine, TwoPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Compiled {
    Sum,
    Nonzero,
    Cmp,
    SqrtSum,
    /// Row-major n×n.
    Covariate(Vec<f64>),
    ActorSum(Vec<bool>),
    MutualMin,
    MutualNegAbsDiff,
    MutualGeoMean { centered: bool },
    MutualProduct,
    ActorCov { side: Side, centered: bool },
    Triadic(Triadic),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Triadic {
    pub two_path: TwoPath,
    pub combine: Combine,
    pub affect: Affect,
    pub cyclic: bool,
}

#[inline]
fn sqrt_u(k: u64) -> f64 {
    (k as f64).sqrt()
}

/// Running totals of √y needed by the centered and covariance terms.
#[derive(Debug, Clone, Default)]
pub(crate) struct SqrtCache {
    /// Σ_j √y_ij per actor.
    pub row: Vec<f64>,
    /// Σ_i √y_ij per actor (equal to `row` when undirected).
    pub col: Vec<f64>,
    pub row_sq: f64,
    pub col_sq: f64,
    /// Σ over the dyad set of √y.
    pub total_sqrt: f64,
    /// Σ over the dyad set of y.
    pub total: f64,
}

impl SqrtCache {
    pub fn build(y: &CountNetwork) -> Self {
        let n = y.n();
        let mut c = SqrtCache {
            row: vec![0.0; n],
            col: vec![0.0; n],
            ..Default::default()
        };
        for (i, j, v) in y.iter_nonzero() {
            let a = sqrt_u(v);
            c.total_sqrt += a;
            c.total += v as f64;
            c.row[i] += a;
            c.col[j] += a;
            if !y.is_directed() {
                c.row[j] += a;
                c.col[i] += a;
            }
        }
        c.row_sq = c.row.iter().map(|s| s * s).sum();
        c.col_sq = c.col.iter().map(|s| s * s).sum();
        c
    }

    pub fn update(&mut self, directed: bool, i: usize, j: usize, old: u64, new: u64) {
        let d = sqrt_u(new) - sqrt_u(old);
        if d == 0.0 {
            return;
        }
        self.total_sqrt += d;
        self.total += new as f64 - old as f64;
        let bump = |v: &mut Vec<f64>, sq: &mut f64, k: usize| {
            let before = v[k];
            v[k] += d;
            *sq += v[k] * v[k] - before * before;
        };
        bump(&mut self.row, &mut self.row_sq, i);
        bump(&mut self.col, &mut self.col_sq, j);
        if !directed {
            bump(&mut self.row, &mut self.row_sq, j);
            bump(&mut self.col, &mut self.col_sq, i);
        }
    }
}

impl Triadic {
    #[inline]
    fn path(&self, a: u64, b: u64) -> f64 {
        match self.two_path {
            TwoPath::Min => a.min(b) as f64,
            TwoPath::GeoMean => ((a as f64) * (b as f64)).sqrt(),
        }
    }

    #[inline]
    fn pool(&self, acc: f64, v: f64) -> f64 {
        match self.combine {
            Combine::Max => acc.max(v),
            Combine::Sum => acc + v,
        }
    }

    #[inline]
    fn act(&self, y: u64, strength: f64) -> f64 {
        match self.affect {
            Affect::Min => (y as f64).min(strength),
            Affect::GeoMean => (y as f64 * strength).sqrt(),
        }
    }

    /// Segment values of the two-path between i and j through k.
    #[inline]
    fn legs(&self, y: &CountNetwork, i: usize, j: usize, k: usize) -> (u64, u64) {
        if self.cyclic && y.is_directed() {
            (y.get(j, k), y.get(k, i))
        } else {
            (y.get(i, k), y.get(k, j))
        }
    }

    /// Pooled strength over intermediates other than i, j and `skip`.
    fn strength(&self, y: &CountNetwork, i: usize, j: usize, skip: Option<usize>) -> f64 {
        let mut acc = 0.0;
        for k in 0..y.n() {
            if k == i || k == j || Some(k) == skip {
                continue;
            }
            let (a, b) = self.legs(y, i, j, k);
            if a == 0 || b == 0 {
                continue;
            }
            acc = self.pool(acc, self.path(a, b));
        }
        acc
    }

    fn eval(&self, y: &CountNetwork) -> f64 {
        // Both affect functions vanish at y_ij = 0.
        y.iter_nonzero()
            .map(|(i, j, v)| self.act(v, self.strength(y, i, j, None)))
            .sum()
    }

    /// Change for focus dyad (u, v) going k1 → k2 (undirected: u < v).
    fn change(&self, y: &CountNetwork, u: usize, v: usize, k1: u64, k2: u64) -> f64 {
        let own = self.strength(y, u, v, None);
        let mut delta = self.act(k2, own) - self.act(k1, own);

        // Each affected dyad (i, j) uses the focus dyad as one segment of the
        // two-path through `mid`; `other` is the value of the remaining segment.
        let mut affected = |i: usize, j: usize, mid: usize, other: u64| {
            let yij = y.get(i, j);
            if yij == 0 {
                return;
            }
            let rest = self.strength(y, i, j, Some(mid));
            let with = |k: u64| {
                if k == 0 || other == 0 {
                    rest
                } else {
                    self.pool(rest, self.path(k, other))
                }
            };
            delta += self.act(yij, with(k2)) - self.act(yij, with(k1));
        };

        let n = y.n();
        for w in 0..n {
            if w == u || w == v {
                continue;
            }
            if !y.is_directed() {
                affected(u, w, v, y.get(v, w));
                affected(v, w, u, y.get(u, w));
            } else if self.cyclic {
                // Legs (j,k),(k,i): focus is (j,k) for dyad (w,u) via v,
                // and (k,i) for dyad (v,w) via u.
                affected(w, u, v, y.get(v, w));
                affected(v, w, u, y.get(w, u));
            } else {
                // Legs (i,k),(k,j): focus is (i,k) for dyad (u,w) via v,
                // and (k,j) for dyad (w,v) via u.
                affected(u, w, v, y.get(v, w));
                affected(w, v, u, y.get(w, u));
            }
        }
        delta
    }
}

impl Compiled {
    pub fn eval(&self, y: &CountNetwork, cache: &SqrtCache) -> f64 {
        let n = y.n();
        match self {
            Compiled::Sum => y.iter_nonzero().map(|(_, _, v)| v as f64).sum(),
            Compiled::Nonzero => y.iter_nonzero().count() as f64,
            Compiled::Cmp => y.iter_nonzero().map(|(_, _, v)| log_factorial(v)).sum(),
            Compiled::SqrtSum => y.iter_nonzero().map(|(_, _, v)| sqrt_u(v)).sum(),
            Compiled::Covariate(x) => y
                .iter_nonzero()
                .map(|(i, j, v)| v as f64 * x[i * n + j])
                .sum(),
            Compiled::ActorSum(members) => y
                .iter_nonzero()
                .filter(|&(i, j, _)| members[i] || members[j])
                .map(|(_, _, v)| v as f64)
                .sum(),
            Compiled::MutualMin => mutual_pairs(y).map(|(a, b)| a.min(b) as f64).sum(),
            Compiled::MutualNegAbsDiff => mutual_pairs(y).map(|(a, b)| -(a.abs_diff(b) as f64)).sum(),
            Compiled::MutualProduct => mutual_pairs(y).map(|(a, b)| (a * b) as f64).sum(),
            Compiled::MutualGeoMean { centered } => {
                let g: f64 = mutual_pairs(y).map(|(a, b)| sqrt_u(a) * sqrt_u(b)).sum();
                if *centered {
                    let pairs = (n * (n - 1) / 2) as f64;
                    let m = cache.total_sqrt / y.num_dyads() as f64;
                    g - pairs * m * m
                } else {
                    g
                }
            }
            Compiled::ActorCov { side, centered } => {
                let s2 = match side {
                    Side::Out | Side::Both => cache.row_sq,
                    Side::In => cache.col_sq,
                };
                actor_cov(y, *side, *centered, s2, cache.total_sqrt, cache.total)
            }
            Compiled::Triadic(t) => t.eval(y),
        }
    }

    /// Δ^{k1→k2} at (u, v); for undirected networks (u, v) must be canonical.
    pub fn change(
        &self,
        y: &CountNetwork,
        cache: &SqrtCache,
        u: usize,
        v: usize,
        k1: u64,
        k2: u64,
    ) -> f64 {
        let n = y.n();
        let (f1, f2) = (k1 as f64, k2 as f64);
        match self {
            Compiled::Sum => f2 - f1,
            Compiled::Nonzero => ((k2 > 0) as i32 - (k1 > 0) as i32) as f64,
            Compiled::Cmp => log_factorial(k2) - log_factorial(k1),
            Compiled::SqrtSum => sqrt_u(k2) - sqrt_u(k1),
            Compiled::Covariate(x) => (f2 - f1) * x[u * n + v],
            Compiled::ActorSum(members) => {
                if members[u] || members[v] {
                    f2 - f1
                } else {
                    0.0
                }
            }
            Compiled::MutualMin => {
                let o = y.get(v, u);
                k2.min(o) as f64 - k1.min(o) as f64
            }
            Compiled::MutualNegAbsDiff => {
                let o = y.get(v, u);
                k1.abs_diff(o) as f64 - k2.abs_diff(o) as f64
            }
            Compiled::MutualProduct => (f2 - f1) * y.get(v, u) as f64,
            Compiled::MutualGeoMean { centered } => {
                let o = sqrt_u(y.get(v, u));
                let dg = (sqrt_u(k2) - sqrt_u(k1)) * o;
                if *centered {
                    let pairs = (n * (n - 1) / 2) as f64;
                    let dyads = y.num_dyads() as f64;
                    let base = cache.total_sqrt - sqrt_u(y.get(u, v));
                    let m1 = (base + sqrt_u(k1)) / dyads;
                    let m2 = (base + sqrt_u(k2)) / dyads;
                    dg - pairs * (m2 * m2 - m1 * m1)
                } else {
                    dg
                }
            }
            Compiled::ActorCov { side, centered } => {
                let at = |k: u64| actor_cov_with(y, cache, *side, *centered, u, v, k);
                at(k2) - at(k1)
            }
            Compiled::Triadic(t) => t.change(y, u, v, k1, k2),
        }
    }
}

/// (y_ij, y_ji) over i < j.
fn mutual_pairs(y: &CountNetwork) -> impl Iterator<Item = (u64, u64)> + '_ {
    let n = y.n();
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (y.get(i, j), y.get(j, i))))
}

/// Within-actor covariance from aggregates: with s_i = Σ_j √y_ij over the
/// actor's n−1 neighbors, S2 = Σ s_i², S1 = Σ s_i, Q = Σ_i Σ_j y_ij and
/// m the mean of √y over the dyad set,
/// g = [S2 − 2dmS1 + nd²m² − Q + 2mS1 − ndm²] / (2(n−2)), d = n−1.
fn actor_cov_formula(
    n: usize,
    dyads: usize,
    directed: bool,
    centered: bool,
    s2: f64,
    total_sqrt: f64,
    total: f64,
) -> f64 {
    let scale = 1.0 / (2.0 * (n as f64 - 2.0));
    let (s1, q) = if directed {
        (total_sqrt, total)
    } else {
        (2.0 * total_sqrt, 2.0 * total)
    };
    if !centered {
        return scale * (s2 - q);
    }
    let (nf, d) = (n as f64, n as f64 - 1.0);
    let m = total_sqrt / dyads as f64;
    scale * (s2 - 2.0 * d * m * s1 + nf * d * d * m * m - q + 2.0 * m * s1 - nf * d * m * m)
}

fn actor_cov(y: &CountNetwork, _side: Side, centered: bool, s2: f64, ts: f64, t: f64) -> f64 {
    actor_cov_formula(y.n(), y.num_dyads(), y.is_directed(), centered, s2, ts, t)
}

/// The statistic with dyad (u, v) set to k and everything else from `cache`.
fn actor_cov_with(
    y: &CountNetwork,
    cache: &SqrtCache,
    side: Side,
    centered: bool,
    u: usize,
    v: usize,
    k: u64,
) -> f64 {
    let cur = y.get(u, v);
    let d = sqrt_u(k) - sqrt_u(cur);
    let shift = |sq: f64, s: f64| sq - s * s + (s + d) * (s + d);
    let s2 = match side {
        Side::Out => shift(cache.row_sq, cache.row[u]),
        Side::In => shift(cache.col_sq, cache.col[v]),
        Side::Both => {
            let once = shift(cache.row_sq, cache.row[u]);
            shift(once, cache.row[v])
        }
    };
    let ts = cache.total_sqrt + d;
    let t = cache.total + k as f64 - cur as f64;
    actor_cov_formula(y.n(), y.num_dyads(), y.is_directed(), centered, s2, ts, t)
}
