//! The statistic catalog: sufficient statistics g(y), discrete change
//! statistics, conditional log-ratios and natural-parameter constraints.

mod compiled;
mod spec;

use serde::{Deserialize, Serialize};

pub use spec::{
    ActorSet, Affect, Combine, Covariate, Direction, ModelSpec, Reference, TermKind, TermSpec,
    TwoPath,
};

pub(crate) use compiled::SqrtCache;
use compiled::{Compiled, Side, Triadic};

use crate::error::{Error, Result};
use crate::network::{CountNetwork, NodeAttributes};

/// Term-aligned statistic values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl StatVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.values[k])
    }
}

/// A linear constraint a·θ ≤ upper (or < upper when strict) on the
/// parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub description: String,
    pub coefficients: Vec<f64>,
    pub upper: f64,
    pub strict: bool,
}

impl Constraint {
    fn single(p: usize, k: usize, label: &str, upper: f64, strict: bool) -> Self {
        let mut coefficients = vec![0.0; p];
        coefficients[k] = 1.0;
        Constraint {
            description: format!("{label} {} {upper}", if strict { "<" } else { "<=" }),
            coefficients,
            upper,
            strict,
        }
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.coefficients.iter().zip(theta).map(|(a, t)| a * t).sum()
    }

    pub fn is_satisfied(&self, theta: &[f64]) -> bool {
        let v = self.value(theta);
        if self.strict {
            v < self.upper
        } else {
            v <= self.upper
        }
    }

    /// The single coefficient this constraint bounds, if it is a box bound.
    pub fn box_index(&self) -> Option<usize> {
        let mut nz = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0);
        match (nz.next(), nz.next()) {
            (Some((k, &1.0)), None) => Some(k),
            _ => None,
        }
    }
}

/// A model bound to a network shape and node attributes.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    labels: Vec<String>,
    terms: Vec<Compiled>,
    n: usize,
    directed: bool,
}

fn term_err(term: &TermSpec, message: impl Into<String>) -> Error {
    Error::InvalidTerm {
        term: term.label(),
        message: message.into(),
    }
}

fn compile_term(
    term: &TermSpec,
    n: usize,
    directed: bool,
    attrs: &NodeAttributes,
) -> Result<Compiled> {
    if term.kind.requires_directed() && !directed {
        return Err(Error::RequiresDirected { term: term.label() });
    }
    let attr = |name: &str| -> Result<&[f64]> {
        if attrs.n() != n {
            return Err(Error::AttributeLength {
                name: name.to_string(),
                len: attrs.n(),
                n,
            });
        }
        attrs.get(name)
    };
    Ok(match &term.kind {
        TermKind::Sum => Compiled::Sum,
        TermKind::NonzeroCount => Compiled::Nonzero,
        TermKind::Cmp => Compiled::Cmp,
        TermKind::SqrtSum => Compiled::SqrtSum,
        TermKind::DyadCovariate { covariate } => {
            let mut x = vec![0.0; n * n];
            match covariate {
                Covariate::Matrix { values } => {
                    if values.len() != n || values.iter().any(|r| r.len() != n) {
                        return Err(Error::CovariateDimension {
                            rows: values.len(),
                            cols: values.first().map_or(0, Vec::len),
                            n,
                        });
                    }
                    for (i, row) in values.iter().enumerate() {
                        x[i * n..(i + 1) * n].copy_from_slice(row);
                    }
                }
                Covariate::AbsDiff { attr: name, negate } => {
                    let a = attr(name)?;
                    let sign = if *negate { -1.0 } else { 1.0 };
                    fill(&mut x, n, |i, j| sign * (a[i] - a[j]).abs());
                }
                Covariate::Match { attr: name } => {
                    let a = attr(name)?;
                    fill(&mut x, n, |i, j| (a[i] == a[j]) as u8 as f64);
                }
                Covariate::NodeSum { attr: name } => {
                    let a = attr(name)?;
                    fill(&mut x, n, |i, j| a[i] + a[j]);
                }
            }
            Compiled::Covariate(x)
        }
        TermKind::ActorSum { actors } => {
            let members: Vec<bool> = match actors {
                ActorSet::Actor(a) => {
                    if *a == 0 || *a > n {
                        return Err(term_err(term, format!("actor {a} not in 1..={n}")));
                    }
                    (0..n).map(|i| i + 1 == *a).collect()
                }
                ActorSet::Attribute(name) => attr(name)?.iter().map(|v| *v != 0.0).collect(),
            };
            Compiled::ActorSum(members)
        }
        TermKind::MutualMin => Compiled::MutualMin,
        TermKind::MutualNegAbsDiff => Compiled::MutualNegAbsDiff,
        TermKind::MutualGeoMean { centered } => Compiled::MutualGeoMean {
            centered: *centered,
        },
        TermKind::MutualProduct => Compiled::MutualProduct,
        TermKind::ActorCovariance {
            direction,
            centered,
        } => {
            if n < 3 {
                return Err(term_err(term, "needs at least 3 actors"));
            }
            let side = match (direction, directed) {
                (_, false) => Side::Both,
                (Direction::Out, true) => Side::Out,
                (Direction::In, true) => Side::In,
                (Direction::Undirected, true) => {
                    return Err(term_err(
                        term,
                        "the undirected variant needs an undirected network",
                    ))
                }
            };
            Compiled::ActorCov {
                side,
                centered: *centered,
            }
        }
        TermKind::TransitiveMinMax { cyclic } => Compiled::Triadic(Triadic {
            two_path: TwoPath::Min,
            combine: Combine::Max,
            affect: Affect::Min,
            cyclic: *cyclic,
        }),
        TermKind::TransitiveGeneral {
            two_path,
            combine,
            affect,
            cyclic,
        } => Compiled::Triadic(Triadic {
            two_path: *two_path,
            combine: *combine,
            affect: *affect,
            cyclic: *cyclic,
        }),
    })
}

fn fill(x: &mut [f64], n: usize, f: impl Fn(usize, usize) -> f64) {
    for i in 0..n {
        for j in 0..n {
            if i != j {
                x[i * n + j] = f(i, j);
            }
        }
    }
}

impl ModelSpec {
    /// Binds the terms to a network with `n` actors.
    pub fn compile(&self, n: usize, directed: bool, attrs: &NodeAttributes) -> Result<Model> {
        let terms = self
            .terms
            .iter()
            .map(|t| compile_term(t, n, directed, attrs))
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            labels: self.labels(),
            spec: self.clone(),
            terms,
            n,
            directed,
        })
    }

    /// Compiles against the shape of `y`.
    pub fn compile_for(&self, y: &CountNetwork, attrs: &NodeAttributes) -> Result<Model> {
        self.compile(y.n(), y.is_directed(), attrs)
    }
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn reference(&self) -> Reference {
        self.spec.reference
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn is_dyad_independent(&self) -> bool {
        self.spec.terms.iter().all(|t| t.kind.is_dyad_independent())
    }

    pub(crate) fn check_shape(&self, y: &CountNetwork) -> Result<()> {
        if y.n() != self.n || y.is_directed() != self.directed {
            return Err(Error::InvalidControl(format!(
                "model compiled for n={} directed={}, network has n={} directed={}",
                self.n,
                self.directed,
                y.n(),
                y.is_directed()
            )));
        }
        Ok(())
    }

    fn stat_vector(&self, values: Vec<f64>) -> StatVector {
        StatVector {
            labels: self.labels.clone(),
            values,
        }
    }

    /// g(y).
    pub fn eval(&self, y: &CountNetwork) -> Result<StatVector> {
        self.check_shape(y)?;
        let cache = SqrtCache::build(y);
        Ok(self.stat_vector(self.eval_raw(y, &cache)))
    }

    pub(crate) fn eval_raw(&self, y: &CountNetwork, cache: &SqrtCache) -> Vec<f64> {
        self.terms.iter().map(|t| t.eval(y, cache)).collect()
    }

    /// Δ_{i,j}^{k1→k2} g(y). The stored value of (i, j) is irrelevant.
    pub fn discrete_change(
        &self,
        y: &CountNetwork,
        i: usize,
        j: usize,
        k1: u64,
        k2: u64,
    ) -> Result<StatVector> {
        self.check_shape(y)?;
        if !y.contains_dyad(i, j) {
            return Err(Error::DyadOutsideSet { i, j });
        }
        let cache = SqrtCache::build(y);
        let mut out = vec![0.0; self.len()];
        self.change_into(y, &cache, i, j, k1, k2, &mut out);
        Ok(self.stat_vector(out))
    }

    /// Change statistic against a cache built from `y`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn change_into(
        &self,
        y: &CountNetwork,
        cache: &SqrtCache,
        i: usize,
        j: usize,
        k1: u64,
        k2: u64,
        out: &mut [f64],
    ) {
        let (u, v) = if !self.directed && i > j { (j, i) } else { (i, j) };
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = if k1 == k2 {
                0.0
            } else {
                t.change(y, cache, u, v, k1, k2)
            };
        }
    }

    /// log of P(Y_ij = k2 | rest) / P(Y_ij = k1 | rest):
    /// log h_ij(k2) − log h_ij(k1) + θ·Δ^{k1→k2}.
    pub fn conditional_logratio(
        &self,
        theta: &[f64],
        y: &CountNetwork,
        i: usize,
        j: usize,
        k1: u64,
        k2: u64,
    ) -> Result<f64> {
        self.check_dimension(theta)?;
        let delta = self.discrete_change(y, i, j, k1, k2)?;
        let r = self.spec.reference;
        Ok(r.log_h(k2) - r.log_h(k1) + dot(theta, &delta.values))
    }

    pub fn check_dimension(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Constraints guaranteeing a finite normalizing constant.
    ///
    /// For the geometric reference, the per-unit coefficient of each dyad's
    /// value from the dyad-linear terms must be negative; this is the
    /// conservative set ignoring any damping from a negative CMP coefficient.
    pub fn theta_constraints(&self) -> Vec<Constraint> {
        let p = self.len();
        let mut out = Vec::new();
        let geometric = self.spec.reference == Reference::Geometric;
        for (k, (term, label)) in self.terms.iter().zip(&self.labels).enumerate() {
            match term {
                Compiled::Cmp => {
                    let upper = if geometric { 0.0 } else { 1.0 };
                    out.push(Constraint::single(p, k, label, upper, false));
                }
                Compiled::MutualProduct => out.push(Constraint::single(p, k, label, 0.0, false)),
                _ => {}
            }
        }
        if geometric {
            out.extend(self.geometric_halfspaces());
        }
        out
    }

    fn geometric_halfspaces(&self) -> Vec<Constraint> {
        let p = self.len();
        let linear: Vec<usize> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                matches!(
                    t,
                    Compiled::Sum | Compiled::Covariate(_) | Compiled::ActorSum(_)
                )
            })
            .map(|(k, _)| k)
            .collect();
        if linear.is_empty() {
            return Vec::new();
        }
        // Distinct per-dyad unit-change vectors of the linear terms.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let probe = CountNetwork::empty(self.n, self.directed);
        for (i, j) in probe.dyads() {
            let mut a = vec![0.0; p];
            for &k in &linear {
                a[k] = match &self.terms[k] {
                    Compiled::Sum => 1.0,
                    Compiled::Covariate(x) => x[i * self.n + j],
                    Compiled::ActorSum(m) => (m[i] || m[j]) as u8 as f64,
                    _ => unreachable!(),
                };
            }
            if !rows.contains(&a) {
                rows.push(a);
            }
        }
        rows.into_iter()
            .map(|coefficients| {
                let description = if linear.len() == 1 && coefficients[linear[0]] == 1.0 {
                    format!("{} < 0", self.labels[linear[0]])
                } else {
                    let parts: Vec<String> = linear
                        .iter()
                        .filter(|&&k| coefficients[k] != 0.0)
                        .map(|&k| format!("{}*{}", coefficients[k], self.labels[k]))
                        .collect();
                    format!("{} < 0", parts.join(" + "))
                };
                Constraint {
                    description,
                    coefficients,
                    upper: 0.0,
                    strict: true,
                }
            })
            .collect()
    }

    /// Errors if θ violates any constraint.
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        self.check_dimension(theta)?;
        if let Some(c) = self
            .theta_constraints()
            .iter()
            .find(|c| !c.is_satisfied(theta))
        {
            return Err(Error::OutsideParameterSpace(format!(
                "{} (value {})",
                c.description,
                c.value(theta)
            )));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// g(y) for a model specification.
pub fn eval_stats(spec: &ModelSpec, y: &CountNetwork, attrs: &NodeAttributes) -> Result<StatVector> {
    spec.compile_for(y, attrs)?.eval(y)
}

/// Δ_{i,j}^{k1→k2} g(y) for a model specification.
pub fn discrete_change(
    spec: &ModelSpec,
    y: &CountNetwork,
    attrs: &NodeAttributes,
    i: usize,
    j: usize,
    k1: u64,
    k2: u64,
) -> Result<StatVector> {
    spec.compile_for(y, attrs)?.discrete_change(y, i, j, k1, k2)
}
