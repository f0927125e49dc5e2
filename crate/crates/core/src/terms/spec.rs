use serde::{Deserialize, Serialize};

/// Source of a dyadic covariate x_ij for [`TermKind::DyadCovariate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Covariate {
    /// Explicit n×n matrix; only entries on the dyad set are read.
    Matrix { values: Vec<Vec<f64>> },
    /// |a_i − a_j| of a node attribute, negated when `negate` is set.
    AbsDiff {
        attr: String,
        #[serde(default)]
        negate: bool,
    },
    /// 1 if a_i = a_j.
    Match { attr: String },
    /// a_i + a_j.
    NodeSum { attr: String },
}

/// Actors whose incident dyad values are summed by [`TermKind::ActorSum`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorSet {
    /// A single actor, 1-based as in the data files.
    Actor(usize),
    /// Every actor whose value of this attribute is nonzero.
    Attribute(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Out,
    In,
    Undirected,
}

/// How a two-path i→k→j is valued from its two segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPath {
    Min,
    #[serde(alias = "geometric_mean")]
    GeoMean,
}

/// How the two-path values between i and j are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Max,
    Sum,
}

/// How the pooled two-path strength acts on y_ij.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affect {
    Min,
    #[serde(alias = "geometric_mean")]
    GeoMean,
}

fn default_true() -> bool {
    true
}

/// One model statistic and its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    /// Σ y_ij.
    Sum,
    /// Σ 1{y_ij > 0}.
    #[serde(alias = "nonzero")]
    NonzeroCount,
    /// Σ log(y_ij!).
    Cmp,
    /// Σ √y_ij.
    SqrtSum,
    /// Σ y_ij x_ij.
    DyadCovariate { covariate: Covariate },
    /// Σ of y_ij over dyads incident on the actor set.
    ActorSum { actors: ActorSet },
    /// Σ_{i<j} min(y_ij, y_ji).
    MutualMin,
    /// Σ_{i<j} −|y_ij − y_ji|.
    MutualNegAbsDiff,
    /// Σ_{i<j} √(y_ij y_ji), optionally centered at the mean of √y.
    MutualGeoMean {
        #[serde(default)]
        centered: bool,
    },
    /// Σ_{i<j} y_ij y_ji. Only nonpositive coefficients give a proper model.
    MutualProduct,
    /// Pooled within-actor covariance of √y over each actor's neighbor set,
    /// scaled by 1/(n−2); the uncentered variant sums √(y_ij y_ik).
    ActorCovariance {
        direction: Direction,
        #[serde(default = "default_true")]
        centered: bool,
    },
    /// Σ min(y_ij, max_k min(y_ik, y_kj)).
    TransitiveMinMax {
        #[serde(default)]
        cyclic: bool,
    },
    /// Σ affect(y_ij, combine_k two_path(y_ik, y_kj)).
    TransitiveGeneral {
        two_path: TwoPath,
        combine: Combine,
        affect: Affect,
        #[serde(default)]
        cyclic: bool,
    },
}

impl TermKind {
    /// Terms whose change statistic at (i,j) never depends on other dyads.
    pub fn is_dyad_independent(&self) -> bool {
        matches!(
            self,
            TermKind::Sum
                | TermKind::NonzeroCount
                | TermKind::Cmp
                | TermKind::SqrtSum
                | TermKind::DyadCovariate { .. }
                | TermKind::ActorSum { .. }
        )
    }

    pub fn requires_directed(&self) -> bool {
        matches!(
            self,
            TermKind::MutualMin
                | TermKind::MutualNegAbsDiff
                | TermKind::MutualGeoMean { .. }
                | TermKind::MutualProduct
        )
    }

    /// Default label used in tables and CSV headers.
    pub fn default_label(&self) -> String {
        match self {
            TermKind::Sum => "sum".into(),
            TermKind::NonzeroCount => "nonzero".into(),
            TermKind::Cmp => "CMP".into(),
            TermKind::SqrtSum => "sqrt_sum".into(),
            TermKind::DyadCovariate { covariate } => match covariate {
                Covariate::Matrix { .. } => "dyadcov".into(),
                Covariate::AbsDiff { attr, negate: false } => format!("absdiff.{attr}"),
                Covariate::AbsDiff { attr, negate: true } => format!("negabsdiff.{attr}"),
                Covariate::Match { attr } => format!("match.{attr}"),
                Covariate::NodeSum { attr } => format!("nodesum.{attr}"),
            },
            TermKind::ActorSum { actors } => match actors {
                ActorSet::Actor(a) => format!("actor_sum.{a}"),
                ActorSet::Attribute(attr) => format!("actor_sum.{attr}"),
            },
            TermKind::MutualMin => "mutual.min".into(),
            TermKind::MutualNegAbsDiff => "mutual.negabsdiff".into(),
            TermKind::MutualGeoMean { centered: false } => "mutual.geomean".into(),
            TermKind::MutualGeoMean { centered: true } => "mutual.geomean.centered".into(),
            TermKind::MutualProduct => "mutual.product".into(),
            TermKind::ActorCovariance { direction, centered } => {
                let d = match direction {
                    Direction::Out => "out",
                    Direction::In => "in",
                    Direction::Undirected => "undirected",
                };
                if *centered {
                    format!("actorcov.{d}")
                } else {
                    format!("actorcov.{d}.uncentered")
                }
            }
            TermKind::TransitiveMinMax { cyclic: false } => "transitive".into(),
            TermKind::TransitiveMinMax { cyclic: true } => "cyclic".into(),
            TermKind::TransitiveGeneral {
                two_path,
                combine,
                affect,
                cyclic,
            } => format!(
                "{}({:?},{:?},{:?})",
                if *cyclic { "cyclic" } else { "transitive" },
                two_path,
                combine,
                affect
            )
            .to_lowercase(),
        }
    }
}

/// A term with an optional display label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    #[serde(flatten)]
    pub kind: TermKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TermSpec {
    pub fn new(kind: TermKind) -> Self {
        TermSpec { kind, label: None }
    }

    pub fn labeled(kind: TermKind, label: impl Into<String>) -> Self {
        TermSpec {
            kind,
            label: Some(label.into()),
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.default_label())
    }
}

impl From<TermKind> for TermSpec {
    fn from(kind: TermKind) -> Self {
        TermSpec::new(kind)
    }
}

/// The reference measure h: Poisson h(y) = Π 1/y_ij!, geometric h(y) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Poisson,
    Geometric,
}

impl Reference {
    /// log h_ij(k).
    #[inline]
    pub fn log_h(self, k: u64) -> f64 {
        match self {
            Reference::Poisson => -crate::special::log_factorial(k),
            Reference::Geometric => 0.0,
        }
    }
}

/// Ordered terms plus a reference measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub reference: Reference,
}

impl ModelSpec {
    pub fn new(terms: Vec<TermSpec>, reference: Reference) -> Self {
        ModelSpec { terms, reference }
    }

    /// Poisson-reference model from bare term kinds.
    pub fn poisson(kinds: impl IntoIterator<Item = TermKind>) -> Self {
        ModelSpec {
            terms: kinds.into_iter().map(TermSpec::new).collect(),
            reference: Reference::Poisson,
        }
    }

    pub fn geometric(kinds: impl IntoIterator<Item = TermKind>) -> Self {
        ModelSpec {
            terms: kinds.into_iter().map(TermSpec::new).collect(),
            reference: Reference::Geometric,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(TermSpec::label).collect()
    }

    /// Position of the term with this label.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label() == label)
    }
}
