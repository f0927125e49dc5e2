//! Bundled example data and the model sets fitted to them.
//!
//! The karate club counts ship with the crate (see `data/PROVENANCE.md`).
//! The fraternity counts are not redistributable here; [`fraternity`] reads
//! them from `data/fraternity.edges` when a user has placed the file there.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::network::{parse_attributes, parse_edge_list, CountNetwork, NodeAttributes};
use crate::terms::{ActorSet, Affect, Combine, Covariate, Direction, ModelSpec, TermKind, TwoPath};

pub const KARATE_EDGES: &str = include_str!("../data/karate.edges");
pub const KARATE_ATTRS: &str = include_str!("../data/karate.attrs");
pub const KARATE_N: usize = 34;
pub const FRATERNITY_N: usize = 58;

/// Zachary's karate club: undirected counts of shared interaction contexts,
/// with node attributes `faction` (−2..2), `hi`, `john` and `club`.
pub fn karate() -> (CountNetwork, NodeAttributes) {
    let y = parse_edge_list(KARATE_EDGES, KARATE_N, false).expect("bundled karate edges parse");
    let a = parse_attributes(KARATE_ATTRS).expect("bundled karate attributes parse");
    (y, a)
}

/// Default location of the optional fraternity edge list.
pub fn fraternity_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fraternity.edges")
}

/// The fraternity conversation counts (58 actors, undirected), if present.
pub fn fraternity() -> Option<Result<CountNetwork>> {
    let path = fraternity_path();
    if !path.exists() {
        return None;
    }
    Some(
        std::fs::read_to_string(&path)
            .map_err(Into::into)
            .and_then(|t| parse_edge_list(&t, FRATERNITY_N, false)),
    )
}

fn karate_baseline() -> Vec<TermKind> {
    vec![
        TermKind::Cmp,
        TermKind::NonzeroCount,
        TermKind::Sum,
        TermKind::ActorSum {
            actors: ActorSet::Attribute("hi".into()),
        },
        TermKind::ActorSum {
            actors: ActorSet::Attribute("john".into()),
        },
    ]
}

fn faction() -> TermKind {
    TermKind::DyadCovariate {
        covariate: Covariate::AbsDiff {
            attr: "faction".into(),
            negate: true,
        },
    }
}

/// "faction", "transitivity" or "full": the karate model sets.
pub fn karate_model(name: &str) -> Option<ModelSpec> {
    let mut t = karate_baseline();
    match name {
        "faction" => t.push(faction()),
        "transitivity" => t.push(TermKind::TransitiveMinMax { cyclic: false }),
        "full" => {
            t.push(faction());
            t.push(TermKind::TransitiveMinMax { cyclic: false });
        }
        _ => return None,
    }
    Some(ModelSpec::poisson(t))
}

pub fn heterogeneity() -> TermKind {
    TermKind::ActorCovariance {
        direction: Direction::Undirected,
        centered: true,
    }
}

/// "b", "bh", "bt" or "bht": the fraternity model sets.
pub fn fraternity_model(name: &str) -> Option<ModelSpec> {
    let mut t = vec![TermKind::NonzeroCount, TermKind::Sum, TermKind::SqrtSum];
    let name = name.to_ascii_lowercase();
    match name.as_str() {
        "b" => {}
        "bh" => t.push(heterogeneity()),
        "bt" => t.push(TermKind::TransitiveMinMax { cyclic: false }),
        "bht" => {
            t.push(heterogeneity());
            t.push(TermKind::TransitiveMinMax { cyclic: false });
        }
        _ => return None,
    }
    Some(ModelSpec::poisson(t))
}

/// The less conservative triadic statistic: geometric-mean two-paths,
/// summed, acting on y_ij through a geometric mean.
pub fn geometric_transitivity() -> TermKind {
    TermKind::TransitiveGeneral {
        two_path: TwoPath::GeoMean,
        combine: Combine::Sum,
        affect: Affect::GeoMean,
        cyclic: false,
    }
}
