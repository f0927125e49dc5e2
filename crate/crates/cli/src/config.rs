//! Run configuration: a TOML document naming the data files, the model and
//! optional fitting, simulation and testing settings.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use countergm::network::{parse_attributes, parse_edge_list};
use countergm::{CountNetwork, FitControl, Model, ModelSpec, NodeAttributes, Reference, TermKind, TermSpec};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    data: DataSection,
    model: ModelSection,
    #[serde(default)]
    fit: Option<toml::Table>,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    test: Option<TestSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    network: PathBuf,
    #[serde(default)]
    attributes: Option<PathBuf>,
    nodes: usize,
    #[serde(default)]
    directed: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    #[serde(default)]
    reference: Reference,
    terms: Vec<toml::Value>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Coefficients to simulate at, in term order.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Number of retained draws; defaults to the sampler's `draws`.
    #[serde(default)]
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestSection {
    statistic: toml::Value,
    #[serde(default = "default_nsim")]
    nsim: usize,
}

fn default_nsim() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mcmle,
    Mom,
}

pub struct TestSettings {
    pub statistic: TermSpec,
    pub nsim: usize,
}

/// A loaded, validated configuration.
pub struct RunConfig {
    pub path: PathBuf,
    /// SHA-256 of the configuration file bytes.
    pub hash: String,
    pub network: CountNetwork,
    pub attrs: NodeAttributes,
    pub spec: ModelSpec,
    pub model: Model,
    pub control: FitControl,
    pub method: Method,
    pub theta0: Option<Vec<f64>>,
    pub simulate: SimulateSection,
    pub test: Option<TestSettings>,
    pub directed: bool,
    pub nodes: usize,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn term(value: &toml::Value, at: &str) -> Result<TermSpec> {
    TermSpec::deserialize(value.clone()).map_err(|e| anyhow!("{at}: {}", e.message()))
}

/// Overlays `user` onto `base`, recursing into tables.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn read_network(path: &Path, nodes: usize, directed: bool) -> Result<CountNetwork> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_edge_list(&text, nodes, directed).with_context(|| format!("parsing {}", path.display()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let hash = format!("{:x}", Sha256::digest(&bytes));
        let text = String::from_utf8(bytes).context("config is not UTF-8")?;
        let file: File = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));

        let d = &file.data;
        let network = read_network(&resolve(base, &d.network), d.nodes, d.directed)?;
        let attrs = match &d.attributes {
            Some(p) => {
                let p = resolve(base, p);
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                let a = parse_attributes(&text).with_context(|| format!("parsing {}", p.display()))?;
                if a.n() != d.nodes {
                    bail!("{}: {} rows but data.nodes = {}", p.display(), a.n(), d.nodes);
                }
                a
            }
            None => NodeAttributes::new(d.nodes),
        };

        let terms = file
            .model
            .terms
            .iter()
            .enumerate()
            .map(|(k, v)| term(v, &format!("model.terms[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let spec = ModelSpec::new(terms, file.model.reference);
        let model = spec
            .compile_for(&network, &attrs)
            .context("compiling the model")?;

        let mut control = FitControl::for_network(&network);
        let mut method = Method::Mcmle;
        let mut theta0 = None;
        if let Some(mut table) = file.fit {
            if let Some(m) = table.remove("method") {
                method = match m.as_str() {
                    Some("mcmle") => Method::Mcmle,
                    Some("mom") => Method::Mom,
                    _ => bail!("fit.method must be \"mcmle\" or \"mom\", got {m}"),
                };
            }
            if let Some(t) = table.remove("theta0") {
                theta0 = Some(Vec::<f64>::deserialize(t).map_err(|e| anyhow!("fit.theta0: {}", e.message()))?);
            }
            let toml::Value::Table(mut merged) = toml::Value::try_from(&control)? else {
                unreachable!("FitControl serializes to a table")
            };
            merge(&mut merged, table);
            control = FitControl::deserialize(toml::Value::Table(merged))
                .map_err(|e| anyhow!("fit: {}", e.message()))?;
        }
        control.validate()?;

        let test = match file.test {
            Some(t) => Some(TestSettings {
                statistic: term(&t.statistic, "test.statistic")?,
                nsim: t.nsim,
            }),
            None => None,
        };

        Ok(RunConfig {
            path: path.to_path_buf(),
            hash,
            network,
            attrs,
            spec,
            model,
            control,
            method,
            theta0,
            simulate: file.simulate,
            test,
            directed: d.directed,
            nodes: d.nodes,
        })
    }

    /// Warnings about model choices that are legal but risky.
    pub fn warnings(&self) -> Vec<String> {
        self.spec
            .terms
            .iter()
            .filter(|t| matches!(t.kind, TermKind::MutualProduct))
            .map(|t| {
                format!(
                    "term `{}` defines a proper model only for nonpositive coefficients; \
                     prefer mutual.min or mutual.geomean",
                    t.label()
                )
            })
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.control.sampler.seed
    }
}
