//! Count-valued networks over a fixed dyad set.
//!
//! Actors are indexed from 0 in the API. The text formats read and written by
//! [`parse_edge_list`] and [`CountNetwork::to_edge_list_string`] use 1-based
//! indices.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dyad values in ℕ₀ over all ordered (directed) or unordered (undirected)
/// pairs of distinct actors. Dyads never set read as 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountNetwork {
    n: usize,
    directed: bool,
    // Dense n×n; undirected networks keep both halves in sync.
    values: Vec<u64>,
}

impl CountNetwork {
    /// All-zero network.
    pub fn empty(n: usize, directed: bool) -> Self {
        CountNetwork {
            n,
            directed,
            values: vec![0; n * n],
        }
    }

    /// Builds a network from `(i, j, value)` rows with 0-based actor indices.
    /// Unlisted dyads are 0; listing a dyad twice (in either orientation for
    /// undirected networks) is an error.
    pub fn from_weighted_edge_list(
        rows: &[(usize, usize, i64)],
        n: usize,
        directed: bool,
    ) -> Result<Self> {
        let mut net = CountNetwork::empty(n, directed);
        let mut seen = HashSet::with_capacity(rows.len());
        for &(i, j, value) in rows {
            net.check_dyad(i, j)?;
            if value < 0 {
                return Err(Error::NegativeValue { i, j, value });
            }
            let key = net.canonical(i, j);
            if !seen.insert(key) {
                return Err(Error::DuplicateDyad { i, j });
            }
            net.put(i, j, value as u64);
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// |𝕐|: n(n−1) ordered pairs, or n(n−1)/2 unordered ones.
    pub fn num_dyads(&self) -> usize {
        if self.directed {
            self.n * self.n.saturating_sub(1)
        } else {
            self.n * self.n.saturating_sub(1) / 2
        }
    }

    /// Whether `(i, j)` belongs to the dyad set.
    pub fn contains_dyad(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i != j
    }

    fn check_dyad(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if j >= self.n {
            return Err(Error::IndexOutOfRange { index: j, n: self.n });
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    fn canonical(&self, i: usize, j: usize) -> (usize, usize) {
        if self.directed || i < j {
            (i, j)
        } else {
            (j, i)
        }
    }

    #[inline]
    fn put(&mut self, i: usize, j: usize, k: u64) {
        self.values[i * self.n + j] = k;
        if !self.directed {
            self.values[j * self.n + i] = k;
        }
    }

    /// Value of dyad `(i, j)`.
    pub fn value(&self, i: usize, j: usize) -> Result<u64> {
        if !self.contains_dyad(i, j) {
            return Err(Error::DyadOutsideSet { i, j });
        }
        Ok(self.get(i, j))
    }

    /// Unchecked read used on hot paths. The diagonal reads as 0.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.values[i * self.n + j]
    }

    /// Sets dyad `(i, j)` to `k`.
    pub fn set_value(&mut self, i: usize, j: usize, k: u64) -> Result<()> {
        if !self.contains_dyad(i, j) {
            return Err(Error::DyadOutsideSet { i, j });
        }
        self.put(i, j, k);
        Ok(())
    }

    /// Copy of `self` with dyad `(i, j)` set to `k`.
    pub fn with_value(&self, i: usize, j: usize, k: u64) -> Result<Self> {
        let mut out = self.clone();
        out.set_value(i, j, k)?;
        Ok(out)
    }

    #[inline]
    pub(crate) fn set_unchecked(&mut self, i: usize, j: usize, k: u64) {
        self.put(i, j, k);
    }

    /// The `idx`-th dyad in the fixed iteration order: row-major over ordered
    /// pairs for directed networks, `i < j` pairs row-major otherwise.
    pub fn dyad_at(&self, idx: usize) -> (usize, usize) {
        let n = self.n;
        if self.directed {
            let i = idx / (n - 1);
            let r = idx % (n - 1);
            (i, if r >= i { r + 1 } else { r })
        } else {
            // Row i holds n−1−i pairs.
            let mut i = 0;
            let mut rest = idx;
            while rest >= n - 1 - i {
                rest -= n - 1 - i;
                i += 1;
            }
            (i, i + 1 + rest)
        }
    }

    /// Iterates the dyad set in the fixed order.
    pub fn dyads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        let directed = self.directed;
        (0..n).flat_map(move |i| {
            let start = if directed { 0 } else { i + 1 };
            (start..n).filter(move |&j| j != i).map(move |j| (i, j))
        })
    }

    /// Iterates `(i, j, y_ij)` over the dyad set.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.dyads().map(move |(i, j)| (i, j, self.get(i, j)))
    }

    /// Iterates the nonzero dyads only.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.iter().filter(|&(_, _, v)| v > 0)
    }

    /// Actors `i` may send ties to: every other actor.
    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        let n = self.n;
        (0..n).filter(move |&j| j != i)
    }

    /// Weighted edge list text, 1-based, nonzero dyads only.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# n={} directed={}",
            self.n,
            if self.directed { "true" } else { "false" }
        );
        for (i, j, v) in self.iter_nonzero() {
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, v);
        }
        out
    }

    /// Descriptive summary of the dyad values.
    pub fn summary(&self) -> Result<Summary> {
        if self.n < 2 {
            return Err(Error::TooFewActors { n: self.n, min: 2 });
        }
        let m = self.num_dyads() as f64;
        let (mut total, mut nonzero, mut sq) = (0.0, 0usize, 0.0);
        for (_, _, v) in self.iter_nonzero() {
            let v = v as f64;
            total += v;
            sq += v * v;
            nonzero += 1;
        }
        let mean = total / m;
        let var = (sq / m - mean * mean).max(0.0);

        // Pooled within-actor variance over each actor's row of n−1 values.
        let n = self.n;
        let mut within = 0.0;
        for i in 0..n {
            let row: Vec<f64> = self.out_neighbors(i).map(|j| self.get(i, j) as f64).collect();
            let rm = row.iter().sum::<f64>() / row.len() as f64;
            within += row.iter().map(|v| (v - rm) * (v - rm)).sum::<f64>();
        }
        let df = (n * (n - 1) - n).max(1) as f64;
        Ok(Summary {
            mean_value: mean,
            nonzero_density: nonzero as f64 / m,
            sd_value: var.sqrt(),
            within_actor_sd: (within / df).sqrt(),
        })
    }
}

/// Output of [`CountNetwork::summary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_value: f64,
    pub nonzero_density: f64,
    /// Standard deviation of the dyad values (divisor |𝕐|).
    pub sd_value: f64,
    /// Square root of the pooled within-actor variance (divisor n(n−2)).
    pub within_actor_sd: f64,
}

/// Named numeric attribute vectors, one value per actor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeAttributes {
    n: usize,
    columns: BTreeMap<String, Vec<f64>>,
}

impl NodeAttributes {
    pub fn new(n: usize) -> Self {
        NodeAttributes {
            n,
            columns: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n {
            return Err(Error::AttributeLength {
                name,
                len: values.len(),
                n: self.n,
            });
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    }
}

/// Parses `i j value` lines (1-based indices, `#` comments) into 0-based rows.
pub fn parse_edge_rows(text: &str) -> Result<Vec<(usize, usize, i64)>> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected `i j value`, got {} fields", fields.len())));
        }
        let idx = |s: &str| -> Result<usize> {
            let v: i64 = s.parse().map_err(|_| err(format!("bad index `{s}`")))?;
            if v < 1 {
                return Err(err(format!("index {v} is below 1")));
            }
            Ok(v as usize - 1)
        };
        let i = idx(fields[0])?;
        let j = idx(fields[1])?;
        let value: i64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad value `{}`", fields[2])))?;
        rows.push((i, j, value));
    }
    Ok(rows)
}

/// Parses a weighted edge list into a network with `n` actors.
pub fn parse_edge_list(text: &str, n: usize, directed: bool) -> Result<CountNetwork> {
    let rows = parse_edge_rows(text)?;
    CountNetwork::from_weighted_edge_list(&rows, n, directed).map_err(|e| match e {
        // Report indices 1-based, as in the file.
        Error::IndexOutOfRange { index, n } => Error::IndexOutOfRange { index: index + 1, n },
        Error::SelfLoop(i) => Error::SelfLoop(i + 1),
        Error::DuplicateDyad { i, j } => Error::DuplicateDyad { i: i + 1, j: j + 1 },
        Error::NegativeValue { i, j, value } => Error::NegativeValue {
            i: i + 1,
            j: j + 1,
            value,
        },
        other => other,
    })
}

/// Parses an attribute table: a header of names, then one whitespace-separated
/// row per actor.
pub fn parse_attributes(text: &str) -> Result<NodeAttributes> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, strip_comment(l).trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let names: Vec<String> = header.split_whitespace().map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} fields, got {}", names.len(), fields.len()),
            });
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(f.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad number `{f}`"),
            })?);
        }
    }
    let n = cols.first().map_or(0, Vec::len);
    let mut attrs = NodeAttributes::new(n);
    for (name, col) in names.into_iter().zip(cols) {
        attrs.insert(name, col)?;
    }
    Ok(attrs)
}
