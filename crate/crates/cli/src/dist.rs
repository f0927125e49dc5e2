//! `dist`: single-dyad pmf tables for plotting.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use countergm::distributions::{sqrt_model, sqrt_model_tune, zmp_ln_pmf, CmpParams, SeriesPmf};
use countergm::special::log_factorial;
use serde_json::json;

use crate::output::{csv_string, json_string, table_string, write_file, Format};

fn parse_params(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    for kv in s.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{kv}`"))?;
        let v: f64 = v.trim().parse().map_err(|_| anyhow!("bad number in `{kv}`"))?;
        m.insert(k.trim().to_string(), v);
    }
    Ok(m)
}

/// Builds the distribution named by `family:key=value,...`.
pub fn column(spec: &str) -> Result<SeriesPmf> {
    let (family, params) = spec.split_once(':').unwrap_or((spec, ""));
    let p = parse_params(params)?;
    let get = |k: &str| p.get(k).copied().ok_or_else(|| anyhow!("`{spec}`: missing parameter `{k}`"));
    let allowed: &[&str] = match family {
        "poisson" => &["mean"],
        "geometric" => &["mean", "p"],
        "zmp" | "cmp" => &["theta1", "theta2"],
        "sqrt" => &["theta1", "theta2", "mean"],
        _ => bail!("unknown family `{family}` (poisson, geometric, zmp, cmp, sqrt)"),
    };
    if let Some(k) = p.keys().find(|k| !allowed.contains(&k.as_str())) {
        bail!("`{spec}`: unknown parameter `{k}`");
    }
    Ok(match family {
        "poisson" => {
            let mu = get("mean")?;
            if !(mu > 0.0) {
                bail!("`{spec}`: mean must be positive");
            }
            SeriesPmf::new(|x| x as f64 * mu.ln() - log_factorial(x))?
        }
        "geometric" => {
            let q = match p.get("p") {
                Some(&pr) => 1.0 - pr,
                None => {
                    let m = get("mean")?;
                    m / (1.0 + m)
                }
            };
            if !(q > 0.0 && q < 1.0) {
                bail!("`{spec}`: needs 0 < p < 1 or a positive mean");
            }
            SeriesPmf::new(|x| x as f64 * q.ln())?
        }
        "zmp" => {
            let (t1, t2) = (get("theta1")?, get("theta2")?);
            SeriesPmf::new(|x| zmp_ln_pmf(t1, t2, x))?
        }
        "cmp" => CmpParams::new(get("theta1")?, get("theta2")?).series()?,
        "sqrt" => {
            let t1 = get("theta1")?;
            let t2 = match p.get("theta2") {
                Some(&t2) => t2,
                None => sqrt_model_tune(t1, get("mean")?)?,
            };
            sqrt_model(t1, t2)?
        }
        _ => unreachable!(),
    })
}

pub fn cmd_dist(columns: &[String], max: u64, out: &Path, format: Format) -> Result<u8> {
    let dists = columns.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;
    let mut header = vec!["y".to_string()];
    header.extend(columns.iter().cloned());
    let rows: Vec<Vec<String>> = (0..=max)
        .map(|x| {
            let mut r = vec![x.to_string()];
            r.extend(dists.iter().map(|d| d.pmf(x).to_string()));
            r
        })
        .collect();
    let csv = csv_string(&header, &rows)?;
    write_file(out, "dist.csv", &csv)?;
    let json = json_string(&json!(columns
        .iter()
        .zip(&dists)
        .map(|(c, d)| json!({
            "column": c,
            "mean": d.mean(),
            "variance": d.variance(),
            "pmf": (0..=max).map(|x| d.pmf(x)).collect::<Vec<_>>(),
        }))
        .collect::<Vec<_>>()))?;
    let fmt_rows: Vec<Vec<String>> = (0..=max)
        .map(|x| {
            let mut r = vec![x.to_string()];
            r.extend(dists.iter().map(|d| format!("{:.6}", d.pmf(x))));
            r
        })
        .chain([
            std::iter::once("mean".to_string())
                .chain(dists.iter().map(|d| format!("{:.6}", d.mean())))
                .collect(),
            std::iter::once("variance".to_string())
                .chain(dists.iter().map(|d| format!("{:.6}", d.variance())))
                .collect(),
        ])
        .collect();
    let table = table_string(&header, &fmt_rows);
    print!(
        "{}",
        match format {
            Format::Table => table,
            Format::Csv => csv,
            Format::Json => json,
        }
    );
    Ok(0)
}
