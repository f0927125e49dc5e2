// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod dist;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use countergm::inference::diagnostics;
use countergm::sampler::{sample_chains, sample_observed};
use countergm::{mcmc_mle, mom_fit, monte_carlo_test, FitResult, FitStatus, SamplerControl};
use serde_json::json;

use config::{Method, RunConfig};
use output::{csv_string, json_string, table_string, write_file, Format};

/// Exit status for fits that stop without a usable estimate.
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "countergm", version, about = "Exponential-family random graph models for count-valued networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel chains (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for result files.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Format of the report printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Mcmle,
    Mom,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured model to the observed network.
    Fit {
        /// Estimation method; overrides `fit.method`.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Simulate networks from the model and record their statistics.
    Simulate {
        /// Coefficients, comma-separated, in term order.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        /// Take θ from a fit.json written by `fit`.
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Number of retained draws.
        #[arg(long)]
        draws: Option<usize>,
        /// Also write every retained network as an edge list.
        #[arg(long)]
        networks: bool,
    },
    /// Monte Carlo test of `test.statistic` against the configured model.
    Test {
        /// Number of simulated networks; overrides `test.nsim`.
        #[arg(long)]
        nsim: Option<usize>,
    },
    /// Run chains at θ and report mixing and moment diagnostics.
    Diagnose {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        #[arg(long)]
        fit: Option<PathBuf>,
    },
    /// Tabulate single-dyad pmfs, e.g. `poisson:mean=2 geometric:mean=2
    /// zmp:theta1=0.7,theta2=0 cmp:theta1=1,theta2=-0.5 sqrt:theta1=-1,mean=1`.
    Dist {
        #[arg(required = true)]
        columns: Vec<String>,
        /// Largest value tabulated.
        #[arg(long, default_value_t = 20)]
        max: u64,
    },
    /// Summaries and model statistics of the observed (or another) network.
    Summary {
        /// Evaluate this edge list instead of the configured network.
        #[arg(long)]
        network: Option<PathBuf>,
    },
}

struct Ctx {
    out: PathBuf,
    format: Format,
}

impl Ctx {
    fn print(&self, table: String, csv: String, json: String) {
        print!(
            "{}",
            match self.format {
                Format::Table => table,
                Format::Csv => csv,
                Format::Json => json,
            }
        );
    }
}

fn provenance(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "config": cfg.path.display().to_string(),
        "config_sha256": cfg.hash,
        "seed": cfg.seed(),
    })
}

fn banner(cfg: &RunConfig) -> String {
    format!(
        "# config {} (sha256 {}) seed {}\n",
        cfg.path.display(),
        &cfg.hash[..16],
        cfg.seed()
    )
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("--config is required for this command"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.control.sampler.seed = seed;
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run_fit(cfg: &RunConfig, method: Method) -> Result<FitResult> {
    let theta0 = cfg.theta0.as_deref();
    Ok(match method {
        Method::Mcmle => mcmc_mle(&cfg.model, &cfg.network, theta0, &cfg.control)?,
        Method::Mom => mom_fit(&cfg.model, &cfg.network, theta0, &cfg.control)?,
    })
}

fn status_text(s: &FitStatus) -> String {
    match s {
        FitStatus::Converged => "converged".into(),
        FitStatus::NotConverged => "not converged".into(),
        FitStatus::Boundary { constraint } => format!("stopped at the parameter-space boundary ({constraint})"),
        FitStatus::Degenerate { statistic } => format!("aborted: degenerate (bimodal) distribution of {statistic}"),
    }
}

fn cmd_fit(cfg: &RunConfig, ctx: &Ctx, method: Method) -> Result<u8> {
    let fit = run_fit(cfg, method)?;
    let (h, rows) = output::fit_rows(&fit);
    let fit_csv = csv_string(&h, &rows)?;
    let fit_json = json_string(&json!({
        "provenance": provenance(cfg),
        "result": &fit,
    }))?;
    write_file(&ctx.out, "fit.csv", &fit_csv)?;
    write_file(&ctx.out, "fit.json", &fit_json)?;
    if let Some(d) = &fit.diagnostics {
        let (dh, drows) = output::diagnostics_rows(d);
        write_file(&ctx.out, "diagnostics.csv", &csv_string(&dh, &drows)?)?;
    }
    let mut table = banner(cfg);
    table.push_str(&format!(
        "# method {}, {} iterations, {}; final moment discrepancy {:.3}\n",
        fit.method,
        fit.iterations,
        status_text(&fit.status),
        fit.discrepancy
    ));
    let shown: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r[0].clone(), r[1].clone(), format!("({})", r[2]), r[4].clone(), r[5].clone()])
        .collect();
    table.push_str(&table_string(
        &["term", "estimate", "(s.e.)", "z", ""].map(String::from),
        &shown,
    ));
    table.push_str("* significant at α = 0.05 (Wald); s.e. includes Monte Carlo error\n");
    ctx.print(table, fit_csv, fit_json);
    if fit.converged {
        Ok(0)
    } else {
        eprintln!("error: fit {}", status_text(&fit.status));
        Ok(EXIT_NOT_CONVERGED)
    }
}

/// θ from the command line, a fit.json, or the configuration, in that order.
fn resolve_theta(cfg: &RunConfig, theta: Option<Vec<f64>>, fit: Option<&Path>) -> Result<Vec<f64>> {
    let theta = if let Some(t) = theta {
        t
    } else if let Some(p) = fit {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        if v.pointer("/provenance/config_sha256").and_then(|h| h.as_str()) != Some(cfg.hash.as_str()) {
            eprintln!("warning: {} was produced from a different configuration", p.display());
        }
        serde_json::from_value(v.pointer("/result/theta_hat").cloned().unwrap_or_default())
            .with_context(|| format!("{} has no result.theta_hat", p.display()))?
    } else if let Some(t) = &cfg.simulate.theta {
        t.clone()
    } else {
        bail!("no coefficients: pass --theta, --fit, or set simulate.theta");
    };
    cfg.model.check_theta(&theta)?;
    Ok(theta)
}

fn cmd_simulate(cfg: &RunConfig, ctx: &Ctx, theta: Vec<f64>, draws: Option<usize>, networks: bool) -> Result<u8> {
    let control = SamplerControl {
        draws: draws.or(cfg.simulate.draws).unwrap_or(cfg.control.sampler.draws),
        ..cfg.control.sampler
    };
    let net_dir = ctx.out.join("networks");
    let mut write_err = None;
    let batch = sample_observed(&cfg.model, &theta, &cfg.network, &control, |s, y| {
        if networks && write_err.is_none() {
            if let Err(e) = write_file(&net_dir, &format!("draw_{:06}.edges", s + 1), &y.to_edge_list_string()) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let labels = cfg.model.labels().to_vec();
    let rows: Vec<Vec<String>> = batch
        .stats
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect();
    let stats_csv = csv_string(&labels, &rows)?;
    write_file(&ctx.out, "simulate.csv", &stats_csv)?;
    let means: Vec<f64> = (0..labels.len())
        .map(|k| batch.column(k).iter().sum::<f64>() / batch.len() as f64)
        .collect();
    let meta = json!({
        "provenance": provenance(cfg),
        "theta": theta,
        "control": control,
        "draws": batch.len(),
        "acceptance_rate": batch.acceptance_rate,
        "labels": labels,
        "mean": means,
    });
    let meta_json = json_string(&meta)?;
    write_file(&ctx.out, "simulate.json", &meta_json)?;
    let obs = cfg.model.eval(&cfg.network)?.values;
    let mut table = banner(cfg);
    table.push_str(&format!(
        "# {} draws, acceptance rate {:.3}\n",
        batch.len(),
        batch.acceptance_rate
    ));
    let trows: Vec<Vec<String>> = (0..labels.len())
        .map(|k| {
            let col = batch.column(k);
            let m = means[k];
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (col.len().max(2) - 1) as f64).sqrt();
            vec![labels[k].clone(), format!("{:.4}", theta[k]), format!("{m:.4}"), format!("{sd:.4}"), format!("{:.4}", obs[k])]
        })
        .collect();
    table.push_str(&table_string(
        &["statistic", "theta", "mean", "sd", "observed"].map(String::from),
        &trows,
    ));
    ctx.print(table, stats_csv, meta_json);
    Ok(0)
}

fn cmd_test(cfg: &RunConfig, ctx: &Ctx, nsim: Option<usize>) -> Result<u8> {
    let Some(test) = &cfg.test else {
        eprintln!("error: the configuration has no [test] section");
        return Ok(EXIT_USAGE);
    };
    let stat = &test.statistic;
    if cfg.spec.terms.iter().any(|t| t.kind == stat.kind || t.label() == stat.label()) {
        eprintln!("error: test statistic `{}` is already in the null model", stat.label());
        return Ok(EXIT_USAGE);
    }
    let nsim = nsim.unwrap_or(test.nsim);
    let null_fit = run_fit(cfg, cfg.method)?;
    if !null_fit.converged {
        eprintln!("error: null model fit {}", status_text(&null_fit.status));
        return Ok(EXIT_NOT_CONVERGED);
    }
    let r = monte_carlo_test(&cfg.spec, &null_fit, stat, &cfg.network, &cfg.attrs, nsim, &cfg.control)?;
    let report = json!({
        "provenance": provenance(cfg),
        "statistic": r.statistic,
        "observed": r.observed,
        "nsim": r.nsim,
        "quantiles": { "q05": r.quantiles[0], "median": r.quantiles[1], "q95": r.quantiles[2] },
        "p_value": r.p_value,
        "null_theta": null_fit.theta_hat,
        "null_labels": null_fit.labels,
    });
    let report_json = json_string(&report)?;
    write_file(&ctx.out, "test.json", &report_json)?;
    write_file(
        &ctx.out,
        "test_simulated.csv",
        &csv_string(std::slice::from_ref(&r.statistic), &r.simulated.iter().map(|v| vec![v.to_string()]).collect::<Vec<_>>())?,
    )?;
    let h = ["statistic", "observed", "nsim", "q05", "median", "q95", "p_value"].map(String::from);
    let row = vec![vec![
        r.statistic.clone(),
        format!("{:.4}", r.observed),
        r.nsim.to_string(),
        format!("{:.4}", r.quantiles[0]),
        format!("{:.4}", r.quantiles[1]),
        format!("{:.4}", r.quantiles[2]),
        format!("{:.4}", r.p_value),
    ]];
    let mut table = banner(cfg);
    table.push_str("# one-sided Monte Carlo test: P(g ≥ observed) under the fitted null\n");
    table.push_str(&table_string(&h, &row));
    ctx.print(table, csv_string(&h, &row)?, report_json);
    Ok(0)
}

fn cmd_diagnose(cfg: &RunConfig, ctx: &Ctx, theta: Vec<f64>) -> Result<u8> {
    let starts = vec![cfg.network.clone(); cfg.control.chains];
    let chains = sample_chains(&cfg.model, &theta, &starts, &cfg.control.sampler)?;
    let obs = cfg.model.eval(&cfg.network)?.values;
    let report = diagnostics(&chains, &obs);
    let (h, rows) = output::diagnostics_rows(&report);
    let diag_csv = csv_string(&h, &rows)?;
    write_file(&ctx.out, "diagnostics.csv", &diag_csv)?;
    let mut th = vec!["chain".to_string(), "draw".to_string()];
    th.extend(cfg.model.labels().iter().cloned());
    let trace: Vec<Vec<String>> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, b)| {
            b.stats.iter().enumerate().map(move |(s, r)| {
                let mut row = vec![c.to_string(), s.to_string()];
                row.extend(r.iter().map(|v| v.to_string()));
                row
            })
        })
        .collect();
    write_file(&ctx.out, "trace.csv", &csv_string(&th, &trace)?)?;
    let diag_json = json_string(&json!({
        "provenance": provenance(cfg),
        "theta": theta,
        "report": report,
    }))?;
    write_file(&ctx.out, "diagnose.json", &diag_json)?;
    let mut table = banner(cfg);
    table.push_str(&format!(
        "# {} chains, {} draws, acceptance rate {:.3}\n",
        report.chains, report.draws, report.acceptance_rate
    ));
    let keep = [0, 1, 2, 3, 9, 10, 11, 12];
    let short = |r: &Vec<String>| keep.iter().map(|&k| r[k].clone()).collect::<Vec<_>>();
    table.push_str(&table_string(&short(&h), &rows.iter().map(short).collect::<Vec<_>>()));
    if report.any_bimodal() {
        table.push_str("! bimodal statistic: the model may be near-degenerate at this θ\n");
    }
    ctx.print(table, diag_csv, diag_json);
    Ok(0)
}

fn cmd_summary(cfg: &RunConfig, ctx: &Ctx, network: Option<&Path>) -> Result<u8> {
    let y = match network {
        Some(p) => config::read_network(p, cfg.nodes, cfg.directed)?,
        None => cfg.network.clone(),
    };
    let s = y.summary()?;
    let stats = cfg.model.eval(&y)?;
    let mut rows = vec![
        vec!["mean_value".to_string(), s.mean_value.to_string()],
        vec!["nonzero_density".to_string(), s.nonzero_density.to_string()],
        vec!["sd_value".to_string(), s.sd_value.to_string()],
        vec!["within_actor_sd".to_string(), s.within_actor_sd.to_string()],
    ];
    for (l, v) in stats.labels.iter().zip(&stats.values) {
        rows.push(vec![format!("g.{l}"), v.to_string()]);
    }
    let h = ["quantity", "value"].map(String::from);
    let json = json_string(&json!({
        "provenance": provenance(cfg),
        "summary": s,
        "statistics": stats.labels.iter().zip(&stats.values).collect::<Vec<_>>(),
    }))?;
    let mut table = banner(cfg);
    table.push_str(&table_string(&h, &rows));
    ctx.print(table, csv_string(&h, &rows)?, json);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = Ctx {
        out: cli.output_dir.clone(),
        format: cli.format,
    };
    match &cli.command {
        Command::Fit { method } => {
            let cfg = load(&cli)?;
            let m = match method {
                Some(MethodArg::Mcmle) => Method::Mcmle,
                Some(MethodArg::Mom) => Method::Mom,
                None => cfg.method,
            };
            cmd_fit(&cfg, &ctx, m)
        }
        Command::Simulate {
            theta,
            fit,
            draws,
            networks,
        } => {
            let cfg = load(&cli)?;
            let theta = resolve_theta(&cfg, theta.clone(), fit.as_deref())?;
            cmd_simulate(&cfg, &ctx, theta, *draws, *networks)
        }
        Command::Test { nsim } => cmd_test(&load(&cli)?, &ctx, *nsim),
        Command::Diagnose { theta, fit } => {
            let cfg = load(&cli)?;
            let theta = resolve_theta(&cfg, theta.clone(), fit.as_deref())?;
            cmd_diagnose(&cfg, &ctx, theta)
        }
        Command::Dist { columns, max } => dist::cmd_dist(columns, *max, &ctx.out, ctx.format),
        Command::Summary { network } => cmd_summary(&load(&cli)?, &ctx, network.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
