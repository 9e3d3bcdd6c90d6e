use std::io::Write;

use anyhow::{bail, Context, Result};
use clockrc::corpus::Corpus;
use clockrc::domination::{
    beta0_bisection, beta0_upper_bound, critical_bond_probability, phi_curve,
};
use clockrc::mcmc::{estimate_coexistence, CoexistenceConfig};
use clockrc::oracle::{lemma_sweep_corpus, sweep_corpus};
use clockrc::percolation::{estimate_connection, estimate_pc};
use clockrc::reflection::injection_sweep_corpus;
use clockrc::{Exec, WeightTable};
use serde::Serialize;

use crate::config::RunConfig;

/// Offset from the open endpoint `ρ = p_c/p` at which `β₀` is also reported.
const ENDPOINT_OFFSET: f64 = 1e-3;

/// What a run found, beyond plain I/O and input errors.
pub enum Outcome {
    Pass,
    Fail(String),
}

fn write_csv<T: Serialize>(out: &mut dyn Write, config: &RunConfig, rows: &[T]) -> Result<()> {
    writeln!(out, "# clockrc {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn load_corpus(config: &mut RunConfig) -> Result<Corpus> {
    let source = config.corpus.as_deref().unwrap_or("default");
    let mut corpus = if source == "default" {
        Corpus::default_manifest()
    } else {
        let text =
            std::fs::read_to_string(source).with_context(|| format!("reading corpus {source}"))?;
        Corpus::from_json(&text)?
    };
    if !config.q.is_empty() {
        corpus.q = config.q.clone();
    }
    if !config.beta.is_empty() {
        corpus.beta = config.beta.clone();
    }
    config.q = corpus.q.clone();
    if config.subcommand == "oracle-verify" {
        config.beta = corpus.beta.clone();
    }
    Ok(corpus)
}

pub fn run(mut config: RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let exec = Exec::default();
    match config.subcommand.as_str() {
        "oracle-verify" => oracle_verify(&mut config, exec, out),
        "injection-verify" => injection_verify(&mut config, exec, out),
        "beta0" => beta0(&config, out),
        "beta0-bound" => beta0_bound(&config, out),
        "phi-curve" => curve(&config, out),
        "percolate" => percolate(&config, exec, out),
        "simulate" => simulate(&config, exec, out),
        "weight-table" => weight_table(&config, out),
        other => bail!("unknown subcommand {other}"),
    }
}

#[derive(Serialize)]
struct OracleRow<'a> {
    graph: &'a str,
    q: usize,
    beta: f64,
    phi_deviation: f64,
    mu_deviation: f64,
    z_relative_deviation: f64,
    decomposition_deviation: f64,
    correlation_slack: f64,
    min_alpha: f64,
    varphi: f64,
    alpha_slack: f64,
    lemma_instances: u64,
    lemma_violations: usize,
    pass: bool,
}

fn oracle_verify(config: &mut RunConfig, exec: Exec, out: &mut dyn Write) -> Result<Outcome> {
    let corpus = load_corpus(config)?;
    let cells = sweep_corpus(&corpus, exec)?;
    let lemma = lemma_sweep_corpus(&corpus, exec)?;
    let mut failed = 0;
    let rows: Vec<OracleRow> = cells
        .iter()
        .map(|c| {
            let l = lemma
                .iter()
                .find(|l| l.graph == c.graph && l.q == c.q)
                .expect("lemma sweep covers every (graph, q)");
            let pass = c.passes() && l.report.passes();
            failed += usize::from(!pass);
            OracleRow {
                graph: &c.graph,
                q: c.q,
                beta: c.beta,
                phi_deviation: c.phi_deviation,
                mu_deviation: c.mu_deviation,
                z_relative_deviation: c.z_relative_deviation,
                decomposition_deviation: c.decomposition_deviation,
                correlation_slack: c.correlation_slack,
                min_alpha: c.min_alpha,
                varphi: c.varphi,
                alpha_slack: c.alpha_slack(),
                lemma_instances: l.report.instances,
                lemma_violations: l.report.violations.len(),
                pass,
            }
        })
        .collect();
    write_csv(out, config, &rows)?;
    Ok(if failed == 0 {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("{failed} of {} cells failed", rows.len()))
    })
}

#[derive(Serialize)]
struct InjectionRow<'a> {
    graph: &'a str,
    q: usize,
    instances: u64,
    failed_instances: u64,
    pass: bool,
}

fn injection_verify(config: &mut RunConfig, exec: Exec, out: &mut dyn Write) -> Result<Outcome> {
    let corpus = load_corpus(config)?;
    let cells = injection_sweep_corpus(&corpus, exec)?;
    let rows: Vec<InjectionRow> = cells
        .iter()
        .map(|c| InjectionRow {
            graph: &c.graph,
            q: c.q,
            instances: c.sweep.instances,
            failed_instances: c.sweep.failed_instances,
            pass: c.sweep.passes(),
        })
        .collect();
    write_csv(out, config, &rows)?;
    let failing: Vec<_> = cells.iter().filter(|c| !c.sweep.passes()).collect();
    if let Some(path) = &config.dump {
        let json = serde_json::to_string_pretty(&failing)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if failing.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "{} of {} (graph, q) pairs failed",
            failing.len(),
            cells.len()
        ))
    })
}

#[derive(Serialize)]
struct Beta0Row {
    q: usize,
    rho: f64,
    beta0: f64,
    residual: f64,
    iterations: u32,
}

fn beta0(config: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &q in &config.q {
        for &rho in &config.rho {
            let b = beta0_bisection(rho, q)?;
            rows.push(Beta0Row {
                q,
                rho,
                beta0: b.beta,
                residual: b.residual,
                iterations: b.iterations,
            });
        }
    }
    write_csv(out, config, &rows)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct BoundRow {
    q: usize,
    d: usize,
    p: f64,
    pc: f64,
    rho: f64,
    upper_bound: f64,
    beta0_endpoint: f64,
    rho_offset: Option<f64>,
    beta0_offset: Option<f64>,
}

fn beta0_bound(config: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let (d, p) = (config.d.unwrap_or(2), config.p.unwrap_or(1.0));
    let pc = match config.pc.or_else(|| critical_bond_probability(d)) {
        Some(pc) => pc,
        None => bail!("p_c is not known exactly for d = {d}; pass --pc"),
    };
    if p <= pc {
        bail!("need p > p_c, got p = {p} and p_c = {pc}");
    }
    let rho = pc / p;
    let shifted = rho + ENDPOINT_OFFSET;
    let mut rows = Vec::new();
    for &q in &config.q {
        let beta0_offset = if shifted < 1.0 {
            Some(beta0_bisection(shifted, q)?.beta)
        } else {
            None
        };
        rows.push(BoundRow {
            q,
            d,
            p,
            pc,
            rho,
            upper_bound: beta0_upper_bound(p, q, pc)?,
            beta0_endpoint: beta0_bisection(rho, q)?.beta,
            rho_offset: beta0_offset.map(|_| shifted),
            beta0_offset,
        });
    }
    write_csv(out, config, &rows)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CurveRow {
    beta: f64,
    varphi: f64,
}

fn curve(config: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let c = phi_curve(
        config.q[0],
        config.beta_min.unwrap_or(0.01),
        config.beta_max.unwrap_or(10.0),
        config.points.unwrap_or(200),
    )?;
    let rows: Vec<CurveRow> = c
        .points
        .iter()
        .map(|&(beta, varphi)| CurveRow { beta, varphi })
        .collect();
    write_csv(out, config, &rows)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct ConnectionRow {
    p: f64,
    n: usize,
    d: usize,
    samples: usize,
    estimate: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct CrossingRow {
    /// Rectangle size, or `fit` for the extrapolated value.
    size: String,
    pc: f64,
}

fn percolate(config: &RunConfig, exec: Exec, out: &mut dyn Write) -> Result<Outcome> {
    let d = config.d.unwrap_or(2);
    let samples = config.samples.unwrap_or(10_000);
    let seed = config.seed.unwrap_or(0);
    if !config.pc_sizes.is_empty() {
        let est = estimate_pc(d, &config.pc_sizes, samples, seed, exec)?;
        let mut rows: Vec<CrossingRow> = est
            .per_size
            .iter()
            .map(|&(n, pc)| CrossingRow {
                size: n.to_string(),
                pc,
            })
            .collect();
        rows.push(CrossingRow {
            size: "fit".into(),
            pc: est.estimate,
        });
        write_csv(out, config, &rows)?;
        return Ok(Outcome::Pass);
    }
    let (p, n) = (config.p.unwrap_or(0.5), config.n.unwrap_or(16));
    let e = estimate_connection(p, n, d, None, samples, seed, exec)?;
    let row = ConnectionRow {
        p,
        n,
        d,
        samples,
        estimate: e.estimate,
        stderr: e.stderr,
    };
    write_csv(out, config, &[row])?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct SimulateRow {
    /// Replica index, or `all` for the replica average.
    replica: String,
    delta: f64,
    stderr: f64,
    connection: f64,
    connection_stderr: f64,
    correlation_flag: bool,
    split_z: Option<f64>,
    open_fraction: Option<f64>,
}

fn simulate(config: &RunConfig, exec: Exec, out: &mut dyn Write) -> Result<Outcome> {
    let base = CoexistenceConfig::default();
    let cc = CoexistenceConfig {
        q: config.q[0],
        beta: config.beta[0],
        p: config.p.unwrap_or(base.p),
        n: config.n.unwrap_or(base.n),
        d: config.d.unwrap_or(base.d),
        sweeps: config.sweeps.unwrap_or(base.sweeps),
        burnin: config.burnin.unwrap_or(base.burnin),
        thin: config.thin.unwrap_or(base.thin),
        batches: config.batches.unwrap_or(base.batches),
        replicas: config.quench_samples.unwrap_or(1),
        quenched: config.quench_samples.is_some(),
        seed: config.seed.unwrap_or(base.seed),
    };
    let report = estimate_coexistence(&cc, exec)?;
    let mut rows: Vec<SimulateRow> = report
        .replicas
        .iter()
        .map(|r| SimulateRow {
            replica: r.replica.to_string(),
            delta: r.delta.mean,
            stderr: r.delta.stderr,
            connection: r.connection.mean,
            connection_stderr: r.connection.stderr,
            correlation_flag: r.correlation_flag(),
            split_z: Some(r.split.z),
            open_fraction: Some(r.open_fraction),
        })
        .collect();
    rows.push(SimulateRow {
        replica: "all".into(),
        delta: report.delta.mean,
        stderr: report.delta.stderr,
        connection: report.connection.mean,
        connection_stderr: report.connection.stderr,
        correlation_flag: report.correlation_flag(),
        split_z: None,
        open_fraction: None,
    });
    write_csv(out, config, &rows)?;
    if !report.converged() {
        let worst = report
            .replicas
            .iter()
            .map(|r| r.split.z)
            .fold(0.0, f64::max);
        return Ok(Outcome::Fail(format!(
            "chain halves disagree (split z = {worst:.2}); increase --sweeps or --burnin"
        )));
    }
    if !report.correlation_flag() {
        return Ok(Outcome::Fail(
            "replica-averaged asymmetry falls below the connection probability".into(),
        ));
    }
    Ok(Outcome::Pass)
}

fn weight_table(config: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let wt = WeightTable::new(config.q[0], config.beta[0])?;
    writeln!(out, "{}", wt.to_json()?)?;
    Ok(Outcome::Pass)
}
