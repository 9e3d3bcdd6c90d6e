//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand};
use clockrc::clock::MAX_Q;
use clockrc::mcmc::CoexistenceConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Keys accepted in a `--config` file. Keys a subcommand does not use are ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    q: Option<OneOrMany<usize>>,
    beta: Option<OneOrMany<f64>>,
    p: Option<f64>,
    rho: Option<OneOrMany<f64>>,
    n: Option<usize>,
    d: Option<usize>,
    pc: Option<f64>,
    corpus: Option<String>,
    samples: Option<usize>,
    sweeps: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    batches: Option<usize>,
    quench_samples: Option<usize>,
    seed: Option<u64>,
    beta_min: Option<f64>,
    beta_max: Option<f64>,
    points: Option<usize>,
    pc_sizes: Option<Vec<usize>>,
    dump: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Exact enumeration checks over a graph corpus (CSV, one row per graph, q, beta)
    OracleVerify(CorpusArgs),
    /// Exhaustive check of the reflection injection over a graph corpus
    InjectionVerify(InjectionArgs),
    /// Invert the single-bond bound: smallest beta with varphi(beta) >= rho
    Beta0(Beta0Args),
    /// Closed-form upper bound on beta0(p_c/p) next to the bisection values
    Beta0Bound(BoundArgs),
    /// varphi(beta) on a uniform beta grid
    PhiCurve(CurveArgs),
    /// Bond percolation: centre-to-boundary connection or crossing estimate of p_c
    Percolate(PercolateArgs),
    /// Heat-bath estimate of the spin asymmetry at the centre of a diluted box
    Simulate(SimulateArgs),
    /// Levels t, increments r and degeneracies K as JSON
    WeightTable(WeightArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::OracleVerify(_) => "oracle-verify",
            Command::InjectionVerify(_) => "injection-verify",
            Command::Beta0(_) => "beta0",
            Command::Beta0Bound(_) => "beta0-bound",
            Command::PhiCurve(_) => "phi-curve",
            Command::Percolate(_) => "percolate",
            Command::Simulate(_) => "simulate",
            Command::WeightTable(_) => "weight-table",
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct CorpusArgs {
    /// `default` for the bundled manifest, or a path to a manifest JSON
    #[arg(long)]
    pub corpus: Option<String>,
    /// Override the manifest's q values
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    /// Override the manifest's beta values
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct InjectionArgs {
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    /// Write failing instances (sigma, omega, trace) here as JSON
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct Beta0Args {
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Critical bond probability; known exactly only for d = 2
    #[arg(long)]
    pub pc: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct PercolateArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Estimate p_c from crossings of (n+1) x n rectangles of these sizes instead
    #[arg(long, value_delimiter = ',')]
    pub pc_sizes: Vec<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Average over this many independent disorder samples, one replica each
    #[arg(long)]
    pub quench_samples: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct WeightArgs {
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
}

/// Fully resolved parameters of one run. Echoed as JSON at the top of every CSV.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rho: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burnin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quench_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pc_sizes: Vec<usize>,
    #[serde(skip)]
    pub dump: Option<PathBuf>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

fn list<T>(flag: Vec<T>, file: Option<OneOrMany<T>>) -> Vec<T> {
    if flag.is_empty() {
        file.map(OneOrMany::into_vec).unwrap_or_default()
    } else {
        flag
    }
}

fn single<T>(name: &str, flag: Option<T>, file: Option<OneOrMany<T>>) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.map(OneOrMany::into_vec) {
        None => Ok(None),
        Some(mut v) if v.len() == 1 => Ok(v.pop()),
        Some(_) => bail!("{name} takes a single value for this subcommand"),
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required parameter --{name}"))
}

impl RunConfig {
    /// Merges flags over file values, fills defaults and validates ranges.
    pub fn resolve(
        command: Command,
        file: FileConfig,
        output: Option<PathBuf>,
    ) -> Result<RunConfig> {
        let mut c = RunConfig {
            subcommand: command.name().to_string(),
            output,
            ..RunConfig::default()
        };
        match command {
            Command::OracleVerify(a) => {
                c.corpus = Some(a.corpus.or(file.corpus).unwrap_or_else(|| "default".into()));
                c.q = list(a.q, file.q);
                c.beta = list(a.beta, file.beta);
            }
            Command::InjectionVerify(a) => {
                c.corpus = Some(a.corpus.or(file.corpus).unwrap_or_else(|| "default".into()));
                c.q = list(a.q, file.q);
                c.dump = a.dump.or(file.dump);
            }
            Command::Beta0(a) => {
                c.q = list(a.q, file.q);
                c.rho = list(a.rho, file.rho);
                if c.q.is_empty() || c.rho.is_empty() {
                    bail!("beta0 needs --q and --rho");
                }
            }
            Command::Beta0Bound(a) => {
                c.q = list(a.q, file.q);
                if c.q.is_empty() {
                    bail!("missing required parameter --q");
                }
                c.d = Some(a.d.or(file.d).unwrap_or(2));
                c.p = Some(required("p", a.p.or(file.p))?);
                c.pc = a.pc.or(file.pc);
            }
            Command::PhiCurve(a) => {
                c.q = vec![required("q", single("q", a.q, file.q)?)?];
                c.beta_min = Some(a.beta_min.or(file.beta_min).unwrap_or(0.01));
                c.beta_max = Some(a.beta_max.or(file.beta_max).unwrap_or(10.0));
                c.points = Some(a.points.or(file.points).unwrap_or(200));
            }
            Command::Percolate(a) => {
                c.d = Some(a.d.or(file.d).unwrap_or(2));
                c.samples = Some(a.samples.or(file.samples).unwrap_or(10_000));
                c.seed = Some(a.seed.or(file.seed).unwrap_or(0));
                c.pc_sizes = if a.pc_sizes.is_empty() {
                    file.pc_sizes.unwrap_or_default()
                } else {
                    a.pc_sizes
                };
                if c.pc_sizes.is_empty() {
                    c.p = Some(required("p", a.p.or(file.p))?);
                    c.n = Some(a.n.or(file.n).unwrap_or(16));
                }
            }
            Command::Simulate(a) => {
                let base = CoexistenceConfig::default();
                c.q = vec![single("q", a.q, file.q)?.unwrap_or(base.q)];
                c.beta = vec![single("beta", a.beta, file.beta)?.unwrap_or(base.beta)];
                c.p = Some(a.p.or(file.p).unwrap_or(base.p));
                c.n = Some(a.n.or(file.n).unwrap_or(base.n));
                c.d = Some(a.d.or(file.d).unwrap_or(base.d));
                c.sweeps = Some(a.sweeps.or(file.sweeps).unwrap_or(base.sweeps));
                c.burnin = Some(a.burnin.or(file.burnin).unwrap_or(base.burnin));
                c.thin = Some(a.thin.or(file.thin).unwrap_or(base.thin));
                c.batches = Some(a.batches.or(file.batches).unwrap_or(base.batches));
                c.seed = Some(a.seed.or(file.seed).unwrap_or(base.seed));
                c.quench_samples = a.quench_samples.or(file.quench_samples);
            }
            Command::WeightTable(a) => {
                c.q = vec![required("q", single("q", a.q, file.q)?)?];
                c.beta = vec![required("beta", single("beta", a.beta, file.beta)?)?];
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        for &q in &self.q {
            if !(2..=MAX_Q).contains(&q) {
                bail!("q must lie in 2..={MAX_Q}, got {q}");
            }
        }
        for &b in &self.beta {
            if !(b > 0.0 && b.is_finite()) {
                bail!("beta must be positive and finite, got {b}");
            }
        }
        for &r in &self.rho {
            if !(r > 0.0 && r < 1.0) {
                bail!("rho must lie in (0, 1), got {r}");
            }
        }
        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                bail!("p must lie in [0, 1], got {p}");
            }
        }
        if let Some(pc) = self.pc {
            if !(pc > 0.0 && pc < 1.0) {
                bail!("pc must lie in (0, 1), got {pc}");
            }
        }
        if self.n == Some(0) || self.d == Some(0) {
            bail!("n and d must be at least 1");
        }
        if self.samples == Some(0) || self.quench_samples == Some(0) {
            bail!("samples and quench-samples must be at least 1");
        }
        if self.pc_sizes.contains(&0) {
            bail!("pc-sizes must be positive");
        }
        if let (Some(lo), Some(hi)) = (self.beta_min, self.beta_max) {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                bail!("need 0 < beta-min < beta-max, got {lo} and {hi}");
            }
        }
        if let Some(points) = self.points {
            if points < 2 {
                bail!("points must be at least 2");
            }
        }
        if self.thin == Some(0) || self.batches.is_some_and(|b| b < 2) {
            bail!("thin must be at least 1 and batches at least 2");
        }
        if let (Some(sweeps), Some(thin), Some(batches)) = (self.sweeps, self.thin, self.batches) {
            if sweeps / thin < 2 * batches {
                bail!("{sweeps} sweeps with thin {thin} leave fewer than two samples per batch");
            }
        }
        Ok(())
    }
}
