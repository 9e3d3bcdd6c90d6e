//! Single-site heat-bath sampler for the clock measure with boundary spins
//! pinned to 0, and the coexistence estimators built on it.
//!
//! The probe statistic at a site `x` is
//! `Δ = μ̂(σ_x = 0) − max_{a≠0} μ̂(σ_x = a)`; the competing spin `a*` is the
//! empirical argmax over the whole run, fixed before error bars are formed.
//! The connection frequency `φ̂(x ↔ U)` comes from drawing `ω ~ Q(· | σ)` at
//! each sampling epoch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{class_cost, pair_class, top_level, Spin, WeightTable};
use crate::cluster::{sample_levels_into, Level};
use crate::error::{domain, input, Result};
use crate::exec::Exec;
use crate::graph::{fill_boundary_components, BoxGraph, Disorder, Graph, VertexId};
use crate::percolation::sample_disorder;
use crate::rng::{stream_rng, SimRng};
use crate::stats::{batch_means, mean_and_stderr, normal_quantile, Estimate};
use crate::union_find::UnionFind;

/// Boltzmann factor per spin class. Unlike [`WeightTable`] this accepts
/// `β = 0`, where the sampler draws uniform spins.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassWeights {
    q: usize,
    factors: Vec<f64>,
}

impl ClassWeights {
    pub fn new(q: usize, beta: f64) -> Result<Self> {
        if !(2..=crate::clock::MAX_Q).contains(&q) {
            return Err(domain(format!(
                "q must lie in 2..={}, got {q}",
                crate::clock::MAX_Q
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(domain(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        let factors = (0..=top_level(q))
            .map(|c| (-beta * class_cost(c, q)).exp())
            .collect();
        Ok(ClassWeights { q, factors })
    }

    pub fn q(&self) -> usize {
        self.q
    }
}

/// One systematic scan over the free vertices in increasing id order, each
/// resampled from its single-site conditional.
pub fn heat_bath_sweep<R: Rng + ?Sized>(
    spins: &mut [Spin],
    g: &Graph,
    cw: &ClassWeights,
    rng: &mut R,
) {
    let q = cw.q;
    let mut weights = vec![0.0; q];
    for v in 0..g.n_vertices() {
        if g.is_boundary(v) {
            continue;
        }
        let mut total = 0.0;
        for (s, w) in weights.iter_mut().enumerate() {
            *w = g
                .neighbors(v)
                .iter()
                .map(|nb| cw.factors[pair_class(s, spins[nb.vertex] as usize, q)])
                .product();
            total += *w;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = q - 1;
        for (s, &w) in weights.iter().enumerate() {
            if u < w {
                pick = s;
                break;
            }
            u -= w;
        }
        spins[v] = pick as Spin;
    }
    debug_assert!(g.boundary().iter().all(|&u| spins[u] == 0));
}

/// A chain started from `σ ≡ 0` with its own random stream and histograms
/// at a fixed set of probe sites.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub spins: Vec<Spin>,
    pub sweeps: u64,
    pub rng: SimRng,
    pub probes: Vec<VertexId>,
    /// `histogram[i][a]`: sampling epochs with `σ_{probes[i]} = a`.
    pub histogram: Vec<Vec<u64>>,
    /// Epochs at which the derived `ω` joined `probes[i]` to `U`.
    pub connections: Vec<u64>,
    pub samples: u64,
}

impl ChainState {
    pub fn new(g: &Graph, q: usize, probes: Vec<VertexId>, rng: SimRng) -> Result<Self> {
        if let Some(&x) = probes.iter().find(|&&x| x >= g.n_vertices()) {
            return Err(input(format!("probe {x} not in graph")));
        }
        Ok(ChainState {
            spins: vec![0; g.n_vertices()],
            sweeps: 0,
            rng,
            histogram: vec![vec![0; q]; probes.len()],
            connections: vec![0; probes.len()],
            probes,
            samples: 0,
        })
    }

    pub fn sweep(&mut self, g: &Graph, cw: &ClassWeights) {
        heat_bath_sweep(&mut self.spins, g, cw, &mut self.rng);
        self.sweeps += 1;
    }

    /// Records the probe spins and one derived-`ω` connection draw.
    pub fn record(&mut self, g: &Graph, wt: &WeightTable, scratch: &mut Scratch) {
        for (i, &x) in self.probes.iter().enumerate() {
            self.histogram[i][self.spins[x] as usize] += 1;
        }
        derive_top_components(&self.spins, g, wt, &mut self.rng, scratch);
        let root = scratch.uf.find(g.n_vertices());
        for (i, &x) in self.probes.iter().enumerate() {
            if scratch.uf.find(x) == root {
                self.connections[i] += 1;
            }
        }
        self.samples += 1;
    }
}

/// Reusable buffers for drawing `ω ~ Q(· | σ)` and its clusters.
#[derive(Debug, Default)]
pub struct Scratch {
    pub levels: Vec<Level>,
    uf: UnionFind,
}

/// Draws `ω ~ Q(· | σ)` into `scratch.levels` and unions the top-level
/// clusters (with `U` as node `g.n_vertices()`) into `scratch.uf`.
fn derive_top_components<R: Rng + ?Sized>(
    spins: &[Spin],
    g: &Graph,
    wt: &WeightTable,
    rng: &mut R,
    scratch: &mut Scratch,
) {
    sample_levels_into(spins, g, wt, rng, &mut scratch.levels);
    let k = wt.k() as Level;
    let levels = &scratch.levels;
    fill_boundary_components(g, &|e: usize| levels[e] == k, &mut scratch.uf);
}

/// Frequency of `x ↔ U` under `ω ~ Q(· | σ)` over a stream of spin
/// configurations, one edge draw per configuration.
pub fn sample_phi_connection<'a, R: Rng + ?Sized>(
    states: impl IntoIterator<Item = &'a [Spin]>,
    g: &Graph,
    wt: &WeightTable,
    x: VertexId,
    rng: &mut R,
) -> Estimate {
    let mut scratch = Scratch::default();
    let hits: Vec<f64> = states
        .into_iter()
        .map(|spins| {
            if g.is_boundary(x) {
                return 1.0;
            }
            derive_top_components(spins, g, wt, rng, &mut scratch);
            let root = scratch.uf.find(g.n_vertices());
            f64::from(scratch.uf.find(x) == root)
        })
        .collect();
    let mut est = mean_and_stderr(&hits);
    if hits.len() >= 2 {
        est.stderr = (est.mean * (1.0 - est.mean) / hits.len() as f64).sqrt();
    }
    est
}

/// Runs a chain and hands every sampled `(σ, ω)` to `visit`, with `ω` drawn
/// from `Q(· | σ)`. Used to compare the chain with exact tables.
pub fn sample_configurations(
    g: &Graph,
    wt: &WeightTable,
    burnin: usize,
    thin: usize,
    samples: usize,
    seed: u64,
    mut visit: impl FnMut(&[Spin], &[Level]),
) -> Result<()> {
    let cw = ClassWeights::new(wt.q(), wt.beta())?;
    let mut chain = ChainState::new(g, wt.q(), Vec::new(), stream_rng(seed, 0))?;
    let mut scratch = Scratch::default();
    for _ in 0..burnin {
        chain.sweep(g, &cw);
    }
    for _ in 0..samples {
        for _ in 0..thin.max(1) {
            chain.sweep(g, &cw);
        }
        sample_levels_into(&chain.spins, g, wt, &mut chain.rng, &mut scratch.levels);
        visit(&chain.spins, &scratch.levels);
    }
    Ok(())
}

/// Run parameters of [`estimate_coexistence`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceConfig {
    pub q: usize,
    pub beta: f64,
    pub p: f64,
    pub n: usize,
    pub d: usize,
    /// Sweeps after burn-in.
    pub sweeps: usize,
    pub burnin: usize,
    /// Sweeps between sampling epochs.
    pub thin: usize,
    pub batches: usize,
    pub replicas: usize,
    /// Draw a fresh disorder per replica; otherwise all replicas share one.
    pub quenched: bool,
    pub seed: u64,
}

impl Default for CoexistenceConfig {
    fn default() -> Self {
        CoexistenceConfig {
            q: 3,
            beta: 2.0,
            p: 1.0,
            n: 32,
            d: 2,
            sweeps: 10_000,
            burnin: 1_000,
            thin: 10,
            batches: 50,
            replicas: 1,
            quenched: false,
            seed: 0,
        }
    }
}

impl CoexistenceConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(domain(format!("beta must be positive, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(domain(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.replicas == 0 || self.thin == 0 || self.batches < 2 {
            return Err(input(
                "need at least one replica, thin >= 1 and at least two batches",
            ));
        }
        if self.sweeps / self.thin < 2 * self.batches {
            return Err(input(format!(
                "{} sweeps with thinning {} leave fewer than two samples per batch",
                self.sweeps, self.thin
            )));
        }
        Ok(())
    }
}

/// Comparison of the two halves of a chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitDiagnostic {
    pub first: f64,
    pub second: f64,
    /// `|first − second|` in units of the combined standard error.
    pub z: f64,
}

pub const SPLIT_LIMIT: f64 = 5.0;

impl SplitDiagnostic {
    pub fn converged(&self) -> bool {
        self.z <= SPLIT_LIMIT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaReport {
    pub replica: usize,
    pub mu_zero: f64,
    /// Empirical `max_{a≠0} μ̂(σ_x = a)` and its argmax.
    pub mu_other: f64,
    pub other_spin: Spin,
    pub delta: Estimate,
    pub connection: Estimate,
    pub split: SplitDiagnostic,
    /// Open fraction of the disorder this replica ran on.
    pub open_fraction: f64,
}

impl ReplicaReport {
    pub fn correlation_flag(&self) -> bool {
        correlation_bound_holds(&self.delta, &self.connection)
    }
}

/// Statistical form of `Δ ≥ φ(x ↔ U)`: `Δ + 3 se ≥ conn − 3 se`.
pub fn correlation_bound_holds(delta: &Estimate, connection: &Estimate) -> bool {
    delta.mean + 3.0 * delta.stderr >= connection.mean - 3.0 * connection.stderr
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoexistenceReport {
    pub config: CoexistenceConfig,
    pub replicas: Vec<ReplicaReport>,
    /// Replica average of `Δ`.
    pub delta: Estimate,
    pub connection: Estimate,
}

impl CoexistenceReport {
    pub fn correlation_flag(&self) -> bool {
        correlation_bound_holds(&self.delta, &self.connection)
    }

    /// `Δ > 0` at one-sided confidence `conf`.
    pub fn delta_positive(&self, conf: f64) -> bool {
        self.delta.mean - normal_quantile(conf) * self.delta.stderr > 0.0
    }

    pub fn delta_consistent_with_zero(&self) -> bool {
        self.delta.mean.abs() <= 3.0 * self.delta.stderr
    }

    pub fn converged(&self) -> bool {
        self.replicas.iter().all(|r| r.split.converged())
    }
}

/// Stream reserved for the shared disorder of non-quenched runs.
const SHARED_DISORDER_STREAM: u64 = u64::MAX;

/// Heat-bath estimate of `Δ` and `φ(x ↔ ∂Λ_n)` at the centre of `Λ_n` with
/// 0 boundary condition, on Bernoulli(`p`) diluted couplings.
///
/// Replica `r` runs on stream `2r` of the seed and, when quenched, draws its
/// disorder from stream `2r + 1`; the result does not depend on scheduling.
pub fn estimate_coexistence(config: &CoexistenceConfig, exec: Exec) -> Result<CoexistenceReport> {
    config.validate()?;
    let lattice = BoxGraph::new(config.n, config.d)?;
    let wt = WeightTable::new(config.q, config.beta)?;
    let cw = ClassWeights::new(config.q, config.beta)?;
    let shared = if config.quenched {
        None
    } else {
        Some(sample_disorder(
            lattice.graph(),
            config.p,
            &mut stream_rng(config.seed, SHARED_DISORDER_STREAM),
        )?)
    };
    let runs = exec.map(config.replicas, |r| -> Result<ReplicaReport> {
        let disorder = match &shared {
            Some(j) => j.clone(),
            None => sample_disorder(
                lattice.graph(),
                config.p,
                &mut stream_rng(config.seed, 2 * r as u64 + 1),
            )?,
        };
        run_replica(r, &lattice, &disorder, &wt, &cw, config)
    });
    let replicas: Vec<ReplicaReport> = runs.into_iter().collect::<Result<_>>()?;
    let delta = aggregate(replicas.iter().map(|r| r.delta));
    let connection = aggregate(replicas.iter().map(|r| r.connection));
    Ok(CoexistenceReport {
        config: config.clone(),
        replicas,
        delta,
        connection,
    })
}

/// Mean over replicas with standard error
/// `max(sqrt(Σ se²) / M, sd_across / √M)`.
fn aggregate(items: impl Iterator<Item = Estimate>) -> Estimate {
    let items: Vec<Estimate> = items.collect();
    let m = items.len() as f64;
    let mean = items.iter().map(|e| e.mean).sum::<f64>() / m;
    let within = items
        .iter()
        .map(|e| e.stderr * e.stderr)
        .sum::<f64>()
        .sqrt()
        / m;
    let across = if items.len() >= 2 {
        mean_and_stderr(&items.iter().map(|e| e.mean).collect::<Vec<_>>()).stderr
    } else {
        0.0
    };
    Estimate {
        mean,
        stderr: within.max(across),
    }
}

fn run_replica(
    replica: usize,
    lattice: &BoxGraph,
    disorder: &Disorder,
    wt: &WeightTable,
    cw: &ClassWeights,
    config: &CoexistenceConfig,
) -> Result<ReplicaReport> {
    let diluted = lattice.apply_disorder(disorder)?;
    let g = diluted.graph();
    let x = diluted.center();
    let mut chain = ChainState::new(
        g,
        config.q,
        vec![x],
        stream_rng(config.seed, 2 * replica as u64),
    )?;
    let mut scratch = Scratch::default();
    for _ in 0..config.burnin {
        chain.sweep(g, cw);
    }
    let epochs = config.sweeps / config.thin;
    let mut spin_series = Vec::with_capacity(epochs);
    let mut conn_series = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        for _ in 0..config.thin {
            chain.sweep(g, cw);
        }
        let before = chain.connections[0];
        chain.record(g, wt, &mut scratch);
        spin_series.push(chain.spins[x]);
        conn_series.push(f64::from(chain.connections[0] > before));
    }

    let hist = &chain.histogram[0];
    let (other_spin, &other_count) = hist
        .iter()
        .enumerate()
        .skip(1)
        .max_by_key(|&(a, &c)| (c, std::cmp::Reverse(a)))
        .expect("q >= 2");
    let total = chain.samples as f64;
    let delta_series: Vec<f64> = spin_series
        .iter()
        .map(|&s| f64::from(s == 0) - f64::from(s as usize == other_spin))
        .collect();
    let delta = batch_means(&delta_series, config.batches);
    let half = delta_series.len() / 2;
    let first = batch_means(&delta_series[..half], config.batches / 2);
    let second = batch_means(&delta_series[half..], config.batches / 2);
    let spread = (first.stderr.powi(2) + second.stderr.powi(2)).sqrt();
    let gap = (first.mean - second.mean).abs();
    let z = if gap == 0.0 { 0.0 } else { gap / spread };
    Ok(ReplicaReport {
        replica,
        mu_zero: hist[0] as f64 / total,
        mu_other: other_count as f64 / total,
        other_spin: other_spin as Spin,
        delta,
        connection: batch_means(&conn_series, config.batches),
        split: SplitDiagnostic {
            first: first.mean,
            second: second.mean,
            z,
        },
        open_fraction: disorder.n_open() as f64 / disorder.len().max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ExactDistributions;
    use crate::stats::chi_square_gof;

    #[test]
    fn zero_beta_is_uniform() {
        let g = Graph::new(4, [0], [(0, 1), (1, 2), (2, 3)]).unwrap();
        let cw = ClassWeights::new(3, 0.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let mut spins = vec![0; 4];
        let mut counts = vec![0u64; 27];
        for _ in 0..27_000 {
            heat_bath_sweep(&mut spins, &g, &cw, &mut rng);
            assert_eq!(spins[0], 0);
            counts[spins[1] as usize + 3 * spins[2] as usize + 9 * spins[3] as usize] += 1;
        }
        assert!(chi_square_gof(&counts, &[1.0 / 27.0; 27]).passes(0.01));
        assert!(ClassWeights::new(3, -1.0).is_err());
    }

    #[test]
    fn single_free_vertex_is_exact() {
        let g = Graph::new(3, [0, 2], [(0, 1), (1, 2)]).unwrap();
        let wt = WeightTable::new(4, 0.8).unwrap();
        let exact = ExactDistributions::enumerate(&g, &wt)
            .unwrap()
            .spin_marginal(1);
        let mut counts = vec![0u64; 4];
        sample_configurations(&g, &wt, 0, 1, 100_000, 3, |s, _| counts[s[1] as usize] += 1)
            .unwrap();
        let r = chi_square_gof(&counts, &exact);
        assert!(r.passes(0.01), "{r:?}");
    }

    #[test]
    fn one_dimensional_box_probe() {
        let lattice = BoxGraph::new(2, 1).unwrap();
        let g = lattice.graph();
        let wt = WeightTable::new(2, 1.0).unwrap();
        let dist = ExactDistributions::enumerate(g, &wt).unwrap();
        let x = lattice.center();
        let exact = dist.spin_marginal(x)[0];
        let mut zero = 0u64;
        let n = 20_000;
        sample_configurations(g, &wt, 1000, 10, n, 8, |s, _| zero += u64::from(s[x] == 0)).unwrap();
        let f = zero as f64 / n as f64;
        assert!(
            (f - exact).abs() < 3.0 * (exact * (1.0 - exact) / n as f64).sqrt(),
            "{f} vs {exact}"
        );
    }

    #[test]
    fn connection_frequency() {
        let g = Graph::new(2, [1], [(0, 1)]).unwrap();
        for (beta, q) in [(1.0, 2), (0.01, 2)] {
            let wt = WeightTable::new(q, beta).unwrap();
            let exact = ExactDistributions::enumerate(&g, &wt)
                .unwrap()
                .phi_connection(0);
            let mut states = Vec::new();
            sample_configurations(&g, &wt, 0, 1, 40_000, 4, |s, _| states.push(s.to_vec()))
                .unwrap();
            let est = sample_phi_connection(
                states.iter().map(|s| s.as_slice()),
                &g,
                &wt,
                0,
                &mut stream_rng(4, 9),
            );
            assert!(
                (est.mean - exact).abs() < 3.0 * est.stderr.max(1e-4),
                "{est:?} vs {exact}"
            );
            if beta < 0.1 {
                assert!(est.mean < 0.05);
            }
        }
        let wt = WeightTable::new(2, 1.0).unwrap();
        let est = sample_phi_connection([[0u16, 0].as_slice()], &g, &wt, 1, &mut stream_rng(0, 0));
        assert_eq!(est.mean, 1.0);
    }

    #[test]
    fn aggregate_rule() {
        let a = Estimate {
            mean: 1.0,
            stderr: 0.1,
        };
        let b = Estimate {
            mean: 3.0,
            stderr: 0.1,
        };
        let agg = aggregate([a, b].into_iter());
        assert_eq!(agg.mean, 2.0);
        assert!((agg.stderr - 1.0).abs() < 1e-12);
        let agg = aggregate([a, a].into_iter());
        assert!((agg.stderr - 0.02f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_coexistence_run_is_deterministic() {
        let config = CoexistenceConfig {
            n: 4,
            sweeps: 2_000,
            burnin: 100,
            replicas: 3,
            quenched: true,
            p: 0.8,
            seed: 17,
            ..Default::default()
        };
        let a = estimate_coexistence(&config, Exec::Sequential).unwrap();
        let b = estimate_coexistence(&config, Exec::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicas.len(), 3);
        assert!(a.delta.mean > 0.5);
        let bad = CoexistenceConfig {
            sweeps: 50,
            ..config
        };
        assert!(estimate_coexistence(&bad, Exec::Sequential).is_err());
    }
}
