//! Brute-force enumeration of the clock measure `μ`, the random-cluster
//! measure `φ` and their coupling `Q` on small graphs, with the exact
//! identities and inequalities checked on them.
//!
//! Spin configurations are indexed by a mixed-radix code over the free
//! vertices (first free vertex least significant); edge configurations by a
//! base-`(k+1)` code over edges (edge 0 least significant). Compatible
//! counts are exact `u64`; probabilities are formed afterwards.

use std::sync::OnceLock;

use serde::Serialize;

use crate::clock::{class_cost, pair_class, Spin, WeightTable};
use crate::cluster::{guard, CompatibleSpins, EdgeConfig, Level, COUNT_GUARD};
use crate::corpus::Corpus;
use crate::error::{domain, input, Error, Result};
use crate::exec::Exec;
use crate::graph::{boundary_connected_set, Graph, VertexId};

/// Largest `q^{|V\U|} · (k+1)^{|E|}` accepted by [`ExactDistributions::enumerate`].
pub const ENUMERATION_GUARD: u128 = 10_000_000;

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-10;

/// All finite-volume measures of one `(graph, q, β)` cell.
#[derive(Debug)]
pub struct ExactDistributions {
    graph: Graph,
    wt: WeightTable,
    free: Vec<VertexId>,
    n_sigma: usize,
    n_omega: usize,
    /// `μ(σ)` per spin code.
    pub mu: Vec<f64>,
    /// `φ(ω)` per edge code.
    pub phi: Vec<f64>,
    /// `Q(ω, σ)` at `joint[ω * n_sigma + σ]`.
    pub joint: Vec<f64>,
    /// `|{σ ⪰ ω : σ = 0 on U}|` per edge code.
    pub counts: Vec<u64>,
    /// Partition function of `μ` (sum of Boltzmann factors).
    pub z: f64,
    /// `Z / q^{|V\U|}`, the normalizer of `Q`.
    pub z_prime: f64,
    /// `Σ_ω count(ω) φ̂(ω)`; equals `z` in exact arithmetic.
    pub z_random_cluster: f64,
    connections: OnceLock<Vec<bool>>,
}

impl ExactDistributions {
    pub fn enumerate(g: &Graph, wt: &WeightTable) -> Result<Self> {
        let q = wt.q();
        let k = wt.k();
        let m = g.n_free();
        let n_edges = g.n_edges();
        let cells = (q as u128)
            .checked_pow(m as u32)
            .and_then(|s| {
                (wt.n_levels() as u128)
                    .checked_pow(n_edges as u32)
                    .and_then(|w| s.checked_mul(w))
            })
            .unwrap_or(u128::MAX);
        if cells > ENUMERATION_GUARD {
            return Err(Error::SizeGuard {
                cells,
                limit: ENUMERATION_GUARD,
            });
        }
        let n_sigma = q.pow(m as u32);
        let n_omega = wt.n_levels().pow(n_edges as u32);
        let free = g.free_vertices();

        // Boltzmann factors and per-edge level caps k - class for every σ
        let mut boltzmann = Vec::with_capacity(n_sigma);
        let mut caps = Vec::with_capacity(n_sigma * n_edges);
        let mut spins = vec![0 as Spin; g.n_vertices()];
        for code in 0..n_sigma {
            decode_spins(code, q, &free, &mut spins);
            let mut energy = 0.0;
            for &[a, b] in g.edges() {
                let c = pair_class(spins[a] as usize, spins[b] as usize, q);
                energy += class_cost(c, q);
                caps.push((k - c) as Level);
            }
            boltzmann.push((-wt.beta() * energy).exp());
        }
        let z: f64 = boltzmann.iter().sum();
        let mu: Vec<f64> = boltzmann.iter().map(|b| b / z).collect();
        let uniform = 1.0 / n_sigma as f64;
        let z_prime = z / n_sigma as f64;

        let mut phi = Vec::with_capacity(n_omega);
        let mut counts = Vec::with_capacity(n_omega);
        let mut joint = vec![0.0; n_omega * n_sigma];
        let mut levels = vec![0 as Level; n_edges];
        let mut z_random_cluster = 0.0;
        for w in 0..n_omega {
            decode_levels(w, wt.n_levels(), &mut levels);
            let hat_phi: f64 = levels.iter().map(|&l| wt.theta(l as usize)).product();
            let row = &mut joint[w * n_sigma..(w + 1) * n_sigma];
            let mut count = 0u64;
            for (s, cell) in row.iter_mut().enumerate() {
                let cap = &caps[s * n_edges..(s + 1) * n_edges];
                if levels.iter().zip(cap).all(|(l, c)| l <= c) {
                    count += 1;
                    *cell = hat_phi * uniform / z_prime;
                }
            }
            counts.push(count);
            z_random_cluster += count as f64 * hat_phi;
            phi.push(count as f64 * hat_phi / z);
        }

        Ok(ExactDistributions {
            graph: g.clone(),
            wt: wt.clone(),
            free,
            n_sigma,
            n_omega,
            mu,
            phi,
            joint,
            counts,
            z,
            z_prime,
            z_random_cluster,
            connections: OnceLock::new(),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn weights(&self) -> &WeightTable {
        &self.wt
    }

    pub fn n_spin_configs(&self) -> usize {
        self.n_sigma
    }

    pub fn n_edge_configs(&self) -> usize {
        self.n_omega
    }

    /// Full spin configuration (boundary at 0) for a spin code.
    pub fn spins(&self, code: usize) -> Vec<Spin> {
        let mut spins = vec![0; self.graph.n_vertices()];
        decode_spins(code, self.wt.q(), &self.free, &mut spins);
        spins
    }

    pub fn levels(&self, code: usize) -> Vec<Level> {
        let mut levels = vec![0; self.graph.n_edges()];
        decode_levels(code, self.wt.n_levels(), &mut levels);
        levels
    }

    pub fn edge_config(&self, code: usize) -> EdgeConfig {
        EdgeConfig::from_levels(self.wt.k(), self.levels(code))
            .expect("decoded levels are in range")
    }

    /// Spin code of a configuration that is 0 on `U`.
    pub fn spin_code(&self, spins: &[Spin]) -> usize {
        self.free
            .iter()
            .rev()
            .fold(0, |acc, &v| acc * self.wt.q() + spins[v] as usize)
    }

    pub fn edge_code(&self, levels: &[Level]) -> usize {
        levels
            .iter()
            .rev()
            .fold(0, |acc, &l| acc * self.wt.n_levels() + l as usize)
    }

    /// `Σ_σ Q(ω, σ)` per edge code.
    pub fn joint_edge_marginal(&self) -> Vec<f64> {
        self.joint
            .chunks_exact(self.n_sigma)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// `Σ_ω Q(ω, σ)` per spin code.
    pub fn joint_spin_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_sigma];
        for row in self.joint.chunks_exact(self.n_sigma) {
            for (acc, v) in out.iter_mut().zip(row) {
                *acc += v;
            }
        }
        out
    }

    /// `μ(σ_x = ·)` as a vector of length `q`.
    pub fn spin_marginal(&self, x: VertexId) -> Vec<f64> {
        let mut out = vec![0.0; self.wt.q()];
        for (code, p) in self.mu.iter().enumerate() {
            out[self.spin_at(code, x)] += p;
        }
        out
    }

    fn spin_at(&self, code: usize, x: VertexId) -> usize {
        match self.free.binary_search(&x) {
            Ok(i) => (code / self.wt.q().pow(i as u32)) % self.wt.q(),
            Err(_) => 0,
        }
    }

    /// Whether `x ↔ U` under the edge configuration with the given code.
    pub fn connected(&self, omega: usize, x: VertexId) -> bool {
        let n = self.graph.n_vertices();
        let table = self.connections.get_or_init(|| {
            let k = self.wt.k() as Level;
            let mut table = Vec::with_capacity(self.n_omega * n);
            for w in 0..self.n_omega {
                let levels = self.levels(w);
                table.extend(boundary_connected_set(&self.graph, &|e: usize| {
                    levels[e] == k
                }));
            }
            table
        });
        table[omega * n + x]
    }

    /// `φ(x ↔ U)`.
    pub fn phi_connection(&self, x: VertexId) -> f64 {
        (0..self.n_omega)
            .filter(|&w| self.connected(w, x))
            .map(|w| self.phi[w])
            .sum()
    }

    /// `Q(σ_x = a, x ↮ U)`.
    pub fn joint_disconnected(&self, x: VertexId, a: usize) -> f64 {
        let mut total = 0.0;
        for w in (0..self.n_omega).filter(|&w| !self.connected(w, x)) {
            let row = &self.joint[w * self.n_sigma..(w + 1) * self.n_sigma];
            total += row
                .iter()
                .enumerate()
                .filter(|&(s, _)| self.spin_at(s, x) == a)
                .map(|(_, p)| p)
                .sum::<f64>();
        }
        total
    }

    /// `Q(σ | ω)` for a fixed edge code, per spin code.
    pub fn spin_conditional(&self, omega: usize) -> Vec<f64> {
        let row = &self.joint[omega * self.n_sigma..(omega + 1) * self.n_sigma];
        let total: f64 = row.iter().sum();
        row.iter().map(|p| p / total).collect()
    }

    /// Stride of edge `e` in the edge code.
    pub(crate) fn edge_stride(&self, e: usize) -> usize {
        self.wt.n_levels().pow(e as u32)
    }
}

fn decode_spins(mut code: usize, q: usize, free: &[VertexId], spins: &mut [Spin]) {
    for &v in free {
        spins[v] = (code % q) as Spin;
        code /= q;
    }
}

fn decode_levels(mut code: usize, base: usize, levels: &mut [Level]) {
    for l in levels.iter_mut() {
        *l = (code % base) as Level;
        code /= base;
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarginalReport {
    /// `max_ω |Σ_σ Q(ω, σ) - φ(ω)|`.
    pub phi_deviation: f64,
    /// `max_σ |Σ_ω Q(ω, σ) - μ(σ)|`.
    pub mu_deviation: f64,
    /// `|Z_rc - Z| / Z`.
    pub z_relative_deviation: f64,
}

impl MarginalReport {
    pub fn passes(&self) -> bool {
        self.phi_deviation <= EXACT_TOL
            && self.mu_deviation <= EXACT_TOL
            && self.z_relative_deviation <= EXACT_TOL
    }
}

/// Both marginals of the coupling against the directly computed `φ` and `μ`.
pub fn verify_es_marginals(dist: &ExactDistributions) -> MarginalReport {
    MarginalReport {
        phi_deviation: max_abs_diff(&dist.joint_edge_marginal(), &dist.phi),
        mu_deviation: max_abs_diff(&dist.joint_spin_marginal(), &dist.mu),
        z_relative_deviation: (dist.z_random_cluster - dist.z).abs() / dist.z,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConnectionIdentityReport {
    /// `μ(σ_x = a)`.
    pub spin_probability: f64,
    /// `φ(x ↔ U) 1[a = 0] + Q(σ_x = a, x ↮ U)`.
    pub decomposition: f64,
    pub deviation: f64,
}

impl ConnectionIdentityReport {
    pub fn passes(&self) -> bool {
        self.deviation <= EXACT_TOL
    }
}

/// Splits the spin marginal at `x` by whether `x` is joined to the boundary.
pub fn verify_connection_decomposition(
    dist: &ExactDistributions,
    x: VertexId,
    a: usize,
) -> Result<ConnectionIdentityReport> {
    check_vertex_spin(dist, x, a)?;
    let spin_probability = dist.spin_marginal(x)[a];
    let connected = if a == 0 { dist.phi_connection(x) } else { 0.0 };
    let decomposition = connected + dist.joint_disconnected(x, a);
    Ok(ConnectionIdentityReport {
        spin_probability,
        decomposition,
        deviation: (spin_probability - decomposition).abs(),
    })
}

fn check_vertex_spin(dist: &ExactDistributions, x: VertexId, a: usize) -> Result<()> {
    if x >= dist.graph.n_vertices() {
        return Err(input(format!("vertex {x} not in graph")));
    }
    if a >= dist.wt.q() {
        return Err(input(format!("spin {a} out of range 0..{}", dist.wt.q())));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub mu_zero: f64,
    /// `max_{a≠0} μ(σ_x = a)`.
    pub mu_other: f64,
    pub phi_connection: f64,
    /// `μ(σ_x = 0) - max_{a≠0} μ(σ_x = a) - φ(x ↔ U)`.
    pub slack: f64,
}

impl CorrelationReport {
    pub fn passes(&self) -> bool {
        self.slack >= -EXACT_TOL
    }
}

/// Positive-correlation inequality `μ(σ_x=0) ≥ μ(σ_x=a) + φ(x↔U)` at `x`.
pub fn verify_positive_correlations(
    dist: &ExactDistributions,
    x: VertexId,
) -> Result<CorrelationReport> {
    check_vertex_spin(dist, x, 0)?;
    let marginal = dist.spin_marginal(x);
    let mu_other = marginal[1..]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let phi_connection = dist.phi_connection(x);
    Ok(CorrelationReport {
        mu_zero: marginal[0],
        mu_other,
        phi_connection,
        slack: marginal[0] - mu_other - phi_connection,
    })
}

/// `(|{σ ⪰ ω : σ_U = 0, σ_x = a}|, |{σ ⪰ ω : σ_U = 0, σ_x = 0}|)`.
pub fn lemma_counts(
    g: &Graph,
    wt: &WeightTable,
    levels: &[Level],
    x: VertexId,
    a: Spin,
) -> Result<(u64, u64)> {
    guard(wt.q(), g.n_free(), COUNT_GUARD)?;
    let count = |s: Spin| -> Result<u64> {
        Ok(CompatibleSpins::new(g, wt.q(), wt.k(), levels, &[(x, s)])?.count())
    };
    Ok((count(a)?, count(0)?))
}

/// The counting inequality for one `(ω, x, a)`: fixing `σ_x = a` never
/// admits more compatible configurations than fixing `σ_x = 0`.
pub fn verify_lemma_counts(
    g: &Graph,
    wt: &WeightTable,
    omega: &EdgeConfig,
    x: VertexId,
    a: Spin,
) -> Result<bool> {
    if g.boundary().len() != 1 {
        return Err(domain(
            "the counting check expects a single boundary vertex; identify the boundary first",
        ));
    }
    if x >= g.n_vertices() || a as usize >= wt.q() {
        return Err(input(format!("vertex {x} / spin {a} out of range")));
    }
    let (with_a, with_zero) = lemma_counts(g, wt, &omega.levels()?, x, a)?;
    Ok(with_a <= with_zero)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LemmaViolation {
    pub levels: Vec<Level>,
    pub x: VertexId,
    pub a: Spin,
    pub count_a: u64,
    pub count_zero: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    /// Number of `(ω, x, a)` triples checked.
    pub instances: u64,
    pub violations: Vec<LemmaViolation>,
    /// Per instance `(ω, x, a)` in sweep order: whether the inequality held.
    #[serde(skip)]
    pub outcomes: Vec<bool>,
}

impl LemmaReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exhaustive sweep of the counting inequality over every `ω ∈ I^E`, every
/// vertex `x` and every spin `a`. The boundary is identified first.
///
/// Instances are ordered by edge code, then vertex, then spin.
pub fn lemma_sweep(g: &Graph, wt: &WeightTable) -> Result<LemmaReport> {
    let g = g.identify_boundary();
    let q = wt.q();
    let n = g.n_vertices();
    let n_edges = g.n_edges();
    let n_omega = checked_edge_space(wt, n_edges)?;
    guard(q, g.n_free(), COUNT_GUARD)?;
    let mut report = LemmaReport::default();
    let mut levels = vec![0 as Level; n_edges];
    let mut tally = vec![0u64; n * q];
    for w in 0..n_omega {
        decode_levels(w, wt.n_levels(), &mut levels);
        tally.iter_mut().for_each(|c| *c = 0);
        CompatibleSpins::new(&g, q, wt.k(), &levels, &[])?.for_each(|spins| {
            for (v, &s) in spins.iter().enumerate() {
                tally[v * q + s as usize] += 1;
            }
        });
        for x in 0..n {
            let zero = tally[x * q];
            for a in 0..q {
                let count_a = tally[x * q + a];
                let ok = count_a <= zero;
                report.instances += 1;
                report.outcomes.push(ok);
                if !ok {
                    report.violations.push(LemmaViolation {
                        levels: levels.clone(),
                        x,
                        a: a as Spin,
                        count_a,
                        count_zero: zero,
                    });
                }
            }
        }
    }
    Ok(report)
}

pub(crate) fn checked_edge_space(wt: &WeightTable, n_edges: usize) -> Result<usize> {
    let cells = (wt.n_levels() as u128)
        .checked_pow(n_edges as u32)
        .unwrap_or(u128::MAX);
    if cells > ENUMERATION_GUARD {
        return Err(Error::SizeGuard {
            cells,
            limit: ENUMERATION_GUARD,
        });
    }
    Ok(cells as usize)
}

/// `α(e, ω') = φ(ω_e = t_k | ω = ω' off e)`, from compatible counts.
///
/// The value of `omega_rest` on `e` itself is ignored.
pub fn single_bond_alpha(
    g: &Graph,
    wt: &WeightTable,
    e: usize,
    omega_rest: &EdgeConfig,
) -> Result<f64> {
    if e >= g.n_edges() {
        return Err(input(format!("edge {e} not in graph")));
    }
    guard(wt.q(), g.n_free(), COUNT_GUARD)?;
    let mut levels = omega_rest.levels()?;
    let mut total = 0.0;
    let mut top = 0.0;
    for i in 0..wt.n_levels() {
        levels[e] = i as Level;
        let w = wt.theta(i) * CompatibleSpins::new(g, wt.q(), wt.k(), &levels, &[])?.count() as f64;
        total += w;
        if i == wt.k() {
            top = w;
        }
    }
    Ok(top / total)
}

/// Smallest single-bond conditional over all edges and all rest configurations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaMinimum {
    pub alpha: f64,
    pub edge: usize,
    pub rest: Vec<Level>,
}

/// Minimum of `α(e, ω')` over every edge and every `ω'` using the enumerated
/// counts. `None` for an edgeless graph.
pub fn min_single_bond_alpha(dist: &ExactDistributions) -> Option<AlphaMinimum> {
    let wt = &dist.wt;
    let n_levels = wt.n_levels();
    let mut best: Option<AlphaMinimum> = None;
    for e in 0..dist.graph.n_edges() {
        let stride = dist.edge_stride(e);
        for w in 0..dist.n_omega {
            if !(w / stride).is_multiple_of(n_levels) {
                continue;
            }
            let mut total = 0.0;
            for i in 0..n_levels {
                total += wt.theta(i) * dist.counts[w + i * stride] as f64;
            }
            let alpha = wt.theta(wt.k()) * dist.counts[w + wt.k() * stride] as f64 / total;
            if best.as_ref().is_none_or(|b| alpha < b.alpha) {
                best = Some(AlphaMinimum {
                    alpha,
                    edge: e,
                    rest: dist.levels(w),
                });
            }
        }
    }
    best
}

/// `α(e, ω')` from the normalized `φ` table rather than from counts.
pub fn alpha_from_phi(dist: &ExactDistributions, e: usize, rest: &[Level]) -> f64 {
    let stride = dist.edge_stride(e);
    let mut levels = rest.to_vec();
    levels[e] = 0;
    let base = dist.edge_code(&levels);
    let total: f64 = (0..dist.wt.n_levels())
        .map(|i| dist.phi[base + i * stride])
        .sum();
    dist.phi[base + dist.wt.k() * stride] / total
}

/// All exact checks of one corpus cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCellReport {
    pub graph: String,
    pub q: usize,
    pub beta: f64,
    pub phi_deviation: f64,
    pub mu_deviation: f64,
    pub z_relative_deviation: f64,
    /// Largest deviation in the connection decomposition over all `x, a`.
    pub decomposition_deviation: f64,
    /// Smallest positive-correlation slack over all vertices.
    pub correlation_slack: f64,
    pub min_alpha: f64,
    pub varphi: f64,
}

impl OracleCellReport {
    pub fn alpha_slack(&self) -> f64 {
        self.min_alpha - self.varphi
    }

    pub fn passes(&self) -> bool {
        self.phi_deviation <= EXACT_TOL
            && self.mu_deviation <= EXACT_TOL
            && self.z_relative_deviation <= EXACT_TOL
            && self.decomposition_deviation <= EXACT_TOL
            && self.correlation_slack >= -EXACT_TOL
            && self.alpha_slack() >= -EXACT_TOL
    }
}

pub fn check_cell(name: &str, g: &Graph, wt: &WeightTable) -> Result<OracleCellReport> {
    let dist = ExactDistributions::enumerate(g, wt)?;
    let marginals = verify_es_marginals(&dist);
    let mut decomposition_deviation: f64 = 0.0;
    let mut correlation_slack = f64::INFINITY;
    for x in 0..g.n_vertices() {
        for a in 0..wt.q() {
            decomposition_deviation = decomposition_deviation
                .max(verify_connection_decomposition(&dist, x, a)?.deviation);
        }
        correlation_slack = correlation_slack.min(verify_positive_correlations(&dist, x)?.slack);
    }
    let alpha = crate::domination::alpha_bound_of(&dist);
    Ok(OracleCellReport {
        graph: name.to_string(),
        q: wt.q(),
        beta: wt.beta(),
        phi_deviation: marginals.phi_deviation,
        mu_deviation: marginals.mu_deviation,
        z_relative_deviation: marginals.z_relative_deviation,
        decomposition_deviation,
        correlation_slack,
        min_alpha: alpha.min_alpha,
        varphi: alpha.varphi,
    })
}

/// [`check_cell`] over every cell of a corpus, in manifest order.
pub fn sweep_corpus(corpus: &Corpus, exec: Exec) -> Result<Vec<OracleCellReport>> {
    let cells = corpus.cells();
    exec.map(cells.len(), |i| {
        let cell = cells[i];
        let entry = &corpus.graphs[cell.graph];
        check_cell(
            &entry.name,
            &entry.graph,
            &WeightTable::new(cell.q, cell.beta)?,
        )
    })
    .into_iter()
    .collect()
}

/// Counting-inequality sweep of one `(graph, q)` pair. Counts do not depend on `β`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LemmaCellReport {
    pub graph: String,
    pub q: usize,
    #[serde(flatten)]
    pub report: LemmaReport,
}

pub fn lemma_sweep_corpus(corpus: &Corpus, exec: Exec) -> Result<Vec<LemmaCellReport>> {
    let pairs: Vec<(usize, usize)> = (0..corpus.graphs.len())
        .flat_map(|g| corpus.q.iter().map(move |&q| (g, q)))
        .collect();
    exec.map(pairs.len(), |i| {
        let (g, q) = pairs[i];
        let entry = &corpus.graphs[g];
        Ok(LemmaCellReport {
            graph: entry.name.clone(),
            q,
            report: lemma_sweep(&entry.graph, &WeightTable::new(q, 1.0)?)?,
        })
    })
    .into_iter()
    .collect()
}
