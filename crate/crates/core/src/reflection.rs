//! The reflection injection `Φ : L_ω(a) → L_ω(0)` proving the counting
//! inequality constructively.
//!
//! `L_ω(a)` is the set of spin configurations compatible with `ω` that are
//! 0 on the (single, identified) boundary vertex `y` and equal `a` at `x`.
//! `Φ` reflects the spins of a connected set `A ∋ x` across the line through
//! angle `a/2`; `A` grows from `{x}` until the reflection creates no new
//! incompatibility on its outer boundary.

use std::collections::HashSet;

use serde::Serialize;

use crate::clock::{pair_class, Spin, SpinConfig, WeightTable};
use crate::cluster::{CompatibleSpins, EdgeConfig, Level};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::graph::{Graph, VertexId};

/// `R b = a − b mod q`, the reflection fixing the line through angle `a/2`.
pub fn reflect(b: Spin, a: Spin, q: usize) -> Spin {
    ((a as usize + q - b as usize) % q) as Spin
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Hemisphere {
    /// Open half-circle containing spin 0.
    Hem0,
    /// Open half-circle containing the anchor (for anchors up to `q/2`).
    HemA,
    /// On the reflection line.
    OnLine,
}

/// Side of the line through angle `a/2` on which spin `b` lies, decided by
/// the sign of `sin(2π(b − a/2)/q)` via `m = (2b − a) mod 2q`.
pub fn hemisphere(b: Spin, a: Spin, q: usize) -> Hemisphere {
    assert!(a != 0, "the hemispheres are undefined for anchor 0");
    let m = (2 * b as usize + 2 * q - a as usize) % (2 * q);
    if m == 0 || m == q {
        Hemisphere::OnLine
    } else if m < q {
        Hemisphere::HemA
    } else {
        Hemisphere::Hem0
    }
}

fn negate(s: Spin, q: usize) -> Spin {
    ((q - s as usize) % q) as Spin
}

/// Record of one application of `Φ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InjectionTrace {
    /// Anchor `a = σ_x` as given.
    pub anchor: Spin,
    /// Anchor the growth ran with: `q − a` if `a > q/2`, else `a`.
    pub reduced_anchor: Spin,
    /// Whether all spins were negated to reach the reduced anchor.
    pub negated: bool,
    pub x: VertexId,
    pub y: VertexId,
    pub levels: Vec<Level>,
    /// `A_0 ⊂ A_1 ⊂ …`, each sorted; the last entry is the final set `A`.
    pub layers: Vec<Vec<VertexId>>,
    pub input: Vec<Spin>,
    pub output: Vec<Spin>,
    /// Whether every `u ∈ A∖{x}` lies strictly in the anchor's hemisphere.
    pub hemisphere_ok: bool,
}

impl InjectionTrace {
    pub fn set(&self) -> &[VertexId] {
        self.layers.last().expect("A_0 is always present")
    }

    pub fn contains_boundary(&self) -> bool {
        self.set().binary_search(&self.y).is_ok()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Grows `A` for spins already reduced to an anchor `a ≤ q/2`. Returns
/// membership flags; layers are appended when requested.
fn grow(
    g: &Graph,
    wt: &WeightTable,
    levels: &[Level],
    spins: &[Spin],
    x: VertexId,
    a: Spin,
    mut layers: Option<&mut Vec<Vec<VertexId>>>,
) -> Vec<bool> {
    let (q, k) = (wt.q(), wt.k());
    let mut in_a = vec![false; g.n_vertices()];
    in_a[x] = true;
    let mut members = vec![x];
    if let Some(l) = layers.as_deref_mut() {
        l.push(members.clone());
    }
    loop {
        let mut added = Vec::new();
        for &v in &members {
            let rv = reflect(spins[v], a, q) as usize;
            for nb in g.neighbors(v) {
                let u = nb.vertex;
                // W(σ_u − Rσ_v) < t_{ω_e}
                if !in_a[u] && k - pair_class(spins[u] as usize, rv, q) < levels[nb.edge] as usize {
                    added.push(u);
                }
            }
        }
        added.sort_unstable();
        added.dedup();
        if added.is_empty() {
            return in_a;
        }
        for &u in &added {
            in_a[u] = true;
        }
        members.extend(added);
        if let Some(l) = layers.as_deref_mut() {
            let mut layer = members.clone();
            layer.sort_unstable();
            l.push(layer);
        }
    }
}

fn single_boundary(g: &Graph) -> Result<VertexId> {
    match g.boundary() {
        [y] => Ok(*y),
        _ => Err(domain(
            "the injection needs a single boundary vertex; identify the boundary first",
        )),
    }
}

fn is_member(g: &Graph, wt: &WeightTable, levels: &[Level], spins: &[Spin], y: VertexId) -> bool {
    spins[y] == 0
        && g.edges().iter().zip(levels).all(|(&[u, v], &l)| {
            l as usize <= wt.k() - pair_class(spins[u] as usize, spins[v] as usize, wt.q())
        })
}

/// Builds `A` for `σ ∈ L_ω(a)` and applies `Φ`.
pub fn build_incompatibility_set(
    sigma: &SpinConfig,
    omega: &EdgeConfig,
    x: VertexId,
    a: Spin,
    g: &Graph,
    wt: &WeightTable,
) -> Result<InjectionTrace> {
    let y = single_boundary(g)?;
    let q = wt.q();
    let levels = omega.levels()?;
    let spins = sigma.spins();
    if sigma.q() != q
        || spins.len() != g.n_vertices()
        || levels.len() != g.n_edges()
        || omega.k() != wt.k()
    {
        return Err(domain(
            "configuration sizes do not match the graph and weight table",
        ));
    }
    if a == 0 || a as usize >= q {
        return Err(domain(format!("anchor must lie in 1..{q}, got {a}")));
    }
    if x >= g.n_vertices() || spins[x] != a {
        return Err(domain(format!(
            "sigma does not take the anchor value {a} at vertex {x}"
        )));
    }
    if !is_member(g, wt, &levels, spins, y) {
        return Err(domain(
            "sigma is not compatible with omega or is not 0 on the boundary",
        ));
    }
    Ok(trace_for(g, wt, &levels, spins, x, a, y))
}

fn trace_for(
    g: &Graph,
    wt: &WeightTable,
    levels: &[Level],
    spins: &[Spin],
    x: VertexId,
    a: Spin,
    y: VertexId,
) -> InjectionTrace {
    let q = wt.q();
    let negated = 2 * a as usize > q;
    let (reduced, reduced_anchor) = if negated {
        (spins.iter().map(|&s| negate(s, q)).collect(), negate(a, q))
    } else {
        (spins.to_vec(), a)
    };
    let mut layers = Vec::new();
    let in_a = grow(
        g,
        wt,
        levels,
        &reduced,
        x,
        reduced_anchor,
        Some(&mut layers),
    );
    let hemisphere_ok = (0..g.n_vertices())
        .filter(|&u| in_a[u] && u != x)
        .all(|u| hemisphere(reduced[u], reduced_anchor, q) == Hemisphere::HemA);
    InjectionTrace {
        anchor: a,
        reduced_anchor,
        negated,
        x,
        y,
        levels: levels.to_vec(),
        layers,
        input: spins.to_vec(),
        output: apply(spins, &in_a, a, q),
        hemisphere_ok,
    }
}

/// Reflecting in the negated frame and negating back equals reflecting with
/// the original anchor, so the output is computed directly.
fn apply(spins: &[Spin], in_a: &[bool], a: Spin, q: usize) -> Vec<Spin> {
    spins
        .iter()
        .zip(in_a)
        .map(|(&s, &inside)| if inside { reflect(s, a, q) } else { s })
        .collect()
}

/// `Φσ`. Fails with an invariant error if the boundary vertex ends up in `A`.
pub fn phi_map(
    sigma: &SpinConfig,
    omega: &EdgeConfig,
    x: VertexId,
    a: Spin,
    g: &Graph,
    wt: &WeightTable,
) -> Result<SpinConfig> {
    let trace = build_incompatibility_set(sigma, omega, x, a, g, wt)?;
    if trace.contains_boundary() {
        return Err(Error::Invariant(format!(
            "boundary vertex reached by the reflection set: {}",
            trace.to_json()?
        )));
    }
    SpinConfig::new(wt.q(), trace.output)
}

/// Outcome of checking `Φ` on all of `L_ω(a)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InjectionReport {
    /// `|L_ω(a)|`.
    pub domain_size: u64,
    /// `|L_ω(0)|`.
    pub target_size: u64,
    pub injective: bool,
    pub image_in_target: bool,
    pub boundary_never_reflected: bool,
    pub hemispheres_ok: bool,
    /// Traces of the inputs that broke a property (at most [`MAX_DUMPS`]).
    pub failures: Vec<InjectionTrace>,
}

pub const MAX_DUMPS: usize = 8;

impl InjectionReport {
    pub fn passes(&self) -> bool {
        self.injective
            && self.image_in_target
            && self.boundary_never_reflected
            && self.hemispheres_ok
    }
}

/// Applies `Φ` to every element of `L_ω(a)`. For `a = 0` the map is the
/// identity and the report is trivially passing.
pub fn verify_injection(
    omega: &EdgeConfig,
    x: VertexId,
    a: Spin,
    g: &Graph,
    wt: &WeightTable,
) -> Result<InjectionReport> {
    single_boundary(g)?;
    let levels = omega.levels()?;
    if x >= g.n_vertices() || a as usize >= wt.q() {
        return Err(domain(format!("vertex {x} / spin {a} out of range")));
    }
    Ok(check_levels(g, wt, &levels, x, a))
}

fn check_levels(
    g: &Graph,
    wt: &WeightTable,
    levels: &[Level],
    x: VertexId,
    a: Spin,
) -> InjectionReport {
    let (q, k) = (wt.q(), wt.k());
    let y = g.boundary()[0];
    let target_size = CompatibleSpins::new(g, q, k, levels, &[(x, 0)])
        .expect("sizes checked")
        .count();
    let mut report = InjectionReport {
        target_size,
        injective: true,
        image_in_target: true,
        boundary_never_reflected: true,
        hemispheres_ok: true,
        ..Default::default()
    };
    let mut image = HashSet::new();
    let mut inputs = Vec::new();
    CompatibleSpins::new(g, q, k, levels, &[(x, a)])
        .expect("sizes checked")
        .for_each(|s| inputs.push(s.to_vec()));
    report.domain_size = inputs.len() as u64;
    if a == 0 {
        report.domain_size = target_size;
        return report;
    }
    for spins in inputs {
        let trace = trace_for(g, wt, levels, &spins, x, a, y);
        let mut failed = false;
        if trace.contains_boundary() {
            report.boundary_never_reflected = false;
            failed = true;
        }
        if !trace.hemisphere_ok {
            report.hemispheres_ok = false;
            failed = true;
        }
        if trace.output[x] != 0 || !is_member(g, wt, levels, &trace.output, y) {
            report.image_in_target = false;
            failed = true;
        }
        if !image.insert(trace.output.clone()) {
            report.injective = false;
            failed = true;
        }
        if failed && report.failures.len() < MAX_DUMPS {
            report.failures.push(trace);
        }
    }
    report
}

/// Result of [`injection_sweep`] over all `(ω, x, a)` of one graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InjectionSweep {
    pub instances: u64,
    pub failed_instances: u64,
    /// Per instance, ordered by edge code, then vertex, then spin: whether
    /// the injection checks passed and `|L_ω(a)| ≤ |L_ω(0)|`.
    #[serde(skip)]
    pub outcomes: Vec<bool>,
    pub failures: Vec<InjectionTrace>,
}

impl InjectionSweep {
    pub fn passes(&self) -> bool {
        self.failed_instances == 0
    }
}

/// Every `ω ∈ I^E`, vertex `x` and spin `a`, after identifying the boundary.
/// Parallel over `ω`; instance order matches the counting-lemma sweep.
pub fn injection_sweep(g: &Graph, wt: &WeightTable, exec: Exec) -> Result<InjectionSweep> {
    let g = g.identify_boundary();
    let n_omega = crate::oracle::checked_edge_space(wt, g.n_edges())?;
    crate::cluster::guard(wt.q(), g.n_free(), crate::cluster::COUNT_GUARD)?;
    let per_omega = exec.map(n_omega, |w| {
        let mut levels = vec![0 as Level; g.n_edges()];
        let mut code = w;
        for l in levels.iter_mut() {
            *l = (code % wt.n_levels()) as Level;
            code /= wt.n_levels();
        }
        let mut out = Vec::with_capacity(g.n_vertices() * wt.q());
        for x in 0..g.n_vertices() {
            for a in 0..wt.q() {
                out.push(check_levels(&g, wt, &levels, x, a as Spin));
            }
        }
        out
    });
    let mut sweep = InjectionSweep::default();
    for report in per_omega.into_iter().flatten() {
        let ok = report.passes() && report.domain_size <= report.target_size;
        sweep.instances += 1;
        sweep.outcomes.push(ok);
        if !ok {
            sweep.failed_instances += 1;
            let room = MAX_DUMPS.saturating_sub(sweep.failures.len());
            sweep
                .failures
                .extend(report.failures.into_iter().take(room));
        }
    }
    Ok(sweep)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InjectionCellReport {
    pub graph: String,
    pub q: usize,
    #[serde(flatten)]
    pub sweep: InjectionSweep,
}

/// [`injection_sweep`] for every `(graph, q)` of a corpus. The map does
/// not depend on `β`.
pub fn injection_sweep_corpus(
    corpus: &crate::corpus::Corpus,
    exec: Exec,
) -> Result<Vec<InjectionCellReport>> {
    let pairs: Vec<(usize, usize)> = (0..corpus.graphs.len())
        .flat_map(|g| corpus.q.iter().map(move |&q| (g, q)))
        .collect();
    exec.map(pairs.len(), |i| {
        let (g, q) = pairs[i];
        let entry = &corpus.graphs[g];
        Ok(InjectionCellReport {
            graph: entry.name.clone(),
            q,
            sweep: injection_sweep(&entry.graph, &WeightTable::new(q, 1.0)?, Exec::Sequential)?,
        })
    })
    .into_iter()
    .collect()
}
