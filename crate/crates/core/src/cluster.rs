//! Edge configurations over weight levels, the compatibility relation, the
//! random-cluster weights and the two conditionals of the Edwards–Sokal
//! coupling that are sampled in practice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{pair_class, Spin, SpinConfig, WeightTable};
use crate::error::{domain, input, Error, Result};
use crate::graph::{Graph, OpenEdges, VertexId};

pub type Level = u16;

/// Value of one edge: a level index `i` (weight `t_i`) or the bottom value
/// `0` that only exists on the enlarged space `{0} ∪ I`.
///
/// The derived order matches the order of the underlying weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Option<Level>", into = "Option<Level>")]
pub enum EdgeValue {
    Bottom,
    Level(Level),
}

impl From<Option<Level>> for EdgeValue {
    fn from(v: Option<Level>) -> Self {
        v.map_or(EdgeValue::Bottom, EdgeValue::Level)
    }
}

impl From<EdgeValue> for Option<Level> {
    fn from(v: EdgeValue) -> Self {
        match v {
            EdgeValue::Bottom => None,
            EdgeValue::Level(l) => Some(l),
        }
    }
}

/// One value per edge. Serialized as a JSON array of level indices, with
/// `null` for bottom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeConfig {
    k: usize,
    enlarged: bool,
    values: Vec<EdgeValue>,
}

impl EdgeConfig {
    /// Configuration in `I^E`; every level must be `<= k`.
    pub fn from_levels(k: usize, levels: impl IntoIterator<Item = Level>) -> Result<Self> {
        let values: Vec<EdgeValue> = levels.into_iter().map(EdgeValue::Level).collect();
        Self::check(k, false, values)
    }

    /// Configuration on the enlarged space `({0} ∪ I)^E`.
    pub fn enlarged(k: usize, values: Vec<EdgeValue>) -> Result<Self> {
        Self::check(k, true, values)
    }

    pub fn constant(k: usize, n_edges: usize, level: Level) -> Result<Self> {
        Self::from_levels(k, std::iter::repeat_n(level, n_edges))
    }

    fn check(k: usize, enlarged: bool, values: Vec<EdgeValue>) -> Result<Self> {
        for v in &values {
            match *v {
                EdgeValue::Bottom if !enlarged => {
                    return Err(domain("bottom value outside the enlarged edge space"))
                }
                EdgeValue::Level(l) if l as usize > k => {
                    return Err(input(format!("level {l} exceeds top level {k}")))
                }
                _ => {}
            }
        }
        Ok(EdgeConfig {
            k,
            enlarged,
            values,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_enlarged(&self) -> bool {
        self.enlarged
    }

    pub fn values(&self) -> &[EdgeValue] {
        &self.values
    }

    pub fn get(&self, e: usize) -> EdgeValue {
        self.values[e]
    }

    /// Copy with edge `e` set to `value` (the configuration `t_e ω'`).
    pub fn with_edge(&self, e: usize, value: EdgeValue) -> Result<Self> {
        let mut values = self.values.clone();
        values[e] = value;
        Self::check(self.k, self.enlarged, values)
    }

    /// Plain level indices; fails if any edge is at bottom.
    pub fn levels(&self) -> Result<Vec<Level>> {
        self.values
            .iter()
            .map(|v| match v {
                EdgeValue::Level(l) => Ok(*l),
                EdgeValue::Bottom => Err(domain("edge at bottom value has no level")),
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.values)?)
    }

    pub fn from_json(k: usize, text: &str) -> Result<Self> {
        let values: Vec<EdgeValue> = serde_json::from_str(text)?;
        let enlarged = values.contains(&EdgeValue::Bottom);
        Self::check(k, enlarged, values)
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &EdgeConfig) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

impl OpenEdges for EdgeConfig {
    fn is_open(&self, edge: usize) -> bool {
        self.values[edge] == EdgeValue::Level(self.k as Level)
    }
}

/// `ω ⪯ σ`: every edge value is at most `W(σ_x - σ_y)`.
pub fn is_compatible(omega: &EdgeConfig, sigma: &SpinConfig, g: &Graph, wt: &WeightTable) -> bool {
    debug_assert_eq!(omega.len(), g.n_edges());
    g.edges()
        .iter()
        .zip(omega.values())
        .all(|(&[a, b], v)| match *v {
            EdgeValue::Bottom => true,
            EdgeValue::Level(l) => {
                l as usize <= wt.max_level(sigma.get(a) as usize, sigma.get(b) as usize)
            }
        })
}

/// `φ̂(ω) = Π_e r_{ω_e}`.
pub fn hat_phi_weight(omega: &EdgeConfig, wt: &WeightTable) -> Result<f64> {
    Ok(omega
        .levels()?
        .iter()
        .map(|&l| wt.theta(l as usize))
        .product())
}

/// Refusal threshold for brute-force counting over free spins.
pub const COUNT_GUARD: u128 = 100_000_000;

/// `|{σ ⪰ ω : σ = 0 on U}|`.
pub fn compatible_count(omega: &EdgeConfig, g: &Graph, wt: &WeightTable) -> Result<u64> {
    let levels = omega.levels()?;
    guard(wt.q(), g.n_free(), COUNT_GUARD)?;
    Ok(CompatibleSpins::new(g, wt.q(), wt.k(), &levels, &[])?.count())
}

/// `|{σ ⪰ ω : σ = 0 on U}| · φ̂(ω)`, the random-cluster weight before normalization.
pub fn phi_weight_unnormalized(omega: &EdgeConfig, g: &Graph, wt: &WeightTable) -> Result<f64> {
    let count = compatible_count(omega, g, wt)?;
    Ok(count as f64 * hat_phi_weight(omega, wt)?)
}

pub(crate) fn guard(q: usize, free: usize, limit: u128) -> Result<()> {
    let mut cells: u128 = 1;
    for _ in 0..free {
        cells = cells.saturating_mul(q as u128);
        if cells > limit {
            return Err(Error::SizeGuard { cells, limit });
        }
    }
    Ok(())
}

/// Backtracking enumerator of `{σ ⪰ ω : σ = 0 on U, σ_v = s for pinned (v, s)}`.
///
/// Free vertices are assigned in increasing id order; an edge constraint is
/// checked as soon as both endpoints carry a spin.
pub struct CompatibleSpins<'a> {
    g: &'a Graph,
    q: usize,
    k: usize,
    levels: &'a [Level],
    order: Vec<VertexId>,
    spins: Vec<Spin>,
    assigned: Vec<bool>,
    empty: bool,
}

impl<'a> CompatibleSpins<'a> {
    pub fn new(
        g: &'a Graph,
        q: usize,
        k: usize,
        levels: &'a [Level],
        pins: &[(VertexId, Spin)],
    ) -> Result<Self> {
        if levels.len() != g.n_edges() {
            return Err(input(format!(
                "edge configuration has {} entries for {} edges",
                levels.len(),
                g.n_edges()
            )));
        }
        let mut spins = vec![0 as Spin; g.n_vertices()];
        let mut assigned = vec![false; g.n_vertices()];
        for &u in g.boundary() {
            assigned[u] = true;
        }
        let mut empty = false;
        for &(v, s) in pins {
            if g.is_boundary(v) {
                // the boundary is pinned at 0
                empty |= s != 0;
                continue;
            }
            spins[v] = s;
            assigned[v] = true;
        }
        let order = (0..g.n_vertices()).filter(|&v| !assigned[v]).collect();
        Ok(CompatibleSpins {
            g,
            q,
            k,
            levels,
            order,
            spins,
            assigned,
            empty,
        })
    }

    fn consistent(&self, v: VertexId) -> bool {
        let s = self.spins[v] as usize;
        self.g.neighbors(v).iter().all(|nb| {
            !self.assigned[nb.vertex]
                || self.levels[nb.edge] as usize
                    <= self.k - pair_class(s, self.spins[nb.vertex] as usize, self.q)
        })
    }

    fn fixed_part_consistent(&self) -> bool {
        !self.empty
            && self.g.edges().iter().enumerate().all(|(e, &[a, b])| {
                !(self.assigned[a] && self.assigned[b])
                    || self.levels[e] as usize
                        <= self.k
                            - pair_class(self.spins[a] as usize, self.spins[b] as usize, self.q)
            })
    }

    /// Calls `visit` with every configuration in the set.
    pub fn for_each(mut self, mut visit: impl FnMut(&[Spin])) {
        if !self.fixed_part_consistent() {
            return;
        }
        self.descend(0, &mut visit);
    }

    pub fn count(self) -> u64 {
        let mut n = 0u64;
        self.for_each(|_| n += 1);
        n
    }

    fn descend(&mut self, depth: usize, visit: &mut impl FnMut(&[Spin])) {
        if depth == self.order.len() {
            visit(&self.spins);
            return;
        }
        let v = self.order[depth];
        self.assigned[v] = true;
        for s in 0..self.q {
            self.spins[v] = s as Spin;
            if self.consistent(v) {
                self.descend(depth + 1, visit);
            }
        }
        self.assigned[v] = false;
        self.spins[v] = 0;
    }
}

/// Draws `ω ~ Q(· | σ)`: each edge independently takes level `i` with
/// probability `r_i / t_{k-c}` for `i <= k - c`, where `c` is its spin class.
pub fn sample_edges_given_spins<R: Rng + ?Sized>(
    sigma: &SpinConfig,
    g: &Graph,
    wt: &WeightTable,
    rng: &mut R,
) -> EdgeConfig {
    let mut levels = Vec::with_capacity(g.n_edges());
    sample_levels_into(sigma.spins(), g, wt, rng, &mut levels);
    EdgeConfig::from_levels(wt.k(), levels).expect("sampled levels are within range")
}

pub(crate) fn sample_levels_into<R: Rng + ?Sized>(
    spins: &[Spin],
    g: &Graph,
    wt: &WeightTable,
    rng: &mut R,
    out: &mut Vec<Level>,
) {
    out.clear();
    let t = wt.t();
    for &[a, b] in g.edges() {
        let cap = wt.max_level(spins[a] as usize, spins[b] as usize);
        // t is the cumulative sum of r, so the first t_i above u has mass r_i / t_cap
        let u = rng.random::<f64>() * t[cap];
        let level = t[..cap].iter().position(|&ti| u < ti).unwrap_or(cap);
        out.push(level as Level);
    }
}

/// Single-site Gibbs conditional of the clock measure at a free vertex.
pub fn conditional_spin_weights(
    sigma: &SpinConfig,
    x: VertexId,
    g: &Graph,
    wt: &WeightTable,
) -> Result<Vec<f64>> {
    if g.is_boundary(x) {
        return Err(domain(format!("vertex {x} is on the boundary")));
    }
    let q = wt.q();
    let energies: Vec<f64> = (0..q)
        .map(|a| {
            g.neighbors(x)
                .iter()
                .map(|nb| {
                    crate::clock::class_cost(pair_class(a, sigma.get(nb.vertex) as usize, q), q)
                })
                .sum()
        })
        .collect();
    let floor = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies
        .iter()
        .map(|e| (-wt.beta() * (e - floor)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn single_edge() -> Graph {
        // x = 0 free, y = 1 boundary
        Graph::new(2, [1], [(0, 1)]).unwrap()
    }

    #[test]
    fn bottom_level_imposes_nothing() {
        let g = Graph::new(3, [0], [(0, 1), (1, 2), (0, 2)]).unwrap();
        let wt = WeightTable::new(4, 1.0).unwrap();
        let omega = EdgeConfig::constant(wt.k(), 3, 0).unwrap();
        for code in 0..16u16 {
            let sigma = SpinConfig::new(4, vec![0, code % 4, code / 4]).unwrap();
            assert!(is_compatible(&omega, &sigma, &g, &wt));
        }
        let bottom = EdgeConfig::enlarged(wt.k(), vec![EdgeValue::Bottom; 3]).unwrap();
        let sigma = SpinConfig::new(4, vec![0, 2, 1]).unwrap();
        assert!(is_compatible(&bottom, &sigma, &g, &wt));
    }

    #[test]
    fn top_level_forces_equal_spins() {
        let g = single_edge();
        let wt = WeightTable::new(3, 1.0).unwrap();
        let top = EdgeConfig::constant(wt.k(), 1, wt.k() as Level).unwrap();
        assert!(!is_compatible(
            &top,
            &SpinConfig::new(3, vec![1, 0]).unwrap(),
            &g,
            &wt
        ));
        assert!(is_compatible(
            &top,
            &SpinConfig::new(3, vec![0, 0]).unwrap(),
            &g,
            &wt
        ));
    }

    #[test]
    fn middle_level_for_four_states() {
        let g = single_edge();
        let wt = WeightTable::new(4, 1.0).unwrap();
        let omega = EdgeConfig::constant(wt.k(), 1, 1).unwrap();
        assert!(is_compatible(
            &omega,
            &SpinConfig::new(4, vec![1, 0]).unwrap(),
            &g,
            &wt
        ));
        assert!(is_compatible(
            &omega,
            &SpinConfig::new(4, vec![3, 0]).unwrap(),
            &g,
            &wt
        ));
        assert!(!is_compatible(
            &omega,
            &SpinConfig::new(4, vec![2, 0]).unwrap(),
            &g,
            &wt
        ));
    }

    #[test]
    fn product_weights() {
        let wt = WeightTable::new(4, 1.0).unwrap();
        let empty = EdgeConfig::from_levels(wt.k(), []).unwrap();
        assert_eq!(hat_phi_weight(&empty, &wt).unwrap(), 1.0);
        let top = EdgeConfig::constant(wt.k(), 1, 2).unwrap();
        assert_eq!(hat_phi_weight(&top, &wt).unwrap(), wt.r()[2]);
        let two = EdgeConfig::from_levels(wt.k(), [0, 2]).unwrap();
        let w = hat_phi_weight(&two, &wt).unwrap();
        assert!((w - 0.085548_f64).abs() < 1e-5, "{w}");
        let bottom = EdgeConfig::enlarged(wt.k(), vec![EdgeValue::Bottom]).unwrap();
        assert!(hat_phi_weight(&bottom, &wt).is_err());
        assert!(EdgeConfig::from_levels(2, [3]).is_err());
        assert!(EdgeConfig::constant(2, 2, 1)
            .unwrap()
            .with_edge(0, EdgeValue::Bottom)
            .is_err());
    }

    #[test]
    fn single_edge_random_cluster_weights() {
        let g = single_edge();
        let wt = WeightTable::new(2, 1.0).unwrap();
        let top = EdgeConfig::constant(1, 1, 1).unwrap();
        let low = EdgeConfig::constant(1, 1, 0).unwrap();
        assert_eq!(compatible_count(&top, &g, &wt).unwrap(), 1);
        assert_eq!(compatible_count(&low, &g, &wt).unwrap(), 2);
        let wt_top = phi_weight_unnormalized(&top, &g, &wt).unwrap();
        let wt_low = phi_weight_unnormalized(&low, &g, &wt).unwrap();
        let e2 = (-2.0f64).exp();
        assert!((wt_top - (1.0 - e2)).abs() < 1e-15);
        assert!((wt_low - 2.0 * e2).abs() < 1e-15);
        let phi_top = wt_top / (wt_top + wt_low);
        assert!((phi_top - (1.0 - e2) / (1.0 + e2)).abs() < 1e-15);
    }

    #[test]
    fn counting_edge_cases() {
        let edgeless = Graph::new(4, [0], []).unwrap();
        let wt = WeightTable::new(3, 1.0).unwrap();
        let empty = EdgeConfig::from_levels(wt.k(), []).unwrap();
        assert_eq!(compatible_count(&empty, &edgeless, &wt).unwrap(), 27);

        let g = Graph::new(4, [0], [(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let top = EdgeConfig::constant(wt.k(), 4, 1).unwrap();
        assert!(compatible_count(&top, &g, &wt).unwrap() >= 1);

        let big = Graph::new(40, [0], []).unwrap();
        let empty = EdgeConfig::from_levels(wt.k(), []).unwrap();
        assert!(matches!(
            compatible_count(&empty, &big, &wt),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn monotone_in_edge_values() {
        let graphs = [
            Graph::new(3, [0], [(0, 1), (1, 2)]).unwrap(),
            Graph::new(3, [0], [(0, 1), (1, 2), (0, 2)]).unwrap(),
            Graph::new(4, [0], [(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap(),
        ];
        for g in &graphs {
            for q in 2..=4 {
                let wt = WeightTable::new(q, 1.0).unwrap();
                let base = wt.n_levels();
                let m = g.n_edges();
                let n_omega = base.pow(m as u32);
                let omegas: Vec<EdgeConfig> = (0..n_omega)
                    .map(|code| {
                        let levels = (0..m).map(|e| ((code / base.pow(e as u32)) % base) as Level);
                        EdgeConfig::from_levels(wt.k(), levels).unwrap()
                    })
                    .collect();
                let n_sigma = q.pow(g.n_free() as u32);
                for code in 0..n_sigma {
                    let mut spins = vec![0; g.n_vertices()];
                    for (i, v) in g.free_vertices().into_iter().enumerate() {
                        spins[v] = ((code / q.pow(i as u32)) % q) as Spin;
                    }
                    let sigma = SpinConfig::new(q, spins).unwrap();
                    for hi in &omegas {
                        if !is_compatible(hi, &sigma, g, &wt) {
                            continue;
                        }
                        for lo in omegas.iter().filter(|lo| lo.le(hi)) {
                            assert!(is_compatible(lo, &sigma, g, &wt));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn counts_are_rotation_invariant() {
        // Rotating every spin by s maps {σ ⪰ ω, σ_U = 0} onto {σ ⪰ ω, σ_U = s}.
        let g = Graph::new(4, [0], [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let q = 5;
        let wt = WeightTable::new(q, 1.0).unwrap();
        let base = wt.n_levels();
        for code in 0..base.pow(4) {
            let levels: Vec<Level> = (0..4)
                .map(|e| ((code / base.pow(e)) % base) as Level)
                .collect();
            let zero = CompatibleSpins::new(&g, q, wt.k(), &levels, &[])
                .unwrap()
                .count();
            for s in 1..q {
                // brute force with boundary value s
                let mut n = 0;
                for c in 0..q.pow(3) {
                    let spins = [s, c % q, (c / q) % q, c / (q * q)];
                    let ok =
                        g.edges().iter().enumerate().all(|(e, &[a, b])| {
                            levels[e] as usize <= wt.max_level(spins[a], spins[b])
                        });
                    n += ok as u64;
                }
                assert_eq!(n, zero);
            }
        }
    }

    #[test]
    fn pinned_enumeration() {
        let g = Graph::new(3, [0], [(0, 1), (1, 2)]).unwrap();
        let levels = [1 as Level, 0];
        // q = 3, k = 1: edge (0,1) at top forces σ_1 = 0; σ_2 free
        let all = CompatibleSpins::new(&g, 3, 1, &levels, &[])
            .unwrap()
            .count();
        assert_eq!(all, 3);
        assert_eq!(
            CompatibleSpins::new(&g, 3, 1, &levels, &[(1, 1)])
                .unwrap()
                .count(),
            0
        );
        assert_eq!(
            CompatibleSpins::new(&g, 3, 1, &levels, &[(2, 2)])
                .unwrap()
                .count(),
            1
        );
        assert_eq!(
            CompatibleSpins::new(&g, 3, 1, &levels, &[(0, 1)])
                .unwrap()
                .count(),
            0
        );
        assert_eq!(
            CompatibleSpins::new(&g, 3, 1, &levels, &[(0, 0)])
                .unwrap()
                .count(),
            3
        );
    }

    #[test]
    fn edge_sampler_limits() {
        let g = single_edge();
        let wt = WeightTable::new(4, 1.0).unwrap();
        let mut rng = stream_rng(3, 0);
        let antipodal = SpinConfig::new(4, vec![2, 0]).unwrap();
        for _ in 0..200 {
            let omega = sample_edges_given_spins(&antipodal, &g, &wt, &mut rng);
            assert_eq!(omega.get(0), EdgeValue::Level(0));
        }
        // class 1: levels (0, 1) with probabilities (e^-1, 1 - e^-1)
        let near = SpinConfig::new(4, vec![1, 0]).unwrap();
        let n = 200_000;
        let mut ones = 0;
        for _ in 0..n {
            let omega = sample_edges_given_spins(&near, &g, &wt, &mut rng);
            assert!(omega.get(0) <= EdgeValue::Level(1));
            ones += (omega.get(0) == EdgeValue::Level(1)) as usize;
        }
        let p = 0.6321205588285577;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((ones as f64 / n as f64) - p).abs() < 4.0 * se);

        // equal spins: the level law is θ itself
        let equal = SpinConfig::new(4, vec![0, 0]).unwrap();
        let mut hist = [0usize; 3];
        for _ in 0..n {
            if let EdgeValue::Level(l) = sample_edges_given_spins(&equal, &g, &wt, &mut rng).get(0)
            {
                hist[l as usize] += 1;
            }
        }
        for (i, &h) in hist.iter().enumerate() {
            let p = wt.r()[i];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(((h as f64 / n as f64) - p).abs() < 4.0 * se, "level {i}");
        }
    }

    #[test]
    fn gibbs_conditional_examples() {
        let isolated = Graph::new(2, [0], []).unwrap();
        let wt = WeightTable::new(5, 1.0).unwrap();
        let sigma = SpinConfig::constant(5, 2, 0).unwrap();
        let w = conditional_spin_weights(&sigma, 1, &isolated, &wt).unwrap();
        assert!(w.iter().all(|&p| (p - 0.2).abs() < 1e-15));
        assert!(conditional_spin_weights(&sigma, 0, &isolated, &wt).is_err());

        let g = single_edge();
        let wt = WeightTable::new(2, 1.0).unwrap();
        let sigma = SpinConfig::constant(2, 2, 0).unwrap();
        let w = conditional_spin_weights(&sigma, 0, &g, &wt).unwrap();
        let e2 = (-2.0f64).exp();
        assert!((w[0] - 1.0 / (1.0 + e2)).abs() < 1e-15);
        assert!((w[1] - e2 / (1.0 + e2)).abs() < 1e-15);

        // centre of a star with four neighbours at spin 2, q = 3, β = 20
        let star = Graph::new(5, [1, 2, 3, 4], [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let wt = WeightTable::new(3, 20.0).unwrap();
        let sigma = SpinConfig::new(3, vec![0, 2, 2, 2, 2]).unwrap();
        let w = conditional_spin_weights(&sigma, 0, &star, &wt).unwrap();
        assert!(w[2] > 1.0 - 1e-6);
    }

    #[test]
    fn json_levels() {
        let omega = EdgeConfig::from_levels(2, [0, 2, 1]).unwrap();
        let text = omega.to_json().unwrap();
        assert_eq!(text, "[0,2,1]");
        assert_eq!(EdgeConfig::from_json(2, &text).unwrap(), omega);
        let bottom = EdgeConfig::from_json(2, "[null,1]").unwrap();
        assert!(bottom.is_enlarged());
        assert_eq!(bottom.get(0), EdgeValue::Bottom);
        assert!(EdgeConfig::from_json(1, "[2]").is_err());
    }
}
