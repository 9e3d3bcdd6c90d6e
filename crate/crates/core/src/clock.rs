//! Spin set, weight function, level table and Hamiltonian of the clock model.
//!
//! A spin is an index `i ∈ 0..q` standing for the angle `2πi/q`. The weight
//! `W(a) = exp(-β(1 - cos a))` of a spin difference only depends on its
//! angular-distance class `c = min(i - j mod q, j - i mod q) ∈ 0..=k`, so the
//! distinct weights are indexed by class and sorted into levels
//! `t_0 < … < t_k = 1` with level `i = k - c`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{domain, input, Result};
use crate::graph::Graph;

pub type Spin = u16;

/// Largest supported number of spin values.
pub const MAX_Q: usize = Spin::MAX as usize + 1;

/// Angular-distance class of the spin pair `(i, j)`.
#[inline]
pub fn pair_class(i: usize, j: usize, q: usize) -> usize {
    let d = (i + q - j) % q;
    d.min(q - d)
}

/// `k = ⌊q/2⌋`: the largest class, and the top level index.
pub fn top_level(q: usize) -> usize {
    q / 2
}

/// `1 - cos(2πc/q)`, evaluated as `2 sin²(πc/q)` to avoid cancellation.
pub fn class_cost(c: usize, q: usize) -> f64 {
    let s = (PI * c as f64 / q as f64).sin();
    2.0 * s * s
}

/// Levels `t_i`, increments `r_i` and pair degeneracies `K_i` for one `(q, β)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightTable {
    q: usize,
    beta: f64,
    k: usize,
    t: Vec<f64>,
    r: Vec<f64>,
    #[serde(rename = "K")]
    degeneracy: Vec<u64>,
}

impl WeightTable {
    pub fn new(q: usize, beta: f64) -> Result<Self> {
        if !(2..=MAX_Q).contains(&q) {
            return Err(domain(format!("q must lie in 2..={MAX_Q}, got {q}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        let k = top_level(q);
        let cost: Vec<f64> = (0..=k).map(|c| class_cost(c, q)).collect();
        let t: Vec<f64> = (0..=k).map(|i| (-beta * cost[k - i]).exp()).collect();
        // r_i = t_i - t_{i-1} = t_i (1 - exp(-β (cost_{c+1} - cost_c))) with c = k - i
        let r: Vec<f64> = (0..=k)
            .map(|i| {
                if i == 0 {
                    t[0]
                } else {
                    let gap = cost[k - i + 1] - cost[k - i];
                    -t[i] * (-beta * gap).exp_m1()
                }
            })
            .collect();
        let degeneracy = (0..=k)
            .map(|i| {
                let c = k - i;
                if c == 0 || 2 * c == q {
                    q as u64
                } else {
                    2 * q as u64
                }
            })
            .collect();
        Ok(WeightTable {
            q,
            beta,
            k,
            t,
            r,
            degeneracy,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Top level index; also the number of levels minus one.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_levels(&self) -> usize {
        self.k + 1
    }

    /// Sorted distinct weights `t_0 < … < t_k = 1`.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Increments `r_0 = t_0`, `r_i = t_i - t_{i-1}`; the level law `θ`.
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// `K_i`: number of ordered spin pairs whose weight is `t_i`.
    pub fn degeneracy(&self) -> &[u64] {
        &self.degeneracy
    }

    #[inline]
    pub fn level_of_class(&self, c: usize) -> usize {
        self.k - c
    }

    #[inline]
    pub fn class_of_level(&self, level: usize) -> usize {
        self.k - level
    }

    /// `W` of a spin pair at class `c`.
    #[inline]
    pub fn weight_of_class(&self, c: usize) -> f64 {
        self.t[self.k - c]
    }

    /// `W(σ_i - σ_j)` for two spin indices.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weight_of_class(pair_class(i, j, self.q))
    }

    /// Highest level an edge may carry next to spins `i`, `j` (compatibility bound).
    #[inline]
    pub fn max_level(&self, i: usize, j: usize) -> usize {
        self.k - pair_class(i, j, self.q)
    }

    /// `θ(t_i) = r_i`.
    pub fn theta(&self, level: usize) -> f64 {
        self.r[level]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Spin index per vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    q: usize,
    spins: Vec<Spin>,
}

impl SpinConfig {
    pub fn new(q: usize, spins: Vec<Spin>) -> Result<Self> {
        if !(2..=MAX_Q).contains(&q) {
            return Err(domain(format!("q must lie in 2..={MAX_Q}, got {q}")));
        }
        if let Some(&s) = spins.iter().find(|&&s| s as usize >= q) {
            return Err(input(format!("spin {s} out of range 0..{q}")));
        }
        Ok(SpinConfig { q, spins })
    }

    /// All spins equal to `value`.
    pub fn constant(q: usize, n: usize, value: Spin) -> Result<Self> {
        Self::new(q, vec![value; n])
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn get(&self, v: usize) -> Spin {
        self.spins[v]
    }

    pub fn set(&mut self, v: usize, s: Spin) {
        assert!((s as usize) < self.q, "spin {s} out of range 0..{}", self.q);
        self.spins[v] = s;
    }

    /// `σ = value` on every boundary vertex of `g`.
    pub fn satisfies_boundary(&self, g: &Graph, value: Spin) -> bool {
        g.boundary().iter().all(|&u| self.spins[u] == value)
    }

    pub fn into_spins(self) -> Vec<Spin> {
        self.spins
    }
}

/// `H(σ) = Σ_{⟨xy⟩} (1 - cos(σ_x - σ_y))`.
pub fn hamiltonian(g: &Graph, sigma: &SpinConfig, wt: &WeightTable) -> f64 {
    energy_of(g, sigma.spins(), wt.q())
}

pub(crate) fn energy_of(g: &Graph, spins: &[Spin], q: usize) -> f64 {
    g.edges()
        .iter()
        .map(|&[a, b]| class_cost(pair_class(spins[a] as usize, spins[b] as usize, q), q))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    const E: f64 = std::f64::consts::E;

    /// Buckets `W(a - b)` over all of `S × S` by float value (test-only oracle).
    fn bucket_weights(q: usize, beta: f64) -> Vec<(f64, u64)> {
        let mut buckets: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
        for a in 0..q {
            for b in 0..q {
                let angle = 2.0 * PI * (a as f64 - b as f64) / q as f64;
                let w = (-beta * (1.0 - angle.cos())).exp();
                let key = (w * 1e9).round() as i64;
                let entry = buckets.entry(key).or_insert((w, 0));
                entry.1 += 1;
            }
        }
        buckets.into_values().collect()
    }

    #[test]
    fn ising_table() {
        let wt = WeightTable::new(2, 1.0).unwrap();
        assert_eq!(wt.k(), 1);
        let e2 = E.powi(-2);
        assert!((wt.t()[0] - e2).abs() < 1e-15);
        assert_eq!(wt.t()[1], 1.0);
        assert!((wt.r()[0] - e2).abs() < 1e-15);
        assert!((wt.r()[1] - (1.0 - e2)).abs() < 1e-15);
        assert_eq!(wt.degeneracy(), &[2, 2]);
    }

    #[test]
    fn four_state_table() {
        let wt = WeightTable::new(4, 1.0).unwrap();
        assert_eq!(wt.k(), 2);
        let expect_t = [0.1353352832366127, 0.36787944117144233, 1.0];
        let expect_r = [0.1353352832366127, 0.23254415793482963, 0.6321205588285577];
        for i in 0..3 {
            assert!((wt.t()[i] - expect_t[i]).abs() < 1e-15);
            assert!((wt.r()[i] - expect_r[i]).abs() < 1e-15);
        }
        assert_eq!(wt.degeneracy(), &[4, 8, 4]);
    }

    #[test]
    fn three_state_table() {
        let wt = WeightTable::new(3, 2.0).unwrap();
        assert_eq!(wt.k(), 1);
        assert!((wt.t()[0] - E.powi(-3)).abs() < 1e-15);
        assert_eq!(wt.degeneracy(), &[6, 3]);
    }

    #[test]
    fn tables_match_bucketed_weights() {
        for q in 2..=9 {
            for beta in [0.3, 1.0, 2.5] {
                let wt = WeightTable::new(q, beta).unwrap();
                let buckets = bucket_weights(q, beta);
                assert_eq!(buckets.len(), wt.n_levels(), "q={q}");
                for (i, &(w, count)) in buckets.iter().enumerate() {
                    assert!((wt.t()[i] - w).abs() < 1e-12, "q={q} level {i}");
                    assert_eq!(wt.degeneracy()[i], count, "q={q} level {i}");
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(WeightTable::new(1, 1.0).is_err());
        assert!(WeightTable::new(3, 0.0).is_err());
        assert!(WeightTable::new(3, -1.0).is_err());
        assert!(WeightTable::new(3, f64::NAN).is_err());
        assert!(SpinConfig::new(3, vec![0, 3]).is_err());
    }

    #[test]
    fn class_examples() {
        assert_eq!(pair_class(2, 2, 5), 0);
        assert_eq!(pair_class(0, 2, 4), 2);
        assert_eq!(pair_class(1, 4, 5), 2);
    }

    #[test]
    fn hamiltonian_examples() {
        let edge = Graph::new(2, [0], [(0, 1)]).unwrap();
        let wt2 = WeightTable::new(2, 1.0).unwrap();
        let sigma = SpinConfig::new(2, vec![0, 1]).unwrap();
        assert!((hamiltonian(&edge, &sigma, &wt2) - 2.0).abs() < 1e-15);
        let flat = SpinConfig::constant(2, 2, 1).unwrap();
        assert_eq!(hamiltonian(&edge, &flat, &wt2), 0.0);

        let triangle = Graph::new(3, [0], [(0, 1), (1, 2), (0, 2)]).unwrap();
        let wt3 = WeightTable::new(3, 1.0).unwrap();
        let sigma = SpinConfig::new(3, vec![0, 1, 2]).unwrap();
        assert!((hamiltonian(&triangle, &sigma, &wt3) - 4.5).abs() < 1e-14);
    }

    #[test]
    fn level_sums_and_ordering_up_to_64() {
        for q in 2..=64 {
            for beta in [0.01, 0.1, 0.5, 1.0, 3.0, 7.0, 20.0] {
                let wt = WeightTable::new(q, beta).unwrap();
                let sum: f64 = wt.r().iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "q={q} beta={beta} sum={sum}");
                assert!(wt.t().windows(2).all(|w| w[0] < w[1]), "q={q} beta={beta}");
                assert_eq!(*wt.t().last().unwrap(), 1.0);
                assert!(wt.r().iter().all(|&r| r > 0.0 && r <= 1.0));
                assert_eq!(wt.degeneracy().iter().sum::<u64>(), (q * q) as u64);
                assert_eq!(wt.degeneracy()[wt.k()], q as u64);
            }
        }
    }

    proptest! {
        #[test]
        fn class_is_symmetric_and_rotation_invariant(q in 2usize..40, i in 0usize..40, j in 0usize..40, s in 0usize..40) {
            let (i, j, s) = (i % q, j % q, s % q);
            let c = pair_class(i, j, q);
            prop_assert!(c <= top_level(q));
            prop_assert_eq!(c, pair_class(j, i, q));
            prop_assert_eq!(c, pair_class((i + s) % q, (j + s) % q, q));
        }

        #[test]
        fn hamiltonian_vanishes_on_constant_components(q in 2usize..6, spins in proptest::collection::vec(0u16..6, 4)) {
            let path = Graph::new(4, [0], [(0, 1), (1, 2), (2, 3)]).unwrap();
            let wt = WeightTable::new(q, 1.0).unwrap();
            let spins: Vec<Spin> = spins.into_iter().map(|s| s % q as Spin).collect();
            let constant = spins.windows(2).all(|w| w[0] == w[1]);
            let h = hamiltonian(&path, &SpinConfig::new(q, spins).unwrap(), &wt);
            prop_assert!(h >= 0.0);
            prop_assert_eq!(h == 0.0, constant);
        }
    }
}
