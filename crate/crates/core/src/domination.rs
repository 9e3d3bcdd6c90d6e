//! The threshold function `φ(β)` behind the single-bond domination argument,
//! its inverse `β₀(ρ)`, and the closed-form upper bound on `β₀`.

use serde::Serialize;

use crate::clock::WeightTable;
use crate::error::{domain, Result};
use crate::graph::Graph;
use crate::oracle::{min_single_bond_alpha, ExactDistributions};

/// `φ(β) = (Σ_j (t_j / r_k)(K_j / K_k))^{-1}` for `q` spins.
pub fn varphi(beta: f64, q: usize) -> Result<f64> {
    Ok(varphi_of(&WeightTable::new(q, beta)?))
}

pub fn varphi_of(wt: &WeightTable) -> f64 {
    let k = wt.k();
    let r_k = wt.r()[k];
    let k_k = wt.degeneracy()[k] as f64;
    let sum: f64 = wt
        .t()
        .iter()
        .zip(wt.degeneracy())
        .map(|(t, &deg)| t / r_k * (deg as f64 / k_k))
        .sum();
    1.0 / sum
}

/// Result of inverting `φ` by bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bisection {
    pub beta: f64,
    /// `φ(beta) - ρ`.
    pub residual: f64,
    pub iterations: u32,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
}

const BRACKET: (f64, f64) = (1e-6, 50.0);
const BETA_TOL: f64 = 1e-12;

/// `β₀(ρ) = φ^{-1}(ρ)`.
pub fn beta0(rho: f64, q: usize) -> Result<f64> {
    Ok(beta0_bisection(rho, q)?.beta)
}

/// Bisection for `φ(β) = ρ`. The bracket starts at `[1e-6, 50]` and is
/// widened geometrically when it does not contain the root, which happens
/// for large `q` or `ρ` close to 0 or 1.
pub fn beta0_bisection(rho: f64, q: usize) -> Result<Bisection> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    let f = |beta: f64| varphi(beta, q);
    let (mut lo, mut hi) = BRACKET;
    while f(lo)? >= rho {
        lo /= 2.0;
        if lo < 1e-300 {
            return Err(domain(format!(
                "no root of varphi = {rho} above 0 for q = {q}"
            )));
        }
    }
    while f(hi)? <= rho {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(domain(format!("varphi stays below {rho} for q = {q}")));
        }
    }
    let mut iterations = 0;
    while hi - lo > BETA_TOL * hi.max(1.0) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < rho {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let beta = 0.5 * (lo + hi);
    Ok(Bisection {
        beta,
        residual: f(beta)? - rho,
        iterations,
        lo,
        hi,
    })
}

/// `log((p + q p_c) / (p - p_c)) / (1 - cos(2π/q))`: the explicit solution of
/// `p_c / p = r_k / (1 + q t_{k-1})`, which bounds `β₀(p_c / p)` from above.
pub fn beta0_upper_bound(p: f64, q: usize, p_c: f64) -> Result<f64> {
    if q < 2 {
        return Err(domain(format!("q must be at least 2, got {q}")));
    }
    if !(p_c > 0.0 && p_c < 1.0) {
        return Err(domain(format!("p_c must lie in (0, 1), got {p_c}")));
    }
    if !(p > p_c && p <= 1.0) {
        return Err(domain(format!(
            "need p_c < p <= 1, got p = {p}, p_c = {p_c}"
        )));
    }
    let angle = std::f64::consts::TAU / q as f64;
    Ok(((p + q as f64 * p_c) / (p - p_c)).ln() / (1.0 - angle.cos()))
}

/// Critical bond-percolation probability when it is known exactly: `1/2` on
/// the square lattice (a classical result, not derived here). Other
/// dimensions must be supplied by the caller or estimated.
pub fn critical_bond_probability(d: usize) -> Option<f64> {
    (d == 2).then_some(0.5)
}

/// Samples of `φ` on a `β` grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdCurve {
    pub q: usize,
    pub points: Vec<(f64, f64)>,
}

impl ThresholdCurve {
    pub fn is_strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].1 > w[0].1)
    }
}

/// `φ` at `points` equally spaced values of `β` in `[beta_min, beta_max]`.
pub fn phi_curve(q: usize, beta_min: f64, beta_max: f64, points: usize) -> Result<ThresholdCurve> {
    if !(beta_min > 0.0 && beta_max >= beta_min) || points == 0 {
        return Err(domain(
            "need 0 < beta_min <= beta_max and at least one point",
        ));
    }
    let step = if points > 1 {
        (beta_max - beta_min) / (points - 1) as f64
    } else {
        0.0
    };
    let points = (0..points)
        .map(|i| {
            let beta = beta_min + step * i as f64;
            varphi(beta, q).map(|v| (beta, v))
        })
        .collect::<Result<_>>()?;
    Ok(ThresholdCurve { q, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaBoundReport {
    /// Smallest single-bond conditional; `1` for an edgeless graph.
    pub min_alpha: f64,
    pub varphi: f64,
    pub slack: f64,
}

impl AlphaBoundReport {
    pub fn passes(&self) -> bool {
        self.slack >= -crate::oracle::EXACT_TOL
    }
}

/// Checks `α(e, ω') ≥ φ(β)` for every edge and every rest configuration.
pub fn verify_alpha_bound(g: &Graph, wt: &WeightTable) -> Result<AlphaBoundReport> {
    let dist = ExactDistributions::enumerate(g, wt)?;
    Ok(alpha_bound_of(&dist))
}

pub(crate) fn alpha_bound_of(dist: &ExactDistributions) -> AlphaBoundReport {
    let min_alpha = min_single_bond_alpha(dist).map_or(1.0, |m| m.alpha);
    let varphi = varphi_of(dist.weights());
    AlphaBoundReport {
        min_alpha,
        varphi,
        slack: min_alpha - varphi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_q4(beta: f64) -> f64 {
        let x = (-beta).exp();
        (1.0 - x) / (x * x + 2.0 * x + 1.0)
    }

    #[test]
    fn four_state_closed_form() {
        assert!((varphi(1.0, 4).unwrap() - 0.33783471214704114).abs() < 1e-14);
        for i in 0..=2000 {
            let beta = 0.01 + (20.0 - 0.01) * i as f64 / 2000.0;
            assert!(
                (varphi(beta, 4).unwrap() - closed_form_q4(beta)).abs() < 1e-12,
                "beta {beta}"
            );
        }
    }

    #[test]
    fn two_state_is_tanh() {
        assert!((varphi(1.0, 2).unwrap() - 1.0f64.tanh()).abs() < 1e-15);
        assert!((beta0(1.0f64.tanh(), 2).unwrap() - 1.0).abs() < 1e-9);
        for q in 2..=6 {
            assert!(varphi(20.0, q).unwrap() > 0.999);
        }
    }

    #[test]
    fn quadratic_root_for_four_states() {
        // 0.6 (x² + 2x + 1) = 1 - x  ⇒  0.6x² + 2.2x - 0.4 = 0
        let x = (-2.2 + (2.2f64 * 2.2 + 4.0 * 0.6 * 0.4).sqrt()) / 1.2;
        let exact = -x.ln();
        let b = beta0_bisection(0.6, 4).unwrap();
        assert!((b.beta - exact).abs() < 1e-9);
        assert!((b.beta - 1.751).abs() < 1e-3);
        assert!(b.residual.abs() < 1e-8);
        assert!(b.lo <= exact && exact <= b.hi);
    }

    #[test]
    fn beta0_domain_and_monotonicity() {
        assert!(beta0(0.0, 4).is_err());
        assert!(beta0(1.0, 4).is_err());
        assert!(beta0(f64::NAN, 4).is_err());
        let mut last = 0.0;
        for i in 1..20 {
            let b = beta0(i as f64 / 20.0, 5).unwrap();
            assert!(b > last);
            last = b;
        }
        // outside the default bracket
        let b = beta0_bisection(0.95, 64).unwrap();
        assert!(b.beta > 50.0 && b.residual.abs() < 1e-8);
    }

    #[test]
    fn strictly_increasing_on_a_grid() {
        for q in [2, 3, 4, 7, 16, 64] {
            let hi = 10.0 / (1.0 - (std::f64::consts::TAU / q as f64).cos());
            let curve = phi_curve(q, 1e-3, hi, 1000).unwrap();
            assert!(curve.is_strictly_increasing(), "q {q}");
            assert!(curve.points[0].1 < 0.01);
            assert!(curve.points.last().unwrap().1 > 0.99);
        }
    }

    #[test]
    fn closed_form_bound() {
        assert!((beta0_upper_bound(1.0, 2, 0.5).unwrap() - 4f64.ln() / 2.0).abs() < 1e-12);
        assert!(beta0_upper_bound(0.5, 4, 0.5).is_err());
        assert!(beta0_upper_bound(0.4, 4, 0.5).is_err());
        // the bound sits above β₀ at the optimal endpoint
        for q in 2..=16 {
            for p in [0.6, 0.8, 1.0] {
                let bound = beta0_upper_bound(p, q, 0.5).unwrap();
                assert!(varphi(bound, q).unwrap() >= 0.5 / p - 1e-12);
                assert!(bound >= beta0(0.5 / p + 1e-9, q).unwrap());
            }
        }
        // large d with p_c = 1/(2d): bound approaches log(1 + 1/d) / (1 - cos(2π/q))
        let q = 6;
        let denom = 1.0 - (std::f64::consts::TAU / q as f64).cos();
        for d in [10usize, 100, 1000] {
            let pc = 1.0 / (2.0 * d as f64);
            let bound = beta0_upper_bound(1.0, q, pc).unwrap();
            let leading = (1.0 + 1.0 / d as f64).ln() / denom;
            assert!(bound > leading);
        }
        let far = beta0_upper_bound(1.0, q, 1.0 / 2e6).unwrap();
        assert!(far < 1e-5);
    }

    #[test]
    fn bound_is_not_pointwise_above_beta0() {
        // β₀(ρ) diverges as ρ → 1, so no finite bound dominates it pointwise
        let bound = beta0_upper_bound(1.0, 4, 0.5).unwrap();
        assert!(beta0(0.999, 4).unwrap() > bound);
    }

    #[test]
    fn order_q_squared_log_q() {
        let ratio =
            |q: usize| beta0_upper_bound(1.0, q, 0.5).unwrap() / ((q * q) as f64 * (q as f64).ln());
        let (a, b) = (ratio(64), ratio(256));
        assert!((a - b).abs() / a < 0.1);
    }

    #[test]
    fn single_edge_saturates() {
        let g = Graph::new(2, [1], [(0, 1)]).unwrap();
        let r = verify_alpha_bound(&g, &WeightTable::new(2, 1.0).unwrap()).unwrap();
        assert!(r.slack.abs() < 1e-14);
        assert!(r.passes());
    }

    #[test]
    fn triangle_slack() {
        let g = Graph::new(3, [0], [(0, 1), (1, 2), (0, 2)]).unwrap();
        for q in 2..=5 {
            for beta in [0.5, 1.0, 4.0] {
                let r = verify_alpha_bound(&g, &WeightTable::new(q, beta).unwrap()).unwrap();
                assert!(r.passes(), "q {q} beta {beta}: {r:?}");
            }
        }
    }

    #[test]
    fn known_pc() {
        assert_eq!(critical_bond_probability(2), Some(0.5));
        assert_eq!(critical_bond_probability(3), None);
    }
}
