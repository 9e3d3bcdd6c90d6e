//! Bernoulli bond percolation on boxes: disorder sampling with a monotone
//! coupling, random thinning, boundary-connection estimates and a
//! crossing-probability estimate of the square-lattice critical point.

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, input, Result};
use crate::exec::Exec;
use crate::graph::{connected_to_boundary, BoxGraph, Disorder, Graph, VertexId};
use crate::rng::stream_rng;
use crate::stats::{chi_square_two_sample, ChiSquare};
use crate::union_find::UnionFind;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// One uniform per edge; the disorder at `p` opens the edges whose uniform
/// is below `p`, so open sets grow monotonically with `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledDisorder {
    pub uniforms: Vec<f64>,
}

impl CoupledDisorder {
    pub fn sample<R: Rng + ?Sized>(n_edges: usize, rng: &mut R) -> Self {
        CoupledDisorder {
            uniforms: (0..n_edges).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn at(&self, p: f64) -> Disorder {
        Disorder {
            open: self.uniforms.iter().map(|&u| u < p).collect(),
        }
    }
}

/// Each edge of `g` open independently with probability `p`.
pub fn sample_disorder<R: Rng + ?Sized>(g: &Graph, p: f64, rng: &mut R) -> Result<Disorder> {
    check_probability("p", p)?;
    Ok(CoupledDisorder::sample(g.n_edges(), rng).at(p))
}

/// Keeps each open edge of `j` open with probability `rho`.
pub fn thin<R: Rng + ?Sized>(j: &Disorder, rho: f64, rng: &mut R) -> Result<Disorder> {
    check_probability("rho", rho)?;
    Ok(Disorder {
        open: j
            .open
            .iter()
            .map(|&o| rng.random::<f64>() < rho && o)
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PercolationEstimate {
    pub p: f64,
    pub n: usize,
    pub samples: usize,
    pub estimate: f64,
    pub stderr: f64,
}

impl PercolationEstimate {
    fn from_hits(p: f64, n: usize, samples: usize, hits: usize) -> Self {
        let estimate = hits as f64 / samples as f64;
        PercolationEstimate {
            p,
            n,
            samples,
            estimate,
            stderr: (estimate * (1.0 - estimate) / samples as f64).sqrt(),
        }
    }
}

/// Monte Carlo estimate of `P_p(x ↔ ∂Λ_n)` in the box `Λ_n ⊂ Z^d`; `x`
/// defaults to the origin. Sample `i` draws from stream `i` of `seed`.
pub fn estimate_connection(
    p: f64,
    n: usize,
    d: usize,
    x: Option<VertexId>,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<PercolationEstimate> {
    check_probability("p", p)?;
    if samples == 0 {
        return Err(input("need at least one sample"));
    }
    let lattice = BoxGraph::new(n, d)?;
    let g = lattice.graph();
    let x = x.unwrap_or_else(|| lattice.center());
    if x >= g.n_vertices() {
        return Err(input(format!("site {x} not in the box")));
    }
    let hits = exec
        .map(samples, |i| {
            let mut rng = stream_rng(seed, i as u64);
            let j = CoupledDisorder::sample(g.n_edges(), &mut rng).at(p);
            connected_to_boundary(g, &j, x)
        })
        .into_iter()
        .filter(|&c| c)
        .count();
    Ok(PercolationEstimate::from_hits(p, n, samples, hits))
}

/// Two-sample comparison of `thin(P_p, ρ)` against `P_{pρ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThinningReport {
    pub thinned_open_fraction: f64,
    pub direct_open_fraction: f64,
    pub open_fraction: ChiSquare,
    pub thinned_connection: f64,
    pub direct_connection: f64,
    pub connection: ChiSquare,
}

impl ThinningReport {
    pub fn passes(&self, significance: f64) -> bool {
        self.open_fraction.passes(significance) && self.connection.passes(significance)
    }
}

/// Open-edge frequency and origin-to-boundary connection frequency of the
/// two constructions on `Λ_n ⊂ Z^2`, `samples` boxes each.
pub fn thinning_check(
    p: f64,
    rho: f64,
    n: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<ThinningReport> {
    check_probability("p", p)?;
    check_probability("rho", rho)?;
    let lattice = BoxGraph::new(n, 2)?;
    let g = lattice.graph();
    let x = lattice.center();
    let stats = |offset: u64, thinned: bool| -> Result<(u64, u64)> {
        let per = exec.map(samples, |i| -> Result<(usize, bool)> {
            let mut rng = stream_rng(seed, offset + i as u64);
            let j = if thinned {
                thin(&sample_disorder(g, p, &mut rng)?, rho, &mut rng)?
            } else {
                sample_disorder(g, p * rho, &mut rng)?
            };
            Ok((j.n_open(), connected_to_boundary(g, &j, x)))
        });
        let mut open = 0u64;
        let mut hits = 0u64;
        for r in per {
            let (o, c) = r?;
            open += o as u64;
            hits += c as u64;
        }
        Ok((open, hits))
    };
    let (open_a, hits_a) = stats(0, true)?;
    let (open_b, hits_b) = stats(samples as u64, false)?;
    let edges = (samples * g.n_edges()) as u64;
    let s = samples as u64;
    Ok(ThinningReport {
        thinned_open_fraction: open_a as f64 / edges as f64,
        direct_open_fraction: open_b as f64 / edges as f64,
        open_fraction: chi_square_two_sample(open_a, edges, open_b, edges),
        thinned_connection: hits_a as f64 / s as f64,
        direct_connection: hits_b as f64 / s as f64,
        connection: chi_square_two_sample(hits_a, s, hits_b, s),
    })
}

/// Rectangle of `n + 1` columns by `n` rows of the square lattice: the
/// left-right crossing of this shape has probability exactly `1/2` at the
/// self-dual point, which removes the leading finite-size bias.
struct Rectangle {
    cols: usize,
    rows: usize,
    edges: Vec<[usize; 2]>,
}

impl Rectangle {
    fn new(n: usize) -> Self {
        let (cols, rows) = (n + 1, n);
        let id = |c: usize, r: usize| c * rows + r;
        let mut edges = Vec::with_capacity(2 * cols * rows);
        for c in 0..cols {
            for r in 0..rows {
                if c + 1 < cols {
                    edges.push([id(c, r), id(c + 1, r)]);
                }
                if r + 1 < rows {
                    edges.push([id(c, r), id(c, r + 1)]);
                }
            }
        }
        Rectangle { cols, rows, edges }
    }

    /// Smallest `p` at which the coupled configuration crosses left to right:
    /// edges are added in order of their uniforms until the two sides meet.
    fn crossing_threshold(
        &self,
        uniforms: &[f64],
        order: &mut Vec<usize>,
        uf: &mut UnionFind,
    ) -> f64 {
        let sites = self.cols * self.rows;
        let (left, right) = (sites, sites + 1);
        uf.reset(sites + 2);
        for r in 0..self.rows {
            uf.union(left, r);
            uf.union(right, (self.cols - 1) * self.rows + r);
        }
        order.clear();
        order.extend(0..self.edges.len());
        order.sort_unstable_by(|&a, &b| uniforms[a].total_cmp(&uniforms[b]));
        for &e in order.iter() {
            let [a, b] = self.edges[e];
            uf.union(a, b);
            if uf.connected(left, right) {
                return uniforms[e];
            }
        }
        1.0
    }
}

/// Per-sample crossing thresholds of the `(n+1) × n` rectangle.
pub fn crossing_thresholds(n: usize, samples: usize, seed: u64, exec: Exec) -> Result<Vec<f64>> {
    if n == 0 || samples == 0 {
        return Err(input("need n >= 1 and at least one sample"));
    }
    let rect = Rectangle::new(n);
    Ok(exec.map(samples, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let u = CoupledDisorder::sample(rect.edges.len(), &mut rng).uniforms;
        rect.crossing_threshold(&u, &mut Vec::new(), &mut UnionFind::new(0))
    }))
}

/// Crossing probability at each grid point: the fraction of thresholds
/// strictly below `p`.
pub fn crossing_curve(thresholds: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = thresholds.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    grid.iter()
        .map(|&p| sorted.partition_point(|&t| t < p) as f64 / sorted.len() as f64)
        .collect()
}

/// `0, step, 2·step, …, 1`.
pub fn probability_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Where a nondecreasing sampled curve first reaches `level`, interpolated
/// linearly between grid points.
pub fn level_crossing(grid: &[f64], curve: &[f64], level: f64) -> Option<f64> {
    let i = curve.iter().position(|&c| c >= level)?;
    if i == 0 {
        return Some(grid[0]);
    }
    let (x0, x1, y0, y1) = (grid[i - 1], grid[i], curve[i - 1], curve[i]);
    Some(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PcEstimate {
    /// `(n, p at which the crossing probability reaches 1/2)` per size.
    pub per_size: Vec<(usize, f64)>,
    /// Intercept of a least-squares fit `a + b/n`, or the single size's value.
    pub estimate: f64,
}

pub const GRID_STEP: f64 = 0.02;

/// Critical point of square-lattice bond percolation from the left-right
/// crossing probability of `(n+1) × n` rectangles on a 0.02 grid in `p`.
pub fn estimate_pc(
    d: usize,
    n_list: &[usize],
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<PcEstimate> {
    if d != 2 {
        return Err(domain(format!(
            "crossing estimates are implemented for d = 2 only, got d = {d}"
        )));
    }
    if n_list.is_empty() {
        return Err(input("need at least one box size"));
    }
    let grid = probability_grid(GRID_STEP);
    let mut per_size = Vec::with_capacity(n_list.len());
    for (k, &n) in n_list.iter().enumerate() {
        let thresholds = crossing_thresholds(n, samples, seed.wrapping_add(k as u64), exec)?;
        let curve = crossing_curve(&thresholds, &grid);
        let p = level_crossing(&grid, &curve, 0.5).expect("the curve reaches 1 at p = 1");
        per_size.push((n, p));
    }
    let estimate = if per_size.len() == 1 {
        per_size[0].1
    } else {
        intercept_in_inverse_size(&per_size)
    };
    Ok(PcEstimate { per_size, estimate })
}

fn intercept_in_inverse_size(points: &[(usize, f64)]) -> f64 {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| 1.0 / n as f64).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return my;
    }
    let sxy: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (x - mx) * (p.1 - my))
        .sum();
    my - sxy / sxx * mx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_probabilities() {
        let lattice = BoxGraph::new(3, 2).unwrap();
        let g = lattice.graph();
        let mut rng = stream_rng(1, 0);
        assert_eq!(
            sample_disorder(g, 1.0, &mut rng).unwrap().n_open(),
            g.n_edges()
        );
        assert_eq!(sample_disorder(g, 0.0, &mut rng).unwrap().n_open(), 0);
        assert!(sample_disorder(g, 1.5, &mut rng).is_err());
        let j = sample_disorder(g, 0.6, &mut rng).unwrap();
        assert_eq!(thin(&j, 1.0, &mut rng).unwrap(), j);
        assert_eq!(thin(&j, 0.0, &mut rng).unwrap().n_open(), 0);
        let t = thin(&j, 0.5, &mut rng).unwrap();
        assert!(t.open.iter().zip(&j.open).all(|(&a, &b)| !a || b));

        for exec in [Exec::Sequential, Exec::default()] {
            assert_eq!(
                estimate_connection(1.0, 4, 2, None, 20, 3, exec)
                    .unwrap()
                    .estimate,
                1.0
            );
            assert_eq!(
                estimate_connection(0.0, 4, 2, None, 20, 3, exec)
                    .unwrap()
                    .estimate,
                0.0
            );
        }
    }

    #[test]
    fn open_fractions_concentrate() {
        let lattice = BoxGraph::new(16, 2).unwrap();
        let g = lattice.graph();
        let mut rng = stream_rng(7, 0);
        let check = |open: usize, total: usize, p: f64| {
            let sd = (p * (1.0 - p) / total as f64).sqrt();
            let f = open as f64 / total as f64;
            assert!((f - p).abs() < 3.0 * sd, "{f} vs {p}");
        };
        let mut open = 0;
        let mut total = 0;
        while total < 10_000 {
            let j = sample_disorder(g, 0.5, &mut rng).unwrap();
            open += j.n_open();
            total += j.len();
        }
        check(open, total, 0.5);
        let (mut open, mut total) = (0, 0);
        while total < 10_000 {
            let j = thin(&sample_disorder(g, 0.9, &mut rng).unwrap(), 0.7, &mut rng).unwrap();
            open += j.n_open();
            total += j.len();
        }
        check(open, total, 0.63);
    }

    #[test]
    fn coupling_is_monotone() {
        let mut rng = stream_rng(11, 0);
        let c = CoupledDisorder::sample(500, &mut rng);
        let grid = probability_grid(0.05);
        for w in grid.windows(2) {
            let (lo, hi) = (c.at(w[0]), c.at(w[1]));
            assert!(lo.open.iter().zip(&hi.open).all(|(&a, &b)| !a || b));
        }
    }

    #[test]
    fn crossing_threshold_matches_direct_check() {
        let rect = Rectangle::new(6);
        let mut rng = stream_rng(5, 0);
        for _ in 0..50 {
            let u = CoupledDisorder::sample(rect.edges.len(), &mut rng).uniforms;
            let t = rect.crossing_threshold(&u, &mut Vec::new(), &mut UnionFind::new(0));
            let crosses = |p: f64| {
                let mut uf = UnionFind::new(rect.cols * rect.rows);
                for (e, &[a, b]) in rect.edges.iter().enumerate() {
                    if u[e] < p {
                        uf.union(a, b);
                    }
                }
                (0..rect.rows).any(|r| {
                    (0..rect.rows).any(|s| uf.connected(r, (rect.cols - 1) * rect.rows + s))
                })
            };
            assert!(!crosses(t));
            assert!(crosses(t + 1e-12));
        }
    }

    #[test]
    fn interpolation_and_fit() {
        let grid = [0.0, 0.5, 1.0];
        assert_eq!(
            level_crossing(&grid, &[0.0, 0.25, 1.0], 0.5),
            Some(2.0 / 3.0)
        );
        assert_eq!(level_crossing(&grid, &[0.0, 0.1, 0.2], 0.5), None);
        let pts: Vec<(usize, f64)> = [8, 16, 32]
            .iter()
            .map(|&n| (n, 0.5 + 0.3 / n as f64))
            .collect();
        assert!((intercept_in_inverse_size(&pts) - 0.5).abs() < 1e-12);
        assert_eq!(
            crossing_curve(&[0.2, 0.4, 0.6, 0.8], &[0.0, 0.5, 1.0]),
            vec![0.0, 0.5, 1.0]
        );
    }

    #[test]
    fn two_dimensional_only() {
        assert!(estimate_pc(3, &[8], 10, 0, Exec::Sequential).is_err());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = crossing_thresholds(8, 40, 9, Exec::Sequential).unwrap();
        let b = crossing_thresholds(8, 40, 9, Exec::default()).unwrap();
        assert_eq!(a, b);
    }
}
