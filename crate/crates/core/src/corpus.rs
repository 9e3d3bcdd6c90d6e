//! The fixed manifest of small test graphs used by the exhaustive checks.
//!
//! Every graph has a single boundary vertex `0` (the identified boundary)
//! and free vertices `1..=m`. The default manifest holds every connected
//! simple graph with `1 ≤ m ≤ 4` and at most five edges, one representative
//! per isomorphism class (isomorphisms fix the boundary vertex).

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::graph::Graph;

const DEFAULT_MANIFEST: &str = include_str!("../data/corpus.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusGraph {
    pub name: String,
    pub graph: Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub graphs: Vec<CorpusGraph>,
    pub q: Vec<usize>,
    pub beta: Vec<f64>,
}

/// One `(graph, q, β)` combination of a corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub graph: usize,
    pub q: usize,
    pub beta: f64,
}

impl Corpus {
    /// The manifest shipped with the crate.
    pub fn default_manifest() -> Corpus {
        Corpus::from_json(DEFAULT_MANIFEST).expect("bundled corpus manifest is valid")
    }

    /// Regenerates the default graph list.
    pub fn generate(max_free: usize, max_edges: usize) -> Corpus {
        let mut graphs = Vec::new();
        for m in 1..=max_free {
            for (i, edges) in connected_classes(m, max_edges).into_iter().enumerate() {
                let graph = Graph::new(m + 1, [0], edges.iter().map(|&[a, b]| (a, b)))
                    .expect("generated graph is valid");
                graphs.push(CorpusGraph {
                    name: format!("m{m}e{}-{i:02}", edges.len()),
                    graph,
                });
            }
        }
        Corpus {
            graphs,
            q: vec![2, 3, 4, 5],
            beta: vec![0.25, 1.0, 4.0],
        }
    }

    pub fn from_json(text: &str) -> Result<Corpus> {
        let corpus: Corpus = serde_json::from_str(text)?;
        if corpus.graphs.is_empty() || corpus.q.is_empty() || corpus.beta.is_empty() {
            return Err(input(
                "corpus manifest needs graphs, q values and beta values",
            ));
        }
        Ok(corpus)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Replaces the q and β lists.
    pub fn with_parameters(mut self, q: Vec<usize>, beta: Vec<f64>) -> Corpus {
        if !q.is_empty() {
            self.q = q;
        }
        if !beta.is_empty() {
            self.beta = beta;
        }
        self
    }

    /// Cells in manifest order: graph, then q, then β.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.graphs.len() * self.q.len() * self.beta.len());
        for graph in 0..self.graphs.len() {
            for &q in &self.q {
                for &beta in &self.beta {
                    out.push(Cell { graph, q, beta });
                }
            }
        }
        out
    }
}

type Edge = [usize; 2];

/// Canonical edge lists of the connected graphs on `{0..=m}` with at most
/// `max_edges` edges, up to relabelling of `1..=m`.
fn connected_classes(m: usize, max_edges: usize) -> Vec<Vec<Edge>> {
    let n = m + 1;
    let all: Vec<Edge> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| [a, b]))
        .collect();
    let perms = permutations(m);
    let mut seen = std::collections::BTreeSet::new();
    for mask in 0u32..(1 << all.len()) {
        let size = mask.count_ones() as usize;
        if size < m || size > max_edges {
            continue;
        }
        let edges: Vec<Edge> = (0..all.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| all[i])
            .collect();
        if !is_connected(n, &edges) {
            continue;
        }
        let canonical = perms
            .iter()
            .map(|p| relabel(&edges, p))
            .min()
            .expect("at least one permutation");
        seen.insert((canonical.len(), canonical));
    }
    seen.into_iter().map(|(_, e)| e).collect()
}

fn relabel(edges: &[Edge], perm: &[usize]) -> Vec<Edge> {
    let mut out: Vec<Edge> = edges
        .iter()
        .map(|&[a, b]| {
            let (a, b) = (perm[a], perm[b]);
            [a.min(b), a.max(b)]
        })
        .collect();
    out.sort_unstable();
    out
}

/// Permutations of `{0..=m}` fixing `0`.
fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            extend(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    extend(&mut vec![0], &mut (1..=m).collect(), &mut out);
    out
}

fn is_connected(n: usize, edges: &[Edge]) -> bool {
    let mut uf = crate::union_find::UnionFind::new(n);
    for &[a, b] in edges {
        uf.union(a, b);
    }
    uf.set_size(0) == n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_manifest_matches_generator() {
        assert_eq!(Corpus::default_manifest(), Corpus::generate(4, 5));
    }

    #[test]
    fn class_counts() {
        // two free vertices: path with the root at an end, path with the root
        // in the middle, triangle
        assert_eq!(connected_classes(1, 5).len(), 1);
        assert_eq!(connected_classes(2, 5).len(), 3);
        for g in connected_classes(3, 5) {
            assert!(g.len() >= 3 && g.len() <= 5);
        }
    }

    #[test]
    fn cells_enumerate_the_product() {
        let corpus = Corpus::default_manifest();
        let cells = corpus.cells();
        assert_eq!(cells.len(), corpus.graphs.len() * 12);
        assert_eq!(
            cells[1],
            Cell {
                graph: 0,
                q: 2,
                beta: 1.0
            }
        );
        for g in &corpus.graphs {
            assert_eq!(g.graph.boundary(), &[0]);
        }
    }
}
