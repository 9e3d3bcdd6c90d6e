//! Finite graphs with a distinguished boundary, diluted boxes of `Z^d`, and
//! connectivity to the boundary.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::union_find::UnionFind;

pub type VertexId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub vertex: VertexId,
    pub edge: usize,
}

/// Undirected simple graph `(V, E)` with a non-empty boundary `U ⊂ V`.
///
/// Vertices are `0..n`. Edges are stored as `[a, b]` with `a < b`. No edge
/// may join two boundary vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct Graph {
    n_vertices: usize,
    boundary: Vec<VertexId>,
    in_boundary: Vec<bool>,
    edges: Vec<[VertexId; 2]>,
    adj_start: Vec<usize>,
    adj: Vec<Neighbor>,
}

impl Graph {
    pub fn new(
        n_vertices: usize,
        boundary: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self> {
        let mut in_boundary = vec![false; n_vertices];
        for u in boundary {
            if u >= n_vertices {
                return Err(input(format!(
                    "boundary vertex {u} out of range 0..{n_vertices}"
                )));
            }
            in_boundary[u] = true;
        }
        let boundary: Vec<VertexId> = (0..n_vertices).filter(|&v| in_boundary[v]).collect();
        if boundary.is_empty() {
            return Err(input("boundary must be non-empty"));
        }

        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(input(format!(
                    "edge ({a}, {b}) out of range 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(input(format!("loop at vertex {a}")));
            }
            if in_boundary[a] && in_boundary[b] {
                return Err(input(format!(
                    "edge ({a}, {b}) joins two boundary vertices"
                )));
            }
            let e = [a.min(b), a.max(b)];
            if !seen.insert(e) {
                return Err(input(format!("duplicate edge ({a}, {b})")));
            }
            list.push(e);
        }
        Ok(Self::assemble(n_vertices, boundary, in_boundary, list))
    }

    fn assemble(
        n_vertices: usize,
        boundary: Vec<VertexId>,
        in_boundary: Vec<bool>,
        edges: Vec<[VertexId; 2]>,
    ) -> Self {
        let mut degree = vec![0usize; n_vertices];
        for &[a, b] in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut adj_start = Vec::with_capacity(n_vertices + 1);
        adj_start.push(0);
        for v in 0..n_vertices {
            adj_start.push(adj_start[v] + degree[v]);
        }
        let mut fill = adj_start.clone();
        let mut adj = vec![Neighbor { vertex: 0, edge: 0 }; adj_start[n_vertices]];
        for (e, &[a, b]) in edges.iter().enumerate() {
            adj[fill[a]] = Neighbor { vertex: b, edge: e };
            fill[a] += 1;
            adj[fill[b]] = Neighbor { vertex: a, edge: e };
            fill[b] += 1;
        }
        Graph {
            n_vertices,
            boundary,
            in_boundary,
            edges,
            adj_start,
            adj,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[VertexId; 2]] {
        &self.edges
    }

    pub fn boundary(&self) -> &[VertexId] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.in_boundary[v]
    }

    /// Vertices of `V \ U` in increasing order.
    pub fn free_vertices(&self) -> Vec<VertexId> {
        (0..self.n_vertices)
            .filter(|&v| !self.in_boundary[v])
            .collect()
    }

    pub fn n_free(&self) -> usize {
        self.n_vertices - self.boundary.len()
    }

    pub fn neighbors(&self, v: VertexId) -> &[Neighbor] {
        &self.adj[self.adj_start[v]..self.adj_start[v + 1]]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj_start[v + 1] - self.adj_start[v]
    }

    /// Keeps the edges marked open by `disorder`; vertices and boundary are unchanged.
    pub fn apply_disorder(&self, disorder: &Disorder) -> Result<Graph> {
        if disorder.len() != self.n_edges() {
            return Err(input(format!(
                "disorder marks {} edges but the graph has {}",
                disorder.len(),
                self.n_edges()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(&disorder.open)
            .filter(|(_, &open)| open)
            .map(|(&e, _)| e)
            .collect();
        Ok(Self::assemble(
            self.n_vertices,
            self.boundary.clone(),
            self.in_boundary.clone(),
            edges,
        ))
    }

    /// Collapses the boundary to a single vertex.
    ///
    /// Returns the new graph and the old-to-new vertex map. Free vertices
    /// keep their relative order; the merged boundary vertex takes the slot
    /// of the smallest boundary vertex. Parallel edges produced by the
    /// collapse are merged into one (edge order follows first occurrence).
    pub fn identify_boundary_with_map(&self) -> (Graph, Vec<VertexId>) {
        if self.boundary.len() == 1 {
            return (self.clone(), (0..self.n_vertices).collect());
        }
        let anchor = self.boundary[0];
        let mut map = vec![0; self.n_vertices];
        let mut next = 0;
        for (v, slot) in map.iter_mut().enumerate() {
            if self.in_boundary[v] && v != anchor {
                continue;
            }
            *slot = next;
            next += 1;
        }
        for &u in &self.boundary {
            map[u] = map[anchor];
        }
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        for &[a, b] in &self.edges {
            let (a, b) = (map[a], map[b]);
            let e = [a.min(b), a.max(b)];
            if seen.insert(e) {
                edges.push(e);
            }
        }
        let star = map[anchor];
        let mut in_boundary = vec![false; next];
        in_boundary[star] = true;
        (Self::assemble(next, vec![star], in_boundary, edges), map)
    }

    pub fn identify_boundary(&self) -> Graph {
        self.identify_boundary_with_map().0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Anything that marks edges of a graph as open (top level / `J = 1`).
pub trait OpenEdges {
    fn is_open(&self, edge: usize) -> bool;
}

impl<F: Fn(usize) -> bool> OpenEdges for F {
    fn is_open(&self, edge: usize) -> bool {
        self(edge)
    }
}

/// For every vertex, whether it is joined to `U` by a path of open edges.
pub fn boundary_connected_set<O: OpenEdges + ?Sized>(g: &Graph, open: &O) -> Vec<bool> {
    let mut uf = UnionFind::new(g.n_vertices() + 1);
    fill_boundary_components(g, open, &mut uf);
    let root = uf.find(g.n_vertices());
    (0..g.n_vertices()).map(|v| uf.find(v) == root).collect()
}

/// Unions the open-edge components of `g` into `uf`, with the extra node
/// `g.n_vertices()` standing for the whole boundary.
pub(crate) fn fill_boundary_components<O: OpenEdges + ?Sized>(
    g: &Graph,
    open: &O,
    uf: &mut UnionFind,
) {
    uf.reset(g.n_vertices() + 1);
    let virtual_root = g.n_vertices();
    for &u in g.boundary() {
        uf.union(u, virtual_root);
    }
    for (e, &[a, b]) in g.edges().iter().enumerate() {
        if open.is_open(e) {
            uf.union(a, b);
        }
    }
}

/// `x ↔ U` through open edges. Boundary vertices are trivially connected.
pub fn connected_to_boundary<O: OpenEdges + ?Sized>(g: &Graph, open: &O, x: VertexId) -> bool {
    if g.is_boundary(x) {
        return true;
    }
    let mut uf = UnionFind::new(0);
    fill_boundary_components(g, open, &mut uf);
    uf.connected(x, g.n_vertices())
}

/// Open/closed mark for each edge of an ambient graph (the disorder `J`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disorder {
    pub open: Vec<bool>,
}

impl Disorder {
    pub fn all_open(n_edges: usize) -> Self {
        Disorder {
            open: vec![true; n_edges],
        }
    }

    pub fn all_closed(n_edges: usize) -> Self {
        Disorder {
            open: vec![false; n_edges],
        }
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }
}

impl OpenEdges for Disorder {
    fn is_open(&self, edge: usize) -> bool {
        self.open[edge]
    }
}

/// The box `Λ_n = [-n, n]^d ∩ Z^d` together with its outer boundary, as a
/// [`Graph`] with lattice metadata.
///
/// Sites of the enclosing cube `[-(n+1), n+1]^d` are visited in row-major
/// order (last coordinate fastest); members of `Λ_n ∪ ∂Λ_n` get consecutive
/// vertex ids in that order. Edges are all nearest-neighbour pairs with at
/// least one endpoint in `Λ_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxGraph {
    graph: Graph,
    n: usize,
    d: usize,
    sites: Vec<i32>,
    lookup: Vec<Option<VertexId>>,
}

impl BoxGraph {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(input(format!(
                "box needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        let side = 2 * n + 3;
        let cube = side
            .checked_pow(d as u32)
            .filter(|&c| c <= 1 << 28)
            .ok_or_else(|| input(format!("box n={n}, d={d} is too large")))?;
        let reach = (n + 1) as i32;
        let n_i = n as i32;

        let mut lookup = vec![None; cube];
        let mut sites = Vec::new();
        let mut in_boundary = Vec::new();
        let mut coord = vec![0i32; d];
        for (cell, slot) in lookup.iter_mut().enumerate() {
            let mut rest = cell;
            for axis in (0..d).rev() {
                coord[axis] = (rest % side) as i32 - reach;
                rest /= side;
            }
            let outside = coord.iter().filter(|c| c.abs() > n_i).count();
            if outside <= 1 {
                *slot = Some(in_boundary.len());
                sites.extend_from_slice(&coord);
                in_boundary.push(outside == 1);
            }
        }

        let n_vertices = in_boundary.len();
        let mut edges = Vec::new();
        let mut neighbor = vec![0i32; d];
        for v in 0..n_vertices {
            if in_boundary[v] {
                continue;
            }
            let here = &sites[v * d..(v + 1) * d];
            for axis in 0..d {
                for step in [1i32, -1] {
                    neighbor.copy_from_slice(here);
                    neighbor[axis] += step;
                    let w = Self::lookup_in(&lookup, side, reach, &neighbor)
                        .expect("neighbour of an interior site lies in the enclosing cube");
                    // Interior pairs are added once, from their lower endpoint.
                    if step == 1 || in_boundary[w] {
                        edges.push([v.min(w), v.max(w)]);
                    }
                }
            }
        }
        let boundary = (0..n_vertices).filter(|&v| in_boundary[v]).collect();
        let graph = Graph::assemble(n_vertices, boundary, in_boundary, edges);
        Ok(BoxGraph {
            graph,
            n,
            d,
            sites,
            lookup,
        })
    }

    fn lookup_in(
        lookup: &[Option<VertexId>],
        side: usize,
        reach: i32,
        coord: &[i32],
    ) -> Option<VertexId> {
        let mut cell = 0usize;
        for &c in coord {
            let shifted = c + reach;
            if shifted < 0 || shifted as usize >= side {
                return None;
            }
            cell = cell * side + shifted as usize;
        }
        lookup[cell]
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn site(&self, v: VertexId) -> &[i32] {
        &self.sites[v * self.d..(v + 1) * self.d]
    }

    pub fn vertex_at(&self, coord: &[i32]) -> Option<VertexId> {
        if coord.len() != self.d {
            return None;
        }
        Self::lookup_in(&self.lookup, 2 * self.n + 3, self.n as i32 + 1, coord)
    }

    /// The site at the origin.
    pub fn center(&self) -> VertexId {
        self.vertex_at(&vec![0; self.d])
            .expect("origin is in the box")
    }

    /// Number of sites of `Λ_n`, i.e. `(2n+1)^d`.
    pub fn n_interior(&self) -> usize {
        self.graph.n_free()
    }

    /// Same box with the edges closed by `disorder` removed.
    pub fn apply_disorder(&self, disorder: &Disorder) -> Result<BoxGraph> {
        Ok(BoxGraph {
            graph: self.graph.apply_disorder(disorder)?,
            n: self.n,
            d: self.d,
            sites: self.sites.clone(),
            lookup: self.lookup.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut file = GraphFile::from(self.graph.clone());
        file.lattice = Some(LatticeMeta {
            n: self.n,
            d: self.d,
            sites: self.sites.chunks(self.d).map(<[i32]>::to_vec).collect(),
        });
        Ok(serde_json::to_string(&file)?)
    }
}

/// On-disk graph format:
/// `{"vertices": N, "boundary": [ids], "edges": [[a,b],...]}` with an
/// optional `lattice` block for boxes.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphFile {
    vertices: usize,
    boundary: Vec<VertexId>,
    edges: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice: Option<LatticeMeta>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LatticeMeta {
    n: usize,
    d: usize,
    sites: Vec<Vec<i32>>,
}

impl TryFrom<GraphFile> for Graph {
    type Error = crate::Error;

    fn try_from(file: GraphFile) -> Result<Graph> {
        Graph::new(
            file.vertices,
            file.boundary,
            file.edges.into_iter().map(|[a, b]| (a, b)),
        )
    }
}

impl From<Graph> for GraphFile {
    fn from(g: Graph) -> GraphFile {
        GraphFile {
            vertices: g.n_vertices,
            boundary: g.boundary,
            edges: g.edges,
            lattice: None,
        }
    }
}
