//! Graphs and hypergraphs, their incidence matrices, clique expansion, and
//! text formats.

pub mod generate;
mod io;

pub use io::{parse_edgelist, parse_hgr, serialize_edgelist, serialize_hgr, ParseError, ParseErrorKind};

use std::collections::BTreeSet;
use std::ops::Deref;

use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HypergraphError {
    #[error("hyperedge {edge} is empty")]
    EmptyEdge { edge: usize },
    #[error("hyperedge {edge} references vertex {vertex}, but there are only {num_vertices} vertices")]
    VertexOutOfRange {
        edge: usize,
        vertex: usize,
        num_vertices: usize,
    },
    #[error("hyperedge {edge} repeats vertex {vertex}")]
    RepeatedVertex { edge: usize, vertex: usize },
    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("hyperedge {edge} has {size} vertices; a graph edge needs exactly 2")]
    NotAnEdge { edge: usize, size: usize },
    #[error("expected {expected} hyperedge weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight of hyperedge {edge} is not a finite nonnegative number")]
    BadWeight { edge: usize },
}

/// A hypergraph on vertices `0..num_vertices`.
///
/// Each hyperedge is stored sorted and without repeated vertices. Hyperedge
/// order is preserved as given and defines the column order of the incidence
/// matrix; identical hyperedges are kept as separate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    num_vertices: usize,
    edges: Vec<Vec<usize>>,
    weights: Option<Vec<f64>>,
}

impl Hypergraph {
    pub fn new<E, I>(num_vertices: usize, edges: E) -> Result<Self, HypergraphError>
    where
        E: IntoIterator<Item = I>,
        I: IntoIterator<Item = usize>,
    {
        let mut out = Vec::new();
        for (j, edge) in edges.into_iter().enumerate() {
            let mut e: Vec<usize> = edge.into_iter().collect();
            if e.is_empty() {
                return Err(HypergraphError::EmptyEdge { edge: j });
            }
            e.sort_unstable();
            for w in e.windows(2) {
                if w[0] == w[1] {
                    return Err(HypergraphError::RepeatedVertex { edge: j, vertex: w[0] });
                }
            }
            if let Some(&v) = e.last().filter(|&&v| v >= num_vertices) {
                return Err(HypergraphError::VertexOutOfRange {
                    edge: j,
                    vertex: v,
                    num_vertices,
                });
            }
            out.push(e);
        }
        Ok(Hypergraph {
            num_vertices,
            edges: out,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, HypergraphError> {
        if weights.len() != self.edges.len() {
            return Err(HypergraphError::WeightCount {
                expected: self.edges.len(),
                got: weights.len(),
            });
        }
        if let Some(edge) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HypergraphError::BadWeight { edge });
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &[usize] {
        &self.edges[j]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of hyperedge `j`, 1 when unweighted.
    pub fn weight(&self, j: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[j])
    }

    pub fn max_edge_size(&self) -> usize {
        self.edges.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of hyperedges containing each vertex.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for e in &self.edges {
            for &v in e {
                deg[v] += 1;
            }
        }
        deg
    }

    /// Dense `|V| x |E|` 0/1 matrix with entry `(i, j) = 1` iff vertex `i`
    /// lies in hyperedge `j`.
    pub fn incidence_matrix(&self) -> Tensor {
        let mut h = Tensor::zeros(self.num_vertices, self.edges.len());
        for (j, e) in self.edges.iter().enumerate() {
            for &v in e {
                h.set(v, j, 1.0);
            }
        }
        h
    }

    /// The graph joining every pair of vertices that share a hyperedge.
    /// Pairs are emitted in first-seen order and merged across hyperedges.
    pub fn clique_expansion(&self) -> Graph {
        let mut seen = BTreeSet::new();
        let mut pairs = Vec::new();
        for e in &self.edges {
            for (a, &u) in e.iter().enumerate() {
                for &v in &e[a + 1..] {
                    if seen.insert((u, v)) {
                        pairs.push(vec![u, v]);
                    }
                }
            }
        }
        Graph(Hypergraph {
            num_vertices: self.num_vertices,
            edges: pairs,
            weights: None,
        })
    }

    /// Whether every hyperedge has exactly two vertices.
    pub fn is_graph(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2)
    }
}

/// A simple undirected graph: a hypergraph whose hyperedges are all vertex
/// pairs, with no self-loops and no repeated edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph(Hypergraph);

impl Graph {
    /// Builds a graph, merging repeated edges (first occurrence wins the position).
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, HypergraphError> {
        let mut seen = BTreeSet::new();
        let mut pairs = Vec::new();
        for (j, (u, v)) in edges.into_iter().enumerate() {
            if u == v {
                return Err(HypergraphError::SelfLoop { edge: j, vertex: u });
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                pairs.push([key.0, key.1]);
            }
        }
        Ok(Graph(Hypergraph::new(num_vertices, pairs)?))
    }

    /// Reinterprets a hypergraph whose hyperedges are all pairs.
    pub fn from_hypergraph(h: Hypergraph) -> Result<Self, HypergraphError> {
        if let Some((edge, e)) = h.edges.iter().enumerate().find(|(_, e)| e.len() != 2) {
            return Err(HypergraphError::NotAnEdge { edge, size: e.len() });
        }
        Graph::new(h.num_vertices, h.edges.iter().map(|e| (e[0], e[1])))
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::new(n, edges).expect("complete graph is valid")
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|v| (v - 1, v))).expect("path is valid")
    }

    pub fn cycle(n: usize) -> Self {
        Graph::new(n, (0..n).map(|v| (v, (v + 1) % n))).expect("cycle is valid")
    }

    /// The Petersen graph: outer 5-cycle 0..5, inner pentagram 5..10, spokes i -- i+5.
    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Graph::new(10, edges).expect("petersen graph is valid")
    }

    pub fn as_hypergraph(&self) -> &Hypergraph {
        &self.0
    }

    pub fn into_hypergraph(self) -> Hypergraph {
        self.0
    }

    /// Edges as `(u, v)` with `u < v`.
    pub fn edge_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.edges.iter().map(|e| (e[0], e[1]))
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.0.num_vertices];
        for (u, v) in self.edge_pairs() {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn max_degree(&self) -> usize {
        self.0.degrees().into_iter().max().unwrap_or(0)
    }
}

impl Deref for Graph {
    type Target = Hypergraph;

    fn deref(&self) -> &Hypergraph {
        &self.0
    }
}

/// The four-vertex, three-hyperedge example used throughout the tests:
/// `{0,1}`, `{0,2,3}`, `{1,2,3}`.
pub fn toy_hypergraph() -> Hypergraph {
    Hypergraph::new(4, [vec![0, 1], vec![0, 2, 3], vec![1, 2, 3]]).expect("toy hypergraph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toy_incidence_columns() {
        let h = toy_hypergraph().incidence_matrix();
        assert_eq!(h.shape(), (4, 3));
        let column = |j: usize| (0..4).filter(|&i| h.get(i, j) == 1.0).collect::<Vec<_>>();
        assert_eq!(column(0), vec![0, 1]);
        assert_eq!(column(1), vec![0, 2, 3]);
        assert_eq!(column(2), vec![1, 2, 3]);
    }

    #[test]
    fn incidence_edge_cases() {
        let empty = Hypergraph::new(3, Vec::<Vec<usize>>::new()).unwrap();
        assert_eq!(empty.incidence_matrix().shape(), (3, 0));
        let single = Hypergraph::new(2, [[0, 1]]).unwrap();
        assert_eq!(single.incidence_matrix(), Tensor::from_rows(&[[1.0], [1.0]]));
    }

    #[test]
    fn clique_expansion_examples() {
        let tri = Hypergraph::new(3, [vec![0, 1, 2]]).unwrap().clique_expansion();
        assert_eq!(tri.edge_pairs().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);

        let dup = Hypergraph::new(2, [vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(dup.num_edges(), 2);
        assert_eq!(dup.clique_expansion().num_edges(), 1);

        let toy = toy_hypergraph().clique_expansion();
        assert_eq!(
            toy.edge_pairs().collect::<BTreeSet<_>>(),
            [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)].into_iter().collect()
        );
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Hypergraph::new(3, [vec![0, 1], vec![]]).unwrap_err(),
            HypergraphError::EmptyEdge { edge: 1 }
        );
        assert!(matches!(
            Hypergraph::new(3, [vec![0, 3]]),
            Err(HypergraphError::VertexOutOfRange { vertex: 3, .. })
        ));
        assert!(matches!(
            Hypergraph::new(3, [vec![2, 0, 2]]),
            Err(HypergraphError::RepeatedVertex { vertex: 2, .. })
        ));
        assert!(matches!(Graph::new(3, [(1, 1)]), Err(HypergraphError::SelfLoop { .. })));
        assert!(Graph::from_hypergraph(toy_hypergraph()).is_err());
        assert!(Hypergraph::new(2, [[0, 1]]).unwrap().with_weights(vec![-1.0]).is_err());
    }

    #[test]
    fn isolated_vertices_are_allowed() {
        let g = Graph::new(4, [(0, 1)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 1, 0, 0]);
    }

    #[test]
    fn petersen_is_cubic() {
        let g = Graph::petersen();
        assert_eq!(g.num_edges(), 15);
        assert!(g.degrees().iter().all(|&d| d == 3));
    }

    fn arb_hypergraph() -> impl Strategy<Value = Hypergraph> {
        (1usize..12).prop_flat_map(|n| {
            let edge = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n.min(5));
            proptest::collection::vec(edge, 0..15).prop_map(move |edges| Hypergraph::new(n, edges).unwrap())
        })
    }

    proptest! {
        #[test]
        fn incidence_sums_match_sizes_and_degrees(h in arb_hypergraph()) {
            let m = h.incidence_matrix();
            let col = m.column_sums();
            for (j, e) in h.edges().iter().enumerate() {
                prop_assert_eq!(col.get(0, j), e.len() as f64);
            }
            for (i, d) in h.degrees().into_iter().enumerate() {
                prop_assert_eq!(m.row(i).iter().sum::<f64>(), d as f64);
            }
        }

        #[test]
        fn clique_expansion_bounds(h in arb_hypergraph()) {
            let g = h.clique_expansion();
            let bound: usize = h.edges().iter().map(|e| e.len() * (e.len() - 1) / 2).sum();
            prop_assert!(g.num_edges() <= bound);
            prop_assert_eq!(g.num_vertices(), h.num_vertices());
            prop_assert_eq!(g.clique_expansion(), g.clone());
        }
    }
}
