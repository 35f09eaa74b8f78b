//! Seeded random instance generators.
//!
//! Output depends only on the arguments and [`GENERATOR_VERSION`]; bump the
//! version whenever the sampling procedure changes.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Hypergraph};

pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateError {
    #[error("cannot place {edges} distinct edges on {vertices} vertices (max {max})")]
    TooManyEdges { vertices: usize, edges: usize, max: usize },
    #[error("hyperedge sizes {min}..={max} are invalid for {vertices} vertices")]
    BadSizeRange { min: usize, max: usize, vertices: usize },
}

/// Erdős–Rényi G(n, m): exactly `num_edges` distinct edges drawn uniformly
/// without replacement from all vertex pairs.
pub fn erdos_renyi(num_vertices: usize, num_edges: usize, seed: u64) -> Result<Graph, GenerateError> {
    let max = num_vertices * num_vertices.saturating_sub(1) / 2;
    if num_edges > max {
        return Err(GenerateError::TooManyEdges {
            vertices: num_vertices,
            edges: num_edges,
            max,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, max, num_edges).into_vec();
    picks.sort_unstable();
    let edges = picks.into_iter().map(|p| unrank_pair(p, num_vertices));
    Ok(Graph::new(num_vertices, edges).expect("sampled pairs are distinct and loop-free"))
}

/// Maps `0..n(n-1)/2` onto pairs `(u, v)`, `u < v`, in lexicographic order.
fn unrank_pair(mut p: usize, n: usize) -> (usize, usize) {
    let mut u = 0;
    loop {
        let row = n - 1 - u;
        if p < row {
            return (u, u + 1 + p);
        }
        p -= row;
        u += 1;
    }
}

/// `num_edges` hyperedges whose sizes are uniform in `min_size..=max_size`,
/// each with vertices drawn without replacement.
pub fn random_hypergraph(
    num_vertices: usize,
    num_edges: usize,
    min_size: usize,
    max_size: usize,
    seed: u64,
) -> Result<Hypergraph, GenerateError> {
    if min_size == 0 || min_size > max_size || max_size > num_vertices {
        return Err(GenerateError::BadSizeRange {
            min: min_size,
            max: max_size,
            vertices: num_vertices,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<Vec<usize>> = (0..num_edges)
        .map(|_| {
            let size = rng.random_range(min_size..=max_size);
            index::sample(&mut rng, num_vertices, size).into_vec()
        })
        .collect();
    Ok(Hypergraph::new(num_vertices, edges).expect("sampled hyperedges are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrank_enumerates_all_pairs() {
        let n = 6;
        let pairs: Vec<_> = (0..n * (n - 1) / 2).map(|p| unrank_pair(p, n)).collect();
        let expected: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn exact_edge_count_and_determinism() {
        let g = erdos_renyi(50, 50, 3).unwrap();
        assert_eq!(g.num_edges(), 50);
        assert_eq!(g, erdos_renyi(50, 50, 3).unwrap());
        assert_ne!(g, erdos_renyi(50, 50, 4).unwrap());
        assert!(erdos_renyi(4, 7, 0).is_err());
        assert_eq!(erdos_renyi(4, 6, 0).unwrap().num_edges(), 6);
    }

    #[test]
    fn hypergraph_sizes_in_range() {
        let h = random_hypergraph(20, 40, 2, 5, 9).unwrap();
        assert_eq!(h.num_edges(), 40);
        assert!(h.edges().iter().all(|e| (2..=5).contains(&e.len())));
        assert_eq!(h, random_hypergraph(20, 40, 2, 5, 9).unwrap());
        assert!(random_hypergraph(3, 1, 2, 4, 0).is_err());
    }
}
