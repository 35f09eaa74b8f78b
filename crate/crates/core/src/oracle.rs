//! Ground truth for small instances: first-principles verification,
//! exhaustive search, and a DSATUR greedy colorer.
//!
//! Nothing here touches the PUBO machinery; violations and cuts are counted
//! directly from the (hyper)graph so the compiled losses can be checked
//! against them.

use serde::{Deserialize, Serialize};

use crate::hypergraph::{Graph, Hypergraph};
use crate::model::Assignment;
use crate::problems::{CompiledLoss, ObjectiveKind, Problem};

/// Default cap on the number of assignments [`brute_force`] will enumerate.
pub const DEFAULT_SEARCH_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("assignment has {got} rows, instance has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("verification needs a hard assignment")]
    NotHard,
    #[error("{0} needs a graph (every hyperedge of size 2)")]
    NotAGraph(Problem),
    #[error("search space of {required} assignments exceeds the limit of {limit}")]
    OverLimit { required: u128, limit: u64 },
}

/// Outcome of checking a hard assignment from first principles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub problem: Problem,
    pub feasible: bool,
    pub violated_terms: usize,
    /// Colors used for coloring, cut size for partitioning and max-cut,
    /// independent-set size for MIS.
    pub objective: f64,
    pub group_sizes: Vec<usize>,
    pub colors_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_size: Option<usize>,
    pub b1: f64,
    pub b2: f64,
}

/// Imbalance metrics over block sizes: `B1 = max/mean - 1` and
/// `B2 = sqrt(mean((size - mean)^2))`.
pub fn balance_metrics(sizes: &[usize]) -> (f64, f64) {
    let k = sizes.len();
    let total: usize = sizes.iter().sum();
    if k == 0 || total == 0 {
        return (0.0, 0.0);
    }
    let mean = total as f64 / k as f64;
    let max = *sizes.iter().max().unwrap() as f64;
    let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / k as f64;
    (max / mean - 1.0, var.sqrt())
}

/// Hyperedges spanning more than one group.
pub fn cut_count(h: &Hypergraph, groups: &[usize]) -> usize {
    h.edges()
        .iter()
        .filter(|e| e.iter().any(|&v| groups[v] != groups[e[0]]))
        .count()
}

/// Violated constraint terms of `problem` under `groups`. Zero for problems
/// without hard constraints (partitioning, max-cut).
pub fn count_violations(problem: Problem, h: &Hypergraph, groups: &[usize]) -> usize {
    match problem {
        Problem::GraphColoring => h.edges().iter().filter(|e| groups[e[0]] == groups[e[1]]).count(),
        Problem::StrongColoring => h
            .edges()
            .iter()
            .map(|e| {
                let mut same = 0;
                for (a, &u) in e.iter().enumerate() {
                    same += e[a + 1..].iter().filter(|&&v| groups[u] == groups[v]).count();
                }
                same
            })
            .sum(),
        Problem::ProperColoring => h
            .edges()
            .iter()
            .filter(|e| e.iter().all(|&v| groups[v] == groups[e[0]]))
            .count(),
        Problem::Mis => h.edges().iter().filter(|e| e.iter().all(|&v| groups[v] == 0)).count(),
        Problem::GraphPartitioning | Problem::HypergraphPartitioning | Problem::MaxCut => 0,
    }
}

pub fn group_sizes(groups: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &g in groups {
        sizes[g] += 1;
    }
    sizes
}

/// Recounts everything about a hard assignment directly from the instance.
pub fn verify(problem: Problem, instance: &Hypergraph, assignment: &Assignment) -> Result<VerifyReport, OracleError> {
    if assignment.num_vertices() != instance.num_vertices() {
        return Err(OracleError::DimensionMismatch {
            expected: instance.num_vertices(),
            got: assignment.num_vertices(),
        });
    }
    let groups = assignment.groups().map_err(|_| OracleError::NotHard)?;
    verify_groups(problem, instance, &groups, assignment.k())
}

/// [`verify`] on plain group indices (all must be `< k`).
pub fn verify_groups(
    problem: Problem,
    instance: &Hypergraph,
    groups: &[usize],
    k: usize,
) -> Result<VerifyReport, OracleError> {
    if groups.len() != instance.num_vertices() {
        return Err(OracleError::DimensionMismatch {
            expected: instance.num_vertices(),
            got: groups.len(),
        });
    }
    if problem.requires_graph() && !instance.is_graph() {
        return Err(OracleError::NotAGraph(problem));
    }
    let sizes = group_sizes(groups, k);
    let colors_used = sizes.iter().filter(|&&s| s > 0).count();
    let violated = count_violations(problem, instance, groups);
    let (b1, b2) = balance_metrics(&sizes);
    let (objective, cut, set_size) = match problem.kind() {
        ObjectiveKind::Coloring => (colors_used as f64, None, None),
        ObjectiveKind::Partition | ObjectiveKind::MaxCut => {
            let c = cut_count(instance, groups);
            (c as f64, Some(c), None)
        }
        ObjectiveKind::Mis => (sizes[0] as f64, None, Some(sizes[0])),
    };
    Ok(VerifyReport {
        problem,
        feasible: violated == 0,
        violated_terms: violated,
        objective,
        group_sizes: sizes,
        colors_used,
        cut,
        set_size,
        b1,
        b2,
    })
}

/// A globally optimal hard assignment found by enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub groups: Vec<usize>,
    /// Same quantity as [`VerifyReport::objective`] for the optimum.
    pub value: f64,
    /// The minimized score; see [`CompiledLoss::hard_score`].
    pub score: f64,
    pub report: VerifyReport,
    pub evaluated: u64,
}

/// Number of assignments [`brute_force`] would visit for `loss`.
pub fn search_space(loss: &CompiledLoss) -> u128 {
    let n = loss.instance().num_vertices() as u32;
    let free = if loss.problem().is_label_symmetric() {
        n.saturating_sub(1)
    } else {
        n
    };
    (loss.k() as u128).saturating_pow(free)
}

/// Exhaustively minimizes the hard objective of `loss`.
///
/// Problems with constraints are optimized subject to them (zero violations
/// first, then objective); coloring minimizes the number of colors used, not
/// the penalized surrogate. For label-symmetric problems vertex 0 is pinned
/// to group 0.
pub fn brute_force(loss: &CompiledLoss, limit: u64) -> Result<BruteForceResult, OracleError> {
    let required = search_space(loss);
    if required > limit as u128 {
        return Err(OracleError::OverLimit { required, limit });
    }
    let h = loss.instance();
    let n = h.num_vertices();
    let k = loss.k();
    let problem = loss.problem();
    let pinned = usize::from(problem.is_label_symmetric() && n > 0);

    let mut groups = vec![0usize; n];
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    loop {
        evaluated += 1;
        let violations = count_violations(problem, h, &groups);
        let score = loss.hard_score_from_groups(&groups);
        let better = match &best {
            None => true,
            Some((bv, bs, _)) => violations < *bv || (violations == *bv && score < *bs - 1e-12),
        };
        if better {
            best = Some((violations, score, groups.clone()));
        }
        // odometer over the free vertices
        let mut i = n;
        loop {
            if i == pinned {
                let (_, score, groups) = best.expect("at least one assignment visited");
                let report = verify_groups(problem, h, &groups, k)?;
                return Ok(BruteForceResult {
                    value: report.objective,
                    score,
                    report,
                    groups,
                    evaluated,
                });
            }
            i -= 1;
            groups[i] += 1;
            if groups[i] < k {
                break;
            }
            groups[i] = 0;
        }
    }
}

/// DSATUR greedy coloring. Picks the uncolored vertex with the most distinct
/// neighbor colors, breaking ties by degree and then by lowest index, and
/// gives it the smallest free color. Returns the colors and how many were used.
pub fn dsatur_coloring(g: &Graph) -> (Vec<usize>, usize) {
    let n = g.num_vertices();
    let adj = g.adjacency_lists();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut color: Vec<Option<usize>> = vec![None; n];
    let mut neighbor_colors: Vec<Vec<bool>> = vec![Vec::new(); n];
    let mut saturation = vec![0usize; n];
    let mut used = 0;

    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| color[v].is_none())
            .max_by(|&a, &b| {
                (saturation[a], degree[a])
                    .cmp(&(saturation[b], degree[b]))
                    .then(b.cmp(&a))
            })
            .expect("an uncolored vertex remains");
        let taken = &neighbor_colors[v];
        let c = (0..).find(|&c| !taken.get(c).copied().unwrap_or(false)).unwrap();
        color[v] = Some(c);
        used = used.max(c + 1);
        for &u in &adj[v] {
            let seen = &mut neighbor_colors[u];
            if seen.len() <= c {
                seen.resize(c + 1, false);
            }
            if !seen[c] {
                seen[c] = true;
                saturation[u] += 1;
            }
        }
    }
    (color.into_iter().map(|c| c.unwrap()).collect(), used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::toy_hypergraph;
    use crate::problems::{compile, CompileOptions};

    fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for u in 0..5 {
                for v in u + 1..5 {
                    edges.push((base + u, base + v));
                }
            }
        }
        edges.push((4, 5));
        Graph::new(10, edges).unwrap()
    }

    /// Odd-cycle check by BFS 2-coloring, independent of enumeration.
    fn is_bipartite(g: &Graph) -> bool {
        let adj = g.adjacency_lists();
        let mut side = vec![None; g.num_vertices()];
        for s in 0..g.num_vertices() {
            if side[s].is_some() {
                continue;
            }
            side[s] = Some(0);
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    match side[v] {
                        None => {
                            side[v] = Some(1 - side[u].unwrap());
                            queue.push_back(v);
                        }
                        Some(sv) if sv == side[u].unwrap() => return false,
                        _ => {}
                    }
                }
            }
        }
        true
    }

    #[test]
    fn balance_metric_examples() {
        assert_eq!(balance_metrics(&[2, 2]), (0.0, 0.0));
        assert_eq!(balance_metrics(&[3, 1]), (0.5, 1.0));
    }

    #[test]
    fn verify_counts_cut_edges_once() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let r = verify_groups(Problem::GraphPartitioning, &g, &[0, 1], 2).unwrap();
        assert_eq!(r.cut, Some(1));
        assert!(r.feasible);
    }

    #[test]
    fn verify_rejects_bad_input() {
        let g = Graph::path(3);
        let relaxed = Assignment::relaxed(crate::tensor::Tensor::filled(3, 2, 0.5)).unwrap();
        assert_eq!(verify(Problem::MaxCut, &g, &relaxed).unwrap_err(), OracleError::NotHard);
        let short = Assignment::hard(&[0, 1], 2).unwrap();
        assert!(matches!(
            verify(Problem::MaxCut, &g, &short),
            Err(OracleError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            verify_groups(Problem::GraphColoring, &toy_hypergraph(), &[0, 1, 0, 1], 2),
            Err(OracleError::NotAGraph(_))
        ));
    }

    #[test]
    fn brute_force_maxcut_k4() {
        let loss = compile(Problem::MaxCut, &Graph::complete(4), &CompileOptions::default()).unwrap();
        let best = brute_force(&loss, DEFAULT_SEARCH_LIMIT).unwrap();
        assert_eq!(best.value, 4.0);
        assert_eq!(best.evaluated, 8);
    }

    #[test]
    fn brute_force_toy_proper_coloring() {
        let loss = compile(
            Problem::ProperColoring,
            &toy_hypergraph(),
            &CompileOptions {
                groups: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        let best = brute_force(&loss, DEFAULT_SEARCH_LIMIT).unwrap();
        assert!(best.report.feasible);
        assert_eq!(best.value, 2.0);
    }

    #[test]
    fn brute_force_two_cliques_partition() {
        let loss = compile(
            Problem::GraphPartitioning,
            &two_cliques(),
            &CompileOptions {
                groups: Some(2),
                beta: 50.0,
                ..Default::default()
            },
        )
        .unwrap();
        let best = brute_force(&loss, DEFAULT_SEARCH_LIMIT).unwrap();
        assert_eq!(best.report.cut, Some(1));
        assert_eq!((best.report.b1, best.report.b2), (0.0, 0.0));
    }

    #[test]
    fn brute_force_over_limit() {
        let loss = compile(Problem::MaxCut, &Graph::path(30), &CompileOptions::default()).unwrap();
        assert!(matches!(brute_force(&loss, 1000), Err(OracleError::OverLimit { .. })));
    }

    #[test]
    fn brute_force_is_relabeling_invariant() {
        let g = crate::hypergraph::generate::erdos_renyi(8, 14, 4).unwrap();
        let perm = [3, 7, 0, 5, 1, 6, 2, 4];
        let relabeled = Graph::new(8, g.edge_pairs().map(|(u, v)| (perm[u], perm[v]))).unwrap();
        for problem in [Problem::MaxCut, Problem::GraphColoring, Problem::Mis] {
            let opts = CompileOptions {
                groups: (problem == Problem::GraphColoring).then_some(4),
                ..Default::default()
            };
            let a = brute_force(&compile(problem, &g, &opts).unwrap(), DEFAULT_SEARCH_LIMIT).unwrap();
            let b = brute_force(&compile(problem, &relabeled, &opts).unwrap(), DEFAULT_SEARCH_LIMIT).unwrap();
            assert_eq!(a.value, b.value, "{problem}");
        }
    }

    #[test]
    fn dsatur_examples() {
        assert_eq!(dsatur_coloring(&Graph::complete(3)).1, 3);
        assert_eq!(dsatur_coloring(&Graph::path(3)).1, 2);
        let petersen = Graph::petersen();
        let (colors, used) = dsatur_coloring(&petersen);
        assert_eq!(used, 3);
        assert!(!is_bipartite(&petersen));
        let r = verify_groups(Problem::GraphColoring, &petersen, &colors, used).unwrap();
        assert!(r.feasible);
    }

    #[test]
    fn petersen_has_no_two_coloring_by_enumeration() {
        let g = Graph::petersen();
        let proper = (0u32..1 << 10).any(|mask| {
            let groups: Vec<usize> = (0..10).map(|v| ((mask >> v) & 1) as usize).collect();
            count_violations(Problem::GraphColoring, &g, &groups) == 0
        });
        assert!(!proper);
    }

    #[test]
    fn dsatur_is_always_proper() {
        for seed in 0..20 {
            let g = crate::hypergraph::generate::erdos_renyi(30, 80, seed).unwrap();
            let (colors, used) = dsatur_coloring(&g);
            assert_eq!(count_violations(Problem::GraphColoring, &g, &colors), 0);
            assert!(used <= g.max_degree() + 1);
        }
    }
}
