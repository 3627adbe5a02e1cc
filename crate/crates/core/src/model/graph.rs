use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{MdpInstance, NonnegMatrix};

/// Strongly connected structure of a support graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// SCCs in reverse topological order of the condensation (sinks first),
    /// members sorted ascending.
    pub scc_list: Vec<Vec<usize>>,
    /// Index into `scc_list` for each state.
    pub component_of: Vec<usize>,
    /// Deduplicated condensation edges `(from_scc, to_scc)`.
    pub condensation_edges: Vec<(usize, usize)>,
    /// Exactly one SCC.
    pub irreducible: bool,
    /// States reachable from each state (including itself), ascending.
    pub reachable: Vec<Vec<usize>>,
    self_loop: Vec<bool>,
}

impl Classification {
    pub(crate) fn from_adjacency(adj: &[Vec<bool>]) -> Self {
        let n = adj.len();
        let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for i in 0..n {
            for j in 0..n {
                if adj[i][j] {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let scc_list: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut members: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
                members.sort_unstable();
                members
            })
            .collect();
        let mut component_of = vec![0; n];
        for (c, members) in scc_list.iter().enumerate() {
            for &i in members {
                component_of[i] = c;
            }
        }
        let mut condensation_edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (component_of[i], component_of[j]);
                if adj[i][j] && a != b {
                    condensation_edges.push((a, b));
                }
            }
        }
        condensation_edges.sort_unstable();
        condensation_edges.dedup();

        let reachable = (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                seen[s] = true;
                let mut stack = vec![s];
                while let Some(i) = stack.pop() {
                    for j in 0..n {
                        if adj[i][j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
                (0..n).filter(|&j| seen[j]).collect()
            })
            .collect();

        Classification {
            irreducible: scc_list.len() == 1,
            scc_list,
            component_of,
            condensation_edges,
            reachable,
            self_loop: (0..n).map(|i| adj[i][i]).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.component_of.len()
    }

    /// A singleton SCC without a self-loop carries no cycle.
    pub fn is_trivial(&self, scc: usize) -> bool {
        let members = &self.scc_list[scc];
        members.len() == 1 && !self.self_loop[members[0]]
    }

    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.reachable[from].binary_search(&to).is_ok()
    }

    /// SCCs reachable from SCC `scc` (including itself).
    pub fn reachable_sccs(&self, scc: usize) -> Vec<usize> {
        let rep = self.scc_list[scc][0];
        let mut out: Vec<usize> = self.reachable[rep]
            .iter()
            .map(|&j| self.component_of[j])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// SCC decomposition of the graph with an edge `(i, j)` iff `Q(i,j) > 0`.
pub fn classify(q: &NonnegMatrix) -> Classification {
    let n = q.n();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| q.row(i).iter().map(|&v| v > 0.0).collect())
        .collect();
    Classification::from_adjacency(&adj)
}

/// Classification of the graph with an edge `(i, j)` iff some available
/// action gives `p(j|i,u) e^{r(i,u,j)} > 0`.
pub fn instance_support_union(inst: &MdpInstance) -> Classification {
    let n = inst.n_states();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| inst.rows(i).iter().any(|r| r.log_weight(j) > f64::NEG_INFINITY))
                .collect()
        })
        .collect();
    Classification::from_adjacency(&adj)
}
