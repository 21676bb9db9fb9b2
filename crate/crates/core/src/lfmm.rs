//! Lex-first maximal matching (LFMM) under a total edge order, and the two
//! reductions connecting it to housing problems: allocation instances reduce
//! to LFMM inputs, and LFMM inputs reduce to housing markets whose core
//! trades mirror the greedy matching stage by stage.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::instance::{AgentId, HouseId, Instance, InstanceKind, Matching, PreferenceList};

/// An undirected graph whose edges carry a total order: the edge at position
/// `p` precedes every edge at a position greater than `p`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OrderedGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum GraphError {
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
}

impl OrderedGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &edges {
            if u >= n_vertices {
                return Err(GraphError::VertexOutOfRange(u));
            }
            if v >= n_vertices {
                return Err(GraphError::VertexOutOfRange(v));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending order position.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn endpoints(&self, pos: usize) -> (usize, usize) {
        self.edges[pos]
    }
}

/// A set of edge positions forming a matching.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct EdgeMatching {
    pub chosen: BTreeSet<usize>,
}

impl EdgeMatching {
    /// True iff the chosen edges are pairwise non-adjacent in `g`.
    pub fn is_matching(&self, g: &OrderedGraph) -> bool {
        let mut used = vec![false; g.n_vertices()];
        for &pos in &self.chosen {
            let (u, v) = g.endpoints(pos);
            if used[u] || used[v] {
                return false;
            }
            used[u] = true;
            used[v] = true;
        }
        true
    }

    /// True iff no further edge of `g` can be added.
    pub fn is_maximal(&self, g: &OrderedGraph) -> bool {
        let mut used = vec![false; g.n_vertices()];
        for &pos in &self.chosen {
            let (u, v) = g.endpoints(pos);
            used[u] = true;
            used[v] = true;
        }
        g.edges().iter().all(|&(u, v)| used[u] || used[v])
    }
}

/// Greedy LFMM execution: the matching plus, per stage, the set of edge
/// positions added at that stage.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LfmmRun {
    pub matching: EdgeMatching,
    pub stages: Vec<BTreeSet<usize>>,
}

impl LfmmRun {
    /// Stage at which `pos` entered the matching, if it did.
    pub fn stage_of(&self, pos: usize) -> Option<usize> {
        self.stages.iter().position(|s| s.contains(&pos))
    }
}

/// Computes the unique lex-first maximal matching by the stage greedy: add
/// every edge that is minimum in its neighborhood, delete incident edges,
/// repeat until the graph is empty.
pub fn greedy_lfmm(g: &OrderedGraph) -> LfmmRun {
    let mut alive: Vec<bool> = vec![true; g.n_edges()];
    let mut alive_count = g.n_edges();
    // Smallest alive edge position at each vertex.
    let mut chosen = BTreeSet::new();
    let mut stages = Vec::new();

    while alive_count > 0 {
        let mut min_at: Vec<Option<usize>> = vec![None; g.n_vertices()];
        for pos in 0..g.n_edges() {
            if !alive[pos] {
                continue;
            }
            let (u, v) = g.endpoints(pos);
            if min_at[u].is_none() {
                min_at[u] = Some(pos);
            }
            if min_at[v].is_none() {
                min_at[v] = Some(pos);
            }
        }
        let mut this_stage = BTreeSet::new();
        for pos in 0..g.n_edges() {
            if !alive[pos] {
                continue;
            }
            let (u, v) = g.endpoints(pos);
            if min_at[u] == Some(pos) && min_at[v] == Some(pos) {
                this_stage.insert(pos);
            }
        }
        assert!(!this_stage.is_empty(), "the globally smallest alive edge is minimal");
        let mut dead_vertex = vec![false; g.n_vertices()];
        for &pos in &this_stage {
            let (u, v) = g.endpoints(pos);
            dead_vertex[u] = true;
            dead_vertex[v] = true;
            chosen.insert(pos);
        }
        for pos in 0..g.n_edges() {
            if alive[pos] {
                let (u, v) = g.endpoints(pos);
                if dead_vertex[u] || dead_vertex[v] {
                    alive[pos] = false;
                    alive_count -= 1;
                }
            }
        }
        stages.push(this_stage);
    }

    LfmmRun {
        matching: EdgeMatching { chosen },
        stages,
    }
}

/// The LFMM input produced from an allocation instance, with the mapping from
/// edge positions back to (agent, house) pairs.
#[derive(Clone, Debug)]
pub struct AllocationReduction {
    pub graph: OrderedGraph,
    /// `pairs[pos]` is the (agent, house) pair of the edge at `pos`.
    pub pairs: Vec<(AgentId, HouseId)>,
}

impl AllocationReduction {
    /// Maps an edge matching of the reduced graph back to a house matching.
    pub fn to_matching(&self, em: &EdgeMatching, n_agents: usize) -> Matching {
        let mut m = Matching::empty(n_agents);
        for &pos in &em.chosen {
            let (a, h) = self.pairs[pos];
            m.assign(a, h).expect("edge matching is vertex-disjoint");
        }
        m
    }
}

/// Reduces a housing allocation to an LFMM input: the agent-house
/// acceptability graph ordered lexicographically by (agent id, rank).
pub fn reduce_allocation_to_lfmm(inst: &Instance) -> AllocationReduction {
    debug_assert_eq!(inst.kind(), InstanceKind::Allocation);
    let n_agents = inst.n_agents();
    let mut edges = Vec::new();
    let mut pairs = Vec::new();
    for a in inst.agents() {
        for &h in inst.prefs(a).houses() {
            edges.push((a.index(), n_agents + h.index()));
            pairs.push((a, h));
        }
    }
    let graph = OrderedGraph::new(n_agents + inst.n_houses(), edges)
        .expect("acceptability pairs are unique");
    AllocationReduction { graph, pairs }
}

/// Reduces an LFMM input to a housing market: one agent and house per vertex,
/// each agent endowed with its own house; `a_u` ranks the houses of its
/// neighbors by ascending edge position, followed by its own house (the tail
/// below the endowment is irrelevant and omitted). Vertex `v` maps to
/// `AgentId(v)` and `HouseId(v)`.
pub fn reduce_lfmm_to_market(g: &OrderedGraph) -> Instance {
    let n = g.n_vertices();
    let mut prefs = Vec::with_capacity(n);
    for u in 0..n {
        let mut list: Vec<HouseId> = g
            .edges()
            .iter()
            .filter_map(|&(x, y)| {
                if x == u {
                    Some(HouseId(y as u32))
                } else if y == u {
                    Some(HouseId(x as u32))
                } else {
                    None
                }
            })
            .collect();
        list.push(HouseId(u as u32));
        prefs.push(PreferenceList::new(list).expect("neighbors are distinct"));
    }
    let endowment = (0..n as u32).map(HouseId).collect();
    Instance::market(prefs, endowment).expect("reduction produces a valid market")
}

/// True iff agents `a_u` and `a_v` of the reduced market exchanged houses.
pub fn swapped(m: &Matching, u: usize, v: usize) -> bool {
    m.house_of(AgentId(u as u32)) == Some(HouseId(v as u32))
        && m.house_of(AgentId(v as u32)) == Some(HouseId(u as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::PreferenceList;
    use crate::solve::solve_core_ttc;

    /// Five edges on vertices u1, u2, v1, v2 = 0, 1, 2, 3 in the order
    /// (u1,u2), (u1,v2), (u1,v1), (v1,v2), (u2,v2).
    fn two_stage_graph() -> OrderedGraph {
        OrderedGraph::new(4, vec![(0, 1), (0, 3), (0, 2), (2, 3), (1, 3)]).unwrap()
    }

    fn pl(houses: &[u32]) -> PreferenceList {
        PreferenceList::new(houses.iter().map(|&h| HouseId(h)).collect()).unwrap()
    }

    #[test]
    fn greedy_on_two_stage_graph() {
        let run = greedy_lfmm(&two_stage_graph());
        assert_eq!(
            run.matching.chosen.iter().copied().collect::<Vec<_>>(),
            vec![0, 3]
        );
        assert_eq!(run.stage_of(0), Some(0));
        assert_eq!(run.stage_of(3), Some(1));
    }

    #[test]
    fn greedy_single_edge() {
        let g = OrderedGraph::new(2, vec![(0, 1)]).unwrap();
        let run = greedy_lfmm(&g);
        assert_eq!(run.matching.chosen.iter().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn greedy_path_takes_first_edge() {
        // Both maximal matchings of the path are {(a,b)} and {(b,c)};
        // {(a,b)} is lexicographically first.
        let g = OrderedGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let run = greedy_lfmm(&g);
        assert_eq!(run.matching.chosen.iter().copied().collect::<Vec<_>>(), vec![0]);
        assert!(run.matching.is_maximal(&g));
    }

    #[test]
    fn allocation_reduction_edge_order() {
        let inst =
            Instance::allocation(3, 3, vec![pl(&[1, 2, 0]), pl(&[0, 2, 1]), pl(&[0, 1, 2])])
                .unwrap();
        let red = reduce_allocation_to_lfmm(&inst);
        assert_eq!(red.pairs[0], (AgentId(0), HouseId(1)));
        assert_eq!(red.pairs[1], (AgentId(0), HouseId(2)));
        assert_eq!(red.pairs[2], (AgentId(0), HouseId(0)));
        assert_eq!(red.pairs[3], (AgentId(1), HouseId(0)));
        // Houses live on vertices shifted past the agents.
        assert_eq!(red.graph.endpoints(0), (0, 3 + 1));
    }

    #[test]
    fn allocation_reduction_lfmm_matches_dictatorship() {
        let inst =
            Instance::allocation(3, 3, vec![pl(&[1, 2, 0]), pl(&[0, 2, 1]), pl(&[0, 1, 2])])
                .unwrap();
        let red = reduce_allocation_to_lfmm(&inst);
        let run = greedy_lfmm(&red.graph);
        let m = red.to_matching(&run.matching, inst.n_agents());
        assert_eq!(m.house_of(AgentId(0)), Some(HouseId(1)));
        assert_eq!(m.house_of(AgentId(1)), Some(HouseId(0)));
        assert_eq!(m.house_of(AgentId(2)), Some(HouseId(2)));
    }

    #[test]
    fn empty_preferences_reduce_to_empty_graph() {
        let inst = Instance::allocation(2, 2, vec![pl(&[]), pl(&[])]).unwrap();
        let red = reduce_allocation_to_lfmm(&inst);
        assert_eq!(red.graph.n_edges(), 0);
        let run = greedy_lfmm(&red.graph);
        assert!(run.matching.chosen.is_empty());
        assert_eq!(red.to_matching(&run.matching, 2).cardinality(), 0);
    }

    #[test]
    fn market_reduction_preference_lists() {
        let inst = reduce_lfmm_to_market(&two_stage_graph());
        assert_eq!(
            inst.prefs(AgentId(0)).houses(),
            &[HouseId(1), HouseId(3), HouseId(2), HouseId(0)]
        );
        assert_eq!(
            inst.prefs(AgentId(1)).houses(),
            &[HouseId(0), HouseId(3), HouseId(1)]
        );
        assert_eq!(
            inst.prefs(AgentId(2)).houses(),
            &[HouseId(0), HouseId(3), HouseId(2)]
        );
        assert_eq!(
            inst.prefs(AgentId(3)).houses(),
            &[HouseId(0), HouseId(2), HouseId(1), HouseId(3)]
        );
    }

    #[test]
    fn market_reduction_simulates_greedy_stages() {
        let g = two_stage_graph();
        let inst = reduce_lfmm_to_market(&g);
        let out = solve_core_ttc(&inst).unwrap();
        assert!(swapped(&out.matching, 0, 1));
        assert!(swapped(&out.matching, 2, 3));
        assert_eq!(
            out.stages,
            vec![
                vec![vec![AgentId(0), AgentId(1)]],
                vec![vec![AgentId(2), AgentId(3)]],
            ]
        );
    }

    #[test]
    fn edgeless_graph_reduces_to_identity_market() {
        let g = OrderedGraph::new(3, vec![]).unwrap();
        let inst = reduce_lfmm_to_market(&g);
        let out = solve_core_ttc(&inst).unwrap();
        for a in inst.agents() {
            assert_eq!(out.matching.house_of(a), inst.endowed(a));
        }
        assert!(greedy_lfmm(&g).matching.chosen.is_empty());
    }

    #[test]
    fn graph_validation() {
        assert!(matches!(
            OrderedGraph::new(2, vec![(0, 0)]),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            OrderedGraph::new(2, vec![(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(1, 0))
        ));
        assert!(matches!(
            OrderedGraph::new(2, vec![(0, 2)]),
            Err(GraphError::VertexOutOfRange(2))
        ));
    }
}
