//! Sequential reference solvers: serial dictatorship, top trading cycle,
//! individually-rational Pareto optimal matching via rank-weighted perfect
//! matching, and the two-step maximum-cardinality Pareto optimal algorithm.

pub mod assignment;

use thiserror::Error;

use crate::instance::{AgentId, HouseId, Instance, InstanceKind, Matching};
pub use assignment::{min_weight_perfect_matching, Assignment, AssignmentError, WeightedBipartiteGraph};

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum SolveError {
    #[error("expected a {expected:?} instance")]
    WrongKind { expected: InstanceKind },
    #[error("order is not a permutation of all agents")]
    OrderNotPermutation,
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

/// One top-trading stage: the node-disjoint cycles traded, each cycle listed
/// from its smallest agent, cycles sorted by smallest agent.
pub type StageCycles = Vec<Vec<AgentId>>;

/// Result of the top trading cycle mechanism: the core matching plus the
/// per-stage trace of traded cycles.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TtcOutcome {
    pub matching: Matching,
    pub stages: Vec<StageCycles>,
}

/// Serial dictatorship: agents pick their top remaining choice one by one
/// following `order`. An agent whose listed houses are all taken stays
/// unmatched.
pub fn serial_dictatorship(inst: &Instance, order: &[AgentId]) -> Result<Matching, SolveError> {
    if inst.kind() != InstanceKind::Allocation {
        return Err(SolveError::WrongKind {
            expected: InstanceKind::Allocation,
        });
    }
    let n = inst.n_agents();
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(SolveError::OrderNotPermutation);
    }
    for &a in order {
        if a.index() >= n || seen[a.index()] {
            return Err(SolveError::OrderNotPermutation);
        }
        seen[a.index()] = true;
    }

    let mut taken = vec![false; inst.n_houses()];
    let mut m = Matching::empty(n);
    for &a in order {
        if let Some(&h) = inst.prefs(a).houses().iter().find(|h| !taken[h.index()]) {
            taken[h.index()] = true;
            m.assign(a, h).expect("untaken house");
        }
    }
    Ok(m)
}

/// Gale's top trading cycle mechanism. Works in stages: build the top-choice
/// graph over unassigned agents, trade along all of its disjoint cycles
/// simultaneously, remove traded houses, repeat. Returns the unique core
/// matching and the stage trace.
pub fn solve_core_ttc(inst: &Instance) -> Result<TtcOutcome, SolveError> {
    if inst.kind() != InstanceKind::Market {
        return Err(SolveError::WrongKind {
            expected: InstanceKind::Market,
        });
    }
    let n = inst.n_agents();
    let mut removed = vec![false; n];
    let mut assigned: Vec<Option<HouseId>> = vec![None; n];
    // Cursor into each preference list; only ever advances.
    let mut cursor = vec![0usize; n];
    let mut stages = Vec::new();
    let mut remaining = n;

    while remaining > 0 {
        // Current top choice and successor (the owner of that top choice).
        let mut succ: Vec<Option<AgentId>> = vec![None; n];
        let mut top: Vec<Option<HouseId>> = vec![None; n];
        for a in inst.agents() {
            if assigned[a.index()].is_some() {
                continue;
            }
            let prefs = inst.prefs(a).houses();
            while removed[prefs[cursor[a.index()]].index()] {
                cursor[a.index()] += 1;
            }
            let h = prefs[cursor[a.index()]];
            top[a.index()] = Some(h);
            succ[a.index()] = Some(inst.owner_of(h).expect("market house has an owner"));
        }

        let cycles = functional_cycles(&succ);
        assert!(!cycles.is_empty(), "a functional graph always has a cycle");
        for cycle in &cycles {
            for &a in cycle {
                assigned[a.index()] = top[a.index()];
                remaining -= 1;
            }
        }
        for cycle in &cycles {
            for &a in cycle {
                removed[assigned[a.index()].unwrap().index()] = true;
            }
        }
        stages.push(cycles);
    }

    let mut m = Matching::empty(n);
    for a in inst.agents() {
        m.assign(a, assigned[a.index()].unwrap())
            .expect("trades are injective");
    }
    Ok(TtcOutcome {
        matching: m,
        stages,
    })
}

/// All cycles of the partial functional graph `succ`, each rotated to start
/// at its smallest agent, sorted by that agent.
fn functional_cycles(succ: &[Option<AgentId>]) -> Vec<Vec<AgentId>> {
    const UNSEEN: u8 = 0;
    const ON_PATH: u8 = 1;
    const DONE: u8 = 2;
    let mut state = vec![UNSEEN; succ.len()];
    let mut cycles = Vec::new();

    for start in 0..succ.len() {
        if state[start] != UNSEEN || succ[start].is_none() {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == UNSEEN {
            state[cur] = ON_PATH;
            path.push(cur);
            cur = succ[cur].expect("successor defined on active agents").index();
        }
        if state[cur] == ON_PATH {
            let at = path.iter().position(|&x| x == cur).unwrap();
            let mut cycle: Vec<AgentId> = path[at..].iter().map(|&x| AgentId(x as u32)).collect();
            let min_at = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, a)| a.0)
                .map(|(i, _)| i)
                .unwrap();
            cycle.rotate_left(min_at);
            cycles.push(cycle);
        }
        for &x in &path {
            state[x] = DONE;
        }
    }
    cycles.sort_by_key(|c| c[0]);
    cycles
}

/// The weighted agent-house bipartite graph of a market: an edge between `a`
/// and `h` iff `h` is `a`'s endowment or `a` prefers `h` to its endowment,
/// weighted by the 0-based rank of `h` in `a`'s list.
pub fn market_rank_graph(inst: &Instance) -> WeightedBipartiteGraph {
    debug_assert_eq!(inst.kind(), InstanceKind::Market);
    let n = inst.n_agents();
    let mut edges = Vec::new();
    for a in inst.agents() {
        let endowed = inst.endowed(a).unwrap();
        let endow_rank = inst.prefs(a).rank(endowed).unwrap();
        for (rank, &h) in inst.prefs(a).houses().iter().enumerate() {
            if rank <= endow_rank {
                edges.push((a.index(), h.index(), rank as u64));
            }
        }
    }
    WeightedBipartiteGraph::new(n, n, edges).expect("ranks are unique per agent")
}

/// An individually rational and Pareto optimal matching of a market: the
/// minimum-weight perfect matching of the rank-weighted agent-house graph.
pub fn solve_irpo_market(inst: &Instance) -> Result<Matching, SolveError> {
    if inst.kind() != InstanceKind::Market {
        return Err(SolveError::WrongKind {
            expected: InstanceKind::Market,
        });
    }
    let g = market_rank_graph(inst);
    // Feasible: endowment edges alone form a perfect matching.
    let sol = min_weight_perfect_matching(&g)?;
    let mut m = Matching::empty(inst.n_agents());
    for (a, &h) in sol.left_to_right.iter().enumerate() {
        m.assign(AgentId(a as u32), HouseId(h as u32))
            .expect("perfect matching is injective");
    }
    Ok(m)
}

/// Maximum-cardinality matching of the agent-house acceptability graph by
/// augmenting paths, processing agents in id order.
fn max_cardinality_matching(inst: &Instance) -> Matching {
    let n_houses = inst.n_houses();
    let mut house_to_agent: Vec<Option<AgentId>> = vec![None; n_houses];

    fn try_augment(
        inst: &Instance,
        a: AgentId,
        visited: &mut [bool],
        house_to_agent: &mut [Option<AgentId>],
    ) -> bool {
        for &h in inst.prefs(a).houses() {
            if visited[h.index()] {
                continue;
            }
            visited[h.index()] = true;
            match house_to_agent[h.index()] {
                None => {
                    house_to_agent[h.index()] = Some(a);
                    return true;
                }
                Some(holder) => {
                    if try_augment(inst, holder, visited, house_to_agent) {
                        house_to_agent[h.index()] = Some(a);
                        return true;
                    }
                }
            }
        }
        false
    }

    for a in inst.agents() {
        let mut visited = vec![false; n_houses];
        try_augment(inst, a, &mut visited, &mut house_to_agent);
    }

    let mut m = Matching::empty(inst.n_agents());
    for (h, slot) in house_to_agent.iter().enumerate() {
        if let Some(a) = slot {
            m.assign(*a, HouseId(h as u32)).expect("houses distinct");
        }
    }
    m
}

/// Maximum-cardinality Pareto optimal matching for a housing allocation.
///
/// Step 1 computes a maximum-cardinality matching `M`. Step 2 keeps the
/// matched agents, pads with virtual agents connected to every house by
/// weight-0 edges, connects each matched agent `a` to `M(a)` and to every
/// house it prefers to `M(a)` with rank weights, and takes the restriction of
/// a minimum-weight perfect matching of that graph to the real agents.
pub fn solve_max_pareto(inst: &Instance) -> Result<Matching, SolveError> {
    if inst.kind() != InstanceKind::Allocation {
        return Err(SolveError::WrongKind {
            expected: InstanceKind::Allocation,
        });
    }
    let step1 = max_cardinality_matching(inst);
    let matched: Vec<AgentId> = step1.pairs().map(|(a, _)| a).collect();
    let n_houses = inst.n_houses();
    debug_assert!(matched.len() <= n_houses);

    let mut edges = Vec::new();
    for (i, &a) in matched.iter().enumerate() {
        let own = step1.house_of(a).unwrap();
        let own_rank = inst.prefs(a).rank(own).unwrap();
        for (rank, &h) in inst.prefs(a).houses().iter().enumerate() {
            if rank <= own_rank {
                edges.push((i, h.index(), rank as u64));
            }
        }
    }
    // Virtual agents make the graph square; they take the leftover houses.
    for v in matched.len()..n_houses {
        for h in 0..n_houses {
            edges.push((v, h, 0));
        }
    }
    let g = WeightedBipartiteGraph::new(n_houses, n_houses, edges).expect("ranks unique per agent");
    let sol = min_weight_perfect_matching(&g)?;

    let mut m = Matching::empty(inst.n_agents());
    for (i, &a) in matched.iter().enumerate() {
        m.assign(a, HouseId(sol.left_to_right[i] as u32))
            .expect("perfect matching is injective");
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::PreferenceList;
    use crate::io::parse_instance;

    pub const EXAMPLE_MARKET: &str = "\
market 3
agent 0 prefs 1 2 0
agent 1 prefs 0 2 1
agent 2 prefs 0 1 2
endow 0 0
endow 1 1
endow 2 2
";

    fn pl(houses: &[u32]) -> PreferenceList {
        PreferenceList::new(houses.iter().map(|&h| HouseId(h)).collect()).unwrap()
    }

    fn example_as_allocation() -> Instance {
        Instance::allocation(3, 3, vec![pl(&[1, 2, 0]), pl(&[0, 2, 1]), pl(&[0, 1, 2])]).unwrap()
    }

    fn ids(xs: &[u32]) -> Vec<AgentId> {
        xs.iter().map(|&x| AgentId(x)).collect()
    }

    #[test]
    fn dictatorship_forward_order() {
        // Hand-executed greedy: a0 takes h1, a1 takes h0, a2 is left h2.
        let m = serial_dictatorship(&example_as_allocation(), &ids(&[0, 1, 2])).unwrap();
        assert_eq!(m.house_of(AgentId(0)), Some(HouseId(1)));
        assert_eq!(m.house_of(AgentId(1)), Some(HouseId(0)));
        assert_eq!(m.house_of(AgentId(2)), Some(HouseId(2)));
    }

    #[test]
    fn dictatorship_reverse_order() {
        // Hand-executed greedy: a2 takes h0, a1 takes h2, a0 takes h1.
        let m = serial_dictatorship(&example_as_allocation(), &ids(&[2, 1, 0])).unwrap();
        assert_eq!(m.house_of(AgentId(2)), Some(HouseId(0)));
        assert_eq!(m.house_of(AgentId(1)), Some(HouseId(2)));
        assert_eq!(m.house_of(AgentId(0)), Some(HouseId(1)));
    }

    #[test]
    fn dictatorship_single_agent() {
        let inst = Instance::allocation(1, 1, vec![pl(&[0])]).unwrap();
        let m = serial_dictatorship(&inst, &ids(&[0])).unwrap();
        assert_eq!(m.house_of(AgentId(0)), Some(HouseId(0)));
    }

    #[test]
    fn dictatorship_rejects_bad_order() {
        let inst = example_as_allocation();
        assert_eq!(
            serial_dictatorship(&inst, &ids(&[0, 0, 2])),
            Err(SolveError::OrderNotPermutation)
        );
        assert_eq!(
            serial_dictatorship(&inst, &ids(&[0, 1])),
            Err(SolveError::OrderNotPermutation)
        );
    }

    #[test]
    fn ttc_example_market_finds_core() {
        let inst = parse_instance(EXAMPLE_MARKET).unwrap();
        let out = solve_core_ttc(&inst).unwrap();
        let m2 = Matching::from_pairs(
            3,
            [
                (AgentId(0), HouseId(1)),
                (AgentId(1), HouseId(0)),
                (AgentId(2), HouseId(2)),
            ],
        )
        .unwrap();
        assert_eq!(out.matching, m2);
        assert_eq!(
            out.stages,
            vec![
                vec![vec![AgentId(0), AgentId(1)]],
                vec![vec![AgentId(2)]],
            ]
        );
    }

    #[test]
    fn ttc_identity_when_all_top_prefer_own() {
        let prefs = vec![pl(&[0]), pl(&[1]), pl(&[2])];
        let endow = vec![HouseId(0), HouseId(1), HouseId(2)];
        let inst = Instance::market(prefs, endow).unwrap();
        let out = solve_core_ttc(&inst).unwrap();
        for a in inst.agents() {
            assert_eq!(out.matching.house_of(a), inst.endowed(a));
        }
        assert_eq!(out.stages.len(), 1);
        assert_eq!(out.stages[0].len(), 3, "three simultaneous self-loops");
    }

    #[test]
    fn ttc_two_stage_swaps() {
        // Four agents; 0 and 1 swap at stage 0, then 2 and 3 swap at stage 1.
        let prefs = vec![
            pl(&[1, 3, 2, 0]),
            pl(&[0, 3, 1]),
            pl(&[0, 3, 2]),
            pl(&[0, 2, 1, 3]),
        ];
        let endow = vec![HouseId(0), HouseId(1), HouseId(2), HouseId(3)];
        let inst = Instance::market(prefs, endow).unwrap();
        let out = solve_core_ttc(&inst).unwrap();
        assert_eq!(
            out.stages,
            vec![
                vec![vec![AgentId(0), AgentId(1)]],
                vec![vec![AgentId(2), AgentId(3)]],
            ]
        );
        assert_eq!(out.matching.house_of(AgentId(2)), Some(HouseId(3)));
        assert_eq!(out.matching.house_of(AgentId(3)), Some(HouseId(2)));
    }

    #[test]
    fn irpo_prefers_the_swap() {
        // Two agents each preferring the other's house: swap weighs 0 + 0,
        // staying put weighs 1 + 1.
        let prefs = vec![pl(&[1, 0]), pl(&[0, 1])];
        let inst = Instance::market(prefs, vec![HouseId(0), HouseId(1)]).unwrap();
        let m = solve_irpo_market(&inst).unwrap();
        assert_eq!(m.house_of(AgentId(0)), Some(HouseId(1)));
        assert_eq!(m.house_of(AgentId(1)), Some(HouseId(0)));
    }

    #[test]
    fn irpo_identity_when_all_top_prefer_own() {
        let prefs = vec![pl(&[0]), pl(&[1])];
        let inst = Instance::market(prefs, vec![HouseId(0), HouseId(1)]).unwrap();
        let m = solve_irpo_market(&inst).unwrap();
        assert_eq!(m.house_of(AgentId(0)), Some(HouseId(0)));
        assert_eq!(m.house_of(AgentId(1)), Some(HouseId(1)));
    }

    #[test]
    fn max_pareto_fills_cardinality() {
        // a0 and a1 both list only h0; a2 lists h1 then h0. Cardinality 2 is
        // the maximum and a2 must keep h1.
        let inst = Instance::allocation(3, 2, vec![pl(&[0]), pl(&[0]), pl(&[1, 0])]).unwrap();
        let m = solve_max_pareto(&inst).unwrap();
        assert_eq!(m.cardinality(), 2);
        assert_eq!(m.house_of(AgentId(2)), Some(HouseId(1)));
        assert!(m.house_of(AgentId(0)).is_some() ^ m.house_of(AgentId(1)).is_some());
    }

    #[test]
    fn max_pareto_on_example_prefs_is_perfect() {
        let m = solve_max_pareto(&example_as_allocation()).unwrap();
        assert_eq!(m.cardinality(), 3);
    }

    #[test]
    fn max_pareto_empty_instance() {
        let inst = Instance::allocation(0, 0, vec![]).unwrap();
        let m = solve_max_pareto(&inst).unwrap();
        assert_eq!(m.cardinality(), 0);
    }

    #[test]
    fn kind_checks() {
        let market = parse_instance(EXAMPLE_MARKET).unwrap();
        assert!(matches!(
            serial_dictatorship(&market, &ids(&[0, 1, 2])),
            Err(SolveError::WrongKind { .. })
        ));
        let alloc = example_as_allocation();
        assert!(matches!(
            solve_core_ttc(&alloc),
            Err(SolveError::WrongKind { .. })
        ));
        assert!(matches!(
            solve_irpo_market(&alloc),
            Err(SolveError::WrongKind { .. })
        ));
        assert!(matches!(
            solve_max_pareto(&market),
            Err(SolveError::WrongKind { .. })
        ));
    }
}
