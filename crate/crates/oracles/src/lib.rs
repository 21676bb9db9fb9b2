//! Ground-truth oracles for the matching toolkit: an independent maximum
//! bipartite matching, exhaustive matching enumeration, direct
//! Pareto-domination search, and structural checkers for cycle-detection
//! runs. Everything here exists to check the main algorithms and shares no
//! code with them; the exhaustive pieces enforce hard size budgets instead of
//! silently degrading.

use std::collections::VecDeque;

use housekit_core::cycles::{CyclePartition, CycleReport, DeactKind, FunctionalGraph, IterRecord};
use housekit_core::instance::{AgentId, HouseId, Instance, Matching};
use housekit_core::sim::NodeId;

/// Hard limits for the exhaustive oracles.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationBudget {
    pub max_agents: usize,
    pub max_matchings: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_agents: 8,
            max_matchings: 2_000_000,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum OracleError {
    BudgetExceeded { what: &'static str, limit: usize },
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::BudgetExceeded { what, limit } => {
                write!(f, "oracle budget exceeded: {what} over {limit}")
            }
        }
    }
}

impl std::error::Error for OracleError {}

/// Maximum bipartite matching by breadth-first layering and layered
/// augmentation. `adj[l]` lists the right vertices adjacent to left vertex
/// `l`. Returns the cardinality and the left-to-right assignment.
pub fn max_matching_oracle(n_right: usize, adj: &[Vec<usize>]) -> (usize, Vec<Option<usize>>) {
    let n_left = adj.len();
    let mut match_left: Vec<Option<usize>> = vec![None; n_left];
    let mut match_right: Vec<Option<usize>> = vec![None; n_right];
    let mut cardinality = 0;

    loop {
        // BFS from free left vertices to build layer depths.
        let mut depth: Vec<Option<u32>> = vec![None; n_left];
        let mut queue = VecDeque::new();
        for l in 0..n_left {
            if match_left[l].is_none() {
                depth[l] = Some(0);
                queue.push_back(l);
            }
        }
        let mut found_free = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                match match_right[r] {
                    None => found_free = true,
                    Some(l2) => {
                        if depth[l2].is_none() {
                            depth[l2] = Some(depth[l].unwrap() + 1);
                            queue.push_back(l2);
                        }
                    }
                }
            }
        }
        if !found_free {
            break;
        }

        fn augment(
            l: usize,
            adj: &[Vec<usize>],
            depth: &mut [Option<u32>],
            match_left: &mut [Option<usize>],
            match_right: &mut [Option<usize>],
        ) -> bool {
            for &r in &adj[l] {
                match match_right[r] {
                    None => {
                        match_left[l] = Some(r);
                        match_right[r] = Some(l);
                        return true;
                    }
                    Some(l2) => {
                        if depth[l2] == Some(depth[l].unwrap() + 1)
                            && augment(l2, adj, depth, match_left, match_right)
                        {
                            match_left[l] = Some(r);
                            match_right[r] = Some(l);
                            return true;
                        }
                    }
                }
            }
            // Dead end: prune this vertex for the rest of the phase.
            depth[l] = None;
            false
        }

        let mut progressed = false;
        for l in 0..n_left {
            if match_left[l].is_none()
                && depth[l] == Some(0)
                && augment(l, adj, &mut depth, &mut match_left, &mut match_right)
            {
                cardinality += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    (cardinality, match_left)
}

/// Maximum matching cardinality of an instance's acceptability graph.
pub fn max_matching_cardinality(inst: &Instance) -> usize {
    let adj: Vec<Vec<usize>> = (0..inst.n_agents())
        .map(|a| {
            inst.prefs(AgentId(a as u32))
                .houses()
                .iter()
                .map(|h| h.index())
                .collect()
        })
        .collect();
    max_matching_oracle(inst.n_houses(), &adj).0
}

/// Exhaustively enumerates every matching of the instance (each agent either
/// unmatched or assigned one of its listed houses, houses distinct).
/// Duplicate-free by construction.
pub fn enumerate_matchings(
    inst: &Instance,
    budget: &EnumerationBudget,
) -> Result<Vec<Matching>, OracleError> {
    if inst.n_agents() > budget.max_agents {
        return Err(OracleError::BudgetExceeded {
            what: "agents",
            limit: budget.max_agents,
        });
    }
    let mut out = Vec::new();
    let mut taken = vec![false; inst.n_houses()];
    let mut picks: Vec<Option<HouseId>> = vec![None; inst.n_agents()];

    fn rec(
        inst: &Instance,
        at: usize,
        taken: &mut [bool],
        picks: &mut [Option<HouseId>],
        out: &mut Vec<Matching>,
        cap: usize,
    ) -> Result<(), OracleError> {
        if at == inst.n_agents() {
            if out.len() >= cap {
                return Err(OracleError::BudgetExceeded {
                    what: "matchings",
                    limit: cap,
                });
            }
            let pairs = picks
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.map(|h| (AgentId(i as u32), h)));
            out.push(Matching::from_pairs(inst.n_agents(), pairs).expect("houses distinct"));
            return Ok(());
        }
        let a = AgentId(at as u32);
        picks[at] = None;
        rec(inst, at + 1, taken, picks, out, cap)?;
        for &h in inst.prefs(a).houses() {
            if !taken[h.index()] {
                taken[h.index()] = true;
                picks[at] = Some(h);
                rec(inst, at + 1, taken, picks, out, cap)?;
                picks[at] = None;
                taken[h.index()] = false;
            }
        }
        Ok(())
    }

    rec(
        inst,
        0,
        &mut taken,
        &mut picks,
        &mut out,
        budget.max_matchings,
    )?;
    Ok(out)
}

/// Direct Pareto-domination test: `a` dominates `b` iff every agent finds
/// `a` at least as good and some agent finds it strictly better. An assigned
/// house beats being unmatched.
pub fn pareto_dominates(inst: &Instance, a: &Matching, b: &Matching) -> bool {
    let mut strict = false;
    for agent in inst.agents() {
        let prefs = inst.prefs(agent);
        match (a.house_of(agent), b.house_of(agent)) {
            (Some(ha), Some(hb)) => {
                let (ra, rb) = (prefs.rank(ha).unwrap(), prefs.rank(hb).unwrap());
                if ra > rb {
                    return false;
                }
                if ra < rb {
                    strict = true;
                }
            }
            (Some(_), None) => strict = true,
            (None, Some(_)) => return false,
            (None, None) => {}
        }
    }
    strict
}

/// Exhaustive Pareto optimality: no enumerated matching dominates `mu`.
pub fn is_pareto_optimal_brute(
    inst: &Instance,
    mu: &Matching,
    budget: &EnumerationBudget,
) -> Result<bool, OracleError> {
    Ok(enumerate_matchings(inst, budget)?
        .iter()
        .all(|nu| !pareto_dominates(inst, nu, mu)))
}

/// Checks a distributed cycle-detection run against the sequential oracle:
/// membership, one succ-fixpoint winner per cycle, and each winner's
/// adoption tree spanning exactly its cycle (so the notified set is right
/// for the right reason).
pub fn check_cycle_report(
    g: &FunctionalGraph,
    report: &CycleReport,
    expected: &CyclePartition,
) -> Result<(), String> {
    if report.in_cycle != expected.in_cycle {
        return Err(format!(
            "membership mismatch: got {:?}, expected {:?}",
            report.in_cycle, expected.in_cycle
        ));
    }
    if report.cycles != expected.cycles {
        return Err(format!(
            "cycle partition mismatch: got {:?}, expected {:?}",
            report.cycles, expected.cycles
        ));
    }

    // Exactly one node per cycle ends with succ = self.
    let fixpoints: Vec<NodeId> = (0..g.len())
        .map(NodeId)
        .filter(|&u| report.final_succ[u.0] == u && report.in_cycle[u.0])
        .collect();
    if fixpoints.len() != expected.cycles.len() {
        return Err(format!(
            "{} succ-fixpoints for {} cycles",
            fixpoints.len(),
            expected.cycles.len()
        ));
    }
    if report.winners.len() != expected.cycles.len() {
        return Err(format!(
            "{} winners for {} cycles",
            report.winners.len(),
            expected.cycles.len()
        ));
    }
    for &w in &report.winners {
        if report.final_succ[w.0] != w {
            return Err(format!("winner {w:?} is not a succ-fixpoint"));
        }
    }
    for u in 0..g.len() {
        if !report.in_cycle[u] && report.final_succ[u] == NodeId(u) {
            return Err(format!("non-cycle node {u} ended with succ = self"));
        }
    }

    // The tree rooted at each winner spans exactly its cycle.
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); g.len()];
    for &(p, c) in &report.tree_edges {
        children[p.0].push(c);
    }
    for &w in &report.winners {
        let mut reach = vec![false; g.len()];
        let mut stack = vec![w];
        reach[w.0] = true;
        while let Some(u) = stack.pop() {
            for &c in &children[u.0] {
                if !reach[c.0] {
                    reach[c.0] = true;
                    stack.push(c);
                }
            }
        }
        let cycle = expected
            .cycles
            .iter()
            .find(|c| c.contains(&w))
            .ok_or_else(|| format!("winner {w:?} not on any cycle"))?;
        for u in 0..g.len() {
            let should = cycle.contains(&NodeId(u));
            if reach[u] != should {
                return Err(format!(
                    "winner {w:?} tree reaches node {u}: {}, expected {}",
                    reach[u], should
                ));
            }
        }
    }
    Ok(())
}

fn records_for_iter(logs: &[Vec<IterRecord>], iter: u64) -> Vec<Option<&IterRecord>> {
    logs.iter()
        .map(|log| log.iter().find(|r| r.iter == iter))
        .collect()
}

/// No run of more than `max_consecutive` active nodes (along the
/// start-of-iteration successor pointers) drops out by coin or color in the
/// same iteration; finish-cascade exits are a different mechanism and are
/// exempt.
pub fn check_deactivation_safety(
    report: &CycleReport,
    max_consecutive: usize,
) -> Result<(), String> {
    let n = report.iter_logs.len();
    let max_iter = report
        .iter_logs
        .iter()
        .flat_map(|l| l.iter().map(|r| r.iter))
        .max();
    let Some(max_iter) = max_iter else {
        return Ok(());
    };
    for iter in 0..=max_iter {
        let recs = records_for_iter(&report.iter_logs, iter);
        let dropped = |u: usize| {
            matches!(
                recs[u].and_then(|r| r.deactivated),
                Some(DeactKind::Coin) | Some(DeactKind::Color)
            )
        };
        for start in 0..n {
            if !dropped(start) {
                continue;
            }
            let mut run = 1;
            let mut cur = recs[start].unwrap().succ_at_start;
            while dropped(cur.0) {
                run += 1;
                if run > max_consecutive {
                    return Err(format!(
                        "iteration {iter}: {run} consecutive active nodes deactivated \
                         (limit {max_consecutive}), starting at node {start}"
                    ));
                }
                if cur.0 == start {
                    return Err(format!("iteration {iter}: an entire cycle deactivated"));
                }
                cur = recs[cur.0].unwrap().succ_at_start;
            }
        }
    }
    Ok(())
}

/// After the full color reduction of every iteration, colors are in `{0..5}`
/// and adjacent nodes that both completed it carry distinct colors.
pub fn check_coloring_contract(report: &CycleReport) -> Result<(), String> {
    let max_iter = report
        .iter_logs
        .iter()
        .flat_map(|l| l.iter().map(|r| r.iter))
        .max();
    let Some(max_iter) = max_iter else {
        return Ok(());
    };
    for iter in 0..=max_iter {
        let recs = records_for_iter(&report.iter_logs, iter);
        for (u, rec) in recs.iter().enumerate() {
            let Some(rec) = rec else { continue };
            let Some(c) = rec.color_after_reduction else {
                continue;
            };
            if c >= 6 {
                return Err(format!("iteration {iter}: node {u} has color {c} >= 6"));
            }
            let v = rec.succ_at_start;
            if let Some(vr) = recs[v.0] {
                if let Some(cv) = vr.color_after_reduction {
                    if cv == c {
                        return Err(format!(
                            "iteration {iter}: adjacent nodes {u} and {} share color {c}",
                            v.0
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}
