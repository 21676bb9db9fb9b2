//! Exponential ground-truth checks for small markets: direct coalition
//! search over agent subsets and internal reallocations, and core computation
//! by exhausting all perfect matchings. Kept apart from the digraph-based
//! verifiers so each side can check the other.

use crate::instance::{AgentId, HouseId, Instance, InstanceKind, Matching};

use super::VerifyError;

/// Hard size limit for the exhaustive searches.
pub const MAX_BRUTE_AGENTS: usize = 8;

/// A coalition found by direct search: the agents of `A'` and the
/// reallocation `nu` over them (same order).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BruteCoalition {
    pub agents: Vec<AgentId>,
    pub nu: Vec<HouseId>,
}

/// Searches every agent subset for a reallocation of its own endowments in
/// which each member does weakly better than under `mu` and some member does
/// strictly better. Returns the first coalition in subset-bitmask order.
pub fn find_coalition_brute(
    inst: &Instance,
    mu: &Matching,
) -> Result<Option<BruteCoalition>, VerifyError> {
    if inst.kind() != InstanceKind::Market {
        return Err(VerifyError::WrongKind {
            expected: InstanceKind::Market,
        });
    }
    let n = inst.n_agents();
    if n > MAX_BRUTE_AGENTS {
        return Err(VerifyError::BudgetExceeded {
            n,
            max: MAX_BRUTE_AGENTS,
        });
    }
    mu.validate_perfect(inst)?;

    for mask in 1u32..(1u32 << n) {
        let agents: Vec<AgentId> = (0..n as u32)
            .filter(|i| mask & (1 << i) != 0)
            .map(AgentId)
            .collect();
        let pool: Vec<HouseId> = agents.iter().map(|&a| inst.endowed(a).unwrap()).collect();
        let mut nu: Vec<Option<HouseId>> = vec![None; agents.len()];
        let mut used = vec![false; agents.len()];
        if assign_weakly_better(inst, mu, &agents, &pool, &mut nu, &mut used, 0, false) {
            return Ok(Some(BruteCoalition {
                agents,
                nu: nu.into_iter().map(Option::unwrap).collect(),
            }));
        }
    }
    Ok(None)
}

/// Backtracking over members in order; `strict` records whether some already
/// placed member strictly improved.
#[allow(clippy::too_many_arguments)]
fn assign_weakly_better(
    inst: &Instance,
    mu: &Matching,
    agents: &[AgentId],
    pool: &[HouseId],
    nu: &mut [Option<HouseId>],
    used: &mut [bool],
    at: usize,
    strict: bool,
) -> bool {
    if at == agents.len() {
        return strict;
    }
    let a = agents[at];
    let current_rank = inst
        .prefs(a)
        .rank(mu.house_of(a).expect("perfect matching"))
        .expect("validated listing");
    for (i, &h) in pool.iter().enumerate() {
        if used[i] {
            continue;
        }
        let Some(r) = inst.prefs(a).rank(h) else {
            continue;
        };
        if r > current_rank {
            continue;
        }
        used[i] = true;
        nu[at] = Some(h);
        if assign_weakly_better(inst, mu, agents, pool, nu, used, at + 1, strict || r < current_rank)
        {
            return true;
        }
        used[i] = false;
        nu[at] = None;
    }
    false
}

/// All perfect matchings of the instance (every agent gets a listed house,
/// houses distinct), in backtracking order over agents by id.
pub fn enumerate_perfect_matchings(inst: &Instance) -> Vec<Matching> {
    let n = inst.n_agents();
    let mut out = Vec::new();
    let mut taken = vec![false; inst.n_houses()];
    let mut picks: Vec<HouseId> = Vec::with_capacity(n);

    fn rec(
        inst: &Instance,
        at: usize,
        taken: &mut [bool],
        picks: &mut Vec<HouseId>,
        out: &mut Vec<Matching>,
    ) {
        if at == inst.n_agents() {
            let m = Matching::from_pairs(
                inst.n_agents(),
                picks
                    .iter()
                    .enumerate()
                    .map(|(i, &h)| (AgentId(i as u32), h)),
            )
            .expect("houses tracked as distinct");
            out.push(m);
            return;
        }
        for &h in inst.prefs(AgentId(at as u32)).houses() {
            if !taken[h.index()] {
                taken[h.index()] = true;
                picks.push(h);
                rec(inst, at + 1, taken, picks, out);
                picks.pop();
                taken[h.index()] = false;
            }
        }
    }

    rec(inst, 0, &mut taken, &mut picks, &mut out);
    out
}

/// Computes the core of a small market by exhausting perfect matchings and
/// keeping the coalition-free one. Uniqueness is part of the contract: zero
/// or several survivors is an error.
pub fn brute_force_core(inst: &Instance) -> Result<Matching, VerifyError> {
    if inst.kind() != InstanceKind::Market {
        return Err(VerifyError::WrongKind {
            expected: InstanceKind::Market,
        });
    }
    let n = inst.n_agents();
    if n > MAX_BRUTE_AGENTS {
        return Err(VerifyError::BudgetExceeded {
            n,
            max: MAX_BRUTE_AGENTS,
        });
    }
    let mut survivors = Vec::new();
    for m in enumerate_perfect_matchings(inst) {
        if find_coalition_brute(inst, &m)?.is_none() {
            survivors.push(m);
        }
    }
    match survivors.len() {
        1 => Ok(survivors.pop().unwrap()),
        found => Err(VerifyError::CoreNotUnique { found }),
    }
}
