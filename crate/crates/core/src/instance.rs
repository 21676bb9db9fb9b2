//! Domain model: agents, houses, strict preference lists, instances of the
//! housing allocation and housing market problems, and (partial) matchings.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Dense 0-based agent identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(pub u32);

/// Dense 0-based house identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct HouseId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl HouseId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl fmt::Display for HouseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

/// A strict preference list over a subset of houses, most-preferred first.
///
/// `rank` is the 0-based position in the list; it is defined only for listed
/// houses. Unlisted houses are unacceptable to the agent.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PreferenceList {
    ranked: Vec<HouseId>,
}

impl PreferenceList {
    /// Builds a list, rejecting duplicates (strictness of the preference order).
    pub fn new(ranked: Vec<HouseId>) -> Result<Self, InstanceError> {
        let mut seen = std::collections::HashSet::new();
        for &h in &ranked {
            if !seen.insert(h) {
                return Err(InstanceError::DuplicatePreference { house: h });
            }
        }
        Ok(Self { ranked })
    }

    pub fn houses(&self) -> &[HouseId] {
        &self.ranked
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// 0-based rank of `h`, or `None` if unlisted.
    pub fn rank(&self, h: HouseId) -> Option<usize> {
        self.ranked.iter().position(|&x| x == h)
    }

    pub fn contains(&self, h: HouseId) -> bool {
        self.rank(h).is_some()
    }

    /// True iff the agent strictly prefers `a` to `b`. Both must be listed.
    pub fn prefers(&self, a: HouseId, b: HouseId) -> bool {
        match (self.rank(a), self.rank(b)) {
            (Some(ra), Some(rb)) => ra < rb,
            _ => false,
        }
    }
}

/// Which problem variant an [`Instance`] describes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum InstanceKind {
    /// Agents, houses, preferences; no initial ownership.
    Allocation,
    /// Equal counts of agents and houses plus a bijective initial endowment.
    Market,
}

/// A validated problem instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Instance {
    kind: InstanceKind,
    n_agents: usize,
    n_houses: usize,
    prefs: Vec<PreferenceList>,
    endowment: Option<Vec<HouseId>>,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum InstanceError {
    #[error("duplicate house {house} in a preference list")]
    DuplicatePreference { house: HouseId },
    #[error("house id {house} out of range (instance has {n_houses} houses)")]
    HouseOutOfRange { house: HouseId, n_houses: usize },
    #[error("agent id {agent} out of range (instance has {n_agents} agents)")]
    AgentOutOfRange { agent: AgentId, n_agents: usize },
    #[error("market instance needs equal agent and house counts, got {n_agents} and {n_houses}")]
    MarketNotSquare { n_agents: usize, n_houses: usize },
    #[error("endowment is not a bijection: house {house} assigned to more than one agent")]
    EndowmentNotBijective { house: HouseId },
    #[error("agent {agent} does not list its endowed house {house}")]
    EndowmentNotListed { agent: AgentId, house: HouseId },
    #[error("expected exactly {expected} preference lists, got {got}")]
    PreferenceCountMismatch { expected: usize, got: usize },
    #[error("expected exactly {expected} endowment entries, got {got}")]
    EndowmentCountMismatch { expected: usize, got: usize },
}

impl Instance {
    /// Builds and validates an allocation instance.
    pub fn allocation(
        n_agents: usize,
        n_houses: usize,
        prefs: Vec<PreferenceList>,
    ) -> Result<Self, InstanceError> {
        if prefs.len() != n_agents {
            return Err(InstanceError::PreferenceCountMismatch {
                expected: n_agents,
                got: prefs.len(),
            });
        }
        for list in &prefs {
            for &h in list.houses() {
                if h.index() >= n_houses {
                    return Err(InstanceError::HouseOutOfRange { house: h, n_houses });
                }
            }
        }
        Ok(Self {
            kind: InstanceKind::Allocation,
            n_agents,
            n_houses,
            prefs,
            endowment: None,
        })
    }

    /// Builds and validates a market instance. The endowment must be a
    /// bijection and every agent must list its endowed house (the part of the
    /// list below the endowed house may be truncated away).
    pub fn market(prefs: Vec<PreferenceList>, endowment: Vec<HouseId>) -> Result<Self, InstanceError> {
        let n = prefs.len();
        if endowment.len() != n {
            return Err(InstanceError::EndowmentCountMismatch {
                expected: n,
                got: endowment.len(),
            });
        }
        let mut owner: Vec<Option<AgentId>> = vec![None; n];
        for (i, &h) in endowment.iter().enumerate() {
            if h.index() >= n {
                return Err(InstanceError::HouseOutOfRange { house: h, n_houses: n });
            }
            if owner[h.index()].is_some() {
                return Err(InstanceError::EndowmentNotBijective { house: h });
            }
            owner[h.index()] = Some(AgentId(i as u32));
        }
        for (i, list) in prefs.iter().enumerate() {
            for &h in list.houses() {
                if h.index() >= n {
                    return Err(InstanceError::HouseOutOfRange { house: h, n_houses: n });
                }
            }
            if !list.contains(endowment[i]) {
                return Err(InstanceError::EndowmentNotListed {
                    agent: AgentId(i as u32),
                    house: endowment[i],
                });
            }
        }
        Ok(Self {
            kind: InstanceKind::Market,
            n_agents: n,
            n_houses: n,
            prefs,
            endowment: Some(endowment),
        })
    }

    pub fn kind(&self) -> InstanceKind {
        self.kind
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_houses(&self) -> usize {
        self.n_houses
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n_agents as u32).map(AgentId)
    }

    pub fn houses(&self) -> impl Iterator<Item = HouseId> {
        (0..self.n_houses as u32).map(HouseId)
    }

    pub fn prefs(&self, a: AgentId) -> &PreferenceList {
        &self.prefs[a.index()]
    }

    /// Initial endowment of `a`; `None` for allocation instances.
    pub fn endowed(&self, a: AgentId) -> Option<HouseId> {
        self.endowment.as_ref().map(|e| e[a.index()])
    }

    /// Agent initially owning house `h`; `None` for allocation instances.
    pub fn owner_of(&self, h: HouseId) -> Option<AgentId> {
        let endow = self.endowment.as_ref()?;
        endow
            .iter()
            .position(|&x| x == h)
            .map(|i| AgentId(i as u32))
    }

    /// True iff `a` strictly prefers `x` to `y` (both must be listed by `a`).
    pub fn prefers(&self, a: AgentId, x: HouseId, y: HouseId) -> bool {
        self.prefs(a).prefers(x, y)
    }
}

/// A partial injective assignment of agents to houses.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matching {
    slots: Vec<Option<HouseId>>,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum MatchingError {
    #[error("house {house} assigned to both {first} and {second}")]
    NotInjective {
        house: HouseId,
        first: AgentId,
        second: AgentId,
    },
    #[error("agent {agent} assigned house {house} it does not list")]
    UnlistedAssignment { agent: AgentId, house: HouseId },
    #[error("agent {agent} out of range for this matching")]
    AgentOutOfRange { agent: AgentId },
    #[error("matching is not total: agent {agent} is unmatched")]
    NotPerfect { agent: AgentId },
}

impl Matching {
    pub fn empty(n_agents: usize) -> Self {
        Self {
            slots: vec![None; n_agents],
        }
    }

    /// Builds a matching from explicit pairs, rejecting duplicate houses.
    pub fn from_pairs(
        n_agents: usize,
        pairs: impl IntoIterator<Item = (AgentId, HouseId)>,
    ) -> Result<Self, MatchingError> {
        let mut m = Self::empty(n_agents);
        for (a, h) in pairs {
            if a.index() >= n_agents {
                return Err(MatchingError::AgentOutOfRange { agent: a });
            }
            m.assign(a, h)?;
        }
        Ok(m)
    }

    /// Assigns `h` to `a`, rejecting injectivity violations.
    pub fn assign(&mut self, a: AgentId, h: HouseId) -> Result<(), MatchingError> {
        if let Some(prev) = self.agent_of(h) {
            if prev != a {
                return Err(MatchingError::NotInjective {
                    house: h,
                    first: prev,
                    second: a,
                });
            }
        }
        self.slots[a.index()] = Some(h);
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.slots.len()
    }

    pub fn house_of(&self, a: AgentId) -> Option<HouseId> {
        self.slots[a.index()]
    }

    pub fn agent_of(&self, h: HouseId) -> Option<AgentId> {
        self.slots
            .iter()
            .position(|&x| x == Some(h))
            .map(|i| AgentId(i as u32))
    }

    /// Matched (agent, house) pairs in agent-id order.
    pub fn pairs(&self) -> impl Iterator<Item = (AgentId, HouseId)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, &h)| h.map(|h| (AgentId(i as u32), h)))
    }

    /// Number of matched agents.
    pub fn cardinality(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_perfect(&self) -> bool {
        self.slots.iter().all(|s| s.is_some())
    }

    /// Checks the matching invariants against an instance: injectivity and
    /// every assigned house listed by its agent.
    pub fn validate(&self, inst: &Instance) -> Result<(), MatchingError> {
        if self.slots.len() != inst.n_agents() {
            return Err(MatchingError::AgentOutOfRange {
                agent: AgentId(inst.n_agents() as u32),
            });
        }
        let mut taken: BTreeMap<HouseId, AgentId> = BTreeMap::new();
        for (a, h) in self.pairs() {
            if !inst.prefs(a).contains(h) {
                return Err(MatchingError::UnlistedAssignment { agent: a, house: h });
            }
            if let Some(&first) = taken.get(&h) {
                return Err(MatchingError::NotInjective {
                    house: h,
                    first,
                    second: a,
                });
            }
            taken.insert(h, a);
        }
        Ok(())
    }

    /// Like [`Matching::validate`] but additionally requires totality.
    pub fn validate_perfect(&self, inst: &Instance) -> Result<(), MatchingError> {
        self.validate(inst)?;
        for a in inst.agents() {
            if self.house_of(a).is_none() {
                return Err(MatchingError::NotPerfect { agent: a });
            }
        }
        Ok(())
    }
}
