//! Distributed top trading cycle on the synchronous simulator.
//!
//! Every agent is a node. One bootstrap round broadcasts house ownership;
//! then the protocol runs in stages. At stage entry each unassigned node
//! points `next` at the holder of its top remaining choice and runs the
//! cycle-detection subroutine over those pointers. Cycle nodes take the house
//! their `next` holds, broadcast its removal, and convergecast `ok` up the
//! detection tree; each tree root then reports `done`. Node 0 doubles as the
//! stage coordinator: it learns the stage's successor pointers from one
//! report per participant, so it knows which agents sit on cycles and owe a
//! removal, and it opens the next stage with one broadcast once every
//! expected removal and per-cycle `done` has arrived. Agents that learn they
//! are off-cycle report `done` directly. Stage tags keep late messages from
//! leaking across the barrier.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::cycles::{DetectCore, DetectEvent, DetectVariant, RunOptions, CYCLE, COIN_Q, COIN_R, COLOR_Q, COLOR_R, EXP_Q, EXP_R};
use crate::instance::{AgentId, HouseId, Instance, InstanceKind, Matching};
use crate::sim::{
    default_round_cap, run, Envelope, Node, NodeId, Outbox, SimConfig, SimError, SimStats, Tag,
};
use crate::solve::StageCycles;

const OWN: Tag = Tag(30);
const SUCC_REPORT: Tag = Tag(31);
const REMOVE: Tag = Tag(32);
const OK: Tag = Tag(33);
const DONE: Tag = Tag(34);
const NEXT_STAGE: Tag = Tag(35);

const COORD: NodeId = NodeId(0);

#[derive(Error, Debug)]
pub enum DttcError {
    #[error("expected a market instance")]
    WrongKind,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Stage bookkeeping kept by node 0.
struct CoordState {
    n: usize,
    stage: u32,
    assigned_nodes: BTreeSet<NodeId>,
    reports: BTreeMap<NodeId, NodeId>,
    expected_participants: usize,
    ready: bool,
    cycles: Vec<Vec<NodeId>>,
    cycle_members: BTreeSet<NodeId>,
    removes_this_stage: BTreeSet<NodeId>,
    done_srcs: BTreeSet<NodeId>,
    fired: bool,
}

impl CoordState {
    fn new(n: usize) -> Self {
        Self {
            n,
            stage: 0,
            assigned_nodes: BTreeSet::new(),
            reports: BTreeMap::new(),
            expected_participants: n,
            ready: false,
            cycles: Vec::new(),
            cycle_members: BTreeSet::new(),
            removes_this_stage: BTreeSet::new(),
            done_srcs: BTreeSet::new(),
            fired: false,
        }
    }

    fn begin_stage(&mut self, stage: u32) {
        self.stage = stage;
        self.expected_participants = self.n - self.assigned_nodes.len();
        self.reports.clear();
        self.ready = false;
        self.cycles.clear();
        self.cycle_members.clear();
        self.removes_this_stage.clear();
        self.done_srcs.clear();
        self.fired = false;
    }

    /// Once every participant's successor pointer is in, compute the cycles
    /// of the stage graph; they determine which removals to await.
    fn try_compute(&mut self) {
        if self.ready || self.reports.len() < self.expected_participants {
            return;
        }
        let mut state: BTreeMap<NodeId, u8> = BTreeMap::new();
        for u in self.reports.keys() {
            state.insert(*u, 0);
        }
        for &start in self.reports.keys().collect::<Vec<_>>() {
            if state[&start] != 0 {
                continue;
            }
            let mut path = Vec::new();
            let mut cur = start;
            while state[&cur] == 0 {
                state.insert(cur, 1);
                path.push(cur);
                cur = self.reports[&cur];
            }
            if state[&cur] == 1 {
                let at = path.iter().position(|&x| x == cur).unwrap();
                let cycle: Vec<NodeId> = path[at..].to_vec();
                for &m in &cycle {
                    self.cycle_members.insert(m);
                }
                self.cycles.push(cycle);
            }
            for &x in &path {
                state.insert(x, 2);
            }
        }
        self.ready = true;
    }

    /// True once every cycle member's removal arrived and every cycle
    /// produced a `done`.
    fn barrier_met(&self) -> bool {
        self.ready
            && self
                .cycle_members
                .iter()
                .all(|m| self.removes_this_stage.contains(m))
            && self
                .cycles
                .iter()
                .all(|c| c.iter().any(|m| self.done_srcs.contains(m)))
    }
}

struct AgentNode {
    id: NodeId,
    n: usize,
    seed: u64,
    variant: DetectVariant,
    prefs: Vec<HouseId>,
    endowed: HouseId,
    holder: Vec<Option<NodeId>>,
    removed: Vec<bool>,
    stage: u32,
    core: Option<DetectCore>,
    next: NodeId,
    top_house: HouseId,
    assigned: Option<HouseId>,
    assigned_stage: Option<u32>,
    next_at_assignment: Option<NodeId>,
    traded: bool,
    ok_from: BTreeSet<NodeId>,
    ok_sent: bool,
    done_sent: bool,
    pending_stage: Option<(u64, u32)>,
    stage_entry_rounds: Vec<u64>,
    coord: Option<CoordState>,
}

impl AgentNode {
    fn new(inst: &Instance, id: NodeId, variant: DetectVariant, seed: u64) -> Self {
        let a = AgentId(id.0 as u32);
        let n = inst.n_agents();
        Self {
            id,
            n,
            seed,
            variant,
            prefs: inst.prefs(a).houses().to_vec(),
            endowed: inst.endowed(a).unwrap(),
            holder: vec![None; n],
            removed: vec![false; n],
            stage: 0,
            core: None,
            next: id,
            top_house: HouseId(0),
            assigned: None,
            assigned_stage: None,
            next_at_assignment: None,
            traded: false,
            ok_from: BTreeSet::new(),
            ok_sent: false,
            done_sent: false,
            pending_stage: None,
            stage_entry_rounds: Vec::new(),
            coord: (id == COORD).then(|| CoordState::new(n)),
        }
    }

    fn stage_seed(&self) -> u64 {
        self.seed ^ (self.stage as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }

    fn enter_stage(&mut self, stage: u32, round: u64, out: &mut Outbox) {
        self.stage = stage;
        self.stage_entry_rounds.push(round);
        self.traded = false;
        self.ok_from.clear();
        self.ok_sent = false;
        self.done_sent = false;
        if let Some(c) = self.coord.as_mut() {
            c.begin_stage(stage);
        }
        if self.assigned.is_some() {
            self.core = None;
            return;
        }

        let top = *self
            .prefs
            .iter()
            .find(|h| !self.removed[h.index()])
            .expect("an unassigned agent still holds its own listed house");
        self.top_house = top;
        self.next = self.holder[top.index()].expect("ownership known after bootstrap");
        if self.id == COORD {
            let (id, next) = (self.id, self.next);
            self.coord.as_mut().unwrap().reports.insert(id, next);
        } else {
            out.send(COORD, stage, SUCC_REPORT, &[self.next.0 as u64]);
        }

        let core = DetectCore::new(
            self.id,
            self.n,
            stage,
            round + 1,
            self.next,
            self.variant,
            self.stage_seed(),
        );
        let instant_winner = core.winner;
        self.core = Some(core);
        if instant_winner {
            self.trade(out);
            self.send_done(out);
        }
    }

    fn trade(&mut self, out: &mut Outbox) {
        let top = self.top_house;
        assert!(
            !self.removed[top.index()],
            "traded house was removed by someone else"
        );
        self.assigned = Some(top);
        self.assigned_stage = Some(self.stage);
        self.next_at_assignment = Some(self.next);
        self.traded = true;
        self.removed[top.index()] = true;
        out.broadcast(self.stage, REMOVE, &[top.0 as u64]);
        if let Some(c) = self.coord.as_mut() {
            c.removes_this_stage.insert(self.id);
            c.assigned_nodes.insert(self.id);
        }
    }

    fn send_done(&mut self, out: &mut Outbox) {
        if self.done_sent {
            return;
        }
        self.done_sent = true;
        if self.id == COORD {
            let id = self.id;
            self.coord.as_mut().unwrap().done_srcs.insert(id);
        } else {
            out.send(COORD, self.stage, DONE, &[]);
        }
    }

    fn handle_events(&mut self, events: &[DetectEvent], out: &mut Outbox) {
        for ev in events {
            match ev {
                DetectEvent::Winner => {
                    debug_assert!(self
                        .core
                        .as_ref()
                        .map(|c| c.parents.is_empty())
                        .unwrap_or(false));
                    self.trade(out);
                }
                DetectEvent::Notified => self.trade(out),
                DetectEvent::FinishedNonCycle => self.send_done(out),
            }
        }
    }

    /// Leaf-to-root `ok` flow over the adoption tree: once a traded cycle
    /// node holds an `ok` from each child, it passes `ok` to its parents,
    /// and the root reports `done` for its whole cycle.
    fn convergecast_progress(&mut self, out: &mut Outbox) {
        if !self.traded || self.ok_sent || self.done_sent {
            return;
        }
        let Some(core) = self.core.as_ref() else {
            return;
        };
        if !core.in_cycle {
            return;
        }
        if core.children.iter().all(|c| self.ok_from.contains(c)) {
            if core.winner {
                self.send_done(out);
            } else {
                let (stage, parents) = (self.stage, core.parents.clone());
                for p in parents {
                    out.send(p, stage, OK, &[]);
                }
                self.ok_sent = true;
            }
        }
    }

    fn coordinator_tick(&mut self, round: u64, out: &mut Outbox) {
        let Some(c) = self.coord.as_mut() else {
            return;
        };
        c.try_compute();
        if c.fired || !c.barrier_met() {
            return;
        }
        c.fired = true;
        if c.assigned_nodes.len() < c.n {
            let next_stage = c.stage + 1;
            out.broadcast(next_stage, NEXT_STAGE, &[]);
            self.pending_stage = Some((round + 1, next_stage));
        }
    }
}

impl Node for AgentNode {
    fn on_round(&mut self, round: u64, inbox: &[Envelope], out: &mut Outbox) {
        if round == 0 {
            self.holder[self.endowed.index()] = Some(self.id);
            out.broadcast(0, OWN, &[self.endowed.0 as u64]);
            return;
        }

        // House knowledge first: ownership and removals are monotone facts.
        for env in inbox {
            match env.tag {
                OWN => self.holder[env.word(0) as usize] = Some(env.src),
                SUCC_REPORT => {
                    if let Some(c) = self.coord.as_mut() {
                        c.reports.insert(env.src, NodeId(env.word(0) as usize));
                    }
                }
                REMOVE => {
                    self.removed[env.word(0) as usize] = true;
                    if let Some(c) = self.coord.as_mut() {
                        c.removes_this_stage.insert(env.src);
                        c.assigned_nodes.insert(env.src);
                    }
                }
                _ => {}
            }
        }

        let ns = inbox
            .iter()
            .filter(|e| e.tag == NEXT_STAGE)
            .map(|e| e.stage)
            .max();
        let pending = self
            .pending_stage
            .and_then(|(r, s)| (r == round).then_some(s));

        if round == 1 {
            self.enter_stage(0, round, out);
        } else if let Some(s) = ns.or(pending) {
            // Any remaining messages of the finished stage are dead: their
            // senders transition in this same round.
            debug_assert_eq!(s, self.stage + 1);
            self.pending_stage = None;
            self.enter_stage(s, round, out);
        } else {
            let mut events = Vec::new();
            for env in inbox {
                match env.tag {
                    COIN_Q | COIN_R | COLOR_Q | COLOR_R | EXP_Q | EXP_R | CYCLE => {
                        if env.stage == self.stage {
                            if let Some(core) = self.core.as_mut() {
                                core.on_message(env, out, &mut events);
                            }
                        }
                    }
                    OK => {
                        if env.stage == self.stage {
                            self.ok_from.insert(env.src);
                        }
                    }
                    DONE => {
                        if env.stage == self.stage {
                            if let Some(c) = self.coord.as_mut() {
                                c.done_srcs.insert(env.src);
                            }
                        }
                    }
                    _ => {}
                }
            }
            if let Some(core) = self.core.as_mut() {
                core.on_tick(round, out, &mut events);
            }
            self.handle_events(&events, out);
            self.convergecast_progress(out);
        }

        self.coordinator_tick(round, out);
    }

    fn terminated(&self) -> bool {
        self.assigned.is_some()
    }
}

/// Outcome of a distributed run: the matching, the per-stage traded cycles
/// (canonical order, comparable with the sequential trace), statistics, and
/// the trace digest.
pub struct DttcRun {
    pub matching: Matching,
    pub stages: Vec<StageCycles>,
    pub stats: SimStats,
    pub trace_digest: u64,
    pub trace: Option<Vec<String>>,
}

/// Runs the distributed top trading cycle protocol on a market instance.
pub fn run_distributed_ttc(
    inst: &Instance,
    variant: DetectVariant,
    seed: u64,
    opts: &RunOptions,
) -> Result<DttcRun, DttcError> {
    if inst.kind() != InstanceKind::Market {
        return Err(DttcError::WrongKind);
    }
    let n = inst.n_agents();
    let nodes: Vec<AgentNode> = (0..n)
        .map(|i| AgentNode::new(inst, NodeId(i), variant, seed))
        .collect();
    let cfg = SimConfig {
        round_cap: opts.round_cap.unwrap_or_else(|| default_round_cap(n)),
        record_trace: opts.record_trace,
    };
    let sim = run(&cfg, nodes)?;

    let mut matching = Matching::empty(n);
    let mut n_stages = 0u32;
    for node in &sim.nodes {
        let h = node.assigned.expect("protocol assigns every agent");
        matching
            .assign(AgentId(node.id.0 as u32), h)
            .expect("trades are injective");
        n_stages = n_stages.max(node.assigned_stage.unwrap() + 1);
    }

    let mut stages: Vec<StageCycles> = vec![Vec::new(); n_stages as usize];
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let s = sim.nodes[start].assigned_stage.unwrap() as usize;
        let mut cycle = Vec::new();
        let mut cur = start;
        loop {
            visited[cur] = true;
            cycle.push(AgentId(cur as u32));
            cur = sim.nodes[cur].next_at_assignment.unwrap().0;
            if cur == start {
                break;
            }
        }
        stages[s].push(cycle);
    }
    for stage in &mut stages {
        stage.sort_by_key(|c| c[0]);
    }

    let mut stats = sim.stats;
    for (s, cycles) in stages.iter().enumerate() {
        let entry = stats.stage_mut(s as u32);
        entry.cycles_found = cycles.len();
        entry.cycle_lengths = cycles.iter().map(|c| c.len()).collect();
    }

    Ok(DttcRun {
        matching,
        stages,
        stats,
        trace_digest: sim.trace_digest,
        trace: sim.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate_instance;
    use crate::io::parse_instance;
    use crate::solve::solve_core_ttc;

    const EXAMPLE_MARKET: &str = "\
market 3
agent 0 prefs 1 2 0
agent 1 prefs 0 2 1
agent 2 prefs 0 1 2
endow 0 0
endow 1 1
endow 2 2
";

    #[test]
    fn example_market_both_variants() {
        let inst = parse_instance(EXAMPLE_MARKET).unwrap();
        let expected = solve_core_ttc(&inst).unwrap();
        for variant in [DetectVariant::LasVegas, DetectVariant::Deterministic] {
            let run = run_distributed_ttc(&inst, variant, 7, &RunOptions::default()).unwrap();
            assert_eq!(run.matching, expected.matching, "{variant:?}");
            assert_eq!(run.stages, expected.stages, "{variant:?}");
            assert!(run.stats.consistent());
        }
    }

    #[test]
    fn identity_market_takes_one_stage() {
        let text = "\
market 2
agent 0 prefs 0
agent 1 prefs 1
endow 0 0
endow 1 1
";
        let inst = parse_instance(text).unwrap();
        let run =
            run_distributed_ttc(&inst, DetectVariant::LasVegas, 1, &RunOptions::default()).unwrap();
        assert_eq!(run.stages.len(), 1);
        assert_eq!(run.stages[0].len(), 2, "two self-loops");
        for a in inst.agents() {
            assert_eq!(run.matching.house_of(a), inst.endowed(a));
        }
    }

    #[test]
    fn mutual_swap_terminates_without_extra_stage() {
        let text = "\
market 2
agent 0 prefs 1 0
agent 1 prefs 0 1
endow 0 0
endow 1 1
";
        let inst = parse_instance(text).unwrap();
        let run = run_distributed_ttc(&inst, DetectVariant::Deterministic, 0, &RunOptions::default())
            .unwrap();
        assert_eq!(run.stages.len(), 1);
        assert_eq!(run.matching.house_of(AgentId(0)), Some(HouseId(1)));
        assert_eq!(run.matching.house_of(AgentId(1)), Some(HouseId(0)));
    }

    #[test]
    fn matches_sequential_ttc_on_random_markets() {
        for seed in 0..30u64 {
            let n = 2 + (seed as usize % 15);
            let inst = generate_instance(InstanceKind::Market, n, n, n, seed).unwrap();
            let expected = solve_core_ttc(&inst).unwrap();
            for variant in [DetectVariant::LasVegas, DetectVariant::Deterministic] {
                let run =
                    run_distributed_ttc(&inst, variant, seed ^ 0xD77C, &RunOptions::default())
                        .unwrap();
                assert_eq!(run.matching, expected.matching, "seed {seed} {variant:?}");
                assert_eq!(run.stages, expected.stages, "seed {seed} {variant:?}");
                assert!(run.stages.len() <= n);
            }
        }
    }

    #[test]
    fn single_agent_market() {
        let inst = parse_instance("market 1\nagent 0 prefs 0\nendow 0 0\n").unwrap();
        let run =
            run_distributed_ttc(&inst, DetectVariant::LasVegas, 3, &RunOptions::default()).unwrap();
        assert_eq!(run.matching.house_of(AgentId(0)), Some(HouseId(0)));
        assert_eq!(run.stats.messages, 0, "a lone node talks to nobody");
    }

    #[test]
    fn stats_stage_totals_are_consistent() {
        let inst = generate_instance(InstanceKind::Market, 12, 12, 12, 9).unwrap();
        let run =
            run_distributed_ttc(&inst, DetectVariant::LasVegas, 11, &RunOptions::default()).unwrap();
        assert!(run.stats.consistent());
        assert_eq!(run.stages.len(), run.stats.per_stage.len());
    }
}
