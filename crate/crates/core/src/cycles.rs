//! Finding all vertex-disjoint cycles of a functional graph with
//! message-passing protocols on the synchronous simulator.
//!
//! Both protocols shrink each cycle to a single survivor: per iteration some
//! active nodes deactivate (coin flips in the Las Vegas variant, color
//! comparison after an iterated color reduction in the deterministic one),
//! and the remaining active nodes re-point their successor past the
//! deactivated nodes, adopting them as children. The survivor discovers
//! `succ == self`, becomes the unique fixpoint of its cycle, and floods a
//! cycle notification down its adoption tree, which spans exactly the
//! cycle's nodes. Remote state is read with a query/reply pull costing two
//! rounds; nodes keep answering queries after terminating. An exploring node
//! that reaches a terminated (finished) node learns it is not on a cycle and
//! finishes itself, which resolves the non-cycle regions.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::sim::{
    default_round_cap, node_rng, run, Envelope, Node, NodeId, Outbox, SimConfig, SimError,
    SimStats, Tag,
};

/// A directed graph with out-degree exactly one per node.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FunctionalGraph {
    succ: Vec<NodeId>,
}

impl FunctionalGraph {
    pub fn new(succ: Vec<NodeId>) -> Self {
        let n = succ.len();
        assert!(succ.iter().all(|s| s.0 < n), "successor out of range");
        Self { succ }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn succ(&self, u: NodeId) -> NodeId {
        self.succ[u.0]
    }

    pub fn successors(&self) -> &[NodeId] {
        &self.succ
    }
}

/// Exact cycle membership: every component contributes one cycle. Cycles are
/// listed in successor order starting from their smallest node, sorted by
/// that node.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CyclePartition {
    pub in_cycle: Vec<bool>,
    pub cycles: Vec<Vec<NodeId>>,
}

/// Sequential oracle: walk successor pointers with visit marking.
pub fn oracle_cycles(g: &FunctionalGraph) -> CyclePartition {
    const UNSEEN: u8 = 0;
    const ON_PATH: u8 = 1;
    const DONE: u8 = 2;
    let n = g.len();
    let mut state = vec![UNSEEN; n];
    let mut in_cycle = vec![false; n];

    for start in 0..n {
        if state[start] != UNSEEN {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == UNSEEN {
            state[cur] = ON_PATH;
            path.push(cur);
            cur = g.succ(NodeId(cur)).0;
        }
        if state[cur] == ON_PATH {
            let at = path.iter().position(|&x| x == cur).unwrap();
            for &x in &path[at..] {
                in_cycle[x] = true;
            }
        }
        for &x in &path {
            state[x] = DONE;
        }
    }

    CyclePartition {
        cycles: partition_cycles(g, &in_cycle),
        in_cycle,
    }
}

/// Groups cycle nodes into their cycles by walking original successors.
fn partition_cycles(g: &FunctionalGraph, in_cycle: &[bool]) -> Vec<Vec<NodeId>> {
    let mut visited = vec![false; g.len()];
    let mut cycles = Vec::new();
    for u in 0..g.len() {
        if !in_cycle[u] || visited[u] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = u;
        loop {
            visited[cur] = true;
            cycle.push(NodeId(cur));
            cur = g.succ(NodeId(cur)).0;
            if cur == u {
                break;
            }
        }
        cycles.push(cycle);
    }
    cycles
}

pub(crate) const COIN_Q: Tag = Tag(10);
pub(crate) const COIN_R: Tag = Tag(11);
pub(crate) const COLOR_Q: Tag = Tag(12);
pub(crate) const COLOR_R: Tag = Tag(13);
pub(crate) const EXP_Q: Tag = Tag(14);
pub(crate) const EXP_R: Tag = Tag(15);
pub(crate) const CYCLE: Tag = Tag(16);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DetectVariant {
    LasVegas,
    Deterministic,
}

/// Why a node left the active set.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DeactKind {
    /// Flipped heads while the successor flipped tails.
    Coin,
    /// Carried a smaller color than the successor.
    Color,
    /// Reached a finished node while exploring: certainly not on a cycle.
    ReachedFinished,
}

/// Per-iteration snapshot for the safety and coloring invariants. A record
/// exists iff the node was active when the iteration began.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IterRecord {
    pub iter: u64,
    pub succ_at_start: NodeId,
    /// Color after the full reduction, when the deterministic variant
    /// completed it this iteration.
    pub color_after_reduction: Option<u64>,
    pub deactivated: Option<DeactKind>,
}

/// State transitions the embedding protocol may need to react to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum DetectEvent {
    /// This node is its cycle's succ-fixpoint; notification has been sent.
    Winner,
    /// This node received the cycle notification.
    Notified,
    /// This node established it is not on a cycle.
    FinishedNonCycle,
}

/// Number of color-reduction steps that bring colors from `[0, n)` down to
/// `{0..5}`: one step maps colors below `m` to colors below
/// `2 * bitlen(m - 1)`, and 6 is the fixpoint.
pub(crate) fn reduction_steps(n: usize) -> u32 {
    let mut m = n.max(2) as u64;
    let mut t = 0;
    while m > 6 {
        m = 2 * (64 - (m - 1).leading_zeros()) as u64;
        t += 1;
    }
    t
}

fn reduce_color(c: u64, partner: u64) -> u64 {
    debug_assert_ne!(c, partner);
    let k = (c ^ partner).trailing_zeros() as u64;
    2 * k + ((c >> k) & 1)
}

enum VariantState {
    LasVegas {
        rng: ChaCha8Rng,
        coin: bool,
    },
    Deterministic {
        color: u64,
        step: u32,
        succ_inactive: bool,
    },
}

/// The per-node cycle-detection state machine, driven by global round
/// numbers relative to a common start round. Embeddable: the distributed
/// top-trading-cycle protocol runs one instance per stage.
pub(crate) struct DetectCore {
    pub id: NodeId,
    pub stage: u32,
    start: u64,
    t_steps: u32,
    state: VariantState,
    pub active: bool,
    pub finished: bool,
    pub in_cycle: bool,
    pub winner: bool,
    pub succ: NodeId,
    pub children: Vec<NodeId>,
    pub parents: Vec<NodeId>,
    exploring: bool,
    pending_coin: Option<[u64; 3]>,
    pending_color: Option<[u64; 3]>,
    pending_exp: Option<[u64; 3]>,
    pub iter_log: Vec<IterRecord>,
}

impl DetectCore {
    /// `start` is the first round at which this core may act; all peers of
    /// the same stage must share it. A self-loop is an instant winner.
    pub fn new(
        id: NodeId,
        n: usize,
        stage: u32,
        start: u64,
        succ0: NodeId,
        variant: DetectVariant,
        seed: u64,
    ) -> Self {
        let state = match variant {
            DetectVariant::LasVegas => VariantState::LasVegas {
                rng: node_rng(seed, id),
                coin: false,
            },
            DetectVariant::Deterministic => VariantState::Deterministic {
                color: id.0 as u64,
                step: 0,
                succ_inactive: false,
            },
        };
        let mut core = Self {
            id,
            stage,
            start,
            t_steps: reduction_steps(n),
            state,
            active: true,
            finished: false,
            in_cycle: false,
            winner: false,
            succ: succ0,
            children: Vec::new(),
            parents: Vec::new(),
            exploring: false,
            pending_coin: None,
            pending_color: None,
            pending_exp: None,
            iter_log: Vec::new(),
        };
        if succ0 == id {
            core.become_winner();
        }
        core
    }

    fn period(&self) -> u64 {
        match self.state {
            VariantState::LasVegas { .. } => 4,
            VariantState::Deterministic { .. } => 2 * self.t_steps as u64 + 12,
        }
    }

    fn become_winner(&mut self) {
        self.active = false;
        self.finished = true;
        self.in_cycle = true;
        self.winner = true;
    }

    fn mark_deactivated(&mut self, kind: DeactKind) {
        if let Some(rec) = self.iter_log.last_mut() {
            rec.deactivated = Some(kind);
        }
    }

    fn finish_non_cycle(&mut self, events: &mut Vec<DetectEvent>) {
        debug_assert!(!self.in_cycle);
        self.active = false;
        self.finished = true;
        self.mark_deactivated(DeactKind::ReachedFinished);
        events.push(DetectEvent::FinishedNonCycle);
    }

    fn on_cycle_notification(&mut self, out: &mut Outbox, events: &mut Vec<DetectEvent>) {
        if self.in_cycle {
            return;
        }
        debug_assert!(!self.active, "only settled nodes get notified");
        self.in_cycle = true;
        self.finished = true;
        for &c in &self.children {
            out.send(c, self.stage, CYCLE, &[]);
        }
        events.push(DetectEvent::Notified);
    }

    /// Handles one delivered message of this core's stage.
    pub fn on_message(&mut self, env: &Envelope, out: &mut Outbox, events: &mut Vec<DetectEvent>) {
        debug_assert_eq!(env.stage, self.stage);
        match env.tag {
            COIN_Q => {
                let (flipped, coin) = match &self.state {
                    VariantState::LasVegas { coin, .. } => (self.active, *coin),
                    VariantState::Deterministic { .. } => (false, false),
                };
                out.send(
                    env.src,
                    self.stage,
                    COIN_R,
                    &[flipped as u64, coin as u64, self.finished as u64],
                );
            }
            COLOR_Q => {
                let color = match &self.state {
                    VariantState::Deterministic { color, .. } => *color,
                    VariantState::LasVegas { .. } => 0,
                };
                out.send(
                    env.src,
                    self.stage,
                    COLOR_R,
                    &[self.active as u64, self.finished as u64, color],
                );
            }
            EXP_Q => {
                if !self.active && !self.finished && !self.parents.contains(&env.src) {
                    // The querier adopts this node on seeing the reply.
                    self.parents.push(env.src);
                }
                out.send(
                    env.src,
                    self.stage,
                    EXP_R,
                    &[self.active as u64, self.finished as u64, self.succ.0 as u64],
                );
            }
            CYCLE => self.on_cycle_notification(out, events),
            COIN_R => self.pending_coin = Some(reply_words(env)),
            COLOR_R => self.pending_color = Some(reply_words(env)),
            EXP_R => self.pending_exp = Some(reply_words(env)),
            other => panic!("unexpected tag {} in cycle detection", other.0),
        }
    }

    /// Advances the lockstep schedule; call once per round after messages.
    pub fn on_tick(&mut self, round: u64, out: &mut Outbox, events: &mut Vec<DetectEvent>) {
        if !self.active || round < self.start {
            return;
        }
        let local = round - self.start;
        let offset = local % self.period();
        let iter = local / self.period();
        if matches!(self.state, VariantState::LasVegas { .. }) {
            match offset {
                0 => {
                    self.process_exp_reply(out, events);
                    if self.active {
                        self.begin_iteration(iter);
                        if let VariantState::LasVegas { rng, coin } = &mut self.state {
                            *coin = (rng.next_u32() & 1) == 1;
                        }
                        out.send(self.succ, self.stage, COIN_Q, &[]);
                    }
                }
                2 => {
                    self.process_coin_reply(events);
                    if self.active {
                        out.send(self.succ, self.stage, EXP_Q, &[]);
                    }
                }
                _ => {}
            }
            return;
        }
        if offset % 2 == 1 {
            return;
        }
        let explore_at = 2 * self.t_steps as u64 + 2;
        if offset == 0 {
            self.process_exp_reply(out, events);
            if self.active {
                self.begin_iteration(iter);
                let id_color = self.id.0 as u64;
                if let VariantState::Deterministic {
                    color,
                    step,
                    succ_inactive,
                } = &mut self.state
                {
                    *color = id_color;
                    *step = 0;
                    *succ_inactive = false;
                }
                out.send(self.succ, self.stage, COLOR_Q, &[]);
            }
        } else if offset < explore_at {
            self.process_color_step(events);
            if self.active {
                let send = match &self.state {
                    VariantState::Deterministic { succ_inactive, .. } => !succ_inactive,
                    _ => unreachable!(),
                };
                if send {
                    out.send(self.succ, self.stage, COLOR_Q, &[]);
                }
            }
        } else if offset == explore_at {
            self.process_compare(events);
            if self.active {
                self.exploring = true;
                out.send(self.succ, self.stage, EXP_Q, &[]);
            }
        } else {
            self.process_exp_reply(out, events);
            if self.active && self.exploring {
                out.send(self.succ, self.stage, EXP_Q, &[]);
            }
        }
    }

    fn begin_iteration(&mut self, iter: u64) {
        self.exploring = false;
        self.iter_log.push(IterRecord {
            iter,
            succ_at_start: self.succ,
            color_after_reduction: None,
            deactivated: None,
        });
    }

    fn process_coin_reply(&mut self, events: &mut Vec<DetectEvent>) {
        let Some([flipped, succ_coin, succ_finished]) = self.pending_coin.take() else {
            return;
        };
        if succ_finished != 0 {
            self.finish_non_cycle(events);
            return;
        }
        let my_coin = match &self.state {
            VariantState::LasVegas { coin, .. } => *coin,
            _ => unreachable!(),
        };
        // Heads here, tails there: drop out of the active set.
        if flipped != 0 && my_coin && succ_coin == 0 {
            self.active = false;
            self.mark_deactivated(DeactKind::Coin);
        }
    }

    /// One color-reduction step: against the successor's reported color when
    /// it is active, against the bitwise complement of the own color when the
    /// successor is settled (keeps every step well-defined and the step count
    /// aligned across neighbors).
    fn process_color_step(&mut self, events: &mut Vec<DetectEvent>) {
        let reply = self.pending_color.take();
        if let Some([_, succ_finished, _]) = reply {
            if succ_finished != 0 {
                self.finish_non_cycle(events);
                return;
            }
        }
        let t_steps = self.t_steps;
        let mut finished_reduction = None;
        {
            let VariantState::Deterministic {
                color,
                step,
                succ_inactive,
            } = &mut self.state
            else {
                unreachable!()
            };
            let partner = match reply {
                Some([active, _, succ_color]) if active != 0 => succ_color,
                Some(_) => {
                    *succ_inactive = true;
                    !*color
                }
                None => {
                    debug_assert!(*succ_inactive);
                    !*color
                }
            };
            *color = reduce_color(*color, partner);
            *step += 1;
            if *step == t_steps {
                finished_reduction = Some(*color);
            }
        }
        if let Some(c) = finished_reduction {
            if let Some(rec) = self.iter_log.last_mut() {
                rec.color_after_reduction = Some(c);
            }
        }
    }

    fn process_compare(&mut self, events: &mut Vec<DetectEvent>) {
        let reply = self.pending_color.take();
        if let Some([_, succ_finished, _]) = reply {
            if succ_finished != 0 {
                self.finish_non_cycle(events);
                return;
            }
        }
        let (my_color, succ_inactive) = match &self.state {
            VariantState::Deterministic {
                color,
                step,
                succ_inactive,
            } => {
                debug_assert_eq!(*step, self.t_steps);
                (*color, *succ_inactive)
            }
            _ => unreachable!(),
        };
        if self.t_steps == 0 {
            // No reduction ran; the initial id-colors are already below 6.
            if let Some(rec) = self.iter_log.last_mut() {
                rec.color_after_reduction = Some(my_color);
            }
        }
        if let Some([active, _, succ_color]) = reply {
            if active != 0 && !succ_inactive {
                assert_ne!(my_color, succ_color, "coloring left equal adjacent colors");
                if my_color < succ_color {
                    self.active = false;
                    self.mark_deactivated(DeactKind::Color);
                }
            }
        }
        // A settled successor means no comparison: stay active and explore.
    }

    fn process_exp_reply(&mut self, out: &mut Outbox, events: &mut Vec<DetectEvent>) {
        let Some([succ_active, succ_finished, succ_succ]) = self.pending_exp.take() else {
            return;
        };
        if succ_finished != 0 {
            self.finish_non_cycle(events);
            return;
        }
        if succ_active != 0 {
            // Successor verified active; nothing to compress this iteration.
            self.exploring = false;
            return;
        }
        // Adopt the settled successor and point past it.
        let adopted = self.succ;
        if !self.children.contains(&adopted) {
            self.children.push(adopted);
        }
        self.succ = NodeId(succ_succ as usize);
        if self.succ == self.id {
            self.become_winner();
            for &c in &self.children {
                out.send(c, self.stage, CYCLE, &[]);
            }
            events.push(DetectEvent::Winner);
        }
    }
}

fn reply_words(env: &Envelope) -> [u64; 3] {
    let w = env.words.as_slice();
    [w[0], w[1], w[2]]
}

/// Final per-node outcome of a detection run.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CycleReport {
    pub in_cycle: Vec<bool>,
    /// Partition of the cycle nodes into their cycles (successor order,
    /// smallest node first, sorted by smallest node).
    pub cycles: Vec<Vec<NodeId>>,
    /// Every adoption as a (parent, child) edge.
    pub tree_edges: Vec<(NodeId, NodeId)>,
    /// The succ-fixpoint node of each cycle.
    pub winners: Vec<NodeId>,
    pub final_succ: Vec<NodeId>,
    pub iter_logs: Vec<Vec<IterRecord>>,
}

pub struct CycleRun {
    pub report: CycleReport,
    pub stats: SimStats,
    pub trace_digest: u64,
    pub trace: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Overrides the default round cap.
    pub round_cap: Option<u64>,
    pub record_trace: bool,
}

struct DetectNode {
    core: DetectCore,
}

impl Node for DetectNode {
    fn on_round(&mut self, round: u64, inbox: &[Envelope], out: &mut Outbox) {
        let mut events = Vec::new();
        for env in inbox {
            self.core.on_message(env, out, &mut events);
        }
        self.core.on_tick(round, out, &mut events);
    }

    fn terminated(&self) -> bool {
        !self.core.active
    }
}

fn run_detection(
    g: &FunctionalGraph,
    variant: DetectVariant,
    seed: u64,
    opts: &RunOptions,
) -> Result<CycleRun, SimError> {
    let n = g.len();
    let nodes: Vec<DetectNode> = (0..n)
        .map(|i| DetectNode {
            core: DetectCore::new(NodeId(i), n, 0, 0, g.succ(NodeId(i)), variant, seed),
        })
        .collect();
    let cfg = SimConfig {
        round_cap: opts.round_cap.unwrap_or_else(|| default_round_cap(n)),
        record_trace: opts.record_trace,
    };
    let sim = run(&cfg, nodes)?;

    let cores: Vec<&DetectCore> = sim.nodes.iter().map(|nd| &nd.core).collect();
    let in_cycle: Vec<bool> = cores.iter().map(|c| c.in_cycle).collect();
    let cycles = partition_cycles(g, &in_cycle);
    let mut tree_edges = Vec::new();
    for c in &cores {
        for &child in &c.children {
            tree_edges.push((c.id, child));
        }
    }
    let report = CycleReport {
        winners: cores.iter().filter(|c| c.winner).map(|c| c.id).collect(),
        final_succ: cores.iter().map(|c| c.succ).collect(),
        iter_logs: sim.nodes.iter().map(|nd| nd.core.iter_log.clone()).collect(),
        cycles,
        in_cycle,
        tree_edges,
    };

    let mut stats = sim.stats;
    let entry = stats.stage_mut(0);
    entry.cycles_found = report.cycles.len();
    entry.cycle_lengths = report.cycles.iter().map(|c| c.len()).collect();

    Ok(CycleRun {
        report,
        stats,
        trace_digest: sim.trace_digest,
        trace: sim.trace,
    })
}

/// Las Vegas cycle finding: always correct, round count random in the seed.
pub fn run_las_vegas_cycles(
    g: &FunctionalGraph,
    seed: u64,
    opts: &RunOptions,
) -> Result<CycleRun, SimError> {
    run_detection(g, DetectVariant::LasVegas, seed, opts)
}

/// Deterministic cycle finding via iterated 6-coloring; no randomness.
pub fn run_deterministic_cycles(
    g: &FunctionalGraph,
    opts: &RunOptions,
) -> Result<CycleRun, SimError> {
    run_detection(g, DetectVariant::Deterministic, 0, opts)
}
