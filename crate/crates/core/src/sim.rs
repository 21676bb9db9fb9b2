//! Deterministic synchronous message-passing simulator for a fully connected
//! n-node network. Nodes run in lockstep: everything sent at round r is
//! delivered at round r + 1, messages are capped at a few machine words
//! (congest-style accounting, broadcast = n - 1 unit messages), and a fixed
//! seed reproduces the execution bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense 0-based node identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub usize);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Message type discriminator carried by every envelope.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Tag(pub u16);

/// Maximum payload words per message; enough for a handful of ids and flags,
/// matching the O(log n)-bit congest budget.
pub const MAX_WORDS: usize = 4;

/// A fixed-capacity payload of at most [`MAX_WORDS`] words.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Words {
    buf: [u64; MAX_WORDS],
    len: u8,
}

impl Words {
    pub fn new(words: &[u64]) -> Result<Self, SimError> {
        if words.len() > MAX_WORDS {
            return Err(SimError::PayloadTooLarge {
                words: words.len(),
                max: MAX_WORDS,
            });
        }
        let mut buf = [0u64; MAX_WORDS];
        buf[..words.len()].copy_from_slice(words);
        Ok(Self {
            buf,
            len: words.len() as u8,
        })
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.buf[..self.len as usize]
    }
}

/// One unit message in flight.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Envelope {
    pub src: NodeId,
    pub dst: NodeId,
    /// Protocol stage the message belongs to.
    pub stage: u32,
    pub tag: Tag,
    pub words: Words,
}

impl Envelope {
    pub fn word(&self, i: usize) -> u64 {
        self.words.as_slice()[i]
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("payload of {words} words exceeds the {max}-word budget")]
    PayloadTooLarge { words: usize, max: usize },
    #[error("message to {dst} out of range (n = {n})")]
    DstOutOfRange { dst: usize, n: usize },
    #[error("self-send from node {0}; local state needs no message")]
    SelfSend(usize),
    #[error("round cap {cap} exceeded; the protocol did not quiesce")]
    RoundCapExceeded { cap: u64 },
}

/// Collects a node's outgoing messages for the current round.
pub struct Outbox<'a> {
    src: NodeId,
    n: usize,
    sends: &'a mut Vec<Envelope>,
    error: &'a mut Option<SimError>,
}

impl Outbox<'_> {
    /// Sends one unit message, delivered next round.
    pub fn send(&mut self, dst: NodeId, stage: u32, tag: Tag, words: &[u64]) {
        if self.error.is_some() {
            return;
        }
        if dst.0 >= self.n {
            *self.error = Some(SimError::DstOutOfRange { dst: dst.0, n: self.n });
            return;
        }
        if dst == self.src {
            *self.error = Some(SimError::SelfSend(dst.0));
            return;
        }
        match Words::new(words) {
            Ok(words) => self.sends.push(Envelope {
                src: self.src,
                dst,
                stage,
                tag,
                words,
            }),
            Err(e) => *self.error = Some(e),
        }
    }

    /// Sends the same payload to every other node: n - 1 unit messages.
    pub fn broadcast(&mut self, stage: u32, tag: Tag, words: &[u64]) {
        for dst in 0..self.n {
            if dst != self.src.0 {
                self.send(NodeId(dst), stage, tag, words);
            }
        }
    }
}

/// Per-node protocol logic driven by the simulator.
pub trait Node {
    /// Called once per round with every message delivered this round (all
    /// sends from the previous round addressed to this node, in global send
    /// order). Outgoing messages go into `out`.
    fn on_round(&mut self, round: u64, inbox: &[Envelope], out: &mut Outbox);

    /// Local termination predicate: a terminated node initiates nothing on
    /// its own but keeps receiving (and may reply). The run halts when every
    /// node is terminated and nothing is in flight.
    fn terminated(&self) -> bool;
}

impl<T: Node + ?Sized> Node for Box<T> {
    fn on_round(&mut self, round: u64, inbox: &[Envelope], out: &mut Outbox) {
        (**self).on_round(round, inbox, out)
    }
    fn terminated(&self) -> bool {
        (**self).terminated()
    }
}

/// Default guard against non-terminating protocols:
/// `64 * (log2(n) + 1) * (n + 1)`.
pub fn default_round_cap(n: usize) -> u64 {
    let log = if n <= 1 { 0 } else { usize::BITS - 1 - n.leading_zeros() } as u64;
    64 * (log + 1) * (n as u64 + 1)
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub round_cap: u64,
    pub record_trace: bool,
}

impl SimConfig {
    pub fn for_n(n: usize) -> Self {
        Self {
            round_cap: default_round_cap(n),
            record_trace: false,
        }
    }
}

/// Counters for one protocol stage.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct StageStats {
    pub stage: u32,
    pub rounds: u64,
    pub messages: u64,
    /// Filled in by protocol drivers; the simulator leaves these empty.
    pub cycles_found: usize,
    pub cycle_lengths: Vec<usize>,
}

/// Execution statistics. Totals always equal the per-stage sums.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SimStats {
    pub rounds: u64,
    pub messages: u64,
    pub per_stage: Vec<StageStats>,
}

impl SimStats {
    pub fn stage_mut(&mut self, stage: u32) -> &mut StageStats {
        let at = self.per_stage.iter().position(|s| s.stage == stage);
        match at {
            Some(i) => &mut self.per_stage[i],
            None => {
                self.per_stage.push(StageStats {
                    stage,
                    ..StageStats::default()
                });
                self.per_stage.sort_by_key(|s| s.stage);
                self.stage_mut(stage)
            }
        }
    }

    /// Checks the totals-equal-sums invariant.
    pub fn consistent(&self) -> bool {
        self.rounds == self.per_stage.iter().map(|s| s.rounds).sum::<u64>()
            && self.messages == self.per_stage.iter().map(|s| s.messages).sum::<u64>()
    }
}

/// A finished simulation: final node states, statistics, and the delivery
/// trace digest (lines kept only when requested).
pub struct SimRun<N> {
    pub nodes: Vec<N>,
    pub stats: SimStats,
    pub trace_digest: u64,
    pub trace: Option<Vec<String>>,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    let mut h = hash;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn trace_line(round: u64, env: &Envelope) -> String {
    let words = env
        .words
        .as_slice()
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "round={} src={} dst={} tag={} words={}",
        round, env.src, env.dst, env.tag.0, words
    )
}

/// Runs the protocol to quiescence: lockstep rounds, exactly-once delivery
/// one round later, halting when all nodes are terminated and nothing is in
/// flight.
pub fn run<N: Node>(cfg: &SimConfig, mut nodes: Vec<N>) -> Result<SimRun<N>, SimError> {
    let n = nodes.len();
    let mut stats = SimStats::default();
    let mut inflight: Vec<Envelope> = Vec::new();
    let mut digest = FNV_OFFSET;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut current_stage = 0u32;

    loop {
        if inflight.is_empty() && nodes.iter().all(|nd| nd.terminated()) {
            break;
        }
        if stats.rounds >= cfg.round_cap {
            return Err(SimError::RoundCapExceeded { cap: cfg.round_cap });
        }
        let round = stats.rounds;
        stats.stage_mut(current_stage).rounds += 1;

        let mut inboxes: Vec<Vec<Envelope>> = vec![Vec::new(); n];
        for env in inflight.drain(..) {
            let line = trace_line(round, &env);
            digest = fnv1a(digest, line.as_bytes());
            digest = fnv1a(digest, b"\n");
            if let Some(t) = trace.as_mut() {
                t.push(line);
            }
            inboxes[env.dst.0].push(env);
        }

        let mut sends: Vec<Envelope> = Vec::new();
        let mut error = None;
        for id in 0..n {
            let mut out = Outbox {
                src: NodeId(id),
                n,
                sends: &mut sends,
                error: &mut error,
            };
            nodes[id].on_round(round, &inboxes[id], &mut out);
            if let Some(e) = error.take() {
                return Err(e);
            }
        }

        for env in &sends {
            stats.messages += 1;
            stats.stage_mut(env.stage).messages += 1;
            current_stage = current_stage.max(env.stage);
        }
        inflight = sends;
        stats.rounds += 1;
    }

    debug_assert!(stats.consistent());
    Ok(SimRun {
        nodes,
        stats,
        trace_digest: digest,
        trace,
    })
}

/// Independent per-node randomness derived from a run seed: one ChaCha
/// stream per (seed, node) pair, so replays are exact and node streams never
/// interleave.
pub fn node_rng(seed: u64, node: NodeId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node.0 as u64 + 1);
    rng
}
