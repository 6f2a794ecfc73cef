//! Deterministic discrete-event network simulator.
//!
//! One [`Sim`] owns a set of protocol [`Node`]s, a seeded RNG, and a
//! min-heap of timestamped events (timer expirations and message
//! deliveries). Messages spread epidemically: each first-sight recipient
//! re-gossips to `fanout` random peers with independently sampled latencies,
//! and duplicate or outdated traffic is not re-forwarded. Adversary
//! behaviors are injected here, at the network boundary, so the protocol
//! state machine itself stays honest and the same `Node` code runs for
//! everyone.
//!
//! Determinism: events execute in `(timestamp, sequence)` order, all
//! randomness flows from one seeded ChaCha stream consumed in that order,
//! and node state uses ordered containers — identical `(config, seed)`
//! pairs reproduce byte-identical event logs.

pub mod log;

pub use log::{EventKind, EventLog, LogLevel, LogRecord};

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::hash::splitmix64;
use crate::ledger::KeyDirectory;
use crate::protocol::{
    Action, Message, MessageKind, Node, ProtocolParams, TimerKind, VerifyCache,
};
use crate::reputation::ReputationTable;
use crate::vrf::{keygen, KeyPair, NodeId};

/// Gossip overlay parameters.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Topology {
    /// Peers each gossip emission reaches.
    pub fanout: usize,
    /// Peers a sync request is sent to (directed, never re-forwarded).
    pub sync_fanout: usize,
    pub latency_min_ms: u64,
    pub latency_max_ms: u64,
    /// When set, neighbors are fixed at setup instead of re-sampled per
    /// message.
    pub static_overlay: bool,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            fanout: 5,
            sync_fanout: 2,
            latency_min_ms: 50,
            latency_max_ms: 500,
            static_overlay: false,
        }
    }
}

/// Which attacks the malicious set carries out.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BehaviorSet {
    /// Announce a winning lot but never release the block body.
    pub withhold_body: bool,
    /// Drop re-forwards of other nodes' gossip with this probability.
    pub selective_forward: Option<f64>,
    /// Freeload the sync protocol: answer no one's sync request, so a
    /// malicious node never helps a straggler recover. (It still requests —
    /// an adversary that let itself fall permanently behind would forfeit
    /// its proposal seats and neuter its own withholding.)
    pub stale_voting: bool,
}

impl BehaviorSet {
    pub fn all() -> Self {
        BehaviorSet {
            withhold_body: true,
            selective_forward: Some(1.0),
            stale_voting: true,
        }
    }

    pub fn none() -> Self {
        BehaviorSet {
            withhold_body: false,
            selective_forward: None,
            stale_voting: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversarySpec {
    /// Node indices under adversary control.
    pub malicious: BTreeSet<usize>,
    pub behaviors: BehaviorSet,
}

impl AdversarySpec {
    pub fn none() -> Self {
        AdversarySpec {
            malicious: BTreeSet::new(),
            behaviors: BehaviorSet::none(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub node_count: usize,
    pub topology: Topology,
    pub protocol: ProtocolParams,
    /// Reputation score per node index; length must equal `node_count`.
    pub reputations: Vec<f64>,
    pub adversary: AdversarySpec,
    pub rng_seed: u64,
    pub horizon_ms: u64,
    pub log_level: LogLevel,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("node count must be positive")]
    NoNodes,
    #[error("fanout {fanout} must be below node count {nodes}")]
    FanoutTooLarge { fanout: usize, nodes: usize },
    #[error("latency range [{min}, {max}] ms is invalid")]
    BadLatency { min: u64, max: u64 },
    #[error("reputations length {got} does not match node count {want}")]
    ReputationLength { got: usize, want: usize },
    #[error("malicious index {0} out of range")]
    MaliciousOutOfRange(usize),
    #[error("malicious node {index} has reputation {rep} >= committee threshold {threshold}")]
    MaliciousHighReputation {
        index: usize,
        rep: f64,
        threshold: f64,
    },
    #[error("selective forward probability {0} outside [0, 1]")]
    BadDropProbability(f64),
    #[error("invalid protocol parameters: {0}")]
    BadProtocolParams(String),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.node_count == 0 {
            return Err(SimError::NoNodes);
        }
        if self.node_count > 1 && self.topology.fanout >= self.node_count {
            return Err(SimError::FanoutTooLarge {
                fanout: self.topology.fanout,
                nodes: self.node_count,
            });
        }
        if self.topology.latency_min_ms > self.topology.latency_max_ms
            || self.topology.latency_max_ms == 0
        {
            return Err(SimError::BadLatency {
                min: self.topology.latency_min_ms,
                max: self.topology.latency_max_ms,
            });
        }
        if self.reputations.len() != self.node_count {
            return Err(SimError::ReputationLength {
                got: self.reputations.len(),
                want: self.node_count,
            });
        }
        self.protocol
            .validate()
            .map_err(|e| SimError::BadProtocolParams(e.to_string()))?;
        for &i in &self.adversary.malicious {
            if i >= self.node_count {
                return Err(SimError::MaliciousOutOfRange(i));
            }
            let threshold = self.protocol.sortition.threshold_reputation;
            if self.reputations[i] >= threshold {
                return Err(SimError::MaliciousHighReputation {
                    index: i,
                    rep: self.reputations[i],
                    threshold,
                });
            }
        }
        if let Some(p) = self.adversary.behaviors.selective_forward {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(SimError::BadDropProbability(p));
            }
        }
        Ok(())
    }
}

/// A message in flight. The decoded form is shared; the digest of the wire
/// bytes is computed exactly once, at emission.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub msg: Arc<Message>,
    pub digest: [u8; 32],
}

impl Envelope {
    pub fn new(msg: Message) -> Envelope {
        let digest = msg.digest();
        Envelope {
            msg: Arc::new(msg),
            digest,
        }
    }
}

enum EventPayload {
    Timer { node: usize, kind: TimerKind },
    Deliver { to: usize, env: Envelope },
    /// Test hook: make `node` gossip `env` at the event's timestamp.
    Inject { node: usize, env: Envelope },
}

struct SimEvent {
    at: u64,
    seq: u64,
    payload: EventPayload,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for SimEvent {}
impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the max-heap pops the earliest (timestamp, sequence).
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Everything a run leaves behind for metric computation and checking.
pub struct SimResult {
    pub nodes: Vec<Node>,
    pub keypairs: Vec<KeyPair>,
    pub log: EventLog,
    pub malicious: BTreeSet<usize>,
}

pub struct Sim {
    cfg: SimConfig,
    nodes: Vec<Node>,
    keypairs: Vec<KeyPair>,
    index_of: HashMap<NodeId, usize>,
    queue: BinaryHeap<SimEvent>,
    seq: u64,
    now: u64,
    rng: ChaCha12Rng,
    seen: Vec<HashSet<[u8; 32]>>,
    static_neighbors: Option<Vec<Vec<usize>>>,
    cache: VerifyCache,
    log: EventLog,
    last_logged_boundary: Option<u64>,
}

impl Sim {
    pub fn new(cfg: SimConfig) -> Result<Sim, SimError> {
        cfg.validate()?;
        let n = cfg.node_count;

        // Per-node keys derive from the run seed through a splitmix chain,
        // so a run is fully reproducible from (config, rng_seed).
        let mut key_state = cfg.rng_seed;
        let keypairs: Vec<KeyPair> = (0..n).map(|_| keygen(splitmix64(&mut key_state))).collect();

        let mut directory = KeyDirectory::new();
        let mut pairs = Vec::new();
        for (kp, &rep) in keypairs.iter().zip(&cfg.reputations) {
            directory.register(kp.public_key);
            pairs.push((kp.node_id, rep));
        }
        let directory = Arc::new(directory);
        let table = Arc::new(
            ReputationTable::from_pairs(pairs).expect("validated reputations are in range"),
        );

        let nodes: Vec<Node> = keypairs
            .iter()
            .map(|kp| Node::new(*kp, cfg.protocol.clone(), table.clone(), directory.clone()))
            .collect();
        let index_of = keypairs
            .iter()
            .enumerate()
            .map(|(i, kp)| (kp.node_id, i))
            .collect();

        let mut rng = ChaCha12Rng::seed_from_u64(cfg.rng_seed);
        let static_neighbors = if cfg.topology.static_overlay {
            Some(
                (0..n)
                    .map(|i| sample_peers(&mut rng, n, i, cfg.topology.fanout))
                    .collect(),
            )
        } else {
            None
        };

        let mut log = EventLog::new(cfg.log_level);
        for &i in &cfg.adversary.malicious {
            log.push(LogRecord {
                at_ms: 0,
                kind: EventKind::RoleMalicious,
                node: keypairs[i].node_id,
                round: 0,
                message_kind: "-",
                hash: [0; 32],
            });
        }

        let mut sim = Sim {
            cfg,
            nodes,
            keypairs,
            index_of,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            rng,
            seen: (0..n).map(|_| HashSet::new()).collect(),
            static_neighbors,
            cache: VerifyCache::default(),
            log,
            last_logged_boundary: None,
        };
        sim.schedule_round_timers();
        Ok(sim)
    }

    /// Rounds run on a fixed cadence; a cycle starting at or past the
    /// horizon is never begun, while events up to and including the horizon
    /// still execute (so the final round's vote deadline fires).
    fn schedule_round_timers(&mut self) {
        let period = self.cfg.protocol.round_period_ms();
        let proposal = self.cfg.protocol.proposal_timeout_ms;
        let decision = proposal + self.cfg.protocol.vote_decision_delay_ms;
        let retry = self.cfg.protocol.sync_retry_ms;
        let mut t = 0;
        while t < self.cfg.horizon_ms {
            for kind_off in [
                (TimerKind::RoundStart, 0),
                (TimerKind::ProposalEnd, proposal),
                (TimerKind::VoteDecision, decision),
                (TimerKind::VoteEnd, period),
            ] {
                for node in 0..self.cfg.node_count {
                    self.push_event(
                        t + kind_off.1,
                        EventPayload::Timer {
                            node,
                            kind: kind_off.0,
                        },
                    );
                }
            }
            if retry > 0 {
                // Strictly inside the cycle: the boundary itself already
                // re-requests through start_round.
                let mut off = retry;
                while off < period {
                    for node in 0..self.cfg.node_count {
                        self.push_event(
                            t + off,
                            EventPayload::Timer {
                                node,
                                kind: TimerKind::SyncRetry,
                            },
                        );
                    }
                    off += retry;
                }
            }
            t += period;
        }
    }

    fn push_event(&mut self, at: u64, payload: EventPayload) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(SimEvent { at, seq, payload });
    }

    fn is_malicious(&self, idx: usize) -> bool {
        self.cfg.adversary.malicious.contains(&idx)
    }

    fn record(
        &mut self,
        kind: EventKind,
        node: NodeId,
        round: u64,
        message_kind: &'static str,
        hash: [u8; 32],
    ) {
        self.log.push(LogRecord {
            at_ms: self.now,
            kind,
            node,
            round,
            message_kind,
            hash,
        });
    }

    /// Test hook: schedule `node` to gossip `msg` at `at_ms`.
    pub fn inject_gossip(&mut self, node: usize, msg: Message, at_ms: u64) -> [u8; 32] {
        let env = Envelope::new(msg);
        let digest = env.digest;
        self.push_event(at_ms, EventPayload::Inject { node, env });
        digest
    }

    pub fn keypair(&self, idx: usize) -> &KeyPair {
        &self.keypairs[idx]
    }

    pub fn run(mut self) -> SimResult {
        while let Some(ev) = self.queue.pop() {
            if ev.at > self.cfg.horizon_ms {
                break;
            }
            self.now = ev.at;
            match ev.payload {
                EventPayload::Timer { node, kind } => self.handle_timer(node, kind),
                EventPayload::Deliver { to, env } => self.handle_deliver(to, env),
                EventPayload::Inject { node, env } => {
                    self.seen[node].insert(env.digest);
                    self.emit_gossip(node, env);
                }
            }
        }
        SimResult {
            nodes: self.nodes,
            keypairs: self.keypairs,
            log: self.log,
            malicious: self.cfg.adversary.malicious,
        }
    }

    fn handle_timer(&mut self, node: usize, kind: TimerKind) {
        if kind == TimerKind::RoundStart && self.last_logged_boundary != Some(self.now) {
            self.last_logged_boundary = Some(self.now);
            let cycle = self.now / self.cfg.protocol.round_period_ms() + 1;
            self.record(EventKind::RoundStart, NodeId::ZERO, cycle, "-", [0; 32]);
        }
        let actions = self.nodes[node].on_timer(kind, self.now);
        self.execute_actions(node, actions);
    }

    fn handle_deliver(&mut self, to: usize, env: Envelope) {
        if !self.seen[to].insert(env.digest) {
            self.record(
                EventKind::DropDuplicate,
                self.nodes[to].id(),
                env.msg.round,
                env.msg.kind().as_str(),
                env.digest,
            );
            return;
        }
        self.record(
            EventKind::Deliver,
            self.nodes[to].id(),
            env.msg.round,
            env.msg.kind().as_str(),
            env.digest,
        );

        // Epidemic relay on first sight, before local processing; stale
        // rounds and non-gossip kinds stop here.
        if env.msg.kind().is_gossip() {
            if env.msg.round >= self.nodes[to].round() {
                self.forward(to, env.clone());
            } else {
                self.record(
                    EventKind::DropStale,
                    self.nodes[to].id(),
                    env.msg.round,
                    env.msg.kind().as_str(),
                    env.digest,
                );
            }
        }

        let actions =
            self.nodes[to].on_message(&env.digest, &env.msg, self.now, &mut self.cache);
        self.execute_actions(to, actions);
    }

    /// Relay someone else's gossip; this is where selective forwarding bites.
    fn forward(&mut self, relay: usize, env: Envelope) {
        if self.is_malicious(relay) {
            if let Some(p) = self.cfg.adversary.behaviors.selective_forward {
                if p >= 1.0 || self.rng.gen_bool(p) {
                    self.record(
                        EventKind::DropForward,
                        self.nodes[relay].id(),
                        env.msg.round,
                        env.msg.kind().as_str(),
                        env.digest,
                    );
                    return;
                }
            }
        }
        self.emit_gossip(relay, env);
    }

    /// Fan a message out to gossip targets with fresh latency samples.
    fn emit_gossip(&mut self, from: usize, env: Envelope) {
        self.record(
            EventKind::Send,
            self.nodes[from].id(),
            env.msg.round,
            env.msg.kind().as_str(),
            env.digest,
        );
        let targets = match &self.static_neighbors {
            Some(nb) => nb[from].clone(),
            None => sample_peers(
                &mut self.rng,
                self.cfg.node_count,
                from,
                self.cfg.topology.fanout,
            ),
        };
        for to in targets {
            let latency = self
                .rng
                .gen_range(self.cfg.topology.latency_min_ms..=self.cfg.topology.latency_max_ms);
            let at = self.now + latency;
            self.push_event(at, EventPayload::Deliver { to, env: env.clone() });
        }
    }

    /// Directed send to one peer (sync traffic).
    fn send_direct(&mut self, from: usize, to: usize, env: Envelope) {
        self.record(
            EventKind::Send,
            self.nodes[from].id(),
            env.msg.round,
            env.msg.kind().as_str(),
            env.digest,
        );
        let latency = self
            .rng
            .gen_range(self.cfg.topology.latency_min_ms..=self.cfg.topology.latency_max_ms);
        let at = self.now + latency;
        self.push_event(at, EventPayload::Deliver { to, env });
    }

    fn execute_actions(&mut self, idx: usize, actions: Vec<Action>) {
        for action in actions {
            match action {
                Action::Gossip(msg) => {
                    let kind = msg.kind();
                    let round = msg.round;
                    let env = Envelope::new(msg);
                    self.seen[idx].insert(env.digest);
                    if kind == MessageKind::BlockBody
                        && self.is_malicious(idx)
                        && self.cfg.adversary.behaviors.withhold_body
                    {
                        // The withholding attack: the winning announcement is
                        // already out, the body never follows.
                        self.record(
                            EventKind::Withhold,
                            self.nodes[idx].id(),
                            round,
                            kind.as_str(),
                            env.digest,
                        );
                        continue;
                    }
                    self.emit_gossip(idx, env);
                }
                Action::RequestSync(msg) => {
                    let env = Envelope::new(msg);
                    self.seen[idx].insert(env.digest);
                    let targets = sample_peers(
                        &mut self.rng,
                        self.cfg.node_count,
                        idx,
                        self.cfg.topology.sync_fanout,
                    );
                    for to in targets {
                        self.send_direct(idx, to, env.clone());
                    }
                }
                Action::Send { to, msg } => {
                    if self.is_malicious(idx)
                        && self.cfg.adversary.behaviors.stale_voting
                        && msg.kind() == MessageKind::SyncResponse
                    {
                        continue; // contributes nothing to anyone's recovery
                    }
                    let Some(&to_idx) = self.index_of.get(&to) else {
                        continue;
                    };
                    let env = Envelope::new(msg);
                    self.seen[idx].insert(env.digest);
                    self.send_direct(idx, to_idx, env);
                }
                Action::Committed(block) => {
                    self.record(
                        EventKind::Commit,
                        self.nodes[idx].id(),
                        block.height,
                        "block",
                        block.block_hash.0,
                    );
                }
                Action::Adopted {
                    old_height,
                    new_height,
                    reorged,
                } => {
                    let head = self.nodes[idx].chain().head().block_hash.0;
                    self.record(
                        EventKind::Adopt,
                        self.nodes[idx].id(),
                        new_height,
                        "chain",
                        head,
                    );
                    if reorged {
                        self.record(
                            EventKind::Reorg,
                            self.nodes[idx].id(),
                            old_height,
                            "chain",
                            head,
                        );
                    }
                }
            }
        }
    }
}

/// `k` distinct peers of `exclude`, uniform over the other `n - 1` nodes.
fn sample_peers(rng: &mut ChaCha12Rng, n: usize, exclude: usize, k: usize) -> Vec<usize> {
    if n <= 1 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n - 1);
    rand::seq::index::sample(rng, n - 1, k)
        .into_iter()
        .map(|j| if j >= exclude { j + 1 } else { j })
        .collect()
}

/// Build and run a simulation in one step.
pub fn run(cfg: SimConfig) -> Result<SimResult, SimError> {
    Ok(Sim::new(cfg)?.run())
}
