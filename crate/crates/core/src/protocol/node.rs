//! Per-node consensus state machine.
//!
//! A [`Node`] is a pure, single-threaded state machine: the surrounding
//! simulator (or any other driver) feeds it delivered messages and timer
//! expirations, and it answers with a list of [`Action`]s. It never blocks,
//! never looks at a clock of its own, and never talks to a network.
//!
//! ## Round anatomy
//!
//! Rounds run on a fixed cadence (20 s by default) aligned across nodes:
//!
//! ```text
//! t0          RoundStart    sync check; PROPOSAL sortition; announce (lot, proof)
//! t0 + 12 s   ProposalEnd   leading proposer broadcasts the block body
//! t0 + 16 s   VoteDecision  VOTE sortition; vote for best validated body
//! t0 + 20 s   VoteEnd       tally; commit on quorum, else step the seed
//! ```
//!
//! The vote decision deliberately sits mid-window rather than at the vote
//! phase's opening edge: bodies are broadcast when the proposal phase ends,
//! so a voter deciding at that same instant could never have received one.
//! The half-window delay gives gossip time to deliver every body while
//! leaving the other half for votes to spread before the tally.
//!
//! The round counter only advances when a block commits (`round` is always
//! `chain height + 1`); a cycle that commits nothing retries the same round
//! number on the next cadence tick with a fallback seed, so a lottery that
//! picked a withholding proposer is not replayed verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::ledger::{
    next_seed, seed_after, synthetic_payload, try_adopt, Block, BlockHash, Chain, KeyDirectory,
    DEFAULT_MAX_PAYLOAD,
};
use crate::protocol::message::{Message, MessageBody};
use crate::protocol::VerifyCache;
use crate::reputation::ReputationTable;
use crate::sortition::{
    calibrate_vote_threshold, sortition, verify_sortition, Role, Seed, SortitionError,
    SortitionParams,
};
use crate::vrf::{KeyPair, Lot, NodeId};

/// Tunable protocol constants. Defaults mirror the reference experiment
/// configuration: 20 s rounds split 12 s / 8 s, a committee of 11 drawn
/// from 15 eligible nodes, quorum 6, 200 KB blocks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub proposal_timeout_ms: u64,
    pub vote_timeout_ms: u64,
    /// Offset into the vote phase at which the vote decision fires.
    pub vote_decision_delay_ms: u64,
    pub sortition: SortitionParams,
    pub expected_committee_size: u32,
    /// Votes needed to commit: strict majority of the expected committee.
    pub quorum: u32,
    /// Commit as soon as quorum is observed instead of waiting for VoteEnd.
    pub early_advance: bool,
    /// Upper bound accepted for a block payload.
    pub max_payload: usize,
    /// Payload size this node puts in its own proposals.
    pub payload_len: usize,
    /// Retransmission period for unanswered sync requests; 0 disables
    /// retries and a syncing node waits for the next round boundary.
    pub sync_retry_ms: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            proposal_timeout_ms: 12_000,
            vote_timeout_ms: 8_000,
            vote_decision_delay_ms: 4_000,
            sortition: SortitionParams {
                threshold_proposal: 0.9,
                threshold_vote: calibrate_vote_threshold(15, 11)
                    .expect("static calibration is valid"),
                threshold_reputation: 0.8,
            },
            expected_committee_size: 11,
            quorum: 6,
            early_advance: true,
            max_payload: DEFAULT_MAX_PAYLOAD,
            payload_len: DEFAULT_MAX_PAYLOAD,
            sync_retry_ms: 2_000,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParamsError {
    #[error("quorum {quorum} must equal floor(committee/2)+1 = {expected}")]
    QuorumMismatch { quorum: u32, expected: u32 },
    #[error("vote decision delay {delay_ms} ms must fall inside the {vote_ms} ms vote phase")]
    DecisionDelayTooLate { delay_ms: u64, vote_ms: u64 },
    #[error("proposal payload {payload} exceeds max payload {max}")]
    PayloadTooLarge { payload: usize, max: usize },
    #[error("committee size must be positive")]
    ZeroCommittee,
    #[error("phase timeouts must be positive")]
    ZeroTimeout,
    #[error(transparent)]
    Sortition(#[from] SortitionError),
}

impl ProtocolParams {
    pub fn round_period_ms(&self) -> u64 {
        self.proposal_timeout_ms + self.vote_timeout_ms
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        self.sortition.validate()?;
        if self.expected_committee_size == 0 {
            return Err(ParamsError::ZeroCommittee);
        }
        if self.proposal_timeout_ms == 0 || self.vote_timeout_ms == 0 {
            return Err(ParamsError::ZeroTimeout);
        }
        let expected = self.expected_committee_size / 2 + 1;
        if self.quorum != expected {
            return Err(ParamsError::QuorumMismatch {
                quorum: self.quorum,
                expected,
            });
        }
        if self.vote_decision_delay_ms >= self.vote_timeout_ms {
            return Err(ParamsError::DecisionDelayTooLate {
                delay_ms: self.vote_decision_delay_ms,
                vote_ms: self.vote_timeout_ms,
            });
        }
        if self.payload_len > self.max_payload {
            return Err(ParamsError::PayloadTooLarge {
                payload: self.payload_len,
                max: self.max_payload,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Behind the network; waiting for a chain from a peer.
    Syncing,
    /// Collecting proposal announcements (first 12 s of a round).
    Proposing,
    /// Collecting bodies and votes (last 8 s of a round).
    Voting,
    /// Caught up mid-round via sync: absorbing the round's traffic and
    /// allowed to finalize from observed quorum, but not to propose or vote
    /// (we missed part of the round, so our half-informed choices must not
    /// influence anyone).
    Observing,
    /// Round settled (committed or given up); idle until the next boundary.
    Finalizing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerKind {
    RoundStart,
    ProposalEnd,
    VoteDecision,
    VoteEnd,
    /// Periodic tick that re-sends the sync request while syncing; a no-op
    /// in every other phase.
    SyncRetry,
}

/// What a node asks its driver to do.
#[derive(Clone, Debug)]
pub enum Action {
    /// Flood through the gossip overlay.
    Gossip(Message),
    /// Ask a couple of random peers for their chain (driver picks targets).
    RequestSync(Message),
    /// Directed reply, e.g. a sync response.
    Send { to: NodeId, msg: Message },
    /// A block was appended to the local chain.
    Committed(Block),
    /// The local chain was replaced through sync.
    Adopted {
        old_height: u64,
        new_height: u64,
        /// True when adoption rewrote an already-held block rather than
        /// just extending — never expected from honest peers.
        reorged: bool,
    },
}

/// Per-node tallies; the harness aggregates these across a run.
#[derive(Clone, Debug, Default)]
pub struct NodeCounters {
    pub proposals_made: u64,
    pub bodies_sent: u64,
    pub votes_cast: u64,
    pub commits: u64,
    pub empty_rounds: u64,
    pub sync_requests: u64,
    pub adoptions: u64,
    pub announces_accepted: u64,
    pub bodies_accepted: u64,
    pub votes_accepted: u64,
    /// Signature or body-hash failures (any kind).
    pub dropped_static: u64,
    /// Gossip for a round other than the current one.
    pub dropped_stale: u64,
    /// Failed sortition verification or broken chain linkage.
    pub dropped_invalid: u64,
    pub dropped_equivocation: u64,
    /// Counted votes from under-threshold reputations. Must stay zero; the
    /// sortition gate makes this unreachable, and the harness asserts it.
    pub low_rep_votes_accepted: u64,
}

#[derive(Clone, Debug)]
struct AnnouncedProposal {
    lot: Lot,
    proposer: NodeId,
}

/// Chain-anchored entropy for the round after `head`: the genesis seed at
/// height zero, the committed lot's digest afterwards.
fn base_seed_of(head: &Block) -> Seed {
    if head.height == 0 {
        head.seed
    } else {
        seed_after(head)
    }
}

pub struct Node {
    keypair: KeyPair,
    params: ProtocolParams,
    reputation: Arc<ReputationTable>,
    directory: Arc<KeyDirectory>,
    own_reputation: f64,

    chain: Chain,
    round: u64,
    /// Chain-anchored entropy for the round in progress: the genesis seed at
    /// height zero, the committed head's lot digest afterwards.
    base_seed: Seed,
    /// Working seed for the current attempt, re-derived at every boundary as
    /// `H(base_seed || cycle)`. Keying the retry freshness to the wall cycle
    /// instead of a per-node failure count keeps every node that holds the
    /// same head on the same seed, no matter how many failed attempts each
    /// of them personally sat through.
    seed: Seed,
    phase: Phase,
    /// Highest round carried by any signature-verified message; evidence
    /// that the network has moved past us.
    highest_round_seen: u64,
    sync_nonce: u64,

    // Per-cycle state, cleared at every round boundary.
    proposals: BTreeMap<BlockHash, AnnouncedProposal>,
    bodies: BTreeMap<BlockHash, Block>,
    votes: BTreeMap<BlockHash, BTreeSet<NodeId>>,
    vote_lots: BTreeMap<BlockHash, Lot>,
    voters_seen: BTreeSet<NodeId>,
    my_proposal: Option<BlockHash>,
    /// Original signed wire messages backing `bodies` and `votes`, kept so a
    /// committing node can re-gossip the winning quorum as a commit
    /// certificate. Re-sending the originals (same digests) lets gossip
    /// dedup absorb the cost wherever the first wave already landed.
    body_msgs: BTreeMap<BlockHash, Message>,
    vote_msgs: BTreeMap<BlockHash, Vec<Message>>,

    counters: NodeCounters,
}

impl Node {
    pub fn new(
        keypair: KeyPair,
        params: ProtocolParams,
        reputation: Arc<ReputationTable>,
        directory: Arc<KeyDirectory>,
    ) -> Node {
        debug_assert!(params.validate().is_ok());
        let chain = Chain::new();
        let base_seed = base_seed_of(chain.head());
        let seed = next_seed(None, &base_seed, 1); // round 1, cycle 1
        let own_reputation = reputation.get(&keypair.node_id).unwrap_or(0.0);
        Node {
            keypair,
            params,
            reputation,
            directory,
            own_reputation,
            chain,
            round: 1,
            base_seed,
            seed,
            phase: Phase::Finalizing,
            highest_round_seen: 0,
            sync_nonce: 0,
            proposals: BTreeMap::new(),
            bodies: BTreeMap::new(),
            votes: BTreeMap::new(),
            vote_lots: BTreeMap::new(),
            voters_seen: BTreeSet::new(),
            my_proposal: None,
            body_msgs: BTreeMap::new(),
            vote_msgs: BTreeMap::new(),
            counters: NodeCounters::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.keypair.node_id
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn counters(&self) -> &NodeCounters {
        &self.counters
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn on_timer(&mut self, timer: TimerKind, now_ms: u64) -> Vec<Action> {
        match timer {
            TimerKind::RoundStart => self.start_round(now_ms),
            TimerKind::ProposalEnd => self.end_proposal_phase(),
            TimerKind::VoteDecision => self.decide_vote(),
            TimerKind::VoteEnd => self.finalize_round(),
            TimerKind::SyncRetry => self.retry_sync(),
        }
    }

    /// Wall-clock cycle index, starting at 1. Round boundaries are
    /// time-aligned network-wide, so the index is shared knowledge.
    fn cycle_of(&self, now_ms: u64) -> u64 {
        now_ms / self.params.round_period_ms() + 1
    }

    /// Fall behind the network: stop participating and ask peers for their
    /// chains. Safe to call repeatedly; each call is a fresh request.
    fn enter_sync(&mut self) -> Action {
        self.phase = Phase::Syncing;
        self.sync_nonce += 1;
        self.counters.sync_requests += 1;
        let msg = Message::sign(
            &self.keypair.secret_key,
            self.round,
            MessageBody::SyncRequest {
                height: self.chain.height(),
                nonce: self.sync_nonce,
            },
        );
        Action::RequestSync(msg)
    }

    /// With half-second latencies, an answered request resolves within
    /// about a second; a node still syncing when the retry tick fires was
    /// ignored (targets with nothing longer stay silent) and asks again.
    fn retry_sync(&mut self) -> Vec<Action> {
        if self.phase != Phase::Syncing {
            return Vec::new();
        }
        vec![self.enter_sync()]
    }

    /// Round boundary: clear cycle state, check for sync evidence, derive the
    /// cycle's working seed, run the proposal lottery.
    pub fn start_round(&mut self, now_ms: u64) -> Vec<Action> {
        self.proposals.clear();
        self.bodies.clear();
        self.votes.clear();
        self.vote_lots.clear();
        self.voters_seen.clear();
        self.my_proposal = None;
        self.body_msgs.clear();
        self.vote_msgs.clear();

        // A sync in progress outlives the boundary. The node entered sync on
        // hard evidence — a later round, or a quorum it cannot close — and
        // resetting it to Proposing would put it right back on the committee
        // for a height the network may already have decided. It rejoins when
        // a response lands (adoption) and costs this cycle otherwise.
        if self.phase == Phase::Syncing || self.highest_round_seen > self.round {
            return vec![self.enter_sync()];
        }

        // A failed attempt is retried against fresh randomness (the cycle
        // index advanced), but the seed stays a pure function of (head,
        // cycle): nodes that lost different numbers of attempts to the same
        // round still agree on it and can validate each other's lotteries.
        self.seed = next_seed(None, &self.base_seed, self.cycle_of(now_ms));

        self.phase = Phase::Proposing;
        let outcome = sortition(
            &self.keypair.secret_key,
            Role::Proposal,
            &self.seed,
            self.own_reputation,
            &self.params.sortition,
        );
        if !outcome.selected {
            return Vec::new();
        }

        let block = Block::new(
            self.chain.height() + 1,
            self.chain.head().block_hash,
            self.keypair.node_id,
            outcome.lot,
            outcome.proof,
            self.seed,
            synthetic_payload(self.round, self.params.payload_len),
        );
        let hash = block.block_hash;
        self.proposals.insert(
            hash,
            AnnouncedProposal {
                lot: outcome.lot,
                proposer: self.keypair.node_id,
            },
        );
        self.vote_lots.insert(hash, outcome.lot);
        self.bodies.insert(hash, block);
        self.my_proposal = Some(hash);
        self.counters.proposals_made += 1;

        let msg = Message::sign(
            &self.keypair.secret_key,
            self.round,
            MessageBody::ProposalAnnounce {
                block_hash: hash,
                lot: outcome.lot,
                proof: outcome.proof,
            },
        );
        vec![Action::Gossip(msg)]
    }

    /// Proposal phase over: release our body if no announced lot beats ours.
    fn end_proposal_phase(&mut self) -> Vec<Action> {
        if self.phase != Phase::Proposing {
            return Vec::new();
        }
        self.phase = Phase::Voting;

        let Some(mine) = self.my_proposal else {
            return Vec::new();
        };
        let my_lot = self.vote_lots[&mine];
        let beaten = self
            .proposals
            .values()
            .any(|p| p.proposer != self.keypair.node_id && p.lot > my_lot);
        if beaten {
            return Vec::new();
        }
        let block = self.bodies[&mine].clone();
        self.counters.bodies_sent += 1;
        let msg = Message::sign(
            &self.keypair.secret_key,
            self.round,
            MessageBody::BlockBody(block),
        );
        self.body_msgs.insert(mine, msg.clone());
        vec![Action::Gossip(msg)]
    }

    /// Mid-vote-phase decision point: if the VOTE lottery selects us, vote
    /// for the highest-lot proposal whose validated body we hold.
    fn decide_vote(&mut self) -> Vec<Action> {
        if self.phase != Phase::Voting {
            return Vec::new();
        }
        let outcome = sortition(
            &self.keypair.secret_key,
            Role::Vote,
            &self.seed,
            self.own_reputation,
            &self.params.sortition,
        );
        if !outcome.selected {
            return Vec::new();
        }
        let Some((target, proposer_lot)) = self
            .bodies
            .keys()
            .filter_map(|h| self.vote_lots.get(h).map(|lot| (*h, *lot)))
            .max_by(|(ha, la), (hb, lb)| la.cmp(lb).then_with(|| hb.cmp(ha)))
        else {
            return Vec::new(); // nothing validated to vote for
        };

        self.voters_seen.insert(self.keypair.node_id);
        self.votes.entry(target).or_default().insert(self.keypair.node_id);
        self.counters.votes_cast += 1;

        let msg = Message::sign(
            &self.keypair.secret_key,
            self.round,
            MessageBody::Vote {
                voted_block_hash: target,
                voted_proposer_lot: proposer_lot,
                voter_lot: outcome.lot,
                voter_proof: outcome.proof,
            },
        );
        self.vote_msgs.entry(target).or_default().push(msg.clone());
        let mut actions = vec![Action::Gossip(msg)];
        actions.extend(self.try_early_finalize());
        actions
    }

    /// Vote target ranking: most votes, then highest proposer lot, then
    /// smaller block hash. Lot ties are cryptographically negligible but the
    /// order must still be total for determinism.
    fn leading_candidate(&self) -> Option<(BlockHash, usize)> {
        self.votes
            .iter()
            .map(|(h, voters)| (*h, voters.len()))
            .max_by(|(ha, na), (hb, nb)| {
                na.cmp(nb)
                    .then_with(|| self.vote_lots.get(ha).cmp(&self.vote_lots.get(hb)))
                    .then_with(|| hb.cmp(ha))
            })
    }

    /// Commit the top-ranked candidate if it has quorum and we hold its
    /// body; otherwise do nothing. Deliberately no fall-through to a
    /// lower-ranked quorum candidate: honoring only the unique leader keeps
    /// nodes with differing body availability from committing different
    /// blocks in the same round.
    ///
    /// A commit also re-gossips its evidence — the winning body and the
    /// quorum of votes, as the original signed messages — so the decision
    /// reaches nodes the first wave missed. Without this a round can close
    /// inside a small pocket of the network while everyone else, seeing no
    /// quorum, retries the height and decides it a second time.
    fn try_commit_leader(&mut self) -> Vec<Action> {
        let Some((hash, count)) = self.leading_candidate() else {
            return Vec::new();
        };
        if count < self.params.quorum as usize {
            return Vec::new();
        }
        let Some(block) = self.bodies.get(&hash) else {
            return Vec::new();
        };
        debug_assert_eq!(block.parent_hash, self.chain.head().block_hash);
        let block = block.clone();
        self.chain.push(block.clone());
        self.round += 1;
        // The working seed refreshes from the new anchor at the next
        // boundary; nothing consults it between commit and then.
        self.base_seed = seed_after(self.chain.head());
        debug_assert_eq!(self.round, self.chain.height() + 1);
        self.phase = Phase::Finalizing;
        self.counters.commits += 1;

        let mut actions = vec![Action::Committed(block)];
        actions.extend(self.body_msgs.get(&hash).cloned().map(Action::Gossip));
        if let Some(votes) = self.vote_msgs.get(&hash) {
            actions.extend(votes.iter().cloned().map(Action::Gossip));
        }
        actions
    }

    /// Whether this node may settle the round from the evidence it holds:
    /// normal voters may, and so may a node that adopted a chain mid-round —
    /// committing what the network demonstrably committed is observation,
    /// not participation.
    fn may_finalize(&self) -> bool {
        matches!(self.phase, Phase::Voting | Phase::Observing)
    }

    /// Close the round the moment the evidence is complete. Voting and
    /// observing nodes advance early; a syncing node that assembles the full
    /// quorum and body for its own round — typically from a committer's
    /// re-gossiped certificate — commits and leaves sync without waiting for
    /// a chain response, since the quorum IS the network's decision.
    fn try_early_finalize(&mut self) -> Vec<Action> {
        let eligible = self.may_finalize() || self.phase == Phase::Syncing;
        if !(self.params.early_advance && eligible) {
            return Vec::new();
        }
        self.try_commit_leader()
    }

    /// Quorum observed for a block whose body we never received. The body
    /// broadcast is long over by vote time, so the missing copy is not in
    /// flight; and every one of those voters held the body, so the chain
    /// carrying the block is out there to pull. Syncing is strictly better
    /// than retrying a height the network has already decided.
    fn quorum_without_body(&self) -> bool {
        self.leading_candidate().is_some_and(|(hash, count)| {
            count >= self.params.quorum as usize && !self.bodies.contains_key(&hash)
        })
    }

    /// End of the vote window: commit on quorum, pull on an uncommittable
    /// quorum, or give the round up. The retry draws a fresh lottery anyway —
    /// the next boundary re-derives the working seed from an advanced cycle
    /// index.
    fn finalize_round(&mut self) -> Vec<Action> {
        if !self.may_finalize() {
            return Vec::new(); // already committed early, or out syncing
        }
        let actions = self.try_commit_leader();
        if !actions.is_empty() {
            return actions;
        }
        if self.quorum_without_body() {
            return vec![self.enter_sync()];
        }
        self.counters.empty_rounds += 1;
        self.phase = Phase::Finalizing;
        Vec::new()
    }

    /// Entry point for every delivered message. `digest` must be the SHA-256
    /// of the exact wire bytes (the driver computes it once per envelope).
    pub fn on_message(
        &mut self,
        digest: &[u8; 32],
        msg: &Message,
        now_ms: u64,
        cache: &mut VerifyCache,
    ) -> Vec<Action> {
        if !cache.statically_valid(digest, msg, &self.directory, self.params.max_payload) {
            self.counters.dropped_static += 1;
            return Vec::new();
        }
        // Signature-verified evidence of other nodes' progress.
        self.highest_round_seen = self.highest_round_seen.max(msg.round);

        // A message from a later round means a quorum we never saw has already
        // closed this round (or an earlier one). React immediately rather than
        // at the next boundary: a node that keeps blind-retrying a height the
        // network has moved past wastes its committee seat at best, and at
        // worst re-decides that height against a minority quorum. Sync
        // responses are exempt — they are the cure arriving, not fresh
        // evidence.
        if msg.round > self.round
            && self.phase != Phase::Syncing
            && !matches!(&msg.body, MessageBody::SyncResponse { .. })
        {
            return vec![self.enter_sync()];
        }

        match &msg.body {
            MessageBody::ProposalAnnounce {
                block_hash,
                lot,
                proof,
            } => {
                if msg.round != self.round {
                    self.counters.dropped_stale += 1;
                    return Vec::new();
                }
                let Some(pk) = self.directory.get(&msg.sender) else {
                    self.counters.dropped_invalid += 1;
                    return Vec::new();
                };
                // Reputation never gates proposals.
                if !verify_sortition(
                    pk,
                    Role::Proposal,
                    &self.seed,
                    lot,
                    proof,
                    0.0,
                    &self.params.sortition,
                ) {
                    self.counters.dropped_invalid += 1;
                    return Vec::new();
                }
                if self.proposals.contains_key(block_hash) {
                    return Vec::new(); // duplicate claim
                }
                self.proposals.insert(
                    *block_hash,
                    AnnouncedProposal {
                        lot: *lot,
                        proposer: msg.sender,
                    },
                );
                self.vote_lots.entry(*block_hash).or_insert(*lot);
                self.counters.announces_accepted += 1;
                Vec::new()
            }

            MessageBody::BlockBody(block) => {
                if msg.round != self.round {
                    self.counters.dropped_stale += 1;
                    return Vec::new();
                }
                self.accept_body(msg, block)
            }

            MessageBody::Vote {
                voted_block_hash,
                voted_proposer_lot,
                voter_lot,
                voter_proof,
            } => {
                if msg.round != self.round {
                    self.counters.dropped_stale += 1;
                    return Vec::new();
                }
                if self.voters_seen.contains(&msg.sender) {
                    self.counters.dropped_equivocation += 1;
                    return Vec::new();
                }
                let Some(pk) = self.directory.get(&msg.sender) else {
                    self.counters.dropped_invalid += 1;
                    return Vec::new();
                };
                let Ok(rep) = self.reputation.get(&msg.sender) else {
                    self.counters.dropped_invalid += 1;
                    return Vec::new();
                };
                if !verify_sortition(
                    pk,
                    Role::Vote,
                    &self.seed,
                    voter_lot,
                    voter_proof,
                    rep,
                    &self.params.sortition,
                ) {
                    self.counters.dropped_invalid += 1;
                    return Vec::new();
                }
                self.voters_seen.insert(msg.sender);
                self.votes
                    .entry(*voted_block_hash)
                    .or_default()
                    .insert(msg.sender);
                self.vote_lots
                    .entry(*voted_block_hash)
                    .or_insert(*voted_proposer_lot);
                self.vote_msgs
                    .entry(*voted_block_hash)
                    .or_default()
                    .push(msg.clone());
                self.counters.votes_accepted += 1;
                if rep < self.params.sortition.threshold_reputation {
                    // Unreachable behind the sortition gate; tracked so the
                    // harness can prove it stayed that way.
                    self.counters.low_rep_votes_accepted += 1;
                }
                let actions = self.try_early_finalize();
                if !actions.is_empty() {
                    return actions;
                }
                if self.may_finalize() && self.quorum_without_body() {
                    return vec![self.enter_sync()];
                }
                actions
            }

            MessageBody::SyncRequest { height, .. } => {
                if self.chain.height() <= *height {
                    return Vec::new(); // nothing the requester lacks
                }
                let reply = Message::sign(
                    &self.keypair.secret_key,
                    self.round,
                    MessageBody::SyncResponse(self.chain.clone()),
                );
                vec![Action::Send {
                    to: msg.sender,
                    msg: reply,
                }]
            }

            MessageBody::SyncResponse(candidate) => {
                if self.phase != Phase::Syncing {
                    return Vec::new(); // unsolicited or already adopted
                }
                let old_height = self.chain.height();
                let local = std::mem::take(&mut self.chain);
                let reorged = {
                    let old = local.blocks().to_vec();
                    self.chain = try_adopt(
                        local,
                        candidate.clone(),
                        self.params.max_payload,
                        &self.params.sortition,
                        &self.directory,
                    );
                    old.iter()
                        .zip(self.chain.blocks())
                        .any(|(a, b)| a.block_hash != b.block_hash)
                };
                if self.chain.height() == old_height {
                    return Vec::new(); // candidate no better (or invalid)
                }
                self.round = self.chain.height() + 1;
                self.base_seed = base_seed_of(self.chain.head());
                self.seed = next_seed(None, &self.base_seed, self.cycle_of(now_ms));
                // Tallies and bodies gathered before adoption belong to a
                // round this chain has already settled; against the new head
                // they are at best dead weight and at worst a stale quorum a
                // later early-finalize would try to commit again.
                self.proposals.clear();
                self.bodies.clear();
                self.votes.clear();
                self.vote_lots.clear();
                self.voters_seen.clear();
                self.my_proposal = None;
                self.body_msgs.clear();
                self.vote_msgs.clear();
                // Observe the rest of this cycle: absorb bodies and votes
                // and finalize if the network commits, but propose and vote
                // only from the next boundary on. Without the finalize
                // allowance a straggler would discard a committable round,
                // restart it one behind, and oscillate out of sync forever.
                self.phase = Phase::Observing;
                self.counters.adoptions += 1;
                vec![Action::Adopted {
                    old_height,
                    new_height: self.chain.height(),
                    reorged,
                }]
            }
        }
    }

    /// Validate and store a full block for the current round. The expensive
    /// hash-consistency check already happened in the static layer; what is
    /// left is linkage to our chain, seed agreement, and the proposer's
    /// lottery claim.
    fn accept_body(&mut self, msg: &Message, block: &Block) -> Vec<Action> {
        let head = self.chain.head();
        let linked = block.parent_hash == head.block_hash && block.height == head.height + 1;
        // A body must be drawn against our current round seed; an old winning
        // draw replayed under a fresh round fails here.
        let seed_ok = block.seed == self.seed;
        let sender_is_proposer = block.proposer_id == msg.sender;
        let Some(pk) = self.directory.get(&block.proposer_id) else {
            self.counters.dropped_invalid += 1;
            return Vec::new();
        };
        if !(linked
            && seed_ok
            && sender_is_proposer
            && verify_sortition(
                pk,
                Role::Proposal,
                &block.seed,
                &block.proposer_lot,
                &block.proposer_proof,
                0.0,
                &self.params.sortition,
            ))
        {
            self.counters.dropped_invalid += 1;
            return Vec::new();
        }
        if self.bodies.contains_key(&block.block_hash) {
            return Vec::new();
        }
        // A body is also an implicit announcement; gossip may deliver it to
        // someone the announcement never reached.
        self.proposals
            .entry(block.block_hash)
            .or_insert(AnnouncedProposal {
                lot: block.proposer_lot,
                proposer: block.proposer_id,
            });
        self.vote_lots
            .entry(block.block_hash)
            .or_insert(block.proposer_lot);
        self.bodies.insert(block.block_hash, block.clone());
        self.body_msgs.insert(block.block_hash, msg.clone());
        self.counters.bodies_accepted += 1;
        self.try_early_finalize()
    }
}
