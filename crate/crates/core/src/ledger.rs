//! Blocks, the hash-linked chain, and the round-seed chain.
//!
//! A block carries everything a verifier needs to check it in isolation:
//! the proposer's identity, the winning lot and its proof, and the round
//! seed that lottery was drawn against. That keeps chain validation
//! self-contained for nodes that were offline and are catching up from a
//! serialized chain.
//!
//! Wire encoding (canonical, big-endian, bit-exact):
//!
//! ```text
//! block := height:u64 || parent_hash:32 || proposer_id:32 || proposer_lot:32
//!       || proof_len:u32 || proof || seed:32 || payload_len:u32 || payload
//!       || block_hash:32
//! chain := count:u32 || (block_len:u32 || block)*        (height order)
//! ```
//!
//! `block_hash` is SHA-256 over the encoded fields that precede it.

use crate::hash::{sha256_parts, splitmix64, to_hex};
use crate::sortition::{self, Role, Seed, SortitionParams};
use crate::vrf::{Lot, NodeId, Proof, PublicKey};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Default cap on block payload size, in bytes.
pub const DEFAULT_MAX_PAYLOAD: usize = 200_000;

/// Decode-time sanity cap for any single length prefix.
const MAX_FIELD_LEN: u32 = 1 << 26;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockHash(pub [u8; 32]);

impl BlockHash {
    pub const ZERO: BlockHash = BlockHash([0; 32]);

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl std::fmt::Debug for BlockHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BlockHash({}…)", &self.to_hex()[..12])
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub parent_hash: BlockHash,
    pub proposer_id: NodeId,
    pub proposer_lot: Lot,
    pub proposer_proof: Proof,
    pub seed: Seed,
    /// Payload bytes are reference-counted: a 200 kB body validated and
    /// stored by every node in a simulation must not be copied per node.
    pub payload: Arc<Vec<u8>>,
    pub block_hash: BlockHash,
}

impl std::fmt::Debug for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Block")
            .field("height", &self.height)
            .field("hash", &self.block_hash)
            .field("parent", &self.parent_hash)
            .field("proposer", &self.proposer_id)
            .field("payload_len", &self.payload.len())
            .finish()
    }
}

impl Block {
    /// Assemble a block and compute its hash over the canonical encoding.
    pub fn new(
        height: u64,
        parent_hash: BlockHash,
        proposer_id: NodeId,
        proposer_lot: Lot,
        proposer_proof: Proof,
        seed: Seed,
        payload: Vec<u8>,
    ) -> Self {
        let mut b = Block {
            height,
            parent_hash,
            proposer_id,
            proposer_lot,
            proposer_proof,
            seed,
            payload: Arc::new(payload),
            block_hash: BlockHash::ZERO,
        };
        b.block_hash = b.compute_hash();
        b
    }

    /// Hash over the canonical encoding of everything before `block_hash`.
    /// Streams the same bytes [`Self::encode`] would produce, without
    /// materializing the buffer (payloads are large).
    pub fn compute_hash(&self) -> BlockHash {
        let mut h = Sha256::new();
        h.update(self.height.to_be_bytes());
        h.update(self.parent_hash.0);
        h.update(self.proposer_id.0);
        h.update(self.proposer_lot.0);
        h.update((self.proposer_proof.0.len() as u32).to_be_bytes());
        h.update(self.proposer_proof.0);
        h.update(self.seed.0);
        h.update((self.payload.len() as u32).to_be_bytes());
        h.update(self.payload.as_slice());
        BlockHash(h.finalize().into())
    }

    fn encode_prefix(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 * 4 + 16 + 32 + 8 + self.payload.len());
        out.extend_from_slice(&self.height.to_be_bytes());
        out.extend_from_slice(&self.parent_hash.0);
        out.extend_from_slice(&self.proposer_id.0);
        out.extend_from_slice(&self.proposer_lot.0);
        out.extend_from_slice(&(self.proposer_proof.0.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.proposer_proof.0);
        out.extend_from_slice(&self.seed.0);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Recompute and compare the hash; detached from `new` so decoded and
    /// hand-mutated blocks can be checked.
    pub fn hash_is_consistent(&self) -> bool {
        self.compute_hash() == self.block_hash
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.encode_prefix();
        out.extend_from_slice(&self.block_hash.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Block, DecodeError> {
        let mut r = Reader::new(bytes);
        let block = decode_block(&mut r)?;
        r.finish()?;
        Ok(block)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DecodeError {
    #[error("input truncated at byte {0}")]
    Truncated(usize),
    #[error("length prefix {0} exceeds sanity cap")]
    OversizedField(u32),
    #[error("{0} trailing bytes after decode")]
    TrailingBytes(usize),
    #[error("unexpected proof length {0}")]
    BadProofLength(u32),
    #[error("unknown message kind byte {0}")]
    UnknownKind(u8),
}

/// Minimal cursor over a byte slice; every read is bounds-checked.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() - self.pos < n {
            return Err(DecodeError::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn arr32(&mut self) -> Result<[u8; 32], DecodeError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    /// u32 length prefix + that many bytes, with a sanity cap.
    pub(crate) fn var_bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()?;
        if len > MAX_FIELD_LEN {
            return Err(DecodeError::OversizedField(len));
        }
        self.take(len as usize)
    }

    pub(crate) fn finish(&self) -> Result<(), DecodeError> {
        if self.pos != self.bytes.len() {
            return Err(DecodeError::TrailingBytes(self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

fn decode_block(r: &mut Reader) -> Result<Block, DecodeError> {
    let height = r.u64()?;
    let parent_hash = BlockHash(r.arr32()?);
    let proposer_id = NodeId(r.arr32()?);
    let proposer_lot = Lot(r.arr32()?);
    let proof_bytes = r.var_bytes()?;
    let proof: [u8; 32] = proof_bytes
        .try_into()
        .map_err(|_| DecodeError::BadProofLength(proof_bytes.len() as u32))?;
    let seed = Seed(r.arr32()?);
    let payload = Arc::new(r.var_bytes()?.to_vec());
    let block_hash = BlockHash(r.arr32()?);
    Ok(Block {
        height,
        parent_hash,
        proposer_id,
        proposer_lot,
        proposer_proof: Proof(proof),
        seed,
        payload,
        block_hash,
    })
}

/// The well-known seed the first round's lottery is drawn against.
pub fn genesis_seed() -> Seed {
    Seed(sha256_parts(&[b"genesis"]))
}

/// The unique genesis block every chain starts from.
pub fn genesis() -> Block {
    Block::new(
        0,
        BlockHash::ZERO,
        NodeId::ZERO,
        Lot::ZERO,
        Proof([0; 32]),
        genesis_seed(),
        Vec::new(),
    )
}

/// Seed for `round`, given the previous round's outcome.
///
/// If the previous round committed a block, the new seed is
/// `H(winning_lot || round)`; otherwise the previous seed is stepped with
/// `H(previous_seed || round)` so that a stalled round is retried against
/// fresh randomness. `round` is hashed as 8 bytes big-endian.
pub fn next_seed(previous_outcome: Option<&Block>, previous_seed: &Seed, round: u64) -> Seed {
    match previous_outcome {
        Some(block) => Seed(sha256_parts(&[&block.proposer_lot.0, &round.to_be_bytes()])),
        None => Seed(sha256_parts(&[&previous_seed.0, &round.to_be_bytes()])),
    }
}

/// First-attempt seed of the round following `head`.
///
/// Uniform entry point for the commit and chain-adoption paths: the round
/// after a committed block draws against `H(head_lot || round)`, and the
/// round after genesis draws against `H(genesis_seed || 1)`.
pub fn seed_after(head: &Block) -> Seed {
    let round = head.height + 1;
    if head.height == 0 {
        next_seed(None, &head.seed, round)
    } else {
        next_seed(Some(head), &head.seed, round)
    }
}

/// Map from node identifier to public key. The experiments are
/// permissioned-style: every participant knows every key up front, which is
/// what lets any node verify any proposer's lottery claim.
#[derive(Clone, Debug, Default)]
pub struct KeyDirectory {
    map: BTreeMap<NodeId, PublicKey>,
}

impl KeyDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, pk: PublicKey) -> NodeId {
        let id = crate::vrf::node_id(&pk);
        self.map.insert(id, pk);
        id
    }

    pub fn get(&self, id: &NodeId) -> Option<&PublicKey> {
        self.map.get(id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// A chain is a genesis-rooted vector of blocks in height order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Default for Chain {
    fn default() -> Self {
        Chain::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        Chain {
            blocks: vec![genesis()],
        }
    }

    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        assert!(!blocks.is_empty(), "a chain always contains genesis");
        Chain { blocks }
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().unwrap()
    }

    /// Height of the head block (genesis-only chain has height 0).
    pub fn height(&self) -> u64 {
        self.head().height
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn get(&self, height: u64) -> Option<&Block> {
        self.blocks.get(height as usize)
    }

    /// Append without validation; callers validate first.
    pub fn push(&mut self, block: Block) {
        debug_assert_eq!(block.height, self.height() + 1);
        debug_assert_eq!(block.parent_hash, self.head().block_hash);
        self.blocks.push(block);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.blocks.len() as u32).to_be_bytes());
        for b in &self.blocks {
            let eb = b.encode();
            out.extend_from_slice(&(eb.len() as u32).to_be_bytes());
            out.extend_from_slice(&eb);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Chain, DecodeError> {
        let mut r = Reader::new(bytes);
        let chain = decode_chain(&mut r)?;
        r.finish()?;
        Ok(chain)
    }
}

pub(crate) fn decode_chain(r: &mut Reader) -> Result<Chain, DecodeError> {
    let count = r.u32()?;
    if count == 0 || count > MAX_FIELD_LEN {
        return Err(DecodeError::OversizedField(count));
    }
    let mut blocks = Vec::with_capacity(count.min(1024) as usize);
    for _ in 0..count {
        let raw = r.var_bytes()?;
        blocks.push(Block::decode(raw)?);
    }
    Ok(Chain { blocks })
}

/// Check one block against the chain it claims to extend.
///
/// Validity means: it links to the current head (parent hash and height),
/// its hash recomputes, the payload respects the size cap, the proposer is
/// a known key, and the embedded (seed, lot, proof) triple passes proposal
/// sortition verification. Reputation plays no part in proposal checks.
pub fn validate_block(
    block: &Block,
    chain: &Chain,
    max_payload: usize,
    params: &SortitionParams,
    directory: &KeyDirectory,
) -> bool {
    let head = chain.head();
    if block.parent_hash != head.block_hash || block.height != head.height + 1 {
        return false;
    }
    if block.payload.len() > max_payload {
        return false;
    }
    if block.compute_hash() != block.block_hash {
        return false;
    }
    let Some(pk) = directory.get(&block.proposer_id) else {
        return false;
    };
    sortition::verify_sortition(
        pk,
        Role::Proposal,
        &block.seed,
        &block.proposer_lot,
        &block.proposer_proof,
        0.0, // reputation does not gate proposals
        params,
    )
}

/// Full validation from genesis: exact genesis match, then every block
/// checked against the prefix before it.
pub fn validate_chain(
    chain: &Chain,
    max_payload: usize,
    params: &SortitionParams,
    directory: &KeyDirectory,
) -> bool {
    if chain.blocks.is_empty() || chain.blocks[0] != genesis() {
        return false;
    }
    let mut prefix = Chain::new();
    for block in &chain.blocks[1..] {
        if !validate_block(block, &prefix, max_payload, params, directory) {
            return false;
        }
        prefix.push(block.clone());
    }
    true
}

/// Longest-valid-chain rule: adopt `candidate` only if it is fully valid
/// and strictly longer than `local`; an equal-length candidate never
/// displaces the local chain.
pub fn try_adopt(
    local: Chain,
    candidate: Chain,
    max_payload: usize,
    params: &SortitionParams,
    directory: &KeyDirectory,
) -> Chain {
    if candidate.height() <= local.height() {
        return local;
    }
    if validate_chain(&candidate, max_payload, params, directory) {
        candidate
    } else {
        local
    }
}

/// Deterministic filler payload for a round's block. Proposers of the same
/// round produce identical payloads; blocks still differ through the
/// proposer fields.
pub fn synthetic_payload(round: u64, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut state = round ^ 0xfa1a_b10c_0000_0000;
    while out.len() < len {
        let chunk = splitmix64(&mut state).to_le_bytes();
        let take = chunk.len().min(len - out.len());
        out.extend_from_slice(&chunk[..take]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sortition::{sortition, Seed};
    use crate::vrf::{keygen, KeyPair};

    fn params() -> SortitionParams {
        SortitionParams {
            threshold_proposal: 0.9,
            threshold_vote: 0.2667,
            threshold_reputation: 0.8,
        }
    }

    fn setup(n: u64) -> (Vec<KeyPair>, KeyDirectory) {
        let keys: Vec<KeyPair> = (0..n).map(keygen).collect();
        let mut dir = KeyDirectory::new();
        for k in &keys {
            dir.register(k.public_key);
        }
        (keys, dir)
    }

    /// Run the proposal lottery over `keys` and build the winning block —
    /// a miniature round without the voting layer.
    fn winning_block(chain: &Chain, seed: &Seed, keys: &[KeyPair], payload_len: usize) -> Block {
        let p = params();
        let winner = keys
            .iter()
            .filter_map(|kp| {
                let o = sortition(&kp.secret_key, Role::Proposal, seed, 0.5, &p);
                o.selected.then_some((o.lot, o.proof, kp.node_id))
            })
            .max_by_key(|(lot, _, _)| *lot)
            .expect("some key should win with enough keys");
        Block::new(
            chain.height() + 1,
            chain.head().block_hash,
            winner.2,
            winner.0,
            winner.1,
            *seed,
            synthetic_payload(chain.height() + 1, payload_len),
        )
    }

    fn grow(chain: &mut Chain, keys: &[KeyPair], rounds: u64) {
        let mut seed = next_seed(None, &genesis_seed(), chain.height() + 1);
        for _ in 0..rounds {
            let b = winning_block(chain, &seed, keys, 64);
            seed = next_seed(Some(&b), &seed, b.height + 1);
            chain.push(b);
        }
    }

    #[test]
    fn genesis_is_stable() {
        let g1 = genesis();
        let g2 = genesis();
        assert_eq!(g1, g2);
        assert_eq!(g1.height, 0);
        assert_eq!(g1.parent_hash, BlockHash::ZERO);
        assert!(g1.payload.is_empty());
        assert_eq!(g1.seed, genesis_seed());
        assert_eq!(g1.compute_hash(), g1.block_hash);
    }

    #[test]
    fn next_seed_matches_formula() {
        let g = genesis();
        // empty previous round: step the old seed
        let s1 = next_seed(None, &g.seed, 1);
        assert_eq!(
            s1.0,
            sha256_parts(&[&g.seed.0, &1u64.to_be_bytes()]),
            "round 1 from genesis is H(genesis_seed || 1)"
        );
        // committed previous round: derive from the winning lot
        let (keys, _) = setup(64);
        let mut chain = Chain::new();
        let b = winning_block(&chain, &s1, &keys, 16);
        chain.push(b.clone());
        let s2 = next_seed(Some(&b), &s1, 2);
        assert_eq!(s2.0, sha256_parts(&[&b.proposer_lot.0, &2u64.to_be_bytes()]));
        assert_ne!(s1, s2);
        // stepping the same round twice moves the seed
        assert_ne!(next_seed(None, &s1, 1), s1);
    }

    #[test]
    fn seed_after_agrees_with_next_seed_on_both_branches() {
        let g = genesis();
        assert_eq!(seed_after(&g), next_seed(None, &g.seed, 1));

        let (keys, _) = setup(64);
        let chain = Chain::new();
        let b = winning_block(&chain, &seed_after(&g), &keys, 8);
        assert_eq!(seed_after(&b), next_seed(Some(&b), &b.seed, 2));
    }

    #[test]
    fn block_encoding_round_trips() {
        let (keys, _) = setup(64);
        let chain = Chain::new();
        let seed = next_seed(None, &genesis_seed(), 1);
        let b = winning_block(&chain, &seed, &keys, 1000);
        let decoded = Block::decode(&b.encode()).unwrap();
        assert_eq!(b, decoded);
    }

    #[test]
    fn chain_encoding_round_trips() {
        let (keys, _) = setup(64);
        let mut chain = Chain::new();
        grow(&mut chain, &keys, 5);
        let decoded = Chain::decode(&chain.encode()).unwrap();
        assert_eq!(chain, decoded);
        assert_eq!(decoded.height(), 5);
    }

    #[test]
    fn decode_rejects_truncation_and_trailing_bytes() {
        let g = genesis();
        let enc = g.encode();
        for cut in [0, 1, enc.len() / 2, enc.len() - 1] {
            assert!(Block::decode(&enc[..cut]).is_err(), "cut at {cut}");
        }
        let mut padded = enc.clone();
        padded.push(0);
        assert_eq!(Block::decode(&padded), Err(DecodeError::TrailingBytes(1)));
    }

    #[test]
    fn encoding_layout_golden() {
        // Field layout is a wire contract; pin the exact bytes of a tiny block.
        let b = Block::new(
            1,
            BlockHash([0xaa; 32]),
            NodeId([0xbb; 32]),
            Lot([0xcc; 32]),
            Proof([0xdd; 32]),
            Seed([0xee; 32]),
            vec![0x01, 0x02, 0x03],
        );
        let enc = b.encode();
        let mut expected = Vec::new();
        expected.extend_from_slice(&1u64.to_be_bytes());
        expected.extend_from_slice(&[0xaa; 32]);
        expected.extend_from_slice(&[0xbb; 32]);
        expected.extend_from_slice(&[0xcc; 32]);
        expected.extend_from_slice(&32u32.to_be_bytes());
        expected.extend_from_slice(&[0xdd; 32]);
        expected.extend_from_slice(&[0xee; 32]);
        expected.extend_from_slice(&3u32.to_be_bytes());
        expected.extend_from_slice(&[1, 2, 3]);
        expected.extend_from_slice(&sha256_parts(&[&expected.clone()]));
        assert_eq!(enc, expected);
    }

    #[test]
    fn validate_accepts_honest_block() {
        let (keys, dir) = setup(64);
        let chain = Chain::new();
        let seed = next_seed(None, &genesis_seed(), 1);
        let b = winning_block(&chain, &seed, &keys, 100);
        assert!(validate_block(&b, &chain, DEFAULT_MAX_PAYLOAD, &params(), &dir));
    }

    #[test]
    fn validate_rejects_wrong_parent_or_height() {
        let (keys, dir) = setup(64);
        let chain = Chain::new();
        let seed = next_seed(None, &genesis_seed(), 1);
        let good = winning_block(&chain, &seed, &keys, 100);

        let mut wrong_parent = good.clone();
        wrong_parent.parent_hash = BlockHash([9; 32]);
        wrong_parent.block_hash = wrong_parent.compute_hash();
        assert!(!validate_block(&wrong_parent, &chain, DEFAULT_MAX_PAYLOAD, &params(), &dir));

        let mut wrong_height = good.clone();
        wrong_height.height = 2;
        wrong_height.block_hash = wrong_height.compute_hash();
        assert!(!validate_block(&wrong_height, &chain, DEFAULT_MAX_PAYLOAD, &params(), &dir));
    }

    #[test]
    fn validate_rejects_stale_hash_and_oversize_payload() {
        let (keys, dir) = setup(64);
        let chain = Chain::new();
        let seed = next_seed(None, &genesis_seed(), 1);
        let good = winning_block(&chain, &seed, &keys, 100);

        let mut tampered = good.clone();
        Arc::make_mut(&mut tampered.payload)[0] ^= 1; // hash no longer matches
        assert!(!validate_block(&tampered, &chain, DEFAULT_MAX_PAYLOAD, &params(), &dir));

        let oversize = winning_block(&chain, &seed, &keys, 100);
        assert!(!validate_block(&oversize, &chain, 99, &params(), &dir));
    }

    #[test]
    fn validate_rejects_sub_threshold_proposer() {
        let (keys, dir) = setup(200);
        let chain = Chain::new();
        let seed = next_seed(None, &genesis_seed(), 1);
        let p = params();
        // find a key whose draw *fails* the proposal lottery and force-build
        let loser = keys
            .iter()
            .map(|kp| (kp, sortition(&kp.secret_key, Role::Proposal, &seed, 0.5, &p)))
            .find(|(_, o)| !o.selected)
            .expect("plenty of losing keys at threshold 0.9");
        let b = Block::new(
            1,
            chain.head().block_hash,
            loser.0.node_id,
            loser.1.lot,
            loser.1.proof,
            seed,
            vec![],
        );
        assert!(!validate_block(&b, &chain, DEFAULT_MAX_PAYLOAD, &p, &dir));
    }

    #[test]
    fn validate_rejects_unknown_proposer() {
        let (keys, _) = setup(64);
        let empty_dir = KeyDirectory::new();
        let chain = Chain::new();
        let seed = next_seed(None, &genesis_seed(), 1);
        let b = winning_block(&chain, &seed, &keys, 10);
        assert!(!validate_block(&b, &chain, DEFAULT_MAX_PAYLOAD, &params(), &empty_dir));
    }

    #[test]
    fn try_adopt_takes_strictly_longer_valid_chains_only() {
        let (keys, dir) = setup(64);
        let mut long = Chain::new();
        grow(&mut long, &keys, 4);
        let mut short = Chain::new();
        grow(&mut short, &keys, 2);

        // strictly longer and valid: adopt
        let adopted = try_adopt(short.clone(), long.clone(), DEFAULT_MAX_PAYLOAD, &params(), &dir);
        assert_eq!(adopted, long);

        // shorter: keep local
        let kept = try_adopt(long.clone(), short.clone(), DEFAULT_MAX_PAYLOAD, &params(), &dir);
        assert_eq!(kept, long);

        // equal length: keep local
        let kept = try_adopt(long.clone(), long.clone(), DEFAULT_MAX_PAYLOAD, &params(), &dir);
        assert_eq!(kept, long);
    }

    #[test]
    fn try_adopt_rejects_corrupted_candidate() {
        let (keys, dir) = setup(64);
        let mut long = Chain::new();
        grow(&mut long, &keys, 4);
        let local = Chain::new();

        // corrupt a mid-chain block but keep its hash self-consistent, so
        // only full-chain validation catches the broken link
        let mut blocks = long.blocks().to_vec();
        blocks[2].payload = Arc::new(vec![0xff]);
        blocks[2].block_hash = blocks[2].compute_hash();
        let corrupted = Chain::from_blocks(blocks);
        let kept = try_adopt(local.clone(), corrupted, DEFAULT_MAX_PAYLOAD, &params(), &dir);
        assert_eq!(kept, local, "corrupted candidate must be refused");
    }

    #[test]
    fn validate_chain_checks_from_genesis() {
        let (keys, dir) = setup(64);
        let mut chain = Chain::new();
        grow(&mut chain, &keys, 3);
        assert!(validate_chain(&chain, DEFAULT_MAX_PAYLOAD, &params(), &dir));

        // swap genesis for a fake: rejected
        let mut blocks = chain.blocks().to_vec();
        blocks[0] = Block::new(
            0,
            BlockHash::ZERO,
            NodeId::ZERO,
            Lot::ZERO,
            Proof([0; 32]),
            Seed([7; 32]),
            vec![],
        );
        assert!(!validate_chain(
            &Chain::from_blocks(blocks),
            DEFAULT_MAX_PAYLOAD,
            &params(),
            &dir
        ));
    }

    #[test]
    fn synthetic_payload_is_deterministic_and_sized() {
        assert_eq!(synthetic_payload(5, 1000), synthetic_payload(5, 1000));
        assert_ne!(synthetic_payload(5, 1000), synthetic_payload(6, 1000));
        assert_eq!(synthetic_payload(5, 0).len(), 0);
        assert_eq!(synthetic_payload(5, 3).len(), 3);
        assert_eq!(synthetic_payload(5, 200_000).len(), 200_000);
    }
}
