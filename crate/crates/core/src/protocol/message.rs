//! Consensus messages and their canonical wire format.
//!
//! Every message travels as:
//!
//! ```text
//! message := kind:u8 || round:u64 || sender_id:32
//!         || body_len:u32 || body || auth_len:u32 || auth
//! ```
//!
//! with all integers big-endian. Per-kind body layouts:
//!
//! ```text
//! proposal-announce := block_hash:32 || lot:32 || proof_len:u32 || proof
//! block-body        := block                      (ledger encoding)
//! vote              := voted_block_hash:32 || voted_proposer_lot:32
//!                   || voter_lot:32 || proof_len:u32 || voter_proof
//! sync-request      := height:u64 || nonce:u64
//! sync-response     := chain                      (ledger encoding)
//! ```
//!
//! `auth` is a 32-byte authenticator over (kind, round, body) bound to the
//! sender's public key; any single-byte change to kind, round, body, or auth
//! makes verification fail. Like the VRF it is a keyed-hash stand-in with
//! the interface of a real signature.

use crate::hash::sha256_parts;
use crate::ledger::{Block, Chain, DecodeError, Reader};
use crate::vrf::{self, Lot, NodeId, Proof, PublicKey, SecretKey};

const TAG_AUTH: &[u8] = b"fairlot/msg-auth";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    ProposalAnnounce,
    BlockBody,
    Vote,
    SyncRequest,
    SyncResponse,
}

impl MessageKind {
    pub fn byte(&self) -> u8 {
        match self {
            MessageKind::ProposalAnnounce => 1,
            MessageKind::BlockBody => 2,
            MessageKind::Vote => 3,
            MessageKind::SyncRequest => 4,
            MessageKind::SyncResponse => 5,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => MessageKind::ProposalAnnounce,
            2 => MessageKind::BlockBody,
            3 => MessageKind::Vote,
            4 => MessageKind::SyncRequest,
            5 => MessageKind::SyncResponse,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::ProposalAnnounce => "proposal-announce",
            MessageKind::BlockBody => "block-body",
            MessageKind::Vote => "vote",
            MessageKind::SyncRequest => "sync-request",
            MessageKind::SyncResponse => "sync-response",
        }
    }

    /// Dissemination kinds flood through the gossip overlay; the sync pair
    /// is directed traffic and is never re-forwarded.
    pub fn is_gossip(&self) -> bool {
        matches!(
            self,
            MessageKind::ProposalAnnounce | MessageKind::BlockBody | MessageKind::Vote
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MessageBody {
    /// First dissemination stage: the lottery claim travels without the
    /// block payload, so relays only pay for 32-byte hashes while ranking
    /// proposals.
    ProposalAnnounce {
        block_hash: crate::ledger::BlockHash,
        lot: Lot,
        proof: Proof,
    },
    /// Second stage: the full block, sent only by a proposer that still
    /// believes it holds the highest lot at the end of the proposal phase.
    BlockBody(Block),
    Vote {
        voted_block_hash: crate::ledger::BlockHash,
        /// Lot of the proposal being voted for, so late observers can rank
        /// what was voted without having seen the announcement.
        voted_proposer_lot: Lot,
        voter_lot: Lot,
        voter_proof: Proof,
    },
    SyncRequest {
        /// Requester's current chain height; responders with nothing longer
        /// stay silent.
        height: u64,
        /// Per-node counter keeping byte-identical retries apart (the round
        /// number does not advance while a round is being retried).
        nonce: u64,
    },
    SyncResponse(Chain),
}

impl MessageBody {
    pub fn kind(&self) -> MessageKind {
        match self {
            MessageBody::ProposalAnnounce { .. } => MessageKind::ProposalAnnounce,
            MessageBody::BlockBody(_) => MessageKind::BlockBody,
            MessageBody::Vote { .. } => MessageKind::Vote,
            MessageBody::SyncRequest { .. } => MessageKind::SyncRequest,
            MessageBody::SyncResponse(_) => MessageKind::SyncResponse,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            MessageBody::ProposalAnnounce {
                block_hash,
                lot,
                proof,
            } => {
                let mut out = Vec::with_capacity(32 + 32 + 4 + 32);
                out.extend_from_slice(&block_hash.0);
                out.extend_from_slice(&lot.0);
                out.extend_from_slice(&(proof.0.len() as u32).to_be_bytes());
                out.extend_from_slice(&proof.0);
                out
            }
            MessageBody::BlockBody(block) => block.encode(),
            MessageBody::Vote {
                voted_block_hash,
                voted_proposer_lot,
                voter_lot,
                voter_proof,
            } => {
                let mut out = Vec::with_capacity(32 * 3 + 4 + 32);
                out.extend_from_slice(&voted_block_hash.0);
                out.extend_from_slice(&voted_proposer_lot.0);
                out.extend_from_slice(&voter_lot.0);
                out.extend_from_slice(&(voter_proof.0.len() as u32).to_be_bytes());
                out.extend_from_slice(&voter_proof.0);
                out
            }
            MessageBody::SyncRequest { height, nonce } => {
                let mut out = Vec::with_capacity(16);
                out.extend_from_slice(&height.to_be_bytes());
                out.extend_from_slice(&nonce.to_be_bytes());
                out
            }
            MessageBody::SyncResponse(chain) => chain.encode(),
        }
    }

    pub fn decode(kind: MessageKind, bytes: &[u8]) -> Result<MessageBody, DecodeError> {
        let mut r = Reader::new(bytes);
        let body = match kind {
            MessageKind::ProposalAnnounce => {
                let block_hash = crate::ledger::BlockHash(r.arr32()?);
                let lot = Lot(r.arr32()?);
                let proof_bytes = r.var_bytes()?;
                let proof: [u8; 32] = proof_bytes
                    .try_into()
                    .map_err(|_| DecodeError::BadProofLength(proof_bytes.len() as u32))?;
                MessageBody::ProposalAnnounce {
                    block_hash,
                    lot,
                    proof: Proof(proof),
                }
            }
            MessageKind::BlockBody => MessageBody::BlockBody(Block::decode(bytes)?),
            MessageKind::Vote => {
                let voted_block_hash = crate::ledger::BlockHash(r.arr32()?);
                let voted_proposer_lot = Lot(r.arr32()?);
                let voter_lot = Lot(r.arr32()?);
                let proof_bytes = r.var_bytes()?;
                let proof: [u8; 32] = proof_bytes
                    .try_into()
                    .map_err(|_| DecodeError::BadProofLength(proof_bytes.len() as u32))?;
                MessageBody::Vote {
                    voted_block_hash,
                    voted_proposer_lot,
                    voter_lot,
                    voter_proof: Proof(proof),
                }
            }
            MessageKind::SyncRequest => MessageBody::SyncRequest {
                height: r.u64()?,
                nonce: r.u64()?,
            },
            MessageKind::SyncResponse => MessageBody::SyncResponse(Chain::decode(bytes)?),
        };
        // Block and Chain consumed the whole slice themselves.
        if !matches!(kind, MessageKind::BlockBody | MessageKind::SyncResponse) {
            r.finish()?;
        }
        Ok(body)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub round: u64,
    pub sender: NodeId,
    pub body: MessageBody,
    /// Authenticator over (kind, round, body) under the sender's key.
    pub auth: [u8; 32],
}

fn compute_auth(pk: &PublicKey, kind: MessageKind, round: u64, body_bytes: &[u8]) -> [u8; 32] {
    sha256_parts(&[
        TAG_AUTH,
        &pk.0,
        &[kind.byte()],
        &round.to_be_bytes(),
        body_bytes,
    ])
}

impl Message {
    /// Build and authenticate a message as `sk`'s owner.
    pub fn sign(sk: &SecretKey, round: u64, body: MessageBody) -> Message {
        let pk = vrf::public_key(sk);
        let auth = compute_auth(&pk, body.kind(), round, &body.encode());
        Message {
            round,
            sender: vrf::node_id(&pk),
            body,
            auth,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.body.kind()
    }

    /// Verify the authenticator against the sender's claimed public key.
    /// Also pins the sender id to that key.
    pub fn verify_auth(&self, pk: &PublicKey) -> bool {
        vrf::node_id(pk) == self.sender
            && compute_auth(pk, self.kind(), self.round, &self.body.encode()) == self.auth
    }

    pub fn encode(&self) -> Vec<u8> {
        let body = self.body.encode();
        let mut out = Vec::with_capacity(1 + 8 + 32 + 4 + body.len() + 4 + 32);
        out.push(self.kind().byte());
        out.extend_from_slice(&self.round.to_be_bytes());
        out.extend_from_slice(&self.sender.0);
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out.extend_from_slice(&(self.auth.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.auth);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
        let mut r = Reader::new(bytes);
        let kind_byte = r.u8()?;
        let kind = MessageKind::from_byte(kind_byte).ok_or(DecodeError::UnknownKind(kind_byte))?;
        let round = r.u64()?;
        let sender = NodeId(r.arr32()?);
        let body_bytes = r.var_bytes()?;
        let body = MessageBody::decode(kind, body_bytes)?;
        let auth_bytes = r.var_bytes()?;
        let auth: [u8; 32] = auth_bytes
            .try_into()
            .map_err(|_| DecodeError::BadProofLength(auth_bytes.len() as u32))?;
        r.finish()?;
        Ok(Message {
            round,
            sender,
            body,
            auth,
        })
    }

    /// Digest identifying this exact message on the wire; used for gossip
    /// dedup and event logs.
    pub fn digest(&self) -> [u8; 32] {
        sha256_parts(&[&self.encode()])
    }
}
