//! Consensus protocol: wire messages and the per-node state machine.

pub mod message;
pub mod node;

pub use message::{Message, MessageBody, MessageKind};
pub use node::{Action, Node, NodeCounters, ParamsError, Phase, ProtocolParams, TimerKind};

use crate::ledger::KeyDirectory;
use std::collections::HashMap;

/// Memo for the statically checkable (node-independent) part of message
/// verification: the signature over the wire bytes, and for block bodies the
/// payload cap plus hash consistency.
///
/// Keyed by the SHA-256 digest of the exact encoded message, so a result can
/// only ever be reused for byte-identical traffic; any mutation changes the
/// digest and takes the full verification path. With one shared cache per
/// simulation, a 200 KB block body is hashed once instead of once per
/// receiving node, without weakening what any node accepts.
#[derive(Debug, Default)]
pub struct VerifyCache {
    map: HashMap<[u8; 32], bool>,
}

impl VerifyCache {
    pub fn statically_valid(
        &mut self,
        digest: &[u8; 32],
        msg: &Message,
        directory: &KeyDirectory,
        max_payload: usize,
    ) -> bool {
        if let Some(&ok) = self.map.get(digest) {
            return ok;
        }
        let ok = Self::compute(msg, directory, max_payload);
        self.map.insert(*digest, ok);
        ok
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn compute(msg: &Message, directory: &KeyDirectory, max_payload: usize) -> bool {
        let Some(pk) = directory.get(&msg.sender) else {
            return false;
        };
        if !msg.verify_auth(pk) {
            return false;
        }
        match &msg.body {
            MessageBody::BlockBody(block) => {
                block.payload.len() <= max_payload && block.hash_is_consistent()
            }
            _ => true,
        }
    }
}
