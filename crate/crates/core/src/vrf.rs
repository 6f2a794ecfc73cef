//! Simulation-grade verifiable random function.
//!
//! The consensus lottery needs three properties from its VRF: deterministic
//! per-(key, input) output, uniformly distributed 256-bit lots, and
//! verifiability of a claimed (lot, proof) against a public key. This module
//! provides them with keyed SHA-256 instead of elliptic-curve machinery:
//!
//! ```text
//! pk      = H("fairlot/pk"        || sk)
//! node_id = H("fairlot/node-id"   || pk)
//! lot     = H("fairlot/vrf-lot"   || pk || input)
//! proof   = H("fairlot/vrf-proof" || pk || input)
//! ```
//!
//! Verification recomputes both digests from `(pk, input)`, so any mutation
//! of lot, proof, key, or input is rejected. The construction is *not* a
//! cryptographic VRF — anyone holding the public key can recompute lots —
//! but the simulated adversaries never forge, and every call site goes
//! through [`evaluate`]/[`verify`], which is the seam where a standards-track
//! ECVRF would slot in.

use crate::hash::{sha256_parts, to_hex};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const TAG_PK: &[u8] = b"fairlot/pk";
const TAG_NODE_ID: &[u8] = b"fairlot/node-id";
const TAG_LOT: &[u8] = b"fairlot/vrf-lot";
const TAG_PROOF: &[u8] = b"fairlot/vrf-proof";

/// 256-bit lottery draw, interpreted as a big-endian unsigned integer.
/// Byte-wise lexicographic order on the array equals numeric order, so the
/// derived `Ord` is the numeric one.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lot(pub [u8; 32]);

/// Largest representable lot (2^256 - 1).
pub const MAX_LOT: Lot = Lot([0xff; 32]);

impl Lot {
    pub const ZERO: Lot = Lot([0; 32]);

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }

    /// Approximate position of this lot in [0, 1); diagnostics only.
    pub fn fraction(&self) -> f64 {
        // Eight leading bytes give 53+ bits, plenty for reporting.
        let mut hi = [0u8; 8];
        hi.copy_from_slice(&self.0[..8]);
        u64::from_be_bytes(hi) as f64 / (u64::MAX as f64 + 1.0)
    }
}

impl std::fmt::Debug for Lot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Lot({}…)", &self.to_hex()[..12])
    }
}

/// Opaque verification companion to a lot.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Proof(pub [u8; 32]);

impl std::fmt::Debug for Proof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Proof({}…)", &to_hex(&self.0)[..12])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey(pub [u8; 32]);

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // never print key material
        write!(f, "SecretKey(…)")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({}…)", &self.to_hex()[..12])
    }
}

/// Stable node identifier: hash of the public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub [u8; 32]);

impl NodeId {
    pub const ZERO: NodeId = NodeId([0; 32]);

    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }

    /// Short prefix used in event logs and debug output.
    pub fn short_hex(&self) -> String {
        to_hex(&self.0[..8])
    }
}

impl std::fmt::Debug for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NodeId({})", self.short_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub secret_key: SecretKey,
    pub public_key: PublicKey,
    pub node_id: NodeId,
}

/// Lot plus its proof, as returned by [`evaluate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VrfOutput {
    pub lot: Lot,
    pub proof: Proof,
}

/// Derive the public key for a secret key.
pub fn public_key(sk: &SecretKey) -> PublicKey {
    PublicKey(sha256_parts(&[TAG_PK, &sk.0]))
}

/// Derive the node identifier for a public key.
pub fn node_id(pk: &PublicKey) -> NodeId {
    NodeId(sha256_parts(&[TAG_NODE_ID, &pk.0]))
}

/// Deterministic key generation from a 64-bit seed.
pub fn keygen(rng_seed: u64) -> KeyPair {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let mut sk = [0u8; 32];
    rng.fill_bytes(&mut sk);
    let secret_key = SecretKey(sk);
    let public_key = public_key(&secret_key);
    KeyPair {
        secret_key,
        public_key,
        node_id: node_id(&public_key),
    }
}

/// Evaluate the VRF on `input` under `sk`.
pub fn evaluate(sk: &SecretKey, input: &[u8]) -> VrfOutput {
    let pk = public_key(sk);
    VrfOutput {
        lot: Lot(sha256_parts(&[TAG_LOT, &pk.0, input])),
        proof: Proof(sha256_parts(&[TAG_PROOF, &pk.0, input])),
    }
}

/// Check that `output` is exactly what [`evaluate`] produces for the key
/// behind `pk` on `input`.
pub fn verify(pk: &PublicKey, input: &[u8], output: &VrfOutput) -> bool {
    let lot = Lot(sha256_parts(&[TAG_LOT, &pk.0, input]));
    let proof = Proof(sha256_parts(&[TAG_PROOF, &pk.0, input]));
    lot == output.lot && proof == output.proof
}
