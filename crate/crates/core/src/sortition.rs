//! Cryptographic sortition: who may propose, who may vote.
//!
//! Every node evaluates the VRF on `seed || role` each round. The draw is a
//! 256-bit lot; selection is a pure threshold comparison, so no coordination
//! or communication is needed to run the lottery. Proposal selection is open
//! to every node; vote (committee) selection additionally requires the
//! node's reputation to clear a floor, which is what keeps the committee
//! inside the high-reputation set.
//!
//! Thresholds are fractions in [0, 1]. The comparison bound is computed in
//! exact integer arithmetic as `floor(threshold * 2^256)` clamped to
//! `2^256 - 1`, and a lot is selected when `lot >= bound` (inclusive). This
//! rounding rule is part of the wire-level contract: proposer and verifier
//! must agree bit-for-bit.

use crate::hash::to_hex;
use crate::vrf::{self, Lot, Proof, PublicKey, SecretKey, MAX_LOT};
use serde::{Deserialize, Serialize};

/// Round seed: the shared randomness each round's lottery is drawn against.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seed(pub [u8; 32]);

impl Seed {
    pub fn to_hex(&self) -> String {
        to_hex(&self.0)
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Seed({}…)", &self.to_hex()[..12])
    }
}

/// Lottery role, folded into the VRF input so the same seed yields
/// independent draws for proposing and voting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Proposal,
    Vote,
}

impl Role {
    /// Fixed serialization of the role inside VRF inputs.
    pub fn tag(&self) -> &'static [u8] {
        match self {
            Role::Proposal => b"PROPOSAL",
            Role::Vote => b"VOTE",
        }
    }
}

/// The exact byte string fed to the VRF for a round's lottery.
pub fn vrf_input(seed: &Seed, role: Role) -> Vec<u8> {
    let tag = role.tag();
    let mut input = Vec::with_capacity(32 + tag.len());
    input.extend_from_slice(&seed.0);
    input.extend_from_slice(tag);
    input
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortitionParams {
    /// Fraction of the lot space a proposal draw must clear (e.g. 0.9 keeps
    /// roughly the top 10% of draws).
    pub threshold_proposal: f64,
    /// Fraction a committee draw must clear; usually derived with
    /// [`calibrate_vote_threshold`].
    pub threshold_vote: f64,
    /// Minimum reputation score for committee eligibility.
    pub threshold_reputation: f64,
}

impl SortitionParams {
    pub fn validate(&self) -> Result<(), SortitionError> {
        for (name, v) in [
            ("threshold_proposal", self.threshold_proposal),
            ("threshold_vote", self.threshold_vote),
            ("threshold_reputation", self.threshold_reputation),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SortitionError::ThresholdOutOfRange { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SortitionError {
    #[error("{name} must lie in [0, 1], got {value}")]
    ThresholdOutOfRange { name: &'static str, value: f64 },
    #[error("cannot calibrate a committee of {target} from {eligible} eligible nodes")]
    BadCalibration { eligible: u32, target: u32 },
}

/// Result of running the lottery for one (node, role, seed) triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SortitionOutcome {
    pub role: Role,
    pub selected: bool,
    pub lot: Lot,
    pub proof: Proof,
}

/// `floor(threshold * 2^256)`, clamped to `2^256 - 1`, computed exactly.
///
/// The f64 is decomposed into its integer mantissa and exponent, so no
/// precision is lost to floating-point multiplication; the result is the
/// same on every platform that agrees on IEEE 754 parsing of the threshold.
pub fn threshold_bound(threshold: f64) -> Lot {
    debug_assert!(threshold.is_finite() && (0.0..=1.0).contains(&threshold));
    if threshold <= 0.0 {
        return Lot::ZERO;
    }
    if threshold >= 1.0 {
        return MAX_LOT;
    }
    let bits = threshold.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    // value = mantissa * 2^exp
    let (mantissa, exp): (u64, i64) = if raw_exp == 0 {
        (frac, -1074) // subnormal
    } else {
        (frac | (1 << 52), raw_exp - 1075)
    };
    // want floor(mantissa * 2^(exp + 256))
    let mut shift = exp + 256;
    let mut m = mantissa as u128;
    if shift < 0 {
        if -shift >= 64 {
            return Lot::ZERO; // mantissa has 53 bits; it is gone entirely
        }
        m >>= (-shift) as u32;
        shift = 0;
        if m == 0 {
            return Lot::ZERO;
        }
    }
    // Scatter m * 2^shift into a big-endian 32-byte array. threshold < 1
    // guarantees the value fits below 2^256.
    let byte_off = (shift / 8) as usize;
    let v = m << (shift % 8) as u32; // m < 2^53, sub-byte shift keeps it in u128
    let mut out = [0u8; 32];
    for (k, &byte) in v.to_le_bytes().iter().enumerate() {
        if byte != 0 {
            out[31 - (byte_off + k)] = byte;
        }
    }
    Lot(out)
}

/// Inclusive threshold test shared by selection and verification.
pub fn lot_passes(lot: &Lot, threshold: f64) -> bool {
    *lot >= threshold_bound(threshold)
}

/// Run the lottery for one node.
///
/// Proposal role ignores reputation; vote role requires
/// `reputation >= threshold_reputation` *and* a passing lot.
pub fn sortition(
    sk: &SecretKey,
    role: Role,
    seed: &Seed,
    reputation: f64,
    params: &SortitionParams,
) -> SortitionOutcome {
    let out = vrf::evaluate(sk, &vrf_input(seed, role));
    let selected = match role {
        Role::Proposal => lot_passes(&out.lot, params.threshold_proposal),
        Role::Vote => {
            reputation >= params.threshold_reputation
                && lot_passes(&out.lot, params.threshold_vote)
        }
    };
    SortitionOutcome {
        role,
        selected,
        lot: out.lot,
        proof: out.proof,
    }
}

/// Verify a claimed sortition result: the VRF output must verify under the
/// claimed public key and input, and the same threshold rules must pass.
pub fn verify_sortition(
    pk: &PublicKey,
    role: Role,
    seed: &Seed,
    lot: &Lot,
    proof: &Proof,
    reputation: f64,
    params: &SortitionParams,
) -> bool {
    let output = vrf::VrfOutput {
        lot: *lot,
        proof: *proof,
    };
    if !vrf::verify(pk, &vrf_input(seed, role), &output) {
        return false;
    }
    match role {
        Role::Proposal => lot_passes(lot, params.threshold_proposal),
        Role::Vote => {
            reputation >= params.threshold_reputation && lot_passes(lot, params.threshold_vote)
        }
    }
}

/// Pick the vote threshold that yields an expected committee of
/// `target_committee` out of `eligible` high-reputation nodes.
///
/// Each eligible node passes with probability `1 - threshold`, so the
/// expected committee is `eligible * (1 - threshold)`; solving gives
/// `threshold = 1 - target / eligible`.
pub fn calibrate_vote_threshold(
    eligible: u32,
    target_committee: u32,
) -> Result<f64, SortitionError> {
    if eligible == 0 || target_committee > eligible {
        return Err(SortitionError::BadCalibration {
            eligible,
            target: target_committee,
        });
    }
    Ok(1.0 - target_committee as f64 / eligible as f64)
}
