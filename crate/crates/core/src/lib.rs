//! Deterministic simulator for a fair, lightweight proof-of-stake-style
//! consensus protocol: VRF lottery for block proposal, reputation-gated
//! committee voting, gossip dissemination, and an experiment harness that
//! measures throughput, proposer fairness, and robustness under adversarial
//! forwarding behavior.

pub mod hash;
pub mod ledger;
pub mod harness;
pub mod netsim;
pub mod protocol;
pub mod reputation;
pub mod sortition;
pub mod vrf;
