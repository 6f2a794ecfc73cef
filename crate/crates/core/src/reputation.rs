//! Static reputation scores.
//!
//! Reputation is an input to the committee lottery, not something the
//! protocol updates: each experiment fixes a score per node up front
//! (typically a small set of high-reputation nodes at 0.9 and everyone else
//! at 0.5). The only consumer is the vote-role gate — a node below the
//! reputation threshold can never enter the committee no matter what it
//! draws.
//!
//! Lookups of unknown nodes are a hard error rather than a default score;
//! silently treating a stranger as reputation 0 would hide wiring bugs in
//! the harness.

use crate::vrf::NodeId;
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReputationError {
    #[error("no reputation entry for node {0}")]
    UnknownNode(String),
    #[error("reputation score {score} for node {node} outside [0, 1]")]
    ScoreOutOfRange { node: String, score: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReputationTable {
    scores: BTreeMap<NodeId, f64>,
}

impl ReputationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a table from (node, score) pairs, rejecting out-of-range scores.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (NodeId, f64)>,
    ) -> Result<Self, ReputationError> {
        let mut t = Self::new();
        for (node, score) in pairs {
            t.insert(node, score)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, node: NodeId, score: f64) -> Result<(), ReputationError> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(ReputationError::ScoreOutOfRange {
                node: node.short_hex(),
                score,
            });
        }
        self.scores.insert(node, score);
        Ok(())
    }

    /// Score for a node; unknown nodes are an error, never an implicit 0.
    pub fn get(&self, node: &NodeId) -> Result<f64, ReputationError> {
        self.scores
            .get(node)
            .copied()
            .ok_or_else(|| ReputationError::UnknownNode(node.short_hex()))
    }

    /// Nodes whose score clears `threshold`, in stable (id) order.
    pub fn eligible_voters(&self, threshold: f64) -> Vec<NodeId> {
        self.scores
            .iter()
            .filter(|(_, &s)| s >= threshold)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}
