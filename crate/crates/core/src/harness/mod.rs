//! Experiment harness: declarative experiment configs, replicate
//! execution (sequential or data-parallel), end-of-run metrics, CSV
//! emission, and log-based safety checking.
//!
//! An [`ExperimentConfig`] describes one table cell: network size,
//! malicious fraction, attack behaviors, duration, and a base seed. The
//! harness expands it into `replicates` independent simulator runs whose
//! seeds derive deterministically from `(base_seed, node_count,
//! malicious_fraction, replicate)`, so any row of any results file can be
//! reproduced in isolation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::hash::sha256_parts;
use crate::netsim::{
    self, AdversarySpec, BehaviorSet, EventKind, EventLog, LogLevel, SimConfig, SimError,
    SimResult, Topology,
};
use crate::protocol::ProtocolParams;
use crate::vrf::NodeId;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How reputation scores are laid out across node indices.
///
/// The first `pool` nodes carry `high` reputation and form the committee-
/// eligible set; everyone else sits at `baseline`. Malicious nodes (always
/// taken from the tail of the index range) are demoted to `malicious`,
/// keeping them below the committee bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReputationLayout {
    pub pool: usize,
    pub high: f64,
    pub baseline: f64,
    pub malicious: f64,
}

impl Default for ReputationLayout {
    fn default() -> Self {
        ReputationLayout {
            pool: 15,
            high: 0.9,
            baseline: 0.5,
            malicious: 0.2,
        }
    }
}

/// One experiment: a point in the (network size, adversary) grid, run
/// `replicates` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub id: String,
    pub node_count: usize,
    pub malicious_fraction: f64,
    pub replicates: u32,
    pub duration_ms: u64,
    pub base_seed: u64,
    pub topology: Topology,
    pub protocol: ProtocolParams,
    pub behaviors: BehaviorSet,
    pub reputation: ReputationLayout,
    pub log_level: LogLevel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            id: String::new(),
            node_count: 100,
            malicious_fraction: 0.0,
            replicates: 5,
            duration_ms: 600_000,
            base_seed: 42,
            topology: Topology::default(),
            protocol: ProtocolParams::default(),
            behaviors: BehaviorSet::none(),
            reputation: ReputationLayout::default(),
            log_level: LogLevel::CommitsOnly,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HarnessError {
    #[error("experiment id must not be empty")]
    EmptyId,
    #[error("experiment needs at least one replicate")]
    NoReplicates,
    #[error("malicious fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("reputation pool {pool} exceeds node count {nodes}")]
    PoolTooLarge { pool: usize, nodes: usize },
    #[error("{malicious} malicious nodes would overlap the {pool}-node reputation pool (only {spare} spare)")]
    MaliciousOverlapPool {
        malicious: usize,
        pool: usize,
        spare: usize,
    },
    #[error("reputation score {0} outside [0, 1]")]
    BadReputation(f64),
    #[error("pool reputation {high} sits below the committee threshold {threshold}")]
    PoolBelowThreshold { high: f64, threshold: f64 },
    #[error("malicious reputation {rep} must stay below the committee threshold {threshold}")]
    MaliciousAboveThreshold { rep: f64, threshold: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scenario file: {0}")]
    Scenario(String),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.id.is_empty() {
            return Err(HarnessError::EmptyId);
        }
        if self.replicates == 0 {
            return Err(HarnessError::NoReplicates);
        }
        let f = self.malicious_fraction;
        if !(0.0..=1.0).contains(&f) || f.is_nan() {
            return Err(HarnessError::BadFraction(f));
        }
        let lay = self.reputation;
        for score in [lay.high, lay.baseline, lay.malicious] {
            if !(0.0..=1.0).contains(&score) || score.is_nan() {
                return Err(HarnessError::BadReputation(score));
            }
        }
        if lay.pool > self.node_count {
            return Err(HarnessError::PoolTooLarge {
                pool: lay.pool,
                nodes: self.node_count,
            });
        }
        let spare = self.node_count - lay.pool;
        let malicious = self.malicious_count();
        if malicious > spare {
            return Err(HarnessError::MaliciousOverlapPool {
                malicious,
                pool: lay.pool,
                spare,
            });
        }
        let threshold = self.protocol.sortition.threshold_reputation;
        if lay.high < threshold {
            return Err(HarnessError::PoolBelowThreshold {
                high: lay.high,
                threshold,
            });
        }
        if malicious > 0 && lay.malicious >= threshold {
            return Err(HarnessError::MaliciousAboveThreshold {
                rep: lay.malicious,
                threshold,
            });
        }
        Ok(())
    }

    pub fn malicious_count(&self) -> usize {
        (self.malicious_fraction * self.node_count as f64).round() as usize
    }

    /// Reputation per node index: the high pool first, baseline after, with
    /// the malicious tail demoted.
    pub fn reputations(&self) -> Vec<f64> {
        let lay = self.reputation;
        let mut reps = vec![lay.baseline; self.node_count];
        for r in reps.iter_mut().take(lay.pool) {
            *r = lay.high;
        }
        let malicious = self.malicious_count();
        for r in reps.iter_mut().skip(self.node_count - malicious) {
            *r = lay.malicious;
        }
        reps
    }

    /// Per-replicate RNG seed: a hash of the experiment coordinates, so
    /// replicates are independent but individually reproducible.
    pub fn replicate_seed(&self, replicate: u32) -> u64 {
        let digest = sha256_parts(&[
            b"fairlot/replicate",
            &self.base_seed.to_be_bytes(),
            &(self.node_count as u64).to_be_bytes(),
            &self.malicious_fraction.to_bits().to_be_bytes(),
            &replicate.to_be_bytes(),
        ]);
        u64::from_be_bytes(digest[..8].try_into().expect("8-byte slice"))
    }

    pub fn sim_config(&self, replicate: u32) -> SimConfig {
        let malicious = self.malicious_count();
        SimConfig {
            node_count: self.node_count,
            topology: self.topology.clone(),
            protocol: self.protocol.clone(),
            reputations: self.reputations(),
            adversary: AdversarySpec {
                malicious: (self.node_count - malicious..self.node_count).collect(),
                behaviors: self.behaviors.clone(),
            },
            rng_seed: self.replicate_seed(replicate),
            horizon_ms: self.duration_ms,
            log_level: self.log_level,
        }
    }
}

/// End-of-run measurements for one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Metrics {
    /// Height of the accepted chain (the head held by the most nodes).
    pub blocks_added: u64,
    /// Distinct proposers among the accepted chain's blocks.
    pub proposer_diversity: u64,
    /// Honest nodes whose head equals the accepted head.
    pub nodes_in_sync: u64,
    /// Conflicting honest commits and honest reorgs found in the log.
    pub safety_violations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub id: String,
    pub node_count: usize,
    pub malicious_fraction: f64,
    pub replicate: u32,
    pub rng_seed: u64,
    pub metrics: Metrics,
}

/// Count safety violations evident in a structural event log: distinct
/// blocks committed by honest nodes at the same height, plus honest chain
/// reorganizations. Malicious nodes (marked by role records at setup) are
/// exempt — an adversary confusing itself is not a protocol failure.
pub fn check_safety(log: &EventLog) -> u64 {
    let malicious: BTreeSet<NodeId> = log
        .iter_kind(EventKind::RoleMalicious)
        .map(|r| r.node)
        .collect();
    let mut by_height: BTreeMap<u64, BTreeSet<[u8; 32]>> = BTreeMap::new();
    let mut violations = 0;
    for rec in log.records() {
        if malicious.contains(&rec.node) {
            continue;
        }
        match rec.kind {
            EventKind::Commit => {
                by_height.entry(rec.round).or_default().insert(rec.hash);
            }
            EventKind::Reorg => violations += 1,
            _ => {}
        }
    }
    for hashes in by_height.values() {
        violations += hashes.len() as u64 - 1;
    }
    violations
}

/// Derive metrics from a finished run.
///
/// The accepted chain is the plurality head across all nodes; ties break
/// toward the higher chain, then the lexicographically smaller head hash.
pub fn compute_metrics(result: &SimResult) -> Metrics {
    let mut tally: BTreeMap<[u8; 32], (usize, u64)> = BTreeMap::new();
    for node in &result.nodes {
        let head = node.chain().head();
        let entry = tally.entry(head.block_hash.0).or_insert((0, head.height));
        entry.0 += 1;
    }
    let (&accepted_head, &(_, blocks_added)) = tally
        .iter()
        .max_by(|(ha, (ca, hha)), (hb, (cb, hhb))| {
            (ca, hha, std::cmp::Reverse(*ha)).cmp(&(cb, hhb, std::cmp::Reverse(*hb)))
        })
        .expect("at least one node");

    let accepted = result
        .nodes
        .iter()
        .find(|n| n.chain().head().block_hash.0 == accepted_head)
        .expect("tally came from these nodes")
        .chain();
    let proposer_diversity = accepted
        .blocks()
        .iter()
        .skip(1) // genesis has no proposer
        .map(|b| b.proposer_id)
        .collect::<BTreeSet<_>>()
        .len() as u64;

    let malicious_ids: BTreeSet<NodeId> = result
        .malicious
        .iter()
        .map(|&i| result.keypairs[i].node_id)
        .collect();
    let nodes_in_sync = result
        .nodes
        .iter()
        .filter(|n| !malicious_ids.contains(&n.id()))
        .filter(|n| n.chain().head().block_hash.0 == accepted_head)
        .count() as u64;

    Metrics {
        blocks_added,
        proposer_diversity,
        nodes_in_sync,
        safety_violations: check_safety(&result.log),
    }
}

pub fn run_replicate(
    exp: &ExperimentConfig,
    replicate: u32,
) -> Result<ReplicateResult, HarnessError> {
    run_replicate_traced(exp, replicate).map(|(row, _)| row)
}

/// Like [`run_replicate`] but also hands back the replicate's event log,
/// for callers that export or re-audit traces.
pub fn run_replicate_traced(
    exp: &ExperimentConfig,
    replicate: u32,
) -> Result<(ReplicateResult, EventLog), HarnessError> {
    let result = netsim::run(exp.sim_config(replicate))?;
    let row = ReplicateResult {
        id: exp.id.clone(),
        node_count: exp.node_count,
        malicious_fraction: exp.malicious_fraction,
        replicate,
        rng_seed: exp.replicate_seed(replicate),
        metrics: compute_metrics(&result),
    };
    Ok((row, result.log))
}

/// Whether replicates run on one thread or across the rayon pool. Without
/// the `parallel` feature both modes execute sequentially.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

pub fn run_experiment(
    exp: &ExperimentConfig,
    mode: ExecMode,
) -> Result<Vec<ReplicateResult>, HarnessError> {
    exp.validate()?;
    match mode {
        ExecMode::Sequential => (0..exp.replicates).map(|k| run_replicate(exp, k)).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..exp.replicates)
                    .into_par_iter()
                    .map(|k| run_replicate(exp, k))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..exp.replicates).map(|k| run_replicate(exp, k)).collect()
            }
        }
    }
}

/// Run every experiment of a scenario, in order; replicate rows keep
/// experiment order and replicate order, so output is deterministic.
pub fn run_scenario(
    experiments: &[ExperimentConfig],
    mode: ExecMode,
) -> Result<Vec<ReplicateResult>, HarnessError> {
    let mut rows = Vec::new();
    for exp in experiments {
        rows.extend(run_experiment(exp, mode)?);
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "experiment_id,nodes,malicious_fraction,replicate,blocks_added,\
                              proposer_diversity,nodes_in_sync,safety_violations,rng_seed";

/// Raw per-replicate rows as CSV, one line per replicate plus the header.
pub fn emit_results(rows: &[ReplicateResult]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.id,
            r.node_count,
            r.malicious_fraction,
            r.replicate,
            m.blocks_added,
            m.proposer_diversity,
            m.nodes_in_sync,
            m.safety_violations,
            r.rng_seed
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Per-experiment aggregate: metric means rounded to the nearest integer
/// (matching how result tables are reported), violations summed.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub id: String,
    pub node_count: usize,
    pub malicious_fraction: f64,
    pub replicates: usize,
    pub blocks_added: u64,
    pub proposer_diversity: u64,
    pub nodes_in_sync: u64,
    pub safety_violations: u64,
}

pub fn summarize(rows: &[ReplicateResult]) -> Vec<Summary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&ReplicateResult>> = BTreeMap::new();
    for r in rows {
        if !groups.contains_key(r.id.as_str()) {
            order.push(&r.id);
        }
        groups.entry(&r.id).or_default().push(r);
    }
    let mean = |vals: &[u64]| -> u64 {
        (vals.iter().sum::<u64>() as f64 / vals.len() as f64).round() as u64
    };
    order
        .into_iter()
        .map(|id| {
            let rs = &groups[id];
            Summary {
                id: id.to_string(),
                node_count: rs[0].node_count,
                malicious_fraction: rs[0].malicious_fraction,
                replicates: rs.len(),
                blocks_added: mean(&rs.iter().map(|r| r.metrics.blocks_added).collect::<Vec<_>>()),
                proposer_diversity: mean(
                    &rs.iter()
                        .map(|r| r.metrics.proposer_diversity)
                        .collect::<Vec<_>>(),
                ),
                nodes_in_sync: mean(
                    &rs.iter().map(|r| r.metrics.nodes_in_sync).collect::<Vec<_>>(),
                ),
                safety_violations: rs.iter().map(|r| r.metrics.safety_violations).sum(),
            }
        })
        .collect()
}

/// Aligned text table of summaries, for terminal output.
pub fn summary_table(summaries: &[Summary]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<20} {:>5} {:>9} {:>6} {:>9} {:>7} {:>10}",
        "experiment", "nodes", "mal_frac", "blocks", "diversity", "in_sync", "violations"
    )
    .expect("writing to a String cannot fail");
    for s in summaries {
        writeln!(
            out,
            "{:<20} {:>5} {:>9} {:>6} {:>9} {:>7} {:>10}",
            s.id,
            s.node_count,
            s.malicious_fraction,
            s.blocks_added,
            s.proposer_diversity,
            s.nodes_in_sync,
            s.safety_violations
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// The fairness sweep: honest networks of growing size, five replicates
/// each, ten minutes of simulated time.
pub fn fairness_scenario(base_seed: u64) -> Vec<ExperimentConfig> {
    [25, 50, 75, 100]
        .into_iter()
        .map(|n| ExperimentConfig {
            id: format!("fairness-n{n}"),
            node_count: n,
            base_seed,
            ..ExperimentConfig::default()
        })
        .collect()
}

/// The robustness sweep: 100 nodes with a growing malicious fraction
/// running all three attack behaviors at once.
pub fn robustness_scenario(base_seed: u64) -> Vec<ExperimentConfig> {
    [0.0f64, 0.1, 0.2, 0.3, 0.4, 0.5]
        .into_iter()
        .map(|f| ExperimentConfig {
            id: format!("robustness-f{:02}", (f * 100.0).round() as u32),
            node_count: 100,
            malicious_fraction: f,
            behaviors: BehaviorSet::all(),
            base_seed,
            ..ExperimentConfig::default()
        })
        .collect()
}

/// On-disk scenario format: a list of `[[experiment]]` tables.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    experiment: Vec<ExperimentConfig>,
}

pub fn scenario_to_toml(experiments: &[ExperimentConfig]) -> String {
    toml::to_string_pretty(&ScenarioFile {
        experiment: experiments.to_vec(),
    })
    .expect("experiment configs serialize cleanly")
}

pub fn scenario_from_toml(text: &str) -> Result<Vec<ExperimentConfig>, HarnessError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
    if file.experiment.is_empty() {
        return Err(HarnessError::Scenario("no experiments defined".into()));
    }
    Ok(file.experiment)
}
