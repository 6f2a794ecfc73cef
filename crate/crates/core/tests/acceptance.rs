//! Acceptance suite: one test per headline criterion, each printing a
//! single PASS/FAIL line (visible with `--nocapture`; the test name itself
//! carries the verdict in default output).
//!
//! The fairness and robustness tables are executed once and shared across
//! criteria through `OnceLock`, so the whole suite costs one full sweep.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fairlot::harness::{
    check_safety, emit_results, fairness_scenario, robustness_scenario, run_experiment,
    run_replicate_traced, run_scenario, summarize, ExecMode, ExperimentConfig, ReplicateResult,
    Summary,
};
use fairlot::hash::sha256_parts;
use fairlot::ledger::{genesis, Block, Chain, KeyDirectory};
use fairlot::netsim::{self, BehaviorSet, EventKind};
use fairlot::protocol::{Message, MessageBody, ProtocolParams, VerifyCache};
use fairlot::sortition::{sortition, verify_sortition, Role, Seed};
use fairlot::vrf::keygen;

const BASE_SEED: u64 = 42;

fn table1() -> &'static (Vec<ReplicateResult>, Duration) {
    static CELL: OnceLock<(Vec<ReplicateResult>, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let rows = run_scenario(&fairness_scenario(BASE_SEED), ExecMode::Parallel)
            .expect("fairness scenario runs");
        (rows, start.elapsed())
    })
}

fn table2() -> &'static Vec<ReplicateResult> {
    static CELL: OnceLock<Vec<ReplicateResult>> = OnceLock::new();
    CELL.get_or_init(|| {
        run_scenario(&robustness_scenario(BASE_SEED), ExecMode::Parallel)
            .expect("robustness scenario runs")
    })
}

fn verdict(criterion: &str, failures: &[String], detail: String) {
    let pass = failures.is_empty();
    println!(
        "[{}] {criterion}: {detail}{}",
        if pass { "PASS" } else { "FAIL" },
        if pass {
            String::new()
        } else {
            format!(" — {}", failures.join("; "))
        }
    );
    assert!(pass, "{criterion}: {}", failures.join("; "));
}

fn cell_line(s: &Summary) -> String {
    format!(
        "{}: blocks={} diversity={} in_sync={} violations={}",
        s.id, s.blocks_added, s.proposer_diversity, s.nodes_in_sync, s.safety_violations
    )
}

/// Honest networks of 25/50/75/100 nodes over 600 simulated seconds,
/// five replicates: ~30 blocks each, proposer diversity near the reference
/// column {23, 26, 26, 27} and non-decreasing, at least 92% of nodes on the
/// accepted head, all inside a two-minute wall budget.
#[test]
fn criterion_1_fairness_table_reproduction() {
    let (rows, wall) = table1();
    let summaries = summarize(rows);
    let expected_diversity = [23i64, 26, 26, 27];
    let mut failures = Vec::new();

    for (s, &want_div) in summaries.iter().zip(&expected_diversity) {
        if !(29..=31).contains(&s.blocks_added) {
            failures.push(format!("{}: blocks {} outside 30±1", s.id, s.blocks_added));
        }
        let div = s.proposer_diversity as i64;
        if (div - want_div).abs() > 3 {
            failures.push(format!(
                "{}: diversity {} outside {}±3",
                s.id, s.proposer_diversity, want_div
            ));
        }
        let min_sync = 0.92 * s.node_count as f64;
        if (s.nodes_in_sync as f64) < min_sync {
            failures.push(format!(
                "{}: in_sync {} below {:.1}",
                s.id, s.nodes_in_sync, min_sync
            ));
        }
    }
    for pair in summaries.windows(2) {
        if pair[1].proposer_diversity < pair[0].proposer_diversity {
            failures.push(format!(
                "diversity not non-decreasing: {} then {}",
                pair[0].proposer_diversity, pair[1].proposer_diversity
            ));
        }
    }
    if *wall > Duration::from_secs(120) {
        failures.push(format!("wall time {wall:?} exceeds 2 minutes"));
    }

    let detail = summaries.iter().map(cell_line).collect::<Vec<_>>().join(" | ");
    verdict(
        "criterion 1 (fairness table)",
        &failures,
        format!("{detail} | wall={wall:?}"),
    );
}

/// 100 nodes under a growing malicious fraction running all attack
/// behaviors: block production within ±20% of 30·(1−f) and non-increasing,
/// ≥90% of honest nodes in sync, diversity/blocks ≥ 0.75, zero safety
/// violations anywhere.
#[test]
fn criterion_2_robustness_table_reproduction() {
    let summaries = summarize(table2());
    let mut failures = Vec::new();

    for s in &summaries {
        let ideal = 30.0 * (1.0 - s.malicious_fraction);
        let (lo, hi) = (0.8 * ideal, 1.2 * ideal);
        let blocks = s.blocks_added as f64;
        if blocks < lo || blocks > hi {
            failures.push(format!(
                "{}: blocks {} outside [{lo:.1}, {hi:.1}]",
                s.id, s.blocks_added
            ));
        }
        let honest =
            s.node_count - (s.malicious_fraction * s.node_count as f64).round() as usize;
        let min_sync = 0.90 * honest as f64;
        if (s.nodes_in_sync as f64) < min_sync {
            failures.push(format!(
                "{}: honest in_sync {} below {:.1} (of {honest})",
                s.id, s.nodes_in_sync, min_sync
            ));
        }
        if s.blocks_added > 0 {
            let ratio = s.proposer_diversity as f64 / s.blocks_added as f64;
            if ratio < 0.75 {
                failures.push(format!(
                    "{}: diversity/blocks {:.2} below 0.75",
                    s.id, ratio
                ));
            }
        }
        if s.safety_violations != 0 {
            failures.push(format!("{}: {} safety violations", s.id, s.safety_violations));
        }
    }
    for pair in summaries.windows(2) {
        if pair[1].blocks_added > pair[0].blocks_added {
            failures.push(format!(
                "blocks not non-increasing in malicious fraction: {} then {}",
                pair[0].blocks_added, pair[1].blocks_added
            ));
        }
    }

    let detail = summaries.iter().map(cell_line).collect::<Vec<_>>().join(" | ");
    verdict("criterion 2 (robustness table)", &failures, detail);
}

/// The proposal lottery with threshold 0.9 selects between 9% and 11% of
/// 10^4 independent keys in a single round (binomial 3σ band around 10%).
#[test]
fn criterion_3_proposal_selection_rate() {
    let params = ProtocolParams::default().sortition;
    let seed = Seed(sha256_parts(&[b"acceptance/selection"]));
    let total = 10_000u64;
    let selected = (0..total)
        .filter(|&i| {
            let kp = keygen(0xC300_0000 + i);
            sortition(&kp.secret_key, Role::Proposal, &seed, 0.0, &params).selected
        })
        .count();
    let rate = selected as f64 / total as f64;
    let mut failures = Vec::new();
    if !(0.09..=0.11).contains(&rate) {
        failures.push(format!("rate {rate:.4} outside [0.09, 0.11]"));
    }
    verdict(
        "criterion 3 (proposal selection rate)",
        &failures,
        format!("{selected}/{total} = {rate:.4}"),
    );
}

/// With 15 committee-eligible nodes, the vote lottery seats 11 on average:
/// the mean committee size over 1000 rounds lands in 11 ± 0.35.
#[test]
fn criterion_4_expected_committee_size() {
    let params = ProtocolParams::default().sortition;
    let keys: Vec<_> = (0..15).map(|i| keygen(0xC400 + i)).collect();
    let rounds = 1000u64;
    let mut seats = 0u64;
    for round in 0..rounds {
        let seed = Seed(sha256_parts(&[b"acceptance/committee", &round.to_be_bytes()]));
        seats += keys
            .iter()
            .filter(|kp| sortition(&kp.secret_key, Role::Vote, &seed, 0.9, &params).selected)
            .count() as u64;
    }
    let mean = seats as f64 / rounds as f64;
    let mut failures = Vec::new();
    if !(10.65..=11.35).contains(&mean) {
        failures.push(format!("mean committee {mean:.3} outside [10.65, 11.35]"));
    }
    verdict(
        "criterion 4 (committee size)",
        &failures,
        format!("mean {mean:.3} over {rounds} rounds"),
    );
}

/// No key is systematically favored: chi-square homogeneity of per-key
/// proposal selection counts over 10^3 rounds stays below the α = 0.001
/// critical value (the committee lottery is held to the same bar).
#[test]
fn criterion_5_per_key_uniformity_chi_square() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let params = ProtocolParams::default().sortition;
    let keys: Vec<_> = (0..25).map(|i| keygen(0xC500 + i)).collect();
    let rounds = 1000u64;
    let mut proposal_counts = vec![0u64; keys.len()];
    let mut vote_counts = vec![0u64; keys.len()];
    for round in 0..rounds {
        let seed = Seed(sha256_parts(&[b"acceptance/uniformity", &round.to_be_bytes()]));
        for (k, kp) in keys.iter().enumerate() {
            if sortition(&kp.secret_key, Role::Proposal, &seed, 0.0, &params).selected {
                proposal_counts[k] += 1;
            }
            if sortition(&kp.secret_key, Role::Vote, &seed, 0.9, &params).selected {
                vote_counts[k] += 1;
            }
        }
    }

    let chi_square = |counts: &[u64]| -> f64 {
        let expected = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    };
    let critical = ChiSquared::new((keys.len() - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.999);
    let (chi_p, chi_v) = (chi_square(&proposal_counts), chi_square(&vote_counts));

    let mut failures = Vec::new();
    if chi_p >= critical {
        failures.push(format!("proposal χ² {chi_p:.1} ≥ critical {critical:.1}"));
    }
    if chi_v >= critical {
        failures.push(format!("vote χ² {chi_v:.1} ≥ critical {critical:.1}"));
    }
    verdict(
        "criterion 5 (per-key uniformity)",
        &failures,
        format!("proposal χ²={chi_p:.1}, vote χ²={chi_v:.1}, critical={critical:.1}"),
    );
}

/// Soundness: every honest sortition claim verifies and every single-byte
/// mutation of its lot, proof, or seed — or a swapped role — is rejected;
/// every honestly signed message kind passes static verification and every
/// single-byte mutation of its wire bytes fails; no under-reputation vote
/// is ever counted in an attack run.
#[test]
fn criterion_6_crypto_soundness() {
    let params = ProtocolParams::default();
    let keys: Vec<_> = (0..4).map(|i| keygen(0xC600 + i)).collect();
    let mut dir = KeyDirectory::new();
    for kp in &keys {
        dir.register(kp.public_key);
    }
    let mut failures = Vec::new();

    // Sortition layer: collect selected claims for both roles, then attack
    // every byte of every component.
    let mut claims: Vec<(usize, Role, Seed, fairlot::vrf::Lot, fairlot::vrf::Proof)> = Vec::new();
    let mut draw = 0u64;
    while claims.iter().filter(|c| c.1 == Role::Proposal).count() < 20
        || claims.iter().filter(|c| c.1 == Role::Vote).count() < 20
    {
        let seed = Seed(sha256_parts(&[b"acceptance/claims", &draw.to_be_bytes()]));
        draw += 1;
        for (k, kp) in keys.iter().enumerate() {
            for role in [Role::Proposal, Role::Vote] {
                let out = sortition(&kp.secret_key, role, &seed, 0.9, &params.sortition);
                if out.selected {
                    claims.push((k, role, seed, out.lot, out.proof));
                }
            }
        }
    }
    let mut sortition_mutations = 0u64;
    for (k, role, seed, lot, proof) in &claims {
        let pk = &keys[*k].public_key;
        let verify = |seed: &Seed, lot: &fairlot::vrf::Lot, proof: &fairlot::vrf::Proof, role: Role| {
            verify_sortition(pk, role, seed, lot, proof, 0.9, &params.sortition)
        };
        if !verify(seed, lot, proof, *role) {
            failures.push(format!("honest {role:?} claim rejected"));
        }
        let other = match role {
            Role::Proposal => Role::Vote,
            Role::Vote => Role::Proposal,
        };
        if verify(seed, lot, proof, other) {
            failures.push("claim verified under the wrong role".into());
        }
        sortition_mutations += 1;
        for i in 0..32 {
            let mut s = *seed;
            s.0[i] ^= 0x01;
            let mut l = *lot;
            l.0[i] ^= 0x01;
            let mut p = *proof;
            p.0[i] ^= 0x01;
            for (what, ok) in [
                ("seed", verify(&s, lot, proof, *role)),
                ("lot", verify(seed, &l, proof, *role)),
                ("proof", verify(seed, lot, &p, *role)),
            ] {
                sortition_mutations += 1;
                if ok {
                    failures.push(format!("mutated {what} byte {i} verified"));
                }
            }
        }
    }

    // Corpus: one message of every kind, all honestly constructed.
    let seed = Seed(sha256_parts(&[b"acceptance/soundness"]));
    let head = genesis();
    let out = sortition(&keys[0].secret_key, Role::Proposal, &seed, 0.0, &params.sortition);
    let block = Block::new(
        1,
        head.block_hash,
        keys[0].node_id,
        out.lot,
        out.proof,
        seed,
        vec![0xAB; 64],
    );
    let vote_out = sortition(&keys[1].secret_key, Role::Vote, &seed, 0.9, &params.sortition);
    let mut chain = Chain::new();
    chain.push(block.clone());
    let corpus = vec![
        Message::sign(
            &keys[0].secret_key,
            1,
            MessageBody::ProposalAnnounce {
                block_hash: block.block_hash,
                lot: block.proposer_lot,
                proof: block.proposer_proof,
            },
        ),
        Message::sign(&keys[0].secret_key, 1, MessageBody::BlockBody(block.clone())),
        Message::sign(
            &keys[1].secret_key,
            1,
            MessageBody::Vote {
                voted_block_hash: block.block_hash,
                voted_proposer_lot: block.proposer_lot,
                voter_lot: vote_out.lot,
                voter_proof: vote_out.proof,
            },
        ),
        Message::sign(
            &keys[2].secret_key,
            2,
            MessageBody::SyncRequest { height: 1, nonce: 3 },
        ),
        Message::sign(&keys[3].secret_key, 2, MessageBody::SyncResponse(chain)),
    ];

    let mut cache = VerifyCache::default();
    for msg in &corpus {
        if !cache.statically_valid(&msg.digest(), msg, &dir, params.max_payload) {
            failures.push(format!("honest {} rejected", msg.kind().as_str()));
        }
    }

    // Every single-byte mutation must fail to decode or fail verification.
    let mut mutations = 0u64;
    let mut rejected = 0u64;
    for msg in &corpus {
        let wire = msg.encode();
        for i in 0..wire.len() {
            let mut bytes = wire.clone();
            bytes[i] ^= 0x01;
            mutations += 1;
            match Message::decode(&bytes) {
                Err(_) => rejected += 1,
                Ok(m) => {
                    let digest = sha256_parts(&[&bytes]);
                    if !cache.statically_valid(&digest, &m, &dir, params.max_payload) {
                        rejected += 1;
                    } else {
                        failures.push(format!(
                            "mutation at byte {i} of {} accepted",
                            msg.kind().as_str()
                        ));
                    }
                }
            }
        }
    }

    // Attack run: low-reputation nodes must never vote, and no node may
    // ever count a vote from one.
    let exp = ExperimentConfig {
        id: "soundness-f30".into(),
        node_count: 60,
        malicious_fraction: 0.3,
        behaviors: BehaviorSet::all(),
        duration_ms: 200_000,
        base_seed: BASE_SEED,
        ..ExperimentConfig::default()
    };
    let result = netsim::run(exp.sim_config(0)).expect("attack run");
    let counted: u64 = result
        .nodes
        .iter()
        .map(|n| n.counters().low_rep_votes_accepted)
        .sum();
    if counted != 0 {
        failures.push(format!("{counted} low-reputation votes counted"));
    }
    let malicious_votes: u64 = result
        .malicious
        .iter()
        .map(|&i| result.nodes[i].counters().votes_cast)
        .sum();
    if malicious_votes != 0 {
        failures.push(format!("{malicious_votes} votes cast by low-reputation nodes"));
    }

    verdict(
        "criterion 6 (crypto soundness)",
        &failures,
        format!(
            "{} sortition claims with {sortition_mutations} mutations, {} message kinds \
             with {rejected}/{mutations} wire mutations rejected, 0 low-reputation votes",
            claims.len(),
            corpus.len()
        ),
    );
}

/// Safety and finality: zero violations across both tables, plus a
/// dedicated 50%-malicious stress run with every behavior enabled in which
/// no honest node ever commits a conflicting block or rewrites history.
#[test]
fn criterion_7_safety_and_finality() {
    let mut failures = Vec::new();

    let sweep_violations: u64 = table1()
        .0
        .iter()
        .chain(table2().iter())
        .map(|r| r.metrics.safety_violations)
        .sum();
    if sweep_violations != 0 {
        failures.push(format!("{sweep_violations} violations across the sweeps"));
    }

    let stress = ExperimentConfig {
        id: "stress-f50".into(),
        malicious_fraction: 0.5,
        behaviors: BehaviorSet::all(),
        base_seed: 4242,
        replicates: 1,
        ..ExperimentConfig::default()
    };
    let (row, log) = run_replicate_traced(&stress, 0).expect("stress run");
    if row.metrics.safety_violations != 0 {
        failures.push(format!(
            "stress run: {} violations",
            row.metrics.safety_violations
        ));
    }
    if check_safety(&log) != row.metrics.safety_violations {
        failures.push("log audit disagrees with run metrics".into());
    }
    let malicious: std::collections::BTreeSet<_> =
        log.iter_kind(EventKind::RoleMalicious).map(|r| r.node).collect();
    let honest_reorgs = log
        .iter_kind(EventKind::Reorg)
        .filter(|r| !malicious.contains(&r.node))
        .count();
    if honest_reorgs != 0 {
        failures.push(format!("{honest_reorgs} honest reorgs in the stress log"));
    }

    verdict(
        "criterion 7 (safety and finality)",
        &failures,
        format!(
            "sweep violations={sweep_violations}, stress blocks={} violations={}",
            row.metrics.blocks_added, row.metrics.safety_violations
        ),
    );
}

/// Bitwise reproducibility: the same scenario and base seed produce an
/// identical results CSV, run to run and regardless of execution mode.
#[test]
fn criterion_8_seeded_runs_are_reproducible() {
    let exp = ExperimentConfig {
        id: "determinism".into(),
        node_count: 60,
        malicious_fraction: 0.2,
        behaviors: BehaviorSet::all(),
        replicates: 3,
        duration_ms: 120_000,
        base_seed: 7777,
        ..ExperimentConfig::default()
    };
    let a = emit_results(&run_experiment(&exp, ExecMode::Parallel).expect("run a"));
    let b = emit_results(&run_experiment(&exp, ExecMode::Parallel).expect("run b"));
    let c = emit_results(&run_experiment(&exp, ExecMode::Sequential).expect("run c"));

    let mut failures = Vec::new();
    if a != b {
        failures.push("two parallel runs differ".into());
    }
    if a != c {
        failures.push("parallel and sequential runs differ".into());
    }
    verdict(
        "criterion 8 (seeded reproducibility)",
        &failures,
        format!("{} identical rows across three runs", a.lines().count() - 1),
    );
}
