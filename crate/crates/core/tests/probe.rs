//! Temporary diagnostics for the f=0.5 safety violations. Not part of the
//! shipped suite.

use std::collections::{BTreeMap, BTreeSet};

use fairlot::harness::{robustness_scenario, run_replicate_traced, ExperimentConfig};
use fairlot::netsim::EventKind;

#[test]
fn probe_f50_safety() {
    let exp: ExperimentConfig = robustness_scenario(42)
        .into_iter()
        .find(|e| e.id == "robustness-f50")
        .unwrap();
    for k in 0..exp.replicates {
        let (row, log) = run_replicate_traced(&exp, k as u32).unwrap();
        if row.metrics.safety_violations == 0 {
            println!("rep {k}: clean ({} blocks)", row.metrics.blocks_added);
            continue;
        }
        println!(
            "rep {k}: {} violations, {} blocks",
            row.metrics.safety_violations, row.metrics.blocks_added
        );
        let malicious: BTreeSet<_> = log
            .iter_kind(EventKind::RoleMalicious)
            .map(|r| r.node)
            .collect();
        let mut by_height: BTreeMap<u64, BTreeMap<[u8; 32], Vec<(String, u64)>>> =
            BTreeMap::new();
        for rec in log.records() {
            if malicious.contains(&rec.node) {
                continue;
            }
            match rec.kind {
                EventKind::Commit => {
                    by_height
                        .entry(rec.round)
                        .or_default()
                        .entry(rec.hash)
                        .or_default()
                        .push((rec.node.short_hex(), rec.at_ms));
                }
                EventKind::Reorg => {
                    println!(
                        "  reorg: node {} at {} ms (height {})",
                        rec.node.short_hex(),
                        rec.at_ms,
                        rec.round
                    );
                }
                _ => {}
            }
        }
        for (height, hashes) in &by_height {
            if hashes.len() > 1 {
                println!("  height {height}: {} distinct hashes", hashes.len());
                for (hash, nodes) in hashes {
                    let times: Vec<u64> = nodes.iter().map(|(_, t)| *t).collect();
                    let (lo, hi) = (
                        times.iter().min().unwrap(),
                        times.iter().max().unwrap(),
                    );
                    println!(
                        "    {}…: {} nodes, committed {}–{} ms",
                        hex(&hash[..4]),
                        nodes.len(),
                        lo,
                        hi
                    );
                }
            }
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
