//! The scenario scripts shipped in `scenarios/` are part of the product:
//! they must pass as-is, and identically on every run.

use std::fs;
use std::path::PathBuf;

use strongvelope::scenario::run_script;

fn shipped(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect();
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

#[test]
fn three_party_basic_passes() {
    let run = run_script(&shipped("three_party_basic.txt"), b"");
    assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
    assert_eq!(run.steps, 5);
    assert_eq!(run.assertions, 15);
}

#[test]
fn exclusion_confidentiality_passes() {
    let run = run_script(&shipped("exclusion_confidentiality.txt"), b"");
    assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
    // The heart of the scenario: the excluded member never sees a plaintext
    // after the cut, and the transcript shows exactly how each attempt went.
    assert!(run.transcript.contains("carol: skipped"));
    assert!(run.transcript.contains("carol: missing-key"));
}

#[test]
fn history_seeding_passes() {
    let run = run_script(&shipped("history_seeding.txt"), b"");
    assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
    assert!(run.transcript.contains("bob restarted; own key found after 1 batch(es)"));
}

#[test]
fn shipped_scenarios_are_deterministic() {
    for name in [
        "three_party_basic.txt",
        "exclusion_confidentiality.txt",
        "history_seeding.txt",
    ] {
        let script = shipped(name);
        let first = run_script(&script, b"fixed seed");
        let second = run_script(&script, b"fixed seed");
        assert!(first.passed(), "{name}: {:?}", first.failure);
        assert_eq!(first.transcript, second.transcript, "{name} transcript drifted");
        assert_eq!(first.export, second.export, "{name} export drifted");
    }
}
