//! Replays the checked-in fuzz seeds through the same checks as the fuzz
//! targets, so the seeds stay meaningful without a fuzzing toolchain.

use std::path::PathBuf;

use evt_core::backbone::Checkpoint;
use evt_core::config::RunConfig;
use evt_core::event_io::{decode_csv, decode_evt1, encode_csv, encode_evt1};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn evt1_seeds() {
    let mut accepted = 0;
    for (path, data) in seeds("evt1_decode") {
        if let Ok(s) = decode_evt1(&data) {
            assert_eq!(encode_evt1(&s), data, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn csv_seeds() {
    let mut accepted = 0;
    for (path, data) in seeds("csv_decode") {
        let text = String::from_utf8(data).unwrap();
        for geometry in [None, Some((64, 64))] {
            if let Ok(s) = decode_csv(&text, geometry) {
                assert_eq!(
                    decode_csv(&encode_csv(&s), None).unwrap(),
                    s,
                    "{}",
                    path.display()
                );
                accepted += 1;
            }
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn checkpoint_seeds() {
    let mut accepted = 0;
    for (_, data) in seeds("checkpoint_decode") {
        if let Ok(c) = Checkpoint::decode(&data) {
            let bytes = c.encode().unwrap();
            assert_eq!(Checkpoint::decode(&bytes).unwrap().encode().unwrap(), bytes);
            accepted += 1;
        }
    }
    assert_eq!(accepted, 1);
}

#[test]
fn run_config_seeds() {
    let mut accepted = 0;
    for (_, data) in seeds("run_config_parse") {
        let text = String::from_utf8(data).unwrap();
        if let Ok(cfg) = RunConfig::from_json(&text) {
            assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
            accepted += 1;
        }
        let mut cfg = RunConfig::default();
        let _ = cfg.set(&text);
    }
    assert!(accepted >= 2);
}
