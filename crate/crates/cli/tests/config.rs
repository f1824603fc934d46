use std::path::PathBuf;
use std::time::Duration;

use jacette::jsorc::PolicyParams;
use jacette::storage::TierConfig;
use jacette_cli::config::{FileConfig, GlobalFlags, RuntimeConfig, DEFAULT_PORT, DEFAULT_SEED};

#[test]
fn defaults_apply_when_nothing_is_set() {
    let c = RuntimeConfig::resolve(&GlobalFlags::default(), &FileConfig::default());
    assert_eq!(c.tier, TierConfig::default());
    assert_eq!(c.policy, PolicyParams::default());
    assert_eq!(c.port, DEFAULT_PORT);
    assert_eq!(c.seed, DEFAULT_SEED);
    assert!(!c.jsorc);
    assert_eq!(c.out, PathBuf::from("."));
}

#[test]
fn file_overrides_defaults_and_flags_override_file() {
    let file = FileConfig {
        cache_capacity: Some(10),
        fast_edge_threshold: Some(20),
        port: Some(9000),
        epoch_interval: Some(500),
        mem_budget: Some(100),
        seed: Some(3),
        jsorc: Some(true),
        ..FileConfig::default()
    };
    let from_file = RuntimeConfig::resolve(&GlobalFlags::default(), &file);
    assert_eq!(from_file.tier.cache_capacity, 10);
    assert_eq!(from_file.tier.fast_edge_threshold, 20);
    assert_eq!(from_file.port, 9000);
    assert_eq!(from_file.policy.epoch_interval, Duration::from_millis(500));
    assert_eq!(from_file.policy.memory_budget_bytes, 100);
    assert_eq!(from_file.seed, 3);
    assert!(from_file.jsorc);

    let flags = GlobalFlags {
        cache_capacity: Some(11),
        port: Some(9001),
        mem_budget: Some(-1),
        jsorc: Some(false),
        ..GlobalFlags::default()
    };
    let both = RuntimeConfig::resolve(&flags, &file);
    assert_eq!(both.tier.cache_capacity, 11);
    assert_eq!(both.tier.fast_edge_threshold, 20, "unset flags fall through to the file");
    assert_eq!(both.port, 9001);
    assert_eq!(both.policy.memory_budget_bytes, -1);
    assert!(!both.jsorc);
    assert_eq!(both.seed, 3);
}

#[test]
fn config_files_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"port": 1, "colour": "red"}"#).unwrap();
    assert!(FileConfig::load(&p).is_err());
    std::fs::write(&p, r#"{"port": 1}"#).unwrap();
    assert_eq!(FileConfig::load(&p).unwrap().port, Some(1));
}
