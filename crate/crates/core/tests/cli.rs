use std::path::Path;
use std::process::{Command, Output};

use clover_lab::commands::write_scenes;
use clover_lab::demo::{lead_brake, straight};
use clover_lab::evaluator::CACHE_VERSION;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clover-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("CLOVER_LAB_CONFIG")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scene_dir(root: &Path) -> std::path::PathBuf {
    let dir = root.join("scenes");
    write_scenes(&dir, &[straight("s1", 8.0).unwrap(), lead_brake("s2", 10.0, 25.0, 4.0).unwrap()]).unwrap();
    dir
}

fn gen(root: &Path) -> std::path::PathBuf {
    scene_dir(root);
    let o = run(&["gen-pseudo-experts", "--scenes", "scenes", "--seed", "3", "--out", "gen"], root);
    assert!(o.status.success(), "{}", stderr(&o));
    root.join("gen")
}

#[test]
fn gen_writes_pool_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gen(tmp.path());
    for f in ["s1.jsonl", "s2.jsonl", "pseudo_experts.json", "pool.jsonl", "summary.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let rows = summary.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["generated"], 261);
    let pool = std::fs::read_to_string(out.join("pool.jsonl")).unwrap();
    let per_scene: usize = ["s1.jsonl", "s2.jsonl"].iter().map(|f| std::fs::read_to_string(out.join(f)).unwrap().lines().count()).sum();
    assert_eq!(pool.lines().count(), per_scene);
}

#[test]
fn malformed_scene_names_field_and_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = scene_dir(tmp.path());
    let path = dir.join("s2.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["dt"] = serde_json::json!(-0.5);
    std::fs::write(&path, v.to_string()).unwrap();
    let o = run(&["gen-pseudo-experts", "--scenes", "scenes", "--out", "gen"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("s2") && err.contains("dt"), "{err}");

    v.as_object_mut().unwrap().remove("centerline");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = run(&["gen-pseudo-experts", "--scenes", "scenes", "--out", "gen"], tmp.path());
    let err = stderr(&o);
    assert_eq!(o.status.code(), Some(2));
    assert!(err.contains("s2") && err.contains("centerline"), "{err}");
}

#[test]
fn score_cache_is_created_and_rebuilt() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    gen(root);
    let args = ["score", "--scenes", "scenes", "--pool", "gen/pool.jsonl", "--out", "scored.jsonl", "--cache", "cache.jsonl"];
    let o = run(&args, root);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read_to_string(root.join("scored.jsonl")).unwrap();
    let cache = std::fs::read_to_string(root.join("cache.jsonl")).unwrap();
    assert!(!cache.is_empty());

    // stale version: entries are ignored, scores recomputed, cache rewritten
    let stale = cache.replace(&format!("\"cache_version\":{CACHE_VERSION}"), "\"cache_version\":0");
    assert_ne!(stale, cache);
    std::fs::write(root.join("cache.jsonl"), &stale).unwrap();
    let o = run(&args, root);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(root.join("scored.jsonl")).unwrap(), first);
    assert_eq!(std::fs::read_to_string(root.join("cache.jsonl")).unwrap(), cache);

    std::fs::write(root.join("cache.jsonl"), "not json\n").unwrap();
    let o = run(&args, root);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(root.join("scored.jsonl")).unwrap(), first);
}

#[test]
fn selection_commands_run_on_generated_pools() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    gen(root);
    let cmds: [&[&str]; 5] = [
        &["rank", "--pool", "gen/pool.jsonl", "--scenes", "scenes", "--out", "rank.csv"],
        &["rank", "--pool", "gen/pool.jsonl", "--scenes", "scenes", "--scorer", "noisy:0.05:1", "--out", "rank_noisy.csv"],
        &["distill-targets", "--pool", "gen/pool.jsonl", "--scenes", "scenes", "--out", "targets.json"],
        &["sweep-anchor", "--pool", "gen/pool.jsonl", "--scenes", "scenes", "--out", "sweep.csv"],
        &["analyze", "--pools", "gen", "--scenes", "scenes", "--out", "stats.csv"],
    ];
    for args in cmds {
        let o = run(args, root);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    for f in ["rank.csv", "rank.json", "rank_noisy.csv", "targets.json", "sweep.csv", "stats.csv"] {
        assert!(root.join(f).is_file(), "missing {f}");
    }
    let stats = std::fs::read_to_string(root.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 4, "{stats}");
    assert!(stats.lines().last().unwrap().starts_with("ALL"), "{stats}");
}

#[test]
fn simulate_enrichment_ten_thousand_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--check", "enrichment", "--trials", "10000", "--seed", "4", "--out", "enrich.json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("enrich.json")).unwrap()).unwrap();
    assert_eq!(report["violations"], 0);
    assert_eq!(report["trials"], 10000);
    let log = std::fs::read_to_string(tmp.path().join("enrich.csv")).unwrap();
    assert_eq!(log.lines().count(), 10001);
}

#[test]
fn bad_arguments_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--check", "nonsense", "--out", "x.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonsense"));
    let o = run(&["rank", "--pool", "missing.jsonl", "--out", "r.csv"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(tmp.path().join("bad.json"), r#"{"pareto_min": 9}"#).unwrap();
    let o = run(&["--config", "bad.json", "simulate", "--check", "drift", "--trials", "1", "--out", "d.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
