use wai_core::io::{read_json, read_jsonl, read_pool, read_stimuli, write_json, write_jsonl, write_pool};
use wai_core::observer::{simulate_experiment, ObserverSpec, WeightedObserverParams};
use wai_core::stimgen::{plan_session, Channel, PoolConfig, SessionPlan, StimulusPool};
use wai_core::{StimulusSpec, TrialResponse};

fn small_pool() -> StimulusPool {
    StimulusPool::generate(12, Channel::Lightness, PoolConfig { per_cell: 6, controls: 6, training_per_cell: 2 }).unwrap()
}

#[test]
fn pool_survives_disk() {
    let dir = tempfile::tempdir().unwrap();
    let pool = small_pool();
    write_pool(dir.path(), &pool).unwrap();
    let back = read_pool(dir.path()).unwrap();
    assert_eq!(back.stimuli(), pool.stimuli());
    assert_eq!(back.training_ids(), pool.training_ids());
    // Either the root or its stimuli/ directory works.
    assert_eq!(read_pool(&dir.path().join("stimuli")).unwrap().stimuli(), pool.stimuli());
    assert_eq!(read_stimuli(dir.path()).unwrap().len(), pool.stimuli().len());
}

#[test]
fn stimulus_file_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let pool = small_pool();
    let s = &pool.stimuli()[3];
    let path = dir.path().join("s.json");
    write_json(&path, s).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back: StimulusSpec = read_json(&path).unwrap();
    assert_eq!(&back, s);
    write_json(&path, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    for key in ["schema_version", "id", "points", "levels", "channel", "range_class", "rho_target", "direction", "true_mean"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn responses_and_plans_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pool = small_pool();
    let plan = plan_session(&pool, 4).unwrap();
    write_json(&dir.path().join("plan.json"), &plan).unwrap();
    let plan_back: SessionPlan = read_json(&dir.path().join("plan.json")).unwrap();
    assert_eq!(plan_back, plan);

    let spec = ObserverSpec::Weighted(WeightedObserverParams { noise_sd: 3.0, seed: 2, ..WeightedObserverParams::ideal() });
    let responses = simulate_experiment(&spec, &plan, &pool).unwrap();
    let path = dir.path().join("r.ndjson");
    write_jsonl(&path, &responses).unwrap();
    let back: Vec<TrialResponse> = read_jsonl(&path).unwrap();
    assert_eq!(back, responses);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 60);
}

#[test]
fn bad_stimulus_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let pool = small_pool();
    let s = &pool.stimuli()[0];
    let mut v = serde_json::to_value(s).unwrap();
    v["levels"][0] = serde_json::json!(9);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(read_json::<StimulusSpec>(&path).is_err());
}
