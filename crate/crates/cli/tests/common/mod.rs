//! Criterion 8 runs the pipeline twice through the `wai` binary and twice
//! through the HTTP service, and compares the fit.json bytes.

use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

use wai_core::io::write_json;
use wai_core::observer::{ObserverSpec, WeightedObserverParams};
use wai_core::pipeline::{fit_file, FitFile};
use wai_core::centroid::{EfficiencyOptions, FitOptions};
use wai_core::measures::SummaryOptions;
use wai_core::rng::{derive_seed, rng_from_seed};
use wai_core::stimgen::{PoolConfig, StimulusPool};
use wai_core::{AttentionFilter, Channel, Point, TrialResponse};
use wai_service::{AppState, MemoryStore};

pub fn salience_params() -> WeightedObserverParams {
    WeightedObserverParams {
        filter: AttentionFilter::salience(1.0),
        data_drivenness: 0.85,
        default_point: Point::new(250.0, 250.0),
        noise_sd: 10.0,
        seed: 12,
    }
}

fn cli_run(dir: &Path) -> Vec<u8> {
    let params = dir.join("params.json");
    write_json(&params, &salience_params()).unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_wai"))
        .args(["--seed", "8", "--out"])
        .arg(&out)
        .args(["run", "--observer", "weighted", "--sessions", "4", "--reps", "50", "--params"])
        .arg(&params)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out.join("fit.json")).unwrap()
}

/// Two simulated participants answer every trial over HTTP; the export is
/// then fitted.
async fn http_run(pool: &StimulusPool, dir: &Path) -> Vec<u8> {
    let state = AppState::new(pool.clone(), MemoryStore::default()).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let server = tokio::spawn(wai_service::serve(listener, state, std::future::pending()));
    let client = reqwest::Client::new();
    let observer = ObserverSpec::Weighted(salience_params());

    for participant in 0..2u64 {
        let created: Value = client
            .post(format!("{base}/session"))
            .json(&json!({ "seed": 40 + participant }))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let id = created["id"].as_str().unwrap();
        loop {
            let r = client.get(format!("{base}/session/{id}/next")).send().await.unwrap();
            if r.status() == reqwest::StatusCode::CONFLICT {
                break;
            }
            let d: Value = r.json().await.unwrap();
            let trial = d["trial_index"].as_u64().unwrap();
            let stim_id = d["stimulus"]["id"].as_str().unwrap();
            let click = match pool.get(stim_id) {
                Some(s) => {
                    let mut rng = rng_from_seed(derive_seed(derive_seed(7, participant), trial));
                    observer.respond(s, &mut rng)
                }
                None => {
                    let m = &d["stimulus"]["marks"][0];
                    Point::new(m["x"].as_f64().unwrap(), m["y"].as_f64().unwrap())
                }
            };
            let ack = client
                .post(format!("{base}/session/{id}/response"))
                .json(&json!({ "trial_index": trial, "x": click.x, "y": click.y, "rt_ms": 1200.0 }))
                .send()
                .await
                .unwrap();
            assert!(ack.status().is_success());
        }
    }
    let text = client.get(format!("{base}/export?excluded=false")).send().await.unwrap().text().await.unwrap();
    server.abort();
    let responses: Vec<TrialResponse> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(responses.iter().filter(|r| r.is_formal()).count(), 120);
    let file: FitFile = fit_file(
        &responses,
        pool.stimuli(),
        &SummaryOptions::default(),
        &FitOptions::default(),
        Some(&EfficiencyOptions { repetitions: 50, seed: 3 }),
    )
    .unwrap();
    let path = dir.join("fit.json");
    write_json(&path, &file).unwrap();
    std::fs::read(path).unwrap()
}

pub fn determinism_check() -> (bool, String) {
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = cli_run(dirs[0].path());
    let b = cli_run(dirs[1].path());

    let pool = StimulusPool::generate(19, Channel::Size, PoolConfig::default()).unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let c = rt.block_on(http_run(&pool, dirs[2].path()));
    let d = rt.block_on(http_run(&pool, dirs[3].path()));

    let cli_same = a == b;
    let http_same = c == d;
    (
        cli_same && http_same && !a.is_empty() && !c.is_empty(),
        format!(
            "`wai run` fit.json identical: {cli_same} ({} bytes); HTTP-collected fit.json identical: {http_same} ({} bytes)",
            a.len(),
            c.len()
        ),
    )
}
