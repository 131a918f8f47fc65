use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::Path;

use reqwest::StatusCode;
use serde_json::{json, Value};
use sortie_core::matcher::{standard_templates, write_template_library};
use sortie_core::render::import_json;
use sortie_core::sim::gen_corpus;
use sortie_service::{bind, ServiceConfig, ServiceError};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

struct Running {
    base: String,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<Result<(), ServiceError>>,
}

impl Running {
    async fn stop(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.await.unwrap().unwrap();
    }
}

fn config(corpus: &Path, journal: &Path) -> ServiceConfig {
    ServiceConfig::new(corpus, journal, SocketAddr::from(([127, 0, 0, 1], 0)))
}

async fn start(cfg: ServiceConfig) -> Running {
    let bound = bind(&cfg).await.unwrap();
    let base = format!("http://{}", bound.local_addr());
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(bound.run_until(async {
        let _ = rx.await;
    }));
    Running {
        base,
        stop: Some(tx),
        task,
    }
}

fn corpus(n_good: usize, n_bad: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(n_good, n_bad, 17, dir.path()).unwrap();
    dir
}

async fn get_json(client: &reqwest::Client, url: String) -> Value {
    let r = client.get(url).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    r.json().await.unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn ten_sorties_twenty_labels_four_writers_and_replay() {
    let corpus = corpus(5, 5);
    let jdir = tempfile::tempdir().unwrap();
    let journal = jdir.path().join("labels.jsonl");
    let svc = start(config(corpus.path(), &journal)).await;
    let client = reqwest::Client::new();

    let sorties = get_json(&client, format!("{}/sorties", svc.base)).await;
    let sorties = sorties.as_array().unwrap().clone();
    assert_eq!(sorties.len(), 10);
    let ids: Vec<String> = sorties.iter().map(|s| s["sortie_id"].as_str().unwrap().to_string()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    for s in &sorties {
        assert!(s["duration"].as_f64().unwrap() > 0.0);
        assert!(s["truth_quality"].is_string() && s["auto_quality"].is_string());
        assert_eq!(s["label_count"], 0);
    }

    let mut writers = Vec::new();
    for w in 0..4 {
        let client = client.clone();
        let base = svc.base.clone();
        let ids = ids.clone();
        writers.push(tokio::spawn(async move {
            let mut out = Vec::new();
            for k in 0..5 {
                let id = &ids[(w + k) % ids.len()];
                let body = if k % 2 == 0 {
                    json!({"label_kind": "quality", "value": if w % 2 == 0 { "good" } else { "bad" }})
                } else {
                    json!({"label_kind": "maneuver", "value": "right_turn", "t_start": 10.0, "t_end": 20.0})
                };
                let r = client
                    .post(format!("{base}/sorties/{id}/labels"))
                    .header("x-labeler-id", format!("writer-{w}"))
                    .json(&body)
                    .send()
                    .await
                    .unwrap();
                assert_eq!(r.status(), StatusCode::CREATED);
                let v: Value = r.json().await.unwrap();
                out.push(v["record_id"].as_str().unwrap().to_string());
            }
            out
        }));
    }
    let mut posted = HashSet::new();
    for w in writers {
        posted.extend(w.await.unwrap());
    }
    assert_eq!(posted.len(), 20);

    let all = get_json(&client, format!("{}/labels", svc.base)).await;
    let all = all.as_array().unwrap().clone();
    assert_eq!(all.len(), 20);
    let exported: HashSet<String> = all.iter().map(|r| r["record_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(exported, posted);
    let stamps: Vec<&str> = all.iter().map(|r| r["created_at"].as_str().unwrap()).collect();
    let parsed: Vec<chrono::DateTime<chrono::Utc>> = stamps.iter().map(|s| s.parse().unwrap()).collect();
    assert!(parsed.windows(2).all(|w| w[0] <= w[1]), "created_at order");

    let one = get_json(&client, format!("{}/labels?labeler_id=writer-2", svc.base)).await;
    assert_eq!(one.as_array().unwrap().len(), 5);
    assert!(one.as_array().unwrap().iter().all(|r| r["labeler_id"] == "writer-2"));
    let man = get_json(&client, format!("{}/labels?label_kind=maneuver", svc.base)).await;
    assert_eq!(man.as_array().unwrap().len(), 8);
    let for_first = get_json(&client, format!("{}/labels?sortie_id={}", svc.base, ids[0])).await;
    assert!(for_first.as_array().unwrap().iter().all(|r| r["sortie_id"] == ids[0].as_str()));

    let lines = std::fs::read_to_string(&journal).unwrap();
    assert_eq!(lines.lines().count(), 20);

    let counted: u64 = get_json(&client, format!("{}/sorties", svc.base))
        .await
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["label_count"].as_u64().unwrap())
        .sum();
    assert_eq!(counted, 20);

    svc.stop().await;
    let again = start(config(corpus.path(), &journal)).await;
    let replayed = get_json(&client, format!("{}/labels", again.base)).await;
    assert_eq!(replayed.as_array().unwrap(), &all);
    again.stop().await;
}

#[tokio::test]
async fn error_statuses() {
    let corpus = corpus(2, 1);
    let jdir = tempfile::tempdir().unwrap();
    let svc = start(config(corpus.path(), &jdir.path().join("j.jsonl"))).await;
    let client = reqwest::Client::new();
    let sorties = get_json(&client, format!("{}/sorties", svc.base)).await;
    let first = &sorties[0];
    let id = first["sortie_id"].as_str().unwrap();
    let duration = first["duration"].as_f64().unwrap();
    let post = |id: String, body: String| {
        let client = client.clone();
        let url = format!("{}/sorties/{id}/labels", svc.base);
        async move {
            let r = client
                .post(url)
                .header("content-type", "application/json")
                .header("x-labeler-id", "ann")
                .body(body)
                .send()
                .await
                .unwrap();
            let status = r.status();
            let v: Value = r.json().await.unwrap();
            (status, v)
        }
    };

    let (s, v) = post("nope".into(), json!({"label_kind": "quality", "value": "good"}).to_string()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "UnknownSortie");

    let late = json!({"label_kind": "maneuver", "value": "climb", "t_start": 1.0, "t_end": duration + 100.0});
    let (s, v) = post(id.into(), late.to_string()).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "InvalidInterval");

    let (s, _) = post(id.into(), json!({"label_kind": "quality", "value": "good", "t_start": 0.0, "t_end": 1.0}).to_string()).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    for bad in ["{not json", r#"{"label_kind":"vibe","value":"x"}"#, r#"{"label_kind":"quality","value":"fine"}"#] {
        let (s, v) = post(id.into(), bad.into()).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{bad}");
        assert_eq!(v["error"], "MalformedRecord");
    }

    for url in [
        format!("{}/sorties/nope/trajectory", svc.base),
        format!("{}/sorties/nope/auto", svc.base),
        format!("{}/sorties/nope/render/topdown", svc.base),
    ] {
        assert_eq!(client.get(url).send().await.unwrap().status(), StatusCode::NOT_FOUND);
    }
    let r = client.get(format!("{}/labels?label_kind=vibe", svc.base)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let r = client.get(format!("{}/sorties/{id}/render/topdown?width=10", svc.base)).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    assert!(get_json(&client, format!("{}/labels", svc.base)).await.as_array().unwrap().is_empty());
    svc.stop().await;
}

#[tokio::test]
async fn trajectory_render_and_auto_views() {
    let corpus = corpus(2, 2);
    let tdir = tempfile::tempdir().unwrap();
    write_template_library(tdir.path(), &standard_templates(0.5).unwrap()).unwrap();
    let jdir = tempfile::tempdir().unwrap();
    let mut cfg = config(corpus.path(), &jdir.path().join("j.jsonl"));
    cfg.templates = Some(tdir.path().join("templates.json"));
    let svc = start(cfg).await;
    let client = reqwest::Client::new();
    let sorties = get_json(&client, format!("{}/sorties", svc.base)).await;

    for s in sorties.as_array().unwrap() {
        let id = s["sortie_id"].as_str().unwrap();
        let text = client
            .get(format!("{}/sorties/{id}/trajectory", svc.base))
            .send()
            .await
            .unwrap()
            .text()
            .await
            .unwrap();
        let tr = import_json(&text).unwrap();
        assert_eq!(tr.sortie_id(), id);
        assert_eq!(tr.len() as u64, s["sample_count"].as_u64().unwrap());

        for view in ["topdown", "altitude"] {
            let r = client.get(format!("{}/sorties/{id}/render/{view}", svc.base)).send().await.unwrap();
            assert_eq!(r.status(), StatusCode::OK);
            assert_eq!(r.headers()["content-type"], "image/svg+xml");
            let body = r.text().await.unwrap();
            assert!(body.contains("<svg") && body.contains("<polyline"));
        }

        let auto = get_json(&client, format!("{}/sorties/{id}/auto", svc.base)).await;
        assert_eq!(auto["auto_quality"], s["auto_quality"]);
        let kinds: Vec<&Value> = auto["irregularities"].as_array().unwrap().iter().map(|f| &f["kind"]).collect();
        for k in s["irregularities"].as_array().unwrap() {
            assert!(kinds.contains(&k));
        }
        let m = auto["match_results"].as_array().unwrap();
        assert_eq!(m.len(), 5);
        let total: f64 = m.iter().map(|r| r["combined_prob"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    let a = client.get(format!("{}/sorties", svc.base)).send().await.unwrap().text().await.unwrap();
    let b = client.get(format!("{}/sorties", svc.base)).send().await.unwrap().text().await.unwrap();
    assert_eq!(a, b);
    svc.stop().await;
}

#[tokio::test]
async fn startup_failures_are_reported_up_front() {
    let corpus = corpus(1, 1);
    let jdir = tempfile::tempdir().unwrap();
    let journal = jdir.path().join("j.jsonl");

    let missing = config(&corpus.path().join("absent"), &journal);
    assert!(matches!(bind(&missing).await, Err(ServiceError::CorpusNotFound { .. })));

    let unwritable = config(corpus.path(), jdir.path());
    assert!(matches!(bind(&unwritable).await, Err(ServiceError::JournalLocked(_))));

    let first = start(config(corpus.path(), &journal)).await;
    assert!(matches!(bind(&config(corpus.path(), &journal)).await, Err(ServiceError::JournalLocked(_))));
    first.stop().await;
    let second = bind(&config(corpus.path(), &journal)).await;
    assert!(second.is_ok(), "lock released on shutdown");
    drop(second);

    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let mut cfg = config(corpus.path(), &jdir.path().join("other.jsonl"));
    cfg.bind = taken.local_addr().unwrap();
    assert!(matches!(bind(&cfg).await, Err(ServiceError::BindFailure { .. })));
}
