//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sortie_core::classify::{
    balanced_split, evaluate, loss_and_gradient, train_ensemble, train_logistic, train_tree, Dataset, EnsembleParams,
    LogisticParams, TreeParams,
};
use sortie_core::irregularity::write_report;
use sortie_core::matcher::{cmd, dtw_distance, match_probabilities, standard_templates, CorrelationMatrix};
use sortie_core::sim::{embed_template, gen_corpus, gen_good_sortie, index_corpus, SegmentKind, SegmentSpec};
use sortie_core::sorter::{score_features, tune_rules, Comparator, RuleCandidates};
use sortie_core::summary::Statistic;
use sortie_core::{
    compute_summary, label_sortie, match_sortie, parse_tsv, read_tsv_file, rolling_match, write_tsv, Channel,
    DetectorConfig, FlagKind, FlaggedInterval, IrregularityReport, MatchConfig, Quality, RuleSet, SummaryFeatures,
    Trajectory,
};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs()))
}

struct Corpus {
    _dir: tempfile::TempDir,
    sorties: Vec<(Trajectory, Quality)>,
}

/// The 200/200 corpus shared by the sorter, classifier and format checks.
fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        gen_corpus(200, 200, 2024, dir.path()).unwrap();
        let sorties = index_corpus(dir.path())
            .unwrap()
            .into_iter()
            .map(|e| (read_tsv_file(&e.path).unwrap(), e.truth.unwrap()))
            .collect();
        Corpus { _dir: dir, sorties }
    })
}

// ---------- DTW ----------

/// Every monotone path from (0,0) to (n-1,m-1), as flat cell indices.
fn all_paths(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn walk(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        cur.push(i * m + j);
        if i == n - 1 && j == m - 1 {
            out.push(cur.clone());
        } else {
            if i + 1 < n && j + 1 < m {
                walk(i + 1, j + 1, n, m, cur, out);
            }
            if i + 1 < n {
                walk(i + 1, j, n, m, cur, out);
            }
            if j + 1 < m {
                walk(i, j + 1, n, m, cur, out);
            }
        }
        cur.pop();
    }
    let mut out = Vec::new();
    walk(0, 0, n, m, &mut Vec::new(), &mut out);
    out
}

/// Minimum over enumerated paths, summing costs from the start cell onward.
fn brute_force(a: &[f64], b: &[f64], paths: &[Vec<usize>]) -> f64 {
    let m = b.len();
    let cost: Vec<f64> = (0..a.len() * m).map(|k| (a[k / m] - b[k % m]).abs()).collect();
    let mut best = f64::INFINITY;
    'paths: for p in paths {
        let mut s = 0.0;
        for &c in p {
            s += cost[c];
            // costs are non-negative, so a partial sum already at best cannot win
            if s > best {
                continue 'paths;
            }
        }
        if s < best {
            best = s;
        }
    }
    best
}

fn sequences(max_len: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        for code in 0..3usize.pow(len as u32) {
            let mut c = code;
            out.push(
                (0..len)
                    .map(|_| {
                        let v = (c % 3) as f64;
                        c /= 3;
                        v
                    })
                    .collect(),
            );
        }
    }
    out
}

fn dtw_oracle() -> Outcome {
    let started = Instant::now();
    let shapes: Vec<Vec<Vec<Vec<usize>>>> = (1..=8).map(|n| (1..=8).map(|m| all_paths(n, m)).collect()).collect();
    let paths = |n: usize, m: usize| &shapes[n - 1][m - 1];

    let seqs = sequences(6);
    let mut pairs = 0usize;
    for a in &seqs {
        for b in &seqs {
            let want = brute_force(a, b, paths(a.len(), b.len()));
            let got = dtw_distance(a, b).map_err(|e| e.to_string())?;
            ensure(got.to_bits() == want.to_bits(), || format!("{a:?} vs {b:?}: dtw {got}, enumeration {want}"))?;
            pairs += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let (n, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let want = brute_force(&a, &b, paths(n, m));
        let got = dtw_distance(&a, &b).map_err(|e| e.to_string())?;
        ensure(got.to_bits() == want.to_bits(), || format!("{a:?} vs {b:?}: dtw {got:e}, enumeration {want:e}"))?;
    }
    within(Duration::from_secs(60), started)?;
    Ok(format!("{pairs} exhaustive pairs + 1000 random pairs bitwise equal"))
}

// ---------- detectors ----------

fn detector_closed_loop() -> Outcome {
    let started = Instant::now();
    let cfg = DetectorConfig::default();
    let (mut good, mut injected, mut caught, mut uncategorized) = (0, 0, 0, 0);
    for seed in 0..50u64 {
        let dir = tempfile::tempdir().unwrap();
        gen_corpus(2, 5, 1000 + seed, dir.path()).map_err(|e| e.to_string())?;
        for e in index_corpus(dir.path()).map_err(|e| e.to_string())? {
            let tr = read_tsv_file(&e.path).map_err(|e| e.to_string())?;
            let report = label_sortie(&tr, &cfg);
            if e.truth == Some(Quality::Good) {
                good += 1;
                ensure(report.clean, || format!("seed {seed}: good sortie {} flagged {:?}", e.sortie_id, report.flags))?;
                continue;
            }
            let kinds: Vec<FlagKind> = report.flags.iter().map(|f| f.kind).collect();
            for d in &e.defects {
                match d.kind.expected_flag() {
                    Some(k) => {
                        injected += 1;
                        ensure(kinds.contains(&k), || format!("seed {seed}: {} {:?} gave {kinds:?}", e.sortie_id, d.kind))?;
                        caught += 1;
                    }
                    None => uncategorized += 1,
                }
            }
        }
    }
    within(Duration::from_secs(60), started)?;
    Ok(format!(
        "{good} good sorties clean, {caught}/{injected} categorized defects caught ({uncategorized} straight-line sorties have no flag category)"
    ))
}

// ---------- sorter ----------

fn statistical_sorter() -> Outcome {
    let feats: Vec<(SummaryFeatures, Quality)> = corpus().sorties.iter().map(|(t, q)| (compute_summary(t), *q)).collect();
    let cand = |channel, statistic, comparator, bounds: [f64; 5]| RuleCandidates {
        channel,
        statistic,
        comparator,
        bounds: bounds.to_vec(),
    };
    let grid = [
        cand(Channel::TotalSpeed, Statistic::Max, Comparator::Lt, [200.0, 300.0, 400.0, 600.0, 1000.0]),
        cand(Channel::TotalSpeed, Statistic::Min, Comparator::Gt, [1.0, 5.0, 10.0, 20.0, 25.0]),
        cand(Channel::Roll, Statistic::Range, Comparator::Gt, [1.0, 5.0, 10.0, 20.0, 40.0]),
    ];
    let tuned = tune_rules(&feats, &grid).map_err(|e| e.to_string())?;
    let s = &tuned.stats;
    ensure(s.true_positive_rate >= 0.95 && s.true_negative_rate >= 0.95, || {
        format!("tuned TPR {:.3} TNR {:.3}", s.true_positive_rate, s.true_negative_rate)
    })?;

    let table1 = RuleSet::named("table1").map_err(|e| e.to_string())?;
    let t1 = score_features(&feats, &table1).map_err(|e| e.to_string())?;
    let text: Vec<String> = table1.rules().iter().map(|r| r.to_string()).collect();
    for want in ["mean xEast < 500", "std xEast < 100", "mean roll < 0"] {
        ensure(text.iter().any(|t| t == want), || format!("table1 lacks `{want}`: {text:?}"))?;
    }
    Ok(format!(
        "tuned TPR {:.3} TNR {:.3} ({}); table1 TPR {:.3} TNR {:.3} with rules {text:?}",
        s.true_positive_rate,
        s.true_negative_rate,
        tuned.rules.rules().iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", "),
        t1.true_positive_rate,
        t1.true_negative_rate
    ))
}

// ---------- classifiers ----------

fn classifiers() -> Outcome {
    let sorties = &corpus().sorties;
    let data = Dataset::new(
        sorties.iter().map(|(t, _)| compute_summary(t).values.to_vec()).collect(),
        sorties.iter().map(|(_, q)| usize::from(*q == Quality::Bad)).collect(),
        vec!["good".into(), "bad".into()],
    )
    .map_err(|e| e.to_string())?;
    let (train, test) = balanced_split(&data, 0.75, 7).map_err(|e| e.to_string())?;
    let err = |e: sortie_core::classify::ClassifyError| e.to_string();

    let rf = evaluate(&train_ensemble(&train, &EnsembleParams::random_forest(7)).map_err(err)?, &test).map_err(err)?.accuracy;
    let bag = evaluate(&train_ensemble(&train, &EnsembleParams::bagging(7)).map_err(err)?, &test).map_err(err)?.accuracy;
    let tree = evaluate(&train_tree(&train, &TreeParams::default()).map_err(err)?, &test).map_err(err)?.accuracy;
    let logit = evaluate(&train_logistic(&train, &LogisticParams::default()).map_err(err)?, &test).map_err(err)?.accuracy;
    let summary = format!("held-out accuracy rf {rf:.3}, bagging {bag:.3}, tree {tree:.3}, logistic {logit:.3}");
    ensure(rf >= 0.98 && bag >= 0.98 && tree >= 0.90 && logit >= 0.90, || summary.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, d, l2) = (30, 6, 0.01);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = 0.3;
    let (_, gw, gb) = loss_and_gradient(&w, b, &x, &y, l2);
    let h = 1e-6;
    let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
    let mut worst: f64 = 0.0;
    for k in 0..d {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[k] += h;
        down[k] -= h;
        let numeric = (loss_and_gradient(&up, b, &x, &y, l2).0 - loss_and_gradient(&down, b, &x, &y, l2).0) / (2.0 * h);
        worst = worst.max(rel(gw[k], numeric));
    }
    let numeric = (loss_and_gradient(&w, b + h, &x, &y, l2).0 - loss_and_gradient(&w, b - h, &x, &y, l2).0) / (2.0 * h);
    worst = worst.max(rel(gb, numeric));
    ensure(worst < 1e-5, || format!("gradient relative error {worst:e}"))?;
    Ok(format!("{summary}; gradient relative error {worst:.1e}"))
}

// ---------- matcher ----------

fn matcher() -> Outcome {
    let lib = standard_templates(0.2).map_err(|e| e.to_string())?;
    let cfg = MatchConfig::default();
    let (mut top1, mut localized, mut worst_sum) = (0, 0, 0.0f64);
    for k in 0..50usize {
        let t = &lib[k % lib.len()];
        let lead = 40.0 + 3.0 * (k / lib.len()) as f64 + 0.2 * (k % 3) as f64;
        let host = gen_good_sortie(
            k as u64,
            &[
                SegmentSpec::new(SegmentKind::Climb { speed: 100.0, rate: 20.0 }, 25.0),
                SegmentSpec::new(SegmentKind::LevelCruise { speed: 100.0, heading: Some(30.0 + 7.0 * k as f64) }, lead + t.duration() + 35.0),
            ],
            0.2,
        )
        .map_err(|e| e.to_string())?;
        let sortie = embed_template(&host, &t.name, &t.trajectory, lead).map_err(|e| e.to_string())?;
        let ranked = match_sortie(&lib, &sortie, &cfg).map_err(|e| e.to_string())?;
        if ranked[0].template == t.name {
            top1 += 1;
        }
        let sum: f64 = ranked.iter().map(|r| r.combined_prob).sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        let rolled = rolling_match(t, &sortie, t.duration(), 0.5, &cfg).map_err(|e| e.to_string())?;
        if (rolled.best_window().t_start - lead).abs() <= 2.0 {
            localized += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let dist: Vec<f64> = (0..rng.gen_range(1..12)).map(|_| rng.gen_range(0.0..500.0)).collect();
        let p = match_probabilities(&dist, rng.gen_range(0.05..5.0)).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum <= 1e-12, || format!("probabilities sum off by {worst_sum:e}"))?;

    for i in 0..100 {
        let k = rng.gen_range(2..8);
        let len = rng.gen_range(10..60);
        let series: Vec<Vec<f64>> = (0..k).map(|_| (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
        let a = CorrelationMatrix::from_series(vec![Channel::Vx; k], &series);
        let d = cmd(&a, &a).map_err(|e| e.to_string())?;
        ensure(d == 0.0, || format!("matrix {i}: cmd(A, A) = {d:e}"))?;
    }

    let summary = format!("top-1 {top1}/50, rolling within 2 s {localized}/50, max |sum p - 1| {worst_sum:.1e}, cmd(A,A)=0 on 100 matrices");
    ensure(top1 >= 45 && localized >= 45, || summary.clone())?;
    Ok(summary)
}

// ---------- formats ----------

fn formats() -> Outcome {
    let sorties = &corpus().sorties;
    for (tr, _) in sorties {
        let again = parse_tsv(&write_tsv(tr), tr.sortie_id()).map_err(|e| e.to_string())?;
        ensure(again.samples() == tr.samples(), || format!("{} changed after a write/parse round trip", tr.sortie_id()))?;
    }

    let flag = |kind, t_start, t_end| FlaggedInterval { kind, t_start, t_end };
    let reports = vec![
        IrregularityReport {
            sortie_id: "12000003002".into(),
            flags: vec![flag(FlagKind::TeleportationOrImpossibleSpeed, 77.0, 77.2)],
            clean: false,
        },
        IrregularityReport {
            sortie_id: "12000001001".into(),
            flags: vec![flag(FlagKind::IrregularStopping, 300.2, 318.0), flag(FlagKind::TaxiingOrStopped, 0.0, 42.5)],
            clean: false,
        },
        IrregularityReport {
            sortie_id: "12000002001".into(),
            flags: vec![],
            clean: true,
        },
        IrregularityReport {
            sortie_id: "odd,id".into(),
            flags: vec![flag(FlagKind::IrregularStopping, 1.5, 9.0)],
            clean: false,
        },
    ];
    let golden_path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/report.csv");
    let golden = std::fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    let written = String::from_utf8(write_report(&reports)).unwrap();
    ensure(written == golden, || format!("report differs from golden file:\n{written}"))?;

    let printed = "\ttime (sec)\txEast (m)\tyNorth (m)\tzUp (m)\tvx (m/s)\tvy (m/s)\tvz (m/s)\thead (deg)\tpitch (deg)\troll (deg)\n\
                   1\t1\t1.67E+00\t1.67E+00\t1.00E+00\t3.23E-03\t-2.28E-03\t1.30E-05\t1.25E+02\t1.62E+00\t1.21E-06\n\
                   2\t1.20E+00\t1.67E+00\t1.67E+00\t1.00E+00\t3.21E-03\t-2.27E-03\t-2.08E-06\t1.25E+02\t1.62E+00\t8.90E-03\n";
    let tr = parse_tsv(printed.as_bytes(), "printed").map_err(|e| e.to_string())?;
    let got = tr.samples()[0].to_array();
    let want = [1.0, 1.67, 1.67, 1.0, 3.23e-3, -2.28e-3, 1.30e-5, 125.0, 1.62, 1.21e-6];
    ensure(got == want, || format!("printed row parsed as {got:?}"))?;
    Ok(format!("{} sorties round-trip exactly; golden report matches; printed row exact", sorties.len()))
}

// ---------- service ----------

fn service() -> Outcome {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
    rt.block_on(service_run())
}

async fn service_run() -> Outcome {
    use sortie_service::{bind, ServiceConfig};
    use tokio::sync::oneshot;

    let corpus = tempfile::tempdir().unwrap();
    gen_corpus(5, 5, 31, corpus.path()).map_err(|e| e.to_string())?;
    let jdir = tempfile::tempdir().unwrap();
    let journal = jdir.path().join("labels.jsonl");
    let cfg = ServiceConfig::new(corpus.path(), &journal, SocketAddr::from(([127, 0, 0, 1], 0)));

    let start = |cfg: ServiceConfig| async move {
        let bound = bind(&cfg).await.map_err(|e| e.to_string())?;
        let base = format!("http://{}", bound.local_addr());
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(bound.run_until(async {
            let _ = rx.await;
        }));
        Ok::<_, String>((base, tx, task))
    };
    let fetch = |client: reqwest::Client, url: String| async move {
        let r = client.get(url).send().await.map_err(|e| e.to_string())?;
        ensure(r.status().is_success(), || format!("status {}", r.status()))?;
        r.json::<serde_json::Value>().await.map_err(|e| e.to_string())
    };

    let (base, stop, task) = start(cfg.clone()).await?;
    let client = reqwest::Client::new();
    let sorties = fetch(client.clone(), format!("{base}/sorties")).await?;
    let ids: Vec<String> = sorties.as_array().into_iter().flatten().filter_map(|s| s["sortie_id"].as_str().map(String::from)).collect();
    ensure(ids.len() == 10, || format!("{} sorties listed", ids.len()))?;

    let mut writers = Vec::new();
    for w in 0..4 {
        let (client, base, ids) = (client.clone(), base.clone(), ids.clone());
        writers.push(tokio::spawn(async move {
            let mut out = Vec::new();
            for k in 0..5 {
                let body = if k % 2 == 0 {
                    serde_json::json!({"label_kind": "quality", "value": "good"})
                } else {
                    serde_json::json!({"label_kind": "maneuver", "value": "climb", "t_start": 5.0, "t_end": 15.0})
                };
                let r = client
                    .post(format!("{base}/sorties/{}/labels", ids[(3 * w + k) % ids.len()]))
                    .header("x-labeler-id", format!("labeler-{w}"))
                    .json(&body)
                    .send()
                    .await
                    .map_err(|e| e.to_string())?;
                ensure(r.status().as_u16() == 201, || format!("POST gave {}", r.status()))?;
                let v: serde_json::Value = r.json().await.map_err(|e| e.to_string())?;
                out.push(v["record_id"].as_str().unwrap_or_default().to_string());
            }
            Ok::<_, String>(out)
        }));
    }
    let mut posted = HashSet::new();
    for w in writers {
        posted.extend(w.await.map_err(|e| e.to_string())??);
    }
    ensure(posted.len() == 20, || format!("{} distinct record ids from 20 posts", posted.len()))?;

    let exported = fetch(client.clone(), format!("{base}/labels")).await?;
    let got: HashSet<String> = exported.as_array().into_iter().flatten().filter_map(|r| r["record_id"].as_str().map(String::from)).collect();
    ensure(exported.as_array().map(Vec::len) == Some(20) && got == posted, || "export does not match the posted records".into())?;

    let _ = stop.send(());
    task.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let (base, stop, task) = start(cfg).await?;
    let replayed = fetch(client.clone(), format!("{base}/labels")).await?;
    ensure(replayed == exported, || "export after restart differs".into())?;
    let _ = stop.send(());
    task.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    Ok("10 sorties, 20 labels from 4 writers, unique ids, identical replay after restart".into())
}

fn main() -> ExitCode {
    let checks: [Check; 7] = [
        ("dtw oracle equivalence", dtw_oracle),
        ("detector closed loop", detector_closed_loop),
        ("statistical sorter", statistical_sorter),
        ("classifiers", classifiers),
        ("maneuver matcher", matcher),
        ("formats", formats),
        ("label service", service),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
