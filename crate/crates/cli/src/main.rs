//! `sortie`: one entry point for every pipeline over sortie recordings.
//!
//! Exit status is 0 on success, 1 when the data fails a check (validation
//! issues, unreadable inputs, training errors) and 2 on usage errors. Any
//! failure also prints one JSON object on standard error.

mod config;
mod features;

use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sortie_core::classify::{
    balanced_split, evaluate, train_ensemble, train_logistic, train_naive_bayes, train_tree, Classifier, EnsembleParams,
    LogisticParams, Model, ModelDocument, ModelKind, SplitInfo, TreeParams,
};
use sortie_core::irregularity::write_report;
use sortie_core::matcher::{
    load_template_library, match_sortie, rolling_match, standard_templates, write_template_library, ManeuverTemplate, MatchConfig,
};
use sortie_core::render::{export_json, render_altitude, render_topdown, PlotSpec};
use sortie_core::sim::{gen_corpus_with, index_corpus, CorpusEntry, CorpusManifest, CorpusOptions};
use sortie_core::sorter::{evaluate_rules, tune_rules, ConfusionStats, RuleCandidates};
use sortie_core::summary::SummaryFeatures;
use sortie_core::tsv::{read_table, validate};
use sortie_core::{compute_summary, label_sortie, read_tsv_file, Quality, RuleSet};
use sortie_service::ServiceConfig;

use config::Settings;
use features::{FeatureFile, FeatureRow};

pub const CORPUS_ENV: &str = "SORTIE_CORPUS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed { kind: &'static str, message: String },
    /// Already reported line by line; just exit 1.
    Reported,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    fn failed(kind: &'static str, message: impl std::fmt::Display) -> Self {
        CliError::Failed {
            kind,
            message: message.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "sortie", version, about = "Flight-simulator sortie toolkit")]
struct Cli {
    /// `key = value` settings file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    #[value(alias = "random-forest")]
    Rf,
    #[value(alias = "bagging")]
    Bag,
    Tree,
    #[value(alias = "logistic")]
    Logit,
    #[value(alias = "naive-bayes")]
    Nb,
}

impl ModelArg {
    fn kind(self) -> ModelKind {
        match self {
            ModelArg::Rf => ModelKind::RandomForest,
            ModelArg::Bag => ModelKind::Bagging,
            ModelArg::Tree => ModelKind::Tree,
            ModelArg::Logit => ModelKind::Logistic,
            ModelArg::Nb => ModelKind::NaiveBayes,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum View {
    Topdown,
    Altitude,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check recorder files; issues go to stderr, one JSON object per line.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the irregularity detectors over a corpus and write the CSV report.
    LabelIrregularities {
        #[arg(env = CORPUS_ENV)]
        dir: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Good/bad verdicts from threshold rules, scored against truth if known.
    Sort {
        #[arg(env = CORPUS_ENV)]
        dir: Option<PathBuf>,
        /// `table1` or a rule-set JSON file.
        #[arg(long)]
        rules: Option<String>,
        /// Corpus manifest with truth labels.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Grid of candidate bounds (JSON); tunes the rules before scoring.
        #[arg(long, value_name = "GRID")]
        tune: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summary feature vectors for every sortie.
    Features {
        #[arg(env = CORPUS_ENV)]
        dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on a balanced split of a feature file.
    Train {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Score a trained model on the held-out rows (or all rows).
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Use every row instead of the held-out part of the training split.
        #[arg(long)]
        all: bool,
    },
    /// Rank maneuver templates against a sortie.
    Match {
        /// Library manifest, its directory, or `standard`.
        #[arg(long)]
        templates: Option<String>,
        #[arg(long)]
        sortie: PathBuf,
        /// Window and stride in seconds for a rolling scan.
        #[arg(long, num_args = 2, value_names = ["W", "S"])]
        rolling: Option<Vec<f64>>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        weight: Option<f64>,
    },
    /// Write the built-in template library.
    Templates {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        dt: f64,
    },
    /// Generate a synthetic corpus.
    Gen {
        #[arg(long)]
        good: usize,
        #[arg(long)]
        bad: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Draw a sortie as SVG, or export it as JSON.
    Render {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = View::Topdown)]
        view: View,
        #[arg(long, default_value_t = 800)]
        width: u32,
        #[arg(long, default_value_t = 600)]
        height: u32,
        #[arg(long, default_value_t = 20.0)]
        margin: f64,
        #[arg(long, default_value_t = 1.5)]
        stroke_width: f64,
        #[arg(long, default_value_t = 5000)]
        decimation: usize,
    },
    /// Run the label service.
    Serve {
        #[arg(long, env = CORPUS_ENV)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        journal: Option<PathBuf>,
        #[arg(long, value_name = "ADDR:PORT")]
        bind: Option<String>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        rules: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            return report(CliError::Usage(msg.trim().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    let (code, body) = match e {
        CliError::Usage(message) => (2, json!({"error": "usage", "message": message})),
        CliError::Failed { kind, message } => (1, json!({"error": kind, "message": message})),
        CliError::Reported => return ExitCode::from(1),
    };
    eprintln!("{body}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> CliResult<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Validate { files } => cmd_validate(&files),
        Command::LabelIrregularities { dir, report } => cmd_label(&corpus_dir(dir, &settings)?, &report, &settings),
        Command::Sort {
            dir,
            rules,
            truth,
            tune,
            report,
        } => cmd_sort(
            &corpus_dir(dir, &settings)?,
            rules.as_deref().or(settings.get("rules")),
            truth.as_deref(),
            tune.as_deref(),
            report.as_deref(),
        ),
        Command::Features { dir, out } => cmd_features(&corpus_dir(dir, &settings)?, &out),
        Command::Train {
            model,
            data,
            out,
            seed,
            train_fraction,
        } => {
            let seed = seed.or(settings.parsed("seed")?).unwrap_or(0);
            let frac = train_fraction.or(settings.parsed("train_fraction")?).unwrap_or(0.75);
            cmd_train(model.kind(), &data, &out, seed, frac)
        }
        Command::Evaluate { model, data, all } => cmd_evaluate(&model, &data, all),
        Command::Match {
            templates,
            sortie,
            rolling,
            temperature,
            weight,
        } => {
            let cfg = MatchConfig {
                temperature: temperature.or(settings.parsed("temperature")?).unwrap_or(1.0),
                combination_weight: weight.or(settings.parsed("combination_weight")?).unwrap_or(0.5),
                ..MatchConfig::default()
            };
            let templates = templates.or_else(|| settings.get("templates").map(String::from));
            cmd_match(templates.as_deref().unwrap_or("standard"), &sortie, rolling.as_deref(), &cfg)
        }
        Command::Templates { out, dt } => {
            let lib = standard_templates(dt).map_err(|e| CliError::usage(e.to_string()))?;
            write_template_library(&out, &lib).map_err(|e| CliError::failed("io", e))?;
            print_json(&json!({"templates": lib.iter().map(|t| &t.name).collect::<Vec<_>>(), "out": out}))
        }
        Command::Gen { good, bad, seed, out, dt } => {
            let mut opts = CorpusOptions::new(good, bad, seed.or(settings.parsed("seed")?).unwrap_or(0));
            if let Some(dt) = dt {
                opts.dt = dt;
            }
            let m = gen_corpus_with(&opts, &out).map_err(|e| CliError::failed("generation", e))?;
            print_json(&json!({"out": out, "seed": m.seed, "good": good, "bad": bad}))
        }
        Command::Render {
            file,
            out,
            view,
            width,
            height,
            margin,
            stroke_width,
            decimation,
        } => {
            let spec = PlotSpec::new(width, height, margin, stroke_width, decimation).map_err(|e| CliError::usage(e.to_string()))?;
            let tr = read_tsv_file(&file).map_err(|e| CliError::failed("parse", e))?;
            let body = match view {
                View::Topdown => render_topdown(&tr, &spec),
                View::Altitude => render_altitude(&tr, &spec),
                View::Json => export_json(&tr),
            };
            write_file(&out, body.as_bytes())?;
            print_json(&json!({"sortie_id": tr.sortie_id(), "view": format!("{view:?}").to_lowercase(), "out": out}))
        }
        Command::Serve {
            corpus,
            journal,
            bind,
            templates,
            rules,
        } => {
            let corpus = corpus_dir(corpus, &settings)?;
            let journal = journal
                .or_else(|| settings.path("journal"))
                .ok_or_else(|| CliError::usage("serve needs --journal"))?;
            let bind = bind.or_else(|| settings.get("bind").map(String::from)).unwrap_or_else(|| "127.0.0.1:8080".into());
            let addr: SocketAddr = bind.parse().map_err(|_| CliError::usage(format!("bad bind address `{bind}`")))?;
            let mut cfg = ServiceConfig::new(corpus, journal, addr);
            cfg.rules = load_rules(rules.as_deref().or(settings.get("rules")))?;
            cfg.detector = settings.detector;
            cfg.templates = templates.or_else(|| settings.path("templates"));
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::failed("runtime", e))?;
            rt.block_on(sortie_service::serve(&cfg)).map_err(|e| CliError::failed(e.kind(), e))
        }
    }
}

fn corpus_dir(flag: Option<PathBuf>, settings: &Settings) -> CliResult<PathBuf> {
    flag.or_else(|| settings.path("corpus"))
        .ok_or_else(|| CliError::usage(format!("no corpus directory: pass DIR, set {CORPUS_ENV}, or `corpus =` in --config")))
}

fn print_json(v: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::failed("json", e))?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        // a closed pipe (`| head`) is the reader's choice, not a failure
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| CliError::failed("io", e)),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::failed("io", format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::failed("io", format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::failed("io", format!("{}: {e}", path.display())))
}

fn index(dir: &Path) -> CliResult<Vec<CorpusEntry>> {
    if !dir.is_dir() {
        return Err(CliError::failed("corpus_not_found", dir.display()));
    }
    index_corpus(dir).map_err(|e| CliError::failed("corpus", e))
}

fn cmd_validate(files: &[PathBuf]) -> CliResult<()> {
    let mut stderr = std::io::stderr().lock();
    let mut total = 0;
    for f in files {
        let issues = match fs::read(f).map_err(|e| e.to_string()).and_then(|b| read_table(&b).map_err(|e| e.to_string())) {
            Ok(table) => validate(&table)
                .into_iter()
                .map(|i| json!({"file": f, "kind": i.kind, "row_index": i.row_index, "detail": i.detail}))
                .collect(),
            Err(detail) => vec![json!({"file": f, "kind": "unreadable", "detail": detail})],
        };
        total += issues.len();
        for i in issues {
            let _ = writeln!(stderr, "{i}");
        }
    }
    print_json(&json!({"files": files.len(), "issues": total}))?;
    if total > 0 {
        Err(CliError::Reported)
    } else {
        Ok(())
    }
}

fn cmd_label(dir: &Path, report: &Path, settings: &Settings) -> CliResult<()> {
    let entries = index(dir)?;
    let reports = entries
        .par_iter()
        .map(|e| {
            read_tsv_file(&e.path)
                .map(|t| label_sortie(&t, &settings.detector))
                .map_err(|err| CliError::failed("parse", format!("{}: {err}", e.path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_file(report, &write_report(&reports))?;
    let flagged = reports.iter().filter(|r| !r.clean).count();
    print_json(&json!({"sorties": reports.len(), "flagged": flagged, "report": report}))
}

fn load_rules(spec: Option<&str>) -> CliResult<RuleSet> {
    match spec.unwrap_or("table1") {
        "table1" => Ok(RuleSet::table1()),
        path => RuleSet::from_json(&read_text(Path::new(path))?).map_err(|e| CliError::usage(format!("rules {path}: {e}"))),
    }
}

fn summaries(entries: &[CorpusEntry]) -> CliResult<Vec<SummaryFeatures>> {
    entries
        .par_iter()
        .map(|e| {
            read_tsv_file(&e.path)
                .map(|t| compute_summary(&t))
                .map_err(|err| CliError::failed("parse", format!("{}: {err}", e.path.display())))
        })
        .collect()
}

#[derive(Serialize)]
struct Verdict<'a> {
    sortie_id: &'a str,
    auto_quality: Quality,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_quality: Option<Quality>,
}

#[derive(Serialize)]
struct SortReport<'a> {
    rules: &'a RuleSet,
    tuned: bool,
    verdicts: Vec<Verdict<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<ConfusionStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tnr: Option<f64>,
}

fn cmd_sort(dir: &Path, rules: Option<&str>, truth: Option<&Path>, tune: Option<&Path>, report: Option<&Path>) -> CliResult<()> {
    let entries = index(dir)?;
    let truths: Vec<Option<Quality>> = match truth {
        Some(p) => {
            let m: CorpusManifest =
                serde_json::from_str(&read_text(p)?).map_err(|e| CliError::usage(format!("truth manifest {}: {e}", p.display())))?;
            entries
                .iter()
                .map(|e| m.entries.iter().find(|x| x.sortie_id == e.sortie_id).map(|x| x.truth_quality))
                .collect()
        }
        None => entries.iter().map(|e| e.truth).collect(),
    };
    let feats = summaries(&entries)?;
    let labeled: Option<Vec<(SummaryFeatures, Quality)>> =
        feats.iter().zip(&truths).map(|(f, t)| t.map(|q| (f.clone(), q))).collect();

    let (rules, tuned) = match tune {
        Some(grid_path) => {
            let grid: Vec<RuleCandidates> = serde_json::from_str(&read_text(grid_path)?)
                .map_err(|e| CliError::usage(format!("grid {}: {e}", grid_path.display())))?;
            let labeled = labeled.as_ref().ok_or_else(|| CliError::usage("--tune needs truth for every sortie"))?;
            let t = tune_rules(labeled, &grid).map_err(|e| CliError::failed("tuning", e))?;
            (t.rules, true)
        }
        None => (load_rules(rules)?, false),
    };

    let verdicts: Vec<Verdict> = entries
        .iter()
        .zip(&feats)
        .zip(&truths)
        .map(|((e, f), t)| Verdict {
            sortie_id: &e.sortie_id,
            auto_quality: if evaluate_rules(f, &rules) { Quality::Good } else { Quality::Bad },
            truth_quality: *t,
        })
        .collect();
    let stats = match &labeled {
        Some(_) => Some(
            ConfusionStats::from_pairs(verdicts.iter().map(|v| (v.truth_quality.unwrap(), v.auto_quality == Quality::Good)))
                .map_err(|e| CliError::failed("scoring", e))?,
        ),
        None => None,
    };
    let out = SortReport {
        rules: &rules,
        tuned,
        tpr: stats.map(|s| s.true_positive_rate),
        tnr: stats.map(|s| s.true_negative_rate),
        stats,
        verdicts,
    };
    match report {
        Some(p) => {
            let text = serde_json::to_string_pretty(&out).map_err(|e| CliError::failed("json", e))?;
            write_file(p, text.as_bytes())?;
            print_json(&json!({"sorties": entries.len(), "tpr": out.tpr, "tnr": out.tnr, "report": p}))
        }
        None => print_json(&out),
    }
}

fn cmd_features(dir: &Path, out: &Path) -> CliResult<()> {
    let entries = index(dir)?;
    let feats = summaries(&entries)?;
    let file = FeatureFile {
        feature_names: SummaryFeatures::feature_names(),
        rows: entries
            .iter()
            .zip(feats)
            .map(|(e, f)| FeatureRow {
                sortie_id: e.sortie_id.clone(),
                truth: e.truth,
                features: f.values,
            })
            .collect(),
    };
    let text = serde_json::to_string(&file).map_err(|e| CliError::failed("json", e))?;
    write_file(out, text.as_bytes())?;
    print_json(&json!({"sorties": file.rows.len(), "features": file.feature_names.len(), "out": out}))
}

fn load_features(path: &Path) -> CliResult<sortie_core::classify::Dataset> {
    let file: FeatureFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::usage(format!("features {}: {e}", path.display())))?;
    file.to_dataset().map_err(|e| CliError::failed("dataset", e))
}

fn cmd_train(kind: ModelKind, data: &Path, out: &Path, seed: u64, frac: f64) -> CliResult<()> {
    let all = load_features(data)?;
    let (train, test) = balanced_split(&all, frac, seed).map_err(|e| CliError::failed("split", e))?;
    let fail = |e: sortie_core::classify::ClassifyError| CliError::failed("training", e);
    let model = match kind {
        ModelKind::RandomForest => Model::Forest(train_ensemble(&train, &EnsembleParams::random_forest(seed)).map_err(fail)?),
        ModelKind::Bagging => Model::Forest(train_ensemble(&train, &EnsembleParams::bagging(seed)).map_err(fail)?),
        ModelKind::Tree => Model::Tree(train_tree(&train, &TreeParams { seed, ..TreeParams::default() }).map_err(fail)?),
        ModelKind::Logistic => Model::Logistic(train_logistic(&train, &LogisticParams::default()).map_err(fail)?),
        ModelKind::NaiveBayes => Model::NaiveBayes(train_naive_bayes(&train).map_err(fail)?),
    };
    let mut doc = ModelDocument::new(kind, all.class_names.clone(), all.feature_names.clone(), model);
    doc.split = Some(SplitInfo {
        seed,
        train_fraction: frac,
    });
    write_file(out, doc.to_json().as_bytes())?;
    let held_out = evaluate(&doc.model, &test).map_err(|e| CliError::failed("evaluation", e))?;
    print_json(&json!({"model": kind, "train_rows": train.len(), "test_rows": test.len(), "held_out": held_out, "out": out}))
}

fn cmd_evaluate(model: &Path, data: &Path, all: bool) -> CliResult<()> {
    let doc = ModelDocument::from_json(&read_text(model)?).map_err(|e| CliError::failed("model", e))?;
    let dataset = load_features(data)?;
    if dataset.n_features() != doc.feature_names.len() && !doc.feature_names.is_empty() {
        return Err(CliError::failed(
            "dataset",
            format!("model expects {} features, data has {}", doc.feature_names.len(), dataset.n_features()),
        ));
    }
    let test = match (all, doc.split) {
        (false, Some(s)) => balanced_split(&dataset, s.train_fraction, s.seed).map_err(|e| CliError::failed("split", e))?.1,
        _ => dataset,
    };
    let report = evaluate(&doc.model, &test).map_err(|e| CliError::failed("evaluation", e))?;
    let predictions: Vec<_> = test
        .ids
        .iter()
        .zip(doc.model.predict_all(&test.features))
        .map(|(id, p)| json!({"sortie_id": id, "predicted": doc.class_names[p]}))
        .collect();
    print_json(&json!({"model": doc.kind, "rows": test.len(), "report": report, "predictions": predictions}))
}

fn templates(spec: &str) -> CliResult<Vec<ManeuverTemplate>> {
    if spec == "standard" {
        return standard_templates(0.2).map_err(|e| CliError::failed("templates", e));
    }
    load_template_library(Path::new(spec)).map_err(|e| CliError::failed("templates", e))
}

fn cmd_match(spec: &str, sortie: &Path, rolling: Option<&[f64]>, cfg: &MatchConfig) -> CliResult<()> {
    let lib = templates(spec)?;
    let tr = read_tsv_file(sortie).map_err(|e| CliError::failed("parse", e))?;
    let usage_or_fail = |e: sortie_core::matcher::MatchError| {
        use sortie_core::matcher::MatchError::*;
        match e {
            InvalidTemperature(_) | InvalidWeight(_) | WindowTooLong { .. } | WindowTooShort { .. } => CliError::usage(e.to_string()),
            other => CliError::failed("matching", other),
        }
    };
    match rolling {
        None => print_json(&match_sortie(&lib, &tr, cfg).map_err(usage_or_fail)?),
        Some(ws) => {
            let scans = lib
                .par_iter()
                .map(|t| rolling_match(t, &tr, ws[0], ws[1], cfg))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage_or_fail)?;
            print_json(&scans)
        }
    }
}
