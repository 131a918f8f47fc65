use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{embed_template, gen_good_sortie, inject_defect, DefectKind, DefectSpec, SegmentKind, SegmentSpec, SimError};
use crate::sorter::Quality;
use crate::trajectory::{EmbeddedTemplate, Trajectory};
use crate::tsv::write_tsv;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sortie_id: String,
    /// Relative to the corpus directory.
    pub file: String,
    pub truth_quality: Quality,
    #[serde(default)]
    pub defects: Vec<DefectSpec>,
    #[serde(default)]
    pub embedded_templates: Vec<EmbeddedTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub dt: f64,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn read(dir: &Path) -> Result<Self, SimError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|source| SimError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|e| SimError::Manifest {
            path,
            detail: e.to_string(),
        })
    }
}

/// `(n_good, n_bad)` for `total` sorties split `good_parts : bad_parts`,
/// e.g. `ratio_split(400, 88, 12)`.
pub fn ratio_split(total: usize, good_parts: usize, bad_parts: usize) -> (usize, usize) {
    let parts = (good_parts + bad_parts).max(1);
    let good = ((total * good_parts) as f64 / parts as f64).round() as usize;
    (good, total - good)
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub n_good: usize,
    pub n_bad: usize,
    pub seed: u64,
    pub dt: f64,
    /// Templates spliced into good sorties, one per sortie, cycling.
    pub templates: Vec<(String, Trajectory)>,
}

impl CorpusOptions {
    pub fn new(n_good: usize, n_bad: usize, seed: u64) -> Self {
        CorpusOptions {
            n_good,
            n_bad,
            seed,
            dt: super::DEFAULT_DT,
            templates: Vec::new(),
        }
    }
}

/// Random realistic flight: a climb out, then four to eight segments with
/// at least one turn. Descents are only drawn when altitude allows.
pub fn random_segments(rng: &mut impl Rng) -> Vec<SegmentSpec> {
    let mut speed: f64 = rng.gen_range(80.0..120.0);
    let climb = rng.gen_range(6.0..14.0);
    let climb_time = rng.gen_range(30..=60) as f64;
    let mut altitude = climb * climb_time;
    let mut segs = vec![SegmentSpec::new(SegmentKind::Climb { speed, rate: climb }, climb_time)];

    let n = rng.gen_range(4..=8);
    let turn_slot = rng.gen_range(0..n);
    for i in 0..n {
        speed = (speed + rng.gen_range(-15.0..15.0)).clamp(50.0, 140.0);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let pick = if i == turn_slot { 1 } else { rng.gen_range(0..5) };
        let (kind, duration) = match pick {
            0 => (SegmentKind::LevelCruise { speed, heading: None }, rng.gen_range(20..=90) as f64),
            1 => (
                SegmentKind::ConstantRateTurn {
                    speed,
                    turn_rate: sign * rng.gen_range(2.0..8.0),
                },
                rng.gen_range(15..=60) as f64,
            ),
            2 => {
                let rate = rng.gen_range(3.0..12.0);
                let d = rng.gen_range(15..=45) as f64;
                altitude += rate * d;
                (SegmentKind::Climb { speed, rate }, d)
            }
            3 => {
                let rate = rng.gen_range(3.0..10.0);
                let d = rng.gen_range(15..=45) as f64;
                // the easing adds a little extra drop; keep a wide margin
                if altitude - rate * (d + 10.0) >= 150.0 {
                    altitude -= rate * d;
                    (SegmentKind::Descent { speed, rate }, d)
                } else {
                    (SegmentKind::LevelCruise { speed, heading: None }, d)
                }
            }
            _ => {
                let period = rng.gen_range(20..=40) as f64;
                (
                    SegmentKind::STurn {
                        speed,
                        turn_rate: sign * rng.gen_range(3.0..8.0),
                        period,
                    },
                    period * rng.gen_range(1..=2) as f64,
                )
            }
        };
        segs.push(SegmentSpec::new(kind, duration).with_transition(5.0));
    }
    segs
}

fn good_id(i: usize) -> String {
    format!("{}", 12_000_000_000u64 + (i as u64 + 1) * 1000 + 1)
}

fn bad_id(n_good: usize, j: usize) -> String {
    format!("{}", 12_000_000_000u64 + (n_good as u64 + j as u64 + 1) * 1000 + 2)
}

fn defect_for(kind: DefectKind, host: &Trajectory, rng: &mut impl Rng) -> DefectSpec {
    let s = host.samples();
    let n = s.len();
    let at = s[rng.gen_range(n / 5..(4 * n / 5).max(n / 5 + 1))].t;
    let magnitude = match kind {
        DefectKind::Teleport => rng.gen_range(1000.0..8000.0),
        DefectKind::ImpossibleSpeed => rng.gen_range(3.0..10.0),
        DefectKind::FrozenMidair => rng.gen_range(8..=30) as f64,
        DefectKind::GroundIdle => rng.gen_range(30..=120) as f64,
        DefectKind::StraightLineOnly => rng.gen_range(60.0..140.0),
    };
    let at = match kind {
        DefectKind::GroundIdle | DefectKind::StraightLineOnly => host.t_first(),
        _ => at,
    };
    DefectSpec { kind, at, magnitude }
}

struct Generated {
    entry: ManifestEntry,
    traj: Trajectory,
}

fn generate_one(opts: &CorpusOptions, index: usize, bad: bool) -> Result<Generated, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // separate stream families keep good sorties independent of n_bad and vice versa
    rng.set_stream(if bad { (1u64 << 32) + index as u64 } else { index as u64 });
    let segments = random_segments(&mut rng);
    let mut traj = gen_good_sortie(rng.gen(), &segments, opts.dt)?;
    let (id, folder, truth, mut defects) = if bad {
        (bad_id(opts.n_good, index), "bad", Quality::Bad, Vec::new())
    } else {
        (good_id(index), "good", Quality::Good, Vec::new())
    };
    if !bad && !opts.templates.is_empty() {
        let (name, tmpl) = &opts.templates[index % opts.templates.len()];
        let latest = traj.t_last() - tmpl.duration();
        let earliest = traj.t_first() + 0.2 * traj.duration();
        if latest > earliest {
            let at = rng.gen_range(earliest..latest);
            traj = embed_template(&traj, name, tmpl, at)?;
        }
    }
    if bad {
        let kind = DefectKind::ALL[index % DefectKind::ALL.len()];
        let d = defect_for(kind, &traj, &mut rng);
        traj = inject_defect(&traj, &d)?;
        defects.push(d);
    }
    let traj = traj.with_sortie_id(id.clone());
    Ok(Generated {
        entry: ManifestEntry {
            file: format!("{folder}/{id}.tsv"),
            sortie_id: id,
            truth_quality: truth,
            defects,
            embedded_templates: traj.embedded().to_vec(),
        },
        traj,
    })
}

pub fn gen_corpus(n_good: usize, n_bad: usize, seed: u64, out_dir: &Path) -> Result<CorpusManifest, SimError> {
    gen_corpus_with(&CorpusOptions::new(n_good, n_bad, seed), out_dir)
}

/// Writes `good/*.tsv`, `bad/*.tsv` and `manifest.json` under `out_dir`.
/// Bad sorties cycle through the defect kinds. Output bytes depend only on
/// the options.
pub fn gen_corpus_with(opts: &CorpusOptions, out_dir: &Path) -> Result<CorpusManifest, SimError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SimError::Io { path, source }
    };
    for folder in ["good", "bad"] {
        let d = out_dir.join(folder);
        fs::create_dir_all(&d).map_err(io(&d))?;
    }
    let jobs: Vec<(usize, bool)> = (0..opts.n_good).map(|i| (i, false)).chain((0..opts.n_bad).map(|j| (j, true))).collect();
    let entries = jobs
        .par_iter()
        .map(|&(i, bad)| {
            let g = generate_one(opts, i, bad)?;
            let path = out_dir.join(&g.entry.file);
            fs::write(&path, write_tsv(&g.traj)).map_err(io(&path))?;
            Ok(g.entry)
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let manifest = CorpusManifest {
        seed: opts.seed,
        dt: opts.dt,
        entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(manifest)
}

/// One recording found in a corpus directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub sortie_id: String,
    pub path: PathBuf,
    pub truth: Option<Quality>,
    #[serde(default)]
    pub defects: Vec<DefectSpec>,
    #[serde(default)]
    pub embedded_templates: Vec<EmbeddedTemplate>,
}

fn tsv_files(dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let rd = fs::read_dir(dir).map_err(|source| SimError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("tsv")))
        .collect();
    out.sort();
    Ok(out)
}

/// Lists a corpus, sorted by sortie id. Truth comes from `manifest.json`
/// when present, else from `good/` and `bad/` folders; loose `*.tsv` files
/// at the top level have no truth.
pub fn index_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, SimError> {
    let mut out = Vec::new();
    if dir.join(MANIFEST_FILE).is_file() {
        let m = CorpusManifest::read(dir)?;
        out.extend(m.entries.into_iter().map(|e| CorpusEntry {
            path: dir.join(&e.file),
            sortie_id: e.sortie_id,
            truth: Some(e.truth_quality),
            defects: e.defects,
            embedded_templates: e.embedded_templates,
        }));
    } else {
        let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for (folder, truth) in [("good", Some(Quality::Good)), ("bad", Some(Quality::Bad))] {
            let d = dir.join(folder);
            if d.is_dir() {
                for p in tsv_files(&d)? {
                    out.push(CorpusEntry {
                        sortie_id: stem(&p),
                        path: p,
                        truth,
                        defects: Vec::new(),
                        embedded_templates: Vec::new(),
                    });
                }
            }
        }
        for p in tsv_files(dir)? {
            out.push(CorpusEntry {
                sortie_id: stem(&p),
                path: p,
                truth: None,
                defects: Vec::new(),
                embedded_templates: Vec::new(),
            });
        }
    }
    out.sort_by(|a, b| a.sortie_id.cmp(&b.sortie_id));
    Ok(out)
}
