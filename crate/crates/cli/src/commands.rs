use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajair::dataset::{list_days, make_windows, split_days, DatasetError, HorizonConfig, SequenceWindow};
use trajair::diff::checkpoint::Checkpoint;
use trajair::eval::{evaluate, window_seed, ConstantVelocity, EvalResult, NearestNeighborIndex, Predictor};
use trajair::geo::{process_records, ProcessReport};
use trajair::ingest::{parse_metar_file, parse_track_log, IngestError};
use trajair::model::{Model, PredictionSet};
use trajair::plot::{prediction_svg, scene_svg};
use trajair::provenance::{bytes_hash, dataset_fingerprint};
use trajair::scene::{read_scene_file, write_scenes, SceneError};
use trajair::synth::{generate_corpus, PatternSpec, SynthError};
use trajair::train::{train_from, TrainError};

use crate::config::{Overrides, RunConfig, Stamp};
use crate::error::{require, Category, CliError};
use crate::{Baseline, EvalArgs, PlotArgs, PredictArgs, PredictorArgs, ProcessArgs, SynthArgs, TrainArgs};

pub const EVAL_SCHEMA: &str = "trajair-eval/1";

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn scene_error(path: &Path, e: SceneError) -> CliError {
    match e {
        SceneError::Io(io) => CliError::read(path, io),
        other => CliError::input(format!("{}: {other}", path.display())),
    }
}

fn dataset_error(e: DatasetError) -> CliError {
    match e {
        DatasetError::MissingDay(..) => CliError::new(Category::MissingInput, e.to_string()),
        DatasetError::Overlap(_) | DatasetError::Config(_) => CliError::config(e.to_string()),
        DatasetError::Io(_) => CliError::new(Category::Io, e.to_string()),
    }
}

// ------------------------------------------------------------- process

#[derive(Serialize)]
struct DayReport {
    day: String,
    file: String,
    malformed_lines: usize,
    #[serde(flatten)]
    report: ProcessReport,
}

#[derive(Serialize)]
struct ProcessSummary {
    #[serde(flatten)]
    stamp: Stamp,
    metar_reports: usize,
    metar_malformed_lines: usize,
    days: Vec<DayReport>,
}

pub const PROCESS_REPORT: &str = "process_report.json";
pub const SCENE_FILE: &str = "scenes.csv";

fn parse_month(s: &str) -> Result<(i32, u32), CliError> {
    let bad = || CliError::usage(format!("--metar-month expects YYYY-MM, got `{s}`"));
    let (y, m) = s.split_once('-').ok_or_else(bad)?;
    Ok((y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?))
}

pub fn process(a: ProcessArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?.resolve(Overrides {
        seed: a.common.seed,
        ..Overrides::default()
    })?;
    require(&a.raw)?;
    require(&a.metar)?;
    let anchor = a.metar_month.as_deref().map(parse_month).transpose()?;
    let metar = std::fs::File::open(&a.metar).map_err(|e| CliError::read(&a.metar, e))?;
    let (reports, metar_diags) =
        parse_metar_file(BufReader::new(metar), anchor).map_err(|e| CliError::input(format!("{}: {e}", a.metar.display())))?;

    let mut logs: Vec<PathBuf> = std::fs::read_dir(&a.raw)
        .map_err(|e| CliError::read(&a.raw, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    logs.sort();
    if logs.is_empty() {
        return Err(CliError::input(format!("no track logs in {}", a.raw.display())));
    }

    // days are independent: fan out over threads, keep the input order
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(logs.len());
    let results: Vec<Result<DayReport, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (logs, reports, cfg, out) = (&logs, &reports, &cfg, &a.out);
                s.spawn(move || {
                    logs.iter()
                        .enumerate()
                        .filter(|(i, _)| i % workers == w)
                        .map(|(i, p)| (i, process_day(p, reports, cfg, out)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<(usize, Result<DayReport, CliError>)> =
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect();
        all.sort_by_key(|(i, _)| *i);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let days = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let scenes: usize = days.iter().map(|d| d.report.scenes).sum();
    write_json(
        &a.out.join(PROCESS_REPORT),
        &ProcessSummary {
            stamp: cfg.stamp(),
            metar_reports: reports.len(),
            metar_malformed_lines: metar_diags.len(),
            days,
        },
    )?;
    eprintln!("{} scenes from {} day files", scenes, logs.len());
    Ok(())
}

fn process_day(
    path: &Path,
    reports: &[trajair::ingest::MetarReport],
    cfg: &RunConfig,
    out: &Path,
) -> Result<DayReport, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    let (records, diags) = parse_track_log(BufReader::new(file)).map_err(|e| CliError::read_ingest(path, e))?;
    let (scenes, report) = process_records(records, reports, &cfg.frame).map_err(|e| match e {
        trajair::Error::Ingest(IngestError::NoWeather) => CliError::input("the METAR file has no usable reports"),
        other => CliError::input(format!("{}: {other}", path.display())),
    })?;
    let day = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "day".into());
    let mut buf = Vec::new();
    write_scenes(&mut buf, &scenes).expect("writing to memory");
    write_file(&out.join(&day).join(SCENE_FILE), &buf)?;
    Ok(DayReport {
        day,
        file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        malformed_lines: diags.len(),
        report,
    })
}

impl CliError {
    fn read_ingest(path: &Path, e: IngestError) -> CliError {
        match e {
            IngestError::Io(io) => CliError::read(path, io),
            other => CliError::input(format!("{}: {other}", path.display())),
        }
    }
}

// --------------------------------------------------------------- synth

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        cfg.synth = toml::from_str::<PatternSpec>(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
    }
    let cfg = cfg.resolve(Overrides {
        seed: a.common.seed,
        ..Overrides::default()
    })?;
    let manifest = generate_corpus(&cfg.synth, a.scenes, cfg.seed, &a.out).map_err(|e| match e {
        SynthError::Io(io) => CliError::write(&a.out, io),
        SynthError::Manifest(m) => CliError::write(&a.out, m),
        other => CliError::config(other.to_string()),
    })?;
    eprintln!("{} scenes written to {}", manifest.scenes.len(), a.out.display());
    Ok(())
}

// -------------------------------------------------------------- corpus

struct Corpus {
    root: PathBuf,
    train_days: Vec<String>,
    test_days: Vec<String>,
    train_files: Vec<PathBuf>,
    test_files: Vec<PathBuf>,
}

impl Corpus {
    fn open(cfg: &RunConfig) -> Result<Corpus, CliError> {
        let root = cfg.data_root()?.to_path_buf();
        require(&root)?;
        let days = list_days(&root).map_err(dataset_error)?;
        let (train_days, test_days) = match (cfg.train_days.is_empty(), cfg.test_days.is_empty()) {
            (false, false) => (cfg.train_days.clone(), cfg.test_days.clone()),
            (false, true) => {
                let test = days.iter().filter(|d| !cfg.train_days.contains(d)).cloned().collect();
                (cfg.train_days.clone(), test)
            }
            (true, false) => {
                let train = days.iter().filter(|d| !cfg.test_days.contains(d)).cloned().collect();
                (train, cfg.test_days.clone())
            }
            (true, true) => {
                if days.len() < 2 {
                    return Err(CliError::config(format!(
                        "{} has {} day directories; set train_days and test_days",
                        root.display(),
                        days.len()
                    )));
                }
                let (train, test) = days.split_at(days.len() - 1);
                (train.to_vec(), test.to_vec())
            }
        };
        let (train_files, test_files) = split_days(&root, &train_days, &test_days).map_err(dataset_error)?;
        Ok(Corpus {
            root,
            train_days,
            test_days,
            train_files,
            test_files,
        })
    }

    fn windows(&self, files: &[PathBuf], horizon: &HorizonConfig) -> Result<Vec<SequenceWindow>, CliError> {
        let mut out = Vec::new();
        for f in files {
            for scene in read_scene_file(f).map_err(|e| scene_error(f, e))? {
                out.extend(make_windows(&scene, horizon));
            }
        }
        Ok(out)
    }

    fn fingerprint(&self, files: &[PathBuf]) -> Result<String, CliError> {
        dataset_fingerprint(&self.root, files).map_err(|e| CliError::read(&self.root, e))
    }
}

// --------------------------------------------------------------- train

#[derive(Serialize)]
struct TrainMeta<'a> {
    #[serde(flatten)]
    stamp: Stamp,
    train_days: &'a [String],
    dataset_fingerprint: String,
    windows: usize,
    steps: usize,
    final_loss: Option<trajair::train::LossReport>,
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?.resolve(Overrides {
        seed: a.common.seed,
        data_root: a.data,
        epochs: a.epochs,
        max_steps: a.steps,
        min_agents: a.min_agents,
        ..Overrides::default()
    })?;
    let corpus = Corpus::open(&cfg)?;
    let windows = corpus.windows(&corpus.train_files, &cfg.horizon)?;
    if windows.is_empty() {
        return Err(CliError::input("the training days yield no windows"));
    }
    let model = Model::new(cfg.model.clone(), cfg.seed).map_err(|e| CliError::config(e.to_string()))?;
    let meta = |steps: usize, final_loss| -> Result<serde_json::Value, CliError> {
        Ok(serde_json::to_value(TrainMeta {
            stamp: cfg.stamp(),
            train_days: &corpus.train_days,
            dataset_fingerprint: corpus.fingerprint(&corpus.train_files)?,
            windows: windows.len(),
            steps,
            final_loss,
        })
        .expect("meta serialises"))
    };
    eprintln!("{} training windows from {} days", windows.len(), corpus.train_days.len());
    let result = train_from(model, &windows, &cfg.train, |step, loss| {
        if (step + 1) % 100 == 0 {
            eprintln!(
                "step {:>6}  loss {:.5}  traj {:.5}  kl {:.5}",
                step + 1,
                loss.l_total,
                loss.l_traj,
                loss.l_cvae
            );
        }
    });
    match result {
        Ok(t) => {
            let ckpt = t
                .model
                .to_checkpoint(meta(t.history.len(), t.history.last().copied())?)
                .map_err(|e| CliError::input(e.to_string()))?;
            write_file(&a.out, &ckpt.to_bytes())?;
            eprintln!("{} steps, checkpoint {}", t.history.len(), a.out.display());
            Ok(())
        }
        Err(TrainError::NonFinite {
            step,
            checkpoint,
            source,
        }) => {
            let mut path = a.out.clone().into_os_string();
            path.push(".aborted");
            let path = PathBuf::from(path);
            write_file(&path, &checkpoint.to_bytes())?;
            Err(CliError::new(
                Category::Numeric,
                format!("{source} at step {step}; last good parameters in {}", path.display()),
            ))
        }
        Err(e) => Err(CliError::input(e.to_string())),
    }
}

// ------------------------------------------------------ predict / eval

struct Loaded {
    predictor: Box<dyn Predictor>,
    checkpoint: Option<CheckpointInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub path: String,
    pub sha256: String,
    /// Hash of the run that trained it.
    pub config_hash: Option<String>,
}

/// Load the predictor and make the run horizon match a checkpoint's.
fn load_predictor(p: &PredictorArgs, cfg: &mut RunConfig, corpus: &Corpus) -> Result<Loaded, CliError> {
    if let Some(path) = &p.ckpt {
        let bytes = std::fs::read(path).map_err(|e| CliError::read(path, e))?;
        let ckpt = Checkpoint::read(bytes.as_slice()).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let model = Model::from_checkpoint(&ckpt, None).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let extra = Model::checkpoint_extra(&ckpt).unwrap_or_default();
        cfg.horizon.t_obs = model.config.t_obs;
        cfg.horizon.t_pred = model.config.t_pred;
        cfg.model = model.config.clone();
        return Ok(Loaded {
            predictor: Box::new(model),
            checkpoint: Some(CheckpointInfo {
                path: path.display().to_string(),
                sha256: bytes_hash(&bytes),
                config_hash: extra.get("config_hash").and_then(|v| v.as_str()).map(str::to_string),
            }),
        });
    }
    let predictor: Box<dyn Predictor> = match p.baseline.expect("clap requires one predictor") {
        Baseline::ConstVelocity => Box::new(ConstantVelocity {
            dt: cfg.model.delta_t,
        }),
        Baseline::NearestNeighbor => {
            let train = corpus.windows(&corpus.train_files, &cfg.horizon)?;
            let index = NearestNeighborIndex::from_windows(&train);
            if index.is_empty() {
                return Err(CliError::input("the training days yield no windows for the index"));
            }
            Box::new(index)
        }
    };
    Ok(Loaded {
        predictor,
        checkpoint: None,
    })
}

fn open_for_inference(
    p: &PredictorArgs,
    common: &crate::Common,
    data: Option<PathBuf>,
    n: Option<usize>,
) -> Result<(RunConfig, Corpus, Loaded, Vec<SequenceWindow>), CliError> {
    if let Some(path) = &p.ckpt {
        require(path)?;
    }
    let mut cfg = RunConfig::load(common.config.as_deref())?.resolve(Overrides {
        seed: common.seed,
        data_root: data,
        n_samples: n,
        ..Overrides::default()
    })?;
    let corpus = Corpus::open(&cfg)?;
    let loaded = load_predictor(p, &mut cfg, &corpus)?;
    let windows = corpus.windows(&corpus.test_files, &cfg.eval_horizon())?;
    if windows.is_empty() {
        return Err(CliError::input("the test days yield no windows"));
    }
    Ok((cfg, corpus, loaded, windows))
}

/// JSON written by `eval`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub predictor: String,
    pub metrics: EvalResult,
    pub test_days: Vec<String>,
    pub dataset_fingerprint: String,
    pub checkpoint: Option<CheckpointInfo>,
    #[serde(flatten)]
    pub stamp: Stamp,
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (cfg, corpus, loaded, windows) = open_for_inference(&a.predictor, &a.common, a.data, a.n)?;
    let metrics = evaluate(loaded.predictor.as_ref(), &windows, cfg.n_samples, cfg.seed)
        .map_err(|e| CliError::input(e.to_string()))?;
    let report = EvalReport {
        schema: EVAL_SCHEMA.into(),
        predictor: loaded.predictor.name().into(),
        metrics,
        test_days: corpus.test_days.clone(),
        dataset_fingerprint: corpus.fingerprint(&corpus.test_files)?,
        checkpoint: loaded.checkpoint,
        stamp: cfg.stamp(),
    };
    write_json(&a.out, &report)?;
    eprintln!(
        "{}: ADE {:.3} km  FDE {:.3} km  ({} windows, {} agents, N={})",
        report.predictor,
        report.metrics.ade_km,
        report.metrics.fde_km,
        report.metrics.n_windows,
        report.metrics.n_agents,
        report.metrics.n_samples
    );
    Ok(())
}

/// JSON written by `predict`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionFile {
    pub predictor: String,
    pub checkpoint: Option<CheckpointInfo>,
    pub predictions: Vec<PredictionSet>,
    #[serde(flatten)]
    pub stamp: Stamp,
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    let (cfg, _, loaded, windows) = open_for_inference(&a.predictor, &a.common, a.data, a.n)?;
    let predictions = windows
        .iter()
        .take(a.limit)
        .enumerate()
        .map(|(i, w)| loaded.predictor.predict(w, cfg.n_samples, window_seed(cfg.seed, i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::input(e.to_string()))?;
    let file = PredictionFile {
        predictor: loaded.predictor.name().into(),
        checkpoint: loaded.checkpoint,
        predictions,
        stamp: cfg.stamp(),
    };
    write_json(&a.out, &file)?;
    eprintln!("{} predictions written to {}", file.predictions.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- plot

fn stamped(svg: String, stamp: &Stamp, source_hash: Option<&str>) -> String {
    let mut head = format!(
        "<!-- trajair {} config_hash {}",
        stamp.code_version, stamp.config_hash
    );
    if let Some(h) = source_hash {
        head.push_str(&format!(" source_config_hash {h}"));
    }
    head.push_str(" -->\n");
    head + &svg
}

pub fn plot(a: PlotArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.common.config.as_deref())?.resolve(Overrides {
        seed: a.common.seed,
        ..Overrides::default()
    })?;
    let stamp = cfg.stamp();
    let svg = if let Some(path) = &a.scene {
        require(path)?;
        let scenes = read_scene_file(path).map_err(|e| scene_error(path, e))?;
        let scene = match a.scene_id {
            Some(id) => scenes.iter().find(|s| s.scene_id == id),
            None => scenes.first(),
        }
        .ok_or_else(|| CliError::input(format!("{}: no such scene", path.display())))?;
        stamped(scene_svg(scene).map_err(CliError::input)?, &stamp, None)
    } else {
        let path = a.predictions.as_ref().expect("clap requires one input");
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        let file: PredictionFile =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let set = file.predictions.get(a.index).ok_or_else(|| {
            CliError::input(format!("{} holds {} predictions", path.display(), file.predictions.len()))
        })?;
        stamped(prediction_svg(set).map_err(CliError::input)?, &stamp, Some(&file.stamp.config_hash))
    };
    write_file(&a.out, svg.as_bytes())
}
