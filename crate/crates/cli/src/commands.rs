use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use log::{info, warn};
use skelfreq::agcn::gradcheck::{check_gradients, random_toy_problem, GradCheckReport};
use skelfreq::agcn::{attention_report, train as fit, Example, ScoreActivation, DEFAULT_HIDDEN};
use skelfreq::frequency::extract_features;
use skelfreq::metrics::SequencePrediction;
use skelfreq::pose::{load_sequence, prepare_sequence, write_sequence};
use skelfreq::synthetic::{generate_dataset, read_manifest, write_manifest, Split};
use skelfreq::{
    BinSpec, Error, FrequencyFeatures, MetricsReport, Model, ModelSpec, PoseSequence, Result, SkeletonTopology,
    TrainConfig,
};

use crate::config::FileConfig;
use crate::{ExplainArgs, ExtractArgs, GradcheckArgs, PredictArgs, SynthCmdArgs, TopologyArgs, TrainArgs};

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::MissingInput(_) | Error::EmptyInput(_) => 2,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        Error::InsufficientLength { .. } => 3,
        Error::DegenerateDataset(_) => 4,
        Error::ModelMismatch(_) => 5,
        _ => 1,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

/// `model.json` -> `model.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn input_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn is_feature_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn features_of(seq: &PoseSequence, topology: &SkeletonTopology, spec: &BinSpec) -> Result<FrequencyFeatures> {
    extract_features(&prepare_sequence(seq, topology)?, spec)
}

/// Reads a feature CSV directly, or loads, cleans and transforms keypoints.
fn load_features(path: &Path, topology: &SkeletonTopology, spec: &BinSpec, fps: f64) -> Result<FrequencyFeatures> {
    if is_feature_file(path) {
        FrequencyFeatures::load(path)
    } else {
        let seq = load_sequence(path, fps, topology.num_joints)?;
        features_of(&seq, topology, spec)
    }
}

/// Shape or bin-layout disagreements between a model and its input.
fn as_mismatch(err: Error) -> Error {
    match err {
        Error::Contract(msg) => Error::ModelMismatch(msg),
        Error::TopologyMismatch { expected, found } => {
            Error::ModelMismatch(format!("model expects {expected} joints, input has {found}"))
        }
        other => other,
    }
}

pub fn extract(args: ExtractArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let topology = SkeletonTopology::resolve(&cfg.topology(args.common.topology.as_ref()))?;
    let spec = cfg.bin_spec(args.bins.c, args.bins.bins)?;
    let fps = cfg.fps(args.bins.fps);
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("features.csv"));

    let seq = load_sequence(&args.input, fps, topology.num_joints)?;
    let prepared = prepare_sequence(&seq, &topology)?;
    let features = extract_features(&prepared, &spec)?;
    if let Some(path) = &args.normalized {
        prepared.save_csv(path)?;
    }
    features.save(&out)?;
    info!(
        "{} frames, {} joints, {} bins -> {}",
        seq.num_frames(),
        features.num_joints(),
        features.num_bins(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn model_spec(cfg: &FileConfig, args: &TrainArgs, topology: SkeletonTopology, bins: BinSpec) -> Result<ModelSpec> {
    let hidden = args
        .hidden
        .clone()
        .or_else(|| cfg.hidden.clone())
        .unwrap_or_else(|| DEFAULT_HIDDEN.to_vec());
    let mut spec = ModelSpec::new(topology, bins, &hidden)?;
    if let Some(act) = args.score_activation.as_ref().or(cfg.score_activation.as_ref()) {
        spec.score_activation = act.parse::<ScoreActivation>()?;
    }
    Ok(spec)
}

fn train_config(cfg: &FileConfig, args: &TrainArgs, seed: u64) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        epochs: args.epochs.or(cfg.epochs).unwrap_or(d.epochs),
        learning_rate: args.lr.or(cfg.learning_rate).unwrap_or(d.learning_rate),
        seed,
        full_batch: if args.minibatch { false } else { cfg.full_batch.unwrap_or(d.full_batch) },
        init_scale: args.init_scale.or(cfg.init_scale).unwrap_or(d.init_scale),
    }
}

struct LabelledSet {
    train: Vec<Example>,
    test: Vec<(String, Example)>,
}

fn synthetic_set(
    cfg: &FileConfig,
    args: &TrainArgs,
    topology: &SkeletonTopology,
    bins: &BinSpec,
    seed: u64,
) -> Result<LabelledSet> {
    let fps = cfg.fps(args.bins.fps);
    let (synth, n) = cfg.synth(&args.synth, topology.name.clone(), fps, seed);
    let data = generate_dataset(&synth, n, seed)?;
    let train = data
        .train
        .iter()
        .map(|(seq, label)| Ok((features_of(seq, topology, bins)?, *label)))
        .collect::<Result<_>>()?;
    let test = data
        .test
        .iter()
        .map(|(seq, label)| Ok((seq.subject_id.clone(), (features_of(seq, topology, bins)?, *label))))
        .collect::<Result<_>>()?;
    Ok(LabelledSet { train, test })
}

fn manifest_set(
    manifest: &Path,
    topology: &SkeletonTopology,
    bins: Option<BinSpec>,
    fps: f64,
) -> Result<(LabelledSet, BinSpec)> {
    let entries = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let locate = |id: &str| {
        let csv = base.join(format!("{id}.csv"));
        if csv.exists() {
            csv
        } else {
            base.join(id)
        }
    };
    let bins = match bins {
        Some(b) => b,
        None => entries
            .iter()
            .map(|e| locate(&e.sequence_id))
            .find(|p| is_feature_file(p))
            .map(|p| FrequencyFeatures::load(&p).map(|f| f.bin_spec))
            .transpose()?
            .unwrap_or_default(),
    };
    let mut set = LabelledSet {
        train: Vec::new(),
        test: Vec::new(),
    };
    for entry in &entries {
        let path = locate(&entry.sequence_id);
        let features = load_features(&path, topology, &bins, fps)?;
        if features.bin_spec != bins {
            return Err(Error::InvalidConfig(format!(
                "{} was extracted with c={}, bins={}; expected c={}, bins={}",
                path.display(),
                features.bin_spec.c,
                features.bin_spec.num_bins,
                bins.c,
                bins.num_bins
            )));
        }
        match entry.split {
            Split::Train => set.train.push((features, entry.label)),
            Split::Test => set.test.push((entry.sequence_id.clone(), (features, entry.label))),
        }
    }
    Ok((set, bins))
}

pub fn train(args: TrainArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = cfg.seed(args.common.seed);
    let topology = SkeletonTopology::resolve(&cfg.topology(args.common.topology.as_ref()))?;
    let explicit_bins = (args.bins.c.is_some() || args.bins.bins.is_some() || cfg.c.is_some() || cfg.bins.is_some())
        .then(|| cfg.bin_spec(args.bins.c, args.bins.bins))
        .transpose()?;

    let (set, bins) = match (&args.manifest, args.synthetic) {
        (Some(manifest), _) => manifest_set(manifest, &topology, explicit_bins, cfg.fps(args.bins.fps))?,
        (None, true) => {
            let bins = explicit_bins.unwrap_or_default();
            (synthetic_set(&cfg, &args, &topology, &bins, seed)?, bins)
        }
        (None, false) => {
            return Err(Error::InvalidConfig("either --manifest or --synthetic is required".into()));
        }
    };

    let spec = model_spec(&cfg, &args, topology, bins)?;
    let config = train_config(&cfg, &args, seed);
    let (model, history) = fit(spec, &set.train, &config)?;

    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    write_text(&out, &model.to_json())?;

    let history_path = sibling(&out, "history.csv");
    let mut w = csv::Writer::from_writer(create(&history_path)?);
    for stats in &history {
        w.serialize(stats)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: history_path.clone(),
        source: e,
    })?;

    let evaluated: Vec<(String, &Example)> = if set.test.is_empty() {
        warn!("no held-out sequences; metrics are computed on the training split");
        set.train
            .iter()
            .enumerate()
            .map(|(i, ex)| (format!("train_{i:04}"), ex))
            .collect()
    } else {
        set.test.iter().map(|(id, ex)| (id.clone(), ex)).collect()
    };
    let predictions = evaluated
        .into_iter()
        .map(|(id, (features, label))| {
            let p = model.predict(features)?;
            Ok(SequencePrediction {
                id,
                label: *label,
                predicted: p.label,
                prob_abnormal: p.prob_abnormal(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = MetricsReport::from_predictions(predictions);
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&sibling(&out, "metrics.json"), &(json + "\n"))?;

    let last = history.last().map(|s| s.loss).unwrap_or(f64::NAN);
    println!(
        "trained {} epochs on {} sequences: final loss {last:.6}, held-out accuracy {:.4} ({} sequences)",
        history.len(),
        set.train.len(),
        metrics.accuracy,
        metrics.total()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn predict(args: PredictArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let model = Model::load(&args.model)?;
    let fps = cfg.fps(args.fps);
    let mut out: Box<dyn Write> = match &args.common.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    for input in &args.inputs {
        let start = Instant::now();
        let features =
            load_features(input, &model.spec.topology, &model.spec.bin_spec, fps).map_err(as_mismatch)?;
        let prediction = model.predict(&features).map_err(as_mismatch)?;
        let elapsed = start.elapsed().as_secs_f64();
        writeln!(out, "{},{},{}", input_id(input), prediction.label, prediction.prob_abnormal()).map_err(|e| {
            Error::Io {
                path: PathBuf::from("<output>"),
                source: e,
            }
        })?;
        if args.timing {
            let frames = features.num_frames.max(1);
            eprintln!(
                "timing {}: {frames} frames in {elapsed:.6} s ({:.6} s per 1000 frames)",
                input_id(input),
                elapsed * 1000.0 / frames as f64
            );
        }
    }
    out.flush().map_err(|e| Error::Io {
        path: PathBuf::from("<output>"),
        source: e,
    })?;
    Ok(ExitCode::SUCCESS)
}

pub fn explain(args: ExplainArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let model = Model::load(&args.model)?;
    let fps = cfg.fps(args.fps);
    let features =
        load_features(&args.input, &model.spec.topology, &model.spec.bin_spec, fps).map_err(as_mismatch)?;
    let report = attention_report(&model, &features).map_err(as_mismatch)?;

    let prefix = args.common.out.clone().unwrap_or_else(|| PathBuf::from(input_id(&args.input)));
    let alpha_path = PathBuf::from(format!("{}.alpha.csv", prefix.display()));
    let ranking_path = PathBuf::from(format!("{}.ranking.csv", prefix.display()));
    report.write_alpha_csv(create(&alpha_path)?)?;
    report.write_ranking_csv(create(&ranking_path)?)?;

    if args.bars {
        print!("{}", report.render_bars(&model.spec.topology.names, 40));
    } else {
        println!("wrote {} and {}", alpha_path.display(), ranking_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = cfg.seed(args.common.seed);
    let hidden = cfg.hidden.clone().unwrap_or_else(|| DEFAULT_HIDDEN.to_vec());
    if !(args.eps.is_finite() && args.eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {}", args.eps)));
    }
    let mut report = GradCheckReport { groups: Vec::new() };
    for draw in 0..args.draws.max(1) {
        let (model, features, label) = random_toy_problem(seed.wrapping_add(draw as u64), &hidden)?;
        report.merge(&check_gradients(&model, &features, label, args.eps)?);
    }
    for g in &report.groups {
        println!(
            "{:<18} max_rel_error={:.3e} checked={} kinks_skipped={}",
            g.name, g.max_relative_error, g.checked, g.kinks
        );
    }
    let pass = report.passes(args.tolerance);
    println!(
        "{} (max {:.3e}, tolerance {:e})",
        if pass { "PASS" } else { "FAIL" },
        report.max_relative_error(),
        args.tolerance
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

pub fn synth(args: SynthCmdArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let seed = cfg.seed(args.common.seed);
    let fps = cfg.fps(args.fps);
    let topology = cfg.topology(args.common.topology.as_ref());
    let (synth, n) = cfg.synth(&args.synth, topology, fps, seed);
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));

    let data = generate_dataset(&synth, n, seed)?;
    for (seq, _) in data.train.iter().chain(&data.test) {
        write_sequence(seq, &out.join(&seq.subject_id))?;
    }
    write_manifest(&data.manifest, &out.join("manifest.csv"))?;
    let settings = toml::to_string(&synth).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&out.join("synth.toml"), &settings)?;
    println!(
        "wrote {} sequences ({} train, {} test) to {}",
        data.manifest.len(),
        data.train.len(),
        data.test.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn topology(args: TopologyArgs) -> Result<ExitCode> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let topology = SkeletonTopology::resolve(&cfg.topology(args.common.topology.as_ref()))?;
    match &args.common.out {
        Some(path) => write_text(path, &topology.to_edge_list())?,
        None => print!("{}", topology.to_edge_list()),
    }
    Ok(ExitCode::SUCCESS)
}
