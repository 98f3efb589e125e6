//! Pipeline driver. Subcommands: `synth`, `train`, `detect`, `eval`,
//! `export-trace`. Exit codes: 0 success, 1 usage error, 2 data error.

mod config;
mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ictus::detector::{run_stream_span, write_trace_csv, DetectorConfig, TraceRow};
use ictus::evaluation::rpip_error as eval_rpip_error;
use ictus::evaluation::{
    fdr, interictal_intervals, losocv, score_seizure, FoldReport, LatencyOutcome, LosocvConfig,
    TrainedFold,
};
use ictus::labeling::{read_manifest, PeriodTag, SegmentRecord, SoftLabel};
use ictus::model::{
    load_checkpoint, save_checkpoint, train, train_with_metric, ModelConfig, NadamHyper,
    TrainConfig, TrainSample, TrainedModel,
};
use ictus::signal_io::{
    extract_segments, load_recording, save_recording, CrossingStride, InterictalStride,
    OverlapPolicy, Recording,
};
use ictus::spectral::{freq_norm, multiscale_stft, SpectralConfig, WindowFn};
use ictus::synth::{generate, IctalModel, SynthConfig};

use config::FileConfig;
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => write!(f, "{m}"),
        }
    }
}

impl From<ictus::Error> for CliError {
    fn from(e: ictus::Error) -> Self {
        match e {
            ictus::Error::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ictus",
    about = "Streaming seizure onset detection via probabilistic prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an annotated synthetic recording plus its labeled-segment manifest
    Synth(SynthArgs),
    /// Train a probability predictor from a labeled-segment manifest
    Train(TrainArgs),
    /// Stream a recording through a trained detector, writing trace and alarms
    Detect(DetectArgs),
    /// Score traces against annotations, or run full leave-one-seizure-out evaluation
    Eval(EvalArgs),
    /// Re-run the detector over a time span and export the trace CSV
    ExportTrace(ExportTraceArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Master seed; all randomness flows from it
    #[arg(long)]
    seed: u64,
    /// Number of seizures
    #[arg(long, default_value_t = 4)]
    seizures: usize,
    /// Total interictal hours (split evenly before each seizure)
    #[arg(long, default_value_t = 2.0)]
    hours: f64,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    /// Segment length in seconds for the labeled manifest
    #[arg(long)]
    segment_s: Option<f64>,
    /// Base name of the recording files
    #[arg(long, default_value = "recording")]
    name: String,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labeled-segment manifest (JSON lines)
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding the recording files the manifest references
    #[arg(long)]
    recording_dir: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    segment_s: Option<f64>,
    #[arg(long)]
    fc_width: Option<usize>,
    /// Comma-separated scale indices, e.g. 1,2,3,4,5
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<u32>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    nfft: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recording header file
    #[arg(long)]
    recording: PathBuf,
    /// Trained checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Detection steps per second
    #[arg(long)]
    rate: Option<f64>,
    /// Alarm threshold
    #[arg(long)]
    thr: Option<f64>,
    /// Comma-separated blend weights, e.g. 0.2,0.3,0.3,0.2
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    segment_s: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Recording header file (annotations come from here)
    #[arg(long)]
    recording: PathBuf,
    /// Trace CSV from `detect` (trace mode)
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run the full leave-one-seizure-out harness instead of scoring a trace
    #[arg(long)]
    losocv: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    segment_s: Option<f64>,
    #[arg(long)]
    fc_width: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<u32>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    nfft: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    thr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Patient label used in the report
    #[arg(long, default_value = "patient")]
    patient: String,
}

#[derive(Args)]
struct ExportTraceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Span start in seconds
    #[arg(long)]
    from: f64,
    /// Span end in seconds
    #[arg(long)]
    to: f64,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    thr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    segment_s: Option<f64>,
    /// Output file name
    #[arg(long, default_value = "trace.csv")]
    name: String,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are successes, bad flags are usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a),
        Command::ExportTrace(a) => cmd_export_trace(a),
    };
    match result {
        Ok(()) => {}
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            std::process::exit(1);
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            std::process::exit(2);
        }
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn parse_window(name: Option<&str>) -> Result<WindowFn, CliError> {
    match name {
        None | Some("hann") => Ok(WindowFn::Hann),
        Some("rectangular") => Ok(WindowFn::Rectangular),
        Some(other) => Err(CliError::Usage(format!("unknown window \"{other}\""))),
    }
}

fn spectral_config(file: &FileConfig, scales: Option<Vec<u32>>, nfft: Option<usize>) -> Result<SpectralConfig, CliError> {
    let cfg = SpectralConfig {
        scales: scales
            .or_else(|| file.spectral.scales.clone())
            .unwrap_or_else(|| vec![1, 2, 3, 4, 5]),
        nfft: nfft.or(file.spectral.nfft).unwrap_or(64),
        window: parse_window(file.spectral.window.as_deref())?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn detector_config(
    file: &FileConfig,
    rate: Option<f64>,
    thr: Option<f64>,
    lambdas: Option<Vec<f64>>,
) -> Result<DetectorConfig, CliError> {
    let default = DetectorConfig::default();
    let lambdas = match lambdas {
        Some(v) => {
            let arr: [f64; 4] = v
                .try_into()
                .map_err(|_| CliError::Usage("--lambdas needs exactly 4 values".into()))?;
            arr
        }
        None => file.detector.lambdas.unwrap_or(default.lambdas),
    };
    let cfg = DetectorConfig {
        rate: rate.or(file.detector.rate).unwrap_or(default.rate),
        threshold: thr.or(file.detector.thr).unwrap_or(default.threshold),
        lambdas,
        horizon_s: default.horizon_s,
        lockout_s: file.detector.lockout_s.unwrap_or(default.lockout_s),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn overlap_policy(file: &FileConfig) -> Result<OverlapPolicy, CliError> {
    let seg = &file.segmentation;
    let interictal = match seg.interictal_stride.as_deref() {
        None | Some("full") => InterictalStride::FullLength,
        Some("dense") => InterictalStride::TwentyPercent,
        Some(other) => return Err(CliError::Usage(format!("unknown interictal stride \"{other}\""))),
    };
    let crossing = match seg.crossing_stride.as_deref() {
        None | Some("pointwise") => CrossingStride::PointWise,
        Some("dense") => CrossingStride::TwentyPercent,
        Some(other) => return Err(CliError::Usage(format!("unknown crossing stride \"{other}\""))),
    };
    Ok(OverlapPolicy {
        interictal,
        crossing,
        postictal_exclusion_s: seg.postictal_exclusion_s.unwrap_or(1800.0),
    })
}

fn model_config(
    file: &FileConfig,
    channels: usize,
    spectral: &SpectralConfig,
    fc_width: Option<usize>,
) -> ModelConfig {
    let m = &file.model;
    ModelConfig {
        channels,
        kept_bins: spectral.kept_bins(),
        scales: spectral.scales.clone(),
        conv3d_maps: m.conv3d_maps.unwrap_or([3, 4, 6]),
        conv2d_maps: m.conv2d_maps.unwrap_or([3, 4, 6]),
        fc_width: fc_width.or(m.fc_width).unwrap_or(16),
        head_widths: m.head_widths.clone().unwrap_or_else(|| vec![32, 16]),
        width_multiplier: m.width_multiplier.unwrap_or(1.0),
    }
}

fn train_config(
    file: &FileConfig,
    seed: u64,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
) -> TrainConfig {
    let t = &file.train;
    TrainConfig {
        epochs: epochs.or(t.epochs).unwrap_or(20),
        batch_size: batch_size.or(t.batch_size).unwrap_or(32),
        seed,
        optimizer: NadamHyper {
            lr: lr.or(t.lr).unwrap_or(1e-3),
            ..NadamHyper::default()
        },
        balance: t.balance.unwrap_or(true),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let file = config::load(args.common.config.as_deref())?;
    ensure_out_dir(&args.common.out_dir)?;
    if args.hours <= 0.0 {
        return Err(CliError::Usage("--hours must be positive".into()));
    }

    let s = &file.synth;
    let seizure_s = s.seizure_s.unwrap_or(40.0);
    let postictal_s = s.postictal_s.unwrap_or(1800.0);
    let gap_s = args.hours * 3600.0 / args.seizures.max(1) as f64;
    let (seizures, duration_s) = if args.seizures == 0 {
        (Vec::new(), args.hours * 3600.0)
    } else {
        let schedule = SynthConfig::evenly_spaced(args.seizures, gap_s, seizure_s, postictal_s);
        let last_end = schedule.last().map(|&(o, d)| o + d).unwrap_or(0.0);
        (schedule, last_end + postictal_s)
    };
    let cfg = SynthConfig {
        seed: args.seed,
        channels: args.channels.or(s.channels).unwrap_or(3),
        rate_hz: args.rate.or(s.rate_hz).unwrap_or(64.0),
        duration_s,
        interictal: Default::default(),
        ictal: IctalModel {
            band_hz: (s.band_lo_hz.unwrap_or(3.0), s.band_hi_hz.unwrap_or(8.0)),
            ramp_s: s.ramp_s.unwrap_or(5.0),
            gain: s.gain.unwrap_or(2.0),
        },
        seizures,
    };

    let rec = generate(&cfg)?;
    let header_path = args.common.out_dir.join(format!("{}.json", args.name));
    save_recording(&rec, &header_path)?;

    // labeled-segment manifest over the freshly written recording
    let segment_s = args.segment_s.or(file.segmentation.segment_s).unwrap_or(5.0);
    let policy = overlap_policy(&file)?;
    let reloaded = load_recording(&header_path)?;
    let segments = extract_segments(&reloaded, segment_s, &policy)?;
    let records: Vec<SegmentRecord> = segments
        .iter()
        .map(|(seg, tag)| SegmentRecord::new(&args.name, seg.start_s(), *tag))
        .collect();
    let manifest_path = args.common.out_dir.join("segments.jsonl");
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(&manifest_path)
            .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?,
    );
    ictus::labeling::write_manifest(&mut w, &records)?;
    drop(w);

    let mut run = RunManifest::new(
        "synth",
        Some(args.seed),
        serde_json::to_value(&cfg).unwrap_or_default(),
    );
    run.add_output(&header_path);
    run.add_output(&args.common.out_dir.join(format!("{}.raw", args.name)));
    run.add_output(&manifest_path);
    // hash the payload so identical invocations are provably identical
    run.add_input(&args.common.out_dir.join(format!("{}.raw", args.name)))?;
    let _ = run.write(&args.common.out_dir)?;

    println!(
        "wrote {} ({} channels, {:.2} h, {} seizures) and {} segment records",
        header_path.display(),
        rec.channels(),
        rec.duration_s() / 3600.0,
        rec.annotations().len(),
        records.len()
    );
    Ok(())
}

/// Loads the manifest and builds featurized training samples.
fn samples_from_manifest(
    manifest_path: &Path,
    recording_dir: &Path,
    segment_s: f64,
    spectral: &SpectralConfig,
) -> Result<(Vec<TrainSample>, usize), CliError> {
    let f = std::fs::File::open(manifest_path)
        .map_err(|e| CliError::Data(format!("cannot open manifest: {e}")))?;
    let records = read_manifest(std::io::BufReader::new(f))?;
    if records.is_empty() {
        return Err(CliError::Data("manifest is empty".into()));
    }

    let mut recordings: std::collections::BTreeMap<String, Recording> = Default::default();
    let mut samples = Vec::new();
    let mut channels = 0usize;
    for r in &records {
        if r.tag == "excluded" {
            continue;
        }
        let rec = match recordings.get(&r.recording_id) {
            Some(rec) => rec,
            None => {
                let path = recording_dir.join(format!("{}.json", r.recording_id));
                let rec = load_recording(&path)?;
                recordings.insert(r.recording_id.clone(), rec);
                recordings.get(&r.recording_id).unwrap()
            }
        };
        channels = rec.channels();
        let start = (r.start_s * rec.rate_hz()).round() as usize;
        let len = (segment_s * rec.rate_hz()).round() as usize;
        let seg = rec.slice_segment(start, len)?;
        let p_ictal = r
            .p_ictal
            .ok_or_else(|| CliError::Data(format!("record at {}s has no label", r.start_s)))?;
        let tag = match r.tag.as_str() {
            "interictal" => PeriodTag::Interictal,
            "ictal" => PeriodTag::Ictal,
            "crossing" => PeriodTag::crossing(p_ictal),
            other => return Err(CliError::Data(format!("unknown tag \"{other}\""))),
        };
        samples.push(TrainSample {
            features: freq_norm(&multiscale_stft(&seg, spectral)?),
            label: SoftLabel {
                p_interictal: 1.0 - p_ictal,
                p_ictal,
            },
            tag,
        });
    }
    Ok((samples, channels))
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let file = config::load(args.common.config.as_deref())?;
    ensure_out_dir(&args.common.out_dir)?;

    let spectral = spectral_config(&file, args.scales.clone(), args.nfft)?;
    let segment_s = args.segment_s.or(file.segmentation.segment_s).unwrap_or(5.0);
    let recording_dir = args
        .recording_dir
        .clone()
        .unwrap_or_else(|| args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
    let (samples, channels) =
        samples_from_manifest(&args.manifest, &recording_dir, segment_s, &spectral)?;

    let model_cfg = model_config(&file, channels, &spectral, args.fc_width);
    let train_cfg = train_config(&file, args.seed, args.epochs, args.lr, args.batch_size);

    let outcome = train(&model_cfg, &train_cfg, &samples, &[])?;

    let curve_path = args.common.out_dir.join("training_curve.csv");
    {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&curve_path)
                .map_err(|e| CliError::Data(format!("cannot write curve: {e}")))?,
        );
        writeln!(f, "epoch,train_loss,val_error").map_err(|e| CliError::Data(e.to_string()))?;
        for s in &outcome.history {
            writeln!(f, "{},{},{}", s.epoch, s.train_loss, s.val_error)
                .map_err(|e| CliError::Data(e.to_string()))?;
        }
    }

    let model = TrainedModel {
        model_cfg: model_cfg.clone(),
        spectral_cfg: spectral,
        params: outcome.params,
    };
    let ckpt_path = args.common.out_dir.join("model.ckpt");
    save_checkpoint(&ckpt_path, &model, args.seed)?;

    let mut run = RunManifest::new(
        "train",
        Some(args.seed),
        serde_json::json!({
            "model": model_cfg,
            "train": train_cfg,
            "segment_s": segment_s,
            "best_epoch": outcome.best_epoch,
        }),
    );
    run.add_input(&args.manifest)?;
    run.add_output(&ckpt_path);
    run.add_output(&curve_path);
    let _ = run.write(&args.common.out_dir)?;

    println!(
        "trained on {} samples, best epoch {}, checkpoint {}",
        samples.len(),
        outcome.best_epoch,
        ckpt_path.display()
    );
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let file = config::load(args.common.config.as_deref())?;
    ensure_out_dir(&args.common.out_dir)?;
    let det_cfg = detector_config(&file, args.rate, args.thr, args.lambdas.clone())?;
    let segment_s = args.segment_s.or(file.segmentation.segment_s).unwrap_or(5.0);

    let rec = load_recording(&args.recording)?;
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    if model.model_cfg.channels != rec.channels() {
        return Err(CliError::Data(format!(
            "checkpoint expects {} channels, recording has {}",
            model.model_cfg.channels,
            rec.channels()
        )));
    }

    let trace = run_stream_span(&rec, &model, &det_cfg, segment_s, 0.0, rec.duration_s())?;
    let trace_path = args.common.out_dir.join("trace.csv");
    write_trace_csv(&trace_path, &trace)?;

    let alarms: Vec<f64> = trace.iter().filter(|r| r.alarm).map(|r| r.t_s).collect();
    let alarms_path = args.common.out_dir.join("alarms.json");
    std::fs::write(
        &alarms_path,
        serde_json::to_string_pretty(&alarms).unwrap_or_default(),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;

    let mut run = RunManifest::new(
        "detect",
        None,
        serde_json::json!({ "detector": {
            "rate": det_cfg.rate, "thr": det_cfg.threshold, "lambdas": det_cfg.lambdas,
        }, "segment_s": segment_s }),
    );
    run.add_input(&args.recording)?;
    run.add_input(&args.checkpoint)?;
    run.add_output(&trace_path);
    run.add_output(&alarms_path);
    let _ = run.write(&args.common.out_dir)?;

    println!(
        "streamed {:.2} h, {} steps, {} alarms -> {}",
        rec.duration_s() / 3600.0,
        trace.len(),
        alarms.len(),
        trace_path.display()
    );
    Ok(())
}

/// Scores one existing trace against the recording annotations.
fn eval_trace_mode(
    args: &EvalArgs,
    rec: &Recording,
    trace_path: &Path,
    det_rate: f64,
    segment_s: f64,
) -> Result<serde_json::Value, CliError> {
    let trace = ictus::detector::read_trace_csv(trace_path)?;
    let mut seizures = Vec::new();
    for (i, span) in rec.annotations().iter().enumerate() {
        let score = score_seizure(&trace, span, segment_s)?;
        let rpip = eval_rpip_error(&trace, span, segment_s, det_rate)?;
        seizures.push(serde_json::json!({
            "seizure_index": i,
            "onset_s": span.onset_s,
            "detected_in_crossing": score.detected_in_crossing,
            "latency": score.latency,
            "rpip_error_pct": rpip,
        }));
    }
    // false detections: alarms inside interictal intervals
    let intervals = interictal_intervals(rec, 1800.0);
    let mut n_false = 0usize;
    let mut hours = 0.0f64;
    for &(a, b) in &intervals {
        let rows: Vec<&TraceRow> = trace
            .iter()
            .filter(|r| r.t_s >= a + segment_s && r.t_s <= b)
            .collect();
        if rows.is_empty() {
            continue;
        }
        n_false += rows.iter().filter(|r| r.alarm).count();
        hours += (rows.last().unwrap().t_s - rows[0].t_s + 1.0 / det_rate) / 3600.0;
    }
    let fdr_per_h = if hours > 0.0 { fdr(n_false, hours)? } else { 0.0 };
    let sensitivity_known = !rec.annotations().is_empty();
    Ok(serde_json::json!({
        "patient": args.patient,
        "mode": "trace",
        "seizures": seizures,
        "sensitivity": if sensitivity_known {
            serde_json::json!(format!(
                "{}/{}",
                seizures_detected(&trace, rec, segment_s),
                rec.annotations().len()
            ))
        } else {
            serde_json::json!("undefined")
        },
        "n_false": n_false,
        "interictal_hours": hours,
        "fdr_per_h": fdr_per_h,
    }))
}

fn seizures_detected(trace: &[TraceRow], rec: &Recording, segment_s: f64) -> usize {
    rec.annotations()
        .iter()
        .filter(|span| {
            score_seizure(trace, span, segment_s)
                .map(|s| s.detected_in_crossing)
                .unwrap_or(false)
        })
        .count()
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let file = config::load(args.common.config.as_deref())?;
    ensure_out_dir(&args.common.out_dir)?;
    let det_cfg = detector_config(&file, args.rate, args.thr, args.lambdas.clone())?;
    let segment_s = args.segment_s.or(file.segmentation.segment_s).unwrap_or(5.0);
    let rec = load_recording(&args.recording)?;

    let report: serde_json::Value = if args.losocv {
        let seed = args
            .seed
            .ok_or_else(|| CliError::Usage("--losocv needs --seed".into()))?;
        let spectral = spectral_config(&file, args.scales.clone(), args.nfft)?;
        let model_cfg = model_config(&file, rec.channels(), &spectral, args.fc_width);
        let train_cfg = train_config(&file, seed, args.epochs, args.lr, None);
        let cfg = LosocvConfig {
            patient: args.patient.clone(),
            segment_len_s: segment_s,
            policy: overlap_policy(&file)?,
            spectral: spectral.clone(),
            detector: det_cfg.clone(),
            lead_in_s: 10.0,
        };
        let report = losocv(&rec, &cfg, |fold| {
            let train_set: Vec<TrainSample> = fold.train.iter().map(|s| (*s).clone()).collect();
            // select the checkpoint on the rectified crossing error of the
            // held-out seizure, streamed across its onset
            let span = rec.annotations()[fold.held_out];
            let stream_start = span.onset_s - cfg.segment_len_s - cfg.lead_in_s;
            let outcome = train_with_metric(&model_cfg, &train_cfg, &train_set, |params| {
                let candidate = TrainedModel {
                    model_cfg: model_cfg.clone(),
                    spectral_cfg: spectral.clone(),
                    params: params.clone(),
                };
                let trace = run_stream_span(
                    &rec,
                    &candidate,
                    &cfg.detector,
                    cfg.segment_len_s,
                    stream_start,
                    span.onset_s + cfg.segment_len_s,
                )?;
                eval_rpip_error(&trace, &span, cfg.segment_len_s, cfg.detector.rate)
            })?;
            Ok(TrainedFold {
                estimator: TrainedModel {
                    model_cfg: model_cfg.clone(),
                    spectral_cfg: spectral.clone(),
                    params: outcome.params,
                },
                best_epoch: outcome.best_epoch,
            })
        })?;
        print_fold_summary(&report.folds);
        serde_json::json!({
            "mode": "losocv",
            "report": report,
            "summary": report.summary_row(),
        })
    } else {
        let trace_path = args
            .trace
            .clone()
            .ok_or_else(|| CliError::Usage("eval needs --trace or --losocv".into()))?;
        eval_trace_mode(&args, &rec, &trace_path, det_cfg.rate, segment_s)?
    };

    let report_path = args.common.out_dir.join("report.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).unwrap_or_default(),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;

    let mut run = RunManifest::new("eval", args.seed, serde_json::json!({ "segment_s": segment_s }));
    run.add_input(&args.recording)?;
    if let Some(t) = &args.trace {
        run.add_input(t)?;
    }
    run.add_output(&report_path);
    let _ = run.write(&args.common.out_dir)?;

    println!("report -> {}", report_path.display());
    Ok(())
}

fn print_fold_summary(folds: &[FoldReport]) {
    for f in folds {
        let latency = match f.latency {
            LatencyOutcome::Within(l) => format!("{l:.2}s"),
            LatencyOutcome::MissConvention(l) => format!("{l:.2}s (after crossing)"),
            LatencyOutcome::Undetected => "undetected".into(),
        };
        println!(
            "seizure {}: detected_in_crossing={} latency={} rpip_err={:.2}% fdr={:.3}/h",
            f.seizure_index, f.detected_in_crossing, latency, f.rpip_error_pct, f.fdr_per_h
        );
    }
}

fn cmd_export_trace(args: ExportTraceArgs) -> Result<(), CliError> {
    let file = config::load(args.common.config.as_deref())?;
    ensure_out_dir(&args.common.out_dir)?;
    if args.to <= args.from {
        return Err(CliError::Usage("--to must be after --from".into()));
    }
    let det_cfg = detector_config(&file, args.rate, args.thr, args.lambdas.clone())?;
    let segment_s = args.segment_s.or(file.segmentation.segment_s).unwrap_or(5.0);

    let rec = load_recording(&args.recording)?;
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let trace = run_stream_span(&rec, &model, &det_cfg, segment_s, args.from, args.to)?;
    let trace_path = args.common.out_dir.join(&args.name);
    write_trace_csv(&trace_path, &trace)?;

    let mut run = RunManifest::new(
        "export-trace",
        None,
        serde_json::json!({ "from": args.from, "to": args.to, "segment_s": segment_s }),
    );
    run.add_input(&args.recording)?;
    run.add_input(&args.checkpoint)?;
    run.add_output(&trace_path);
    let _ = run.write(&args.common.out_dir)?;

    println!("{} rows -> {}", trace.len(), trace_path.display());
    Ok(())
}
