//! End-to-end pipeline on a synthetic patient: generate, segment, label,
//! train per fold, stream the detector, score.

use std::time::Instant;

use ictus::detector::{run_stream_span, DetectorConfig};
use ictus::evaluation::{losocv, rpip_error, FoldData, LosocvConfig, TrainedFold};
use ictus::model::{train_with_metric, ModelConfig, NadamHyper, TrainConfig, TrainOutcome, TrainedModel};
use ictus::signal_io::{CrossingStride, InterictalStride, OverlapPolicy};
use ictus::spectral::{SpectralConfig, WindowFn};
use ictus::synth::{generate, IctalModel, SynthConfig};

pub fn synthetic_patient(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        channels: 3,
        rate_hz: 64.0,
        // four seizures, 30 min clean background before each onset, 30 min
        // post-ictal exclusion after each offset: exactly 2 h interictal
        duration_s: 14_560.0,
        seizures: SynthConfig::evenly_spaced(4, 1800.0, 40.0, 1800.0),
        ictal: IctalModel {
            band_hz: (3.0, 8.0),
            ramp_s: 5.0,
            gain: env_f64("E2E_GAIN", 3.0),
        },
        interictal: Default::default(),
    }
}

fn env_f64(name: &str, default: f64) -> f64 {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

pub fn pipeline_configs(seed: u64) -> (LosocvConfig, ModelConfig, TrainConfig) {
    let nfft = env_f64("E2E_NFFT", 32.0) as usize;
    let spectral = SpectralConfig {
        scales: vec![1, 2, 3, 4, 5],
        nfft,
        window: WindowFn::Hann,
    };
    let model = ModelConfig {
        channels: 3,
        kept_bins: nfft / 2,
        scales: vec![1, 2, 3, 4, 5],
        conv3d_maps: [2, 3, 4],
        conv2d_maps: [2, 3, 4],
        fc_width: 12,
        head_widths: vec![16, 8],
        width_multiplier: 1.0,
    };
    let train_cfg = TrainConfig {
        epochs: 20,
        batch_size: env_f64("E2E_BATCH", 16.0) as usize,
        seed,
        optimizer: NadamHyper {
            lr: env_f64("E2E_LR", 1e-3),
            ..NadamHyper::default()
        },
        balance: true,
    };
    let losocv_cfg = LosocvConfig {
        patient: "synthetic-patient".into(),
        segment_len_s: 5.0,
        policy: OverlapPolicy {
            interictal: InterictalStride::FullLength,
            crossing: CrossingStride::PointWise,
            postictal_exclusion_s: 1800.0,
        },
        spectral,
        detector: DetectorConfig::default(),
        lead_in_s: 10.0,
    };
    (losocv_cfg, model, train_cfg)
}

#[test]
#[ignore] // slow path-finding run; the assertions live in the acceptance suite
fn synthetic_losocv_pipeline() {
    let seed = std::env::var("E2E_SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(7u64);
    let t0 = Instant::now();
    let rec = generate(&synthetic_patient(seed)).unwrap();
    println!(
        "recording: {} ch, {:.1} h, {} seizures ({:?})",
        rec.channels(),
        rec.duration_s() / 3600.0,
        rec.annotations().len(),
        t0.elapsed()
    );

    let (losocv_cfg, model_cfg, train_cfg) = pipeline_configs(seed);
    let t1 = Instant::now();
    let report = losocv(&rec, &losocv_cfg, |fold: &FoldData| {
        let t = Instant::now();
        let train_set: Vec<_> = fold.train.iter().map(|s| (*s).clone()).collect();
        let span = rec.annotations()[fold.held_out];
        let stream_start = span.onset_s - losocv_cfg.segment_len_s - losocv_cfg.lead_in_s;
        let outcome: TrainOutcome = train_with_metric(&model_cfg, &train_cfg, &train_set, |params| {
            let candidate = TrainedModel {
                model_cfg: model_cfg.clone(),
                spectral_cfg: losocv_cfg.spectral.clone(),
                params: params.clone(),
            };
            let trace = run_stream_span(
                &rec,
                &candidate,
                &losocv_cfg.detector,
                losocv_cfg.segment_len_s,
                stream_start,
                span.onset_s + losocv_cfg.segment_len_s,
            )?;
            rpip_error(&trace, &span, losocv_cfg.segment_len_s, losocv_cfg.detector.rate)
        })?;
        println!(
            "fold {}: {} train / {} val samples, best epoch {}, val err {:.4}, {:?}",
            fold.held_out,
            train_set.len(),
            fold.validation.len(),
            outcome.best_epoch,
            outcome.history[outcome.best_epoch].val_error,
            t.elapsed()
        );
        let curve: Vec<String> = outcome.history.iter().map(|h| format!("{:.3}", h.val_error)).collect();
        println!("    val curve: [{}]", curve.join(", "));
        // per-class mean prediction diagnostics
        let mut by_tag: std::collections::BTreeMap<&str, (f64, usize)> = Default::default();
        for s in &train_set {
            let p = ictus::model::forward(&s.features, &outcome.params, &model_cfg)?.p_hat_ictal;
            let e = by_tag.entry(s.tag.name()).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
        for (tag, (sum, n)) in by_tag {
            println!("    mean train pip[{tag}] = {:.3} over {n}", sum / n as f64);
        }
        Ok(TrainedFold {
            estimator: TrainedModel {
                model_cfg: model_cfg.clone(),
                spectral_cfg: losocv_cfg.spectral.clone(),
                params: outcome.params,
            },
            best_epoch: outcome.best_epoch,
        })
    })
    .unwrap();
    println!("losocv took {:?}", t1.elapsed());

    for f in &report.folds {
        println!(
            "seizure {} @ {:.0}s: detected_in_crossing={} latency={:?} rpip_err={:.2}% fdr={:.3}/h ({} false alarms over {:.2} h)",
            f.seizure_index,
            f.onset_s,
            f.detected_in_crossing,
            f.latency,
            f.rpip_error_pct,
            f.fdr_per_h,
            f.n_false,
            f.interictal_hours
        );
    }
    let a = &report.aggregate;
    println!(
        "aggregate: {}/{} detected, rpip {:.2}±{:.2}%, latency {:.2}±{:.2}s, fdr {:.3}±{:.3}/h",
        a.n_detected_crossing,
        a.n_total,
        a.rpip_err_mean,
        a.rpip_err_sd,
        a.latency_mean_s,
        a.latency_sd_s,
        a.fdr_mean,
        a.fdr_sd
    );
    println!("total {:?}", t0.elapsed());
}
