//! Leave-one-seizure-out cross-validation on a compact synthetic patient:
//! each seizure is held out once, a fresh model trains on the rest, and the
//! per-fold detection metrics aggregate into a patient report.
//!
//! ```bash
//! cargo run --release --example crossvalidate_patient
//! ```

use ictus::detector::DetectorConfig;
use ictus::evaluation::{losocv, LatencyOutcome, LosocvConfig, TrainedFold};
use ictus::model::{train, ModelConfig, NadamHyper, TrainConfig, TrainedModel};
use ictus::signal_io::{CrossingStride, InterictalStride, OverlapPolicy};
use ictus::spectral::{SpectralConfig, WindowFn};
use ictus::synth::{generate, SynthConfig};

fn main() -> ictus::Result<()> {
    // compact layout: 3 seizures, ~5 min of clean background each
    let rec = generate(&SynthConfig {
        seed: 9,
        channels: 3,
        rate_hz: 64.0,
        duration_s: 3 * (300.0 + 40.0 + 120.0),
        seizures: SynthConfig::evenly_spaced(3, 300.0, 40.0, 120.0),
        ..SynthConfig::default()
    })?;
    println!(
        "patient: {} seizures over {:.1} min",
        rec.annotations().len(),
        rec.duration_s() / 60.0
    );

    let spectral = SpectralConfig {
        scales: vec![1, 2, 3, 4, 5],
        nfft: 32,
        window: WindowFn::Hann,
    };
    let model_cfg = ModelConfig {
        channels: 3,
        kept_bins: 16,
        scales: vec![1, 2, 3, 4, 5],
        conv3d_maps: [2, 3, 4],
        conv2d_maps: [2, 3, 4],
        fc_width: 12,
        head_widths: vec![16, 8],
        width_multiplier: 1.0,
    };
    let train_cfg = TrainConfig {
        epochs: 15,
        batch_size: 32,
        seed: 3,
        optimizer: NadamHyper {
            lr: 3e-3,
            ..NadamHyper::default()
        },
        balance: true,
    };
    let cfg = LosocvConfig {
        patient: "example-patient".into(),
        segment_len_s: 5.0,
        policy: OverlapPolicy {
            interictal: InterictalStride::FullLength,
            crossing: CrossingStride::PointWise,
            postictal_exclusion_s: 120.0,
        },
        spectral: spectral.clone(),
        detector: DetectorConfig::default(),
        lead_in_s: 10.0,
    };

    let report = losocv(&rec, &cfg, |fold| {
        let train_set: Vec<_> = fold.train.iter().map(|s| (*s).clone()).collect();
        let val_set: Vec<_> = fold.validation.iter().map(|s| (*s).clone()).collect();
        let outcome = train(&model_cfg, &train_cfg, &train_set, &val_set)?;
        Ok(TrainedFold {
            estimator: TrainedModel {
                model_cfg: model_cfg.clone(),
                spectral_cfg: spectral.clone(),
                params: outcome.params,
            },
            best_epoch: outcome.best_epoch,
        })
    })?;

    for f in &report.folds {
        let latency = match f.latency {
            LatencyOutcome::Within(l) => format!("{l:.1} s"),
            LatencyOutcome::MissConvention(l) => format!("{l:.1} s (after crossing)"),
            LatencyOutcome::Undetected => "undetected".into(),
        };
        println!(
            "fold {}: detected in crossing = {}, latency = {latency}, rpip error = {:.1}%, fdr = {:.2}/h",
            f.seizure_index, f.detected_in_crossing, f.rpip_error_pct, f.fdr_per_h
        );
    }
    let row = report.summary_row();
    println!(
        "\n{}: sensitivity {}, rpip {:.2}±{:.2}%, latency {:.2}±{:.2} s, fdr {:.2}±{:.2}/h",
        row.patient,
        row.sensitivity,
        row.rpip_err_mean,
        row.rpip_err_sd,
        row.latency_mean_s,
        row.latency_sd_s,
        row.fdr_mean,
        row.fdr_sd
    );
    println!("\nreport JSON:\n{}", serde_json::to_string_pretty(&row).unwrap());
    Ok(())
}
