//! Full streaming loop: train on one synthetic patient, then slide a window
//! over a fresh stretch of signal at 10 steps/s and watch the alarm fire
//! inside the crossing window.
//!
//! ```bash
//! cargo run --release --example stream_detection
//! ```

use ictus::detector::{run_stream_span, DetectorConfig};
use ictus::labeling::{label_segment, PeriodTag};
use ictus::model::{train, ModelConfig, NadamHyper, TrainConfig, TrainSample, TrainedModel};
use ictus::signal_io::{extract_segments, CrossingStride, InterictalStride, OverlapPolicy};
use ictus::spectral::{freq_norm, multiscale_stft, SpectralConfig, WindowFn};
use ictus::synth::{generate, SynthConfig};

fn main() -> ictus::Result<()> {
    // two seizures to train on, a third to stream over
    let rec = generate(&SynthConfig {
        seed: 5,
        channels: 3,
        rate_hz: 64.0,
        duration_s: 1500.0,
        seizures: vec![(300.0, 40.0), (700.0, 40.0), (1300.0, 40.0)],
        ..SynthConfig::default()
    })?;
    let spectral = SpectralConfig {
        scales: vec![1, 2, 3, 4, 5],
        nfft: 32,
        window: WindowFn::Hann,
    };
    let policy = OverlapPolicy {
        interictal: InterictalStride::FullLength,
        crossing: CrossingStride::PointWise,
        postictal_exclusion_s: 60.0,
    };
    let held_out_onset = 1300.0;

    let mut samples = Vec::new();
    for (seg, tag) in extract_segments(&rec, 5.0, &policy)? {
        if tag == PeriodTag::Excluded || seg.end_s() > held_out_onset - 60.0 {
            continue;
        }
        samples.push(TrainSample {
            features: freq_norm(&multiscale_stft(&seg, &spectral)?),
            label: label_segment(tag)?,
            tag,
        });
    }
    println!("training on {} samples from the first two seizures...", samples.len());
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
        seed: 5,
        optimizer: NadamHyper {
            lr: 3e-3,
            ..NadamHyper::default()
        },
        balance: true,
    };
    let outcome = train(&model_cfg, &train_cfg, &samples, &[])?;
    let model = TrainedModel {
        model_cfg,
        spectral_cfg: spectral,
        params: outcome.params,
    };

    // stream the held-out seizure's neighborhood
    let trace = run_stream_span(
        &rec,
        &model,
        &DetectorConfig::default(),
        5.0,
        held_out_onset - 30.0,
        held_out_onset + 40.0,
    )?;
    println!("streamed {} steps around the held-out onset at {held_out_onset} s", trace.len());
    for row in &trace {
        if row.t_s % 5.0 < 0.05 || row.alarm {
            println!(
                "  t = {:7.1} s  pip {:.3}  rpip {:.3}  ap {:.3}{}",
                row.t_s,
                row.pip,
                row.rpip,
                row.ap,
                if row.alarm { "  << ALARM" } else { "" }
            );
        }
        if row.alarm {
            println!("\nlatency: {:.1} s after onset", row.t_s - held_out_onset);
            break;
        }
    }
    Ok(())
}
