//! Train the probability predictor on a small synthetic patient and watch
//! the soft-label loss fall.
//!
//! ```bash
//! cargo run --release --example train_predictor
//! ```

use ictus::labeling::{label_segment, PeriodTag};
use ictus::model::{forward, train, ModelConfig, NadamHyper, TrainConfig, TrainSample};
use ictus::signal_io::{extract_segments, CrossingStride, InterictalStride, OverlapPolicy};
use ictus::spectral::{freq_norm, multiscale_stft, SpectralConfig, WindowFn};
use ictus::synth::{generate, SynthConfig};

fn main() -> ictus::Result<()> {
    let rec = generate(&SynthConfig {
        seed: 11,
        channels: 3,
        rate_hz: 64.0,
        duration_s: 1200.0,
        seizures: vec![(300.0, 40.0), (700.0, 40.0), (1100.0, 40.0)],
        ..SynthConfig::default()
    })?;

    let spectral = SpectralConfig {
        scales: vec![1, 2, 3, 4, 5],
        nfft: 32,
        window: WindowFn::Hann,
    };
    let policy = OverlapPolicy {
        interictal: InterictalStride::FullLength,
        crossing: CrossingStride::TwentyPercent,
        postictal_exclusion_s: 60.0,
    };

    let mut samples = Vec::new();
    for (seg, tag) in extract_segments(&rec, 5.0, &policy)? {
        if tag == PeriodTag::Excluded {
            continue;
        }
        samples.push(TrainSample {
            features: freq_norm(&multiscale_stft(&seg, &spectral)?),
            label: label_segment(tag)?,
            tag,
        });
    }
    println!("{} training samples", samples.len());

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
        epochs: 10,
        batch_size: 16,
        seed: 1,
        optimizer: NadamHyper {
            lr: 1e-3,
            ..NadamHyper::default()
        },
        balance: true,
    };
    let outcome = train(&model_cfg, &train_cfg, &samples, &[])?;
    for s in &outcome.history {
        println!(
            "epoch {:2}: train loss {:.4}, crossing error {:.4}",
            s.epoch, s.train_loss, s.val_error
        );
    }
    println!("best epoch: {}", outcome.best_epoch);

    // predicted ictal probability by period
    let mut by_tag: std::collections::BTreeMap<&str, (f64, usize)> = Default::default();
    for s in &samples {
        let p = forward(&s.features, &outcome.params, &model_cfg)?.p_hat_ictal;
        let e = by_tag.entry(s.tag.name()).or_insert((0.0, 0));
        e.0 += p;
        e.1 += 1;
    }
    println!("\nmean predicted ictal probability by period:");
    for (tag, (sum, n)) in by_tag {
        println!("  {tag:10} {:.3}", sum / n as f64);
    }
    Ok(())
}
