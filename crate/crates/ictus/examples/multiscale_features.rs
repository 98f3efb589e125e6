//! Multiscale STFT of one window: each scale halves the analysis window and
//! doubles the time resolution (2^n - 1 frames at scale n), then FreqNorm
//! rescales every frequency column to [0, 1]. Frequency bins sit at
//! multiples of rate/nfft (4 Hz here).
//!
//! ```bash
//! cargo run --release --example multiscale_features
//! ```

use ictus::signal_io::Segment;
use ictus::spectral::{freq_norm, multiscale_stft, SpectralConfig, WindowFn};

fn main() -> ictus::Result<()> {
    // 5 s at 256 Hz, a 12 Hz oscillation turning on halfway through
    let rate = 256.0;
    let len = 1280usize;
    let channel: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 / rate;
            let background = (2.0 * std::f64::consts::PI * 1.3 * t).sin() * 0.4;
            let burst = if k >= len / 2 {
                (2.0 * std::f64::consts::PI * 12.0 * t).sin() * 1.5
            } else {
                0.0
            };
            background + burst
        })
        .collect();
    let seg = Segment::from_channels(rate, 0.0, vec![channel])?;

    let cfg = SpectralConfig {
        scales: vec![1, 2, 3, 4, 5],
        nfft: 64,
        window: WindowFn::Hann,
    };
    let spec = multiscale_stft(&seg, &cfg)?;
    println!("tensor shapes (channels x bins x frames):");
    for s in &spec.scales {
        println!("  scale {}: {} x {} x {}", s.scale, s.channels, s.bins, s.windows);
    }

    let normed = freq_norm(&spec);
    let s3 = normed.scale(3).unwrap();
    println!("\nscale 3 after FreqNorm, bin 3 (12 Hz) across the 7 frames:");
    let row: Vec<String> = (0..s3.windows).map(|w| format!("{:.2}", s3.get(0, 3, w))).collect();
    println!("  [{}]", row.join(", "));
    println!("the burst in the second half lights up the later frames");
    Ok(())
}
