//! Scratch micro-benchmark (run explicitly with --ignored).

use std::time::Instant;

use ictus::labeling::SoftLabel;
use ictus::model::{backward, forward, ModelConfig, ModelParams};
use ictus::signal_io::Segment;
use ictus::spectral::{freq_norm, multiscale_stft, SpectralConfig, WindowFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[test]
#[ignore]
fn per_op_costs() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let channels = 3usize;
    let rate = 64.0;
    let len = 320usize;
    let seg = Segment::from_channels(
        rate,
        0.0,
        (0..channels)
            .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap();
    let spectral = SpectralConfig { scales: vec![1, 2, 3, 4, 5], nfft: 32, window: WindowFn::Hann };

    let t = Instant::now();
    let n = 200u32;
    let mut feats = None;
    for _ in 0..n {
        feats = Some(freq_norm(&multiscale_stft(&seg, &spectral).unwrap()));
    }
    println!("stft+norm: {:?}/call", t.elapsed() / n);
    let feats = feats.unwrap();

    for (name, maps, fc, head) in [
        ("maps[3,4,6] fc16 head[32,16]", [3usize, 4, 6], 16usize, vec![32usize, 16]),
        ("maps[2,3,4] fc12 head[16,8]", [2, 3, 4], 12, vec![16, 8]),
        ("maps[2,2,3] fc8 head[16]", [2, 2, 3], 8, vec![16]),
    ] {
        let cfg = ModelConfig {
            channels,
            kept_bins: 16,
            scales: vec![1, 2, 3, 4, 5],
            conv3d_maps: maps,
            conv2d_maps: maps,
            fc_width: fc,
            head_widths: head,
            width_multiplier: 1.0,
        };
        let params = ModelParams::init(&cfg, 3).unwrap();
        println!("{name}: {} params", params.len());
        let t = Instant::now();
        for _ in 0..n {
            forward(&feats, &params, &cfg).unwrap();
        }
        println!("  forward: {:?}/call", t.elapsed() / n);
        let label = SoftLabel { p_interictal: 0.5, p_ictal: 0.5 };
        let t = Instant::now();
        for _ in 0..n {
            backward(&feats, &params, &label, &cfg).unwrap();
        }
        println!("  backward(+fwd): {:?}/call", t.elapsed() / n);
    }
}
