//! Full-network gradient verification against central finite differences at
//! h = 1e-3.
//!
//! A finite-difference probe is only meaningful while the perturbed forward
//! pass stays inside one smooth piece of the network, so probe points are
//! drawn with every parameter (biases included) uniformly random and
//! accepted only when the activation margin — the distance to the nearest
//! ReLU sign change, max-pool decision swap, or loss-clamp boundary — safely
//! exceeds the perturbation reach. Degenerate draws are redrawn from a
//! deterministic seed stream.

use ictus::labeling::SoftLabel;
use ictus::model::{activation_margin, backward, forward, loss, ModelConfig, ModelParams};
use ictus::signal_io::Segment;
use ictus::spectral::{freq_norm, multiscale_stft, MultiscaleSpectrogram, SpectralConfig, WindowFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const FD_H: f64 = 1e-3;
/// Conservative bound on how far one ±h parameter probe can move any
/// pre-activation in this tiny network.
const MARGIN_TOL: f64 = 8e-3;

fn tiny_cfg() -> (ModelConfig, SpectralConfig) {
    let model = ModelConfig {
        channels: 2,
        kept_bins: 4,
        scales: vec![1, 2],
        conv3d_maps: [2, 2, 2],
        conv2d_maps: [2, 2, 2],
        fc_width: 8,
        head_widths: vec![8],
        width_multiplier: 1.0,
    };
    let spectral = SpectralConfig {
        scales: vec![1, 2],
        nfft: 8,
        window: WindowFn::Hann,
    };
    (model, spectral)
}

fn random_features(spectral: &SpectralConfig, channels: usize, seed: u64) -> MultiscaleSpectrogram {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let seg = Segment::from_channels(
        64.0,
        0.0,
        (0..channels)
            .map(|_| (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap();
    freq_norm(&multiscale_stft(&seg, spectral).unwrap())
}

/// Every parameter (biases too) uniform in ±0.7: no structural zeros, so
/// exact pre-activation ties have measure zero.
fn random_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut params = ModelParams::zeros(cfg).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for v in params.values_mut() {
        *v = rng.gen_range(-0.7..0.7);
    }
    params
}

fn random_label(seed: u64) -> SoftLabel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x1abe1);
    let p = 0.05 * rng.gen_range(0..=19) as f64;
    SoftLabel {
        p_interictal: 1.0 - p,
        p_ictal: p,
    }
}

struct ProbePoint {
    params: ModelParams,
    feats: MultiscaleSpectrogram,
    label: SoftLabel,
    attempts: u64,
}

/// Draws the next probe point with activation margin above `MARGIN_TOL`.
fn next_probe(cfg: &ModelConfig, spectral: &SpectralConfig, stream: &mut u64) -> ProbePoint {
    let mut attempts = 0;
    loop {
        let seed = *stream;
        *stream += 1;
        attempts += 1;
        assert!(attempts < 100_000, "margin rejection is not terminating");
        let params = random_params(cfg, seed ^ 0x9e37_79b9);
        let feats = random_features(spectral, cfg.channels, seed);
        let margin = activation_margin(&feats, &params, cfg).unwrap();
        if margin > MARGIN_TOL {
            let label = random_label(seed);
            return ProbePoint {
                params,
                feats,
                label,
                attempts,
            };
        }
    }
}

/// Relative error with a small denominator floor: gradients below the floor
/// are effectively compared absolutely at the finite-difference noise scale.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3)
}

#[test]
fn full_network_gradients_match_finite_differences() {
    let (cfg, spectral) = tiny_cfg();
    let mut stream = 0u64;
    let mut global_worst = 0.0f64;
    let mut total_attempts = 0u64;
    for round in 0..20 {
        let point = next_probe(&cfg, &spectral, &mut stream);
        total_attempts += point.attempts;
        let (_, grads) = backward(&point.feats, &point.params, &point.label, &cfg).unwrap();
        let mut probe = point.params.clone();
        let mut worst = 0.0f64;
        for i in 0..point.params.len() {
            let orig = point.params.values()[i];
            probe.values_mut()[i] = orig + FD_H;
            let up = loss(&forward(&point.feats, &probe, &cfg).unwrap(), &point.label);
            probe.values_mut()[i] = orig - FD_H;
            let down = loss(&forward(&point.feats, &probe, &cfg).unwrap(), &point.label);
            probe.values_mut()[i] = orig;
            let fd = (up - down) / (2.0 * FD_H);
            worst = worst.max(rel_err(grads[i], fd));
        }
        println!(
            "round {round}: max rel err {worst:.3e} ({} draw attempts)",
            point.attempts
        );
        global_worst = global_worst.max(worst);
    }
    println!("global worst over 20 seeds: {global_worst:.3e}, {total_attempts} total draws");
    assert!(
        global_worst < 1e-4,
        "gradient mismatch: max relative error {global_worst:.3e}"
    );
}
