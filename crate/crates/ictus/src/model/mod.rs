//! Multiscale 3D-convolutional probability predictor.
//!
//! Per scale, three convolution blocks (3D convolution, ReLU, max-pool; time
//! depth stays flat at the two shallowest scales) feed a fully connected
//! layer; the per-scale vectors are stacked into a 2D map that passes three
//! 5x5 convolution blocks and an FC head ending in two sigmoid nodes, the
//! predicted `[p_interictal, p_ictal]` pair. Everything runs in `f64` with
//! exact analytic gradients and a Nadam optimizer.

pub mod layers;
mod network;
pub mod train;

use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::detector::PipEstimator;
use crate::error::{Error, Result};
use crate::labeling::SoftLabel;
use crate::signal_io::Segment;
use crate::spectral::{freq_norm, multiscale_stft, MultiscaleSpectrogram, SpectralConfig};

pub use network::LOSS_EPS;
pub use train::{train, train_with_metric, EpochStats, TrainConfig, TrainOutcome, TrainSample};

use network::NetworkLayout;

/// Architecture hyperparameters.
///
/// The full-scale layout uses `channels = 22`, `kept_bins = 32`, scales 1-5,
/// 512-wide per-scale FCs and a `[1024, 256, 64]` head; desk-scale runs
/// shrink the widths and the map counts via `width_multiplier`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Electrode channels expected in the feature tensor (image height).
    pub channels: usize,
    /// Frequency bins per window (image width).
    pub kept_bins: usize,
    /// Scale indices; must match the spectral configuration.
    pub scales: Vec<u32>,
    /// Feature maps of the three per-scale convolution blocks.
    pub conv3d_maps: [usize; 3],
    /// Feature maps of the three fusion convolution blocks.
    pub conv2d_maps: [usize; 3],
    /// Width of the per-scale fully connected layer.
    pub fc_width: usize,
    /// Hidden widths of the classification head.
    pub head_widths: Vec<usize>,
    /// Multiplier applied to both map counts (minimum 1 map).
    pub width_multiplier: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 22,
            kept_bins: 32,
            scales: vec![1, 2, 3, 4, 5],
            conv3d_maps: [16, 32, 64],
            conv2d_maps: [16, 32, 64],
            fc_width: 512,
            head_widths: vec![1024, 256, 64],
            width_multiplier: 1.0,
        }
    }
}

impl ModelConfig {
    /// Small configuration for desk-scale experiments and tests.
    pub fn tiny(channels: usize, kept_bins: usize, scales: Vec<u32>, fc_width: usize) -> Self {
        ModelConfig {
            channels,
            kept_bins,
            scales,
            conv3d_maps: [2, 3, 4],
            conv2d_maps: [2, 3, 4],
            fc_width,
            head_widths: vec![16, 8],
            width_multiplier: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.kept_bins == 0 || self.fc_width == 0 {
            return Err(Error::InvalidConfig("model dimensions must be positive".into()));
        }
        if self.scales.is_empty() || self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("scales must be non-empty and ascending".into()));
        }
        if self.scales[0] < 1 || *self.scales.last().unwrap() > 16 {
            return Err(Error::InvalidConfig("scales must lie in 1..=16".into()));
        }
        if !(self.width_multiplier > 0.0) {
            return Err(Error::InvalidConfig("width multiplier must be positive".into()));
        }
        Ok(())
    }

    fn eff(&self, maps: usize) -> usize {
        ((maps as f64 * self.width_multiplier).round() as usize).max(1)
    }

    pub(crate) fn eff_conv3d_maps(&self, block: usize) -> usize {
        self.eff(self.conv3d_maps[block])
    }

    pub(crate) fn eff_conv2d_maps(&self, block: usize) -> usize {
        self.eff(self.conv2d_maps[block])
    }

    /// Total learnable parameter count implied by the configuration.
    pub fn param_count(&self) -> Result<usize> {
        Ok(NetworkLayout::build(self)?.total)
    }
}

/// Sigmoid outputs of the two-node output layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityPair {
    pub p_hat_interictal: f64,
    pub p_hat_ictal: f64,
}

/// Learnable parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    values: Vec<f64>,
    moment1: Vec<f64>,
    moment2: Vec<f64>,
    step: u64,
}

impl ModelParams {
    /// All-zero parameters (useful for shape probes).
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        let n = cfg.param_count()?;
        Ok(ModelParams {
            values: vec![0.0; n],
            moment1: vec![0.0; n],
            moment2: vec![0.0; n],
            step: 0,
        })
    }

    /// Seed-controlled uniform init in `±sqrt(6 / (fan_in + fan_out))` per
    /// weight tensor; biases start at zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let layout = NetworkLayout::build(cfg)?;
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize,
                        params: &mut Vec<f64>| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for i in range {
                params[i] = rng.gen_range(-limit..limit);
            }
        };
        for sc in &layout.scales {
            for b in &sc.blocks {
                let k = b.kshape;
                let taps = k.kh * k.kw * k.kd;
                fill(b.kernel.clone(), k.maps_in * taps, k.maps_out * taps, &mut params);
            }
            fill(sc.fc.w.clone(), sc.fc.n_in, sc.fc.n_out, &mut params);
        }
        for b in &layout.fusion {
            let k = b.kshape;
            let taps = k.kh * k.kw * k.kd;
            fill(b.kernel.clone(), k.maps_in * taps, k.maps_out * taps, &mut params);
        }
        for h in &layout.head {
            fill(h.w.clone(), h.n_in, h.n_out, &mut params);
        }
        fill(layout.output.w.clone(), layout.output.n_in, layout.output.n_out, &mut params);

        Ok(ModelParams {
            moment1: vec![0.0; params.len()],
            moment2: vec![0.0; params.len()],
            values: params,
            step: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.moment1.iter().all(|v| v.is_finite())
            && self.moment2.iter().all(|v| v.is_finite())
    }
}

/// Forward pass: feature tensor to probability pair.
pub fn forward(
    input: &MultiscaleSpectrogram,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ProbabilityPair> {
    network::check_input(cfg, input)?;
    let layout = NetworkLayout::build(cfg)?;
    if params.len() != layout.total {
        return Err(Error::ShapeMismatch(format!(
            "parameter vector has {} entries, layout needs {}",
            params.len(),
            layout.total
        )));
    }
    let cache = network::forward_cached(&layout, params.values(), input);
    Ok(network::pair_from_probs(cache.probs))
}

/// Soft-label binary cross entropy summed over both output nodes.
pub fn loss(pred: &ProbabilityPair, label: &SoftLabel) -> f64 {
    network::bce_loss([pred.p_hat_interictal, pred.p_hat_ictal], label)
}

/// Distance from this (input, parameters) point to the nearest
/// activation-pattern change: the smallest ReLU pre-activation magnitude,
/// live max-pool decision gap, or headroom to the loss clamp.
///
/// Finite-difference gradient probes are only meaningful when the probe
/// stays inside one smooth piece of the network; points with a comfortable
/// margin guarantee that for perturbations small relative to the margin.
pub fn activation_margin(
    input: &MultiscaleSpectrogram,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<f64> {
    network::check_input(cfg, input)?;
    let layout = NetworkLayout::build(cfg)?;
    if params.len() != layout.total {
        return Err(Error::ShapeMismatch(format!(
            "parameter vector has {} entries, layout needs {}",
            params.len(),
            layout.total
        )));
    }
    let cache = network::forward_cached(&layout, params.values(), input);
    Ok(network::activation_margin(&layout, &cache))
}

/// Loss and exact gradients w.r.t. every parameter, in canonical order.
pub fn backward(
    input: &MultiscaleSpectrogram,
    params: &ModelParams,
    label: &SoftLabel,
    cfg: &ModelConfig,
) -> Result<(f64, Vec<f64>)> {
    network::check_input(cfg, input)?;
    let layout = NetworkLayout::build(cfg)?;
    if params.len() != layout.total {
        return Err(Error::ShapeMismatch(format!(
            "parameter vector has {} entries, layout needs {}",
            params.len(),
            layout.total
        )));
    }
    let cache = network::forward_cached(&layout, params.values(), input);
    Ok(network::backward_from_cache(&layout, params.values(), &cache, label))
}

/// Nadam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for NadamHyper {
    fn default() -> Self {
        NadamHyper {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Nadam update with bias correction and Nesterov lookahead:
///
/// ```text
/// m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
/// m_hat = m / (1 - b1^(t+1))    g_hat = g / (1 - b1^t)    v_hat = v / (1 - b2^t)
/// theta <- theta - lr (b1 m_hat + (1 - b1) g_hat) / (sqrt(v_hat) + eps)
/// ```
///
/// Non-finite gradients leave the parameters untouched.
pub fn nadam_step(params: &mut ModelParams, grads: &[f64], hyper: &NadamHyper) -> Result<()> {
    if grads.len() != params.values.len() {
        return Err(Error::ShapeMismatch(format!(
            "gradient vector has {} entries, parameters have {}",
            grads.len(),
            params.values.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    let t = params.step + 1;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bc1_next = 1.0 - b1.powi(t as i32 + 1);
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    for i in 0..params.values.len() {
        let g = grads[i];
        params.moment1[i] = b1 * params.moment1[i] + (1.0 - b1) * g;
        params.moment2[i] = b2 * params.moment2[i] + (1.0 - b2) * g * g;
        let m_hat = params.moment1[i] / bc1_next;
        let g_hat = g / bc1;
        let v_hat = params.moment2[i] / bc2;
        params.values[i] -= hyper.lr * (b1 * m_hat + (1.0 - b1) * g_hat) / (v_hat.sqrt() + hyper.eps);
    }
    params.step = t;
    Ok(())
}

/// A trained model bundled with the feature configuration it was trained on.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model_cfg: ModelConfig,
    pub spectral_cfg: SpectralConfig,
    pub params: ModelParams,
}

impl TrainedModel {
    /// Multiscale STFT + FreqNorm features for one segment.
    pub fn features(&self, segment: &Segment) -> Result<MultiscaleSpectrogram> {
        Ok(freq_norm(&multiscale_stft(segment, &self.spectral_cfg)?))
    }
}

impl PipEstimator for TrainedModel {
    fn pip(&self, segment: &Segment) -> Result<f64> {
        let features = self.features(segment)?;
        Ok(forward(&features, &self.params, &self.model_cfg)?.p_hat_ictal)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    model: ModelConfig,
    spectral: SpectralConfig,
    step: u64,
    seed: u64,
    n_params: usize,
}

/// Writes a checkpoint: one JSON header line, then the parameter values and
/// both optimizer moments as little-endian `f64` in canonical order.
pub fn save_checkpoint(path: &Path, model: &TrainedModel, seed: u64) -> Result<()> {
    let header = CheckpointHeader {
        model: model.model_cfg.clone(),
        spectral: model.spectral_cfg.clone(),
        step: model.params.step,
        seed,
        n_params: model.params.len(),
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut f, &header)?;
    f.write_all(b"\n")?;
    for part in [&model.params.values, &model.params.moment1, &model.params.moment2] {
        for v in part.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Loads a checkpoint written by [`save_checkpoint`]; returns the model and
/// the training seed recorded in the header.
pub fn load_checkpoint(path: &Path) -> Result<(TrainedModel, u64)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header_line = String::new();
    f.read_line(&mut header_line)?;
    let header: CheckpointHeader = serde_json::from_str(header_line.trim_end())?;

    let expect = header.model.param_count()?;
    if header.n_params != expect {
        return Err(Error::InvalidData(format!(
            "checkpoint claims {} parameters, config implies {expect}",
            header.n_params
        )));
    }
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;
    if payload.len() != header.n_params * 8 * 3 {
        return Err(Error::InvalidData(format!(
            "checkpoint payload is {} bytes, expected {}",
            payload.len(),
            header.n_params * 8 * 3
        )));
    }
    let read_block = |block: usize| -> Vec<f64> {
        (0..header.n_params)
            .map(|i| {
                let off = (block * header.n_params + i) * 8;
                f64::from_le_bytes(payload[off..off + 8].try_into().unwrap())
            })
            .collect()
    };
    let params = ModelParams {
        values: read_block(0),
        moment1: read_block(1),
        moment2: read_block(2),
        step: header.step,
    };
    Ok((
        TrainedModel {
            model_cfg: header.model,
            spectral_cfg: header.spectral,
            params,
        },
        header.seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{PeriodTag, SoftLabel};
    use crate::signal_io::Segment;
    use rand::Rng;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig::tiny(2, 8, vec![1, 2], 8)
    }

    fn spectral_for(cfg: &ModelConfig) -> SpectralConfig {
        SpectralConfig {
            scales: cfg.scales.clone(),
            nfft: cfg.kept_bins * 2,
            window: crate::spectral::WindowFn::Hann,
        }
    }

    fn random_features(cfg: &ModelConfig, seed: u64) -> MultiscaleSpectrogram {
        // run a random segment through the real feature path
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let seg = Segment::from_channels(
            64.0,
            0.0,
            (0..cfg.channels)
                .map(|_| (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        freq_norm(&multiscale_stft(&seg, &spectral_for(cfg)).unwrap())
    }

    #[test]
    fn zero_params_give_half_half() {
        let cfg = tiny_cfg();
        let params = ModelParams::zeros(&cfg).unwrap();
        let out = forward(&random_features(&cfg, 1), &params, &cfg).unwrap();
        assert_eq!(out.p_hat_interictal, 0.5);
        assert_eq!(out.p_hat_ictal, 0.5);
    }

    #[test]
    fn outputs_strictly_inside_unit_interval() {
        let cfg = tiny_cfg();
        for seed in 0..5 {
            let params = ModelParams::init(&cfg, seed).unwrap();
            let out = forward(&random_features(&cfg, seed), &params, &cfg).unwrap();
            for p in [out.p_hat_interictal, out.p_hat_ictal] {
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny_cfg();
        let params = ModelParams::init(&cfg, 7).unwrap();
        let feats = random_features(&cfg, 7);
        let a = forward(&feats, &params, &cfg).unwrap();
        let b = forward(&feats, &params, &cfg).unwrap();
        assert_eq!(a.p_hat_ictal.to_bits(), b.p_hat_ictal.to_bits());
        assert_eq!(a.p_hat_interictal.to_bits(), b.p_hat_interictal.to_bits());
    }

    #[test]
    fn shape_mismatch_detected() {
        let cfg = tiny_cfg();
        let params = ModelParams::init(&cfg, 1).unwrap();
        let other = ModelConfig::tiny(3, 8, vec![1, 2], 8);
        let feats = random_features(&other, 1);
        assert!(matches!(forward(&feats, &params, &cfg), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn loss_analytic_values() {
        // equal halves: 4 * (-0.5 ln 0.5) = 2 ln 2
        let pred = ProbabilityPair { p_hat_interictal: 0.5, p_hat_ictal: 0.5 };
        let label = SoftLabel { p_interictal: 0.5, p_ictal: 0.5 };
        assert!((loss(&pred, &label) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);

        // exact binary match saturates at the clamp: 2 * (-ln(1 - eps))
        let pred = ProbabilityPair { p_hat_interictal: 0.0, p_hat_ictal: 1.0 };
        let label = SoftLabel::ictal();
        let want = -2.0 * (1.0 - LOSS_EPS).ln();
        assert!((loss(&pred, &label) - want).abs() < 1e-12);
        assert!(loss(&pred, &label) < 3e-7);
    }

    #[test]
    fn loss_matches_elementwise_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let pred = ProbabilityPair {
                p_hat_interictal: rng.gen_range(0.001..0.999),
                p_hat_ictal: rng.gen_range(0.001..0.999),
            };
            let p = rng.gen_range(0.0..=1.0);
            let label = SoftLabel { p_interictal: 1.0 - p, p_ictal: p };
            let direct = -(label.p_interictal * pred.p_hat_interictal.ln()
                + (1.0 - label.p_interictal) * (1.0 - pred.p_hat_interictal).ln())
                - (label.p_ictal * pred.p_hat_ictal.ln()
                    + (1.0 - label.p_ictal) * (1.0 - pred.p_hat_ictal).ln());
            assert!((loss(&pred, &label) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_output_has_zero_output_bias_gradient() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::zeros(&cfg).unwrap();
        // push the output biases far into saturation toward the label
        let layout = NetworkLayout::build(&cfg).unwrap();
        params.values_mut()[layout.output.b.start] = -40.0;
        params.values_mut()[layout.output.b.start + 1] = 40.0;
        let feats = random_features(&cfg, 3);
        let (_, grads) = backward(&feats, &params, &SoftLabel::ictal(), &cfg).unwrap();
        let gb = &grads[layout.output.b.clone()];
        assert!(gb.iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn param_count_formula_matches_runtime() {
        for cfg in [
            tiny_cfg(),
            ModelConfig::tiny(4, 16, vec![1, 2, 3, 4, 5], 16),
            ModelConfig { width_multiplier: 0.5, ..ModelConfig::default() },
        ] {
            let params = ModelParams::init(&cfg, 0).unwrap();
            // closed form recomputed independently of the layout builder
            let eff = |m: usize| ((m as f64 * cfg.width_multiplier).round() as usize).max(1);
            let pool = |d: usize, k: usize| if d < k { 1 } else { d / k };
            let mut want = 0usize;
            for &n in &cfg.scales {
                let (kd, pd) = if n <= 2 { (1, 1) } else { (3, 2) };
                let (mut h, mut w, mut d) = (cfg.channels, cfg.kept_bins, (1usize << n) - 1);
                let mut mi = 1usize;
                for b in 0..3 {
                    let mo = eff(cfg.conv3d_maps[b]);
                    want += mo * mi * 3 * 3 * kd + mo;
                    h = pool(h, 2);
                    w = pool(w, 2);
                    d = pool(d, pd);
                    mi = mo;
                }
                want += (mi * h * w * d) * cfg.fc_width + cfg.fc_width;
            }
            let (mut h, mut w) = (cfg.scales.len(), cfg.fc_width);
            let mut mi = 1usize;
            for b in 0..3 {
                let mo = eff(cfg.conv2d_maps[b]);
                want += mo * mi * 5 * 5 + mo;
                h = pool(h, 2);
                w = pool(w, 2);
                mi = mo;
            }
            let mut prev = mi * h * w;
            for &hw in &cfg.head_widths {
                want += prev * hw + hw;
                prev = hw;
            }
            want += prev * 2 + 2;
            assert_eq!(params.len(), want);
            assert_eq!(cfg.param_count().unwrap(), want);
        }
    }

    #[test]
    fn pooling_never_collapses_to_zero() {
        let cfg = ModelConfig {
            channels: 22,
            kept_bins: 32,
            ..ModelConfig::tiny(22, 32, vec![1, 2, 3, 4, 5], 16)
        };
        let layout = NetworkLayout::build(&cfg).unwrap();
        for sc in &layout.scales {
            for b in &sc.blocks {
                assert!(b.out_shape.len() > 0);
            }
            assert!(sc.flat > 0);
        }
        assert!(layout.fusion_flat > 0);
    }

    #[test]
    fn nadam_single_step_matches_hand_computed_formula() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::zeros(&cfg).unwrap();
        let n = params.len();
        let mut grads = vec![0.0; n];
        grads[0] = 1.0;
        let hyper = NadamHyper::default();
        nadam_step(&mut params, &grads, &hyper).unwrap();

        // hand evaluation at t = 1, g = 1, from zero moments:
        let m1 = 0.1 * 1.0;
        let v1 = 0.001 * 1.0;
        let m_hat = m1 / (1.0 - 0.9f64.powi(2));
        let g_hat = 1.0 / (1.0 - 0.9);
        let v_hat: f64 = v1 / (1.0 - 0.999);
        let update = 1e-4 * (0.9 * m_hat + 0.1 * g_hat) / (v_hat.sqrt() + 1e-8);
        assert!((params.values()[0] - (-update)).abs() < 1e-16);
        assert_eq!(params.step(), 1);
        // untouched coordinates stay zero
        assert!(params.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nadam_zero_gradient_keeps_parameters() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::init(&cfg, 3).unwrap();
        let before = params.values().to_vec();
        let zero_grads = vec![0.0; params.len()];
        nadam_step(&mut params, &zero_grads, &NadamHyper::default()).unwrap();
        assert_eq!(params.values(), &before[..]);
        assert_eq!(params.step(), 1);
    }

    #[test]
    fn nadam_elementwise_independence() {
        let cfg = tiny_cfg();
        let hyper = NadamHyper::default();
        let mut joint = ModelParams::init(&cfg, 4).unwrap();
        let mut grads = vec![0.0; joint.len()];
        grads[2] = 0.3;
        grads[5] = -0.7;
        let mut alone2 = joint.clone();
        let mut alone5 = joint.clone();
        nadam_step(&mut joint, &grads, &hyper).unwrap();
        let mut g2 = vec![0.0; alone2.len()];
        g2[2] = 0.3;
        nadam_step(&mut alone2, &g2, &hyper).unwrap();
        let mut g5 = vec![0.0; alone5.len()];
        g5[5] = -0.7;
        nadam_step(&mut alone5, &g5, &hyper).unwrap();
        assert_eq!(joint.values()[2], alone2.values()[2]);
        assert_eq!(joint.values()[5], alone5.values()[5]);
    }

    #[test]
    fn nadam_rejects_non_finite_gradients() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::init(&cfg, 5).unwrap();
        let before = params.clone();
        let mut grads = vec![0.0; params.len()];
        grads[0] = f64::NAN;
        assert!(matches!(
            nadam_step(&mut params, &grads, &NadamHyper::default()),
            Err(Error::NonFiniteGradient)
        ));
        assert_eq!(params, before);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::init(&cfg, 11).unwrap();
        // dirty the moments so all three blocks are non-trivial
        let grads: Vec<f64> = (0..params.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        nadam_step(&mut params, &grads, &NadamHyper::default()).unwrap();
        let tm = TrainedModel {
            spectral_cfg: spectral_for(&cfg),
            model_cfg: cfg,
            params,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &tm, 99).unwrap();
        let (back, seed) = load_checkpoint(&path).unwrap();
        assert_eq!(seed, 99);
        assert_eq!(back.params, tm.params);
        assert_eq!(back.model_cfg, tm.model_cfg);
        assert_eq!(back.spectral_cfg, tm.spectral_cfg);
    }

    #[test]
    fn relu_dead_unit_gradient_is_zero_full_network() {
        let cfg = tiny_cfg();
        let mut params = ModelParams::init(&cfg, 8).unwrap();
        let layout = NetworkLayout::build(&cfg).unwrap();
        // Kill the first head unit by a large negative bias: its incoming
        // weights must then carry zero gradient.
        let head0 = &layout.head[0];
        params.values_mut()[head0.b.start] = -100.0;
        let feats = random_features(&cfg, 8);
        let label = crate::labeling::label_segment(PeriodTag::Interictal).unwrap();
        let (_, grads) = backward(&feats, &params, &label, &cfg).unwrap();
        let row = &grads[head0.w.start..head0.w.start + head0.n_in];
        assert!(row.iter().all(|&g| g == 0.0));
    }
}
