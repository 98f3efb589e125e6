//! Network layout, cached forward pass, and full backpropagation.
//!
//! Parameters live in one flat vector. The canonical order — also the
//! checkpoint payload order — is: for each scale ascending (three blocks of
//! conv kernel then bias, then the per-scale FC weight and bias), the three
//! fusion blocks, the head FC layers, and the two-node output layer.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::labeling::SoftLabel;
use crate::spectral::MultiscaleSpectrogram;

use super::layers::{
    conv3d_backward, conv3d_forward, fc_backward, fc_forward, maxpool_backward, maxpool_forward,
    relu_backward, relu_forward, sigmoid, KernelShape, Shape,
};
use super::{ModelConfig, ProbabilityPair};

/// Prediction clamp used inside the cross-entropy loss.
pub const LOSS_EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct BlockSpec {
    pub in_shape: Shape,
    pub conv_shape: Shape,
    pub out_shape: Shape,
    pub kshape: KernelShape,
    pub pool: (usize, usize, usize),
    pub kernel: Range<usize>,
    pub bias: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct FcSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Range<usize>,
    pub b: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct ScaleSpec {
    pub blocks: Vec<BlockSpec>,
    pub flat: usize,
    pub fc: FcSpec,
}

#[derive(Debug, Clone)]
pub(crate) struct NetworkLayout {
    pub scales: Vec<ScaleSpec>,
    pub fusion: Vec<BlockSpec>,
    pub fusion_flat: usize,
    pub head: Vec<FcSpec>,
    pub output: FcSpec,
    pub total: usize,
}

fn block(
    cursor: &mut usize,
    in_shape: Shape,
    maps_out: usize,
    k: (usize, usize, usize),
    pool: (usize, usize, usize),
) -> BlockSpec {
    let kshape = KernelShape {
        maps_out,
        maps_in: in_shape.maps,
        kh: k.0,
        kw: k.1,
        kd: k.2,
    };
    let kernel = *cursor..*cursor + kshape.len();
    *cursor = kernel.end;
    let bias = *cursor..*cursor + maps_out;
    *cursor = bias.end;
    let conv_shape = Shape { maps: maps_out, ..in_shape };
    BlockSpec {
        in_shape,
        conv_shape,
        out_shape: conv_shape.pooled(pool),
        kshape,
        pool,
        kernel,
        bias,
    }
}

fn fc(cursor: &mut usize, n_in: usize, n_out: usize) -> FcSpec {
    let w = *cursor..*cursor + n_in * n_out;
    *cursor = w.end;
    let b = *cursor..*cursor + n_out;
    *cursor = b.end;
    FcSpec { n_in, n_out, w, b }
}

impl NetworkLayout {
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cursor = 0usize;
        let mut scales = Vec::with_capacity(cfg.scales.len());
        for &n in &cfg.scales {
            let time = (1usize << n) - 1;
            // shallow time extents at the first two scales keep the kernels
            // and pools two-dimensional there
            let (kd, pd) = if n <= 2 { (1, 1) } else { (3, 2) };
            let mut shape = Shape {
                maps: 1,
                h: cfg.channels,
                w: cfg.kept_bins,
                d: time,
            };
            let mut blocks = Vec::with_capacity(3);
            for b in 0..3 {
                let spec = block(
                    &mut cursor,
                    shape,
                    cfg.eff_conv3d_maps(b),
                    (3, 3, kd),
                    (2, 2, pd),
                );
                shape = spec.out_shape;
                blocks.push(spec);
            }
            let flat = shape.len();
            let fc_spec = fc(&mut cursor, flat, cfg.fc_width);
            scales.push(ScaleSpec {
                blocks,
                flat,
                fc: fc_spec,
            });
        }

        let mut shape = Shape {
            maps: 1,
            h: cfg.scales.len(),
            w: cfg.fc_width,
            d: 1,
        };
        let mut fusion = Vec::with_capacity(3);
        for b in 0..3 {
            let spec = block(&mut cursor, shape, cfg.eff_conv2d_maps(b), (5, 5, 1), (2, 2, 1));
            shape = spec.out_shape;
            fusion.push(spec);
        }
        let fusion_flat = shape.len();

        let mut head = Vec::with_capacity(cfg.head_widths.len());
        let mut width = fusion_flat;
        for &w in &cfg.head_widths {
            head.push(fc(&mut cursor, width, w));
            width = w;
        }
        let output = fc(&mut cursor, width, 2);
        let total = cursor;

        Ok(NetworkLayout {
            scales,
            fusion,
            fusion_flat,
            head,
            output,
            total,
        })
    }
}

struct BlockCache {
    conv_pre: Vec<f64>,
    relu_out: Vec<f64>,
    pool_out: Vec<f64>,
    argmax: Vec<usize>,
}

pub(crate) struct Cache {
    scale_inputs: Vec<Vec<f64>>,
    scale_blocks: Vec<Vec<BlockCache>>,
    scale_fc_pre: Vec<Vec<f64>>,
    concat: Vec<f64>,
    fusion_blocks: Vec<BlockCache>,
    head_pre: Vec<Vec<f64>>,
    head_out: Vec<Vec<f64>>,
    pub probs: [f64; 2],
}

fn run_block(params: &[f64], spec: &BlockSpec, input: &[f64]) -> BlockCache {
    let mut conv_pre = vec![0.0; spec.conv_shape.len()];
    conv3d_forward(
        input,
        spec.in_shape,
        &params[spec.kernel.clone()],
        spec.kshape,
        &params[spec.bias.clone()],
        &mut conv_pre,
    );
    let mut relu_out = vec![0.0; conv_pre.len()];
    relu_forward(&conv_pre, &mut relu_out);
    let mut pool_out = vec![0.0; spec.out_shape.len()];
    let mut argmax = vec![0usize; spec.out_shape.len()];
    maxpool_forward(&relu_out, spec.conv_shape, spec.pool, &mut pool_out, &mut argmax);
    BlockCache {
        conv_pre,
        relu_out,
        pool_out,
        argmax,
    }
}

/// Backpropagates through one conv block; returns the gradient w.r.t. the
/// block input.
fn back_block(
    params: &[f64],
    grads: &mut [f64],
    spec: &BlockSpec,
    cache: &BlockCache,
    input: &[f64],
    grad_out: &[f64],
) -> Vec<f64> {
    let mut grad_relu = vec![0.0; cache.relu_out.len()];
    maxpool_backward(&cache.argmax, grad_out, &mut grad_relu);
    let mut grad_conv = vec![0.0; cache.conv_pre.len()];
    relu_backward(&cache.conv_pre, &grad_relu, &mut grad_conv);
    let mut grad_input = vec![0.0; spec.in_shape.len()];
    let mut grad_kernel = vec![0.0; spec.kshape.len()];
    let mut grad_bias = vec![0.0; spec.kshape.maps_out];
    conv3d_backward(
        input,
        spec.in_shape,
        &params[spec.kernel.clone()],
        spec.kshape,
        &grad_conv,
        &mut grad_input,
        &mut grad_kernel,
        &mut grad_bias,
    );
    grads[spec.kernel.clone()].copy_from_slice(&grad_kernel);
    grads[spec.bias.clone()].copy_from_slice(&grad_bias);
    grad_input
}

/// Checks that the feature tensor matches the layout the config expects.
pub(crate) fn check_input(cfg: &ModelConfig, input: &MultiscaleSpectrogram) -> Result<()> {
    if input.scales.len() != cfg.scales.len() {
        return Err(Error::ShapeMismatch(format!(
            "feature has {} scales, model expects {}",
            input.scales.len(),
            cfg.scales.len()
        )));
    }
    for (s, &n) in input.scales.iter().zip(&cfg.scales) {
        let want_d = (1usize << n) - 1;
        if s.scale != n || s.channels != cfg.channels || s.bins != cfg.kept_bins || s.windows != want_d
        {
            return Err(Error::ShapeMismatch(format!(
                "scale {} tensor is {}x{}x{}, model expects {}x{}x{} at scale {}",
                s.scale, s.channels, s.bins, s.windows, cfg.channels, cfg.kept_bins, want_d, n
            )));
        }
    }
    Ok(())
}

pub(crate) fn forward_cached(
    layout: &NetworkLayout,
    params: &[f64],
    input: &MultiscaleSpectrogram,
) -> Cache {
    let mut scale_inputs = Vec::with_capacity(layout.scales.len());
    let mut scale_blocks = Vec::with_capacity(layout.scales.len());
    let mut scale_fc_pre = Vec::with_capacity(layout.scales.len());
    let mut concat = Vec::new();

    for (si, sc) in layout.scales.iter().enumerate() {
        // (channel, bin, window) storage order coincides with the
        // single-map (h, w, d) tensor order
        let x0: Vec<f64> = input.scales[si].values().to_vec();
        let mut blocks = Vec::with_capacity(3);
        let mut current = x0.clone();
        for spec in &sc.blocks {
            let cache = run_block(params, spec, &current);
            current = cache.pool_out.clone();
            blocks.push(cache);
        }
        let flat = current;
        debug_assert_eq!(flat.len(), sc.flat);
        let mut fc_pre = vec![0.0; sc.fc.n_out];
        fc_forward(&flat, &params[sc.fc.w.clone()], &params[sc.fc.b.clone()], &mut fc_pre);
        let mut fc_out = vec![0.0; sc.fc.n_out];
        relu_forward(&fc_pre, &mut fc_out);
        concat.extend_from_slice(&fc_out);

        scale_inputs.push(x0);
        scale_blocks.push(blocks);
        scale_fc_pre.push(fc_pre);
    }

    let mut fusion_blocks = Vec::with_capacity(3);
    let mut current = concat.clone();
    for spec in &layout.fusion {
        let cache = run_block(params, spec, &current);
        current = cache.pool_out.clone();
        fusion_blocks.push(cache);
    }

    debug_assert_eq!(current.len(), layout.fusion_flat);
    let mut head_pre = Vec::with_capacity(layout.head.len());
    let mut head_out = Vec::with_capacity(layout.head.len());
    for spec in &layout.head {
        let mut pre = vec![0.0; spec.n_out];
        fc_forward(&current, &params[spec.w.clone()], &params[spec.b.clone()], &mut pre);
        let mut out = vec![0.0; spec.n_out];
        relu_forward(&pre, &mut out);
        current = out.clone();
        head_pre.push(pre);
        head_out.push(out);
    }
    let mut z = vec![0.0; 2];
    fc_forward(
        &current,
        &params[layout.output.w.clone()],
        &params[layout.output.b.clone()],
        &mut z,
    );
    let probs = [sigmoid(z[0]), sigmoid(z[1])];
    Cache {
        scale_inputs,
        scale_blocks,
        scale_fc_pre,
        concat,
        fusion_blocks,
        head_pre,
        head_out,
        probs,
    }
}

/// Binary cross entropy summed over both output nodes, predictions clamped
/// to `[LOSS_EPS, 1 - LOSS_EPS]`.
pub(crate) fn bce_loss(probs: [f64; 2], label: &SoftLabel) -> f64 {
    let targets = [label.p_interictal, label.p_ictal];
    probs
        .iter()
        .zip(&targets)
        .map(|(&p, &y)| {
            let p = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

pub(crate) fn backward_from_cache(
    layout: &NetworkLayout,
    params: &[f64],
    cache: &Cache,
    label: &SoftLabel,
) -> (f64, Vec<f64>) {
    let loss = bce_loss(cache.probs, label);
    let mut grads = vec![0.0; layout.total];

    // d loss / d z for sigmoid + clamped BCE: (p - y) inside the clamp,
    // zero where the clamp saturates.
    let targets = [label.p_interictal, label.p_ictal];
    let mut grad_z = [0.0; 2];
    for j in 0..2 {
        let p = cache.probs[j];
        grad_z[j] = if p <= LOSS_EPS || p >= 1.0 - LOSS_EPS {
            0.0
        } else {
            p - targets[j]
        };
    }

    // output layer
    let last_hidden: &[f64] = if let Some(out) = cache.head_out.last() {
        out
    } else {
        &cache.fusion_blocks.last().unwrap().pool_out
    };
    let mut grad_hidden = vec![0.0; layout.output.n_in];
    {
        let mut gw = vec![0.0; layout.output.w.len()];
        let mut gb = vec![0.0; layout.output.b.len()];
        fc_backward(
            last_hidden,
            &params[layout.output.w.clone()],
            &grad_z,
            &mut grad_hidden,
            &mut gw,
            &mut gb,
        );
        grads[layout.output.w.clone()].copy_from_slice(&gw);
        grads[layout.output.b.clone()].copy_from_slice(&gb);
    }

    // head, in reverse
    for (hi, spec) in layout.head.iter().enumerate().rev() {
        let mut grad_pre = vec![0.0; spec.n_out];
        relu_backward(&cache.head_pre[hi], &grad_hidden, &mut grad_pre);
        let input: &[f64] = if hi == 0 {
            &cache.fusion_blocks.last().unwrap().pool_out
        } else {
            &cache.head_out[hi - 1]
        };
        let mut gi = vec![0.0; spec.n_in];
        let mut gw = vec![0.0; spec.w.len()];
        let mut gb = vec![0.0; spec.b.len()];
        fc_backward(input, &params[spec.w.clone()], &grad_pre, &mut gi, &mut gw, &mut gb);
        grads[spec.w.clone()].copy_from_slice(&gw);
        grads[spec.b.clone()].copy_from_slice(&gb);
        grad_hidden = gi;
    }

    // fusion stack, in reverse
    let mut grad = grad_hidden;
    for (bi, spec) in layout.fusion.iter().enumerate().rev() {
        let input: &[f64] = if bi == 0 {
            &cache.concat
        } else {
            &cache.fusion_blocks[bi - 1].pool_out
        };
        grad = back_block(params, &mut grads, spec, &cache.fusion_blocks[bi], input, &grad);
    }

    // split the concatenation gradient back to the per-scale FCs
    let mut offset = 0;
    for (si, sc) in layout.scales.iter().enumerate() {
        let grad_fc_out = &grad[offset..offset + sc.fc.n_out];
        offset += sc.fc.n_out;

        let mut grad_pre = vec![0.0; sc.fc.n_out];
        relu_backward(&cache.scale_fc_pre[si], grad_fc_out, &mut grad_pre);
        let flat_input = &cache.scale_blocks[si].last().unwrap().pool_out;
        let mut gi = vec![0.0; sc.fc.n_in];
        let mut gw = vec![0.0; sc.fc.w.len()];
        let mut gb = vec![0.0; sc.fc.b.len()];
        fc_backward(flat_input, &params[sc.fc.w.clone()], &grad_pre, &mut gi, &mut gw, &mut gb);
        grads[sc.fc.w.clone()].copy_from_slice(&gw);
        grads[sc.fc.b.clone()].copy_from_slice(&gb);

        let mut g = gi;
        for (bi, spec) in sc.blocks.iter().enumerate().rev() {
            let input: &[f64] = if bi == 0 {
                &cache.scale_inputs[si]
            } else {
                &cache.scale_blocks[si][bi - 1].pool_out
            };
            g = back_block(params, &mut grads, spec, &cache.scale_blocks[si][bi], input, &g);
        }
        // gradient w.r.t. the feature tensor is discarded
    }

    (loss, grads)
}

pub(crate) fn pair_from_probs(probs: [f64; 2]) -> ProbabilityPair {
    ProbabilityPair {
        p_hat_interictal: probs[0],
        p_hat_ictal: probs[1],
    }
}

/// Distance to the nearest activation-pattern change: the smallest ReLU
/// pre-activation magnitude, live max-pool decision gap, or headroom to the
/// loss clamp. The gradient is constant as a function of any parameter
/// perturbation small enough (relative to its sensitivity) to stay inside
/// this margin, which is what makes finite-difference probes meaningful.
pub(crate) fn activation_margin(layout: &NetworkLayout, cache: &Cache) -> f64 {
    let mut margin = f64::INFINITY;

    let mut scan_relu = |pre: &[f64]| {
        for &z in pre {
            margin = margin.min(z.abs());
        }
    };
    for blocks in &cache.scale_blocks {
        for b in blocks {
            scan_relu(&b.conv_pre);
        }
    }
    for pre in &cache.scale_fc_pre {
        scan_relu(pre);
    }
    for b in &cache.fusion_blocks {
        scan_relu(&b.conv_pre);
    }
    for pre in &cache.head_pre {
        scan_relu(pre);
    }

    // pool decision gaps: how far the runner-up is from taking over
    let mut scan_pool = |spec: &BlockSpec, b: &BlockCache| {
        let s = spec.conv_shape;
        let os = spec.out_shape;
        let pool = spec.pool;
        for m in 0..os.maps {
            for y in 0..os.h {
                for x in 0..os.w {
                    for z in 0..os.d {
                        let mut top = f64::NEG_INFINITY;
                        let mut second = f64::NEG_INFINITY;
                        let mut count = 0;
                        for dy in 0..pool.0.min(s.h - y * pool.0) {
                            for dx in 0..pool.1.min(s.w - x * pool.1) {
                                for dz in 0..pool.2.min(s.d - z * pool.2) {
                                    let v = b.relu_out
                                        [s.idx(m, y * pool.0 + dy, x * pool.1 + dx, z * pool.2 + dz)];
                                    if v > top {
                                        second = top;
                                        top = v;
                                    } else if v > second {
                                        second = v;
                                    }
                                    count += 1;
                                }
                            }
                        }
                        // all-dead windows stay stable as long as the ReLUs
                        // stay dead, which the ReLU margin already covers
                        if count >= 2 && top > 0.0 {
                            margin = margin.min(top - second);
                        }
                    }
                }
            }
        }
    };
    for (blocks, sc) in cache.scale_blocks.iter().zip(&layout.scales) {
        for (b, spec) in blocks.iter().zip(&sc.blocks) {
            scan_pool(spec, b);
        }
    }
    for (b, spec) in cache.fusion_blocks.iter().zip(&layout.fusion) {
        scan_pool(spec, b);
    }

    for &p in &cache.probs {
        margin = margin.min((p - LOSS_EPS).abs());
        margin = margin.min((1.0 - LOSS_EPS - p).abs());
    }
    margin
}
