//! Dense and convolutional primitives with exact analytic gradients,
//! exposed so gradient-verification suites can probe each operation in
//! isolation.
//!
//! Tensors are flat `f64` slices. A feature volume has shape
//! `(maps, h, w, d)` indexed as `((m * h + y) * w + x) * d + z`; convolutions
//! use stride 1 and same-padding, max-pooling uses non-overlapping windows
//! with floor division (a dimension smaller than the pool window collapses
//! to 1 with the window clipped to the remaining extent).

/// Shape of a feature volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub maps: usize,
    pub h: usize,
    pub w: usize,
    pub d: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.maps * self.h * self.w * self.d
    }

    #[inline]
    pub fn idx(&self, m: usize, y: usize, x: usize, z: usize) -> usize {
        ((m * self.h + y) * self.w + x) * self.d + z
    }

    /// Output shape of a max-pool with the given window.
    pub fn pooled(&self, pool: (usize, usize, usize)) -> Shape {
        Shape {
            maps: self.maps,
            h: pool_dim(self.h, pool.0),
            w: pool_dim(self.w, pool.1),
            d: pool_dim(self.d, pool.2),
        }
    }
}

pub fn pool_dim(dim: usize, k: usize) -> usize {
    if dim < k {
        1
    } else {
        dim / k
    }
}

/// Convolution kernel shape `(maps_out, maps_in, kh, kw, kd)`, same-padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelShape {
    pub maps_out: usize,
    pub maps_in: usize,
    pub kh: usize,
    pub kw: usize,
    pub kd: usize,
}

impl KernelShape {
    pub fn len(&self) -> usize {
        self.maps_out * self.maps_in * self.kh * self.kw * self.kd
    }

    #[inline]
    fn idx(&self, mo: usize, mi: usize, dy: usize, dx: usize, dz: usize) -> usize {
        (((mo * self.maps_in + mi) * self.kh + dy) * self.kw + dx) * self.kd + dz
    }
}

/// Valid output range along one axis for a given kernel tap: indices where
/// `pos + tap - pad` stays inside `0..dim`.
#[inline]
fn tap_range(dim: usize, tap: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(tap);
    let hi = (dim + pad).saturating_sub(tap).min(dim);
    (lo, hi)
}

/// 3D convolution, stride 1, same-padding. `out` has shape
/// `(k.maps_out, s.h, s.w, s.d)`. Loops are ordered so the innermost pass is
/// a contiguous multiply-add along the depth axis with all border checks
/// hoisted.
pub fn conv3d_forward(
    input: &[f64],
    s: Shape,
    kernel: &[f64],
    k: KernelShape,
    bias: &[f64],
    out: &mut [f64],
) {
    debug_assert_eq!(input.len(), s.len());
    debug_assert_eq!(kernel.len(), k.len());
    debug_assert_eq!(bias.len(), k.maps_out);
    debug_assert_eq!(s.maps, k.maps_in);
    let (ph, pw, pd) = (k.kh / 2, k.kw / 2, k.kd / 2);
    let os = Shape { maps: k.maps_out, ..s };
    debug_assert_eq!(out.len(), os.len());

    let plane = s.h * s.w * s.d;
    for mo in 0..k.maps_out {
        out[mo * plane..(mo + 1) * plane].fill(bias[mo]);
    }
    for mo in 0..k.maps_out {
        for mi in 0..k.maps_in {
            for dy in 0..k.kh {
                let (y_lo, y_hi) = tap_range(s.h, dy, ph);
                for dx in 0..k.kw {
                    let (x_lo, x_hi) = tap_range(s.w, dx, pw);
                    for dz in 0..k.kd {
                        let (z_lo, z_hi) = tap_range(s.d, dz, pd);
                        if z_lo >= z_hi {
                            continue;
                        }
                        let w = kernel[k.idx(mo, mi, dy, dx, dz)];
                        for y in y_lo..y_hi {
                            let iy = y + dy - ph;
                            for x in x_lo..x_hi {
                                let ix = x + dx - pw;
                                let ib = s.idx(mi, iy, ix, 0) + dz;
                                let ob = os.idx(mo, y, x, 0);
                                // input index z + dz - pd for z in z_lo..z_hi
                                let irow = &input[ib + z_lo - pd..ib + z_hi - pd];
                                let orow = &mut out[ob + z_lo..ob + z_hi];
                                for (o, i) in orow.iter_mut().zip(irow) {
                                    *o += w * i;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of a same-padded 3D convolution. Accumulates nothing: the three
/// output buffers are fully overwritten.
pub fn conv3d_backward(
    input: &[f64],
    s: Shape,
    kernel: &[f64],
    k: KernelShape,
    grad_out: &[f64],
    grad_input: &mut [f64],
    grad_kernel: &mut [f64],
    grad_bias: &mut [f64],
) {
    let (ph, pw, pd) = (k.kh / 2, k.kw / 2, k.kd / 2);
    let os = Shape { maps: k.maps_out, ..s };
    grad_input.iter_mut().for_each(|v| *v = 0.0);
    grad_kernel.iter_mut().for_each(|v| *v = 0.0);
    grad_bias.iter_mut().for_each(|v| *v = 0.0);

    let plane = s.h * s.w * s.d;
    for mo in 0..k.maps_out {
        grad_bias[mo] = grad_out[mo * plane..(mo + 1) * plane].iter().sum();
    }
    for mo in 0..k.maps_out {
        for mi in 0..k.maps_in {
            for dy in 0..k.kh {
                let (y_lo, y_hi) = tap_range(s.h, dy, ph);
                for dx in 0..k.kw {
                    let (x_lo, x_hi) = tap_range(s.w, dx, pw);
                    for dz in 0..k.kd {
                        let (z_lo, z_hi) = tap_range(s.d, dz, pd);
                        if z_lo >= z_hi {
                            continue;
                        }
                        let ki = k.idx(mo, mi, dy, dx, dz);
                        let w = kernel[ki];
                        let mut acc = 0.0;
                        for y in y_lo..y_hi {
                            let iy = y + dy - ph;
                            for x in x_lo..x_hi {
                                let ix = x + dx - pw;
                                let ib = s.idx(mi, iy, ix, 0) + dz;
                                let ob = os.idx(mo, y, x, 0);
                                let grow = &grad_out[ob + z_lo..ob + z_hi];
                                let irow = &input[ib + z_lo - pd..ib + z_hi - pd];
                                let girow = &mut grad_input[ib + z_lo - pd..ib + z_hi - pd];
                                for ((g, i), gi) in grow.iter().zip(irow).zip(girow) {
                                    acc += g * i;
                                    *gi += g * w;
                                }
                            }
                        }
                        grad_kernel[ki] = acc;
                    }
                }
            }
        }
    }
}

/// Max-pool with argmax bookkeeping for the backward pass. Ties resolve to
/// the first element in scan order.
pub fn maxpool_forward(
    input: &[f64],
    s: Shape,
    pool: (usize, usize, usize),
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let os = s.pooled(pool);
    debug_assert_eq!(out.len(), os.len());
    debug_assert_eq!(argmax.len(), os.len());
    for m in 0..os.maps {
        for y in 0..os.h {
            for x in 0..os.w {
                for z in 0..os.d {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0usize;
                    for dy in 0..pool.0.min(s.h - y * pool.0) {
                        for dx in 0..pool.1.min(s.w - x * pool.1) {
                            for dz in 0..pool.2.min(s.d - z * pool.2) {
                                let i = s.idx(m, y * pool.0 + dy, x * pool.1 + dx, z * pool.2 + dz);
                                if input[i] > best {
                                    best = input[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    let o = os.idx(m, y, x, z);
                    out[o] = best;
                    argmax[o] = best_i;
                }
            }
        }
    }
}

/// Routes output gradients to the recorded argmax positions.
pub fn maxpool_backward(argmax: &[usize], grad_out: &[f64], grad_input: &mut [f64]) {
    grad_input.iter_mut().for_each(|v| *v = 0.0);
    for (o, &i) in argmax.iter().enumerate() {
        grad_input[i] += grad_out[o];
    }
}

/// `y = W x + b` with `W` stored row-major `(out, in)`.
pub fn fc_forward(input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let n_in = input.len();
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        let mut acc = bias[o];
        for (v, w) in input.iter().zip(row) {
            acc += v * w;
        }
        *out_v = acc;
    }
}

pub fn fc_backward(
    input: &[f64],
    weight: &[f64],
    grad_out: &[f64],
    grad_input: &mut [f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
) {
    let n_in = input.len();
    grad_input.iter_mut().for_each(|v| *v = 0.0);
    for (o, &g) in grad_out.iter().enumerate() {
        grad_bias[o] = g;
        let row = &weight[o * n_in..(o + 1) * n_in];
        let grow = &mut grad_weight[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            grad_input[i] += g * row[i];
            grow[i] = g * input[i];
        }
    }
}

pub fn relu_forward(input: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(input) {
        *o = if v > 0.0 { v } else { 0.0 };
    }
}

/// Backward through ReLU given the pre-activations.
pub fn relu_backward(pre: &[f64], grad_out: &[f64], grad_input: &mut [f64]) {
    for ((gi, &p), &g) in grad_input.iter_mut().zip(pre).zip(grad_out) {
        *gi = if p > 0.0 { g } else { 0.0 };
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
