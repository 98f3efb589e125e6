//! Multiscale short-time Fourier features.
//!
//! Scale `n` splits a segment into `2^n - 1` half-overlapping windows of
//! length `WL = L / 2^(n-1)`. Each tapered window is reduced to `nfft`
//! points by modulo-`nfft` time aliasing (summing consecutive `nfft`-sample
//! blocks), which evaluates the exact length-`WL` DFT at the `nfft`
//! equispaced frequencies, then transformed with a radix-2 FFT. The first
//! `nfft/2` magnitudes form the frequency axis. `freq_norm` rescales each
//! (channel, time-step) frequency vector to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Segment;

pub mod fft {
    //! Iterative radix-2 complex FFT on split re/im buffers.

    use super::{Error, Result};

    /// In-place forward DFT (no normalization): `X[w] = sum_k x[k] e^{-2πiwk/n}`.
    pub fn forward(re: &mut [f64], im: &mut [f64]) -> Result<()> {
        let n = re.len();
        if n != im.len() {
            return Err(Error::ShapeMismatch("re/im buffers differ in length".into()));
        }
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::InvalidData(format!(
                "FFT length {n} is not a power of two >= 2"
            )));
        }

        // bit-reversal permutation
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }

        let mut len = 2;
        while len <= n {
            let ang = -2.0 * std::f64::consts::PI / len as f64;
            let (w_re, w_im) = (ang.cos(), ang.sin());
            for start in (0..n).step_by(len) {
                let mut cur_re = 1.0;
                let mut cur_im = 0.0;
                for k in 0..len / 2 {
                    let a = start + k;
                    let b = start + k + len / 2;
                    let t_re = re[b] * cur_re - im[b] * cur_im;
                    let t_im = re[b] * cur_im + im[b] * cur_re;
                    re[b] = re[a] - t_re;
                    im[b] = im[a] - t_im;
                    re[a] += t_re;
                    im[a] += t_im;
                    let next_re = cur_re * w_re - cur_im * w_im;
                    cur_im = cur_re * w_im + cur_im * w_re;
                    cur_re = next_re;
                }
            }
            len <<= 1;
        }
        Ok(())
    }
}

/// Magnitudes `|X[w]|` of the DFT of a real power-of-two-length signal,
/// bins `0 .. n/2 - 1`.
pub fn fft_magnitude(signal: &[f64]) -> Result<Vec<f64>> {
    let n = signal.len();
    let mut re = signal.to_vec();
    let mut im = vec![0.0; n];
    fft::forward(&mut re, &mut im)?;
    Ok((0..n / 2).map(|w| re[w].hypot(im[w])).collect())
}

/// Taper applied to each analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowFn {
    /// Periodic Hann taper, `w[k] = 0.5 (1 - cos(2πk / WL))`.
    Hann,
    Rectangular,
}

impl WindowFn {
    fn value(&self, k: usize, wl: usize) -> f64 {
        match self {
            WindowFn::Hann => 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / wl as f64).cos()),
            WindowFn::Rectangular => 1.0,
        }
    }
}

/// Multiscale STFT configuration. Window overlap is fixed at 50%; the number
/// of retained frequency bins is `nfft / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Scale indices, sorted ascending; scale `n` yields `2^n - 1` windows.
    pub scales: Vec<u32>,
    /// FFT size, a power of two.
    pub nfft: usize,
    pub window: WindowFn,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            scales: vec![1, 2, 3, 4, 5],
            nfft: 64,
            window: WindowFn::Hann,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidConfig("at least one scale is required".into()));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("scales must be strictly ascending".into()));
        }
        if self.scales[0] < 1 || *self.scales.last().unwrap() > 16 {
            return Err(Error::InvalidConfig("scales must lie in 1..=16".into()));
        }
        if !self.nfft.is_power_of_two() || self.nfft < 4 {
            return Err(Error::InvalidConfig(format!(
                "nfft must be a power of two >= 4, got {}",
                self.nfft
            )));
        }
        Ok(())
    }

    /// Retained frequency coefficients per window.
    pub fn kept_bins(&self) -> usize {
        self.nfft / 2
    }

    /// Windows along the time axis at scale `n`.
    pub fn windows_at_scale(n: u32) -> usize {
        (1usize << n) - 1
    }
}

/// Per-scale magnitude tensor, `channels x kept_bins x windows`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpectrogram {
    pub scale: u32,
    pub channels: usize,
    pub bins: usize,
    pub windows: usize,
    data: Vec<f64>,
}

impl ScaleSpectrogram {
    fn zeros(scale: u32, channels: usize, bins: usize, windows: usize) -> Self {
        ScaleSpectrogram {
            scale,
            channels,
            bins,
            windows,
            data: vec![0.0; channels * bins * windows],
        }
    }

    #[inline]
    fn idx(&self, c: usize, b: usize, w: usize) -> usize {
        (c * self.bins + b) * self.windows + w
    }

    #[inline]
    pub fn get(&self, c: usize, b: usize, w: usize) -> f64 {
        self.data[self.idx(c, b, w)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, b: usize, w: usize, v: f64) {
        let i = self.idx(c, b, w);
        self.data[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Magnitudes for every configured scale of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleSpectrogram {
    pub scales: Vec<ScaleSpectrogram>,
}

impl MultiscaleSpectrogram {
    pub fn scale(&self, n: u32) -> Option<&ScaleSpectrogram> {
        self.scales.iter().find(|s| s.scale == n)
    }
}

/// Computes the multiscale STFT of a segment (no normalization).
///
/// Channels shorter than required are zero-padded on the right so every
/// scale keeps its `2^n - 1` window count. Window lengths below two samples
/// are rejected.
pub fn multiscale_stft(seg: &Segment, cfg: &SpectralConfig) -> Result<MultiscaleSpectrogram> {
    cfg.validate()?;
    let l = seg.len_samples();
    if l < 2 {
        return Err(Error::InvalidData("segment shorter than two samples".into()));
    }

    let mut scales = Vec::with_capacity(cfg.scales.len());
    for &n in &cfg.scales {
        let windows = SpectralConfig::windows_at_scale(n);
        // Pad so the dyadic split is exact: L divisible by 2^n.
        let block = 1usize << n;
        let l_pad = l.div_ceil(block) * block;
        let wl = l_pad >> (n - 1);
        if wl < 2 {
            return Err(Error::InvalidData(format!(
                "window length {wl} at scale {n} is below two samples"
            )));
        }
        let hop = wl / 2;

        let mut spec = ScaleSpectrogram::zeros(n, seg.channels(), cfg.kept_bins(), windows);
        let taper: Vec<f64> = (0..wl).map(|k| cfg.window.value(k, wl)).collect();
        let mut frame = vec![0.0f64; cfg.nfft];
        for c in 0..seg.channels() {
            let x = seg.channel(c);
            for m in 0..windows {
                frame.iter_mut().for_each(|v| *v = 0.0);
                let start = m * hop;
                for k in 0..wl {
                    let sample = if start + k < l { x[start + k] } else { 0.0 };
                    frame[k % cfg.nfft] += taper[k] * sample;
                }
                let mags = fft_magnitude(&frame)?;
                for (b, &v) in mags.iter().enumerate() {
                    spec.set(c, b, m, v);
                }
            }
        }
        scales.push(spec);
    }
    Ok(MultiscaleSpectrogram { scales })
}

/// Min-max normalizes each (scale, channel, time-step) frequency vector to
/// `[0, 1]`; constant vectors map to all zeros.
pub fn freq_norm(spec: &MultiscaleSpectrogram) -> MultiscaleSpectrogram {
    let mut out = spec.clone();
    for s in &mut out.scales {
        for c in 0..s.channels {
            for w in 0..s.windows {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for b in 0..s.bins {
                    let v = s.get(c, b, w);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                let range = hi - lo;
                for b in 0..s.bins {
                    let v = if range == 0.0 {
                        0.0
                    } else {
                        (s.get(c, b, w) - lo) / range
                    };
                    s.set(c, b, w, v);
                }
            }
        }
    }
    out
}
