//! Annotated multichannel recordings: the canonical on-disk format and
//! period-aware segment extraction.
//!
//! A recording on disk is a JSON header plus a companion raw payload of
//! little-endian `f32` samples, frame-interleaved (sample 0 of every channel,
//! then sample 1, ...). In memory samples are held channel-major as `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::PeriodTag;

/// Expert-annotated seizure span, in seconds from the start of the recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeizureSpan {
    pub onset_s: f64,
    pub offset_s: f64,
}

impl SeizureSpan {
    pub fn new(onset_s: f64, offset_s: f64) -> Result<Self> {
        if !(onset_s >= 0.0 && onset_s < offset_s) {
            return Err(Error::InvalidRecording(format!(
                "seizure span must satisfy 0 <= onset < offset, got [{onset_s}, {offset_s}]"
            )));
        }
        Ok(SeizureSpan { onset_s, offset_s })
    }
}

/// Multichannel sampled signal with seizure annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channels: usize,
    rate_hz: f64,
    /// Channel-major: `samples[c * n_samples + t]`.
    samples: Vec<f64>,
    annotations: Vec<SeizureSpan>,
}

impl Recording {
    /// Builds a recording from per-channel sample vectors.
    ///
    /// All channels must have identical length; annotations must be sorted by
    /// onset, non-overlapping, and lie within the recording.
    pub fn new(rate_hz: f64, channels: Vec<Vec<f64>>, annotations: Vec<SeizureSpan>) -> Result<Self> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::InvalidRecording(format!(
                "sampling rate must be positive, got {rate_hz}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidRecording("recording needs at least one channel".into()));
        }
        let n = channels[0].len();
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidRecording("channels have unequal lengths".into()));
        }
        let n_channels = channels.len();
        let mut samples = Vec::with_capacity(n_channels * n);
        for ch in &channels {
            samples.extend_from_slice(ch);
        }
        let rec = Recording {
            channels: n_channels,
            rate_hz,
            samples,
            annotations,
        };
        rec.validate_annotations()?;
        Ok(rec)
    }

    fn validate_annotations(&self) -> Result<()> {
        let duration = self.duration_s();
        let mut prev_offset = f64::NEG_INFINITY;
        for span in &self.annotations {
            if !(span.onset_s >= 0.0 && span.onset_s < span.offset_s) {
                return Err(Error::InvalidRecording(format!(
                    "offset before onset: [{}, {}]",
                    span.onset_s, span.offset_s
                )));
            }
            if span.onset_s < prev_offset {
                return Err(Error::InvalidRecording(
                    "annotations overlap or are not sorted by onset".into(),
                ));
            }
            if span.offset_s > duration + 1e-9 {
                return Err(Error::InvalidRecording(format!(
                    "annotation [{}, {}] extends past recording end {duration}",
                    span.onset_s, span.offset_s
                )));
            }
            prev_offset = span.offset_s;
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.channels
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.rate_hz
    }

    pub fn annotations(&self) -> &[SeizureSpan] {
        &self.annotations
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.n_samples();
        &self.samples[c * n..(c + 1) * n]
    }

    /// Copies the half-open sample range `[start, start + len)` of every
    /// channel into a segment.
    pub fn slice_segment(&self, start_sample: usize, len_samples: usize) -> Result<Segment> {
        let n = self.n_samples();
        if start_sample + len_samples > n {
            return Err(Error::InvalidData(format!(
                "segment [{start_sample}, {}) crosses recording end {n}",
                start_sample + len_samples
            )));
        }
        let mut data = Vec::with_capacity(self.channels * len_samples);
        for c in 0..self.channels {
            let ch = self.channel(c);
            data.extend_from_slice(&ch[start_sample..start_sample + len_samples]);
        }
        Ok(Segment {
            channels: self.channels,
            rate_hz: self.rate_hz,
            start_s: start_sample as f64 / self.rate_hz,
            len_samples,
            data,
        })
    }
}

/// Fixed-length multichannel window of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    channels: usize,
    rate_hz: f64,
    start_s: f64,
    len_samples: usize,
    /// Channel-major: `data[c * len_samples + k]`.
    data: Vec<f64>,
}

impl Segment {
    pub fn from_channels(rate_hz: f64, start_s: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if channels.is_empty() || channels[0].is_empty() {
            return Err(Error::InvalidData("segment needs at least one channel and sample".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidData("segment channels have unequal lengths".into()));
        }
        let n_channels = channels.len();
        let mut data = Vec::with_capacity(n_channels * len);
        for ch in &channels {
            data.extend_from_slice(ch);
        }
        Ok(Segment {
            channels: n_channels,
            rate_hz,
            start_s,
            len_samples: len,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn len_samples(&self) -> usize {
        self.len_samples
    }

    pub fn len_s(&self) -> f64 {
        self.len_samples as f64 / self.rate_hz
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.len_s()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len_samples..(c + 1) * self.len_samples]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    channels: usize,
    rate_hz: f64,
    n_samples: usize,
    dtype: String,
    layout: String,
    annotations: Vec<HeaderAnnotation>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderAnnotation {
    onset_s: f64,
    offset_s: f64,
}

fn payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

/// Writes `name.json` (header) and `name.raw` (payload) next to each other.
///
/// Samples are stored as little-endian `f32`, frame-interleaved. Loading a
/// saved recording reproduces the stored `f32` values bit-exactly (lifted to
/// `f64` in memory).
pub fn save_recording(rec: &Recording, header_path: &Path) -> Result<()> {
    let header = Header {
        channels: rec.channels(),
        rate_hz: rec.rate_hz(),
        n_samples: rec.n_samples(),
        dtype: "f32le".into(),
        layout: "channel_interleaved".into(),
        annotations: rec
            .annotations()
            .iter()
            .map(|s| HeaderAnnotation {
                onset_s: s.onset_s,
                offset_s: s.offset_s,
            })
            .collect(),
    };
    let mut header_file = fs::File::create(header_path)?;
    serde_json::to_writer_pretty(&mut header_file, &header)?;
    header_file.write_all(b"\n")?;

    let n = rec.n_samples();
    let mut payload = Vec::with_capacity(n * rec.channels() * 4);
    for t in 0..n {
        for c in 0..rec.channels() {
            let v = rec.channel(c)[t] as f32;
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(payload_path(header_path), payload)?;
    Ok(())
}

/// Loads a recording from its header file and companion `.raw` payload.
pub fn load_recording(header_path: &Path) -> Result<Recording> {
    let header_text = fs::read_to_string(header_path)?;
    let header: Header = serde_json::from_str(&header_text)?;
    if header.dtype != "f32le" {
        return Err(Error::InvalidRecording(format!("unsupported dtype {}", header.dtype)));
    }
    if header.layout != "channel_interleaved" {
        return Err(Error::InvalidRecording(format!("unsupported layout {}", header.layout)));
    }

    let mut payload = Vec::new();
    fs::File::open(payload_path(header_path))?.read_to_end(&mut payload)?;
    let expected = header.n_samples * header.channels * 4;
    if payload.len() != expected {
        return Err(Error::InvalidRecording(format!(
            "payload length {} does not match header ({expected} bytes expected)",
            payload.len()
        )));
    }

    let mut channels = vec![Vec::with_capacity(header.n_samples); header.channels];
    for t in 0..header.n_samples {
        for (c, ch) in channels.iter_mut().enumerate() {
            let off = (t * header.channels + c) * 4;
            let bytes: [u8; 4] = payload[off..off + 4].try_into().unwrap();
            ch.push(f32::from_le_bytes(bytes) as f64);
        }
    }
    let annotations = header
        .annotations
        .iter()
        .map(|a| SeizureSpan::new(a.onset_s, a.offset_s))
        .collect::<Result<Vec<_>>>()?;
    Recording::new(header.rate_hz, channels, annotations)
}

/// Stride rule for interictal (and excluded) windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterictalStride {
    /// Stride = segment length (no overlap).
    FullLength,
    /// Stride = 20% of segment length (80% overlap).
    TwentyPercent,
}

/// Stride rule for crossing windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingStride {
    /// One new window per sample.
    PointWise,
    /// Stride = 20% of segment length.
    TwentyPercent,
}

/// Overlap policy for segment extraction. Ictal windows always use a 20%
/// stride (80% overlap); interictal and crossing strides are selectable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapPolicy {
    pub interictal: InterictalStride,
    pub crossing: CrossingStride,
    /// Post-ictal window emitted with tag `Excluded`; no interictal segment
    /// may start inside it.
    pub postictal_exclusion_s: f64,
}

impl Default for OverlapPolicy {
    /// Non-overlapping interictal windows, point-wise crossing extraction,
    /// 30 min post-ictal exclusion.
    fn default() -> Self {
        OverlapPolicy {
            interictal: InterictalStride::FullLength,
            crossing: CrossingStride::PointWise,
            postictal_exclusion_s: 1800.0,
        }
    }
}

impl OverlapPolicy {
    /// Dense policy: 80% overlap everywhere, short post-ictal exclusion.
    pub fn dense(postictal_exclusion_s: f64) -> Self {
        OverlapPolicy {
            interictal: InterictalStride::TwentyPercent,
            crossing: CrossingStride::TwentyPercent,
            postictal_exclusion_s,
        }
    }
}

fn seconds_to_samples(rate_hz: f64, s: f64) -> i64 {
    (s * rate_hz).round() as i64
}

/// Cuts a recording into tagged fixed-length windows.
///
/// Window starts are on the sample grid. Per annotation, crossing windows
/// end at `onset + k*stride` for ictal fractions in `(0, 1]`; pure ictal
/// windows start at `onset + i*stride_ictal` for `i >= 1` (the window that
/// starts exactly at onset is the final crossing window) and must end by the
/// seizure offset. Interictal windows lie entirely outside seizures and
/// their post-ictal exclusion zones; windows inside an exclusion zone are
/// emitted with tag `Excluded`.
pub fn extract_segments(
    rec: &Recording,
    len_s: f64,
    policy: &OverlapPolicy,
) -> Result<Vec<(Segment, PeriodTag)>> {
    let rate = rec.rate_hz();
    let len = seconds_to_samples(rate, len_s);
    if len < 2 {
        return Err(Error::InvalidConfig(format!(
            "segment length {len_s} s is below two samples at {rate} Hz"
        )));
    }
    if (len as f64 - len_s * rate).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "segment length {len_s} s is not an integer number of samples at {rate} Hz"
        )));
    }
    let n = rec.n_samples() as i64;
    if len > n {
        return Err(Error::InvalidData(format!(
            "segment length {len_s} s exceeds recording duration {} s",
            rec.duration_s()
        )));
    }

    let ictal_stride = (0.2 * len as f64).round().max(1.0) as i64;
    let inter_stride = match policy.interictal {
        InterictalStride::FullLength => len,
        InterictalStride::TwentyPercent => ictal_stride,
    };
    let crossing_stride = match policy.crossing {
        CrossingStride::PointWise => 1,
        CrossingStride::TwentyPercent => ictal_stride,
    };
    let excl = seconds_to_samples(rate, policy.postictal_exclusion_s).max(0);

    let onsets: Vec<i64> = rec.annotations().iter().map(|a| seconds_to_samples(rate, a.onset_s)).collect();
    let offsets: Vec<i64> = rec.annotations().iter().map(|a| seconds_to_samples(rate, a.offset_s)).collect();

    let mut out: Vec<(i64, PeriodTag)> = Vec::new();

    // Interictal intervals: before the first onset, between exclusion-zone
    // ends and the next onset, and after the last exclusion zone.
    let mut cursor = 0i64;
    for (i, &onset) in onsets.iter().enumerate() {
        push_strided(&mut out, cursor, onset, len, inter_stride, PeriodTag::Interictal);
        cursor = offsets[i] + excl;
    }
    push_strided(&mut out, cursor, n, len, inter_stride, PeriodTag::Interictal);

    for (i, (&onset, &offset)) in onsets.iter().zip(&offsets).enumerate() {
        // Crossing: window end sweeps (onset, onset + len].
        let mut k = 1i64;
        loop {
            let end = onset + k * crossing_stride;
            if end > onset + len {
                break;
            }
            let start = end - len;
            if start >= 0 && end <= n {
                let f = (end - onset) as f64 / len as f64;
                out.push((start, PeriodTag::crossing(f)));
            }
            k += 1;
        }

        // Pure ictal, 20% stride, starting one stride after onset.
        let mut i_w = 1i64;
        loop {
            let start = onset + i_w * ictal_stride;
            if start + len > offset.min(n) {
                break;
            }
            out.push((start, PeriodTag::Ictal));
            i_w += 1;
        }

        // Post-ictal exclusion zone, clipped so it never reaches the next
        // onset, emitted for bookkeeping.
        let zone_end = (offset + excl).min(n).min(if i + 1 < onsets.len() {
            onsets[i + 1]
        } else {
            n
        });
        push_strided(&mut out, offset, zone_end, len, inter_stride, PeriodTag::Excluded);
    }

    out.sort_by(|a, b| (a.0, tag_rank(&a.1)).cmp(&(b.0, tag_rank(&b.1))));

    out.into_iter()
        .map(|(start, tag)| Ok((rec.slice_segment(start as usize, len as usize)?, tag)))
        .collect()
}

fn tag_rank(tag: &PeriodTag) -> u8 {
    match tag {
        PeriodTag::Interictal => 0,
        PeriodTag::Crossing { .. } => 1,
        PeriodTag::Ictal => 2,
        PeriodTag::Excluded => 3,
    }
}

fn push_strided(
    out: &mut Vec<(i64, PeriodTag)>,
    interval_start: i64,
    interval_end: i64,
    len: i64,
    stride: i64,
    tag: PeriodTag,
) {
    let a = interval_start.max(0);
    let mut s = a;
    while s + len <= interval_end {
        out.push((s, tag));
        s += stride;
    }
}
