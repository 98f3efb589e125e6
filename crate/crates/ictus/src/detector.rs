//! Real-time decision stage: rectified probability weighting over a PIP
//! history buffer, accumulative probability, and the alarm state machine.
//!
//! Every `1/r` seconds the detector receives the predictive ictal
//! probability (PIP) of the window ending now. Ordinary-least-squares lines
//! fitted to the previous 5 s, 3 s, and 1 s of PIPs are extrapolated to the
//! current time and blended with the raw PIP into the rectified PIP (RPIP).
//! The accumulative probability (AP) sums the strictly increasing RPIP steps
//! of the trailing 5 s window, scaled by `1/r`; crossing the threshold emits
//! an alarm and zeroes both buffers.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal_io::{Recording, Segment};

/// Estimates the predictive ictal probability of one segment.
pub trait PipEstimator {
    fn pip(&self, segment: &Segment) -> Result<f64>;
}

impl<F> PipEstimator for F
where
    F: Fn(&Segment) -> Result<f64>,
{
    fn pip(&self, segment: &Segment) -> Result<f64> {
        self(segment)
    }
}

/// Decision-stage parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Detection rate in steps per second.
    pub rate: f64,
    /// Alarm threshold on the accumulative probability.
    pub threshold: f64,
    /// Blend weights for `[LR5s, LR3s, LR1s, PIP_t]`; must sum to 1.
    pub lambdas: [f64; 4],
    /// History horizon in seconds for both buffers.
    pub horizon_s: f64,
    /// Optional alarm lockout; further alarms within this many seconds of the
    /// previous one are suppressed (0 disables).
    pub lockout_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            rate: 10.0,
            threshold: 0.5,
            lambdas: [0.2, 0.3, 0.3, 0.2],
            horizon_s: 5.0,
            lockout_s: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.lambdas.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "lambda weights must sum to 1, got {sum}"
            )));
        }
        let n = self.rate * self.horizon_s;
        if !(n > 0.0) || (n - n.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "rate * horizon must be a positive integer, got {n}"
            )));
        }
        if !(self.rate > 0.0) {
            return Err(Error::InvalidConfig("rate must be positive".into()));
        }
        Ok(())
    }

    /// Buffer capacity `r * horizon`.
    pub fn buffer_len(&self) -> usize {
        (self.rate * self.horizon_s).round() as usize
    }
}

/// Outcome of one detector step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionEvent {
    None,
    Alarm { t_s: f64 },
}

/// One row of a detector trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t_s: f64,
    pub pip: f64,
    pub rpip: f64,
    pub ap: f64,
    pub alarm: bool,
}

/// Sequential per-stream detector state.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    /// Raw PIP history, oldest first; always `buffer_len` entries.
    pip_buf: VecDeque<f64>,
    /// RPIP history including the current step, oldest first.
    rpip_buf: VecDeque<f64>,
    alarms: Vec<f64>,
    last_alarm_t: Option<f64>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.buffer_len();
        Ok(Detector {
            cfg,
            pip_buf: VecDeque::from(vec![0.0; n]),
            rpip_buf: VecDeque::from(vec![0.0; n]),
            alarms: Vec::new(),
            last_alarm_t: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn alarms(&self) -> &[f64] {
        &self.alarms
    }

    /// OLS extrapolation to the current time over the most recent `k`
    /// buffered PIPs. Fits run on time offsets relative to now (the i-th most
    /// recent entry sits at `-i/r`), so the prediction is the fitted
    /// intercept. Fewer than two points fall back to the window mean.
    fn extrapolate(&self, k: usize) -> f64 {
        let n = self.pip_buf.len();
        let k = k.min(n);
        if k == 0 {
            return 0.0;
        }
        let ys = self.pip_buf.iter().skip(n - k);
        if k < 2 {
            return ys.sum::<f64>() / k as f64;
        }
        let dt = 1.0 / self.cfg.rate;
        // offsets: -k/r, ..., -1/r  (oldest of the window first)
        let mean_x = -dt * (k as f64 + 1.0) / 2.0;
        let mean_y: f64 = ys.clone().sum::<f64>() / k as f64;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (j, &y) in ys.enumerate() {
            let x = -dt * (k - j) as f64;
            sxx += (x - mean_x) * (x - mean_x);
            sxy += (x - mean_x) * (y - mean_y);
        }
        if sxx == 0.0 {
            return mean_y;
        }
        let slope = sxy / sxx;
        mean_y + slope * (0.0 - mean_x)
    }

    /// Rectified PIP: blend of the three extrapolations and the raw PIP,
    /// clamped to `[0, 1]`. Pushes `pip_t` into the history buffer.
    pub fn rectify(&mut self, pip_t: f64) -> f64 {
        let r = self.cfg.rate;
        let lr5 = self.extrapolate((5.0 * r).round() as usize);
        let lr3 = self.extrapolate((3.0 * r).round() as usize);
        let lr1 = self.extrapolate(r.round() as usize);
        let [l1, l2, l3, l4] = self.cfg.lambdas;
        let rpip = (l1 * lr5 + l2 * lr3 + l3 * lr1 + l4 * pip_t).clamp(0.0, 1.0);
        self.pip_buf.pop_front();
        self.pip_buf.push_back(pip_t);
        rpip
    }

    /// Accumulative probability: pushes `rpip_t`, then sums the strictly
    /// increasing consecutive steps of the trailing window, scaled by `1/r`.
    pub fn accumulate(&mut self, rpip_t: f64) -> f64 {
        self.rpip_buf.pop_front();
        self.rpip_buf.push_back(rpip_t);
        let mut sum = 0.0;
        let mut prev: Option<f64> = None;
        for &v in self.rpip_buf.iter() {
            if let Some(p) = prev {
                if v > p {
                    sum += v;
                }
            }
            prev = Some(v);
        }
        sum / self.cfg.rate
    }

    /// Advances the detector by one raw PIP at time `t_s`. On alarm both
    /// buffers refresh to zeros.
    pub fn step_pip(&mut self, t_s: f64, pip: f64) -> TraceRow {
        let rpip = self.rectify(pip);
        let ap = self.accumulate(rpip);
        let locked = self
            .last_alarm_t
            .map(|t0| self.cfg.lockout_s > 0.0 && t_s - t0 < self.cfg.lockout_s)
            .unwrap_or(false);
        let alarm = ap >= self.cfg.threshold && !locked;
        if alarm {
            self.alarms.push(t_s);
            self.last_alarm_t = Some(t_s);
            for v in self.pip_buf.iter_mut() {
                *v = 0.0;
            }
            for v in self.rpip_buf.iter_mut() {
                *v = 0.0;
            }
        }
        TraceRow {
            t_s,
            pip,
            rpip,
            ap,
            alarm,
        }
    }

    /// Full decision step: model inference on the trailing window, then
    /// rectify, accumulate, and threshold.
    pub fn step(&mut self, segment: &Segment, model: &impl PipEstimator) -> Result<DecisionEvent> {
        let t_s = segment.end_s();
        let pip = model.pip(segment)?;
        let row = self.step_pip(t_s, pip);
        Ok(if row.alarm {
            DecisionEvent::Alarm { t_s }
        } else {
            DecisionEvent::None
        })
    }
}

/// Streams a recording span through the detector at rate `r`.
///
/// Steps happen at `t = k/r`, starting at the first step time with a full
/// trailing window inside `[span_start, span_end]` and ending at `span_end`.
/// The detector starts from zeroed buffers.
pub fn run_stream_span(
    rec: &Recording,
    model: &impl PipEstimator,
    cfg: &DetectorConfig,
    segment_len_s: f64,
    span_start_s: f64,
    span_end_s: f64,
) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let rate = rec.rate_hz();
    let len = (segment_len_s * rate).round() as usize;
    if len < 2 {
        return Err(Error::InvalidConfig("segment below two samples".into()));
    }
    let span_start = span_start_s.max(0.0);
    let span_end = span_end_s.min(rec.duration_s());
    let first_t = span_start + segment_len_s;
    if first_t > span_end + 1e-9 {
        return Err(Error::InvalidData(format!(
            "span [{span_start_s}, {span_end_s}] is shorter than one segment"
        )));
    }
    let mut det = Detector::new(cfg.clone())?;
    let mut rows = Vec::new();
    let mut k = (first_t * cfg.rate - 1e-9).ceil() as i64;
    loop {
        let t = k as f64 / cfg.rate;
        if t > span_end + 1e-9 {
            break;
        }
        let end_sample = ((t * rate) + 1e-9).floor() as usize;
        let end_sample = end_sample.min(rec.n_samples());
        let seg = rec.slice_segment(end_sample - len, len)?;
        let pip = model.pip(&seg)?;
        rows.push(det.step_pip(t, pip));
        k += 1;
    }
    Ok(rows)
}

/// Streams the entire recording.
pub fn run_stream(
    rec: &Recording,
    model: &impl PipEstimator,
    cfg: &DetectorConfig,
    segment_len_s: f64,
) -> Result<Vec<TraceRow>> {
    run_stream_span(rec, model, cfg, segment_len_s, 0.0, rec.duration_s())
}

/// Writes a trace as CSV with columns `t_s,pip,rpip,ap,alarm_flag`.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t_s,pip,rpip,ap,alarm_flag")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.t_s,
            r.pip,
            r.rpip,
            r.ap,
            if r.alarm { 1 } else { 0 }
        )?;
    }
    Ok(())
}

/// Reads a trace CSV produced by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidData(format!("trace line {i}: expected 5 fields")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidData(format!("trace line {i}: {e}")))
        };
        rows.push(TraceRow {
            t_s: parse(fields[0])?,
            pip: parse(fields[1])?,
            rpip: parse(fields[2])?,
            ap: parse(fields[3])?,
            alarm: fields[4].trim() == "1",
        });
    }
    Ok(rows)
}
