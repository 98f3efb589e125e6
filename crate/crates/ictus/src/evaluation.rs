//! Event-based metrics and the leave-one-seizure-out cross-validation
//! harness.
//!
//! A seizure counts as detected when the first alarm after onset lands
//! inside the crossing window `[onset, onset + len]`; its latency is then
//! `t_alarm - onset`. Seizures detected only later during the ictal period
//! take the miss-detection convention latency equal to the segment length;
//! seizures never alarmed are reported separately and excluded from the
//! latency mean. The false detection rate counts alarms per interictal hour.

use serde::{Deserialize, Serialize};

use crate::detector::{run_stream_span, DetectorConfig, PipEstimator, TraceRow};
use crate::error::{Error, Result};
use crate::labeling::{label_segment, soft_label_for_fraction, PeriodTag};
use crate::model::TrainSample;
use crate::signal_io::{extract_segments, OverlapPolicy, Recording, SeizureSpan};
use crate::spectral::{freq_norm, multiscale_stft, SpectralConfig};

/// Latency outcome of one seizure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LatencyOutcome {
    /// Alarm inside the crossing window, latency in seconds after onset.
    Within(f64),
    /// Alarm only after the crossing window but during the seizure; charged
    /// the segment length by convention.
    MissConvention(f64),
    /// No alarm between onset and seizure end.
    Undetected,
}

impl LatencyOutcome {
    /// Latency value entering the aggregate mean (`None` for undetected).
    pub fn latency_s(&self) -> Option<f64> {
        match self {
            LatencyOutcome::Within(l) | LatencyOutcome::MissConvention(l) => Some(*l),
            LatencyOutcome::Undetected => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeizureScore {
    pub detected_in_crossing: bool,
    pub latency: LatencyOutcome,
}

/// Scores one seizure from a detector trace covering its crossing window.
pub fn score_seizure(trace: &[TraceRow], span: &SeizureSpan, len_s: f64) -> Result<SeizureScore> {
    let onset = span.onset_s;
    if trace.is_empty()
        || trace[0].t_s > onset + 1e-9
        || trace.last().unwrap().t_s + 1e-9 < (onset + len_s).min(span.offset_s)
    {
        return Err(Error::InvalidData(
            "trace does not cover the crossing window".into(),
        ));
    }
    let first_alarm = trace
        .iter()
        .filter(|r| r.alarm && r.t_s >= onset - 1e-9)
        .map(|r| r.t_s)
        .next();
    Ok(match first_alarm {
        Some(t) if t <= onset + len_s + 1e-9 => SeizureScore {
            detected_in_crossing: true,
            latency: LatencyOutcome::Within(t - onset),
        },
        Some(t) if t <= span.offset_s + 1e-9 => SeizureScore {
            detected_in_crossing: false,
            latency: LatencyOutcome::MissConvention(len_s),
        },
        _ => SeizureScore {
            detected_in_crossing: false,
            latency: LatencyOutcome::Undetected,
        },
    })
}

/// Mean absolute deviation (in percent) between the rectified ictal
/// probability and the crossing-grid label over the crossing window
/// `(onset, onset + len]`, sampled at the detector rate.
pub fn rpip_error(trace: &[TraceRow], span: &SeizureSpan, len_s: f64, rate: f64) -> Result<f64> {
    let onset = span.onset_s;
    let rows: Vec<&TraceRow> = trace
        .iter()
        .filter(|r| r.t_s > onset + 1e-9 && r.t_s <= onset + len_s + 1e-9)
        .collect();
    let expected = (len_s * rate).round() as usize;
    if rows.len() != expected {
        return Err(Error::InvalidData(format!(
            "crossing window has {} trace rows, expected {expected}",
            rows.len()
        )));
    }
    let mut sum = 0.0;
    for r in &rows {
        let f = (r.t_s - onset) / len_s;
        let truth = soft_label_for_fraction(f).p_ictal;
        sum += (truth - r.rpip).abs();
    }
    Ok(100.0 * sum / rows.len() as f64)
}

/// Alarms per hour over interictal traces. Each trace covers one interictal
/// interval; its duration is the stepped span.
pub fn fdr_from_traces(traces: &[Vec<TraceRow>], rate: f64) -> Result<f64> {
    let mut alarms = 0usize;
    let mut hours = 0.0;
    for t in traces {
        if t.is_empty() {
            continue;
        }
        alarms += t.iter().filter(|r| r.alarm).count();
        hours += (t.last().unwrap().t_s - t[0].t_s + 1.0 / rate) / 3600.0;
    }
    if hours <= 0.0 {
        return Err(Error::InvalidData("no interictal coverage".into()));
    }
    Ok(alarms as f64 / hours)
}

/// Plain alarms-per-hour ratio.
pub fn fdr(n_false: usize, interictal_hours: f64) -> Result<f64> {
    if interictal_hours <= 0.0 {
        return Err(Error::InvalidData("interictal hours must be positive".into()));
    }
    Ok(n_false as f64 / interictal_hours)
}

/// Per-fold (held-out seizure) results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub seizure_index: usize,
    pub onset_s: f64,
    pub detected_in_crossing: bool,
    pub latency: LatencyOutcome,
    pub rpip_error_pct: f64,
    pub n_false: usize,
    pub interictal_hours: f64,
    pub fdr_per_h: f64,
    pub best_epoch: usize,
}

/// Aggregate over folds, Table-style mean and standard deviation rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_detected_crossing: usize,
    pub n_total: usize,
    pub n_undetected: usize,
    pub rpip_err_mean: f64,
    pub rpip_err_sd: f64,
    pub latency_mean_s: f64,
    pub latency_sd_s: f64,
    pub fdr_mean: f64,
    pub fdr_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LosocvReport {
    pub patient: String,
    pub folds: Vec<FoldReport>,
    pub aggregate: AggregateReport,
}

/// Per-patient summary row: sensitivity as a detected/total string plus
/// mean and standard-deviation columns for each metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub patient: String,
    pub sensitivity: String,
    pub rpip_err_mean: f64,
    pub rpip_err_sd: f64,
    pub latency_mean_s: f64,
    pub latency_sd_s: f64,
    pub fdr_mean: f64,
    pub fdr_sd: f64,
}

impl LosocvReport {
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            patient: self.patient.clone(),
            sensitivity: format!(
                "{}/{}",
                self.aggregate.n_detected_crossing, self.aggregate.n_total
            ),
            rpip_err_mean: self.aggregate.rpip_err_mean,
            rpip_err_sd: self.aggregate.rpip_err_sd,
            latency_mean_s: self.aggregate.latency_mean_s,
            latency_sd_s: self.aggregate.latency_sd_s,
            fdr_mean: self.aggregate.fdr_mean,
            fdr_sd: self.aggregate.fdr_sd,
        }
    }
}

/// Sample mean and standard deviation (n-1 denominator, 0 for n < 2).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Everything the harness needs besides the recording and the trainer.
#[derive(Debug, Clone)]
pub struct LosocvConfig {
    pub patient: String,
    pub segment_len_s: f64,
    pub policy: OverlapPolicy,
    pub spectral: SpectralConfig,
    pub detector: DetectorConfig,
    /// Stream lead-in before each held-out onset, on top of the segment
    /// length, so the detector history is warm at the crossing window.
    pub lead_in_s: f64,
}

/// A trained estimator plus the epoch it was selected at.
pub struct TrainedFold<M> {
    pub estimator: M,
    pub best_epoch: usize,
}

/// Fold inputs handed to the trainer: samples from all seizures except the
/// held-out one (interictal shared across folds), and the held-out
/// seizure's crossing samples for validation.
pub struct FoldData<'a> {
    pub held_out: usize,
    pub train: Vec<&'a TrainSample>,
    pub validation: Vec<&'a TrainSample>,
}

/// Leave-one-seizure-out cross-validation over one patient recording.
///
/// For each annotated seizure: train on the remaining seizures (plus all
/// interictal samples), stream the held-out seizure's neighborhood for
/// detection latency and RPIP error, stream every interictal interval for
/// the false detection rate, then aggregate.
pub fn losocv<M, F>(rec: &Recording, cfg: &LosocvConfig, mut train_fn: F) -> Result<LosocvReport>
where
    M: PipEstimator,
    F: FnMut(&FoldData) -> Result<TrainedFold<M>>,
{
    let spans = rec.annotations().to_vec();
    if spans.len() < 2 {
        return Err(Error::InvalidData(format!(
            "leave-one-seizure-out needs at least 2 seizures, recording has {}",
            spans.len()
        )));
    }
    cfg.detector.validate()?;

    // Extract and featurize once; attribute seizure-bound segments to their
    // annotation.
    let segments = extract_segments(rec, cfg.segment_len_s, &cfg.policy)?;
    let mut samples: Vec<(TrainSample, Option<usize>)> = Vec::new();
    for (seg, tag) in &segments {
        if *tag == PeriodTag::Excluded {
            continue;
        }
        let features = freq_norm(&multiscale_stft(seg, &cfg.spectral)?);
        let label = label_segment(*tag)?;
        let owner = match tag {
            PeriodTag::Interictal => None,
            _ => Some(owning_annotation(&spans, seg.start_s(), seg.end_s())?),
        };
        samples.push((
            TrainSample {
                features,
                label,
                tag: *tag,
            },
            owner,
        ));
    }

    // Interictal intervals for FDR streams (same partition the extractor
    // uses).
    let interictal_intervals = interictal_intervals(rec, cfg.policy.postictal_exclusion_s);

    let mut folds = Vec::with_capacity(spans.len());
    for (k, span) in spans.iter().enumerate() {
        let fold_data = FoldData {
            held_out: k,
            train: samples
                .iter()
                .filter(|(_, owner)| owner.map(|o| o != k).unwrap_or(true))
                .map(|(s, _)| s)
                .collect(),
            validation: samples
                .iter()
                .filter(|(s, owner)| {
                    *owner == Some(k) && matches!(s.tag, PeriodTag::Crossing { .. })
                })
                .map(|(s, _)| s)
                .collect(),
        };
        let trained = train_fn(&fold_data)?;

        // Detection stream: lead-in before onset through seizure end.
        let stream_start = (span.onset_s - cfg.segment_len_s - cfg.lead_in_s).max(0.0);
        let trace = run_stream_span(
            rec,
            &trained.estimator,
            &cfg.detector,
            cfg.segment_len_s,
            stream_start,
            span.offset_s,
        )?;
        let score = score_seizure(&trace, span, cfg.segment_len_s)?;
        let rpip_err = rpip_error(&trace, span, cfg.segment_len_s, cfg.detector.rate)?;

        // FDR: full patient interictal record under this fold's model.
        let mut inter_traces = Vec::new();
        for &(a, b) in &interictal_intervals {
            if b - a > cfg.segment_len_s {
                inter_traces.push(run_stream_span(
                    rec,
                    &trained.estimator,
                    &cfg.detector,
                    cfg.segment_len_s,
                    a,
                    b,
                )?);
            }
        }
        let n_false: usize = inter_traces
            .iter()
            .map(|t| t.iter().filter(|r| r.alarm).count())
            .sum();
        let hours: f64 = inter_traces
            .iter()
            .filter(|t| !t.is_empty())
            .map(|t| (t.last().unwrap().t_s - t[0].t_s + 1.0 / cfg.detector.rate) / 3600.0)
            .sum();
        let fold_fdr = fdr(n_false, hours)?;

        folds.push(FoldReport {
            seizure_index: k,
            onset_s: span.onset_s,
            detected_in_crossing: score.detected_in_crossing,
            latency: score.latency,
            rpip_error_pct: rpip_err,
            n_false,
            interictal_hours: hours,
            fdr_per_h: fold_fdr,
            best_epoch: trained.best_epoch,
        });
    }

    let aggregate = aggregate_folds(&folds);
    Ok(LosocvReport {
        patient: cfg.patient.clone(),
        folds,
        aggregate,
    })
}

/// Maximal intervals outside every seizure and its post-ictal exclusion.
pub fn interictal_intervals(rec: &Recording, postictal_exclusion_s: f64) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    let mut cursor = 0.0f64;
    for span in rec.annotations() {
        if span.onset_s > cursor {
            intervals.push((cursor, span.onset_s));
        }
        cursor = cursor.max(span.offset_s + postictal_exclusion_s);
    }
    if rec.duration_s() > cursor {
        intervals.push((cursor, rec.duration_s()));
    }
    intervals
}

fn owning_annotation(spans: &[SeizureSpan], start_s: f64, end_s: f64) -> Result<usize> {
    for (i, span) in spans.iter().enumerate() {
        // crossing windows end inside (onset, onset+len]; ictal windows lie
        // inside [onset, offset]
        if end_s > span.onset_s - 1e-9 && start_s < span.offset_s + 1e-9 {
            return Ok(i);
        }
    }
    Err(Error::InvalidData(format!(
        "segment [{start_s}, {end_s}] belongs to no annotation"
    )))
}

pub fn aggregate_folds(folds: &[FoldReport]) -> AggregateReport {
    let latencies: Vec<f64> = folds.iter().filter_map(|f| f.latency.latency_s()).collect();
    let rpips: Vec<f64> = folds.iter().map(|f| f.rpip_error_pct).collect();
    let fdrs: Vec<f64> = folds.iter().map(|f| f.fdr_per_h).collect();
    let (latency_mean_s, latency_sd_s) = mean_sd(&latencies);
    let (rpip_err_mean, rpip_err_sd) = mean_sd(&rpips);
    let (fdr_mean, fdr_sd) = mean_sd(&fdrs);
    AggregateReport {
        n_detected_crossing: folds.iter().filter(|f| f.detected_in_crossing).count(),
        n_total: folds.len(),
        n_undetected: folds
            .iter()
            .filter(|f| f.latency == LatencyOutcome::Undetected)
            .count(),
        rpip_err_mean,
        rpip_err_sd,
        latency_mean_s,
        latency_sd_s,
        fdr_mean,
        fdr_sd,
    }
}
