//! Probability-pair labels for segments.
//!
//! Pure interictal and ictal segments keep one-hot labels; a segment whose
//! window straddles a seizure onset ("crossing" segment) is labeled with a
//! probability pair quantized to a 0.05 grid according to the fraction of the
//! window that is ictal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grid steps available to crossing labels (p = 0..19, i.e. ictal
/// probabilities 0.00, 0.05, ..., 0.95). The fully-ictal pair [0, 1] is
/// reserved for pure ictal segments.
pub const CROSSING_GRID_STEPS: u32 = 19;

/// Grid resolution of crossing labels.
pub const CROSSING_GRID_STEP: f64 = 0.05;

/// A probability-pair label `[p_interictal, p_ictal]` with `p_interictal +
/// p_ictal == 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    pub p_interictal: f64,
    pub p_ictal: f64,
}

impl SoftLabel {
    /// Pure interictal label `[1, 0]`.
    pub fn interictal() -> Self {
        SoftLabel {
            p_interictal: 1.0,
            p_ictal: 0.0,
        }
    }

    /// Pure ictal label `[0, 1]`.
    pub fn ictal() -> Self {
        SoftLabel {
            p_interictal: 0.0,
            p_ictal: 1.0,
        }
    }

    /// Label on the crossing grid: `p_ictal = 0.05 * grid_index`.
    pub fn from_grid_index(p: u32) -> Self {
        debug_assert!(p <= CROSSING_GRID_STEPS);
        let p_ictal = CROSSING_GRID_STEP * f64::from(p);
        SoftLabel {
            p_interictal: 1.0 - p_ictal,
            p_ictal,
        }
    }
}

/// Which seizure-related period a segment was extracted from.
///
/// `Crossing` carries the ictal fraction `f = (segment_end - t_onset) /
/// len_s` of the window, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodTag {
    Interictal,
    Ictal,
    Crossing { ictal_fraction: f64 },
    /// Post-ictal exclusion window; never labeled or trained on.
    Excluded,
}

impl PeriodTag {
    pub fn crossing(ictal_fraction: f64) -> Self {
        PeriodTag::Crossing {
            ictal_fraction: ictal_fraction.clamp(0.0, 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PeriodTag::Interictal => "interictal",
            PeriodTag::Ictal => "ictal",
            PeriodTag::Crossing { .. } => "crossing",
            PeriodTag::Excluded => "excluded",
        }
    }
}

/// Smallest grid label admitting the ictal fraction `f`, i.e. the least
/// `p` in `0..=19` with `f <= 0.05 p`; fractions above 0.95 cap at `p = 19`.
pub fn soft_label_for_fraction(f: f64) -> SoftLabel {
    let f = f.clamp(0.0, 1.0);
    for p in 0..=CROSSING_GRID_STEPS {
        if f <= CROSSING_GRID_STEP * f64::from(p) {
            return SoftLabel::from_grid_index(p);
        }
    }
    SoftLabel::from_grid_index(CROSSING_GRID_STEPS)
}

/// Assigns the training label for a tagged segment.
///
/// Errors on `Excluded` tags: post-ictal windows carry no label.
pub fn label_segment(tag: PeriodTag) -> Result<SoftLabel> {
    match tag {
        PeriodTag::Interictal => Ok(SoftLabel::interictal()),
        PeriodTag::Ictal => Ok(SoftLabel::ictal()),
        PeriodTag::Crossing { ictal_fraction } => Ok(soft_label_for_fraction(ictal_fraction)),
        PeriodTag::Excluded => Err(Error::ExcludedSegment),
    }
}

/// One line of the labeled-dataset manifest (JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub recording_id: String,
    pub start_s: f64,
    pub tag: String,
    /// Label value for labeled tags; `None` for excluded windows.
    pub p_ictal: Option<f64>,
}

impl SegmentRecord {
    pub fn new(recording_id: &str, start_s: f64, tag: PeriodTag) -> Self {
        let p_ictal = label_segment(tag).ok().map(|l| l.p_ictal);
        SegmentRecord {
            recording_id: recording_id.to_string(),
            start_s,
            tag: tag.name().to_string(),
            p_ictal,
        }
    }
}

/// Writes one JSON object per line.
pub fn write_manifest<W: std::io::Write>(mut w: W, records: &[SegmentRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines manifest; blank lines are skipped.
pub fn read_manifest<R: std::io::BufRead>(r: R) -> Result<Vec<SegmentRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
