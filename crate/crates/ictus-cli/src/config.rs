//! Optional TOML configuration file. Values resolve as
//! flags > config file > built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub segmentation: SegmentationSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub channels: Option<usize>,
    pub rate_hz: Option<f64>,
    pub seizure_s: Option<f64>,
    pub postictal_s: Option<f64>,
    pub band_lo_hz: Option<f64>,
    pub band_hi_hz: Option<f64>,
    pub ramp_s: Option<f64>,
    pub gain: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub scales: Option<Vec<u32>>,
    pub nfft: Option<usize>,
    /// "hann" or "rectangular"
    pub window: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub conv3d_maps: Option<[usize; 3]>,
    pub conv2d_maps: Option<[usize; 3]>,
    pub fc_width: Option<usize>,
    pub head_widths: Option<Vec<usize>>,
    pub width_multiplier: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub balance: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub rate: Option<f64>,
    pub thr: Option<f64>,
    pub lambdas: Option<[f64; 4]>,
    pub lockout_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationSection {
    pub segment_s: Option<f64>,
    /// "full" (no overlap) or "dense" (80% overlap)
    pub interictal_stride: Option<String>,
    /// "pointwise" or "dense"
    pub crossing_stride: Option<String>,
    pub postictal_exclusion_s: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))
        }
    }
}
