//! Streaming epileptic-seizure onset detection via probabilistic prediction.
//!
//! Instead of classifying fixed windows as interictal/ictal, the pipeline
//! predicts a probability pair per window, soft-labels the "crossing" windows
//! that straddle a seizure onset, rectifies the predicted ictal probability
//! against its recent history, and raises an alarm once the accumulated
//! increase crosses a threshold — cutting detection latency below the window
//! length.
//!
//! The crate is organized along the pipeline:
//!
//! - [`signal_io`]: annotated recordings, on-disk format, segment extraction
//! - [`spectral`]: radix-2 FFT, multiscale STFT, frequency normalization
//! - [`labeling`]: probability-pair labels, crossing-grid quantization
//! - [`model`]: compact multiscale 3D-CNN with exact analytic gradients and a
//!   Nadam trainer
//! - [`detector`]: rectified weighting, accumulative alarm rule, streaming
//! - [`evaluation`]: event-based metrics and leave-one-seizure-out harness
//! - [`synth`]: deterministic synthetic recordings with ground truth
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod detector;
pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod model;
pub mod signal_io;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
