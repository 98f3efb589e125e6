//! Rectification lag floor: even an oracle PIP stream scores a nonzero
//! crossing error after rectified weighting, because the 5 s / 3 s / 1 s
//! extrapolations look back across the onset where history is all zeros.
//! The exact floor values below were computed once by this simulation and
//! are frozen as determinism regressions.

use ictus::detector::{Detector, DetectorConfig, TraceRow};
use ictus::evaluation::rpip_error;
use ictus::labeling::soft_label_for_fraction;
use ictus::signal_io::SeizureSpan;

fn floor_for(pip_fn: impl Fn(f64) -> f64) -> f64 {
    let onset = 100.0;
    let len_s = 5.0;
    let span = SeizureSpan { onset_s: onset, offset_s: onset + 40.0 };
    let mut det = Detector::new(DetectorConfig::default()).unwrap();
    let mut rows = Vec::new();
    let mut k = ((onset - 20.0) * 10.0) as i64;
    let k_end = ((onset + 40.0) * 10.0) as i64;
    while k <= k_end {
        let t = k as f64 / 10.0;
        let row = det.step_pip(t, pip_fn(t));
        rows.push(TraceRow { alarm: false, ..row });
        k += 1;
    }
    rpip_error(&rows, &span, len_s, 10.0).unwrap()
}

#[test]
fn oracle_pip_rectification_floor() {
    let onset = 100.0;
    let len_s = 5.0;
    let staircase = floor_for(|t| {
        if t <= onset {
            0.0
        } else if t <= onset + len_s {
            soft_label_for_fraction((t - onset) / len_s).p_ictal
        } else {
            1.0
        }
    });
    let ramp = floor_for(|t| ((t - onset) / len_s).clamp(0.0, 1.0));

    // frozen values from the first run of this simulation
    assert!((staircase - 15.880_932_582_688_247).abs() < 1e-9, "staircase floor {staircase}");
    assert!((ramp - 17.262_630_485_573_54).abs() < 1e-9, "ramp floor {ramp}");
}
