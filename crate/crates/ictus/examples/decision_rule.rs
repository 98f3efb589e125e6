//! The decision stage in isolation: rectified weighting smooths a noisy
//! probability stream, and the accumulative rule turns a rising ramp into an
//! alarm well before the probability itself saturates.
//!
//! ```bash
//! cargo run --release --example decision_rule
//! ```

use ictus::detector::{Detector, DetectorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() -> ictus::Result<()> {
    // Ideal ramp straight into the accumulator: rpip climbs 0.02 per step
    // (reaching 1.0 after the 5 s crossing window at r = 10). The rule fires
    // at 2.2 s, less than half the window length.
    let mut det = Detector::new(DetectorConfig::default())?;
    println!("ideal ramp into the accumulative rule:");
    for k in 1..=30i64 {
        let rpip = 0.02 * k as f64;
        let ap = det.accumulate(rpip);
        if k % 5 == 0 || ap >= 0.5 {
            println!("  t = {:4.1} s  rpip = {rpip:.2}  accumulated = {ap:.3}", k as f64 / 10.0);
        }
        if ap >= 0.5 {
            println!("  -> alarm {:.1} s after onset", k as f64 / 10.0);
            break;
        }
    }

    // Rectification: a noisy but drifting stream passes through three
    // trailing linear-regression extrapolations blended with the raw value.
    let mut det = Detector::new(DetectorConfig::default())?;
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    println!("\nnoisy drift, raw vs rectified:");
    for k in 1..=80i64 {
        let t = k as f64 / 10.0;
        let drift = (0.012 * k as f64).min(1.0);
        let pip = (drift + rng.gen_range(-0.25..0.25)).clamp(0.0, 1.0);
        let row = det.step_pip(t, pip);
        if k % 10 == 0 {
            println!(
                "  t = {t:4.1} s  pip = {:.3}  rpip = {:.3}  (true drift {drift:.3})",
                row.pip, row.rpip
            );
        }
        if row.alarm {
            println!("  -> alarm at t = {t:.1} s");
            break;
        }
    }
    Ok(())
}
