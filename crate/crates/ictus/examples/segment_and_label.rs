//! Cut a recording into tagged windows and show how crossing windows pick up
//! soft labels on the 0.05 probability grid.
//!
//! ```bash
//! cargo run --release --example segment_and_label
//! ```

use ictus::labeling::{label_segment, PeriodTag};
use ictus::signal_io::{extract_segments, CrossingStride, InterictalStride, OverlapPolicy};
use ictus::synth::{generate, SynthConfig};

fn main() -> ictus::Result<()> {
    let rec = generate(&SynthConfig {
        seed: 7,
        channels: 2,
        rate_hz: 64.0,
        duration_s: 400.0,
        seizures: vec![(200.0, 40.0)],
        ..SynthConfig::default()
    })?;

    let policy = OverlapPolicy {
        interictal: InterictalStride::FullLength,
        crossing: CrossingStride::TwentyPercent,
        postictal_exclusion_s: 60.0,
    };
    let segments = extract_segments(&rec, 5.0, &policy)?;

    let mut counts = std::collections::BTreeMap::new();
    for (_, tag) in &segments {
        *counts.entry(tag.name()).or_insert(0usize) += 1;
    }
    println!("segment counts by period: {counts:?}");

    println!("\ncrossing windows (window end sweeps across the onset):");
    for (seg, tag) in &segments {
        if let PeriodTag::Crossing { ictal_fraction } = tag {
            let label = label_segment(*tag)?;
            println!(
                "  [{:6.1} s, {:6.1} s]  ictal fraction {:.2} -> [p_interictal {:.2}, p_ictal {:.2}]",
                seg.start_s(),
                seg.end_s(),
                ictal_fraction,
                label.p_interictal,
                label.p_ictal
            );
        }
    }

    // point-wise extraction produces one crossing window per sample
    let pointwise = OverlapPolicy {
        crossing: CrossingStride::PointWise,
        ..policy
    };
    let n_crossing = extract_segments(&rec, 5.0, &pointwise)?
        .iter()
        .filter(|(_, t)| matches!(t, PeriodTag::Crossing { .. }))
        .count();
    println!(
        "\npoint-wise policy: {n_crossing} crossing windows (= 5 s x {} Hz)",
        rec.rate_hz()
    );
    Ok(())
}
