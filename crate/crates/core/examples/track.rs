//! Tracks a synthetic sequence with ground-truth masks and prints the
//! resulting lineage next to the reference one.

use celldist::synth::{generate, SynthConfig};
use celldist::track::{format_track_records, track_sequence, TrackingConfig};

fn main() -> celldist::Result<()> {
    let cfg = SynthConfig {
        frames: 25,
        n_cells: 8,
        division_probability: 0.05,
        max_divisions: 3,
        seed: 4,
        ..Default::default()
    };
    let seq = generate(&cfg)?;
    let result = track_sequence(
        &seq.labels,
        Some(&seq.raw),
        None,
        &TrackingConfig::default(),
    )?;
    println!(
        "reference ({} divisions)\n{}",
        seq.divisions,
        format_track_records(&seq.lineage)
    );
    println!(
        "tracked (motion estimated: {})\n{}",
        result.motion_estimated,
        format_track_records(&result.lineage)
    );
    Ok(())
}
