//! Scores a tracking result against its reference, then again after
//! deleting a few masks.

use celldist::eval::score_sequences;
use celldist::synth::{corrupt, generate, SynthConfig};
use celldist::track::{track_sequence, TrackingConfig};

fn main() -> celldist::Result<()> {
    let seq = generate(&SynthConfig {
        frames: 20,
        seed: 5,
        ..Default::default()
    })?;
    let cfg = TrackingConfig::default();

    let clean = track_sequence(&seq.labels, Some(&seq.raw), None, &cfg)?;
    println!(
        "-- clean masks\n{}",
        score_sequences(&seq.labels, &seq.lineage, &clean.frames, &clean.lineage)?
    );

    // Drop one object in three frames; delta_t = 3 bridges most such gaps.
    let drops: Vec<(usize, u32)> = [4, 9, 14]
        .iter()
        .filter_map(|&t| seq.stats[t].first().map(|s| (t, s.id)))
        .collect();
    let holes = corrupt(&seq, &drops)?;
    let gappy = track_sequence(&holes.labels, Some(&holes.raw), None, &cfg)?;
    println!(
        "-- {} masks removed\n{}",
        drops.len(),
        score_sequences(&seq.labels, &seq.lineage, &gappy.frames, &gappy.lineage)?
    );
    Ok(())
}
