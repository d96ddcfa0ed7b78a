//! Writes a small synthetic sequence (raw frames, masks, lineage) to a
//! directory given on the command line, default `synth_out`.

use std::path::PathBuf;

use celldist::pipeline::run_synth;
use celldist::synth::SynthConfig;

fn main() -> celldist::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "synth_out".into()),
    );
    let cfg = SynthConfig {
        frames: 10,
        n_cells: 6,
        touching_pairs: 1,
        min_gap: 0.0,
        seed: 7,
        ..Default::default()
    };
    let objects = run_synth(&out, &cfg)?;
    println!(
        "{objects} objects over {} frames written to {}",
        cfg.frames,
        out.display()
    );
    Ok(())
}
