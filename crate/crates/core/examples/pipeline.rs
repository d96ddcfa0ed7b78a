//! All stages end to end: synth, labelgen, segment, track and score.
//! Takes an optional output directory, default `pipeline_out`.

use std::path::PathBuf;

use celldist::config::PipelineConfig;
use celldist::pipeline::run_pipeline;

fn main() -> celldist::Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.output = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "pipeline_out".into()),
    );
    cfg.synth.frames = 20;
    cfg.synth.seed = 9;
    let report = run_pipeline(&cfg)?;
    if let Some(score) = report.score {
        print!("{score}");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
