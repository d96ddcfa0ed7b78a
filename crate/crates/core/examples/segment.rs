//! Watershed post-processing on ideal predictions of a synthetic frame:
//! the segmentation is scored against the labels it came from.

use celldist::eval::{det_simple, seg_score};
use celldist::labelgen::{make_representation_pair, LabelGenConfig};
use celldist::segment::{segment_frame, SegmentationConfig};
use celldist::synth::{generate, SynthConfig};

fn main() -> celldist::Result<()> {
    let seq = generate(&SynthConfig {
        frames: 1,
        n_cells: 16,
        min_gap: 0.0,
        touching_pairs: 4,
        seed: 3,
        ..Default::default()
    })?;
    let gt = &seq.labels[0];
    let pair = make_representation_pair(gt, &LabelGenConfig::default());
    let seg = segment_frame(&pair, &SegmentationConfig::default())?;
    println!("reference objects: {}", gt.label_ids().len());
    println!("segmented objects: {}", seg.label_ids().len());
    println!("seg = {:.4}", seg_score(gt, &seg)?);
    println!("det = {:.4}", det_simple(gt, &seg)?);
    Ok(())
}
