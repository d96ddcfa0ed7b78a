//! Stage runners over directories and the end-to-end pipeline.
//!
//! Directory layout under the output directory:
//!
//! ```text
//! gt/    tTTT.tif (raw)  maskTTT.tif  man_track.txt
//! maps/  cellTTT.tif  neighborTTT.tif
//! seg/   maskTTT.tif
//! res/   maskTTT.tif  res_track.txt  tracking.txt
//! score.txt
//! ```
//!
//! All inputs are checked before anything is written.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{PipelineConfig, Stage};
use crate::error::{Error, Result};
use crate::eval::{score_sequences, ScoreReport};
use crate::grid::LabelImage;
use crate::io::{
    frame_name, read_float_dir, read_label_dir, scan_frames, write_atomic, write_float_dir,
    write_label_dir, CELL_PREFIX, MASK_PREFIX, NEIGHBOR_PREFIX, RAW_PREFIX,
};
use crate::labelgen::{make_representation_pair, LabelGenConfig, RepresentationPair};
use crate::segment::{segment_frame, SegmentationConfig};
use crate::synth::{generate, SynthConfig};
use crate::track::{parse_track_file, track_sequence, write_track_file, TrackingConfig};

pub const GT_TRACK_FILE: &str = "man_track.txt";
pub const RES_TRACK_FILE: &str = "res_track.txt";
pub const SCORE_FILE: &str = "score.txt";

/// Environment variable selecting the worker thread count.
pub const THREADS_ENV: &str = "CELLDIST_THREADS";

/// Configures the global thread pool from [`THREADS_ENV`] once. Later calls
/// and unset or invalid values leave rayon's default in place.
pub fn init_threads_from_env() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::MissingInput(_) => 3,
        Error::Io(_)
        | Error::Tiff { .. }
        | Error::TiffLayout { .. }
        | Error::TrackFile { .. }
        | Error::LabelOverflow(_) => 4,
        _ => 1,
    }
}

/// Exit status of a successful run that produced warnings.
pub const EXIT_EMPTY_RESULT: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub seconds: f64,
    /// Objects written (summed over frames) or tracks for the tracking stage.
    pub objects: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
    pub score: Option<ScoreReport>,
    /// Empty results worth flagging, e.g. frames without objects.
    pub warnings: Vec<String>,
}

fn count_objects(frames: &[LabelImage]) -> usize {
    frames.iter().map(|f| f.label_ids().len()).sum()
}

fn require_frames(dir: &Path, prefix: &str) -> Result<()> {
    scan_frames(dir, prefix).map(|_| ())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

/// Writes a synthetic sequence: raw frames, masks and `man_track.txt`.
pub fn run_synth(out: &Path, cfg: &SynthConfig) -> Result<usize> {
    let seq = generate(cfg)?;
    write_float_dir(out, RAW_PREFIX, &seq.raw)?;
    write_label_dir(out, MASK_PREFIX, &seq.labels)?;
    write_track_file(&out.join(GT_TRACK_FILE), &seq.lineage)?;
    Ok(count_objects(&seq.labels))
}

/// Cell and neighbor distance maps for every `maskTTT.tif` in `masks`.
pub fn run_labelgen(masks: &Path, out: &Path, cfg: &LabelGenConfig) -> Result<usize> {
    let labels = read_label_dir(masks, MASK_PREFIX)?;
    let pairs: Vec<RepresentationPair> = labels
        .par_iter()
        .map(|l| make_representation_pair(l, cfg))
        .collect();
    let (cells, neighbors): (Vec<_>, Vec<_>) =
        pairs.into_iter().map(|p| (p.cell, p.neighbor)).unzip();
    write_float_dir(out, CELL_PREFIX, &cells)?;
    write_float_dir(out, NEIGHBOR_PREFIX, &neighbors)?;
    Ok(count_objects(&labels))
}

fn read_predictions(maps: &Path) -> Result<Vec<RepresentationPair>> {
    let cells = read_float_dir(maps, CELL_PREFIX)?;
    let neighbors = read_float_dir(maps, NEIGHBOR_PREFIX)?;
    if cells.len() != neighbors.len() {
        return Err(Error::MissingInput(maps.join(frame_name(
            NEIGHBOR_PREFIX,
            cells.len().min(neighbors.len()),
        ))));
    }
    Ok(cells
        .into_iter()
        .zip(neighbors)
        .map(|(cell, neighbor)| RepresentationPair { cell, neighbor })
        .collect())
}

/// Label frames from prediction pairs; returns the frames without objects.
pub fn run_segment(
    maps: &Path,
    out: &Path,
    cfg: &SegmentationConfig,
) -> Result<(usize, Vec<usize>)> {
    cfg.validate()?;
    require_frames(maps, NEIGHBOR_PREFIX)?;
    let preds = read_predictions(maps)?;
    let labels: Vec<LabelImage> = preds
        .par_iter()
        .map(|p| segment_frame(p, cfg))
        .collect::<Result<_>>()?;
    write_label_dir(out, MASK_PREFIX, &labels)?;
    let empty = (0..labels.len())
        .filter(|&t| labels[t].label_ids().is_empty())
        .collect();
    Ok((count_objects(&labels), empty))
}

/// Tracks the masks in `masks`, using raw frames from `raw` when present.
/// Returns the track count and whether motion was estimated.
pub fn run_track(
    masks: &Path,
    raw: Option<&Path>,
    out: &Path,
    cfg: &TrackingConfig,
    marked: Option<&[u32]>,
) -> Result<(usize, bool)> {
    cfg.validate()?;
    let labels = read_label_dir(masks, MASK_PREFIX)?;
    let raw_frames = match raw {
        Some(dir) if dir.join(frame_name(RAW_PREFIX, 0)).is_file() => {
            Some(read_float_dir(dir, RAW_PREFIX)?)
        }
        _ => None,
    };
    let result = track_sequence(&labels, raw_frames.as_deref(), marked, cfg)?;
    write_label_dir(out, MASK_PREFIX, &result.frames)?;
    write_track_file(&out.join(RES_TRACK_FILE), &result.lineage)?;
    write_atomic(
        &out.join("tracking.txt"),
        format!("motion_estimated={}\n", result.motion_estimated).as_bytes(),
    )?;
    Ok((result.lineage.len(), result.motion_estimated))
}

/// Scores `res` (masks + `res_track.txt`) against `gt` (masks + `man_track.txt`).
pub fn run_score(gt: &Path, res: &Path) -> Result<ScoreReport> {
    require_file(&gt.join(GT_TRACK_FILE))?;
    require_file(&res.join(RES_TRACK_FILE))?;
    let ref_frames = read_label_dir(gt, MASK_PREFIX)?;
    let res_frames = read_label_dir(res, MASK_PREFIX)?;
    let ref_lineage = parse_track_file(&gt.join(GT_TRACK_FILE))?;
    let res_lineage = parse_track_file(&res.join(RES_TRACK_FILE))?;
    score_sequences(&ref_frames, &ref_lineage, &res_frames, &res_lineage)
}

/// Inputs a stage reads when its producer is not part of the run.
fn external_inputs(cfg: &PipelineConfig, stage: Stage) -> Vec<(PathBuf, Option<&'static str>)> {
    match stage {
        Stage::Synth => vec![],
        Stage::Labelgen => vec![(cfg.gt_dir(), Some(MASK_PREFIX))],
        Stage::Segment => vec![
            (cfg.maps_dir(), Some(CELL_PREFIX)),
            (cfg.maps_dir(), Some(NEIGHBOR_PREFIX)),
        ],
        Stage::Track => vec![(cfg.seg_dir(), Some(MASK_PREFIX))],
        Stage::Score => vec![
            (cfg.gt_dir(), Some(MASK_PREFIX)),
            (cfg.gt_dir().join(GT_TRACK_FILE), None),
            (cfg.res_dir(), Some(MASK_PREFIX)),
            (cfg.res_dir().join(RES_TRACK_FILE), None),
        ],
    }
}

fn producer(path: &Path, cfg: &PipelineConfig) -> Option<Stage> {
    let under = |dir: PathBuf| path.starts_with(&dir) && dir.starts_with(&cfg.output);
    if under(cfg.gt_dir()) {
        Some(Stage::Synth)
    } else if under(cfg.maps_dir()) {
        Some(Stage::Labelgen)
    } else if under(cfg.seg_dir()) {
        Some(Stage::Segment)
    } else if under(cfg.res_dir()) {
        Some(Stage::Track)
    } else {
        None
    }
}

/// Fails with `MissingInput` when some stage would read something that
/// neither exists nor is produced earlier in the run.
pub fn check_inputs(cfg: &PipelineConfig) -> Result<()> {
    for &stage in &cfg.stages {
        for (path, prefix) in external_inputs(cfg, stage) {
            if producer(&path, cfg).is_some_and(|p| p < stage && cfg.runs(p)) {
                continue;
            }
            match prefix {
                Some(prefix) => require_frames(&path, prefix)?,
                None => require_file(&path)?,
            }
        }
    }
    Ok(())
}

/// Runs the configured stages in order, printing timing per stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    check_inputs(cfg)?;
    let mut report = PipelineReport::default();
    for &stage in &cfg.stages {
        let start = Instant::now();
        let objects = match stage {
            Stage::Synth => run_synth(&cfg.gt_dir(), &cfg.synth)?,
            Stage::Labelgen => run_labelgen(&cfg.gt_dir(), &cfg.maps_dir(), &cfg.labelgen)?,
            Stage::Segment => {
                let (n, empty) = run_segment(&cfg.maps_dir(), &cfg.seg_dir(), &cfg.segmentation)?;
                report.warnings.extend(
                    empty
                        .iter()
                        .map(|t| format!("segmentation of frame {t} is empty")),
                );
                n
            }
            Stage::Track => {
                let raw = cfg.raw_dir();
                let (n, moved) = run_track(
                    &cfg.seg_dir(),
                    Some(&raw),
                    &cfg.res_dir(),
                    &cfg.tracking,
                    None,
                )?;
                if !moved {
                    println!("track: no raw frames, shifts set to zero");
                }
                if n == 0 {
                    report.warnings.push("tracking produced no tracks".into());
                }
                n
            }
            Stage::Score => {
                let score = run_score(&cfg.gt_dir(), &cfg.res_dir())?;
                write_atomic(&cfg.output.join(SCORE_FILE), score.to_string().as_bytes())?;
                report.score = Some(score);
                0
            }
        };
        let seconds = start.elapsed().as_secs_f64();
        println!(
            "stage {:<8} {:>8.3} s  {} objects",
            stage.name(),
            seconds,
            objects
        );
        report.stages.push(StageReport {
            stage,
            seconds,
            objects,
        });
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(report)
}
