use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, Grid, LabelImage, Shape};
use crate::stats::object_stats;

use super::lineage::{postprocess_lineage, TrackRecord};
use super::{
    build_graph, init_tracks, phase_correlation, solve_matching, update_roi, MatchResult, Track,
    TrackingConfig,
};
use super::{Roi, MIN_CROP_EXTENT};

/// Stateful frame-by-frame tracker.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackingConfig,
    shape: Shape,
    roi_extent: Vec<usize>,
    tracks: Vec<Track>,
    next_id: u32,
    motion_estimated: bool,
}

impl Tracker {
    /// Tracks for every object of `first_labels` (or the marked subset).
    pub fn new(
        cfg: TrackingConfig,
        first_labels: &LabelImage,
        marked: Option<&[u32]>,
    ) -> Result<Tracker> {
        cfg.validate()?;
        let shape = first_labels.shape();
        let tracks = init_tracks(first_labels, marked, &cfg)?;
        Ok(Tracker {
            roi_extent: cfg.roi_extent_for(shape.ndim())?,
            next_id: tracks.len() as u32 + 1,
            cfg,
            shape,
            tracks,
            motion_estimated: false,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    /// True once phase correlation ran on at least one ROI.
    pub fn motion_estimated(&self) -> bool {
        self.motion_estimated
    }

    /// Matches the tracks active at `t` to the objects of `labels_next`
    /// (frame `t + 1`). Without raw frames every shift is zero.
    pub fn step(
        &mut self,
        t: usize,
        raw_t: Option<&Grid<f64>>,
        raw_next: Option<&Grid<f64>>,
        labels_next: &LabelImage,
    ) -> Result<MatchResult> {
        ensure_same_shape(self.shape, labels_next.shape())?;
        let raw = match (raw_t, raw_next) {
            (Some(a), Some(b)) => {
                ensure_same_shape(self.shape, a.shape())?;
                ensure_same_shape(self.shape, b.shape())?;
                Some((a, b))
            }
            (None, None) => None,
            _ => {
                return Err(Error::InvalidParameter(
                    "raw frames must be given for both t and t+1".into(),
                ))
            }
        };

        let active: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].is_active(t, self.cfg.delta_t))
            .collect();

        let shape = self.shape;
        let min_peak = self.cfg.min_peak_significance;
        let shifts: Vec<Option<Option<Vec<i64>>>> = active
            .par_iter()
            .map(|&i| match raw {
                Some((a, b)) => roi_shift(&self.tracks[i].roi, a, b, shape, min_peak),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
        for (&i, shift) in active.iter().zip(shifts) {
            if shift.is_some() {
                self.motion_estimated = true;
            }
            if let Some(d) = shift.flatten() {
                let track = &mut self.tracks[i];
                track.roi = update_roi(&track.roi, &d, shape);
                for (p, v) in track.pending_shift.iter_mut().zip(&d) {
                    *p += *v as f64;
                }
            }
        }

        let candidates = object_stats(labels_next);
        let active_refs: Vec<&Track> = active.iter().map(|&i| &self.tracks[i]).collect();
        let graph = build_graph(&active_refs, &candidates, &self.cfg)?;
        let result = solve_matching(&graph);

        let by_id = |id: u32| {
            candidates
                .iter()
                .find(|c| c.id == id)
                .expect("candidate from this frame")
                .clone()
        };
        let track_index = |tracks: &[Track], id: u32| {
            tracks
                .iter()
                .position(|tr| tr.id == id)
                .expect("known track")
        };
        for &(track_id, cand) in &result.links {
            let i = track_index(&self.tracks, track_id);
            let stats = by_id(cand);
            let track = &mut self.tracks[i];
            let center: Vec<i64> = stats.median_position.iter().map(|&m| m as i64).collect();
            track.roi = Roi::new(&center, &self.roi_extent, shape.dims());
            track.pending_shift.iter_mut().for_each(|p| *p = 0.0);
            track.assignments.insert(t + 1, stats);
        }
        for &(track_id, a, b) in &result.splits {
            let i = track_index(&self.tracks, track_id);
            self.tracks[i].has_successors = true;
            for cand in [a, b] {
                let child = Track::new(
                    self.next_id,
                    track_id,
                    t + 1,
                    by_id(cand),
                    &self.roi_extent,
                    shape.dims(),
                );
                self.next_id += 1;
                self.tracks.push(child);
            }
        }
        if self.cfg.track_all {
            for &cand in &result.appeared {
                let track = Track::new(
                    self.next_id,
                    0,
                    t + 1,
                    by_id(cand),
                    &self.roi_extent,
                    shape.dims(),
                );
                self.next_id += 1;
                self.tracks.push(track);
            }
        }
        Ok(result)
    }
}

/// Phase-correlation shift of the ROI content between two frames. `None`
/// when the ROI is too small to correlate, `Some(None)` when the
/// correlation peak is not significant.
fn roi_shift(
    roi: &Roi,
    a: &Grid<f64>,
    b: &Grid<f64>,
    shape: Shape,
    min_peak: f64,
) -> Result<Option<Option<Vec<i64>>>> {
    if roi.extents.iter().any(|&e| e < MIN_CROP_EXTENT) {
        return Ok(None);
    }
    let pad = 3 - shape.ndim();
    let (mut lo, mut hi) = ([0usize; 3], [1usize; 3]);
    for (a, (l, h)) in roi.lower().into_iter().zip(roi.upper()).enumerate() {
        lo[a + pad] = l;
        hi[a + pad] = h;
    }
    let est = phase_correlation(&a.crop(lo, hi), &b.crop(lo, hi))?;
    Ok(Some((est.significance >= min_peak).then_some(est.shift)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    /// Label frames carrying track IDs.
    pub frames: Vec<LabelImage>,
    pub lineage: Vec<TrackRecord>,
    /// False when no raw frames were supplied and every shift was zero.
    pub motion_estimated: bool,
}

/// Tracks a whole sequence and post-processes the lineage.
pub fn track_sequence(
    labels: &[LabelImage],
    raw: Option<&[Grid<f64>]>,
    marked: Option<&[u32]>,
    cfg: &TrackingConfig,
) -> Result<TrackingResult> {
    let first = labels
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty label sequence".into()))?;
    if let Some(r) = raw {
        if r.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} raw frames for {} label frames",
                r.len(),
                labels.len()
            )));
        }
    }
    let mut tracker = Tracker::new(cfg.clone(), first, marked)?;
    for t in 0..labels.len() - 1 {
        let (a, b) = match raw {
            Some(r) => (Some(&r[t]), Some(&r[t + 1])),
            None => (None, None),
        };
        tracker.step(t, a, b, &labels[t + 1])?;
        log::debug!("t={} tracks={}", t + 1, tracker.tracks().len());
    }
    let motion_estimated = tracker.motion_estimated();
    let (frames, lineage) = postprocess_lineage(tracker.tracks(), labels)?;
    Ok(TrackingResult {
        frames,
        lineage,
        motion_estimated,
    })
}
