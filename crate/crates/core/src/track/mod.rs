//! Tracking by detection.
//!
//! Each track carries a rectangular region of interest that is moved by a
//! phase-correlation estimate every frame. Active tracks (no successor, last
//! assignment at most `delta_t` frames ago) are matched to the objects of
//! the next frame through a coupled min-cost-flow graph with link, split,
//! appearance and disappearance edges, solved exactly.

mod graph;
mod lineage;
mod phase;
mod solver;
mod tracker;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LabelImage, Shape};
use crate::stats::{euclidean, object_stats, ObjectStats};

pub use graph::{build_graph, Edge, MatchGraph, NodeKind};
pub use lineage::{
    format_track_records, parse_track_file, parse_track_records, postprocess_lineage,
    write_track_file, TrackRecord,
};
pub use phase::{estimate_shift, phase_correlation, ShiftEstimate, MIN_CROP_EXTENT};
pub use solver::{solve_matching, MatchResult, Outcome};
pub use tracker::{track_sequence, Tracker, TrackingResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingConfig {
    /// Frames a track may go without an assignment and still be matched.
    pub delta_t: usize,
    /// Minimum size ratio of the two successors of a split.
    pub alpha: f64,
    /// Maximum combined successor size relative to the predecessor.
    pub beta: f64,
    /// Successor distance bound factor: `gamma = gamma_factor * V^(1/D)`.
    pub gamma_factor: f64,
    /// ROI extents in logical axis order. `None` selects 150×150 in 2D and
    /// 100³ in 3D.
    pub roi_extent: Option<Vec<usize>>,
    /// Cost of an invalid split relative to the disappearance cost.
    pub rho_multiplier: f64,
    /// Start new tracks for unmatched objects.
    pub track_all: bool,
    /// Shifts whose correlation peak is weaker than this (in standard
    /// deviations of the correlation surface) are discarded. Crops holding
    /// only noise, or a lone cell that divides, stay below ~5.
    pub min_peak_significance: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            delta_t: 3,
            alpha: 0.5,
            beta: 1.2,
            gamma_factor: 2.0,
            roi_extent: None,
            rho_multiplier: 10.0,
            track_all: true,
            min_peak_significance: 6.0,
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be at least 1, got {}",
                self.beta
            )));
        }
        if !(self.min_peak_significance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_peak_significance must be non-negative, got {}",
                self.min_peak_significance
            )));
        }
        if let Some(e) = &self.roi_extent {
            if e.contains(&0) {
                return Err(Error::InvalidParameter(
                    "roi_extent must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn roi_extent_for(&self, ndim: usize) -> Result<Vec<usize>> {
        match &self.roi_extent {
            Some(e) if e.len() == ndim => Ok(e.clone()),
            Some(e) => Err(Error::InvalidParameter(format!(
                "roi_extent {e:?} does not match {ndim}D data"
            ))),
            None => Ok(vec![if ndim == 3 { 100 } else { 150 }; ndim]),
        }
    }

    /// Length of the largest ROI edge.
    pub fn disappearance_cost(&self, ndim: usize) -> Result<f64> {
        Ok(self.roi_extent_for(ndim)?.into_iter().max().unwrap_or(0) as f64)
    }
}

/// Axis-aligned search window, always fully inside the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roi {
    pub center: Vec<i64>,
    pub extents: Vec<usize>,
}

impl Roi {
    /// ROI of `extents` (clamped to the image) centred as close to `center`
    /// as the image bounds allow.
    pub fn new(center: &[i64], extents: &[usize], image: &[usize]) -> Roi {
        let extents: Vec<usize> = extents.iter().zip(image).map(|(&e, &n)| e.min(n)).collect();
        let mut roi = Roi {
            center: center.to_vec(),
            extents,
        };
        roi.clamp(image);
        roi
    }

    fn clamp(&mut self, image: &[usize]) {
        for a in 0..self.center.len() {
            let half = (self.extents[a] / 2) as i64;
            let lo = half;
            let hi = image[a] as i64 - self.extents[a] as i64 + half;
            self.center[a] = self.center[a].clamp(lo, hi);
        }
    }

    /// Inclusive lower corner.
    pub fn lower(&self) -> Vec<usize> {
        self.center
            .iter()
            .zip(&self.extents)
            .map(|(&c, &e)| (c - (e / 2) as i64) as usize)
            .collect()
    }

    /// Exclusive upper corner.
    pub fn upper(&self) -> Vec<usize> {
        self.lower()
            .iter()
            .zip(&self.extents)
            .map(|(&l, &e)| l + e)
            .collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.lower()
            .iter()
            .zip(self.upper())
            .zip(point)
            .all(|((&lo, hi), &p)| p >= lo as f64 && p < hi as f64)
    }

    pub fn max_edge(&self) -> usize {
        self.extents.iter().copied().max().unwrap_or(0)
    }
}

/// One cell's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    /// 0 when the track has no parent.
    pub parent_id: u32,
    /// Assigned object per frame; `ObjectStats::id` is the object's ID in
    /// the input label frame.
    pub assignments: BTreeMap<usize, ObjectStats>,
    pub roi: Roi,
    /// Set once the track divided.
    pub has_successors: bool,
    /// Shift accumulated since the last assignment.
    pub pending_shift: Vec<f64>,
}

impl Track {
    pub fn new(
        id: u32,
        parent_id: u32,
        t: usize,
        stats: ObjectStats,
        roi_extent: &[usize],
        image: &[usize],
    ) -> Track {
        let center: Vec<i64> = stats.median_position.iter().map(|&m| m as i64).collect();
        let ndim = stats.ndim();
        let mut assignments = BTreeMap::new();
        assignments.insert(t, stats);
        Track {
            id,
            parent_id,
            assignments,
            roi: Roi::new(&center, roi_extent, image),
            has_successors: false,
            pending_shift: vec![0.0; ndim],
        }
    }

    pub fn last_assigned_time(&self) -> usize {
        *self
            .assignments
            .keys()
            .next_back()
            .expect("tracks are created with an assignment")
    }

    pub fn last_stats(&self) -> &ObjectStats {
        self.assignments
            .values()
            .next_back()
            .expect("tracks are created with an assignment")
    }

    pub fn first_time(&self) -> usize {
        *self
            .assignments
            .keys()
            .next()
            .expect("tracks are created with an assignment")
    }

    /// Active at `t`: no successor and last assignment within `{t - delta_t, ..., t}`.
    pub fn is_active(&self, t: usize, delta_t: usize) -> bool {
        let last = self.last_assigned_time();
        !self.has_successors && last <= t && t - last <= delta_t
    }

    /// Last assigned centroid moved by the accumulated shift.
    pub fn estimated_position(&self) -> Vec<f64> {
        self.last_stats()
            .centroid
            .iter()
            .zip(&self.pending_shift)
            .map(|(p, d)| p + d)
            .collect()
    }
}

/// One track per object of the first frame, or per marked object.
pub fn init_tracks(
    first_labels: &LabelImage,
    marked: Option<&[u32]>,
    cfg: &TrackingConfig,
) -> Result<Vec<Track>> {
    let shape = first_labels.shape();
    let roi = cfg.roi_extent_for(shape.ndim())?;
    let stats = object_stats(first_labels);
    let selected: Vec<ObjectStats> = match marked {
        None => stats,
        Some(ids) => {
            let mut out = Vec::new();
            for &id in ids {
                let s = stats
                    .iter()
                    .find(|s| s.id == id)
                    .ok_or(Error::MissingMarkedObject(id))?;
                out.push(s.clone());
            }
            out.sort_by_key(|s| s.id);
            out
        }
    };
    Ok(selected
        .into_iter()
        .enumerate()
        .map(|(i, s)| Track::new(i as u32 + 1, 0, 0, s, &roi, shape.dims()))
        .collect())
}

/// Moves the ROI centre by `shift` and clamps it back into the image.
pub fn update_roi(roi: &Roi, shift: &[i64], image: Shape) -> Roi {
    let mut out = roi.clone();
    for (c, d) in out.center.iter_mut().zip(shift) {
        *c += d;
    }
    out.clamp(image.dims());
    out
}

/// Distance between the track's estimated position and the candidate centroid.
pub fn matching_cost(track: &Track, candidate: &ObjectStats) -> f64 {
    euclidean(&track.estimated_position(), &candidate.centroid)
}

/// Whether `a` and `b` are plausible successors of an object of
/// `predecessor_size`: similar sizes, combined size close to the predecessor
/// and close to each other.
pub fn split_condition(
    predecessor_size: usize,
    a: &ObjectStats,
    b: &ObjectStats,
    cfg: &TrackingConfig,
) -> bool {
    let (small, large) = if a.size <= b.size { (a, b) } else { (b, a) };
    let v_s = predecessor_size as f64;
    let ndim = a.ndim() as f64;
    let gamma = cfg.gamma_factor * v_s.powf(1.0 / ndim);
    small.size as f64 / large.size as f64 > cfg.alpha
        && (small.size + large.size) as f64 / v_s < cfg.beta
        && small.distance_to(large) < gamma
}

/// Distance from the estimated position to the successors' midpoint when
/// the split condition holds, `rho_multiplier * disappearance_cost` otherwise.
pub fn split_cost(
    track: &Track,
    a: &ObjectStats,
    b: &ObjectStats,
    cfg: &TrackingConfig,
    disappearance_cost: f64,
) -> f64 {
    if split_condition(track.last_stats().size, a, b, cfg) {
        let mid: Vec<f64> = a
            .centroid
            .iter()
            .zip(&b.centroid)
            .map(|(p, q)| 0.5 * (p + q))
            .collect();
        euclidean(&track.estimated_position(), &mid)
    } else {
        cfg.rho_multiplier * disappearance_cost
    }
}
