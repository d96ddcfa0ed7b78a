//! Training representations derived from instance labels: cell distances
//! and neighbor distances, plus binary boundary/border maps for comparison.

use serde::{Deserialize, Serialize};

use crate::edt::euclidean_distance_transform;
use crate::grid::{neighbors, Connectivity, DistanceMap, Grid, LabelImage, Shape};
use crate::morphology::grayscale_closing;
use crate::stats::object_stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelGenConfig {
    /// Radius of the disk used to close the composed neighbor map.
    pub closing_radius: usize,
    /// Power applied to the closed neighbor map.
    pub exponent: u32,
}

impl Default for LabelGenConfig {
    fn default() -> Self {
        LabelGenConfig {
            closing_radius: 2,
            exponent: 3,
        }
    }
}

/// Cell- and neighbor-distance maps of one label image.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationPair {
    pub cell: DistanceMap,
    pub neighbor: DistanceMap,
}

impl RepresentationPair {
    pub fn source_shape(&self) -> Shape {
        self.cell.shape()
    }
}

/// Crop box `[lo, hi)` (padded `zyx`) around a bbox, grown by `margin` and
/// clamped to the image.
fn grown_box(
    shape: Shape,
    bbox_min: &[usize],
    bbox_max: &[usize],
    margin: usize,
) -> ([usize; 3], [usize; 3]) {
    let ext = shape.zyx();
    let off = 3 - bbox_min.len();
    let mut lo = [0usize; 3];
    let mut hi = [1usize; 3];
    for a in 0..3 {
        if a < off {
            continue;
        }
        lo[a] = bbox_min[a - off].saturating_sub(margin);
        hi[a] = (bbox_max[a - off] + margin).min(ext[a]);
    }
    (lo, hi)
}

/// Per-cell Euclidean distance to the nearest pixel outside the cell
/// (touching cells count as outside), divided by the cell's maximum.
pub fn cell_distance(labels: &LabelImage) -> DistanceMap {
    let shape = labels.shape();
    let mut out = Grid::zeros(shape);
    for s in object_stats(labels) {
        let (lo, hi) = grown_box(shape, &s.bbox_min, &s.bbox_max, 1);
        let crop = labels.crop(lo, hi);
        let dist = euclidean_distance_transform(&crop.map(|&v| v == s.id));
        let max = crop
            .data()
            .iter()
            .zip(dist.data())
            .filter(|(&v, _)| v == s.id)
            .fold(0.0f64, |m, (_, &d)| m.max(d));
        let cshape = crop.shape();
        for (ci, (&v, &d)) in crop.data().iter().zip(dist.data()).enumerate() {
            if v == s.id {
                let [z, y, x] = cshape.coords(ci);
                let gi = shape.index(z + lo[0], y + lo[1], x + lo[2]);
                out.data_mut()[gi] = d / max;
            }
        }
    }
    out
}

/// Distance from each pixel of `id` to the nearest pixel of any other cell.
///
/// Works on a crop around the cell and grows it until every in-crop
/// distance is provably the global one.
fn distance_to_other_cells(
    labels: &LabelImage,
    id: u32,
    bbox_min: &[usize],
    bbox_max: &[usize],
) -> Vec<(usize, f64)> {
    let shape = labels.shape();
    let ext = shape.zyx();
    let mut margin = 16usize;
    loop {
        let (lo, hi) = grown_box(shape, bbox_min, bbox_max, margin);
        let whole = lo == [0, 0, 0] && hi == ext;
        let crop = labels.crop(lo, hi);
        let dist = euclidean_distance_transform(&crop.map(|&v| v == 0 || v == id));
        let cshape = crop.shape();
        let mut values = Vec::new();
        let mut exact = true;
        for (ci, (&v, &d)) in crop.data().iter().zip(dist.data()).enumerate() {
            if v != id {
                continue;
            }
            let [z, y, x] = cshape.coords(ci);
            let g = [z + lo[0], y + lo[1], x + lo[2]];
            if !whole {
                // distance to the nearest pixel not covered by the crop
                let mut exterior = f64::INFINITY;
                for a in 0..3 {
                    if lo[a] > 0 {
                        exterior = exterior.min((g[a] - lo[a] + 1) as f64);
                    }
                    if hi[a] < ext[a] {
                        exterior = exterior.min((hi[a] - g[a]) as f64);
                    }
                }
                if d > exterior {
                    exact = false;
                    break;
                }
            }
            values.push((shape.index(g[0], g[1], g[2]), d));
        }
        if exact || whole {
            return values;
        }
        margin *= 2;
    }
}

/// Inverse normalized distance to the closest neighboring cell, closed with
/// a disk of `cfg.closing_radius` and raised to `cfg.exponent`.
///
/// An image with fewer than two cells has no neighbors; its map is zero.
pub fn neighbor_distance(labels: &LabelImage, cfg: &LabelGenConfig) -> DistanceMap {
    let shape = labels.shape();
    let stats = object_stats(labels);
    if stats.len() < 2 {
        return Grid::zeros(shape);
    }
    let mut composed = Grid::zeros(shape);
    for s in &stats {
        let values = distance_to_other_cells(labels, s.id, &s.bbox_min, &s.bbox_max);
        let max = values.iter().fold(0.0f64, |m, &(_, d)| m.max(d));
        for (i, d) in values {
            composed.data_mut()[i] = 1.0 - d / max;
        }
    }
    let closed = grayscale_closing(&composed, cfg.closing_radius);
    let exponent = cfg.exponent.max(1) as i32;
    closed
        .zip_map(labels, |&v, &l| {
            if l == 0 {
                0.0
            } else {
                v.powi(exponent).clamp(0.0, 1.0)
            }
        })
        .expect("same shape")
}

pub fn make_representation_pair(labels: &LabelImage, cfg: &LabelGenConfig) -> RepresentationPair {
    RepresentationPair {
        cell: cell_distance(labels),
        neighbor: neighbor_distance(labels, cfg),
    }
}

/// Binary boundary and border masks.
///
/// Boundary: cell pixels with a face neighbor carrying another label
/// (including background). Border: boundary pixels touching another cell.
pub fn boundary_and_border_labels(labels: &LabelImage) -> (Grid<bool>, Grid<bool>) {
    let shape = labels.shape();
    let offsets = Connectivity::Face.offsets(shape.ndim());
    let mut boundary = Grid::filled(shape, false);
    let mut border = Grid::filled(shape, false);
    for (i, &id) in labels.data().iter().enumerate() {
        if id == 0 {
            continue;
        }
        for n in neighbors(shape, i, &offsets) {
            let other = labels.data()[n];
            if other != id {
                boundary.data_mut()[i] = true;
                if other != 0 {
                    border.data_mut()[i] = true;
                }
            }
        }
    }
    (boundary, border)
}

/// Erodes object `erode_id` by one pixel and then dilates object
/// `dilate_id` by one pixel (face connectivity) into background.
///
/// Simulates the annotation inconsistency of shifting a shared contact.
pub fn erode_dilate_pair(labels: &LabelImage, erode_id: u32, dilate_id: u32) -> LabelImage {
    let shape = labels.shape();
    let offsets = Connectivity::Face.offsets(shape.ndim());
    let mut eroded = labels.clone();
    for (i, &id) in labels.data().iter().enumerate() {
        if id == erode_id && neighbors(shape, i, &offsets).any(|n| labels.data()[n] != erode_id) {
            eroded.data_mut()[i] = 0;
        }
    }
    let mut out = eroded.clone();
    for (i, &id) in eroded.data().iter().enumerate() {
        if id == 0 && neighbors(shape, i, &offsets).any(|n| eroded.data()[n] == dilate_id) {
            out.data_mut()[i] = dilate_id;
        }
    }
    out
}

/// L1 change of a representation per changed annotation pixel.
pub fn change_per_changed_pixel(
    before: &LabelImage,
    after: &LabelImage,
    map_before: &[f64],
    map_after: &[f64],
) -> f64 {
    let changed = before
        .data()
        .iter()
        .zip(after.data())
        .filter(|(a, b)| a != b)
        .count();
    let l1: f64 = map_before
        .iter()
        .zip(map_after)
        .map(|(a, b)| (a - b).abs())
        .sum();
    l1 / changed.max(1) as f64
}
