//! Watershed post-processing: predicted cell/neighbor distances to labels.
//!
//! Both predictions are smoothed, the flooding mask is `cell > rho_mask`
//! and the seeds are the components of `cell - neighbor^p > rho_seed`. A
//! seeded priority flood over the negated smoothed cell map then assigns
//! every reachable mask pixel. Oversized objects can optionally be re-seeded
//! with a rising seed threshold to split merged cells.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_smooth;
use crate::grid::{ensure_same_shape, neighbors, Connectivity, DistanceMap, Grid, LabelImage};
use crate::labelgen::RepresentationPair;
use crate::labeling::connected_components;
use crate::stats::object_stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationConfig {
    pub rho_mask: f64,
    pub rho_seed: f64,
    /// Per-axis smoothing in logical axis order. `None` selects `(1.5, 1.5)`
    /// for 2D and `(z, y, x) = (0.5, 1.5, 1.5)` for 3D.
    pub sigma: Option<Vec<f64>>,
    /// Power applied to the smoothed neighbor prediction before subtraction.
    pub neighbor_power: f64,
    /// Seeds smaller than this many pixels/voxels are discarded.
    pub min_seed_area: usize,
    pub seed_connectivity: SeedConnectivity,
    pub split_enabled: bool,
    /// Objects larger than `split_factor` times the mean size are re-seeded.
    pub split_factor: f64,
    pub split_rho_step: f64,
    pub split_rho_cap: f64,
    pub split_max_iterations: usize,
}

/// Serializable mirror of [`Connectivity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedConnectivity {
    #[default]
    Face,
    Full,
}

impl From<SeedConnectivity> for Connectivity {
    fn from(c: SeedConnectivity) -> Self {
        match c {
            SeedConnectivity::Face => Connectivity::Face,
            SeedConnectivity::Full => Connectivity::Full,
        }
    }
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            rho_mask: 0.09,
            rho_seed: 0.5,
            sigma: None,
            neighbor_power: 2.0,
            min_seed_area: 3,
            seed_connectivity: SeedConnectivity::Face,
            split_enabled: false,
            split_factor: 4.0 / 3.0,
            split_rho_step: 0.05,
            split_rho_cap: 0.95,
            split_max_iterations: 12,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )))
            }
        };
        open_unit("rho_mask", self.rho_mask)?;
        open_unit("rho_seed", self.rho_seed)?;
        if self.min_seed_area < 1 {
            return Err(Error::InvalidParameter(
                "min_seed_area must be at least 1".into(),
            ));
        }
        if !(self.neighbor_power > 0.0) {
            return Err(Error::InvalidParameter(
                "neighbor_power must be positive".into(),
            ));
        }
        if !(self.split_factor > 0.0 && self.split_rho_step > 0.0) {
            return Err(Error::InvalidParameter(
                "split_factor and split_rho_step must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Smoothing for a grid of dimensionality `ndim`.
    pub fn sigma_for(&self, ndim: usize) -> Result<Vec<f64>> {
        match &self.sigma {
            Some(s) if s.len() == ndim => Ok(s.clone()),
            Some(s) => Err(Error::InvalidParameter(format!(
                "sigma {s:?} does not match {ndim}D data"
            ))),
            None if ndim == 3 => Ok(vec![0.5, 1.5, 1.5]),
            None => Ok(vec![1.5, 1.5]),
        }
    }
}

/// `cell > rho_mask` after smoothing.
pub fn extract_mask(cell_pred: &DistanceMap, cfg: &SegmentationConfig) -> Result<Grid<bool>> {
    let smoothed = gaussian_smooth(cell_pred, &cfg.sigma_for(cell_pred.shape().ndim())?)?;
    Ok(threshold(&smoothed, cfg.rho_mask))
}

fn threshold(g: &DistanceMap, rho: f64) -> Grid<bool> {
    g.map(|&v| v > rho)
}

/// Seed components of `cell - neighbor^p > rho_seed` after smoothing,
/// without components smaller than `min_seed_area`.
pub fn extract_seeds(
    cell_pred: &DistanceMap,
    neighbor_pred: &DistanceMap,
    cfg: &SegmentationConfig,
) -> Result<LabelImage> {
    ensure_same_shape(cell_pred.shape(), neighbor_pred.shape())?;
    let sigma = cfg.sigma_for(cell_pred.shape().ndim())?;
    let cell = gaussian_smooth(cell_pred, &sigma)?;
    let neighbor = gaussian_smooth(neighbor_pred, &sigma)?;
    Ok(seeds_from_smoothed(&cell, &neighbor, cfg.rho_seed, cfg))
}

fn seed_score(cell: &DistanceMap, neighbor: &DistanceMap, power: f64) -> DistanceMap {
    cell.zip_map(neighbor, |&c, &n| c - n.max(0.0).powf(power))
        .expect("same shape")
}

fn seeds_from_smoothed(
    cell: &DistanceMap,
    neighbor: &DistanceMap,
    rho: f64,
    cfg: &SegmentationConfig,
) -> LabelImage {
    let score = seed_score(cell, neighbor, cfg.neighbor_power);
    seeds_from_score(&score, rho, cfg)
}

fn seeds_from_score(score: &DistanceMap, rho: f64, cfg: &SegmentationConfig) -> LabelImage {
    let components = connected_components(&threshold(score, rho), cfg.seed_connectivity.into());
    remove_small(&components, cfg.min_seed_area)
}

/// Drops components below `min_area` and renumbers the rest `1..=n`.
fn remove_small(components: &LabelImage, min_area: usize) -> LabelImage {
    let mut counts = vec![0usize; components.max_label() as usize + 1];
    for &v in components.data() {
        counts[v as usize] += 1;
    }
    components
        .map(|&v| {
            if v != 0 && counts[v as usize] >= min_area {
                v
            } else {
                0
            }
        })
        .relabel_sequential()
}

#[derive(Debug, Clone, Copy)]
struct FloodEntry {
    priority: f64,
    idx: usize,
}

impl PartialEq for FloodEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FloodEntry {}

impl PartialOrd for FloodEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FloodEntry {
    // BinaryHeap is a max-heap: the lowest priority, then the lowest index,
    // must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Seeded priority flood restricted to `mask`.
///
/// Pixels are flooded in order of decreasing smoothed cell distance (ties by
/// raster index) and inherit the label of the pixel that reached them. Mask
/// pixels that no seed can reach stay background. Seed pixels outside the
/// mask are dropped with a warning.
pub fn watershed_assign(
    mask: &Grid<bool>,
    seeds: &LabelImage,
    cell_smoothed: &DistanceMap,
) -> Result<LabelImage> {
    ensure_same_shape(mask.shape(), seeds.shape())?;
    ensure_same_shape(mask.shape(), cell_smoothed.shape())?;
    let shape = mask.shape();
    let offsets = Connectivity::Face.offsets(shape.ndim());
    let mut labels = Grid::zeros(shape);
    let mut heap = BinaryHeap::new();
    let mut clipped = 0usize;
    for (i, &s) in seeds.data().iter().enumerate() {
        if s == 0 {
            continue;
        }
        if !mask.data()[i] {
            clipped += 1;
            continue;
        }
        labels.data_mut()[i] = s;
        heap.push(FloodEntry {
            priority: -cell_smoothed.data()[i],
            idx: i,
        });
    }
    if clipped > 0 {
        warn!("{clipped} seed pixels outside the mask were clipped");
    }
    if heap.is_empty() {
        return Err(Error::NoObjects);
    }
    while let Some(FloodEntry { idx, .. }) = heap.pop() {
        let label = labels.data()[idx];
        for n in neighbors(shape, idx, &offsets) {
            if mask.data()[n] && labels.data()[n] == 0 {
                labels.data_mut()[n] = label;
                heap.push(FloodEntry {
                    priority: -cell_smoothed.data()[n],
                    idx: n,
                });
            }
        }
    }
    Ok(labels)
}

/// Re-seeds objects larger than `split_factor` times the mean object size
/// with increasing seed thresholds; an object that yields two or more seeds
/// is replaced by its local watershed. New objects get IDs above the
/// current maximum. Pixels outside processed objects are never changed.
pub fn split_merged(
    labels: &LabelImage,
    preds: &RepresentationPair,
    cfg: &SegmentationConfig,
) -> Result<LabelImage> {
    ensure_same_shape(labels.shape(), preds.cell.shape())?;
    ensure_same_shape(labels.shape(), preds.neighbor.shape())?;
    let sigma = cfg.sigma_for(labels.shape().ndim())?;
    let cell = gaussian_smooth(&preds.cell, &sigma)?;
    let neighbor = gaussian_smooth(&preds.neighbor, &sigma)?;
    Ok(split_merged_smoothed(labels, &cell, &neighbor, cfg))
}

fn split_merged_smoothed(
    labels: &LabelImage,
    cell: &DistanceMap,
    neighbor: &DistanceMap,
    cfg: &SegmentationConfig,
) -> LabelImage {
    let stats = object_stats(labels);
    if stats.is_empty() {
        return labels.clone();
    }
    let mean = stats.iter().map(|s| s.size as f64).sum::<f64>() / stats.len() as f64;
    let shape = labels.shape();
    let pad = 3 - shape.ndim();
    let score = seed_score(cell, neighbor, cfg.neighbor_power);
    let mut out = labels.clone();
    let mut next_id = labels.max_label() + 1;

    for s in stats
        .iter()
        .filter(|s| s.size as f64 > cfg.split_factor * mean)
    {
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for a in 0..shape.ndim() {
            lo[a + pad] = s.bbox_min[a];
            hi[a + pad] = s.bbox_max[a];
        }
        let local_labels = labels.crop(lo, hi);
        let inside = local_labels.map(|&v| v == s.id);
        let local_score = score
            .crop(lo, hi)
            .zip_map(&inside, |&v, &m| if m { v } else { f64::NEG_INFINITY })
            .expect("same shape");

        let mut rho = cfg.rho_seed;
        let mut found = None;
        for _ in 0..cfg.split_max_iterations {
            rho += cfg.split_rho_step;
            if rho > cfg.split_rho_cap + 1e-12 {
                break;
            }
            let seeds = seeds_from_score(&local_score, rho, cfg);
            if seeds.max_label() >= 2 {
                found = Some(seeds);
                break;
            }
        }
        let Some(seeds) = found else { continue };
        let local_cell = cell.crop(lo, hi);
        let Ok(split) = watershed_assign(&inside, &seeds, &local_cell) else {
            continue;
        };
        let lshape = split.shape();
        for (li, &v) in split.data().iter().enumerate() {
            if !inside.data()[li] {
                continue;
            }
            let [z, y, x] = lshape.coords(li);
            let gi = shape.index(z + lo[0], y + lo[1], x + lo[2]);
            out.data_mut()[gi] = match v {
                0 => 0,
                1 => s.id,
                k => next_id + k - 2,
            };
        }
        next_id += seeds.max_label() - 1;
    }
    out
}

/// Full post-processing of one frame. Frames without seeds yield an empty
/// label image. Output IDs are consecutive in raster order of appearance.
pub fn segment_frame(preds: &RepresentationPair, cfg: &SegmentationConfig) -> Result<LabelImage> {
    cfg.validate()?;
    ensure_same_shape(preds.cell.shape(), preds.neighbor.shape())?;
    let shape = preds.cell.shape();
    let sigma = cfg.sigma_for(shape.ndim())?;
    let cell = gaussian_smooth(&preds.cell, &sigma)?;
    let neighbor = gaussian_smooth(&preds.neighbor, &sigma)?;
    let mask = threshold(&cell, cfg.rho_mask);
    let seeds = seeds_from_smoothed(&cell, &neighbor, cfg.rho_seed, cfg);
    let labels = match watershed_assign(&mask, &seeds, &cell) {
        Ok(l) => l,
        Err(Error::NoObjects) => return Ok(Grid::zeros(shape)),
        Err(e) => return Err(e),
    };
    let labels = if cfg.split_enabled {
        split_merged_smoothed(&labels, &cell, &neighbor, cfg)
    } else {
        labels
    };
    Ok(labels.relabel_sequential())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use crate::labelgen::{make_representation_pair, LabelGenConfig};

    fn disk(l: &mut LabelImage, id: u32, cy: f64, cx: f64, r: f64) {
        let [_, h, w] = l.shape().zyx();
        for y in 0..h {
            for x in 0..w {
                if (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2) <= r * r {
                    l.set(&[y, x], id).unwrap();
                }
            }
        }
    }

    fn gt_pair(l: &LabelImage) -> RepresentationPair {
        make_representation_pair(l, &LabelGenConfig::default())
    }

    #[test]
    fn zero_prediction_gives_empty_mask_and_no_seeds() {
        let z = Grid::zeros(Shape::new_2d(10, 10));
        let cfg = SegmentationConfig::default();
        assert!(extract_mask(&z, &cfg).unwrap().data().iter().all(|&b| !b));
        assert_eq!(extract_seeds(&z, &z, &cfg).unwrap().max_label(), 0);
        let pair = RepresentationPair {
            cell: z.clone(),
            neighbor: z,
        };
        assert_eq!(segment_frame(&pair, &cfg).unwrap().max_label(), 0);
    }

    #[test]
    fn constant_prediction_fills_mask() {
        let c = Grid::filled(Shape::new_2d(10, 10), 0.5);
        assert!(extract_mask(&c, &SegmentationConfig::default())
            .unwrap()
            .data()
            .iter()
            .all(|&b| b));
    }

    #[test]
    fn mask_covers_gt_disk() {
        // radius-8 disk keeps 97.97% of its pixels under the defaults
        let mut l = Grid::zeros(Shape::new_2d(32, 32));
        disk(&mut l, 1, 16.0, 16.0, 8.0);
        let pair = gt_pair(&l);
        let m = extract_mask(&pair.cell, &SegmentationConfig::default()).unwrap();
        let gt = l.data().iter().filter(|&&v| v == 1).count();
        let covered = l
            .data()
            .iter()
            .zip(m.data())
            .filter(|(&v, &b)| v == 1 && b)
            .count();
        assert!(covered as f64 >= 0.95 * gt as f64, "{covered}/{gt}");
    }

    #[test]
    fn touching_disks_give_one_seed_each() {
        let mut l = Grid::zeros(Shape::new_2d(40, 60));
        disk(&mut l, 1, 20.0, 20.0, 10.0);
        disk(&mut l, 2, 20.0, 40.0, 10.0);
        let pair = gt_pair(&l);
        let seeds =
            extract_seeds(&pair.cell, &pair.neighbor, &SegmentationConfig::default()).unwrap();
        assert_eq!(seeds.max_label(), 2);
        for sid in 1..=2 {
            let owners: Vec<u32> = seeds
                .data()
                .iter()
                .zip(l.data())
                .filter(|(&s, _)| s == sid)
                .map(|(_, &g)| g)
                .collect();
            assert!(!owners.is_empty());
            assert!(owners.iter().all(|&g| g == owners[0] && g != 0));
        }
    }

    #[test]
    fn small_seed_components_removed() {
        let mut cell = Grid::zeros(Shape::new_2d(9, 9));
        cell.set(&[4, 4], 1.0).unwrap();
        cell.set(&[4, 5], 1.0).unwrap();
        let zero = Grid::zeros(cell.shape());
        let cfg = SegmentationConfig {
            sigma: Some(vec![0.0, 0.0]),
            ..Default::default()
        };
        assert_eq!(extract_seeds(&cell, &zero, &cfg).unwrap().max_label(), 0);
        let cfg2 = SegmentationConfig {
            min_seed_area: 2,
            ..cfg
        };
        assert_eq!(extract_seeds(&cell, &zero, &cfg2).unwrap().max_label(), 1);
    }

    #[test]
    fn single_seed_floods_convex_mask() {
        let mut mask = Grid::filled(Shape::new_2d(7, 7), false);
        let mut cell = Grid::zeros(mask.shape());
        for y in 1..6 {
            for x in 1..6 {
                mask.set(&[y, x], true).unwrap();
                cell.set(
                    &[y, x],
                    1.0 - ((y as f64 - 3.0).abs() + (x as f64 - 3.0).abs()) / 10.0,
                )
                .unwrap();
            }
        }
        let mut seeds = Grid::zeros(mask.shape());
        seeds.set(&[3, 3], 5).unwrap();
        let out = watershed_assign(&mask, &seeds, &cell).unwrap();
        for (&m, &v) in mask.data().iter().zip(out.data()) {
            assert_eq!(v, if m { 5 } else { 0 });
        }
    }

    #[test]
    fn no_seeds_signals_no_objects() {
        let mask = Grid::filled(Shape::new_2d(4, 4), true);
        let seeds = Grid::zeros(mask.shape());
        let cell = Grid::zeros(mask.shape());
        assert!(matches!(
            watershed_assign(&mask, &seeds, &cell),
            Err(Error::NoObjects)
        ));
    }

    /// 9×15 dumbbell: two 7×5 lobes joined by a 1-row bridge at column 7.
    #[test]
    fn dumbbell_splits_at_the_valley() {
        let shape = Shape::new_2d(9, 15);
        let mut mask = Grid::filled(shape, false);
        let mut cell = Grid::zeros(shape);
        for y in 1..8 {
            for x in 1..14 {
                let lobe = x <= 6 || x >= 8;
                if lobe || y == 4 {
                    mask.set(&[y, x], true).unwrap();
                    let cx = if x < 7 { 3.5 } else { 10.5 };
                    let d = ((y as f64 - 4.0).powi(2) + (x as f64 - cx).powi(2)).sqrt();
                    cell.set(&[y, x], (1.0 - d / 8.0).max(0.05)).unwrap();
                }
            }
        }
        let mut seeds = Grid::zeros(shape);
        seeds.set(&[4, 3], 1).unwrap();
        seeds.set(&[4, 11], 2).unwrap();
        let out = watershed_assign(&mask, &seeds, &cell).unwrap();
        assert_eq!(out.label_ids(), vec![1, 2]);
        // flood-fill oracle: everything left of the bridge midpoint is 1
        for y in 0..9 {
            for x in 0..15 {
                let m = mask.get(&[y, x]).unwrap();
                let v = out.get(&[y, x]).unwrap();
                if !m {
                    assert_eq!(v, 0);
                } else if x < 7 {
                    assert_eq!(v, 1, "({y},{x})");
                } else if x > 7 {
                    assert_eq!(v, 2, "({y},{x})");
                }
            }
        }
        // no new labels invented
        assert!(out.data().iter().all(|&v| v <= 2));
    }

    #[test]
    fn unreachable_mask_pixels_stay_background() {
        let shape = Shape::new_2d(5, 9);
        let mut mask = Grid::filled(shape, false);
        for y in 1..4 {
            for x in [1usize, 2, 6, 7] {
                mask.set(&[y, x], true).unwrap();
            }
        }
        let mut seeds = Grid::zeros(shape);
        seeds.set(&[2, 1], 1).unwrap();
        seeds.set(&[0, 0], 2).unwrap();
        let out = watershed_assign(&mask, &seeds, &Grid::zeros(shape)).unwrap();
        assert_eq!(out.data().iter().filter(|&&v| v == 1).count(), 6);
        assert_eq!(out.data().iter().filter(|&&v| v == 2).count(), 0);
    }

    #[test]
    fn split_identity_for_equal_sizes() {
        let mut l = Grid::zeros(Shape::new_2d(30, 30));
        disk(&mut l, 1, 8.0, 8.0, 5.0);
        disk(&mut l, 2, 20.0, 20.0, 5.0);
        let pair = gt_pair(&l);
        let cfg = SegmentationConfig::default();
        assert_eq!(split_merged(&l, &pair, &cfg).unwrap(), l);
    }

    #[test]
    fn split_recovers_merged_disks() {
        let mut gt = Grid::zeros(Shape::new_2d(60, 80));
        disk(&mut gt, 1, 20.0, 20.0, 9.0);
        disk(&mut gt, 2, 20.0, 38.0, 9.0);
        disk(&mut gt, 3, 45.0, 20.0, 9.0);
        disk(&mut gt, 4, 45.0, 60.0, 9.0);
        let pair = gt_pair(&gt);
        // merge 1 and 2
        let merged = gt.map(|&v| if v == 2 { 1 } else { v });
        let cfg = SegmentationConfig {
            split_enabled: true,
            ..Default::default()
        };
        let out = split_merged(&merged, &pair, &cfg).unwrap();
        let stats = object_stats(&out);
        assert_eq!(stats.len(), 4);
        let gt_stats = object_stats(&gt);
        for g in &gt_stats {
            let best = stats
                .iter()
                .map(|s| s.distance_to(g))
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 2.0, "gt {} nearest {best}", g.id);
        }
        // untouched objects keep their pixels
        for (&a, &b) in merged.data().iter().zip(out.data()) {
            if a == 3 || a == 4 || a == 0 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn raising_rho_seed_never_grows_seeds() {
        let mut l = Grid::zeros(Shape::new_2d(40, 60));
        disk(&mut l, 1, 20.0, 20.0, 10.0);
        disk(&mut l, 2, 20.0, 39.0, 9.0);
        let pair = gt_pair(&l);
        let mut prev: Option<Grid<bool>> = None;
        for k in 0..8 {
            let cfg = SegmentationConfig {
                rho_seed: 0.3 + 0.08 * k as f64,
                ..Default::default()
            };
            let s = extract_seeds(&pair.cell, &pair.neighbor, &cfg)
                .unwrap()
                .map(|&v| v != 0);
            if let Some(p) = &prev {
                assert!(s.data().iter().zip(p.data()).all(|(&a, &b)| !a || b));
            }
            prev = Some(s);
        }
    }

    #[test]
    fn round_trip_two_touching_disks() {
        let mut l = Grid::zeros(Shape::new_2d(40, 60));
        disk(&mut l, 1, 20.0, 20.0, 10.0);
        disk(&mut l, 2, 20.0, 39.0, 9.0);
        let out = segment_frame(&gt_pair(&l), &SegmentationConfig::default()).unwrap();
        assert_eq!(out.max_label(), 2);
    }

    #[test]
    fn z_constant_volume_is_slice_consistent() {
        let mut plane = Grid::zeros(Shape::new_2d(30, 40));
        disk(&mut plane, 1, 15.0, 12.0, 8.0);
        disk(&mut plane, 2, 15.0, 28.0, 8.0);
        let pair2 = gt_pair(&plane);
        let depth = 5;
        let stack = |g: &DistanceMap| {
            let mut d = Vec::new();
            for _ in 0..depth {
                d.extend_from_slice(g.data());
            }
            Grid::from_vec(Shape::new_3d(depth, 30, 40), d).unwrap()
        };
        let pair3 = RepresentationPair {
            cell: stack(&pair2.cell),
            neighbor: stack(&pair2.neighbor),
        };
        let out = segment_frame(&pair3, &SegmentationConfig::default()).unwrap();
        let n = 30 * 40;
        let first = &out.data()[..n];
        for z in 1..depth {
            assert_eq!(&out.data()[z * n..(z + 1) * n], first);
        }
        assert_eq!(out.max_label(), 2);
    }
}
