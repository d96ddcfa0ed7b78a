//! Per-object size, centroid, median position and bounding box.

use std::collections::BTreeMap;

use crate::grid::LabelImage;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectStats {
    pub id: u32,
    /// Pixel (2D) or voxel (3D) count.
    pub size: usize,
    /// Mean member coordinate, logical axis order.
    pub centroid: Vec<f64>,
    /// Per-axis lower median of member coordinates.
    pub median_position: Vec<usize>,
    /// Inclusive lower corner of the bounding box.
    pub bbox_min: Vec<usize>,
    /// Exclusive upper corner of the bounding box.
    pub bbox_max: Vec<usize>,
}

impl ObjectStats {
    pub fn ndim(&self) -> usize {
        self.centroid.len()
    }

    pub fn distance_to(&self, other: &ObjectStats) -> f64 {
        euclidean(&self.centroid, &other.centroid)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One record per distinct nonzero ID, in ascending ID order.
pub fn object_stats(labels: &LabelImage) -> Vec<ObjectStats> {
    let shape = labels.shape();
    let ndim = shape.ndim();
    let mut members: BTreeMap<u32, Vec<[usize; 3]>> = BTreeMap::new();
    for (idx, &id) in labels.data().iter().enumerate() {
        if id != 0 {
            members.entry(id).or_default().push(shape.coords(idx));
        }
    }
    members
        .into_iter()
        .map(|(id, coords)| {
            let size = coords.len();
            let mut centroid = [0.0f64; 3];
            let mut lo = [usize::MAX; 3];
            let mut hi = [0usize; 3];
            for c in &coords {
                for a in 0..3 {
                    centroid[a] += c[a] as f64;
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a] + 1);
                }
            }
            for v in &mut centroid {
                *v /= size as f64;
            }
            let mut median = [0usize; 3];
            let mut axis_vals = Vec::with_capacity(size);
            for a in 0..3 {
                axis_vals.clear();
                axis_vals.extend(coords.iter().map(|c| c[a]));
                axis_vals.sort_unstable();
                median[a] = axis_vals[(size - 1) / 2];
            }
            ObjectStats {
                id,
                size,
                centroid: centroid[3 - ndim..].to_vec(),
                median_position: median[3 - ndim..].to_vec(),
                bbox_min: lo[3 - ndim..].to_vec(),
                bbox_max: hi[3 - ndim..].to_vec(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Shape};

    #[test]
    fn single_pixel_object() {
        let mut l = Grid::zeros(Shape::new_2d(8, 10));
        l.set(&[3, 7], 5).unwrap();
        let s = object_stats(&l);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].size, 1);
        assert_eq!(s[0].median_position, vec![3, 7]);
        assert_eq!(s[0].centroid, vec![3.0, 7.0]);
    }

    #[test]
    fn l_shape_lower_median() {
        let mut l = Grid::zeros(Shape::new_2d(4, 4));
        for c in [[0, 0], [1, 0], [2, 0], [2, 1]] {
            l.set(&c, 1).unwrap();
        }
        let s = &object_stats(&l)[0];
        assert_eq!(s.size, 4);
        // rows {0,1,2,2} -> lower median 1; cols {0,0,0,1} -> 0
        assert_eq!(s.median_position, vec![1, 0]);
        assert_eq!(s.bbox_min, vec![0, 0]);
        assert_eq!(s.bbox_max, vec![3, 2]);
    }

    #[test]
    fn sizes_partition_foreground() {
        let data: Vec<u32> = (0..100).map(|i| (i * 37 % 7) as u32).collect();
        let l = Grid::from_vec(Shape::new_2d(10, 10), data.clone()).unwrap();
        let total: usize = object_stats(&l).iter().map(|s| s.size).sum();
        assert_eq!(total, data.iter().filter(|&&v| v != 0).count());
        for s in object_stats(&l) {
            for a in 0..2 {
                assert!(
                    s.bbox_min[a] <= s.median_position[a] && s.median_position[a] < s.bbox_max[a]
                );
                assert!(
                    s.centroid[a] >= s.bbox_min[a] as f64 && s.centroid[a] < s.bbox_max[a] as f64
                );
            }
        }
    }
}
