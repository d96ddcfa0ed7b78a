//! Dense 2D/3D grids with a fixed `(z,) y, x` axis order.
//!
//! A 2D grid is stored as a 3D grid with a single z plane, so every
//! operator can walk `(z, y, x)` uniformly. `ndim()` reports the logical
//! dimensionality and `dims()` the logical extents.

use crate::error::{Error, Result};

/// Extents of a 2D or 3D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    /// Always `[z, y, x]`; `z == 1` for 2D.
    extents: [usize; 3],
    ndim: usize,
}

impl Shape {
    pub fn new_2d(height: usize, width: usize) -> Self {
        Shape {
            extents: [1, height, width],
            ndim: 2,
        }
    }

    pub fn new_3d(depth: usize, height: usize, width: usize) -> Self {
        Shape {
            extents: [depth, height, width],
            ndim: 3,
        }
    }

    /// Builds a shape from logical extents (`[y, x]` or `[z, y, x]`).
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        let shape = match *dims {
            [h, w] => Shape::new_2d(h, w),
            [d, h, w] => Shape::new_3d(d, h, w),
            _ => {
                return Err(Error::InvalidShape(format!(
                    "expected 2 or 3 axes, got {}",
                    dims.len()
                )))
            }
        };
        if shape.extents.contains(&0) {
            return Err(Error::InvalidShape(format!("zero extent in {dims:?}")));
        }
        Ok(shape)
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Logical extents, `[y, x]` or `[z, y, x]`.
    pub fn dims(&self) -> &[usize] {
        &self.extents[3 - self.ndim..]
    }

    /// Padded `[z, y, x]` extents.
    pub fn zyx(&self) -> [usize; 3] {
        self.extents
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.extents[1] + y) * self.extents[2] + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let plane = self.extents[1] * self.extents[2];
        let z = idx / plane;
        let rem = idx % plane;
        [z, rem / self.extents[2], rem % self.extents[2]]
    }

    /// Length of the grid diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        self.dims()
            .iter()
            .map(|&e| (e as f64) * (e as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Converts padded `[z, y, x]` coordinates into logical ones.
    pub fn logical<T: Copy>(&self, zyx: [T; 3]) -> Vec<T> {
        zyx[3 - self.ndim..].to_vec()
    }
}

/// Row-major scalar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    shape: Shape,
    data: Vec<T>,
}

/// Instance label image: 0 is background, every other value an instance ID.
pub type LabelImage = Grid<u32>;

/// Real-valued map, nominally in `[0, 1]`.
pub type DistanceMap = Grid<f64>;

impl<T: Clone> Grid<T> {
    pub fn filled(shape: Shape, value: T) -> Self {
        Grid {
            data: vec![value; shape.len()],
            shape,
        }
    }
}

impl<T: Clone + Default> Grid<T> {
    pub fn zeros(shape: Shape) -> Self {
        Grid::filled(shape, T::default())
    }
}

impl<T> Grid<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::InvalidShape(format!(
                "{} elements do not fill shape {:?}",
                data.len(),
                shape.dims()
            )));
        }
        Ok(Grid { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Grid<U> {
        Grid {
            shape: self.shape,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U, V, F: FnMut(&T, &U) -> V>(
        &self,
        other: &Grid<U>,
        mut f: F,
    ) -> Result<Grid<V>> {
        ensure_same_shape(self.shape, other.shape)?;
        Ok(Grid {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }
}

impl<T: Copy> Grid<T> {
    #[inline]
    pub fn at(&self, z: usize, y: usize, x: usize) -> T {
        self.data[self.shape.index(z, y, x)]
    }

    /// Element at logical coordinates (`[y, x]` or `[z, y, x]`).
    pub fn get(&self, coords: &[usize]) -> Option<T> {
        let zyx = self.padded(coords)?;
        Some(self.at(zyx[0], zyx[1], zyx[2]))
    }

    pub fn set(&mut self, coords: &[usize], value: T) -> Result<()> {
        let zyx = self
            .padded(coords)
            .ok_or_else(|| Error::InvalidShape(format!("coordinates {coords:?} out of bounds")))?;
        let idx = self.shape.index(zyx[0], zyx[1], zyx[2]);
        self.data[idx] = value;
        Ok(())
    }

    fn padded(&self, coords: &[usize]) -> Option<[usize; 3]> {
        if coords.len() != self.shape.ndim {
            return None;
        }
        let mut zyx = [0usize; 3];
        zyx[3 - coords.len()..].copy_from_slice(coords);
        zyx.iter()
            .zip(self.shape.zyx())
            .all(|(&c, e)| c < e)
            .then_some(zyx)
    }

    /// Copies the box `[lo, hi)` given in padded `[z, y, x]` coordinates.
    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Grid<T> {
        let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let shape = if self.shape.ndim == 2 {
            Shape::new_2d(ext[1], ext[2])
        } else {
            Shape::new_3d(ext[0], ext[1], ext[2])
        };
        let mut data = Vec::with_capacity(shape.len());
        for z in lo[0]..hi[0] {
            for y in lo[1]..hi[1] {
                let start = self.shape.index(z, y, lo[2]);
                data.extend_from_slice(&self.data[start..start + ext[2]]);
            }
        }
        Grid { shape, data }
    }
}

impl Grid<u32> {
    /// Distinct nonzero IDs in ascending order.
    pub fn label_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.data.iter().copied().filter(|&v| v != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Renumbers IDs to `1..=n` in order of first appearance (raster order).
    pub fn relabel_sequential(&self) -> LabelImage {
        let mut map = std::collections::HashMap::new();
        let mut next = 0u32;
        self.map(|&v| {
            if v == 0 {
                0
            } else {
                *map.entry(v).or_insert_with(|| {
                    next += 1;
                    next
                })
            }
        })
    }
}

pub(crate) fn ensure_same_shape(a: Shape, b: Shape) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            left: a.dims().to_vec(),
            right: b.dims().to_vec(),
        });
    }
    Ok(())
}

/// Neighbour offsets in padded `[z, y, x]` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Neighbours share a face (4 in 2D, 6 in 3D).
    #[default]
    Face,
    /// Neighbours share at least a corner (8 in 2D, 26 in 3D).
    Full,
}

impl Connectivity {
    pub fn offsets(self, ndim: usize) -> Vec<[isize; 3]> {
        let zr: &[isize] = if ndim == 3 { &[-1, 0, 1] } else { &[0] };
        let mut out = Vec::new();
        for &dz in zr {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let nonzero = (dz != 0) as u8 + (dy != 0) as u8 + (dx != 0) as u8;
                    let keep = match self {
                        Connectivity::Face => nonzero == 1,
                        Connectivity::Full => nonzero >= 1,
                    };
                    if keep {
                        out.push([dz, dy, dx]);
                    }
                }
            }
        }
        out
    }
}

/// Iterates the in-bounds neighbours of `idx` for the given offsets.
#[inline]
pub(crate) fn neighbors<'a>(
    shape: Shape,
    idx: usize,
    offsets: &'a [[isize; 3]],
) -> impl Iterator<Item = usize> + 'a {
    let [z, y, x] = shape.coords(idx);
    let ext = shape.zyx();
    offsets.iter().filter_map(move |o| {
        let nz = z as isize + o[0];
        let ny = y as isize + o[1];
        let nx = x as isize + o[2];
        if nz < 0
            || ny < 0
            || nx < 0
            || nz >= ext[0] as isize
            || ny >= ext[1] as isize
            || nx >= ext[2] as isize
        {
            None
        } else {
            Some(shape.index(nz as usize, ny as usize, nx as usize))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rejects_bad_axes() {
        assert!(Shape::from_dims(&[4]).is_err());
        assert!(Shape::from_dims(&[1, 2, 3, 4]).is_err());
        assert!(Shape::from_dims(&[0, 3]).is_err());
        let s = Shape::from_dims(&[2, 3, 4]).unwrap();
        assert_eq!(s.len(), 24);
        assert_eq!(s.dims(), &[2, 3, 4]);
    }

    #[test]
    fn index_roundtrip() {
        let s = Shape::new_3d(3, 4, 5);
        for i in 0..s.len() {
            let [z, y, x] = s.coords(i);
            assert_eq!(s.index(z, y, x), i);
        }
    }

    #[test]
    fn connectivity_counts() {
        assert_eq!(Connectivity::Face.offsets(2).len(), 4);
        assert_eq!(Connectivity::Full.offsets(2).len(), 8);
        assert_eq!(Connectivity::Face.offsets(3).len(), 6);
        assert_eq!(Connectivity::Full.offsets(3).len(), 26);
    }

    #[test]
    fn relabel_is_first_appearance_order() {
        let g = Grid::from_vec(Shape::new_2d(1, 5), vec![7, 0, 3, 7, 9]).unwrap();
        assert_eq!(g.relabel_sequential().data(), &[1, 0, 2, 1, 3]);
        assert_eq!(g.label_ids(), vec![3, 7, 9]);
    }

    #[test]
    fn crop_2d() {
        let g = Grid::from_vec(Shape::new_2d(3, 3), (0..9).collect::<Vec<u32>>()).unwrap();
        let c = g.crop([0, 1, 1], [1, 3, 3]);
        assert_eq!(c.shape().dims(), &[2, 2]);
        assert_eq!(c.data(), &[4, 5, 7, 8]);
    }
}
