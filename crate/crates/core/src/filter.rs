//! Separable Gaussian smoothing with edge replication.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Kernel half-width in standard deviations.
const TRUNCATE: f64 = 4.0;

/// Normalized 1D Gaussian taps for `sigma`, centred at index `radius`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (TRUNCATE * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Smooths `g` with a Gaussian of per-axis standard deviation `sigma`
/// (logical axis order, i.e. `[y, x]` or `[z, y, x]`). A zero component
/// leaves that axis untouched. Out-of-range samples replicate the edge.
pub fn gaussian_smooth(g: &Grid<f64>, sigma: &[f64]) -> Result<Grid<f64>> {
    let shape = g.shape();
    if sigma.len() != shape.ndim() {
        return Err(Error::InvalidParameter(format!(
            "sigma has {} components for a {}D grid",
            sigma.len(),
            shape.ndim()
        )));
    }
    if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and non-negative, got {s}"
        )));
    }
    let mut padded_sigma = [0.0; 3];
    padded_sigma[3 - sigma.len()..].copy_from_slice(sigma);

    let (lo, hi) = g
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });

    let mut out = g.clone();
    let ext = shape.zyx();
    let mut line = Vec::new();
    for axis in [2usize, 1, 0] {
        if padded_sigma[axis] == 0.0 {
            continue;
        }
        let kernel = gaussian_kernel(padded_sigma[axis]);
        let radius = (kernel.len() / 2) as isize;
        let n = ext[axis];
        let stride = match axis {
            2 => 1,
            1 => ext[2],
            _ => ext[1] * ext[2],
        };
        line.resize(n, 0.0);
        let data = out.data_mut();
        for start in line_starts(ext, axis) {
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[start + i * stride];
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let j = (i as isize + k as isize - radius).clamp(0, n as isize - 1) as usize;
                    acc += w * line[j];
                }
                data[start + i * stride] = acc;
            }
        }
    }
    // A convex combination cannot leave [lo, hi]; clamp away rounding drift.
    for v in out.data_mut() {
        *v = v.clamp(lo, hi);
    }
    Ok(out)
}

/// Flat indices of the first element of every 1D line along `axis`.
fn line_starts(ext: [usize; 3], axis: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let index = |z: usize, y: usize, x: usize| (z * ext[1] + y) * ext[2] + x;
    match axis {
        2 => {
            for z in 0..ext[0] {
                for y in 0..ext[1] {
                    starts.push(index(z, y, 0));
                }
            }
        }
        1 => {
            for z in 0..ext[0] {
                for x in 0..ext[2] {
                    starts.push(index(z, 0, x));
                }
            }
        }
        _ => {
            for y in 0..ext[1] {
                for x in 0..ext[2] {
                    starts.push(index(0, y, x));
                }
            }
        }
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use proptest::prelude::*;

    #[test]
    fn zero_sigma_is_identity() {
        let g = Grid::from_vec(Shape::new_2d(3, 3), (0..9).map(f64::from).collect()).unwrap();
        assert_eq!(gaussian_smooth(&g, &[0.0, 0.0]).unwrap(), g);
    }

    #[test]
    fn constant_grid_is_preserved() {
        let g = Grid::filled(Shape::new_3d(4, 9, 7), 0.37);
        let s = gaussian_smooth(&g, &[0.5, 1.5, 1.5]).unwrap();
        assert!(s.data().iter().all(|&v| (v - 0.37).abs() < 1e-9));
    }

    #[test]
    fn negative_sigma_rejected() {
        let g = Grid::filled(Shape::new_2d(3, 3), 0.0);
        assert!(gaussian_smooth(&g, &[-1.0, 1.0]).is_err());
        assert!(gaussian_smooth(&g, &[1.0]).is_err());
    }

    /// Direct 2D convolution with the dense outer-product kernel.
    fn dense_convolve(g: &Grid<f64>, sigma: f64) -> Vec<f64> {
        let [_, h, w] = g.shape().zyx();
        let r = (TRUNCATE * sigma).ceil() as isize;
        let mut weights = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                weights.push((
                    dy,
                    dx,
                    (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp(),
                ));
            }
        }
        let norm: f64 = weights.iter().map(|w| w.2).sum();
        let mut out = vec![0.0; h * w];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for &(dy, dx, wt) in &weights {
                    let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                    acc += wt * g.at(0, yy, xx);
                }
                out[y as usize * w + x as usize] = acc / norm;
            }
        }
        out
    }

    #[test]
    fn impulse_matches_dense_kernel() {
        let mut g = Grid::filled(Shape::new_2d(21, 21), 0.0);
        g.set(&[10, 10], 1.0).unwrap();
        let s = gaussian_smooth(&g, &[1.5, 1.5]).unwrap();
        for (a, b) in s.data().iter().zip(dense_convolve(&g, 1.5)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mean_preserved_on_interior_mass() {
        let mut g = Grid::filled(Shape::new_2d(40, 40), 0.0);
        for y in 15..25 {
            for x in 12..20 {
                g.set(&[y, x], 1.0 + (x as f64) * 0.1).unwrap();
            }
        }
        let s = gaussian_smooth(&g, &[1.5, 1.5]).unwrap();
        let m0: f64 = g.data().iter().sum();
        let m1: f64 = s.data().iter().sum();
        assert!(((m0 - m1) / m0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn stays_within_input_range(vals in proptest::collection::vec(-5.0f64..5.0, 48), sy in 0.0f64..3.0, sx in 0.0f64..3.0) {
            let g = Grid::from_vec(Shape::new_2d(6, 8), vals.clone()).unwrap();
            let s = gaussian_smooth(&g, &[sy, sx]).unwrap();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s.data().iter().all(|&v| v >= lo && v <= hi));
        }
    }
}
