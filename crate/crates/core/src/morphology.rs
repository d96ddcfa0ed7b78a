//! Grayscale dilation, erosion and closing with a disk (2D) or ball (3D)
//! structuring element.
//!
//! Samples outside the image are ignored rather than padded, which keeps
//! dilation and erosion an adjoint pair on the bounded domain: closing is
//! extensive and idempotent.

use crate::grid::Grid;

/// Offsets `[dz, dy, dx]` of the discrete disk/ball `|o|² ≤ r²`.
pub fn ball_offsets(radius: usize, ndim: usize) -> Vec<[isize; 3]> {
    let r = radius as isize;
    let rz = if ndim == 3 { r } else { 0 };
    let mut out = Vec::new();
    for dz in -rz..=rz {
        for dy in -r..=r {
            for dx in -r..=r {
                if dz * dz + dy * dy + dx * dx <= r * r {
                    out.push([dz, dy, dx]);
                }
            }
        }
    }
    out
}

fn rank_filter(g: &Grid<f64>, radius: usize, take_max: bool) -> Grid<f64> {
    if radius == 0 {
        return g.clone();
    }
    let shape = g.shape();
    let offsets = ball_offsets(radius, shape.ndim());
    let [nz, ny, nx] = shape.zyx();
    let mut out = g.clone();
    let src = g.data();
    let dst = out.data_mut();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = if take_max {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                };
                for o in &offsets {
                    let zz = z as isize + o[0];
                    let yy = y as isize + o[1];
                    let xx = x as isize + o[2];
                    if zz < 0
                        || yy < 0
                        || xx < 0
                        || zz >= nz as isize
                        || yy >= ny as isize
                        || xx >= nx as isize
                    {
                        continue;
                    }
                    let v = src[shape.index(zz as usize, yy as usize, xx as usize)];
                    acc = if take_max { acc.max(v) } else { acc.min(v) };
                }
                dst[shape.index(z, y, x)] = acc;
            }
        }
    }
    out
}

pub fn grayscale_dilation(g: &Grid<f64>, radius: usize) -> Grid<f64> {
    rank_filter(g, radius, true)
}

pub fn grayscale_erosion(g: &Grid<f64>, radius: usize) -> Grid<f64> {
    rank_filter(g, radius, false)
}

/// Dilation followed by erosion.
pub fn grayscale_closing(g: &Grid<f64>, radius: usize) -> Grid<f64> {
    grayscale_erosion(&grayscale_dilation(g, radius), radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use proptest::prelude::*;

    #[test]
    fn radius_zero_is_identity() {
        let g = Grid::from_vec(Shape::new_2d(2, 3), vec![0.1, 0.5, 0.2, 0.9, 0.0, 0.3]).unwrap();
        assert_eq!(grayscale_closing(&g, 0), g);
    }

    #[test]
    fn one_pixel_gap_is_filled() {
        // two plateaus of 1 separated by a single column of 0
        let mut g = Grid::filled(Shape::new_2d(5, 7), 1.0);
        for y in 0..5 {
            g.set(&[y, 3], 0.0).unwrap();
        }
        let c = grayscale_closing(&g, 1);
        assert!(c.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn disk_offsets() {
        assert_eq!(ball_offsets(1, 2).len(), 5);
        assert_eq!(ball_offsets(2, 2).len(), 13);
        assert_eq!(ball_offsets(1, 3).len(), 7);
    }

    proptest! {
        #[test]
        fn closing_is_extensive_and_idempotent(vals in proptest::collection::vec(0.0f64..1.0, 63), r in 0usize..3) {
            let g = Grid::from_vec(Shape::new_2d(7, 9), vals).unwrap();
            let c = grayscale_closing(&g, r);
            prop_assert!(c.data().iter().zip(g.data()).all(|(a, b)| a >= b));
            prop_assert_eq!(grayscale_closing(&c, r), c);
        }
    }
}
