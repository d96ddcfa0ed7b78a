//! Translation estimation by phase correlation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, Grid};

/// Regularizes bins of the cross-power spectrum with vanishing magnitude.
const EPS: f64 = 1e-12;

/// Minimum crop extent along every logical axis.
pub const MIN_CROP_EXTENT: usize = 8;

/// Integer displacement `d` (logical axis order) such that `moved` is
/// approximately `reference` translated by `d`.
///
/// The peak of the inverse normalized cross-power spectrum is mapped to
/// signed shifts in `(-N/2, N/2]` per axis; ties resolve to the lowest flat
/// index. Both crops are mean-subtracted first.
pub fn estimate_shift(reference: &Grid<f64>, moved: &Grid<f64>) -> Result<Vec<i64>> {
    phase_correlation(reference, moved).map(|e| e.shift)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftEstimate {
    pub shift: Vec<i64>,
    /// Peak height in standard deviations above the mean of the
    /// correlation surface. Unrelated noise crops rarely exceed ~5.
    pub significance: f64,
}

/// [`estimate_shift`] plus the significance of its peak.
pub fn phase_correlation(reference: &Grid<f64>, moved: &Grid<f64>) -> Result<ShiftEstimate> {
    ensure_same_shape(reference.shape(), moved.shape())?;
    let shape = reference.shape();
    if let Some(&e) = shape.dims().iter().find(|&&e| e < MIN_CROP_EXTENT) {
        return Err(Error::InvalidParameter(format!(
            "phase correlation needs at least {MIN_CROP_EXTENT} px per axis, got {e}"
        )));
    }
    let ext = shape.zyx();
    let mut a = centered_complex(reference);
    let mut b = centered_complex(moved);
    let mut planner = FftPlanner::new();
    fft_nd(&mut planner, &mut a, ext, false);
    fft_nd(&mut planner, &mut b, ext, false);
    let mut r: Vec<Complex<f64>> = a
        .iter()
        .zip(&b)
        .map(|(fa, fb)| {
            let c = fa.conj() * fb;
            c / c.norm().max(EPS)
        })
        .collect();
    fft_nd(&mut planner, &mut r, ext, true);

    let mut best = 0usize;
    for (i, v) in r.iter().enumerate() {
        if v.re > r[best].re {
            best = i;
        }
    }
    let n = r.len() as f64;
    let mean = r.iter().map(|v| v.re).sum::<f64>() / n;
    let var = r.iter().map(|v| (v.re - mean).powi(2)).sum::<f64>() / n;
    let significance = if var > 0.0 {
        (r[best].re - mean) / var.sqrt()
    } else {
        0.0
    };
    let peak = shape.coords(best);
    let signed: Vec<i64> = (0..3)
        .map(|a| {
            let n = ext[a] as i64;
            let p = peak[a] as i64;
            if p > n / 2 {
                p - n
            } else {
                p
            }
        })
        .collect();
    Ok(ShiftEstimate {
        shift: signed[3 - shape.ndim()..].to_vec(),
        significance,
    })
}

fn centered_complex(g: &Grid<f64>) -> Vec<Complex<f64>> {
    let mean = g.data().iter().sum::<f64>() / g.len() as f64;
    g.data()
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect()
}

/// In-place separable N-d FFT over padded `[z, y, x]` extents.
fn fft_nd(
    planner: &mut FftPlanner<f64>,
    data: &mut [Complex<f64>],
    ext: [usize; 3],
    inverse: bool,
) {
    let strides = [ext[1] * ext[2], ext[2], 1];
    let mut line = Vec::new();
    for axis in 0..3 {
        let n = ext[axis];
        if n == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        line.resize(n, Complex::new(0.0, 0.0));
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for i in 0..ext[others[0]] {
            for j in 0..ext[others[1]] {
                let start = i * strides[others[0]] + j * strides[others[1]];
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + k * strides[axis]];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * strides[axis]] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(shape: Shape, seed: u64) -> Grid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_vec(shape, (0..shape.len()).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    fn roll(g: &Grid<f64>, shift: &[i64]) -> Grid<f64> {
        let shape = g.shape();
        let ext = shape.zyx();
        let mut s = [0i64; 3];
        s[3 - shift.len()..].copy_from_slice(shift);
        let mut out = g.clone();
        for i in 0..shape.len() {
            let c = shape.coords(i);
            let d: Vec<usize> = (0..3)
                .map(|a| (c[a] as i64 + s[a]).rem_euclid(ext[a] as i64) as usize)
                .collect();
            out.data_mut()[shape.index(d[0], d[1], d[2])] = g.data()[i];
        }
        out
    }

    /// Circular cross-correlation argmax by direct summation.
    fn brute_shift(a: &Grid<f64>, b: &Grid<f64>) -> Vec<i64> {
        let [_, h, w] = a.shape().zyx();
        let mut best = (f64::NEG_INFINITY, 0i64, 0i64);
        for dy in 0..h as i64 {
            for dx in 0..w as i64 {
                let mut acc = 0.0;
                for y in 0..h {
                    for x in 0..w {
                        let yy = (y as i64 + dy).rem_euclid(h as i64) as usize;
                        let xx = (x as i64 + dx).rem_euclid(w as i64) as usize;
                        acc += a.at(0, y, x) * b.at(0, yy, xx);
                    }
                }
                if acc > best.0 {
                    best = (acc, dy, dx);
                }
            }
        }
        let wrap = |p: i64, n: i64| if p > n / 2 { p - n } else { p };
        vec![wrap(best.1, h as i64), wrap(best.2, w as i64)]
    }

    #[test]
    fn identical_crops_give_zero() {
        let g = textured(Shape::new_2d(16, 16), 1);
        assert_eq!(estimate_shift(&g, &g).unwrap(), vec![0, 0]);
    }

    #[test]
    fn recovers_circular_shift() {
        let g = textured(Shape::new_2d(32, 24), 2);
        let moved = roll(&g, &[3, -2]);
        assert_eq!(estimate_shift(&g, &moved).unwrap(), vec![3, -2]);
        assert_eq!(brute_shift(&g, &moved), vec![3, -2]);
    }

    #[test]
    fn recovers_3d_shift() {
        let g = textured(Shape::new_3d(8, 16, 12), 3);
        let moved = roll(&g, &[1, -4, 5]);
        assert_eq!(estimate_shift(&g, &moved).unwrap(), vec![1, -4, 5]);
    }

    #[test]
    fn noise_pair_is_total() {
        let a = textured(Shape::new_2d(20, 20), 4);
        let b = textured(Shape::new_2d(20, 20), 5);
        let d = estimate_shift(&a, &b).unwrap();
        assert!(d.iter().all(|&v| v > -10 && v <= 10));
        let flat = Grid::filled(Shape::new_2d(8, 8), 3.0);
        assert_eq!(estimate_shift(&flat, &flat).unwrap(), vec![0, 0]);
    }

    #[test]
    fn exact_shift_has_delta_significance() {
        // A pure delta over N samples sits sqrt(N - 1) deviations above its mean.
        let g = textured(Shape::new_2d(32, 32), 7);
        let e = phase_correlation(&g, &roll(&g, &[4, 9])).unwrap();
        assert_eq!(e.shift, vec![4, 9]);
        assert!(
            (e.significance - 1023f64.sqrt()).abs() < 1e-6,
            "{}",
            e.significance
        );
    }

    #[test]
    fn unrelated_crops_are_not_significant() {
        for seed in 0..20 {
            let a = textured(Shape::new_2d(64, 64), 100 + seed);
            let b = textured(Shape::new_2d(64, 64), 200 + seed);
            let e = phase_correlation(&a, &b).unwrap();
            assert!(e.significance < 6.0, "seed {seed}: {}", e.significance);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = textured(Shape::new_2d(8, 8), 6);
        let b = textured(Shape::new_2d(8, 9), 6);
        assert!(estimate_shift(&a, &b).is_err());
        let c = textured(Shape::new_2d(4, 8), 6);
        assert!(estimate_shift(&c, &c).is_err());
    }

    #[test]
    fn random_shifts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..10 {
            let g = textured(Shape::new_2d(12, 12), 100 + k);
            let s = vec![rng.gen_range(-3..=3), rng.gen_range(-3..=3)];
            let moved = roll(&g, &s);
            assert_eq!(estimate_shift(&g, &moved).unwrap(), brute_shift(&g, &moved));
        }
    }
}
