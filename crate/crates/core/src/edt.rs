//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas scheme: one 1D pass per axis over
//! squared distances. Squared outputs are integers held in `f64`, so they
//! are exact for any grid that fits in memory.

use crate::grid::Grid;

const UNREACHED: f64 = 1e30;

/// Squared distance from every element to the nearest background element
/// (`false`). Background elements hold 0. If the grid has no background at
/// all, every element holds the squared image diagonal.
pub fn squared_edt(mask: &Grid<bool>) -> Grid<f64> {
    let shape = mask.shape();
    let mut out = mask.map(|&fg| if fg { UNREACHED } else { 0.0 });
    if out.data().iter().all(|&v| v >= UNREACHED) {
        let d2 = shape.diagonal().powi(2);
        return Grid::filled(shape, d2);
    }
    let [nz, ny, nx] = shape.zyx();
    let longest = nz.max(ny).max(nx);
    let mut scratch = EnvelopeScratch::new(longest);
    let mut line = vec![0.0; longest];

    // x
    for z in 0..nz {
        for y in 0..ny {
            let base = shape.index(z, y, 0);
            line[..nx].copy_from_slice(&out.data()[base..base + nx]);
            scratch.transform(&line[..nx]);
            out.data_mut()[base..base + nx].copy_from_slice(&scratch.result[..nx]);
        }
    }
    // y
    if ny > 1 {
        for z in 0..nz {
            for x in 0..nx {
                pass_strided(&mut out, &mut scratch, &mut line, ny, |i| {
                    shape.index(z, i, x)
                });
            }
        }
    }
    // z
    if nz > 1 {
        for y in 0..ny {
            for x in 0..nx {
                pass_strided(&mut out, &mut scratch, &mut line, nz, |i| {
                    shape.index(i, y, x)
                });
            }
        }
    }
    out
}

fn pass_strided(
    out: &mut Grid<f64>,
    scratch: &mut EnvelopeScratch,
    line: &mut [f64],
    n: usize,
    index: impl Fn(usize) -> usize,
) {
    for (i, slot) in line[..n].iter_mut().enumerate() {
        *slot = out.data()[index(i)];
    }
    scratch.transform(&line[..n]);
    for i in 0..n {
        out.data_mut()[index(i)] = scratch.result[i];
    }
}

/// Euclidean distance to the nearest background element.
///
/// An all-foreground grid has no background; its distances are clamped to
/// the length of the image diagonal.
pub fn euclidean_distance_transform(mask: &Grid<bool>) -> Grid<f64> {
    squared_edt(mask).map(|&d2| d2.sqrt())
}

struct EnvelopeScratch {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
    result: Vec<f64>,
}

impl EnvelopeScratch {
    fn new(n: usize) -> Self {
        EnvelopeScratch {
            vertices: vec![0; n],
            bounds: vec![0.0; n + 1],
            result: vec![0.0; n],
        }
    }

    /// 1D squared distance transform of the sampled function `f`.
    fn transform(&mut self, f: &[f64]) {
        let n = f.len();
        // Elements still at UNREACHED are skipped as parabola roots; if the
        // whole line is unreached it stays unreached.
        let mut k: isize = -1;
        for q in 0..n {
            if f[q] >= UNREACHED {
                continue;
            }
            let qf = q as f64;
            loop {
                if k < 0 {
                    k = 0;
                    self.vertices[0] = q;
                    self.bounds[0] = f64::NEG_INFINITY;
                    self.bounds[1] = f64::INFINITY;
                    break;
                }
                let v = self.vertices[k as usize];
                let vf = v as f64;
                let s = ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * qf - 2.0 * vf);
                if s <= self.bounds[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.vertices[k as usize] = q;
                self.bounds[k as usize] = s;
                self.bounds[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            self.result[..n].fill(UNREACHED);
            return;
        }
        let mut j = 0usize;
        for q in 0..n {
            let qf = q as f64;
            while self.bounds[j + 1] < qf {
                j += 1;
            }
            let v = self.vertices[j];
            let d = qf - v as f64;
            self.result[q] = d * d + f[v];
        }
    }
}
