//! Recovers a circular shift of a random texture.

use celldist::track::estimate_shift;
use celldist::{Grid, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> celldist::Result<()> {
    let (h, w) = (64, 96);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
    let reference = Grid::from_vec(Shape::new_2d(h, w), data)?;
    for (dy, dx) in [(0i64, 0i64), (5, -7), (-20, 31), (31, 47)] {
        let mut moved = Grid::zeros(reference.shape());
        for y in 0..h {
            for x in 0..w {
                let sy = (y as i64 + dy).rem_euclid(h as i64) as usize;
                let sx = (x as i64 + dx).rem_euclid(w as i64) as usize;
                moved.set(&[sy, sx], reference.at(0, y, x))?;
            }
        }
        let est = estimate_shift(&reference, &moved)?;
        println!("applied ({dy:>3}, {dx:>3})  estimated {est:?}");
    }
    Ok(())
}
