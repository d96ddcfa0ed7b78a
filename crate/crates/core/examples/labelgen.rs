//! Cell and neighbor distance maps for two touching disks, printed as
//! coarse ASCII shading.

use celldist::labelgen::{make_representation_pair, LabelGenConfig};
use celldist::{DistanceMap, LabelImage, Shape};

fn disks() -> LabelImage {
    let shape = Shape::new_2d(24, 40);
    let mut labels = LabelImage::zeros(shape);
    for (id, cx) in [(1u32, 12.0), (2, 27.0)] {
        for y in 0..24 {
            for x in 0..40 {
                let d = ((y as f64 - 12.0).powi(2) + (x as f64 - cx).powi(2)).sqrt();
                if d <= 8.0 {
                    labels.set(&[y, x], id).unwrap();
                }
            }
        }
    }
    labels
}

fn show(title: &str, map: &DistanceMap) {
    const RAMP: &[u8] = b" .:-=+*#%@";
    println!("{title}");
    let [_, h, w] = map.shape().zyx();
    for y in 0..h {
        let row: String = (0..w)
            .map(|x| RAMP[(map.at(0, y, x) * (RAMP.len() - 1) as f64).round() as usize] as char)
            .collect();
        println!("  {row}");
    }
}

fn main() {
    let labels = disks();
    let pair = make_representation_pair(&labels, &LabelGenConfig::default());
    show("cell distance", &pair.cell);
    show("neighbor distance", &pair.neighbor);
}
