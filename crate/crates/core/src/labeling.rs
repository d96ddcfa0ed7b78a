//! Connected-component labeling of binary grids.

use std::collections::VecDeque;

use crate::grid::{neighbors, Connectivity, Grid, LabelImage};

/// Labels maximal connected foreground regions `1..=n`.
///
/// IDs follow the raster order of each component's first element, so the
/// output is fully determined by the partition of the input.
pub fn connected_components(mask: &Grid<bool>, connectivity: Connectivity) -> LabelImage {
    let shape = mask.shape();
    let offsets = connectivity.offsets(shape.ndim());
    let mut labels = Grid::zeros(shape);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..shape.len() {
        if !mask.data()[start] || labels.data()[start] != 0 {
            continue;
        }
        next += 1;
        labels.data_mut()[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            for n in neighbors(shape, idx, &offsets) {
                if mask.data()[n] && labels.data()[n] == 0 {
                    labels.data_mut()[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    labels
}

/// Number of components, without materialising the label image.
pub fn count_components(mask: &Grid<bool>, connectivity: Connectivity) -> usize {
    connected_components(mask, connectivity).max_label() as usize
}
