//! Solves a tiny hand-built matching problem: two tracks, three
//! candidates, one plausible division.

use celldist::track::{solve_matching, MatchGraph};

fn main() {
    // Disappearing costs 150 (largest ROI edge); appearing is free.
    let mut g = MatchGraph::new(vec![1, 2], vec![10, 11, 12], 150.0);
    g.add_link(0, 0, 2.0);
    g.add_link(0, 1, 9.0);
    g.add_link(1, 1, 6.5);
    g.add_link(1, 2, 6.0);
    g.add_split(1, 1, 2, 0.8);
    let m = solve_matching(&g);
    println!("links       {:?}", m.links);
    println!("splits      {:?}", m.splits);
    println!("disappeared {:?}", m.disappeared);
    println!("appeared    {:?}", m.appeared);
    println!("total cost  {}", m.total_cost);
}
