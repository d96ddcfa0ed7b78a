//! Coupled min-cost-flow matching graph.
//!
//! Nodes: source, sink, one node per active track and per candidate object,
//! an appearance node, a disappearance node and one split node per
//! unordered candidate pair reachable from a common track. A split node has
//! exactly two outgoing edges (to its two candidates); the coupling
//! constraint forces flow on both whenever the node is used.

use crate::error::Result;
use crate::stats::ObjectStats;

use super::{matching_cost, split_cost, Track, TrackingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Source,
    Sink,
    /// Index into [`MatchGraph::track_ids`].
    Track(usize),
    /// Index into [`MatchGraph::candidate_ids`].
    Candidate(usize),
    Appearance,
    Disappearance,
    /// Candidate indices, first < second.
    Split(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchGraph {
    pub nodes: Vec<NodeKind>,
    pub edges: Vec<Edge>,
    pub track_ids: Vec<u32>,
    pub candidate_ids: Vec<u32>,
}

const SOURCE: usize = 0;
const SINK: usize = 1;
const APPEAR: usize = 2;
const DISAPPEAR: usize = 3;

impl MatchGraph {
    /// Graph with the fixed nodes, one node per track and candidate, source,
    /// appearance and disappearance edges. Link and split edges are added
    /// separately.
    pub fn new(
        track_ids: Vec<u32>,
        candidate_ids: Vec<u32>,
        disappearance_cost: f64,
    ) -> MatchGraph {
        let mut g = MatchGraph {
            nodes: vec![
                NodeKind::Source,
                NodeKind::Sink,
                NodeKind::Appearance,
                NodeKind::Disappearance,
            ],
            edges: Vec::new(),
            track_ids,
            candidate_ids,
        };
        let n_tracks = g.track_ids.len();
        let n_cands = g.candidate_ids.len();
        for s in 0..n_tracks {
            g.nodes.push(NodeKind::Track(s));
        }
        for c in 0..n_cands {
            g.nodes.push(NodeKind::Candidate(c));
        }
        g.push_edge(SOURCE, APPEAR, 0.0, n_cands as u32);
        g.push_edge(DISAPPEAR, SINK, 0.0, n_tracks as u32);
        for s in 0..n_tracks {
            let node = g.track_node(s);
            g.push_edge(SOURCE, node, 0.0, 1);
            g.push_edge(node, DISAPPEAR, disappearance_cost, 1);
        }
        for c in 0..n_cands {
            let node = g.candidate_node(c);
            g.push_edge(APPEAR, node, 0.0, 1);
            g.push_edge(node, SINK, 0.0, 1);
        }
        g
    }

    fn push_edge(&mut self, from: usize, to: usize, cost: f64, capacity: u32) {
        self.edges.push(Edge {
            from,
            to,
            cost,
            capacity,
        });
    }

    pub fn track_node(&self, s: usize) -> usize {
        4 + s
    }

    pub fn candidate_node(&self, c: usize) -> usize {
        4 + self.track_ids.len() + c
    }

    pub fn source(&self) -> usize {
        SOURCE
    }

    pub fn sink(&self) -> usize {
        SINK
    }

    pub fn appearance(&self) -> usize {
        APPEAR
    }

    pub fn disappearance(&self) -> usize {
        DISAPPEAR
    }

    pub fn add_link(&mut self, track: usize, candidate: usize, cost: f64) {
        let (from, to) = (self.track_node(track), self.candidate_node(candidate));
        self.push_edge(from, to, cost, 1);
    }

    /// Node of the split event for the candidate pair, created on first use.
    pub fn split_node(&mut self, a: usize, b: usize) -> usize {
        let key = NodeKind::Split(a.min(b), a.max(b));
        if let Some(i) = self.nodes.iter().position(|&n| n == key) {
            return i;
        }
        self.nodes.push(key);
        let node = self.nodes.len() - 1;
        let (ca, cb) = (self.candidate_node(a.min(b)), self.candidate_node(a.max(b)));
        self.push_edge(node, ca, 0.0, 1);
        self.push_edge(node, cb, 0.0, 1);
        node
    }

    pub fn add_split(&mut self, track: usize, a: usize, b: usize, cost: f64) {
        let node = self.split_node(a, b);
        let from = self.track_node(track);
        self.push_edge(from, node, cost, 1);
    }

    pub fn split_nodes(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match *n {
            NodeKind::Split(a, b) => Some((i, a, b)),
            _ => None,
        })
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.from == node)
    }
}

/// Matching graph between active tracks and the objects of the next frame.
///
/// A track links only to candidates whose centroid lies inside its ROI.
/// Split edges run to every pair of such candidates. Appearance costs 0 and
/// disappearance the largest configured ROI edge. There is no merge node.
pub fn build_graph(
    active_tracks: &[&Track],
    candidates: &[ObjectStats],
    cfg: &TrackingConfig,
) -> Result<MatchGraph> {
    let ndim = candidates
        .first()
        .map(|c| c.ndim())
        .or_else(|| active_tracks.first().map(|t| t.last_stats().ndim()))
        .unwrap_or(2);
    let disappearance = cfg.disappearance_cost(ndim)?;
    let mut g = MatchGraph::new(
        active_tracks.iter().map(|t| t.id).collect(),
        candidates.iter().map(|c| c.id).collect(),
        disappearance,
    );
    for (s, track) in active_tracks.iter().enumerate() {
        let reachable: Vec<usize> = (0..candidates.len())
            .filter(|&c| track.roi.contains(&candidates[c].centroid))
            .collect();
        for &c in &reachable {
            g.add_link(s, c, matching_cost(track, &candidates[c]));
        }
        for (i, &a) in reachable.iter().enumerate() {
            for &b in &reachable[i + 1..] {
                g.add_split(
                    s,
                    a,
                    b,
                    split_cost(track, &candidates[a], &candidates[b], cfg, disappearance),
                );
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn single_link_graph() {
        let t = track_at(1, 50, &[100.0, 100.0], &[0.0, 0.0]);
        let c = stats_at(7, 50, &[102.0, 100.0]);
        let g = build_graph(&[&t], &[c], &TrackingConfig::default()).unwrap();
        let tn = g.track_node(0);
        let cn = g.candidate_node(0);
        let out: Vec<&Edge> = g.outgoing(tn).collect();
        assert_eq!(out.len(), 2);
        assert!(out.iter().any(|e| e.to == cn && e.cost == 2.0));
        assert!(out
            .iter()
            .any(|e| e.to == g.disappearance() && e.cost == 150.0));
        assert!(g
            .edges
            .iter()
            .any(|e| e.from == g.appearance() && e.to == cn && e.cost == 0.0));
        assert_eq!(g.split_nodes().count(), 0);
        assert!(!g.nodes.iter().any(|n| matches!(n, NodeKind::Split(..))));
    }

    #[test]
    fn two_candidates_make_one_split_node() {
        let t = track_at(1, 80, &[100.0, 100.0], &[0.0, 0.0]);
        let a = stats_at(1, 40, &[100.0, 96.0]);
        let b = stats_at(2, 40, &[100.0, 104.0]);
        let g = build_graph(&[&t], &[a, b], &TrackingConfig::default()).unwrap();
        let splits: Vec<_> = g.split_nodes().collect();
        assert_eq!(splits.len(), 1);
        let (node, _, _) = splits[0];
        let outs: Vec<&Edge> = g.outgoing(node).collect();
        assert_eq!(outs.len(), 2);
        let targets: Vec<usize> = outs.iter().map(|e| e.to).collect();
        assert_eq!(targets, vec![g.candidate_node(0), g.candidate_node(1)]);
        assert!(g
            .edges
            .iter()
            .any(|e| e.from == g.track_node(0) && e.to == node && e.cost == 0.0));
    }

    #[test]
    fn candidates_outside_roi_are_not_linked() {
        let t = track_at(1, 50, &[100.0, 100.0], &[0.0, 0.0]);
        let far = stats_at(3, 50, &[400.0, 400.0]);
        let g = build_graph(&[&t], &[far], &TrackingConfig::default()).unwrap();
        let cn = g.candidate_node(0);
        assert!(!g
            .edges
            .iter()
            .any(|e| e.from == g.track_node(0) && e.to == cn));
    }

    #[test]
    fn shared_split_node_has_several_inputs() {
        let t1 = track_at(1, 80, &[100.0, 100.0], &[0.0, 0.0]);
        let t2 = track_at(2, 80, &[110.0, 100.0], &[0.0, 0.0]);
        let a = stats_at(1, 40, &[100.0, 96.0]);
        let b = stats_at(2, 40, &[100.0, 104.0]);
        let g = build_graph(&[&t1, &t2], &[a, b], &TrackingConfig::default()).unwrap();
        let (node, _, _) = g.split_nodes().next().unwrap();
        assert_eq!(g.split_nodes().count(), 1);
        assert_eq!(g.edges.iter().filter(|e| e.to == node).count(), 2);
        assert_eq!(g.outgoing(node).count(), 2);
    }

    #[test]
    fn empty_candidates_leave_disappearance_only() {
        let t = track_at(1, 50, &[100.0, 100.0], &[0.0, 0.0]);
        let g = build_graph(&[&t], &[], &TrackingConfig::default()).unwrap();
        let out: Vec<&Edge> = g.outgoing(g.track_node(0)).collect();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, g.disappearance());
    }
}
