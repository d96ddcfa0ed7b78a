//! Exact solver for the coupled matching problem.
//!
//! Every track sends one unit of flow: to a candidate (link), to a split
//! node (which then feeds both of its candidates) or to disappearance.
//! Every candidate absorbs at most one unit; candidates left over are
//! appearances at zero cost. The binary selection problem is solved by
//! depth-first branch and bound over tracks. The bound at each node sums,
//! for every undecided track, the cheapest outcome still compatible with
//! the candidates already taken, which never overestimates.
//!
//! Ties are broken by the outcome order per track: cost, then link before
//! split before disappearance, then lowest candidate index. Earlier tracks
//! take precedence.

use super::graph::{MatchGraph, NodeKind};

/// The fate of one track in a matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Link(usize),
    Split(usize, usize),
    Disappear,
}

impl Outcome {
    fn rank(&self) -> u8 {
        match self {
            Outcome::Link(_) => 0,
            Outcome::Split(..) => 1,
            Outcome::Disappear => 2,
        }
    }

    fn candidates(&self) -> (Option<usize>, Option<usize>) {
        match *self {
            Outcome::Link(c) => (Some(c), None),
            Outcome::Split(a, b) => (Some(a), Some(b)),
            Outcome::Disappear => (None, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `(track ID, candidate ID)`.
    pub links: Vec<(u32, u32)>,
    /// `(track ID, candidate ID, candidate ID)`.
    pub splits: Vec<(u32, u32, u32)>,
    pub disappeared: Vec<u32>,
    pub appeared: Vec<u32>,
    pub total_cost: f64,
    /// Outcome per track, indexed like `MatchGraph::track_ids`.
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, Copy)]
struct Option_ {
    outcome: Outcome,
    cost: f64,
}

/// Outcomes available to every track, read off the graph edges.
pub(crate) fn track_options(graph: &MatchGraph) -> Vec<Vec<(Outcome, f64)>> {
    let mut options = vec![Vec::new(); graph.track_ids.len()];
    for e in &graph.edges {
        let NodeKind::Track(s) = graph.nodes[e.from] else {
            continue;
        };
        let outcome = match graph.nodes[e.to] {
            NodeKind::Candidate(c) => Outcome::Link(c),
            NodeKind::Split(a, b) => Outcome::Split(a, b),
            NodeKind::Disappearance => Outcome::Disappear,
            _ => continue,
        };
        options[s].push((outcome, e.cost));
    }
    options
}

struct Search<'a> {
    options: &'a [Vec<Option_>],
    used: Vec<bool>,
    chosen: Vec<usize>,
    best_cost: f64,
    best: Option<Vec<usize>>,
}

impl Search<'_> {
    fn feasible(&self, o: &Outcome) -> bool {
        let (a, b) = o.candidates();
        a.is_none_or(|c| !self.used[c]) && b.is_none_or(|c| !self.used[c])
    }

    fn mark(&mut self, o: &Outcome, value: bool) {
        let (a, b) = o.candidates();
        if let Some(c) = a {
            self.used[c] = value;
        }
        if let Some(c) = b {
            self.used[c] = value;
        }
    }

    fn bound(&self, from: usize) -> f64 {
        self.options[from..]
            .iter()
            .map(|opts| {
                opts.iter()
                    .find(|o| self.feasible(&o.outcome))
                    .map_or(f64::INFINITY, |o| o.cost)
            })
            .sum()
    }

    fn descend(&mut self, depth: usize, cost: f64) {
        if depth == self.options.len() {
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best = Some(self.chosen.clone());
            }
            return;
        }
        for k in 0..self.options[depth].len() {
            let opt = self.options[depth][k];
            if !self.feasible(&opt.outcome) {
                continue;
            }
            let next = cost + opt.cost;
            if next >= self.best_cost {
                // options are sorted by cost
                break;
            }
            self.mark(&opt.outcome, true);
            if next + self.bound(depth + 1) < self.best_cost {
                self.chosen.push(k);
                self.descend(depth + 1, next);
                self.chosen.pop();
            }
            self.mark(&opt.outcome, false);
        }
    }
}

/// Provably optimal outcome assignment for the graph.
pub fn solve_matching(graph: &MatchGraph) -> MatchResult {
    let raw = track_options(graph);
    let options: Vec<Vec<Option_>> = raw
        .into_iter()
        .map(|opts| {
            let disappear = opts
                .iter()
                .filter(|(o, _)| *o == Outcome::Disappear)
                .map(|&(_, c)| c)
                .fold(f64::INFINITY, f64::min);
            // anything strictly dearer than disappearing is dominated by it
            let mut kept: Vec<Option_> = opts
                .into_iter()
                .filter(|&(o, c)| o == Outcome::Disappear || c <= disappear)
                .map(|(outcome, cost)| Option_ { outcome, cost })
                .collect();
            kept.sort_by(|a, b| {
                a.cost
                    .total_cmp(&b.cost)
                    .then(a.outcome.rank().cmp(&b.outcome.rank()))
                    .then(a.outcome.candidates().cmp(&b.outcome.candidates()))
            });
            kept.dedup_by(|a, b| a.outcome == b.outcome);
            kept
        })
        .collect();

    let mut search = Search {
        options: &options,
        used: vec![false; graph.candidate_ids.len()],
        chosen: Vec::with_capacity(options.len()),
        best_cost: f64::INFINITY,
        best: None,
    };
    search.descend(0, 0.0);
    let choice = search.best.unwrap_or_default();
    let outcomes: Vec<Outcome> = choice
        .iter()
        .enumerate()
        .map(|(s, &k)| options[s][k].outcome)
        .collect();

    let mut result = MatchResult {
        links: Vec::new(),
        splits: Vec::new(),
        disappeared: Vec::new(),
        appeared: Vec::new(),
        total_cost: 0.0,
        outcomes: outcomes.clone(),
    };
    let mut taken = vec![false; graph.candidate_ids.len()];
    for (s, (&k, outcome)) in choice.iter().zip(&outcomes).enumerate() {
        result.total_cost += options[s][k].cost;
        let track = graph.track_ids[s];
        match *outcome {
            Outcome::Link(c) => {
                taken[c] = true;
                result.links.push((track, graph.candidate_ids[c]));
            }
            Outcome::Split(a, b) => {
                taken[a] = true;
                taken[b] = true;
                result
                    .splits
                    .push((track, graph.candidate_ids[a], graph.candidate_ids[b]));
            }
            Outcome::Disappear => result.disappeared.push(track),
        }
    }
    result.appeared = graph
        .candidate_ids
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(&c, _)| c)
        .collect();
    result
}
