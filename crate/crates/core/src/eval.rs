//! Segmentation and tracking scores.
//!
//! A result object matches a reference object when it covers strictly more
//! than half of it; at most one result object can do so. `seg` is the mean
//! Jaccard index over reference objects (0 for unmatched ones) and
//! `det_simple` the F1 score of the same matching. Lineage errors compare
//! temporal links between matched objects. `op_ctb_proxy` replaces the
//! official tracking measure by a link-error ratio and is only a proxy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, LabelImage};
use crate::track::TrackRecord;

/// Reference-to-result matches of one frame with overlap statistics.
#[derive(Debug, Clone, Default)]
struct FrameMatch {
    /// reference ID -> (result ID, Jaccard)
    pairs: BTreeMap<u32, (u32, f64)>,
    n_reference: usize,
    n_result: usize,
}

fn sizes(labels: &LabelImage) -> BTreeMap<u32, usize> {
    let mut out = BTreeMap::new();
    for &v in labels.data() {
        if v != 0 {
            *out.entry(v).or_insert(0) += 1;
        }
    }
    out
}

fn match_frame(reference: &LabelImage, result: &LabelImage) -> Result<FrameMatch> {
    ensure_same_shape(reference.shape(), result.shape())?;
    let ref_sizes = sizes(reference);
    let res_sizes = sizes(result);
    let mut overlap: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&r, &s) in reference.data().iter().zip(result.data()) {
        if r != 0 && s != 0 {
            *overlap.entry((r, s)).or_insert(0) += 1;
        }
    }
    let mut pairs = BTreeMap::new();
    for (&(r, s), &n) in &overlap {
        let size_r = ref_sizes[&r];
        if 2 * n > size_r {
            let union = size_r + res_sizes[&s] - n;
            pairs.insert(r, (s, n as f64 / union as f64));
        }
    }
    Ok(FrameMatch {
        pairs,
        n_reference: ref_sizes.len(),
        n_result: res_sizes.len(),
    })
}

/// Mean Jaccard index over the reference objects of one frame.
pub fn seg_score(reference: &LabelImage, result: &LabelImage) -> Result<f64> {
    seg_score_sequence(
        std::slice::from_ref(reference),
        std::slice::from_ref(result),
    )
}

/// Object F1 of one frame. Two empty frames score 1.
pub fn det_simple(reference: &LabelImage, result: &LabelImage) -> Result<f64> {
    det_simple_sequence(
        std::slice::from_ref(reference),
        std::slice::from_ref(result),
    )
}

fn match_all(reference: &[LabelImage], result: &[LabelImage]) -> Result<Vec<FrameMatch>> {
    if reference.len() != result.len() {
        return Err(Error::InvalidParameter(format!(
            "{} reference frames vs {} result frames",
            reference.len(),
            result.len()
        )));
    }
    reference
        .iter()
        .zip(result)
        .map(|(r, s)| match_frame(r, s))
        .collect()
}

/// Mean Jaccard index over all reference objects of all frames.
pub fn seg_score_sequence(reference: &[LabelImage], result: &[LabelImage]) -> Result<f64> {
    let matches = match_all(reference, result)?;
    let n: usize = matches.iter().map(|m| m.n_reference).sum();
    if n == 0 {
        return Err(Error::EmptyReference(
            "reference contains no objects".into(),
        ));
    }
    let total: f64 = matches
        .iter()
        .flat_map(|m| m.pairs.values().map(|p| p.1))
        .sum();
    Ok(total / n as f64)
}

pub fn det_simple_sequence(reference: &[LabelImage], result: &[LabelImage]) -> Result<f64> {
    let matches = match_all(reference, result)?;
    let matched: usize = matches.iter().map(|m| m.pairs.len()).sum();
    let objects: usize = matches.iter().map(|m| m.n_reference + m.n_result).sum();
    Ok(if objects == 0 {
        1.0
    } else {
        2.0 * matched as f64 / objects as f64
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LineageErrors {
    /// Reference links without a counterpart in the result.
    pub missed_links: usize,
    /// Result links without a counterpart in the reference.
    pub wrong_links: usize,
    /// Reference divisions whose two parent-child links are not both
    /// present as divisions in the result.
    pub missed_divisions: usize,
    /// Number of reference links, the denominator of the proxy score.
    pub reference_links: usize,
}

type Node = (usize, u32);
type Link = (Node, Node);

/// Continuation links (same label in consecutive frames) and division links
/// (parent at its last frame to a child starting one frame later).
fn links(frames: &[LabelImage], lineage: &[TrackRecord]) -> (BTreeSet<Link>, BTreeSet<Link>) {
    let present: Vec<BTreeSet<u32>> = frames
        .iter()
        .map(|f| f.data().iter().copied().filter(|&v| v != 0).collect())
        .collect();
    let mut cont = BTreeSet::new();
    for t in 0..frames.len().saturating_sub(1) {
        for &l in present[t].intersection(&present[t + 1]) {
            cont.insert(((t, l), (t + 1, l)));
        }
    }
    let ends: BTreeMap<u32, usize> = lineage.iter().map(|r| (r.label, r.end)).collect();
    let mut div = BTreeSet::new();
    for child in lineage.iter().filter(|r| r.parent != 0) {
        let Some(&end) = ends.get(&child.parent) else {
            continue;
        };
        let b = child.begin;
        if b == end + 1
            && b < frames.len()
            && present[end].contains(&child.parent)
            && present[b].contains(&child.label)
        {
            div.insert(((end, child.parent), (b, child.label)));
        }
    }
    (cont, div)
}

/// Link-level comparison of a result lineage with the reference.
pub fn lineage_errors(
    ref_frames: &[LabelImage],
    ref_lineage: &[TrackRecord],
    res_frames: &[LabelImage],
    res_lineage: &[TrackRecord],
) -> Result<LineageErrors> {
    let matches = match_all(ref_frames, res_frames)?;
    // result object -> reference object, per frame
    let to_ref: Vec<BTreeMap<u32, u32>> = matches
        .iter()
        .map(|m| m.pairs.iter().map(|(&r, &(s, _))| (s, r)).collect())
        .collect();
    let map = |(t, s): Node| to_ref[t].get(&s).map(|&r| (t, r));
    let map_link = |(a, b): Link| Some((map(a)?, map(b)?));

    let (ref_cont, ref_div) = links(ref_frames, ref_lineage);
    let (res_cont, res_div) = links(res_frames, res_lineage);
    let ref_all: BTreeSet<Link> = ref_cont.union(&ref_div).copied().collect();

    let mut mapped = BTreeSet::new();
    let mut wrong = 0;
    for &l in res_cont.iter().chain(&res_div) {
        match map_link(l) {
            Some(m) if ref_all.contains(&m) => {
                mapped.insert(m);
            }
            _ => wrong += 1,
        }
    }
    let mapped_div: BTreeSet<Link> = res_div.iter().filter_map(|&l| map_link(l)).collect();

    let mut by_parent: BTreeMap<Node, Vec<Link>> = BTreeMap::new();
    for &l in &ref_div {
        by_parent.entry(l.0).or_default().push(l);
    }
    let missed_divisions = by_parent
        .values()
        .filter(|ls| !ls.iter().all(|l| mapped_div.contains(l)))
        .count();

    Ok(LineageErrors {
        missed_links: ref_all.difference(&mapped).count(),
        wrong_links: wrong,
        missed_divisions,
        reference_links: ref_all.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub seg: f64,
    pub det_simple: f64,
    pub missed_links: usize,
    pub wrong_links: usize,
    pub missed_divisions: usize,
    /// `1 - (missed + wrong) / reference links`, floored at 0.
    pub tra_proxy: f64,
    pub op_csb: f64,
    pub op_ctb_proxy: f64,
}

impl ScoreReport {
    pub fn new(seg: f64, det_simple: f64, errors: LineageErrors) -> ScoreReport {
        let bad = (errors.missed_links + errors.wrong_links) as f64;
        let tra_proxy = if errors.reference_links == 0 {
            if bad == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (1.0 - bad / errors.reference_links as f64).max(0.0)
        };
        ScoreReport {
            seg,
            det_simple,
            missed_links: errors.missed_links,
            wrong_links: errors.wrong_links,
            missed_divisions: errors.missed_divisions,
            tra_proxy,
            op_csb: 0.5 * (det_simple + seg),
            op_ctb_proxy: 0.5 * (seg + tra_proxy),
        }
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seg={:.6}", self.seg)?;
        writeln!(f, "det_simple={:.6}", self.det_simple)?;
        writeln!(f, "missed_links={}", self.missed_links)?;
        writeln!(f, "wrong_links={}", self.wrong_links)?;
        writeln!(f, "missed_divisions={}", self.missed_divisions)?;
        writeln!(f, "tra_proxy={:.6}", self.tra_proxy)?;
        writeln!(f, "op_csb={:.6}", self.op_csb)?;
        writeln!(f, "op_ctb_proxy={:.6}", self.op_ctb_proxy)
    }
}

/// Every score for a tracked result against a reference sequence.
pub fn score_sequences(
    ref_frames: &[LabelImage],
    ref_lineage: &[TrackRecord],
    res_frames: &[LabelImage],
    res_lineage: &[TrackRecord],
) -> Result<ScoreReport> {
    let seg = seg_score_sequence(ref_frames, res_frames)?;
    let det = det_simple_sequence(ref_frames, res_frames)?;
    let errors = lineage_errors(ref_frames, ref_lineage, res_frames, res_lineage)?;
    Ok(ScoreReport::new(seg, det, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Shape};
    use proptest::prelude::*;

    fn frame(w: usize, pixels: &[(usize, u32)]) -> LabelImage {
        let mut g = Grid::zeros(Shape::new_2d(1, w));
        for &(x, v) in pixels {
            g.data_mut()[x] = v;
        }
        g
    }

    fn row(values: &[u32]) -> LabelImage {
        Grid::from_vec(Shape::new_2d(1, values.len()), values.to_vec()).unwrap()
    }

    #[test]
    fn identical_and_empty() {
        let r = row(&[1, 1, 0, 2, 2, 2]);
        assert_eq!(seg_score(&r, &r).unwrap(), 1.0);
        assert_eq!(det_simple(&r, &r).unwrap(), 1.0);
        let empty = row(&[0; 6]);
        assert_eq!(seg_score(&r, &empty).unwrap(), 0.0);
        assert_eq!(det_simple(&r, &empty).unwrap(), 0.0);
        assert!(matches!(
            seg_score(&empty, &r),
            Err(Error::EmptyReference(_))
        ));
    }

    #[test]
    fn hand_counted_jaccard() {
        let reference = frame(14, &(0..10).map(|x| (x, 1)).collect::<Vec<_>>());
        // S: 6 px inside R, 2 outside -> |R ∪ S| = 12
        let result = frame(14, &(4..12).map(|x| (x, 9)).collect::<Vec<_>>());
        assert!((seg_score(&reference, &result).unwrap() - 6.0 / 12.0).abs() < 1e-12);
        // S: 6 px inside R, 4 outside -> |R ∪ S| = 14
        let result = frame(14, &(4..14).map(|x| (x, 9)).collect::<Vec<_>>());
        assert!((seg_score(&reference, &result).unwrap() - 6.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn half_coverage_does_not_match() {
        let reference = row(&[1, 1, 1, 1, 0]);
        let result = row(&[5, 5, 0, 0, 0]);
        assert_eq!(seg_score(&reference, &result).unwrap(), 0.0);
    }

    #[test]
    fn det_two_of_three() {
        let reference = row(&[1, 1, 0, 2, 2, 0, 3, 3, 0, 0]);
        let result = row(&[7, 7, 0, 8, 8, 0, 0, 0, 9, 9]);
        let d = det_simple(&reference, &result).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
    }

    fn two_track_fixture() -> (Vec<LabelImage>, Vec<TrackRecord>) {
        let frames = vec![
            row(&[1, 1, 0, 2, 2]),
            row(&[1, 1, 0, 2, 2]),
            row(&[1, 1, 0, 2, 2]),
        ];
        let lineage = vec![
            TrackRecord {
                label: 1,
                begin: 0,
                end: 2,
                parent: 0,
            },
            TrackRecord {
                label: 2,
                begin: 0,
                end: 2,
                parent: 0,
            },
        ];
        (frames, lineage)
    }

    #[test]
    fn identical_lineages_have_no_errors() {
        let (f, l) = two_track_fixture();
        let e = lineage_errors(&f, &l, &f, &l).unwrap();
        assert_eq!(
            (e.missed_links, e.wrong_links, e.missed_divisions),
            (0, 0, 0)
        );
        assert_eq!(e.reference_links, 4);
    }

    #[test]
    fn broken_track_misses_one_link() {
        let (f, l) = two_track_fixture();
        let res = vec![f[0].clone(), f[1].clone(), row(&[3, 3, 0, 2, 2])];
        let res_l = vec![
            TrackRecord {
                label: 1,
                begin: 0,
                end: 1,
                parent: 0,
            },
            TrackRecord {
                label: 2,
                begin: 0,
                end: 2,
                parent: 0,
            },
            TrackRecord {
                label: 3,
                begin: 2,
                end: 2,
                parent: 0,
            },
        ];
        let e = lineage_errors(&f, &l, &res, &res_l).unwrap();
        assert_eq!((e.missed_links, e.wrong_links), (1, 0));
    }

    #[test]
    fn swapped_identities_give_two_wrong_links() {
        // two cells cross: result swaps labels after frame 1
        let (f, l) = two_track_fixture();
        let res = vec![f[0].clone(), f[1].clone(), row(&[2, 2, 0, 1, 1])];
        let e = lineage_errors(&f, &l, &res, &l).unwrap();
        assert_eq!(e.wrong_links, 2);
        assert_eq!(e.missed_links, 2);
    }

    #[test]
    fn division_detection() {
        let f = vec![row(&[1, 1, 1, 1, 0]), row(&[2, 2, 0, 3, 3])];
        let l = vec![
            TrackRecord {
                label: 1,
                begin: 0,
                end: 0,
                parent: 0,
            },
            TrackRecord {
                label: 2,
                begin: 1,
                end: 1,
                parent: 1,
            },
            TrackRecord {
                label: 3,
                begin: 1,
                end: 1,
                parent: 1,
            },
        ];
        assert_eq!(lineage_errors(&f, &l, &f, &l).unwrap().missed_divisions, 0);
        let no_parents: Vec<TrackRecord> =
            l.iter().map(|r| TrackRecord { parent: 0, ..*r }).collect();
        let e = lineage_errors(&f, &l, &f, &no_parents).unwrap();
        assert_eq!((e.missed_divisions, e.missed_links), (1, 2));
    }

    #[test]
    fn report_combinations() {
        let r = ScoreReport::new(
            0.8,
            0.9,
            LineageErrors {
                reference_links: 10,
                missed_links: 1,
                ..Default::default()
            },
        );
        assert!((r.op_csb - 0.85).abs() < 1e-12);
        assert!((r.tra_proxy - 0.9).abs() < 1e-12);
        let text = r.to_string();
        assert!(text.starts_with("seg=0.800000\n"));
        assert_eq!(text.lines().count(), 8);
    }

    fn relabel(g: &LabelImage, perm: &[u32]) -> LabelImage {
        g.map(|&v| if v == 0 { 0 } else { perm[v as usize - 1] })
    }

    proptest! {
        #[test]
        fn seg_bounds_and_relabel_invariance(
            a in prop::collection::vec(0u32..4, 30),
            b in prop::collection::vec(0u32..4, 30),
        ) {
            prop_assume!(a.iter().any(|&v| v != 0));
            let (ra, rb) = (row(&a), row(&b));
            let s = seg_score(&ra, &rb).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            let perm = [30, 10, 20];
            let s2 = seg_score(&relabel(&ra, &perm), &relabel(&rb, &[7, 5, 6])).unwrap();
            prop_assert!((s - s2).abs() < 1e-12);
            let d = det_simple(&ra, &rb).unwrap();
            if d == 1.0 {
                prop_assert_eq!(ra.label_ids().len(), rb.label_ids().len());
            }
            prop_assert_eq!(seg_score(&ra, &ra).unwrap(), 1.0);
        }
    }
}
