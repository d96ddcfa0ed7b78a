//! Lineage post-processing and the `L B E P` track file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, LabelImage, Shape};

use super::Track;

/// One line of a track file: label, first frame, last frame, parent label
/// (0 for none).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrackRecord {
    pub label: u32,
    pub begin: usize,
    pub end: usize,
    pub parent: u32,
}

/// Pixel indices per label ID.
fn members(labels: &LabelImage) -> BTreeMap<u32, Vec<usize>> {
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &v) in labels.data().iter().enumerate() {
        if v != 0 {
            out.entry(v).or_default().push(i);
        }
    }
    out
}

/// Paints `pixels` moved by `offset` (padded zyx) onto background pixels of `out`.
fn paint_translated(out: &mut LabelImage, pixels: &[usize], offset: [i64; 3], id: u32) {
    let shape = out.shape();
    let ext = shape.zyx();
    for &p in pixels {
        let c = shape.coords(p);
        let mut q = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            let v = c[a] as i64 + offset[a];
            if v < 0 || v >= ext[a] as i64 {
                inside = false;
                break;
            }
            q[a] = v as usize;
        }
        if inside {
            let idx = shape.index(q[0], q[1], q[2]);
            if out.data()[idx] == 0 {
                out.data_mut()[idx] = id;
            }
        }
    }
}

fn padded(shape: Shape, logical: &[f64]) -> [f64; 3] {
    let mut p = [0.0; 3];
    p[3 - shape.ndim()..].copy_from_slice(logical);
    p
}

/// Gap filling, orphan removal and empty-frame replacement.
///
/// Returns label frames carrying track IDs and the lineage records read off
/// those frames. Frames between two assignments of a track receive the
/// earlier mask translated to the linearly interpolated centroid. A parent
/// whose children start after a gap is interpolated toward the midpoint of
/// the children. Tracks of length one without parent and children are
/// dropped. A frame without any tracked object is replaced by the nearest
/// nonempty frame (the earlier one on ties).
pub fn postprocess_lineage(
    tracks: &[Track],
    labels: &[LabelImage],
) -> Result<(Vec<LabelImage>, Vec<TrackRecord>)> {
    let Some(first) = labels.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let shape = first.shape();
    let pixels: Vec<BTreeMap<u32, Vec<usize>>> = labels.iter().map(members).collect();
    let mut children: BTreeMap<u32, Vec<&Track>> = BTreeMap::new();
    for t in tracks {
        if t.parent_id != 0 {
            children.entry(t.parent_id).or_default().push(t);
        }
    }
    let kept: Vec<&Track> = tracks
        .iter()
        .filter(|t| t.assignments.len() > 1 || t.parent_id != 0 || children.contains_key(&t.id))
        .collect();

    let object_pixels = |t: usize, id: u32| -> Result<&Vec<usize>> {
        pixels[t]
            .get(&id)
            .ok_or(Error::MissingObject { frame: t, id })
    };

    let mut out: Vec<LabelImage> = vec![Grid::zeros(shape); labels.len()];
    for track in &kept {
        for (&t, stats) in &track.assignments {
            for &p in object_pixels(t, stats.id)? {
                out[t].data_mut()[p] = track.id;
            }
        }
    }

    for track in &kept {
        let mut anchors: Vec<(usize, [f64; 3])> = track
            .assignments
            .iter()
            .map(|(&t, s)| (t, padded(shape, &s.centroid)))
            .collect();
        if let Some(kids) = children.get(&track.id) {
            let start = kids.iter().map(|k| k.first_time()).min().expect("nonempty");
            let starts: Vec<&Track> = kids
                .iter()
                .copied()
                .filter(|k| k.first_time() == start)
                .collect();
            let mut mid = [0.0; 3];
            for k in &starts {
                let c = padded(shape, &k.assignments[&start].centroid);
                for a in 0..3 {
                    mid[a] += c[a] / starts.len() as f64;
                }
            }
            if start > track.last_assigned_time() + 1 {
                anchors.push((start, mid));
            }
        }
        for pair in anchors.windows(2) {
            let ((ta, ca), (tb, cb)) = (pair[0], pair[1]);
            if tb <= ta + 1 {
                continue;
            }
            let src = object_pixels(ta, track.assignments[&ta].id)?;
            for g in ta + 1..tb {
                let f = (g - ta) as f64 / (tb - ta) as f64;
                let offset = [0, 1, 2].map(|a| (f * (cb[a] - ca[a])).round() as i64);
                paint_translated(&mut out[g], src, offset, track.id);
            }
        }
    }

    let nonempty: Vec<usize> = (0..out.len())
        .filter(|&t| out[t].data().iter().any(|&v| v != 0))
        .collect();
    if !nonempty.is_empty() {
        for t in 0..out.len() {
            if nonempty.binary_search(&t).is_ok() {
                continue;
            }
            let nearest = *nonempty
                .iter()
                .min_by_key(|&&s| (s.abs_diff(t), s))
                .expect("nonempty");
            out[t] = out[nearest].clone();
        }
    }

    let parents: BTreeMap<u32, u32> = kept.iter().map(|t| (t.id, t.parent_id)).collect();
    let mut span: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (t, frame) in out.iter().enumerate() {
        let ids: BTreeSet<u32> = frame.data().iter().copied().filter(|&v| v != 0).collect();
        for id in ids {
            span.entry(id).and_modify(|s| s.1 = t).or_insert((t, t));
        }
    }
    let records = span
        .into_iter()
        .map(|(label, (begin, end))| TrackRecord {
            label,
            begin,
            end,
            parent: parents.get(&label).copied().unwrap_or(0),
        })
        .collect();
    Ok((out, records))
}

/// Track file contents, one `L B E P` line per record in label order.
pub fn format_track_records(records: &[TrackRecord]) -> String {
    let mut sorted = records.to_vec();
    sorted.sort();
    sorted
        .iter()
        .map(|r| format!("{} {} {} {}\n", r.label, r.begin, r.end, r.parent))
        .collect()
}

pub fn parse_track_records(text: &str, path: &Path) -> Result<Vec<TrackRecord>> {
    let bad = |line: usize, message: &str| Error::TrackFile {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad(n + 1, "expected 4 columns"));
        }
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| bad(n + 1, &format!("not a non-negative integer: {s}")))
        };
        let record = TrackRecord {
            label: num(fields[0])? as u32,
            begin: num(fields[1])? as usize,
            end: num(fields[2])? as usize,
            parent: num(fields[3])? as u32,
        };
        if record.label == 0 || record.end < record.begin {
            return Err(bad(n + 1, "label must be positive and end >= begin"));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_track_file(path: &Path, records: &[TrackRecord]) -> Result<()> {
    crate::io::write_atomic(path, format_track_records(records).as_bytes())
}

pub fn parse_track_file(path: &Path) -> Result<Vec<TrackRecord>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    parse_track_records(&std::fs::read_to_string(path)?, path)
}
