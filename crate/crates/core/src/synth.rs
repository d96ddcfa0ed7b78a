//! Synthetic ground truth: moving, touching and dividing disks (balls in
//! 3D) with rendered intensities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitBall, UnitCircle};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, LabelImage, Shape};
use crate::stats::{object_stats, ObjectStats};
use crate::track::TrackRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Image extents in logical axis order; 2 or 3 entries.
    pub extents: Vec<usize>,
    pub frames: usize,
    pub n_cells: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Speed range in px/frame.
    pub velocity_min: f64,
    pub velocity_max: f64,
    /// Per-frame uniform jitter amplitude added to each coordinate.
    pub jitter: f64,
    pub division_probability: f64,
    /// First frame in which daughters may appear.
    pub division_start: usize,
    /// Frames a cell must exist before it may divide. Daughters regrow to
    /// the parent volume over this many frames.
    pub min_cycle: usize,
    pub max_divisions: usize,
    /// Minimum boundary distance between cells; values ≤ 0 allow contact.
    pub min_gap: f64,
    /// Pairs placed in contact in the first frame.
    pub touching_pairs: usize,
    pub background: f64,
    /// Intensity added at a cell centre; the rim gets half of it.
    pub amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            extents: vec![256, 256],
            frames: 40,
            n_cells: 12,
            radius_min: 8.0,
            radius_max: 12.0,
            velocity_min: 0.5,
            velocity_max: 2.0,
            jitter: 0.3,
            division_probability: 0.02,
            division_start: 1,
            min_cycle: 5,
            max_divisions: 5,
            min_gap: 3.0,
            touching_pairs: 0,
            background: 20.0,
            amplitude: 100.0,
            noise_std: 5.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.extents.len() == 2 || self.extents.len() == 3) || self.extents.contains(&0) {
            return bad(format!(
                "extents must have 2 or 3 positive entries, got {:?}",
                self.extents
            ));
        }
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if !(self.radius_min >= 1.0 && self.radius_max >= self.radius_min) {
            return bad(format!(
                "invalid radius range [{}, {}]",
                self.radius_min, self.radius_max
            ));
        }
        if !(self.velocity_min >= 0.0 && self.velocity_max >= self.velocity_min)
            || self.jitter < 0.0
        {
            return bad("invalid velocity range or jitter".into());
        }
        if !(0.0..=1.0).contains(&self.division_probability) {
            return bad(format!(
                "division_probability must lie in [0, 1], got {}",
                self.division_probability
            ));
        }
        if self.noise_std < 0.0 || 0.5 * self.amplitude < 3.0 * self.noise_std {
            return bad(
                "cells must exceed the background by at least 3 noise standard deviations".into(),
            );
        }
        if 2 * self.touching_pairs > self.n_cells {
            return bad("touching_pairs needs two cells per pair".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub raw: Vec<Grid<f64>>,
    pub labels: Vec<LabelImage>,
    pub lineage: Vec<TrackRecord>,
    pub stats: Vec<Vec<ObjectStats>>,
    pub divisions: usize,
}

#[derive(Debug, Clone)]
struct Cell {
    id: u32,
    parent: u32,
    born: usize,
    pos: Vec<f64>,
    vel: Vec<f64>,
    radius: f64,
    /// Adult radius reached by regrowth.
    adult: f64,
}

const PLACEMENT_ATTEMPTS: usize = 20_000;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn random_direction(rng: &mut ChaCha8Rng, ndim: usize) -> Vec<f64> {
    if ndim == 2 {
        let [y, x]: [f64; 2] = UnitCircle.sample(rng);
        vec![y, x]
    } else {
        loop {
            let v: [f64; 3] = UnitBall.sample(rng);
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-6 {
                return v.iter().map(|c| c / n).collect();
            }
        }
    }
}

fn inside(pos: &[f64], r: f64, extents: &[usize]) -> bool {
    pos.iter()
        .zip(extents)
        .all(|(&p, &n)| p - r >= 0.0 && p + r <= n as f64 - 1.0)
}

fn clear_of(pos: &[f64], r: f64, others: &[Cell], gap: f64) -> bool {
    others
        .iter()
        .all(|o| distance(pos, &o.pos) >= r + o.radius + gap)
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    next_id: u32,
}

impl Generator<'_> {
    fn velocity(&mut self, ndim: usize) -> Vec<f64> {
        let speed = self
            .rng
            .gen_range(self.cfg.velocity_min..=self.cfg.velocity_max);
        random_direction(&mut self.rng, ndim)
            .into_iter()
            .map(|c| c * speed)
            .collect()
    }

    fn position(&mut self, r: f64) -> Vec<f64> {
        let extents = &self.cfg.extents;
        extents
            .iter()
            .map(|&n| self.rng.gen_range(r..=(n as f64 - 1.0 - r).max(r)))
            .collect()
    }

    fn new_cell(&mut self, pos: Vec<f64>, radius: f64) -> Cell {
        let vel = self.velocity(pos.len());
        let cell = Cell {
            id: self.next_id,
            parent: 0,
            born: 0,
            pos,
            vel,
            radius,
            adult: radius,
        };
        self.next_id += 1;
        cell
    }

    fn place(&mut self) -> Result<Vec<Cell>> {
        let cfg = self.cfg;
        let ndim = cfg.extents.len();
        let gap = cfg.min_gap;
        let mut cells: Vec<Cell> = Vec::new();
        let mut attempts = 0;
        while cells.len() < 2 * cfg.touching_pairs {
            attempts += 1;
            if attempts > PLACEMENT_ATTEMPTS * cfg.n_cells {
                return Err(Error::InfeasiblePacking(cfg.n_cells));
            }
            let ra = self.rng.gen_range(cfg.radius_min..=cfg.radius_max);
            let rb = self.rng.gen_range(cfg.radius_min..=cfg.radius_max);
            let a = self.position(ra);
            let u = random_direction(&mut self.rng, ndim);
            let b: Vec<f64> = a.iter().zip(&u).map(|(p, d)| p + d * (ra + rb)).collect();
            if inside(&b, rb, &cfg.extents)
                && clear_of(&a, ra, &cells, gap)
                && clear_of(&b, rb, &cells, gap)
            {
                let ca = self.new_cell(a, ra);
                let mut cb = self.new_cell(b, rb);
                cb.vel = ca.vel.clone();
                cells.push(ca);
                cells.push(cb);
            }
        }
        while cells.len() < cfg.n_cells {
            attempts += 1;
            if attempts > PLACEMENT_ATTEMPTS * cfg.n_cells {
                return Err(Error::InfeasiblePacking(cfg.n_cells));
            }
            let r = self.rng.gen_range(cfg.radius_min..=cfg.radius_max);
            let p = self.position(r);
            if inside(&p, r, &cfg.extents) && clear_of(&p, r, &cells, gap) {
                let c = self.new_cell(p, r);
                cells.push(c);
            }
        }
        Ok(cells)
    }

    /// Volume growth by `2^(1/min_cycle)` per frame, capped at the adult
    /// radius. Growth may close the gap to a neighbour but never overlaps
    /// it or leaves the image; blocked growth waits for the next frame.
    fn grow(&self, cells: &mut [Cell]) {
        let cfg = self.cfg;
        let factor = 2f64.powf(1.0 / (cfg.extents.len() * cfg.min_cycle.max(1)) as f64);
        for i in 0..cells.len() {
            if cells[i].radius >= cells[i].adult {
                continue;
            }
            let r = (cells[i].radius * factor).min(cells[i].adult);
            let fits = inside(&cells[i].pos, r, &cfg.extents)
                && (0..cells.len())
                    .filter(|&j| j != i)
                    .all(|j| distance(&cells[i].pos, &cells[j].pos) >= r + cells[j].radius);
            if fits {
                cells[i].radius = r;
            }
        }
    }

    /// Moves every cell; a move is undone and the velocity reversed when it
    /// leaves the image or brings two cells closer than both the gap and
    /// their current separation allow.
    fn advance(&mut self, cells: &mut [Cell]) {
        let cfg = self.cfg;
        for i in 0..cells.len() {
            let jitter: Vec<f64> = (0..cells[i].pos.len())
                .map(|_| {
                    if cfg.jitter > 0.0 {
                        self.rng.gen_range(-cfg.jitter..=cfg.jitter)
                    } else {
                        0.0
                    }
                })
                .collect();
            let r = cells[i].radius;
            let mut next: Vec<f64> = cells[i]
                .pos
                .iter()
                .zip(&cells[i].vel)
                .zip(&jitter)
                .map(|((p, v), j)| p + v + j)
                .collect();
            for (a, &n) in cfg.extents.iter().enumerate() {
                let hi = n as f64 - 1.0 - r;
                if next[a] < r || next[a] > hi {
                    cells[i].vel[a] = -cells[i].vel[a];
                    next[a] = cells[i].pos[a];
                }
            }
            let blocked = (0..cells.len()).filter(|&j| j != i).any(|j| {
                let o = &cells[j];
                let now = distance(&cells[i].pos, &o.pos);
                let need = (r + o.radius + cfg.min_gap).min(now);
                distance(&next, &o.pos) < need
            });
            if blocked {
                cells[i].vel.iter_mut().for_each(|v| *v = -*v);
            } else {
                cells[i].pos = next;
            }
        }
    }

    fn divide(&mut self, cells: &mut Vec<Cell>, t: usize, done: &mut usize) {
        let cfg = self.cfg;
        let ndim = cfg.extents.len();
        let mut i = 0;
        while i < cells.len() {
            let eligible = *done < cfg.max_divisions
                && t >= cfg.division_start
                && cells[i].born + cfg.min_cycle <= t
                && cells[i].born < t
                && cells[i].radius >= cells[i].adult;
            if !eligible || !self.rng.gen_bool(cfg.division_probability) {
                i += 1;
                continue;
            }
            let parent = cells[i].clone();
            let rd = parent.radius / 2f64.powf(1.0 / ndim as f64);
            let u = random_direction(&mut self.rng, ndim);
            let place = |s: f64| -> Vec<f64> {
                parent
                    .pos
                    .iter()
                    .zip(&u)
                    .map(|(p, d)| p + s * d * rd)
                    .collect()
            };
            let (a, b) = (place(1.0), place(-1.0));
            let others: Vec<Cell> = cells
                .iter()
                .filter(|c| c.id != parent.id)
                .cloned()
                .collect();
            let fits = |p: &Vec<f64>| {
                inside(p, rd, &cfg.extents) && clear_of(p, rd, &others, cfg.min_gap.min(0.0))
            };
            if !(fits(&a) && fits(&b)) {
                i += 1;
                continue;
            }
            let mut daughters = Vec::new();
            for (pos, s) in [(a, 1.0), (b, -1.0)] {
                let vel = parent
                    .vel
                    .iter()
                    .zip(&u)
                    .map(|(v, d)| v + 0.5 * s * d)
                    .collect();
                daughters.push(Cell {
                    id: self.next_id,
                    parent: parent.id,
                    born: t,
                    pos,
                    vel,
                    radius: rd,
                    adult: parent.adult,
                });
                self.next_id += 1;
            }
            cells.splice(i..=i, daughters);
            *done += 1;
            i += 2;
        }
    }
}

/// Labels: each pixel goes to the cell with the smallest normalized
/// distance among those covering it.
fn render_labels(cells: &[Cell], shape: Shape) -> LabelImage {
    let mut labels = Grid::zeros(shape);
    let mut best = vec![f64::INFINITY; shape.len()];
    let ndim = shape.ndim();
    for c in cells {
        let lo: Vec<usize> = c
            .pos
            .iter()
            .map(|&p| (p - c.radius).floor().max(0.0) as usize)
            .collect();
        let hi: Vec<usize> = c
            .pos
            .iter()
            .zip(shape.dims())
            .map(|(&p, &n)| ((p + c.radius).ceil() as usize).min(n - 1))
            .collect();
        let mut lo3 = [0usize; 3];
        let mut hi3 = [0usize; 3];
        lo3[3 - ndim..].copy_from_slice(&lo);
        hi3[3 - ndim..].copy_from_slice(&hi);
        let mut p3 = [0.0; 3];
        p3[3 - ndim..].copy_from_slice(&c.pos);
        for z in lo3[0]..=hi3[0] {
            for y in lo3[1]..=hi3[1] {
                for x in lo3[2]..=hi3[2] {
                    let d = ((z as f64 - p3[0]).powi(2)
                        + (y as f64 - p3[1]).powi(2)
                        + (x as f64 - p3[2]).powi(2))
                    .sqrt();
                    let n = d / c.radius;
                    let idx = shape.index(z, y, x);
                    if n <= 1.0 && n < best[idx] {
                        best[idx] = n;
                        labels.data_mut()[idx] = c.id;
                    }
                }
            }
        }
    }
    labels
}

/// Background plus a radial profile (1 at the centre, 1/2 at the rim) plus
/// Gaussian noise.
fn render_raw(
    cells: &[Cell],
    labels: &LabelImage,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Grid<f64>> {
    let shape = labels.shape();
    let noise =
        Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut out = Grid::filled(shape, cfg.background);
    for i in 0..shape.len() {
        let id = labels.data()[i];
        let mut v = cfg.background;
        if id != 0 {
            let c = cells
                .iter()
                .find(|c| c.id == id)
                .expect("label of a live cell");
            let pos = shape.logical(shape.coords(i).map(|v| v as f64));
            let n = distance(&pos, &c.pos) / c.radius;
            v += cfg.amplitude * (1.0 - 0.5 * n * n);
        }
        out.data_mut()[i] = v + if cfg.noise_std > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        };
    }
    Ok(out)
}

/// Deterministic sequence for `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticSequence> {
    cfg.validate()?;
    let shape = Shape::from_dims(&cfg.extents)?;
    let mut gen = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        next_id: 1,
    };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cells = gen.place()?;
    let mut divisions = 0;
    let mut raw = Vec::with_capacity(cfg.frames);
    let mut labels = Vec::with_capacity(cfg.frames);
    let mut parents: Vec<(u32, u32)> = cells.iter().map(|c| (c.id, 0)).collect();
    for t in 0..cfg.frames {
        if t > 0 {
            gen.grow(&mut cells);
            gen.advance(&mut cells);
            let before = gen.next_id;
            gen.divide(&mut cells, t, &mut divisions);
            parents.extend(
                cells
                    .iter()
                    .filter(|c| c.id >= before)
                    .map(|c| (c.id, c.parent)),
            );
        }
        let l = render_labels(&cells, shape);
        raw.push(render_raw(&cells, &l, cfg, &mut noise_rng)?);
        labels.push(l);
    }
    let lineage = lineage_from_frames(&labels, &parents);
    let stats = labels.iter().map(object_stats).collect();
    Ok(SyntheticSequence {
        raw,
        labels,
        lineage,
        stats,
        divisions,
    })
}

fn lineage_from_frames(labels: &[LabelImage], parents: &[(u32, u32)]) -> Vec<TrackRecord> {
    let mut out: Vec<TrackRecord> = Vec::new();
    for &(id, parent) in parents {
        let frames: Vec<usize> = (0..labels.len())
            .filter(|&t| labels[t].data().contains(&id))
            .collect();
        if let (Some(&begin), Some(&end)) = (frames.first(), frames.last()) {
            out.push(TrackRecord {
                label: id,
                begin,
                end,
                parent,
            });
        }
    }
    out.sort();
    out
}

/// Removes the listed `(frame, id)` masks from the label frames. Raw frames
/// and the lineage are kept.
pub fn corrupt(seq: &SyntheticSequence, drops: &[(usize, u32)]) -> Result<SyntheticSequence> {
    let mut out = seq.clone();
    for &(t, id) in drops {
        let frame = out
            .labels
            .get_mut(t)
            .ok_or(Error::MissingObject { frame: t, id })?;
        if id == 0 || !frame.data().contains(&id) {
            return Err(Error::MissingObject { frame: t, id });
        }
        frame
            .data_mut()
            .iter_mut()
            .filter(|v| **v == id)
            .for_each(|v| *v = 0);
        out.stats[t].retain(|s| s.id != id);
    }
    Ok(out)
}
