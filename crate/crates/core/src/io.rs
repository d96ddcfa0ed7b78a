//! TIFF frames and the directory conventions used by the pipeline.
//!
//! Label images are 16-bit grayscale, float maps 32-bit float. A 3D volume
//! is one page per z slice in z order. Every write goes to a temporary file
//! in the target directory and is renamed into place.

use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, TiffEncoder};

use crate::error::{Error, Result};
use crate::grid::{Grid, LabelImage, Shape};

pub const RAW_PREFIX: &str = "t";
pub const MASK_PREFIX: &str = "mask";
pub const CELL_PREFIX: &str = "cell";
pub const NEIGHBOR_PREFIX: &str = "neighbor";

/// `<prefix>TTT.tif`, zero-padded to three digits.
pub fn frame_name(prefix: &str, t: usize) -> String {
    format!("{prefix}{t:03}.tif")
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn tiff_err(path: &Path) -> impl Fn(tiff::TiffError) -> Error + '_ {
    move |source| Error::Tiff {
        path: path.to_path_buf(),
        source,
    }
}

fn pages<T: Copy>(shape: Shape, data: &[T]) -> impl Iterator<Item = &[T]> {
    let [_, h, w] = shape.zyx();
    data.chunks(h * w)
}

pub fn encode_label_tiff(labels: &LabelImage, path: &Path) -> Result<Vec<u8>> {
    if let Some(&bad) = labels.data().iter().find(|&&v| v > u16::MAX as u32) {
        return Err(Error::LabelOverflow(bad));
    }
    let shape = labels.shape();
    let [_, h, w] = shape.zyx();
    let data: Vec<u16> = labels.data().iter().map(|&v| v as u16).collect();
    let mut buf = Cursor::new(Vec::new());
    let mut enc = TiffEncoder::new(&mut buf).map_err(tiff_err(path))?;
    for page in pages(shape, &data) {
        enc.write_image::<colortype::Gray16>(w as u32, h as u32, page)
            .map_err(tiff_err(path))?;
    }
    drop(enc);
    Ok(buf.into_inner())
}

/// 16-bit label TIFF. IDs above 65535 are rejected.
pub fn write_label_tiff(path: &Path, labels: &LabelImage) -> Result<()> {
    let bytes = encode_label_tiff(labels, path)?;
    write_atomic(path, &bytes)
}

/// 32-bit float TIFF.
pub fn write_float_tiff(path: &Path, map: &Grid<f64>) -> Result<()> {
    let shape = map.shape();
    let [_, h, w] = shape.zyx();
    let data: Vec<f32> = map.data().iter().map(|&v| v as f32).collect();
    let mut buf = Cursor::new(Vec::new());
    let mut enc = TiffEncoder::new(&mut buf).map_err(tiff_err(path))?;
    for page in pages(shape, &data) {
        enc.write_image::<colortype::Gray32Float>(w as u32, h as u32, page)
            .map_err(tiff_err(path))?;
    }
    drop(enc);
    write_atomic(path, &buf.into_inner())
}

enum Samples {
    Int(Vec<u64>),
    Float(Vec<f64>),
}

/// All pages of a single-channel TIFF plus the resulting shape.
fn read_pages(path: &Path) -> Result<(Shape, Samples)> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let file = fs::File::open(path)?;
    let mut dec = Decoder::new(std::io::BufReader::new(file))
        .map_err(tiff_err(path))?
        .with_limits(Limits::unlimited());
    let (w, h) = dec.dimensions().map_err(tiff_err(path))?;
    let layout = |message: String| Error::TiffLayout {
        path: path.to_path_buf(),
        message,
    };
    let mut ints = Vec::new();
    let mut floats = Vec::new();
    let mut depth = 0usize;
    loop {
        if dec.dimensions().map_err(tiff_err(path))? != (w, h) {
            return Err(layout("pages differ in size".into()));
        }
        let page = dec.read_image().map_err(tiff_err(path))?;
        let n = page_len(&page);
        if n != (w * h) as usize {
            return Err(layout(format!(
                "expected one sample per pixel, got {n} for {w}x{h}"
            )));
        }
        match page {
            DecodingResult::U8(v) => ints.extend(v.into_iter().map(u64::from)),
            DecodingResult::U16(v) => ints.extend(v.into_iter().map(u64::from)),
            DecodingResult::U32(v) => ints.extend(v.into_iter().map(u64::from)),
            DecodingResult::U64(v) => ints.extend(v),
            DecodingResult::F32(v) => floats.extend(v.into_iter().map(f64::from)),
            DecodingResult::F64(v) => floats.extend(v),
            _ => return Err(layout("signed sample formats are not supported".into())),
        }
        depth += 1;
        if !dec.more_images() {
            break;
        }
        dec.next_image().map_err(tiff_err(path))?;
    }
    if !ints.is_empty() && !floats.is_empty() {
        return Err(layout("mixed sample formats across pages".into()));
    }
    let shape = if depth == 1 {
        Shape::new_2d(h as usize, w as usize)
    } else {
        Shape::new_3d(depth, h as usize, w as usize)
    };
    Ok((
        shape,
        if floats.is_empty() {
            Samples::Int(ints)
        } else {
            Samples::Float(floats)
        },
    ))
}

fn page_len(page: &DecodingResult) -> usize {
    match page {
        DecodingResult::U8(v) => v.len(),
        DecodingResult::U16(v) => v.len(),
        DecodingResult::U32(v) => v.len(),
        DecodingResult::U64(v) => v.len(),
        DecodingResult::F32(v) => v.len(),
        DecodingResult::F64(v) => v.len(),
        DecodingResult::I8(v) => v.len(),
        DecodingResult::I16(v) => v.len(),
        DecodingResult::I32(v) => v.len(),
        DecodingResult::I64(v) => v.len(),
    }
}

pub fn read_label_tiff(path: &Path) -> Result<LabelImage> {
    match read_pages(path)? {
        (shape, Samples::Int(v)) => {
            let data = v
                .into_iter()
                .map(|x| {
                    u32::try_from(x).map_err(|_| Error::TiffLayout {
                        path: path.to_path_buf(),
                        message: format!("label {x} too large"),
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            Grid::from_vec(shape, data)
        }
        (_, Samples::Float(_)) => Err(Error::TiffLayout {
            path: path.to_path_buf(),
            message: "label images must hold integers".into(),
        }),
    }
}

/// Any supported sample format as `f64`.
pub fn read_float_tiff(path: &Path) -> Result<Grid<f64>> {
    match read_pages(path)? {
        (shape, Samples::Int(v)) => {
            Grid::from_vec(shape, v.into_iter().map(|x| x as f64).collect())
        }
        (shape, Samples::Float(v)) => Grid::from_vec(shape, v),
    }
}

/// Frames `<prefix>TTT.tif` in `dir`, sorted by time. The numbers must run
/// from 0 without gaps.
pub fn scan_frames(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingInput(dir.to_path_buf()));
    }
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name
            .strip_prefix(prefix)
            .and_then(|s| s.strip_suffix(".tif"))
        else {
            continue;
        };
        if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let t: usize = stem
            .parse()
            .map_err(|_| Error::Config(format!("bad frame number in {name}")))?;
        found.push((t, path));
    }
    found.sort();
    for (i, (t, p)) in found.iter().enumerate() {
        if *t != i {
            return Err(Error::MissingInput(p.with_file_name(frame_name(prefix, i))));
        }
    }
    if found.is_empty() {
        return Err(Error::MissingInput(dir.join(frame_name(prefix, 0))));
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

pub fn read_label_dir(dir: &Path, prefix: &str) -> Result<Vec<LabelImage>> {
    scan_frames(dir, prefix)?
        .iter()
        .map(|p| read_label_tiff(p))
        .collect()
}

pub fn read_float_dir(dir: &Path, prefix: &str) -> Result<Vec<Grid<f64>>> {
    scan_frames(dir, prefix)?
        .iter()
        .map(|p| read_float_tiff(p))
        .collect()
}

pub fn write_label_dir(dir: &Path, prefix: &str, frames: &[LabelImage]) -> Result<()> {
    frames
        .iter()
        .enumerate()
        .try_for_each(|(t, f)| write_label_tiff(&dir.join(frame_name(prefix, t)), f))
}

pub fn write_float_dir(dir: &Path, prefix: &str, frames: &[Grid<f64>]) -> Result<()> {
    frames
        .iter()
        .enumerate()
        .try_for_each(|(t, f)| write_float_tiff(&dir.join(frame_name(prefix, t)), f))
}
