use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("marked object {0} is not present in the first frame")]
    MissingMarkedObject(u32),

    #[error("no seeds found; the frame contains no objects")]
    NoObjects,

    #[error("label {0} does not fit into 16 bits")]
    LabelOverflow(u32),

    #[error("object {id} not present in frame {frame}")]
    MissingObject { frame: usize, id: u32 },

    #[error("cannot place {0} cells without overlap")]
    InfeasiblePacking(usize),

    #[error("empty reference: {0}")]
    EmptyReference(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed track file {}: {message}", path.display())]
    TrackFile { path: PathBuf, message: String },

    #[error("tiff error in {}: {source}", path.display())]
    Tiff {
        path: PathBuf,
        #[source]
        source: tiff::TiffError,
    },

    #[error("unsupported tiff layout in {}: {message}", path.display())]
    TiffLayout { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
