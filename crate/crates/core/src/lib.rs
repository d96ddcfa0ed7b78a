//! Distance-based instance representations, watershed post-processing and
//! coupled min-cost-flow tracking for cell microscopy sequences.

pub mod config;
pub mod edt;
pub mod error;
pub mod eval;
pub mod filter;
pub mod grid;
pub mod io;
pub mod labelgen;
pub mod labeling;
pub mod morphology;
pub mod pipeline;
pub mod segment;
pub mod stats;
pub mod synth;
pub mod track;

pub use error::{Error, Result};
pub use grid::{Connectivity, DistanceMap, Grid, LabelImage, Shape};
