//! Selecting small sets of rank-1 binary patterns ("tiles") that reconstruct
//! a binary data matrix with few errors.
//!
//! The main entry point is [`select::hapsi`], which ranks candidate tiles by
//! bottom-k hash estimates of their union with the tiles chosen so far and
//! only verifies the top few with exact error computations. [`select::greedy`]
//! and [`select::naive`] are the reference baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod adapters;
pub mod datagen;
pub mod error;
pub mod hashing;
pub mod matrix;
pub mod select;

pub use error::{Error, Result};
pub use hashing::{HashPair, MergedSketch, SketchConfig, TileSketch};
pub use matrix::{CoverState, SparseBinaryMatrix, Tile, TileId};
pub use select::{Algorithm, Selection, SelectionParams, SelectionTrace, TraceRecord};

/// Whether candidate tiles must be dominated by the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every tile covers only ones; error counts uncovered ones.
    #[default]
    Exact,
    /// Tiles may cover zeros; error also counts covered zeros.
    Inexact,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Inexact => "inexact",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "inexact" => Ok(Mode::Inexact),
            _ => Err(Error::InvalidInput(format!("unknown mode {s:?}"))),
        }
    }
}
