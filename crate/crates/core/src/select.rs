//! Tile selection: HaPSi, Greedy and Naive.
//!
//! All three share the same cover bookkeeping and report a
//! [`SelectionTrace`] with one record per accepted tile. Errors in the trace
//! are the true reconstruction errors of the cover at that point.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{estimated_contribution, make_sketches, MergedSketch, SketchConfig};
use crate::matrix::{relative_error, zeros_covered, CoverState, SparseBinaryMatrix, Tile, TileId};
use crate::Mode;

pub const DEFAULT_M_CANDIDATES: usize = 30;
pub const DEFAULT_T_MAX: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hapsi,
    Greedy,
    Naive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Hapsi, Algorithm::Greedy, Algorithm::Naive];

    pub fn run(
        self,
        data: &SparseBinaryMatrix,
        tiles: &[Tile],
        params: &SelectionParams,
    ) -> Result<Selection> {
        match self {
            Algorithm::Hapsi => hapsi(data, tiles, params),
            Algorithm::Greedy => greedy(data, tiles, params),
            Algorithm::Naive => naive(data, tiles, params),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Hapsi => "hapsi",
            Algorithm::Greedy => "greedy",
            Algorithm::Naive => "naive",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hapsi" => Ok(Algorithm::Hapsi),
            "greedy" => Ok(Algorithm::Greedy),
            "naive" => Ok(Algorithm::Naive),
            _ => Err(Error::invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Maximum number of tiles returned.
    pub t_max: usize,
    /// Top-ranked candidates verified with true errors per HaPSi iteration.
    pub m_candidates: usize,
    pub mode: Mode,
    pub sketch: SketchConfig,
    /// Stop HaPSi at the first non-improving candidate instead of scanning
    /// all `m_candidates`.
    pub strict_pseudocode: bool,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            t_max: DEFAULT_T_MAX,
            m_candidates: DEFAULT_M_CANDIDATES,
            mode: Mode::Exact,
            sketch: SketchConfig::default(),
            strict_pseudocode: false,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::invalid("t_max must be at least 1"));
        }
        if self.m_candidates == 0 {
            return Err(Error::invalid("m_candidates must be at least 1"));
        }
        self.sketch.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// 1-based.
    pub iteration: usize,
    pub tile_id: TileId,
    /// Position of the tile in the input list.
    pub tile_index: usize,
    pub error: u64,
    pub relative_error: f64,
    pub covered_ones: u64,
    pub covered_zeros: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SelectionTrace {
    pub records: Vec<TraceRecord>,
}

impl SelectionTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.error)
    }

    /// Smallest error reached at any prefix, with the prefix length.
    pub fn best(&self) -> Option<(usize, u64)> {
        self.records
            .iter()
            .min_by_key(|r| (r.error, r.iteration))
            .map(|r| (r.iteration, r.error))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Indices into the input tile list, in selection order.
    pub chosen: Vec<usize>,
    pub trace: SelectionTrace,
    /// Error of the empty cover, `|D|`.
    pub initial_error: u64,
    pub final_error: u64,
    pub elapsed: Duration,
}

impl Selection {
    pub fn chosen_tiles<'a>(&'a self, tiles: &'a [Tile]) -> impl Iterator<Item = &'a Tile> + 'a {
        self.chosen.iter().map(move |&i| &tiles[i])
    }
}

fn validate(data: &SparseBinaryMatrix, tiles: &[Tile], params: &SelectionParams) -> Result<()> {
    params.validate()?;
    if tiles.is_empty() {
        return Err(Error::invalid("no candidate tiles"));
    }
    for tile in tiles {
        tile.check_fits(data.n_rows(), data.n_cols())?;
    }
    if params.mode == Mode::Exact {
        let zeros = tiles
            .par_iter()
            .map(|t| zeros_covered(t, data))
            .collect::<Result<Vec<_>>>()?;
        if let Some((i, &z)) = zeros.iter().enumerate().find(|(_, &z)| z > 0) {
            return Err(Error::NotDominated {
                tile: tiles[i].id(),
                zeros: z,
            });
        }
    }
    Ok(())
}

/// Accumulates the cover, the chosen list and the trace.
struct Recorder<'a> {
    data: &'a SparseBinaryMatrix,
    tiles: &'a [Tile],
    state: CoverState,
    chosen: Vec<usize>,
    trace: SelectionTrace,
    initial_error: u64,
    start: Instant,
}

impl<'a> Recorder<'a> {
    fn new(data: &'a SparseBinaryMatrix, tiles: &'a [Tile], start: Instant) -> Self {
        let state = CoverState::new(data);
        Recorder {
            data,
            tiles,
            initial_error: state.error(),
            state,
            chosen: Vec::new(),
            trace: SelectionTrace::default(),
            start,
        }
    }

    fn accept(&mut self, index: usize) -> Result<()> {
        let tile = &self.tiles[index];
        self.state.apply_tile(tile, self.data)?;
        self.chosen.push(index);
        let error = self.state.error();
        self.trace.records.push(TraceRecord {
            iteration: self.chosen.len(),
            tile_id: tile.id(),
            tile_index: index,
            error,
            relative_error: relative_error(error, self.data)?,
            covered_ones: self.state.covered_ones(),
            covered_zeros: self.state.covered_zeros(),
            elapsed: self.start.elapsed(),
        });
        Ok(())
    }

    fn gains(&self, candidates: &[usize]) -> Result<Vec<i64>> {
        candidates
            .par_iter()
            .map(|&i| self.state.gain(&self.tiles[i], self.data))
            .collect()
    }

    fn finish(self) -> Selection {
        Selection {
            chosen: self.chosen,
            final_error: self.state.error(),
            initial_error: self.initial_error,
            trace: self.trace,
            elapsed: self.start.elapsed(),
        }
    }
}

/// Position in `candidates` of the largest gain; ties go to the smaller tile
/// id, then the earlier input position.
fn best_gain(tiles: &[Tile], candidates: &[usize], gains: &[i64]) -> Option<usize> {
    (0..candidates.len()).min_by(|&a, &b| {
        let (ia, ib) = (candidates[a], candidates[b]);
        gains[b]
            .cmp(&gains[a])
            .then(tiles[ia].id().cmp(&tiles[ib].id()))
            .then(ia.cmp(&ib))
    })
}

/// Hashing-based selection. Each round ranks the remaining tiles by the
/// estimated size of their union with the chosen set (less their covered
/// zeros in inexact mode) and accepts the first of the top `m_candidates`
/// whose true error improvement is positive.
pub fn hapsi(
    data: &SparseBinaryMatrix,
    tiles: &[Tile],
    params: &SelectionParams,
) -> Result<Selection> {
    let start = Instant::now();
    validate(data, tiles, params)?;
    let mode = params.mode;
    let k = params.sketch.k;
    let sketches = make_sketches(tiles, &params.sketch, data, mode)?;
    let mut rec = Recorder::new(data, tiles, start);

    // Seed with the tile of smallest standalone error.
    let all: Vec<usize> = (0..tiles.len()).collect();
    let gains = rec.gains(&all)?;
    let seed = best_gain(tiles, &all, &gains).expect("tiles is non-empty");
    if gains[seed] <= 0 {
        return Ok(rec.finish());
    }
    rec.accept(seed)?;
    let mut q = MergedSketch::empty(params.sketch.n_reps, k, sketches[seed].modulus);
    q.absorb(&sketches[seed])?;
    let mut remaining: Vec<usize> = all.into_iter().filter(|&i| i != seed).collect();

    let rank = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
        b.0.total_cmp(&a.0)
            .then(tiles[b.1].size().cmp(&tiles[a.1].size()))
            .then(tiles[a.1].id().cmp(&tiles[b.1].id()))
            .then(a.1.cmp(&b.1))
    };

    while rec.chosen.len() < params.t_max && !remaining.is_empty() {
        let mut ranked = remaining
            .par_iter()
            .map(|&i| Ok((estimated_contribution(q.lists(), &sketches[i], k, mode)?, i)))
            .collect::<Result<Vec<(f64, usize)>>>()?;
        let m = params.m_candidates.min(ranked.len());
        if m < ranked.len() {
            ranked.select_nth_unstable_by(m - 1, rank);
            ranked.truncate(m);
        }
        ranked.sort_unstable_by(rank);

        let mut accepted = None;
        for &(_, i) in &ranked {
            if rec.state.gain(&tiles[i], data)? > 0 {
                accepted = Some(i);
                break;
            }
            if params.strict_pseudocode {
                break;
            }
        }
        let Some(i) = accepted else { break };
        rec.accept(i)?;
        q.absorb(&sketches[i])?;
        remaining.retain(|&j| j != i);
    }
    Ok(rec.finish())
}

/// Standard greedy: every round recomputes the true gain of every remaining
/// tile and takes the best, until no tile improves the error.
pub fn greedy(
    data: &SparseBinaryMatrix,
    tiles: &[Tile],
    params: &SelectionParams,
) -> Result<Selection> {
    let start = Instant::now();
    validate(data, tiles, params)?;
    let mut rec = Recorder::new(data, tiles, start);
    let mut remaining: Vec<usize> = (0..tiles.len()).collect();

    while rec.chosen.len() < params.t_max && !remaining.is_empty() {
        let gains = rec.gains(&remaining)?;
        let pos = best_gain(tiles, &remaining, &gains).expect("remaining is non-empty");
        if gains[pos] <= 0 {
            break;
        }
        rec.accept(remaining.remove(pos))?;
    }
    Ok(rec.finish())
}

/// Ranks tiles once by standalone gain and takes the top `t_max` in that
/// order, ignoring overlap. In inexact mode the error can go up.
pub fn naive(
    data: &SparseBinaryMatrix,
    tiles: &[Tile],
    params: &SelectionParams,
) -> Result<Selection> {
    let start = Instant::now();
    validate(data, tiles, params)?;
    let mut rec = Recorder::new(data, tiles, start);
    let all: Vec<usize> = (0..tiles.len()).collect();
    let gains = rec.gains(&all)?;
    let mut order = all;
    order.sort_unstable_by(|&a, &b| {
        gains[b]
            .cmp(&gains[a])
            .then(tiles[a].id().cmp(&tiles[b].id()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(params.t_max) {
        rec.accept(i)?;
    }
    Ok(rec.finish())
}
