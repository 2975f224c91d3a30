//! Bottom-k sketches of tiles and union-size estimation.
//!
//! A cell `(x, y)` hashes to `(h1(x) - h2(y)) mod 1`, where `h1` and `h2` are
//! random affine maps over `Z/p` scaled to `[0, 1)`. Values are kept as
//! integer numerators over the common denominator `p`, so equal cells compare
//! equal no matter which tile produced them.
//!
//! Because a tile is a rectangle, its hash values form a matrix whose columns
//! are cyclic shifts of the sorted row hashes. [`bottom_k_traversal`] exploits
//! this to collect the `k` smallest values without visiting every cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{zeros_covered, SparseBinaryMatrix, Tile, TileId};
use crate::Mode;

/// The Mersenne prime 2^31 - 1.
pub const DEFAULT_MODULUS: u64 = (1 << 31) - 1;

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_REPS: usize = 10;

/// Two affine hash functions `h(x) = ((a·x + b) mod p) / p` sharing a prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashPair {
    p: u64,
    a1: u64,
    b1: u64,
    a2: u64,
    b2: u64,
}

impl HashPair {
    pub fn new(p: u64, a1: u64, b1: u64, a2: u64, b2: u64) -> Result<Self> {
        if p > u32::MAX as u64 || !is_prime(p) {
            return Err(Error::invalid(format!(
                "hash modulus {p} is not a prime below 2^32"
            )));
        }
        if a1 == 0 || a2 == 0 || a1 >= p || a2 >= p || b1 >= p || b2 >= p {
            return Err(Error::invalid(format!(
                "hash coefficients must satisfy 0 < a < p and 0 <= b < p (p = {p})"
            )));
        }
        Ok(HashPair { p, a1, b1, a2, b2 })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, p: u64) -> Result<Self> {
        let a1 = rng.random_range(1..p);
        let b1 = rng.random_range(0..p);
        let a2 = rng.random_range(1..p);
        let b2 = rng.random_range(0..p);
        HashPair::new(p, a1, b1, a2, b2)
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Numerator of `h1(x)`.
    #[inline]
    pub fn row_hash(&self, x: u64) -> u32 {
        ((self.a1 * (x % self.p) + self.b1) % self.p) as u32
    }

    /// Numerator of `h2(y)`.
    #[inline]
    pub fn col_hash(&self, y: u64) -> u32 {
        ((self.a2 * (y % self.p) + self.b2) % self.p) as u32
    }

    /// Numerator of the cell hash `(h1(x) - h2(y)) mod 1`.
    #[inline]
    pub fn cell_numerator(&self, x: u64, y: u64) -> u32 {
        sub_mod(self.row_hash(x), self.col_hash(y), self.p as u32)
    }

    /// The cell hash as a value in `[0, 1)`.
    pub fn cell_hash(&self, x: u64, y: u64) -> f64 {
        self.cell_numerator(x, y) as f64 / self.p as f64
    }
}

#[inline]
fn sub_mod(a: u32, b: u32, p: u32) -> u32 {
    if a >= b {
        a - b
    } else {
        // a + p - b < p <= u32::MAX
        a.wrapping_add(p).wrapping_sub(b)
    }
}

/// Deterministic trial division. Moduli are at most 2^32.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub k: usize,
    pub n_reps: usize,
    pub seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            k: DEFAULT_K,
            n_reps: DEFAULT_REPS,
            seed: 0,
        }
    }
}

impl SketchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("sketch size k must be at least 1"));
        }
        if self.n_reps == 0 {
            return Err(Error::invalid(
                "number of hash repetitions must be at least 1",
            ));
        }
        Ok(())
    }

    /// One hash pair per repetition, drawn from the configured seed.
    pub fn draw_hashes(&self, modulus: u64) -> Result<Vec<HashPair>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_reps)
            .map(|_| HashPair::random(&mut rng, modulus))
            .collect()
    }
}

/// Work counters from one traversal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    /// Cells whose hash value was computed.
    pub cells_visited: u64,
    /// Row positions skipped while advancing the wrap point.
    pub wrap_steps: u64,
}

/// The `k` smallest distinct cell-hash numerators of `tile`, ascending.
///
/// `p_init` is the initial exclusive threshold as a fraction of the
/// modulus; `1.0` admits every value.
pub fn bottom_k_traversal(tile: &Tile, hash: &HashPair, k: usize, p_init: f64) -> Result<Vec<u32>> {
    bottom_k_traversal_with_stats(tile, hash, k, p_init).map(|(values, _)| values)
}

pub fn bottom_k_traversal_with_stats(
    tile: &Tile,
    hash: &HashPair,
    k: usize,
    p_init: f64,
) -> Result<(Vec<u32>, TraversalStats)> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(p_init > 0.0 && p_init <= 1.0) {
        return Err(Error::invalid(format!(
            "initial threshold {p_init} outside (0, 1]"
        )));
    }
    let p = hash.modulus();
    let max_index = (*tile.rows().last().unwrap()).max(*tile.cols().last().unwrap());
    if max_index as u64 >= p {
        return Err(Error::invalid(format!(
            "tile {} has index {max_index}, not below the hash modulus {p}",
            tile.id()
        )));
    }
    let p = p as u32;

    let mut rows: Vec<u32> = tile
        .rows()
        .iter()
        .map(|&x| hash.row_hash(x as u64))
        .collect();
    let mut cols: Vec<u32> = tile
        .cols()
        .iter()
        .map(|&y| hash.col_hash(y as u64))
        .collect();
    rows.sort_unstable();
    cols.sort_unstable();

    let mut threshold = ((p_init * p as f64).ceil() as u64).min(p as u64) as u32;
    let mut kept: Vec<u32> = Vec::with_capacity(k + 1);
    let mut stats = TraversalStats::default();
    let n = rows.len();
    let mut wrap = 0;

    for &c in &cols {
        // First row whose hash is >= c holds the column minimum. Column
        // hashes ascend, so this position only moves forward.
        while wrap < n && rows[wrap] < c {
            wrap += 1;
            stats.wrap_steps += 1;
        }
        let mut i = if wrap == n { 0 } else { wrap };
        for _ in 0..n {
            let v = sub_mod(rows[i], c, p);
            stats.cells_visited += 1;
            if v >= threshold {
                break;
            }
            if let Err(pos) = kept.binary_search(&v) {
                kept.insert(pos, v);
                if kept.len() > k {
                    kept.pop();
                }
                if kept.len() == k {
                    threshold = kept[k - 1];
                }
            }
            i += 1;
            if i == n {
                i = 0;
            }
        }
    }
    Ok((kept, stats))
}

/// Bottom-k over an explicit cell list, for patterns that are not rank-1.
pub fn bottom_k_cells<I>(cells: I, hash: &HashPair, k: usize) -> Vec<u32>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let mut values: Vec<u32> = cells
        .into_iter()
        .map(|(x, y)| hash.cell_numerator(x as u64, y as u64))
        .collect();
    values.sort_unstable();
    values.dedup();
    values.truncate(k);
    values
}

/// Per-repetition bottom-k lists of one tile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSketch {
    pub tile_id: TileId,
    pub modulus: u64,
    pub per_rep: Vec<Vec<u32>>,
    pub tile_size: u64,
    /// Data zeros covered by the tile; zero unless built in inexact mode.
    pub zeros_covered: u64,
}

impl TileSketch {
    pub fn n_reps(&self) -> usize {
        self.per_rep.len()
    }

    /// Builds a sketch of an arbitrary cell set by enumerating every cell.
    pub fn from_cells(
        tile_id: TileId,
        cells: &[(usize, usize)],
        hashes: &[HashPair],
        k: usize,
        zeros_covered: u64,
    ) -> Result<Self> {
        let modulus = common_modulus(hashes)?;
        Ok(TileSketch {
            tile_id,
            modulus,
            per_rep: hashes
                .iter()
                .map(|h| bottom_k_cells(cells.iter().copied(), h, k))
                .collect(),
            tile_size: cells.len() as u64,
            zeros_covered,
        })
    }
}

fn common_modulus(hashes: &[HashPair]) -> Result<u64> {
    let first = hashes
        .first()
        .ok_or_else(|| Error::invalid("at least one hash pair is required"))?;
    if hashes.iter().any(|h| h.modulus() != first.modulus()) {
        return Err(Error::invalid("hash pairs use different moduli"));
    }
    Ok(first.modulus())
}

/// Sketches every tile under shared hash pairs, one pair per repetition.
pub fn sketch_tiles(
    tiles: &[Tile],
    hashes: &[HashPair],
    k: usize,
    data: &SparseBinaryMatrix,
    mode: Mode,
) -> Result<Vec<TileSketch>> {
    let modulus = common_modulus(hashes)?;
    if modulus <= data.n_rows().max(data.n_cols()) as u64 {
        return Err(Error::invalid(format!(
            "hash modulus {modulus} must exceed the largest matrix dimension"
        )));
    }
    tiles
        .par_iter()
        .map(|tile| {
            let per_rep = hashes
                .iter()
                .map(|h| bottom_k_traversal(tile, h, k, 1.0))
                .collect::<Result<Vec<_>>>()?;
            let zeros = match mode {
                Mode::Exact => 0,
                Mode::Inexact => zeros_covered(tile, data)?,
            };
            Ok(TileSketch {
                tile_id: tile.id(),
                modulus,
                per_rep,
                tile_size: tile.size(),
                zeros_covered: zeros,
            })
        })
        .collect()
}

/// Draws hash pairs from `cfg` with [`DEFAULT_MODULUS`] and sketches all tiles.
pub fn make_sketches(
    tiles: &[Tile],
    cfg: &SketchConfig,
    data: &SparseBinaryMatrix,
    mode: Mode,
) -> Result<Vec<TileSketch>> {
    let hashes = cfg.draw_hashes(DEFAULT_MODULUS)?;
    sketch_tiles(tiles, &hashes, cfg.k, data, mode)
}

enum KthOrCount {
    Kth(u32),
    Count(usize),
}

/// The `k`-th smallest distinct value of `a ∪ b`, or the distinct count when
/// the union holds fewer than `k` values. Both inputs ascend strictly.
fn kth_of_union(a: &[u32], b: &[u32], k: usize) -> KthOrCount {
    if a.len() >= k && b.first().is_none_or(|&v| v > a[k - 1]) {
        return KthOrCount::Kth(a[k - 1]);
    }
    if b.len() >= k && a.first().is_none_or(|&v| v > b[k - 1]) {
        return KthOrCount::Kth(b[k - 1]);
    }
    let (mut i, mut j, mut n) = (0, 0, 0);
    loop {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x < y {
                    i += 1;
                    x
                } else if y < x {
                    j += 1;
                    y
                } else {
                    i += 1;
                    j += 1;
                    x
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => return KthOrCount::Count(n),
        };
        n += 1;
        if n == k {
            return KthOrCount::Kth(v);
        }
    }
}

fn rep_estimate(a: &[u32], b: &[u32], k: usize, modulus: u64) -> f64 {
    match kth_of_union(a, b, k) {
        // A zero k-th value only happens for k = 1; clamp at the resolution.
        KthOrCount::Kth(0) => (k as u64 * modulus) as f64,
        KthOrCount::Kth(v) => k as f64 * modulus as f64 / v as f64,
        KthOrCount::Count(n) => n as f64,
    }
}

/// Median, averaging the two middle values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of no values");
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Merged bottom-k lists of a set of tiles (the chosen set), per repetition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedSketch {
    modulus: u64,
    k: usize,
    per_rep: Vec<Vec<u32>>,
}

impl MergedSketch {
    pub fn empty(n_reps: usize, k: usize, modulus: u64) -> Self {
        MergedSketch {
            modulus,
            k,
            per_rep: vec![Vec::new(); n_reps],
        }
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.per_rep
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Merges a tile's lists in, keeping the `k` smallest distinct values.
    pub fn absorb(&mut self, tile: &TileSketch) -> Result<()> {
        check_compatible(&self.per_rep, tile, self.modulus)?;
        for (mine, theirs) in self.per_rep.iter_mut().zip(&tile.per_rep) {
            *mine = merge_dedup(mine, theirs, self.k);
        }
        Ok(())
    }

    /// Size estimate of the merged set alone.
    pub fn estimate(&self) -> f64 {
        let mut e: Vec<f64> = self
            .per_rep
            .iter()
            .map(|l| rep_estimate(l, &[], self.k, self.modulus))
            .collect();
        median(&mut e)
    }
}

fn merge_dedup(a: &[u32], b: &[u32], k: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(k.min(a.len() + b.len()));
    let (mut i, mut j) = (0, 0);
    while out.len() < k {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                let v = x.min(y);
                i += (x == v) as usize;
                j += (y == v) as usize;
                v
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => break,
        };
        out.push(v);
    }
    out
}

fn check_compatible(q: &[Vec<u32>], cand: &TileSketch, modulus: u64) -> Result<()> {
    if q.len() != cand.per_rep.len() {
        return Err(Error::invalid(format!(
            "sketch repetition counts differ: {} vs {} for tile {}",
            q.len(),
            cand.per_rep.len(),
            cand.tile_id
        )));
    }
    if cand.modulus != modulus {
        return Err(Error::invalid(format!(
            "tile {} was sketched with a different modulus",
            cand.tile_id
        )));
    }
    Ok(())
}

/// Median over repetitions of the estimated size of `Q ∪ cand`, where `q`
/// holds the per-repetition lists of `Q`.
pub fn union_estimate(q: &[Vec<u32>], cand: &TileSketch, k: usize) -> Result<f64> {
    check_compatible(q, cand, cand.modulus)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut e: Vec<f64> = q
        .iter()
        .zip(&cand.per_rep)
        .map(|(a, b)| rep_estimate(a, b, k, cand.modulus))
        .collect();
    Ok(median(&mut e))
}

/// Union estimate, less the candidate's covered zeros in inexact mode.
pub fn estimated_contribution(
    q: &[Vec<u32>],
    cand: &TileSketch,
    k: usize,
    mode: Mode,
) -> Result<f64> {
    let est = union_estimate(q, cand, k)?;
    Ok(match mode {
        Mode::Exact => est,
        Mode::Inexact => est - cand.zeros_covered as f64,
    })
}
