//! Binary data matrices, rank-1 tiles, and reconstruction-error bookkeeping.
//!
//! A [`SparseBinaryMatrix`] keeps its ones as one sorted column list per row.
//! A [`Tile`] is the combinatorial rectangle `rows × cols`. A [`CoverState`]
//! tracks the OR of the tiles chosen so far as a dense bitmap together with
//! how many of the covered cells are ones and zeros of the data, so the
//! reconstruction error `|D| - covered_ones + covered_zeros` is available in
//! constant time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TileId(pub u64);

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary matrix stored as the set of its one-coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<u32>>,
    nnz: u64,
}

impl SparseBinaryMatrix {
    /// Builds a matrix from `(row, col)` coordinates. Duplicates collapse.
    pub fn from_coords<I>(n_rows: usize, n_cols: usize, ones: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        check_dims(n_rows, n_cols)?;
        let mut rows = vec![Vec::new(); n_rows];
        for (i, j) in ones {
            if i >= n_rows || j >= n_cols {
                return Err(Error::OutOfBounds {
                    row: i,
                    col: j,
                    n_rows,
                    n_cols,
                });
            }
            rows[i].push(j as u32);
        }
        Ok(Self::from_unsorted_rows(n_cols, rows))
    }

    /// Builds a matrix from per-row column lists. Lists need not be sorted.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        check_dims(rows.len(), n_cols)?;
        for (i, row) in rows.iter().enumerate() {
            if let Some(&j) = row.iter().find(|&&j| j as usize >= n_cols) {
                return Err(Error::OutOfBounds {
                    row: i,
                    col: j as usize,
                    n_rows: rows.len(),
                    n_cols,
                });
            }
        }
        Ok(Self::from_unsorted_rows(n_cols, rows))
    }

    fn from_unsorted_rows(n_cols: usize, mut rows: Vec<Vec<u32>>) -> Self {
        let mut nnz = 0;
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            nnz += row.len() as u64;
        }
        SparseBinaryMatrix {
            n_rows: rows.len(),
            n_cols,
            rows,
            nnz,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of ones, `|D|`.
    pub fn nnz(&self) -> u64 {
        self.nnz
    }

    /// Number of cells, `m·n`.
    pub fn size(&self) -> u64 {
        self.n_rows as u64 * self.n_cols as u64
    }

    pub fn density(&self) -> f64 {
        self.nnz as f64 / self.size() as f64
    }

    /// Sorted column indices of the ones in row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n_rows && self.rows[i].binary_search(&(j as u32)).is_ok()
    }

    /// Coordinates of all ones in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j as usize)))
    }
}

fn check_dims(n_rows: usize, n_cols: usize) -> Result<()> {
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::invalid(format!(
            "matrix dimensions must be positive, got {n_rows}x{n_cols}"
        )));
    }
    if n_rows > u32::MAX as usize || n_cols > u32::MAX as usize {
        return Err(Error::invalid("matrix dimensions exceed u32 indices"));
    }
    Ok(())
}

/// Rank-1 binary pattern `u·vᵀ`, stored as the supports of `u` and `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    id: TileId,
    rows: Vec<u32>,
    cols: Vec<u32>,
}

impl Tile {
    /// Builds a tile from strictly increasing, non-empty index lists.
    pub fn new(id: TileId, rows: Vec<u32>, cols: Vec<u32>) -> Result<Self> {
        for (name, list) in [("rows", &rows), ("cols", &cols)] {
            if list.is_empty() {
                return Err(Error::invalid(format!("tile {id} has empty {name}")));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "tile {id} {name} are not strictly increasing"
                )));
            }
        }
        Ok(Tile { id, rows, cols })
    }

    /// Sorts and deduplicates the index lists before building the tile.
    pub fn from_unsorted(id: TileId, mut rows: Vec<u32>, mut cols: Vec<u32>) -> Result<Self> {
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        Tile::new(id, rows, cols)
    }

    pub fn id(&self) -> TileId {
        self.id
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    /// Number of cells, `|u|·|v|`.
    pub fn size(&self) -> u64 {
        self.rows.len() as u64 * self.cols.len() as u64
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .flat_map(move |&i| self.cols.iter().map(move |&j| (i as usize, j as usize)))
    }

    pub fn fits(&self, n_rows: usize, n_cols: usize) -> bool {
        // Lists are sorted, so the last entries are the maxima.
        (*self.rows.last().unwrap() as usize) < n_rows
            && (*self.cols.last().unwrap() as usize) < n_cols
    }

    pub(crate) fn check_fits(&self, n_rows: usize, n_cols: usize) -> Result<()> {
        if self.fits(n_rows, n_cols) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                tile: self.id,
                n_rows,
                n_cols,
            })
        }
    }
}

/// Walks the cells of `tile`, reporting for each whether `data` has a one
/// there. Each tile row is merged against the data row's sorted column list.
#[inline]
fn merge_cells<F>(tile: &Tile, data: &SparseBinaryMatrix, mut visit: F)
where
    F: FnMut(usize, usize, bool),
{
    for &i in &tile.rows {
        let drow = data.row(i as usize);
        let mut p = 0;
        for &j in &tile.cols {
            while p < drow.len() && drow[p] < j {
                p += 1;
            }
            let one = p < drow.len() && drow[p] == j;
            visit(i as usize, j as usize, one);
        }
    }
}

/// `Z_t`: how many zeros of `data` the tile covers.
pub fn zeros_covered(tile: &Tile, data: &SparseBinaryMatrix) -> Result<u64> {
    tile.check_fits(data.n_rows(), data.n_cols())?;
    let mut ones = 0u64;
    for &i in &tile.rows {
        ones += intersection_len(&tile.cols, data.row(i as usize)) as u64;
    }
    Ok(tile.size() - ones)
}

/// True iff every cell of the tile is a one in `data`.
pub fn is_dominated(tile: &Tile, data: &SparseBinaryMatrix) -> Result<bool> {
    Ok(zeros_covered(tile, data)? == 0)
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut x, mut y, mut n) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                x += 1;
                y += 1;
            }
        }
    }
    n
}

/// Reconstruction error of covering `data` with the OR of `chosen`.
pub fn error(data: &SparseBinaryMatrix, chosen: &[Tile]) -> Result<u64> {
    let mut state = CoverState::new(data);
    for tile in chosen {
        state.apply_tile(tile, data)?;
    }
    Ok(state.error())
}

/// Reconstruction error divided by the number of cells.
pub fn relative_error(err: u64, data: &SparseBinaryMatrix) -> Result<f64> {
    let size = data.size();
    if size == 0 {
        return Err(Error::invalid("relative error of an empty matrix"));
    }
    Ok(err as f64 / size as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitGrid {
    n_cols: usize,
    words: Vec<u64>,
}

impl BitGrid {
    fn new(n_rows: usize, n_cols: usize) -> Self {
        let bits = n_rows * n_cols;
        BitGrid {
            n_cols,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> bool {
        let b = i * self.n_cols + j;
        self.words[b >> 6] >> (b & 63) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize) {
        let b = i * self.n_cols + j;
        self.words[b >> 6] |= 1 << (b & 63);
    }

    fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Union of the tiles chosen so far, measured against a fixed data matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverState {
    n_rows: usize,
    n_cols: usize,
    covered: BitGrid,
    covered_ones: u64,
    covered_zeros: u64,
    data_ones: u64,
}

impl CoverState {
    /// The empty cover of `data`.
    pub fn new(data: &SparseBinaryMatrix) -> Self {
        CoverState {
            n_rows: data.n_rows(),
            n_cols: data.n_cols(),
            covered: BitGrid::new(data.n_rows(), data.n_cols()),
            covered_ones: 0,
            covered_zeros: 0,
            data_ones: data.nnz(),
        }
    }

    pub fn covered_ones(&self) -> u64 {
        self.covered_ones
    }

    pub fn covered_zeros(&self) -> u64 {
        self.covered_zeros
    }

    pub fn data_ones(&self) -> u64 {
        self.data_ones
    }

    /// Uncovered ones plus covered zeros.
    pub fn error(&self) -> u64 {
        self.data_ones - self.covered_ones + self.covered_zeros
    }

    pub fn is_covered(&self, i: usize, j: usize) -> bool {
        i < self.n_rows && j < self.n_cols && self.covered.get(i, j)
    }

    /// Number of set bits in the coverage bitmap.
    pub fn covered_cells(&self) -> u64 {
        self.covered.count_ones()
    }

    fn check(&self, tile: &Tile, data: &SparseBinaryMatrix) -> Result<()> {
        if data.n_rows() != self.n_rows || data.n_cols() != self.n_cols {
            return Err(Error::invalid(format!(
                "cover state is {}x{} but data is {}x{}",
                self.n_rows,
                self.n_cols,
                data.n_rows(),
                data.n_cols()
            )));
        }
        tile.check_fits(self.n_rows, self.n_cols)
    }

    /// Error reduction from adding `tile`, without changing the state.
    /// Negative when the tile covers more new zeros than new ones.
    pub fn gain(&self, tile: &Tile, data: &SparseBinaryMatrix) -> Result<i64> {
        self.check(tile, data)?;
        let mut gain = 0i64;
        merge_cells(tile, data, |i, j, one| {
            if !self.covered.get(i, j) {
                gain += if one { 1 } else { -1 };
            }
        });
        Ok(gain)
    }

    /// ORs `tile` into the cover and returns the error reduction it caused.
    pub fn apply_tile(&mut self, tile: &Tile, data: &SparseBinaryMatrix) -> Result<i64> {
        self.check(tile, data)?;
        let (mut ones, mut zeros) = (0u64, 0u64);
        let covered = &mut self.covered;
        merge_cells(tile, data, |i, j, one| {
            if !covered.get(i, j) {
                covered.set(i, j);
                if one {
                    ones += 1;
                } else {
                    zeros += 1;
                }
            }
        });
        self.covered_ones += ones;
        self.covered_zeros += zeros;
        Ok(ones as i64 - zeros as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile(id: u64, rows: &[u32], cols: &[u32]) -> Tile {
        Tile::new(TileId(id), rows.to_vec(), cols.to_vec()).unwrap()
    }

    fn diagonal(n: usize) -> SparseBinaryMatrix {
        SparseBinaryMatrix::from_coords(n, n, (0..n).map(|i| (i, i))).unwrap()
    }

    #[test]
    fn error_of_half_covered_square() {
        let d = SparseBinaryMatrix::from_coords(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(error(&d, &[tile(0, &[0], &[0, 1])]).unwrap(), 2);
        assert_eq!(error(&d, &[]).unwrap(), 4);
    }

    #[test]
    fn error_on_diagonal_counts_covered_zeros() {
        // Cells of rows {0,1} x cols {0,1}: (0,0) and (1,1) are ones, the
        // other two are zeros. One diagonal one stays uncovered.
        let d = diagonal(3);
        let t = tile(0, &[0, 1], &[0, 1]);
        let mut s = CoverState::new(&d);
        s.apply_tile(&t, &d).unwrap();
        assert_eq!(s.covered_ones(), 2);
        assert_eq!(s.covered_zeros(), 2);
        assert_eq!(s.error(), 3);
        assert_eq!(zeros_covered(&t, &d).unwrap(), 2);
        assert!(!is_dominated(&t, &d).unwrap());
    }

    #[test]
    fn relative_error_arithmetic() {
        let d = SparseBinaryMatrix::from_coords(1000, 1200, []).unwrap();
        assert_eq!(relative_error(600, &d).unwrap(), 0.0005);
        assert_eq!(relative_error(0, &d).unwrap(), 0.0);
        let d = SparseBinaryMatrix::from_coords(10, 10, (0..30).map(|c| (c / 10, c % 10))).unwrap();
        assert_eq!(relative_error(d.nnz(), &d).unwrap(), 0.3);
    }

    #[test]
    fn zero_sized_matrix_rejected() {
        assert!(matches!(
            SparseBinaryMatrix::from_coords(0, 5, []),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn out_of_bounds_tile_is_a_dimension_mismatch() {
        let d = diagonal(3);
        let t = tile(7, &[0, 3], &[0]);
        assert!(matches!(
            error(&d, std::slice::from_ref(&t)),
            Err(Error::DimensionMismatch {
                tile: TileId(7),
                ..
            })
        ));
        assert!(zeros_covered(&t, &d).is_err());
    }

    #[test]
    fn domination() {
        let d = SparseBinaryMatrix::from_coords(3, 3, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert!(is_dominated(&tile(0, &[0, 1], &[0, 1]), &d).unwrap());
        assert!(!is_dominated(&tile(0, &[0, 2], &[0]), &d).unwrap());
        assert_eq!(zeros_covered(&tile(0, &[0, 1], &[0, 1]), &d).unwrap(), 0);
        // Tile entirely outside the support.
        assert_eq!(
            zeros_covered(&tile(0, &[2], &[0, 1, 2]), &diagonal(3)).unwrap(),
            2
        );
        let empty_rows = SparseBinaryMatrix::from_coords(4, 4, [(0, 0)]).unwrap();
        assert_eq!(
            zeros_covered(&tile(0, &[1, 2], &[0, 1, 2]), &empty_rows).unwrap(),
            6
        );
    }

    #[test]
    fn apply_is_idempotent() {
        let d = diagonal(4);
        let t = tile(0, &[0, 1, 2], &[1, 2]);
        let mut s = CoverState::new(&d);
        s.apply_tile(&t, &d).unwrap();
        let once = s.clone();
        assert_eq!(s.apply_tile(&t, &d).unwrap(), 0);
        assert_eq!(s, once);
    }

    #[test]
    fn dominated_tile_on_empty_state() {
        let d = SparseBinaryMatrix::from_coords(3, 3, (0..9).map(|c| (c / 3, c % 3))).unwrap();
        let t = tile(0, &[0, 2], &[0, 1, 2]);
        let mut s = CoverState::new(&d);
        assert_eq!(s.gain(&t, &d).unwrap(), 6);
        s.apply_tile(&t, &d).unwrap();
        assert_eq!(s.covered_ones(), 6);
        assert_eq!(s.gain(&tile(1, &[0], &[1, 2]), &d).unwrap(), 0);
    }

    #[test]
    fn negative_gain() {
        // Three new ones and five new zeros.
        let d = SparseBinaryMatrix::from_coords(2, 4, [(0, 0), (0, 1), (1, 3)]).unwrap();
        let t = tile(0, &[0, 1], &[0, 1, 2, 3]);
        let s = CoverState::new(&d);
        assert_eq!(s.gain(&t, &d).unwrap(), -2);
        assert_eq!(s.error(), 3);
    }

    #[test]
    fn from_unsorted_dedups() {
        let t = Tile::from_unsorted(TileId(1), vec![3, 1, 3], vec![2, 0]).unwrap();
        assert_eq!(t.rows(), &[1, 3]);
        assert_eq!(t.cols(), &[0, 2]);
        assert!(Tile::new(TileId(1), vec![1, 1], vec![0]).is_err());
        assert!(Tile::new(TileId(1), vec![], vec![0]).is_err());
    }

    #[test]
    fn state_dimension_check() {
        let a = diagonal(3);
        let b = diagonal(4);
        let s = CoverState::new(&a);
        assert!(s.gain(&tile(0, &[0], &[0]), &b).is_err());
    }
}
