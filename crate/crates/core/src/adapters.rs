//! Conversion of mined patterns into tiles.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{SparseBinaryMatrix, Tile, TileId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Itemset {
    items: Vec<u32>,
}

impl Itemset {
    pub fn new(mut items: Vec<u32>) -> Result<Self> {
        items.sort_unstable();
        items.dedup();
        if items.is_empty() {
            return Err(Error::invalid("empty itemset"));
        }
        Ok(Itemset { items })
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut p = 0;
    for &x in small {
        while p < big.len() && big[p] < x {
            p += 1;
        }
        if p == big.len() || big[p] != x {
            return false;
        }
        p += 1;
    }
    true
}

/// Tile of an itemset over a transaction matrix: the itemset's columns times
/// every row containing all of them. `None` if no transaction does.
pub fn tile_from_itemset(
    id: TileId,
    itemset: &Itemset,
    data: &SparseBinaryMatrix,
) -> Result<Option<Tile>> {
    if let Some(&j) = itemset.items.iter().find(|&&j| j as usize >= data.n_cols()) {
        return Err(Error::invalid(format!(
            "itemset {id} has item {j}, but the data has {} columns",
            data.n_cols()
        )));
    }
    let rows: Vec<u32> = (0..data.n_rows())
        .filter(|&i| is_subset(&itemset.items, data.row(i)))
        .map(|i| i as u32)
        .collect();
    if rows.is_empty() {
        warn!("itemset {id} has empty support; skipped");
        return Ok(None);
    }
    Tile::new(id, rows, itemset.items.clone()).map(Some)
}

/// Converts itemsets in order; tile ids are the itemset positions.
pub fn tiles_from_itemsets(itemsets: &[Itemset], data: &SparseBinaryMatrix) -> Result<Vec<Tile>> {
    let mut tiles = Vec::new();
    for (i, s) in itemsets.iter().enumerate() {
        tiles.extend(tile_from_itemset(TileId(i as u64), s, data)?);
    }
    Ok(tiles)
}

/// Supports of a redescription's two queries over a shared entity set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPairSupports {
    /// Entities where the left query holds.
    #[serde(rename = "uL")]
    pub u_left: Vec<u32>,
    #[serde(rename = "uR")]
    pub u_right: Vec<u32>,
    /// Attributes of the left query, indexing the left data's columns.
    #[serde(rename = "vL")]
    pub v_left: Vec<u32>,
    #[serde(rename = "vR")]
    pub v_right: Vec<u32>,
}

/// `(uL ∧ uR)[vLᵀ, vRᵀ]` over the left and right columns placed side by
/// side, right columns shifted by `n_cols_left`. `None` if the entity sets
/// do not intersect.
pub fn tile_from_query_pair(
    id: TileId,
    q: &QueryPairSupports,
    n_cols_left: usize,
) -> Result<Option<Tile>> {
    if let Some(&j) = q.v_left.iter().find(|&&j| j as usize >= n_cols_left) {
        return Err(Error::invalid(format!(
            "query pair {id} uses left column {j}, but the left data has {n_cols_left} columns"
        )));
    }
    let mut left = q.u_left.clone();
    left.sort_unstable();
    left.dedup();
    let mut right = q.u_right.clone();
    right.sort_unstable();
    right.dedup();
    let rows: Vec<u32> = left
        .into_iter()
        .filter(|r| right.binary_search(r).is_ok())
        .collect();
    if rows.is_empty() {
        warn!("query pair {id} has disjoint supports; skipped");
        return Ok(None);
    }
    let offset =
        u32::try_from(n_cols_left).map_err(|_| Error::invalid("left column count exceeds u32"))?;
    let cols: Vec<u32> = q
        .v_left
        .iter()
        .copied()
        .chain(q.v_right.iter().map(|&j| j + offset))
        .collect();
    if cols.is_empty() {
        warn!("query pair {id} has no attributes; skipped");
        return Ok(None);
    }
    Tile::from_unsorted(id, rows, cols).map(Some)
}

pub fn tiles_from_query_pairs(
    pairs: &[QueryPairSupports],
    n_cols_left: usize,
) -> Result<Vec<Tile>> {
    let mut tiles = Vec::new();
    for (i, q) in pairs.iter().enumerate() {
        tiles.extend(tile_from_query_pair(TileId(i as u64), q, n_cols_left)?);
    }
    Ok(tiles)
}

/// The matrix whose ones are exactly the cells of the given tiles.
pub fn union_matrix(n_rows: usize, n_cols: usize, tiles: &[Tile]) -> Result<SparseBinaryMatrix> {
    SparseBinaryMatrix::from_coords(n_rows, n_cols, tiles.iter().flat_map(|t| t.cells()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::is_dominated;

    fn transactions() -> SparseBinaryMatrix {
        SparseBinaryMatrix::from_rows(
            4,
            vec![
                vec![0, 1, 2],
                vec![0, 2],
                vec![1, 2, 3],
                vec![0, 1, 2, 3],
                vec![3],
            ],
        )
        .unwrap()
    }

    #[test]
    fn singleton_itemset() {
        let d = transactions();
        let t = tile_from_itemset(TileId(0), &Itemset::new(vec![1]).unwrap(), &d)
            .unwrap()
            .unwrap();
        assert_eq!(t.rows(), &[0, 2, 3]);
        assert_eq!(t.cols(), &[1]);
    }

    #[test]
    fn full_itemset_picks_full_row() {
        let d = transactions();
        let t = tile_from_itemset(TileId(0), &Itemset::new(vec![3, 2, 1, 0]).unwrap(), &d)
            .unwrap()
            .unwrap();
        assert_eq!(t.rows(), &[3]);
        assert!(is_dominated(&t, &d).unwrap());
    }

    #[test]
    fn unsupported_itemset_skipped() {
        let d = SparseBinaryMatrix::from_rows(3, vec![vec![0], vec![1]]).unwrap();
        let sets = [
            Itemset::new(vec![0, 1]).unwrap(),
            Itemset::new(vec![1]).unwrap(),
        ];
        let tiles = tiles_from_itemsets(&sets, &d).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].id(), TileId(1));
        assert!(tile_from_itemset(TileId(0), &Itemset::new(vec![5]).unwrap(), &d).is_err());
        assert!(Itemset::new(vec![]).is_err());
    }

    fn pair(ul: &[u32], ur: &[u32], vl: &[u32], vr: &[u32]) -> QueryPairSupports {
        QueryPairSupports {
            u_left: ul.to_vec(),
            u_right: ur.to_vec(),
            v_left: vl.to_vec(),
            v_right: vr.to_vec(),
        }
    }

    #[test]
    fn identical_supports() {
        let t = tile_from_query_pair(TileId(0), &pair(&[1, 3], &[3, 1], &[0], &[1]), 2)
            .unwrap()
            .unwrap();
        assert_eq!(t.rows(), &[1, 3]);
        assert_eq!(t.cols(), &[0, 3]);
    }

    #[test]
    fn disjoint_supports_skipped() {
        assert_eq!(
            tile_from_query_pair(TileId(0), &pair(&[0, 1], &[2, 3], &[0], &[0]), 1).unwrap(),
            None
        );
    }

    #[test]
    fn left_column_out_of_range() {
        assert!(tile_from_query_pair(TileId(0), &pair(&[0], &[0], &[4], &[0]), 3).is_err());
    }

    #[test]
    fn six_entity_redescription() {
        // Left view: 3 species columns, right view: 2 climate columns.
        // q_L holds on entities {0, 1, 2, 4} using species 0 and 2;
        // q_R holds on {1, 2, 3, 4} using climate attribute 1.
        let q = pair(&[0, 1, 2, 4], &[1, 2, 3, 4], &[0, 2], &[1]);
        let t = tile_from_query_pair(TileId(0), &q, 3).unwrap().unwrap();
        let mut expected = Vec::new();
        for i in [1, 2, 4] {
            for j in [0, 2, 4] {
                expected.push((i, j));
            }
        }
        assert_eq!(t.cells().collect::<Vec<_>>(), expected);
        let d = union_matrix(6, 5, std::slice::from_ref(&t)).unwrap();
        assert_eq!(d.nnz(), 9);
        assert!(is_dominated(&t, &d).unwrap());
    }
}
