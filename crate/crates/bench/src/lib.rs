//! Shared fixtures for the benchmarks.

use patternset_core::datagen::{generate, SynthConfig};
use patternset_core::{SparseBinaryMatrix, Tile};

/// Synthetic instance with default density and noise and exactly `n_tiles`
/// candidates (whole base-plus-copies groups, then truncated).
pub fn instance(
    n_rows: usize,
    n_cols: usize,
    n_tiles: usize,
    seed: u64,
) -> (SparseBinaryMatrix, Vec<Tile>) {
    let cfg = SynthConfig {
        n_rows,
        n_cols,
        n_base_tiles: n_tiles.div_ceil(6).max(1),
        seed,
        ..SynthConfig::default()
    };
    let mut inst = generate(&cfg).expect("valid synthetic config");
    inst.tiles.truncate(n_tiles);
    (inst.data, inst.tiles)
}

#[cfg(test)]
mod tests {
    #[test]
    fn instance_has_requested_tile_count() {
        let (data, tiles) = super::instance(60, 70, 20, 1);
        assert_eq!(tiles.len(), 20);
        assert_eq!((data.n_rows(), data.n_cols()), (60, 70));
    }
}
