use std::collections::HashSet;

use patternset_core::adapters::{tile_from_itemset, Itemset};
use patternset_core::datagen::{generate, Assembly, SynthConfig, TileDensity};
use patternset_core::matrix::{error, is_dominated, relative_error};
use patternset_core::select::{greedy, hapsi, naive};
use patternset_core::{
    Algorithm, Error, Mode, SelectionParams, SketchConfig, SparseBinaryMatrix, Tile, TileId,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_exact(seed: u64) -> (SparseBinaryMatrix, Vec<Tile>) {
    let cfg = SynthConfig {
        n_rows: 60,
        n_cols: 72,
        n_base_tiles: 10,
        n_copies: 3,
        density: TileDensity::Target(0.2),
        seed,
        ..SynthConfig::default()
    }
    .exact_preset();
    let inst = generate(&cfg).unwrap();
    (inst.data, inst.tiles)
}

fn params(t_max: usize, mode: Mode) -> SelectionParams {
    SelectionParams {
        t_max,
        mode,
        ..SelectionParams::default()
    }
}

#[test]
fn hapsi_error_strictly_decreases_and_trace_rechecks() {
    for seed in 0..5 {
        let (data, tiles) = small_exact(seed);
        let sel = hapsi(&data, &tiles, &params(40, Mode::Exact)).unwrap();
        assert!(!sel.chosen.is_empty());
        let mut last = sel.initial_error;
        for (i, rec) in sel.trace.records.iter().enumerate() {
            assert!(rec.error < last, "seed {seed} iteration {}", rec.iteration);
            assert_eq!(rec.covered_zeros, 0);
            assert_eq!(rec.iteration, i + 1);
            assert_eq!(rec.tile_index, sel.chosen[i]);
            let prefix: Vec<Tile> = sel.chosen[..=i].iter().map(|&j| tiles[j].clone()).collect();
            assert_eq!(error(&data, &prefix).unwrap(), rec.error);
            last = rec.error;
        }
        assert_eq!(sel.final_error, last);
    }
}

#[test]
fn greedy_beats_naive_on_exact_instances() {
    for seed in 0..5 {
        let (data, tiles) = small_exact(seed);
        let p = params(20, Mode::Exact);
        let g = greedy(&data, &tiles, &p).unwrap();
        let n = naive(&data, &tiles, &p).unwrap();
        assert!(g.final_error <= n.final_error, "seed {seed}");
    }
}

fn random_dominated(rng: &mut ChaCha8Rng, n_tiles: usize) -> (SparseBinaryMatrix, Vec<Tile>) {
    let tiles: Vec<Tile> = (0..n_tiles)
        .map(|i| {
            let rows: Vec<u32> = (0..40).filter(|_| rng.random_bool(0.2)).collect();
            let cols: Vec<u32> = (0..40).filter(|_| rng.random_bool(0.2)).collect();
            Tile::from_unsorted(TileId(i as u64), rows, cols)
        })
        .filter_map(|t| t.ok())
        .collect();
    let data =
        SparseBinaryMatrix::from_coords(40, 40, tiles.iter().flat_map(|t| t.cells())).unwrap();
    (data, tiles)
}

/// True if every greedy step had a single tile of largest gain.
fn unique_maximizers(data: &SparseBinaryMatrix, tiles: &[Tile], chosen: &[usize]) -> bool {
    let mut state = patternset_core::CoverState::new(data);
    for (step, &c) in chosen.iter().enumerate() {
        let mut gains: Vec<i64> = (0..tiles.len())
            .filter(|i| !chosen[..step].contains(i))
            .map(|i| state.gain(&tiles[i], data).unwrap())
            .collect();
        gains.sort_unstable_by(|a, b| b.cmp(a));
        if gains.len() > 1 && gains[0] == gains[1] {
            return false;
        }
        state.apply_tile(&tiles[c], data).unwrap();
    }
    true
}

#[test]
fn unbounded_sketches_reproduce_greedy() {
    // With k above every tile size the estimates are exact union sizes, and
    // with m = l HaPSi takes the tile of largest union first.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut compared = 0;
    for seed in 0..30 {
        let (data, tiles) = random_dominated(&mut rng, 25);
        let p = SelectionParams {
            t_max: 6,
            m_candidates: tiles.len(),
            sketch: SketchConfig {
                k: data.size() as usize + 1,
                n_reps: 2,
                seed,
            },
            ..SelectionParams::default()
        };
        let g = greedy(&data, &tiles, &p).unwrap();
        if !unique_maximizers(&data, &tiles, &g.chosen) {
            continue;
        }
        let h = hapsi(&data, &tiles, &p).unwrap();
        assert_eq!(h.chosen, g.chosen, "seed {seed}");
        compared += 1;
    }
    assert!(
        compared >= 5,
        "only {compared} instances had unique maximizers"
    );
}

#[test]
fn hapsi_close_to_greedy_on_small_instance() {
    // Dimensions and base-tile count both scaled down twentyfold.
    for seed in 0..10 {
        let cfg = SynthConfig {
            n_rows: 50,
            n_cols: 60,
            n_base_tiles: 5,
            seed,
            ..SynthConfig::default()
        }
        .exact_preset();
        let inst = generate(&cfg).unwrap();
        let p = SelectionParams::default();
        let h = hapsi(&inst.data, &inst.tiles, &p).unwrap();
        let g = greedy(&inst.data, &inst.tiles, &p).unwrap();
        let rh = relative_error(h.final_error, &inst.data).unwrap();
        let rg = relative_error(g.final_error, &inst.data).unwrap();
        assert!(rh <= rg + 0.02, "seed {seed}: hapsi {rh} greedy {rg}");
    }
}

#[test]
fn selections_are_deterministic() {
    let cfg = SynthConfig {
        n_rows: 80,
        n_cols: 90,
        n_base_tiles: 20,
        seed: 3,
        ..SynthConfig::default()
    };
    let inst = generate(&cfg).unwrap();
    for alg in Algorithm::ALL {
        let p = params(30, Mode::Inexact);
        let a = alg.run(&inst.data, &inst.tiles, &p).unwrap();
        let b = alg.run(&inst.data, &inst.tiles, &p).unwrap();
        assert_eq!(a.chosen, b.chosen, "{alg}");
        let errs: Vec<u64> = a.trace.errors().collect();
        assert_eq!(errs, b.trace.errors().collect::<Vec<_>>());
    }
}

#[test]
fn exact_mode_rejects_undominated_tiles() {
    let data = SparseBinaryMatrix::from_coords(3, 3, [(0, 0), (0, 1)]).unwrap();
    let tiles = vec![
        Tile::new(TileId(4), vec![0], vec![0, 1]).unwrap(),
        Tile::new(TileId(9), vec![0, 1], vec![0]).unwrap(),
    ];
    for alg in Algorithm::ALL {
        match alg.run(&data, &tiles, &params(5, Mode::Exact)) {
            Err(Error::NotDominated { tile, zeros }) => {
                assert_eq!(tile, TileId(9));
                assert_eq!(zeros, 1);
            }
            other => panic!("{alg}: {other:?}"),
        }
        assert!(alg.run(&data, &tiles, &params(5, Mode::Inexact)).is_ok());
    }
}

#[test]
fn max_k_cover_matches_textbook_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let universe = rng.random_range(5..40usize);
        let n_sets = rng.random_range(2..15usize);
        let sets: Vec<Vec<u32>> = (0..n_sets)
            .map(|_| {
                let mut s: Vec<u32> = (0..universe as u32)
                    .filter(|_| rng.random_bool(0.3))
                    .collect();
                if s.is_empty() {
                    s.push(rng.random_range(0..universe as u32));
                }
                s
            })
            .collect();
        let k = rng.random_range(1..=n_sets);
        let data = SparseBinaryMatrix::from_coords(
            universe,
            1,
            sets.iter().flatten().map(|&r| (r as usize, 0)),
        )
        .unwrap();
        let tiles: Vec<Tile> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| Tile::new(TileId(i as u64), s.clone(), vec![0]).unwrap())
            .collect();
        let got = greedy(&data, &tiles, &params(k, Mode::Exact))
            .unwrap()
            .chosen;

        let mut covered = HashSet::new();
        let mut used = vec![false; n_sets];
        let mut want = Vec::new();
        for _ in 0..k {
            let best = (0..n_sets)
                .filter(|&i| !used[i])
                .map(|i| (sets[i].iter().filter(|x| !covered.contains(*x)).count(), i))
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            match best {
                Some((gain, i)) if gain > 0 => {
                    used[i] = true;
                    covered.extend(sets[i].iter().copied());
                    want.push(i);
                }
                _ => break,
            }
        }
        assert_eq!(got, want);
    }
}

proptest! {
    #[test]
    fn itemset_rows_match_containment(
        bits in proptest::collection::vec(any::<bool>(), 20 * 8),
        items in proptest::collection::btree_set(0u32..8, 3),
    ) {
        let data = SparseBinaryMatrix::from_coords(
            20,
            8,
            bits.iter().enumerate().filter(|(_, &b)| b).map(|(c, _)| (c / 8, c % 8)),
        )
        .unwrap();
        let items: Vec<u32> = items.into_iter().collect();
        let want: Vec<u32> = (0..20u32)
            .filter(|&i| items.iter().all(|&j| data.contains(i as usize, j as usize)))
            .collect();
        let got = tile_from_itemset(TileId(0), &Itemset::new(items.clone()).unwrap(), &data).unwrap();
        match got {
            None => prop_assert!(want.is_empty()),
            Some(t) => {
                prop_assert_eq!(t.rows(), &want[..]);
                prop_assert_eq!(t.cols(), &items[..]);
                prop_assert!(is_dominated(&t, &data).unwrap());
            }
        }
    }
}

#[test]
fn calibrated_density_close_to_target() {
    for assemble_from in [Assembly::BaseOnly, Assembly::AllTiles] {
        for target in [0.06, 0.3] {
            for seed in 0..5 {
                let cfg = SynthConfig {
                    n_rows: 300,
                    n_cols: 360,
                    density: TileDensity::Target(target),
                    noise_fraction: 0.0,
                    assemble_from,
                    seed,
                    ..SynthConfig::default()
                };
                let inst = generate(&cfg).unwrap();
                assert!(
                    (inst.data.density() - target).abs() <= 0.01,
                    "{assemble_from:?} target {target} seed {seed}: {}",
                    inst.data.density()
                );
            }
        }
    }
}
