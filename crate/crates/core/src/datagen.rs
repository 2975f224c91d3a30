//! Synthetic benchmark instances.
//!
//! Base tiles are outer products of Bernoulli(p) vectors. Every base tile gets
//! `n_copies` perturbed copies in which a fraction `d` of the ones of each
//! vector is moved to positions that were zero. The data matrix is the OR of
//! either the base tiles or all tiles, followed by uniform bit-flip noise.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{SparseBinaryMatrix, Tile, TileId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    /// OR of the base tiles only; copies are decoys that cover zeros.
    BaseOnly,
    /// OR of base tiles and copies; every tile is dominated before noise.
    AllTiles,
}

impl fmt::Display for Assembly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assembly::BaseOnly => "base_only",
            Assembly::AllTiles => "all_tiles",
        })
    }
}

impl FromStr for Assembly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "base_only" => Ok(Assembly::BaseOnly),
            "all_tiles" => Ok(Assembly::AllTiles),
            _ => Err(Error::invalid(format!("unknown assembly {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileDensity {
    BernoulliP(f64),
    /// Density of the assembled matrix before noise.
    Target(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_base_tiles: usize,
    pub n_copies: usize,
    pub density: TileDensity,
    pub perturb_fraction: f64,
    pub noise_fraction: f64,
    pub assemble_from: Assembly,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rows: 1000,
            n_cols: 1200,
            n_base_tiles: 100,
            n_copies: 5,
            density: TileDensity::Target(0.3),
            perturb_fraction: 0.1,
            noise_fraction: 0.1,
            assemble_from: Assembly::BaseOnly,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// All tiles assembled and no noise, so every tile is dominated.
    pub fn exact_preset(self) -> Self {
        SynthConfig {
            assemble_from: Assembly::AllTiles,
            noise_fraction: 0.0,
            ..self
        }
    }

    pub fn n_tiles(&self) -> usize {
        self.n_base_tiles * (1 + self.n_copies)
    }

    /// Tiles ORed into the data matrix.
    pub fn participating_tiles(&self) -> usize {
        match self.assemble_from {
            Assembly::BaseOnly => self.n_base_tiles,
            Assembly::AllTiles => self.n_tiles(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::invalid("matrix dimensions must be at least 1"));
        }
        if self.n_base_tiles == 0 {
            return Err(Error::invalid("at least one base tile is required"));
        }
        for (name, v) in [
            ("perturb fraction", self.perturb_fraction),
            ("noise fraction", self.noise_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        match self.density {
            TileDensity::BernoulliP(p) if !(p > 0.0 && p <= 1.0) => Err(Error::invalid(format!(
                "Bernoulli parameter {p} outside (0, 1]"
            ))),
            TileDensity::Target(t) if !(t > 0.0 && t < 1.0) => Err(Error::Calibration(format!(
                "target density {t} outside (0, 1)"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TileOrigin {
    Base { base: usize },
    Copy { base: usize, copy: usize },
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub data: SparseBinaryMatrix,
    /// Base tile `b` is followed by its copies; ids equal positions.
    pub tiles: Vec<Tile>,
    pub origins: Vec<TileOrigin>,
    pub bernoulli_p: f64,
    pub pre_noise_density: f64,
    pub flipped: usize,
}

/// Density of the OR of `n_tiles` independent Bernoulli(p) tiles.
pub fn union_density(p: f64, n_tiles: f64) -> f64 {
    1.0 - (1.0 - p * p).powf(n_tiles)
}

/// Bisection for the `p` with `union_density(p, n_tiles) = target`.
pub fn solve_bernoulli_p(target: f64, n_tiles: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!(
            "target density {target} outside (0, 1)"
        )));
    }
    if !(n_tiles > 0.0 && n_tiles.is_finite()) {
        return Err(Error::Calibration(format!(
            "cannot calibrate for {n_tiles} tiles"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let f = |p: f64| union_density(p, n_tiles) - target;
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::Calibration(format!(
            "density {target} not bracketed for {n_tiles} tiles"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibration tolerance before a correction is applied.
const CALIBRATION_SLACK: f64 = 0.002;
const CALIBRATION_ROUNDS: usize = 8;

/// Bernoulli parameter that gives `cfg` a pre-noise density of `target`.
///
/// Starts from the independent-union model, then generates trial matrices
/// with `cfg.seed`; while the realised density misses, re-solves with the
/// effective tile count implied by the last trial. Returns the best trial.
pub fn calibrate_p(target: f64, cfg: &SynthConfig) -> Result<f64> {
    let mut p = solve_bernoulli_p(target, cfg.participating_tiles() as f64)?;
    let mut best = (f64::INFINITY, p);
    for _ in 0..CALIBRATION_ROUNDS {
        let observed = build(cfg, p)?.pre_noise_density;
        let miss = (observed - target).abs();
        if miss < best.0 {
            best = (miss, p);
        }
        if miss <= CALIBRATION_SLACK {
            break;
        }
        if observed <= 0.0 || observed >= 1.0 {
            return Err(Error::Calibration(format!(
                "trial generation at p = {p} gave density {observed}"
            )));
        }
        let effective = (1.0 - observed).ln() / (1.0 - p * p).ln();
        p = solve_bernoulli_p(target, effective)?;
    }
    Ok(best.1)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthInstance> {
    cfg.validate()?;
    let p = match cfg.density {
        TileDensity::BernoulliP(p) => p,
        TileDensity::Target(t) => calibrate_p(t, cfg)?,
    };
    build(cfg, p)
}

fn build(cfg: &SynthConfig, p: f64) -> Result<SynthInstance> {
    cfg.validate()?;
    let (m, n) = (cfg.n_rows, cfg.n_cols);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let bases: Vec<(Vec<u32>, Vec<u32>)> = (0..cfg.n_base_tiles)
        .map(|_| {
            (
                bernoulli_support(&mut rng, m, p),
                bernoulli_support(&mut rng, n, p),
            )
        })
        .collect();

    let mut tiles = Vec::with_capacity(cfg.n_tiles());
    let mut origins = Vec::with_capacity(cfg.n_tiles());
    for (b, (u, v)) in bases.iter().enumerate() {
        tiles.push(Tile::new(TileId(tiles.len() as u64), u.clone(), v.clone())?);
        origins.push(TileOrigin::Base { base: b });
        for c in 0..cfg.n_copies {
            let u2 = move_ones(&mut rng, u, m, cfg.perturb_fraction, b)?;
            let v2 = move_ones(&mut rng, v, n, cfg.perturb_fraction, b)?;
            tiles.push(Tile::new(TileId(tiles.len() as u64), u2, v2)?);
            origins.push(TileOrigin::Copy { base: b, copy: c });
        }
    }

    let mut cells = vec![false; m * n];
    for (tile, origin) in tiles.iter().zip(&origins) {
        if cfg.assemble_from == Assembly::BaseOnly && matches!(origin, TileOrigin::Copy { .. }) {
            continue;
        }
        for (i, j) in tile.cells() {
            cells[i * n + j] = true;
        }
    }
    let pre_noise_density = cells.iter().filter(|&&c| c).count() as f64 / (m * n) as f64;

    let flipped = (cfg.noise_fraction * (m * n) as f64).round() as usize;
    for c in index::sample(&mut rng, m * n, flipped) {
        cells[c] = !cells[c];
    }

    let rows: Vec<Vec<u32>> = cells
        .chunks(n)
        .map(|row| {
            row.iter()
                .enumerate()
                .filter_map(|(j, &one)| one.then_some(j as u32))
                .collect()
        })
        .collect();
    Ok(SynthInstance {
        data: SparseBinaryMatrix::from_rows(n, rows)?,
        tiles,
        origins,
        bernoulli_p: p,
        pre_noise_density,
        flipped,
    })
}

/// Bernoulli(p) support over `0..len`, redrawn until non-empty.
fn bernoulli_support<R: Rng>(rng: &mut R, len: usize, p: f64) -> Vec<u32> {
    loop {
        let s: Vec<u32> = (0..len as u32).filter(|_| rng.random_bool(p)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// Moves `round(d·|support|)` ones of `support` to positions in `0..len`
/// outside it. The support size is unchanged.
fn move_ones<R: Rng>(
    rng: &mut R,
    support: &[u32],
    len: usize,
    d: f64,
    base: usize,
) -> Result<Vec<u32>> {
    let moves = (d * support.len() as f64).round() as usize;
    let free = len - support.len();
    if moves > free {
        return Err(Error::InfeasiblePerturbation { base, moves, free });
    }
    if moves == 0 {
        return Ok(support.to_vec());
    }
    let mut keep = vec![true; support.len()];
    for i in index::sample(rng, support.len(), moves) {
        keep[i] = false;
    }
    let mut in_support = vec![false; len];
    for &i in support {
        in_support[i as usize] = true;
    }
    let zeros: Vec<u32> = (0..len as u32)
        .filter(|&i| !in_support[i as usize])
        .collect();
    let mut out: Vec<u32> = support
        .iter()
        .zip(&keep)
        .filter_map(|(&i, &k)| k.then_some(i))
        .collect();
    out.extend(
        index::sample(rng, zeros.len(), moves)
            .into_iter()
            .map(|z| zeros[z]),
    );
    out.sort_unstable();
    Ok(out)
}
