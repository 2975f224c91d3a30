//! The `patternset` command line: synthetic data generation, pattern
//! conversion, selection runs and benchmark sweeps.
//!
//! Exit codes: 0 success, 1 I/O and other failures, 2 unparsable input,
//! 3 a non-dominated tile in exact mode, 4 infeasible parameters.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use patternset_core::adapters::{tiles_from_itemsets, tiles_from_query_pairs, union_matrix};
use patternset_core::datagen::{generate, Assembly, SynthConfig, TileDensity};
use patternset_core::hashing::{sketch_tiles, DEFAULT_K, DEFAULT_MODULUS, DEFAULT_REPS};
use patternset_core::matrix::relative_error;
use patternset_core::select::{DEFAULT_M_CANDIDATES, DEFAULT_T_MAX};
use patternset_core::{
    Algorithm, Mode, Selection, SelectionParams, SketchConfig, SparseBinaryMatrix, Tile,
};
use serde::Serialize;
use serde_json::json;

pub mod formats;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] patternset_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use patternset_core::Error as E;
        match self {
            CliError::Parse(_) => 2,
            CliError::Core(E::NotDominated { .. }) => 3,
            CliError::Core(E::DimensionMismatch { .. } | E::OutOfBounds { .. }) => 2,
            CliError::Core(_) => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "patternset",
    version,
    about = "Select rank-1 binary patterns that reconstruct a binary matrix"
)]
pub struct Cli {
    /// Worker threads used for sketching and candidate scoring [default: all cores]
    #[arg(long, global = true, env = "PATTERNSET_THREADS")]
    pub threads: Option<usize>,

    /// Print the resolved configuration as JSON and exit
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic matrix and its candidate tiles
    Generate(GenerateArgs),
    /// Run a selection algorithm on a matrix and candidate tiles
    Select(SelectArgs),
    /// Compare the algorithms over a sweep of tile counts or matrix sizes
    Bench(BenchArgs),
    /// Turn itemsets or redescription supports into tiles
    Convert(ConvertArgs),
}

fn parse_with<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long, default_value_t = 100)]
    pub base_tiles: usize,
    #[arg(long, default_value_t = 5)]
    pub copies: usize,
    /// Target density of the assembled matrix before noise
    #[arg(long, default_value_t = 0.3, conflicts_with = "bernoulli_p")]
    pub density: f64,
    /// Bernoulli parameter of the tile vectors, instead of --density
    #[arg(long)]
    pub bernoulli_p: Option<f64>,
    /// Fraction of each copy's ones moved elsewhere
    #[arg(long, default_value_t = 0.1)]
    pub perturb: f64,
    /// Fraction of cells flipped after assembly
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Tiles ORed into the matrix: base_only or all_tiles
    #[arg(long, default_value = "base_only", value_parser = parse_with::<Assembly>)]
    pub assemble: Assembly,
    /// Dominated preset: all tiles assembled and no noise
    #[arg(long)]
    pub exact: bool,
}

impl DataArgs {
    pub fn config(&self, n_rows: usize, n_cols: usize, seed: u64) -> SynthConfig {
        let cfg = SynthConfig {
            n_rows,
            n_cols,
            n_base_tiles: self.base_tiles,
            n_copies: self.copies,
            density: match self.bernoulli_p {
                Some(p) => TileDensity::BernoulliP(p),
                None => TileDensity::Target(self.density),
            },
            perturb_fraction: self.perturb,
            noise_fraction: self.noise,
            assemble_from: self.assemble,
            seed,
        };
        if self.exact {
            cfg.exact_preset()
        } else {
            cfg
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long, default_value_t = 1200)]
    pub cols: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output matrix file
    #[arg(long)]
    pub matrix: PathBuf,
    /// Output tile file
    #[arg(long)]
    pub tiles: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SelectionArgs {
    /// exact (tiles must be dominated) or inexact
    #[arg(long, default_value = "exact", value_parser = parse_with::<Mode>)]
    pub mode: Mode,
    /// Bottom-k sketch size
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Hash repetitions
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    /// Candidates verified per HaPSi iteration
    #[arg(long, default_value_t = DEFAULT_M_CANDIDATES)]
    pub m: usize,
    /// Maximum number of selected tiles
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: usize,
    /// Stop HaPSi at the first non-improving candidate
    #[arg(long)]
    pub strict_pseudocode: bool,
    /// Write 0 instead of measured times, for reproducible outputs
    #[arg(long)]
    pub no_timing: bool,
}

impl SelectionArgs {
    pub fn params(&self, seed: u64) -> SelectionParams {
        SelectionParams {
            t_max: self.t_max,
            m_candidates: self.m,
            mode: self.mode,
            sketch: SketchConfig {
                k: self.k,
                n_reps: self.reps,
                seed,
            },
            strict_pseudocode: self.strict_pseudocode,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub tiles: PathBuf,
    /// Output directory for trace.csv, summary.json and chosen.jsonl
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "hapsi", value_parser = parse_with::<Algorithm>)]
    pub algorithm: Algorithm,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Seed for the hash functions
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write every tile's bottom-k sketches to this file
    #[arg(long)]
    pub dump_sketches: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Size {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s
            .split_once('x')
            .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
        let parse = |v: &str| v.parse::<usize>().map_err(|_| format!("bad size {s:?}"));
        Ok(Size {
            rows: parse(r)?,
            cols: parse(c)?,
        })
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Tile counts to sweep, at a fixed --rows x --cols
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "sweep_sizes",
        required_unless_present = "sweep_sizes"
    )]
    pub sweep_tiles: Vec<usize>,
    /// Matrix sizes (ROWSxCOLS) to sweep, at a fixed --n-tiles
    #[arg(long, value_delimiter = ',')]
    pub sweep_sizes: Vec<Size>,
    #[arg(long, default_value_t = 500)]
    pub rows: usize,
    #[arg(long, default_value_t = 600)]
    pub cols: usize,
    /// Candidate tiles per instance when sweeping sizes
    #[arg(long, default_value_t = 600)]
    pub n_tiles: usize,
    #[arg(long, value_delimiter = ',', default_value = "hapsi,greedy,naive", value_parser = parse_with::<Algorithm>)]
    pub algorithms: Vec<Algorithm>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternFormat {
    /// One itemset per line, space-separated column indices
    Itemsets,
    /// JSON lines with uL, uR, vL, vR arrays
    QueryPairs,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub format: PatternFormat,
    #[arg(long)]
    pub input: PathBuf,
    /// Data matrix: the transaction matrix for itemsets, or an explicit
    /// binary target for query pairs
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Number of left-view columns; right-view columns follow them
    #[arg(long)]
    pub left_cols: Option<usize>,
    /// Rows of the constructed matrix [default: largest entity + 1]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Columns of the constructed matrix [default: largest column + 1]
    #[arg(long)]
    pub cols: Option<usize>,
    /// Output tile file
    #[arg(long)]
    pub tiles: PathBuf,
    /// Write the union matrix of the converted query pairs here
    #[arg(long)]
    pub out_matrix: Option<PathBuf>,
}

/// Resolved settings of a `select` run, as written by `--dump-config` and
/// into `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub matrix: PathBuf,
    pub tiles: PathBuf,
    pub output: PathBuf,
    pub k: usize,
    pub n_reps: usize,
    pub m_candidates: usize,
    pub t_max: usize,
    pub seed: u64,
    pub strict_pseudocode: bool,
    pub threads: Option<usize>,
    pub hash_modulus: u64,
}

impl RunConfig {
    fn new(a: &SelectArgs, threads: Option<usize>) -> Self {
        RunConfig {
            command: "select",
            algorithm: a.algorithm,
            mode: a.selection.mode,
            matrix: a.matrix.clone(),
            tiles: a.tiles.clone(),
            output: a.out.clone(),
            k: a.selection.k,
            n_reps: a.selection.reps,
            m_candidates: a.selection.m,
            t_max: a.selection.t_max,
            seed: a.seed,
            strict_pseudocode: a.selection.strict_pseudocode,
            threads,
            hash_modulus: DEFAULT_MODULUS,
        }
    }
}

/// The configuration `--dump-config` prints for `cli`.
pub fn resolved_config(cli: &Cli) -> serde_json::Value {
    let threads = cli.threads;
    match &cli.command {
        Command::Generate(a) => json!({
            "command": "generate",
            "data": a.data.config(a.rows, a.cols, a.seed),
            "matrix": a.matrix,
            "tiles": a.tiles,
            "threads": threads,
        }),
        Command::Select(a) => serde_json::to_value(RunConfig::new(a, threads)).expect("plain data"),
        Command::Bench(a) => {
            let p = a.selection.params(a.seed);
            json!({
                "command": "bench",
                "algorithms": a.algorithms,
                "sweep_tiles": a.sweep_tiles,
                "sweep_sizes": a.sweep_sizes,
                "rows": a.rows,
                "cols": a.cols,
                "n_tiles": a.n_tiles,
                "data": a.data.config(a.rows, a.cols, a.seed),
                "mode": p.mode,
                "k": p.sketch.k,
                "n_reps": p.sketch.n_reps,
                "m_candidates": p.m_candidates,
                "t_max": p.t_max,
                "strict_pseudocode": p.strict_pseudocode,
                "seed": a.seed,
                "threads": threads,
            })
        }
        Command::Convert(a) => json!({
            "command": "convert",
            "format": a.format,
            "input": a.input,
            "matrix": a.matrix,
            "left_cols": a.left_cols,
            "rows": a.rows,
            "cols": a.cols,
            "tiles": a.tiles,
            "out_matrix": a.out_matrix,
            "threads": threads,
        }),
    }
}

/// Runs `cli`, inside a dedicated thread pool when `--threads` is set.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.dump_config {
        let text = serde_json::to_string_pretty(&resolved_config(cli)).expect("plain data");
        println!("{text}");
        return Ok(());
    }
    match cli.threads {
        Some(0) => {
            Err(patternset_core::Error::InvalidInput("--threads must be at least 1".into()).into())
        }
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Other(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Select(a) => cmd_select(a, cli.threads),
        Command::Bench(a) => cmd_bench(a),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn load_matrix(path: &Path) -> Result<SparseBinaryMatrix, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    formats::read_matrix(BufReader::new(f), &path.display().to_string())
}

pub fn load_tiles(path: &Path) -> Result<Vec<Tile>, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    formats::read_tiles(BufReader::new(f), &path.display().to_string())
}

fn cmd_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let cfg = a.data.config(a.rows, a.cols, a.seed);
    let inst = generate(&cfg)?;
    info!(
        "generated {}x{} matrix, density {:.4} ({:.4} before noise), bernoulli p {:.5}, {} tiles",
        cfg.n_rows,
        cfg.n_cols,
        inst.data.density(),
        inst.pre_noise_density,
        inst.bernoulli_p,
        inst.tiles.len()
    );
    let header = serde_json::to_string(&json!({ "config": cfg, "bernoulli_p": inst.bernoulli_p }))
        .expect("plain data");
    formats::write_matrix(create(&a.matrix)?, &inst.data, Some(&header))
        .map_err(io_err(&a.matrix))?;
    formats::write_tiles(
        create(&a.tiles)?,
        inst.tiles
            .iter()
            .zip(inst.origins.iter().copied().map(Some)),
        Some(&header),
    )
    .map_err(io_err(&a.tiles))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(contents)
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

fn cmd_select(a: &SelectArgs, threads: Option<usize>) -> Result<(), CliError> {
    let config = RunConfig::new(a, threads);
    let data = load_matrix(&a.matrix)?;
    let tiles = load_tiles(&a.tiles)?;
    let params = a.selection.params(a.seed);
    params.validate()?;
    let timing = !a.selection.no_timing;

    if let Some(path) = &a.dump_sketches {
        let hashes = params.sketch.draw_hashes(DEFAULT_MODULUS)?;
        let sketches = sketch_tiles(&tiles, &hashes, params.sketch.k, &data, params.mode)?;
        formats::write_sketches(create(path)?, &hashes, &sketches).map_err(io_err(path))?;
    }

    let sel = a.algorithm.run(&data, &tiles, &params)?;
    info!(
        "{}: {} tiles, error {} -> {} in {:?}",
        a.algorithm,
        sel.chosen.len(),
        sel.initial_error,
        sel.final_error,
        sel.elapsed
    );

    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    write_file(
        &a.out.join("trace.csv"),
        formats::trace_csv(&sel.trace, timing).as_bytes(),
    )?;
    let chosen = a.out.join("chosen.jsonl");
    formats::write_tiles(
        create(&chosen)?,
        sel.chosen_tiles(&tiles).map(|t| (t, None)),
        None,
    )
    .map_err(io_err(&chosen))?;
    let summary = summary_json(&sel, &data, tiles.len(), timing, &config)?;
    write_file(
        &a.out.join("summary.json"),
        (serde_json::to_string_pretty(&summary).expect("plain data") + "\n").as_bytes(),
    )
}

fn summary_json(
    sel: &Selection,
    data: &SparseBinaryMatrix,
    n_candidates: usize,
    timing: bool,
    config: &RunConfig,
) -> Result<serde_json::Value, CliError> {
    let best = sel.trace.best();
    Ok(json!({
        "algorithm": config.algorithm,
        "mode": config.mode,
        "n_candidates": n_candidates,
        "n_chosen": sel.chosen.len(),
        "initial_error": sel.initial_error,
        "final_error": sel.final_error,
        "final_rel_error": relative_error(sel.final_error, data)?,
        "best_iteration": best.map(|b| b.0),
        "best_error": best.map(|b| b.1),
        "wall_ms": if timing { sel.elapsed.as_secs_f64() * 1e3 } else { 0.0 },
        "config": config,
    }))
}

pub const BENCH_HEADER: &str =
    "algorithm,n_rows,n_cols,n_tiles,final_error,rel_error,best_rel_error,n_chosen,wall_ms";

/// Sweep points as (rows, cols, tiles).
fn bench_points(a: &BenchArgs) -> Vec<(usize, usize, usize)> {
    if a.sweep_tiles.is_empty() {
        a.sweep_sizes
            .iter()
            .map(|s| (s.rows, s.cols, a.n_tiles))
            .collect()
    } else {
        a.sweep_tiles.iter().map(|&l| (a.rows, a.cols, l)).collect()
    }
}

/// A synthetic instance with exactly `n_tiles` candidates: enough base
/// groups are generated and the tile list is cut to length.
pub fn bench_instance(
    data: &DataArgs,
    n_rows: usize,
    n_cols: usize,
    n_tiles: usize,
    seed: u64,
) -> Result<(SparseBinaryMatrix, Vec<Tile>), CliError> {
    if n_tiles == 0 {
        return Err(patternset_core::Error::InvalidInput(
            "sweep tile counts must be at least 1".into(),
        )
        .into());
    }
    let mut cfg = data.config(n_rows, n_cols, seed);
    cfg.n_base_tiles = n_tiles.div_ceil(cfg.n_copies + 1);
    let mut inst = generate(&cfg)?;
    inst.tiles.truncate(n_tiles);
    Ok((inst.data, inst.tiles))
}

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let params = a.selection.params(a.seed);
    params.validate()?;
    let timing = !a.selection.no_timing;
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for (rows, cols, n_tiles) in bench_points(a) {
        let (data, tiles) = bench_instance(&a.data, rows, cols, n_tiles, a.seed)?;
        for &alg in &a.algorithms {
            let sel = alg.run(&data, &tiles, &params)?;
            let best = sel
                .trace
                .best()
                .map_or(sel.initial_error, |b| b.1)
                .min(sel.initial_error);
            let ms = if timing {
                sel.elapsed.as_secs_f64() * 1e3
            } else {
                0.0
            };
            info!("{alg} {rows}x{cols} l={n_tiles}: {} ms", ms);
            out.push_str(&format!(
                "{alg},{rows},{cols},{n_tiles},{},{},{},{},{ms:.3}\n",
                sel.final_error,
                relative_error(sel.final_error, &data)?,
                relative_error(best, &data)?,
                sel.chosen.len(),
            ));
        }
    }
    match &a.out {
        Some(path) => write_file(path, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn cmd_convert(a: &ConvertArgs) -> Result<(), CliError> {
    let source = a.input.display().to_string();
    let reader = BufReader::new(File::open(&a.input).map_err(io_err(&a.input))?);
    let tiles = match a.format {
        PatternFormat::Itemsets => {
            let path = a.matrix.as_ref().ok_or_else(|| {
                CliError::Other("--matrix (the transaction matrix) is required for itemsets".into())
            })?;
            let data = load_matrix(path)?;
            tiles_from_itemsets(&formats::read_itemsets(reader, &source)?, &data)?
        }
        PatternFormat::QueryPairs => {
            let left = a
                .left_cols
                .ok_or_else(|| CliError::Other("--left-cols is required for query pairs".into()))?;
            let tiles = tiles_from_query_pairs(&formats::read_query_pairs(reader, &source)?, left)?;
            let data = match &a.matrix {
                Some(path) => load_matrix(path)?,
                None => {
                    let rows = a.rows.unwrap_or_else(|| max_index(&tiles, Tile::rows) + 1);
                    let cols = a
                        .cols
                        .unwrap_or_else(|| (max_index(&tiles, Tile::cols) + 1).max(left));
                    union_matrix(rows, cols, &tiles)?
                }
            };
            for t in &tiles {
                if !t.fits(data.n_rows(), data.n_cols()) {
                    return Err(patternset_core::Error::DimensionMismatch {
                        tile: t.id(),
                        n_rows: data.n_rows(),
                        n_cols: data.n_cols(),
                    }
                    .into());
                }
            }
            if let Some(path) = &a.out_matrix {
                formats::write_matrix(create(path)?, &data, None).map_err(io_err(path))?;
            }
            tiles
        }
    };
    info!("converted {} patterns", tiles.len());
    formats::write_tiles(create(&a.tiles)?, tiles.iter().map(|t| (t, None)), None)
        .map_err(io_err(&a.tiles))
}

fn max_index(tiles: &[Tile], side: fn(&Tile) -> &[u32]) -> usize {
    tiles
        .iter()
        .filter_map(|t| side(t).last())
        .max()
        .map_or(0, |&v| v as usize)
}
