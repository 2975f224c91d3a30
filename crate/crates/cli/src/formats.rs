//! Plain-text matrix files, JSON-lines tile files and the CSV/JSON reports.
//!
//! Matrix: optional `#` comment lines, then `m n nnz`, then one zero-based
//! `i j` pair per line, sorted by row then column.
//!
//! Tiles: one JSON object per line, `{"id":…,"rows":[…],"cols":[…]}`, with
//! an optional `origin` field. Blank and `#` lines are skipped.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use patternset_core::adapters::{Itemset, QueryPairSupports};
use patternset_core::datagen::TileOrigin;
use patternset_core::{HashPair, SelectionTrace, SparseBinaryMatrix, Tile, TileId, TileSketch};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const TRACE_HEADER: &str = "iter,tile_id,error,rel_error,elapsed_ms";

fn parse_err(source: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{source}:{line}: {msg}"))
}

/// Lines with their one-based numbers, skipping blanks and `#` comments.
fn content_lines<'a, R: BufRead + 'a>(
    reader: R,
    source: &'a str,
) -> impl Iterator<Item = Result<(usize, String), CliError>> + 'a {
    reader
        .lines()
        .enumerate()
        .map(move |(i, line)| {
            line.map(|l| (i + 1, l))
                .map_err(|e| parse_err(source, i + 1, e))
        })
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

fn numbers<const N: usize>(source: &str, line: usize, text: &str) -> Result<[u64; N], CliError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != N {
        return Err(parse_err(
            source,
            line,
            format!("expected {N} integers, found {:?}", text.trim()),
        ));
    }
    let mut out = [0u64; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f
            .parse()
            .map_err(|_| parse_err(source, line, format!("not a non-negative integer: {f:?}")))?;
    }
    Ok(out)
}

pub fn read_matrix<R: BufRead>(reader: R, source: &str) -> Result<SparseBinaryMatrix, CliError> {
    let mut lines = content_lines(reader, source);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(source, 1, "missing \"m n nnz\" header"))??;
    let [m, n, nnz] = numbers::<3>(source, hline, &header)?;
    if m == 0 || n == 0 {
        return Err(parse_err(
            source,
            hline,
            "matrix dimensions must be at least 1",
        ));
    }
    let mut ones = Vec::with_capacity(nnz as usize);
    let mut last_line = hline;
    for item in lines {
        let (line, text) = item?;
        let [i, j] = numbers::<2>(source, line, &text)?;
        if i >= m || j >= n {
            return Err(parse_err(
                source,
                line,
                format!("cell ({i}, {j}) outside a {m}x{n} matrix"),
            ));
        }
        ones.push((i as usize, j as usize));
        last_line = line;
    }
    if ones.len() as u64 != nnz {
        return Err(parse_err(
            source,
            last_line,
            format!("header declares {nnz} ones, found {}", ones.len()),
        ));
    }
    let data = SparseBinaryMatrix::from_coords(m as usize, n as usize, ones)
        .map_err(|e| parse_err(source, hline, e))?;
    if data.nnz() != nnz {
        return Err(parse_err(source, last_line, "duplicate cells"));
    }
    Ok(data)
}

pub fn write_matrix<W: Write>(
    mut w: W,
    data: &SparseBinaryMatrix,
    header: Option<&str>,
) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "{} {} {}", data.n_rows(), data.n_cols(), data.nnz())?;
    for (i, j) in data.iter() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()
}

#[derive(Debug, Serialize, Deserialize)]
struct TileRecord {
    id: u64,
    rows: Vec<u32>,
    cols: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<TileOrigin>,
}

pub fn read_tiles<R: BufRead>(reader: R, source: &str) -> Result<Vec<Tile>, CliError> {
    let mut tiles = Vec::new();
    for item in content_lines(reader, source) {
        let (line, text) = item?;
        let rec: TileRecord =
            serde_json::from_str(&text).map_err(|e| parse_err(source, line, e))?;
        tiles.push(
            Tile::from_unsorted(TileId(rec.id), rec.rows, rec.cols)
                .map_err(|e| parse_err(source, line, e))?,
        );
    }
    Ok(tiles)
}

pub fn write_tiles<'a, W, I>(mut w: W, tiles: I, header: Option<&str>) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a Tile, Option<TileOrigin>)>,
{
    if let Some(h) = header {
        writeln!(w, "# {h}")?;
    }
    for (tile, origin) in tiles {
        let rec = TileRecord {
            id: tile.id().0,
            rows: tile.rows().to_vec(),
            cols: tile.cols().to_vec(),
            origin,
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    w.flush()
}

/// One itemset per line, space-separated column indices.
pub fn read_itemsets<R: BufRead>(reader: R, source: &str) -> Result<Vec<Itemset>, CliError> {
    let mut sets = Vec::new();
    for item in content_lines(reader, source) {
        let (line, text) = item?;
        let items = text
            .split_whitespace()
            .map(|f| {
                f.parse::<u32>()
                    .map_err(|_| parse_err(source, line, format!("not an item index: {f:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        sets.push(Itemset::new(items).map_err(|e| parse_err(source, line, e))?);
    }
    Ok(sets)
}

/// JSON lines with `uL`, `uR`, `vL`, `vR` arrays.
pub fn read_query_pairs<R: BufRead>(
    reader: R,
    source: &str,
) -> Result<Vec<QueryPairSupports>, CliError> {
    content_lines(reader, source)
        .map(|item| {
            let (line, text) = item?;
            serde_json::from_str(&text).map_err(|e| parse_err(source, line, e))
        })
        .collect()
}

/// Trace CSV; `elapsed_ms` is written as 0 when `timing` is off.
pub fn trace_csv(trace: &SelectionTrace, timing: bool) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let ms = if timing {
            r.elapsed.as_secs_f64() * 1e3
        } else {
            0.0
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            r.iteration, r.tile_id, r.error, r.relative_error, ms
        );
    }
    out
}

/// Modulus header, then per tile one line of numerators per repetition.
pub fn write_sketches<W: Write>(
    mut w: W,
    hashes: &[HashPair],
    sketches: &[TileSketch],
) -> std::io::Result<()> {
    let modulus = hashes.first().map_or(0, |h| h.modulus());
    writeln!(w, "modulus {modulus}")?;
    for s in sketches {
        writeln!(w, "tile {}", s.tile_id)?;
        for rep in &s.per_rep {
            let line: Vec<String> = rep.iter().map(u32::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let d = SparseBinaryMatrix::from_coords(3, 4, [(2, 3), (0, 1), (0, 0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &d, Some("{\"seed\":1}")).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "# {\"seed\":1}\n3 4 3\n0 0\n0 1\n2 3\n"
        );
        assert_eq!(read_matrix(&buf[..], "m").unwrap(), d);
    }

    #[test]
    fn matrix_errors_carry_line_numbers() {
        let cases = [
            ("3 4 1\n0 x\n", "m:2:"),
            ("# c\n3 4 1\n5 0\n", "m:3:"),
            ("3 4 2\n0 0\n", "m:2:"),
            ("", "m:1:"),
            ("3 4\n", "m:1:"),
        ];
        for (text, prefix) in cases {
            match read_matrix(text.as_bytes(), "m") {
                Err(CliError::Parse(msg)) => assert!(msg.starts_with(prefix), "{text:?}: {msg}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn tiles_round_trip() {
        let tiles = vec![
            Tile::new(TileId(3), vec![0, 2], vec![1]).unwrap(),
            Tile::new(TileId(7), vec![1], vec![0, 1]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_tiles(
            &mut buf,
            tiles.iter().zip([Some(TileOrigin::Base { base: 0 }), None]),
            None,
        )
        .unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "{\"id\":3,\"rows\":[0,2],\"cols\":[1],\"origin\":{\"kind\":\"base\",\"base\":0}}\n"
        ));
        assert_eq!(read_tiles(&buf[..], "t").unwrap(), tiles);
    }

    #[test]
    fn bad_tile_line() {
        let text = "{\"id\":0,\"rows\":[0],\"cols\":[0]}\n\n{\"id\":1,\"rows\":[],\"cols\":[0]}\n";
        match read_tiles(text.as_bytes(), "t") {
            Err(CliError::Parse(msg)) => assert!(msg.starts_with("t:3:"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn itemset_lines() {
        let sets = read_itemsets("# items\n3 1\n\n2\n".as_bytes(), "i").unwrap();
        assert_eq!(sets[0].items(), &[1, 3]);
        assert_eq!(sets[1].items(), &[2]);
        assert!(read_itemsets("1 a\n".as_bytes(), "i").is_err());
    }

    #[test]
    fn query_pair_lines() {
        let q = read_query_pairs(
            "{\"uL\":[0,1],\"uR\":[1],\"vL\":[0],\"vR\":[2]}\n".as_bytes(),
            "q",
        )
        .unwrap();
        assert_eq!(q[0].u_right, vec![1]);
        assert_eq!(q[0].v_right, vec![2]);
    }
}
