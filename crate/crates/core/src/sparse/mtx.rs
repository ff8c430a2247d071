// Matrix Market coordinate files: real or integer values, general or
// symmetric storage.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let f = File::open(path.as_ref())?;
    read_matrix_market(BufReader::new(f))
}

/// Parses coordinate Matrix Market content. Symmetric files are expanded to
/// full storage and duplicate entries are summed.
pub fn read_matrix_market<R: Read>(source: R) -> Result<SparseMatrix> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines().enumerate();

    let (header_no, header) = match lines.next() {
        Some((no, line)) => (no + 1, line?),
        None => return Err(parse_err(1, "empty input")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(header_no, "expected `%%MatrixMarket matrix ...` banner"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(header_no, format!("unsupported format `{}`", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        "pattern" => return Err(parse_err(header_no, "pattern-only files carry no values")),
        other => return Err(parse_err(header_no, format!("unsupported field `{other}`"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(header_no, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (no, line) in lines {
        let no = no + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(no, "size line needs `rows cols entries`"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(no, format!("invalid count `{s}`")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if symmetry == Symmetry::Symmetric && dims.0 != dims.1 {
                    return Err(parse_err(no, "symmetric matrix must be square"));
                }
                triplets.reserve(dims.2 * if symmetry == Symmetry::Symmetric { 2 } else { 1 });
                size = Some(dims);
            }
            Some((nrows, ncols, _)) => {
                if fields.len() < 3 {
                    return Err(parse_err(no, "entry needs `row col value`"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(no, format!("invalid row index `{}`", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(no, format!("invalid column index `{}`", fields[1])))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(no, format!("invalid value `{}`", fields[2])))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(no, format!("index ({i}, {j}) outside {nrows}x{ncols}")));
                }
                if symmetry == Symmetry::Symmetric && j > i {
                    return Err(parse_err(no, "symmetric file stores an upper-triangle entry"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, declared) = size.ok_or_else(|| parse_err(header_no, "missing size line"))?;
    let stored = if symmetry == Symmetry::Symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != declared {
        return Err(parse_err(
            header_no,
            format!("header declares {declared} entries, found {stored}"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes `a` as a general real coordinate file with shortest round-trip
/// formatting of the values.
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for j in 0..a.ncols() {
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}
