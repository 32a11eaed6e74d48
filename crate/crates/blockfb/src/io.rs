//! Matrix Market coordinate files and single-column CSV vectors.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

fn parse_err(context: &str, message: impl Into<String>) -> Error {
    Error::Parse { context: context.to_string(), message: message.into() }
}

/// Read a `matrix coordinate real general` Matrix Market file.
pub fn read_matrix_market<R: Read>(reader: R, context: &str) -> Result<CscMatrix> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(context, "empty file"))??;
    let lower = header.to_ascii_lowercase();
    if !lower.starts_with("%%matrixmarket") {
        return Err(parse_err(context, "missing %%MatrixMarket header"));
    }
    for field in ["matrix", "coordinate", "real", "general"] {
        if !lower.contains(field) {
            return Err(parse_err(
                context,
                format!("unsupported format: expected 'matrix coordinate real general', got '{header}'"),
            ));
        }
    }
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut parts = trimmed.split_ascii_whitespace();
        if dims.is_none() {
            let nrows = parse_field::<usize>(&mut parts, context, "rows")?;
            let ncols = parse_field::<usize>(&mut parts, context, "cols")?;
            let nnz = parse_field::<usize>(&mut parts, context, "nnz")?;
            dims = Some((nrows, ncols, nnz));
            triplets.reserve(nnz);
            continue;
        }
        let r = parse_field::<usize>(&mut parts, context, "row index")?;
        let c = parse_field::<usize>(&mut parts, context, "col index")?;
        let v = parse_field::<f64>(&mut parts, context, "value")?;
        if r == 0 || c == 0 {
            return Err(parse_err(context, "matrix market indices are 1-based"));
        }
        triplets.push((r - 1, c - 1, v));
    }
    let (nrows, ncols, nnz) = dims.ok_or_else(|| parse_err(context, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            context,
            format!("size line declares {nnz} entries, file has {}", triplets.len()),
        ));
    }
    CscMatrix::from_triplets(nrows, ncols, &triplets)
}

fn parse_field<T: std::str::FromStr>(
    parts: &mut std::str::SplitAsciiWhitespace<'_>,
    context: &str,
    what: &str,
) -> Result<T> {
    parts
        .next()
        .ok_or_else(|| parse_err(context, format!("missing {what}")))?
        .parse::<T>()
        .map_err(|_| parse_err(context, format!("invalid {what}")))
}

pub fn write_matrix_market<W: Write>(writer: W, matrix: &CscMatrix) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    let trip = matrix.triplets();
    writeln!(w, "{} {} {}", matrix.nrows(), matrix.ncols(), trip.len())?;
    for (r, c, v) in trip {
        writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market_path(path: &Path) -> Result<CscMatrix> {
    let file = std::fs::File::open(path)?;
    read_matrix_market(file, &path.display().to_string())
}

pub fn write_matrix_market_path(path: &Path, matrix: &CscMatrix) -> Result<()> {
    write_matrix_market(std::fs::File::create(path)?, matrix)
}

/// Read a single-column CSV (one value per line; a non-numeric first line is
/// treated as a header and skipped).
pub fn read_vector_csv<R: Read>(reader: R, context: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(parse_err(context, format!("invalid value on line {}", lineno + 1)))
            }
        }
    }
    Ok(out)
}

pub fn write_vector_csv<W: Write>(writer: W, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv_path(path: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    read_vector_csv(file, &path.display().to_string())
}

pub fn write_vector_csv_path(path: &Path, values: &[f64]) -> Result<()> {
    write_vector_csv(std::fs::File::create(path)?, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_market_rejects_bad_headers() {
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n1 1\n1.0".as_bytes(), "t").is_err());
        assert!(read_matrix_market("1 1 1\n1 1 2.0".as_bytes(), "t").is_err());
        // 0-based index
        assert!(read_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 3.0".as_bytes(),
            "t"
        )
        .is_err());
    }

    #[test]
    fn vector_csv_skips_header() {
        let v = read_vector_csv("value\n1.5\n-2.0\n".as_bytes(), "t").unwrap();
        assert_eq!(v, vec![1.5, -2.0]);
        assert!(read_vector_csv("1.0\nbad\n".as_bytes(), "t").is_err());
    }

    proptest! {
        /// write -> read is the identity on sparse matrices
        #[test]
        fn matrix_market_roundtrip(
            entries in proptest::collection::vec(
                (0usize..6, 0usize..5, -100.0f64..100.0),
                1..24,
            )
        ) {
            let m = CscMatrix::from_triplets(6, 5, &entries).unwrap();
            let mut buf = Vec::new();
            write_matrix_market(&mut buf, &m).unwrap();
            let back = read_matrix_market(buf.as_slice(), "roundtrip").unwrap();
            prop_assert_eq!(m, back);
        }

        #[test]
        fn vector_csv_roundtrip(values in proptest::collection::vec(-1e12f64..1e12, 0..40)) {
            let mut buf = Vec::new();
            write_vector_csv(&mut buf, &values).unwrap();
            let back = read_vector_csv(buf.as_slice(), "roundtrip").unwrap();
            prop_assert_eq!(values, back);
        }
    }
}
