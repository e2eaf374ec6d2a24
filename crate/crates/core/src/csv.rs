//! Minimal CSV helpers shared by the exporters. Every float is written with 17
//! significant digits so files round-trip exactly.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Formats a double with 17 significant digits; non-finite values as `NaN`,
/// `inf` or `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// Parses a field written by [`fmt_f64`] (or any ordinary float literal).
pub fn parse_f64(field: &str) -> Result<f64> {
    let field = field.trim();
    match field {
        "NaN" | "nan" => Ok(f64::NAN),
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => field
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("invalid number {field:?}: {e}"))),
    }
}

/// Row-major matrix dump, one row per line, no header.
pub fn matrix_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| fmt_f64(a[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(parse_f64)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Config(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn non_finite_tokens() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert!(parse_f64("NaN").unwrap().is_nan());
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
    }

    proptest! {
        #[test]
        fn matrix_csv_round_trips_bit_exactly(
            vals in proptest::collection::vec(-1e300f64..1e300, 12)
        ) {
            let a = DMatrix::from_row_slice(3, 4, &vals);
            let b = matrix_from_csv(&matrix_to_csv(&a)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
