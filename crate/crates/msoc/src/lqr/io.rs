//! Plain-text block-matrix files for slow-fast linear systems.
//!
//! Format (version 1):
//!
//! ```text
//! msoc-lqr v1
//! k 2
//! n 6
//! l 2
//! beta 0.01
//! A11
//! <k rows of k whitespace-separated floats>
//! A12
//! <k rows of n-k floats>
//! A21
//! <n-k rows of k floats>
//! A22
//! <n-k rows of n-k floats>
//! B1
//! <k rows of l floats>
//! B2
//! <n-k rows of l floats>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The scale parameter
//! epsilon is a per-run quantity and is not stored; loaded systems start at
//! epsilon = 1. Values are written in shortest round-trip form, so a
//! save/load cycle is bit-exact.

use std::path::Path;

use nalgebra::DMatrix;

use super::SlowFastLinearSystem;
use crate::error::{Error, Result};

const FORMAT_HEADER: &str = "msoc-lqr v1";
/// Dimension caps: large enough for the benchmark systems this format is
/// meant to carry, small enough that hostile headers cannot request huge
/// allocations or eigen-solves.
const MAX_DIM: usize = 512;

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn new(s: &'a str) -> Self {
        Lines {
            inner: s.lines(),
            line_no: 0,
        }
    }

    /// Next significant line (skipping blanks and # comments).
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        loop {
            let line = self.inner.next()?;
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some((self.line_no, trimmed));
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn expect_keyed_usize(lines: &mut Lines, key: &str) -> Result<usize> {
    let (no, line) = lines
        .next_content()
        .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected `{key} <int>`")))?;
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => {
            let value: usize = v
                .parse()
                .map_err(|_| parse_err(no, format!("`{key}` must be an integer, got `{v}`")))?;
            Ok(value)
        }
        _ => Err(parse_err(no, format!("expected `{key} <int>`, got `{line}`"))),
    }
}

fn expect_keyed_f64(lines: &mut Lines, key: &str) -> Result<f64> {
    let (no, line) = lines
        .next_content()
        .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected `{key} <float>`")))?;
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => {
            let value: f64 = v
                .parse()
                .map_err(|_| parse_err(no, format!("`{key}` must be a float, got `{v}`")))?;
            if !value.is_finite() {
                return Err(parse_err(no, format!("`{key}` must be finite, got `{v}`")));
            }
            Ok(value)
        }
        _ => Err(parse_err(no, format!("expected `{key} <float>`, got `{line}`"))),
    }
}

fn expect_block(lines: &mut Lines, label: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let (no, line) = lines
        .next_content()
        .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected block `{label}`")))?;
    if line != label {
        return Err(parse_err(no, format!("expected block label `{label}`, got `{line}`")));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (no, line) = lines.next_content().ok_or_else(|| {
            parse_err(0, format!("unexpected end of file in block `{label}` row {r}"))
        })?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                parse_err(no, format!("bad float `{tok}` in block `{label}`"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(no, format!("non-finite entry in block `{label}`")));
            }
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(parse_err(
                no,
                format!("block `{label}` row {r} has {count} entries, expected {cols}"),
            ));
        }
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Parse a block-matrix file from a string. Never panics on malformed input;
/// all failures are reported with a line number or as the violated system
/// invariant.
pub fn parse_system_str(content: &str) -> Result<SlowFastLinearSystem> {
    let mut lines = Lines::new(content);
    let (no, header) = lines
        .next_content()
        .ok_or_else(|| parse_err(0, "empty file"))?;
    if header != FORMAT_HEADER {
        return Err(parse_err(
            no,
            format!("unknown format header `{header}`, expected `{FORMAT_HEADER}`"),
        ));
    }
    let k = expect_keyed_usize(&mut lines, "k")?;
    let n = expect_keyed_usize(&mut lines, "n")?;
    let l = expect_keyed_usize(&mut lines, "l")?;
    let beta = expect_keyed_f64(&mut lines, "beta")?;
    if k == 0 || n <= k || l == 0 {
        return Err(Error::Precondition(format!(
            "dimensions must satisfy 0 < k < n and l > 0, got k = {k}, n = {n}, l = {l}"
        )));
    }
    if n > MAX_DIM || l > MAX_DIM {
        return Err(Error::Precondition(format!(
            "dimensions n = {n}, l = {l} exceed the cap {MAX_DIM}"
        )));
    }
    let m = n - k;
    let a11 = expect_block(&mut lines, "A11", k, k)?;
    let a12 = expect_block(&mut lines, "A12", k, m)?;
    let a21 = expect_block(&mut lines, "A21", m, k)?;
    let a22 = expect_block(&mut lines, "A22", m, m)?;
    let b1 = expect_block(&mut lines, "B1", k, l)?;
    let b2 = expect_block(&mut lines, "B2", m, l)?;
    if let Some((no, extra)) = lines.next_content() {
        return Err(parse_err(no, format!("trailing content `{extra}`")));
    }
    SlowFastLinearSystem::new(a11, a12, a21, a22, b1, b2, 1.0, beta)
}

/// Load and validate a system from a file.
pub fn load_system(path: impl AsRef<Path>) -> Result<SlowFastLinearSystem> {
    let content = std::fs::read_to_string(path)?;
    parse_system_str(&content)
}

fn write_matrix(out: &mut String, label: &str, m: &DMatrix<f64>) {
    out.push_str(label);
    out.push('\n');
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{}", m[(r, c)]));
        }
        out.push('\n');
    }
}

/// Serialize a system in the version-1 block format.
pub fn write_system(sys: &SlowFastLinearSystem) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    out.push_str(&format!("k {}\n", sys.slow_dim()));
    out.push_str(&format!("n {}\n", sys.dim()));
    out.push_str(&format!("l {}\n", sys.input_dim()));
    out.push_str(&format!("beta {}\n", sys.beta));
    write_matrix(&mut out, "A11", &sys.a11);
    write_matrix(&mut out, "A12", &sys.a12);
    write_matrix(&mut out, "A21", &sys.a21);
    write_matrix(&mut out, "A22", &sys.a22);
    write_matrix(&mut out, "B1", &sys.b1);
    write_matrix(&mut out, "B2", &sys.b2);
    out
}

/// Write a system to a file.
pub fn save_system(sys: &SlowFastLinearSystem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_system(sys))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SlowFastLinearSystem {
        SlowFastLinearSystem::new(
            DMatrix::from_row_slice(1, 1, &[-0.3]),
            DMatrix::from_row_slice(1, 2, &[0.25, -1.0 / 3.0]),
            DMatrix::from_row_slice(2, 1, &[0.1, std::f64::consts::PI]),
            DMatrix::from_row_slice(2, 2, &[-2.0, 0.7, 0.0, -0.9]),
            DMatrix::from_row_slice(1, 1, &[1.5]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1e-3]),
            1.0,
            0.01,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let sys = sample();
        let text = write_system(&sys);
        let back = parse_system_str(&text).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = write_system(&sample());
        let commented = format!("# fixture\n\n{}", text.replace("A21", "# note\nA21"));
        assert!(parse_system_str(&commented).is_ok());
    }

    #[test]
    fn non_hurwitz_a22_is_rejected_with_the_eigenvalue() {
        let text = "msoc-lqr v1\nk 1\nn 2\nl 1\nbeta 1\nA11\n-1\nA12\n0\nA21\n0\nA22\n0.25\nB1\n1\nB2\n0\n";
        let err = parse_system_str(text).unwrap_err();
        match err {
            Error::NotHurwitz { eigenvalue, .. } => assert!(eigenvalue.contains("0.25")),
            other => panic!("expected NotHurwitz, got {other}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_system_str("msoc-lqr v1\nk 1\nn 2\nl x\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected Parse, got {other}"),
        }
        let err = parse_system_str("nonsense").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn oversized_headers_are_capped() {
        let text = "msoc-lqr v1\nk 1\nn 100000\nl 1\nbeta 1\n";
        assert!(matches!(
            parse_system_str(text),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn row_length_mismatch_is_reported() {
        let text =
            "msoc-lqr v1\nk 1\nn 2\nl 1\nbeta 1\nA11\n-1 3\nA12\n0\nA21\n0\nA22\n-1\nB1\n1\nB2\n0\n";
        let err = parse_system_str(text).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }
}
