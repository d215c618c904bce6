//! MatrixMarket (`.mtx`) reading and writing for real matrices and vectors.
//!
//! Coordinate and array layouts are read with `general`, `symmetric` and
//! `skew-symmetric` storage; `integer` values are widened to `f64`.
//! `complex`, `pattern` and `hermitian` files are rejected.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::random::random_vec;

/// A loaded matrix and, when a `<stem>_b.mtx` sidecar exists, its right-hand side.
#[derive(Debug, Clone)]
pub struct MatrixMarket {
    pub matrix: SparseMatrix,
    pub rhs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

struct Parser<'a> {
    path: &'a Path,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Parser<'a> {
    fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.lines.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }

    fn numbers<T: std::str::FromStr>(&self, line: usize, text: &str, want: usize) -> Result<Vec<T>> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != want {
            return Err(self.error(line, format!("expected {want} fields, found {}", fields.len())));
        }
        fields
            .iter()
            .map(|f| {
                f.parse::<T>()
                    .map_err(|_| self.error(line, format!("cannot parse '{f}'")))
            })
            .collect()
    }
}

/// Parses MatrixMarket text; `path` is used only in error messages.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<SparseMatrix> {
    let mut p = Parser {
        path,
        lines: text.lines().enumerate().peekable(),
    };
    let header = match p.lines.next() {
        Some((_, h)) => h,
        None => return Err(p.error(1, "empty file")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(p.error(1, format!("malformed header '{header}'")));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(p.error(1, format!("unknown format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        "complex" | "pattern" => {
            return Err(p.error(1, format!("unsupported field '{}'", tokens[3])));
        }
        other => return Err(p.error(1, format!("unknown field '{other}'"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(p.error(1, format!("unsupported symmetry '{other}'"))),
    };

    let (size_line, size_text) = p.next_data().ok_or_else(|| p.error(1, "missing size line"))?;
    let mut trip = Vec::new();
    let (nrows, ncols) = match layout {
        Layout::Coordinate => {
            let dims: Vec<usize> = p.numbers(size_line, size_text, 3)?;
            let (m, n, nnz) = (dims[0], dims[1], dims[2]);
            for k in 0..nnz {
                let (line, text) = p
                    .next_data()
                    .ok_or_else(|| p.error(size_line, format!("expected {nnz} entries, found {k}")))?;
                let fields: Vec<&str> = text.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(p.error(line, format!("expected 3 fields, found {}", fields.len())));
                }
                let idx: Vec<usize> = p.numbers(line, &fields[..2].join(" "), 2)?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| p.error(line, format!("cannot parse '{}'", fields[2])))?;
                let (i, j) = (idx[0], idx[1]);
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(p.error(line, format!("index ({i}, {j}) outside {m}x{n}")));
                }
                trip.push((i - 1, j - 1, v));
            }
            (m, n)
        }
        Layout::Array => {
            let dims: Vec<usize> = p.numbers(size_line, size_text, 2)?;
            let (m, n) = (dims[0], dims[1]);
            // column-major; symmetric storage lists the lower triangle only
            for j in 0..n {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::Skew => j + 1,
                };
                for i in start..m {
                    let (line, text) = p
                        .next_data()
                        .ok_or_else(|| p.error(size_line, "array data ended early"))?;
                    let v: Vec<f64> = p.numbers(line, text, 1)?;
                    if v[0] != 0.0 {
                        trip.push((i, j, v[0]));
                    }
                }
            }
            (m, n)
        }
    };
    if let Some((line, _)) = p.next_data() {
        return Err(p.error(line, "unexpected trailing data"));
    }
    if symmetry != Symmetry::General && nrows != ncols {
        return Err(p.error(1, "symmetric storage requires a square matrix"));
    }
    let sign = if symmetry == Symmetry::Skew { -1.0 } else { 1.0 };
    if symmetry != Symmetry::General {
        let mirrored: Vec<_> = trip
            .iter()
            .filter(|(i, j, _)| i != j)
            .map(|&(i, j, v)| (j, i, sign * v))
            .collect();
        trip.extend(mirrored);
    }
    SparseMatrix::from_triplets(nrows, ncols, &trip).map_err(|e| p.error(size_line, e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Sidecar right-hand-side path: `dir/name.mtx` → `dir/name_b.mtx`.
pub fn rhs_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_b.mtx"))
}

/// Reads a single-column MatrixMarket file as a vector.
pub fn load_vector_market(path: &Path) -> Result<Vec<f64>> {
    let m = parse_matrix_market(&read(path)?, path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected a single column, found {}", m.ncols()),
        });
    }
    let mut v = vec![0.0; m.nrows()];
    for (r, _, val) in m.triplets() {
        v[r] = val;
    }
    Ok(v)
}

/// Loads `path` and its `_b.mtx` sidecar, if present.
pub fn load_matrix_market(path: &Path) -> Result<MatrixMarket> {
    let matrix = parse_matrix_market(&read(path)?, path)?;
    let side = rhs_path(path);
    let rhs = if side.exists() {
        let b = load_vector_market(&side)?;
        if b.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                context: "right-hand side length",
                expected: matrix.nrows(),
                actual: b.len(),
            });
        }
        Some(b)
    } else {
        None
    };
    Ok(MatrixMarket { matrix, rhs })
}

/// Draws `x_true ~ N(0, I)` from `seed` and returns `(x_true, A x_true)`.
pub fn synthesize_rhs(matrix: &SparseMatrix, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let x = random_vec(matrix.ncols(), seed);
    let y = matrix.mul_vec(&x).expect("length matches by construction");
    (x, y)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes `matrix` in coordinate/real/general layout. Values use the
/// shortest exponent form that round-trips exactly.
pub fn write_matrix_market(path: &Path, matrix: &SparseMatrix, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    for c in comments {
        out.push_str(&format!("% {c}\n"));
    }
    out.push_str(&format!("{} {} {}\n", matrix.nrows(), matrix.ncols(), matrix.nnz()));
    for (r, c, v) in matrix.triplets() {
        out.push_str(&format!("{} {} {:e}\n", r + 1, c + 1, v));
    }
    create(path)?.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes a vector as an `m × 1` array file.
pub fn write_vector_market(path: &Path, values: &[f64], comments: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    for c in comments {
        out.push_str(&format!("% {c}\n"));
    }
    out.push_str(&format!("{} 1\n", values.len()));
    for v in values {
        out.push_str(&format!("{v:e}\n"));
    }
    create(path)?.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<SparseMatrix> {
        parse_matrix_market(text, Path::new("test.mtx"))
    }

    #[test]
    fn coordinate_identity() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n2 2 1.0\n").unwrap();
        assert_eq!(a, SparseMatrix::identity(2));
    }

    #[test]
    fn symmetric_storage_is_mirrored() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2\n2 1 -1\n3 2 0.5\n3 3 4\n";
        let a = parse(text).unwrap().to_dense();
        let lower = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5, 4.0]);
        let mut explicit = lower.clone() + lower.transpose();
        for i in 0..3 {
            explicit[(i, i)] = lower[(i, i)];
        }
        assert_eq!(a, explicit);
        let x = [1.0, -2.0, 3.0];
        let dense = &explicit * nalgebra::DVector::from_column_slice(&x);
        assert_eq!(parse(text).unwrap().mul_vec(&x).unwrap(), dense.as_slice());
    }

    #[test]
    fn skew_symmetric_negates_mirror() {
        let a = parse("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n")
            .unwrap()
            .to_dense();
        assert_eq!((a[(1, 0)], a[(0, 1)]), (3.0, -3.0));
    }

    #[test]
    fn array_layout_is_column_major() {
        let a = parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n")
            .unwrap()
            .to_dense();
        assert_eq!(a, nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
    }

    #[test]
    fn malformed_header_names_line() {
        match parse("%%MatrixMarket tensor coordinate real general\n1 1 1\n1 1 1\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("header"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_entry_names_line() {
        match parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 x 1.0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complex_and_pattern_rejected() {
        for field in ["complex", "pattern"] {
            let text = format!("%%MatrixMarket matrix coordinate {field} general\n1 1 1\n1 1\n");
            match parse(&text) {
                Err(Error::Parse { message, .. }) => assert!(message.contains("unsupported")),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn sidecar_rhs_is_loaded() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mtx");
        write_matrix_market(&p, &SparseMatrix::identity(3), &[]).unwrap();
        assert!(load_matrix_market(&p).unwrap().rhs.is_none());
        write_vector_market(&rhs_path(&p), &[1.0, 2.0, 3.0], &[]).unwrap();
        assert_eq!(load_matrix_market(&p).unwrap().rhs, Some(vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_matrix_market(Path::new("/nonexistent/a.mtx")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/a.mtx"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn write_then_load_is_identity(
            entries in proptest::collection::vec((0usize..7, 0usize..5, -1e6f64..1e6), 0..30)
        ) {
            let a = SparseMatrix::from_triplets(7, 5, &entries).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("a.mtx");
            write_matrix_market(&p, &a, &["round trip".into()]).unwrap();
            let back = load_matrix_market(&p).unwrap().matrix;
            prop_assert_eq!(back, a);
        }
    }
}
