use std::ops::Range;

use crate::error::{check_len, Error, Result};

use super::{ForwardOperator, RowSelection};

/// Pixel indices of the top-left, top-right, bottom-left and bottom-right
/// quadrants of a row-major `width × height` image, each in row-major order.
pub fn quadrant_rows(width: usize, height: usize) -> Result<[Vec<usize>; 4]> {
    if width == 0 || height == 0 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "quadrant split needs even, nonzero dimensions (got {width}x{height})"
        )));
    }
    let (hw, hh) = (width / 2, height / 2);
    let quadrant = |r0: usize, c0: usize| -> Vec<usize> {
        (r0..r0 + hh)
            .flat_map(|r| (c0..c0 + hw).map(move |c| r * width + c))
            .collect()
    };
    Ok([quadrant(0, 0), quadrant(0, hw), quadrant(hh, 0), quadrant(hh, hw)])
}

/// Splits the identity on a `width × height` image into the four quadrant
/// row-selection operators.
pub fn identity_partition(width: usize, height: usize, parts: usize) -> Result<Vec<(ForwardOperator, Vec<usize>)>> {
    if parts != 4 {
        return Err(Error::InvalidArgument(format!(
            "identity splitting is defined for 4 quadrants, got {parts}"
        )));
    }
    let n = width * height;
    quadrant_rows(width, height)?
        .into_iter()
        .map(|rows| Ok((ForwardOperator::Selection(RowSelection::new(n, rows.clone())?), rows)))
        .collect()
}

/// Contiguous blocks of `m` rows into `parts` pieces; the first `m mod parts`
/// blocks take one extra row.
pub fn row_block_ranges(m: usize, parts: usize) -> Result<Vec<Range<usize>>> {
    if parts == 0 || parts > m {
        return Err(Error::InvalidArgument(format!(
            "cannot split {m} rows into {parts} blocks"
        )));
    }
    let base = m / parts;
    let extra = m % parts;
    let mut start = 0;
    Ok((0..parts)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Contiguous row-block partition of `(A, y)`.
pub fn row_partition(a: &ForwardOperator, y: &[f64], parts: usize) -> Result<Vec<(ForwardOperator, Vec<f64>)>> {
    check_len("row partition data", a.n_out(), y.len())?;
    row_block_ranges(a.n_out(), parts)?
        .into_iter()
        .map(|range| {
            let rows: Vec<usize> = range.clone().collect();
            Ok((a.select_rows(&rows)?, y[range].to_vec()))
        })
        .collect()
}
