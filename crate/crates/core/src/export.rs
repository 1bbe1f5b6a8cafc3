//! Writers for matrices: CSV and 16-bit binary PGM.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Writes `m` as CSV, one line per row, no header.
pub fn write_matrix_csv<W: Write>(m: &Array2<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Writes `m` as a binary (P5) 16-bit greymap, scaling `[0, scale]` to
/// `[0, 65535]` and clipping above. The image is `m.ncols()` wide; the first
/// matrix column becomes the left edge and the last matrix row the top line,
/// so a field indexed `[ix, iy]` must be transposed by the caller if `y`
/// should point up. Returns the scale used.
pub fn write_pgm16<W: Write>(m: &Array2<f64>, scale: f64, mut out: W) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "PGM scale must be positive, got {scale}"
        )));
    }
    let (rows, cols) = m.dim();
    let mut buf = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    buf.reserve(2 * rows * cols);
    for r in (0..rows).rev() {
        for c in 0..cols {
            let v = m[[r, c]];
            if !v.is_finite() {
                return Err(Error::NonFinite("PGM pixel"));
            }
            let level = (v / scale).clamp(0.0, 1.0) * 65535.0;
            buf.extend_from_slice(&(level.round() as u16).to_be_bytes());
        }
    }
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<pgm>", e))?;
    Ok(scale)
}

/// Density field `[ix, iy]` as an image with `x` to the right and `y` up.
pub fn write_density_pgm<W: Write>(density: &Array2<f64>, scale: f64, out: W) -> Result<f64> {
    write_pgm16(&density.t().to_owned(), scale, out)
}
