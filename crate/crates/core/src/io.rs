//! Shared CSV number formatting.

use std::io::{self, Write};

/// Formats a real with 17 significant digits in scientific notation.
/// Output is locale independent and round-trips through `str::parse`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{:.16e}", x)
    }
}

pub(crate) fn write_row<W: Write + ?Sized>(w: &mut W, cells: &[String]) -> io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}
