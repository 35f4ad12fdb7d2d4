//! Output formatting shared by the CSV/JSONL emitters.

/// Formats a float with 17 significant digits, enough to round-trip an `f64`.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}
