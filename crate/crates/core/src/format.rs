//! Fixed-precision numeric output.
//!
//! Every number written to a file or stdout goes through [`round_sig`] so
//! that emitted files are stable across runs and round-trip byte-identically.

/// Significant digits kept in all emitted numbers.
pub const SIG_DIGITS: usize = 9;

/// Rounds to [`SIG_DIGITS`] significant digits. Idempotent.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        // Normalizes -0.0 as well.
        return if x == 0.0 { 0.0 } else { x };
    }
    let s = format!("{:.*e}", SIG_DIGITS - 1, x);
    let r: f64 = s.parse().expect("scientific notation parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest decimal text of `round_sig(x)`, e.g. `1`, `0.636619772`, `-2.5e-7`.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() && r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        let s = format!("{r:e}");
        return s;
    }
    format!("{r}")
}
