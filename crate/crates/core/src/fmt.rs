//! Deterministic numeric formatting for emitted data files.

/// Fixed 9-significant-digit scientific formatting; every float written to a
/// csv/table goes through this so emitted files are byte-stable.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Avoid the -0.0 / 0.0 distinction leaking into files.
        return "0.00000000e0".to_string();
    }
    format!("{x:.8e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.00000000e0");
        assert_eq!(fmt_f64(-0.25), "-2.50000000e-1");
        assert_eq!(fmt_f64(0.0), "0.00000000e0");
        assert_eq!(fmt_f64(-0.0), "0.00000000e0");
        assert_eq!(fmt_f64(123456789.0), "1.23456789e8");
    }
}
