//! Number formatting for CSV and report output.

/// Scientific notation with 15 significant digits.
pub fn sig15(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.14e}")
    } else {
        x.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::sig15;

    #[test]
    fn fifteen_digits() {
        assert_eq!(sig15(0.0), "0");
        assert_eq!(sig15(1.0), "1.00000000000000e0");
        assert_eq!(sig15(-0.000123456789012345678), "-1.23456789012346e-4");
        let x = std::f64::consts::PI;
        let back: f64 = sig15(x).parse().unwrap();
        assert!((back - x).abs() < 1e-14 * x);
    }
}
