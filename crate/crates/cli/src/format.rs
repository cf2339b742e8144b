//! Number formatting for text output.

use lsir_core::causal::TABLE_FLOOR;

/// `v` rounded to 12 significant digits, printed in shortest form.
pub fn sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    let plain = format!("{rounded}");
    if plain.len() > 20 {
        format!("{rounded:e}")
    } else {
        plain
    }
}

/// p-values below the table floor print as `<1e-3`.
pub fn p_value(p: f64) -> String {
    if p < TABLE_FLOOR {
        "<1e-3".to_string()
    } else {
        sig12(p)
    }
}

pub fn optional<T, F: Fn(&T) -> String>(v: Option<&T>, f: F) -> String {
    v.map(f).unwrap_or_else(|| "-".to_string())
}

/// Parses a number printed by [`sig12`] or [`p_value`]; `<1e-3` maps to
/// `None`.
pub fn parse_number(s: &str) -> Option<f64> {
    if s.starts_with('<') {
        None
    } else {
        s.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.1234567890123456), "0.123456789012");
        assert_eq!(sig12(2.0), "2");
        assert_eq!(sig12(-1.5e-7), "-0.00000015");
        assert_eq!(sig12(1.23456789e-30), "1.23456789e-30");
        assert_eq!(sig12(f64::INFINITY), "inf");
    }

    #[test]
    fn small_p_values_are_floored() {
        assert_eq!(p_value(0.000999), "<1e-3");
        assert_eq!(p_value(0.001), "0.001");
        assert_eq!(p_value(1.0 / 1001.0), "<1e-3");
        assert_eq!(parse_number("<1e-3"), None);
        assert_eq!(parse_number("0.25"), Some(0.25));
    }

    #[test]
    fn round_trip_at_twelve_digits() {
        for v in [std::f64::consts::PI, -0.0071234, 123456.789012345, 9.99999999999951e-5] {
            let back: f64 = sig12(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-11, "{v} -> {back}");
        }
    }
}
