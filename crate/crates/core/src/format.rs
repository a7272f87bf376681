//! Number formatting shared by the CSV writers.

/// Formats `x` with `sig` significant digits in plain decimal notation,
/// trimming trailing zeros (like C's `%.{sig}g` without the exponent form).
/// Non-finite values print as an empty field.
pub fn sig(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - magnitude).clamp(0, 40) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// `sig(x, 12)`, the precision used in every CSV body.
pub fn sig12(x: f64) -> String {
    sig(x, 12)
}

/// `sig12` for optional values; `None` prints as an empty field.
pub fn sig12_opt(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.8535533905932737), "0.853553390593");
        assert_eq!(sig12(0.75), "0.75");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(123.456), "123.456");
        assert_eq!(sig12(1.5e-7), "0.00000015");
        assert_eq!(sig12(-0.0000000000001), "-0.0000000000001");
        assert_eq!(sig12(f64::NAN), "");
        assert_eq!(sig12_opt(None), "");
    }
}
