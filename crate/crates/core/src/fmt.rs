//! Number formatting shared by the CSV writers and the CLI.

/// Formats like C's `%.{sig}g`: `sig` significant digits, trailing zeros
/// removed, exponent form for very large or small magnitudes.
pub fn format_sig(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::format_sig;

    #[test]
    fn matches_printf_g() {
        assert_eq!(format_sig(0.0117064, 6), "0.0117064");
        assert_eq!(format_sig(3.0, 17), "3");
        assert_eq!(format_sig(1.0 / 3.0, 17), "0.33333333333333331");
        assert_eq!(format_sig(1.7217866614e-6, 6), "1.72179e-06");
        assert_eq!(format_sig(129378.0, 6), "129378");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(-0.5, 6), "-0.5");
        assert_eq!(format_sig(0.99999999, 6), "1");
    }

    #[test]
    fn round_trips_at_17_digits() {
        for x in [0.1, 1.0 / 7.0, 2.0f64.sqrt(), 1e-300, 6.02e23] {
            assert_eq!(format_sig(x, 17).parse::<f64>().unwrap(), x);
        }
    }
}
