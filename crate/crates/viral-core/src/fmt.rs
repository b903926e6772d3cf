//! Numeric formatting shared by the CSV writers.

/// Formats with 12 significant digits, positional where readable and
/// scientific for extreme magnitudes. Mirrors printf's `%.12g`.
pub fn sig12(x: f64) -> String {
    format_sig(x, 12)
}

pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if exponent < -4 || exponent >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, x);
        let (mantissa, exp) = s.split_once('e').expect("scientific form");
        format!("{}e{exp}", trim_fraction(mantissa))
    } else {
        let decimals = (sig as i32 - 1 - exponent).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Drops trailing fractional zeros and a bare trailing point.
fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
