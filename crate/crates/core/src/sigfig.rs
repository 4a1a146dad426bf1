//! Deterministic decimal formatting at 9 significant digits.
//!
//! Nine digits are few enough that the printed form is stable under a
//! parse/print round trip (doubles carry ~16), which is what makes the
//! canonical JSON and CSV exports serialization fixpoints.

/// Format `v` with 9 significant digits, positional where reasonable and
/// scientific outside `1e-4..1e9`, trailing zeros stripped.
pub fn format_sig9(v: f64) -> String {
    assert!(v.is_finite(), "cannot format non-finite value");
    if v == 0.0 {
        return "0".to_string();
    }
    let neg = v < 0.0;
    let formatted = format!("{:.8e}", v.abs());
    let (mantissa, exp) = formatted
        .split_once('e')
        .expect("{:e} always contains an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    let body = if !(-4..9).contains(&exp) {
        // Scientific: d.ddde±x
        if digits.len() == 1 {
            format!("{digits}e{exp}")
        } else {
            format!("{}.{}e{exp}", &digits[..1], &digits[1..])
        }
    } else if exp >= 0 {
        let point = exp as usize + 1;
        if digits.len() <= point {
            // Pad with zeros up to the decimal point.
            let mut s = digits.to_string();
            s.extend(std::iter::repeat_n('0', point - digits.len()));
            s
        } else {
            format!("{}.{}", &digits[..point], &digits[point..])
        }
    } else {
        let zeros = (-exp - 1) as usize;
        format!("0.{}{}", "0".repeat(zeros), digits)
    };

    if neg {
        format!("-{body}")
    } else {
        body
    }
}
