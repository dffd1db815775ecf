//! `a+bi` flag syntax.

use num_complex::Complex64;

/// Parse `a`, `bi`, `a+bi`, `a-bi` (signs optional, `i` alone means `1i`,
/// exponents allowed). No whitespace.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let bad = || format!("malformed complex number '{text}' (expected a+bi)");
    if text.is_empty() || text.chars().any(char::is_whitespace) {
        return Err(bad());
    }
    let Some(body) = text.strip_suffix('i') else {
        let re = text.parse::<f64>().map_err(|_| bad())?;
        return if re.is_finite() { Ok(Complex64::new(re, 0.0)) } else { Err(bad()) };
    };
    // split at the last sign that is not part of an exponent or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |s: &str| -> Result<f64, String> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => s.parse::<f64>().map_err(|_| bad()),
        }
    };
    let z = match split {
        Some(k) => Complex64::new(body[..k].parse::<f64>().map_err(|_| bad())?, imag(&body[k..])?),
        None => Complex64::new(0.0, imag(body)?),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(bad());
    }
    Ok(z)
}

/// Shortest round-trip rendering in the same syntax.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_forms() {
        let c = Complex64::new;
        assert_eq!(parse_complex("1").unwrap(), c(1.0, 0.0));
        assert_eq!(parse_complex("-0.5").unwrap(), c(-0.5, 0.0));
        assert_eq!(parse_complex("1+0.5i").unwrap(), c(1.0, 0.5));
        assert_eq!(parse_complex("1-0.7i").unwrap(), c(1.0, -0.7));
        assert_eq!(parse_complex("0.5i").unwrap(), c(0.0, 0.5));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("2e-3+1e-2i").unwrap(), c(2e-3, 1e-2));
        assert_eq!(parse_complex("-1e+1-2i").unwrap(), c(-10.0, -2.0));
    }

    #[test]
    fn rejected_forms() {
        for t in ["", "abc", "1 + 2i", "1+", "1+2j", "nan", "inf", "1++2i"] {
            assert!(parse_complex(t).is_err(), "{t}");
        }
    }

    #[test]
    fn format_round_trips() {
        for z in [Complex64::new(1.0, -0.7), Complex64::new(0.0, 0.5), Complex64::new(-0.25, 0.0)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }
}
