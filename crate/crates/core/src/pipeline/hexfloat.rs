//! C99 `%a`-style hexadecimal float text, exact for every finite `f64`.

const MANTISSA_BITS: u32 = 52;
const EXP_BIAS: i64 = 1023;

/// Formats `v` as `[-]0x1.<hex>p<exp>` (or `0x0.<hex>p-1022` when subnormal).
pub fn format(v: f64) -> String {
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_field = ((bits >> MANTISSA_BITS) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << MANTISSA_BITS) - 1);
    if exp_field == 0x7ff {
        return if mantissa != 0 { "nan".into() } else { format!("{sign}inf") };
    }
    if exp_field == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_field == 0 { (0, 1 - EXP_BIAS) } else { (1, exp_field - EXP_BIAS) };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    let esign = if exp >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}{frac}p{esign}{}", exp.abs())
}

/// Parses text produced by [`format`]; also accepts uppercase digits and a
/// missing exponent sign. Values must be exactly representable.
pub fn parse(s: &str) -> Result<f64, String> {
    let err = |why: &str| format!("invalid hex float `{s}`: {why}");
    let (negative, rest) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let rest = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X")).ok_or_else(|| err("missing 0x prefix"))?;
    let (body, exp) = rest.split_once(['p', 'P']).ok_or_else(|| err("missing binary exponent"))?;
    let exp: i64 = exp.parse().map_err(|_| err("bad exponent"))?;
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let lead = match int_part {
        "0" => 0u64,
        "1" => 1u64,
        _ => return Err(err("leading digit must be 0 or 1")),
    };
    if frac_part.len() > 13 {
        return Err(err("more than 13 fraction digits"));
    }
    let mut mantissa = 0u64;
    for (i, c) in frac_part.chars().enumerate() {
        let d = c.to_digit(16).ok_or_else(|| err("non-hex digit"))? as u64;
        mantissa |= d << (4 * (12 - i));
    }
    let sign_bit = u64::from(negative) << 63;
    let bits = match (lead, mantissa) {
        (0, 0) => 0,
        (0, m) if exp == 1 - EXP_BIAS => m,
        (0, _) => return Err(err("subnormal form requires exponent -1022")),
        (_, m) => {
            let field = exp + EXP_BIAS;
            if !(1..=0x7fe).contains(&field) {
                return Err(err("exponent out of range"));
            }
            ((field as u64) << MANTISSA_BITS) | m
        }
    };
    Ok(f64::from_bits(sign_bit | bits))
}
