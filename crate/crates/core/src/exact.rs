//! Exact integer and rational helpers shared by the scheme modules.
//!
//! Every count in the scheme (subpackets, transmissions, allocations) is a sum
//! of products of small per-cache loads, i.e. an elementary symmetric
//! polynomial of a load vector. Those are computed here once, with a `u128`
//! fast path and an arbitrary-precision fallback.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// `e_k(values)`: the sum over all `k`-subsets of indices of the product of
/// the selected entries. `e_0 = 1`, and `e_k = 0` for `k > values.len()`.
pub fn elementary_symmetric(values: &[u64], k: usize) -> BigUint {
    match elementary_symmetric_u128(values, k) {
        Some(v) => BigUint::from(v),
        None => elementary_symmetric_big(values, k),
    }
}

/// Same as [`elementary_symmetric`], or `None` if an intermediate overflows.
pub fn elementary_symmetric_u128(values: &[u64], k: usize) -> Option<u128> {
    if k > values.len() {
        return Some(0);
    }
    let mut acc = vec![0u128; k + 1];
    acc[0] = 1;
    for (seen, &x) in values.iter().enumerate() {
        let x = x as u128;
        for j in (1..=k.min(seen + 1)).rev() {
            acc[j] = acc[j].checked_add(acc[j - 1].checked_mul(x)?)?;
        }
    }
    Some(acc[k])
}

fn elementary_symmetric_big(values: &[u64], k: usize) -> BigUint {
    if k > values.len() {
        return BigUint::zero();
    }
    let mut acc = vec![BigUint::zero(); k + 1];
    acc[0] = BigUint::one();
    for (seen, &x) in values.iter().enumerate() {
        for j in (1..=k.min(seen + 1)).rev() {
            let term = &acc[j - 1] * x;
            acc[j] += term;
        }
    }
    acc.swap_remove(k)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn gcd_all(values: &[u64]) -> u64 {
    values.iter().fold(0u64, |g, &v| g.gcd(&v))
}

pub fn ratio(numer: BigUint, denom: BigUint) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn from_u64(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Parses `"num/den"`, an integer, or a finite decimal such as `"0.35"` or
/// `"2.5e-1"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / 10;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// `"num/den"`, always with an explicit denominator.
pub fn format_fraction(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Rounds (half away from zero) to `digits` significant digits and prints the
/// result in positional notation.
pub fn format_significant(value: &Rational, digits: usize) -> String {
    assert!(digits > 0);
    if value.is_zero() {
        return "0".to_string();
    }
    let negative = value.is_negative();
    let magnitude = value.abs();
    let ten = BigInt::from(10);

    // Find e with 10^e <= magnitude < 10^(e+1).
    let numer_len = magnitude.numer().to_string().len() as i64;
    let denom_len = magnitude.denom().to_string().len() as i64;
    let mut exponent = numer_len - denom_len;
    while pow10(exponent) > magnitude {
        exponent -= 1;
    }
    while pow10(exponent + 1) <= magnitude {
        exponent += 1;
    }

    let shift = digits as i64 - 1 - exponent;
    let scaled = magnitude * pow10(shift);
    let mut rounded = (scaled + Rational::new(BigInt::one(), BigInt::from(2)))
        .floor()
        .to_integer();
    if rounded == num_traits::pow(ten, digits) {
        rounded /= 10;
        exponent += 1;
    }
    let body = rounded.to_string();

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exponent >= digits as i64 - 1 {
        out.push_str(&body);
        out.push_str(&"0".repeat((exponent - (digits as i64 - 1)) as usize));
    } else if exponent >= 0 {
        let split = exponent as usize + 1;
        out.push_str(&body[..split]);
        out.push('.');
        out.push_str(&body[split..]);
    } else {
        out.push_str("0.");
        out.push_str(&"0".repeat((-exponent - 1) as usize));
        out.push_str(&body);
    }
    out
}

/// `format_significant` for a float (used for standard errors).
pub fn format_float(value: f64, digits: usize) -> String {
    match Rational::from_float(value) {
        Some(r) => format_significant(&r, digits),
        None => value.to_string(),
    }
}

fn pow10(exponent: i64) -> Rational {
    let ten = BigInt::from(10);
    if exponent >= 0 {
        Rational::from_integer(num_traits::pow(ten, exponent as usize))
    } else {
        Rational::new(BigInt::one(), num_traits::pow(ten, (-exponent) as usize))
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_esym(values: &[u64], k: usize) -> BigUint {
        let n = values.len();
        let mut total = BigUint::zero();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let mut prod = BigUint::one();
            for (i, &v) in values.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    prod *= v;
                }
            }
            total += prod;
        }
        total
    }

    #[test]
    fn esym_matches_subset_sum() {
        let values = [4, 3, 3, 2, 1, 1];
        for k in 0..=7 {
            assert_eq!(
                elementary_symmetric(&values, k),
                brute_esym(&values, k),
                "k={k}"
            );
        }
    }

    #[test]
    fn esym_falls_back_on_overflow() {
        let values = [u64::MAX; 4];
        assert_eq!(elementary_symmetric_u128(&values, 3), None);
        assert_eq!(elementary_symmetric(&values, 3), brute_esym(&values, 3));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), BigUint::from(6u32));
        assert_eq!(binomial(13, 3), BigUint::from(286u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
    }

    #[test]
    fn parses_exact_rationals() {
        let r = |n: i64, d: i64| Rational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(parse_rational("2/5"), Some(r(2, 5)));
        assert_eq!(parse_rational("0.35"), Some(r(7, 20)));
        assert_eq!(parse_rational(".5"), Some(r(1, 2)));
        assert_eq!(parse_rational("1"), Some(r(1, 1)));
        assert_eq!(parse_rational("2.5e-1"), Some(r(1, 4)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("0.x"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn significant_digits() {
        let r = |n: i64, d: i64| Rational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(format_significant(&r(20, 9), 12), "2.22222222222");
        assert_eq!(format_significant(&r(3, 4), 12), "0.750000000000");
        assert_eq!(format_significant(&r(2, 3), 3), "0.667");
        assert_eq!(format_significant(&r(1, 300), 3), "0.00333");
        assert_eq!(format_significant(&r(9999, 1), 3), "10000");
        assert_eq!(format_significant(&r(-14, 9), 4), "-1.556");
        assert_eq!(format_significant(&r(0, 1), 4), "0");
        assert_eq!(format_significant(&r(123456, 1), 3), "123000");
    }
}
