//! Exact rationals: parsing, formatting and the continued-fraction search for
//! the simplest rational in an interval.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub type Rational = num_rational::BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a decimal literal such as `0.125` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = parse_int(n)?;
        let d: BigInt = parse_int(d)?;
        if d.is_zero() {
            return Err(format!("zero denominator in '{t}'"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((mant, exp)) = t.split_once(['e', 'E']) {
        let m = parse_rational(mant)?;
        let e: i32 = exp.parse().map_err(|_| format!("malformed exponent in '{t}'"))?;
        let scale = Rational::from_integer(num_traits::pow(BigInt::from(10), e.unsigned_abs() as usize));
        return Ok(if e >= 0 { m * scale } else { m / scale });
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("malformed number '{t}'"));
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("malformed number '{t}'"));
    }
    let digits = format!("{whole}{frac}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| format!("malformed number '{t}'"))?
    };
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

fn parse_int(s: &str) -> Result<BigInt, String> {
    let s = s.trim();
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("malformed integer '{s}'"));
    }
    s.parse().map_err(|_| format!("malformed integer '{s}'"))
}

/// `p/q`, or `p` for integers.
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact binary value of a finite float.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

/// One end of an interval: value plus whether it belongs to the interval.
#[derive(Clone, Debug)]
struct End {
    value: Rational,
    closed: bool,
}

/// Simplest rational (minimal denominator, then minimal numerator) in the
/// interval with the given endpoint inclusivity. `lo ≥ 0` and the interval
/// must be nonempty.
pub fn simplest_in(lo: &Rational, lo_closed: bool, hi: &Rational, hi_closed: bool) -> Rational {
    assert!(!lo.is_negative(), "simplest_in expects a nonnegative interval");
    assert!(lo < hi || (lo == hi && lo_closed && hi_closed), "simplest_in expects a nonempty interval");
    simplest_rec(End { value: lo.clone(), closed: lo_closed }, Some(End { value: hi.clone(), closed: hi_closed }))
}

fn simplest_rec(lo: End, hi: Option<End>) -> Rational {
    let fl = lo.value.floor();
    let n = if lo.closed && lo.value.is_integer() { fl.clone() } else { &fl + Rational::one() };
    let fits = match &hi {
        None => true,
        Some(h) => n < h.value || (n == h.value && h.closed),
    };
    if fits {
        return n;
    }
    // No integer inside: both ends lie in [fl, fl + 1]. Write x = fl + 1/y.
    let hi = hi.expect("bounded interval");
    let new_lo = End { value: (&hi.value - &fl).recip(), closed: hi.closed };
    let new_hi = if lo.value == fl { None } else { Some(End { value: (&lo.value - &fl).recip(), closed: lo.closed }) };
    fl + simplest_rec(new_lo, new_hi).recip()
}

pub fn is_probability(r: &Rational) -> bool {
    !r.is_negative() && r <= &Rational::one()
}

/// Lowest-terms check with a positive denominator.
pub fn is_normalized(r: &Rational) -> bool {
    r.denom().is_positive() && (r.numer().gcd(r.denom()).is_one() || (r.numer().is_zero() && r.denom().is_one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/2").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("0.5").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("1").unwrap(), int(1));
        assert_eq!(parse_rational(".25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("2/4").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("1e-6").unwrap(), rat(1, 1_000_000));
        assert_eq!(parse_rational("2.5E1").unwrap(), int(25));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn formats_round_trip() {
        for r in [rat(2, 3), int(0), int(1), rat(-5, 7)] {
            assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
        }
        assert_eq!(format_rational(&int(1)), "1");
    }

    #[test]
    fn simplest_examples() {
        assert_eq!(simplest_in(&rat(1, 3), true, &rat(2, 3), true), rat(1, 2));
        assert_eq!(simplest_in(&rat(3, 5), true, &rat(7, 10), true), rat(2, 3));
        assert_eq!(simplest_in(&rat(5, 8), true, &rat(5, 8), true), rat(5, 8));
        assert_eq!(simplest_in(&int(0), true, &rat(1, 3), true), int(0));
        assert_eq!(simplest_in(&int(0), false, &rat(1, 3), true), rat(1, 3));
        assert_eq!(simplest_in(&rat(1, 2), false, &int(1), false), rat(2, 3));
        assert_eq!(simplest_in(&rat(1, 2), true, &int(1), true), int(1));
        assert_eq!(simplest_in(&rat(1, 2), true, &int(1), false), rat(1, 2));
    }

    fn brute(lo: &Rational, lc: bool, hi: &Rational, hc: bool) -> Rational {
        for d in 1i64.. {
            for n in 0..=d {
                let c = rat(n, d);
                let above = if lc { &c >= lo } else { &c > lo };
                let below = if hc { &c <= hi } else { &c < hi };
                if above && below {
                    return c;
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn simplest_matches_scan() {
        let pts: Vec<Rational> = (0..=12)
            .flat_map(|d| (0..=d).map(move |n| (n, d)))
            .filter(|&(_, d)| d > 0)
            .map(|(n, d)| rat(n, d))
            .collect();
        for a in &pts {
            for b in &pts {
                if a >= b {
                    continue;
                }
                for (lc, hc) in [(true, true), (false, true), (true, false), (false, false)] {
                    assert_eq!(simplest_in(a, lc, b, hc), brute(a, lc, b, hc), "{a} {b} {lc} {hc}");
                }
            }
        }
    }
}
