//! Exact rational helpers used for gadget matrices, label-cover weights and enumeration results.

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{invalid_param, Result};

pub type Rational = Rational64;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Formats as `"p/q"`, or `"p"` when the denominator is one.
pub fn format(r: Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"p/q"` or an integer.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let parsed = match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| invalid_param!("bad rational {s:?}"))?;
            let q: i64 = q.trim().parse().map_err(|_| invalid_param!("bad rational {s:?}"))?;
            if q.is_zero() {
                return Err(invalid_param!("zero denominator in {s:?}"));
            }
            Rational::new(p, q)
        }
        None => Rational::from_integer(s.parse().map_err(|_| invalid_param!("bad rational {s:?}"))?),
    };
    Ok(parsed)
}

/// Exact rational equal to `x` when `x` has a short decimal/binary form (denominator at most 2^20).
pub fn exact_from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let r = Rational::approximate_float(x)?;
    (r.to_f64() == Some(x) && *r.denom() <= 1 << 20).then_some(r)
}

/// Serde adapter storing a [`Rational`] as a `"p/q"` string.
pub mod as_string {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(*r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(D::Error::custom)
    }
}
