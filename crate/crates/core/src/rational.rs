//! Exact rational helpers shared by the counting code.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn from_u64(n: u64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    BigRational::zero()
}

pub fn one() -> Rational {
    BigRational::one()
}

/// Smallest integer `n` with `n >= value`, clamped at zero.
pub fn ceil_nonneg(value: &Rational) -> u64 {
    if !value.is_positive() {
        return 0;
    }
    value.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Percentage `100 * part / whole`, rounded half-up to two decimals.
pub fn percent_2dp(part: &Rational, whole: u64) -> f64 {
    if whole == 0 {
        return 0.0;
    }
    let hundredths = part * from_u64(10_000) / from_u64(whole);
    let rounded = (hundredths + Rational::new(BigInt::one(), BigInt::from(2))).floor();
    to_f64(&rounded) / 100.0
}

/// Renders `p/q`, or `p` when the denominator is one.
pub fn render(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn parse(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(BigRational::new(n, d))
            }
        }
        None => text.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_str {
    use super::Rational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::render(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).ok_or_else(|| D::Error::custom(format!("bad rational {text:?}")))
    }
}

/// Same as [`serde_str`] for `(candidate, value)` lists.
pub mod serde_pairs {
    use super::Rational;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &[(usize, Rational)], s: S) -> Result<S::Ok, S::Error> {
        let rendered: Vec<(usize, String)> = value.iter().map(|(c, v)| (*c, super::render(v))).collect();
        rendered.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, Rational)>, D::Error> {
        let raw = Vec::<(usize, String)>::deserialize(d)?;
        raw.into_iter()
            .map(|(c, t)| {
                super::parse(&t).map(|v| (c, v)).ok_or_else(|| D::Error::custom(format!("bad rational {t:?}")))
            })
            .collect()
    }
}
