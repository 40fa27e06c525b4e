//! Exact dyadic rationals `m · 2^e` with arbitrary-precision mantissa.
//!
//! Every curve parameter, cell coordinate and Peano-node output is carried
//! in this type so that nested compositions never lose bits. Every finite
//! `f64` is a dyadic rational, so conversion from floats is exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DyadicError {
    #[error("non-finite value {0} has no dyadic representation")]
    NonFinite(f64),
    #[error("cannot parse dyadic literal {0:?}")]
    Parse(String),
}

/// `mantissa · 2^exponent`, normalised so the mantissa is odd (or zero with
/// exponent 0). Structural equality is therefore value equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic::from_int(1)
    }

    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        let mut d = Dyadic { mantissa, exponent };
        d.normalize();
        d
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    pub fn from_bigint(v: BigInt) -> Self {
        Dyadic::new(v, 0)
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        Dyadic::new(BigInt::from_biguint(Sign::Plus, v.clone()), 0)
    }

    /// `num / 2^shift`
    pub fn ratio_pow2(num: BigInt, shift: u64) -> Self {
        Dyadic::new(num, -(shift as i64))
    }

    pub fn from_f64(v: f64) -> Result<Self, DyadicError> {
        if !v.is_finite() {
            return Err(DyadicError::NonFinite(v));
        }
        if v == 0.0 {
            return Ok(Dyadic::zero());
        }
        let bits = v.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let m = BigInt::from(m);
        Ok(Dyadic::new(if negative { -m } else { m }, e))
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return;
        }
        if let Some(tz) = self.mantissa.trailing_zeros() {
            if tz > 0 {
                self.mantissa >>= tz;
                self.exponent += tz as i64;
            }
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Multiply by `2^k` (k may be negative). Exact.
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic {
            mantissa: self.mantissa.clone(),
            exponent: self.exponent + k,
        }
    }

    /// Number of fractional bits needed to write the value exactly.
    pub fn fractional_bits(&self) -> u64 {
        if self.exponent >= 0 {
            0
        } else {
            (-self.exponent) as u64
        }
    }

    pub fn floor(&self) -> BigInt {
        if self.exponent >= 0 {
            &self.mantissa << (self.exponent as u64)
        } else {
            let den = BigInt::one() << ((-self.exponent) as u64);
            self.mantissa.div_floor(&den)
        }
    }

    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// `ceil(self / d)` for a positive integer `d`, computed exactly.
    pub fn ceil_div(&self, d: &BigInt) -> BigInt {
        assert!(d.is_positive(), "divisor must be positive");
        let (num, den) = if self.exponent >= 0 {
            (&self.mantissa << (self.exponent as u64), d.clone())
        } else {
            (self.mantissa.clone(), d << ((-self.exponent) as u64))
        };
        num.div_ceil(&den)
    }

    /// Round to nearest `f64` (ties to even) outside the subnormal range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mag = self.mantissa.magnitude();
        let bits = mag.bits();
        let (top, e) = if bits > 64 {
            let drop = bits - 64;
            let mut top = (mag >> drop).to_u64().unwrap_or(u64::MAX);
            // sticky bit: 64 kept bits leave room below the 53-bit rounding point
            if mag.trailing_zeros().unwrap_or(0) < drop {
                top |= 1;
            }
            (top, self.exponent + drop as i64)
        } else {
            (mag.to_u64().unwrap_or(u64::MAX), self.exponent)
        };
        let v = scale_pow2(top as f64, e);
        if self.mantissa.is_negative() {
            -v
        } else {
            v
        }
    }

    /// Exact textual form `<mantissa>p<exponent>`, e.g. `3p-2` for 0.75.
    pub fn to_exact_string(&self) -> String {
        format!("{}p{}", self.mantissa, self.exponent)
    }

    /// Parse either the exact `<mantissa>p<exponent>` form or a decimal
    /// float literal (converted through `f64`).
    pub fn parse_exact_or_decimal(s: &str) -> Result<Self, DyadicError> {
        let s = s.trim();
        if let Some((m, e)) = s.split_once('p') {
            let m = BigInt::from_str(m).map_err(|_| DyadicError::Parse(s.to_string()))?;
            let e = i64::from_str(e).map_err(|_| DyadicError::Parse(s.to_string()))?;
            return Ok(Dyadic::new(m, e));
        }
        let v = f64::from_str(s).map_err(|_| DyadicError::Parse(s.to_string()))?;
        Dyadic::from_f64(v)
    }

    pub fn min(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn max(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    /// `a + (b - a) · w`
    pub fn lerp(a: &Dyadic, b: &Dyadic, w: &Dyadic) -> Dyadic {
        a + &(&(b - a) * w)
    }
}

// ldexp without libm: split the scaling so intermediate powers stay finite.
fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

fn align(a: &Dyadic, b: &Dyadic) -> (BigInt, BigInt, i64) {
    let e = a.exponent.min(b.exponent);
    let ma = &a.mantissa << ((a.exponent - e) as u64);
    let mb = &b.mantissa << ((b.exponent - e) as u64);
    (ma, mb, e)
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &'a Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let (a, b, e) = align(self, rhs);
        Dyadic::new(a + b, e)
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &'a Dyadic) -> Dyadic {
        if rhs.is_zero() {
            return self.clone();
        }
        let (a, b, e) = align(self, rhs);
        Dyadic::new(a - b, e)
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &'a Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.mantissa.sign(), other.mantissa.sign()) {
            (a, b) if a != b => {
                let rank = |s: Sign| match s {
                    Sign::Minus => 0,
                    Sign::NoSign => 1,
                    Sign::Plus => 2,
                };
                rank(a).cmp(&rank(b))
            }
            _ => {
                let (a, b, _) = align(self, other);
                a.cmp(&b)
            }
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Dyadic::from_int(v)
    }
}

impl TryFrom<f64> for Dyadic {
    type Error = DyadicError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Dyadic::from_f64(v)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (~{})", self.to_exact_string(), self.to_f64())
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}
