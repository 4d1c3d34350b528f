//! Exact arithmetic in an imaginary quadratic field `K = Q(sqrt(-m))` and its
//! ring of integers, written in the integral basis `{1, w}`.
//!
//! `w` is `sqrt(-m)` when `m = 1, 2 (mod 4)` and `(-1 + sqrt(-m)) / 2` when
//! `m = 3 (mod 4)`. In both cases `w` is a root of `X^2 + t X + n` with
//! `(t, n) = (0, m)` or `(1, (1 + m) / 4)`, which is all the multiplication
//! table needs.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational number, always kept in lowest terms with positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("m = {0} is an excluded case (m = 1 and m = 3 have extra units)")]
    Excluded(i64),
    #[error("m = {0} is not square-free")]
    NotSquareFree(i64),
    #[error("m = {0} must be a positive integer")]
    NonPositive(i64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse {0:?}")]
    Parse(String),
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

pub fn is_square_free(m: i64) -> bool {
    if m <= 0 {
        return false;
    }
    let mut k = 2i64;
    while k * k <= m {
        if m % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

/// Floor of the square root of a nonnegative integer.
pub fn isqrt(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "isqrt of a negative number");
    n.sqrt()
}

/// Exact square root of a rational, when it is the square of a rational.
pub fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer();
    let d = q.denom();
    let rn = isqrt(n);
    let rd = isqrt(d);
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        Some(Rational::new(rn, rd))
    } else {
        None
    }
}

/// An integer `k` with `k >= sqrt(q)` for `q >= 0`, used for loop bounds.
pub fn ceil_sqrt(q: &Rational) -> BigInt {
    if !q.is_positive() {
        return BigInt::zero();
    }
    let c = q.ceil().to_integer();
    let mut r = isqrt(&c);
    if &r * &r < c {
        r += 1;
    }
    r
}

/// The field `Q(sqrt(-m))` together with the choice of integral basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldCtx {
    m: i64,
}

impl FieldCtx {
    pub fn new(m: i64) -> Result<Self, FieldError> {
        if m <= 0 {
            return Err(FieldError::NonPositive(m));
        }
        if m == 1 || m == 3 {
            return Err(FieldError::Excluded(m));
        }
        if !is_square_free(m) {
            return Err(FieldError::NotSquareFree(m));
        }
        Ok(FieldCtx { m })
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// True when `m = 3 (mod 4)`, i.e. `w = (-1 + sqrt(-m)) / 2`.
    pub fn is_3_mod_4(&self) -> bool {
        self.m % 4 == 3
    }

    /// Discriminant of `K`; negative.
    pub fn discriminant(&self) -> i64 {
        if self.is_3_mod_4() {
            -self.m
        } else {
            -4 * self.m
        }
    }

    /// `(t, n)` with `w^2 + t w + n = 0`.
    fn min_poly(&self) -> (i64, i64) {
        if self.is_3_mod_4() {
            (1, (1 + self.m) / 4)
        } else {
            (0, self.m)
        }
    }

    /// Area of the fundamental cell of `O` in `coords` units.
    pub fn cell_area(&self) -> Rational {
        if self.is_3_mod_4() {
            rat(1, 2)
        } else {
            rat(1, 1)
        }
    }

    pub fn omega(&self) -> AlgInt {
        AlgInt::new(0, 1)
    }

    // ---- ring of integers ----

    pub fn mul(&self, x: &AlgInt, y: &AlgInt) -> AlgInt {
        let (t, n) = self.min_poly();
        let bd = &x.b * &y.b;
        AlgInt {
            a: &x.a * &y.a - &bd * n,
            b: &x.a * &y.b + &x.b * &y.a - bd * t,
        }
    }

    pub fn conj(&self, x: &AlgInt) -> AlgInt {
        let (t, _) = self.min_poly();
        AlgInt {
            a: &x.a - &x.b * t,
            b: -&x.b,
        }
    }

    pub fn norm(&self, x: &AlgInt) -> BigInt {
        let (t, n) = self.min_poly();
        &x.a * &x.a - &x.a * &x.b * t + &x.b * &x.b * n
    }

    // ---- field ----

    pub fn fmul(&self, x: &FieldElem, y: &FieldElem) -> FieldElem {
        let (t, n) = self.min_poly();
        let bd = &x.y * &y.y;
        FieldElem {
            x: &x.x * &y.x - &bd * rat_int(n),
            y: &x.x * &y.y + &x.y * &y.x - bd * rat_int(t),
        }
    }

    pub fn fconj(&self, x: &FieldElem) -> FieldElem {
        let (t, _) = self.min_poly();
        FieldElem {
            x: &x.x - &x.y * rat_int(t),
            y: -&x.y,
        }
    }

    /// `|e|^2`, exact and nonnegative.
    pub fn fnorm(&self, e: &FieldElem) -> Rational {
        let (t, n) = self.min_poly();
        &e.x * &e.x - &e.x * &e.y * rat_int(t) + &e.y * &e.y * rat_int(n)
    }

    pub fn finv(&self, e: &FieldElem) -> Result<FieldElem, FieldError> {
        let n = self.fnorm(e);
        if n.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        let c = self.fconj(e);
        Ok(FieldElem {
            x: c.x / &n,
            y: c.y / n,
        })
    }

    pub fn fdiv(&self, x: &FieldElem, y: &FieldElem) -> Result<FieldElem, FieldError> {
        Ok(self.fmul(x, &self.finv(y)?))
    }

    /// Real part and the coefficient of `sqrt(-m)`: `e = x_re + y_im * sqrt(-m)`.
    pub fn coords(&self, e: &FieldElem) -> (Rational, Rational) {
        if self.is_3_mod_4() {
            let half = rat(1, 2);
            (&e.x - &e.y * &half, &e.y * half)
        } else {
            (e.x.clone(), e.y.clone())
        }
    }

    /// Inverse of [`FieldCtx::coords`].
    pub fn from_coords(&self, x_re: &Rational, y_im: &Rational) -> FieldElem {
        if self.is_3_mod_4() {
            FieldElem {
                x: x_re + y_im,
                y: y_im * rat_int(2),
            }
        } else {
            FieldElem {
                x: x_re.clone(),
                y: y_im.clone(),
            }
        }
    }

    /// Real part of `e`, exact.
    pub fn re(&self, e: &FieldElem) -> Rational {
        self.coords(e).0
    }
}

/// An element `a + b w` of the ring of integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlgInt {
    #[serde(with = "crate::serial::bigint")]
    pub a: BigInt,
    #[serde(with = "crate::serial::bigint")]
    pub b: BigInt,
}

impl AlgInt {
    pub fn new(a: i64, b: i64) -> Self {
        AlgInt {
            a: BigInt::from(a),
            b: BigInt::from(b),
        }
    }

    pub fn from_big(a: BigInt, b: BigInt) -> Self {
        AlgInt { a, b }
    }

    pub fn zero() -> Self {
        AlgInt::new(0, 0)
    }

    pub fn one() -> Self {
        AlgInt::new(1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// True when the first nonzero coordinate is positive.
    pub fn is_positive(&self) -> bool {
        match self.a.sign() {
            num_bigint::Sign::Plus => true,
            num_bigint::Sign::Minus => false,
            num_bigint::Sign::NoSign => self.b.is_positive(),
        }
    }

    pub fn to_field(&self) -> FieldElem {
        FieldElem {
            x: Rational::from_integer(self.a.clone()),
            y: Rational::from_integer(self.b.clone()),
        }
    }
}

impl Add for &AlgInt {
    type Output = AlgInt;
    fn add(self, o: &AlgInt) -> AlgInt {
        AlgInt {
            a: &self.a + &o.a,
            b: &self.b + &o.b,
        }
    }
}

impl Sub for &AlgInt {
    type Output = AlgInt;
    fn sub(self, o: &AlgInt) -> AlgInt {
        AlgInt {
            a: &self.a - &o.a,
            b: &self.b - &o.b,
        }
    }
}

impl Neg for &AlgInt {
    type Output = AlgInt;
    fn neg(self) -> AlgInt {
        AlgInt {
            a: -&self.a,
            b: -&self.b,
        }
    }
}

impl fmt::Display for AlgInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*w", self.a, self.b)
    }
}

impl FromStr for AlgInt {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let e: FieldElem = s.parse()?;
        e.to_alg_int()
            .ok_or_else(|| FieldError::Parse(s.to_string()))
    }
}

/// An element `x + y w` of the field, with rational coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElem {
    #[serde(with = "crate::serial::rational")]
    pub x: Rational,
    #[serde(with = "crate::serial::rational")]
    pub y: Rational,
}

impl FieldElem {
    pub fn new(x: Rational, y: Rational) -> Self {
        FieldElem { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        FieldElem {
            x: rat_int(x),
            y: rat_int(y),
        }
    }

    pub fn zero() -> Self {
        FieldElem::from_ints(0, 0)
    }

    pub fn one() -> Self {
        FieldElem::from_ints(1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.x.is_integer() && self.y.is_integer()
    }

    pub fn to_alg_int(&self) -> Option<AlgInt> {
        if self.is_integral() {
            Some(AlgInt {
                a: self.x.to_integer(),
                b: self.y.to_integer(),
            })
        } else {
            None
        }
    }

    pub fn scale(&self, q: &Rational) -> FieldElem {
        FieldElem {
            x: &self.x * q,
            y: &self.y * q,
        }
    }

    /// Splits `self` as `frac + t` with `t` in `O` and both coordinates of
    /// `frac` in `[0, 1)`.
    pub fn reduce_mod_lattice(&self) -> (FieldElem, AlgInt) {
        let fa = self.x.floor();
        let fb = self.y.floor();
        let t = AlgInt {
            a: fa.to_integer(),
            b: fb.to_integer(),
        };
        (
            FieldElem {
                x: &self.x - fa,
                y: &self.y - fb,
            },
            t,
        )
    }
}

impl Ord for FieldElem {
    fn cmp(&self, o: &Self) -> Ordering {
        self.x.cmp(&o.x).then_with(|| self.y.cmp(&o.y))
    }
}

impl PartialOrd for FieldElem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Add for &FieldElem {
    type Output = FieldElem;
    fn add(self, o: &FieldElem) -> FieldElem {
        FieldElem {
            x: &self.x + &o.x,
            y: &self.y + &o.y,
        }
    }
}

impl Sub for &FieldElem {
    type Output = FieldElem;
    fn sub(self, o: &FieldElem) -> FieldElem {
        FieldElem {
            x: &self.x - &o.x,
            y: &self.y - &o.y,
        }
    }
}

impl Neg for &FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem {
            x: -&self.x,
            y: -&self.y,
        }
    }
}

impl Add<&AlgInt> for &FieldElem {
    type Output = FieldElem;
    fn add(self, o: &AlgInt) -> FieldElem {
        FieldElem {
            x: &self.x + Rational::from_integer(o.a.clone()),
            y: &self.y + Rational::from_integer(o.b.clone()),
        }
    }
}

impl Sub<&AlgInt> for &FieldElem {
    type Output = FieldElem;
    fn sub(self, o: &AlgInt) -> FieldElem {
        FieldElem {
            x: &self.x - Rational::from_integer(o.a.clone()),
            y: &self.y - Rational::from_integer(o.b.clone()),
        }
    }
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<Rational, FieldError> {
    let s = s.trim();
    let err = || FieldError::Parse(s.to_string());
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| err())?)),
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} + {}*w",
            format_rational(&self.x),
            format_rational(&self.y)
        )
    }
}

impl FromStr for FieldElem {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FieldError::Parse(s.to_string());
        let (x, rest) = s.split_once(" + ").ok_or_else(err)?;
        let y = rest.trim().strip_suffix("*w").ok_or_else(err)?;
        Ok(FieldElem {
            x: parse_rational(x)?,
            y: parse_rational(y)?,
        })
    }
}

/// Sign of a rational as -1, 0, 1.
pub fn sign(q: &Rational) -> i32 {
    if q.is_positive() {
        1
    } else if q.is_negative() {
        -1
    } else {
        0
    }
}

pub fn to_i64(n: &BigInt) -> i64 {
    n.to_i64().expect("integer does not fit in i64")
}

pub fn big_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    a.gcd(b)
}

pub fn one() -> Rational {
    Rational::one()
}
