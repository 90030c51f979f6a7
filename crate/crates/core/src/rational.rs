//! Exact rationals and the scalar functionals `mu`, `lambda` and `d`.
//!
//! `Rational` keeps values that fit into `i64` inline and transparently
//! promotes to arbitrary precision on overflow, so results never wrap.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};

use crate::graph::Graph;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RationalError {
    #[error("malformed rational `{0}` (expected p/q or an integer)")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

#[derive(Clone, Debug)]
enum Repr {
    Small(Ratio<i64>),
    Big(BigRational),
}

/// Exact rational number, always in lowest terms.
#[derive(Clone, Debug)]
pub struct Rational(Repr);

fn demote(b: BigRational) -> Rational {
    // i64::MIN is excluded so that negation of a small value never overflows
    match (b.numer().to_i64(), b.denom().to_i64()) {
        (Some(n), Some(d)) if n != i64::MIN => Rational(Repr::Small(Ratio::new_raw(n, d))),
        _ => Rational(Repr::Big(b)),
    }
}

impl Rational {
    pub fn new(n: i64, d: i64) -> Rational {
        assert!(d != 0, "zero denominator");
        Rational::from_big(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_int(n: i64) -> Rational {
        Rational::new(n, 1)
    }

    pub fn from_big(b: BigRational) -> Rational {
        demote(b)
    }

    pub fn zero() -> Rational {
        Rational::from_int(0)
    }

    pub fn one() -> Rational {
        Rational::from_int(1)
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(r) => BigRational::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            Repr::Big(b) => b.clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        self.to_big().numer().clone()
    }

    pub fn denom(&self) -> BigInt {
        self.to_big().denom().clone()
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_zero(),
            Repr::Big(b) => b.is_zero(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => *r.numer() > 0,
            Repr::Big(b) => b.is_positive(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => *r.numer() < 0,
            Repr::Big(b) => b.is_negative(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => *r.denom() == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn recip(&self) -> Rational {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational::from_big(self.to_big().recip())
    }

    pub fn abs(&self) -> Rational {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn floor(&self) -> BigInt {
        self.to_big().floor().to_integer()
    }

    pub fn ceil(&self) -> BigInt {
        self.to_big().ceil().to_integer()
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(r) => *r.numer() as f64 / *r.denom() as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Numerator and denominator as `i64`, if both fit.
    pub fn to_i64_pair(&self) -> Option<(i64, i64)> {
        match &self.0 {
            Repr::Small(r) => Some((*r.numer(), *r.denom())),
            Repr::Big(_) => None,
        }
    }

    /// Exact midpoint of two rationals.
    pub fn midpoint(a: &Rational, b: &Rational) -> Rational {
        (a + b) / Rational::from_int(2)
    }

    pub fn min(a: Rational, b: Rational) -> Rational {
        if b < a {
            b
        } else {
            a
        }
    }

    pub fn max(a: Rational, b: Rational) -> Rational {
        if b > a {
            b
        } else {
            a
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident, $op:tt) => {
        impl<'a> $tr<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: &'a Rational) -> Rational {
                if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
                    if let Some(c) = a.$checked(b) {
                        if *c.numer() != i64::MIN {
                            return Rational(Repr::Small(c));
                        }
                    }
                }
                demote(self.to_big() $op rhs.to_big())
            }
        }
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: &'a Rational) -> Rational {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add, +);
binop!(Sub, sub, checked_sub, -);
binop!(Mul, mul, checked_mul, *);

impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero");
        if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
            if let Some(c) = a.checked_div(b) {
                if *c.numer() != i64::MIN {
                    return Rational(Repr::Small(c));
                }
            }
        }
        demote(self.to_big() / rhs.to_big())
    }
}
impl Div<Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        &self / &rhs
    }
}
impl<'a> Div<&'a Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        &self / rhs
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match self.0 {
            Repr::Small(r) => Rational(Repr::Small(-r)),
            Repr::Big(b) => demote(-b),
        }
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = &*self - rhs;
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Rational) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a == b,
            (Repr::Big(a), Repr::Big(b)) => a == b,
            // representation is canonical: a small value is never stored big
            _ => false,
        }
    }
}
impl Eq for Rational {}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(r) => {
                0u8.hash(state);
                r.numer().hash(state);
                r.denom().hash(state);
            }
            Repr::Big(b) => {
                1u8.hash(state);
                b.numer().hash(state);
                b.denom().hash(state);
            }
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Rational) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl Default for Rational {
    fn default() -> Rational {
        Rational::zero()
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Rational {
        Rational::from_int(n)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Repr::Small(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Repr::Big(b) if b.is_integer() => write!(f, "{}", b.numer()),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    /// Accepts `p/q` or an integer; decimals are rejected on purpose.
    fn from_str(s: &str) -> Result<Rational, RationalError> {
        let t = s.trim();
        let bad = || RationalError::Malformed(s.to_string());
        let parse_int = |x: &str| -> Result<BigInt, RationalError> {
            let x = x.trim();
            let digits = x.strip_prefix(['-', '+']).unwrap_or(x);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            x.parse::<BigInt>().map_err(|_| bad())
        };
        match t.split_once('/') {
            None => Ok(Rational::from_big(BigRational::from_integer(parse_int(t)?))),
            Some((p, q)) => {
                let (p, q) = (parse_int(p)?, parse_int(q)?);
                if q.is_zero() {
                    return Err(RationalError::ZeroDenominator(s.to_string()));
                }
                Ok(Rational::from_big(BigRational::new(p, q)))
            }
        }
    }
}

/// A rational extended by negative infinity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtRational {
    NegInf,
    Finite(Rational),
}

impl ExtRational {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::NegInf => None,
            ExtRational::Finite(r) => Some(r),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtRational::Finite(_))
    }

    pub fn add(&self, other: &ExtRational) -> ExtRational {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::NegInf,
        }
    }
}

impl From<Rational> for ExtRational {
    fn from(r: Rational) -> ExtRational {
        ExtRational::Finite(r)
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::NegInf => write!(f, "-inf"),
            ExtRational::Finite(r) => write!(f, "{r}"),
        }
    }
}

/// Vertex weights of one ordered graph, indexed by vertex.
pub type WeightVector = Vec<ExtRational>;

/// `v(H) - e(H)·θ`.
pub fn mu_theta(h: &Graph, theta: &Rational) -> Rational {
    mu_counts(h.vertex_count(), h.edge_count(), theta)
}

pub fn mu_counts(v: usize, e: usize, theta: &Rational) -> Rational {
    Rational::from_int(v as i64) - Rational::from_int(e as i64) * theta
}

/// `Σ_u (1 + w(u)) - e(H)·θ`, or `-inf` if some weight is `-inf`.
pub fn lambda_theta(h: &Graph, w: &[ExtRational], theta: &Rational) -> ExtRational {
    assert!(w.len() >= h.vertex_count(), "weight vector too short");
    let mut acc = -(Rational::from_int(h.edge_count() as i64) * theta);
    for x in &w[..h.vertex_count()] {
        match x {
            ExtRational::NegInf => return ExtRational::NegInf,
            ExtRational::Finite(x) => acc = acc + Rational::one() + x,
        }
    }
    ExtRational::Finite(acc)
}

/// Minimum over vertex sets `J ∋ v` of `Σ_{u∈J∖v} (1 + w(u)) - e(H[J])·θ`.
///
/// Taking induced edges is optimal for fixed vertices since `θ > 0`.
pub fn d_theta(h: &Graph, v: usize, w: &[ExtRational], theta: &Rational) -> Rational {
    let n = h.vertex_count();
    assert!(v < n && n <= 30, "d_theta: vertex out of range or graph too large");
    let others: Vec<usize> = (0..n).filter(|&u| u != v).collect();
    let vals: Vec<Rational> = others
        .iter()
        .map(|&u| match &w[u] {
            ExtRational::Finite(x) => Rational::one() + x,
            ExtRational::NegInf => panic!("d_theta: weight of vertex {u} is -inf"),
        })
        .collect();
    let adj = h.adjacency_masks();
    let mut best = Rational::zero();
    for mask in 1u32..(1u32 << others.len()) {
        let mut verts = 1u32 << v;
        let mut sum = Rational::zero();
        for (k, &u) in others.iter().enumerate() {
            if mask >> k & 1 == 1 {
                verts |= 1 << u;
                sum += &vals[k];
            }
        }
        let e: u32 = (0..n).filter(|&x| verts >> x & 1 == 1).map(|x| (adj[x] & verts).count_ones()).sum::<u32>() / 2;
        let val = sum - Rational::from_int(e as i64) * theta;
        if val < best {
            best = val;
        }
    }
    best
}
