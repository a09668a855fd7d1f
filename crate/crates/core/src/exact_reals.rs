//! Exact real numbers in multiquadratic fields `Q(√d_1, …, √d_k)`.
//!
//! A [`QuadExt`] is a finite Q-linear combination of square roots of distinct
//! squarefree positive integers. The representation is canonical, so equality
//! of reals is equality of term maps, and the sign of a nonzero value is
//! found by refining rational enclosures of each square root.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Fractional bits of the first enclosure round.
pub const INITIAL_BITS: u32 = 64;
/// Default number of refinement rounds (precision doubles each round).
pub const DEFAULT_ROUNDS: u32 = 16;

static ROUND_CAP: AtomicU32 = AtomicU32::new(DEFAULT_ROUNDS);

/// Sets the process-wide refinement round cap used by [`QuadExt::sign`].
pub fn set_precision_rounds(rounds: u32) {
    ROUND_CAP.store(rounds.max(1), AtomicOrdering::Relaxed);
}

pub fn precision_rounds() -> u32 {
    ROUND_CAP.load(AtomicOrdering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    fn of_rational(q: &BigRational) -> Sign {
        if q.is_zero() {
            Sign::Zero
        } else if q.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

pub fn is_squarefree(d: u64) -> bool {
    if d == 0 {
        return false;
    }
    let mut n = d;
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// An element of a multiquadratic real field.
///
/// Keys are squarefree radicands (`1` holds the rational part); no key maps
/// to zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct QuadExt {
    terms: BTreeMap<u64, BigRational>,
}

impl QuadExt {
    pub fn zero() -> Self {
        QuadExt::default()
    }

    pub fn one() -> Self {
        QuadExt::from_integer(1)
    }

    pub fn from_integer(n: i64) -> Self {
        QuadExt::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        QuadExt::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        QuadExt::term(q, 1).expect("1 is squarefree")
    }

    /// `q·√d`; `d` must be squarefree.
    pub fn term(q: BigRational, d: u64) -> Result<Self> {
        if !is_squarefree(d) {
            return Err(Error::MalformedGroup(format!("radicand {d} is not squarefree")));
        }
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(d, q);
        }
        Ok(QuadExt { terms })
    }

    pub fn sqrt(d: u64) -> Result<Self> {
        QuadExt::term(BigRational::one(), d)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates `(radicand, coefficient)` in increasing radicand order.
    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.terms.iter().map(|(d, q)| (*d, q))
    }

    pub fn coefficient(&self, d: u64) -> BigRational {
        self.terms.get(&d).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn radicands(&self) -> impl Iterator<Item = u64> + '_ {
        self.terms.keys().copied()
    }

    /// The rational value, if there are no irrational terms.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&1).cloned(),
            _ => None,
        }
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        if k.is_zero() {
            return QuadExt::zero();
        }
        QuadExt {
            terms: self.terms.iter().map(|(d, q)| (*d, q * k)).collect(),
        }
    }

    pub fn scale_int(&self, k: i64) -> Self {
        self.scale(&BigRational::from_integer(BigInt::from(k)))
    }

    fn add_term(terms: &mut BTreeMap<u64, BigRational>, d: u64, q: BigRational) {
        if q.is_zero() {
            return;
        }
        let slot = terms.entry(d).or_insert_with(BigRational::zero);
        *slot += q;
        if slot.is_zero() {
            terms.remove(&d);
        }
    }

    fn add_ref(&self, other: &QuadExt) -> QuadExt {
        let mut terms = self.terms.clone();
        for (d, q) in &other.terms {
            QuadExt::add_term(&mut terms, *d, q.clone());
        }
        QuadExt { terms }
    }

    fn mul_ref(&self, other: &QuadExt) -> QuadExt {
        let mut terms = BTreeMap::new();
        for (d1, q1) in &self.terms {
            for (d2, q2) in &other.terms {
                // √a·√b = g·√((a/g)(b/g)) with g = gcd(a, b); the cofactors are
                // coprime and squarefree, so the new radicand is squarefree.
                let g = d1.gcd(d2);
                let radicand = (d1 / g) * (d2 / g);
                let coeff = q1 * q2 * BigRational::from_integer(BigInt::from(g));
                QuadExt::add_term(&mut terms, radicand, coeff);
            }
        }
        QuadExt { terms }
    }

    /// Sign using the process-wide round cap.
    pub fn sign(&self) -> Result<Sign> {
        self.sign_with(INITIAL_BITS, precision_rounds())
    }

    /// Sign by rational interval refinement: `initial_bits` fractional bits,
    /// doubled each round, at most `max_rounds` rounds.
    pub fn sign_with(&self, initial_bits: u32, max_rounds: u32) -> Result<Sign> {
        match self.terms.len() {
            0 => return Ok(Sign::Zero),
            1 => {
                let q = self.terms.values().next().unwrap();
                return Ok(Sign::of_rational(q));
            }
            _ => {}
        }
        let mut bits = initial_bits.max(1);
        for _ in 0..max_rounds {
            let (lo, hi) = self.enclose(bits);
            if lo.is_positive() {
                return Ok(Sign::Positive);
            }
            if hi.is_negative() {
                return Ok(Sign::Negative);
            }
            bits = bits.saturating_mul(2);
        }
        Err(Error::PrecisionExhausted { rounds: max_rounds })
    }

    /// A rational interval `[lo, hi]` containing the value.
    pub fn enclose(&self, bits: u32) -> (BigRational, BigRational) {
        let scale = BigInt::one() << bits as usize;
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (d, q) in &self.terms {
            if *d == 1 {
                lo += q;
                hi += q;
                continue;
            }
            let shifted = BigUint::from(*d) << (2 * bits as usize);
            let root = BigInt::from(shifted.sqrt());
            let r_lo = BigRational::new(root.clone(), scale.clone());
            let r_hi = BigRational::new(root + 1, scale.clone());
            if q.is_positive() {
                lo += q * r_lo;
                hi += q * r_hi;
            } else {
                lo += q * r_hi;
                hi += q * r_lo;
            }
        }
        (lo, hi)
    }

    pub fn cmp_exact(&self, other: &QuadExt) -> Result<std::cmp::Ordering> {
        Ok(match (self - other).sign()? {
            Sign::Negative => std::cmp::Ordering::Less,
            Sign::Zero => std::cmp::Ordering::Equal,
            Sign::Positive => std::cmp::Ordering::Greater,
        })
    }

    /// Rough floating-point value, for diagnostics only.
    pub fn approx_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(d, q)| q.to_f64().unwrap_or(f64::NAN) * (*d as f64).sqrt())
            .sum()
    }

    /// Parses the literal grammar, reporting a 1-based column on failure.
    pub fn parse_literal(text: &str) -> std::result::Result<QuadExt, (usize, String)> {
        LiteralParser::new(text).parse()
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<'a> $trait<&'a QuadExt> for &'a QuadExt {
            type Output = QuadExt;
            fn $method(self, rhs: &'a QuadExt) -> QuadExt {
                let f: fn(&QuadExt, &QuadExt) -> QuadExt = $body;
                f(self, rhs)
            }
        }
        impl $trait<QuadExt> for QuadExt {
            type Output = QuadExt;
            fn $method(self, rhs: QuadExt) -> QuadExt {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a QuadExt> for QuadExt {
            type Output = QuadExt;
            fn $method(self, rhs: &'a QuadExt) -> QuadExt {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.add_ref(b));
forward_binop!(Sub, sub, |a, b| a.add_ref(&-b));
forward_binop!(Mul, mul, |a, b| a.mul_ref(b));

impl Neg for &QuadExt {
    type Output = QuadExt;
    fn neg(self) -> QuadExt {
        QuadExt {
            terms: self.terms.iter().map(|(d, q)| (*d, -q)).collect(),
        }
    }
}

impl Neg for QuadExt {
    type Output = QuadExt;
    fn neg(self) -> QuadExt {
        -&self
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for QuadExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (d, q)) in self.terms.iter().enumerate() {
            let magnitude = q.abs();
            if i == 0 {
                if q.is_negative() {
                    f.write_str("-")?;
                }
            } else if q.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if *d == 1 {
                f.write_str(&fmt_rational(&magnitude))?;
            } else if magnitude.is_one() {
                write!(f, "sqrt({d})")?;
            } else {
                write!(f, "{}*sqrt({d})", fmt_rational(&magnitude))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for QuadExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QuadExt({self})")
    }
}

impl FromStr for QuadExt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuadExt::parse_literal(s).map_err(|(col, msg)| Error::parse(1, col, msg))
    }
}

struct LiteralParser<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> LiteralParser<'a> {
    fn new(src: &'a str) -> Self {
        LiteralParser {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> std::result::Result<T, (usize, String)> {
        Err((self.pos + 1, msg.into()))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> std::result::Result<BigInt, (usize, String)> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        Ok(digits.parse::<BigInt>().expect("digits"))
    }

    fn sqrt_call(&mut self) -> std::result::Result<u64, (usize, String)> {
        for expected in "sqrt".chars() {
            if !self.eat(expected) {
                return self.err("expected sqrt(");
            }
        }
        self.skip_ws();
        if !self.eat('(') {
            return self.err("expected '('");
        }
        self.skip_ws();
        let at = self.pos;
        let n = self.integer()?;
        self.skip_ws();
        if !self.eat(')') {
            return self.err("expected ')'");
        }
        let d = match n.to_u64() {
            Some(d) if d >= 1 => d,
            _ => return Err((at + 1, format!("radicand {n} out of range"))),
        };
        if !is_squarefree(d) {
            return Err((at + 1, format!("radicand {d} is not squarefree")));
        }
        Ok(d)
    }

    fn term(&mut self) -> std::result::Result<(BigRational, u64), (usize, String)> {
        if self.peek() == Some('s') {
            return Ok((BigRational::one(), self.sqrt_call()?));
        }
        let num = self.integer()?;
        let mut q = BigRational::from_integer(num);
        let save = self.pos;
        self.skip_ws();
        if self.eat('/') {
            self.skip_ws();
            let den = self.integer()?;
            if den.is_zero() {
                return self.err("zero denominator");
            }
            q /= BigRational::from_integer(den);
        } else {
            self.pos = save;
        }
        let save = self.pos;
        self.skip_ws();
        if self.eat('*') {
            self.skip_ws();
            let d = self.sqrt_call()?;
            return Ok((q, d));
        }
        self.pos = save;
        Ok((q, 1))
    }

    fn parse(mut self) -> std::result::Result<QuadExt, (usize, String)> {
        let mut acc = BTreeMap::new();
        self.skip_ws();
        let mut negative = false;
        if self.eat('-') {
            negative = true;
        } else {
            self.eat('+');
        }
        loop {
            self.skip_ws();
            let (q, d) = self.term()?;
            QuadExt::add_term(&mut acc, d, if negative { -q } else { q });
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('+') => negative = false,
                Some('-') => negative = true,
                Some(c) => return self.err(format!("unexpected '{c}'")),
            }
            self.pos += 1;
        }
        Ok(QuadExt { terms: acc })
    }
}
