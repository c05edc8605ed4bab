//! Exact bivariate Laurent polynomials over the rationals.
//!
//! These are the scalars of every symbolic matrix in this crate. The two
//! indeterminates are written `zm` (horizontal) and `zn` (vertical); a
//! monomial `zm^a * zn^b` means "value read `a` columns right and `b` rows
//! down" when a polynomial is later compiled into a numeric stencil.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type Rational = BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    assert!(d != 0, "rational with zero denominator");
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as an exact rational.
pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Lossy conversion for kernel compilation. Our coefficients are tiny
/// (filter taps, products of a few taps), so this never loses range.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Parse failure with the byte offset of the offending character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn perr(pos: usize, msg: impl Into<String>) -> ParseError {
    ParseError { pos, msg: msg.into() }
}

/// Parse a rational from `n`, `n/d`, or an exact decimal like `-0.25`.
pub fn parse_rational(s: &str) -> Result<Rational, ParseError> {
    let mut lex = Lexer::new(s);
    lex.skip_ws();
    let r = lex.rational(true)?;
    lex.skip_ws();
    if let Some((pos, c)) = lex.peek() {
        return Err(perr(pos, format!("trailing input '{c}'")));
    }
    Ok(r)
}

/// Bivariate Laurent polynomial. Zero coefficients are never stored, so
/// structural equality is mathematical equality.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct LaurentPoly2 {
    terms: BTreeMap<(i32, i32), Rational>,
}

impl LaurentPoly2 {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, 0, 0)
    }

    /// `c * zm^a * zn^b`
    pub fn monomial(c: Rational, a: i32, b: i32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((a, b), c);
        }
        Self { terms }
    }

    /// Sum of `(exponents, coefficient)` pairs; duplicate keys accumulate.
    pub fn from_terms<I>(iter: I) -> Self
    where
        I: IntoIterator<Item = ((i32, i32), Rational)>,
    {
        let mut terms: BTreeMap<(i32, i32), Rational> = BTreeMap::new();
        for ((a, b), c) in iter {
            if c.is_zero() {
                continue;
            }
            let slot = terms.entry((a, b)).or_insert_with(Rational::zero);
            *slot += c;
            if slot.is_zero() {
                terms.remove(&(a, b));
            }
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.term_count() == 1 && self.coeff(0, 0).is_one()
    }

    /// True for zero and for a single `zm^0 zn^0` term.
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|&(a, b)| a == 0 && b == 0)
    }

    /// All exponents of `zn` are zero (depends on the horizontal axis only).
    pub fn is_horizontal(&self) -> bool {
        self.terms.keys().all(|&(_, b)| b == 0)
    }

    /// All exponents of `zm` are zero.
    pub fn is_vertical(&self) -> bool {
        self.terms.keys().all(|&(a, _)| a == 0)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of `zm^a zn^b` (zero if absent).
    pub fn coeff(&self, a: i32, b: i32) -> Rational {
        self.terms.get(&(a, b)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i32, i32), &Rational)> {
        self.terms.iter()
    }

    /// `((a_min, a_max), (b_min, b_max))` over stored terms; all zero for the zero polynomial.
    pub fn exponent_range(&self) -> ((i32, i32), (i32, i32)) {
        let mut r = ((0, 0), (0, 0));
        for (i, &(a, b)) in self.terms.keys().enumerate() {
            if i == 0 {
                r = ((a, a), (b, b));
            } else {
                r.0 .0 = r.0 .0.min(a);
                r.0 .1 = r.0 .1.max(a);
                r.1 .0 = r.1 .0.min(b);
                r.1 .1 = r.1 .1.max(b);
            }
        }
        r
    }

    /// Swap the two axes: `zm^a zn^b -> zm^b zn^a`. Written `p*` in comments.
    pub fn transpose(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(a, b), c)| ((b, a), c.clone())))
    }

    pub fn scaled(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self::from_terms(self.terms.iter().map(|(&e, c)| (e, c * k)))
    }

    /// Split into `(constant term, remainder)`; the two parts sum back to `self`.
    pub fn split_constant(&self) -> (Self, Self) {
        let c = self.coeff(0, 0);
        let rest = Self::from_terms(
            self.terms
                .iter()
                .filter(|(&(a, b), _)| !(a == 0 && b == 0))
                .map(|(&e, c)| (e, c.clone())),
        );
        (Self::constant(c), rest)
    }

    /// Polyphase split of a horizontal univariate polynomial:
    /// `p(zm) = even(zm^2) + zm * odd(zm^2)`.
    ///
    /// Panics if `self` depends on `zn`; callers split 1-D filters only.
    pub fn even_odd_split(&self) -> (Self, Self) {
        assert!(self.is_horizontal(), "even/odd split of a non-univariate polynomial");
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (&(a, _), c) in &self.terms {
            let parity = a.rem_euclid(2);
            let k = (a - parity).div_euclid(2);
            if parity == 0 {
                even.push(((k, 0), c.clone()));
            } else {
                odd.push(((k, 0), c.clone()));
            }
        }
        (Self::from_terms(even), Self::from_terms(odd))
    }

    /// Substitute `zm -> zm^2` (inverse of the even/odd split, together with
    /// a one-sample shift for the odd phase).
    pub fn dilate_horizontal(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(a, b), c)| ((2 * a, b), c.clone())))
    }

    /// Multiply by `zm^a zn^b`.
    pub fn shifted(&self, a: i32, b: i32) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(x, y), c)| ((x + a, y + b), c.clone())))
    }

    pub fn parse(s: &str) -> Result<Self, ParseError> {
        s.parse()
    }
}

impl Add for &LaurentPoly2 {
    type Output = LaurentPoly2;
    fn add(self, rhs: &LaurentPoly2) -> LaurentPoly2 {
        LaurentPoly2::from_terms(
            self.terms
                .iter()
                .chain(rhs.terms.iter())
                .map(|(&e, c)| (e, c.clone())),
        )
    }
}

impl Sub for &LaurentPoly2 {
    type Output = LaurentPoly2;
    fn sub(self, rhs: &LaurentPoly2) -> LaurentPoly2 {
        self + &(-rhs)
    }
}

impl Neg for &LaurentPoly2 {
    type Output = LaurentPoly2;
    fn neg(self) -> LaurentPoly2 {
        LaurentPoly2::from_terms(self.terms.iter().map(|(&e, c)| (e, -c.clone())))
    }
}

impl Mul for &LaurentPoly2 {
    type Output = LaurentPoly2;
    fn mul(self, rhs: &LaurentPoly2) -> LaurentPoly2 {
        let mut acc = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (&(a1, b1), c1) in &self.terms {
            for (&(a2, b2), c2) in &rhs.terms {
                acc.push(((a1 + a2, b1 + b2), c1 * c2));
            }
        }
        LaurentPoly2::from_terms(acc)
    }
}

impl fmt::Display for LaurentPoly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), c) in &self.terms {
            let mut mono = String::new();
            if a != 0 {
                mono.push_str("zm");
                if a != 1 {
                    mono.push_str(&format!("^{a}"));
                }
            }
            if b != 0 {
                if !mono.is_empty() {
                    mono.push('*');
                }
                mono.push_str("zn");
                if b != 1 {
                    mono.push_str(&format!("^{b}"));
                }
            }
            let term = if mono.is_empty() {
                c.to_string()
            } else if c.is_one() {
                mono
            } else if (-c).is_one() {
                format!("-{mono}")
            } else {
                format!("{c}*{mono}")
            };
            if first {
                write!(f, "{term}")?;
                first = false;
            } else if let Some(body) = term.strip_prefix('-') {
                write!(f, " -{body}")?;
            } else {
                write!(f, " +{term}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for LaurentPoly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentPoly2({self})")
    }
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(s: &'a str) -> Self {
        Self { bytes: s.as_bytes(), pos: 0 }
    }

    fn peek(&self) -> Option<(usize, char)> {
        self.bytes.get(self.pos).map(|&b| (self.pos, b as char))
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.bytes.get(self.pos).map(|&b| b as char);
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some((_, c)) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some((_, p)) if p == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Result<&'a str, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some((_, c)) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(perr(start, "expected digits"));
        }
        Ok(std::str::from_utf8(&self.bytes[start..self.pos]).unwrap())
    }

    /// `[sign] digits [ '/' digits | '.' digits ]`; the sign is only consumed
    /// when `allow_sign` (term-level signs are handled by the caller).
    fn rational(&mut self, allow_sign: bool) -> Result<Rational, ParseError> {
        let mut neg = false;
        if allow_sign {
            if self.eat('-') {
                neg = true;
            } else {
                let _ = self.eat('+');
            }
            self.skip_ws();
        }
        let int_part = self.digits()?;
        self.skip_ws();
        let mut r = if self.eat('/') {
            self.skip_ws();
            let dpos = self.pos;
            let den = self.digits()?;
            let den: BigInt = den.parse().unwrap();
            if den.is_zero() {
                return Err(perr(dpos, "zero denominator"));
            }
            Rational::new(int_part.parse().unwrap(), den)
        } else if self.eat('.') {
            self.skip_ws();
            let frac = self.digits()?;
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            let whole: BigInt = int_part.parse().unwrap();
            let fpart: BigInt = frac.parse().unwrap();
            Rational::new(whole * &scale + fpart, scale)
        } else {
            Rational::from_integer(int_part.parse().unwrap())
        };
        if neg {
            r = -r;
        }
        Ok(r)
    }

    /// `zm` or `zn`, optionally followed by `^` and a signed integer exponent.
    fn var_power(&mut self) -> Result<(char, i32), ParseError> {
        let vpos = self.pos;
        if !self.eat('z') {
            return Err(perr(vpos, "expected variable 'zm' or 'zn'"));
        }
        let axis = match self.bump() {
            Some('m') => 'm',
            Some('n') => 'n',
            _ => return Err(perr(vpos, "expected variable 'zm' or 'zn'")),
        };
        self.skip_ws();
        let mut exp = 1i32;
        if self.eat('^') {
            self.skip_ws();
            let neg = if self.eat('-') {
                true
            } else {
                let _ = self.eat('+');
                false
            };
            self.skip_ws();
            let dpos = self.pos;
            let digits = self.digits()?;
            let v: i64 = digits.parse().map_err(|_| perr(dpos, "exponent out of range"))?;
            if v > i32::MAX as i64 {
                return Err(perr(dpos, "exponent out of range"));
            }
            exp = if neg { -(v as i32) } else { v as i32 };
        }
        Ok((axis, exp))
    }
}

impl FromStr for LaurentPoly2 {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let mut lex = Lexer::new(s);
        let mut terms: Vec<((i32, i32), Rational)> = Vec::new();
        lex.skip_ws();
        if lex.peek().is_none() {
            return Err(perr(0, "empty polynomial"));
        }
        let mut first = true;
        loop {
            lex.skip_ws();
            if lex.peek().is_none() {
                if first {
                    return Err(perr(lex.pos, "expected a term"));
                }
                break;
            }
            // Term sign.
            let mut neg = false;
            if lex.eat('-') {
                neg = true;
            } else if !lex.eat('+') && !first {
                let (pos, c) = lex.peek().unwrap();
                return Err(perr(pos, format!("expected '+' or '-' between terms, found '{c}'")));
            }
            lex.skip_ws();
            // Coefficient and/or variables.
            let mut coef = Rational::one();
            let mut a = 0i32;
            let mut b = 0i32;
            match lex.peek() {
                Some((_, c)) if c.is_ascii_digit() => {
                    coef = lex.rational(false)?;
                    lex.skip_ws();
                    if lex.eat('*') {
                        lex.skip_ws();
                        loop {
                            let (axis, e) = lex.var_power()?;
                            if axis == 'm' {
                                a += e;
                            } else {
                                b += e;
                            }
                            lex.skip_ws();
                            if !lex.eat('*') {
                                break;
                            }
                            lex.skip_ws();
                        }
                    }
                }
                Some((_, 'z')) => loop {
                    let (axis, e) = lex.var_power()?;
                    if axis == 'm' {
                        a += e;
                    } else {
                        b += e;
                    }
                    lex.skip_ws();
                    if !lex.eat('*') {
                        break;
                    }
                    lex.skip_ws();
                },
                Some((pos, c)) => return Err(perr(pos, format!("unexpected '{c}'"))),
                None => return Err(perr(lex.pos, "dangling sign")),
            }
            if neg {
                coef = -coef;
            }
            terms.push(((a, b), coef));
            first = false;
        }
        Ok(LaurentPoly2::from_terms(terms))
    }
}
