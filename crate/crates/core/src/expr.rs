//! Expression front end for metric components, potentials and scalar fields.
//!
//! Grammar (whitespace is ignored between tokens):
//!
//! ```text
//! expr     = term { ("+" | "-") term } ;
//! term     = unary { ("*" | "/") unary } ;
//! unary    = "-" unary | power ;
//! power    = primary [ "^" exponent ] ;
//! exponent = [ "-" ] number
//!          | "(" [ "-" ] number [ "/" number ] ")" ;
//! primary  = number | "x0" | "x1" | "x2" | "x3" | "pi"
//!          | func "(" expr ")" | "(" expr ")" ;
//! func     = "exp" | "log" | "sin" | "cos" | "sqrt" | "atan" ;
//! number   = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! Exponents are rational constants. Integer exponents accept any base;
//! non-integer exponents need a positive base at the evaluation point.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::jet::{self, Jet, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Atan,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            _ => return None,
        })
    }
}

/// Reduced rational exponent with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: i64,
    den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Rational> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let g = if g == 0 { 1 } else { g };
        let sign = if den < 0 { -1 } else { 1 };
        Some(Rational {
            num: sign * num / g,
            den: sign * den / g,
        })
    }

    pub fn integer(n: i64) -> Rational {
        Rational { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn as_integer(self) -> Option<i64> {
        (self.den == 1).then_some(self.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Abstract syntax tree. Literals are non-negative; negation is explicit.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Var(u8),
    Const(f64),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Rational),
    Call(Func, Box<Expression>),
}

impl Expression {
    /// A literal, wrapped in `Neg` when negative.
    pub fn constant(v: f64) -> Expression {
        if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
            Expression::Neg(Box::new(Expression::Const(-v)))
        } else {
            Expression::Const(v)
        }
    }

    pub fn var(i: u8) -> Expression {
        assert!(i < 4);
        Expression::Var(i)
    }

    /// Evaluates at a point in plain floating point.
    pub fn eval(&self, p: &[f64; 4]) -> Result<f64> {
        Ok(match self {
            Expression::Var(i) => p[*i as usize],
            Expression::Const(c) => *c,
            Expression::Neg(a) => -a.eval(p)?,
            Expression::Add(a, b) => a.eval(p)? + b.eval(p)?,
            Expression::Sub(a, b) => a.eval(p)? - b.eval(p)?,
            Expression::Mul(a, b) => a.eval(p)? * b.eval(p)?,
            Expression::Div(a, b) => {
                let d = b.eval(p)?;
                if d == 0.0 {
                    return Err(Error::Domain("division by zero".to_string()));
                }
                a.eval(p)? / d
            }
            Expression::Pow(a, r) => {
                let base = a.eval(p)?;
                match r.as_integer() {
                    Some(n) => {
                        if n < 0 && base == 0.0 {
                            return Err(Error::Domain("negative power of zero".to_string()));
                        }
                        base.powi(n as i32)
                    }
                    None => {
                        if base < 0.0 || (base == 0.0 && r.to_f64() < 0.0) {
                            return Err(Error::Domain(format!(
                                "non-integer power of non-positive value {base:e}"
                            )));
                        }
                        base.powf(r.to_f64())
                    }
                }
            }
            Expression::Call(f, a) => {
                let u = a.eval(p)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if !(u > 0.0) {
                            return Err(Error::Domain(format!("log of non-positive value {u:e}")));
                        }
                        u.ln()
                    }
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(Error::Domain(format!("sqrt of negative value {u:e}")));
                        }
                        u.sqrt()
                    }
                    Func::Atan => u.atan(),
                }
            }
        })
    }

    /// Exact truncated Taylor expansion at `p` to total order `k`.
    pub fn jet(&self, p: &[f64; 4], k: u8) -> Result<Jet> {
        if k > MAX_ORDER {
            return Err(Error::OrderOutOfRange {
                requested: k,
                max: MAX_ORDER,
            });
        }
        self.jet_unchecked(p, k)
    }

    fn jet_unchecked(&self, p: &[f64; 4], k: u8) -> Result<Jet> {
        Ok(match self {
            Expression::Var(i) => Jet::variable(*i as usize, p[*i as usize], k),
            Expression::Const(c) => Jet::constant(*c, k),
            Expression::Neg(a) => -a.jet_unchecked(p, k)?,
            Expression::Add(a, b) => a.jet_unchecked(p, k)? + b.jet_unchecked(p, k)?,
            Expression::Sub(a, b) => a.jet_unchecked(p, k)? - b.jet_unchecked(p, k)?,
            Expression::Mul(a, b) => {
                // Constant factors are common in metric components.
                if let Expression::Const(c) = **a {
                    return Ok(b.jet_unchecked(p, k)?.scale(c));
                }
                a.jet_unchecked(p, k)? * b.jet_unchecked(p, k)?
            }
            Expression::Div(a, b) => (&a.jet_unchecked(p, k)? / &b.jet_unchecked(p, k)?)?,
            Expression::Pow(a, r) => {
                let base = a.jet_unchecked(p, k)?;
                match r.as_integer() {
                    Some(n) => base.powi(n)?,
                    None => base.powf(r.to_f64())?,
                }
            }
            Expression::Call(f, a) => {
                let u = a.jet_unchecked(p, k)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => u.ln()?,
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Sqrt => {
                        if k == 0 && u.value() == 0.0 {
                            Jet::constant(0.0, 0)
                        } else {
                            u.sqrt()?
                        }
                    }
                    Func::Atan => u.atan(),
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Add(..) | Expression::Sub(..) => 1,
            Expression::Mul(..) | Expression::Div(..) => 2,
            Expression::Neg(_) => 3,
            Expression::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.write_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expression::Var(i) => write!(f, "x{i}"),
            Expression::Const(c) => write!(f, "{c:?}"),
            Expression::Neg(a) => {
                f.write_str("-")?;
                a.write_prec(f, 3)
            }
            Expression::Add(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" + ")?;
                b.write_prec(f, 2)
            }
            Expression::Sub(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" - ")?;
                b.write_prec(f, 2)
            }
            Expression::Mul(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("*")?;
                b.write_prec(f, 3)
            }
            Expression::Div(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str("/")?;
                b.write_prec(f, 3)
            }
            Expression::Pow(a, r) => {
                a.write_prec(f, 5)?;
                match (r.as_integer(), r.num < 0) {
                    (Some(n), false) => write!(f, "^{n}"),
                    (Some(n), true) => write!(f, "^({n})"),
                    (None, _) => write!(f, "^({}/{})", r.num, r.den),
                }
            }
            Expression::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl core::str::FromStr for Expression {
    type Err = ParseError;
    fn from_str(s: &str) -> core::result::Result<Self, ParseError> {
        parse_expression(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Unexpected token; lists what would have been accepted.
    Syntax {
        expected: Vec<&'static str>,
    },
    UnknownIdentifier(String),
    BadNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    /// Byte offset of the offending token.
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax { expected } => {
                write!(f, "syntax error at byte {}: expected ", self.offset)?;
                for (i, e) in expected.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(e)?;
                }
                Ok(())
            }
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(f, "unknown identifier `{name}` at byte {}", self.offset)
            }
            ParseErrorKind::BadNumber => write!(f, "malformed number at byte {}", self.offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Num(&'a str),
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> core::result::Result<(usize, Token<'a>), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((start, Token::End));
        }
        let c = bytes[start];
        let single = match c {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut i = start;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            self.pos = i;
            return Ok((start, Token::Num(&self.src[start..i])));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut i = start;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            self.pos = i;
            return Ok((start, Token::Ident(&self.src[start..i])));
        }
        Err(ParseError {
            offset: start,
            kind: ParseErrorKind::Syntax {
                expected: alloc::vec!["number", "identifier", "operator", "parenthesis"],
            },
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: (usize, Token<'a>),
}

const OPERAND: [&str; 4] = ["number", "variable", "function call", "("];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> core::result::Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let peeked = lexer.next()?;
        Ok(Parser { lexer, peeked })
    }

    fn bump(&mut self) -> core::result::Result<(usize, Token<'a>), ParseError> {
        let next = self.lexer.next()?;
        Ok(core::mem::replace(&mut self.peeked, next))
    }

    fn syntax(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.peeked.0,
            kind: ParseErrorKind::Syntax {
                expected: expected.to_vec(),
            },
        }
    }

    fn expect(
        &mut self,
        tok: Token<'static>,
        name: &'static str,
    ) -> core::result::Result<(), ParseError> {
        if self.peeked.1 == tok {
            self.bump()?;
            Ok(())
        } else {
            Err(self.syntax(&[name]))
        }
    }

    fn expr(&mut self) -> core::result::Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peeked.1 {
                Token::Plus => {
                    self.bump()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> core::result::Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peeked.1 {
                Token::Star => {
                    self.bump()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.bump()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> core::result::Result<Expression, ParseError> {
        if self.peeked.1 == Token::Minus {
            self.bump()?;
            return Ok(Expression::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> core::result::Result<Expression, ParseError> {
        let base = self.primary()?;
        if self.peeked.1 != Token::Caret {
            return Ok(base);
        }
        self.bump()?;
        let r = self.exponent()?;
        Ok(Expression::Pow(Box::new(base), r))
    }

    fn number_rational(&mut self) -> core::result::Result<Rational, ParseError> {
        match self.peeked.clone() {
            (offset, Token::Num(text)) => {
                self.bump()?;
                decimal_to_rational(text).ok_or(ParseError {
                    offset,
                    kind: ParseErrorKind::BadNumber,
                })
            }
            _ => Err(self.syntax(&["number"])),
        }
    }

    fn exponent(&mut self) -> core::result::Result<Rational, ParseError> {
        let parenthesized = self.peeked.1 == Token::LParen;
        if parenthesized {
            self.bump()?;
        }
        let negative = self.peeked.1 == Token::Minus;
        if negative {
            self.bump()?;
        }
        let mut r = self.number_rational()?;
        if parenthesized && self.peeked.1 == Token::Slash {
            self.bump()?;
            let offset = self.peeked.0;
            let d = self.number_rational()?;
            r = Rational::new(r.num * d.den, r.den * d.num).ok_or(ParseError {
                offset,
                kind: ParseErrorKind::BadNumber,
            })?;
        }
        if parenthesized {
            self.expect(Token::RParen, ")")?;
        }
        if negative {
            r.num = -r.num;
        }
        Ok(r)
    }

    fn primary(&mut self) -> core::result::Result<Expression, ParseError> {
        match self.peeked.clone() {
            (offset, Token::Num(text)) => {
                self.bump()?;
                let v: f64 = text.parse().map_err(|_| ParseError {
                    offset,
                    kind: ParseErrorKind::BadNumber,
                })?;
                Ok(Expression::Const(v))
            }
            (offset, Token::Ident(name)) => {
                self.bump()?;
                match name {
                    "x0" => Ok(Expression::Var(0)),
                    "x1" => Ok(Expression::Var(1)),
                    "x2" => Ok(Expression::Var(2)),
                    "x3" => Ok(Expression::Var(3)),
                    "pi" => Ok(Expression::Const(core::f64::consts::PI)),
                    _ => match Func::from_name(name) {
                        Some(func) => {
                            self.expect(Token::LParen, "(")?;
                            let arg = self.expr()?;
                            self.expect(Token::RParen, ")")?;
                            Ok(Expression::Call(func, Box::new(arg)))
                        }
                        None => Err(ParseError {
                            offset,
                            kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                        }),
                    },
                }
            }
            (_, Token::LParen) => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Token::RParen, ")")?;
                Ok(e)
            }
            _ => Err(self.syntax(&OPERAND)),
        }
    }
}

fn decimal_to_rational(text: &str) -> Option<Rational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int, frac) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    let digits: String = alloc::format!("{int}{frac}");
    if digits.is_empty() || digits.len() > 18 {
        return None;
    }
    let mut num: i64 = digits.parse().ok()?;
    let mut den: i64 = 1;
    let shift = exp - frac.len() as i32;
    if shift >= 0 {
        for _ in 0..shift {
            num = num.checked_mul(10)?;
        }
    } else {
        for _ in 0..(-shift) {
            den = den.checked_mul(10)?;
        }
    }
    Rational::new(num, den)
}

/// Parses source text in the documented grammar.
pub fn parse_expression(src: &str) -> core::result::Result<Expression, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if p.peeked.1 != Token::End {
        return Err(p.syntax(&["operator", "end of input"]));
    }
    Ok(e)
}

/// Truncated Taylor jet of `e` at `p`.
pub fn jet_eval(e: &Expression, p: &[f64; 4], k: u8) -> Result<Jet> {
    e.jet(p, k)
}

/// Central-difference estimate of the derivatives of `e` at `p` up to order
/// `k <= 2`, with one Richardson extrapolation step (`(4 D(h/2) − D(h)) / 3`),
/// so the truncation error of every entry is `O(h⁴)`.
pub fn fd_jet(e: &Expression, p: &[f64; 4], k: u8, h: f64) -> Result<Jet> {
    if k > 2 {
        return Err(Error::OrderOutOfRange {
            requested: k,
            max: 2,
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let at = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut q = *p;
        for &(v, d) in shift {
            q[v] += d;
        }
        e.eval(&q)
    };
    let richardson = |estimate: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let coarse = estimate(h)?;
        let fine = estimate(0.5 * h)?;
        Ok((4.0 * fine - coarse) / 3.0)
    };
    let idx = jet::multi_indices(k);
    let mut partials = Vec::with_capacity(idx.len());
    let f0 = e.eval(p)?;
    for m in idx {
        let vars: Vec<usize> = (0..4)
            .flat_map(|v| core::iter::repeat_n(v, m[v] as usize))
            .collect();
        let d = match vars.as_slice() {
            [] => f0,
            [a] => richardson(&|s| Ok((at(&[(*a, s)])? - at(&[(*a, -s)])?) / (2.0 * s)))?,
            [a, b] if a == b => {
                richardson(&|s| Ok((at(&[(*a, s)])? - 2.0 * f0 + at(&[(*a, -s)])?) / (s * s)))?
            }
            [a, b] => richardson(&|s| {
                Ok((at(&[(*a, s), (*b, s)])?
                    - at(&[(*a, s), (*b, -s)])?
                    - at(&[(*a, -s), (*b, s)])?
                    + at(&[(*a, -s), (*b, -s)])?)
                    / (4.0 * s * s))
            })?,
            _ => unreachable!(),
        };
        partials.push(d);
    }
    Ok(Jet::from_partials(k, &partials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::unit;
    use approx::assert_relative_eq;

    fn parse(s: &str) -> Expression {
        parse_expression(s).unwrap()
    }

    #[test]
    fn grammar_cases() {
        assert_eq!(
            parse("x0^2 + x1"),
            Expression::Add(
                Box::new(Expression::Pow(
                    Box::new(Expression::Var(0)),
                    Rational::integer(2)
                )),
                Box::new(Expression::Var(1))
            )
        );
        assert!(parse_expression("log(1 + x0^2 + x1^2 + x2^2 + x3^2)").is_ok());
        // power binds tighter than unary minus
        assert_eq!(parse("-x0^2").eval(&[3.0, 0.0, 0.0, 0.0]).unwrap(), -9.0);
        // left associativity
        assert_eq!(parse("8 - 4 - 2").eval(&[0.0; 4]).unwrap(), 2.0);
        assert_eq!(parse("8 / 4 / 2").eval(&[0.0; 4]).unwrap(), 1.0);
        assert_eq!(parse("x0^(1/3)").eval(&[8.0, 0.0, 0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(parse("x0^-1").eval(&[4.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert_eq!(parse("x0^0.5"), parse("x0^(1/2)"));
    }

    #[test]
    fn syntax_error_reports_offset() {
        let err = parse_expression("x0 + * x1").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(matches!(err.kind, ParseErrorKind::Syntax { .. }));
        let err = parse_expression("x0 + y").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert_eq!(err.offset, 5);
        assert!(parse_expression("(x0").is_err());
        assert!(parse_expression("x0 x1").is_err());
        assert!(parse_expression("x0 # 1").is_err());
    }

    #[test]
    fn polynomial_jet() {
        let j = jet_eval(&parse("x0^2"), &[3.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(j.value(), 9.0);
        assert_eq!(j.partial(&unit(0, 1)), 6.0);
        assert_eq!(j.partial(&unit(0, 2)), 2.0);
        for (r, m) in crate::jet::multi_indices(2).iter().enumerate() {
            if ![0, 1, 5].contains(&r) {
                assert_eq!(j.partial(m), 0.0, "{m:?}");
            }
        }
    }

    #[test]
    fn sine_maclaurin() {
        let j = jet_eval(&parse("sin(x0)"), &[0.0; 4], 3).unwrap();
        let got: Vec<f64> = (0..=3).map(|n| j.partial(&unit(0, n))).collect();
        assert_eq!(got, [0.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn domain_and_order_errors() {
        assert!(matches!(
            jet_eval(&parse("log(x0)"), &[-1.0, 0.0, 0.0, 0.0], 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            jet_eval(&parse("x0"), &[0.0; 4], MAX_ORDER + 1),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(jet_eval(&parse("1/x0"), &[0.0; 4], 1).is_err());
        assert!(jet_eval(&parse("x0^(1/2)"), &[-1.0, 0.0, 0.0, 0.0], 1).is_err());
        assert!(jet_eval(&parse("x0^3"), &[-2.0, 0.0, 0.0, 0.0], 2).is_ok());
    }

    #[test]
    fn fd_examples() {
        let j = fd_jet(&parse("x0^3"), &[1.0, 0.0, 0.0, 0.0], 1, 1e-3).unwrap();
        assert!((j.partial(&unit(0, 1)) - 3.0).abs() < 1e-9);
        let j = fd_jet(&parse("exp(x1)"), &[0.0; 4], 2, 1e-3).unwrap();
        assert!((j.partial(&unit(1, 2)) - 1.0).abs() < 1e-6);
        assert!(fd_jet(&parse("x0"), &[0.0; 4], 3, 1e-3).is_err());
        assert!(fd_jet(&parse("log(x0)"), &[0.0; 4], 1, 1e-3).is_err());
    }

    #[test]
    fn log_jet_matches_finite_differences() {
        let e = parse("log(1+x0^2+x1^2)");
        let p = [0.3, 0.4, 0.0, 0.0];
        let exact = jet_eval(&e, &p, 2).unwrap();
        let fd = fd_jet(&e, &p, 2, 1e-4).unwrap();
        for m in crate::jet::multi_indices(2) {
            let (a, b) = (exact.partial(m), fd.partial(m));
            assert!(
                (a - b).abs() <= 1e-6 * a.abs().max(1.0),
                "{m:?}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "x0^2 + x1",
            "-(x0 + x1)*x2",
            "4/(1 + x0^2 + x1^2 + x2^2 + x3^2)^2",
            "exp(-x0^2)*sin(x1)/sqrt(2 + cos(x3))",
            "x0^(-1/3) - -x1",
            "atan(x2) - (x0 - x1)",
            "2.5e-7*x3^(-2)",
        ] {
            let e = parse(src);
            assert_eq!(parse(&e.to_string()), e, "{src} printed as {e}");
        }
        assert_relative_eq!(
            parse("x0^(1/3)").eval(&[27.0, 0.0, 0.0, 0.0]).unwrap(),
            3.0,
            epsilon = 1e-14
        );
    }
}
