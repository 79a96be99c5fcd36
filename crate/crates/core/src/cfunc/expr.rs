//! Expression language for noise spectra.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := number | "f" | "pi" | func "(" expr ")" | "(" expr ")" | "-" factor
//! func   := "sin" | "cos" | "exp" | "sqrt" | "ln"
//! number := decimal | integer "/" integer
//! ```
//!
//! A number followed by `/` and an integer literal is read as one rational
//! constant, so `3/2*f` is `(3/2)*f`. Rational subtrees are folded.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::dyadic::Dyadic;
use crate::elementary;
use crate::error::{Error, Result};
use crate::rational::parse_rational;

use super::interval::{Interval, Jet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Const(BigRational),
    Pi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => f.write_str("f"),
            Expr::Const(q) => write!(f, "{q}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            out.push((start, Tok::Num(src[start..i].to_string())));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse { offset: i, message: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.src.len(), |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.offset(), message: message.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.peek().cloned() {
            None => self.err("unexpected end of expression"),
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected '{c}'")),
            Some(Tok::Num(s)) => {
                self.pos += 1;
                let mut text = s.clone();
                // p/q literal
                if let (Some(Tok::Op('/')), Some(Tok::Num(q))) =
                    (self.toks.get(self.pos).map(|t| &t.1), self.toks.get(self.pos + 1).map(|t| &t.1))
                {
                    if !s.contains('.') && !q.contains('.') {
                        text = format!("{s}/{q}");
                        self.pos += 2;
                    }
                }
                parse_rational(&text)
                    .map(Expr::Const)
                    .map_err(|e| Error::Parse { offset, message: e.to_string() })
            }
            Some(Tok::Ident(id)) => {
                self.pos += 1;
                let func = match id.as_str() {
                    "f" => return Ok(Expr::Var),
                    "pi" => return Ok(Expr::Pi),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    "ln" => Func::Ln,
                    _ => return Err(Error::Parse { offset, message: format!("unknown identifier {id:?}") }),
                };
                if !self.eat('(') {
                    return self.err(format!("expected '(' after {id}"));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
        }
    }
}

/// Parse and constant-fold an expression.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, src };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    fold(e)
}

fn fold(e: Expr) -> Result<Expr> {
    use Expr::*;
    Ok(match e {
        Neg(a) => match fold(*a)? {
            Const(q) => Const(-q),
            a => Neg(Box::new(a)),
        },
        Add(a, b) => match (fold(*a)?, fold(*b)?) {
            (Const(x), Const(y)) => Const(x + y),
            (a, b) => Add(Box::new(a), Box::new(b)),
        },
        Sub(a, b) => match (fold(*a)?, fold(*b)?) {
            (Const(x), Const(y)) => Const(x - y),
            (a, b) => Sub(Box::new(a), Box::new(b)),
        },
        Mul(a, b) => match (fold(*a)?, fold(*b)?) {
            (Const(x), Const(y)) => Const(x * y),
            (a, b) => Mul(Box::new(a), Box::new(b)),
        },
        Div(a, b) => match (fold(*a)?, fold(*b)?) {
            (_, Const(y)) if y.is_zero() => return Err(Error::ZeroDenominator),
            (Const(x), Const(y)) => Const(x / y),
            (a, b) => Div(Box::new(a), Box::new(b)),
        },
        Call(func, a) => Call(func, Box::new(fold(*a)?)),
        other => other,
    })
}

impl Expr {
    pub fn as_constant(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(q) => Some(q),
            _ => None,
        }
    }

    /// Value and derivative enclosures over `[lo, hi]`.
    pub fn jet(&self, lo: &BigRational, hi: &BigRational) -> Result<Jet> {
        Ok(match self {
            Expr::Var => Jet::var(lo, hi),
            Expr::Const(q) => Jet::constant(Interval::point(q.clone())),
            Expr::Pi => {
                let p = elementary::pi(80).to_rational();
                let e = crate::rational::pow2(-80);
                Jet::constant(Interval::new(&p - &e, &p + &e))
            }
            Expr::Neg(a) => a.jet(lo, hi)?.neg(),
            Expr::Add(a, b) => a.jet(lo, hi)?.add(&b.jet(lo, hi)?),
            Expr::Sub(a, b) => a.jet(lo, hi)?.sub(&b.jet(lo, hi)?),
            Expr::Mul(a, b) => a.jet(lo, hi)?.mul(&b.jet(lo, hi)?),
            Expr::Div(a, b) => a.jet(lo, hi)?.mul(&b.jet(lo, hi)?.recip()?),
            Expr::Call(func, a) => {
                let j = a.jet(lo, hi)?;
                match func {
                    Func::Sin => j.sin()?,
                    Func::Cos => j.cos()?,
                    Func::Exp => j.exp()?,
                    Func::Sqrt => j.sqrt()?,
                    Func::Ln => j.ln()?,
                }
            }
        })
    }

    fn depth(&self) -> u32 {
        match self {
            Expr::Var | Expr::Const(_) | Expr::Pi => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Value at `x` within `2^-n`, by ball evaluation at rising working precision.
    pub fn eval(&self, x: &Dyadic, n: u32) -> Result<Dyadic> {
        if let Expr::Const(q) = self {
            return Ok(Dyadic::from_big_rational(q, n as i64));
        }
        let target = Dyadic::pow2(-(n as i64) - 1);
        let mut w = n + 8 + 2 * self.depth();
        for _ in 0..12 {
            match self.ball(x, w) {
                Ok(b) if b.rad <= target => return Ok(b.mid.round(n + 1)),
                Ok(b) => {
                    let excess = b.rad.log2_ceil().unwrap_or(0) + n as i64 + 1;
                    w += excess.clamp(4, 4096) as u32;
                }
                Err(BallErr::Precision) => w += 16 + w / 2,
                Err(BallErr::Hard(e)) => return Err(e),
            }
        }
        Err(Error::PrecisionExhausted(format!("could not evaluate {self} at {x} to 2^-{n}")))
    }

    fn ball(&self, x: &Dyadic, w: u32) -> std::result::Result<Ball, BallErr> {
        let half_ulp = || Dyadic::pow2(-(w as i64) - 1);
        Ok(match self {
            Expr::Var => Ball::exact(x.clone()),
            Expr::Const(q) => match Dyadic::try_from_rational(q) {
                Some(d) => Ball::exact(d),
                None => Ball { mid: Dyadic::from_big_rational(q, w as i64), rad: half_ulp() },
            },
            Expr::Pi => Ball { mid: elementary::pi(w + 1), rad: half_ulp() },
            Expr::Neg(a) => {
                let b = a.ball(x, w)?;
                Ball { mid: -b.mid, rad: b.rad }
            }
            Expr::Add(a, b) => {
                let (a, b) = (a.ball(x, w)?, b.ball(x, w)?);
                Ball::settle(&a.mid + &b.mid, &a.rad + &b.rad, w)
            }
            Expr::Sub(a, b) => {
                let (a, b) = (a.ball(x, w)?, b.ball(x, w)?);
                Ball::settle(&a.mid - &b.mid, &a.rad + &b.rad, w)
            }
            Expr::Mul(a, b) => {
                let (a, b) = (a.ball(x, w)?, b.ball(x, w)?);
                let rad = &(&(&a.mid.abs() * &b.rad) + &(&b.mid.abs() * &a.rad)) + &(&a.rad * &b.rad);
                Ball::settle(&a.mid * &b.mid, rad, w)
            }
            Expr::Div(a, b) => {
                let (a, b) = (a.ball(x, w)?, b.ball(x, w)?);
                let den_lo = &b.mid.abs() - &b.rad;
                if !den_lo.is_positive() {
                    return Err(BallErr::Precision);
                }
                let (am, bm) = (a.mid.to_rational(), b.mid.to_rational());
                let q = &am / &bm;
                let mid = Dyadic::from_big_rational(&q, w as i64);
                // |a/b - am/bm| <= (ra + |am/bm| rb) / (|bm| - rb)
                let num = a.rad.to_rational() + q.abs() * b.rad.to_rational();
                let rad = up(&(num / den_lo.to_rational())) + half_ulp();
                Ball::settle(mid, rad, w)
            }
            Expr::Call(func, a) => {
                let a = a.ball(x, w)?;
                func_ball(*func, &a, w)?
            }
        })
    }
}

#[derive(Debug, Clone)]
struct Ball {
    mid: Dyadic,
    rad: Dyadic,
}

enum BallErr {
    Precision,
    Hard(Error),
}

impl From<Error> for BallErr {
    fn from(e: Error) -> Self {
        BallErr::Hard(e)
    }
}

impl Ball {
    fn exact(mid: Dyadic) -> Ball {
        Ball { mid, rad: Dyadic::zero() }
    }

    fn settle(mid: Dyadic, rad: Dyadic, w: u32) -> Ball {
        if mid.prec() > w as u64 {
            Ball { mid: mid.round(w), rad: (&rad + &Dyadic::pow2(-(w as i64) - 1)).mag_upper(32) }
        } else {
            Ball { mid, rad: rad.mag_upper(32) }
        }
    }
}

fn up(q: &BigRational) -> Dyadic {
    let c = crate::rational::ceil_sig(q, 32);
    Dyadic::try_from_rational(&c).expect("dyadic by construction")
}

fn func_ball(func: Func, a: &Ball, w: u32) -> std::result::Result<Ball, BallErr> {
    let half_ulp = Dyadic::pow2(-(w as i64) - 1);
    match func {
        Func::Sin | Func::Cos => {
            let mid = if func == Func::Sin { elementary::sin(&a.mid, w + 1)? } else { elementary::cos(&a.mid, w + 1)? };
            Ok(Ball::settle(mid, &a.rad + &half_ulp, w))
        }
        Func::Exp => {
            let mid = elementary::exp(&a.mid, w + 1)?;
            let rad = if a.rad.is_zero() {
                half_ulp
            } else {
                let bound = &elementary::exp(&(&a.mid + &a.rad), 4)? + &Dyadic::pow2(-4);
                &(&bound * &a.rad) + &half_ulp
            };
            Ok(Ball::settle(mid, rad, w))
        }
        Func::Sqrt | Func::Ln => {
            let lo = &a.mid - &a.rad;
            if !lo.is_positive() {
                return Err(BallErr::Precision);
            }
            let mid = if func == Func::Sqrt { elementary::sqrt(&a.mid, w + 1)? } else { elementary::ln(&a.mid, w + 1)? };
            let rad = if a.rad.is_zero() {
                half_ulp
            } else {
                // Lipschitz bound on [lo, ...]: 1/sqrt(lo) for sqrt, 1/lo for ln
                let lo_q = lo.mag_lower(32).to_rational();
                let slope = if func == Func::Sqrt {
                    let extra = (-lo.log2_floor().unwrap_or(0)).max(0) as u32;
                    let s = elementary::sqrt_floor(&lo.mag_lower(32), 8 + extra)?;
                    if !s.is_positive() {
                        return Err(BallErr::Precision);
                    }
                    s.to_rational().recip()
                } else {
                    lo_q.recip()
                };
                &up(&(slope * a.rad.to_rational())) + &half_ulp
            };
            Ok(Ball::settle(mid, rad, w))
        }
    }
}
