//! Expression language for sequences, matrix entries, weights and index predicates.
//!
//! Grammar (see `docs/seqdsl.ebnf`):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | ident | ident "(" expr { "," expr } ")" | "(" expr ")" ;
//! ```
//!
//! Variables are `n` and `m`. Functions: `log` (alias `ln`), `exp`, `factorial`,
//! `lnfactorial`, `floor`, `max`, `min`, `mod`, `block`.

use crate::logmath::{log_add_exp, LogReal};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    N,
    M,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Log,
    Exp,
    Factorial,
    LnFactorial,
    Floor,
    Max,
    Min,
    Mod,
    Block,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "log" | "ln" => Func::Log,
            "exp" => Func::Exp,
            "factorial" => Func::Factorial,
            "lnfactorial" => Func::LnFactorial,
            "floor" => Func::Floor,
            "max" => Func::Max,
            "min" => Func::Min,
            "mod" => Func::Mod,
            "block" => Func::Block,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Factorial => "factorial",
            Func::LnFactorial => "lnfactorial",
            Func::Floor => "floor",
            Func::Max => "max",
            Func::Min => "min",
            Func::Mod => "mod",
            Func::Block => "block",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Max | Func::Min | Func::Mod | Func::Block => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    Unbound(&'static str),
    #[error("negative base with non-integer exponent")]
    NegativeBase,
    #[error("logarithm of a nonpositive value")]
    LogOfNonPositive,
    #[error("division by zero")]
    DivisionByZero,
    #[error("value out of range in {0}")]
    Overflow(&'static str),
    #[error("argument outside the domain of {0}")]
    Domain(&'static str),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    pub n: Option<f64>,
    pub m: Option<f64>,
}

impl Bindings {
    pub fn n(n: f64) -> Self {
        Bindings { n: Some(n), m: None }
    }

    pub fn nm(n: f64, m: f64) -> Self {
        Bindings { n: Some(n), m: Some(m) }
    }

    fn get(&self, v: Var) -> Result<f64, EvalError> {
        match v {
            Var::N => self.n.ok_or(EvalError::Unbound("n")),
            Var::M => self.m.ok_or(EvalError::Unbound("m")),
        }
    }
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                expected: vec!["number".into()],
                found: format!("`{lit}`"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                offset: i,
                expected: vec!["operator, number, identifier or parenthesis".into()],
                found: format!("`{ch}`"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

// --------------------------------------------------------------- parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.fail(&[&format!("`{c}`")])
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Sym('(') {
                    let func = Func::lookup(&name).ok_or(ParseError::UnknownIdentifier {
                        name: name.clone(),
                        offset,
                    })?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Sym(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            name,
                            offset,
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                match name.as_str() {
                    "n" => Ok(Expr::Var(Var::N)),
                    "m" => Ok(Expr::Var(Var::M)),
                    _ => Err(ParseError::UnknownIdentifier { name, offset }),
                }
            }
            _ => self.fail(&["number", "identifier", "`(`", "`-`"]),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

// -------------------------------------------------------------- printer

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(Var::N) => f.write_str("n"),
            Expr::Var(Var::M) => f.write_str("m"),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_child(f, inner, 3)
            }
            Expr::Bin(BinOp::Pow, a, b) => {
                write_child(f, a, 5)?;
                f.write_str("^")?;
                write_child(f, b, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => unreachable!(),
                };
                write_child(f, a, prec)?;
                write!(f, " {sym} ")?;
                write_child(f, b, prec + 1)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

// ------------------------------------------------------------ evaluation

/// `ln Γ(x)` for `x > 0`: exact table for small integers, Stirling series otherwise.
pub fn ln_gamma(x: f64) -> f64 {
    const TABLE_LEN: usize = 32;
    thread_local! {
        static TABLE: [f64; TABLE_LEN] = {
            let mut t = [0.0; TABLE_LEN];
            for k in 2..TABLE_LEN {
                t[k] = t[k - 1] + ((k - 1) as f64).ln();
            }
            t
        };
    }
    if x <= 0.0 {
        return f64::NAN;
    }
    if x.fract() == 0.0 && (x as usize) < TABLE_LEN {
        return TABLE.with(|t| t[x as usize]);
    }
    let mut shift = 0.0;
    let mut z = x;
    while z < 16.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

/// `ln(x!)` for real `x ≥ 0`.
pub fn ln_factorial(x: f64) -> f64 {
    ln_gamma(x + 1.0)
}

fn block_index(x: f64, base: f64) -> Result<f64, EvalError> {
    if !(base > 1.0) {
        return Err(EvalError::Domain("block"));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let mut k = (x.ln() / base.ln()).ceil().max(1.0);
    while base.powf(k - 1.0) >= x {
        k -= 1.0;
    }
    while base.powf(k) < x {
        k += 1.0;
    }
    Ok(k)
}

/// Signed magnitude in log form; zero has `ln = -inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Signed {
    neg: bool,
    ln: f64,
}

impl Signed {
    fn from_f64(x: f64) -> Signed {
        Signed {
            neg: x < 0.0,
            ln: x.abs().ln(),
        }
    }

    fn to_f64(self) -> f64 {
        let v = self.ln.exp();
        if self.neg {
            -v
        } else {
            v
        }
    }

    fn negate(self) -> Signed {
        if self.ln == f64::NEG_INFINITY {
            self
        } else {
            Signed {
                neg: !self.neg,
                ln: self.ln,
            }
        }
    }

    fn add(self, o: Signed) -> Signed {
        if self.ln == f64::NEG_INFINITY {
            return o;
        }
        if o.ln == f64::NEG_INFINITY {
            return self;
        }
        if self.neg == o.neg {
            return Signed {
                neg: self.neg,
                ln: log_add_exp(self.ln, o.ln),
            };
        }
        let (big, small) = if self.ln >= o.ln { (self, o) } else { (o, self) };
        let d = small.ln - big.ln;
        if d == 0.0 {
            return Signed {
                neg: false,
                ln: f64::NEG_INFINITY,
            };
        }
        Signed {
            neg: big.neg,
            ln: big.ln + (-d.exp()).ln_1p(),
        }
    }

    fn less_than(self, o: Signed) -> bool {
        match (self.neg, o.neg) {
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.ln < o.ln,
            (true, true) => self.ln > o.ln,
        }
    }
}

fn checked(ln: f64, what: &'static str) -> Result<f64, EvalError> {
    if ln.is_nan() || ln == f64::INFINITY {
        Err(EvalError::Overflow(what))
    } else {
        Ok(ln)
    }
}

fn eval_signed(e: &Expr, b: &Bindings) -> Result<Signed, EvalError> {
    Ok(match e {
        Expr::Num(x) => Signed::from_f64(*x),
        Expr::Var(v) => Signed::from_f64(b.get(*v)?),
        Expr::Neg(inner) => eval_signed(inner, b)?.negate(),
        Expr::Bin(op, l, r) => {
            let x = eval_signed(l, b)?;
            let y = eval_signed(r, b)?;
            match op {
                BinOp::Add => x.add(y),
                BinOp::Sub => x.add(y.negate()),
                BinOp::Mul => Signed {
                    neg: x.neg != y.neg,
                    ln: x.ln + y.ln,
                },
                BinOp::Div => {
                    if y.ln == f64::NEG_INFINITY {
                        return Err(EvalError::DivisionByZero);
                    }
                    Signed {
                        neg: x.neg != y.neg,
                        ln: x.ln - y.ln,
                    }
                }
                BinOp::Pow => {
                    let p = y.to_f64();
                    if !p.is_finite() {
                        return Err(EvalError::Overflow("exponent"));
                    }
                    if x.ln == f64::NEG_INFINITY {
                        return match p.partial_cmp(&0.0) {
                            Some(std::cmp::Ordering::Greater) => Ok(x),
                            Some(std::cmp::Ordering::Equal) => Ok(Signed::from_f64(1.0)),
                            _ => Err(EvalError::DivisionByZero),
                        };
                    }
                    let neg = if x.neg {
                        if p.fract() != 0.0 {
                            return Err(EvalError::NegativeBase);
                        }
                        p % 2.0 != 0.0
                    } else {
                        false
                    };
                    Signed {
                        neg,
                        ln: checked(p * x.ln, "power")?,
                    }
                }
            }
        }
        Expr::Call(func, args) => {
            let x = eval_signed(&args[0], b)?;
            match func {
                Func::Log => {
                    if x.neg || x.ln == f64::NEG_INFINITY {
                        return Err(EvalError::LogOfNonPositive);
                    }
                    Signed::from_f64(x.ln)
                }
                Func::Exp => Signed {
                    neg: false,
                    ln: checked(x.to_f64(), "exp")?,
                },
                Func::Factorial | Func::LnFactorial => {
                    let v = x.to_f64();
                    if x.neg || !v.is_finite() {
                        return Err(EvalError::Domain(func.name()));
                    }
                    let lf = ln_factorial(v);
                    if *func == Func::Factorial {
                        Signed { neg: false, ln: lf }
                    } else {
                        Signed::from_f64(lf)
                    }
                }
                Func::Floor => Signed::from_f64(x.to_f64().floor()),
                Func::Max | Func::Min => {
                    let y = eval_signed(&args[1], b)?;
                    let pick_y = x.less_than(y) == (*func == Func::Max);
                    if pick_y {
                        y
                    } else {
                        x
                    }
                }
                Func::Mod => {
                    let a = x.to_f64();
                    let m = eval_signed(&args[1], b)?.to_f64();
                    if m == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    Signed::from_f64(a - m * (a / m).floor())
                }
                Func::Block => {
                    let base = eval_signed(&args[1], b)?.to_f64();
                    Signed::from_f64(block_index(x.to_f64(), base)?)
                }
            }
        }
    })
}

/// Evaluates a nonnegative expression in the log domain.
pub fn eval_log(e: &Expr, b: &Bindings) -> Result<LogReal, EvalError> {
    let s = eval_signed(e, b)?;
    if s.neg {
        return Err(EvalError::Domain("eval_log (negative value)"));
    }
    LogReal::from_ln(s.ln).map_err(|_| EvalError::Overflow("result"))
}

/// Plain floating-point evaluation; may overflow to `inf`.
pub fn eval(e: &Expr, b: &Bindings) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Num(x) => *x,
        Expr::Var(v) => b.get(*v)?,
        Expr::Neg(inner) => -eval(inner, b)?,
        Expr::Bin(op, l, r) => {
            let x = eval(l, b)?;
            let y = eval(r, b)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    x / y
                }
                BinOp::Pow => {
                    if x < 0.0 && y.fract() != 0.0 {
                        return Err(EvalError::NegativeBase);
                    }
                    if x == 0.0 && y < 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    x.powf(y)
                }
            }
        }
        Expr::Call(func, args) => {
            let x = eval(&args[0], b)?;
            match func {
                Func::Log => {
                    if x <= 0.0 {
                        return Err(EvalError::LogOfNonPositive);
                    }
                    x.ln()
                }
                Func::Exp => x.exp(),
                Func::Factorial => {
                    if x < 0.0 {
                        return Err(EvalError::Domain("factorial"));
                    }
                    ln_factorial(x).exp()
                }
                Func::LnFactorial => {
                    if x < 0.0 {
                        return Err(EvalError::Domain("lnfactorial"));
                    }
                    ln_factorial(x)
                }
                Func::Floor => x.floor(),
                Func::Max => x.max(eval(&args[1], b)?),
                Func::Min => x.min(eval(&args[1], b)?),
                Func::Mod => {
                    let m = eval(&args[1], b)?;
                    if m == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    x - m * (x / m).floor()
                }
                Func::Block => block_index(x, eval(&args[1], b)?)?,
            }
        }
    })
}

impl Expr {
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v,
            Expr::Num(_) => false,
            Expr::Neg(e) => e.uses(v),
            Expr::Bin(_, a, b) => a.uses(v) || b.uses(v),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn parses_simple_sum() {
        assert_eq!(
            p("n + 1"),
            Expr::Bin(BinOp::Add, Box::new(Expr::Var(Var::N)), Box::new(Expr::Num(1.0)))
        );
    }

    #[test]
    fn power_binds_tighter_than_unary_minus_and_is_right_associative() {
        assert_eq!(eval(&p("-2^2"), &Bindings::default()).unwrap(), -4.0);
        assert_eq!(eval(&p("2^3^2"), &Bindings::default()).unwrap(), 512.0);
        assert_eq!(eval(&p("2^-1"), &Bindings::default()).unwrap(), 0.5);
        assert_eq!(eval(&p("2 ^ n"), &Bindings::n(10.0)).unwrap(), 1024.0);
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("n + * 2") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse("n + q") {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "q");
                assert_eq!(offset, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("foo(n)"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("max(n)"), Err(ParseError::Arity { .. })));
        assert!(matches!(parse("(n"), Err(ParseError::Syntax { .. })));
        assert_eq!(parse("  "), Err(ParseError::Empty));
    }

    #[test]
    fn huge_power_stays_in_log_domain() {
        let v = eval_log(&p("m ^ (2 ^ n)"), &Bindings::nm(20.0, 3.0)).unwrap();
        let want = 2f64.powi(20) * 3f64.ln();
        assert!((v.ln() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn small_values() {
        let v = eval_log(&p("n + 1"), &Bindings::n(5.0)).unwrap();
        assert!((v.ln() - 6f64.ln()).abs() < 1e-15);
        let v = eval_log(&p("factorial(block(n, 2))"), &Bindings::n(12.0)).unwrap();
        assert!((v.ln() - 24f64.ln()).abs() < 1e-12);
        let v = eval_log(&p("log(n + 2)"), &Bindings::n(0.0)).unwrap();
        assert!((v.value() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn block_boundaries() {
        let blk = |x: f64| block_index(x, 2.0).unwrap();
        assert_eq!(blk(0.0), 0.0);
        assert_eq!(blk(1.0), 0.0);
        assert_eq!(blk(2.0), 1.0);
        assert_eq!(blk(3.0), 2.0);
        assert_eq!(blk(4.0), 2.0);
        assert_eq!(blk(5.0), 3.0);
        assert_eq!(blk(1024.0), 10.0);
        assert_eq!(blk(1025.0), 11.0);
    }

    #[test]
    fn eval_errors_are_typed() {
        let b = Bindings::n(1.0);
        assert_eq!(eval_log(&p("(0 - 2)^0.5"), &b), Err(EvalError::NegativeBase));
        assert_eq!(eval_log(&p("log(n - 1)"), &b), Err(EvalError::LogOfNonPositive));
        assert_eq!(eval_log(&p("m"), &b), Err(EvalError::Unbound("m")));
    }

    #[test]
    fn ln_gamma_matches_exact_factorials() {
        let mut acc = 0.0f64;
        for k in 1..=170u32 {
            acc += (k as f64).ln();
            let got = ln_factorial(k as f64);
            assert!((got - acc).abs() <= 1e-12 * acc.max(1.0), "k={k}");
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    const CORPUS: [&str; 50] = [
        "n",
        "m",
        "1",
        "0.5",
        "n + 1",
        "n - 1",
        "2 * n",
        "n / 3",
        "2^n",
        "m^n",
        "m^(n + 1)",
        "m^(2^n)",
        "-n",
        "--n",
        "-(n + 1)",
        "(-2)^n",
        "2^-n",
        "2^3^n",
        "(2^3)^n",
        "n - (n - 1)",
        "n - n - 1",
        "n / (2 * m)",
        "n / 2 * m",
        "log(n + 2)",
        "ln(n + 2)",
        "exp(n)",
        "exp(-n)",
        "factorial(n)",
        "lnfactorial(n + 1)",
        "factorial(block(n, 2))",
        "floor(n / 2)",
        "max(n, m)",
        "min(1, n)",
        "mod(n, 3)",
        "block(n, 10)",
        "1 + 2 * 3",
        "(1 + 2) * 3",
        "1e3 * n",
        "2.5e-3 + n",
        "n * -m",
        "n^2 + m^2",
        "(n + 1)^(1 / m)",
        "(1 + 1 / m)^(-(n + 1))",
        "exp(log(n + 1) * 2)",
        "max(min(n, 3), 1)",
        "2^(n - block(n, 2))",
        "m^log(n + 2)",
        "-m^2",
        "(n + 1) / (n + 2) / (n + 3)",
        "factorial(n + 1)",
    ];

    #[test]
    fn corpus_round_trips() {
        for src in CORPUS {
            let e = p(src);
            let printed = e.to_string();
            let back = parse(&printed).unwrap_or_else(|err| panic!("{src} -> {printed}: {err}"));
            assert_eq!(back, e, "{src} printed as {printed}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..50).prop_map(|k| Expr::Num(k as f64 / 4.0)),
            Just(Expr::Var(Var::N)),
            Just(Expr::Var(Var::M)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    /// Expressions without subtraction, so log-domain evaluation has no cancellation.
    fn arb_positive_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (1u32..50).prop_map(|k| Expr::Num(k as f64 / 4.0)),
            Just(Expr::Var(Var::N)),
            Just(Expr::Var(Var::M)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (
                    prop_oneof![Just(BinOp::Add), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Min, vec![a, b])),
                inner.prop_map(|a| Expr::Call(Func::Factorial, vec![a])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(parse(&printed).unwrap(), e);
        }

        #[test]
        fn log_eval_agrees_with_plain_eval(e in arb_positive_expr(), n in 0u32..20, m in 1u32..6) {
            let b = Bindings::nm(n as f64, m as f64);
            if let (Ok(plain), Ok(lg)) = (eval(&e, &b), eval_log(&e, &b)) {
                if plain.is_finite() && plain > 1e-300 && plain < 1e300 {
                    let rel = (lg.value() - plain).abs() / plain;
                    prop_assert!(rel < 1e-10, "plain={} log={}", plain, lg.value());
                }
            }
        }
    }
}
