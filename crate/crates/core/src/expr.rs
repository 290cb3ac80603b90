//! Closed-form coefficient expressions in `x`, `t` (and `xi` for Fourier symbols).
//!
//! The grammar is deliberately small: numbers, the variables `x`, `t`, `xi`,
//! the constants `pi` and `i`, the binary operators `+ - * /`, integer powers
//! `^`, unary minus, and the functions `sin cos exp tanh sqrt`. Anything else
//! is rejected at parse time.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::PeriodicGrid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative real {0}")]
    NegativeSqrt(f64),
    #[error("non-finite result")]
    NonFinite,
    #[error("evaluation failed at node {index}: {source}")]
    AtNode {
        index: usize,
        #[source]
        source: Box<EvalError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    T,
    Xi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    ImagUnit,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Variable bindings for a single evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub t: f64,
    pub xi: f64,
}

impl Point {
    pub fn new(x: f64, t: f64) -> Self {
        Point { x, t, xi: 0.0 }
    }

    pub fn symbol(xi: f64) -> Self {
        Point { x: 0.0, t: 0.0, xi }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        parse_expr(src)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn eval(&self, at: Point) -> Result<Complex64, EvalError> {
        let v = match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::Pi => Complex64::new(std::f64::consts::PI, 0.0),
            Expr::ImagUnit => Complex64::i(),
            Expr::Var(Var::X) => Complex64::new(at.x, 0.0),
            Expr::Var(Var::T) => Complex64::new(at.t, 0.0),
            Expr::Var(Var::Xi) => Complex64::new(at.xi, 0.0),
            Expr::Neg(e) => -e.eval(at)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(at)?;
                let b = r.eval(at)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == Complex64::new(0.0, 0.0) {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(base, n) => {
                let b = base.eval(at)?;
                if *n < 0 && b == Complex64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero);
                }
                b.powi(*n)
            }
            Expr::Call(f, arg) => {
                let a = arg.eval(at)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Tanh => a.tanh(),
                    Func::Sqrt => {
                        if a.im == 0.0 && a.re < 0.0 {
                            return Err(EvalError::NegativeSqrt(a.re));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// True when the expression mentions `var`.
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::Pi | Expr::ImagUnit => false,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.depends_on(var),
            Expr::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    /// Value of a variable-free expression.
    pub fn constant_value(&self) -> Option<Complex64> {
        if self.depends_on(Var::X) || self.depends_on(Var::T) || self.depends_on(Var::Xi) {
            return None;
        }
        self.eval(Point::default()).ok()
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(Complex64::new(0.0, 0.0))
    }
}

impl Expr {
    /// Exact derivative with respect to `var`, lightly simplified.
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Pi | ImagUnit => Num(0.0),
            Expr::Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
            Neg(e) => neg(e.derivative(var)),
            Binary(op, l, r) => {
                let (dl, dr) = (l.derivative(var), r.derivative(var));
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                    BinOp::Div => div(
                        sub(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                        Pow(r.clone(), 2),
                    ),
                }
            }
            Pow(e, n) => {
                let inner = match n - 1 {
                    0 => Num(1.0),
                    1 => (**e).clone(),
                    m => Pow(e.clone(), m),
                };
                mul(mul(Num(*n as f64), inner), e.derivative(var))
            }
            Call(f, e) => {
                let de = e.derivative(var);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, e.clone()),
                    Func::Cos => neg(Call(Func::Sin, e.clone())),
                    Func::Exp => self.clone(),
                    Func::Tanh => sub(Num(1.0), Pow(Box::new(self.clone()), 2)),
                    Func::Sqrt => div(Num(1.0), mul(Num(2.0), self.clone())),
                };
                mul(outer, de)
            }
        }
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

pub(crate) fn neg(e: Expr) -> Expr {
    if is_num(&e, 0.0) {
        e
    } else {
        Expr::Neg(Box::new(e))
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b))
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        a
    } else {
        Expr::Binary(BinOp::Div, Box::new(a), Box::new(b))
    }
}

/// Pointwise evaluation at every node of `grid` at time `t`.
pub fn eval_on_grid(e: &Expr, grid: &PeriodicGrid, t: f64) -> Result<Vec<Complex64>, EvalError> {
    (0..grid.size())
        .map(|j| {
            e.eval(Point::new(grid.node(j), t))
                .map_err(|source| EvalError::AtNode {
                    index: j,
                    source: Box::new(source),
                })
        })
        .collect()
}

impl fmt::Display for Expr {
    // Fully parenthesised so that re-parsing reproduces the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Pi => write!(f, "pi"),
            Expr::ImagUnit => write!(f, "i"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::Xi) => write!(f, "xi"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({l}{sym}{r})")
            }
            Expr::Pow(b, n) => write!(f, "({b}^{n})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next_tok()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn next_tok(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        if c.is_ascii_digit() || c == b'.' {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
                self.pos += 1;
            }
            // exponent part: 1e-3, 2.5E+4
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let mut look = self.pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    self.pos = look;
                    while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
            }
            let text = &self.src[start..self.pos];
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            return Ok((start, Tok::Num(v)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            return Ok((start, Tok::Ident(self.src[start..self.pos].to_string())));
        }
        self.pos += 1;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok((start, tok))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
}

/// Parse with the usual precedence: `^` binds tighter than unary minus, which
/// binds tighter than `* /`, then `+ -`; binary levels are left-associative.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, idx: 0 };
    if p.peek() == &Tok::End {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let e = p.sum()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected()),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].1
    }

    fn offset(&self) -> usize {
        self.toks[self.idx].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.idx].1.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        let message = match self.peek() {
            Tok::End => "unexpected end of input".to_string(),
            t => format!("unexpected token {t:?}"),
        };
        ParseError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == &Tok::Op('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while self.peek() == &Tok::Op('^') {
            self.bump();
            let negative = if self.peek() == &Tok::Op('-') {
                self.bump();
                true
            } else {
                false
            };
            let at = self.offset();
            let n = match self.bump() {
                Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
                _ => {
                    return Err(ParseError::Syntax {
                        offset: at,
                        message: "exponent must be an integer literal".into(),
                    })
                }
            };
            base = Expr::Pow(Box::new(base), if negative { -n } else { n });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                if self.peek() != &Tok::RParen {
                    return Err(self.unexpected());
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "t" => return Ok(Expr::Var(Var::T)),
                    "xi" => return Ok(Expr::Var(Var::Xi)),
                    "pi" => return Ok(Expr::Pi),
                    "i" => return Ok(Expr::ImagUnit),
                    _ => {}
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier { offset: at, name });
                };
                if self.peek() != &Tok::LParen {
                    return Err(ParseError::Syntax {
                        offset: self.offset(),
                        message: format!("expected `(` after `{name}`"),
                    });
                }
                self.bump();
                let arg = self.sum()?;
                if self.peek() != &Tok::RParen {
                    return Err(self.unexpected());
                }
                self.bump();
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.unexpected()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ev(src: &str, x: f64, t: f64) -> Complex64 {
        parse_expr(src).unwrap().eval(Point::new(x, t)).unwrap()
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("1/(1+x^2)", 0.0, 0.0), Complex64::new(1.0, 0.0));
        assert!((ev("sin(x)*t", PI / 2.0, 2.0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(ev("2^3^2", 0.0, 0.0).re, 64.0);
        assert_eq!(ev("-2^2", 0.0, 0.0).re, -4.0);
        assert_eq!(ev("8/4/2", 0.0, 0.0).re, 1.0);
        assert_eq!(ev("1-2-3", 0.0, 0.0).re, -4.0);
        assert_eq!(ev("x^-1", 4.0, 0.0).re, 0.25);
        assert_eq!(ev("1.5e2", 0.0, 0.0).re, 150.0);
        assert!((ev("exp(i*pi)", 0.0, 0.0) + 1.0).norm() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse_expr("1+*x").unwrap_err();
        assert_eq!(err.offset(), 2);
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert!(matches!(
            parse_expr("log(x)"),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(parse_expr("foo + 1"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(parse_expr("x^1.5").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("(x").is_err());
        assert!(parse_expr("x)").is_err());
        assert_eq!(parse_expr("x $ 2").unwrap_err().offset(), 2);
    }

    #[test]
    fn runtime_errors() {
        let p = Point::new(0.0, 0.0);
        assert_eq!(parse_expr("1/x").unwrap().eval(p), Err(EvalError::DivisionByZero));
        assert_eq!(parse_expr("x^-2").unwrap().eval(p), Err(EvalError::DivisionByZero));
        assert!(matches!(
            parse_expr("sqrt(x-1)").unwrap().eval(p),
            Err(EvalError::NegativeSqrt(_))
        ));
    }

    #[test]
    fn grid_evaluation() {
        let g = PeriodicGrid::new(2.0 * PI, 8).unwrap();
        let zeros = eval_on_grid(&Expr::zero(), &g, 0.3).unwrap();
        assert!(zeros.iter().all(|z| z.norm() == 0.0));

        let e = parse_expr("exp(i*x)").unwrap();
        let v = eval_on_grid(&e, &g, 0.0).unwrap();
        for (j, z) in v.iter().enumerate() {
            assert_eq!(*z, e.eval(Point::new(g.node(j), 0.0)).unwrap());
        }

        let err = eval_on_grid(&parse_expr("1/(x+pi)").unwrap(), &g, 0.0).unwrap_err();
        assert!(matches!(err, EvalError::AtNode { index: 0, .. }));
    }

    #[test]
    fn dependency_flags() {
        let e = parse_expr("sin(x)*t").unwrap();
        assert!(e.depends_on(Var::X) && e.depends_on(Var::T) && !e.depends_on(Var::Xi));
        assert!(parse_expr("0*1").unwrap().is_zero());
        assert_eq!(parse_expr("2*i").unwrap().constant_value(), Some(Complex64::new(0.0, 2.0)));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for src in ["sin(x)*x^3", "tanh(2*x)/(1+x^2)", "sqrt(2+cos(x))", "exp(i*x)*t", "x^-2", "-cos(x)^4"] {
            let e = parse_expr(src).unwrap();
            let d = e.derivative(Var::X);
            for x in [0.3, 1.1, -2.0] {
                let h = 1e-5;
                let fd = (e.eval(Point::new(x + h, 0.7)).unwrap() - e.eval(Point::new(x - h, 0.7)).unwrap()) / (2.0 * h);
                let exact = d.eval(Point::new(x, 0.7)).unwrap();
                assert!((fd - exact).norm() < 1e-8 * (1.0 + exact.norm()), "{src} at {x}");
            }
        }
        assert!(parse_expr("t*pi").unwrap().derivative(Var::X).is_zero());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Num),
            Just(Expr::Pi),
            Just(Expr::ImagUnit),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::T)),
            Just(Expr::Var(Var::Xi)),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), -4i32..5).prop_map(|(e, n)| Expr::Pow(Box::new(e), n)),
                (
                    prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
                (
                    prop_oneof![
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Exp),
                        Just(Func::Tanh),
                        Just(Func::Sqrt)
                    ],
                    inner
                )
                    .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_round_trips(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(parse_expr(&back.to_string()).unwrap(), back);
        }
    }
}
