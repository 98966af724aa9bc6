//! Scalar expressions in the variables `x` and `t`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 't' | 'pi' | 'e' | func '(' args ')' | '(' sum ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-1` is `0.5`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::specfun;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} is undefined at {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("{base}^{exponent} is not a real number")]
    Power { base: f64, exponent: f64 },
    #[error("result overflowed to infinity")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Gamma,
    Pow,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Gamma,
        Func::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Gamma => "gamma",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        if self == Func::Pow {
            2
        } else {
            1
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Parsed expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Evaluates the expression at `(x, t)`.
    ///
    /// Domain violations are returned as errors; a successful result is
    /// always finite.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::T) => t,
            Expr::Neg(e) => -e.eval(x, t)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(x, t)?;
                let b = r.eval(x, t)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b)?,
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(x, t)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::Domain { func: "log", arg: a });
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", arg: a });
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Gamma => {
                        specfun::gamma(a).map_err(|_| EvalError::Domain { func: "gamma", arg: a })?
                    }
                    Func::Pow => power(a, args[1].eval(x, t)?)?,
                }
            }
        };
        if v.is_nan() {
            Err(EvalError::Domain { func: "arithmetic", arg: v })
        } else if v.is_infinite() {
            Err(EvalError::Overflow)
        } else {
            Ok(v)
        }
    }

    /// The set of variables appearing anywhere in the tree.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let v = base.powf(exponent);
    if v.is_nan() {
        return Err(EvalError::Power { base, exponent });
    }
    Ok(v)
}

/// Fully parenthesized, unambiguous rendering that parses back to an
/// equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l}{}{r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
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
    Comma,
    End,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("operator `{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), start));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
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
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

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
        let tok = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax { offset: self.offset(), message: format!("expected {expected}, found {}", describe(self.peek())) }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
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
            lhs = Expr::binary(op, lhs, rhs);
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
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "t" => return Ok(Expr::Var(Var::T)),
                    "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Const(std::f64::consts::E)),
                    _ => {}
                }
                let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier { name: name.clone(), offset })?;
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.sum()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.sum()?);
                }
                if args.len() != func.arity() {
                    return Err(ParseError::Syntax {
                        offset,
                        message: format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                    });
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("a number, variable, function or `(`")),
        }
    }
}

/// Parses an expression string.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Syntax { offset: 0, message: "empty expression".into() });
    }
    let mut parser = Parser { toks: tokenize(source)?, pos: 0 };
    let expr = parser.sum()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(expr)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ev(src: &str, x: f64, t: f64) -> f64 {
        parse(src).unwrap().eval(x, t).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("2+3*x", 4.0, 0.0), 14.0);
        assert_eq!(ev("-x^2", 2.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(ev("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(ev("1-2-3", 0.0, 0.0), -4.0);
        assert_eq!(ev("(1+2)*3", 0.0, 0.0), 9.0);
        assert_eq!(ev("-2*-3", 0.0, 0.0), 6.0);
        assert_eq!(ev("1.5e2 + 2E-1", 0.0, 0.0), 150.2);
        assert_eq!(ev("pow(2, 10)", 0.0, 0.0), 1024.0);
    }

    #[test]
    fn constants_and_functions() {
        assert_eq!(ev("gamma(5)", 0.0, 0.0), 24.0);
        assert_relative_eq!(ev("sqrt(3)/(3*pi)*t^(1/3)", 0.3, 1.0), 0.18377629847393068, max_relative = 1e-15);
        assert_eq!(ev("x^(13/4)", 1.0, 0.0), 1.0);
        assert_relative_eq!(ev("log(e)", 0.0, 0.0), 1.0);
        assert_relative_eq!(ev("abs(sin(-x)) + cos(0) + exp(0)", 1.0, 0.0), 1f64.sin() + 2.0);
    }

    #[test]
    fn free_variables() {
        assert!(parse("3.5").unwrap().free_vars().is_empty());
        assert_eq!(parse("x*t").unwrap().free_vars(), BTreeSet::from([Var::X, Var::T]));
        assert_eq!(parse("x^(13/4)").unwrap().free_vars(), BTreeSet::from([Var::X]));
        assert_eq!(parse("sqrt(3)/(3*pi)*t^(1/3)").unwrap().free_vars(), BTreeSet::from([Var::T]));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse("2+*x").unwrap_err();
        assert_eq!(err.offset(), 2);
        assert!(matches!(err, ParseError::Syntax { .. }));
        assert_eq!(parse("(x+1").unwrap_err().offset(), 4);
        assert_eq!(parse("x 2").unwrap_err().offset(), 2);
        assert_eq!(parse("x $ 2").unwrap_err().offset(), 2);
        assert!(parse("").is_err());
        assert!(parse("   ").is_err());
        assert!(matches!(parse("pow(2)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("sin(1, 2)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("sin 1"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(parse("2*y").unwrap_err(), ParseError::UnknownIdentifier { name: "y".into(), offset: 2 });
        assert!(matches!(parse("tan(x)"), Err(ParseError::UnknownIdentifier { .. })));
    }

    #[test]
    fn domain_errors_are_not_nan() {
        let cases = [
            ("log(x)", 0.0),
            ("log(x)", -1.0),
            ("sqrt(x)", -1.0),
            ("1/x", 0.0),
            ("gamma(x)", -2.0),
            ("x^(1/3)", -8.0),
            ("x^(-1)", 0.0),
            ("exp(x)", 1000.0),
        ];
        for (src, x) in cases {
            assert!(parse(src).unwrap().eval(x, 0.0).is_err(), "{src} at {x}");
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let e = parse("sin(x)*exp(-t)+gamma(x+1/3)").unwrap();
        let a = e.eval(0.7, 0.2).unwrap();
        for _ in 0..10 {
            assert_eq!(e.eval(0.7, 0.2).unwrap().to_bits(), a.to_bits());
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-50.0f64..50.0).prop_map(Expr::Const),
            (1e-8f64..1e8).prop_map(Expr::Const),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::T)),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), 0usize..5).prop_map(|(l, r, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][k];
                    Expr::binary(op, l, r)
                }),
                (inner.clone(), 0usize..7).prop_map(|(a, k)| Expr::Call(Func::ALL[k], vec![a])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Pow, vec![a, b])),
            ]
        })
    }

    fn same(a: &Result<f64, EvalError>, b: &Result<f64, EvalError>) -> bool {
        match (a, b) {
            (Ok(u), Ok(v)) => u.to_bits() == v.to_bits(),
            (Err(_), Err(_)) => true,
            _ => false,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn print_parse_round_trip(
            e in arb_expr(),
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 10),
        ) {
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            for (x, t) in pts {
                prop_assert!(same(&e.eval(x, t), &back.eval(x, t)), "{printed}");
            }
            prop_assert_eq!(back.free_vars(), e.free_vars());
        }
    }
}
