//! A small, total expression language for defining symbol evaluators and
//! angular tail coefficients from text.
//!
//! Grammar (precedence `^` > unary `-` > `*` `/` > `+` `-`, `^` right
//! associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ['^' unary]
//! atom   := number | 'i' | variable | func '(' expr ')' | 'norm2' '(' 'x' ')'
//!           | '(' expr ')'
//! func   := exp | sin | cos | sqrt | abs
//! ```
//!
//! Variables are the coordinates `x1..x{2n}`, the radius `r`, and the chart
//! angles `theta1` (S^1) or `theta1 theta2 theta3` (Hopf angles on S^3).
//! Exponents must evaluate to integers or half-integers; half-integer powers
//! require a nonnegative real base. Division by zero, square roots of
//! negative reals, and any non-finite result yield domain errors rather than
//! silent NaNs.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(f64),
    ImaginaryUnit,
    Var(String),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
    Abs(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    /// norm2(x) = ||x||^2 over the horizontal coordinates.
    Norm2,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (l, c) = (line, col);
        let bump = |ch: char, line: &mut usize, col: &mut usize| {
            if ch == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match ch {
            ' ' | '\t' | '\r' | '\n' => {
                chars.next();
                bump(ch, &mut line, &mut col);
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                chars.next();
                bump(ch, &mut line, &mut col);
                let tok = match ch {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Spanned { tok, line: l, col: c });
            }
            '0'..='9' | '.' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        s.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else if (d == 'e' || d == 'E') && !s.is_empty() {
                        // Exponent part: accept e[+-]?digits, but only if a
                        // digit follows; otherwise 'e' starts an identifier.
                        let mut look = chars.clone();
                        look.next();
                        let sign = matches!(look.peek(), Some('+') | Some('-'));
                        if sign {
                            look.next();
                        }
                        if matches!(look.peek(), Some(d2) if d2.is_ascii_digit()) {
                            s.push(d);
                            chars.next();
                            bump(d, &mut line, &mut col);
                            if sign {
                                let sc = *chars.peek().unwrap();
                                s.push(sc);
                                chars.next();
                                bump(sc, &mut line, &mut col);
                            }
                        } else {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    line: l,
                    col: c,
                    msg: format!("malformed number '{s}'"),
                })?;
                out.push(Spanned {
                    tok: Tok::Num(v),
                    line: l,
                    col: c,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Tok::Ident(s),
                    line: l,
                    col: c,
                });
            }
            other => {
                return Err(Error::Parse {
                    line: l,
                    col: c,
                    msg: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> Result<()> {
        if self.peek() == Some(tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {tok:?}")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Literal(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.eat(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    if name == "norm2" {
                        match self.peek().cloned() {
                            Some(Tok::Ident(arg)) if arg == "x" => {
                                self.pos += 1;
                                self.eat(&Tok::RParen)?;
                                Ok(Expr::Norm2)
                            }
                            _ => Err(self.err("norm2 takes the vector argument 'x'")),
                        }
                    } else {
                        let arg = Box::new(self.expr()?);
                        self.eat(&Tok::RParen)?;
                        match name.as_str() {
                            "exp" => Ok(Expr::Exp(arg)),
                            "sin" => Ok(Expr::Sin(arg)),
                            "cos" => Ok(Expr::Cos(arg)),
                            "sqrt" => Ok(Expr::Sqrt(arg)),
                            "abs" => Ok(Expr::Abs(arg)),
                            _ => Err(self.err(format!("unknown function '{name}'"))),
                        }
                    }
                } else if name == "i" {
                    Ok(Expr::ImaginaryUnit)
                } else if is_known_variable(&name) {
                    Ok(Expr::Var(name))
                } else {
                    Err(self.err(format!("unknown identifier '{name}'")))
                }
            }
            _ => Err(self.err("expected a number, variable, function, or '('")),
        }
    }
}

fn is_known_variable(name: &str) -> bool {
    if name == "r" {
        return true;
    }
    for prefix in ["x", "theta"] {
        if let Some(rest) = name.strip_prefix(prefix) {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) && !rest.starts_with('0')
            {
                return true;
            }
        }
    }
    false
}

/// Parse an expression; errors carry line and column.
pub fn parse(text: &str) -> Result<Expr> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(Error::Parse {
            line: 1,
            col: 1,
            msg: "empty expression".into(),
        });
    }
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

fn write_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    if p < min {
        write!(f, "(")?;
        write_expr(e, f)?;
        write!(f, ")")
    } else {
        write_expr(e, f)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Literal(v) => write!(f, "{v}"),
        Expr::ImaginaryUnit => write!(f, "i"),
        Expr::Var(name) => write!(f, "{name}"),
        Expr::Norm2 => write!(f, "norm2(x)"),
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_prec(a, 3, f)
        }
        Expr::Exp(a) => write_call("exp", a, f),
        Expr::Sin(a) => write_call("sin", a, f),
        Expr::Cos(a) => write_call("cos", a, f),
        Expr::Sqrt(a) => write_call("sqrt", a, f),
        Expr::Abs(a) => write_call("abs", a, f),
        Expr::Add(a, b) => {
            write_prec(a, 1, f)?;
            write!(f, "+")?;
            write_prec(b, 2, f)
        }
        Expr::Sub(a, b) => {
            write_prec(a, 1, f)?;
            write!(f, "-")?;
            write_prec(b, 2, f)
        }
        Expr::Mul(a, b) => {
            write_prec(a, 2, f)?;
            write!(f, "*")?;
            write_prec(b, 3, f)
        }
        Expr::Div(a, b) => {
            write_prec(a, 2, f)?;
            write!(f, "/")?;
            write_prec(b, 3, f)
        }
        Expr::Pow(a, b) => {
            write_prec(a, 5, f)?;
            write!(f, "^")?;
            write_prec(b, 3, f)
        }
    }
}

fn write_call(name: &str, a: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{name}(")?;
    write_expr(a, f)?;
    write!(f, ")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Variable bindings for evaluation.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    vars: HashMap<String, Complex64>,
    /// Value of norm2(x), when the horizontal coordinates are bound.
    norm2: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn set(&mut self, name: &str, value: Complex64) -> &mut Self {
        self.vars.insert(name.to_string(), value);
        self
    }

    /// Bind a point x in R^{2n}: coordinates x1..x{2n}, the radius r, the
    /// chart angles, and norm2(x).
    pub fn point(x: &[f64]) -> Self {
        let mut b = Bindings::new();
        let mut n2 = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            b.vars
                .insert(format!("x{}", i + 1), Complex64::new(xi, 0.0));
            n2 += xi * xi;
        }
        let r = n2.sqrt();
        b.vars.insert("r".into(), Complex64::new(r, 0.0));
        b.norm2 = Some(n2);
        if x.len() == 2 || x.len() == 4 {
            let n = x.len() / 2;
            if let Ok(angles) = crate::quad::sphere_chart_angles(n, x) {
                for (i, a) in angles.iter().enumerate() {
                    b.vars
                        .insert(format!("theta{}", i + 1), Complex64::new(*a, 0.0));
                }
            }
        }
        b
    }

    /// Bind only the chart angles of a sphere point (tail coefficients are
    /// functions of the angles alone).
    pub fn angles(n: usize, theta_point: &[f64]) -> Result<Self> {
        let mut b = Bindings::new();
        let angles = crate::quad::sphere_chart_angles(n, theta_point)?;
        for (i, a) in angles.iter().enumerate() {
            b.vars
                .insert(format!("theta{}", i + 1), Complex64::new(*a, 0.0));
        }
        Ok(b)
    }
}

fn pow_int(base: Complex64, k: i64) -> Result<Complex64> {
    if k >= 0 {
        Ok(base.powu(k as u32))
    } else {
        let p = base.powu((-k) as u32);
        if p.norm() == 0.0 {
            return Err(Error::Domain("zero raised to a negative power".into()));
        }
        Ok(p.finv())
    }
}

/// Evaluate with all free variables bound. Domain violations (division by
/// zero, even roots of negatives, non-integer exponents, non-finite results)
/// are errors, never NaNs.
pub fn evaluate(e: &Expr, bindings: &Bindings) -> Result<Complex64> {
    let v = eval_inner(e, bindings)?;
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain("expression evaluated to a non-finite value".into()))
    }
}

fn eval_inner(e: &Expr, b: &Bindings) -> Result<Complex64> {
    use Expr::*;
    Ok(match e {
        Literal(v) => Complex64::new(*v, 0.0),
        ImaginaryUnit => Complex64::new(0.0, 1.0),
        Var(name) => *b
            .vars
            .get(name)
            .ok_or_else(|| Error::Input(format!("unbound variable '{name}'")))?,
        Norm2 => Complex64::new(
            b.norm2
                .ok_or_else(|| Error::Input("norm2(x) requires a bound point".into()))?,
            0.0,
        ),
        Neg(a) => -eval_inner(a, b)?,
        Exp(a) => eval_inner(a, b)?.exp(),
        Sin(a) => eval_inner(a, b)?.sin(),
        Cos(a) => eval_inner(a, b)?.cos(),
        Sqrt(a) => {
            let v = eval_inner(a, b)?;
            if v.im != 0.0 || v.re < 0.0 {
                return Err(Error::Domain(format!(
                    "sqrt of a negative or non-real value {v}"
                )));
            }
            Complex64::new(v.re.sqrt(), 0.0)
        }
        Abs(a) => Complex64::new(eval_inner(a, b)?.norm(), 0.0),
        Add(x, y) => eval_inner(x, b)? + eval_inner(y, b)?,
        Sub(x, y) => eval_inner(x, b)? - eval_inner(y, b)?,
        Mul(x, y) => eval_inner(x, b)? * eval_inner(y, b)?,
        Div(x, y) => {
            let den = eval_inner(y, b)?;
            if den.norm() == 0.0 {
                return Err(Error::Domain("division by zero".into()));
            }
            eval_inner(x, b)? / den
        }
        Pow(base, exponent) => {
            let ex = eval_inner(exponent, b)?;
            if ex.im.abs() > 1e-12 {
                return Err(Error::Domain("exponent must be real".into()));
            }
            let twice = 2.0 * ex.re;
            let k2 = twice.round();
            if (twice - k2).abs() > 1e-9 {
                return Err(Error::Domain(
                    "exponent must be an integer or half-integer".into(),
                ));
            }
            let k2 = k2 as i64;
            let base = eval_inner(base, b)?;
            if k2 % 2 == 0 {
                pow_int(base, k2 / 2)?
            } else {
                // Half-integer exponent: nonnegative real base required.
                if base.im != 0.0 || base.re < 0.0 {
                    return Err(Error::Domain(
                        "half-integer power of a negative or non-real base".into(),
                    ));
                }
                Complex64::new(base.re.powf(k2 as f64 / 2.0), 0.0)
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Compilation to point/angle evaluators
// ---------------------------------------------------------------------------

/// Shared complex evaluator over points of R^{2n} (or sphere points for
/// angular coefficients). Domain failures are signalled as NaN and converted
/// to errors by the quadrature engines.
pub type CEval = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

fn nan() -> Complex64 {
    Complex64::new(f64::NAN, f64::NAN)
}

/// Compile to an evaluator over points x in R^{2n}.
pub fn compile_point(e: &Expr, n: usize) -> Result<CEval> {
    validate_vars(e, n, false)?;
    let e = e.clone();
    Ok(Arc::new(move |x: &[f64]| {
        let b = Bindings::point(x);
        evaluate(&e, &b).unwrap_or_else(|_| nan())
    }))
}

/// Compile to an evaluator over sphere points (functions of angles only).
pub fn compile_angular(e: &Expr, n: usize) -> Result<CEval> {
    validate_vars(e, n, true)?;
    let e = e.clone();
    Ok(Arc::new(move |theta: &[f64]| {
        match Bindings::angles(n, theta) {
            Ok(b) => evaluate(&e, &b).unwrap_or_else(|_| nan()),
            Err(_) => nan(),
        }
    }))
}

fn validate_vars(e: &Expr, n: usize, angular_only: bool) -> Result<()> {
    use Expr::*;
    match e {
        Var(name) => {
            if let Some(rest) = name.strip_prefix("theta") {
                let k: usize = rest.parse().unwrap();
                let max = if n == 1 { 1 } else { 3 };
                if k == 0 || k > max {
                    return Err(Error::Input(format!(
                        "angle variable '{name}' out of range for n = {n}"
                    )));
                }
            } else if angular_only {
                return Err(Error::Input(format!(
                    "tail coefficients are functions of angles only, found '{name}'"
                )));
            } else if let Some(rest) = name.strip_prefix('x') {
                let k: usize = rest.parse().unwrap();
                if k == 0 || k > 2 * n {
                    return Err(Error::Input(format!(
                        "coordinate '{name}' out of range for n = {n}"
                    )));
                }
            }
            Ok(())
        }
        Norm2 => {
            if angular_only {
                Err(Error::Input(
                    "tail coefficients are functions of angles only, found norm2(x)".into(),
                ))
            } else {
                Ok(())
            }
        }
        Literal(_) | ImaginaryUnit => Ok(()),
        Neg(a) | Exp(a) | Sin(a) | Cos(a) | Sqrt(a) | Abs(a) => validate_vars(a, n, angular_only),
        Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
            validate_vars(a, n, angular_only)?;
            validate_vars(b, n, angular_only)
        }
    }
}
