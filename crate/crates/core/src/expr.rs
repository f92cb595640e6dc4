//! Expression trees for payoff terms, price objectives, price bounds and cost curves.
//!
//! Instances are data: every function a game needs is an [`Expr`] parsed from text
//! over a fixed operator basis (`+ - * / ^`, `min`, `max`, `abs` and the
//! piecewise-linear `pwl`). Variables name coordinates of the joint decision tuple,
//! the acting player's own decision, the price vector, or a free argument `q` used
//! by univariate cost curves.
//!
//! | text        | meaning                                        |
//! |-------------|------------------------------------------------|
//! | `x2`, `x2_3`| player 2, coordinate 1 (resp. 3)               |
//! | `xi`, `xi_2`| the evaluating player's own coordinate 1 (2)   |
//! | `p`, `p2`   | price coordinate 1 (2)                         |
//! | `q`         | free argument of a univariate curve            |
//!
//! `pwl(arg, x0, y0, x1, y1, ...)` interpolates linearly between breakpoints with
//! strictly increasing abscissae and clamps outside them.

use std::fmt;
use std::ops;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Coordinate `coord` of player `player` (both zero-based).
    Player { player: usize, coord: usize },
    /// Coordinate of whichever player the expression is evaluated for.
    Own { coord: usize },
    Price { coord: usize },
    Arg,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::Player { player, coord: 0 } => write!(f, "x{}", player + 1),
            Var::Player { player, coord } => write!(f, "x{}_{}", player + 1, coord + 1),
            Var::Own { coord: 0 } => write!(f, "xi"),
            Var::Own { coord } => write!(f, "xi_{}", coord + 1),
            Var::Price { coord: 0 } => write!(f, "p"),
            Var::Price { coord } => write!(f, "p{}", coord + 1),
            Var::Arg => write!(f, "q"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Abs(Box<Expr>),
    Pwl { arg: Box<Expr>, points: Vec<(f64, f64)> },
}

/// Variable bindings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a, T> {
    pub x: &'a [Vec<T>],
    pub own: Option<usize>,
    pub p: &'a [T],
    pub arg: T,
}

impl<'a, T: Scalar> Env<'a, T> {
    pub fn new(x: &'a [Vec<T>], p: &'a [T]) -> Self {
        Env {
            x,
            own: None,
            p,
            arg: T::zero(),
        }
    }

    pub fn with_own(mut self, player: usize) -> Self {
        self.own = Some(player);
        self
    }

    pub fn with_arg(mut self, arg: T) -> Self {
        self.arg = arg;
        self
    }
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn player(player: usize, coord: usize) -> Expr {
        Expr::Var(Var::Player { player, coord })
    }

    pub fn own(coord: usize) -> Expr {
        Expr::Var(Var::Own { coord })
    }

    pub fn price(coord: usize) -> Expr {
        Expr::Var(Var::Price { coord })
    }

    pub fn arg() -> Expr {
        Expr::Var(Var::Arg)
    }

    pub fn pow(self, e: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(e))
    }

    pub fn parse(src: &str) -> Result<Expr> {
        Parser::new(src).parse_all()
    }

    pub fn eval<T: Scalar>(&self, env: &Env<'_, T>) -> T {
        match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Var(v) => lookup(v, env),
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => {
                let base = a.eval(env);
                match **b {
                    Expr::Const(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => {
                        base.powi(c as i32)
                    }
                    _ => base.powf(b.eval(env)),
                }
            }
            Expr::Min(xs) => xs
                .iter()
                .map(|e| e.eval(env))
                .fold(T::infinity(), |m, v| if v < m { v } else { m }),
            Expr::Max(xs) => xs
                .iter()
                .map(|e| e.eval(env))
                .fold(T::neg_infinity(), |m, v| if v > m { v } else { m }),
            Expr::Abs(a) => a.eval(env).abs(),
            Expr::Pwl { arg, points } => pwl_eval(points, arg.eval(env)),
        }
    }

    /// Calls `f` on every variable occurrence.
    pub fn visit_vars(&self, f: &mut impl FnMut(&Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(v),
            Expr::Neg(a) | Expr::Abs(a) => a.visit_vars(f),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Min(xs) | Expr::Max(xs) => xs.iter().for_each(|e| e.visit_vars(f)),
            Expr::Pwl { arg, .. } => arg.visit_vars(f),
        }
    }

    pub fn any_var(&self, pred: impl Fn(&Var) -> bool) -> bool {
        let mut hit = false;
        self.visit_vars(&mut |v| hit |= pred(v));
        hit
    }

    pub fn uses_price(&self) -> bool {
        self.any_var(|v| matches!(v, Var::Price { .. }))
    }

    pub fn uses_own(&self) -> bool {
        self.any_var(|v| matches!(v, Var::Own { .. }))
    }

    /// True if some `x{j}` variable is referenced for a player other than `player`.
    pub fn uses_rival_of(&self, player: usize) -> bool {
        self.any_var(|v| matches!(v, Var::Player { player: j, .. } if *j != player))
    }

    pub fn uses_any_player(&self) -> bool {
        self.any_var(|v| matches!(v, Var::Player { .. }))
    }

    /// Replaces variables by expressions.
    pub fn map_vars(&self, f: &impl Fn(&Var) -> Expr) -> Expr {
        let b = |e: &Expr| Box::new(e.map_vars(f));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => f(v),
            Expr::Neg(a) => Expr::Neg(b(a)),
            Expr::Add(x, y) => Expr::Add(b(x), b(y)),
            Expr::Sub(x, y) => Expr::Sub(b(x), b(y)),
            Expr::Mul(x, y) => Expr::Mul(b(x), b(y)),
            Expr::Div(x, y) => Expr::Div(b(x), b(y)),
            Expr::Pow(x, y) => Expr::Pow(b(x), b(y)),
            Expr::Min(xs) => Expr::Min(xs.iter().map(|e| e.map_vars(f)).collect()),
            Expr::Max(xs) => Expr::Max(xs.iter().map(|e| e.map_vars(f)).collect()),
            Expr::Abs(a) => Expr::Abs(b(a)),
            Expr::Pwl { arg, points } => Expr::Pwl {
                arg: b(arg),
                points: points.clone(),
            },
        }
    }

    /// Substitutes the free argument `q`.
    pub fn substitute_arg(&self, with: &Expr) -> Expr {
        self.map_vars(&|v| match v {
            Var::Arg => with.clone(),
            other => Expr::Var(*other),
        })
    }

    /// Rewrites own-action variables `xi_k` into `x{player}_k`.
    pub fn bind_own(&self, player: usize) -> Expr {
        self.map_vars(&|v| match *v {
            Var::Own { coord } => Expr::player(player, coord),
            other => Expr::Var(other),
        })
    }

    /// Symbolic derivative, or `None` when a non-smooth operator depends on `v`.
    pub fn derivative(&self, v: &Var) -> Option<Expr> {
        let depends = |e: &Expr| e.any_var(|w| w == v);
        Some(match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(w) => Expr::c(if w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(v)?),
            Expr::Add(a, b) => add(a.derivative(v)?, b.derivative(v)?),
            Expr::Sub(a, b) => sub(a.derivative(v)?, b.derivative(v)?),
            Expr::Mul(a, b) => add(
                mul(a.derivative(v)?, (**b).clone()),
                mul((**a).clone(), b.derivative(v)?),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.derivative(v)?, (**b).clone()),
                    mul((**a).clone(), b.derivative(v)?),
                );
                div(num, (**b).clone().pow(Expr::c(2.0)))
            }
            Expr::Pow(a, b) => match **b {
                Expr::Const(c) => mul(
                    mul(Expr::c(c), (**a).clone().pow(Expr::c(c - 1.0))),
                    a.derivative(v)?,
                ),
                _ if !depends(self) => Expr::zero(),
                _ => return None,
            },
            Expr::Min(_) | Expr::Max(_) | Expr::Abs(_) | Expr::Pwl { .. } => {
                if depends(self) {
                    return None;
                }
                Expr::zero()
            }
        })
    }
}

fn lookup<T: Scalar>(v: &Var, env: &Env<'_, T>) -> T {
    match *v {
        Var::Player { player, coord } => env
            .x
            .get(player)
            .and_then(|xi| xi.get(coord))
            .copied()
            .unwrap_or_else(T::nan),
        Var::Own { coord } => env
            .own
            .and_then(|i| env.x.get(i))
            .and_then(|xi| xi.get(coord))
            .copied()
            .unwrap_or_else(T::nan),
        Var::Price { coord } => env.p.get(coord).copied().unwrap_or_else(T::nan),
        Var::Arg => env.arg,
    }
}

pub(crate) fn pwl_eval<T: Scalar>(points: &[(f64, f64)], y: T) -> T {
    let (first, last) = (points[0], points[points.len() - 1]);
    if y <= T::lit(first.0) {
        return T::lit(first.1);
    }
    if y >= T::lit(last.0) {
        return T::lit(last.1);
    }
    for w in points.windows(2) {
        let (x0, y0) = (T::lit(w[0].0), T::lit(w[0].1));
        let (x1, y1) = (T::lit(w[1].0), T::lit(w[1].1));
        if y == x1 {
            return y1;
        }
        if y < x1 {
            return y0 + (y1 - y0) * (y - x0) / (x1 - x0);
        }
    }
    T::lit(last.1)
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (true, _) => b,
        (_, true) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (_, true) => a,
        (true, _) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::zero()
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::zero()
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.reduce(|a, b| a + b).unwrap_or_else(Expr::zero)
    }
}

fn fmt_num(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{}", c)
    }
}

// Binary operators are always parenthesized so that printing and re-parsing is exact.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, xs: &[Expr]| {
            write!(f, "{name}(")?;
            for (k, e) in xs.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, ")")
        };
        match self {
            Expr::Const(c) => fmt_num(f, *c),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Min(xs) => list(f, "min", xs),
            Expr::Max(xs) => list(f, "max", xs),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Pwl { arg, points } => {
                write!(f, "pwl({arg}")?;
                for (x, y) in points {
                    write!(f, ", ")?;
                    fmt_num(f, *x)?;
                    write!(f, ", ")?;
                    fmt_num(f, *y)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let src = String::deserialize(d)?;
        Expr::parse(&src).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
        }
    }

    fn err<X>(&self, msg: impl Into<String>) -> Result<X> {
        Err(Error::Parse {
            offset: self.tok_start,
            msg: msg.into(),
        })
    }

    fn advance(&mut self) -> Result<()> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.')
            {
                self.pos += 1;
            }
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
            let v: f64 = match text.parse() {
                Ok(v) => v,
                Err(_) => return self.err(format!("bad number `{text}`")),
            };
            if !v.is_finite() {
                return self.err(format!("number `{text}` is not finite"));
            }
            self.tok = Tok::Num(v);
        } else if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
        } else if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            self.tok = Tok::Sym(c as char);
        } else {
            return self.err(format!("unexpected character `{}`", c as char));
        }
        Ok(())
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.tok != Tok::Sym(c) {
            return self.err(format!("expected `{c}`"));
        }
        self.advance()
    }

    fn parse_all(mut self) -> Result<Expr> {
        self.advance()?;
        let e = self.sum()?;
        if self.tok != Tok::End {
            return self.err("trailing input");
        }
        Ok(e)
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.tok {
                Tok::Sym('+') => {
                    self.advance()?;
                    lhs = lhs + self.product()?;
                }
                Tok::Sym('-') => {
                    self.advance()?;
                    lhs = lhs - self.product()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Sym('*') => {
                    self.advance()?;
                    lhs = lhs * self.unary()?;
                }
                Tok::Sym('/') => {
                    self.advance()?;
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Sym('-') {
            self.advance()?;
            return Ok(neg(self.unary()?));
        }
        if self.tok == Tok::Sym('+') {
            self.advance()?;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.tok == Tok::Sym('^') {
            self.advance()?;
            let exp = self.unary()?;
            return Ok(base.pow(exp));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect('(')?;
        let mut out = vec![self.sum()?];
        while self.tok == Tok::Sym(',') {
            self.advance()?;
            out.push(self.sum()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Const(v))
            }
            Tok::Sym('(') => {
                self.advance()?;
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let start = self.tok_start;
                self.advance()?;
                match name.as_str() {
                    "min" | "max" | "abs" | "pwl" if self.tok == Tok::Sym('(') => {
                        let args = self.args()?;
                        self.call(&name, args, start)
                    }
                    _ => parse_var(&name).map(Expr::Var).ok_or(Error::Parse {
                        offset: start,
                        msg: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Sym(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expr>, offset: usize) -> Result<Expr> {
        let fail = |msg: String| Err(Error::Parse { offset, msg });
        match name {
            "min" => Ok(Expr::Min(args)),
            "max" => Ok(Expr::Max(args)),
            "abs" if args.len() == 1 => Ok(Expr::Abs(Box::new(args.remove(0)))),
            "abs" => fail("abs takes one argument".into()),
            _ => {
                if args.len() < 5 || args.len() % 2 == 0 {
                    return fail("pwl takes an argument and at least two (x, y) pairs".into());
                }
                let arg = args.remove(0);
                let mut nums = Vec::with_capacity(args.len());
                for a in &args {
                    match a {
                        Expr::Const(c) => nums.push(*c),
                        _ => return fail("pwl breakpoints must be numeric literals".into()),
                    }
                }
                let points: Vec<(f64, f64)> = nums.chunks(2).map(|c| (c[0], c[1])).collect();
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return fail("pwl abscissae must be strictly increasing".into());
                }
                Ok(Expr::Pwl {
                    arg: Box::new(arg),
                    points,
                })
            }
        }
    }
}

fn parse_index(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: usize = s.parse().ok()?;
    n.checked_sub(1)
}

fn parse_var(name: &str) -> Option<Var> {
    match name {
        "q" => return Some(Var::Arg),
        "p" => return Some(Var::Price { coord: 0 }),
        "xi" => return Some(Var::Own { coord: 0 }),
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("xi_") {
        return parse_index(rest).map(|coord| Var::Own { coord });
    }
    if let Some(rest) = name.strip_prefix('p') {
        return parse_index(rest).map(|coord| Var::Price { coord });
    }
    let rest = name.strip_prefix('x')?;
    match rest.split_once('_') {
        Some((pl, co)) => Some(Var::Player {
            player: parse_index(pl)?,
            coord: parse_index(co)?,
        }),
        None => parse_index(rest).map(|player| Var::Player { player, coord: 0 }),
    }
}
