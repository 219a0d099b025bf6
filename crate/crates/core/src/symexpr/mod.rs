//! Immutable symbolic scalar expressions.
//!
//! Every coefficient in the engine (Lagrangians, Christoffel tables, jet
//! field components, form coefficients) is an [`Expr`]. Expressions are
//! reference-counted trees; cloning is cheap and values are `Send + Sync`.
//!
//! The engine's notion of symbolic equality is structural equality of
//! normal forms (see [`Expr::normalize`]). The normal form is an expanded
//! sum of monomials with exact rational coefficients. No rational-function
//! cancellation and no trigonometric rewriting is attempted, so
//! `sin(x)^2 + cos(x)^2` stays as written.

mod diff;
mod display;
mod eval;
mod normal;
mod parse;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

pub use eval::Bindings;
pub use parse::{parse_expr, parse_expr_with, JetResolver, RawJetNames};

/// Exact rational number used for every symbolic coefficient.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no symbolic derivative rule for `{0}`")]
    DomainFunction(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
}

static INTERNER: OnceLock<Mutex<HashSet<Arc<str>>>> = OnceLock::new();

/// Interned variable name.
///
/// Ordering and hashing follow the underlying string, so a `Symbol` can be
/// looked up in maps by `&str`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        let table = INTERNER.get_or_init(|| Mutex::new(HashSet::new()));
        let mut table = table.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = table.get(name) {
            return Symbol(existing.clone());
        }
        let arc: Arc<str> = Arc::from(name);
        table.insert(arc.clone());
        Symbol(arc)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Symbol {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// Unary functions known to the engine.
///
/// `Sign` never comes out of the parser; it is produced by differentiating
/// powers of `abs` and is resolved only at numeric evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(Rational),
    Var(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    /// Power with a rational exponent; `sqrt(u)` is `u^(1/2)`.
    Pow(Expr, Rational),
    Func(Func, Expr),
}

/// Symbolic scalar expression.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(value: Rational) -> Self {
        Expr::from_node(Node::Num(value))
    }

    pub fn int(value: i64) -> Self {
        Expr::num(Rational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Expr::num(Rational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn var(name: &str) -> Self {
        Expr::from_node(Node::Var(Symbol::new(name)))
    }

    pub fn sym(symbol: &Symbol) -> Self {
        Expr::from_node(Node::Var(symbol.clone()))
    }

    /// Unnormalized sum node.
    pub fn raw_add(terms: Vec<Expr>) -> Self {
        Expr::from_node(Node::Add(terms))
    }

    /// Unnormalized product node.
    pub fn raw_mul(factors: Vec<Expr>) -> Self {
        Expr::from_node(Node::Mul(factors))
    }

    pub fn raw_pow(base: Expr, exponent: Rational) -> Self {
        Expr::from_node(Node::Pow(base, exponent))
    }

    pub fn raw_func(func: Func, arg: Expr) -> Self {
        Expr::from_node(Node::Func(func, arg))
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Self {
        Expr::raw_add(terms.into_iter().collect()).normalize()
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Self {
        Expr::raw_mul(factors.into_iter().collect()).normalize()
    }

    pub fn powi(&self, exponent: i64) -> Self {
        Expr::raw_pow(self.clone(), Rational::from_integer(BigInt::from(exponent))).normalize()
    }

    pub fn pow_rational(&self, exponent: Rational) -> Self {
        Expr::raw_pow(self.clone(), exponent).normalize()
    }

    pub fn sqrt(&self) -> Self {
        self.pow_rational(Rational::new(BigInt::one(), BigInt::from(2)))
    }

    pub fn apply(func: Func, arg: &Expr) -> Self {
        Expr::raw_func(func, arg.clone()).normalize()
    }

    pub fn sin(&self) -> Self {
        Expr::apply(Func::Sin, self)
    }

    pub fn cos(&self) -> Self {
        Expr::apply(Func::Cos, self)
    }

    pub fn exp(&self) -> Self {
        Expr::apply(Func::Exp, self)
    }

    pub fn log(&self) -> Self {
        Expr::apply(Func::Log, self)
    }

    pub fn abs(&self) -> Self {
        Expr::apply(Func::Abs, self)
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    /// True for the literal constant zero. On normal forms this is the
    /// engine's symbolic zero test.
    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(r) if r.is_one())
    }

    /// Canonical form: expanded, like terms merged, exact coefficients.
    pub fn normalize(&self) -> Expr {
        normal::normalize(self)
    }

    /// Partial derivative with every other variable held constant. The
    /// result is normalized.
    pub fn diff(&self, var: &Symbol) -> Result<Expr, ExprError> {
        Ok(diff::derivative(self, var)?.normalize())
    }

    /// Simultaneous substitution followed by normalization.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.normalize();
        }
        substitute_raw(self, bindings).normalize()
    }

    /// Single-variable convenience wrapper around [`Expr::substitute`].
    pub fn subs(&self, var: &Symbol, value: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(var.clone(), value.clone());
        self.substitute(&map)
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        collect_symbols(self, &mut out);
        out
    }

    pub fn depends_on(&self, var: &Symbol) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Var(s) => s == var,
            Node::Add(items) | Node::Mul(items) => items.iter().any(|e| e.depends_on(var)),
            Node::Pow(b, _) => b.depends_on(var),
            Node::Func(_, a) => a.depends_on(var),
        }
    }

    /// IEEE evaluation, generic over the float type.
    pub fn evaluate<T, B>(&self, point: &B) -> Result<T, ExprError>
    where
        T: num_traits::Float + num_traits::FromPrimitive,
        B: Bindings<T> + ?Sized,
    {
        eval::evaluate(self, point)
    }

    /// Rational leading coefficient of a normalized term and the rest.
    pub(crate) fn split_coefficient(&self) -> (Rational, Expr) {
        match self.node() {
            Node::Num(r) => (r.clone(), Expr::one()),
            Node::Mul(fs) => match fs.first().map(|f| f.node()) {
                Some(Node::Num(r)) => {
                    let rest: Vec<Expr> = fs[1..].to_vec();
                    let rest = if rest.len() == 1 { rest[0].clone() } else { Expr::raw_mul(rest) };
                    (r.clone(), rest)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

}

fn substitute_raw(e: &Expr, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
    match e.node() {
        Node::Num(_) => e.clone(),
        Node::Var(s) => bindings.get(s).cloned().unwrap_or_else(|| e.clone()),
        Node::Add(items) => Expr::raw_add(items.iter().map(|t| substitute_raw(t, bindings)).collect()),
        Node::Mul(items) => Expr::raw_mul(items.iter().map(|t| substitute_raw(t, bindings)).collect()),
        Node::Pow(b, q) => Expr::raw_pow(substitute_raw(b, bindings), q.clone()),
        Node::Func(f, a) => Expr::raw_func(*f, substitute_raw(a, bindings)),
    }
}

fn collect_symbols(e: &Expr, out: &mut BTreeSet<Symbol>) {
    match e.node() {
        Node::Num(_) => {}
        Node::Var(s) => {
            out.insert(s.clone());
        }
        Node::Add(items) | Node::Mul(items) => items.iter().for_each(|t| collect_symbols(t, out)),
        Node::Pow(b, _) => collect_symbols(b, out),
        Node::Func(_, a) => collect_symbols(a, out),
    }
}

/// A set of declared variable names, used to reject differentiation by an
/// undeclared name.
pub trait VariableScope {
    fn declares(&self, name: &str) -> bool;
}

impl VariableScope for BTreeSet<Symbol> {
    fn declares(&self, name: &str) -> bool {
        self.contains(name)
    }
}

impl VariableScope for [&str] {
    fn declares(&self, name: &str) -> bool {
        self.contains(&name)
    }
}

/// Checked partial derivative: `var` must be declared in `scope`.
pub fn differentiate<S: VariableScope + ?Sized>(e: &Expr, var: &str, scope: &S) -> Result<Expr, ExprError> {
    if !scope.declares(var) {
        return Err(ExprError::UnknownVariable(var.to_string()));
    }
    e.diff(&Symbol::new(var))
}

pub fn substitute(e: &Expr, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
    e.substitute(bindings)
}

pub fn normalize(e: &Expr) -> Expr {
    e.normalize()
}

pub fn evaluate_numeric<B: Bindings<f64> + ?Sized>(e: &Expr, point: &B) -> Result<f64, ExprError> {
    e.evaluate(point)
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

impl From<Rational> for Expr {
    fn from(v: Rational) -> Self {
        Expr::num(v)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::raw_add(vec![a.clone(), b.clone()]).normalize());
binop!(Sub, sub, |a, b| Expr::raw_add(vec![a.clone(), Expr::raw_mul(vec![Expr::int(-1), b.clone()])]).normalize());
binop!(Mul, mul, |a, b| Expr::raw_mul(vec![a.clone(), b.clone()]).normalize());
binop!(Div, div, |a, b| Expr::raw_mul(vec![a.clone(), Expr::raw_pow(b.clone(), -Rational::one())]).normalize());

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::raw_mul(vec![Expr::int(-1), self]).normalize()
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -(self.clone())
    }
}
