//! Coordinates on E, J¹E and the repeated jet J¹J¹E.
//!
//! Base indices run `0..=n` and the volume form is `dx^0 ∧ … ∧ dx^n`.
//! Jet coordinates get generated names that can never clash with user
//! identifiers: `d(y,x)` for v^A_μ, `a(y,x)` and `b(y,x,x)` for the
//! repeated-jet slots, `dd(y,x,x)` for second-jet symbols.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::symexpr::{Expr, JetResolver, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("duplicate coordinate name `{0}`")]
    DuplicateName(String),
    #[error("the {0} axis has no coordinates")]
    EmptyAxis(&'static str),
    #[error("`{0}` is not a valid coordinate name")]
    InvalidName(String),
    #[error("`{name}` depends on `{var}`, which is not a {allowed} coordinate")]
    OutOfScope { name: String, var: String, allowed: &'static str },
    #[error("expected {expected} components, got {got}")]
    Arity { expected: usize, got: usize },
}

/// Which block of the jet chart a coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coord {
    Base(usize),
    Fiber(usize),
    /// `(A, μ)`
    Jet(usize, usize),
}

const RESERVED: &[&str] = &["sqrt", "sin", "cos", "exp", "log", "abs", "sign"];

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_') && !RESERVED.contains(&name)
}

/// Chart of π: E → M together with its first jet.
///
/// The global coordinate order is base, then fiber, then v^A_μ with A
/// major. All wedge signs in [`crate::forms`] follow this order.
#[derive(Debug, Clone)]
pub struct JetChart {
    base: Vec<Symbol>,
    fiber: Vec<Symbol>,
    params: Vec<Symbol>,
    coords: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

impl PartialEq for JetChart {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.fiber == other.fiber && self.params == other.params
    }
}

impl Eq for JetChart {}

pub fn make_chart(base: &[&str], fiber: &[&str]) -> Result<Arc<JetChart>, ChartError> {
    JetChart::new(base, fiber, &[])
}

impl JetChart {
    /// `params` are symbolic constants that may appear in expressions but
    /// are not coordinates.
    pub fn new(base: &[&str], fiber: &[&str], params: &[&str]) -> Result<Arc<JetChart>, ChartError> {
        if base.is_empty() {
            return Err(ChartError::EmptyAxis("base"));
        }
        if fiber.is_empty() {
            return Err(ChartError::EmptyAxis("fiber"));
        }
        let mut seen = std::collections::HashSet::new();
        for name in base.iter().chain(fiber).chain(params) {
            if !valid_identifier(name) {
                return Err(ChartError::InvalidName(name.to_string()));
            }
            if !seen.insert(*name) {
                return Err(ChartError::DuplicateName(name.to_string()));
            }
        }
        let base: Vec<Symbol> = base.iter().map(|s| Symbol::new(s)).collect();
        let fiber: Vec<Symbol> = fiber.iter().map(|s| Symbol::new(s)).collect();
        let params = params.iter().map(|s| Symbol::new(s)).collect();
        let mut coords: Vec<Symbol> = base.iter().chain(&fiber).cloned().collect();
        for y in &fiber {
            for x in &base {
                coords.push(Symbol::new(&format!("d({y},{x})")));
            }
        }
        let index = coords.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Arc::new(JetChart { base, fiber, params, coords, index }))
    }

    /// n + 1
    pub fn base_dim(&self) -> usize {
        self.base.len()
    }

    /// N
    pub fn fiber_dim(&self) -> usize {
        self.fiber.len()
    }

    pub fn base_names(&self) -> &[Symbol] {
        &self.base
    }

    pub fn fiber_names(&self) -> &[Symbol] {
        &self.fiber
    }

    pub fn params(&self) -> &[Symbol] {
        &self.params
    }

    /// Every coordinate of J¹E in global order.
    pub fn coords(&self) -> &[Symbol] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Number of coordinates on E (base then fiber).
    pub fn e_dim(&self) -> usize {
        self.base.len() + self.fiber.len()
    }

    pub fn x(&self, mu: usize) -> &Symbol {
        &self.base[mu]
    }

    pub fn y(&self, a: usize) -> &Symbol {
        &self.fiber[a]
    }

    pub fn v(&self, a: usize, mu: usize) -> &Symbol {
        &self.coords[self.v_index(a, mu)]
    }

    pub fn x_index(&self, mu: usize) -> usize {
        mu
    }

    pub fn y_index(&self, a: usize) -> usize {
        self.base.len() + a
    }

    pub fn v_index(&self, a: usize, mu: usize) -> usize {
        self.e_dim() + a * self.base.len() + mu
    }

    pub fn index_of(&self, s: &Symbol) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn coord(&self, i: usize) -> Coord {
        let nb = self.base.len();
        let e = self.e_dim();
        if i < nb {
            Coord::Base(i)
        } else if i < e {
            Coord::Fiber(i - nb)
        } else {
            Coord::Jet((i - e) / nb, (i - e) % nb)
        }
    }

    pub fn is_e_coord(&self, i: usize) -> bool {
        i < self.e_dim()
    }

    /// Repeated-jet slot a^A_ρ.
    pub fn a(&self, a: usize, rho: usize) -> Symbol {
        Symbol::new(&format!("a({},{})", self.fiber[a], self.base[rho]))
    }

    /// Repeated-jet slot b^A_ρμ; not symmetrized.
    pub fn b(&self, a: usize, rho: usize, mu: usize) -> Symbol {
        Symbol::new(&format!("b({},{},{})", self.fiber[a], self.base[rho], self.base[mu]))
    }

    /// Second-jet symbol w^A_μν, stored with μ ≤ ν.
    pub fn w(&self, a: usize, mu: usize, nu: usize) -> Symbol {
        let (lo, hi) = if mu <= nu { (mu, nu) } else { (nu, mu) };
        Symbol::new(&format!("dd({},{},{})", self.fiber[a], self.base[lo], self.base[hi]))
    }

    /// All second-jet symbols, μ ≤ ν only.
    pub fn second_jet_symbols(&self) -> Vec<Symbol> {
        let nb = self.base.len();
        let mut out = Vec::new();
        for a in 0..self.fiber.len() {
            for mu in 0..nb {
                for nu in mu..nb {
                    out.push(self.w(a, mu, nu));
                }
            }
        }
        out
    }

    pub fn base_index(&self, name: &str) -> Option<usize> {
        self.base.iter().position(|s| s.as_str() == name)
    }

    pub fn fiber_index(&self, name: &str) -> Option<usize> {
        self.fiber.iter().position(|s| s.as_str() == name)
    }

    pub fn is_param(&self, s: &Symbol) -> bool {
        self.params.contains(s)
    }

    /// Checks that `e` only uses symbols accepted by `allowed` or parameters.
    pub fn check_scope(
        &self,
        name: &str,
        e: &Expr,
        allowed: &'static str,
        accept: impl Fn(&Symbol) -> bool,
    ) -> Result<(), ChartError> {
        for s in e.free_symbols() {
            if !accept(&s) && !self.is_param(&s) {
                return Err(ChartError::OutOfScope { name: name.to_string(), var: s.to_string(), allowed });
            }
        }
        Ok(())
    }

    pub fn is_base_symbol(&self, s: &Symbol) -> bool {
        self.index_of(s).is_some_and(|i| i < self.base.len())
    }

    pub fn is_e_symbol(&self, s: &Symbol) -> bool {
        self.index_of(s).is_some_and(|i| i < self.e_dim())
    }

    pub fn is_jet_symbol(&self, s: &Symbol) -> bool {
        self.index_of(s).is_some()
    }
}

impl fmt::Display for JetChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Symbol]| v.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
        write!(f, "base [{}], fiber [{}]", join(&self.base), join(&self.fiber))
    }
}

impl JetResolver for JetChart {
    fn jet_symbol(&self, kind: &str, args: &[String]) -> Result<Symbol, String> {
        let y = self.fiber_index(&args[0]).ok_or_else(|| format!("`{}` is not a fiber coordinate", args[0]))?;
        let mut xs = Vec::new();
        for x in &args[1..] {
            xs.push(self.base_index(x).ok_or_else(|| format!("`{x}` is not a base coordinate"))?);
        }
        Ok(match kind {
            "d" => self.v(y, xs[0]).clone(),
            "a" => self.a(y, xs[0]),
            "b" => self.b(y, xs[0], xs[1]),
            "dd" => self.w(y, xs[0], xs[1]),
            _ => return Err(format!("unknown jet reference `{kind}`")),
        })
    }
}

/// Local section φ of E → M.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionE {
    pub chart: Arc<JetChart>,
    pub phi: Vec<Expr>,
}

/// Local section ψ of J¹E → M: `(x, f^A(x), g^A_μ(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionJ1 {
    pub chart: Arc<JetChart>,
    pub f: Vec<Expr>,
    /// `g[A][μ]`
    pub g: Vec<Vec<Expr>>,
}

impl SectionE {
    pub fn new(chart: &Arc<JetChart>, phi: Vec<Expr>) -> Result<Self, ChartError> {
        if phi.len() != chart.fiber_dim() {
            return Err(ChartError::Arity { expected: chart.fiber_dim(), got: phi.len() });
        }
        for (a, e) in phi.iter().enumerate() {
            chart.check_scope(chart.y(a).as_str(), e, "base", |s| chart.is_base_symbol(s))?;
        }
        Ok(SectionE { chart: chart.clone(), phi })
    }

    /// ∂φ^A/∂x^μ
    pub fn first_derivative(&self, a: usize, mu: usize) -> Expr {
        self.phi[a].diff(self.chart.x(mu)).expect("polynomial and elementary sections are differentiable")
    }

    pub fn second_derivative(&self, a: usize, mu: usize, nu: usize) -> Expr {
        self.first_derivative(a, mu).diff(self.chart.x(nu)).expect("differentiable section")
    }

    /// Bindings y^A → φ^A, v^A_μ → ∂_μφ^A and dd symbols → ∂²φ^A.
    pub fn jet_bindings(&self) -> BTreeMap<Symbol, Expr> {
        let c = &self.chart;
        let mut m = BTreeMap::new();
        for a in 0..c.fiber_dim() {
            m.insert(c.y(a).clone(), self.phi[a].clone());
            for mu in 0..c.base_dim() {
                m.insert(c.v(a, mu).clone(), self.first_derivative(a, mu));
                for nu in mu..c.base_dim() {
                    m.insert(c.w(a, mu, nu), self.second_derivative(a, mu, nu));
                }
            }
        }
        m
    }
}

impl SectionJ1 {
    pub fn new(chart: &Arc<JetChart>, f: Vec<Expr>, g: Vec<Vec<Expr>>) -> Result<Self, ChartError> {
        if f.len() != chart.fiber_dim() {
            return Err(ChartError::Arity { expected: chart.fiber_dim(), got: f.len() });
        }
        if g.len() != chart.fiber_dim() {
            return Err(ChartError::Arity { expected: chart.fiber_dim(), got: g.len() });
        }
        for (a, row) in g.iter().enumerate() {
            if row.len() != chart.base_dim() {
                return Err(ChartError::Arity { expected: chart.base_dim(), got: row.len() });
            }
            for e in row {
                chart.check_scope(chart.v(a, 0).as_str(), e, "base", |s| chart.is_base_symbol(s))?;
            }
            chart.check_scope(chart.y(a).as_str(), &f[a], "base", |s| chart.is_base_symbol(s))?;
        }
        Ok(SectionJ1 { chart: chart.clone(), f, g })
    }

    /// Bindings y^A → f^A, v^A_μ → g^A_μ.
    pub fn bindings(&self) -> BTreeMap<Symbol, Expr> {
        let c = &self.chart;
        let mut m = BTreeMap::new();
        for a in 0..c.fiber_dim() {
            m.insert(c.y(a).clone(), self.f[a].clone());
            for mu in 0..c.base_dim() {
                m.insert(c.v(a, mu).clone(), self.g[a][mu].clone());
            }
        }
        m
    }

    /// π¹ ∘ ψ
    pub fn project(&self) -> SectionE {
        SectionE { chart: self.chart.clone(), phi: self.f.clone() }
    }
}

/// j¹φ
pub fn prolong_section(phi: &SectionE) -> SectionJ1 {
    let c = &phi.chart;
    let g = (0..c.fiber_dim())
        .map(|a| (0..c.base_dim()).map(|mu| phi.first_derivative(a, mu)).collect())
        .collect();
    SectionJ1 { chart: c.clone(), f: phi.phi.clone(), g }
}

/// j¹ψ on J¹J¹E: a^A_ρ = ∂f^A/∂x^ρ and b^A_ρμ = ∂g^A_ρ/∂x^μ.
pub fn prolong_section_j1(psi: &SectionJ1) -> BTreeMap<Symbol, Expr> {
    let c = &psi.chart;
    let mut m = BTreeMap::new();
    for a in 0..c.fiber_dim() {
        for rho in 0..c.base_dim() {
            m.insert(c.a(a, rho), psi.f[a].diff(c.x(rho)).expect("differentiable section"));
            for mu in 0..c.base_dim() {
                m.insert(c.b(a, rho, mu), psi.g[a][rho].diff(c.x(mu)).expect("differentiable section"));
            }
        }
    }
    m
}
