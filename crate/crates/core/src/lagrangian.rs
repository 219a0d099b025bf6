//! Lagrangian densities 𝓛 = L·ω and what they determine: Cartan forms,
//! Euler–Lagrange equations, energy densities and jet-field equations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::canonical::{contact_form, same_chart, vertical_endo_s, vertical_endo_v, GeometryError};
use crate::connection::{jetfield_contract, sopde_project, Connection, JetField2};
use crate::forms::{exterior_d, interior, wedge, Form, VectorField};
use crate::jetchart::{ChartError, JetChart, SectionE};
use crate::symexpr::{Expr, Rational, Symbol};

fn d(e: &Expr, s: &Symbol) -> Expr {
    e.diff(s).expect("lagrangian has no derivative rule")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lagrangian {
    pub chart: Arc<JetChart>,
    pub l: Expr,
}

impl Lagrangian {
    pub fn new(chart: &Arc<JetChart>, l: Expr) -> Result<Self, ChartError> {
        chart.check_scope("L", &l, "jet", |s| chart.is_jet_symbol(s))?;
        Ok(Lagrangian { chart: chart.clone(), l })
    }

    /// ∂L/∂v^A_μ
    pub fn momentum(&self, a: usize, mu: usize) -> Expr {
        d(&self.l, self.chart.v(a, mu))
    }

    /// 𝓛 = L·ω
    pub fn density(&self) -> Form {
        Form::volume(&self.chart).scale(&self.l)
    }
}

/// dⁿx_μ = i(∂/∂x^μ)ω
pub fn volume_slot(chart: &Arc<JetChart>, mu: usize) -> Form {
    interior(&VectorField::coordinate(chart, chart.x_index(mu)), &Form::volume(chart)).expect("ω has degree ≥ 1")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartanForms {
    /// ϑ_L
    pub canonical: Form,
    /// Θ_L
    pub theta: Form,
    /// Ω_L = −dΘ_L
    pub omega: Form,
}

/// The local coordinate expressions of ϑ_L, Θ_L and Ω_L.
pub fn cartan_forms(lag: &Lagrangian) -> CartanForms {
    let c = &lag.chart;
    let omega_vol = Form::volume(c);
    let mut canonical = Form::zero(c, c.base_dim());
    let mut theta = Form::zero(c, c.base_dim());
    let mut pv = Vec::new();
    for a in 0..c.fiber_dim() {
        for mu in 0..c.base_dim() {
            let p = lag.momentum(a, mu);
            if p.is_zero() {
                continue;
            }
            let slot = volume_slot(c, mu);
            canonical = &canonical + &wedge(&contact_form(c, a), &slot).unwrap().scale(&p);
            theta = &theta + &wedge(&Form::coordinate(c, c.y_index(a)), &slot).unwrap().scale(&p);
            pv.push(&p * Expr::sym(c.v(a, mu)));
        }
    }
    let energy = Expr::sum(pv) - &lag.l;
    theta = &theta - &omega_vol.scale(&energy);
    let omega = -&exterior_d(&theta);
    CartanForms { canonical, theta, omega }
}

/// ϑ_L = i(𝒱)d𝓛 computed by contraction.
pub fn canonical_form_intrinsic(lag: &Lagrangian) -> Form {
    vertical_endo_v(&lag.chart).contract(&exterior_d(&lag.density())).expect("same chart")
}

/// Euler–Lagrange expressions, one per fiber coordinate, over the
/// second-jet symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ElSystem {
    pub chart: Arc<JetChart>,
    pub equations: Vec<Expr>,
}

impl ElSystem {
    /// Base-chart residuals along a section of E.
    pub fn along(&self, phi: &SectionE) -> Vec<Expr> {
        let b = phi.jet_bindings();
        self.equations.iter().map(|e| e.substitute(&b)).collect()
    }
}

impl fmt::Display for ElSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, e) in self.equations.iter().enumerate() {
            if a > 0 {
                writeln!(f)?;
            }
            write!(f, "EL[{}] = {e}", self.chart.y(a))?;
        }
        Ok(())
    }
}

/// D_μ = ∂/∂x^μ + v^B_μ ∂/∂y^B + w^B_νμ ∂/∂v^B_ν
pub fn total_derivative(chart: &JetChart, e: &Expr, mu: usize) -> Expr {
    let mut t = vec![d(e, chart.x(mu))];
    for b in 0..chart.fiber_dim() {
        t.push(Expr::sym(chart.v(b, mu)) * d(e, chart.y(b)));
        for nu in 0..chart.base_dim() {
            t.push(Expr::sym(&chart.w(b, nu, mu)) * d(e, chart.v(b, nu)));
        }
    }
    Expr::sum(t)
}

/// EL_A = ∂L/∂y^A − D_μ(∂L/∂v^A_μ)
pub fn derive_el(lag: &Lagrangian) -> ElSystem {
    let c = &lag.chart;
    let equations = (0..c.fiber_dim())
        .map(|a| {
            let mut t = vec![d(&lag.l, c.y(a))];
            for mu in 0..c.base_dim() {
                t.push(-total_derivative(c, &lag.momentum(a, mu), mu));
            }
            Expr::sum(t)
        })
        .collect();
    ElSystem { chart: c.clone(), equations }
}

/// ∂L/∂y^A∘j¹φ − ∂/∂x^μ(∂L/∂v^A_μ∘j¹φ), computed on the base directly.
pub fn el_along_section(lag: &Lagrangian, phi: &SectionE) -> Vec<Expr> {
    let c = &lag.chart;
    let b = phi.jet_bindings();
    (0..c.fiber_dim())
        .map(|a| {
            let mut t = vec![d(&lag.l, c.y(a)).substitute(&b)];
            for mu in 0..c.base_dim() {
                t.push(-d(&lag.momentum(a, mu).substitute(&b), c.x(mu)));
            }
            Expr::sum(t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDensity {
    pub e: Expr,
    pub connection: Connection,
}

/// E = ∂L/∂v^A_μ (v^A_μ − Γ^A_μ) − L
pub fn energy_density(lag: &Lagrangian, conn: &Connection) -> Result<EnergyDensity, GeometryError> {
    same_chart(&lag.chart, &conn.chart)?;
    let c = &lag.chart;
    let mut t = vec![-lag.l.clone()];
    for a in 0..c.fiber_dim() {
        for mu in 0..c.base_dim() {
            t.push(lag.momentum(a, mu) * (Expr::sym(c.v(a, mu)) - &conn.gamma[a][mu]));
        }
    }
    Ok(EnergyDensity { e: Expr::sum(t), connection: conn.clone() })
}

/// ℰ = i(𝒮 − 𝒱)d𝓛 − 𝓛 computed by contraction.
pub fn energy_density_intrinsic(lag: &Lagrangian, conn: &Connection) -> Result<Form, GeometryError> {
    let c = &lag.chart;
    let s = vertical_endo_s(c, conn)?;
    let diff = s.difference(&vertical_endo_v(c));
    let contracted = diff.contract(&exterior_d(&lag.density()))?;
    Ok(contracted.try_sub(&lag.density())?)
}

/// ℰ^{∇+γ} − ℰ^∇ = −γ^A_μ ∂L/∂v^A_μ ω
pub fn legendre_difference(lag: &Lagrangian, gamma: &[Vec<Expr>]) -> Result<Form, GeometryError> {
    let c = &lag.chart;
    let probe = Connection::new(c, gamma.to_vec()).map_err(|e| GeometryError::Invalid(e.to_string()))?;
    let mut t = Vec::new();
    for a in 0..c.fiber_dim() {
        for mu in 0..c.base_dim() {
            t.push(-(&probe.gamma[a][mu] * lag.momentum(a, mu)));
        }
    }
    Ok(Form::volume(c).scale(&Expr::sum(t)))
}

/// Solution set of a linear system in the b-slots.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub rank: usize,
    /// Pivot unknowns in terms of the free ones.
    pub pivots: BTreeMap<Symbol, Expr>,
    pub free: Vec<Symbol>,
    /// Combinations left over after elimination; nonzero means the system
    /// has no solution.
    pub inconsistencies: Vec<Expr>,
}

impl LinearSolution {
    pub fn consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }

    pub fn unique(&self) -> bool {
        self.free.is_empty() && self.consistent()
    }
}

/// The reduced jet-field equations ∂L/∂y^A − D^𝒴_μ(∂L/∂v^A_μ) = 0 for a
/// SOPDE ansatz, with G^A_ρμ written as the repeated-jet slot `b(y,x_ρ,x_μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetFieldEquations {
    pub chart: Arc<JetChart>,
    pub equations: Vec<Expr>,
    pub unknowns: Vec<Symbol>,
    /// `None` when the Hessian in v is not a constant rational matrix.
    pub solution: Option<LinearSolution>,
}

impl JetFieldEquations {
    /// G table of a SOPDE jet field realizing the solution with every free
    /// slot set to `free_value`.
    pub fn jet_field(&self, free_value: &Expr) -> Option<JetField2> {
        let sol = self.solution.as_ref().filter(|s| s.consistent())?;
        let c = &self.chart;
        let free: BTreeMap<Symbol, Expr> = sol.free.iter().map(|s| (s.clone(), free_value.clone())).collect();
        let g = (0..c.fiber_dim())
            .map(|a| {
                (0..c.base_dim())
                    .map(|rho| {
                        (0..c.base_dim())
                            .map(|mu| {
                                let s = c.b(a, rho, mu);
                                match sol.pivots.get(&s) {
                                    Some(e) => e.substitute(&free),
                                    None => free_value.clone(),
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        JetField2::sopde(c, g).ok()
    }
}

fn jetfield_operator(lag: &Lagrangian, slot: &dyn Fn(usize, usize, usize) -> Expr) -> Vec<Expr> {
    let c = &lag.chart;
    (0..c.fiber_dim())
        .map(|a| {
            let mut t = vec![d(&lag.l, c.y(a))];
            for mu in 0..c.base_dim() {
                let p = lag.momentum(a, mu);
                t.push(-d(&p, c.x(mu)));
                for b in 0..c.fiber_dim() {
                    t.push(-(Expr::sym(c.v(b, mu)) * d(&p, c.y(b))));
                    for rho in 0..c.base_dim() {
                        t.push(-(slot(b, rho, mu) * d(&p, c.v(b, rho))));
                    }
                }
            }
            Expr::sum(t)
        })
        .collect()
}

pub fn jetfield_el(lag: &Lagrangian) -> JetFieldEquations {
    let c = &lag.chart;
    let equations = jetfield_operator(lag, &|b, rho, mu| Expr::sym(&c.b(b, rho, mu)));
    let mut unknowns = Vec::new();
    for a in 0..c.fiber_dim() {
        for rho in 0..c.base_dim() {
            for mu in 0..c.base_dim() {
                unknowns.push(c.b(a, rho, mu));
            }
        }
    }
    let solution = solve_linear(&equations, &unknowns);
    JetFieldEquations { chart: c.clone(), equations, unknowns, solution }
}

/// Gaussian elimination over exact rationals when every coefficient of
/// every unknown is a rational constant; right-hand sides stay symbolic.
fn solve_linear(equations: &[Expr], unknowns: &[Symbol]) -> Option<LinearSolution> {
    let zero_all: BTreeMap<Symbol, Expr> = unknowns.iter().map(|s| (s.clone(), Expr::zero())).collect();
    let mut rows: Vec<(Vec<Rational>, Expr)> = Vec::new();
    for eq in equations {
        let mut coeffs = Vec::with_capacity(unknowns.len());
        for u in unknowns {
            coeffs.push(d(eq, u).as_rational()?.clone());
        }
        // Σ k·u + r = 0, so Σ k·u = −r
        rows.push((coeffs, -eq.substitute(&zero_all)));
    }
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..unknowns.len() {
        let Some(pr) = (r..rows.len()).find(|&i| !rows[i].0[col].is_zero()) else { continue };
        rows.swap(r, pr);
        let inv = Rational::one() / rows[r].0[col].clone();
        let (coeffs, rhs) = rows[r].clone();
        let coeffs: Vec<Rational> = coeffs.iter().map(|k| k * &inv).collect();
        let rhs = rhs * Expr::num(inv);
        rows[r] = (coeffs.clone(), rhs.clone());
        for i in 0..rows.len() {
            if i == r || rows[i].0[col].is_zero() {
                continue;
            }
            let k = rows[i].0[col].clone();
            for j in 0..unknowns.len() {
                let delta = &k * &coeffs[j];
                rows[i].0[j] -= delta;
            }
            rows[i].1 = &rows[i].1 - &rhs * Expr::num(k);
        }
        pivot_cols.push(col);
        r += 1;
    }
    let inconsistencies = rows[r..].iter().map(|(_, rhs)| rhs.clone()).filter(|e| !e.is_zero()).collect();
    let free: Vec<Symbol> =
        (0..unknowns.len()).filter(|c| !pivot_cols.contains(c)).map(|c| unknowns[c].clone()).collect();
    let mut pivots = BTreeMap::new();
    for (i, &col) in pivot_cols.iter().enumerate() {
        let mut t = vec![rows[i].1.clone()];
        for f in &free {
            let j = unknowns.iter().position(|u| u == f).unwrap();
            let k = &rows[i].0[j];
            if !k.is_zero() {
                t.push(-(Expr::num(k.clone()) * Expr::sym(f)));
            }
        }
        pivots.insert(unknowns[col].clone(), Expr::sum(t));
    }
    Some(LinearSolution { rank: pivot_cols.len(), pivots, free, inconsistencies })
}

/// Result of testing a concrete jet field against the field equations.
#[derive(Debug, Clone, PartialEq)]
pub struct JetFieldCheck {
    pub sopde: bool,
    /// i(𝒴)Ω_L
    pub contraction: Form,
    /// Reduced equations with G substituted (SOPDE fields only).
    pub reduced: Option<Vec<Expr>>,
}

impl JetFieldCheck {
    pub fn holds(&self) -> bool {
        self.sopde && self.contraction.is_zero() && self.reduced.iter().flatten().all(Expr::is_zero)
    }
}

pub fn check_jetfield(lag: &Lagrangian, y: &JetField2) -> Result<JetFieldCheck, GeometryError> {
    same_chart(&lag.chart, &y.chart)?;
    let sopde = sopde_project(y).is_sopde;
    let contraction = jetfield_contract(y, &cartan_forms(lag).omega)?;
    let reduced = sopde.then(|| jetfield_operator(lag, &|b, rho, mu| y.g[b][rho][mu].clone()));
    Ok(JetFieldCheck { sopde, contraction, reduced })
}
