//! Ehresmann connections on π and jet fields in J¹J¹E.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::canonical::{same_chart, GeometryError};
use crate::forms::{interior, Form, VectorField, VectorValuedForm};
use crate::jetchart::{ChartError, JetChart, SectionE, SectionJ1};
use crate::symexpr::{Expr, Symbol};

fn d(e: &Expr, s: &Symbol) -> Expr {
    e.diff(s).expect("coefficient has no derivative rule")
}

/// ∇ = dx^μ ⊗ (∂/∂x^μ + Γ^A_μ ∂/∂y^A)
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub chart: Arc<JetChart>,
    /// `gamma[A][μ]`, functions of (x, y).
    pub gamma: Vec<Vec<Expr>>,
}

impl Connection {
    pub fn new(chart: &Arc<JetChart>, gamma: Vec<Vec<Expr>>) -> Result<Self, ChartError> {
        if gamma.len() != chart.fiber_dim() {
            return Err(ChartError::Arity { expected: chart.fiber_dim(), got: gamma.len() });
        }
        for (a, row) in gamma.iter().enumerate() {
            if row.len() != chart.base_dim() {
                return Err(ChartError::Arity { expected: chart.base_dim(), got: row.len() });
            }
            for e in row {
                chart.check_scope(&format!("Gamma[{}]", chart.y(a)), e, "base or fiber", |s| chart.is_e_symbol(s))?;
            }
        }
        Ok(Connection { chart: chart.clone(), gamma })
    }

    pub fn flat(chart: &Arc<JetChart>) -> Self {
        Connection { chart: chart.clone(), gamma: vec![vec![Expr::zero(); chart.base_dim()]; chart.fiber_dim()] }
    }

    /// ∇ + γ
    pub fn shifted(&self, gamma: &[Vec<Expr>]) -> Self {
        let g = self
            .gamma
            .iter()
            .zip(gamma)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a + b).collect())
            .collect();
        Connection { chart: self.chart.clone(), gamma: g }
    }

    /// H_μ = ∂/∂x^μ + Γ^A_μ ∂/∂y^A
    pub fn horizontal_lift(&self, mu: usize) -> VectorField {
        let c = &self.chart;
        let mut h = VectorField::coordinate(c, c.x_index(mu));
        for a in 0..c.fiber_dim() {
            h.set(c.y_index(a), self.gamma[a][mu].clone());
        }
        h
    }
}

fn check_e_field(x: &VectorField) -> Result<(), GeometryError> {
    if x.components().keys().any(|&i| !x.chart().is_e_coord(i)) {
        return Err(GeometryError::NotOnEChart);
    }
    Ok(())
}

/// X = f^μ H_μ + (g^A − f^μ Γ^A_μ) ∂/∂y^A
pub fn horizontal_split(conn: &Connection, x: &VectorField) -> Result<(VectorField, VectorField), GeometryError> {
    same_chart(&conn.chart, x.chart())?;
    check_e_field(x)?;
    let c = &conn.chart;
    let mut horizontal = VectorField::zero(c);
    for mu in 0..c.base_dim() {
        horizontal = horizontal.try_add(&conn.horizontal_lift(mu).scale(&x.component(c.x_index(mu))))?;
    }
    let vertical = x.try_sub(&horizontal)?;
    Ok((horizontal, vertical))
}

/// ℛ as a V(π)-valued 2-form: component B is Σ_{μ<η} R^B_μη dx^μ ∧ dx^η.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    pub chart: Arc<JetChart>,
    pub form: VectorValuedForm,
}

impl Curvature {
    pub fn coefficient(&self, b: usize, mu: usize, eta: usize) -> Expr {
        self.form.components[b].coefficient(&[self.chart.x_index(mu), self.chart.x_index(eta)])
    }

    pub fn is_zero(&self) -> bool {
        self.form.is_zero()
    }
}

/// R^B_μη = ∂_μΓ^B_η − ∂_ηΓ^B_μ + Γ^A_μ ∂_AΓ^B_η − Γ^A_η ∂_AΓ^B_μ
pub fn curvature(conn: &Connection) -> Curvature {
    let c = &conn.chart;
    let g = &conn.gamma;
    let components = (0..c.fiber_dim())
        .map(|b| {
            let mut f = Form::zero(c, 2);
            for mu in 0..c.base_dim() {
                for eta in mu + 1..c.base_dim() {
                    let mut t = vec![d(&g[b][eta], c.x(mu)), -d(&g[b][mu], c.x(eta))];
                    for a in 0..c.fiber_dim() {
                        t.push(&g[a][mu] * d(&g[b][eta], c.y(a)));
                        t.push(-(&g[a][eta] * d(&g[b][mu], c.y(a))));
                    }
                    f = &f + &Form::monomial(c, &[c.x_index(mu), c.x_index(eta)], Expr::sum(t));
                }
            }
            f
        })
        .collect();
    Curvature {
        chart: c.clone(),
        form: VectorValuedForm { frame: c.fiber_names().iter().map(|y| format!("D[{y}]")).collect(), components },
    }
}

/// The ∂/∂y parts of [H_μ, H_η], assembled like [`curvature`].
pub fn bracket_curvature(conn: &Connection) -> Curvature {
    let c = &conn.chart;
    let mut components = vec![Form::zero(c, 2); c.fiber_dim()];
    for mu in 0..c.base_dim() {
        for eta in mu + 1..c.base_dim() {
            let br = conn.horizontal_lift(mu).bracket(&conn.horizontal_lift(eta)).expect("same chart");
            for (b, comp) in components.iter_mut().enumerate() {
                let m = Form::monomial(c, &[c.x_index(mu), c.x_index(eta)], br.component(c.y_index(b)));
                *comp = &*comp + &m;
            }
        }
    }
    Curvature {
        chart: c.clone(),
        form: VectorValuedForm { frame: c.fiber_names().iter().map(|y| format!("D[{y}]")).collect(), components },
    }
}

fn e_bindings(phi: &SectionE) -> BTreeMap<Symbol, Expr> {
    phi.chart.fiber_names().iter().cloned().zip(phi.phi.iter().cloned()).collect()
}

/// r^A_μ = ∂_μφ^A − Γ^A_μ ∘ φ
pub fn integral_residual(conn: &Connection, phi: &SectionE) -> Result<Vec<Vec<Expr>>, GeometryError> {
    same_chart(&conn.chart, &phi.chart)?;
    let c = &conn.chart;
    let b = e_bindings(phi);
    Ok((0..c.fiber_dim())
        .map(|a| (0..c.base_dim()).map(|mu| phi.first_derivative(a, mu) - conn.gamma[a][mu].substitute(&b)).collect())
        .collect())
}

/// ∂_η(Γ^A_μ∘φ) − ∂_μ(Γ^A_η∘φ) for μ < η, keyed by (A, μ, η). These must
/// vanish for any integral section.
pub fn mixed_partial_obstruction(
    conn: &Connection,
    phi: &SectionE,
) -> Result<BTreeMap<(usize, usize, usize), Expr>, GeometryError> {
    same_chart(&conn.chart, &phi.chart)?;
    let c = &conn.chart;
    let b = e_bindings(phi);
    let mut out = BTreeMap::new();
    for a in 0..c.fiber_dim() {
        for mu in 0..c.base_dim() {
            for eta in mu + 1..c.base_dim() {
                let lhs = d(&conn.gamma[a][mu].substitute(&b), c.x(eta));
                let rhs = d(&conn.gamma[a][eta].substitute(&b), c.x(mu));
                out.insert((a, mu, eta), lhs - rhs);
            }
        }
    }
    Ok(out)
}

/// 𝒴 = (F^A_ρ, G^A_ρν) on J¹E.
#[derive(Debug, Clone, PartialEq)]
pub struct JetField2 {
    pub chart: Arc<JetChart>,
    /// `f[A][ρ]`
    pub f: Vec<Vec<Expr>>,
    /// `g[A][ρ][ν]`
    pub g: Vec<Vec<Vec<Expr>>>,
}

impl JetField2 {
    pub fn new(chart: &Arc<JetChart>, f: Vec<Vec<Expr>>, g: Vec<Vec<Vec<Expr>>>) -> Result<Self, ChartError> {
        let (nf, nb) = (chart.fiber_dim(), chart.base_dim());
        let arity = |got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(ChartError::Arity { expected, got })
            }
        };
        arity(f.len(), nf)?;
        arity(g.len(), nf)?;
        for a in 0..nf {
            arity(f[a].len(), nb)?;
            arity(g[a].len(), nb)?;
            for rho in 0..nb {
                arity(g[a][rho].len(), nb)?;
                let name = format!("F[{}]", chart.y(a));
                chart.check_scope(&name, &f[a][rho], "jet", |s| chart.is_jet_symbol(s))?;
                for e in &g[a][rho] {
                    let name = format!("G[{}]", chart.y(a));
                    chart.check_scope(&name, e, "jet", |s| chart.is_jet_symbol(s))?;
                }
            }
        }
        Ok(JetField2 { chart: chart.clone(), f, g })
    }

    /// SOPDE with the given G table.
    pub fn sopde(chart: &Arc<JetChart>, g: Vec<Vec<Vec<Expr>>>) -> Result<Self, ChartError> {
        let f = (0..chart.fiber_dim())
            .map(|a| (0..chart.base_dim()).map(|rho| Expr::sym(chart.v(a, rho))).collect())
            .collect();
        JetField2::new(chart, f, g)
    }

    /// H_μ = ∂/∂x^μ + F^A_μ ∂/∂y^A + G^A_ρμ ∂/∂v^A_ρ
    pub fn horizontal_frame(&self) -> Vec<VectorField> {
        let c = &self.chart;
        (0..c.base_dim())
            .map(|mu| {
                let mut h = VectorField::coordinate(c, c.x_index(mu));
                for a in 0..c.fiber_dim() {
                    h.set(c.y_index(a), self.f[a][mu].clone());
                    for rho in 0..c.base_dim() {
                        h.set(c.v_index(a, rho), self.g[a][rho][mu].clone());
                    }
                }
                h
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SopdeReport {
    pub projected: Vec<Vec<Expr>>,
    pub is_sopde: bool,
}

pub fn sopde_project(y: &JetField2) -> SopdeReport {
    let c = &y.chart;
    let is_sopde = (0..c.fiber_dim())
        .all(|a| (0..c.base_dim()).all(|rho| (&y.f[a][rho] - Expr::sym(c.v(a, rho))).is_zero()));
    SopdeReport { projected: y.f.clone(), is_sopde }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResidual2 {
    /// ∂_μ f^A − F^A_μ∘ψ
    pub f: Vec<Vec<Expr>>,
    /// ∂_μ g^A_ρ − G^A_ρμ∘ψ, indexed `[A][ρ][μ]`
    pub g: Vec<Vec<Vec<Expr>>>,
}

impl IntegralResidual2 {
    pub fn is_zero(&self) -> bool {
        self.f.iter().flatten().all(Expr::is_zero) && self.g.iter().flatten().flatten().all(Expr::is_zero)
    }

    pub fn all(&self) -> Vec<Expr> {
        self.f.iter().flatten().chain(self.g.iter().flatten().flatten()).cloned().collect()
    }
}

pub fn integral_residual2(y: &JetField2, psi: &SectionJ1) -> Result<IntegralResidual2, GeometryError> {
    same_chart(&y.chart, &psi.chart)?;
    let c = &y.chart;
    let b = psi.bindings();
    let f = (0..c.fiber_dim())
        .map(|a| (0..c.base_dim()).map(|mu| d(&psi.f[a], c.x(mu)) - y.f[a][mu].substitute(&b)).collect())
        .collect();
    let g = (0..c.fiber_dim())
        .map(|a| {
            (0..c.base_dim())
                .map(|rho| {
                    (0..c.base_dim())
                        .map(|mu| d(&psi.g[a][rho], c.x(mu)) - y.g[a][rho][mu].substitute(&b))
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(IntegralResidual2 { f, g })
}

/// i(𝒴)ξ with the coordinate frame Z_μ = ∂/∂x^μ: ξ(H_0, …, H_n, ·).
/// Forms of degree below n + 1 contract to zero.
pub fn jetfield_contract(y: &JetField2, xi: &Form) -> Result<Form, GeometryError> {
    same_chart(&y.chart, xi.chart())?;
    let nb = y.chart.base_dim();
    if xi.degree() < nb {
        return Ok(Form::zero(xi.chart(), 0));
    }
    let mut acc = xi.clone();
    for h in y.horizontal_frame() {
        acc = interior(&h, &acc)?;
    }
    Ok(acc)
}
