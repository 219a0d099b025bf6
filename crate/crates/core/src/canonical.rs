//! Canonical geometry of J¹E: structure form, contact module, vertical
//! endomorphisms, and prolongation of fields and fiber maps.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::connection::Connection;
use crate::forms::{
    interior, pullback_by_section, pullback_by_substitution, wedge, FiberMap, Form, FormError, VectorField,
    VectorValuedForm,
};
use crate::jetchart::{JetChart, SectionE, SectionJ1};
use crate::symexpr::{Expr, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("vector field has components along jet coordinates")]
    NotOnEChart,
    #[error("map is not fiber preserving: {0}")]
    NotFiberPreserving(String),
    #[error("declared base inverse does not invert the base map: {0}")]
    InverseMismatch(String),
    #[error("hypothesis ({which}) violated; residual {residual}")]
    HypothesisViolated { which: char, residual: String },
    #[error("{0}")]
    Invalid(String),
}

impl GeometryError {
    pub fn chart_mismatch() -> Self {
        GeometryError::Form(FormError::ChartMismatch)
    }
}

pub(crate) fn same_chart(a: &Arc<JetChart>, b: &Arc<JetChart>) -> Result<(), GeometryError> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(GeometryError::chart_mismatch())
    }
}

/// θ^A = dy^A − v^A_μ dx^μ
pub fn contact_form(chart: &Arc<JetChart>, a: usize) -> Form {
    let mut out = Form::coordinate(chart, chart.y_index(a));
    for mu in 0..chart.base_dim() {
        let term = Form::coordinate(chart, chart.x_index(mu)).scale(&Expr::sym(chart.v(a, mu)));
        out = &out - &term;
    }
    out
}

pub fn contact_forms(chart: &Arc<JetChart>) -> Vec<Form> {
    (0..chart.fiber_dim()).map(|a| contact_form(chart, a)).collect()
}

/// θ = θ^A ⊗ ∂/∂y^A
pub fn structure_form(chart: &Arc<JetChart>) -> VectorValuedForm {
    VectorValuedForm {
        frame: chart.fiber_names().iter().map(|y| format!("D[{y}]")).collect(),
        components: contact_forms(chart),
    }
}

/// Matrix of d^v φ: T E → V(π) at points of Im φ. Rows are fiber indices;
/// columns follow the E-coordinate order (base, then fiber).
pub fn vertical_differential(phi: &SectionE) -> Vec<Vec<Expr>> {
    let c = &phi.chart;
    (0..c.fiber_dim())
        .map(|a| {
            let mut row: Vec<Expr> = (0..c.base_dim()).map(|mu| -phi.first_derivative(a, mu)).collect();
            row.extend((0..c.fiber_dim()).map(|b| if a == b { Expr::one() } else { Expr::zero() }));
            row
        })
        .collect()
}

/// `a = Σ θ^A ∧ combination[A] + reduced`, with `reduced` free of dy.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactReduction {
    pub reduced: Form,
    pub combination: BTreeMap<usize, Form>,
}

impl ContactReduction {
    pub fn in_ideal(&self) -> bool {
        self.reduced.is_zero()
    }
}

/// Extended index: contact generators θ^A come first, then chart coordinates.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Gen {
    Theta(usize),
    Coord(usize),
}

fn sort_gens(idx: &mut [Gen]) -> Option<i64> {
    let mut sign = 1;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] >= idx[j] {
            if idx[j - 1] == idx[j] {
                return None;
            }
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    Some(sign)
}

pub fn contact_reduce(a: &Form) -> ContactReduction {
    let chart = a.chart().clone();
    // Expand every dy^A as θ^A + v^A_μ dx^μ.
    let mut expanded: BTreeMap<Vec<Gen>, Expr> = BTreeMap::new();
    for (key, c) in a.terms() {
        let mut partial: Vec<(Vec<Gen>, Expr)> = vec![(Vec::new(), c.clone())];
        for &i in key {
            let options: Vec<(Gen, Expr)> = match chart.coord(i) {
                crate::jetchart::Coord::Fiber(f) => {
                    let mut o = vec![(Gen::Theta(f), Expr::one())];
                    for mu in 0..chart.base_dim() {
                        o.push((Gen::Coord(chart.x_index(mu)), Expr::sym(chart.v(f, mu))));
                    }
                    o
                }
                _ => vec![(Gen::Coord(i), Expr::one())],
            };
            let mut next = Vec::new();
            for (gens, coeff) in &partial {
                for (g, k) in &options {
                    let mut gs = gens.clone();
                    gs.push(*g);
                    next.push((gs, coeff * k));
                }
            }
            partial = next;
        }
        for (mut gens, coeff) in partial {
            if let Some(sign) = sort_gens(&mut gens) {
                let entry = expanded.entry(gens).or_insert_with(Expr::zero);
                *entry = &*entry + coeff * Expr::int(sign);
            }
        }
    }
    let mut reduced = Form::zero(&chart, a.degree());
    let mut combination: BTreeMap<usize, Form> = BTreeMap::new();
    for (gens, coeff) in expanded {
        if coeff.is_zero() {
            continue;
        }
        match gens.first() {
            Some(Gen::Theta(lead)) => {
                let mut rest = Form::scalar(&chart, coeff);
                for g in &gens[1..] {
                    let f = match g {
                        Gen::Theta(b) => contact_form(&chart, *b),
                        Gen::Coord(i) => Form::coordinate(&chart, *i),
                    };
                    rest = wedge(&rest, &f).expect("same chart");
                }
                let slot = combination.entry(*lead).or_insert_with(|| Form::zero(&chart, a.degree() - 1));
                *slot = &*slot + &rest;
            }
            _ => {
                let idx: Vec<usize> = gens
                    .iter()
                    .map(|g| match g {
                        Gen::Coord(i) => *i,
                        Gen::Theta(_) => unreachable!(),
                    })
                    .collect();
                reduced = &reduced + &Form::monomial(&chart, &idx, coeff);
            }
        }
    }
    combination.retain(|_, f| !f.is_zero());
    ContactReduction { reduced, combination }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyReport {
    pub holonomic: bool,
    pub residuals: Vec<Form>,
}

/// ψ is holonomic iff ψ*θ = 0.
pub fn is_holonomic(psi: &SectionJ1) -> HolonomyReport {
    let residuals: Vec<Form> = contact_forms(&psi.chart)
        .iter()
        .map(|t| pullback_by_section(psi, t).expect("same chart"))
        .collect();
    HolonomyReport { holonomic: residuals.iter().all(Form::is_zero), residuals }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndoKind {
    S,
    V,
    /// S − V for a fixed connection.
    Difference,
}

/// `Σ_{A,ν} covector^A ⊗ ∂/∂v^A_ν ⊗ ∂/∂x^ν`
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalEndomorphism {
    pub kind: EndoKind,
    pub covectors: Vec<Form>,
}

impl VerticalEndomorphism {
    /// The contraction pattern used for i(·)d𝓛: each term contributes
    /// covector^A ∧ i(∂/∂x^ν) i(∂/∂v^A_ν) ξ.
    pub fn contract(&self, xi: &Form) -> Result<Form, GeometryError> {
        let chart = xi.chart().clone();
        if self.covectors.len() != chart.fiber_dim() {
            return Err(GeometryError::chart_mismatch());
        }
        let mut out = Form::zero(&chart, xi.degree().saturating_sub(1));
        if xi.degree() < 2 {
            return Ok(out);
        }
        for (a, cov) in self.covectors.iter().enumerate() {
            cov.same_chart(xi)?;
            for nu in 0..chart.base_dim() {
                let dv = VectorField::coordinate(&chart, chart.v_index(a, nu));
                let dx = VectorField::coordinate(&chart, chart.x_index(nu));
                let inner = interior(&dx, &interior(&dv, xi)?)?;
                out = out.try_add(&wedge(cov, &inner)?)?;
            }
        }
        Ok(out)
    }

    pub fn difference(&self, other: &VerticalEndomorphism) -> VerticalEndomorphism {
        VerticalEndomorphism {
            kind: EndoKind::Difference,
            covectors: self.covectors.iter().zip(&other.covectors).map(|(a, b)| a - b).collect(),
        }
    }
}

/// 𝒱 = θ^A ⊗ ∂/∂v^A_ν ⊗ ∂/∂x^ν
pub fn vertical_endo_v(chart: &Arc<JetChart>) -> VerticalEndomorphism {
    VerticalEndomorphism { kind: EndoKind::V, covectors: contact_forms(chart) }
}

/// 𝒮 with ξ^A embedded as dy^A − Γ^A_μ dx^μ.
pub fn vertical_endo_s(chart: &Arc<JetChart>, conn: &Connection) -> Result<VerticalEndomorphism, GeometryError> {
    same_chart(chart, &conn.chart)?;
    let covectors = (0..chart.fiber_dim())
        .map(|a| {
            let mut f = Form::coordinate(chart, chart.y_index(a));
            for mu in 0..chart.base_dim() {
                f = &f - &Form::coordinate(chart, chart.x_index(mu)).scale(&conn.gamma[a][mu]);
            }
            f
        })
        .collect();
    Ok(VerticalEndomorphism { kind: EndoKind::S, covectors })
}

/// j¹Z for Z = α^μ ∂/∂x^μ + β^A ∂/∂y^A.
pub fn prolong_vectorfield(z: &VectorField) -> Result<VectorField, GeometryError> {
    let c = z.chart().clone();
    if z.components().keys().any(|&i| !c.is_e_coord(i)) {
        return Err(GeometryError::NotOnEChart);
    }
    for e in z.components().values() {
        if e.free_symbols().iter().any(|s| c.is_jet_symbol(s) && !c.is_e_symbol(s)) {
            return Err(GeometryError::NotOnEChart);
        }
    }
    let alpha: Vec<Expr> = (0..c.base_dim()).map(|mu| z.component(c.x_index(mu))).collect();
    let beta: Vec<Expr> = (0..c.fiber_dim()).map(|a| z.component(c.y_index(a))).collect();
    let d = |e: &Expr, s: &Symbol| e.diff(s).expect("coefficient has no derivative rule");
    let mut out = z.clone();
    for a in 0..c.fiber_dim() {
        for mu in 0..c.base_dim() {
            let mut terms = vec![d(&beta[a], c.x(mu))];
            for (rho, al) in alpha.iter().enumerate() {
                let mut inner = vec![d(al, c.x(mu))];
                for b in 0..c.fiber_dim() {
                    inner.push(Expr::sym(c.v(b, mu)) * d(al, c.y(b)));
                }
                terms.push(-(Expr::sym(c.v(a, rho)) * Expr::sum(inner)));
            }
            for b in 0..c.fiber_dim() {
                terms.push(Expr::sym(c.v(b, mu)) * d(&beta[a], c.y(b)));
            }
            out.set(c.v_index(a, mu), Expr::sum(terms));
        }
    }
    Ok(out)
}

/// A map of J¹E given by the images of every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct JetMap {
    pub chart: Arc<JetChart>,
    pub images: BTreeMap<usize, Expr>,
}

impl JetMap {
    pub fn identity(chart: &Arc<JetChart>) -> Self {
        let images = chart.coords().iter().enumerate().map(|(i, s)| (i, Expr::sym(s))).collect();
        JetMap { chart: chart.clone(), images }
    }

    pub fn image(&self, i: usize) -> Expr {
        self.images.get(&i).cloned().unwrap_or_else(|| Expr::sym(&self.chart.coords()[i]))
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &JetMap) -> Result<JetMap, GeometryError> {
        same_chart(&self.chart, &inner.chart)?;
        let bindings: BTreeMap<Symbol, Expr> =
            (0..self.chart.dim()).map(|i| (self.chart.coords()[i].clone(), inner.image(i))).collect();
        let images = (0..self.chart.dim()).map(|i| (i, self.image(i).substitute(&bindings))).collect();
        Ok(JetMap { chart: self.chart.clone(), images })
    }

    pub fn pullback(&self, a: &Form) -> Result<Form, GeometryError> {
        same_chart(&self.chart, a.chart())?;
        Ok(pullback_by_substitution(a, &self.images))
    }

    /// f ∘ map for a scalar.
    pub fn pull_scalar(&self, f: &Expr) -> Expr {
        let bindings: BTreeMap<Symbol, Expr> =
            (0..self.chart.dim()).map(|i| (self.chart.coords()[i].clone(), self.image(i))).collect();
        f.substitute(&bindings)
    }
}

fn check_fiber_preserving(phi: &FiberMap) -> Result<(), GeometryError> {
    let c = &phi.chart;
    if phi.base.len() != c.base_dim() || phi.fiber.len() != c.fiber_dim() {
        return Err(GeometryError::Invalid("fiber map has the wrong number of components".into()));
    }
    for e in &phi.base {
        if let Some(s) = e.free_symbols().into_iter().find(|s| c.is_jet_symbol(s) && !c.is_base_symbol(s)) {
            return Err(GeometryError::NotFiberPreserving(format!("base component {e} depends on {s}")));
        }
    }
    for e in &phi.fiber {
        if let Some(s) = e.free_symbols().into_iter().find(|s| c.is_jet_symbol(s) && !c.is_e_symbol(s)) {
            return Err(GeometryError::NotFiberPreserving(format!("fiber component {e} depends on {s}")));
        }
    }
    Ok(())
}

/// j¹Φ. The declared base inverse must compose with Φ_M to the identity.
pub fn prolong_diffeo(phi: &FiberMap) -> Result<JetMap, GeometryError> {
    check_fiber_preserving(phi)?;
    let c = phi.chart.clone();
    let inverse = phi.base_inverse.as_ref().ok_or(FormError::MissingInverse)?;
    if inverse.len() != c.base_dim() {
        return Err(GeometryError::Invalid("base inverse has the wrong number of components".into()));
    }
    let to_image: BTreeMap<Symbol, Expr> =
        c.base_names().iter().cloned().zip(phi.base.iter().cloned()).collect();
    for (mu, inv) in inverse.iter().enumerate() {
        let back = inv.substitute(&to_image);
        if back != Expr::sym(c.x(mu)) {
            return Err(GeometryError::InverseMismatch(format!("{} ∘ Φ_M = {back}", c.x(mu))));
        }
    }
    let d = |e: &Expr, s: &Symbol| e.diff(s).expect("coefficient has no derivative rule");
    // (J^{-1})^ν_μ at Φ_M(x)
    let jinv: Vec<Vec<Expr>> = (0..c.base_dim())
        .map(|nu| (0..c.base_dim()).map(|mu| d(&inverse[nu], c.x(mu)).substitute(&to_image)).collect())
        .collect();
    let mut m = JetMap::identity(&c);
    for (k, v) in phi.e_images() {
        m.images.insert(k, v);
    }
    for a in 0..c.fiber_dim() {
        let total: Vec<Expr> = (0..c.base_dim())
            .map(|nu| {
                let mut t = vec![d(&phi.fiber[a], c.x(nu))];
                for b in 0..c.fiber_dim() {
                    t.push(d(&phi.fiber[a], c.y(b)) * Expr::sym(c.v(b, nu)));
                }
                Expr::sum(t)
            })
            .collect();
        for mu in 0..c.base_dim() {
            let v = Expr::sum((0..c.base_dim()).map(|nu| &total[nu] * &jinv[nu][mu]));
            m.images.insert(c.v_index(a, mu), v);
        }
    }
    Ok(m)
}

/// Φ' ∘ Φ as a fiber map.
pub fn compose_fiber_maps(outer: &FiberMap, inner: &FiberMap) -> Result<FiberMap, GeometryError> {
    same_chart(&outer.chart, &inner.chart)?;
    let c = &outer.chart;
    let inner_e: BTreeMap<Symbol, Expr> =
        inner.e_images().into_iter().map(|(i, e)| (c.coords()[i].clone(), e)).collect();
    let base = outer.base.iter().map(|e| e.substitute(&inner_e)).collect();
    let fiber = outer.fiber.iter().map(|e| e.substitute(&inner_e)).collect();
    let base_inverse = match (&inner.base_inverse, &outer.base_inverse) {
        (Some(ii), Some(oi)) => {
            let to_oi: BTreeMap<Symbol, Expr> = c.base_names().iter().cloned().zip(oi.iter().cloned()).collect();
            Some(ii.iter().map(|e| e.substitute(&to_oi)).collect())
        }
        _ => None,
    };
    Ok(FiberMap { chart: c.clone(), base, base_inverse, fiber })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::lie_derivative;
    use crate::jetchart::{make_chart, prolong_section};
    use crate::symexpr::parse_expr_with;
    use proptest::prelude::*;

    fn p(c: &JetChart, s: &str) -> Expr {
        parse_expr_with(s, c).unwrap()
    }

    fn d(c: &Arc<JetChart>, name: &str) -> Form {
        Form::d_name(c, name).unwrap()
    }

    #[test]
    fn structure_form_examples() {
        let mech = make_chart(&["t"], &["q"]).unwrap();
        let th = structure_form(&mech);
        assert_eq!(th.components[0], &d(&mech, "q") - &d(&mech, "t").scale(&p(&mech, "d(q,t)")));
        let wave = make_chart(&["x0", "x1"], &["u"]).unwrap();
        let expected = &(&d(&wave, "u") - &d(&wave, "x0").scale(&p(&wave, "d(u,x0)")))
            - &d(&wave, "x1").scale(&p(&wave, "d(u,x1)"));
        assert_eq!(structure_form(&wave).components[0], expected);
        let phi = SectionE::new(&wave, vec![p(&wave, "x0^3 - x0*x1")]).unwrap();
        let psi = prolong_section(&phi);
        assert!(structure_form(&wave).components.iter().all(|t| pullback_by_section(&psi, t).unwrap().is_zero()));
    }

    #[test]
    fn vertical_differential_examples() {
        let c = make_chart(&["t"], &["q"]).unwrap();
        let m = vertical_differential(&SectionE::new(&c, vec![p(&c, "t^2")]).unwrap());
        assert_eq!(m, vec![vec![p(&c, "-2*t"), Expr::one()]]);
        let m = vertical_differential(&SectionE::new(&c, vec![Expr::int(3)]).unwrap());
        assert_eq!(m, vec![vec![Expr::zero(), Expr::one()]]);
        // projector on a 2+2 chart: M² = M with M embedded as a square
        // matrix on T E (base rows zero)
        let c = make_chart(&["x0", "x1"], &["u", "w"]).unwrap();
        let phi = SectionE::new(&c, vec![p(&c, "x0*x1"), p(&c, "x1^2 - x0")]).unwrap();
        let rows = vertical_differential(&phi);
        let n = c.e_dim();
        let mut full = vec![vec![Expr::zero(); n]; n];
        for (a, row) in rows.iter().enumerate() {
            full[c.y_index(a)] = row.clone();
        }
        for i in 0..n {
            for j in 0..n {
                let sq = Expr::sum((0..n).map(|k| &full[i][k] * &full[k][j]));
                assert_eq!(sq, full[i][j]);
            }
        }
    }

    #[test]
    fn contact_reduce_examples() {
        let c = make_chart(&["x"], &["y"]).unwrap();
        let theta = contact_form(&c, 0);
        let r = contact_reduce(&theta);
        assert!(r.reduced.is_zero());
        assert_eq!(r.combination[&0], Form::scalar(&c, Expr::one()));
        let r = contact_reduce(&d(&c, "y"));
        assert_eq!(r.reduced, d(&c, "x").scale(&p(&c, "d(y,x)")));
        assert_eq!(r.combination[&0], Form::scalar(&c, Expr::one()));
        let r = contact_reduce(&d(&c, "x"));
        assert_eq!(r.reduced, d(&c, "x"));
        assert!(r.combination.is_empty());
    }

    #[test]
    fn contact_reduce_reassembles() {
        let c = make_chart(&["x0", "x1"], &["u", "w"]).unwrap();
        let a = wedge(&d(&c, "u"), &d(&c, "w")).unwrap().scale(&p(&c, "x0*d(u,x1)"));
        let b = wedge(&d(&c, "u"), &d(&c, "d(w,x0)")).unwrap();
        let form = &a + &b;
        let r = contact_reduce(&form);
        let mut back = r.reduced.clone();
        for (k, comb) in &r.combination {
            back = &back + &wedge(&contact_form(&c, *k), comb).unwrap();
        }
        assert_eq!(back, form);
        assert!(!r.reduced.mentions(|i| i == c.y_index(0) || i == c.y_index(1)));
    }

    #[test]
    fn holonomy() {
        let c = make_chart(&["t"], &["q"]).unwrap();
        let hol = SectionJ1::new(&c, vec![p(&c, "t^2")], vec![vec![p(&c, "2*t")]]).unwrap();
        assert!(is_holonomic(&hol).holonomic);
        let non = SectionJ1::new(&c, vec![p(&c, "t^2")], vec![vec![p(&c, "3*t")]]).unwrap();
        let r = is_holonomic(&non);
        assert!(!r.holonomic);
        assert_eq!(r.residuals[0], d(&c, "t").scale(&p(&c, "-t")));
    }

    #[test]
    fn vertical_endomorphisms() {
        let mech = JetChart::new(&["t"], &["q"], &["c"]).unwrap();
        let v = vertical_endo_v(&mech);
        assert_eq!(v.covectors, contact_forms(&mech));
        let dv = VectorField::coordinate(&mech, mech.v_index(0, 0));
        assert!(interior(&dv, &v.covectors[0]).unwrap().is_zero());

        let flat = Connection::new(&mech, vec![vec![Expr::zero()]]).unwrap();
        assert_eq!(vertical_endo_s(&mech, &flat).unwrap().covectors[0], d(&mech, "q"));
        let cst = Connection::new(&mech, vec![vec![Expr::var("c")]]).unwrap();
        let s = vertical_endo_s(&mech, &cst).unwrap();
        assert_eq!(s.covectors[0], &d(&mech, "q") - &d(&mech, "t").scale(&Expr::var("c")));
        let diff = s.difference(&v);
        assert_eq!(diff.covectors[0], d(&mech, "t").scale(&p(&mech, "d(q,t) - c")));

        let wave = make_chart(&["x0", "x1"], &["u"]).unwrap();
        assert_eq!(vertical_endo_v(&wave).covectors.len(), 1);
    }

    #[test]
    fn prolonged_fields() {
        let c = make_chart(&["x"], &["y"]).unwrap();
        let field = |x: &str, y: &str| VectorField::from_names(&c, &[("x", p(&c, x)), ("y", p(&c, y))]).unwrap();
        let j = prolong_vectorfield(&field("0", "x*y^2")).unwrap();
        assert_eq!(j.component(c.v_index(0, 0)), p(&c, "y^2 + 2*x*y*d(y,x)"));
        let j = prolong_vectorfield(&field("x", "0")).unwrap();
        assert_eq!(j.component(c.v_index(0, 0)), p(&c, "-d(y,x)"));
        let j = prolong_vectorfield(&field("y", "0")).unwrap();
        assert_eq!(j.component(c.v_index(0, 0)), p(&c, "-d(y,x)^2"));
        assert_eq!(j.component(0), p(&c, "y"));
        let bad = VectorField::from_names(&c, &[("d(y,x)", Expr::one())]).unwrap();
        assert_eq!(prolong_vectorfield(&bad), Err(GeometryError::NotOnEChart));
    }

    #[test]
    fn prolonged_diffeos() {
        let c = make_chart(&["x"], &["y"]).unwrap();
        let v = c.v_index(0, 0);
        let id = prolong_diffeo(&FiberMap::identity(&c)).unwrap();
        assert_eq!(id, JetMap::identity(&c));
        let mut shift = FiberMap::identity(&c);
        shift.fiber = vec![p(&c, "y + sin(x)")];
        assert_eq!(prolong_diffeo(&shift).unwrap().image(v), p(&c, "d(y,x) + cos(x)"));
        let mut scale = FiberMap::identity(&c);
        scale.fiber = vec![p(&c, "2*y")];
        assert_eq!(prolong_diffeo(&scale).unwrap().image(v), p(&c, "2*d(y,x)"));

        let mut affine = FiberMap::identity(&c);
        affine.base = vec![p(&c, "2*x + 1")];
        affine.base_inverse = Some(vec![p(&c, "x/2 - 1/2")]);
        assert_eq!(prolong_diffeo(&affine).unwrap().image(v), p(&c, "d(y,x)/2"));

        affine.base_inverse = None;
        assert_eq!(prolong_diffeo(&affine), Err(GeometryError::Form(FormError::MissingInverse)));
        affine.base_inverse = Some(vec![p(&c, "x")]);
        assert!(matches!(prolong_diffeo(&affine), Err(GeometryError::InverseMismatch(_))));
        let mut mixing = FiberMap::identity(&c);
        mixing.base = vec![p(&c, "x + y")];
        assert!(matches!(prolong_diffeo(&mixing), Err(GeometryError::NotFiberPreserving(_))));
    }

    #[test]
    fn strong_diffeo_pulls_theta_back_to_theta() {
        let c = make_chart(&["x0", "x1"], &["u", "w"]).unwrap();
        let mut phi = FiberMap::identity(&c);
        phi.fiber = vec![p(&c, "u + x0*x1^2"), p(&c, "3*w - u + x1")];
        let j = prolong_diffeo(&phi).unwrap();
        let th = contact_forms(&c);
        let pulled0 = j.pullback(&th[0]).unwrap();
        assert_eq!(pulled0, th[0]);
        let pulled1 = j.pullback(&th[1]).unwrap();
        assert_eq!(pulled1, &th[1].scale(&Expr::int(3)) - &th[0]);
    }

    fn poly(c: &JetChart, coeffs: &[i64], vars: &[&str]) -> Expr {
        let mut terms = Vec::new();
        for (i, k) in coeffs.iter().enumerate() {
            let a = vars[i % vars.len()];
            let b = vars[(i / vars.len()) % vars.len()];
            terms.push(p(c, &format!("{k}*{a}*{b}^{}", i % 3)));
        }
        Expr::sum(terms)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prolonged_fields_preserve_the_contact_module(
            alpha in prop::collection::vec(-2i64..3, 4),
            beta in prop::collection::vec(-2i64..3, 4),
        ) {
            let c = make_chart(&["x"], &["y"]).unwrap();
            let z = VectorField::from_names(&c, &[
                ("x", poly(&c, &alpha, &["x", "y"])),
                ("y", poly(&c, &beta, &["y", "x"])),
            ]).unwrap();
            let j = prolong_vectorfield(&z).unwrap();
            prop_assert_eq!(j.component(0), z.component(0));
            prop_assert_eq!(j.component(1), z.component(1));
            let l = lie_derivative(&j, &contact_form(&c, 0)).unwrap();
            prop_assert!(contact_reduce(&l).reduced.is_zero());
        }

        #[test]
        fn prolongation_respects_composition(k1 in 1i64..4, k2 in -3i64..4, k3 in -2i64..3) {
            let c = make_chart(&["x"], &["y"]).unwrap();
            let mut a = FiberMap::identity(&c);
            a.fiber = vec![p(&c, &format!("{k1}*y + {k2}*x^2"))];
            let mut b = FiberMap::identity(&c);
            b.base = vec![p(&c, &format!("x + {k3}"))];
            b.base_inverse = Some(vec![p(&c, &format!("x - {k3}"))]);
            b.fiber = vec![p(&c, &format!("y + x^3 + {k2}"))];
            let composed = prolong_diffeo(&compose_fiber_maps(&a, &b).unwrap()).unwrap();
            let stepwise = prolong_diffeo(&a).unwrap().compose(&prolong_diffeo(&b).unwrap()).unwrap();
            prop_assert_eq!(composed, stepwise);
        }
    }
}
