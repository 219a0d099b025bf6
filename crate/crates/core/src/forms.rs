//! Exterior calculus on a jet chart.
//!
//! A [`Form`] is a table from strictly increasing tuples of coordinate
//! indices (in the chart's global order) to normalized coefficients. Forms
//! on E or on M are just forms that do not mention the other coordinates.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::jetchart::{Coord, JetChart, SectionE, SectionJ1};
use crate::symexpr::{Expr, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("operands live on different charts")]
    ChartMismatch,
    #[error("interior product of a 0-form")]
    DegreeZero,
    #[error("the base map has no declared inverse")]
    MissingInverse,
    #[error("{0}")]
    OutOfDomain(String),
}

/// Sorts `idx` in place; returns the permutation sign or `None` on a
/// repeated index.
fn sort_with_sign(idx: &mut [usize]) -> Option<i64> {
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

#[derive(Clone, PartialEq)]
pub struct Form {
    chart: Arc<JetChart>,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

impl Form {
    pub fn zero(chart: &Arc<JetChart>, degree: usize) -> Form {
        Form { chart: chart.clone(), degree, terms: BTreeMap::new() }
    }

    pub fn scalar(chart: &Arc<JetChart>, f: Expr) -> Form {
        let mut out = Form::zero(chart, 0);
        out.add_term(Vec::new(), f);
        out
    }

    /// `coeff · dz^{i_1} ∧ … ∧ dz^{i_k}` for an arbitrary index order.
    pub fn monomial(chart: &Arc<JetChart>, indices: &[usize], coeff: Expr) -> Form {
        let mut idx = indices.to_vec();
        let mut out = Form::zero(chart, idx.len());
        if let Some(sign) = sort_with_sign(&mut idx) {
            out.add_term(idx, coeff * Expr::int(sign));
        }
        out
    }

    /// dz^i
    pub fn coordinate(chart: &Arc<JetChart>, i: usize) -> Form {
        Form::monomial(chart, &[i], Expr::one())
    }

    /// Differential of a coordinate given by name.
    pub fn d_name(chart: &Arc<JetChart>, name: &str) -> Option<Form> {
        chart.index_of(&Symbol::new(name)).map(|i| Form::coordinate(chart, i))
    }

    /// ω = dx^0 ∧ … ∧ dx^n
    pub fn volume(chart: &Arc<JetChart>) -> Form {
        let idx: Vec<usize> = (0..chart.base_dim()).collect();
        Form::monomial(chart, &idx, Expr::one())
    }

    /// df for a scalar expression.
    pub fn d_expr(chart: &Arc<JetChart>, f: &Expr) -> Form {
        let mut out = Form::zero(chart, 1);
        for s in f.free_symbols() {
            if let Some(i) = chart.index_of(&s) {
                out.add_term(vec![i], f.diff(&s).expect("coefficient has no derivative rule"));
            }
        }
        out
    }

    fn add_term(&mut self, key: Vec<usize>, c: Expr) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&key) {
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(key, s);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn chart(&self) -> &Arc<JetChart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, Expr> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, indices: &[usize]) -> Expr {
        let mut idx = indices.to_vec();
        match sort_with_sign(&mut idx) {
            Some(sign) => self.terms.get(&idx).map(|c| c * Expr::int(sign)).unwrap_or_else(Expr::zero),
            None => Expr::zero(),
        }
    }

    /// Coefficient of a 0-form.
    pub fn as_scalar(&self) -> Option<Expr> {
        (self.degree == 0).then(|| self.coefficient(&[]))
    }

    pub fn scale(&self, f: &Expr) -> Form {
        self.map_coefficients(|c| c * f)
    }

    pub fn map_coefficients(&self, mut op: impl FnMut(&Expr) -> Expr) -> Form {
        let mut out = Form::zero(&self.chart, self.degree);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), op(c));
        }
        out
    }

    pub fn same_chart(&self, other: &Form) -> Result<(), FormError> {
        same(&self.chart, &other.chart)
    }

    fn combine(&self, other: &Form, sign: i64) -> Result<Form, FormError> {
        self.same_chart(other)?;
        if self.degree != other.degree && !self.is_zero() && !other.is_zero() {
            return Err(FormError::OutOfDomain(format!(
                "cannot add forms of degree {} and {}",
                self.degree, other.degree
            )));
        }
        let mut out = self.clone();
        if self.is_zero() {
            out.degree = other.degree;
        }
        for (k, c) in &other.terms {
            out.add_term(k.clone(), if sign < 0 { -c } else { c.clone() });
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Form) -> Result<Form, FormError> {
        self.combine(other, 1)
    }

    pub fn try_sub(&self, other: &Form) -> Result<Form, FormError> {
        self.combine(other, -1)
    }

    /// True if a term or coefficient involves a coordinate rejected by `keep`.
    pub fn mentions(&self, pred: impl Fn(usize) -> bool) -> bool {
        self.terms.iter().any(|(k, c)| {
            k.iter().any(|&i| pred(i))
                || c.free_symbols().iter().any(|s| self.chart.index_of(s).is_some_and(&pred))
        })
    }

    /// Coefficients in basis order, for numeric comparison.
    pub fn coefficients(&self) -> Vec<Expr> {
        self.terms.values().cloned().collect()
    }

    /// Text name of a coordinate differential: `dt`, `dq`, `dv(q,t)`.
    pub fn differential_name(chart: &JetChart, i: usize) -> String {
        match chart.coord(i) {
            Coord::Base(mu) => format!("d{}", chart.x(mu)),
            Coord::Fiber(a) => format!("d{}", chart.y(a)),
            Coord::Jet(a, mu) => format!("dv({},{})", chart.y(a), chart.x(mu)),
        }
    }

    pub fn basis_names(&self, key: &[usize]) -> Vec<String> {
        key.iter().map(|&i| Form::differential_name(&self.chart, i)).collect()
    }
}

fn same(a: &Arc<JetChart>, b: &Arc<JetChart>) -> Result<(), FormError> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(FormError::ChartMismatch)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, (key, c)) in self.terms.iter().enumerate() {
            let basis = self.basis_names(key).join("^");
            let mut coeff = c.to_string();
            let negative = coeff.starts_with('-') && !matches!(c.node(), crate::symexpr::Node::Add(_));
            if negative {
                coeff.remove(0);
            }
            if matches!(c.node(), crate::symexpr::Node::Add(_)) {
                coeff = format!("({coeff})");
            }
            let body = match (coeff.as_str(), basis.is_empty()) {
                (_, true) => coeff.clone(),
                ("1", false) => basis,
                (_, false) => format!("{coeff}*{basis}"),
            };
            match (n, negative) {
                (0, true) => write!(f, "-{body}")?,
                (0, false) => f.write_str(&body)?,
                (_, true) => write!(f, " - {body}")?,
                (_, false) => write!(f, " + {body}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Form<{}>({self})", self.degree)
    }
}

impl Add for &Form {
    type Output = Form;
    fn add(self, rhs: &Form) -> Form {
        self.try_add(rhs).expect("form addition")
    }
}

impl Sub for &Form {
    type Output = Form;
    fn sub(self, rhs: &Form) -> Form {
        self.try_sub(rhs).expect("form subtraction")
    }
}

impl Neg for &Form {
    type Output = Form;
    fn neg(self) -> Form {
        self.map_coefficients(|c| -c)
    }
}

/// Vector field in the coordinate frame of the jet chart.
#[derive(Clone, PartialEq)]
pub struct VectorField {
    chart: Arc<JetChart>,
    comps: BTreeMap<usize, Expr>,
}

impl VectorField {
    pub fn zero(chart: &Arc<JetChart>) -> Self {
        VectorField { chart: chart.clone(), comps: BTreeMap::new() }
    }

    /// ∂/∂z^i
    pub fn coordinate(chart: &Arc<JetChart>, i: usize) -> Self {
        let mut x = VectorField::zero(chart);
        x.set(i, Expr::one());
        x
    }

    /// Components keyed by coordinate name.
    pub fn from_names(chart: &Arc<JetChart>, comps: &[(&str, Expr)]) -> Result<Self, FormError> {
        let mut x = VectorField::zero(chart);
        for (name, e) in comps {
            let i = chart
                .index_of(&Symbol::new(name))
                .ok_or_else(|| FormError::OutOfDomain(format!("`{name}` is not a coordinate")))?;
            x.set(i, e.clone());
        }
        Ok(x)
    }

    pub fn set(&mut self, i: usize, e: Expr) {
        if e.is_zero() {
            self.comps.remove(&i);
        } else {
            self.comps.insert(i, e);
        }
    }

    pub fn component(&self, i: usize) -> Expr {
        self.comps.get(&i).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn components(&self) -> &BTreeMap<usize, Expr> {
        &self.comps
    }

    pub fn chart(&self) -> &Arc<JetChart> {
        &self.chart
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    /// X(f)
    pub fn apply(&self, f: &Expr) -> Expr {
        let mut terms = Vec::new();
        for (&i, c) in &self.comps {
            let s = &self.chart.coords()[i];
            if f.depends_on(s) {
                terms.push(c * f.diff(s).expect("coefficient has no derivative rule"));
            }
        }
        Expr::sum(terms)
    }

    pub fn scale(&self, f: &Expr) -> Self {
        let mut out = VectorField::zero(&self.chart);
        for (&i, c) in &self.comps {
            out.set(i, c * f);
        }
        out
    }

    pub fn try_add(&self, other: &VectorField) -> Result<Self, FormError> {
        same(&self.chart, &other.chart)?;
        let mut out = self.clone();
        for (&i, c) in &other.comps {
            out.set(i, self.component(i) + c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &VectorField) -> Result<Self, FormError> {
        self.try_add(&other.scale(&Expr::int(-1)))
    }

    /// Lie bracket [X, Y].
    pub fn bracket(&self, other: &VectorField) -> Result<Self, FormError> {
        same(&self.chart, &other.chart)?;
        let mut out = VectorField::zero(&self.chart);
        for i in 0..self.chart.dim() {
            let c = self.apply(&other.component(i)) - other.apply(&self.component(i));
            out.set(i, c);
        }
        Ok(out)
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.comps.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .comps
            .iter()
            .map(|(&i, c)| {
                let name = &self.chart.coords()[i];
                let c = if matches!(c.node(), crate::symexpr::Node::Add(_)) { format!("({c})") } else { c.to_string() };
                format!("{c}*D[{name}]")
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({self})")
    }
}

/// Form with values in a frame, one component per frame element.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorValuedForm {
    pub frame: Vec<String>,
    pub components: Vec<Form>,
}

impl VectorValuedForm {
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Form::is_zero)
    }
}

pub fn wedge(a: &Form, b: &Form) -> Result<Form, FormError> {
    a.same_chart(b)?;
    let mut out = Form::zero(&a.chart, a.degree + b.degree);
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            let mut idx: Vec<usize> = ka.iter().chain(kb).copied().collect();
            if let Some(sign) = sort_with_sign(&mut idx) {
                out.add_term(idx, ca * cb * Expr::int(sign));
            }
        }
    }
    Ok(out)
}

pub fn exterior_d(a: &Form) -> Form {
    let chart = &a.chart;
    let mut out = Form::zero(chart, a.degree + 1);
    for (k, c) in &a.terms {
        for s in c.free_symbols() {
            let Some(i) = chart.index_of(&s) else { continue };
            let mut idx = Vec::with_capacity(k.len() + 1);
            idx.push(i);
            idx.extend_from_slice(k);
            if let Some(sign) = sort_with_sign(&mut idx) {
                let dc = c.diff(&s).expect("coefficient has no derivative rule");
                out.add_term(idx, dc * Expr::int(sign));
            }
        }
    }
    out
}

/// i(X)a, contracting the first slot.
pub fn interior(x: &VectorField, a: &Form) -> Result<Form, FormError> {
    same(&x.chart, &a.chart)?;
    if a.degree == 0 {
        return Err(FormError::DegreeZero);
    }
    let mut out = Form::zero(&a.chart, a.degree - 1);
    for (k, c) in &a.terms {
        for (pos, i) in k.iter().enumerate() {
            if let Some(xi) = x.comps.get(i) {
                let mut rest = k.clone();
                rest.remove(pos);
                let sign = if pos % 2 == 0 { 1 } else { -1 };
                out.add_term(rest, c * xi * Expr::int(sign));
            }
        }
    }
    Ok(out)
}

/// Interior product extended by zero on 0-forms.
pub fn interior_or_zero(x: &VectorField, a: &Form) -> Result<Form, FormError> {
    if a.degree == 0 {
        same(&x.chart, &a.chart)?;
        return Ok(Form::zero(&a.chart, 0));
    }
    interior(x, a)
}

/// L(X)a = i(X)da + d i(X)a
pub fn lie_derivative(x: &VectorField, a: &Form) -> Result<Form, FormError> {
    same(&x.chart, &a.chart)?;
    if a.degree == 0 {
        return Ok(Form::scalar(&a.chart, x.apply(&a.coefficient(&[]))));
    }
    let first = interior(x, &exterior_d(a))?;
    let second = exterior_d(&interior(x, a)?);
    first.try_add(&second)
}

/// Pullback by a coordinate substitution: coordinate `i` goes to
/// `images[i]`; coordinates without an image are left alone.
pub fn pullback_by_substitution(a: &Form, images: &BTreeMap<usize, Expr>) -> Form {
    let chart = &a.chart;
    let bindings: BTreeMap<Symbol, Expr> = images.iter().map(|(&i, e)| (chart.coords()[i].clone(), e.clone())).collect();
    let mut diffs: BTreeMap<usize, Form> = BTreeMap::new();
    let mut out = Form::zero(chart, a.degree);
    for (k, c) in &a.terms {
        let mut acc = Form::scalar(chart, c.substitute(&bindings));
        for &i in k {
            let di = diffs
                .entry(i)
                .or_insert_with(|| match images.get(&i) {
                    Some(e) => Form::d_expr(chart, e),
                    None => Form::coordinate(chart, i),
                })
                .clone();
            acc = wedge(&acc, &di).expect("same chart");
            if acc.is_zero() {
                break;
            }
        }
        out = out.try_add(&acc).expect("same chart and degree");
    }
    out.degree = a.degree;
    out
}

/// A section of E → M or of J¹E → M.
#[derive(Debug, Clone, Copy)]
pub enum SectionRef<'a> {
    E(&'a SectionE),
    J1(&'a SectionJ1),
}

impl<'a> From<&'a SectionE> for SectionRef<'a> {
    fn from(s: &'a SectionE) -> Self {
        SectionRef::E(s)
    }
}

impl<'a> From<&'a SectionJ1> for SectionRef<'a> {
    fn from(s: &'a SectionJ1) -> Self {
        SectionRef::J1(s)
    }
}

/// Pullback to the base along a section. A section of E only pulls back
/// forms that do not mention jet coordinates.
pub fn pullback_by_section<'a>(section: impl Into<SectionRef<'a>>, a: &Form) -> Result<Form, FormError> {
    let section = section.into();
    let chart = match section {
        SectionRef::E(s) => &s.chart,
        SectionRef::J1(s) => &s.chart,
    };
    same(chart, &a.chart)?;
    let mut images = BTreeMap::new();
    match section {
        SectionRef::E(s) => {
            if a.mentions(|i| !chart.is_e_coord(i)) {
                return Err(FormError::ChartMismatch);
            }
            for (k, phi) in s.phi.iter().enumerate() {
                images.insert(chart.y_index(k), phi.clone());
            }
        }
        SectionRef::J1(s) => {
            for k in 0..chart.fiber_dim() {
                images.insert(chart.y_index(k), s.f[k].clone());
                for mu in 0..chart.base_dim() {
                    images.insert(chart.v_index(k, mu), s.g[k][mu].clone());
                }
            }
        }
    }
    Ok(pullback_by_substitution(a, &images))
}

/// Fiber-preserving map Φ(x, y) = (Φ_M(x), Φ^A(x, y)) of E.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMap {
    pub chart: Arc<JetChart>,
    pub base: Vec<Expr>,
    pub base_inverse: Option<Vec<Expr>>,
    pub fiber: Vec<Expr>,
}

impl FiberMap {
    pub fn identity(chart: &Arc<JetChart>) -> Self {
        FiberMap {
            chart: chart.clone(),
            base: chart.base_names().iter().map(Expr::sym).collect(),
            base_inverse: Some(chart.base_names().iter().map(Expr::sym).collect()),
            fiber: chart.fiber_names().iter().map(Expr::sym).collect(),
        }
    }

    /// Substitution on E-coordinates.
    pub fn e_images(&self) -> BTreeMap<usize, Expr> {
        let c = &self.chart;
        let mut m = BTreeMap::new();
        for (mu, e) in self.base.iter().enumerate() {
            m.insert(c.x_index(mu), e.clone());
        }
        for (a, e) in self.fiber.iter().enumerate() {
            m.insert(c.y_index(a), e.clone());
        }
        m
    }
}

/// Coordinate pullback Φ*a of a form on E.
pub fn pullback_by_map(phi: &FiberMap, a: &Form) -> Result<Form, FormError> {
    same(&phi.chart, &a.chart)?;
    if phi.base_inverse.is_none() {
        return Err(FormError::MissingInverse);
    }
    if a.mentions(|i| !a.chart.is_e_coord(i)) {
        return Err(FormError::ChartMismatch);
    }
    Ok(pullback_by_substitution(a, &phi.e_images()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetchart::{make_chart, prolong_section};
    use crate::symexpr::parse_expr_with;
    use proptest::prelude::*;

    fn xy() -> Arc<JetChart> {
        make_chart(&["x"], &["y"]).unwrap()
    }

    fn p(c: &JetChart, s: &str) -> Expr {
        parse_expr_with(s, c).unwrap()
    }

    fn d(c: &Arc<JetChart>, name: &str) -> Form {
        Form::d_name(c, name).unwrap()
    }

    #[test]
    fn wedge_examples() {
        let c = xy();
        let dxdy = wedge(&d(&c, "x"), &d(&c, "y")).unwrap();
        assert_eq!(dxdy.coefficient(&[0, 1]), Expr::one());
        assert_eq!(wedge(&d(&c, "y"), &d(&c, "x")).unwrap(), -&dxdy);
        assert!(wedge(&d(&c, "x"), &d(&c, "x")).unwrap().is_zero());
        let other = make_chart(&["t"], &["q"]).unwrap();
        assert_eq!(wedge(&d(&c, "x"), &d(&other, "t")), Err(FormError::ChartMismatch));
    }

    #[test]
    fn exterior_derivative_examples() {
        let c = xy();
        let dxdy = wedge(&d(&c, "x"), &d(&c, "y")).unwrap();
        assert_eq!(exterior_d(&d(&c, "y").scale(&p(&c, "x"))), dxdy);
        let f = Form::scalar(&c, p(&c, "x*y^2"));
        assert!(exterior_d(&exterior_d(&f)).is_zero());
        assert_eq!(exterior_d(&d(&c, "x").scale(&p(&c, "y"))), -&dxdy);
    }

    #[test]
    fn interior_examples() {
        let c = xy();
        let dxdy = wedge(&d(&c, "x"), &d(&c, "y")).unwrap();
        let dx = VectorField::coordinate(&c, 0);
        let dy = VectorField::coordinate(&c, 1);
        assert_eq!(interior(&dx, &dxdy).unwrap(), d(&c, "y"));
        assert_eq!(interior(&dy, &dxdy).unwrap(), -&d(&c, "x"));
        let vdy = dy.scale(&p(&c, "d(y,x)"));
        assert_eq!(interior(&vdy, &d(&c, "y")).unwrap().as_scalar().unwrap(), p(&c, "d(y,x)"));
        assert_eq!(interior(&dx, &Form::scalar(&c, Expr::one())), Err(FormError::DegreeZero));
    }

    #[test]
    fn lie_derivative_examples() {
        let c = xy();
        let dx = VectorField::coordinate(&c, 0);
        assert_eq!(lie_derivative(&dx, &d(&c, "x").scale(&p(&c, "x"))).unwrap(), d(&c, "x"));
        let l = lie_derivative(&dx, &Form::scalar(&c, p(&c, "x^2"))).unwrap();
        assert_eq!(l.as_scalar().unwrap(), p(&c, "2*x"));
        let ydy = VectorField::coordinate(&c, 1).scale(&p(&c, "y"));
        assert_eq!(lie_derivative(&ydy, &d(&c, "y")).unwrap(), d(&c, "y"));
    }

    #[test]
    fn pullback_examples() {
        let c = make_chart(&["t"], &["q"]).unwrap();
        let theta = &d(&c, "q") - &d(&c, "t").scale(&p(&c, "d(q,t)"));
        let hol = SectionJ1::new(&c, vec![p(&c, "t^2")], vec![vec![p(&c, "2*t")]]).unwrap();
        assert!(pullback_by_section(&hol, &theta).unwrap().is_zero());
        let non = SectionJ1::new(&c, vec![p(&c, "t^2")], vec![vec![p(&c, "3*t")]]).unwrap();
        assert_eq!(pullback_by_section(&non, &theta).unwrap(), d(&c, "t").scale(&p(&c, "-t")));
        assert_eq!(pullback_by_section(&non, &d(&c, "t")).unwrap(), d(&c, "t"));
        let phi = SectionE::new(&c, vec![p(&c, "t^2")]).unwrap();
        assert_eq!(pullback_by_section(&phi, &theta), Err(FormError::ChartMismatch));
    }

    #[test]
    fn map_pullback_examples() {
        let c = xy();
        let dy = d(&c, "y");
        assert_eq!(pullback_by_map(&FiberMap::identity(&c), &dy).unwrap(), dy);
        let mut scale = FiberMap::identity(&c);
        scale.fiber = vec![p(&c, "2*y")];
        assert_eq!(pullback_by_map(&scale, &dy).unwrap(), dy.scale(&Expr::int(2)));
        let mut shift = FiberMap::identity(&c);
        shift.fiber = vec![p(&c, "y + x^2")];
        assert_eq!(pullback_by_map(&shift, &dy).unwrap(), &dy + &d(&c, "x").scale(&p(&c, "2*x")));
        shift.base_inverse = None;
        assert_eq!(pullback_by_map(&shift, &dy), Err(FormError::MissingInverse));
    }

    #[test]
    fn display() {
        let c = make_chart(&["t"], &["q"]).unwrap();
        let theta = &d(&c, "q") - &d(&c, "t").scale(&p(&c, "d(q,t)"));
        assert_eq!(theta.to_string(), "-d(q,t)*dt + dq");
        let f = wedge(&Form::d_name(&c, "d(q,t)").unwrap(), &d(&c, "t")).unwrap().scale(&p(&c, "q + 1"));
        assert_eq!(f.to_string(), "(-1 - q)*dt^dv(q,t)");
    }

    /// Random polynomial forms on a 2+1 chart (coords x0, x1, u, and the jets).
    fn arb_form() -> impl Strategy<Value = Form> {
        let c = make_chart(&["x0", "x1"], &["u"]).unwrap();
        let names = ["x0", "x1", "u", "d(u,x0)", "d(u,x1)"];
        let monomial = (prop::collection::vec(0usize..5, 0..3), -3i64..4, 0usize..5, 0u32..3);
        prop::collection::vec(monomial, 1..4).prop_map(move |terms| {
            let mut acc: Option<Form> = None;
            for (idx, k, var, pw) in terms {
                let coeff = Expr::int(k) * parse_expr_with(names[var], &*c).unwrap().powi(pw as i64);
                let idx: Vec<usize> = idx.iter().map(|&i| c.index_of(&Symbol::new(names[i])).unwrap()).collect();
                let m = Form::monomial(&c, &idx, coeff);
                acc = Some(match acc {
                    Some(f) if f.degree() == m.degree() || m.is_zero() || f.is_zero() => f.try_add(&m).unwrap(),
                    Some(f) => f,
                    None => m,
                });
            }
            acc.unwrap()
        })
    }

    fn arb_field() -> impl Strategy<Value = VectorField> {
        let c = make_chart(&["x0", "x1"], &["u"]).unwrap();
        prop::collection::vec((-2i64..3, 0usize..5, 0u32..3), 5).prop_map(move |cs| {
            let mut x = VectorField::zero(&c);
            for (i, (k, var, pw)) in cs.into_iter().enumerate() {
                x.set(i, Expr::int(k) * Expr::sym(&c.coords()[var]).powi(pw as i64));
            }
            x
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn d_squared_vanishes(a in arb_form()) {
            prop_assert!(exterior_d(&exterior_d(&a)).is_zero());
        }

        #[test]
        fn interior_twice_vanishes(a in arb_form(), x in arb_field()) {
            prop_assume!(a.degree() >= 2);
            prop_assert!(interior(&x, &interior(&x, &a).unwrap()).unwrap().is_zero());
        }

        #[test]
        fn lie_derivative_commutes_with_d(a in arb_form(), x in arb_field()) {
            let lhs = lie_derivative(&x, &exterior_d(&a)).unwrap();
            let rhs = exterior_d(&lie_derivative(&x, &a).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn pullback_is_an_algebra_morphism(a in arb_form(), b in arb_form(), k in -2i64..3) {
            let c = a.chart().clone();
            let phi = SectionE::new(&c, vec![parse_expr_with(&format!("{k}*x0^2*x1 + x1^3 - x0"), &*c).unwrap()]).unwrap();
            let psi = prolong_section(&phi);
            let pa = pullback_by_section(&psi, &a).unwrap();
            let pb = pullback_by_section(&psi, &b).unwrap();
            prop_assert_eq!(pullback_by_section(&psi, &wedge(&a, &b).unwrap()).unwrap(), wedge(&pa, &pb).unwrap());
            prop_assert_eq!(pullback_by_section(&psi, &exterior_d(&a)).unwrap(), exterior_d(&pa));
        }
    }
}
