//! The identity catalog: every structural identity that applies to a
//! problem, as numeric checks.

use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::canonical::{contact_form, contact_forms, contact_reduce, prolong_diffeo, prolong_vectorfield, GeometryError};
use crate::connection::{bracket_curvature, curvature, integral_residual2, jetfield_contract, Connection};
use crate::forms::{exterior_d, lie_derivative, pullback_by_section, VectorField};
use crate::jetchart::{prolong_section, JetChart, SectionE};
use crate::lagrangian::{
    canonical_form_intrinsic, cartan_forms, check_jetfield, derive_el, el_along_section, energy_density,
    energy_density_intrinsic, legendre_difference, CartanForms,
};
use crate::noether::{jetfield_noether_check, noether_current, total_variation_with};
use crate::problem::Problem;

use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogItem {
    Identity(IdentityCheck),
    FiniteDifference(FiniteDifferenceCheck),
    Skip { name: String, reason: String },
    Error { name: String, message: String },
}

impl CatalogItem {
    pub fn name(&self) -> &str {
        match self {
            CatalogItem::Identity(c) => &c.name,
            CatalogItem::FiniteDifference(c) => &c.name,
            CatalogItem::Skip { name, .. } | CatalogItem::Error { name, .. } => name,
        }
    }
}

const RANDOM_SECTIONS: usize = 3;

/// Monomials in `vars` of total degree ≤ `degree`, constant first.
pub fn monomials(vars: &[Expr], degree: usize) -> Vec<Expr> {
    let mut out = vec![Expr::one()];
    let mut frontier: Vec<(usize, Expr)> = vec![(0, Expr::one())];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (start, m) in &frontier {
            for (i, v) in vars.iter().enumerate().skip(*start) {
                next.push((i, m * v));
            }
        }
        out.extend(next.iter().map(|(_, m)| m.clone()));
        frontier = next;
    }
    out
}

/// Polynomial in `vars` with integer coefficients drawn from −3..=3.
pub fn random_polynomial(rng: &mut ChaCha8Rng, vars: &[Expr], degree: usize) -> Expr {
    Expr::sum(monomials(vars, degree).into_iter().map(|m| Expr::int(rng.gen_range(-3..=3)) * m))
}

/// Seeded polynomial sections of the given degree.
pub fn random_sections(chart: &Arc<JetChart>, seed: u64, count: usize, degree: usize) -> Vec<SectionE> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Expr> = chart.base_names().iter().map(Expr::sym).collect();
    (0..count)
        .map(|_| {
            let phi = (0..chart.fiber_dim()).map(|_| random_polynomial(&mut rng, &xs, degree)).collect();
            SectionE::new(chart, phi).expect("polynomial in base coordinates")
        })
        .collect()
}

struct Builder<'a> {
    p: &'a Problem,
    items: Vec<CatalogItem>,
}

impl Builder<'_> {
    fn vanish(&mut self, name: String, exprs: Vec<Expr>) {
        self.items.push(CatalogItem::Identity(IdentityCheck::vanishing(name, exprs, &self.p.numeric)));
    }

    fn equal(&mut self, name: String, left: Vec<Expr>, right: Vec<Expr>) {
        self.items.push(CatalogItem::Identity(IdentityCheck::new(name, left, right, &self.p.numeric)));
    }

    fn forms(&mut self, name: String, left: Result<Form, GeometryError>, right: Result<Form, GeometryError>) {
        let item = match (left, right) {
            (Ok(l), Ok(r)) => match IdentityCheck::forms(name.clone(), &l, &r, &self.p.numeric) {
                Ok(c) => CatalogItem::Identity(c),
                Err(e) => CatalogItem::Error { name, message: e.to_string() },
            },
            (Err(e), _) | (_, Err(e)) => CatalogItem::Error { name, message: e.to_string() },
        };
        self.items.push(item);
    }

    fn skip(&mut self, name: &str, reason: &str) {
        self.items.push(CatalogItem::Skip { name: name.to_string(), reason: reason.to_string() });
    }

    fn error(&mut self, name: String, e: impl ToString) {
        self.items.push(CatalogItem::Error { name, message: e.to_string() });
    }
}

pub fn build_catalog(p: &Problem) -> Vec<CatalogItem> {
    let mut b = Builder { p, items: Vec::new() };
    let c = &p.chart;
    let lag = &p.lagrangian;
    let cf = cartan_forms(lag);

    // contact structure along holonomic sections
    let mut sections: Vec<(String, SectionE)> =
        p.sections.iter().map(|(n, s)| (n.clone(), s.section.clone())).collect();
    for (k, s) in random_sections(c, p.numeric.seed, RANDOM_SECTIONS, 2).into_iter().enumerate() {
        sections.push((format!("random{k}"), s));
    }
    for (name, s) in &sections {
        let psi = prolong_section(s);
        let pulled: Result<Vec<Expr>, _> = contact_forms(c)
            .iter()
            .map(|th| pullback_by_section(&psi, th).map(|f| f.coefficients()))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.concat());
        match pulled {
            Ok(v) => b.vanish(format!("contact_annihilation[{name}]"), v),
            Err(e) => b.error(format!("contact_annihilation[{name}]"), e),
        }
    }

    // Cartan forms
    b.forms("canonical_form_intrinsic".into(), Ok(cf.canonical.clone()), Ok(canonical_form_intrinsic(lag)));
    b.forms("cartan_split".into(), cf.theta.try_sub(&cf.canonical).map_err(Into::into), Ok(lag.density()));
    for (name, s) in &sections {
        section_entries(&mut b, &cf, name, s);
    }

    // Euler-Lagrange
    let el = derive_el(lag);
    for (name, spec) in &p.sections {
        if spec.solution {
            b.vanish(format!("el_solution[{name}]"), el.along(&spec.section));
        }
    }
    for sym in lag.l.free_symbols() {
        if c.is_jet_symbol(&sym) {
            b.items.push(CatalogItem::FiniteDifference(FiniteDifferenceCheck {
                name: format!("lagrangian_derivative[{sym}]"),
                expr: lag.l.clone(),
                var: sym,
                settings: p.numeric.clone(),
            }));
        }
    }

    // connections
    if p.connections.is_empty() {
        for n in ["energy_intrinsic", "legendre_difference", "curvature_bracket"] {
            b.skip(n, "no connection declared");
        }
    }
    for (name, conn) in &p.connections {
        let local = energy_density(lag, conn).map(|e| Form::volume(c).scale(&e.e));
        b.forms(format!("energy_intrinsic[{name}]"), local, energy_density_intrinsic(lag, conn));
        let flat = Connection::flat(c);
        let shift = energy_density(lag, conn)
            .and_then(|e| energy_density(lag, &flat).map(|f| Form::volume(c).scale(&(e.e - f.e))));
        b.forms(format!("legendre_difference[{name}]"), shift, legendre_difference(lag, &conn.gamma));
        let (k, br) = (curvature(conn), bracket_curvature(conn));
        let pairs: Vec<(usize, usize)> =
            (0..c.base_dim()).flat_map(|m| (m + 1..c.base_dim()).map(move |e| (m, e))).collect();
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for a in 0..c.fiber_dim() {
            for &(mu, eta) in &pairs {
                l.push(k.coefficient(a, mu, eta));
                r.push(br.coefficient(a, mu, eta));
            }
        }
        b.equal(format!("curvature_bracket[{name}]"), l, r);
    }

    // vector fields and Noether
    if p.vectorfields.is_empty() {
        b.skip("noether_conservation", "no vector field declared");
    }
    for (zname, z) in &p.vectorfields {
        vectorfield_entries(&mut b, &cf, zname, z);
    }

    // jet fields
    for (yname, spec) in &p.jetfields {
        let y = &spec.field;
        let frame_l = jetfield_contract(y, &lag.density());
        b.forms(format!("lagrangian_recovery[{yname}]"), frame_l, Ok(Form::scalar(c, lag.l.clone())));
        for (cname, conn) in &p.connections {
            let e = energy_density_intrinsic(lag, conn).and_then(|f| jetfield_contract(y, &f));
            let local = energy_density(lag, conn).map(|e| Form::scalar(c, e.e));
            b.forms(format!("energy_recovery[{yname},{cname}]"), e, local);
        }
        match check_jetfield(lag, y) {
            Ok(chk) => match &chk.reduced {
                Some(red) => {
                    let sign = if c.base_dim() % 2 == 1 { Expr::one() } else { -Expr::one() };
                    let mut expected = Form::zero(c, 1);
                    for (a, r) in red.iter().enumerate() {
                        expected = &expected + &contact_form(c, a).scale(&(r * &sign));
                    }
                    b.forms(format!("jetfield_contraction[{yname}]"), Ok(chk.contraction.clone()), Ok(expected));
                }
                None => b.skip(&format!("jetfield_contraction[{yname}]"), "not a SOPDE"),
            },
            Err(e) => b.error(format!("jetfield_contraction[{yname}]"), e),
        }
        for sname in &spec.integral_sections {
            let psi = prolong_section(&p.sections[sname].section);
            match integral_residual2(y, &psi) {
                Ok(r) => b.vanish(format!("integral_section[{yname},{sname}]"), r.all()),
                Err(e) => b.error(format!("integral_section[{yname},{sname}]"), e),
            }
        }
    }

    // fibered diffeomorphisms
    for (dname, spec) in &p.diffeos {
        let j = match prolong_diffeo(&spec.map) {
            Ok(j) => j,
            Err(e) => {
                b.error(format!("diffeo_contact[{dname}]"), e);
                continue;
            }
        };
        let reduced: Result<Vec<Expr>, GeometryError> = contact_forms(c)
            .iter()
            .map(|th| j.pullback(th).map(|f| contact_reduce(&f).reduced.coefficients()))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.concat());
        match reduced {
            Ok(v) => b.vanish(format!("diffeo_contact[{dname}]"), v),
            Err(e) => b.error(format!("diffeo_contact[{dname}]"), e),
        }
        if spec.symmetry {
            b.forms(format!("diffeo_density[{dname}]"), j.pullback(&lag.density()), Ok(lag.density()));
            b.forms(format!("diffeo_cartan[{dname}]"), j.pullback(&cf.theta), Ok(cf.theta.clone()));
        }
    }
    b.items
}

fn section_entries(b: &mut Builder, cf: &CartanForms, name: &str, s: &SectionE) {
    let lag = &b.p.lagrangian;
    let psi = prolong_section(s);
    let pulled = pullback_by_section(&psi, &cf.canonical).map_err(GeometryError::from);
    b.forms(format!("canonical_pullback[{name}]"), pulled, Ok(Form::zero(&lag.chart, lag.chart.base_dim())));
    let theta = pullback_by_section(&psi, &cf.theta).map_err(GeometryError::from);
    let dens = pullback_by_section(&psi, &lag.density()).map_err(GeometryError::from);
    b.forms(format!("cartan_pullback[{name}]"), theta, dens);
    b.equal(format!("el_chain_rule[{name}]"), derive_el(lag).along(s), el_along_section(lag, s));
}

fn vectorfield_entries(b: &mut Builder, cf: &CartanForms, zname: &str, z: &VectorField) {
    let p = b.p;
    let c = &p.chart;
    let lag = &p.lagrangian;
    let jz = match prolong_vectorfield(z) {
        Ok(jz) => jz,
        Err(e) => return b.error(format!("prolongation[{zname}]"), e),
    };
    let (l, r): (Vec<Expr>, Vec<Expr>) = (0..c.e_dim()).map(|i| (jz.component(i), z.component(i))).unzip();
    b.equal(format!("prolongation_projection[{zname}]"), l, r);
    let reduced: Result<Vec<Expr>, _> = contact_forms(c)
        .iter()
        .map(|th| lie_derivative(&jz, th).map(|f| contact_reduce(&f).reduced.coefficients()))
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.concat());
    match reduced {
        Ok(v) => b.vanish(format!("contact_invariance[{zname}]"), v),
        Err(e) => b.error(format!("contact_invariance[{zname}]"), e),
    }

    let symmetric = match total_variation_with(lag, z, &p.numeric) {
        Ok(rep) => rep.is_symmetry(),
        Err(e) => return b.error(format!("total_variation[{zname}]"), e),
    };
    if !symmetric {
        return b.skip(&format!("noether_conservation[{zname}]"), "not a symmetry of the Lagrangian");
    }
    let projectable = (0..c.base_dim()).all(|mu| {
        z.component(c.x_index(mu)).free_symbols().iter().all(|s| c.is_base_symbol(s) || c.is_param(s))
    });
    if projectable {
        let lie = lie_derivative(&jz, &cf.theta).map_err(GeometryError::from);
        b.forms(format!("cartan_invariance[{zname}]"), lie, Ok(Form::zero(c, c.base_dim())));
        let lie = lie_derivative(&jz, &cf.canonical).map_err(GeometryError::from);
        b.forms(format!("canonical_invariance[{zname}]"), lie, Ok(Form::zero(c, c.base_dim())));
    }
    let current = match noether_current(lag, z) {
        Ok(j) => j,
        Err(e) => return b.error(format!("noether_current[{zname}]"), e),
    };
    let solutions: Vec<_> = p.sections.iter().filter(|(_, s)| s.solution).collect();
    if solutions.is_empty() {
        b.skip(&format!("noether_conservation[{zname}]"), "no solution section declared");
    }
    for (sname, spec) in solutions {
        let pulled = pullback_by_section(&prolong_section(&spec.section), &current);
        match pulled {
            Ok(f) => b.vanish(format!("noether_conservation[{zname},{sname}]"), exterior_d(&f).coefficients()),
            Err(e) => b.error(format!("noether_conservation[{zname},{sname}]"), e),
        }
    }
    for (yname, spec) in &p.jetfields {
        let solves = check_jetfield(lag, &spec.field).map(|chk| chk.holds()).unwrap_or(false);
        if !solves {
            b.skip(&format!("noether_jetfield[{zname},{yname}]"), "jet field does not solve the field equations");
            continue;
        }
        let xi = Form::zero(c, c.base_dim());
        let alpha = Form::zero(c, c.base_dim() + 1);
        match jetfield_noether_check(lag, &spec.field, &jz, &xi, &alpha) {
            Ok(f) => b.vanish(format!("noether_jetfield[{zname},{yname}]"), f.coefficients()),
            Err(e) => b.error(format!("noether_jetfield[{zname},{yname}]"), e),
        }
    }
}

fn entry(name: &str, status: Status, report: Option<NumericReport>, mode: String) -> SuiteEntry {
    let (max_dev, witness) = match report {
        Some(r) => (Some(r.max_dev), r.witness),
        None => (None, BTreeMap::new()),
    };
    SuiteEntry { name: name.to_string(), status, max_dev, witness, mode }
}

fn from_result(name: &str, r: Result<NumericReport, HarnessError>, mode: &str) -> SuiteEntry {
    match r {
        Ok(rep) => {
            let status = if rep.pass { Status::Pass } else { Status::Fail };
            entry(name, status, Some(rep), mode.to_string())
        }
        Err(HarnessError::Evaluation { point, source }) => {
            SuiteEntry { name: name.to_string(), status: Status::Error, max_dev: None, witness: point, mode: source.to_string() }
        }
        Err(e) => entry(name, Status::Error, None, e.to_string()),
    }
}

/// Runs every item. A symbolic identity must also pass numerically.
pub fn run_catalog<T: Float + FromPrimitive>(items: &[CatalogItem]) -> SuiteReport {
    let suite = items
        .iter()
        .map(|item| match item {
            CatalogItem::Identity(c) => {
                let mode = if c.symbolic() { "symbolic" } else { "numeric" };
                from_result(&c.name, numeric_check::<T>(c), mode)
            }
            CatalogItem::FiniteDifference(c) => from_result(&c.name, finite_difference_check::<T>(c), "finite-difference"),
            CatalogItem::Skip { name, reason } => entry(name, Status::Skipped, None, reason.clone()),
            CatalogItem::Error { name, message } => entry(name, Status::Error, None, message.clone()),
        })
        .collect();
    SuiteReport { suite }
}

pub fn run_identity_catalog(p: &Problem) -> SuiteReport {
    run_catalog::<f64>(&build_catalog(p))
}
