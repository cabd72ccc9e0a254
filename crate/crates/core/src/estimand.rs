//! Symbolic estimands and their closed-form evaluation under linear-Gaussian
//! distributions.
//!
//! An [`Estimand`] is an expression tree over probability terms referencing
//! named distributions, sums over bound symbols, products and quotients. The
//! sums are read as Lebesgue integration, which keeps evaluation inside the
//! Gaussian family: every subexpression is a Gaussian potential in canonical
//! form (K, h, g), products add potentials, sums integrate a variable out,
//! and the final potential is conditioned on the fixed assignment.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

const LN_2PI: f64 = 1.8378770664093453;

// ── Gaussian distributions ───────────────────────────────────────────────

/// A Gaussian over named variables.
#[derive(Debug, Clone)]
pub struct GaussianDist {
    pub vars: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianDist {
    pub fn new(vars: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianDist> {
        let n = vars.len();
        if mean.len() != n || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::input("gaussian dimension mismatch"));
        }
        let mut sym = cov.clone();
        for i in 0..n {
            for j in 0..n {
                let v = (cov[(i, j)] + cov[(j, i)]) / 2.0;
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 {
                    return Err(Error::Numerical("covariance not symmetric".into()));
                }
                sym[(i, j)] = v;
            }
        }
        if n > 0 {
            let eig = sym.clone().symmetric_eigen();
            if eig.eigenvalues.iter().any(|&l| l < -1e-8) {
                return Err(Error::Numerical("covariance not positive semidefinite".into()));
            }
        }
        Ok(GaussianDist {
            vars,
            mean,
            cov: sym,
        })
    }

    pub fn index_of(&self, var: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::input(format!("unknown variable {var:?}")))
    }

    /// Marginal over the listed variables, in the listed order.
    pub fn marginal(&self, vars: &[&str]) -> Result<GaussianDist> {
        let idx: Vec<usize> = vars
            .iter()
            .map(|v| self.index_of(v))
            .collect::<Result<_>>()?;
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]);
        GaussianDist::new(vars.iter().map(|s| s.to_string()).collect(), mean, cov)
    }

    /// Condition on an assignment of some variables (Schur complement).
    pub fn condition(&self, on: &[(&str, f64)]) -> Result<GaussianDist> {
        if on.is_empty() {
            return Ok(self.clone());
        }
        let cond_idx: Vec<usize> = on.iter().map(|(v, _)| self.index_of(v)).collect::<Result<_>>()?;
        let keep_idx: Vec<usize> = (0..self.vars.len())
            .filter(|i| !cond_idx.contains(i))
            .collect();
        let saa = DMatrix::from_fn(keep_idx.len(), keep_idx.len(), |r, c| {
            self.cov[(keep_idx[r], keep_idx[c])]
        });
        let sab = DMatrix::from_fn(keep_idx.len(), cond_idx.len(), |r, c| {
            self.cov[(keep_idx[r], cond_idx[c])]
        });
        let sbb = DMatrix::from_fn(cond_idx.len(), cond_idx.len(), |r, c| {
            self.cov[(cond_idx[r], cond_idx[c])]
        });
        let (sbb_inv, _) = sym_pinv(&sbb)?;
        let delta = DVector::from_iterator(
            cond_idx.len(),
            cond_idx.iter().zip(on).map(|(&i, (_, v))| v - self.mean[i]),
        );
        let mean_a = DVector::from_iterator(keep_idx.len(), keep_idx.iter().map(|&i| self.mean[i]));
        let mean = mean_a + &sab * &sbb_inv * delta;
        let cov = symmetrize(&(saa - &sab * &sbb_inv * sab.transpose()));
        GaussianDist::new(
            keep_idx.iter().map(|&i| self.vars[i].clone()).collect(),
            mean,
            cov,
        )
    }

    /// Max elementwise difference in mean and covariance after aligning the
    /// other distribution's variable order to ours.
    pub fn max_diff(&self, other: &GaussianDist) -> Result<f64> {
        let other = other.marginal(&self.vars.iter().map(String::as_str).collect::<Vec<_>>())?;
        let mut d: f64 = 0.0;
        for i in 0..self.vars.len() {
            d = d.max((self.mean[i] - other.mean[i]).abs());
            for j in 0..self.vars.len() {
                d = d.max((self.cov[(i, j)] - other.cov[(i, j)]).abs());
            }
        }
        Ok(d)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) / 2.0
}

/// Inverse and log-determinant of a symmetric PSD matrix; eigenvalues below
/// 1e-10 are pseudo-inverted (dropped), larger negative ones are an error.
pub(crate) fn sym_pinv(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut logdet = 0.0;
    let mut inv_vals = DVector::zeros(n);
    for i in 0..n {
        let l = eig.eigenvalues[i];
        if l < -1e-8 {
            return Err(Error::Numerical(format!("matrix not PSD (eigenvalue {l:.3e})")));
        }
        if l > 1e-10 {
            inv_vals[i] = 1.0 / l;
            logdet += l.ln();
        }
    }
    let q = &eig.eigenvectors;
    let inv = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
    Ok((symmetrize(&inv), logdet))
}

// ── Estimand trees ───────────────────────────────────────────────────────

/// How a variable occurs inside a probability term.
#[derive(Debug, Clone, PartialEq)]
pub enum Occ {
    /// A query variable: either an output target or fixed at evaluation.
    Free(String),
    /// A bound symbol (display name) standing for the underlying variable.
    Bound { sym: String, var: String },
}

impl Occ {
    pub fn free(v: impl Into<String>) -> Occ {
        Occ::Free(v.into())
    }

    pub fn bound(sym: impl Into<String>, var: impl Into<String>) -> Occ {
        Occ::Bound {
            sym: sym.into(),
            var: var.into(),
        }
    }

    /// Name of the underlying variable in the referenced distribution.
    pub fn var(&self) -> &str {
        match self {
            Occ::Free(v) => v,
            Occ::Bound { var, .. } => var,
        }
    }

    fn display(&self) -> &str {
        match self {
            Occ::Free(v) => v,
            Occ::Bound { sym, .. } => sym,
        }
    }
}

/// A probability term `p_dist(targets | given)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTerm {
    pub dist: String,
    pub targets: Vec<Occ>,
    pub given: Vec<Occ>,
}

/// Symbolic estimand expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimand {
    Term(ProbTerm),
    Sum { sym: String, var: String, body: Box<Estimand> },
    Product(Vec<Estimand>),
    Quotient(Box<Estimand>, Box<Estimand>),
    One,
}

/// Reference name of the observational distribution.
pub const OBS_DIST: &str = "p";

impl Estimand {
    pub fn term(dist: impl Into<String>, targets: Vec<Occ>, given: Vec<Occ>) -> Estimand {
        Estimand::Term(ProbTerm {
            dist: dist.into(),
            targets,
            given,
        })
    }

    /// Observational term with all-free occurrences.
    pub fn obs(targets: &[&str], given: &[&str]) -> Estimand {
        Estimand::term(
            OBS_DIST,
            targets.iter().map(|v| Occ::free(*v)).collect(),
            given.iter().map(|v| Occ::free(*v)).collect(),
        )
    }

    pub fn sum(sym: impl Into<String>, var: impl Into<String>, body: Estimand) -> Estimand {
        Estimand::Sum {
            sym: sym.into(),
            var: var.into(),
            body: Box::new(body),
        }
    }

    pub fn product(factors: Vec<Estimand>) -> Estimand {
        let mut flat = Vec::new();
        for f in factors {
            match f {
                Estimand::Product(inner) => flat.extend(inner),
                Estimand::One => {}
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Estimand::One,
            1 => flat.into_iter().next().unwrap(),
            _ => Estimand::Product(flat),
        }
    }

    pub fn quotient(num: Estimand, den: Estimand) -> Estimand {
        if den == Estimand::One {
            num
        } else if num == den {
            Estimand::One
        } else {
            Estimand::Quotient(Box::new(num), Box::new(den))
        }
    }

    /// Free variables of the tree (targets and conditioning variables).
    pub fn free_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_free(&self, out: &mut Vec<String>) {
        match self {
            Estimand::Term(t) => {
                for occ in t.targets.iter().chain(&t.given) {
                    if let Occ::Free(v) = occ {
                        out.push(v.clone());
                    }
                }
            }
            Estimand::Sum { body, .. } => body.collect_free(out),
            Estimand::Product(fs) => fs.iter().for_each(|f| f.collect_free(out)),
            Estimand::Quotient(n, d) => {
                n.collect_free(out);
                d.collect_free(out);
            }
            Estimand::One => {}
        }
    }

    fn mentions_sym(&self, sym: &str) -> bool {
        match self {
            Estimand::Term(t) => t
                .targets
                .iter()
                .chain(&t.given)
                .any(|o| matches!(o, Occ::Bound { sym: s, .. } if s == sym)),
            Estimand::Sum { body, .. } => body.mentions_sym(sym),
            Estimand::Product(fs) => fs.iter().any(|f| f.mentions_sym(sym)),
            Estimand::Quotient(n, d) => n.mentions_sym(sym) || d.mentions_sym(sym),
            Estimand::One => false,
        }
    }
}

// ── Rendering ────────────────────────────────────────────────────────────

/// Deterministic text form: `sum_c p(B|A,c) p(c)`; products are
/// juxtaposition, quotients use `/`.
pub fn render(e: &Estimand) -> String {
    let mut s = String::new();
    render_into(e, &mut s, false);
    s
}

fn render_into(e: &Estimand, out: &mut String, parenthesize_sums: bool) {
    match e {
        Estimand::Term(t) => {
            out.push_str("p(");
            for (i, occ) in t.targets.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(occ.display());
            }
            if !t.given.is_empty() {
                out.push('|');
                for (i, occ) in t.given.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(occ.display());
                }
            }
            out.push(')');
            if t.dist != OBS_DIST {
                let _ = write!(out, "@{}", t.dist);
            }
        }
        Estimand::Sum { sym, body, .. } => {
            let needs_paren = parenthesize_sums;
            if needs_paren {
                out.push('(');
            }
            let _ = write!(out, "sum_{sym} ");
            render_into(body, out, false);
            if needs_paren {
                out.push(')');
            }
        }
        Estimand::Product(fs) => {
            for (i, f) in fs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                // A non-final sum factor would capture the rest of the
                // product without parentheses.
                render_into(f, out, i + 1 < fs.len() || parenthesize_sums);
            }
        }
        Estimand::Quotient(n, d) => {
            render_into(n, out, true);
            out.push_str(" / ");
            match **d {
                Estimand::Term(_) | Estimand::One => render_into(d, out, true),
                _ => {
                    out.push('(');
                    render_into(d, out, false);
                    out.push(')');
                }
            }
        }
        Estimand::One => out.push('1'),
    }
}

// ── Simplification ───────────────────────────────────────────────────────

/// Cancels identical quotients and collapses sums whose bound symbol only
/// normalizes away (`sum_x p(x|·) = 1`); never changes evaluation results.
pub fn simplify(e: &Estimand) -> Estimand {
    match e {
        Estimand::Term(_) | Estimand::One => e.clone(),
        Estimand::Product(fs) => Estimand::product(fs.iter().map(simplify).collect()),
        Estimand::Quotient(n, d) => Estimand::quotient(simplify(n), simplify(d)),
        Estimand::Sum { sym, var, body } => {
            let body = simplify(body);
            // Collect product factors (a single term counts as one factor).
            let factors: Vec<Estimand> = match body.clone() {
                Estimand::Product(fs) => fs,
                other => vec![other],
            };
            // A factor p(sym | ...) whose conditioners do not mention sym is
            // the integration weight; if no other factor mentions sym, the
            // sum integrates to one.
            let normalizer = factors.iter().position(|f| match f {
                Estimand::Term(t) => {
                    t.targets.len() == 1
                        && matches!(&t.targets[0], Occ::Bound { sym: s, .. } if s == sym)
                        && !t
                            .given
                            .iter()
                            .any(|o| matches!(o, Occ::Bound { sym: s, .. } if s == sym))
                }
                _ => false,
            });
            if let Some(i) = normalizer {
                let rest: Vec<Estimand> = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, f)| f.clone())
                    .collect();
                if !rest.iter().any(|f| f.mentions_sym(sym)) {
                    return simplify(&Estimand::product(rest));
                }
            }
            if !body.mentions_sym(sym) {
                // Only reachable when a previous rewrite removed the symbol
                // entirely; the sum is then vacuous.
                return body;
            }
            Estimand::sum(sym.clone(), var.clone(), body)
        }
    }
}

// ── Evaluation ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum PotVar {
    Free(String),
    Bound(String),
}

/// Gaussian potential in canonical form: exp(-1/2 v'Kv + h'v + g).
#[derive(Debug, Clone)]
struct Potential {
    vars: Vec<PotVar>,
    k: DMatrix<f64>,
    h: DVector<f64>,
    g: f64,
}

impl Potential {
    fn unit() -> Potential {
        Potential {
            vars: Vec::new(),
            k: DMatrix::zeros(0, 0),
            h: DVector::zeros(0),
            g: 0.0,
        }
    }

    /// Extend to a common sorted variable list.
    fn aligned(&self, vars: &[PotVar]) -> Potential {
        let map: BTreeMap<&PotVar, usize> =
            self.vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let n = vars.len();
        let mut k = DMatrix::zeros(n, n);
        let mut h = DVector::zeros(n);
        for (i, v) in vars.iter().enumerate() {
            if let Some(&oi) = map.get(v) {
                h[i] = self.h[oi];
                for (j, u) in vars.iter().enumerate() {
                    if let Some(&oj) = map.get(u) {
                        k[(i, j)] = self.k[(oi, oj)];
                    }
                }
            }
        }
        Potential {
            vars: vars.to_vec(),
            k,
            h,
            g: self.g,
        }
    }

    fn combine(&self, other: &Potential, sign: f64) -> Potential {
        let mut vars: Vec<PotVar> = self.vars.iter().chain(&other.vars).cloned().collect();
        vars.sort();
        vars.dedup();
        let a = self.aligned(&vars);
        let b = other.aligned(&vars);
        Potential {
            vars,
            k: a.k + sign * b.k,
            h: a.h + sign * b.h,
            g: a.g + sign * b.g,
        }
    }

    fn multiply(&self, other: &Potential) -> Potential {
        self.combine(other, 1.0)
    }

    fn divide(&self, other: &Potential) -> Potential {
        self.combine(other, -1.0)
    }

    /// Integrate one variable out of the canonical form.
    fn integrate_out(&self, var: &PotVar) -> Result<Potential> {
        let Some(bi) = self.vars.iter().position(|v| v == var) else {
            return Err(Error::Unsupported(format!(
                "sum over a symbol absent from the body: {var:?}"
            )));
        };
        let keep: Vec<usize> = (0..self.vars.len()).filter(|&i| i != bi).collect();
        let kbb = self.k[(bi, bi)];
        if kbb <= 1e-12 {
            return Err(Error::Unsupported(
                "sum does not converge (non-positive precision on bound symbol)".into(),
            ));
        }
        let kab = DVector::from_iterator(keep.len(), keep.iter().map(|&i| self.k[(i, bi)]));
        let hb = self.h[bi];
        let mut k = DMatrix::zeros(keep.len(), keep.len());
        let mut h = DVector::zeros(keep.len());
        for (r, &i) in keep.iter().enumerate() {
            h[r] = self.h[i] - kab[r] * hb / kbb;
            for (c, &j) in keep.iter().enumerate() {
                k[(r, c)] = self.k[(i, j)] - kab[r] * kab[c] / kbb;
            }
        }
        Ok(Potential {
            vars: keep.iter().map(|&i| self.vars[i].clone()).collect(),
            k,
            h,
            g: self.g + 0.5 * (LN_2PI - kbb.ln() + hb * hb / kbb),
        })
    }

    /// Plug in values for a subset of the variables.
    fn reduce(&self, values: &[(PotVar, f64)]) -> Potential {
        let obs_idx: Vec<usize> = values
            .iter()
            .filter_map(|(v, _)| self.vars.iter().position(|u| u == v))
            .collect();
        if obs_idx.is_empty() {
            return self.clone();
        }
        let vals: Vec<f64> = values
            .iter()
            .filter(|(v, _)| self.vars.contains(v))
            .map(|(_, x)| *x)
            .collect();
        let keep: Vec<usize> = (0..self.vars.len())
            .filter(|i| !obs_idx.contains(i))
            .collect();
        let x = DVector::from_vec(vals);
        let kbb = DMatrix::from_fn(obs_idx.len(), obs_idx.len(), |r, c| {
            self.k[(obs_idx[r], obs_idx[c])]
        });
        let hb = DVector::from_iterator(obs_idx.len(), obs_idx.iter().map(|&i| self.h[i]));
        let mut k = DMatrix::zeros(keep.len(), keep.len());
        let mut h = DVector::zeros(keep.len());
        for (r, &i) in keep.iter().enumerate() {
            let kab_row = DVector::from_iterator(obs_idx.len(), obs_idx.iter().map(|&j| self.k[(i, j)]));
            h[r] = self.h[i] - kab_row.dot(&x);
            for (c, &j) in keep.iter().enumerate() {
                k[(r, c)] = self.k[(i, j)];
            }
        }
        let g = self.g + hb.dot(&x) - 0.5 * (x.transpose() * kbb * &x)[(0, 0)];
        Potential {
            vars: keep.iter().map(|&i| self.vars[i].clone()).collect(),
            k,
            h,
            g,
        }
    }
}

/// Canonical form of the conditional density `p(targets | given)` taken from
/// a base Gaussian, with variables renamed to potential variables.
fn term_potential(t: &ProbTerm, base: &HashMap<String, GaussianDist>) -> Result<Potential> {
    let dist = base
        .get(&t.dist)
        .ok_or_else(|| Error::input(format!("unknown distribution reference {:?}", t.dist)))?;
    let joint_occ: Vec<&Occ> = t.targets.iter().chain(&t.given).collect();
    let joint_vars: Vec<&str> = joint_occ.iter().map(|o| o.var()).collect();
    let joint = dist.marginal(&joint_vars)?;
    let pot_joint = density_potential(&joint, &joint_occ)?;
    if t.given.is_empty() {
        return Ok(pot_joint);
    }
    let given_occ: Vec<&Occ> = t.given.iter().collect();
    let given_vars: Vec<&str> = given_occ.iter().map(|o| o.var()).collect();
    let marg = dist.marginal(&given_vars)?;
    let pot_marg = density_potential(&marg, &given_occ)?;
    Ok(pot_joint.divide(&pot_marg))
}

fn pot_var(o: &Occ) -> PotVar {
    match o {
        Occ::Free(v) => PotVar::Free(v.clone()),
        Occ::Bound { sym, .. } => PotVar::Bound(sym.clone()),
    }
}

/// Canonical form of a Gaussian density, renaming dimension i to `occ[i]`.
fn density_potential(d: &GaussianDist, occ: &[&Occ]) -> Result<Potential> {
    let (k, logdet) = sym_pinv(&d.cov)?;
    let h = &k * &d.mean;
    let g = -0.5 * (d.mean.dot(&h) + d.vars.len() as f64 * LN_2PI + logdet);
    let mut vars: Vec<PotVar> = occ.iter().map(|o| pot_var(o)).collect();
    // Align to sorted unique order.
    let mut order: Vec<usize> = (0..vars.len()).collect();
    order.sort_by(|&a, &b| vars[a].cmp(&vars[b]));
    let k = DMatrix::from_fn(vars.len(), vars.len(), |r, c| (k)[(order[r], order[c])]);
    let h = DVector::from_iterator(vars.len(), order.iter().map(|&i| h[i]));
    vars.sort();
    Ok(Potential { vars, k, h, g })
}

fn eval_potential(
    e: &Estimand,
    base: &HashMap<String, GaussianDist>,
) -> Result<Potential> {
    match e {
        Estimand::Term(t) => term_potential(t, base),
        Estimand::Sum { sym, body, .. } => {
            eval_potential(body, base)?.integrate_out(&PotVar::Bound(sym.clone()))
        }
        Estimand::Product(fs) => {
            let mut acc = Potential::unit();
            for f in fs {
                acc = acc.multiply(&eval_potential(f, base)?);
            }
            Ok(acc)
        }
        Estimand::Quotient(n, d) => {
            Ok(eval_potential(n, base)?.divide(&eval_potential(d, base)?))
        }
        Estimand::One => Ok(Potential::unit()),
    }
}

/// Evaluates an estimand to the Gaussian over its unfixed free variables,
/// after plugging in `fixed` (intervention values and conditioning values).
pub fn eval_gaussian(
    e: &Estimand,
    base: &HashMap<String, GaussianDist>,
    fixed: &HashMap<String, f64>,
) -> Result<GaussianDist> {
    let pot = eval_potential(e, base)?;
    let values: Vec<(PotVar, f64)> = fixed
        .iter()
        .map(|(v, &x)| (PotVar::Free(v.clone()), x))
        .collect();
    let pot = pot.reduce(&values);
    for v in &pot.vars {
        if let PotVar::Bound(s) = v {
            return Err(Error::Unsupported(format!("unintegrated bound symbol {s:?}")));
        }
    }
    let names: Vec<String> = pot
        .vars
        .iter()
        .map(|v| match v {
            PotVar::Free(n) => n.clone(),
            PotVar::Bound(_) => unreachable!(),
        })
        .collect();
    let (cov, _) = sym_pinv(&pot.k)?;
    let mean = &cov * &pot.h;
    GaussianDist::new(names, mean, cov)
}

/// Total mass of the estimand after fixing `fixed`: integrates the remaining
/// free variables. A well-formed conditional density evaluates to 1.
pub fn eval_mass(
    e: &Estimand,
    base: &HashMap<String, GaussianDist>,
    fixed: &HashMap<String, f64>,
) -> Result<f64> {
    let pot = eval_potential(e, base)?;
    let values: Vec<(PotVar, f64)> = fixed
        .iter()
        .map(|(v, &x)| (PotVar::Free(v.clone()), x))
        .collect();
    let mut pot = pot.reduce(&values);
    while let Some(v) = pot.vars.first().cloned() {
        pot = pot.integrate_out(&v)?;
    }
    Ok(pot.g.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_two_var() -> HashMap<String, GaussianDist> {
        // A ~ N(0,1), B = 0.8 A + e, var(e)=0.5.
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 0.8f64 * 0.8 + 0.5]);
        let d = GaussianDist::new(
            vec!["A".into(), "B".into()],
            DVector::zeros(2),
            cov,
        )
        .unwrap();
        HashMap::from([(OBS_DIST.to_string(), d)])
    }

    #[test]
    fn conditional_matches_textbook() {
        let base = base_two_var();
        let e = Estimand::obs(&["B"], &["A"]);
        let fixed = HashMap::from([("A".to_string(), 2.0)]);
        let d = eval_gaussian(&e, &base, &fixed).unwrap();
        assert_relative_eq!(d.mean[0], 1.6, epsilon = 1e-12);
        assert_relative_eq!(d.cov[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn sum_normalizes_to_one() {
        let base = base_two_var();
        let e = Estimand::sum("a", "A", Estimand::term(OBS_DIST, vec![Occ::bound("a", "A")], vec![]));
        let mass = eval_mass(&e, &base, &HashMap::new()).unwrap();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn marginalization_by_sum() {
        // sum_a p(B|a) p(a) = p(B).
        let base = base_two_var();
        let e = Estimand::sum(
            "a",
            "A",
            Estimand::product(vec![
                Estimand::term(
                    OBS_DIST,
                    vec![Occ::free("B")],
                    vec![Occ::bound("a", "A")],
                ),
                Estimand::term(OBS_DIST, vec![Occ::bound("a", "A")], vec![]),
            ]),
        );
        let d = eval_gaussian(&e, &base, &HashMap::new()).unwrap();
        assert_relative_eq!(d.mean[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(d.cov[(0, 0)], 0.8f64 * 0.8 + 0.5, epsilon = 1e-10);
    }

    #[test]
    fn render_golden() {
        let backdoor = Estimand::sum(
            "c",
            "C",
            Estimand::product(vec![
                Estimand::term(
                    OBS_DIST,
                    vec![Occ::free("B")],
                    vec![Occ::free("A"), Occ::bound("c", "C")],
                ),
                Estimand::term(OBS_DIST, vec![Occ::bound("c", "C")], vec![]),
            ]),
        );
        assert_eq!(render(&backdoor), "sum_c p(B|A,c) p(c)");
        assert_eq!(render(&Estimand::obs(&["Y"], &[])), "p(Y)");
    }

    #[test]
    fn render_nested_sums_frontdoor_shape() {
        let inner = Estimand::sum(
            "a'",
            "A",
            Estimand::product(vec![
                Estimand::term(
                    OBS_DIST,
                    vec![Occ::free("D")],
                    vec![Occ::bound("b", "B"), Occ::free("C"), Occ::bound("a'", "A")],
                ),
                Estimand::term(OBS_DIST, vec![Occ::bound("a'", "A")], vec![Occ::free("C")]),
            ]),
        );
        let e = Estimand::sum(
            "b",
            "B",
            Estimand::product(vec![
                Estimand::term(
                    OBS_DIST,
                    vec![Occ::bound("b", "B")],
                    vec![Occ::free("A"), Occ::free("C")],
                ),
                inner,
            ]),
        );
        assert_eq!(render(&e), "sum_b p(b|A,C) sum_a' p(D|b,C,a') p(a'|C)");
    }

    #[test]
    fn simplify_normalizing_sum() {
        // sum_a p(a|C) p(B|A,C) -> p(B|A,C): the bound symbol only occurs in
        // its own normalizing factor.
        let e = Estimand::sum(
            "a",
            "A",
            Estimand::product(vec![
                Estimand::term(OBS_DIST, vec![Occ::bound("a", "A")], vec![Occ::free("C")]),
                Estimand::obs(&["B"], &["A", "C"]),
            ]),
        );
        assert_eq!(simplify(&e), Estimand::obs(&["B"], &["A", "C"]));
    }

    #[test]
    fn simplify_quotient_cancellation() {
        let t = Estimand::obs(&["A"], &[]);
        assert_eq!(
            simplify(&Estimand::quotient(t.clone(), t.clone())),
            Estimand::One
        );
        assert_eq!(simplify(&Estimand::quotient(t.clone(), Estimand::One)), t);
    }

    #[test]
    fn simplify_preserves_eval() {
        let base = base_two_var();
        let e = Estimand::sum(
            "a",
            "A",
            Estimand::product(vec![
                Estimand::term(OBS_DIST, vec![Occ::bound("a", "A")], vec![]),
                Estimand::obs(&["B"], &["A"]),
            ]),
        );
        let fixed = HashMap::from([("A".to_string(), 1.5)]);
        let d1 = eval_gaussian(&e, &base, &fixed).unwrap();
        let d2 = eval_gaussian(&simplify(&e), &base, &fixed).unwrap();
        assert!(d1.max_diff(&d2).unwrap() < 1e-10);
    }

    #[test]
    fn free_variables_listed() {
        let e = Estimand::sum(
            "c",
            "C",
            Estimand::product(vec![
                Estimand::term(
                    OBS_DIST,
                    vec![Occ::free("B")],
                    vec![Occ::free("A"), Occ::bound("c", "C")],
                ),
                Estimand::term(OBS_DIST, vec![Occ::bound("c", "C")], vec![]),
            ]),
        );
        assert_eq!(e.free_variables(), vec!["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn condition_and_marginal_roundtrip() {
        let base = base_two_var();
        let d = &base[OBS_DIST];
        let c = d.condition(&[("A", 2.0)]).unwrap();
        assert_relative_eq!(c.mean[0], 1.6, epsilon = 1e-12);
        let m = d.marginal(&["B"]).unwrap();
        assert_relative_eq!(m.cov[(0, 0)], 1.14, epsilon = 1e-12);
    }

    #[test]
    fn quotient_evaluates() {
        // p(A,B) / p(A) = p(B|A).
        let base = base_two_var();
        let e = Estimand::quotient(Estimand::obs(&["A", "B"], &[]), Estimand::obs(&["A"], &[]));
        let fixed = HashMap::from([("A".to_string(), -1.0)]);
        let d = eval_gaussian(&e, &base, &fixed).unwrap();
        assert_relative_eq!(d.mean[0], -0.8, epsilon = 1e-12);
        assert_relative_eq!(d.cov[(0, 0)], 0.5, epsilon = 1e-12);
    }
}
