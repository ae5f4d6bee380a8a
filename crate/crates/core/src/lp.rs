//! Exact feasibility for systems `A x = b, x >= 0` over the rationals.
//!
//! Phase-one simplex with Bland's rule on a dense tableau. Artificial
//! columns are implicit: once an artificial leaves the basis it never
//! re-enters, so only the basis marker is kept.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::{Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

/// Affine expression `constant + sum coeff * var`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub constant: Rational,
    pub terms: BTreeMap<Var, Rational>,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: Rational) -> Self {
        LinExpr { constant: c, terms: BTreeMap::new() }
    }

    pub fn var(v: Var) -> Self {
        let mut e = LinExpr::zero();
        e.add_term(v, crate::rational::one());
        e
    }

    pub fn add_term(&mut self, v: Var, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(v).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn add_constant(&mut self, c: &Rational) {
        self.constant += c;
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinExpr, scale: &Rational) {
        if scale.is_zero() {
            return;
        }
        self.constant += &other.constant * scale;
        for (v, c) in &other.terms {
            self.add_term(*v, c * scale);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.terms.is_empty()
    }
}

/// A system of equalities over non-negative variables.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    vars: usize,
    rows: Vec<(BTreeMap<Var, Rational>, Rational)>,
    infeasible: bool,
}

#[derive(Clone, Debug)]
pub struct Solution {
    values: Vec<Rational>,
}

impl Solution {
    pub fn value(&self, v: Var) -> Rational {
        self.values[v.0].clone()
    }

    pub fn eval(&self, e: &LinExpr) -> Rational {
        let mut acc = e.constant.clone();
        for (v, c) in &e.terms {
            if !self.values[v.0].is_zero() {
                acc += c * &self.values[v.0];
            }
        }
        acc
    }
}

impl Lp {
    pub fn new() -> Self {
        Lp::default()
    }

    pub fn var(&mut self) -> Var {
        self.vars += 1;
        Var(self.vars - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds the constraint `lhs = rhs`.
    pub fn eq(&mut self, lhs: &LinExpr, rhs: &LinExpr) {
        let mut diff = lhs.clone();
        diff.add_scaled(rhs, &-crate::rational::one());
        self.eq_zero(diff);
    }

    /// Adds the constraint `e = 0`.
    pub fn eq_zero(&mut self, e: LinExpr) {
        let rhs = -e.constant;
        if e.terms.is_empty() {
            if !rhs.is_zero() {
                self.infeasible = true;
            }
            return;
        }
        self.rows.push((e.terms, rhs));
    }

    pub fn solve(&self) -> Option<Solution> {
        if self.infeasible {
            return None;
        }
        let n = self.vars;
        let m = self.rows.len();
        let width = n + 1;
        let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
        for (terms, rhs) in &self.rows {
            let mut row = vec![Rational::zero(); width];
            let flip = rhs.is_negative();
            for (v, c) in terms {
                row[v.0] = if flip { -c.clone() } else { c.clone() };
            }
            row[n] = if flip { -rhs.clone() } else { rhs.clone() };
            t.push(row);
        }
        // None marks an artificial basic variable.
        let mut basis: Vec<Option<usize>> = vec![None; m];
        let mut obj = vec![Rational::zero(); width];
        for row in &t {
            for j in 0..width {
                if !row[j].is_zero() {
                    obj[j] += &row[j];
                }
            }
        }
        while let Some(enter) = (0..n).find(|&j| obj[j].is_positive()) {
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..m {
                if !t[i][enter].is_positive() {
                    continue;
                }
                let ratio = &t[i][n] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr
                            || (ratio == *lr && basis_key(basis[i], n, i) < basis_key(basis[*li], n, *li))
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            // Unbounded is impossible for phase one: the objective is bounded below.
            let (r, _) = leave.expect("phase-one objective is bounded");
            pivot(&mut t, &mut obj, r, enter);
            basis[r] = Some(enter);
        }
        if !obj[n].is_zero() {
            return None;
        }
        let mut values = vec![Rational::zero(); n];
        for (i, b) in basis.iter().enumerate() {
            if let Some(j) = b {
                values[*j] = t[i][n].clone();
            }
        }
        Some(Solution { values })
    }
}

impl core::fmt::Display for Lp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "{} variables x_i >= 0", self.vars)?;
        if self.infeasible {
            writeln!(f, "0 = 1")?;
        }
        for (terms, rhs) in &self.rows {
            for (k, (v, c)) in terms.iter().enumerate() {
                if k > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "{}*x{}", c, v.0)?;
            }
            writeln!(f, " = {}", rhs)?;
        }
        Ok(())
    }
}

fn basis_key(b: Option<usize>, n: usize, row: usize) -> usize {
    b.unwrap_or(n + 1 + row)
}

fn pivot(t: &mut [Vec<Rational>], obj: &mut [Rational], r: usize, c: usize) {
    let p = t[r][c].clone();
    for x in t[r].iter_mut() {
        if !x.is_zero() {
            *x /= &p;
        }
    }
    let nz: Vec<usize> = (0..t[r].len()).filter(|&j| !t[r][j].is_zero()).collect();
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r || row[c].is_zero() {
            continue;
        }
        let f = row[c].clone();
        for &j in &nz {
            row[j] -= &f * &prow[j];
        }
    }
    if !obj[c].is_zero() {
        let f = obj[c].clone();
        for &j in &nz {
            obj[j] -= &f * &prow[j];
        }
    }
}
