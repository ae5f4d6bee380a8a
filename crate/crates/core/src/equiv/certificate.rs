use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use super::partition::StatePartition;
use crate::distr::Distribution;
use crate::lp::{LinExpr, Lp};
use crate::rational::one;
use crate::semantics::{constant_vec, VecExpr};
use crate::terms::NTerm;

/// Closure operations applied to the listed pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Closures {
    pub symmetric: bool,
    pub diagonal: bool,
    pub convex: bool,
}

impl Closures {
    pub const ALL: Closures = Closures { symmetric: true, diagonal: true, convex: true };

    pub fn union(self, other: Closures) -> Closures {
        Closures {
            symmetric: self.symmetric || other.symmetric,
            diagonal: self.diagonal || other.diagonal,
            convex: self.convex || other.convex,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.symmetric {
            out.push("symmetric");
        }
        if self.diagonal {
            out.push("diagonal");
        }
        if self.convex {
            out.push("convex");
        }
        out
    }
}

/// A finite presentation of a relation on distributions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub pairs: Vec<(Distribution, Distribution)>,
    pub closures: Closures,
}

impl Certificate {
    pub fn new(pairs: Vec<(Distribution, Distribution)>, closures: Closures) -> Self {
        Certificate { pairs, closures }
    }

    /// The identity relation.
    pub fn diagonal() -> Self {
        Certificate { pairs: Vec::new(), closures: Closures { symmetric: true, diagonal: true, convex: false } }
    }

    pub fn mirrored(&self) -> Self {
        Certificate {
            pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
            closures: self.closures,
        }
    }

    /// Listed pairs plus their mirrors when symmetric, without duplicates.
    pub fn generators(&self) -> Vec<(Distribution, Distribution)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mirrors = self.pairs.iter().filter(|_| self.closures.symmetric).map(|(a, b)| (b, a));
        for (a, b) in self.pairs.iter().map(|(a, b)| (a, b)).chain(mirrors) {
            if seen.insert((a.clone(), b.clone())) {
                out.push((a.clone(), b.clone()));
            }
        }
        out
    }

    pub fn states(&self) -> BTreeSet<NTerm> {
        self.pairs.iter().flat_map(|(a, b)| a.support().chain(b.support())).cloned().collect()
    }

    pub(crate) fn relation(&self) -> Relation {
        Relation::new(self.generators(), self.closures.diagonal, self.closures.convex, None)
    }

    /// Membership of `(mu, nu)` in the denoted relation.
    pub fn relates(&self, mu: &Distribution, nu: &Distribution) -> bool {
        self.relation().contains(mu, nu)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b) in &self.pairs {
            writeln!(f, "{} ~ {}", a, b)?;
        }
        write!(f, "closures: {:?}", self.closures.names())
    }
}

/// Oriented generators with optional diagonal, convex closure, and block
/// transport: with a partition, `(x, y)` may additionally move mass freely
/// within blocks, which is `cc` of all within-block Dirac pairs.
#[derive(Clone, Debug)]
pub(crate) struct Relation {
    gens: Vec<(Distribution, Distribution)>,
    diagonal: bool,
    convex: bool,
    blocks: Option<StatePartition>,
    by_left: BTreeMap<Distribution, Vec<usize>>,
}

impl Relation {
    pub fn new(
        gens: Vec<(Distribution, Distribution)>,
        diagonal: bool,
        convex: bool,
        blocks: Option<StatePartition>,
    ) -> Self {
        let mut by_left: BTreeMap<Distribution, Vec<usize>> = BTreeMap::new();
        for (i, (a, _)) in gens.iter().enumerate() {
            by_left.entry(a.clone()).or_default().push(i);
        }
        Relation { gens, diagonal: diagonal || blocks.is_some(), convex, blocks, by_left }
    }

    pub fn generators(&self) -> &[(Distribution, Distribution)] {
        &self.gens
    }

    pub fn diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    /// Right partners of `mu` among the generators, plus `mu` itself on the diagonal.
    pub fn partners(&self, mu: &Distribution) -> Vec<Distribution> {
        let mut out: Vec<Distribution> = Vec::new();
        if self.diagonal {
            out.push(mu.clone());
        }
        for &i in self.by_left.get(mu).map(|v| v.as_slice()).unwrap_or(&[]) {
            if !out.contains(&self.gens[i].1) {
                out.push(self.gens[i].1.clone());
            }
        }
        out
    }

    fn same_block(&self, mu: &Distribution, nu: &Distribution) -> bool {
        let Some(pi) = &self.blocks else { return false };
        let mut acc: BTreeMap<Option<usize>, crate::rational::Rational> = BTreeMap::new();
        for (e, w) in mu.iter() {
            *acc.entry(pi.block_of(e)).or_insert_with(num_traits::Zero::zero) += w;
        }
        for (e, w) in nu.iter() {
            *acc.entry(pi.block_of(e)).or_insert_with(num_traits::Zero::zero) -= w;
        }
        acc.iter().all(|(b, w)| b.is_some() && num_traits::Zero::is_zero(w))
    }

    pub fn contains(&self, mu: &Distribution, nu: &Distribution) -> bool {
        if self.diagonal && mu == nu {
            return true;
        }
        if self.by_left.get(mu).is_some_and(|v| v.iter().any(|&i| self.gens[i].1 == *nu)) {
            return true;
        }
        if !self.convex {
            return false;
        }
        if self.same_block(mu, nu) {
            return true;
        }
        let mut lp = Lp::new();
        self.add_membership(&mut lp, &constant_vec(mu), &constant_vec(nu));
        lp.solve().is_some()
    }

    /// Constrains `(x, y)` to the convex cone spanned by the relation, so
    /// scaled pairs are accepted too. Requires the convex flag.
    pub fn add_membership(&self, lp: &mut Lp, x: &VecExpr, y: &VecExpr) {
        debug_assert!(self.convex);
        let mut xs: BTreeMap<&NTerm, LinExpr> = x.keys().map(|k| (k, LinExpr::zero())).collect();
        let mut ys: BTreeMap<&NTerm, LinExpr> = y.keys().map(|k| (k, LinExpr::zero())).collect();
        for (a, b) in &self.gens {
            if a.support().any(|e| !xs.contains_key(e)) || b.support().any(|e| !ys.contains_key(e)) {
                continue;
            }
            let l = lp.var();
            for (e, w) in a.iter() {
                xs.get_mut(e).expect("filtered").add_term(l, w.clone());
            }
            for (e, w) in b.iter() {
                ys.get_mut(e).expect("filtered").add_term(l, w.clone());
            }
        }
        match &self.blocks {
            Some(pi) => {
                // Block transport: matched slack on both sides, equal per block.
                let mut per_block: BTreeMap<usize, LinExpr> = BTreeMap::new();
                for (e, acc) in xs.iter_mut() {
                    if let Some(b) = pi.block_of(e) {
                        let v = lp.var();
                        acc.add_term(v, one());
                        per_block.entry(b).or_default().add_term(v, one());
                    }
                }
                for (e, acc) in ys.iter_mut() {
                    if let Some(b) = pi.block_of(e) {
                        let v = lp.var();
                        acc.add_term(v, one());
                        per_block.entry(b).or_default().add_term(v, -one());
                    }
                }
                for (_, e) in per_block {
                    lp.eq_zero(e);
                }
            }
            None if self.diagonal => {
                for (e, acc) in xs.iter_mut() {
                    if let Some(acc_y) = ys.get_mut(*e) {
                        let v = lp.var();
                        acc.add_term(v, one());
                        acc_y.add_term(v, one());
                    }
                }
            }
            None => {}
        }
        for (e, acc) in xs {
            lp.eq(&x[e], &acc);
        }
        for (e, acc) in ys {
            lp.eq(&y[e], &acc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::parse_distribution;
    use alloc::vec;

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    #[test]
    fn generators_dedup() {
        let a = d("{1: a.D(0)}");
        let b = d("{1: b.D(0)}");
        let c = Certificate::new(vec![(a.clone(), b.clone()), (b.clone(), a.clone())], Closures::ALL);
        assert_eq!(c.generators().len(), 2);
        assert_eq!(c.mirrored().generators().len(), 2);
    }

    #[test]
    fn convex_membership() {
        let t = d("{1: tau.(D(a.D(0)) +[1/2] D(b.D(0)))}");
        let half = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let c = Certificate::new(vec![(t.clone(), half.clone())], Closures::ALL);
        let mu = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let nu = d("{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/3: a.D(0), 1/3: b.D(0)}");
        assert!(c.relates(&mu, &nu));
        assert!(c.relates(&nu, &mu));
        let skew = d("{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/2: a.D(0), 1/6: b.D(0)}");
        assert!(!c.relates(&mu, &skew));
        let plain = Certificate::new(c.pairs.clone(), Closures { convex: false, ..Closures::ALL });
        assert!(!plain.relates(&mu, &nu));
        assert!(plain.relates(&half, &t));
    }

    #[test]
    fn block_transport() {
        let pi = StatePartition::from_blocks([
            BTreeSet::from([d("{1: a.D(0)}").as_dirac().unwrap().clone(), d("{1: a.D(0) + a.D(0)}").as_dirac().unwrap().clone()]),
            BTreeSet::from([d("{1: b.D(0)}").as_dirac().unwrap().clone()]),
        ]);
        let r = Relation::new(Vec::new(), true, true, Some(pi));
        assert!(r.contains(&d("{1/2: a.D(0), 1/2: b.D(0)}"), &d("{1/2: a.D(0) + a.D(0), 1/2: b.D(0)}")));
        assert!(!r.contains(&d("{1/2: a.D(0), 1/2: b.D(0)}"), &d("{1: a.D(0) + a.D(0)}")));
    }
}
