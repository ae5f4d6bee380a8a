use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::partition::{class_vector, ClassVector, StatePartition};
use crate::distr::Distribution;
use crate::lp::{LinExpr, Lp};
use crate::rational::one;
use crate::semantics::Universe;
use crate::terms::{Action, NTerm};

/// Whether `v` is a convex combination of `others`.
fn in_hull(v: &ClassVector, others: &[&ClassVector]) -> bool {
    if others.is_empty() {
        return false;
    }
    let mut lp = Lp::new();
    let mut total = LinExpr::zero();
    let mut coords: BTreeMap<usize, LinExpr> = BTreeMap::new();
    for w in others {
        let l = lp.var();
        total.add_term(l, one());
        for (b, p) in w.iter() {
            coords.entry(*b).or_default().add_term(l, p.clone());
        }
    }
    for b in v.entries().keys() {
        coords.entry(*b).or_default();
    }
    lp.eq(&total, &LinExpr::constant(one()));
    for (b, e) in coords {
        lp.eq(&e, &LinExpr::constant(v.get(b)));
    }
    lp.solve().is_some()
}

/// The extreme points of a finite set of class vectors.
pub(crate) fn extreme_points(set: BTreeSet<ClassVector>) -> BTreeSet<ClassVector> {
    let all: Vec<ClassVector> = set.into_iter().collect();
    let mut out = BTreeSet::new();
    for (i, v) in all.iter().enumerate() {
        let others: Vec<&ClassVector> = all.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w).collect();
        if !in_hull(v, &others) {
            out.insert(v.clone());
        }
    }
    out
}

type Signature = BTreeMap<Action, BTreeSet<ClassVector>>;

fn signature(u: &Universe, e: &NTerm, pi: &StatePartition) -> Signature {
    let mut sig: BTreeMap<Action, BTreeSet<ClassVector>> = BTreeMap::new();
    for (a, eta) in u.transitions(e) {
        let v = class_vector(eta, pi).expect("universe is transition-closed");
        sig.entry(a.clone()).or_default().insert(v);
    }
    sig.into_iter().map(|(a, vs)| (a, extreme_points(vs))).collect()
}

/// Coarsest strong probabilistic bisimulation with combined transitions:
/// states are equivalent when, for every action, the hulls of their
/// successors' class vectors coincide.
pub fn strong_partition(u: &Universe) -> StatePartition {
    let mut pi = StatePartition::by_key(u.states(), |_| ());
    loop {
        let next = StatePartition::by_key(u.states(), |e| (pi.block_of(e), signature(u, e, &pi)));
        if next.len() == pi.len() {
            return next;
        }
        pi = next;
    }
}

/// Equal class vectors over the strong partition.
pub fn strong_equiv(u: &Universe, mu: &Distribution, nu: &Distribution) -> bool {
    let pi = strong_partition(u);
    match (class_vector(mu, &pi), class_vector(nu, &pi)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::build_universe;
    use crate::terms::{parse_distribution, parse_nterm};
    use alloc::format;

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    #[test]
    fn nil_alone() {
        let u = build_universe([&d("{1: 0}")]);
        assert_eq!(strong_partition(&u).len(), 1);
    }

    #[test]
    fn duplicate_summands() {
        let u = build_universe([&d("{1: a.D(0) + a.D(0)}"), &d("{1: a.D(0)}")]);
        let pi = strong_partition(&u);
        assert_eq!(pi.len(), 2);
        assert!(pi.same_block(&parse_nterm("a.D(0) + a.D(0)").unwrap(), &parse_nterm("a.D(0)").unwrap()));
        assert!(strong_equiv(&u, &d("{1: a.D(0)}"), &d("{1: a.D(0) + a.D(0)}")));
    }

    #[test]
    fn combined_successor_is_absorbed() {
        // The middle branch is a mixture of the outer two.
        let l = "a.D(b.D(0)) + a.D(c.D(0))";
        let r = "a.D(b.D(0)) + a.D(c.D(0)) + a.(D(b.D(0)) +[1/2] D(c.D(0)))";
        let u = build_universe([&d(&format!("{{1: {l}}}")), &d(&format!("{{1: {r}}}"))]);
        let pi = strong_partition(&u);
        assert!(pi.same_block(&parse_nterm(l).unwrap(), &parse_nterm(r).unwrap()));
    }

    #[test]
    fn intro_is_strongly_distinguished() {
        let mu = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let nu = d("{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/3: a.D(0), 1/3: b.D(0)}");
        let u = build_universe([&mu, &nu]);
        assert!(!strong_equiv(&u, &mu, &nu));
        assert!(strong_equiv(&u, &mu, &mu));
    }
}
