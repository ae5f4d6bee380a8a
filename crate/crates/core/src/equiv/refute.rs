//! Necessary conditions for branching bisimilarity, used to refute pairs.
//!
//! `Sure(E)` holds the visible actions `a` such that every maximal way of
//! resolving tau from `δ(E)` can be steered to states that all enable `a`;
//! `Poss(E)` holds the visible actions enabled somewhere in the tau-closure.
//! Both are invariant under bisimilarity, which yields two tests: barbs,
//! and a transport LP for weak decomposability.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::partition::StatePartition;
use crate::distr::Distribution;
use crate::lp::{LinExpr, Lp};
use crate::rational::one;
use crate::semantics::{add_weak_flow, constant_vec, Universe};
use crate::terms::{Action, NTerm};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefutationKind {
    /// One side can weakly reach an `a`-enabled distribution, the other cannot.
    Barb(Action),
    /// No weak move of the right side splits along the left side's points.
    WeakDecomposition,
}

/// An authoritative proof that two distributions are not bisimilar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refutation {
    pub kind: RefutationKind,
    /// True when the argument runs from the right-hand side.
    pub swapped: bool,
    pub detail: String,
}

impl fmt::Display for Refutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct Capabilities {
    sure: BTreeMap<NTerm, BTreeSet<Action>>,
    poss: BTreeMap<NTerm, BTreeSet<Action>>,
    partition: StatePartition,
}

impl Capabilities {
    pub fn new(u: &Universe) -> Self {
        let mut states: Vec<&NTerm> = u.states().collect();
        // Tau-targets have lower complexity, so this visits them first.
        states.sort_by(|a, b| a.complexity().cmp(&b.complexity()).then(a.cmp(b)));
        let mut sure: BTreeMap<NTerm, BTreeSet<Action>> = BTreeMap::new();
        let mut poss: BTreeMap<NTerm, BTreeSet<Action>> = BTreeMap::new();
        for e in states {
            let mut s: BTreeSet<Action> = BTreeSet::new();
            let mut p: BTreeSet<Action> = BTreeSet::new();
            for (a, eta) in u.transitions(e) {
                if a.is_tau() {
                    for f in eta.support() {
                        p.extend(poss[f].iter().cloned());
                    }
                    let mut common: Option<BTreeSet<Action>> = None;
                    for f in eta.support() {
                        common = Some(match common {
                            None => sure[f].clone(),
                            Some(c) => c.intersection(&sure[f]).cloned().collect(),
                        });
                    }
                    s.extend(common.unwrap_or_default());
                } else {
                    s.insert(a.clone());
                    p.insert(a.clone());
                }
            }
            sure.insert(e.clone(), s);
            poss.insert(e.clone(), p);
        }
        let partition = StatePartition::by_key(u.states(), |e| (sure[e].clone(), poss[e].clone()));
        Capabilities { sure, poss, partition }
    }

    pub fn sure(&self, e: &NTerm) -> Option<&BTreeSet<Action>> {
        self.sure.get(e)
    }

    pub fn poss(&self, e: &NTerm) -> Option<&BTreeSet<Action>> {
        self.poss.get(e)
    }

    /// States grouped by `(Sure, Poss)`; coarser than bisimilarity.
    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    /// `a` such that all support states of `mu` can surely do `a`.
    pub fn barbs(&self, mu: &Distribution) -> BTreeSet<Action> {
        let mut it = mu.support();
        let Some(first) = it.next() else { return BTreeSet::new() };
        let mut acc = self.sure[first].clone();
        for e in it {
            acc = acc.intersection(&self.sure[e]).cloned().collect();
        }
        acc
    }

    fn compatible(&self, e: &NTerm, g: &NTerm) -> bool {
        self.sure[e].is_subset(&self.sure[g]) && self.poss[g].is_subset(&self.poss[e])
    }

    /// Tries each test in both orientations. Supports must lie in `u`.
    pub fn refute(&self, u: &Universe, mu: &Distribution, nu: &Distribution) -> Option<Refutation> {
        if mu == nu {
            return None;
        }
        let (bm, bn) = (self.barbs(mu), self.barbs(nu));
        if let Some(a) = bm.symmetric_difference(&bn).next() {
            let swapped = !bm.contains(a);
            return Some(Refutation {
                kind: RefutationKind::Barb(a.clone()),
                swapped,
                detail: format!(
                    "{} can weakly reach a distribution enabling `{}` and {} cannot",
                    if swapped { nu } else { mu },
                    a,
                    if swapped { mu } else { nu }
                ),
            });
        }
        for (swapped, (l, r)) in [(false, (mu, nu)), (true, (nu, mu))] {
            if !self.decomposes(u, l, r) {
                return Some(Refutation {
                    kind: RefutationKind::WeakDecomposition,
                    swapped,
                    detail: format!(
                        "no weak move of {} splits into parts matching the points of {}",
                        r, l
                    ),
                });
            }
        }
        None
    }

    /// `nu ⇒ Σ_E μ(E)·ν_E` with each `spt ν_E` compatible with `E`.
    fn decomposes(&self, u: &Universe, mu: &Distribution, nu: &Distribution) -> bool {
        let mut lp = Lp::new();
        let flow = add_weak_flow(&mut lp, u, &constant_vec(nu));
        let mut sums: BTreeMap<&NTerm, LinExpr> = flow.result.keys().map(|g| (g, LinExpr::zero())).collect();
        for (e, w) in mu.iter() {
            let mut total = LinExpr::zero();
            for (g, acc) in sums.iter_mut() {
                if self.compatible(e, g) {
                    let v = lp.var();
                    acc.add_term(v, one());
                    total.add_term(v, one());
                }
            }
            lp.eq(&total, &LinExpr::constant(w.clone()));
        }
        for (g, acc) in sums {
            lp.eq(&flow.result[g], &acc);
        }
        lp.solve().is_some()
    }
}
