#![allow(dead_code)]

use pbb_core::distr::Distribution;
use pbb_core::rational::{rat, Rational};
use pbb_core::semantics::den;
use pbb_core::terms::{Action, NTerm, PTerm};
use proptest::prelude::*;

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        2 => Just(Action::tau()),
        1 => Just(Action::new("a").unwrap()),
        1 => Just(Action::new("b").unwrap()),
    ]
}

pub fn prob() -> impl Strategy<Value = Rational> {
    (2i64..=4).prop_flat_map(|d| (1..d).prop_map(move |n| rat(n, d)))
}

pub fn nterm(depth: u32) -> BoxedStrategy<NTerm> {
    if depth == 0 {
        return Just(NTerm::nil()).boxed();
    }
    prop_oneof![
        1 => Just(NTerm::nil()),
        3 => (action(), pterm(depth - 1)).prop_map(|(a, p)| NTerm::prefix(a, p)),
        1 => (nterm(depth - 1), nterm(depth - 1)).prop_map(|(l, r)| NTerm::choice(l, r)),
    ]
    .boxed()
}

pub fn pterm(depth: u32) -> BoxedStrategy<PTerm> {
    if depth == 0 {
        return nterm(0).prop_map(PTerm::dirac).boxed();
    }
    prop_oneof![
        2 => nterm(depth).prop_map(PTerm::dirac),
        1 => (pterm(depth - 1), prob(), pterm(depth - 1)).prop_map(|(l, r, q)| PTerm::choice(l, r, q).unwrap()),
    ]
    .boxed()
}

pub fn distribution(depth: u32) -> BoxedStrategy<Distribution> {
    pterm(depth).prop_map(|p| den(&p)).boxed()
}

pub fn total(d: &Distribution) -> Rational {
    d.iter().map(|(_, w)| w.clone()).sum()
}
