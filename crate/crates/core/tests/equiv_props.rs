mod common;

use common::*;
use pbb_core::distr::Distribution;
use pbb_core::equiv::{
    check_certificate, replay, strong_partition, BranchingSearch, Budget, SearchOutcome, Verdict,
};
use pbb_core::semantics::{build_universe, den, weak_reach};
use pbb_core::stability::{stabilize, wgt};
use pbb_core::terms::{Action, NTerm, PTerm};
use proptest::prelude::*;

fn small_universe() -> impl Strategy<Value = Vec<Distribution>> {
    proptest::collection::vec(distribution(2), 1..3)
}

// E  ~  tau.D(E) + E
fn graft(e: &NTerm) -> NTerm {
    NTerm::choice(NTerm::prefix(Action::tau(), PTerm::dirac(e.clone())), e.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strong_refines_branching(seeds in small_universe()) {
        let u = build_universe(seeds.iter());
        prop_assume!(u.len() <= 6);
        let strong = strong_partition(&u);
        let s = BranchingSearch::new(&u, Budget::default());
        for block in strong.blocks() {
            for e in block.iter().skip(1) {
                prop_assert!(s.related(&Distribution::dirac(block[0].clone()), &Distribution::dirac(e.clone())),
                    "{} and {} are strongly but not branching bisimilar", block[0], e);
            }
        }
    }

    #[test]
    fn found_certificates_check(a in distribution(2), b in distribution(2)) {
        let u = build_universe([&a, &b]);
        prop_assume!(u.len() <= 8);
        let s = BranchingSearch::new(&u, Budget::default());
        match s.search(&a, &b).unwrap() {
            SearchOutcome::Found(c) => {
                prop_assert!(c.relates(&a, &b));
                let Verdict::Accepted(ev) = check_certificate(&u, &c).unwrap() else {
                    return Err(TestCaseError::fail("found certificate rejected"));
                };
                replay(&u, &c, &ev).unwrap();
                prop_assert!(check_certificate(&u, &c.mirrored()).unwrap().is_accepted());
            }
            SearchOutcome::Refuted(_) => {
                prop_assert!(!matches!(s.search(&b, &a).unwrap(), SearchOutcome::Found(_)));
            }
            SearchOutcome::NotFound => {}
        }
    }

    #[test]
    fn grafted_tau_is_found(e in nterm(2)) {
        let l = Distribution::dirac(e.clone());
        let r = Distribution::dirac(graft(&e));
        let u = build_universe([&l, &r]);
        let s = BranchingSearch::new(&u, Budget::default());
        let out = s.search(&l, &r).unwrap();
        prop_assert!(matches!(out, SearchOutcome::Found(_)), "{} vs {}: {:?}", l, r, out);
    }

    #[test]
    fn grafted_prefix_is_found(a in action(), p in pterm(1)) {
        let inner = PTerm::dirac(NTerm::prefix(Action::tau(), p.clone()));
        let l = Distribution::dirac(NTerm::prefix(a.clone(), p));
        let r = Distribution::dirac(NTerm::prefix(a, inner));
        let u = build_universe([&l, &r]);
        let s = BranchingSearch::new(&u, Budget::default());
        prop_assert!(matches!(s.search(&l, &r).unwrap(), SearchOutcome::Found(_)));
    }

    #[test]
    fn stabilizer_contract(mu in distribution(2)) {
        let u = build_universe([&mu]);
        prop_assume!(u.len() <= 8);
        let s = BranchingSearch::new(&u, Budget::default());
        if let Ok(st) = stabilize(&s, &mu) {
            prop_assert!(wgt(&st.sigma) <= wgt(&mu));
            st.chain.verify(&u).unwrap();
            prop_assert_eq!(st.chain.target(), &st.sigma);
            prop_assert!(weak_reach(&u, &mu, &st.sigma, u.bound()).unwrap().is_some());
            prop_assert!(st.certificate.relates(&mu, &st.sigma) || mu == st.sigma);
            prop_assert!(check_certificate(&u, &st.certificate).unwrap().is_accepted());
            // Stabilizing again changes nothing.
            let again = stabilize(&s, &st.sigma).unwrap();
            prop_assert_eq!(again.sigma, st.sigma);
        }
    }
}

#[test]
fn grafted_example() {
    let e = NTerm::prefix(Action::new("a").unwrap(), den_term("b"));
    let l = Distribution::dirac(e.clone());
    let r = Distribution::dirac(graft(&e));
    let u = build_universe([&l, &r]);
    assert!(check_certificate(&u, &pbb_core::equiv::search_branching(&u, &l, &r, Budget::default()).unwrap())
        .unwrap()
        .is_accepted());
    assert_eq!(den(&PTerm::dirac(e.clone())), l);
}

fn den_term(a: &str) -> PTerm {
    PTerm::dirac(NTerm::prefix(Action::new(a).unwrap(), PTerm::dirac(NTerm::nil())))
}
