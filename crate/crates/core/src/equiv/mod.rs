//! Strong and branching probabilistic bisimilarity.

mod certificate;
mod check;
mod partition;
mod refute;
mod search;
mod strong;

pub use certificate::{Certificate, Closures};
pub use check::{
    check_certificate, check_certificate_with, replay, CheckError, CheckOptions, Clause, Counterexample,
    Decomposition, Evidence, PairEvidence, ReplayError, TransferMatch, Verdict,
};
pub use partition::{class_vector, ClassVector, PartitionError, StatePartition};
pub use refute::{Capabilities, Refutation, RefutationKind};
pub use search::{
    branching_partition, check_congruence, search_branching, BranchingSearch, Budget, CongruenceError, Premise,
    SearchOutcome,
};
pub use strong::{strong_equiv, strong_partition};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distr::Distribution;
    use crate::rational::rat;
    use crate::semantics::{build_universe, den, Universe};
    use crate::terms::{parse_distribution, parse_pterm};
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;

    const P: &str = "D(p.D(0))";
    const Q: &str = "D(q.D(0))";

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    fn g_terms() -> (String, String, String) {
        let pq = format!("({P} +[1/2] {Q})");
        let t = format!("tau.{pq}");
        let g1 = format!("a.{pq}");
        let g2 = format!("a.(D({t}) +[1/3] {pq})");
        (t, g1, g2)
    }

    fn g_certificate() -> (Universe, Certificate, Distribution, Distribution) {
        let (t, g1, g2) = g_terms();
        let g1 = d(&format!("{{1: {g1}}}"));
        let g2 = d(&format!("{{1: {g2}}}"));
        let half = den(&parse_pterm(&format!("{P} +[1/2] {Q}")).unwrap());
        let cert = Certificate::new(
            vec![(d(&format!("{{1: {t}}}")), half), (g1.clone(), g2.clone())],
            Closures::ALL,
        );
        (build_universe([&g1, &g2]), cert, g1, g2)
    }

    fn i_certificate() -> (Universe, Certificate) {
        let body = format!("b.{P} + tau.{Q}");
        let i1 = d(&format!("{{1: a.D({body})}}"));
        let i2 = d(&format!("{{1: a.D(tau.D({body}) + {body})}}"));
        let i1p = d(&format!("{{1: {body}}}"));
        let i2p = d(&format!("{{1: tau.D({body}) + {body}}}"));
        let cert = Certificate::new(
            vec![(i1.clone(), i2.clone()), (i1p, i2p)],
            Closures { symmetric: true, diagonal: true, convex: false },
        );
        (build_universe([&i1, &i2]), cert)
    }

    fn accepted(u: &Universe, c: &Certificate) -> Evidence {
        match check_certificate(u, c).unwrap() {
            Verdict::Accepted(e) => e,
            Verdict::Rejected(c) => panic!("{}", c),
        }
    }

    #[test]
    fn diagonal_only() {
        let mu = d("{1/2: tau.D(a.D(0)), 1/2: b.D(0)}");
        let u = build_universe([&mu]);
        accepted(&u, &Certificate::diagonal());
    }

    #[test]
    fn g_example() {
        let (u, cert, _, _) = g_certificate();
        let ev = accepted(&u, &cert);
        replay(&u, &cert, &ev).unwrap();
        assert!(check_certificate(&u, &cert.mirrored()).unwrap().is_accepted());
        // Without convexity the a-step of G2 has no related answer.
        let plain = Certificate::new(cert.pairs.clone(), Closures { convex: false, ..Closures::ALL });
        assert!(!check_certificate(&u, &plain).unwrap().is_accepted());
    }

    #[test]
    fn i_example() {
        let (u, cert) = i_certificate();
        let ev = accepted(&u, &cert);
        replay(&u, &cert, &ev).unwrap();
    }

    #[test]
    fn half_a_half_b_against_nil() {
        let mu = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let nil = d("{1: 0}");
        let u = build_universe([&mu, &nil]);
        for flags in [Closures::ALL, Closures::default()] {
            let c = Certificate::new(vec![(mu.clone(), nil.clone())], flags);
            let v = check_certificate(&u, &c).unwrap();
            let cx = v.counterexample().unwrap();
            assert_eq!(cx.clause, Clause::WeakDecomposability);
            assert!(cx.semantic);
        }
    }

    #[test]
    fn discipline_failure_is_not_semantic() {
        let mu = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let nu = d("{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/3: a.D(0), 1/3: b.D(0)}");
        let u = build_universe([&mu, &nu]);
        let c = Certificate::new(vec![(nu.clone(), mu.clone())], Closures { symmetric: true, diagonal: true, convex: false });
        let cx = check_certificate(&u, &c).unwrap().counterexample().cloned().unwrap();
        assert!(!cx.semantic);
    }

    #[test]
    fn intro_search() {
        let mu = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let nu = d("{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/3: a.D(0), 1/3: b.D(0)}");
        let u = build_universe([&mu, &nu]);
        let cert = search_branching(&u, &mu, &nu, Budget::default()).unwrap();
        assert!(cert.relates(&mu, &nu));
        let t = d("{1: tau.(D(a.D(0)) +[1/2] D(b.D(0)))}");
        let half = d("{1/2: a.D(0), 1/2: b.D(0)}");
        assert!(cert.pairs.contains(&(t, half)));
        assert!(check_certificate(&u, &cert).unwrap().is_accepted());
        let s = BranchingSearch::new(&u, Budget::default());
        assert_eq!(s.classes().len(), 4);
        assert!(matches!(s.search(&mu, &d("{1/3: a.D(0), 2/3: b.D(0)}")), Ok(SearchOutcome::Refuted(_))));
    }

    #[test]
    fn g_search_reproduces_certificate() {
        let (u, expected, g1, g2) = g_certificate();
        let cert = search_branching(&u, &g1, &g2, Budget::default()).unwrap();
        let want: alloc::collections::BTreeSet<_> = expected.generators().into_iter().collect();
        let got: alloc::collections::BTreeSet<_> = cert.generators().into_iter().collect();
        assert_eq!(want, got);
    }

    #[test]
    fn congruence() {
        let (u, cert, g1, g2) = g_certificate();
        let p = Premise { left: &g1, right: &g2, certificate: &cert };
        let (c, v) = check_congruence(&u, p.clone(), p.clone(), &rat(1, 2)).unwrap();
        assert!(v.is_accepted());
        assert!(c.relates(&g1, &g2));
        let (c1, v1) = check_congruence(&u, p.clone(), p, &rat(1, 1)).unwrap();
        assert!(v1.is_accepted());
        assert_eq!(c1, cert);
    }
}
