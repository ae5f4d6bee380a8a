//! Stability, stabilization by inert tau-unfolding, and cancellation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Signed};

use crate::distr::{add_scaled, Distribution, Weights};
use crate::equiv::{check_certificate, BranchingSearch, Certificate, SearchOutcome, StatePartition, Verdict};
pub use crate::equiv::{class_vector, ClassVector};
use crate::rational::Rational;
use crate::semantics::{weak_reach, SemanticsError, WeakChain};
use crate::terms::NTerm;

/// `Σ_E μ(E)·c(E)`.
pub fn wgt(mu: &Distribution) -> Rational {
    mu.iter().map(|(e, w)| w * Rational::from_integer(e.complexity().into())).sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stability {
    /// No support state can do tau.
    Stable,
    /// `μ ⇒ μ̄` with `μ̄ ≈ μ` and `μ̄ ≠ μ`.
    Unstable { target: Distribution, chain: WeakChain, certificate: Certificate },
    Inconclusive(String),
}

fn certify(search: &BranchingSearch<'_>, mu: &Distribution, nu: &Distribution) -> Option<Certificate> {
    if mu == nu {
        return Some(Certificate::diagonal());
    }
    let mut cert = search.certificate_within(&[mu, nu]);
    let pair = (mu.clone(), nu.clone());
    if !cert.pairs.contains(&pair) {
        cert.pairs.push(pair);
    }
    match check_certificate(search.universe(), &cert) {
        Ok(Verdict::Accepted(_)) => Some(cert),
        _ => None,
    }
}

/// The least-weight unfolding of `δ(E)` established as equivalent to it.
fn best_unfolding(search: &BranchingSearch<'_>, e: &NTerm) -> Distribution {
    let here = Distribution::dirac(e.clone());
    let mut best = (wgt(&here), here.clone());
    for v in search.unfoldings(e).into_iter().skip(1) {
        let w = wgt(&v);
        if w < best.0 && search.related(&here, &v) {
            best = (w, v);
        }
    }
    best.1
}

fn replace(mu: &Distribution, e: &NTerm, by: &Distribution) -> Distribution {
    let mut w = Weights::new();
    for (f, p) in mu.iter() {
        if f == e {
            add_scaled(&mut w, by, p);
        } else {
            add_scaled(&mut w, &Distribution::dirac(f.clone()), p);
        }
    }
    Distribution::normalize(&w).expect("replacement keeps mass")
}

pub fn is_stable(search: &BranchingSearch<'_>, mu: &Distribution) -> Result<Stability, SemanticsError> {
    let u = search.universe();
    u.check_supported(mu)?;
    let busy: Vec<&NTerm> = mu.support().filter(|e| u.has_tau(e)).collect();
    if busy.is_empty() {
        return Ok(Stability::Stable);
    }
    for e in busy {
        let v = best_unfolding(search, e);
        if v.as_dirac() == Some(e) {
            continue;
        }
        let target = replace(mu, e, &v);
        let Some(chain) = weak_reach(u, mu, &target, u.bound())? else { continue };
        if let Some(certificate) = certify(search, mu, &target) {
            return Ok(Stability::Unstable { target, chain, certificate });
        }
    }
    Ok(Stability::Inconclusive(format!(
        "no equivalent tau-unfolding of {} was established and some support state can do tau",
        mu
    )))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilized {
    pub source: Distribution,
    pub sigma: Distribution,
    pub chain: WeakChain,
    pub certificate: Certificate,
}

impl Stabilized {
    pub fn weights(&self) -> (Rational, Rational) {
        (wgt(&self.source), wgt(&self.sigma))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StabilizeError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("no certified equivalent found; best unfolding so far is {best}")]
    Uncertified { best: Distribution },
}

/// Replaces each support state by its least-weight equivalent unfolding
/// until nothing changes. Every replacement fires tau on positive mass, so
/// the weight strictly drops and the loop ends.
pub fn stabilize(search: &BranchingSearch<'_>, mu: &Distribution) -> Result<Stabilized, StabilizeError> {
    let u = search.universe();
    u.check_supported(mu)?;
    let mut sigma = mu.clone();
    loop {
        let mut w = Weights::new();
        for (e, p) in sigma.iter() {
            add_scaled(&mut w, &best_unfolding(search, e), p);
        }
        let next = Distribution::normalize(&w).expect("mixture of distributions");
        if next == sigma {
            break;
        }
        sigma = next;
    }
    let chain = weak_reach(u, mu, &sigma, u.bound())?.ok_or_else(|| StabilizeError::Uncertified { best: sigma.clone() })?;
    let certificate = certify(search, mu, &sigma).ok_or_else(|| StabilizeError::Uncertified { best: sigma.clone() })?;
    Ok(Stabilized { source: mu.clone(), sigma, chain, certificate })
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StabilityError {
    #[error("{0} is not verified stable")]
    NotStable(Distribution),
    #[error(transparent)]
    Partition(#[from] crate::equiv::PartitionError),
}

/// Class-vector equality, which decides bisimilarity for stable inputs when
/// `pi` is the partition into bisimilarity classes.
pub fn stable_equiv(
    search: &BranchingSearch<'_>,
    s1: &Distribution,
    s2: &Distribution,
    pi: &StatePartition,
) -> Result<bool, StabilityError> {
    for s in [s1, s2] {
        if !matches!(is_stable(search, s), Ok(Stability::Stable)) {
            return Err(StabilityError::NotStable(s.clone()));
        }
    }
    Ok(class_vector(s1, pi)? == class_vector(s2, pi)?)
}

/// Per class `C`: `σ[C]`, `σ'[C]`, `ν̄[C]`, `ν̄'[C]`, and the derived
/// `r·μ̄[C] = σ[C] − (1−r)·ν̄[C]` on both sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassRow {
    pub class: usize,
    pub sigma: Rational,
    pub sigma_prime: Rational,
    pub nu_bar: Rational,
    pub nu_bar_prime: Rational,
    pub r_mu_bar: Rational,
    pub r_mu_bar_prime: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CancelEvidence {
    pub premise_mixtures: Certificate,
    pub premise_rests: Certificate,
    pub mu: Stabilized,
    pub mu_prime: Stabilized,
    pub nu: Stabilized,
    pub nu_prime: Stabilized,
    pub classes: StatePartition,
    pub rows: Vec<ClassRow>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum CancelVerdict {
    /// `μ ≈ μ'`, with an accepted certificate.
    Accepted { certificate: Certificate, evidence: Option<CancelEvidence> },
    Inconclusive(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CancelError {
    #[error("mixing weight {0} must lie in (0, 1]")]
    BadWeight(Rational),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

fn inconclusive(s: String) -> Result<CancelVerdict, CancelError> {
    Ok(CancelVerdict::Inconclusive(s))
}

fn premise(search: &BranchingSearch<'_>, a: &Distribution, b: &Distribution) -> Result<Option<Certificate>, CancelError> {
    Ok(match search.search(a, b)? {
        SearchOutcome::Found(c) => Some(c),
        _ => None,
    })
}

/// From `μ ⊕r ν ≈ μ' ⊕r ν'` and `ν ≈ ν'` concludes `μ ≈ μ'`: stabilize all
/// four parts, compare class vectors with the rest subtracted, and certify.
pub fn cancel_check(
    search: &BranchingSearch<'_>,
    mu: &Distribution,
    mu_prime: &Distribution,
    nu: &Distribution,
    nu_prime: &Distribution,
    r: &Rational,
) -> Result<CancelVerdict, CancelError> {
    if !r.is_positive() || *r > Rational::one() {
        return Err(CancelError::BadWeight(r.clone()));
    }
    let u = search.universe();
    for d in [mu, mu_prime, nu, nu_prime] {
        u.check_supported(d)?;
    }
    if mu == mu_prime {
        return Ok(CancelVerdict::Accepted { certificate: Certificate::diagonal(), evidence: None });
    }
    if r.is_one() {
        return match premise(search, mu, mu_prime)? {
            Some(certificate) => Ok(CancelVerdict::Accepted { certificate, evidence: None }),
            None => inconclusive(format!("premise {} ≈ {} not established", mu, mu_prime)),
        };
    }
    let (left, right) = (mu.mix_with(r, nu), mu_prime.mix_with(r, nu_prime));
    let Some(premise_mixtures) = premise(search, &left, &right)? else {
        return inconclusive(format!("premise {} ≈ {} not established", left, right));
    };
    let Some(premise_rests) = premise(search, nu, nu_prime)? else {
        return inconclusive(format!("premise {} ≈ {} not established", nu, nu_prime));
    };
    let mut parts = Vec::new();
    for d in [mu, mu_prime, nu, nu_prime] {
        match stabilize(search, d) {
            Ok(s) => parts.push(s),
            Err(e) => return inconclusive(format!("{}", e)),
        }
    }
    let classes = search.classes().clone();
    let cv = |d: &Distribution| class_vector(d, &classes).expect("classes cover the universe");
    let rest = Rational::one() - r;
    let sigma = parts[0].sigma.mix_with(r, &parts[2].sigma);
    let sigma_prime = parts[1].sigma.mix_with(r, &parts[3].sigma);
    let (vs, vsp, vn, vnp) = (cv(&sigma), cv(&sigma_prime), cv(&parts[2].sigma), cv(&parts[3].sigma));
    let blocks: BTreeSet<usize> = [&vs, &vsp, &vn, &vnp].iter().flat_map(|v| v.entries().keys().copied()).collect();
    let rows: Vec<ClassRow> = blocks
        .into_iter()
        .map(|c| ClassRow {
            class: c,
            sigma: vs.get(c),
            sigma_prime: vsp.get(c),
            nu_bar: vn.get(c),
            nu_bar_prime: vnp.get(c),
            r_mu_bar: vs.get(c) - &rest * vn.get(c),
            r_mu_bar_prime: vsp.get(c) - &rest * vnp.get(c),
        })
        .collect();
    if let Some(row) = rows.iter().find(|row| row.r_mu_bar != row.r_mu_bar_prime) {
        return inconclusive(format!(
            "stable forms weigh class {} differently ({} vs {})",
            row.class, row.r_mu_bar, row.r_mu_bar_prime
        ));
    }
    let [pm, pmp, pn, pnp]: [Stabilized; 4] = parts.try_into().expect("four parts");
    let evidence = CancelEvidence {
        premise_mixtures,
        premise_rests,
        mu: pm,
        mu_prime: pmp,
        nu: pn,
        nu_prime: pnp,
        classes,
        rows,
    };
    match premise(search, mu, mu_prime)? {
        Some(certificate) => Ok(CancelVerdict::Accepted { certificate, evidence: Some(evidence) }),
        None => inconclusive(format!(
            "class vectors of the stable forms agree, but no certificate for {} ≈ {} composes from the established relation",
            mu, mu_prime
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equiv::Budget;
    use crate::rational::{int, rat};
    use crate::semantics::build_universe;
    use crate::terms::parse_distribution;

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    const MU: &str = "{1/2: a.D(0), 1/2: b.D(0)}";
    const NU: &str = "{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/3: a.D(0), 1/3: b.D(0)}";

    #[test]
    fn weights() {
        assert_eq!(wgt(&d("{1: 0}")), int(0));
        assert_eq!(wgt(&d(MU)), int(2));
        assert_eq!(wgt(&d(NU)), rat(11, 3));
    }

    #[test]
    fn intro_stability() {
        let (mu, nu) = (d(MU), d(NU));
        let u = build_universe([&mu, &nu]);
        let s = BranchingSearch::new(&u, Budget::default());
        assert_eq!(is_stable(&s, &mu).unwrap(), Stability::Stable);
        match is_stable(&s, &nu).unwrap() {
            Stability::Unstable { target, chain, .. } => {
                assert_eq!(target, mu);
                assert_eq!(chain.len(), 1);
            }
            other => panic!("{:?}", other),
        }
        let st = stabilize(&s, &nu).unwrap();
        assert_eq!(st.sigma, mu);
        assert_eq!(st.weights(), (rat(11, 3), int(2)));
        assert_eq!(st.chain.len(), 1);
        let id = stabilize(&s, &mu).unwrap();
        assert_eq!(id.sigma, mu);
        assert!(id.chain.is_empty());
    }

    #[test]
    fn chain_tail() {
        let mu = d("{5/6: tau.D(p.D(0)), 1/6: p.D(0)}");
        let u = build_universe([&mu]);
        let s = BranchingSearch::new(&u, Budget::default());
        assert_eq!(stabilize(&s, &mu).unwrap().sigma, d("{1: p.D(0)}"));
    }

    #[test]
    fn stable_class_vectors() {
        let mu = d(MU);
        let other = d("{1/2: a.D(0) + a.D(0), 1/2: b.D(0)}");
        let skew = d("{1/3: a.D(0), 2/3: b.D(0)}");
        let u = build_universe([&mu, &other, &skew]);
        let s = BranchingSearch::new(&u, Budget::default());
        let pi = s.classes().clone();
        assert!(stable_equiv(&s, &mu, &mu, &pi).unwrap());
        assert!(stable_equiv(&s, &mu, &other, &pi).unwrap());
        assert!(!stable_equiv(&s, &mu, &skew, &pi).unwrap());
        let nu = d(NU);
        let u = build_universe([&mu, &nu]);
        let s = BranchingSearch::new(&u, Budget::default());
        assert!(stable_equiv(&s, &nu, &mu, s.classes()).is_err());
    }

    #[test]
    fn cancel_g() {
        let pq = "(D(p.D(0)) +[1/2] D(q.D(0)))";
        let g1 = d(&format!("{{1: a.{pq}}}"));
        let g2 = d(&format!("{{1: a.(D(tau.{pq}) +[1/3] {pq})}}"));
        let nil = d("{1: 0}");
        let u = build_universe([&g1, &g2, &nil]);
        let s = BranchingSearch::new(&u, Budget::default());
        match cancel_check(&s, &g1, &g2, &nil, &nil, &rat(1, 2)).unwrap() {
            CancelVerdict::Accepted { certificate, evidence } => {
                assert!(check_certificate(&u, &certificate).unwrap().is_accepted());
                assert!(evidence.is_some());
            }
            other => panic!("{:?}", other),
        }
        assert!(cancel_check(&s, &g1, &g2, &nil, &nil, &int(0)).is_err());
        assert!(matches!(
            cancel_check(&s, &g1, &g1, &nil, &nil, &rat(1, 3)).unwrap(),
            CancelVerdict::Accepted { .. }
        ));
    }
}
