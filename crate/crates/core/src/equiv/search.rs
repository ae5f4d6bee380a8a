//! Bounded search for branching bisimulations.
//!
//! Candidates are the capability partition on states (as within-block
//! Dirac pairs) plus, for each state `E`, pairs `(δ(E), v)` for vertices `v`
//! of its weak tau-unfoldings. Failing candidates are pruned until every
//! remaining pair passes both clauses against the remaining relation; the
//! survivors form a certificate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use super::certificate::{Certificate, Closures, Relation};
use super::check::{check_certificate, check_certificate_with, CheckError, CheckOptions, Checker, Counterexample, Verdict};
use super::partition::StatePartition;
use super::refute::{Capabilities, Refutation};
use crate::distr::{add_scaled, Distribution, Weights};
use crate::rational::Rational;
use crate::lp::Lp;
use crate::semantics::{add_weak_flow, constant_vec, SemanticsError, Universe, WeakChain};
use crate::terms::{Action, NTerm};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Cap on candidate pairs outside the state partition.
    pub max_pairs: usize,
    /// Cap on the tau-unfolding depth of candidates; `None` means `N(u)`.
    pub max_depth: Option<u64>,
    /// Candidates with a larger denominator are dropped.
    pub max_denominator: Option<u64>,
    /// Vertex transitions examined per pair and action.
    pub max_vertices: usize,
    /// Unfoldings kept per state.
    pub max_unfoldings: usize,
    /// Re-check every produced certificate from scratch.
    pub verify: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_pairs: 4096,
            max_depth: None,
            max_denominator: None,
            max_vertices: 256,
            max_unfoldings: 64,
            verify: true,
        }
    }
}

impl Budget {
    fn check_options(&self) -> CheckOptions {
        CheckOptions { max_vertices: self.max_vertices, strict: false, refute: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Certificate),
    /// Authoritative: the pair is not bisimilar.
    Refuted(Refutation),
    /// Inconclusive.
    NotFound,
}

impl SearchOutcome {
    pub fn certificate(self) -> Option<Certificate> {
        match self {
            SearchOutcome::Found(c) => Some(c),
            _ => None,
        }
    }
}

type Pair = (Distribution, Distribution);

/// The vertices of `{ν | δ(E) ⇒ ν}`: each state either stops or fires one
/// of its tau-transitions, recursively.
fn unfoldings(
    u: &Universe,
    e: &NTerm,
    depth: u64,
    cap: usize,
    memo: &mut BTreeMap<(NTerm, u64), Vec<Distribution>>,
) -> Vec<Distribution> {
    if let Some(v) = memo.get(&(e.clone(), depth)) {
        return v.clone();
    }
    let mut out = alloc::vec![Distribution::dirac(e.clone())];
    if depth > 0 {
        let tau = Action::tau();
        for eta in u.successors(e, &tau) {
            let mut partial: Vec<Weights> = alloc::vec![Weights::new()];
            for (f, p) in eta.iter() {
                let vs = unfoldings(u, f, depth - 1, cap, memo);
                let mut next = Vec::new();
                'outer: for w in &partial {
                    for v in &vs {
                        let mut w2 = w.clone();
                        add_scaled(&mut w2, v, p);
                        next.push(w2);
                        if next.len() >= cap {
                            break 'outer;
                        }
                    }
                }
                partial = next;
            }
            for w in partial {
                let d = Distribution::normalize(&w).expect("convex combination");
                if !out.contains(&d) && out.len() < cap {
                    out.push(d);
                }
            }
        }
    }
    memo.insert((e.clone(), depth), out.clone());
    out
}

fn denominators_within(d: &Distribution, bound: Option<u64>) -> bool {
    match bound {
        None => true,
        Some(b) => d.iter().all(|(_, w)| *w.denom() <= b.into()),
    }
}

/// States reachable from the supports.
fn reach(u: &Universe, ds: &[&Distribution]) -> BTreeSet<NTerm> {
    let mut seen = BTreeSet::new();
    let mut work: Vec<NTerm> = ds.iter().flat_map(|d| d.support().cloned()).collect();
    while let Some(e) = work.pop() {
        if !seen.insert(e.clone()) {
            continue;
        }
        for (_, eta) in u.transitions(&e) {
            work.extend(eta.support().filter(|f| !seen.contains(*f)).cloned());
        }
    }
    seen
}

/// A pruned candidate relation: within-block Dirac pairs plus extras.
#[derive(Clone, Debug)]
struct Candidate {
    blocks: StatePartition,
    extras: Vec<Pair>,
}

impl Candidate {
    fn relation(&self) -> Relation {
        let gens = self.extras.iter().flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())]).collect();
        Relation::new(gens, true, true, Some(self.blocks.clone()))
    }

    fn export(&self, within: Option<&BTreeSet<NTerm>>) -> Certificate {
        let keep = |e: &NTerm| within.is_none_or(|s| s.contains(e));
        let mut pairs = Vec::new();
        for b in self.blocks.blocks() {
            let members: Vec<&NTerm> = b.iter().filter(|e| keep(e)).collect();
            for (i, e) in members.iter().enumerate() {
                for f in &members[i + 1..] {
                    pairs.push((Distribution::dirac((*e).clone()), Distribution::dirac((*f).clone())));
                }
            }
        }
        for (a, b) in &self.extras {
            if a.support().chain(b.support()).all(keep) {
                pairs.push((a.clone(), b.clone()));
            }
        }
        Certificate::new(pairs, Closures::ALL)
    }
}

// Each round keeps the surviving pairs and regroups every block into the
// connected components of its passing Dirac pairs. Components contain every
// bisimilarity class, so nothing related is lost. A component that is not
// transitive is dissolved into its passing pairs, kept as extras. The
// relation only shrinks, so failures stay failures.
fn prune(u: &Universe, opts: CheckOptions, mut cand: Candidate) -> Candidate {
    let mut failed: BTreeSet<Pair> = BTreeSet::new();
    loop {
        let rel = cand.relation();
        let checker = Checker { u, rel: &rel, opts };
        let mut ok = |a: &Distribution, b: &Distribution| -> bool {
            let key = (a.clone(), b.clone());
            if failed.contains(&key) {
                return false;
            }
            if checker.check_pair(a, b).is_ok() {
                true
            } else {
                failed.insert(key);
                false
            }
        };
        let mut extras: Vec<Pair> = cand.extras.iter().filter(|(a, b)| ok(a, b) && ok(b, a)).cloned().collect();
        let mut changed = extras.len() != cand.extras.len();
        let mut groups: Vec<BTreeSet<NTerm>> = Vec::new();
        for b in cand.blocks.blocks() {
            let members: Vec<&NTerm> = b.iter().collect();
            let n = members.len();
            let mut root: Vec<usize> = (0..n).collect();
            fn find(root: &mut [usize], i: usize) -> usize {
                let mut r = i;
                while root[r] != r {
                    r = root[r];
                }
                root[i] = r;
                r
            }
            let mut pass = alloc::vec![alloc::vec![true; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let (di, dj) = (Distribution::dirac(members[i].clone()), Distribution::dirac(members[j].clone()));
                    let p = ok(&di, &dj) && ok(&dj, &di);
                    pass[i][j] = p;
                    pass[j][i] = p;
                    if p {
                        let (ri, rj) = (find(&mut root, i), find(&mut root, j));
                        root[ri] = rj;
                    }
                }
            }
            let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for i in 0..n {
                let r = find(&mut root, i);
                comps.entry(r).or_default().push(i);
            }
            if comps.len() > 1 {
                changed = true;
                groups.extend(comps.values().map(|c| c.iter().map(|&i| members[i].clone()).collect()));
                continue;
            }
            if pass.iter().all(|row| row.iter().all(|&p| p)) {
                groups.push(members.iter().map(|e| (*e).clone()).collect());
                continue;
            }
            // Not transitive: keep exactly the passing pairs as generators.
            changed = true;
            for i in 0..n {
                groups.push(BTreeSet::from([members[i].clone()]));
                for j in i + 1..n {
                    if pass[i][j] {
                        extras.push((Distribution::dirac(members[i].clone()), Distribution::dirac(members[j].clone())));
                    }
                }
            }
        }
        cand = Candidate { blocks: StatePartition::from_blocks(groups), extras };
        if !changed {
            return cand;
        }
    }
}

/// Greatest surviving candidate relation over a universe.
#[derive(Clone, Debug)]
pub struct BranchingSearch<'u> {
    u: &'u Universe,
    budget: Budget,
    caps: Capabilities,
    initial: Vec<Pair>,
    result: Candidate,
    classes: StatePartition,
}

impl<'u> BranchingSearch<'u> {
    pub fn new(u: &'u Universe, budget: Budget) -> Self {
        let caps = Capabilities::new(u);
        let depth = budget.max_depth.unwrap_or(u.bound()).min(u.bound());
        let mut memo = BTreeMap::new();
        let mut initial = Vec::new();
        'states: for e in u.states() {
            if !u.has_tau(e) {
                continue;
            }
            for v in unfoldings(u, e, depth, budget.max_unfoldings, &mut memo).into_iter().skip(1) {
                if initial.len() >= budget.max_pairs {
                    break 'states;
                }
                if denominators_within(&v, budget.max_denominator) {
                    initial.push((Distribution::dirac(e.clone()), v));
                }
            }
        }
        let start = Candidate { blocks: caps.partition().clone(), extras: initial.clone() };
        let mut result = prune(u, budget.check_options(), start);
        if budget.verify {
            let cert = result.export(None);
            let accepted = matches!(check_certificate_with(u, &cert, budget.check_options()), Ok(Verdict::Accepted(_)));
            if !accepted {
                result = Candidate { blocks: StatePartition::by_key(u.states(), |e| e.clone()), extras: Vec::new() };
            }
        }
        let classes = merge_dirac(&result);
        BranchingSearch { u, budget, caps, initial, result, classes }
    }

    pub fn universe(&self) -> &'u Universe {
        self.u
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    /// Vertices of `{ν | δ(E) ⇒ ν}` within the budget, `δ(E)` first.
    pub fn unfoldings(&self, e: &NTerm) -> Vec<Distribution> {
        let depth = self.budget.max_depth.unwrap_or(self.u.bound()).min(self.u.bound());
        unfoldings(self.u, e, depth, self.budget.max_unfoldings, &mut BTreeMap::new())
    }

    /// States grouped by established bisimilarity.
    pub fn classes(&self) -> &StatePartition {
        &self.classes
    }

    /// The whole surviving relation as a certificate.
    pub fn certificate(&self) -> Certificate {
        self.result.export(None)
    }

    /// The surviving relation restricted to states reachable from the supports.
    pub fn certificate_within(&self, ds: &[&Distribution]) -> Certificate {
        self.result.export(Some(&reach(self.u, ds)))
    }

    /// Membership in the surviving relation, which is a bisimulation.
    pub fn related(&self, mu: &Distribution, nu: &Distribution) -> bool {
        self.u.check_supported(mu).is_ok() && self.u.check_supported(nu).is_ok() && self.result.relation().contains(mu, nu)
    }

    /// A weak move `ν ⇒ ν'` answering `μ'`, i.e. with `μ'` related to `ν'`.
    pub fn weak_match(&self, mu_prime: &Distribution, nu: &Distribution) -> Result<Option<WeakChain>, SemanticsError> {
        self.u.check_supported(mu_prime)?;
        self.u.check_supported(nu)?;
        let mut lp = Lp::new();
        let flow = add_weak_flow(&mut lp, self.u, &constant_vec(nu));
        self.result.relation().add_membership(&mut lp, &constant_vec(mu_prime), &flow.result);
        Ok(lp.solve().map(|sol| flow.chain(nu, &sol)))
    }

    pub fn search(&self, mu: &Distribution, nu: &Distribution) -> Result<SearchOutcome, SemanticsError> {
        self.u.check_supported(mu)?;
        self.u.check_supported(nu)?;
        if mu == nu {
            return Ok(SearchOutcome::Found(Certificate::diagonal()));
        }
        if let Some(r) = self.caps.refute(self.u, mu, nu) {
            return Ok(SearchOutcome::Refuted(r));
        }
        let pair = (mu.clone(), nu.clone());
        let cand = if self.result.relation().contains(mu, nu) {
            self.result.clone()
        } else {
            let mut extras = self.initial.clone();
            extras.push(pair.clone());
            let start = Candidate { blocks: self.caps.partition().clone(), extras };
            let out = prune(self.u, self.budget.check_options(), start);
            if !out.extras.contains(&pair) {
                return Ok(SearchOutcome::NotFound);
            }
            out
        };
        let mut cert = cand.export(Some(&reach(self.u, &[mu, nu])));
        if !cert.pairs.contains(&pair) {
            cert.pairs.push(pair);
        }
        if self.budget.verify && !matches!(check_certificate_with(self.u, &cert, self.budget.check_options()), Ok(Verdict::Accepted(_))) {
            return Ok(SearchOutcome::NotFound);
        }
        Ok(SearchOutcome::Found(cert))
    }
}

/// Blocks, joined further along Dirac-to-Dirac extras.
fn merge_dirac(c: &Candidate) -> StatePartition {
    let mut parent: BTreeMap<NTerm, NTerm> = BTreeMap::new();
    fn find(p: &mut BTreeMap<NTerm, NTerm>, e: &NTerm) -> NTerm {
        let mut cur = e.clone();
        while let Some(next) = p.get(&cur) {
            if *next == cur {
                break;
            }
            cur = next.clone();
        }
        cur
    }
    for b in c.blocks.blocks() {
        for e in b {
            parent.insert(e.clone(), b[0].clone());
        }
    }
    for (a, b) in &c.extras {
        if let (Some(x), Some(y)) = (a.as_dirac(), b.as_dirac()) {
            let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
            if rx != ry {
                let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
                parent.insert(hi, lo);
            }
        }
    }
    let keys: Vec<NTerm> = parent.keys().cloned().collect();
    StatePartition::by_key(keys.iter(), |e| find(&mut parent.clone(), e))
}

pub fn search_branching(u: &Universe, mu: &Distribution, nu: &Distribution, budget: Budget) -> Option<Certificate> {
    BranchingSearch::new(u, budget).search(mu, nu).ok()?.certificate()
}

pub fn branching_partition(u: &Universe, budget: Budget) -> StatePartition {
    BranchingSearch::new(u, budget).classes().clone()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CongruenceError {
    #[error("mixing weight {0} is outside [0, 1]")]
    BadWeight(Rational),
    #[error("input certificate {index} rejected: {counterexample}")]
    Rejected { index: usize, counterexample: Counterexample },
    #[error("input certificate {index} does not relate its pair")]
    NotWitnessed { index: usize },
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// One premise `μ ≈ ν` with its certificate.
#[derive(Clone, Debug)]
pub struct Premise<'a> {
    pub left: &'a Distribution,
    pub right: &'a Distribution,
    pub certificate: &'a Certificate,
}

/// From `μ1 ≈ ν1` and `μ2 ≈ ν2` builds and checks a certificate for
/// `μ1 ⊕r μ2 ≈ ν1 ⊕r ν2`.
pub fn check_congruence(
    u: &Universe,
    first: Premise<'_>,
    second: Premise<'_>,
    r: &Rational,
) -> Result<(Certificate, Verdict), CongruenceError> {
    if r.is_negative() || *r > Rational::one() {
        return Err(CongruenceError::BadWeight(r.clone()));
    }
    for (index, p) in [(1, &first), (2, &second)] {
        if (r.is_one() && index == 2) || (r.is_zero() && index == 1) {
            continue;
        }
        match check_certificate(u, p.certificate)? {
            Verdict::Rejected(c) => return Err(CongruenceError::Rejected { index, counterexample: c }),
            Verdict::Accepted(_) => {}
        }
        if !p.certificate.relates(p.left, p.right) {
            return Err(CongruenceError::NotWitnessed { index });
        }
    }
    if r.is_one() {
        let v = check_certificate(u, first.certificate)?;
        return Ok((first.certificate.clone(), v));
    }
    if r.is_zero() {
        let v = check_certificate(u, second.certificate)?;
        return Ok((second.certificate.clone(), v));
    }
    let closures = first.certificate.closures.union(second.certificate.closures).union(Closures {
        symmetric: false,
        diagonal: false,
        convex: true,
    });
    let mut pairs = first.certificate.pairs.clone();
    for p in &second.certificate.pairs {
        if !pairs.contains(p) {
            pairs.push(p.clone());
        }
    }
    let pair = (first.left.mix_with(r, second.left), first.right.mix_with(r, second.right));
    if !pairs.contains(&pair) {
        pairs.push(pair);
    }
    let cert = Certificate::new(pairs, closures);
    let v = check_certificate(u, &cert)?;
    Ok((cert, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use crate::semantics::build_universe;
    use crate::terms::parse_distribution;

    // `x` and `y` first meet the `b.D(..)` states in one capability block;
    // an early first-fit split must not keep them apart.
    #[test]
    fn regrouping_keeps_related_states() {
        let x = "b.(D(0) +[1/2] D(0))";
        let y = "b.(D(tau.D(0)) +[1/2] D(0))";
        let ds: Vec<Distribution> = [format!("b.D({x} + tau.D(0))"), format!("b.D({y} + tau.D(0))"), x.into(), y.into()]
            .iter()
            .map(|s| parse_distribution(&format!("{{1: {s}}}")).unwrap())
            .collect();
        let u = build_universe(ds.iter());
        let s = BranchingSearch::new(&u, Budget::default());
        assert!(s.classes().same_block(ds[2].as_dirac().unwrap(), ds[3].as_dirac().unwrap()));
        let mu = parse_distribution(&format!("{{3/4: b.D({x} + tau.D(0)), 1/4: {x}}}")).unwrap();
        let nu = parse_distribution(&format!("{{3/4: b.D({y} + tau.D(0)), 1/4: {y}}}")).unwrap();
        assert!(s.related(&mu, &nu));
    }
}
