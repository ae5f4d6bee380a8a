//! Operational semantics over a transition-closed universe of states.

mod compose;
mod step;
mod weak;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::distr::{DistrError, Distribution, Weights};
use crate::lp::{LinExpr, Lp, Solution};
use crate::rational::{one, Rational};
use crate::terms::{Action, NTerm, PTerm};

pub use compose::{compose_transitions, decompose_transition, Witness};
pub use step::{distribution_step, partial_successors, partial_tau_step, Move, Refusal, Step, SuccessorSet};
pub use weak::{weak_reach, WeakChain};
pub(crate) use weak::{add_step_image, add_weak_flow, constant_vec, VecExpr};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SemanticsError {
    #[error("state `{0}` is not in the universe")]
    UnknownState(NTerm),
    #[error("the partial after-set is only defined for tau")]
    PartialRequiresTau,
    #[error("state `{state}` has no `{action}` transition")]
    NoTransition { state: NTerm, action: Action },
    #[error("depth {depth} exceeds the universe bound {bound}")]
    DepthExceedsBound { depth: u64, bound: u64 },
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
    #[error("witnesses of different kinds cannot be composed")]
    MixedWitnessKinds,
    #[error(transparent)]
    Distr(#[from] DistrError),
}

/// Anything whose support states can seed a universe.
#[derive(Clone, Debug)]
pub enum Seed {
    Nondet(NTerm),
    Prob(PTerm),
    Dist(Distribution),
}

impl From<NTerm> for Seed {
    fn from(e: NTerm) -> Self {
        Seed::Nondet(e)
    }
}

impl From<PTerm> for Seed {
    fn from(p: PTerm) -> Self {
        Seed::Prob(p)
    }
}

impl From<Distribution> for Seed {
    fn from(d: Distribution) -> Self {
        Seed::Dist(d)
    }
}

impl From<&Distribution> for Seed {
    fn from(d: &Distribution) -> Self {
        Seed::Dist(d.clone())
    }
}

/// Finite state set closed under transitions, with its transition table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Universe {
    table: BTreeMap<NTerm, Vec<(Action, Distribution)>>,
}

/// `⟦P⟧`
pub fn den(p: &PTerm) -> Distribution {
    let mut w = Weights::new();
    den_into(p, &one(), &mut w);
    Distribution::normalize(&w).expect("denotations have total weight one")
}

fn den_into(p: &PTerm, scale: &Rational, acc: &mut Weights) {
    match p {
        PTerm::Dirac(e) => crate::distr::add_weight(acc, e, scale),
        PTerm::Choice(l, r, q) => {
            den_into(l, &(scale * r), acc);
            den_into(q, &(scale * (one() - r)), acc);
        }
    }
}

/// Non-combined transitions derivable by the SOS rules.
pub fn sos_transitions(e: &NTerm) -> Vec<(Action, Distribution)> {
    let mut out = BTreeSet::new();
    sos_into(e, &mut out);
    out.into_iter().collect()
}

fn sos_into(e: &NTerm, out: &mut BTreeSet<(Action, Distribution)>) {
    match e {
        NTerm::Nil => {}
        NTerm::Prefix(a, p) => {
            out.insert((a.clone(), den(p)));
        }
        NTerm::Choice(l, r) => {
            sos_into(l, out);
            sos_into(r, out);
        }
    }
}

pub fn build_universe<I, S>(seeds: I) -> Universe
where
    I: IntoIterator<Item = S>,
    S: Into<Seed>,
{
    let mut u = Universe { table: BTreeMap::new() };
    u.extend(seeds);
    u
}

impl Universe {
    /// Adds seeds and closes under transitions again.
    pub fn extend<I, S>(&mut self, seeds: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<Seed>,
    {
        let mut work: Vec<NTerm> = Vec::new();
        for s in seeds {
            match s.into() {
                Seed::Nondet(e) => work.push(e),
                Seed::Prob(p) => work.extend(den(&p).support().cloned()),
                Seed::Dist(d) => work.extend(d.support().cloned()),
            }
        }
        while let Some(e) = work.pop() {
            if self.table.contains_key(&e) {
                continue;
            }
            let ts = sos_transitions(&e);
            for (_, d) in &ts {
                for f in d.support() {
                    if !self.table.contains_key(f) {
                        work.push(f.clone());
                    }
                }
            }
            self.table.insert(e, ts);
        }
    }

    pub fn states(&self) -> impl Iterator<Item = &NTerm> {
        self.table.keys()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, e: &NTerm) -> bool {
        self.table.contains_key(e)
    }

    pub fn transitions(&self, e: &NTerm) -> &[(Action, Distribution)] {
        self.table.get(e).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn successors<'a>(&'a self, e: &NTerm, a: &'a Action) -> impl Iterator<Item = &'a Distribution> + 'a {
        self.transitions(e).iter().filter(move |(b, _)| b == a).map(|(_, d)| d)
    }

    pub fn enables(&self, e: &NTerm, a: &Action) -> bool {
        self.transitions(e).iter().any(|(b, _)| b == a)
    }

    pub fn has_tau(&self, e: &NTerm) -> bool {
        self.transitions(e).iter().any(|(b, _)| b.is_tau())
    }

    /// All action labels occurring in the table, `tau` included.
    pub fn actions(&self) -> BTreeSet<Action> {
        self.table.values().flat_map(|ts| ts.iter().map(|(a, _)| a.clone())).collect()
    }

    /// `N(u) = Σ_E c(E)`, the bound on weak-transition depth.
    pub fn bound(&self) -> u64 {
        self.table.keys().map(|e| e.complexity()).sum()
    }

    pub fn check_supported(&self, mu: &Distribution) -> Result<(), SemanticsError> {
        for e in mu.support() {
            if !self.contains(e) {
                return Err(SemanticsError::UnknownState(e.clone()));
            }
        }
        Ok(())
    }

    /// States reachable from `roots` through supports of tau-transitions, roots included.
    pub fn tau_closure<'a, I: IntoIterator<Item = &'a NTerm>>(&self, roots: I) -> BTreeSet<NTerm> {
        let mut seen = BTreeSet::new();
        let mut work: Vec<NTerm> = roots.into_iter().cloned().collect();
        while let Some(e) = work.pop() {
            if !seen.insert(e.clone()) {
                continue;
            }
            for d in self.successors(&e, &Action::tau()) {
                for f in d.support() {
                    if !seen.contains(f) {
                        work.push(f.clone());
                    }
                }
            }
        }
        seen
    }

    /// Largest number of tau-edges on a path starting in `roots`.
    pub fn tau_height<'a, I: IntoIterator<Item = &'a NTerm>>(&self, roots: I) -> u64 {
        let mut memo = BTreeMap::new();
        roots.into_iter().map(|e| self.height_of(e, &mut memo)).max().unwrap_or(0)
    }

    fn height_of(&self, e: &NTerm, memo: &mut BTreeMap<NTerm, u64>) -> u64 {
        if let Some(h) = memo.get(e) {
            return *h;
        }
        let tau = Action::tau();
        let mut best = 0;
        let targets: Vec<NTerm> = self.successors(e, &tau).flat_map(|d| d.support().cloned()).collect();
        for f in targets {
            best = best.max(1 + self.height_of(&f, memo));
        }
        memo.insert(e.clone(), best);
        best
    }
}

/// The vertices of `E↾α`, or of `E↾(τ)` which also contains `δ(E)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AfterSet {
    pub vertices: Vec<Distribution>,
}

impl AfterSet {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Convex coefficients expressing `nu` over the vertices, if it lies in the hull.
    pub fn hull_coefficients(&self, nu: &Distribution) -> Option<Vec<Rational>> {
        hull_coefficients(&self.vertices, nu)
    }

    pub fn contains(&self, nu: &Distribution) -> bool {
        self.hull_coefficients(nu).is_some()
    }
}

pub(crate) fn hull_coefficients(vertices: &[Distribution], nu: &Distribution) -> Option<Vec<Rational>> {
    if vertices.is_empty() {
        return None;
    }
    if let Some(i) = vertices.iter().position(|v| v == nu) {
        let mut out = alloc::vec![Rational::from_integer(0.into()); vertices.len()];
        out[i] = one();
        return Some(out);
    }
    let mut lp = Lp::new();
    let lambda: Vec<_> = vertices.iter().map(|_| lp.var()).collect();
    let mut total = LinExpr::zero();
    let mut coords: BTreeMap<NTerm, LinExpr> = BTreeMap::new();
    for (v, l) in vertices.iter().zip(&lambda) {
        total.add_term(*l, one());
        for (x, w) in v.iter() {
            coords.entry(x.clone()).or_default().add_term(*l, w.clone());
        }
    }
    for x in nu.support() {
        coords.entry(x.clone()).or_default();
    }
    lp.eq(&total, &LinExpr::constant(one()));
    for (x, e) in coords {
        lp.eq(&e, &LinExpr::constant(nu.get(&x)));
    }
    let sol: Solution = lp.solve()?;
    Some(lambda.iter().map(|l| sol.value(*l)).collect())
}

pub fn after_set(u: &Universe, e: &NTerm, a: &Action, partial: bool) -> Result<AfterSet, SemanticsError> {
    if partial && !a.is_tau() {
        return Err(SemanticsError::PartialRequiresTau);
    }
    if !u.contains(e) {
        return Err(SemanticsError::UnknownState(e.clone()));
    }
    let mut vertices: Vec<Distribution> = u.successors(e, a).cloned().collect();
    if partial {
        let stay = Distribution::dirac(e.clone());
        if !vertices.contains(&stay) {
            vertices.push(stay);
        }
    }
    Ok(AfterSet { vertices })
}
