use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use super::certificate::{Certificate, Relation};
use super::refute::{Capabilities, Refutation, RefutationKind};
use crate::distr::{add_scaled, Distribution, Weights};
use crate::lp::{LinExpr, Lp};
use crate::rational::one;
use crate::semantics::{
    add_step_image, add_weak_flow, constant_vec, distribution_step, partial_successors, weak_reach, SemanticsError,
    Step, SuccessorSet, Universe, VecExpr, WeakChain,
};
use crate::terms::{Action, NTerm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    /// Upper bound on vertex transitions examined per pair and action.
    pub max_vertices: usize,
    /// Plain decomposability: `ν` itself must split, without a weak move.
    pub strict: bool,
    /// Run the capability refuter before the clause checks.
    pub refute: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { max_vertices: 256, strict: false, refute: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Clause {
    WeakDecomposability,
    Transfer,
    Symmetry,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::WeakDecomposability => "weak decomposability",
            Clause::Transfer => "transfer",
            Clause::Symmetry => "symmetry",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub pair: (Distribution, Distribution),
    pub clause: Clause,
    pub obligation: String,
    /// True for an authoritative refutation; false when the clause only
    /// failed under the checking discipline.
    pub semantic: bool,
    pub refutation: Option<Refutation>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pair ({}, {}) fails {}{}: {}",
            self.pair.0,
            self.pair.1,
            self.clause,
            if self.semantic { " (refuted)" } else { " (under discipline)" },
            self.obligation
        )
    }
}

/// How the left side's point decomposition is matched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decomposition {
    /// The left side is a Dirac distribution; only the trivial split exists.
    DiracLeft,
    /// `ν ⇒ μ`, so every split of `μ` is matched by itself on the diagonal.
    ReachesLeft(WeakChain),
    /// `ν ⇒ Σ_E μ(E)·ν_E` with each `(δ(E), ν_E)` in the relation.
    Finest { chain: WeakChain, parts: Vec<(NTerm, Distribution)> },
}

/// `μ →α μ'` matched by `ν ⇒ ν̄ →(α) ν'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferMatch {
    pub step: Step,
    pub chain: WeakChain,
    pub answer: Step,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairEvidence {
    pub left: Distribution,
    pub right: Distribution,
    pub decomposition: Decomposition,
    pub transfers: Vec<TransferMatch>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    pub pairs: Vec<PairEvidence>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accepted(Evidence),
    Rejected(Counterexample),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted(_))
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Rejected(c) => Some(c),
            Verdict::Accepted(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("malformed certificate: {0}")]
    Malformed(#[from] SemanticsError),
}

pub(crate) struct Checker<'a> {
    pub u: &'a Universe,
    pub rel: &'a Relation,
    pub opts: CheckOptions,
}

fn fail(mu: &Distribution, nu: &Distribution, clause: Clause, obligation: String) -> Counterexample {
    Counterexample { pair: (mu.clone(), nu.clone()), clause, obligation, semantic: false, refutation: None }
}

fn refuted(mu: &Distribution, nu: &Distribution, r: Refutation) -> Counterexample {
    let clause = match r.kind {
        RefutationKind::Barb(_) => Clause::Transfer,
        _ => Clause::WeakDecomposability,
    };
    Counterexample {
        pair: (mu.clone(), nu.clone()),
        clause,
        obligation: r.detail.clone(),
        semantic: true,
        refutation: Some(r),
    }
}

/// Actions every support state enables.
fn common_actions(u: &Universe, mu: &Distribution) -> BTreeSet<Action> {
    let mut it = mu.support();
    let Some(first) = it.next() else { return BTreeSet::new() };
    let mut acc: BTreeSet<Action> = u.transitions(first).iter().map(|(a, _)| a.clone()).collect();
    for e in it {
        acc.retain(|a| u.enables(e, a));
    }
    acc
}

fn values(sol: &crate::lp::Solution, v: &VecExpr) -> Weights {
    v.iter()
        .map(|(k, e)| (k.clone(), sol.eval(e)))
        .filter(|(_, w)| !w.is_zero())
        .collect()
}

impl Checker<'_> {
    pub fn check_pair(&self, mu: &Distribution, nu: &Distribution) -> Result<PairEvidence, Counterexample> {
        let decomposition = self.decomposition(mu, nu)?;
        let mut transfers = Vec::new();
        for a in common_actions(self.u, mu) {
            transfers.extend(self.transfer(mu, nu, &a)?);
        }
        Ok(PairEvidence { left: mu.clone(), right: nu.clone(), decomposition, transfers })
    }

    fn decomposition(&self, mu: &Distribution, nu: &Distribution) -> Result<Decomposition, Counterexample> {
        if mu.as_dirac().is_some() {
            return Ok(Decomposition::DiracLeft);
        }
        if self.rel.diagonal() {
            if mu == nu {
                return Ok(Decomposition::ReachesLeft(WeakChain::empty(nu)));
            }
            if !self.opts.strict {
                if let Ok(Some(chain)) = weak_reach(self.u, nu, mu, self.u.bound()) {
                    return Ok(Decomposition::ReachesLeft(chain));
                }
            }
        }
        if !self.rel.convex() {
            return Err(fail(
                mu,
                nu,
                Clause::WeakDecomposability,
                "splits of a non-Dirac left side require the convex closure".into(),
            ));
        }
        let mut lp = Lp::new();
        let (target, flow) = if self.opts.strict {
            (constant_vec(nu), None)
        } else {
            let f = add_weak_flow(&mut lp, self.u, &constant_vec(nu));
            (f.result.clone(), Some(f))
        };
        let mut sums: BTreeMap<&NTerm, LinExpr> = target.keys().map(|g| (g, LinExpr::zero())).collect();
        let mut parts: Vec<(NTerm, VecExpr)> = Vec::new();
        for (e, w) in mu.iter() {
            let mut part = VecExpr::new();
            for (g, acc) in sums.iter_mut() {
                let v = lp.var();
                acc.add_term(v, one());
                part.insert((*g).clone(), LinExpr::var(v));
            }
            let point: VecExpr = [(e.clone(), LinExpr::constant(w.clone()))].into_iter().collect();
            self.rel.add_membership(&mut lp, &point, &part);
            parts.push((e.clone(), part));
        }
        for (g, acc) in sums {
            lp.eq(&target[g], &acc);
        }
        let Some(sol) = lp.solve() else {
            return Err(fail(
                mu,
                nu,
                Clause::WeakDecomposability,
                format!("no weak move of {} splits into related parts along the points of {}", nu, mu),
            ));
        };
        let chain = match &flow {
            Some(f) => f.chain(nu, &sol),
            None => WeakChain::empty(nu),
        };
        let parts = parts
            .into_iter()
            .map(|(e, p)| (e, Distribution::normalize(&values(&sol, &p)).expect("part carries the point's mass")))
            .collect();
        Ok(Decomposition::Finest { chain, parts })
    }

    fn successors(&self, mu: &Distribution, a: &Action) -> Result<SuccessorSet, SemanticsError> {
        if a.is_tau() {
            partial_successors(self.u, mu)
        } else {
            distribution_step(self.u, mu, a)
        }
    }

    fn transfer(&self, mu: &Distribution, nu: &Distribution, a: &Action) -> Result<Vec<TransferMatch>, Counterexample> {
        let set = distribution_step(self.u, mu, a)
            .map_err(|e| fail(mu, nu, Clause::Transfer, format!("{}", e)))?;
        if set.vertex_count() > self.opts.max_vertices as u128 {
            return Err(fail(
                mu,
                nu,
                Clause::Transfer,
                format!("{} has {} vertex {}-transitions, above the limit", mu, set.vertex_count(), a),
            ));
        }
        let mut steps: Vec<Step> = Vec::new();
        for s in set.vertices(self.opts.max_vertices) {
            if !steps.iter().any(|t| t.target == s.target) {
                steps.push(s);
            }
        }
        if self.rel.convex() {
            return steps.into_iter().map(|s| self.match_convex(mu, nu, s)).collect();
        }
        if steps.len() == 1 {
            let s = steps.pop().expect("one step");
            return self.match_listed(mu, nu, s).map(|m| alloc::vec![m]);
        }
        // Several targets without convexity: mixtures of them must be matched
        // too, which the diagonal does when one ν̄ reaches every target.
        if self.rel.diagonal() {
            for nb in self.rel.partners(mu) {
                let Ok(Some(chain)) = weak_reach(self.u, nu, &nb, self.u.bound()) else { continue };
                let Ok(answers) = self.successors(&nb, a) else { continue };
                let matched: Option<Vec<TransferMatch>> = steps
                    .iter()
                    .map(|s| {
                        answers.contains(&s.target).map(|ans| TransferMatch {
                            step: s.clone(),
                            chain: chain.clone(),
                            answer: ans,
                        })
                    })
                    .collect();
                if let Some(m) = matched {
                    return Ok(m);
                }
            }
        }
        Err(fail(
            mu,
            nu,
            Clause::Transfer,
            format!(
                "{} has {} distinct {}-successors and no single weak move of {} answers all of them on the diagonal",
                mu,
                steps.len(),
                a,
                nu
            ),
        ))
    }

    fn match_listed(&self, mu: &Distribution, nu: &Distribution, s: Step) -> Result<TransferMatch, Counterexample> {
        let targets = self.rel.partners(&s.target);
        for nb in self.rel.partners(mu) {
            let Ok(Some(chain)) = weak_reach(self.u, nu, &nb, self.u.bound()) else { continue };
            let Ok(answers) = self.successors(&nb, &s.action) else { continue };
            for t in &targets {
                if let Some(answer) = answers.contains(t) {
                    return Ok(TransferMatch { step: s, chain, answer });
                }
            }
        }
        Err(fail(
            mu,
            nu,
            Clause::Transfer,
            format!("{} -{}-> {} has no answer from {}", mu, s.action, s.target, nu),
        ))
    }

    fn match_convex(&self, mu: &Distribution, nu: &Distribution, s: Step) -> Result<TransferMatch, Counterexample> {
        if s.action.is_tau() && self.rel.contains(&s.target, nu) {
            return Ok(TransferMatch { step: s, chain: WeakChain::empty(nu), answer: Step::identity(nu) });
        }
        let mut lp = Lp::new();
        let flow = add_weak_flow(&mut lp, self.u, &constant_vec(nu));
        let img = add_step_image(&mut lp, self.u, &flow.result, &s.action, s.action.is_tau());
        self.rel.add_membership(&mut lp, &constant_vec(mu), &flow.result);
        self.rel.add_membership(&mut lp, &constant_vec(&s.target), &img.target);
        match lp.solve() {
            Some(sol) => {
                let chain = flow.chain(nu, &sol);
                let answer = img.step(&sol);
                Ok(TransferMatch { step: s, chain, answer })
            }
            None => Err(fail(
                mu,
                nu,
                Clause::Transfer,
                format!("{} -{}-> {} has no answer from {}", mu, s.action, s.target, nu),
            )),
        }
    }
}

pub fn check_certificate(u: &Universe, cert: &Certificate) -> Result<Verdict, CheckError> {
    check_certificate_with(u, cert, CheckOptions::default())
}

pub fn check_certificate_with(u: &Universe, cert: &Certificate, opts: CheckOptions) -> Result<Verdict, CheckError> {
    for (a, b) in &cert.pairs {
        u.check_supported(a)?;
        u.check_supported(b)?;
    }
    let rel = cert.relation();
    let caps = if opts.refute { Some(Capabilities::new(u)) } else { None };
    let checker = Checker { u, rel: &rel, opts };
    let mut evidence = Evidence::default();
    for (mu, nu) in rel.generators() {
        if let Some(r) = caps.as_ref().and_then(|c| c.refute(u, mu, nu)) {
            return Ok(Verdict::Rejected(refuted(mu, nu, r)));
        }
        match checker.check_pair(mu, nu) {
            Ok(ev) => evidence.pairs.push(ev),
            Err(c) => return Ok(Verdict::Rejected(c)),
        }
    }
    if !cert.closures.symmetric {
        for (mu, nu) in &cert.pairs {
            if !rel.contains(nu, mu) {
                return Ok(Verdict::Rejected(fail(
                    mu,
                    nu,
                    Clause::Symmetry,
                    format!("the mirrored pair ({}, {}) is not in the relation", nu, mu),
                )));
            }
        }
    }
    Ok(Verdict::Accepted(evidence))
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("replay failed for ({left}, {right}): {reason}")]
pub struct ReplayError {
    pub left: Distribution,
    pub right: Distribution,
    pub reason: String,
}

/// Re-validates accepted evidence with the semantic primitives alone.
pub fn replay(u: &Universe, cert: &Certificate, evidence: &Evidence) -> Result<(), ReplayError> {
    let rel = cert.relation();
    let by_pair: BTreeMap<(&Distribution, &Distribution), &PairEvidence> =
        evidence.pairs.iter().map(|p| ((&p.left, &p.right), p)).collect();
    for (mu, nu) in rel.generators() {
        let err = |reason: String| ReplayError { left: mu.clone(), right: nu.clone(), reason };
        let Some(ev) = by_pair.get(&(mu, nu)) else {
            return Err(err("no evidence recorded".into()));
        };
        match &ev.decomposition {
            Decomposition::DiracLeft => {
                if mu.as_dirac().is_none() {
                    return Err(err("left side is not a Dirac distribution".into()));
                }
            }
            Decomposition::ReachesLeft(chain) => {
                chain.verify(u).map_err(|e| err(format!("{}", e)))?;
                if !rel.diagonal() || chain.source != *nu || chain.target() != mu {
                    return Err(err("weak move does not lead from the right side to the left side".into()));
                }
            }
            Decomposition::Finest { chain, parts } => {
                chain.verify(u).map_err(|e| err(format!("{}", e)))?;
                if !rel.convex() || chain.source != *nu {
                    return Err(err("split needs a convex relation and must start at the right side".into()));
                }
                let mut acc = Weights::new();
                for (e, part) in parts {
                    add_scaled(&mut acc, part, &mu.get(e));
                    if !rel.contains(&Distribution::dirac(e.clone()), part) {
                        return Err(err(format!("part for {} is not related", e)));
                    }
                }
                let covered: BTreeSet<&NTerm> = parts.iter().map(|(e, _)| e).collect();
                if covered != mu.support().collect() || Distribution::normalize(&acc).as_ref() != Some(chain.target()) {
                    return Err(err("parts do not recombine to the weak target".into()));
                }
            }
        }
        for a in common_actions(u, mu) {
            let set = distribution_step(u, mu, &a).map_err(|e| err(format!("{}", e)))?;
            let recorded: BTreeSet<&Distribution> =
                ev.transfers.iter().filter(|m| m.step.action == a).map(|m| &m.step.target).collect();
            for s in set.vertices(usize::MAX) {
                if !recorded.contains(&s.target) {
                    return Err(err(format!("vertex {}-transition to {} is unmatched", a, s.target)));
                }
            }
            if !rel.convex() && recorded.len() > 1 {
                let ms: Vec<&TransferMatch> = ev.transfers.iter().filter(|m| m.step.action == a).collect();
                if !rel.diagonal()
                    || ms.iter().any(|m| m.chain != ms[0].chain || m.answer.target != m.step.target)
                {
                    return Err(err(format!("{}-transitions are not answered by one weak move", a)));
                }
            }
        }
        for m in &ev.transfers {
            let ok = m.step.source == *mu
                && m.step.is_full()
                && m.step.verify(u).is_ok()
                && m.chain.source == *nu
                && m.chain.verify(u).is_ok()
                && m.answer.source == *m.chain.target()
                && m.answer.action == m.step.action
                && (m.step.action.is_tau() || m.answer.is_full())
                && m.answer.verify(u).is_ok()
                && rel.contains(mu, m.chain.target())
                && rel.contains(&m.step.target, &m.answer.target);
            if !ok {
                return Err(err(format!("answer to {}-transition {} does not replay", m.step.action, m.step.target)));
            }
        }
    }
    Ok(())
}
