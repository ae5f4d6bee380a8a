use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use super::{Move, SemanticsError, Step, Universe};
use crate::distr::Distribution;
use crate::lp::{LinExpr, Lp, Solution, Var};
use crate::rational::{one, Rational};
use crate::terms::{Action, NTerm};

/// Symbolic weights over states.
pub(crate) type VecExpr = BTreeMap<NTerm, LinExpr>;

pub(crate) fn constant_vec(mu: &Distribution) -> VecExpr {
    mu.iter().map(|(e, w)| (e.clone(), LinExpr::constant(w.clone()))).collect()
}

/// A chain `μ = η_0 →(τ) η_1 →(τ) … →(τ) η_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakChain {
    pub source: Distribution,
    pub steps: Vec<Step>,
}

impl WeakChain {
    pub fn empty(mu: &Distribution) -> Self {
        WeakChain { source: mu.clone(), steps: Vec::new() }
    }

    pub fn target(&self) -> &Distribution {
        self.steps.last().map(|s| &s.target).unwrap_or(&self.source)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn then(mut self, other: WeakChain) -> Result<WeakChain, SemanticsError> {
        if other.source != *self.target() {
            return Err(SemanticsError::InvalidWitness(format!(
                "chain ending in {} cannot continue from {}",
                self.target(),
                other.source
            )));
        }
        self.steps.extend(other.steps);
        Ok(self)
    }

    pub fn verify(&self, u: &Universe) -> Result<(), SemanticsError> {
        let mut cur = &self.source;
        for (i, s) in self.steps.iter().enumerate() {
            if !s.action.is_tau() {
                return Err(SemanticsError::InvalidWitness(format!("step {} is labelled {}", i, s.action)));
            }
            if s.source != *cur {
                return Err(SemanticsError::InvalidWitness(format!(
                    "step {} starts from {} rather than {}",
                    i, s.source, cur
                )));
            }
            s.verify(u)?;
            cur = &s.target;
        }
        Ok(())
    }
}

/// Flow encoding of `source ⇒ result`: every state of the tau-closure either
/// stops or fires portions of its mass along its tau-transitions.
pub(crate) struct WeakFlow {
    pub result: VecExpr,
    fires: Vec<(NTerm, Distribution, Var)>,
}

pub(crate) fn add_weak_flow(lp: &mut Lp, u: &Universe, source: &VecExpr) -> WeakFlow {
    let domain = u.tau_closure(source.keys());
    let tau = Action::tau();
    let mut balance: BTreeMap<NTerm, LinExpr> = BTreeMap::new();
    let mut result = VecExpr::new();
    let mut fires = Vec::new();
    for f in &domain {
        let stop = lp.var();
        let b = balance.entry(f.clone()).or_default();
        b.add_term(stop, one());
        result.insert(f.clone(), LinExpr::var(stop));
        for eta in u.successors(f, &tau) {
            let v = lp.var();
            fires.push((f.clone(), eta.clone(), v));
        }
    }
    for (f, eta, v) in &fires {
        balance.get_mut(f).expect("in domain").add_term(*v, one());
        for (g, w) in eta.iter() {
            balance.get_mut(g).expect("closure contains targets").add_term(*v, -w.clone());
        }
    }
    for (f, mut b) in balance {
        if let Some(s) = source.get(&f) {
            b.add_scaled(s, &-one());
        }
        lp.eq_zero(b);
    }
    WeakFlow { result, fires }
}

impl WeakFlow {
    /// Schedules a solved flow as a chain. States are layered by the longest
    /// firing path that feeds them; each layer fires in one partial step.
    pub fn chain(&self, source: &Distribution, sol: &Solution) -> WeakChain {
        let mut out: BTreeMap<NTerm, Vec<(Distribution, Rational)>> = BTreeMap::new();
        for (f, eta, v) in &self.fires {
            let x = sol.value(*v);
            if x.is_positive() {
                out.entry(f.clone()).or_default().push((eta.clone(), x));
            }
        }
        // Tau edges strictly lower complexity, so this order is topological.
        let mut order: Vec<&NTerm> = out.keys().collect();
        order.sort_by(|a, b| b.complexity().cmp(&a.complexity()).then(a.cmp(b)));
        let mut layer: BTreeMap<NTerm, usize> = BTreeMap::new();
        for f in &order {
            let l = *layer.entry((*f).clone()).or_insert(0);
            for (eta, _) in &out[*f] {
                for g in eta.support() {
                    if out.contains_key(g) {
                        let e = layer.entry(g.clone()).or_insert(0);
                        *e = (*e).max(l + 1);
                    }
                }
            }
        }
        let depth = layer.values().copied().max().map(|m| m + 1).unwrap_or(0);
        let mut chain = WeakChain::empty(source);
        for l in 0..depth {
            let cur = chain.target().clone();
            let mut moves = Vec::new();
            for (g, w) in cur.iter() {
                let firing = out.get(g).filter(|_| layer.get(g) == Some(&l));
                match firing {
                    Some(list) => {
                        let mut rest = w.clone();
                        for (eta, x) in list {
                            rest -= x;
                            moves.push((g.clone(), x.clone(), Move::Fire(eta.clone())));
                        }
                        debug_assert!(!rest.is_negative());
                        moves.push((g.clone(), rest, Move::Stay));
                    }
                    None => moves.push((g.clone(), w.clone(), Move::Stay)),
                }
            }
            let step = Step::from_moves(Action::tau(), moves).expect("flow schedules are well-formed");
            chain.steps.push(step);
        }
        chain
    }
}

/// Symbolic image of `source` under one step labelled `a`.
pub(crate) struct StepImage {
    pub target: VecExpr,
    action: Action,
    vars: Vec<(NTerm, Move, Var)>,
}

/// Constrains `target` to be an `a`-successor of `source` (a partial one when
/// `partial`). States without `a` are forced to carry zero weight.
pub(crate) fn add_step_image(lp: &mut Lp, u: &Universe, source: &VecExpr, a: &Action, partial: bool) -> StepImage {
    let mut target = VecExpr::new();
    let mut vars = Vec::new();
    for (g, mass) in source {
        let mut total = LinExpr::zero();
        for eta in u.successors(g, a) {
            let v = lp.var();
            total.add_term(v, one());
            for (h, w) in eta.iter() {
                target.entry(h.clone()).or_default().add_term(v, w.clone());
            }
            vars.push((g.clone(), Move::Fire(eta.clone()), v));
        }
        if partial {
            let v = lp.var();
            total.add_term(v, one());
            target.entry(g.clone()).or_default().add_term(v, one());
            vars.push((g.clone(), Move::Stay, v));
        }
        lp.eq(&total, mass);
    }
    StepImage { target, action: a.clone(), vars }
}

impl StepImage {
    pub fn step(&self, sol: &Solution) -> Step {
        let moves = self.vars.iter().map(|(g, mv, v)| (g.clone(), sol.value(*v), mv.clone())).collect();
        Step::from_moves(self.action.clone(), moves).expect("solved step is well-formed")
    }
}

pub(crate) fn add_equal(lp: &mut Lp, a: &VecExpr, b: &VecExpr) {
    let keys: BTreeSet<&NTerm> = a.keys().chain(b.keys()).collect();
    let zero = LinExpr::zero();
    for k in keys {
        lp.eq(a.get(k).unwrap_or(&zero), b.get(k).unwrap_or(&zero));
    }
}

/// Decides `mu ⇒_depth nu` exactly, returning a schedule.
pub fn weak_reach(
    u: &Universe,
    mu: &Distribution,
    nu: &Distribution,
    depth: u64,
) -> Result<Option<WeakChain>, SemanticsError> {
    u.check_supported(mu)?;
    u.check_supported(nu)?;
    let bound = u.bound();
    if depth > bound {
        return Err(SemanticsError::DepthExceedsBound { depth, bound });
    }
    if mu == nu {
        return Ok(Some(WeakChain::empty(mu)));
    }
    let closure = u.tau_closure(mu.support());
    if nu.support().any(|e| !closure.contains(e)) {
        return Ok(None);
    }
    let height = u.tau_height(mu.support());
    if depth >= height {
        let mut lp = Lp::new();
        let flow = add_weak_flow(&mut lp, u, &constant_vec(mu));
        add_equal(&mut lp, &flow.result, &constant_vec(nu));
        return Ok(lp.solve().map(|sol| flow.chain(mu, &sol)));
    }
    // Fewer steps than the longest tau path: unroll step by step.
    let mut lp = Lp::new();
    let mut cur = constant_vec(mu);
    let mut images = Vec::new();
    for _ in 0..depth {
        let img = add_step_image(&mut lp, u, &cur, &Action::tau(), true);
        cur = img.target.clone();
        images.push(img);
    }
    add_equal(&mut lp, &cur, &constant_vec(nu));
    let Some(sol) = lp.solve() else {
        return Ok(None);
    };
    let mut chain = WeakChain::empty(mu);
    for img in &images {
        let s = img.step(&sol);
        if !s.fired_mass().is_zero() {
            chain.steps.push(s);
        }
    }
    Ok(Some(chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::semantics::{build_universe, distribution_step, partial_tau_step};
    use crate::terms::parse_distribution;

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    #[test]
    fn reflexive() {
        let mu = d("{1: tau.D(0)}");
        let u = build_universe([&mu]);
        assert_eq!(weak_reach(&u, &mu, &mu, 0).unwrap().unwrap().len(), 0);
    }

    #[test]
    fn example_b_schedules() {
        let p = "p.D(0)";
        let mu = d(&format!("{{1/2: tau.D(tau.D({p})), 1/3: tau.D({p}), 1/6: {p}}}"));
        let target = d(&format!("{{1: {p}}}"));
        let u = build_universe([&mu]);
        let chain = weak_reach(&u, &mu, &target, u.bound()).unwrap().unwrap();
        chain.verify(&u).unwrap();
        assert_eq!(chain.target(), &target);
        assert_eq!(chain.len(), 2);
        // The two-step route through 5/6 δ(tau.P) ⊕ 1/6 ⟦P⟧.
        let mid = d(&format!("{{5/6: tau.D({p}), 1/6: {p}}}"));
        let s1 = partial_tau_step(&u, &mu, &mid).unwrap();
        let s2 = partial_tau_step(&u, &mid, &target).unwrap();
        WeakChain { source: mu.clone(), steps: alloc::vec![s1, s2] }.verify(&u).unwrap();
        // One step is not enough.
        assert!(weak_reach(&u, &mu, &target, 1).unwrap().is_none());
        assert!(matches!(weak_reach(&u, &mu, &target, u.bound() + 1), Err(SemanticsError::DepthExceedsBound { .. })));
    }

    #[test]
    fn example_c() {
        let mu = d("{1/2: tau.D(a.D(0) + b.D(0)), 1/2: a.D(c.D(0))}");
        let u = build_universe([&mu]);
        let mid = d("{1/2: a.D(0) + b.D(0), 1/2: a.D(c.D(0))}");
        let chain = weak_reach(&u, &mu, &mid, u.bound()).unwrap().unwrap();
        chain.verify(&u).unwrap();
        let set = distribution_step(&u, &mid, &Action::new("a").unwrap()).unwrap();
        assert!(set.contains(&d("{1/2: 0, 1/2: c.D(0)}")).is_some());
        // The mixture itself cannot do a: one support state is tau-prefixed.
        assert!(distribution_step(&u, &mu, &Action::new("a").unwrap()).is_err());
    }

    #[test]
    fn intro_partial() {
        let branch = "tau.(D(a.D(0)) +[1/2] D(b.D(0)))";
        let nu = d(&format!("{{1/3: {branch}, 1/3: a.D(0), 1/3: b.D(0)}}"));
        let mu = d("{1/2: a.D(0), 1/2: b.D(0)}");
        let u = build_universe([&nu]);
        let chain = weak_reach(&u, &nu, &mu, u.bound()).unwrap().unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.steps[0].fired_mass(), rat(1, 3));
        assert!(weak_reach(&u, &mu, &nu, u.bound()).unwrap().is_none());
    }
}
