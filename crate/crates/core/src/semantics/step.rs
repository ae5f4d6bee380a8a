use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use super::{SemanticsError, Universe};
use crate::distr::{add_scaled, add_weight, Distribution, Weights};
use crate::lp::{LinExpr, Lp, Var};
use crate::rational::{one, Rational};
use crate::terms::{Action, NTerm};

/// What one portion of a support state does during a step.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Move {
    Stay,
    Fire(Distribution),
}

/// A transition `source →α target` (or `→(τ)` when some portion stays),
/// presented by the per-state moves that realize it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub action: Action,
    pub source: Distribution,
    pub target: Distribution,
    /// `(state, mass, move)`; the masses of a state sum to its weight in `source`.
    pub moves: Vec<(NTerm, Rational, Move)>,
}

impl Step {
    /// Builds a step from moves, computing the target.
    pub fn from_moves(action: Action, moves: Vec<(NTerm, Rational, Move)>) -> Result<Step, SemanticsError> {
        let mut src = Weights::new();
        let mut tgt = Weights::new();
        let mut merged: BTreeMap<(NTerm, Move), Rational> = BTreeMap::new();
        for (e, m, mv) in moves {
            if !m.is_positive() {
                if m.is_zero() {
                    continue;
                }
                return Err(SemanticsError::InvalidWitness(format!("negative mass {} on `{}`", m, e)));
            }
            if matches!(mv, Move::Stay) && !action.is_tau() {
                return Err(SemanticsError::InvalidWitness(format!("`{}` stays during a `{}` step", e, action)));
            }
            add_weight(&mut src, &e, &m);
            match &mv {
                Move::Stay => add_weight(&mut tgt, &e, &m),
                Move::Fire(d) => add_scaled(&mut tgt, d, &m),
            }
            *merged.entry((e, mv)).or_insert_with(Rational::zero) += m;
        }
        let source = Distribution::from_weights(src)?;
        let target = Distribution::normalize(&tgt).expect("positive total");
        let moves = merged.into_iter().map(|((e, mv), m)| (e, m, mv)).collect();
        Ok(Step { action, source, target, moves })
    }

    /// The step in which every state stays.
    pub fn identity(mu: &Distribution) -> Step {
        Step {
            action: Action::tau(),
            source: mu.clone(),
            target: mu.clone(),
            moves: mu.iter().map(|(e, w)| (e.clone(), w.clone(), Move::Stay)).collect(),
        }
    }

    /// True when no portion stays, i.e. the step is a full `→α` transition.
    pub fn is_full(&self) -> bool {
        self.moves.iter().all(|(_, _, mv)| matches!(mv, Move::Fire(_)))
    }

    /// Total mass that fires.
    pub fn fired_mass(&self) -> Rational {
        self.moves.iter().filter(|(_, _, mv)| matches!(mv, Move::Fire(_))).map(|(_, m, _)| m).sum()
    }

    /// `(r, μ1, μ1')` with `source = μ1 ⊕r μ2`, `μ1 →τ μ1'` and `target = μ1' ⊕r μ2`.
    pub fn split(&self) -> (Rational, Option<(Distribution, Distribution)>) {
        let r = self.fired_mass();
        if r.is_zero() {
            return (r, None);
        }
        let mut from = Weights::new();
        let mut to = Weights::new();
        for (e, m, mv) in &self.moves {
            if let Move::Fire(d) = mv {
                add_weight(&mut from, e, m);
                add_scaled(&mut to, d, m);
            }
        }
        let from = Distribution::normalize(&from).expect("positive fired mass");
        let to = Distribution::normalize(&to).expect("positive fired mass");
        (r, Some((from, to)))
    }

    /// Checks the step against the universe.
    pub fn verify(&self, u: &Universe) -> Result<(), SemanticsError> {
        let rebuilt = Step::from_moves(self.action.clone(), self.moves.clone())?;
        if rebuilt.source != self.source {
            return Err(SemanticsError::InvalidWitness(format!(
                "moves start from {} rather than {}",
                rebuilt.source, self.source
            )));
        }
        if rebuilt.target != self.target {
            return Err(SemanticsError::InvalidWitness(format!(
                "moves reach {} rather than {}",
                rebuilt.target, self.target
            )));
        }
        for (e, _, mv) in &self.moves {
            if !u.contains(e) {
                return Err(SemanticsError::UnknownState(e.clone()));
            }
            if let Move::Fire(d) = mv {
                if !u.successors(e, &self.action).any(|t| t == d) {
                    return Err(SemanticsError::InvalidWitness(format!(
                        "`{}` has no `{}` transition to {}",
                        e, self.action, d
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The successors of a distribution under one action: per support state,
/// the vertices of its after-set.
#[derive(Clone, Debug)]
pub struct SuccessorSet {
    pub source: Distribution,
    pub action: Action,
    pub per_state: Vec<(NTerm, Rational, Vec<Move>)>,
}

/// Why a transition could not be established.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refusal {
    pub reason: String,
    /// The infeasible linear system, rendered as text.
    pub system: Option<String>,
}

impl core::fmt::Display for Refusal {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.reason)?;
        if let Some(s) = &self.system {
            write!(f, "\n{}", s)?;
        }
        Ok(())
    }
}

fn move_target<'a>(e: &'a NTerm, mv: &'a Move) -> Distribution {
    match mv {
        Move::Stay => Distribution::dirac(e.clone()),
        Move::Fire(d) => d.clone(),
    }
}

impl SuccessorSet {
    /// Number of vertex transitions (products of per-state vertices), saturating.
    pub fn vertex_count(&self) -> u128 {
        self.per_state.iter().fold(1u128, |acc, (_, _, vs)| acc.saturating_mul(vs.len() as u128))
    }

    /// Vertex transitions, at most `limit` of them, in lexicographic order.
    pub fn vertices(&self, limit: usize) -> Vec<Step> {
        let mut out = Vec::new();
        if self.per_state.iter().any(|(_, _, vs)| vs.is_empty()) {
            return out;
        }
        let mut idx = alloc::vec![0usize; self.per_state.len()];
        loop {
            if out.len() >= limit {
                break;
            }
            let moves = self
                .per_state
                .iter()
                .zip(&idx)
                .map(|((e, w, vs), &k)| (e.clone(), w.clone(), vs[k].clone()))
                .collect();
            out.push(Step::from_moves(self.action.clone(), moves).expect("vertex moves are well-formed"));
            let mut pos = self.per_state.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.per_state[pos].2.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
        out
    }

    fn system(&self, nu: &Distribution) -> (Lp, Vec<(NTerm, Rational, Move, Var)>) {
        let mut lp = Lp::new();
        let mut vars = Vec::new();
        let mut coords: BTreeMap<NTerm, LinExpr> = BTreeMap::new();
        for (e, w, vs) in &self.per_state {
            let mut total = LinExpr::zero();
            for mv in vs {
                let v = lp.var();
                total.add_term(v, one());
                for (x, p) in move_target(e, mv).iter() {
                    coords.entry(x.clone()).or_default().add_term(v, p.clone());
                }
                vars.push((e.clone(), w.clone(), mv.clone(), v));
            }
            lp.eq(&total, &LinExpr::constant(w.clone()));
        }
        for x in nu.support() {
            coords.entry(x.clone()).or_default();
        }
        for (x, c) in coords {
            lp.eq(&c, &LinExpr::constant(nu.get(&x)));
        }
        (lp, vars)
    }

    /// Decides whether `nu` is a successor, returning the realizing moves.
    pub fn contains(&self, nu: &Distribution) -> Option<Step> {
        let (lp, vars) = self.system(nu);
        let sol = lp.solve()?;
        let moves = vars.into_iter().map(|(e, _, mv, v)| (e, sol.value(v), mv)).collect();
        Some(Step::from_moves(self.action.clone(), moves).expect("solution is well-formed"))
    }

    pub fn refusal(&self, nu: &Distribution) -> Refusal {
        let (lp, _) = self.system(nu);
        Refusal {
            reason: format!("{} has no {} successor {}", self.source, self.action, nu),
            system: Some(lp.to_string()),
        }
    }
}

/// Successors of `mu` under a full `α` step.
pub fn distribution_step(u: &Universe, mu: &Distribution, a: &Action) -> Result<SuccessorSet, SemanticsError> {
    u.check_supported(mu)?;
    let mut per_state = Vec::new();
    for (e, w) in mu.iter() {
        let vs: Vec<Move> = u.successors(e, a).cloned().map(Move::Fire).collect();
        if vs.is_empty() {
            return Err(SemanticsError::NoTransition { state: e.clone(), action: a.clone() });
        }
        per_state.push((e.clone(), w.clone(), vs));
    }
    Ok(SuccessorSet { source: mu.clone(), action: a.clone(), per_state })
}

/// Successors of `mu` under a partial tau step.
pub fn partial_successors(u: &Universe, mu: &Distribution) -> Result<SuccessorSet, SemanticsError> {
    u.check_supported(mu)?;
    let tau = Action::tau();
    let per_state = mu
        .iter()
        .map(|(e, w)| {
            let mut vs: Vec<Move> = u.successors(e, &tau).cloned().map(Move::Fire).collect();
            vs.push(Move::Stay);
            (e.clone(), w.clone(), vs)
        })
        .collect();
    Ok(SuccessorSet { source: mu.clone(), action: tau, per_state })
}

/// Decides `mu →(τ) nu`.
pub fn partial_tau_step(u: &Universe, mu: &Distribution, nu: &Distribution) -> Result<Step, Refusal> {
    if mu == nu {
        return Ok(Step::identity(mu));
    }
    let set = partial_successors(u, mu).map_err(|e| Refusal { reason: e.to_string(), system: None })?;
    if let Err(e) = u.check_supported(nu) {
        return Err(Refusal { reason: e.to_string(), system: None });
    }
    set.contains(nu).ok_or_else(|| set.refusal(nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::semantics::{build_universe, den};
    use crate::terms::{parse_distribution, parse_nterm, parse_pterm};

    fn n(s: &str) -> NTerm {
        parse_nterm(s).unwrap()
    }

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    #[test]
    fn golden_steps() {
        let a = Action::new("a").unwrap();
        let h1 = n("a.(D(p.D(0)) +[1/4] (D(p.D(0)) +[1/3] D(q.D(0))))");
        let u = build_universe([h1.clone()]);
        let set = distribution_step(&u, &Distribution::dirac(h1), &a).unwrap();
        let vs = set.vertices(10);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].target, d("{1/2: p.D(0), 1/2: q.D(0)}"));

        let e = n("a.(D(p.D(0)) +[1/2] D(q.D(0))) + a.(D(p.D(0)) +[1/3] D(q.D(0)))");
        let u = build_universe([e.clone()]);
        let set = distribution_step(&u, &Distribution::dirac(e), &a).unwrap();
        let target = den(&parse_pterm("D(p.D(0)) +[5/12] D(q.D(0))").unwrap());
        let step = set.contains(&target).unwrap();
        assert_eq!(step.moves.len(), 2);
        assert!(step.moves.iter().all(|(_, m, _)| *m == rat(1, 2)));
        step.verify(&u).unwrap();

        let u = build_universe([n("0")]);
        assert!(matches!(
            distribution_step(&u, &Distribution::dirac(n("0")), &a),
            Err(SemanticsError::NoTransition { .. })
        ));
    }

    #[test]
    fn partial_examples() {
        let mu = d("{1/3: tau.(D(p.D(0)) +[1/2] D(q.D(0))), 1/3: p.D(0), 1/3: q.D(0)}");
        let u = build_universe([&mu]);
        let nu = d("{1/2: p.D(0), 1/2: q.D(0)}");
        let step = partial_tau_step(&u, &mu, &nu).unwrap();
        step.verify(&u).unwrap();
        let (r, parts) = step.split();
        assert_eq!(r, rat(1, 3));
        let (from, to) = parts.unwrap();
        assert_eq!(from, Distribution::dirac(n("tau.(D(p.D(0)) +[1/2] D(q.D(0)))")));
        assert_eq!(to, nu);

        let mu = d("{1/2: tau.D(x.D(0)), 1/2: x.D(0)}");
        let u = build_universe([&mu]);
        let step = partial_tau_step(&u, &mu, &d("{1: x.D(0)}")).unwrap();
        assert_eq!(step.split().0, rat(1, 2));
        assert!(!partial_tau_step(&u, &mu, &mu).unwrap().is_full());
        let refusal = partial_tau_step(&u, &d("{1: x.D(0)}"), &mu).unwrap_err();
        assert!(refusal.system.is_some());
    }

    #[test]
    fn vertex_products() {
        let mu = d("{1/2: a.D(0) + a.D(b.D(0)), 1/2: a.D(b.D(0)) + a.D(0) + a.D(c.D(0))}");
        let u = build_universe([&mu]);
        let set = distribution_step(&u, &mu, &Action::new("a").unwrap()).unwrap();
        assert_eq!(set.vertex_count(), 6);
        assert_eq!(set.vertices(100).len(), 6);
        assert_eq!(set.vertices(4).len(), 4);
    }
}
