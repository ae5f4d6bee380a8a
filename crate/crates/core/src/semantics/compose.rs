use alloc::format;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use super::{Move, SemanticsError, Step, Universe, WeakChain};
use crate::distr::{joint_decompose, mix, Distribution, Mixture};
use crate::rational::Rational;

/// Evidence for one of the three transition relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// `μ →α μ'`
    Step(Step),
    /// `μ →(τ) μ'`
    Partial(Step),
    /// `μ ⇒ μ'`
    Weak(WeakChain),
}

impl Witness {
    pub fn source(&self) -> &Distribution {
        match self {
            Witness::Step(s) | Witness::Partial(s) => &s.source,
            Witness::Weak(c) => &c.source,
        }
    }

    pub fn target(&self) -> &Distribution {
        match self {
            Witness::Step(s) | Witness::Partial(s) => &s.target,
            Witness::Weak(c) => c.target(),
        }
    }

    pub fn verify(&self, u: &Universe) -> Result<(), SemanticsError> {
        match self {
            Witness::Step(s) => {
                if !s.is_full() {
                    return Err(SemanticsError::InvalidWitness("a full step may not stay".into()));
                }
                s.verify(u)
            }
            Witness::Partial(s) => {
                if !s.action.is_tau() {
                    return Err(SemanticsError::InvalidWitness("partial steps are tau steps".into()));
                }
                s.verify(u)
            }
            Witness::Weak(c) => c.verify(u),
        }
    }
}

fn compose_steps(parts: &[(Rational, &Step)]) -> Result<Step, SemanticsError> {
    let action = parts[0].1.action.clone();
    let mut moves = Vec::new();
    for (p, s) in parts {
        if s.action != action {
            return Err(SemanticsError::MixedWitnessKinds);
        }
        for (e, m, mv) in &s.moves {
            moves.push((e.clone(), m * p, mv.clone()));
        }
    }
    Step::from_moves(action, moves)
}

/// `⊕ p_i · μ_i → ⊕ p_i · μ'_i` from witnesses for `μ_i → μ'_i`.
pub fn compose_transitions(parts: &[(Rational, Witness)]) -> Result<Witness, SemanticsError> {
    let live: Vec<&(Rational, Witness)> = parts.iter().filter(|(p, _)| !p.is_zero()).collect();
    if live.is_empty() {
        return Err(SemanticsError::InvalidWitness("no part has positive weight".into()));
    }
    let total: Rational = parts.iter().map(|(p, _)| p).sum();
    if parts.iter().any(|(p, _)| p.is_negative()) || total != crate::rational::one() {
        return Err(SemanticsError::InvalidWitness(format!("coefficients sum to {}", total)));
    }
    match &live[0].1 {
        Witness::Step(_) => {
            let steps: Result<Vec<_>, _> = live
                .iter()
                .map(|(p, w)| match w {
                    Witness::Step(s) => Ok((p.clone(), s)),
                    _ => Err(SemanticsError::MixedWitnessKinds),
                })
                .collect();
            compose_steps(&steps?).map(Witness::Step)
        }
        Witness::Partial(_) => {
            let steps: Result<Vec<_>, _> = live
                .iter()
                .map(|(p, w)| match w {
                    Witness::Partial(s) => Ok((p.clone(), s)),
                    _ => Err(SemanticsError::MixedWitnessKinds),
                })
                .collect();
            compose_steps(&steps?).map(Witness::Partial)
        }
        Witness::Weak(_) => {
            let chains: Result<Vec<_>, _> = live
                .iter()
                .map(|(p, w)| match w {
                    Witness::Weak(c) => Ok((p.clone(), c)),
                    _ => Err(SemanticsError::MixedWitnessKinds),
                })
                .collect();
            let chains = chains?;
            let n = chains.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
            let source = mix(&Mixture::new(chains.iter().map(|(p, c)| (p.clone(), c.source.clone())).collect())?);
            let mut out = WeakChain::empty(&source);
            for k in 0..n {
                let padded: Vec<Step> = chains
                    .iter()
                    .map(|(_, c)| c.steps.get(k).cloned().unwrap_or_else(|| Step::identity(c.target())))
                    .collect();
                let with_p: Vec<(Rational, &Step)> =
                    chains.iter().zip(&padded).map(|((p, _), s)| (p.clone(), s)).collect();
                out.steps.push(compose_steps(&with_p)?);
            }
            Ok(Witness::Weak(out))
        }
    }
}

/// Splits a step along a presentation `source = ⊕ p_i · μ_i`.
fn decompose_step(parts: &Mixture, step: &Step) -> Result<Vec<Step>, SemanticsError> {
    if mix(parts) != step.source {
        return Err(SemanticsError::InvalidWitness(format!(
            "the mixture does not denote the step source {}",
            step.source
        )));
    }
    // Each move is one point of the other presentation.
    let points = Mixture::new(
        step.moves
            .iter()
            .map(|(e, m, _)| (m.clone(), Distribution::dirac(e.clone())))
            .collect(),
    )?;
    let joint = joint_decompose(parts, &points)?;
    let mut out = Vec::with_capacity(parts.len());
    for (i, (p, _)) in parts.parts().iter().enumerate() {
        let moves: Vec<(_, Rational, Move)> = step
            .moves
            .iter()
            .enumerate()
            .filter(|(j, _)| !joint.r[i][*j].is_zero())
            .map(|(j, (e, _, mv))| (e.clone(), &joint.r[i][j] / p, mv.clone()))
            .collect();
        out.push(Step::from_moves(step.action.clone(), moves)?);
    }
    Ok(out)
}

/// Per-part witnesses `μ_i → μ'_i` with `μ' = ⊕ p_i · μ'_i`.
pub fn decompose_transition(parts: &Mixture, witness: &Witness) -> Result<Vec<Witness>, SemanticsError> {
    if parts.parts().iter().any(|(p, _)| !p.is_positive()) {
        return Err(SemanticsError::InvalidWitness("mixture weights must be positive".into()));
    }
    match witness {
        Witness::Step(s) => Ok(decompose_step(parts, s)?.into_iter().map(Witness::Step).collect()),
        Witness::Partial(s) => Ok(decompose_step(parts, s)?.into_iter().map(Witness::Partial).collect()),
        Witness::Weak(c) => {
            if mix(parts) != c.source {
                return Err(SemanticsError::InvalidWitness("the mixture does not denote the chain source".into()));
            }
            let mut chains: Vec<WeakChain> = parts.parts().iter().map(|(_, d)| WeakChain::empty(d)).collect();
            for s in &c.steps {
                let cur = Mixture::new(
                    parts.parts().iter().zip(&chains).map(|((p, _), ch)| (p.clone(), ch.target().clone())).collect(),
                )?;
                for (ch, part) in chains.iter_mut().zip(decompose_step(&cur, s)?) {
                    ch.steps.push(part);
                }
            }
            Ok(chains.into_iter().map(Witness::Weak).collect())
        }
    }
}
