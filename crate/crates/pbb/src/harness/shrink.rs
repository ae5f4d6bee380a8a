//! Greedy shrinking: term depth first, then support size, then denominators.

use num_traits::{One, Zero};
use pbb_core::distr::{add_weight, Distribution, Weights};
use pbb_core::rational::Rational;
use pbb_core::terms::{Action, NTerm, PTerm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Depth,
    Support,
    Denominator,
}

pub const STAGES: [Stage; 3] = [Stage::Depth, Stage::Support, Stage::Denominator];

/// Strictly smaller variants of a value at one stage.
pub trait Shrink: Clone {
    fn shrink(&self, stage: Stage) -> Vec<Self>;
}

/// Repeatedly replaces `input` by the first smaller variant that still
/// fails, until no variant fails. The result always fails.
pub fn minimize<T: Shrink>(input: &T, fails: impl Fn(&T) -> bool, max_steps: usize) -> T {
    let mut cur = input.clone();
    let mut steps = 0;
    for stage in STAGES {
        'again: loop {
            for cand in cur.shrink(stage) {
                if steps >= max_steps {
                    return cur;
                }
                steps += 1;
                if fails(&cand) {
                    cur = cand;
                    continue 'again;
                }
            }
            break;
        }
    }
    cur
}

impl Shrink for NTerm {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        let mut out = Vec::new();
        match (stage, self) {
            (_, NTerm::Nil) => {}
            (Stage::Depth, NTerm::Prefix(a, p)) => {
                out.push(NTerm::Nil);
                out.extend(p.shrink(stage).into_iter().map(|q| NTerm::prefix(a.clone(), q)));
            }
            (Stage::Depth, NTerm::Choice(l, r)) => {
                out.push(NTerm::Nil);
                out.extend(l.shrink(stage).into_iter().map(|x| NTerm::choice(x, (**r).clone())));
                out.extend(r.shrink(stage).into_iter().map(|x| NTerm::choice((**l).clone(), x)));
            }
            (Stage::Support, NTerm::Choice(l, r)) => {
                out.push((**l).clone());
                out.push((**r).clone());
            }
            (_, NTerm::Prefix(a, p)) => out.extend(p.shrink(stage).into_iter().map(|q| NTerm::prefix(a.clone(), q))),
            (_, NTerm::Choice(l, r)) => {
                out.extend(l.shrink(stage).into_iter().map(|x| NTerm::choice(x, (**r).clone())));
                out.extend(r.shrink(stage).into_iter().map(|x| NTerm::choice((**l).clone(), x)));
            }
        }
        out
    }
}

impl Shrink for PTerm {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        match self {
            PTerm::Dirac(e) => e.shrink(stage).into_iter().map(PTerm::dirac).collect(),
            PTerm::Choice(l, r, q) => {
                let mut out = Vec::new();
                if stage == Stage::Support {
                    out.push((**l).clone());
                    out.push((**q).clone());
                }
                if stage == Stage::Denominator {
                    out.extend(r.shrink(stage).into_iter().map(|s| PTerm::choice((**l).clone(), s, (**q).clone()).unwrap()));
                }
                out.extend(l.shrink(stage).into_iter().map(|x| PTerm::choice(x, r.clone(), (**q).clone()).unwrap()));
                out.extend(q.shrink(stage).into_iter().map(|x| PTerm::choice((**l).clone(), r.clone(), x).unwrap()));
                out
            }
        }
    }
}

/// Probabilities in (0, 1): fractions with smaller denominators.
impl Shrink for Rational {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        if stage != Stage::Denominator {
            return Vec::new();
        }
        let den: i64 = self.denom().try_into().unwrap_or(i64::MAX);
        let mut out = Vec::new();
        for d in 2..den.min(64) {
            let n = (self * Rational::from_integer(d.into())).round();
            let c = n / Rational::from_integer(d.into());
            if c > Rational::zero() && c < Rational::one() && !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

fn renormalize(w: &Weights) -> Option<Distribution> {
    Distribution::normalize(w)
}

impl Shrink for Distribution {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        let entries: Vec<(&NTerm, &Rational)> = self.iter().collect();
        let mut out = Vec::new();
        match stage {
            Stage::Depth => {
                for (i, (e, _)) in entries.iter().enumerate() {
                    for f in e.shrink(stage) {
                        let mut w = Weights::new();
                        for (j, (g, p)) in entries.iter().enumerate() {
                            add_weight(&mut w, if i == j { &f } else { g }, p);
                        }
                        out.extend(renormalize(&w));
                    }
                }
            }
            Stage::Support => {
                if entries.len() > 1 {
                    for i in 0..entries.len() {
                        let mut w = Weights::new();
                        for (j, (g, p)) in entries.iter().enumerate() {
                            if i != j {
                                add_weight(&mut w, g, p);
                            }
                        }
                        out.extend(renormalize(&w));
                    }
                }
            }
            Stage::Denominator => {
                let n = entries.len() as i64;
                let uniform = Rational::new(1.into(), n.into());
                if entries.iter().any(|(_, p)| **p != uniform) {
                    let mut w = Weights::new();
                    for (g, _) in &entries {
                        add_weight(&mut w, g, &uniform);
                    }
                    out.extend(renormalize(&w));
                }
            }
        }
        out
    }
}

impl Shrink for Action {
    fn shrink(&self, _: Stage) -> Vec<Self> {
        Vec::new()
    }
}

impl Shrink for u32 {
    fn shrink(&self, _: Stage) -> Vec<Self> {
        Vec::new()
    }
}

/// Element-wise, plus element removal at the support stage (keeping one).
impl<T: Shrink> Shrink for Vec<T> {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        let mut out = Vec::new();
        if stage == Stage::Support && self.len() > 1 {
            for i in 0..self.len() {
                let mut v = self.clone();
                v.remove(i);
                out.push(v);
            }
        }
        for i in 0..self.len() {
            for x in self[i].shrink(stage) {
                let mut v = self.clone();
                v[i] = x;
                out.push(v);
            }
        }
        out
    }
}

impl<A: Shrink, B: Shrink> Shrink for (A, B) {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        let mut out: Vec<Self> = self.0.shrink(stage).into_iter().map(|a| (a, self.1.clone())).collect();
        out.extend(self.1.shrink(stage).into_iter().map(|b| (self.0.clone(), b)));
        out
    }
}

impl<A: Shrink, B: Shrink, C: Shrink> Shrink for (A, B, C) {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        let mut out: Vec<Self> = self.0.shrink(stage).into_iter().map(|a| (a, self.1.clone(), self.2.clone())).collect();
        out.extend(self.1.shrink(stage).into_iter().map(|b| (self.0.clone(), b, self.2.clone())));
        out.extend(self.2.shrink(stage).into_iter().map(|c| (self.0.clone(), self.1.clone(), c)));
        out
    }
}

impl<A: Shrink, B: Shrink, C: Shrink, D: Shrink> Shrink for (A, B, C, D) {
    fn shrink(&self, stage: Stage) -> Vec<Self> {
        let (a, b, c, d) = self;
        let mut out: Vec<Self> = a.shrink(stage).into_iter().map(|x| (x, b.clone(), c.clone(), d.clone())).collect();
        out.extend(b.shrink(stage).into_iter().map(|x| (a.clone(), x, c.clone(), d.clone())));
        out.extend(c.shrink(stage).into_iter().map(|x| (a.clone(), b.clone(), x, d.clone())));
        out.extend(d.shrink(stage).into_iter().map(|x| (a.clone(), b.clone(), c.clone(), x)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pbb_core::terms::{parse_distribution, parse_nterm};

    #[test]
    fn minimize_keeps_failure() {
        let d = parse_distribution("{1/3: a.D(b.D(0)) + tau.D(0), 2/3: b.D(a.D(0))}").unwrap();
        // Fails whenever some support state can do `a`.
        let fails = |d: &Distribution| d.support().any(|e| e.to_string().contains("a."));
        let m = minimize(&d, fails, 1000);
        assert!(fails(&m));
        assert_eq!(m.len(), 1);
        assert!(m.support().all(|e| e.depth() <= 2));
    }

    #[test]
    fn term_depth_first() {
        let e = parse_nterm("a.D(b.D(c.D(0)))").unwrap();
        let m = minimize(&e, |e| e.depth() >= 2, 100);
        assert_eq!(m.depth(), 2);
    }

    #[test]
    fn rationals() {
        let r = Rational::new(3.into(), 7.into());
        let s = r.shrink(Stage::Denominator);
        assert!(s.contains(&Rational::new(1.into(), 2.into())));
        assert!(s.iter().all(|c| c.denom() < r.denom()));
        assert_eq!(minimize(&r, |_| true, 100), Rational::new(1.into(), 2.into()));
    }
}
