use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use pbb_core::distr::{add_scaled, joint_decompose, limit_residual, mix, Distribution, Mixture, Weights};
use pbb_core::equiv::{
    check_certificate, check_congruence, strong_partition, BranchingSearch, Budget, Certificate, Premise,
    SearchOutcome, Verdict,
};
use pbb_core::rational::Rational;
use pbb_core::semantics::{
    build_universe, compose_transitions, decompose_transition, distribution_step, partial_successors, Universe,
    WeakChain, Witness,
};
use pbb_core::stability::{cancel_check, is_stable, stabilize, CancelVerdict, Stability};
use pbb_core::terms::{Action, NTerm, PTerm};
use serde::Serialize;

use super::gen::{graft, Gen, GenConfig};
use super::oracle::brute_strong_partition;
use super::shrink::{minimize, Shrink};
use super::HarnessError;

pub const SUITES: [&str; 9] = [
    "flexibelDelen",
    "limit_residual",
    "composition",
    "congruence",
    "weak_transfer",
    "decomp",
    "cancellation",
    "wgt",
    "strong_oracle",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub case: usize,
    pub input: String,
    pub reason: String,
    pub minimized: String,
    pub minimized_reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub count: usize,
    pub passed: usize,
    pub failed: usize,
    /// Cases outside the suite's scope, e.g. universes too large for an oracle.
    pub skipped: usize,
    pub first_failure: Option<Failure>,
}

impl SuiteReport {
    pub fn success(&self) -> bool {
        self.failed == 0
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>7} {:>7} {:>7} {:>7}", "suite", "count", "passed", "failed", "skipped");
        let _ = writeln!(s, "{:<16} {:>7} {:>7} {:>7} {:>7}", self.suite, self.count, self.passed, self.failed, self.skipped);
        if let Some(f) = &self.first_failure {
            let _ = writeln!(s, "first failure (case {}): {}", f.case, f.reason);
            let _ = writeln!(s, "  input:     {}", f.input);
            let _ = writeln!(s, "  minimized: {}", f.minimized);
            let _ = writeln!(s, "  because:   {}", f.minimized_reason);
        }
        s
    }
}

trait Suite {
    type Input: Shrink + std::fmt::Debug;
    fn generate(&self, g: &mut Gen) -> Self::Input;
    fn check(&self, input: &Self::Input) -> Result<(), String>;
    fn applicable(&self, _input: &Self::Input) -> bool {
        true
    }
}

fn run<S: Suite>(name: &str, s: &S, cfg: &GenConfig, count: usize) -> SuiteReport {
    let mut report =
        SuiteReport { suite: name.into(), seed: cfg.seed, count, passed: 0, failed: 0, skipped: 0, first_failure: None };
    for case in 0..count {
        let mut g = Gen::for_case(cfg, case as u64);
        let input = s.generate(&mut g);
        if !s.applicable(&input) {
            report.skipped += 1;
            continue;
        }
        match s.check(&input) {
            Ok(()) => report.passed += 1,
            Err(reason) => {
                report.failed += 1;
                if report.first_failure.is_none() {
                    let small = minimize(&input, |x| s.applicable(x) && s.check(x).is_err(), 500);
                    let minimized_reason = s.check(&small).err().unwrap_or_default();
                    report.first_failure = Some(Failure {
                        case,
                        input: format!("{:?}", input),
                        reason,
                        minimized: format!("{:?}", small),
                        minimized_reason,
                    });
                }
            }
        }
    }
    report
}

pub fn run_suite(name: &str, cfg: &GenConfig, count: usize) -> Result<SuiteReport, HarnessError> {
    cfg.validate()?;
    Ok(match name {
        "flexibelDelen" => run(name, &FlexibelDelen, cfg, count),
        "limit_residual" => run(name, &LimitResidual, cfg, count),
        "composition" => run(name, &Composition, cfg, count),
        "congruence" => run(name, &Congruence, cfg, count),
        "weak_transfer" => run(name, &WeakTransfer, cfg, count),
        "decomp" => run(name, &Decomp, cfg, count),
        "cancellation" => run(name, &Cancellation, cfg, count),
        "wgt" => run(name, &Wgt, cfg, count),
        "strong_oracle" => run(name, &StrongOracle { max_states: 4 }, cfg, count),
        other => return Err(HarnessError::UnknownSuite(other.into())),
    })
}

// ---- shared pieces ----

fn frac(n: u32, d: u32) -> Rational {
    Rational::new(n.into(), d.into())
}

fn weighted<T: Clone>(parts: &[(u32, T)]) -> Vec<(Rational, T)> {
    let total: u32 = parts.iter().map(|(w, _)| *w).sum();
    parts.iter().map(|(w, x)| (frac(*w, total), x.clone())).collect()
}

fn distribution_of(parts: &[(Rational, NTerm)]) -> Distribution {
    let mut w = Weights::new();
    for (p, e) in parts {
        add_scaled(&mut w, &Distribution::dirac(e.clone()), p);
    }
    Distribution::normalize(&w).expect("positive weights")
}

/// Weighted states with a graft site each: `μ` uses the states as given,
/// `μ'` their grafted copies.
type Grafted = Vec<(u32, NTerm, u32)>;

fn gen_grafted(g: &mut Gen) -> Grafted {
    let depth = g.config().max_depth;
    let k = 1 + g.below(g.config().max_branch as usize);
    (0..k)
        .map(|_| {
            let w = 1 + g.below(3) as u32;
            let (e, _) = g.grafted(depth);
            (w, e, g.below(1 << 16) as u32)
        })
        .collect()
}

fn grafted_pair(parts: &Grafted) -> (Distribution, Distribution) {
    let total: u32 = parts.iter().map(|(w, _, _)| *w).sum();
    let left: Vec<(Rational, NTerm)> = parts.iter().map(|(w, e, _)| (frac(*w, total), e.clone())).collect();
    let right: Vec<(Rational, NTerm)> = parts.iter().map(|(w, e, k)| (frac(*w, total), graft(e, *k))).collect();
    (distribution_of(&left), distribution_of(&right))
}

fn mixture(parts: &[(u32, Distribution)]) -> Result<Mixture, String> {
    Mixture::new(weighted(parts)).map_err(|e| e.to_string())
}

fn accepted(u: &Universe, c: &Certificate) -> Result<(), String> {
    match check_certificate(u, c).map_err(|e| e.to_string())? {
        Verdict::Accepted(_) => Ok(()),
        Verdict::Rejected(cx) => Err(format!("certificate rejected: {}", cx)),
    }
}

fn certified(s: &BranchingSearch<'_>, a: &Distribution, b: &Distribution) -> Result<Certificate, String> {
    match s.search(a, b).map_err(|e| e.to_string())? {
        SearchOutcome::Found(c) => {
            accepted(s.universe(), &c)?;
            if !c.relates(a, b) && a != b {
                return Err(format!("certificate does not relate {} and {}", a, b));
            }
            Ok(c)
        }
        SearchOutcome::Refuted(r) => Err(format!("{} and {} refuted: {}", a, b, r)),
        SearchOutcome::NotFound => Err(format!("no certificate for {} and {}", a, b)),
    }
}

fn gen_prob(g: &mut Gen) -> Rational {
    g.prob().unwrap_or_else(|| frac(1, 2))
}

fn ids(n: usize, g: &mut Gen) -> Vec<u32> {
    (0..n).map(|_| g.below(1 << 16) as u32).collect()
}

/// Partial tau steps chosen by `picks` among the vertex steps.
fn partial_chain(u: &Universe, mu: &Distribution, picks: &[u32]) -> Result<WeakChain, String> {
    let mut chain = WeakChain::empty(mu);
    for k in picks {
        let vs = partial_successors(u, chain.target()).map_err(|e| e.to_string())?.vertices(64);
        chain.steps.push(vs[*k as usize % vs.len()].clone());
    }
    Ok(chain)
}

/// Complexity recomputed locally.
fn complexity(e: &NTerm) -> u64 {
    fn p(t: &PTerm) -> u64 {
        match t {
            PTerm::Dirac(e) => complexity(e) + 1,
            PTerm::Choice(l, _, r) => p(l) + p(r),
        }
    }
    match e {
        NTerm::Nil => 0,
        NTerm::Prefix(_, t) => p(t) + 1,
        NTerm::Choice(l, r) => complexity(l) + complexity(r),
    }
}

fn weight(mu: &Distribution) -> Rational {
    mu.iter().map(|(e, w)| w * Rational::from_integer(complexity(e).into())).sum()
}

// ---- suites ----

struct FlexibelDelen;

impl Suite for FlexibelDelen {
    /// Rows of weighted cells; the coupling is `ξ_ij ∝ w_ij` with cell distribution `ρ_ij`.
    type Input = Vec<Vec<(u32, Distribution)>>;

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let depth = g.config().max_depth;
        let rows = 1 + g.below(3);
        let cols = 1 + g.below(3);
        (0..rows).map(|_| (0..cols).map(|_| (1 + g.below(4) as u32, g.distribution(depth))).collect()).collect()
    }

    fn check(&self, input: &Self::Input) -> Result<(), String> {
        let cols = input.iter().map(Vec::len).min().unwrap_or(0);
        if cols == 0 {
            return Ok(());
        }
        let cells: Vec<&[(u32, Distribution)]> = input.iter().map(|r| &r[..cols]).collect();
        let total: u32 = cells.iter().flat_map(|r| r.iter()).map(|(w, _)| *w).sum();
        let xi = |i: usize, j: usize| frac(cells[i][j].0, total);
        let side = |idx: &mut dyn Iterator<Item = (usize, usize)>| {
            let mut p = Rational::zero();
            let mut w = Weights::new();
            for (i, j) in idx {
                p += xi(i, j);
                add_scaled(&mut w, &cells[i][j].1, &xi(i, j));
            }
            (p.clone(), Distribution::normalize(&w).unwrap())
        };
        let left: Vec<_> = (0..cells.len()).map(|i| side(&mut (0..cols).map(move |j| (i, j)))).collect();
        let right: Vec<_> = (0..cols).map(|j| side(&mut (0..cells.len()).map(move |i| (i, j)))).collect();
        let lm = Mixture::new(left.clone()).map_err(|e| e.to_string())?;
        let rm = Mixture::new(right.clone()).map_err(|e| e.to_string())?;
        let jd = joint_decompose(&lm, &rm).map_err(|e| e.to_string())?;
        let scaled = |d: &Distribution, p: &Rational| {
            let mut w = Weights::new();
            add_scaled(&mut w, d, p);
            w.retain(|_, v| !v.is_zero());
            w
        };
        for (i, (p, mu)) in left.iter().enumerate() {
            let row: Rational = jd.r[i].iter().sum();
            if row != *p {
                return Err(format!("row {} sums to {}, expected {}", i, row, p));
            }
            let mut w = Weights::new();
            for j in 0..cols {
                if jd.r[i][j].is_negative() {
                    return Err(format!("r[{}][{}] is negative", i, j));
                }
                add_scaled(&mut w, &jd.rho[i][j], &jd.r[i][j]);
            }
            w.retain(|_, v| !v.is_zero());
            if w != scaled(mu, p) {
                return Err(format!("row {} does not recompose p_i·μ_i", i));
            }
        }
        for (j, (q, nu)) in right.iter().enumerate() {
            let col: Rational = jd.r.iter().map(|r| &r[j]).sum();
            if col != *q {
                return Err(format!("column {} sums to {}, expected {}", j, col, q));
            }
            let mut w = Weights::new();
            for i in 0..cells.len() {
                add_scaled(&mut w, &jd.rho[i][j], &jd.r[i][j]);
            }
            w.retain(|_, v| !v.is_zero());
            if w != scaled(nu, q) {
                return Err(format!("column {} does not recompose q_j·ν_j", j));
            }
        }
        Ok(())
    }
}

struct LimitResidual;

impl Suite for LimitResidual {
    type Input = (Distribution, Distribution);

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let depth = g.config().max_depth;
        let mu = g.distribution(depth);
        // Often a mixture containing mu, so the limit share is non-trivial.
        let mu_i = if g.below(3) > 0 {
            let r = gen_prob(g);
            mu.mix_with(&r, &g.distribution(depth))
        } else {
            g.distribution(depth)
        };
        (mu_i, mu)
    }

    fn check(&self, (mu_i, mu): &Self::Input) -> Result<(), String> {
        let (r, rest) = limit_residual(mu_i, mu);
        if r.is_negative() || r > Rational::one() {
            return Err(format!("r = {} outside [0, 1]", r));
        }
        let total: Rational = rest.iter().map(|(_, w)| w).sum();
        if !total.is_one() {
            return Err(format!("residual has mass {}", total));
        }
        let keys: BTreeSet<&NTerm> = mu_i.support().chain(mu.support()).chain(rest.support()).collect();
        for x in keys {
            let back = (Rational::one() - &r) * mu.get(x) + &r * rest.get(x);
            if back != mu_i.get(x) {
                return Err(format!("reconstruction differs at {}: {} vs {}", x, back, mu_i.get(x)));
            }
        }
        if !r.is_zero() && !mu.support().any(|x| rest.get(x).is_zero()) {
            return Err("the share of μ could be larger".into());
        }
        Ok(())
    }
}

struct Composition;

impl Suite for Composition {
    /// Presentation parts, an action, and vertex picks.
    type Input = (Vec<(u32, Distribution)>, Action, Vec<u32>);

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let depth = g.config().max_depth;
        let k = 1 + g.below(3);
        let parts = (0..k).map(|_| (1 + g.below(3) as u32, g.distribution(depth))).collect();
        let n = 1 + g.below(3);
        (parts, g.action(), ids(n, g))
    }

    fn check(&self, (parts, a, picks): &Self::Input) -> Result<(), String> {
        let m = mixture(parts)?;
        let mu = mix(&m);
        let u = build_universe(parts.iter().map(|(_, d)| d));
        let witness = match distribution_step(&u, &mu, a) {
            Ok(set) => {
                let vs = set.vertices(64);
                Witness::Step(vs[picks.first().copied().unwrap_or(0) as usize % vs.len()].clone())
            }
            Err(_) if picks.len() == 1 => Witness::Partial(partial_chain(&u, &mu, picks)?.steps.remove(0)),
            Err(_) => Witness::Weak(partial_chain(&u, &mu, picks)?),
        };
        witness.verify(&u).map_err(|e| format!("generated witness invalid: {}", e))?;
        let pieces = decompose_transition(&m, &witness).map_err(|e| e.to_string())?;
        if pieces.len() != m.len() {
            return Err(format!("{} pieces for {} parts", pieces.len(), m.len()));
        }
        for ((_, d), w) in m.parts().iter().zip(&pieces) {
            if w.source() != d {
                return Err(format!("piece starts at {}, part is {}", w.source(), d));
            }
            w.verify(&u).map_err(|e| format!("piece invalid: {}", e))?;
        }
        let targets: Vec<_> = m.parts().iter().zip(&pieces).map(|((p, _), w)| (p.clone(), w.target().clone())).collect();
        let target = mix(&Mixture::new(targets).map_err(|e| e.to_string())?);
        if target != *witness.target() {
            return Err(format!("pieces mix to {}, expected {}", target, witness.target()));
        }
        let back = compose_transitions(&m.parts().iter().map(|(p, _)| p.clone()).zip(pieces).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        back.verify(&u).map_err(|e| format!("composed witness invalid: {}", e))?;
        if back.source() != &mu || back.target() != witness.target() {
            return Err("composition does not reproduce the transition".into());
        }
        Ok(())
    }
}

struct Congruence;

impl Suite for Congruence {
    type Input = (Grafted, Grafted, Rational);

    fn generate(&self, g: &mut Gen) -> Self::Input {
        (gen_grafted(g), gen_grafted(g), gen_prob(g))
    }

    fn check(&self, (first, second, r): &Self::Input) -> Result<(), String> {
        let (m1, m1p) = grafted_pair(first);
        let (m2, m2p) = grafted_pair(second);
        let u = build_universe([&m1, &m1p, &m2, &m2p]);
        let s = BranchingSearch::new(&u, Budget::default());
        let c1 = certified(&s, &m1, &m1p)?;
        let c2 = certified(&s, &m2, &m2p)?;
        let p1 = Premise { left: &m1, right: &m1p, certificate: &c1 };
        let p2 = Premise { left: &m2, right: &m2p, certificate: &c2 };
        let (cert, verdict) = check_congruence(&u, p1, p2, r).map_err(|e| e.to_string())?;
        if !verdict.is_accepted() {
            return Err("combined certificate rejected".into());
        }
        accepted(&u, &cert)?;
        let (l, rr) = (m1.mix_with(r, &m2), m1p.mix_with(r, &m2p));
        if l != rr && !cert.relates(&l, &rr) {
            return Err(format!("combined certificate does not relate {} and {}", l, rr));
        }
        Ok(())
    }
}

struct WeakTransfer;

impl Suite for WeakTransfer {
    type Input = (Grafted, Vec<u32>);

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let n = 1 + g.below(3);
        (gen_grafted(g), ids(n, g))
    }

    fn check(&self, (parts, picks): &Self::Input) -> Result<(), String> {
        let (mu, nu) = grafted_pair(parts);
        let u = build_universe([&mu, &nu]);
        let s = BranchingSearch::new(&u, Budget::default());
        certified(&s, &mu, &nu)?;
        for (from, to) in [(&mu, &nu), (&nu, &mu)] {
            let moved = partial_chain(&u, from, picks)?;
            let target = moved.target();
            let answer = s.weak_match(target, to).map_err(|e| e.to_string())?.ok_or_else(|| format!("no weak answer from {} to {}", to, target))?;
            answer.verify(&u).map_err(|e| e.to_string())?;
            if answer.source != *to {
                return Err("answer starts elsewhere".into());
            }
            certified(&s, target, answer.target())?;
        }
        Ok(())
    }
}

struct Decomp;

impl Suite for Decomp {
    type Input = Grafted;

    fn generate(&self, g: &mut Gen) -> Self::Input {
        gen_grafted(g)
    }

    fn check(&self, parts: &Self::Input) -> Result<(), String> {
        let (mu, mu_p) = grafted_pair(parts);
        let u = build_universe([&mu, &mu_p]);
        let s = BranchingSearch::new(&u, Budget::default());
        let a = stabilize(&s, &mu).map_err(|e| e.to_string())?;
        let b = stabilize(&s, &mu_p).map_err(|e| e.to_string())?;
        for st in [&a, &b] {
            if let Stability::Unstable { target, .. } = is_stable(&s, &st.sigma).map_err(|e| e.to_string())? {
                return Err(format!("stabilized {} still unfolds to {}", st.sigma, target));
            }
        }
        certified(&s, &a.sigma, &b.sigma)?;
        let pi = s.classes();
        for block in pi.blocks() {
            let x: Rational = block.iter().map(|e| a.sigma.get(e)).sum();
            let y: Rational = block.iter().map(|e| b.sigma.get(e)).sum();
            if x != y {
                return Err(format!("class of {} has mass {} vs {}", block[0], x, y));
            }
        }
        Ok(())
    }
}

struct Cancellation;

impl Suite for Cancellation {
    type Input = (Grafted, Distribution, Rational);

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let depth = g.config().max_depth;
        (gen_grafted(g), g.distribution(depth), gen_prob(g))
    }

    fn check(&self, (parts, nu, r): &Self::Input) -> Result<(), String> {
        let (mu, mu_p) = grafted_pair(parts);
        let u = build_universe([&mu.mix_with(r, nu), &mu_p.mix_with(r, nu)]);
        let s = BranchingSearch::new(&u, Budget::default());
        match cancel_check(&s, &mu, &mu_p, nu, nu, r).map_err(|e| e.to_string())? {
            CancelVerdict::Accepted { certificate, .. } => {
                accepted(&u, &certificate)?;
                if mu != mu_p && !certificate.relates(&mu, &mu_p) {
                    return Err("output certificate does not relate μ and μ'".into());
                }
                Ok(())
            }
            CancelVerdict::Inconclusive(why) => Err(format!("inconclusive: {}", why)),
        }
    }
}

struct Wgt;

impl Suite for Wgt {
    type Input = (Distribution, Action, Vec<u32>);

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let depth = g.config().max_depth + 1;
        let n = 1 + g.below(4);
        (g.distribution(depth), g.action(), ids(n, g))
    }

    fn check(&self, (mu, a, picks): &Self::Input) -> Result<(), String> {
        let u = build_universe([mu]);
        let w0 = weight(mu);
        if pbb_core::stability::wgt(mu) != w0 {
            return Err("library weight differs from the local one".into());
        }
        if let Ok(set) = distribution_step(&u, mu, a) {
            for s in set.vertices(64) {
                if weight(&s.target) >= w0 {
                    return Err(format!("{} --{}--> {} does not lower the weight", mu, a, s.target));
                }
            }
        }
        let chain = partial_chain(&u, mu, picks)?;
        let mut cur = w0;
        for s in &chain.steps {
            let next = weight(&s.target);
            let fired = !s.fired_mass().is_zero();
            if next > cur || (fired && next == cur) {
                return Err(format!("weight {} -> {} along {}", cur, next, s.target));
            }
            cur = next;
        }
        Ok(())
    }
}

struct StrongOracle {
    max_states: usize,
}

impl Suite for StrongOracle {
    type Input = Vec<Distribution>;

    fn generate(&self, g: &mut Gen) -> Self::Input {
        let k = 1 + g.below(2);
        (0..k)
            .map(|_| {
                let d = 1 + g.below(2) as u32;
                g.distribution(d)
            })
            .collect()
    }

    fn applicable(&self, seeds: &Self::Input) -> bool {
        build_universe(seeds.iter()).len() <= self.max_states
    }

    fn check(&self, seeds: &Self::Input) -> Result<(), String> {
        let u = build_universe(seeds.iter());
        let brute = brute_strong_partition(&u, self.max_states).ok_or("no unique coarsest strong bisimulation")?;
        let pi = strong_partition(&u);
        if brute != pi {
            return Err(format!("partition {:?} differs from enumeration {:?}", pi.blocks(), brute.blocks()));
        }
        let s = BranchingSearch::new(&u, Budget::default());
        for block in pi.blocks() {
            for e in &block[1..] {
                certified(&s, &Distribution::dirac(block[0].clone()), &Distribution::dirac(e.clone()))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GenConfig {
        GenConfig { seed: 11, ..GenConfig::default() }
    }

    #[test]
    fn zero_count() {
        let r = run_suite("wgt", &cfg(), 0).unwrap();
        assert!(r.success());
        assert_eq!((r.count, r.passed, r.failed), (0, 0, 0));
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(run_suite("nope", &cfg(), 1), Err(HarnessError::UnknownSuite(_))));
    }

    #[test]
    fn every_suite_runs() {
        for name in SUITES {
            let r = run_suite(name, &cfg(), 5).unwrap();
            assert!(r.success(), "{}", r.table());
        }
    }

    // A deliberately wrong predicate shows the shrinker at work.
    #[test]
    fn failures_are_minimized() {
        struct Broken;
        impl Suite for Broken {
            type Input = Distribution;
            fn generate(&self, g: &mut Gen) -> Distribution {
                g.distribution(3)
            }
            fn check(&self, d: &Distribution) -> Result<(), String> {
                if d.support().any(|e| e.depth() >= 1) {
                    Err("has a prefix".into())
                } else {
                    Ok(())
                }
            }
        }
        let r = run("broken", &Broken, &GenConfig { max_depth: 3, ..cfg() }, 50);
        let f = r.first_failure.expect("some case fails");
        assert!(f.minimized.len() <= f.input.len());
        assert_eq!(f.minimized_reason, "has a prefix");
    }
}
