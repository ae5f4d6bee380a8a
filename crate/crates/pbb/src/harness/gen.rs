use pbb_core::distr::Distribution;
use pbb_core::rational::Rational;
use pbb_core::semantics::den;
use pbb_core::terms::{Action, NTerm, PTerm, Parsed, Sort};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub max_depth: u32,
    pub max_branch: u32,
    pub action_alphabet: Vec<Action>,
    pub rational_denominator_bound: u32,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 2,
            max_branch: 2,
            action_alphabet: vec![Action::tau(), Action::new("a").unwrap(), Action::new("b").unwrap()],
            rational_denominator_bound: 4,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.max_depth == 0 || self.max_branch == 0 || self.rational_denominator_bound == 0 {
            return Err(HarnessError::Config("bounds must be at least 1".into()));
        }
        if !self.action_alphabet.iter().any(Action::is_tau) {
            return Err(HarnessError::Config("the alphabet must include tau".into()));
        }
        Ok(())
    }
}

/// Seeded source of random terms.
pub struct Gen {
    cfg: GenConfig,
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(cfg: &GenConfig) -> Self {
        Gen { cfg: cfg.clone(), rng: ChaCha8Rng::seed_from_u64(cfg.seed) }
    }

    /// Independent stream for case `index`.
    pub fn for_case(cfg: &GenConfig, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        Gen { cfg: cfg.clone(), rng }
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n.max(1))
    }

    pub fn action(&mut self) -> Action {
        let i = self.below(self.cfg.action_alphabet.len());
        self.cfg.action_alphabet[i].clone()
    }

    /// A probability strictly between 0 and 1, or `None` when the bound forbids one.
    pub fn prob(&mut self) -> Option<Rational> {
        let bound = self.cfg.rational_denominator_bound as i64;
        if bound < 2 {
            return None;
        }
        let d = self.rng.gen_range(2..=bound);
        let n = self.rng.gen_range(1..d);
        Some(Rational::new(n.into(), d.into()))
    }

    pub fn nterm(&mut self, depth: u32) -> NTerm {
        if depth == 0 {
            return NTerm::nil();
        }
        let k = self.rng.gen_range(0..=self.cfg.max_branch);
        let mut out: Option<NTerm> = None;
        for _ in 0..k {
            let a = self.action();
            let d = self.rng.gen_range(0..depth);
            let body = self.pterm(d);
            let s = NTerm::prefix(a, body);
            out = Some(match out {
                None => s,
                Some(acc) => NTerm::choice(acc, s),
            });
        }
        out.unwrap_or(NTerm::Nil)
    }

    pub fn pterm(&mut self, depth: u32) -> PTerm {
        let k = self.rng.gen_range(1..=self.cfg.max_branch);
        let mut out = PTerm::dirac(self.nterm(depth));
        for _ in 1..k {
            let Some(r) = self.prob() else { break };
            let leaf = PTerm::dirac(self.nterm(depth));
            out = PTerm::choice(out, r, leaf).expect("probability in (0, 1)");
        }
        out
    }

    pub fn distribution(&mut self, depth: u32) -> Distribution {
        den(&self.pterm(depth))
    }

    /// A term and a copy with one inert tau inserted.
    pub fn grafted(&mut self, depth: u32) -> (NTerm, NTerm) {
        let e = self.nterm(depth);
        let site = self.rng.gen::<u32>();
        let g = graft(&e, site);
        (e, g)
    }
}

/// Deterministic per `(cfg, sort)`; depth 0 yields `0`.
pub fn gen_term(cfg: &GenConfig, sort: Sort) -> Parsed {
    let mut g = Gen::new(cfg);
    match sort {
        Sort::Nondet => Parsed::Nondet(g.nterm(cfg.max_depth)),
        Sort::Prob => Parsed::Prob(g.pterm(cfg.max_depth)),
        Sort::Distribution => Parsed::Distribution(g.distribution(cfg.max_depth)),
    }
}

// Sites: the root state, states directly under `D`, and prefix bodies.
// A summand of `+` is never grafted on its own, since `+` does not
// preserve branching bisimilarity.
fn nsites(e: &NTerm, root: bool) -> u32 {
    let own = u32::from(root);
    match e {
        NTerm::Nil => own,
        NTerm::Prefix(_, p) => own + psites(p),
        NTerm::Choice(l, r) => own + nsites(l, false) + nsites(r, false),
    }
}

fn psites(p: &PTerm) -> u32 {
    match p {
        PTerm::Dirac(e) => 1 + nsites(e, true),
        PTerm::Choice(l, _, r) => psites(l) + psites(r),
    }
}

/// Inserts an inert tau at site `k mod sites`: a state `E` becomes
/// `tau.D(E) + E`, a prefix body `P` becomes `D(tau.P)`.
pub fn graft(e: &NTerm, k: u32) -> NTerm {
    graft_n(e, k % nsites(e, true), true)
}

fn graft_n(e: &NTerm, k: u32, root: bool) -> NTerm {
    if root && k == 0 {
        return NTerm::choice(NTerm::prefix(Action::tau(), PTerm::dirac(e.clone())), e.clone());
    }
    let k = k - u32::from(root);
    match e {
        NTerm::Nil => unreachable!("no site left in nil"),
        NTerm::Prefix(a, p) => NTerm::prefix(a.clone(), graft_p(p, k)),
        NTerm::Choice(l, r) => {
            let n = nsites(l, false);
            if k < n {
                NTerm::choice(graft_n(l, k, false), (**r).clone())
            } else {
                NTerm::choice((**l).clone(), graft_n(r, k - n, false))
            }
        }
    }
}

fn graft_p(p: &PTerm, k: u32) -> PTerm {
    match p {
        PTerm::Dirac(e) => {
            if k == 0 {
                PTerm::dirac(NTerm::prefix(Action::tau(), p.clone()))
            } else {
                PTerm::dirac(graft_n(e, k - 1, true))
            }
        }
        PTerm::Choice(l, r, q) => {
            let n = psites(l);
            if k < n {
                PTerm::choice(graft_p(l, k), r.clone(), (**q).clone()).expect("unchanged weight")
            } else {
                PTerm::choice((**l).clone(), r.clone(), graft_p(q, k - n)).expect("unchanged weight")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pbb_core::terms::parse_nterm;

    fn cfg(seed: u64) -> GenConfig {
        GenConfig { seed, ..GenConfig::default() }
    }

    #[test]
    fn depth_zero_is_nil() {
        let c = GenConfig { max_depth: 0, ..cfg(1) };
        assert_eq!(Gen::new(&c).nterm(0), NTerm::nil());
        assert_eq!(gen_term(&c, Sort::Nondet), Parsed::Nondet(NTerm::nil()));
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic() {
        for s in 0..20 {
            assert_eq!(gen_term(&cfg(s), Sort::Prob), gen_term(&cfg(s), Sort::Prob));
        }
        let a: Vec<_> = (0..5).map(|i| Gen::for_case(&cfg(3), i).nterm(3)).collect();
        let b: Vec<_> = (0..5).map(|i| Gen::for_case(&cfg(3), i).nterm(3)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn within_bounds() {
        let c = GenConfig { max_depth: 3, max_branch: 3, rational_denominator_bound: 3, ..cfg(9) };
        let mut g = Gen::new(&c);
        for _ in 0..200 {
            let p = g.pterm(3);
            assert!(p.depth() <= 3);
            for (_, w) in den(&p).iter() {
                assert!(*w.denom() <= 27u32.into());
            }
        }
    }

    #[test]
    fn graft_sites() {
        let body = "b.D(p.D(0)) + tau.D(q.D(0))";
        let e = parse_nterm(&format!("a.D({body})")).unwrap();
        // Site 2 is the inner state, as in the I-pair.
        let want = parse_nterm(&format!("a.D(tau.D({body}) + ({body}))")).unwrap();
        assert_eq!(graft(&e, 2), want);
        assert_eq!(graft(&e, 0), parse_nterm(&format!("tau.D(a.D({body})) + a.D({body})")).unwrap());
        assert_eq!(graft(&e, 1), parse_nterm(&format!("a.D(tau.D({body}))")).unwrap());
        assert_eq!(graft(&NTerm::Nil, 5), parse_nterm("tau.D(0) + 0").unwrap());
        // Summands of a choice are not sites of their own.
        let c = parse_nterm("a.D(0) + b.D(0)").unwrap();
        let all: Vec<NTerm> = (0..5).map(|k| graft(&c, k)).collect();
        assert_eq!(all[0], parse_nterm("tau.D(a.D(0) + b.D(0)) + (a.D(0) + b.D(0))").unwrap());
        assert_eq!(all[1], parse_nterm("a.D(tau.D(0)) + b.D(0)").unwrap());
        assert_eq!(all[3], parse_nterm("a.D(0) + b.D(tau.D(0))").unwrap());
    }
}
