//! Syntax of non-deterministic and probabilistic processes.

mod parse;
mod print;

use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use crate::rational::{is_unit, Rational};

pub use parse::{parse, parse_distribution, parse_nterm, parse_pterm, ParseError, Parsed, Sort};

/// An action label. `tau` is the silent action.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(Arc<str>);

impl Action {
    pub const TAU: &'static str = "tau";

    pub fn tau() -> Self {
        Action(Arc::from(Self::TAU))
    }

    /// Visible action names match `[a-z][a-zA-Z0-9_]*`.
    pub fn new(name: &str) -> Result<Self, TermError> {
        if valid_action_name(name) {
            Ok(Action(Arc::from(name)))
        } else {
            Err(TermError::BadAction(String::from(name)))
        }
    }

    pub fn is_tau(&self) -> bool {
        &*self.0 == Self::TAU
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

pub(crate) fn valid_action_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("invalid action name `{0}`")]
    BadAction(String),
    #[error("probability {0} is outside [0,1]")]
    BadProbability(Rational),
}

/// Non-deterministic process: `0`, `a.P` or `E + F`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NTerm {
    Nil,
    Prefix(Action, Arc<PTerm>),
    Choice(Arc<NTerm>, Arc<NTerm>),
}

/// Probabilistic process: `D(E)` or `P +[r] Q`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PTerm {
    Dirac(Arc<NTerm>),
    Choice(Arc<PTerm>, Rational, Arc<PTerm>),
}

impl NTerm {
    pub fn nil() -> Self {
        NTerm::Nil
    }

    pub fn prefix(a: Action, body: PTerm) -> Self {
        NTerm::Prefix(a, Arc::new(body))
    }

    pub fn choice(l: NTerm, r: NTerm) -> Self {
        NTerm::Choice(Arc::new(l), Arc::new(r))
    }

    pub fn complexity(&self) -> u64 {
        match self {
            NTerm::Nil => 0,
            NTerm::Prefix(_, p) => p.complexity() + 1,
            NTerm::Choice(l, r) => l.complexity() + r.complexity(),
        }
    }

    /// Length of the longest chain of nested prefixes.
    pub fn depth(&self) -> usize {
        match self {
            NTerm::Nil => 0,
            NTerm::Prefix(_, p) => p.depth() + 1,
            NTerm::Choice(l, r) => l.depth().max(r.depth()),
        }
    }
}

impl PTerm {
    pub fn dirac(e: NTerm) -> Self {
        PTerm::Dirac(Arc::new(e))
    }

    pub fn choice(l: PTerm, r: Rational, q: PTerm) -> Result<Self, TermError> {
        if !is_unit(&r) {
            return Err(TermError::BadProbability(r));
        }
        Ok(PTerm::Choice(Arc::new(l), r, Arc::new(q)))
    }

    pub fn complexity(&self) -> u64 {
        match self {
            PTerm::Dirac(e) => e.complexity() + 1,
            PTerm::Choice(l, _, r) => l.complexity() + r.complexity(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PTerm::Dirac(e) => e.depth(),
            PTerm::Choice(l, _, r) => l.depth().max(r.depth()),
        }
    }
}

impl fmt::Display for NTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_nterm(f, self)
    }
}

impl fmt::Display for PTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_pterm(f, self)
    }
}

impl fmt::Debug for NTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Debug for PTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complexity_counts() {
        let e = parse_nterm("a.D(0) + b.D(0)").unwrap();
        assert_eq!(e.complexity(), 4);
        assert_eq!(NTerm::nil().complexity(), 0);
        let p = parse_pterm("D(0) +[1/2] D(a.D(0))").unwrap();
        assert_eq!(p.complexity(), 1 + 3);
    }

    #[test]
    fn action_names() {
        assert!(Action::new("a").is_ok());
        assert!(Action::new("send_1").is_ok());
        assert!(Action::new("A").is_err());
        assert!(Action::new("1a").is_err());
        assert!(Action::tau().is_tau());
    }

    #[test]
    fn choice_validates_probability() {
        let d = PTerm::dirac(NTerm::nil());
        assert!(PTerm::choice(d.clone(), crate::rational::rat(3, 2), d).is_err());
    }
}
