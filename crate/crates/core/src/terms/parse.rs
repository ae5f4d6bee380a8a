use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::{valid_action_name, Action, NTerm, PTerm};
use crate::distr::Distribution;
use crate::rational::{is_unit, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sort {
    Nondet,
    Prob,
    Distribution,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    Nondet(NTerm),
    Prob(PTerm),
    Distribution(Distribution),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl core::error::Error for ParseError {}

pub fn parse(text: &str, sort: Sort) -> Result<Parsed, ParseError> {
    match sort {
        Sort::Nondet => parse_nterm(text).map(Parsed::Nondet),
        Sort::Prob => parse_pterm(text).map(Parsed::Prob),
        Sort::Distribution => parse_distribution(text).map(Parsed::Distribution),
    }
}

pub fn parse_nterm(text: &str) -> Result<NTerm, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.nterm()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_pterm(text: &str) -> Result<PTerm, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.pterm()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_distribution(text: &str) -> Result<Distribution, ParseError> {
    let mut p = Parser::new(text)?;
    let d = p.distribution()?;
    p.finish()?;
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Dirac,
    Dot,
    Plus,
    PlusBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Slash,
    Minus,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "`{}`", n),
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::Dirac => f.write_str("`D`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::PlusBracket => f.write_str("`+[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let err = |msg: String| ParseError { line: l0, column: c0, message: msg };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let single = match c {
            '.' => Some(Tok::Dot),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '/' => Some(Tok::Slash),
            '-' => Some(Tok::Minus),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, l0, c0));
            i += 1;
            col += 1;
            continue;
        }
        if c == '+' {
            if chars.get(i + 1) == Some(&'[') {
                out.push((Tok::PlusBracket, l0, c0));
                i += 2;
                col += 2;
            } else {
                out.push((Tok::Plus, l0, c0));
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let n: BigInt = s.parse().map_err(|_| err("malformed integer".to_string()))?;
            out.push((Tok::Int(n), l0, c0));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            if s == "D" {
                out.push((Tok::Dirac, l0, c0));
            } else if valid_action_name(&s) {
                out.push((Tok::Ident(s), l0, c0));
            } else {
                return Err(err(alloc::format!("invalid identifier `{}`", s)));
            }
            continue;
        }
        return Err(err(alloc::format!("unexpected character `{}`", c)));
    }
    out.push((Tok::End, line, col));
    Ok(out)
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn error_here(&self, message: String) -> ParseError {
        let (_, line, column) = &self.toks[self.pos];
        ParseError { line: *line, column: *column, message }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(alloc::format!("expected {}, found {}", t, self.peek())))
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.error_here(alloc::format!("unexpected {} after end of term", self.peek())))
        }
    }

    fn nterm(&mut self) -> Result<NTerm, ParseError> {
        let mut e = self.natom()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let r = self.natom()?;
                    e = NTerm::choice(e, r);
                }
                Tok::PlusBracket => {
                    return Err(self.error_here(
                        "probabilistic choice where a non-deterministic process is expected".to_string(),
                    ))
                }
                _ => return Ok(e),
            }
        }
    }

    fn natom(&mut self) -> Result<NTerm, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) if n.is_zero() => {
                self.bump();
                Ok(NTerm::Nil)
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::Dot)?;
                let body = self.patom()?;
                let a = Action::new(&name).map_err(|e| self.error_here(e.to_string()))?;
                Ok(NTerm::prefix(a, body))
            }
            Tok::LParen => {
                self.bump();
                let e = self.nterm()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Dirac => Err(self.error_here(
                "`D(...)` is a probabilistic process; a non-deterministic process is expected".to_string(),
            )),
            t => Err(self.error_here(alloc::format!("expected a non-deterministic process, found {}", t))),
        }
    }

    fn pterm(&mut self) -> Result<PTerm, ParseError> {
        let mut p = self.patom()?;
        while *self.peek() == Tok::PlusBracket {
            self.bump();
            let r = self.probability()?;
            self.expect(Tok::RBracket)?;
            let q = self.patom()?;
            p = PTerm::Choice(alloc::sync::Arc::new(p), r, alloc::sync::Arc::new(q));
        }
        if *self.peek() == Tok::Plus {
            return Err(self.error_here(
                "`+` joins non-deterministic processes; use `+[r]` between probabilistic ones".to_string(),
            ));
        }
        Ok(p)
    }

    fn patom(&mut self) -> Result<PTerm, ParseError> {
        match self.peek() {
            Tok::Dirac => {
                self.bump();
                self.expect(Tok::LParen)?;
                let e = self.nterm()?;
                self.expect(Tok::RParen)?;
                Ok(PTerm::dirac(e))
            }
            Tok::LParen => {
                self.bump();
                let p = self.pterm()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            t => Err(self.error_here(alloc::format!("expected a probabilistic process, found {}", t))),
        }
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let n = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                n
            }
            t => return Err(self.error_here(alloc::format!("expected a rational, found {}", t))),
        };
        let d = if *self.peek() == Tok::Slash {
            self.bump();
            match self.peek().clone() {
                Tok::Int(d) if !d.is_zero() => {
                    self.bump();
                    d
                }
                Tok::Int(_) => return Err(self.error_here("zero denominator".to_string())),
                t => return Err(self.error_here(alloc::format!("expected a denominator, found {}", t))),
            }
        } else {
            BigInt::from(1)
        };
        let r = Rational::new(n, d);
        Ok(if neg { -r } else { r })
    }

    fn probability(&mut self) -> Result<Rational, ParseError> {
        let save = self.pos;
        let r = self.rational()?;
        if !is_unit(&r) {
            self.pos = save;
            return Err(self.error_here(alloc::format!("probability {} is outside [0,1]", r)));
        }
        Ok(r)
    }

    fn distribution(&mut self) -> Result<Distribution, ParseError> {
        let start = self.pos;
        self.expect(Tok::LBrace)?;
        let mut entries = Vec::new();
        loop {
            let save = self.pos;
            let w = self.probability()?;
            if !w.is_positive() {
                self.pos = save;
                return Err(self.error_here("distribution weights must be positive".to_string()));
            }
            self.expect(Tok::Colon)?;
            let e = self.nterm()?;
            entries.push((e, w));
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                t => return Err(self.error_here(alloc::format!("expected `,` or `}}`, found {}", t))),
            }
        }
        Distribution::from_weights(entries).map_err(|e| {
            let (_, line, column) = &self.toks[start];
            ParseError { line: *line, column: *column, message: e.to_string() }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn basic_shapes() {
        assert_eq!(parse_nterm("0").unwrap(), NTerm::Nil);
        let e = parse_nterm("a.D(0)").unwrap();
        assert_eq!(e, NTerm::prefix(Action::new("a").unwrap(), PTerm::dirac(NTerm::Nil)));
        let p = parse_pterm("D(a.D(0)) +[1/3] D(b.D(0))").unwrap();
        match p {
            PTerm::Choice(l, r, q) => {
                assert_eq!(r, rat(1, 3));
                assert_eq!(l.to_string(), "D(a.D(0))");
                assert_eq!(q.to_string(), "D(b.D(0))");
            }
            _ => panic!("expected choice"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_nterm("a.D(0) + b.D(0) + c.D(0)").unwrap();
        match &e {
            NTerm::Choice(l, _) => assert!(matches!(**l, NTerm::Choice(_, _))),
            _ => panic!(),
        }
        let p = parse_pterm("D(0) +[1/2] D(0) +[1/3] D(a.D(0))").unwrap();
        match &p {
            PTerm::Choice(l, r, _) => {
                assert_eq!(*r, rat(1, 3));
                assert!(matches!(**l, PTerm::Choice(_, _, _)));
            }
            _ => panic!(),
        }
        let right = parse_nterm("a.D(0) + (b.D(0) + c.D(0))").unwrap();
        assert_ne!(e, right);
    }

    #[test]
    fn normalizes_rationals() {
        let p = parse_pterm("D(0) +[2/4] D(a.D(0))").unwrap();
        assert_eq!(p.to_string(), "D(0) +[1/2] D(a.D(0))");
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_pterm("D(0) +[3/2] D(0)").unwrap_err();
        assert_eq!((e.line, e.column), (1, 8));
        let e = parse_nterm("a.D(0) +\n  B").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(parse_nterm("a.0").is_err());
        assert!(parse_nterm("1").is_err());
        assert!(parse_distribution("{1/2: 0}").is_err());
        assert!(parse_distribution("{0: 0, 1: 0}").is_err());
    }

    #[test]
    fn distribution_literals() {
        let d = parse_distribution("{1/2: a.D(0), 1/2: b.D(0)}").unwrap();
        assert_eq!(d.len(), 2);
        let merged = parse_distribution("{1/2: 0, 1/2: 0}").unwrap();
        assert_eq!(merged, Distribution::dirac(NTerm::Nil));
    }
}
