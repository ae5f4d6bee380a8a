//! File formats, the property harness and the command-line front end.

pub mod cli;
pub mod formats;
pub mod harness;

use pbb_core::distr::Distribution;
use pbb_core::semantics::den;
use pbb_core::terms::{parse_distribution, parse_nterm, parse_pterm, ParseError};

/// A distribution literal, a probabilistic term, or a state (as its Dirac).
pub fn parse_any_distribution(text: &str) -> Result<Distribution, ParseError> {
    let text = text.trim();
    if text.starts_with('{') {
        return parse_distribution(text);
    }
    match parse_pterm(text) {
        Ok(p) => Ok(den(&p)),
        Err(pe) => parse_nterm(text).map(Distribution::dirac).map_err(|ne| furthest(pe, ne)),
    }
}

/// Of two failed parses, the one that got further into the input.
pub fn furthest(a: ParseError, b: ParseError) -> ParseError {
    if (b.line, b.column) > (a.line, a.column) {
        b
    } else {
        a
    }
}
