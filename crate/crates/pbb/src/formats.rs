//! Text and JSON encodings. Distributions, terms and rationals are always
//! written in the literal grammar, so every document is readable and diffable.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use pbb_core::distr::Distribution;
use pbb_core::equiv::{
    Certificate, Closures, Counterexample, Decomposition, Evidence, Refutation, RefutationKind, StatePartition,
};
use pbb_core::rational::{format_rational, parse_rational, Rational};
use pbb_core::semantics::{Move, Step, Universe, WeakChain};
use pbb_core::stability::{CancelEvidence, ClassRow, Stabilized};
use pbb_core::terms::{parse_distribution, parse_nterm, Action, NTerm, ParseError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad literal `{text}`: {error}")]
    Literal { text: String, error: ParseError },
    #[error("unknown closure `{0}`")]
    UnknownClosure(String),
    #[error("bad rational `{0}`")]
    Rational(String),
    #[error("{0}")]
    Invalid(String),
}

fn dist(text: &str) -> Result<Distribution, FormatError> {
    parse_distribution(text).map_err(|error| FormatError::Literal { text: text.into(), error })
}

fn term(text: &str) -> Result<NTerm, FormatError> {
    parse_nterm(text).map_err(|error| FormatError::Literal { text: text.into(), error })
}

fn rational(text: &str) -> Result<Rational, FormatError> {
    parse_rational(text).ok_or_else(|| FormatError::Rational(text.into()))
}

pub fn rat(r: &Rational) -> String {
    format_rational(r)
}

// ---- certificates ----

#[derive(Serialize, Deserialize)]
struct CertificateDoc {
    pairs: Vec<[String; 2]>,
    #[serde(default)]
    closures: Vec<String>,
}

pub fn certificate_value(c: &Certificate) -> Value {
    json!({
        "pairs": c.pairs.iter().map(|(a, b)| [a.to_string(), b.to_string()]).collect::<Vec<_>>(),
        "closures": c.closures.names(),
    })
}

pub fn certificate_to_json(c: &Certificate) -> String {
    serde_json::to_string_pretty(&certificate_value(c)).expect("values serialize")
}

pub fn certificate_from_value(v: Value) -> Result<Certificate, FormatError> {
    let doc: CertificateDoc = serde_json::from_value(v)?;
    let mut closures = Closures::default();
    for name in &doc.closures {
        match name.as_str() {
            "symmetric" => closures.symmetric = true,
            "diagonal" => closures.diagonal = true,
            "convex" => closures.convex = true,
            other => return Err(FormatError::UnknownClosure(other.into())),
        }
    }
    let pairs = doc.pairs.iter().map(|[a, b]| Ok((dist(a)?, dist(b)?))).collect::<Result<_, FormatError>>()?;
    Ok(Certificate::new(pairs, closures))
}

pub fn certificate_from_json(text: &str) -> Result<Certificate, FormatError> {
    certificate_from_value(serde_json::from_str(text)?)
}

// ---- steps and chains ----

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct MoveRecord {
    pub state: String,
    pub mass: String,
    /// `"stay"` or the fired distribution.
    #[serde(rename = "move")]
    pub mv: String,
}

/// One line of a JSON-lines trace.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub index: usize,
    pub action: String,
    pub source: String,
    pub target: String,
    pub moves: Vec<MoveRecord>,
}

pub fn step_record(index: usize, s: &Step) -> StepRecord {
    StepRecord {
        index,
        action: s.action.to_string(),
        source: s.source.to_string(),
        target: s.target.to_string(),
        moves: s
            .moves
            .iter()
            .map(|(e, m, mv)| MoveRecord {
                state: e.to_string(),
                mass: rat(m),
                mv: match mv {
                    Move::Stay => "stay".into(),
                    Move::Fire(d) => d.to_string(),
                },
            })
            .collect(),
    }
}

pub fn step_value(s: &Step) -> Value {
    serde_json::to_value(step_record(0, s)).expect("records serialize")
}

pub fn step_from_record(r: &StepRecord) -> Result<Step, FormatError> {
    let action = Action::new(&r.action).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let mut moves = Vec::new();
    for m in &r.moves {
        let mv = if m.mv == "stay" { Move::Stay } else { Move::Fire(dist(&m.mv)?) };
        moves.push((term(&m.state)?, rational(&m.mass)?, mv));
    }
    let s = Step::from_moves(action, moves).map_err(|e| FormatError::Invalid(e.to_string()))?;
    if s.source != dist(&r.source)? || s.target != dist(&r.target)? {
        return Err(FormatError::Invalid(format!("step {} does not match its moves", r.index)));
    }
    Ok(s)
}

pub fn chain_to_jsonl(c: &WeakChain) -> String {
    let mut out = String::new();
    for (i, s) in c.steps.iter().enumerate() {
        out.push_str(&serde_json::to_string(&step_record(i, s)).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Reads a trace back; an empty trace needs the source.
pub fn chain_from_jsonl(source: &Distribution, text: &str) -> Result<WeakChain, FormatError> {
    let mut chain = WeakChain::empty(source);
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let r: StepRecord = serde_json::from_str(line)?;
        let s = step_from_record(&r)?;
        if s.source != *chain.target() {
            return Err(FormatError::Invalid(format!("step {} does not continue the trace", r.index)));
        }
        chain.steps.push(s);
    }
    Ok(chain)
}

pub fn chain_value(c: &WeakChain) -> Value {
    json!({
        "source": c.source.to_string(),
        "target": c.target().to_string(),
        "steps": c.steps.iter().enumerate().map(|(i, s)| step_record(i, s)).collect::<Vec<_>>(),
    })
}

// ---- verdicts and evidence ----

pub fn refutation_value(r: &Refutation) -> Value {
    let kind = match &r.kind {
        RefutationKind::Barb(a) => json!({ "barb": a.to_string() }),
        RefutationKind::WeakDecomposition => json!("weak-decomposition"),
    };
    json!({ "kind": kind, "swapped": r.swapped, "detail": r.detail })
}

pub fn counterexample_value(c: &Counterexample) -> Value {
    json!({
        "pair": [c.pair.0.to_string(), c.pair.1.to_string()],
        "clause": c.clause.to_string(),
        "obligation": c.obligation,
        "semantic": c.semantic,
        "refutation": c.refutation.as_ref().map(refutation_value),
    })
}

pub fn evidence_value(e: &Evidence) -> Value {
    let pairs: Vec<Value> = e
        .pairs
        .iter()
        .map(|p| {
            let decomposition = match &p.decomposition {
                Decomposition::DiracLeft => json!({ "kind": "dirac-left" }),
                Decomposition::ReachesLeft(c) => json!({ "kind": "reaches-left", "chain": chain_value(c) }),
                Decomposition::Finest { chain, parts } => json!({
                    "kind": "finest",
                    "chain": chain_value(chain),
                    "parts": parts.iter().map(|(e, d)| [e.to_string(), d.to_string()]).collect::<Vec<_>>(),
                }),
            };
            json!({
                "left": p.left.to_string(),
                "right": p.right.to_string(),
                "decomposition": decomposition,
                "transfers": p.transfers.iter().map(|t| json!({
                    "step": step_value(&t.step),
                    "chain": chain_value(&t.chain),
                    "answer": step_value(&t.answer),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "pairs": pairs })
}

/// Blocks touched by the given distributions, in canonical order.
pub fn touched_blocks(pi: &StatePartition, ds: &[&Distribution]) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    for d in ds {
        for e in d.support() {
            if let Some(b) = pi.block_of(e) {
                seen.insert(b);
            }
        }
    }
    seen.into_iter().collect()
}

pub fn class_vector_value(pi: &StatePartition, blocks: &[usize], d: &Distribution) -> Value {
    let mut v = serde_json::Map::new();
    for &b in blocks {
        let mass: Rational = pi.blocks()[b].iter().map(|e| d.get(e)).sum();
        v.insert(format!("C{b}"), json!(rat(&mass)));
    }
    Value::Object(v)
}

pub fn classes_value(pi: &StatePartition, blocks: &[usize]) -> Value {
    Value::Array(
        blocks
            .iter()
            .map(|&b| json!({ "class": format!("C{b}"), "states": pi.blocks()[b].iter().map(|e| e.to_string()).collect::<Vec<_>>() }))
            .collect(),
    )
}

pub fn stabilized_value(s: &Stabilized, pi: &StatePartition) -> Value {
    let (w0, w1) = s.weights();
    let blocks = touched_blocks(pi, &[&s.source, &s.sigma]);
    json!({
        "source": s.source.to_string(),
        "sigma": s.sigma.to_string(),
        "wgt": [rat(&w0), rat(&w1)],
        "schedule": s.chain.steps.iter().enumerate().map(|(i, st)| step_record(i, st)).collect::<Vec<_>>(),
        "certificate": certificate_value(&s.certificate),
        "classes": classes_value(pi, &blocks),
        "vectors": {
            "source": class_vector_value(pi, &blocks, &s.source),
            "sigma": class_vector_value(pi, &blocks, &s.sigma),
        },
    })
}

fn row_value(r: &ClassRow) -> Value {
    json!({
        "class": format!("C{}", r.class),
        "sigma": rat(&r.sigma),
        "sigma_prime": rat(&r.sigma_prime),
        "nu_bar": rat(&r.nu_bar),
        "nu_bar_prime": rat(&r.nu_bar_prime),
        "r_mu_bar": rat(&r.r_mu_bar),
        "r_mu_bar_prime": rat(&r.r_mu_bar_prime),
    })
}

pub fn cancel_evidence_value(e: &CancelEvidence) -> Value {
    json!({
        "premises": {
            "mixtures": certificate_value(&e.premise_mixtures),
            "rests": certificate_value(&e.premise_rests),
        },
        "stabilized": {
            "mu": stabilized_value(&e.mu, &e.classes),
            "mu_prime": stabilized_value(&e.mu_prime, &e.classes),
            "nu": stabilized_value(&e.nu, &e.classes),
            "nu_prime": stabilized_value(&e.nu_prime, &e.classes),
        },
        "rows": e.rows.iter().map(row_value).collect::<Vec<_>>(),
    })
}

// ---- seeds and DOT ----

/// One distribution or term per line; `#` starts a comment.
pub fn parse_seeds(text: &str) -> Result<Vec<Distribution>, FormatError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(crate::parse_any_distribution(line).map_err(|error| FormatError::Literal { text: line.into(), error })?);
    }
    Ok(out)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// States as boxes, transitions as edges into small distribution points.
pub fn universe_dot(u: &Universe) -> String {
    let mut out = String::from("digraph universe {\n  rankdir=LR;\n  node [shape=box];\n");
    let ids: std::collections::BTreeMap<&NTerm, usize> = u.states().enumerate().map(|(i, e)| (e, i)).collect();
    for (e, i) in &ids {
        let _ = writeln!(out, "  s{i} [label={}];", quote(&e.to_string()));
    }
    let mut k = 0;
    for (e, i) in &ids {
        for (a, d) in u.transitions(e) {
            if let Some(f) = d.as_dirac() {
                let _ = writeln!(out, "  s{i} -> s{} [label={}];", ids[f], quote(&a.to_string()));
                continue;
            }
            let _ = writeln!(out, "  d{k} [shape=point];");
            let _ = writeln!(out, "  s{i} -> d{k} [label={}];", quote(&a.to_string()));
            for (f, p) in d.iter() {
                let _ = writeln!(out, "  d{k} -> s{} [style=dashed, label={}];", ids[f], quote(&rat(p)));
            }
            k += 1;
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pbb_core::semantics::{build_universe, weak_reach};

    fn d(s: &str) -> Distribution {
        parse_distribution(s).unwrap()
    }

    #[test]
    fn certificate_round_trip() {
        let c = Certificate::new(
            vec![(d("{1: tau.D(a.D(0))}"), d("{1: a.D(0)}"))],
            Closures { symmetric: true, diagonal: false, convex: true },
        );
        let back = certificate_from_json(&certificate_to_json(&c)).unwrap();
        assert_eq!(back, c);
        assert!(certificate_from_json(r#"{"pairs": [], "closures": ["transitive"]}"#).is_err());
        assert!(certificate_from_json(r#"{"pairs": [["{1: 0}", "{1/2: 0}"]]}"#).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let mu = d("{1/2: tau.D(tau.D(0)), 1/2: 0}");
        let u = build_universe([&mu]);
        let c = weak_reach(&u, &mu, &d("{1: 0}"), u.bound()).unwrap().unwrap();
        let text = chain_to_jsonl(&c);
        assert_eq!(text.lines().count(), c.len());
        assert_eq!(chain_from_jsonl(&mu, &text).unwrap(), c);
        assert!(chain_from_jsonl(&d("{1: 0}"), &text).is_err());
    }

    #[test]
    fn seeds_and_dot() {
        let seeds = parse_seeds("# intro\n{1/2: a.D(0), 1/2: b.D(0)}\n\na.D(0) # a term\n").unwrap();
        assert_eq!(seeds.len(), 2);
        let u = build_universe(seeds.iter());
        let dot = universe_dot(&u);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches(" -> ").count(), 2);
    }
}
