use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pbb_core::distr::Distribution;
use pbb_core::equiv::{
    check_certificate, class_vector, strong_partition, BranchingSearch, Budget, RefutationKind, SearchOutcome,
    StatePartition, Verdict,
};
use pbb_core::rational::{parse_rational, Rational};
use pbb_core::semantics::{
    build_universe, distribution_step, partial_successors, partial_tau_step, weak_reach, SemanticsError, Universe,
};
use pbb_core::stability::{cancel_check, is_stable, stabilize, CancelError, CancelVerdict, StabilizeError};
use pbb_core::terms::{parse_nterm, parse_pterm, Action};
use serde_json::{json, Value};

use crate::formats::{self, rat};
use crate::harness::{run_suite, GenConfig, HarnessError};
use crate::parse_any_distribution;

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    False = 1,
    Inconclusive = 2,
    Usage = 3,
}

#[derive(Parser, Debug)]
#[command(name = "pbb", version, about = "Exact semantics and branching bisimilarity for probabilistic processes")]
struct Cli {
    /// Emit machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Emit the universe as Graphviz DOT instead of the usual output.
    #[arg(long, global = true)]
    dot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a term or distribution and print its canonical form.
    Parse {
        text: String,
        #[arg(long, value_enum, default_value_t = SortArg::Auto)]
        sort: SortArg,
    },
    /// Successors of a distribution under one action, or a membership test.
    Step {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        action: String,
        /// Decide whether this distribution is a successor.
        #[arg(long)]
        target: Option<String>,
        /// Partial tau steps (some mass may stay).
        #[arg(long)]
        partial: bool,
        #[arg(long, default_value_t = 16)]
        limit: usize,
    },
    /// A weak transition schedule between two distributions.
    Trace {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        depth: Option<u64>,
    },
    /// Strong probabilistic bisimilarity.
    CheckStrong(Pair),
    /// Branching probabilistic bisimilarity, by certificate or by search.
    CheckBranching {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, conflicts_with = "search", required_unless_present = "search")]
        cert: Option<PathBuf>,
        #[arg(long)]
        search: bool,
    },
    /// Unfold inert tau steps until stable.
    Stabilize {
        #[arg(long)]
        dist: String,
    },
    /// Branching classes of the states of the seeds, with class vectors.
    Classes {
        #[arg(long)]
        seeds: PathBuf,
    },
    /// Cancellation: from mu +r nu ≈ mu' +r nu' and nu ≈ nu', certify mu ≈ mu'.
    Cancel {
        #[arg(long)]
        mu: String,
        #[arg(long = "mu-prime")]
        mu_prime: String,
        #[arg(long)]
        nu: String,
        #[arg(long = "nu-prime")]
        nu_prime: String,
        #[arg(long)]
        r: String,
    },
    /// Run a property suite.
    Fuzz {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "max-depth", default_value_t = 2)]
        max_depth: u32,
    },
}

#[derive(Args, Debug)]
struct Pair {
    #[arg(long)]
    left: String,
    #[arg(long)]
    right: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SortArg {
    Auto,
    Nondet,
    Prob,
    Dist,
}

struct Failure(Status, String);

type Outcome = Result<Status, Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure(Status::Usage, msg.to_string())
}

/// Reads `@path` arguments from files.
fn literal(arg: &str) -> Result<String, Failure> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path, e))),
        None => Ok(arg.to_string()),
    }
}

fn dist(arg: &str) -> Result<Distribution, Failure> {
    let text = literal(arg)?;
    parse_any_distribution(&text).map_err(|e| usage(format!("`{}`: {}", text.trim(), e)))
}

fn action(name: &str) -> Result<Action, Failure> {
    Action::new(name).map_err(usage)
}

fn semantic(e: SemanticsError) -> Failure {
    usage(e)
}

/// `PBB_BUDGET=pairs,depth,denom`; empty or `-` fields keep the default.
pub fn budget_from_env(value: Option<&str>) -> Result<Budget, String> {
    let mut b = Budget::default();
    let Some(v) = value else { return Ok(b) };
    let fields: Vec<&str> = v.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(format!("PBB_BUDGET must be `pairs,depth,denom`, got `{}`", v));
    }
    let num = |s: &str| -> Result<Option<u64>, String> {
        if s.is_empty() || s == "-" {
            return Ok(None);
        }
        s.parse::<u64>().map(Some).map_err(|_| format!("PBB_BUDGET field `{}` is not a number", s))
    };
    if let Some(p) = num(fields[0])? {
        b.max_pairs = p as usize;
    }
    if let Some(d) = num(fields[1])? {
        b.max_depth = Some(d);
    }
    if let Some(d) = num(fields[2])? {
        b.max_denominator = Some(d);
    }
    Ok(b)
}

struct Ctx<'w> {
    json: bool,
    dot: bool,
    budget: Budget,
    out: &'w mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, human: &str, value: Value) {
        if self.dot {
            return;
        }
        if self.json {
            let _ = writeln!(self.out, "{}", serde_json::to_string_pretty(&value).expect("values serialize"));
        } else {
            let _ = write!(self.out, "{}", human);
            if !human.ends_with('\n') {
                let _ = writeln!(self.out);
            }
        }
    }

    fn universe<'a, I: IntoIterator<Item = &'a Distribution>>(&mut self, ds: I) -> Universe {
        let u = build_universe(ds);
        if self.dot {
            let _ = write!(self.out, "{}", formats::universe_dot(&u));
        }
        u
    }
}

/// Runs one invocation, writing results to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e);
                    Status::Success as i32
                }
                _ => {
                    let _ = write!(err, "{}", e);
                    Status::Usage as i32
                }
            };
        }
    };
    let budget = match budget_from_env(std::env::var("PBB_BUDGET").ok().as_deref()) {
        Ok(b) => b,
        Err(m) => {
            let _ = writeln!(err, "error: {}", m);
            return Status::Usage as i32;
        }
    };
    let mut ctx = Ctx { json: cli.json, dot: cli.dot, budget, out };
    match dispatch(&mut ctx, cli.command) {
        Ok(s) => s as i32,
        Err(Failure(s, msg)) => {
            let _ = writeln!(err, "error: {}", msg);
            s as i32
        }
    }
}

fn dispatch(ctx: &mut Ctx<'_>, cmd: Command) -> Outcome {
    match cmd {
        Command::Parse { text, sort } => parse_cmd(ctx, &literal(&text)?, sort),
        Command::Step { dist: d, action: a, target, partial, limit } => step_cmd(ctx, &d, &a, target.as_deref(), partial, limit),
        Command::Trace { from, to, depth } => trace_cmd(ctx, &from, &to, depth),
        Command::CheckStrong(p) => strong_cmd(ctx, &p),
        Command::CheckBranching { pair, cert, search } => branching_cmd(ctx, &pair, cert, search),
        Command::Stabilize { dist: d } => stabilize_cmd(ctx, &d),
        Command::Classes { seeds } => classes_cmd(ctx, &seeds),
        Command::Cancel { mu, mu_prime, nu, nu_prime, r } => cancel_cmd(ctx, [&mu, &mu_prime, &nu, &nu_prime], &r),
        Command::Fuzz { suite, count, seed, max_depth } => fuzz_cmd(ctx, &suite, count, seed, max_depth),
    }
}

fn parse_cmd(ctx: &mut Ctx<'_>, text: &str, sort: SortArg) -> Outcome {
    let text = text.trim();
    let sort = match sort {
        SortArg::Auto if text.starts_with('{') => SortArg::Dist,
        SortArg::Auto => match (parse_nterm(text), parse_pterm(text)) {
            (Ok(_), _) => SortArg::Nondet,
            (_, Ok(_)) => SortArg::Prob,
            (Err(ne), Err(pe)) => return Err(usage(crate::furthest(ne, pe))),
        },
        s => s,
    };
    let (name, canonical, value) = match sort {
        SortArg::Nondet => {
            let e = parse_nterm(text).map_err(usage)?;
            ("nondet", e.to_string(), json!({ "complexity": e.complexity() }))
        }
        SortArg::Prob => {
            let p = parse_pterm(text).map_err(usage)?;
            let d = pbb_core::semantics::den(&p);
            ("prob", p.to_string(), json!({ "distribution": d.to_string() }))
        }
        _ => {
            let d = pbb_core::terms::parse_distribution(text).map_err(usage)?;
            ("distribution", d.to_string(), json!({}))
        }
    };
    let mut v = json!({ "sort": name, "canonical": canonical });
    if let (Value::Object(m), Value::Object(extra)) = (&mut v, value) {
        m.extend(extra);
    }
    if ctx.dot {
        let d = parse_any_distribution(text).map_err(usage)?;
        ctx.universe([&d]);
    }
    ctx.emit(&canonical, v);
    Ok(Status::Success)
}

fn step_cmd(ctx: &mut Ctx<'_>, d: &str, a: &str, target: Option<&str>, partial: bool, limit: usize) -> Outcome {
    let mu = dist(d)?;
    let a = action(a)?;
    if partial && !a.is_tau() {
        return Err(usage("--partial requires the tau action"));
    }
    let target = target.map(dist).transpose()?;
    let u = ctx.universe(std::iter::once(&mu).chain(target.as_ref()));
    let set = if partial { partial_successors(&u, &mu) } else { distribution_step(&u, &mu, &a) };
    let set = match set {
        Ok(s) => s,
        Err(SemanticsError::NoTransition { state, action }) => {
            let msg = format!("{} has no {} step: `{}` cannot do `{}`", mu, a, state, action);
            ctx.emit(&msg, json!({ "source": mu.to_string(), "action": a.to_string(), "enabled": false, "reason": msg }));
            return Ok(Status::False);
        }
        Err(e) => return Err(semantic(e)),
    };
    if let Some(nu) = target {
        let found = if partial {
            partial_tau_step(&u, &mu, &nu).map_err(|r| r.to_string())
        } else {
            set.contains(&nu).ok_or_else(|| set.refusal(&nu).to_string())
        };
        return Ok(match found {
            Ok(step) => {
                let v = json!({ "member": true, "step": formats::step_value(&step) });
                ctx.emit(&format!("{} --{}--> {}\n{}", mu, a, nu, moves_text(&step)), v);
                Status::Success
            }
            Err(why) => {
                ctx.emit(&format!("not a successor\n{}", why), json!({ "member": false, "refusal": why }));
                Status::False
            }
        });
    }
    let vs = set.vertices(limit);
    let mut human = format!("{} {} vertex successor(s) of {} under {}\n", set.vertex_count(), if partial { "partial" } else { "full" }, mu, a);
    for s in &vs {
        human.push_str(&format!("  {}\n", s.target));
    }
    let v = json!({
        "source": mu.to_string(),
        "action": a.to_string(),
        "vertex_count": set.vertex_count().to_string(),
        "vertices": vs.iter().enumerate().map(|(i, s)| formats::step_record(i, s)).collect::<Vec<_>>(),
    });
    ctx.emit(&human, v);
    Ok(Status::Success)
}

fn moves_text(s: &pbb_core::semantics::Step) -> String {
    let mut out = String::new();
    for (e, m, mv) in &s.moves {
        let what = match mv {
            pbb_core::semantics::Move::Stay => "stays".to_string(),
            pbb_core::semantics::Move::Fire(d) => format!("fires to {}", d),
        };
        out.push_str(&format!("  {} of {} {}\n", rat(m), e, what));
    }
    out
}

fn trace_cmd(ctx: &mut Ctx<'_>, from: &str, to: &str, depth: Option<u64>) -> Outcome {
    let (mu, nu) = (dist(from)?, dist(to)?);
    let u = ctx.universe([&mu, &nu]);
    let depth = depth.unwrap_or(u.bound());
    match weak_reach(&u, &mu, &nu, depth).map_err(semantic)? {
        Some(chain) => {
            if ctx.dot {
                return Ok(Status::Success);
            }
            if ctx.json {
                let _ = write!(ctx.out, "{}", formats::chain_to_jsonl(&chain));
            } else {
                let mut human = format!("{} ==> {} in {} step(s)\n", mu, nu, chain.len());
                for (i, s) in chain.steps.iter().enumerate() {
                    human.push_str(&format!("step {}: {}\n{}", i + 1, s.target, moves_text(s)));
                }
                ctx.emit(&human, Value::Null);
            }
            Ok(Status::Success)
        }
        None => {
            ctx.emit(&format!("no weak transition from {} to {} within depth {}", mu, nu, depth), json!({ "reachable": false }));
            Ok(Status::False)
        }
    }
}

fn strong_cmd(ctx: &mut Ctx<'_>, p: &Pair) -> Outcome {
    let (mu, nu) = (dist(&p.left)?, dist(&p.right)?);
    let u = ctx.universe([&mu, &nu]);
    let pi = strong_partition(&u);
    let eq = class_vector(&mu, &pi).ok() == class_vector(&nu, &pi).ok();
    let (human, v) = vectors_report(&pi, &[("left", &mu), ("right", &nu)]);
    let verdict = if eq { "strongly bisimilar" } else { "not strongly bisimilar" };
    let mut v = v;
    v["equivalent"] = json!(eq);
    ctx.emit(&format!("{}\n{}", verdict, human), v);
    Ok(if eq { Status::Success } else { Status::False })
}

fn vectors_report(pi: &StatePartition, named: &[(&str, &Distribution)]) -> (String, Value) {
    let ds: Vec<&Distribution> = named.iter().map(|(_, d)| *d).collect();
    let blocks = formats::touched_blocks(pi, &ds);
    let mut human = String::new();
    for &b in &blocks {
        let states: Vec<String> = pi.blocks()[b].iter().map(|e| e.to_string()).collect();
        human.push_str(&format!("C{}: {}\n", b, states.join(", ")));
    }
    let mut vectors = serde_json::Map::new();
    for (name, d) in named {
        let cells: Vec<String> = blocks
            .iter()
            .map(|&b| {
                let m: Rational = pi.blocks()[b].iter().map(|e| d.get(e)).sum();
                format!("C{}: {}", b, rat(&m))
            })
            .collect();
        human.push_str(&format!("{} = {}\n  [{}]\n", name, d, cells.join(", ")));
        vectors.insert(name.to_string(), json!({ "distribution": d.to_string(), "vector": formats::class_vector_value(pi, &blocks, d) }));
    }
    (human, json!({ "classes": formats::classes_value(pi, &blocks), "vectors": Value::Object(vectors) }))
}

fn branching_cmd(ctx: &mut Ctx<'_>, p: &Pair, cert: Option<PathBuf>, _search: bool) -> Outcome {
    let (mu, nu) = (dist(&p.left)?, dist(&p.right)?);
    if let Some(path) = cert {
        let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {}", path.display(), e)))?;
        let cert = formats::certificate_from_json(&text).map_err(usage)?;
        let mut seeds = vec![&mu, &nu];
        seeds.extend(cert.pairs.iter().flat_map(|(a, b)| [a, b]));
        let u = ctx.universe(seeds);
        let verdict = check_certificate(&u, &cert).map_err(usage)?;
        return Ok(match verdict {
            Verdict::Accepted(ev) => {
                if mu != nu && !cert.relates(&mu, &nu) {
                    ctx.emit(
                        "certificate accepted, but it does not relate the two inputs",
                        json!({ "verdict": "unrelated", "certificate": formats::certificate_value(&cert) }),
                    );
                    Status::False
                } else {
                    let v = json!({ "verdict": "accepted", "evidence": formats::evidence_value(&ev) });
                    ctx.emit(&format!("certificate accepted ({} generator(s) checked)", ev.pairs.len()), v);
                    Status::Success
                }
            }
            Verdict::Rejected(cx) => {
                let v = json!({ "verdict": "rejected", "counterexample": formats::counterexample_value(&cx) });
                ctx.emit(&format!("certificate rejected\n{}", cx), v);
                Status::False
            }
        });
    }
    let u = ctx.universe([&mu, &nu]);
    let s = BranchingSearch::new(&u, ctx.budget.clone());
    Ok(match s.search(&mu, &nu).map_err(semantic)? {
        SearchOutcome::Found(c) => {
            let v = json!({ "verdict": "bisimilar", "certificate": formats::certificate_value(&c) });
            ctx.emit(&format!("branching bisimilar; certificate:\n{}", formats::certificate_to_json(&c)), v);
            Status::Success
        }
        SearchOutcome::Refuted(r) => {
            let clause = match r.kind {
                RefutationKind::Barb(_) => "transfer",
                RefutationKind::WeakDecomposition => "weak-decomposability",
            };
            let v = json!({ "verdict": "refuted", "clause": clause, "refutation": formats::refutation_value(&r) });
            ctx.emit(&format!("not branching bisimilar ({} refutation): {}", clause, r), v);
            Status::False
        }
        SearchOutcome::NotFound => {
            ctx.emit("inconclusive: no certificate within the search budget", json!({ "verdict": "inconclusive" }));
            Status::Inconclusive
        }
    })
}

fn stabilize_cmd(ctx: &mut Ctx<'_>, d: &str) -> Outcome {
    let mu = dist(d)?;
    let u = ctx.universe([&mu]);
    let s = BranchingSearch::new(&u, ctx.budget.clone());
    match stabilize(&s, &mu) {
        Ok(st) => {
            let stable = !matches!(is_stable(&s, &st.sigma).map_err(semantic)?, pbb_core::stability::Stability::Unstable { .. });
            let mut v = formats::stabilized_value(&st, s.classes());
            v["stable"] = json!(stable);
            let (w0, w1) = st.weights();
            let human = format!(
                "{} stabilizes to {}\nwgt {} -> {}, schedule of {} step(s)\n{}",
                st.source,
                st.sigma,
                rat(&w0),
                rat(&w1),
                st.chain.len(),
                formats::certificate_to_json(&st.certificate)
            );
            ctx.emit(&human, v);
            Ok(Status::Success)
        }
        Err(StabilizeError::Uncertified { best }) => {
            ctx.emit(
                &format!("inconclusive: no certified stable equivalent; best candidate {}", best),
                json!({ "verdict": "inconclusive", "best": best.to_string() }),
            );
            Ok(Status::Inconclusive)
        }
        Err(StabilizeError::Semantics(e)) => Err(semantic(e)),
    }
}

fn classes_cmd(ctx: &mut Ctx<'_>, path: &PathBuf) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path.display(), e)))?;
    let seeds = formats::parse_seeds(&text).map_err(usage)?;
    if seeds.is_empty() {
        return Err(usage("the seeds file is empty"));
    }
    let u = ctx.universe(seeds.iter());
    let s = BranchingSearch::new(&u, ctx.budget.clone());
    let names: Vec<String> = (0..seeds.len()).map(|i| format!("seed{}", i + 1)).collect();
    let named: Vec<(&str, &Distribution)> = names.iter().map(String::as_str).zip(seeds.iter()).collect();
    let (human, v) = vectors_report(s.classes(), &named);
    ctx.emit(&human, v);
    Ok(Status::Success)
}

fn cancel_cmd(ctx: &mut Ctx<'_>, args: [&String; 4], r: &str) -> Outcome {
    let [mu, mu_p, nu, nu_p] = [dist(args[0])?, dist(args[1])?, dist(args[2])?, dist(args[3])?];
    let r = parse_rational(r).ok_or_else(|| usage(format!("bad rational `{}`", r)))?;
    let left = mu.mix_with(&r, &nu);
    let right = mu_p.mix_with(&r, &nu_p);
    let u = ctx.universe([&left, &right, &mu, &mu_p, &nu, &nu_p]);
    let s = BranchingSearch::new(&u, ctx.budget.clone());
    match cancel_check(&s, &mu, &mu_p, &nu, &nu_p, &r) {
        Ok(CancelVerdict::Accepted { certificate, evidence }) => {
            let v = json!({
                "verdict": "accepted",
                "certificate": formats::certificate_value(&certificate),
                "evidence": evidence.as_ref().map(formats::cancel_evidence_value),
            });
            ctx.emit(&format!("{} ≈ {}\n{}", mu, mu_p, formats::certificate_to_json(&certificate)), v);
            Ok(Status::Success)
        }
        Ok(CancelVerdict::Inconclusive(why)) => {
            if let Ok(SearchOutcome::Refuted(rf)) = s.search(&mu, &mu_p) {
                ctx.emit(
                    &format!("{} and {} are not bisimilar: {}", mu, mu_p, rf),
                    json!({ "verdict": "refuted", "refutation": formats::refutation_value(&rf) }),
                );
                return Ok(Status::False);
            }
            ctx.emit(&format!("inconclusive: {}", why), json!({ "verdict": "inconclusive", "reason": why }));
            Ok(Status::Inconclusive)
        }
        Err(CancelError::BadWeight(w)) => Err(usage(format!("mixing weight {} must lie in (0, 1]", w))),
        Err(CancelError::Semantics(e)) => Err(semantic(e)),
    }
}

fn fuzz_cmd(ctx: &mut Ctx<'_>, suite: &str, count: usize, seed: u64, max_depth: u32) -> Outcome {
    let cfg = GenConfig { max_depth, seed, ..GenConfig::default() };
    let report = match run_suite(suite, &cfg, count) {
        Ok(r) => r,
        Err(e @ HarnessError::UnknownSuite(_)) => {
            return Err(usage(format!("{}; known suites: {}", e, crate::harness::SUITES.join(", "))))
        }
        Err(e) => return Err(usage(e)),
    };
    ctx.emit(&report.table(), serde_json::to_value(&report).expect("reports serialize"));
    Ok(if report.success() { Status::Success } else { Status::False })
}
