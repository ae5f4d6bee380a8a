//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pbb::formats;
use pbb::harness::{run_suite, GenConfig};
use pbb_core::distr::Distribution;
use pbb_core::equiv::{
    check_certificate, replay, BranchingSearch, Budget, Certificate, Clause, Closures, SearchOutcome, Verdict,
};
use pbb_core::rational::{int, rat};
use pbb_core::semantics::{
    after_set, build_universe, den, distribution_step, partial_tau_step, weak_reach, Universe, WeakChain,
};
use pbb_core::stability::{is_stable, stabilize, wgt, Stability};
use pbb_core::terms::{parse_distribution, parse_nterm, parse_pterm, Action};
use serde_json::Value;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, Box<dyn FnOnce() -> Check>);

const P: &str = "D(p.D(0))";
const Q: &str = "D(q.D(0))";
const MU: &str = "{1/2: a.D(0), 1/2: b.D(0)}";
const NU: &str = "{1/3: tau.(D(a.D(0)) +[1/2] D(b.D(0))), 1/3: a.D(0), 1/3: b.D(0)}";
const BRANCH: &str = "tau.(D(a.D(0)) +[1/2] D(b.D(0)))";

fn d(s: &str) -> Distribution {
    parse_distribution(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn dirac(s: &str) -> Distribution {
    Distribution::dirac(parse_nterm(s).unwrap_or_else(|e| panic!("{s}: {e}")))
}

fn pden(s: &str) -> Distribution {
    den(&parse_pterm(s).unwrap_or_else(|e| panic!("{s}: {e}")))
}

fn act(a: &str) -> Action {
    Action::new(a).unwrap()
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn accept(u: &Universe, c: &Certificate) -> Result<(), String> {
    match check_certificate(u, c).map_err(|e| e.to_string())? {
        Verdict::Accepted(ev) => replay(u, c, &ev).map_err(|e| format!("replay: {e:?}")),
        Verdict::Rejected(cx) => Err(format!("rejected: {cx}")),
    }
}

fn pbb(args: &[&str]) -> Result<(i32, Value), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pbb")).arg("--json").args(args).output().map_err(|e| e.to_string())?;
    let code = out.status.code().unwrap_or(-1);
    let v = serde_json::from_slice(&out.stdout).map_err(|e| format!("{e}: {}", String::from_utf8_lossy(&out.stdout)))?;
    Ok((code, v))
}

fn intro_classes() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seeds = dir.path().join("intro.seeds");
    std::fs::write(&seeds, format!("# mu, then nu\n{MU}\n{NU}\n")).map_err(|e| e.to_string())?;
    let (code, v) = pbb(&["classes", "--seeds", seeds.to_str().unwrap()])?;
    ensure(code == 0, || format!("classes exited {code}"))?;
    let classes = v["classes"].as_array().ok_or("no classes")?;
    ensure(classes.len() == 3, || format!("{} classes", classes.len()))?;
    let name_of = |state: &str| -> Result<String, String> {
        let want = parse_nterm(state).unwrap();
        classes
            .iter()
            .find(|c| c["states"].as_array().unwrap().iter().any(|s| parse_nterm(s.as_str().unwrap()).unwrap() == want))
            .map(|c| c["class"].as_str().unwrap().to_string())
            .ok_or_else(|| format!("{state} is in no class"))
    };
    let order = [name_of(BRANCH)?, name_of("a.D(0)")?, name_of("b.D(0)")?];
    let vector = |seed: &str| -> Vec<String> {
        order.iter().map(|c| v["vectors"][seed]["vector"][c].as_str().unwrap_or("?").to_string()).collect()
    };
    let (vm, vn) = (vector("seed1"), vector("seed2"));
    ensure(vm == ["0", "1/2", "1/2"], || format!("mu vector {vm:?}"))?;
    ensure(vn == ["1/3", "1/3", "1/3"], || format!("nu vector {vn:?}"))?;
    let (code, v) = pbb(&["check-branching", "--search", "--left", MU, "--right", NU])?;
    ensure(code == 0 && v["verdict"] == "bisimilar", || format!("search: exit {code}, {}", v["verdict"]))?;
    let cert = formats::certificate_from_value(v["certificate"].clone()).map_err(|e| e.to_string())?;
    let (mu, nu) = (d(MU), d(NU));
    accept(&build_universe([&mu, &nu]), &cert)?;
    ensure(cert.relates(&mu, &nu), || "certificate does not relate mu and nu".into())?;
    Ok(format!("tau-branch, a, b in {}, {}, {}; mu (0, 1/2, 1/2), nu (1/3, 1/3, 1/3); certificate accepted", order[0], order[1], order[2]))
}

fn timed(limit: Duration, f: impl FnOnce() -> Result<(), String>) -> Result<Duration, String> {
    let t = Instant::now();
    f()?;
    let el = t.elapsed();
    ensure(el < limit, || format!("took {el:?}"))?;
    Ok(el)
}

fn golden_transitions() -> Check {
    let second = Duration::from_secs(1);
    let mut times = Vec::new();
    times.push(timed(second, || {
        let half = pden(&format!("{P} +[1/2] {Q}"));
        for h in [format!("a.({P} +[1/4] ({P} +[1/3] {Q}))"), format!("a.({P} +[1/2] ({Q} +[1/2] {Q}))")] {
            let mu = dirac(&h);
            let u = build_universe([&mu]);
            let targets: Vec<Distribution> =
                distribution_step(&u, &mu, &act("a")).map_err(|e| e.to_string())?.vertices(8).into_iter().map(|s| s.target).collect();
            ensure(targets == [half.clone()], || format!("{h} steps to {targets:?}"))?;
        }
        Ok(())
    })?);
    times.push(timed(second, || {
        let e = parse_nterm(&format!("a.({P} +[1/2] {Q}) + a.({P} +[1/3] {Q})")).unwrap();
        let mu = Distribution::dirac(e.clone());
        let u = build_universe([&mu]);
        let target = pden(&format!("{P} +[5/12] {Q}"));
        let after = after_set(&u, &e, &act("a"), false).map_err(|e| e.to_string())?;
        let coeffs = after.hull_coefficients(&target).ok_or("5/12 target outside the hull")?;
        ensure(coeffs == [rat(1, 2), rat(1, 2)], || format!("coefficients {coeffs:?}"))?;
        let step = distribution_step(&u, &mu, &act("a")).map_err(|e| e.to_string())?.contains(&target).ok_or("no combined step")?;
        step.verify(&u).map_err(|e| e.to_string())
    })?);
    // (a)
    times.push(timed(second, || {
        let pq = format!("({P} +[1/2] {Q})");
        let mu = d(&format!("{{1/3: tau.{pq}, 1/3: p.D(0), 1/3: q.D(0)}}"));
        let u = build_universe([&mu]);
        let target = pden(&pq);
        let s = partial_tau_step(&u, &mu, &target).map_err(|r| format!("{r:?}"))?;
        s.verify(&u).map_err(|e| e.to_string())?;
        ensure(s.fired_mass() == rat(1, 3) && s.target == target, || format!("fired {}", s.fired_mass()))
    })?);
    // (b), both routes
    times.push(timed(second, || {
        let p = "p.D(0)";
        let mu = d(&format!("{{1/2: tau.D(tau.D({p})), 1/3: tau.D({p}), 1/6: {p}}}"));
        let u = build_universe([&mu]);
        let routes = [
            vec![d(&format!("{{5/6: tau.D({p}), 1/6: {p}}}")), dirac(p)],
            vec![
                d(&format!("{{1/2: tau.D(tau.D({p})), 1/2: {p}}}")),
                d(&format!("{{1/2: tau.D({p}), 1/2: {p}}}")),
                dirac(p),
            ],
        ];
        for route in routes {
            let mut steps = Vec::new();
            let mut cur = mu.clone();
            for next in route {
                steps.push(partial_tau_step(&u, &cur, &next).map_err(|r| format!("{cur} to {next}: {r:?}"))?);
                cur = next;
            }
            WeakChain { source: mu.clone(), steps }.verify(&u).map_err(|e| e.to_string())?;
        }
        let found = weak_reach(&u, &mu, &dirac(p), u.bound()).map_err(|e| e.to_string())?.ok_or("not reached")?;
        found.verify(&u).map_err(|e| e.to_string())
    })?);
    // (c)
    times.push(timed(second, || {
        let mu = d("{1/2: tau.D(a.D(0) + b.D(0)), 1/2: a.D(c.D(0))}");
        let u = build_universe([&mu]);
        ensure(distribution_step(&u, &mu, &Action::tau()).is_err(), || "full tau step exists".into())?;
        ensure(distribution_step(&u, &mu, &act("a")).is_err(), || "a-step exists".into())?;
        let mid = d("{1/2: a.D(0) + b.D(0), 1/2: a.D(c.D(0))}");
        let s = partial_tau_step(&u, &mu, &mid).map_err(|r| format!("{r:?}"))?;
        ensure(s.fired_mass() == rat(1, 2), || "wrong fired mass".into())?;
        let a = distribution_step(&u, &mid, &act("a")).map_err(|e| e.to_string())?;
        let t = a.contains(&d("{1/2: 0, 1/2: c.D(0)}")).ok_or("a-step target missing")?;
        t.verify(&u).map_err(|e| e.to_string())
    })?);
    let worst = times.iter().max().copied().unwrap_or_default();
    Ok(format!("H1/H2, 5/12 hull, examples (a)-(c); slowest {worst:?}"))
}

fn certificates() -> Check {
    let pq = format!("({P} +[1/2] {Q})");
    let (g1, g2) = (dirac(&format!("a.{pq}")), dirac(&format!("a.(D(tau.{pq}) +[1/3] {pq})")));
    let g = Certificate::new(vec![(dirac(&format!("tau.{pq}")), pden(&pq)), (g1.clone(), g2.clone())], Closures::ALL);
    let ug = build_universe([&g1, &g2]);
    accept(&ug, &g)?;
    // The same certificate through the file format and the CLI.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("g.json");
    std::fs::write(&path, formats::certificate_to_json(&g)).map_err(|e| e.to_string())?;
    let (code, v) = pbb(&["check-branching", "--left", &g1.to_string(), "--right", &g2.to_string(), "--cert", path.to_str().unwrap()])?;
    ensure(code == 0 && v["verdict"] == "accepted", || format!("cli: exit {code}, {}", v["verdict"]))?;

    let body = format!("b.{P} + tau.{Q}");
    let (i1, i2) = (dirac(&format!("a.D({body})")), dirac(&format!("a.D(tau.D({body}) + {body})")));
    let i = Certificate::new(
        vec![(i1.clone(), i2.clone()), (dirac(&body), dirac(&format!("tau.D({body}) + {body}")))],
        Closures { symmetric: true, diagonal: true, convex: false },
    );
    accept(&build_universe([&i1, &i2]), &i)?;

    let (half, nil) = (d("{1/2: a.D(0), 1/2: b.D(0)}"), dirac("0"));
    let u = build_universe([&half, &nil]);
    let bad = Certificate::new(vec![(half.clone(), nil.clone())], Closures::ALL);
    let cx = match check_certificate(&u, &bad).map_err(|e| e.to_string())? {
        Verdict::Rejected(cx) => cx,
        Verdict::Accepted(_) => return Err("(1/2 A + 1/2 B, 0) accepted".into()),
    };
    ensure(cx.clause == Clause::WeakDecomposability && cx.semantic, || format!("counterexample {cx}"))?;
    let s = BranchingSearch::new(&u, Budget::default());
    ensure(matches!(s.search(&half, &nil), Ok(SearchOutcome::Refuted(_))), || "search did not refute".into())?;
    Ok("G1/G2 (convex) and I1/I2 accepted; (1/2 A + 1/2 B, 0) fails weak decomposability".into())
}

fn stabilization() -> Check {
    let (mu, nu) = (d(MU), d(NU));
    let u = build_universe([&mu, &nu]);
    let s = BranchingSearch::new(&u, Budget::default());
    let st = stabilize(&s, &nu).map_err(|e| format!("{e:?}"))?;
    ensure(st.sigma == mu, || format!("stabilized to {}", st.sigma))?;
    ensure(st.weights() == (rat(11, 3), int(2)) && wgt(&nu) == rat(11, 3), || format!("weights {:?}", st.weights()))?;
    ensure(st.chain.len() == 1, || format!("{} steps", st.chain.len()))?;
    st.chain.verify(&u).map_err(|e| e.to_string())?;
    ensure(st.chain.source == nu && st.chain.target() == &mu, || "schedule endpoints".into())?;
    accept(&u, &st.certificate)?;
    ensure(st.certificate.relates(&nu, &mu), || "certificate does not relate nu and mu".into())?;
    ensure(is_stable(&s, &mu).map_err(|e| e.to_string())? == Stability::Stable, || "mu not stable".into())?;
    for stable in [mu.clone(), dirac("a.D(0)"), dirac("0")] {
        let uu = build_universe([&stable]);
        let ss = BranchingSearch::new(&uu, Budget::default());
        let id = stabilize(&ss, &stable).map_err(|e| format!("{e:?}"))?;
        ensure(id.sigma == stable && id.chain.is_empty(), || format!("{stable} moved to {}", id.sigma))?;
    }
    Ok("nu stabilizes to mu, wgt 11/3 -> 2, one replayed step; identity on stable inputs".into())
}

fn suites(names: &[&str], count: usize, seed: u64) -> Check {
    let cfg = GenConfig { seed, ..GenConfig::default() };
    let mut cells = Vec::new();
    for name in names {
        let r = run_suite(name, &cfg, count).map_err(|e| e.to_string())?;
        if !r.success() || r.passed == 0 {
            return Err(r.table());
        }
        cells.push(format!("{name} {}/{}{}", r.passed, r.count, if r.skipped > 0 { format!(" ({} skipped)", r.skipped) } else { String::new() }));
    }
    Ok(cells.join(", "))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("intro classes and search", Duration::from_secs(5), Box::new(intro_classes)),
        ("golden transitions", Duration::from_secs(5), Box::new(golden_transitions)),
        ("certificates", Duration::from_secs(5), Box::new(certificates)),
        ("stabilization", Duration::from_secs(5), Box::new(stabilization)),
        ("cancellation, 200 cases", Duration::from_secs(60), Box::new(|| suites(&["cancellation"], 200, 0))),
        (
            "property suites, 1000 cases each",
            Duration::from_secs(120),
            Box::new(|| suites(&["flexibelDelen", "limit_residual", "composition", "congruence", "wgt"], 1000, 0)),
        ),
        ("strong oracle, up to 4 states", Duration::from_secs(120), Box::new(|| suites(&["strong_oracle"], 20000, 0))),
    ];
    let mut failed = 0;
    for (i, (title, limit, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let mut res = f();
        let el = t.elapsed();
        if res.is_ok() && el >= limit {
            res = Err(format!("over the {limit:?} limit"));
        }
        match res {
            Ok(detail) => println!("criterion {} PASS {title} ({:.2}s): {detail}", i + 1, el.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {title} ({:.2}s): {why}", i + 1, el.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
