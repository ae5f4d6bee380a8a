//! Brute-force strong bisimulation by enumerating every partition of the
//! states, with hull membership decided by Carathéodory subsets and
//! Gaussian elimination. Independent of the LP used by the library.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use pbb_core::equiv::StatePartition;
use pbb_core::rational::Rational;
use pbb_core::semantics::Universe;
use pbb_core::terms::{Action, NTerm};

/// All set partitions of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn go(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur[i] = b;
            go(i + 1, max.max(b), cur, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    go(1, 0, &mut cur, &mut out);
    out
}

/// Solves `m x = v` (rows of `m`), free unknowns set to zero.
fn basic_solution(mut m: Vec<Vec<Rational>>, mut v: Vec<Rational>) -> Option<Vec<Rational>> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        v.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        v[r] *= &inv;
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot = m[r].clone();
                for (x, p) in m[i].iter_mut().zip(&pivot) {
                    *x -= p * &f;
                }
                let t = &v[r] * &f;
                v[i] -= t;
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if v[r..].iter().any(|x| !x.is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = v[i].clone();
    }
    Some(x)
}

/// Whether `v` is a convex combination of `points`.
pub fn hull_contains(points: &[Vec<Rational>], v: &[Rational]) -> bool {
    let n = points.len();
    if n == 0 || n > 16 {
        return false;
    }
    for mask in 1u32..(1 << n) {
        let chosen: Vec<&Vec<Rational>> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &points[i]).collect();
        let mut m: Vec<Vec<Rational>> = (0..v.len()).map(|row| chosen.iter().map(|p| p[row].clone()).collect()).collect();
        m.push(vec![Rational::one(); chosen.len()]);
        let mut rhs = v.to_vec();
        rhs.push(Rational::one());
        if let Some(x) = basic_solution(m, rhs) {
            if x.iter().all(|c| !c.is_negative()) {
                return true;
            }
        }
    }
    false
}

fn vectors(u: &Universe, e: &NTerm, a: &Action, assign: &BTreeMap<&NTerm, usize>, blocks: usize) -> Vec<Vec<Rational>> {
    u.successors(e, a)
        .map(|d| {
            let mut v = vec![Rational::zero(); blocks];
            for (f, p) in d.iter() {
                v[assign[f]] += p;
            }
            v
        })
        .collect()
}

/// Every move of one state is matched by a combined move of the other.
pub fn is_strong_bisimulation(u: &Universe, states: &[&NTerm], rgs: &[usize]) -> bool {
    let blocks = rgs.iter().max().map_or(0, |m| m + 1);
    let assign: BTreeMap<&NTerm, usize> = states.iter().copied().zip(rgs.iter().copied()).collect();
    let actions: BTreeSet<Action> = u.actions();
    for (i, e) in states.iter().enumerate() {
        for (j, f) in states.iter().enumerate() {
            if i == j || rgs[i] != rgs[j] {
                continue;
            }
            for a in &actions {
                let ve = vectors(u, e, a, &assign, blocks);
                let vf = vectors(u, f, a, &assign, blocks);
                if ve.iter().any(|v| !hull_contains(&vf, v)) {
                    return false;
                }
            }
        }
    }
    true
}

/// The coarsest strong bisimulation, or `None` past `max_states`.
pub fn brute_strong_partition(u: &Universe, max_states: usize) -> Option<StatePartition> {
    let states: Vec<&NTerm> = u.states().collect();
    if states.len() > max_states {
        return None;
    }
    let valid: Vec<Vec<usize>> =
        set_partitions(states.len()).into_iter().filter(|rgs| is_strong_bisimulation(u, &states, rgs)).collect();
    let best = valid.iter().min_by_key(|rgs| rgs.iter().max().map_or(0, |m| m + 1))?;
    // Every bisimulation must refine the coarsest one.
    for rgs in &valid {
        for i in 0..states.len() {
            for j in 0..states.len() {
                if rgs[i] == rgs[j] && best[i] != best[j] {
                    return None;
                }
            }
        }
    }
    let groups: BTreeMap<usize, BTreeSet<NTerm>> = states.iter().zip(best).fold(BTreeMap::new(), |mut acc, (e, b)| {
        acc.entry(*b).or_default().insert((*e).clone());
        acc
    });
    Some(StatePartition::from_blocks(groups.into_values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pbb_core::semantics::build_universe;
    use pbb_core::terms::parse_distribution;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (0..7).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52, 203]);
    }

    #[test]
    fn hull() {
        let pts = vec![vec![r(1, 1), r(0, 1)], vec![r(0, 1), r(1, 1)], vec![r(1, 2), r(1, 2)]];
        assert!(hull_contains(&pts, &[r(1, 3), r(2, 3)]));
        assert!(hull_contains(&pts[2..], &[r(1, 2), r(1, 2)]));
        assert!(!hull_contains(&pts[2..], &[r(1, 3), r(2, 3)]));
        assert!(!hull_contains(&[], &[r(1, 1)]));
    }

    #[test]
    fn combined_match() {
        let d = parse_distribution(
            "{1/2: a.D(b.D(0)) + a.D(c.D(0)), 1/2: a.D(b.D(0)) + a.D(c.D(0)) + a.(D(b.D(0)) +[1/2] D(c.D(0)))}",
        )
        .unwrap();
        let u = build_universe([&d]);
        let pi = brute_strong_partition(&u, 8).unwrap();
        let s: Vec<NTerm> = d.support().cloned().collect();
        assert!(pi.same_block(&s[0], &s[1]));
        assert_eq!(pi.len(), 4);
    }
}
