use std::time::Instant;

use super::{SolveResult, SolveStatus};
use crate::wcnf::{Assignment, WcnfFormula};
use crate::{Error, Result};

pub const BRUTE_FORCE_VAR_CAP: usize = 26;

/// Tries all `2^n` assignments; the first one of minimum cost wins.
pub fn solve_brute_force(f: &WcnfFormula) -> Result<SolveResult> {
    let n = f.num_vars();
    if n > BRUTE_FORCE_VAR_CAP {
        return Err(Error::VarCapExceeded {
            vars: n,
            cap: BRUTE_FORCE_VAR_CAP,
        });
    }
    let start = Instant::now();
    // Clauses as (positive mask, negative mask) over the bits of the counter.
    let masks = |c: &[crate::wcnf::Lit]| {
        c.iter().fold((0u64, 0u64), |(p, q), l| {
            let bit = 1u64 << l.var().index();
            if l.is_positive() {
                (p | bit, q)
            } else {
                (p, q | bit)
            }
        })
    };
    let hard: Vec<(u64, u64)> = f.hard().iter().map(|c| masks(c)).collect();
    let soft: Vec<((u64, u64), u64)> = f.soft().iter().map(|(c, w)| (masks(c), *w)).collect();
    let sat = |(p, q): (u64, u64), bits: u64| bits & p != 0 || !bits & q != 0;

    let mut best: Option<(u64, u64)> = None;
    let mut trace = Vec::new();
    for bits in 0u64..(1u64 << n) {
        if !hard.iter().all(|&c| sat(c, bits)) {
            continue;
        }
        let bound = best.map_or(u64::MAX, |(c, _)| c);
        let mut cost = 0u64;
        for &(c, w) in &soft {
            if !sat(c, bits) {
                cost += w;
                if cost >= bound {
                    break;
                }
            }
        }
        if cost < bound {
            best = Some((cost, bits));
            trace.push(cost);
        }
    }
    let (cost, bits) = best.ok_or(Error::HardUnsat)?;
    Ok(SolveResult {
        assignment: Assignment((0..n).map(|v| bits >> v & 1 == 1).collect()),
        cost,
        status: SolveStatus::Optimal,
        elapsed: start.elapsed(),
        nodes: 0,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wcnf::Lit;

    fn lit(x: i32) -> Lit {
        Lit::from_dimacs(x).unwrap()
    }

    #[test]
    fn small_examples() {
        let mut f = WcnfFormula::new(2);
        f.add_hard(vec![lit(1), lit(2)]);
        f.add_soft(vec![lit(-1)], 2);
        f.add_soft(vec![lit(-2)], 1);
        let r = solve_brute_force(&f).unwrap();
        assert_eq!(r.cost, 1);
        assert_eq!(r.assignment, Assignment(vec![false, true]));
        assert_eq!(r.status, SolveStatus::Optimal);

        let r = solve_brute_force(&WcnfFormula::new(0)).unwrap();
        assert_eq!(r.cost, 0);

        let mut g = WcnfFormula::new(1);
        g.add_hard(vec![lit(1)]);
        g.add_hard(vec![lit(-1)]);
        assert!(matches!(solve_brute_force(&g), Err(Error::HardUnsat)));

        assert!(matches!(
            solve_brute_force(&WcnfFormula::new(27)),
            Err(Error::VarCapExceeded { vars: 27, cap: 26 })
        ));
    }
}
