//! Depth-first branch and bound over hard-clause unit propagation.
//!
//! Literals are coded as `2 * index + negated`. Each clause keeps counters of
//! its true and false literals, updated as the trail is processed; the lower
//! bound is the weight of soft clauses with every literal false.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Polarity, SolveOptions, SolveResult, SolveStatus};
use crate::wcnf::{Assignment, Lit, WcnfFormula};
use crate::{Error, Result};

const UNASSIGNED: i8 = -1;
/// How often (in decisions) the clock is read.
const CLOCK_STRIDE: u64 = 64;

fn code(l: Lit) -> u32 {
    (l.var().index() as u32) << 1 | u32::from(!l.is_positive())
}

struct Clause {
    lits: Vec<u32>,
    weight: u64,
    hard: bool,
}

struct Search {
    clauses: Vec<Clause>,
    occurs: Vec<Vec<u32>>,
    n_true: Vec<u32>,
    n_false: Vec<u32>,
    value: Vec<i8>,
    trail: Vec<u32>,
    qhead: usize,
    /// Weight of falsified soft clauses, including empty ones.
    bound: u64,
    /// Unresolved hard clauses per variable, split by sign.
    occ: Vec<[u32; 2]>,
    /// Total weight of unit soft clauses per literal code.
    unit_weight: Vec<u64>,
    /// Literal codes with unit soft weight, heaviest first.
    soft_order: Vec<u32>,
    all_soft_units: bool,
    priority: Vec<u32>,
    hint: Vec<i8>,
    polarity: Polarity,
}

impl Search {
    /// `None` when a hard clause is empty.
    fn new(f: &WcnfFormula, opts: &SolveOptions) -> Option<Search> {
        let n = f.num_vars();
        let mut s = Search {
            clauses: Vec::new(),
            occurs: vec![Vec::new(); 2 * n],
            n_true: Vec::new(),
            n_false: Vec::new(),
            value: vec![UNASSIGNED; n],
            trail: Vec::with_capacity(n),
            qhead: 0,
            bound: 0,
            occ: vec![[0, 0]; n],
            unit_weight: vec![0; 2 * n],
            soft_order: Vec::new(),
            all_soft_units: true,
            priority: (0..n as u32).collect(),
            hint: vec![UNASSIGNED; n],
            polarity: opts.polarity,
        };
        let hard = f.hard().iter().map(|c| (c, 0, true));
        let soft = f.soft().iter().map(|(c, w)| (c, *w, false));
        for (lits, weight, is_hard) in hard.chain(soft) {
            let mut lits: Vec<u32> = lits.iter().map(|&l| code(l)).collect();
            lits.sort_unstable();
            lits.dedup();
            if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
                continue;
            }
            if lits.is_empty() {
                if is_hard {
                    return None;
                }
                s.bound += weight;
                continue;
            }
            if !is_hard {
                if lits.len() == 1 {
                    s.unit_weight[lits[0] as usize] += weight;
                } else {
                    s.all_soft_units = false;
                }
            }
            let id = s.clauses.len() as u32;
            for &l in &lits {
                s.occurs[l as usize].push(id);
                if is_hard {
                    s.occ[(l >> 1) as usize][(l & 1) as usize] += 1;
                }
            }
            s.clauses.push(Clause {
                lits,
                weight,
                hard: is_hard,
            });
        }
        s.n_true = vec![0; s.clauses.len()];
        s.n_false = vec![0; s.clauses.len()];
        s.soft_order = (0..2 * n as u32)
            .filter(|&l| s.unit_weight[l as usize] > 0)
            .collect();
        s.soft_order
            .sort_by_key(|&l| (std::cmp::Reverse(s.unit_weight[l as usize]), l));
        if opts.seed != 0 {
            s.priority
                .shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
        }
        for &l in &opts.hint {
            if l.var().index() < n {
                s.hint[l.var().index()] = i8::from(l.is_positive());
            }
        }
        Some(s)
    }

    fn lit_value(&self, l: u32) -> i8 {
        let v = self.value[(l >> 1) as usize];
        if v == UNASSIGNED {
            v
        } else {
            v ^ (l & 1) as i8
        }
    }

    fn assign(&mut self, l: u32) {
        self.value[(l >> 1) as usize] = 1 - (l & 1) as i8;
        self.trail.push(l);
    }

    fn set_occ(&mut self, c: usize, delta: i32) {
        for i in 0..self.clauses[c].lits.len() {
            let l = self.clauses[c].lits[i];
            let slot = &mut self.occ[(l >> 1) as usize][(l & 1) as usize];
            *slot = slot.wrapping_add_signed(delta);
        }
    }

    /// Returns false on a hard conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let l = self.trail[self.qhead] as usize;
            self.qhead += 1;
            for i in 0..self.occurs[l].len() {
                let c = self.occurs[l][i] as usize;
                self.n_true[c] += 1;
                if self.n_true[c] == 1 && self.clauses[c].hard {
                    self.set_occ(c, -1);
                }
            }
            let mut conflict = false;
            for i in 0..self.occurs[l ^ 1].len() {
                let c = self.occurs[l ^ 1][i] as usize;
                self.n_false[c] += 1;
                if self.n_true[c] > 0 {
                    continue;
                }
                let clause = &self.clauses[c];
                let len = clause.lits.len() as u32;
                if self.n_false[c] == len {
                    if clause.hard {
                        conflict = true;
                    } else {
                        self.bound += clause.weight;
                    }
                } else if clause.hard && !conflict && self.n_false[c] + 1 == len {
                    // Literals assigned but not yet processed are not counted.
                    let mut unit = None;
                    let mut satisfied = false;
                    for &x in &clause.lits {
                        match self.lit_value(x) {
                            UNASSIGNED => unit = Some(x),
                            1 => satisfied = true,
                            _ => {}
                        }
                    }
                    if !satisfied {
                        match unit {
                            Some(x) => self.assign(x),
                            None => conflict = true,
                        }
                    }
                }
            }
            if conflict {
                return false;
            }
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let l = self.trail.pop().unwrap() as usize;
            if self.trail.len() < self.qhead {
                for i in 0..self.occurs[l ^ 1].len() {
                    let c = self.occurs[l ^ 1][i] as usize;
                    let clause = &self.clauses[c];
                    if !clause.hard
                        && self.n_true[c] == 0
                        && self.n_false[c] == clause.lits.len() as u32
                    {
                        self.bound -= clause.weight;
                    }
                    self.n_false[c] -= 1;
                }
                for i in 0..self.occurs[l].len() {
                    let c = self.occurs[l][i] as usize;
                    if self.n_true[c] == 1 && self.clauses[c].hard {
                        self.set_occ(c, 1);
                    }
                    self.n_true[c] -= 1;
                }
            }
            self.value[l >> 1] = UNASSIGNED;
        }
        self.qhead = self.qhead.min(mark);
    }

    /// Propagates, then satisfies every unit soft literal whose loss alone
    /// would reach `ub`, until nothing changes. False means prune.
    fn tighten(&mut self, ub: u64) -> bool {
        loop {
            if !self.propagate() || self.bound >= ub {
                return false;
            }
            if ub == u64::MAX {
                return true;
            }
            let gap = ub - self.bound;
            let before = self.trail.len();
            for i in 0..self.soft_order.len() {
                let l = self.soft_order[i];
                if self.unit_weight[l as usize] < gap {
                    break;
                }
                if self.lit_value(l) == UNASSIGNED {
                    self.assign(l);
                }
            }
            if self.trail.len() == before {
                return true;
            }
        }
    }

    /// Preferred first literal for branching on `v`.
    fn first_literal(&self, v: usize) -> u32 {
        let pos = (v as u32) << 1;
        let positive = match self.polarity {
            Polarity::False => false,
            Polarity::Occurrence => {
                let [p, n] = self.occ[v];
                if p != n {
                    p > n
                } else {
                    self.unit_weight[pos as usize] > self.unit_weight[pos as usize | 1]
                }
            }
        };
        pos | u32::from(!positive)
    }

    /// The next decision literal, or `None` when every remaining variable can
    /// be set without touching a hard clause.
    fn pick(&self) -> Option<u32> {
        // Most unresolved hard occurrences, then cheapest first value, then priority.
        let mut best: Option<(u32, u64, u32, u32)> = None;
        for v in 0..self.value.len() {
            if self.value[v] != UNASSIGNED {
                continue;
            }
            let occ = self.occ[v][0] + self.occ[v][1];
            if occ == 0 {
                continue;
            }
            let lit = self.first_literal(v);
            let loss = self.unit_weight[(lit ^ 1) as usize];
            let better = match best {
                None => true,
                Some((o, w, p, _)) => {
                    occ > o || (occ == o && (loss < w || (loss == w && self.priority[v] < p)))
                }
            };
            if better {
                best = Some((occ, loss, self.priority[v], lit));
            }
        }
        if let Some((.., lit)) = best {
            return Some(lit);
        }
        if self.all_soft_units {
            return None;
        }
        // Non-unit soft clauses still open: satisfy one of their literals.
        for (c, clause) in self.clauses.iter().enumerate() {
            if clause.hard || self.n_true[c] > 0 {
                continue;
            }
            if let Some(&l) = clause
                .lits
                .iter()
                .find(|&&l| self.lit_value(l) == UNASSIGNED)
            {
                return Some(l);
            }
        }
        None
    }

    /// Completes a leaf: free variables take the value losing less unit soft
    /// weight. Returns the cost and the full assignment.
    fn leaf(&self) -> (u64, Vec<bool>) {
        let mut cost = self.bound;
        let values = (0..self.value.len())
            .map(|v| match self.value[v] {
                UNASSIGNED => {
                    let keep_true = self.unit_weight[2 * v];
                    let keep_false = self.unit_weight[2 * v + 1];
                    cost += keep_true.min(keep_false);
                    keep_false < keep_true
                }
                x => x == 1,
            })
            .collect();
        (cost, values)
    }

    /// Assigns free variables in index order, preferring `prefer(v)` and
    /// flipping once on conflict. Leaves the trail as it found it.
    fn dive(&mut self, prefer: impl Fn(usize) -> bool) -> Option<(u64, Vec<bool>)> {
        let root = self.trail.len();
        for v in 0..self.value.len() {
            if self.value[v] != UNASSIGNED {
                continue;
            }
            let lit = (v as u32) << 1 | u32::from(!prefer(v));
            let mark = self.trail.len();
            self.assign(lit);
            if !self.propagate() {
                self.undo(mark);
                self.assign(lit ^ 1);
                if !self.propagate() {
                    self.undo(root);
                    return None;
                }
            }
        }
        let found = self.leaf();
        self.undo(root);
        Some(found)
    }
}

/// Anytime exact solver. Without limits the result is optimal; with a
/// timeout or node limit the best assignment found so far is returned.
pub fn solve_branch_and_bound(f: &WcnfFormula, opts: &SolveOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let mut s = Search::new(f, opts).ok_or(Error::HardUnsat)?;
    let n = f.num_vars();

    let mut units = Vec::new();
    for c in &s.clauses {
        if c.hard && c.lits.len() == 1 {
            units.push(c.lits[0]);
        }
    }
    for l in units {
        match s.lit_value(l) {
            UNASSIGNED => s.assign(l),
            0 => return Err(Error::HardUnsat),
            _ => {}
        }
    }
    if !s.propagate() {
        return Err(Error::HardUnsat);
    }

    let mut best: Option<(u64, Vec<bool>)> = s.dive(|_| false);
    if !opts.hint.is_empty() {
        let hint = s.hint.clone();
        if let Some(found) = s.dive(|v| hint[v] == 1) {
            if best.as_ref().is_none_or(|b| found.0 < b.0) {
                best = Some(found);
            }
        }
    }
    let mut trace: Vec<u64> = best.iter().map(|b| b.0).collect();

    let timed_out = |nodes: u64| {
        opts.timeout
            .is_some_and(|t| nodes.is_multiple_of(CLOCK_STRIDE) && start.elapsed() >= t)
    };
    let mut nodes = 0u64;
    let mut complete = true;
    // (literal, trail length before it, whether this is the second value)
    let mut stack: Vec<(u32, usize, bool)> = Vec::new();
    'search: loop {
        let ub = best.as_ref().map_or(u64::MAX, |b| b.0);
        if s.tighten(ub) {
            match s.pick() {
                Some(lit) => {
                    if opts.node_limit.is_some_and(|limit| nodes >= limit) || timed_out(nodes) {
                        complete = false;
                        break 'search;
                    }
                    nodes += 1;
                    stack.push((lit, s.trail.len(), false));
                    s.assign(lit);
                    continue;
                }
                None => {
                    let found = s.leaf();
                    if found.0 < ub {
                        trace.push(found.0);
                        best = Some(found);
                    }
                }
            }
        }
        loop {
            let Some((lit, mark, second)) = stack.pop() else {
                break 'search;
            };
            s.undo(mark);
            if !second {
                stack.push((lit ^ 1, mark, true));
                s.assign(lit ^ 1);
                continue 'search;
            }
        }
    }

    let (cost, values) = match best {
        Some(b) => b,
        None if complete => return Err(Error::HardUnsat),
        None => return Err(Error::NoIncumbent),
    };
    debug_assert_eq!(values.len(), n);
    Ok(SolveResult {
        assignment: Assignment(values),
        cost,
        status: if complete {
            SolveStatus::Optimal
        } else {
            SolveStatus::BestEffort
        },
        elapsed: start.elapsed(),
        nodes,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use proptest::prelude::*;

    use super::*;
    use crate::solver::solve_brute_force;
    use crate::wcnf::tests::arb_formula;

    fn lit(x: i32) -> Lit {
        Lit::from_dimacs(x).unwrap()
    }

    fn pigeonhole(holes: usize) -> WcnfFormula {
        // holes + 1 pigeons, each softly wanting a hole.
        let pigeons = holes + 1;
        let var = |p: usize, h: usize| Lit::from_dimacs((p * holes + h + 1) as i32).unwrap();
        let mut f = WcnfFormula::new(pigeons * holes);
        for p in 0..pigeons {
            f.add_soft((0..holes).map(|h| var(p, h)).collect(), 1);
        }
        for h in 0..holes {
            for p in 0..pigeons {
                for q in p + 1..pigeons {
                    f.add_hard(vec![!var(p, h), !var(q, h)]);
                }
            }
        }
        f
    }

    #[test]
    fn small_examples() {
        let mut f = WcnfFormula::new(3);
        f.add_hard(vec![lit(1), lit(2)]);
        f.add_hard(vec![lit(-1), lit(3)]);
        f.add_soft(vec![lit(-2)], 4);
        f.add_soft(vec![lit(-3)], 3);
        f.add_soft(vec![lit(-1)], 1);
        let r = solve_branch_and_bound(&f, &SolveOptions::unlimited()).unwrap();
        assert_eq!(r.cost, 4);
        assert_eq!(f.cost(&r.assignment), Some(4));
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.trace.windows(2).all(|w| w[0] > w[1]));

        let mut g = WcnfFormula::new(2);
        g.add_hard(vec![lit(1), lit(2)]);
        g.add_hard(vec![lit(-1), lit(2)]);
        g.add_hard(vec![lit(1), lit(-2)]);
        g.add_hard(vec![lit(-1), lit(-2)]);
        assert!(matches!(
            solve_branch_and_bound(&g, &SolveOptions::unlimited()),
            Err(Error::HardUnsat)
        ));

        let mut e = WcnfFormula::new(1);
        e.add_hard(vec![]);
        assert!(matches!(
            solve_branch_and_bound(&e, &SolveOptions::unlimited()),
            Err(Error::HardUnsat)
        ));
    }

    #[test]
    fn pigeonhole_optimum() {
        let f = pigeonhole(4);
        let r = solve_branch_and_bound(&f, &SolveOptions::unlimited()).unwrap();
        assert_eq!(r.cost, 1);
        assert_eq!(r.status, SolveStatus::Optimal);
    }

    #[test]
    fn limits_give_best_effort() {
        let f = pigeonhole(6);
        let opts = SolveOptions {
            timeout: Some(Duration::ZERO),
            ..SolveOptions::default()
        };
        let r = solve_branch_and_bound(&f, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::BestEffort);
        assert!(f.hard_satisfied(&r.assignment));
        assert_eq!(f.cost(&r.assignment), Some(r.cost));

        let opts = SolveOptions {
            node_limit: Some(5),
            ..SolveOptions::default()
        };
        let a = solve_branch_and_bound(&f, &opts).unwrap();
        let b = solve_branch_and_bound(&f, &opts).unwrap();
        assert_eq!(a.status, SolveStatus::BestEffort);
        assert_eq!(a.nodes, 5);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn hint_seeds_the_incumbent() {
        let mut f = WcnfFormula::new(3);
        for v in 1..=3 {
            f.add_soft(vec![lit(v)], 1);
        }
        let opts = SolveOptions {
            node_limit: Some(0),
            hint: vec![lit(1), lit(2), lit(3)],
            ..SolveOptions::default()
        };
        let r = solve_branch_and_bound(&f, &opts).unwrap();
        assert_eq!(r.cost, 0);
    }

    fn check_against_oracle(
        f: &WcnfFormula,
        opts: &SolveOptions,
    ) -> std::result::Result<(), TestCaseError> {
        let oracle = solve_brute_force(f);
        let got = solve_branch_and_bound(f, opts);
        match (oracle, got) {
            (Ok(o), Ok(g)) => {
                prop_assert_eq!(g.cost, o.cost);
                prop_assert_eq!(f.cost(&g.assignment), Some(g.cost));
                prop_assert_eq!(g.status, SolveStatus::Optimal);
                prop_assert!(g.trace.windows(2).all(|w| w[0] > w[1]));
            }
            (Err(Error::HardUnsat), Err(Error::HardUnsat)) => {}
            (o, g) => prop_assert!(
                false,
                "oracle {:?} vs bnb {:?}",
                o.map(|r| r.cost),
                g.map(|r| r.cost)
            ),
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_brute_force(f in arb_formula(12, 40, 20)) {
            check_against_oracle(&f, &SolveOptions::unlimited())?;
        }

        #[test]
        fn matches_brute_force_any_heuristic(
            f in arb_formula(10, 30, 9),
            seed in 0u64..4,
            false_first in any::<bool>(),
            hint in prop::collection::vec(any::<bool>(), 10),
        ) {
            let opts = SolveOptions {
                seed,
                polarity: if false_first { Polarity::False } else { Polarity::Occurrence },
                hint: hint
                    .iter()
                    .enumerate()
                    .take(f.num_vars())
                    .map(|(i, &b)| crate::wcnf::Var::new(i as u32 + 1).lit(b))
                    .collect(),
                ..SolveOptions::default()
            };
            check_against_oracle(&f, &opts)?;
        }
    }
}
