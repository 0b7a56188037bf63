//! Weighted-partial CNF formulas and the WDIMACS text format.
//!
//! Hard clauses are written with weight `top`, which is always one more than
//! the total soft weight.

use std::fmt::Write as _;

use crate::{Error, Result};

/// Default multiplier turning real weights into integers.
pub const DEFAULT_PRECISION: u64 = 1_000_000;

/// A propositional variable, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

impl Var {
    /// Panics on 0.
    pub fn new(id: u32) -> Var {
        assert!(id > 0, "variables are numbered from 1");
        Var(id)
    }

    pub fn id(self) -> u32 {
        self.0
    }

    /// Zero-based position in an [`Assignment`].
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 as i32)
    }

    pub fn neg(self) -> Lit {
        Lit(-(self.0 as i32))
    }

    pub fn lit(self, positive: bool) -> Lit {
        if positive {
            self.pos()
        } else {
            self.neg()
        }
    }
}

/// A signed variable, stored in DIMACS form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub fn from_dimacs(x: i32) -> Option<Lit> {
        (x != 0 && x != i32::MIN).then_some(Lit(x))
    }

    pub fn to_dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        Var(self.0.unsigned_abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn negate(self) -> Lit {
        Lit(-self.0)
    }

    pub fn holds(self, a: &Assignment) -> bool {
        a.value(self.var()) == self.is_positive()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        self.negate()
    }
}

/// A total truth assignment; `values[v - 1]` is the value of variable `v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn all_false(num_vars: usize) -> Self {
        Assignment(vec![false; num_vars])
    }

    pub fn value(&self, v: Var) -> bool {
        self.0[v.index()]
    }

    pub fn set(&mut self, v: Var, value: bool) {
        self.0[v.index()] = value;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn clause_holds(clause: &[Lit], a: &Assignment) -> bool {
    clause.iter().any(|l| l.holds(a))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WcnfFormula {
    num_vars: usize,
    hard: Vec<Vec<Lit>>,
    soft: Vec<(Vec<Lit>, u64)>,
}

impl WcnfFormula {
    pub fn new(num_vars: usize) -> Self {
        WcnfFormula {
            num_vars,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Allocates a fresh variable.
    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars as u32)
    }

    /// Grows the variable range to at least `n`.
    pub fn reserve_vars(&mut self, n: usize) {
        self.num_vars = self.num_vars.max(n);
    }

    fn grow_to(&mut self, clause: &[Lit]) {
        if let Some(max) = clause.iter().map(|l| l.var().id() as usize).max() {
            self.num_vars = self.num_vars.max(max);
        }
    }

    pub fn add_hard(&mut self, clause: Vec<Lit>) {
        self.grow_to(&clause);
        self.hard.push(clause);
    }

    /// Adds a soft clause; a zero weight is raised to 1.
    pub fn add_soft(&mut self, clause: Vec<Lit>, weight: u64) {
        self.grow_to(&clause);
        self.soft.push((clause, weight.max(1)));
    }

    pub fn hard(&self) -> &[Vec<Lit>] {
        &self.hard
    }

    pub fn soft(&self) -> &[(Vec<Lit>, u64)] {
        &self.soft
    }

    pub fn num_clauses(&self) -> usize {
        self.hard.len() + self.soft.len()
    }

    pub fn total_soft_weight(&self) -> u64 {
        self.soft.iter().map(|(_, w)| *w).sum()
    }

    pub fn top(&self) -> u64 {
        self.total_soft_weight() + 1
    }

    pub fn hard_satisfied(&self, a: &Assignment) -> bool {
        self.hard.iter().all(|c| clause_holds(c, a))
    }

    /// Total weight of falsified soft clauses, or `None` if a hard clause fails.
    pub fn cost(&self, a: &Assignment) -> Option<u64> {
        if a.len() < self.num_vars || !self.hard_satisfied(a) {
            return None;
        }
        Some(
            self.soft
                .iter()
                .filter(|(c, _)| !clause_holds(c, a))
                .map(|(_, w)| *w)
                .sum(),
        )
    }

    /// WDIMACS text: header, hard clauses, then soft clauses, in insertion order.
    pub fn to_wdimacs(&self) -> String {
        let top = self.top();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "p wcnf {} {} {}",
            self.num_vars,
            self.num_clauses(),
            top
        );
        let mut line = |w: u64, c: &[Lit]| {
            let _ = write!(out, "{w}");
            for l in c {
                let _ = write!(out, " {}", l.to_dimacs());
            }
            out.push_str(" 0\n");
        };
        for c in &self.hard {
            line(top, c);
        }
        for (c, w) in &self.soft {
            line(*w, c);
        }
        out
    }

    /// Parses WDIMACS with a `p wcnf` header; clauses weighted at `top` or
    /// above are hard.
    pub fn parse_wdimacs(text: &str) -> Result<WcnfFormula> {
        let bad = |line: usize, message: &str| Error::MalformedWdimacs {
            line,
            message: message.to_string(),
        };
        let mut header = None;
        let mut f = WcnfFormula::default();
        let mut pending: Vec<i64> = Vec::new();
        let mut pending_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('p') {
                if header.is_some() {
                    return Err(bad(no, "duplicate header"));
                }
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 5 || parts[0] != "p" || parts[1] != "wcnf" {
                    return Err(bad(no, "expected `p wcnf <vars> <clauses> <top>`"));
                }
                let nums: Option<Vec<u64>> = parts[2..].iter().map(|s| s.parse().ok()).collect();
                let nums = nums.ok_or_else(|| bad(no, "non-numeric header field"))?;
                f.num_vars = nums[0] as usize;
                header = Some((nums[1] as usize, nums[2], no));
                continue;
            }
            let Some((_, top, _)) = header else {
                return Err(bad(no, "clause before header"));
            };
            for tok in line.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| bad(no, &format!("bad token `{tok}`")))?;
                if pending.is_empty() {
                    pending_line = no;
                    if x <= 0 {
                        return Err(bad(no, "clause weight must be positive"));
                    }
                    pending.push(x);
                    continue;
                }
                if x != 0 {
                    if x.unsigned_abs() as usize > f.num_vars {
                        return Err(bad(no, &format!("literal {x} exceeds variable count")));
                    }
                    pending.push(x);
                    continue;
                }
                let w = pending[0] as u64;
                let clause: Vec<Lit> = pending[1..].iter().map(|&x| Lit(x as i32)).collect();
                if w >= top {
                    f.hard.push(clause);
                } else {
                    f.soft.push((clause, w));
                }
                pending.clear();
            }
        }
        let (count, top, hline) = header.ok_or_else(|| bad(1, "missing header"))?;
        if !pending.is_empty() {
            return Err(bad(pending_line, "clause is missing its terminating 0"));
        }
        if f.num_clauses() != count {
            return Err(bad(
                hline,
                &format!("header declares {count} clauses, found {}", f.num_clauses()),
            ));
        }
        if top <= f.total_soft_weight() {
            return Err(bad(hline, "top must exceed the total soft weight"));
        }
        Ok(f)
    }
}

/// `max(1, round(w * precision))`.
pub fn scale_weight(w: f64, precision: u64) -> u64 {
    ((w * precision as f64).round() as u64).max(1)
}

pub fn scale_weights(weights: &[f64], precision: u64) -> Vec<u64> {
    weights
        .iter()
        .map(|&w| scale_weight(w, precision))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Satisfiable,
    Unsatisfiable,
    Unknown,
}

/// What an external solver printed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverOutput {
    pub status: SolverStatus,
    pub assignment: Option<Assignment>,
    /// Last `o` line, if any.
    pub reported_cost: Option<u64>,
}

/// Reads `s`, `o` and `v` lines. `v` lines may list signed literals or,
/// as in newer solvers, a single `0`/`1` string. Unmentioned variables are false.
pub fn parse_solver_output(text: &str, num_vars: usize) -> Result<SolverOutput> {
    let bad = |m: String| Error::MalformedSolverOutput(m);
    let mut status = None;
    let mut cost = None;
    let mut values: Option<Vec<bool>> = None;
    for line in text.lines() {
        let line = line.trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("s") => {
                let rest: Vec<&str> = parts.collect();
                status = Some(match rest.join(" ").as_str() {
                    "OPTIMUM FOUND" => SolverStatus::Optimal,
                    "SATISFIABLE" => SolverStatus::Satisfiable,
                    "UNSATISFIABLE" => SolverStatus::Unsatisfiable,
                    "UNKNOWN" => SolverStatus::Unknown,
                    other => return Err(bad(format!("unknown status `{other}`"))),
                });
            }
            Some("o") => {
                let v = parts.next().ok_or_else(|| bad("empty `o` line".into()))?;
                cost = Some(v.parse().map_err(|_| bad(format!("bad cost `{v}`")))?);
            }
            Some("v") => {
                let vals = values.get_or_insert_with(|| vec![false; num_vars]);
                let toks: Vec<&str> = parts.collect();
                let bitstring = toks.len() == 1
                    && toks[0].len() > 1
                    && toks[0].chars().all(|c| c == '0' || c == '1');
                if bitstring {
                    if toks[0].len() < num_vars {
                        return Err(bad(format!(
                            "assignment string has {} values, expected {num_vars}",
                            toks[0].len()
                        )));
                    }
                    for (v, c) in vals.iter_mut().zip(toks[0].chars()) {
                        *v = c == '1';
                    }
                    continue;
                }
                for tok in toks {
                    let x: i64 = tok
                        .parse()
                        .map_err(|_| bad(format!("bad literal `{tok}`")))?;
                    if x == 0 {
                        continue;
                    }
                    let idx = x.unsigned_abs() as usize;
                    if idx > num_vars {
                        return Err(bad(format!("literal {x} exceeds variable count")));
                    }
                    vals[idx - 1] = x > 0;
                }
            }
            _ => {}
        }
    }
    let status = status.ok_or_else(|| bad("no status line".into()))?;
    Ok(SolverOutput {
        status,
        assignment: values.map(Assignment),
        reported_cost: cost,
    })
}

/// Recomputes the cost of a solver's model and checks it against the claim.
pub fn verify_solver_output(f: &WcnfFormula, out: &SolverOutput) -> Result<(Assignment, u64)> {
    let a = out
        .assignment
        .clone()
        .ok_or_else(|| Error::MalformedSolverOutput("no assignment".into()))?;
    let cost = f.cost(&a).ok_or(Error::InvalidExternalModel)?;
    if let Some(reported) = out.reported_cost {
        if reported != cost {
            return Err(Error::CostMismatch {
                reported,
                recomputed: cost,
            });
        }
    }
    Ok((a, cost))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lit(x: i32) -> Lit {
        Lit::from_dimacs(x).unwrap()
    }

    fn example() -> WcnfFormula {
        let mut f = WcnfFormula::new(2);
        f.add_hard(vec![lit(1), lit(2)]);
        f.add_soft(vec![lit(-1)], 2);
        f.add_soft(vec![lit(-2)], 1);
        f
    }

    #[test]
    fn cost_counts_falsified_soft_weight() {
        let f = example();
        let costs: Vec<Option<u64>> = [[false, false], [false, true], [true, false], [true, true]]
            .iter()
            .map(|v| f.cost(&Assignment(v.to_vec())))
            .collect();
        assert_eq!(costs, vec![None, Some(1), Some(2), Some(3)]);
        let mut g = WcnfFormula::new(1);
        g.add_soft(vec![lit(1)], 4);
        assert_eq!(g.cost(&Assignment(vec![true])), Some(0));
    }

    #[test]
    fn weight_scaling() {
        assert_eq!(scale_weights(&[0.1, 1.0], 1000), vec![100, 1000]);
        assert_eq!(scale_weight(1e-9, 1000), 1);
        assert_eq!(scale_weights(&[3.0, 7.0], 1), vec![3, 7]);
    }

    #[test]
    fn wdimacs_text_is_exact() {
        let mut f = WcnfFormula::new(1);
        f.add_hard(vec![lit(1)]);
        assert_eq!(f.to_wdimacs(), "p wcnf 1 1 1\n1 1 0\n");
        let mut f = WcnfFormula::new(1);
        f.add_hard(vec![lit(1)]);
        f.add_soft(vec![lit(-1)], 2);
        assert_eq!(f.to_wdimacs(), "p wcnf 1 2 3\n3 1 0\n2 -1 0\n");
    }

    #[test]
    fn parse_rejects_broken_text() {
        for text in [
            "1 1 0\n",
            "p cnf 1 1\n1 0\n",
            "p wcnf 1 1 3\n3 2 0\n",
            "p wcnf 1 1 3\n3 1\n",
            "p wcnf 1 2 3\n3 1 0\n",
            "p wcnf 1 1 2\n2 1 0\n5 -1 0\n",
            "p wcnf 1 1 3\n0 1 0\n",
            "p wcnf 1 1 3\n3 x 0\n",
        ] {
            assert!(
                matches!(
                    WcnfFormula::parse_wdimacs(text),
                    Err(Error::MalformedWdimacs { .. })
                ),
                "{text:?}"
            );
        }
        let ok =
            WcnfFormula::parse_wdimacs("c comment\np wcnf 2 2 10\n10 1 2\n 0\n3 -1 0\n").unwrap();
        assert_eq!(ok.hard().len(), 1);
        assert_eq!(ok.soft(), &[(vec![lit(-1)], 3)]);
    }

    #[test]
    fn solver_output_forms() {
        let out = parse_solver_output("c hi\ns OPTIMUM FOUND\no 1\nv 1 -2 0\n", 2).unwrap();
        assert_eq!(out.status, SolverStatus::Optimal);
        assert_eq!(out.assignment, Some(Assignment(vec![true, false])));
        assert_eq!(out.reported_cost, Some(1));
        let out = parse_solver_output("s OPTIMUM FOUND\nv 01\n", 2).unwrap();
        assert_eq!(out.assignment, Some(Assignment(vec![false, true])));
        let out = parse_solver_output("s UNSATISFIABLE\n", 2).unwrap();
        assert_eq!(out.status, SolverStatus::Unsatisfiable);
        assert!(out.assignment.is_none());
        assert!(parse_solver_output("v 1 0\n", 1).is_err());
        assert!(parse_solver_output("s OPTIMUM FOUND\nv 3 0\n", 2).is_err());
    }

    #[test]
    fn verification_catches_lies() {
        let f = example();
        let honest = parse_solver_output("s OPTIMUM FOUND\no 1\nv -1 2\n", 2).unwrap();
        assert_eq!(verify_solver_output(&f, &honest).unwrap().1, 1);
        let wrong_cost = parse_solver_output("s OPTIMUM FOUND\no 0\nv -1 2\n", 2).unwrap();
        assert!(matches!(
            verify_solver_output(&f, &wrong_cost),
            Err(Error::CostMismatch {
                reported: 0,
                recomputed: 1
            })
        ));
        let broken = parse_solver_output("s OPTIMUM FOUND\nv -1 -2\n", 2).unwrap();
        assert!(matches!(
            verify_solver_output(&f, &broken),
            Err(Error::InvalidExternalModel)
        ));
    }

    pub(crate) fn arb_formula(
        max_vars: usize,
        max_clauses: usize,
        max_weight: u64,
    ) -> impl Strategy<Value = WcnfFormula> {
        (1..=max_vars).prop_flat_map(move |n| {
            let lit = (1..=n as i32, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v });
            let clause = prop::collection::vec(lit, 1..4);
            let weighted = (clause, prop::option::weighted(0.6, 1..=max_weight));
            prop::collection::vec(weighted, 0..=max_clauses).prop_map(move |cs| {
                let mut f = WcnfFormula::new(n);
                for (c, w) in cs {
                    let c: Vec<Lit> = c
                        .into_iter()
                        .map(|x| Lit::from_dimacs(x).unwrap())
                        .collect();
                    match w {
                        Some(w) => f.add_soft(c, w),
                        None => f.add_hard(c),
                    }
                }
                f
            })
        })
    }

    proptest! {
        #[test]
        fn wdimacs_round_trip(f in arb_formula(12, 30, 50)) {
            let back = WcnfFormula::parse_wdimacs(&f.to_wdimacs()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
