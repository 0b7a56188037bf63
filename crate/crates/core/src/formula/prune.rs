use std::collections::HashMap;

use super::{Clause, CnfRule};
use crate::data::{CmpOp, FeatureDescriptor};

/// For each `(column, op)` group of threshold literals, keep the single
/// literal that implies (conjunctive) or is implied by (disjunctive) the rest.
fn prune(clause: &Clause, descriptors: &[FeatureDescriptor], disjunctive: bool) -> Clause {
    let mut best: HashMap<(usize, CmpOp), (f64, usize)> = HashMap::new();
    for &j in clause.literals() {
        let Some(d) = descriptors.get(j) else {
            continue;
        };
        let (Some(group), Some(op), Some(t)) = (d.sibling_group(), d.op(), d.tval()) else {
            continue;
        };
        // In a disjunction the weakest comparison subsumes the others:
        // smallest `x >= t`, largest `x < t`. A conjunction wants the reverse.
        let prefer_smaller = (op == CmpOp::Ge) == disjunctive;
        best.entry((group, op))
            .and_modify(|(bt, bj)| {
                let better = if prefer_smaller { t < *bt } else { t > *bt };
                if better {
                    *bt = t;
                    *bj = j;
                }
            })
            .or_insert((t, j));
    }
    clause
        .literals()
        .iter()
        .copied()
        .filter(|&j| {
            let Some(d) = descriptors.get(j) else {
                return true;
            };
            match (d.sibling_group(), d.op()) {
                (Some(g), Some(op)) => best[&(g, op)].1 == j,
                _ => true,
            }
        })
        .collect()
}

/// Drops sibling threshold literals that cannot change a CNF clause's value.
///
/// Within a clause `x >= a OR x >= b` with `a < b` the second literal is
/// implied by the first, and `x < a OR x < b` reduces to `x < b`. The
/// result predicts identically on every sample produced from raw values.
pub fn remove_redundant_literals(rule: &CnfRule, descriptors: &[FeatureDescriptor]) -> CnfRule {
    CnfRule {
        clauses: rule
            .clauses
            .iter()
            .map(|c| prune(c, descriptors, true))
            .collect(),
    }
}

/// Conjunctive counterpart: `x >= a AND x >= b` keeps the larger bound.
pub fn remove_redundant_term_literals(term: &Clause, descriptors: &[FeatureDescriptor]) -> Clause {
    prune(term, descriptors, false)
}
