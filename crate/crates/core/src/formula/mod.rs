//! Rule representations and the operations on them.
//!
//! Literals are column indices into a [`BinaryDataset`](crate::data::BinaryDataset);
//! a negated literal is just another (materialized) column.

mod persist;
mod prune;
mod render;

use crate::data::{complement_index, FeatureDescriptor};
use crate::{Error, Result};

pub use persist::{load_model, read_model, save_model, write_model, Model, MODEL_VERSION};
pub use prune::{remove_redundant_literals, remove_redundant_term_literals};
pub use render::render;

/// A sorted, duplicate-free set of column indices.
///
/// Read as a disjunction inside a CNF and as a conjunction inside a DNF,
/// decision list or decision set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause(Vec<usize>);

impl Clause {
    pub fn new(literals: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = literals.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Clause(v)
    }

    pub fn empty() -> Self {
        Clause(Vec::new())
    }

    pub fn literals(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    fn check(&self, m: usize) -> Result<()> {
        match self.0.last() {
            Some(&j) if j >= m => Err(Error::IndexOutOfRange { index: j, width: m }),
            _ => Ok(()),
        }
    }

    /// Disjunctive reading: some literal is set.
    pub fn any(&self, sample: &[bool]) -> bool {
        self.0.iter().any(|&j| sample[j])
    }

    /// Conjunctive reading: every literal is set.
    pub fn all(&self, sample: &[bool]) -> bool {
        self.0.iter().all(|&j| sample[j])
    }

    /// `|self \ other| + |other \ self|`.
    pub fn symmetric_difference(&self, other: &Clause) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        a.len() + b.len() - 2 * common
    }
}

impl FromIterator<usize> for Clause {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Clause::new(iter)
    }
}

/// Conjunction of disjunctive clauses. With no clauses it is constant true.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CnfRule {
    pub clauses: Vec<Clause>,
}

/// Disjunction of conjunctive terms. With no terms it is constant false.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DnfRule {
    pub terms: Vec<Clause>,
}

/// Ordered `(conjunction, label)` pairs followed by a default label.
///
/// The default plays the role of the final always-true entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecisionList {
    pub rules: Vec<(Clause, usize)>,
    pub default: usize,
}

/// Unordered `(conjunction, label)` pairs plus a default label.
///
/// `rules` is kept in learning order, which doubles as the tie-break: when
/// several conjunctions fire, the earliest one wins.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecisionSet {
    pub rules: Vec<(Clause, usize)>,
    pub default: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Classifier {
    Cnf(CnfRule),
    Dnf(DnfRule),
    List(DecisionList),
    Set(DecisionSet),
}

impl CnfRule {
    pub fn new(clauses: Vec<Clause>) -> Self {
        CnfRule { clauses }
    }

    /// `k` empty clauses: predicts 0 everywhere while `k > 0`.
    pub fn empty_clauses(k: usize) -> Self {
        CnfRule {
            clauses: vec![Clause::empty(); k],
        }
    }

    pub fn k(&self) -> usize {
        self.clauses.len()
    }

    pub fn size(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    pub fn check(&self, m: usize) -> Result<()> {
        self.clauses.iter().try_for_each(|c| c.check(m))
    }

    /// Prediction without bounds checking beyond slice indexing.
    pub fn holds(&self, sample: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.any(sample))
    }

    pub fn evaluate(&self, sample: &[bool]) -> Result<bool> {
        self.check(sample.len())?;
        Ok(self.holds(sample))
    }

    /// Number of literals that differ clause by clause.
    pub fn hamming_distance(&self, other: &CnfRule) -> Result<usize> {
        if self.k() != other.k() {
            return Err(Error::ClauseCountMismatch {
                left: self.k(),
                right: other.k(),
            });
        }
        Ok(self
            .clauses
            .iter()
            .zip(&other.clauses)
            .map(|(a, b)| a.symmetric_difference(b))
            .sum())
    }
}

impl DnfRule {
    pub fn new(terms: Vec<Clause>) -> Self {
        DnfRule { terms }
    }

    pub fn size(&self) -> usize {
        self.terms.iter().map(Clause::len).sum()
    }

    pub fn check(&self, m: usize) -> Result<()> {
        self.terms.iter().try_for_each(|c| c.check(m))
    }

    pub fn holds(&self, sample: &[bool]) -> bool {
        self.terms.iter().any(|c| c.all(sample))
    }

    pub fn evaluate(&self, sample: &[bool]) -> Result<bool> {
        self.check(sample.len())?;
        Ok(self.holds(sample))
    }
}

fn first_firing(rules: &[(Clause, usize)], sample: &[bool]) -> Option<usize> {
    rules.iter().find(|(c, _)| c.all(sample)).map(|&(_, v)| v)
}

impl DecisionList {
    pub fn size(&self) -> usize {
        self.rules.iter().map(|(c, _)| c.len()).sum()
    }

    pub fn check(&self, m: usize) -> Result<()> {
        self.rules.iter().try_for_each(|(c, _)| c.check(m))
    }

    /// Label of the first satisfied conjunction, else the default.
    pub fn classify(&self, sample: &[bool]) -> usize {
        first_firing(&self.rules, sample).unwrap_or(self.default)
    }
}

impl DecisionSet {
    pub fn size(&self) -> usize {
        self.rules.iter().map(|(c, _)| c.len()).sum()
    }

    pub fn check(&self, m: usize) -> Result<()> {
        self.rules.iter().try_for_each(|(c, _)| c.check(m))
    }

    pub fn classify(&self, sample: &[bool]) -> usize {
        first_firing(&self.rules, sample).unwrap_or(self.default)
    }

    /// Indices of all rules whose conjunction fires on `sample`.
    pub fn firing(&self, sample: &[bool]) -> Vec<usize> {
        (0..self.rules.len())
            .filter(|&i| self.rules[i].0.all(sample))
            .collect()
    }
}

impl Classifier {
    pub fn size(&self) -> usize {
        match self {
            Classifier::Cnf(r) => r.size(),
            Classifier::Dnf(r) => r.size(),
            Classifier::List(r) => r.size(),
            Classifier::Set(r) => r.size(),
        }
    }

    pub fn check(&self, m: usize) -> Result<()> {
        match self {
            Classifier::Cnf(r) => r.check(m),
            Classifier::Dnf(r) => r.check(m),
            Classifier::List(r) => r.check(m),
            Classifier::Set(r) => r.check(m),
        }
    }

    /// Class index for `sample`; CNF and DNF rules answer 1 or 0.
    pub fn classify(&self, sample: &[bool]) -> usize {
        match self {
            Classifier::Cnf(r) => usize::from(r.holds(sample)),
            Classifier::Dnf(r) => usize::from(r.holds(sample)),
            Classifier::List(r) => r.classify(sample),
            Classifier::Set(r) => r.classify(sample),
        }
    }

    pub fn predict(&self, sample: &[bool]) -> Result<usize> {
        self.check(sample.len())?;
        Ok(self.classify(sample))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Classifier::Cnf(_) => "cnf",
            Classifier::Dnf(_) => "dnf",
            Classifier::List(_) => "list",
            Classifier::Set(_) => "set",
        }
    }
}

fn complement_clause(clause: &Clause, descriptors: &[FeatureDescriptor]) -> Result<Clause> {
    clause
        .literals()
        .iter()
        .map(|&j| {
            let d = descriptors.get(j).ok_or(Error::IndexOutOfRange {
                index: j,
                width: descriptors.len(),
            })?;
            complement_index(descriptors, j).ok_or_else(|| Error::MissingComplement(d.name.clone()))
        })
        .collect()
}

/// De Morgan: `NOT (C1 AND .. AND Ck)` as a DNF of complemented literals.
pub fn negate_cnf_to_dnf(rule: &CnfRule, descriptors: &[FeatureDescriptor]) -> Result<DnfRule> {
    Ok(DnfRule {
        terms: rule
            .clauses
            .iter()
            .map(|c| complement_clause(c, descriptors))
            .collect::<Result<_>>()?,
    })
}

/// De Morgan in the other direction.
pub fn negate_dnf_to_cnf(rule: &DnfRule, descriptors: &[FeatureDescriptor]) -> Result<CnfRule> {
    Ok(CnfRule {
        clauses: rule
            .terms
            .iter()
            .map(|c| complement_clause(c, descriptors))
            .collect::<Result<_>>()?,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::FeatureDescriptor;
    use proptest::prelude::*;

    /// Columns `x1, NOT x1, x2, NOT x2, ...` for `vars` variables.
    pub(crate) fn interleaved(vars: usize) -> Vec<FeatureDescriptor> {
        (0..vars)
            .flat_map(|v| {
                let d = FeatureDescriptor::binary(v, format!("x{}", v + 1));
                let n = d.negate();
                [d, n]
            })
            .collect()
    }

    pub(crate) fn expand(assignment: &[bool]) -> Vec<bool> {
        assignment.iter().flat_map(|&b| [b, !b]).collect()
    }

    fn cnf(clauses: &[&[usize]]) -> CnfRule {
        CnfRule::new(
            clauses
                .iter()
                .map(|c| Clause::new(c.iter().copied()))
                .collect(),
        )
    }

    #[test]
    fn clause_is_canonical() {
        assert_eq!(Clause::new([3, 1, 3]), Clause::new([1, 3]));
        assert_eq!(
            Clause::new([1, 2]).symmetric_difference(&Clause::new([2, 5, 6])),
            3
        );
    }

    #[test]
    fn cnf_evaluation_matches_hand_checked_cases() {
        // (x1 OR x3) AND (NOT x2 OR x3) over columns x1, x2, x3, NOT x2
        let r = cnf(&[&[0, 2], &[3, 2]]);
        assert!(r.evaluate(&[false, true, true, false]).unwrap());
        assert!(!r.evaluate(&[true, true, false, false]).unwrap());
        assert_eq!(r.size(), 4);
        assert!(CnfRule::default().evaluate(&[false]).unwrap());
        assert!(!cnf(&[&[]]).evaluate(&[true]).unwrap());
        assert!(matches!(
            r.evaluate(&[true, true]),
            Err(Error::IndexOutOfRange { index: 2, width: 2 })
        ));
    }

    #[test]
    fn dnf_evaluation() {
        assert!(!DnfRule::default().evaluate(&[true]).unwrap());
        assert!(DnfRule::new(vec![Clause::new([1])])
            .evaluate(&[false, true])
            .unwrap());
        assert!(DnfRule::new(vec![Clause::empty()])
            .evaluate(&[false])
            .unwrap());
    }

    #[test]
    fn hamming_distance_example() {
        // x1 = 0, NOT x1 = 1, x2 = 2
        let r = cnf(&[&[0, 2], &[1]]);
        let r2 = cnf(&[&[1, 2], &[1]]);
        assert_eq!(r.hamming_distance(&r2).unwrap(), 2);
        assert_eq!(r.hamming_distance(&r).unwrap(), 0);
        assert_eq!(CnfRule::empty_clauses(2).hamming_distance(&r).unwrap(), 3);
        assert!(matches!(
            r.hamming_distance(&cnf(&[&[0]])),
            Err(Error::ClauseCountMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn negation_swaps_columns() {
        let d = interleaved(2);
        let r = cnf(&[&[0, 3], &[1, 2]]);
        let n = negate_cnf_to_dnf(&r, &d).unwrap();
        assert_eq!(n.terms, vec![Clause::new([1, 2]), Clause::new([0, 3])]);
        assert_eq!(
            negate_cnf_to_dnf(&CnfRule::default(), &d).unwrap(),
            DnfRule::default()
        );
        let plain = vec![FeatureDescriptor::binary(0, "a")];
        assert!(matches!(
            negate_cnf_to_dnf(&cnf(&[&[0]]), &plain),
            Err(Error::MissingComplement(n)) if n == "a"
        ));
    }

    #[test]
    fn decision_list_takes_first_match() {
        let dl = DecisionList {
            rules: vec![(Clause::new([0]), 2), (Clause::new([1]), 1)],
            default: 0,
        };
        assert_eq!(dl.classify(&[true, true]), 2);
        assert_eq!(dl.classify(&[false, true]), 1);
        assert_eq!(dl.classify(&[false, false]), 0);
        let ds = DecisionSet {
            rules: dl.rules.clone(),
            default: 0,
        };
        assert_eq!(ds.firing(&[true, true]), vec![0, 1]);
        assert_eq!(ds.classify(&[true, true]), 2);
    }

    fn rule_strategy(vars: usize) -> impl Strategy<Value = CnfRule> {
        let m = 2 * vars;
        prop::collection::vec(prop::collection::btree_set(0..m, 0..4), 0..4)
            .prop_map(|cs| CnfRule::new(cs.into_iter().map(Clause::new).collect()))
    }

    proptest! {
        #[test]
        fn de_morgan_complements_every_assignment(rule in rule_strategy(5)) {
            let d = interleaved(5);
            let neg = negate_cnf_to_dnf(&rule, &d).unwrap();
            let back = negate_dnf_to_cnf(&neg, &d).unwrap();
            for bits in 0u32..(1 << 5) {
                let a: Vec<bool> = (0..5).map(|i| bits >> i & 1 == 1).collect();
                let s = expand(&a);
                prop_assert_eq!(neg.evaluate(&s).unwrap(), !rule.evaluate(&s).unwrap());
                prop_assert_eq!(back.evaluate(&s).unwrap(), rule.evaluate(&s).unwrap());
            }
        }

        #[test]
        fn hamming_is_a_metric(
            a in prop::collection::vec(prop::collection::btree_set(0usize..8, 0..5), 3),
            b in prop::collection::vec(prop::collection::btree_set(0usize..8, 0..5), 3),
            c in prop::collection::vec(prop::collection::btree_set(0usize..8, 0..5), 3),
        ) {
            let mk = |v: Vec<std::collections::BTreeSet<usize>>| CnfRule::new(v.into_iter().map(Clause::new).collect());
            let (a, b, c) = (mk(a), mk(b), mk(c));
            let ab = a.hamming_distance(&b).unwrap();
            prop_assert_eq!(ab, b.hamming_distance(&a).unwrap());
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ab <= a.hamming_distance(&c).unwrap() + c.hamming_distance(&b).unwrap());
        }

        #[test]
        fn decision_list_first_match_or_default(
            rules in prop::collection::vec((prop::collection::btree_set(0usize..6, 0..3), 0usize..3), 0..5),
            sample in prop::collection::vec(any::<bool>(), 6),
        ) {
            let dl = DecisionList {
                rules: rules.into_iter().map(|(c, v)| (Clause::new(c), v)).collect(),
                default: 3,
            };
            let expect = dl.rules.iter().find(|(c, _)| c.literals().iter().all(|&j| sample[j]))
                .map_or(3, |r| r.1);
            prop_assert_eq!(dl.classify(&sample), expect);
        }
    }
}
