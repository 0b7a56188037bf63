//! Tabular ingestion and binarization.
//!
//! Raw CSV columns are turned into a 0/1 feature matrix: continuous columns
//! are discretized with equal-width split points (interval membership in
//! closed mode, one-sided threshold comparisons in open mode), categorical
//! columns are one-hot encoded and binary columns pass through. Negated
//! copies of the columns are appended afterwards so that clauses can use
//! complemented literals.

mod binarize;
mod csv_io;
mod descriptor;

use std::ops::Range;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub use binarize::{binarize, transform_row, ColumnEncoding, ColumnSpec, DiscretizationSpec};
pub use csv_io::{load_csv, parse_csv};
pub use descriptor::{fmt_num, CmpOp, FeatureDescriptor, LiteralKey, Origin};

/// Declared or inferred type of a raw column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    Binary,
}

/// How continuous columns are cut into binary features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DiscretizationMode {
    /// One feature per interval `[s_i, s_{i+1})`; exactly one is set per row.
    #[default]
    Closed,
    /// Two features `x >= t` and `x < t` per threshold `t`.
    Open,
}

impl std::str::FromStr for DiscretizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Self::Closed),
            "open" => Ok(Self::Open),
            other => Err(Error::InvalidConfig(format!(
                "unknown discretization mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for DiscretizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Closed => "closed",
            Self::Open => "open",
        })
    }
}

/// A single parsed cell.
#[derive(Clone, Debug, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
    Bool(bool),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnValues {
    Continuous(Vec<f64>),
    Categorical(Vec<String>),
    Binary(Vec<bool>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            Self::Continuous(v) => v.len(),
            Self::Categorical(v) => v.len(),
            Self::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            Self::Continuous(_) => ColumnKind::Continuous,
            Self::Categorical(_) => ColumnKind::Categorical,
            Self::Binary(_) => ColumnKind::Binary,
        }
    }

    pub fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            Self::Continuous(v) => Self::Continuous(rows.iter().map(|&r| v[r]).collect()),
            Self::Categorical(v) => Self::Categorical(rows.iter().map(|&r| v[r].clone()).collect()),
            Self::Binary(v) => Self::Binary(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    pub fn value(&self, row: usize) -> RawValue {
        match self {
            Self::Continuous(v) => RawValue::Number(v[row]),
            Self::Categorical(v) => RawValue::Text(v[row].clone()),
            Self::Binary(v) => RawValue::Bool(v[row]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: ColumnValues,
}

/// Feature columns plus an integer-coded target column.
///
/// `class_labels[c]` is the original spelling of class `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub columns: Vec<RawColumn>,
    pub target_name: String,
    pub class_labels: Vec<String>,
    pub target: Vec<usize>,
}

impl RawDataset {
    pub fn new(
        columns: Vec<RawColumn>,
        target_name: impl Into<String>,
        class_labels: Vec<String>,
        target: Vec<usize>,
    ) -> Result<Self> {
        let ds = RawDataset {
            columns,
            target_name: target_name.into(),
            class_labels,
            target,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn row_count(&self) -> usize {
        self.target.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.target.len();
        for col in &self.columns {
            if col.values.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has {} values, expected {n}",
                    col.name,
                    col.values.len()
                )));
            }
            if let ColumnValues::Continuous(v) = &col.values {
                if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::InvalidDataset(format!(
                        "column `{}` holds non-finite value {bad}",
                        col.name
                    )));
                }
            }
        }
        if let Some(&c) = self.target.iter().find(|&&c| c >= self.class_labels.len()) {
            return Err(Error::InvalidDataset(format!("class id {c} has no label")));
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn row_values(&self, row: usize) -> Vec<RawValue> {
        self.columns.iter().map(|c| c.values.value(row)).collect()
    }

    /// The given rows, in the given order. Class labels are kept even if
    /// some class no longer occurs.
    pub fn subset(&self, rows: &[usize]) -> RawDataset {
        RawDataset {
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn {
                    name: c.name.clone(),
                    values: c.values.select(rows),
                })
                .collect(),
            target_name: self.target_name.clone(),
            class_labels: self.class_labels.clone(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
        }
    }

    /// Relabels the target as `positive` vs. everything else.
    pub fn one_vs_rest(&self, positive: &str) -> Result<RawDataset> {
        let pos = self
            .class_labels
            .iter()
            .position(|l| l == positive)
            .ok_or_else(|| Error::InvalidDataset(format!("no class labelled `{positive}`")))?;
        Ok(RawDataset {
            columns: self.columns.clone(),
            target_name: self.target_name.clone(),
            class_labels: vec![format!("not {positive}"), positive.to_string()],
            target: self.target.iter().map(|&c| usize::from(c == pos)).collect(),
        })
    }
}

/// An `n x m` 0/1 feature matrix with class labels and column metadata.
///
/// The binary learners read labels as `y_l = 1` iff `label == 1`; the
/// decision-list and decision-set learners accept any number of classes.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    rows: Vec<Vec<bool>>,
    labels: Vec<usize>,
    num_classes: usize,
    descriptors: Arc<[FeatureDescriptor]>,
}

impl BinaryDataset {
    pub fn new(
        rows: Vec<Vec<bool>>,
        labels: Vec<usize>,
        descriptors: impl Into<Arc<[FeatureDescriptor]>>,
    ) -> Result<Self> {
        let descriptors = descriptors.into();
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some((l, r)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != descriptors.len())
        {
            return Err(Error::InvalidDataset(format!(
                "row {l} has {} features, expected {}",
                r.len(),
                descriptors.len()
            )));
        }
        let num_classes = labels.iter().max().map_or(2, |&c| (c + 1).max(2));
        Ok(BinaryDataset {
            rows,
            labels,
            num_classes,
            descriptors,
        })
    }

    /// Builds a dataset over plain binary columns named `x1 .. xm`.
    pub fn from_bits(rows: Vec<Vec<bool>>, labels: Vec<usize>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let descriptors: Vec<_> = (0..m)
            .map(|j| FeatureDescriptor::binary(j, format!("x{}", j + 1)))
            .collect();
        Self::new(rows, labels, descriptors)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn row(&self, l: usize) -> &[bool] {
        &self.rows[l]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, l: usize) -> usize {
        self.labels[l]
    }

    /// Binary view of the label of sample `l`.
    pub fn is_positive(&self, l: usize) -> bool {
        self.labels[l] == 1
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn shared_descriptors(&self) -> Arc<[FeatureDescriptor]> {
        Arc::clone(&self.descriptors)
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&c| c == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.n() - self.positives()
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&c| c <= 1)
    }

    /// Rows `indices` in the given order; shares descriptors with `self`.
    pub fn subset(&self, indices: &[usize]) -> BinaryDataset {
        BinaryDataset {
            rows: indices.iter().map(|&l| self.rows[l].clone()).collect(),
            labels: indices.iter().map(|&l| self.labels[l]).collect(),
            num_classes: self.num_classes,
            descriptors: Arc::clone(&self.descriptors),
        }
    }

    /// Same features, different labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<BinaryDataset> {
        if labels.len() != self.n() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n()
            )));
        }
        let num_classes = labels
            .iter()
            .max()
            .map_or(2, |&c| (c + 1).max(2))
            .max(self.num_classes);
        Ok(BinaryDataset {
            rows: self.rows.clone(),
            labels,
            num_classes,
            descriptors: Arc::clone(&self.descriptors),
        })
    }

    /// Binary labels flipped: class 1 becomes 0 and everything else 1.
    pub fn complemented(&self) -> BinaryDataset {
        BinaryDataset {
            rows: self.rows.clone(),
            labels: self.labels.iter().map(|&c| usize::from(c != 1)).collect(),
            num_classes: 2,
            descriptors: Arc::clone(&self.descriptors),
        }
    }

    /// Appends the rows of `other`, which must share this dataset's columns.
    pub fn concat(&self, other: &BinaryDataset) -> Result<BinaryDataset> {
        if other.descriptors != self.descriptors {
            return Err(Error::InvalidDataset(
                "cannot concatenate datasets with different columns".into(),
            ));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(BinaryDataset {
            rows,
            labels,
            num_classes: self.num_classes.max(other.num_classes),
            descriptors: Arc::clone(&self.descriptors),
        })
    }

    /// Index of the column holding the complement of column `j`, if any.
    pub fn complement_index(&self, j: usize) -> Option<usize> {
        complement_index(&self.descriptors, j)
    }
}

pub(crate) fn complement_index(descriptors: &[FeatureDescriptor], j: usize) -> Option<usize> {
    let target = descriptors.get(j)?.complement_key();
    descriptors.iter().position(|d| d.literal_key() == target)
}

/// Appends a negated copy of every column (originals first, then negations).
pub fn augment_negations(ds: &BinaryDataset) -> BinaryDataset {
    let all: Vec<usize> = (0..ds.m()).collect();
    append_negations(ds, &all)
}

/// Appends negated copies only for columns whose complement is absent.
///
/// Open-mode threshold features already come in `>=`/`<` pairs, so only the
/// categorical and binary columns gain new negations.
pub fn augment_missing_negations(ds: &BinaryDataset) -> BinaryDataset {
    let missing: Vec<usize> = (0..ds.m())
        .filter(|&j| ds.complement_index(j).is_none())
        .collect();
    append_negations(ds, &missing)
}

fn append_negations(ds: &BinaryDataset, columns: &[usize]) -> BinaryDataset {
    let mut descriptors: Vec<FeatureDescriptor> = ds.descriptors.to_vec();
    descriptors.extend(columns.iter().map(|&j| ds.descriptors[j].negate()));
    let rows = ds
        .rows
        .iter()
        .map(|r| {
            let mut out = r.clone();
            out.extend(columns.iter().map(|&j| !r[j]));
            out
        })
        .collect();
    BinaryDataset {
        rows,
        labels: ds.labels.clone(),
        num_classes: ds.num_classes,
        descriptors: descriptors.into(),
    }
}

/// `TP_j - FP_j` for every column `j`.
pub fn rank_features(ds: &BinaryDataset) -> Vec<i64> {
    let mut scores = vec![0i64; ds.m()];
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        let delta = if label == 1 { 1 } else { -1 };
        for (score, _) in scores.iter_mut().zip(row).filter(|(_, &bit)| bit) {
            *score += delta;
        }
    }
    scores
}

/// Result of dropping columns with negative rank.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub dataset: BinaryDataset,
    /// `kept[new_index] = original_index`.
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

/// Removes every column `j` with `TP_j - FP_j < 0`.
pub fn eliminate_features(ds: &BinaryDataset) -> Result<Elimination> {
    let scores = rank_features(ds);
    let (kept, removed): (Vec<usize>, Vec<usize>) = (0..ds.m()).partition(|&j| scores[j] >= 0);
    if kept.is_empty() {
        return Err(Error::NoInformativeFeatures);
    }
    let descriptors: Vec<_> = kept.iter().map(|&j| ds.descriptors[j].clone()).collect();
    let rows = ds
        .rows
        .iter()
        .map(|r| kept.iter().map(|&j| r[j]).collect())
        .collect();
    Ok(Elimination {
        dataset: BinaryDataset {
            rows,
            labels: ds.labels.clone(),
            num_classes: ds.num_classes,
            descriptors: descriptors.into(),
        },
        kept,
        removed,
    })
}

/// Contiguous batch ranges: `ceil(n / batch_size)` batches per round.
pub fn batch_ranges(n: usize, batch_size: usize, rounds: usize) -> Vec<Range<usize>> {
    let batch_size = batch_size.max(1);
    let one_round: Vec<Range<usize>> = (0..n)
        .step_by(batch_size)
        .map(|start| start..(start + batch_size).min(n))
        .collect();
    (0..rounds)
        .flat_map(|_| one_round.iter().cloned())
        .collect()
}

/// Sequential mini-batches, the whole sequence repeated `rounds` times.
pub fn split_batches(ds: &BinaryDataset, batch_size: usize, rounds: usize) -> Vec<BinaryDataset> {
    batch_ranges(ds.n(), batch_size, rounds)
        .into_iter()
        .map(|r| ds.subset(&r.collect::<Vec<_>>()))
        .collect()
}

/// Like [`split_batches`] but over a seeded permutation of the rows.
pub fn split_batches_shuffled(
    ds: &BinaryDataset,
    batch_size: usize,
    rounds: usize,
    seed: u64,
) -> Vec<BinaryDataset> {
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    batch_ranges(ds.n(), batch_size, rounds)
        .into_iter()
        .map(|r| ds.subset(&order[r]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(rows: &[&[u8]]) -> Vec<Vec<bool>> {
        rows.iter()
            .map(|r| r.iter().map(|&b| b == 1).collect())
            .collect()
    }

    #[test]
    fn negation_appends_complements() {
        let ds = BinaryDataset::from_bits(bits(&[&[0], &[1]]), vec![0, 1]).unwrap();
        let aug = augment_negations(&ds);
        assert_eq!(aug.rows(), &bits(&[&[0, 1], &[1, 0]])[..]);
        assert_eq!(aug.descriptors()[1].name, "NOT x1");
        assert_eq!(aug.complement_index(0), Some(1));
        assert_eq!(aug.complement_index(1), Some(0));
    }

    #[test]
    fn negated_threshold_is_flipped_sibling() {
        let ge = FeatureDescriptor::threshold(0, "age", 25.0, CmpOp::Ge);
        let neg = ge.negate();
        assert_eq!(neg.name, "age < 25");
        assert_eq!(neg.op(), Some(CmpOp::Lt));
        assert_eq!(neg.tval(), Some(25.0));
        assert_eq!(neg.sibling_group(), ge.sibling_group());
        assert!(!FeatureDescriptor::siblings(&ge, &neg));
        let lt50 = FeatureDescriptor::threshold(0, "age", 50.0, CmpOp::Lt);
        assert!(FeatureDescriptor::siblings(&neg, &lt50));
    }

    #[test]
    fn missing_negations_skip_existing_pairs() {
        let descriptors = vec![
            FeatureDescriptor::threshold(0, "x", 25.0, CmpOp::Ge),
            FeatureDescriptor::threshold(0, "x", 25.0, CmpOp::Lt),
            FeatureDescriptor::binary(1, "b"),
        ];
        let ds = BinaryDataset::new(
            vec![vec![true, false, true], vec![false, true, false]],
            vec![1, 0],
            descriptors,
        )
        .unwrap();
        let aug = augment_missing_negations(&ds);
        assert_eq!(aug.m(), 4);
        assert_eq!(aug.descriptors()[3].name, "NOT b");
        assert_eq!(aug.complement_index(0), Some(1));
    }

    #[test]
    fn ranking_counts_true_minus_false_positives() {
        let ds =
            BinaryDataset::from_bits(bits(&[&[1, 1, 1], &[0, 1, 1], &[1, 0, 1]]), vec![1, 1, 0])
                .unwrap();
        assert_eq!(rank_features(&ds), vec![0, 2, 1]);
        let ds = BinaryDataset::from_bits(bits(&[&[1], &[1]]), vec![0, 0]).unwrap();
        assert_eq!(rank_features(&ds), vec![-2]);
    }

    #[test]
    fn elimination_drops_negative_scores() {
        // scores: col0 = 2, col1 = -1, col2 = 0
        let ds = BinaryDataset::from_bits(
            bits(&[&[1, 0, 1], &[1, 1, 0], &[0, 1, 0], &[0, 1, 1]]),
            vec![1, 1, 0, 0],
        )
        .unwrap();
        assert_eq!(rank_features(&ds), vec![2, -1, 0]);
        let e = eliminate_features(&ds).unwrap();
        assert_eq!(e.kept, vec![0, 2]);
        assert_eq!(e.removed, vec![1]);
        assert_eq!(e.dataset.m(), 2);
        assert_eq!(e.dataset.descriptors()[1].name, "x3");

        let all_good = BinaryDataset::from_bits(bits(&[&[1, 0]]), vec![1]).unwrap();
        let e = eliminate_features(&all_good).unwrap();
        assert!(e.removed.is_empty());
        assert_eq!(e.dataset, all_good);

        let all_bad = BinaryDataset::from_bits(bits(&[&[1, 1]]), vec![0]).unwrap();
        assert!(matches!(
            eliminate_features(&all_bad),
            Err(Error::NoInformativeFeatures)
        ));
    }

    #[test]
    fn batches_are_sequential_and_repeat() {
        let sizes: Vec<usize> = batch_ranges(5, 2, 1).iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        assert_eq!(batch_ranges(4, 2, 2), vec![0..2, 2..4, 0..2, 2..4]);
        assert_eq!(batch_ranges(3, 10, 2), vec![0..3, 0..3]);
    }

    #[test]
    fn one_round_of_batches_reproduces_row_order() {
        let ds = BinaryDataset::from_bits(
            bits(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1], &[1, 1]]),
            vec![0, 1, 0, 1, 1],
        )
        .unwrap();
        let batches = split_batches(&ds, 2, 1);
        let mut joined = batches[0].clone();
        for b in &batches[1..] {
            joined = joined.concat(b).unwrap();
        }
        assert_eq!(joined, ds);
        let shuffled = split_batches_shuffled(&ds, 2, 2, 7);
        assert_eq!(shuffled.len(), 6);
        assert_eq!(shuffled.iter().map(BinaryDataset::n).sum::<usize>(), 10);
    }
}
