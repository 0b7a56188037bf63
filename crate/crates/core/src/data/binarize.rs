use super::csv_io::parse_bool;
use super::{
    BinaryDataset, CmpOp, ColumnValues, DiscretizationMode, FeatureDescriptor, RawDataset, RawValue,
};
use crate::{Error, Result};

/// How one raw column was turned into binary features.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnEncoding {
    Continuous {
        mode: DiscretizationMode,
        /// Strictly increasing interior split points.
        splits: Vec<f64>,
    },
    /// A continuous column without spread; becomes one always-true feature.
    Constant,
    Categorical {
        categories: Vec<String>,
    },
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub encoding: ColumnEncoding,
}

/// Everything needed to binarize unseen rows the same way as the training data.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationSpec {
    pub columns: Vec<ColumnSpec>,
    pub target_name: String,
    pub class_labels: Vec<String>,
}

impl DiscretizationSpec {
    /// Binary features produced for the columns, before negation augmentation.
    pub fn descriptors(&self) -> Vec<FeatureDescriptor> {
        let mut out = Vec::new();
        for (c, col) in self.columns.iter().enumerate() {
            let name = col.name.as_str();
            match &col.encoding {
                ColumnEncoding::Binary => out.push(FeatureDescriptor::binary(c, name)),
                ColumnEncoding::Constant => {
                    out.push(FeatureDescriptor::interval(c, name, None, None))
                }
                ColumnEncoding::Categorical { categories } => out.extend(
                    categories
                        .iter()
                        .map(|cat| FeatureDescriptor::one_hot(c, name, cat.as_str())),
                ),
                ColumnEncoding::Continuous {
                    mode: DiscretizationMode::Closed,
                    splits,
                } => {
                    let mut bounds: Vec<Option<f64>> = vec![None];
                    bounds.extend(splits.iter().map(|&s| Some(s)));
                    bounds.push(None);
                    out.extend(
                        bounds
                            .windows(2)
                            .map(|w| FeatureDescriptor::interval(c, name, w[0], w[1])),
                    );
                }
                ColumnEncoding::Continuous {
                    mode: DiscretizationMode::Open,
                    splits,
                } => {
                    for op in [CmpOp::Ge, CmpOp::Lt] {
                        out.extend(
                            splits
                                .iter()
                                .map(|&t| FeatureDescriptor::threshold(c, name, t, op)),
                        );
                    }
                }
            }
        }
        out
    }

    /// Parses text cells, ordered like `columns`, into typed values.
    ///
    /// `row` is only used in error messages. Unknown categories are kept and
    /// simply match no one-hot feature.
    pub fn parse_row(&self, cells: &[&str], row: usize) -> Result<Vec<RawValue>> {
        if cells.len() != self.columns.len() {
            return Err(Error::RaggedRow {
                row,
                expected: self.columns.len(),
                found: cells.len(),
            });
        }
        self.columns
            .iter()
            .zip(cells)
            .map(|(col, &cell)| {
                let bad = || Error::UnparseableCell {
                    row,
                    column: col.name.clone(),
                    value: cell.to_string(),
                };
                match col.encoding {
                    ColumnEncoding::Categorical { .. } => Ok(RawValue::Text(cell.to_string())),
                    ColumnEncoding::Binary => parse_bool(cell).map(RawValue::Bool).ok_or_else(bad),
                    ColumnEncoding::Continuous { .. } | ColumnEncoding::Constant => cell
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(RawValue::Number)
                        .ok_or_else(bad),
                }
            })
            .collect()
    }
}

/// Feature vector of one raw row under `descriptors`.
pub fn transform_row(descriptors: &[FeatureDescriptor], values: &[RawValue]) -> Vec<bool> {
    descriptors
        .iter()
        .map(|d| d.eval(&values[d.column]))
        .collect()
}

fn equal_width_splits(min: f64, max: f64, bins: usize) -> Vec<f64> {
    let width = (max - min) / bins as f64;
    let mut splits: Vec<f64> = (1..bins).map(|i| min + width * i as f64).collect();
    splits.dedup();
    splits
}

/// Discretizes continuous columns, one-hot encodes categorical ones and
/// passes binary columns through. Labels are copied as class indices.
pub fn binarize(
    raw: &RawDataset,
    bins: usize,
    mode: DiscretizationMode,
) -> Result<(BinaryDataset, DiscretizationSpec)> {
    raw.validate()?;
    let mut columns = Vec::with_capacity(raw.columns.len());
    for col in &raw.columns {
        let encoding = match &col.values {
            ColumnValues::Binary(_) => ColumnEncoding::Binary,
            ColumnValues::Categorical(values) => {
                let mut categories: Vec<String> = Vec::new();
                for v in values {
                    if !categories.contains(v) {
                        categories.push(v.clone());
                    }
                }
                ColumnEncoding::Categorical { categories }
            }
            ColumnValues::Continuous(values) => {
                if bins < 2 {
                    return Err(Error::InvalidConfig(format!(
                        "bins must be at least 2 for continuous column `{}`",
                        col.name
                    )));
                }
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if values.is_empty() || min >= max {
                    log::warn!(
                        "column `{}` is constant; encoding it as a single always-true feature",
                        col.name
                    );
                    ColumnEncoding::Constant
                } else {
                    ColumnEncoding::Continuous {
                        mode,
                        splits: equal_width_splits(min, max, bins),
                    }
                }
            }
        };
        columns.push(ColumnSpec {
            name: col.name.clone(),
            encoding,
        });
    }
    let spec = DiscretizationSpec {
        columns,
        target_name: raw.target_name.clone(),
        class_labels: raw.class_labels.clone(),
    };
    let descriptors = spec.descriptors();
    let rows = (0..raw.row_count())
        .map(|l| transform_row(&descriptors, &raw.row_values(l)))
        .collect();
    let ds = BinaryDataset::new(rows, raw.target.clone(), descriptors)?;
    Ok((ds, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, RawColumn};
    use proptest::prelude::*;

    fn one_column(values: ColumnValues) -> RawDataset {
        let n = values.len();
        RawDataset::new(
            vec![RawColumn {
                name: "x".into(),
                values,
            }],
            "y",
            vec!["0".into(), "1".into()],
            vec![0; n],
        )
        .unwrap()
    }

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn open_thresholds_match_worked_example() {
        // range (0, 100) with 4 bins gives thresholds 25, 50, 75
        let raw = one_column(ColumnValues::Continuous(vec![0.0, 37.5, 100.0]));
        let (ds, spec) = binarize(&raw, 4, DiscretizationMode::Open).unwrap();
        assert_eq!(
            spec.columns[0].encoding,
            ColumnEncoding::Continuous {
                mode: DiscretizationMode::Open,
                splits: vec![25.0, 50.0, 75.0]
            }
        );
        assert_eq!(ds.row(1), &bits("100011")[..]);
        let names: Vec<_> = ds.descriptors().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(
            names,
            ["x >= 25", "x >= 50", "x >= 75", "x < 25", "x < 50", "x < 75"]
        );
        assert!(FeatureDescriptor::siblings(
            &ds.descriptors()[0],
            &ds.descriptors()[2]
        ));
        assert!(!FeatureDescriptor::siblings(
            &ds.descriptors()[0],
            &ds.descriptors()[3]
        ));
    }

    #[test]
    fn closed_bins_are_interval_membership() {
        let raw = one_column(ColumnValues::Continuous(vec![0.0, 4.0, 9.0]));
        let (ds, spec) = binarize(&raw, 3, DiscretizationMode::Closed).unwrap();
        assert_eq!(ds.row(1), &bits("010")[..]);
        assert_eq!(ds.row(2), &bits("001")[..]);
        let values = spec.parse_row(&["-5"], 1).unwrap();
        assert_eq!(transform_row(ds.descriptors(), &values), bits("100"));
        let values = spec.parse_row(&["1e6"], 1).unwrap();
        assert_eq!(transform_row(ds.descriptors(), &values), bits("001"));
    }

    #[test]
    fn categories_one_hot_in_first_seen_order() {
        let raw = one_column(ColumnValues::Categorical(
            ["red", "green", "yellow", "green"]
                .map(String::from)
                .to_vec(),
        ));
        let (ds, spec) = binarize(&raw, 10, DiscretizationMode::Closed).unwrap();
        assert_eq!(ds.row(1), &bits("010")[..]);
        let unseen = spec.parse_row(&["purple"], 1).unwrap();
        assert_eq!(transform_row(ds.descriptors(), &unseen), bits("000"));
    }

    #[test]
    fn constant_column_becomes_single_true_feature() {
        let raw = one_column(ColumnValues::Continuous(vec![2.0, 2.0]));
        let (ds, _) = binarize(&raw, 5, DiscretizationMode::Closed).unwrap();
        assert_eq!(ds.m(), 1);
        assert!(ds.rows().iter().all(|r| r[0]));
    }

    #[test]
    fn too_few_bins_is_rejected() {
        let raw = one_column(ColumnValues::Continuous(vec![1.0, 2.0]));
        assert!(matches!(
            binarize(&raw, 1, DiscretizationMode::Closed),
            Err(Error::InvalidConfig(_))
        ));
        let raw = one_column(ColumnValues::Binary(vec![true, false]));
        assert!(binarize(&raw, 1, DiscretizationMode::Closed).is_ok());
        assert_eq!(raw.columns[0].values.kind(), ColumnKind::Binary);
    }

    /// Bin index by counting how many split points lie at or below `x`.
    fn bin_index(x: f64, min: f64, max: f64, bins: usize) -> usize {
        let w = (max - min) / bins as f64;
        (1..bins).filter(|&i| min + w * i as f64 <= x).count()
    }

    proptest! {
        #[test]
        fn closed_rows_have_exactly_one_bin(
            values in prop::collection::vec(-1000.0f64..1000.0, 2..40),
            bins in 2usize..12,
        ) {
            let raw = one_column(ColumnValues::Continuous(values.clone()));
            let (ds, _) = binarize(&raw, bins, DiscretizationMode::Closed).unwrap();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (l, &x) in values.iter().enumerate() {
                prop_assert_eq!(ds.row(l).iter().filter(|&&b| b).count(), 1);
                if min < max && ds.m() == bins {
                    prop_assert!(ds.row(l)[bin_index(x, min, max, bins)]);
                }
            }
        }

        #[test]
        fn transform_reproduces_training_matrix(
            values in prop::collection::vec(-50.0f64..50.0, 2..30),
            bins in 2usize..8,
            open in any::<bool>(),
        ) {
            let mode = if open { DiscretizationMode::Open } else { DiscretizationMode::Closed };
            let raw = one_column(ColumnValues::Continuous(values.clone()));
            let (ds, spec) = binarize(&raw, bins, mode).unwrap();
            for (l, x) in values.iter().enumerate() {
                let text = format!("{x:?}");
                let parsed = spec.parse_row(&[text.as_str()], l + 1).unwrap();
                prop_assert_eq!(&transform_row(ds.descriptors(), &parsed)[..], ds.row(l));
            }
        }

        #[test]
        fn one_hot_positive_counts_sum_to_positives(
            cats in prop::collection::vec(0u8..4, 1..40),
            labels in prop::collection::vec(0usize..2, 40),
        ) {
            let n = cats.len();
            let raw = RawDataset::new(
                vec![RawColumn { name: "c".into(), values: ColumnValues::Categorical(cats.iter().map(|c| c.to_string()).collect()) }],
                "y",
                vec!["0".into(), "1".into()],
                labels[..n].to_vec(),
            ).unwrap();
            let (ds, _) = binarize(&raw, 2, DiscretizationMode::Closed).unwrap();
            let tp: usize = (0..ds.m())
                .map(|j| (0..n).filter(|&l| ds.row(l)[j] && ds.is_positive(l)).count())
                .sum();
            prop_assert_eq!(tp, ds.positives());
            for score in crate::data::rank_features(&ds) {
                prop_assert!(score.unsigned_abs() as usize <= n);
            }
        }
    }
}
