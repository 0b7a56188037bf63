//! Accuracy, stratified cross-validation and hyperparameter grids.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{transform_row, BinaryDataset, RawDataset};
use crate::formula::Classifier;
use crate::learner::{prepare, train, Hyperparams};
use crate::{Error, Result};

/// Fraction of samples whose predicted class equals the label.
pub fn accuracy(classifier: &Classifier, ds: &BinaryDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InvalidDataset("accuracy of an empty dataset".into()));
    }
    let mut correct = 0usize;
    for l in 0..ds.n() {
        if classifier.predict(ds.row(l))? == ds.label(l) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.n() as f64)
}

/// `10^(-4 + 5i/4)` for `i = 0..4`: five log-spaced values from `1e-4` to `10`.
pub fn lambda_grid() -> Vec<f64> {
    (0..5)
        .map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 4.0))
        .collect()
}

pub const GRID_BATCH_SIZES: [usize; 4] = [50, 100, 200, 400];

/// `k` in 1..=5 crossed with [`lambda_grid`] and [`GRID_BATCH_SIZES`];
/// every other setting comes from `base`.
pub fn default_grid(base: &Hyperparams) -> Vec<Hyperparams> {
    grid(base, &[1, 2, 3, 4, 5], &lambda_grid(), &GRID_BATCH_SIZES)
}

/// Cartesian product in `k`-major order.
pub fn grid(
    base: &Hyperparams,
    ks: &[usize],
    lambdas: &[f64],
    batch_sizes: &[usize],
) -> Vec<Hyperparams> {
    let mut out = Vec::with_capacity(ks.len() * lambdas.len() * batch_sizes.len());
    for &k in ks {
        for &lambda in lambdas {
            for &batch_size in batch_sizes {
                out.push(Hyperparams {
                    k,
                    lambda,
                    batch_size,
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Splits row indices into `folds` parts, dealing each class round-robin
/// after a seeded shuffle so class ratios match to within one sample.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |&c| c + 1);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0usize;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&l| labels[l] == c).collect();
        members.shuffle(&mut rng);
        for l in members {
            out[next].push(l);
            next = (next + 1) % folds;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub test_accuracy: f64,
    pub rule_size: usize,
    pub train_time: Duration,
    /// Index into the grid of the selected point.
    pub grid_index: usize,
    pub train_loss: f64,
    /// Whether every training run of this fold kept a non-increasing
    /// accepted-loss trace.
    pub loss_monotone: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Folds whose training part held a single class.
    pub skipped: Vec<usize>,
    pub median_accuracy: f64,
    pub median_rule_size: f64,
    pub median_train_time: Duration,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

impl CvReport {
    fn from_folds(folds: Vec<FoldResult>, skipped: Vec<usize>) -> CvReport {
        let acc: Vec<f64> = folds.iter().map(|f| f.test_accuracy).collect();
        let size: Vec<f64> = folds.iter().map(|f| f.rule_size as f64).collect();
        let time: Vec<f64> = folds.iter().map(|f| f.train_time.as_secs_f64()).collect();
        CvReport {
            median_accuracy: median(&acc),
            median_rule_size: median(&size),
            median_train_time: Duration::from_secs_f64(median(&time).max(0.0)),
            folds,
            skipped,
        }
    }

    /// Per-fold rows, then a `median` row.
    pub fn to_csv(&self, grid: &[Hyperparams]) -> String {
        let mut out =
            String::from("fold,test_accuracy,rule_size,train_seconds,k,lambda,batch_size\n");
        for f in &self.folds {
            let hp = &grid[f.grid_index];
            let _ = writeln!(
                out,
                "{},{:.4},{},{:.3},{},{},{}",
                f.fold + 1,
                f.test_accuracy,
                f.rule_size,
                f.train_time.as_secs_f64(),
                hp.k,
                hp.lambda,
                hp.batch_size
            );
        }
        let _ = writeln!(
            out,
            "median,{:.4},{},{:.3},,,",
            self.median_accuracy,
            self.median_rule_size,
            self.median_train_time.as_secs_f64()
        );
        out
    }

    pub fn to_table(&self, grid: &[Hyperparams]) -> String {
        let mut out = format!(
            "{:>6}  {:>8}  {:>5}  {:>8}  {:>3}  {:>10}  {:>6}\n",
            "fold", "accuracy", "size", "train s", "k", "lambda", "batch"
        );
        for f in &self.folds {
            let hp = &grid[f.grid_index];
            let _ = writeln!(
                out,
                "{:>6}  {:>8.4}  {:>5}  {:>8.3}  {:>3}  {:>10.4e}  {:>6}",
                f.fold + 1,
                f.test_accuracy,
                f.rule_size,
                f.train_time.as_secs_f64(),
                hp.k,
                hp.lambda,
                hp.batch_size
            );
        }
        let _ = writeln!(
            out,
            "{:>6}  {:>8.4}  {:>5}  {:>8.3}",
            "median",
            self.median_accuracy,
            self.median_rule_size,
            self.median_train_time.as_secs_f64()
        );
        for s in &self.skipped {
            let _ = writeln!(out, "fold {} skipped: single class in training data", s + 1);
        }
        out
    }
}

fn apply(ds_descriptors: &BinaryDataset, raw: &RawDataset) -> Result<BinaryDataset> {
    let d = ds_descriptors.descriptors();
    let rows = (0..raw.row_count())
        .map(|l| transform_row(d, &raw.row_values(l)))
        .collect();
    BinaryDataset::new(
        rows,
        raw.target.clone(),
        ds_descriptors.shared_descriptors(),
    )
}

/// Stratified `folds`-fold cross-validation. In each fold every grid point is
/// trained on the training part; the one with the lowest training loss
/// (errors plus its own `lambda` times rule size; ties go to the earlier
/// point) is scored on the held-out part.
pub fn k_fold_cv(
    raw: &RawDataset,
    grid: &[Hyperparams],
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::InvalidConfig("at least two folds are needed".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig(
            "the hyperparameter grid is empty".into(),
        ));
    }
    if raw.row_count() < folds {
        return Err(Error::InvalidConfig(format!(
            "{} rows cannot fill {folds} folds",
            raw.row_count()
        )));
    }
    for hp in grid {
        hp.validate()?;
    }
    let parts = stratified_folds(&raw.target, folds, seed);
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for (fold, test_rows) in parts.iter().enumerate() {
        let train_rows: Vec<usize> = (0..raw.row_count())
            .filter(|l| test_rows.binary_search(l).is_err())
            .collect();
        let train_raw = raw.subset(&train_rows);
        let test_raw = raw.subset(test_rows);
        let mut classes = train_raw.target.clone();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            log::warn!(
                "fold {}: training data has a single class; skipping",
                fold + 1
            );
            skipped.push(fold);
            continue;
        }

        let start = Instant::now();
        let mut prepared: Vec<(Hyperparams, BinaryDataset)> = Vec::new();
        let mut best: Option<(f64, usize, Classifier, BinaryDataset)> = None;
        let mut monotone = true;
        for (g, hp) in grid.iter().enumerate() {
            let same_prep = |p: &Hyperparams| {
                p.bins == hp.bins
                    && p.discretization == hp.discretization
                    && p.negations == hp.negations
                    && p.eliminate == hp.eliminate
            };
            let ds = match prepared.iter().find(|(p, _)| same_prep(p)) {
                Some((_, ds)) => ds.clone(),
                None => {
                    let (ds, _) = prepare(&train_raw, hp)?;
                    prepared.push((hp.clone(), ds.clone()));
                    ds
                }
            };
            let (classifier, report) = train(&ds, hp)?;
            monotone &= report.loss_trace_monotone();
            let errors = (1.0 - report.train_accuracy) * ds.n() as f64;
            let loss = errors.round() + hp.lambda * classifier.size() as f64;
            log::debug!(
                "fold {} grid {g}: k {} lambda {} batch {} loss {loss} size {}",
                fold + 1,
                hp.k,
                hp.lambda,
                hp.batch_size,
                classifier.size()
            );
            if best.as_ref().is_none_or(|b| loss < b.0) {
                best = Some((loss, g, classifier, ds));
            }
        }
        let train_time = start.elapsed();
        let (train_loss, grid_index, classifier, ds) = best.expect("grid is nonempty");
        let test = apply(&ds, &test_raw)?;
        results.push(FoldResult {
            fold,
            test_accuracy: accuracy(&classifier, &test)?,
            rule_size: classifier.size(),
            train_time,
            grid_index,
            train_loss,
            loss_monotone: monotone,
        });
    }
    if results.is_empty() {
        return Err(Error::InvalidDataset("every fold was skipped".into()));
    }
    Ok(CvReport::from_folds(results, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnValues, RawColumn};
    use crate::formula::{Clause, CnfRule};
    use crate::solver::Backend;
    use proptest::prelude::*;

    fn ones(n: usize, labels: Vec<usize>) -> BinaryDataset {
        BinaryDataset::from_bits(vec![vec![true]; n], labels).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let always = Classifier::Cnf(CnfRule::new(vec![Clause::new([0])]));
        assert_eq!(accuracy(&always, &ones(4, vec![0; 4])).unwrap(), 0.0);
        assert_eq!(accuracy(&always, &ones(4, vec![0, 1, 0, 1])).unwrap(), 0.5);
        assert!(accuracy(&always, &ones(0, vec![])).is_err());
    }

    #[test]
    fn grid_shapes() {
        let g = default_grid(&Hyperparams::default());
        assert_eq!(g.len(), 100);
        let l = lambda_grid();
        let expected = [
            1e-4,
            10f64.powf(-2.75),
            10f64.powf(-1.5),
            10f64.powf(-0.25),
            10.0,
        ];
        for (a, b) in l.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        assert!((l[1] - 1.778e-3).abs() < 1e-6);
        assert_eq!(grid(&Hyperparams::default(), &[2], &[0.5], &[7]).len(), 1);
    }

    #[test]
    fn two_folds_of_ten() {
        let labels = vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let f = stratified_folds(&labels, 2, 3);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5]);
        for part in &f {
            let pos = part.iter().filter(|&&l| labels[l] == 1).count();
            assert_eq!(pos, 2);
        }
    }

    proptest! {
        #[test]
        fn folds_partition_rows(labels in prop::collection::vec(0usize..3, 2..60), folds in 2usize..8, seed in any::<u64>()) {
            let f = stratified_folds(&labels, folds, seed);
            prop_assert_eq!(f.len(), folds);
            let mut all: Vec<usize> = f.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..3 {
                let counts: Vec<usize> = f.iter().map(|p| p.iter().filter(|&&l| labels[l] == c).count()).collect();
                prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
            }
        }
    }

    fn threshold_data(n: usize) -> RawDataset {
        // y = 1 iff x >= 5, plus a useless column.
        let x: Vec<f64> = (0..n).map(|i| (i % 10) as f64).collect();
        let z: Vec<f64> = (0..n).map(|i| ((i * 7) % 3) as f64).collect();
        let y = x.iter().map(|&v| usize::from(v >= 5.0)).collect();
        RawDataset::new(
            vec![
                RawColumn {
                    name: "x".into(),
                    values: ColumnValues::Continuous(x),
                },
                RawColumn {
                    name: "z".into(),
                    values: ColumnValues::Continuous(z),
                },
            ],
            "y",
            vec!["0".into(), "1".into()],
            y,
        )
        .unwrap()
    }

    #[test]
    fn cv_learns_a_threshold() {
        let raw = threshold_data(60);
        let base = Hyperparams {
            k: 1,
            lambda: 0.1,
            batch_size: 100,
            bins: 10,
            solver: Backend::BranchAndBound,
            ..Hyperparams::default()
        };
        let grid = vec![base];
        let r = k_fold_cv(&raw, &grid, 3, 1).unwrap();
        assert_eq!(r.folds.len(), 3);
        assert_eq!(r.median_accuracy, 1.0);
        let accs: Vec<f64> = r.folds.iter().map(|f| f.test_accuracy).collect();
        assert_eq!(r.median_accuracy, median(&accs));
        assert!(r
            .to_csv(&grid)
            .lines()
            .last()
            .unwrap()
            .starts_with("median,1.0000"));
    }

    #[test]
    fn single_class_folds_are_skipped() {
        // Only one positive row: the fold holding it trains on negatives only.
        let mut raw = threshold_data(6);
        raw.target = vec![0, 0, 0, 0, 0, 1];
        let grid = vec![Hyperparams {
            k: 1,
            ..Hyperparams::default()
        }];
        let r = k_fold_cv(&raw, &grid, 2, 0).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.folds.len(), 1);
        assert!(k_fold_cv(&raw, &[], 2, 0).is_err());
        assert!(k_fold_cv(&raw, &grid, 1, 0).is_err());
    }
}
