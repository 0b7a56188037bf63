//! Training drivers: incremental mini-batch learning, iterative clause-by-clause
//! learning, and the DNF, decision-list and decision-set learners built on them.

mod report;

use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::data::{
    augment_missing_negations, augment_negations, binarize, eliminate_features, split_batches,
    split_batches_shuffled, BinaryDataset, DiscretizationMode, DiscretizationSpec, RawDataset,
};
use crate::encoder::{decode_rule, encode_query, EncodeConfig};
use crate::formula::{
    negate_cnf_to_dnf, remove_redundant_literals, Classifier, Clause, CnfRule, DecisionList,
    DecisionSet, DnfRule, Model,
};
use crate::solver::{solve, Backend, Polarity, SolveOptions, SolveStatus};
use crate::wcnf::DEFAULT_PRECISION;
use crate::{Error, Result};

pub use report::{BatchRecord, TrainReport};

/// Which classifier family to learn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    #[default]
    Cnf,
    Dnf,
    DecisionList,
    DecisionSet,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnf" => Ok(Mode::Cnf),
            "dnf" => Ok(Mode::Dnf),
            "decision-list" | "list" => Ok(Mode::DecisionList),
            "decision-set" | "set" => Ok(Mode::DecisionSet),
            _ => Err(Error::InvalidConfig(format!("unknown mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Cnf => "cnf",
            Mode::Dnf => "dnf",
            Mode::DecisionList => "decision-list",
            Mode::DecisionSet => "decision-set",
        })
    }
}

/// How a CNF (or the CNF behind a DNF) with `k` clauses is learned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// All `k` clauses at once, one query per mini-batch.
    MiniBatch,
    /// One clause at a time, removing the samples each clause decides.
    #[default]
    Iterative,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mini-batch" | "minibatch" => Ok(Strategy::MiniBatch),
            "iterative" => Ok(Strategy::Iterative),
            _ => Err(Error::InvalidConfig(format!("unknown strategy `{s}`"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::MiniBatch => "mini-batch",
            Strategy::Iterative => "iterative",
        })
    }
}

/// When redundant threshold literals are removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Prune {
    Off,
    /// Every candidate, before its loss is measured.
    #[default]
    EachBatch,
    /// Once, on the final rule.
    AtEnd,
}

impl FromStr for Prune {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Prune::Off),
            "each-batch" => Ok(Prune::EachBatch),
            "at-end" => Ok(Prune::AtEnd),
            _ => Err(Error::InvalidConfig(format!("unknown prune setting `{s}`"))),
        }
    }
}

impl std::fmt::Display for Prune {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Prune::Off => "off",
            Prune::EachBatch => "each-batch",
            Prune::AtEnd => "at-end",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    /// Clauses of a CNF/DNF; a decision list or set gets up to `k - 1` rules.
    pub k: usize,
    /// Weight of one literal relative to one misclassified sample.
    pub lambda: f64,
    pub batch_size: usize,
    /// Passes over the batch sequence.
    pub rounds: usize,
    pub solver: Backend,
    pub timeout_per_solve: Option<Duration>,
    /// Branching budget per solve of the built-in solver.
    pub node_limit: Option<u64>,
    pub precision: u64,
    pub mode: Mode,
    pub strategy: Strategy,
    pub bins: usize,
    pub discretization: DiscretizationMode,
    /// Add complemented columns before learning.
    pub negations: bool,
    /// Drop columns with more false than true positives before learning.
    pub eliminate: bool,
    pub prune: Prune,
    /// `Some(seed)` shuffles rows before batching.
    pub shuffle: Option<u64>,
    /// Tie-break seed of the built-in solver.
    pub seed: u64,
    pub polarity: Polarity,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: 3,
            lambda: 0.1,
            batch_size: 200,
            rounds: 2,
            solver: Backend::BranchAndBound,
            timeout_per_solve: None,
            node_limit: Some(DEFAULT_NODE_LIMIT),
            precision: DEFAULT_PRECISION,
            mode: Mode::Cnf,
            strategy: Strategy::Iterative,
            bins: 10,
            discretization: DiscretizationMode::Closed,
            negations: true,
            eliminate: false,
            prune: Prune::EachBatch,
            shuffle: None,
            seed: 0,
            polarity: Polarity::Occurrence,
        }
    }
}

pub const DEFAULT_NODE_LIMIT: u64 = 2_000;

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.precision == 0 {
            return bad("precision must be at least 1".into());
        }
        Ok(())
    }

    /// `key = value` pairs stored alongside a model.
    pub fn to_params(&self) -> Vec<(String, String)> {
        let mut p = vec![
            ("mode", self.mode.to_string()),
            ("strategy", self.strategy.to_string()),
            ("k", self.k.to_string()),
            ("lambda", self.lambda.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("rounds", self.rounds.to_string()),
            ("solver", self.solver.to_string()),
            ("precision", self.precision.to_string()),
            ("bins", self.bins.to_string()),
            ("discretization", self.discretization.to_string()),
            ("negations", self.negations.to_string()),
            ("eliminate", self.eliminate.to_string()),
            ("prune", self.prune.to_string()),
            ("seed", self.seed.to_string()),
        ];
        if let Some(limit) = self.node_limit {
            p.push(("node_limit", limit.to_string()));
        }
        if let Some(t) = self.timeout_per_solve {
            p.push(("timeout_per_solve", format!("{}", t.as_secs_f64())));
        }
        if let Some(s) = self.shuffle {
            p.push(("shuffle", s.to_string()));
        }
        p.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn solve_options(&self, hint: Vec<crate::wcnf::Lit>) -> SolveOptions {
        SolveOptions {
            timeout: self.timeout_per_solve,
            node_limit: self.node_limit,
            seed: self.seed,
            polarity: self.polarity,
            hint,
        }
    }
}

/// Misclassified samples of `ds` plus `lambda` per literal.
pub fn loss(rule: &CnfRule, ds: &BinaryDataset, lambda: f64) -> f64 {
    errors(|x| usize::from(rule.holds(x)), ds) as f64 + lambda * rule.size() as f64
}

fn errors(predict: impl Fn(&[bool]) -> usize, ds: &BinaryDataset) -> usize {
    (0..ds.n())
        .filter(|&l| predict(ds.row(l)) != ds.label(l))
        .count()
}

/// Learns a `k`-clause CNF by solving one query per mini-batch. A candidate
/// replaces the current rule only if it lowers the loss on all of `ds`.
pub fn mini_batch_learn(ds: &BinaryDataset, hp: &Hyperparams) -> Result<(CnfRule, TrainReport)> {
    let start = Instant::now();
    let mut report = TrainReport::default();
    let rule = mini_batch_stage(ds, hp, hp.k, 0, &mut report)?;
    let rule = if hp.prune == Prune::AtEnd {
        remove_redundant_literals(&rule, ds.descriptors())
    } else {
        rule
    };
    report.finish(
        ds.n() - errors(|x| usize::from(rule.holds(x)), ds),
        ds.n(),
        rule.size(),
        start,
    );
    Ok((rule, report))
}

fn mini_batch_stage(
    ds: &BinaryDataset,
    hp: &Hyperparams,
    k: usize,
    stage: usize,
    report: &mut TrainReport,
) -> Result<CnfRule> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset(
            "cannot train on an empty dataset".into(),
        ));
    }
    let batches = match hp.shuffle {
        Some(seed) => split_batches_shuffled(ds, hp.batch_size, hp.rounds, seed),
        None => split_batches(ds, hp.batch_size, hp.rounds),
    };
    let mut rule = CnfRule::empty_clauses(k);
    let mut best = f64::INFINITY;
    for (t, batch) in batches.iter().enumerate() {
        let batch_start = Instant::now();
        let mut cfg = EncodeConfig::new(k, hp.lambda).with_prev_rule(rule.clone());
        cfg.precision = hp.precision;
        let (f, vm) = encode_query(batch, &cfg)?;
        let hint = (0..k)
            .flat_map(|i| (0..ds.m()).map(move |j| (i, j)))
            .map(|(i, j)| vm.feature_var(i, j).lit(rule.clauses[i].contains(j)))
            .collect();
        let solved = match solve(&f, &hp.solver, &hp.solve_options(hint)) {
            Err(Error::HardUnsat) => {
                return Err(Error::InvalidDataset(
                    "internal error: a learning query had no feasible assignment".into(),
                ))
            }
            other => other?,
        };
        let (mut candidate, _) = decode_rule(&solved.assignment, &vm)?;
        if hp.prune == Prune::EachBatch {
            candidate = remove_redundant_literals(&candidate, ds.descriptors());
        }
        let candidate_loss = loss(&candidate, ds, hp.lambda);
        let accepted = candidate_loss < best;
        if accepted {
            best = candidate_loss;
            rule = candidate;
        }
        log::debug!(
            "stage {stage} batch {t}: loss {candidate_loss} accepted {accepted} status {} nodes {}",
            solved.status,
            solved.nodes
        );
        report.batches.push(BatchRecord {
            stage,
            batch: t,
            samples: batch.n(),
            loss: candidate_loss,
            accepted,
            accepted_loss: best,
            status: solved.status,
            cost: solved.cost,
            nodes: solved.nodes,
            elapsed: batch_start.elapsed(),
        });
    }
    Ok(rule)
}

/// Samples falsifying `clause`, i.e. the samples a CNF containing it labels 0.
pub fn coverage_cnf(clause: &Clause, ds: &BinaryDataset) -> Vec<usize> {
    (0..ds.n()).filter(|&l| !clause.any(ds.row(l))).collect()
}

/// Samples satisfying a conjunction.
pub fn coverage_term(term: &Clause, ds: &BinaryDataset) -> Vec<usize> {
    (0..ds.n()).filter(|&l| term.all(ds.row(l))).collect()
}

/// Learns up to `k` clauses one at a time. Each clause is learned on the
/// samples not yet covered; learning stops early when no negative sample
/// remains or a clause covers nothing new.
pub fn iterative_cnf_learn(ds: &BinaryDataset, hp: &Hyperparams) -> Result<(CnfRule, TrainReport)> {
    let start = Instant::now();
    let mut report = TrainReport::default();
    let (rule, _) = iterative_stages(ds, hp, &mut report)?;
    report.finish(
        ds.n() - errors(|x| usize::from(rule.holds(x)), ds),
        ds.n(),
        rule.size(),
        start,
    );
    Ok((rule, report))
}

/// Also returns, per clause, the indices (into `ds`) it removed.
fn iterative_stages(
    ds: &BinaryDataset,
    hp: &Hyperparams,
    report: &mut TrainReport,
) -> Result<(CnfRule, Vec<Vec<usize>>)> {
    if ds.is_empty() {
        return Err(Error::InvalidDataset(
            "cannot train on an empty dataset".into(),
        ));
    }
    let mut remaining: Vec<usize> = (0..ds.n()).collect();
    let mut clauses = Vec::new();
    let mut removed = Vec::new();
    for stage in 0..hp.k {
        let current = ds.subset(&remaining);
        if current.negatives() == 0 {
            break;
        }
        let one = mini_batch_stage(&current, hp, 1, stage, report)?;
        let mut clause = one.clauses.into_iter().next().unwrap_or_else(Clause::empty);
        if hp.prune == Prune::AtEnd {
            clause = remove_redundant_literals(&CnfRule::new(vec![clause]), ds.descriptors())
                .clauses
                .remove(0);
        }
        let covered = coverage_cnf(&clause, &current);
        if covered.is_empty() {
            break;
        }
        removed.push(covered.iter().map(|&l| remaining[l]).collect());
        remaining = without_indices(&remaining, &covered);
        clauses.push(clause);
    }
    Ok((CnfRule::new(clauses), removed))
}

fn without_indices(indices: &[usize], positions: &[usize]) -> Vec<usize> {
    indices
        .iter()
        .enumerate()
        .filter(|(p, _)| positions.binary_search(p).is_err())
        .map(|(_, &l)| l)
        .collect()
}

/// Indices (into `ds`) removed by each clause of an iterative run; exposed
/// so the removal guarantee can be checked from outside.
pub fn iterative_cnf_learn_traced(
    ds: &BinaryDataset,
    hp: &Hyperparams,
) -> Result<(CnfRule, Vec<Vec<usize>>, TrainReport)> {
    let start = Instant::now();
    let mut report = TrainReport::default();
    let (rule, removed) = iterative_stages(ds, hp, &mut report)?;
    report.finish(
        ds.n() - errors(|x| usize::from(rule.holds(x)), ds),
        ds.n(),
        rule.size(),
        start,
    );
    Ok((rule, removed, report))
}

/// CNF learned with the configured strategy.
pub fn learn_cnf(ds: &BinaryDataset, hp: &Hyperparams) -> Result<(CnfRule, TrainReport)> {
    match hp.strategy {
        Strategy::MiniBatch => mini_batch_learn(ds, hp),
        Strategy::Iterative => iterative_cnf_learn(ds, hp),
    }
}

/// Learns a CNF for the complemented labels and negates it. Requires every
/// literal the CNF uses to have its complement column in `ds`.
pub fn learn_dnf(ds: &BinaryDataset, hp: &Hyperparams) -> Result<(DnfRule, TrainReport)> {
    let (cnf, mut report) = learn_cnf(&ds.complemented(), hp)?;
    let dnf = negate_cnf_to_dnf(&cnf, ds.descriptors())?;
    let correct = ds.n() - errors(|x| usize::from(dnf.holds(x)), ds);
    report.train_accuracy = correct as f64 / ds.n() as f64;
    Ok((dnf, report))
}

/// Smallest class label among those with the highest count.
fn majority(labels: impl IntoIterator<Item = usize>, num_classes: usize) -> usize {
    let mut counts = vec![0usize; num_classes.max(1)];
    for y in labels {
        counts[y] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == top).unwrap_or(0)
}

/// A single conjunction that tries to capture the samples labelled 1.
fn learn_term(
    ds: &BinaryDataset,
    hp: &Hyperparams,
    stage: usize,
    report: &mut TrainReport,
) -> Result<Clause> {
    let cnf = mini_batch_stage(&ds.complemented(), hp, 1, stage, report)?;
    let cnf = if hp.prune == Prune::AtEnd {
        remove_redundant_literals(&cnf, ds.descriptors())
    } else {
        cnf
    };
    Ok(negate_cnf_to_dnf(&cnf, ds.descriptors())?
        .terms
        .into_iter()
        .next()
        .unwrap_or_else(Clause::empty))
}

/// Majority among classes no rule predicts, else the overall majority.
fn default_class(ds: &BinaryDataset, predicted: &[usize]) -> usize {
    let missing: Vec<usize> = (0..ds.num_classes())
        .filter(|c| !predicted.contains(c))
        .collect();
    let overall = majority(ds.labels().iter().copied(), ds.num_classes());
    if missing.is_empty() {
        return overall;
    }
    let mut counts = vec![0usize; ds.num_classes()];
    for &y in ds.labels() {
        counts[y] += 1;
    }
    let top = missing.iter().map(|&c| counts[c]).max().unwrap_or(0);
    missing
        .into_iter()
        .find(|&c| counts[c] == top)
        .unwrap_or(overall)
}

fn one_vs_rest(ds: &BinaryDataset, v: usize) -> Result<BinaryDataset> {
    ds.with_labels(ds.labels().iter().map(|&y| usize::from(y == v)).collect())
}

/// Ordered rules: each learns a conjunction for the majority class of the
/// samples earlier rules left over, and removes every sample it fires on.
pub fn learn_decision_list(
    ds: &BinaryDataset,
    hp: &Hyperparams,
) -> Result<(DecisionList, TrainReport)> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset(
            "cannot train on an empty dataset".into(),
        ));
    }
    let start = Instant::now();
    let mut report = TrainReport::default();
    let mut remaining: Vec<usize> = (0..ds.n()).collect();
    let mut rules: Vec<(Clause, usize)> = Vec::new();
    while rules.len() + 1 < hp.k && !remaining.is_empty() {
        let current = ds.subset(&remaining);
        let v = majority(current.labels().iter().copied(), ds.num_classes());
        let term = learn_term(&one_vs_rest(&current, v)?, hp, rules.len(), &mut report)?;
        let covered = coverage_term(&term, &current);
        if covered.is_empty() {
            break;
        }
        remaining = without_indices(&remaining, &covered);
        rules.push((term, v));
    }
    let predicted: Vec<usize> = rules.iter().map(|r| r.1).collect();
    let list = DecisionList {
        rules,
        default: default_class(ds, &predicted),
    };
    let correct = ds.n() - errors(|x| list.classify(x), ds);
    report.finish(correct, ds.n(), list.size(), start);
    Ok((list, report))
}

/// Unordered rules. Samples an earlier rule already classifies correctly stay
/// in every later query, relabelled as negatives, so later rules learn to
/// avoid them.
pub fn learn_decision_set(
    ds: &BinaryDataset,
    hp: &Hyperparams,
) -> Result<(DecisionSet, TrainReport)> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset(
            "cannot train on an empty dataset".into(),
        ));
    }
    let start = Instant::now();
    let mut report = TrainReport::default();
    let mut remaining: Vec<usize> = (0..ds.n()).collect();
    let mut correct_pool: Vec<usize> = Vec::new();
    let mut rules: Vec<(Clause, usize)> = Vec::new();
    while rules.len() + 1 < hp.k && !remaining.is_empty() {
        let current = ds.subset(&remaining);
        let v = majority(current.labels().iter().copied(), ds.num_classes());
        let mut rows = remaining.clone();
        rows.extend(&correct_pool);
        let labels = remaining
            .iter()
            .map(|&l| usize::from(ds.label(l) == v))
            .chain(correct_pool.iter().map(|_| 0))
            .collect();
        let train = ds.subset(&rows).with_labels(labels)?;
        let term = learn_term(&train, hp, rules.len(), &mut report)?;
        let hits: Vec<usize> = (0..current.n())
            .filter(|&l| current.label(l) == v && term.all(current.row(l)))
            .collect();
        if hits.is_empty() {
            break;
        }
        correct_pool.extend(hits.iter().map(|&p| remaining[p]));
        remaining = without_indices(&remaining, &hits);
        rules.push((term, v));
    }
    let predicted: Vec<usize> = rules.iter().map(|r| r.1).collect();
    let set = DecisionSet {
        rules,
        default: default_class(ds, &predicted),
    };
    for i in 0..set.rules.len() {
        for j in i + 1..set.rules.len() {
            let both = (0..ds.n())
                .filter(|&l| set.rules[i].0.all(ds.row(l)) && set.rules[j].0.all(ds.row(l)))
                .count();
            report.overlaps.push((i, j, both));
        }
    }
    let correct = ds.n() - errors(|x| set.classify(x), ds);
    report.finish(correct, ds.n(), set.size(), start);
    Ok((set, report))
}

/// Dispatches on `hp.mode`.
pub fn train(ds: &BinaryDataset, hp: &Hyperparams) -> Result<(Classifier, TrainReport)> {
    hp.validate()?;
    if matches!(hp.mode, Mode::Cnf | Mode::Dnf) && !ds.is_binary() {
        return Err(Error::InvalidDataset(format!(
            "mode {} needs two classes, found {}",
            hp.mode,
            ds.num_classes()
        )));
    }
    Ok(match hp.mode {
        Mode::Cnf => {
            let (r, rep) = learn_cnf(ds, hp)?;
            (Classifier::Cnf(r), rep)
        }
        Mode::Dnf => {
            let (r, rep) = learn_dnf(ds, hp)?;
            (Classifier::Dnf(r), rep)
        }
        Mode::DecisionList => {
            let (r, rep) = learn_decision_list(ds, hp)?;
            (Classifier::List(r), rep)
        }
        Mode::DecisionSet => {
            let (r, rep) = learn_decision_set(ds, hp)?;
            (Classifier::Set(r), rep)
        }
    })
}

/// Binarizes `raw` with the configured bins, then adds negated columns
/// (all of them in closed mode, only missing ones in open mode) and
/// optionally eliminates uninformative columns.
pub fn prepare(raw: &RawDataset, hp: &Hyperparams) -> Result<(BinaryDataset, DiscretizationSpec)> {
    let (ds, spec) = binarize(raw, hp.bins, hp.discretization)?;
    let ds = match (hp.negations, hp.discretization) {
        (false, _) => ds,
        (true, DiscretizationMode::Closed) => augment_negations(&ds),
        (true, DiscretizationMode::Open) => augment_missing_negations(&ds),
    };
    let ds = if hp.eliminate {
        eliminate_features(&ds)?.dataset
    } else {
        ds
    };
    Ok((ds, spec))
}

/// Full pipeline from a raw table to a self-contained model.
pub fn train_raw(raw: &RawDataset, hp: &Hyperparams) -> Result<(Model, TrainReport)> {
    let (ds, spec) = prepare(raw, hp)?;
    let (classifier, report) = train(&ds, hp)?;
    let model = Model {
        classifier,
        descriptors: ds.descriptors().to_vec(),
        class_labels: raw.class_labels.clone(),
        spec: Some(spec),
        params: hp.to_params(),
    };
    Ok((model, report))
}

/// Class index for one row of text cells ordered like the training columns.
pub fn predict(model: &Model, cells: &[&str], row: usize) -> Result<usize> {
    let spec = model.spec.as_ref().ok_or_else(|| {
        Error::InvalidConfig("model has no discretization; it expects binary rows".into())
    })?;
    model.predict_raw(&spec.parse_row(cells, row)?)
}

/// Status counts of all solves in a report.
pub fn status_counts(report: &TrainReport) -> (usize, usize) {
    let optimal = report
        .batches
        .iter()
        .filter(|b| b.status == SolveStatus::Optimal)
        .count();
    (optimal, report.batches.len() - optimal)
}
