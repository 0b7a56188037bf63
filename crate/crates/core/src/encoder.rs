//! Builds the MaxSAT query for one batch and decodes solutions into rules.
//!
//! Variables are laid out as `k * m` feature variables (`b[i][j]`: column
//! `j` appears in clause `i`), then one error variable per sample, then one
//! auxiliary variable per (negative sample, clause) pair, then whatever the
//! cardinality encodings allocate.

use crate::data::BinaryDataset;
use crate::formula::{Clause, CnfRule};
use crate::wcnf::{scale_weight, Assignment, Lit, Var, WcnfFormula, DEFAULT_PRECISION};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PinMode {
    /// The column must appear in the clause.
    Always,
    /// The column may never appear in the clause.
    Never,
}

/// Forces column `feature` in or out of clause `clause` (both zero-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pin {
    pub feature: usize,
    pub clause: usize,
    pub mode: PinMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodeConfig {
    pub k: usize,
    pub lambda: f64,
    /// Rule the sparsity clauses are biased towards; `None` means all-absent.
    pub prev_rule: Option<CnfRule>,
    pub pins: Vec<Pin>,
    /// Hard constraint: each column appears in at most one clause.
    pub at_most_one_clause_per_feature: bool,
    pub precision: u64,
}

impl EncodeConfig {
    pub fn new(k: usize, lambda: f64) -> Self {
        EncodeConfig {
            k,
            lambda,
            prev_rule: None,
            pins: Vec::new(),
            at_most_one_clause_per_feature: false,
            precision: DEFAULT_PRECISION,
        }
    }

    pub fn with_prev_rule(mut self, rule: CnfRule) -> Self {
        self.prev_rule = Some(rule);
        self
    }

    /// Adds a pin; contradictions are reported by [`encode_query`].
    pub fn pin_feature(mut self, feature: usize, clause: usize, mode: PinMode) -> Self {
        self.pins.push(Pin {
            feature,
            clause,
            mode,
        });
        self
    }
}

/// Variable numbering of one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarMap {
    k: usize,
    m: usize,
    n: usize,
    /// Rank of each sample among the negatives of the batch.
    neg_rank: Vec<Option<usize>>,
    n_neg: usize,
}

impl VarMap {
    pub fn new(k: usize, m: usize, labels_positive: &[bool]) -> Self {
        let mut next = 0;
        let neg_rank = labels_positive
            .iter()
            .map(|&pos| {
                (!pos).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        VarMap {
            k,
            m,
            n: labels_positive.len(),
            neg_rank,
            n_neg: next,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `b[i][j]`, zero-based clause `i` and column `j`.
    pub fn feature_var(&self, i: usize, j: usize) -> Var {
        debug_assert!(i < self.k && j < self.m);
        Var::new((i * self.m + j + 1) as u32)
    }

    /// `eta[l]`, zero-based sample `l`.
    pub fn error_var(&self, l: usize) -> Var {
        debug_assert!(l < self.n);
        Var::new((self.k * self.m + l + 1) as u32)
    }

    /// `z[l][i]`; only negative samples have auxiliary variables.
    pub fn aux_var(&self, l: usize, i: usize) -> Option<Var> {
        let r = self.neg_rank.get(l).copied().flatten()?;
        Some(Var::new(
            (self.k * self.m + self.n + r * self.k + i + 1) as u32,
        ))
    }

    pub fn num_decision_vars(&self) -> usize {
        self.k * self.m + self.n
    }

    pub fn num_aux_vars(&self) -> usize {
        self.k * self.n_neg
    }
}

/// Hard clauses allowing at most `bound` of `vars` to be true (sequential counter).
pub fn encode_at_most(f: &mut WcnfFormula, vars: &[Var], bound: usize) -> usize {
    let n = vars.len();
    if bound >= n {
        return 0;
    }
    let before = f.hard().len();
    if bound == 0 {
        for v in vars {
            f.add_hard(vec![v.neg()]);
        }
        return f.hard().len() - before;
    }
    // s[i][j]: at least j + 1 of vars[0..=i] are true
    let s: Vec<Vec<Var>> = (0..n - 1)
        .map(|_| (0..bound).map(|_| f.new_var()).collect())
        .collect();
    f.add_hard(vec![vars[0].neg(), s[0][0].pos()]);
    for j in 1..bound {
        f.add_hard(vec![s[0][j].neg()]);
    }
    for i in 1..n - 1 {
        f.add_hard(vec![vars[i].neg(), s[i][0].pos()]);
        f.add_hard(vec![s[i - 1][0].neg(), s[i][0].pos()]);
        for j in 1..bound {
            f.add_hard(vec![vars[i].neg(), s[i - 1][j - 1].neg(), s[i][j].pos()]);
            f.add_hard(vec![s[i - 1][j].neg(), s[i][j].pos()]);
        }
        f.add_hard(vec![vars[i].neg(), s[i - 1][bound - 1].neg()]);
    }
    f.add_hard(vec![vars[n - 1].neg(), s[n - 2][bound - 1].neg()]);
    f.hard().len() - before
}

/// The weighted-partial MaxSAT query of one batch.
///
/// Soft: `NOT eta[l]` with weight 1 per sample, and per `(i, j)` the literal
/// keeping `b[i][j]` at its value in the previous rule, with weight lambda.
/// Hard: a positive sample that is not flagged as an error must satisfy
/// every clause; a negative one must falsify at least one, expressed through
/// `z[l][i] -> NOT b[i][j]` for each column `j` set in the sample.
pub fn encode_query(batch: &BinaryDataset, cfg: &EncodeConfig) -> Result<(WcnfFormula, VarMap)> {
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {}",
            cfg.lambda
        )));
    }
    let (k, m, n) = (cfg.k, batch.m(), batch.n());
    if let Some(prev) = &cfg.prev_rule {
        if prev.k() != k {
            return Err(Error::ClauseCountMismatch {
                left: prev.k(),
                right: k,
            });
        }
        prev.check(m)?;
    }
    for p in &cfg.pins {
        if p.feature >= m {
            return Err(Error::IndexOutOfRange {
                index: p.feature,
                width: m,
            });
        }
        if p.clause >= k {
            return Err(Error::IndexOutOfRange {
                index: p.clause,
                width: k,
            });
        }
        let clash = cfg
            .pins
            .iter()
            .any(|q| q.feature == p.feature && q.clause == p.clause && q.mode != p.mode);
        if clash {
            return Err(Error::ContradictoryPins {
                feature: p.feature,
                clause: p.clause,
            });
        }
    }

    let positive: Vec<bool> = (0..n).map(|l| batch.is_positive(l)).collect();
    let vm = VarMap::new(k, m, &positive);
    let mut f = WcnfFormula::new(vm.num_decision_vars() + vm.num_aux_vars());

    let w_error = scale_weight(1.0, cfg.precision);
    let w_feature = scale_weight(cfg.lambda, cfg.precision);
    for l in 0..n {
        f.add_soft(vec![vm.error_var(l).neg()], w_error);
    }
    for i in 0..k {
        for j in 0..m {
            let keep = cfg
                .prev_rule
                .as_ref()
                .is_some_and(|r| r.clauses[i].contains(j));
            f.add_soft(vec![vm.feature_var(i, j).lit(keep)], w_feature);
        }
    }

    for l in 0..n {
        let row = batch.row(l);
        let ones: Vec<usize> = (0..m).filter(|&j| row[j]).collect();
        let eta = vm.error_var(l).pos();
        if positive[l] {
            for i in 0..k {
                let mut c = Vec::with_capacity(ones.len() + 1);
                c.push(eta);
                c.extend(ones.iter().map(|&j| vm.feature_var(i, j).pos()));
                f.add_hard(c);
            }
        } else {
            let zs: Vec<Var> = (0..k).map(|i| vm.aux_var(l, i).unwrap()).collect();
            let mut c = vec![eta];
            c.extend(zs.iter().map(|z| z.pos()));
            f.add_hard(c);
            for (i, z) in zs.iter().enumerate() {
                for &j in &ones {
                    f.add_hard(vec![z.neg(), vm.feature_var(i, j).neg()]);
                }
            }
        }
    }

    for p in &cfg.pins {
        let b = vm.feature_var(p.clause, p.feature);
        f.add_hard(vec![b.lit(p.mode == PinMode::Always)]);
    }
    if cfg.at_most_one_clause_per_feature {
        for j in 0..m {
            let vars: Vec<Var> = (0..k).map(|i| vm.feature_var(i, j)).collect();
            encode_at_most(&mut f, &vars, 1);
        }
    }
    Ok((f, vm))
}

/// Reads the rule (`j` in clause `i` iff `b[i][j]`) and the flagged samples.
pub fn decode_rule(a: &Assignment, vm: &VarMap) -> Result<(CnfRule, Vec<usize>)> {
    if a.len() < vm.num_decision_vars() {
        return Err(Error::AssignmentLength {
            expected: vm.num_decision_vars(),
            found: a.len(),
        });
    }
    let clauses = (0..vm.k)
        .map(|i| {
            (0..vm.m)
                .filter(|&j| a.value(vm.feature_var(i, j)))
                .collect::<Clause>()
        })
        .collect();
    let errors = (0..vm.n).filter(|&l| a.value(vm.error_var(l))).collect();
    Ok((CnfRule::new(clauses), errors))
}

/// Literal `b[i][j]` for callers that build their own side constraints.
pub fn feature_lit(vm: &VarMap, i: usize, j: usize, present: bool) -> Lit {
    vm.feature_var(i, j).lit(present)
}
