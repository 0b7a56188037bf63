use super::RawValue;

/// Comparison operator of a threshold feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    /// `x >= t`
    Ge,
    /// `x < t`
    Lt,
}

impl CmpOp {
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Lt => CmpOp::Ge,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
        }
    }

    pub fn holds(self, x: f64, t: f64) -> bool {
        match self {
            CmpOp::Ge => x >= t,
            CmpOp::Lt => x < t,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    /// A raw 0/1 column passed through.
    Binary,
    /// `column == category`.
    OneHot {
        category: String,
    },
    /// `lo <= x < hi`; a missing end is unbounded.
    Interval {
        lo: Option<f64>,
        hi: Option<f64>,
    },
    Threshold {
        tval: f64,
        op: CmpOp,
    },
    Negated(Box<FeatureDescriptor>),
}

/// What a binary column means in terms of the raw input.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDescriptor {
    pub name: String,
    /// Index of the raw source column.
    pub column: usize,
    pub column_name: String,
    pub origin: Origin,
}

/// Identity of a literal up to complementation; see [`FeatureDescriptor::literal_key`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LiteralKey {
    column: usize,
    base: BaseKey,
    negated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum BaseKey {
    Binary,
    OneHot(String),
    Interval(Option<u64>, Option<u64>),
    Threshold(u64),
}

/// Short decimal rendering for thresholds (at most four decimals).
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl FeatureDescriptor {
    pub fn binary(column: usize, column_name: impl Into<String>) -> Self {
        let column_name = column_name.into();
        FeatureDescriptor {
            name: column_name.clone(),
            column,
            column_name,
            origin: Origin::Binary,
        }
    }

    pub fn one_hot(
        column: usize,
        column_name: impl Into<String>,
        category: impl Into<String>,
    ) -> Self {
        let column_name = column_name.into();
        let category = category.into();
        FeatureDescriptor {
            name: format!("{column_name} = {category}"),
            column,
            column_name,
            origin: Origin::OneHot { category },
        }
    }

    pub fn interval(
        column: usize,
        column_name: impl Into<String>,
        lo: Option<f64>,
        hi: Option<f64>,
    ) -> Self {
        let column_name = column_name.into();
        let name = match (lo, hi) {
            (Some(lo), Some(hi)) => format!("{} <= {column_name} < {}", fmt_num(lo), fmt_num(hi)),
            (Some(lo), None) => format!("{column_name} >= {}", fmt_num(lo)),
            (None, Some(hi)) => format!("{column_name} < {}", fmt_num(hi)),
            (None, None) => format!("{column_name} (any)"),
        };
        FeatureDescriptor {
            name,
            column,
            column_name,
            origin: Origin::Interval { lo, hi },
        }
    }

    pub fn threshold(column: usize, column_name: impl Into<String>, tval: f64, op: CmpOp) -> Self {
        let column_name = column_name.into();
        FeatureDescriptor {
            name: format!("{column_name} {} {}", op.symbol(), fmt_num(tval)),
            column,
            column_name,
            origin: Origin::Threshold { tval, op },
        }
    }

    /// The complementary feature. Negating twice gives back the original.
    pub fn negate(&self) -> FeatureDescriptor {
        if let Origin::Negated(inner) = &self.origin {
            return (**inner).clone();
        }
        let name = match self.origin {
            Origin::Threshold { tval, op } => {
                format!(
                    "{} {} {}",
                    self.column_name,
                    op.flip().symbol(),
                    fmt_num(tval)
                )
            }
            _ => format!("NOT {}", self.name),
        };
        FeatureDescriptor {
            name,
            column: self.column,
            column_name: self.column_name.clone(),
            origin: Origin::Negated(Box::new(self.clone())),
        }
    }

    pub fn is_negation(&self) -> bool {
        matches!(self.origin, Origin::Negated(_))
    }

    /// Threshold value, also for a negated threshold.
    pub fn tval(&self) -> Option<f64> {
        match &self.origin {
            Origin::Threshold { tval, .. } => Some(*tval),
            Origin::Negated(inner) => match inner.origin {
                Origin::Threshold { tval, .. } => Some(tval),
                _ => None,
            },
            _ => None,
        }
    }

    /// Effective comparison; a negated `>=` threshold reads as `<`.
    pub fn op(&self) -> Option<CmpOp> {
        match &self.origin {
            Origin::Threshold { op, .. } => Some(*op),
            Origin::Negated(inner) => match inner.origin {
                Origin::Threshold { op, .. } => Some(op.flip()),
                _ => None,
            },
            _ => None,
        }
    }

    /// Raw column shared by threshold features over the same variable.
    pub fn sibling_group(&self) -> Option<usize> {
        self.tval().map(|_| self.column)
    }

    /// Two thresholds over the same column with the same comparison.
    pub fn siblings(a: &FeatureDescriptor, b: &FeatureDescriptor) -> bool {
        a.sibling_group().is_some() && a.sibling_group() == b.sibling_group() && a.op() == b.op()
    }

    /// Truth value of the feature for a raw cell of its source column.
    pub fn eval(&self, value: &RawValue) -> bool {
        match (&self.origin, value) {
            (Origin::Negated(inner), v) => !inner.eval(v),
            (Origin::Binary, RawValue::Bool(b)) => *b,
            (Origin::Binary, RawValue::Number(x)) => *x != 0.0,
            (Origin::Binary, RawValue::Text(s)) => s == "1",
            (Origin::OneHot { category }, RawValue::Text(s)) => s == category,
            (Origin::OneHot { category }, RawValue::Number(x)) => {
                category.parse::<f64>().is_ok_and(|c| c == *x)
            }
            (Origin::OneHot { category }, RawValue::Bool(b)) => {
                category == if *b { "1" } else { "0" }
            }
            (Origin::Interval { lo, hi }, RawValue::Number(x)) => {
                lo.is_none_or(|lo| *x >= lo) && hi.is_none_or(|hi| *x < hi)
            }
            (Origin::Threshold { tval, op }, RawValue::Number(x)) => op.holds(*x, *tval),
            _ => false,
        }
    }

    /// Key under which a feature and its negation differ only in `negated`.
    ///
    /// `x < t` and `NOT (x >= t)` share a key, so open-mode threshold pairs
    /// are recognised as complements of each other.
    pub fn literal_key(&self) -> LiteralKey {
        let (base, negated) = match &self.origin {
            Origin::Negated(inner) => {
                let mut k = inner.literal_key();
                k.negated = !k.negated;
                return k;
            }
            Origin::Binary => (BaseKey::Binary, false),
            Origin::OneHot { category } => (BaseKey::OneHot(category.clone()), false),
            Origin::Interval { lo, hi } => (
                BaseKey::Interval(lo.map(f64::to_bits), hi.map(f64::to_bits)),
                false,
            ),
            Origin::Threshold { tval, op } => {
                (BaseKey::Threshold(tval.to_bits()), *op == CmpOp::Lt)
            }
        };
        LiteralKey {
            column: self.column,
            base,
            negated,
        }
    }

    pub fn complement_key(&self) -> LiteralKey {
        let mut k = self.literal_key();
        k.negated = !k.negated;
        k
    }
}
