//! Versioned, line-oriented, tab-separated model files.
//!
//! ```text
//! satrules-model  1
//! classifier      cnf
//! label           <class name>            (one line per class, in order)
//! param           <key>   <value>
//! target          <name>                  (only with a discretization)
//! column          <name>  <encoding ...>
//! feature         <column> <column name> [not] <origin ...>
//! clause          <space-separated literals>          (cnf / dnf)
//! rule            <label> <space-separated literals>  (list / set)
//! default         <label>                              (list / set)
//! end
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{render, Classifier, Clause, CnfRule, DecisionList, DecisionSet, DnfRule};
use crate::data::{
    transform_row, CmpOp, ColumnEncoding, ColumnSpec, DiscretizationMode, DiscretizationSpec,
    FeatureDescriptor, Origin, RawValue,
};
use crate::{Error, Result};

pub const MODEL_VERSION: &str = "1";
const MAGIC: &str = "satrules-model";

/// A trained classifier together with what is needed to apply it to raw rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub classifier: Classifier,
    pub descriptors: Vec<FeatureDescriptor>,
    pub class_labels: Vec<String>,
    /// Absent when the model was trained on an already-binary matrix.
    pub spec: Option<DiscretizationSpec>,
    /// Hyperparameters used for training, as `key = value` pairs.
    pub params: Vec<(String, String)>,
}

impl Model {
    pub fn predict_bits(&self, sample: &[bool]) -> Result<usize> {
        self.classifier.predict(sample)
    }

    /// Class index for one row of typed raw values, ordered like the discretization columns.
    pub fn predict_raw(&self, values: &[RawValue]) -> Result<usize> {
        if let Some(d) = self.descriptors.iter().find(|d| d.column >= values.len()) {
            return Err(Error::IndexOutOfRange {
                index: d.column,
                width: values.len(),
            });
        }
        self.predict_bits(&transform_row(&self.descriptors, values))
    }

    pub fn label(&self, class: usize) -> String {
        self.class_labels
            .get(class)
            .cloned()
            .unwrap_or_else(|| class.to_string())
    }

    pub fn render(&self) -> String {
        render(&self.classifier, &self.descriptors, &self.class_labels)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn literals(c: &Clause) -> String {
    c.literals()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

fn origin_fields(origin: &Origin) -> Vec<String> {
    match origin {
        Origin::Binary => vec!["binary".into()],
        Origin::OneHot { category } => vec!["onehot".into(), escape(category)],
        Origin::Interval { lo, hi } => vec!["interval".into(), opt_num(*lo), opt_num(*hi)],
        Origin::Threshold { tval, op } => vec![
            "threshold".into(),
            match op {
                CmpOp::Ge => "ge",
                CmpOp::Lt => "lt",
            }
            .into(),
            tval.to_string(),
        ],
        Origin::Negated(inner) => {
            let mut v = vec!["not".to_string()];
            v.extend(origin_fields(&inner.origin));
            v
        }
    }
}

/// Serializes `model` in the current format version.
pub fn write_model<W: Write>(model: &Model, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}\t{MODEL_VERSION}")?;
    writeln!(w, "classifier\t{}", model.classifier.kind_name())?;
    for l in &model.class_labels {
        writeln!(w, "label\t{}", escape(l))?;
    }
    for (k, v) in &model.params {
        writeln!(w, "param\t{}\t{}", escape(k), escape(v))?;
    }
    if let Some(spec) = &model.spec {
        writeln!(w, "target\t{}", escape(&spec.target_name))?;
        for col in &spec.columns {
            let mut fields = vec!["column".to_string(), escape(&col.name)];
            match &col.encoding {
                ColumnEncoding::Binary => fields.push("binary".into()),
                ColumnEncoding::Constant => fields.push("constant".into()),
                ColumnEncoding::Categorical { categories } => {
                    fields.push("categorical".into());
                    fields.extend(categories.iter().map(|c| escape(c)));
                }
                ColumnEncoding::Continuous { mode, splits } => {
                    fields.push("continuous".into());
                    fields.push(mode.to_string());
                    fields.extend(splits.iter().map(f64::to_string));
                }
            }
            writeln!(w, "{}", fields.join("\t"))?;
        }
    }
    for d in &model.descriptors {
        let mut fields = vec![
            "feature".to_string(),
            d.column.to_string(),
            escape(&d.column_name),
        ];
        fields.extend(origin_fields(&d.origin));
        writeln!(w, "{}", fields.join("\t"))?;
    }
    match &model.classifier {
        Classifier::Cnf(CnfRule { clauses: cs }) | Classifier::Dnf(DnfRule { terms: cs }) => {
            for c in cs {
                writeln!(w, "clause\t{}", literals(c))?;
            }
        }
        Classifier::List(DecisionList { rules, default })
        | Classifier::Set(DecisionSet { rules, default }) => {
            for (c, v) in rules {
                writeln!(w, "rule\t{v}\t{}", literals(c))?;
            }
            writeln!(w, "default\t{default}")?;
        }
    }
    writeln!(w, "end")
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_model(model, &mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}

struct Line<'a> {
    no: usize,
    fields: Vec<&'a str>,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::MalformedModel {
            line: self.no,
            message: message.into(),
        }
    }

    fn field(&self, i: usize) -> Result<&str> {
        self.fields
            .get(i)
            .copied()
            .ok_or_else(|| self.err(format!("expected at least {} fields", i + 1)))
    }

    fn text(&self, i: usize) -> Result<String> {
        unescape(self.field(i)?).ok_or_else(|| self.err("bad escape sequence"))
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn opt_num(&self, s: &str) -> Result<Option<f64>> {
        if s == "-" {
            Ok(None)
        } else {
            self.num(s).map(Some)
        }
    }

    fn clause(&self, i: usize) -> Result<Clause> {
        let s = self.fields.get(i).copied().unwrap_or("");
        s.split_whitespace().map(|t| self.num(t)).collect()
    }

    fn origin(&self, from: usize) -> Result<Origin> {
        Ok(match self.field(from)? {
            "binary" => Origin::Binary,
            "onehot" => Origin::OneHot {
                category: self.text(from + 1)?,
            },
            "interval" => Origin::Interval {
                lo: self.opt_num(self.field(from + 1)?)?,
                hi: self.opt_num(self.field(from + 2)?)?,
            },
            "threshold" => Origin::Threshold {
                op: match self.field(from + 1)? {
                    "ge" => CmpOp::Ge,
                    "lt" => CmpOp::Lt,
                    other => return Err(self.err(format!("unknown operator `{other}`"))),
                },
                tval: self.num(self.field(from + 2)?)?,
            },
            other => return Err(self.err(format!("unknown feature origin `{other}`"))),
        })
    }
}

fn build_descriptor(column: usize, name: String, origin: Origin) -> FeatureDescriptor {
    match origin {
        Origin::Binary => FeatureDescriptor::binary(column, name),
        Origin::OneHot { category } => FeatureDescriptor::one_hot(column, name, category),
        Origin::Interval { lo, hi } => FeatureDescriptor::interval(column, name, lo, hi),
        Origin::Threshold { tval, op } => FeatureDescriptor::threshold(column, name, tval, op),
        Origin::Negated(inner) => inner.negate(),
    }
}

/// Parses a model file; rejects unknown versions and malformed lines.
pub fn read_model<R: BufRead>(reader: R) -> Result<Model> {
    let text: Vec<String> = reader
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::MalformedModel {
            line: 0,
            message: e.to_string(),
        })?;
    let mut lines = text.iter().enumerate().map(|(i, s)| Line {
        no: i + 1,
        fields: s.split('\t').collect(),
    });

    let header = lines.next().ok_or(Error::MalformedModel {
        line: 1,
        message: "empty file".into(),
    })?;
    if header.field(0)? != MAGIC {
        return Err(header.err("not a model file"));
    }
    let version = header.field(1)?;
    if version != MODEL_VERSION {
        return Err(Error::ModelVersion(version.to_string()));
    }

    let mut kind = None;
    let mut class_labels = Vec::new();
    let mut params = Vec::new();
    let mut target = None;
    let mut columns = Vec::new();
    let mut descriptors = Vec::new();
    let mut clauses = Vec::new();
    let mut rules = Vec::new();
    let mut default = None;
    let mut ended = false;

    for line in lines {
        if ended {
            return Err(line.err("content after `end`"));
        }
        match line.field(0)? {
            "" if line.fields.len() == 1 => {}
            "classifier" => kind = Some(line.field(1)?.to_string()),
            "label" => class_labels.push(line.text(1)?),
            "param" => params.push((line.text(1)?, line.text(2)?)),
            "target" => target = Some(line.text(1)?),
            "column" => {
                let name = line.text(1)?;
                let encoding = match line.field(2)? {
                    "binary" => ColumnEncoding::Binary,
                    "constant" => ColumnEncoding::Constant,
                    "categorical" => ColumnEncoding::Categorical {
                        categories: (3..line.fields.len())
                            .map(|i| line.text(i))
                            .collect::<Result<_>>()?,
                    },
                    "continuous" => ColumnEncoding::Continuous {
                        mode: match line.field(3)? {
                            "closed" => DiscretizationMode::Closed,
                            "open" => DiscretizationMode::Open,
                            other => return Err(line.err(format!("unknown mode `{other}`"))),
                        },
                        splits: line.fields[4..]
                            .iter()
                            .map(|s| line.num(s))
                            .collect::<Result<_>>()?,
                    },
                    other => return Err(line.err(format!("unknown column encoding `{other}`"))),
                };
                columns.push(ColumnSpec { name, encoding });
            }
            "feature" => {
                let column = line.num(line.field(1)?)?;
                let name = line.text(2)?;
                let origin = if line.field(3)? == "not" {
                    Origin::Negated(Box::new(build_descriptor(
                        column,
                        name.clone(),
                        line.origin(4)?,
                    )))
                } else {
                    line.origin(3)?
                };
                descriptors.push(build_descriptor(column, name, origin));
            }
            "clause" => clauses.push(line.clause(1)?),
            "rule" => rules.push((line.clause(2)?, line.num(line.field(1)?)?)),
            "default" => default = Some(line.num(line.field(1)?)?),
            "end" => ended = true,
            other => return Err(line.err(format!("unknown record `{other}`"))),
        }
    }
    let last = text.len();
    let fail = |message: &str| Error::MalformedModel {
        line: last,
        message: message.to_string(),
    };
    if !ended {
        return Err(fail("missing `end`"));
    }
    let missing_default = || fail("missing `default`");
    let classifier = match kind.as_deref() {
        Some("cnf") => Classifier::Cnf(CnfRule::new(clauses)),
        Some("dnf") => Classifier::Dnf(DnfRule::new(clauses)),
        Some("list") => Classifier::List(DecisionList {
            rules,
            default: default.ok_or_else(missing_default)?,
        }),
        Some("set") => Classifier::Set(DecisionSet {
            rules,
            default: default.ok_or_else(missing_default)?,
        }),
        Some(other) => return Err(fail(&format!("unknown classifier `{other}`"))),
        None => return Err(fail("missing `classifier`")),
    };
    classifier
        .check(descriptors.len())
        .map_err(|e| fail(&e.to_string()))?;
    let spec = target.map(|target_name| DiscretizationSpec {
        columns,
        target_name,
        class_labels: class_labels.clone(),
    });
    Ok(Model {
        classifier,
        descriptors,
        class_labels,
        spec,
        params,
    })
}
