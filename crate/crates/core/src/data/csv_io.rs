use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use super::{ColumnKind, ColumnValues, RawColumn, RawDataset};
use crate::{Error, Result};

/// Reads a headered CSV file. Column kinds are inferred unless overridden:
/// only `0`/`1` values means binary, all-numeric means continuous, anything
/// else is categorical. Empty cells are rejected.
pub fn load_csv(
    path: &Path,
    target: &str,
    overrides: &HashMap<String, ColumnKind>,
) -> Result<RawDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, target, overrides)
}

/// [`load_csv`] over any reader.
pub fn parse_csv<R: Read>(
    reader: R,
    target: &str,
    overrides: &HashMap<String, ColumnKind>,
) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_idx = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTargetColumn(target.to_string()))?;
    if let Some(name) = overrides.keys().find(|k| !header.contains(k)) {
        return Err(Error::MissingColumn(name.clone()));
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (c, value) in record.iter().enumerate() {
            if value.is_empty() {
                return Err(Error::UnparseableCell {
                    row,
                    column: header[c].clone(),
                    value: String::new(),
                });
            }
            cells[c].push(value.to_string());
        }
    }

    let (class_labels, targets) = encode_target(&cells[target_idx]);
    let mut columns = Vec::with_capacity(header.len() - 1);
    for (c, name) in header.iter().enumerate() {
        if c == target_idx {
            continue;
        }
        let kind = overrides
            .get(name)
            .copied()
            .unwrap_or_else(|| infer_kind(&cells[c]));
        columns.push(RawColumn {
            name: name.clone(),
            values: convert(name, &cells[c], kind)?,
        });
    }
    RawDataset::new(columns, target, class_labels, targets)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn infer_kind(values: &[String]) -> ColumnKind {
    let nums: Option<Vec<f64>> = values.iter().map(|v| parse_finite(v)).collect();
    match nums {
        Some(nums) if nums.iter().all(|&x| x == 0.0 || x == 1.0) => ColumnKind::Binary,
        Some(_) => ColumnKind::Continuous,
        None => ColumnKind::Categorical,
    }
}

fn convert(name: &str, values: &[String], kind: ColumnKind) -> Result<ColumnValues> {
    let bad = |row: usize, value: &str| Error::UnparseableCell {
        row: row + 1,
        column: name.to_string(),
        value: value.to_string(),
    };
    Ok(match kind {
        ColumnKind::Categorical => ColumnValues::Categorical(values.to_vec()),
        ColumnKind::Continuous => ColumnValues::Continuous(
            values
                .iter()
                .enumerate()
                .map(|(r, v)| parse_finite(v).ok_or_else(|| bad(r, v)))
                .collect::<Result<_>>()?,
        ),
        ColumnKind::Binary => ColumnValues::Binary(
            values
                .iter()
                .enumerate()
                .map(|(r, v)| parse_bool(v).ok_or_else(|| bad(r, v)))
                .collect::<Result<_>>()?,
        ),
    })
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        other => match parse_finite(other) {
            Some(1.0) => Some(true),
            Some(0.0) => Some(false),
            _ => None,
        },
    }
}

/// Distinct labels sorted numerically when all are numbers, else lexically.
fn encode_target(values: &[String]) -> (Vec<String>, Vec<usize>) {
    let distinct: BTreeSet<&str> = values.iter().map(String::as_str).collect();
    let mut labels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if labels.iter().all(|l| parse_finite(l).is_some()) {
        labels.sort_by(|a, b| {
            parse_finite(a)
                .unwrap()
                .total_cmp(&parse_finite(b).unwrap())
        });
    }
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let targets = values.iter().map(|v| index[v.as_str()]).collect();
    (labels, targets)
}
