use super::{Classifier, Clause};
use crate::data::FeatureDescriptor;

fn literal(descriptors: &[FeatureDescriptor], j: usize) -> String {
    descriptors
        .get(j)
        .map_or_else(|| format!("#{j}"), |d| d.name.clone())
}

fn join(clause: &Clause, descriptors: &[FeatureDescriptor], sep: &str, empty: &str) -> String {
    if clause.is_empty() {
        return empty.to_string();
    }
    clause
        .literals()
        .iter()
        .map(|&j| literal(descriptors, j))
        .collect::<Vec<_>>()
        .join(sep)
}

fn nested(
    groups: &[Clause],
    descriptors: &[FeatureDescriptor],
    inner: &str,
    outer: &str,
    inner_empty: &str,
    outer_empty: &str,
) -> String {
    if groups.is_empty() {
        return outer_empty.to_string();
    }
    let many = groups.len() > 1;
    groups
        .iter()
        .map(|c| {
            let s = join(c, descriptors, inner, inner_empty);
            if many && c.len() > 1 {
                format!("({s})")
            } else {
                s
            }
        })
        .collect::<Vec<_>>()
        .join(outer)
}

fn label(labels: &[String], v: usize) -> String {
    labels.get(v).cloned().unwrap_or_else(|| v.to_string())
}

/// Human-readable rule text; `labels` names the classes of lists and sets.
pub fn render(
    classifier: &Classifier,
    descriptors: &[FeatureDescriptor],
    labels: &[String],
) -> String {
    match classifier {
        Classifier::Cnf(r) => nested(&r.clauses, descriptors, " OR ", " AND ", "false", "true"),
        Classifier::Dnf(r) => nested(&r.terms, descriptors, " AND ", " OR ", "true", "false"),
        Classifier::List(dl) => {
            let mut out = String::new();
            for (i, (c, v)) in dl.rules.iter().enumerate() {
                if i > 0 {
                    out.push_str(" else ");
                }
                out.push_str(&format!(
                    "if {} then {}",
                    join(c, descriptors, " AND ", "true"),
                    label(labels, *v)
                ));
            }
            if !dl.rules.is_empty() {
                out.push_str(" else ");
            }
            out.push_str(&label(labels, dl.default));
            out
        }
        Classifier::Set(ds) => {
            let mut lines: Vec<String> = ds
                .rules
                .iter()
                .map(|(c, v)| {
                    format!(
                        "if {} then {}",
                        join(c, descriptors, " AND ", "true"),
                        label(labels, *v)
                    )
                })
                .collect();
            lines.push(format!("otherwise {}", label(labels, ds.default)));
            lines.join("\n")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::tests::interleaved;
    use crate::formula::{CnfRule, DecisionList, DecisionSet, DnfRule};

    fn cnf(clauses: &[&[usize]]) -> Classifier {
        Classifier::Cnf(CnfRule::new(
            clauses
                .iter()
                .map(|c| Clause::new(c.iter().copied()))
                .collect(),
        ))
    }

    #[test]
    fn cnf_text() {
        let d = interleaved(2);
        assert_eq!(render(&cnf(&[&[0]]), &d, &[]), "x1");
        assert_eq!(
            render(&cnf(&[&[0, 3], &[1, 2]]), &d, &[]),
            "(x1 OR NOT x2) AND (NOT x1 OR x2)"
        );
        assert_eq!(render(&cnf(&[&[0, 3]]), &d, &[]), "x1 OR NOT x2");
        assert_eq!(render(&cnf(&[]), &d, &[]), "true");
        assert_eq!(render(&cnf(&[&[]]), &d, &[]), "false");
    }

    #[test]
    fn dnf_text() {
        let d = interleaved(2);
        let r = Classifier::Dnf(DnfRule::new(vec![Clause::new([1, 2]), Clause::new([3])]));
        assert_eq!(render(&r, &d, &[]), "(NOT x1 AND x2) OR NOT x2");
        assert_eq!(
            render(&Classifier::Dnf(DnfRule::default()), &d, &[]),
            "false"
        );
    }

    #[test]
    fn list_and_set_text() {
        let d = interleaved(2);
        let labels: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let rules = vec![(Clause::new([0, 2]), 2), (Clause::new([3]), 1)];
        let dl = Classifier::List(DecisionList {
            rules: rules.clone(),
            default: 0,
        });
        assert_eq!(
            render(&dl, &d, &labels),
            "if x1 AND x2 then c else if NOT x2 then b else a"
        );
        let empty = Classifier::List(DecisionList {
            rules: vec![],
            default: 1,
        });
        assert_eq!(render(&empty, &d, &labels), "b");
        let ds = Classifier::Set(DecisionSet { rules, default: 0 });
        assert_eq!(
            render(&ds, &d, &labels),
            "if x1 AND x2 then c\nif NOT x2 then b\notherwise a"
        );
    }
}
