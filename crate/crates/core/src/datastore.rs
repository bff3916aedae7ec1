//! Toy phone-book table and conjunctive query execution.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::frame::Query;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Record {
    pub attributes: BTreeMap<String, String>,
}

impl Record {
    pub fn get(&self, attribute: &str) -> Option<&str> {
        self.attributes.get(attribute).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub records: Vec<Record>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {0}: row does not match the header width")]
    RaggedRow(usize),
    #[error("table has no header row")]
    MissingHeader,
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
}

pub fn load_table(path: &Path) -> Result<Table, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(&text)
}

/// Tab-separated values with a header row. Cells are trimmed; blank lines
/// are skipped.
pub fn parse_table(text: &str) -> Result<Table, DataError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(DataError::MissingHeader)?;
    let columns: Vec<String> = header.split('\t').map(|c| c.trim().to_string()).collect();
    let mut records = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(DataError::RaggedRow(i + 1));
        }
        let attributes = columns
            .iter()
            .cloned()
            .zip(cells.iter().map(|c| c.trim().to_string()))
            .collect();
        records.push(Record { attributes });
    }
    Ok(Table { columns, records })
}

/// Records satisfying every predicate, compared case-insensitively. Accents
/// are significant.
pub fn execute(query: &Query, table: &Table) -> Result<Vec<Record>, DataError> {
    for p in &query.predicates {
        if !table.columns.contains(&p.attribute) {
            return Err(DataError::UnknownAttribute(p.attribute.clone()));
        }
    }
    let wanted: Vec<(&str, String)> = query
        .predicates
        .iter()
        .map(|p| (p.attribute.as_str(), p.value.to_lowercase()))
        .collect();
    Ok(table
        .records
        .iter()
        .filter(|r| {
            wanted
                .iter()
                .all(|(a, v)| r.get(a).is_some_and(|x| x.to_lowercase() == *v))
        })
        .cloned()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Predicate;
    use proptest::prelude::*;

    fn fixture() -> Table {
        parse_table(include_str!("../fixtures/phonebook.tsv")).unwrap()
    }

    fn query(preds: &[(&str, &str)]) -> Query {
        Query {
            predicates: preds
                .iter()
                .map(|(a, v)| Predicate {
                    attribute: a.to_string(),
                    value: v.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn small_table() {
        let t = parse_table("name\tcity\tphone\ndupont\tlausanne\t021 111 11 11\nfavre\t sion \t\n").unwrap();
        assert_eq!(t.records.len(), 2);
        assert_eq!(t.records[1].get("city"), Some("sion"));
        assert_eq!(t.records[1].get("phone"), Some(""));
    }

    #[test]
    fn ragged_row() {
        let err = parse_table("name\tcity\tphone\ndupont\tlausanne\n").unwrap_err();
        assert!(matches!(err, DataError::RaggedRow(2)));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_table(Path::new("/nonexistent/table.tsv")),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn fixture_has_fifty_rows() {
        assert_eq!(fixture().records.len(), 50);
    }

    #[test]
    fn execution() {
        let t = fixture();
        assert_eq!(execute(&Query::default(), &t).unwrap(), t.records);

        let got = execute(&query(&[("name", "DUPONT")]), &t).unwrap();
        let expected: Vec<Record> = t
            .records
            .iter()
            .filter(|r| r.get("name") == Some("dupont"))
            .cloned()
            .collect();
        assert!(!expected.is_empty());
        assert_eq!(got, expected);

        let got = execute(&query(&[("city", "lausanne"), ("city", "sion")]), &t).unwrap();
        assert!(got.is_empty());

        assert!(matches!(
            execute(&query(&[("shoe_size", "42")]), &t),
            Err(DataError::UnknownAttribute(_))
        ));
    }

    #[test]
    fn accents_are_significant() {
        let t = parse_table("city\ngenève\n").unwrap();
        assert_eq!(execute(&query(&[("city", "GENÈVE")]), &t).unwrap().len(), 1);
        assert!(execute(&query(&[("city", "geneve")]), &t).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn filtering_is_monotone(
            preds in prop::collection::vec((0usize..3, 0usize..4), 0..4),
            extra in (0usize..3, 0usize..4),
        ) {
            let t = fixture();
            let attrs = ["name", "city", "category"];
            let vals = ["dupont", "lausanne", "pharmacie", "sion"];
            let pairs: Vec<(&str, &str)> = preds.iter().map(|&(a, v)| (attrs[a], vals[v])).collect();
            let base = execute(&query(&pairs), &t).unwrap();
            // subset of the table, in table order
            let mut pos = 0;
            for r in &base {
                let found = t.records[pos..].iter().position(|x| x == r);
                prop_assert!(found.is_some());
                pos += found.unwrap() + 1;
            }
            let mut more = pairs.clone();
            more.push((attrs[extra.0], vals[extra.1]));
            let narrowed = execute(&query(&more), &t).unwrap();
            prop_assert!(narrowed.len() <= base.len());
            prop_assert!(narrowed.iter().all(|r| base.contains(r)));
        }
    }
}
