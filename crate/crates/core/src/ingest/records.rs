//! Catalog and authority records, and their JSON-lines readers.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::isbn::{extract_isbns, Isbn};
use crate::{Error, Result};

/// Which catalog a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "loc")]
    LibraryOfCongress,
    #[serde(rename = "ol")]
    OpenLibrary,
    #[serde(rename = "gr")]
    GoodReads,
}

/// A book or edition record from one of the catalogs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogRecord {
    pub record_id: String,
    pub source: Source,
    pub isbns: BTreeSet<Isbn>,
    /// Work the record belongs to; when present it stands in for the record
    /// in the linking graph.
    pub work_id: Option<String>,
    pub author_names: Vec<String>,
}

impl CatalogRecord {
    pub fn first_author(&self) -> Option<&str> {
        self.author_names.first().map(String::as_str)
    }
}

/// Gender statement found in an authority record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderAssertion {
    Female,
    Male,
    Unknown,
}

/// An author authority record (VIAF-style): name forms plus gender statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorityRecord {
    pub authority_id: String,
    pub name_forms: Vec<String>,
    pub gender_assertions: Vec<GenderAssertion>,
}

#[derive(Deserialize)]
struct RawRecord {
    record_id: String,
    source: Source,
    #[serde(default)]
    isbn_fields: Vec<String>,
    #[serde(default)]
    work_id: Option<String>,
    #[serde(default)]
    authors: Vec<String>,
}

#[derive(Deserialize)]
struct RawAuthority {
    authority_id: String,
    names: Vec<String>,
    #[serde(default)]
    genders: Vec<GenderAssertion>,
}

fn json_lines<T, R>(reader: R, path: &str) -> impl Iterator<Item = Result<(usize, T)>> + '_
where
    T: for<'de> Deserialize<'de>,
    R: BufRead + 'static,
{
    let path = path.to_string();
    reader.lines().enumerate().filter_map(move |(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            serde_json::from_str(&line)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: i + 1,
                    message: e.to_string(),
                }),
        )
    })
}

/// Read `records.jsonl`, running every raw ISBN field through
/// [`extract_isbns`].
pub fn read_records<R: BufRead + 'static>(reader: R, path: &str) -> Result<Vec<CatalogRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in json_lines::<RawRecord, _>(reader, path) {
        let (line, raw) = row?;
        if !seen.insert(raw.record_id.clone()) {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: format!("duplicate record_id {:?}", raw.record_id),
            });
        }
        let isbns = raw.isbn_fields.iter().flat_map(|f| extract_isbns(f)).collect();
        out.push(CatalogRecord {
            record_id: raw.record_id,
            source: raw.source,
            isbns,
            work_id: raw.work_id.filter(|w| !w.is_empty()),
            author_names: raw.authors.into_iter().filter(|a| !a.trim().is_empty()).collect(),
        });
    }
    Ok(out)
}

/// Read `authorities.jsonl`.
pub fn read_authorities<R: BufRead + 'static>(reader: R, path: &str) -> Result<Vec<AuthorityRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in json_lines::<RawAuthority, _>(reader, path) {
        let (line, raw) = row?;
        let fail = |message: String| Error::Parse {
            path: path.to_string(),
            line,
            message,
        };
        if !seen.insert(raw.authority_id.clone()) {
            return Err(fail(format!("duplicate authority_id {:?}", raw.authority_id)));
        }
        if raw.names.iter().all(|n| n.trim().is_empty()) {
            return Err(fail(format!("authority {:?} has no names", raw.authority_id)));
        }
        out.push(AuthorityRecord {
            authority_id: raw.authority_id,
            name_forms: raw.names,
            gender_assertions: raw.genders,
        });
    }
    Ok(out)
}
