//! Author-gender resolution for items.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cluster::ItemCluster;
use super::names::normalize_name;
use super::records::{AuthorityRecord, CatalogRecord, GenderAssertion};
use crate::Error;

/// Resolved author gender of an item.
///
/// `Unlinked` collects every no-data outcome: no book record, no author on
/// the records, or no matching authority record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorGender {
    Female,
    Male,
    Ambiguous,
    Unknown,
    Unlinked,
}

impl AuthorGender {
    pub fn as_str(self) -> &'static str {
        match self {
            AuthorGender::Female => "female",
            AuthorGender::Male => "male",
            AuthorGender::Ambiguous => "ambiguous",
            AuthorGender::Unknown => "unknown",
            AuthorGender::Unlinked => "unlinked",
        }
    }

    /// Female or male: the genders that count towards balance statistics.
    pub fn is_known(self) -> bool {
        matches!(self, AuthorGender::Female | AuthorGender::Male)
    }
}

impl fmt::Display for AuthorGender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AuthorGender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "female" => AuthorGender::Female,
            "male" => AuthorGender::Male,
            "ambiguous" => AuthorGender::Ambiguous,
            "unknown" => AuthorGender::Unknown,
            "unlinked" => AuthorGender::Unlinked,
            other => return Err(Error::InvalidInput(format!("unknown gender label {other:?}"))),
        })
    }
}

/// Combine gender statements into one label.
///
/// "unknown" statements are not assertions. Unanimous female or male
/// statements give that gender, contradicting ones give `Ambiguous`, and no
/// statements at all give `Unknown`.
pub fn resolve_author_gender<I>(assertions: I) -> AuthorGender
where
    I: IntoIterator<Item = GenderAssertion>,
{
    let (mut female, mut male) = (false, false);
    for a in assertions {
        match a {
            GenderAssertion::Female => female = true,
            GenderAssertion::Male => male = true,
            GenderAssertion::Unknown => {}
        }
    }
    match (female, male) {
        (true, true) => AuthorGender::Ambiguous,
        (true, false) => AuthorGender::Female,
        (false, true) => AuthorGender::Male,
        (false, false) => AuthorGender::Unknown,
    }
}

/// Index from normalized name form to the authorities carrying it.
pub struct AuthorityIndex<'a> {
    authorities: &'a [AuthorityRecord],
    by_name: HashMap<String, Vec<usize>>,
}

impl<'a> AuthorityIndex<'a> {
    pub fn new(authorities: &'a [AuthorityRecord]) -> AuthorityIndex<'a> {
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, auth) in authorities.iter().enumerate() {
            let forms: BTreeSet<String> = auth.name_forms.iter().flat_map(|n| normalize_name(n)).collect();
            for form in forms {
                by_name.entry(form).or_default().push(i);
            }
        }
        AuthorityIndex { authorities, by_name }
    }

    /// Authorities sharing any normalized form with `name`.
    pub fn lookup(&self, name: &str) -> BTreeSet<usize> {
        normalize_name(name)
            .iter()
            .filter_map(|f| self.by_name.get(f))
            .flatten()
            .copied()
            .collect()
    }

    pub fn get(&self, idx: usize) -> &'a AuthorityRecord {
        &self.authorities[idx]
    }
}

/// Resolve the author gender of every cluster.
///
/// Only the first author of each record is consulted. Clusters whose records
/// carry no authors, or whose authors match no authority, are `Unlinked`.
pub fn link_item_genders(
    clusters: &[ItemCluster],
    records: &[CatalogRecord],
    authorities: &[AuthorityRecord],
) -> BTreeMap<String, AuthorGender> {
    let index = AuthorityIndex::new(authorities);
    let by_id: HashMap<&str, &CatalogRecord> = records.iter().map(|r| (r.record_id.as_str(), r)).collect();

    clusters
        .iter()
        .map(|cluster| {
            let matched: BTreeSet<usize> = cluster
                .records
                .iter()
                .filter_map(|id| by_id.get(id.as_str()))
                .filter_map(|r| r.first_author())
                .flat_map(|name| index.lookup(name))
                .collect();
            let gender = if matched.is_empty() {
                AuthorGender::Unlinked
            } else {
                resolve_author_gender(
                    matched
                        .iter()
                        .flat_map(|&i| index.get(i).gender_assertions.iter().copied()),
                )
            };
            (cluster.item_id.clone(), gender)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::cluster::cluster_items;
    use crate::ingest::isbn::Isbn;
    use crate::ingest::records::Source;
    use GenderAssertion::*;

    #[test]
    fn resolution_rules() {
        assert_eq!(resolve_author_gender([Female, Female]), AuthorGender::Female);
        assert_eq!(resolve_author_gender([Female, Male]), AuthorGender::Ambiguous);
        assert_eq!(resolve_author_gender([Female, Unknown]), AuthorGender::Female);
        assert_eq!(resolve_author_gender([Unknown, Unknown]), AuthorGender::Unknown);
        assert_eq!(resolve_author_gender([]), AuthorGender::Unknown);
        assert_eq!(resolve_author_gender([Male]), AuthorGender::Male);
    }

    #[test]
    fn label_round_trip() {
        for g in [
            AuthorGender::Female,
            AuthorGender::Male,
            AuthorGender::Ambiguous,
            AuthorGender::Unknown,
            AuthorGender::Unlinked,
        ] {
            assert_eq!(g.as_str().parse::<AuthorGender>().unwrap(), g);
        }
        assert!("nonbinary".parse::<AuthorGender>().is_err());
    }

    fn record(id: &str, isbn: &str, authors: &[&str]) -> CatalogRecord {
        CatalogRecord {
            record_id: id.into(),
            source: Source::LibraryOfCongress,
            isbns: [Isbn::new(isbn).unwrap()].into_iter().collect(),
            work_id: None,
            author_names: authors.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn authority(id: &str, names: &[&str], genders: &[GenderAssertion]) -> AuthorityRecord {
        AuthorityRecord {
            authority_id: id.into(),
            name_forms: names.iter().map(|s| s.to_string()).collect(),
            gender_assertions: genders.to_vec(),
        }
    }

    #[test]
    fn linking_outcomes() {
        let records = vec![
            record("r1", "0000000001", &[]),
            record("r2", "0000000002", &["Jane Doe"]),
            record("r3", "0000000003", &["Sam Smith"]),
            record("r4", "0000000004", &["Nobody Known"]),
            // co-authors are ignored
            record("r5", "0000000005", &["Unlisted Person", "Jane Doe"]),
        ];
        let authorities = vec![
            authority("a1", &["Doe, Jane"], &[Female]),
            authority("a2", &["Smith, Sam"], &[Female]),
            authority("a3", &["Sam Smith"], &[Male, Unknown]),
        ];
        let clusters = cluster_items(&records);
        let g = link_item_genders(&clusters, &records, &authorities);
        assert_eq!(g["it:0000000001"], AuthorGender::Unlinked);
        assert_eq!(g["it:0000000002"], AuthorGender::Female);
        assert_eq!(g["it:0000000003"], AuthorGender::Ambiguous);
        assert_eq!(g["it:0000000004"], AuthorGender::Unlinked);
        assert_eq!(g["it:0000000005"], AuthorGender::Unlinked);
    }

    #[test]
    fn matched_but_silent_authority_is_unknown() {
        let records = vec![record("r1", "0000000001", &["Jane Doe"])];
        let authorities = vec![authority("a1", &["jane doe"], &[Unknown])];
        let g = link_item_genders(&cluster_items(&records), &records, &authorities);
        assert_eq!(g["it:0000000001"], AuthorGender::Unknown);
    }
}
