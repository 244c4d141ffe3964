//! Catalog ingestion: ISBN extraction, edition clustering, and author-gender
//! linking.

mod cluster;
mod gender;
mod isbn;
mod names;
mod records;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

pub use cluster::{cluster_items, isbn_to_item, item_id_for, ItemCluster, UnionFind};
pub use gender::{link_item_genders, resolve_author_gender, AuthorGender, AuthorityIndex};
pub use isbn::{extract_isbns, Isbn};
pub use names::normalize_name;
pub use records::{read_authorities, read_records, AuthorityRecord, CatalogRecord, GenderAssertion, Source};

use crate::{Error, Result};

/// Write `clusters.csv` (`item_id,isbn`), one row per member ISBN.
pub fn write_clusters<W: Write>(out: W, clusters: &[ItemCluster]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_id", "isbn"])?;
    for c in clusters {
        for isbn in &c.members {
            w.write_record([c.item_id.as_str(), isbn.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read `clusters.csv` back into clusters. Record sets are not stored in the
/// file and come back empty.
pub fn read_clusters<R: Read>(input: R) -> Result<Vec<ItemCluster>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &["item_id", "isbn"])?;
    let mut groups: BTreeMap<String, BTreeSet<Isbn>> = BTreeMap::new();
    for row in r.records() {
        let row = row?;
        groups.entry(row[0].to_string()).or_default().insert(Isbn::new(&row[1])?);
    }
    Ok(groups
        .into_iter()
        .map(|(item_id, members)| ItemCluster {
            item_id,
            members,
            records: BTreeSet::new(),
            gender: AuthorGender::Unlinked,
        })
        .collect())
}

/// Write `genders.csv` (`item_id,gender`).
pub fn write_genders<W: Write>(out: W, genders: &BTreeMap<String, AuthorGender>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item_id", "gender"])?;
    for (item, g) in genders {
        w.write_record([item.as_str(), g.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_genders<R: Read>(input: R) -> Result<BTreeMap<String, AuthorGender>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &["item_id", "gender"])?;
    let mut out = BTreeMap::new();
    for row in r.records() {
        let row = row?;
        out.insert(row[0].to_string(), row[1].parse()?);
    }
    Ok(out)
}

pub(crate) fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = r.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "expected CSV header {:?}, found {:?}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}
