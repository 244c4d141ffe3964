//! Grouping ISBNs into works.
//!
//! Records and ISBNs form a bipartite graph; each connected component is one
//! recommendable item. A record linked to a work contributes the work node
//! instead of its own, so all editions of a work collapse together.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::gender::AuthorGender;
use super::isbn::Isbn;
use super::records::CatalogRecord;

/// Disjoint-set forest with path compression and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merge the sets holding `a` and `b`; returns false if already merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// A work: the connected component of ISBNs and records treated as one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemCluster {
    pub item_id: String,
    pub members: BTreeSet<Isbn>,
    pub records: BTreeSet<String>,
    pub gender: AuthorGender,
}

/// Derive the item id for a member set: `it:` plus the smallest ISBN.
pub fn item_id_for(members: &BTreeSet<Isbn>) -> Option<String> {
    members.first().map(|isbn| format!("it:{isbn}"))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node<'a> {
    Work(&'a str),
    Record(&'a str),
}

/// Partition the ISBNs of `records` into connected components.
///
/// Output is sorted by item id. Genders start as
/// [`AuthorGender::Unlinked`]; see [`super::link_item_genders`].
pub fn cluster_items(records: &[CatalogRecord]) -> Vec<ItemCluster> {
    let mut isbn_index: HashMap<&Isbn, usize> = HashMap::new();
    let mut node_index: HashMap<Node<'_>, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut next = 0usize;

    for rec in records.iter().filter(|r| !r.isbns.is_empty()) {
        let node = match &rec.work_id {
            Some(w) => Node::Work(w),
            None => Node::Record(&rec.record_id),
        };
        let ni = *node_index.entry(node).or_insert_with(|| {
            next += 1;
            next - 1
        });
        for isbn in &rec.isbns {
            let ii = *isbn_index.entry(isbn).or_insert_with(|| {
                next += 1;
                next - 1
            });
            edges.push((ni, ii));
        }
    }

    let mut uf = UnionFind::new(next);
    for &(a, b) in &edges {
        uf.union(a, b);
    }

    let mut members: HashMap<usize, BTreeSet<Isbn>> = HashMap::new();
    for (isbn, &idx) in &isbn_index {
        members.entry(uf.find(idx)).or_default().insert((*isbn).clone());
    }
    let mut rec_sets: HashMap<usize, BTreeSet<String>> = HashMap::new();
    for rec in records {
        if let Some(isbn) = rec.isbns.first() {
            let root = uf.find(isbn_index[isbn]);
            rec_sets.entry(root).or_default().insert(rec.record_id.clone());
        }
    }

    let mut out: BTreeMap<String, ItemCluster> = BTreeMap::new();
    for (root, members) in members {
        let item_id = item_id_for(&members).expect("component has an ISBN");
        out.insert(
            item_id.clone(),
            ItemCluster {
                item_id,
                members,
                records: rec_sets.remove(&root).unwrap_or_default(),
                gender: AuthorGender::Unlinked,
            },
        );
    }
    out.into_values().collect()
}

/// Map each ISBN to the item holding it.
pub fn isbn_to_item(clusters: &[ItemCluster]) -> HashMap<Isbn, String> {
    clusters
        .iter()
        .flat_map(|c| c.members.iter().map(|i| (i.clone(), c.item_id.clone())))
        .collect()
}
