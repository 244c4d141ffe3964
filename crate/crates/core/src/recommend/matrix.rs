use std::collections::{BTreeSet, HashMap};

use crate::interactions::{InteractionSet, Mode, RatingScale};
use crate::{Error, Result};

/// Sparse user × item rating matrix, stored row-wise and column-wise.
///
/// User and item indices follow ascending id order, so index order doubles as
/// the deterministic tie-break order. Implicit matrices store 1.0 for every
/// observed pair.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    mode: Mode,
    scale: Option<RatingScale>,
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    row_ptr: Vec<usize>,
    row_items: Vec<usize>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_users: Vec<usize>,
    col_vals: Vec<f64>,
    user_means: Vec<f64>,
    item_means: Vec<f64>,
}

impl RatingMatrix {
    pub fn from_interactions(set: &InteractionSet) -> Result<RatingMatrix> {
        if set.is_empty() {
            return Err(Error::Training("empty rating matrix".into()));
        }
        let mode = set.mode();
        let users: Vec<String> = set.users().into_iter().map(String::from).collect();
        let items: Vec<String> = set
            .interactions()
            .iter()
            .map(|i| i.item_id.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect();
        let user_index: HashMap<String, usize> = users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        let item_index: HashMap<String, usize> = items.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();

        let nnz = set.len();
        let mut row_ptr = vec![0usize; users.len() + 1];
        let mut row_items = Vec::with_capacity(nnz);
        let mut row_vals = Vec::with_capacity(nnz);
        let mut col_counts = vec![0usize; items.len()];
        for it in set.interactions() {
            let u = user_index[&it.user_id];
            let i = item_index[&it.item_id];
            let v = match mode {
                Mode::Explicit => it
                    .rating
                    .ok_or_else(|| Error::InvalidInput(format!("missing rating for {}/{}", it.user_id, it.item_id)))?,
                Mode::Implicit => 1.0,
            };
            row_ptr[u + 1] += 1;
            row_items.push(i);
            row_vals.push(v);
            col_counts[i] += 1;
        }
        for u in 0..users.len() {
            row_ptr[u + 1] += row_ptr[u];
        }

        let mut col_ptr = vec![0usize; items.len() + 1];
        for i in 0..items.len() {
            col_ptr[i + 1] = col_ptr[i] + col_counts[i];
        }
        let mut fill = col_ptr.clone();
        let mut col_users = vec![0usize; nnz];
        let mut col_vals = vec![0.0; nnz];
        for u in 0..users.len() {
            for k in row_ptr[u]..row_ptr[u + 1] {
                let i = row_items[k];
                col_users[fill[i]] = u;
                col_vals[fill[i]] = row_vals[k];
                fill[i] += 1;
            }
        }

        let mean = |vals: &[f64]| vals.iter().sum::<f64>() / vals.len() as f64;
        let user_means = (0..users.len()).map(|u| mean(&row_vals[row_ptr[u]..row_ptr[u + 1]])).collect();
        let item_means = (0..items.len()).map(|i| mean(&col_vals[col_ptr[i]..col_ptr[i + 1]])).collect();

        Ok(RatingMatrix {
            mode,
            scale: set.scale(),
            users,
            items,
            user_index,
            item_index,
            row_ptr,
            row_items,
            row_vals,
            col_ptr,
            col_users,
            col_vals,
            user_means,
            item_means,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn scale(&self) -> Option<RatingScale> {
        self.scale
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn nnz(&self) -> usize {
        self.row_items.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn user_idx(&self, user: &str) -> Option<usize> {
        self.user_index.get(user).copied()
    }

    pub fn item_idx(&self, item: &str) -> Option<usize> {
        self.item_index.get(item).copied()
    }

    /// Items (ascending) and values of user `u`.
    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[u]..self.row_ptr[u + 1];
        (&self.row_items[r.clone()], &self.row_vals[r])
    }

    /// Users (ascending) and values of item `i`.
    pub fn col(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[i]..self.col_ptr[i + 1];
        (&self.col_users[r.clone()], &self.col_vals[r])
    }

    pub fn get(&self, u: usize, i: usize) -> Option<f64> {
        let (items, vals) = self.row(u);
        items.binary_search(&i).ok().map(|k| vals[k])
    }

    pub fn user_mean(&self, u: usize) -> f64 {
        self.user_means[u]
    }

    pub fn item_mean(&self, i: usize) -> f64 {
        self.item_means[i]
    }

    pub fn global_mean(&self) -> f64 {
        self.row_vals.iter().sum::<f64>() / self.nnz() as f64
    }

    /// (user, item, value) triples in row order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_users()).flat_map(move |u| {
            let (items, vals) = self.row(u);
            items.iter().zip(vals).map(move |(&i, &v)| (u, i, v))
        })
    }
}
