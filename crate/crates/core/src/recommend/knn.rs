//! User-based and item-based nearest-neighbor collaborative filters.
//!
//! Explicit feedback: cosine similarity on mean-centered vectors, prediction
//! is the user (or item) mean plus the similarity-weighted average of the
//! neighbors' centered ratings, clamped to the rating scale. Implicit
//! feedback: plain cosine on binary vectors, and the score is the sum of the
//! neighbor similarities.
//!
//! Only neighbors with positive similarity are used, and a prediction needs at
//! least `min_neighbors` of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::RatingMatrix;
use crate::interactions::Mode;

/// Similarity-weighted average of centered neighbor values added to `base`.
/// Weights must be positive.
pub fn weighted_average(base: f64, neighbors: &[(f64, f64)]) -> f64 {
    let (num, den) = neighbors
        .iter()
        .fold((0.0, 0.0), |(n, d), &(sim, value)| (n + sim * value, d + sim));
    base + num / den
}

/// Sum of neighbor similarities.
pub fn similarity_sum(neighbors: &[(f64, f64)]) -> f64 {
    neighbors.iter().map(|&(sim, _)| sim).sum()
}

/// A neighbor candidate: (similarity, neighbor index, centered value).
type Candidate = (f64, usize, f64);

fn aggregate(
    mode: Mode,
    base: f64,
    mut cands: Vec<Candidate>,
    k: usize,
    min_neighbors: usize,
    clamp: impl Fn(f64) -> f64,
) -> Option<f64> {
    if cands.len() < min_neighbors.max(1) {
        return None;
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cands.truncate(k);
    let nbrs: Vec<(f64, f64)> = cands.iter().map(|&(s, _, v)| (s, v)).collect();
    Some(match mode {
        Mode::Explicit => clamp(weighted_average(base, &nbrs)),
        Mode::Implicit => similarity_sum(&nbrs),
    })
}

fn clamp_for(m: &RatingMatrix) -> impl Fn(f64) -> f64 + '_ {
    move |x| match m.scale() {
        Some(sc) => sc.clamp(x),
        None => x,
    }
}

/// User-based kNN. Similarities are computed on demand from the matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserUser {
    pub neighbors: usize,
    pub min_neighbors: usize,
    mode: Mode,
    norms: Vec<f64>,
}

impl UserUser {
    pub fn fit(m: &RatingMatrix, neighbors: usize, min_neighbors: usize) -> UserUser {
        let norms = (0..m.n_users())
            .map(|u| {
                let (_, vals) = m.row(u);
                vals.iter()
                    .map(|&r| {
                        let c = centered_user(m, u, r);
                        c * c
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        UserUser {
            neighbors,
            min_neighbors,
            mode: m.mode(),
            norms,
        }
    }

    /// Cosine similarity of user `u` to every user; the entry for `u` itself
    /// is 0 so it never qualifies as a neighbor.
    pub fn similarities(&self, m: &RatingMatrix, u: usize) -> Vec<f64> {
        let mut dot = vec![0.0; m.n_users()];
        let (items, vals) = m.row(u);
        for (&i, &r) in items.iter().zip(vals) {
            let cu = centered_user(m, u, r);
            let (users, uvals) = m.col(i);
            for (&v, &rv) in users.iter().zip(uvals) {
                dot[v] += cu * centered_user(m, v, rv);
            }
        }
        for (v, d) in dot.iter_mut().enumerate() {
            let denom = self.norms[u] * self.norms[v];
            *d = if v == u || denom <= 0.0 { 0.0 } else { (*d / denom).clamp(-1.0, 1.0) };
        }
        dot
    }

    /// Scores for every item `u` has not interacted with and that enough
    /// neighbors have.
    pub fn score(&self, m: &RatingMatrix, u: usize) -> Vec<(usize, f64)> {
        let sims = self.similarities(m, u);
        let (own, _) = m.row(u);
        let mut cands: Vec<Vec<Candidate>> = vec![Vec::new(); m.n_items()];
        for (v, &s) in sims.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let (items, vals) = m.row(v);
            for (&i, &r) in items.iter().zip(vals) {
                if own.binary_search(&i).is_err() {
                    cands[i].push((s, v, centered_user(m, v, r)));
                }
            }
        }
        let clamp = clamp_for(m);
        cands
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .filter_map(|(i, c)| {
                aggregate(self.mode, m.user_mean(u), c, self.neighbors, self.min_neighbors, &clamp).map(|s| (i, s))
            })
            .collect()
    }
}

fn centered_user(m: &RatingMatrix, u: usize, r: f64) -> f64 {
    match m.mode() {
        Mode::Explicit => r - m.user_mean(u),
        Mode::Implicit => r,
    }
}

fn centered_item(m: &RatingMatrix, i: usize, r: f64) -> f64 {
    match m.mode() {
        Mode::Explicit => r - m.item_mean(i),
        Mode::Implicit => r,
    }
}

/// Item-based kNN with precomputed positive-similarity neighbor lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemItem {
    pub neighbors: usize,
    pub min_neighbors: usize,
    mode: Mode,
    /// Per item: (neighbor item, similarity), by descending similarity.
    similarities: Vec<Vec<(usize, f64)>>,
}

impl ItemItem {
    pub fn fit(m: &RatingMatrix, neighbors: usize, min_neighbors: usize) -> ItemItem {
        let norms: Vec<f64> = (0..m.n_items())
            .map(|i| {
                let (_, vals) = m.col(i);
                vals.iter()
                    .map(|&r| centered_item(m, i, r).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();

        let similarities = (0..m.n_items())
            .into_par_iter()
            .map(|i| {
                let mut dot = vec![0.0; m.n_items()];
                let (users, vals) = m.col(i);
                for (&u, &r) in users.iter().zip(vals) {
                    let ci = centered_item(m, i, r);
                    let (items, uvals) = m.row(u);
                    for (&j, &rj) in items.iter().zip(uvals) {
                        dot[j] += ci * centered_item(m, j, rj);
                    }
                }
                let mut out: Vec<(usize, f64)> = dot
                    .into_iter()
                    .enumerate()
                    .filter(|&(j, d)| j != i && d > 0.0 && norms[i] > 0.0 && norms[j] > 0.0)
                    .map(|(j, d)| (j, (d / (norms[i] * norms[j])).min(1.0)))
                    .collect();
                out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                out
            })
            .collect();

        ItemItem {
            neighbors,
            min_neighbors,
            mode: m.mode(),
            similarities,
        }
    }

    /// Positive-similarity neighbors of item `i`.
    pub fn neighbors_of(&self, i: usize) -> &[(usize, f64)] {
        &self.similarities[i]
    }

    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.similarities[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, s)| s)
    }

    pub fn score(&self, m: &RatingMatrix, u: usize) -> Vec<(usize, f64)> {
        let (own, vals) = m.row(u);
        let mut cands: Vec<Vec<Candidate>> = vec![Vec::new(); m.n_items()];
        for (&j, &r) in own.iter().zip(vals) {
            let cj = centered_item(m, j, r);
            for &(i, s) in &self.similarities[j] {
                if own.binary_search(&i).is_err() {
                    cands[i].push((s, j, cj));
                }
            }
        }
        let clamp = clamp_for(m);
        cands
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .filter_map(|(i, c)| {
                aggregate(self.mode, m.item_mean(i), c, self.neighbors, self.min_neighbors, &clamp).map(|s| (i, s))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::{dedupe_ratings, Interaction, RatingScale};
    use proptest::prelude::*;

    fn matrix(mode: Mode, rows: &[(&str, &str, f64)]) -> RatingMatrix {
        let rows = rows.iter().map(|&(u, i, r)| Interaction::new(u, i, Some(r))).collect();
        let (set, _) = dedupe_ratings(rows, mode);
        RatingMatrix::from_interactions(&set.with_scale(Some(RatingScale::new(1.0, 5.0).unwrap()))).unwrap()
    }

    #[test]
    fn weighted_average_hand_values() {
        let p = weighted_average(3.0, &[(0.8, 1.0), (0.4, -0.5)]);
        assert!((p - 3.5).abs() < 1e-12);
        assert!((similarity_sum(&[(0.8, 1.0), (0.4, 1.0)]) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn min_neighbors_enforced() {
        let one = vec![(0.9, 0, 1.0)];
        assert_eq!(aggregate(Mode::Implicit, 0.0, one.clone(), 20, 2, |x| x), None);
        assert_eq!(aggregate(Mode::Implicit, 0.0, one, 20, 1, |x| x), Some(0.9));
    }

    #[test]
    fn top_k_keeps_most_similar() {
        let c = vec![(0.1, 0, 10.0), (0.9, 1, 1.0), (0.5, 2, 1.0)];
        assert_eq!(aggregate(Mode::Explicit, 0.0, c, 2, 1, |x| x), Some(1.0));
    }

    #[test]
    fn user_user_excludes_self_and_rated() {
        let m = matrix(
            Mode::Explicit,
            &[("a", "x", 5.0), ("a", "y", 1.0), ("b", "x", 4.0), ("b", "y", 2.0), ("b", "z", 5.0), ("c", "x", 5.0), ("c", "y", 2.0), ("c", "z", 4.0)],
        );
        let uu = UserUser::fit(&m, 20, 2);
        let sims = uu.similarities(&m, 0);
        assert_eq!(sims[0], 0.0);
        let scores = uu.score(&m, 0);
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].0, m.item_idx("z").unwrap());
        let p = scores[0].1;
        assert!((1.0..=5.0).contains(&p));
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        proptest::collection::vec((0u8..8, 0u8..10, 1u8..=5), 5..60)
    }

    fn build(rows: &[(u8, u8, u8)], mode: Mode) -> RatingMatrix {
        let rows: Vec<(String, String, f64)> = rows
            .iter()
            .map(|&(u, i, r)| (format!("u{u}"), format!("i{i}"), r as f64))
            .collect();
        let refs: Vec<(&str, &str, f64)> = rows.iter().map(|(u, i, r)| (u.as_str(), i.as_str(), *r)).collect();
        matrix(mode, &refs)
    }

    proptest! {
        #[test]
        fn user_cosine_symmetric_and_bounded(rows in arb_matrix(), explicit in any::<bool>()) {
            let mode = if explicit { Mode::Explicit } else { Mode::Implicit };
            let m = build(&rows, mode);
            let uu = UserUser::fit(&m, 20, 1);
            let all: Vec<Vec<f64>> = (0..m.n_users()).map(|u| uu.similarities(&m, u)).collect();
            for u in 0..m.n_users() {
                prop_assert_eq!(all[u][u], 0.0);
                for v in 0..m.n_users() {
                    prop_assert!((-1.0..=1.0).contains(&all[u][v]));
                    prop_assert!((all[u][v] - all[v][u]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn item_similarities_symmetric_without_self(rows in arb_matrix(), explicit in any::<bool>()) {
            let mode = if explicit { Mode::Explicit } else { Mode::Implicit };
            let m = build(&rows, mode);
            let ii = ItemItem::fit(&m, 20, 1);
            for i in 0..m.n_items() {
                for &(j, s) in ii.neighbors_of(i) {
                    prop_assert!(j != i);
                    prop_assert!(s > 0.0 && s <= 1.0);
                    prop_assert!((ii.similarity(j, i) - s).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn explicit_predictions_within_scale(rows in arb_matrix()) {
            let m = build(&rows, Mode::Explicit);
            let uu = UserUser::fit(&m, 20, 1);
            let ii = ItemItem::fit(&m, 20, 1);
            for u in 0..m.n_users() {
                for (_, s) in uu.score(&m, u).into_iter().chain(ii.score(&m, u)) {
                    prop_assert!((1.0..=5.0).contains(&s));
                }
            }
        }

        #[test]
        fn raising_a_neighbor_value_never_lowers_prediction(
            nbrs in proptest::collection::vec((0.01f64..1.0, -2.0f64..2.0), 1..10),
            which in any::<prop::sample::Index>(),
            bump in 0.0f64..3.0,
        ) {
            let before = weighted_average(3.0, &nbrs);
            let mut raised = nbrs.clone();
            raised[which.index(nbrs.len())].1 += bump;
            prop_assert!(weighted_average(3.0, &raised) >= before - 1e-12);
        }
    }
}
