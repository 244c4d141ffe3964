//! Bayesian personalized ranking with matrix factorization.
//!
//! Each SGD step takes a triple (user, positive item, negative item) and
//! descends the loss `−ln σ(x_ui − x_uj) + λ/2 ‖params touched‖²`, where
//! `x_ui = p_u · q_i + b_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::als::{dot, Factors};
use super::matrix::RatingMatrix;
use crate::interactions::Mode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BprParams {
    pub factors: usize,
    pub regularization: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BprModel {
    pub users: Factors,
    pub items: Factors,
    pub item_bias: Vec<f64>,
}

/// Gradient of the per-triple loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradient {
    pub user: Vec<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub pos_bias: f64,
    pub neg_bias: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn ln_sigmoid(x: f64) -> f64 {
    // ln σ(x) = −softplus(−x)
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

impl BprModel {
    /// Untrained model: factors uniform in ±0.1, zero biases.
    pub fn init(n_users: usize, n_items: usize, factors: usize, seed: u64) -> BprModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows| Factors {
            rows,
            dim: factors,
            data: (0..rows * factors).map(|_| rng.random_range(-0.1..0.1)).collect(),
        };
        let users = draw(n_users);
        let items = draw(n_items);
        BprModel {
            users,
            items,
            item_bias: vec![0.0; n_items],
        }
    }

    pub fn predict(&self, u: usize, i: usize) -> f64 {
        dot(self.users.row(u), self.items.row(i)) + self.item_bias[i]
    }

    pub fn score(&self, u: usize) -> Vec<(usize, f64)> {
        (0..self.items.rows).map(|i| (i, self.predict(u, i))).collect()
    }

    pub fn triple_loss(&self, u: usize, i: usize, j: usize, reg: f64) -> f64 {
        let x = self.predict(u, i) - self.predict(u, j);
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        let penalty = sq(self.users.row(u))
            + sq(self.items.row(i))
            + sq(self.items.row(j))
            + self.item_bias[i].powi(2)
            + self.item_bias[j].powi(2);
        -ln_sigmoid(x) + 0.5 * reg * penalty
    }

    pub fn triple_gradient(&self, u: usize, i: usize, j: usize, reg: f64) -> TripleGradient {
        let x = self.predict(u, i) - self.predict(u, j);
        let g = sigmoid(-x);
        let (p, qi, qj) = (self.users.row(u), self.items.row(i), self.items.row(j));
        TripleGradient {
            user: (0..p.len()).map(|d| -g * (qi[d] - qj[d]) + reg * p[d]).collect(),
            pos: (0..p.len()).map(|d| -g * p[d] + reg * qi[d]).collect(),
            neg: (0..p.len()).map(|d| g * p[d] + reg * qj[d]).collect(),
            pos_bias: -g + reg * self.item_bias[i],
            neg_bias: g + reg * self.item_bias[j],
        }
    }

    fn step(&mut self, u: usize, i: usize, j: usize, reg: f64, lr: f64) {
        let grad = self.triple_gradient(u, i, j, reg);
        let dim = self.users.dim;
        for d in 0..dim {
            self.users.data[u * dim + d] -= lr * grad.user[d];
            self.items.data[i * dim + d] -= lr * grad.pos[d];
            self.items.data[j * dim + d] -= lr * grad.neg[d];
        }
        self.item_bias[i] -= lr * grad.pos_bias;
        self.item_bias[j] -= lr * grad.neg_bias;
    }
}

/// Mean per-user AUC over observed (positive) vs. unobserved items.
pub fn training_auc(model: &BprModel, m: &RatingMatrix) -> f64 {
    let mut total = 0.0;
    let mut counted = 0usize;
    for u in 0..m.n_users() {
        let (own, _) = m.row(u);
        if own.is_empty() || own.len() == m.n_items() {
            continue;
        }
        let scores: Vec<f64> = (0..m.n_items()).map(|i| model.predict(u, i)).collect();
        let mut wins = 0.0;
        for &i in own {
            for j in (0..m.n_items()).filter(|j| own.binary_search(j).is_err()) {
                wins += match scores[i].partial_cmp(&scores[j]) {
                    Some(std::cmp::Ordering::Greater) => 1.0,
                    Some(std::cmp::Ordering::Equal) => 0.5,
                    _ => 0.0,
                };
            }
        }
        total += wins / (own.len() * (m.n_items() - own.len())) as f64;
        counted += 1;
    }
    if counted == 0 {
        0.5
    } else {
        total / counted as f64
    }
}

pub fn train(m: &RatingMatrix, params: &BprParams) -> Result<BprModel> {
    if m.mode() != Mode::Implicit {
        return Err(Error::InvalidInput("BPR requires implicit feedback".into()));
    }
    let mut model = BprModel::init(m.n_users(), m.n_items(), params.factors, params.seed);
    let pairs: Vec<(usize, usize)> = m.triples().map(|(u, i, _)| (u, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    for _ in 0..params.epochs {
        for _ in 0..pairs.len() {
            let (u, i) = pairs[rng.random_range(0..pairs.len())];
            let (own, _) = m.row(u);
            if own.len() == m.n_items() {
                continue;
            }
            let j = loop {
                let j = rng.random_range(0..m.n_items());
                if own.binary_search(&j).is_err() {
                    break j;
                }
            };
            model.step(u, i, j, params.regularization, params.learning_rate);
        }
        if model.users.data.iter().chain(&model.items.data).any(|v| !v.is_finite()) {
            return Err(Error::Training("BPR factors diverged".into()));
        }
    }
    Ok(model)
}
