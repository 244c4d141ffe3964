//! Leave-one-out evaluation: user sampling, MRR, re-ranking loss, and
//! random hyperparameter search.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::AuthorGender;
use crate::interactions::{profile_stats, InteractionSet, Mode};
use crate::recommend::{recommend, train, Coverage, ModelConfig, RatingMatrix, RecList};
use crate::rerank::{Reranker, Strategy};
use crate::stats::smoothed_list_proportion;
use crate::{Error, Result};

/// Restrict sampling to users with enough known-gender items.
#[derive(Debug, Clone, Copy)]
pub struct KnownGenderFilter<'a> {
    pub genders: &'a BTreeMap<String, AuthorGender>,
    pub min: u64,
}

fn qualifying<'s>(set: &'s InteractionSet, min_ratings: usize, known: Option<KnownGenderFilter>) -> Vec<&'s str> {
    set.profile_sizes()
        .into_iter()
        .filter(|&(u, size)| {
            size >= min_ratings
                && known.is_none_or(|k| profile_stats(u, set, k.genders).map(|p| p.n >= k.min).unwrap_or(false))
        })
        .map(|(u, _)| u)
        .collect()
}

/// Uniform sample without replacement of users with at least `min_ratings`
/// interactions; the order is part of the seeded draw.
pub fn sample_users(
    set: &InteractionSet,
    min_ratings: usize,
    count: usize,
    known: Option<KnownGenderFilter>,
    seed: u64,
) -> Result<Vec<String>> {
    let pool = qualifying(set, min_ratings, known);
    if pool.len() < count {
        return Err(Error::InsufficientUsers {
            requested: count,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i].to_string())
        .collect())
}

/// Draw evaluation and tuning samples together so they cannot overlap.
pub fn sample_disjoint_users(
    set: &InteractionSet,
    min_ratings: usize,
    eval_count: usize,
    tune_count: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let mut all = sample_users(set, min_ratings, eval_count + tune_count, None, seed)?;
    let tune = all.split_off(eval_count);
    Ok((all, tune))
}

/// One held-out interaction per evaluated user, removed from training.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub seed: u64,
    /// user → held-out item
    pub heldout: BTreeMap<String, String>,
    pub train: InteractionSet,
}

impl EvalSplit {
    /// Users with a single interaction are skipped: they would have nothing
    /// left to train on.
    pub fn new(set: &InteractionSet, users: &[String], seed: u64) -> Result<EvalSplit> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut heldout = BTreeMap::new();
        let mut sorted: Vec<&String> = users.iter().collect();
        sorted.sort();
        sorted.dedup();
        for u in sorted {
            let rows = set.user_interactions(u).ok_or_else(|| Error::UnknownUser(u.clone()))?;
            if rows.len() < 2 {
                continue;
            }
            let pick = &rows[rng.random_range(0..rows.len())];
            heldout.insert(u.clone(), pick.item_id.clone());
        }
        let pairs: BTreeSet<(String, String)> = heldout.iter().map(|(u, i)| (u.clone(), i.clone())).collect();
        Ok(EvalSplit {
            seed,
            heldout,
            train: set.without_pairs(&pairs),
        })
    }
}

/// 1-indexed rank of `item` in `list`.
pub fn rank_of(list: &RecList, item: &str) -> Option<usize> {
    list.items().position(|i| i == item).map(|p| p + 1)
}

/// Mean reciprocal rank of each held-out item; users without a list or
/// whose item is missing contribute 0. Empty input gives 0.
pub fn mrr(lists: &BTreeMap<String, RecList>, heldout: &BTreeMap<String, String>) -> f64 {
    if heldout.is_empty() {
        return 0.0;
    }
    let total: f64 = heldout
        .iter()
        .map(|(u, item)| {
            lists
                .get(u)
                .and_then(|l| rank_of(l, item))
                .map_or(0.0, |r| 1.0 / r as f64)
        })
        .sum();
    total / heldout.len() as f64
}

/// Relative MRR loss in percent; `None` when the base MRR is 0.
pub fn accuracy_loss(base: f64, variant: f64) -> Option<f64> {
    (base > 0.0).then(|| (base - variant) / base * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub list_len: usize,
    /// Candidates handed to the re-rankers.
    pub rerank_pool: usize,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions {
            list_len: 100,
            rerank_pool: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub strategy: Strategy,
    pub mrr: f64,
    pub loss_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: String,
    pub mode: Mode,
    pub mrr: f64,
    /// Fraction of evaluated users who received a non-empty list.
    pub coverage: f64,
    /// Number of evaluated users (one list each).
    pub lists: usize,
    pub list_len: usize,
    pub seed: u64,
    pub variants: Vec<VariantReport>,
}

/// Everything produced while evaluating one configuration.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub lists: BTreeMap<String, RecList>,
    pub variant_lists: BTreeMap<Strategy, BTreeMap<String, RecList>>,
}

fn truncated(list: &RecList, n: usize) -> RecList {
    let mut out = list.clone();
    if out.entries.len() > n {
        out.entries.truncate(n);
        out.coverage = Coverage::Full;
    }
    out
}

/// Train on the split, recommend for every held-out user, and score the
/// base lists plus each re-ranking strategy. GreedyReflect targets each
/// user's smoothed training-profile proportion.
pub fn evaluate(
    config: &ModelConfig,
    split: &EvalSplit,
    options: &EvalOptions,
    genders: Option<&BTreeMap<String, AuthorGender>>,
    strategies: &[Strategy],
) -> Result<Evaluation> {
    if options.list_len == 0 {
        return Err(Error::InvalidInput("list length must be at least 1".into()));
    }
    if !strategies.is_empty() && genders.is_none() {
        return Err(Error::InvalidInput("re-ranking needs item genders".into()));
    }
    let matrix = RatingMatrix::from_interactions(&split.train)?;
    let model = train(&matrix, config)?;
    let pool = options.rerank_pool.max(options.list_len);
    let users: Vec<&String> = split.heldout.keys().collect();
    let candidates: Vec<RecList> = users
        .par_iter()
        .map(|u| recommend(&model, u, pool, &matrix))
        .collect::<Result<_>>()?;

    let lists: BTreeMap<String, RecList> = users
        .iter()
        .zip(&candidates)
        .map(|(u, c)| ((*u).clone(), truncated(c, options.list_len)))
        .collect();
    let base = mrr(&lists, &split.heldout);
    let covered = lists.values().filter(|l| !l.is_empty()).count();

    let mut variants = Vec::new();
    let mut variant_lists = BTreeMap::new();
    for &s in strategies {
        let genders = genders.expect("checked above");
        let reranked: BTreeMap<String, RecList> = users
            .par_iter()
            .zip(&candidates)
            .map(|(u, c)| {
                let target = match s {
                    Strategy::GreedyReflect => {
                        let p = profile_stats(u, &split.train, genders)?;
                        Some(smoothed_list_proportion(p.y, p.n)?)
                    }
                    _ => None,
                };
                let list = Reranker::new(s, target)?.apply(c, genders, options.list_len).list;
                Ok(((*u).clone(), list))
            })
            .collect::<Result<_>>()?;
        let m = mrr(&reranked, &split.heldout);
        variants.push(VariantReport {
            strategy: s,
            mrr: m,
            loss_pct: accuracy_loss(base, m),
        });
        variant_lists.insert(s, reranked);
    }

    Ok(Evaluation {
        report: EvalReport {
            algorithm: config.algorithm.to_string(),
            mode: split.train.mode(),
            mrr: base,
            coverage: if users.is_empty() { 0.0 } else { covered as f64 / users.len() as f64 },
            lists: users.len(),
            list_len: options.list_len,
            seed: split.seed,
            variants,
        },
        lists,
        variant_lists,
    })
}

/// Ranges to draw hyperparameters from. Absent entries keep the base value.
/// Integer ranges are inclusive; real ranges are sampled log-uniformly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub neighbors: Option<(usize, usize)>,
    pub factors: Option<(usize, usize)>,
    pub epochs: Option<(usize, usize)>,
    pub regularization: Option<(f64, f64)>,
    pub learning_rate: Option<(f64, f64)>,
    pub confidence_weight: Option<(f64, f64)>,
    pub damping: Option<(f64, f64)>,
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let ints = [self.neighbors, self.factors, self.epochs];
        let reals = [self.regularization, self.learning_rate, self.confidence_weight, self.damping];
        if ints.iter().flatten().any(|(lo, hi)| lo > hi)
            || reals.iter().flatten().any(|(lo, hi)| !(*lo > 0.0 && lo <= hi))
        {
            return Err(Error::InvalidInput("search ranges need lo <= hi and positive reals".into()));
        }
        Ok(())
    }

    pub fn sample(&self, base: &ModelConfig, rng: &mut ChaCha8Rng) -> ModelConfig {
        let mut c = base.clone();
        let int = |r: Option<(usize, usize)>, v: &mut usize, rng: &mut ChaCha8Rng| {
            if let Some((lo, hi)) = r {
                *v = rng.random_range(lo..=hi);
            }
        };
        let real = |r: Option<(f64, f64)>, v: &mut f64, rng: &mut ChaCha8Rng| {
            if let Some((lo, hi)) = r {
                *v = if lo == hi { lo } else { rng.random_range(lo.ln()..hi.ln()).exp() };
            }
        };
        int(self.neighbors, &mut c.neighbors, rng);
        int(self.factors, &mut c.factors, rng);
        int(self.epochs, &mut c.epochs, rng);
        real(self.regularization, &mut c.regularization, rng);
        real(self.learning_rate, &mut c.learning_rate, rng);
        real(self.confidence_weight, &mut c.confidence_weight, rng);
        real(self.damping, &mut c.damping, rng);
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: ModelConfig,
    pub score: f64,
    pub evaluated: usize,
    pub failed: usize,
}

/// Evaluate `budget` seeded random configurations and keep the best; ties
/// go to the earliest. Configurations whose objective fails are skipped.
pub fn random_search<F>(base: &ModelConfig, space: &SearchSpace, budget: usize, seed: u64, mut objective: F) -> Result<SearchResult>
where
    F: FnMut(&ModelConfig) -> Result<f64>,
{
    if budget == 0 {
        return Err(Error::InvalidInput("search budget must be at least 1".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(ModelConfig, f64)> = None;
    let mut failed = 0;
    for _ in 0..budget {
        let candidate = space.sample(base, &mut rng);
        match objective(&candidate) {
            Ok(score) if score.is_finite() => {
                if best.as_ref().is_none_or(|(_, b)| score > *b) {
                    best = Some((candidate, score));
                }
            }
            Ok(score) => {
                failed += 1;
                warn!("skipping configuration {candidate:?}: objective {score}");
            }
            Err(e) => {
                failed += 1;
                warn!("skipping configuration {candidate:?}: {e}");
            }
        }
    }
    let (best, score) = best.ok_or_else(|| Error::Training("every search configuration failed".into()))?;
    Ok(SearchResult {
        best,
        score,
        evaluated: budget,
        failed,
    })
}
