//! Collaborative filters, non-personalized baselines, and top-N lists.

pub mod als;
pub mod bpr;
pub mod knn;
mod matrix;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use als::AlsModel;
pub use bpr::BprModel;
pub use knn::{ItemItem, UserUser};
pub use matrix::RatingMatrix;

use crate::ingest::check_header;
use crate::interactions::Mode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "uu")]
    UserUser,
    #[serde(rename = "ii")]
    ItemItem,
    #[serde(rename = "als")]
    Als,
    #[serde(rename = "bpr")]
    Bpr,
    #[serde(rename = "popular")]
    Popular,
    #[serde(rename = "avg-rating")]
    AvgRating,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::UserUser,
        Algorithm::ItemItem,
        Algorithm::Als,
        Algorithm::Bpr,
        Algorithm::Popular,
        Algorithm::AvgRating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::UserUser => "uu",
            Algorithm::ItemItem => "ii",
            Algorithm::Als => "als",
            Algorithm::Bpr => "bpr",
            Algorithm::Popular => "popular",
            Algorithm::AvgRating => "avg-rating",
        }
    }

    /// Whether the algorithm can run on data of this mode.
    pub fn supports(self, mode: Mode) -> bool {
        !matches!(
            (self, mode),
            (Algorithm::Bpr, Mode::Explicit) | (Algorithm::AvgRating, Mode::Implicit)
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm {s:?}")))
    }
}

/// Algorithm choice plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub algorithm: Algorithm,
    /// Neighborhood size k for UU and II.
    pub neighbors: usize,
    pub min_neighbors: usize,
    /// Latent dimension f.
    pub factors: usize,
    /// Regularization λ.
    pub regularization: f64,
    /// SGD learning rate η (BPR).
    pub learning_rate: f64,
    /// BPR epochs / ALS sweep cap.
    pub epochs: usize,
    /// Implicit ALS confidence weight α.
    pub confidence_weight: f64,
    /// Damping strength for the average-rating baseline.
    pub damping: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            algorithm: Algorithm::Popular,
            neighbors: 20,
            min_neighbors: 2,
            factors: 50,
            regularization: 0.1,
            learning_rate: 0.05,
            epochs: 20,
            confidence_weight: 40.0,
            damping: 5.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(algorithm: Algorithm) -> ModelConfig {
        ModelConfig {
            algorithm,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if !self.algorithm.supports(mode) {
            return Err(Error::InvalidInput(format!(
                "{} cannot be trained on {mode} feedback",
                self.algorithm
            )));
        }
        let bad = |what: &str| Err(Error::InvalidInput(format!("{what} must be positive")));
        match self.algorithm {
            Algorithm::UserUser | Algorithm::ItemItem if self.neighbors == 0 => bad("neighbors"),
            Algorithm::Als | Algorithm::Bpr if self.factors == 0 => bad("factors"),
            Algorithm::Als | Algorithm::Bpr if self.epochs == 0 => bad("epochs"),
            Algorithm::Als if !(self.regularization >= 0.0) => bad("regularization"),
            Algorithm::Als if mode == Mode::Implicit && !(self.confidence_weight > 0.0) => bad("confidence weight"),
            Algorithm::Bpr if !(self.learning_rate > 0.0) => bad("learning rate"),
            Algorithm::AvgRating if !(self.damping >= 0.0) => bad("damping"),
            _ => Ok(()),
        }
    }
}

/// Damped per-item means: `(Σr + d·global) / (count + d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub scores: Vec<f64>,
}

impl ItemScores {
    pub fn popularity(m: &RatingMatrix) -> ItemScores {
        ItemScores {
            scores: (0..m.n_items()).map(|i| m.col(i).0.len() as f64).collect(),
        }
    }

    pub fn damped_mean(m: &RatingMatrix, damping: f64) -> ItemScores {
        let global = m.global_mean();
        ItemScores {
            scores: (0..m.n_items())
                .map(|i| {
                    let (_, vals) = m.col(i);
                    (vals.iter().sum::<f64>() + damping * global) / (vals.len() as f64 + damping)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "kebab-case")]
pub enum ModelState {
    UserUser(UserUser),
    ItemItem(ItemItem),
    Als(AlsModel),
    Bpr(BprModel),
    Popular(ItemScores),
    AvgRating(ItemScores),
}

/// A trained model together with the id spaces it was trained on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub version: String,
    pub config: ModelConfig,
    pub mode: Mode,
    pub users: Vec<String>,
    pub items: Vec<String>,
    pub state: ModelState,
}

pub fn train(m: &RatingMatrix, config: &ModelConfig) -> Result<Model> {
    config.validate(m.mode())?;
    let state = match config.algorithm {
        Algorithm::UserUser => ModelState::UserUser(UserUser::fit(m, config.neighbors, config.min_neighbors)),
        Algorithm::ItemItem => ModelState::ItemItem(ItemItem::fit(m, config.neighbors, config.min_neighbors)),
        Algorithm::Als => ModelState::Als(als::train(
            m,
            &als::AlsParams {
                factors: config.factors,
                regularization: config.regularization,
                confidence_weight: config.confidence_weight,
                max_sweeps: config.epochs,
                seed: config.seed,
            },
        )?),
        Algorithm::Bpr => ModelState::Bpr(bpr::train(
            m,
            &bpr::BprParams {
                factors: config.factors,
                regularization: config.regularization,
                learning_rate: config.learning_rate,
                epochs: config.epochs,
                seed: config.seed,
            },
        )?),
        Algorithm::Popular => ModelState::Popular(ItemScores::popularity(m)),
        Algorithm::AvgRating => ModelState::AvgRating(ItemScores::damped_mean(m, config.damping)),
    };
    Ok(Model {
        version: crate::VERSION.to_string(),
        config: config.clone(),
        mode: m.mode(),
        users: m.users().to_vec(),
        items: m.items().to_vec(),
        state,
    })
}

impl Model {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    fn check_matrix(&self, m: &RatingMatrix) -> Result<()> {
        if self.users != m.users() || self.items != m.items() {
            return Err(Error::InvalidInput(
                "rating matrix does not match the data the model was trained on".into(),
            ));
        }
        Ok(())
    }

    /// Raw scores for every item the model can score for user index `u`,
    /// including items the user already has.
    fn raw_scores(&self, m: &RatingMatrix, u: usize) -> Vec<(usize, f64)> {
        match &self.state {
            ModelState::UserUser(k) => k.score(m, u),
            ModelState::ItemItem(k) => k.score(m, u),
            ModelState::Als(f) => f.score(u),
            ModelState::Bpr(f) => f.score(u),
            ModelState::Popular(s) | ModelState::AvgRating(s) => s.scores.iter().copied().enumerate().collect(),
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Model> {
        Ok(serde_json::from_reader(input)?)
    }
}

/// How completely a list could be filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coverage {
    Full,
    /// Fewer scorable items than requested.
    Short,
    /// The user is unknown to the model.
    NoCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecEntry {
    pub item_id: String,
    pub score: f64,
}

/// An ordered recommendation list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecList {
    pub user_id: String,
    pub algorithm: String,
    pub entries: Vec<RecEntry>,
    pub coverage: Coverage,
}

impl RecList {
    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.item_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Top-`n` unseen items for `user_id`, ties broken by ascending item id.
pub fn recommend(model: &Model, user_id: &str, n: usize, m: &RatingMatrix) -> Result<RecList> {
    if n == 0 {
        return Err(Error::InvalidInput("list length must be at least 1".into()));
    }
    model.check_matrix(m)?;
    let mut list = RecList {
        user_id: user_id.to_string(),
        algorithm: model.algorithm().to_string(),
        entries: Vec::new(),
        coverage: Coverage::NoCoverage,
    };
    let Some(u) = m.user_idx(user_id) else {
        return Ok(list);
    };
    let (own, _) = m.row(u);
    let mut scored: Vec<(usize, f64)> = model
        .raw_scores(m, u)
        .into_iter()
        .filter(|&(i, s)| s.is_finite() && own.binary_search(&i).is_err())
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    list.coverage = if scored.len() >= n { Coverage::Full } else { Coverage::Short };
    scored.truncate(n);
    list.entries = scored
        .into_iter()
        .map(|(i, score)| RecEntry {
            item_id: m.items()[i].clone(),
            score,
        })
        .collect();
    Ok(list)
}

/// Write `recommendations.csv` (`user,rank,item,score,algorithm`), with an
/// optional trailing `strategy` column for re-ranked lists.
pub fn write_recommendations<W: Write>(out: W, lists: &[RecList], strategy: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["user", "rank", "item", "score", "algorithm"];
    if strategy.is_some() {
        header.push("strategy");
    }
    w.write_record(&header)?;
    for list in lists {
        for (rank, e) in list.entries.iter().enumerate() {
            let mut row = vec![
                list.user_id.clone(),
                (rank + 1).to_string(),
                e.item_id.clone(),
                e.score.to_string(),
                list.algorithm.clone(),
            ];
            if let Some(s) = strategy {
                row.push(s.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read `recommendations.csv`, with or without the `strategy` column. Lists
/// are keyed by (algorithm, user); coverage is not stored and comes back as
/// `Full` for non-empty lists.
pub fn read_recommendations<R: Read>(input: R) -> Result<Vec<RecList>> {
    read_tagged_recommendations(input).map(|(lists, _)| lists)
}

/// Like [`read_recommendations`], also returning the file's strategy tag.
/// A file mixing several strategies is rejected.
pub fn read_tagged_recommendations<R: Read>(input: R) -> Result<(Vec<RecList>, Option<String>)> {
    let mut r = csv::Reader::from_reader(input);
    let with_strategy = r.headers()?.len() == 6;
    if with_strategy {
        check_header(&mut r, &["user", "rank", "item", "score", "algorithm", "strategy"])?;
    } else {
        check_header(&mut r, &["user", "rank", "item", "score", "algorithm"])?;
    }
    let mut lists: BTreeMap<(String, String), Vec<(usize, RecEntry)>> = BTreeMap::new();
    let mut strategy: Option<String> = None;
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Parse {
            path: "recommendations.csv".into(),
            line: line + 2,
            message: format!("bad {what}"),
        };
        let rank: usize = row[1].parse().map_err(|_| bad("rank"))?;
        let score: f64 = row[3].parse().map_err(|_| bad("score"))?;
        lists
            .entry((row[4].to_string(), row[0].to_string()))
            .or_default()
            .push((rank, RecEntry { item_id: row[2].to_string(), score }));
        if with_strategy {
            match &strategy {
                None => strategy = Some(row[5].to_string()),
                Some(s) if s != &row[5] => return Err(bad("strategy: file mixes strategies")),
                Some(_) => {}
            }
        }
    }
    let lists = lists
        .into_iter()
        .map(|((algorithm, user_id), mut entries)| {
            entries.sort_by_key(|(rank, _)| *rank);
            RecList {
                user_id,
                algorithm,
                entries: entries.into_iter().map(|(_, e)| e).collect(),
                coverage: Coverage::Full,
            }
        })
        .collect();
    Ok((lists, strategy))
}
