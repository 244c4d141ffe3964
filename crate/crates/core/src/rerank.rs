//! Gender-balancing re-rankers for recommendation lists.
//!
//! Only female- and male-authored items count toward balance; every other
//! label is always accepted. Adding gender g "worsens" balance when g
//! already outnumbers the other gender.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::AuthorGender;
use crate::recommend::{Coverage, RecEntry, RecList};
use crate::stats::smoothed_list_proportion;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    SingleEq,
    GreedyEq,
    GreedyReflect,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::SingleEq, Strategy::GreedyEq, Strategy::GreedyReflect];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SingleEq => "single-eq",
            Strategy::GreedyEq => "greedy-eq",
            Strategy::GreedyReflect => "greedy-reflect",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy {s:?}")))
    }
}

/// Running counts of the list being built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BalanceState {
    pub female: u64,
    pub male: u64,
    pub chosen: Vec<usize>,
    pub target: Option<f64>,
}

impl BalanceState {
    fn counts_with(&self, g: AuthorGender) -> (u64, u64) {
        match g {
            AuthorGender::Female => (self.female + 1, self.male),
            AuthorGender::Male => (self.female, self.male + 1),
            _ => (self.female, self.male),
        }
    }

    /// Equal-balance rule: g is allowed while it does not outnumber the
    /// other gender.
    fn balanced_accepts(&self, g: AuthorGender) -> bool {
        match g {
            AuthorGender::Female => self.female <= self.male,
            AuthorGender::Male => self.male <= self.female,
            _ => true,
        }
    }

    fn distance(&self, female: u64, male: u64) -> f64 {
        let theta = smoothed_list_proportion(female, female + male).expect("female <= known");
        (theta - self.target.expect("reflect needs a target")).abs()
    }

    /// Calibration rule: accept when the smoothed proportion does not move
    /// away from the target.
    fn reflect_accepts(&self, g: AuthorGender) -> bool {
        if !g.is_known() {
            return true;
        }
        let (f, m) = self.counts_with(g);
        self.distance(f, m) <= self.distance(self.female, self.male)
    }

    fn push(&mut self, idx: usize, g: AuthorGender) {
        (self.female, self.male) = self.counts_with(g);
        self.chosen.push(idx);
    }

    /// Smoothed distance to the target; `None` without a target.
    pub fn current_distance(&self) -> Option<f64> {
        self.target.map(|_| self.distance(self.female, self.male))
    }
}

/// A re-ranked list and how many picks ignored the balance rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Reranked {
    pub list: RecList,
    pub relaxations: usize,
}

fn gender_of(genders: &BTreeMap<String, AuthorGender>, item: &str) -> AuthorGender {
    // Items missing from the map have no author link.
    genders.get(item).copied().unwrap_or(AuthorGender::Unlinked)
}

fn finish(ranked: &RecList, state: &BalanceState, n: usize, relaxations: usize) -> Reranked {
    let entries: Vec<RecEntry> = state.chosen.iter().map(|&i| ranked.entries[i].clone()).collect();
    let coverage = match ranked.coverage {
        Coverage::NoCoverage => Coverage::NoCoverage,
        _ if entries.len() >= n => Coverage::Full,
        _ => Coverage::Short,
    };
    Reranked {
        list: RecList {
            user_id: ranked.user_id.clone(),
            algorithm: ranked.algorithm.clone(),
            entries,
            coverage,
        },
        relaxations,
    }
}

fn single_pass(ranked: &RecList, genders: &BTreeMap<String, AuthorGender>, n: usize) -> Reranked {
    let mut state = BalanceState::default();
    for (idx, e) in ranked.entries.iter().enumerate() {
        if state.chosen.len() >= n {
            break;
        }
        let g = gender_of(genders, &e.item_id);
        if state.balanced_accepts(g) {
            state.push(idx, g);
        }
    }
    finish(ranked, &state, n, 0)
}

fn greedy<F>(ranked: &RecList, genders: &BTreeMap<String, AuthorGender>, n: usize, mut state: BalanceState, accepts: F) -> Reranked
where
    F: Fn(&BalanceState, AuthorGender) -> bool,
{
    let labels: Vec<AuthorGender> = ranked.entries.iter().map(|e| gender_of(genders, &e.item_id)).collect();
    let mut used = vec![false; labels.len()];
    let mut relaxations = 0;
    let want = n.min(labels.len());
    while state.chosen.len() < want {
        let pick = (0..labels.len())
            .find(|&i| !used[i] && accepts(&state, labels[i]))
            .or_else(|| {
                relaxations += 1;
                (0..labels.len()).find(|&i| !used[i])
            })
            .expect("fewer picks than candidates");
        used[pick] = true;
        state.push(pick, labels[pick]);
    }
    finish(ranked, &state, n, relaxations)
}

/// One pass in rank order, skipping items that would worsen balance. May
/// return fewer than `n` items.
pub fn single_eq(ranked: &RecList, genders: &BTreeMap<String, AuthorGender>, n: usize) -> RecList {
    single_pass(ranked, genders, n).list
}

/// Repeatedly take the best-ranked item that keeps balance; when none
/// does, take the best-ranked remaining item.
pub fn greedy_eq(ranked: &RecList, genders: &BTreeMap<String, AuthorGender>, n: usize) -> RecList {
    greedy(ranked, genders, n, BalanceState::default(), BalanceState::balanced_accepts).list
}

/// Greedy calibration toward `target`, the desired female proportion.
pub fn greedy_reflect(ranked: &RecList, genders: &BTreeMap<String, AuthorGender>, target: f64, n: usize) -> Result<RecList> {
    Ok(Reranker::new(Strategy::GreedyReflect, Some(target))?.apply(ranked, genders, n).list)
}

/// A strategy together with its target, ready to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reranker {
    strategy: Strategy,
    target: Option<f64>,
}

impl Reranker {
    pub fn new(strategy: Strategy, target: Option<f64>) -> Result<Reranker> {
        match (strategy, target) {
            (Strategy::GreedyReflect, Some(t)) if t > 0.0 && t < 1.0 => {}
            (Strategy::GreedyReflect, Some(t)) => {
                return Err(Error::Domain(format!("target proportion {t} is outside (0, 1)")));
            }
            (Strategy::GreedyReflect, None) => {
                return Err(Error::InvalidInput("greedy-reflect needs a target".into()));
            }
            _ => {}
        }
        Ok(Reranker { strategy, target })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn apply(&self, ranked: &RecList, genders: &BTreeMap<String, AuthorGender>, n: usize) -> Reranked {
        match self.strategy {
            Strategy::SingleEq => single_pass(ranked, genders, n),
            Strategy::GreedyEq => greedy(ranked, genders, n, BalanceState::default(), BalanceState::balanced_accepts),
            Strategy::GreedyReflect => {
                let state = BalanceState {
                    target: self.target,
                    ..BalanceState::default()
                };
                greedy(ranked, genders, n, state, BalanceState::reflect_accepts)
            }
        }
    }
}
