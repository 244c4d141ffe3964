//! Seeded generators for data with known ground truth.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Binomial, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::AuthorGender;
use crate::interactions::{dedupe_ratings, Interaction, InteractionSet, Mode};
use crate::stats::{inv_logit, ProfileObservation, RecObservation};
use crate::{Error, Result};

/// Regression of list balance on profile balance for one simulated
/// recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: String,
    pub intercept: f64,
    pub slope: f64,
    pub sigma: f64,
    /// Known-gender items per generated list.
    pub list_size: u64,
}

/// Shares of female, male and unknown-gender items in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenderMix {
    pub female: f64,
    pub male: f64,
    pub unknown: f64,
}

impl Default for GenderMix {
    fn default() -> GenderMix {
        GenderMix {
            female: 0.35,
            male: 0.5,
            unknown: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub users: usize,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub gamma: f64,
    /// Profiles smaller than this are redrawn; 0 disables truncation.
    pub min_profile: u64,
    pub algorithms: Vec<AlgorithmSpec>,
    pub items: usize,
    pub gender_mix: GenderMix,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> SynthSpec {
        SynthSpec {
            users: 1000,
            mu: -0.5,
            sigma: 1.2,
            nu: 4.0,
            gamma: 0.25,
            min_profile: 5,
            algorithms: Vec::new(),
            items: 2000,
            gender_mix: GenderMix::default(),
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.users == 0 {
            return bad("need at least one user");
        }
        if !self.mu.is_finite() || !(self.sigma >= 0.0) {
            return bad("tendency distribution needs finite mu and sigma >= 0");
        }
        if !(self.nu > 0.0 && self.gamma > 0.0) {
            return bad("profile-size parameters must be positive");
        }
        for a in &self.algorithms {
            if !(a.sigma >= 0.0 && a.slope.is_finite() && a.intercept.is_finite()) {
                return bad("algorithm regression parameters are out of range");
            }
        }
        let m = self.gender_mix;
        if [m.female, m.male, m.unknown].iter().any(|v| !(*v >= 0.0)) || m.female + m.male <= 0.0 {
            return bad("gender mix needs non-negative shares with some known gender");
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// A generated profile with its hidden tendency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub observation: ProfileObservation,
    /// `logit θ_u`
    pub tendency: f64,
    pub theta: f64,
}

fn user_id(k: usize, total: usize) -> String {
    let width = total.to_string().len();
    format!("u{k:0width$}")
}

fn negbinom(rng: &mut ChaCha8Rng, nu: f64, gamma: f64) -> u64 {
    let rate: f64 = Gamma::new(nu, 1.0 / gamma).expect("validated").sample(rng);
    if rate > 0.0 && rate.is_finite() {
        Poisson::new(rate).map_or(0, |p| p.sample(rng) as u64)
    } else {
        0
    }
}

pub fn gen_profiles(spec: &SynthSpec) -> Result<Vec<SynthProfile>> {
    spec.validate()?;
    let mut rng = spec.rng(0);
    Ok((0..spec.users)
        .map(|k| {
            let tendency = if spec.sigma == 0.0 {
                spec.mu
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.mu + spec.sigma * z
            };
            let theta = inv_logit(tendency);
            let n = loop {
                let n = negbinom(&mut rng, spec.nu, spec.gamma);
                if n >= spec.min_profile {
                    break n;
                }
            };
            let y = Binomial::new(n, theta).expect("probability").sample(&mut rng);
            SynthProfile {
                observation: ProfileObservation {
                    user_id: user_id(k, spec.users),
                    n,
                    y,
                },
                tendency,
                theta,
            }
        })
        .collect())
}

/// List balances from `logit θ̄ = b + s·logit θ_u + ε`. θ̄ is kept exactly;
/// the counts are the nearest consistent with the list size.
pub fn gen_rec_observations(profiles: &[SynthProfile], algorithms: &[AlgorithmSpec], seed: u64) -> Result<Vec<RecObservation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(profiles.len() * algorithms.len());
    for a in algorithms {
        for p in profiles {
            let noise = if a.sigma == 0.0 {
                0.0
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                a.sigma * z
            };
            let theta = inv_logit(a.intercept + a.slope * p.tendency + noise).clamp(1e-12, 1.0 - 1e-12);
            out.push(RecObservation::from_proportion(
                p.observation.user_id.clone(),
                a.name.clone(),
                theta,
                a.list_size,
            )?);
        }
    }
    Ok(out)
}

/// Items with known author genders and user interactions matching generated
/// profiles.
#[derive(Debug, Clone)]
pub struct SynthLibrary {
    pub profiles: Vec<SynthProfile>,
    pub genders: BTreeMap<String, AuthorGender>,
    pub interactions: Vec<Interaction>,
}

/// Build a catalog following the spec's gender mix and give every user
/// exactly `y_u` female and `n_u − y_u` male items, plus about one
/// unknown-gender item per five known ones.
pub fn gen_library(spec: &SynthSpec) -> Result<SynthLibrary> {
    let profiles = gen_profiles(spec)?;
    let mut rng = spec.rng(1);
    let m = spec.gender_mix;
    let total = m.female + m.male + m.unknown;
    let width = spec.items.to_string().len();
    let mut genders = BTreeMap::new();
    let mut pools: [Vec<String>; 3] = Default::default();
    for k in 0..spec.items {
        let r = rng.random::<f64>() * total;
        let (g, pool) = if r < m.female {
            (AuthorGender::Female, 0)
        } else if r < m.female + m.male {
            (AuthorGender::Male, 1)
        } else {
            (AuthorGender::Unknown, 2)
        };
        let id = format!("i{k:0width$}");
        pools[pool].push(id.clone());
        genders.insert(id, g);
    }

    let mut interactions = Vec::new();
    for p in &profiles {
        let o = &p.observation;
        let extra = Binomial::new(o.n, 0.2).expect("probability").sample(&mut rng);
        for (pool, count) in [(0, o.y), (1, o.n - o.y), (2, extra)] {
            let count = count as usize;
            if count > pools[pool].len() {
                if pool == 2 {
                    continue;
                }
                return Err(Error::InvalidInput(format!(
                    "catalog of {} items is too small for user {}",
                    spec.items, o.user_id
                )));
            }
            for k in index::sample(&mut rng, pools[pool].len(), count) {
                let rating = f64::from(rng.random_range(1u8..=5));
                interactions.push(Interaction {
                    user_id: o.user_id.clone(),
                    item_id: pools[pool][k].clone(),
                    rating: Some(rating),
                    timestamp: None,
                });
            }
        }
    }
    Ok(SynthLibrary {
        profiles,
        genders,
        interactions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixSpec {
    pub users: usize,
    pub items: usize,
    pub rank: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Fraction of cells observed.
    pub density: f64,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for MatrixSpec {
    fn default() -> MatrixSpec {
        MatrixSpec {
            users: 50,
            items: 80,
            rank: 3,
            noise: 0.1,
            density: 0.3,
            mode: Mode::Explicit,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthMatrix {
    pub interactions: InteractionSet,
    /// Row-major `users × rank`.
    pub user_factors: Vec<f64>,
    /// Row-major `items × rank`.
    pub item_factors: Vec<f64>,
}

/// Low-rank-plus-noise scores. Explicit mode observes each cell with
/// probability `density` and reports its score as the rating; implicit mode
/// keeps the highest-scoring `density` fraction of cells.
pub fn gen_rating_matrix(spec: &MatrixSpec) -> Result<SynthMatrix> {
    if spec.rank == 0 || spec.rank > spec.users.min(spec.items) {
        return Err(Error::InvalidInput(format!(
            "rank {} must be between 1 and min(users, items)",
            spec.rank
        )));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) || !(spec.noise >= 0.0) {
        return Err(Error::InvalidInput("density must be in (0, 1] and noise >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + 1.0
            })
            .collect()
    };
    let user_factors = draw(spec.users * spec.rank);
    let item_factors = draw(spec.items * spec.rank);
    let k = spec.rank;
    let mut cells = Vec::with_capacity(spec.users * spec.items);
    for u in 0..spec.users {
        for i in 0..spec.items {
            let dot: f64 = (0..k).map(|d| user_factors[u * k + d] * item_factors[i * k + d]).sum();
            let noise = if spec.noise > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.noise * z
            } else {
                0.0
            };
            cells.push((u, i, dot + noise));
        }
    }
    let uw = spec.users.to_string().len();
    let iw = spec.items.to_string().len();
    let row = |u: usize, i: usize, r: Option<f64>| Interaction::new(format!("u{u:0uw$}"), format!("i{i:0iw$}"), r);
    let rows: Vec<Interaction> = match spec.mode {
        Mode::Explicit => {
            let keep = Bernoulli::new(spec.density).expect("checked");
            cells
                .into_iter()
                .filter(|_| keep.sample(&mut rng))
                .map(|(u, i, s)| row(u, i, Some(s)))
                .collect()
        }
        Mode::Implicit => {
            let target = ((cells.len() as f64 * spec.density).round() as usize).max(1);
            cells.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
            cells.truncate(target);
            cells.into_iter().map(|(u, i, _)| row(u, i, None)).collect()
        }
    };
    let (interactions, _) = dedupe_ratings(rows, spec.mode);
    Ok(SynthMatrix {
        interactions,
        user_factors,
        item_factors,
    })
}
