//! Hierarchical model of user author-gender tendencies and how recommenders
//! propagate them.
//!
//! Profiles: `y_u ~ Binomial(n_u, θ_u)`, `logit θ_u ~ Normal(μ, σ)`,
//! `n_u ~ NegBinomial(ν, γ)` (shape/rate). Recommendation lists:
//! `logit θ̄_ua ~ Normal(b_a + s_a·logit θ_u, σ_a)`.
//!
//! Priors: σ, ν, γ, σ_a ~ Exponential(0.01); μ, b_a, s_a ~ Normal(0, 100).
//! Positive parameters are sampled on the log scale.

mod diagnostics;
mod sampler;
mod summary;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::interactions::ProfileStats;
use crate::{Error, Result};

pub use diagnostics::{effective_sample_size, split_rhat, Diagnostic, RHAT_LIMIT};
pub use sampler::{fit, FixedParams, McmcConfig, Parameter, PosteriorSamples};
pub use summary::{
    posterior_predict, quantile, regression_summary, resample, write_diagnostics, write_posterior, Interval,
    PredictedProfile, ProfileSummary, RegressionSummary, Summary,
};

const PRIOR_RATE: f64 = 0.01;
const PRIOR_SD: f64 = 100.0;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn logit(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok((p / (1.0 - p)).ln())
    } else {
        Err(Error::Domain(format!("logit is undefined at {p}")))
    }
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Add-one smoothed female proportion `(ȳ+1)/(n̄+2)`.
pub fn smoothed_list_proportion(y: u64, n: u64) -> Result<f64> {
    if y > n {
        return Err(Error::InvalidInput(format!("{y} female items out of {n} known")));
    }
    Ok((y as f64 + 1.0) / (n as f64 + 2.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileObservation {
    pub user_id: String,
    pub n: u64,
    pub y: u64,
}

impl From<ProfileStats> for ProfileObservation {
    fn from(p: ProfileStats) -> ProfileObservation {
        ProfileObservation {
            user_id: p.user_id,
            n: p.n,
            y: p.y,
        }
    }
}

/// Gender balance of one algorithm's list for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecObservation {
    pub user_id: String,
    pub algorithm: String,
    pub n: u64,
    pub y: u64,
    /// Smoothed proportion θ̄; the regression sees only this.
    pub theta: f64,
}

impl RecObservation {
    pub fn from_counts(user_id: impl Into<String>, algorithm: impl Into<String>, y: u64, n: u64) -> Result<RecObservation> {
        Ok(RecObservation {
            user_id: user_id.into(),
            algorithm: algorithm.into(),
            n,
            y,
            theta: smoothed_list_proportion(y, n)?,
        })
    }

    /// An observation with a given θ̄ and the nearest counts for a list with
    /// `n` known-gender items.
    pub fn from_proportion(user_id: impl Into<String>, algorithm: impl Into<String>, theta: f64, n: u64) -> Result<RecObservation> {
        logit(theta)?;
        let y = (theta * (n as f64 + 2.0) - 1.0).round().clamp(0.0, n as f64) as u64;
        Ok(RecObservation {
            user_id: user_id.into(),
            algorithm: algorithm.into(),
            n,
            y,
            theta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionParams {
    pub intercept: f64,
    pub slope: f64,
    pub sigma: f64,
}

/// One state of the model. Tendencies are kept in log-odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub gamma: f64,
    /// `logit θ_u`, aligned with the users of the data.
    pub tendency: Vec<f64>,
    /// Aligned with the algorithms of the data.
    pub regressions: Vec<RegressionParams>,
}

impl ModelParams {
    pub fn theta(&self, u: usize) -> f64 {
        inv_logit(self.tendency[u])
    }

    /// Length of the unconstrained vector for `users` and `algorithms`.
    pub fn dimension(users: usize, algorithms: usize) -> usize {
        users + 4 + 3 * algorithms
    }

    /// `[x_u…, μ, ln σ, ln ν, ln γ, (b_a, s_a, ln σ_a)…]`
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut v = self.tendency.clone();
        v.extend([self.mu, self.sigma.ln(), self.nu.ln(), self.gamma.ln()]);
        for r in &self.regressions {
            v.extend([r.intercept, r.slope, r.sigma.ln()]);
        }
        v
    }

    pub fn from_unconstrained(v: &[f64], users: usize) -> ModelParams {
        let rest = &v[users..];
        ModelParams {
            tendency: v[..users].to_vec(),
            mu: rest[0],
            sigma: rest[1].exp(),
            nu: rest[2].exp(),
            gamma: rest[3].exp(),
            regressions: rest[4..]
                .chunks(3)
                .map(|c| RegressionParams {
                    intercept: c[0],
                    slope: c[1],
                    sigma: c[2].exp(),
                })
                .collect(),
        }
    }

    fn is_valid(&self, data: &ModelData) -> bool {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        self.tendency.len() == data.n_users()
            && self.regressions.len() == data.n_algorithms()
            && self.mu.is_finite()
            && positive(self.sigma)
            && positive(self.nu)
            && positive(self.gamma)
            && self.tendency.iter().all(|x| x.is_finite())
            && self
                .regressions
                .iter()
                .all(|r| r.intercept.is_finite() && r.slope.is_finite() && positive(r.sigma))
    }
}

/// Observations indexed for the sampler.
#[derive(Debug, Clone)]
pub struct ModelData {
    users: Vec<String>,
    algorithms: Vec<String>,
    n: Vec<f64>,
    y: Vec<f64>,
    /// Distinct profile sizes with multiplicities.
    size_counts: Vec<(f64, f64)>,
    /// Σ ln C(n_u, y_u)
    ln_binom: f64,
    /// Σ ln n_u!
    ln_size_factorial: f64,
    /// Per user: (algorithm, logit θ̄).
    user_recs: Vec<Vec<(usize, f64)>>,
    /// Per algorithm: (user, logit θ̄).
    algorithm_recs: Vec<Vec<(usize, f64)>>,
}

impl ModelData {
    pub fn new(profiles: &[ProfileObservation], recs: &[RecObservation]) -> Result<ModelData> {
        let mut index = HashMap::new();
        for (u, p) in profiles.iter().enumerate() {
            if p.y > p.n {
                return Err(Error::InvalidInput(format!("user {}: y = {} exceeds n = {}", p.user_id, p.y, p.n)));
            }
            if index.insert(p.user_id.as_str(), u).is_some() {
                return Err(Error::InvalidInput(format!("duplicate profile for user {}", p.user_id)));
            }
        }
        let algorithms: Vec<String> = recs
            .iter()
            .map(|r| r.algorithm.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut user_recs = vec![Vec::new(); profiles.len()];
        let mut algorithm_recs = vec![Vec::new(); algorithms.len()];
        let mut seen = BTreeSet::new();
        for r in recs {
            let u = *index
                .get(r.user_id.as_str())
                .ok_or_else(|| Error::UnknownUser(r.user_id.clone()))?;
            let a = algorithms.binary_search(&r.algorithm).expect("collected above");
            if !seen.insert((u, a)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate {} observation for user {}",
                    r.algorithm, r.user_id
                )));
            }
            let z = logit(r.theta)?;
            user_recs[u].push((a, z));
            algorithm_recs[a].push((u, z));
        }
        for (a, obs) in algorithm_recs.iter().enumerate() {
            if obs.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "algorithm {} needs at least 2 observations",
                    algorithms[a]
                )));
            }
        }

        let mut sizes: BTreeMap<u64, f64> = BTreeMap::new();
        for p in profiles {
            *sizes.entry(p.n).or_default() += 1.0;
        }
        let lf = |k: u64| ln_gamma(k as f64 + 1.0);
        Ok(ModelData {
            users: profiles.iter().map(|p| p.user_id.clone()).collect(),
            algorithms,
            n: profiles.iter().map(|p| p.n as f64).collect(),
            y: profiles.iter().map(|p| p.y as f64).collect(),
            size_counts: sizes.into_iter().map(|(n, c)| (n as f64, c)).collect(),
            ln_binom: profiles.iter().map(|p| lf(p.n) - lf(p.y) - lf(p.n - p.y)).sum(),
            ln_size_factorial: profiles.iter().map(|p| lf(p.n)).sum(),
            user_recs,
            algorithm_recs,
        })
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_algorithms(&self) -> usize {
        self.algorithms.len()
    }

    pub fn profile(&self, u: usize) -> (f64, f64) {
        (self.n[u], self.y[u])
    }
}

/// Log posterior broken into its pieces.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LogPosteriorTerms {
    pub binomial: f64,
    pub tendency: f64,
    pub profile_size: f64,
    pub regression: f64,
    pub prior: f64,
    /// Log-scale parameterization of σ, ν, γ, σ_a.
    pub jacobian: f64,
}

impl LogPosteriorTerms {
    pub fn total(&self) -> f64 {
        self.binomial + self.tendency + self.profile_size + self.regression + self.prior + self.jacobian
    }
}

fn ln_exp_prior(v: f64) -> f64 {
    PRIOR_RATE.ln() - PRIOR_RATE * v
}

fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

fn ln_negbinom_sum(data: &ModelData, nu: f64, gamma: f64) -> f64 {
    let per_user = nu * (gamma / (1.0 + gamma)).ln() - ln_gamma(nu);
    let ln1g = gamma.ln_1p();
    data.size_counts
        .iter()
        .map(|&(n, c)| c * (ln_gamma(n + nu) + per_user - n * ln1g))
        .sum::<f64>()
        - data.ln_size_factorial
}

/// Term-by-term log density, or `None` if the state violates a constraint.
pub fn log_posterior_terms(params: &ModelParams, data: &ModelData) -> Option<LogPosteriorTerms> {
    if !params.is_valid(data) {
        return None;
    }
    let x = &params.tendency;
    let binomial = data.ln_binom
        + (0..data.n_users())
            .map(|u| data.y[u] * x[u] - data.n[u] * softplus(x[u]))
            .sum::<f64>();
    let tendency = x.iter().map(|&xu| ln_normal(xu, params.mu, params.sigma)).sum();
    let profile_size = ln_negbinom_sum(data, params.nu, params.gamma);
    let mut regression = 0.0;
    let mut prior = ln_exp_prior(params.sigma)
        + ln_exp_prior(params.nu)
        + ln_exp_prior(params.gamma)
        + ln_normal(params.mu, 0.0, PRIOR_SD);
    let mut jacobian = params.sigma.ln() + params.nu.ln() + params.gamma.ln();
    for (a, r) in params.regressions.iter().enumerate() {
        regression += data.algorithm_recs[a]
            .iter()
            .map(|&(u, z)| ln_normal(z, r.intercept + r.slope * x[u], r.sigma))
            .sum::<f64>();
        prior += ln_exp_prior(r.sigma) + ln_normal(r.intercept, 0.0, PRIOR_SD) + ln_normal(r.slope, 0.0, PRIOR_SD);
        jacobian += r.sigma.ln();
    }
    Some(LogPosteriorTerms {
        binomial,
        tendency,
        profile_size,
        regression,
        prior,
        jacobian,
    })
}

/// Un-normalized log posterior in the sampling parameterization; `-∞` for
/// states that violate a constraint.
pub fn log_posterior(params: &ModelParams, data: &ModelData) -> f64 {
    log_posterior_terms(params, data).map_or(f64::NEG_INFINITY, |t| t.total())
}

/// Gradient of [`log_posterior`] with respect to
/// [`ModelParams::to_unconstrained`].
pub fn log_posterior_gradient(params: &ModelParams, data: &ModelData) -> Option<Vec<f64>> {
    if !params.is_valid(data) {
        return None;
    }
    let users = data.n_users();
    let x = &params.tendency;
    let (mu, sigma, nu, gamma) = (params.mu, params.sigma, params.nu, params.gamma);
    let var = sigma * sigma;
    let mut g = vec![0.0; ModelParams::dimension(users, data.n_algorithms())];

    let mut sq = 0.0;
    for u in 0..users {
        let d = x[u] - mu;
        sq += d * d;
        g[u] = data.y[u] - data.n[u] * inv_logit(x[u]) - d / var;
    }
    g[users] = (x.iter().sum::<f64>() - users as f64 * mu) / var - mu / (PRIOR_SD * PRIOR_SD);
    g[users + 1] = -(users as f64) + sq / var - PRIOR_RATE * sigma + 1.0;

    let (mut dnu, mut dgamma) = (0.0, 0.0);
    let shared = digamma(nu) - (gamma / (1.0 + gamma)).ln();
    for &(n, c) in &data.size_counts {
        dnu += c * (digamma(n + nu) - shared);
        dgamma += c * (nu / gamma - (nu + n) / (1.0 + gamma));
    }
    g[users + 2] = nu * (dnu - PRIOR_RATE) + 1.0;
    g[users + 3] = gamma * (dgamma - PRIOR_RATE) + 1.0;

    for (a, r) in params.regressions.iter().enumerate() {
        let base = users + 4 + 3 * a;
        let v = r.sigma * r.sigma;
        let (mut db, mut ds, mut rss) = (0.0, 0.0, 0.0);
        for &(u, z) in &data.algorithm_recs[a] {
            let res = z - r.intercept - r.slope * x[u];
            db += res / v;
            ds += res * x[u] / v;
            rss += res * res;
            g[u] += r.slope * res / v;
        }
        g[base] = db - r.intercept / (PRIOR_SD * PRIOR_SD);
        g[base + 1] = ds - r.slope / (PRIOR_SD * PRIOR_SD);
        g[base + 2] = -(data.algorithm_recs[a].len() as f64) + rss / v - PRIOR_RATE * r.sigma + 1.0;
    }
    Some(g)
}
