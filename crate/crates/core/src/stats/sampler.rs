//! Blocked Metropolis-within-Gibbs sampler.
//!
//! Per iteration:
//! - each `logit θ_u` gets an independence proposal from a Student-t centred
//!   on its conditional mode (Laplace approximation);
//! - μ is drawn from its normal full conditional;
//! - σ and every σ_a are proposed from the inverse-gamma part of their
//!   conditionals and corrected for the exponential prior;
//! - (b_a, s_a) are drawn from their bivariate normal conditional;
//! - joint moves shift or rescale all tendencies together with μ, σ, b, s
//!   so the regression residuals are unchanged, and rescale one
//!   algorithm's residuals together with σ_a;
//! - (ν, γ) take several adaptive random-walk steps on the log scale.
//!
//! Random-walk step sizes adapt during warmup only.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{effective_sample_size, split_rhat, Diagnostic, RHAT_LIMIT};
use super::{
    inv_logit, ln_exp_prior, ln_negbinom_sum, log_posterior, softplus, ModelData, ModelParams, ProfileObservation,
    RecObservation, RegressionParams, PRIOR_RATE, PRIOR_SD,
};
use crate::{Error, Result};

const T_DOF: f64 = 4.0;
const SIZE_STEPS: usize = 5;

/// Parameters held at known values instead of sampled.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedParams {
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    /// (ν, γ)
    pub profile_size: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub iterations: usize,
    pub seed: u64,
    pub fixed: FixedParams,
}

impl Default for McmcConfig {
    fn default() -> McmcConfig {
        McmcConfig {
            chains: 4,
            warmup: 2500,
            iterations: 2500,
            seed: 0,
            fixed: FixedParams::default(),
        }
    }
}

/// A scalar quantity tracked by the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Mu,
    Sigma,
    Nu,
    Gamma,
    Theta(usize),
    Intercept(usize),
    Slope(usize),
    ResidualSd(usize),
}

impl Parameter {
    pub fn value(self, p: &ModelParams) -> f64 {
        match self {
            Parameter::Mu => p.mu,
            Parameter::Sigma => p.sigma,
            Parameter::Nu => p.nu,
            Parameter::Gamma => p.gamma,
            Parameter::Theta(u) => p.theta(u),
            Parameter::Intercept(a) => p.regressions[a].intercept,
            Parameter::Slope(a) => p.regressions[a].slope,
            Parameter::ResidualSd(a) => p.regressions[a].sigma,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub users: Vec<String>,
    pub algorithms: Vec<String>,
    /// Retained draws, one vector per chain.
    pub chains: Vec<Vec<ModelParams>>,
    pub warmup: usize,
    pub seed: u64,
    pub fixed: FixedParams,
    pub diagnostics: Vec<Diagnostic>,
    pub converged: bool,
}

impl PosteriorSamples {
    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn draws(&self) -> impl Iterator<Item = &ModelParams> {
        self.chains.iter().flatten()
    }

    pub fn name(&self, p: Parameter) -> String {
        match p {
            Parameter::Mu => "mu".into(),
            Parameter::Sigma => "sigma".into(),
            Parameter::Nu => "nu".into(),
            Parameter::Gamma => "gamma".into(),
            Parameter::Theta(u) => format!("theta[{}]", self.users[u]),
            Parameter::Intercept(a) => format!("b[{}]", self.algorithms[a]),
            Parameter::Slope(a) => format!("s[{}]", self.algorithms[a]),
            Parameter::ResidualSd(a) => format!("sigma_a[{}]", self.algorithms[a]),
        }
    }

    /// Sampled (not fixed) scalars, population level first.
    pub fn parameters(&self, with_theta: bool) -> Vec<Parameter> {
        let mut out = Vec::new();
        if self.fixed.mu.is_none() {
            out.push(Parameter::Mu);
        }
        if self.fixed.sigma.is_none() {
            out.push(Parameter::Sigma);
        }
        if self.fixed.profile_size.is_none() {
            out.extend([Parameter::Nu, Parameter::Gamma]);
        }
        for a in 0..self.algorithms.len() {
            out.extend([Parameter::Intercept(a), Parameter::Slope(a), Parameter::ResidualSd(a)]);
        }
        if with_theta {
            out.extend((0..self.users.len()).map(Parameter::Theta));
        }
        out
    }

    pub fn chain_values(&self, p: Parameter) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.iter().map(|d| p.value(d)).collect()).collect()
    }

    /// All retained draws of `p`, chains concatenated.
    pub fn values(&self, p: Parameter) -> Vec<f64> {
        self.draws().map(|d| p.value(d)).collect()
    }

    pub fn mean(&self, p: Parameter) -> f64 {
        let v = self.values(p);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.parameter == name)
    }
}

/// Robbins–Monro step-size adaptation toward a target acceptance rate.
#[derive(Debug, Clone)]
struct Step {
    log_size: f64,
    target: f64,
    accepted: usize,
    proposed: usize,
}

impl Step {
    fn new(size: f64, target: f64) -> Step {
        Step {
            log_size: size.ln(),
            target,
            accepted: 0,
            proposed: 0,
        }
    }

    fn size(&self) -> f64 {
        self.log_size.exp()
    }

    fn record(&mut self, accept_prob: f64, accepted: bool, adapt_iter: Option<usize>) {
        self.proposed += 1;
        self.accepted += accepted as usize;
        if let Some(t) = adapt_iter {
            self.log_size += (accept_prob - self.target) / (t as f64 + 1.0).powf(0.6);
            self.log_size = self.log_size.clamp(-12.0, 3.0);
        }
    }

    fn rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }
}

/// Running mean and covariance of (ln ν, ln γ) for the 2-d proposal.
#[derive(Debug, Clone, Default)]
struct Moments {
    count: f64,
    mean: [f64; 2],
    m2: [[f64; 2]; 2],
}

impl Moments {
    fn push(&mut self, v: [f64; 2]) {
        self.count += 1.0;
        let d = [v[0] - self.mean[0], v[1] - self.mean[1]];
        for k in 0..2 {
            self.mean[k] += d[k] / self.count;
        }
        let d2 = [v[0] - self.mean[0], v[1] - self.mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                self.m2[i][j] += d[i] * d2[j];
            }
        }
    }

    /// Cholesky factor of the regularized covariance, once enough history
    /// exists.
    fn chol(&self) -> Option<[f64; 3]> {
        if self.count < 100.0 {
            return None;
        }
        let c = |i: usize, j: usize| self.m2[i][j] / (self.count - 1.0) + if i == j { 1e-8 } else { 0.0 };
        let l11 = c(0, 0).sqrt();
        let l21 = c(1, 0) / l11;
        let l22 = (c(1, 1) - l21 * l21).max(1e-12).sqrt();
        Some([l11, l21, l22])
    }
}

struct Chain<'a> {
    data: &'a ModelData,
    fixed: FixedParams,
    rng: ChaCha8Rng,
    p: ModelParams,
    location: Step,
    scale: Step,
    residual: Vec<Step>,
    size: Step,
    size_moments: Moments,
    size_chol: Option<[f64; 3]>,
    tendency_accepted: usize,
    tendency_proposed: usize,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn accept(rng: &mut ChaCha8Rng, log_ratio: f64) -> (f64, bool) {
    let prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
    (prob, rng.random::<f64>() < prob)
}

/// Draw from ∝ σ^{−count} exp(−ss / 2σ²) · Exp(σ; 0.01) by an inverse-gamma
/// independence proposal.
fn draw_scale(rng: &mut ChaCha8Rng, count: usize, ss: f64, current: f64) -> f64 {
    if count < 2 || !(ss > 0.0) {
        return current;
    }
    let g: f64 = Gamma::new((count as f64 - 1.0) / 2.0, 1.0).expect("positive shape").sample(rng);
    let proposal = (ss / 2.0 / g).sqrt();
    if !(proposal > 0.0 && proposal.is_finite()) {
        return current;
    }
    let (_, ok) = accept(rng, -PRIOR_RATE * (proposal - current));
    if ok {
        proposal
    } else {
        current
    }
}

/// Mode and curvature of `y·x − n·softplus(x) − prec·(x − m)²/2`.
fn conditional_mode(n: f64, y: f64, prec: f64, m: f64, start: f64) -> (f64, f64) {
    let f = |x: f64| y * x - n * softplus(x) - 0.5 * prec * (x - m).powi(2);
    let mut x = if start.is_finite() { start } else { m };
    for _ in 0..100 {
        let th = inv_logit(x);
        let g1 = y - n * th - prec * (x - m);
        let g2 = n * th * (1.0 - th) + prec;
        let mut step = g1 / g2;
        let fx = f(x);
        let mut halvings = 0;
        while f(x + step) < fx - 1e-12 * fx.abs().max(1.0) && halvings < 40 {
            step /= 2.0;
            halvings += 1;
        }
        x += step;
        if step.abs() < 1e-10 * x.abs().max(1.0) {
            break;
        }
    }
    let th = inv_logit(x);
    (x, n * th * (1.0 - th) + prec)
}

impl<'a> Chain<'a> {
    fn new(data: &'a ModelData, config: &McmcConfig, chain: usize) -> Chain<'a> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(chain as u64);
        let fixed = config.fixed;
        let users = data.n_users();

        let tendency: Vec<f64> = (0..users)
            .map(|u| {
                let (n, y) = data.profile(u);
                ((y + 0.5) / (n - y + 0.5)).ln() + 0.3 * normal(&mut rng)
            })
            .collect();
        let xm = tendency.iter().sum::<f64>() / users as f64;
        let xsd = if users > 1 {
            (tendency.iter().map(|x| (x - xm).powi(2)).sum::<f64>() / (users as f64 - 1.0)).sqrt()
        } else {
            1.0
        };
        let mu = fixed.mu.unwrap_or(xm + 0.3 * normal(&mut rng));
        let sigma = fixed.sigma.unwrap_or(xsd.max(0.2) * (0.2 * normal(&mut rng)).exp());

        let (nu, gamma) = fixed.profile_size.unwrap_or_else(|| {
            let m = data.n.iter().sum::<f64>() / users as f64;
            let v = if users > 1 {
                data.n.iter().map(|n| (n - m).powi(2)).sum::<f64>() / (users as f64 - 1.0)
            } else {
                0.0
            };
            let (nu, gamma) = if m > 0.0 && v > 1.05 * m {
                let g = m / (v - m);
                (m * g, g)
            } else {
                (m.max(0.5), 1.0)
            };
            (nu * (0.2 * normal(&mut rng)).exp(), gamma * (0.2 * normal(&mut rng)).exp())
        });

        let regressions = data
            .algorithm_recs
            .iter()
            .map(|obs| {
                let k = obs.len() as f64;
                let mx = obs.iter().map(|&(u, _)| tendency[u]).sum::<f64>() / k;
                let mz = obs.iter().map(|&(_, z)| z).sum::<f64>() / k;
                let sxx: f64 = obs.iter().map(|&(u, _)| (tendency[u] - mx).powi(2)).sum();
                let sxz: f64 = obs.iter().map(|&(u, z)| (tendency[u] - mx) * (z - mz)).sum();
                let slope = if sxx > 0.0 { sxz / sxx } else { 0.0 };
                let intercept = mz - slope * mx;
                let rss: f64 = obs.iter().map(|&(u, z)| (z - intercept - slope * tendency[u]).powi(2)).sum();
                RegressionParams {
                    intercept: intercept + 0.1 * normal(&mut rng),
                    slope: slope + 0.1 * normal(&mut rng),
                    sigma: (rss / k).sqrt().max(0.1) * (0.2 * normal(&mut rng)).exp(),
                }
            })
            .collect();

        Chain {
            data,
            fixed,
            rng,
            p: ModelParams {
                mu,
                sigma,
                nu,
                gamma,
                tendency,
                regressions,
            },
            location: Step::new(0.1, 0.44),
            scale: Step::new(0.05, 0.44),
            residual: vec![Step::new(0.05, 0.44); data.n_algorithms()],
            size: Step::new(0.1, 0.3),
            size_moments: Moments::default(),
            size_chol: None,
            tendency_accepted: 0,
            tendency_proposed: 0,
        }
    }

    fn update_tendencies(&mut self) {
        let t = StudentT::new(T_DOF).expect("positive dof");
        let var = self.p.sigma * self.p.sigma;
        for u in 0..self.data.n_users() {
            let (n, y) = self.data.profile(u);
            let mut prec = 1.0 / var;
            let mut lin = self.p.mu / var;
            for &(a, z) in &self.data.user_recs[u] {
                let r = &self.p.regressions[a];
                let v = r.sigma * r.sigma;
                prec += r.slope * r.slope / v;
                lin += r.slope * (z - r.intercept) / v;
            }
            let m = lin / prec;
            let x = self.p.tendency[u];
            let (mode, curv) = conditional_mode(n, y, prec, m, x);
            let scale = curv.sqrt().recip();
            let proposal = mode + scale * t.sample(&mut self.rng);
            let target = |x: f64| y * x - n * softplus(x) - 0.5 * prec * (x - m).powi(2);
            let ln_q = |x: f64| -0.5 * (T_DOF + 1.0) * (((x - mode) / scale).powi(2) / T_DOF).ln_1p();
            let (_, ok) = accept(&mut self.rng, target(proposal) - target(x) + ln_q(x) - ln_q(proposal));
            self.tendency_proposed += 1;
            if ok {
                self.p.tendency[u] = proposal;
                self.tendency_accepted += 1;
            }
        }
    }

    fn update_mu(&mut self) {
        let users = self.data.n_users() as f64;
        let var = self.p.sigma * self.p.sigma;
        let prec = users / var + 1.0 / (PRIOR_SD * PRIOR_SD);
        let mean = self.p.tendency.iter().sum::<f64>() / var / prec;
        self.p.mu = mean + normal(&mut self.rng) / prec.sqrt();
    }

    fn update_sigma(&mut self) {
        let ss = self.p.tendency.iter().map(|x| (x - self.p.mu).powi(2)).sum();
        self.p.sigma = draw_scale(&mut self.rng, self.data.n_users(), ss, self.p.sigma);
    }

    fn update_regressions(&mut self) {
        let prior_prec = 1.0 / (PRIOR_SD * PRIOR_SD);
        for (a, obs) in self.data.algorithm_recs.iter().enumerate() {
            let x = &self.p.tendency;
            let r = self.p.regressions[a];
            let v = r.sigma * r.sigma;
            let (mut sx, mut sxx, mut sz, mut sxz) = (0.0, 0.0, 0.0, 0.0);
            for &(u, z) in obs {
                sx += x[u];
                sxx += x[u] * x[u];
                sz += z;
                sxz += x[u] * z;
            }
            let l11 = obs.len() as f64 / v + prior_prec;
            let l21 = sx / v;
            let l22 = sxx / v + prior_prec;
            let det = l11 * l22 - l21 * l21;
            let (rb, rs) = (sz / v, sxz / v);
            let mean_b = (l22 * rb - l21 * rs) / det;
            let mean_s = (l11 * rs - l21 * rb) / det;
            // Solve Lᵀw = ε with Λ = LLᵀ, so w ~ N(0, Λ⁻¹).
            let c11 = l11.sqrt();
            let c21 = l21 / c11;
            let c22 = (l22 - c21 * c21).sqrt();
            let (e1, e2) = (normal(&mut self.rng), normal(&mut self.rng));
            let w2 = e2 / c22;
            let w1 = (e1 - c21 * w2) / c11;
            let reg = &mut self.p.regressions[a];
            reg.intercept = mean_b + w1;
            reg.slope = mean_s + w2;

            let rss = obs
                .iter()
                .map(|&(u, z)| (z - reg.intercept - reg.slope * x[u]).powi(2))
                .sum();
            reg.sigma = draw_scale(&mut self.rng, obs.len(), rss, reg.sigma);
        }
    }

    /// Shift every tendency and μ by δ, compensating each intercept.
    fn shift_move(&mut self, adapt: Option<usize>) {
        let delta = self.location.size() * normal(&mut self.rng);
        let mut q = self.p.clone();
        q.mu += delta;
        q.tendency.iter_mut().for_each(|x| *x += delta);
        for r in &mut q.regressions {
            r.intercept -= r.slope * delta;
        }
        let (prob, ok) = accept(&mut self.rng, log_posterior(&q, self.data) - log_posterior(&self.p, self.data));
        self.location.record(prob, ok, adapt);
        if ok {
            self.p = q;
        }
    }

    /// Rescale tendencies about μ together with σ, compensating slopes and
    /// intercepts.
    fn scale_move(&mut self, adapt: Option<usize>) {
        let eps = self.scale.size() * normal(&mut self.rng);
        let beta = eps.exp();
        let mut q = self.p.clone();
        let mu = q.mu;
        q.sigma *= beta;
        q.tendency.iter_mut().for_each(|x| *x = mu + beta * (*x - mu));
        for r in &mut q.regressions {
            r.intercept += r.slope * mu * (1.0 - 1.0 / beta);
            r.slope /= beta;
        }
        let jac = (self.data.n_users() as f64 - self.data.n_algorithms() as f64) * eps;
        let (prob, ok) = accept(
            &mut self.rng,
            log_posterior(&q, self.data) - log_posterior(&self.p, self.data) + jac,
        );
        self.scale.record(prob, ok, adapt);
        if ok {
            self.p = q;
        }
    }

    /// Rescale algorithm `a`'s residuals together with σ_a by moving the
    /// tendencies of the users it observed.
    fn residual_move(&mut self, a: usize, adapt: Option<usize>) {
        let r = self.p.regressions[a];
        if r.slope.abs() < 0.05 {
            return;
        }
        let eps = self.residual[a].size() * normal(&mut self.rng);
        let beta = eps.exp();
        let mut q = self.p.clone();
        q.regressions[a].sigma *= beta;
        for &(u, z) in &self.data.algorithm_recs[a] {
            let res = z - r.intercept - r.slope * q.tendency[u];
            q.tendency[u] = (z - r.intercept - beta * res) / r.slope;
        }
        let jac = self.data.algorithm_recs[a].len() as f64 * eps;
        let (prob, ok) = accept(
            &mut self.rng,
            log_posterior(&q, self.data) - log_posterior(&self.p, self.data) + jac,
        );
        self.residual[a].record(prob, ok, adapt);
        if ok {
            self.p = q;
        }
    }

    fn size_density(&self, ln_nu: f64, ln_gamma: f64) -> f64 {
        let (nu, gamma) = (ln_nu.exp(), ln_gamma.exp());
        if !(nu > 0.0 && gamma > 0.0 && nu.is_finite() && gamma.is_finite()) {
            return f64::NEG_INFINITY;
        }
        ln_negbinom_sum(self.data, nu, gamma) + ln_exp_prior(nu) + ln_exp_prior(gamma) + ln_nu + ln_gamma
    }

    fn update_size(&mut self, adapt: Option<usize>) {
        for _ in 0..SIZE_STEPS {
            let cur = [self.p.nu.ln(), self.p.gamma.ln()];
            let (z1, z2) = (normal(&mut self.rng), normal(&mut self.rng));
            let s = self.size.size();
            let prop = match self.size_chol {
                Some([l11, l21, l22]) => [cur[0] + s * l11 * z1, cur[1] + s * (l21 * z1 + l22 * z2)],
                None => [cur[0] + 0.1 * s * z1, cur[1] + 0.1 * s * z2],
            };
            let log_ratio = self.size_density(prop[0], prop[1]) - self.size_density(cur[0], cur[1]);
            let (prob, ok) = accept(&mut self.rng, log_ratio);
            self.size.record(prob, ok, adapt);
            if ok {
                self.p.nu = prop[0].exp();
                self.p.gamma = prop[1].exp();
            }
            if adapt.is_some() {
                self.size_moments.push([self.p.nu.ln(), self.p.gamma.ln()]);
                if let Some(c) = self.size_moments.chol() {
                    if self.size_chol.is_none() {
                        // Switch from the isotropic to the learned proposal.
                        self.size.log_size = (2.38 / 2f64.sqrt()).ln();
                    }
                    self.size_chol = Some(c);
                }
            }
        }
    }

    fn iterate(&mut self, adapt: Option<usize>) {
        self.update_tendencies();
        if self.fixed.mu.is_none() {
            self.update_mu();
        }
        if self.fixed.sigma.is_none() {
            self.update_sigma();
        }
        self.update_regressions();
        if self.fixed.mu.is_none() {
            self.shift_move(adapt);
        }
        if self.fixed.sigma.is_none() {
            self.scale_move(adapt);
        }
        for a in 0..self.data.n_algorithms() {
            self.residual_move(a, adapt);
        }
        if self.fixed.profile_size.is_none() {
            self.update_size(adapt);
        }
    }

    fn run(mut self, warmup: usize, iterations: usize, chain: usize) -> Vec<ModelParams> {
        for t in 0..warmup {
            self.iterate(Some(t));
        }
        let mut draws = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            self.iterate(None);
            draws.push(self.p.clone());
        }
        debug!(
            "chain {chain}: tendency {:.2}, shift {:.2}, scale {:.2}, size {:.2}, residual {:?}",
            self.tendency_accepted as f64 / self.tendency_proposed.max(1) as f64,
            self.location.rate(),
            self.scale.rate(),
            self.size.rate(),
            self.residual.iter().map(Step::rate).collect::<Vec<_>>()
        );
        draws
    }
}

fn check_fixed(fixed: &FixedParams) -> Result<()> {
    let bad = |what: &str| Err(Error::InvalidInput(format!("fixed {what} is out of range")));
    if fixed.mu.is_some_and(|m| !m.is_finite()) {
        return bad("mu");
    }
    if fixed.sigma.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
        return bad("sigma");
    }
    if fixed
        .profile_size
        .is_some_and(|(n, g)| !(n > 0.0 && g > 0.0 && n.is_finite() && g.is_finite()))
    {
        return bad("profile size parameters");
    }
    Ok(())
}

/// Sample the posterior. Chains run in parallel; each is deterministic in
/// `(seed, chain index)`.
pub fn fit(profiles: &[ProfileObservation], recs: &[RecObservation], config: &McmcConfig) -> Result<PosteriorSamples> {
    if config.chains == 0 || config.iterations == 0 {
        return Err(Error::InvalidInput("need at least one chain and one iteration".into()));
    }
    check_fixed(&config.fixed)?;
    let data = ModelData::new(profiles, recs)?;
    let population_free = config.fixed.mu.is_none() || config.fixed.sigma.is_none();
    if data.n_users() < 2 && population_free {
        return Err(Error::InsufficientUsers {
            requested: 2,
            available: data.n_users(),
        });
    }
    if data.n_users() == 0 {
        return Err(Error::InsufficientUsers {
            requested: 1,
            available: 0,
        });
    }

    let chains: Vec<Vec<ModelParams>> = (0..config.chains)
        .into_par_iter()
        .map(|c| Chain::new(&data, config, c).run(config.warmup, config.iterations, c))
        .collect();

    let mut samples = PosteriorSamples {
        users: data.users().to_vec(),
        algorithms: data.algorithms().to_vec(),
        chains,
        warmup: config.warmup,
        seed: config.seed,
        fixed: config.fixed,
        diagnostics: Vec::new(),
        converged: true,
    };
    samples.diagnostics = samples
        .parameters(true)
        .into_par_iter()
        .map(|p| {
            let values = samples.chain_values(p);
            Diagnostic {
                parameter: samples.name(p),
                rhat: split_rhat(&values),
                ess: effective_sample_size(&values),
            }
        })
        .collect();
    let worst = samples
        .diagnostics
        .iter()
        .filter(|d| !(d.rhat <= RHAT_LIMIT))
        .map(|d| d.parameter.as_str())
        .collect::<Vec<_>>();
    if !worst.is_empty() {
        samples.converged = false;
        warn!("{} parameters have split-R̂ above {RHAT_LIMIT}, e.g. {}", worst.len(), worst[0]);
    }
    Ok(samples)
}
