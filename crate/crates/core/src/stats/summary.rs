use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sampler::{Parameter, PosteriorSamples};
use super::{inv_logit, ProfileObservation};
use crate::Result;

/// Empirical quantile with linear interpolation; `sorted` must be ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior mean with a central 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn from_draws(mut values: Vec<f64>) -> Interval {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.sort_by(f64::total_cmp);
        Interval {
            mean,
            lower: quantile(&values, 0.025),
            upper: quantile(&values, 0.975),
        }
    }

    pub fn covers(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// A simulated unseen user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedProfile {
    pub theta: f64,
    pub n: u64,
    pub y: u64,
    /// `y/n`, absent when `n = 0`.
    pub ratio: Option<f64>,
}

/// Draw `count` predicted profiles, each from a uniformly chosen retained
/// draw.
pub fn posterior_predict(samples: &PosteriorSamples, count: usize, seed: u64) -> Vec<PredictedProfile> {
    let draws: Vec<_> = samples.draws().collect();
    if draws.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let d = draws[rng.random_range(0..draws.len())];
            let z: f64 = StandardNormal.sample(&mut rng);
            let theta = inv_logit(d.mu + d.sigma * z);
            let rate: f64 = Gamma::new(d.nu, 1.0 / d.gamma).expect("positive parameters").sample(&mut rng);
            let n = if rate > 0.0 && rate.is_finite() {
                Poisson::new(rate).map_or(0, |p| p.sample(&mut rng) as u64)
            } else {
                0
            };
            let y = Binomial::new(n, theta).expect("probability in range").sample(&mut rng);
            PredictedProfile {
                theta,
                n,
                y,
                ratio: (n > 0).then(|| y as f64 / n as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub algorithm: String,
    pub intercept: Interval,
    pub slope: Interval,
    pub sigma: Interval,
}

pub fn regression_summary(samples: &PosteriorSamples) -> Vec<RegressionSummary> {
    samples
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, name)| RegressionSummary {
            algorithm: name.clone(),
            intercept: Interval::from_draws(samples.values(Parameter::Intercept(a))),
            slope: Interval::from_draws(samples.values(Parameter::Slope(a))),
            sigma: Interval::from_draws(samples.values(Parameter::ResidualSd(a))),
        })
        .collect()
}

/// Resample `values` with replacement to `count` observations.
pub fn resample(values: &[f64], count: usize, seed: u64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| values[rng.random_range(0..values.len())]).collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Profile-level summary: observed proportions, population parameters, and
/// the distribution of predicted tendencies θ′.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub users: usize,
    pub mean_observed_proportion: f64,
    pub sd_observed_proportion: f64,
    pub mu: Interval,
    pub sigma: Interval,
    pub theta_mean: f64,
    pub theta_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub seed: u64,
    pub converged: bool,
    pub profile: ProfileSummary,
    pub regressions: Vec<RegressionSummary>,
}

impl Summary {
    pub fn new(samples: &PosteriorSamples, profiles: &[ProfileObservation]) -> Summary {
        let observed: Vec<f64> = profiles
            .iter()
            .filter(|p| p.n > 0)
            .map(|p| p.y as f64 / p.n as f64)
            .collect();
        let (obs_mean, obs_sd) = mean_sd(&observed);
        let predicted: Vec<f64> = posterior_predict(samples, samples.n_draws(), samples.seed)
            .into_iter()
            .map(|p| p.theta)
            .collect();
        let (theta_mean, theta_sd) = mean_sd(&predicted);
        Summary {
            version: crate::VERSION.to_string(),
            seed: samples.seed,
            converged: samples.converged,
            profile: ProfileSummary {
                users: profiles.len(),
                mean_observed_proportion: obs_mean,
                sd_observed_proportion: obs_sd,
                mu: Interval::from_draws(samples.values(Parameter::Mu)),
                sigma: Interval::from_draws(samples.values(Parameter::Sigma)),
                theta_mean,
                theta_sd,
            },
            regressions: regression_summary(samples),
        }
    }
}

/// `posterior.csv` in long format. Per-user θ rows are optional because
/// they dominate the file size.
pub fn write_posterior<W: Write>(out: W, samples: &PosteriorSamples, with_theta: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chain", "iteration", "parameter", "value"])?;
    let params = samples.parameters(with_theta);
    let names: Vec<String> = params.iter().map(|&p| samples.name(p)).collect();
    for (c, chain) in samples.chains.iter().enumerate() {
        for (t, draw) in chain.iter().enumerate() {
            for (p, name) in params.iter().zip(&names) {
                w.write_record([c.to_string(), t.to_string(), name.clone(), p.value(draw).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics<W: Write>(out: W, samples: &PosteriorSamples) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "rhat", "ess"])?;
    for d in &samples.diagnostics {
        w.write_record([d.parameter.clone(), d.rhat.to_string(), d.ess.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
