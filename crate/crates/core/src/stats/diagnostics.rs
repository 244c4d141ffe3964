//! Convergence diagnostics over multiple chains.

use serde::{Deserialize, Serialize};

/// Fits with any split-R̂ above this are flagged as non-converged.
pub const RHAT_LIMIT: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub parameter: String,
    pub rhat: f64,
    pub ess: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Between- and within-chain variances.
fn variances(chains: &[&[f64]]) -> (f64, f64) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b = n * variance(&means);
    let w = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    (b, w)
}

/// Potential scale reduction computed on chain halves.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let tail = c.len() - half;
            [&c[..half], &c[tail..]]
        })
        .collect();
    let (b, w) = variances(&halves);
    let n = half as f64;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn autocovariance(c: &[f64], m: f64, lag: usize) -> f64 {
    let n = c.len();
    (0..n - lag).map(|t| (c[t] - m) * (c[t + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size, truncating the autocorrelation sum
/// with Geyer's initial monotone sequence.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let m = chains.len();
    if n < 4 || m == 0 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let (b, w) = variances(&chains);
    let nf = n as f64;
    let var_plus = if m > 1 { (nf - 1.0) / nf * w + b / nf } else { w * (nf - 1.0) / nf };
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }
    let rho = |lag: usize| {
        let acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (w * (nf - 1.0) / nf - acov) / var_plus
    };

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let total = (m * n) as f64;
    (total / tau.max(1.0 / total.log10())).min(total * total.log10())
}
