//! Summary tables: profile tendencies, propagation regressions, list
//! proportions with distinct-item coverage, and re-ranking accuracy loss.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use recfair_core::eval::EvalReport;
use recfair_core::ingest::AuthorGender;
use recfair_core::recommend::RecList;
use recfair_core::stats::{Interval, ProfileSummary, RegressionSummary, Summary};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListRow {
    /// `algorithm`, or `algorithm/strategy` for re-ranked lists.
    pub label: String,
    pub lists: usize,
    pub recs: usize,
    pub distinct: usize,
    pub distinct_pct: f64,
    /// Lists with at least one known-gender item.
    pub known_lists: usize,
    /// Mean and sd of y/n over lists with known-gender items.
    pub mean_proportion: Option<f64>,
    pub sd_proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub converged: Option<bool>,
    pub profile: Option<ProfileSummary>,
    pub regressions: Vec<RegressionSummary>,
    pub lists: Vec<ListRow>,
    pub accuracy: Vec<EvalReport>,
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

pub fn list_row(label: &str, lists: &[RecList], genders: &BTreeMap<String, AuthorGender>) -> ListRow {
    let recs: usize = lists.iter().map(RecList::len).sum();
    let distinct: BTreeSet<&str> = lists.iter().flat_map(RecList::items).collect();
    let props: Vec<f64> = lists
        .iter()
        .filter_map(|l| {
            let (mut n, mut y) = (0usize, 0usize);
            for item in l.items() {
                match genders.get(item) {
                    Some(AuthorGender::Female) => {
                        n += 1;
                        y += 1;
                    }
                    Some(AuthorGender::Male) => n += 1,
                    _ => {}
                }
            }
            (n > 0).then(|| y as f64 / n as f64)
        })
        .collect();
    let (mean_proportion, sd_proportion) = mean_sd(&props);
    ListRow {
        label: label.to_string(),
        lists: lists.len(),
        recs,
        distinct: distinct.len(),
        distinct_pct: if recs == 0 { 0.0 } else { 100.0 * distinct.len() as f64 / recs as f64 },
        known_lists: props.len(),
        mean_proportion,
        sd_proportion,
    }
}

impl Report {
    pub fn new(summary: Option<Summary>, lists: Vec<ListRow>, accuracy: Vec<EvalReport>) -> Report {
        let (converged, profile, regressions) = match summary {
            Some(s) => (Some(s.converged), Some(s.profile), s.regressions),
            None => (None, None, Vec::new()),
        };
        Report {
            version: recfair_core::VERSION.to_string(),
            converged,
            profile,
            regressions,
            lists,
            accuracy,
        }
    }

    pub fn to_markdown(&self) -> String {
        let f3 = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        let iv = |i: &Interval| format!("{:.3} ({:.3}, {:.3})", i.mean, i.lower, i.upper);
        let mut s = String::from("# recfair report\n");
        if let Some(p) = &self.profile {
            let _ = write!(
                s,
                "\n## User profiles\n\n| Users | Mean obs. | SD obs. | mu (95%) | sigma (95%) | theta mean | theta sd |\n\
                 |---|---|---|---|---|---|---|\n| {} | {:.3} | {:.3} | {} | {} | {:.3} | {:.3} |\n",
                p.users,
                p.mean_observed_proportion,
                p.sd_observed_proportion,
                iv(&p.mu),
                iv(&p.sigma),
                p.theta_mean,
                p.theta_sd
            );
            if self.converged == Some(false) {
                s.push_str("\nWarning: the sampler did not converge (some R-hat above 1.1).\n");
            }
        }
        if !self.regressions.is_empty() {
            s.push_str("\n## Propagation regressions\n\n| Algorithm | Intercept b (95%) | Slope s (95%) | sigma_a (95%) |\n|---|---|---|---|\n");
            for r in &self.regressions {
                let _ = writeln!(s, "| {} | {} | {} | {} |", r.algorithm, iv(&r.intercept), iv(&r.slope), iv(&r.sigma));
            }
        }
        if !self.lists.is_empty() {
            s.push_str("\n## Recommendation lists\n\n| Algorithm | Lists | Recs | Distinct | % Distinct | Mean / SD female proportion |\n|---|---|---|---|---|---|\n");
            for r in &self.lists {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {:.1} | {} / {} |",
                    r.label,
                    r.lists,
                    r.recs,
                    r.distinct,
                    r.distinct_pct,
                    f3(r.mean_proportion),
                    f3(r.sd_proportion)
                );
            }
        }
        if !self.accuracy.is_empty() {
            s.push_str("\n## Accuracy\n\n| Algorithm | Mode | Strategy | MRR | Loss % |\n|---|---|---|---|---|\n");
            for e in &self.accuracy {
                let _ = writeln!(s, "| {} | {} | none | {:.4} | |", e.algorithm, e.mode, e.mrr);
                for v in &e.variants {
                    let loss = v.loss_pct.map_or("n/a".to_string(), |l| format!("{l:.2}"));
                    let _ = writeln!(s, "| {} | {} | {} | {:.4} | {} |", e.algorithm, e.mode, v.strategy, v.mrr, loss);
                }
            }
        }
        s
    }
}
