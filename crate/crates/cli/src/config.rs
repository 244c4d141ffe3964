//! Pipeline configuration loaded from `--config path.json`.

use std::fs;
use std::path::{Path, PathBuf};

use recfair_core::eval::SearchSpace;
use recfair_core::interactions::{Mode, RatingScale};
use recfair_core::recommend::ModelConfig;
use recfair_core::stats::McmcConfig;
use recfair_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Named seeds, one per random stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// User sampling for analysis lists.
    pub sample: u64,
    /// Stochastic trainers (ALS, BPR).
    pub train: u64,
    pub mcmc: u64,
    /// Evaluation user sample and hold-out draw.
    pub eval: u64,
    pub search: u64,
    pub synth: u64,
}

impl Default for Seeds {
    fn default() -> Seeds {
        Seeds {
            sample: 1,
            train: 2,
            mcmc: 3,
            eval: 4,
            search: 5,
            synth: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub chains: usize,
    pub warmup: usize,
    pub iterations: usize,
}

impl Default for Sampling {
    fn default() -> Sampling {
        let d = McmcConfig::default();
        Sampling {
            chains: d.chains,
            warmup: d.warmup,
            iterations: d.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub records: Option<PathBuf>,
    pub authorities: Option<PathBuf>,
    /// Raw `interactions.csv`, item column holding ISBN text or item ids.
    pub interactions: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub mode: Mode,
    /// `[lo, hi]`, required for explicit feedback.
    pub scale: Option<(f64, f64)>,
    pub seeds: Seeds,
    pub algorithms: Vec<ModelConfig>,
    pub analysis_sample: usize,
    /// Minimum known-gender profile items for the analysis sample.
    pub analysis_min_known: u64,
    pub analysis_list_len: usize,
    pub eval_sample: usize,
    pub eval_min_ratings: usize,
    pub eval_list_len: usize,
    pub rerank_pool: usize,
    /// Users for hyperparameter search, disjoint from the evaluation sample.
    pub tune_sample: usize,
    pub search_budget: usize,
    pub search: SearchSpace,
    pub mcmc: Sampling,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            records: None,
            authorities: None,
            interactions: None,
            output_dir: PathBuf::from("out"),
            mode: Mode::Explicit,
            scale: None,
            seeds: Seeds::default(),
            algorithms: Vec::new(),
            analysis_sample: 1000,
            analysis_min_known: 5,
            analysis_list_len: 50,
            eval_sample: 5000,
            eval_min_ratings: 5,
            eval_list_len: 100,
            rerank_pool: 500,
            tune_sample: 0,
            search_budget: 0,
            search: SearchSpace::default(),
            mcmc: Sampling::default(),
        }
    }
}

impl PipelineConfig {
    /// Load a config file. Relative paths inside it are taken relative to
    /// the file's directory, and every referenced input must exist.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.records, &mut cfg.authorities, &mut cfg.interactions].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(Error::InvalidInput(format!("config input {} does not exist", p.display())));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.rating_scale()?;
        Ok(cfg)
    }

    pub fn rating_scale(&self) -> Result<Option<RatingScale>> {
        self.scale.map(|(lo, hi)| RatingScale::new(lo, hi)).transpose()
    }

    pub fn mcmc_config(&self) -> McmcConfig {
        McmcConfig {
            chains: self.mcmc.chains,
            warmup: self.mcmc.warmup,
            iterations: self.mcmc.iterations,
            seed: self.seeds.mcmc,
            ..McmcConfig::default()
        }
    }
}

/// Parse a `lo:hi` rating scale flag.
pub fn parse_scale(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound {hi:?}"))?;
    RatingScale::new(lo, hi).map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_experiment() {
        let c = PipelineConfig::default();
        assert_eq!((c.analysis_sample, c.analysis_list_len), (1000, 50));
        assert_eq!((c.eval_sample, c.eval_list_len), (5000, 100));
    }

    #[test]
    fn relative_paths_and_missing_inputs() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("r.csv"), "x").unwrap();
        fs::write(dir.path().join("ok.json"), r#"{"interactions": "r.csv", "scale": [1, 5]}"#).unwrap();
        let c = PipelineConfig::load(&dir.path().join("ok.json")).unwrap();
        assert_eq!(c.interactions.unwrap(), dir.path().join("r.csv"));
        assert_eq!(c.output_dir, dir.path().join("out"));

        fs::write(dir.path().join("bad.json"), r#"{"records": "missing.jsonl"}"#).unwrap();
        assert!(PipelineConfig::load(&dir.path().join("bad.json")).is_err());
        fs::write(dir.path().join("typo.json"), r#"{"seedz": {}}"#).unwrap();
        assert!(PipelineConfig::load(&dir.path().join("typo.json")).is_err());
    }

    #[test]
    fn scale_flag() {
        assert_eq!(parse_scale("1:10"), Ok((1.0, 10.0)));
        assert!(parse_scale("5:1").is_err());
        assert!(parse_scale("5").is_err());
    }
}
