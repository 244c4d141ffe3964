//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;
use recfair_core::eval::{
    evaluate, random_search, sample_disjoint_users, sample_users, EvalOptions, EvalReport, EvalSplit, KnownGenderFilter,
};
use recfair_core::ingest::{
    cluster_items, isbn_to_item, link_item_genders, read_authorities, read_clusters, read_genders, read_records,
    write_clusters, write_genders, AuthorGender, AuthorityRecord, CatalogRecord, GenderAssertion, ItemCluster, Source,
};
use recfair_core::interactions::{load_interactions, profile_stats, write_interactions, InteractionSet, ItemResolver, Mode};
use recfair_core::recommend::{
    read_tagged_recommendations, recommend, train, write_recommendations, Model, ModelConfig, RatingMatrix, RecList,
};
use recfair_core::rerank::{Reranker, Strategy};
use recfair_core::stats::{
    fit, smoothed_list_proportion, write_diagnostics, write_posterior, ProfileObservation, RecObservation, Summary,
};
use recfair_core::synth::{gen_library, gen_profiles, gen_rating_matrix, gen_rec_observations, MatrixSpec, SynthSpec};
use recfair_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::mock::profile_copy;
use crate::output::{Meta, Staged};
use crate::report::{list_row, Report};
use crate::{
    AnalyzeArgs, Cli, ClusterArgs, Command, EvalArgs, Hyper, IngestArgs, LinkArgs, MockKind, ModeArgs, RecommendArgs,
    ReportArgs, RerankArgs, SynthArgs, SynthKind, Target, TrainArgs,
};

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&cfg, a),
        Command::Cluster(a) => cluster(&cfg, a),
        Command::Link(a) => link(&cfg, a),
        Command::Train(a) => train_models(cfg, a),
        Command::Recommend(a) => recommend_lists(cfg, a),
        Command::Analyze(a) => analyze(cfg, a),
        Command::Rerank(a) => rerank(&cfg, a),
        Command::Eval(a) => eval(cfg, a),
        Command::Synth(a) => synth(cfg, a),
        Command::Report(a) => report(&cfg, a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

fn out_dir(cfg: &PipelineConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| cfg.output_dir.clone())
}

/// Flag, else config, else `<out-dir>/<default>`.
fn input(flag: &Option<PathBuf>, config: &Option<PathBuf>, dir: &Path, default: &str) -> PathBuf {
    flag.clone()
        .or_else(|| config.clone())
        .unwrap_or_else(|| dir.join(default))
}

fn required(flag: &Option<PathBuf>, config: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.clone())
        .ok_or_else(|| Error::InvalidInput(format!("no {what} given (flag or config)")))
}

fn mode_of(cfg: &PipelineConfig, m: &ModeArgs) -> Result<(Mode, Option<recfair_core::interactions::RatingScale>)> {
    let mode = m.mode.unwrap_or(cfg.mode);
    let scale = match m.scale {
        Some((lo, hi)) => Some(recfair_core::interactions::RatingScale::new(lo, hi)?),
        None => cfg.rating_scale()?,
    };
    Ok((mode, scale))
}

fn load_clean(path: &Path, cfg: &PipelineConfig, m: &ModeArgs) -> Result<InteractionSet> {
    let (mode, scale) = mode_of(cfg, m)?;
    Ok(load_interactions(open(path)?, mode, scale, None)?.set)
}

fn load_genders(path: &Path) -> Result<BTreeMap<String, AuthorGender>> {
    read_genders(open(path)?)
}

// ---- catalog stages -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RecordLine {
    record_id: String,
    source: Source,
    isbn_fields: Vec<String>,
    work_id: Option<String>,
    authors: Vec<String>,
}

#[derive(Serialize)]
struct AuthorityLine<'a> {
    authority_id: &'a str,
    names: &'a [String],
    genders: &'a [GenderAssertion],
}

#[derive(Serialize)]
struct IngestReport {
    records: usize,
    records_with_isbn: usize,
    records_with_work: usize,
    isbns: usize,
    authorities: usize,
}

fn ingest(cfg: &PipelineConfig, a: &IngestArgs) -> Result<Vec<PathBuf>> {
    let records_path = required(&a.records, &cfg.records, "records file")?;
    let auth_path = required(&a.authorities, &cfg.authorities, "authorities file")?;
    let records = read_records(open(&records_path)?, &records_path.display().to_string())?;
    let authorities = read_authorities(open(&auth_path)?, &auth_path.display().to_string())?;
    let dir = out_dir(cfg, &a.out_dir);

    let isbns: BTreeSet<_> = records.iter().flat_map(|r| r.isbns.iter()).collect();
    let summary = IngestReport {
        records: records.len(),
        records_with_isbn: records.iter().filter(|r| !r.isbns.is_empty()).count(),
        records_with_work: records.iter().filter(|r| r.work_id.is_some()).count(),
        isbns: isbns.len(),
        authorities: authorities.len(),
    };

    let mut out = Staged::new(Meta::new("ingest", cfg.seeds));
    out.write(&dir.join("catalog.jsonl"), |w| {
        for r in &records {
            let line = RecordLine {
                record_id: r.record_id.clone(),
                source: r.source,
                isbn_fields: r.isbns.iter().map(|i| i.to_string()).collect(),
                work_id: r.work_id.clone(),
                authors: r.author_names.clone(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    out.write(&dir.join("authorities.jsonl"), |w| {
        for auth in &authorities {
            serde_json::to_writer(&mut *w, &authority_line(auth))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    out.json(&dir.join("ingest-report.json"), &summary)?;
    out.commit()
}

fn authority_line(a: &AuthorityRecord) -> AuthorityLine<'_> {
    AuthorityLine {
        authority_id: &a.authority_id,
        names: &a.name_forms,
        genders: &a.gender_assertions,
    }
}

fn read_catalog(path: &Path) -> Result<Vec<CatalogRecord>> {
    read_records(open(path)?, &path.display().to_string())
}

#[derive(Serialize)]
struct ClusterReport {
    items: usize,
    isbns: usize,
    raw_rows: usize,
    unmapped_rows: usize,
    missing_rating_rows: usize,
    interactions: usize,
    users: usize,
}

fn cluster(cfg: &PipelineConfig, a: &ClusterArgs) -> Result<Vec<PathBuf>> {
    let dir = out_dir(cfg, &a.out_dir);
    let catalog = read_catalog(&input(&a.catalog, &None, &dir, "catalog.jsonl"))?;
    let raw = required(&a.interactions, &cfg.interactions, "interactions file")?;
    let (mode, scale) = mode_of(cfg, &a.mode)?;

    let clusters = cluster_items(&catalog);
    let resolver = ItemResolver::new(isbn_to_item(&clusters));
    let loaded = load_interactions(open(&raw)?, mode, scale, Some(&resolver))?;
    info!("{} of {} interaction rows matched no ISBN", loaded.unmapped, loaded.raw_rows);
    let summary = ClusterReport {
        items: clusters.len(),
        isbns: clusters.iter().map(|c| c.members.len()).sum(),
        raw_rows: loaded.raw_rows,
        unmapped_rows: loaded.unmapped,
        missing_rating_rows: loaded.rejected.missing_rating.len(),
        interactions: loaded.set.len(),
        users: loaded.set.n_users(),
    };

    let mut out = Staged::new(Meta::new("cluster", cfg.seeds));
    out.write(&dir.join("clusters.csv"), |w| write_clusters(w, &clusters))?;
    out.write(&dir.join("interactions.csv"), |w| write_interactions(w, loaded.set.interactions()))?;
    out.json(&dir.join("cluster-report.json"), &summary)?;
    out.commit()
}

/// `clusters.csv` does not store record membership; recover it by placing
/// each record in the cluster of its first ISBN.
fn attach_records(clusters: &mut [ItemCluster], catalog: &[CatalogRecord]) {
    let by_isbn = isbn_to_item(clusters);
    let index: BTreeMap<String, usize> = clusters.iter().enumerate().map(|(i, c)| (c.item_id.clone(), i)).collect();
    for rec in catalog {
        if let Some(item) = rec.isbns.first().and_then(|i| by_isbn.get(i)) {
            clusters[index[item]].records.insert(rec.record_id.clone());
        }
    }
}

fn link(cfg: &PipelineConfig, a: &LinkArgs) -> Result<Vec<PathBuf>> {
    let dir = out_dir(cfg, &a.out_dir);
    let catalog = read_catalog(&input(&a.catalog, &None, &dir, "catalog.jsonl"))?;
    let auth_path = input(&a.authorities, &None, &dir, "authorities.jsonl");
    let authorities = read_authorities(open(&auth_path)?, &auth_path.display().to_string())?;
    let mut clusters = read_clusters(open(&input(&a.clusters, &None, &dir, "clusters.csv"))?)?;
    attach_records(&mut clusters, &catalog);

    let genders = link_item_genders(&clusters, &catalog, &authorities);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for g in genders.values() {
        *counts.entry(g.as_str()).or_default() += 1;
    }
    let mut out = Staged::new(Meta::new("link", cfg.seeds));
    out.write(&dir.join("genders.csv"), |w| write_genders(w, &genders))?;
    out.json(&dir.join("link-report.json"), &counts)?;
    out.commit()
}

// ---- recommendation stages -------------------------------------------------

fn apply_hyper(mut c: ModelConfig, h: &Hyper, seed: u64) -> ModelConfig {
    if let Some(v) = h.neighbors {
        c.neighbors = v;
    }
    if let Some(v) = h.min_neighbors {
        c.min_neighbors = v;
    }
    if let Some(v) = h.factors {
        c.factors = v;
    }
    if let Some(v) = h.regularization {
        c.regularization = v;
    }
    if let Some(v) = h.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = h.epochs {
        c.epochs = v;
    }
    if let Some(v) = h.confidence_weight {
        c.confidence_weight = v;
    }
    if let Some(v) = h.damping {
        c.damping = v;
    }
    c.seed = seed;
    c
}

/// Model configs for the flagged algorithms, taking hyperparameters from the
/// config where it lists the same algorithm.
fn model_configs(cfg: &PipelineConfig, algorithms: &[recfair_core::recommend::Algorithm], h: &Hyper, seed: u64) -> Result<Vec<ModelConfig>> {
    let base: Vec<ModelConfig> = if algorithms.is_empty() {
        cfg.algorithms.clone()
    } else {
        algorithms
            .iter()
            .map(|&alg| {
                cfg.algorithms
                    .iter()
                    .find(|c| c.algorithm == alg)
                    .cloned()
                    .unwrap_or_else(|| ModelConfig::new(alg))
            })
            .collect()
    };
    if base.is_empty() {
        return Err(Error::InvalidInput("no algorithm given (--algorithm or config)".into()));
    }
    Ok(base.into_iter().map(|c| apply_hyper(c, h, seed)).collect())
}

fn train_models(mut cfg: PipelineConfig, a: &TrainArgs) -> Result<Vec<PathBuf>> {
    if let Some(s) = a.seed {
        cfg.seeds.train = s;
    }
    let dir = out_dir(&cfg, &a.out_dir);
    let set = load_clean(&input(&a.interactions, &None, &dir, "interactions.csv"), &cfg, &a.mode)?;
    let matrix = RatingMatrix::from_interactions(&set)?;
    let mut out = Staged::new(Meta::new("train", cfg.seeds));
    for config in model_configs(&cfg, &a.algorithm, &a.hyper, cfg.seeds.train)? {
        let model = train(&matrix, &config)?;
        out.write(&dir.join(format!("model-{}.json", config.algorithm)), |w| model.save(w))?;
    }
    out.commit()
}

fn recommend_lists(mut cfg: PipelineConfig, a: &RecommendArgs) -> Result<Vec<PathBuf>> {
    if let Some(s) = a.seed {
        cfg.seeds.sample = s;
    }
    if a.model.is_empty() && a.mock.is_none() {
        return Err(Error::InvalidInput("nothing to recommend with: give --model or --mock".into()));
    }
    let dir = out_dir(&cfg, &a.out_dir);
    let set = load_clean(&input(&a.interactions, &None, &dir, "interactions.csv"), &cfg, &a.mode)?;
    let genders = load_genders(&input(&a.genders, &None, &dir, "genders.csv"))?;
    let n = a.n.unwrap_or(cfg.analysis_list_len);
    let filter = KnownGenderFilter {
        genders: &genders,
        min: a.min_known.unwrap_or(cfg.analysis_min_known),
    };
    let mut users = sample_users(&set, 1, a.sample.unwrap_or(cfg.analysis_sample), Some(filter), cfg.seeds.sample)?;
    users.sort();

    let matrix = RatingMatrix::from_interactions(&set)?;
    let mut lists: Vec<RecList> = Vec::new();
    for path in &a.model {
        let model = Model::load(open(path)?)?;
        if model.mode != set.mode() {
            return Err(Error::InvalidInput(format!(
                "model {} was trained in {} mode but interactions are {}",
                path.display(),
                model.mode,
                set.mode()
            )));
        }
        for u in &users {
            lists.push(recommend(&model, u, n, &matrix)?);
        }
    }
    if a.mock == Some(MockKind::ProfileCopy) {
        lists.extend(profile_copy(&set, &genders, &users, n)?);
    }
    let dest = a.out.clone().unwrap_or_else(|| dir.join("recommendations.csv"));
    let mut out = Staged::new(Meta::new("recommend", cfg.seeds));
    out.write(&dest, |w| write_recommendations(w, &lists, None))?;
    out.commit()
}

// ---- analysis --------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    user: String,
    n: u64,
    y: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecObsRow {
    user: String,
    algorithm: String,
    n: u64,
    y: u64,
    theta: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn label(list: &RecList, strategy: &Option<String>) -> String {
    match strategy {
        Some(s) => format!("{}/{s}", list.algorithm),
        None => list.algorithm.clone(),
    }
}

fn known_counts(list: &RecList, genders: &BTreeMap<String, AuthorGender>) -> (u64, u64) {
    list.items().fold((0, 0), |(n, y), item| match genders.get(item) {
        Some(AuthorGender::Female) => (n + 1, y + 1),
        Some(AuthorGender::Male) => (n + 1, y),
        _ => (n, y),
    })
}

/// Profile and list observations from pipeline files. Lists with no
/// known-gender items carry no information about balance and are dropped.
fn observations_from_recs(
    set: &InteractionSet,
    genders: &BTreeMap<String, AuthorGender>,
    rec_files: &[PathBuf],
) -> Result<(Vec<ProfileObservation>, Vec<RecObservation>)> {
    let mut recs = Vec::new();
    let mut users = BTreeSet::new();
    for path in rec_files {
        let (lists, strategy) = read_tagged_recommendations(open(path)?)?;
        for list in &lists {
            users.insert(list.user_id.clone());
            let (n, y) = known_counts(list, genders);
            if n > 0 {
                recs.push(RecObservation::from_counts(&list.user_id, label(list, &strategy), y, n)?);
            }
        }
    }
    let profiles = users
        .iter()
        .map(|u| profile_stats(u, set, genders).map(ProfileObservation::from))
        .collect::<Result<_>>()?;
    Ok((profiles, recs))
}

fn analyze(mut cfg: PipelineConfig, a: &AnalyzeArgs) -> Result<Vec<PathBuf>> {
    if let Some(s) = a.seed {
        cfg.seeds.mcmc = s;
    }
    if let Some(v) = a.chains {
        cfg.mcmc.chains = v;
    }
    if let Some(v) = a.warmup {
        cfg.mcmc.warmup = v;
    }
    if let Some(v) = a.iterations {
        cfg.mcmc.iterations = v;
    }
    let dir = out_dir(&cfg, &a.out_dir);
    let (profiles, recs) = match (&a.profiles, &a.rec_obs) {
        (Some(p), Some(r)) => {
            let profiles = read_rows::<ProfileRow>(p)?
                .into_iter()
                .map(|r| ProfileObservation {
                    user_id: r.user,
                    n: r.n,
                    y: r.y,
                })
                .collect();
            let recs = read_rows::<RecObsRow>(r)?
                .into_iter()
                .map(|r| {
                    let mut o = RecObservation::from_proportion(r.user, r.algorithm, r.theta, r.n)?;
                    o.y = r.y;
                    Ok(o)
                })
                .collect::<Result<_>>()?;
            (profiles, recs)
        }
        _ => {
            if a.recs.is_empty() {
                return Err(Error::InvalidInput("give --recs files, or --profiles with --rec-obs".into()));
            }
            let set = load_clean(&input(&a.interactions, &None, &dir, "interactions.csv"), &cfg, &a.mode)?;
            let genders = load_genders(&input(&a.genders, &None, &dir, "genders.csv"))?;
            observations_from_recs(&set, &genders, &a.recs)?
        }
    };

    let samples = fit(&profiles, &recs, &cfg.mcmc_config())?;
    if !samples.converged {
        log::warn!("sampler did not converge; see diagnostics.csv");
    }
    let summary = Summary::new(&samples, &profiles);
    let mut out = Staged::new(Meta::new("analyze", cfg.seeds));
    out.write(&dir.join("observations.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        for o in &recs {
            c.serialize(RecObsRow {
                user: o.user_id.clone(),
                algorithm: o.algorithm.clone(),
                n: o.n,
                y: o.y,
                theta: o.theta,
            })?;
        }
        c.flush()?;
        Ok(())
    })?;
    out.write(&dir.join("posterior.csv"), |w| write_posterior(w, &samples, a.with_theta))?;
    out.write(&dir.join("diagnostics.csv"), |w| write_diagnostics(w, &samples))?;
    out.json(&dir.join("summary.json"), &summary)?;
    out.commit()
}

// ---- re-ranking and evaluation ---------------------------------------------

fn rerank(cfg: &PipelineConfig, a: &RerankArgs) -> Result<Vec<PathBuf>> {
    let dir = out_dir(cfg, &a.out_dir);
    let genders = load_genders(&input(&a.genders, &None, &dir, "genders.csv"))?;
    let (lists, prior) = read_tagged_recommendations(open(&a.input)?)?;
    if let Some(s) = prior {
        return Err(Error::InvalidInput(format!("{} is already re-ranked ({s})", a.input.display())));
    }
    let n = a.n.unwrap_or(cfg.analysis_list_len);
    let set = match a.target {
        Some(Target::Profile) => Some(load_clean(&input(&a.interactions, &None, &dir, "interactions.csv"), cfg, &a.mode)?),
        _ => None,
    };
    let reranked: Vec<RecList> = lists
        .iter()
        .map(|list| {
            let target = match (&a.target, a.strategy) {
                (_, Strategy::SingleEq | Strategy::GreedyEq) => None,
                (Some(Target::Fixed(t)), _) => Some(*t),
                (Some(Target::Profile), _) => {
                    let p = profile_stats(&list.user_id, set.as_ref().expect("loaded above"), &genders)?;
                    Some(smoothed_list_proportion(p.y, p.n)?)
                }
                (None, _) => None,
            };
            Ok(Reranker::new(a.strategy, target)?.apply(list, &genders, n).list)
        })
        .collect::<Result<_>>()?;
    let dest = a.out.clone().unwrap_or_else(|| dir.join(format!("recommendations-{}.csv", a.strategy)));
    let mut out = Staged::new(Meta::new("rerank", cfg.seeds));
    out.write(&dest, |w| write_recommendations(w, &reranked, Some(a.strategy.as_str())))?;
    out.commit()
}

#[derive(Serialize)]
struct SearchInfo {
    budget: usize,
    failed: usize,
    tune_users: usize,
    best_mrr: f64,
}

#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    report: EvalReport,
    config: ModelConfig,
    search: Option<SearchInfo>,
}

fn eval(mut cfg: PipelineConfig, a: &EvalArgs) -> Result<Vec<PathBuf>> {
    if let Some(s) = a.seed {
        cfg.seeds.eval = s;
    }
    if a.holdout != 1 {
        return Err(Error::InvalidInput("only --holdout 1 is supported".into()));
    }
    let dir = out_dir(&cfg, &a.out_dir);
    let set = load_clean(&input(&a.interactions, &None, &dir, "interactions.csv"), &cfg, &a.mode)?;
    let genders = a.genders.as_deref().map(load_genders).transpose()?;
    let strategies = match (&a.strategies, &genders) {
        (Some(s), _) => s.clone(),
        (None, Some(_)) => Strategy::ALL.to_vec(),
        (None, None) => Vec::new(),
    };
    let opts = EvalOptions {
        list_len: a.list_len.unwrap_or(cfg.eval_list_len),
        rerank_pool: a.rerank_pool.unwrap_or(cfg.rerank_pool),
    };
    let min_ratings = a.min_ratings.unwrap_or(cfg.eval_min_ratings);
    let count = a.sample.unwrap_or(cfg.eval_sample);
    let tune_count = a.tune_sample.unwrap_or(cfg.tune_sample);
    let budget = a.search_budget.unwrap_or(cfg.search_budget);
    let tuning = tune_count > 0 && budget > 0;

    let (eval_users, tune_users) = if tuning {
        sample_disjoint_users(&set, min_ratings, count, tune_count, cfg.seeds.eval)?
    } else {
        (sample_users(&set, min_ratings, count, None, cfg.seeds.eval)?, Vec::new())
    };
    let split = EvalSplit::new(&set, &eval_users, cfg.seeds.eval)?;
    let tune_split = if tuning {
        Some(EvalSplit::new(&set, &tune_users, cfg.seeds.search)?)
    } else {
        None
    };

    let mut out = Staged::new(Meta::new("eval", cfg.seeds));
    for base in model_configs(&cfg, &a.algorithm, &a.hyper, cfg.seeds.train)? {
        let (config, search) = match &tune_split {
            Some(ts) => {
                let result = random_search(&base, &cfg.search, budget, cfg.seeds.search, |c| {
                    evaluate(c, ts, &opts, None, &[]).map(|e| e.report.mrr)
                })?;
                let info = SearchInfo {
                    budget,
                    failed: result.failed,
                    tune_users: ts.heldout.len(),
                    best_mrr: result.score,
                };
                (result.best, Some(info))
            }
            None => (base, None),
        };
        let evaluation = evaluate(&config, &split, &opts, genders.as_ref(), &strategies)?;
        let output = EvalOutput {
            report: evaluation.report,
            config: config.clone(),
            search,
        };
        out.json(&dir.join(format!("eval-{}.json", config.algorithm)), &output)?;
    }
    out.commit()
}

// ---- synthetic data --------------------------------------------------------

fn read_spec<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_reader(open(p)?)?),
        None => Ok(T::default()),
    }
}

#[derive(Serialize)]
struct SynthProfileRow<'a> {
    user: &'a str,
    n: u64,
    y: u64,
    theta: f64,
    tendency: f64,
}

fn synth(mut cfg: PipelineConfig, a: &SynthArgs) -> Result<Vec<PathBuf>> {
    let dir = out_dir(&cfg, &a.out_dir);
    let mut out;
    match a.kind {
        SynthKind::Matrix => {
            let mut spec: MatrixSpec = read_spec(&a.spec)?;
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            cfg.seeds.synth = spec.seed;
            let m = gen_rating_matrix(&spec)?;
            out = Staged::new(Meta::new("synth matrix", cfg.seeds));
            let dest = a.out.clone().unwrap_or_else(|| dir.join("interactions.csv"));
            out.write(&dest, |w| write_interactions(w, m.interactions.interactions()))?;
        }
        kind => {
            let mut spec: SynthSpec = read_spec(&a.spec)?;
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            cfg.seeds.synth = spec.seed;
            out = Staged::new(Meta::new(&format!("synth {}", synth_name(kind)), cfg.seeds));
            match kind {
                SynthKind::Profiles => {
                    let profiles = gen_profiles(&spec)?;
                    let dest = a.out.clone().unwrap_or_else(|| dir.join("profiles.csv"));
                    out.write(&dest, |w| write_profiles(w, &profiles))?;
                }
                SynthKind::Recs => {
                    if spec.algorithms.is_empty() {
                        return Err(Error::InvalidInput("synth recs needs a spec listing at least one algorithm".into()));
                    }
                    let profiles = gen_profiles(&spec)?;
                    let recs = gen_rec_observations(&profiles, &spec.algorithms, spec.seed)?;
                    let dest = a.out.clone().unwrap_or_else(|| dir.join("rec-obs.csv"));
                    out.write(&dest, |w| {
                        let mut c = csv::Writer::from_writer(w);
                        for o in &recs {
                            c.serialize(RecObsRow {
                                user: o.user_id.clone(),
                                algorithm: o.algorithm.clone(),
                                n: o.n,
                                y: o.y,
                                theta: o.theta,
                            })?;
                        }
                        c.flush()?;
                        Ok(())
                    })?;
                }
                SynthKind::Library => {
                    let lib = gen_library(&spec)?;
                    out.write(&dir.join("interactions.csv"), |w| write_interactions(w, &lib.interactions))?;
                    out.write(&dir.join("genders.csv"), |w| write_genders(w, &lib.genders))?;
                    out.write(&dir.join("profiles.csv"), |w| write_profiles(w, &lib.profiles))?;
                }
                SynthKind::Matrix => unreachable!(),
            }
        }
    }
    out.commit()
}

fn synth_name(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::Profiles => "profiles",
        SynthKind::Recs => "recs",
        SynthKind::Library => "library",
        SynthKind::Matrix => "matrix",
    }
}

fn write_profiles<W: Write>(w: W, profiles: &[recfair_core::synth::SynthProfile]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    for p in profiles {
        c.serialize(SynthProfileRow {
            user: &p.observation.user_id,
            n: p.observation.n,
            y: p.observation.y,
            theta: p.theta,
            tendency: p.tendency,
        })?;
    }
    c.flush()?;
    Ok(())
}

// ---- report ----------------------------------------------------------------

fn report(cfg: &PipelineConfig, a: &ReportArgs) -> Result<Vec<PathBuf>> {
    let dir = out_dir(cfg, &a.out_dir);
    let summary: Option<Summary> = a.summary.as_deref().map(|p| Ok::<_, Error>(serde_json::from_reader(open(p)?)?)).transpose()?;
    let mut rows = Vec::new();
    if !a.recs.is_empty() {
        let genders = load_genders(&input(&a.genders, &None, &dir, "genders.csv"))?;
        for path in &a.recs {
            let (lists, strategy) = read_tagged_recommendations(open(path)?)?;
            let mut by_label: BTreeMap<String, Vec<RecList>> = BTreeMap::new();
            for l in lists {
                by_label.entry(label(&l, &strategy)).or_default().push(l);
            }
            rows.extend(by_label.iter().map(|(name, ls)| list_row(name, ls, &genders)));
        }
    }
    let accuracy = a
        .eval
        .iter()
        .map(|p| Ok(serde_json::from_reader(open(p)?)?))
        .collect::<Result<Vec<EvalReport>>>()?;
    if summary.is_none() && rows.is_empty() && accuracy.is_empty() {
        return Err(Error::InvalidInput("nothing to report: give --summary, --recs, or --eval".into()));
    }
    let report = Report::new(summary, rows, accuracy);
    let mut out = Staged::new(Meta::new("report", cfg.seeds));
    out.json(&dir.join("report.json"), &report)?;
    out.write(&dir.join("report.md"), |w| Ok(w.write_all(report.to_markdown().as_bytes())?))?;
    out.commit()
}
