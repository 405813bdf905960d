//! Experiment orchestration: configuration, the simulation loop, the
//! (algorithm x seed x user) grid, and CSV serialization.
//!
//! One experiment preprocesses its dataset once, fits ground truth once
//! per (seed, user), then runs every configured algorithm variant against
//! the same evaluation users with derived RNG streams per grid cell, so
//! results never depend on grid iteration order. Outputs are plot-ready
//! CSVs plus a JSON split report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandits::{build_policy, CascadePolicy, ExposureLedger, PolicyConfig, PolicyKind};
use crate::clickmodel::{self, GroundTruthConfig, GroundTruthUser};
use crate::data::{self, BinarizeRule, Catalog, FormatSpec, Provenance, SplitReport};
use crate::error::{Error, Result};
use crate::features::{FeatureBundle, RelevanceProfile, TopicProfile};
use crate::metrics::{self, ImpressionCounts};
use crate::seeding::{self, role};

/// Environment variable overriding the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "CASCADE_BANDITS_OUTPUT_DIR";

/// Dataset paths and preprocessing knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub interactions: PathBuf,
    pub suppliers: PathBuf,
    pub genres: PathBuf,
    pub provenance: Provenance,
    #[serde(default)]
    pub format: FormatSpec,
    /// Keep only this many most-active users (None: keep all).
    #[serde(default)]
    pub top_users: Option<usize>,
    /// Keep only this many most-interacted items (None: keep all).
    #[serde(default)]
    pub top_items: Option<usize>,
    pub binarize: BinarizeRule,
}

/// One algorithm entry in the grid. Unset fields fall back to the
/// experiment-level defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: PolicyKind,
    #[serde(default)]
    pub unbiased: bool,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub reg: Option<f64>,
    #[serde(default)]
    pub clip_attraction: Option<bool>,
}

impl AlgorithmSpec {
    pub fn resolve(&self, cfg: &ExperimentConfig) -> PolicyConfig {
        PolicyConfig {
            kind: self.kind,
            c: self.c.unwrap_or(cfg.c),
            k: cfg.k,
            unbiased: self.unbiased,
            reg: self.reg.unwrap_or(cfg.reg),
            clip_attraction: self.clip_attraction.unwrap_or(cfg.clip_attraction),
        }
    }
}

mod defaults {
    pub fn n() -> u64 {
        10_000
    }
    pub fn num_eval_users() -> usize {
        100
    }
    pub fn k() -> usize {
        4
    }
    pub fn svd_rank() -> usize {
        10
    }
    pub fn topic_scale() -> f64 {
        1.0
    }
    pub fn c() -> f64 {
        1.0
    }
    pub fn reg() -> f64 {
        1.0
    }
    pub fn clip_attraction() -> bool {
        true
    }
    pub fn split_ratio() -> f64 {
        0.5
    }
    pub fn curve_interval() -> u64 {
        100
    }
}

/// Full experiment description; the config file is this struct as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Interaction steps per evaluated user.
    #[serde(default = "defaults::n")]
    pub n: u64,
    #[serde(default = "defaults::num_eval_users")]
    pub num_eval_users: usize,
    /// Recommendation list length.
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default = "defaults::svd_rank")]
    pub svd_rank: usize,
    #[serde(default = "defaults::topic_scale")]
    pub topic_scale: f64,
    /// Default exploration coefficient for algorithms that do not set one.
    #[serde(default = "defaults::c")]
    pub c: f64,
    #[serde(default = "defaults::reg")]
    pub reg: f64,
    #[serde(default = "defaults::clip_attraction")]
    pub clip_attraction: bool,
    #[serde(default = "defaults::split_ratio")]
    pub split_ratio: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Steps between coverage/regret curve samples.
    #[serde(default = "defaults::curve_interval")]
    pub curve_interval: u64,
    /// Keep one learning state per (algorithm, seed) across users instead
    /// of a fresh policy per user.
    #[serde(default)]
    pub shared_policy: bool,
    #[serde(default)]
    pub ground_truth: GroundTruthConfig,
}

impl ExperimentConfig {
    /// Parse a JSON config; relative paths resolve against the config
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut cfg.dataset.interactions);
        resolve(&mut cfg.dataset.suppliers);
        resolve(&mut cfg.dataset.genres);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds configured".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.num_eval_users == 0 {
            return Err(Error::Config("num_eval_users must be at least 1".into()));
        }
        if self.curve_interval == 0 {
            return Err(Error::Config("curve_interval must be at least 1".into()));
        }
        for spec in &self.algorithms {
            spec.resolve(self).validate()?;
        }
        Ok(())
    }
}

/// Everything derivable from the dataset alone, shared across grid cells
/// and sweep points.
pub struct Prepared {
    pub catalog: Catalog,
    pub bundle: Arc<FeatureBundle>,
    pub test_positives: BTreeMap<u64, Vec<usize>>,
    /// Users with a nonempty test half, ascending.
    pub eligible_users: Vec<u64>,
    pub report: SplitReport,
}

/// Load, filter, binarize, split, and build both feature families.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let ds = &cfg.dataset;
    let raw = data::load_interactions(&ds.interactions, &ds.format, ds.provenance)?;
    let filtered = match (ds.top_users, ds.top_items) {
        (None, None) => raw,
        (tu, ti) => {
            let n_users = tu.unwrap_or_else(|| raw.distinct_users());
            let n_items = ti.unwrap_or_else(|| raw.distinct_items());
            data::top_n_filter(&raw, n_users, n_items)?
        }
    };
    let binarized = data::binarize(&filtered, ds.binarize);
    let meta = data::load_metadata(&ds.suppliers, &ds.genres)?;
    let catalog = Catalog::build(&binarized, &meta)?;

    let (train, test, report) = data::split_profile(&binarized, cfg.split_ratio, cfg.split_seed)?;
    let topics = TopicProfile::build(catalog.topics_of(), catalog.num_topics(), cfg.topic_scale)?;
    let matrix = data::train_matrix(&catalog, &train)?;
    let relevance = RelevanceProfile::from_train_matrix(&matrix, cfg.svd_rank)?;
    let bundle = Arc::new(FeatureBundle::new(topics, relevance)?);

    let test_positives = data::test_positives(&catalog, &test)?;
    let eligible_users: Vec<u64> = test_positives
        .iter()
        .filter(|(_, items)| !items.is_empty())
        .map(|(&u, _)| u)
        .collect();
    Ok(Prepared { catalog, bundle, test_positives, eligible_users, report })
}

/// One simulated interaction step.
#[derive(Debug, Clone)]
pub struct StepLog {
    pub step: u64,
    pub list: Vec<usize>,
    pub click_position: Option<usize>,
    pub regret: f64,
}

/// Drive one user through `n` steps: select, sample the cascade, learn
/// from the examined prefix, account exposure, log regret. Errors carry
/// the grid coordinates.
pub fn run_user_simulation(
    gt: &GroundTruthUser,
    policy: &mut dyn CascadePolicy,
    n: u64,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<StepLog>> {
    let (name, unbiased, c) = {
        let pc = policy.config();
        (pc.kind.name(), pc.unbiased, pc.c)
    };
    let mut ledger = ExposureLedger::new(gt.weights().len());
    let mut logs = Vec::with_capacity(n as usize);
    for t in 1..=n {
        let tag = |e: Error| e.in_simulation(name, unbiased, c, seed, gt.user_id(), t);
        let trace = policy.select(&ledger).map_err(&tag)?;
        let outcome = clickmodel::sample_cascade(&trace.list, gt.weights(), rng);
        policy.update_from_feedback(&trace, &outcome).map_err(&tag)?;
        ledger.record(&trace).map_err(&tag)?;
        let regret = clickmodel::step_regret(&trace.list, gt).map_err(&tag)?;
        logs.push(StepLog {
            step: t,
            list: trace.list,
            click_position: outcome.click_position,
            regret,
        });
    }
    Ok(logs)
}

/// Per-cell result: curves sampled at the checkpoints plus final tallies.
pub struct RunResult {
    pub algorithm: PolicyKind,
    pub unbiased: bool,
    pub c: f64,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    /// Mean over users of cumulative regret, per checkpoint.
    pub regret_curve: Vec<f64>,
    /// Catalog fraction recommended to any user so far, per checkpoint.
    pub ic_curve: Vec<f64>,
    /// Mean per-user distinct fraction so far, per checkpoint.
    pub uic_curve: Vec<f64>,
    pub counts: ImpressionCounts,
    pub summary: SummaryRow,
}

/// One row of the summary CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub unbiased: bool,
    pub c: f64,
    pub seed: u64,
    pub item_coverage: f64,
    pub supplier_coverage: f64,
    pub user_item_coverage: f64,
    pub gini: f64,
    pub regret_final: f64,
}

pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    pub results: Vec<RunResult>,
    pub output_dir: PathBuf,
}

fn checkpoints(n: u64, interval: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = (1..=n / interval).map(|i| i * interval).collect();
    if cps.last() != Some(&n) {
        cps.push(n);
    }
    cps
}

struct CellAggregate {
    cps: Vec<u64>,
    counts: ImpressionCounts,
    regret_sum: Vec<f64>,
    uic_sum: Vec<f64>,
    ic_seen: Vec<Vec<bool>>,
    final_regret_sum: f64,
    users: usize,
}

impl CellAggregate {
    fn new(cps: Vec<u64>, catalog: &Catalog) -> Result<Self> {
        let counts =
            ImpressionCounts::new(catalog.supplier_of().to_vec(), catalog.num_suppliers())?;
        let num_items = catalog.num_items();
        Ok(Self {
            regret_sum: vec![0.0; cps.len()],
            uic_sum: vec![0.0; cps.len()],
            ic_seen: vec![vec![false; num_items]; cps.len()],
            cps,
            counts,
            final_regret_sum: 0.0,
            users: 0,
        })
    }

    fn absorb_user(&mut self, user: u64, logs: &[StepLog]) -> Result<()> {
        let num_items = self.counts.num_items();
        let mut first_seen = vec![u64::MAX; num_items];
        let mut cum = 0.0;
        let mut cp_idx = 0;
        for log in logs {
            self.counts.record_list(user, &log.list)?;
            for &a in &log.list {
                if first_seen[a] == u64::MAX {
                    first_seen[a] = log.step;
                }
            }
            cum += log.regret;
            if cp_idx < self.cps.len() && log.step == self.cps[cp_idx] {
                self.regret_sum[cp_idx] += cum;
                cp_idx += 1;
            }
        }
        self.final_regret_sum += cum;
        for (i, &t_cp) in self.cps.iter().enumerate() {
            let mut distinct = 0usize;
            for item in 0..num_items {
                if first_seen[item] <= t_cp {
                    distinct += 1;
                    self.ic_seen[i][item] = true;
                }
            }
            self.uic_sum[i] += distinct as f64 / num_items as f64;
        }
        self.users += 1;
        Ok(())
    }

    fn finish(self, pc: &PolicyConfig, seed: u64) -> Result<RunResult> {
        let users = self.users.max(1) as f64;
        let regret_curve: Vec<f64> = self.regret_sum.iter().map(|s| s / users).collect();
        let uic_curve: Vec<f64> = self.uic_sum.iter().map(|s| s / users).collect();
        let num_items = self.counts.num_items() as f64;
        let ic_curve: Vec<f64> = self
            .ic_seen
            .iter()
            .map(|seen| seen.iter().filter(|&&s| s).count() as f64 / num_items)
            .collect();
        let summary = SummaryRow {
            algorithm: pc.kind.name().to_string(),
            unbiased: pc.unbiased,
            c: pc.c,
            seed,
            item_coverage: metrics::item_coverage(&self.counts),
            supplier_coverage: metrics::supplier_coverage(&self.counts),
            user_item_coverage: metrics::user_item_coverage(&self.counts)?,
            gini: metrics::gini(self.counts.per_item())?,
            regret_final: self.final_regret_sum / users,
        };
        Ok(RunResult {
            algorithm: pc.kind,
            unbiased: pc.unbiased,
            c: pc.c,
            seed,
            checkpoints: self.cps,
            regret_curve,
            ic_curve,
            uic_curve,
            counts: self.counts,
            summary,
        })
    }
}

/// Evaluation users for one seed: sampled without replacement from the
/// eligible pool, returned ascending.
fn sample_eval_users(eligible: &[u64], m: usize, seed: u64) -> Result<Vec<u64>> {
    if m > eligible.len() {
        return Err(Error::NotEnough {
            what: "eligible evaluation users",
            need: m,
            have: eligible.len(),
        });
    }
    let mut pool: Vec<u64> = eligible.to_vec();
    let mut rng = seeding::stream(seed, &[role::EVAL_USERS]);
    use rand::Rng;
    for i in 0..m {
        let j = i + (rng.random::<u64>() as usize) % (pool.len() - i);
        pool.swap(i, j);
    }
    let mut picked = pool[..m].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn variant_label(kind: PolicyKind, unbiased: bool) -> String {
    if unbiased {
        format!("{}-unbiased", kind.name())
    } else {
        kind.name().to_string()
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_outputs(dir: &Path, catalog: &Catalog, summary: &RunSummary) -> Result<()> {
    let mut csv = String::from("algorithm,unbiased,c,seed,IC,SC,UIC,G,regret_final\n");
    for r in &summary.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            r.unbiased,
            r.c,
            r.seed,
            r.item_coverage,
            r.supplier_coverage,
            r.user_item_coverage,
            r.gini,
            r.regret_final
        ));
    }
    write_file(&dir.join("summary.csv"), &csv)?;

    for res in &summary.results {
        let label = variant_label(res.algorithm, res.unbiased);
        let mut curves = String::from("step,cum_regret,cum_IC,cum_UIC\n");
        for (i, &t) in res.checkpoints.iter().enumerate() {
            curves.push_str(&format!(
                "{},{},{},{}\n",
                t, res.regret_curve[i], res.ic_curve[i], res.uic_curve[i]
            ));
        }
        let name = format!("curves_{}_c{}_s{}.csv", label, res.c, res.seed);
        write_file(&dir.join(name), &curves)?;

        let mut exposure = String::from("item,supplier,count\n");
        for (idx, &count) in res.counts.per_item().iter().enumerate() {
            exposure.push_str(&format!(
                "{},{},{}\n",
                catalog.item_ids()[idx],
                catalog.supplier_name(catalog.supplier_of()[idx]),
                count
            ));
        }
        let name = format!("exposure_{}_c{}_s{}.csv", label, res.c, res.seed);
        write_file(&dir.join(name), &exposure)?;
    }
    Ok(())
}

/// Run the full grid against an already-prepared dataset.
pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    write_file(
        &cfg.output_dir.join("split_report.json"),
        &serde_json::to_string_pretty(&prepared.report)?,
    )?;

    // Same users and ground truths for every algorithm at a given seed.
    let mut gt_by_seed: BTreeMap<u64, Vec<GroundTruthUser>> = BTreeMap::new();
    for &seed in &cfg.seeds {
        if gt_by_seed.contains_key(&seed) {
            continue;
        }
        let users = sample_eval_users(&prepared.eligible_users, cfg.num_eval_users, seed)?;
        let mut gts = Vec::with_capacity(users.len());
        for &user in &users {
            let mut rng = seeding::stream(seed, &[role::GROUND_TRUTH, user]);
            let gt = clickmodel::fit_ground_truth(
                user,
                &prepared.test_positives[&user],
                &prepared.bundle,
                cfg.k,
                &cfg.ground_truth,
                &mut rng,
            )?;
            gts.push(gt);
        }
        gt_by_seed.insert(seed, gts);
    }

    let cps = checkpoints(cfg.n, cfg.curve_interval);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (algo_idx, spec) in cfg.algorithms.iter().enumerate() {
        let pc = spec.resolve(cfg);
        for &seed in &cfg.seeds {
            let gts = &gt_by_seed[&seed];
            let mut aggregate = CellAggregate::new(cps.clone(), &prepared.catalog)?;
            let mut shared = if cfg.shared_policy {
                Some(build_policy(&pc, prepared.bundle.clone())?)
            } else {
                None
            };
            for gt in gts {
                let mut fresh;
                let policy: &mut dyn CascadePolicy = match shared.as_mut() {
                    Some(p) => p.as_mut(),
                    None => {
                        fresh = build_policy(&pc, prepared.bundle.clone())?;
                        fresh.as_mut()
                    }
                };
                let mut rng = seeding::stream(
                    seed,
                    &[role::CLICKS, algo_idx as u64, gt.user_id()],
                );
                let logs = run_user_simulation(gt, policy, cfg.n, seed, &mut rng)?;
                aggregate.absorb_user(gt.user_id(), &logs)?;
            }
            // Every (user, step) contributed exactly K impressions.
            assert_eq!(
                aggregate.counts.total(),
                gts.len() as u64 * cfg.n * cfg.k as u64,
                "impression accounting is broken"
            );
            let result = aggregate.finish(&pc, seed)?;
            rows.push(result.summary.clone());
            results.push(result);
        }
    }
    let summary = RunSummary { rows, results, output_dir: cfg.output_dir.clone() };
    write_outputs(&cfg.output_dir, &prepared.catalog, &summary)?;
    Ok(summary)
}

/// Preprocess and run the configured grid, writing outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    run_prepared(cfg, &prepared)
}

/// One line of the sweep output: coverage and regret of both variants of
/// one algorithm at one exploration coefficient, averaged over seeds.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub algorithm: PolicyKind,
    pub c: f64,
    pub ic_original: f64,
    pub ic_unbiased: f64,
    pub regret_original: f64,
    pub regret_unbiased: f64,
}

pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub per_c: Vec<(f64, RunSummary)>,
}

/// For each exploration coefficient, run original and discounted variants
/// of every configured algorithm kind and tabulate the coverage shift.
pub fn sweep_exploration(cfg: &ExperimentConfig, c_values: &[f64]) -> Result<SweepSummary> {
    if c_values.is_empty() {
        return Err(Error::Config("sweep needs at least one c value".into()));
    }
    if let Some(&bad) = c_values.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Config(format!("invalid sweep coefficient {bad}")));
    }
    cfg.validate()?;
    let mut kinds: Vec<PolicyKind> = Vec::new();
    for spec in &cfg.algorithms {
        if !kinds.contains(&spec.kind) {
            kinds.push(spec.kind);
        }
    }
    let prepared = prepare(cfg)?;

    let mut rows = Vec::new();
    let mut per_c = Vec::new();
    for &c in c_values {
        let mut sub = cfg.clone();
        sub.output_dir = cfg.output_dir.join(format!("c{c}"));
        sub.algorithms = kinds
            .iter()
            .flat_map(|&kind| {
                [false, true].map(|unbiased| AlgorithmSpec {
                    kind,
                    unbiased,
                    c: Some(c),
                    reg: None,
                    clip_attraction: None,
                })
            })
            .collect();
        let summary = run_prepared(&sub, &prepared)?;

        for &kind in &kinds {
            let mean = |unbiased: bool, f: &dyn Fn(&SummaryRow) -> f64| -> f64 {
                let vals: Vec<f64> = summary
                    .rows
                    .iter()
                    .filter(|r| r.algorithm == kind.name() && r.unbiased == unbiased)
                    .map(f)
                    .collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            rows.push(SweepRow {
                algorithm: kind,
                c,
                ic_original: mean(false, &|r| r.item_coverage),
                ic_unbiased: mean(true, &|r| r.item_coverage),
                regret_original: mean(false, &|r| r.regret_final),
                regret_unbiased: mean(true, &|r| r.regret_final),
            });
        }
        per_c.push((c, summary));
    }

    let mut csv = String::from("algorithm,c,IC_original,IC_unbiased,regret_original,regret_unbiased\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm, r.c, r.ic_original, r.ic_unbiased, r.regret_original, r.regret_unbiased
        ));
    }
    write_file(&cfg.output_dir.join("sweep.csv"), &csv)?;
    Ok(SweepSummary { rows, per_c })
}

/// Pipeline statistics for `validate-data`.
#[derive(Debug, Clone, Serialize)]
pub struct DataReport {
    pub users: usize,
    pub items: usize,
    pub suppliers: usize,
    pub topics: usize,
    pub positive_interactions: usize,
    pub eligible_users: usize,
    pub excluded_users: usize,
}

/// Run preprocessing and feature construction end to end, returning the
/// resulting dataset shape without simulating anything.
pub fn validate_data(cfg: &ExperimentConfig) -> Result<DataReport> {
    let prepared = prepare(cfg)?;
    let positives = prepared
        .report
        .users
        .values()
        .map(|u| u.positives)
        .sum::<usize>();
    Ok(DataReport {
        users: prepared.catalog.num_users(),
        items: prepared.catalog.num_items(),
        suppliers: prepared.catalog.num_suppliers(),
        topics: prepared.catalog.num_topics(),
        positive_interactions: positives,
        eligible_users: prepared.eligible_users.len(),
        excluded_users: prepared.report.excluded_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, SyntheticConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn desk_dataset(dir: &Path) {
        let cfg = SyntheticConfig {
            num_users: 60,
            num_items: 80,
            num_topics: 8,
            num_suppliers: 12,
            seed: 7,
        };
        let ds = synthetic::generate(&cfg).unwrap();
        synthetic::write_to_dir(&ds, dir).unwrap();
    }

    fn small_config(dir: &Path, out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetConfig {
                interactions: dir.join("interactions.csv"),
                suppliers: dir.join("suppliers.tsv"),
                genres: dir.join("genres.tsv"),
                provenance: Provenance::Synthetic,
                format: FormatSpec::default(),
                top_users: Some(40),
                top_items: Some(50),
                binarize: BinarizeRule::RatingEquals(5.0),
            },
            algorithms: vec![
                AlgorithmSpec {
                    kind: PolicyKind::LinUcb,
                    unbiased: false,
                    c: None,
                    reg: None,
                    clip_attraction: None,
                },
                AlgorithmSpec {
                    kind: PolicyKind::LinUcb,
                    unbiased: true,
                    c: None,
                    reg: None,
                    clip_attraction: None,
                },
            ],
            seeds: vec![1, 2],
            output_dir: out.to_path_buf(),
            n: 40,
            num_eval_users: 5,
            k: 3,
            svd_rank: 6,
            topic_scale: 1.0,
            c: 1.0,
            reg: 1.0,
            clip_attraction: true,
            split_ratio: 0.5,
            split_seed: 11,
            curve_interval: 10,
            shared_policy: false,
            ground_truth: GroundTruthConfig::default(),
        }
    }

    #[test]
    fn config_defaults_fill_missing_fields() {
        let json = r#"{
            "dataset": {
                "interactions": "x.csv",
                "suppliers": "s.tsv",
                "genres": "g.tsv",
                "provenance": "movielens-like",
                "binarize": {"rating_equals": 5.0}
            },
            "algorithms": [{"kind": "cascade-lsb"}],
            "seeds": [1],
            "output_dir": "out"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.n, 10_000);
        assert_eq!(cfg.num_eval_users, 100);
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.svd_rank, 10);
        assert_eq!(cfg.topic_scale, 1.0);
        assert_eq!(cfg.c, 1.0);
        assert_eq!(cfg.split_ratio, 0.5);
        assert_eq!(cfg.curve_interval, 100);
        assert!(!cfg.shared_policy);
        assert!(cfg.clip_attraction);
        let pc = cfg.algorithms[0].resolve(&cfg);
        assert_eq!(pc.c, 1.0);
        assert!(!pc.unbiased);
    }

    #[test]
    fn config_validation_catches_bad_grids() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path(), &dir.path().join("out"));
        cfg.algorithms.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(dir.path(), &dir.path().join("out"));
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(dir.path(), &dir.path().join("out"));
        cfg.c = -2.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn checkpoints_cover_the_final_step() {
        assert_eq!(checkpoints(2000, 100).len(), 20);
        assert_eq!(*checkpoints(2000, 100).last().unwrap(), 2000);
        assert_eq!(checkpoints(55, 10), vec![10, 20, 30, 40, 50, 55]);
        assert_eq!(checkpoints(5, 10), vec![5]);
    }

    #[test]
    fn zero_weight_user_never_clicks_or_regrets() {
        let bundle = crate::bandits::testsupport::toy_bundle();
        let gt = GroundTruthUser::from_weights(1, vec![0.0; bundle.num_items()], 3).unwrap();
        let pc = crate::bandits::testsupport::config(PolicyKind::LinUcb);
        let mut policy = build_policy(&pc, bundle).unwrap();
        let mut rng = seeding::stream(0, &[role::CLICKS, 0, 1]);
        let logs = run_user_simulation(&gt, policy.as_mut(), 25, 0, &mut rng).unwrap();
        assert!(logs.iter().all(|l| l.click_position.is_none()));
        assert!(logs.iter().all(|l| l.regret == 0.0));
    }

    #[test]
    fn cold_start_single_step_matches_tie_break() {
        let bundle = crate::bandits::testsupport::toy_bundle();
        let weights = vec![0.9, 0.1, 0.2, 0.3, 0.4, 0.5];
        let gt = GroundTruthUser::from_weights(1, weights.clone(), 3).unwrap();
        let mut pc = crate::bandits::testsupport::config(PolicyKind::LinUcb);
        pc.c = 0.0;
        let mut policy = build_policy(&pc, bundle).unwrap();
        let mut rng = seeding::stream(0, &[role::CLICKS, 0, 1]);
        let logs = run_user_simulation(&gt, policy.as_mut(), 1, 0, &mut rng).unwrap();
        assert_eq!(logs[0].list, vec![0, 1, 2]);
        let chosen = clickmodel::expected_reward(&logs[0].list, &weights).unwrap();
        assert_abs_diff_eq!(
            logs[0].regret,
            gt.optimal_reward() - chosen,
            epsilon = 1e-12
        );
    }

    #[test]
    fn realizable_user_regret_decays() {
        // Axis-aligned relevance features and a linear ground truth: the
        // learner should do clearly better late in the run than early.
        let topics: Vec<Vec<usize>> = (0..10).map(|i| vec![i % 4]).collect();
        let tp = TopicProfile::build(&topics, 4, 1.0).unwrap();
        let m = DMatrix::from_fn(12, 10, |i, j| {
            if i % 10 == j { (1 + (i + j) % 3) as f64 } else { 0.0 }
        });
        let rp = RelevanceProfile::from_train_matrix(&m, 10).unwrap();
        let bundle = Arc::new(FeatureBundle::new(tp, rp).unwrap());
        let mut weights = vec![0.0; 10];
        for (i, w) in weights.iter_mut().enumerate() {
            *w = 0.1 + 0.08 * (i as f64);
        }
        let gt = GroundTruthUser::from_weights(3, weights, 2).unwrap();
        let pc = PolicyConfig {
            kind: PolicyKind::LinUcb,
            c: 0.5,
            k: 2,
            unbiased: false,
            reg: 1.0,
            clip_attraction: true,
        };
        let mut policy = build_policy(&pc, bundle).unwrap();
        let mut rng = seeding::stream(5, &[role::CLICKS, 0, 3]);
        let logs = run_user_simulation(&gt, policy.as_mut(), 2000, 5, &mut rng).unwrap();
        let early: f64 = logs[..200].iter().map(|l| l.regret).sum();
        let late: f64 = logs[1800..].iter().map(|l| l.regret).sum();
        assert!(
            late < early,
            "no learning progress: early {early}, late {late}"
        );
    }

    #[test]
    fn experiment_grid_produces_rows_and_files() {
        let data_dir = tempfile::tempdir().unwrap();
        desk_dataset(data_dir.path());
        let out = data_dir.path().join("out");
        let cfg = small_config(data_dir.path(), &out);
        let summary = run_experiment(&cfg).unwrap();

        assert_eq!(summary.rows.len(), 4);
        for row in &summary.rows {
            for v in [
                row.item_coverage,
                row.supplier_coverage,
                row.user_item_coverage,
                row.gini,
            ] {
                assert!((0.0..=1.0).contains(&v), "metric out of range: {v}");
            }
            assert!(row.regret_final >= 0.0);
        }
        for res in &summary.results {
            assert_eq!(res.counts.total(), 5 * 40 * 3);
            for pair in res.regret_curve.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12);
            }
            for pair in res.ic_curve.windows(2) {
                assert!(pair[1] >= pair[0]);
            }
        }
        assert!(out.join("summary.csv").exists());
        assert!(out.join("split_report.json").exists());
        assert!(out.join("curves_cascade-linucb_c1_s1.csv").exists());
        assert!(out.join("exposure_cascade-linucb-unbiased_c1_s2.csv").exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        let data_dir = tempfile::tempdir().unwrap();
        desk_dataset(data_dir.path());
        let out_a = data_dir.path().join("a");
        let out_b = data_dir.path().join("b");
        let cfg_a = small_config(data_dir.path(), &out_a);
        let cfg_b = small_config(data_dir.path(), &out_b);
        run_experiment(&cfg_a).unwrap();
        run_experiment(&cfg_b).unwrap();
        let a = std::fs::read(out_a.join("summary.csv")).unwrap();
        let b = std::fs::read(out_b.join("summary.csv")).unwrap();
        assert_eq!(a, b);
        let a = std::fs::read(out_a.join("curves_cascade-linucb_c1_s1.csv")).unwrap();
        let b = std::fs::read(out_b.join("curves_cascade-linucb_c1_s1.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_sampling_requires_enough_users() {
        let data_dir = tempfile::tempdir().unwrap();
        desk_dataset(data_dir.path());
        let mut cfg = small_config(data_dir.path(), &data_dir.path().join("out"));
        cfg.num_eval_users = 10_000;
        assert!(matches!(
            run_experiment(&cfg),
            Err(Error::NotEnough { what: "eligible evaluation users", .. })
        ));
    }

    #[test]
    fn sweep_emits_per_c_variant_tuples() {
        let data_dir = tempfile::tempdir().unwrap();
        desk_dataset(data_dir.path());
        let out = data_dir.path().join("sweep");
        let mut cfg = small_config(data_dir.path(), &out);
        cfg.algorithms.truncate(1);
        cfg.n = 30;
        cfg.seeds = vec![1];
        let sweep = sweep_exploration(&cfg, &[0.5, 2.0]).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        assert_eq!(sweep.per_c.len(), 2);
        for (_, summary) in &sweep.per_c {
            // One kind, two variants, one seed.
            assert_eq!(summary.rows.len(), 2);
        }
        assert!(out.join("sweep.csv").exists());
        assert!(out.join("c0.5").join("summary.csv").exists());
        assert!(out.join("c2").join("summary.csv").exists());
    }

    #[test]
    fn validate_data_reports_pipeline_shape() {
        let data_dir = tempfile::tempdir().unwrap();
        desk_dataset(data_dir.path());
        let cfg = small_config(data_dir.path(), &data_dir.path().join("out"));
        let report = validate_data(&cfg).unwrap();
        assert_eq!(report.items, 50);
        assert!(report.users <= 40);
        assert!(report.eligible_users > 0);
        assert!(report.topics >= 2);
        assert!(report.suppliers >= 2);
    }

    #[test]
    fn config_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let json = r#"{
            "dataset": {
                "interactions": "data/x.csv",
                "suppliers": "/abs/s.tsv",
                "genres": "g.tsv",
                "provenance": "synthetic",
                "binarize": {"rating_equals": 5.0}
            },
            "algorithms": [{"kind": "cascade-lsb"}],
            "seeds": [1],
            "output_dir": "results"
        }"#;
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, json).unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.dataset.interactions, dir.path().join("data/x.csv"));
        assert_eq!(cfg.dataset.suppliers, PathBuf::from("/abs/s.tsv"));
        assert_eq!(cfg.output_dir, dir.path().join("results"));
    }
}
