//! Stage orchestration.
//!
//! `cluster → recode → estimate → select → solve → counterfactual`. Every
//! stage reads its inputs from earlier artifacts on disk, so any stage can be
//! rerun alone. A stage whose fingerprint (configuration slice, seed, input
//! hashes and upstream artifact hashes) matches the manifest and whose
//! artifacts are intact is skipped.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use searchrec_core::catalog::{compute_margins, normalize, NormalizationSpec, VehicleCatalog};
use searchrec_core::clickstream::{extract_status_quo_matrix, first_click_distribution, recode_to_clusters, StatusQuoMatrix};
use searchrec_core::clustering::{best_by_silhouette, sweep, ClusterModel, SweepConfig};
use searchrec_core::counterfactual::{
    bootstrap, normalize as normalize_run, run_scenarios, BootstrapConfig, Inputs, MatrixMode, ScenarioResult,
};
use searchrec_core::dpsolver::{bellman_solve, summarize_policy, DecisionModel, ScenarioModifiers};
use searchrec_core::policy::{dataset, evaluate, fit_policy, select_model, split_sessions, GridCell, Method};
use searchrec_core::rng;
use searchrec_core::{ConsumerPolicy, RecPolicy, Session, SimplexLattice};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::catalog::{load_catalog, write_normalized, ColumnMapping};
use crate::formats::clickstream::{load_raw_sessions, load_sessions, write_sessions};
use crate::formats::policy::{read_consumer_policy, write_consumer_policy, write_rec_policy};
use crate::formats::tables::{self, read_margins, Table};
use crate::formats::value::write_value_table;
use crate::formats::{read_json, write_bytes, write_json};
use crate::manifest::{hash_file, now_ms, sha256_hex, verify, Artifact, Failure, Manifest, StageRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Stage {
    Cluster,
    Recode,
    Estimate,
    Select,
    Solve,
    Counterfactual,
}

pub const STAGE_NAMES: [&str; 6] = ["cluster", "recode", "estimate", "select", "solve", "counterfactual"];

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Cluster, Stage::Recode, Stage::Estimate, Stage::Select, Stage::Solve, Stage::Counterfactual];

    pub fn name(self) -> &'static str {
        STAGE_NAMES[self as usize]
    }

    /// Subcommand that (re)creates this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Cluster => "cluster",
            Stage::Recode | Stage::Estimate | Stage::Select => "estimate",
            Stage::Solve => "solve",
            Stage::Counterfactual => "counterfactual",
        }
    }
}

/// Which stages to run.
#[derive(Clone, Copy, Debug)]
pub struct Plan {
    pub first: Stage,
    pub last: Stage,
    /// Rerun this stage and everything after it even if up to date.
    pub force_from: Option<Stage>,
}

impl Plan {
    pub fn all() -> Self {
        Plan { first: Stage::Cluster, last: Stage::Counterfactual, force_from: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusteringArtifact {
    pub chosen_k: usize,
    pub models: Vec<ClusterModel>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Selection {
    pub grid_index: usize,
    pub method: Method,
    pub k: usize,
    pub cell: GridCell,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub k: usize,
    pub horizon: usize,
    pub grid: u32,
    pub method: Method,
    /// Per-cluster margins, cluster `i + 1` at index `i`.
    pub margins: Vec<f64>,
    /// First-click distribution of the training sessions.
    pub initial: Vec<f64>,
    pub initial_value: f64,
    pub model_checksum: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterfactualArtifact {
    pub results: Vec<ScenarioResult>,
    pub replications_requested: usize,
    pub failures: Vec<(usize, String)>,
    pub checksum: u64,
    pub static_matrix: Option<Vec<Vec<f64>>>,
}

pub mod paths {
    pub const CLUSTERING: &str = "cluster/clustering.json";
    pub const SILHOUETTE: &str = "cluster/silhouette.csv";
    pub const NORMALIZED: &str = "cluster/normalized.csv";
    pub const GRID: &str = "estimate/grid.json";
    pub const SELECTION: &str = "select/selection.json";
    pub const FIT_GRID: &str = "select/fit_grid.csv";
    pub const STATUS_QUO_JSON: &str = "solve/status_quo.json";
    pub const STATUS_QUO: &str = "solve/status_quo.csv";
    pub const VALUE_TABLE: &str = "solve/value_table.bin";
    pub const FIRST_BEST_POLICY: &str = "solve/first_best_policy.json";
    pub const FIRST_BEST_MATRIX: &str = "solve/first_best_matrix.csv";
    pub const REC_DISTRIBUTION: &str = "solve/rec_distribution.csv";
    pub const CONCENTRATION: &str = "solve/concentration.csv";
    pub const SOLVE_SUMMARY: &str = "solve/summary.json";
    pub const SCENARIOS_JSON: &str = "counterfactual/scenarios.json";
    pub const SCENARIOS: &str = "counterfactual/scenarios.csv";
    pub const STATIC_MATRIX: &str = "counterfactual/static_matrix.csv";

    pub fn sessions(k: usize) -> String {
        format!("recode/k{k}/sessions.jsonl")
    }
    pub fn margins(k: usize) -> String {
        format!("recode/k{k}/margins.csv")
    }
    pub fn clusters(k: usize) -> String {
        format!("recode/k{k}/clusters.csv")
    }
    pub fn policy(k: usize, method: super::Method) -> String {
        format!("estimate/k{k}/{}.json", method.label())
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    root: &'a Path,
    seed: u64,
    dump_normalized: bool,
}

impl Ctx<'_> {
    fn at(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn catalog(&self) -> Result<VehicleCatalog> {
        let path = self.cfg.paths.catalog.as_deref().ok_or_else(|| Error::Validation("paths.catalog is not set".into()))?;
        let mapping = match &self.cfg.paths.mapping {
            Some(m) => read_json::<ColumnMapping>(m)?,
            None => ColumnMapping::default(),
        };
        load_catalog(path, &mapping)
    }

    fn write_table(&self, rel: &str, t: &Table) -> Result<()> {
        write_bytes(&self.at(rel), t.to_csv().as_bytes())
    }

    fn clustering(&self) -> Result<ClusteringArtifact> {
        read_json(&self.at(paths::CLUSTERING))
    }

    fn k_candidates(&self, clustering: &ClusteringArtifact) -> Vec<usize> {
        let ks = &self.cfg.estimation.k_candidates;
        if ks.is_empty() {
            vec![clustering.chosen_k]
        } else {
            ks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
        }
    }

    fn selection(&self) -> Result<Selection> {
        read_json(&self.at(paths::SELECTION))
    }

    /// Training sessions of the estimation split.
    fn training_sessions(&self, k: usize) -> Result<Vec<Session>> {
        let sessions = load_sessions(&self.at(&paths::sessions(k)), Some(k))?;
        let (train, _) = split_sessions(sessions.len(), self.cfg.estimation.holdout, self.seed).map_err(|e| Error::stage("estimate", e))?;
        Ok(train.into_iter().map(|i| sessions[i].clone()).collect())
    }
}

fn input_artifact(path: &Path) -> Result<Artifact> {
    let bytes = std::fs::read(path).map_err(|e| Error::input(path, e))?;
    Ok(Artifact { path: path.display().to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

fn config_slice(stage: Stage, cfg: &RunConfig) -> serde_json::Value {
    match stage {
        Stage::Cluster => json!({ "catalog": cfg.catalog, "clustering": cfg.clustering }),
        Stage::Recode => json!({ "catalog": cfg.catalog, "k_candidates": cfg.estimation.k_candidates }),
        Stage::Estimate => json!({ "estimation": cfg.estimation, "horizon": cfg.dp.horizon }),
        Stage::Select => json!({}),
        Stage::Solve => json!({ "dp": cfg.dp }),
        Stage::Counterfactual => json!({ "counterfactual": cfg.counterfactual, "estimation": cfg.estimation, "dp": cfg.dp }),
    }
}

fn fingerprint(stage: Stage, ctx: &Ctx<'_>, inputs: &[Artifact], upstream: &[StageRecord]) -> String {
    let input_hashes: Vec<&str> = inputs.iter().map(|a| a.sha256.as_str()).collect();
    // the optional audit dump does not feed later stages
    let up: Vec<(&str, Vec<&str>)> = upstream
        .iter()
        .map(|s| (s.name.as_str(), s.artifacts.iter().filter(|a| a.path != paths::NORMALIZED).map(|a| a.sha256.as_str()).collect()))
        .collect();
    let v = json!({
        "stage": stage.name(),
        "config": config_slice(stage, ctx.cfg),
        "seed": ctx.seed,
        "inputs": input_hashes,
        "upstream": up,
    });
    sha256_hex(v.to_string().as_bytes())
}

/// Runs `plan` against the output root, updating (or creating) its manifest.
pub fn run(cfg: &RunConfig, root: &Path, seed: u64, plan: Plan, dump_normalized: bool) -> Result<Manifest> {
    cfg.validate()?;
    if plan.first > plan.last {
        return Err(Error::Validation("empty stage range".into()));
    }
    let previous = Manifest::load_if_present(root)?;
    let mut manifest = Manifest::new(cfg.clone(), seed);
    let ctx = Ctx { cfg, root, seed, dump_normalized };

    let mut catalog_inputs = Vec::new();
    if let Some(p) = &cfg.paths.catalog {
        catalog_inputs.push(input_artifact(p)?);
        if let Some(m) = &cfg.paths.mapping {
            catalog_inputs.push(input_artifact(m)?);
        }
    }
    let mut all_inputs = catalog_inputs.clone();
    if let Some(p) = &cfg.paths.clickstream {
        all_inputs.push(input_artifact(p)?);
    }
    manifest.inputs = all_inputs.clone();

    for stage in Stage::ALL.into_iter().filter(|s| *s <= plan.last) {
        let stage_inputs: &[Artifact] = match stage {
            Stage::Cluster => &catalog_inputs,
            Stage::Recode => &all_inputs,
            _ => &[],
        };
        let fp = fingerprint(stage, &ctx, stage_inputs, &manifest.stages);
        let recorded = previous.as_ref().and_then(|p| p.stage(stage.name()));
        let dump_missing = |r: &StageRecord| stage == Stage::Cluster && dump_normalized && !r.artifacts.iter().any(|a| a.path == paths::NORMALIZED);
        let up_to_date = recorded.is_some_and(|r| r.fingerprint == fp && verify(root, &r.artifacts));

        if stage < plan.first {
            match recorded {
                Some(r) if up_to_date => manifest.put_stage(r.clone(), &STAGE_NAMES),
                Some(_) => {
                    return Err(Error::Validation(format!(
                        "artifacts of stage `{}` are stale or modified for this configuration; rerun `searchrec {}`",
                        stage.name(),
                        stage.command()
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "stage `{}` has not been run in {}; run `searchrec {}` first",
                        stage.name(),
                        root.display(),
                        stage.command()
                    )))
                }
            }
            continue;
        }

        let forced = plan.force_from.is_some_and(|f| stage >= f);
        if up_to_date && !forced && !recorded.is_some_and(dump_missing) {
            let mut r = recorded.expect("checked").clone();
            r.skipped = true;
            eprintln!("[{}] up to date, skipped", stage.name());
            manifest.put_stage(r, &STAGE_NAMES);
            manifest.save(root)?;
            continue;
        }

        eprintln!("[{}] running", stage.name());
        let started = now_ms();
        let outcome = match stage {
            Stage::Cluster => run_cluster(&ctx),
            Stage::Recode => run_recode(&ctx),
            Stage::Estimate => run_estimate(&ctx),
            Stage::Select => run_select(&ctx),
            Stage::Solve => run_solve(&ctx),
            Stage::Counterfactual => run_counterfactual(&ctx),
        };
        let written = match outcome {
            Ok(w) => w,
            Err(e) => {
                let e = match e {
                    Error::Validation(m) => Error::Validation(m),
                    Error::Input { .. } => e,
                    Error::Stage { cause, .. } => Error::Stage { stage: stage.name(), cause },
                    Error::Io { .. } => Error::stage(stage.name(), e),
                };
                // later records stay listed; their fingerprints no longer match
                if let Some(prev) = &previous {
                    for r in prev.stages.iter().filter(|r| STAGE_NAMES.iter().position(|n| *n == r.name) > Some(stage as usize)) {
                        manifest.put_stage(r.clone(), &STAGE_NAMES);
                    }
                }
                manifest.failure = Some(Failure { stage: stage.name().into(), cause: e.to_string() });
                manifest.save(root)?;
                return Err(e);
            }
        };
        let artifacts = written.iter().map(|rel| hash_file(root, rel)).collect::<Result<Vec<_>>>()?;
        let record =
            StageRecord { name: stage.name().into(), fingerprint: fp, started_unix_ms: started, finished_unix_ms: now_ms(), skipped: false, artifacts };
        manifest.put_stage(record, &STAGE_NAMES);
        manifest.save(root)?;
    }
    // records of later stages survive when this run stopped early
    if let Some(prev) = &previous {
        for r in &prev.stages {
            if manifest.stage(&r.name).is_none() {
                manifest.put_stage(r.clone(), &STAGE_NAMES);
            }
        }
    }
    manifest.save(root)?;
    Ok(manifest)
}

fn run_cluster(ctx: &Ctx<'_>) -> Result<Vec<String>> {
    let cfg = ctx.cfg;
    let catalog = ctx.catalog()?;
    let spec = NormalizationSpec { weighting: cfg.catalog.weighting, ..NormalizationSpec::default() };
    let normalized = normalize(&catalog, &spec, cfg.catalog.margin_rate).map_err(|e| Error::stage("cluster", e))?;
    let points: Vec<Vec<f64>> = normalized.iter().map(|v| v.feature_vector.clone()).collect();
    let ids: Vec<String> = normalized.iter().map(|v| v.vehicle_id.clone()).collect();
    let sweep_cfg = SweepConfig {
        k_min: cfg.clustering.k_min,
        k_max: cfg.clustering.k_max,
        max_iter: cfg.clustering.max_iter,
        ward_max_points: cfg.clustering.ward_max_points,
        ..SweepConfig::default()
    };
    let models = sweep(&points, &ids, &sweep_cfg, ctx.seed).map_err(|e| Error::stage("cluster", e))?;
    let chosen_k = best_by_silhouette(&models).expect("nonempty sweep").k;
    let mut written = vec![paths::CLUSTERING.to_string(), paths::SILHOUETTE.to_string()];
    ctx.write_table(paths::SILHOUETTE, &tables::silhouette_table(&models, chosen_k))?;
    write_json(&ctx.at(paths::CLUSTERING), &ClusteringArtifact { chosen_k, models })?;
    if ctx.dump_normalized {
        write_normalized(&ctx.at(paths::NORMALIZED), &normalized)?;
        written.push(paths::NORMALIZED.into());
    }
    eprintln!("[cluster] {} vehicles, silhouette-best K = {chosen_k}", ids.len());
    Ok(written)
}

fn run_recode(ctx: &Ctx<'_>) -> Result<Vec<String>> {
    let cfg = ctx.cfg;
    let clustering = ctx.clustering()?;
    let catalog = ctx.catalog()?;
    let clicks = cfg.paths.clickstream.as_deref().ok_or_else(|| Error::Validation("paths.clickstream is not set".into()))?;
    let raw = load_raw_sessions(clicks)?;
    let margins = compute_margins(&catalog, cfg.catalog.margin_rate, cfg.catalog.trim).map_err(|e| Error::stage("recode", e))?;
    let mut written = Vec::new();
    for k in ctx.k_candidates(&clustering) {
        let model = clustering
            .models
            .iter()
            .find(|m| m.k == k)
            .ok_or_else(|| Error::Validation(format!("no clustering for K = {k}; widen clustering.k_min..k_max")))?;
        if model.vehicle_ids.iter().map(String::as_str).ne(catalog.ids()) {
            return Err(Error::stage("recode", "catalog changed since clustering; rerun `searchrec cluster`"));
        }
        let sessions = recode_to_clusters(&raw, model).map_err(|e| Error::stage("recode", e))?;
        let cm = margins.cluster_margins(&model.assignments, k);
        write_sessions(&ctx.at(&paths::sessions(k)), &sessions)?;
        ctx.write_table(&paths::margins(k), &tables::margins_table(&cm))?;
        ctx.write_table(&paths::clusters(k), &tables::cluster_sizes_table(model, &cm))?;
        written.extend([paths::sessions(k), paths::margins(k), paths::clusters(k)]);
        eprintln!("[recode] K = {k}: {} sessions", sessions.len());
    }
    Ok(written)
}

fn run_estimate(ctx: &Ctx<'_>) -> Result<Vec<String>> {
    let cfg = ctx.cfg;
    let est = &cfg.estimation;
    let horizon = cfg.dp.horizon;
    let clustering = ctx.clustering()?;
    let mut grid = Vec::new();
    let mut written = Vec::new();
    for k in ctx.k_candidates(&clustering) {
        let silhouette = clustering.models.iter().find(|m| m.k == k).map_or(f64::NAN, |m| m.silhouette);
        let sessions = load_sessions(&ctx.at(&paths::sessions(k)), Some(k))?;
        let data = dataset(&sessions, k, horizon).map_err(|e| Error::stage("estimate", e))?;
        let (train_idx, _) = split_sessions(sessions.len(), est.holdout, ctx.seed).map_err(|e| Error::stage("estimate", e))?;
        let mut in_train = vec![false; sessions.len()];
        train_idx.iter().for_each(|&i| in_train[i] = true);
        let train = data.subset(|s| in_train[s]);
        let hold = data.subset(|s| !in_train[s]);
        if train.is_empty() || hold.is_empty() {
            return Err(Error::stage("estimate", format!("K = {k}: the split leaves an empty training or holdout set")));
        }
        for &method in &est.methods {
            let policy = fit_policy(&train, k, horizon, method, &est.hyper, ctx.seed).map_err(|e| Error::stage("estimate", e))?;
            for w in &policy.meta.warnings {
                eprintln!("[estimate] {} K = {k}: {w}", method.label());
            }
            let report = evaluate(|x, out| policy.predict_features(x, out), &hold);
            eprintln!("[estimate] {} K = {k}: lift {:.3}, log-loss {:.4}", method.label(), report.lift, report.log_loss);
            write_consumer_policy(&ctx.at(&paths::policy(k, method)), &policy)?;
            written.push(paths::policy(k, method));
            grid.push(GridCell { method, k, report, silhouette });
        }
    }
    write_json(&ctx.at(paths::GRID), &grid)?;
    written.push(paths::GRID.into());
    Ok(written)
}

fn run_select(ctx: &Ctx<'_>) -> Result<Vec<String>> {
    let grid: Vec<GridCell> = read_json(&ctx.at(paths::GRID))?;
    let i = select_model(&grid).ok_or_else(|| Error::stage("select", "empty fit grid"))?;
    let cell = grid[i].clone();
    eprintln!("[select] {} with K = {}", cell.method.label(), cell.k);
    write_json(&ctx.at(paths::SELECTION), &Selection { grid_index: i, method: cell.method, k: cell.k, cell })?;
    ctx.write_table(paths::FIT_GRID, &tables::fit_grid_table(&grid, Some(i)))?;
    Ok(vec![paths::SELECTION.into(), paths::FIT_GRID.into()])
}

fn selected_model(ctx: &Ctx<'_>, sel: &Selection, stage: &'static str) -> Result<(ConsumerPolicy, SimplexLattice, DecisionModel)> {
    let policy = read_consumer_policy(&ctx.at(&paths::policy(sel.k, sel.method)))?;
    let lattice = SimplexLattice::new(sel.k, ctx.cfg.dp.grid);
    let model = DecisionModel::build(&policy, &lattice, ctx.cfg.dp.horizon).map_err(|e| Error::stage(stage, e))?;
    Ok((policy, lattice, model))
}

fn run_solve(ctx: &Ctx<'_>) -> Result<Vec<String>> {
    let sel = ctx.selection()?;
    let k = sel.k;
    let margins = read_margins(&ctx.at(&paths::margins(k)))?;
    let sessions = load_sessions(&ctx.at(&paths::sessions(k)), Some(k))?;
    let sq = extract_status_quo_matrix(&sessions, k);
    if !sq.flagged.is_empty() {
        let rows: Vec<String> = sq.flagged.iter().map(|r| (r + 1).to_string()).collect();
        eprintln!("[solve] status-quo rows without recommendations (set uniform): {}", rows.join(", "));
    }
    let initial = first_click_distribution(&ctx.training_sessions(k)?, k);
    let (_, _, model) = selected_model(ctx, &sel, "solve")?;
    let table = bellman_solve(&model, &margins, &ScenarioModifiers::default()).map_err(|e| Error::stage("solve", e))?;
    let summary = summarize_policy(&model, &table);
    let initial_value = table.initial_value(&initial);
    eprintln!("[solve] K = {k}, T = {}, G = {}: V1 = {initial_value:.4}", ctx.cfg.dp.horizon, ctx.cfg.dp.grid);

    write_json(&ctx.at(paths::STATUS_QUO_JSON), &sq)?;
    ctx.write_table(paths::STATUS_QUO, &tables::matrix_table("status_quo", "Status-quo recommendation matrix", &sq.rows))?;
    write_value_table(&ctx.at(paths::VALUE_TABLE), &table)?;
    write_rec_policy(&ctx.at(paths::FIRST_BEST_POLICY), &table.policy())?;
    ctx.write_table(
        paths::FIRST_BEST_MATRIX,
        &tables::matrix_table("first_best_matrix", "First-best recommendation shares by viewed cluster", &summary.matrix),
    )?;
    ctx.write_table(paths::REC_DISTRIBUTION, &tables::per_period_table(&summary.per_period))?;
    ctx.write_table(paths::CONCENTRATION, &tables::concentration_table(&summary.concentration))?;
    let s = SolveSummary {
        k,
        horizon: ctx.cfg.dp.horizon,
        grid: ctx.cfg.dp.grid,
        method: sel.method,
        margins,
        initial,
        initial_value,
        model_checksum: model.checksum(),
    };
    write_json(&ctx.at(paths::SOLVE_SUMMARY), &s)?;
    Ok([
        paths::STATUS_QUO_JSON,
        paths::STATUS_QUO,
        paths::VALUE_TABLE,
        paths::FIRST_BEST_POLICY,
        paths::FIRST_BEST_MATRIX,
        paths::REC_DISTRIBUTION,
        paths::CONCENTRATION,
        paths::SOLVE_SUMMARY,
    ]
    .map(String::from)
    .to_vec())
}

fn run_counterfactual(ctx: &Ctx<'_>) -> Result<Vec<String>> {
    let cfg = ctx.cfg;
    let cf = &cfg.counterfactual;
    let sel = ctx.selection()?;
    let k = sel.k;
    let summary: SolveSummary = read_json(&ctx.at(paths::SOLVE_SUMMARY))?;
    let sq: StatusQuoMatrix = read_json(&ctx.at(paths::STATUS_QUO_JSON))?;
    let (_, lattice, model) = selected_model(ctx, &sel, "counterfactual")?;
    let inputs = Inputs { model: &model, margins: &summary.margins, initial: &summary.initial, status_quo: &sq.rows };
    let run = run_scenarios(&inputs, &cf.scenarios, &cf.planner, MatrixMode::Optimize).map_err(|e| Error::stage("counterfactual", e))?;
    let checksum = run.outcomes[0].checksum;

    let (results, failures) = if cf.bootstrap >= 2 {
        let train = ctx.training_sessions(k)?;
        let horizon = cfg.dp.horizon;
        let est = &cfg.estimation;
        let build = |sample: &[Session], b: usize| -> std::result::Result<(DecisionModel, Vec<f64>), String> {
            let data = dataset(sample, k, horizon).map_err(|e| e.to_string())?;
            let seed = rng::derive_seed(ctx.seed, b as u64);
            let policy = fit_policy(&data, k, horizon, sel.method, &est.hyper, seed).map_err(|e| e.to_string())?;
            let model = DecisionModel::build(&policy, &lattice, horizon).map_err(|e| e.to_string())?;
            Ok((model, first_click_distribution(sample, k)))
        };
        let boot = BootstrapConfig { replications: cf.bootstrap, seed: ctx.seed, reuse_stream: false };
        let out = bootstrap(&train, &run, &build, &summary.margins, &sq.rows, &cf.planner, &boot)
            .map_err(|e| Error::stage("counterfactual", e))?;
        for (b, e) in &out.failures {
            eprintln!("[counterfactual] replication {b} failed: {e}");
        }
        (out.results, out.failures)
    } else {
        (normalize_run(&run), Vec::new())
    };
    for r in &results {
        eprintln!("[counterfactual] {:<24} {:>8.2}", r.scenario.name(), r.expected_profit);
    }
    let static_matrix = match &run.static_opt {
        Some(RecPolicy::StaticMatrix { rows }) => Some(rows.clone()),
        _ => None,
    };
    let mut written = vec![paths::SCENARIOS_JSON.to_string(), paths::SCENARIOS.to_string()];
    ctx.write_table(paths::SCENARIOS, &tables::scenario_table(&results))?;
    if let Some(rows) = &static_matrix {
        ctx.write_table(paths::STATIC_MATRIX, &tables::matrix_table("static_matrix", "Optimised static recommendation matrix", rows))?;
        written.push(paths::STATIC_MATRIX.into());
    }
    let art = CounterfactualArtifact { results, replications_requested: cf.bootstrap, failures, checksum, static_matrix };
    write_json(&ctx.at(paths::SCENARIOS_JSON), &art)?;
    Ok(written)
}

/// Stage records present in `manifest` whose artifacts are intact.
pub fn completed(root: &Path, manifest: &Manifest) -> Vec<Stage> {
    Stage::ALL.into_iter().filter(|s| manifest.stage(s.name()).is_some_and(|r| verify(root, &r.artifacts))).collect()
}
