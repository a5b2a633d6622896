//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use searchrec_core::counterfactual::Scenario;
use searchrec_core::policy::Method;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::pipeline::{self, Plan, Stage};
use crate::synth::{self, GenerateOptions};
use crate::{debug, report};

/// Output root when neither `--out`, `SEARCHREC_OUT` nor the config sets one.
pub const OUT_ENV: &str = "SEARCHREC_OUT";

#[derive(Debug, Parser)]
#[command(name = "searchrec", version, about = "Search-aware cold-start recommendation pipeline")]
pub struct Cli {
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root (overrides the config).
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic catalog, clickstream, ground truth and config.
    Generate(GenerateArgs),
    /// Normalise the catalog and cluster it for every K in range.
    Cluster(StageArgs),
    /// Recode sessions to clusters, fit the consumer policies and select one.
    Estimate(StageArgs),
    /// Solve the first-best recommendation problem.
    Solve(StageArgs),
    /// Evaluate the recommendation regimes, with bootstrap if requested.
    Counterfactual(StageArgs),
    /// Render the tables of a run as text and CSV.
    Report,
    /// Run every stage, skipping those already up to date.
    Pipeline(PipelineArgs),
    /// Diagnostics.
    #[command(subcommand)]
    Debug(DebugCommand),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub sessions: usize,
    #[arg(long, default_value_t = searchrec_core::DEFAULT_HORIZON)]
    pub horizon: usize,
    /// Number of vehicle segments (2..=8).
    #[arg(long, default_value_t = 4)]
    pub segments: usize,
    /// Catalog size; the reference composition when omitted.
    #[arg(long)]
    pub vehicles: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub spread: f64,
    /// Directory for the generated files; `<out>/input` by default.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub clickstream: Option<PathBuf>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Comma-separated numbers of clusters to estimate on.
    #[arg(long, value_delimiter = ',')]
    pub k_candidates: Option<Vec<usize>>,
    /// Comma-separated estimators: logit, forest, boost.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub grid: Option<u32>,
    /// `all` or a comma-separated list of scenario names.
    #[arg(long, value_parser = parse_scenarios)]
    pub scenarios: Option<ScenarioList>,
    /// Bootstrap replications (0 disables).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Also write the normalised feature matrix during clustering.
    #[arg(long)]
    pub dump_normalized: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioList(pub Vec<Scenario>);

fn parse_scenarios(s: &str) -> std::result::Result<ScenarioList, String> {
    Scenario::parse_list(s).map(ScenarioList)
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Rerun this stage and every later one even if up to date.
    #[arg(long, value_enum)]
    pub from: Option<Stage>,
}

#[derive(Debug, Subcommand)]
pub enum DebugCommand {
    /// Dump every lattice state reachable under some recommendation sequence.
    ReachableStates {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        grid: u32,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                dst.clone_from(src);
            }
        };
        set(&mut cfg.paths.catalog, &self.catalog);
        set(&mut cfg.paths.mapping, &self.mapping);
        set(&mut cfg.paths.clickstream, &self.clickstream);
        if let Some(v) = self.k_min {
            cfg.clustering.k_min = v;
        }
        if let Some(v) = self.k_max {
            cfg.clustering.k_max = v;
        }
        if let Some(v) = &self.k_candidates {
            cfg.estimation.k_candidates.clone_from(v);
        }
        if let Some(v) = &self.methods {
            cfg.estimation.methods.clone_from(v);
        }
        if let Some(v) = self.holdout {
            cfg.estimation.holdout = v;
        }
        if let Some(v) = self.horizon {
            cfg.dp.horizon = v;
        }
        if let Some(v) = self.grid {
            cfg.dp.grid = v;
        }
        if let Some(v) = &self.scenarios {
            cfg.counterfactual.scenarios.clone_from(&v.0);
        }
        if let Some(v) = self.bootstrap {
            cfg.counterfactual.bootstrap = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
    }
}

fn output_root(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.paths.outputs.clone())).unwrap_or_else(|| PathBuf::from("searchrec-out"))
}

/// Base configuration: `--config`, else the effective config of an existing
/// run in the output root, else the defaults.
fn base_config(cli: &Cli) -> Result<(RunConfig, PathBuf, Option<Manifest>)> {
    let file = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let root = output_root(cli, file.as_ref());
    let previous = Manifest::load_if_present(&root)?;
    let cfg = match (file, &previous) {
        (Some(c), _) => c,
        (None, Some(m)) => m.config.clone(),
        (None, None) => RunConfig::default(),
    };
    Ok((cfg, root, previous))
}

fn run_stages(cli: &Cli, overrides: &Overrides, plan: Plan, seed_required: bool) -> Result<()> {
    let (mut cfg, root, previous) = base_config(cli)?;
    overrides.apply(&mut cfg);
    cfg.paths.outputs = Some(root.clone());
    let seed = match (overrides.seed, cfg.seed, &previous) {
        (Some(s), _, _) => s,
        _ if seed_required => return Err(Error::Validation("--seed is required".into())),
        (None, Some(s), _) => s,
        (None, None, Some(m)) => m.seed,
        (None, None, None) => return Err(Error::Validation("no seed: pass --seed or set `seed` in the config".into())),
    };
    cfg.seed = Some(seed);
    let m = pipeline::run(&cfg, &root, seed, plan, overrides.dump_normalized)?;
    let ran = m.stages.iter().filter(|s| !s.skipped).count();
    eprintln!("manifest: {} ({} stage(s) recorded, {ran} not skipped)", Manifest::path(&root).display(), m.stages.len());
    Ok(())
}

fn single(stage_first: Stage, stage_last: Stage) -> Plan {
    // an explicit stage command always recomputes its own stages
    Plan { first: stage_first, last: stage_last, force_from: Some(stage_first) }
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => {
            let dir = a.dir.clone().unwrap_or_else(|| output_root(&cli, None).join("input"));
            let opts = GenerateOptions {
                seed: a.seed,
                sessions: a.sessions,
                horizon: a.horizon,
                segments: a.segments,
                vehicles: a.vehicles,
                spread: a.spread,
            };
            let g = synth::generate(&opts, &dir)?;
            println!("catalog      {}", g.catalog.display());
            println!("mapping      {}", g.mapping.display());
            println!("clickstream  {}", g.clickstream.display());
            println!("segments     {}", g.segment_sessions.display());
            println!("truth        {}", g.truth.display());
            println!("config       {}", g.config.display());
            Ok(())
        }
        Command::Cluster(a) => run_stages(&cli, &a.overrides, single(Stage::Cluster, Stage::Cluster), false),
        Command::Estimate(a) => run_stages(&cli, &a.overrides, single(Stage::Recode, Stage::Select), false),
        Command::Solve(a) => run_stages(&cli, &a.overrides, single(Stage::Solve, Stage::Solve), false),
        Command::Counterfactual(a) => run_stages(&cli, &a.overrides, single(Stage::Counterfactual, Stage::Counterfactual), false),
        Command::Pipeline(a) => run_stages(&cli, &a.overrides, Plan { force_from: a.from, ..Plan::all() }, true),
        Command::Report => {
            let (_, root, _) = base_config(&cli)?;
            let r = report::write(&root)?;
            print!("{}", r.text);
            Ok(())
        }
        Command::Debug(DebugCommand::ReachableStates { k, horizon, grid, output }) => {
            if *k == 0 || *horizon == 0 || *grid == 0 {
                return Err(Error::Validation("k, horizon and grid must be positive".into()));
            }
            let csv = debug::reachable_csv(*k, *horizon, *grid);
            match output {
                Some(p) => crate::formats::write_bytes(Path::new(p), csv.as_bytes()),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}
