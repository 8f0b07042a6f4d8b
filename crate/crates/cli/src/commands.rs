//! Batch subcommands: simulate, fit, compare, report and replay.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use boxlab::agents::{run_llm_ps_episode, run_react_episode, run_soc_episode, EpisodeOutput, LlmParams, LlmVariant, SocParams};
use boxlab::config::ExperimentConfig;
use boxlab::env::{EnvConfig, Layout, Observability, ReliabilityMode};
use boxlab::fitting::{fit_cohort, summarize, CohortSummary, FitResult, ParamGrid, SimulationSettings, TableSet, PGEN_GRID, RHO_GRID};
use boxlab::llm_backend::{mock_from_script, BackendConfig, CompletionBackend, HttpBackend};
use boxlab::proposal::{SocVariant, Theta};
use boxlab::stats;
use boxlab::trajectory::{read_csv, write_csv, IngestError};
use boxlab::{derive_seed, Trajectory};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::transport::ReqwestTransport;

/// An error that exits with status 2, like a clap usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Soc(SocVariant),
    Llm(LlmVariant),
    React,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Soc(v) => v.name(),
            AgentKind::Llm(v) => v.name(),
            AgentKind::React => "react",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(v) = s.parse::<SocVariant>() {
            return Ok(AgentKind::Soc(v));
        }
        if let Ok(v) = s.parse::<LlmVariant>() {
            return Ok(AgentKind::Llm(v));
        }
        if s.eq_ignore_ascii_case("react") {
            return Ok(AgentKind::React);
        }
        Err(format!(
            "unknown variant `{s}` (expected soc-l, soc-rel, soc-gen, soc-full, llm-ps, llm-ps-s, llm-ps-p or react)"
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Mock(PathBuf),
    Http(PathBuf),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("mock", p)) if !p.is_empty() => Ok(BackendSpec::Mock(p.into())),
            Some(("http", p)) if !p.is_empty() => Ok(BackendSpec::Http(p.into())),
            _ => Err(format!("backend `{s}` must be mock:SCRIPT or http:CONFIG.toml")),
        }
    }
}

impl BackendSpec {
    /// A fresh backend; mock scripts restart from their first response.
    pub fn open(&self) -> Result<Box<dyn CompletionBackend>> {
        match self {
            BackendSpec::Mock(path) => Ok(Box::new(mock_from_script(path)?)),
            BackendSpec::Http(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let config: BackendConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                Ok(Box::new(HttpBackend::new(config, ReqwestTransport::new()?)?))
            }
        }
    }
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `alpha,beta`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("alpha: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("beta: {e}"))?;
    if !(a > 0.0 && b > 0.0) {
        return Err("alpha and beta must be positive".into());
    }
    Ok((a, b))
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// soc-l, soc-rel, soc-gen, soc-full, llm-ps, llm-ps-s, llm-ps-p or react.
    #[arg(long)]
    pub variant: AgentKind,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Base seed. Defaults to `env.rng_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact environment seed for a single run, instead of one derived from
    /// `--seed`.
    #[arg(long)]
    pub env_seed: Option<u64>,
    /// Exact agent seed for a single run.
    #[arg(long)]
    pub agent_seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Beta prior on key reliability, as `alpha,beta`.
    #[arg(long, value_parser = parse_pair)]
    pub rho_prior: Option<(f64, f64)>,
    #[arg(long)]
    pub p_gen: Option<f64>,
    /// Particles per agent. Defaults to the config value for SoC agents and
    /// to 1 for LLM agents.
    #[arg(long)]
    pub n_particles: Option<usize>,
    /// `mock:SCRIPT` or `http:CONFIG.toml`. Required by LLM and ReAct agents.
    #[arg(long)]
    pub backend: Option<BackendSpec>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub variant: String,
    pub runs: usize,
    pub seed: u64,
    pub completed: usize,
    pub completion_rate: f64,
    pub aborted: usize,
    pub mean_trials: f64,
    pub mean_attempts: f64,
    pub mean_observes: f64,
    /// Number of runs by attempt count.
    pub attempt_histogram: BTreeMap<usize, usize>,
    /// Number of runs by final rule.
    pub final_rules: BTreeMap<String, usize>,
    /// Among completed runs, the fraction ending on the number rule.
    pub number_rule_among_completed: Option<f64>,
}

impl SimulationSummary {
    pub fn from_runs(variant: &str, seed: u64, runs: &[EpisodeOutput]) -> Self {
        let trajs: Vec<&Trajectory> = runs.iter().map(|r| &r.trajectory).collect();
        let n = trajs.len();
        let completed: Vec<&&Trajectory> = trajs.iter().filter(|t| t.metadata.completed).collect();
        let attempts: Vec<usize> = trajs.iter().map(|t| t.n_attempts()).collect();
        let attempt_histogram = stats::histogram(attempts.iter().copied())
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .collect();
        let mut final_rules = BTreeMap::new();
        for t in &trajs {
            let label = t.final_rule.map_or("none", |r| r.label());
            *final_rules.entry(label.to_string()).or_insert(0) += 1;
        }
        let number = completed.iter().filter(|t| t.final_rule.is_some_and(|r| r.is_number())).count();
        let as_f64 = |xs: Vec<usize>| stats::mean(&xs.into_iter().map(|x| x as f64).collect::<Vec<_>>());
        SimulationSummary {
            variant: variant.to_string(),
            runs: n,
            seed,
            completed: completed.len(),
            completion_rate: if n == 0 { 0.0 } else { completed.len() as f64 / n as f64 },
            aborted: trajs.iter().filter(|t| t.metadata.aborted).count(),
            mean_trials: as_f64(trajs.iter().map(|t| t.len()).collect()),
            mean_attempts: as_f64(attempts),
            mean_observes: as_f64(trajs.iter().map(|t| t.n_observes()).collect()),
            attempt_histogram,
            final_rules,
            number_rule_among_completed: (!completed.is_empty()).then(|| number as f64 / completed.len() as f64),
        }
    }
}

impl fmt::Display for SimulationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant {}  runs {}  seed {}", self.variant, self.runs, self.seed)?;
        writeln!(f, "completed {}/{} ({:.1}%)", self.completed, self.runs, 100.0 * self.completion_rate)?;
        if self.aborted > 0 {
            writeln!(f, "aborted {}", self.aborted)?;
        }
        writeln!(
            f,
            "mean trials {:.2}  attempts {:.2}  observes {:.2}",
            self.mean_trials, self.mean_attempts, self.mean_observes
        )?;
        writeln!(f, "attempts  runs")?;
        for (a, c) in &self.attempt_histogram {
            writeln!(f, "{a:>8}  {c}")?;
        }
        writeln!(f, "final rule  runs")?;
        for (r, c) in &self.final_rules {
            writeln!(f, "{r:>10}  {c}")?;
        }
        if let Some(x) = self.number_rule_among_completed {
            writeln!(f, "number rule among completed runs: {:.1}%", 100.0 * x)?;
        }
        Ok(())
    }
}

pub struct Simulation {
    pub runs: Vec<EpisodeOutput>,
    pub summary: SimulationSummary,
    pub layout: Layout,
}

/// The SoC parameters used when none are given: a mid-grid setting.
pub fn default_theta(p_t: f64) -> Theta {
    Theta { rho_prior: Some(RHO_GRID[RHO_GRID.len() / 2]), p_gen: PGEN_GRID[PGEN_GRID.len() / 2], p_t }
}

pub fn simulate(args: &SimulateArgs) -> Result<Simulation> {
    let config = load_config(args.config.as_deref())?;
    let layout = Arc::new(config.layout());
    let seed = args.seed.unwrap_or(config.env.rng_seed);
    let needs_backend = !matches!(args.variant, AgentKind::Soc(_));
    if needs_backend && args.backend.is_none() {
        return Err(usage(format!("variant {} needs --backend mock:SCRIPT or http:CONFIG.toml", args.variant)));
    }
    if args.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    if args.runs > 1 && (args.env_seed.is_some() || args.agent_seed.is_some()) {
        return Err(usage("--env-seed and --agent-seed need --runs 1"));
    }
    let mut runs = Vec::with_capacity(args.runs);
    for i in 0..args.runs {
        let env_seed = args.env_seed.unwrap_or_else(|| derive_seed(seed, &[i as u64, 0]));
        let agent_seed = args.agent_seed.unwrap_or_else(|| derive_seed(seed, &[i as u64, 1]));
        let mut rng = ChaCha8Rng::seed_from_u64(agent_seed);
        let mut out = match args.variant {
            AgentKind::Soc(variant) => {
                let mut theta = default_theta(config.agent.p_t);
                if let Some(r) = args.rho_prior {
                    theta.rho_prior = Some(r);
                }
                if let Some(g) = args.p_gen {
                    theta.p_gen = g;
                }
                let params = SocParams {
                    n_particles: args.n_particles.unwrap_or(config.agent.n_particles),
                    variant,
                    theta,
                    resample: config.agent.resample,
                };
                run_soc_episode(&params, layout.clone(), &config.env.clone().with_seed(env_seed), &mut rng)?
            }
            AgentKind::Llm(variant) => {
                let backend = args.backend.as_ref().expect("checked above").open()?;
                let params = LlmParams::new(variant, args.n_particles.unwrap_or(1));
                let env = EnvConfig { max_trials: config.env.max_trials, ..variant.env_config(env_seed) };
                run_llm_ps_episode(&params, layout.clone(), &env, backend.as_ref(), &mut rng)?
            }
            AgentKind::React => {
                let backend = args.backend.as_ref().expect("checked above").open()?;
                let env = EnvConfig {
                    reliability: ReliabilityMode::Deterministic,
                    observability: Observability::Full,
                    max_trials: config.env.max_trials,
                    rng_seed: env_seed,
                };
                run_react_episode(layout.clone(), &env, backend.as_ref())?
            }
        };
        out.trajectory.subject_id = format!("{}-{i:03}", args.variant);
        out.trajectory.metadata.agent_seed = Some(agent_seed);
        runs.push(out);
    }
    let summary = SimulationSummary::from_runs(args.variant.name(), seed, &runs);
    Ok(Simulation { runs, summary, layout: (*layout).clone() })
}

/// Writes `trajectories.csv`, `summary.json` and per-run files under `runs/`.
pub fn write_simulation(sim: &Simulation, dir: &Path) -> Result<()> {
    let trajs: Vec<Trajectory> = sim.runs.iter().map(|r| r.trajectory.clone()).collect();
    let mut all = Vec::new();
    write_csv(&trajs, &sim.layout, &mut all)?;
    write_file(&dir.join("trajectories.csv"), all)?;
    for run in &sim.runs {
        let id = &run.trajectory.subject_id;
        let mut one = Vec::new();
        write_csv(std::slice::from_ref(&run.trajectory), &sim.layout, &mut one)?;
        write_file(&dir.join("runs").join(format!("{id}.csv")), one)?;
        write_file(&dir.join("runs").join(format!("{id}.log")), run.log_text())?;
        write_file(&dir.join("runs").join(format!("{id}.json")), serde_json::to_string_pretty(run)?)?;
    }
    write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&sim.summary)?)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let sim = simulate(args)?;
    if let Some(dir) = &args.out {
        write_simulation(&sim, dir)?;
    }
    if let [run] = sim.runs.as_slice() {
        print!("{}", run.log_text());
        println!();
    }
    print!("{}", sim.summary);
    Ok(())
}

// --------------------------------------------------------------------- fit

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Trajectory CSV to fit.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Variants to fit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "soc-l,soc-rel,soc-gen,soc-full")]
    pub variants: Vec<SocVariant>,
    /// Probability table cache. Loaded when present; missing tables are
    /// built and the file rewritten.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Simulations per table. Defaults to `fitting.n_sims`.
    #[arg(long)]
    pub n_sims: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub table_seed: u64,
    /// Floor on table probabilities. Defaults to `fitting.epsilon` (0.01).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the fits as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epsilon: f64,
    pub n_sims: usize,
    pub table_seed: u64,
    pub results: Vec<FitResult>,
    pub summary: CohortSummary,
}

/// Reads a trajectory file. Empty input is a usage error.
pub fn read_trajectories(path: &Path, layout: &Layout) -> Result<Vec<Trajectory>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Err(usage(format!("{}: empty trajectory file", path.display())));
    }
    match read_csv(text.as_bytes(), layout) {
        Ok(t) => Ok(t),
        Err(IngestError::Empty) => Err(usage(format!("{}: no trajectory rows", path.display()))),
        Err(e) => Err(anyhow::Error::new(e).context(format!("{}", path.display()))),
    }
}

pub fn simulation_settings(config: &ExperimentConfig) -> SimulationSettings {
    SimulationSettings {
        layout: Arc::new(config.layout()),
        reliability: config.env.reliability,
        observability: config.env.observability,
        max_trials: config.env.max_trials,
        n_particles: config.agent.n_particles,
        resample: config.agent.resample,
    }
}

pub fn fit(args: &FitArgs) -> Result<FitReport> {
    let config = load_config(args.config.as_deref())?;
    let layout = config.layout();
    let epsilon = args.epsilon.unwrap_or(config.fitting.epsilon);
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(usage(format!("--epsilon {epsilon} must lie in (0, 1)")));
    }
    let n_sims = args.n_sims.unwrap_or(config.fitting.n_sims);
    if n_sims == 0 {
        return Err(usage("--n-sims must be at least 1"));
    }
    if args.variants.is_empty() {
        return Err(usage("no variants to fit"));
    }
    let trajs = read_trajectories(&args.trajectories, &layout)?;
    let grids: Vec<ParamGrid> = args.variants.iter().map(|&v| config.grid(v)).collect();
    let settings = simulation_settings(&config);
    let mut tables = match &args.tables {
        Some(p) if p.exists() => TableSet::load(p)?,
        _ => TableSet::default(),
    };
    let before = tables.len();
    tables.extend(&grids, n_sims, args.table_seed, &settings)?;
    if let Some(p) = &args.tables {
        if tables.len() != before || !p.exists() {
            tables.save(p)?;
        }
    }
    let results = fit_cohort(&trajs, &grids, &tables, epsilon)?;
    let summary = summarize(&results);
    Ok(FitReport { epsilon, n_sims, table_seed: args.table_seed, results, summary })
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let report = fit(args)?;
    if let Some(out) = &args.out {
        write_file(out, serde_json::to_string_pretty(&report)?)?;
    }
    print!("{}", format_fit_tables(&report));
    Ok(())
}

/// Plain-text AIC and paired-comparison tables.
pub fn format_fit_tables(report: &FitReport) -> String {
    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(out, "subjects {}  epsilon {}  n_sims {}", s.n_subjects, report.epsilon, report.n_sims);
    let _ = writeln!(out, "{:<10} {:>2} {:>10} {:>21} {:>10} {:>5}", "variant", "k", "mean NLL", "95% CI", "mean AIC", "best");
    for v in &s.variants {
        let _ = writeln!(
            out,
            "{:<10} {:>2} {:>10.2} {:>21} {:>10.2} {:>5}",
            v.variant.name(),
            v.k,
            v.mean_nll,
            format!("[{:.2}, {:.2}]", v.nll_ci95.0, v.nll_ci95.1),
            v.mean_aic,
            v.best_count
        );
    }
    if !s.comparisons.is_empty() {
        let _ = writeln!(out, "\npaired LL* comparisons");
        let _ = writeln!(out, "{:<22} {:>4} {:>10} {:>8} {:>10} {:>7}", "a - b", "n", "mean diff", "t", "p", "d");
        for c in &s.comparisons {
            let label = format!("{} - {}", c.a.name(), c.b.name());
            match &c.test {
                Some(t) => {
                    let _ = writeln!(
                        out,
                        "{label:<22} {:>4} {:>10.3} {:>8.3} {:>10.3e} {:>7.3}",
                        t.n, t.mean_diff, t.t, t.p, t.d
                    );
                }
                None => {
                    let _ = writeln!(out, "{label:<22} (too few subjects)");
                }
            }
        }
    }
    out
}

// ----------------------------------------------------------------- compare

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Fit files written by `fit --out`.
    #[arg(required = true)]
    pub fits: Vec<PathBuf>,
}

pub fn load_fit_report(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    for path in &args.fits {
        let report = load_fit_report(path)?;
        println!("== {}", path.display());
        print!("{}", format_fit_tables(&report));
        let ranked = ranked_variants(&report.summary);
        println!("ranking by mean AIC: {}", ranked.join(" < "));
        println!();
    }
    Ok(())
}

fn ranked_variants(s: &CohortSummary) -> Vec<&'static str> {
    let mut v: Vec<_> = s.variants.iter().collect();
    v.sort_by(|a, b| a.mean_aic.total_cmp(&b.mean_aic));
    v.into_iter().map(|x| x.variant.name()).collect()
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Fit file written by `fit --out`.
    #[arg(long)]
    pub fits: Option<PathBuf>,
    /// Trajectory CSV for the behavior section.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// `summary.json` from `simulate` for the final-rule section.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Markdown output path. Printed when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn report(args: &ReportArgs) -> Result<String> {
    if args.fits.is_none() && args.trajectories.is_none() && args.summary.is_none() {
        return Err(usage("report needs at least one of --fits, --trajectories, --summary"));
    }
    let config = load_config(args.config.as_deref())?;
    let layout = config.layout();
    let mut md = String::from("# Box Task report\n");
    if let Some(p) = &args.fits {
        let r = load_fit_report(p)?;
        let s = &r.summary;
        let _ = writeln!(md, "\n## Model comparison\n\n{} subjects, epsilon {}, {} simulations per table.\n", s.n_subjects, r.epsilon, r.n_sims);
        md.push_str("| variant | k | mean NLL | 95% CI | mean AIC | best fit |\n|---|---|---|---|---|---|\n");
        for v in &s.variants {
            let _ = writeln!(
                md,
                "| {} | {} | {:.2} | [{:.2}, {:.2}] | {:.2} | {} |",
                v.variant.name(),
                v.k,
                v.mean_nll,
                v.nll_ci95.0,
                v.nll_ci95.1,
                v.mean_aic,
                v.best_count
            );
        }
        if !s.comparisons.is_empty() {
            md.push_str("\n| comparison | n | mean LL* diff | t | p | d |\n|---|---|---|---|---|---|\n");
            for c in &s.comparisons {
                match &c.test {
                    Some(t) => {
                        let _ = writeln!(
                            md,
                            "| {} vs {} | {} | {:.3} | {:.3} | {:.3e} | {:.3} |",
                            c.a.name(),
                            c.b.name(),
                            t.n,
                            t.mean_diff,
                            t.t,
                            t.p,
                            t.d
                        );
                    }
                    None => {
                        let _ = writeln!(md, "| {} vs {} | | | | | |", c.a.name(), c.b.name());
                    }
                }
            }
        }
        let _ = writeln!(md, "\nRanking by mean AIC: {}.", ranked_variants(s).join(" < "));
    }
    if let Some(p) = &args.trajectories {
        let trajs = read_trajectories(p, &layout)?;
        let b: Vec<stats::Behavior> = trajs.iter().map(|t| stats::behavior(t, &layout)).collect();
        let col = |f: &dyn Fn(&stats::Behavior) -> f64| stats::mean(&b.iter().map(f).collect::<Vec<_>>());
        let color_first: Vec<f64> = b.iter().filter_map(|x| x.first_attempt_color_match).map(|x| x as u8 as f64).collect();
        let _ = writeln!(md, "\n## Behavior\n\n{} trajectories.\n", trajs.len());
        md.push_str("| measure | mean |\n|---|---|\n");
        let _ = writeln!(md, "| trials | {:.2} |", col(&|x| x.trials as f64));
        let _ = writeln!(md, "| attempts | {:.2} |", col(&|x| x.attempts as f64));
        let _ = writeln!(md, "| observes | {:.2} |", col(&|x| x.observes as f64));
        let _ = writeln!(md, "| repeated failed attempts | {:.2} |", col(&|x| x.repeats as f64));
        let _ = writeln!(md, "| completed | {:.3} |", col(&|x| x.completed as u8 as f64));
        if !color_first.is_empty() {
            let _ = writeln!(md, "| first attempt color-matched | {:.3} |", stats::mean(&color_first));
        }
    }
    if let Some(p) = &args.summary {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let s: SimulationSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        let _ = writeln!(
            md,
            "\n## Final rules\n\n{} runs of {}, {} completed.\n",
            s.runs, s.variant, s.completed
        );
        md.push_str("| final rule | runs |\n|---|---|\n");
        for (r, c) in &s.final_rules {
            let _ = writeln!(md, "| {r} | {c} |");
        }
        if let Some(x) = s.number_rule_among_completed {
            let _ = writeln!(md, "\nNumber rule among completed runs: {:.1}%.", 100.0 * x);
        }
    }
    Ok(md)
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    let md = report(args)?;
    match &args.out {
        Some(p) => write_file(p, md),
        None => {
            print!("{md}");
            Ok(())
        }
    }
}

// ------------------------------------------------------------------ replay

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Mock backend script: responses separated by `---` lines.
    #[arg(long)]
    pub script: PathBuf,
    /// llm-ps, llm-ps-s, llm-ps-p or react.
    #[arg(long, default_value = "llm-ps-p")]
    pub variant: AgentKind,
    #[arg(long, default_value_t = 0)]
    pub env_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub agent_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub n_particles: usize,
    /// Write the run log here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn replay(args: &ReplayArgs) -> Result<EpisodeOutput> {
    let backend = mock_from_script(&args.script)?;
    let layout = Arc::new(Layout::standard());
    let out = match args.variant {
        AgentKind::Llm(v) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.agent_seed);
            run_llm_ps_episode(&LlmParams::new(v, args.n_particles), layout, &v.env_config(args.env_seed), &backend, &mut rng)?
        }
        AgentKind::React => {
            let env = EnvConfig::default().with_seed(args.env_seed);
            run_react_episode(layout, &env, &backend)?
        }
        AgentKind::Soc(_) => return Err(usage("replay drives backend agents; use simulate for SoC variants")),
    };
    Ok(out)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let out = replay(args)?;
    match &args.out {
        Some(p) => write_file(p, out.log_text()),
        None => {
            print!("{}", out.log_text());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_kinds_parse() {
        assert_eq!("soc-full".parse::<AgentKind>(), Ok(AgentKind::Soc(SocVariant::Full)));
        assert_eq!("LLM-PS-P".parse::<AgentKind>(), Ok(AgentKind::Llm(LlmVariant::Partial)));
        assert_eq!("react".parse::<AgentKind>(), Ok(AgentKind::React));
        assert!("soc-banana".parse::<AgentKind>().is_err());
    }

    #[test]
    fn backend_specs_parse() {
        assert_eq!("mock:a.txt".parse::<BackendSpec>(), Ok(BackendSpec::Mock("a.txt".into())));
        assert_eq!("http:b.toml".parse::<BackendSpec>(), Ok(BackendSpec::Http("b.toml".into())));
        assert!("mock:".parse::<BackendSpec>().is_err());
        assert!("ftp:x".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn pairs_parse() {
        assert_eq!(parse_pair("5.9, 2.7"), Ok((5.9, 2.7)));
        assert!(parse_pair("1").is_err());
        assert!(parse_pair("0,1").is_err());
    }
}
