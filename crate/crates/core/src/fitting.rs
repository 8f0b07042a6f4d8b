//! Model fitting by forward simulation and grid search.
//!
//! For every model variant and parameter setting θ, many simulated episodes
//! give a table `P(n | t, θ)`: the probability of having opened `n` distinct
//! boxes by trial `t`. A subject's trajectory is scored by
//! `Σ_t ln max(P(n_t | t, θ), ε)`; the best setting per variant gives `LL*`,
//! and variants are compared by `AIC = 2·NLL + 2k` and paired t-tests.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{run_soc_episode, AgentError, SocParams};
use crate::env::{EnvConfig, Layout, Observability, ReliabilityMode};
use crate::proposal::{SocVariant, Theta, DEFAULT_P_T};
use crate::smc::ResampleConfig;
use crate::stats::{self, PairedComparison};
use crate::trajectory::{trajectory_counts, Trajectory};
use crate::{derive_seed, name_hash, Real};

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_N_SIMS: usize = 100;
pub const DEFAULT_PARTICLES: usize = 10;

/// Beta(α, β) priors on reliability.
pub const RHO_GRID: [(f64, f64); 11] = [
    (1.0, 1.0),
    (1.0, 2.0),
    (1.0, 3.0),
    (2.0, 1.0),
    (3.0, 1.0),
    (4.0, 1.0),
    (5.0, 1.0),
    (6.0, 1.0),
    (9.0, 1.0),
    (15.0, 1.0),
    (19.0, 1.0),
];

pub const PGEN_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no probability table for {0}")]
    MissingTable(String),
    #[error("invalid fitting input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("table file: {0}")]
    Io(String),
}

/// `P(n | t)` for `n = 0..=n_max`, `t = 1..=t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable<T> {
    pub variant: SocVariant,
    pub theta: Theta,
    pub n_sims: usize,
    pub n_max: usize,
    pub t_max: usize,
    probs: Vec<T>,
}

impl<T: Real> ProbabilityTable<T> {
    /// Empirical frequencies from simulated count series. A series shorter
    /// than `t_max` holds its final count for the remaining trials.
    pub fn from_counts(variant: SocVariant, theta: Theta, series: &[Vec<u8>], n_max: usize, t_max: usize) -> Self {
        assert!(!series.is_empty(), "at least one simulation");
        let mut probs = vec![T::zero(); t_max * (n_max + 1)];
        let unit = T::one() / T::from_usize(series.len()).unwrap();
        for s in series {
            let mut last = 0u8;
            for t in 0..t_max {
                last = s.get(t).copied().unwrap_or(last);
                probs[t * (n_max + 1) + (last as usize).min(n_max)] += unit;
            }
        }
        ProbabilityTable { variant, theta, n_sims: series.len(), n_max, t_max, probs }
    }

    /// `P(n | t)`; trials beyond `t_max` use the last column.
    pub fn get(&self, n: usize, t: usize) -> T {
        assert!(t >= 1, "trials are 1-based");
        if n > self.n_max {
            return T::zero();
        }
        let t = t.min(self.t_max);
        self.probs[(t - 1) * (self.n_max + 1) + n]
    }

    pub fn column(&self, t: usize) -> &[T] {
        let t = t.clamp(1, self.t_max);
        &self.probs[(t - 1) * (self.n_max + 1)..t * (self.n_max + 1)]
    }

    pub fn key(&self) -> String {
        table_key(self.variant, &self.theta)
    }
}

pub fn table_key(variant: SocVariant, theta: &Theta) -> String {
    format!("{variant} {}", theta.label())
}

/// Floored log-likelihood of a count series.
pub fn log_likelihood<T: Real>(counts: &[u8], table: &ProbabilityTable<T>, epsilon: T) -> T {
    counts
        .iter()
        .enumerate()
        .map(|(i, &n)| table.get(n as usize, i + 1).max(epsilon).ln())
        .sum()
}

pub fn aic(nll: f64, k: u32) -> f64 {
    2.0 * nll + 2.0 * k as f64
}

/// How simulated subjects are run when tables are built.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub layout: Arc<Layout>,
    pub reliability: ReliabilityMode,
    pub observability: Observability,
    pub max_trials: u32,
    pub n_particles: usize,
    pub resample: ResampleConfig,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            layout: Arc::new(Layout::standard()),
            reliability: ReliabilityMode::CHILDREN,
            observability: Observability::Partial,
            max_trials: 70,
            n_particles: DEFAULT_PARTICLES,
            resample: ResampleConfig::default(),
        }
    }
}

impl SimulationSettings {
    pub fn env_config(&self, seed: u64) -> EnvConfig {
        EnvConfig {
            reliability: self.reliability,
            observability: self.observability,
            max_trials: self.max_trials,
            rng_seed: seed,
        }
    }

    /// Simulates one subject. Seeds for the environment and the agent are
    /// derived from `seed`.
    pub fn simulate(&self, variant: SocVariant, theta: &Theta, seed: u64) -> Result<Trajectory, FitError> {
        let params = SocParams { n_particles: self.n_particles, variant, theta: *theta, resample: self.resample };
        let env = self.env_config(derive_seed(seed, &[0]));
        let agent_seed = derive_seed(seed, &[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(agent_seed);
        let mut out = run_soc_episode(&params, self.layout.clone(), &env, &mut rng)?;
        out.trajectory.metadata.agent_seed = Some(agent_seed);
        Ok(out.trajectory)
    }
}

/// Simulates `n_sims` episodes and tabulates cumulative open counts. The
/// result depends only on the arguments.
pub fn build_probability_table(
    variant: SocVariant,
    theta: &Theta,
    n_sims: usize,
    seed: u64,
    settings: &SimulationSettings,
) -> Result<ProbabilityTable<f64>, FitError> {
    if n_sims == 0 {
        return Err(FitError::Invalid("n_sims must be at least 1".into()));
    }
    let base = derive_seed(seed, &[name_hash(&table_key(variant, theta))]);
    let series: Vec<Vec<u8>> = (0..n_sims as u64)
        .into_par_iter()
        .map(|i| settings.simulate(variant, theta, derive_seed(base, &[i])).map(|t| trajectory_counts(&t)))
        .collect::<Result<_, _>>()?;
    Ok(ProbabilityTable::from_counts(variant, *theta, &series, settings.layout.n_boxes(), settings.max_trials as usize))
}

/// Parameter settings searched for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub variant: SocVariant,
    pub settings: Vec<Theta>,
}

impl ParamGrid {
    /// SoC-L: one setting; SoC-Gen: 9 `p_gen` values; SoC-Rel: 11 reliability
    /// priors; SoC-Full: all 99 combinations (priors outer, `p_gen` inner).
    pub fn standard(variant: SocVariant) -> Self {
        Self::with_p_t(variant, DEFAULT_P_T)
    }

    pub fn with_p_t(variant: SocVariant, p_t: f64) -> Self {
        let theta = |rho, p_gen| Theta { rho_prior: rho, p_gen, p_t };
        let settings = match variant {
            SocVariant::Lesioned => vec![theta(None, 0.0)],
            SocVariant::Gen => PGEN_GRID.iter().map(|&g| theta(None, g)).collect(),
            SocVariant::Rel => RHO_GRID.iter().map(|&r| theta(Some(r), 0.0)).collect(),
            SocVariant::Full => RHO_GRID
                .iter()
                .flat_map(|&r| PGEN_GRID.iter().map(move |&g| theta(Some(r), g)))
                .collect(),
        };
        ParamGrid { variant, settings }
    }

    pub fn all_standard() -> Vec<ParamGrid> {
        SocVariant::ALL.into_iter().map(ParamGrid::standard).collect()
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    /// Grid coordinates of a setting: (rank of the prior's mean reliability,
    /// index of `p_gen`), with lesioned axes at 0.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        let th = &self.settings[index];
        let rho_rank = th.rho_prior.map_or(0, |(a, b)| {
            let m = a / (a + b);
            RHO_GRID.iter().filter(|&&(x, y)| x / (x + y) < m).count()
        });
        let pgen_idx = PGEN_GRID.iter().position(|&g| (g - th.p_gen).abs() < 1e-12).unwrap_or(0);
        match self.variant {
            SocVariant::Lesioned => (0, 0),
            SocVariant::Gen => (0, pgen_idx),
            SocVariant::Rel => (rho_rank, 0),
            SocVariant::Full => (rho_rank, pgen_idx),
        }
    }

    /// Whether two settings lie within one grid step of each other on
    /// every axis (the 3×3 neighborhood).
    pub fn neighbors(&self, a: usize, b: usize) -> bool {
        let ((ra, ga), (rb, gb)) = (self.coords(a), self.coords(b));
        ra.abs_diff(rb) <= 1 && ga.abs_diff(gb) <= 1
    }
}

/// Probability tables keyed by variant and setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSet {
    tables: BTreeMap<String, ProbabilityTable<f64>>,
}

impl TableSet {
    pub fn insert(&mut self, table: ProbabilityTable<f64>) {
        self.tables.insert(table.key(), table);
    }

    pub fn get(&self, variant: SocVariant, theta: &Theta) -> Result<&ProbabilityTable<f64>, FitError> {
        let key = table_key(variant, theta);
        self.tables.get(&key).ok_or(FitError::MissingTable(key))
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Builds every missing table for the grids, in parallel over settings.
    pub fn build(grids: &[ParamGrid], n_sims: usize, seed: u64, settings: &SimulationSettings) -> Result<Self, FitError> {
        let mut set = TableSet::default();
        set.extend(grids, n_sims, seed, settings)?;
        Ok(set)
    }

    pub fn extend(&mut self, grids: &[ParamGrid], n_sims: usize, seed: u64, settings: &SimulationSettings) -> Result<(), FitError> {
        let todo: Vec<(SocVariant, Theta)> = grids
            .iter()
            .flat_map(|g| g.settings.iter().map(move |th| (g.variant, *th)))
            .filter(|(v, th)| self.get(*v, th).is_err())
            .collect();
        let built: Vec<ProbabilityTable<f64>> = todo
            .par_iter()
            .map(|(v, th)| build_probability_table(*v, th, n_sims, seed, settings))
            .collect::<Result<_, _>>()?;
        for t in built {
            self.insert(t);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), FitError> {
        let text = serde_json::to_string(self).map_err(|e| FitError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| FitError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, FitError> {
        let text = std::fs::read_to_string(path).map_err(|e| FitError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| FitError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFit {
    pub index: usize,
    pub theta: Theta,
    pub ll: f64,
    /// Every index whose log-likelihood ties the maximum.
    pub ties: Vec<usize>,
    pub all_ll: Vec<f64>,
}

/// Maximum-likelihood setting, first index winning ties.
pub fn grid_search(counts: &[u8], grid: &ParamGrid, tables: &TableSet, epsilon: f64) -> Result<GridFit, FitError> {
    if grid.is_empty() {
        return Err(FitError::Invalid(format!("empty grid for {}", grid.variant)));
    }
    let all_ll: Vec<f64> = grid
        .settings
        .iter()
        .map(|th| tables.get(grid.variant, th).map(|t| log_likelihood(counts, t, epsilon)))
        .collect::<Result<_, _>>()?;
    let best = all_ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..all_ll.len()).filter(|&i| all_ll[i] >= best - 1e-12).collect();
    let index = ties[0];
    Ok(GridFit { index, theta: grid.settings[index], ll: all_ll[index], ties, all_ll })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFit {
    pub fit: GridFit,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub subject_id: String,
    pub per_variant: BTreeMap<SocVariant, VariantFit>,
    /// Lowest AIC; ties go to the variant with fewer parameters.
    pub best: SocVariant,
}

pub fn fit_subject(traj: &Trajectory, grids: &[ParamGrid], tables: &TableSet, epsilon: f64) -> Result<FitResult, FitError> {
    if grids.is_empty() {
        return Err(FitError::Invalid("no grids".into()));
    }
    let counts = trajectory_counts(traj);
    let mut per_variant = BTreeMap::new();
    for g in grids {
        let fit = grid_search(&counts, g, tables, epsilon)?;
        let aic = aic(-fit.ll, g.variant.free_parameters());
        per_variant.insert(g.variant, VariantFit { fit, aic });
    }
    let best = *per_variant
        .iter()
        .min_by(|(va, a), (vb, b)| {
            a.aic.partial_cmp(&b.aic).unwrap().then(va.free_parameters().cmp(&vb.free_parameters()))
        })
        .unwrap()
        .0;
    Ok(FitResult { subject_id: traj.subject_id.clone(), per_variant, best })
}

/// Fits every subject in parallel; results keep the input order.
pub fn fit_cohort(trajs: &[Trajectory], grids: &[ParamGrid], tables: &TableSet, epsilon: f64) -> Result<Vec<FitResult>, FitError> {
    trajs.par_iter().map(|t| fit_subject(t, grids, tables, epsilon)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: SocVariant,
    pub k: u32,
    pub mean_nll: f64,
    pub nll_ci95: (f64, f64),
    pub mean_aic: f64,
    pub best_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: SocVariant,
    pub b: SocVariant,
    /// Paired test on per-subject `LL*`, `a - b`.
    pub test: Option<PairedComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_subjects: usize,
    pub variants: Vec<VariantSummary>,
    /// The fullest fitted variant against each of the others.
    pub comparisons: Vec<Comparison>,
}

pub fn summarize(results: &[FitResult]) -> CohortSummary {
    let variants: Vec<SocVariant> = results
        .first()
        .map(|r| r.per_variant.keys().copied().collect())
        .unwrap_or_default();
    let ll = |v: SocVariant| -> Vec<f64> { results.iter().map(|r| r.per_variant[&v].fit.ll).collect() };
    let summaries = variants
        .iter()
        .map(|&v| {
            let nll: Vec<f64> = ll(v).iter().map(|x| -x).collect();
            let aics: Vec<f64> = results.iter().map(|r| r.per_variant[&v].aic).collect();
            VariantSummary {
                variant: v,
                k: v.free_parameters(),
                mean_nll: stats::mean(&nll),
                nll_ci95: stats::ci95(&nll),
                mean_aic: stats::mean(&aics),
                best_count: results.iter().filter(|r| r.best == v).count(),
            }
        })
        .collect();
    let comparisons = match variants.iter().max_by_key(|v| v.free_parameters()) {
        Some(&top) => variants
            .iter()
            .filter(|&&v| v != top)
            .map(|&v| Comparison { a: top, b: v, test: stats::paired_compare(&ll(top), &ll(v)).ok() })
            .collect(),
        None => Vec::new(),
    };
    CohortSummary { n_subjects: results.len(), variants: summaries, comparisons }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(series: &[Vec<u8>]) -> ProbabilityTable<f64> {
        ProbabilityTable::from_counts(SocVariant::Lesioned, Theta::default(), series, 5, 70)
    }

    #[test]
    fn columns_sum_to_one_and_hold_final_counts() {
        let t = table(&[vec![1, 2, 3, 4, 5], vec![0, 0, 1], vec![0; 70]]);
        for col in 1..=70 {
            assert_abs_diff_eq!(t.column(col).iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(t.get(5, 70), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.get(1, 40), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.get(0, 1), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn floored_log_likelihood() {
        let t = table(&[vec![1, 2, 3, 4, 5]]);
        assert_eq!(log_likelihood(&[1, 2, 3, 4, 5], &t, 0.01), 0.0);
        assert_abs_diff_eq!(log_likelihood(&[0; 10], &t, 0.01), 10.0 * 0.01f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_likelihood(&[1, 2, 2, 4, 5], &t, 0.01), 0.01f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(10.0 * 0.01f64.ln(), -46.0517, epsilon = 1e-4);
    }

    #[test]
    fn aic_values() {
        assert_abs_diff_eq!(aic(45.89, 2), 95.78, epsilon = 1e-9);
        assert_abs_diff_eq!(aic(326.96, 0), 653.92, epsilon = 1e-9);
    }

    #[test]
    fn grid_sizes_and_neighborhoods() {
        let sizes: Vec<usize> = SocVariant::ALL.iter().map(|&v| ParamGrid::standard(v).len()).collect();
        assert_eq!(sizes, vec![1, 11, 9, 99]);
        let full = ParamGrid::standard(SocVariant::Full);
        assert!(full.settings.iter().all(|t| t.p_t == 0.02));
        // (1,1) has mean 0.5, ranked third after (1,3) and (1,2).
        assert_eq!(full.coords(0), (2, 0));
        assert_eq!(full.coords(9 * 2 + 4), (0, 4));
        assert!(full.neighbors(0, 10));
        assert!(!full.neighbors(0, 9 * 2 + 2));
        let gen = ParamGrid::standard(SocVariant::Gen);
        assert!(gen.neighbors(0, 1) && !gen.neighbors(0, 2));
    }

    #[test]
    fn grid_search_picks_first_maximum() {
        let grid = ParamGrid::standard(SocVariant::Gen);
        let mut set = TableSet::default();
        for (i, th) in grid.settings.iter().enumerate() {
            let series = if i == 3 || i == 5 { vec![vec![1, 2]] } else { vec![vec![0, 0]] };
            set.insert(ProbabilityTable::from_counts(SocVariant::Gen, *th, &series, 5, 70));
        }
        let fit = grid_search(&[1, 2], &grid, &set, 0.01).unwrap();
        assert_eq!((fit.index, fit.ties.clone()), (3, vec![3, 5]));
        assert!(fit.all_ll.iter().all(|&l| l <= fit.ll));
        let missing = ParamGrid::standard(SocVariant::Rel);
        assert!(matches!(grid_search(&[1], &missing, &set, 0.01), Err(FitError::MissingTable(_))));
    }
}
