//! Episode runners: the SoC agent, the LLM program-synthesis loop and the
//! ReAct baseline.

mod llm;
pub mod prompts;
mod react;
mod soc;

use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{standard_generalization_trials, Action, EnvError, Layout, Outcome};
use crate::hypothesis::Hypothesis;
use crate::llm_backend::BackendError;
use crate::proposal::ProposalError;
use crate::rulelang::{generalization_choice, BoxView};
use crate::smc::{ParticleSet, SmcError};
use crate::trajectory::Trajectory;
use crate::Real;

pub use llm::{parse_llm_reply, run_llm_ps_episode, score_program, LlmParams, LlmReply, LlmVariant, IMPOSSIBLE_LOG_LIKELIHOOD};
pub use react::{parse_react_action, run_react_episode};
pub use soc::{run_soc_episode, run_soc_from, SocParams};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Smc(#[from] SmcError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("malformed program: {0}")]
    MalformedProgram(String),
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("invalid agent parameters: {0}")]
    InvalidParams(String),
}

/// One line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub trial: u32,
    pub action: String,
    pub detail: String,
    pub outcome: String,
    pub ess: f64,
    pub top_hypothesis: String,
    /// The largest weights, descending.
    pub weights: Vec<f64>,
}

impl RunLogEntry {
    pub const HEADER: &'static str = "t\taction\tdetail\toutcome\tess\ttop_hypothesis\tweights";

    pub fn new<T: Real>(trial: u32, action: Action, outcome: Outcome, layout: &Layout, ps: &ParticleSet<T>) -> Self {
        let (kind, detail, result) = describe_step(action, outcome, layout);
        let top = ps.best_index().map(|i| ps.particles()[i].hypothesis.describe(layout)).unwrap_or_default();
        let mut weights: Vec<f64> = ps.weights().iter().map(|w| w.to_f64_lossy()).collect();
        weights.sort_by(|a, b| b.partial_cmp(a).unwrap());
        weights.truncate(3);
        RunLogEntry {
            trial,
            action: kind.into(),
            detail,
            outcome: result,
            ess: if ps.is_empty() { 0.0 } else { ps.ess().to_f64_lossy() },
            top_hypothesis: top,
            weights,
        }
    }
}

impl fmt::Display for RunLogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let weights = self.weights.iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>().join(",");
        write!(
            f,
            "{}\t{}\t{}\t{}\t{:.3}\t{}\t{}",
            self.trial,
            self.action,
            self.detail,
            self.outcome,
            self.ess,
            self.top_hypothesis.replace(['\n', '\t'], " "),
            weights
        )
    }
}

pub fn format_run_log(entries: &[RunLogEntry]) -> String {
    let mut out = String::from(RunLogEntry::HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

/// `("Attempt", "white7 -> white", "failure")` or
/// `("Observe", "PICK UP purple", "purple: 3 faces have shape on them")`.
pub fn describe_step(action: Action, outcome: Outcome, layout: &Layout) -> (&'static str, String, String) {
    match (action, outcome) {
        (Action::Attempt { box_, key }, o) => (
            "Attempt",
            format!("{} -> {}", layout.key(key).id, layout.boxdef(box_).id),
            if o.success() { "success" } else { "failure" }.to_string(),
        ),
        (Action::Observe { box_ }, o) => {
            let id = &layout.boxdef(box_).id;
            ("Observe", format!("PICK UP {id}"), observe_text(id, o.code()))
        }
    }
}

pub fn observe_text(box_id: &str, n: u8) -> String {
    if n == 1 {
        format!("{box_id}: 1 face has shape on it")
    } else {
        format!("{box_id}: {n} faces have shape on them")
    }
}

/// A finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutput {
    pub trajectory: Trajectory,
    pub log: Vec<RunLogEntry>,
}

impl EpisodeOutput {
    pub fn log_text(&self) -> String {
        format_run_log(&self.log)
    }
}

/// Picks the final hypothesis (uniform among weight ties) and answers the
/// generalization trials with it. Returns whether there was a tie.
pub(crate) fn finish<T: Real, R: Rng + ?Sized>(
    traj: &mut Trajectory,
    ps: &ParticleSet<T>,
    layout: &Layout,
    rng: &mut R,
) -> bool {
    let ties = ps.best_indices();
    let Some(&pick) = ties.choose(rng) else {
        return false;
    };
    let h: Hypothesis = ps.particles()[pick].hypothesis.clone();
    traj.generalization = answer_generalization(&h, layout, rng);
    traj.final_rule = Some(h.classify(layout));
    traj.final_hypothesis = Some(h);
    traj.metadata.final_tie = ties.len() > 1;
    traj.metadata.final_tie
}

pub fn answer_generalization<R: Rng + ?Sized>(h: &Hypothesis, layout: &Layout, rng: &mut R) -> Vec<Option<String>> {
    standard_generalization_trials()
        .iter()
        .map(|trial| {
            let view = BoxView::observed(&trial.novel_box);
            Some(generalization_choice(h, layout, &view, &trial.candidates, rng).id.clone())
        })
        .collect()
}
