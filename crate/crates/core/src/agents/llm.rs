use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{finish, prompts, AgentError, EpisodeOutput, RunLogEntry};
use crate::env::{Action, BoxIndex, EnvConfig, Environment, Layout, Observability, ReliabilityMode};
use crate::hypothesis::Hypothesis;
use crate::llm_backend::{ChatMessage, CompletionBackend};
use crate::rulelang::{parse_rule, BoxView, RuleProgram};
use crate::smc::{likelihood, Context, Evidence, ParticleSet, Particle};
use crate::trajectory::Trajectory;

/// Log-likelihood charged for each observation a program deems impossible.
pub const IMPOSSIBLE_LOG_LIKELIHOOD: f64 = -1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LlmVariant {
    /// Full observability, reliable keys.
    #[serde(rename = "llm-ps")]
    Reliable,
    /// Full observability, unreliable keys.
    #[serde(rename = "llm-ps-s")]
    Stochastic,
    /// Partial observability, unreliable keys.
    #[serde(rename = "llm-ps-p")]
    Partial,
}

impl LlmVariant {
    pub const ALL: [LlmVariant; 3] = [LlmVariant::Reliable, LlmVariant::Stochastic, LlmVariant::Partial];

    pub fn name(self) -> &'static str {
        match self {
            LlmVariant::Reliable => "llm-ps",
            LlmVariant::Stochastic => "llm-ps-s",
            LlmVariant::Partial => "llm-ps-p",
        }
    }

    /// The matched task condition.
    pub fn env_config(self, seed: u64) -> EnvConfig {
        let (reliability, observability) = match self {
            LlmVariant::Reliable => (ReliabilityMode::Deterministic, Observability::Full),
            LlmVariant::Stochastic => (ReliabilityMode::CHILDREN, Observability::Full),
            LlmVariant::Partial => (ReliabilityMode::CHILDREN, Observability::Partial),
        };
        EnvConfig { reliability, observability, ..EnvConfig::default() }.with_seed(seed)
    }

    pub fn unreliable(self) -> bool {
        self != LlmVariant::Reliable
    }
}

impl FromStr for LlmVariant {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LlmVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| AgentError::InvalidParams(format!("unknown LLM variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmParams {
    pub n_particles: usize,
    pub variant: LlmVariant,
    /// Reliability assumed when programs are scored.
    pub rho_subjective: f64,
}

impl LlmParams {
    /// Reliable keys are scored with `rho = 1`; unreliable ones with the
    /// mean of the children's reliability model.
    pub fn new(variant: LlmVariant, n_particles: usize) -> Self {
        let rho_subjective = if variant.unreliable() { ReliabilityMode::CHILDREN.mean() } else { 1.0 };
        LlmParams { n_particles, variant, rho_subjective }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.n_particles == 0 {
            return Err(AgentError::InvalidParams("N must be at least 1".into()));
        }
        if !(self.rho_subjective > 0.0 && self.rho_subjective <= 1.0) {
            return Err(AgentError::InvalidParams(format!("rho {} outside (0, 1]", self.rho_subjective)));
        }
        Ok(())
    }
}

/// Log-likelihood of the evidence under a program, with zero-probability
/// observations charged [`IMPOSSIBLE_LOG_LIKELIHOOD`] each.
pub fn score_program(program: &RuleProgram, layout: &Layout, views: &[BoxView], evidence: &Evidence, rho: f64) -> f64 {
    let h = Hypothesis::Program(program.clone());
    evidence
        .attempts()
        .map(|(b, k, y)| {
            let l: f64 = likelihood(&h, layout, views, b, k, y, rho);
            if l > 0.0 {
                l.ln()
            } else {
                IMPOSSIBLE_LOG_LIKELIHOOD
            }
        })
        .sum()
}

/// A parsed backend reply.
#[derive(Debug, Clone, PartialEq)]
pub enum LlmReply {
    Program(RuleProgram),
    Observe(BoxIndex),
}

/// Strips code fences, then reads either `PICK UP <box>` (when observing is
/// allowed) or a rule program that only names known constants.
pub fn parse_llm_reply(text: &str, layout: &Layout, allow_observe: bool) -> Result<LlmReply, String> {
    let body: String = text
        .trim()
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let body = body.trim();
    let words: Vec<&str> = body.split_whitespace().collect();
    if words.len() >= 2 && words[0].eq_ignore_ascii_case("pick") && words[1].eq_ignore_ascii_case("up") {
        if !allow_observe {
            return Err("observing boxes is not possible in this game".into());
        }
        let id = words[2..].join(" ");
        let id = id.trim_matches(|c: char| c == '"' || c == '\'' || c == '.');
        return layout.box_index(id).map(LlmReply::Observe).map_err(|e| e.to_string());
    }
    let program = parse_rule(body).map_err(|e| e.to_string())?;
    program.check_constants(layout).map_err(|e| e.to_string())?;
    Ok(LlmReply::Program(program))
}

struct Session<'a, B: ?Sized> {
    backend: &'a B,
    layout: &'a Layout,
    variant: LlmVariant,
}

impl<B: CompletionBackend + ?Sized> Session<'_, B> {
    fn messages(&self, views: &[BoxView], evidence: &Evidence, worst: Option<&RuleProgram>) -> Vec<ChatMessage> {
        match (self.variant, worst) {
            (LlmVariant::Partial, w) => prompts::partial_prompt(self.layout, views, evidence, w.map(|p| p.print()).as_deref()),
            (_, None) => prompts::generate_messages(self.layout),
            (v, Some(w)) => prompts::refine_messages(self.layout, &w.print(), evidence, v.unreliable()),
        }
    }

    /// Asks for a reply, repairs once, then falls back to a fresh generate
    /// request. `Ok(None)` means all three replies were unusable.
    fn request(&self, views: &[BoxView], evidence: &Evidence, worst: Option<&RuleProgram>) -> Result<Option<LlmReply>, AgentError> {
        let allow = self.variant == LlmVariant::Partial;
        let mut messages = self.messages(views, evidence, worst);
        let reply = self.backend.complete(&messages)?;
        let err = match parse_llm_reply(&reply, self.layout, allow) {
            Ok(r) => return Ok(Some(r)),
            Err(e) => e,
        };
        if !reply.trim().is_empty() {
            messages.push(ChatMessage::assistant(reply));
        }
        messages.push(prompts::repair_message(&err, allow));
        let repaired = self.backend.complete(&messages)?;
        if let Ok(r) = parse_llm_reply(&repaired, self.layout, allow) {
            return Ok(Some(r));
        }
        let fresh = self.messages(views, evidence, None);
        let redraw = self.backend.complete(&fresh)?;
        Ok(parse_llm_reply(&redraw, self.layout, allow).ok())
    }
}

fn program(p: &Particle<f64>) -> &RuleProgram {
    match &p.hypothesis {
        Hypothesis::Program(prog) => prog,
        _ => unreachable!("LLM particles are programs"),
    }
}

fn scores(particles: &[Particle<f64>], layout: &Layout, views: &[BoxView], evidence: &Evidence, rho: f64) -> Vec<f64> {
    particles.iter().map(|p| score_program(program(p), layout, views, evidence, rho)).collect()
}

fn weighted(particles: &[Particle<f64>], layout: &Layout, views: &[BoxView], evidence: &Evidence, rho: f64) -> Result<ParticleSet<f64>, AgentError> {
    let mut ps = ParticleSet::from_particles(particles.iter().map(|p| Particle { weight: 1.0, ..p.clone() }).collect(), rho)?;
    ps.reweight_from_scores(&scores(particles, layout, views, evidence, rho))?;
    Ok(ps)
}

/// Runs one LLM-PS episode. Each trial the backend either fills a missing
/// particle or rewrites the worst-scoring one; under partial observability
/// it may instead pick a box up. All programs are then rescored on the
/// evidence and the attempt is chosen by EIG.
pub fn run_llm_ps_episode<B: CompletionBackend + ?Sized, R: Rng + ?Sized>(
    params: &LlmParams,
    layout: Arc<Layout>,
    env_config: &EnvConfig,
    backend: &B,
    rng: &mut R,
) -> Result<EpisodeOutput, AgentError> {
    params.validate()?;
    let rho = params.rho_subjective;
    let mut env = Environment::new(layout.clone(), env_config.clone())?;
    let session = Session { backend, layout: &layout, variant: params.variant };
    let mut evidence = Evidence::new();
    let mut traj = Trajectory::new("", params.variant.name());
    traj.metadata.env_seed = Some(env_config.rng_seed);
    traj.metadata.params.insert("n_particles".into(), params.n_particles.to_string());
    traj.metadata.params.insert("rho_subjective".into(), rho.to_string());
    let mut particles: Vec<Particle<f64>> = Vec::new();
    let mut ps = ParticleSet::uniform(Vec::new(), rho, 0);
    let mut log = Vec::new();

    while !env.is_terminal() {
        let trial = env.state().trial_index + 1;
        let views = env.box_views();
        let worst = if particles.len() < params.n_particles {
            None
        } else {
            let s = scores(&particles, &layout, &views, &evidence, rho);
            (0..particles.len())
                .min_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap().then(particles[a].born.cmp(&particles[b].born)))
        };
        let worst_program = worst.map(|i| program(&particles[i]).clone());

        let observe = match session.request(&views, &evidence, worst_program.as_ref())? {
            Some(LlmReply::Observe(b)) => Some(Action::Observe { box_: b }),
            Some(LlmReply::Program(prog)) => {
                let particle = Particle { hypothesis: Hypothesis::Program(prog), weight: 0.0, born: trial };
                match worst {
                    Some(i) => particles[i] = particle,
                    None => particles.push(particle),
                }
                None
            }
            None if particles.is_empty() => {
                return Err(AgentError::MalformedProgram("no usable program after repair and redraw".into()));
            }
            None => None,
        };
        let action = match observe {
            Some(a) => a,
            None if particles.len() < params.n_particles => continue,
            None => {
                ps = weighted(&particles, &layout, &views, &evidence, rho)?;
                let ctx = Context { layout: &layout, views: &views };
                crate::smc::select_action(&ps, ctx, &env.state().open, rng)?
            }
        };
        let outcome = env.step(action)?;
        evidence.push(action, outcome);
        traj.push(action, outcome);
        if !particles.is_empty() {
            ps = weighted(&particles, &layout, &env.box_views(), &evidence, rho)?;
        }
        log.push(RunLogEntry::new(trial, action, outcome, &layout, &ps));
    }
    traj.metadata.completed = env.state().all_open();
    if !ps.is_empty() {
        finish(&mut traj, &ps, &layout, rng);
    }
    Ok(EpisodeOutput { trajectory: traj, log })
}
