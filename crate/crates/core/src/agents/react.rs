use std::sync::Arc;

use super::{prompts, AgentError, EpisodeOutput, RunLogEntry};
use crate::env::{Action, EnvConfig, Environment, Layout, Observability, ReliabilityMode};
use crate::llm_backend::{ChatMessage, CompletionBackend};
use crate::smc::{Evidence, ParticleSet};
use crate::trajectory::Trajectory;

/// Reads a `key, box` reply.
pub fn parse_react_action(text: &str, layout: &Layout) -> Result<Action, AgentError> {
    let cleaned = text.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '.');
    let parts: Vec<&str> = cleaned.split(',').map(str::trim).collect();
    let [key, box_] = parts.as_slice() else {
        return Err(AgentError::MalformedAction(format!("expected \"key, box\", got `{}`", text.trim())));
    };
    let key = layout.key_index(key).map_err(|e| AgentError::MalformedAction(e.to_string()))?;
    let box_ = layout.box_index(box_).map_err(|e| AgentError::MalformedAction(e.to_string()))?;
    Ok(Action::Attempt { box_, key })
}

/// Runs the ReAct baseline: each trial the backend names a key-box pair
/// directly. A malformed reply gets one correction prompt; a second one
/// aborts the episode.
pub fn run_react_episode<B: CompletionBackend + ?Sized>(
    layout: Arc<Layout>,
    env_config: &EnvConfig,
    backend: &B,
) -> Result<EpisodeOutput, AgentError> {
    if env_config.observability != Observability::Full || env_config.reliability != ReliabilityMode::Deterministic {
        return Err(AgentError::InvalidParams("ReAct runs in the fully observable, reliable condition".into()));
    }
    let mut env = Environment::new(layout.clone(), env_config.clone())?;
    let mut evidence = Evidence::new();
    let mut traj = Trajectory::new("", "react");
    traj.metadata.env_seed = Some(env_config.rng_seed);
    let empty = ParticleSet::<f64>::uniform(Vec::new(), 1.0, 0);
    let mut log = Vec::new();
    let check = |reply: &str, open: &[bool]| -> Result<Action, AgentError> {
        let action = parse_react_action(reply, &layout)?;
        if open[action.target().0] {
            return Err(AgentError::MalformedAction(format!("box `{}` is already open", layout.boxdef(action.target()).id)));
        }
        Ok(action)
    };
    while !env.is_terminal() {
        let mut messages = prompts::react_messages(&layout, &evidence);
        let reply = backend.complete(&messages)?;
        let action = match check(&reply, &env.state().open) {
            Ok(a) => a,
            Err(e) => {
                if !reply.trim().is_empty() {
                    messages.push(ChatMessage::assistant(reply));
                }
                messages.push(ChatMessage::user(format!(
                    "{e}\nRespond in the format \"key, box\" (e.g. \"red1, red\") and do not include any other text."
                )));
                match check(&backend.complete(&messages)?, &env.state().open) {
                    Ok(a) => a,
                    Err(_) => {
                        traj.metadata.aborted = true;
                        break;
                    }
                }
            }
        };
        let outcome = env.step(action)?;
        evidence.push(action, outcome);
        traj.push(action, outcome);
        log.push(RunLogEntry::new(env.state().trial_index, action, outcome, &layout, &empty));
    }
    traj.metadata.completed = env.state().all_open();
    Ok(EpisodeOutput { trajectory: traj, log })
}
