use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{finish, AgentError, EpisodeOutput, RunLogEntry};
use crate::env::{Action, EnvConfig, Environment, Layout, Outcome};
use crate::proposal::{ProposalConfig, SocProposal, SocVariant, Theta};
use crate::smc::{Context, Evidence, ParticleSet, ProposalSource, ResampleConfig};
use crate::trajectory::Trajectory;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocParams {
    pub n_particles: usize,
    pub variant: SocVariant,
    pub theta: Theta,
    #[serde(default)]
    pub resample: ResampleConfig,
}

impl SocParams {
    pub fn new(variant: SocVariant, theta: Theta, n_particles: usize) -> Self {
        SocParams { n_particles, variant, theta, resample: ResampleConfig::default() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.n_particles == 0 {
            return Err(AgentError::InvalidParams("N must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.resample.threshold) {
            return Err(AgentError::InvalidParams(format!("resample threshold {} outside [0, 1]", self.resample.threshold)));
        }
        Ok(())
    }

    /// The proposal after the variant's lesions.
    pub fn proposal(&self, layout: Arc<Layout>) -> Result<SocProposal, AgentError> {
        let (rho, p_gen) = self.variant.effective(&self.theta);
        let rho_prior = if rho < 1.0 { self.theta.rho_prior } else { None };
        let config = ProposalConfig::new(&layout, p_gen, self.theta.p_t, rho_prior)?;
        Ok(SocProposal { layout, config, rho })
    }
}

/// Runs one SoC episode: particles drawn from the proposal, then EIG-driven
/// attempts with Bayesian updates and resampling until the episode ends.
pub fn run_soc_episode<R: Rng + ?Sized>(
    params: &SocParams,
    layout: Arc<Layout>,
    env_config: &EnvConfig,
    rng: &mut R,
) -> Result<EpisodeOutput, AgentError> {
    params.validate()?;
    let proposal = params.proposal(layout.clone())?;
    let empty = Evidence::new();
    let initial = (0..params.n_particles).map(|_| proposal.draw(&empty, rng)).collect();
    let ps = ParticleSet::<f64>::uniform(initial, proposal.rho, 0);
    let mut out = run_soc_from(ps, &proposal, &params.resample, layout, env_config, rng)?;
    let meta = &mut out.trajectory.metadata.params;
    meta.insert("n_particles".into(), params.n_particles.to_string());
    meta.insert("theta".into(), params.theta.label());
    out.trajectory.variant = params.variant.name().into();
    Ok(out)
}

/// The SoC loop from a given initial particle set.
pub fn run_soc_from<T: Real, P: ProposalSource, R: Rng + ?Sized>(
    mut ps: ParticleSet<T>,
    proposal: &P,
    resample: &ResampleConfig,
    layout: Arc<Layout>,
    env_config: &EnvConfig,
    rng: &mut R,
) -> Result<EpisodeOutput, AgentError> {
    if ps.is_empty() {
        return Err(AgentError::InvalidParams("empty particle set".into()));
    }
    let mut env = Environment::new(layout.clone(), env_config.clone())?;
    let mut evidence = Evidence::new();
    let mut traj = Trajectory::new("", "soc");
    traj.metadata.env_seed = Some(env_config.rng_seed);
    let mut log = Vec::new();
    while !env.is_terminal() {
        let views = env.box_views();
        let ctx = Context { layout: &layout, views: &views };
        let action = crate::smc::select_action(&ps, ctx, &env.state().open, rng)?;
        let outcome = env.step(action)?;
        evidence.push(action, outcome);
        traj.push(action, outcome);
        if let (Action::Attempt { box_, key }, Outcome::Attempt { success }) = (action, outcome) {
            let _ = ps.update_weights(ctx, box_, key, success);
            ps.maybe_resample_rejuvenate(ctx, proposal, &evidence, resample, env.state().trial_index, rng);
        }
        log.push(RunLogEntry::new(env.state().trial_index, action, outcome, &layout, &ps));
    }
    traj.metadata.completed = env.state().all_open();
    finish(&mut traj, &ps, &layout, rng);
    Ok(EpisodeOutput { trajectory: traj, log })
}
