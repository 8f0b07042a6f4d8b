//! Rule induction in the Box Task.
//!
//! The crate is split along the lines of the experiment:
//!
//! - [`env`]: the Box Task as a partially observable environment.
//! - [`rulelang`]: a small predicate language for executable hypotheses.
//! - [`smc`]: weighted particle populations, likelihood updates, resampling
//!   and expected-information-gain scoring.
//! - [`proposal`]: the Sets-of-Constraints proposal distribution and its
//!   lesion variants.
//! - [`agents`]: episode runners (SoC, program-synthesis and ReAct agents).
//! - [`llm_backend`]: completion backends (wire types and a scripted mock).
//! - [`fitting`]: probability tables, floored log-likelihood, grid search
//!   and model comparison statistics.
//! - [`trajectory`]: the trajectory interchange format shared by every tool.
//!
//! Numerical code that manipulates weights and likelihoods is generic over
//! [`Real`]; `f64` aliases are provided at the crate root.

pub mod agents;
pub mod config;
pub mod env;
pub mod fitting;
pub mod hypothesis;
pub mod llm_backend;
pub mod proposal;
pub mod rulelang;
pub mod smc;
pub mod stats;
pub mod trajectory;

use std::fmt::{Debug, Display};

/// Floating point scalar used by the inference and fitting code: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for configuration constants.
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Mixes a base seed with stream identifiers (splitmix64), so parallel work
/// gets independent, reproducible seeds.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    stream.iter().fold(mix(base), |acc, &s| mix(acc ^ mix(s)))
}

/// Stable 64-bit FNV-1a hash of a string, for seeding by name.
pub fn name_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub type ParticleSet = smc::ParticleSet<f64>;
pub type Particle = smc::Particle<f64>;
pub type ProbabilityTable = fitting::ProbabilityTable<f64>;
pub type ParticleSet32 = smc::ParticleSet<f32>;

pub use env::{Action, BoxDef, BoxIndex, EnvConfig, EnvState, Environment, KeyDef, KeyIndex, Layout, Outcome};
pub use hypothesis::{Hypothesis, SoC};
pub use rulelang::{parse_rule, RuleProgram};
pub use trajectory::Trajectory;
