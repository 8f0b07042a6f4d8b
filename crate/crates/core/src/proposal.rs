//! The Sets-of-Constraints proposal `q(h)` and the four model variants.
//!
//! `q(h)` mixes two components. With probability `p_gen` the online
//! generator builds a fresh mapping one box at a time, conditioned on the
//! evidence; otherwise one of the pre-specified salient rules is drawn by its
//! prior. The number (true) rule gets prior `p_t`; the remaining
//! `1 - p_gen - p_t` is split evenly between color, shape and order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{KeyIndex, Layout};
use crate::hypothesis::{Hypothesis, NamedRule, SoC};
use crate::smc::{Evidence, ProposalSource};

pub const DEFAULT_P_T: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProposalError {
    #[error("invalid proposal configuration: {0}")]
    Invalid(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SocVariant {
    #[serde(rename = "soc-l")]
    Lesioned,
    #[serde(rename = "soc-rel")]
    Rel,
    #[serde(rename = "soc-gen")]
    Gen,
    #[serde(rename = "soc-full")]
    Full,
}

impl SocVariant {
    pub const ALL: [SocVariant; 4] = [SocVariant::Lesioned, SocVariant::Rel, SocVariant::Gen, SocVariant::Full];

    pub fn name(self) -> &'static str {
        match self {
            SocVariant::Lesioned => "soc-l",
            SocVariant::Rel => "soc-rel",
            SocVariant::Gen => "soc-gen",
            SocVariant::Full => "soc-full",
        }
    }

    /// Number of free parameters counted by AIC.
    pub fn free_parameters(self) -> u32 {
        match self {
            SocVariant::Lesioned => 0,
            SocVariant::Rel | SocVariant::Gen => 1,
            SocVariant::Full => 2,
        }
    }

    /// `(subjective rho, p_gen)` after applying the variant's lesions.
    pub fn effective(self, theta: &Theta) -> (f64, f64) {
        let rho = theta.rho_mean();
        match self {
            SocVariant::Lesioned => (1.0, 0.0),
            SocVariant::Rel => (rho, 0.0),
            SocVariant::Gen => (1.0, theta.p_gen),
            SocVariant::Full => (rho, theta.p_gen),
        }
    }
}

impl fmt::Display for SocVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SocVariant {
    type Err = ProposalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "soc-l" | "soc-lesioned" | "lesioned" => Ok(SocVariant::Lesioned),
            "soc-rel" | "rel" => Ok(SocVariant::Rel),
            "soc-gen" | "gen" => Ok(SocVariant::Gen),
            "soc-full" | "full" => Ok(SocVariant::Full),
            _ => Err(ProposalError::UnknownVariant(s.to_string())),
        }
    }
}

/// A point in parameter space. `rho_prior` is a Beta(α, β) prior whose mean
/// is used as the subjective reliability; `None` means reliable (`rho = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub rho_prior: Option<(f64, f64)>,
    pub p_gen: f64,
    pub p_t: f64,
}

impl Theta {
    pub fn new(rho_prior: Option<(f64, f64)>, p_gen: f64) -> Self {
        Theta { rho_prior, p_gen, p_t: DEFAULT_P_T }
    }

    /// `α / (α + β)`, or 1 without a prior.
    pub fn rho_mean(&self) -> f64 {
        self.rho_prior.map_or(1.0, |(a, b)| a / (a + b))
    }

    pub fn label(&self) -> String {
        match self.rho_prior {
            Some((a, b)) => format!("rho=({a},{b}) p_gen={} p_t={}", self.p_gen, self.p_t),
            None => format!("rho=1 p_gen={} p_t={}", self.p_gen, self.p_t),
        }
    }
}

impl Default for Theta {
    fn default() -> Self {
        Theta::new(None, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrespecifiedRule {
    pub rule: NamedRule,
    pub soc: SoC,
    pub prior: f64,
}

/// The four salient rules over `layout` with their prior mass.
pub fn prespecified_rules(layout: &Layout, p_t: f64, p_gen: f64) -> Result<Vec<PrespecifiedRule>, ProposalError> {
    if !(p_t > 0.0 && p_t < 1.0) {
        return Err(ProposalError::Invalid(format!("p_t = {p_t} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&p_gen) {
        return Err(ProposalError::Invalid(format!("p_gen = {p_gen} must lie in [0, 1]")));
    }
    let rest = 1.0 - p_gen - p_t;
    if rest < -1e-12 {
        return Err(ProposalError::Invalid(format!("p_gen + p_t = {} exceeds 1", p_gen + p_t)));
    }
    let rest = rest.max(0.0);
    Ok(NamedRule::ALL
        .into_iter()
        .map(|rule| PrespecifiedRule {
            rule,
            soc: rule.soc(layout),
            prior: if rule == NamedRule::Number { p_t } else { rest / 3.0 },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub p_gen: f64,
    pub p_t: f64,
    pub rho_prior: Option<(f64, f64)>,
    pub prespecified: Vec<PrespecifiedRule>,
}

impl ProposalConfig {
    pub fn new(layout: &Layout, p_gen: f64, p_t: f64, rho_prior: Option<(f64, f64)>) -> Result<Self, ProposalError> {
        let config = ProposalConfig { p_gen, p_t, rho_prior, prespecified: prespecified_rules(layout, p_t, p_gen)? };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ProposalError> {
        let total: f64 = self.prespecified.iter().map(|r| r.prior).sum::<f64>() + self.p_gen;
        if (total - 1.0).abs() > 1e-9 {
            return Err(ProposalError::Invalid(format!("prior mass sums to {total}, not 1")));
        }
        if self.prespecified.iter().any(|r| r.prior < 0.0) {
            return Err(ProposalError::Invalid("negative prior".into()));
        }
        if let Some((a, b)) = self.rho_prior {
            if !(a > 0.0 && b > 0.0) {
                return Err(ProposalError::Invalid(format!("Beta({a}, {b}) prior needs positive parameters")));
            }
        }
        Ok(())
    }
}

/// Where a proposal draw came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Generator,
    Prespecified(NamedRule),
}

/// Online generator: a box already opened keeps its opener; every other box
/// gets one key drawn with weight `(1 - rho)^f`, where `f` counts failed
/// attempts of that key on that box. If every key is ruled out the draw
/// falls back to uniform.
pub fn generator_sample<R: Rng + ?Sized>(layout: &Layout, evidence: &Evidence, rho: f64, rng: &mut R) -> SoC {
    let failures = evidence.failure_counts(layout.n_boxes(), layout.n_keys());
    let assignment: Vec<KeyIndex> = layout
        .box_indices()
        .map(|b| {
            if let Some(k) = evidence.opener(b) {
                return k;
            }
            let weights: Vec<f64> = failures[b.0].iter().map(|&f| (1.0 - rho).powi(f as i32)).collect();
            match WeightedIndex::new(&weights) {
                Ok(dist) => KeyIndex(dist.sample(rng)),
                Err(_) => KeyIndex(rng.random_range(0..layout.n_keys())),
            }
        })
        .collect();
    SoC::from_assignment(&assignment)
}

/// Draws from the mixture: the generator with probability `p_gen`,
/// otherwise a pre-specified rule in proportion to its prior.
pub fn sample_hypothesis<R: Rng + ?Sized>(
    config: &ProposalConfig,
    layout: &Layout,
    evidence: &Evidence,
    rho: f64,
    rng: &mut R,
) -> (SoC, Origin) {
    let prespecified_mass: f64 = config.prespecified.iter().map(|r| r.prior).sum();
    let use_generator = config.p_gen >= 1.0 || prespecified_mass <= 0.0 || rng.random_bool(config.p_gen.clamp(0.0, 1.0));
    if use_generator {
        return (generator_sample(layout, evidence, rho, rng), Origin::Generator);
    }
    let dist = WeightedIndex::new(config.prespecified.iter().map(|r| r.prior)).expect("positive prespecified mass");
    let pick = &config.prespecified[dist.sample(rng)];
    (pick.soc.clone(), Origin::Prespecified(pick.rule))
}

/// `q(h)` bound to a layout and the agent's subjective reliability.
#[derive(Debug, Clone)]
pub struct SocProposal {
    pub layout: Arc<Layout>,
    pub config: ProposalConfig,
    pub rho: f64,
}

impl ProposalSource for SocProposal {
    fn draw<R: Rng + ?Sized>(&self, evidence: &Evidence, rng: &mut R) -> Hypothesis {
        match sample_hypothesis(&self.config, &self.layout, evidence, self.rho, rng) {
            (soc, Origin::Generator) => Hypothesis::Soc(soc),
            (soc, Origin::Prespecified(rule)) => Hypothesis::Named { rule, soc },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, BoxIndex, Outcome};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prior_mass_sums_to_one() {
        let l = Layout::standard();
        let c = ProposalConfig::new(&l, 0.3, 0.02, Some((2.0, 1.0))).unwrap();
        let number = c.prespecified.iter().find(|r| r.rule == NamedRule::Number).unwrap();
        assert_eq!(number.prior, 0.02);
        let color = c.prespecified.iter().find(|r| r.rule == NamedRule::Color).unwrap();
        assert!((color.prior - 0.68 / 3.0).abs() < 1e-12);
        assert!(ProposalConfig::new(&l, 0.99, 0.02, None).is_err());
        assert!(ProposalConfig::new(&l, 0.5, 0.0, None).is_err());
        assert!(ProposalConfig::new(&l, 0.5, 0.02, Some((0.0, 1.0))).is_err());
    }

    #[test]
    fn variant_lesions() {
        let theta = Theta::new(Some((3.0, 1.0)), 0.4);
        assert_eq!(SocVariant::Lesioned.effective(&theta), (1.0, 0.0));
        assert_eq!(SocVariant::Rel.effective(&theta), (0.75, 0.0));
        assert_eq!(SocVariant::Gen.effective(&theta), (1.0, 0.4));
        assert_eq!(SocVariant::Full.effective(&theta), (0.75, 0.4));
        assert_eq!("SoC-Full".parse::<SocVariant>().unwrap(), SocVariant::Full);
        assert!("soc-x".parse::<SocVariant>().is_err());
    }

    #[test]
    fn generator_forces_openers_and_excludes_refuted_keys() {
        let l = Layout::standard();
        let pink = l.box_index("pink").unwrap();
        let white = l.box_index("white").unwrap();
        let grey2 = l.key_index("grey2").unwrap();
        let white7 = l.key_index("white7").unwrap();
        let mut ev = Evidence::new();
        ev.push(Action::Attempt { box_: white, key: white7 }, Outcome::Attempt { success: false });
        ev.push(Action::Attempt { box_: pink, key: grey2 }, Outcome::Attempt { success: true });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let soc = generator_sample(&l, &ev, 1.0, &mut rng);
            assert_eq!(soc.keys_for(pink), vec![grey2]);
            assert!(!soc.predicts(white, white7));
            assert_eq!(soc.keys_for(BoxIndex(0)).len(), 1);
        }
    }

    #[test]
    fn mixture_endpoints() {
        let l = Layout::standard();
        let ev = Evidence::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let none = ProposalConfig::new(&l, 0.0, 0.02, None).unwrap();
        let all = ProposalConfig::new(&l, 0.98, 0.02, None).unwrap();
        let gen_only = ProposalConfig { p_gen: 1.0, p_t: 0.02, rho_prior: None, prespecified: Vec::new() };
        for _ in 0..500 {
            assert!(matches!(sample_hypothesis(&none, &l, &ev, 1.0, &mut rng).1, Origin::Prespecified(_)));
            assert_eq!(sample_hypothesis(&gen_only, &l, &ev, 1.0, &mut rng).1, Origin::Generator);
        }
        let n = (0..5000).filter(|_| sample_hypothesis(&all, &l, &ev, 1.0, &mut rng).1 == Origin::Generator).count();
        assert!(n > 4800);
    }
}
