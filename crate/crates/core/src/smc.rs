//! Sequential Monte Carlo over hypotheses.
//!
//! A [`ParticleSet`] holds weighted hypotheses and a subjective reliability
//! `rho`. Attempt outcomes reweight particles through a Bernoulli likelihood:
//! a hypothesis that predicts success explains a success with probability
//! `rho` and a failure with `1 - rho`; one that predicts failure cannot
//! explain a success at all. When the effective sample size drops below half
//! the population, particles are resampled systematically and duplicated
//! slots are refilled from the proposal.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, BoxIndex, KeyIndex, Layout, Outcome};
use crate::hypothesis::Hypothesis;
use crate::rulelang::BoxView;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmcError {
    #[error("every particle has zero weight")]
    DegenerateWeights,
    #[error("no candidate actions: every box is open")]
    NoCandidates,
    #[error("empty particle set")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle<T> {
    pub hypothesis: Hypothesis,
    pub weight: T,
    /// Trial at which the particle was drawn; older particles sort first.
    pub born: u32,
}

/// Append-only history of actions and outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    records: Vec<(Action, Outcome)>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, action: Action, outcome: Outcome) {
        self.records.push((action, outcome));
    }

    pub fn records(&self) -> &[(Action, Outcome)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Attempt records as `(box, key, success)`.
    pub fn attempts(&self) -> impl Iterator<Item = (BoxIndex, KeyIndex, bool)> + '_ {
        self.records.iter().filter_map(|(a, o)| match (a, o) {
            (Action::Attempt { box_, key }, Outcome::Attempt { success }) => Some((*box_, *key, *success)),
            _ => None,
        })
    }

    /// The key that opened box `b`, if it has been opened.
    pub fn opener(&self, b: BoxIndex) -> Option<KeyIndex> {
        self.attempts().find(|&(bb, _, s)| s && bb == b).map(|(_, k, _)| k)
    }

    /// Failed attempts per `(box, key)`, indexed `[box][key]`.
    pub fn failure_counts(&self, n_boxes: usize, n_keys: usize) -> Vec<Vec<u32>> {
        let mut f = vec![vec![0u32; n_keys]; n_boxes];
        for (b, k, s) in self.attempts() {
            if !s {
                f[b.0][k.0] += 1;
            }
        }
        f
    }
}

/// `p(y | h, attempt)` given whether `h` predicts the attempt succeeds.
pub fn bernoulli_likelihood<T: Real>(predicts_success: bool, y: bool, rho: T) -> T {
    match (predicts_success, y) {
        (true, true) => rho,
        (true, false) => T::one() - rho,
        (false, true) => T::zero(),
        (false, false) => T::one(),
    }
}

/// Likelihood of an attempt outcome under a hypothesis.
pub fn likelihood<T: Real>(
    h: &Hypothesis,
    layout: &Layout,
    views: &[BoxView],
    b: BoxIndex,
    k: KeyIndex,
    y: bool,
    rho: T,
) -> T {
    bernoulli_likelihood(h.predicts(layout, views, b, k), y, rho)
}

/// Log-likelihood of every attempt in `evidence`; `-inf` when some success
/// is impossible under `h`.
pub fn evidence_log_likelihood<T: Real>(
    h: &Hypothesis,
    layout: &Layout,
    views: &[BoxView],
    evidence: &Evidence,
    rho: T,
) -> T {
    evidence.attempts().map(|(b, k, y)| likelihood(h, layout, views, b, k, y, rho).ln()).sum()
}

/// Expected information gain of an attempt for a normalized weight vector,
/// given each particle's success prediction. Outcomes with zero predictive
/// probability contribute nothing; `0 log 0 = 0`.
pub fn expected_information_gain<T: Real>(weights: &[T], predicts: &[bool], rho: T) -> T {
    debug_assert_eq!(weights.len(), predicts.len());
    let mut total = T::zero();
    for y in [false, true] {
        let p_y: T = weights
            .iter()
            .zip(predicts)
            .map(|(&w, &s)| w * bernoulli_likelihood(s, y, rho))
            .sum();
        if p_y <= T::zero() {
            continue;
        }
        // KL(posterior_y || prior) = sum_i post_i * ln(post_i / w_i) = sum_i post_i * ln(L_i / p_y)
        let kl: T = weights
            .iter()
            .zip(predicts)
            .filter_map(|(&w, &s)| {
                let l = bernoulli_likelihood(s, y, rho);
                (w > T::zero() && l > T::zero()).then(|| w * l / p_y * (l / p_y).ln())
            })
            .sum();
        total += p_y * kl;
    }
    total.max(T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "fraction", rename_all = "snake_case")]
pub enum Rejuvenation {
    /// Refill every slot that resampling filled with a copy of an earlier slot.
    Duplicates,
    /// Refill this fraction of the population, chosen uniformly.
    Fraction(f64),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    /// Resample when `ESS < threshold * N`.
    pub threshold: f64,
    pub rejuvenation: Rejuvenation,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig { threshold: 0.5, rejuvenation: Rejuvenation::Duplicates }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub resampled: bool,
    pub rejuvenated: usize,
    pub full_redraw: bool,
}

/// Anything that can propose fresh hypotheses given the evidence so far.
pub trait ProposalSource {
    fn draw<R: Rng + ?Sized>(&self, evidence: &Evidence, rng: &mut R) -> Hypothesis;
}

/// Shared view of the task used when hypotheses are evaluated.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub layout: &'a Layout,
    pub views: &'a [BoxView],
}

/// Success predictions and EIG for every candidate attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScores<T> {
    pub candidates: Vec<(BoxIndex, KeyIndex)>,
    pub eig: Vec<T>,
    /// Posterior probability that the pair's hypothesis predicts success.
    pub predicted_success: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet<T> {
    particles: Vec<Particle<T>>,
    rho: T,
    degenerate: bool,
}

impl<T: Real> ParticleSet<T> {
    /// Uniformly weighted particles, as when drawing directly from the prior.
    pub fn uniform(hypotheses: Vec<Hypothesis>, rho: T, born: u32) -> Self {
        let n = T::from_usize(hypotheses.len().max(1)).unwrap();
        let particles = hypotheses.into_iter().map(|hypothesis| Particle { hypothesis, weight: T::one() / n, born }).collect();
        ParticleSet { particles, rho, degenerate: false }
    }

    pub fn from_particles(particles: Vec<Particle<T>>, rho: T) -> Result<Self, SmcError> {
        let mut ps = ParticleSet { particles, rho, degenerate: false };
        ps.normalize()?;
        Ok(ps)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn weights(&self) -> Vec<T> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    /// True after an update left every weight at zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn normalize(&mut self) -> Result<(), SmcError> {
        if self.particles.is_empty() {
            return Err(SmcError::Empty);
        }
        let total: T = self.particles.iter().map(|p| p.weight).sum();
        if !(total > T::zero()) || !total.is_finite() {
            self.degenerate = true;
            return Err(SmcError::DegenerateWeights);
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        self.degenerate = false;
        Ok(())
    }

    /// `w_i <- w_i * p(y | attempt, h_i)`, renormalized. On zero total mass
    /// the weights are left untouched and the set is flagged degenerate.
    pub fn update_weights(&mut self, ctx: Context<'_>, b: BoxIndex, k: KeyIndex, y: bool) -> Result<(), SmcError> {
        let updated: Vec<T> = self
            .particles
            .iter()
            .map(|p| p.weight * likelihood(&p.hypothesis, ctx.layout, ctx.views, b, k, y, self.rho))
            .collect();
        let total: T = updated.iter().copied().sum();
        if !(total > T::zero()) {
            self.degenerate = true;
            return Err(SmcError::DegenerateWeights);
        }
        for (p, w) in self.particles.iter_mut().zip(updated) {
            p.weight = w / total;
        }
        self.degenerate = false;
        Ok(())
    }

    /// Sets `w_i ∝ exp(score_i)`; scores are log-likelihoods.
    pub fn reweight_from_scores(&mut self, scores: &[T]) -> Result<(), SmcError> {
        let best = scores.iter().copied().fold(T::neg_infinity(), T::max);
        if !best.is_finite() {
            self.degenerate = true;
            return Err(SmcError::DegenerateWeights);
        }
        for (p, &s) in self.particles.iter_mut().zip(scores) {
            p.weight = (s - best).exp();
        }
        self.normalize()
    }

    pub fn ess(&self) -> T {
        let sq: T = self.particles.iter().map(|p| p.weight * p.weight).sum();
        T::one() / sq
    }

    /// Index of the highest-weight particle; the oldest wins ties.
    pub fn best_index(&self) -> Option<usize> {
        self.particles
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| b.weight.partial_cmp(&a.weight).unwrap().then(a.born.cmp(&b.born)))
            .map(|(i, _)| i)
    }

    /// Indices of every particle tied (within rounding) at the maximum weight.
    pub fn best_indices(&self) -> Vec<usize> {
        let max = self.particles.iter().map(|p| p.weight).fold(T::neg_infinity(), T::max);
        let tol = T::of(1e-12);
        (0..self.len()).filter(|&i| self.particles[i].weight >= max - tol).collect()
    }

    pub fn replace(&mut self, index: usize, hypothesis: Hypothesis, born: u32) {
        self.particles[index].hypothesis = hypothesis;
        self.particles[index].born = born;
    }

    /// Systematic resampling: one uniform offset, N evenly spaced pointers.
    /// Returns the ancestor index of each new slot.
    pub fn systematic_resample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        let n = self.particles.len();
        let nt = T::from_usize(n).unwrap();
        let offset = T::of(rng.random::<f64>()) / nt;
        let mut ancestors = Vec::with_capacity(n);
        let mut cumulative = self.particles[0].weight;
        let mut i = 0;
        for slot in 0..n {
            let u = offset + T::from_usize(slot).unwrap() / nt;
            while u > cumulative && i + 1 < n {
                i += 1;
                cumulative += self.particles[i].weight;
            }
            ancestors.push(i);
        }
        let w = T::one() / nt;
        self.particles = ancestors
            .iter()
            .map(|&a| Particle { weight: w, ..self.particles[a].clone() })
            .collect();
        ancestors
    }

    /// Resamples when `ESS < threshold * N`, then refills slots with fresh
    /// proposal draws. A degenerate set is replaced wholesale.
    ///
    /// Fresh draws are checked against the full evidence: a draw's weight is
    /// `1/N` scaled by its evidence likelihood relative to the best surviving
    /// particle (capped at 1), so draws already refuted by the evidence enter
    /// with zero weight.
    pub fn maybe_resample_rejuvenate<P: ProposalSource, R: Rng + ?Sized>(
        &mut self,
        ctx: Context<'_>,
        proposal: &P,
        evidence: &Evidence,
        config: &ResampleConfig,
        born: u32,
        rng: &mut R,
    ) -> ResampleReport {
        let n = self.particles.len();
        if self.degenerate {
            return self.full_redraw(ctx, proposal, evidence, born, rng);
        }
        if self.ess().to_f64_lossy() >= config.threshold * n as f64 {
            return ResampleReport::default();
        }
        let ancestors = self.systematic_resample(rng);
        let slots: Vec<usize> = match config.rejuvenation {
            Rejuvenation::None => Vec::new(),
            Rejuvenation::Duplicates => (1..n).filter(|&i| ancestors[i] == ancestors[i - 1]).collect(),
            Rejuvenation::Fraction(f) => {
                let m = ((f.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
                rand::seq::index::sample(rng, n, m).into_vec()
            }
        };
        if slots.is_empty() {
            return ResampleReport { resampled: true, ..Default::default() };
        }
        let survivor_best = (0..n)
            .filter(|i| !slots.contains(i))
            .map(|i| evidence_log_likelihood(&self.particles[i].hypothesis, ctx.layout, ctx.views, evidence, self.rho))
            .fold(T::neg_infinity(), T::max);
        let fresh: Vec<(Hypothesis, T)> = slots
            .iter()
            .map(|_| {
                let h = proposal.draw(evidence, rng);
                let ll = evidence_log_likelihood(&h, ctx.layout, ctx.views, evidence, self.rho);
                (h, ll)
            })
            .collect();
        let reference = if survivor_best.is_finite() {
            survivor_best
        } else {
            fresh.iter().map(|(_, ll)| *ll).fold(T::neg_infinity(), T::max)
        };
        let w = T::one() / T::from_usize(n).unwrap();
        for (&slot, (h, ll)) in slots.iter().zip(fresh) {
            let factor = if reference.is_finite() { (ll - reference).exp().min(T::one()) } else { T::one() };
            self.particles[slot] = Particle { hypothesis: h, weight: w * factor, born };
        }
        if self.normalize().is_err() {
            for p in &mut self.particles {
                p.weight = w;
            }
            self.degenerate = false;
        }
        ResampleReport { resampled: true, rejuvenated: slots.len(), full_redraw: false }
    }

    /// Replaces every particle with a fresh draw. Draws are weighted by their
    /// evidence likelihood; if none is consistent, weights are uniform.
    pub fn full_redraw<P: ProposalSource, R: Rng + ?Sized>(
        &mut self,
        ctx: Context<'_>,
        proposal: &P,
        evidence: &Evidence,
        born: u32,
        rng: &mut R,
    ) -> ResampleReport {
        let n = self.particles.len();
        let fresh: Vec<Hypothesis> = (0..n).map(|_| proposal.draw(evidence, rng)).collect();
        let scores: Vec<T> = fresh
            .iter()
            .map(|h| evidence_log_likelihood(h, ctx.layout, ctx.views, evidence, self.rho))
            .collect();
        let w = T::one() / T::from_usize(n).unwrap();
        self.particles = fresh.into_iter().map(|hypothesis| Particle { hypothesis, weight: w, born }).collect();
        self.degenerate = false;
        if self.reweight_from_scores(&scores).is_err() {
            for p in &mut self.particles {
                p.weight = w;
            }
            self.degenerate = false;
        }
        ResampleReport { resampled: true, rejuvenated: n, full_redraw: true }
    }

    /// Per-particle success predictions for one attempt.
    pub fn predictions(&self, ctx: Context<'_>, b: BoxIndex, k: KeyIndex) -> Vec<bool> {
        self.particles.iter().map(|p| p.hypothesis.predicts(ctx.layout, ctx.views, b, k)).collect()
    }

    pub fn eig(&self, ctx: Context<'_>, b: BoxIndex, k: KeyIndex) -> T {
        expected_information_gain(&self.weights(), &self.predictions(ctx, b, k), self.rho)
    }

    /// Scores every attempt on an unopened box.
    pub fn score_candidates(&self, ctx: Context<'_>, open: &[bool]) -> CandidateScores<T> {
        let weights = self.weights();
        let mut scores = CandidateScores { candidates: Vec::new(), eig: Vec::new(), predicted_success: Vec::new() };
        for b in ctx.layout.box_indices().filter(|b| !open[b.0]) {
            for k in ctx.layout.key_indices() {
                let predicts = self.predictions(ctx, b, k);
                let p: T = weights.iter().zip(&predicts).filter(|(_, &s)| s).map(|(&w, _)| w).sum();
                scores.candidates.push((b, k));
                scores.eig.push(expected_information_gain(&weights, &predicts, self.rho));
                scores.predicted_success.push(p);
            }
        }
        scores
    }
}

/// Relative tolerance used when comparing scores for ties.
pub fn tie_tolerance<T: Real>() -> T {
    T::epsilon().sqrt()
}

/// Indices of the maximal entries of `values` (within [`tie_tolerance`]).
pub fn argmax_ties<T: Real>(values: &[T]) -> Vec<usize> {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let tol = tie_tolerance::<T>() * (T::one() + max.abs());
    (0..values.len()).filter(|&i| values[i] >= max - tol).collect()
}

/// The attempt with maximal EIG over unopened boxes and all keys, ties
/// broken uniformly at random. When no attempt is informative, the agent
/// exploits: it picks among the attempts most likely to succeed under the
/// posterior.
pub fn select_action<T: Real, R: Rng + ?Sized>(
    ps: &ParticleSet<T>,
    ctx: Context<'_>,
    open: &[bool],
    rng: &mut R,
) -> Result<Action, SmcError> {
    let scores = ps.score_candidates(ctx, open);
    if scores.candidates.is_empty() {
        return Err(SmcError::NoCandidates);
    }
    let max_eig = scores.eig.iter().copied().fold(T::neg_infinity(), T::max);
    let ties = if max_eig > tie_tolerance::<T>() {
        argmax_ties(&scores.eig)
    } else {
        argmax_ties(&scores.predicted_success)
    };
    let (b, k) = scores.candidates[ties[rng.random_range(0..ties.len())]];
    Ok(Action::Attempt { box_: b, key: k })
}
