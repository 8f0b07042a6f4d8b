//! The Box Task environment.
//!
//! Five boxes, thirteen keys and a hidden rule: a box opens with the key whose
//! number equals the count of shapes printed on the box. The agent can pick a
//! box up to reveal that count (`Observe`) or try a key on a box (`Attempt`).
//! Correct attempts succeed with the episode's realized key reliability.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rulelang::BoxView;

/// Largest shape count representable in a [`NumberSet`].
pub const MAX_COUNT: u8 = 31;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("attempt on box `{0}` which is already open")]
    AttemptOnOpenBox(String),
    #[error("unknown box `{0}`")]
    UnknownBox(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("episode is over")]
    Terminal,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxIndex(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyIndex(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyDef {
    pub id: String,
    pub color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
}

impl KeyDef {
    pub fn numbered(id: &str, color: &str, number: u8) -> Self {
        Self { id: id.into(), color: color.into(), number: Some(number), shape: None }
    }

    pub fn shaped(id: &str, color: &str, shape: &str) -> Self {
        Self { id: id.into(), color: color.into(), number: None, shape: Some(shape.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDef {
    pub id: String,
    pub color: String,
    pub shape: String,
    pub true_number: u8,
    pub position: u8,
}

impl BoxDef {
    pub fn new(id: &str, color: &str, shape: &str, true_number: u8, position: u8) -> Self {
        Self { id: id.into(), color: color.into(), shape: shape.into(), true_number, position }
    }
}

/// True iff the key carries a number equal to the box's shape count.
pub fn oracle_predicts(key: &KeyDef, boxdef: &BoxDef) -> bool {
    key.number == Some(boxdef.true_number)
}

/// Set of candidate shape counts, stored as a bitmask over `1..=MAX_COUNT`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "Vec<u8>", try_from = "Vec<u8>")]
pub struct NumberSet(u32);

impl NumberSet {
    pub const EMPTY: NumberSet = NumberSet(0);

    /// `{1, ..., max}`.
    pub fn full(max: u8) -> Self {
        let max = max.min(MAX_COUNT);
        NumberSet(((1u64 << (max as u64 + 1)) - 2) as u32)
    }

    pub fn singleton(n: u8) -> Self {
        assert!((1..=MAX_COUNT).contains(&n), "count {n} out of range");
        NumberSet(1 << n)
    }

    pub fn contains(self, n: u8) -> bool {
        n <= MAX_COUNT && self.0 & (1 << n) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        (1..=MAX_COUNT).filter(move |&n| self.contains(n))
    }
}

impl fmt::Debug for NumberSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl From<NumberSet> for Vec<u8> {
    fn from(s: NumberSet) -> Self {
        s.iter().collect()
    }
}

impl TryFrom<Vec<u8>> for NumberSet {
    type Error = String;

    fn try_from(v: Vec<u8>) -> Result<Self, Self::Error> {
        let mut bits = 0u32;
        for n in v {
            if !(1..=MAX_COUNT).contains(&n) {
                return Err(format!("count {n} outside 1..={MAX_COUNT}"));
            }
            bits |= 1 << n;
        }
        Ok(NumberSet(bits))
    }
}

/// The fixed part of the task: which boxes and keys exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub boxes: Vec<BoxDef>,
    pub keys: Vec<KeyDef>,
}

impl Layout {
    /// The five boxes and thirteen keys used with the children.
    pub fn standard() -> Self {
        let boxes = vec![
            BoxDef::new("red", "red", "moon", 1, 1),
            BoxDef::new("pink", "pink", "cloud", 2, 2),
            BoxDef::new("white", "white", "diamond", 4, 3),
            BoxDef::new("purple", "purple", "heart", 3, 4),
            BoxDef::new("blue", "blue", "triangle", 5, 5),
        ];
        let keys = vec![
            KeyDef::numbered("red1", "red", 1),
            KeyDef::numbered("pink6", "pink", 6),
            KeyDef::numbered("grey2", "grey", 2),
            KeyDef::shaped("greycloud", "grey", "cloud"),
            KeyDef::numbered("orange4", "orange", 4),
            KeyDef::numbered("green3", "green", 3),
            KeyDef::shaped("bluestar", "blue", "star"),
            KeyDef::numbered("yellow5", "yellow", 5),
            KeyDef::shaped("greenheart", "green", "heart"),
            KeyDef::numbered("white7", "white", 7),
            KeyDef::shaped("triangleyellow", "yellow", "triangle"),
            KeyDef::shaped("diamondorange", "orange", "diamond"),
            KeyDef::shaped("purplearrow", "purple", "arrow"),
        ];
        Layout { boxes, keys }
    }

    /// Parses a layout from TOML with `[[boxes]]` and `[[keys]]` tables.
    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let layout: Layout = toml::from_str(text).map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.boxes.is_empty() || self.keys.is_empty() {
            return bad("layout needs at least one box and one key".into());
        }
        if self.keys.len() > 64 {
            return bad(format!("at most 64 keys are supported, got {}", self.keys.len()));
        }
        for (i, k) in self.keys.iter().enumerate() {
            if k.number.is_some() == k.shape.is_some() {
                return bad(format!("key `{}` must have exactly one of number or shape", k.id));
            }
            if self.keys[..i].iter().any(|o| o.id == k.id) {
                return bad(format!("duplicate key id `{}`", k.id));
            }
        }
        let mut positions: Vec<u8> = self.boxes.iter().map(|b| b.position).collect();
        positions.sort_unstable();
        if positions != (1..=self.boxes.len() as u8).collect::<Vec<_>>() {
            return bad("box positions must be a permutation of 1..=n".into());
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !(1..=MAX_COUNT).contains(&b.true_number) {
                return bad(format!("box `{}` has shape count {}", b.id, b.true_number));
            }
            if self.boxes[..i].iter().any(|o| o.id == b.id) {
                return bad(format!("duplicate box id `{}`", b.id));
            }
        }
        Ok(())
    }

    pub fn n_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    /// Largest count an unobserved box could have: `max(5, largest true count)`.
    pub fn max_count(&self) -> u8 {
        self.boxes.iter().map(|b| b.true_number).max().unwrap_or(5).max(5)
    }

    pub fn box_index(&self, id: &str) -> Result<BoxIndex, EnvError> {
        self.boxes
            .iter()
            .position(|b| b.id == id)
            .map(BoxIndex)
            .ok_or_else(|| EnvError::UnknownBox(id.to_string()))
    }

    pub fn key_index(&self, id: &str) -> Result<KeyIndex, EnvError> {
        self.keys
            .iter()
            .position(|k| k.id == id)
            .map(KeyIndex)
            .ok_or_else(|| EnvError::UnknownKey(id.to_string()))
    }

    pub fn boxdef(&self, b: BoxIndex) -> &BoxDef {
        &self.boxes[b.0]
    }

    pub fn key(&self, k: KeyIndex) -> &KeyDef {
        &self.keys[k.0]
    }

    pub fn box_indices(&self) -> impl Iterator<Item = BoxIndex> {
        (0..self.boxes.len()).map(BoxIndex)
    }

    pub fn key_indices(&self) -> impl Iterator<Item = KeyIndex> {
        (0..self.keys.len()).map(KeyIndex)
    }

    /// The key that opens each box under the true rule, if any.
    pub fn true_openers(&self) -> Vec<Option<KeyIndex>> {
        self.boxes
            .iter()
            .map(|b| self.keys.iter().position(|k| oracle_predicts(k, b)).map(KeyIndex))
            .collect()
    }

    /// Box views where every count is known.
    pub fn observed_views(&self) -> Vec<BoxView> {
        self.boxes.iter().map(BoxView::observed).collect()
    }

    /// Box views where no count is known.
    pub fn unobserved_views(&self) -> Vec<BoxView> {
        let full = NumberSet::full(self.max_count());
        self.boxes.iter().map(|b| BoxView::unobserved(b, full)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ReliabilityMode {
    Deterministic,
    Fixed { rho: f64 },
    OneInflatedBeta { alpha: f64, beta: f64, point_mass: f64 },
}

impl ReliabilityMode {
    /// Key reliability fitted to the children's data: half of them never saw
    /// a correct key fail, the rest follow Beta(5.9, 2.7).
    pub const CHILDREN: ReliabilityMode =
        ReliabilityMode::OneInflatedBeta { alpha: 5.9, beta: 2.7, point_mass: 0.5 };

    /// Expected realized reliability.
    pub fn mean(&self) -> f64 {
        match *self {
            ReliabilityMode::Deterministic => 1.0,
            ReliabilityMode::Fixed { rho } => rho,
            ReliabilityMode::OneInflatedBeta { alpha, beta, point_mass } => {
                point_mass + (1.0 - point_mass) * alpha / (alpha + beta)
            }
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match *self {
            ReliabilityMode::Deterministic => Ok(()),
            ReliabilityMode::Fixed { rho } if rho > 0.0 && rho <= 1.0 => Ok(()),
            ReliabilityMode::Fixed { rho } => Err(EnvError::InvalidConfig(format!("reliability {rho} not in (0, 1]"))),
            ReliabilityMode::OneInflatedBeta { alpha, beta, point_mass } => {
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    Err(EnvError::InvalidConfig(format!("beta parameters ({alpha}, {beta}) must be positive")))
                } else if !(0.0..=1.0).contains(&point_mass) {
                    Err(EnvError::InvalidConfig(format!("point mass {point_mass} not in [0, 1]")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Draws the per-episode key reliability.
pub fn sample_reliability<R: Rng + ?Sized>(mode: &ReliabilityMode, rng: &mut R) -> f64 {
    match *mode {
        ReliabilityMode::Deterministic => 1.0,
        ReliabilityMode::Fixed { rho } => rho,
        ReliabilityMode::OneInflatedBeta { alpha, beta, point_mass } => {
            if rng.random_bool(point_mass) {
                1.0
            } else {
                Beta::new(alpha, beta).expect("validated beta parameters").sample(rng)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observability {
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub reliability: ReliabilityMode,
    pub observability: Observability,
    pub max_trials: u32,
    pub rng_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            reliability: ReliabilityMode::Deterministic,
            observability: Observability::Full,
            max_trials: 70,
            rng_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.reliability.validate()?;
        if self.max_trials == 0 {
            return Err(EnvError::InvalidConfig("max_trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Observe {
        #[serde(rename = "box")]
        box_: BoxIndex,
    },
    Attempt {
        #[serde(rename = "box")]
        box_: BoxIndex,
        key: KeyIndex,
    },
}

impl Action {
    pub fn target(&self) -> BoxIndex {
        match *self {
            Action::Observe { box_ } | Action::Attempt { box_, .. } => box_,
        }
    }

    pub fn is_attempt(&self) -> bool {
        matches!(self, Action::Attempt { .. })
    }

    pub fn describe(&self, layout: &Layout) -> String {
        match *self {
            Action::Observe { box_ } => format!("observe {}", layout.boxdef(box_).id),
            Action::Attempt { box_, key } => {
                format!("attempt {} -> {}", layout.key(key).id, layout.boxdef(box_).id)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Attempt { success: bool },
    Observe { revealed: u8 },
}

impl Outcome {
    pub fn success(&self) -> bool {
        matches!(self, Outcome::Attempt { success: true })
    }

    /// The value stored in the trajectory file's `outcome` column.
    pub fn code(&self) -> u8 {
        match *self {
            Outcome::Attempt { success } => success as u8,
            Outcome::Observe { revealed } => revealed,
        }
    }
}

/// Observable state of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub open: Vec<bool>,
    pub number_belief: Vec<NumberSet>,
    pub observed: Vec<bool>,
    pub trial_index: u32,
    pub realized_rho: f64,
}

impl EnvState {
    pub fn initial(layout: &Layout, observability: Observability, realized_rho: f64) -> Self {
        let n = layout.n_boxes();
        let (number_belief, observed) = match observability {
            Observability::Full => (
                layout.boxes.iter().map(|b| NumberSet::singleton(b.true_number)).collect(),
                vec![true; n],
            ),
            Observability::Partial => (vec![NumberSet::full(layout.max_count()); n], vec![false; n]),
        };
        EnvState { open: vec![false; n], number_belief, observed, trial_index: 0, realized_rho }
    }

    pub fn is_terminal(&self, max_trials: u32) -> bool {
        self.all_open() || self.trial_index >= max_trials
    }

    pub fn all_open(&self) -> bool {
        self.open.iter().all(|&o| o)
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn unopened(&self) -> impl Iterator<Item = BoxIndex> + '_ {
        self.open.iter().enumerate().filter(|(_, &o)| !o).map(|(i, _)| BoxIndex(i))
    }

    pub fn box_view(&self, layout: &Layout, b: BoxIndex) -> BoxView {
        let def = layout.boxdef(b);
        BoxView {
            id: def.id.clone(),
            color: def.color.clone(),
            shape: def.shape.clone(),
            position: def.position,
            number_belief: self.number_belief[b.0],
            observed: self.observed[b.0],
        }
    }

    pub fn box_views(&self, layout: &Layout) -> Vec<BoxView> {
        layout.box_indices().map(|b| self.box_view(layout, b)).collect()
    }

    /// Applies one action. `max_trials` bounds the episode.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        layout: &Layout,
        max_trials: u32,
        action: Action,
        rng: &mut R,
    ) -> Result<Outcome, EnvError> {
        if self.is_terminal(max_trials) {
            return Err(EnvError::Terminal);
        }
        let b = action.target();
        if b.0 >= layout.n_boxes() {
            return Err(EnvError::UnknownBox(format!("#{}", b.0)));
        }
        let boxdef = layout.boxdef(b);
        let outcome = match action {
            Action::Observe { .. } => {
                self.number_belief[b.0] = NumberSet::singleton(boxdef.true_number);
                self.observed[b.0] = true;
                Outcome::Observe { revealed: boxdef.true_number }
            }
            Action::Attempt { key, .. } => {
                if key.0 >= layout.n_keys() {
                    return Err(EnvError::UnknownKey(format!("#{}", key.0)));
                }
                if self.open[b.0] {
                    return Err(EnvError::AttemptOnOpenBox(boxdef.id.clone()));
                }
                let success = oracle_predicts(layout.key(key), boxdef) && rng.random_bool(self.realized_rho);
                if success {
                    self.open[b.0] = true;
                }
                Outcome::Attempt { success }
            }
        };
        self.trial_index += 1;
        Ok(outcome)
    }
}

/// A seeded single-episode environment.
#[derive(Debug, Clone)]
pub struct Environment {
    layout: Arc<Layout>,
    config: EnvConfig,
    state: EnvState,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(layout: Arc<Layout>, config: EnvConfig) -> Result<Self, EnvError> {
        layout.validate()?;
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let rho = sample_reliability(&config.reliability, &mut rng);
        let state = EnvState::initial(&layout, config.observability, rho);
        Ok(Environment { layout, config, state, rng })
    }

    pub fn standard(config: EnvConfig) -> Result<Self, EnvError> {
        Self::new(Arc::new(Layout::standard()), config)
    }

    pub fn step(&mut self, action: Action) -> Result<Outcome, EnvError> {
        self.state.step(&self.layout, self.config.max_trials, action, &mut self.rng)
    }

    pub fn is_terminal(&self) -> bool {
        self.state.is_terminal(self.config.max_trials)
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn box_views(&self) -> Vec<BoxView> {
        self.state.box_views(&self.layout)
    }
}

/// Role of a candidate key in a generalization trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRole {
    ColorMatch,
    ShapeMatch,
    NumberMatch,
    NumberFoil,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationTrial {
    pub novel_box: BoxDef,
    pub candidates: [KeyDef; 4],
    pub roles: [CandidateRole; 4],
}

impl GeneralizationTrial {
    pub fn role_of(&self, key_id: &str) -> Option<CandidateRole> {
        self.candidates.iter().position(|k| k.id == key_id).map(|i| self.roles[i])
    }
}

/// Four forced-choice trials with unseen boxes (position 0: not part of the line-up), each offering a color-matched,
/// shape-matched, number-matched and number-foil key.
pub fn standard_generalization_trials() -> Vec<GeneralizationTrial> {
    use CandidateRole::*;
    let roles = [ColorMatch, ShapeMatch, NumberMatch, NumberFoil];
    vec![
        GeneralizationTrial {
            novel_box: BoxDef::new("green", "green", "star", 4, 0),
            candidates: [
                KeyDef::shaped("greenmoon", "green", "moon"),
                KeyDef::shaped("greystar", "grey", "star"),
                KeyDef::numbered("blue4", "blue", 4),
                KeyDef::numbered("red6", "red", 6),
            ],
            roles,
        },
        GeneralizationTrial {
            novel_box: BoxDef::new("orange", "orange", "heart", 2, 0),
            candidates: [
                KeyDef::shaped("orangecloud", "orange", "cloud"),
                KeyDef::shaped("redheart", "red", "heart"),
                KeyDef::numbered("white2", "white", 2),
                KeyDef::numbered("green5", "green", 5),
            ],
            roles,
        },
        GeneralizationTrial {
            novel_box: BoxDef::new("yellow", "yellow", "diamond", 3, 0),
            candidates: [
                KeyDef::shaped("yellowarrow", "yellow", "arrow"),
                KeyDef::shaped("bluediamond", "blue", "diamond"),
                KeyDef::numbered("pink3", "pink", 3),
                KeyDef::numbered("grey1", "grey", 1),
            ],
            roles,
        },
        GeneralizationTrial {
            novel_box: BoxDef::new("grey", "grey", "moon", 5, 0),
            candidates: [
                KeyDef::shaped("greytriangle", "grey", "triangle"),
                KeyDef::shaped("purplemoon", "purple", "moon"),
                KeyDef::numbered("orange5", "orange", 5),
                KeyDef::numbered("yellow2", "yellow", 2),
            ],
            roles,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(layout: &Layout, b: &str, k: &str) -> Action {
        Action::Attempt { box_: layout.box_index(b).unwrap(), key: layout.key_index(k).unwrap() }
    }

    #[test]
    fn oracle_matches_true_configuration() {
        let l = Layout::standard();
        let key = |id: &str| l.key(l.key_index(id).unwrap()).clone();
        let bx = |id: &str| l.boxdef(l.box_index(id).unwrap()).clone();
        assert!(oracle_predicts(&key("red1"), &bx("red")));
        assert!(!oracle_predicts(&key("white7"), &bx("white")));
        assert!(!oracle_predicts(&key("purplearrow"), &bx("purple")));
        let openers: Vec<_> = l.true_openers().into_iter().map(|k| l.key(k.unwrap()).id.clone()).collect();
        assert_eq!(openers, ["red1", "grey2", "orange4", "green3", "yellow5"]);
    }

    #[test]
    fn standard_layout_is_valid() {
        let l = Layout::standard();
        l.validate().unwrap();
        assert_eq!((l.n_boxes(), l.n_keys()), (5, 13));
        assert_eq!(l.max_count(), 5);
    }

    #[test]
    fn layout_rejects_key_with_number_and_shape() {
        let mut l = Layout::standard();
        l.keys[0].shape = Some("moon".into());
        assert!(matches!(l.validate(), Err(EnvError::InvalidConfig(_))));
        let mut l = Layout::standard();
        l.boxes[0].position = 2;
        assert!(l.validate().is_err());
    }

    #[test]
    fn layout_toml_roundtrip() {
        let l = Layout::standard();
        let text = toml::to_string(&l).unwrap();
        assert_eq!(Layout::from_toml_str(&text).unwrap(), l);
    }

    #[test]
    fn observe_reveals_count_and_collapses_belief() {
        let config = EnvConfig { observability: Observability::Partial, ..EnvConfig::default() };
        let mut env = Environment::standard(config).unwrap();
        let purple = env.layout().box_index("purple").unwrap();
        assert_eq!(env.state().number_belief[purple.0], NumberSet::full(5));
        let out = env.step(Action::Observe { box_: purple }).unwrap();
        assert_eq!(out, Outcome::Observe { revealed: 3 });
        assert_eq!(env.state().number_belief[purple.0], NumberSet::singleton(3));
        assert!(env.state().observed[purple.0]);
        // idempotent apart from the trial counter
        let before = env.state().number_belief.clone();
        assert_eq!(env.step(Action::Observe { box_: purple }).unwrap(), Outcome::Observe { revealed: 3 });
        assert_eq!(env.state().number_belief, before);
        assert_eq!(env.state().trial_index, 2);
    }

    #[test]
    fn deterministic_attempts() {
        let mut env = Environment::standard(EnvConfig::default()).unwrap();
        let l = env.layout().clone();
        assert_eq!(env.step(idx(&l, "pink", "pink6")).unwrap(), Outcome::Attempt { success: false });
        assert_eq!(env.step(idx(&l, "red", "red1")).unwrap(), Outcome::Attempt { success: true });
        assert!(env.state().open[0]);
        assert_eq!(env.step(idx(&l, "red", "red1")), Err(EnvError::AttemptOnOpenBox("red".into())));
        assert_eq!(env.state().trial_index, 2);
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let mut env = Environment::standard(EnvConfig::default()).unwrap();
        let bad = Action::Attempt { box_: BoxIndex(0), key: KeyIndex(99) };
        assert!(matches!(env.step(bad), Err(EnvError::UnknownKey(_))));
        assert!(matches!(env.step(Action::Observe { box_: BoxIndex(7) }), Err(EnvError::UnknownBox(_))));
        assert!(matches!(env.layout().box_index("teal"), Err(EnvError::UnknownBox(_))));
    }

    #[test]
    fn terminal_conditions() {
        let l = Layout::standard();
        let mut s = EnvState::initial(&l, Observability::Full, 1.0);
        assert!(!s.is_terminal(70));
        s.open = vec![true, true, true, true, false];
        s.trial_index = 70;
        assert!(s.is_terminal(70));
        s.trial_index = 12;
        s.open = vec![true; 5];
        assert!(s.is_terminal(70));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.step(&l, 70, Action::Observe { box_: BoxIndex(0) }, &mut rng), Err(EnvError::Terminal));
    }

    #[test]
    fn reliability_validation() {
        assert!(ReliabilityMode::Fixed { rho: 0.0 }.validate().is_err());
        assert!(ReliabilityMode::Fixed { rho: 1.0 }.validate().is_ok());
        assert!(ReliabilityMode::OneInflatedBeta { alpha: 1.0, beta: 1.0, point_mass: 1.5 }.validate().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_reliability(&ReliabilityMode::Deterministic, &mut rng), 1.0);
        assert_eq!(sample_reliability(&ReliabilityMode::Fixed { rho: 0.8 }, &mut rng), 0.8);
    }

    #[test]
    fn number_set_basics() {
        let full = NumberSet::full(5);
        assert_eq!(full.iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert!(!full.contains(0) && !full.contains(6));
        assert_eq!(NumberSet::singleton(2).len(), 1);
        let json = serde_json::to_string(&full).unwrap();
        assert_eq!(json, "[1,2,3,4,5]");
        assert_eq!(serde_json::from_str::<NumberSet>(&json).unwrap(), full);
    }

    #[test]
    fn generalization_trials_are_well_formed() {
        for trial in standard_generalization_trials() {
            let matches: Vec<_> = trial.candidates.iter().filter(|k| oracle_predicts(k, &trial.novel_box)).collect();
            assert_eq!(matches.len(), 1);
            assert_eq!(trial.role_of(&matches[0].id), Some(CandidateRole::NumberMatch));
            assert_eq!(trial.candidates[0].color, trial.novel_box.color);
            assert_eq!(trial.candidates[1].shape.as_deref(), Some(trial.novel_box.shape.as_str()));
        }
    }
}
