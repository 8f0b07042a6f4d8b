//! Live Box Task sessions over HTTP.
//!
//! Every accepted request is appended to a JSON-lines event log before the
//! response is sent; [`SessionService::open`] replays the log so a restart
//! loses no sessions.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context as _};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use boxlab::agents::prompts::TEACHER_TEXT;
use boxlab::env::{standard_generalization_trials, BoxDef, EnvConfig, GeneralizationTrial, KeyDef, Observability, ReliabilityMode};
use boxlab::trajectory::to_csv_string;
use boxlab::{derive_seed, name_hash, Action, Environment, Layout, Outcome, Trajectory};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIME_LIMIT_SECS: f64 = 300.0;

/// Seconds since an arbitrary fixed origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
    }
}

/// A clock that only moves when told to.
#[derive(Default)]
pub struct ManualClock(Mutex<f64>);

impl ManualClock {
    pub fn new(start: f64) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, secs: f64) {
        *self.0.lock().unwrap() += secs;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> f64 {
        *self.0.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ObservabilityArg {
    Partial,
    Full,
}

impl From<ObservabilityArg> for Observability {
    fn from(o: ObservabilityArg) -> Self {
        match o {
            ObservabilityArg::Partial => Observability::Partial,
            ObservabilityArg::Full => Observability::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityArg {
    /// Key reliability drawn per session from the children's model.
    Children,
    Deterministic,
}

impl From<ReliabilityArg> for ReliabilityMode {
    fn from(r: ReliabilityArg) -> Self {
        match r {
            ReliabilityArg::Children => ReliabilityMode::CHILDREN,
            ReliabilityArg::Deterministic => ReliabilityMode::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub observability: ObservabilityArg,
    pub reliability: ReliabilityArg,
    pub time_limit_secs: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub observability: ObservabilityArg,
    pub reliability: ReliabilityArg,
    pub time_limit_secs: f64,
    pub log_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            observability: ObservabilityArg::Partial,
            reliability: ReliabilityArg::Children,
            time_limit_secs: DEFAULT_TIME_LIMIT_SECS,
            log_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Practice,
    Test,
    Generalization,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Attempt,
    Observe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    #[serde(rename = "type")]
    pub kind: ActionKind,
    pub box_id: String,
    #[serde(default)]
    pub key_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub observability: Option<ObservabilityArg>,
    pub reliability: Option<ReliabilityArg>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralizationRequest {
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Create { session_id: String, at: f64, settings: SessionSettings },
    Start { session_id: String, at: f64 },
    Action { session_id: String, at: f64, action: ActionRequest },
    Generalization { session_id: String, at: f64, choices: Vec<String> },
}

impl Event {
    fn session_id(&self) -> &str {
        match self {
            Event::Create { session_id, .. }
            | Event::Start { session_id, .. }
            | Event::Action { session_id, .. }
            | Event::Generalization { session_id, .. } => session_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceError {
    NotFound(String),
    Conflict(String),
    Expired,
    BadRequest(String),
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Expired => StatusCode::GONE,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn message(&self) -> String {
        match self {
            ServiceError::NotFound(id) => format!("no session `{id}`"),
            ServiceError::Expired => "the time limit has passed".into(),
            ServiceError::Conflict(m) | ServiceError::BadRequest(m) | ServiceError::Internal(m) => m.clone(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(serde_json::json!({ "error": self.message() }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyView {
    pub id: String,
    pub color: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub number: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
}

impl From<&KeyDef> for KeyView {
    fn from(k: &KeyDef) -> Self {
        KeyView { id: k.id.clone(), color: k.color.clone(), number: k.number, shape: k.shape.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxView {
    pub id: String,
    pub color: String,
    pub shape: String,
    pub position: u8,
    pub open: bool,
    /// Number of faces showing the shape; hidden until the box is picked up
    /// under partial observability.
    pub shape_count: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub trial: u32,
    #[serde(rename = "type")]
    pub kind: ActionKind,
    pub box_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_id: Option<String>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub key_id: String,
    pub box_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub teacher_text: String,
    pub demonstration: Demonstration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationView {
    pub trial: usize,
    #[serde(rename = "box")]
    pub box_: BoxView,
    pub keys: Vec<KeyView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: Phase,
    pub observability: ObservabilityArg,
    pub reliability: ReliabilityArg,
    pub time_limit_secs: f64,
    /// Seconds left in the test phase.
    pub remaining_secs: Option<f64>,
    pub expired: bool,
    pub completed: bool,
    pub trials: u32,
    pub instruction: Option<Instruction>,
    pub keys: Vec<KeyView>,
    pub boxes: Vec<BoxView>,
    pub history: Vec<HistoryItem>,
    pub generalization: Option<Vec<GeneralizationView>>,
    pub generalization_choices: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResponse {
    pub outcome: Outcome,
    pub state: SessionView,
}

struct Session {
    id: String,
    settings: SessionSettings,
    env: Environment,
    traj: Trajectory,
    phase: Phase,
    started_at: Option<f64>,
    expired: bool,
    generalization: Vec<GeneralizationTrial>,
    choices: Option<Vec<String>>,
}

impl Session {
    fn new(id: String, settings: SessionSettings, layout: Arc<Layout>) -> Result<Self, ServiceError> {
        let env_config = EnvConfig {
            reliability: settings.reliability.into(),
            observability: settings.observability.into(),
            max_trials: u32::MAX,
            rng_seed: settings.seed,
        };
        let env = Environment::new(layout, env_config).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, &[name_hash("generalization")]));
        let generalization = standard_generalization_trials()
            .into_iter()
            .map(|mut t| {
                let mut order = [0, 1, 2, 3];
                order.shuffle(&mut rng);
                t.candidates = order.map(|i| t.candidates[i].clone());
                t.roles = order.map(|i| t.roles[i]);
                t
            })
            .collect();
        let mut traj = Trajectory::new(id.clone(), "human");
        traj.metadata.env_seed = Some(settings.seed);
        Ok(Session {
            id,
            settings,
            env,
            traj,
            phase: Phase::Practice,
            started_at: None,
            expired: false,
            generalization,
            choices: None,
        })
    }

    fn layout(&self) -> &Layout {
        self.env.layout()
    }

    /// Ends the test phase once the time limit has passed.
    fn tick(&mut self, now: f64) {
        if self.phase == Phase::Test {
            if let Some(start) = self.started_at {
                if now - start >= self.settings.time_limit_secs {
                    self.phase = Phase::Generalization;
                    self.expired = true;
                }
            }
        }
    }

    fn start(&mut self, now: f64) -> Result<(), ServiceError> {
        if self.phase != Phase::Practice {
            return Err(ServiceError::Conflict(format!("session is in the {:?} phase", self.phase).to_lowercase()));
        }
        self.phase = Phase::Test;
        self.started_at = Some(now);
        Ok(())
    }

    fn act(&mut self, now: f64, req: &ActionRequest) -> Result<Outcome, ServiceError> {
        self.tick(now);
        match self.phase {
            Phase::Test => {}
            Phase::Generalization if self.expired => return Err(ServiceError::Expired),
            p => return Err(ServiceError::Conflict(format!("actions are not accepted in the {p:?} phase").to_lowercase())),
        }
        let layout = self.layout();
        let box_ = layout.box_index(&req.box_id).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let action = match (&req.kind, &req.key_id) {
            (ActionKind::Attempt, Some(k)) => {
                let key = layout.key_index(k).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
                Action::Attempt { box_, key }
            }
            (ActionKind::Attempt, None) => return Err(ServiceError::BadRequest("attempts need a key_id".into())),
            (ActionKind::Observe, None) => Action::Observe { box_ },
            (ActionKind::Observe, Some(_)) => return Err(ServiceError::BadRequest("observe takes no key_id".into())),
        };
        let outcome = self.env.step(action).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        self.traj.push(action, outcome);
        if self.env.state().all_open() {
            self.traj.metadata.completed = true;
            self.phase = Phase::Generalization;
        }
        Ok(outcome)
    }

    fn answer(&mut self, now: f64, choices: &[String]) -> Result<(), ServiceError> {
        self.tick(now);
        if self.phase != Phase::Generalization {
            return Err(ServiceError::Conflict(match self.phase {
                Phase::Done => "generalization choices were already submitted".into(),
                p => format!("generalization is not open in the {p:?} phase").to_lowercase(),
            }));
        }
        if choices.len() != self.generalization.len() {
            return Err(ServiceError::BadRequest(format!(
                "expected {} choices, got {}",
                self.generalization.len(),
                choices.len()
            )));
        }
        for (i, (c, t)) in choices.iter().zip(&self.generalization).enumerate() {
            if t.role_of(c).is_none() {
                return Err(ServiceError::BadRequest(format!("`{c}` is not offered in generalization trial {}", i + 1)));
            }
        }
        self.traj.generalization = choices.iter().cloned().map(Some).collect();
        self.choices = Some(choices.to_vec());
        self.phase = Phase::Done;
        Ok(())
    }

    fn apply(&mut self, event: &Event) -> Result<Option<Outcome>, ServiceError> {
        match event {
            Event::Create { .. } => Err(ServiceError::Conflict("session already exists".into())),
            Event::Start { at, .. } => self.start(*at).map(|_| None),
            Event::Action { at, action, .. } => self.act(*at, action).map(Some),
            Event::Generalization { at, choices, .. } => self.answer(*at, choices).map(|_| None),
        }
    }

    fn view(&mut self, now: f64) -> SessionView {
        self.tick(now);
        let layout = self.layout();
        let state = self.env.state();
        let boxes = layout
            .boxes
            .iter()
            .enumerate()
            .map(|(i, b)| BoxView {
                id: b.id.clone(),
                color: b.color.clone(),
                shape: b.shape.clone(),
                position: b.position,
                open: state.open[i],
                shape_count: state.observed[i].then_some(b.true_number),
            })
            .collect();
        let history = self
            .traj
            .records
            .iter()
            .map(|r| HistoryItem {
                trial: r.trial,
                kind: if r.action.is_attempt() { ActionKind::Attempt } else { ActionKind::Observe },
                box_id: layout.boxdef(r.action.target()).id.clone(),
                key_id: match r.action {
                    Action::Attempt { key, .. } => Some(layout.key(key).id.clone()),
                    Action::Observe { .. } => None,
                },
                outcome: r.outcome,
            })
            .collect();
        let novel = |b: &BoxDef| BoxView {
            id: b.id.clone(),
            color: b.color.clone(),
            shape: b.shape.clone(),
            position: b.position,
            open: false,
            shape_count: Some(b.true_number),
        };
        let generalization = matches!(self.phase, Phase::Generalization | Phase::Done).then(|| {
            self.generalization
                .iter()
                .enumerate()
                .map(|(i, t)| GeneralizationView {
                    trial: i + 1,
                    box_: novel(&t.novel_box),
                    keys: t.candidates.iter().map(KeyView::from).collect(),
                })
                .collect()
        });
        let demo_box = layout.boxes.first().map(|b| b.id.clone()).unwrap_or_default();
        let demo_key = layout
            .keys
            .iter()
            .find(|k| layout.boxes.first().is_some_and(|b| b.color == k.color))
            .map(|k| k.id.clone())
            .unwrap_or_default();
        SessionView {
            session_id: self.id.clone(),
            phase: self.phase,
            observability: self.settings.observability,
            reliability: self.settings.reliability,
            time_limit_secs: self.settings.time_limit_secs,
            remaining_secs: match (self.phase, self.started_at) {
                (Phase::Test, Some(s)) => Some((self.settings.time_limit_secs - (now - s)).max(0.0)),
                _ => None,
            },
            expired: self.expired,
            completed: state.all_open(),
            trials: state.trial_index,
            instruction: (self.phase == Phase::Practice).then(|| Instruction {
                teacher_text: TEACHER_TEXT.trim_matches('"').to_string(),
                demonstration: Demonstration { key_id: demo_key, box_id: demo_box },
            }),
            keys: layout.keys.iter().map(KeyView::from).collect(),
            boxes,
            history,
            generalization,
            generalization_choices: self.choices.clone(),
        }
    }
}

/// Session store shared by the HTTP handlers.
pub struct SessionService {
    layout: Arc<Layout>,
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log: Option<Mutex<File>>,
}

impl SessionService {
    /// Opens the service, replaying any existing event log.
    pub fn open(config: ServiceConfig, clock: Arc<dyn Clock>) -> anyhow::Result<Self> {
        let layout = Arc::new(Layout::standard());
        let mut sessions = HashMap::new();
        let log = match &config.log_path {
            Some(path) => {
                if path.exists() {
                    replay_log(path, &layout, &mut sessions)?;
                }
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .with_context(|| format!("opening {}", path.display()))?;
                Some(Mutex::new(file))
            }
            None => None,
        };
        let sessions = sessions.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect();
        Ok(SessionService { layout, config, clock, sessions: RwLock::new(sessions), log })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    fn record(&self, event: &Event) -> Result<(), ServiceError> {
        if let Some(log) = &self.log {
            let line = serde_json::to_string(event).map_err(|e| ServiceError::Internal(e.to_string()))?;
            let mut f = log.lock().unwrap();
            writeln!(f, "{line}")
                .and_then(|_| f.flush())
                .map_err(|e| ServiceError::Internal(format!("event log: {e}")))?;
        }
        Ok(())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: CreateRequest) -> Result<SessionView, ServiceError> {
        let settings = SessionSettings {
            observability: req.observability.unwrap_or(self.config.observability),
            reliability: req.reliability.unwrap_or(self.config.reliability),
            time_limit_secs: self.config.time_limit_secs,
            seed: req.seed.unwrap_or_else(rand::random),
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = self.clock.now();
        let mut session = Session::new(id.clone(), settings, self.layout.clone())?;
        self.record(&Event::Create { session_id: id.clone(), at: now, settings })?;
        let view = session.view(now);
        self.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    /// Applies an event to its session under the session's lock, logging it
    /// only if it was accepted.
    fn submit(&self, event: Event) -> Result<(Option<Outcome>, SessionView), ServiceError> {
        let session = self.session(event.session_id())?;
        let mut s = session.lock().unwrap();
        let at = match &event {
            Event::Create { at, .. } | Event::Start { at, .. } | Event::Action { at, .. } | Event::Generalization { at, .. } => *at,
        };
        let outcome = s.apply(&event)?;
        self.record(&event)?;
        Ok((outcome, s.view(at)))
    }

    pub fn start(&self, id: &str) -> Result<SessionView, ServiceError> {
        self.submit(Event::Start { session_id: id.into(), at: self.clock.now() }).map(|(_, v)| v)
    }

    pub fn act(&self, id: &str, action: ActionRequest) -> Result<ActionResponse, ServiceError> {
        let (outcome, state) = self.submit(Event::Action { session_id: id.into(), at: self.clock.now(), action })?;
        Ok(ActionResponse { outcome: outcome.expect("actions have outcomes"), state })
    }

    pub fn generalize(&self, id: &str, choices: Vec<String>) -> Result<SessionView, ServiceError> {
        self.submit(Event::Generalization { session_id: id.into(), at: self.clock.now(), choices }).map(|(_, v)| v)
    }

    pub fn state(&self, id: &str) -> Result<SessionView, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        Ok(s.view(self.clock.now()))
    }

    /// The session's trajectory in the fitting ingestion format.
    pub fn trajectory_csv(&self, id: &str) -> Result<String, ServiceError> {
        let session = self.session(id)?;
        let s = session.lock().unwrap();
        Ok(to_csv_string(std::slice::from_ref(&s.traj), s.layout()))
    }
}

fn replay_log(path: &Path, layout: &Arc<Layout>, sessions: &mut HashMap<String, Session>) -> anyhow::Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = match serde_json::from_str(line) {
            Ok(e) => e,
            // A torn final write from a crash.
            Err(_) if Some(i) == last => break,
            Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
        };
        match &event {
            Event::Create { session_id, settings, .. } => {
                let s = Session::new(session_id.clone(), *settings, layout.clone()).map_err(|e| anyhow::anyhow!(e.message()))?;
                sessions.insert(session_id.clone(), s);
            }
            other => {
                let s = sessions
                    .get_mut(other.session_id())
                    .ok_or_else(|| anyhow::anyhow!("{}:{}: unknown session", path.display(), i + 1))?;
                s.apply(other).map_err(|e| anyhow::anyhow!("{}:{}: {}", path.display(), i + 1, e.message()))?;
            }
        }
    }
    Ok(())
}

fn parse_body<T: serde::de::DeserializeOwned + Default>(body: &Bytes, required: bool) -> Result<T, ServiceError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return if required { Err(ServiceError::BadRequest("missing JSON body".into())) } else { Ok(T::default()) };
    }
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid JSON body: {e}")))
}

type Shared = Arc<SessionService>;

async fn create(State(svc): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let req: CreateRequest = parse_body(&body, false)?;
    Ok((StatusCode::CREATED, Json(svc.create(req)?)))
}

async fn start(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ServiceError> {
    Ok(Json(svc.start(&id)?))
}

async fn action(State(svc): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<ActionResponse>, ServiceError> {
    svc.session(&id)?;
    let req: ActionRequest = serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("invalid action: {e}")))?;
    Ok(Json(svc.act(&id, req)?))
}

async fn state(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ServiceError> {
    Ok(Json(svc.state(&id)?))
}

async fn generalization(State(svc): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<SessionView>, ServiceError> {
    svc.session(&id)?;
    let req: GeneralizationRequest =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("invalid choices: {e}")))?;
    Ok(Json(svc.generalize(&id, req.choices)?))
}

async fn trajectory(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ServiceError> {
    let csv = svc.trajectory_csv(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

pub fn router(svc: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/actions", post(action))
        .route("/sessions/{id}/generalization", post(generalization))
        .route("/sessions/{id}/trajectory", get(trajectory))
        .with_state(svc)
}
