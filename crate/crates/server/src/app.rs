//! HTTP routes, the WebSocket session loop and the phase ticker.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use ideation_core::domain::{CollaboratorId, Timestamp};
use ideation_core::orchestrator::{
    log::encode_entry, Delivery, EngineError, EventConfig, EventHandle, Registry,
};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::wire::{parse_client_lines, to_json_lines, ClientRecord, ServerRecord};

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as Timestamp)
            .unwrap_or(0)
    })
}

const NDJSON: &str = "application/x-ndjson";
const CHANNEL_CAPACITY: usize = 1024;
const MAX_WAIT: Duration = Duration::from_secs(60);

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownEvent(_) | EngineError::UnknownUser(_) => StatusCode::NOT_FOUND,
            EngineError::AlreadyEnrolled(_)
            | EngineError::DuplicateEvent(_)
            | EngineError::PhaseClosed
            | EngineError::AlreadyFinal
            | EngineError::InvalidTransition(_) => StatusCode::CONFLICT,
            EngineError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a blocking engine call off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, EngineError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

struct Inner {
    registry: Arc<Registry>,
    clock: Clock,
    channels: Mutex<HashMap<String, broadcast::Sender<Delivery>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Wraps a registry, wiring message fan-out for the events it already holds.
    pub fn new(registry: Arc<Registry>, clock: Clock) -> Result<Self, EngineError> {
        let state = Self {
            inner: Arc::new(Inner {
                registry,
                clock,
                channels: Mutex::new(HashMap::new()),
            }),
        };
        for handle in state.inner.registry.handles() {
            state.attach(&handle)?;
        }
        Ok(state)
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.inner.registry
    }

    pub fn now(&self) -> Timestamp {
        (self.inner.clock)()
    }

    fn attach(&self, handle: &EventHandle) -> Result<(), EngineError> {
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        let sender = tx.clone();
        handle.subscribe(move |d| {
            let _ = sender.send(d.clone());
        })?;
        self.inner
            .channels
            .lock()
            .expect("channel map lock")
            .insert(handle.event_id().to_owned(), tx);
        Ok(())
    }

    fn subscribe(&self, event_id: &str) -> ApiResult<broadcast::Receiver<Delivery>> {
        self.inner
            .channels
            .lock()
            .expect("channel map lock")
            .get(event_id)
            .map(broadcast::Sender::subscribe)
            .ok_or_else(|| EngineError::UnknownEvent(event_id.to_owned()).into())
    }

    fn handle(&self, event_id: &str) -> ApiResult<EventHandle> {
        Ok(self.inner.registry.get(event_id)?)
    }

    /// Creates an event and starts fanning out its messages.
    pub fn create_event(&self, config: EventConfig) -> Result<EventHandle, EngineError> {
        let handle = self.inner.registry.create(config, self.now())?;
        self.attach(&handle)?;
        Ok(handle)
    }

    /// Closes overdue phases in every event.
    pub async fn tick_all(&self) {
        for handle in self.inner.registry.handles() {
            let now = self.now();
            let id = handle.event_id().to_owned();
            if let Err(e) = blocking(move || handle.tick(now)).await {
                tracing::warn!(event = %id, error = %e.message, "tick failed");
            }
        }
    }

    pub fn spawn_ticker(&self, every: Duration) -> tokio::task::JoinHandle<()> {
        let state = self.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(every);
            loop {
                interval.tick().await;
                state.tick_all().await;
            }
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/events", post(create_event))
        .route("/events/{id}/enroll", post(enroll))
        .route("/events/{id}/advance", post(advance))
        .route("/events/{id}/report", get(report))
        .route("/events/{id}/log", get(log))
        .route(
            "/events/{id}/messages",
            post(post_messages).get(poll_messages),
        )
        .route("/events/{id}/ws", get(websocket))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub event_id: String,
}

async fn create_event(
    State(app): State<AppState>,
    body: String,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let config = EventConfig::from_toml(&body)?;
    let handle = blocking(move || app.create_event(config)).await?;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            event_id: handle.event_id().to_owned(),
        }),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnrollRequest {
    pub user_id: String,
    #[serde(default)]
    pub alias: Option<String>,
}

async fn enroll(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<EnrollRequest>,
) -> ApiResult<StatusCode> {
    let handle = app.handle(&id)?;
    let now = app.now();
    blocking(move || handle.enroll(CollaboratorId::new(req.user_id), req.alias, now)).await?;
    Ok(StatusCode::CREATED)
}

async fn advance(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let handle = app.handle(&id)?;
    let now = app.now();
    let (transition, _) = blocking(move || handle.advance_phase(now)).await?;
    Ok(Json(transition))
}

async fn report(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let handle = app.handle(&id)?;
    Ok(Json(blocking(move || handle.report()).await?))
}

fn ndjson(body: String) -> Response {
    ([(header::CONTENT_TYPE, NDJSON)], body).into_response()
}

async fn log(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = app.handle(&id)?;
    let entries = blocking(move || handle.log()).await?;
    let mut body = String::new();
    for e in &entries {
        body.push_str(&encode_entry(e));
        body.push('\n');
    }
    Ok(ndjson(body))
}

/// Applies one client record; the result lists the messages addressed to
/// its sender, or an error record.
async fn apply_record(app: &AppState, path_id: &str, record: ClientRecord) -> Vec<ServerRecord> {
    let ClientRecord::UserEvent {
        event_id,
        user_id,
        payload,
    } = record;
    if event_id != path_id {
        return vec![ServerRecord::error(format!(
            "record for event {event_id} sent to {path_id}"
        ))];
    }
    let handle = match app.handle(&event_id) {
        Ok(h) => h,
        Err(e) => return vec![ServerRecord::error(e.message)],
    };
    let user = CollaboratorId::new(user_id);
    let now = app.now();
    let sender = user.clone();
    match blocking(move || handle.handle_incoming(sender, payload, now)).await {
        Ok(outcome) => outcome
            .deliveries
            .into_iter()
            .filter(|d| d.to == user)
            .map(ServerRecord::from)
            .collect(),
        Err(e) => vec![ServerRecord::error(e.message)],
    }
}

async fn post_messages(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    app.handle(&id)?;
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let records = parse_client_lines(text)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut out = Vec::new();
    for record in records {
        out.extend(apply_record(&app, &id, record).await);
    }
    Ok(ndjson(to_json_lines(out)))
}

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    pub user_id: String,
    #[serde(default)]
    pub after: Option<u64>,
    #[serde(default)]
    pub wait_ms: Option<u64>,
}

async fn enrolled_handle(
    app: &AppState,
    id: &str,
    user: &CollaboratorId,
) -> ApiResult<EventHandle> {
    let handle = app.handle(id)?;
    let probe = handle.clone();
    let who = user.clone();
    if !blocking(move || probe.is_enrolled(who)).await? {
        return Err(EngineError::UnknownUser(user.clone()).into());
    }
    Ok(handle)
}

async fn backlog(
    handle: &EventHandle,
    user: &CollaboratorId,
    after: Option<u64>,
) -> ApiResult<Vec<Delivery>> {
    let handle = handle.clone();
    let user = user.clone();
    blocking(move || handle.deliveries_since(user, after)).await
}

/// Long-poll: returns messages after `after`, waiting up to `wait_ms` for
/// the first one when none are pending.
async fn poll_messages(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
) -> ApiResult<Response> {
    let user = CollaboratorId::new(q.user_id);
    let handle = enrolled_handle(&app, &id, &user).await?;
    let mut rx = app.subscribe(&id)?;
    let mut pending = backlog(&handle, &user, q.after).await?;
    if pending.is_empty() {
        let wait = Duration::from_millis(q.wait_ms.unwrap_or(0)).min(MAX_WAIT);
        let arrived = tokio::time::timeout(wait, async {
            loop {
                match rx.recv().await {
                    Ok(d) if d.to == user => return true,
                    Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return false,
                }
            }
        })
        .await
        .unwrap_or(false);
        if arrived {
            pending = backlog(&handle, &user, q.after).await?;
        }
    }
    Ok(ndjson(to_json_lines(
        pending.into_iter().map(ServerRecord::from),
    )))
}

async fn websocket(
    ws: WebSocketUpgrade,
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
) -> ApiResult<Response> {
    let user = CollaboratorId::new(q.user_id);
    let handle = enrolled_handle(&app, &id, &user).await?;
    let rx = app.subscribe(&id)?;
    Ok(ws.on_upgrade(move |socket| session(socket, app, handle, id, user, q.after, rx)))
}

async fn session(
    socket: WebSocket,
    app: AppState,
    handle: EventHandle,
    event_id: String,
    user: CollaboratorId,
    after: Option<u64>,
    mut rx: broadcast::Receiver<Delivery>,
) {
    let (mut sink, mut stream) = socket.split();
    let mut last = after;

    macro_rules! send {
        ($record:expr) => {
            if sink
                .send(Message::Text($record.to_line().into()))
                .await
                .is_err()
            {
                return;
            }
        };
    }

    let Ok(pending) = backlog(&handle, &user, last).await else {
        return;
    };
    for d in pending {
        last = Some(d.seq);
        send!(ServerRecord::from(d));
    }

    loop {
        tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let records = match parse_client_lines(text.as_str()) {
                        Ok(r) => r,
                        Err(e) => {
                            send!(ServerRecord::error(e.to_string()));
                            continue;
                        }
                    };
                    for record in records {
                        let ClientRecord::UserEvent { user_id, .. } = &record;
                        if user_id != user.as_str() {
                            send!(ServerRecord::error(format!("this connection belongs to {user}")));
                            continue;
                        }
                        // successful replies arrive through the broadcast
                        for r in apply_record(&app, &event_id, record).await {
                            if matches!(r, ServerRecord::Error { .. }) {
                                send!(r);
                            }
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
            delivered = rx.recv() => match delivered {
                Ok(d) if d.to == user && last.is_none_or(|l| d.seq > l) => {
                    last = Some(d.seq);
                    send!(ServerRecord::from(d));
                }
                Ok(_) => {}
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let Ok(missed) = backlog(&handle, &user, last).await else { return };
                    for d in missed {
                        last = Some(d.seq);
                        send!(ServerRecord::from(d));
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
        }
    }
}
