//! Network front end for the ideation engine.
//!
//! Collaborators talk to an event over a WebSocket or by long-polling; both
//! carry the same JSON records, one per line. Administrators use a small
//! REST surface to create events, advance phases and read reports and logs.

pub mod app;
pub mod wire;

pub use app::{router, AppState, Clock};
