//! Records exchanged with chat clients.

use ideation_core::conversation::UserEvent;
use ideation_core::messages::BotMessage;
use ideation_core::orchestrator::Delivery;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientRecord {
    UserEvent {
        event_id: String,
        user_id: String,
        payload: UserEvent,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerRecord {
    BotMessage { seq: u64, payload: BotMessage },
    Error { message: String },
}

impl From<Delivery> for ServerRecord {
    fn from(d: Delivery) -> Self {
        ServerRecord::BotMessage {
            seq: d.seq,
            payload: d.message,
        }
    }
}

impl ServerRecord {
    pub fn error(message: impl Into<String>) -> Self {
        ServerRecord::Error {
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server records serialize")
    }
}

/// Parses newline-separated client records, skipping blank lines.
pub fn parse_client_lines(text: &str) -> Result<Vec<ClientRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn to_json_lines(records: impl IntoIterator<Item = ServerRecord>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}
