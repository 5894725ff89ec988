//! Wire messages and their canonical line encoding.
//!
//! Every message is one JSON object on one line: `"type"` first, then the
//! fields in the order declared below, no whitespace, LF-terminated.
//! Decoding is strict: unknown types and unknown fields are rejected.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compression::{VirtDelta, Workspace};
use crate::engine::SurfaceState;
use crate::geometry::{Pose, Vec3};
use crate::scene::{CityOption, NodeKind};

pub const PROTOCOL_VERSION: &str = "einstall/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    Tracked,
    Scripted,
    Viewer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub client_name: String,
    pub mode: ClientMode,
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseInput {
    pub seq: u64,
    #[serde(rename = "move")]
    pub movement: VirtDelta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectCity {
    pub seq: u64,
    pub city_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bye {
    pub seq: u64,
}

/// Static layout of one scene node, for clients that draw a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeLayout {
    pub node_id: String,
    pub kind: NodeKind,
    pub pose: Pose,
    pub extent: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Welcome {
    pub scene_id: String,
    pub title: String,
    pub tick_rate: f64,
    pub surfaces: Vec<String>,
    pub speakers: Vec<String>,
    pub menu_options: Vec<CityOption>,
    pub nodes: Vec<NodeLayout>,
    pub workspace: Workspace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMapping {
    pub phys_pose: Pose,
    pub heading_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    /// Equal to `t_ticks`: frames are shared by every session, so the
    /// server-side sequence is the tick counter.
    pub seq: u64,
    pub t_ticks: u64,
    pub time: f64,
    pub user_virtual_pose: Pose,
    pub mapping: FrameMapping,
    pub surfaces: Vec<SurfaceState>,
    pub speaker_gains: BTreeMap<String, f64>,
    pub selected_city: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadVersion,
    HandshakeTimeout,
    BadInput,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMessage {
    pub code: ErrorCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum Message {
    #[serde(rename = "HELLO")]
    Hello(Hello),
    #[serde(rename = "POSE_INPUT")]
    PoseInput(PoseInput),
    #[serde(rename = "SELECT_CITY")]
    SelectCity(SelectCity),
    #[serde(rename = "BYE")]
    Bye(Bye),
    #[serde(rename = "WELCOME")]
    Welcome(Welcome),
    #[serde(rename = "FRAME")]
    Frame(Frame),
    #[serde(rename = "ERROR")]
    Error(ErrorMessage),
}

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello(_) => "HELLO",
            Message::PoseInput(_) => "POSE_INPUT",
            Message::SelectCity(_) => "SELECT_CITY",
            Message::Bye(_) => "BYE",
            Message::Welcome(_) => "WELCOME",
            Message::Frame(_) => "FRAME",
            Message::Error(_) => "ERROR",
        }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error(ErrorMessage {
            code,
            detail: detail.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown message type '{0}'")]
    UnknownType(String),
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("unsupported protocol '{0}', expected '{PROTOCOL_VERSION}'")]
    BadVersion(String),
}

impl DecodeError {
    pub fn code(&self) -> ErrorCode {
        match self {
            DecodeError::BadVersion(_) => ErrorCode::BadVersion,
            _ => ErrorCode::Malformed,
        }
    }
}

/// Canonical single-line encoding, LF included.
pub fn encode_message(msg: &Message) -> String {
    let mut line = serde_json::to_string(msg).expect("messages serialize");
    line.push('\n');
    line
}

/// Decodes one line; a single trailing LF (or CRLF) is accepted.
pub fn decode_message(line: &str) -> Result<Message, DecodeError> {
    let line = line
        .strip_suffix('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .unwrap_or(line);
    if line.contains('\n') {
        return Err(DecodeError::Malformed("embedded newline".into()));
    }
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let serde_json::Value::Object(mut fields) = value else {
        return Err(DecodeError::Malformed("expected a JSON object".into()));
    };
    let kind = match fields.remove("type") {
        Some(serde_json::Value::String(kind)) => kind,
        Some(_) => return Err(DecodeError::Malformed("\"type\" must be a string".into())),
        None => return Err(DecodeError::MissingField("type".into())),
    };
    let body = serde_json::Value::Object(fields);
    let msg = match kind.as_str() {
        "HELLO" => {
            let hello: Hello = body_as(body)?;
            if hello.protocol != PROTOCOL_VERSION {
                return Err(DecodeError::BadVersion(hello.protocol));
            }
            Message::Hello(hello)
        }
        "POSE_INPUT" => Message::PoseInput(body_as(body)?),
        "SELECT_CITY" => Message::SelectCity(body_as(body)?),
        "BYE" => Message::Bye(body_as(body)?),
        "WELCOME" => Message::Welcome(body_as(body)?),
        "FRAME" => Message::Frame(body_as(body)?),
        "ERROR" => Message::Error(body_as(body)?),
        _ => return Err(DecodeError::UnknownType(kind)),
    };
    Ok(msg)
}

fn body_as<T: DeserializeOwned>(body: serde_json::Value) -> Result<T, DecodeError> {
    serde_json::from_value(body).map_err(|e| {
        let text = e.to_string();
        match text.strip_prefix("missing field ") {
            Some(rest) => DecodeError::MissingField(rest.trim_matches('`').to_owned()),
            None => DecodeError::Malformed(text),
        }
    })
}
