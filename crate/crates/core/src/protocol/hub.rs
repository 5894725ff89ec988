//! Session bookkeeping and tick broadcast, free of any I/O.
//!
//! Transports feed connection events and raw lines in, call [`Hub::tick`]
//! on their cadence and deliver the returned [`Outbound`] actions. All
//! sessions share one visit; it starts at tick 0 and is rebuilt from the
//! factory once the last handshaken session leaves.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::EngineError;
use crate::harness::{Visit, VisitInput, VisitRecord};
use crate::scene::NodeKind;

use super::message::{
    decode_message, encode_message, ClientMode, ErrorCode, Frame, FrameMapping, Message,
    NodeLayout, Welcome,
};

pub type SessionId = u64;

pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

pub type VisitFactory = Box<dyn Fn() -> Result<Visit, EngineError> + Send>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    /// One encoded message, LF included.
    Line(SessionId, String),
    Close(SessionId),
}

#[derive(Debug, Clone)]
struct Session {
    mode: Option<ClientMode>,
    deadline: Instant,
    last_seq_in: Option<u64>,
}

impl Session {
    fn handshaken(&self) -> bool {
        self.mode.is_some()
    }
}

pub struct Hub {
    factory: VisitFactory,
    visit: Visit,
    sessions: BTreeMap<SessionId, Session>,
    pending: Vec<VisitInput>,
    handshake_timeout: Duration,
}

impl Hub {
    pub fn new(factory: VisitFactory) -> Result<Self, EngineError> {
        let visit = factory()?;
        Ok(Self {
            factory,
            visit,
            sessions: BTreeMap::new(),
            pending: Vec::new(),
            handshake_timeout: HANDSHAKE_TIMEOUT,
        })
    }

    pub fn with_handshake_timeout(mut self, timeout: Duration) -> Self {
        self.handshake_timeout = timeout;
        self
    }

    pub fn visit(&self) -> &Visit {
        &self.visit
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn active_count(&self) -> usize {
        self.sessions.values().filter(|s| s.handshaken()).count()
    }

    pub fn welcome(&self) -> Welcome {
        let manifest = self.visit.engine().manifest();
        Welcome {
            scene_id: manifest.scene_id.clone(),
            title: manifest.title.clone(),
            tick_rate: self.visit.config().engine.tick_rate,
            surfaces: manifest
                .nodes
                .iter()
                .filter(|n| n.kind == NodeKind::MediaSurface)
                .map(|n| n.node_id.clone())
                .collect(),
            speakers: manifest
                .speakers
                .iter()
                .map(|s| s.speaker_id.clone())
                .collect(),
            menu_options: manifest
                .menu()
                .map(|m| m.options.clone())
                .unwrap_or_default(),
            nodes: manifest
                .nodes
                .iter()
                .map(|n| NodeLayout {
                    node_id: n.node_id.clone(),
                    kind: n.kind,
                    pose: n.pose,
                    extent: n.extent,
                })
                .collect(),
            workspace: self.visit.config().workspace,
        }
    }

    pub fn connect(&mut self, id: SessionId, now: Instant) {
        self.sessions.insert(
            id,
            Session {
                mode: None,
                deadline: now + self.handshake_timeout,
                last_seq_in: None,
            },
        );
    }

    pub fn disconnect(&mut self, id: SessionId) {
        if self.sessions.remove(&id).is_some() {
            self.reset_if_idle();
        }
    }

    /// Handles one line from a session. Accepted inputs are queued for the
    /// next tick; everything else is answered right away.
    pub fn receive(&mut self, id: SessionId, line: &str) -> Vec<Outbound> {
        let Some(session) = self.sessions.get(&id) else {
            return Vec::new();
        };
        let handshaken = session.handshaken();
        let last_seq = session.last_seq_in;

        let msg = match decode_message(line) {
            Ok(msg) => msg,
            Err(err) => {
                let mut out = vec![error_line(id, err.code(), err.to_string())];
                if err.code() == ErrorCode::BadVersion {
                    out.push(Outbound::Close(id));
                    self.disconnect(id);
                }
                return out;
            }
        };

        let (seq, input) = match msg {
            Message::Hello(hello) => {
                if handshaken {
                    return vec![error_line(id, ErrorCode::BadInput, "duplicate HELLO")];
                }
                if let Some(session) = self.sessions.get_mut(&id) {
                    session.mode = Some(hello.mode);
                }
                let welcome = Message::Welcome(self.welcome());
                return vec![Outbound::Line(id, encode_message(&welcome))];
            }
            _ if !handshaken => {
                return vec![error_line(id, ErrorCode::BadInput, "expected HELLO first")];
            }
            Message::PoseInput(p) => (p.seq, Some(VisitInput::Move(p.movement))),
            Message::SelectCity(s) => (s.seq, Some(VisitInput::SelectCity(s.city_id))),
            Message::Bye(b) => (b.seq, None),
            other => {
                return vec![error_line(
                    id,
                    ErrorCode::BadInput,
                    format!("{} is sent by the server only", other.type_name()),
                )];
            }
        };

        if last_seq.is_some_and(|last| seq <= last) {
            return vec![error_line(
                id,
                ErrorCode::BadInput,
                format!("seq {seq} does not increase"),
            )];
        }
        if let Some(input) = &input {
            if let Err(detail) = self.visit.check_input(input) {
                return vec![error_line(id, ErrorCode::BadInput, detail)];
            }
        }
        if let Some(session) = self.sessions.get_mut(&id) {
            session.last_seq_in = Some(seq);
        }
        match input {
            Some(input) => {
                self.pending.push(input);
                Vec::new()
            }
            None => {
                self.disconnect(id);
                vec![Outbound::Close(id)]
            }
        }
    }

    /// Drops sessions that have not said HELLO in time.
    pub fn expire(&mut self, now: Instant) -> Vec<Outbound> {
        let late: Vec<SessionId> = self
            .sessions
            .iter()
            .filter(|(_, s)| !s.handshaken() && now >= s.deadline)
            .map(|(id, _)| *id)
            .collect();
        let mut out = Vec::new();
        for id in late {
            out.push(error_line(
                id,
                ErrorCode::HandshakeTimeout,
                "no HELLO received",
            ));
            out.push(Outbound::Close(id));
            self.sessions.remove(&id);
        }
        out
    }

    /// Applies the queued inputs, advances one tick and broadcasts the
    /// frame. Does nothing while no session is handshaken.
    pub fn tick(&mut self) -> Vec<Outbound> {
        if self.active_count() == 0 {
            return Vec::new();
        }
        let inputs = std::mem::take(&mut self.pending);
        let record = match self.visit.step(&inputs) {
            Ok(record) => record,
            Err(err) => {
                tracing::error!(%err, "tick rejected queued inputs");
                return Vec::new();
            }
        };
        let line = encode_message(&Message::Frame(frame_from_record(&record)));
        self.sessions
            .iter()
            .filter(|(_, s)| s.handshaken())
            .map(|(id, _)| Outbound::Line(*id, line.clone()))
            .collect()
    }

    fn reset_if_idle(&mut self) {
        if self.active_count() > 0 || self.visit.engine().t_ticks() == 0 {
            return;
        }
        self.pending.clear();
        match (self.factory)() {
            Ok(visit) => self.visit = visit,
            Err(err) => tracing::error!(%err, "could not rebuild visit"),
        }
    }
}

pub fn frame_from_record(record: &VisitRecord) -> Frame {
    Frame {
        seq: record.frame.t_ticks,
        t_ticks: record.frame.t_ticks,
        time: record.frame.time,
        user_virtual_pose: record.frame.user_virtual_pose,
        mapping: FrameMapping {
            phys_pose: record.mapping.phys_pose,
            heading_offset: record.mapping.heading_offset,
        },
        surfaces: record.frame.surfaces.clone(),
        speaker_gains: record.frame.speaker_gains.clone(),
        selected_city: record.frame.menu.selected_city.clone(),
    }
}

fn error_line(id: SessionId, code: ErrorCode, detail: impl Into<String>) -> Outbound {
    Outbound::Line(id, encode_message(&Message::error(code, detail)))
}

/// One scripted client line, delivered after the given tick has been
/// broadcast (0 means right after connecting).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientLine {
    pub after_tick: u64,
    pub line: String,
}

/// Plays a single scripted client against the hub for `ticks` ticks and
/// returns every line the client received, in order.
pub fn replay_client(hub: &mut Hub, script: &[ClientLine], ticks: u64) -> Vec<String> {
    const ID: SessionId = 1;
    let now = Instant::now();
    hub.connect(ID, now);
    let mut received = Vec::new();
    let mut closed = false;
    let collect = |out: Vec<Outbound>, received: &mut Vec<String>, closed: &mut bool| {
        for action in out {
            match action {
                Outbound::Line(id, line) if id == ID => received.push(line),
                Outbound::Close(id) if id == ID => *closed = true,
                _ => {}
            }
        }
    };
    let mut next = 0;
    for tick in 0..=ticks {
        if tick > 0 {
            let out = hub.tick();
            collect(out, &mut received, &mut closed);
        }
        while next < script.len() && script[next].after_tick == tick && !closed {
            let out = hub.receive(ID, &script[next].line);
            collect(out, &mut received, &mut closed);
            next += 1;
        }
        if closed {
            break;
        }
    }
    hub.disconnect(ID);
    received
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::harness::VisitConfig;
    use crate::protocol::message::{Bye, Hello, PROTOCOL_VERSION};
    use crate::scene::builtin_scene;

    fn vf_hub() -> Hub {
        let manifest = Arc::new(builtin_scene("vf").unwrap());
        Hub::new(Box::new(move || {
            Visit::new(manifest.clone(), None, VisitConfig::default(), 7)
        }))
        .unwrap()
    }

    fn hello() -> String {
        encode_message(&Message::Hello(Hello {
            client_name: "t".into(),
            mode: ClientMode::Scripted,
            protocol: PROTOCOL_VERSION.into(),
        }))
    }

    fn decode_lines(out: &[Outbound]) -> Vec<Message> {
        out.iter()
            .filter_map(|o| match o {
                Outbound::Line(_, l) => Some(decode_message(l).unwrap()),
                Outbound::Close(_) => None,
            })
            .collect()
    }

    #[test]
    fn no_frames_before_hello() {
        let mut hub = vf_hub();
        hub.connect(1, Instant::now());
        assert!(hub.tick().is_empty());
        let out = hub.receive(1, &encode_message(&Message::Bye(Bye { seq: 1 })));
        assert!(matches!(
            &decode_lines(&out)[0],
            Message::Error(e) if e.code == ErrorCode::BadInput
        ));
        let out = hub.receive(1, &hello());
        assert!(matches!(&decode_lines(&out)[0], Message::Welcome(w) if w.surfaces.len() == 38));
        let out = hub.tick();
        assert!(
            matches!(&decode_lines(&out)[0], Message::Frame(f) if f.t_ticks == 1 && f.seq == 1)
        );
    }

    #[test]
    fn handshake_timeout_drops_session() {
        let mut hub = vf_hub();
        let t0 = Instant::now();
        hub.connect(1, t0);
        hub.connect(2, t0);
        hub.receive(2, &hello());
        assert!(hub.expire(t0 + Duration::from_millis(4999)).is_empty());
        let out = hub.expire(t0 + HANDSHAKE_TIMEOUT);
        assert_eq!(out.len(), 2);
        assert!(matches!(
            &decode_lines(&out)[0],
            Message::Error(e) if e.code == ErrorCode::HandshakeTimeout
        ));
        assert_eq!(out[1], Outbound::Close(1));
        assert_eq!(hub.session_count(), 1);
    }

    #[test]
    fn bad_version_closes() {
        let mut hub = vf_hub();
        hub.connect(1, Instant::now());
        let line = hello().replace(PROTOCOL_VERSION, "einstall/0");
        let out = hub.receive(1, &line);
        assert_eq!(out.last(), Some(&Outbound::Close(1)));
        assert_eq!(hub.session_count(), 0);
    }

    #[test]
    fn seq_must_increase() {
        let mut hub = vf_hub();
        hub.connect(1, Instant::now());
        hub.receive(1, &hello());
        let pose = |seq: u64| {
            format!(
                "{{\"type\":\"POSE_INPUT\",\"seq\":{seq},\"move\":{{\"ds\":0.01,\"dtheta\":0.0}}}}"
            )
        };
        assert!(hub.receive(1, &pose(1)).is_empty());
        let out = hub.receive(1, &pose(1));
        assert!(
            matches!(&decode_lines(&out)[0], Message::Error(e) if e.code == ErrorCode::BadInput)
        );
        assert!(hub.receive(1, &pose(5)).is_empty());
    }

    #[test]
    fn visit_resets_when_everyone_leaves() {
        let mut hub = vf_hub();
        hub.connect(1, Instant::now());
        hub.receive(1, &hello());
        hub.tick();
        hub.tick();
        assert_eq!(hub.visit().engine().t_ticks(), 2);
        hub.receive(1, &encode_message(&Message::Bye(Bye { seq: 1 })));
        assert_eq!(hub.visit().engine().t_ticks(), 0);
        assert_eq!(hub.session_count(), 0);
    }

    #[test]
    fn broadcast_lines_are_identical() {
        let mut hub = vf_hub();
        for id in [1, 2] {
            hub.connect(id, Instant::now());
            hub.receive(id, &hello());
        }
        let out = hub.tick();
        assert_eq!(out.len(), 2);
        let (Outbound::Line(_, a), Outbound::Line(_, b)) = (&out[0], &out[1]) else {
            panic!("expected two lines");
        };
        assert_eq!(a, b);
    }
}
