//! Client/server protocol: line-delimited JSON messages, a session hub that
//! shares one visit among all clients, and the TCP/WebSocket server.

mod hub;
mod message;
mod server;

pub use hub::{
    frame_from_record, replay_client, ClientLine, Hub, Outbound, SessionId, VisitFactory,
    HANDSHAKE_TIMEOUT,
};
pub use message::{
    decode_message, encode_message, Bye, ClientMode, DecodeError, ErrorCode, ErrorMessage, Frame,
    FrameMapping, Hello, Message, NodeLayout, PoseInput, SelectCity, Welcome, PROTOCOL_VERSION,
};
pub use server::{serve, ServerConfig, ServerHandle, DEFAULT_TCP_PORT, DEFAULT_WS_PORT, WS_PATH};
