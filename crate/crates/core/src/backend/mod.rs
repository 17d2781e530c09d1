// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

//! Client side of the newline-delimited JSON backend protocol, plus a
//! loopback echo server used as a conformance fixture.
//!
//! One request per line, one response per line, strictly in order. Tensors
//! travel as `{"shape": [...], "data": "<base64 of f32 LE>"}`.

mod client;
mod echo;
mod protocol;

pub use client::{RemoteBackend, Session, TcpSession};
pub use echo::{handle_frame, EchoServer, ECHO_LATENT_SHAPE, ECHO_SCALE};
pub use protocol::{
    decode_request, decode_response, encode_request, encode_response, Info, Request, RequestBody, Response,
    ResultBody, ScheduleInfo, ServerError, Tensor, PROTOCOL_VERSION,
};

use thiserror::Error;

/// Environment variable naming the default backend address.
pub const BACKEND_ENV: &str = "MIDAS_BACKEND";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("connection to {addr} refused: {source}")]
    ConnectionRefused {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error("protocol error at byte {offset}: {message}")]
    Protocol { offset: usize, message: String },

    #[error("response id {actual} does not match request id {expected}")]
    IdMismatch { expected: u64, actual: u64 },

    #[error("server error [{code}]: {message}")]
    Server { code: String, message: String },

    #[error("backend closed the connection")]
    Disconnected,

    #[error("backend i/o: {0}")]
    Io(#[from] std::io::Error),
}
