// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Mutex;

use super::protocol::{decode_response, encode_request, Info, Request, RequestBody, Response, ResultBody, Tensor};
use super::{BackendError, PROTOCOL_VERSION};
use crate::codec::{to_u8, ImageBuffer, LatentCodec};
use crate::diffusion::{Condition, NoisePredictor, StepInfo};
use crate::error::{Error, Result};
use crate::tensor::{Latent, Shape};

/// One ordered request/response stream. Only one request is in flight.
pub struct Session<R, W> {
    reader: R,
    writer: W,
    next_id: u64,
    /// Bytes consumed from the reader, for error reporting.
    consumed: usize,
}

pub type TcpSession = Session<BufReader<TcpStream>, TcpStream>;

impl TcpSession {
    /// `addr` is `host:port`, optionally prefixed with `tcp:`.
    pub fn connect(addr: &str) -> Result<Self, BackendError> {
        let addr = addr.strip_prefix("tcp:").unwrap_or(addr);
        let stream = TcpStream::connect(addr).map_err(|source| BackendError::ConnectionRefused {
            addr: addr.to_string(),
            source,
        })?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Session::new(reader, stream))
    }
}

impl<R: BufRead, W: Write> Session<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Session {
            reader,
            writer,
            next_id: 1,
            consumed: 0,
        }
    }

    /// Sends one request and reads its response. Server-side error objects
    /// are returned as part of the response, not as `Err`.
    pub fn call(&mut self, body: RequestBody) -> Result<Response, BackendError> {
        let id = self.next_id;
        self.next_id += 1;
        self.writer.write_all(&encode_request(&Request { id, body }))?;
        self.writer.flush()?;

        let mut line = Vec::new();
        let n = self.reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            return Err(BackendError::Disconnected);
        }
        let start = self.consumed;
        self.consumed += n;
        let resp = decode_response(&line).map_err(|e| match e {
            BackendError::Protocol { offset, message } => BackendError::Protocol {
                offset: start + offset,
                message,
            },
            other => other,
        })?;
        if resp.id != id {
            return Err(BackendError::IdMismatch {
                expected: id,
                actual: resp.id,
            });
        }
        Ok(resp)
    }

    /// Like [`Session::call`] but turns server error objects into errors.
    pub fn request(&mut self, body: RequestBody) -> Result<ResultBody, BackendError> {
        let resp = self.call(body)?;
        match (resp.result, resp.error) {
            (Some(result), _) => Ok(result),
            (None, Some(e)) => Err(BackendError::Server {
                code: e.code,
                message: e.message,
            }),
            (None, None) => unreachable!("decode_response rejects empty responses"),
        }
    }

    pub fn info(&mut self) -> Result<Info, BackendError> {
        match self.request(RequestBody::Info)? {
            ResultBody::Info(info) => Ok(info),
            ResultBody::Tensor(_) => Err(unexpected("info", "tensor")),
        }
    }

    fn tensor(&mut self, body: RequestBody) -> Result<Tensor, BackendError> {
        let op = body.op();
        match self.request(body)? {
            ResultBody::Tensor(t) => Ok(t),
            ResultBody::Info(_) => Err(unexpected(op, "info")),
        }
    }
}

fn unexpected(op: &str, got: &str) -> BackendError {
    BackendError::Protocol {
        offset: 0,
        message: format!("{op} answered with an {got} result"),
    }
}

fn latent_to_tensor(z: &Latent) -> Tensor {
    let s = z.shape();
    Tensor {
        shape: vec![s.channels, s.height, s.width],
        data: z.data().iter().map(|&v| v as f32).collect(),
    }
}

fn tensor_to_latent(t: Tensor) -> Result<Latent> {
    let [c, h, w] = t.shape[..] else {
        return Err(Error::dims("[C, H, W]", format!("{:?}", t.shape)));
    };
    Latent::from_vec(Shape::new(c, h, w), t.data.into_iter().map(f64::from).collect())
}

/// A denoiser and codec served over the wire protocol.
///
/// Holds several sessions when the server declares itself
/// concurrency-safe; otherwise requests are serialized over one.
pub struct RemoteBackend {
    sessions: Vec<Mutex<TcpSession>>,
    info: Info,
}

impl RemoteBackend {
    pub fn connect(addr: &str) -> Result<Self> {
        Self::connect_pool(addr, 1)
    }

    pub fn connect_pool(addr: &str, max_sessions: usize) -> Result<Self> {
        let mut first = TcpSession::connect(addr)?;
        let info = first.info()?;
        if info.protocol_version != PROTOCOL_VERSION {
            return Err(BackendError::Protocol {
                offset: 0,
                message: format!(
                    "server speaks protocol {}, client speaks {PROTOCOL_VERSION}",
                    info.protocol_version
                ),
            }
            .into());
        }
        if info.schedule != super::ScheduleInfo::default() {
            log::warn!("backend schedule {:?} differs from the local sampler schedule", info.schedule);
        }
        let mut sessions = vec![Mutex::new(first)];
        if info.concurrency_safe {
            for _ in 1..max_sessions.max(1) {
                sessions.push(Mutex::new(TcpSession::connect(addr)?));
            }
        }
        Ok(RemoteBackend { sessions, info })
    }

    pub fn info(&self) -> &Info {
        &self.info
    }

    fn with_session<T>(&self, f: impl FnOnce(&mut TcpSession) -> Result<T, BackendError>) -> Result<T> {
        let guard = self
            .sessions
            .iter()
            .find_map(|s| s.try_lock().ok())
            .unwrap_or_else(|| self.sessions[0].lock().unwrap_or_else(|p| p.into_inner()));
        let mut guard = guard;
        Ok(f(&mut guard)?)
    }
}

impl NoisePredictor for RemoteBackend {
    fn predict(&self, latent: &Latent, step: StepInfo, cond: &Condition) -> Result<Latent> {
        let body = RequestBody::PredictNoise {
            latent: latent_to_tensor(latent),
            timestep: step.timestep as u32,
            prompt: cond.prompt.clone(),
            ref_weight: cond.ref_weight,
            guidance: cond.guidance,
            ref_latent: cond.ref_latent.as_ref().map(latent_to_tensor),
        };
        let out = tensor_to_latent(self.with_session(|s| s.tensor(body))?)?;
        out.ensure_shape(latent.shape())?;
        Ok(out)
    }

    fn concurrency_safe(&self) -> bool {
        self.info.concurrency_safe && self.sessions.len() > 1
    }
}

impl LatentCodec for RemoteBackend {
    fn encode(&self, img: &ImageBuffer) -> Result<Latent> {
        let expected = self.latent_shape(img.width(), img.height())?;
        let (w, h) = (img.width(), img.height());
        let mut data = vec![0.0f32; 3 * w * h];
        for (i, px) in img.data().chunks_exact(3).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * w * h + i] = v as f32;
            }
        }
        let image = Tensor {
            shape: vec![3, h, w],
            data,
        };
        let z = tensor_to_latent(self.with_session(|s| s.tensor(RequestBody::Encode { image }))?)?;
        z.ensure_shape(expected)?;
        Ok(z)
    }

    fn decode(&self, z: &Latent) -> Result<ImageBuffer> {
        let (ew, eh) = self.image_size(z.shape());
        let t = self.with_session(|s| s.tensor(RequestBody::Decode { latent: latent_to_tensor(z) }))?;
        if t.shape != [3, eh, ew] {
            return Err(Error::dims(format!("[3, {eh}, {ew}]"), format!("{:?}", t.shape)));
        }
        let plane = ew * eh;
        Ok(ImageBuffer::from_fn(ew, eh, |x, y| {
            let i = y * ew + x;
            [0, 1, 2].map(|c| to_u8(t.data[c * plane + i] as f64))
        }))
    }

    fn scale(&self) -> usize {
        self.info.scale
    }

    fn latent_channels(&self) -> usize {
        self.info.latent_shape[0]
    }
}
