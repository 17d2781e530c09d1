// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use super::protocol::{decode_request, encode_response, Info, RequestBody, Response, ResultBody, ScheduleInfo, Tensor};
use super::{BackendError, PROTOCOL_VERSION};
use crate::codec::{ImageBuffer, LatentCodec, ToyCodec, TOY_SCALE};
use crate::tensor::{Latent, Shape};

pub const ECHO_LATENT_SHAPE: [usize; 3] = [4, 64, 64];
pub const ECHO_SCALE: usize = TOY_SCALE;

/// Loopback fixture server: `predict_noise` returns its input latent,
/// `encode`/`decode` use the toy codec.
pub struct EchoServer {
    listener: TcpListener,
}

impl EchoServer {
    pub fn bind(addr: impl ToSocketAddrs) -> std::io::Result<Self> {
        Ok(EchoServer {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves connections until the process exits, one thread each.
    pub fn serve(self) {
        for stream in self.listener.incoming() {
            match stream {
                Ok(s) => {
                    thread::spawn(move || {
                        if let Err(e) = serve_connection(s) {
                            log::debug!("echo connection ended: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("echo accept failed: {e}"),
            }
        }
    }

    /// Runs [`EchoServer::serve`] on a background thread.
    pub fn spawn(self) -> std::io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::spawn(move || self.serve());
        Ok(addr)
    }
}

fn serve_connection(stream: TcpStream) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        writer.write_all(&handle_frame(&line))?;
        writer.flush()?;
    }
}

fn echo_info() -> Info {
    Info {
        protocol_version: PROTOCOL_VERSION,
        latent_shape: ECHO_LATENT_SHAPE,
        scale: ECHO_SCALE,
        schedule: ScheduleInfo::default(),
        concurrency_safe: false,
    }
}

/// Answers one request frame with one response frame.
pub fn handle_frame(line: &[u8]) -> Vec<u8> {
    let resp = match decode_request(line) {
        Ok(req) => match answer(req.body) {
            Ok(result) => Response::ok(req.id, result),
            Err((code, message)) => Response::err(req.id, code, message),
        },
        Err(BackendError::Protocol { offset, message }) => {
            let id = serde_json::from_slice::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_u64()))
                .unwrap_or(0);
            Response::err(id, "bad_request", format!("byte {offset}: {message}"))
        }
        Err(e) => Response::err(0, "bad_request", e.to_string()),
    };
    encode_response(&resp)
}

fn answer(body: RequestBody) -> Result<ResultBody, (&'static str, String)> {
    let bad = |e: crate::error::Error| ("bad_tensor", e.to_string());
    match body {
        RequestBody::Info => Ok(ResultBody::Info(echo_info())),
        RequestBody::PredictNoise { latent, .. } => Ok(ResultBody::Tensor(latent)),
        RequestBody::Encode { image } => {
            let [3, h, w] = image.shape[..] else {
                return Err(("bad_tensor", format!("image shape {:?} is not [3, H, W]", image.shape)));
            };
            let plane = w * h;
            let img = ImageBuffer::from_fn(w, h, |x, y| {
                [0, 1, 2].map(|c| crate::codec::to_u8(image.data[c * plane + y * w + x] as f64))
            });
            let z = ToyCodec.encode(&img).map_err(bad)?;
            Ok(ResultBody::Tensor(Tensor {
                shape: vec![z.shape().channels, z.shape().height, z.shape().width],
                data: z.data().iter().map(|&v| v as f32).collect(),
            }))
        }
        RequestBody::Decode { latent } => {
            let [c, h, w] = latent.shape[..] else {
                return Err(("bad_tensor", format!("latent shape {:?} is not [C, H, W]", latent.shape)));
            };
            let z = Latent::from_vec(Shape::new(c, h, w), latent.data.iter().map(|&v| v as f64).collect())
                .map_err(bad)?;
            let img = ToyCodec.decode(&z).map_err(bad)?;
            let (w, h) = (img.width(), img.height());
            let mut data = vec![0.0f32; 3 * w * h];
            for (i, px) in img.data().chunks_exact(3).enumerate() {
                for (c, &v) in px.iter().enumerate() {
                    data[c * w * h + i] = v as f32;
                }
            }
            Ok(ResultBody::Tensor(Tensor {
                shape: vec![3, h, w],
                data,
            }))
        }
    }
}
