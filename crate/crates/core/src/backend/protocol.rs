// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::diffusion::TRAIN_STEPS;

pub const PROTOCOL_VERSION: u32 = 1;

/// Dense f32 tensor as carried on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WireTensor", into = "WireTensor")]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct WireTensor {
    shape: Vec<usize>,
    data: String,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, String> {
        let n = element_count(&shape)?;
        if n != data.len() {
            return Err(format!("shape {shape:?} needs {n} values, got {}", data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }
}

fn element_count(shape: &[usize]) -> Result<usize, String> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format!("shape {shape:?} overflows"))
}

impl From<Tensor> for WireTensor {
    fn from(t: Tensor) -> Self {
        let mut bytes = Vec::with_capacity(t.data.len() * 4);
        for v in &t.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        WireTensor {
            shape: t.shape,
            data: B64.encode(bytes),
        }
    }
}

impl TryFrom<WireTensor> for Tensor {
    type Error = String;

    fn try_from(w: WireTensor) -> Result<Self, String> {
        let bytes = B64.decode(w.data.as_bytes()).map_err(|e| format!("tensor data: {e}"))?;
        let n = element_count(&w.shape)?;
        if bytes.len() != n * 4 {
            return Err(format!(
                "tensor payload is {} bytes, shape {:?} needs {}",
                bytes.len(),
                w.shape,
                n * 4
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Tensor { shape: w.shape, data })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RequestBody {
    Info,
    PredictNoise {
        latent: Tensor,
        /// Timestep of the 1000-step training schedule.
        timestep: u32,
        prompt: String,
        ref_weight: f64,
        guidance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ref_latent: Option<Tensor>,
    },
    /// `image` is `[3, H, W]` with samples in 0–255.
    Encode { image: Tensor },
    Decode { latent: Tensor },
}

impl RequestBody {
    pub fn op(&self) -> &'static str {
        match self {
            RequestBody::Info => "info",
            RequestBody::PredictNoise { .. } => "predict_noise",
            RequestBody::Encode { .. } => "encode",
            RequestBody::Decode { .. } => "decode",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ServerError>,
}

impl Response {
    pub fn ok(id: u64, result: ResultBody) -> Self {
        Response {
            id,
            result: Some(result),
            error: None,
        }
    }

    pub fn err(id: u64, code: impl Into<String>, message: impl Into<String>) -> Self {
        Response {
            id,
            result: None,
            error: Some(ServerError {
                code: code.into(),
                message: message.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultBody {
    Info(Info),
    Tensor(Tensor),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Info {
    pub protocol_version: u32,
    /// Latent `[C, H, W]` at the server's native image size.
    pub latent_shape: [usize; 3],
    /// Pixels per latent cell along each axis.
    pub scale: usize,
    pub schedule: ScheduleInfo,
    pub concurrency_safe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInfo {
    pub kind: String,
    pub train_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleInfo {
    fn default() -> Self {
        ScheduleInfo {
            kind: "scaled_linear".into(),
            train_steps: TRAIN_STEPS,
            beta_start: 0.00085,
            beta_end: 0.012,
        }
    }
}

fn encode_frame<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(value).expect("protocol types always serialize");
    out.push(b'\n');
    out
}

fn decode_frame<'a, T: Deserialize<'a>>(line: &'a [u8]) -> Result<T, BackendError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    serde_json::from_slice(line).map_err(|e| {
        // Frames are single lines, so the column is the byte position.
        let offset = if e.line() > 1 {
            line.len()
        } else {
            e.column().saturating_sub(1).min(line.len())
        };
        BackendError::Protocol {
            offset,
            message: e.to_string(),
        }
    })
}

/// One newline-terminated frame.
pub fn encode_request(req: &Request) -> Vec<u8> {
    encode_frame(req)
}

pub fn decode_request(line: &[u8]) -> Result<Request, BackendError> {
    decode_frame(line)
}

pub fn encode_response(resp: &Response) -> Vec<u8> {
    encode_frame(resp)
}

pub fn decode_response(line: &[u8]) -> Result<Response, BackendError> {
    let resp: Response = decode_frame(line)?;
    if resp.result.is_some() == resp.error.is_some() {
        return Err(BackendError::Protocol {
            offset: 0,
            message: "response must carry exactly one of result or error".into(),
        });
    }
    Ok(resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn predict_request() -> Request {
        Request {
            id: 7,
            body: RequestBody::PredictNoise {
                latent: Tensor::new(vec![1, 1, 2], vec![1.5, -2.0]).unwrap(),
                timestep: 981,
                prompt: "a cat".into(),
                ref_weight: 0.5,
                guidance: 1.0,
                ref_latent: None,
            },
        }
    }

    #[test]
    fn request_layout() {
        let text = String::from_utf8(encode_request(&predict_request())).unwrap();
        assert_eq!(
            text,
            "{\"id\":7,\"op\":\"predict_noise\",\"latent\":{\"shape\":[1,1,2],\"data\":\"AADAPwAAAMA=\"},\
             \"timestep\":981,\"prompt\":\"a cat\",\"ref_weight\":0.5,\"guidance\":1.0}\n"
        );
        assert_eq!(decode_request(text.as_bytes()).unwrap(), predict_request());
    }

    #[test]
    fn info_request_is_minimal() {
        let req = Request {
            id: 1,
            body: RequestBody::Info,
        };
        assert_eq!(encode_request(&req), b"{\"id\":1,\"op\":\"info\"}\n");
    }

    #[test]
    fn payload_length_is_checked() {
        let line = br#"{"id":1,"op":"decode","latent":{"shape":[2],"data":"AADAPw=="}}"#;
        match decode_request(line) {
            Err(BackendError::Protocol { message, .. }) => assert!(message.contains("needs 8"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        match decode_response(b"{\"id\":1,\"result\":}") {
            Err(BackendError::Protocol { offset, .. }) => assert_eq!(offset, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn response_needs_exactly_one_outcome() {
        assert!(decode_response(b"{\"id\":1}").is_err());
        let both = br#"{"id":1,"result":{"tensor":{"shape":[0],"data":""}},"error":{"code":"x","message":"y"}}"#;
        assert!(decode_response(both).is_err());
        let err = decode_response(br#"{"id":3,"error":{"code":"busy","message":"later"}}"#).unwrap();
        assert_eq!(err, Response::err(3, "busy", "later"));
    }
}
