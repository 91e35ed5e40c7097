//! Wire frames: a 4-byte big-endian length followed by one trace-format
//! broadcast record carrying the message id, operation and vector clock.

use std::io::{self, Read};

use thiserror::Error;

use crdtsim::trace::TraceRecord;
use crdtsim::{Datatype, Message};

/// Frames larger than this are rejected as malformed.
pub const MAX_FRAME: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("empty frame")]
    Empty,
    #[error("length prefix is truncated ({0} of 4 bytes)")]
    TruncatedPrefix(usize),
    #[error("payload is truncated ({got} of {expected} bytes)")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("{0} bytes follow the frame")]
    TrailingBytes(usize),
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode_frame<D: Datatype>(msg: &Message<D::Op>) -> Vec<u8> {
    let payload = TraceRecord::broadcast_of::<D>(msg.sender(), msg, false).to_line().into_bytes();
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

fn decode_payload<D: Datatype>(payload: &[u8]) -> Result<Message<D::Op>, FrameError> {
    if payload.is_empty() {
        return Err(FrameError::Empty);
    }
    let record: TraceRecord = serde_json::from_slice(payload).map_err(|e| FrameError::Malformed(e.to_string()))?;
    let TraceRecord::Broadcast { node, id: Some(id), operation, clock: Some(clock), forced: false } = record else {
        return Err(FrameError::Malformed("expected a broadcast record with message-id and clock".into()));
    };
    if node != id.node {
        return Err(FrameError::Malformed(format!("sender {node} does not match message id {id}")));
    }
    let op = D::from_wire(operation).map_err(FrameError::Malformed)?;
    Ok(Message::new(id, op, clock))
}

/// Decodes exactly one complete frame.
pub fn decode_frame<D: Datatype>(bytes: &[u8]) -> Result<Message<D::Op>, FrameError> {
    if bytes.is_empty() {
        return Err(FrameError::Empty);
    }
    if bytes.len() < 4 {
        return Err(FrameError::TruncatedPrefix(bytes.len()));
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let rest = &bytes[4..];
    if rest.len() < len {
        return Err(FrameError::TruncatedPayload { expected: len, got: rest.len() });
    }
    if rest.len() > len {
        return Err(FrameError::TrailingBytes(rest.len() - len));
    }
    decode_payload::<D>(rest)
}

/// Reads the next frame from a stream. `Ok(None)` on a clean end of stream
/// between frames.
pub fn read_frame<D: Datatype>(r: &mut impl Read) -> Result<Option<Message<D::Op>>, FrameError> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(FrameError::TruncatedPrefix(got)),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0u8; len];
    let mut got = 0;
    while got < len {
        match r.read(&mut payload[got..]) {
            Ok(0) => return Err(FrameError::TruncatedPayload { expected: len, got }),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    decode_payload::<D>(&payload).map(Some)
}
