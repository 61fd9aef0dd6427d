//! Fixed-size little-endian frames for the two protocol messages.
//!
//! ```text
//! report    : FD 52 | 01 | 01 | node_id u32 | m u64    | r0_hat f64     (24 bytes)
//! broadcast : FD 52 | 01 | 02 | round_id u32 | beta_star f64           (16 bytes)
//! ```
//!
//! `beta_star = +inf` is the reject-nothing sentinel.

use super::messages::{CenterBroadcast, NodeReport};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 2] = [0xFD, 0x52];
pub const VERSION: u8 = 1;
pub const MSG_REPORT: u8 = 1;
pub const MSG_BROADCAST: u8 = 2;
pub const HEADER_LEN: usize = 4;
pub const REPORT_FRAME_LEN: usize = HEADER_LEN + 4 + 8 + 8;
pub const BROADCAST_FRAME_LEN: usize = HEADER_LEN + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    Report(NodeReport),
    Broadcast(CenterBroadcast),
}

fn decode_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Decode {
        field,
        reason: reason.into(),
    }
}

fn header(msg_type: u8) -> [u8; HEADER_LEN] {
    [MAGIC[0], MAGIC[1], VERSION, msg_type]
}

pub fn encode_report(r: &NodeReport) -> Vec<u8> {
    let mut buf = Vec::with_capacity(REPORT_FRAME_LEN);
    buf.extend_from_slice(&header(MSG_REPORT));
    buf.extend_from_slice(&r.node_id.to_le_bytes());
    buf.extend_from_slice(&r.m.to_le_bytes());
    buf.extend_from_slice(&r.r0_hat.to_le_bytes());
    buf
}

pub fn encode_broadcast(b: &CenterBroadcast) -> Vec<u8> {
    let mut buf = Vec::with_capacity(BROADCAST_FRAME_LEN);
    buf.extend_from_slice(&header(MSG_BROADCAST));
    buf.extend_from_slice(&b.round_id.to_le_bytes());
    buf.extend_from_slice(&b.beta_star.to_le_bytes());
    buf
}

/// Checks magic and version and returns the message type byte.
fn read_header(buf: &[u8]) -> Result<u8> {
    if buf.len() < HEADER_LEN {
        return Err(decode_err("frame", format!("truncated: {} bytes", buf.len())));
    }
    if buf[..2] != MAGIC {
        return Err(decode_err("magic", format!("expected FD 52, got {:02X} {:02X}", buf[0], buf[1])));
    }
    if buf[2] != VERSION {
        return Err(decode_err("version", format!("unsupported version {}", buf[2])));
    }
    Ok(buf[3])
}

fn expect_len(buf: &[u8], want: usize) -> Result<()> {
    match buf.len() {
        n if n < want => Err(decode_err("frame", format!("truncated: {n} of {want} bytes"))),
        n if n > want => Err(decode_err("frame", format!("overlong: {n} bytes, expected {want}"))),
        _ => Ok(()),
    }
}

fn u32_at(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().expect("length checked"))
}

fn u64_at(buf: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(buf[at..at + 8].try_into().expect("length checked"))
}

fn f64_at(buf: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(buf[at..at + 8].try_into().expect("length checked"))
}

pub fn decode_report(buf: &[u8]) -> Result<NodeReport> {
    let ty = read_header(buf)?;
    if ty != MSG_REPORT {
        return Err(decode_err("msg_type", format!("expected report (1), got {ty}")));
    }
    expect_len(buf, REPORT_FRAME_LEN)?;
    let node_id = u32_at(buf, 4);
    if node_id == 0 {
        return Err(decode_err("node_id", "node ids start at 1"));
    }
    let r0_hat = f64_at(buf, 16);
    if !(0.0..=1.0).contains(&r0_hat) {
        return Err(decode_err("r0_hat", format!("r0_hat out of range: {r0_hat}")));
    }
    Ok(NodeReport {
        node_id,
        m: u64_at(buf, 8),
        r0_hat,
    })
}

pub fn decode_broadcast(buf: &[u8]) -> Result<CenterBroadcast> {
    let ty = read_header(buf)?;
    if ty != MSG_BROADCAST {
        return Err(decode_err("msg_type", format!("expected broadcast (2), got {ty}")));
    }
    expect_len(buf, BROADCAST_FRAME_LEN)?;
    let beta_star = f64_at(buf, 8);
    // +inf is allowed: it is the sentinel.
    if beta_star.is_nan() || beta_star < 1.0 {
        return Err(decode_err("beta_star", format!("beta_star out of range: {beta_star}")));
    }
    Ok(CenterBroadcast {
        round_id: u32_at(buf, 4),
        beta_star,
    })
}

pub fn decode(buf: &[u8]) -> Result<Message> {
    match read_header(buf)? {
        MSG_REPORT => decode_report(buf).map(Message::Report),
        MSG_BROADCAST => decode_broadcast(buf).map(Message::Broadcast),
        other => Err(decode_err("msg_type", format!("unknown message type {other}"))),
    }
}
