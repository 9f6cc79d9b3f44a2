//! Halo message wire format.
//!
//! Fixed little-endian layout, 26-byte header followed by `count` f64 values:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SHWX"
//!      4     2  version (u16)
//!      6     4  src rank (u32)
//!     10     4  dst rank (u32)
//!     14     4  step (u32)
//!     18     1  phase
//!     19     1  side
//!     20     1  field id
//!     21     1  reserved (0)
//!     22     4  count (u32)
//!     26  8*count  payload
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SHWX";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Before the diagnostic sweep: p, u, v.
    Diagnostics = 0,
    /// Before the advance sweep: cu, cv, z, hb.
    Advance = 1,
}

/// Ghost side of the receiving block that a payload fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    /// x − 1
    Left = 0,
    /// x + 1
    Right = 1,
    /// y + 1
    Top = 2,
    /// y − 1
    Bottom = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FieldId {
    P = 0,
    U = 1,
    V = 2,
    Cu = 3,
    Cv = 4,
    Z = 5,
    Hb = 6,
}

impl Phase {
    fn from_u8(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Phase::Diagnostics),
            1 => Ok(Phase::Advance),
            _ => Err(Error::Malformed(format!("unknown phase {b}"))),
        }
    }

    pub fn fields(self) -> &'static [FieldId] {
        match self {
            Phase::Diagnostics => &[FieldId::P, FieldId::U, FieldId::V],
            Phase::Advance => &[FieldId::Cu, FieldId::Cv, FieldId::Z, FieldId::Hb],
        }
    }
}

impl Side {
    fn from_u8(b: u8) -> Result<Self> {
        Side::ALL
            .get(b as usize)
            .copied()
            .ok_or_else(|| Error::Malformed(format!("unknown side {b}")))
    }
}

impl FieldId {
    pub const ALL: [FieldId; 7] = [
        FieldId::P,
        FieldId::U,
        FieldId::V,
        FieldId::Cu,
        FieldId::Cv,
        FieldId::Z,
        FieldId::Hb,
    ];

    fn from_u8(b: u8) -> Result<Self> {
        Self::ALL
            .get(b as usize)
            .copied()
            .ok_or_else(|| Error::Malformed(format!("unknown field id {b}")))
    }
}

/// One ghost line sent from `src` to `dst`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloMessage {
    pub src: u32,
    pub dst: u32,
    pub step: u32,
    pub phase: Phase,
    pub side: Side,
    pub field: FieldId,
    pub payload: Vec<f64>,
}

impl HaloMessage {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 8 * self.payload.len()
    }
}

pub fn encode(msg: &HaloMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&msg.src.to_le_bytes());
    out.extend_from_slice(&msg.dst.to_le_bytes());
    out.extend_from_slice(&msg.step.to_le_bytes());
    out.push(msg.phase as u8);
    out.push(msg.side as u8);
    out.push(msg.field as u8);
    out.push(0);
    out.extend_from_slice(&(msg.payload.len() as u32).to_le_bytes());
    for x in &msg.payload {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Parsed header; `count` tells how many payload bytes follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub src: u32,
    pub dst: u32,
    pub step: u32,
    pub phase: Phase,
    pub side: Side,
    pub field: FieldId,
    pub count: u32,
}

impl Header {
    pub fn payload_len(&self) -> usize {
        8 * self.count as usize
    }
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Malformed(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Malformed(format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Malformed(format!("unsupported version {version}")));
    }
    Ok(Header {
        src: u32_at(bytes, 6),
        dst: u32_at(bytes, 10),
        step: u32_at(bytes, 14),
        phase: Phase::from_u8(bytes[18])?,
        side: Side::from_u8(bytes[19])?,
        field: FieldId::from_u8(bytes[20])?,
        count: u32_at(bytes, 22),
    })
}

pub fn decode_payload(header: &Header, bytes: &[u8]) -> Result<HaloMessage> {
    if bytes.len() != header.payload_len() {
        return Err(Error::Malformed(format!(
            "payload of {} bytes, header announces {}",
            bytes.len(),
            header.payload_len()
        )));
    }
    Ok(HaloMessage {
        src: header.src,
        dst: header.dst,
        step: header.step,
        phase: header.phase,
        side: header.side,
        field: header.field,
        payload: bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

pub fn decode(bytes: &[u8]) -> Result<HaloMessage> {
    let header = decode_header(bytes)?;
    decode_payload(&header, &bytes[HEADER_LEN..])
}
