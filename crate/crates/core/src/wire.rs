// SPDX-License-Identifier: Apache-2.0
//! Signalling cell wire format.
//!
//! Every signalling cell is a single 53-byte cell travelling on VC 0.
//!
//! ```text
//!  byte  field
//!  0     vc_number        (always 0)
//!  1     packet_type      1=CREQ 2=CACC 3=REL
//!  2     cdm              connection difficulty metric
//!  3-4   source address   big-endian
//!  5     connection_no
//!  6-7   destination      big-endian
//!  8-9   bandwidth kbps   big-endian (requested on CREQ, granted on CACC)
//!  10-11 max_delay ms     big-endian
//!  12-51 zero
//!  52    checksum         XOR of bytes 0..=51
//! ```

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Length of every signalling cell on the wire.
pub const CELL_LEN: usize = 53;

const CHECKSUM_AT: usize = CELL_LEN - 1;
const PAYLOAD_END: usize = 12;

/// A 16-bit node address. Zero is reserved and never assigned to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Address(pub u16);

impl Address {
    pub const RESERVED: Address = Address(0);

    pub fn is_assignable(self) -> bool {
        self.0 != 0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bandwidth and delay requirement carried by CREQ (requested) and CACC (granted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct QosSpec {
    pub bandwidth_kbps: u16,
    pub max_delay_ms: u16,
}

impl QosSpec {
    pub fn new(bandwidth_kbps: u16, max_delay_ms: u16) -> Self {
        QosSpec {
            bandwidth_kbps,
            max_delay_ms,
        }
    }

    pub fn with_bandwidth(self, bandwidth_kbps: u16) -> Self {
        QosSpec {
            bandwidth_kbps,
            ..self
        }
    }
}

/// Identifies one flood network-wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FloodKey {
    pub source: Address,
    pub destination: Address,
    pub connection_no: u8,
}

impl FloodKey {
    pub fn new(source: Address, destination: Address, connection_no: u8) -> Self {
        FloodKey {
            source,
            destination,
            connection_no,
        }
    }
}

impl fmt::Display for FloodKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}#{}", self.source, self.destination, self.connection_no)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[repr(u8)]
pub enum PacketType {
    /// Connection request, flooded toward the destination.
    Creq = 1,
    /// Connection acceptance, relayed back along the best links.
    Cacc = 2,
    /// Release; tears down an installed circuit.
    Rel = 3,
}

impl PacketType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(PacketType::Creq),
            2 => Some(PacketType::Cacc),
            3 => Some(PacketType::Rel),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PacketType::Creq => "CREQ",
            PacketType::Cacc => "CACC",
            PacketType::Rel => "REL",
        }
    }
}

/// Decoded signalling cell. The VC number is implicit (always 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SignallingCell {
    pub packet_type: PacketType,
    pub cdm: u8,
    pub key: FloodKey,
    pub qos: QosSpec,
}

impl SignallingCell {
    pub fn creq(key: FloodKey, qos: QosSpec) -> Self {
        SignallingCell {
            packet_type: PacketType::Creq,
            cdm: 0,
            key,
            qos,
        }
    }

    pub fn cacc(key: FloodKey, cdm: u8, granted: QosSpec) -> Self {
        SignallingCell {
            packet_type: PacketType::Cacc,
            cdm,
            key,
            qos: granted,
        }
    }

    pub fn rel(key: FloodKey) -> Self {
        SignallingCell {
            packet_type: PacketType::Rel,
            cdm: 0,
            key,
            qos: QosSpec::new(0, 0),
        }
    }

    pub fn with_cdm(self, cdm: u8) -> Self {
        SignallingCell { cdm, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("signalling cell must be {CELL_LEN} bytes, got {0}")]
    Length(usize),
    #[error("checksum mismatch: computed {computed:#04x}, carried {carried:#04x}")]
    ChecksumMismatch { computed: u8, carried: u8 },
    #[error("unknown packet type {0:#04x}")]
    UnknownPacketType(u8),
    #[error("signalling cell on non-zero VC {0}")]
    NonZeroVc(u8),
    #[error("non-zero byte in unused region at offset {0}")]
    NonZeroPadding(usize),
}

/// XOR of the 52 leading bytes.
pub fn checksum(bytes: &[u8]) -> u8 {
    bytes[..CHECKSUM_AT].iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_cell(cell: &SignallingCell) -> [u8; CELL_LEN] {
    let mut raw = [0u8; CELL_LEN];
    raw[1] = cell.packet_type as u8;
    raw[2] = cell.cdm;
    raw[3..5].copy_from_slice(&cell.key.source.0.to_be_bytes());
    raw[5] = cell.key.connection_no;
    raw[6..8].copy_from_slice(&cell.key.destination.0.to_be_bytes());
    raw[8..10].copy_from_slice(&cell.qos.bandwidth_kbps.to_be_bytes());
    raw[10..12].copy_from_slice(&cell.qos.max_delay_ms.to_be_bytes());
    raw[CHECKSUM_AT] = checksum(&raw);
    raw
}

pub fn decode_cell(raw: &[u8]) -> Result<SignallingCell, DecodeError> {
    if raw.len() != CELL_LEN {
        return Err(DecodeError::Length(raw.len()));
    }
    let computed = checksum(raw);
    if computed != raw[CHECKSUM_AT] {
        return Err(DecodeError::ChecksumMismatch {
            computed,
            carried: raw[CHECKSUM_AT],
        });
    }
    if raw[0] != 0 {
        return Err(DecodeError::NonZeroVc(raw[0]));
    }
    let packet_type = PacketType::from_u8(raw[1]).ok_or(DecodeError::UnknownPacketType(raw[1]))?;
    if let Some(off) = (PAYLOAD_END..CHECKSUM_AT).find(|&i| raw[i] != 0) {
        return Err(DecodeError::NonZeroPadding(off));
    }
    let be16 = |at: usize| u16::from_be_bytes([raw[at], raw[at + 1]]);
    Ok(SignallingCell {
        packet_type,
        cdm: raw[2],
        key: FloodKey {
            source: Address(be16(3)),
            connection_no: raw[5],
            destination: Address(be16(6)),
        },
        qos: QosSpec {
            bandwidth_kbps: be16(8),
            max_delay_ms: be16(10),
        },
    })
}

/// A named golden vector: the cell and its encoded image.
#[derive(Debug, Clone)]
pub struct GoldenVector {
    pub name: &'static str,
    pub cell: SignallingCell,
}

/// The canonical set of wire vectors emitted by `floodsim vectors`.
pub fn golden_vectors() -> Vec<GoldenVector> {
    let k = |s, c, d| FloodKey::new(Address(s), Address(d), c);
    let cell = |t, cdm, key, bw, delay| SignallingCell {
        packet_type: t,
        cdm,
        key,
        qos: QosSpec::new(bw, delay),
    };
    use PacketType::*;
    vec![
        GoldenVector {
            name: "creq_all_zero",
            cell: cell(Creq, 0, k(0, 0, 0), 0, 0),
        },
        GoldenVector {
            name: "creq_basic",
            cell: cell(Creq, 0, k(1, 0, 2), 10, 100),
        },
        GoldenVector {
            name: "creq_mid",
            cell: cell(Creq, 7, k(0x1234, 0x56, 0xABCD), 1500, 250),
        },
        GoldenVector {
            name: "cacc_granted",
            cell: cell(Cacc, 3, k(5, 1, 9), 6, 100),
        },
        GoldenVector {
            name: "rel_teardown",
            cell: cell(Rel, 0, k(5, 1, 9), 0, 0),
        },
        GoldenVector {
            name: "creq_saturated",
            cell: cell(Creq, 255, k(0xFFFF, 255, 0xFFFF), 0xFFFF, 0xFFFF),
        },
    ]
}

/// Renders the golden vectors in the fixture text format.
pub fn render_golden_vectors() -> String {
    let mut out = String::from(
        "# floodroute signalling cell golden vectors v1\n\
         # name type cdm src conn dst bw_kbps delay_ms hex53\n",
    );
    for v in golden_vectors() {
        let c = v.cell;
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {}\n",
            v.name,
            c.packet_type as u8,
            c.cdm,
            c.key.source.0,
            c.key.connection_no,
            c.key.destination.0,
            c.qos.bandwidth_kbps,
            c.qos.max_delay_ms,
            hex::encode(encode_cell(&c)),
        ));
    }
    out
}
