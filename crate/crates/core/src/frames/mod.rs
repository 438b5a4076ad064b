//! LoRaWAN MAC frames: byte codec, MAC commands, session counters, MIC
//! policies and payload concealment.

mod beacon;
mod codec;
mod mac;
mod mic;
mod session;

pub use beacon::{BeaconPayload, BEACON_LEN};
pub use codec::{decode, encode, peek_header, MIN_DATA_FRAME_LEN};
pub use mac::{
    encode_mac_commands, parse_mac_commands, DeviceTimeAns, LinkAdrAns, LinkAdrReq, MacCommand,
};
pub use mic::{canonical_bytes, compute_mic, conceal, reveal, verify, Coverage, MicPolicy, Rejection};
pub use session::{DeviceSession, SessionKeys};

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame truncated")]
    Truncated,
    #[error("FOpts exceed 15 bytes ({0})")]
    FOptsOverflow(usize),
    #[error("unexpected message type {0:#04x}")]
    MType(u8),
    #[error("payload present without FPort")]
    PayloadWithoutPort,
    #[error("session does not belong to device {0:#010x}")]
    SessionMismatch(u32),
    #[error("malformed MAC command {0:#04x}")]
    MacCommand(u8),
    #[error("beacon CRC mismatch")]
    BeaconCrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub(crate) fn byte(self) -> u8 {
        match self {
            Direction::Uplink => 0,
            Direction::Downlink => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FrameFlags {
    pub adr: bool,
    pub adr_ack_req: bool,
    pub ack: bool,
    pub class_b: bool,
}

impl FrameFlags {
    pub(crate) fn bits(self) -> u8 {
        (self.adr as u8) << 7
            | (self.adr_ack_req as u8) << 6
            | (self.ack as u8) << 5
            | (self.class_b as u8) << 4
    }

    pub(crate) fn from_bits(b: u8) -> Self {
        FrameFlags {
            adr: b & 0x80 != 0,
            adr_ack_req: b & 0x40 != 0,
            ack: b & 0x20 != 0,
            class_b: b & 0x10 != 0,
        }
    }
}

/// A data frame. `fopts` holds the raw FOpts bytes, which are masked on air
/// under policies that encrypt MAC commands; use [`Frame::mac_commands`] on
/// a revealed frame to parse them.
///
/// Only the low 16 bits of `fcnt` travel on air. Decoded frames carry those
/// bits and receivers restore the full counter with
/// [`DeviceSession::reconstruct_fcnt`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub direction: Direction,
    pub dev_addr: u32,
    pub fcnt: u32,
    pub flags: FrameFlags,
    pub fopts: Vec<u8>,
    pub fport: Option<u8>,
    pub frm_payload: Vec<u8>,
    pub mic: u32,
}

impl Frame {
    pub fn new(direction: Direction, dev_addr: u32, fcnt: u32) -> Self {
        Frame {
            direction,
            dev_addr,
            fcnt,
            flags: FrameFlags::default(),
            fopts: Vec::new(),
            fport: None,
            frm_payload: Vec::new(),
            mic: 0,
        }
    }

    pub fn with_mac_commands(mut self, cmds: &[MacCommand]) -> Result<Self, FrameError> {
        let bytes = encode_mac_commands(cmds);
        if bytes.len() > 15 {
            return Err(FrameError::FOptsOverflow(bytes.len()));
        }
        self.fopts = bytes;
        Ok(self)
    }

    pub fn with_payload(mut self, fport: u8, payload: &[u8]) -> Self {
        self.fport = Some(fport);
        self.frm_payload = payload.to_vec();
        self
    }

    pub fn mac_commands(&self) -> Result<Vec<MacCommand>, FrameError> {
        parse_mac_commands(&self.fopts, self.direction)
    }

    pub fn encoded_len(&self) -> usize {
        MIN_DATA_FRAME_LEN + self.fopts.len() + self.fport.map_or(0, |_| 1 + self.frm_payload.len())
    }
}
