use alloc::vec::Vec;

use super::{Direction, FrameError};

const CID_LINK_ADR: u8 = 0x03;
const CID_DEVICE_TIME: u8 = 0x0d;

/// `dr` keeps the raw 4-bit field so that devices can reject invalid rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkAdrReq {
    pub dr: u8,
    pub tp_index: u8,
    pub ch_mask: u16,
    pub nb_trans: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkAdrAns {
    pub power_ok: bool,
    pub dr_ok: bool,
    pub ch_ok: bool,
}

impl LinkAdrAns {
    pub fn all_ok(&self) -> bool {
        self.power_ok && self.dr_ok && self.ch_ok
    }
}

/// GPS time as whole seconds plus 1/256 s fractions, as carried on air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeviceTimeAns {
    pub seconds: u32,
    pub fraction: u8,
}

impl DeviceTimeAns {
    pub fn gps_time_us(&self) -> u64 {
        self.seconds as u64 * 1_000_000 + (self.fraction as u64 * 1_000_000) / 256
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MacCommand {
    LinkAdrReq(LinkAdrReq),
    LinkAdrAns(LinkAdrAns),
    DeviceTimeReq,
    DeviceTimeAns(DeviceTimeAns),
}

impl MacCommand {
    pub fn direction(&self) -> Direction {
        match self {
            MacCommand::LinkAdrAns(_) | MacCommand::DeviceTimeReq => Direction::Uplink,
            MacCommand::LinkAdrReq(_) | MacCommand::DeviceTimeAns(_) => Direction::Downlink,
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match *self {
            MacCommand::LinkAdrReq(r) => {
                out.push(CID_LINK_ADR);
                out.push((r.dr & 0x0f) << 4 | (r.tp_index & 0x0f));
                out.extend_from_slice(&r.ch_mask.to_le_bytes());
                out.push(r.nb_trans & 0x0f);
            }
            MacCommand::LinkAdrAns(a) => {
                out.push(CID_LINK_ADR);
                out.push((a.power_ok as u8) << 2 | (a.dr_ok as u8) << 1 | a.ch_ok as u8);
            }
            MacCommand::DeviceTimeReq => out.push(CID_DEVICE_TIME),
            MacCommand::DeviceTimeAns(t) => {
                out.push(CID_DEVICE_TIME);
                out.extend_from_slice(&t.seconds.to_le_bytes());
                out.push(t.fraction);
            }
        }
    }
}

pub fn encode_mac_commands(cmds: &[MacCommand]) -> Vec<u8> {
    let mut out = Vec::new();
    for c in cmds {
        c.encode_into(&mut out);
    }
    out
}

/// Parses FOpts bytes. CIDs are shared between directions, so the frame
/// direction selects request or answer layouts.
pub fn parse_mac_commands(bytes: &[u8], direction: Direction) -> Result<Vec<MacCommand>, FrameError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let cid = bytes[i];
        let need = match (cid, direction) {
            (CID_LINK_ADR, Direction::Downlink) => 5,
            (CID_LINK_ADR, Direction::Uplink) => 2,
            (CID_DEVICE_TIME, Direction::Uplink) => 1,
            (CID_DEVICE_TIME, Direction::Downlink) => 6,
            _ => return Err(FrameError::MacCommand(cid)),
        };
        let b = bytes.get(i..i + need).ok_or(FrameError::MacCommand(cid))?;
        let cmd = match (cid, direction) {
            (CID_LINK_ADR, Direction::Downlink) => {
                let nb_trans = b[4] & 0x0f;
                if nb_trans == 0 || b[4] & 0xf0 != 0 {
                    return Err(FrameError::MacCommand(cid));
                }
                MacCommand::LinkAdrReq(LinkAdrReq {
                    dr: b[1] >> 4,
                    tp_index: b[1] & 0x0f,
                    ch_mask: u16::from_le_bytes([b[2], b[3]]),
                    nb_trans,
                })
            }
            (CID_LINK_ADR, Direction::Uplink) => {
                if b[1] & 0xf8 != 0 {
                    return Err(FrameError::MacCommand(cid));
                }
                MacCommand::LinkAdrAns(LinkAdrAns {
                    power_ok: b[1] & 0x04 != 0,
                    dr_ok: b[1] & 0x02 != 0,
                    ch_ok: b[1] & 0x01 != 0,
                })
            }
            (CID_DEVICE_TIME, Direction::Uplink) => MacCommand::DeviceTimeReq,
            _ => MacCommand::DeviceTimeAns(DeviceTimeAns {
                seconds: u32::from_le_bytes([b[1], b[2], b[3], b[4]]),
                fraction: b[5],
            }),
        };
        out.push(cmd);
        i += need;
    }
    Ok(out)
}
