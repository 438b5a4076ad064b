use alloc::vec::Vec;

use super::{Direction, Frame, FrameError, FrameFlags};

/// MHDR + DevAddr + FCtrl + FCnt + MIC.
pub const MIN_DATA_FRAME_LEN: usize = 12;

const MTYPE_UNCONFIRMED_UP: u8 = 0x40;
const MTYPE_UNCONFIRMED_DOWN: u8 = 0x60;

/// Header-order layout:
/// `MHDR | DevAddr(4 LE) | FCtrl | FCnt(2 LE) | FOpts | [FPort | FRMPayload] | MIC(4 LE)`.
pub fn encode(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    if frame.fopts.len() > 15 {
        return Err(FrameError::FOptsOverflow(frame.fopts.len()));
    }
    if frame.fport.is_none() && !frame.frm_payload.is_empty() {
        return Err(FrameError::PayloadWithoutPort);
    }
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.push(match frame.direction {
        Direction::Uplink => MTYPE_UNCONFIRMED_UP,
        Direction::Downlink => MTYPE_UNCONFIRMED_DOWN,
    });
    out.extend_from_slice(&frame.dev_addr.to_le_bytes());
    out.push(frame.flags.bits() | frame.fopts.len() as u8);
    out.extend_from_slice(&(frame.fcnt as u16).to_le_bytes());
    out.extend_from_slice(&frame.fopts);
    if let Some(port) = frame.fport {
        out.push(port);
        out.extend_from_slice(&frame.frm_payload);
    }
    out.extend_from_slice(&frame.mic.to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8], direction: Direction) -> Result<Frame, FrameError> {
    if bytes.len() < MIN_DATA_FRAME_LEN {
        return Err(FrameError::Truncated);
    }
    let expected = match direction {
        Direction::Uplink => MTYPE_UNCONFIRMED_UP,
        Direction::Downlink => MTYPE_UNCONFIRMED_DOWN,
    };
    if bytes[0] != expected {
        return Err(FrameError::MType(bytes[0]));
    }
    let dev_addr = u32::from_le_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
    let fctrl = bytes[5];
    let fopts_len = (fctrl & 0x0f) as usize;
    let fcnt = u16::from_le_bytes([bytes[6], bytes[7]]) as u32;
    let mic_at = bytes.len() - 4;
    let fopts_end = 8 + fopts_len;
    if fopts_end > mic_at {
        return Err(FrameError::Truncated);
    }
    let (fport, frm_payload) = if fopts_end < mic_at {
        (Some(bytes[fopts_end]), bytes[fopts_end + 1..mic_at].to_vec())
    } else {
        (None, Vec::new())
    };
    Ok(Frame {
        direction,
        dev_addr,
        fcnt,
        flags: FrameFlags::from_bits(fctrl & 0xf0),
        fopts: bytes[8..fopts_end].to_vec(),
        fport,
        frm_payload,
        mic: u32::from_le_bytes([bytes[mic_at], bytes[mic_at + 1], bytes[mic_at + 2], bytes[mic_at + 3]]),
    })
}

/// Reads direction and device address from the cleartext header, as a
/// sniffer would after demodulating the first bytes of a frame.
pub fn peek_header(bytes: &[u8]) -> Option<(Direction, u32, FrameFlags)> {
    if bytes.len() < 6 {
        return None;
    }
    let dir = match bytes[0] {
        MTYPE_UNCONFIRMED_UP => Direction::Uplink,
        MTYPE_UNCONFIRMED_DOWN => Direction::Downlink,
        _ => return None,
    };
    let dev_addr = u32::from_le_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
    Some((dir, dev_addr, FrameFlags::from_bits(bytes[5] & 0xf0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{LinkAdrReq, MacCommand};

    #[test]
    fn minimal_frame_is_twelve_bytes() {
        let f = Frame::new(Direction::Uplink, 0x2601_0001, 7);
        let b = encode(&f).unwrap();
        assert_eq!(b.len(), 12);
        assert_eq!(decode(&b, Direction::Uplink).unwrap(), f);
    }

    #[test]
    fn one_byte_payload_is_fourteen_bytes() {
        let f = Frame::new(Direction::Uplink, 1, 1).with_payload(1, &[0xab]);
        assert_eq!(encode(&f).unwrap().len(), 14);
    }

    #[test]
    fn truncated_and_overflow() {
        assert_eq!(decode(&[0x40; 11], Direction::Uplink), Err(FrameError::Truncated));
        let mut f = Frame::new(Direction::Downlink, 1, 1);
        f.fopts = alloc::vec![0; 16];
        assert_eq!(encode(&f), Err(FrameError::FOptsOverflow(16)));
        // FOpts length nibble claims more bytes than present.
        let mut b = encode(&Frame::new(Direction::Uplink, 1, 1)).unwrap();
        b[5] |= 0x03;
        assert_eq!(decode(&b, Direction::Uplink), Err(FrameError::Truncated));
    }

    #[test]
    fn wrong_direction_rejected() {
        let b = encode(&Frame::new(Direction::Uplink, 1, 1)).unwrap();
        assert_eq!(decode(&b, Direction::Downlink), Err(FrameError::MType(0x40)));
    }

    #[test]
    fn piggybacked_command_roundtrip() {
        let req = LinkAdrReq { dr: 5, tp_index: 1, ch_mask: 0b111, nb_trans: 1 };
        let f = Frame::new(Direction::Downlink, 9, 3)
            .with_mac_commands(&[MacCommand::LinkAdrReq(req)])
            .unwrap();
        let b = encode(&f).unwrap();
        assert_eq!(b.len(), 17);
        let d = decode(&b, Direction::Downlink).unwrap();
        assert_eq!(d.mac_commands().unwrap(), [MacCommand::LinkAdrReq(req)]);
        assert_eq!(peek_header(&b), Some((Direction::Downlink, 9, FrameFlags::default())));
    }
}
