use alloc::vec::Vec;

use hmac::{Hmac, KeyInit, Mac};
use sha2::{Digest, Sha256};

use super::{DeviceSession, Direction, Frame, FrameError};
use crate::phy::TxParams;

/// Which fields the MIC covers beyond the frame itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MicPolicy {
    /// Frame fields only.
    V10,
    /// Uplinks also bind channel and data rate; downlinks bind the
    /// confirmed uplink counter when ACK is set.
    V11,
    /// Both directions bind channel and data rate, and downlinks always bind
    /// the uplink counter of the transaction they answer.
    Hardened,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coverage {
    pub tx_params: bool,
    pub conf_fcnt: bool,
}

impl MicPolicy {
    pub fn coverage(self, dir: Direction, ack: bool, has_conf_fcnt: bool) -> Coverage {
        match (self, dir) {
            (MicPolicy::V10, _) => Coverage { tx_params: false, conf_fcnt: false },
            (_, Direction::Uplink) => Coverage { tx_params: true, conf_fcnt: false },
            (MicPolicy::V11, Direction::Downlink) => {
                Coverage { tx_params: false, conf_fcnt: ack && has_conf_fcnt }
            }
            (MicPolicy::Hardened, Direction::Downlink) => {
                Coverage { tx_params: true, conf_fcnt: has_conf_fcnt }
            }
        }
    }
}

/// Canonical MIC input; see `docs/formats.md`.
pub fn canonical_bytes(frame: &Frame, tx: &TxParams, cov: Coverage, conf_fcnt: Option<u16>) -> Vec<u8> {
    let mut b = Vec::with_capacity(32 + frame.fopts.len() + frame.frm_payload.len());
    b.extend_from_slice(b"LSMIC1");
    b.push(frame.direction.byte());
    b.extend_from_slice(&frame.dev_addr.to_le_bytes());
    b.extend_from_slice(&frame.fcnt.to_le_bytes());
    b.push(frame.flags.bits());
    b.push(frame.fopts.len() as u8);
    b.extend_from_slice(&frame.fopts);
    match frame.fport {
        Some(p) => b.extend_from_slice(&[1, p]),
        None => b.push(0),
    }
    b.extend_from_slice(&(frame.frm_payload.len() as u16).to_le_bytes());
    b.extend_from_slice(&frame.frm_payload);
    if cov.tx_params {
        b.push(0x01);
        b.extend_from_slice(&tx.freq_hz.to_le_bytes());
        b.push(tx.sf);
        b.extend_from_slice(&tx.bw_hz.to_le_bytes());
    }
    if let (true, Some(c)) = (cov.conf_fcnt, conf_fcnt) {
        b.push(0x02);
        b.extend_from_slice(&c.to_le_bytes());
    }
    b
}

/// HMAC-SHA256 over the canonical bytes, truncated to 32 bits.
pub fn compute_mic(
    session: &DeviceSession,
    frame: &Frame,
    tx: &TxParams,
    policy: MicPolicy,
    conf_fcnt: Option<u16>,
) -> Result<u32, FrameError> {
    if session.dev_addr != frame.dev_addr {
        return Err(FrameError::SessionMismatch(session.dev_addr));
    }
    let key = match frame.direction {
        Direction::Uplink => &session.keys.up_integrity,
        Direction::Downlink => &session.keys.down_integrity,
    };
    let cov = policy.coverage(frame.direction, frame.flags.ack, conf_fcnt.is_some());
    let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(key).expect("any key length");
    mac.update(&canonical_bytes(frame, tx, cov, conf_fcnt));
    let tag = mac.finalize().into_bytes();
    Ok(u32::from_le_bytes([tag[0], tag[1], tag[2], tag[3]]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, thiserror::Error)]
pub enum Rejection {
    #[error("bad MIC")]
    BadMic,
    #[error("stale frame counter")]
    StaleFcnt,
}

/// Checks the MIC and counter freshness of a frame whose `fcnt` has already
/// been restored to 32 bits. The session is not modified.
pub fn verify(
    frame: &Frame,
    session: &DeviceSession,
    tx: &TxParams,
    policy: MicPolicy,
    conf_fcnt: Option<u16>,
) -> Result<(), Rejection> {
    match compute_mic(session, frame, tx, policy, conf_fcnt) {
        Ok(mic) if mic == frame.mic => {}
        _ => return Err(Rejection::BadMic),
    }
    if !session.is_fresh(frame.direction, frame.fcnt) {
        return Err(Rejection::StaleFcnt);
    }
    Ok(())
}

fn xor_keystream(key: &[u8; 16], domain: u8, frame: &Frame, data: &mut [u8]) {
    for (block, chunk) in data.chunks_mut(32).enumerate() {
        let mut h = Sha256::new();
        h.update(key);
        h.update([domain, frame.direction.byte()]);
        h.update(frame.dev_addr.to_le_bytes());
        h.update(frame.fcnt.to_le_bytes());
        h.update((block as u32).to_le_bytes());
        let ks = h.finalize();
        for (d, k) in chunk.iter_mut().zip(ks.iter()) {
            *d ^= k;
        }
    }
}

/// Masks FRMPayload, and FOpts under policies that encrypt MAC commands.
/// Applying it twice with the same session restores the original frame.
pub fn conceal(frame: &Frame, session: &DeviceSession, policy: MicPolicy) -> Frame {
    let mut out = frame.clone();
    let key = &session.keys.confidentiality;
    xor_keystream(key, b'P', frame, &mut out.frm_payload);
    if policy != MicPolicy::V10 {
        xor_keystream(key, b'F', frame, &mut out.fopts);
    }
    out
}

pub fn reveal(frame: &Frame, session: &DeviceSession, policy: MicPolicy) -> Frame {
    conceal(frame, session, policy)
}
