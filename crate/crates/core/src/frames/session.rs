use sha2::{Digest, Sha256};

use super::Direction;

const MAX_FCNT_GAP: u32 = 0x4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionKeys {
    pub up_integrity: [u8; 16],
    pub down_integrity: [u8; 16],
    pub confidentiality: [u8; 16],
}

impl SessionKeys {
    /// Derives a key set from a label, for ABP-style provisioning in scenarios.
    pub fn derive(label: &[u8]) -> Self {
        let k = |tag: u8| {
            let mut h = Sha256::new();
            h.update(b"lorasim-key");
            h.update([tag]);
            h.update(label);
            let d = h.finalize();
            let mut out = [0u8; 16];
            out.copy_from_slice(&d[..16]);
            out
        };
        SessionKeys { up_integrity: k(1), down_integrity: k(2), confidentiality: k(3) }
    }
}

/// Session state shared by a device and the network server.
///
/// `fcnt_up` and `fcnt_down` hold the next counter value per direction: the
/// value a sender uses next, and the smallest value a receiver accepts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeviceSession {
    pub dev_addr: u32,
    pub keys: SessionKeys,
    pub fcnt_up: u32,
    pub fcnt_down: u32,
}

impl DeviceSession {
    pub fn new(dev_addr: u32, keys: SessionKeys) -> Self {
        DeviceSession { dev_addr, keys, fcnt_up: 0, fcnt_down: 0 }
    }

    /// ABP activation with keys derived from the address and a network secret.
    pub fn abp(dev_addr: u32, secret: u64) -> Self {
        let mut label = [0u8; 12];
        label[..4].copy_from_slice(&dev_addr.to_le_bytes());
        label[4..].copy_from_slice(&secret.to_le_bytes());
        DeviceSession::new(dev_addr, SessionKeys::derive(&label))
    }

    pub fn next_fcnt(&self, dir: Direction) -> u32 {
        match dir {
            Direction::Uplink => self.fcnt_up,
            Direction::Downlink => self.fcnt_down,
        }
    }

    /// Restores a 32-bit counter from its transmitted low 16 bits. Values
    /// slightly behind the next expected counter stay behind (and are then
    /// rejected as stale); anything further back is taken as a wrap.
    pub fn reconstruct_fcnt(&self, dir: Direction, lsb: u32) -> u32 {
        let next = self.next_fcnt(dir);
        let candidate = (next & 0xffff_0000) | (lsb & 0xffff);
        if candidate < next && next - candidate > MAX_FCNT_GAP {
            candidate.wrapping_add(0x1_0000)
        } else {
            candidate
        }
    }

    /// Claims the next counter for a frame about to be sent.
    pub fn take_fcnt(&mut self, dir: Direction) -> u32 {
        let slot = self.slot(dir);
        let v = *slot;
        *slot += 1;
        v
    }

    /// Records acceptance of a received frame; counters never decrease.
    pub fn accept(&mut self, dir: Direction, fcnt: u32) {
        let slot = self.slot(dir);
        *slot = (*slot).max(fcnt.saturating_add(1));
    }

    pub fn is_fresh(&self, dir: Direction, fcnt: u32) -> bool {
        fcnt >= self.next_fcnt(dir)
    }

    fn slot(&mut self, dir: Direction) -> &mut u32 {
        match dir {
            Direction::Uplink => &mut self.fcnt_up,
            Direction::Downlink => &mut self.fcnt_down,
        }
    }
}
