use crc::{Crc, CRC_16_KERMIT};

use super::FrameError;

pub const BEACON_LEN: usize = 17;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_KERMIT);

/// Class B beacon body: `RFU(2) | Time(4) | CRC(2) | GwInfo(7) | CRC(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BeaconPayload {
    pub gps_time_s: u32,
    pub gw_info: [u8; 7],
}

impl BeaconPayload {
    pub fn encode(&self) -> [u8; BEACON_LEN] {
        let mut b = [0u8; BEACON_LEN];
        b[2..6].copy_from_slice(&self.gps_time_s.to_le_bytes());
        let c1 = CRC16.checksum(&b[..6]);
        b[6..8].copy_from_slice(&c1.to_le_bytes());
        b[8..15].copy_from_slice(&self.gw_info);
        let c2 = CRC16.checksum(&b[8..15]);
        b[15..17].copy_from_slice(&c2.to_le_bytes());
        b
    }

    /// Decodes the first 17 bytes; anything after them is ignored.
    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let b = bytes.get(..BEACON_LEN).ok_or(FrameError::Truncated)?;
        if CRC16.checksum(&b[..6]).to_le_bytes() != b[6..8]
            || CRC16.checksum(&b[8..15]).to_le_bytes() != b[15..17]
        {
            return Err(FrameError::BeaconCrc);
        }
        let mut gw_info = [0u8; 7];
        gw_info.copy_from_slice(&b[8..15]);
        Ok(BeaconPayload { gps_time_s: u32::from_le_bytes([b[2], b[3], b[4], b[5]]), gw_info })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_trailing_bytes() {
        let p = BeaconPayload { gps_time_s: 1_234_567_936, gw_info: *b"gw-0001" };
        let mut b = alloc::vec::Vec::from(p.encode());
        assert_eq!(b.len(), 17);
        assert_eq!(BeaconPayload::decode(&b).unwrap(), p);
        b.extend_from_slice(&[0xde, 0xad]);
        assert_eq!(BeaconPayload::decode(&b).unwrap(), p);
        b[3] ^= 1;
        assert_eq!(BeaconPayload::decode(&b), Err(FrameError::BeaconCrc));
        assert_eq!(BeaconPayload::decode(&b[..16]), Err(FrameError::Truncated));
    }
}
