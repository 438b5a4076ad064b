//! LoRa physical-layer arithmetic: airtime, demodulation floors and the
//! co-SF capture rule.

use alloc::vec::Vec;

use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PhyError {
    #[error("spreading factor {0} outside 7..=12")]
    SpreadingFactor(u8),
    #[error("bandwidth must be positive")]
    Bandwidth,
    #[error("coding rate {0} outside 1..=4")]
    CodingRate(u8),
    #[error("preamble needs at least one symbol")]
    Preamble,
    #[error("payload length must be at least one byte")]
    EmptyPayload,
    #[error("data rate {0} outside DR0..=DR5")]
    DataRate(u8),
}

pub const DEFAULT_BW_HZ: u32 = 125_000;

/// EU868 uplink data rate, DR0 (SF12) to DR5 (SF7) at 125 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u8", into = "u8"))]
pub struct DataRate(u8);

impl DataRate {
    pub const DR0: DataRate = DataRate(0);
    pub const DR1: DataRate = DataRate(1);
    pub const DR2: DataRate = DataRate(2);
    pub const DR3: DataRate = DataRate(3);
    pub const DR4: DataRate = DataRate(4);
    pub const DR5: DataRate = DataRate(5);
    pub const MAX: DataRate = DataRate::DR5;

    pub const fn new(index: u8) -> Result<Self, PhyError> {
        if index <= 5 {
            Ok(DataRate(index))
        } else {
            Err(PhyError::DataRate(index))
        }
    }

    pub const fn index(self) -> u8 {
        self.0
    }

    pub const fn sf(self) -> u8 {
        12 - self.0
    }

    pub const fn from_sf(sf: u8) -> Result<Self, PhyError> {
        if sf >= 7 && sf <= 12 {
            Ok(DataRate(12 - sf))
        } else {
            Err(PhyError::SpreadingFactor(sf))
        }
    }

    pub fn all() -> impl DoubleEndedIterator<Item = DataRate> {
        (0..=5).map(DataRate)
    }

    pub fn faster(self) -> Option<DataRate> {
        DataRate::new(self.0 + 1).ok()
    }

    pub fn slower(self) -> Option<DataRate> {
        self.0.checked_sub(1).map(DataRate)
    }
}

impl TryFrom<u8> for DataRate {
    type Error = PhyError;
    fn try_from(v: u8) -> Result<Self, PhyError> {
        DataRate::new(v)
    }
}

impl From<DataRate> for u8 {
    fn from(dr: DataRate) -> u8 {
        dr.0
    }
}

impl core::fmt::Display for DataRate {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "DR{}", self.0)
    }
}

/// Parameters of one radio emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxParams {
    pub sf: u8,
    pub bw_hz: u32,
    /// Coding rate as 4/(4+cr).
    pub cr: u8,
    pub freq_hz: u32,
    pub power_dbm: i8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub payload_crc: bool,
    pub low_dr_optimize: bool,
}

impl TxParams {
    /// Data frame defaults: 8-symbol preamble, explicit header, CR 4/5.
    pub fn data(dr: DataRate, freq_hz: u32, power_dbm: i8, payload_crc: bool) -> Self {
        let sf = dr.sf();
        TxParams {
            sf,
            bw_hz: DEFAULT_BW_HZ,
            cr: 1,
            freq_hz,
            power_dbm,
            preamble_symbols: 8,
            explicit_header: true,
            payload_crc,
            low_dr_optimize: auto_ldro(sf, DEFAULT_BW_HZ),
        }
    }

    pub fn uplink(dr: DataRate, freq_hz: u32, power_dbm: i8) -> Self {
        Self::data(dr, freq_hz, power_dbm, true)
    }

    /// Downlinks carry no payload CRC.
    pub fn downlink(dr: DataRate, freq_hz: u32, power_dbm: i8) -> Self {
        Self::data(dr, freq_hz, power_dbm, false)
    }

    /// Class B beacon: SF9, 10-symbol preamble, implicit header, no CRC.
    pub fn beacon(freq_hz: u32, power_dbm: i8) -> Self {
        TxParams {
            sf: 9,
            bw_hz: DEFAULT_BW_HZ,
            cr: 1,
            freq_hz,
            power_dbm,
            preamble_symbols: 10,
            explicit_header: false,
            payload_crc: false,
            low_dr_optimize: false,
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if !(7..=12).contains(&self.sf) {
            return Err(PhyError::SpreadingFactor(self.sf));
        }
        if self.bw_hz == 0 {
            return Err(PhyError::Bandwidth);
        }
        if !(1..=4).contains(&self.cr) {
            return Err(PhyError::CodingRate(self.cr));
        }
        if self.preamble_symbols == 0 {
            return Err(PhyError::Preamble);
        }
        Ok(())
    }

    pub fn data_rate(&self) -> Option<DataRate> {
        if self.bw_hz == DEFAULT_BW_HZ {
            DataRate::from_sf(self.sf).ok()
        } else {
            None
        }
    }
}

pub fn auto_ldro(sf: u8, bw_hz: u32) -> bool {
    sf >= 11 && bw_hz == DEFAULT_BW_HZ
}

/// 2^sf / bw in microseconds, rounded up when not exact.
pub fn symbol_duration(params: &TxParams) -> Micros {
    ((1u64 << params.sf) * 1_000_000).div_ceil(params.bw_hz as u64)
}

/// Number of payload symbols (header included) per the SX127x datasheet.
pub fn payload_symbols(params: &TxParams, payload_len: usize) -> u64 {
    let sf = params.sf as i64;
    let de = params.low_dr_optimize as i64;
    let ih = !params.explicit_header as i64;
    let crc = params.payload_crc as i64;
    let num = 8 * payload_len as i64 - 4 * sf + 28 + 16 * crc - 20 * ih;
    let den = 4 * (sf - 2 * de);
    let blocks = if num <= 0 { 0 } else { (num + den - 1) / den };
    8 + (blocks * (params.cr as i64 + 4)) as u64
}

/// Time on air, computed on exact rationals and rounded up to the next µs.
pub fn time_on_air(params: &TxParams, payload_len: usize) -> Result<Micros, PhyError> {
    params.validate()?;
    if payload_len == 0 {
        return Err(PhyError::EmptyPayload);
    }
    // Symbol count in quarter symbols: 4 * (preamble + 4.25 + payload).
    let quarters = 4 * params.preamble_symbols as u64 + 17 + 4 * payload_symbols(params, payload_len);
    let num = quarters * (1u64 << params.sf) * 1_000_000;
    Ok(num.div_ceil(4 * params.bw_hz as u64))
}

/// Time from the first preamble symbol until the explicit PHY header has
/// been demodulated (preamble + sync + 8 header symbols).
pub fn header_time(params: &TxParams) -> Micros {
    let quarters = 4 * params.preamble_symbols as u64 + 17 + 32;
    (quarters * (1u64 << params.sf) * 1_000_000).div_ceil(4 * params.bw_hz as u64)
}

const REQUIRED_SNR: [f64; 6] = [-20.0, -17.5, -15.0, -12.5, -10.0, -7.5];

/// Demodulation floor in dB for the given data rate.
pub fn required_snr(dr: DataRate) -> f64 {
    REQUIRED_SNR[dr.index() as usize]
}

pub fn required_snr_for_sf(sf: u8) -> f64 {
    -20.0 + 2.5 * (12.0 - sf as f64)
}

/// Minimum power advantage for co-SF capture.
pub const CAPTURE_MARGIN_DB: f64 = 6.0;

/// A signal as seen by one receiver, as input to [`resolve_reception`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signal {
    pub sf: u8,
    pub snr_db: f64,
    pub power_dbm: f64,
    /// Jam transmissions interfere but never decode.
    pub decodable: bool,
    /// Signals sharing a coherence group (simultaneous identical beacons)
    /// do not interfere with each other.
    pub coherence: Option<u64>,
}

/// Returns the indices of decodable signals among mutually overlapping ones.
pub fn resolve_reception(signals: &[Signal]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, s) in signals.iter().enumerate() {
        if !s.decodable || s.snr_db < required_snr_for_sf(s.sf) {
            continue;
        }
        let captured = signals.iter().enumerate().all(|(j, o)| {
            j == i
                || o.sf != s.sf
                || (s.coherence.is_some() && s.coherence == o.coherence)
                || s.power_dbm - o.power_dbm >= CAPTURE_MARGIN_DB
        });
        if captured {
            out.push(i);
        }
    }
    out
}
