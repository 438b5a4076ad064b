use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, Attack, AttackNote};
use crate::enddevice::BEACON_PERIOD;
use crate::frames::BeaconPayload;
use crate::phy::TxParams;
use crate::simkit::{Delivery, NodeId, Outcome, Transmission, TxKind};
use crate::Micros;

/// Beacon air time plus five beacon symbols.
pub const TOTAL_DRIFT_US: Micros = 152_576 + 5 * 4_096;

/// How far the spoofed beacon of attack period `p` (0-based) precedes the
/// true one.
pub fn drift_shift_us(step_symbols: u32, p: i64, symbol_us: Micros, total_us: Micros) -> Micros {
    if p < 0 {
        return 0;
    }
    ((p as Micros + 1) * step_symbols as Micros * symbol_us).min(total_us)
}

/// Periods until the shift reaches `total_us`.
pub fn drift_periods(step_symbols: u32, symbol_us: Micros, total_us: Micros) -> u32 {
    total_us.div_ceil(step_symbols.max(1) as Micros * symbol_us) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftPhase {
    Synced,
    Drifting,
    Holding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeaconDriftConfig {
    pub node: NodeId,
    pub step_symbols: u32,
    pub symbol_us: Micros,
    pub total_shift_us: Micros,
    /// Random bytes appended after the 17-byte beacon.
    pub jam_payload_bytes: usize,
    pub power_dbm: i8,
    pub beacon_freq_hz: u32,
    /// Periods between the first decoded beacon and the first spoofed one.
    pub start_after_periods: u64,
    pub gw_info: [u8; 7],
    pub seed: u64,
}

/// Locks onto the network's beacon, then transmits a copy that moves earlier
/// by one step per period until the full drift is reached, and holds there.
#[derive(Debug, Clone)]
pub struct BeaconDrift {
    pub config: BeaconDriftConfig,
    pub phase: DriftPhase,
    reference: Option<(Micros, u32)>,
    rng: ChaCha8Rng,
}

impl BeaconDrift {
    pub fn new(config: BeaconDriftConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        BeaconDrift { config, phase: DriftPhase::Synced, reference: None, rng }
    }

    pub fn drifting_periods(&self) -> u32 {
        drift_periods(self.config.step_symbols, self.config.symbol_us, self.config.total_shift_us)
    }

    pub fn shift(&self, p: i64) -> Micros {
        drift_shift_us(self.config.step_symbols, p, self.config.symbol_us, self.config.total_shift_us)
    }

    fn spoof_time(&self, k: u64) -> Option<Micros> {
        let (t0, _) = self.reference?;
        let p = k as i64 - self.config.start_after_periods as i64;
        Some((t0 + k * BEACON_PERIOD).saturating_sub(self.shift(p)))
    }
}

impl Attack for BeaconDrift {
    fn nodes(&self) -> Vec<NodeId> {
        vec![self.config.node]
    }

    fn start(&mut self, _now: Micros) -> Vec<Action> {
        vec![Action::Listen { node: self.config.node, freq_hz: self.config.beacon_freq_hz, sf: 9 }]
    }

    fn on_delivery(&mut self, _now: Micros, d: &Delivery) -> Vec<Action> {
        if self.reference.is_some() || d.tx.kind != TxKind::Beacon || d.outcome != Outcome::Decoded {
            return Vec::new();
        }
        let Ok(b) = BeaconPayload::decode(d.tx.frame_bytes()) else { return Vec::new() };
        if b.gw_info == self.config.gw_info {
            return Vec::new();
        }
        self.reference = Some((d.tx.start, b.gps_time_s));
        let k = self.config.start_after_periods;
        let at = self.spoof_time(k).expect("reference set");
        vec![Action::Note(AttackNote::BeaconSynced { gps_time_s: b.gps_time_s }), Action::Timer { at, token: k }]
    }

    fn on_timer(&mut self, now: Micros, k: u64) -> Vec<Action> {
        let Some((_, gps0)) = self.reference else { return Vec::new() };
        let p = k as i64 - self.config.start_after_periods as i64;
        self.phase = if p < self.drifting_periods() as i64 { DriftPhase::Drifting } else { DriftPhase::Holding };
        let payload = BeaconPayload { gps_time_s: gps0.wrapping_add((k * 128) as u32), gw_info: self.config.gw_info };
        let mut filler = vec![0u8; self.config.jam_payload_bytes];
        self.rng.fill_bytes(&mut filler);
        let params = TxParams::beacon(self.config.beacon_freq_hz, self.config.power_dbm);
        let mut out = Vec::new();
        if let Ok(tx) = Transmission::frame_with_filler(self.config.node, params, now, payload.encode().to_vec(), &filler, TxKind::Beacon) {
            out.push(Action::Transmit(tx));
            out.push(Action::Note(AttackNote::BeaconSpoofed { period: p, shift_us: self.shift(p) }));
        }
        if let Some(at) = self.spoof_time(k + 1) {
            out.push(Action::Timer { at, token: k + 1 });
        }
        out
    }
}
