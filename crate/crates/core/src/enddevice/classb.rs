use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::frames::BeaconPayload;
use crate::{ms, secs, Micros};

pub const BEACON_PERIOD: Micros = secs(128);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClassBConfig {
    pub beacon_reserved_us: Micros,
    pub slot_len_us: Micros,
    /// Ping slots per beacon period (power of two up to 128).
    pub ping_nb: u16,
    /// Half-width of the beacon acceptance window, in beacon symbols.
    pub window_guard_symbols: f64,
    /// Half-width of the ping acceptance window, in beacon symbols.
    pub ping_slot_guard_symbols: f64,
    pub widen_symbols_per_period: f64,
    pub max_guard_symbols: f64,
    pub beaconless_limit_us: Micros,
    pub beacon_symbol_us: Micros,
}

impl Default for ClassBConfig {
    fn default() -> Self {
        ClassBConfig {
            beacon_reserved_us: ms(2_120),
            slot_len_us: ms(30),
            ping_nb: 1,
            window_guard_symbols: 3.0,
            ping_slot_guard_symbols: 9.0,
            widen_symbols_per_period: 1.0,
            max_guard_symbols: 32.0,
            beaconless_limit_us: secs(7_200),
            beacon_symbol_us: 4_096,
        }
    }
}

impl ClassBConfig {
    pub fn ping_period_slots(&self) -> u32 {
        4096 / self.ping_nb.clamp(1, 4096) as u32
    }

    fn symbols_us(&self, symbols: f64) -> Micros {
        libm::round(symbols * self.beacon_symbol_us as f64) as Micros
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassBMode {
    ClassA,
    Acquiring,
    Locked,
    Beaconless,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedBeacon {
    pub payload: BeaconPayload,
    pub start: Micros,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeaconOutcome {
    Locked,
    Missed,
    RevertedToClassA,
    Ignored,
}

/// Beacon tracking and ping-slot timing of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBState {
    pub config: ClassBConfig,
    pub mode: ClassBMode,
    pub expected_beacon_time: Option<Micros>,
    pub window_guard_symbols: f64,
    pub beaconless_since: Option<Micros>,
    pub last_beacon_payload: Option<BeaconPayload>,
    /// Beacon time and GPS seconds that the current period's ping slots hang off.
    pub reference: Option<(Micros, u32)>,
}

impl ClassBState {
    pub fn new(config: ClassBConfig) -> Self {
        ClassBState {
            mode: ClassBMode::ClassA,
            expected_beacon_time: None,
            window_guard_symbols: config.window_guard_symbols,
            beaconless_since: None,
            last_beacon_payload: None,
            reference: None,
            config,
        }
    }

    pub fn start_acquisition(&mut self) {
        self.mode = ClassBMode::Acquiring;
    }

    pub fn is_class_b(&self) -> bool {
        matches!(self.mode, ClassBMode::Locked | ClassBMode::Beaconless)
    }

    pub fn guard_us(&self) -> Micros {
        self.config.symbols_us(self.window_guard_symbols)
    }

    /// Acceptance window around the expected beacon; `None` when not tracking.
    pub fn beacon_window(&self) -> Option<(Micros, Micros)> {
        match self.mode {
            ClassBMode::Locked | ClassBMode::Beaconless => {
                let t = self.expected_beacon_time?;
                let g = self.guard_us();
                Some((t.saturating_sub(g), t + g))
            }
            _ => None,
        }
    }

    /// Time at which beaconless operation ends, if beaconless.
    pub fn beaconless_deadline(&self) -> Option<Micros> {
        match self.mode {
            ClassBMode::Beaconless => self.beaconless_since.map(|t| t + self.config.beaconless_limit_us),
            _ => None,
        }
    }

    pub fn check_timeout(&mut self, now: Micros) -> bool {
        match self.beaconless_deadline() {
            Some(d) if now >= d => {
                self.revert();
                true
            }
            _ => false,
        }
    }

    fn revert(&mut self) {
        self.mode = ClassBMode::ClassA;
        self.expected_beacon_time = None;
        self.beaconless_since = None;
        self.reference = None;
        self.window_guard_symbols = self.config.window_guard_symbols;
    }

    /// Closes a beacon window. `observed` is the strongest beacon decoded in it.
    pub fn on_beacon_window(&mut self, now: Micros, observed: Option<ObservedBeacon>) -> BeaconOutcome {
        if self.check_timeout(now) {
            return BeaconOutcome::RevertedToClassA;
        }
        let in_window = |b: &ObservedBeacon| match self.beacon_window() {
            Some((lo, hi)) => b.start >= lo && b.start <= hi,
            None => true,
        };
        match (self.mode, observed.filter(in_window)) {
            (ClassBMode::ClassA, _) | (ClassBMode::Acquiring, None) => BeaconOutcome::Ignored,
            (_, Some(b)) => {
                self.mode = ClassBMode::Locked;
                self.expected_beacon_time = Some(b.start + BEACON_PERIOD);
                self.window_guard_symbols = self.config.window_guard_symbols;
                self.beaconless_since = None;
                self.last_beacon_payload = Some(b.payload);
                self.reference = Some((b.start, b.payload.gps_time_s));
                BeaconOutcome::Locked
            }
            (_, None) => {
                let expected = self.expected_beacon_time.expect("tracking implies an expected time");
                if self.mode == ClassBMode::Locked {
                    self.mode = ClassBMode::Beaconless;
                    self.beaconless_since = Some(expected);
                }
                let gps = self.reference.map_or(0, |(_, g)| g.wrapping_add(128));
                self.reference = Some((expected, gps));
                self.expected_beacon_time = Some(expected + BEACON_PERIOD);
                self.window_guard_symbols = libm::fmin(
                    self.window_guard_symbols + self.config.widen_symbols_per_period,
                    self.config.max_guard_symbols,
                );
                BeaconOutcome::Missed
            }
        }
    }

    /// Ping acceptance half-width: the base guard plus any beaconless widening.
    pub fn ping_guard_us(&self) -> Micros {
        let widened = self.window_guard_symbols - self.config.window_guard_symbols;
        self.config.symbols_us(self.config.ping_slot_guard_symbols + widened)
    }

    /// Absolute ping slot start times of the current period.
    pub fn ping_slots(&self, dev_addr: u32) -> Vec<Micros> {
        match (self.is_class_b(), self.reference) {
            (true, Some((t, gps))) => ping_slot_offsets(&self.config, gps, dev_addr)
                .into_iter()
                .map(|o| t + o)
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn accepts_ping_start(&self, start: Micros, dev_addr: u32) -> bool {
        let g = self.ping_guard_us();
        self.ping_slots(dev_addr).iter().any(|&s| start.abs_diff(s) <= g)
    }
}

/// Ping slot offsets from the beacon start, derived from a SHA-256 PRF over
/// the beacon time and the device address.
pub fn ping_slot_offsets(config: &ClassBConfig, gps_time_s: u32, dev_addr: u32) -> Vec<Micros> {
    let mut h = Sha256::new();
    h.update(b"ping");
    h.update(gps_time_s.to_le_bytes());
    h.update(dev_addr.to_le_bytes());
    let d = h.finalize();
    let period = config.ping_period_slots();
    let offset = u16::from_le_bytes([d[0], d[1]]) as u32 % period;
    (0..4096 / period)
        .map(|i| config.beacon_reserved_us + (offset + i * period) as Micros * config.slot_len_us)
        .collect()
}
