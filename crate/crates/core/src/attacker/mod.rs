//! Attacker nodes: selective jamming, the three wormholes, ADR spoofing and
//! beacon drifting. Attacks only see what their own radios demodulate and
//! act through [`Action`]s that the world executes.

mod adr_spoof;
mod beacon_drift;
mod wormhole;

pub use adr_spoof::{AdrPhase, AdrSpoof, AdrSpoofConfig};
pub use beacon_drift::{drift_periods, drift_shift_us, BeaconDrift, BeaconDriftConfig, DriftPhase, TOTAL_DRIFT_US};
pub use wormhole::{ForwardPolicy, Wormhole, WormholeConfig, WormholeStats, WormholeVariant};

use alloc::vec::Vec;

use crate::frames::{parse_mac_commands, Direction, Frame, MacCommand};
use crate::phy::{time_on_air, DataRate, TxParams};
use crate::simkit::{Delivery, NodeId, Transmission};
use crate::Micros;

/// Something an attack asks the world to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Emit at `tx.start`, which must not lie in the past.
    Transmit(Transmission),
    /// Retune a radio; it then listens until retuned again.
    Listen { node: NodeId, freq_hz: u32, sf: u8 },
    Timer { at: Micros, token: u64 },
    Note(AttackNote),
}

/// Attack-side events, surfaced for tracing and metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackNote {
    Jammed { fcnt: u16 },
    UplinkForwarded { fcnt: u16, adr_ack_req: bool },
    UplinkWithheld { fcnt: u16 },
    DownlinkStored { fcnt: u16 },
    DownlinkDropped { fcnt: u16 },
    DownlinkForwarded { fcnt: u16, window: ReplayWindow },
    DownlinkLate { fcnt: u16, ready: Micros, deadline: Micros },
    PhaseChanged(AdrPhase),
    BeaconSynced { gps_time_s: u32 },
    BeaconSpoofed { period: i64, shift_us: Micros },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayWindow {
    Rx1,
    Rx2,
}

/// An attack orchestrator running on the simulator thread.
pub trait Attack {
    /// Nodes whose receptions are routed to this attack.
    fn nodes(&self) -> Vec<NodeId>;
    fn start(&mut self, now: Micros) -> Vec<Action>;
    fn on_delivery(&mut self, now: Micros, delivery: &Delivery) -> Vec<Action>;
    fn on_timer(&mut self, now: Micros, token: u64) -> Vec<Action>;
}

/// Budget check: uplink replay, rx1 capture and the rx2 replay must fit
/// in the gap between the two receive windows.
pub fn rx2_feasible(dr_up: DataRate, uplink_len: usize, downlink_len: usize, t_proc1: Micros, t_proc2: Micros) -> bool {
    rx2_slack(dr_up, uplink_len, downlink_len, t_proc1, t_proc2, crate::secs(1)).is_some()
}

/// Remaining time in the rx1→rx2 gap, or `None` when the budget is exceeded.
pub fn rx2_slack(
    dr_up: DataRate,
    uplink_len: usize,
    downlink_len: usize,
    t_proc1: Micros,
    t_proc2: Micros,
    gap: Micros,
) -> Option<Micros> {
    let up = time_on_air(&TxParams::uplink(dr_up, 868_100_000, 14), uplink_len.max(1)).ok()?;
    let down = time_on_air(&TxParams::downlink(dr_up, 868_100_000, 14), downlink_len.max(1)).ok()?;
    gap.checked_sub(t_proc1 + up + down + t_proc2)
}

/// Uplinks without a sighting on one of `n_channels` equiprobable channels
/// before concluding, with miss probability `p_miss`, that the device left.
pub fn timeout_uplinks(n_channels: u32, p_miss: f64) -> u32 {
    if n_channels <= 1 {
        return 1;
    }
    let q = (n_channels - 1) as f64 / n_channels as f64;
    libm::ceil(libm::log(p_miss) / libm::log(q)).max(1.0) as u32
}

/// Silence after which the spoofing phase assumes the device switched.
pub fn t_timeout(uplink_period: Micros, n_channels: u32, p_miss: f64) -> Micros {
    uplink_period * timeout_uplinks(n_channels, p_miss) as Micros
}

/// What the attacker can learn about the MAC commands of a captured frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MacView {
    Readable(Vec<MacCommand>),
    /// Encrypted FOpts: only the length shows.
    Opaque(usize),
}

pub fn observe_mac_commands(frame: &Frame, fopts_cleartext: bool) -> MacView {
    if fopts_cleartext {
        if let Ok(cmds) = parse_mac_commands(&frame.fopts, frame.direction) {
            return MacView::Readable(cmds);
        }
    }
    MacView::Opaque(frame.fopts.len())
}

/// True if the uplink may carry a LinkADRAns. Without cleartext FOpts any
/// piggy-backed MAC data counts.
pub fn may_carry_link_adr_ans(frame: &Frame, fopts_cleartext: bool) -> bool {
    frame.direction == Direction::Uplink
        && match observe_mac_commands(frame, fopts_cleartext) {
            MacView::Readable(cmds) => cmds.iter().any(|c| matches!(c, MacCommand::LinkAdrAns(_))),
            MacView::Opaque(n) => n > 0,
        }
}

/// Signed distance between two 16-bit on-air counters.
pub(crate) fn fcnt_newer(a: u16, b: u16) -> bool {
    (a.wrapping_sub(b) as i16) > 0
}
