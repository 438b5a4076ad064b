use alloc::vec;
use alloc::vec::Vec;

use super::{fcnt_newer, may_carry_link_adr_ans, Action, Attack, AttackNote, ReplayWindow};
use crate::frames::{decode, peek_header, Direction};
use crate::netserver::RxWindowPlan;
use crate::phy::{symbol_duration, time_on_air, DataRate, TxParams};
use crate::simkit::{Delivery, NodeId, Outcome, Transmission, TxKind};
use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WormholeVariant {
    Unidirectional,
    Rx2,
    DownlinkDelayed,
}

impl core::fmt::Display for WormholeVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            WormholeVariant::Unidirectional => "unidirectional",
            WormholeVariant::Rx2 => "rx2",
            WormholeVariant::DownlinkDelayed => "downlink_delayed",
        })
    }
}

/// Which sniffed target uplinks are replayed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardPolicy {
    All,
    AdrAckReqOnly,
    Nothing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WormholeConfig {
    pub variant: WormholeVariant,
    /// Near the device: sniffs uplinks, replays downlinks.
    pub entry: NodeId,
    /// Near the gateways: jams, replays uplinks, captures downlinks.
    pub exit: NodeId,
    pub target_dev_addr: u32,
    pub sniff_freq_hz: u32,
    pub sniff_dr: DataRate,
    pub t_proc1: Micros,
    pub t_proc2: Micros,
    pub jam_enabled: bool,
    pub exit_power_dbm: i8,
    pub entry_power_dbm: i8,
    /// The network's receive-window plan, public knowledge.
    pub rx: RxWindowPlan,
    /// LoRaWAN 1.0 style unencrypted FOpts.
    pub fopts_cleartext: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WormholeStats {
    pub sniffed: u32,
    pub jammed: u32,
    pub uplinks_forwarded: u32,
    pub downlinks_forwarded: u32,
    pub downlinks_late: u32,
    pub stored_dropped: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct Stored {
    bytes: Vec<u8>,
    params: TxParams,
    fcnt: u16,
}

/// Replay and jamming engine shared by the three wormhole constructions.
#[derive(Debug, Clone)]
pub struct Wormhole {
    pub config: WormholeConfig,
    pub policy: ForwardPolicy,
    /// Whether withheld uplinks carrying MAC answers are also never forwarded.
    pub suppress_mac_answers: bool,
    pub active: bool,
    pub stats: WormholeStats,
    rx2_deadline: Option<Micros>,
    awaiting_store: bool,
    stored: Option<Stored>,
    last_down_fcnt: Option<u16>,
    own: Vec<(Micros, Vec<u8>)>,
}

const OWN_MEMORY: Micros = crate::secs(30);

impl Wormhole {
    pub fn new(config: WormholeConfig) -> Self {
        Wormhole {
            config,
            policy: ForwardPolicy::All,
            suppress_mac_answers: false,
            active: true,
            stats: WormholeStats::default(),
            rx2_deadline: None,
            awaiting_store: false,
            stored: None,
            last_down_fcnt: None,
            own: Vec::new(),
        }
    }

    pub fn has_stored(&self) -> bool {
        self.stored.is_some()
    }

    /// Retunes both radios.
    pub fn retune(&mut self, freq_hz: u32, dr: DataRate) -> Vec<Action> {
        self.config.sniff_freq_hz = freq_hz;
        self.config.sniff_dr = dr;
        self.rx2_deadline = None;
        self.awaiting_store = false;
        let sf = dr.sf();
        vec![
            Action::Listen { node: self.config.entry, freq_hz, sf },
            Action::Listen { node: self.config.exit, freq_hz, sf },
        ]
    }

    fn remember(&mut self, now: Micros, bytes: &[u8]) {
        self.own.retain(|(t, _)| *t + OWN_MEMORY >= now);
        self.own.push((now, bytes.to_vec()));
    }

    fn is_own(&self, bytes: &[u8]) -> bool {
        self.own.iter().any(|(_, b)| b == bytes)
    }

    fn replay(&mut self, now: Micros, node: NodeId, params: TxParams, start: Micros, bytes: &[u8]) -> Option<Action> {
        let power_dbm = if node == self.config.exit { self.config.exit_power_dbm } else { self.config.entry_power_dbm };
        let tx = Transmission::frame(node, TxParams { power_dbm, ..params }, start.max(now), bytes.to_vec(), TxKind::Data).ok()?;
        self.remember(now, bytes);
        Some(Action::Transmit(tx))
    }

    fn on_header(&mut self, now: Micros, d: &Delivery) -> Vec<Action> {
        let Some((Direction::Uplink, addr, _)) = peek_header(&d.tx.payload) else { return Vec::new() };
        if !self.active || !self.config.jam_enabled || addr != self.config.target_dev_addr || self.is_own(&d.tx.payload) {
            return Vec::new();
        }
        // The PHY header gives the length, hence the frame end.
        let Ok(air) = time_on_air(&d.tx.params, d.tx.payload.len()) else { return Vec::new() };
        let end = d.tx.start + air + symbol_duration(&d.tx.params);
        let params = TxParams { power_dbm: self.config.exit_power_dbm, ..d.tx.params };
        self.stats.jammed += 1;
        let fcnt = fcnt_lsb(&d.tx.payload);
        vec![
            Action::Transmit(Transmission::jam(self.config.exit, params, now, end.saturating_sub(now))),
            Action::Note(AttackNote::Jammed { fcnt }),
        ]
    }

    fn on_uplink(&mut self, now: Micros, d: &Delivery) -> Vec<Action> {
        let bytes = &d.tx.payload;
        let Ok(frame) = decode(bytes, Direction::Uplink) else { return Vec::new() };
        if !self.active || frame.dev_addr != self.config.target_dev_addr || self.is_own(bytes) {
            return Vec::new();
        }
        self.stats.sniffed += 1;
        let fcnt = frame.fcnt as u16;
        let mut out = Vec::new();
        let orig_end = now;
        let rx = self.config.rx;

        if self.config.variant == WormholeVariant::DownlinkDelayed {
            if let Some(s) = self.stored.take() {
                if let Some(a) = self.replay(now, self.config.entry, s.params, rx.rx1_open(orig_end), &s.bytes) {
                    out.push(a);
                    self.stats.downlinks_forwarded += 1;
                    out.push(Action::Note(AttackNote::DownlinkForwarded { fcnt: s.fcnt, window: ReplayWindow::Rx1 }));
                }
            }
        }

        let wanted = match self.policy {
            ForwardPolicy::All => true,
            ForwardPolicy::AdrAckReqOnly => frame.flags.adr_ack_req,
            ForwardPolicy::Nothing => false,
        };
        let forward = wanted && !(self.suppress_mac_answers && may_carry_link_adr_ans(&frame, self.config.fopts_cleartext));
        if !forward {
            out.push(Action::Note(AttackNote::UplinkWithheld { fcnt }));
            return out;
        }
        let bytes = bytes.clone();
        if let Some(a) = self.replay(now, self.config.exit, d.tx.params, orig_end + self.config.t_proc1, &bytes) {
            out.push(a);
            self.stats.uplinks_forwarded += 1;
            out.push(Action::Note(AttackNote::UplinkForwarded { fcnt, adr_ack_req: frame.flags.adr_ack_req }));
            match self.config.variant {
                WormholeVariant::Unidirectional => {}
                WormholeVariant::Rx2 => self.rx2_deadline = Some(rx.rx2_open(orig_end)),
                WormholeVariant::DownlinkDelayed => self.awaiting_store = true,
            }
        }
        out
    }

    fn on_downlink(&mut self, now: Micros, d: &Delivery) -> Vec<Action> {
        let bytes = &d.tx.payload;
        let Some((Direction::Downlink, addr, _)) = peek_header(bytes) else { return Vec::new() };
        if addr != self.config.target_dev_addr || self.is_own(bytes) {
            return Vec::new();
        }
        let fcnt = fcnt_lsb(bytes);
        let mut out = Vec::new();
        if let Some(s) = &self.stored {
            if fcnt_newer(fcnt, s.fcnt) {
                out.push(Action::Note(AttackNote::DownlinkDropped { fcnt: s.fcnt }));
                self.stats.stored_dropped += 1;
                self.stored = None;
            }
        }
        if self.last_down_fcnt.is_none_or(|l| fcnt_newer(fcnt, l)) {
            self.last_down_fcnt = Some(fcnt);
        }
        if d.receiver != self.config.exit {
            return out;
        }
        if let Some(deadline) = self.rx2_deadline.take() {
            let ready = now + self.config.t_proc2;
            if ready <= deadline {
                let rx = self.config.rx;
                let params = TxParams::downlink(rx.rx2_dr, rx.rx2_freq_hz, 0);
                let bytes = bytes.clone();
                if let Some(a) = self.replay(now, self.config.entry, params, deadline, &bytes) {
                    out.push(a);
                    self.stats.downlinks_forwarded += 1;
                    out.push(Action::Note(AttackNote::DownlinkForwarded { fcnt, window: ReplayWindow::Rx2 }));
                }
            } else {
                self.stats.downlinks_late += 1;
                out.push(Action::Note(AttackNote::DownlinkLate { fcnt, ready, deadline }));
            }
        } else if self.awaiting_store {
            self.awaiting_store = false;
            self.stored = Some(Stored { bytes: bytes.clone(), params: d.tx.params, fcnt });
            out.push(Action::Note(AttackNote::DownlinkStored { fcnt }));
        }
        out
    }
}

fn fcnt_lsb(bytes: &[u8]) -> u16 {
    bytes.get(6..8).map_or(0, |b| u16::from_le_bytes([b[0], b[1]]))
}

impl Attack for Wormhole {
    fn nodes(&self) -> Vec<NodeId> {
        vec![self.config.entry, self.config.exit]
    }

    fn start(&mut self, _now: Micros) -> Vec<Action> {
        let (f, dr) = (self.config.sniff_freq_hz, self.config.sniff_dr);
        self.retune(f, dr)
    }

    fn on_delivery(&mut self, now: Micros, d: &Delivery) -> Vec<Action> {
        if d.tx.kind != TxKind::Data {
            return Vec::new();
        }
        match (d.outcome, peek_header(&d.tx.payload).map(|h| h.0)) {
            (Outcome::Header, _) if d.receiver == self.config.entry => self.on_header(now, d),
            (Outcome::Decoded, Some(Direction::Uplink)) if d.receiver == self.config.entry => self.on_uplink(now, d),
            (Outcome::Decoded, Some(Direction::Downlink)) => self.on_downlink(now, d),
            _ => Vec::new(),
        }
    }

    fn on_timer(&mut self, _now: Micros, _token: u64) -> Vec<Action> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{encode, Frame};
    use crate::{ms, secs};

    fn config(variant: WormholeVariant) -> WormholeConfig {
        WormholeConfig {
            variant,
            entry: NodeId(2),
            exit: NodeId(3),
            target_dev_addr: 0x2601_0001,
            sniff_freq_hz: 868_100_000,
            sniff_dr: DataRate::DR2,
            t_proc1: ms(150),
            t_proc2: ms(50),
            jam_enabled: true,
            exit_power_dbm: 14,
            entry_power_dbm: 14,
            rx: RxWindowPlan::default(),
            fopts_cleartext: false,
        }
    }

    fn delivery(receiver: NodeId, frame: &Frame, params: TxParams, start: Micros, outcome: Outcome) -> Delivery {
        let tx = Transmission::frame(NodeId(0), params, start, encode(frame).unwrap(), TxKind::Data).unwrap();
        Delivery { receiver, tx, snr_db: 10.0, rssi_dbm: -90.0, outcome }
    }

    fn up(addr: u32, fcnt: u32) -> Frame {
        Frame::new(Direction::Uplink, addr, fcnt).with_payload(1, &[0])
    }

    fn transmits(actions: &[Action]) -> Vec<&Transmission> {
        actions.iter().filter_map(|a| if let Action::Transmit(t) = a { Some(t) } else { None }).collect()
    }

    #[test]
    fn selective_jam() {
        let mut w = Wormhole::new(config(WormholeVariant::Unidirectional));
        let p = TxParams::uplink(DataRate::DR2, 868_100_000, 16);
        let a = w.on_delivery(100, &delivery(NodeId(2), &up(0x2601_0001, 1), p, 0, Outcome::Header));
        let jam = transmits(&a);
        assert_eq!(jam.len(), 1);
        assert_eq!((jam[0].kind, jam[0].source, jam[0].start), (TxKind::Jam, NodeId(3), 100));
        assert!(jam[0].end() > time_on_air(&p, 14).unwrap());
        let other = w.on_delivery(100, &delivery(NodeId(2), &up(0x2601_0002, 1), p, 0, Outcome::Header));
        assert!(other.is_empty());
    }

    #[test]
    fn uplink_replayed_byte_identical_after_processing() {
        let mut w = Wormhole::new(config(WormholeVariant::Unidirectional));
        let p = TxParams::uplink(DataRate::DR2, 868_100_000, 16);
        let d = delivery(NodeId(2), &up(0x2601_0001, 1), p, 0, Outcome::Decoded);
        let end = d.tx.end();
        let a = w.on_delivery(end, &d);
        let t = transmits(&a);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].payload, d.tx.payload);
        assert_eq!((t[0].start, t[0].params.freq_hz, t[0].params.sf), (end + ms(150), p.freq_hz, p.sf));
        // Our own replay heard back is ignored.
        assert!(w.on_delivery(end + secs(1), &Delivery { receiver: NodeId(2), ..d }).is_empty());
    }

    #[test]
    fn rx2_replay_only_when_in_time() {
        for (dr, expect) in [(DataRate::DR2, true), (DataRate::DR0, false)] {
            let mut w = Wormhole::new(WormholeConfig { sniff_dr: dr, ..config(WormholeVariant::Rx2) });
            let p = TxParams::uplink(dr, 868_100_000, 16);
            let d = delivery(NodeId(2), &up(0x2601_0001, 7), p, 0, Outcome::Decoded);
            let t_up = d.tx.end();
            let a = w.on_delivery(t_up, &d);
            let replay_end = transmits(&a)[0].end();
            let down = Frame::new(Direction::Downlink, 0x2601_0001, 3).with_mac_commands(&[]).unwrap();
            let dp = TxParams::downlink(dr, 868_100_000, 16);
            let dd = delivery(NodeId(3), &down, dp, replay_end + secs(1), Outcome::Decoded);
            let a = w.on_delivery(dd.tx.end(), &dd);
            let t = transmits(&a);
            assert_eq!(!t.is_empty(), expect, "{dr}");
            if expect {
                assert_eq!((t[0].start, t[0].params.freq_hz, t[0].params.sf), (t_up + secs(2), 869_525_000, 12));
                assert_eq!(t[0].source, NodeId(2));
            }
        }
    }

    #[test]
    fn delayed_downlink_replayed_in_next_rx1() {
        let mut w = Wormhole::new(config(WormholeVariant::DownlinkDelayed));
        let p = TxParams::uplink(DataRate::DR2, 868_100_000, 16);
        let d1 = delivery(NodeId(2), &up(0x2601_0001, 1), p, 0, Outcome::Decoded);
        w.on_delivery(d1.tx.end(), &d1);
        let down = Frame::new(Direction::Downlink, 0x2601_0001, 0);
        let dp = TxParams::downlink(DataRate::DR2, 868_100_000, 16);
        let dd = delivery(NodeId(3), &down, dp, secs(2), Outcome::Decoded);
        let a = w.on_delivery(dd.tx.end(), &dd);
        assert!(a.contains(&Action::Note(AttackNote::DownlinkStored { fcnt: 0 })));
        let d2 = delivery(NodeId(2), &up(0x2601_0001, 2), p, secs(12), Outcome::Decoded);
        let a = w.on_delivery(d2.tx.end(), &d2);
        let t = transmits(&a);
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].source, t[0].start), (NodeId(2), d2.tx.end() + secs(1)));
        assert_eq!(t[0].payload, dd.tx.payload);
        assert_eq!(t[1].source, NodeId(3));
    }

    #[test]
    fn stored_downlink_dropped_when_outdated() {
        let mut w = Wormhole::new(config(WormholeVariant::DownlinkDelayed));
        let p = TxParams::uplink(DataRate::DR2, 868_100_000, 16);
        let d1 = delivery(NodeId(2), &up(0x2601_0001, 1), p, 0, Outcome::Decoded);
        w.on_delivery(d1.tx.end(), &d1);
        let dp = TxParams::downlink(DataRate::DR2, 868_100_000, 16);
        let dd = delivery(NodeId(3), &Frame::new(Direction::Downlink, 0x2601_0001, 4), dp, secs(2), Outcome::Decoded);
        w.on_delivery(dd.tx.end(), &dd);
        assert!(w.has_stored());
        let newer = delivery(NodeId(2), &Frame::new(Direction::Downlink, 0x2601_0001, 5), dp, secs(5), Outcome::Decoded);
        let a = w.on_delivery(newer.tx.end(), &newer);
        assert!(a.contains(&Action::Note(AttackNote::DownlinkDropped { fcnt: 4 })));
        assert!(!w.has_stored());
    }

    #[test]
    fn answers_are_withheld() {
        use crate::frames::{conceal, DeviceSession, LinkAdrAns, MacCommand, MicPolicy};
        let mut w = Wormhole::new(config(WormholeVariant::Rx2));
        w.suppress_mac_answers = true;
        let s = DeviceSession::abp(0x2601_0001, 1);
        let ans = MacCommand::LinkAdrAns(LinkAdrAns { power_ok: true, dr_ok: true, ch_ok: true });
        let f = conceal(&up(0x2601_0001, 3).with_mac_commands(&[ans]).unwrap(), &s, MicPolicy::V11);
        let p = TxParams::uplink(DataRate::DR2, 868_100_000, 16);
        let d = delivery(NodeId(2), &f, p, 0, Outcome::Decoded);
        let a = w.on_delivery(d.tx.end(), &d);
        assert!(transmits(&a).is_empty());
        assert!(a.contains(&Action::Note(AttackNote::UplinkWithheld { fcnt: 3 })));
    }
}
