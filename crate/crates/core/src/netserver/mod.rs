//! Network server and gateways: uplink acceptance and deduplication, SNR
//! history, ADR, the MAC command queue, rx1/rx2 downlink planning, Class B
//! pings and beacons.

mod adr;

pub use adr::adr_decision;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::enddevice::{ping_slot_offsets, ClassBConfig, BEACON_PERIOD};
use crate::frames::{
    self, conceal, reveal, BeaconPayload, DeviceSession, Direction, Frame, LinkAdrReq, MacCommand, MicPolicy,
    Rejection,
};
use crate::phy::{DataRate, TxParams};
use crate::{ms, secs, Micros};

pub const SNR_HISTORY_LEN: usize = 20;
/// GPS seconds at simulation time zero; a multiple of the beacon period.
pub const GPS_EPOCH_OFFSET_S: u32 = 1_280_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("rx1 delay must lie in 1..=15 s")]
    Rx1Delay,
    #[error("rx2 follows rx1 by exactly 1 s")]
    Rx2Delay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RxWindowPlan {
    pub d_rx1_us: Micros,
    pub d_rx2_us: Micros,
    pub rx2_freq_hz: u32,
    pub rx2_dr: DataRate,
    /// Preamble-detection timeout of a receive window, in symbols.
    pub rx_timeout_symbols: u16,
}

impl Default for RxWindowPlan {
    fn default() -> Self {
        RxWindowPlan {
            d_rx1_us: secs(1),
            d_rx2_us: secs(1),
            rx2_freq_hz: 869_525_000,
            rx2_dr: DataRate::DR0,
            rx_timeout_symbols: 8,
        }
    }
}

impl RxWindowPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(secs(1)..=secs(15)).contains(&self.d_rx1_us) {
            return Err(PlanError::Rx1Delay);
        }
        if self.d_rx2_us != secs(1) {
            return Err(PlanError::Rx2Delay);
        }
        Ok(())
    }

    pub fn rx1_open(&self, uplink_end: Micros) -> Micros {
        uplink_end + self.d_rx1_us
    }

    pub fn rx2_open(&self, uplink_end: Micros) -> Micros {
        uplink_end + self.d_rx1_us + self.d_rx2_us
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsConfig {
    pub policy: MicPolicy,
    pub margin_db: f64,
    pub resend_budget: u32,
    pub rx: RxWindowPlan,
    pub gateway_power_dbm: i8,
    pub n_channels: usize,
    pub beacon_freq_hz: u32,
    pub ping_dr: DataRate,
    pub class_b: ClassBConfig,
    pub app_port: u8,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            policy: MicPolicy::V11,
            margin_db: 10.0,
            resend_budget: 8,
            rx: RxWindowPlan::default(),
            gateway_power_dbm: 16,
            n_channels: 3,
            beacon_freq_hz: 869_525_000,
            ping_dr: DataRate::DR0,
            class_b: ClassBConfig::default(),
            app_port: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UplinkMeta {
    pub tx: TxParams,
    pub snr_db: f64,
    pub rssi_dbm: f64,
    /// Reception end time.
    pub time: Micros,
    pub gateway: usize,
}

impl UplinkMeta {
    pub fn dr(&self) -> DataRate {
        self.tx.data_rate().unwrap_or(DataRate::DR0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingCommand {
    pub req: LinkAdrReq,
    pub resends_left: u32,
    pub unacknowledged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsDeviceRecord {
    pub session: DeviceSession,
    pub snr_history: VecDeque<f64>,
    pub pending_mac: Option<PendingCommand>,
    pub last_uplink_meta: Option<UplinkMeta>,
    /// Power index confirmed by the device's last positive LinkADRAns.
    pub believed_tp_index: u8,
    pub app_queue: Option<Vec<u8>>,
    pub class_b: bool,
    last_accepted: Option<(u32, Micros)>,
}

impl NsDeviceRecord {
    pub fn new(session: DeviceSession) -> Self {
        NsDeviceRecord {
            session,
            snr_history: VecDeque::with_capacity(SNR_HISTORY_LEN),
            pending_mac: None,
            last_uplink_meta: None,
            believed_tp_index: 0,
            app_queue: None,
            class_b: false,
            last_accepted: None,
        }
    }

    fn push_snr(&mut self, snr: f64) {
        if self.snr_history.len() == SNR_HISTORY_LEN {
            self.snr_history.pop_front();
        }
        self.snr_history.push_back(snr);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptedUplink {
    pub dev_addr: u32,
    pub fcnt: u32,
    pub flags: frames::FrameFlags,
    pub meta: UplinkMeta,
    pub link_adr_ans: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ingest {
    Accepted(AcceptedUplink),
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum NsReject {
    #[error("malformed frame")]
    Malformed,
    #[error("unknown device {0:#010x}")]
    UnknownDevice(u32),
    #[error("rejected: {0}")]
    Rejected(Rejection),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxWindow {
    Rx1,
    Rx2,
    Ping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedDownlink {
    pub dev_addr: u32,
    pub frame: Frame,
    pub bytes: Vec<u8>,
    pub tx: TxParams,
    pub tx_time: Micros,
    pub window: RxWindow,
    pub gateway: usize,
    pub link_adr: Option<LinkAdrReq>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedBeacon {
    pub gateway: usize,
    pub payload: BeaconPayload,
    pub tx: TxParams,
    pub tx_time: Micros,
}

/// Hooks for metrics collection; all methods default to no-ops.
pub trait NsObserver {
    fn uplink_accepted(&mut self, _uplink: &AcceptedUplink) {}
    fn downlink_sent(&mut self, _downlink: &PlannedDownlink) {}
    fn adr_command_issued(&mut self, _dev_addr: u32, _req: &LinkAdrReq) {}
}

impl NsObserver for () {}

/// Duplicates are the same counter received within this span.
const DEDUP_WINDOW: Micros = ms(1);

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkServer {
    pub config: NsConfig,
    pub devices: BTreeMap<u32, NsDeviceRecord>,
}

impl NetworkServer {
    pub fn new(config: NsConfig) -> Self {
        NetworkServer { config, devices: BTreeMap::new() }
    }

    pub fn register(&mut self, session: DeviceSession) {
        self.devices.insert(session.dev_addr, NsDeviceRecord::new(session));
    }

    pub fn record(&self, dev_addr: u32) -> Option<&NsDeviceRecord> {
        self.devices.get(&dev_addr)
    }

    pub fn queue_app_downlink(&mut self, dev_addr: u32, payload: Vec<u8>) {
        if let Some(r) = self.devices.get_mut(&dev_addr) {
            r.app_queue = Some(payload);
        }
    }

    /// Accepts an uplink heard by a gateway. Copies of an accepted frame from
    /// other gateways collapse into one; the best SNR among them is kept.
    pub fn ingest_uplink<O: NsObserver + ?Sized>(
        &mut self,
        bytes: &[u8],
        meta: UplinkMeta,
        obs: &mut O,
    ) -> Result<Ingest, NsReject> {
        let frame = frames::decode(bytes, Direction::Uplink).map_err(|_| NsReject::Malformed)?;
        let policy = self.config.policy;
        let rec = self.devices.get_mut(&frame.dev_addr).ok_or(NsReject::UnknownDevice(frame.dev_addr))?;
        if let Some((lsb, t)) = rec.last_accepted {
            if lsb == frame.fcnt && meta.time.abs_diff(t) <= DEDUP_WINDOW {
                if let Some(last) = rec.snr_history.back_mut() {
                    *last = last.max(meta.snr_db);
                }
                return Ok(Ingest::Duplicate);
            }
        }
        let mut full = frame;
        full.fcnt = rec.session.reconstruct_fcnt(Direction::Uplink, full.fcnt);
        frames::verify(&full, &rec.session, &meta.tx, policy, None).map_err(NsReject::Rejected)?;
        rec.session.accept(Direction::Uplink, full.fcnt);
        rec.last_accepted = Some((full.fcnt & 0xffff, meta.time));
        rec.push_snr(meta.snr_db);
        rec.last_uplink_meta = Some(meta);
        rec.class_b = full.flags.class_b;
        let plain = reveal(&full, &rec.session, policy);
        let mut link_adr_ans = false;
        for cmd in plain.mac_commands().unwrap_or_default() {
            if let MacCommand::LinkAdrAns(ans) = cmd {
                link_adr_ans = true;
                mac_ack_handling(rec, ans.all_ok());
            }
        }
        let up = AcceptedUplink { dev_addr: full.dev_addr, fcnt: full.fcnt, flags: full.flags, meta, link_adr_ans };
        obs.uplink_accepted(&up);
        if full.flags.adr {
            self.run_adr(full.dev_addr, meta.dr(), obs);
        }
        Ok(Ingest::Accepted(up))
    }

    fn run_adr<O: NsObserver + ?Sized>(&mut self, dev_addr: u32, dr: DataRate, obs: &mut O) {
        let margin = self.config.margin_db;
        let budget = self.config.resend_budget;
        let n = self.config.n_channels.min(16);
        let Some(rec) = self.devices.get_mut(&dev_addr) else { return };
        let Some((new_dr, tp)) = adr_decision(rec.snr_history.iter().copied(), dr, rec.believed_tp_index, margin) else {
            return;
        };
        let req = LinkAdrReq {
            dr: new_dr.index(),
            tp_index: tp,
            ch_mask: if n == 16 { u16::MAX } else { (1u16 << n) - 1 },
            nb_trans: 1,
        };
        if rec.pending_mac.is_some_and(|p| p.req == req) {
            return;
        }
        rec.pending_mac = Some(PendingCommand { req, resends_left: budget, unacknowledged: true });
        obs.adr_command_issued(dev_addr, &req);
    }

    /// Plans the Class A answer to an accepted uplink, preferring rx1.
    pub fn plan_downlink<O: NsObserver + ?Sized>(
        &mut self,
        uplink: &AcceptedUplink,
        rx1_available: bool,
        obs: &mut O,
    ) -> Option<PlannedDownlink> {
        let cfg = &self.config;
        let rec = self.devices.get_mut(&uplink.dev_addr)?;
        let has_mac = rec.pending_mac.is_some_and(|p| p.unacknowledged && p.resends_left > 0);
        let has_app = rec.app_queue.is_some() && !rec.class_b;
        if !(has_mac || uplink.flags.adr_ack_req || has_app) {
            return None;
        }
        let (tx, tx_time, window) = if rx1_available {
            let m = &uplink.meta;
            (TxParams::downlink(m.dr(), m.tx.freq_hz, cfg.gateway_power_dbm), cfg.rx.rx1_open(m.time), RxWindow::Rx1)
        } else {
            (
                TxParams::downlink(cfg.rx.rx2_dr, cfg.rx.rx2_freq_hz, cfg.gateway_power_dbm),
                cfg.rx.rx2_open(uplink.meta.time),
                RxWindow::Rx2,
            )
        };
        let fcnt = rec.session.take_fcnt(Direction::Downlink);
        let mut frame = Frame::new(Direction::Downlink, uplink.dev_addr, fcnt);
        let mut link_adr = None;
        if has_mac {
            let p = rec.pending_mac.as_mut().expect("checked");
            p.resends_left -= 1;
            link_adr = Some(p.req);
            frame = frame.with_mac_commands(&[MacCommand::LinkAdrReq(p.req)]).expect("5 bytes fit");
            if p.resends_left == 0 {
                rec.pending_mac = None;
            }
        }
        if has_app {
            frame = frame.with_payload(cfg.app_port, &rec.app_queue.take().expect("checked"));
        }
        let planned = seal(rec, frame, tx, tx_time, window, uplink.meta.gateway, Some(uplink.fcnt as u16), cfg.policy, link_adr);
        obs.downlink_sent(&planned);
        Some(planned)
    }

    /// Plans a queued application downlink into the device's first ping slot
    /// of the period starting at `beacon_time`.
    pub fn plan_ping<O: NsObserver + ?Sized>(
        &mut self,
        dev_addr: u32,
        beacon_time: Micros,
        gateway: usize,
        obs: &mut O,
    ) -> Option<PlannedDownlink> {
        let cfg = &self.config;
        let rec = self.devices.get_mut(&dev_addr)?;
        if !rec.class_b || rec.app_queue.is_none() {
            return None;
        }
        let gps = gps_time_s(beacon_time);
        let slot = ping_slot_offsets(&cfg.class_b, gps, dev_addr)[0];
        let tx = TxParams::downlink(cfg.ping_dr, cfg.beacon_freq_hz, cfg.gateway_power_dbm);
        let fcnt = rec.session.take_fcnt(Direction::Downlink);
        let frame = Frame::new(Direction::Downlink, dev_addr, fcnt)
            .with_payload(cfg.app_port, &rec.app_queue.take().expect("checked"));
        let planned = seal(rec, frame, tx, beacon_time + slot, RxWindow::Ping, gateway, None, cfg.policy, None);
        obs.downlink_sent(&planned);
        Some(planned)
    }

    /// One identical beacon per gateway, except for `gw_info`.
    pub fn beacon_tick(&self, now: Micros, gateways: usize) -> Result<Vec<PlannedBeacon>, NotAligned> {
        if !now.is_multiple_of(BEACON_PERIOD) {
            return Err(NotAligned(now));
        }
        let gps = gps_time_s(now);
        Ok((0..gateways)
            .map(|g| {
                let mut gw_info = *b"GW\0\0\0\0\0";
                gw_info[2..4].copy_from_slice(&(g as u16).to_le_bytes());
                PlannedBeacon {
                    gateway: g,
                    payload: BeaconPayload { gps_time_s: gps, gw_info },
                    tx: TxParams::beacon(self.config.beacon_freq_hz, self.config.gateway_power_dbm),
                    tx_time: now,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("beacon time {0} is not on the 128 s grid")]
pub struct NotAligned(pub Micros);

pub fn gps_time_s(t: Micros) -> u32 {
    GPS_EPOCH_OFFSET_S.wrapping_add((t / crate::MICROS_PER_SECOND) as u32)
}

/// LinkADRAns handling: the pending request is settled either way; a
/// positive answer also confirms the requested power.
pub fn mac_ack_handling(rec: &mut NsDeviceRecord, all_ok: bool) {
    if let Some(p) = rec.pending_mac.take() {
        if all_ok {
            rec.believed_tp_index = p.req.tp_index;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn seal(
    rec: &mut NsDeviceRecord,
    frame: Frame,
    tx: TxParams,
    tx_time: Micros,
    window: RxWindow,
    gateway: usize,
    conf: Option<u16>,
    policy: MicPolicy,
    link_adr: Option<LinkAdrReq>,
) -> PlannedDownlink {
    let mut frame = conceal(&frame, &rec.session, policy);
    frame.mic = frames::compute_mic(&rec.session, &frame, &tx, policy, conf).expect("own session");
    let bytes = frames::encode(&frame).expect("bounded fields");
    PlannedDownlink { dev_addr: rec.session.dev_addr, frame, bytes, tx, tx_time, window, gateway, link_adr }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enddevice::{DeviceConfig, EndDevice};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ADDR: u32 = 0x2601_0001;

    fn setup() -> (NetworkServer, EndDevice, ChaCha8Rng) {
        let session = DeviceSession::abp(ADDR, 5);
        let mut ns = NetworkServer::new(NsConfig::default());
        ns.register(session.clone());
        let cfg = DeviceConfig {
            channels: alloc::vec![868_100_000, 868_300_000, 868_500_000],
            initial_dr: DataRate::DR2,
            adr_ack_limit: 32,
            adr_ack_delay: 32,
            adr: true,
            app_port: 1,
            app_payload: alloc::vec![1],
            policy: MicPolicy::V11,
            class_b: ClassBConfig::default(),
        };
        (ns, EndDevice::new(session, &cfg), ChaCha8Rng::seed_from_u64(3))
    }

    fn meta(tx: TxParams, snr: f64, time: Micros) -> UplinkMeta {
        UplinkMeta { tx, snr_db: snr, rssi_dbm: snr - 117.0, time, gateway: 0 }
    }

    fn send(ns: &mut NetworkServer, ed: &mut EndDevice, rng: &mut ChaCha8Rng, snr: f64, t: Micros) -> Result<Ingest, NsReject> {
        let (f, tx) = ed.next_uplink(rng);
        ns.ingest_uplink(&frames::encode(&f).unwrap(), meta(tx, snr, t), &mut ())
    }

    #[test]
    fn history_is_capped_fifo() {
        let (mut ns, mut ed, mut rng) = setup();
        for i in 0..21 {
            assert!(matches!(send(&mut ns, &mut ed, &mut rng, -30.0 + i as f64, secs(30 * i)), Ok(Ingest::Accepted(_))));
        }
        let h = &ns.record(ADDR).unwrap().snr_history;
        assert_eq!(h.len(), 20);
        assert_eq!(h[0], -29.0);
    }

    #[test]
    fn duplicates_collapse_and_replays_are_stale() {
        let (mut ns, mut ed, mut rng) = setup();
        let (f, tx) = ed.next_uplink(&mut rng);
        let b = frames::encode(&f).unwrap();
        assert!(matches!(ns.ingest_uplink(&b, meta(tx, -11.0, secs(1)), &mut ()), Ok(Ingest::Accepted(_))));
        let mut m = meta(tx, -9.0, secs(1));
        m.gateway = 1;
        assert_eq!(ns.ingest_uplink(&b, m, &mut ()), Ok(Ingest::Duplicate));
        assert_eq!(ns.record(ADDR).unwrap().snr_history, [-9.0]);
        assert_eq!(
            ns.ingest_uplink(&b, meta(tx, 8.0, secs(1) + ms(200)), &mut ()),
            Err(NsReject::Rejected(Rejection::StaleFcnt))
        );
    }

    #[test]
    fn cross_channel_replay_rejected_under_v11() {
        let (mut ns, mut ed, mut rng) = setup();
        let (f, mut tx) = ed.next_uplink(&mut rng);
        tx.freq_hz = if tx.freq_hz == 868_100_000 { 868_300_000 } else { 868_100_000 };
        assert_eq!(
            ns.ingest_uplink(&frames::encode(&f).unwrap(), meta(tx, 8.0, 0), &mut ()),
            Err(NsReject::Rejected(Rejection::BadMic))
        );
    }

    #[test]
    fn downlink_rules() {
        let (mut ns, mut ed, mut rng) = setup();
        let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, -11.0, secs(10)) else { panic!() };
        assert_eq!(ns.plan_downlink(&up, true, &mut ()), None);

        ed.adr.adr_ack_cnt = 32;
        let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, -11.0, secs(40)) else { panic!() };
        let d = ns.plan_downlink(&up, true, &mut ()).unwrap();
        assert_eq!(d.tx_time, secs(41));
        assert_eq!(d.bytes.len(), 12);
        assert_eq!((d.tx.freq_hz, d.tx.sf), (up.meta.tx.freq_hz, up.meta.tx.sf));

        let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, -11.0, secs(70)) else { panic!() };
        let d = ns.plan_downlink(&up, false, &mut ()).unwrap();
        assert_eq!(d.tx_time, secs(72));
        assert_eq!((d.tx.freq_hz, d.tx.sf, d.window), (869_525_000, 12, RxWindow::Rx2));
        assert!(ed.receive_downlink(&frames::decode(&d.bytes, Direction::Downlink).unwrap(), &d.tx).is_ok());
    }

    #[test]
    fn link_adr_req_resent_until_budget_then_dropped() {
        let (mut ns, mut ed, mut rng) = setup();
        let mut sent = 0;
        for i in 0..12 {
            let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, 8.0, secs(30 * i)) else { panic!() };
            if i == 0 {
                assert!(ns.record(ADDR).unwrap().pending_mac.is_some());
            }
            if let Some(d) = ns.plan_downlink(&up, true, &mut ()) {
                assert_eq!(d.link_adr.map(|r| r.dr), Some(5));
                sent += 1;
            }
            if i == 7 {
                assert!(ns.record(ADDR).unwrap().pending_mac.is_none());
                break;
            }
        }
        assert_eq!(sent, 8);
    }

    #[test]
    fn answer_clears_queue() {
        let (mut ns, mut ed, mut rng) = setup();
        let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, 8.0, secs(0)) else { panic!() };
        let d = ns.plan_downlink(&up, true, &mut ()).unwrap();
        let report = ed.receive_downlink(&frames::decode(&d.bytes, Direction::Downlink).unwrap(), &d.tx).unwrap();
        assert_eq!(report.link_adr.len(), 1);
        let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, -11.0, secs(30)) else { panic!() };
        assert!(up.link_adr_ans);
        let rec = ns.record(ADDR).unwrap();
        assert_eq!(rec.believed_tp_index, 1);
        // The acknowledged request is gone; the +8 dB entry still in the
        // history now asks for one more power step.
        assert_eq!(rec.pending_mac.map(|p| (p.req.dr, p.req.tp_index)), Some((5, 2)));
    }

    #[test]
    fn downlink_counters_strictly_increase() {
        let (mut ns, mut ed, mut rng) = setup();
        ed.adr.adr_ack_cnt = 40;
        let mut last = None;
        for i in 0..10 {
            let Ok(Ingest::Accepted(up)) = send(&mut ns, &mut ed, &mut rng, -11.0, secs(30 * i)) else { panic!() };
            let d = ns.plan_downlink(&up, i % 2 == 0, &mut ()).unwrap();
            assert!(last.is_none_or(|l| d.frame.fcnt > l));
            last = Some(d.frame.fcnt);
        }
    }

    #[test]
    fn beacons_are_periodic_and_identical_but_for_gw_info() {
        let ns = NetworkServer::new(NsConfig::default());
        let a = ns.beacon_tick(BEACON_PERIOD, 2).unwrap();
        let b = ns.beacon_tick(2 * BEACON_PERIOD, 2).unwrap();
        assert_eq!(b[0].tx_time - a[0].tx_time, 128_000_000);
        assert_eq!(a[0].payload.gps_time_s, a[1].payload.gps_time_s);
        assert_ne!(a[0].payload.gw_info, a[1].payload.gw_info);
        let (x, y) = (a[0].payload.encode(), a[1].payload.encode());
        assert_eq!(x[..8], y[..8]);
        assert_eq!(crate::phy::time_on_air(&a[0].tx, 17).unwrap(), 152_576);
        assert_eq!(ns.beacon_tick(BEACON_PERIOD + 1, 1), Err(NotAligned(BEACON_PERIOD + 1)));
    }

    #[test]
    fn rx_plan_bounds() {
        assert!(RxWindowPlan::default().validate().is_ok());
        let p = RxWindowPlan { d_rx1_us: secs(16), ..Default::default() };
        assert_eq!(p.validate(), Err(PlanError::Rx1Delay));
        let p = RxWindowPlan { d_rx2_us: secs(2), ..Default::default() };
        assert_eq!(p.validate(), Err(PlanError::Rx2Delay));
    }
}
