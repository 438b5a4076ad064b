//! A simulated deployment: devices, gateways, the network server and an
//! optional attack sharing one radio medium under one event queue.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attacker::{Action, Attack, AttackNote};
use crate::enddevice::{BackoffStep, BeaconOutcome, ClassBMode, EndDevice, ObservedBeacon, BEACON_PERIOD};
use crate::frames::{self, decode, peek_header, BeaconPayload, Direction, FrameFlags, LinkAdrAns, LinkAdrReq, Rejection};
use crate::netserver::{
    AcceptedUplink, Ingest, NetworkServer, NsConfig, NsObserver, NsReject, PlannedDownlink, RxWindow, UplinkMeta,
};
use crate::phy::{symbol_duration, DataRate, TxParams};
use crate::simkit::{
    ChannelModel, Delivery, Medium, MediumEvent, NodeId, Outcome, Scheduler, SimError, Trace, Transmission, TxKind,
};
use crate::Micros;

/// What happened, in time order. Experiments derive their metrics from it.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    UplinkSent { dev: usize, fcnt: u32, dr: DataRate, freq_hz: u32, flags: FrameFlags, adr_ack_cnt: u32 },
    GatewayHeard { gateway: usize, dev_addr: u32, dr: DataRate, snr_db: f64, rssi_dbm: f64, decoded: bool, from_attacker: bool },
    NsAccepted { dev_addr: u32, fcnt: u32, snr_db: f64, from_attacker: bool },
    NsRejected { reason: NsReject, from_attacker: bool },
    AdrCommand { dev_addr: u32, req: LinkAdrReq },
    DownlinkPlanned { dev_addr: u32, fcnt: u32, window: RxWindow, tx_time: Micros, link_adr: Option<LinkAdrReq> },
    DownlinkAccepted { dev: usize, window: RxWindow, fcnt: u32, from_attacker: bool, link_adr: Vec<(LinkAdrReq, LinkAdrAns)> },
    DownlinkRejected { dev: usize, window: RxWindow, from_attacker: bool, reason: Rejection },
    TransactionEnd { dev: usize, fcnt: u32, received: bool, backoff: Option<BackoffStep>, dr: DataRate, tp_index: u8, adr_ack_cnt: u32 },
    BeaconWindow { dev: usize, expected: Micros, outcome: BeaconOutcome, mode: ClassBMode, gw_info: Option<[u8; 7]>, snr_db: Option<f64> },
    PingSkipped { dev: usize, slot: Micros },
    Attack(AttackNote),
}

#[derive(Debug, Clone)]
enum Event {
    AttackStart,
    Uplink(usize),
    Medium(MediumEvent),
    RxOpen { dev: usize, fcnt: u32, window: RxWindow },
    RxClose { dev: usize, fcnt: u32, window: RxWindow },
    GatewayTx(Box<PlannedDownlink>),
    AttackTx(Box<Transmission>),
    AttackTimer(u64),
    BeaconTick(u64),
    ClassBStart(usize),
    BeaconOpen(usize),
    BeaconClose(usize),
    PingOpen { dev: usize, slot: Micros },
    PingClose { dev: usize, slot: Micros },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Listening {
    Idle,
    Rx(RxWindow),
    Beacon,
    Ping(Micros),
}

#[derive(Debug, Clone, Copy)]
struct Txn {
    fcnt: u32,
    end: Micros,
    tx: TxParams,
    received: bool,
    rx2_skipped: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    beacon: ObservedBeacon,
    gw_info: [u8; 7],
}

struct DeviceSlot {
    ed: EndDevice,
    node: NodeId,
    period: Micros,
    remaining: u32,
    txn: Option<Txn>,
    listening: Listening,
    candidates: Vec<Candidate>,
}

struct NsLog<'a> {
    log: &'a mut Vec<(Micros, Record)>,
    now: Micros,
    from_attacker: bool,
}

impl NsObserver for NsLog<'_> {
    fn uplink_accepted(&mut self, up: &AcceptedUplink) {
        let r = Record::NsAccepted { dev_addr: up.dev_addr, fcnt: up.fcnt, snr_db: up.meta.snr_db, from_attacker: self.from_attacker };
        self.log.push((self.now, r));
    }

    fn downlink_sent(&mut self, d: &PlannedDownlink) {
        let r = Record::DownlinkPlanned {
            dev_addr: d.dev_addr,
            fcnt: d.frame.fcnt,
            window: d.window,
            tx_time: d.tx_time,
            link_adr: d.link_adr,
        };
        self.log.push((self.now, r));
    }

    fn adr_command_issued(&mut self, dev_addr: u32, req: &LinkAdrReq) {
        self.log.push((self.now, Record::AdrCommand { dev_addr, req: *req }));
    }
}

pub struct World {
    sched: Scheduler<Event>,
    pub medium: Medium,
    pub ns: NetworkServer,
    gateways: Vec<NodeId>,
    uplink_channels: Vec<u32>,
    devices: Vec<DeviceSlot>,
    attack: Option<Box<dyn Attack>>,
    attack_nodes: Vec<NodeId>,
    trace: Trace,
    log: Vec<(Micros, Record)>,
    rng: ChaCha8Rng,
    pings_each_period: bool,
}

impl World {
    /// `seed` drives channel jitter and device channel choice on separate streams.
    pub fn new(ns: NsConfig, uplink_channels: Vec<u32>, channel: ChannelModel, seed: u64, keep_trace: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        World {
            sched: Scheduler::new(),
            medium: Medium::new(channel, seed),
            ns: NetworkServer::new(ns),
            gateways: Vec::new(),
            uplink_channels,
            devices: Vec::new(),
            attack: None,
            attack_nodes: Vec::new(),
            trace: Trace::new(keep_trace),
            log: Vec::new(),
            rng,
            pings_each_period: false,
        }
    }

    pub fn add_gateway(&mut self, name: &str) -> Result<NodeId, SimError> {
        let id = self.medium.add_node(name, false);
        self.medium.listen_multi(id, 0, self.uplink_channels.clone())?;
        self.gateways.push(id);
        Ok(id)
    }

    /// Adds a device and provisions its session at the network server.
    pub fn add_device(&mut self, name: &str, ed: EndDevice) -> (usize, NodeId) {
        let node = self.medium.add_node(name, false);
        self.ns.register(ed.session.clone());
        self.devices.push(DeviceSlot {
            ed,
            node,
            period: 0,
            remaining: 0,
            txn: None,
            listening: Listening::Idle,
            candidates: Vec::new(),
        });
        (self.devices.len() - 1, node)
    }

    /// Adds an attacker radio; it also reports explicit headers.
    pub fn add_attack_node(&mut self, name: &str) -> NodeId {
        self.medium.add_node(name, true)
    }

    pub fn set_attack(&mut self, attack: Box<dyn Attack>) -> Result<(), SimError> {
        self.attack_nodes = attack.nodes();
        self.attack = Some(attack);
        self.sched.schedule_at(self.sched.now(), Event::AttackStart)
    }

    pub fn link(&mut self, a: NodeId, b: NodeId, attenuation_db: f64) {
        self.medium.channel.set_link(a, b, attenuation_db);
    }

    pub fn link_directed(&mut self, from: NodeId, to: NodeId, attenuation_db: f64) {
        self.medium.channel.set_directed(from, to, attenuation_db);
    }

    pub fn schedule_uplinks(&mut self, dev: usize, first: Micros, period: Micros, count: u32) -> Result<(), SimError> {
        let slot = &mut self.devices[dev];
        slot.period = period;
        slot.remaining = count;
        if count > 0 {
            self.sched.schedule_at(first, Event::Uplink(dev))?;
        }
        Ok(())
    }

    /// Gateways beacon on the 128 s grid from the next boundary on. With
    /// `pings`, the server queues one downlink per period for each Class B device.
    pub fn enable_beacons(&mut self, pings: bool) -> Result<(), SimError> {
        self.pings_each_period = pings;
        let k = self.sched.now().div_ceil(BEACON_PERIOD);
        self.sched.schedule_at(k * BEACON_PERIOD, Event::BeaconTick(k))
    }

    pub fn start_class_b(&mut self, dev: usize, at: Micros) -> Result<(), SimError> {
        self.sched.schedule_at(at, Event::ClassBStart(dev))
    }

    pub fn run_until(&mut self, t_end: Micros) -> Result<u64, SimError> {
        let mut sched = core::mem::take(&mut self.sched);
        let r = sched.run_until(t_end, |s, ev| self.handle(s, ev));
        self.sched = sched;
        r
    }

    pub fn now(&self) -> Micros {
        self.sched.now()
    }

    pub fn device(&self, dev: usize) -> &EndDevice {
        &self.devices[dev].ed
    }

    pub fn log(&self) -> &[(Micros, Record)] {
        &self.log
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    fn name(&self, node: NodeId) -> String {
        String::from(self.medium.node_name(node))
    }

    fn note(&mut self, now: Micros, r: Record) {
        self.log.push((now, r));
    }

    fn handle(&mut self, s: &mut Scheduler<Event>, ev: Event) -> Result<(), SimError> {
        let now = s.now();
        match ev {
            Event::AttackStart => {
                if let Some(a) = self.attack.as_mut() {
                    let actions = a.start(now);
                    self.apply(s, now, actions)?;
                }
            }
            Event::Uplink(dev) => self.uplink(s, now, dev)?,
            Event::Medium(m) => {
                for d in self.medium.on_event(m) {
                    self.deliver(s, now, d)?;
                }
            }
            Event::RxOpen { dev, fcnt, window } => self.rx_open(s, now, dev, fcnt, window)?,
            Event::RxClose { dev, fcnt, window } => self.rx_close(s, now, dev, fcnt, window)?,
            Event::GatewayTx(pd) => {
                let gw = self.gateways[pd.gateway];
                let tx = Transmission::frame(gw, pd.tx, now, pd.bytes, TxKind::Data)?;
                self.put_on_air(s, tx)?;
            }
            Event::AttackTx(tx) => self.put_on_air(s, *tx)?,
            Event::AttackTimer(token) => {
                if let Some(a) = self.attack.as_mut() {
                    let actions = a.on_timer(now, token);
                    self.apply(s, now, actions)?;
                }
            }
            Event::BeaconTick(k) => self.beacon_tick(s, now, k)?,
            Event::ClassBStart(dev) => {
                let slot = &mut self.devices[dev];
                slot.ed.class_b.start_acquisition();
                slot.candidates.clear();
                let node = slot.node;
                if slot.listening == Listening::Idle {
                    slot.listening = Listening::Beacon;
                    let f = self.ns.config.beacon_freq_hz;
                    self.medium.listen(node, now, f, 9, None)?;
                }
            }
            Event::BeaconOpen(dev) => self.beacon_open(s, now, dev)?,
            Event::BeaconClose(dev) => self.beacon_close(s, now, dev)?,
            Event::PingOpen { dev, slot } => self.ping_open(s, now, dev, slot)?,
            Event::PingClose { dev, slot } => {
                let d = &mut self.devices[dev];
                if d.listening != Listening::Ping(slot) {
                    return Ok(());
                }
                if let Some(e) = self.medium.receiving_until(d.node, now).filter(|&e| e > now) {
                    return s.schedule_at(e, Event::PingClose { dev, slot });
                }
                d.listening = Listening::Idle;
                self.medium.stop_listening(d.node);
            }
        }
        Ok(())
    }

    fn put_on_air(&mut self, s: &mut Scheduler<Event>, tx: Transmission) -> Result<(), SimError> {
        let now = s.now();
        let name = self.name(tx.source);
        let (kind, f, sf, len, dur, pw) = (tx.kind, tx.params.freq_hz, tx.params.sf, tx.payload.len(), tx.duration, tx.params.power_dbm);
        let (id, events) = self.medium.transmit(tx)?;
        self.trace.record(now, &name, "tx", format_args!("id={id} kind={kind:?} f={f} sf={sf} len={len} dur={dur} p={pw}"));
        for (t, e) in events {
            s.schedule_at(t, Event::Medium(e))?;
        }
        Ok(())
    }

    fn apply(&mut self, s: &mut Scheduler<Event>, now: Micros, actions: Vec<Action>) -> Result<(), SimError> {
        for a in actions {
            match a {
                Action::Transmit(tx) if tx.start <= now => self.put_on_air(s, Transmission { start: now, ..tx })?,
                Action::Transmit(tx) => s.schedule_at(tx.start, Event::AttackTx(Box::new(tx)))?,
                Action::Listen { node, freq_hz, sf } => {
                    self.medium.stop_listening(node);
                    self.medium.listen(node, now, freq_hz, sf, None)?;
                }
                Action::Timer { at, token } => s.schedule_at(at.max(now), Event::AttackTimer(token))?,
                Action::Note(n) => {
                    self.trace.record(now, "attacker", "note", format_args!("{n:?}"));
                    self.note(now, Record::Attack(n));
                }
            }
        }
        Ok(())
    }

    fn deliver(&mut self, s: &mut Scheduler<Event>, now: Micros, d: Delivery) -> Result<(), SimError> {
        let name = self.name(d.receiver);
        self.trace.record(
            now,
            &name,
            "rx",
            format_args!("id={} outcome={:?} snr={:.2}", d.tx.id, d.outcome, d.snr_db),
        );
        if let Some(g) = self.gateways.iter().position(|&n| n == d.receiver) {
            return self.gateway_rx(s, now, g, &d);
        }
        if let Some(dev) = self.devices.iter().position(|x| x.node == d.receiver) {
            return self.device_rx(s, now, dev, &d);
        }
        if self.attack_nodes.contains(&d.receiver) {
            if let Some(a) = self.attack.as_mut() {
                let actions = a.on_delivery(now, &d);
                self.apply(s, now, actions)?;
            }
        }
        Ok(())
    }

    fn gateway_rx(&mut self, s: &mut Scheduler<Event>, now: Micros, gateway: usize, d: &Delivery) -> Result<(), SimError> {
        if d.tx.kind != TxKind::Data || d.outcome == Outcome::Header {
            return Ok(());
        }
        let Some((Direction::Uplink, dev_addr, _)) = peek_header(&d.tx.payload) else { return Ok(()) };
        let from_attacker = self.attack_nodes.contains(&d.tx.source);
        let decoded = d.outcome == Outcome::Decoded;
        let dr = d.tx.params.data_rate().unwrap_or(DataRate::DR0);
        self.note(now, Record::GatewayHeard { gateway, dev_addr, dr, snr_db: d.snr_db, rssi_dbm: d.rssi_dbm, decoded, from_attacker });
        if !decoded {
            return Ok(());
        }
        let meta = UplinkMeta { tx: d.tx.params, snr_db: d.snr_db, rssi_dbm: d.rssi_dbm, time: now, gateway };
        let mut obs = NsLog { log: &mut self.log, now, from_attacker };
        match self.ns.ingest_uplink(&d.tx.payload, meta, &mut obs) {
            Ok(Ingest::Accepted(up)) => {
                if let Some(pd) = self.ns.plan_downlink(&up, true, &mut obs) {
                    s.schedule_at(pd.tx_time, Event::GatewayTx(Box::new(pd)))?;
                }
            }
            Ok(Ingest::Duplicate) => {}
            Err(reason) => self.note(now, Record::NsRejected { reason, from_attacker }),
        }
        Ok(())
    }

    fn device_rx(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize, d: &Delivery) -> Result<(), SimError> {
        if d.outcome != Outcome::Decoded {
            return Ok(());
        }
        let from_attacker = self.attack_nodes.contains(&d.tx.source);
        let slot = &mut self.devices[dev];
        match d.tx.kind {
            TxKind::Beacon => {
                if slot.listening != Listening::Beacon {
                    return Ok(());
                }
                let Ok(payload) = BeaconPayload::decode(d.tx.frame_bytes()) else { return Ok(()) };
                let beacon = ObservedBeacon { payload, start: d.tx.start, snr_db: d.snr_db };
                slot.candidates.push(Candidate { beacon, gw_info: payload.gw_info });
                if slot.ed.class_b.mode == ClassBMode::Acquiring {
                    self.close_beacon_window(s, now, dev, d.tx.start)?;
                }
            }
            TxKind::Data => {
                let Some((Direction::Downlink, addr, _)) = peek_header(&d.tx.payload) else { return Ok(()) };
                if addr != slot.ed.dev_addr() {
                    return Ok(());
                }
                let Ok(frame) = decode(&d.tx.payload, Direction::Downlink) else { return Ok(()) };
                let (window, result) = match slot.listening {
                    Listening::Rx(w) if slot.txn.is_some() => (w, slot.ed.receive_downlink(&frame, &d.tx.params)),
                    Listening::Ping(_) => (RxWindow::Ping, slot.ed.receive_ping(&frame, &d.tx.params, d.tx.start)),
                    _ => return Ok(()),
                };
                let rec = match result {
                    Ok(report) => {
                        if let Some(t) = slot.txn.as_mut().filter(|_| window != RxWindow::Ping) {
                            t.received = true;
                        }
                        Record::DownlinkAccepted { dev, window, fcnt: report.fcnt, from_attacker, link_adr: report.link_adr }
                    }
                    Err(reason) => Record::DownlinkRejected { dev, window, from_attacker, reason },
                };
                let name = self.name(d.receiver);
                self.trace.record(now, &name, "downlink", format_args!("{rec:?}"));
                self.note(now, rec);
            }
            TxKind::Jam => {}
        }
        Ok(())
    }

    fn uplink(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize) -> Result<(), SimError> {
        let slot = &mut self.devices[dev];
        if slot.remaining == 0 {
            return Ok(());
        }
        slot.remaining -= 1;
        if slot.remaining > 0 {
            s.schedule_at(now + slot.period, Event::Uplink(dev))?;
        }
        if slot.txn.is_some() {
            return Ok(());
        }
        slot.listening = Listening::Idle;
        let node = slot.node;
        let adr_ack_cnt = slot.ed.adr.adr_ack_cnt;
        let (frame, tx) = slot.ed.next_uplink(&mut self.rng);
        let bytes = frames::encode(&frame).expect("device frames fit");
        let t = Transmission::frame(node, tx, now, bytes, TxKind::Data)?;
        let end = t.end();
        slot.txn = Some(Txn { fcnt: frame.fcnt, end, tx, received: false, rx2_skipped: false });
        let dr = tx.data_rate().unwrap_or(DataRate::DR0);
        self.note(now, Record::UplinkSent { dev, fcnt: frame.fcnt, dr, freq_hz: tx.freq_hz, flags: frame.flags, adr_ack_cnt });
        self.medium.stop_listening(node);
        self.put_on_air(s, t)?;
        let rx = self.ns.config.rx;
        s.schedule_at(rx.rx1_open(end), Event::RxOpen { dev, fcnt: frame.fcnt, window: RxWindow::Rx1 })?;
        s.schedule_at(rx.rx2_open(end), Event::RxOpen { dev, fcnt: frame.fcnt, window: RxWindow::Rx2 })
    }

    fn rx_open(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize, fcnt: u32, window: RxWindow) -> Result<(), SimError> {
        let rx = self.ns.config.rx;
        let slot = &mut self.devices[dev];
        let Some(txn) = slot.txn.as_mut().filter(|t| t.fcnt == fcnt) else { return Ok(()) };
        if window == RxWindow::Rx2 && slot.listening == Listening::Rx(RxWindow::Rx1) {
            // Still demodulating a frame from rx1.
            txn.rx2_skipped = true;
            return Ok(());
        }
        let params = match window {
            RxWindow::Rx2 => TxParams::downlink(rx.rx2_dr, rx.rx2_freq_hz, 0),
            _ => TxParams { payload_crc: false, ..txn.tx },
        };
        let timeout = rx.rx_timeout_symbols as Micros * symbol_duration(&params);
        slot.listening = Listening::Rx(window);
        let node = slot.node;
        self.medium.stop_listening(node);
        self.medium.listen(node, now, params.freq_hz, params.sf, Some((now, timeout)))?;
        s.schedule_at(now + timeout, Event::RxClose { dev, fcnt, window })
    }

    fn rx_close(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize, fcnt: u32, window: RxWindow) -> Result<(), SimError> {
        let slot = &mut self.devices[dev];
        let Some(txn) = slot.txn.filter(|t| t.fcnt == fcnt) else { return Ok(()) };
        if slot.listening != Listening::Rx(window) {
            return Ok(());
        }
        if let Some(e) = self.medium.receiving_until(slot.node, now).filter(|&e| e > now) {
            return s.schedule_at(e, Event::RxClose { dev, fcnt, window });
        }
        slot.listening = Listening::Idle;
        self.medium.stop_listening(slot.node);
        let rx2_passed = now >= self.ns.config.rx.rx2_open(txn.end);
        if window == RxWindow::Rx2 || txn.received || txn.rx2_skipped || rx2_passed {
            slot.txn = None;
            let backoff = slot.ed.on_transaction_end(txn.received);
            let ed = &slot.ed;
            let r = Record::TransactionEnd {
                dev,
                fcnt,
                received: txn.received,
                backoff,
                dr: ed.adr.current_dr,
                tp_index: ed.adr.current_tp_index,
                adr_ack_cnt: ed.adr.adr_ack_cnt,
            };
            self.note(now, r);
        }
        Ok(())
    }

    fn beacon_tick(&mut self, s: &mut Scheduler<Event>, now: Micros, k: u64) -> Result<(), SimError> {
        let planned = self.ns.beacon_tick(now, self.gateways.len()).map_err(|_| SimError::Misaligned(now))?;
        for b in planned {
            let mut tx = Transmission::frame(self.gateways[b.gateway], b.tx, now, b.payload.encode().to_vec(), TxKind::Beacon)?;
            tx.coherence = Some(k);
            self.put_on_air(s, tx)?;
        }
        if self.pings_each_period && !self.gateways.is_empty() {
            let addrs: Vec<u32> = self.ns.devices.iter().filter(|(_, r)| r.class_b).map(|(a, _)| *a).collect();
            for addr in addrs {
                self.ns.queue_app_downlink(addr, alloc::vec![k as u8]);
                let mut obs = NsLog { log: &mut self.log, now, from_attacker: false };
                if let Some(pd) = self.ns.plan_ping(addr, now, 0, &mut obs) {
                    s.schedule_at(pd.tx_time, Event::GatewayTx(Box::new(pd)))?;
                }
            }
        }
        s.schedule_at(now + BEACON_PERIOD, Event::BeaconTick(k + 1))
    }

    fn beacon_open(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize) -> Result<(), SimError> {
        let f = self.ns.config.beacon_freq_hz;
        let slot = &mut self.devices[dev];
        let Some((lo, hi)) = slot.ed.class_b.beacon_window() else { return Ok(()) };
        slot.candidates.clear();
        if slot.listening == Listening::Idle && slot.txn.is_none() {
            slot.listening = Listening::Beacon;
            self.medium.listen(slot.node, now, f, 9, Some((lo.max(now), hi - lo.max(now))))?;
        }
        s.schedule_at(hi.max(now), Event::BeaconClose(dev))
    }

    fn beacon_close(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize) -> Result<(), SimError> {
        let slot = &self.devices[dev];
        if slot.listening == Listening::Beacon {
            if let Some(e) = self.medium.receiving_until(slot.node, now).filter(|&e| e > now) {
                return s.schedule_at(e, Event::BeaconClose(dev));
            }
        }
        let expected = slot.ed.class_b.expected_beacon_time.unwrap_or(now);
        self.close_beacon_window(s, now, dev, expected)
    }

    fn close_beacon_window(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize, expected: Micros) -> Result<(), SimError> {
        let slot = &mut self.devices[dev];
        if slot.listening == Listening::Beacon {
            slot.listening = Listening::Idle;
            self.medium.stop_listening(slot.node);
        }
        let best = slot
            .candidates
            .drain(..)
            .filter(|c| slot.ed.class_b.beacon_window().is_none_or(|(lo, hi)| (lo..=hi).contains(&c.beacon.start)))
            .max_by(|a, b| a.beacon.snr_db.total_cmp(&b.beacon.snr_db));
        let outcome = slot.ed.class_b.on_beacon_window(now, best.map(|c| c.beacon));
        let locked = outcome == BeaconOutcome::Locked;
        let r = Record::BeaconWindow {
            dev,
            expected,
            outcome,
            mode: slot.ed.class_b.mode,
            gw_info: best.filter(|_| locked).map(|c| c.gw_info),
            snr_db: best.filter(|_| locked).map(|c| c.beacon.snr_db),
        };
        let name = self.name(self.devices[dev].node);
        self.trace.record(now, &name, "beacon", format_args!("{r:?}"));
        self.note(now, r);
        let slot = &self.devices[dev];
        if !slot.ed.class_b.is_class_b() {
            return Ok(());
        }
        if let Some((lo, _)) = slot.ed.class_b.beacon_window() {
            s.schedule_at(lo.max(now), Event::BeaconOpen(dev))?;
        }
        let g = slot.ed.class_b.ping_guard_us();
        for p in slot.ed.class_b.ping_slots(slot.ed.dev_addr()) {
            if p >= now + g {
                s.schedule_at(p - g, Event::PingOpen { dev, slot: p })?;
            }
        }
        Ok(())
    }

    fn ping_open(&mut self, s: &mut Scheduler<Event>, now: Micros, dev: usize, slot_time: Micros) -> Result<(), SimError> {
        let (f, dr) = (self.ns.config.beacon_freq_hz, self.ns.config.ping_dr);
        let slot = &mut self.devices[dev];
        if slot.listening != Listening::Idle || slot.txn.is_some() || !slot.ed.class_b.is_class_b() {
            self.note(now, Record::PingSkipped { dev, slot: slot_time });
            return Ok(());
        }
        let g = slot.ed.class_b.ping_guard_us();
        slot.listening = Listening::Ping(slot_time);
        self.medium.listen(slot.node, now, f, dr.sf(), Some((now, 2 * g)))?;
        s.schedule_at(slot_time + g, Event::PingClose { dev, slot: slot_time })
    }
}
