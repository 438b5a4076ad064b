//! End-device state machine: Class A transactions, ADR request and backoff,
//! Class B beacon tracking and ping slots.

mod adr;
mod classb;

pub use adr::{tx_power_dbm, AdrState, BackoffStep, TP_MAX_INDEX};
pub use classb::{
    ping_slot_offsets, BeaconOutcome, ClassBConfig, ClassBMode, ClassBState, ObservedBeacon, BEACON_PERIOD,
};

use alloc::vec::Vec;

use rand::Rng;

use crate::frames::{
    self, conceal, reveal, DeviceSession, Direction, Frame, LinkAdrAns, LinkAdrReq, MacCommand, MicPolicy,
    Rejection,
};
use crate::phy::{DataRate, TxParams};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub channels: Vec<u32>,
    pub initial_dr: DataRate,
    pub adr_ack_limit: u32,
    pub adr_ack_delay: u32,
    /// Sets the ADR flag in uplinks.
    pub adr: bool,
    pub app_port: u8,
    pub app_payload: Vec<u8>,
    pub policy: MicPolicy,
    pub class_b: ClassBConfig,
}

/// Result of an accepted downlink.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DownlinkReport {
    pub fcnt: u32,
    /// LinkADRReqs processed from this downlink with the answers they produced.
    pub link_adr: Vec<(LinkAdrReq, LinkAdrAns)>,
    pub app_payload: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndDevice {
    pub session: DeviceSession,
    pub policy: MicPolicy,
    pub adr: AdrState,
    pub adr_enabled: bool,
    pub channels: Vec<u32>,
    pub ch_mask: u16,
    pub class_b: ClassBState,
    pub app_port: u8,
    pub app_payload: Vec<u8>,
    pending_ans: Option<LinkAdrAns>,
    last_uplink_fcnt: Option<u32>,
}

impl EndDevice {
    pub fn new(session: DeviceSession, config: &DeviceConfig) -> Self {
        let n = config.channels.len().min(16);
        EndDevice {
            session,
            policy: config.policy,
            adr: AdrState::new(config.initial_dr, config.adr_ack_limit, config.adr_ack_delay),
            adr_enabled: config.adr,
            ch_mask: if n == 16 { u16::MAX } else { (1u16 << n) - 1 },
            channels: config.channels.clone(),
            class_b: ClassBState::new(config.class_b),
            app_port: config.app_port,
            app_payload: config.app_payload.clone(),
            pending_ans: None,
            last_uplink_fcnt: None,
        }
    }

    pub fn dev_addr(&self) -> u32 {
        self.session.dev_addr
    }

    pub fn enabled_channels(&self) -> Vec<u32> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(i, _)| self.ch_mask & (1 << i) != 0)
            .map(|(_, &f)| f)
            .collect()
    }

    /// Builds the next uplink: channel drawn uniformly from the enabled set,
    /// data rate and power from the ADR state, pending answers piggy-backed.
    pub fn next_uplink<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (Frame, TxParams) {
        let enabled = self.enabled_channels();
        let freq = enabled[rng.random_range(0..enabled.len())];
        let tx = TxParams::uplink(self.adr.current_dr, freq, tx_power_dbm(self.adr.current_tp_index));
        let fcnt = self.session.take_fcnt(Direction::Uplink);
        let mut frame = Frame::new(Direction::Uplink, self.session.dev_addr, fcnt);
        frame.flags.adr = self.adr_enabled;
        frame.flags.adr_ack_req = self.adr_enabled && self.adr.ack_req();
        frame.flags.class_b = self.class_b.is_class_b();
        if let Some(ans) = self.pending_ans.take() {
            frame = frame.with_mac_commands(&[MacCommand::LinkAdrAns(ans)]).expect("2 bytes fit");
        }
        frame = frame.with_payload(self.app_port, &self.app_payload);
        let mut frame = conceal(&frame, &self.session, self.policy);
        frame.mic = frames::compute_mic(&self.session, &frame, &tx, self.policy, None).expect("own session");
        self.last_uplink_fcnt = Some(fcnt);
        (frame, tx)
    }

    /// Runs the ADR backoff counter; devices with ADR off keep their settings.
    pub fn on_transaction_end(&mut self, received_downlink: bool) -> Option<BackoffStep> {
        if !self.adr_enabled {
            return None;
        }
        self.adr.on_transaction_end(received_downlink)
    }

    /// Applies a LinkADRReq and queues its answer for the next uplink. A
    /// request is answered once: only the latest answer is kept.
    pub fn process_link_adr_req(&mut self, req: &LinkAdrReq) -> LinkAdrAns {
        let n = self.channels.len();
        let ans = self.adr.apply_link_adr_req(req, n, &mut self.ch_mask);
        self.pending_ans = Some(ans);
        ans
    }

    pub fn pending_answer(&self) -> Option<LinkAdrAns> {
        self.pending_ans
    }

    fn accept_downlink(&mut self, frame: &Frame, tx: &TxParams, conf_fcnt: Option<u16>) -> Result<DownlinkReport, Rejection> {
        if frame.direction != Direction::Downlink || frame.dev_addr != self.session.dev_addr {
            return Err(Rejection::BadMic);
        }
        let mut full = frame.clone();
        full.fcnt = self.session.reconstruct_fcnt(Direction::Downlink, frame.fcnt);
        frames::verify(&full, &self.session, tx, self.policy, conf_fcnt)?;
        self.session.accept(Direction::Downlink, full.fcnt);
        self.adr.adr_ack_cnt = 0;
        let plain = reveal(&full, &self.session, self.policy);
        let mut report = DownlinkReport { fcnt: full.fcnt, ..Default::default() };
        for cmd in plain.mac_commands().unwrap_or_default() {
            if let MacCommand::LinkAdrReq(req) = cmd {
                let ans = self.process_link_adr_req(&req);
                report.link_adr.push((req, ans));
            }
        }
        if plain.fport.is_some_and(|p| p != 0) {
            report.app_payload = Some(plain.frm_payload);
        }
        Ok(report)
    }

    /// Class A reception in rx1 or rx2 of the last uplink.
    pub fn receive_downlink(&mut self, frame: &Frame, tx: &TxParams) -> Result<DownlinkReport, Rejection> {
        let conf = self.last_uplink_fcnt.map(|f| f as u16);
        self.accept_downlink(frame, tx, conf)
    }

    /// Class B ping reception: the frame must start inside the guard around
    /// one of this period's slots and verify.
    pub fn receive_ping(&mut self, frame: &Frame, tx: &TxParams, start: crate::Micros) -> Result<DownlinkReport, Rejection> {
        if !self.class_b.accepts_ping_start(start, self.session.dev_addr) {
            return Err(Rejection::BadMic);
        }
        self.accept_downlink(frame, tx, None)
    }
}
