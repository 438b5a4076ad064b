use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::scenario::{AdrSpoofSpec, AttackSpec, BeaconDriftSpec, Role, Scenario, ScenarioError};
use crate::attacker::{
    drift_periods, AdrSpoof, AdrSpoofConfig, AttackNote, AdrPhase, BeaconDrift, BeaconDriftConfig, Wormhole,
    WormholeConfig, WormholeVariant,
};
use crate::enddevice::{BeaconOutcome, DeviceConfig, EndDevice, BEACON_PERIOD};
use crate::frames::{DeviceSession, MicPolicy};
use crate::netserver::{NsConfig, RxWindow};
use crate::phy::DataRate;
use crate::simkit::{ChannelModel, NodeId, SimError};
use crate::world::{Record, World};
use crate::{ms, secs, Micros};

/// Address of the simulated device.
pub const DEV_ADDR: u32 = 0x2601_1f2a;
/// Bytes of a data frame with an FPort but no FOpts or payload.
pub const FRAME_OVERHEAD: usize = 13;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
}

/// Sample mean and standard deviation; `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, libm::sqrt(var)))
}

/// A world populated from a scenario topology, with the device registered.
pub struct Deployment {
    pub world: World,
    pub dev: usize,
    pub nodes: Vec<(String, Role, NodeId)>,
}

impl Deployment {
    pub fn node(&self, role: Role) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.1 == role).map(|n| n.2)
    }
}

/// Device settings that differ between experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSetup {
    pub initial_dr: DataRate,
    pub adr: bool,
    /// Restricts the channel plan the device draws from.
    pub channels: Option<Vec<u32>>,
    pub app_payload_bytes: usize,
}

impl DeviceSetup {
    pub fn from_scenario(sc: &Scenario) -> Self {
        DeviceSetup { initial_dr: sc.device.initial_dr, adr: true, channels: None, app_payload_bytes: sc.device.app_payload_bytes }
    }
}

pub fn ns_config(sc: &Scenario) -> NsConfig {
    let n = &sc.network;
    NsConfig {
        policy: n.mic_policy,
        margin_db: n.margin_db,
        resend_budget: n.resend_budget,
        rx: n.rx,
        gateway_power_dbm: n.gateway_power_dbm,
        n_channels: n.channels_hz.len(),
        beacon_freq_hz: n.beacon_freq_hz,
        ping_dr: n.ping_dr,
        class_b: n.class_b,
        app_port: 1,
    }
}

pub fn deploy(sc: &Scenario, seed: u64, setup: &DeviceSetup, keep_trace: bool) -> Result<Deployment, RunError> {
    sc.validate()?;
    let channel = ChannelModel::new(sc.channel.noise_floor_dbm, sc.channel.snr_jitter_sigma_db);
    let mut world = World::new(ns_config(sc), sc.network.channels_hz.clone(), channel, seed, keep_trace);
    let dc = DeviceConfig {
        channels: setup.channels.clone().unwrap_or_else(|| sc.network.channels_hz.clone()),
        initial_dr: setup.initial_dr,
        adr_ack_limit: sc.device.adr_ack_limit,
        adr_ack_delay: sc.device.adr_ack_delay,
        adr: setup.adr,
        app_port: 1,
        app_payload: vec![0xa5; setup.app_payload_bytes],
        policy: sc.network.mic_policy,
        class_b: sc.network.class_b,
    };
    let mut dev = 0;
    let mut nodes = Vec::new();
    for n in &sc.topology.nodes {
        let id = match n.role {
            Role::Device => {
                let ed = EndDevice::new(DeviceSession::abp(DEV_ADDR, seed), &dc);
                let (i, id) = world.add_device(&n.name, ed);
                dev = i;
                id
            }
            Role::Gateway => world.add_gateway(&n.name)?,
            Role::Entry | Role::Exit | Role::Spoofer => world.add_attack_node(&n.name),
        };
        nodes.push((n.name.clone(), n.role, id));
    }
    let id = |name: &str| nodes.iter().find(|n| n.0 == name).map(|n| n.2).expect("validated");
    for l in &sc.topology.links {
        if l.directed {
            world.link_directed(id(&l.a), id(&l.b), l.attenuation_db);
        } else {
            world.link(id(&l.a), id(&l.b), l.attenuation_db);
        }
    }
    Ok(Deployment { world, dev, nodes })
}

fn horizon(sc: &Scenario, natural: Micros) -> Micros {
    sc.t_end().map_or(natural, |t| t.min(natural))
}

// Baseline

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineJob {
    pub trial: u64,
    pub dr: DataRate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineRow {
    pub trial: u64,
    pub datarate: u8,
    pub sent: u32,
    pub received: u32,
    pub receive_rate: f64,
    pub rssi_mean: Option<f64>,
    pub rssi_std: Option<f64>,
    pub snr_mean: Option<f64>,
    pub snr_std: Option<f64>,
}

pub fn baseline_jobs(sc: &Scenario) -> Result<Vec<BaselineJob>, ScenarioError> {
    sc.expect_attack("none")?;
    let AttackSpec::None(b) = &sc.attack else { unreachable!() };
    let mut jobs = Vec::new();
    for _ in 0..sc.trials {
        for &dr in &b.data_rates {
            jobs.push(BaselineJob { trial: jobs.len() as u64, dr });
        }
    }
    Ok(jobs)
}

pub fn run_baseline_trial(sc: &Scenario, job: &BaselineJob) -> Result<BaselineRow, RunError> {
    sc.expect_attack("none")?;
    let AttackSpec::None(b) = &sc.attack else { unreachable!() };
    let setup = DeviceSetup { initial_dr: job.dr, adr: false, ..DeviceSetup::from_scenario(sc) };
    let mut d = deploy(sc, sc.trial_seed(job.trial), &setup, false)?;
    let period = sc.uplink_period();
    d.world.schedule_uplinks(d.dev, 0, period, b.uplinks_per_dr)?;
    d.world.run_until(horizon(sc, b.uplinks_per_dr as Micros * period + secs(10)))?;
    let (mut sent, mut received) = (0, 0);
    let (mut rssi, mut snr) = (Vec::new(), Vec::new());
    for (_, r) in d.world.log() {
        match r {
            Record::UplinkSent { .. } => sent += 1,
            Record::NsAccepted { from_attacker: false, .. } => received += 1,
            Record::GatewayHeard { gateway: 0, decoded: true, from_attacker: false, snr_db, rssi_dbm, .. } => {
                snr.push(*snr_db);
                rssi.push(*rssi_dbm);
            }
            _ => {}
        }
    }
    let rs = mean_std(&rssi);
    let ss = mean_std(&snr);
    Ok(BaselineRow {
        trial: job.trial,
        datarate: job.dr.index(),
        sent,
        received,
        receive_rate: if sent == 0 { 0.0 } else { received as f64 / sent as f64 },
        rssi_mean: rs.map(|x| x.0),
        rssi_std: rs.map(|x| x.1),
        snr_mean: ss.map(|x| x.0),
        snr_std: ss.map(|x| x.1),
    })
}

// ADR spoofing

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdrJob {
    pub trial: u64,
    pub wormhole: WormholeVariant,
    pub dr: DataRate,
    pub preceding_uplinks: u32,
}

/// Which frame carried the LinkADRReq that moved the device to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Trigger {
    WormholeFrame,
    OtherFrame,
    Failed,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trigger::WormholeFrame => "wormhole_frame",
            Trigger::OtherFrame => "other_frame",
            Trigger::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdrSpoofRow {
    pub trial: u64,
    pub wormhole: WormholeVariant,
    pub datarate: u8,
    pub preceding_uplinks: u32,
    pub trigger: Trigger,
    /// Transactions from the attack start until the device first runs at
    /// the target data rate.
    pub transactions_to_target: Option<u32>,
    /// Uplinks at the target data rate once the retention phase started.
    pub retention_uplinks: u32,
    /// Of those, accepted by the network.
    pub retention_received: u32,
    pub retention_uplink_success_rate: Option<f64>,
    /// The device stayed at the target data rate until the horizon.
    pub retained: bool,
    pub final_datarate: u8,
    pub replays_rejected: u32,
}

pub fn adr_spec(sc: &Scenario) -> Result<&AdrSpoofSpec, ScenarioError> {
    sc.expect_attack("adr_spoofing")?;
    let AttackSpec::AdrSpoofing(a) = &sc.attack else { unreachable!() };
    Ok(a)
}

pub fn adr_jobs(sc: &Scenario) -> Result<Vec<AdrJob>, ScenarioError> {
    let a = adr_spec(sc)?;
    let mut jobs = Vec::new();
    for cell in &a.cells {
        for &n in &a.preceding_uplinks {
            for _ in 0..sc.trials {
                let trial = jobs.len() as u64;
                jobs.push(AdrJob { trial, wormhole: cell.wormhole, dr: cell.dr, preceding_uplinks: n });
            }
        }
    }
    Ok(jobs)
}

pub fn attack_start(sc: &Scenario, preceding_uplinks: u32) -> Micros {
    let period = sc.uplink_period();
    (preceding_uplinks as Micros * period).saturating_sub(period / 2)
}

pub fn run_adr_trial(sc: &Scenario, job: &AdrJob) -> Result<AdrSpoofRow, RunError> {
    simulate_adr(sc, job, false).map(|(row, _)| row)
}

/// Runs one ADR spoofing trial and also returns the finished world.
pub fn simulate_adr(sc: &Scenario, job: &AdrJob, keep_trace: bool) -> Result<(AdrSpoofRow, World), RunError> {
    let a = adr_spec(sc)?;
    let setup = DeviceSetup { initial_dr: job.dr, ..DeviceSetup::from_scenario(sc) };
    let mut d = deploy(sc, sc.trial_seed(job.trial), &setup, keep_trace)?;
    let period = sc.uplink_period();
    let start = attack_start(sc, job.preceding_uplinks);
    let wormhole = WormholeConfig {
        variant: job.wormhole,
        entry: d.node(Role::Entry).expect("validated"),
        exit: d.node(Role::Exit).expect("validated"),
        target_dev_addr: DEV_ADDR,
        sniff_freq_hz: sc.network.channels_hz[a.sniff_channel],
        sniff_dr: job.dr,
        t_proc1: ms(a.t_proc1_ms),
        t_proc2: ms(a.t_proc2_ms),
        jam_enabled: a.jam,
        exit_power_dbm: a.exit_power_dbm,
        entry_power_dbm: a.entry_power_dbm,
        rx: sc.network.rx,
        fopts_cleartext: a.fopts_cleartext,
    };
    let cfg = AdrSpoofConfig {
        wormhole,
        target_dr: a.target_dr,
        n_channels: sc.network.channels_hz.len() as u32,
        uplink_period: period,
        miss_probability: a.miss_probability,
        attack_start: start,
    };
    d.world.set_attack(Box::new(AdrSpoof::new(cfg)))?;
    let total = job.preceding_uplinks + a.horizon_transactions;
    d.world.schedule_uplinks(d.dev, 0, period, total)?;
    d.world.run_until(horizon(sc, total as Micros * period + secs(10)))?;
    let row = adr_metrics(job, a, start, d.world.log(), d.world.device(d.dev).adr.current_dr);
    Ok((row, d.world))
}

fn adr_metrics(job: &AdrJob, a: &AdrSpoofSpec, start: Micros, log: &[(Micros, Record)], final_dr: DataRate) -> AdrSpoofRow {
    let target = a.target_dr;
    let mut txns = 0u32;
    let mut trigger = None;
    let mut to_target = None;
    let mut retained = true;
    let mut retention_at = None;
    let mut retention_fcnts = Vec::new();
    let (mut r_sent, mut r_recv, mut rejected) = (0, 0, 0);
    for (t, r) in log {
        match r {
            Record::Attack(AttackNote::PhaseChanged(AdrPhase::Retention)) => retention_at = Some(*t),
            Record::UplinkSent { dr, fcnt, .. } if retention_at.is_some() && *dr == target => {
                r_sent += 1;
                retention_fcnts.push(*fcnt);
            }
            Record::NsAccepted { fcnt, .. } if retention_fcnts.contains(fcnt) => r_recv += 1,
            Record::DownlinkRejected { from_attacker: true, .. } => rejected += 1,
            Record::DownlinkAccepted { from_attacker, link_adr, .. }
                if *t >= start && trigger.is_none() && link_adr.iter().any(|(req, _)| req.dr == target.index()) =>
            {
                trigger = Some(if txns < a.trial_budget {
                    if *from_attacker { Trigger::WormholeFrame } else { Trigger::OtherFrame }
                } else {
                    Trigger::Failed
                });
            }
            Record::TransactionEnd { dr, .. } if *t >= start => {
                txns += 1;
                if to_target.is_none() && *dr == target {
                    to_target = Some(txns);
                } else if to_target.is_some() && *dr != target {
                    retained = false;
                }
            }
            _ => {}
        }
    }
    AdrSpoofRow {
        trial: job.trial,
        wormhole: job.wormhole,
        datarate: job.dr.index(),
        preceding_uplinks: job.preceding_uplinks,
        trigger: trigger.unwrap_or(Trigger::Failed),
        transactions_to_target: to_target,
        retention_uplinks: r_sent,
        retention_received: r_recv,
        retention_uplink_success_rate: (r_sent > 0).then(|| r_recv as f64 / r_sent as f64),
        retained: retained && to_target.is_some() && final_dr == target,
        final_datarate: final_dr.index(),
        replays_rejected: rejected,
    }
}

/// Outcome of a single rx2-wormhole replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rx2Probe {
    /// The device accepted the replayed downlink in rx2.
    pub delivered: bool,
    /// The attacker held the downlink too late for rx2.
    pub late: bool,
    pub rejected: bool,
}

/// Sends one uplink of `uplink_len` bytes through an rx2 wormhole and lets
/// the network answer with a `downlink_len`-byte frame.
pub fn rx2_probe(
    dr: DataRate,
    uplink_len: usize,
    downlink_len: usize,
    policy: MicPolicy,
    t_proc1: Micros,
    t_proc2: Micros,
) -> Result<Rx2Probe, RunError> {
    let mut sc = Scenario::default_adr_spoofing();
    sc.network.mic_policy = policy;
    let channel = sc.network.channels_hz[0];
    let setup = DeviceSetup {
        initial_dr: dr,
        adr: false,
        channels: Some(vec![channel]),
        app_payload_bytes: uplink_len.saturating_sub(FRAME_OVERHEAD),
    };
    let mut d = deploy(&sc, sc.seed, &setup, false)?;
    let cfg = WormholeConfig {
        variant: WormholeVariant::Rx2,
        entry: d.node(Role::Entry).expect("default topology"),
        exit: d.node(Role::Exit).expect("default topology"),
        target_dev_addr: DEV_ADDR,
        sniff_freq_hz: channel,
        sniff_dr: dr,
        t_proc1,
        t_proc2,
        jam_enabled: true,
        exit_power_dbm: 14,
        entry_power_dbm: 14,
        rx: sc.network.rx,
        fopts_cleartext: false,
    };
    d.world.set_attack(Box::new(Wormhole::new(cfg)))?;
    d.world.ns.queue_app_downlink(DEV_ADDR, vec![0x5a; downlink_len.saturating_sub(FRAME_OVERHEAD)]);
    d.world.schedule_uplinks(d.dev, 0, secs(20), 1)?;
    d.world.run_until(secs(15))?;
    let mut p = Rx2Probe { delivered: false, late: false, rejected: false };
    for (_, r) in d.world.log() {
        match r {
            Record::DownlinkAccepted { window: RxWindow::Rx2, from_attacker: true, .. } => p.delivered = true,
            Record::DownlinkRejected { from_attacker: true, .. } => p.rejected = true,
            Record::Attack(AttackNote::DownlinkLate { .. }) => p.late = true,
            _ => {}
        }
    }
    Ok(p)
}

// Beacon drifting

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconJob {
    pub trial: u64,
    pub step_size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BeaconStatus {
    Valid,
    Spoofed,
    Lost,
}

impl fmt::Display for BeaconStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BeaconStatus::Valid => "valid",
            BeaconStatus::Spoofed => "spoofed",
            BeaconStatus::Lost => "lost",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeaconRow {
    pub trial: u64,
    pub step_size: u32,
    /// Attack period; -1 is the period before the first spoofed beacon.
    pub period: i64,
    pub downlink_received: bool,
    pub beacon_status: BeaconStatus,
    pub beacon_snr: Option<f64>,
}

pub fn beacon_spec(sc: &Scenario) -> Result<&BeaconDriftSpec, ScenarioError> {
    sc.expect_attack("beacon_drift")?;
    let AttackSpec::BeaconDrift(b) = &sc.attack else { unreachable!() };
    Ok(b)
}

pub fn beacon_jobs(sc: &Scenario) -> Result<Vec<BeaconJob>, ScenarioError> {
    let b = beacon_spec(sc)?;
    let mut jobs = Vec::new();
    for &step_size in &b.step_sizes {
        for _ in 0..sc.trials {
            jobs.push(BeaconJob { trial: jobs.len() as u64, step_size });
        }
    }
    Ok(jobs)
}

/// Periods with the shift still growing.
pub fn drifting_periods(sc: &Scenario, step: u32) -> u32 {
    let b = beacon_spec(sc).map(|b| b.total_shift_us).unwrap_or(crate::attacker::TOTAL_DRIFT_US);
    drift_periods(step, sc.network.class_b.beacon_symbol_us, b)
}

pub fn run_beacon_trial(sc: &Scenario, job: &BeaconJob) -> Result<Vec<BeaconRow>, RunError> {
    simulate_beacon(sc, job, false).map(|(rows, _)| rows)
}

pub fn simulate_beacon(sc: &Scenario, job: &BeaconJob, keep_trace: bool) -> Result<(Vec<BeaconRow>, World), RunError> {
    let b = beacon_spec(sc)?;
    let setup = DeviceSetup { adr: false, ..DeviceSetup::from_scenario(sc) };
    let seed = sc.trial_seed(job.trial);
    let mut d = deploy(sc, seed, &setup, keep_trace)?;
    let symbol = sc.network.class_b.beacon_symbol_us;
    let cfg = BeaconDriftConfig {
        node: d.node(Role::Spoofer).expect("validated"),
        step_symbols: job.step_size,
        symbol_us: symbol,
        total_shift_us: b.total_shift_us,
        jam_payload_bytes: b.jam_payload_bytes,
        power_dbm: b.spoofer_power_dbm,
        beacon_freq_hz: sc.network.beacon_freq_hz,
        start_after_periods: b.attack_start_period,
        gw_info: *b"SPOOF\0\0",
        seed: seed ^ 0x5eed_5eed,
    };
    d.world.start_class_b(d.dev, 0)?;
    d.world.set_attack(Box::new(BeaconDrift::new(cfg)))?;
    d.world.enable_beacons(true)?;
    // One Class B uplink tells the server where to send pings.
    d.world.schedule_uplinks(d.dev, secs(10), secs(60), 1)?;
    let a = b.attack_start_period as i64;
    let last = drift_periods(job.step_size, symbol, b.total_shift_us) as i64 + b.hold_periods as i64 - 1;
    d.world.run_until(horizon(sc, (a + last + 1) as Micros * BEACON_PERIOD + secs(3)))?;
    let first = if a > 0 { -1 } else { 0 };
    let mut rows: Vec<BeaconRow> = (first..=last)
        .map(|p| BeaconRow {
            trial: job.trial,
            step_size: job.step_size,
            period: p,
            downlink_received: false,
            beacon_status: BeaconStatus::Lost,
            beacon_snr: None,
        })
        .collect();
    let row = |k: i64| usize::try_from(k - a - first).ok();
    for (t, r) in d.world.log() {
        match r {
            Record::DownlinkAccepted { window: RxWindow::Ping, .. } => {
                if let Some(x) = row((*t / BEACON_PERIOD) as i64).and_then(|i| rows.get_mut(i)) {
                    x.downlink_received = true;
                }
            }
            Record::BeaconWindow { expected, outcome, gw_info, snr_db, .. } => {
                let k = ((*expected + BEACON_PERIOD / 2) / BEACON_PERIOD) as i64;
                if let Some(x) = row(k).and_then(|i| rows.get_mut(i)) {
                    x.beacon_status = match (outcome, gw_info) {
                        (BeaconOutcome::Locked, Some(g)) if g.starts_with(b"GW") => BeaconStatus::Valid,
                        (BeaconOutcome::Locked, _) => BeaconStatus::Spoofed,
                        _ => BeaconStatus::Lost,
                    };
                    x.beacon_snr = *snr_db;
                }
            }
            _ => {}
        }
    }
    Ok((rows, d.world))
}
