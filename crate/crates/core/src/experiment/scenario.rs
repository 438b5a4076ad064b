use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::attacker::{WormholeVariant, TOTAL_DRIFT_US};
use crate::enddevice::ClassBConfig;
use crate::frames::MicPolicy;
use crate::netserver::{PlanError, RxWindowPlan};
use crate::phy::DataRate;
use crate::Micros;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("duplicate node name {0:?}")]
    DuplicateNode(String),
    #[error("link refers to unknown node {0:?}")]
    UnknownNode(String),
    #[error("topology needs exactly {expected} node(s) with role {role:?}, found {found}")]
    RoleCount { role: Role, expected: &'static str, found: usize },
    #[error("invalid receive-window plan: {0}")]
    RxPlan(#[from] PlanError),
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: &'static str },
    #[error("scenario attack type is {found}, this run needs {expected}")]
    AttackMismatch { expected: &'static str, found: &'static str },
}

fn invalid(field: &'static str, reason: &'static str) -> ScenarioError {
    ScenarioError::Invalid { field, reason }
}

/// Converts seconds to whole microseconds.
pub fn micros_from_secs(s: f64) -> Micros {
    libm::round(s * 1e6) as Micros
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Trial `i` runs with seed `seed + i`.
    pub seed: u64,
    /// Trials per parameter cell.
    #[cfg_attr(feature = "serde", serde(default = "default_trials"))]
    pub trials: u32,
    /// Optional cap on the virtual duration of each trial.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub t_end_s: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub channel: ChannelSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub network: NetworkSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub device: DeviceSpec,
    pub topology: Topology,
    pub attack: AttackSpec,
}

#[cfg(feature = "serde")]
fn default_trials() -> u32 {
    20
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChannelSpec {
    pub noise_floor_dbm: f64,
    pub snr_jitter_sigma_db: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec { noise_floor_dbm: -117.0, snr_jitter_sigma_db: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NetworkSpec {
    pub channels_hz: Vec<u32>,
    pub mic_policy: MicPolicy,
    pub margin_db: f64,
    pub resend_budget: u32,
    pub rx: RxWindowPlan,
    pub gateway_power_dbm: i8,
    pub beacon_freq_hz: u32,
    pub ping_dr: DataRate,
    pub class_b: ClassBConfig,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            channels_hz: vec![868_100_000, 868_300_000, 868_500_000],
            mic_policy: MicPolicy::V11,
            margin_db: 10.0,
            resend_budget: 8,
            rx: RxWindowPlan::default(),
            gateway_power_dbm: 16,
            beacon_freq_hz: 869_525_000,
            ping_dr: DataRate::DR0,
            class_b: ClassBConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DeviceSpec {
    pub initial_dr: DataRate,
    pub uplink_period_s: f64,
    pub adr_ack_limit: u32,
    pub adr_ack_delay: u32,
    pub app_payload_bytes: usize,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec { initial_dr: DataRate::DR0, uplink_period_s: 12.0, adr_ack_limit: 32, adr_ack_delay: 32, app_payload_bytes: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    Device,
    Gateway,
    /// Wormhole end next to the device.
    Entry,
    /// Wormhole end next to the gateways.
    Exit,
    Spoofer,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NodeSpec {
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    /// Path loss in dB; `inf` removes the link.
    pub attenuation_db: f64,
    /// Only `a → b` when set.
    #[cfg_attr(feature = "serde", serde(default))]
    pub directed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub links: Vec<LinkSpec>,
}

impl Topology {
    pub fn node(mut self, name: &str, role: Role) -> Self {
        self.nodes.push(NodeSpec { name: name.to_string(), role });
        self
    }

    pub fn link(mut self, a: &str, b: &str, attenuation_db: f64) -> Self {
        self.links.push(LinkSpec { a: a.to_string(), b: b.to_string(), attenuation_db, directed: false });
        self
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(move |n| n.role == role)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum AttackSpec {
    None(BaselineSpec),
    AdrSpoofing(AdrSpoofSpec),
    BeaconDrift(BeaconDriftSpec),
}

impl AttackSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AttackSpec::None(_) => "none",
            AttackSpec::AdrSpoofing(_) => "adr_spoofing",
            AttackSpec::BeaconDrift(_) => "beacon_drift",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BaselineSpec {
    pub data_rates: Vec<DataRate>,
    pub uplinks_per_dr: u32,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        BaselineSpec { data_rates: DataRate::all().collect(), uplinks_per_dr: 300 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AdrCell {
    pub wormhole: WormholeVariant,
    pub dr: DataRate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdrSpoofSpec {
    pub cells: Vec<AdrCell>,
    pub preceding_uplinks: Vec<u32>,
    /// Index into the channel plan.
    pub sniff_channel: usize,
    pub target_dr: DataRate,
    pub t_proc1_ms: u64,
    pub t_proc2_ms: u64,
    pub exit_power_dbm: i8,
    pub entry_power_dbm: i8,
    pub jam: bool,
    pub fopts_cleartext: bool,
    /// Transactions after the attack start within which the target DR
    /// command must arrive.
    pub trial_budget: u32,
    /// Transactions simulated after the attack start.
    pub horizon_transactions: u32,
    pub miss_probability: f64,
}

impl Default for AdrSpoofSpec {
    fn default() -> Self {
        AdrSpoofSpec {
            cells: vec![
                AdrCell { wormhole: WormholeVariant::Rx2, dr: DataRate::DR2 },
                AdrCell { wormhole: WormholeVariant::Rx2, dr: DataRate::DR3 },
                AdrCell { wormhole: WormholeVariant::DownlinkDelayed, dr: DataRate::DR0 },
            ],
            preceding_uplinks: vec![1, 10, 20],
            sniff_channel: 0,
            target_dr: DataRate::DR5,
            t_proc1_ms: 150,
            t_proc2_ms: 50,
            exit_power_dbm: 14,
            entry_power_dbm: 14,
            jam: true,
            fopts_cleartext: false,
            trial_budget: 60,
            horizon_transactions: 300,
            miss_probability: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BeaconDriftSpec {
    /// Shift per period, in beacon symbols.
    pub step_sizes: Vec<u32>,
    pub total_shift_us: Micros,
    pub jam_payload_bytes: usize,
    pub spoofer_power_dbm: i8,
    /// Beacon period index of the first spoofed beacon.
    pub attack_start_period: u64,
    /// Periods observed after the full shift is reached.
    pub hold_periods: u32,
}

impl Default for BeaconDriftSpec {
    fn default() -> Self {
        BeaconDriftSpec {
            step_sizes: vec![1, 2, 3, 4, 6, 8],
            total_shift_us: TOTAL_DRIFT_US,
            jam_payload_bytes: 36,
            spoofer_power_dbm: 14,
            attack_start_period: 3,
            hold_periods: 3,
        }
    }
}

impl Scenario {
    /// 300 uplinks per data rate over the tuned device–gateway link.
    pub fn default_baseline() -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: "baseline".into(),
            seed: 1,
            trials: 1,
            t_end_s: None,
            channel: ChannelSpec::default(),
            network: NetworkSpec::default(),
            device: DeviceSpec::default(),
            topology: Topology::default().node("ed", Role::Device).node("gw", Role::Gateway).link("ed", "gw", 143.6),
            attack: AttackSpec::None(BaselineSpec::default()),
        }
    }

    pub fn default_adr_spoofing() -> Self {
        Scenario {
            name: "adr_spoofing".into(),
            seed: 1000,
            trials: 20,
            topology: Topology::default()
                .node("ed", Role::Device)
                .node("gw", Role::Gateway)
                .node("entry", Role::Entry)
                .node("exit", Role::Exit)
                .link("ed", "gw", 143.6)
                .link("ed", "entry", 100.0)
                .link("exit", "gw", 123.0)
                .link("exit", "ed", 143.6),
            attack: AttackSpec::AdrSpoofing(AdrSpoofSpec::default()),
            ..Self::default_baseline()
        }
    }

    pub fn default_beacon_drift() -> Self {
        Scenario {
            name: "beacon_drift".into(),
            seed: 2000,
            trials: 20,
            topology: Topology::default()
                .node("ed", Role::Device)
                .node("gw", Role::Gateway)
                .node("spoofer", Role::Spoofer)
                .link("gw", "ed", 139.0)
                .link("spoofer", "ed", 122.0)
                .link("gw", "spoofer", 110.0),
            attack: AttackSpec::BeaconDrift(BeaconDriftSpec::default()),
            ..Self::default_baseline()
        }
    }

    pub fn trial_seed(&self, index: u64) -> u64 {
        self.seed.wrapping_add(index)
    }

    pub fn uplink_period(&self) -> Micros {
        micros_from_secs(self.device.uplink_period_s)
    }

    pub fn t_end(&self) -> Option<Micros> {
        self.t_end_s.map(micros_from_secs)
    }

    pub fn expect_attack(&self, expected: &'static str) -> Result<(), ScenarioError> {
        let found = self.attack.kind();
        if found == expected {
            Ok(())
        } else {
            Err(ScenarioError::AttackMismatch { expected, found })
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(self.schema_version));
        }
        if self.trials == 0 {
            return Err(ScenarioError::NoTrials);
        }
        if self.t_end_s.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(invalid("t_end_s", "must be positive"));
        }
        if !self.channel.noise_floor_dbm.is_finite() {
            return Err(invalid("channel.noise_floor_dbm", "must be finite"));
        }
        if !(self.channel.snr_jitter_sigma_db >= 0.0 && self.channel.snr_jitter_sigma_db.is_finite()) {
            return Err(invalid("channel.snr_jitter_sigma_db", "must be finite and non-negative"));
        }
        let net = &self.network;
        if net.channels_hz.is_empty() || net.channels_hz.len() > 16 || net.channels_hz.contains(&0) {
            return Err(invalid("network.channels_hz", "needs 1 to 16 non-zero frequencies"));
        }
        net.rx.validate()?;
        let nb = net.class_b.ping_nb;
        if !(nb.is_power_of_two() && nb <= 128) {
            return Err(invalid("network.class_b.ping_nb", "must be a power of two up to 128"));
        }
        if !(net.margin_db.is_finite()) {
            return Err(invalid("network.margin_db", "must be finite"));
        }
        if net.resend_budget == 0 {
            return Err(invalid("network.resend_budget", "must be at least 1"));
        }
        let dev = &self.device;
        if !(dev.uplink_period_s > 0.0 && dev.uplink_period_s.is_finite()) {
            return Err(invalid("device.uplink_period_s", "must be positive"));
        }
        if dev.adr_ack_limit == 0 || dev.adr_ack_delay == 0 {
            return Err(invalid("device.adr_ack_limit", "limit and delay must be at least 1"));
        }
        if dev.app_payload_bytes > 200 {
            return Err(invalid("device.app_payload_bytes", "at most 200"));
        }
        self.validate_topology()?;
        match &self.attack {
            AttackSpec::None(b) => {
                if b.data_rates.is_empty() || b.uplinks_per_dr == 0 {
                    return Err(invalid("attack", "baseline needs data rates and uplinks"));
                }
            }
            AttackSpec::AdrSpoofing(a) => {
                if a.cells.is_empty() || a.preceding_uplinks.is_empty() {
                    return Err(invalid("attack.cells", "needs at least one cell and preceding_uplinks value"));
                }
                if a.sniff_channel >= net.channels_hz.len() {
                    return Err(invalid("attack.sniff_channel", "outside the channel plan"));
                }
                if !(a.miss_probability > 0.0 && a.miss_probability < 1.0) {
                    return Err(invalid("attack.miss_probability", "must lie in (0, 1)"));
                }
                if a.trial_budget == 0 || a.horizon_transactions == 0 {
                    return Err(invalid("attack.horizon_transactions", "budget and horizon must be at least 1"));
                }
            }
            AttackSpec::BeaconDrift(b) => {
                if b.step_sizes.is_empty() || b.step_sizes.contains(&0) {
                    return Err(invalid("attack.step_sizes", "needs positive step sizes"));
                }
                if b.total_shift_us == 0 || b.hold_periods == 0 {
                    return Err(invalid("attack.total_shift_us", "shift and hold periods must be positive"));
                }
            }
        }
        Ok(())
    }

    fn validate_topology(&self) -> Result<(), ScenarioError> {
        let t = &self.topology;
        for (i, n) in t.nodes.iter().enumerate() {
            if t.nodes[..i].iter().any(|m| m.name == n.name) {
                return Err(ScenarioError::DuplicateNode(n.name.clone()));
            }
        }
        for l in &t.links {
            for end in [&l.a, &l.b] {
                if !t.nodes.iter().any(|n| &n.name == end) {
                    return Err(ScenarioError::UnknownNode(end.clone()));
                }
            }
            if l.attenuation_db.is_nan() || l.attenuation_db < 0.0 {
                return Err(invalid("topology.links.attenuation_db", "must be non-negative"));
            }
        }
        let count = |r| t.with_role(r).count();
        let exactly_one = |r| match count(r) {
            1 => Ok(()),
            found => Err(ScenarioError::RoleCount { role: r, expected: "1", found }),
        };
        exactly_one(Role::Device)?;
        if count(Role::Gateway) == 0 {
            return Err(ScenarioError::RoleCount { role: Role::Gateway, expected: "at least 1", found: 0 });
        }
        match self.attack {
            AttackSpec::None(_) => {}
            AttackSpec::AdrSpoofing(_) => {
                exactly_one(Role::Entry)?;
                exactly_one(Role::Exit)?;
            }
            AttackSpec::BeaconDrift(_) => exactly_one(Role::Spoofer)?,
        }
        Ok(())
    }
}
