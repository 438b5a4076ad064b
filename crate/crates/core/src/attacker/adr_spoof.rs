use alloc::vec;
use alloc::vec::Vec;

use super::{t_timeout, Action, Attack, AttackNote, ForwardPolicy, Wormhole, WormholeConfig, WormholeVariant};
use crate::frames::{decode, Direction};
use crate::phy::DataRate;
use crate::simkit::{Delivery, NodeId, Outcome, TxKind};
use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdrPhase {
    Waiting,
    Spoofing,
    Retention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdrSpoofConfig {
    /// Spoofing-phase wormhole, tuned to the device's initial channel and DR.
    pub wormhole: WormholeConfig,
    pub target_dr: DataRate,
    pub n_channels: u32,
    pub uplink_period: Micros,
    pub miss_probability: f64,
    pub attack_start: Micros,
}

const START: u64 = 0;
const TIMEOUT: u64 = 1;

/// Two-phase ADR spoofing: a wormhole inflates the link quality seen by the
/// network until the device moves to the target DR, then only uplinks that
/// demand a downlink are let through.
#[derive(Debug, Clone)]
pub struct AdrSpoof {
    pub config: AdrSpoofConfig,
    pub phase: AdrPhase,
    pub wormhole: Wormhole,
    deadline: Micros,
    generation: u64,
}

impl AdrSpoof {
    pub fn new(config: AdrSpoofConfig) -> Self {
        let mut wormhole = Wormhole::new(config.wormhole.clone());
        wormhole.active = false;
        wormhole.suppress_mac_answers = true;
        AdrSpoof { config, phase: AdrPhase::Waiting, wormhole, deadline: 0, generation: 0 }
    }

    pub fn t_timeout(&self) -> Micros {
        t_timeout(self.config.uplink_period, self.config.n_channels, self.config.miss_probability)
    }

    fn arm(&mut self, now: Micros) -> Action {
        self.deadline = now + self.t_timeout();
        self.generation += 1;
        Action::Timer { at: self.deadline, token: TIMEOUT | (self.generation << 1) }
    }

    fn enter_retention(&mut self) -> Vec<Action> {
        self.phase = AdrPhase::Retention;
        self.wormhole.config.variant = WormholeVariant::Rx2;
        self.wormhole.policy = ForwardPolicy::AdrAckReqOnly;
        let f = self.wormhole.config.sniff_freq_hz;
        let mut out = self.wormhole.retune(f, self.config.target_dr);
        out.push(Action::Note(AttackNote::PhaseChanged(AdrPhase::Retention)));
        out
    }
}

impl Attack for AdrSpoof {
    fn nodes(&self) -> Vec<NodeId> {
        self.wormhole.nodes()
    }

    fn start(&mut self, now: Micros) -> Vec<Action> {
        let mut out = self.wormhole.start(now);
        out.push(Action::Timer { at: self.config.attack_start.max(now), token: START });
        out
    }

    fn on_delivery(&mut self, now: Micros, d: &Delivery) -> Vec<Action> {
        let mut out = self.wormhole.on_delivery(now, d);
        let sniffed_target = self.phase == AdrPhase::Spoofing
            && d.outcome == Outcome::Decoded
            && d.tx.kind == TxKind::Data
            && d.receiver == self.wormhole.config.entry
            && decode(&d.tx.payload, Direction::Uplink).is_ok_and(|f| f.dev_addr == self.config.wormhole.target_dev_addr);
        if sniffed_target {
            if d.tx.params.data_rate() == Some(self.config.target_dr) {
                out.extend(self.enter_retention());
            } else {
                out.push(self.arm(now));
            }
        }
        out
    }

    fn on_timer(&mut self, now: Micros, token: u64) -> Vec<Action> {
        match (self.phase, token) {
            (AdrPhase::Waiting, START) => {
                self.phase = AdrPhase::Spoofing;
                self.wormhole.active = true;
                vec![Action::Note(AttackNote::PhaseChanged(AdrPhase::Spoofing)), self.arm(now)]
            }
            (AdrPhase::Spoofing, t) if t & 1 == TIMEOUT && t >> 1 == self.generation && now >= self.deadline => {
                self.enter_retention()
            }
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{encode, Frame};
    use crate::netserver::RxWindowPlan;
    use crate::phy::TxParams;
    use crate::simkit::Transmission;
    use crate::{ms, secs};

    fn spoof() -> AdrSpoof {
        AdrSpoof::new(AdrSpoofConfig {
            wormhole: WormholeConfig {
                variant: WormholeVariant::DownlinkDelayed,
                entry: NodeId(2),
                exit: NodeId(3),
                target_dev_addr: 9,
                sniff_freq_hz: 868_100_000,
                sniff_dr: DataRate::DR0,
                t_proc1: ms(150),
                t_proc2: ms(50),
                jam_enabled: true,
                exit_power_dbm: 14,
                entry_power_dbm: 14,
                rx: RxWindowPlan::default(),
                fopts_cleartext: false,
            },
            target_dr: DataRate::DR5,
            n_channels: 3,
            uplink_period: secs(12),
            miss_probability: 0.01,
            attack_start: secs(100),
        })
    }

    fn sniff(a: &mut AdrSpoof, t: Micros) -> Vec<Action> {
        let f = Frame::new(Direction::Uplink, 9, 1).with_payload(1, &[0]);
        let p = TxParams::uplink(DataRate::DR0, 868_100_000, 16);
        let tx = Transmission::frame(NodeId(0), p, t, encode(&f).unwrap(), TxKind::Data).unwrap();
        let d = Delivery { receiver: NodeId(2), tx, snr_db: 20.0, rssi_dbm: -80.0, outcome: Outcome::Decoded };
        a.on_delivery(t + 1, &d)
    }

    #[test]
    fn passive_until_start_then_times_out() {
        let mut a = spoof();
        assert_eq!(a.t_timeout(), secs(144));
        a.start(0);
        assert!(sniff(&mut a, secs(50)).is_empty());
        a.on_timer(secs(100), START);
        assert_eq!(a.phase, AdrPhase::Spoofing);
        let acts = sniff(&mut a, secs(110));
        let timer = acts.iter().find_map(|x| if let Action::Timer { at, token } = x { Some((*at, *token)) } else { None });
        let (at, token) = timer.unwrap();
        // An earlier timer generation is ignored.
        assert!(a.on_timer(secs(244), TIMEOUT | (1 << 1)).is_empty());
        let acts = a.on_timer(at, token);
        assert_eq!(a.phase, AdrPhase::Retention);
        assert!(acts.contains(&Action::Listen { node: NodeId(2), freq_hz: 868_100_000, sf: 7 }));
        assert_eq!(a.wormhole.policy, ForwardPolicy::AdrAckReqOnly);
        assert_eq!(a.wormhole.config.variant, WormholeVariant::Rx2);
    }
}
