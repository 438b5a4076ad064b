use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ChannelModel, SimError};
use crate::phy::{self, required_snr_for_sf, Signal, TxParams};
use crate::{secs, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

pub type TxId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxKind {
    Data,
    Beacon,
    Jam,
}

/// An emission on the medium. For data and beacons only the first
/// `frame_len` payload bytes form the frame; trailing bytes are filler that
/// occupies air time but neither decodes nor interferes.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub id: TxId,
    pub source: NodeId,
    pub params: TxParams,
    pub start: Micros,
    pub duration: Micros,
    pub payload: Vec<u8>,
    pub kind: TxKind,
    pub frame_len: usize,
    /// Transmissions in the same coherence group do not interfere.
    pub coherence: Option<u64>,
}

impl Transmission {
    /// A frame whose duration is its time on air.
    pub fn frame(source: NodeId, params: TxParams, start: Micros, payload: Vec<u8>, kind: TxKind) -> Result<Self, SimError> {
        let duration = phy::time_on_air(&params, payload.len()).map_err(SimError::InvalidTransmission)?;
        Ok(Transmission {
            id: 0,
            source,
            params,
            start,
            duration,
            frame_len: payload.len(),
            payload,
            kind,
            coherence: None,
        })
    }

    /// A frame followed by `filler` random bytes.
    pub fn frame_with_filler(
        source: NodeId,
        params: TxParams,
        start: Micros,
        frame: Vec<u8>,
        filler: &[u8],
        kind: TxKind,
    ) -> Result<Self, SimError> {
        let frame_len = frame.len();
        let mut payload = frame;
        payload.extend_from_slice(filler);
        let mut tx = Self::frame(source, params, start, payload, kind)?;
        tx.frame_len = frame_len;
        Ok(tx)
    }

    pub fn jam(source: NodeId, params: TxParams, start: Micros, duration: Micros) -> Self {
        Transmission {
            id: 0,
            source,
            params,
            start,
            duration,
            payload: Vec::new(),
            kind: TxKind::Jam,
            frame_len: 0,
            coherence: None,
        }
    }

    pub fn end(&self) -> Micros {
        self.start + self.duration
    }

    /// End of the decodable frame.
    pub fn frame_end(&self) -> Micros {
        match self.kind {
            TxKind::Jam => self.end(),
            _ if self.frame_len == self.payload.len() => self.end(),
            _ => self.start + phy::time_on_air(&self.params, self.frame_len.max(1)).unwrap_or(self.duration),
        }
    }

    pub fn frame_bytes(&self) -> &[u8] {
        &self.payload[..self.frame_len]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MediumEvent {
    Header(TxId),
    End(TxId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Frame demodulated.
    Decoded,
    /// Above the noise floor but lost to same-SF interference.
    Collided,
    /// Explicit header demodulated; the frame is still in the air.
    Header,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub receiver: NodeId,
    pub tx: Transmission,
    pub snr_db: f64,
    pub rssi_dbm: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
enum Listen {
    Single { freq: u32, sf: u8, since: Micros, from: Micros, until: Option<Micros> },
    Multi { freqs: Vec<u32>, since: Micros },
}

impl Listen {
    fn accepts(&self, tx: &Transmission) -> bool {
        match self {
            Listen::Single { freq, sf, since, from, until } => {
                *freq == tx.params.freq_hz
                    && *sf == tx.params.sf
                    && *since <= tx.start
                    && *from <= tx.start
                    && until.is_none_or(|u| tx.start <= u)
            }
            Listen::Multi { freqs, since } => freqs.contains(&tx.params.freq_hz) && *since <= tx.start,
        }
    }

    fn active_at(&self, t: Micros) -> bool {
        match self {
            Listen::Single { until, .. } => until.is_none_or(|u| t <= u),
            Listen::Multi { .. } => true,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    header_events: bool,
    listen: Option<Listen>,
}

#[derive(Debug, Clone)]
struct OnAir {
    tx: Transmission,
    /// Per receiver: (mean rx power, jitter).
    links: Vec<(NodeId, f64, f64)>,
}

/// How long finished transmissions stay around for overlap checks.
const HISTORY: Micros = secs(10);

/// The shared radio medium: listening state per node, transmissions in the
/// air and reception resolution at frame end.
pub struct Medium {
    pub channel: ChannelModel,
    nodes: Vec<Node>,
    air: Vec<OnAir>,
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    next_id: TxId,
}

impl Medium {
    pub fn new(channel: ChannelModel, seed: u64) -> Self {
        let sigma = channel.snr_jitter_sigma_db;
        Medium {
            jitter: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma")),
            channel,
            nodes: Vec::new(),
            air: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 1,
        }
    }

    /// `header_events` nodes also observe explicit headers mid-frame.
    pub fn add_node(&mut self, name: &str, header_events: bool) -> NodeId {
        self.nodes.push(Node { name: name.into(), header_events, listen: None });
        NodeId(self.nodes.len() as u16 - 1)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        self.nodes.get(id.0 as usize).map_or("?", |n| n.name.as_str())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut Node, SimError> {
        self.nodes.get_mut(id.0 as usize).ok_or(SimError::UnknownNode(id.0))
    }

    /// Tunes a single-channel radio. `window` limits which frame starts are
    /// accepted; without it the node listens until retuned. A request that
    /// overlaps an active listen fails; call [`Medium::stop_listening`] first
    /// to retune.
    pub fn listen(&mut self, node: NodeId, now: Micros, freq: u32, sf: u8, window: Option<(Micros, Micros)>) -> Result<(), SimError> {
        let n = self.node_mut(node)?;
        let from = window.map_or(now, |(s, _)| s);
        if n.listen.as_ref().is_some_and(|l| l.active_at(from.max(now))) {
            return Err(SimError::ListenConflict(node.0));
        }
        n.listen = Some(Listen::Single { freq, sf, since: now, from, until: window.map(|(s, d)| s + d) });
        Ok(())
    }

    /// Multi-channel, all-SF reception as done by gateways.
    pub fn listen_multi(&mut self, node: NodeId, now: Micros, freqs: Vec<u32>) -> Result<(), SimError> {
        self.node_mut(node)?.listen = Some(Listen::Multi { freqs, since: now });
        Ok(())
    }

    pub fn stop_listening(&mut self, node: NodeId) {
        if let Ok(n) = self.node_mut(node) {
            n.listen = None;
        }
    }

    pub fn is_listening(&self, node: NodeId, now: Micros) -> bool {
        self.nodes
            .get(node.0 as usize)
            .and_then(|n| n.listen.as_ref())
            .is_some_and(|l| l.active_at(now))
    }

    /// Puts a transmission on the air at its start time and returns the
    /// medium events the caller must schedule.
    pub fn transmit(&mut self, mut tx: Transmission) -> Result<(TxId, [(Micros, MediumEvent); 2]), SimError> {
        tx.params.validate().map_err(SimError::InvalidTransmission)?;
        if tx.source.0 as usize >= self.nodes.len() {
            return Err(SimError::UnknownNode(tx.source.0));
        }
        let now = tx.start;
        self.air.retain(|a| a.tx.end() + HISTORY >= now);
        tx.id = self.next_id;
        self.next_id += 1;
        let mut links = Vec::new();
        for r in 0..self.nodes.len() as u16 {
            let r = NodeId(r);
            if r == tx.source {
                continue;
            }
            if let Some(att) = self.channel.attenuation(tx.source, r) {
                let j = self.jitter.map_or(0.0, |n| n.sample(&mut self.rng));
                links.push((r, tx.params.power_dbm as f64 - att, j));
            }
        }
        let id = tx.id;
        let header_at = match tx.kind {
            TxKind::Data if tx.params.explicit_header => tx.start + phy::header_time(&tx.params).min(tx.duration),
            _ => tx.frame_end(),
        };
        let end = tx.frame_end();
        self.air.push(OnAir { tx, links });
        Ok((id, [(header_at, MediumEvent::Header(id)), (end, MediumEvent::End(id))]))
    }

    fn find(&self, id: TxId) -> Option<&OnAir> {
        self.air.iter().find(|a| a.tx.id == id)
    }

    fn link(&self, a: &OnAir, r: NodeId) -> Option<(f64, f64)> {
        a.links.iter().find(|l| l.0 == r).map(|&(_, p, j)| (p, j))
    }

    fn transmitting_during(&self, node: NodeId, lo: Micros, hi: Micros) -> bool {
        self.air.iter().any(|a| a.tx.source == node && a.tx.start < hi && a.tx.end() > lo)
    }

    /// Handles a medium event and returns what each receiver observes, in
    /// node order.
    pub fn on_event(&mut self, ev: MediumEvent) -> Vec<Delivery> {
        let mut out = Vec::new();
        let (id, header) = match ev {
            MediumEvent::Header(id) => (id, true),
            MediumEvent::End(id) => (id, false),
        };
        let Some(on_air) = self.find(id) else { return out };
        let tx = &on_air.tx;
        if tx.kind == TxKind::Jam || (header && !tx.params.explicit_header) {
            return out;
        }
        for &(r, power, jitter) in &on_air.links {
            let node = &self.nodes[r.0 as usize];
            if header && !node.header_events {
                continue;
            }
            if !node.listen.as_ref().is_some_and(|l| l.accepts(tx)) {
                continue;
            }
            let snr = power - self.channel.noise_floor_dbm + jitter;
            if snr < required_snr_for_sf(tx.params.sf) {
                continue;
            }
            if self.transmitting_during(r, tx.start, tx.frame_end()) {
                continue;
            }
            let outcome = if header {
                Outcome::Header
            } else if self.captured(on_air, r, power, snr) {
                Outcome::Decoded
            } else {
                Outcome::Collided
            };
            out.push(Delivery { receiver: r, tx: tx.clone(), snr_db: snr, rssi_dbm: power + jitter, outcome });
        }
        out
    }

    fn captured(&self, target: &OnAir, r: NodeId, power: f64, snr: f64) -> bool {
        let t = &target.tx;
        let (lo, hi) = (t.start, t.frame_end());
        let mut signals = Vec::new();
        signals.push(Signal { sf: t.params.sf, snr_db: snr, power_dbm: power, decodable: true, coherence: t.coherence });
        for other in &self.air {
            let o = &other.tx;
            if o.id == t.id || o.params.freq_hz != t.params.freq_hz || o.start >= hi || o.frame_end() <= lo {
                continue;
            }
            if let Some((p, j)) = self.link(other, r) {
                signals.push(Signal {
                    sf: o.params.sf,
                    snr_db: p - self.channel.noise_floor_dbm + j,
                    power_dbm: p,
                    decodable: o.kind != TxKind::Jam,
                    coherence: o.coherence,
                });
            }
        }
        phy::resolve_reception(&signals).contains(&0)
    }

    /// End of the latest frame this node is currently locked onto, if any:
    /// a detectable frame it accepts that started but has not finished.
    pub fn receiving_until(&self, node: NodeId, now: Micros) -> Option<Micros> {
        let listen = self.nodes.get(node.0 as usize)?.listen.as_ref()?;
        self.air
            .iter()
            .filter(|a| a.tx.kind != TxKind::Jam && a.tx.start <= now && a.tx.frame_end() > now && listen.accepts(&a.tx))
            .filter(|a| {
                self.link(a, node).is_some_and(|(p, j)| {
                    p - self.channel.noise_floor_dbm + j >= required_snr_for_sf(a.tx.params.sf)
                })
            })
            .map(|a| a.tx.frame_end())
            .max()
    }
}
