use crate::frames::{LinkAdrAns, LinkAdrReq};
use crate::phy::DataRate;

/// Highest transmit power index; index `i` transmits at `16 - 2i` dBm.
pub const TP_MAX_INDEX: u8 = 7;

pub fn tx_power_dbm(tp_index: u8) -> i8 {
    16 - 2 * tp_index.min(TP_MAX_INDEX) as i8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackoffStep {
    RestoredPower,
    LoweredDataRate(DataRate),
}

/// Device-side ADR bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdrState {
    pub adr_ack_cnt: u32,
    pub adr_ack_limit: u32,
    pub adr_ack_delay: u32,
    pub current_dr: DataRate,
    /// 0 is maximum power.
    pub current_tp_index: u8,
}

impl AdrState {
    pub fn new(dr: DataRate, limit: u32, delay: u32) -> Self {
        AdrState {
            adr_ack_cnt: 0,
            adr_ack_limit: limit,
            adr_ack_delay: delay.max(1),
            current_dr: dr,
            current_tp_index: 0,
        }
    }

    pub fn ack_req(&self) -> bool {
        self.adr_ack_cnt >= self.adr_ack_limit
    }

    /// Counts a finished transaction. Without a downlink the counter grows;
    /// at `limit + delay` and every `delay` after, one backoff step runs:
    /// maximum power is restored first, then the data rate drops by one.
    pub fn on_transaction_end(&mut self, received_downlink: bool) -> Option<BackoffStep> {
        if received_downlink {
            self.adr_ack_cnt = 0;
            return None;
        }
        self.adr_ack_cnt = self.adr_ack_cnt.saturating_add(1);
        let first = self.adr_ack_limit + self.adr_ack_delay;
        if self.adr_ack_cnt < first || !(self.adr_ack_cnt - first).is_multiple_of(self.adr_ack_delay) {
            return None;
        }
        if self.current_tp_index != 0 {
            self.current_tp_index = 0;
            Some(BackoffStep::RestoredPower)
        } else {
            let dr = self.current_dr.slower()?;
            self.current_dr = dr;
            Some(BackoffStep::LoweredDataRate(dr))
        }
    }

    /// Applies a LinkADRReq atomically. `ch_mask` is the device's enabled
    /// channel mask over a plan of `n_channels`.
    pub fn apply_link_adr_req(&mut self, req: &LinkAdrReq, n_channels: usize, ch_mask: &mut u16) -> LinkAdrAns {
        let plan_mask: u16 = if n_channels >= 16 { u16::MAX } else { (1u16 << n_channels) - 1 };
        let ans = LinkAdrAns {
            power_ok: req.tp_index <= TP_MAX_INDEX,
            dr_ok: DataRate::new(req.dr).is_ok(),
            ch_ok: req.ch_mask != 0 && req.ch_mask & !plan_mask == 0,
        };
        if ans.all_ok() {
            self.current_dr = DataRate::new(req.dr).expect("checked");
            self.current_tp_index = req.tp_index;
            *ch_mask = req.ch_mask;
        }
        ans
    }
}
