use crate::enddevice::TP_MAX_INDEX;
use crate::phy::{required_snr, DataRate};

/// Semtech-style ADR: the step count comes from the best recent SNR.
/// Positive steps raise the data rate up to DR5 and then lower power;
/// negative steps raise power. Returns the new (dr, tp) only if it differs.
pub fn adr_decision<I>(history: I, current_dr: DataRate, current_tp: u8, margin_db: f64) -> Option<(DataRate, u8)>
where
    I: IntoIterator<Item = f64>,
{
    let snr_max = history.into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !snr_max.is_finite() {
        return None;
    }
    let mut steps = libm::floor((snr_max - required_snr(current_dr) - margin_db) / 3.0) as i32;
    let mut dr = current_dr;
    let mut tp = current_tp.min(TP_MAX_INDEX);
    while steps > 0 {
        if let Some(next) = dr.faster() {
            dr = next;
        } else if tp < TP_MAX_INDEX {
            tp += 1;
        } else {
            break;
        }
        steps -= 1;
    }
    while steps < 0 && tp > 0 {
        tp -= 1;
        steps += 1;
    }
    ((dr, tp) != (current_dr, current_tp)).then_some((dr, tp))
}
