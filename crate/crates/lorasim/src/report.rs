//! CSV output: one raw file per experiment plus derived summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use lorasim_core::attacker::WormholeVariant;
use lorasim_core::experiment::{mean_std, AdrSpoofRow, BaselineRow, BeaconRow, Trigger};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::{Data, OrderStatistics};

use crate::Experiment;

pub const BASELINE_COLUMNS: [&str; 9] =
    ["trial", "datarate", "sent", "received", "receive_rate", "rssi_mean", "rssi_std", "snr_mean", "snr_std"];
pub const ADR_COLUMNS: [&str; 12] = [
    "trial",
    "wormhole",
    "datarate",
    "preceding_uplinks",
    "trigger",
    "transactions_to_target",
    "retention_uplinks",
    "retention_received",
    "retention_uplink_success_rate",
    "retained",
    "final_datarate",
    "replays_rejected",
];
pub const BEACON_COLUMNS: [&str; 6] =
    ["trial", "step_size", "period", "downlink_received", "beacon_status", "beacon_snr"];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv { path: path.to_owned(), source }
}

/// Writes `rows` under an explicit header so empty inputs still yield a header line.
pub fn write_csv<T: Serialize>(path: &Path, columns: &[&str], rows: &[T]) -> Result<(), ReportError> {
    let file = File::create(path).map_err(|source| ReportError::Io { path: path.to_owned(), source })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(columns).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.to_owned(), source })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

/// Mean with a two-sided 95% Student-t interval.
pub fn mean_ci95(xs: &[f64]) -> Option<(f64, f64, f64)> {
    let (m, sd) = mean_std(xs)?;
    if xs.len() < 2 {
        return Some((m, m, m));
    }
    let n = xs.len() as f64;
    let t = StudentsT::new(0.0, 1.0, n - 1.0).expect("n >= 2").inverse_cdf(0.975);
    let h = t * sd / n.sqrt();
    Some((m, m - h, m + h))
}

fn percentile(xs: &[f64], p: usize) -> Option<f64> {
    (!xs.is_empty()).then(|| Data::new(xs.to_vec()).percentile(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub datarate: u8,
    pub trials: u32,
    pub sent: u32,
    pub received: u32,
    pub receive_rate: f64,
    pub rssi_mean: Option<f64>,
    pub snr_mean: Option<f64>,
    pub snr_std: Option<f64>,
}

pub fn baseline_summary(rows: &[BaselineRow]) -> Vec<BaselineSummary> {
    let mut by_dr: BTreeMap<u8, Vec<&BaselineRow>> = BTreeMap::new();
    for r in rows {
        by_dr.entry(r.datarate).or_default().push(r);
    }
    by_dr
        .into_iter()
        .map(|(datarate, rs)| {
            let sent = rs.iter().map(|r| r.sent).sum::<u32>();
            let received = rs.iter().map(|r| r.received).sum::<u32>();
            let rssi: Vec<f64> = rs.iter().filter_map(|r| r.rssi_mean).collect();
            let snr: Vec<f64> = rs.iter().filter_map(|r| r.snr_mean).collect();
            let snr_ms = mean_std(&snr);
            BaselineSummary {
                datarate,
                trials: rs.len() as u32,
                sent,
                received,
                receive_rate: if sent == 0 { 0.0 } else { received as f64 / sent as f64 },
                rssi_mean: mean_std(&rssi).map(|x| x.0),
                snr_mean: snr_ms.map(|x| x.0),
                snr_std: snr_ms.map(|x| x.1),
            }
        })
        .collect()
}

fn cell_key(v: WormholeVariant) -> u8 {
    match v {
        WormholeVariant::Unidirectional => 0,
        WormholeVariant::Rx2 => 1,
        WormholeVariant::DownlinkDelayed => 2,
    }
}

fn group_cells<K: Ord>(rows: &[AdrSpoofRow], key: impl Fn(&AdrSpoofRow) -> K) -> BTreeMap<K, Vec<&AdrSpoofRow>> {
    let mut m: BTreeMap<K, Vec<&AdrSpoofRow>> = BTreeMap::new();
    for r in rows {
        m.entry(key(r)).or_default().push(r);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerSummary {
    pub wormhole: WormholeVariant,
    pub datarate: u8,
    pub trials: u32,
    pub wormhole_frame: u32,
    pub other_frame: u32,
    pub failed: u32,
    pub wormhole_fraction: f64,
}

pub fn trigger_summary(rows: &[AdrSpoofRow]) -> Vec<TriggerSummary> {
    group_cells(rows, |r| (cell_key(r.wormhole), r.datarate))
        .into_values()
        .map(|rs| {
            let count = |t| rs.iter().filter(|r| r.trigger == t).count() as u32;
            let n = rs.len() as u32;
            TriggerSummary {
                wormhole: rs[0].wormhole,
                datarate: rs[0].datarate,
                trials: n,
                wormhole_frame: count(Trigger::WormholeFrame),
                other_frame: count(Trigger::OtherFrame),
                failed: count(Trigger::Failed),
                wormhole_fraction: count(Trigger::WormholeFrame) as f64 / n.max(1) as f64,
            }
        })
        .collect()
}

/// Transactions from the attack start to the target data rate, grouped by
/// cell and preceding uplinks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionsRow {
    pub wormhole: WormholeVariant,
    pub datarate: u8,
    pub preceding_uplinks: u32,
    pub n: u32,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub p25: Option<f64>,
    pub median: Option<f64>,
    pub p75: Option<f64>,
}

pub fn transactions_summary(rows: &[AdrSpoofRow]) -> Vec<TransactionsRow> {
    group_cells(rows, |r| (cell_key(r.wormhole), r.datarate, r.preceding_uplinks))
        .into_values()
        .map(|rs| {
            let xs: Vec<f64> = rs.iter().filter_map(|r| r.transactions_to_target).map(f64::from).collect();
            let ci = mean_ci95(&xs);
            TransactionsRow {
                wormhole: rs[0].wormhole,
                datarate: rs[0].datarate,
                preceding_uplinks: rs[0].preceding_uplinks,
                n: xs.len() as u32,
                mean: ci.map(|c| c.0),
                sd: mean_std(&xs).map(|m| m.1),
                ci95_low: ci.map(|c| c.1),
                ci95_high: ci.map(|c| c.2),
                p25: percentile(&xs, 25),
                median: percentile(&xs, 50),
                p75: percentile(&xs, 75),
            }
        })
        .collect()
}

/// Retention outcome per cell, uplink counts pooled over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionSummary {
    pub wormhole: String,
    pub datarate: String,
    pub trials: u32,
    pub retained: u32,
    pub retention_uplinks: u32,
    pub retention_received: u32,
    pub retention_uplink_success_rate: Option<f64>,
}

fn retention_of(wormhole: String, datarate: String, rs: &[&AdrSpoofRow]) -> RetentionSummary {
    let up = rs.iter().map(|r| r.retention_uplinks).sum::<u32>();
    let rx = rs.iter().map(|r| r.retention_received).sum::<u32>();
    RetentionSummary {
        wormhole,
        datarate,
        trials: rs.len() as u32,
        retained: rs.iter().filter(|r| r.retained).count() as u32,
        retention_uplinks: up,
        retention_received: rx,
        retention_uplink_success_rate: (up > 0).then(|| rx as f64 / up as f64),
    }
}

pub fn retention_summary(rows: &[AdrSpoofRow]) -> Vec<RetentionSummary> {
    let mut out: Vec<RetentionSummary> = group_cells(rows, |r| (cell_key(r.wormhole), r.datarate))
        .into_values()
        .map(|rs| retention_of(rs[0].wormhole.to_string(), rs[0].datarate.to_string(), &rs))
        .collect();
    let all: Vec<&AdrSpoofRow> = rows.iter().collect();
    out.push(retention_of("all".into(), "all".into(), &all));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Availability {
    pub period: i64,
    pub step_size: u32,
    pub availability: f64,
    pub trials: u32,
}

/// Fraction of trials whose ping downlink arrived, per step size and period.
pub fn availability(rows: &[BeaconRow]) -> Vec<Availability> {
    let mut m: BTreeMap<(u32, i64), (u32, u32)> = BTreeMap::new();
    for r in rows {
        let e = m.entry((r.step_size, r.period)).or_default();
        e.0 += r.downlink_received as u32;
        e.1 += 1;
    }
    m.into_iter()
        .map(|((step_size, period), (ok, n))| Availability { period, step_size, availability: ok as f64 / n as f64, trials: n })
        .collect()
}

pub fn write_baseline(out: &Path, rows: &[BaselineRow]) -> Result<Vec<PathBuf>, ReportError> {
    let raw = out.join(Experiment::Baseline.csv_name());
    write_csv(&raw, &BASELINE_COLUMNS, rows)?;
    let sum = out.join("baseline_summary.csv");
    write_csv(
        &sum,
        &["datarate", "trials", "sent", "received", "receive_rate", "rssi_mean", "snr_mean", "snr_std"],
        &baseline_summary(rows),
    )?;
    Ok(vec![raw, sum])
}

pub fn write_adr(out: &Path, rows: &[AdrSpoofRow]) -> Result<Vec<PathBuf>, ReportError> {
    let raw = out.join(Experiment::AdrSpoof.csv_name());
    write_csv(&raw, &ADR_COLUMNS, rows)?;
    let trig = out.join("adr_triggers.csv");
    write_csv(
        &trig,
        &["wormhole", "datarate", "trials", "wormhole_frame", "other_frame", "failed", "wormhole_fraction"],
        &trigger_summary(rows),
    )?;
    let t2 = out.join("adr_transactions.csv");
    write_csv(
        &t2,
        &["wormhole", "datarate", "preceding_uplinks", "n", "mean", "sd", "ci95_low", "ci95_high", "p25", "median", "p75"],
        &transactions_summary(rows),
    )?;
    let ret = out.join("adr_retention.csv");
    write_csv(
        &ret,
        &[
            "wormhole",
            "datarate",
            "trials",
            "retained",
            "retention_uplinks",
            "retention_received",
            "retention_uplink_success_rate",
        ],
        &retention_summary(rows),
    )?;
    Ok(vec![raw, trig, t2, ret])
}

pub fn write_beacon(out: &Path, rows: &[BeaconRow]) -> Result<Vec<PathBuf>, ReportError> {
    let raw = out.join(Experiment::BeaconSpoof.csv_name());
    write_csv(&raw, &BEACON_COLUMNS, rows)?;
    let av = out.join("beacon_availability.csv");
    write_csv(&av, &["period", "step_size", "availability", "trials"], &availability(rows))?;
    Ok(vec![raw, av])
}

/// Rebuilds the summaries from whichever raw CSVs exist in `out`.
pub fn regenerate(out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    for e in Experiment::ALL {
        let raw = out.join(e.csv_name());
        if !raw.exists() {
            continue;
        }
        written.extend(match e {
            Experiment::Baseline => write_baseline(out, &read_csv::<BaselineRow>(&raw)?)?,
            Experiment::AdrSpoof => write_adr(out, &read_csv::<AdrSpoofRow>(&raw)?)?,
            Experiment::BeaconSpoof => write_beacon(out, &read_csv::<BeaconRow>(&raw)?)?,
        });
    }
    Ok(written)
}
