use lorasim_core::attacker::{AdrPhase, AttackNote, WormholeVariant};
use lorasim_core::experiment::{
    adr_jobs, baseline_jobs, beacon_jobs, run_baseline_trial, simulate_adr, simulate_beacon, AdrJob, BeaconStatus,
    Scenario, ScenarioError, Trigger,
};
use lorasim_core::phy::DataRate;
use lorasim_core::world::Record;

fn job(wormhole: WormholeVariant, dr: DataRate, trial: u64) -> AdrJob {
    AdrJob { trial, wormhole, dr, preceding_uplinks: 1 }
}

#[test]
fn adr_trials_are_reproducible() {
    let sc = Scenario::default_adr_spoofing();
    let j = job(WormholeVariant::Rx2, DataRate::DR3, 4);
    let (r1, w1) = simulate_adr(&sc, &j, true).unwrap();
    let (r2, w2) = simulate_adr(&sc, &j, true).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(w1.log(), w2.log());
    assert_eq!(w1.trace().digest(), w2.trace().digest());
    assert!(!w1.trace().is_empty());

    let (_, w3) = simulate_adr(&sc, &job(WormholeVariant::Rx2, DataRate::DR3, 5), true).unwrap();
    assert_ne!(w1.trace().digest(), w3.trace().digest());
}

#[test]
fn beacon_trials_are_reproducible() {
    let sc = Scenario::default_beacon_drift();
    let j = beacon_jobs(&sc).unwrap()[0];
    let (a, wa) = simulate_beacon(&sc, &j, true).unwrap();
    let (b, wb) = simulate_beacon(&sc, &j, true).unwrap();
    assert_eq!(a, b);
    assert_eq!(wa.trace().digest_hex(), wb.trace().digest_hex());
}

/// The device-side ADR counter restarts on every downlink and otherwise
/// counts silent transactions.
#[test]
fn adr_ack_counter_follows_downlinks() {
    let sc = Scenario::default_adr_spoofing();
    for j in [job(WormholeVariant::Rx2, DataRate::DR2, 0), job(WormholeVariant::DownlinkDelayed, DataRate::DR0, 1)] {
        let (_, w) = simulate_adr(&sc, &j, false).unwrap();
        let mut prev = 0u32;
        let mut ends = 0;
        for (_, r) in w.log() {
            if let Record::TransactionEnd { received, adr_ack_cnt, .. } = r {
                assert_eq!(*adr_ack_cnt, if *received { 0 } else { prev + 1 });
                prev = *adr_ack_cnt;
                ends += 1;
            }
        }
        assert!(ends > 10);
    }
}

#[test]
fn retained_devices_stay_at_the_target_rate() {
    let sc = Scenario::default_adr_spoofing();
    let j = job(WormholeVariant::Rx2, DataRate::DR3, 2);
    let (row, w) = simulate_adr(&sc, &j, false).unwrap();
    assert_eq!(row.trigger, Trigger::WormholeFrame);
    assert!(row.retained);
    assert_eq!(row.final_datarate, 5);
    let mut retention = false;
    for (_, r) in w.log() {
        match r {
            Record::Attack(AttackNote::PhaseChanged(AdrPhase::Retention)) => retention = true,
            Record::TransactionEnd { dr, backoff, .. } if retention => {
                assert_eq!(*dr, DataRate::DR5);
                assert_eq!(*backoff, None);
            }
            _ => {}
        }
    }
    assert!(retention);
    assert!(row.retention_uplinks > 0);
    assert!(row.retention_received <= row.retention_uplinks);
}

#[test]
fn baseline_sends_every_scheduled_uplink() {
    let mut sc = Scenario::default_baseline();
    if let lorasim_core::experiment::AttackSpec::None(b) = &mut sc.attack {
        b.uplinks_per_dr = 40;
        b.data_rates = vec![DataRate::DR0, DataRate::DR5];
    }
    let rows: Vec<_> = baseline_jobs(&sc).unwrap().iter().map(|j| run_baseline_trial(&sc, j).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.sent == 40));
    assert!(rows[0].receive_rate > 0.95, "{:?}", rows[0]);
    assert!(rows[1].receive_rate < 0.2, "{:?}", rows[1]);
    let snr = rows[0].snr_mean.unwrap();
    assert!((snr + 10.6).abs() < 1.0, "{snr}");
}

#[test]
fn job_enumeration() {
    let adr = Scenario::default_adr_spoofing();
    let jobs = adr_jobs(&adr).unwrap();
    assert_eq!(jobs.len(), 3 * 3 * 20);
    assert!(jobs.iter().enumerate().all(|(i, j)| j.trial == i as u64));

    let beacon = Scenario::default_beacon_drift();
    assert_eq!(beacon_jobs(&beacon).unwrap().len(), 6 * beacon.trials as usize);

    assert!(matches!(adr_jobs(&beacon), Err(ScenarioError::AttackMismatch { .. })));
    assert!(matches!(beacon_jobs(&adr), Err(ScenarioError::AttackMismatch { .. })));
}

#[test]
fn spoofed_beacons_take_over_after_the_drift() {
    let sc = Scenario::default_beacon_drift();
    let j = beacon_jobs(&sc).unwrap()[0];
    assert_eq!(j.step_size, 1);
    let (rows, _) = simulate_beacon(&sc, &j, false).unwrap();
    let first = rows.iter().find(|r| r.period == -1).unwrap();
    assert_eq!(first.beacon_status, BeaconStatus::Valid);
    assert!(first.downlink_received);
    let late: Vec<_> = rows.iter().filter(|r| r.period >= 12).collect();
    assert!(!late.is_empty());
    assert!(late.iter().all(|r| r.beacon_status == BeaconStatus::Spoofed && !r.downlink_received));
}

#[test]
fn validation_rejects_broken_scenarios() {
    let mut sc = Scenario::default_adr_spoofing();
    sc.trials = 0;
    assert_eq!(sc.validate(), Err(ScenarioError::NoTrials));

    let mut sc = Scenario::default_adr_spoofing();
    sc.topology.links[0].b = "nowhere".into();
    assert!(matches!(sc.validate(), Err(ScenarioError::UnknownNode(_))));

    let mut sc = Scenario::default_beacon_drift();
    sc.schema_version = 9;
    assert_eq!(sc.validate(), Err(ScenarioError::SchemaVersion(9)));

    for sc in [Scenario::default_baseline(), Scenario::default_adr_spoofing(), Scenario::default_beacon_drift()] {
        assert_eq!(sc.validate(), Ok(()));
    }
}

#[test]
fn trials_are_exchangeable() {
    let sc = Scenario::default_adr_spoofing();
    let jobs: Vec<_> = adr_jobs(&sc).unwrap().into_iter().step_by(37).collect();
    let forward: Vec<_> = jobs.iter().map(|j| lorasim_core::experiment::run_adr_trial(&sc, j).unwrap()).collect();
    let mut backward: Vec<_> = jobs.iter().rev().map(|j| lorasim_core::experiment::run_adr_trial(&sc, j).unwrap()).collect();
    backward.reverse();
    assert_eq!(forward, backward);
}
