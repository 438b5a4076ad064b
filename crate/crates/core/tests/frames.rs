use hmac::{Hmac, KeyInit, Mac};
use lorasim_core::frames::{
    compute_mic, conceal, decode, encode, encode_mac_commands, parse_mac_commands, reveal, verify, BeaconPayload, DeviceSession,
    DeviceTimeAns, Direction, Frame, FrameError, FrameFlags, LinkAdrAns, LinkAdrReq, MacCommand, MicPolicy,
    Rejection, BEACON_LEN,
};
use lorasim_core::phy::{DataRate, TxParams};
use proptest::prelude::*;
use sha2::Sha256;

const ADDR: u32 = 0x2601_0001;

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Uplink), Just(Direction::Downlink)]
}

fn frame() -> impl Strategy<Value = Frame> {
    (
        direction(),
        any::<u32>(),
        0u32..=0xffff,
        any::<[bool; 4]>(),
        proptest::collection::vec(any::<u8>(), 0..=15),
        proptest::option::of((any::<u8>(), proptest::collection::vec(any::<u8>(), 0..40))),
        any::<u32>(),
    )
        .prop_map(|(direction, dev_addr, fcnt, f, fopts, port, mic)| {
            let (fport, frm_payload) = match port {
                Some((p, body)) => (Some(p), body),
                None => (None, Vec::new()),
            };
            Frame {
                direction,
                dev_addr,
                fcnt,
                flags: FrameFlags { adr: f[0], adr_ack_req: f[1], ack: f[2], class_b: f[3] },
                fopts,
                fport,
                frm_payload,
                mic,
            }
        })
}

fn mac_command(dir: Direction) -> BoxedStrategy<MacCommand> {
    match dir {
        Direction::Downlink => prop_oneof![
            (0u8..16, 0u8..16, any::<u16>(), 1u8..16).prop_map(|(dr, tp_index, ch_mask, nb_trans)| {
                MacCommand::LinkAdrReq(LinkAdrReq { dr, tp_index, ch_mask, nb_trans })
            }),
            (any::<u32>(), any::<u8>())
                .prop_map(|(seconds, fraction)| MacCommand::DeviceTimeAns(DeviceTimeAns { seconds, fraction })),
        ]
        .boxed(),
        Direction::Uplink => prop_oneof![
            any::<[bool; 3]>().prop_map(|b| MacCommand::LinkAdrAns(LinkAdrAns {
                power_ok: b[0],
                dr_ok: b[1],
                ch_ok: b[2]
            })),
            Just(MacCommand::DeviceTimeReq),
        ]
        .boxed(),
    }
}

proptest! {
    #[test]
    fn codec_round_trip(f in frame()) {
        let bytes = encode(&f).unwrap();
        prop_assert_eq!(bytes.len(), f.encoded_len());
        let back = decode(&bytes, f.direction).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64), dir in direction()) {
        if let Ok(f) = decode(&bytes, dir) {
            prop_assert_eq!(encode(&f).unwrap(), bytes);
        }
    }

    #[test]
    fn mac_commands_round_trip(
        (dir, cmds) in direction().prop_flat_map(|d| (Just(d), proptest::collection::vec(mac_command(d), 0..3)))
    ) {
        let bytes = encode_mac_commands(&cmds);
        prop_assert_eq!(parse_mac_commands(&bytes, dir).unwrap(), cmds);
    }

    #[test]
    fn conceal_is_an_involution(f in frame(), secret: u64) {
        let mut f = f;
        f.dev_addr = ADDR;
        let s = DeviceSession::abp(ADDR, secret);
        for policy in [MicPolicy::V10, MicPolicy::V11, MicPolicy::Hardened] {
            prop_assert_eq!(reveal(&conceal(&f, &s, policy), &s, policy), f.clone());
        }
    }

    #[test]
    fn beacon_round_trip(t: u32, info: [u8; 7], tail in proptest::collection::vec(any::<u8>(), 0..20)) {
        let b = BeaconPayload { gps_time_s: t, gw_info: info };
        let mut bytes = b.encode().to_vec();
        bytes.extend(tail);
        prop_assert_eq!(BeaconPayload::decode(&bytes).unwrap(), b);
    }

    #[test]
    fn corrupted_beacons_fail_crc(t: u32, info: [u8; 7], at in 0usize..BEACON_LEN, flip in 1u8..=255) {
        let mut bytes = BeaconPayload { gps_time_s: t, gw_info: info }.encode();
        bytes[at] ^= flip;
        // The two RFU bytes are covered by the first CRC.
        prop_assert_eq!(BeaconPayload::decode(&bytes), Err(FrameError::BeaconCrc));
    }

    #[test]
    fn counter_reconstruction_recovers_nearby_values(next in 0u32..0x00ff_0000, ahead in 0u32..0x4000) {
        let mut s = DeviceSession::abp(ADDR, 1);
        s.fcnt_up = next;
        let sent = next + ahead;
        prop_assert_eq!(s.reconstruct_fcnt(Direction::Uplink, sent & 0xffff), sent);
    }
}

fn oracle_mic(key: &[u8; 16], data: &[u8]) -> u32 {
    let mut m = <Hmac<Sha256> as KeyInit>::new_from_slice(key).unwrap();
    m.update(data);
    let t = m.finalize().into_bytes();
    u32::from_le_bytes([t[0], t[1], t[2], t[3]])
}

/// Canonical MIC input assembled by hand for a downlink with ACK, port 1 and
/// a two-byte payload.
#[test]
fn mic_matches_hand_built_input() {
    let s = DeviceSession::abp(ADDR, 7);
    let mut f = Frame::new(Direction::Downlink, ADDR, 0x0102_0304).with_payload(1, &[0xaa, 0xbb]);
    f.flags.ack = true;
    let tx = TxParams::downlink(DataRate::DR3, 868_300_000, 14);

    let mut base = b"LSMIC1".to_vec();
    base.push(1);
    base.extend_from_slice(&ADDR.to_le_bytes());
    base.extend_from_slice(&0x0102_0304u32.to_le_bytes());
    base.push(0x20);
    base.push(0);
    base.extend_from_slice(&[1, 1]);
    base.extend_from_slice(&2u16.to_le_bytes());
    base.extend_from_slice(&[0xaa, 0xbb]);

    let key = &s.keys.down_integrity;
    assert_eq!(compute_mic(&s, &f, &tx, MicPolicy::V10, Some(9)).unwrap(), oracle_mic(key, &base));

    let mut v11 = base.clone();
    v11.extend_from_slice(&[0x02, 9, 0]);
    assert_eq!(compute_mic(&s, &f, &tx, MicPolicy::V11, Some(9)).unwrap(), oracle_mic(key, &v11));

    let mut hardened = base.clone();
    hardened.push(0x01);
    hardened.extend_from_slice(&868_300_000u32.to_le_bytes());
    hardened.push(9);
    hardened.extend_from_slice(&125_000u32.to_le_bytes());
    hardened.extend_from_slice(&[0x02, 9, 0]);
    assert_eq!(compute_mic(&s, &f, &tx, MicPolicy::Hardened, Some(9)).unwrap(), oracle_mic(key, &hardened));
}

#[derive(Debug, Clone, Copy)]
enum Tamper {
    None,
    Channel,
    ConfFcnt,
}

fn check(policy: MicPolicy, dir: Direction, tamper: Tamper) -> Result<(), Rejection> {
    let s = DeviceSession::abp(ADDR, 99);
    let mut f = Frame::new(dir, ADDR, 5).with_payload(1, &[1, 2, 3]);
    f.flags.ack = true;
    let sent = TxParams::data(DataRate::DR2, 868_100_000, 14, dir == Direction::Uplink);
    let conf = (dir == Direction::Downlink).then_some(41);
    f.mic = compute_mic(&s, &f, &sent, policy, conf).unwrap();
    let (rx, rx_conf) = match tamper {
        Tamper::None => (sent, conf),
        Tamper::Channel => (TxParams { freq_hz: 868_500_000, sf: 10, ..sent }, conf),
        Tamper::ConfFcnt => (sent, conf.map(|c| c + 1)),
    };
    verify(&f, &s, &rx, policy, rx_conf)
}

#[test]
fn downlink_policy_matrix() {
    use MicPolicy::*;
    use Tamper::*;
    let ok = Ok(());
    let bad = Err(Rejection::BadMic);
    let table = [
        (V10, [ok, ok, ok]),
        (V11, [ok, ok, bad]),
        (Hardened, [ok, bad, bad]),
    ];
    for (policy, expected) in table {
        for (tamper, want) in [None, Channel, ConfFcnt].into_iter().zip(expected) {
            assert_eq!(check(policy, Direction::Downlink, tamper), want, "{policy:?} {tamper:?}");
        }
    }
}

#[test]
fn uplink_policy_matrix() {
    assert_eq!(check(MicPolicy::V10, Direction::Uplink, Tamper::Channel), Ok(()));
    assert_eq!(check(MicPolicy::V11, Direction::Uplink, Tamper::Channel), Err(Rejection::BadMic));
    assert_eq!(check(MicPolicy::Hardened, Direction::Uplink, Tamper::Channel), Err(Rejection::BadMic));
    for p in [MicPolicy::V10, MicPolicy::V11, MicPolicy::Hardened] {
        assert_eq!(check(p, Direction::Uplink, Tamper::None), Ok(()));
    }
}

#[test]
fn stale_counters_are_rejected_after_a_valid_mic() {
    let mut s = DeviceSession::abp(ADDR, 3);
    let tx = TxParams::uplink(DataRate::DR0, 868_100_000, 14);
    let mut f = Frame::new(Direction::Uplink, ADDR, 4);
    f.mic = compute_mic(&s, &f, &tx, MicPolicy::V11, None).unwrap();
    assert_eq!(verify(&f, &s, &tx, MicPolicy::V11, None), Ok(()));
    s.accept(Direction::Uplink, 4);
    assert_eq!(verify(&f, &s, &tx, MicPolicy::V11, None), Err(Rejection::StaleFcnt));
}
