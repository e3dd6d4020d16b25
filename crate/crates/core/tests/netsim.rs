use byzcap::capgraph::NetworkSpec;
use byzcap::netsim::adversary::partition_candidates;
use byzcap::netsim::*;
use byzcap::protocol::{DiagnosisOutcome, Mode};
use byzcap::rbcast::TagKind;
use byzcap::rscode::{CodedPacket, EvalPoint, Slot, Symbol};

fn scenario(net: NetworkSpec, r: usize, c: usize, generations: u64) -> Scenario {
    Scenario {
        network: net,
        rate: RateConfig {
            packets: r,
            packet_bits: c,
        },
        generations,
        input_pattern: InputPattern::AllEqual,
        adversary: AdversaryStrategy::none(),
        seed: 7,
        traffic_log: false,
    }
}

fn data_msg(from: usize, to: usize, payload: Vec<u16>) -> RoundMessage {
    RoundMessage {
        generation: 0,
        attempt: 0,
        phase: 0,
        from,
        to,
        kind: MessageKind::Data(CodedPacket {
            generation: 0,
            point: EvalPoint {
                alpha: Symbol(5),
                slot: Slot {
                    sender: from,
                    receiver: to,
                    index: 0,
                },
            },
            payload: payload.into_iter().map(Symbol).collect(),
        }),
    }
}

fn payload(m: &RoundMessage) -> &[Symbol] {
    match &m.kind {
        MessageKind::Data(p) => &p.payload,
        _ => panic!("not data"),
    }
}

#[test]
fn honest_round_is_verbatim() {
    let net = NetworkSpec::uniform(4, 1, 1);
    let mut adv = AdversaryRuntime::new(AdversaryStrategy::none(), &net, 0).unwrap();
    let mut meter = LinkMeter::default();
    let mut log = Vec::new();
    let sent = vec![data_msg(0, 1, vec![1, 2]), data_msg(3, 0, vec![3, 4])];
    let got = deliver_round(sent.clone(), &mut adv, &mut meter, Some(&mut log));
    assert_eq!(got, sent);
    assert_eq!(log, sent);
    assert_eq!(
        (meter.data_packets[0][1], meter.data_packets[3][0], meter.total_data()),
        (1, 1, 2)
    );
}

#[test]
fn corrupt_payload_changes_one_symbol() {
    let net = NetworkSpec::uniform(4, 1, 1);
    let strat = AdversaryStrategy::new(
        3,
        Behavior::CorruptPayload {
            targets: vec![0],
            positions: vec![0],
        },
    );
    let mut adv = AdversaryRuntime::new(strat, &net, 11).unwrap();
    let mut meter = LinkMeter::default();
    let sent = vec![data_msg(3, 0, vec![10, 20, 30]), data_msg(3, 1, vec![10, 20, 30])];
    let got = deliver_round(sent.clone(), &mut adv, &mut meter, None);
    let diff: Vec<usize> = (0..3)
        .filter(|&k| payload(&got[0])[k] != payload(&sent[0])[k])
        .collect();
    assert_eq!(diff, vec![0]);
    assert_eq!(got[1], sent[1], "link D->B is not targeted");
}

#[test]
fn crash_silences_the_node() {
    let net = NetworkSpec::uniform(4, 1, 1);
    let strat = AdversaryStrategy::new(2, Behavior::Crash { from_generation: 1 });
    let mut adv = AdversaryRuntime::new(strat, &net, 0).unwrap();
    let mut meter = LinkMeter::default();
    let round = || vec![data_msg(2, 0, vec![1]), data_msg(1, 2, vec![1])];
    adv.begin_generation(0, 1, 1);
    assert_eq!(deliver_round(round(), &mut adv, &mut meter, None).len(), 2);
    for g in 1..4 {
        adv.begin_generation(g, 1, 1);
        let got = deliver_round(round(), &mut adv, &mut meter, None);
        assert!(got.iter().all(|m| m.from != 2));
        assert_eq!(got.len(), 1);
    }
}

#[test]
fn runs_are_deterministic() {
    let mut s = scenario(NetworkSpec::uniform(4, 1, 3), 4, 32, 20);
    s.input_pattern = InputPattern::AllRandom;
    s.adversary = AdversaryStrategy::new(1, Behavior::RandomByzantine { seed: 3 });
    s.traffic_log = true;
    let a = serde_json::to_vec(&run_execution(&s, RunOptions::default()).unwrap()).unwrap();
    let b = serde_json::to_vec(&run_execution(&s, RunOptions::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn all_ones_rate_is_half_of_bound() {
    let rep = run_execution(
        &scenario(NetworkSpec::uniform(4, 1, 1), 1, 64, 100),
        RunOptions::default(),
    )
    .unwrap();
    let decided = rep
        .records
        .iter()
        .filter(|r| r.outcome == AttemptOutcome::Decided)
        .count();
    assert_eq!(decided, 100);
    assert_eq!(rep.totals.rate, 64.0);
    assert_eq!(rep.totals.ratio, 0.5);
    assert_eq!((rep.failures_detected, rep.final_mode), (0, Mode::Undetected2Eq));
}

#[test]
fn scaled_net_reaches_095() {
    let net = NetworkSpec::uniform(4, 1, 1).scaled(10);
    let rep = run_execution(&scenario(net.clone(), 19, 16, 30), RunOptions::default()).unwrap();
    assert_eq!(rep.totals.i_star, 20);
    assert_eq!(rep.totals.ratio, 0.95);
    for rec in &rep.records {
        for i in 0..4 {
            for j in 0..4 {
                assert!(rec.link_data_packets[i][j] <= net.cap(i, j));
            }
        }
    }
}

#[test]
fn partition_mimic_at_d_is_diagnosed() {
    let net = NetworkSpec::uniform(4, 1, 2);
    let side = [PartitionSide::S, PartitionSide::X]
        .into_iter()
        .find(|&s| partition_candidates(&net, s).unwrap().contains(&3))
        .unwrap();
    let mut s = scenario(net, 3, 32, 20);
    s.adversary = AdversaryStrategy::new(3, Behavior::PartitionMimic { side });
    let rep = run_execution(&s, RunOptions::default()).unwrap();
    assert!(rep.failures_detected >= 1);
    let first = rep.records.iter().find_map(|r| r.diagnosis.as_ref()).unwrap();
    assert!(first.outcome.accused().contains(&3));
    assert!(matches!(rep.final_mode, Mode::Detected | Mode::Identified));
    assert!(rep.final_suspects.contains(&3));
    let last = rep.records.last().unwrap();
    assert_eq!((last.generation, last.outcome), (19, AttemptOutcome::Decided));
}

#[test]
fn lying_node_ends_up_identified() {
    let mut s = scenario(NetworkSpec::uniform(4, 1, 2), 2, 16, 10);
    s.adversary = AdversaryStrategy::new(
        2,
        Behavior::LieNotifications {
            tags: vec![TagKind::Consistency],
        },
    );
    let rep = run_execution(&s, RunOptions::default()).unwrap();
    let accused: Vec<DiagnosisOutcome> = rep
        .records
        .iter()
        .filter_map(|r| r.diagnosis.clone())
        .map(|d| d.outcome)
        .collect();
    assert!(!accused.is_empty());
    assert!(accused.iter().all(|o| o.accused().contains(&2)));
    assert_eq!(rep.final_suspects, vec![2]);
}

#[test]
fn no_adversary_stays_undetected() {
    for seed in 0..10 {
        let mut s = scenario(NetworkSpec::uniform(4, 1, 4), 7, 16, 15);
        s.seed = seed;
        let rep = run_execution(&s, RunOptions::default()).unwrap();
        assert_eq!((rep.failures_detected, rep.aborted_attempts), (0, 0));
        assert_eq!(rep.final_mode, Mode::Undetected2Eq);
    }
}

#[test]
fn overhead_shrinks_with_packet_size() {
    let small = run_execution(
        &scenario(NetworkSpec::uniform(4, 1, 2), 3, 16, 10),
        RunOptions::default(),
    )
    .unwrap();
    let large = run_execution(
        &scenario(NetworkSpec::uniform(4, 1, 2), 3, 4096, 10),
        RunOptions::default(),
    )
    .unwrap();
    assert_eq!(small.totals.control_bits, large.totals.control_bits);
    assert!(large.totals.overhead_fraction < small.totals.overhead_fraction);
    assert_eq!(large.overhead_fraction(4096), large.totals.overhead_fraction);

    let empty = run_execution(
        &scenario(NetworkSpec::uniform(4, 1, 2), 3, 16, 0),
        RunOptions::default(),
    )
    .unwrap();
    assert_eq!(overhead_fraction(&empty, 16), 0.0);
    assert_eq!(empty.totals.rate, 0.0);
}

#[test]
fn traffic_log_records_both_planes() {
    let mut s = scenario(NetworkSpec::uniform(4, 1, 1), 1, 16, 2);
    s.traffic_log = true;
    let rep = run_execution(&s, RunOptions::default()).unwrap();
    let data = rep
        .traffic
        .iter()
        .filter(|m| matches!(m.kind, MessageKind::Data(_)))
        .count() as u64;
    let control: u64 = rep
        .traffic
        .iter()
        .filter_map(|m| match m.kind {
            MessageKind::Control { bits, .. } => Some(bits),
            _ => None,
        })
        .sum();
    assert_eq!(data, rep.totals.data_packets);
    assert_eq!(control, rep.totals.control_bits);
}

#[test]
fn invalid_scenarios_are_config_errors() {
    let too_fast = scenario(NetworkSpec::uniform(4, 1, 1), 2, 16, 1);
    assert!(matches!(
        run_execution(&too_fast, RunOptions::default()),
        Err(SimError::Config(_))
    ));
    let mut odd_bits = scenario(NetworkSpec::uniform(4, 1, 1), 1, 24, 1);
    assert!(matches!(validate_scenario(&odd_bits), Err(SimError::Config(_))));
    odd_bits.rate.packet_bits = 16;
    odd_bits.adversary = AdversaryStrategy::new(9, Behavior::Crash { from_generation: 0 });
    assert!(matches!(
        run_execution(&odd_bits, RunOptions::default()),
        Err(SimError::Config(_))
    ));
    let mut sparse = NetworkSpec::uniform(4, 1, 3);
    sparse.cap[0][1] = 0;
    assert!(validate_scenario(&scenario(sparse, 1, 16, 1)).is_err());
}

#[test]
fn scenario_json_round_trips() {
    let mut s = scenario(NetworkSpec::uniform(4, 1, 2), 3, 48, 5);
    s.input_pattern = InputPattern::OneDiffers { node: 2 };
    s.adversary = AdversaryStrategy::new(
        1,
        Behavior::LieNotifications {
            tags: vec![TagKind::Equality, TagKind::Claim],
        },
    );
    let text = serde_json::to_string(&s).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}

/// Catalog sweep over several nets and every rate below the bound.
#[test]
fn adversary_sweep() {
    let behaviors = |f: usize| {
        vec![
            Behavior::None,
            Behavior::Crash { from_generation: 3 },
            Behavior::CorruptPayload {
                targets: vec![(f + 1) % 4],
                positions: vec![0],
            },
            Behavior::CorruptPayload {
                targets: vec![(f + 1) % 4, (f + 2) % 4],
                positions: vec![0],
            },
            Behavior::EquivocateInput {
                targets: vec![(f + 1) % 4],
            },
            Behavior::LieNotifications {
                tags: vec![TagKind::Equality],
            },
            Behavior::LieNotifications {
                tags: vec![TagKind::Consistency, TagKind::Claim],
            },
            Behavior::RandomByzantine { seed: 9 },
        ]
    };
    let nets = vec![
        NetworkSpec::uniform(4, 1, 1),
        NetworkSpec::uniform(4, 1, 3),
        NetworkSpec::new(
            4,
            1,
            vec![vec![0, 6, 2, 2], vec![5, 0, 5, 5], vec![4, 6, 0, 5], vec![3, 1, 5, 0]],
        )
        .unwrap(),
    ];
    let (mut runs, mut failures) = (0, 0);
    for net in nets {
        let bound = byzcap::capgraph::four_node_bound(&net).unwrap() as usize;
        for r in 1..bound {
            for f in 0..4 {
                for b in behaviors(f) {
                    for pat in [
                        InputPattern::AllEqual,
                        InputPattern::OneDiffers { node: f },
                        InputPattern::OneDiffers { node: (f + 1) % 4 },
                        InputPattern::AllRandom,
                    ] {
                        for seed in 0..2 {
                            let mut s = scenario(net.clone(), r, 32, 12);
                            s.input_pattern = pat.clone();
                            s.adversary = AdversaryStrategy::new(f, b.clone());
                            s.seed = seed;
                            runs += 1;
                            match run_execution(&s, RunOptions::default()) {
                                Ok(rep) => failures += rep.failures_detected,
                                Err(e) => panic!("{e}\n{}", serde_json::to_string(&s).unwrap()),
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(runs > 1000);
    assert!(failures > 0);
}
