//! Each adversary behavior against the same network and inputs.

use byzcap::capgraph::NetworkSpec;
use byzcap::netsim::adversary::partition_candidates;
use byzcap::netsim::{
    run_execution, AdversaryStrategy, Behavior, InputPattern, PartitionSide, RateConfig, RunOptions, Scenario,
};
use byzcap::rbcast::TagKind;

fn main() -> anyhow::Result<()> {
    let net = NetworkSpec::uniform(4, 1, 3);
    let mimic = partition_candidates(&net, PartitionSide::S)?[0];
    let strategies = vec![
        AdversaryStrategy::none(),
        AdversaryStrategy::new(1, Behavior::Crash { from_generation: 2 }),
        AdversaryStrategy::new(
            3,
            Behavior::CorruptPayload {
                targets: vec![0, 2],
                positions: vec![0],
            },
        ),
        AdversaryStrategy::new(0, Behavior::EquivocateInput { targets: vec![2] }),
        AdversaryStrategy::new(
            2,
            Behavior::LieNotifications {
                tags: vec![TagKind::Equality],
            },
        ),
        AdversaryStrategy::new(mimic, Behavior::PartitionMimic { side: PartitionSide::S }),
        AdversaryStrategy::new(1, Behavior::RandomByzantine { seed: 5 }),
    ];
    println!(
        "{:<18} {:>6} {:>8} {:>8} {:>10}  final",
        "behavior", "faulty", "failures", "aborted", "ratio"
    );
    for adversary in strategies {
        let s = Scenario {
            network: net.clone(),
            rate: RateConfig {
                packets: 5,
                packet_bits: 64,
            },
            generations: 30,
            input_pattern: InputPattern::AllEqual,
            adversary: adversary.clone(),
            seed: 9,
            traffic_log: false,
        };
        let rep = run_execution(&s, RunOptions::default())?;
        println!(
            "{:<18} {:>6} {:>8} {:>8} {:>10.4}  {} {:?}",
            adversary.behavior.name(),
            adversary.faulty_node.map_or("-".into(), |f| f.to_string()),
            rep.failures_detected,
            rep.aborted_attempts,
            rep.totals.ratio,
            rep.final_mode,
            rep.final_suspects
        );
    }
    Ok(())
}
