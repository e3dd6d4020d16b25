//! A node that corrupts what it relays is caught and isolated.

use byzcap::capgraph::NetworkSpec;
use byzcap::netsim::{run_execution, AdversaryStrategy, Behavior, InputPattern, RateConfig, RunOptions, Scenario};

fn main() -> anyhow::Result<()> {
    let s = Scenario {
        network: NetworkSpec::uniform(4, 1, 2),
        rate: RateConfig {
            packets: 3,
            packet_bits: 32,
        },
        generations: 6,
        input_pattern: InputPattern::AllEqual,
        adversary: AdversaryStrategy::new(
            3,
            Behavior::CorruptPayload {
                targets: vec![0],
                positions: vec![1],
            },
        ),
        seed: 3,
        traffic_log: false,
    };
    let rep = run_execution(&s, RunOptions::default())?;
    for rec in &rep.records {
        print!(
            "gen {} attempt {} [{}] {:?}",
            rec.generation, rec.attempt, rec.mode, rec.outcome
        );
        if let Some(d) = &rec.diagnosis {
            print!("  disputes {:?} -> {:?}", d.disputes, d.outcome);
        }
        println!();
    }
    println!("final: {} {:?}", rep.final_mode, rep.final_suspects);
    Ok(())
}
