//! Fault-free run on the all-ones network at R = 1.

use byzcap::capgraph::NetworkSpec;
use byzcap::netsim::{run_execution, AdversaryStrategy, InputPattern, RateConfig, RunOptions, Scenario};

fn main() -> anyhow::Result<()> {
    let scenario = Scenario {
        network: NetworkSpec::uniform(4, 1, 1),
        rate: RateConfig {
            packets: 1,
            packet_bits: 1024,
        },
        generations: 100,
        input_pattern: InputPattern::AllEqual,
        adversary: AdversaryStrategy::none(),
        seed: 42,
        traffic_log: false,
    };
    let rep = run_execution(&scenario, RunOptions::default())?;
    let t = &rep.totals;
    println!("b(t) = {} bits over {} units", t.b_t_bits, t.t_generations);
    println!("rate {} bits/unit, I*c = {}, ratio {}", t.rate, t.i_star_bits, t.ratio);
    println!("overhead {:.4}, final mode {}", t.overhead_fraction, rep.final_mode);
    Ok(())
}
