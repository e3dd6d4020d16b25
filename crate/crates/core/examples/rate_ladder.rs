//! Scale the all-ones network and run just below the bound.

use byzcap::capgraph::NetworkSpec;
use byzcap::netsim::{run_execution, AdversaryStrategy, InputPattern, RateConfig, RunOptions, Scenario};

fn main() -> anyhow::Result<()> {
    for k in [1, 2, 5, 10, 50] {
        let r = 2 * k - 1;
        let s = Scenario {
            network: NetworkSpec::uniform(4, 1, 1).scaled(k),
            rate: RateConfig {
                packets: r as usize,
                packet_bits: 256,
            },
            generations: 10,
            input_pattern: InputPattern::AllEqual,
            adversary: AdversaryStrategy::none(),
            seed: k,
            traffic_log: false,
        };
        let rep = run_execution(&s, RunOptions::default())?;
        println!(
            "k = {k:>2}  I* = {:>3}  R = {r:>3}  ratio = {:.4}  overhead = {:.4}",
            rep.totals.i_star, rep.totals.ratio, rep.totals.overhead_fraction
        );
    }
    Ok(())
}
