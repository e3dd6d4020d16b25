//! Fuzz random scenarios, then the same seeds with D's checks switched off.

use byzcap::cli::cmd_fuzz;
use byzcap::netsim::RunOptions;

fn main() -> anyhow::Result<()> {
    let trials = std::env::args().nth(1).map_or(Ok(300), |a| a.parse())?;
    let clean = cmd_fuzz(trials, 1, RunOptions::default())?;
    println!("honest protocol: {}/{} passed", clean.passed, clean.trials);
    let mutant = cmd_fuzz(
        trials,
        1,
        RunOptions {
            skip_d_consistency: true,
        },
    )?;
    println!("mutant: {}/{} passed", mutant.passed, mutant.trials);
    if let Some(first) = mutant.violations.first() {
        println!("first counterexample, trial {}: {}", first.trial, first.violation);
    }
    Ok(())
}
