//! Capacity upper bound of a 4-node network, with the twelve terms.

use byzcap::capgraph::{capacity_upper_bound, four_node_terms, node_name, select_check_triple, NetworkSpec};

fn main() -> anyhow::Result<()> {
    // AB and BC doubled
    let net = NetworkSpec::new(
        4,
        1,
        vec![vec![0, 2, 1, 1], vec![2, 0, 2, 1], vec![1, 2, 0, 1], vec![1, 1, 1, 0]],
    )?;
    let rep = capacity_upper_bound(&net)?;
    println!(
        "I* = {} (S = {}, gamma = {})",
        rep.i_star, rep.witness_s, rep.witness_gamma
    );
    for (to, x, y, sum) in four_node_terms(&net)? {
        println!(
            "  {}{} + {}{} = {sum}",
            node_name(x),
            node_name(to),
            node_name(y),
            node_name(to)
        );
    }
    let r = rep.i_star - 1;
    let (x, y, z) = select_check_triple(&net, r)?;
    println!(
        "at R = {r}: check {}{} and {}{} directly",
        node_name(x),
        node_name(y),
        node_name(y),
        node_name(z)
    );
    Ok(())
}
