//! One bit broadcast among four nodes while node 3 tells everyone something different.

use byzcap::capgraph::NodeId;
use byzcap::rbcast::{broadcast_cost_bits, reliable_broadcast, FaultHook};

struct TwoFaced;

impl FaultHook for TwoFaced {
    fn initial(&mut self, to: NodeId, bits: &[bool]) -> Option<Vec<bool>> {
        Some(bits.iter().map(|b| b ^ (to == 1)).collect())
    }
    fn relay(&mut self, _sender: NodeId, to: NodeId, heard: &[bool]) -> Option<Vec<bool>> {
        (to != 0).then(|| heard.iter().map(|b| !b).collect())
    }
}

fn main() {
    for sender in [0, 3] {
        let out = reliable_broadcast(sender, &[true], Some((3, &mut TwoFaced)));
        let total: u64 = out.link_bits.iter().flatten().sum();
        println!(
            "sender {sender}: decisions {:?}, {total} bits on the wire",
            out.decisions
        );
    }
    println!("per-link cost of one broadcast bit: {}", broadcast_cost_bits());
}
