//! Error-free reliable broadcast for four nodes tolerating one Byzantine node.
//!
//! Two-round exponential information gathering: the sender transmits its
//! bits to the three receivers, each receiver relays what it heard to the
//! other two, and every receiver takes a per-bit majority of the three
//! values it holds. Payloads are bit-vectors; each position behaves like an
//! independent one-bit instance.

use serde::{Deserialize, Serialize};

use crate::capgraph::NodeId;

pub const NODES: usize = 4;

/// What a notification is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    /// "my received packets match my value"
    Equality,
    /// "my received packets have a unique solution"
    Consistency,
    /// diagnosis claims
    Claim,
}

/// Purpose label of one broadcast within a generation attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub kind: TagKind,
    pub seq: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub sender: NodeId,
    pub tag: Tag,
    pub bit: bool,
    pub generation: u64,
}

/// Overrides for the faulty node's outgoing broadcast messages.
/// `None` means nothing is sent on that link.
pub trait FaultHook {
    /// Round 1, faulty node is the sender.
    fn initial(&mut self, to: NodeId, bits: &[bool]) -> Option<Vec<bool>>;
    /// Round 2, faulty node relays what it heard from `sender`.
    fn relay(&mut self, sender: NodeId, to: NodeId, heard: &[bool]) -> Option<Vec<bool>>;
}

/// A hook that behaves honestly.
pub struct Honest;

impl FaultHook for Honest {
    fn initial(&mut self, _to: NodeId, bits: &[bool]) -> Option<Vec<bool>> {
        Some(bits.to_vec())
    }
    fn relay(&mut self, _sender: NodeId, _to: NodeId, heard: &[bool]) -> Option<Vec<bool>> {
        Some(heard.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastOutcome {
    /// Decided bits per node; `None` at the faulty node.
    pub decisions: [Option<Vec<bool>>; NODES],
    /// Control bits actually transmitted per link.
    pub link_bits: [[u64; NODES]; NODES],
}

impl BroadcastOutcome {
    /// The value decided by the fault-free nodes.
    pub fn agreed(&self) -> &[bool] {
        self.decisions
            .iter()
            .flatten()
            .next()
            .expect("at least three fault-free nodes")
    }
}

/// Control bits used per link by one broadcast of a single bit.
pub fn broadcast_cost_bits() -> u64 {
    1
}

fn fit(mut v: Vec<bool>, len: usize) -> Vec<bool> {
    v.resize(len, false);
    v
}

/// Broadcast `bits` from `sender`. `faulty` names at most one misbehaving
/// node together with the hook that controls its outgoing messages.
pub fn reliable_broadcast(
    sender: NodeId,
    bits: &[bool],
    mut faulty: Option<(NodeId, &mut dyn FaultHook)>,
) -> BroadcastOutcome {
    assert!(sender < NODES);
    let len = bits.len();
    let width = len as u64;
    let mut link_bits = [[0u64; NODES]; NODES];
    let receivers: Vec<NodeId> = (0..NODES).filter(|&v| v != sender).collect();

    // heard[i]: what receiver i got directly from the sender
    let mut heard: [Option<Vec<bool>>; NODES] = Default::default();
    for &to in &receivers {
        let msg = match faulty.as_mut() {
            Some((f, hook)) if *f == sender => hook.initial(to, bits),
            _ => Some(bits.to_vec()),
        };
        if let Some(m) = msg {
            link_bits[sender][to] += width;
            heard[to] = Some(fit(m, len));
        }
    }

    // relayed[to][from]
    let mut relayed: [[Option<Vec<bool>>; NODES]; NODES] = Default::default();
    for &from in &receivers {
        let own = heard[from].clone().unwrap_or_else(|| vec![false; len]);
        for &to in receivers.iter().filter(|&&t| t != from) {
            let msg = match faulty.as_mut() {
                Some((f, hook)) if *f == from => hook.relay(sender, to, &own),
                _ => heard[from].clone(),
            };
            if let Some(m) = msg {
                link_bits[from][to] += width;
                relayed[to][from] = Some(fit(m, len));
            }
        }
    }

    let faulty_node = faulty.map(|(f, _)| f);
    let mut decisions: [Option<Vec<bool>>; NODES] = Default::default();
    for v in 0..NODES {
        if Some(v) == faulty_node {
            continue;
        }
        if v == sender {
            decisions[v] = Some(bits.to_vec());
            continue;
        }
        let zeros = vec![false; len];
        let mut votes: Vec<&[bool]> = vec![heard[v].as_deref().unwrap_or(&zeros)];
        for &from in receivers.iter().filter(|&&u| u != v) {
            votes.push(relayed[v][from].as_deref().unwrap_or(&zeros));
        }
        decisions[v] = Some(
            (0..len)
                .map(|k| votes.iter().filter(|b| b[k]).count() * 2 > votes.len())
                .collect(),
        );
    }
    BroadcastOutcome { decisions, link_bits }
}
