use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MessageKind, RoundMessage, SimError};
use crate::capgraph::{capacity_upper_bound, NetworkSpec, NodeId};
use crate::rbcast::{FaultHook, TagKind};
use crate::rscode::{DataValue, Symbol};

/// Which side of the bound's witness cut the faulty node imitates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSide {
    /// Faulty node is in `S` and cuts itself off from the rest outside `gamma`.
    S,
    /// Faulty node is outside `S` and cuts itself off from `S`.
    X,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    None,
    Crash {
        #[serde(default)]
        from_generation: u64,
    },
    CorruptPayload {
        targets: Vec<NodeId>,
        positions: Vec<usize>,
    },
    EquivocateInput {
        targets: Vec<NodeId>,
    },
    LieNotifications {
        tags: Vec<TagKind>,
    },
    PartitionMimic {
        side: PartitionSide,
    },
    RandomByzantine {
        seed: u64,
    },
}

impl Behavior {
    pub fn name(&self) -> &'static str {
        match self {
            Behavior::None => "none",
            Behavior::Crash { .. } => "crash",
            Behavior::CorruptPayload { .. } => "corrupt_payload",
            Behavior::EquivocateInput { .. } => "equivocate_input",
            Behavior::LieNotifications { .. } => "lie_notifications",
            Behavior::PartitionMimic { .. } => "partition_mimic",
            Behavior::RandomByzantine { .. } => "random_byzantine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryStrategy {
    pub faulty_node: Option<NodeId>,
    pub behavior: Behavior,
}

impl AdversaryStrategy {
    pub fn none() -> Self {
        AdversaryStrategy {
            faulty_node: None,
            behavior: Behavior::None,
        }
    }

    pub fn new(faulty: NodeId, behavior: Behavior) -> Self {
        AdversaryStrategy {
            faulty_node: Some(faulty),
            behavior,
        }
    }
}

/// The bound's witness split `(S, gamma, X)` for a network with `f = 1`.
pub fn witness_split(net: &NetworkSpec) -> Result<(Vec<NodeId>, Vec<NodeId>, Vec<NodeId>), SimError> {
    let rep = capacity_upper_bound(net).map_err(|e| SimError::Config(e.to_string()))?;
    let s = rep.witness_s.members().to_vec();
    let gamma = rep.witness_gamma.members().to_vec();
    let x = (0..net.n).filter(|v| !s.contains(v) && !gamma.contains(v)).collect();
    Ok((s, gamma, x))
}

/// Faulty node choices for which `side` is well defined.
pub fn partition_candidates(net: &NetworkSpec, side: PartitionSide) -> Result<Vec<NodeId>, SimError> {
    let (s, _, _) = witness_split(net)?;
    Ok(match side {
        PartitionSide::S => s,
        PartitionSide::X => (0..net.n).filter(|v| !s.contains(v)).collect(),
    })
}

/// Mutable state of the faulty node during an execution.
pub struct AdversaryRuntime {
    strategy: AdversaryStrategy,
    rng: ChaCha8Rng,
    cut: Vec<NodeId>,
    alt: Option<DataValue>,
    generation: u64,
}

impl AdversaryRuntime {
    pub fn new(strategy: AdversaryStrategy, net: &NetworkSpec, seed: u64) -> Result<Self, SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        let mut cut = Vec::new();
        match (&strategy.behavior, strategy.faulty_node) {
            (Behavior::None, None) => {}
            (Behavior::None, Some(_)) => {}
            (b, None) => return bad(format!("behavior {} needs a faulty_node", b.name())),
            (_, Some(f)) if f >= net.n => return bad(format!("faulty_node {f} out of range")),
            (Behavior::PartitionMimic { side }, Some(f)) => {
                let (s, _, x) = witness_split(net)?;
                match side {
                    PartitionSide::S if s.contains(&f) => cut = x,
                    PartitionSide::X if !s.contains(&f) => cut = s,
                    _ => return bad(format!("faulty node {f} is not on side {side:?} of the witness cut")),
                }
            }
            (Behavior::CorruptPayload { targets, .. } | Behavior::EquivocateInput { targets }, Some(f))
                if targets.iter().any(|&t| t >= net.n || t == f) =>
            {
                return bad("targets must be other nodes in range".into())
            }
            _ => {}
        }
        let rng = match strategy.behavior {
            Behavior::RandomByzantine { seed } => ChaCha8Rng::seed_from_u64(seed),
            _ => ChaCha8Rng::seed_from_u64(seed ^ 0x6164_7665_7273_6172),
        };
        Ok(AdversaryRuntime {
            strategy,
            rng,
            cut,
            alt: None,
            generation: 0,
        })
    }

    pub fn strategy(&self) -> &AdversaryStrategy {
        &self.strategy
    }

    pub fn faulty(&self) -> Option<NodeId> {
        match self.strategy.behavior {
            Behavior::None => None,
            _ => self.strategy.faulty_node,
        }
    }

    fn crashed(&self) -> bool {
        matches!(self.strategy.behavior, Behavior::Crash { from_generation } if self.generation >= from_generation)
    }

    pub fn begin_generation(&mut self, generation: u64, r: usize, l: usize) {
        self.generation = generation;
        if matches!(self.strategy.behavior, Behavior::EquivocateInput { .. }) {
            self.alt = Some(DataValue::random(&mut self.rng, generation, r, l));
        }
    }

    fn random_mask(&mut self) -> Symbol {
        Symbol(self.rng.gen_range(1..=u16::MAX))
    }

    /// Transform a data message sent by the faulty node; `None` drops it.
    pub fn outgoing(&mut self, mut msg: RoundMessage) -> Option<RoundMessage> {
        if self.crashed() {
            return None;
        }
        let (from, to) = (msg.from, msg.to);
        let MessageKind::Data(ref mut pkt) = msg.kind else {
            return Some(msg);
        };
        match self.strategy.behavior.clone() {
            Behavior::CorruptPayload { targets, positions } if targets.contains(&to) => {
                let l = pkt.payload.len();
                let mut hit: Vec<usize> = positions.iter().map(|p| p % l).collect();
                hit.sort_unstable();
                hit.dedup();
                if hit.is_empty() {
                    hit.push(0);
                }
                for p in hit {
                    pkt.payload[p] += self.random_mask();
                }
            }
            Behavior::EquivocateInput { targets } if targets.contains(&to) && pkt.point.slot.sender == from => {
                if let Some(alt) = &self.alt {
                    pkt.payload = alt.evaluate(pkt.point.alpha);
                }
            }
            Behavior::PartitionMimic { .. } if self.cut.contains(&to) => return None,
            Behavior::RandomByzantine { .. } => {
                let roll: f64 = self.rng.gen();
                if roll < 0.15 {
                    return None;
                }
                if roll < 0.35 {
                    let p = self.rng.gen_range(0..pkt.payload.len());
                    pkt.payload[p] += self.random_mask();
                }
            }
            _ => {}
        }
        Some(msg)
    }

    /// Whether the faulty node discards what `from` sends it.
    pub fn ignores(&self, from: NodeId) -> bool {
        matches!(self.strategy.behavior, Behavior::PartitionMimic { .. }) && self.cut.contains(&from)
    }

    /// The claim the faulty node actually broadcasts.
    pub fn claim(&mut self, mut bits: Vec<bool>) -> Vec<bool> {
        if let Behavior::RandomByzantine { .. } = self.strategy.behavior {
            if !bits.is_empty() && self.rng.gen_bool(0.3) {
                for _ in 0..self.rng.gen_range(1..=4) {
                    let k = self.rng.gen_range(0..bits.len());
                    bits[k] = !bits[k];
                }
            }
        }
        bits
    }

    /// Broadcast hook for the faulty node, for a message of kind `kind`.
    pub fn hook(&mut self, kind: TagKind) -> BitHook<'_> {
        BitHook { adv: self, kind }
    }
}

pub struct BitHook<'a> {
    adv: &'a mut AdversaryRuntime,
    kind: TagKind,
}

impl BitHook<'_> {
    fn scramble(&mut self, bits: &[bool]) -> Option<Vec<bool>> {
        let rng = &mut self.adv.rng;
        if rng.gen_bool(0.1) {
            return None;
        }
        Some(bits.iter().map(|&b| b ^ rng.gen_bool(0.2)).collect())
    }
}

impl FaultHook for BitHook<'_> {
    fn initial(&mut self, _to: NodeId, bits: &[bool]) -> Option<Vec<bool>> {
        if self.adv.crashed() {
            return None;
        }
        match &self.adv.strategy.behavior {
            Behavior::LieNotifications { tags } if tags.contains(&self.kind) => Some(bits.iter().map(|b| !b).collect()),
            Behavior::RandomByzantine { .. } => self.scramble(bits),
            _ => Some(bits.to_vec()),
        }
    }

    fn relay(&mut self, _sender: NodeId, _to: NodeId, heard: &[bool]) -> Option<Vec<bool>> {
        if self.adv.crashed() {
            return None;
        }
        match self.adv.strategy.behavior {
            Behavior::RandomByzantine { .. } => self.scramble(heard),
            _ => Some(heard.to_vec()),
        }
    }
}
