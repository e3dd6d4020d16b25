//! Execution of one generation attempt over an abstract channel.
//!
//! Mode runners describe what each node sends and which one-bit findings it
//! broadcasts. The [`Engine`] computes every send and every bit from the
//! sending node's own view, hands it to a [`Channel`], and records what the
//! channel reports as delivered or agreed. The live simulator and the
//! diagnosis replay are two channels over the same runner code.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::capgraph::{NetworkSpec, NodeId};
use crate::rbcast::{Tag, TagKind, NODES};
use crate::rscode::{check_consistency, solve, CodedPacket, Consistency, DataValue, Registry, Slot, Symbol};

pub type Link = (NodeId, NodeId);

/// Static parameters shared by all nodes.
#[derive(Debug, Clone)]
pub struct Params {
    pub net: NetworkSpec,
    /// Packets per generation.
    pub r: usize,
    /// Symbols per packet.
    pub l: usize,
    pub registry: Registry,
}

impl Params {
    pub fn new(net: NetworkSpec, r: usize, l: usize) -> Result<Self, crate::rscode::CodeError> {
        let registry = Registry::new(&net)?;
        Ok(Params { net, r, l, registry })
    }

    pub fn cap(&self, link: Link) -> u64 {
        self.net.cap(link.0, link.1)
    }

    pub fn alpha(&self, slot: Slot) -> Symbol {
        self.registry.point(slot.sender, slot.receiver, slot.index).alpha
    }
}

/// Packets received on one link in one data step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub step: u16,
    pub link: Link,
    pub slots: Vec<Slot>,
    pub payloads: Vec<Option<Vec<Symbol>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeView {
    pub input: DataValue,
    /// A value reconstructed from received packets, used in place of the input.
    pub derived: Option<DataValue>,
    pub received: Vec<Batch>,
}

impl NodeView {
    pub fn new(input: DataValue) -> Self {
        NodeView {
            input,
            derived: None,
            received: Vec::new(),
        }
    }

    pub fn value(&self, val: Val) -> Option<&DataValue> {
        match val {
            Val::Input => Some(&self.input),
            Val::Derived => self.derived.as_ref(),
        }
    }

    fn payload(&self, link: Link, slot: Slot) -> Option<&Vec<Symbol>> {
        self.received
            .iter()
            .filter(|b| b.link == link)
            .flat_map(|b| b.slots.iter().zip(&b.payloads))
            .find(|(s, _)| **s == slot)
            .and_then(|(_, p)| p.as_ref())
    }

    /// All packets received on `group`, or `None` if any scheduled packet is
    /// missing or two copies of one slot disagree.
    pub fn gather(&self, params: &Params, group: &[Link]) -> Option<Vec<CodedPacket>> {
        let mut seen: HashMap<Slot, usize> = HashMap::new();
        let mut out: Vec<CodedPacket> = Vec::new();
        for b in self.received.iter().filter(|b| group.contains(&b.link)) {
            for (slot, payload) in b.slots.iter().zip(&b.payloads) {
                let payload = payload.as_ref()?;
                if payload.len() != params.l {
                    return None;
                }
                if let Some(&i) = seen.get(slot) {
                    if out[i].payload != *payload {
                        return None;
                    }
                    continue;
                }
                seen.insert(*slot, out.len());
                out.push(CodedPacket {
                    generation: self.input.generation,
                    point: params.registry.point(slot.sender, slot.receiver, slot.index),
                    payload: payload.clone(),
                });
            }
        }
        Some(out)
    }
}

/// Which value a node uses for its own packets or comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Input,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendOp {
    /// Fill the unused capacity of `from -> to` with packets coded from the
    /// sender's value. Skipped if the link already carries such packets.
    Own { from: NodeId, to: NodeId, val: Val },
    /// Relay packets `via` received on `sources` to `to`, in schedule order,
    /// as many as the remaining capacity allows.
    Forward {
        via: NodeId,
        sources: Vec<Link>,
        to: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BitReq {
    /// Every packet received on `group` matches the node's value.
    Verify { group: Vec<Link>, val: Val },
    /// The packets on `group` have a unique solution. With `solvable`, at
    /// least `R` packets are also required.
    Consistent { group: Vec<Link>, solvable: bool },
}

impl BitReq {
    fn kind(&self) -> TagKind {
        match self {
            BitReq::Verify { .. } => TagKind::Equality,
            BitReq::Consistent { .. } => TagKind::Consistency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreedBit {
    pub tag: Tag,
    pub sender: NodeId,
    pub bit: bool,
}

/// Delivery semantics for data packets and one-bit broadcasts.
pub trait Channel {
    /// `intended` is what the sender's logic produces for each slot. Returns
    /// what the receiver records.
    fn deliver(
        &mut self,
        step: u16,
        link: Link,
        slots: &[Slot],
        alphas: &[Symbol],
        intended: Vec<Option<Vec<Symbol>>>,
    ) -> Vec<Option<Vec<Symbol>>>;

    /// Reliably broadcast the sender's bit and return the agreed value.
    fn agree(&mut self, tag: Tag, sender: NodeId, intended: bool) -> bool;
}

/// What a node outputs for the generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decide {
    Input,
    Derived,
    /// Solution of the packets received on a group, which must be consistent.
    Solve(Vec<Link>),
    Default,
    /// No output (the identified node).
    Abstain,
}

pub struct Engine<'p, C: Channel> {
    pub params: &'p Params,
    pub views: Vec<NodeView>,
    pub chan: C,
    /// Slots scheduled on each link so far in this attempt.
    pub schedule: [[Vec<Slot>; NODES]; NODES],
    own_sent: [[bool; NODES]; NODES],
    step: u16,
    seq: u16,
    pub transcript: Vec<AgreedBit>,
    /// Testing hook: role D skips its consistency checks.
    pub skip_d_consistency: bool,
    /// Node whose consistency checks always pass (set from the hook above).
    pub(crate) lax_node: Option<NodeId>,
}

impl<'p, C: Channel> Engine<'p, C> {
    pub fn new(params: &'p Params, inputs: Vec<DataValue>, chan: C) -> Self {
        assert_eq!(inputs.len(), NODES);
        Engine {
            params,
            views: inputs.into_iter().map(NodeView::new).collect(),
            chan,
            schedule: Default::default(),
            own_sent: [[false; NODES]; NODES],
            step: 0,
            seq: 0,
            transcript: Vec::new(),
            skip_d_consistency: false,
            lax_node: None,
        }
    }

    fn remaining(&self, link: Link) -> u64 {
        self.params.cap(link) - self.schedule[link.0][link.1].len() as u64
    }

    /// Run one synchronous data step: all sends are computed from the views
    /// as they stood before the step, then delivered.
    pub fn data_step(&mut self, ops: &[SendOp]) {
        let mut outgoing: Vec<(Link, Vec<Slot>, Vec<Option<Vec<Symbol>>>)> = Vec::new();
        for op in ops {
            match *op {
                SendOp::Own { from, to, val } => {
                    if self.own_sent[from][to] {
                        continue;
                    }
                    let used = self.schedule[from][to].len() as u32;
                    let slots: Vec<Slot> = (used..self.params.cap((from, to)) as u32)
                        .map(|index| Slot {
                            sender: from,
                            receiver: to,
                            index,
                        })
                        .collect();
                    let value = self.views[from].value(val);
                    let payloads = slots
                        .iter()
                        .map(|&s| value.map(|v| v.evaluate(self.params.alpha(s))))
                        .collect();
                    self.own_sent[from][to] = true;
                    outgoing.push(((from, to), slots, payloads));
                }
                SendOp::Forward { via, ref sources, to } => {
                    let room = self.remaining((via, to)) as usize;
                    let mut chosen = Vec::new();
                    for &src in sources {
                        for &slot in &self.schedule[src.0][src.1] {
                            if chosen.len() < room {
                                chosen.push((src, slot));
                            }
                        }
                    }
                    let view = &self.views[via];
                    let payloads = chosen.iter().map(|&(src, s)| view.payload(src, s).cloned()).collect();
                    outgoing.push(((via, to), chosen.into_iter().map(|(_, s)| s).collect(), payloads));
                }
            }
        }
        let step = self.step;
        self.step += 1;
        for (link, slots, intended) in outgoing {
            if slots.is_empty() {
                continue;
            }
            assert!(
                self.remaining(link) >= slots.len() as u64,
                "schedule exceeds capacity of link {link:?}"
            );
            let alphas: Vec<Symbol> = slots.iter().map(|&s| self.params.alpha(s)).collect();
            let payloads = self.chan.deliver(step, link, &slots, &alphas, intended);
            self.schedule[link.0][link.1].extend_from_slice(&slots);
            self.views[link.1].received.push(Batch {
                step,
                link,
                slots,
                payloads,
            });
        }
    }

    pub fn local_bit(&self, node: NodeId, req: &BitReq) -> bool {
        let view = &self.views[node];
        match req {
            BitReq::Verify { group, val } => match (view.gather(self.params, group), view.value(*val)) {
                (Some(pk), Some(v)) => pk.iter().all(|p| v.evaluate(p.point.alpha) == p.payload),
                _ => false,
            },
            BitReq::Consistent { .. } if self.lax_node == Some(node) => true,
            BitReq::Consistent { group, solvable } => match view.gather(self.params, group) {
                None => false,
                Some(pk) if pk.len() < self.params.r => !solvable,
                Some(pk) => check_consistency(&pk, self.params.r).is_ok_and(|c| c.is_consistent()),
            },
        }
    }

    /// Each node broadcasts its finding; returns the agreed bits in order.
    pub fn bits(&mut self, reqs: &[(NodeId, BitReq)]) -> Vec<bool> {
        reqs.iter()
            .map(|(node, req)| {
                let intended = self.local_bit(*node, req);
                let tag = Tag {
                    kind: req.kind(),
                    seq: self.seq,
                };
                self.seq += 1;
                let bit = self.chan.agree(tag, *node, intended);
                self.transcript.push(AgreedBit {
                    tag,
                    sender: *node,
                    bit,
                });
                bit
            })
            .collect()
    }

    /// Set `node`'s derived value to the solution of `group`, if it has one.
    pub fn derive(&mut self, node: NodeId, group: &[Link]) {
        self.views[node].derived = self.solve_group(node, group);
    }

    fn solve_group(&self, node: NodeId, group: &[Link]) -> Option<DataValue> {
        let pk = self.views[node].gather(self.params, group)?;
        match check_consistency(&pk, self.params.r) {
            Ok(Consistency::Consistent(d)) => Some(d),
            _ => None,
        }
    }

    /// Solve without checking the packets beyond the first `R`.
    fn solve_unchecked(&self, node: NodeId, group: &[Link]) -> Option<DataValue> {
        let pk = self.views[node].gather(self.params, group)?;
        solve(&pk, self.params.r).ok()
    }

    pub fn decide(&self, node: NodeId, how: &Decide) -> Output {
        match how {
            Decide::Input => Output::Value(self.views[node].input.clone()),
            Decide::Derived => self.views[node]
                .derived
                .clone()
                .map_or(Output::Undecided, Output::Value),
            Decide::Solve(group) => {
                let v = if self.lax_node != Some(node) {
                    self.solve_group(node, group)
                } else {
                    self.solve_unchecked(node, group)
                };
                v.map_or(Output::Undecided, Output::Value)
            }
            Decide::Default => Output::Default,
            Decide::Abstain => Output::Undecided,
        }
    }

    /// Packets scheduled per link in this attempt.
    pub fn link_usage(&self) -> [[u64; NODES]; NODES] {
        let mut out = [[0; NODES]; NODES];
        for (i, row) in self.schedule.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                out[i][j] = s.len() as u64;
            }
        }
        out
    }
}

/// A node's output for one generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Value(DataValue),
    Default,
    /// The node could not produce a value (only possible at a faulty node
    /// or in the identified node's slot).
    Undecided,
}

impl Output {
    pub fn resolve(&self, r: usize, l: usize, generation: u64) -> Option<DataValue> {
        match self {
            Output::Value(v) => Some(v.clone()),
            Output::Default => Some(DataValue::zeros(generation, r, l)),
            Output::Undecided => None,
        }
    }
}
