//! Failure diagnosis by replaying broadcast claims.
//!
//! After a failure, every node reliably broadcasts a fixed-length claim: its
//! input followed by every packet slot it was scheduled to receive (a
//! presence bit and the payload). All fault-free nodes then hold the same
//! claims and replay the attempt: each node's sends are recomputed from its
//! own claimed input and receipts, and compared with what the receiver
//! claims to have received. Branching follows the bits that were actually
//! agreed. A send/receive mismatch is a dispute between the two endpoints;
//! a node whose replayed finding differs from the bit it broadcast accuses
//! itself.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::engine::{AgreedBit, Channel, Engine, Link, NodeView, Params};
use super::modes::{run_attempt, AttemptEnd};
use super::{ModeState, ProtocolError};
use crate::capgraph::{NodeId, NodeSet};
use crate::rbcast::{Tag, NODES};
use crate::rscode::{push_symbol_bits, read_symbol_bits, DataValue, Slot, Symbol, SYMBOL_BITS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisOutcome {
    SuspectPair(NodeSet),
    IdentifiedNode(NodeId),
}

impl DiagnosisOutcome {
    pub fn accused(&self) -> Vec<NodeId> {
        match self {
            DiagnosisOutcome::SuspectPair(s) => s.members().to_vec(),
            DiagnosisOutcome::IdentifiedNode(v) => vec![*v],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub outcome: DiagnosisOutcome,
    pub disputes: Vec<(NodeId, NodeId)>,
    pub self_inconsistent: Vec<NodeId>,
}

/// Bits in `view`'s claim, determined by the public schedule alone.
pub fn claim_len(params: &Params, view: &NodeView) -> usize {
    let per_slot = 1 + SYMBOL_BITS * params.l;
    let slots: usize = view.received.iter().map(|b| b.slots.len()).sum();
    params.r * params.l * SYMBOL_BITS + slots * per_slot
}

/// The claim a node makes about its own view.
pub fn claim_bits(params: &Params, view: &NodeView) -> Vec<bool> {
    let mut out = Vec::with_capacity(claim_len(params, view));
    view.input.to_bits(&mut out);
    for b in &view.received {
        for p in &b.payloads {
            match p {
                Some(payload) if payload.len() == params.l => {
                    out.push(true);
                    payload.iter().for_each(|s| push_symbol_bits(*s, &mut out));
                }
                _ => out.extend(std::iter::repeat_n(false, 1 + SYMBOL_BITS * params.l)),
            }
        }
    }
    out
}

struct Cursor<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Vec<bool> {
        let out: Vec<bool> = (self.pos..self.pos + n)
            .map(|i| self.bits.get(i).copied().unwrap_or(false))
            .collect();
        self.pos += n;
        out
    }

    fn symbols(&mut self, n: usize) -> Vec<Symbol> {
        (0..n).map(|_| read_symbol_bits(&self.take(SYMBOL_BITS))).collect()
    }
}

struct Replay<'a> {
    l: usize,
    claims: Vec<Cursor<'a>>,
    transcript: &'a [AgreedBit],
    next_bit: usize,
    desync: Option<usize>,
    disputes: BTreeSet<(NodeId, NodeId)>,
    self_inconsistent: BTreeSet<NodeId>,
}

impl Channel for Replay<'_> {
    fn deliver(
        &mut self,
        _step: u16,
        (from, to): Link,
        slots: &[Slot],
        _alphas: &[Symbol],
        intended: Vec<Option<Vec<Symbol>>>,
    ) -> Vec<Option<Vec<Symbol>>> {
        let l = self.l;
        let cur = &mut self.claims[to];
        let claimed: Vec<Option<Vec<Symbol>>> = slots
            .iter()
            .map(|_| {
                let present = cur.take(1)[0];
                let payload = cur.symbols(l);
                present.then_some(payload)
            })
            .collect();
        if claimed != intended {
            self.disputes.insert((from.min(to), from.max(to)));
        }
        claimed
    }

    fn agree(&mut self, tag: Tag, sender: NodeId, intended: bool) -> bool {
        let k = self.next_bit;
        self.next_bit += 1;
        match self.transcript.get(k) {
            Some(b) if b.tag == tag && b.sender == sender => {
                if b.bit != intended {
                    self.self_inconsistent.insert(sender);
                }
                b.bit
            }
            _ => {
                self.desync.get_or_insert(k);
                intended
            }
        }
    }
}

/// Locate the faulty node from agreed claims about a failed attempt.
///
/// `claims[v]` is the bitstring agreed for node `v`; `transcript` lists the
/// bits agreed during the attempt, in order.
pub fn diagnose(
    params: &Params,
    state: &ModeState,
    generation: u64,
    transcript: &[AgreedBit],
    claims: &[Vec<bool>],
    skip_d_consistency: bool,
) -> Result<Diagnosis, ProtocolError> {
    assert_eq!(claims.len(), NODES);
    let mut cursors: Vec<Cursor> = claims.iter().map(|c| Cursor { bits: c, pos: 0 }).collect();
    let inputs: Vec<DataValue> = cursors
        .iter_mut()
        .map(|c| DataValue {
            generation,
            packets: (0..params.r).map(|_| c.symbols(params.l)).collect(),
        })
        .collect();
    let replay = Replay {
        l: params.l,
        claims: cursors,
        transcript,
        next_bit: 0,
        desync: None,
        disputes: BTreeSet::new(),
        self_inconsistent: BTreeSet::new(),
    };
    let mut engine = Engine::new(params, inputs, replay);
    engine.skip_d_consistency = skip_d_consistency;
    let end = run_attempt(&mut engine, state);
    let replay = engine.chan;
    if let Some(k) = replay.desync {
        return Err(ProtocolError::ReplayDesync(k));
    }
    if replay.next_bit != transcript.len() || end != AttemptEnd::FailureDetected {
        return Err(ProtocolError::ReplayDesync(replay.next_bit));
    }

    let disputes: Vec<(NodeId, NodeId)> = replay.disputes.into_iter().collect();
    let selfish: Vec<NodeId> = replay.self_inconsistent.into_iter().collect();
    let outcome = match selfish.as_slice() {
        [v] => DiagnosisOutcome::IdentifiedNode(*v),
        [] => {
            let mut degree: BTreeMap<NodeId, usize> = BTreeMap::new();
            for &(x, y) in &disputes {
                *degree.entry(x).or_default() += 1;
                *degree.entry(y).or_default() += 1;
            }
            let hubs: Vec<NodeId> = degree.iter().filter(|(_, &d)| d >= 2).map(|(&v, _)| v).collect();
            match (hubs.as_slice(), disputes.as_slice()) {
                ([v], _) => DiagnosisOutcome::IdentifiedNode(*v),
                ([], [(x, y)]) => DiagnosisOutcome::SuspectPair(NodeSet::from_sorted(vec![*x, *y])),
                ([], []) => return Err(ProtocolError::NoDispute),
                _ => return Err(ProtocolError::UnexplainedDisputes(disputes)),
            }
        }
        many => return Err(ProtocolError::MultipleSelfAccusations(many.to_vec())),
    };
    Ok(Diagnosis {
        outcome,
        disputes,
        self_inconsistent: selfish,
    })
}
