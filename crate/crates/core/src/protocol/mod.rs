//! The four-node consensus protocol: checking primitives, the five modes,
//! failure diagnosis and mode transitions.

pub mod diagnosis;
pub mod engine;
mod modes;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capgraph::{select_check_triple, CapError, NetworkSpec, NodeId, NodeSet};

pub use diagnosis::{claim_bits, claim_len, diagnose, Diagnosis, DiagnosisOutcome};
pub use engine::{AgreedBit, Channel, Engine, Link, NodeView, Output, Params};
pub use modes::{
    check_directly, check_through, check_value_through, run_attempt, AttemptEnd, CheckChannel, CheckVerdict, Grouping,
    Relation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("transition from {from} on {event:?} does not move forward")]
    BackwardTransition { from: Mode, event: TransitionEvent },
    #[error("diagnosis found no dispute after a detected failure")]
    NoDispute,
    #[error("diagnosis accused {accused:?}, disjoint from suspects {suspects}")]
    AccusationOutsideSuspects { accused: Vec<NodeId>, suspects: NodeSet },
    #[error("replay diverged from the agreed transcript at bit {0}")]
    ReplayDesync(usize),
    #[error("disputes {0:?} do not share a single node")]
    UnexplainedDisputes(Vec<(NodeId, NodeId)>),
    #[error("more than one node is self-inconsistent: {0:?}")]
    MultipleSelfAccusations(Vec<NodeId>),
    #[error(transparent)]
    Cap(#[from] CapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Undetected2Eq,
    Undetected1Eq1Neq,
    Undetected2Neq,
    Detected,
    Identified,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Undetected2Eq => "Undetected 2=",
            Mode::Undetected1Eq1Neq => "Undetected 1=1!=",
            Mode::Undetected2Neq => "Undetected 2!=",
            Mode::Detected => "Detected",
            Mode::Identified => "Identified",
        })
    }
}

/// Physical node playing each protocol role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Roles {
    pub a: NodeId,
    pub b: NodeId,
    pub c: NodeId,
    pub d: NodeId,
}

impl Roles {
    pub fn as_array(&self) -> [NodeId; 4] {
        [self.a, self.b, self.c, self.d]
    }

    fn is_bijection(&self) -> bool {
        let mut v = self.as_array();
        v.sort_unstable();
        v == [0, 1, 2, 3]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeState {
    pub mode: Mode,
    pub roles: Roles,
    pub suspects: NodeSet,
}

impl ModeState {
    /// Starting state: B is the node shared by the two directly checked
    /// pairs chosen for rate `r`.
    pub fn initial(net: &NetworkSpec, r: u64) -> Result<Self, ProtocolError> {
        let (x, y, z) = select_check_triple(net, r)?;
        let d = (0..4).find(|v| ![x, y, z].contains(v)).expect("four nodes");
        Ok(ModeState {
            mode: Mode::Undetected2Eq,
            roles: Roles { a: x, b: y, c: z, d },
            suspects: NodeSet::from_sorted(vec![]),
        })
    }

    fn detected(pair: &[NodeId]) -> Self {
        let (b, d) = (pair[0], pair[1]);
        let mut rest = (0..4).filter(|v| *v != b && *v != d);
        let (a, c) = (rest.next().unwrap(), rest.next().unwrap());
        ModeState {
            mode: Mode::Detected,
            roles: Roles { a, b, c, d },
            suspects: NodeSet::from_sorted(vec![b, d]),
        }
    }

    fn identified(node: NodeId) -> Self {
        let rest: Vec<NodeId> = (0..4).filter(|v| *v != node).collect();
        ModeState {
            mode: Mode::Identified,
            roles: Roles {
                a: rest[0],
                b: node,
                c: rest[1],
                d: rest[2],
            },
            suspects: NodeSet::from_sorted(vec![node]),
        }
    }

    pub fn is_valid(&self) -> bool {
        let want = match self.mode {
            Mode::Detected => 2,
            Mode::Identified => 1,
            _ => 0,
        };
        self.roles.is_bijection() && self.suspects.len() == want
    }
}

/// Which directly checked pair still agrees after a single mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreeingPair {
    AB,
    BC,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionEvent {
    /// Undetected 2=: exactly one of (A,B), (B,C) mismatched.
    OneMismatch(AgreeingPair),
    /// Undetected 2=: both direct checks mismatched.
    TwoMismatches,
    /// Undetected 1=1!=: (A,B) mismatched.
    PairMismatch,
    Diagnosis(DiagnosisOutcome),
}

/// Next mode after `event`. Transitions only move forward.
pub fn advance_mode(current: &ModeState, event: &TransitionEvent) -> Result<ModeState, ProtocolError> {
    let backward = || ProtocolError::BackwardTransition {
        from: current.mode,
        event: event.clone(),
    };
    let next = match (current.mode, event) {
        (Mode::Undetected2Eq, TransitionEvent::OneMismatch(pair)) => {
            let mut roles = current.roles;
            if *pair == AgreeingPair::BC {
                std::mem::swap(&mut roles.a, &mut roles.c);
            }
            ModeState {
                mode: Mode::Undetected1Eq1Neq,
                roles,
                suspects: current.suspects.clone(),
            }
        }
        (Mode::Undetected2Eq, TransitionEvent::TwoMismatches)
        | (Mode::Undetected1Eq1Neq, TransitionEvent::PairMismatch) => ModeState {
            mode: Mode::Undetected2Neq,
            ..current.clone()
        },
        (Mode::Identified, _) => return Err(backward()),
        (mode, TransitionEvent::Diagnosis(outcome)) => {
            let mut accused = outcome.accused();
            if mode == Mode::Detected {
                accused.retain(|v| current.suspects.contains(*v));
            }
            match accused.len() {
                0 => {
                    return Err(ProtocolError::AccusationOutsideSuspects {
                        accused: outcome.accused(),
                        suspects: current.suspects.clone(),
                    })
                }
                1 => ModeState::identified(accused[0]),
                _ if mode == Mode::Detected => return Err(backward()),
                _ => ModeState::detected(&accused),
            }
        }
        _ => return Err(backward()),
    };
    debug_assert!(next.mode > current.mode && next.is_valid());
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> ModeState {
        ModeState::initial(&NetworkSpec::uniform(4, 1, 1), 1).unwrap()
    }

    #[test]
    fn initial_roles() {
        let s = start();
        assert_eq!(s.mode, Mode::Undetected2Eq);
        assert!(s.is_valid());
    }

    #[test]
    fn mismatch_transitions() {
        let s = start();
        let r = s.roles;
        let t = advance_mode(&s, &TransitionEvent::OneMismatch(AgreeingPair::AB)).unwrap();
        assert_eq!((t.mode, t.roles), (Mode::Undetected1Eq1Neq, r));
        let t = advance_mode(&s, &TransitionEvent::OneMismatch(AgreeingPair::BC)).unwrap();
        assert_eq!((t.roles.a, t.roles.b, t.roles.c), (r.c, r.b, r.a));
        let t = advance_mode(&t, &TransitionEvent::PairMismatch).unwrap();
        assert_eq!(t.mode, Mode::Undetected2Neq);
        assert_eq!(
            advance_mode(&s, &TransitionEvent::TwoMismatches).unwrap().mode,
            Mode::Undetected2Neq
        );
    }

    #[test]
    fn diagnosis_transitions() {
        let s = start();
        let pair = DiagnosisOutcome::SuspectPair(NodeSet::new(vec![1, 3], 4).unwrap());
        let det = advance_mode(&s, &TransitionEvent::Diagnosis(pair.clone())).unwrap();
        assert_eq!(det.mode, Mode::Detected);
        assert_eq!((det.roles.b, det.roles.d), (1, 3));
        assert_eq!((det.roles.a, det.roles.c), (0, 2));

        let narrowed = DiagnosisOutcome::SuspectPair(NodeSet::new(vec![0, 3], 4).unwrap());
        let id = advance_mode(&det, &TransitionEvent::Diagnosis(narrowed)).unwrap();
        assert_eq!((id.mode, id.roles.b), (Mode::Identified, 3));

        let u1 = advance_mode(&s, &TransitionEvent::OneMismatch(AgreeingPair::AB)).unwrap();
        let id = advance_mode(&u1, &TransitionEvent::Diagnosis(DiagnosisOutcome::IdentifiedNode(2))).unwrap();
        assert_eq!(id.mode, Mode::Identified);
        assert_eq!(id.suspects.members(), &[2]);
    }

    #[test]
    fn backward_events_are_rejected() {
        let s = start();
        let u2n = advance_mode(&s, &TransitionEvent::TwoMismatches).unwrap();
        assert!(matches!(
            advance_mode(&u2n, &TransitionEvent::OneMismatch(AgreeingPair::AB)),
            Err(ProtocolError::BackwardTransition { .. })
        ));
        let det = advance_mode(
            &s,
            &TransitionEvent::Diagnosis(DiagnosisOutcome::SuspectPair(NodeSet::new(vec![0, 1], 4).unwrap())),
        )
        .unwrap();
        assert!(advance_mode(&det, &TransitionEvent::PairMismatch).is_err());
        assert!(advance_mode(
            &det,
            &TransitionEvent::Diagnosis(DiagnosisOutcome::SuspectPair(NodeSet::new(vec![0, 1], 4).unwrap()))
        )
        .is_err());
        let id = advance_mode(&det, &TransitionEvent::Diagnosis(DiagnosisOutcome::IdentifiedNode(1))).unwrap();
        assert!(advance_mode(&id, &TransitionEvent::Diagnosis(DiagnosisOutcome::IdentifiedNode(1))).is_err());
    }

    #[test]
    fn accusation_outside_suspects() {
        let s = start();
        let det = advance_mode(
            &s,
            &TransitionEvent::Diagnosis(DiagnosisOutcome::SuspectPair(NodeSet::new(vec![0, 1], 4).unwrap())),
        )
        .unwrap();
        assert!(matches!(
            advance_mode(&det, &TransitionEvent::Diagnosis(DiagnosisOutcome::IdentifiedNode(3))),
            Err(ProtocolError::AccusationOutsideSuspects { .. })
        ));
    }
}
