use serde::{Deserialize, Serialize};

use super::engine::{BitReq, Channel, Decide, Engine, Link, Output, SendOp, Val};
use super::{AgreeingPair, Mode, ModeState, TransitionEvent};
use crate::capgraph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equiv,
    NotEquiv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckChannel {
    Direct,
    Via(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub relation: Relation,
    pub channel: CheckChannel,
    pub failure_detected: bool,
}

impl CheckVerdict {
    fn equiv(&self) -> bool {
        !self.failure_detected && self.relation == Relation::Equiv
    }
}

/// How the relaying node groups the packets it checks for consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Both incoming links as one set. Used where the two values are
    /// already expected to be equal.
    Union,
    /// Each incoming link on its own.
    Separate,
}

fn relation(both: bool) -> Relation {
    if both {
        Relation::Equiv
    } else {
        Relation::NotEquiv
    }
}

/// `x` and `y` exchange packets coded from their inputs on the links
/// between them and compare against their own inputs.
pub fn check_directly<C: Channel>(e: &mut Engine<C>, x: NodeId, y: NodeId) -> CheckVerdict {
    e.data_step(&[
        SendOp::Own {
            from: x,
            to: y,
            val: Val::Input,
        },
        SendOp::Own {
            from: y,
            to: x,
            val: Val::Input,
        },
    ]);
    let bits = e.bits(&[
        (
            x,
            BitReq::Verify {
                group: vec![(y, x)],
                val: Val::Input,
            },
        ),
        (
            y,
            BitReq::Verify {
                group: vec![(x, y)],
                val: Val::Input,
            },
        ),
    ]);
    CheckVerdict {
        relation: relation(bits[0] && bits[1]),
        channel: CheckChannel::Direct,
        failure_detected: false,
    }
}

fn through<C: Channel>(
    e: &mut Engine<C>,
    (x, xv): (NodeId, Val),
    (y, yv): (NodeId, Val),
    z: NodeId,
    grouping: Grouping,
) -> CheckVerdict {
    e.data_step(&[
        SendOp::Own {
            from: x,
            to: y,
            val: xv,
        },
        SendOp::Own {
            from: x,
            to: z,
            val: xv,
        },
        SendOp::Own {
            from: y,
            to: x,
            val: yv,
        },
        SendOp::Own {
            from: y,
            to: z,
            val: yv,
        },
    ]);
    e.data_step(&[
        SendOp::Forward {
            via: z,
            sources: vec![(x, z)],
            to: y,
        },
        SendOp::Forward {
            via: z,
            sources: vec![(y, z)],
            to: x,
        },
    ]);
    let at_x = vec![(y, x), (z, x)];
    let at_y = vec![(x, y), (z, y)];
    let consistent = |group: Vec<Link>| BitReq::Consistent { group, solvable: false };
    let mut reqs = vec![(x, consistent(at_x.clone())), (y, consistent(at_y.clone()))];
    match grouping {
        Grouping::Union => reqs.push((z, consistent(vec![(x, z), (y, z)]))),
        Grouping::Separate => {
            reqs.push((z, consistent(vec![(x, z)])));
            reqs.push((z, consistent(vec![(y, z)])));
        }
    }
    let channel = CheckChannel::Via(z);
    if !e.bits(&reqs).into_iter().all(|b| b) {
        return CheckVerdict {
            relation: Relation::NotEquiv,
            channel,
            failure_detected: true,
        };
    }
    let bits = e.bits(&[
        (x, BitReq::Verify { group: at_x, val: xv }),
        (y, BitReq::Verify { group: at_y, val: yv }),
    ]);
    CheckVerdict {
        relation: relation(bits[0] && bits[1]),
        channel,
        failure_detected: false,
    }
}

/// `x` and `y` compare inputs using packets exchanged directly plus packets
/// relayed by `z`. Any inconsistent packet set signals a failure.
pub fn check_through<C: Channel>(
    e: &mut Engine<C>,
    x: NodeId,
    y: NodeId,
    z: NodeId,
    grouping: Grouping,
) -> CheckVerdict {
    through(e, (x, Val::Input), (y, Val::Input), z, grouping)
}

/// As [`check_through`], with `x` using its reconstructed value.
pub fn check_value_through<C: Channel>(
    e: &mut Engine<C>,
    x: NodeId,
    y: NodeId,
    z: NodeId,
    grouping: Grouping,
) -> CheckVerdict {
    through(e, (x, Val::Derived), (y, Val::Input), z, grouping)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptEnd {
    /// Outputs per physical node.
    Decided {
        outputs: Vec<Output>,
        default: bool,
    },
    /// A mismatch changed the mode; the generation restarts.
    Aborted(TransitionEvent),
    FailureDetected,
}

fn decided(state: &ModeState, how: [Decide; 4], e: &Engine<impl Channel>) -> AttemptEnd {
    let mut outputs = vec![Output::Undecided; 4];
    for (node, h) in state.roles.as_array().into_iter().zip(how.iter()) {
        outputs[node] = e.decide(node, h);
    }
    AttemptEnd::Decided {
        outputs,
        default: false,
    }
}

fn defaulted(state: &ModeState) -> AttemptEnd {
    let outputs = (0..4)
        .map(|v| {
            if state.mode == Mode::Identified && state.suspects.contains(v) {
                Output::Undecided
            } else {
                Output::Default
            }
        })
        .collect();
    AttemptEnd::Decided { outputs, default: true }
}

/// D's last consistency check over everything it received from A, B, C.
fn final_check_at_d<C: Channel>(e: &mut Engine<C>, group: &[Link], d: NodeId) -> bool {
    e.bits(&[(
        d,
        BitReq::Consistent {
            group: group.to_vec(),
            solvable: true,
        },
    )])[0]
}

/// Run one attempt at the current generation in the given mode.
pub fn run_attempt<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> AttemptEnd {
    e.lax_node = e.skip_d_consistency.then_some(state.roles.d);
    match state.mode {
        Mode::Undetected2Eq => undetected_2eq(e, state),
        Mode::Undetected1Eq1Neq => undetected_1eq1neq(e, state),
        Mode::Undetected2Neq => undetected_2neq(e, state),
        Mode::Detected => detected(e, state),
        Mode::Identified => identified(e, state),
    }
}

fn undetected_2eq<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> AttemptEnd {
    let [a, b, c, d] = state.roles.as_array();
    let ab = check_directly(e, a, b).equiv();
    let bc = check_directly(e, b, c).equiv();
    match (ab, bc) {
        (false, false) => return AttemptEnd::Aborted(TransitionEvent::TwoMismatches),
        (true, false) => return AttemptEnd::Aborted(TransitionEvent::OneMismatch(AgreeingPair::AB)),
        (false, true) => return AttemptEnd::Aborted(TransitionEvent::OneMismatch(AgreeingPair::BC)),
        (true, true) => {}
    }
    if !check_through(e, a, c, d, Grouping::Union).equiv() {
        return AttemptEnd::FailureDetected;
    }
    e.data_step(&[SendOp::Own {
        from: b,
        to: d,
        val: Val::Input,
    }]);
    let group = vec![(a, d), (b, d), (c, d)];
    if !final_check_at_d(e, &group, d) {
        return AttemptEnd::FailureDetected;
    }
    decided(
        state,
        [Decide::Input, Decide::Input, Decide::Input, Decide::Solve(group)],
        e,
    )
}

fn undetected_1eq1neq<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> AttemptEnd {
    let [a, b, c, d] = state.roles.as_array();
    if !check_directly(e, a, b).equiv() {
        return AttemptEnd::Aborted(TransitionEvent::PairMismatch);
    }
    // the A-B links already carry the packets from the direct check
    if !check_through(e, a, b, c, Grouping::Union).equiv() {
        return AttemptEnd::FailureDetected;
    }
    e.derive(c, &[(a, c), (b, c)]);
    if !check_value_through(e, c, a, d, Grouping::Union).equiv() {
        return AttemptEnd::FailureDetected;
    }
    e.data_step(&[SendOp::Own {
        from: b,
        to: d,
        val: Val::Input,
    }]);
    let group = vec![(a, d), (b, d), (c, d)];
    if !final_check_at_d(e, &group, d) {
        return AttemptEnd::FailureDetected;
    }
    decided(
        state,
        [Decide::Input, Decide::Input, Decide::Derived, Decide::Solve(group)],
        e,
    )
}

/// (A,C) through B, then through D. `None` means a failure was detected.
fn through_b_and_d<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> Option<(bool, bool)> {
    let [a, b, c, d] = state.roles.as_array();
    let vb = check_through(e, a, c, b, Grouping::Separate);
    if vb.failure_detected {
        return None;
    }
    let vd = check_through(e, a, c, d, Grouping::Separate);
    if vd.failure_detected {
        return None;
    }
    Some((vb.equiv(), vd.equiv()))
}

fn undetected_2neq<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> AttemptEnd {
    let [a, b, c, d] = state.roles.as_array();
    match through_b_and_d(e, state) {
        Some((false, false)) => return defaulted(state),
        Some((true, true)) => {}
        _ => return AttemptEnd::FailureDetected,
    }
    e.data_step(&[
        SendOp::Forward {
            via: b,
            sources: vec![(a, b), (c, b)],
            to: d,
        },
        SendOp::Forward {
            via: d,
            sources: vec![(a, d), (c, d)],
            to: b,
        },
    ]);
    let at_b = vec![(a, b), (c, b), (d, b)];
    let at_d = vec![(a, d), (c, d), (b, d)];
    let ok_b = e.bits(&[(
        b,
        BitReq::Consistent {
            group: at_b.clone(),
            solvable: true,
        },
    )])[0];
    if !ok_b || !final_check_at_d(e, &at_d, d) {
        return AttemptEnd::FailureDetected;
    }
    decided(
        state,
        [Decide::Input, Decide::Solve(at_b), Decide::Input, Decide::Solve(at_d)],
        e,
    )
}

fn detected<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> AttemptEnd {
    let [a, b, c, d] = state.roles.as_array();
    match through_b_and_d(e, state) {
        Some((false, false)) => defaulted(state),
        Some((true, true)) => decided(
            state,
            [
                Decide::Input,
                Decide::Solve(vec![(a, b), (c, b)]),
                Decide::Input,
                Decide::Solve(vec![(a, d), (c, d)]),
            ],
            e,
        ),
        _ => AttemptEnd::FailureDetected,
    }
}

fn identified<C: Channel>(e: &mut Engine<C>, state: &ModeState) -> AttemptEnd {
    let [a, _, c, d] = state.roles.as_array();
    let v = check_through(e, a, c, d, Grouping::Separate);
    if v.failure_detected {
        return AttemptEnd::FailureDetected;
    }
    if !v.equiv() {
        return defaulted(state);
    }
    decided(
        state,
        [
            Decide::Input,
            Decide::Abstain,
            Decide::Input,
            Decide::Solve(vec![(a, d), (c, d)]),
        ],
        e,
    )
}
