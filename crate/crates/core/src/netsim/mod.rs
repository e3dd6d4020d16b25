//! Deterministic synchronous simulation of the protocol on a 4-node network
//! with per-link capacity budgets, one optional faulty node, and full
//! traffic accounting.

pub mod adversary;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::capgraph::{capacity_upper_bound, four_node_bound, NetworkSpec, NodeId};
use crate::protocol::engine::{Channel, Engine, Link, Output, Params};
use crate::protocol::{
    advance_mode, claim_bits, diagnose, run_attempt, AttemptEnd, Diagnosis, Mode, ModeState, ProtocolError,
    TransitionEvent,
};
use crate::rbcast::{reliable_broadcast, Tag, TagKind, NODES};
use crate::rscode::{CodedPacket, DataValue, Slot, Symbol, SYMBOL_BITS};

pub use adversary::{AdversaryRuntime, AdversaryStrategy, Behavior, PartitionSide};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Invariant(Violation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Termination,
    Consistency,
    Validity,
    ModeDecision,
    Budget,
    DiagnosisSoundness,
    Protocol,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("invariant {kind:?} violated in generation {generation} attempt {attempt}: {detail}")]
pub struct Violation {
    pub kind: ViolationKind,
    pub generation: u64,
    pub attempt: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Packets per generation (`R`).
    pub packets: usize,
    /// Bits per packet (`c`), a multiple of 16.
    pub packet_bits: usize,
}

impl RateConfig {
    pub fn symbols_per_packet(&self) -> usize {
        self.packet_bits / SYMBOL_BITS
    }
}

/// How generation inputs are drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputPattern {
    AllEqual,
    OneDiffers {
        node: NodeId,
    },
    AllRandom,
    /// Fixed values per node, `R*L` symbols each, row-major.
    Explicit {
        values: Vec<Vec<u16>>,
    },
}

impl InputPattern {
    fn validate(&self, r: usize, l: usize) -> Result<(), SimError> {
        match self {
            InputPattern::OneDiffers { node } if *node >= NODES => {
                Err(SimError::Config(format!("one_differs node {node} out of range")))
            }
            InputPattern::Explicit { values } if values.len() != NODES || values.iter().any(|v| v.len() != r * l) => {
                Err(SimError::Config(format!(
                    "explicit inputs need {NODES} rows of {} symbols",
                    r * l
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn generate(&self, rng: &mut ChaCha8Rng, generation: u64, r: usize, l: usize) -> Vec<DataValue> {
        match self {
            InputPattern::AllEqual => vec![DataValue::random(rng, generation, r, l); NODES],
            InputPattern::OneDiffers { node } => {
                let v = DataValue::random(rng, generation, r, l);
                let mut w = DataValue::random(rng, generation, r, l);
                if w == v {
                    w.packets[0][0] += Symbol(1);
                }
                let mut out = vec![v; NODES];
                out[*node] = w;
                out
            }
            InputPattern::AllRandom => (0..NODES).map(|_| DataValue::random(rng, generation, r, l)).collect(),
            InputPattern::Explicit { values } => values
                .iter()
                .map(|row| DataValue {
                    generation,
                    packets: row.chunks(l).map(|c| c.iter().map(|&s| Symbol(s)).collect()).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MessageKind {
    Data(CodedPacket),
    Control { tag: Tag, sender: NodeId, bits: u64 },
    Claim { claimant: NodeId, bits: u64 },
}

/// One message on one link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMessage {
    pub generation: u64,
    pub attempt: u64,
    pub phase: u16,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
}

/// Per-link usage within one attempt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkMeter {
    pub data_packets: [[u64; NODES]; NODES],
    pub control_bits: [[u64; NODES]; NODES],
}

impl LinkMeter {
    pub fn total_data(&self) -> u64 {
        self.data_packets.iter().flatten().sum()
    }

    pub fn total_control(&self) -> u64 {
        self.control_bits.iter().flatten().sum()
    }

    /// First link whose data usage exceeds its capacity.
    pub fn over_budget(&self, net: &NetworkSpec) -> Option<(Link, u64, u64)> {
        (0..NODES)
            .flat_map(|i| (0..NODES).map(move |j| (i, j)))
            .map(|(i, j)| ((i, j), self.data_packets[i][j], net.cap(i, j)))
            .find(|&(_, used, cap)| used > cap)
    }

    fn add_control(&mut self, bits: &[[u64; NODES]; NODES]) {
        for (row, add) in self.control_bits.iter_mut().zip(bits) {
            for (c, a) in row.iter_mut().zip(add) {
                *c += a;
            }
        }
    }
}

/// Deliver one synchronous phase. Messages from the faulty node pass
/// through its behavior first; messages it chooses to ignore arrive as
/// nothing. Sent data packets are metered and everything is logged.
pub fn deliver_round(
    pending: Vec<RoundMessage>,
    adversary: &mut AdversaryRuntime,
    meter: &mut LinkMeter,
    log: Option<&mut Vec<RoundMessage>>,
) -> Vec<RoundMessage> {
    let faulty = adversary.faulty();
    let mut sent = Vec::with_capacity(pending.len());
    for msg in pending {
        assert_ne!(msg.from, msg.to, "self-addressed message");
        let msg = if Some(msg.from) == faulty {
            match adversary.outgoing(msg) {
                Some(m) => m,
                None => continue,
            }
        } else {
            msg
        };
        if let MessageKind::Data(_) = msg.kind {
            meter.data_packets[msg.from][msg.to] += 1;
        }
        sent.push(msg);
    }
    if let Some(log) = log {
        log.extend(sent.iter().cloned());
    }
    sent.retain(|m| !(Some(m.to) == faulty && adversary.ignores(m.from)));
    sent
}

struct Live<'a> {
    adversary: &'a mut AdversaryRuntime,
    meter: &'a mut LinkMeter,
    log: Option<&'a mut Vec<RoundMessage>>,
    generation: u64,
    attempt: u64,
    l: usize,
}

impl Channel for Live<'_> {
    fn deliver(
        &mut self,
        step: u16,
        (from, to): Link,
        slots: &[Slot],
        alphas: &[Symbol],
        intended: Vec<Option<Vec<Symbol>>>,
    ) -> Vec<Option<Vec<Symbol>>> {
        let pending: Vec<RoundMessage> = slots
            .iter()
            .zip(alphas)
            .zip(intended)
            .filter_map(|((&slot, &alpha), payload)| {
                payload.map(|payload| RoundMessage {
                    generation: self.generation,
                    attempt: self.attempt,
                    phase: step,
                    from,
                    to,
                    kind: MessageKind::Data(CodedPacket {
                        generation: self.generation,
                        point: crate::rscode::EvalPoint { alpha, slot },
                        payload,
                    }),
                })
            })
            .collect();
        let delivered = deliver_round(pending, self.adversary, self.meter, self.log.as_deref_mut());
        let mut out = vec![None; slots.len()];
        for m in delivered {
            if let MessageKind::Data(p) = m.kind {
                if let Some(k) = slots.iter().position(|s| *s == p.point.slot) {
                    if p.payload.len() == self.l {
                        out[k] = Some(p.payload);
                    }
                }
            }
        }
        out
    }

    fn agree(&mut self, tag: Tag, sender: NodeId, intended: bool) -> bool {
        let faulty = self.adversary.faulty();
        let mut hook = self.adversary.hook(tag.kind);
        let out = reliable_broadcast(
            sender,
            &[intended],
            faulty.map(|f| (f, &mut hook as &mut dyn crate::rbcast::FaultHook)),
        );
        self.meter.add_control(&out.link_bits);
        if let Some(log) = self.log.as_deref_mut() {
            for (i, row) in out.link_bits.iter().enumerate() {
                for (j, &bits) in row.iter().enumerate().filter(|(_, &b)| b > 0) {
                    log.push(RoundMessage {
                        generation: self.generation,
                        attempt: self.attempt,
                        phase: tag.seq,
                        from: i,
                        to: j,
                        kind: MessageKind::Control { tag, sender, bits },
                    });
                }
            }
        }
        out.agreed()[0]
    }
}

/// Inputs to one simulated execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub network: NetworkSpec,
    pub rate: RateConfig,
    pub generations: u64,
    pub input_pattern: InputPattern,
    pub adversary: AdversaryStrategy,
    pub seed: u64,
    #[serde(default)]
    pub traffic_log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Decided,
    Default,
    Aborted,
    FailureDetected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub generation: u64,
    pub attempt: u64,
    pub mode: Mode,
    pub outcome: AttemptOutcome,
    pub aborted: bool,
    pub decisions_digest: String,
    pub link_data_packets: [[u64; NODES]; NODES],
    pub control_bits: u64,
    pub transition: Option<TransitionEvent>,
    pub diagnosis: Option<Diagnosis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub b_t_bits: u64,
    pub t_generations: u64,
    pub rate: f64,
    pub i_star: u64,
    pub i_star_bits: u64,
    pub ratio: f64,
    pub overhead_fraction: f64,
    pub data_packets: u64,
    pub data_bits: u64,
    pub control_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub generations_run: u64,
    pub packet_bits: u64,
    pub totals: Totals,
    pub failures_detected: u64,
    pub aborted_attempts: u64,
    pub final_mode: Mode,
    pub final_suspects: Vec<NodeId>,
    pub records: Vec<AttemptRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traffic: Vec<RoundMessage>,
}

impl ThroughputReport {
    /// Data bits agreed per time unit.
    pub fn rate(&self) -> f64 {
        self.totals.rate
    }

    /// Control bits divided by control plus data bits, for packet size `c_bits`.
    pub fn overhead_fraction(&self, c_bits: u64) -> f64 {
        overhead_fraction(self, c_bits)
    }
}

pub fn overhead_fraction(report: &ThroughputReport, c_bits: u64) -> f64 {
    let control = report.totals.control_bits as f64;
    let total = control + (report.totals.data_packets * c_bits) as f64;
    if report.generations_run == 0 || total == 0.0 {
        0.0
    } else {
        control / total
    }
}

/// Extra knobs that are not part of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Testing hook: the node in role D accepts packets without consistency checks.
    pub skip_d_consistency: bool,
}

fn digest(outputs: &[Output]) -> String {
    let mut h = Sha256::new();
    for o in outputs {
        h.update(serde_json::to_vec(o).expect("outputs serialize"));
        h.update([0xff]);
    }
    hex::encode(h.finalize())
}

/// Precondition checks for a protocol run.
pub fn validate_scenario(s: &Scenario) -> Result<(), SimError> {
    let cfg = |m: String| SimError::Config(m);
    s.network.validate().map_err(|e| cfg(e.to_string()))?;
    if s.network.n != 4 || s.network.f != 1 {
        return Err(cfg("protocol runs need n = 4 and f = 1".into()));
    }
    if !s.network.is_complete() {
        return Err(cfg("protocol runs need every link capacity > 0".into()));
    }
    if s.rate.packets == 0 {
        return Err(cfg("rate.packets must be at least 1".into()));
    }
    if s.rate.packet_bits < SYMBOL_BITS || !s.rate.packet_bits.is_multiple_of(SYMBOL_BITS) {
        return Err(cfg(format!("packet_bits must be a positive multiple of {SYMBOL_BITS}")));
    }
    let bound = four_node_bound(&s.network).map_err(|e| cfg(e.to_string()))?;
    if s.rate.packets as u64 >= bound {
        return Err(cfg(format!("rate R = {} must be below I* = {bound}", s.rate.packets)));
    }
    s.input_pattern.validate(s.rate.packets, s.rate.symbols_per_packet())?;
    Ok(())
}

struct Harness<'a> {
    scenario: &'a Scenario,
    faulty: Option<NodeId>,
    honest_equal_so_far: bool,
}

impl Harness<'_> {
    fn violation(&self, kind: ViolationKind, generation: u64, attempt: u64, detail: String) -> SimError {
        SimError::Invariant(Violation {
            kind,
            generation,
            attempt,
            detail,
        })
    }

    fn honest(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..NODES).filter(move |v| Some(*v) != self.faulty)
    }

    fn check_decision(
        &self,
        g: u64,
        attempt: u64,
        state: &ModeState,
        inputs: &[DataValue],
        outputs: &[Output],
        default: bool,
    ) -> Result<(), SimError> {
        let (r, l) = (self.scenario.rate.packets, self.scenario.rate.symbols_per_packet());
        let mut resolved = Vec::new();
        for v in self.honest() {
            match outputs[v].resolve(r, l, g) {
                Some(d) => resolved.push((v, d)),
                None => {
                    return Err(self.violation(
                        ViolationKind::Consistency,
                        g,
                        attempt,
                        format!("fault-free node {v} produced no output"),
                    ))
                }
            }
        }
        if resolved.windows(2).any(|w| w[0].1.packets != w[1].1.packets) {
            return Err(self.violation(
                ViolationKind::Consistency,
                g,
                attempt,
                format!("fault-free outputs differ in mode {}", state.mode),
            ));
        }
        let honest_inputs: Vec<&DataValue> = self.honest().map(|v| &inputs[v]).collect();
        let equal_now = honest_inputs.windows(2).all(|w| w[0].packets == w[1].packets);
        if self.honest_equal_so_far && equal_now && (default || resolved[0].1.packets != honest_inputs[0].packets) {
            return Err(self.violation(
                ViolationKind::Validity,
                g,
                attempt,
                format!("equal fault-free inputs but output differs (default = {default})"),
            ));
        }
        if !default {
            let members: Vec<NodeId> = match state.mode {
                Mode::Undetected2Eq => vec![state.roles.a, state.roles.b, state.roles.c],
                Mode::Undetected1Eq1Neq => vec![state.roles.a, state.roles.b],
                _ => vec![state.roles.a, state.roles.c],
            };
            let vals: Vec<&DataValue> = members
                .iter()
                .filter(|&&v| Some(v) != self.faulty)
                .map(|&v| &inputs[v])
                .collect();
            if vals.windows(2).any(|w| w[0].packets != w[1].packets)
                || vals.first().is_some_and(|v| v.packets != resolved[0].1.packets)
            {
                return Err(self.violation(
                    ViolationKind::ModeDecision,
                    g,
                    attempt,
                    format!(
                        "decision in mode {} does not match the fault-free inputs of {members:?}",
                        state.mode
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Simulate `scenario.generations` generations and report throughput.
pub fn run_execution(scenario: &Scenario, options: RunOptions) -> Result<ThroughputReport, SimError> {
    validate_scenario(scenario)?;
    let net = &scenario.network;
    let (r, l) = (scenario.rate.packets, scenario.rate.symbols_per_packet());
    let c = scenario.rate.packet_bits as u64;
    let params = Params::new(net.clone(), r, l).map_err(|e| SimError::Config(e.to_string()))?;
    let mut adversary = AdversaryRuntime::new(scenario.adversary.clone(), net, scenario.seed)?;
    let mut input_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut state = ModeState::initial(net, r as u64).map_err(|e| SimError::Config(e.to_string()))?;
    let i_star = capacity_upper_bound(net)
        .map_err(|e| SimError::Config(e.to_string()))?
        .i_star;

    let mut harness = Harness {
        scenario,
        faulty: adversary.faulty(),
        honest_equal_so_far: true,
    };
    let mut records = Vec::new();
    let mut traffic = Vec::new();
    let (mut b_t, mut attempts, mut aborted, mut failures) = (0u64, 0u64, 0u64, 0u64);
    let (mut data_packets, mut control_bits) = (0u64, 0u64);

    for g in 0..scenario.generations {
        let inputs = scenario.input_pattern.generate(&mut input_rng, g, r, l);
        adversary.begin_generation(g, r, l);
        loop {
            let attempt = attempts;
            attempts += 1;
            let mut meter = LinkMeter::default();
            let live = Live {
                adversary: &mut adversary,
                meter: &mut meter,
                log: scenario.traffic_log.then_some(&mut traffic),
                generation: g,
                attempt,
                l,
            };
            let mut engine = Engine::new(&params, inputs.clone(), live);
            engine.skip_d_consistency = options.skip_d_consistency;
            let end = run_attempt(&mut engine, &state);
            let scheduled = engine.link_usage();
            let transcript = std::mem::take(&mut engine.transcript);
            let views = std::mem::take(&mut engine.views);
            drop(engine);

            let over = (0..NODES)
                .flat_map(|i| (0..NODES).map(move |j| (i, j)))
                .find(|&(i, j)| scheduled[i][j] > net.cap(i, j));
            if let Some((i, j)) = over.or(meter.over_budget(net).map(|x| x.0)) {
                return Err(harness.violation(
                    ViolationKind::Budget,
                    g,
                    attempt,
                    format!("link {i}->{j} over capacity {}", net.cap(i, j)),
                ));
            }

            let mut record = AttemptRecord {
                generation: g,
                attempt,
                mode: state.mode,
                outcome: AttemptOutcome::Aborted,
                aborted: true,
                decisions_digest: String::new(),
                link_data_packets: meter.data_packets,
                control_bits: 0,
                transition: None,
                diagnosis: None,
            };
            let next = match end {
                AttemptEnd::Decided { outputs, default } => {
                    harness.check_decision(g, attempt, &state, &inputs, &outputs, default)?;
                    b_t += r as u64 * c;
                    record.outcome = if default {
                        AttemptOutcome::Default
                    } else {
                        AttemptOutcome::Decided
                    };
                    record.aborted = false;
                    record.decisions_digest = digest(&outputs);
                    None
                }
                AttemptEnd::Aborted(event) => Some(event),
                AttemptEnd::FailureDetected => {
                    failures += 1;
                    record.outcome = AttemptOutcome::FailureDetected;
                    let Some(faulty) = harness.faulty else {
                        return Err(harness.violation(
                            ViolationKind::DiagnosisSoundness,
                            g,
                            attempt,
                            "failure detected without a faulty node".into(),
                        ));
                    };
                    let log = scenario.traffic_log.then_some(&mut traffic);
                    let claims = broadcast_claims(&params, &views, &mut adversary, &mut meter, log, (g, attempt));
                    let diag = diagnose(&params, &state, g, &transcript, &claims, options.skip_d_consistency)
                        .map_err(|e| harness.violation(ViolationKind::Protocol, g, attempt, e.to_string()))?;
                    if !diag.outcome.accused().contains(&faulty) {
                        return Err(harness.violation(
                            ViolationKind::DiagnosisSoundness,
                            g,
                            attempt,
                            format!("accused {:?} but node {faulty} is faulty", diag.outcome.accused()),
                        ));
                    }
                    let event = TransitionEvent::Diagnosis(diag.outcome.clone());
                    record.diagnosis = Some(diag);
                    Some(event)
                }
            };
            record.control_bits = meter.total_control();
            data_packets += meter.total_data();
            control_bits += meter.total_control();

            let Some(event) = next else {
                records.push(record);
                break;
            };
            aborted += 1;
            state = advance_mode(&state, &event)
                .map_err(|e: ProtocolError| harness.violation(ViolationKind::Protocol, g, attempt, e.to_string()))?;
            if let Some(f) = harness.faulty {
                if state.mode == Mode::Identified && !state.suspects.contains(f) {
                    return Err(harness.violation(
                        ViolationKind::DiagnosisSoundness,
                        g,
                        attempt,
                        format!("identified {} but node {f} is faulty", state.suspects),
                    ));
                }
            }
            record.transition = Some(event);
            records.push(record);
            if aborted > 4 {
                return Err(harness.violation(
                    ViolationKind::Termination,
                    g,
                    attempt,
                    format!("{aborted} aborted attempts"),
                ));
            }
        }
        let honest: Vec<&DataValue> = harness.honest().map(|v| &inputs[v]).collect();
        harness.honest_equal_so_far &= honest.windows(2).all(|w| w[0].packets == w[1].packets);
    }

    let t = attempts;
    let rate = if t == 0 { 0.0 } else { b_t as f64 / t as f64 };
    let i_star_bits = i_star * c;
    let mut report = ThroughputReport {
        generations_run: scenario.generations,
        packet_bits: c,
        totals: Totals {
            b_t_bits: b_t,
            t_generations: t,
            rate,
            i_star,
            i_star_bits,
            ratio: rate / i_star_bits as f64,
            overhead_fraction: 0.0,
            data_packets,
            data_bits: data_packets * c,
            control_bits,
        },
        failures_detected: failures,
        aborted_attempts: aborted,
        final_mode: state.mode,
        final_suspects: state.suspects.members().to_vec(),
        records,
        traffic,
    };
    report.totals.overhead_fraction = overhead_fraction(&report, c);
    Ok(report)
}

/// Every node reliably broadcasts its claim about the failed attempt.
fn broadcast_claims(
    params: &Params,
    views: &[crate::protocol::NodeView],
    adversary: &mut AdversaryRuntime,
    meter: &mut LinkMeter,
    mut log: Option<&mut Vec<RoundMessage>>,
    (generation, attempt): (u64, u64),
) -> Vec<Vec<bool>> {
    let faulty = adversary.faulty();
    (0..NODES)
        .map(|v| {
            let mut bits = claim_bits(params, &views[v]);
            if Some(v) == faulty {
                bits = adversary.claim(bits);
            }
            let mut hook = adversary.hook(TagKind::Claim);
            let out = reliable_broadcast(
                v,
                &bits,
                faulty.map(|f| (f, &mut hook as &mut dyn crate::rbcast::FaultHook)),
            );
            meter.add_control(&out.link_bits);
            if let Some(log) = log.as_deref_mut() {
                for (i, row) in out.link_bits.iter().enumerate() {
                    for (j, &bits) in row.iter().enumerate().filter(|(_, &b)| b > 0) {
                        log.push(RoundMessage {
                            generation,
                            attempt,
                            phase: u16::MAX,
                            from: i,
                            to: j,
                            kind: MessageKind::Claim { claimant: v, bits },
                        });
                    }
                }
            }
            out.agreed().to_vec()
        })
        .collect()
}
