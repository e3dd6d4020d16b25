//! Vectorized Reed-Solomon coding over GF(2^16).
//!
//! A generation's data is `R` packets of `L` symbols. Each symbol position is
//! read as the coefficients of a degree `< R` polynomial, and a coded packet
//! is that polynomial evaluated at one point `alpha`, position by position.
//! Any `R` packets at distinct points determine the data.

mod field;

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capgraph::{NetworkSpec, NodeId};

pub use field::{Symbol, FIELD_POLY, GROUP_ORDER, SYMBOL_BITS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("data value needs R >= 1 packets of L >= 1 symbols")]
    EmptyData,
    #[error("packet {index} has {got} symbols, expected {expected}")]
    LengthMismatch { index: usize, got: usize, expected: usize },
    #[error("evaluation point {0:?} appears twice")]
    DuplicatePoint(Symbol),
    #[error("evaluation point must be nonzero")]
    ZeroPoint,
    #[error("need {needed} packets, got {got}")]
    InsufficientPackets { needed: usize, got: usize },
    #[error("{slots} evaluation slots exceed the {GROUP_ORDER} nonzero field elements")]
    RegistryOverflow { slots: u64 },
}

/// One generation's input: `R` packets of `L` symbols each.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataValue {
    pub generation: u64,
    pub packets: Vec<Vec<Symbol>>,
}

impl DataValue {
    pub fn new(generation: u64, packets: Vec<Vec<Symbol>>) -> Result<Self, CodeError> {
        let l = packets.first().map_or(0, Vec::len);
        if l == 0 {
            return Err(CodeError::EmptyData);
        }
        if let Some((index, p)) = packets.iter().enumerate().find(|(_, p)| p.len() != l) {
            return Err(CodeError::LengthMismatch {
                index,
                got: p.len(),
                expected: l,
            });
        }
        Ok(DataValue { generation, packets })
    }

    pub fn zeros(generation: u64, r: usize, l: usize) -> Self {
        DataValue {
            generation,
            packets: vec![vec![Symbol::ZERO; l]; r],
        }
    }

    pub fn random<G: Rng + ?Sized>(rng: &mut G, generation: u64, r: usize, l: usize) -> Self {
        DataValue {
            generation,
            packets: (0..r).map(|_| (0..l).map(|_| Symbol(rng.gen())).collect()).collect(),
        }
    }

    /// Packets per value (`R`).
    pub fn r(&self) -> usize {
        self.packets.len()
    }

    /// Symbols per packet (`L`).
    pub fn l(&self) -> usize {
        self.packets.first().map_or(0, Vec::len)
    }

    pub fn is_zero(&self) -> bool {
        self.packets.iter().flatten().all(|s| s.is_zero())
    }

    /// Payload of the packet at `alpha`.
    pub fn evaluate(&self, alpha: Symbol) -> Vec<Symbol> {
        let l = self.l();
        let mut out = vec![Symbol::ZERO; l];
        // Horner from the highest coefficient down
        for row in self.packets.iter().rev() {
            for (acc, &c) in out.iter_mut().zip(row) {
                *acc = *acc * alpha + c;
            }
        }
        out
    }

    /// Big-endian bit serialization, 16 bits per symbol, row by row.
    pub fn to_bits(&self, out: &mut Vec<bool>) {
        for s in self.packets.iter().flatten() {
            push_symbol_bits(*s, out);
        }
    }
}

pub(crate) fn push_symbol_bits(s: Symbol, out: &mut Vec<bool>) {
    for b in (0..SYMBOL_BITS).rev() {
        out.push(s.0 >> b & 1 == 1);
    }
}

pub(crate) fn read_symbol_bits(bits: &[bool]) -> Symbol {
    Symbol(bits.iter().fold(0u16, |acc, &b| acc << 1 | b as u16))
}

/// Where a coded packet originates: the `index`-th packet its sender puts on
/// link `sender -> receiver` within a generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalPoint {
    pub alpha: Symbol,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedPacket {
    pub generation: u64,
    pub point: EvalPoint,
    pub payload: Vec<Symbol>,
}

fn check_distinct<'a>(alphas: impl Iterator<Item = &'a Symbol>) -> Result<(), CodeError> {
    let mut seen = HashSet::new();
    for &a in alphas {
        if a.is_zero() {
            return Err(CodeError::ZeroPoint);
        }
        if !seen.insert(a) {
            return Err(CodeError::DuplicatePoint(a));
        }
    }
    Ok(())
}

pub fn encode(data: &DataValue, points: &[EvalPoint]) -> Result<Vec<CodedPacket>, CodeError> {
    check_distinct(points.iter().map(|p| &p.alpha))?;
    Ok(points
        .iter()
        .map(|&point| CodedPacket {
            generation: data.generation,
            point,
            payload: data.evaluate(point.alpha),
        })
        .collect())
}

/// Interpolate `r` coefficient rows from `(alpha, payload)` pairs by
/// Gaussian elimination on the Vandermonde system. Alphas must be distinct
/// and nonzero, payloads all of length `l`.
pub(crate) fn interpolate(points: &[(Symbol, &[Symbol])], r: usize, l: usize) -> Vec<Vec<Symbol>> {
    debug_assert_eq!(points.len(), r);
    let width = r + l;
    let mut m: Vec<Vec<Symbol>> = points
        .iter()
        .map(|&(alpha, payload)| {
            let mut row = Vec::with_capacity(width);
            let mut p = Symbol::ONE;
            for _ in 0..r {
                row.push(p);
                p *= alpha;
            }
            row.extend_from_slice(payload);
            row
        })
        .collect();
    for col in 0..r {
        let pivot = (col..r)
            .find(|&i| !m[i][col].is_zero())
            .expect("Vandermonde matrix with distinct points is invertible");
        m.swap(col, pivot);
        let inv = m[col][col].inv().expect("nonzero pivot");
        for x in m[col].iter_mut() {
            *x *= inv;
        }
        let pivot_row = m[col].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col];
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                *x += factor * p;
            }
        }
    }
    m.into_iter().map(|row| row[r..].to_vec()).collect()
}

fn payload_len(packets: &[CodedPacket]) -> Result<usize, CodeError> {
    let l = packets.first().map_or(0, |p| p.payload.len());
    if l == 0 {
        return Err(CodeError::EmptyData);
    }
    if let Some((index, p)) = packets.iter().enumerate().find(|(_, p)| p.payload.len() != l) {
        return Err(CodeError::LengthMismatch {
            index,
            got: p.payload.len(),
            expected: l,
        });
    }
    Ok(l)
}

/// The unique data value matching the first `r` packets.
pub fn solve(packets: &[CodedPacket], r: usize) -> Result<DataValue, CodeError> {
    if r == 0 {
        return Err(CodeError::EmptyData);
    }
    if packets.len() < r {
        return Err(CodeError::InsufficientPackets {
            needed: r,
            got: packets.len(),
        });
    }
    check_distinct(packets.iter().map(|p| &p.point.alpha))?;
    let l = payload_len(packets)?;
    let pts: Vec<(Symbol, &[Symbol])> = packets[..r]
        .iter()
        .map(|p| (p.point.alpha, p.payload.as_slice()))
        .collect();
    Ok(DataValue {
        generation: packets[0].generation,
        packets: interpolate(&pts, r, l),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consistency {
    Consistent(DataValue),
    Inconsistent,
}

impl Consistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent(_))
    }
}

/// Every `r`-subset of `packets` has the same solution.
///
/// Because distinct-point Reed-Solomon is MDS, it suffices to solve one
/// `r`-subset and check every packet against that solution.
pub fn check_consistency(packets: &[CodedPacket], r: usize) -> Result<Consistency, CodeError> {
    let data = solve(packets, r)?;
    Ok(if verify_against(&packets[r..], &data) {
        Consistency::Consistent(data)
    } else {
        Consistency::Inconsistent
    })
}

/// Every packet payload equals the encoding of `own` at its point.
/// Vacuously true for an empty list.
pub fn verify_against(packets: &[CodedPacket], own: &DataValue) -> bool {
    packets
        .iter()
        .all(|p| p.payload.len() == own.l() && own.evaluate(p.point.alpha) == p.payload)
}

/// Deterministic collision-free assignment of evaluation points to the
/// link slots of a network. Slots are numbered row-major over links, and
/// slot `k` gets `alpha = k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    n: usize,
    offsets: Vec<Vec<u64>>,
    caps: Vec<Vec<u64>>,
}

impl Registry {
    pub fn new(net: &NetworkSpec) -> Result<Self, CodeError> {
        let total = net.total_capacity();
        if total > GROUP_ORDER as u64 {
            return Err(CodeError::RegistryOverflow { slots: total });
        }
        let mut offsets = vec![vec![0; net.n]; net.n];
        let mut next = 0;
        for (i, row) in offsets.iter_mut().enumerate() {
            for (j, off) in row.iter_mut().enumerate() {
                *off = next;
                next += net.cap(i, j);
            }
        }
        Ok(Registry {
            n: net.n,
            offsets,
            caps: net.cap.clone(),
        })
    }

    /// Point for slot `index` on link `from -> to`.
    pub fn point(&self, from: NodeId, to: NodeId, index: u32) -> EvalPoint {
        assert!(
            (index as u64) < self.caps[from][to],
            "slot {index} beyond capacity of link {from}->{to}"
        );
        EvalPoint {
            alpha: Symbol((self.offsets[from][to] + index as u64 + 1) as u16),
            slot: Slot {
                sender: from,
                receiver: to,
                index,
            },
        }
    }

    pub fn all_points(&self) -> BTreeMap<Slot, EvalPoint> {
        let mut out = BTreeMap::new();
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.caps[i][j] {
                    let p = self.point(i, j, k as u32);
                    out.insert(p.slot, p);
                }
            }
        }
        out
    }
}

/// Registry of evaluation points for generation `generation`. The
/// assignment does not depend on the generation index.
pub fn registry_points(net: &NetworkSpec, generation: u64) -> Result<BTreeMap<Slot, EvalPoint>, CodeError> {
    let _ = generation;
    Ok(Registry::new(net)?.all_points())
}
