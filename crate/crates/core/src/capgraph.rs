//! Capacity-limited network graphs and the consensus capacity upper bound.
//!
//! Capacities are integers measured in coded packets per generation. For a
//! non-empty node set `S` with `|S| <= f`, every `gamma` of `n - |S| - f`
//! nodes outside `S` gives an incoming capacity `I_S(gamma)`; the bound `I*`
//! is the minimum over all such pairs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CapError {
    #[error("network needs n >= 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("capacity matrix must be {n}x{n}: {detail}")]
    MatrixShape { n: usize, detail: String },
    #[error("self-loop capacity cap[{0}][{0}] must be 0")]
    SelfLoop(NodeId),
    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("duplicate node {0} in node set")]
    DuplicateNode(NodeId),
    #[error("set size violation: |S| = {s}, f = {f}, n = {n}")]
    SizeViolation { s: usize, f: usize, n: usize },
    #[error("gamma overlaps S at node {0}")]
    OverlapViolation(NodeId),
    #[error("operation requires n = 4 and f = 1 (got n = {n}, f = {f})")]
    ShapeViolation { n: usize, f: usize },
    #[error("pair sum needs two distinct nodes, got {0} twice")]
    SameNode(NodeId),
    #[error("no (S, gamma) term exists for n = {n}, f = {f}")]
    NoTerms { n: usize, f: usize },
    #[error("rate {r} is not below the four-node bound {bound}")]
    RateNotBelowBound { r: u64, bound: u64 },
    #[error("no qualifying check triple")]
    NoTriple,
}

/// Directed network: `cap[i][j]` packets per generation on link `i -> j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub f: usize,
    #[serde(rename = "capacities")]
    pub cap: Vec<Vec<u64>>,
}

impl NetworkSpec {
    pub fn new(n: usize, f: usize, cap: Vec<Vec<u64>>) -> Result<Self, CapError> {
        let net = NetworkSpec { n, f, cap };
        net.validate()?;
        Ok(net)
    }

    /// Complete network where every directed link carries `c` packets.
    pub fn uniform(n: usize, f: usize, c: u64) -> Self {
        let cap = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0 } else { c }).collect())
            .collect();
        NetworkSpec { n, f, cap }
    }

    pub fn validate(&self) -> Result<(), CapError> {
        if self.n < 2 {
            return Err(CapError::TooFewNodes(self.n));
        }
        if self.cap.len() != self.n {
            return Err(CapError::MatrixShape {
                n: self.n,
                detail: format!("{} rows", self.cap.len()),
            });
        }
        for (i, row) in self.cap.iter().enumerate() {
            if row.len() != self.n {
                return Err(CapError::MatrixShape {
                    n: self.n,
                    detail: format!("row {i} has {} entries", row.len()),
                });
            }
            if row[i] != 0 {
                return Err(CapError::SelfLoop(i));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn cap(&self, from: NodeId, to: NodeId) -> u64 {
        self.cap[from][to]
    }

    /// All `n(n-1)` off-diagonal entries are positive.
    pub fn is_complete(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.cap[i][j] > 0))
    }

    pub fn total_capacity(&self) -> u64 {
        self.cap.iter().flatten().sum()
    }

    pub fn scaled(&self, k: u64) -> Self {
        NetworkSpec {
            n: self.n,
            f: self.f,
            cap: self.cap.iter().map(|row| row.iter().map(|c| c * k).collect()).collect(),
        }
    }

    fn require_four(&self) -> Result<(), CapError> {
        if self.n != 4 || self.f != 1 {
            return Err(CapError::ShapeViolation { n: self.n, f: self.f });
        }
        Ok(())
    }
}

/// Ordered set of node indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet(Vec<NodeId>);

impl NodeSet {
    pub fn new(mut members: Vec<NodeId>, n: usize) -> Result<Self, CapError> {
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(CapError::DuplicateNode(w[0]));
            }
        }
        if let Some(&node) = members.iter().find(|&&m| m >= n) {
            return Err(CapError::NodeOutOfRange { node, n });
        }
        Ok(NodeSet(members))
    }

    pub(crate) fn from_sorted(members: Vec<NodeId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        NodeSet(members)
    }

    pub fn members(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.0.binary_search(&node).is_ok()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, m) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", node_name(*m))?;
        }
        write!(f, "}}")
    }
}

/// Letter names for small networks (`A`, `B`, ...), numeric beyond 26.
pub fn node_name(node: NodeId) -> String {
    if node < 26 {
        char::from(b'A' + node as u8).to_string()
    } else {
        format!("P{node}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub s: NodeSet,
    pub gamma: NodeSet,
    pub incoming: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub i_star: u64,
    pub witness_s: NodeSet,
    pub witness_gamma: NodeSet,
    pub all_terms: Vec<BoundTerm>,
}

/// Lexicographic `k`-subsets of `pool` (which must be sorted).
fn combinations(pool: &[NodeId], k: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    if k > pool.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        // rightmost index that can still advance
        let Some(i) = (0..k).rev().find(|&i| idx[i] < pool.len() - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn enumerate_gammas(net: &NetworkSpec, s: &NodeSet) -> Result<Vec<NodeSet>, CapError> {
    let size_err = CapError::SizeViolation {
        s: s.len(),
        f: net.f,
        n: net.n,
    };
    if s.len() > net.f || net.n < s.len() + net.f + 1 {
        return Err(size_err);
    }
    if let Some(&node) = s.members().iter().find(|&&m| m >= net.n) {
        return Err(CapError::NodeOutOfRange { node, n: net.n });
    }
    let rest: Vec<NodeId> = (0..net.n).filter(|v| !s.contains(*v)).collect();
    let k = net.n - s.len() - net.f;
    Ok(combinations(&rest, k).into_iter().map(NodeSet::from_sorted).collect())
}

pub fn incoming_capacity(net: &NetworkSpec, s: &NodeSet, gamma: &NodeSet) -> Result<u64, CapError> {
    if let Some(&node) = gamma.members().iter().find(|&&g| s.contains(g)) {
        return Err(CapError::OverlapViolation(node));
    }
    Ok(gamma
        .members()
        .iter()
        .flat_map(|&j| s.members().iter().map(move |&i| (j, i)))
        .map(|(j, i)| net.cap(j, i))
        .sum())
}

/// `I*` together with the minimizing `(S, gamma)` and every evaluated term.
///
/// `S` ranges over non-empty sets of size at most `f`; ties go to the
/// lexicographically smallest `(S, gamma)`.
pub fn capacity_upper_bound(net: &NetworkSpec) -> Result<BoundReport, CapError> {
    net.validate()?;
    let nodes: Vec<NodeId> = (0..net.n).collect();
    let mut all_terms = Vec::new();
    for size in 1..=net.f {
        if net.n < size + net.f + 1 {
            break;
        }
        for members in combinations(&nodes, size) {
            let s = NodeSet::from_sorted(members);
            for gamma in enumerate_gammas(net, &s)? {
                let incoming = incoming_capacity(net, &s, &gamma)?;
                all_terms.push(BoundTerm {
                    s: s.clone(),
                    gamma,
                    incoming,
                });
            }
        }
    }
    let best = all_terms
        .iter()
        .min_by(|a, b| (a.incoming, &a.s, &a.gamma).cmp(&(b.incoming, &b.s, &b.gamma)))
        .ok_or(CapError::NoTerms { n: net.n, f: net.f })?;
    Ok(BoundReport {
        i_star: best.incoming,
        witness_s: best.s.clone(),
        witness_gamma: best.gamma.clone(),
        all_terms: all_terms.clone(),
    })
}

/// The twelve two-incoming-link sums of a 4-node network, in the order
/// `BA+CA, BA+DA, CA+DA, AB+CB, ...`, labelled by target and the two sources.
pub fn four_node_terms(net: &NetworkSpec) -> Result<Vec<(NodeId, NodeId, NodeId, u64)>, CapError> {
    net.require_four()?;
    let mut terms = Vec::with_capacity(12);
    for target in 0..4 {
        let sources: Vec<NodeId> = (0..4).filter(|&v| v != target).collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let (x, y) = (sources[a], sources[b]);
            terms.push((target, x, y, net.cap(x, target) + net.cap(y, target)));
        }
    }
    Ok(terms)
}

pub fn four_node_bound(net: &NetworkSpec) -> Result<u64, CapError> {
    Ok(four_node_terms(net)?
        .into_iter()
        .map(|t| t.3)
        .min()
        .expect("twelve terms"))
}

pub fn pair_sum(net: &NetworkSpec, x: NodeId, y: NodeId) -> Result<u64, CapError> {
    if x == y {
        return Err(CapError::SameNode(x));
    }
    for node in [x, y] {
        if node >= net.n {
            return Err(CapError::NodeOutOfRange { node, n: net.n });
        }
    }
    Ok(net.cap(x, y) + net.cap(y, x))
}

pub fn count_pairs_above(net: &NetworkSpec, r: u64) -> Result<usize, CapError> {
    if net.n != 4 {
        return Err(CapError::ShapeViolation { n: net.n, f: net.f });
    }
    let mut count = 0;
    for x in 0..4 {
        for y in x + 1..4 {
            if pair_sum(net, x, y)? > r {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Lexicographically smallest `(x, y, z)`, `x < z`, with both pair sums
/// `xy` and `yz` above `r`. `y` is the shared node.
pub fn select_check_triple(net: &NetworkSpec, r: u64) -> Result<(NodeId, NodeId, NodeId), CapError> {
    let bound = four_node_bound(net)?;
    if r >= bound {
        return Err(CapError::RateNotBelowBound { r, bound });
    }
    for x in 0..4 {
        for y in 0..4 {
            for z in x + 1..4 {
                if y == x || y == z {
                    continue;
                }
                if pair_sum(net, x, y)? > r && pair_sum(net, y, z)? > r {
                    return Ok((x, y, z));
                }
            }
        }
    }
    // at least three pair sums exceed r whenever r is below the bound
    Err(CapError::NoTriple)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones() -> NetworkSpec {
        NetworkSpec::uniform(4, 1, 1)
    }

    fn set(v: &[NodeId]) -> NodeSet {
        NodeSet::new(v.to_vec(), 16).unwrap()
    }

    /// Bitmask enumeration, independent of `combinations`.
    fn brute_force_bound(net: &NetworkSpec) -> u64 {
        let n = net.n;
        let mut best = u64::MAX;
        for s in 1u32..(1 << n) {
            let ss = s.count_ones() as usize;
            if ss > net.f || n < ss + net.f + 1 {
                continue;
            }
            for g in 1u32..(1 << n) {
                if g & s != 0 || g.count_ones() as usize != n - ss - net.f {
                    continue;
                }
                let mut total = 0;
                for j in 0..n {
                    for i in 0..n {
                        if g >> j & 1 == 1 && s >> i & 1 == 1 {
                            total += net.cap[j][i];
                        }
                    }
                }
                best = best.min(total);
            }
        }
        best
    }

    #[test]
    fn gammas_for_single_node() {
        let g = enumerate_gammas(&ones(), &set(&[0])).unwrap();
        assert_eq!(g, vec![set(&[1, 2]), set(&[1, 3]), set(&[2, 3])]);
    }

    #[test]
    fn gamma_count_matches_binomial() {
        let net = NetworkSpec::uniform(7, 2, 1);
        assert_eq!(enumerate_gammas(&net, &set(&[0, 1])).unwrap().len(), 10);
    }

    #[test]
    fn oversized_s_is_rejected() {
        let err = enumerate_gammas(&ones(), &set(&[0, 1])).unwrap_err();
        assert!(matches!(err, CapError::SizeViolation { .. }));
    }

    #[test]
    fn incoming_capacity_cases() {
        assert_eq!(incoming_capacity(&ones(), &set(&[0]), &set(&[1, 2])).unwrap(), 2);
        let mut net = ones();
        net.cap[1][0] = 2;
        assert_eq!(incoming_capacity(&net, &set(&[0]), &set(&[1, 2])).unwrap(), 3);
        assert_eq!(
            incoming_capacity(&net, &set(&[0]), &set(&[0, 1])),
            Err(CapError::OverlapViolation(0))
        );
    }

    #[test]
    fn uniform_bound_is_two() {
        let rep = capacity_upper_bound(&ones()).unwrap();
        assert_eq!(rep.i_star, 2);
        assert_eq!(rep.witness_s, set(&[0]));
        assert_eq!(rep.witness_gamma, set(&[1, 2]));
        assert_eq!(rep.all_terms.len(), 12);
    }

    #[test]
    fn doubled_ab_bc_links() {
        let mut net = ones();
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            net.cap[i][j] = 2;
        }
        let rep = capacity_upper_bound(&net).unwrap();
        assert_eq!(rep.i_star, brute_force_bound(&net));
        assert_eq!(rep.i_star, 2);
        assert_eq!(rep.witness_s, set(&[0]));
        assert_eq!(rep.witness_gamma, set(&[2, 3]));
    }

    #[test]
    fn four_node_bound_cases() {
        assert_eq!(four_node_bound(&ones()).unwrap(), 2);
        let mut net = ones();
        for i in 0..3 {
            net.cap[i][3] = 5;
        }
        // hand enumeration: every term into D is 10, every other term is 2
        let terms = four_node_terms(&net).unwrap();
        assert_eq!(terms.iter().filter(|t| t.3 == 10).count(), 3);
        assert_eq!(terms.iter().filter(|t| t.3 == 2).count(), 9);
        assert_eq!(four_node_bound(&net).unwrap(), 2);
        let five = NetworkSpec::uniform(5, 1, 1);
        assert!(matches!(four_node_bound(&five), Err(CapError::ShapeViolation { .. })));
    }

    #[test]
    fn pair_sums() {
        assert_eq!(pair_sum(&ones(), 0, 1).unwrap(), 2);
        let mut net = ones();
        net.cap[0][1] = 3;
        assert_eq!(pair_sum(&net, 0, 1).unwrap(), 4);
        assert_eq!(pair_sum(&net, 0, 0), Err(CapError::SameNode(0)));
    }

    #[test]
    fn pair_counts() {
        assert_eq!(count_pairs_above(&ones(), 1).unwrap(), 6);
        assert_eq!(count_pairs_above(&ones(), 2).unwrap(), 0);
    }

    #[test]
    fn triple_selection() {
        assert_eq!(select_check_triple(&ones(), 1).unwrap(), (0, 1, 2));
        // only AB, BC, CD sums exceed r = 6
        let net = NetworkSpec::new(
            4,
            1,
            vec![vec![0, 6, 2, 2], vec![5, 0, 5, 5], vec![4, 6, 0, 5], vec![3, 1, 5, 0]],
        )
        .unwrap();
        let above: Vec<_> = (0..4)
            .flat_map(|x| (x + 1..4).map(move |y| (x, y)))
            .filter(|&(x, y)| pair_sum(&net, x, y).unwrap() > 6)
            .collect();
        assert_eq!(above, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(four_node_bound(&net).unwrap(), 7);
        assert_eq!(select_check_triple(&net, 6).unwrap(), (0, 1, 2));
        assert!(matches!(
            select_check_triple(&ones(), 2),
            Err(CapError::RateNotBelowBound { .. })
        ));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            NetworkSpec::new(4, 1, vec![vec![0; 4]; 3]),
            Err(CapError::MatrixShape { .. })
        ));
        let mut cap = vec![vec![1; 3]; 3];
        cap[1][1] = 0;
        cap[2][2] = 0;
        assert_eq!(NetworkSpec::new(3, 1, cap), Err(CapError::SelfLoop(0)));
        assert_eq!(NodeSet::new(vec![1, 1], 4), Err(CapError::DuplicateNode(1)));
    }

    #[test]
    fn zero_fault_budget_has_no_terms() {
        let net = NetworkSpec::uniform(4, 0, 1);
        assert!(matches!(capacity_upper_bound(&net), Err(CapError::NoTerms { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn net_strategy() -> impl Strategy<Value = NetworkSpec> {
            (4usize..=6, 1usize..=2)
                .prop_flat_map(|(n, f)| (Just(n), Just(f), proptest::collection::vec(0u64..=10, n * n)))
                .prop_map(|(n, f, flat)| {
                    let cap = (0..n)
                        .map(|i| (0..n).map(|j| if i == j { 0 } else { flat[i * n + j] }).collect())
                        .collect();
                    NetworkSpec { n, f, cap }
                })
        }

        fn complete4() -> impl Strategy<Value = NetworkSpec> {
            proptest::collection::vec(1u64..=10, 16).prop_map(|flat| {
                let cap = (0..4)
                    .map(|i| (0..4).map(|j| if i == j { 0 } else { flat[i * 4 + j] }).collect())
                    .collect();
                NetworkSpec { n: 4, f: 1, cap }
            })
        }

        proptest! {
            #[test]
            fn bound_matches_brute_force(net in net_strategy()) {
                let rep = capacity_upper_bound(&net).unwrap();
                prop_assert_eq!(rep.i_star, brute_force_bound(&net));
                prop_assert_eq!(rep.witness_gamma.len(), net.n - rep.witness_s.len() - net.f);
                prop_assert!(rep.witness_gamma.members().iter().all(|g| !rep.witness_s.contains(*g)));
                prop_assert_eq!(rep.i_star, rep.all_terms.iter().map(|t| t.incoming).min().unwrap());
            }

            #[test]
            fn incoming_capacity_is_monotone(net in net_strategy(), i in 0usize..4, j in 0usize..4) {
                prop_assume!(i != j);
                let mut bigger = net.clone();
                bigger.cap[i][j] += 1;
                for term in capacity_upper_bound(&net).unwrap().all_terms {
                    let before = incoming_capacity(&net, &term.s, &term.gamma).unwrap();
                    let after = incoming_capacity(&bigger, &term.s, &term.gamma).unwrap();
                    prop_assert!(after >= before);
                }
            }

            #[test]
            fn four_node_bound_is_i_star(net in complete4()) {
                prop_assert_eq!(four_node_bound(&net).unwrap(), capacity_upper_bound(&net).unwrap().i_star);
            }

            #[test]
            fn three_pairs_above_any_lower_rate(net in complete4(), below in 1u64..20) {
                let bound = four_node_bound(&net).unwrap();
                prop_assume!(below <= bound);
                let r = bound - below;
                prop_assert!(count_pairs_above(&net, r).unwrap() >= 3);
                let (x, y, z) = select_check_triple(&net, r).unwrap();
                prop_assert!(x < z);
                prop_assert!(pair_sum(&net, x, y).unwrap() > r);
                prop_assert!(pair_sum(&net, y, z).unwrap() > r);
            }
        }
    }
}
