//! Logical time: Lamport identifiers, vector clocks and happens-before
//! consistency of operation sequences.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Index of a node in a fixed-size cluster.
pub type NodeIndex = usize;

/// A Lamport timestamp paired with the node that issued it.
///
/// Ordered lexicographically by `(counter, node)`, so any two distinct ids are
/// strictly ordered. Counters are bumped past every delivered id before a
/// broadcast, which makes the order consistent with causality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u64, NodeIndex)", into = "(u64, NodeIndex)")]
pub struct LamportId {
    pub counter: u64,
    pub node: NodeIndex,
}

impl LamportId {
    pub const fn new(counter: u64, node: NodeIndex) -> Self {
        Self { counter, node }
    }
}

impl From<(u64, NodeIndex)> for LamportId {
    fn from((counter, node): (u64, NodeIndex)) -> Self {
        Self { counter, node }
    }
}

impl From<LamportId> for (u64, NodeIndex) {
    fn from(id: LamportId) -> Self {
        (id.counter, id.node)
    }
}

impl fmt::Display for LamportId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.counter, self.node)
    }
}

impl FromStr for LamportId {
    type Err = String;

    /// Parses the `counter@node` form used by the control protocol.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (c, n) = s.split_once('@').ok_or_else(|| format!("expected <counter>@<node>, got {s:?}"))?;
        let counter = c.trim().parse().map_err(|e| format!("bad counter in {s:?}: {e}"))?;
        let node = n.trim().parse().map_err(|e| format!("bad node in {s:?}: {e}"))?;
        Ok(Self { counter, node })
    }
}

/// Lexicographic comparison on `(counter, node)`.
pub fn lamport_compare(a: LamportId, b: LamportId) -> Ordering {
    a.cmp(&b)
}

/// Per-node count of known messages. Absent entries are zero and are never
/// stored, so structural equality coincides with vector equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<(NodeIndex, u64)>", into = "Vec<(NodeIndex, u64)>")]
pub struct VectorClock {
    entries: BTreeMap<NodeIndex, u64>,
}

impl VectorClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, node: NodeIndex) -> u64 {
        self.entries.get(&node).copied().unwrap_or(0)
    }

    pub fn set(&mut self, node: NodeIndex, count: u64) {
        if count == 0 {
            self.entries.remove(&node);
        } else {
            self.entries.insert(node, count);
        }
    }

    pub fn increment(&mut self, node: NodeIndex) -> u64 {
        let next = self.get(node) + 1;
        self.entries.insert(node, next);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeIndex, u64)> + '_ {
        self.entries.iter().map(|(&n, &c)| (n, c))
    }

    /// Component-wise maximum.
    pub fn merge(&self, other: &VectorClock) -> VectorClock {
        let mut out = self.clone();
        for (node, count) in other.iter() {
            if count > out.get(node) {
                out.entries.insert(node, count);
            }
        }
        out
    }

    /// Component-wise `<=`.
    pub fn leq(&self, other: &VectorClock) -> bool {
        self.iter().all(|(node, count)| count <= other.get(node))
    }

    /// Causal-broadcast readiness: a message stamped `self` by `sender` can be
    /// delivered at a replica whose delivered clock is `local` when it is the
    /// next message from `sender` and everything else it depends on is known.
    pub fn ready_at(&self, sender: NodeIndex, local: &VectorClock) -> bool {
        self.get(sender) == local.get(sender) + 1
            && self.iter().all(|(node, count)| node == sender || count <= local.get(node))
    }
}

impl From<Vec<(NodeIndex, u64)>> for VectorClock {
    fn from(pairs: Vec<(NodeIndex, u64)>) -> Self {
        let mut vc = VectorClock::new();
        for (node, count) in pairs {
            if count > vc.get(node) {
                vc.set(node, count);
            }
        }
        vc
    }
}

impl From<VectorClock> for Vec<(NodeIndex, u64)> {
    fn from(vc: VectorClock) -> Self {
        vc.entries.into_iter().collect()
    }
}

impl FromIterator<(NodeIndex, u64)> for VectorClock {
    fn from_iter<T: IntoIterator<Item = (NodeIndex, u64)>>(iter: T) -> Self {
        iter.into_iter().collect::<Vec<_>>().into()
    }
}

pub fn vc_merge(a: &VectorClock, b: &VectorClock) -> VectorClock {
    a.merge(b)
}

pub fn vc_leq(a: &VectorClock, b: &VectorClock) -> bool {
    a.leq(b)
}

/// Outcome of asking a precedence oracle about an ordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precedence {
    FirstPrecedes,
    SecondPrecedes,
    Concurrent,
}

/// A strict partial order over items of type `M`.
pub trait PrecedenceOracle<M: ?Sized> {
    fn precedes(&self, a: &M, b: &M) -> bool;

    fn relation(&self, a: &M, b: &M) -> Precedence {
        if self.precedes(a, b) {
            Precedence::FirstPrecedes
        } else if self.precedes(b, a) {
            Precedence::SecondPrecedes
        } else {
            Precedence::Concurrent
        }
    }

    fn concurrent(&self, a: &M, b: &M) -> bool {
        self.relation(a, b) == Precedence::Concurrent
    }
}

impl<M: ?Sized, F> PrecedenceOracle<M> for F
where
    F: Fn(&M, &M) -> bool,
{
    fn precedes(&self, a: &M, b: &M) -> bool {
        self(a, b)
    }
}

/// `true` iff no element is preceded by an element that appears after it.
///
/// This is the pairwise form of the inductive definition (append `y` only if
/// it precedes nothing already in the list).
pub fn hb_consistent<M, O>(ops: &[M], oracle: &O) -> bool
where
    O: PrecedenceOracle<M> + ?Sized,
{
    first_inversion(ops, oracle).is_none()
}

/// The first `(earlier, later)` index pair with `ops[later] ≺ ops[earlier]`.
pub fn first_inversion<M, O>(ops: &[M], oracle: &O) -> Option<(usize, usize)>
where
    O: PrecedenceOracle<M> + ?Sized,
{
    for later in 0..ops.len() {
        for earlier in 0..later {
            if oracle.precedes(&ops[later], &ops[earlier]) {
                return Some((earlier, later));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(c: u64, n: usize) -> LamportId {
        LamportId::new(c, n)
    }

    fn vc(pairs: &[(usize, u64)]) -> VectorClock {
        pairs.iter().copied().collect()
    }

    #[test]
    fn lamport_examples() {
        assert_eq!(lamport_compare(id(3, 1), id(3, 1)), Ordering::Equal);
        assert_eq!(lamport_compare(id(2, 9), id(3, 0)), Ordering::Less);
        assert_eq!(lamport_compare(id(3, 1), id(3, 2)), Ordering::Less);
    }

    #[test]
    fn lamport_text_form() {
        assert_eq!("3@1".parse::<LamportId>().unwrap(), id(3, 1));
        assert_eq!(id(12, 4).to_string(), "12@4");
        assert!("3-1".parse::<LamportId>().is_err());
        assert_eq!(serde_json::to_string(&id(3, 1)).unwrap(), "[3,1]");
    }

    #[test]
    fn merge_examples() {
        assert_eq!(vc_merge(&vc(&[]), &vc(&[])), vc(&[]));
        assert_eq!(vc_merge(&vc(&[(0, 2)]), &vc(&[(1, 1)])), vc(&[(0, 2), (1, 1)]));
        assert_eq!(vc_merge(&vc(&[(0, 2), (1, 3)]), &vc(&[(0, 5), (1, 1)])), vc(&[(0, 5), (1, 3)]));
    }

    #[test]
    fn leq_examples() {
        assert!(vc_leq(&vc(&[]), &vc(&[(0, 1)])));
        assert!(vc_leq(&vc(&[(0, 2)]), &vc(&[(0, 2)])));
        assert!(!vc_leq(&vc(&[(0, 1), (1, 2)]), &vc(&[(0, 2), (1, 1)])));
    }

    #[test]
    fn zero_entries_are_absent() {
        assert_eq!(vc(&[(0, 0), (1, 2)]), vc(&[(1, 2)]));
        assert_eq!(serde_json::to_string(&vc(&[(2, 1), (0, 3)])).unwrap(), "[[0,3],[2,1]]");
    }

    #[test]
    fn readiness_rule() {
        let local = vc(&[(0, 1)]);
        assert!(vc(&[(0, 2)]).ready_at(0, &local));
        assert!(!vc(&[(0, 3)]).ready_at(0, &local));
        assert!(!vc(&[(0, 1), (1, 1)]).ready_at(0, &local));
        assert!(vc(&[(0, 1), (1, 1)]).ready_at(1, &local));
    }

    // m1 ≺ m2, everything else concurrent.
    fn chain(a: &u32, b: &u32) -> bool {
        *a == 1 && *b == 2
    }

    #[test]
    fn hb_consistent_examples() {
        let none: [u32; 0] = [];
        assert!(hb_consistent(&none, &chain));
        assert!(hb_consistent(&[1, 2], &chain));
        assert!(!hb_consistent(&[2, 1], &chain));
        let never = |_: &u32, _: &u32| false;
        assert!(hb_consistent(&[1, 2], &never));
        assert!(hb_consistent(&[2, 1], &never));
        assert_eq!(first_inversion(&[3, 2, 1], &chain), Some((1, 2)));
    }

    fn arb_id() -> impl Strategy<Value = LamportId> {
        (0u64..5, 0usize..4).prop_map(|(c, n)| id(c, n))
    }

    fn arb_vc() -> impl Strategy<Value = VectorClock> {
        proptest::collection::vec((0usize..4, 0u64..5), 0..5).prop_map(VectorClock::from)
    }

    proptest! {
        #[test]
        fn lamport_total_order(a in arb_id(), b in arb_id(), c in arb_id()) {
            let trichotomy = [a < b, a == b, a > b].iter().filter(|x| **x).count();
            prop_assert_eq!(trichotomy, 1);
            if a < b && b < c {
                prop_assert!(a < c);
            }
        }

        #[test]
        fn merge_is_a_join(a in arb_vc(), b in arb_vc(), c in arb_vc()) {
            prop_assert_eq!(a.merge(&b), b.merge(&a));
            prop_assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
            prop_assert_eq!(a.merge(&a), a.clone());
            prop_assert!(a.leq(&a.merge(&b)) && b.leq(&a.merge(&b)));
        }

        #[test]
        fn leq_is_a_partial_order(a in arb_vc(), b in arb_vc(), c in arb_vc()) {
            prop_assert!(a.leq(&a));
            if a.leq(&b) && b.leq(&a) {
                prop_assert_eq!(&a, &b);
            }
            if a.leq(&b) && b.leq(&c) {
                prop_assert!(a.leq(&c));
            }
        }

        #[test]
        fn prefixes_of_consistent_lists_are_consistent(
            order in proptest::collection::vec(0u32..8, 0..8),
        ) {
            // x ≺ y iff x < y: a total order, so consistency means sortedness.
            let lt = |a: &u32, b: &u32| a < b;
            let mut sorted = order.clone();
            sorted.sort();
            prop_assert!(hb_consistent(&sorted, &lt));
            for k in 0..=sorted.len() {
                prop_assert!(hb_consistent(&sorted[..k], &lt));
            }
        }

        #[test]
        fn concurrent_lists_are_consistent_in_any_order(
            mut xs in proptest::collection::vec(0u32..100, 0..7),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let never = |_: &u32, _: &u32| false;
            xs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(hb_consistent(&xs, &never));
        }
    }
}
