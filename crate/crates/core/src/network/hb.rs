//! Happens-before between messages, computed from recorded histories.
//!
//! `m1 ≺ m2` when the node that broadcast `m2` had already broadcast or
//! delivered `m1`, closed under transitivity.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use crate::causal::{LamportId, PrecedenceOracle};
use crate::message::{Event, EventKind, Message};

use super::SimError;

#[derive(Clone, Debug)]
pub struct HappensBefore {
    index: HashMap<LamportId, usize>,
    ids: Vec<LamportId>,
    preds: Vec<FixedBitSet>,
}

impl HappensBefore {
    pub fn from_histories<Op>(histories: &[Vec<Event<Op>>]) -> Self {
        let mut index = HashMap::new();
        let mut ids = Vec::new();
        for event in histories.iter().flatten() {
            index.entry(event.message.id).or_insert_with(|| {
                ids.push(event.message.id);
                ids.len() - 1
            });
        }
        let n = ids.len();
        let mut preds = vec![FixedBitSet::with_capacity(n); n];
        for history in histories {
            let mut known = FixedBitSet::with_capacity(n);
            for event in history {
                let k = index[&event.message.id];
                if event.kind == EventKind::Broadcast {
                    preds[k].union_with(&known);
                }
                known.insert(k);
            }
        }
        // Transitive closure by fixpoint; terminates because sets only grow.
        loop {
            let mut changed = false;
            for k in 0..n {
                let mut next = preds[k].clone();
                for p in preds[k].ones() {
                    if p != k {
                        next.union_with(&preds[p]);
                    }
                }
                if next != preds[k] {
                    preds[k] = next;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Self { index, ids, preds }
    }

    pub fn contains(&self, id: LamportId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `a ≺ b`; unknown ids precede nothing.
    pub fn precedes_id(&self, a: LamportId, b: LamportId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => self.preds[j].contains(i),
            _ => false,
        }
    }

    pub fn happens_before(&self, a: LamportId, b: LamportId) -> Result<bool, SimError> {
        for id in [a, b] {
            if !self.contains(id) {
                return Err(SimError::UnknownMessage(id));
            }
        }
        Ok(self.precedes_id(a, b))
    }

    /// Ids of every message that happens before `id`.
    pub fn predecessors(&self, id: LamportId) -> Vec<LamportId> {
        self.index.get(&id).map(|&k| self.preds[k].ones().map(|p| self.ids[p]).collect()).unwrap_or_default()
    }

    pub(crate) fn pred_set(&self, id: LamportId) -> Option<&FixedBitSet> {
        self.index.get(&id).map(|&k| &self.preds[k])
    }

    pub(crate) fn slot(&self, id: LamportId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub(crate) fn id_at(&self, slot: usize) -> LamportId {
        self.ids[slot]
    }

    /// A message that happens before itself, if the recorded histories
    /// contain a causal cycle.
    pub fn reflexive_witness(&self) -> Option<LamportId> {
        (0..self.ids.len()).find(|&k| self.preds[k].contains(k)).map(|k| self.ids[k])
    }
}

impl<Op> PrecedenceOracle<Message<Op>> for HappensBefore {
    fn precedes(&self, a: &Message<Op>, b: &Message<Op>) -> bool {
        self.precedes_id(a.id, b.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::VectorClock;

    fn m(c: u64, n: usize) -> Message<()> {
        Message::new(LamportId::new(c, n), (), VectorClock::new())
    }

    fn id(c: u64, n: usize) -> LamportId {
        LamportId::new(c, n)
    }

    #[test]
    fn same_node_order() {
        let (a, b) = (m(1, 0), m(2, 0));
        let h =
            vec![vec![Event::broadcast(a.clone()), Event::deliver(a), Event::broadcast(b.clone()), Event::deliver(b)]];
        let hb = HappensBefore::from_histories(&h);
        assert_eq!(hb.happens_before(id(1, 0), id(2, 0)), Ok(true));
        assert_eq!(hb.happens_before(id(2, 0), id(1, 0)), Ok(false));
        assert_eq!(hb.happens_before(id(1, 0), id(1, 0)), Ok(false));
        assert_eq!(hb.happens_before(id(1, 0), id(5, 5)), Err(SimError::UnknownMessage(id(5, 5))));
    }

    #[test]
    fn unseen_messages_are_concurrent() {
        let (a, b) = (m(1, 0), m(1, 1));
        let h = vec![
            vec![Event::broadcast(a.clone()), Event::deliver(a)],
            vec![Event::broadcast(b.clone()), Event::deliver(b)],
        ];
        let hb = HappensBefore::from_histories(&h);
        assert_eq!(hb.happens_before(id(1, 0), id(1, 1)), Ok(false));
        assert_eq!(hb.happens_before(id(1, 1), id(1, 0)), Ok(false));
    }

    #[test]
    fn chains_are_transitive() {
        let (a, b, c) = (m(1, 0), m(2, 1), m(3, 2));
        let h = vec![
            vec![Event::broadcast(a.clone()), Event::deliver(a.clone())],
            vec![Event::deliver(a), Event::broadcast(b.clone()), Event::deliver(b.clone())],
            vec![Event::deliver(b), Event::broadcast(c.clone()), Event::deliver(c)],
        ];
        let hb = HappensBefore::from_histories(&h);
        assert_eq!(hb.happens_before(id(1, 0), id(3, 2)), Ok(true));
        assert_eq!(hb.predecessors(id(3, 2)), vec![id(1, 0), id(2, 1)]);
        assert!(hb.reflexive_witness().is_none());
    }

    #[test]
    fn cycles_are_detectable() {
        let (a, b) = (m(1, 0), m(1, 1));
        let h = vec![
            vec![Event::deliver(b.clone()), Event::broadcast(a.clone())],
            vec![Event::deliver(a), Event::broadcast(b)],
        ];
        assert!(HappensBefore::from_histories(&h).reflexive_witness().is_some());
    }
}
