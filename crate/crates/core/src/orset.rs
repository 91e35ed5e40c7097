//! Operation-based observed-remove set.
//!
//! Each element maps to the ids of the additions that introduced it. A remove
//! carries the ids its issuer had observed, so a concurrent add survives it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::causal::LamportId;
use crate::datatype::{Datatype, DatatypeKind, OrsetWire, WireOp};
use crate::message::Message;

pub type Element = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrSetOp {
    Add { id: LamportId, elem: Element },
    Rem { ids: BTreeSet<LamportId>, elem: Element },
}

impl OrSetOp {
    pub fn add(id: LamportId, elem: impl Into<Element>) -> Self {
        OrSetOp::Add { id, elem: elem.into() }
    }

    pub fn rem(ids: impl IntoIterator<Item = LamportId>, elem: impl Into<Element>) -> Self {
        OrSetOp::Rem { ids: ids.into_iter().collect(), elem: elem.into() }
    }
}

pub fn op_elem(op: &OrSetOp) -> &Element {
    match op {
        OrSetOp::Add { elem, .. } | OrSetOp::Rem { elem, .. } => elem,
    }
}

/// Element to addition ids. Elements with no ids are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrSetState {
    tags: BTreeMap<Element, BTreeSet<LamportId>>,
}

impl OrSetState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from raw entries, dropping empty tag sets.
    pub fn from_entries<I, E, T>(entries: I) -> Self
    where
        I: IntoIterator<Item = (E, T)>,
        E: Into<Element>,
        T: IntoIterator<Item = LamportId>,
    {
        let mut state = Self::new();
        for (elem, ids) in entries {
            state.set_tags(elem.into(), ids.into_iter().collect());
        }
        state
    }

    pub fn tags(&self, elem: &str) -> BTreeSet<LamportId> {
        self.tags.get(elem).cloned().unwrap_or_default()
    }

    pub fn contains(&self, elem: &str) -> bool {
        self.tags.contains_key(elem)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Element, &BTreeSet<LamportId>)> {
        self.tags.iter()
    }

    fn set_tags(&mut self, elem: Element, ids: BTreeSet<LamportId>) {
        if ids.is_empty() {
            self.tags.remove(&elem);
        } else {
            self.tags.insert(elem, ids);
        }
    }
}

/// Add unions its id into the element's tags; Rem subtracts its id set.
pub fn orset_interpret(op: &OrSetOp, state: &OrSetState) -> Option<OrSetState> {
    let elem = op_elem(op);
    let mut after = state.tags(elem);
    match op {
        OrSetOp::Add { id, .. } => {
            after.insert(*id);
        }
        OrSetOp::Rem { ids, .. } => after.retain(|i| !ids.contains(i)),
    }
    let mut next = state.clone();
    next.set_tags(elem.clone(), after);
    Some(next)
}

/// Add must reuse the message id; Rem must carry exactly the observed tags.
pub fn orset_validity(state: &OrSetState, msg: &Message<OrSetOp>) -> bool {
    match &msg.op {
        OrSetOp::Add { id, .. } => *id == msg.id,
        OrSetOp::Rem { ids, elem } => *ids == state.tags(elem),
    }
}

pub fn orset_members(state: &OrSetState) -> BTreeSet<Element> {
    state.tags.keys().cloned().collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrSet;

impl Datatype for OrSet {
    const KIND: DatatypeKind = DatatypeKind::Orset;
    type Op = OrSetOp;
    type State = OrSetState;

    fn initial() -> OrSetState {
        OrSetState::new()
    }

    fn interpret(op: &OrSetOp, state: &OrSetState) -> Option<OrSetState> {
        orset_interpret(op, state)
    }

    fn is_valid(state: &OrSetState, msg: &Message<OrSetOp>) -> bool {
        orset_validity(state, msg)
    }

    fn render(state: &OrSetState) -> String {
        let entries: Vec<String> = state
            .entries()
            .map(|(e, ids)| {
                let ids: Vec<String> = ids.iter().map(ToString::to_string).collect();
                format!("{e:?}:[{}]", ids.join(","))
            })
            .collect();
        format!("{{{}}}", entries.join(", "))
    }

    fn diff(a: &OrSetState, b: &OrSetState) -> Vec<String> {
        let elems: BTreeSet<&Element> = a.tags.keys().chain(b.tags.keys()).collect();
        elems
            .into_iter()
            .filter(|e| a.tags.get(*e) != b.tags.get(*e))
            .map(|e| {
                let show = |s: &OrSetState| {
                    let ids: Vec<String> = s.tags(e).iter().map(ToString::to_string).collect();
                    format!("[{}]", ids.join(","))
                };
                format!("{e:?}: {} vs {}", show(a), show(b))
            })
            .collect()
    }

    fn to_wire(op: &OrSetOp) -> WireOp {
        WireOp::Orset(match op {
            OrSetOp::Add { id, elem } => OrsetWire::Add { elem: elem.clone(), id: *id },
            OrSetOp::Rem { ids, elem } => OrsetWire::Rem { elem: elem.clone(), ids: ids.iter().copied().collect() },
        })
    }

    fn from_wire(wire: WireOp) -> Result<OrSetOp, String> {
        match wire {
            WireOp::Orset(OrsetWire::Add { elem, id }) => Ok(OrSetOp::Add { id, elem }),
            WireOp::Orset(OrsetWire::Rem { elem, ids }) => {
                if ids.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("rem ids must be sorted and distinct".into());
                }
                Ok(OrSetOp::Rem { ids: ids.into_iter().collect(), elem })
            }
            other => Err(format!("expected an orset operation, got {}", other.kind())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::VectorClock;
    use crate::interp::apply_operations;
    use proptest::prelude::*;

    fn id(c: u64, n: usize) -> LamportId {
        LamportId::new(c, n)
    }

    fn msg(i: LamportId, op: OrSetOp) -> Message<OrSetOp> {
        Message::new(i, op, VectorClock::new())
    }

    #[test]
    fn op_elem_projects() {
        assert_eq!(op_elem(&OrSetOp::add(id(1, 0), "x")), "x");
        assert_eq!(op_elem(&OrSetOp::rem([], "y")), "y");
        assert_eq!(op_elem(&OrSetOp::rem([id(1, 0), id(2, 1)], "x")), "x");
    }

    #[test]
    fn interpret_examples() {
        let added = orset_interpret(&OrSetOp::add(id(1, 0), "x"), &OrSetState::new()).unwrap();
        assert_eq!(added, OrSetState::from_entries([("x", [id(1, 0)])]));

        let removed = orset_interpret(&OrSetOp::rem([id(1, 0)], "x"), &added).unwrap();
        assert_eq!(removed, OrSetState::new());
        assert!(!removed.contains("x"));

        let both =
            apply_operations(&[OrSetOp::rem([id(1, 0)], "x"), OrSetOp::add(id(2, 1), "x")], &added, &orset_interpret)
                .unwrap();
        assert_eq!(both, OrSetState::from_entries([("x", [id(2, 1)])]));
        assert!(orset_members(&both).contains("x"));
    }

    #[test]
    fn validity_examples() {
        let state = OrSetState::from_entries([("x", [id(1, 0), id(2, 1)])]);
        assert!(orset_validity(&state, &msg(id(3, 1), OrSetOp::add(id(3, 1), "x"))));
        assert!(!orset_validity(&state, &msg(id(3, 1), OrSetOp::add(id(4, 1), "x"))));
        assert!(orset_validity(&state, &msg(id(3, 1), OrSetOp::rem([id(1, 0), id(2, 1)], "x"))));
        assert!(!orset_validity(&state, &msg(id(3, 1), OrSetOp::rem([id(1, 0)], "x"))));
        assert!(orset_validity(&state, &msg(id(3, 1), OrSetOp::rem([], "y"))));
    }

    #[test]
    fn members_examples() {
        assert!(orset_members(&OrSetState::new()).is_empty());
        let s = OrSetState::from_entries([("x", vec![id(1, 0)]), ("y", vec![])]);
        assert_eq!(orset_members(&s), ["x".to_string()].into_iter().collect());
        assert!(!s.contains("y"));
    }

    #[test]
    fn wire_rejects_unsorted_ids() {
        let wire = WireOp::Orset(OrsetWire::Rem { elem: "x".into(), ids: vec![id(2, 0), id(1, 0)] });
        assert!(OrSet::from_wire(wire).is_err());
        let op = OrSetOp::rem([id(2, 0), id(1, 0)], "x");
        assert_eq!(OrSet::from_wire(OrSet::to_wire(&op)).unwrap(), op);
    }

    fn arb_id() -> impl Strategy<Value = LamportId> {
        (0u64..6, 0usize..3).prop_map(|(c, n)| id(c, n))
    }

    fn arb_elem() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c"]).prop_map(String::from)
    }

    fn arb_state() -> impl Strategy<Value = OrSetState> {
        prop::collection::vec((arb_elem(), prop::collection::btree_set(arb_id(), 0..4)), 0..4)
            .prop_map(OrSetState::from_entries)
    }

    fn commute(x: &OrSetOp, y: &OrSetOp, s: &OrSetState) -> bool {
        apply_operations([x, y], s, &orset_interpret) == apply_operations([y, x], s, &orset_interpret)
    }

    proptest! {
        #[test]
        fn add_add_commute(a in arb_id(), b in arb_id(), e1 in arb_elem(), e2 in arb_elem(), s in arb_state()) {
            prop_assert!(commute(&OrSetOp::add(a, e1), &OrSetOp::add(b, e2), &s));
        }

        #[test]
        fn rem_rem_commute(
            a in prop::collection::btree_set(arb_id(), 0..4),
            b in prop::collection::btree_set(arb_id(), 0..4),
            e1 in arb_elem(), e2 in arb_elem(), s in arb_state(),
        ) {
            prop_assert!(commute(&OrSetOp::rem(a, e1), &OrSetOp::rem(b, e2), &s));
        }

        #[test]
        fn add_rem_commute_when_independent(
            i in arb_id(),
            is in prop::collection::btree_set(arb_id(), 0..4),
            e1 in arb_elem(), e2 in arb_elem(), s in arb_state(),
        ) {
            prop_assume!(!is.contains(&i));
            prop_assert!(commute(&OrSetOp::add(i, e1), &OrSetOp::rem(is, e2), &s));
        }

        #[test]
        fn interpretation_keeps_canonical_form(op_add in any::<bool>(), i in arb_id(), e in arb_elem(), s in arb_state()) {
            let op = if op_add { OrSetOp::add(i, e) } else { OrSetOp::rem(s.tags(&e), e) };
            let next = orset_interpret(&op, &s).unwrap();
            prop_assert!(next.entries().all(|(_, ids)| !ids.is_empty()));
        }
    }
}
