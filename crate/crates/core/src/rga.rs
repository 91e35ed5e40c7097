//! Replicated Growable Array: an ordered sequence with tombstoned deletes.
//!
//! Concurrent inserts after the same anchor are ordered by descending id. The
//! functions here follow the list recursion of the reference definition
//! (scan from the head); the recursive form itself lives in the tests as an
//! equivalence oracle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::causal::LamportId;
use crate::datatype::{Datatype, DatatypeKind, RgaWire, WireOp};
use crate::message::Message;

pub type Value = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Elt {
    pub id: LamportId,
    pub value: Value,
    pub deleted: bool,
}

impl Elt {
    pub fn new(id: LamportId, value: impl Into<Value>) -> Self {
        Self { id, value: value.into(), deleted: false }
    }

    pub fn tombstone(id: LamportId, value: impl Into<Value>) -> Self {
        Self { id, value: value.into(), deleted: true }
    }
}

impl fmt::Display for Elt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}", self.id, self.value)?;
        if self.deleted {
            f.write_str("†")?;
        }
        Ok(())
    }
}

pub type RgaState = Vec<Elt>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RgaOp {
    Insert { elt: Elt, after: Option<LamportId> },
    Delete { target: LamportId },
}

impl RgaOp {
    pub fn insert(id: LamportId, value: impl Into<Value>, after: Option<LamportId>) -> Self {
        RgaOp::Insert { elt: Elt::new(id, value), after }
    }

    pub fn delete(target: LamportId) -> Self {
        RgaOp::Delete { target }
    }
}

/// Places `e` before the first element with a smaller id, after every
/// element with a larger one.
pub fn insert_body(xs: &[Elt], e: Elt) -> Vec<Elt> {
    let at = xs.iter().position(|x| x.id < e.id).unwrap_or(xs.len());
    let mut out = Vec::with_capacity(xs.len() + 1);
    out.extend_from_slice(&xs[..at]);
    out.push(e);
    out.extend_from_slice(&xs[at..]);
    out
}

/// Inserts `e` after the element with id `after` (or at the head), failing
/// when the anchor is absent.
pub fn rga_insert(xs: &[Elt], e: Elt, after: Option<LamportId>) -> Option<Vec<Elt>> {
    match after {
        None => Some(insert_body(xs, e)),
        Some(anchor) => {
            let k = xs.iter().position(|x| x.id == anchor)?;
            let mut out = xs[..=k].to_vec();
            out.extend(insert_body(&xs[k + 1..], e));
            Some(out)
        }
    }
}

/// Marks the element with id `target` as deleted, failing when absent.
pub fn rga_delete(xs: &[Elt], target: LamportId) -> Option<Vec<Elt>> {
    let k = xs.iter().position(|x| x.id == target)?;
    let mut out = xs.to_vec();
    out[k].deleted = true;
    Some(out)
}

pub fn rga_interpret(op: &RgaOp, state: &RgaState) -> Option<RgaState> {
    match op {
        RgaOp::Insert { elt, after } => rga_insert(state, elt.clone(), *after),
        RgaOp::Delete { target } => rga_delete(state, *target),
    }
}

fn contains_id(state: &[Elt], id: LamportId) -> bool {
    state.iter().any(|x| x.id == id)
}

/// Inserts reuse the message id and may only anchor at known elements;
/// deletes may only target known elements.
pub fn rga_validity(state: &RgaState, msg: &Message<RgaOp>) -> bool {
    match &msg.op {
        RgaOp::Insert { elt, after: None } => elt.id == msg.id,
        RgaOp::Insert { elt, after: Some(pos) } => elt.id == msg.id && contains_id(state, *pos),
        RgaOp::Delete { target } => contains_id(state, *target),
    }
}

/// The visible document: values of live elements, in order.
pub fn rga_read(state: &RgaState) -> Vec<Value> {
    state.iter().filter(|x| !x.deleted).map(|x| x.value.clone()).collect()
}

pub fn rga_text(state: &RgaState) -> String {
    rga_read(state).concat()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Rga;

impl Datatype for Rga {
    const KIND: DatatypeKind = DatatypeKind::Rga;
    type Op = RgaOp;
    type State = RgaState;

    fn initial() -> RgaState {
        Vec::new()
    }

    fn interpret(op: &RgaOp, state: &RgaState) -> Option<RgaState> {
        rga_interpret(op, state)
    }

    fn is_valid(state: &RgaState, msg: &Message<RgaOp>) -> bool {
        rga_validity(state, msg)
    }

    fn render(state: &RgaState) -> String {
        let elts: Vec<String> = state.iter().map(ToString::to_string).collect();
        format!("{:?} [{}]", rga_text(state), elts.join(" "))
    }

    fn diff(a: &RgaState, b: &RgaState) -> Vec<String> {
        if a == b {
            return Vec::new();
        }
        let at = a.iter().zip(b.iter()).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
        let show = |s: &RgaState| s.get(at).map_or_else(|| "end".to_string(), ToString::to_string);
        vec![format!(
            "first difference at index {at}: {} vs {} (lengths {} and {})",
            show(a),
            show(b),
            a.len(),
            b.len()
        )]
    }

    fn to_wire(op: &RgaOp) -> WireOp {
        WireOp::Rga(match op {
            RgaOp::Insert { elt, after } => RgaWire::Ins { id: elt.id, val: elt.value.clone(), after: *after },
            RgaOp::Delete { target } => RgaWire::Del { id: *target },
        })
    }

    fn from_wire(wire: WireOp) -> Result<RgaOp, String> {
        match wire {
            WireOp::Rga(RgaWire::Ins { id, val, after }) => Ok(RgaOp::insert(id, val, after)),
            WireOp::Rga(RgaWire::Del { id }) => Ok(RgaOp::delete(id)),
            other => Err(format!("expected an rga operation, got {}", other.kind())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::VectorClock;
    use crate::interp::apply_operations;
    use proptest::prelude::*;

    fn id(c: u64) -> LamportId {
        LamportId::new(c, 0)
    }

    fn elt(c: u64) -> Elt {
        Elt::new(id(c), c.to_string())
    }

    // Literal list recursion, kept independent of the scanning versions above.
    mod reference {
        use super::super::Elt;
        use crate::causal::LamportId;

        pub fn insert_body(xs: &[Elt], e: Elt) -> Vec<Elt> {
            match xs.split_first() {
                None => vec![e],
                Some((x, rest)) => {
                    if x.id < e.id {
                        let mut out = vec![e, x.clone()];
                        out.extend_from_slice(rest);
                        out
                    } else {
                        let mut out = vec![x.clone()];
                        out.extend(insert_body(rest, e));
                        out
                    }
                }
            }
        }

        pub fn insert(xs: &[Elt], e: Elt, after: Option<LamportId>) -> Option<Vec<Elt>> {
            match (after, xs.split_first()) {
                (None, _) => Some(insert_body(xs, e)),
                (Some(_), None) => None,
                (Some(i), Some((x, rest))) => {
                    if x.id == i {
                        let mut out = vec![x.clone()];
                        out.extend(insert_body(rest, e));
                        Some(out)
                    } else {
                        insert(rest, e, Some(i)).map(|t| {
                            let mut out = vec![x.clone()];
                            out.extend(t);
                            out
                        })
                    }
                }
            }
        }

        pub fn delete(xs: &[Elt], i: LamportId) -> Option<Vec<Elt>> {
            let (x, rest) = xs.split_first()?;
            if x.id == i {
                let mut out = vec![Elt { deleted: true, ..x.clone() }];
                out.extend_from_slice(rest);
                Some(out)
            } else {
                delete(rest, i).map(|t| {
                    let mut out = vec![x.clone()];
                    out.extend(t);
                    out
                })
            }
        }
    }

    #[test]
    fn insert_body_examples() {
        assert_eq!(insert_body(&[], elt(1)), vec![elt(1)]);
        assert_eq!(insert_body(&[elt(2)], elt(3)), vec![elt(3), elt(2)]);
        assert_eq!(insert_body(&[elt(5), elt(2)], elt(3)), vec![elt(5), elt(3), elt(2)]);
    }

    #[test]
    fn insert_examples() {
        assert_eq!(rga_insert(&[], elt(1), None), Some(vec![elt(1)]));
        assert_eq!(rga_insert(&[], elt(1), Some(id(7))), None);
        let a = Elt::new(id(1), "a");
        let b = Elt::new(id(2), "b");
        assert_eq!(rga_insert(&[a.clone()], b.clone(), Some(id(1))), Some(vec![a, b]));
    }

    #[test]
    fn insert_may_anchor_at_tombstone() {
        let dead = Elt::tombstone(id(1), "a");
        assert_eq!(rga_insert(&[dead.clone()], elt(2), Some(id(1))), Some(vec![dead, elt(2)]));
    }

    #[test]
    fn delete_examples() {
        assert_eq!(rga_delete(&[], id(1)), None);
        assert_eq!(rga_delete(&[Elt::new(id(1), "a")], id(1)), Some(vec![Elt::tombstone(id(1), "a")]));
        assert_eq!(rga_delete(&[Elt::tombstone(id(1), "a")], id(1)), Some(vec![Elt::tombstone(id(1), "a")]));
    }

    #[test]
    fn interpret_examples() {
        let a = Elt::new(id(1), "a");
        assert_eq!(rga_interpret(&RgaOp::Insert { elt: a.clone(), after: None }, &vec![]), Some(vec![a.clone()]));
        assert_eq!(rga_interpret(&RgaOp::delete(id(1)), &vec![a.clone()]), Some(vec![Elt::tombstone(id(1), "a")]));
        assert_eq!(rga_interpret(&RgaOp::delete(id(9)), &vec![a]), None);
        assert_eq!(apply_operations(&[RgaOp::delete(id(5))], &vec![], &rga_interpret), None);
    }

    #[test]
    fn validity_examples() {
        let m = |i: LamportId, op: RgaOp| Message::new(i, op, VectorClock::new());
        let (a, b) = (LamportId::new(1, 0), LamportId::new(1, 1));
        assert!(rga_validity(&vec![], &m(a, RgaOp::insert(a, "x", None))));
        assert!(!rga_validity(&vec![], &m(a, RgaOp::insert(b, "x", None))));
        assert!(!rga_validity(&vec![], &m(LamportId::new(2, 0), RgaOp::insert(LamportId::new(2, 0), "x", Some(b)))));
        let state = vec![Elt::new(b, "y")];
        assert!(rga_validity(&state, &m(LamportId::new(2, 0), RgaOp::delete(b))));
        assert!(!rga_validity(&state, &m(LamportId::new(2, 0), RgaOp::delete(a))));
        assert!(rga_validity(&state, &m(LamportId::new(2, 0), RgaOp::insert(LamportId::new(2, 0), "x", Some(b)))));
    }

    #[test]
    fn read_examples() {
        assert!(rga_read(&vec![]).is_empty());
        assert_eq!(rga_text(&vec![Elt::new(id(1), "a"), Elt::tombstone(id(2), "b")]), "a");
        assert_eq!(rga_text(&vec![Elt::new(id(2), "h"), Elt::new(id(1), "i")]), "hi");
    }

    #[test]
    fn concurrent_head_inserts_order_by_descending_id() {
        let one = RgaOp::insert(LamportId::new(1, 0), "a", None);
        let two = RgaOp::insert(LamportId::new(1, 1), "b", None);
        let xy = apply_operations([&one, &two], &vec![], &rga_interpret).unwrap();
        let yx = apply_operations([&two, &one], &vec![], &rga_interpret).unwrap();
        assert_eq!(xy, yx);
        assert_eq!(xy[0].id, LamportId::new(1, 1));
    }

    fn arb_state() -> impl Strategy<Value = RgaState> {
        // Distinct ids, arbitrary order and tombstones.
        prop::collection::btree_set(1u64..30, 0..8).prop_flat_map(|ids| {
            let ids: Vec<u64> = ids.into_iter().collect();
            let n = ids.len();
            (Just(ids).prop_shuffle(), prop::collection::vec(any::<bool>(), n)).prop_map(|(ids, dead)| {
                ids.into_iter().zip(dead).map(|(c, d)| Elt { id: id(c), value: c.to_string(), deleted: d }).collect()
            })
        })
    }

    fn ids_of(state: &RgaState) -> Vec<u64> {
        state.iter().map(|e| e.id.counter).collect()
    }

    fn arb_anchor(state: &RgaState) -> impl Strategy<Value = Option<LamportId>> {
        let mut choices: Vec<Option<LamportId>> = vec![None, Some(id(99))];
        choices.extend(state.iter().map(|e| Some(e.id)));
        prop::sample::select(choices)
    }

    proptest! {
        #[test]
        fn scanning_matches_recursion(state in arb_state(), c in 1u64..40, pick in any::<prop::sample::Index>()) {
            let e = elt(c);
            prop_assert_eq!(insert_body(&state, e.clone()), reference::insert_body(&state, e.clone()));
            let mut anchors = vec![None, Some(id(99))];
            anchors.extend(state.iter().map(|x| Some(x.id)));
            let anchor = anchors[pick.index(anchors.len())];
            prop_assert_eq!(rga_insert(&state, e.clone(), anchor), reference::insert(&state, e, anchor));
            let target = anchor.unwrap_or(id(c));
            prop_assert_eq!(rga_delete(&state, target), reference::delete(&state, target));
        }

        #[test]
        fn delete_commutes(state in arb_state(), a in 0u64..32, b in 0u64..32) {
            let x = RgaOp::delete(id(a));
            let y = RgaOp::delete(id(b));
            prop_assert_eq!(
                apply_operations([&x, &y], &state, &rga_interpret),
                apply_operations([&y, &x], &state, &rga_interpret)
            );
        }

        #[test]
        fn insert_commutes_under_preconditions(
            (state, i1, i2) in arb_state().prop_flat_map(|s| {
                let a = arb_anchor(&s);
                let b = arb_anchor(&s);
                (Just(s), a, b)
            }),
            c1 in 30u64..60, c2 in 30u64..60,
        ) {
            prop_assume!(c1 != c2);
            let x = RgaOp::insert(id(c1), "x", i1);
            let y = RgaOp::insert(id(c2), "y", i2);
            prop_assert_eq!(
                apply_operations([&x, &y], &state, &rga_interpret),
                apply_operations([&y, &x], &state, &rga_interpret)
            );
        }

        #[test]
        fn insert_delete_commute_when_distinct(
            (state, anchor) in arb_state().prop_flat_map(|s| { let a = arb_anchor(&s); (Just(s), a) }),
            c in 30u64..60, target in 0u64..30,
        ) {
            let x = RgaOp::insert(id(c), "x", anchor);
            let y = RgaOp::delete(id(target));
            prop_assert_eq!(
                apply_operations([&x, &y], &state, &rga_interpret),
                apply_operations([&y, &x], &state, &rga_interpret)
            );
        }

        #[test]
        fn tombstones_stay_in_place(state in arb_state(), pick in any::<prop::sample::Index>()) {
            prop_assume!(!state.is_empty());
            let target = state[pick.index(state.len())].id;
            let after = rga_delete(&state, target).unwrap();
            prop_assert_eq!(ids_of(&after), ids_of(&state));
        }
    }
}
