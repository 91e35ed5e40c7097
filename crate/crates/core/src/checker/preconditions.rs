//! Datatype-specific audits that the preconditions of each commutativity
//! lemma are discharged by the network in a concrete execution.

use std::collections::{BTreeMap, BTreeSet};

use crate::causal::LamportId;
use crate::counter::Counter;
use crate::datatype::Datatype;
use crate::message::{Event, EventKind, Message};
use crate::network::HappensBefore;
use crate::orset::{OrSet, OrSetOp};
use crate::rga::{Rga, RgaOp};

pub trait PreconditionAudit: Datatype {
    /// Human-readable descriptions of every violated precondition.
    fn audit_preconditions(histories: &[Vec<Event<Self::Op>>], hb: &HappensBefore) -> Vec<String>;
}

impl PreconditionAudit for Counter {
    fn audit_preconditions(_: &[Vec<Event<Self::Op>>], _: &HappensBefore) -> Vec<String> {
        Vec::new()
    }
}

fn inserted_id(op: &RgaOp) -> Option<LamportId> {
    match op {
        RgaOp::Insert { elt, .. } => Some(elt.id),
        RgaOp::Delete { .. } => None,
    }
}

/// allowed-insert / allowed-delete: every element an operation references was
/// created by an insert the broadcasting node had already delivered.
impl PreconditionAudit for Rga {
    fn audit_preconditions(histories: &[Vec<Event<RgaOp>>], _: &HappensBefore) -> Vec<String> {
        let mut out = Vec::new();
        for (node, history) in histories.iter().enumerate() {
            let mut known: BTreeSet<LamportId> = BTreeSet::new();
            for e in history {
                match e.kind {
                    EventKind::Deliver => known.extend(inserted_id(&e.message.op)),
                    EventKind::Broadcast => {
                        let (rule, referenced) = match &e.message.op {
                            RgaOp::Insert { after: Some(a), .. } => ("allowed-insert", *a),
                            RgaOp::Insert { after: None, .. } => continue,
                            RgaOp::Delete { target } => ("allowed-delete", *target),
                        };
                        if !known.contains(&referenced) {
                            out.push(format!(
                                "{rule}: node {node} broadcast {} referencing {referenced} before delivering its insert",
                                e.message.id
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Concurrent add/remove independence and the tag-subset property: every tag
/// in a node's state belongs to an add that node has delivered.
impl PreconditionAudit for OrSet {
    fn audit_preconditions(histories: &[Vec<Event<OrSetOp>>], hb: &HappensBefore) -> Vec<String> {
        let mut out = Vec::new();
        let broadcasts: Vec<&Message<OrSetOp>> =
            histories.iter().flatten().filter(|e| e.is_broadcast()).map(|e| &e.message).collect();
        for add in &broadcasts {
            let OrSetOp::Add { id, elem } = &add.op else { continue };
            for rem in &broadcasts {
                let OrSetOp::Rem { ids, elem: rem_elem } = &rem.op else { continue };
                if elem == rem_elem
                    && ids.contains(id)
                    && !hb.precedes_id(add.id, rem.id)
                    && !hb.precedes_id(rem.id, add.id)
                {
                    out.push(format!(
                        "concurrent-add-remove-independent: add {} and concurrent rem {} share id {id}",
                        add.id, rem.id
                    ));
                }
            }
        }
        for (node, history) in histories.iter().enumerate() {
            let mut added: BTreeMap<&str, BTreeSet<LamportId>> = BTreeMap::new();
            let mut state = OrSet::initial();
            for e in history.iter().filter(|e| e.is_deliver()) {
                if let OrSetOp::Add { id, elem } = &e.message.op {
                    added.entry(elem).or_default().insert(*id);
                }
                let Some(next) = OrSet::interpret(&e.message.op, &state) else { break };
                state = next;
                for (elem, tags) in state.entries() {
                    let seen = added.get(elem.as_str());
                    if let Some(stray) = tags.iter().find(|t| !seen.is_some_and(|s| s.contains(t))) {
                        out.push(format!(
                            "added-ids: node {node} holds tag {stray} for {elem:?} without a delivered add"
                        ));
                    }
                }
            }
        }
        out
    }
}
