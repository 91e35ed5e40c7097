//! Post-hoc checks of the six network axioms against recorded histories.

use std::collections::{HashMap, HashSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::causal::{LamportId, NodeIndex};
use crate::datatype::Datatype;
use crate::message::{Event, EventKind, Message};

use super::hb::HappensBefore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    HistoriesDistinct,
    DeliveryHasACause,
    DeliverLocally,
    MsgIdUnique,
    CausalDelivery,
    BroadcastOnlyValidMsgs,
}

impl Axiom {
    pub const ALL: [Axiom; 6] = [
        Axiom::HistoriesDistinct,
        Axiom::DeliveryHasACause,
        Axiom::DeliverLocally,
        Axiom::MsgIdUnique,
        Axiom::CausalDelivery,
        Axiom::BroadcastOnlyValidMsgs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axiom::HistoriesDistinct => "histories-distinct",
            Axiom::DeliveryHasACause => "delivery-has-a-cause",
            Axiom::DeliverLocally => "deliver-locally",
            Axiom::MsgIdUnique => "msg-id-unique",
            Axiom::CausalDelivery => "causal-delivery",
            Axiom::BroadcastOnlyValidMsgs => "broadcast-only-valid-msgs",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Position of an event in a node's history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRef {
    pub node: NodeIndex,
    pub index: usize,
    pub kind: EventKind,
    pub id: LamportId,
}

impl fmt::Display for EventRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Broadcast => "Broadcast",
            EventKind::Deliver => "Deliver",
        };
        write!(f, "node {} #{} {} {}", self.node, self.index, kind, self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomWitness {
    pub event: EventRef,
    pub other: Option<EventRef>,
    pub detail: String,
}

impl fmt::Display for AxiomWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.event)?;
        if let Some(other) = &self.other {
            write!(f, " / {other}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: Axiom,
    pub passed: bool,
    pub witness: Option<AxiomWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub results: Vec<AxiomResult>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn result(&self, axiom: Axiom) -> &AxiomResult {
        self.results.iter().find(|r| r.axiom == axiom).expect("report covers every axiom")
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

fn at<Op>(node: NodeIndex, index: usize, e: &Event<Op>) -> EventRef {
    EventRef { node, index, kind: e.kind, id: e.message.id }
}

fn positions<Op>(histories: &[Vec<Event<Op>>]) -> impl Iterator<Item = (NodeIndex, usize, &Event<Op>)> {
    histories.iter().enumerate().flat_map(|(n, h)| h.iter().enumerate().map(move |(i, e)| (n, i, e)))
}

fn histories_distinct<Op: Eq + std::hash::Hash>(histories: &[Vec<Event<Op>>]) -> Option<AxiomWitness> {
    for (node, history) in histories.iter().enumerate() {
        let mut seen: HashMap<&Event<Op>, usize> = HashMap::new();
        for (i, e) in history.iter().enumerate() {
            if let Some(&first) = seen.get(e) {
                return Some(AxiomWitness {
                    event: at(node, first, &history[first]),
                    other: Some(at(node, i, e)),
                    detail: "the same event occurs twice in one history".into(),
                });
            }
            seen.insert(e, i);
        }
    }
    None
}

fn delivery_has_a_cause<Op: Eq + std::hash::Hash>(histories: &[Vec<Event<Op>>]) -> Option<AxiomWitness> {
    let broadcast: HashSet<&Message<Op>> =
        positions(histories).filter(|(_, _, e)| e.is_broadcast()).map(|(_, _, e)| &e.message).collect();
    positions(histories).find(|(_, _, e)| e.is_deliver() && !broadcast.contains(&e.message)).map(|(n, i, e)| {
        AxiomWitness { event: at(n, i, e), other: None, detail: "message delivered but never broadcast".into() }
    })
}

fn deliver_locally<Op: Eq>(histories: &[Vec<Event<Op>>]) -> Option<AxiomWitness> {
    for (node, history) in histories.iter().enumerate() {
        for (i, e) in history.iter().enumerate() {
            if e.is_broadcast() && !history[i + 1..].iter().any(|d| d.is_deliver() && d.message == e.message) {
                return Some(AxiomWitness {
                    event: at(node, i, e),
                    other: None,
                    detail: "broadcast is not followed by a local delivery".into(),
                });
            }
        }
    }
    None
}

fn msg_id_unique<Op: Eq>(histories: &[Vec<Event<Op>>]) -> Option<AxiomWitness> {
    let mut first: HashMap<LamportId, (NodeIndex, usize, &Event<Op>)> = HashMap::new();
    for (n, i, e) in positions(histories).filter(|(_, _, e)| e.is_broadcast()) {
        match first.get(&e.message.id) {
            Some(&(n0, i0, e0)) if n0 != n || e0.message != e.message => {
                return Some(AxiomWitness {
                    event: at(n0, i0, e0),
                    other: Some(at(n, i, e)),
                    detail: "two different broadcasts share a message id".into(),
                });
            }
            Some(_) => {}
            None => {
                first.insert(e.message.id, (n, i, e));
            }
        }
    }
    None
}

fn causal_delivery<Op>(histories: &[Vec<Event<Op>>], hb: &HappensBefore) -> Option<AxiomWitness> {
    for (node, history) in histories.iter().enumerate() {
        let mut delivered = FixedBitSet::with_capacity(hb.len());
        for (i, e) in history.iter().enumerate() {
            if !e.is_deliver() {
                continue;
            }
            let preds = hb.pred_set(e.message.id).expect("every recorded id is indexed");
            if let Some(missing) = preds.difference(&delivered).next() {
                let missing_id = hb.id_at(missing);
                let other = history[i + 1..]
                    .iter()
                    .position(|d| d.is_deliver() && d.message.id == missing_id)
                    .map(|j| at(node, i + 1 + j, &history[i + 1 + j]));
                return Some(AxiomWitness {
                    event: at(node, i, e),
                    other,
                    detail: format!("{missing_id} happens before {} but was not delivered first", e.message.id),
                });
            }
            delivered.insert(hb.slot(e.message.id).expect("indexed"));
        }
    }
    None
}

fn broadcast_only_valid<D: Datatype>(histories: &[Vec<Event<D::Op>>]) -> Option<AxiomWitness> {
    for (node, history) in histories.iter().enumerate() {
        let mut state = Some(D::initial());
        for (i, e) in history.iter().enumerate() {
            match e.kind {
                EventKind::Deliver => {
                    state = state.and_then(|s| D::interpret(&e.message.op, &s));
                }
                EventKind::Broadcast => {
                    let detail = match &state {
                        None => "broadcast after the node's state failed".to_string(),
                        Some(s) if !D::is_valid(s, &e.message) => {
                            format!("message is not valid in state {}", D::render(s))
                        }
                        Some(_) => continue,
                    };
                    return Some(AxiomWitness { event: at(node, i, e), other: None, detail });
                }
            }
        }
    }
    None
}

/// Checks all six axioms and reports the first witness for each failure.
pub fn audit_axioms<D: Datatype>(histories: &[Vec<Event<D::Op>>]) -> AxiomReport {
    let hb = HappensBefore::from_histories(histories);
    audit_axioms_with(histories, &hb, broadcast_only_valid::<D>)
}

pub(crate) fn audit_axioms_with<Op: Eq + std::hash::Hash>(
    histories: &[Vec<Event<Op>>],
    hb: &HappensBefore,
    valid: impl FnOnce(&[Vec<Event<Op>>]) -> Option<AxiomWitness>,
) -> AxiomReport {
    let witnesses = [
        (Axiom::HistoriesDistinct, histories_distinct(histories)),
        (Axiom::DeliveryHasACause, delivery_has_a_cause(histories)),
        (Axiom::DeliverLocally, deliver_locally(histories)),
        (Axiom::MsgIdUnique, msg_id_unique(histories)),
        (Axiom::CausalDelivery, causal_delivery(histories, hb)),
        (Axiom::BroadcastOnlyValidMsgs, valid(histories)),
    ];
    AxiomReport {
        results: witnesses
            .into_iter()
            .map(|(axiom, witness)| AxiomResult { axiom, passed: witness.is_none(), witness })
            .collect(),
    }
}
