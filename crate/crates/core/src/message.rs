use std::fmt;

use serde::{Deserialize, Serialize};

use crate::causal::{LamportId, NodeIndex, VectorClock};

/// The unit of broadcast: a globally unique id paired with an operation, plus
/// the sender's vector clock used for causal delivery.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message<Op> {
    pub id: LamportId,
    pub op: Op,
    pub clock: VectorClock,
}

impl<Op> Message<Op> {
    pub fn new(id: LamportId, op: Op, clock: VectorClock) -> Self {
        Self { id, op, clock }
    }

    pub fn sender(&self) -> NodeIndex {
        self.id.node
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Broadcast,
    Deliver,
}

/// One entry of a node's history.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event<Op> {
    pub kind: EventKind,
    pub message: Message<Op>,
}

impl<Op> Event<Op> {
    pub fn broadcast(message: Message<Op>) -> Self {
        Self { kind: EventKind::Broadcast, message }
    }

    pub fn deliver(message: Message<Op>) -> Self {
        Self { kind: EventKind::Deliver, message }
    }

    pub fn is_deliver(&self) -> bool {
        self.kind == EventKind::Deliver
    }

    pub fn is_broadcast(&self) -> bool {
        self.kind == EventKind::Broadcast
    }
}

impl<Op> fmt::Display for Event<Op> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EventKind::Broadcast => write!(f, "Broadcast {}", self.message.id),
            EventKind::Deliver => write!(f, "Deliver {}", self.message.id),
        }
    }
}

/// The delivered messages of a history, in delivery order.
pub fn node_deliver_messages<Op: Clone>(history: &[Event<Op>]) -> Vec<Message<Op>> {
    history.iter().filter(|e| e.is_deliver()).map(|e| e.message.clone()).collect()
}
