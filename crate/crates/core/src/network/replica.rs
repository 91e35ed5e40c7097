use std::collections::BTreeSet;

use crate::causal::{LamportId, NodeIndex, VectorClock};
use crate::datatype::Datatype;
use crate::message::{Event, Message};

use super::SimError;

/// One node: its history, derived state and causal-delivery bookkeeping.
///
/// Shared by the simulator and the TCP transport so both apply the same
/// readiness rule and duplicate suppression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replica<D: Datatype> {
    index: NodeIndex,
    history: Vec<Event<D::Op>>,
    state: D::State,
    clock: VectorClock,
    lamport: u64,
    delivered: BTreeSet<LamportId>,
    failed: bool,
}

/// What happened when a message was handed to [`Replica::deliver`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Applied,
    /// Already delivered; ignored.
    Duplicate,
    /// Delivered, but the interpretation failed and the node has stopped.
    Failed,
}

impl<D: Datatype> Replica<D> {
    pub fn new(index: NodeIndex) -> Self {
        Self {
            index,
            history: Vec::new(),
            state: D::initial(),
            clock: VectorClock::new(),
            lamport: 0,
            delivered: BTreeSet::new(),
            failed: false,
        }
    }

    pub fn index(&self) -> NodeIndex {
        self.index
    }

    pub fn history(&self) -> &[Event<D::Op>] {
        &self.history
    }

    pub fn state(&self) -> &D::State {
        &self.state
    }

    pub fn clock(&self) -> &VectorClock {
        &self.clock
    }

    pub fn delivered_ids(&self) -> &BTreeSet<LamportId> {
        &self.delivered
    }

    pub fn is_failed(&self) -> bool {
        self.failed
    }

    pub fn crash(&mut self) {
        self.failed = true;
    }

    /// The id the next broadcast from this node will carry.
    pub fn next_id(&self) -> LamportId {
        LamportId::new(self.lamport + 1, self.index)
    }

    /// Stamps `op` with a fresh id and the current clock, records the
    /// broadcast and delivers it locally.
    ///
    /// With `check_validity` the datatype's validity predicate must accept the
    /// message in the current state. Without it the message is sent anyway,
    /// which is how adversarial scripts inject invalid operations.
    pub fn broadcast(&mut self, op: D::Op, check_validity: bool) -> Result<Message<D::Op>, SimError> {
        if self.failed {
            return Err(SimError::NodeFailed(self.index));
        }
        let id = self.next_id();
        let mut clock = self.clock.clone();
        clock.increment(self.index);
        let msg = Message::new(id, op, clock);
        if check_validity && !D::is_valid(&self.state, &msg) {
            return Err(SimError::InvalidMessage { node: self.index, id });
        }
        self.history.push(Event::broadcast(msg.clone()));
        self.apply(msg.clone());
        Ok(msg)
    }

    /// Whether `msg` may be delivered now under causal delivery.
    pub fn is_ready(&self, msg: &Message<D::Op>) -> bool {
        !self.failed && !self.delivered.contains(&msg.id) && msg.clock.ready_at(msg.sender(), &self.clock)
    }

    /// Delivers a message. Callers are responsible for readiness; duplicates
    /// are suppressed here.
    pub fn deliver(&mut self, msg: Message<D::Op>) -> Result<Delivery, SimError> {
        if self.failed {
            return Err(SimError::NodeFailed(self.index));
        }
        if self.delivered.contains(&msg.id) {
            return Ok(Delivery::Duplicate);
        }
        Ok(self.apply(msg))
    }

    fn apply(&mut self, msg: Message<D::Op>) -> Delivery {
        self.lamport = self.lamport.max(msg.id.counter);
        self.delivered.insert(msg.id);
        self.clock = self.clock.merge(&msg.clock);
        let next = D::interpret(&msg.op, &self.state);
        self.history.push(Event::deliver(msg));
        match next {
            Some(state) => {
                self.state = state;
                Delivery::Applied
            }
            None => {
                self.failed = true;
                Delivery::Failed
            }
        }
    }
}
