//! Deterministic model of an asynchronous broadcast network.
//!
//! A [`World`] holds every node's history and the per-recipient set of
//! in-flight messages. Delivery follows the causal readiness rule, messages
//! may be dropped, nodes may crash (crash-stop), and partitions mask delivery
//! between two sides until healed. Every action is recorded as a trace record
//! so a run can be replayed exactly.

mod audit;
mod hb;
mod replica;
mod schedule;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::causal::{LamportId, NodeIndex};
use crate::datatype::{Datatype, DatatypeKind};
use crate::message::{node_deliver_messages, Event, Message};
use crate::trace::TraceRecord;

pub use audit::{audit_axioms, Axiom, AxiomReport, AxiomResult, AxiomWitness, EventRef};
pub use hb::HappensBefore;
pub use replica::{Delivery, Replica};
pub use schedule::{Action, FaultRates, OpSource, Scheduler};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("node {node} may not broadcast {id}: rejected by the validity predicate")]
    InvalidMessage { node: NodeIndex, id: LamportId },
    #[error("node {0} has failed")]
    NodeFailed(NodeIndex),
    #[error("node {0} does not exist")]
    NoSuchNode(NodeIndex),
    #[error("unknown message {0}")]
    UnknownMessage(LamportId),
    #[error("message {id} is pending at node {node} but not deliverable")]
    Deadlock { node: NodeIndex, id: LamportId },
    #[error("{0}")]
    IllegalAction(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fault {
    Drop { node: NodeIndex, id: LamportId },
    Crash(NodeIndex),
    Partition(BTreeSet<NodeIndex>),
    Heal,
}

/// An interpretation failure observed during delivery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FailureRecord {
    pub node: NodeIndex,
    pub id: LamportId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub broadcasts: usize,
    pub delivers: usize,
    pub drops: usize,
    pub crashes: usize,
    pub partitions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World<D: Datatype> {
    replicas: Vec<Replica<D>>,
    pending: Vec<BTreeMap<LamportId, Message<D::Op>>>,
    partition: Option<BTreeSet<NodeIndex>>,
    seed: u64,
    failures: Vec<FailureRecord>,
    counts: Counts,
    trace: Vec<TraceRecord>,
}

impl<D: Datatype> World<D> {
    pub fn new(nodes: usize, seed: u64) -> Self {
        Self {
            replicas: (0..nodes).map(Replica::new).collect(),
            pending: vec![BTreeMap::new(); nodes],
            partition: None,
            seed,
            failures: Vec::new(),
            counts: Counts::default(),
            trace: Vec::new(),
        }
    }

    pub fn datatype(&self) -> DatatypeKind {
        D::KIND
    }

    pub fn nodes(&self) -> usize {
        self.replicas.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self, node: NodeIndex) -> &Replica<D> {
        &self.replicas[node]
    }

    pub fn replicas(&self) -> &[Replica<D>] {
        &self.replicas
    }

    pub fn state(&self, node: NodeIndex) -> &D::State {
        self.replicas[node].state()
    }

    pub fn history(&self, node: NodeIndex) -> &[Event<D::Op>] {
        self.replicas[node].history()
    }

    pub fn histories(&self) -> Vec<Vec<Event<D::Op>>> {
        self.replicas.iter().map(|r| r.history().to_vec()).collect()
    }

    /// Delivered messages of every node, in delivery order.
    pub fn delivered_sequences(&self) -> Vec<Vec<Message<D::Op>>> {
        self.replicas.iter().map(|r| node_deliver_messages(r.history())).collect()
    }

    pub fn pending(&self, node: NodeIndex) -> impl Iterator<Item = &Message<D::Op>> {
        self.pending[node].values()
    }

    pub fn is_failed(&self, node: NodeIndex) -> bool {
        self.replicas[node].is_failed()
    }

    pub fn live_nodes(&self) -> Vec<NodeIndex> {
        (0..self.nodes()).filter(|&n| !self.is_failed(n)).collect()
    }

    pub fn partition(&self) -> Option<&BTreeSet<NodeIndex>> {
        self.partition.as_ref()
    }

    pub fn failures(&self) -> &[FailureRecord] {
        &self.failures
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    /// Every action applied so far, as trace records.
    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn happens_before(&self) -> HappensBefore {
        HappensBefore::from_histories(&self.histories())
    }

    pub fn audit_axioms(&self) -> AxiomReport {
        audit_axioms::<D>(&self.histories())
    }

    fn check_node(&self, node: NodeIndex) -> Result<(), SimError> {
        if node >= self.nodes() {
            Err(SimError::NoSuchNode(node))
        } else {
            Ok(())
        }
    }

    /// The id the next broadcast from `node` will receive.
    pub fn next_id(&self, node: NodeIndex) -> Result<LamportId, SimError> {
        self.check_node(node)?;
        Ok(self.replicas[node].next_id())
    }

    /// Broadcasts `op` from `node` after checking the validity predicate.
    pub fn broadcast(&mut self, node: NodeIndex, op: D::Op) -> Result<Message<D::Op>, SimError> {
        self.send(node, op, true)
    }

    /// Broadcasts without the validity check, for adversarial scenarios.
    pub fn force_broadcast(&mut self, node: NodeIndex, op: D::Op) -> Result<Message<D::Op>, SimError> {
        self.send(node, op, false)
    }

    fn send(&mut self, node: NodeIndex, op: D::Op, checked: bool) -> Result<Message<D::Op>, SimError> {
        self.check_node(node)?;
        let msg = self.replicas[node].broadcast(op, checked)?;
        self.counts.broadcasts += 1;
        self.counts.delivers += 1;
        if self.replicas[node].is_failed() {
            self.failures.push(FailureRecord { node, id: msg.id });
        }
        for (other, queue) in self.pending.iter_mut().enumerate() {
            if other != node {
                queue.insert(msg.id, msg.clone());
            }
        }
        self.trace.push(TraceRecord::broadcast_of::<D>(node, &msg, !checked));
        Ok(msg)
    }

    fn masked(&self, node: NodeIndex, msg: &Message<D::Op>) -> bool {
        self.partition.as_ref().is_some_and(|side| side.contains(&node) != side.contains(&msg.sender()))
    }

    /// Pending messages at `node` that are causally ready, not yet delivered
    /// and not masked by a partition.
    pub fn deliverable(&self, node: NodeIndex) -> Vec<&Message<D::Op>> {
        let replica = &self.replicas[node];
        self.pending[node].values().filter(|m| replica.is_ready(m) && !self.masked(node, m)).collect()
    }

    /// Every enabled `(node, message)` delivery, in a canonical order.
    pub fn deliverable_pairs(&self) -> Vec<(NodeIndex, LamportId)> {
        (0..self.nodes()).flat_map(|n| self.deliverable(n).into_iter().map(move |m| (n, m.id))).collect()
    }

    /// Messages still in flight to live nodes.
    pub fn in_flight(&self) -> usize {
        (0..self.nodes()).filter(|&n| !self.is_failed(n)).map(|n| self.pending[n].len()).sum()
    }

    pub fn deliver(&mut self, node: NodeIndex, id: LamportId) -> Result<Delivery, SimError> {
        self.check_node(node)?;
        if self.is_failed(node) {
            return Err(SimError::NodeFailed(node));
        }
        let msg = self.pending[node].get(&id).ok_or(SimError::UnknownMessage(id))?;
        if !self.replicas[node].is_ready(msg) || self.masked(node, msg) {
            return Err(SimError::Deadlock { node, id });
        }
        let msg = self.pending[node].remove(&id).expect("checked above");
        self.trace.push(TraceRecord::deliver_of::<D>(node, &msg));
        let outcome = self.replicas[node].deliver(msg)?;
        self.counts.delivers += 1;
        if outcome == Delivery::Failed {
            self.failures.push(FailureRecord { node, id });
        }
        Ok(outcome)
    }

    pub fn inject_fault(&mut self, fault: Fault) -> Result<(), SimError> {
        match fault {
            Fault::Drop { node, id } => {
                self.check_node(node)?;
                if self.pending[node].remove(&id).is_some() {
                    self.counts.drops += 1;
                    self.trace.push(TraceRecord::Drop { node, id });
                }
            }
            Fault::Crash(node) => {
                self.check_node(node)?;
                if !self.is_failed(node) {
                    self.replicas[node].crash();
                    self.counts.crashes += 1;
                    self.trace.push(TraceRecord::Crash { node });
                }
            }
            Fault::Partition(side) => {
                if let Some(&bad) = side.iter().find(|&&n| n >= self.nodes()) {
                    return Err(SimError::NoSuchNode(bad));
                }
                self.counts.partitions += 1;
                self.trace.push(TraceRecord::Partition { nodes: side.clone() });
                self.partition = Some(side);
            }
            Fault::Heal => {
                if self.partition.take().is_some() {
                    self.trace.push(TraceRecord::Heal);
                }
            }
        }
        Ok(())
    }

    /// Applies one recorded or scripted action.
    pub fn apply_record(&mut self, record: &TraceRecord) -> Result<(), SimError> {
        match record {
            TraceRecord::Broadcast { node, id, operation, clock, forced } => {
                let op = D::from_wire(operation.clone()).map_err(SimError::IllegalAction)?;
                let expected = self.next_id(*node)?;
                if id.is_some_and(|id| id != expected) {
                    return Err(SimError::IllegalAction(format!(
                        "broadcast at node {node} would receive id {expected}, record says {}",
                        id.expect("checked")
                    )));
                }
                let msg = self.send(*node, op, !forced)?;
                if clock.as_ref().is_some_and(|c| *c != msg.clock) {
                    return Err(SimError::IllegalAction(format!("clock of {} does not match the record", msg.id)));
                }
                Ok(())
            }
            TraceRecord::Deliver { node, id, operation, clock } => {
                self.check_node(*node)?;
                if let Some(m) = self.pending[*node].get(id) {
                    if operation.as_ref().is_some_and(|w| Some(w) != Some(&D::to_wire(&m.op)))
                        || clock.as_ref().is_some_and(|c| *c != m.clock)
                    {
                        return Err(SimError::IllegalAction(format!("message {id} does not match the record")));
                    }
                }
                self.deliver(*node, *id).map(|_| ())
            }
            TraceRecord::Drop { node, id } => self.inject_fault(Fault::Drop { node: *node, id: *id }),
            TraceRecord::Crash { node } => self.inject_fault(Fault::Crash(*node)),
            TraceRecord::Partition { nodes } => self.inject_fault(Fault::Partition(nodes.clone())),
            TraceRecord::Heal => self.inject_fault(Fault::Heal),
            TraceRecord::Init { .. } | TraceRecord::End { .. } => {
                Err(SimError::IllegalAction("init/end records cannot be applied".into()))
            }
        }
    }
}
