//! Line-oriented JSON trace format shared by the simulator, the checker and
//! the TCP transport.
//!
//! Every line is one record with a fixed field order:
//! `action, node, message-id, operation, clock`. Message ids are written as
//! `[counter, node]` and clocks as `[[node, count], ...]`. Emitted traces
//! start with an `init` record and end with an `end` record so a truncated
//! file is detected.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{LamportId, NodeIndex, VectorClock};
use crate::datatype::{Datatype, DatatypeKind, WireOp};
use crate::message::{Event, EventKind, Message};

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase", deny_unknown_fields)]
pub enum TraceRecord {
    Init {
        datatype: DatatypeKind,
        nodes: usize,
        seed: u64,
    },
    Broadcast {
        node: NodeIndex,
        #[serde(rename = "message-id", default, skip_serializing_if = "Option::is_none")]
        id: Option<LamportId>,
        operation: WireOp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clock: Option<VectorClock>,
        /// Skips the validity predicate; only adversarial scripts set this.
        #[serde(default, skip_serializing_if = "is_false")]
        forced: bool,
    },
    Deliver {
        node: NodeIndex,
        #[serde(rename = "message-id")]
        id: LamportId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        operation: Option<WireOp>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clock: Option<VectorClock>,
    },
    Drop {
        node: NodeIndex,
        #[serde(rename = "message-id")]
        id: LamportId,
    },
    Crash {
        node: NodeIndex,
    },
    Partition {
        nodes: BTreeSet<NodeIndex>,
    },
    Heal,
    End {
        records: usize,
    },
}

impl TraceRecord {
    pub fn broadcast_of<D: Datatype>(node: NodeIndex, msg: &Message<D::Op>, forced: bool) -> Self {
        TraceRecord::Broadcast {
            node,
            id: Some(msg.id),
            operation: D::to_wire(&msg.op),
            clock: Some(msg.clock.clone()),
            forced,
        }
    }

    pub fn deliver_of<D: Datatype>(node: NodeIndex, msg: &Message<D::Op>) -> Self {
        TraceRecord::Deliver { node, id: msg.id, operation: Some(D::to_wire(&msg.op)), clock: Some(msg.clock.clone()) }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Parses every non-empty line as a record, reporting 1-based line numbers.
pub fn parse_records(text: &str) -> Result<Vec<(usize, TraceRecord)>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// A complete emitted trace: header, body and end marker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub datatype: DatatypeKind,
    pub nodes: usize,
    pub seed: u64,
    /// Body records with their source line numbers.
    pub records: Vec<(usize, TraceRecord)>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut records = parse_records(text)?;
        let last_line = text.lines().count();
        let (datatype, nodes, seed) = match records.first() {
            Some((_, TraceRecord::Init { datatype, nodes, seed })) => (*datatype, *nodes, *seed),
            Some((line, _)) => {
                return Err(TraceError::Parse { line: *line, message: "trace must start with an init record".into() })
            }
            None => return Err(TraceError::Parse { line: 1, message: "empty trace".into() }),
        };
        records.remove(0);
        match records.pop() {
            Some((line, TraceRecord::End { records: n })) => {
                if n != records.len() {
                    return Err(TraceError::Parse {
                        line,
                        message: format!("end record announces {n} records but {} were read", records.len()),
                    });
                }
            }
            _ => {
                return Err(TraceError::Parse {
                    line: last_line + 1,
                    message: "trace is truncated: missing end record".into(),
                })
            }
        }
        if let Some((line, _)) =
            records.iter().find(|(_, r)| matches!(r, TraceRecord::Init { .. } | TraceRecord::End { .. }))
        {
            return Err(TraceError::Parse { line: *line, message: "init/end records only at the ends".into() });
        }
        Ok(Trace { datatype, nodes, seed, records })
    }

    pub fn render(datatype: DatatypeKind, nodes: usize, seed: u64, body: &[TraceRecord]) -> String {
        let mut out = TraceRecord::Init { datatype, nodes, seed }.to_line();
        out.push('\n');
        for r in body {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out.push_str(&TraceRecord::End { records: body.len() }.to_line());
        out.push('\n');
        out
    }
}

/// One line of a node's event log as written by the TCP transport.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub event: EventKind,
    #[serde(rename = "message-id")]
    pub id: LamportId,
    pub operation: WireOp,
    pub clock: VectorClock,
}

impl LogRecord {
    pub fn of<D: Datatype>(event: &Event<D::Op>) -> Self {
        LogRecord {
            event: event.kind,
            id: event.message.id,
            operation: D::to_wire(&event.message.op),
            clock: event.message.clock.clone(),
        }
    }

    pub fn into_event<D: Datatype>(self) -> Result<Event<D::Op>, String> {
        let msg = Message::new(self.id, D::from_wire(self.operation)?, self.clock);
        Ok(Event { kind: self.event, message: msg })
    }
}

pub fn render_log<D: Datatype>(history: &[Event<D::Op>]) -> String {
    history
        .iter()
        .map(|e| serde_json::to_string(&LogRecord::of::<D>(e)).expect("log records serialize") + "\n")
        .collect()
}

pub fn parse_log<D: Datatype>(text: &str) -> Result<Vec<Event<D::Op>>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let err = |message: String| TraceError::Parse { line: i + 1, message };
            let rec: LogRecord = serde_json::from_str(l).map_err(|e| err(e.to_string()))?;
            rec.into_event::<D>().map_err(err)
        })
        .collect()
}

/// Interleaves per-node histories into one trace body that the simulator can
/// replay: each node's events stay in order, a broadcast is emitted as soon as
/// it is reached, and a remote delivery waits until its message is causally
/// ready at that node.
///
/// Fails when the logs admit no such interleaving.
pub fn merge_histories<D: Datatype>(histories: &[Vec<Event<D::Op>>]) -> Result<Vec<TraceRecord>, String> {
    use crate::network::Replica;

    let n = histories.len();
    let mut cursor = vec![0usize; n];
    let mut replicas: Vec<Replica<D>> = (0..n).map(Replica::new).collect();
    let mut sent: std::collections::HashMap<LamportId, Message<D::Op>> = Default::default();
    let mut out = Vec::new();
    loop {
        let mut progressed = false;
        for node in 0..n {
            while let Some(e) = histories[node].get(cursor[node]) {
                match e.kind {
                    EventKind::Broadcast => {
                        let msg = replicas[node]
                            .broadcast(e.message.op.clone(), false)
                            .map_err(|err| format!("node {node}: {err}"))?;
                        if msg != e.message {
                            return Err(format!(
                                "node {node}: logged broadcast {} does not match the replayed one",
                                e.message.id
                            ));
                        }
                        out.push(TraceRecord::broadcast_of::<D>(node, &msg, false));
                        sent.insert(msg.id, msg);
                        // The local delivery that follows is implied by the broadcast.
                        match histories[node].get(cursor[node] + 1) {
                            Some(d) if d.is_deliver() && d.message == e.message => cursor[node] += 2,
                            _ => return Err(format!("node {node}: broadcast {} not delivered locally", e.message.id)),
                        }
                    }
                    EventKind::Deliver => {
                        let Some(msg) = sent.get(&e.message.id) else { break };
                        if !replicas[node].is_ready(msg) {
                            break;
                        }
                        replicas[node].deliver(msg.clone()).map_err(|err| format!("node {node}: {err}"))?;
                        out.push(TraceRecord::deliver_of::<D>(node, msg));
                        cursor[node] += 1;
                    }
                }
                progressed = true;
            }
        }
        if (0..n).all(|i| cursor[i] == histories[i].len()) {
            return Ok(out);
        }
        if !progressed {
            let stuck: Vec<String> = (0..n)
                .filter(|&i| cursor[i] < histories[i].len())
                .map(|i| format!("node {i} at {}", histories[i][cursor[i]]))
                .collect();
            return Err(format!("logs cannot be interleaved: {}", stuck.join(", ")));
        }
    }
}
