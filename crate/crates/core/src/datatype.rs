use std::fmt::{self, Debug};
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::causal::LamportId;
use crate::message::Message;

/// An operation-based replicated datatype: an interpretation, an initial
/// state and a broadcast validity predicate.
pub trait Datatype: Send + Sync + 'static {
    const KIND: DatatypeKind;

    type Op: Clone + Debug + Eq + Hash + Send + Sync + 'static;
    type State: Clone + Debug + Eq + Hash + Send + Sync + 'static;

    fn initial() -> Self::State;

    fn interpret(op: &Self::Op, state: &Self::State) -> Option<Self::State>;

    /// Whether a node in `state` may broadcast `msg`.
    fn is_valid(state: &Self::State, msg: &Message<Self::Op>) -> bool;

    /// Canonical human-readable form of a state.
    fn render(state: &Self::State) -> String;

    /// Short description of where two states differ; empty iff equal.
    fn diff(a: &Self::State, b: &Self::State) -> Vec<String> {
        if a == b {
            Vec::new()
        } else {
            vec![format!("{} != {}", Self::render(a), Self::render(b))]
        }
    }

    fn to_wire(op: &Self::Op) -> WireOp;

    fn from_wire(wire: WireOp) -> Result<Self::Op, String>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatatypeKind {
    Counter,
    Orset,
    Rga,
}

impl DatatypeKind {
    pub const ALL: [DatatypeKind; 3] = [DatatypeKind::Counter, DatatypeKind::Orset, DatatypeKind::Rga];

    pub fn name(self) -> &'static str {
        match self {
            DatatypeKind::Counter => "counter",
            DatatypeKind::Orset => "orset",
            DatatypeKind::Rga => "rga",
        }
    }
}

impl fmt::Display for DatatypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatatypeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "counter" => Ok(DatatypeKind::Counter),
            "orset" => Ok(DatatypeKind::Orset),
            "rga" => Ok(DatatypeKind::Rga),
            other => Err(format!("unknown datatype {other:?} (expected counter, orset or rga)")),
        }
    }
}

/// Dispatches a generic expression over the concrete datatype for a kind.
#[macro_export]
macro_rules! with_datatype {
    ($kind:expr, $d:ident => $body:expr) => {
        match $kind {
            $crate::DatatypeKind::Counter => {
                type $d = $crate::counter::Counter;
                $body
            }
            $crate::DatatypeKind::Orset => {
                type $d = $crate::orset::OrSet;
                $body
            }
            $crate::DatatypeKind::Rga => {
                type $d = $crate::rga::Rga;
                $body
            }
        }
    };
}

/// Datatype-tagged operation payload used in traces and on the wire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WireOp {
    Counter(CounterWire),
    Orset(OrsetWire),
    Rga(RgaWire),
}

impl WireOp {
    pub fn kind(&self) -> DatatypeKind {
        match self {
            WireOp::Counter(_) => DatatypeKind::Counter,
            WireOp::Orset(_) => DatatypeKind::Orset,
            WireOp::Rga(_) => DatatypeKind::Rga,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum CounterWire {
    Inc,
    Dec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum OrsetWire {
    Add { elem: String, id: LamportId },
    Rem { elem: String, ids: Vec<LamportId> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RgaWire {
    Ins { id: LamportId, val: String, after: Option<LamportId> },
    Del { id: LamportId },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_field_order() {
        let cases = [
            (WireOp::Counter(CounterWire::Inc), r#"{"type":"counter","op":"inc"}"#),
            (
                WireOp::Orset(OrsetWire::Add { elem: "x".into(), id: LamportId::new(1, 0) }),
                r#"{"type":"orset","op":"add","elem":"x","id":[1,0]}"#,
            ),
            (
                WireOp::Orset(OrsetWire::Rem {
                    elem: "x".into(),
                    ids: vec![LamportId::new(1, 0), LamportId::new(2, 1)],
                }),
                r#"{"type":"orset","op":"rem","elem":"x","ids":[[1,0],[2,1]]}"#,
            ),
            (
                WireOp::Rga(RgaWire::Ins { id: LamportId::new(2, 0), val: "h".into(), after: None }),
                r#"{"type":"rga","op":"ins","id":[2,0],"val":"h","after":null}"#,
            ),
            (WireOp::Rga(RgaWire::Del { id: LamportId::new(2, 0) }), r#"{"type":"rga","op":"del","id":[2,0]}"#),
        ];
        for (op, text) in cases {
            assert_eq!(serde_json::to_string(&op).unwrap(), text);
            assert_eq!(serde_json::from_str::<WireOp>(text).unwrap(), op);
        }
    }

    #[test]
    fn kind_parsing() {
        for kind in DatatypeKind::ALL {
            assert_eq!(kind.name().parse::<DatatypeKind>().unwrap(), kind);
        }
        assert!("lww".parse::<DatatypeKind>().is_err());
    }
}
