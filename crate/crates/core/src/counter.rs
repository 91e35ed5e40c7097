//! Increment/decrement counter over unbounded integers.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::datatype::{CounterWire, Datatype, DatatypeKind, WireOp};
use crate::message::Message;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CounterOp {
    Increment,
    Decrement,
}

pub type CounterState = BigInt;

/// Never fails.
pub fn counter_interpret(op: &CounterOp, state: &CounterState) -> Option<CounterState> {
    match op {
        CounterOp::Increment => Some(state + 1),
        CounterOp::Decrement => Some(state - 1),
    }
}

/// Counter operations commute unconditionally, so nothing is constrained.
pub fn counter_validity(_state: &CounterState, _msg: &Message<CounterOp>) -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counter;

impl Datatype for Counter {
    const KIND: DatatypeKind = DatatypeKind::Counter;
    type Op = CounterOp;
    type State = CounterState;

    fn initial() -> CounterState {
        BigInt::from(0)
    }

    fn interpret(op: &CounterOp, state: &CounterState) -> Option<CounterState> {
        counter_interpret(op, state)
    }

    fn is_valid(state: &CounterState, msg: &Message<CounterOp>) -> bool {
        counter_validity(state, msg)
    }

    fn render(state: &CounterState) -> String {
        state.to_string()
    }

    fn diff(a: &CounterState, b: &CounterState) -> Vec<String> {
        if a == b {
            Vec::new()
        } else {
            vec![format!("value {a} vs {b}")]
        }
    }

    fn to_wire(op: &CounterOp) -> WireOp {
        WireOp::Counter(match op {
            CounterOp::Increment => CounterWire::Inc,
            CounterOp::Decrement => CounterWire::Dec,
        })
    }

    fn from_wire(wire: WireOp) -> Result<CounterOp, String> {
        match wire {
            WireOp::Counter(CounterWire::Inc) => Ok(CounterOp::Increment),
            WireOp::Counter(CounterWire::Dec) => Ok(CounterOp::Decrement),
            other => Err(format!("expected a counter operation, got {}", other.kind())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::{LamportId, VectorClock};
    use crate::interp::apply_operations;
    use CounterOp::*;

    fn n(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn interpret_examples() {
        assert_eq!(counter_interpret(&Increment, &n(0)), Some(n(1)));
        assert_eq!(counter_interpret(&Decrement, &n(0)), Some(n(-1)));
        assert_eq!(apply_operations(&[Increment, Decrement], &n(41), &counter_interpret), Some(n(41)));
    }

    #[test]
    fn validity_is_unconstrained() {
        let m = Message::new(LamportId::new(1, 0), Increment, VectorClock::new());
        assert!(counter_validity(&n(0), &m));
        assert!(counter_validity(&n(-7), &Message { op: Decrement, ..m.clone() }));
    }

    #[test]
    fn no_wraparound() {
        let big = n(i64::MAX);
        assert_eq!(counter_interpret(&Increment, &big), Some(BigInt::from(i64::MAX) + 1));
    }

    #[test]
    fn ops_commute_exhaustively() {
        let kinds = [Increment, Decrement];
        for s in -50i64..50 {
            for x in kinds {
                for y in kinds {
                    let s = n(s);
                    assert_eq!(
                        apply_operations(&[x, y], &s, &counter_interpret),
                        apply_operations(&[y, x], &s, &counter_interpret)
                    );
                }
            }
        }
    }
}
