//! Line-oriented control commands that create operations.

use crdtsim::counter::{Counter, CounterOp};
use crdtsim::orset::{OrSet, OrSetOp};
use crdtsim::rga::{Rga, RgaOp};
use crdtsim::{Datatype, LamportId};

/// Turns an operation command into an operation valid in `state`, where `id`
/// is the id the resulting message will carry.
pub trait Control: Datatype {
    fn parse_op(words: &[&str], state: &Self::State, id: LamportId) -> Result<Self::Op, String>;
}

fn parse_id(s: &str) -> Result<LamportId, String> {
    s.parse().map_err(|e| format!("bad id {s:?}: {e}"))
}

impl Control for Counter {
    fn parse_op(words: &[&str], _: &Self::State, _: LamportId) -> Result<CounterOp, String> {
        match words {
            ["inc"] => Ok(CounterOp::Increment),
            ["dec"] => Ok(CounterOp::Decrement),
            _ => Err("counter commands: inc, dec".into()),
        }
    }
}

impl Control for OrSet {
    fn parse_op(words: &[&str], state: &Self::State, id: LamportId) -> Result<OrSetOp, String> {
        match words {
            ["add", elem] => Ok(OrSetOp::add(id, *elem)),
            ["rem", elem] => Ok(OrSetOp::Rem { ids: state.tags(elem), elem: elem.to_string() }),
            _ => Err("orset commands: add <elem>, rem <elem>".into()),
        }
    }
}

impl Control for Rga {
    fn parse_op(words: &[&str], _: &Self::State, id: LamportId) -> Result<RgaOp, String> {
        match words {
            ["ins", val] => Ok(RgaOp::insert(id, *val, None)),
            ["ins", val, after] | ["ins", val, "after", after] => Ok(RgaOp::insert(id, *val, Some(parse_id(after)?))),
            ["del", target] => Ok(RgaOp::delete(parse_id(target)?)),
            _ => Err("rga commands: ins <val> [after <c@n>], del <c@n>".into()),
        }
    }
}
