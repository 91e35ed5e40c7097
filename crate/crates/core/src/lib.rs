//! Operation-based CRDTs on a simulated causal-broadcast network, with
//! executable checks of the conditions under which replicas converge.

pub mod causal;
pub mod checker;
pub mod counter;
pub mod datatype;
pub mod interp;
pub mod message;
pub mod network;
pub mod orset;
pub mod par;
pub mod rga;
pub mod trace;

pub use causal::{LamportId, NodeIndex, Precedence, PrecedenceOracle, VectorClock};
pub use datatype::{Datatype, DatatypeKind, WireOp};
pub use message::{Event, EventKind, Message};
pub use network::{SimError, World};
