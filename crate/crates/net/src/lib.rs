//! Runs a replicated datatype between real processes over TCP.
//!
//! Every node connects to every other node. Links are at-least-once: a
//! sender resends its whole outbox after each reconnect and receivers drop
//! message ids they have already seen. Incoming messages wait in a hold-back
//! queue until causally ready, and a single application thread owns the
//! replica.

mod config;
mod control;
mod frame;
mod node;

pub use config::{PeerAddr, PeerConfig};
pub use control::Control;
pub use frame::{decode_frame, encode_frame, read_frame, FrameError, MAX_FRAME};
pub use node::{run_interactive, start, NetError, NodeHandle};
