//! Random but always-valid operations for each datatype.

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::causal::LamportId;
use crate::counter::{Counter, CounterOp, CounterState};
use crate::datatype::Datatype;
use crate::network::OpSource;
use crate::orset::{orset_members, OrSet, OrSetOp, OrSetState};
use crate::rga::{Rga, RgaOp, RgaState};

const ELEMENTS: [&str; 4] = ["a", "b", "c", "d"];

/// A workload generator that only produces operations the validity
/// predicate accepts in the given state.
pub trait RandomOps: Datatype {
    fn random_op(state: &Self::State, id: LamportId, rng: &mut ChaCha8Rng) -> Self::Op;
}

impl RandomOps for Counter {
    fn random_op(_: &CounterState, _: LamportId, rng: &mut ChaCha8Rng) -> CounterOp {
        if rng.gen_bool(0.5) {
            CounterOp::Increment
        } else {
            CounterOp::Decrement
        }
    }
}

impl RandomOps for OrSet {
    fn random_op(state: &OrSetState, id: LamportId, rng: &mut ChaCha8Rng) -> OrSetOp {
        if rng.gen_bool(0.55) {
            return OrSetOp::add(id, *ELEMENTS.choose(rng).expect("non-empty"));
        }
        let present = orset_members(state);
        let elem = match present.iter().choose(rng) {
            Some(e) if rng.gen_bool(0.75) => e.clone(),
            _ => ELEMENTS.choose(rng).expect("non-empty").to_string(),
        };
        OrSetOp::Rem { ids: state.tags(&elem), elem }
    }
}

impl RandomOps for Rga {
    fn random_op(state: &RgaState, id: LamportId, rng: &mut ChaCha8Rng) -> RgaOp {
        let value = char::from(b'a' + rng.gen_range(0..26)).to_string();
        if state.is_empty() {
            return RgaOp::insert(id, value, None);
        }
        if rng.gen_bool(0.65) {
            let after = if rng.gen_bool(0.2) { None } else { state.choose(rng).map(|e| e.id) };
            RgaOp::insert(id, value, after)
        } else {
            RgaOp::delete(state.choose(rng).expect("non-empty").id)
        }
    }
}

/// Adapter feeding [`RandomOps`] into the scheduler.
pub struct RandomWorkload;

impl<D: RandomOps> OpSource<D> for RandomWorkload {
    fn next_op(&mut self, state: &D::State, id: LamportId, rng: &mut ChaCha8Rng) -> D::Op {
        D::random_op(state, id, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::VectorClock;
    use crate::message::Message;
    use rand::SeedableRng;

    fn always_valid<D: RandomOps>() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = D::initial();
        for c in 1..300 {
            let id = LamportId::new(c, 0);
            let op = D::random_op(&state, id, &mut rng);
            let msg = Message::new(id, op, VectorClock::new());
            assert!(D::is_valid(&state, &msg), "{msg:?} in {state:?}");
            state = D::interpret(&msg.op, &state).expect("valid ops apply locally");
        }
    }

    #[test]
    fn generated_ops_are_valid() {
        always_valid::<Counter>();
        always_valid::<OrSet>();
        always_valid::<Rga>();
    }
}
