use std::collections::BTreeSet;
use std::marker::PhantomData;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causal::{LamportId, NodeIndex};
use crate::datatype::Datatype;

use super::{Fault, SimError, World};

/// Produces the next operation a node broadcasts, given its state and the id
/// the message will carry.
pub trait OpSource<D: Datatype> {
    fn next_op(&mut self, state: &D::State, id: LamportId, rng: &mut ChaCha8Rng) -> D::Op;
}

/// Per-step probabilities of injecting each fault kind.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FaultRates {
    pub drop: f64,
    pub crash: f64,
    pub partition: f64,
}

impl FaultRates {
    pub fn total(&self) -> f64 {
        self.drop + self.crash + self.partition
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Broadcast { node: NodeIndex, id: LamportId },
    Deliver { node: NodeIndex, id: LamportId },
    Fault(Fault),
}

/// Seeded random scheduler.
///
/// While the operation budget lasts it interleaves broadcasts, deliveries and
/// faults. Once the budget is spent it heals any partition and only delivers,
/// so every run reaches quiescence: nothing left is deliverable.
pub struct Scheduler<D: Datatype, S: OpSource<D>> {
    rng: ChaCha8Rng,
    budget: usize,
    rates: FaultRates,
    source: S,
    _datatype: PhantomData<D>,
}

impl<D: Datatype, S: OpSource<D>> Scheduler<D, S> {
    pub fn new(seed: u64, budget: usize, rates: FaultRates, source: S) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), budget, rates, source, _datatype: PhantomData }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    fn try_fault(&mut self, world: &World<D>, roll: f64) -> Option<Fault> {
        let FaultRates { drop, crash, partition } = self.rates;
        if roll < drop {
            let in_flight: Vec<(NodeIndex, LamportId)> = (0..world.nodes())
                .filter(|&n| !world.is_failed(n))
                .flat_map(|n| world.pending(n).map(move |m| (n, m.id)))
                .collect();
            let &(node, id) = in_flight.choose(&mut self.rng)?;
            return Some(Fault::Drop { node, id });
        }
        if self.budget == 0 {
            return None;
        }
        if roll < drop + crash {
            let live = world.live_nodes();
            return live.choose(&mut self.rng).map(|&n| Fault::Crash(n));
        }
        if roll < drop + crash + partition {
            if world.partition().is_some() {
                return Some(Fault::Heal);
            }
            let n = world.nodes();
            if n < 2 {
                return None;
            }
            let mut side: BTreeSet<NodeIndex> = (0..n).filter(|_| self.rng.gen_bool(0.5)).collect();
            if side.is_empty() || side.len() == n {
                side = [self.rng.gen_range(0..n)].into_iter().collect();
            }
            return Some(Fault::Partition(side));
        }
        None
    }

    /// Applies one action, or returns `None` once the world is quiescent.
    pub fn step(&mut self, world: &mut World<D>) -> Result<Option<Action>, SimError> {
        let live = world.live_nodes();
        if live.is_empty() {
            // Every node crashed; the remaining budget can never be spent.
            self.budget = 0;
        }
        if self.budget == 0 && world.partition().is_some() {
            world.inject_fault(Fault::Heal)?;
            return Ok(Some(Action::Fault(Fault::Heal)));
        }
        let roll: f64 = self.rng.gen();
        if let Some(fault) = self.try_fault(world, roll) {
            world.inject_fault(fault.clone())?;
            return Ok(Some(Action::Fault(fault)));
        }

        let can_broadcast = self.budget > 0 && !live.is_empty();
        let deliverable = world.deliverable_pairs();
        let broadcast = match (can_broadcast, deliverable.is_empty()) {
            (false, true) => return Ok(None),
            (true, false) => self.rng.gen_bool(0.5),
            (can, _) => can,
        };
        if broadcast {
            let node = *live.choose(&mut self.rng).expect("live is non-empty");
            let id = world.next_id(node)?;
            let op = self.source.next_op(world.state(node), id, &mut self.rng);
            world.broadcast(node, op)?;
            self.budget -= 1;
            Ok(Some(Action::Broadcast { node, id }))
        } else {
            let &(node, id) = deliverable.choose(&mut self.rng).expect("deliverable is non-empty");
            world.deliver(node, id)?;
            Ok(Some(Action::Deliver { node, id }))
        }
    }

    /// Steps until quiescence, returning the number of actions applied.
    pub fn run(&mut self, world: &mut World<D>) -> Result<usize, SimError> {
        let mut steps = 0;
        while self.step(world)?.is_some() {
            steps += 1;
        }
        Ok(steps)
    }
}
