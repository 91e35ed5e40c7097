//! Brute-force convergence oracle: apply every linear extension of a message
//! set's precedence order and demand identical outcomes.

use std::collections::{HashMap, HashSet};
use std::ops::ControlFlow;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causal::{LamportId, PrecedenceOracle, VectorClock};
use crate::datatype::{Datatype, DatatypeKind, WireOp};
use crate::interp::{concurrent_ops_commute, SecVerdict, SecWitness};
use crate::message::{Event, Message};
use crate::network::HappensBefore;
use crate::with_datatype;

use super::report::{NodeSummary, Report, Stats, Verdict, Witness};
use super::{CheckerError, RandomOps};

pub const DEFAULT_BOUND: usize = 7;

/// Largest set the bitmask representation handles at all.
const MAX_SET: usize = 64;

/// A strict partial order over message ids, stored as transitively closed
/// predecessor bitmasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairOrder {
    ids: Vec<LamportId>,
    index: HashMap<LamportId, usize>,
    preds: Vec<u64>,
}

impl PairOrder {
    /// Closes `pairs` (each `(a, b)` meaning a precedes b) transitively and
    /// rejects cycles.
    pub fn from_pairs(ids: &[LamportId], pairs: &[(LamportId, LamportId)]) -> Result<Self, String> {
        if ids.len() > MAX_SET {
            return Err(format!("at most {MAX_SET} messages are supported"));
        }
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(*id, i).is_some() {
                return Err(format!("message id {id} appears twice"));
            }
        }
        let mut preds = vec![0u64; ids.len()];
        for (a, b) in pairs {
            let lookup = |id: &LamportId| index.get(id).copied().ok_or(format!("precedence names unknown id {id}"));
            preds[lookup(b)?] |= 1 << lookup(a)?;
        }
        loop {
            let mut changed = false;
            for j in 0..preds.len() {
                let mut closed = preds[j];
                for i in 0..preds.len() {
                    if preds[j] >> i & 1 == 1 {
                        closed |= preds[i];
                    }
                }
                changed |= closed != preds[j];
                preds[j] = closed;
            }
            if !changed {
                break;
            }
        }
        if let Some(j) = (0..preds.len()).find(|&j| preds[j] >> j & 1 == 1) {
            return Err(format!("precedence is cyclic through {}", ids[j]));
        }
        Ok(Self { ids: ids.to_vec(), index, preds })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Bitmask of every strict predecessor of the `j`-th message.
    pub fn preds(&self) -> &[u64] {
        &self.preds
    }

    pub fn pairs(&self) -> Vec<(LamportId, LamportId)> {
        (0..self.len())
            .flat_map(|j| (0..self.len()).filter(move |&i| self.preds[j] >> i & 1 == 1).map(move |i| (i, j)))
            .map(|(i, j)| (self.ids[i], self.ids[j]))
            .collect()
    }
}

impl<Op> PrecedenceOracle<Message<Op>> for PairOrder {
    fn precedes(&self, a: &Message<Op>, b: &Message<Op>) -> bool {
        match (self.index.get(&a.id), self.index.get(&b.id)) {
            (Some(&i), Some(&j)) => self.preds[j] >> i & 1 == 1,
            _ => false,
        }
    }
}

/// Calls `f` with every linear extension of the order given by predecessor
/// bitmasks, stopping early if `f` breaks.
pub fn for_each_linear_extension(preds: &[u64], mut f: impl FnMut(&[usize]) -> ControlFlow<()>) {
    fn go(
        preds: &[u64],
        placed: u64,
        order: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if order.len() == preds.len() {
            return f(order);
        }
        for j in 0..preds.len() {
            if placed >> j & 1 == 0 && preds[j] & !placed == 0 {
                order.push(j);
                go(preds, placed | 1 << j, order, f)?;
                order.pop();
            }
        }
        ControlFlow::Continue(())
    }
    let _ = go(preds, 0, &mut Vec::with_capacity(preds.len()), &mut f);
}

pub fn count_linear_extensions(preds: &[u64]) -> u64 {
    let mut n = 0;
    for_each_linear_extension(preds, |_| {
        n += 1;
        ControlFlow::Continue(())
    });
    n
}

/// A set of messages together with the precedence order the oracle respects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageSet<Op> {
    pub messages: Vec<Message<Op>>,
    pub order: PairOrder,
}

impl<Op: Clone> MessageSet<Op> {
    /// Every broadcast in `histories`, ordered by happens-before.
    pub fn from_histories(histories: &[Vec<Event<Op>>]) -> Result<Self, String> {
        let hb = HappensBefore::from_histories(histories);
        let messages: Vec<Message<Op>> =
            histories.iter().flatten().filter(|e| e.is_broadcast()).map(|e| e.message.clone()).collect();
        let ids: Vec<LamportId> = messages.iter().map(|m| m.id).collect();
        let pairs: Vec<(LamportId, LamportId)> =
            ids.iter().flat_map(|&a| ids.iter().map(move |&b| (a, b))).filter(|&(a, b)| hb.precedes_id(a, b)).collect();
        Ok(Self { order: PairOrder::from_pairs(&ids, &pairs)?, messages })
    }
}

struct Search<'a, D: Datatype> {
    set: &'a MessageSet<D::Op>,
    order: Vec<usize>,
    first: Option<(Vec<usize>, D::State)>,
    witness: Option<Witness>,
    states: HashSet<D::State>,
    permutations: u64,
}

impl<D: Datatype> Search<'_, D> {
    fn ids(&self, order: &[usize]) -> Vec<LamportId> {
        order.iter().map(|&i| self.set.messages[i].id).collect()
    }

    fn go(&mut self, placed: u64, state: D::State) -> ControlFlow<()> {
        let n = self.set.messages.len();
        if self.order.len() == n {
            self.permutations += 1;
            match &self.first {
                None => self.first = Some((self.order.clone(), state)),
                Some((order, first)) if *first != state => {
                    self.witness = Some(Witness::PermutationDivergence {
                        orders: [self.ids(order), self.ids(&self.order)],
                        states: [D::render(first), D::render(&state)],
                        diff: D::diff(first, &state),
                    });
                    return ControlFlow::Break(());
                }
                Some(_) => {}
            }
            return ControlFlow::Continue(());
        }
        let preds = self.set.order.preds();
        for j in 0..n {
            if placed >> j & 1 == 1 || preds[j] & !placed != 0 {
                continue;
            }
            self.order.push(j);
            let Some(next) = D::interpret(&self.set.messages[j].op, &state) else {
                self.witness =
                    Some(Witness::OrderFailure { order: self.ids(&self.order), id: self.set.messages[j].id });
                return ControlFlow::Break(());
            };
            self.states.insert(next.clone());
            self.go(placed | 1 << j, next)?;
            self.order.pop();
        }
        ControlFlow::Continue(())
    }
}

/// Applies every hb-consistent order of `set` from the initial state and
/// reports whether all of them agree.
pub fn brute_force_convergence<D: Datatype>(set: &MessageSet<D::Op>, bound: usize) -> Result<Report, CheckerError> {
    let size = set.messages.len();
    if size > bound || size > MAX_SET {
        return Err(CheckerError::BoundExceeded { size, bound: bound.min(MAX_SET) });
    }
    let initial = D::initial();
    let mut search = Search::<D> {
        set,
        order: Vec::with_capacity(size),
        first: None,
        witness: None,
        states: HashSet::from([initial.clone()]),
        permutations: 0,
    };
    let _ = search.go(0, initial);

    let mut sec = SecVerdict::default();
    let probes: Vec<D::State> = search.states.iter().cloned().collect();
    if let Err(v) = concurrent_ops_commute(&set.messages, &set.order, &D::interpret, &probes) {
        sec.commutativity_ok = false;
        sec.counterexample = Some(SecWitness::NonCommuting {
            node: 0,
            first: set.messages[v.first].id,
            second: set.messages[v.second].id,
            probe: format!("{:?}", probes[v.probe]),
        });
    }
    let verdict = match &search.witness {
        None => Verdict::Converged,
        Some(Witness::OrderFailure { .. }) => {
            sec.no_failure_ok = false;
            Verdict::InterpretationFailure
        }
        Some(_) => Verdict::Diverged,
    };
    let final_state = search.first.as_ref().map(|(_, s)| D::render(s)).unwrap_or_else(|| "failed".into());
    Ok(Report {
        verdict,
        datatype: D::KIND,
        nodes: 1,
        seed: None,
        per_node_final_states: vec![NodeSummary {
            node: 0,
            state: final_state,
            delivered: size,
            failed: verdict == Verdict::InterpretationFailure,
        }],
        sec_verdict: sec,
        axioms: None,
        preconditions: Vec::new(),
        witness: search.witness,
        stats: Stats { broadcasts: size, permutations: Some(search.permutations), ..Stats::default() },
    })
}

/// Draws a random strict partial order over `size` messages, then a valid
/// operation for each message against the state of its causal past.
///
/// Every message gets its own sender so ids are unique and the counter is one
/// more than the largest predecessor counter.
pub fn random_message_set<D: RandomOps>(rng: &mut ChaCha8Rng, size: usize) -> MessageSet<D::Op> {
    assert!(size <= MAX_SET);
    let density: f64 = rng.gen_range(0.0..0.7);
    let mut preds = vec![0u64; size];
    for j in 0..size {
        for i in 0..j {
            if rng.gen_bool(density) {
                preds[j] |= (1 << i) | preds[i];
            }
        }
    }
    let mut messages: Vec<Message<D::Op>> = Vec::with_capacity(size);
    for j in 0..size {
        let past: Vec<usize> = (0..j).filter(|&i| preds[j] >> i & 1 == 1).collect();
        let counter = 1 + past.iter().map(|&i| messages[i].id.counter).max().unwrap_or(0);
        let id = LamportId::new(counter, j);
        // Index order is a linear extension, so this is the causal-past state.
        let mut state = D::initial();
        for &i in &past {
            state = D::interpret(&messages[i].op, &state).expect("generated past applies");
        }
        let op = D::random_op(&state, id, rng);
        let clock: VectorClock = past.iter().chain(std::iter::once(&j)).map(|&i| (i, 1)).collect();
        let msg = Message::new(id, op, clock);
        debug_assert!(D::is_valid(&state, &msg));
        messages.push(msg);
    }
    let ids: Vec<LamportId> = messages.iter().map(|m| m.id).collect();
    let order = PairOrder { index: ids.iter().enumerate().map(|(i, id)| (*id, i)).collect(), ids, preds };
    MessageSet { messages, order }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecMessage {
    #[serde(rename = "message-id")]
    pub id: LamportId,
    pub operation: WireOp,
    #[serde(default)]
    pub clock: VectorClock,
}

/// Oracle input file: a message set and the precedence pairs between them.
/// The order used is the transitive closure of `precedes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub datatype: DatatypeKind,
    pub messages: Vec<SpecMessage>,
    #[serde(default)]
    pub precedes: Vec<(LamportId, LamportId)>,
}

impl OracleSpec {
    pub fn of<D: Datatype>(set: &MessageSet<D::Op>) -> Self {
        OracleSpec {
            datatype: D::KIND,
            messages: set
                .messages
                .iter()
                .map(|m| SpecMessage { id: m.id, operation: D::to_wire(&m.op), clock: m.clock.clone() })
                .collect(),
            precedes: set.order.pairs(),
        }
    }

    fn message_set<D: Datatype>(&self) -> Result<MessageSet<D::Op>, String> {
        let messages = self
            .messages
            .iter()
            .map(|m| Ok(Message::new(m.id, D::from_wire(m.operation.clone())?, m.clock.clone())))
            .collect::<Result<Vec<_>, String>>()?;
        let ids: Vec<LamportId> = messages.iter().map(|m| m.id).collect();
        Ok(MessageSet { order: PairOrder::from_pairs(&ids, &self.precedes)?, messages })
    }
}

/// Parses an oracle spec file and runs the brute-force check on it.
pub fn run_oracle_spec(text: &str, datatype: Option<DatatypeKind>, bound: usize) -> Result<Report, CheckerError> {
    let spec: OracleSpec = serde_json::from_str(text).map_err(|e| CheckerError::Config(format!("oracle spec: {e}")))?;
    if let Some(d) = datatype.filter(|d| *d != spec.datatype) {
        return Err(CheckerError::Config(format!("spec is for {} but {d} was requested", spec.datatype)));
    }
    with_datatype!(spec.datatype, D => {
        let set = spec.message_set::<D>().map_err(CheckerError::Config)?;
        brute_force_convergence::<D>(&set, bound)
    })
}
