//! Partial state transformers and the convergence machinery built on them.
//!
//! An interpretation lifts an operation into a function `State -> Option<State>`
//! where `None` is failure. Sequences of operations are applied by Kleisli
//! composition, so any failing step fails the whole sequence.

use std::collections::{HashMap, HashSet};
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{first_inversion, LamportId, NodeIndex, PrecedenceOracle};
use crate::message::Message;

/// Maps an operation and a state to the successor state, or `None` on failure.
pub trait Interpretation<Op, S> {
    fn interpret(&self, op: &Op, state: &S) -> Option<S>;
}

impl<Op, S, F> Interpretation<Op, S> for F
where
    F: Fn(&Op, &S) -> Option<S>,
{
    fn interpret(&self, op: &Op, state: &S) -> Option<S> {
        self(op, state)
    }
}

type PartialFn<S> = dyn Fn(&S) -> Option<S> + Send + Sync;

/// A partial function on states.
pub struct Transformer<S> {
    f: Arc<PartialFn<S>>,
}

impl<S> Clone for Transformer<S> {
    fn clone(&self) -> Self {
        Self { f: Arc::clone(&self.f) }
    }
}

impl<S: 'static> Transformer<S> {
    pub fn new(f: impl Fn(&S) -> Option<S> + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn identity() -> Self
    where
        S: Clone,
    {
        Self::new(|s: &S| Some(s.clone()))
    }

    pub fn failing() -> Self {
        Self::new(|_| None)
    }

    /// `⟨op⟩`: the transformer an interpretation assigns to `op`.
    pub fn lift<Op, I>(interp: I, op: Op) -> Self
    where
        Op: Send + Sync + 'static,
        I: Interpretation<Op, S> + Send + Sync + 'static,
    {
        Self::new(move |s| interp.interpret(&op, s))
    }

    pub fn apply(&self, state: &S) -> Option<S> {
        (self.f)(state)
    }

    /// Runs `self`, then `next` on the result.
    pub fn then(&self, next: &Transformer<S>) -> Self {
        kleisli_compose(self, next)
    }
}

pub fn kleisli_compose<S: 'static>(f: &Transformer<S>, g: &Transformer<S>) -> Transformer<S> {
    let (f, g) = (f.clone(), g.clone());
    Transformer::new(move |s| f.apply(s).and_then(|t| g.apply(&t)))
}

/// Left fold of the interpretation over `ops`, starting from `initial`.
pub fn apply_operations<'a, Op, S, I>(ops: impl IntoIterator<Item = &'a Op>, initial: &S, interp: &I) -> Option<S>
where
    Op: 'a,
    S: Clone,
    I: Interpretation<Op, S> + ?Sized,
{
    let mut state = initial.clone();
    for op in ops {
        state = interp.interpret(op, &state)?;
    }
    Some(state)
}

/// Applies each message's operation in order.
pub fn apply_messages<Op, S, I>(msgs: &[Message<Op>], initial: &S, interp: &I) -> Option<S>
where
    S: Clone,
    I: Interpretation<Op, S> + ?Sized,
{
    apply_operations(msgs.iter().map(|m| &m.op), initial, interp)
}

/// Every state reached by a prefix of `msgs`, starting with `initial`, up to
/// (not including) the first failure.
pub fn prefix_states<Op, S, I>(msgs: &[Message<Op>], initial: &S, interp: &I) -> Vec<S>
where
    S: Clone,
    I: Interpretation<Op, S> + ?Sized,
{
    let mut out = vec![initial.clone()];
    let mut state = initial.clone();
    for m in msgs {
        match interp.interpret(&m.op, &state) {
            Some(next) => {
                out.push(next.clone());
                state = next;
            }
            None => break,
        }
    }
    out
}

/// Indices into the inputs of [`concurrent_ops_commute`] where two concurrent
/// operations disagree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommuteViolation {
    pub first: usize,
    pub second: usize,
    pub probe: usize,
}

/// Checks `⟨x⟩⊳⟨y⟩ = ⟨y⟩⊳⟨x⟩` for every concurrent pair, evaluated at each
/// probe state. Two failures count as equal.
pub fn concurrent_ops_commute<Op, S, O, I>(
    ops: &[Message<Op>],
    oracle: &O,
    interp: &I,
    probes: &[S],
) -> Result<(), CommuteViolation>
where
    S: Clone + Eq,
    O: PrecedenceOracle<Message<Op>> + ?Sized,
    I: Interpretation<Op, S> + ?Sized,
{
    let pairs: Vec<(usize, usize)> = (0..ops.len())
        .flat_map(|i| (i + 1..ops.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| oracle.concurrent(&ops[i], &ops[j]))
        .collect();
    if pairs.is_empty() {
        return Ok(());
    }
    // single[k][p] = ⟨ops[k]⟩ probes[p], computed lazily.
    let mut single: HashMap<(usize, usize), Option<S>> = HashMap::new();
    let mut one = |k: usize, p: usize| -> Option<S> {
        single.entry((k, p)).or_insert_with(|| interp.interpret(&ops[k].op, &probes[p])).clone()
    };
    for (first, second) in pairs {
        for probe in 0..probes.len() {
            let xy = one(first, probe).and_then(|s| interp.interpret(&ops[second].op, &s));
            let yx = one(second, probe).and_then(|s| interp.interpret(&ops[first].op, &s));
            if xy != yx {
                return Err(CommuteViolation { first, second, probe });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("operation sequences are not permutations of the same set")]
    SetMismatch,
}

/// Applies both orders from `initial` and compares the results, treating two
/// failures as equal.
pub fn check_convergence<Op, S, I>(
    xs: &[Message<Op>],
    ys: &[Message<Op>],
    interp: &I,
    initial: &S,
) -> Result<bool, KernelError>
where
    Op: Eq + Hash,
    S: Clone + Eq,
    I: Interpretation<Op, S> + ?Sized,
{
    let left: HashSet<&Message<Op>> = xs.iter().collect();
    let right: HashSet<&Message<Op>> = ys.iter().collect();
    if left != right {
        return Err(KernelError::SetMismatch);
    }
    Ok(apply_messages(xs, initial, interp) == apply_messages(ys, initial, interp))
}

/// A concrete reason one of the strong-eventual-consistency assumptions does
/// not hold for an execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SecWitness {
    Causality { node: NodeIndex, earlier: LamportId, later: LamportId },
    Duplicate { node: NodeIndex, id: LamportId },
    Truncation { node: NodeIndex, prefix_len: usize },
    NonCommuting { node: NodeIndex, first: LamportId, second: LamportId, probe: String },
    Failure { node: NodeIndex, prefix_len: usize, id: LamportId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecVerdict {
    pub causality_ok: bool,
    pub distinctness_ok: bool,
    pub trunc_ok: bool,
    pub commutativity_ok: bool,
    pub no_failure_ok: bool,
    pub counterexample: Option<SecWitness>,
}

impl Default for SecVerdict {
    fn default() -> Self {
        Self {
            causality_ok: true,
            distinctness_ok: true,
            trunc_ok: true,
            commutativity_ok: true,
            no_failure_ok: true,
            counterexample: None,
        }
    }
}

impl SecVerdict {
    pub fn all_ok(&self) -> bool {
        self.causality_ok && self.distinctness_ok && self.trunc_ok && self.commutativity_ok && self.no_failure_ok
    }

    fn flag(&mut self, witness: SecWitness) {
        match witness {
            SecWitness::Causality { .. } => self.causality_ok = false,
            SecWitness::Duplicate { .. } => self.distinctness_ok = false,
            SecWitness::Truncation { .. } => self.trunc_ok = false,
            SecWitness::NonCommuting { .. } => self.commutativity_ok = false,
            SecWitness::Failure { .. } => self.no_failure_ok = false,
        }
        self.counterexample.get_or_insert(witness);
    }
}

fn first_duplicate<Op>(msgs: &[Message<Op>]) -> Option<LamportId>
where
    Op: Eq + Hash,
{
    let mut seen = HashSet::new();
    msgs.iter().find(|m| !seen.insert(*m)).map(|m| m.id)
}

/// Evaluates the five strong-eventual-consistency assumptions on each node's
/// delivered-message sequence.
///
/// Commutativity is probed on the states reachable by prefixes of the node's
/// own sequence, which are the states that matter for that execution.
pub fn audit_sec<Op, S, O, I>(histories: &[Vec<Message<Op>>], oracle: &O, interp: &I, initial: &S) -> SecVerdict
where
    Op: Eq + Hash,
    S: Clone + Eq + Hash + Debug,
    O: PrecedenceOracle<Message<Op>> + ?Sized,
    I: Interpretation<Op, S> + ?Sized,
{
    let mut verdict = SecVerdict::default();
    for (node, msgs) in histories.iter().enumerate() {
        let inversion = first_inversion(msgs, oracle);
        if let Some((earlier, later)) = inversion {
            verdict.flag(SecWitness::Causality { node, earlier: msgs[earlier].id, later: msgs[later].id });
        }
        let duplicate = first_duplicate(msgs);
        if let Some(id) = duplicate {
            verdict.flag(SecWitness::Duplicate { node, id });
        }
        if inversion.is_none() && duplicate.is_none() {
            for k in (0..msgs.len()).rev() {
                let prefix = &msgs[..k];
                if first_inversion(prefix, oracle).is_some() || first_duplicate(prefix).is_some() {
                    verdict.flag(SecWitness::Truncation { node, prefix_len: k });
                    break;
                }
            }
        }

        let reached = prefix_states(msgs, initial, interp);
        if reached.len() <= msgs.len() {
            let failed_at = reached.len() - 1;
            verdict.flag(SecWitness::Failure { node, prefix_len: failed_at + 1, id: msgs[failed_at].id });
        }
        let mut seen = HashSet::new();
        let probes: Vec<S> = reached.into_iter().filter(|s| seen.insert(s.clone())).collect();
        if let Err(v) = concurrent_ops_commute(msgs, oracle, interp, &probes) {
            verdict.flag(SecWitness::NonCommuting {
                node,
                first: msgs[v.first].id,
                second: msgs[v.second].id,
                probe: format!("{:?}", probes[v.probe]),
            });
        }
    }
    verdict
}
