//! Fuzz campaigns, trace replay and the brute-force convergence oracle.

mod campaign;
mod oracle;
mod preconditions;
mod report;
mod workload;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::causal::{LamportId, NodeIndex};
use crate::datatype::{Datatype, DatatypeKind};
use crate::interp::audit_sec;
use crate::network::{FaultRates, Scheduler, SimError, World};
use crate::trace::{merge_histories, parse_log, LogRecord, Trace, TraceError, TraceRecord};
use crate::with_datatype;

pub use campaign::{run_campaign, run_campaign_sequential};
pub use oracle::{
    brute_force_convergence, count_linear_extensions, for_each_linear_extension, random_message_set, run_oracle_spec,
    MessageSet, OracleSpec, PairOrder, DEFAULT_BOUND,
};
pub use preconditions::PreconditionAudit;
pub use report::{NodeSummary, Report, ReportFormat, Stats, Verdict, Witness};
pub use workload::{RandomOps, RandomWorkload};

/// Everything the checker layer needs from a datatype.
pub trait Checked: Datatype + RandomOps + PreconditionAudit {}

impl<D: Datatype + RandomOps + PreconditionAudit> Checked for D {}

#[derive(Debug, Error)]
pub enum CheckerError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("{size} operations exceed the brute-force bound of {bound}")]
    BoundExceeded { size: usize, bound: usize },
    #[error(transparent)]
    Parse(#[from] TraceError),
    #[error("line {line}: illegal action: {reason}")]
    IllegalAction { line: usize, reason: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub datatype: DatatypeKind,
    pub nodes: usize,
    /// Hand-written records applied before the random phase.
    pub script: Vec<TraceRecord>,
    pub seed: u64,
    pub op_budget: usize,
    pub fault_rates: FaultRates,
}

impl Scenario {
    pub fn new(datatype: DatatypeKind, nodes: usize, op_budget: usize, seed: u64) -> Self {
        Self { datatype, nodes, script: Vec::new(), seed, op_budget, fault_rates: FaultRates::default() }
    }

    pub fn with_faults(mut self, rates: FaultRates) -> Self {
        self.fault_rates = rates;
        self
    }

    pub fn with_script(mut self, script: Vec<TraceRecord>) -> Self {
        self.script = script;
        self
    }

    pub fn validate(&self) -> Result<(), CheckerError> {
        if self.nodes == 0 {
            return Err(CheckerError::Config("at least one node is required".into()));
        }
        let FaultRates { drop, crash, partition } = self.fault_rates;
        for (name, p) in [("drop", drop), ("crash", crash), ("partition", partition)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CheckerError::Config(format!("{name} rate {p} is not a probability")));
            }
        }
        if self.fault_rates.total() > 1.0 {
            return Err(CheckerError::Config("fault rates sum to more than 1".into()));
        }
        Ok(())
    }
}

/// Result of a fuzz run: the report and the full trace that reproduces it.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzOutcome {
    pub report: Report,
    pub trace: String,
}

pub fn run_fuzz(scenario: &Scenario) -> Result<Report, CheckerError> {
    fuzz_with_trace(scenario).map(|o| o.report)
}

pub fn fuzz_with_trace(scenario: &Scenario) -> Result<FuzzOutcome, CheckerError> {
    scenario.validate()?;
    with_datatype!(scenario.datatype, D => fuzz_typed::<D>(scenario))
}

fn illegal(line: usize, e: SimError) -> CheckerError {
    CheckerError::IllegalAction { line, reason: e.to_string() }
}

fn fuzz_typed<D: Checked>(scenario: &Scenario) -> Result<FuzzOutcome, CheckerError> {
    let mut world = World::<D>::new(scenario.nodes, scenario.seed);
    for (i, record) in scenario.script.iter().enumerate() {
        match world.apply_record(record) {
            // A script may demand a broadcast the validity predicate rejects;
            // it is sent anyway and the axiom audit reports it.
            Err(SimError::InvalidMessage { .. }) => {
                let TraceRecord::Broadcast { node, id, operation, clock, .. } = record.clone() else {
                    unreachable!("only broadcasts are validity-checked")
                };
                let forced = TraceRecord::Broadcast { node, id, operation, clock, forced: true };
                world.apply_record(&forced).map_err(|e| illegal(i + 1, e))?;
            }
            other => other.map_err(|e| illegal(i + 1, e))?,
        }
    }
    let mut scheduler = Scheduler::new(scenario.seed, scenario.op_budget, scenario.fault_rates, RandomWorkload);
    scheduler.run(&mut world).map_err(|e| CheckerError::IllegalAction { line: 0, reason: e.to_string() })?;
    let trace = Trace::render(D::KIND, world.nodes(), world.seed(), world.trace());
    Ok(FuzzOutcome { report: evaluate(&world), trace })
}

/// Re-executes a recorded trace and reports on the resulting world.
pub fn replay_trace(text: &str) -> Result<Report, CheckerError> {
    let trace = Trace::parse(text)?;
    if trace.nodes == 0 {
        return Err(CheckerError::Config("trace declares zero nodes".into()));
    }
    with_datatype!(trace.datatype, D => replay_typed::<D>(&trace))
}

pub fn replay_file(path: &std::path::Path) -> Result<Report, CheckerError> {
    replay_trace(&std::fs::read_to_string(path)?)
}

fn replay_typed<D: Checked>(trace: &Trace) -> Result<Report, CheckerError> {
    let mut world = World::<D>::new(trace.nodes, trace.seed);
    for (line, record) in &trace.records {
        world
            .apply_record(record)
            .map_err(|e| CheckerError::IllegalAction { line: *line, reason: format!("{} ({e})", record.to_line()) })?;
    }
    Ok(evaluate(&world))
}

/// Replays per-node event logs recorded by the TCP transport.
///
/// The logs are interleaved into a simulator trace, re-executed, and the
/// replayed histories must equal the logged ones exactly. The datatype is
/// taken from the first logged operation unless given.
pub fn replay_logs(logs: &[String], datatype: Option<DatatypeKind>) -> Result<Report, CheckerError> {
    if logs.is_empty() {
        return Err(CheckerError::Config("no logs given".into()));
    }
    let inferred = logs
        .iter()
        .flat_map(|l| l.lines())
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<LogRecord>(l).ok())
        .map(|r| r.operation.kind());
    let kind =
        datatype.or(inferred).ok_or_else(|| CheckerError::Config("cannot infer the datatype of empty logs".into()))?;
    with_datatype!(kind, D => replay_logs_typed::<D>(logs))
}

fn replay_logs_typed<D: Checked>(logs: &[String]) -> Result<Report, CheckerError> {
    let histories = logs.iter().map(|l| parse_log::<D>(l)).collect::<Result<Vec<_>, _>>()?;
    let body = merge_histories::<D>(&histories).map_err(|reason| CheckerError::IllegalAction { line: 0, reason })?;
    let mut world = World::<D>::new(histories.len(), 0);
    for (i, record) in body.iter().enumerate() {
        world.apply_record(record).map_err(|e| illegal(i + 1, e))?;
    }
    if world.histories() != histories {
        return Err(CheckerError::IllegalAction { line: 0, reason: "replayed histories differ from the logs".into() });
    }
    let mut report = evaluate(&world);
    report.seed = None;
    Ok(report)
}

/// Runs every audit on a world and folds the results into a report.
///
/// Verdict precedence: interpretation failure, network axiom violation,
/// divergence between nodes with equal delivered sets, then any SEC-assumption
/// or precondition violation (reported as an axiom violation).
pub fn evaluate<D: Checked>(world: &World<D>) -> Report {
    let histories = world.histories();
    let hb = world.happens_before();
    let axioms = world.audit_axioms();
    let sec = audit_sec(&world.delivered_sequences(), &hb, &D::interpret, &D::initial());
    let preconditions = D::audit_preconditions(&histories, &hb);

    let per_node_final_states = (0..world.nodes())
        .map(|n| NodeSummary {
            node: n,
            state: D::render(world.state(n)),
            delivered: world.replica(n).delivered_ids().len(),
            failed: world.is_failed(n),
        })
        .collect();

    let divergence = first_divergence(world);
    let (verdict, witness) = if let Some(f) = world.failures().first() {
        (Verdict::InterpretationFailure, Some(Witness::InterpretationFailure { node: f.node, id: f.id }))
    } else if let Some(r) = axioms.failures().next() {
        let witness = r.witness.clone().expect("failed axioms carry a witness");
        (Verdict::AxiomViolation, Some(Witness::Axiom { axiom: r.axiom, witness }))
    } else if let Some(w) = divergence {
        (Verdict::Diverged, Some(w))
    } else if let Some(w) = &sec.counterexample {
        (Verdict::AxiomViolation, Some(Witness::Sec { witness: w.clone() }))
    } else if let Some(p) = preconditions.first() {
        (Verdict::AxiomViolation, Some(Witness::Precondition { detail: p.clone() }))
    } else {
        (Verdict::Converged, None)
    };

    let c = world.counts();
    Report {
        verdict,
        datatype: D::KIND,
        nodes: world.nodes(),
        seed: Some(world.seed()),
        per_node_final_states,
        sec_verdict: sec,
        axioms: Some(axioms),
        preconditions,
        witness,
        stats: Stats {
            broadcasts: c.broadcasts,
            delivers: c.delivers,
            drops: c.drops,
            crashes: c.crashes,
            partitions: c.partitions,
            blocked: world.in_flight(),
            permutations: None,
        },
    }
}

/// First pair of nodes with the same delivered set but different states.
fn first_divergence<D: Datatype>(world: &World<D>) -> Option<Witness> {
    let sets: Vec<&BTreeSet<LamportId>> = (0..world.nodes()).map(|n| world.replica(n).delivered_ids()).collect();
    for a in 0..world.nodes() {
        for b in a + 1..world.nodes() {
            if sets[a] != sets[b] || world.state(a) == world.state(b) {
                continue;
            }
            let nodes: [NodeIndex; 2] = [a, b];
            return Some(Witness::NodeDivergence {
                nodes,
                states: [D::render(world.state(a)), D::render(world.state(b))],
                diff: D::diff(world.state(a), world.state(b)),
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datatype::{RgaWire, WireOp};

    #[test]
    fn config_validation() {
        let bad = Scenario::new(DatatypeKind::Counter, 0, 5, 1);
        assert!(matches!(run_fuzz(&bad), Err(CheckerError::Config(_))));
        let rates = FaultRates { drop: 0.7, crash: 0.5, partition: 0.0 };
        let bad = Scenario::new(DatatypeKind::Counter, 2, 5, 1).with_faults(rates);
        assert!(matches!(run_fuzz(&bad), Err(CheckerError::Config(_))));
        let rates = FaultRates { drop: -0.1, ..FaultRates::default() };
        assert!(Scenario::new(DatatypeKind::Counter, 2, 5, 1).with_faults(rates).validate().is_err());
    }

    #[test]
    fn counter_three_nodes_converges() {
        let out = fuzz_with_trace(&Scenario::new(DatatypeKind::Counter, 3, 20, 7)).unwrap();
        let r = &out.report;
        assert_eq!(r.verdict, Verdict::Converged);
        assert!(r.axioms.as_ref().unwrap().all_passed());
        assert_eq!(r.stats.broadcasts, 20);
        // Expected value: tally of incs minus decs in the trace.
        let trace = Trace::parse(&out.trace).unwrap();
        let tally: i64 = trace
            .records
            .iter()
            .filter_map(|(_, rec)| match rec {
                TraceRecord::Broadcast { operation: WireOp::Counter(c), .. } => {
                    Some(if *c == crate::datatype::CounterWire::Inc { 1 } else { -1 })
                }
                _ => None,
            })
            .sum();
        for n in &r.per_node_final_states {
            assert_eq!(n.state, tally.to_string());
        }
    }

    #[test]
    fn invalid_scripted_broadcast_is_reported() {
        let script = vec![TraceRecord::Broadcast {
            node: 0,
            id: None,
            operation: WireOp::Rga(RgaWire::Del { id: LamportId::new(5, 1) }),
            clock: None,
            forced: false,
        }];
        let s = Scenario::new(DatatypeKind::Rga, 2, 0, 0).with_script(script);
        let out = fuzz_with_trace(&s).unwrap();
        assert_eq!(out.report.verdict, Verdict::InterpretationFailure);
        let axioms = out.report.axioms.as_ref().unwrap();
        assert!(!axioms.result(crate::network::Axiom::BroadcastOnlyValidMsgs).passed);
        assert_eq!(replay_trace(&out.trace).unwrap(), out.report);
    }

    #[test]
    fn replay_reproduces_report() {
        let rates = FaultRates { drop: 0.1, crash: 0.03, partition: 0.05 };
        for kind in DatatypeKind::ALL {
            let out = fuzz_with_trace(&Scenario::new(kind, 4, 25, 3).with_faults(rates)).unwrap();
            assert_eq!(replay_trace(&out.trace).unwrap(), out.report);
        }
    }

    #[test]
    fn logs_replay_to_the_same_states() {
        use crate::counter::Counter;
        use crate::trace::render_log;
        let rates = FaultRates { drop: 0.0, crash: 0.0, partition: 0.1 };
        let mut world = World::<Counter>::new(3, 4);
        Scheduler::new(4, 12, rates, RandomWorkload).run(&mut world).unwrap();
        let logs: Vec<String> = world.histories().iter().map(|h| render_log::<Counter>(h)).collect();
        let r = replay_logs(&logs, None).unwrap();
        assert_eq!(r.verdict, Verdict::Converged);
        for n in 0..3 {
            assert_eq!(r.per_node_final_states[n].state, Counter::render(world.state(n)));
        }
        assert!(replay_logs(&["".into()], None).is_err());
    }

    #[test]
    fn replay_errors() {
        let out = fuzz_with_trace(&Scenario::new(DatatypeKind::Counter, 2, 3, 1)).unwrap();
        let lines: Vec<&str> = out.trace.lines().collect();
        let truncated = lines[..lines.len() - 1].join("\n");
        assert!(matches!(replay_trace(&truncated), Err(CheckerError::Parse(_))));

        let bad = Trace::render(
            DatatypeKind::Counter,
            2,
            0,
            &[TraceRecord::Deliver { node: 1, id: LamportId::new(1, 0), operation: None, clock: None }],
        );
        match replay_trace(&bad) {
            Err(CheckerError::IllegalAction { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("deliver"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }
}
