//! Checker reports and their text / JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::causal::{LamportId, NodeIndex};
use crate::datatype::DatatypeKind;
use crate::interp::{SecVerdict, SecWitness};
use crate::network::{Axiom, AxiomReport, AxiomWitness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    AxiomViolation,
    InterpretationFailure,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::AxiomViolation => "axiom_violation",
            Verdict::InterpretationFailure => "interpretation_failure",
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Converged => 0,
            Verdict::Diverged => 1,
            Verdict::AxiomViolation | Verdict::InterpretationFailure => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: NodeIndex,
    pub state: String,
    pub delivered: usize,
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Two nodes with equal delivered sets but different states.
    NodeDivergence {
        nodes: [NodeIndex; 2],
        states: [String; 2],
        diff: Vec<String>,
    },
    /// Two hb-consistent orders of one message set with different outcomes.
    PermutationDivergence {
        orders: [Vec<LamportId>; 2],
        states: [String; 2],
        diff: Vec<String>,
    },
    Axiom {
        axiom: Axiom,
        witness: AxiomWitness,
    },
    Sec {
        witness: SecWitness,
    },
    InterpretationFailure {
        node: NodeIndex,
        id: LamportId,
    },
    /// An hb-consistent order whose application fails at `id`.
    OrderFailure {
        order: Vec<LamportId>,
        id: LamportId,
    },
    Precondition {
        detail: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub broadcasts: usize,
    pub delivers: usize,
    pub drops: usize,
    pub crashes: usize,
    pub partitions: usize,
    /// Undropped messages that can never become deliverable because a
    /// causal predecessor was dropped.
    pub blocked: usize,
    /// Linear extensions enumerated by the brute-force oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: Verdict,
    pub datatype: DatatypeKind,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub per_node_final_states: Vec<NodeSummary>,
    pub sec_verdict: SecVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axioms: Option<AxiomReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub stats: Stats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (expected text or json)")),
        }
    }
}

fn ids(order: &[LamportId]) -> String {
    order.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn render_witness(w: &Witness) -> String {
    match w {
        Witness::NodeDivergence { nodes, states, diff } => format!(
            "node {} and node {} diverge\n  node {}: {}\n  node {}: {}\n  diff: {}",
            nodes[0],
            nodes[1],
            nodes[0],
            states[0],
            nodes[1],
            states[1],
            diff.join("; ")
        ),
        Witness::PermutationDivergence { orders, states, diff } => format!(
            "orders diverge\n  [{}] -> {}\n  [{}] -> {}\n  diff: {}",
            ids(&orders[0]),
            states[0],
            ids(&orders[1]),
            states[1],
            diff.join("; ")
        ),
        Witness::Axiom { axiom, witness } => format!("{axiom}: {witness}"),
        Witness::Sec { witness } => format!("sec: {}", serde_json::to_string(witness).expect("serializable")),
        Witness::InterpretationFailure { node, id } => format!("interpretation of {id} failed at node {node}"),
        Witness::OrderFailure { order, id } => format!("order [{}] fails at {id}", ids(order)),
        Witness::Precondition { detail } => detail.clone(),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

impl Report {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.render_text(),
            ReportFormat::Json => self.render_json(),
        }
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn parse_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", self.verdict.name());
        let _ = writeln!(out, "datatype: {}", self.datatype);
        let _ = writeln!(out, "nodes: {}", self.nodes);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        for n in &self.per_node_final_states {
            let failed = if n.failed { ", failed" } else { "" };
            let _ = writeln!(out, "node {}: {} (delivered {}{failed})", n.node, n.state, n.delivered);
        }
        let v = &self.sec_verdict;
        let _ = writeln!(
            out,
            "sec: causality={} distinctness={} trunc={} commutativity={} no-failure={}",
            ok(v.causality_ok),
            ok(v.distinctness_ok),
            ok(v.trunc_ok),
            ok(v.commutativity_ok),
            ok(v.no_failure_ok)
        );
        if let Some(axioms) = &self.axioms {
            let failed: Vec<&str> = axioms.failures().map(|r| r.axiom.name()).collect();
            if failed.is_empty() {
                let _ = writeln!(out, "axioms: all {} pass", axioms.results.len());
            } else {
                let _ = writeln!(out, "axioms: FAIL {}", failed.join(", "));
            }
        }
        if self.preconditions.is_empty() {
            let _ = writeln!(out, "preconditions: ok");
        } else {
            for p in &self.preconditions {
                let _ = writeln!(out, "precondition violated: {p}");
            }
        }
        if let Some(w) = &self.witness {
            let _ = writeln!(out, "witness: {}", render_witness(w));
        }
        let s = &self.stats;
        let _ = write!(
            out,
            "stats: broadcasts={} delivers={} drops={} crashes={} partitions={} blocked={}",
            s.broadcasts, s.delivers, s.drops, s.crashes, s.partitions, s.blocked
        );
        if let Some(p) = s.permutations {
            let _ = write!(out, " permutations={p}");
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            verdict: Verdict::Diverged,
            datatype: DatatypeKind::Counter,
            nodes: 2,
            seed: Some(9),
            per_node_final_states: vec![
                NodeSummary { node: 0, state: "1".into(), delivered: 1, failed: false },
                NodeSummary { node: 1, state: "2".into(), delivered: 1, failed: false },
            ],
            sec_verdict: SecVerdict::default(),
            axioms: None,
            preconditions: vec![],
            witness: Some(Witness::NodeDivergence {
                nodes: [0, 1],
                states: ["1".into(), "2".into()],
                diff: vec!["value 1 vs 2".into()],
            }),
            stats: Stats { broadcasts: 1, delivers: 2, ..Stats::default() },
        }
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        assert_eq!(Report::parse_json(&r.render_json()).unwrap(), r);
    }

    #[test]
    fn text_names_nodes_and_diff() {
        let t = sample().render_text();
        assert!(t.contains("node 0: 1"));
        assert!(t.contains("node 1: 2"));
        assert!(t.contains("node 0 and node 1 diverge"));
        assert!(t.contains("value 1 vs 2"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Verdict::Converged.exit_code(), 0);
        assert_eq!(Verdict::Diverged.exit_code(), 1);
        assert_eq!(Verdict::AxiomViolation.exit_code(), 2);
    }
}
