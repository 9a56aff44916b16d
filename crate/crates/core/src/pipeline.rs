//! The full diagnosis run: detection, islands, conflicts per island and
//! diagnoses, plus deterministic text and JSON renderings of the result.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::conflict::{find_minimal_conflicts, ConflictSet, SearchError, SearchStats, SearchStrategy};
use crate::detection::{detect_misbehaving, DetectionError, MisbehaviourReport};
use crate::diagnosis::{minimal_hitting_sets, Diagnosis};
use crate::equation::Assignment;
use crate::model::{CausalGraph, ComponentId, ModelError};
use crate::restriction::{islands, Closure};
use crate::value::{serialize_value, Compact, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunOptions {
    #[serde(serialize_with = "serialize_value")]
    pub delta: Value,
    pub strategy: SearchStrategy,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            delta: Value::default(),
            strategy: SearchStrategy::exact(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IslandReport {
    pub closure: Closure,
    pub conflicts: Vec<ConflictSet>,
    pub diagnoses: Vec<Diagnosis>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunResult {
    pub options: RunOptions,
    pub detection: MisbehaviourReport,
    pub islands: Vec<IslandReport>,
    /// Conflicts of all islands together, in search order. Serialized as
    /// bare component lists; the islands carry the witnesses.
    #[serde(serialize_with = "component_lists")]
    pub conflicts: Vec<ConflictSet>,
    pub diagnoses: Vec<Diagnosis>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

fn component_lists<S: serde::Serializer>(conflicts: &[ConflictSet], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(conflicts.iter().map(|c| &c.components))
}

pub(crate) fn conflict_order(a: &ConflictSet, b: &ConflictSet) -> std::cmp::Ordering {
    (a.order, a.size, &a.components).cmp(&(b.order, b.size, &b.components))
}

/// Diagnoses of the whole model, island by island.
pub fn diagnose(
    graph: &CausalGraph,
    observations: &Assignment,
    options: &RunOptions,
) -> Result<RunResult, PipelineError> {
    let detection = detect_misbehaving(graph, observations, &options.delta)?;
    let mut reports = Vec::new();
    let mut stats = SearchStats::default();
    for closure in islands(graph, observations, &detection.misbehaving)? {
        let outcome = find_minimal_conflicts(graph, &closure, observations, &options.strategy)?;
        let diagnoses = minimal_hitting_sets(outcome.conflicts.iter().map(|c| &c.components));
        stats.absorb(&outcome.stats);
        reports.push(IslandReport {
            closure,
            conflicts: outcome.conflicts,
            diagnoses,
            stats: outcome.stats,
        });
    }
    let mut conflicts: Vec<ConflictSet> = reports.iter().flat_map(|r| r.conflicts.iter().cloned()).collect();
    conflicts.sort_by(conflict_order);
    let diagnoses = minimal_hitting_sets(conflicts.iter().map(|c| &c.components));
    Ok(RunResult {
        options: options.clone(),
        detection,
        islands: reports,
        conflicts,
        diagnoses,
        stats,
    })
}

/// The same search on the unrestricted graph, for comparison with the
/// island decomposition.
pub fn conflicts_without_restriction(
    graph: &CausalGraph,
    observations: &Assignment,
    options: &RunOptions,
) -> Result<Vec<ConflictSet>, PipelineError> {
    let detection = detect_misbehaving(graph, observations, &options.delta)?;
    let whole = Closure::whole_graph(graph, &detection.misbehaving);
    Ok(find_minimal_conflicts(graph, &whole, observations, &options.strategy)?.conflicts)
}

impl RunResult {
    pub fn conflict_sets(&self) -> Vec<BTreeSet<ComponentId>> {
        self.conflicts.iter().map(|c| c.components.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_misbehaviour(&mut out, &self.detection);
        for (n, island) in self.islands.iter().enumerate() {
            let c = &island.closure;
            let _ = writeln!(out, "island {}: variables {}", n + 1, braces(&c.subgraph.variables));
            let _ = writeln!(out, "  boundary {}", braces(&c.boundary));
            let _ = writeln!(out, "  influences {}", braces(&c.subgraph.influences));
        }
        write_conflicts(&mut out, &self.conflicts);
        write_diagnoses(&mut out, &self.diagnoses);
        let s = &self.stats;
        let _ = writeln!(
            out,
            "search: {} structures, {} verified, {} pruned, {} repeated, {} cache hits",
            s.pcs_identified, s.pcs_verified, s.pcs_pruned, s.pcs_repeated, s.cache_hits
        );
        let bounds: Vec<&str> = [
            (s.order_bound_hit, "order"),
            (s.size_bound_hit, "size"),
            (s.count_bound_hit, "count"),
        ]
        .iter()
        .filter(|(hit, _)| *hit)
        .map(|(_, name)| *name)
        .collect();
        if !bounds.is_empty() {
            let _ = writeln!(out, "stopped early: {} bound reached", bounds.join(", "));
        }
        out
    }
}

/// Pretty JSON with sorted object keys.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&tree).expect("json values print");
    s.push('\n');
    s
}

pub fn braces<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let inner: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(", "))
}

pub fn write_misbehaviour(out: &mut String, report: &MisbehaviourReport) {
    let _ = writeln!(out, "misbehaving: {}", braces(&report.misbehaving));
}

pub fn write_conflicts(out: &mut String, conflicts: &[ConflictSet]) {
    let _ = writeln!(out, "conflicts: {}", conflicts.len());
    for c in conflicts {
        let r = &c.residual;
        let _ = writeln!(
            out,
            "  {} m={} j={} head {}: {} vs {}",
            braces(&c.components),
            c.order,
            c.size,
            c.head,
            Compact(&r.route_a),
            Compact(&r.route_b)
        );
    }
}

pub fn write_diagnoses(out: &mut String, diagnoses: &[Diagnosis]) {
    let _ = writeln!(out, "diagnoses: {}", diagnoses.len());
    for d in diagnoses {
        let _ = writeln!(out, "  {d}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::VariableId;
    use crate::value::int;

    fn env(pairs: &[(&str, i64)]) -> Assignment {
        pairs.iter().map(|&(k, v)| (VariableId::from(k), int(v))).collect()
    }

    fn lists(sets: impl IntoIterator<Item = BTreeSet<ComponentId>>) -> Vec<Vec<String>> {
        sets.into_iter()
            .map(|s| s.iter().map(|c| c.to_string()).collect())
            .collect()
    }

    #[test]
    fn fork_pipeline() {
        let r = diagnose(
            &fixtures::fork(),
            &env(&[("P", 1), ("X", 5), ("Y", 6)]),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(lists(r.conflict_sets()), [["c1", "c2"], ["c2", "c3"]]);
        assert_eq!(
            lists(r.diagnoses.iter().map(|d| d.components.clone())),
            [vec!["c2"], vec!["c1", "c3"]]
        );
    }

    #[test]
    fn consistent_observations_give_empty_diagnosis() {
        let r = diagnose(
            &fixtures::fork(),
            &env(&[("P", 1), ("X", 3), ("Y", 6)]),
            &RunOptions::default(),
        )
        .unwrap();
        assert!(r.islands.is_empty() && r.conflicts.is_empty());
        assert_eq!(r.diagnoses.len(), 1);
        assert!(r.diagnoses[0].is_empty());
    }

    #[test]
    fn json_is_stable_and_uses_ratios() {
        let g = fixtures::chain();
        let obs = env(&[("P", 1), ("X", 10)]);
        let a = diagnose(&g, &obs, &RunOptions::default()).unwrap().to_json();
        let b = diagnose(&g, &obs, &RunOptions::default()).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"magnitude\": \"3/1\""));
        let tree: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(tree["conflicts"], serde_json::json!([["c1", "c2", "c3"]]));
    }

    #[test]
    fn text_lists_conflicts_and_diagnoses() {
        let r = diagnose(
            &fixtures::fork(),
            &env(&[("P", 1), ("X", 5), ("Y", 6)]),
            &RunOptions::default(),
        )
        .unwrap();
        let t = r.to_text();
        assert!(t.contains("misbehaving: {X}"));
        assert!(t.contains("{c1, c2} m=1 j=2 head X: 3 vs 5"));
        assert!(t.contains("diagnoses: 2\n  {c2}\n  {c1, c3}\n"));
    }
}
