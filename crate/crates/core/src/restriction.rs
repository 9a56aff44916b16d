//! Information closure of a variable set and its split into islands.
//!
//! A closure is grown outward from its targets through every variable that
//! cannot act as a cut point: unmeasured, unobserved or misbehaving
//! variables, and measured ones that would be fed from inside the closure
//! while also feeding into it. Growth stops at measured, observed, OK
//! variables; those become the boundary. Graph sources and sinks reached
//! while growing are interior and simply end the growth there.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::equation::Assignment;
use crate::model::{CausalGraph, InfluenceId, ModelError, Subgraph, VariableId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Closure {
    pub subgraph: Subgraph,
    pub boundary: BTreeSet<VariableId>,
    /// Misbehaving variables inside the closure.
    pub misbehaving: BTreeSet<VariableId>,
}

impl Closure {
    /// The whole graph as a single diagnosis domain, without restriction.
    pub fn whole_graph(graph: &CausalGraph, misbehaving: &BTreeSet<VariableId>) -> Self {
        Self {
            subgraph: Subgraph {
                variables: graph.variables().iter().map(|v| v.id.clone()).collect(),
                influences: graph.influences().iter().map(|i| i.id.clone()).collect(),
            },
            boundary: BTreeSet::new(),
            misbehaving: misbehaving.clone(),
        }
    }

    pub fn interior(&self) -> impl Iterator<Item = &VariableId> {
        self.subgraph.variables.iter().filter(|v| !self.boundary.contains(*v))
    }

    fn overlaps(&self, other: &Closure) -> bool {
        !self.subgraph.variables.is_disjoint(&other.subgraph.variables)
            || !self.subgraph.influences.is_disjoint(&other.subgraph.influences)
    }
}

/// Whether a variable may serve as a cut point of a closure.
fn can_cut(graph: &CausalGraph, obs: &Assignment, misbehaving: &BTreeSet<VariableId>, v: &VariableId) -> bool {
    graph.is_measured(v) && obs.contains(v) && !misbehaving.contains(v)
}

/// CLO(targets) with respect to the misbehaving set `misbehaving`.
pub fn closure(
    graph: &CausalGraph,
    observations: &Assignment,
    misbehaving: &BTreeSet<VariableId>,
    targets: &BTreeSet<VariableId>,
) -> Result<Closure, ModelError> {
    if let Some(t) = targets.iter().find(|t| !graph.contains(t)) {
        return Err(ModelError::UnknownVariable(t.clone()));
    }
    let cut = |v: &VariableId| can_cut(graph, observations, misbehaving, v);

    let mut variables: BTreeSet<VariableId> = targets.clone();
    let mut boundary: BTreeSet<VariableId> = targets.iter().filter(|t| cut(t)).cloned().collect();
    let mut influences: BTreeSet<InfluenceId> = BTreeSet::new();
    let mut queue: VecDeque<VariableId> = targets.iter().filter(|t| !cut(t)).cloned().collect();

    loop {
        while let Some(v) = queue.pop_front() {
            for inf in graph.links(&v) {
                if !influences.insert(inf.id.clone()) {
                    continue;
                }
                for w in inf.variables() {
                    if variables.insert(w.clone()) {
                        if cut(w) {
                            boundary.insert(w.clone());
                        } else {
                            queue.push_back(w.clone());
                        }
                    }
                }
            }
        }
        // influences running between boundary variables belong to the closure too
        for inf in graph.influences() {
            if !influences.contains(&inf.id) && inf.variables().all(|w| variables.contains(w)) {
                influences.insert(inf.id.clone());
            }
        }
        let two_sided: Vec<VariableId> = boundary
            .iter()
            .filter(|b| {
                let fed = graph.definers(b).any(|i| influences.contains(&i.id));
                let feeds = graph.consumers(b).any(|i| influences.contains(&i.id));
                fed && feeds
            })
            .cloned()
            .collect();
        if two_sided.is_empty() {
            break;
        }
        for b in two_sided {
            boundary.remove(&b);
            queue.push_back(b);
        }
    }

    let inside_misbehaving = variables.intersection(misbehaving).cloned().collect();
    Ok(Closure {
        subgraph: Subgraph { variables, influences },
        boundary,
        misbehaving: inside_misbehaving,
    })
}

/// Disjoint closures, each owning the misbehaving variables it contains,
/// ordered by their smallest variable id.
pub fn islands(
    graph: &CausalGraph,
    observations: &Assignment,
    misbehaving: &BTreeSet<VariableId>,
) -> Result<Vec<Closure>, ModelError> {
    let mut groups: Vec<BTreeSet<VariableId>> = misbehaving.iter().map(|x| BTreeSet::from([x.clone()])).collect();
    let mut closures = groups
        .iter()
        .map(|g| closure(graph, observations, misbehaving, g))
        .collect::<Result<Vec<_>, _>>()?;
    'merge: loop {
        for i in 0..closures.len() {
            for j in i + 1..closures.len() {
                if closures[i].overlaps(&closures[j]) {
                    let absorbed = groups.remove(j);
                    closures.remove(j);
                    groups[i].extend(absorbed);
                    closures[i] = closure(graph, observations, misbehaving, &groups[i])?;
                    continue 'merge;
                }
            }
        }
        break;
    }
    closures.sort_by(|a, b| a.subgraph.variables.first().cmp(&b.subgraph.variables.first()));
    Ok(closures)
}
