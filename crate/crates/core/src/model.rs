//! Causal graph data model, structural validation and reachability.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use num_traits::Zero;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

use crate::value::{Compact, Value};

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

identifier!(
    /// Name of a process variable.
    VariableId
);
identifier!(
    /// Name of a physical component; conflicts and diagnoses are sets of these.
    ComponentId
);
identifier!(
    /// Name of a single influence (equation).
    InfluenceId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measurability {
    Measured,
    Unmeasured,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VariableId,
    pub measurability: Measurability,
}

impl Variable {
    pub fn measured(id: impl Into<String>) -> Self {
        Self {
            id: VariableId::new(id),
            measurability: Measurability::Measured,
        }
    }

    pub fn unmeasured(id: impl Into<String>) -> Self {
        Self {
            id: VariableId::new(id),
            measurability: Measurability::Unmeasured,
        }
    }

    pub fn is_measured(&self) -> bool {
        self.measurability == Measurability::Measured
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub input: VariableId,
    pub coefficient: Value,
}

/// `output = constant + sum(coefficient * input)`.
///
/// The inputs of an influence are exactly the keys of its terms, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineEquation {
    pub terms: Vec<Term>,
    pub constant: Value,
}

impl AffineEquation {
    pub fn new(terms: impl IntoIterator<Item = (VariableId, Value)>, constant: Value) -> Self {
        Self {
            terms: terms
                .into_iter()
                .map(|(input, coefficient)| Term { input, coefficient })
                .collect(),
            constant,
        }
    }

    pub fn coefficient(&self, input: &VariableId) -> Option<&Value> {
        self.terms.iter().find(|t| &t.input == input).map(|t| &t.coefficient)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Influence {
    pub id: InfluenceId,
    pub component: ComponentId,
    pub output: VariableId,
    pub equation: AffineEquation,
}

impl Influence {
    pub fn new(
        id: impl Into<String>,
        component: impl Into<String>,
        output: impl Into<String>,
        equation: AffineEquation,
    ) -> Self {
        Self {
            id: InfluenceId::new(id),
            component: ComponentId::new(component),
            output: VariableId::new(output),
            equation,
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VariableId> {
        self.equation.terms.iter().map(|t| &t.input)
    }

    /// Inputs followed by the output.
    pub fn variables(&self) -> impl Iterator<Item = &VariableId> {
        self.inputs().chain(std::iter::once(&self.output))
    }

    pub fn mentions(&self, var: &VariableId) -> bool {
        self.variables().any(|v| v == var)
    }
}

impl fmt::Display for Influence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = ", self.output)?;
        for (i, t) in self.equation.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}*{}", Compact(&t.coefficient), t.input)?;
        }
        if !self.equation.constant.is_zero() {
            write!(f, " + {}", Compact(&self.equation.constant))?;
        }
        Ok(())
    }
}

/// A set of variables and influences; the influences' endpoints lie inside
/// the variable set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Subgraph {
    pub variables: BTreeSet<VariableId>,
    pub influences: BTreeSet<InfluenceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(VariableId),
    #[error("the graph contains a cycle through {}", join(.0))]
    Cycle(Vec<VariableId>),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyIdentifier,
    DuplicateVariable(VariableId),
    DuplicateInfluence(InfluenceId),
    DanglingReference {
        influence: InfluenceId,
        variable: VariableId,
    },
    EmptyEquation(InfluenceId),
    DuplicateInput {
        influence: InfluenceId,
        input: VariableId,
    },
    ZeroCoefficient {
        influence: InfluenceId,
        input: VariableId,
    },
    /// Variables of one strongly connected component (or a self-loop).
    Cycle(Vec<VariableId>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyIdentifier => write!(f, "empty identifier"),
            Violation::DuplicateVariable(v) => write!(f, "variable `{v}` declared twice"),
            Violation::DuplicateInfluence(i) => write!(f, "influence `{i}` declared twice"),
            Violation::DanglingReference { influence, variable } => {
                write!(f, "influence `{influence}` references undeclared variable `{variable}`")
            }
            Violation::EmptyEquation(i) => write!(f, "influence `{i}` has no input terms"),
            Violation::DuplicateInput { influence, input } => {
                write!(f, "influence `{influence}` lists input `{input}` twice")
            }
            Violation::ZeroCoefficient { influence, input } => {
                write!(f, "influence `{influence}` has a zero coefficient on `{input}`")
            }
            Violation::Cycle(vars) => write!(f, "cycle through {}", join(vars)),
        }
    }
}

/// Outcome of [`validate_model`]; empty means the model is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_cycle(&self) -> bool {
        self.violations.iter().any(|v| matches!(v, Violation::Cycle(_)))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Variables plus component-tagged influences.
///
/// Construction never fails; structural problems are reported by
/// [`validate_model`]. Lookups resolve to the first declaration of an id.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    variables: Vec<Variable>,
    influences: Vec<Influence>,
    var_index: BTreeMap<VariableId, usize>,
    inf_index: BTreeMap<InfluenceId, usize>,
    /// Influences whose output is the variable.
    defined_by: Vec<Vec<usize>>,
    /// Influences using the variable as an input.
    used_by: Vec<Vec<usize>>,
}

impl CausalGraph {
    pub fn new(variables: Vec<Variable>, influences: Vec<Influence>) -> Self {
        let mut var_index = BTreeMap::new();
        for (i, v) in variables.iter().enumerate() {
            var_index.entry(v.id.clone()).or_insert(i);
        }
        let mut inf_index = BTreeMap::new();
        for (i, inf) in influences.iter().enumerate() {
            inf_index.entry(inf.id.clone()).or_insert(i);
        }
        let mut defined_by = vec![Vec::new(); variables.len()];
        let mut used_by = vec![Vec::new(); variables.len()];
        for (i, inf) in influences.iter().enumerate() {
            if inf_index[&inf.id] != i {
                continue;
            }
            if let Some(&o) = var_index.get(&inf.output) {
                defined_by[o].push(i);
            }
            let inputs: BTreeSet<_> = inf.inputs().collect();
            for input in inputs {
                if let Some(&v) = var_index.get(input) {
                    used_by[v].push(i);
                }
            }
        }
        Self {
            variables,
            influences,
            var_index,
            inf_index,
            defined_by,
            used_by,
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn influences(&self) -> &[Influence] {
        &self.influences
    }

    pub fn variable(&self, id: &VariableId) -> Option<&Variable> {
        self.var_index.get(id).map(|&i| &self.variables[i])
    }

    pub fn influence(&self, id: &InfluenceId) -> Option<&Influence> {
        self.inf_index.get(id).map(|&i| &self.influences[i])
    }

    pub fn contains(&self, id: &VariableId) -> bool {
        self.var_index.contains_key(id)
    }

    pub fn is_measured(&self, id: &VariableId) -> bool {
        self.variable(id).is_some_and(Variable::is_measured)
    }

    /// Influences with `var` as output.
    pub fn definers(&self, var: &VariableId) -> impl Iterator<Item = &Influence> {
        self.var_index
            .get(var)
            .into_iter()
            .flat_map(move |&v| self.defined_by[v].iter().map(move |&i| &self.influences[i]))
    }

    /// Influences with `var` among their inputs.
    pub fn consumers(&self, var: &VariableId) -> impl Iterator<Item = &Influence> {
        self.var_index
            .get(var)
            .into_iter()
            .flat_map(move |&v| self.used_by[v].iter().map(move |&i| &self.influences[i]))
    }

    /// Every influence touching `var`, ordered by id.
    pub fn links(&self, var: &VariableId) -> Vec<&Influence> {
        let mut links: Vec<&Influence> = self.definers(var).chain(self.consumers(var)).collect();
        links.sort_by(|a, b| a.id.cmp(&b.id));
        links.dedup_by(|a, b| a.id == b.id);
        links
    }

    /// A variable with no incoming influence.
    pub fn is_input(&self, var: &VariableId) -> bool {
        self.definers(var).next().is_none()
    }

    /// A variable with no outgoing influence.
    pub fn is_output(&self, var: &VariableId) -> bool {
        self.consumers(var).next().is_none()
    }

    pub fn input_variables(&self) -> BTreeSet<VariableId> {
        self.var_index.keys().filter(|v| self.is_input(v)).cloned().collect()
    }

    pub fn components(&self) -> BTreeSet<ComponentId> {
        self.influences.iter().map(|i| i.component.clone()).collect()
    }

    /// Unique influences in id order.
    pub(crate) fn influences_sorted(&self) -> impl Iterator<Item = &Influence> {
        self.inf_index.values().map(|&i| &self.influences[i])
    }

    fn check_known(&self, vars: &BTreeSet<VariableId>) -> Result<(), ModelError> {
        match vars.iter().find(|v| !self.contains(v)) {
            Some(v) => Err(ModelError::UnknownVariable(v.clone())),
            None => Ok(()),
        }
    }
}

/// Reports every structural violation; an empty report means the graph is
/// a valid diagnosable model.
pub fn validate_model(graph: &CausalGraph) -> ValidationReport {
    let mut violations = Vec::new();
    let empty_id = graph.variables.iter().any(|v| v.id.as_str().is_empty())
        || graph
            .influences
            .iter()
            .any(|i| i.id.as_str().is_empty() || i.component.as_str().is_empty() || i.output.as_str().is_empty());
    if empty_id {
        violations.push(Violation::EmptyIdentifier);
    }
    let mut seen = BTreeSet::new();
    for v in &graph.variables {
        if !seen.insert(&v.id) {
            violations.push(Violation::DuplicateVariable(v.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for inf in &graph.influences {
        if !seen.insert(&inf.id) {
            violations.push(Violation::DuplicateInfluence(inf.id.clone()));
        }
    }
    for inf in &graph.influences {
        let mut reported = BTreeSet::new();
        for var in inf.variables() {
            if !graph.contains(var) && reported.insert(var) {
                violations.push(Violation::DanglingReference {
                    influence: inf.id.clone(),
                    variable: var.clone(),
                });
            }
        }
        if inf.equation.terms.is_empty() {
            violations.push(Violation::EmptyEquation(inf.id.clone()));
        }
        let mut inputs = BTreeSet::new();
        for t in &inf.equation.terms {
            if !inputs.insert(&t.input) {
                violations.push(Violation::DuplicateInput {
                    influence: inf.id.clone(),
                    input: t.input.clone(),
                });
            }
            if t.coefficient.is_zero() {
                violations.push(Violation::ZeroCoefficient {
                    influence: inf.id.clone(),
                    input: t.input.clone(),
                });
            }
        }
    }
    violations.extend(cycles(graph).into_iter().map(Violation::Cycle));
    ValidationReport { violations }
}

/// Strongly connected components that form cycles, each sorted, in id order.
fn cycles(graph: &CausalGraph) -> Vec<Vec<VariableId>> {
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..graph.variables.len()).map(|i| g.add_node(i)).collect();
    let mut self_loops = BTreeSet::new();
    for inf in &graph.influences {
        let Some(&out) = graph.var_index.get(&inf.output) else {
            continue;
        };
        for input in inf.inputs() {
            if let Some(&i) = graph.var_index.get(input) {
                if i == out {
                    self_loops.insert(i);
                }
                g.update_edge(nodes[i], nodes[out], ());
            }
        }
    }
    let mut found: Vec<Vec<VariableId>> = petgraph::algo::tarjan_scc(&g)
        .into_iter()
        .filter(|scc| scc.len() > 1 || self_loops.contains(&g[scc[0]]))
        .map(|scc| {
            let mut ids: Vec<_> = scc.iter().map(|n| graph.variables[g[*n]].id.clone()).collect();
            ids.sort();
            ids.dedup();
            ids
        })
        .collect();
    found.sort();
    found
}

/// ANT(targets): every influence on a directed path ending at a target,
/// together with the variables those influences touch.
pub fn ancestors(graph: &CausalGraph, targets: &BTreeSet<VariableId>) -> Result<Subgraph, ModelError> {
    reach(graph, targets, true)
}

/// DESC(sources): every influence on a directed path starting at a source.
pub fn descendants(graph: &CausalGraph, sources: &BTreeSet<VariableId>) -> Result<Subgraph, ModelError> {
    reach(graph, sources, false)
}

fn reach(graph: &CausalGraph, seeds: &BTreeSet<VariableId>, upstream: bool) -> Result<Subgraph, ModelError> {
    graph.check_known(seeds)?;
    let mut sub = Subgraph {
        variables: seeds.clone(),
        influences: BTreeSet::new(),
    };
    let mut visited: BTreeSet<VariableId> = seeds.clone();
    let mut queue: VecDeque<VariableId> = seeds.iter().cloned().collect();
    while let Some(v) = queue.pop_front() {
        let step: Vec<&Influence> = if upstream {
            graph.definers(&v).collect()
        } else {
            graph.consumers(&v).collect()
        };
        for inf in step {
            sub.influences.insert(inf.id.clone());
            sub.variables.extend(inf.variables().cloned());
            let next: Vec<&VariableId> = if upstream {
                inf.inputs().collect()
            } else {
                vec![&inf.output]
            };
            for n in next {
                if visited.insert(n.clone()) {
                    queue.push_back(n.clone());
                }
            }
        }
    }
    Ok(sub)
}

/// Variables ordered so every influence's inputs precede its output; ties
/// are broken by identifier.
pub fn topological_order(graph: &CausalGraph) -> Result<Vec<VariableId>, ModelError> {
    let n = graph.variables.len();
    let unique: Vec<usize> = graph.var_index.values().copied().collect();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for inf in graph.influences_sorted() {
        let Some(&out) = graph.var_index.get(&inf.output) else {
            continue;
        };
        for input in inf.inputs() {
            if let Some(&i) = graph.var_index.get(input) {
                if succ[i].insert(out) {
                    indegree[out] += 1;
                }
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<(&VariableId, usize)>> = unique
        .iter()
        .filter(|&&i| indegree[i] == 0)
        .map(|&i| Reverse((&graph.variables[i].id, i)))
        .collect();
    let mut order = Vec::with_capacity(unique.len());
    while let Some(Reverse((id, i))) = ready.pop() {
        order.push(id.clone());
        for &s in &succ[i] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse((&graph.variables[s].id, s)));
            }
        }
    }
    if order.len() < unique.len() {
        let placed: BTreeSet<_> = order.iter().collect();
        let stuck = graph
            .var_index
            .keys()
            .filter(|v| !placed.contains(v))
            .cloned()
            .collect();
        return Err(ModelError::Cycle(stuck));
    }
    Ok(order)
}
