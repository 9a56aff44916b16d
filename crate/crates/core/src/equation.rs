//! Exact evaluation, inversion and satisfaction checks of affine influences,
//! plus propagation-based solving of small equation structures.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{Influence, InfluenceId, VariableId};
use crate::value::{abs_diff, format_ratio, serialize_value, Value};

/// Partial map from variables to exact values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<VariableId, Value>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &VariableId) -> Option<&Value> {
        self.0.get(var)
    }

    pub fn contains(&self, var: &VariableId) -> bool {
        self.0.contains_key(var)
    }

    /// Returns the previous value, if any.
    pub fn insert(&mut self, var: VariableId, value: Value) -> Option<Value> {
        self.0.insert(var, value)
    }

    pub fn remove(&mut self, var: &VariableId) -> Option<Value> {
        self.0.remove(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableId, &Value)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VariableId> {
        self.0.keys()
    }

    /// Entries whose variable satisfies `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(&VariableId) -> bool) -> Self {
        Self(
            self.0
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }
}

impl FromIterator<(VariableId, Value)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (VariableId, Value)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Assignment {
    type Item = (&'a VariableId, &'a Value);
    type IntoIter = std::collections::btree_map::Iter<'a, VariableId, Value>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k.as_str(), &format_ratio(v))?;
        }
        map.end()
    }
}

/// Disagreement between two derivations of one variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Residual {
    pub variable: VariableId,
    #[serde(serialize_with = "serialize_value")]
    pub route_a: Value,
    #[serde(serialize_with = "serialize_value")]
    pub route_b: Value,
    #[serde(serialize_with = "serialize_value")]
    pub magnitude: Value,
}

impl Residual {
    pub fn new(variable: VariableId, route_a: Value, route_b: Value) -> Self {
        let magnitude = abs_diff(&route_a, &route_b);
        Self {
            variable,
            route_a,
            route_b,
            magnitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The solved variable is the influence's output.
    Forward,
    /// The solved variable is one of the influence's inputs.
    Backward,
}

/// One propagation step: `influence` solved for `solved`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Step {
    pub influence: InfluenceId,
    pub solved: VariableId,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquationError {
    #[error("influence `{influence}` needs a value for `{variable}`")]
    MissingValue {
        influence: InfluenceId,
        variable: VariableId,
    },
    #[error("`{variable}` is not an input of influence `{influence}`")]
    NotAnInput {
        influence: InfluenceId,
        variable: VariableId,
    },
    #[error("`{variable}` has neither a known value nor is declared unknown")]
    Undeclared { variable: VariableId },
    #[error("structure cannot determine `{head}` twice by single-unknown propagation")]
    NotPropagatable { head: VariableId },
}

fn lookup<'a>(inf: &Influence, env: &'a Assignment, var: &VariableId) -> Result<&'a Value, EquationError> {
    env.get(var).ok_or_else(|| EquationError::MissingValue {
        influence: inf.id.clone(),
        variable: var.clone(),
    })
}

/// `constant + sum(coefficient * input)`.
pub fn eval_forward(inf: &Influence, env: &Assignment) -> Result<Value, EquationError> {
    let mut acc = inf.equation.constant.clone();
    for t in &inf.equation.terms {
        acc += &t.coefficient * lookup(inf, env, &t.input)?;
    }
    Ok(acc)
}

/// Solves the influence for the input `missing` given its output and the
/// remaining inputs.
pub fn eval_backward(inf: &Influence, env: &Assignment, missing: &VariableId) -> Result<Value, EquationError> {
    let coefficient = inf
        .equation
        .coefficient(missing)
        .ok_or_else(|| EquationError::NotAnInput {
            influence: inf.id.clone(),
            variable: missing.clone(),
        })?;
    let mut rest = lookup(inf, env, &inf.output)? - &inf.equation.constant;
    for t in inf.equation.terms.iter().filter(|t| &t.input != missing) {
        rest -= &t.coefficient * lookup(inf, env, &t.input)?;
    }
    Ok(rest / coefficient)
}

/// `(|output - forward value| <= tolerance, |output - forward value|)`.
pub fn check_satisfied(inf: &Influence, env: &Assignment, tolerance: &Value) -> Result<(bool, Value), EquationError> {
    let predicted = eval_forward(inf, env)?;
    let residual = abs_diff(lookup(inf, env, &inf.output)?, &predicted);
    Ok((&residual <= tolerance, residual))
}

fn solve_for(inf: &Influence, env: &Assignment, var: &VariableId) -> Result<(Value, Direction), EquationError> {
    if var == &inf.output {
        Ok((eval_forward(inf, env)?, Direction::Forward))
    } else {
        Ok((eval_backward(inf, env, var)?, Direction::Backward))
    }
}

/// Result of single-unknown propagation over an equation set.
#[derive(Debug, Clone, Default)]
pub(crate) struct Propagation {
    pub values: Assignment,
    pub steps: Vec<Step>,
}

impl Propagation {
    fn step_for(&self, var: &VariableId) -> Option<&Step> {
        self.steps.iter().find(|s| &s.solved == var)
    }

    /// The steps `var` depends on, in execution order, ending with the step
    /// that solved `var`.
    pub fn plan_for(&self, var: &VariableId, equations: &[&Influence]) -> Vec<Step> {
        let mut needed = BTreeSet::new();
        let mut stack = vec![var.clone()];
        while let Some(v) = stack.pop() {
            let Some(step) = self.step_for(&v) else {
                continue;
            };
            if !needed.insert(step.solved.clone()) {
                continue;
            }
            let inf = equations
                .iter()
                .find(|e| e.id == step.influence)
                .expect("step influence comes from the equation set");
            stack.extend(inf.variables().filter(|&w| w != &v).cloned());
        }
        self.steps
            .iter()
            .filter(|s| needed.contains(&s.solved))
            .cloned()
            .collect()
    }
}

/// Repeatedly solves the first equation (in the given order) with exactly
/// one undetermined variable, until none remains.
pub(crate) fn propagate(
    equations: &[&Influence],
    known: &Assignment,
    unknowns: &BTreeSet<VariableId>,
) -> Result<Propagation, EquationError> {
    let mut values = known.restricted(|v| !unknowns.contains(v));
    let mut used = vec![false; equations.len()];
    let mut steps = Vec::new();
    'outer: loop {
        for (i, inf) in equations.iter().enumerate() {
            if used[i] {
                continue;
            }
            let mut open = inf.variables().filter(|v| !values.contains(v));
            let (Some(var), None) = (open.next(), open.next()) else {
                continue;
            };
            let var = var.clone();
            if !unknowns.contains(&var) {
                return Err(EquationError::Undeclared { variable: var });
            }
            let (value, direction) = solve_for(inf, &values, &var)?;
            values.insert(var.clone(), value);
            used[i] = true;
            steps.push(Step {
                influence: inf.id.clone(),
                solved: var,
                direction,
            });
            continue 'outer;
        }
        break;
    }
    Ok(Propagation { values, steps })
}

/// Outcome of [`solve_structure`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    /// Both derivations of the head agree; the full assignment of the structure.
    Consistent(Assignment),
    Inconsistent(Residual),
}

/// Solves an equation structure by propagation and compares two derivations
/// of `head`.
///
/// Route A propagates over every equation with the head treated as unknown
/// and fixes all unknowns. Route B is the observed head value when the head
/// is known, otherwise propagation over the structure without the equation
/// that closed route A.
pub fn solve_structure(
    equations: &[&Influence],
    known: &Assignment,
    unknowns: &BTreeSet<VariableId>,
    head: &VariableId,
    tolerance: &Value,
) -> Result<Solution, EquationError> {
    Solver::default().solve(equations, known, unknowns, head, tolerance)
}

pub(crate) struct RouteValues {
    pub route_a: Value,
    pub route_b: Value,
    pub values: Assignment,
}

/// Propagation results cached by equation subset and unknown set. One solver
/// must only ever see a single set of known values.
#[derive(Default)]
pub(crate) struct Solver {
    cache: HashMap<(Vec<InfluenceId>, Vec<VariableId>), Propagation>,
    pub hits: usize,
}

impl Solver {
    fn propagate_cached(
        &mut self,
        equations: &[&Influence],
        known: &Assignment,
        unknowns: &BTreeSet<VariableId>,
    ) -> Result<Propagation, EquationError> {
        let mut key_eqs: Vec<InfluenceId> = equations.iter().map(|e| e.id.clone()).collect();
        key_eqs.sort();
        let key = (key_eqs, unknowns.iter().cloned().collect::<Vec<_>>());
        if let Some(p) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(p.clone());
        }
        let p = propagate(equations, known, unknowns)?;
        self.cache.insert(key, p.clone());
        Ok(p)
    }

    pub(crate) fn routes(
        &mut self,
        equations: &[&Influence],
        known: &Assignment,
        unknowns: &BTreeSet<VariableId>,
        head: &VariableId,
    ) -> Result<RouteValues, EquationError> {
        for inf in equations {
            if let Some(v) = inf
                .variables()
                .find(|v| !known.contains(v) && !unknowns.contains(*v) && *v != head)
            {
                return Err(EquationError::Undeclared { variable: v.clone() });
            }
        }
        let not_propagatable = || EquationError::NotPropagatable { head: head.clone() };
        let head_known = known.get(head).cloned();
        let mut route_a_unknowns = unknowns.clone();
        route_a_unknowns.insert(head.clone());
        let route_a = self.propagate_cached(equations, known, &route_a_unknowns)?;
        let closing = route_a.step_for(head).ok_or_else(not_propagatable)?.influence.clone();
        let a_value = route_a.values.get(head).cloned().ok_or_else(not_propagatable)?;
        let b_value = match head_known {
            Some(v) => v,
            None => {
                let rest: Vec<&Influence> = equations.iter().copied().filter(|e| e.id != closing).collect();
                let route_b = self.propagate_cached(&rest, known, unknowns)?;
                route_b.values.get(head).cloned().ok_or_else(not_propagatable)?
            }
        };
        let mut values = route_a.values;
        if let Some(v) = known.get(head) {
            values.insert(head.clone(), v.clone());
        }
        Ok(RouteValues {
            route_a: a_value,
            route_b: b_value,
            values,
        })
    }

    pub(crate) fn solve(
        &mut self,
        equations: &[&Influence],
        known: &Assignment,
        unknowns: &BTreeSet<VariableId>,
        head: &VariableId,
        tolerance: &Value,
    ) -> Result<Solution, EquationError> {
        let r = self.routes(equations, known, unknowns, head)?;
        let residual = Residual::new(head.clone(), r.route_a, r.route_b);
        if residual.magnitude > *tolerance {
            Ok(Solution::Inconsistent(residual))
        } else {
            Ok(Solution::Consistent(r.values))
        }
    }
}
