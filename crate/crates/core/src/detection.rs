//! Detection of misbehaving variables by simulating the all-OK model.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::equation::{eval_forward, Assignment, EquationError};
use crate::model::{topological_order, CausalGraph, InfluenceId, ModelError, VariableId};
use crate::value::{abs_diff, serialize_value, Compact, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error("no value supplied for input variable `{0}`")]
    MissingInput(VariableId),
    #[error("`{0}` is not an input variable of the model")]
    NotAnInput(VariableId),
    #[error("observation of unmeasured variable `{0}`")]
    UnmeasuredObservation(VariableId),
    #[error(transparent)]
    SelfContradiction(Box<Contradiction>),
}

/// Two definitions of one variable disagreeing in the all-OK model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "the all-OK model contradicts itself at `{variable}`: `{first}` gives {}, `{second}` gives {}",
    Compact(.first_value),
    Compact(.second_value)
)]
pub struct Contradiction {
    pub variable: VariableId,
    pub first: InfluenceId,
    pub first_value: Value,
    pub second: InfluenceId,
    pub second_value: Value,
}

/// The misbehaving set found by [`detect_misbehaving`], with the predictions
/// it was measured against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MisbehaviourReport {
    pub misbehaving: BTreeSet<VariableId>,
    pub predicted: Assignment,
    #[serde(serialize_with = "serialize_value")]
    pub delta: Value,
}

/// Forward simulation in topological order. Every variable with several
/// defining influences must receive the same value from each of them.
pub fn simulate(graph: &CausalGraph, inputs: &Assignment) -> Result<Assignment, DetectionError> {
    if let Some(extra) = inputs.keys().find(|v| !graph.contains(v) || !graph.is_input(v)) {
        return Err(DetectionError::NotAnInput(extra.clone()));
    }
    let mut values = Assignment::new();
    for var in topological_order(graph)? {
        let mut definers = graph.definers(&var);
        let Some(first) = definers.next() else {
            let v = inputs
                .get(&var)
                .ok_or_else(|| DetectionError::MissingInput(var.clone()))?;
            values.insert(var, v.clone());
            continue;
        };
        let value = eval_forward(first, &values)?;
        for other in definers {
            let v = eval_forward(other, &values)?;
            if v != value {
                return Err(DetectionError::SelfContradiction(Box::new(Contradiction {
                    variable: var,
                    first: first.id.clone(),
                    first_value: value,
                    second: other.id.clone(),
                    second_value: v,
                })));
            }
        }
        values.insert(var, value);
    }
    Ok(values)
}

/// Flags observed, measured, non-input variables whose observation departs
/// from the all-OK prediction by more than `delta`.
pub fn detect_misbehaving(
    graph: &CausalGraph,
    observations: &Assignment,
    delta: &Value,
) -> Result<MisbehaviourReport, DetectionError> {
    for var in observations.keys() {
        match graph.variable(var) {
            None => return Err(ModelError::UnknownVariable(var.clone()).into()),
            Some(v) if !v.is_measured() => return Err(DetectionError::UnmeasuredObservation(var.clone())),
            Some(_) => {}
        }
    }
    let inputs = observations.restricted(|v| graph.is_input(v));
    let predicted = simulate(graph, &inputs)?;
    let misbehaving = observations
        .iter()
        .filter(|(var, _)| !graph.is_input(var))
        .filter(|(var, observed)| predicted.get(var).is_some_and(|p| abs_diff(observed, p) > *delta))
        .map(|(var, _)| var.clone())
        .collect();
    Ok(MisbehaviourReport {
        misbehaving,
        predicted,
        delta: delta.clone(),
    })
}
