//! Brute-force references: exact Gaussian elimination and exhaustive subset
//! sweeps. Slow by design and capped at a dozen components.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::diagnosis::Diagnosis;
use crate::equation::Assignment;
use crate::model::{CausalGraph, ComponentId, Influence, VariableId};
use crate::value::Value;

pub const ORACLE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{0} components exceed the oracle limit of {ORACLE_LIMIT}")]
    TooLarge(usize),
}

/// Whether the remaining variables can be chosen to satisfy every equation
/// exactly once `known` is substituted.
pub fn linear_feasible<'a>(equations: impl IntoIterator<Item = &'a Influence>, known: &Assignment) -> bool {
    let mut columns: BTreeMap<VariableId, usize> = BTreeMap::new();
    let mut rows: Vec<(BTreeMap<usize, Value>, Value)> = Vec::new();
    for inf in equations {
        // output - sum(coef * input) = constant
        let mut row: BTreeMap<usize, Value> = BTreeMap::new();
        let mut rhs = inf.equation.constant.clone();
        let mut add = |var: &VariableId, coef: Value, row: &mut BTreeMap<usize, Value>| match known.get(var) {
            Some(v) => rhs -= coef * v,
            None => {
                let next = columns.len();
                let col = *columns.entry(var.clone()).or_insert(next);
                let slot = row.entry(col).or_insert_with(Value::zero);
                *slot += coef;
            }
        };
        add(&inf.output, Value::one(), &mut row);
        for term in &inf.equation.terms {
            add(&term.input, -term.coefficient.clone(), &mut row);
        }
        row.retain(|_, c| !c.is_zero());
        rows.push((row, rhs));
    }

    let mut pivots: Vec<(usize, BTreeMap<usize, Value>, Value)> = Vec::new();
    for (mut row, mut rhs) in rows {
        for (col, prow, prhs) in &pivots {
            if let Some(factor) = row.get(col).cloned() {
                for (c, v) in prow {
                    let slot = row.entry(*c).or_insert_with(Value::zero);
                    *slot -= &factor * v;
                }
                rhs -= &factor * prhs;
                row.retain(|_, c| !c.is_zero());
            }
        }
        match row.iter().next().map(|(c, v)| (*c, v.clone())) {
            None if !rhs.is_zero() => return false,
            None => {}
            Some((col, lead)) => {
                let prow: BTreeMap<usize, Value> = row.into_iter().map(|(c, v)| (c, v / &lead)).collect();
                let prhs = rhs / &lead;
                // keep earlier pivots reduced against the new one
                for (_, other, orhs) in &mut pivots {
                    if let Some(factor) = other.get(&col).cloned() {
                        for (c, v) in &prow {
                            let slot = other.entry(*c).or_insert_with(Value::zero);
                            *slot -= &factor * v;
                        }
                        *orhs -= &factor * &prhs;
                        other.retain(|_, c| !c.is_zero());
                    }
                }
                pivots.push((col, prow, prhs));
            }
        }
    }
    true
}

fn subsets_by_size<T: Clone + Ord>(universe: &[T]) -> Vec<BTreeSet<T>> {
    let n = universe.len();
    let mut masks: Vec<u32> = (0..1u32 << n).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks
        .into_iter()
        .map(|m| {
            (0..n)
                .filter(|i| m >> i & 1 == 1)
                .map(|i| universe[i].clone())
                .collect()
        })
        .collect()
}

/// Subset-minimal component sets whose influences cannot all hold under the
/// observations of measured variables.
pub fn oracle_conflicts(
    graph: &CausalGraph,
    observations: &Assignment,
) -> Result<Vec<BTreeSet<ComponentId>>, OracleError> {
    let universe: Vec<ComponentId> = graph.components().into_iter().collect();
    if universe.len() > ORACLE_LIMIT {
        return Err(OracleError::TooLarge(universe.len()));
    }
    let known = observations.restricted(|v| graph.is_measured(v));
    let mut found: Vec<BTreeSet<ComponentId>> = Vec::new();
    for subset in subsets_by_size(&universe) {
        if found.iter().any(|f| f.is_subset(&subset)) {
            continue;
        }
        let equations = graph.influences().iter().filter(|i| subset.contains(&i.component));
        if !linear_feasible(equations, &known) {
            found.push(subset);
        }
    }
    found.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(found)
}

/// Subset-minimal hitting sets by exhaustive enumeration.
pub fn oracle_hitting_sets<'a, I>(conflicts: I) -> Result<Vec<Diagnosis>, OracleError>
where
    I: IntoIterator<Item = &'a BTreeSet<ComponentId>>,
{
    let family: Vec<&BTreeSet<ComponentId>> = conflicts.into_iter().collect();
    let universe: Vec<ComponentId> = family
        .iter()
        .flat_map(|c| c.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if universe.len() > ORACLE_LIMIT {
        return Err(OracleError::TooLarge(universe.len()));
    }
    let mut found: Vec<BTreeSet<ComponentId>> = Vec::new();
    for subset in subsets_by_size(&universe) {
        if found.iter().any(|f| f.is_subset(&subset)) {
            continue;
        }
        if family.iter().all(|c| !c.is_disjoint(&subset)) {
            found.push(subset);
        }
    }
    let mut out: Vec<Diagnosis> = found.into_iter().map(|components| Diagnosis { components }).collect();
    out.sort();
    Ok(out)
}
