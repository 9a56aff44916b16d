//! Minimal diagnoses as minimal hitting sets of a conflict family.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::model::ComponentId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Diagnosis {
    pub components: BTreeSet<ComponentId>,
}

impl Diagnosis {
    pub fn new(components: impl IntoIterator<Item = ComponentId>) -> Self {
        Self {
            components: components.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn hits(&self, conflict: &BTreeSet<ComponentId>) -> bool {
        !self.components.is_disjoint(conflict)
    }
}

/// Cardinality first, then lexicographic.
impl Ord for Diagnosis {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.len(), &self.components).cmp(&(other.len(), &other.components))
    }
}

impl PartialOrd for Diagnosis {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// Keeps the subset-minimal members of a family.
pub fn minimize<T: Ord + Clone>(family: impl IntoIterator<Item = BTreeSet<T>>) -> Vec<BTreeSet<T>> {
    let mut sets: Vec<BTreeSet<T>> = family.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    sets.sort_by_key(|s| s.len());
    let mut kept: Vec<BTreeSet<T>> = Vec::new();
    for s in sets {
        if !kept.iter().any(|k| k.is_subset(&s)) {
            kept.push(s);
        }
    }
    kept
}

/// The subset-minimal hitting sets of `conflicts`, built incrementally one
/// conflict at a time. An empty family yields the empty diagnosis; a family
/// containing the empty set yields none.
pub fn minimal_hitting_sets<'a, I>(conflicts: I) -> Vec<Diagnosis>
where
    I: IntoIterator<Item = &'a BTreeSet<ComponentId>>,
{
    let mut current: Vec<BTreeSet<ComponentId>> = vec![BTreeSet::new()];
    for conflict in conflicts {
        let mut next = Vec::new();
        for h in &current {
            if !h.is_disjoint(conflict) {
                next.push(h.clone());
                continue;
            }
            for c in conflict {
                let mut grown = h.clone();
                grown.insert(c.clone());
                next.push(grown);
            }
        }
        current = minimize(next);
    }
    let mut out: Vec<Diagnosis> = current.into_iter().map(|components| Diagnosis { components }).collect();
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub diagnosis: Diagnosis,
    /// First member of the second family containing `diagnosis`.
    pub superset: Option<Diagnosis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiagnosisComparison {
    pub first_count: usize,
    pub second_count: usize,
    pub witnesses: Vec<Witness>,
}

impl DiagnosisComparison {
    pub fn count_grows(&self) -> bool {
        self.first_count <= self.second_count
    }

    pub fn all_witnessed(&self) -> bool {
        self.witnesses.iter().all(|w| w.superset.is_some())
    }
}

pub fn compare_diagnosis_sets(first: &[Diagnosis], second: &[Diagnosis]) -> DiagnosisComparison {
    let witnesses = first
        .iter()
        .map(|d| Witness {
            diagnosis: d.clone(),
            superset: second.iter().find(|s| d.components.is_subset(&s.components)).cloned(),
        })
        .collect();
    DiagnosisComparison {
        first_count: first.len(),
        second_count: second.len(),
        witnesses,
    }
}
