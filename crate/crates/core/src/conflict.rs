//! Systematic conflict generation.
//!
//! Conflicts are generated in two stages. Potential conflict structures
//! (PCS) are identified purely structurally: a set of `m + 1` influences
//! over exactly `m` unknown variables in which single-unknown propagation
//! fixes every unknown and leaves one equation over; no proper subset may
//! already contain such a redundancy. Each structure is then verified by
//! solving it and comparing two derivations of its head variable.
//!
//! Zero-order structures (single influences whose variables are all
//! observed) are checked first; higher orders follow with `m = 1, 2, ...`
//! and, within one order, by increasing component count `j`.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::equation::{check_satisfied, propagate, Assignment, EquationError, Residual, Solution, Solver, Step};
use crate::model::{CausalGraph, ComponentId, Influence, InfluenceId, VariableId};
use crate::restriction::Closure;
use crate::value::{serialize_value, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PotentialConflictStructure {
    pub head: VariableId,
    pub influences: BTreeSet<InfluenceId>,
    /// The unknown variables of the structure; its order is their count.
    pub unmeasured: BTreeSet<VariableId>,
    pub components: BTreeSet<ComponentId>,
    pub route_a: Vec<Step>,
    /// Empty when the head is observed: the observation is the second route.
    pub route_b: Vec<Step>,
}

impl PotentialConflictStructure {
    pub fn order(&self) -> usize {
        self.unmeasured.len()
    }

    pub fn size(&self) -> usize {
        self.components.len()
    }

    fn sort_key(&self) -> (usize, &BTreeSet<ComponentId>, &BTreeSet<InfluenceId>) {
        (self.size(), &self.components, &self.influences)
    }
}

/// A set of components that cannot all be working, with the residual that
/// shows it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictSet {
    pub components: BTreeSet<ComponentId>,
    pub influences: BTreeSet<InfluenceId>,
    pub head: VariableId,
    pub residual: Residual,
    pub order: usize,
    pub size: usize,
}

impl ConflictSet {
    fn sort_key(&self) -> (usize, usize, &BTreeSet<ComponentId>) {
        (self.order, self.size, &self.components)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SearchStrategy {
    pub max_order: Option<usize>,
    pub max_size: Option<usize>,
    pub max_count: Option<usize>,
    #[serde(serialize_with = "serialize_value")]
    pub tolerance: Value,
}

impl SearchStrategy {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn with_tolerance(tolerance: Value) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    /// Distinct structures identified, zero-order ones included.
    pub pcs_identified: usize,
    /// Structures solved numerically.
    pub pcs_verified: usize,
    /// Structures skipped because a subset conflict was already confirmed.
    pub pcs_pruned: usize,
    /// Structures found again under a different head candidate.
    pub pcs_repeated: usize,
    pub cache_hits: usize,
    pub highest_order: usize,
    pub order_bound_hit: bool,
    pub size_bound_hit: bool,
    pub count_bound_hit: bool,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.pcs_identified += other.pcs_identified;
        self.pcs_verified += other.pcs_verified;
        self.pcs_pruned += other.pcs_pruned;
        self.pcs_repeated += other.pcs_repeated;
        self.cache_hits += other.cache_hits;
        self.highest_order = self.highest_order.max(other.highest_order);
        self.order_bound_hit |= other.order_bound_hit;
        self.size_bound_hit |= other.size_bound_hit;
        self.count_bound_hit |= other.count_bound_hit;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchOutcome {
    pub conflicts: Vec<ConflictSet>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("malformed structure: {0}")]
    Malformed(#[from] EquationError),
    #[error("unknown influence `{0}`")]
    UnknownInfluence(InfluenceId),
}

/// The closure's equations seen from the observations.
struct Space<'g> {
    equations: Vec<&'g Influence>,
    known: Assignment,
    unknowns: BTreeSet<VariableId>,
    misbehaving: BTreeSet<VariableId>,
    /// Unknown variables of each equation.
    eq_unknowns: Vec<BTreeSet<VariableId>>,
}

impl<'g> Space<'g> {
    fn new(graph: &'g CausalGraph, closure: &Closure, observations: &Assignment) -> Self {
        let mut equations: Vec<&Influence> = closure
            .subgraph
            .influences
            .iter()
            .filter_map(|id| graph.influence(id))
            .collect();
        equations.sort_by(|a, b| a.id.cmp(&b.id));
        let is_known = |v: &VariableId| graph.is_measured(v) && observations.contains(v);
        let known = observations.restricted(|v| closure.subgraph.variables.contains(v) && is_known(v));
        let unknowns: BTreeSet<VariableId> = closure
            .subgraph
            .variables
            .iter()
            .filter(|v| !known.contains(v))
            .cloned()
            .collect();
        let eq_unknowns = equations
            .iter()
            .map(|e| e.variables().filter(|v| unknowns.contains(*v)).cloned().collect())
            .collect();
        let misbehaving = closure
            .misbehaving
            .iter()
            .filter(|v| known.contains(v))
            .cloned()
            .collect();
        Self {
            equations,
            known,
            unknowns,
            misbehaving,
            eq_unknowns,
        }
    }

    /// Misbehaving observed variables first, then unknown ones.
    fn head_candidates(&self) -> Vec<VariableId> {
        self.misbehaving.iter().chain(self.unknowns.iter()).cloned().collect()
    }

    fn equations_of(&self, idx: &[usize]) -> Vec<&'g Influence> {
        idx.iter().map(|&i| self.equations[i]).collect()
    }

    fn unknowns_of(&self, idx: &[usize]) -> BTreeSet<VariableId> {
        idx.iter().flat_map(|&i| self.eq_unknowns[i].iter().cloned()).collect()
    }

    /// Connected sets of `m` unknowns anchored at `head`: containing it when
    /// it is unknown, otherwise containing an unknown that shares an
    /// equation with it.
    fn unknown_sets(&self, head: &VariableId, m: usize) -> BTreeSet<BTreeSet<VariableId>> {
        let seeds: BTreeSet<VariableId> = if self.unknowns.contains(head) {
            BTreeSet::from([head.clone()])
        } else {
            self.equations
                .iter()
                .zip(&self.eq_unknowns)
                .filter(|(e, _)| e.mentions(head))
                .flat_map(|(_, u)| u.iter().cloned())
                .collect()
        };
        let mut frontier: BTreeSet<BTreeSet<VariableId>> = seeds.into_iter().map(|s| BTreeSet::from([s])).collect();
        for _ in 1..m {
            let mut next = BTreeSet::new();
            for set in &frontier {
                for u in self.eq_unknowns.iter().filter(|u| !u.is_disjoint(set)) {
                    for w in u.difference(set) {
                        let mut bigger = set.clone();
                        bigger.insert(w.clone());
                        next.insert(bigger);
                    }
                }
            }
            frontier = next;
        }
        frontier.retain(|s| s.len() == m);
        frontier
    }
}

/// Structural single-unknown propagation; no values are computed.
struct Structure {
    /// (equation position, variable it fixed), in execution order.
    solved: Vec<(usize, VariableId)>,
    checks: usize,
}

fn propagate_structure(space: &Space, eqs: &[usize], unknowns: &BTreeSet<VariableId>) -> Structure {
    let mut open: Vec<BTreeSet<VariableId>> = eqs
        .iter()
        .map(|&i| {
            space.equations[i]
                .variables()
                .filter(|v| unknowns.contains(*v))
                .cloned()
                .collect()
        })
        .collect();
    let mut used = vec![false; eqs.len()];
    let mut solved = Vec::new();
    while let Some(k) = (0..eqs.len()).find(|&k| !used[k] && open[k].len() == 1) {
        let var = open[k].pop_first().expect("exactly one open variable");
        used[k] = true;
        for o in &mut open {
            o.remove(&var);
        }
        solved.push((k, var));
    }
    let checks = (0..eqs.len()).filter(|&k| !used[k] && open[k].is_empty()).count();
    Structure { solved, checks }
}

/// `eqs` fixes all of `unknowns` with exactly one equation to spare, and no
/// proper subset holds a redundancy of its own.
fn is_minimal_redundant(space: &Space, eqs: &[usize], unknowns: &BTreeSet<VariableId>) -> bool {
    let s = propagate_structure(space, eqs, unknowns);
    if s.solved.len() != unknowns.len() || s.checks != 1 {
        return false;
    }
    (0..eqs.len()).all(|drop| {
        let rest: Vec<usize> = eqs
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != drop)
            .map(|(_, &i)| i)
            .collect();
        let rest_unknowns = space.unknowns_of(&rest);
        propagate_structure(space, &rest, &rest_unknowns).checks == 0
    })
}

/// Two derivations of `head` with distinct final influences, as step plans.
fn head_routes(
    space: &Space,
    eqs: &[usize],
    unknowns: &BTreeSet<VariableId>,
    head: &VariableId,
) -> Option<(Vec<Step>, Vec<Step>)> {
    let equations = space.equations_of(eqs);
    let mut with_head = unknowns.clone();
    with_head.insert(head.clone());
    // Propagation below only needs values to exist; structure was already
    // checked, so the observations stand in for every known variable.
    let a = propagate(&equations, &space.known, &with_head).ok()?;
    let route_a = a.plan_for(head, &equations);
    let closing = route_a.last().filter(|s| &s.solved == head)?.influence.clone();
    let route_b = if space.known.contains(head) {
        Vec::new()
    } else {
        let rest: Vec<&Influence> = equations.iter().copied().filter(|e| e.id != closing).collect();
        let b = propagate(&rest, &space.known, unknowns).ok()?;
        let plan = b.plan_for(head, &rest);
        plan.last().filter(|s| &s.solved == head)?;
        plan
    };
    Some((route_a, route_b))
}

fn build_pcs(
    space: &Space,
    eqs: &[usize],
    unknowns: BTreeSet<VariableId>,
    head: VariableId,
    routes: (Vec<Step>, Vec<Step>),
) -> PotentialConflictStructure {
    let equations = space.equations_of(eqs);
    PotentialConflictStructure {
        head,
        influences: equations.iter().map(|e| e.id.clone()).collect(),
        components: equations.iter().map(|e| e.component.clone()).collect(),
        unmeasured: unknowns,
        route_a: routes.0,
        route_b: routes.1,
    }
}

fn enumerate_in(space: &Space, m: usize, repeated: &mut usize) -> Vec<PotentialConflictStructure> {
    let mut found: BTreeMap<Vec<usize>, PotentialConflictStructure> = BTreeMap::new();
    let mut rejected: BTreeSet<Vec<usize>> = BTreeSet::new();
    for head in space.head_candidates() {
        for unknowns in space.unknown_sets(&head, m) {
            let pool: Vec<usize> = (0..space.equations.len())
                .filter(|&i| !space.eq_unknowns[i].is_empty() && space.eq_unknowns[i].is_subset(&unknowns))
                .collect();
            for eqs in pool.into_iter().combinations(m + 1) {
                if !eqs.iter().any(|&i| space.equations[i].mentions(&head)) {
                    continue;
                }
                if found.contains_key(&eqs) {
                    *repeated += 1;
                    continue;
                }
                if rejected.contains(&eqs) || space.unknowns_of(&eqs) != unknowns {
                    continue;
                }
                if !is_minimal_redundant(space, &eqs, &unknowns) {
                    rejected.insert(eqs);
                    continue;
                }
                // a valid structure whose head this candidate cannot be is
                // left for a later candidate
                if let Some(routes) = head_routes(space, &eqs, &unknowns, &head) {
                    let pcs = build_pcs(space, &eqs, unknowns.clone(), head.clone(), routes);
                    found.insert(eqs, pcs);
                }
            }
        }
    }
    let mut out: Vec<_> = found.into_values().collect();
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out
}

/// Every distinct PCS of order `m >= 1` inside the closure, by increasing
/// size and then component ids.
pub fn enumerate_pcs(
    graph: &CausalGraph,
    closure: &Closure,
    observations: &Assignment,
    m: usize,
) -> Vec<PotentialConflictStructure> {
    if m == 0 {
        return Vec::new();
    }
    let space = Space::new(graph, closure, observations);
    enumerate_in(&space, m, &mut 0)
}

/// Violated equations whose variables are all observed; each is a singleton
/// conflict.
pub fn zero_order_conflicts(
    graph: &CausalGraph,
    closure: &Closure,
    observations: &Assignment,
    tolerance: &Value,
) -> Vec<ConflictSet> {
    let space = Space::new(graph, closure, observations);
    zero_order_in(&space, tolerance)
}

fn zero_order_in(space: &Space, tolerance: &Value) -> Vec<ConflictSet> {
    let mut out: Vec<ConflictSet> = space
        .equations
        .iter()
        .zip(&space.eq_unknowns)
        .filter(|(_, u)| u.is_empty())
        .filter_map(|(inf, _)| {
            let (ok, _) = check_satisfied(inf, &space.known, tolerance).ok()?;
            if ok {
                return None;
            }
            let predicted = crate::equation::eval_forward(inf, &space.known).ok()?;
            let observed = space.known.get(&inf.output)?.clone();
            Some(ConflictSet {
                components: BTreeSet::from([inf.component.clone()]),
                influences: BTreeSet::from([inf.id.clone()]),
                head: inf.output.clone(),
                residual: Residual::new(inf.output.clone(), predicted, observed),
                order: 0,
                size: 1,
            })
        })
        .collect();
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out
}

/// Solves the structure against the observations; a conflict when the two
/// derivations of the head disagree beyond `tolerance`.
pub fn verify_pcs(
    graph: &CausalGraph,
    pcs: &PotentialConflictStructure,
    observations: &Assignment,
    tolerance: &Value,
) -> Result<Option<ConflictSet>, SearchError> {
    verify_with(&mut Solver::default(), graph, pcs, observations, tolerance)
}

fn verify_with(
    solver: &mut Solver,
    graph: &CausalGraph,
    pcs: &PotentialConflictStructure,
    observations: &Assignment,
    tolerance: &Value,
) -> Result<Option<ConflictSet>, SearchError> {
    let equations = pcs
        .influences
        .iter()
        .map(|id| {
            graph
                .influence(id)
                .ok_or_else(|| SearchError::UnknownInfluence(id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let known = observations.restricted(|v| !pcs.unmeasured.contains(v) && graph.is_measured(v));
    match solver.solve(&equations, &known, &pcs.unmeasured, &pcs.head, tolerance)? {
        Solution::Consistent(_) => Ok(None),
        Solution::Inconsistent(residual) => Ok(Some(ConflictSet {
            components: pcs.components.clone(),
            influences: pcs.influences.clone(),
            head: pcs.head.clone(),
            residual,
            order: pcs.order(),
            size: pcs.size(),
        })),
    }
}

/// The minimal conflicts of one closure, ordered by order, size and then
/// component ids.
pub fn find_minimal_conflicts(
    graph: &CausalGraph,
    closure: &Closure,
    observations: &Assignment,
    strategy: &SearchStrategy,
) -> Result<SearchOutcome, SearchError> {
    let space = Space::new(graph, closure, observations);
    let mut stats = SearchStats::default();
    let mut solver = Solver::default();
    let mut confirmed: Vec<ConflictSet> = Vec::new();
    let full = |confirmed: &Vec<ConflictSet>| strategy.max_count.is_some_and(|n| confirmed.len() >= n);
    let subsumed = |confirmed: &Vec<ConflictSet>, comps: &BTreeSet<ComponentId>| {
        confirmed.iter().any(|c| c.components.is_subset(comps))
    };

    let zero = zero_order_in(&space, &strategy.tolerance);
    stats.pcs_identified += space.eq_unknowns.iter().filter(|u| u.is_empty()).count();
    for c in zero {
        if full(&confirmed) {
            stats.count_bound_hit = true;
            break;
        }
        if strategy.max_size.is_some_and(|j| c.size > j) {
            stats.size_bound_hit = true;
            continue;
        }
        if subsumed(&confirmed, &c.components) {
            stats.pcs_pruned += 1;
            continue;
        }
        confirmed.push(c);
    }

    let top = space.unknowns.len();
    let last = match strategy.max_order {
        Some(k) if k < top => {
            stats.order_bound_hit = true;
            k
        }
        _ => top,
    };
    'orders: for m in 1..=last {
        if full(&confirmed) {
            stats.count_bound_hit = true;
            break;
        }
        let structures = enumerate_in(&space, m, &mut stats.pcs_repeated);
        stats.pcs_identified += structures.len();
        if !structures.is_empty() {
            stats.highest_order = m;
        }
        for pcs in structures {
            if strategy.max_size.is_some_and(|j| pcs.size() > j) {
                stats.size_bound_hit = true;
                continue;
            }
            if subsumed(&confirmed, &pcs.components) {
                stats.pcs_pruned += 1;
                continue;
            }
            stats.pcs_verified += 1;
            if let Some(conflict) = verify_with(&mut solver, graph, &pcs, observations, &strategy.tolerance)? {
                confirmed.push(conflict);
                if full(&confirmed) {
                    stats.count_bound_hit = true;
                    break 'orders;
                }
            }
        }
    }
    stats.cache_hits = solver.hits;

    let minimal: Vec<ConflictSet> = confirmed
        .iter()
        .filter(|c| {
            !confirmed
                .iter()
                .any(|d| d.components.len() < c.components.len() && d.components.is_subset(&c.components))
        })
        .cloned()
        .collect();
    let mut conflicts = minimal;
    conflicts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    conflicts.dedup_by(|a, b| a.components == b.components);
    Ok(SearchOutcome { conflicts, stats })
}
