#![allow(dead_code)]

use std::collections::BTreeSet;

use causaldx::model::{AffineEquation, Variable};
use causaldx::text::ModelDocument;
use causaldx::value::int;
use causaldx::{eval_forward, Assignment, CausalGraph, ComponentId, Influence, InfluenceId, Value, VariableId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random desk-scale model with injected faults and the observations
/// they produce.
pub struct Instance {
    pub seed: u64,
    pub graph: CausalGraph,
    pub observations: Assignment,
    pub faulty: BTreeSet<ComponentId>,
    /// Components whose nominal equation the faulty world violates. Besides
    /// the faulty ones this can include a healthy second definition of a
    /// variable whose first definition is faulty.
    pub broken: BTreeSet<ComponentId>,
}

impl Instance {
    pub fn text(&self) -> String {
        ModelDocument::from_graph(&self.graph).to_string()
    }
}

fn nonzero(rng: &mut ChaCha8Rng) -> Value {
    let v = *[-3, -2, -1, 1, 2, 3].choose(rng).unwrap();
    int(v)
}

/// Up to 10 variables and 8 influences, one component per influence.
///
/// Inputs are measured and observed. At most three variables are hidden
/// (unmeasured, or measured but left unobserved); each hidden variable has
/// a single defining influence and no influence reads more than one of
/// them. Observed measured variables may carry a second, redundant
/// definition whose constant is tuned to agree with the first under
/// nominal behaviour. One or two influences receive a nonzero offset; the
/// faulty model is simulated through the first definition of each
/// variable.
pub fn generate(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = rng.gen_range(1..=3);
    let inner = rng.gen_range(2..=7usize);
    let n = sources + inner;
    let ids: Vec<VariableId> = (0..n).map(|i| VariableId::new(format!("v{i}"))).collect();
    let mut hidden = vec![false; n];
    let mut unmeasured = vec![false; n];
    let mut nominal = Assignment::new();
    let mut influences: Vec<Influence> = Vec::new();

    for id in ids.iter().take(sources) {
        nominal.insert(id.clone(), int(rng.gen_range(1..=5)));
    }

    let pick_inputs = |rng: &mut ChaCha8Rng, i: usize, hidden: &[bool]| -> Vec<usize> {
        let k = rng.gen_range(1..=2.min(i));
        let mut pool: Vec<usize> = (0..i).collect();
        pool.shuffle(rng);
        let mut chosen = Vec::new();
        let mut hidden_used = false;
        for p in pool {
            if chosen.len() == k {
                break;
            }
            if hidden[p] {
                if hidden_used {
                    continue;
                }
                hidden_used = true;
            }
            chosen.push(p);
        }
        chosen.sort();
        chosen
    };

    let hidden_budget = rng.gen_range(0..=3usize);
    let mut hidden_count = 0;
    for i in sources..n {
        if hidden_count < hidden_budget && rng.gen_bool(0.45) {
            hidden[i] = true;
            unmeasured[i] = rng.gen_bool(0.7);
            hidden_count += 1;
        }
        let inputs = pick_inputs(&mut rng, i, &hidden);
        let terms: Vec<(VariableId, Value)> = inputs.iter().map(|&p| (ids[p].clone(), nonzero(&mut rng))).collect();
        let constant = int(rng.gen_range(-3..=3));
        let inf = Influence::new(
            format!("f{}", influences.len()),
            format!("f{}", influences.len()),
            ids[i].as_str(),
            AffineEquation::new(terms, constant),
        );
        let value = eval_forward(&inf, &nominal).expect("inputs precede outputs");
        nominal.insert(ids[i].clone(), value);
        influences.push(inf);
    }

    // redundant definitions
    let mut candidates: Vec<usize> = (sources..n).filter(|&i| !hidden[i]).collect();
    candidates.shuffle(&mut rng);
    for i in candidates {
        if influences.len() >= 8 {
            break;
        }
        if !rng.gen_bool(0.4) {
            continue;
        }
        let inputs = pick_inputs(&mut rng, i, &hidden);
        let terms: Vec<(VariableId, Value)> = inputs.iter().map(|&p| (ids[p].clone(), nonzero(&mut rng))).collect();
        let probe = Influence::new(
            "probe",
            "probe",
            ids[i].as_str(),
            AffineEquation::new(terms.clone(), int(0)),
        );
        let constant = nominal.get(&ids[i]).unwrap() - eval_forward(&probe, &nominal).unwrap();
        influences.push(Influence::new(
            format!("f{}", influences.len()),
            format!("f{}", influences.len()),
            ids[i].as_str(),
            AffineEquation::new(terms, constant),
        ));
    }

    // faults
    let k = rng.gen_range(1..=2usize.min(influences.len()));
    let mut order: Vec<usize> = (0..influences.len()).collect();
    order.shuffle(&mut rng);
    let faults: Vec<(usize, Value)> = order.into_iter().take(k).map(|f| (f, nonzero(&mut rng))).collect();
    let faulty: BTreeSet<ComponentId> = faults.iter().map(|(f, _)| influences[*f].component.clone()).collect();

    let mut actual = Assignment::new();
    for id in ids.iter().take(sources) {
        actual.insert(id.clone(), nominal.get(id).unwrap().clone());
    }
    for id in ids.iter().skip(sources) {
        let (pos, first) = influences
            .iter()
            .enumerate()
            .filter(|(_, f)| &f.output == id)
            .min_by(|a, b| a.1.id.cmp(&b.1.id))
            .expect("every inner variable is defined");
        let mut v = eval_forward(first, &actual).unwrap();
        if let Some((_, off)) = faults.iter().find(|(f, _)| *f == pos) {
            v += off;
        }
        actual.insert(id.clone(), v);
    }

    let variables: Vec<Variable> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            if unmeasured[i] {
                Variable::unmeasured(id.as_str())
            } else {
                Variable::measured(id.as_str())
            }
        })
        .collect();
    let observations = actual.restricted(|v| {
        let i = ids.iter().position(|x| x == v).unwrap();
        !hidden[i]
    });
    let broken = influences
        .iter()
        .filter(|f| eval_forward(f, &actual).unwrap() != *actual.get(&f.output).unwrap())
        .map(|f| f.component.clone())
        .collect();
    Instance {
        seed,
        broken,
        graph: CausalGraph::new(variables, influences),
        observations,
        faulty,
    }
}

pub fn influence_ids(graph: &CausalGraph) -> BTreeSet<InfluenceId> {
    graph.influences().iter().map(|i| i.id.clone()).collect()
}

/// A random family of nonempty component sets over `c0..c{universe}`.
pub fn random_family(
    rng: &mut ChaCha8Rng,
    universe: usize,
    count: usize,
    max_len: usize,
) -> Vec<BTreeSet<ComponentId>> {
    (0..count).map(|_| random_set(rng, universe, max_len)).collect()
}

pub fn random_set(rng: &mut ChaCha8Rng, universe: usize, max_len: usize) -> BTreeSet<ComponentId> {
    let len = rng.gen_range(1..=max_len);
    let mut all: Vec<usize> = (0..universe).collect();
    all.shuffle(rng);
    all.into_iter()
        .take(len)
        .map(|i| ComponentId::new(format!("c{i}")))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sets(family: &[BTreeSet<ComponentId>]) -> Vec<Vec<String>> {
    family
        .iter()
        .map(|s| s.iter().map(|c| c.to_string()).collect())
        .collect()
}
