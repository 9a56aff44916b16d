//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::Rng;

use causaldx::diagnosis::minimize;
use causaldx::pipeline::{conflicts_without_restriction, diagnose, to_json, RunOptions, RunResult};
use causaldx::{
    compare_diagnosis_sets, enumerate_pcs, fixtures, linear_feasible, minimal_hitting_sets, oracle_conflicts,
    oracle_hitting_sets, parse_observations, Assignment, CausalGraph, ComponentId, ConflictSet, VariableId,
};

const INSTANCES: u64 = 200;
const FAMILY_PAIRS: u64 = 100;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn run(graph: &CausalGraph, obs: &str) -> RunResult {
    diagnose(graph, &parse_observations(obs).unwrap(), &RunOptions::default()).unwrap()
}

fn fmt_family<'a>(family: impl IntoIterator<Item = &'a BTreeSet<ComponentId>>) -> String {
    let parts: Vec<String> = family
        .into_iter()
        .map(|s| format!("{{{}}}", s.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",")))
        .collect();
    format!("[{}]", parts.join(" "))
}

fn family(sets: &[&[&str]]) -> Vec<BTreeSet<ComponentId>> {
    sets.iter().map(|s| s.iter().map(|&c| c.into()).collect()).collect()
}

fn diagnosis_family(r: &RunResult) -> Vec<BTreeSet<ComponentId>> {
    r.diagnoses.iter().map(|d| d.components.clone()).collect()
}

fn fork_case(obs: &str, conflicts: &[&[&str]], check: impl Fn(&[BTreeSet<ComponentId>]) -> bool) -> Outcome {
    let g = fixtures::fork();
    let start = Instant::now();
    let r = run(&g, obs);
    let took = start.elapsed();
    let got = r.conflict_sets();
    let diags = diagnosis_family(&r);
    let detail = format!(
        "conflicts {}, diagnoses {}, {:.1?}",
        fmt_family(&got),
        fmt_family(&diags),
        took
    );
    if got != family(conflicts) || !check(&diags) || took >= Duration::from_secs(1) {
        return Err(detail);
    }
    Ok(detail)
}

fn criterion_1() -> Outcome {
    fork_case(
        "obs P = 1\nobs X = 5\nobs Y = 6",
        &[&["c1", "c2"], &["c2", "c3"]],
        |d| d == family(&[&["c2"], &["c1", "c3"]]),
    )
}

fn criterion_2() -> Outcome {
    fork_case(
        "obs P = 1\nobs X = 7\nobs Y = 18",
        &[&["c1", "c2"], &["c1", "c3"]],
        |d| d == family(&[&["c1"], &["c2", "c3"]]),
    )
}

fn criterion_3() -> Outcome {
    fork_case(
        "obs P = 1\nobs X = 7\nobs Y = 6",
        &[&["c1", "c2"], &["c2", "c3"]],
        |d| d.contains(&family(&[&["c1", "c3"]])[0]),
    )
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Structure listings of the star fixture and every random instance.
fn pcs_listing() -> String {
    let mut out = String::new();
    let g = fixtures::star();
    let obs = parse_observations("obs P1 = 1\nobs P2 = 1\nobs X1 = 1\nobs X2 = 4").unwrap();
    for island in causaldx::islands(&g, &obs, &BTreeSet::from([VariableId::from("X2")])).unwrap() {
        out += &to_json(&enumerate_pcs(&g, &island, &obs, 1));
    }
    for seed in 0..INSTANCES {
        let inst = common::generate(seed);
        let report = causaldx::detect_misbehaving(&inst.graph, &inst.observations, &Default::default()).unwrap();
        for island in causaldx::islands(&inst.graph, &inst.observations, &report.misbehaving).unwrap() {
            for m in 1..=3 {
                out += &to_json(&enumerate_pcs(&inst.graph, &island, &inst.observations, m));
            }
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let g = fixtures::star();
    let obs = parse_observations("obs P1 = 1\nobs P2 = 1\nobs X1 = 1\nobs X2 = 4").unwrap();
    let bad = BTreeSet::from([VariableId::from("X2")]);
    let island = causaldx::closure(&g, &obs, &bad, &bad).unwrap();
    let star = enumerate_pcs(&g, &island, &obs, 1).len();

    let mut clusters = 0;
    let mut violations = Vec::new();
    for seed in 0..INSTANCES {
        let inst = common::generate(seed);
        let (graph, obs) = (&inst.graph, &inst.observations);
        let report = causaldx::detect_misbehaving(graph, obs, &Default::default()).unwrap();
        for island in causaldx::islands(graph, obs, &report.misbehaving).unwrap() {
            let known = |v: &VariableId| graph.is_measured(v) && obs.contains(v);
            let unknowns_of = |id| -> BTreeSet<VariableId> {
                graph
                    .influence(id)
                    .unwrap()
                    .variables()
                    .filter(|v| !known(v))
                    .cloned()
                    .collect()
            };
            let open: Vec<BTreeSet<VariableId>> = island
                .subgraph
                .influences
                .iter()
                .map(unknowns_of)
                .filter(|u| !u.is_empty())
                .collect();
            let unknown_count = island.subgraph.variables.iter().filter(|v| !known(v)).count();
            for m in 1..=unknown_count {
                let all = enumerate_pcs(graph, &island, obs, m);
                if all.len() > binomial(open.len(), m + 1) {
                    violations.push(format!(
                        "seed {seed} m={m}: {} > C({}, {})",
                        all.len(),
                        open.len(),
                        m + 1
                    ));
                }
                let mut by_cluster: BTreeMap<&BTreeSet<VariableId>, usize> = BTreeMap::new();
                for p in &all {
                    *by_cluster.entry(&p.unmeasured).or_default() += 1;
                }
                for (cluster, count) in by_cluster {
                    clusters += 1;
                    let n = open.iter().filter(|u| u.is_subset(cluster)).count();
                    if count > binomial(n, m + 1) {
                        violations.push(format!("seed {seed} m={m}: {count} > C({n}, {})", m + 1));
                    }
                }
            }
        }
    }
    let detail = format!(
        "star m=1 yields {star} structures; {clusters} clusters over {INSTANCES} instances, {} bound violations",
        violations.len()
    );
    if star != 6 || !violations.is_empty() {
        return Err(format!("{detail}; {}", violations.join("; ")));
    }
    Ok(detail)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut agree = 0;
    let mut mismatches = Vec::new();
    for seed in 0..INSTANCES {
        let inst = common::generate(seed);
        let r = diagnose(&inst.graph, &inst.observations, &RunOptions::default()).unwrap();
        let oracle = oracle_conflicts(&inst.graph, &inst.observations).unwrap();
        let oracle_diag: Vec<BTreeSet<ComponentId>> = oracle_hitting_sets(&oracle)
            .unwrap()
            .into_iter()
            .map(|d| d.components)
            .collect();
        if r.conflict_sets() == oracle && diagnosis_family(&r) == oracle_diag {
            agree += 1;
        } else {
            mismatches.push(format!(
                "seed {seed}: engine {} oracle {}",
                fmt_family(&r.conflict_sets()),
                fmt_family(&oracle)
            ));
        }
    }
    let took = start.elapsed();
    let detail = format!("{agree}/{INSTANCES} instances agree, {took:.1?}");
    if agree as u64 != INSTANCES || took >= Duration::from_secs(60) {
        return Err(format!("{detail}; {}", mismatches.join("; ")));
    }
    Ok(detail)
}

fn criterion_6() -> Outcome {
    let mut discrepancies = Vec::new();
    let mut with_conflicts = 0;
    for seed in 0..INSTANCES {
        let inst = common::generate(seed);
        let islands = diagnose(&inst.graph, &inst.observations, &RunOptions::default()).unwrap();
        let whole: Vec<BTreeSet<ComponentId>> =
            conflicts_without_restriction(&inst.graph, &inst.observations, &RunOptions::default())
                .unwrap()
                .into_iter()
                .map(|c| c.components)
                .collect();
        if !whole.is_empty() {
            with_conflicts += 1;
        }
        if islands.conflict_sets() != whole {
            discrepancies.push(format!(
                "seed {seed}: islands {} whole {}",
                fmt_family(&islands.conflict_sets()),
                fmt_family(&whole)
            ));
        }
    }
    let detail = format!(
        "{} discrepancies over {INSTANCES} instances ({with_conflicts} with conflicts)",
        discrepancies.len()
    );
    if discrepancies.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", discrepancies.join("; ")))
    }
}

fn criterion_7() -> Outcome {
    let mut rng = common::rng(7);
    let (mut p1, mut p2, mut p3) = (Vec::new(), Vec::new(), Vec::new());
    for pair in 0..FAMILY_PAIRS {
        // conflicts added to a family
        let k = rng.gen_range(1..=4);
        let c1 = common::random_family(&mut rng, 6, k, 3);
        let mut c2 = c1.clone();
        let k = rng.gen_range(1..=2);
        c2.extend(common::random_family(&mut rng, 6, k, 3));
        let r = compare_diagnosis_sets(&minimal_hitting_sets(&c1), &minimal_hitting_sets(&c2));
        if !r.count_grows() || !r.all_witnessed() {
            p1.push(pair);
        }

        // same number of conflicts, each enlarged
        let k = rng.gen_range(1..=4);
        let c1 = common::random_family(&mut rng, 6, k, 3);
        let c2: Vec<BTreeSet<ComponentId>> = c1
            .iter()
            .map(|c| {
                let mut bigger = c.clone();
                bigger.extend(common::random_set(&mut rng, 6, 2));
                bigger
            })
            .collect();
        let r = compare_diagnosis_sets(&minimal_hitting_sets(&c1), &minimal_hitting_sets(&c2));
        if !r.count_grows() {
            p2.push(pair);
        }

        // non-minimal conflicts added
        let k = rng.gen_range(1..=4);
        let c1 = common::random_family(&mut rng, 6, k, 3);
        let mut c2 = c1.clone();
        for _ in 0..rng.gen_range(1..=3) {
            let base = &c1[rng.gen_range(0..c1.len())];
            let mut sup = base.clone();
            sup.extend(common::random_set(&mut rng, 6, 2));
            c2.push(sup);
        }
        let d1 = minimal_hitting_sets(&c1);
        let d2 = minimal_hitting_sets(&c2);
        let each_new_above_old = d2
            .iter()
            .all(|n| d1.iter().any(|o| o.components.is_subset(&n.components)));
        let pruned = minimal_hitting_sets(&minimize(c2.clone()));
        if d1.len() > d2.len() || !each_new_above_old || pruned != d2 {
            p3.push(pair);
        }
    }
    let detail = format!(
        "violations: added conflicts {}/{FAMILY_PAIRS}, enlarged conflicts {}/{FAMILY_PAIRS}, non-minimal conflicts {}/{FAMILY_PAIRS}",
        p1.len(),
        p2.len(),
        p3.len()
    );
    if p1.is_empty() && p2.is_empty() && p3.is_empty() {
        Ok(detail)
    } else {
        Err(format!(
            "{detail} (e.g. {{c1,c2}},{{c3,c4}} plus {{c1,c3}} drops {{c2,c4}}; {{c1,c2}},{{c3,c4}} enlarged to {{c1,c2,c3}},{{c3,c4}} gives 3 < 4)"
        ))
    }
}

fn discipline_violations(conflicts: &[ConflictSet], label: &str, out: &mut Vec<String>) {
    for w in conflicts.windows(2) {
        if (w[0].order, w[0].size) > (w[1].order, w[1].size) {
            out.push(format!("{label}: order"));
        }
    }
    for a in conflicts {
        for b in conflicts {
            if a.components != b.components && a.components.is_subset(&b.components) {
                out.push(format!(
                    "{label}: {} inside {}",
                    fmt_family([&a.components]),
                    fmt_family([&b.components])
                ));
            }
        }
    }
}

fn criterion_8() -> Outcome {
    let mut violations = Vec::new();
    let mut checked = 0;
    let g = fixtures::fork();
    for obs in [
        "obs P = 1\nobs X = 5\nobs Y = 6",
        "obs P = 1\nobs X = 7\nobs Y = 18",
        "obs P = 1\nobs X = 7\nobs Y = 6",
    ] {
        let r = run(&g, obs);
        discipline_violations(&r.conflicts, "fork", &mut violations);
        for island in &r.islands {
            discipline_violations(&island.conflicts, "fork island", &mut violations);
        }
        checked += 1;
    }
    discipline_violations(
        &run(&fixtures::chain(), "obs P = 1\nobs X = 10").conflicts,
        "chain",
        &mut violations,
    );
    discipline_violations(
        &run(&fixtures::star(), "obs P1 = 1\nobs P2 = 1\nobs X1 = 1\nobs X2 = 4").conflicts,
        "star",
        &mut violations,
    );
    checked += 2;
    for seed in 0..INSTANCES {
        let inst = common::generate(seed);
        let r = diagnose(&inst.graph, &inst.observations, &RunOptions::default()).unwrap();
        let label = format!("seed {seed}");
        discipline_violations(&r.conflicts, &label, &mut violations);
        for island in &r.islands {
            discipline_violations(&island.conflicts, &label, &mut violations);
        }
        let whole = conflicts_without_restriction(&inst.graph, &inst.observations, &RunOptions::default()).unwrap();
        discipline_violations(&whole, &label, &mut violations);
        // every reported conflict is genuinely infeasible
        for c in &r.conflicts {
            let eqs = inst
                .graph
                .influences()
                .iter()
                .filter(|i| c.components.contains(&i.component));
            let known: Assignment = inst.observations.restricted(|v| inst.graph.is_measured(v));
            if linear_feasible(eqs, &known) {
                violations.push(format!("{label}: {} is feasible", fmt_family([&c.components])));
            }
        }
        checked += 1;
    }
    let detail = format!("{checked} runs checked, {} violations", violations.len());
    if violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", violations.join("; ")))
    }
}

fn criteria_json() -> String {
    let mut out = String::new();
    let g = fixtures::fork();
    for obs in [
        "obs P = 1\nobs X = 5\nobs Y = 6",
        "obs P = 1\nobs X = 7\nobs Y = 18",
        "obs P = 1\nobs X = 7\nobs Y = 6",
    ] {
        out += &run(&g, obs).to_json();
    }
    out += &pcs_listing();
    for seed in 0..INSTANCES {
        let inst = common::generate(seed);
        out += &diagnose(&inst.graph, &inst.observations, &RunOptions::default())
            .unwrap()
            .to_json();
        let oracle = oracle_conflicts(&inst.graph, &inst.observations).unwrap();
        out += &to_json(&oracle);
        out += &to_json(&oracle_hitting_sets(&oracle).unwrap());
    }
    out
}

fn criterion_9() -> Outcome {
    let a = criteria_json();
    let b = criteria_json();
    let detail = format!("{} bytes of JSON compared across two runs", a.len());
    if a == b {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fork, c2 fault", criterion_1),
        ("fork, c1 fault", criterion_2),
        ("fork, compensating faults", criterion_3),
        ("structure counting", criterion_4),
        ("oracle equivalence", criterion_5),
        ("closure soundness", criterion_6),
        ("diagnosis family relations", criterion_7),
        ("output discipline", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {detail}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
