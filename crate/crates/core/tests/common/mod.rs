#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use esg_core::model::{ApplicationDag, ConfigGrid, FunctionSpec, Pricing, ProfileModel, ProfileTable};
use esg_core::search::{GroupSpace, SearchBudget};
use esg_core::slo_dist::{AnlLabel, GroupPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random search instance: `n` synthetic functions over `grid` and a budget
/// between the all-fastest time and 2.5 times it.
pub fn instance(seed: u64, grid: &ConfigGrid, n: usize) -> (GroupSpace, SearchBudget) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<FunctionSpec> =
        (0..n).map(|i| FunctionSpec::new(format!("f{i}"), rng.random_range(20.0..1000.0), 0.0, 0.0)).collect();
    let model = ProfileModel {
        kappa_batch: rng.random_range(0.3..0.9),
        kappa_cpu: rng.random_range(0.05..0.3),
        kappa_gpu: rng.random_range(0.1..0.6),
    };
    let profiles = ProfileTable::synthesize(&specs, grid, &model).unwrap();
    let names: Vec<&str> = specs.iter().map(|s| s.id.as_str()).collect();
    let space = GroupSpace::from_profiles(&names, &profiles, &Pricing::default(), |_, _| true).unwrap();
    let fastest: f64 = space.stages().iter().map(|s| s.fastest().time_ms).sum();
    let budget = SearchBudget::absolute(fastest * rng.random_range(1.0001..2.5));
    (space, budget)
}

/// Random single-entry single-exit DAG over `f0..f{n-1}`, transitive edges
/// included.
pub fn random_dag(seed: u64, n: usize) -> ApplicationDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("f{i}");
    let mut edges = BTreeSet::new();
    for v in 1..n {
        edges.insert((rng.random_range(0..v), v));
        for u in 0..v {
            if rng.random_bool(0.2) {
                edges.insert((u, v));
            }
        }
    }
    for u in 0..n.saturating_sub(1) {
        if !edges.iter().any(|&(a, _)| a == u) {
            edges.insert((u, n - 1));
        }
    }
    ApplicationDag::new(
        "rand",
        (0..n).map(name).collect(),
        edges.into_iter().map(|(a, b)| (name(a), name(b))).collect(),
        1000.0,
    )
    .unwrap()
}

/// Random series-parallel DAG with exactly `n` nodes and no transitive edges.
pub fn random_sp_dag(seed: u64, n: usize) -> ApplicationDag {
    fn build(rng: &mut ChaCha8Rng, budget: usize, next: &mut usize, edges: &mut Vec<(usize, usize)>) -> (usize, usize) {
        if budget == 1 {
            *next += 1;
            return (*next - 1, *next - 1);
        }
        if budget >= 4 && rng.random_bool(0.5) {
            let head = *next;
            *next += 1;
            let rest = budget - 2;
            let k = rng.random_range(2..=rest.min(3));
            let mut sizes = vec![1; k];
            for _ in 0..rest - k {
                sizes[rng.random_range(0..k)] += 1;
            }
            let ends: Vec<(usize, usize)> = sizes.iter().map(|&s| build(rng, s, next, edges)).collect();
            let join = *next;
            *next += 1;
            for (a, b) in ends {
                edges.push((head, a));
                edges.push((b, join));
            }
            return (head, join);
        }
        let left = rng.random_range(1..budget);
        let (a, b) = build(rng, left, next, edges);
        let (c, d) = build(rng, budget - left, next, edges);
        edges.push((b, c));
        (a, d)
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut next = 0;
    build(&mut rng, n, &mut next, &mut edges);
    let name = |i: usize| format!("f{i}");
    ApplicationDag::new(
        "sp",
        (0..n).map(name).collect(),
        edges.into_iter().map(|(a, b)| (name(a), name(b))).collect(),
        1000.0,
    )
    .unwrap()
}

pub fn all_paths(dag: &ApplicationDag, from: usize, to: usize) -> Vec<Vec<usize>> {
    if from == to {
        return vec![vec![to]];
    }
    let mut out = Vec::new();
    for &s in dag.successors(from) {
        for mut p in all_paths(dag, s, to) {
            p.insert(0, from);
            out.push(p);
        }
    }
    out
}

/// Immediate dominators from the definition: the strict dominators of `v` are
/// the nodes on every entry-to-`v` path; the immediate one is the strict
/// dominator that every other strict dominator dominates.
pub fn oracle_idoms(dag: &ApplicationDag) -> BTreeMap<String, String> {
    let doms: Vec<BTreeSet<usize>> = (0..dag.len())
        .map(|v| {
            let paths = all_paths(dag, dag.entry(), v);
            let mut common: BTreeSet<usize> = paths[0].iter().copied().collect();
            for p in &paths[1..] {
                let s: BTreeSet<usize> = p.iter().copied().collect();
                common = common.intersection(&s).copied().collect();
            }
            common
        })
        .collect();
    let mut out = BTreeMap::new();
    for v in 0..dag.len() {
        let strict: Vec<usize> = doms[v].iter().copied().filter(|&d| d != v).collect();
        if let Some(&idom) = strict.iter().max_by_key(|&&d| doms[d].len()) {
            out.insert(dag.name(v).to_string(), dag.name(idom).to_string());
        }
    }
    out
}

pub fn random_labels(dag: &ApplicationDag, seed: u64) -> AnlLabel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let raw: Vec<f64> = (0..dag.len()).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    AnlLabel::from_values(dag.nodes().iter().zip(&raw).map(|(n, r)| (n.clone(), r / total)))
}

pub fn path_quota(plan: &GroupPlan, dag: &ApplicationDag, path: &[usize]) -> f64 {
    plan.groups()
        .iter()
        .filter(|g| path.iter().any(|&i| g.functions.iter().any(|f| f == dag.name(i))))
        .map(|g| g.quota_ms.unwrap())
        .sum()
}

