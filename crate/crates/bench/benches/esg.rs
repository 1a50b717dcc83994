use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use esg_core::baselines::oracle_top_k;
use esg_core::model::{ApplicationDag, ConfigGrid, FunctionSpec, Pricing, ProfileModel, ProfileTable};
use esg_core::scenario::Scenario;
use esg_core::search::{esg_1q, GroupSpace, SearchBudget};
use esg_core::slo_dist::{build_dominator_tree, distribute_slo, reduce_and_group, AnlLabel};

fn space(grid: &ConfigGrid) -> (GroupSpace, SearchBudget) {
    let specs = [
        FunctionSpec::new("a", 320.0, 0.0, 0.0),
        FunctionSpec::new("b", 85.0, 0.0, 0.0),
        FunctionSpec::new("c", 610.0, 0.0, 0.0),
    ];
    let profiles = ProfileTable::synthesize(&specs, grid, &ProfileModel::default()).unwrap();
    let space = GroupSpace::from_profiles(&["a", "b", "c"], &profiles, &Pricing::default(), |_, _| true).unwrap();
    let fastest: f64 = space.stages().iter().map(|s| s.fastest().time_ms).sum();
    (space, SearchBudget::absolute(fastest * 1.6))
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("search");
    for (label, grid) in [("3x32", ConfigGrid::ranges(1..=2, 1..=4, 1..=4)), ("3x256", ConfigGrid::ranges(1..=8, 1..=8, 1..=4))] {
        let (space, budget) = space(&grid);
        for k in [1, 5, 20] {
            g.bench_with_input(BenchmarkId::new(format!("esg_1q/{label}"), k), &k, |b, &k| {
                b.iter(|| esg_1q(black_box(&space), &budget, k))
            });
        }
    }
    let (space, budget) = space(&ConfigGrid::ranges(1..=2, 1..=4, 1..=4));
    g.bench_function("oracle/3x32", |b| b.iter(|| oracle_top_k(black_box(&space), &budget, 5).unwrap()));
    g.finish();
}

fn slo_distribution(c: &mut Criterion) {
    let names: Vec<String> = (0..12).map(|i| format!("f{i}")).collect();
    let mut edges = vec![];
    for i in 0..11 {
        edges.push((names[i].clone(), names[i + 1].clone()));
        if i % 3 == 0 && i + 2 < 12 {
            edges.push((names[i].clone(), names[i + 2].clone()));
        }
    }
    let dag = ApplicationDag::new("bench", names.clone(), edges, 1000.0).unwrap();
    let labels = AnlLabel::from_values(names.iter().map(|n| (n.clone(), 1.0 / 12.0)));
    c.bench_function("slo_dist/12_nodes", |b| {
        b.iter(|| {
            let tree = build_dominator_tree(black_box(&dag));
            distribute_slo(reduce_and_group(&tree, &labels, 3), 1000.0).unwrap()
        })
    });
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    for name in ["strict-light", "relaxed-heavy"] {
        let mut s = Scenario::preset(name).unwrap();
        s.workload.warmup_ms = 0.0;
        s.workload.horizon_ms = 10_000.0;
        g.bench_function(name, |b| b.iter(|| s.run().unwrap()));
    }
    g.finish();
}

criterion_group!(benches, search, slo_distribution, simulation);
criterion_main!(benches);
