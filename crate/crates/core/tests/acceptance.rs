//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::time::Instant;

use common::{all_paths, instance, oracle_idoms, path_quota, random_dag, random_labels, random_sp_dag};
use esg_core::baselines::oracle_top_k;
use esg_core::dispatch::SchedulerKind;
use esg_core::model::ConfigGrid;
use esg_core::scenario::{AppSpec, RunOutput, Scenario};
use esg_core::slo_dist::{build_dominator_tree, distribute_slo, reduce_and_group};
use esg_core::workload::{Arrival, Regime, SloMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 5;
const FULL: usize = 256;
const EXPLORED_LIMIT: f64 = 0.01;
const MIN_SPEEDUP: f64 = 50.0;
const QUOTA_TOL: f64 = 1e-9;
const COST_SLACK: f64 = 1.2;
// Float noise allowed when comparing costs of otherwise identical schedules.
const COST_EPS: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(s: &Scenario) -> RunOutput {
    s.run().unwrap_or_else(|e| panic!("{}: {e}", s.name))
}

fn preset(name: &str, kind: SchedulerKind, seed: u64) -> Scenario {
    let mut s = Scenario::preset(name).unwrap();
    s.scheduler.name = kind;
    s.seed = seed;
    s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn oracle_equivalence() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut mismatches, mut full) = (Vec::new(), 0);
    let (mut kept_max, mut speedups) = (0u64, Vec::new());
    for seed in 0..1000u64 {
        let grid = if seed % 4 == 0 {
            ConfigGrid::ranges(1..=8, 1..=8, 1..=4)
        } else {
            let b = rng.random_range(1..=8);
            let c = rng.random_range(1..=8);
            let g = rng.random_range(1..=4);
            ConfigGrid::ranges(1..=b, 1..=c, 1..=g)
        };
        let (space, budget) = instance(seed, &grid, 3);
        let t0 = Instant::now();
        let oracle = oracle_top_k(&space, &budget, K).unwrap();
        let oracle_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let out = esg_core::search::esg_1q(&space, &budget, K);
        let esg_s = t1.elapsed().as_secs_f64();
        if out.queue.costs() != oracle.costs() {
            mismatches.push(seed);
        }
        if space.stages().iter().all(|s| s.candidates().len() == FULL) {
            full += 1;
            kept_max = kept_max.max(out.stats.kept);
            speedups.push(oracle_s / esg_s.max(1e-9));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let c1 = outcome(
        mismatches.is_empty() && secs < 300.0,
        format!("1000 instances ({full} at 3x256), mismatches {mismatches:?}, {secs:.1} s"),
    );
    let limit = EXPLORED_LIMIT * (FULL as f64).powi(3);
    let speedup = median(speedups);
    let c2 = outcome(
        full > 0 && (kept_max as f64) <= limit && speedup >= MIN_SPEEDUP,
        format!("max explored {kept_max} (limit {limit:.0}), median speedup {speedup:.0}x (min {MIN_SPEEDUP}x)"),
    );
    (c1, c2)
}

fn quota_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut dom_bad, mut worst, mut paths) = (Vec::new(), 0.0f64, 0usize);
    for seed in 0..200u64 {
        let n = rng.random_range(1..=12);
        let dag = random_dag(seed, n);
        let got: std::collections::BTreeMap<String, String> =
            build_dominator_tree(&dag).parents().into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        if got != oracle_idoms(&dag) {
            dom_bad.push(seed);
        }
        let sp = random_sp_dag(seed, n);
        let g = rng.random_range(1..=4);
        let slo = rng.random_range(10.0..5000.0);
        let plan = distribute_slo(reduce_and_group(&build_dominator_tree(&sp), &random_labels(&sp, seed), g), slo).unwrap();
        for path in all_paths(&sp, sp.entry(), sp.exit()) {
            worst = worst.max((path_quota(&plan, &sp, &path) - slo).abs());
            paths += 1;
        }
    }
    outcome(
        dom_bad.is_empty() && worst <= QUOTA_TOL,
        format!("200 DAGs, dominator mismatches {dom_bad:?}, {paths} paths, max |sum - slo| {worst:.1e} (tol {QUOTA_TOL:.0e})"),
    )
}

fn validity() -> Outcome {
    let mut bad = Vec::new();
    let mut esg_miss = 0.0f64;
    for regime in [Regime::Light, Regime::Normal, Regime::Heavy] {
        for seed in 1..=5 {
            let mut s = preset("moderate-normal", SchedulerKind::Esg, seed);
            s.workload.regime = regime;
            let out = run(&s);
            if !out.violations.is_empty() {
                bad.push(format!("{} seed {seed}: {}", regime.name(), out.violations[0]));
            }
            esg_miss = esg_miss.max(out.summary.overall.config_miss_rate);
        }
    }
    let mut bf = Vec::new();
    for seed in 1..=5 {
        let mut s = preset("moderate-normal", SchedulerKind::BestFirst, seed);
        s.workload.regime = Regime::Heavy;
        let out = run(&s);
        if !out.violations.is_empty() {
            bad.push(format!("best_first seed {seed}: {}", out.violations[0]));
        }
        bf.push(out.summary.overall.config_miss_rate);
    }
    let bf_mean = bf.iter().sum::<f64>() / bf.len() as f64;
    outcome(
        bad.is_empty() && esg_miss == 0.0 && bf_mean > 0.0,
        format!("15 ESG runs, violations {bad:?}, ESG max miss rate {esg_miss}, best_first heavy mean miss rate {bf_mean:.3}"),
    )
}

fn comparative(esg_seed1: &mut Option<String>) -> Outcome {
    let mut rows: Vec<(SchedulerKind, f64, f64)> = Vec::new();
    for kind in [SchedulerKind::Esg, SchedulerKind::BestFirst, SchedulerKind::Enum] {
        let (mut hit, mut cost) = (0.0, 0.0);
        for seed in 1..=5 {
            let out = run(&preset("strict-light", kind, seed));
            if kind == SchedulerKind::Esg && seed == 1 {
                *esg_seed1 = Some(out.trace_hash());
            }
            hit += out.summary.overall.slo_hit_rate / 5.0;
            cost += out.summary.overall.total_cost / 5.0;
        }
        rows.push((kind, hit, cost));
    }
    let cheapest = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let (esg_hit, esg_cost) = (rows[0].1, rows[0].2);
    let pass = rows.iter().all(|r| esg_hit >= r.1) && esg_cost <= COST_SLACK * cheapest;
    let detail = rows.iter().map(|(k, h, c)| format!("{} hit {h:.3} cost {c:.4}", k.name())).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("{detail} (cost limit {COST_SLACK} x {cheapest:.4})"))
}

fn sensitivity() -> Outcome {
    let rows: Vec<(usize, f64, f64)> = [1, 5, 20, 80]
        .into_iter()
        .map(|k| {
            let mut s = preset("strict-light", SchedulerKind::Esg, 42);
            s.scheduler.k = k;
            let o = run(&s).summary.overall;
            (k, o.overhead_mean_ms, o.total_cost)
        })
        .collect();
    let pass = rows.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].2 <= w[0].2 * (1.0 + COST_EPS));
    let detail = rows.iter().map(|(k, o, c)| format!("K={k} overhead {o:.3} ms cost {c:.4}")).collect::<Vec<_>>().join(", ");
    outcome(pass, detail)
}

fn ablation(esg_heavy: &mut Option<(Scenario, String)>) -> Outcome {
    let s = preset("relaxed-heavy", SchedulerKind::Esg, 42);
    let full = run(&s);
    *esg_heavy = Some((s.clone(), full.trace_hash()));
    let mut nb = s.clone();
    nb.ablation.no_batching = true;
    let mut ng = s;
    ng.ablation.no_gpu_sharing = true;
    let (f, b, g) = (full.summary.overall, run(&nb).summary.overall, run(&ng).summary.overall);
    outcome(
        b.total_cost > f.total_cost && g.mean_queue_wait_ms > f.mean_queue_wait_ms,
        format!(
            "cost {:.4} -> {:.4} without batching, mean wait {:.1} -> {:.1} ms without GPU sharing",
            f.total_cost, b.total_cost, f.mean_queue_wait_ms, g.mean_queue_wait_ms
        ),
    )
}

fn periodic(period_ms: f64, prewarm: bool) -> Vec<bool> {
    let mut s = Scenario { name: "periodic".into(), ..Scenario::default() };
    s.apps = vec![AppSpec { id: "deblur".into(), functions: vec!["deblur".into()], edges: None, slo_ms: None }];
    s.workload.slo_mode = SloMode::Relaxed;
    s.workload.warmup_ms = 0.0;
    let arrivals: Vec<Arrival> = (0..8).map(|i| Arrival { time_ms: 1000.0 + i as f64 * period_ms, app: 0 }).collect();
    s.workload.horizon_ms = arrivals.last().unwrap().time_ms + 1.0;
    s.workload.arrivals = Some(arrivals);
    s.sim.prewarm = prewarm;
    let out = run(&s);
    let mut tasks = out.trace.tasks;
    tasks.sort_by(|a, b| a.decision_ms.total_cmp(&b.decision_ms));
    tasks.iter().map(|t| !t.warm).collect()
}

fn prewarming() -> Outcome {
    let count = |v: &[bool]| v.iter().filter(|&&c| c).count();
    let with = periodic(700_000.0, true);
    let without = periodic(700_000.0, false);
    let short = periodic(300_000.0, false);
    let pass = with[..2].iter().all(|&c| c)
        && count(&with[2..]) == 0
        && count(&without) == without.len()
        && short[0]
        && count(&short[1..]) == 0;
    outcome(
        pass,
        format!(
            "cold starts over 8 arrivals: period 700 s prewarm {} / no prewarm {}, period 300 s no prewarm {}",
            count(&with),
            count(&without),
            count(&short)
        ),
    )
}

fn determinism(esg_seed1: Option<String>, esg_heavy: Option<(Scenario, String)>) -> Outcome {
    let mut checked = Vec::new();
    let mut pass = true;
    if let Some(h) = esg_seed1 {
        pass &= run(&preset("strict-light", SchedulerKind::Esg, 1)).trace_hash() == h;
        checked.push("strict-light/1");
    }
    if let Some((s, h)) = esg_heavy {
        pass &= run(&s).trace_hash() == h;
        checked.push("relaxed-heavy/42");
    }
    let mut bf = preset("moderate-normal", SchedulerKind::BestFirst, 7);
    bf.workload.horizon_ms = 20_000.0;
    pass &= run(&bf).trace_hash() == run(&bf).trace_hash();
    checked.push("moderate-normal/7 best_first");
    pass &= checked.len() == 3;
    outcome(pass, format!("identical trace CSV hashes for {checked:?}"))
}

fn main() {
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let (c1, c2) = oracle_equivalence();
    results.push((1, "oracle equivalence", c1));
    results.push((2, "pruning efficiency", c2));
    results.push((3, "quota conservation", quota_conservation()));
    results.push((4, "schedule validity", validity()));
    let mut esg_seed1 = None;
    results.push((5, "comparative direction", comparative(&mut esg_seed1)));
    results.push((6, "sensitivity direction", sensitivity()));
    let mut esg_heavy = None;
    results.push((7, "ablation direction", ablation(&mut esg_heavy)));
    results.push((8, "prewarming", prewarming()));
    results.push((9, "determinism", determinism(esg_seed1, esg_heavy)));
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} {name}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
