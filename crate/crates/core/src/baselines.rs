//! Reference schedulers: an exhaustive top-K oracle, a best-first whole-workflow
//! preplanner and a per-function enumerator with a static SLO split.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::model::{per_job_cost, ApplicationDag, ConfigGrid, Configuration, FunctionProfile, Pricing, ProfileTable};
use crate::search::{ConfigPQ, ConfigPath, GroupSpace, SearchBudget};

pub const ORACLE_MAX_GROUP: usize = 4;
pub const ORACLE_MAX_CONFIGS: usize = 256;

/// z-score of the 95th percentile of a standard normal.
const Z95: f64 = 1.645;

/// Enumerates every full path of the group and keeps the K cheapest whose
/// time is strictly below the budget.
pub fn oracle_top_k(space: &GroupSpace, budget: &SearchBudget, k: usize) -> Result<ConfigPQ> {
    let stages = space.stages();
    let widest = stages.iter().map(|s| s.candidates().len()).max().unwrap_or(0);
    if stages.len() > ORACLE_MAX_GROUP || widest > ORACLE_MAX_CONFIGS {
        return Err(Error::OracleIntractable { group_size: stages.len(), max_configs: widest });
    }
    let mut pq = ConfigPQ::new(k);
    let g_slo = budget.group_slo_ms();
    if !(g_slo > 0.0) {
        return Ok(pq);
    }
    let n = stages.len();
    let mut idx = vec![0usize; n];
    loop {
        let mut time_ms = 0.0;
        let mut cost = 0.0;
        for (d, &i) in idx.iter().enumerate() {
            let c = &stages[d].candidates()[i];
            time_ms += c.time_ms;
            cost += c.cost;
        }
        let full = pq.len() == pq.capacity();
        let admissible = !full || cost <= pq.paths().last().map_or(f64::INFINITY, |p| p.cost);
        if time_ms < g_slo && admissible {
            pq.insert(ConfigPath::from_candidates(idx.iter().enumerate().map(|(d, &i)| &stages[d].candidates()[i])));
        }
        // odometer over the last stage fastest
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(pq);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < stages[d].candidates().len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Number of full paths an exhaustive search enumerates for `space`.
pub fn oracle_path_count(space: &GroupSpace) -> u64 {
    space.stages().iter().map(|s| s.candidates().len() as u64).product()
}

/// Result of the best-first whole-workflow preplanner.
#[derive(Debug, Clone, PartialEq)]
pub struct Preplan {
    /// One configuration per DAG node, in node order.
    pub configs: Vec<Configuration>,
    pub cost: f64,
    pub p95_ms: f64,
    pub goal_reached: bool,
    /// States popped from the frontier, in order.
    pub visited: Vec<Vec<Configuration>>,
    /// Modeled search time, capped at the cutoff.
    pub search_ms: f64,
}

impl Preplan {
    pub fn config_of(&self, dag: &ApplicationDag, function: &str) -> Option<Configuration> {
        dag.index_of(function).map(|i| self.configs[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreplanParams {
    pub cutoff_ms: f64,
    /// Modeled time to evaluate one state.
    pub us_per_state: f64,
    pub noise_sigma: f64,
}

#[derive(PartialEq)]
struct State {
    cost: f64,
    idx: Vec<[u8; 3]>,
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.idx.cmp(&other.idx))
    }
}

/// Best-first search over whole-workflow configuration vectors.
///
/// Starts from the minimum value of every axis at every stage, pops the
/// cheapest state, and expands by incrementing one axis of one stage. The goal
/// is a P95 critical path within `slo_ms`. When the modeled search time
/// reaches the cutoff, the visited state whose P95 latency is closest to the
/// SLO is returned instead.
pub fn best_first_preplan(
    dag: &ApplicationDag,
    slo_ms: f64,
    profiles: &ProfileTable,
    grid: &ConfigGrid,
    pricing: &Pricing,
    params: &PreplanParams,
) -> Result<Preplan> {
    let axes = [&grid.batch, &grid.vcpus, &grid.vgpus];
    if axes.iter().any(|a| a.is_empty() || a.len() > u8::MAX as usize) {
        return Err(Error::EmptyConfigSpace);
    }
    let fn_profiles: Vec<&FunctionProfile> =
        (0..dag.len()).map(|i| profiles.get(dag.name(i))).collect::<Result<_>>()?;
    let p95_factor = 1.0 + Z95 * params.noise_sigma;
    let config_at = |ix: [u8; 3]| Configuration::new(grid.batch[ix[0] as usize], grid.vcpus[ix[1] as usize], grid.vgpus[ix[2] as usize]);
    let eval = |state: &[[u8; 3]]| -> Result<(Vec<Configuration>, Vec<f64>, f64)> {
        let configs: Vec<Configuration> = state.iter().map(|&ix| config_at(ix)).collect();
        let mut times = Vec::with_capacity(configs.len());
        let mut cost = 0.0;
        for (i, &cfg) in configs.iter().enumerate() {
            let t = fn_profiles[i]
                .exec_ms(cfg)
                .ok_or_else(|| Error::MissingProfile { function: dag.name(i).into(), config: Some(cfg) })?;
            cost += per_job_cost(cfg, t, pricing);
            times.push(t);
        }
        Ok((configs, times, cost))
    };

    let start = vec![[0u8; 3]; dag.len()];
    let mut seen: HashSet<Vec<[u8; 3]>> = HashSet::new();
    let mut frontier = BinaryHeap::new();
    let (_, _, start_cost) = eval(&start)?;
    seen.insert(start.clone());
    frontier.push(Reverse(State { cost: start_cost, idx: start }));

    let mut visited = Vec::new();
    let mut best: Option<(f64, f64, Vec<Configuration>, f64)> = None; // (|p95-slo|, cost, configs, p95)
    while let Some(Reverse(state)) = frontier.pop() {
        let (configs, times, cost) = eval(&state.idx)?;
        let p95 = dag.critical_path(|i| times[i] * p95_factor);
        visited.push(configs.clone());
        let search_ms = visited.len() as f64 * params.us_per_state / 1000.0;
        if p95 <= slo_ms {
            return Ok(Preplan { configs, cost, p95_ms: p95, goal_reached: true, visited, search_ms });
        }
        let gap = (p95 - slo_ms).abs();
        if best.as_ref().is_none_or(|b| gap < b.0 || (gap == b.0 && cost < b.1)) {
            best = Some((gap, cost, configs, p95));
        }
        if search_ms >= params.cutoff_ms {
            break;
        }
        for stage in 0..state.idx.len() {
            for axis in 0..3 {
                if (state.idx[stage][axis] as usize) + 1 >= axes[axis].len() {
                    continue;
                }
                let mut next = state.idx.clone();
                next[stage][axis] += 1;
                if seen.insert(next.clone()) {
                    let (_, _, c) = eval(&next)?;
                    frontier.push(Reverse(State { cost: c, idx: next }));
                }
            }
        }
    }
    let search_ms = (visited.len() as f64 * params.us_per_state / 1000.0).min(params.cutoff_ms);
    let (_, cost, configs, p95) = best.expect("start state is always visited");
    Ok(Preplan { configs, cost, p95_ms: p95, goal_reached: false, visited, search_ms })
}

/// Static per-function latency budgets proportional to mean service time.
pub fn per_function_slos(dag: &ApplicationDag, slo_ms: f64, profiles: &ProfileTable) -> Result<BTreeMap<String, f64>> {
    let means: Vec<(String, f64)> = dag
        .nodes()
        .iter()
        .map(|f| Ok((f.clone(), profiles.get(f)?.mean_exec_ms())))
        .collect::<Result<_>>()?;
    let total: f64 = means.iter().map(|(_, m)| m).sum();
    Ok(means.into_iter().map(|(f, m)| (f, slo_ms * m / total)).collect())
}

/// Cheapest configuration of one function whose profiled time fits
/// `per_fn_slo_ms`, restricted to batch sizes up to `max_batch`. Falls back to
/// the fastest allowed configuration when none fits.
pub fn enum_per_function(
    profile: &FunctionProfile,
    per_fn_slo_ms: f64,
    max_batch: u32,
    pricing: &Pricing,
) -> Option<Configuration> {
    let allowed = || profile.entries().iter().filter(|e| e.config.batch <= max_batch);
    let rank = |a: &(f64, f64, Configuration), b: &(f64, f64, Configuration)| {
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    let cheapest = allowed()
        .filter(|e| e.exec_ms <= per_fn_slo_ms)
        .map(|e| (per_job_cost(e.config, e.exec_ms, pricing), e.exec_ms, e.config))
        .min_by(rank);
    if let Some((_, _, cfg)) = cheapest {
        return Some(cfg);
    }
    allowed().map(|e| (e.exec_ms, per_job_cost(e.config, e.exec_ms, pricing), e.config)).min_by(rank).map(|t| t.2)
}
