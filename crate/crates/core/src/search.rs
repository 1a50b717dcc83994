//! Top-K configuration search for one function group.
//!
//! Best-first search over configuration paths ordered by the cost lower bound,
//! with two pruning blades: a time bound that cuts every slower sibling once a
//! prefix can no longer meet the group budget, and a cost bound compared
//! against the K-th smallest cost known to be achievable.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{per_job_cost, Configuration, Pricing, ProfileTable};

/// Latency budget of a group: `(slo_ms - wait_ms) * quota`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub slo_ms: f64,
    pub wait_ms: f64,
    pub quota: f64,
}

impl SearchBudget {
    pub fn new(slo_ms: f64, wait_ms: f64, quota: f64) -> Self {
        Self { slo_ms, wait_ms, quota }
    }

    /// A budget whose group SLO is exactly `g_slo_ms`.
    pub fn absolute(g_slo_ms: f64) -> Self {
        Self { slo_ms: g_slo_ms, wait_ms: 0.0, quota: 1.0 }
    }

    pub fn group_slo_ms(&self) -> f64 {
        (self.slo_ms - self.wait_ms) * self.quota
    }
}

/// One configuration of one function with its profiled time and per-job cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub config: Configuration,
    pub time_ms: f64,
    pub cost: f64,
}

/// The candidates of one function in nondecreasing latency order.
#[derive(Debug, Clone)]
pub struct Stage {
    function: String,
    by_latency: Vec<Candidate>,
    /// Index of the latency-minimal candidate (cheapest among equally fast ones).
    fastest: usize,
    min_cost: f64,
}

impl Stage {
    pub fn new(function: impl Into<String>, by_latency: Vec<Candidate>) -> Result<Self> {
        let function = function.into();
        if by_latency.is_empty() {
            return Err(Error::MissingProfile { function, config: None });
        }
        if let Some(pos) = by_latency.windows(2).position(|w| w[1].time_ms < w[0].time_ms) {
            return Err(Error::UnsortedProfile { function, position: pos + 1 });
        }
        let min_time = by_latency[0].time_ms;
        let mut fastest = 0;
        for (i, c) in by_latency.iter().enumerate().take_while(|(_, c)| c.time_ms == min_time) {
            if c.cost < by_latency[fastest].cost {
                fastest = i;
            }
        }
        let min_cost = by_latency.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        Ok(Self { function, by_latency, fastest, min_cost })
    }

    pub fn function(&self) -> &str {
        &self.function
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.by_latency
    }

    pub fn fastest(&self) -> &Candidate {
        &self.by_latency[self.fastest]
    }
}

/// The configuration space of a function group.
#[derive(Debug, Clone)]
pub struct GroupSpace {
    stages: Vec<Stage>,
}

impl GroupSpace {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::EmptyConfigSpace);
        }
        Ok(Self { stages })
    }

    /// Candidates for `group` read from the latency-sorted profile views,
    /// keeping only configurations accepted by `allow`.
    pub fn from_profiles<S, F>(group: &[S], profiles: &ProfileTable, pricing: &Pricing, allow: F) -> Result<Self>
    where
        S: AsRef<str>,
        F: Fn(&str, Configuration) -> bool,
    {
        let mut stages = Vec::with_capacity(group.len());
        for f in group {
            let f = f.as_ref();
            let candidates: Vec<Candidate> = profiles
                .get(f)?
                .by_latency()
                .filter(|e| allow(f, e.config))
                .map(|e| Candidate { config: e.config, time_ms: e.exec_ms, cost: per_job_cost(e.config, e.exec_ms, pricing) })
                .collect();
            stages.push(Stage::new(f, candidates)?);
        }
        Self::new(stages)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn bounds(&self) -> BoundsCache {
        BoundsCache::new(self)
    }
}

/// Suffix sums of per-function minima, indexed by the first uncovered stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCache {
    min_time_ms: Vec<f64>,
    min_cost: Vec<f64>,
    fastest_cost: Vec<f64>,
}

impl BoundsCache {
    pub fn new(space: &GroupSpace) -> Self {
        let n = space.stages.len();
        let mut min_time_ms = vec![0.0; n + 1];
        let mut min_cost = vec![0.0; n + 1];
        let mut fastest_cost = vec![0.0; n + 1];
        for (i, s) in space.stages.iter().enumerate().rev() {
            min_time_ms[i] = min_time_ms[i + 1] + s.fastest().time_ms;
            min_cost[i] = min_cost[i + 1] + s.min_cost;
            fastest_cost[i] = fastest_cost[i + 1] + s.fastest().cost;
        }
        Self { min_time_ms, min_cost, fastest_cost }
    }

    /// Builds a cache from explicit per-suffix values (index 0 = whole group).
    pub fn from_suffixes(min_time_ms: Vec<f64>, min_cost: Vec<f64>, fastest_cost: Vec<f64>) -> Self {
        Self { min_time_ms, min_cost, fastest_cost }
    }

    pub fn min_time_ms(&self, from_stage: usize) -> f64 {
        self.min_time_ms[from_stage]
    }

    pub fn min_cost(&self, from_stage: usize) -> f64 {
        self.min_cost[from_stage]
    }

    pub fn fastest_cost(&self, from_stage: usize) -> f64 {
        self.fastest_cost[from_stage]
    }
}

/// One configuration per function of a (possibly partial) group prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPath {
    pub configs: Vec<Configuration>,
    pub time_ms: f64,
    pub cost: f64,
}

impl ConfigPath {
    pub fn empty() -> Self {
        Self { configs: Vec::new(), time_ms: 0.0, cost: 0.0 }
    }

    pub fn from_candidates<'a, I: IntoIterator<Item = &'a Candidate>>(candidates: I) -> Self {
        let mut path = Self::empty();
        for c in candidates {
            path.push(c);
        }
        path
    }

    pub fn push(&mut self, c: &Candidate) {
        self.configs.push(c.config);
        self.time_ms += c.time_ms;
        self.cost += c.cost;
    }

    pub fn head(&self) -> Option<Configuration> {
        self.configs.first().copied()
    }

    fn rank(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.time_ms.total_cmp(&other.time_ms))
            .then_with(|| self.configs.cmp(&other.configs))
    }
}

/// Lower bound on the completion time of any extension of `partial`.
pub fn time_low_bound(partial: &ConfigPath, cache: &BoundsCache) -> f64 {
    partial.time_ms + cache.min_time_ms(partial.configs.len())
}

/// Lower bound on the cost of any extension of `partial`.
pub fn cost_low_bound(partial: &ConfigPath, cache: &BoundsCache) -> f64 {
    partial.cost + cache.min_cost(partial.configs.len())
}

/// Cost of extending `partial` with the latency-minimal configuration of every
/// remaining function.
pub fn cost_fastest(partial: &ConfigPath, cache: &BoundsCache) -> f64 {
    partial.cost + cache.fastest_cost(partial.configs.len())
}

/// Up to K paths ordered by cost, then time, then configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPQ {
    k: usize,
    paths: Vec<ConfigPath>,
}

impl ConfigPQ {
    pub fn new(k: usize) -> Self {
        Self { k: k.max(1), paths: Vec::new() }
    }

    pub fn insert(&mut self, path: ConfigPath) {
        let pos = self.paths.partition_point(|p| p.rank(&path) != Ordering::Greater);
        if pos < self.k {
            self.paths.insert(pos, path);
            self.paths.truncate(self.k);
        }
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn head(&self) -> Option<&ConfigPath> {
        self.paths.first()
    }

    pub fn paths(&self) -> &[ConfigPath] {
        &self.paths
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ConfigPath> {
        self.paths.iter()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.cost).collect()
    }

    /// Removes and returns the cheapest path.
    pub fn pop_front(&mut self) -> Option<ConfigPath> {
        if self.paths.is_empty() {
            None
        } else {
            Some(self.paths.remove(0))
        }
    }
}

impl<'a> IntoIterator for &'a ConfigPQ {
    type Item = &'a ConfigPath;
    type IntoIter = std::slice::Iter<'a, ConfigPath>;
    fn into_iter(self) -> Self::IntoIter {
        self.paths.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneReason {
    /// This prefix and every slower sibling cannot meet the budget.
    Time,
    /// The cost lower bound reached the K-th achievable cost.
    Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedPrefix {
    pub configs: Vec<Configuration>,
    pub reason: PruneReason,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    /// Partial paths whose bounds were evaluated.
    pub generated: u64,
    /// Partial paths popped from the frontier and extended.
    pub expanded: u64,
    /// Partial paths kept and pushed onto the frontier.
    pub kept: u64,
    pub time_pruned: u64,
    pub cost_pruned: u64,
    pub pruned: Vec<PrunedPrefix>,
}

impl SearchStats {
    /// Search time charged to jobs, modeled as a fixed cost per generated path.
    pub fn modeled_overhead_ms(&self, us_per_node: f64) -> f64 {
        self.generated as f64 * us_per_node / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub queue: ConfigPQ,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    /// Record every pruned prefix in the stats (for replay against an oracle).
    pub record_pruned: bool,
}

struct Node {
    picks: Vec<u16>,
    time_ms: f64,
    cost: f64,
    cost_low: f64,
}

impl Node {
    fn key(&self) -> (f64, f64) {
        (self.cost_low, self.time_ms)
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(other.picks.len().cmp(&self.picks.len()))
            .then_with(|| self.picks.cmp(&other.picks))
    }
}

/// K smallest achievable full-path costs seen so far, `+inf` padded.
struct MinRsc {
    costs: Vec<f64>,
}

impl MinRsc {
    fn new(k: usize) -> Self {
        Self { costs: vec![f64::INFINITY; k] }
    }

    fn threshold(&self) -> f64 {
        *self.costs.last().unwrap()
    }

    fn offer(&mut self, cost: f64) {
        if cost < self.threshold() {
            let pos = self.costs.partition_point(|&c| c <= cost);
            self.costs.insert(pos, cost);
            self.costs.pop();
        }
    }
}

pub fn esg_1q(space: &GroupSpace, budget: &SearchBudget, k: usize) -> SearchOutcome {
    esg_1q_with(space, budget, k, SearchOptions::default())
}

/// Finds the K cheapest configuration paths whose summed time is strictly
/// below the group budget. An empty queue means no path is feasible.
///
/// Every kept prefix contributes the cost of its all-fastest completion to the
/// K-best bound. That completion always meets the budget because it is exactly
/// what the time bound measured, so the bound is achievable. Extending a prefix
/// with the fastest configuration of the next function keeps the same
/// completion; such children are exempt from cost pruning, so every completion
/// that tightened the bound stays reachable.
pub fn esg_1q_with(space: &GroupSpace, budget: &SearchBudget, k: usize, options: SearchOptions) -> SearchOutcome {
    let k = k.max(1);
    let g_slo = budget.group_slo_ms();
    let mut stats = SearchStats::default();
    let mut queue = ConfigPQ::new(k);
    if !(g_slo > 0.0) {
        return SearchOutcome { queue, stats };
    }
    let stages = &space.stages;
    let n = stages.len();
    let cache = space.bounds();
    let mut min_rsc = MinRsc::new(k);
    let mut frontier: BinaryHeap<Reverse<Node>> = BinaryHeap::new();
    let mut complete: Vec<ConfigPath> = Vec::new();

    let to_configs = |picks: &[u16]| -> Vec<Configuration> {
        picks.iter().enumerate().map(|(d, &i)| stages[d].by_latency[i as usize].config).collect()
    };

    let root = Node { picks: Vec::new(), time_ms: 0.0, cost: 0.0, cost_low: cache.min_cost(0) };
    let mut next = Some(root);
    loop {
        let parent = match next.take() {
            Some(p) => p,
            None => match frontier.pop() {
                Some(Reverse(p)) => p,
                None => break,
            },
        };
        if complete.len() >= k && parent.cost_low > complete[k - 1].cost {
            break;
        }
        let depth = parent.picks.len();
        if depth == n {
            let path = ConfigPath { configs: to_configs(&parent.picks), time_ms: parent.time_ms, cost: parent.cost };
            let pos = complete.partition_point(|p| p.rank(&path) != Ordering::Greater);
            complete.insert(pos, path);
            continue;
        }
        stats.expanded += 1;
        let stage = &stages[depth];
        for (ci, cand) in stage.by_latency.iter().enumerate() {
            stats.generated += 1;
            let time_ms = parent.time_ms + cand.time_ms;
            let t_low = time_ms + cache.min_time_ms(depth + 1);
            if t_low >= g_slo {
                // Later candidates are no faster: the whole remainder goes.
                stats.time_pruned += (stage.by_latency.len() - ci) as u64;
                if options.record_pruned {
                    let mut configs = to_configs(&parent.picks);
                    configs.push(cand.config);
                    stats.pruned.push(PrunedPrefix { configs, reason: PruneReason::Time, bound: t_low });
                }
                break;
            }
            let cost = parent.cost + cand.cost;
            let cost_low = cost + cache.min_cost(depth + 1);
            let on_parent_witness = depth > 0 && ci == stage.fastest;
            if !on_parent_witness && cost_low >= min_rsc.threshold() {
                stats.cost_pruned += 1;
                if options.record_pruned {
                    let mut configs = to_configs(&parent.picks);
                    configs.push(cand.config);
                    stats.pruned.push(PrunedPrefix { configs, reason: PruneReason::Cost, bound: cost_low });
                }
                continue;
            }
            if !on_parent_witness {
                let fastest_completion = cost + cache.fastest_cost(depth + 1);
                debug_assert!(time_ms + cache.min_time_ms(depth + 1) < g_slo);
                min_rsc.offer(fastest_completion);
            }
            let mut picks = Vec::with_capacity(depth + 1);
            picks.extend_from_slice(&parent.picks);
            picks.push(ci as u16);
            stats.kept += 1;
            frontier.push(Reverse(Node { picks, time_ms, cost, cost_low }));
        }
    }
    for path in complete.into_iter().take(k) {
        queue.insert(path);
    }
    SearchOutcome { queue, stats }
}
