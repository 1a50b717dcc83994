//! The controller loop: AFW queues, per-queue scheduling decisions, invoker
//! placement and the recheck list.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::baselines::{best_first_preplan, enum_per_function, oracle_path_count, oracle_top_k, per_function_slos};
use crate::baselines::{Preplan, PreplanParams};
use crate::cluster_sim::{ClusterState, World};
use crate::error::{Error, Result};
use crate::model::Configuration;
use crate::search::{esg_1q, ConfigPQ, GroupSpace, SearchBudget};
use crate::slo_dist::plan_groups;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Default node of a function: FNV-1a 64 of `"app_id/fn_id"` modulo the node count.
pub fn home_invoker(app_id: &str, fn_id: &str, n_nodes: usize) -> usize {
    let key = format!("{app_id}/{fn_id}");
    (fnv1a64(key.as_bytes()) % n_nodes.max(1) as u64) as usize
}

/// Picks a node for one task: the preferred node if it fits, else a node with
/// a warm container for `(function, cfg)`, else the node with the most free
/// resources.
pub fn select_invoker(
    cluster: &ClusterState,
    function: usize,
    cfg: Configuration,
    preferred: usize,
    now_ms: f64,
) -> Result<Option<usize>> {
    if cfg.vcpus > cluster.vcpus_per_node() || cfg.vgpus > cluster.vgpus_per_node() {
        return Err(Error::UnschedulableConfiguration { config: cfg });
    }
    if preferred < cluster.len() && cluster.fits(preferred, cfg) {
        return Ok(Some(preferred));
    }
    let free = |n: usize| cluster.free_vcpus(n) + cluster.free_vgpus(n);
    let mut best: Option<usize> = None;
    for n in (0..cluster.len()).filter(|&n| cluster.fits(n, cfg) && cluster.has_warm(n, function, cfg, now_ms)) {
        if best.is_none_or(|b| free(n) > free(b)) {
            best = Some(n);
        }
    }
    if best.is_some() {
        return Ok(best);
    }
    for n in (0..cluster.len()).filter(|&n| cluster.fits(n, cfg)) {
        if best.is_none_or(|b| free(n) > free(b)) {
            best = Some(n);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Esg,
    BestFirst,
    Enum,
    Oracle,
}

impl SchedulerKind {
    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Esg => "esg",
            SchedulerKind::BestFirst => "best_first",
            SchedulerKind::Enum => "enum",
            SchedulerKind::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "esg" => Ok(SchedulerKind::Esg),
            "best_first" => Ok(SchedulerKind::BestFirst),
            "enum" => Ok(SchedulerKind::Enum),
            "oracle" => Ok(SchedulerKind::Oracle),
            other => Err(Error::InvalidScenario {
                field: "scheduler.name".into(),
                reason: format!("unknown scheduler `{other}` (expected esg, best_first, enum or oracle)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerParams {
    pub name: SchedulerKind,
    pub k: usize,
    pub group_size: usize,
    pub best_first_cutoff_ms: f64,
    pub recheck_rounds: u32,
    /// Modeled search cost per evaluated partial path, in microseconds.
    pub search_us_per_node: f64,
    /// Delay before the controller retries a nonempty recheck list.
    pub controller_period_ms: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            name: SchedulerKind::Esg,
            k: 5,
            group_size: 3,
            best_first_cutoff_ms: 100.0,
            recheck_rounds: 3,
            search_us_per_node: 0.5,
            controller_period_ms: 10.0,
        }
    }
}

impl SchedulerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::InvalidScenario { field: format!("scheduler.{field}"), reason: reason.into() })
        };
        if self.k == 0 {
            return bad("k", "must be >= 1");
        }
        if self.group_size == 0 {
            return bad("group_size", "must be >= 1");
        }
        if !(self.best_first_cutoff_ms > 0.0) {
            return bad("best_first_cutoff_ms", "must be > 0");
        }
        if !(self.search_us_per_node >= 0.0) {
            return bad("search_us_per_node", "must be >= 0");
        }
        if !(self.controller_period_ms > 0.0) {
            return bad("controller_period_ms", "must be > 0");
        }
        Ok(())
    }
}

/// A pending job of one AFW queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueuedJob {
    pub job: usize,
    pub instance: usize,
    /// Arrival time of the application instance the job belongs to.
    pub instance_arrival_ms: f64,
    pub enqueued_ms: f64,
    /// Node that ran the (last-completing) predecessor stage.
    pub pred_node: Option<usize>,
}

/// `(application index, DAG node index)`.
pub type QueueKey = (usize, usize);

/// One FIFO per application-function pair.
#[derive(Debug, Clone, Default)]
pub struct AfwQueues {
    queues: BTreeMap<QueueKey, VecDeque<QueuedJob>>,
}

impl AfwQueues {
    pub fn push(&mut self, key: QueueKey, job: QueuedJob) {
        self.queues.entry(key).or_default().push_back(job);
    }

    pub fn len_of(&self, key: QueueKey) -> usize {
        self.queues.get(&key).map_or(0, VecDeque::len)
    }

    pub fn front(&self, key: QueueKey) -> Option<&QueuedJob> {
        self.queues.get(&key).and_then(VecDeque::front)
    }

    pub fn take(&mut self, key: QueueKey, n: usize) -> Vec<QueuedJob> {
        let q = self.queues.get_mut(&key).expect("known queue");
        q.drain(..n.min(q.len())).collect()
    }

    pub fn keys(&self) -> Vec<QueueKey> {
        self.queues.keys().copied().collect()
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecheckEntry {
    pub key: QueueKey,
    pub rounds_waited: u32,
    /// Remaining candidate configurations from the last decision.
    pub candidates: Vec<Configuration>,
}

/// Output of a scheduling policy for one queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Configurations to try, most preferred first. Empty when no
    /// configuration meets the budget.
    pub candidates: Vec<Configuration>,
    /// Batch size the policy wanted before clamping to the queue length.
    pub planned_batch: u32,
    pub overhead_ms: f64,
    pub nodes: u64,
}

/// A task formed by the controller; resources are already reserved.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLaunch {
    pub key: QueueKey,
    pub jobs: Vec<QueuedJob>,
    pub config: Configuration,
    pub node: usize,
    pub warm: bool,
    pub decision_ms: f64,
    pub overhead_ms: f64,
    pub queue_len: usize,
    pub planned_batch: u32,
    pub forced: bool,
}

/// One invocation of the scheduling policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub time_ms: f64,
    pub key: QueueKey,
    pub queue_len: usize,
    pub overhead_ms: f64,
    pub nodes: u64,
    pub candidates: usize,
}

#[derive(Debug, Clone)]
struct GroupShare {
    functions: Vec<String>,
    share: f64,
}

/// Scheduling policy with its per-run caches.
pub struct Policy {
    params: SchedulerParams,
    noise_sigma: f64,
    shares: BTreeMap<QueueKey, GroupShare>,
    preplans: BTreeMap<usize, Preplan>,
    fn_slos: BTreeMap<usize, BTreeMap<String, f64>>,
}

impl Policy {
    /// Builds the policy and precomputes the group plans of every workflow suffix.
    pub fn new(params: SchedulerParams, world: &World, noise_sigma: f64) -> Result<Self> {
        params.validate()?;
        let mut policy =
            Self { params, noise_sigma, shares: BTreeMap::new(), preplans: BTreeMap::new(), fn_slos: BTreeMap::new() };
        if matches!(params.name, SchedulerKind::Esg | SchedulerKind::Oracle) {
            for (a, app) in world.apps.iter().enumerate() {
                for n in 0..app.len() {
                    let share = policy.group_share(world, a, n)?;
                    if params.name == SchedulerKind::Oracle && share.functions.len() > crate::baselines::ORACLE_MAX_GROUP {
                        let widest = share.functions.iter().map(|f| world.profiles.get(f).map_or(0, |p| p.len())).max();
                        return Err(Error::OracleIntractable {
                            group_size: share.functions.len(),
                            max_configs: widest.unwrap_or(0),
                        });
                    }
                    policy.shares.insert((a, n), share);
                }
            }
        }
        Ok(policy)
    }

    pub fn params(&self) -> &SchedulerParams {
        &self.params
    }

    fn group_share(&self, world: &World, app: usize, node: usize) -> Result<GroupShare> {
        let dag = &world.apps[app];
        let suffix = dag.suffix(dag.name(node), 1.0)?;
        let plan = plan_groups(&suffix, &world.profiles, self.params.group_size)?;
        let group = plan.group_of(dag.name(node)).expect("suffix root is planned");
        Ok(GroupShare { functions: group.functions.clone(), share: group.quota_ms.unwrap_or(1.0) })
    }

    /// Chooses configurations for the queue `key` holding `queue_len` jobs whose
    /// oldest application instance has waited `wait_ms`.
    pub fn decide(&mut self, world: &World, key: QueueKey, queue_len: usize, wait_ms: f64) -> Result<Decision> {
        let (app, node) = key;
        let dag = &world.apps[app];
        let fname = dag.name(node);
        let max_batch = queue_len as u32;
        let us = self.params.search_us_per_node;
        match self.params.name {
            SchedulerKind::Esg | SchedulerKind::Oracle => {
                let share = &self.shares[&key];
                let space = GroupSpace::from_profiles(&share.functions, &world.profiles, &world.pricing, |_, c| {
                    c.batch <= max_batch
                })?;
                let budget = SearchBudget::new(dag.slo_ms(), wait_ms, share.share);
                let search = |budget: &SearchBudget| -> Result<(ConfigPQ, u64)> {
                    if self.params.name == SchedulerKind::Esg {
                        let out = esg_1q(&space, budget, self.params.k);
                        Ok((out.queue, out.stats.generated))
                    } else {
                        Ok((oracle_top_k(&space, budget, self.params.k)?, oracle_path_count(&space)))
                    }
                };
                let (mut queue, mut nodes) = search(&budget)?;
                if queue.is_empty() {
                    // The budget is already lost: take the cheapest paths.
                    let (q, n) = search(&SearchBudget::absolute(f64::INFINITY))?;
                    queue = q;
                    nodes += n;
                }
                let candidates = distinct_heads(&queue);
                let planned_batch = candidates.first().map_or(1, |c| c.batch);
                Ok(Decision { candidates, planned_batch, overhead_ms: nodes as f64 * us / 1000.0, nodes })
            }
            SchedulerKind::BestFirst => {
                if !self.preplans.contains_key(&app) {
                    let params = PreplanParams {
                        cutoff_ms: self.params.best_first_cutoff_ms,
                        us_per_state: us,
                        noise_sigma: self.noise_sigma,
                    };
                    let plan = best_first_preplan(dag, dag.slo_ms(), &world.profiles, &world.grid, &world.pricing, &params)?;
                    self.preplans.insert(app, plan);
                }
                let plan = &self.preplans[&app];
                let planned = plan.configs[node];
                let mut cfg = planned;
                if cfg.batch > max_batch {
                    let b = world.grid.batch.iter().copied().filter(|&b| b <= max_batch).max().unwrap_or(1);
                    cfg = Configuration::new(b, cfg.vcpus, cfg.vgpus);
                }
                let first_stage = node == dag.entry();
                let overhead_ms = if first_stage { plan.search_ms } else { 0.0 };
                let nodes = if first_stage { plan.visited.len() as u64 } else { 0 };
                Ok(Decision { candidates: vec![cfg], planned_batch: planned.batch, overhead_ms, nodes })
            }
            SchedulerKind::Enum => {
                if !self.fn_slos.contains_key(&app) {
                    self.fn_slos.insert(app, per_function_slos(dag, dag.slo_ms(), &world.profiles)?);
                }
                let budget = self.fn_slos[&app][fname];
                let profile = world.profiles.get(fname)?;
                let cfg = enum_per_function(profile, budget, max_batch, &world.pricing);
                let nodes = profile.len() as u64;
                Ok(Decision {
                    candidates: cfg.into_iter().collect(),
                    planned_batch: cfg.map_or(1, |c| c.batch),
                    overhead_ms: nodes as f64 * us / 1000.0,
                    nodes,
                })
            }
        }
    }
}

fn distinct_heads(queue: &ConfigPQ) -> Vec<Configuration> {
    let mut heads: Vec<Configuration> = Vec::with_capacity(queue.len());
    for p in queue {
        let h = p.head().expect("nonempty path");
        if !heads.contains(&h) {
            heads.push(h);
        }
    }
    heads
}

/// Round-robin controller over the AFW queues.
pub struct Controller {
    policy: Policy,
    recheck: Vec<RecheckEntry>,
    rr_offset: usize,
    min_config: Configuration,
    pub decisions: Vec<DecisionRecord>,
}

impl Controller {
    pub fn new(policy: Policy, world: &World) -> Self {
        let g = &world.grid;
        let min = |v: &[u32]| v.iter().copied().min().unwrap_or(1);
        let min_config = Configuration::new(min(&g.batch), min(&g.vcpus), min(&g.vgpus));
        Self { policy, recheck: Vec::new(), rr_offset: 0, min_config, decisions: Vec::new() }
    }

    pub fn recheck(&self) -> &[RecheckEntry] {
        &self.recheck
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    /// One controller round. Launched tasks have their resources reserved in
    /// `cluster`.
    pub fn tick(
        &mut self,
        world: &World,
        queues: &mut AfwQueues,
        cluster: &mut ClusterState,
        now_ms: f64,
    ) -> Result<Vec<TaskLaunch>> {
        let mut out = Vec::new();
        for e in &mut self.recheck {
            e.rounds_waited += 1;
        }
        // Resources only shrink within a round, so a failed placement stays
        // failed until the next round.
        let mut failed: Vec<QueueKey> = Vec::new();
        self.retry_recheck(world, queues, cluster, now_ms, &mut failed, &mut out)?;
        let keys = queues.keys();
        if !keys.is_empty() {
            let start = self.rr_offset % keys.len();
            self.rr_offset = self.rr_offset.wrapping_add(1);
            for i in 0..keys.len() {
                let key = keys[(start + i) % keys.len()];
                if queues.len_of(key) == 0 || self.recheck.iter().any(|e| e.key == key) {
                    continue;
                }
                if let Some(entry) = self.drain(world, key, queues, cluster, now_ms, &mut out)? {
                    failed.push(key);
                    self.recheck.push(entry);
                }
                self.retry_recheck(world, queues, cluster, now_ms, &mut failed, &mut out)?;
            }
        }
        Ok(out)
    }

    fn retry_recheck(
        &mut self,
        world: &World,
        queues: &mut AfwQueues,
        cluster: &mut ClusterState,
        now_ms: f64,
        failed: &mut Vec<QueueKey>,
        out: &mut Vec<TaskLaunch>,
    ) -> Result<()> {
        let mut i = 0;
        while i < self.recheck.len() {
            let key = self.recheck[i].key;
            if queues.len_of(key) == 0 {
                self.recheck.remove(i);
                continue;
            }
            if failed.contains(&key) {
                i += 1;
                continue;
            }
            let entry = self.recheck[i].clone();
            let placed = if entry.rounds_waited >= self.policy.params.recheck_rounds {
                self.launch_forced(world, key, queues, cluster, now_ms, out)?
            } else {
                let decision = Decision {
                    candidates: entry.candidates.clone(),
                    planned_batch: entry.candidates.first().map_or(1, |c| c.batch),
                    overhead_ms: 0.0,
                    nodes: 0,
                };
                match self.place(world, key, queues, cluster, now_ms, &decision)? {
                    Some(launch) => {
                        out.push(launch);
                        true
                    }
                    None => {
                        let decision = self.decide(world, key, queues, now_ms)?;
                        match self.place_or_fallback(world, key, queues, cluster, now_ms, &decision)? {
                            Some(launch) => {
                                out.push(launch);
                                true
                            }
                            None => {
                                self.recheck[i].candidates = decision.candidates;
                                false
                            }
                        }
                    }
                }
            };
            if placed {
                self.recheck.remove(i);
                if let Some(entry) = self.drain(world, key, queues, cluster, now_ms, out)? {
                    failed.push(key);
                    self.recheck.insert(i, entry);
                    i += 1;
                }
            } else {
                failed.push(key);
                i += 1;
            }
        }
        Ok(())
    }

    /// Dispatches from `key` until the queue empties or placement fails.
    fn drain(
        &mut self,
        world: &World,
        key: QueueKey,
        queues: &mut AfwQueues,
        cluster: &mut ClusterState,
        now_ms: f64,
        out: &mut Vec<TaskLaunch>,
    ) -> Result<Option<RecheckEntry>> {
        while queues.len_of(key) > 0 {
            let decision = self.decide(world, key, queues, now_ms)?;
            match self.place_or_fallback(world, key, queues, cluster, now_ms, &decision)? {
                Some(launch) => out.push(launch),
                None => return Ok(Some(RecheckEntry { key, rounds_waited: 0, candidates: decision.candidates })),
            }
        }
        Ok(None)
    }

    fn decide(&mut self, world: &World, key: QueueKey, queues: &AfwQueues, now_ms: f64) -> Result<Decision> {
        let queue_len = queues.len_of(key);
        let wait_ms = now_ms - queues.front(key).expect("nonempty queue").instance_arrival_ms;
        let decision = self.policy.decide(world, key, queue_len, wait_ms)?;
        self.decisions.push(DecisionRecord {
            time_ms: now_ms,
            key,
            queue_len,
            overhead_ms: decision.overhead_ms,
            nodes: decision.nodes,
            candidates: decision.candidates.len(),
        });
        Ok(decision)
    }

    /// Places the decision; an empty candidate list goes straight to the
    /// minimum configuration.
    fn place_or_fallback(
        &mut self,
        world: &World,
        key: QueueKey,
        queues: &mut AfwQueues,
        cluster: &mut ClusterState,
        now_ms: f64,
        decision: &Decision,
    ) -> Result<Option<TaskLaunch>> {
        if decision.candidates.is_empty() {
            let fallback = Decision {
                candidates: vec![self.min_config],
                planned_batch: self.min_config.batch,
                overhead_ms: decision.overhead_ms,
                nodes: decision.nodes,
            };
            let launch = self.place(world, key, queues, cluster, now_ms, &fallback)?;
            return Ok(launch.map(|l| TaskLaunch { forced: true, ..l }));
        }
        self.place(world, key, queues, cluster, now_ms, decision)
    }

    fn launch_forced(
        &mut self,
        world: &World,
        key: QueueKey,
        queues: &mut AfwQueues,
        cluster: &mut ClusterState,
        now_ms: f64,
        out: &mut Vec<TaskLaunch>,
    ) -> Result<bool> {
        let decision =
            Decision { candidates: vec![self.min_config], planned_batch: self.min_config.batch, overhead_ms: 0.0, nodes: 0 };
        match self.place(world, key, queues, cluster, now_ms, &decision)? {
            Some(launch) => {
                out.push(TaskLaunch { forced: true, ..launch });
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn place(
        &mut self,
        world: &World,
        key: QueueKey,
        queues: &mut AfwQueues,
        cluster: &mut ClusterState,
        now_ms: f64,
        decision: &Decision,
    ) -> Result<Option<TaskLaunch>> {
        let (app, node) = key;
        let dag = &world.apps[app];
        let function = world.function_of(app, node);
        let queue_len = queues.len_of(key);
        let front = *queues.front(key).expect("nonempty queue");
        let preferred = match front.pred_node {
            Some(p) => p,
            None => home_invoker(dag.id(), dag.name(node), cluster.len()),
        };
        for &cfg in &decision.candidates {
            if cfg.batch as usize > queue_len {
                continue;
            }
            if let Some(target) = select_invoker(cluster, function, cfg, preferred, now_ms)? {
                let warm = cluster.allocate(target, function, cfg, now_ms);
                let jobs = queues.take(key, cfg.batch as usize);
                return Ok(Some(TaskLaunch {
                    key,
                    jobs,
                    config: cfg,
                    node: target,
                    warm,
                    decision_ms: now_ms,
                    overhead_ms: decision.overhead_ms,
                    queue_len,
                    planned_batch: decision.planned_batch,
                    forced: false,
                }));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn home_invoker_single_node_and_fixture() {
        assert_eq!(home_invoker("any", "thing", 1), 0);
        let h = fnv1a64(b"image_classification/super_resolution");
        assert_eq!(home_invoker("image_classification", "super_resolution", 16), (h % 16) as usize);
    }

    #[test]
    fn select_invoker_preference_order() {
        let mut cluster = ClusterState::new(8, 16, 7);
        let cfg = Configuration::new(1, 2, 2);
        // preferred node free
        assert_eq!(select_invoker(&cluster, 0, cfg, 3, 0.0).unwrap(), Some(3));
        // predecessor short on vGPUs, node 7 warm
        cluster.reserve(3, Configuration::new(1, 1, 6));
        cluster.add_warm(7, 0, cfg, 0.0, 600_000.0);
        assert_eq!(select_invoker(&cluster, 0, cfg, 3, 1.0).unwrap(), Some(7));
        // no warm node: most free, lowest index on ties
        cluster.reserve(0, Configuration::new(1, 4, 0));
        assert_eq!(select_invoker(&cluster, 1, cfg, 3, 1.0).unwrap(), Some(1));
        // nobody has vGPUs
        for n in 0..8 {
            let g = cluster.free_vgpus(n);
            cluster.reserve(n, Configuration::new(1, 0, g));
        }
        assert_eq!(select_invoker(&cluster, 0, cfg, 3, 1.0).unwrap(), None);
        let err = select_invoker(&cluster, 0, Configuration::new(1, 17, 1), 0, 0.0).unwrap_err();
        assert!(err.to_string().starts_with("unschedulable configuration"));
    }
}
