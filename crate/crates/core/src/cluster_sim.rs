//! Discrete-event simulation of the invoker fleet.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dispatch::{home_invoker, AfwQueues, Controller, DecisionRecord, Policy, QueueKey, QueuedJob, SchedulerParams};
use crate::error::{Error, Result};
use crate::model::{ApplicationDag, ConfigGrid, Configuration, FunctionSpec, Pricing, ProfileTable};
use crate::workload::Arrival;

/// Slack when comparing a prewarmed container's ready time with "now".
const READY_EPS_MS: f64 = 1e-6;
/// Lower clamp of the multiplicative noise factor.
const NOISE_FLOOR: f64 = 0.05;

/// `profile_ms * max(0.05, N(1, sigma))`.
pub fn sample_exec_time<R: Rng + ?Sized>(profile_ms: f64, noise_sigma: f64, rng: &mut R) -> f64 {
    if noise_sigma == 0.0 {
        return profile_ms;
    }
    let factor = Normal::new(1.0, noise_sigma).expect("finite sigma").sample(rng);
    profile_ms * factor.max(NOISE_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    pub latency_ms: f64,
    /// MB per millisecond (1.0 = 1 GB/s).
    pub bandwidth_mb_per_ms: f64,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self { latency_ms: 5.0, bandwidth_mb_per_ms: 1.0 }
    }
}

pub fn transfer_delay(size_mb: f64, same_node: bool, params: &TransferParams) -> f64 {
    if same_node {
        0.0
    } else {
        params.latency_ms + size_mb / params.bandwidth_mb_per_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct WarmContainer {
    ready_ms: f64,
    expiry_ms: f64,
}

impl WarmContainer {
    fn usable(&self, now_ms: f64) -> bool {
        self.ready_ms <= now_ms + READY_EPS_MS && self.expiry_ms > now_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NodeState {
    free_vcpus: u32,
    free_vgpus: u32,
    /// Idle containers by `(function, vcpus, vgpus)`; batch size is not a
    /// container property.
    warm: BTreeMap<(usize, u32, u32), Vec<WarmContainer>>,
}

fn warm_key(function: usize, cfg: Configuration) -> (usize, u32, u32) {
    (function, cfg.vcpus, cfg.vgpus)
}

/// Free resources and idle containers of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    vcpus_per_node: u32,
    vgpus_per_node: u32,
    nodes: Vec<NodeState>,
}

impl ClusterState {
    pub fn new(nodes: usize, vcpus_per_node: u32, vgpus_per_node: u32) -> Self {
        let node = NodeState { free_vcpus: vcpus_per_node, free_vgpus: vgpus_per_node, warm: BTreeMap::new() };
        Self { vcpus_per_node, vgpus_per_node, nodes: vec![node; nodes] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn vcpus_per_node(&self) -> u32 {
        self.vcpus_per_node
    }

    pub fn vgpus_per_node(&self) -> u32 {
        self.vgpus_per_node
    }

    pub fn free_vcpus(&self, node: usize) -> u32 {
        self.nodes[node].free_vcpus
    }

    pub fn free_vgpus(&self, node: usize) -> u32 {
        self.nodes[node].free_vgpus
    }

    pub fn fits(&self, node: usize, cfg: Configuration) -> bool {
        let n = &self.nodes[node];
        n.free_vcpus >= cfg.vcpus && n.free_vgpus >= cfg.vgpus
    }

    pub fn has_warm(&self, node: usize, function: usize, cfg: Configuration, now_ms: f64) -> bool {
        self.nodes[node].warm.get(&warm_key(function, cfg)).is_some_and(|v| v.iter().any(|c| c.usable(now_ms)))
    }

    /// Deducts resources without touching containers.
    ///
    /// # Panics
    /// If the node lacks capacity.
    pub fn reserve(&mut self, node: usize, cfg: Configuration) {
        let n = &mut self.nodes[node];
        assert!(n.free_vcpus >= cfg.vcpus && n.free_vgpus >= cfg.vgpus, "node {node} over capacity for {cfg}");
        n.free_vcpus -= cfg.vcpus;
        n.free_vgpus -= cfg.vgpus;
    }

    pub fn release(&mut self, node: usize, cfg: Configuration) {
        let n = &mut self.nodes[node];
        n.free_vcpus += cfg.vcpus;
        n.free_vgpus += cfg.vgpus;
        debug_assert!(n.free_vcpus <= self.vcpus_per_node && n.free_vgpus <= self.vgpus_per_node);
    }

    /// Reserves resources and claims an idle warm container if one is usable.
    /// Returns whether the start is warm.
    pub fn allocate(&mut self, node: usize, function: usize, cfg: Configuration, now_ms: f64) -> bool {
        self.reserve(node, cfg);
        let Some(pool) = self.nodes[node].warm.get_mut(&warm_key(function, cfg)) else {
            return false;
        };
        pool.retain(|c| c.expiry_ms > now_ms);
        let best = pool
            .iter()
            .enumerate()
            .filter(|(_, c)| c.usable(now_ms))
            .max_by(|a, b| a.1.expiry_ms.total_cmp(&b.1.expiry_ms))
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                pool.swap_remove(i);
                true
            }
            None => false,
        }
    }

    pub fn add_warm(&mut self, node: usize, function: usize, cfg: Configuration, ready_ms: f64, expiry_ms: f64) {
        self.nodes[node].warm.entry(warm_key(function, cfg)).or_default().push(WarmContainer { ready_ms, expiry_ms });
    }

    /// Whether some idle container for `(function, cfg)` is alive at `at_ms`.
    fn warm_until(&self, node: usize, function: usize, cfg: Configuration, at_ms: f64) -> bool {
        self.nodes[node].warm.get(&warm_key(function, cfg)).is_some_and(|v| v.iter().any(|c| c.expiry_ms > at_ms))
    }
}

/// Smoothed inter-arrival estimate of one AFW queue.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EwmaPredictor {
    pub last_arrival_ms: Option<f64>,
    pub estimate_ms: Option<f64>,
}

impl EwmaPredictor {
    /// Records an arrival and returns the updated interval estimate.
    pub fn observe(&mut self, arrival_ms: f64, lambda: f64) -> Option<f64> {
        if let Some(last) = self.last_arrival_ms {
            let interval = arrival_ms - last;
            self.estimate_ms = Some(match self.estimate_ms {
                None => interval,
                Some(e) => lambda * interval + (1.0 - lambda) * e,
            });
        }
        self.last_arrival_ms = Some(arrival_ms);
        self.estimate_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub nodes: usize,
    pub vcpus_per_node: u32,
    pub vgpus_per_node: u32,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { nodes: 16, vcpus_per_node: 16, vgpus_per_node: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub noise_sigma: f64,
    pub keep_alive_ms: f64,
    pub transfer: TransferParams,
    pub prewarm: bool,
    pub ewma_lambda: f64,
    /// Extra simulated time after the horizon for in-flight work to finish.
    pub drain_ms: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            noise_sigma: 0.05,
            keep_alive_ms: 600_000.0,
            transfer: TransferParams::default(),
            prewarm: true,
            ewma_lambda: 0.3,
            drain_ms: 60_000.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::InvalidScenario { field: format!("sim.{field}"), reason: reason.into() });
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma", "must be >= 0");
        }
        if !(self.keep_alive_ms >= 0.0) {
            return bad("keep_alive_ms", "must be >= 0");
        }
        if !(self.transfer.latency_ms >= 0.0) {
            return bad("transfer.latency_ms", "must be >= 0");
        }
        if !(self.transfer.bandwidth_mb_per_ms > 0.0) {
            return bad("transfer.bandwidth_mb_per_ms", "must be > 0");
        }
        if !(self.ewma_lambda > 0.0 && self.ewma_lambda <= 1.0) {
            return bad("ewma_lambda", "must be in (0, 1]");
        }
        if !(self.drain_ms >= 0.0) {
            return bad("drain_ms", "must be >= 0");
        }
        Ok(())
    }
}

/// Immutable inputs shared by the controller and the simulator.
#[derive(Debug, Clone)]
pub struct World {
    pub functions: Vec<FunctionSpec>,
    pub apps: Vec<ApplicationDag>,
    pub profiles: ProfileTable,
    pub grid: ConfigGrid,
    pub pricing: Pricing,
    fn_index: Vec<Vec<usize>>,
}

impl World {
    pub fn new(
        functions: Vec<FunctionSpec>,
        apps: Vec<ApplicationDag>,
        profiles: ProfileTable,
        grid: ConfigGrid,
        pricing: Pricing,
    ) -> Result<Self> {
        let mut fn_index = Vec::with_capacity(apps.len());
        for app in &apps {
            let mut idx = Vec::with_capacity(app.len());
            for f in app.nodes() {
                let i = functions.iter().position(|s| &s.id == f).ok_or_else(|| Error::InvalidDag {
                    app: app.id().into(),
                    reason: format!("unknown function `{f}`"),
                })?;
                profiles.get(f)?;
                idx.push(i);
            }
            fn_index.push(idx);
        }
        Ok(Self { functions, apps, profiles, grid, pricing, fn_index })
    }

    /// Index into `functions` of DAG node `node` of application `app`.
    pub fn function_of(&self, app: usize, node: usize) -> usize {
        self.fn_index[app][node]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub id: usize,
    pub app: usize,
    pub arrival_ms: f64,
    pub slo_ms: f64,
    pub finish_ms: Option<f64>,
}

/// One stage of one application instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub id: usize,
    pub instance: usize,
    pub app: usize,
    /// DAG node index within the application.
    pub node: usize,
    pub enqueued_ms: f64,
    pub pred_node: Option<usize>,
    pub task: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub id: usize,
    pub app: usize,
    pub node: usize,
    pub function: usize,
    pub invoker: usize,
    pub config: Configuration,
    pub jobs: Vec<usize>,
    pub decision_ms: f64,
    pub overhead_ms: f64,
    pub transfer_ms: f64,
    pub cold_start_ms: f64,
    pub exec_ms: f64,
    pub finish_ms: f64,
    pub warm: bool,
    pub forced: bool,
    pub queue_len: usize,
    pub planned_batch: u32,
}

impl TaskRecord {
    /// Time the task's own work starts (after the modeled search overhead).
    pub fn start_ms(&self) -> f64 {
        self.decision_ms + self.overhead_ms
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub app_ids: Vec<String>,
    pub function_ids: Vec<String>,
    pub nodes: usize,
    pub vcpus_per_node: u32,
    pub vgpus_per_node: u32,
    pub horizon_ms: f64,
    /// Start of the measured window.
    pub warmup_ms: f64,
    /// Time the simulation stopped; later completions are truncated.
    pub end_ms: f64,
    /// Whether work was still pending when the run stopped.
    pub truncated: bool,
    pub instances: Vec<InstanceRecord>,
    pub jobs: Vec<JobRecord>,
    pub tasks: Vec<TaskRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub prewarms: u64,
}

pub const TRACE_HEADER: [&str; 21] = [
    "instance",
    "app",
    "function",
    "job",
    "instance_arrival_ms",
    "slo_ms",
    "enqueued_ms",
    "task",
    "invoker",
    "batch",
    "vcpus",
    "vgpus",
    "decision_ms",
    "overhead_ms",
    "transfer_ms",
    "cold_start_ms",
    "exec_ms",
    "finish_ms",
    "warm",
    "queue_len",
    "planned_batch",
];

impl SimTrace {
    pub fn task_of(&self, job: usize) -> Option<&TaskRecord> {
        self.jobs[job].task.map(|t| &self.tasks[t])
    }

    /// Writes one row per job stage, in job order.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for job in &self.jobs {
            let inst = &self.instances[job.instance];
            let mut row: Vec<String> = vec![
                inst.id.to_string(),
                self.app_ids[job.app].clone(),
                String::new(),
                job.id.to_string(),
                inst.arrival_ms.to_string(),
                inst.slo_ms.to_string(),
                job.enqueued_ms.to_string(),
            ];
            match self.task_of(job.id) {
                Some(t) => {
                    row[2] = self.function_ids[t.function].clone();
                    row.extend([
                        t.id.to_string(),
                        t.invoker.to_string(),
                        t.config.batch.to_string(),
                        t.config.vcpus.to_string(),
                        t.config.vgpus.to_string(),
                        t.decision_ms.to_string(),
                        t.overhead_ms.to_string(),
                        t.transfer_ms.to_string(),
                        t.cold_start_ms.to_string(),
                        t.exec_ms.to_string(),
                        t.finish_ms.to_string(),
                        t.warm.to_string(),
                        t.queue_len.to_string(),
                        t.planned_batch.to_string(),
                    ]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), TRACE_HEADER.len() - row.len())),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 csv")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    TaskComplete(usize),
    Prewarm { node: usize, function: usize, cfg: Configuration },
    Dispatch,
    Arrival(usize),
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::TaskComplete(_) => 0,
            EventKind::Prewarm { .. } => 2,
            EventKind::Dispatch => 3,
            EventKind::Arrival(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time_ms: f64,
    seq: u64,
    kind: EventKind,
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_ms
            .total_cmp(&other.time_ms)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.seq.cmp(&other.seq))
    }
}

struct InstanceState {
    waiting_preds: Vec<usize>,
    remaining: usize,
}

/// A single simulation run.
pub struct Simulation<'w> {
    world: &'w World,
    params: SimParams,
    cluster: ClusterState,
    controller: Controller,
    queues: AfwQueues,
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,
    pending_ticks: BTreeSet<u64>,
    noise_seed: u64,
    ewma: BTreeMap<QueueKey, EwmaPredictor>,
    last_used: BTreeMap<QueueKey, (usize, Configuration)>,
    state: Vec<InstanceState>,
    trace: SimTrace,
}

impl<'w> Simulation<'w> {
    pub fn new(
        world: &'w World,
        cluster: &ClusterParams,
        params: SimParams,
        scheduler: SchedulerParams,
        noise_seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if cluster.nodes == 0 {
            return Err(Error::InvalidScenario { field: "cluster.nodes".into(), reason: "must be >= 1".into() });
        }
        if world.grid.max_vcpus() > cluster.vcpus_per_node || world.grid.max_vgpus() > cluster.vgpus_per_node {
            return Err(Error::InvalidScenario {
                field: "grid".into(),
                reason: format!(
                    "configurations up to {} vCPUs / {} vGPUs exceed node capacity {} / {}",
                    world.grid.max_vcpus(),
                    world.grid.max_vgpus(),
                    cluster.vcpus_per_node,
                    cluster.vgpus_per_node
                ),
            });
        }
        let policy = Policy::new(scheduler, world, params.noise_sigma)?;
        let trace = SimTrace {
            app_ids: world.apps.iter().map(|a| a.id().to_string()).collect(),
            function_ids: world.functions.iter().map(|f| f.id.clone()).collect(),
            nodes: cluster.nodes,
            vcpus_per_node: cluster.vcpus_per_node,
            vgpus_per_node: cluster.vgpus_per_node,
            horizon_ms: 0.0,
            warmup_ms: 0.0,
            end_ms: 0.0,
            truncated: false,
            instances: Vec::new(),
            jobs: Vec::new(),
            tasks: Vec::new(),
            decisions: Vec::new(),
            prewarms: 0,
        };
        Ok(Self {
            world,
            params,
            cluster: ClusterState::new(cluster.nodes, cluster.vcpus_per_node, cluster.vgpus_per_node),
            controller: Controller::new(policy, world),
            queues: AfwQueues::default(),
            events: BinaryHeap::new(),
            seq: 0,
            pending_ticks: BTreeSet::new(),
            noise_seed,
            ewma: BTreeMap::new(),
            last_used: BTreeMap::new(),
            state: Vec::new(),
            trace,
        })
    }

    fn push(&mut self, time_ms: f64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(Event { time_ms, seq: self.seq, kind }));
    }

    fn schedule_tick(&mut self, time_ms: f64) {
        if self.pending_ticks.insert(time_ms.to_bits()) {
            self.push(time_ms, EventKind::Dispatch);
        }
    }

    /// Runs `arrivals` (times in ms, before `horizon_ms`) to completion or
    /// until `horizon_ms + drain_ms`.
    pub fn run(mut self, arrivals: &[Arrival], horizon_ms: f64) -> Result<SimTrace> {
        for a in arrivals.iter().filter(|a| a.time_ms < horizon_ms) {
            if a.app >= self.world.apps.len() {
                return Err(Error::InvalidScenario {
                    field: "workload.arrivals".into(),
                    reason: format!("unknown application index {}", a.app),
                });
            }
            self.push(a.time_ms, EventKind::Arrival(a.app));
        }
        let end_ms = horizon_ms + self.params.drain_ms;
        let mut now = 0.0;
        while let Some(Reverse(ev)) = self.events.pop() {
            if ev.time_ms > end_ms {
                self.trace.truncated = true;
                break;
            }
            now = ev.time_ms;
            match ev.kind {
                EventKind::Arrival(app) => self.on_arrival(app, now),
                EventKind::TaskComplete(task) => self.on_complete(task, now),
                EventKind::Prewarm { node, function, cfg } => self.on_prewarm(node, function, cfg, now),
                EventKind::Dispatch => self.on_tick(now)?,
            }
        }
        self.trace.horizon_ms = horizon_ms;
        self.trace.end_ms = if self.trace.truncated { end_ms } else { now.max(horizon_ms) };
        self.trace.decisions = std::mem::take(&mut self.controller.decisions);
        Ok(self.trace)
    }

    fn on_arrival(&mut self, app: usize, now: f64) {
        let world = self.world;
        let dag = &world.apps[app];
        let id = self.trace.instances.len();
        self.trace.instances.push(InstanceRecord { id, app, arrival_ms: now, slo_ms: dag.slo_ms(), finish_ms: None });
        self.state.push(InstanceState {
            waiting_preds: (0..dag.len()).map(|n| dag.predecessors(n).len()).collect(),
            remaining: dag.len(),
        });
        self.enqueue(id, app, dag.entry(), None, now);
    }

    fn enqueue(&mut self, instance: usize, app: usize, node: usize, pred_node: Option<usize>, now: f64) {
        let job = self.trace.jobs.len();
        self.trace.jobs.push(JobRecord { id: job, instance, app, node, enqueued_ms: now, pred_node, task: None });
        let arrival = self.trace.instances[instance].arrival_ms;
        self.queues.push(
            (app, node),
            QueuedJob { job, instance, instance_arrival_ms: arrival, enqueued_ms: now, pred_node },
        );
        self.observe(app, node, now);
        self.schedule_tick(now);
    }

    fn observe(&mut self, app: usize, node: usize, now: f64) {
        let key = (app, node);
        let estimate = self.ewma.entry(key).or_default().observe(now, self.params.ewma_lambda);
        if !self.params.prewarm {
            return;
        }
        let Some(estimate) = estimate else { return };
        let function = self.world.function_of(app, node);
        let cold = self.world.functions[function].cold_start_ms;
        let at = now + estimate - cold;
        if at <= now {
            return;
        }
        let (target, cfg) = match self.last_used.get(&key) {
            Some(&used) => used,
            None => {
                let dag = &self.world.apps[app];
                (home_invoker(dag.id(), dag.name(node), self.cluster.len()), Configuration::MIN)
            }
        };
        self.push(at, EventKind::Prewarm { node: target, function, cfg });
    }

    fn on_prewarm(&mut self, node: usize, function: usize, cfg: Configuration, now: f64) {
        let ready = now + self.world.functions[function].cold_start_ms;
        if self.cluster.warm_until(node, function, cfg, ready) {
            return;
        }
        self.cluster.add_warm(node, function, cfg, ready, ready + self.params.keep_alive_ms);
        self.trace.prewarms += 1;
    }

    fn on_tick(&mut self, now: f64) -> Result<()> {
        self.pending_ticks.remove(&now.to_bits());
        let launches = self.controller.tick(self.world, &mut self.queues, &mut self.cluster, now)?;
        for launch in launches {
            let (app, node) = launch.key;
            let function = self.world.function_of(app, node);
            let spec = &self.world.functions[function];
            let remote = launch.jobs.iter().filter(|j| j.pred_node.is_some_and(|p| p != launch.node)).count();
            let transfer_ms = if remote == 0 {
                0.0
            } else {
                transfer_delay(remote as f64 * spec.input_size_mb, false, &self.params.transfer)
            };
            let cold_start_ms = if launch.warm { 0.0 } else { spec.cold_start_ms };
            let profile_ms = self.world.profiles.exec_ms(&spec.id, launch.config)?;
            // Noise is keyed by the task's first job so that runs differing
            // only in scheduling draw the same samples.
            let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
            rng.set_stream(((launch.jobs[0].instance as u64) << 16) | node as u64);
            let exec_ms = sample_exec_time(profile_ms, self.params.noise_sigma, &mut rng);
            let finish_ms = now + launch.overhead_ms + transfer_ms + cold_start_ms + exec_ms;
            let id = self.trace.tasks.len();
            for j in &launch.jobs {
                self.trace.jobs[j.job].task = Some(id);
            }
            self.last_used.insert(launch.key, (launch.node, launch.config));
            self.trace.tasks.push(TaskRecord {
                id,
                app,
                node,
                function,
                invoker: launch.node,
                config: launch.config,
                jobs: launch.jobs.iter().map(|j| j.job).collect(),
                decision_ms: now,
                overhead_ms: launch.overhead_ms,
                transfer_ms,
                cold_start_ms,
                exec_ms,
                finish_ms,
                warm: launch.warm,
                forced: launch.forced,
                queue_len: launch.queue_len,
                planned_batch: launch.planned_batch,
            });
            self.push(finish_ms, EventKind::TaskComplete(id));
        }
        if !self.controller.recheck().is_empty() {
            let retry = now + self.controller.policy().params().controller_period_ms;
            let covered = self.pending_ticks.range(now.to_bits()..=retry.to_bits()).next().is_some();
            if !covered {
                self.schedule_tick(retry);
            }
        }
        Ok(())
    }

    fn on_complete(&mut self, task: usize, now: f64) {
        let (invoker, function, cfg, app, node) = {
            let t = &self.trace.tasks[task];
            (t.invoker, t.function, t.config, t.app, t.node)
        };
        self.cluster.release(invoker, cfg);
        self.cluster.add_warm(invoker, function, cfg, now, now + self.params.keep_alive_ms);
        let world = self.world;
        let dag = &world.apps[app];
        let jobs = self.trace.tasks[task].jobs.clone();
        for job in jobs {
            let instance = self.trace.jobs[job].instance;
            let st = &mut self.state[instance];
            st.remaining -= 1;
            if st.remaining == 0 {
                self.trace.instances[instance].finish_ms = Some(now);
            }
            let mut ready = Vec::new();
            for &s in dag.successors(node) {
                let st = &mut self.state[instance];
                st.waiting_preds[s] -= 1;
                if st.waiting_preds[s] == 0 {
                    ready.push(s);
                }
            }
            for s in ready {
                self.enqueue(instance, app, s, Some(invoker), now);
            }
        }
        self.schedule_tick(now);
    }
}
