//! Run summaries and schedule validation.

use std::fmt;

use crate::cluster_sim::SimTrace;
use crate::model::Pricing;

/// Nearest-rank percentile of unsorted data; 0 for empty input.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Cost of `cost` relative to a reference (1.0 = same as the reference).
pub fn normalized_cost(cost: f64, reference: f64) -> f64 {
    cost / reference
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scope: String,
    pub instances: usize,
    pub finished: usize,
    pub slo_hits: usize,
    pub slo_hit_rate: f64,
    pub gamma: usize,
    pub gamma_met: bool,
    pub total_cost: f64,
    pub weighted_cost: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    pub latency_p99_ms: f64,
    pub tasks: usize,
    pub cold_starts: usize,
    pub config_misses: usize,
    pub config_miss_rate: f64,
    pub mean_queue_wait_ms: f64,
    pub decisions: usize,
    pub overhead_mean_ms: f64,
    pub overhead_p50_ms: f64,
    pub overhead_p95_ms: f64,
    pub overhead_p99_ms: f64,
}

pub const SUMMARY_HEADER: [&str; 22] = [
    "scope",
    "instances",
    "finished",
    "slo_hits",
    "slo_hit_rate",
    "gamma",
    "gamma_met",
    "total_cost",
    "weighted_cost",
    "latency_p50_ms",
    "latency_p95_ms",
    "latency_p99_ms",
    "tasks",
    "cold_starts",
    "config_misses",
    "config_miss_rate",
    "mean_queue_wait_ms",
    "decisions",
    "overhead_mean_ms",
    "overhead_p50_ms",
    "overhead_p95_ms",
    "overhead_p99_ms",
];

impl SummaryRow {
    /// Field values in `SUMMARY_HEADER` order.
    pub fn values(&self) -> Vec<String> {
        vec![
            self.scope.clone(),
            self.instances.to_string(),
            self.finished.to_string(),
            self.slo_hits.to_string(),
            self.slo_hit_rate.to_string(),
            self.gamma.to_string(),
            self.gamma_met.to_string(),
            self.total_cost.to_string(),
            self.weighted_cost.to_string(),
            self.latency_p50_ms.to_string(),
            self.latency_p95_ms.to_string(),
            self.latency_p99_ms.to_string(),
            self.tasks.to_string(),
            self.cold_starts.to_string(),
            self.config_misses.to_string(),
            self.config_miss_rate.to_string(),
            self.mean_queue_wait_ms.to_string(),
            self.decisions.to_string(),
            self.overhead_mean_ms.to_string(),
            self.overhead_p50_ms.to_string(),
            self.overhead_p95_ms.to_string(),
            self.overhead_p99_ms.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub overall: SummaryRow,
    pub per_app: Vec<SummaryRow>,
}

impl RunSummary {
    pub fn rows(&self) -> impl Iterator<Item = &SummaryRow> {
        std::iter::once(&self.overall).chain(self.per_app.iter())
    }
}

/// Summarizes the instances arriving at or after `warmup_ms`. Unfinished
/// instances count as misses. Each task's cost runs from its start (after the
/// scheduling decision) to its finish, cut at the end of the run, and is split
/// evenly over the jobs in its batch; only jobs of measured instances are
/// charged.
pub fn summarize(trace: &SimTrace, pricing: &Pricing, gamma: usize) -> RunSummary {
    let from = trace.warmup_ms;
    let scope = |app: Option<usize>| {
        let in_scope = move |a: usize| app.is_none_or(|x| x == a);
        let instances: Vec<_> =
            trace.instances.iter().filter(|i| in_scope(i.app) && i.arrival_ms >= from).collect();
        let latencies: Vec<f64> = instances.iter().filter_map(|i| i.finish_ms.map(|f| f - i.arrival_ms)).collect();
        let hits = instances.iter().filter(|i| i.finish_ms.is_some_and(|f| f - i.arrival_ms <= i.slo_ms)).count();
        let mut total_cost = 0.0;
        let mut weighted_cost = 0.0;
        for t in trace.tasks.iter().filter(|t| in_scope(t.app)) {
            let measured = t.jobs.iter().filter(|&&j| trace.instances[trace.jobs[j].instance].arrival_ms >= from).count();
            if measured == 0 {
                continue;
            }
            let share = measured as f64 / t.jobs.len() as f64;
            let held = (t.finish_ms.min(trace.end_ms) - t.start_ms()).max(0.0);
            total_cost += share * pricing.resource_cost(t.config, held);
            weighted_cost += share * pricing.weighted_usage(t.config, held);
        }
        let tasks: Vec<_> = trace.tasks.iter().filter(|t| in_scope(t.app) && t.decision_ms >= from).collect();
        let misses = tasks.iter().filter(|t| t.planned_batch as usize > t.queue_len).count();
        let waits: Vec<f64> = trace
            .jobs
            .iter()
            .filter(|j| in_scope(j.app) && trace.instances[j.instance].arrival_ms >= from)
            .filter_map(|j| j.task.map(|t| trace.tasks[t].decision_ms - j.enqueued_ms))
            .collect();
        let overheads: Vec<f64> = trace
            .decisions
            .iter()
            .filter(|d| in_scope(d.key.0) && d.time_ms >= from)
            .map(|d| d.overhead_ms)
            .collect();
        SummaryRow {
            scope: app.map_or_else(|| "all".to_string(), |a| trace.app_ids[a].clone()),
            instances: instances.len(),
            finished: latencies.len(),
            slo_hits: hits,
            slo_hit_rate: ratio(hits, instances.len()),
            gamma,
            gamma_met: hits > gamma,
            total_cost,
            weighted_cost,
            latency_p50_ms: percentile(&latencies, 50.0),
            latency_p95_ms: percentile(&latencies, 95.0),
            latency_p99_ms: percentile(&latencies, 99.0),
            tasks: tasks.len(),
            cold_starts: tasks.iter().filter(|t| !t.warm).count(),
            config_misses: misses,
            config_miss_rate: ratio(misses, tasks.len()),
            mean_queue_wait_ms: mean(&waits),
            decisions: overheads.len(),
            overhead_mean_ms: mean(&overheads),
            overhead_p50_ms: percentile(&overheads, 50.0),
            overhead_p95_ms: percentile(&overheads, 95.0),
            overhead_p99_ms: percentile(&overheads, 99.0),
        }
    };
    RunSummary { overall: scope(None), per_app: (0..trace.app_ids.len()).map(|a| scope(Some(a))).collect() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    JobInTwoTasks { job: usize, tasks: Vec<usize> },
    JobNeverScheduled { job: usize },
    JobTaskMismatch { job: usize, task: usize },
    BatchSizeMismatch { task: usize, batch: u32, jobs: usize },
    BatchExceedsQueue { task: usize, batch: u32, queue_len: usize },
    Capacity { node: usize, time_ms: f64, vcpus: u32, vgpus: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::JobInTwoTasks { job, tasks } => write!(f, "job in two tasks: job {job} in tasks {tasks:?}"),
            Violation::JobNeverScheduled { job } => write!(f, "job never scheduled: job {job}"),
            Violation::JobTaskMismatch { job, task } => write!(f, "job {job} is not recorded in task {task}"),
            Violation::BatchSizeMismatch { task, batch, jobs } => {
                write!(f, "task {task} has batch {batch} but {jobs} jobs")
            }
            Violation::BatchExceedsQueue { task, batch, queue_len } => {
                write!(f, "batch exceeds queue length: task {task} batch {batch} > {queue_len}")
            }
            Violation::Capacity { node, time_ms, vcpus, vgpus } => {
                write!(f, "capacity exceeded on node {node} at {time_ms} ms: {vcpus} vCPUs, {vgpus} vGPUs")
            }
        }
    }
}

/// Checks the job partition, per-node capacity at all times, and batch sizes.
pub fn validate_schedule(trace: &SimTrace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); trace.jobs.len()];
    for t in &trace.tasks {
        for &j in &t.jobs {
            owners[j].push(t.id);
        }
        if t.config.batch as usize != t.jobs.len() {
            out.push(Violation::BatchSizeMismatch { task: t.id, batch: t.config.batch, jobs: t.jobs.len() });
        }
        if t.config.batch as usize > t.queue_len {
            out.push(Violation::BatchExceedsQueue { task: t.id, batch: t.config.batch, queue_len: t.queue_len });
        }
    }
    let truncated = trace.truncated;
    for (job, tasks) in owners.iter().enumerate() {
        match (tasks.len(), trace.jobs[job].task) {
            (0, None) if !truncated => out.push(Violation::JobNeverScheduled { job }),
            (1, Some(t)) if t == tasks[0] => {}
            (0, None) => {}
            (1, _) | (0, Some(_)) => {
                out.push(Violation::JobTaskMismatch { job, task: tasks.first().copied().or(trace.jobs[job].task).unwrap() })
            }
            _ => out.push(Violation::JobInTwoTasks { job, tasks: tasks.clone() }),
        }
    }
    for node in 0..trace.nodes {
        // (time, release-before-acquire, dv, dg)
        let mut edges: Vec<(f64, u8, i64, i64)> = Vec::new();
        for t in trace.tasks.iter().filter(|t| t.invoker == node) {
            let (c, g) = (t.config.vcpus as i64, t.config.vgpus as i64);
            edges.push((t.decision_ms, 1, c, g));
            edges.push((t.finish_ms, 0, -c, -g));
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (mut c, mut g) = (0i64, 0i64);
        for (time_ms, _, dc, dg) in edges {
            c += dc;
            g += dg;
            if c > trace.vcpus_per_node as i64 || g > trace.vgpus_per_node as i64 {
                out.push(Violation::Capacity { node, time_ms, vcpus: c as u32, vgpus: g as u32 });
            }
        }
    }
    out
}
