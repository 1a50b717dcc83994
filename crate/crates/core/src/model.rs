//! Domain types shared by every part of the scheduler: functions, application
//! DAGs, resource configurations, performance profiles and pricing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MS_PER_HOUR: f64 = 3_600_000.0;

/// A serverless DNN function and its measured baseline characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub id: String,
    /// Execution time at the minimum configuration `(1,1,1)`.
    pub base_exec_ms: f64,
    pub cold_start_ms: f64,
    #[serde(default)]
    pub input_size_mb: f64,
}

impl FunctionSpec {
    pub fn new(id: impl Into<String>, base_exec_ms: f64, cold_start_ms: f64, input_size_mb: f64) -> Self {
        Self { id: id.into(), base_exec_ms, cold_start_ms, input_size_mb }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::InvalidFunction { id: self.id.clone(), reason: reason.into() });
        if self.id.is_empty() {
            return bad("empty id");
        }
        if !(self.base_exec_ms > 0.0 && self.base_exec_ms.is_finite()) {
            return bad("base_exec_ms must be > 0");
        }
        if !(self.cold_start_ms >= 0.0 && self.cold_start_ms.is_finite()) {
            return bad("cold_start_ms must be >= 0");
        }
        if !(self.input_size_mb >= 0.0 && self.input_size_mb.is_finite()) {
            return bad("input_size_mb must be >= 0");
        }
        Ok(())
    }
}

/// One `(batch size, #vCPUs, #vGPUs)` resource triple.
///
/// The derived ordering is batch-major, then vCPUs, then vGPUs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub batch: u32,
    pub vcpus: u32,
    pub vgpus: u32,
}

impl Configuration {
    pub const MIN: Configuration = Configuration { batch: 1, vcpus: 1, vgpus: 1 };

    pub const fn new(batch: u32, vcpus: u32, vgpus: u32) -> Self {
        Self { batch, vcpus, vgpus }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.batch, self.vcpus, self.vgpus)
    }
}

/// Allowed values per configuration dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigGrid {
    pub batch: Vec<u32>,
    pub vcpus: Vec<u32>,
    pub vgpus: Vec<u32>,
}

impl Default for ConfigGrid {
    fn default() -> Self {
        Self { batch: vec![1, 2, 4, 8], vcpus: (1..=8).collect(), vgpus: (1..=4).collect() }
    }
}

impl ConfigGrid {
    pub fn ranges(
        batch: std::ops::RangeInclusive<u32>,
        vcpus: std::ops::RangeInclusive<u32>,
        vgpus: std::ops::RangeInclusive<u32>,
    ) -> Self {
        Self { batch: batch.collect(), vcpus: vcpus.collect(), vgpus: vgpus.collect() }
    }

    pub fn max_batch(&self) -> u32 {
        self.batch.iter().copied().max().unwrap_or(0)
    }

    pub fn max_vcpus(&self) -> u32 {
        self.vcpus.iter().copied().max().unwrap_or(0)
    }

    pub fn max_vgpus(&self) -> u32 {
        self.vgpus.iter().copied().max().unwrap_or(0)
    }

    fn axis(values: &[u32]) -> Result<Vec<u32>> {
        if values.is_empty() || values.contains(&0) {
            return Err(Error::EmptyConfigSpace);
        }
        let set: BTreeSet<u32> = values.iter().copied().collect();
        Ok(set.into_iter().collect())
    }
}

/// Full Cartesian product of the grid, batch-major, then vCPUs, then vGPUs.
pub fn enumerate_configs(grid: &ConfigGrid) -> Result<Vec<Configuration>> {
    let batch = ConfigGrid::axis(&grid.batch)?;
    let vcpus = ConfigGrid::axis(&grid.vcpus)?;
    let vgpus = ConfigGrid::axis(&grid.vgpus)?;
    let mut out = Vec::with_capacity(batch.len() * vcpus.len() * vgpus.len());
    for &b in &batch {
        for &c in &vcpus {
            for &g in &vgpus {
                out.push(Configuration::new(b, c, g));
            }
        }
    }
    Ok(out)
}

/// Parameters of the synthetic latency model
/// `t(b,c,g) = base * (1 + kb*(b-1)) / (1 + kc*(c-1) + kg*(g-1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileModel {
    pub kappa_batch: f64,
    pub kappa_cpu: f64,
    pub kappa_gpu: f64,
}

impl Default for ProfileModel {
    fn default() -> Self {
        Self { kappa_batch: 0.6, kappa_cpu: 0.15, kappa_gpu: 0.35 }
    }
}

pub fn synth_exec_time(spec: &FunctionSpec, cfg: Configuration, model: &ProfileModel) -> f64 {
    let batch_factor = 1.0 + model.kappa_batch * f64::from(cfg.batch - 1);
    let speedup = 1.0 + model.kappa_cpu * f64::from(cfg.vcpus - 1) + model.kappa_gpu * f64::from(cfg.vgpus - 1);
    spec.base_exec_ms * batch_factor / speedup
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub config: Configuration,
    pub exec_ms: f64,
}

/// Profiled latencies of one function over the configuration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionProfile {
    entries: Vec<ProfileEntry>,
    by_latency: Vec<usize>,
}

impl FunctionProfile {
    fn new(function: &str, mut entries: Vec<ProfileEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::MissingProfile { function: function.into(), config: None });
        }
        entries.sort_by_key(|e| e.config);
        for w in entries.windows(2) {
            if w[0].config == w[1].config {
                return Err(Error::InvalidProfile {
                    function: function.into(),
                    reason: format!("duplicate entry for {}", w[0].config),
                });
            }
        }
        if let Some(e) = entries.iter().find(|e| !(e.exec_ms > 0.0 && e.exec_ms.is_finite())) {
            return Err(Error::InvalidProfile {
                function: function.into(),
                reason: format!("exec_ms must be > 0 at {}", e.config),
            });
        }
        let mut by_latency: Vec<usize> = (0..entries.len()).collect();
        by_latency.sort_by(|&a, &b| {
            entries[a].exec_ms.total_cmp(&entries[b].exec_ms).then(entries[a].config.cmp(&entries[b].config))
        });
        Ok(Self { entries, by_latency })
    }

    /// Entries in configuration order.
    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    /// Entries in nondecreasing latency order (ties by configuration).
    pub fn by_latency(&self) -> impl Iterator<Item = &ProfileEntry> + '_ {
        self.by_latency.iter().map(move |&i| &self.entries[i])
    }

    pub fn exec_ms(&self, cfg: Configuration) -> Option<f64> {
        self.entries.binary_search_by(|e| e.config.cmp(&cfg)).ok().map(|i| self.entries[i].exec_ms)
    }

    pub fn min_exec_ms(&self) -> f64 {
        self.entries[self.by_latency[0]].exec_ms
    }

    pub fn mean_exec_ms(&self) -> f64 {
        self.entries.iter().map(|e| e.exec_ms).sum::<f64>() / self.entries.len() as f64
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `(function, configuration) -> execution time` for every function of a scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileTable {
    functions: BTreeMap<String, FunctionProfile>,
}

impl ProfileTable {
    /// Builds a table from the synthetic latency model.
    pub fn synthesize(specs: &[FunctionSpec], grid: &ConfigGrid, model: &ProfileModel) -> Result<Self> {
        let configs = enumerate_configs(grid)?;
        let mut functions = BTreeMap::new();
        for spec in specs {
            spec.validate()?;
            let entries = configs
                .iter()
                .map(|&config| ProfileEntry { config, exec_ms: synth_exec_time(spec, config, model) })
                .collect();
            functions.insert(spec.id.clone(), FunctionProfile::new(&spec.id, entries)?);
        }
        Ok(Self { functions })
    }

    /// Builds a table from measured entries, requiring full coverage of `grid`.
    pub fn from_entries<'a, I>(grid: &ConfigGrid, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, ProfileEntry)>,
    {
        let configs = enumerate_configs(grid)?;
        let allowed: BTreeSet<Configuration> = configs.iter().copied().collect();
        let mut raw: BTreeMap<String, Vec<ProfileEntry>> = BTreeMap::new();
        for (function, entry) in entries {
            if !allowed.contains(&entry.config) {
                return Err(Error::InvalidProfile {
                    function: function.into(),
                    reason: format!("{} is outside the configuration grid", entry.config),
                });
            }
            raw.entry(function.to_string()).or_default().push(entry);
        }
        let mut functions = BTreeMap::new();
        for (function, entries) in raw {
            let profile = FunctionProfile::new(&function, entries)?;
            if let Some(&missing) = configs.iter().find(|&&c| profile.exec_ms(c).is_none()) {
                return Err(Error::MissingProfile { function, config: Some(missing) });
            }
            functions.insert(function, profile);
        }
        Ok(Self { functions })
    }

    pub fn get(&self, function: &str) -> Result<&FunctionProfile> {
        self.functions
            .get(function)
            .ok_or_else(|| Error::MissingProfile { function: function.into(), config: None })
    }

    pub fn exec_ms(&self, function: &str, cfg: Configuration) -> Result<f64> {
        self.get(function)?
            .exec_ms(cfg)
            .ok_or_else(|| Error::MissingProfile { function: function.into(), config: Some(cfg) })
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, &FunctionProfile)> {
        self.functions.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Returns a copy whose per-function entries are produced by `map`.
    pub fn remap<F>(&self, mut map: F) -> Result<Self>
    where
        F: FnMut(&str, &FunctionProfile) -> Vec<ProfileEntry>,
    {
        let mut functions = BTreeMap::new();
        for (id, profile) in &self.functions {
            functions.insert(id.clone(), FunctionProfile::new(id, map(id, profile))?);
        }
        Ok(Self { functions })
    }
}

/// Resource prices and the weights of the abstract objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pricing {
    pub vcpu_per_hour: f64,
    pub vgpu_per_hour: f64,
    /// Weight of vCPUs in the abstract objective; vGPUs get `1 - alpha`.
    pub alpha: f64,
}

impl Default for Pricing {
    fn default() -> Self {
        let (cpu, gpu) = (0.034, 0.67);
        Self { vcpu_per_hour: cpu, vgpu_per_hour: gpu, alpha: cpu / (cpu + gpu) }
    }
}

impl Pricing {
    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::InvalidScenario { field: field.into(), reason: reason.into() });
        if !(self.vcpu_per_hour >= 0.0 && self.vcpu_per_hour.is_finite()) {
            return bad("pricing.vcpu_per_hour", "must be >= 0");
        }
        if !(self.vgpu_per_hour >= 0.0 && self.vgpu_per_hour.is_finite()) {
            return bad("pricing.vgpu_per_hour", "must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("pricing.alpha", "must lie in [0, 1]");
        }
        Ok(())
    }

    /// Dollars per millisecond of holding `cfg`'s resources.
    pub fn rate_per_ms(&self, cfg: Configuration) -> f64 {
        (f64::from(cfg.vcpus) * self.vcpu_per_hour + f64::from(cfg.vgpus) * self.vgpu_per_hour) / MS_PER_HOUR
    }

    /// Dollars for holding `cfg`'s resources for `duration_ms`.
    pub fn resource_cost(&self, cfg: Configuration, duration_ms: f64) -> f64 {
        (f64::from(cfg.vcpus) * self.vcpu_per_hour + f64::from(cfg.vgpus) * self.vgpu_per_hour) * (duration_ms / MS_PER_HOUR)
    }

    /// `(alpha * vcpus + beta * vgpus) * duration_ms`.
    pub fn weighted_usage(&self, cfg: Configuration, duration_ms: f64) -> f64 {
        (self.alpha * f64::from(cfg.vcpus) + self.beta() * f64::from(cfg.vgpus)) * duration_ms
    }
}

/// Monetary cost of one job when `cfg` runs a batch for `exec_ms`.
pub fn per_job_cost(cfg: Configuration, exec_ms: f64, pricing: &Pricing) -> f64 {
    pricing.resource_cost(cfg, exec_ms) / f64::from(cfg.batch)
}

/// Abstract weighted cost of one job: `(alpha*vcpus + beta*vgpus) * exec_ms / batch`.
pub fn per_job_weighted_cost(cfg: Configuration, exec_ms: f64, pricing: &Pricing) -> f64 {
    pricing.weighted_usage(cfg, exec_ms) / f64::from(cfg.batch)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDag {
    id: String,
    nodes: Vec<String>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    slo_ms: f64,
}

/// A workflow of functions with an end-to-end latency objective.
///
/// Construction checks that the graph is acyclic with exactly one entry and
/// one exit node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDag", into = "RawDag")]
pub struct ApplicationDag {
    id: String,
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
    slo_ms: f64,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl TryFrom<RawDag> for ApplicationDag {
    type Error = Error;
    fn try_from(raw: RawDag) -> Result<Self> {
        ApplicationDag::new(raw.id, raw.nodes, raw.edges, raw.slo_ms)
    }
}

impl From<ApplicationDag> for RawDag {
    fn from(dag: ApplicationDag) -> Self {
        RawDag { id: dag.id, nodes: dag.nodes, edges: dag.edges, slo_ms: dag.slo_ms }
    }
}

impl ApplicationDag {
    pub fn new(
        id: impl Into<String>,
        nodes: Vec<String>,
        edges: Vec<(String, String)>,
        slo_ms: f64,
    ) -> Result<Self> {
        let id = id.into();
        let bad = |reason: String| Error::InvalidDag { app: id.clone(), reason };
        if nodes.is_empty() {
            return Err(bad("no functions".into()));
        }
        if !(slo_ms > 0.0 && slo_ms.is_finite()) {
            return Err(bad("slo_ms must be > 0".into()));
        }
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(bad(format!("duplicate function `{n}`")));
            }
        }
        let mut succ = vec![Vec::new(); nodes.len()];
        let mut pred = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        for (a, b) in &edges {
            let (&ia, &ib) = match (index.get(a.as_str()), index.get(b.as_str())) {
                (Some(ia), Some(ib)) => (ia, ib),
                _ => return Err(bad(format!("edge {a} -> {b} references an unknown function"))),
            };
            if ia == ib {
                return Err(bad(format!("self loop on `{a}`")));
            }
            if !seen.insert((ia, ib)) {
                return Err(bad(format!("duplicate edge {a} -> {b}")));
            }
            succ[ia].push(ib);
            pred[ib].push(ia);
        }
        // Kahn's algorithm; the ready set is ordered for a deterministic topological order.
        let mut indeg: Vec<usize> = pred.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(nodes.len());
        while let Some(n) = ready.pop_first() {
            topo.push(n);
            for &s in &succ[n] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        if topo.len() != nodes.len() {
            return Err(bad("graph contains a cycle".into()));
        }
        let entries: Vec<String> = (0..nodes.len()).filter(|&i| pred[i].is_empty()).map(|i| nodes[i].clone()).collect();
        if entries.len() != 1 {
            return Err(Error::MultipleEntries { app: id, entries });
        }
        let exits: Vec<&str> = (0..nodes.len()).filter(|&i| succ[i].is_empty()).map(|i| nodes[i].as_str()).collect();
        if exits.len() != 1 {
            return Err(bad(format!("DAG must have a unique exit, found {}", exits.join(", "))));
        }
        Ok(Self { id, nodes, edges, slo_ms, succ, pred, topo })
    }

    /// A linear pipeline `f0 -> f1 -> ...`.
    pub fn chain(id: impl Into<String>, functions: &[&str], slo_ms: f64) -> Result<Self> {
        let nodes = functions.iter().map(|s| s.to_string()).collect();
        let edges = functions.windows(2).map(|w| (w[0].to_string(), w[1].to_string())).collect();
        Self::new(id, nodes, edges, slo_ms)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn slo_ms(&self) -> f64 {
        self.slo_ms
    }

    pub fn with_slo(&self, slo_ms: f64) -> Result<Self> {
        Self::new(self.id.clone(), self.nodes.clone(), self.edges.clone(), slo_ms)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i]
    }

    pub fn index_of(&self, function: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == function)
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.pred[i]
    }

    pub fn entry(&self) -> usize {
        self.topo[0]
    }

    pub fn exit(&self) -> usize {
        *self.topo.last().unwrap()
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Longest entry-to-exit path where node `i` weighs `weight(i)`.
    pub fn critical_path<F: Fn(usize) -> f64>(&self, weight: F) -> f64 {
        let mut best = vec![0.0_f64; self.len()];
        for &n in &self.topo {
            let before = self.pred[n].iter().map(|&p| best[p]).fold(0.0, f64::max);
            best[n] = before + weight(n);
        }
        best[self.exit()]
    }

    /// The sub-workflow made of `function` and everything downstream of it.
    pub fn suffix(&self, function: &str, slo_ms: f64) -> Result<Self> {
        let start = self
            .index_of(function)
            .ok_or_else(|| Error::InvalidDag { app: self.id.clone(), reason: format!("no function `{function}`") })?;
        let mut keep = vec![false; self.len()];
        keep[start] = true;
        for &n in &self.topo {
            if keep[n] {
                for &s in &self.succ[n] {
                    keep[s] = true;
                }
            }
        }
        let nodes = self.nodes.iter().enumerate().filter(|(i, _)| keep[*i]).map(|(_, n)| n.clone()).collect();
        let edges = self
            .edges
            .iter()
            .filter(|(a, b)| keep[self.index_of(a).unwrap()] && keep[self.index_of(b).unwrap()])
            .cloned()
            .collect();
        Self::new(self.id.clone(), nodes, edges, slo_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deblur() -> FunctionSpec {
        FunctionSpec::new("deblur", 319.0, 22343.0, 1.1)
    }

    #[test]
    fn enumerate_singleton_grid() {
        let grid = ConfigGrid::ranges(1..=1, 1..=1, 1..=1);
        assert_eq!(enumerate_configs(&grid).unwrap(), vec![Configuration::MIN]);
    }

    #[test]
    fn enumerate_is_batch_major() {
        let grid = ConfigGrid::ranges(1..=2, 1..=2, 1..=1);
        let got = enumerate_configs(&grid).unwrap();
        let want = [(1, 1, 1), (1, 2, 1), (2, 1, 1), (2, 2, 1)].map(|(b, c, g)| Configuration::new(b, c, g));
        assert_eq!(got, want);
    }

    #[test]
    fn enumerate_full_grid_has_256_configs() {
        let grid = ConfigGrid::ranges(1..=8, 1..=8, 1..=4);
        assert_eq!(enumerate_configs(&grid).unwrap().len(), 256);
    }

    #[test]
    fn enumerate_rejects_empty_axis() {
        let grid = ConfigGrid { batch: vec![], vcpus: vec![1], vgpus: vec![1] };
        let err = enumerate_configs(&grid).unwrap_err();
        assert_eq!(err.to_string(), "empty configuration space");
        let grid = ConfigGrid { batch: vec![0], vcpus: vec![1], vgpus: vec![1] };
        assert_eq!(enumerate_configs(&grid).unwrap_err(), Error::EmptyConfigSpace);
    }

    #[test]
    fn synth_anchor_matches_base() {
        let sr = FunctionSpec::new("super_resolution", 86.0, 3503.0, 2.7);
        assert_eq!(synth_exec_time(&sr, Configuration::MIN, &ProfileModel::default()), 86.0);
        assert_eq!(synth_exec_time(&deblur(), Configuration::MIN, &ProfileModel::default()), 319.0);
    }

    #[test]
    fn synth_deblur_fixture() {
        // 319 * (1 + 0.6*3) / (1 + 0.15*1 + 0.35*1) = 319 * 2.8 / 1.5
        let t = synth_exec_time(&deblur(), Configuration::new(4, 2, 2), &ProfileModel::default());
        assert!((t - 595.466_666_666_666_7).abs() < 1e-9, "{t}");
    }

    #[test]
    fn per_job_cost_matches_hand_arithmetic() {
        let pricing = Pricing::default();
        let c = per_job_cost(Configuration::new(2, 4, 1), 100.0, &pricing);
        assert!((c - 1.119_444_444_444_444_4e-5).abs() < 1e-15, "{c}");

        let free = Pricing { vcpu_per_hour: 0.0, vgpu_per_hour: 0.0, alpha: 0.5 };
        assert_eq!(per_job_cost(Configuration::MIN, 100.0, &free), 0.0);

        let one = per_job_cost(Configuration::new(1, 4, 1), 100.0, &pricing);
        let two = per_job_cost(Configuration::new(2, 4, 1), 100.0, &pricing);
        assert_eq!(two, one / 2.0);
    }

    #[test]
    fn weighted_cost_uses_alpha_and_beta() {
        let pricing = Pricing { vcpu_per_hour: 1.0, vgpu_per_hour: 1.0, alpha: 0.25 };
        let w = per_job_weighted_cost(Configuration::new(2, 4, 2), 10.0, &pricing);
        assert!((w - (0.25 * 4.0 + 0.75 * 2.0) * 10.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn profile_views_are_sorted_permutations() {
        let table = ProfileTable::synthesize(&[deblur()], &ConfigGrid::default(), &ProfileModel::default()).unwrap();
        let p = table.get("deblur").unwrap();
        let sorted: Vec<_> = p.by_latency().collect();
        assert_eq!(sorted.len(), 128);
        assert!(sorted.windows(2).all(|w| w[0].exec_ms <= w[1].exec_ms));
        let mut configs: Vec<_> = sorted.iter().map(|e| e.config).collect();
        configs.sort();
        assert_eq!(configs, enumerate_configs(&ConfigGrid::default()).unwrap());
    }

    #[test]
    fn from_entries_reports_missing_config() {
        let grid = ConfigGrid::ranges(1..=1, 1..=2, 1..=1);
        let entries = vec![("f", ProfileEntry { config: Configuration::MIN, exec_ms: 5.0 })];
        let err = ProfileTable::from_entries(&grid, entries).unwrap_err();
        assert_eq!(err, Error::MissingProfile { function: "f".into(), config: Some(Configuration::new(1, 2, 1)) });
    }

    #[test]
    fn dag_rejects_multiple_entries() {
        let err = ApplicationDag::new(
            "app",
            vec!["a".into(), "b".into(), "c".into()],
            vec![("a".into(), "c".into()), ("b".into(), "c".into())],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("DAG must have unique entry"), "{err}");
    }

    #[test]
    fn dag_rejects_cycles_and_multiple_exits() {
        let cyc = ApplicationDag::new(
            "app",
            vec!["a".into(), "b".into(), "c".into()],
            vec![("a".into(), "b".into()), ("b".into(), "c".into()), ("c".into(), "b".into())],
            1.0,
        );
        assert!(cyc.unwrap_err().to_string().contains("cycle"));
        let fork = ApplicationDag::new(
            "app",
            vec!["a".into(), "b".into(), "c".into()],
            vec![("a".into(), "b".into()), ("a".into(), "c".into())],
            1.0,
        );
        assert!(fork.unwrap_err().to_string().contains("unique exit"));
    }

    #[test]
    fn dag_json_round_trip_and_suffix() {
        let dag: ApplicationDag = serde_json::from_str(
            r#"{"id":"d","nodes":["a","b","c","d"],"edges":[["a","b"],["a","c"],["b","d"],["c","d"]],"slo_ms":10}"#,
        )
        .unwrap();
        assert_eq!(dag.name(dag.entry()), "a");
        assert_eq!(dag.name(dag.exit()), "d");
        let back: ApplicationDag = serde_json::from_str(&serde_json::to_string(&dag).unwrap()).unwrap();
        assert_eq!(back, dag);
        let suffix = dag.suffix("b", 5.0).unwrap();
        assert_eq!(suffix.nodes(), &["b".to_string(), "d".to_string()]);
        assert_eq!(suffix.slo_ms(), 5.0);
        assert_eq!(dag.critical_path(|i| [1.0, 5.0, 2.0, 1.0][i]), 7.0);
    }
}
