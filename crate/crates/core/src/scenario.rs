//! Scenario files, presets, seeded runs and parameter sweeps.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster_sim::{ClusterParams, SimParams, SimTrace, Simulation, World};
use crate::dispatch::SchedulerParams;
use crate::error::{Error, Result};
use crate::metrics::{summarize, validate_schedule, RunSummary, SummaryRow, Violation, SUMMARY_HEADER};
use crate::model::{
    enumerate_configs, ApplicationDag, ConfigGrid, Configuration, FunctionSpec, Pricing, ProfileEntry, ProfileModel,
    ProfileTable,
};
use crate::workload::{builtin_app_chains, builtin_functions, generate_trace, slo_for, Arrival, Regime, SloMode};

pub const PRESETS: [&str; 3] = ["strict-light", "moderate-normal", "relaxed-heavy"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadParams {
    pub regime: Regime,
    pub slo_mode: SloMode,
    /// Length of the measured window.
    pub horizon_ms: f64,
    /// Simulated time before the measured window; instances arriving earlier
    /// are excluded from the summary.
    pub warmup_ms: f64,
    /// Replaces the generated trace when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrivals: Option<Vec<Arrival>>,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            regime: Regime::Normal,
            slo_mode: SloMode::Moderate,
            horizon_ms: 60_000.0,
            warmup_ms: 600_000.0,
            arrivals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSpec {
    pub id: String,
    pub functions: Vec<String>,
    /// Defaults to a chain through `functions` in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(String, String)>>,
    /// Defaults to the SLO mode's factor times the minimum-configuration latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slo_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredProfile {
    pub function: String,
    pub batch: u32,
    pub vcpus: u32,
    pub vgpus: u32,
    pub exec_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Each node exposes one indivisible full-GPU unit.
    pub no_gpu_sharing: bool,
    /// Batch size fixed to 1.
    pub no_batching: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub scheduler: SchedulerParams,
    pub workload: WorkloadParams,
    pub cluster: ClusterParams,
    pub functions: Vec<FunctionSpec>,
    pub apps: Vec<AppSpec>,
    pub grid: ConfigGrid,
    pub profile_model: ProfileModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<MeasuredProfile>>,
    pub pricing: Pricing,
    pub sim: SimParams,
    pub ablation: Ablation,
    /// Hit-count threshold reported against.
    pub gamma: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 42,
            scheduler: SchedulerParams::default(),
            workload: WorkloadParams::default(),
            cluster: ClusterParams::default(),
            functions: builtin_functions(),
            apps: builtin_app_chains()
                .into_iter()
                .map(|(id, stages)| AppSpec {
                    id: id.into(),
                    functions: stages.into_iter().map(String::from).collect(),
                    edges: None,
                    slo_ms: None,
                })
                .collect(),
            grid: ConfigGrid::default(),
            profile_model: ProfileModel::default(),
            profiles: None,
            pricing: Pricing::default(),
            sim: SimParams::default(),
            ablation: Ablation::default(),
            gamma: 0,
        }
    }
}

/// Deterministic 64-bit seed for one subsystem.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to start a simulation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub world: World,
    pub arrivals: Vec<Arrival>,
    pub cluster: ClusterParams,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: SimTrace,
    pub summary: RunSummary,
    pub violations: Vec<Violation>,
}

impl RunOutput {
    pub fn trace_hash(&self) -> String {
        sha256_hex(self.trace.to_csv_string().as_bytes())
    }
}

impl Scenario {
    pub fn preset(name: &str) -> Option<Self> {
        let (slo_mode, regime) = match name {
            "strict-light" => (SloMode::Strict, Regime::Light),
            "moderate-normal" => (SloMode::Moderate, Regime::Normal),
            "relaxed-heavy" => (SloMode::Relaxed, Regime::Heavy),
            _ => return None,
        };
        let mut s = Scenario { name: name.into(), ..Scenario::default() };
        s.workload.regime = regime;
        s.workload.slo_mode = slo_mode;
        Some(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::InvalidScenario {
            field: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;
        de.end()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::InvalidScenario { field: field.into(), reason });
        self.scheduler.validate()?;
        self.sim.validate()?;
        self.pricing.validate()?;
        if !(self.workload.horizon_ms >= 0.0 && self.workload.horizon_ms.is_finite()) {
            return bad("workload.horizon_ms", "must be >= 0".into());
        }
        if !(self.workload.warmup_ms >= 0.0 && self.workload.warmup_ms.is_finite()) {
            return bad("workload.warmup_ms", "must be >= 0".into());
        }
        if self.cluster.nodes == 0 {
            return bad("cluster.nodes", "must be >= 1".into());
        }
        if self.cluster.vcpus_per_node == 0 || self.cluster.vgpus_per_node == 0 {
            return bad("cluster", "per-node capacity must be >= 1".into());
        }
        if self.apps.is_empty() {
            return bad("apps", "at least one application is required".into());
        }
        for (i, f) in self.functions.iter().enumerate() {
            f.validate().or_else(|e| bad(&format!("functions[{i}]"), e.to_string()))?;
        }
        for (i, a) in self.apps.iter().enumerate() {
            for f in &a.functions {
                if !self.functions.iter().any(|s| &s.id == f) {
                    return bad(&format!("apps[{i}].functions"), format!("unknown function `{f}`"));
                }
            }
        }
        if let Some(arrivals) = &self.workload.arrivals {
            for (i, a) in arrivals.iter().enumerate() {
                if a.app >= self.apps.len() || !(a.time_ms >= 0.0) {
                    return bad(&format!("workload.arrivals[{i}]"), "unknown app or negative time".into());
                }
            }
        }
        if let Err(e) = enumerate_configs(&self.grid) {
            return bad("grid", e.to_string());
        }
        Ok(())
    }

    fn base_profiles(&self, grid: &ConfigGrid) -> Result<ProfileTable> {
        match &self.profiles {
            None => ProfileTable::synthesize(&self.functions, grid, &self.profile_model),
            Some(records) => {
                let keep: Vec<Configuration> = enumerate_configs(grid)?;
                ProfileTable::from_entries(
                    grid,
                    records
                        .iter()
                        .map(|r| (r.function.as_str(), Configuration::new(r.batch, r.vcpus, r.vgpus), r.exec_ms))
                        .filter(|(_, c, _)| keep.contains(c))
                        .map(|(f, config, exec_ms)| (f, ProfileEntry { config, exec_ms })),
                )
            }
        }
    }

    /// Applications with every SLO filled in from the unablated profiles.
    pub fn resolved_apps(&self) -> Result<Vec<ApplicationDag>> {
        let profiles = self.base_profiles(&self.grid)?;
        self.apps
            .iter()
            .map(|a| {
                let edges = a.edges.clone().unwrap_or_else(|| {
                    a.functions.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
                });
                let dag = ApplicationDag::new(a.id.clone(), a.functions.clone(), edges, 1.0)?;
                let slo = match a.slo_ms {
                    Some(s) => s,
                    None => slo_for(&dag, self.workload.slo_mode, &profiles)?,
                };
                dag.with_slo(slo)
            })
            .collect()
    }

    /// The scenario with all defaults materialized, suitable for re-running.
    pub fn resolved(&self) -> Result<Self> {
        let apps = self.resolved_apps()?;
        let mut out = self.clone();
        for (spec, dag) in out.apps.iter_mut().zip(&apps) {
            spec.slo_ms = Some(dag.slo_ms());
            spec.edges = Some(dag.edges().to_vec());
        }
        Ok(out)
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let apps = self.resolved_apps()?;
        let mut grid = self.grid.clone();
        if self.ablation.no_batching {
            grid.batch = vec![1];
        }
        let mut profiles = self.base_profiles(&grid)?;
        let mut cluster = self.cluster.clone();
        let mut pricing = self.pricing;
        if self.ablation.no_gpu_sharing {
            // One whole GPU per node: a single unit that runs as fast as the
            // largest slice combination and costs as much as all slices.
            let top = grid.max_vgpus();
            profiles = profiles.remap(|_, p| {
                p.entries()
                    .iter()
                    .filter(|e| e.config.vgpus == top)
                    .map(|e| ProfileEntry { config: Configuration { vgpus: 1, ..e.config }, exec_ms: e.exec_ms })
                    .collect()
            })?;
            pricing.vgpu_per_hour *= f64::from(cluster.vgpus_per_node);
            grid.vgpus = vec![1];
            cluster.vgpus_per_node = 1;
        }
        let world = World::new(self.functions.clone(), apps, profiles, grid, pricing)?;
        let arrivals = match &self.workload.arrivals {
            Some(a) => a.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "workload"));
                generate_trace(
                    self.workload.regime.interval_range_ms(),
                    world.apps.len(),
                    self.workload.warmup_ms + self.workload.horizon_ms,
                    &mut rng,
                )
            }
        };
        Ok(Prepared { world, arrivals, cluster })
    }

    pub fn run(&self) -> Result<RunOutput> {
        let prepared = self.prepare()?;
        let noise_seed = derive_seed(self.seed, "noise");
        let sim = Simulation::new(&prepared.world, &prepared.cluster, self.sim.clone(), self.scheduler, noise_seed)?;
        let mut trace = sim.run(&prepared.arrivals, self.workload.warmup_ms + self.workload.horizon_ms)?;
        trace.warmup_ms = self.workload.warmup_ms;
        let summary = summarize(&trace, &prepared.world.pricing, self.gamma);
        let violations = validate_schedule(&trace);
        Ok(RunOutput { trace, summary, violations })
    }
}

pub const SUMMARY_PREFIX: [&str; 3] = ["scenario", "scheduler", "seed"];

/// Writes `summary.csv` rows (overall first, then per application).
pub fn write_summary_csv<W: Write>(scenario: &Scenario, summary: &RunSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_PREFIX.iter().chain(SUMMARY_HEADER.iter()))?;
    for row in summary.rows() {
        let mut rec = vec![scenario.name.clone(), scenario.scheduler.name.name().to_string(), scenario.seed.to_string()];
        rec.extend(row.values());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    GroupSize,
    Sigma,
    Regime,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::GroupSize => "group_size",
            SweepParam::Sigma => "sigma",
            SweepParam::Regime => "regime",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "k" => Ok(SweepParam::K),
            "group_size" | "group-size" => Ok(SweepParam::GroupSize),
            "sigma" => Ok(SweepParam::Sigma),
            "regime" => Ok(SweepParam::Regime),
            _ => Err(format!("unknown sweep parameter `{s}` (expected k, group_size, sigma or regime)")),
        }
    }
}

/// `base` with one parameter overridden from its textual value.
pub fn with_param(base: &Scenario, param: SweepParam, value: &str) -> Result<Scenario> {
    let bad = |reason: String| Error::InvalidScenario { field: format!("sweep.{}", param.name()), reason };
    let mut s = base.clone();
    match param {
        SweepParam::K => s.scheduler.k = value.parse().map_err(|e| bad(format!("`{value}`: {e}")))?,
        SweepParam::GroupSize => s.scheduler.group_size = value.parse().map_err(|e| bad(format!("`{value}`: {e}")))?,
        SweepParam::Sigma => s.sim.noise_sigma = value.parse().map_err(|e| bad(format!("`{value}`: {e}")))?,
        SweepParam::Regime => s.workload.regime = value.parse().map_err(bad)?,
    }
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub summary: SummaryRow,
    pub trace_hash: String,
}

pub fn sweep(base: &Scenario, param: SweepParam, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidScenario { field: "sweep.values".into(), reason: "at least one value is required".into() });
    }
    values
        .iter()
        .map(|v| {
            let out = with_param(base, param, v)?.run()?;
            Ok(SweepRow { value: v.clone(), trace_hash: out.trace_hash(), summary: out.summary.overall })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(base: &Scenario, param: SweepParam, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = ["param", "value"].iter().chain(SUMMARY_PREFIX.iter()).chain(SUMMARY_HEADER.iter()).chain(["trace_hash"].iter());
    w.write_record(header)?;
    for r in rows {
        let mut rec = vec![
            param.name().to_string(),
            r.value.clone(),
            base.name.clone(),
            base.scheduler.name.name().to_string(),
            base.seed.to_string(),
        ];
        rec.extend(r.summary.values());
        rec.push(r.trace_hash.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
