use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use esg_core::dispatch::SchedulerKind;
use esg_core::scenario::{sweep, write_summary_csv, write_sweep_csv, Scenario, SweepParam};
use esg_core::workload::{Regime, SloMode};

/// Simulates DNN workflow scheduling on a serverless cluster with shareable GPUs.
#[derive(Parser)]
#[command(name = "esg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, summary.csv and resolved.json.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario once per parameter value and write sweep.csv.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// k, group_size, sigma or regime.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print a bundled preset as JSON.
    Preset { name: String },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(conflicts_with = "preset")]
    file: Option<PathBuf>,
    /// strict-light, moderate-normal or relaxed-heavy.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    scheduler: Option<SchedulerKind>,
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long)]
    slo_mode: Option<SloMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    /// Execution-time noise (log-normal sigma).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    horizon_ms: Option<f64>,
    #[arg(long)]
    warmup_ms: Option<f64>,
    #[arg(long)]
    no_gpu_sharing: bool,
    #[arg(long)]
    no_batching: bool,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario> {
        let mut s = match (&self.file, &self.preset) {
            (Some(path), _) => Scenario::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => Scenario::default(),
        };
        if let Some(v) = self.scheduler {
            s.scheduler.name = v;
        }
        if let Some(v) = self.regime {
            s.workload.regime = v;
        }
        if let Some(v) = self.slo_mode {
            s.workload.slo_mode = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.k {
            s.scheduler.k = v;
        }
        if let Some(v) = self.group_size {
            s.scheduler.group_size = v;
        }
        if let Some(v) = self.sigma {
            s.sim.noise_sigma = v;
        }
        if let Some(v) = self.nodes {
            s.cluster.nodes = v;
        }
        if let Some(v) = self.horizon_ms {
            s.workload.horizon_ms = v;
        }
        if let Some(v) = self.warmup_ms {
            s.workload.warmup_ms = v;
        }
        s.ablation.no_gpu_sharing |= self.no_gpu_sharing;
        s.ablation.no_batching |= self.no_batching;
        s.validate()?;
        Ok(s)
    }
}

fn preset(name: &str) -> Result<Scenario> {
    match Scenario::preset(name) {
        Some(s) => Ok(s),
        None => bail!("unknown preset `{name}` (expected strict-light, moderate-normal or relaxed-heavy)"),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn run(args: &ScenarioArgs, out: &Path) -> Result<()> {
    let scenario = args.resolve()?;
    let result = scenario.run()?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    result.trace.write_csv(create(out, "trace.csv")?)?;
    write_summary_csv(&scenario, &result.summary, create(out, "summary.csv")?)?;
    fs::write(out.join("resolved.json"), scenario.to_json() + "\n")?;
    let o = &result.summary.overall;
    println!(
        "{} {} seed {}: {} instances, hit rate {:.4}, cost {:.4}, p99 {:.1} ms, overhead {:.3} ms",
        scenario.name,
        scenario.scheduler.name.name(),
        scenario.seed,
        o.instances,
        o.slo_hit_rate,
        o.total_cost,
        o.latency_p99_ms,
        o.overhead_mean_ms
    );
    for v in &result.violations {
        eprintln!("warning: {v}");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, out } => run(&scenario, &out),
        Command::Sweep { scenario, param, values, out } => {
            let base = scenario.resolve()?;
            let rows = sweep(&base, param, &values)?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            write_sweep_csv(&base, param, &rows, create(&out, "sweep.csv")?)?;
            for r in &rows {
                let o = &r.summary;
                println!(
                    "{}={}: hit rate {:.4}, cost {:.4}, overhead {:.3} ms",
                    param.name(),
                    r.value,
                    o.slo_hit_rate,
                    o.total_cost,
                    o.overhead_mean_ms
                );
            }
            Ok(())
        }
        Command::Preset { name } => {
            println!("{}", preset(&name)?.to_json());
            Ok(())
        }
    }
}
