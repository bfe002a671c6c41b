use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fairdispatch_core::data::{synth_records, write_checkins, write_trips, CapacityMode, SynthParams};
use fairdispatch_core::experiment::{
    build_workload, run, run_json, run_workload, summarize, sweep, write_runs_csv,
    write_summary_csv, write_sweep_csv, ExperimentConfig, InputPaths, SweepAxis, SweepSpec,
};
use fairdispatch_core::geo::MetricKind;
use fairdispatch_core::{Algorithm, OfferMode};

#[derive(Parser)]
#[command(name = "fairdispatch", version, about = "Fair task allocation experiments")]
struct Cli {
    /// Worker threads for parallel runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trips.csv and checkins.csv.
    Generate(GenerateArgs),
    /// Run one configuration for every seed.
    Run(RunArgs),
    /// Sweep one parameter over values, allocators and seeds.
    Sweep(SweepArgs),
    /// Dump offer sessions and assignments of one seeded run as JSON.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 2000)]
    tasks: usize,
    #[arg(long, default_value_t = 100)]
    workers: usize,
    #[arg(long, default_value_t = 20.0)]
    checkins_per_worker: f64,
    /// Length of the generated time range in hours.
    #[arg(long, default_value_t = 168)]
    span_hours: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "checkins")]
    trips: Option<PathBuf>,
    #[arg(long, requires = "trips")]
    checkins: Option<PathBuf>,
    /// Synthetic task count.
    #[arg(long)]
    tasks: Option<usize>,
    /// Synthetic worker count.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    mode: Option<OfferMode>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    base_acceptance: Option<f64>,
    /// Online window in minutes, 0 for instant mode.
    #[arg(long)]
    window_min: Option<u32>,
    /// Seed; repeat for several.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Mean period length in minutes.
    #[arg(long)]
    delta_t_min: Option<i64>,
    #[arg(long)]
    fixed_delta_t: bool,
    #[arg(long)]
    radius_coefficient: Option<f64>,
    /// Give every worker this capacity.
    #[arg(long)]
    capacity: Option<u32>,
    #[arg(long)]
    skip_bad_rows: bool,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    mcf_max_tasks: Option<usize>,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<MetricKind>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write offer sessions as JSON here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write `task_id,worker_id` assignments of the first seed here.
    #[arg(long)]
    assignments: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Axis to sweep, overriding the config's sweep section.
    #[arg(long)]
    axis: Option<SweepAxis>,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Comma-separated allocators to compare.
    #[arg(long, value_delimiter = ',')]
    algos: Vec<Algorithm>,
    /// Per-seed rows (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Mean ± std table per cell.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    match s {
        "haversine" => Ok(MetricKind::Haversine),
        "planar" => Ok(MetricKind::Planar),
        _ => Err(format!("unknown metric {s:?}")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let (Some(trips), Some(checkins)) = (&self.trips, &self.checkins) {
            c.input = Some(InputPaths {
                trips: trips.clone(),
                checkins: checkins.clone(),
            });
            c.synth = None;
        } else if c.input.is_none() || self.tasks.is_some() || self.workers.is_some() {
            let synth = c.synth.get_or_insert_with(SynthParams::default);
            if let Some(n) = self.tasks {
                synth.tasks = n;
            }
            if let Some(n) = self.workers {
                synth.workers = n;
            }
            c.input = None;
        }
        if let Some(a) = self.algo {
            c.algorithm = a;
        }
        if let Some(v) = self.epsilon {
            c.policy.epsilon = v;
        }
        if let Some(v) = self.theta {
            c.policy.theta = v;
        }
        if let Some(m) = self.mode {
            c.policy.mode = m;
        }
        if let Some(v) = self.rho {
            c.rho = v;
        }
        if let Some(v) = self.base_acceptance {
            c.base_acceptance = v;
        }
        if self.window_min.is_some() {
            c.window_min = self.window_min;
        }
        if !self.seeds.is_empty() {
            c.seeds = self.seeds.clone();
        }
        if let Some(m) = self.delta_t_min {
            c.dataset.delta_t = m * 60;
        }
        c.dataset.fixed_delta_t |= self.fixed_delta_t;
        c.dataset.skip_bad_rows |= self.skip_bad_rows;
        if let Some(v) = self.radius_coefficient {
            c.dataset.radius_mean_coefficient = v;
        }
        if let Some(n) = self.capacity {
            c.dataset.capacity_mode = CapacityMode::Fixed(n);
        }
        if self.max_rounds.is_some() {
            c.max_rounds = self.max_rounds;
        }
        if let Some(n) = self.mcf_max_tasks {
            c.mcf_max_tasks = n;
        }
        if let Some(m) = self.metric {
            c.metric = m;
        }
        c.validate()?;
        Ok(c)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let params = SynthParams {
        tasks: args.tasks,
        workers: args.workers,
        checkins_per_worker: args.checkins_per_worker,
        span: args.span_hours * 3600,
        seed: args.seed,
        ..SynthParams::default()
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (trips, checkins) = synth_records(&params);
    write_trips(output(Some(&args.out.join("trips.csv")))?, &trips)?;
    write_checkins(output(Some(&args.out.join("checkins.csv")))?, &checkins)?;
    eprintln!(
        "wrote {} trips and {} check-ins to {}",
        trips.len(),
        checkins.len(),
        args.out.display()
    );
    Ok(())
}

fn run_cmd(args: &RunArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let runs = run(&config, args.trace.is_some())?;
    for r in &runs {
        if r.skipped_rows > 0 {
            eprintln!("seed {}: skipped {} bad rows", r.seed, r.skipped_rows);
        }
    }
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_runs_csv(&mut out, &runs)?,
        Format::Json => {
            let v: Vec<_> = runs.iter().map(run_json).collect();
            serde_json::to_writer_pretty(&mut out, &v)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if let Some(p) = &args.trace {
        let sessions: Vec<_> = runs
            .iter()
            .map(|r| serde_json::json!({ "seed": r.seed, "sessions": r.outcome.sessions }))
            .collect();
        let mut w = output(Some(p))?;
        serde_json::to_writer(&mut w, &sessions)?;
        w.flush()?;
    }
    if let Some(p) = &args.assignments {
        let mut w = output(Some(p))?;
        runs[0].outcome.assignments.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let mut config = args.config.resolve()?;
    if let Some(axis) = args.axis {
        config.sweep = Some(SweepSpec {
            axis,
            values: args.values.clone(),
            algorithms: args.algos.clone(),
        });
    } else if let Some(spec) = config.sweep.as_mut() {
        if !args.values.is_empty() {
            spec.values = args.values.clone();
        }
        if !args.algos.is_empty() {
            spec.algorithms = args.algos.clone();
        }
    } else {
        bail!("no sweep: pass --axis and --values or add a [sweep] section");
    }
    let rows = sweep(&config)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_sweep_csv(&mut out, &rows)?,
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|r| {
                    let mut j = run_json(&r.run);
                    j["axis"] = r.axis.name().into();
                    j["value"] = r.value.into();
                    j
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &v)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    let summary = summarize(&rows);
    match &args.summary {
        Some(p) => write_summary_csv(output(Some(p))?, &summary)?,
        None => write_summary_csv(io::stderr().lock(), &summary)?,
    }
    Ok(())
}

fn trace_cmd(args: &TraceArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let seed = config.seeds[0];
    let (workload, _) = build_workload(&config, seed)?;
    let outcome = run_workload(&config, &workload, seed, true)?;
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(
        &mut out,
        &serde_json::json!({
            "seed": seed,
            "report": outcome.report,
            "sessions": outcome.sessions,
            "assignments": outcome.assignments,
        }),
    )?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Trace(a) => trace_cmd(a),
    }
}
