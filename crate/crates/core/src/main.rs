use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nulsched::report::{self, SweepAxis, TraceFormat, CORE_SWEEP, TASK_SWEEP};
use nulsched::workload::{self, GenParams};
use nulsched::{engine, fixture, Platform, PolicyId, SimConfig};

#[derive(Parser)]
#[command(name = "nulsched", version, about = "EDF vs non-uniform-laxity EDF on multicore platforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Edf,
    NulEdf,
}

impl From<Policy> for PolicyId {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Edf => PolicyId::Edf,
            Policy::NulEdf => PolicyId::NulEdf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Events,
    Gantt,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Tasks,
    Cores,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one policy over one task set.
    Run {
        #[arg(long, value_enum, default_value = "nul-edf")]
        policy: Policy,
        #[arg(long, default_value_t = fixture::EXAMPLE_CORES)]
        cores: usize,
        /// Task-set file; the built-in worked example when omitted.
        #[arg(long)]
        taskset: Option<PathBuf>,
        /// Pin file (`task_id,core`). The worked example is pinned by default.
        #[arg(long)]
        pin: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Horizon in ticks; defaults to the latest deadline.
        #[arg(long)]
        max_time: Option<u64>,
        /// Use the full-precision Euler constant in the core-count bound.
        #[arg(long)]
        exact_euler: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep task or core counts and compare both policies.
    Compare {
        #[arg(long, value_enum, default_value = "tasks")]
        axis: Axis,
        /// Comma-separated sweep values; the reference sweep when omitted.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<usize>>,
        #[arg(long, default_value_t = fixture::EXAMPLE_CORES)]
        cores: usize,
        /// Task count for core sweeps.
        #[arg(long)]
        tasks: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Generator parameters (JSON); the bundled defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random task set.
    Gen {
        #[arg(long)]
        tasks: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Output file; a `.meta.json` sibling records the parameters.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the six-task worked example and check it against the reference values.
    Example {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn gen_params(path: Option<&PathBuf>, tasks: Option<usize>, seed: Option<u64>) -> Result<GenParams, Box<dyn std::error::Error>> {
    let mut p = match path {
        Some(p) => workload::load_gen_params(p)?,
        None => GenParams::default(),
    };
    if let Some(n) = tasks {
        p.n = n;
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    Ok(p)
}

fn execute(cmd: Command) -> Result<bool, Box<dyn std::error::Error>> {
    match cmd {
        Command::Run { policy, cores, taskset, pin, format, max_time, exact_euler, out } => {
            let (ts, default_pins) = match &taskset {
                Some(p) => (workload::load(p)?, Default::default()),
                None => (fixture::worked_example(), fixture::example_pins()),
            };
            let pins = match &pin {
                Some(p) => workload::load_pins(p)?,
                None => default_pins,
            };
            let platform = Platform::with_pins(cores, pins);
            let mut cfg = SimConfig::for_task_set(&ts);
            if let Some(t) = max_time {
                cfg.max_time = t;
            }
            cfg.exact_euler = exact_euler;
            let result = engine::run(policy.into(), &ts, &platform, &cfg)?;
            let text = match format {
                Format::Events => report::export_trace(&result, TraceFormat::Events),
                Format::Gantt => report::export_trace(&result, TraceFormat::Gantt),
                Format::Table => report::render_summary(&result),
            };
            emit(&text, out.as_ref())?;
            Ok(true)
        }
        Command::Compare { axis, sweep, cores, tasks, seed, params, out } => {
            let params = gen_params(params.as_ref(), tasks, seed)?;
            let (axis, default_sweep): (SweepAxis, &[usize]) = match axis {
                Axis::Tasks => (SweepAxis::Tasks, &TASK_SWEEP),
                Axis::Cores => (SweepAxis::Cores, &CORE_SWEEP),
            };
            let sweep = sweep.unwrap_or_else(|| default_sweep.to_vec());
            let c = report::compare(axis, &sweep, &params, &Platform::new(cores), &SimConfig::new(0))?;
            emit(&report::render_comparison(&c), out.as_ref())?;
            Ok(true)
        }
        Command::Gen { tasks, seed, params, out } => {
            let params = gen_params(params.as_ref(), tasks, seed)?;
            let (ts, gen_report) = workload::generate_with_report(&params)?;
            if !gen_report.clamped.is_empty() {
                eprintln!("clamped quantum to exec for {} task(s): {:?}", gen_report.clamped.len(), gen_report.clamped);
            }
            match out {
                Some(p) => workload::save_with_metadata(&ts, &p, &params)?,
                None => workload::write_task_set(&ts, std::io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::Example { out } => {
            let r = report::example_report()?;
            emit(&r.text, out.as_ref())?;
            Ok(r.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
