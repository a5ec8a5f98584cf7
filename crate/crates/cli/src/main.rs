use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Error};
use clap::{Args, Parser, Subcommand};
use relayplan::harness::{self, HarnessError, Scheme, SweepKey};
use relayplan::planner::{InitMode, Mode, PlanError, PlanOptions};
use relayplan::{Bound, ScenarioParams};

#[derive(Parser)]
#[command(name = "relayplan", version, about = "Trajectory planning for a buffer-aided FSO/RF UAV relay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one trajectory and write its data products
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Optimize once per value of a scenario key
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        sweep_key: String,
        /// comma-separated values; `inf` is allowed for buffer_bits and delay_req_slots
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Occupancy histogram of a trajectory's x-coordinate
    Pmf {
        /// trajectory file written by `optimize` or `baseline`
        trajectory: PathBuf,
        #[arg(long, default_value_t = 300.0)]
        bin_width: f64,
        /// left edge of one bin; the default lines bins up at 250, 550, 850, ... m
        #[arg(long, default_value_t = 250.0, allow_hyphen_values = true)]
        bin_origin: f64,
        /// output file; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the static-relay or data-ferry reference scheme
    Baseline {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 300.0)]
        d1: f64,
        #[arg(long, default_value_t = 300.0)]
        d2: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// scenario file of `key = value` lines; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// override the buffer size in bits (`inf` for unbounded)
    #[arg(long)]
    buffer: Option<Bound>,
    /// override the average-delay limit in slots (`inf` for none)
    #[arg(long)]
    delay_req: Option<Bound>,
    /// fit γ0 so that static relaying matches the reference throughput
    #[arg(long)]
    calibrate: bool,
    /// reserved; every computation is deterministic
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, default_value = "delay-limited")]
    mode: Mode,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "midpoint")]
    init: InitMode,
}

/// Config problems exit with 1, solver problems with 2.
enum Failure {
    Config(Error),
    Solver(Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Plan(PlanError::Solver { .. } | PlanError::Infeasible(..)) => Failure::Solver(e.into()),
            other => Failure::Config(other.into()),
        }
    }
}

fn config(e: impl Into<Error>) -> Failure {
    Failure::Config(e.into())
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioParams, Failure> {
    let mut p = match &args.config {
        Some(path) => ScenarioParams::load(path).map_err(config)?,
        None => ScenarioParams::default(),
    };
    if let Some(b) = args.buffer {
        p.buffer_bits = b;
    }
    if let Some(d) = args.delay_req {
        p.delay_req_slots = d;
    }
    p.validate().map_err(config)?;
    if args.calibrate {
        p = harness::calibrated(&p)?;
    }
    Ok(p)
}

fn plan_options(p: &ScenarioParams, args: &PlanArgs) -> PlanOptions {
    let mut opts = PlanOptions::from_params(p);
    opts.init = args.init;
    if let Some(m) = args.max_iters {
        opts.max_iters = m;
    }
    if let Some(t) = args.tol {
        opts.tol = t;
    }
    opts
}

fn parse_values(text: &str) -> Result<Vec<Bound>, Failure> {
    let values: Vec<Bound> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Bound>().map_err(|e| anyhow!("sweep value `{s}`: {e}")))
        .collect::<Result<_, _>>()
        .map_err(Failure::Config)?;
    if values.is_empty() {
        return Err(config(anyhow!("no sweep values given")));
    }
    Ok(values)
}

fn write_scenario(out: &Path, p: &ScenarioParams) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(config)?;
    fs::write(out.join("scenario.txt"), p.to_text()).map_err(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Optimize { scenario, plan, out } => {
            let p = load_scenario(&scenario)?;
            let opts = plan_options(&p, &plan);
            let r = harness::optimize(&p, plan.mode, &opts)?;
            write_scenario(&out, &p)?;
            harness::write_plan(&out, &p, &r).map_err(config)?;
            print!("{}", harness::metrics_text(&p, &r));
        }
        Command::Sweep { scenario, plan, sweep_key, values, out } => {
            let p = load_scenario(&scenario)?;
            let key: SweepKey = sweep_key.parse().map_err(|e: String| config(anyhow!(e)))?;
            let values = parse_values(&values)?;
            let opts = plan_options(&p, &plan);
            let rows = harness::sweep(&p, key, &values, plan.mode, &opts);
            write_scenario(&out, &p)?;
            for (i, row) in rows.iter().enumerate() {
                if let Some(r) = &row.result {
                    let q = harness::apply_sweep_value(&p, key, row.value)?;
                    harness::write_plan(&out.join(format!("point_{i:02}")), &q, r).map_err(config)?;
                }
            }
            let table = harness::sweep_text(&rows);
            fs::write(out.join("sweep.csv"), &table).map_err(config)?;
            print!("{table}");
        }
        Command::Pmf { trajectory, bin_width, bin_origin, out } => {
            if !(bin_width > 0.0 && bin_width.is_finite()) {
                return Err(config(anyhow!("bin width must be positive")));
            }
            let text = fs::read_to_string(&trajectory)
                .with_context(|| format!("reading {}", trajectory.display()))
                .map_err(config)?;
            let traj = harness::parse_trajectory(&text, 1.0)?;
            let table = harness::pmf_text(&harness::pmf(&traj, bin_width, bin_origin));
            match out {
                Some(path) => fs::write(path, table).map_err(config)?,
                None => print!("{table}"),
            }
        }
        Command::Baseline { scenario, scheme, d1, d2, out } => {
            let scheme = match scheme.as_str() {
                "static" => Scheme::Static,
                "ferry" => Scheme::Ferry { d1, d2 },
                other => return Err(config(anyhow!("unknown scheme `{other}` (expected static or ferry)"))),
            };
            let p = load_scenario(&scenario)?;
            write_scenario(&out, &p)?;
            print!("{}", harness::run_baseline(&p, scheme, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
