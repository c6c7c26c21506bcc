use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use noma_core::baselines::SchedulerPolicy;
use noma_core::channel::RngState;
use noma_core::config::{InstanceFile, RunConfig};
use noma_core::dppa::{dppa_solve_with, PowerProblem, Recursion};
use noma_core::experiments::{run_comparison, run_usercount_sweep, run_v_sweep, ScenarioPreset, USERCOUNT_K};
use noma_core::oracle::{kkt_enumerate, random_problem};
use noma_core::report::{fmt_sig6, write_report};
use noma_core::{Error, Result};

#[derive(Parser)]
#[command(name = "noma", version, about = "NOMA rate control and power allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecursionArg {
    Bellman,
    PrefixMax,
}

impl From<RecursionArg> for Recursion {
    fn from(r: RecursionArg) -> Self {
        match r {
            RecursionArg::Bellman => Recursion::Bellman,
            RecursionArg::PrefixMax => Recursion::PrefixMax,
        }
    }
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Comma-separated policies (default: all five).
    #[arg(long, value_delimiter = ',')]
    policies: Vec<SchedulerPolicy>,
    /// Single seed; overrides --seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated replication seeds.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 50_000)]
    horizon: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write per-slot traces.
    #[arg(long)]
    traces: bool,
}

impl SweepArgs {
    fn apply(&self, mut preset: ScenarioPreset) -> ScenarioPreset {
        if !self.policies.is_empty() {
            preset.policies = self.policies.clone();
        }
        preset.seeds = match self.seed {
            Some(s) => vec![s],
            None => self.seeds.clone(),
        };
        preset.horizon = self.horizon;
        preset.record_traces = self.traces;
        preset
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one power allocation instance.
    Solve {
        instance: PathBuf,
        /// Also run the KKT enumeration and print the objective gap.
        #[arg(long)]
        verify: bool,
        #[arg(long, value_enum, default_value = "bellman")]
        recursion: RecursionArg,
    },
    /// Compare the DP solver with the KKT enumeration on random instances.
    Verify {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Largest tolerated relative objective gap.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Run one configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        policies: Vec<SchedulerPolicy>,
    },
    /// Sweep V over a preset scenario.
    SweepV {
        #[arg(long, default_value = "scenario1")]
        preset: String,
        /// Comma-separated V values (default: 9 log-spaced points in [0.1, 1000]).
        #[arg(long, value_delimiter = ',')]
        v: Vec<f64>,
        #[command(flatten)]
        common: SweepArgs,
    },
    /// Sweep the number of users, spread over 50 to 150 m.
    SweepK {
        #[arg(long, value_delimiter = ',', default_values_t = USERCOUNT_K)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 20.0)]
        v: f64,
        #[command(flatten)]
        common: SweepArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve {
            instance,
            verify,
            recursion,
        } => cmd_solve(&instance, verify, recursion.into()),
        Command::Verify {
            instances,
            k_min,
            k_max,
            seed,
            tolerance,
        } => cmd_verify(instances, k_min, k_max, seed, tolerance),
        Command::Run {
            config,
            seed,
            out,
            policies,
        } => cmd_run(&config, seed, out, policies),
        Command::SweepV { preset, v, common } => {
            let preset = common.apply(ScenarioPreset::by_name(&preset)?);
            let v_list = if v.is_empty() { preset.v_list.clone() } else { v };
            let report = run_v_sweep(&preset, &v_list)?;
            emit(&report, &common.out)
        }
        Command::SweepK { k, v, common } => {
            let preset = common.apply(ScenarioPreset::usercount());
            let report = run_usercount_sweep(&preset, &k, v)?;
            emit(&report, &common.out)
        }
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn print_solution(problem: &PowerProblem, recursion: Recursion) -> f64 {
    let sol = dppa_solve_with(problem, recursion);
    let k = problem.user_count();
    println!("users K = {k}, candidate levels L = {}", sol.candidates.len());
    println!("user,gain,weight,power_w");
    let weights = problem.to_original(problem.weights());
    let gains = problem.to_original(problem.gains());
    for i in 0..k {
        println!(
            "{},{},{},{}",
            i + 1,
            fmt_sig6(gains[i]),
            fmt_sig6(weights[i]),
            sol.allocation.powers[i]
        );
    }
    let prefix: Vec<String> = sol.prefix_sums.iter().map(|s| s.to_string()).collect();
    println!("prefix sums (decoding order): {}", prefix.join(", "));
    println!("objective: {}", sol.allocation.objective);
    sol.allocation.objective
}

fn cmd_solve(path: &Path, verify: bool, recursion: Recursion) -> Result<()> {
    let problem = InstanceFile::load(path)?.problem()?;
    let objective = print_solution(&problem, recursion);
    if verify {
        let kkt = kkt_enumerate(&problem)?;
        println!(
            "kkt objective: {} ({} cases, {} feasible)",
            kkt.allocation.objective, kkt.cases_examined, kkt.feasible_cases
        );
        println!("relative gap: {:e}", relative_gap(objective, kkt.allocation.objective));
    }
    Ok(())
}

fn cmd_verify(instances: usize, k_min: usize, k_max: usize, seed: u64, tolerance: f64) -> Result<()> {
    if k_min < 1 || k_min > k_max {
        return Err(Error::InvalidParameter {
            key: "k_min".into(),
            reason: format!("need 1 <= k_min <= k_max, got {k_min} and {k_max}"),
        });
    }
    let start = Instant::now();
    let mut rng = RngState::from_seed(seed);
    let mut worst = 0.0f64;
    for n in 0..instances {
        let k = k_min + n % (k_max - k_min + 1);
        let problem = random_problem(&mut rng, k)?;
        let dp = dppa_solve_with(&problem, Recursion::Bellman).allocation.objective;
        let kkt = kkt_enumerate(&problem)?.allocation.objective;
        let gap = relative_gap(dp, kkt);
        worst = worst.max(gap);
        if gap > tolerance {
            return Err(Error::Solver(format!(
                "instance {n} (K = {k}): DP objective {dp} vs KKT {kkt}, relative gap {gap:e}"
            )));
        }
    }
    println!(
        "{instances} instances, K in [{k_min}, {k_max}]: worst relative gap {worst:e} ({:.2?})",
        start.elapsed()
    );
    Ok(())
}

fn cmd_run(path: &Path, seed: Option<u64>, out: Option<PathBuf>, policies: Vec<SchedulerPolicy>) -> Result<()> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.control.seed = s;
    }
    let mut preset = cfg.preset()?;
    if !policies.is_empty() {
        preset.policies = policies;
    }
    let report = run_comparison(&preset, preset.v)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    emit(&report, &dir)
}

fn emit(report: &noma_core::experiments::ComparisonReport, dir: &Path) -> Result<()> {
    for path in write_report(report, dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
