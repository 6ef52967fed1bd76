use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use robust_mdp::io::{read_instance, read_policy, write_instance, SolutionFile};
use robust_mdp::{
    evaluate_policy, q_value_iteration_sa, random_instance, value_iteration, Mdp, NormIndex,
    Policy, Rectangularity, SolveConfig, Uncertainty,
};
use robust_mdp_cli::{oracle_check, run_bench, write_bench_csv, write_check_csv, BenchSpec, CheckSpec, CliError, Result};

#[derive(Parser)]
#[command(name = "robustmdp", version, about = "Robust value iteration for Lp uncertainty sets")]
struct Cli {
    /// Worker threads per sweep; overrides ROBUSTMDP_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance as JSON.
    Gen {
        #[arg(long = "S")]
        states: usize,
        #[arg(long = "A")]
        actions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        reward_scale: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Robust value iteration on an instance file.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        unc: UncertaintyArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Iterate on Q instead of v (none/sa only).
        #[arg(long)]
        q_iteration: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Robust value of a fixed policy.
    Eval {
        instance: PathBuf,
        policy: PathBuf,
        #[command(flatten)]
        unc: UncertaintyArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time robust sweeps against the non-robust reference.
    Bench {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare the fast kernels with brute-force oracles.
    OracleCheck {
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the slowest grid and sample sizes.
        #[arg(long)]
        quick: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct UncertaintyArgs {
    /// none, sa or s.
    #[arg(long, default_value = "none")]
    rect: Rectangularity,
    /// Noise norm exponent: a number >= 1 or inf.
    #[arg(long, default_value = "2")]
    p: NormIndex,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Keep zero-probability transitions at zero under noise.
    #[arg(long)]
    forbid_unreachable: bool,
}

impl UncertaintyArgs {
    fn build(&self, inst: &Mdp) -> Uncertainty {
        let unc = Uncertainty::uniform(
            self.rect,
            self.p,
            inst.num_states,
            inst.num_actions,
            self.alpha,
            self.beta,
        );
        if self.forbid_unreachable {
            unc.with_forbidden_from_kernel(inst)
        } else {
            unc
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long)]
    inner_tol: Option<f64>,
}

impl SolveArgs {
    fn config(&self, workers: usize) -> SolveConfig<f64> {
        let mut cfg = SolveConfig::default()
            .with_epsilon(self.epsilon)
            .with_max_iters(self.max_iters)
            .with_workers(workers);
        cfg.inner_tol = self.inner_tol;
        cfg
    }
}

#[derive(Serialize)]
struct EvalFile {
    value: Vec<f64>,
    /// `<mu, v>`
    expected_return: f64,
    iterations: usize,
    residual: f64,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::io(p.display().to_string(), e))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io("output", e))
}

fn run(cli: Cli) -> Result<()> {
    let workers = cli.threads.unwrap_or_else(robust_mdp::parallel::threads_from_env).max(1);
    match cli.command {
        Command::Gen { states, actions, seed, gamma, reward_scale, output } => {
            let inst: Mdp = random_instance(states, actions, seed, reward_scale)?.with_discount(gamma)?;
            let mut out = sink(output.as_deref())?;
            write_instance(&inst, &mut out)?;
            writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io("output", e))
        }
        Command::Solve { instance, unc, solve, q_iteration, output } => {
            let inst: Mdp = read_instance(open(&instance)?)?;
            let u = unc.build(&inst);
            let cfg = solve.config(workers);
            let report = if q_iteration {
                q_value_iteration_sa(&inst, &u, &cfg)?
            } else {
                value_iteration(&inst, &u, &cfg)?
            };
            log::info!("converged in {} iterations", report.iterations);
            write_json(&SolutionFile::from_report(&report), output.as_deref())
        }
        Command::Eval { instance, policy, unc, solve, output } => {
            let inst: Mdp = read_instance(open(&instance)?)?;
            let pi: Policy = read_policy(open(&policy)?)?;
            let u = unc.build(&inst);
            let eval = evaluate_policy(&inst, &u, &pi, &solve.config(workers))?;
            let expected_return = inst.initial_dist.iter().zip(&eval.value.0).map(|(m, v)| m * v).sum();
            let file = EvalFile {
                value: eval.value.0,
                expected_return,
                iterations: eval.iterations,
                residual: eval.final_residual,
            };
            write_json(&file, output.as_deref())
        }
        Command::Bench { spec, output } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| CliError::io(spec.display().to_string(), e))?;
            let mut bench = BenchSpec::from_toml_str(&text)?;
            if cli.threads.is_some() {
                bench.threads = Some(workers);
            }
            let rows = run_bench(&bench)?;
            write_bench_csv(&rows, sink(output.as_deref())?)
        }
        Command::OracleCheck { cases, seed, quick, output } => {
            let mut spec = CheckSpec { cases, seed, ..CheckSpec::default() };
            if quick {
                spec.kappa_steps.retain(|&s| s >= 1e-4);
                spec.waterfill_steps.retain(|&s| s >= 1e-2);
                spec.inner_samples.retain(|&n| n <= 10_000);
            }
            let rows = oracle_check(&spec)?;
            write_check_csv(&rows, sink(output.as_deref())?)?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed { failed });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
